//! Bracketed scalar root finding (Brent's method).

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Stop once `|f(x)| <= f_tol`.
    pub f_tol: f64,
    /// Stop once the bracket is narrower than this (relative to `|x|`, floored at 1).
    pub x_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            f_tol: 1e-12,
            x_tol: 4.0 * f64::EPSILON,
            max_iter: 200,
        }
    }
}

/// Finds `x` in `[lo, hi]` with `f(x) ≈ 0`. The endpoints must bracket a sign change.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, opts: RootOptions) -> Result<f64, String> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa.abs() <= opts.f_tol {
        return Ok(a);
    }
    if fb.abs() <= opts.f_tol {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(format!("no sign change on [{lo}, {hi}] (f = {fa}, {fb})"));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..opts.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = opts.x_tol * b.abs().max(1.0);
        let m = 0.5 * (c - b);
        if fb.abs() <= opts.f_tol || m.abs() <= tol {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(format!("iteration cap {} reached", opts.max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cube_root() {
        let x = brent(|x| x * x * x - 2.0, 0.0, 2.0, RootOptions::default()).unwrap();
        assert!((x - 2f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn requires_bracket() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, RootOptions::default()).is_err());
    }
}
