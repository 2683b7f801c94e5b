//! Derivative-free Nelder–Mead simplex minimisation.
//!
//! Non-finite objective values are treated as `+∞`; such vertices sort last
//! and the simplex contracts away from them.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Converged once `f_max − f_min` over the simplex drops below this.
    pub f_spread_tol: f64,
    /// Evaluation budget across all restarts.
    pub max_evals: usize,
    /// Fresh simplices built around the incumbent after convergence.
    pub restarts: usize,
}

impl NelderMeadOptions {
    /// `500·dim` evaluations, spread tolerance `1e-6`.
    pub fn for_dimension(dim: usize) -> Self {
        Self {
            f_spread_tol: 1e-6,
            max_evals: 500 * dim.max(1),
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

struct Vertex {
    x: Vec<f64>,
    f: f64,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimises `f` starting from `x0`, with initial simplex edges `steps`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], steps: &[f64], opts: NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), steps.len(), "one step per coordinate");
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        sanitize(f(x))
    };

    let mut best = Vertex {
        x: x0.to_vec(),
        f: eval(x0, &mut evals),
    };
    if n == 0 {
        return Minimum {
            x: best.x,
            value: best.f,
            evals,
            converged: true,
        };
    }

    // Dimension-adaptive coefficients (Gao & Han).
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut converged = false;
    for round in 0..=opts.restarts {
        let mut simplex = Vec::with_capacity(n + 1);
        simplex.push(Vertex {
            x: best.x.clone(),
            f: best.f,
        });
        for i in 0..n {
            let mut x = best.x.clone();
            x[i] += steps[i];
            let fx = eval(&x, &mut evals);
            simplex.push(Vertex { x, f: fx });
        }
        let start_value = best.f;
        converged = false;

        loop {
            simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
            let spread = simplex[n].f - simplex[0].f;
            if simplex[n].f.is_finite() && spread < opts.f_spread_tol {
                converged = true;
                break;
            }
            if evals >= opts.max_evals {
                break;
            }
            let mut centroid = vec![0.0; n];
            for v in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(&v.x) {
                    *c += xi / nf;
                }
            }
            let along = |t: f64, worst: &[f64]| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(worst)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let worst = simplex[n].x.clone();
            let xr = along(alpha, &worst);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].f {
                let xe = along(alpha * beta, &worst);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { Vertex { x: xe, f: fe } } else { Vertex { x: xr, f: fr } };
                continue;
            }
            if fr < simplex[n - 1].f {
                simplex[n] = Vertex { x: xr, f: fr };
                continue;
            }
            let (xc, fc) = if fr < simplex[n].f {
                let xc = along(alpha * gamma, &worst);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(-gamma, &worst);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < simplex[n].f.min(fr) {
                simplex[n] = Vertex { x: xc, f: fc };
                continue;
            }
            let anchor = simplex[0].x.clone();
            for v in simplex.iter_mut().skip(1) {
                for (xi, a) in v.x.iter_mut().zip(&anchor) {
                    *xi = a + delta * (*xi - a);
                }
                v.f = eval(&v.x, &mut evals);
            }
        }

        simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
        let top = simplex.swap_remove(0);
        if top.f < best.f {
            best = top;
        }
        let improvement = start_value - best.f;
        if round > 0 && !(improvement > opts.f_spread_tol) {
            break;
        }
        if evals >= opts.max_evals {
            break;
        }
    }

    Minimum {
        x: best.x,
        value: best.f,
        evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimises_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            f_spread_tol: 1e-14,
            max_evals: 5000,
            restarts: 2,
        };
        let m = nelder_mead(rosen, &[-1.2, 1.0], &[0.5, 0.5], opts);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn avoids_infinite_region() {
        // Feasible only for x > 0.
        let f = |x: &[f64]| if x[0] <= 0.0 { f64::INFINITY } else { (x[0] - 0.1).powi(2) + x[1] * x[1] };
        let m = nelder_mead(f, &[2.0, 1.0], &[1.0, 1.0], NelderMeadOptions::for_dimension(2));
        assert!(m.value.is_finite());
        assert!((m.x[0] - 0.1).abs() < 1e-2);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| x.iter().map(|v| v.abs()).sum::<f64>();
        let x0 = [0.0, 0.0, 0.0];
        let m = nelder_mead(f, &x0, &[1.0; 3], NelderMeadOptions::for_dimension(3));
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn respects_budget() {
        let f = |x: &[f64]| x[0].sin() * x[1].cos() + 0.01 * x[0] * x[0];
        let opts = NelderMeadOptions {
            f_spread_tol: 0.0,
            max_evals: 50,
            restarts: 0,
        };
        let m = nelder_mead(f, &[1.0, 1.0], &[0.1, 0.1], opts);
        assert!(!m.converged);
        assert!(m.evals <= 50 + 4);
    }
}
