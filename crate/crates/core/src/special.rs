//! Standard normal density, distribution and quantile functions.
//!
//! `Φ` is evaluated through `erfc`, so both tails keep full relative accuracy.
//! [`ln_norm_cdf`] stays finite far into the lower tail where `Φ` itself
//! underflows, which is what the truncated-normal normaliser needs when the
//! optimiser pushes `μ/σ` to large negative values.

// Published rational-approximation coefficients, kept digit for digit.
#![allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// ½·ln(2π)
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this point `ln Φ` switches to the asymptotic tail series.
const LOG_TAIL_SWITCH: f64 = -37.0;

#[inline]
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

#[inline]
pub fn ln_norm_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail `1 − Φ(z)`.
#[inline]
pub fn norm_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// `ln Φ(z)`, finite for every finite `z`.
pub fn ln_norm_cdf(z: f64) -> f64 {
    if z > 0.0 {
        (-norm_sf(z)).ln_1p()
    } else if z > LOG_TAIL_SWITCH {
        norm_cdf(z).ln()
    } else {
        // Φ(z) = φ(z)/|z| · Σ (-1)^k (2k-1)!! / z^{2k}
        let inv_z2 = 1.0 / (z * z);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..12 {
            term *= -((2 * k - 1) as f64) * inv_z2;
            sum += term;
        }
        ln_norm_pdf(z) - (-z).ln() + sum.ln()
    }
}

/// Inverse of `Φ` (Wichura's AS 241, about 16 significant digits).
pub fn norm_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * central_ratio(r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let val = tail_quantile((-tail.ln()).sqrt());
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// `Φ⁻¹(exp(ln_p))` for the lower tail, accurate where `exp(ln_p)` underflows.
pub fn norm_quantile_from_ln(ln_p: f64) -> f64 {
    if ln_p >= (0.075f64).ln() {
        return norm_quantile(ln_p.exp());
    }
    let mut z = -tail_quantile((-ln_p).sqrt());
    // Newton on ln Φ polishes the extreme tail where the rational fit degrades.
    for _ in 0..3 {
        let ln_cdf = ln_norm_cdf(z);
        let step = (ln_cdf - ln_p) / (ln_norm_pdf(z) - ln_cdf).exp();
        z -= step;
        if step.abs() <= 1e-15 * z.abs().max(1.0) {
            break;
        }
    }
    z
}

fn central_ratio(r: f64) -> f64 {
    (((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_128) * r
        + 67265.770_927_008_700_853)
        * r
        + 45921.953_931_549_871_457)
        * r
        + 13731.693_765_509_461_125)
        * r
        + 1971.590_950_306_551_442_7)
        * r
        + 133.141_667_891_784_377_45)
        * r
        + 3.387_132_872_796_366_608)
        / (((((((r * 5226.495_278_852_545_925 + 28729.085_735_721_942_674) * r
            + 39307.895_800_092_710_61)
            * r
            + 21213.794_301_586_595_867)
            * r
            + 5394.196_021_424_751_107_7)
            * r
            + 687.187_007_492_057_908_3)
            * r
            + 42.313_330_701_600_911_252)
            * r
            + 1.0)
}

/// Positive quantile magnitude for `r = sqrt(-ln tail)`.
fn tail_quantile(r: f64) -> f64 {
    if r <= 5.0 {
        let r = r - 1.6;
        (((((((r * 7.745_450_142_783_414_076_4e-4 + 0.022_723_844_989_269_184_583_3) * r
            + 0.241_780_725_177_450_611_77)
            * r
            + 1.270_458_252_452_368_382_58)
            * r
            + 3.647_848_324_763_204_605_04)
            * r
            + 5.769_497_221_460_691_405_5)
            * r
            + 4.630_337_846_156_545_295_9)
            * r
            + 1.423_437_110_749_683_577_34)
            / (((((((r * 1.050_750_071_644_416_843_24e-9 + 5.475_938_084_995_344_946e-4)
                * r
                + 0.015_198_666_563_616_457_196_6)
                * r
                + 0.148_103_976_427_480_074_59)
                * r
                + 0.689_767_334_985_100_004_55)
                * r
                + 1.676_384_830_183_803_849_4)
                * r
                + 2.053_191_626_637_758_821_87)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((r * 2.010_334_399_292_288_132_65e-7 + 2.711_555_568_743_487_578_15e-5) * r
            + 0.001_242_660_947_388_078_438_6)
            * r
            + 0.026_532_189_526_576_123_093)
            * r
            + 0.296_560_571_828_504_891_23)
            * r
            + 1.784_826_539_917_291_335_8)
            * r
            + 5.463_784_911_164_114_369_9)
            * r
            + 6.657_904_643_501_103_777_2)
            / (((((((r * 2.044_263_103_389_939_785_64e-15 + 1.421_511_758_316_445_888_7e-7)
                * r
                + 1.846_318_317_510_054_681_8e-5)
                * r
                + 7.868_691_311_456_132_591e-4)
                * r
                + 0.014_875_361_290_850_614_852_5)
                * r
                + 0.136_929_880_922_735_805_31)
                * r
                + 0.599_832_206_555_887_937_69)
                * r
                + 1.0)
    }
}

/// Survival function of the chi-square distribution for 1 to 4 degrees of freedom.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let half = 0.5 * x;
    match df {
        1 => libm::erfc(half.sqrt()),
        2 => (-half).exp(),
        3 => libm::erfc(half.sqrt()) + (2.0 * x / PI).sqrt() * (-half).exp(),
        4 => (-half).exp() * (1.0 + half),
        _ => panic!("chi_square_sf supports 1..=4 degrees of freedom, got {df}"),
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
        // Φ(-10) from high-precision tables
        let rel = (norm_cdf(-10.0) - 7.619_853_024_160_526e-24).abs() / 7.619_853_024_160_526e-24;
        assert!(rel < 1e-13, "{rel}");
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-300, 1e-20, 1e-9, 0.01, 0.075, 0.3, 0.5, 0.75, 0.925, 0.99, 1.0 - 1e-9] {
            let z = norm_quantile(p);
            let back = norm_cdf(z);
            assert!((back - p).abs() <= 1e-13 * p.max(1e-300) + 1e-16, "p={p} z={z} back={back}");
        }
        assert!((norm_quantile(0.75) - 0.674_489_750_196_081_7).abs() < 1e-14);
    }

    #[test]
    fn log_cdf_matches_direct_and_asymptotic() {
        for &z in &[-36.9, -30.0, -10.0, -5.0, -1.0, 0.0, 2.0, 9.0] {
            let direct = norm_cdf(z).ln();
            assert!((ln_norm_cdf(z) - direct).abs() <= 1e-12 * direct.abs().max(1.0), "z={z}");
        }
        // continuity across the tail switch
        let a = ln_norm_cdf(LOG_TAIL_SWITCH + 1e-9);
        let b = ln_norm_cdf(LOG_TAIL_SWITCH - 1e-9);
        assert!((a - b).abs() < 1e-7 * a.abs());
        assert!(ln_norm_cdf(-200.0).is_finite());
    }

    #[test]
    fn log_quantile_round_trip() {
        for &lp in &[-3.0, -50.0, -700.0, -800.0, -5000.0] {
            let z = norm_quantile_from_ln(lp);
            assert!((ln_norm_cdf(z) - lp).abs() < 1e-10 * lp.abs(), "lp={lp} z={z}");
        }
    }

    #[test]
    fn chi_square_tails() {
        // 95% critical values
        assert!((chi_square_sf(3.841_458_820_694_124, 1) - 0.05).abs() < 1e-12);
        assert!((chi_square_sf(5.991_464_547_107_979, 2) - 0.05).abs() < 1e-12);
        assert!((chi_square_sf(7.814_727_903_251_178, 3) - 0.05).abs() < 1e-12);
        assert!((chi_square_sf(9.487_729_036_781_154, 4) - 0.05).abs() < 1e-12);
    }
}
