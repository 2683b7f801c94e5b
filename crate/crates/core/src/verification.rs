//! Forecast verification: proper scores, calibration diagnostics and tests of
//! equal predictive performance and of PIT uniformity.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Predictive;
use crate::error::{Error, Result};
use crate::special::{chi_square_sf, norm_sf};

/// Which score [`score_cases`] computes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreKind {
    Crps,
    LogScore,
    /// Threshold-weighted CRPS with weight `1{y ≥ r}`.
    TwCrps(f64),
}

/// Per-case scores in case order. Non-finite values are kept and their
/// positions recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub values: Vec<f64>,
    pub non_finite: Vec<usize>,
}

impl ScoreSeries {
    pub fn new(values: Vec<f64>) -> Self {
        let non_finite = values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_finite())
            .map(|(i, _)| i)
            .collect();
        Self { values, non_finite }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Plain mean; non-finite entries propagate.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn check_aligned(forecasts: usize, observations: usize) -> Result<()> {
    if forecasts != observations {
        return Err(Error::LengthMismatch {
            what: "forecasts vs observations",
            left: forecasts,
            right: observations,
        });
    }
    if forecasts == 0 {
        return Err(Error::Empty("forecast cases"));
    }
    Ok(())
}

fn observed(observations: &[Option<f64>], i: usize) -> Result<f64> {
    observations[i].ok_or_else(|| Error::MissingObservation(format!("case {i}")))
}

pub fn score_one<P: Predictive>(forecast: &P, obs: f64, kind: ScoreKind) -> Result<f64> {
    match kind {
        ScoreKind::Crps => forecast.crps(obs),
        ScoreKind::LogScore => Ok(forecast.log_score(obs)),
        ScoreKind::TwCrps(r) => forecast.twcrps(obs, r),
    }
}

/// Scores every case. Forecasts and observations are aligned by position.
pub fn score_cases<P: Predictive + Sync>(forecasts: &[P], observations: &[Option<f64>], kind: ScoreKind) -> Result<ScoreSeries> {
    check_aligned(forecasts.len(), observations.len())?;
    let values = forecasts
        .par_iter()
        .enumerate()
        .map(|(i, f)| score_one(f, observed(observations, i)?, kind))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ScoreSeries::new(values))
}

/// Skill `1 − twCRPS(F)/twCRPS(F_ref)`; positive when `F` beats the reference.
pub fn twcrpss(mean_tw_f: f64, mean_tw_ref: f64) -> Result<f64> {
    if !(mean_tw_ref > 0.0) {
        return Err(Error::Degenerate(format!("reference twCRPS must be positive, got {mean_tw_ref}")));
    }
    if mean_tw_f == mean_tw_ref {
        return Ok(0.0);
    }
    Ok(1.0 - mean_tw_f / mean_tw_ref)
}

/// MAE of predictive medians and RMSE of predictive means.
pub fn point_scores<P: Predictive>(forecasts: &[P], observations: &[Option<f64>]) -> Result<(f64, f64)> {
    check_aligned(forecasts.len(), observations.len())?;
    let mut abs = 0.0;
    let mut sq = 0.0;
    for (i, f) in forecasts.iter().enumerate() {
        let x = observed(observations, i)?;
        abs += (f.median()? - x).abs();
        sq += (f.mean() - x).powi(2);
    }
    let n = forecasts.len() as f64;
    Ok((abs / n, (sq / n).sqrt()))
}

pub fn pit<P: Predictive>(forecast: &P, obs: f64) -> f64 {
    forecast.cdf(obs)
}

pub fn pit_values<P: Predictive>(forecasts: &[P], observations: &[Option<f64>]) -> Result<Vec<f64>> {
    check_aligned(forecasts.len(), observations.len())?;
    forecasts
        .iter()
        .enumerate()
        .map(|(i, f)| Ok(pit(f, observed(observations, i)?)))
        .collect()
}

/// Rank of `obs` among `members`, in `1..=M+1`. Ties are broken uniformly at
/// random among the admissible ranks.
pub fn verification_rank<R: Rng + ?Sized>(members: &[f64], obs: f64, rng: &mut R) -> usize {
    let below = members.iter().filter(|&&m| m < obs).count();
    let ties = members.iter().filter(|&&m| m == obs).count();
    let extra = if ties > 0 { rng.random_range(0..=ties) } else { 0 };
    below + 1 + extra
}

/// Counts of verification ranks over cases, `M + 1` bins. Tie-breaking
/// draws come from one stream seeded by `seed`, in case order.
pub fn rank_histogram(ensembles: &[&[f64]], observations: &[Option<f64>], seed: u64) -> Result<Vec<usize>> {
    check_aligned(ensembles.len(), observations.len())?;
    let m = ensembles[0].len();
    if m == 0 {
        return Err(Error::Empty("ensemble members"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0; m + 1];
    for (i, members) in ensembles.iter().enumerate() {
        if members.len() != m {
            return Err(Error::LengthMismatch {
                what: "ensemble sizes",
                left: members.len(),
                right: m,
            });
        }
        counts[verification_rank(members, observed(observations, i)?, &mut rng) - 1] += 1;
    }
    Ok(counts)
}

/// Counts of values in `bins` equal-width bins on `[0, 1]`; 1 falls in the last bin.
pub fn pit_histogram(pits: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    if bins == 0 {
        return counts;
    }
    for &u in pits {
        let b = ((u * bins as f64).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

/// Percentage of observations inside the central `nominal_pct` interval
/// `[q(α/2), q(1 − α/2)]` (closed), and the mean interval width.
pub fn coverage_and_width<P: Predictive>(forecasts: &[P], observations: &[Option<f64>], nominal_pct: f64) -> Result<(f64, f64)> {
    if !(nominal_pct > 0.0 && nominal_pct < 100.0) {
        return Err(Error::invalid("nominal_pct", format!("must lie in (0, 100), got {nominal_pct}")));
    }
    check_aligned(forecasts.len(), observations.len())?;
    let alpha = 1.0 - nominal_pct / 100.0;
    let mut inside = 0usize;
    let mut width = 0.0;
    for (i, f) in forecasts.iter().enumerate() {
        let x = observed(observations, i)?;
        let lo = f.quantile(0.5 * alpha)?;
        let hi = f.quantile(1.0 - 0.5 * alpha)?;
        if lo <= x && x <= hi {
            inside += 1;
        }
        width += hi - lo;
    }
    let n = forecasts.len() as f64;
    Ok((100.0 * inside as f64 / n, width / n))
}

/// Nominal coverage of the range of an `m`-member ensemble, `(M−1)/(M+1)`, in percent.
pub fn ensemble_range_nominal_pct(members: usize) -> f64 {
    100.0 * (members as f64 - 1.0) / (members as f64 + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    /// `t_N`; negative values favour the first forecast.
    pub statistic: f64,
    pub p_value: f64,
    pub lag: usize,
    /// Cases entering the statistic.
    pub n: usize,
    /// The HAC variance was nonpositive and `γ̂₀` was used instead.
    pub variance_fallback: bool,
    /// Cases where only the first forecast's score was non-finite.
    pub infinite_against_f: usize,
    /// Cases where only the second forecast's score was non-finite.
    pub infinite_against_g: usize,
    /// Cases where both scores were non-finite.
    pub both_non_finite: usize,
}

/// Sample autocovariance at lag `k` around `mean`, normalised by `N`.
fn autocovariance(d: &[f64], mean: f64, k: usize) -> f64 {
    let n = d.len();
    let mut s = 0.0;
    for t in k..n {
        s += (d[t] - mean) * (d[t - k] - mean);
    }
    s / n as f64
}

/// Diebold–Mariano test on the score differences `S(F) − S(G)` with
/// autocovariances up to lag `h − 1`.
///
/// Cases where either score is non-finite are left out of the statistic and
/// tallied in the result instead.
pub fn dm_test(series_f: &ScoreSeries, series_g: &ScoreSeries, h: usize) -> Result<DmResult> {
    if series_f.len() != series_g.len() {
        return Err(Error::LengthMismatch {
            what: "score series",
            left: series_f.len(),
            right: series_g.len(),
        });
    }
    if h == 0 {
        return Err(Error::invalid("h", "forecast horizon must be at least 1"));
    }
    let mut d = Vec::with_capacity(series_f.len());
    let (mut against_f, mut against_g, mut both) = (0, 0, 0);
    for (&f, &g) in series_f.values.iter().zip(&series_g.values) {
        match (f.is_finite(), g.is_finite()) {
            (true, true) => d.push(f - g),
            (false, true) => against_f += 1,
            (true, false) => against_g += 1,
            (false, false) => both += 1,
        }
    }
    let n = d.len();
    if n < h || n == 0 {
        return Err(Error::invalid("h", format!("need at least h = {h} finite score pairs, got {n}")));
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    let gamma0 = autocovariance(&d, mean, 0);
    // A difference series that is constant up to rounding has no sampling
    // variability; treat it as exactly degenerate.
    let scale = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let degenerate = gamma0.sqrt() <= 64.0 * f64::EPSILON * scale;
    let mut variance = if degenerate { 0.0 } else { gamma0 };
    let mut fallback = false;
    if !degenerate {
        for k in 1..h {
            variance += 2.0 * autocovariance(&d, mean, k);
        }
        if !(variance > 0.0) {
            variance = gamma0;
            fallback = true;
        }
    }
    let statistic = if variance > 0.0 {
        (n as f64).sqrt() * mean / variance.sqrt()
    } else if mean == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(mean)
    };
    Ok(DmResult {
        statistic,
        p_value: (2.0 * norm_sf(statistic.abs())).min(1.0),
        lag: h,
        n,
        variance_fallback: fallback,
        infinite_against_f: against_f,
        infinite_against_g: against_g,
        both_non_finite: both,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Chi-square degrees of freedom: the rank of the covariance estimate.
    pub df: usize,
}

pub const MIN_UNIFORMITY_SAMPLE: usize = 50;

fn moment_vector(u: f64) -> Vector4<f64> {
    let c = u - 0.5;
    let c2 = c * c;
    Vector4::new(c, c2 - 1.0 / 12.0, c2 * c, c2 * c2 - 1.0 / 80.0)
}

/// Wald test that the first four moments of `u − ½` match those of a uniform
/// variable (`0, 1/12, 0, 1/80`).
///
/// The covariance of the moment conditions is estimated without centring and
/// with Bartlett weights up to `lag` to allow for serial dependence. A
/// rank-deficient estimate is inverted on its range, with the degrees of
/// freedom reduced to match.
pub fn uniformity_test(pit_values: &[f64], lag: usize) -> Result<UniformityResult> {
    let n = pit_values.len();
    if n < MIN_UNIFORMITY_SAMPLE {
        return Err(Error::invalid(
            "pit_values",
            format!("need at least {MIN_UNIFORMITY_SAMPLE} values, got {n}"),
        ));
    }
    if pit_values.iter().any(|u| !(0.0..=1.0).contains(u)) {
        return Err(Error::invalid("pit_values", "values must lie in [0, 1]"));
    }
    let g: Vec<Vector4<f64>> = pit_values.iter().map(|&u| moment_vector(u)).collect();
    let mean = g.iter().sum::<Vector4<f64>>() / n as f64;
    let mut omega = Matrix4::zeros();
    for v in &g {
        omega += v * v.transpose();
    }
    for k in 1..=lag.min(n - 1) {
        let w = 1.0 - k as f64 / (lag as f64 + 1.0);
        let mut gamma = Matrix4::zeros();
        for t in k..n {
            gamma += g[t] * g[t - k].transpose();
        }
        omega += w * (gamma + gamma.transpose());
    }
    omega /= n as f64;

    let eig = SymmetricEigen::new(omega);
    let largest = eig.eigenvalues.max();
    if !(largest > 0.0) || !largest.is_finite() {
        return Err(Error::SingularCovariance);
    }
    let cutoff = largest * 1e-10;
    let mut statistic = 0.0;
    let mut df = 0;
    for i in 0..4 {
        let lambda = eig.eigenvalues[i];
        if lambda > cutoff {
            let proj = eig.eigenvectors.column(i).dot(&mean);
            statistic += proj * proj / lambda;
            df += 1;
        }
    }
    statistic *= n as f64;
    Ok(UniformityResult {
        statistic,
        p_value: chi_square_sf(statistic, df),
        df,
    })
}

/// Fraction of `n_samples` random subsamples (each drawn without
/// replacement and kept in time order) on which [`uniformity_test`] rejects
/// at `level`. Subsample `i` uses stream `i` of `seed`.
pub fn bootstrap_rejection_rate(
    pit_values: &[f64],
    n_samples: usize,
    sample_size: usize,
    level: f64,
    lag: usize,
    seed: u64,
) -> Result<f64> {
    if sample_size > pit_values.len() {
        return Err(Error::invalid(
            "sample_size",
            format!("{sample_size} exceeds the {} available PIT values", pit_values.len()),
        ));
    }
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be positive"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", "must lie in (0, 1)"));
    }
    let rejections: Vec<bool> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut idx = index::sample(&mut rng, pit_values.len(), sample_size).into_vec();
            idx.sort_unstable();
            let sample: Vec<f64> = idx.iter().map(|&j| pit_values[j]).collect();
            uniformity_test(&sample, lag).map(|r| r.p_value < level)
        })
        .collect::<Result<_>>()?;
    Ok(rejections.iter().filter(|&&r| r).count() as f64 / n_samples as f64)
}

/// Pearson correlation of two equally long series.
pub fn series_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what: "correlation series",
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 3 {
        return Err(Error::invalid("series", "need at least 3 values"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Degenerate("correlation of a constant series".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Mean twCRPS at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScore {
    pub threshold: f64,
    pub value: f64,
}

/// Summary scores for one forecast model over a verification period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub forecast: String,
    pub cases: usize,
    pub mean_crps: f64,
    pub mean_twcrps: Vec<ThresholdScore>,
    pub mae_median: f64,
    pub rmse_mean: f64,
    pub nominal_pct: f64,
    pub coverage_pct: f64,
    pub avg_width: f64,
    /// Mean log score; `None` when not finite, i.e. for forecasts without a
    /// density or with observations outside the support.
    pub mean_logs: Option<f64>,
    pub pit_values: Vec<f64>,
    /// Verification-rank histogram for ensembles; for continuous forecasts a
    /// PIT histogram with the same number of bins.
    pub rank_counts: Vec<usize>,
}

/// Options shared by the reports of one verification run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub thresholds: Vec<f64>,
    pub nominal_pct: f64,
    /// Number of histogram bins, `M + 1` for an `M`-member ensemble.
    pub bins: usize,
    pub seed: u64,
}

/// Scores, point scores, coverage and histograms for one forecast model.
/// For ensemble forecasts `ensembles` supplies the members used for ranks.
pub fn build_report<P: Predictive + Sync>(
    name: &str,
    forecasts: &[P],
    observations: &[Option<f64>],
    ensembles: Option<&[&[f64]]>,
    opts: &ReportOptions,
) -> Result<VerificationReport> {
    check_aligned(forecasts.len(), observations.len())?;
    let crps = score_cases(forecasts, observations, ScoreKind::Crps)?;
    let logs = score_cases(forecasts, observations, ScoreKind::LogScore)?;
    let mean_twcrps = opts
        .thresholds
        .iter()
        .map(|&r| {
            Ok(ThresholdScore {
                threshold: r,
                value: score_cases(forecasts, observations, ScoreKind::TwCrps(r))?.mean(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (mae_median, rmse_mean) = point_scores(forecasts, observations)?;
    let (coverage_pct, avg_width) = coverage_and_width(forecasts, observations, opts.nominal_pct)?;
    let pit_values = pit_values(forecasts, observations)?;
    let rank_counts = match ensembles {
        Some(members) => rank_histogram(members, observations, opts.seed)?,
        None => pit_histogram(&pit_values, opts.bins),
    };
    Ok(VerificationReport {
        forecast: name.to_string(),
        cases: forecasts.len(),
        mean_crps: crps.mean(),
        mean_twcrps,
        mae_median,
        rmse_mean,
        nominal_pct: opts.nominal_pct,
        coverage_pct,
        avg_width,
        mean_logs: Some(logs.mean()).filter(|v| v.is_finite()),
        pit_values,
        rank_counts,
    })
}
