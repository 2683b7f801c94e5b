//! Optimum-score estimation of EMOS coefficients over rolling training windows.
//!
//! Coefficients are fitted by Nelder–Mead on an unconstrained internal
//! vector: variance coefficients enter squared (`b = c²`) and the mixture
//! weight through a logistic transform, so every candidate the optimiser
//! evaluates satisfies the constraints by construction. Candidates whose link
//! is infeasible on any training case score `+∞`.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{EmpiricalDistribution, Predictive, PredictiveDistribution};
use crate::emos::{
    ensemble_stats, link, CoefficientSet, EnsembleStats, ExchangeableGrouping, ForecastCase,
    LinkCoefficients, ModelKind,
};
use crate::error::{Error, Result};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::special::{logistic, logit};

/// Objective-evaluation batches smaller than this stay on the calling thread.
const PARALLEL_MIN_CASES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Objective {
    /// Minimum mean CRPS.
    MinCrps,
    /// Maximum likelihood, i.e. minimum mean logarithmic score.
    MaxLikelihood,
}

impl Objective {
    pub fn as_str(&self) -> &'static str {
        match self {
            Objective::MinCrps => "MIN_CRPS",
            Objective::MaxLikelihood => "MAX_LIKELIHOOD",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "MIN_CRPS" | "CRPS" => Ok(Objective::MinCrps),
            "MAX_LIKELIHOOD" | "ML" | "LOGS" => Ok(Objective::MaxLikelihood),
            other => Err(format!("unknown objective `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Pooling {
    /// One coefficient set per date across all stations.
    Regional,
    /// One coefficient set per date and station.
    Local,
}

impl Pooling {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pooling::Regional => "REGIONAL",
            Pooling::Local => "LOCAL",
        }
    }
}

impl std::str::FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "REGIONAL" => Ok(Pooling::Regional),
            "LOCAL" => Ok(Pooling::Local),
            other => Err(format!("unknown pooling `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Calendar days preceding each verification date used for training.
    pub window_days: u32,
    pub objective: Objective,
    pub model_kind: ModelKind,
    pub pooling: Pooling,
    /// Ensemble-median threshold for REGIME_SWITCH.
    pub threshold: Option<f64>,
    /// Warm-start each date from the previous date's fit. When off, dates are
    /// fitted independently and in parallel.
    pub chain_warm_start: bool,
}

impl TrainingConfig {
    pub fn new(model_kind: ModelKind, objective: Objective, window_days: u32) -> Self {
        Self {
            window_days,
            objective,
            model_kind,
            pooling: Pooling::Regional,
            threshold: None,
            chain_warm_start: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_days < 2 {
            return Err(Error::invalid("window_days", format!("must be at least 2, got {}", self.window_days)));
        }
        if self.model_kind == ModelKind::RegimeSwitch {
            match self.threshold {
                Some(t) if t > 0.0 => {}
                _ => return Err(Error::invalid("threshold", "REGIME_SWITCH requires a positive threshold")),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coefficients: CoefficientSet,
    /// Mean training score of `coefficients`.
    pub objective_value: f64,
    /// Objective evaluations spent.
    pub iterations: usize,
    pub converged: bool,
}

/// Ensemble statistics and observation for one training case.
#[derive(Debug, Clone)]
pub struct TrainingCase {
    pub stats: EnsembleStats,
    pub observation: f64,
}

pub fn prepare_training(cases: &[ForecastCase], grouping: &ExchangeableGrouping) -> Result<Vec<TrainingCase>> {
    if cases.is_empty() {
        return Err(Error::Empty("training cases"));
    }
    cases
        .iter()
        .map(|c| {
            let observation = c.observation.ok_or_else(|| Error::MissingObservation(c.label()))?;
            Ok(TrainingCase {
                stats: ensemble_stats(c, grouping)?,
                observation,
            })
        })
        .collect()
}

fn score(d: &PredictiveDistribution, obs: f64, objective: Objective) -> f64 {
    let value = match objective {
        Objective::MinCrps => d.crps(obs).unwrap_or(f64::INFINITY),
        Objective::MaxLikelihood => d.log_score(obs),
    };
    if value.is_nan() {
        f64::INFINITY
    } else {
        value
    }
}

fn case_score(coeffs: &CoefficientSet, case: &TrainingCase, objective: Objective) -> f64 {
    match link(coeffs, &case.stats) {
        Ok(d) => score(&d, case.observation, objective),
        Err(_) => f64::INFINITY,
    }
}

/// Mean score over prepared cases; `+∞` if any link is infeasible. The
/// summation order is fixed, so results do not depend on thread count.
pub fn mean_objective_prepared(coeffs: &CoefficientSet, cases: &[TrainingCase], objective: Objective) -> f64 {
    let scores: Vec<f64> = if cases.len() >= PARALLEL_MIN_CASES {
        cases.par_iter().map(|c| case_score(coeffs, c, objective)).collect()
    } else {
        cases.iter().map(|c| case_score(coeffs, c, objective)).collect()
    };
    scores.iter().sum::<f64>() / scores.len() as f64
}

/// Mean CRPS or mean log score of `coeffs` over `cases`.
pub fn mean_objective(
    coeffs: &CoefficientSet,
    cases: &[ForecastCase],
    grouping: &ExchangeableGrouping,
    objective: Objective,
) -> Result<f64> {
    let prepared = prepare_training(cases, grouping)?;
    Ok(mean_objective_prepared(coeffs, &prepared, objective))
}

/// Maps coefficient sets to and from the optimiser's unconstrained vector.
struct Codec {
    kind: ModelKind,
    groups: usize,
    threshold: Option<f64>,
}

impl Codec {
    fn block_len(&self) -> usize {
        self.groups + 3
    }

    fn encode_block(c: &LinkCoefficients, out: &mut Vec<f64>) {
        out.push(c.intercept);
        out.extend_from_slice(&c.slopes);
        out.push(c.var_intercept.sqrt());
        out.push(c.var_slope.sqrt());
    }

    fn decode_block(&self, x: &[f64]) -> LinkCoefficients {
        let g = self.groups;
        LinkCoefficients::new(x[0], x[1..=g].to_vec(), x[g + 1] * x[g + 1], x[g + 2] * x[g + 2])
    }

    fn encode(&self, c: &CoefficientSet) -> Vec<f64> {
        let mut out = Vec::new();
        match self.kind {
            ModelKind::Tn => Self::encode_block(c.tn.as_ref().expect("tn block"), &mut out),
            ModelKind::Ln => Self::encode_block(c.ln.as_ref().expect("ln block"), &mut out),
            ModelKind::Mixture => {
                Self::encode_block(c.tn.as_ref().expect("tn block"), &mut out);
                Self::encode_block(c.ln.as_ref().expect("ln block"), &mut out);
                let w = c.weight.expect("weight").clamp(1e-12, 1.0 - 1e-12);
                out.push(logit(w));
            }
            ModelKind::RegimeSwitch => unreachable!("regime switching is fitted block by block"),
        }
        out
    }

    fn decode(&self, x: &[f64]) -> CoefficientSet {
        let b = self.block_len();
        match self.kind {
            ModelKind::Tn => CoefficientSet::tn(self.decode_block(x)),
            ModelKind::Ln => CoefficientSet::ln(self.decode_block(x)),
            ModelKind::Mixture => CoefficientSet::mixture(
                self.decode_block(&x[..b]),
                self.decode_block(&x[b..2 * b]),
                logistic(x[2 * b]),
            ),
            ModelKind::RegimeSwitch => CoefficientSet::regime_switch(
                self.decode_block(&x[..b]),
                self.decode_block(&x[b..2 * b]),
                self.threshold.expect("threshold"),
            ),
        }
    }

    fn block_steps(&self, grouping: &ExchangeableGrouping, x: &[f64], out: &mut Vec<f64>) {
        let rel = |v: f64, floor: f64| (0.1 * v.abs()).max(floor);
        out.push(rel(x[0], 0.25));
        for (k, size) in grouping.sizes().iter().enumerate() {
            out.push(rel(x[1 + k], 0.02 / *size as f64));
        }
        out.push(rel(x[self.groups + 1], 0.1));
        out.push(rel(x[self.groups + 2], 0.1));
    }

    fn steps(&self, grouping: &ExchangeableGrouping, x: &[f64]) -> Vec<f64> {
        let b = self.block_len();
        let mut out = Vec::with_capacity(x.len());
        match self.kind {
            ModelKind::Tn | ModelKind::Ln => self.block_steps(grouping, x, &mut out),
            _ => {
                self.block_steps(grouping, &x[..b], &mut out);
                self.block_steps(grouping, &x[b..2 * b], &mut out);
                out.push(0.5);
            }
        }
        out
    }
}

/// Neutral start: location/mean equal to the ensemble mean (`a_k = 1/M`),
/// `b_0 = b_1 = 1`, and weight ½.
pub fn default_start(kind: ModelKind, grouping: &ExchangeableGrouping, threshold: Option<f64>) -> CoefficientSet {
    let m = grouping.member_count() as f64;
    let block = LinkCoefficients::new(0.0, vec![1.0 / m; grouping.group_count()], 1.0, 1.0);
    match kind {
        ModelKind::Tn => CoefficientSet::tn(block),
        ModelKind::Ln => CoefficientSet::ln(block),
        ModelKind::Mixture => CoefficientSet::mixture(block.clone(), block, 0.5),
        ModelKind::RegimeSwitch => CoefficientSet::regime_switch(block.clone(), block, threshold.unwrap_or(f64::NAN)),
    }
}

/// An all-zero ensemble makes the default LN mean zero; nudge the intercept.
fn feasible_default(kind: ModelKind, grouping: &ExchangeableGrouping, cases: &[TrainingCase], threshold: Option<f64>) -> CoefficientSet {
    let mut start = default_start(kind, grouping, threshold);
    if cases.iter().any(|c| c.stats.mean <= 0.0) {
        if let Some(ln) = start.ln.as_mut() {
            ln.intercept = 0.5;
        }
    }
    start
}

fn run_simplex(codec: &Codec, grouping: &ExchangeableGrouping, cases: &[TrainingCase], objective: Objective, start: &CoefficientSet) -> FitResult {
    let x0 = codec.encode(start);
    let steps = codec.steps(grouping, &x0);
    let opts = NelderMeadOptions::for_dimension(x0.len());
    let min = nelder_mead(
        |x| mean_objective_prepared(&codec.decode(x), cases, objective),
        &x0,
        &steps,
        opts,
    );
    let coefficients = codec.decode(&min.x);
    FitResult {
        objective_value: mean_objective_prepared(&coefficients, cases, objective),
        coefficients,
        iterations: min.evals,
        converged: min.converged,
    }
}

fn better(a: FitResult, b: FitResult) -> FitResult {
    // Keep `a` on ties so results are stable.
    if b.objective_value < a.objective_value {
        FitResult {
            iterations: a.iterations + b.iterations,
            ..b
        }
    } else {
        FitResult {
            iterations: a.iterations + b.iterations,
            ..a
        }
    }
}

fn fit_single_family(
    kind: ModelKind,
    cases: &[TrainingCase],
    grouping: &ExchangeableGrouping,
    objective: Objective,
    warm_start: Option<&CoefficientSet>,
) -> FitResult {
    if kind == ModelKind::Mixture {
        return fit_mixture(cases, grouping, objective, warm_start);
    }
    let codec = Codec {
        kind,
        groups: grouping.group_count(),
        threshold: None,
    };
    let default = feasible_default(kind, grouping, cases, None);
    let result = restarted_simplex(&codec, grouping, cases, objective, warm_start, &default, std::slice::from_ref(&default));
    keep_best_candidate(result, warm_start.into_iter().chain(std::iter::once(&default)), cases, objective)
}

/// Simplex from the warm start, rerun from `restart` when that stalls or ends
/// above the default start's score; from `cold` when there is no warm start.
fn restarted_simplex(
    codec: &Codec,
    grouping: &ExchangeableGrouping,
    cases: &[TrainingCase],
    objective: Objective,
    warm_start: Option<&CoefficientSet>,
    default: &CoefficientSet,
    cold: &[CoefficientSet],
) -> FitResult {
    let from_cold = || {
        cold.iter()
            .map(|start| run_simplex(codec, grouping, cases, objective, start))
            .reduce(better)
            .expect("at least one cold start")
    };
    match warm_start {
        Some(warm) => {
            let from_warm = run_simplex(codec, grouping, cases, objective, warm);
            let default_value = mean_objective_prepared(default, cases, objective);
            if !from_warm.converged || default_value < from_warm.objective_value {
                better(from_warm, from_cold())
            } else {
                from_warm
            }
        }
        None => from_cold(),
    }
}

/// Encoding clamps weights away from {0, 1}, so a candidate can score better
/// than anything the simplex reports; keep it in that case.
fn keep_best_candidate<'a>(
    mut result: FitResult,
    candidates: impl Iterator<Item = &'a CoefficientSet>,
    cases: &[TrainingCase],
    objective: Objective,
) -> FitResult {
    for candidate in candidates {
        let value = mean_objective_prepared(candidate, cases, objective);
        if value < result.objective_value {
            result.coefficients = candidate.clone();
            result.objective_value = value;
        }
    }
    result
}

/// The mixture is anchored on TN and LN fits of the same cases: the simplex
/// starts from their even blend, and the pure components (weight 1 or 0) are
/// kept as candidates, so the fit never scores worse than either family.
///
/// Both single-family fits describe the whole sample, so their blend sits
/// between the mode where the TN component is the narrow one and the mode
/// where it is the broad one. Under the log score the simplex tends to slide
/// into the second, poorer one. A cold fit therefore also starts from a blend
/// whose TN variance is shrunk fourfold.
const NARROW_TN_VARIANCE: f64 = 0.25;

fn fit_mixture(
    cases: &[TrainingCase],
    grouping: &ExchangeableGrouping,
    objective: Objective,
    warm_start: Option<&CoefficientSet>,
) -> FitResult {
    let warm_tn = warm_start.and_then(|w| w.tn.clone()).map(CoefficientSet::tn);
    let warm_ln = warm_start.and_then(|w| w.ln.clone()).map(CoefficientSet::ln);
    let tn = fit_single_family(ModelKind::Tn, cases, grouping, objective, warm_tn.as_ref());
    let ln = fit_single_family(ModelKind::Ln, cases, grouping, objective, warm_ln.as_ref());
    let tn_block = tn.coefficients.tn.expect("tn block");
    let ln_block = ln.coefficients.ln.expect("ln block");
    let narrow_tn = LinkCoefficients {
        var_intercept: tn_block.var_intercept * NARROW_TN_VARIANCE,
        var_slope: tn_block.var_slope * NARROW_TN_VARIANCE,
        ..tn_block.clone()
    };
    let cold = [
        CoefficientSet::mixture(tn_block.clone(), ln_block.clone(), 0.5),
        CoefficientSet::mixture(narrow_tn, ln_block.clone(), 0.5),
    ];
    let anchors = [
        cold[0].clone(),
        CoefficientSet::mixture(tn_block.clone(), ln_block.clone(), 1.0),
        CoefficientSet::mixture(tn_block, ln_block, 0.0),
    ];
    let codec = Codec {
        kind: ModelKind::Mixture,
        groups: grouping.group_count(),
        threshold: None,
    };
    let default = feasible_default(ModelKind::Mixture, grouping, cases, None);
    let mut result = restarted_simplex(&codec, grouping, cases, objective, warm_start, &default, &cold);
    result.iterations += tn.iterations + ln.iterations;
    let candidates = warm_start
        .into_iter()
        .chain(std::iter::once(&default))
        .chain(anchors.iter())
        .chain(std::iter::once(&cold[1]));
    keep_best_candidate(result, candidates, cases, objective)
}

/// Fits one coefficient set on `cases`.
///
/// TN, LN and MIXTURE are optimised jointly over all their coefficients.
/// REGIME_SWITCH fits its TN and LN blocks separately on the full window and
/// combines them with the configured threshold.
pub fn fit(
    cases: &[ForecastCase],
    grouping: &ExchangeableGrouping,
    config: &TrainingConfig,
    warm_start: Option<&CoefficientSet>,
) -> Result<FitResult> {
    config.validate()?;
    let prepared = prepare_training(cases, grouping)?;
    fit_prepared(&prepared, grouping, config, warm_start)
}

pub fn fit_prepared(
    cases: &[TrainingCase],
    grouping: &ExchangeableGrouping,
    config: &TrainingConfig,
    warm_start: Option<&CoefficientSet>,
) -> Result<FitResult> {
    if cases.is_empty() {
        return Err(Error::Empty("training cases"));
    }
    if let Some(w) = warm_start {
        w.validate(grouping.group_count())?;
        if w.kind != config.model_kind {
            return Err(Error::invalid(
                "warm_start",
                format!("kind {} does not match {}", w.kind.as_str(), config.model_kind.as_str()),
            ));
        }
    }
    let objective = config.objective;
    match config.model_kind {
        kind @ (ModelKind::Tn | ModelKind::Ln | ModelKind::Mixture) => {
            Ok(fit_single_family(kind, cases, grouping, objective, warm_start))
        }
        ModelKind::RegimeSwitch => {
            let threshold = config
                .threshold
                .ok_or_else(|| Error::invalid("threshold", "REGIME_SWITCH requires a threshold"))?;
            let warm_tn = warm_start.and_then(|w| w.tn.clone()).map(CoefficientSet::tn);
            let warm_ln = warm_start.and_then(|w| w.ln.clone()).map(CoefficientSet::ln);
            let tn = fit_single_family(ModelKind::Tn, cases, grouping, objective, warm_tn.as_ref());
            let ln = fit_single_family(ModelKind::Ln, cases, grouping, objective, warm_ln.as_ref());
            let coefficients = CoefficientSet::regime_switch(
                tn.coefficients.tn.expect("tn block"),
                ln.coefficients.ln.expect("ln block"),
                threshold,
            );
            Ok(FitResult {
                objective_value: mean_objective_prepared(&coefficients, cases, objective),
                coefficients,
                iterations: tn.iterations + ln.iterations,
                converged: tn.converged && ln.converged,
            })
        }
    }
}

/// A forecast issued for one (date, station) case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseForecast<D> {
    pub date: NaiveDate,
    pub station_id: String,
    pub observation: Option<f64>,
    pub forecast: D,
}

/// A fit for one pooling scope: all stations (`station_id = None`) or one station.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopedFit {
    pub station_id: Option<String>,
    pub training_cases: usize,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DateCalibration {
    pub date: NaiveDate,
    pub fits: Vec<ScopedFit>,
    pub forecasts: Vec<CaseForecast<PredictiveDistribution>>,
    /// Cases whose predictive link was infeasible under the fitted coefficients.
    pub failures: Vec<(String, String)>,
}

/// Cases grouped by date, with the verification dates that have a full window.
struct Calendar<'a> {
    by_date: BTreeMap<NaiveDate, Vec<&'a ForecastCase>>,
    verification_dates: Vec<NaiveDate>,
    window: u32,
}

impl<'a> Calendar<'a> {
    fn new(dataset: &'a [ForecastCase], window: u32) -> Result<Self> {
        let mut by_date: BTreeMap<NaiveDate, Vec<&ForecastCase>> = BTreeMap::new();
        for c in dataset {
            by_date.entry(c.date).or_default().push(c);
        }
        let first = *by_date.keys().next().ok_or(Error::Empty("dataset"))?;
        let verification_dates: Vec<NaiveDate> = by_date
            .keys()
            .copied()
            .filter(|d| (*d - first).num_days() >= i64::from(window))
            .collect();
        if verification_dates.is_empty() {
            let last = *by_date.keys().next_back().expect("nonempty");
            return Err(Error::InsufficientHistory {
                date: last,
                first,
                needed: window,
            });
        }
        Ok(Self {
            by_date,
            verification_dates,
            window,
        })
    }

    /// Cases with observations from the `window` days strictly before `date`.
    fn training(&self, date: NaiveDate, station: Option<&str>) -> Vec<&'a ForecastCase> {
        let from = date - Duration::days(i64::from(self.window));
        self.by_date
            .range(from..date)
            .flat_map(|(_, cases)| cases.iter().copied())
            .filter(|c| c.observation.is_some())
            .filter(|c| station.is_none_or(|s| c.station_id == s))
            .collect()
    }

    fn scopes(&self, date: NaiveDate, pooling: Pooling) -> Vec<Option<String>> {
        match pooling {
            Pooling::Regional => vec![None],
            Pooling::Local => {
                let mut stations: Vec<String> = self.by_date[&date].iter().map(|c| c.station_id.clone()).collect();
                stations.sort();
                stations.dedup();
                stations.into_iter().map(Some).collect()
            }
        }
    }
}

fn scope_label(scope: &Option<String>) -> String {
    scope.as_ref().map(|s| format!(" at station {s}")).unwrap_or_default()
}

fn calibrate_date(
    calendar: &Calendar<'_>,
    date: NaiveDate,
    grouping: &ExchangeableGrouping,
    config: &TrainingConfig,
    warm: &BTreeMap<Option<String>, CoefficientSet>,
) -> Result<DateCalibration> {
    let mut fits = Vec::new();
    let mut forecasts = Vec::new();
    let mut failures = Vec::new();
    for scope in calendar.scopes(date, config.pooling) {
        let training: Vec<ForecastCase> = calendar
            .training(date, scope.as_deref())
            .into_iter()
            .cloned()
            .collect();
        if training.is_empty() {
            return Err(Error::NoTrainingData {
                date,
                scope: scope_label(&scope),
            });
        }
        let result = fit(&training, grouping, config, warm.get(&scope))?;
        for case in calendar.by_date[&date]
            .iter()
            .filter(|c| scope.as_deref().is_none_or(|s| c.station_id == s))
        {
            let linked = ensemble_stats(case, grouping).and_then(|s| link(&result.coefficients, &s));
            match linked {
                Ok(forecast) => forecasts.push(CaseForecast {
                    date,
                    station_id: case.station_id.clone(),
                    observation: case.observation,
                    forecast,
                }),
                Err(e) => failures.push((case.station_id.clone(), e.to_string())),
            }
        }
        fits.push(ScopedFit {
            station_id: scope,
            training_cases: training.len(),
            fit: result,
        });
    }
    Ok(DateCalibration {
        date,
        fits,
        forecasts,
        failures,
    })
}

/// Fits on the `window_days` calendar days before every date that has a full
/// window of history, and issues forecasts for that date's cases.
pub fn rolling_calibrate(
    dataset: &[ForecastCase],
    grouping: &ExchangeableGrouping,
    config: &TrainingConfig,
) -> Result<Vec<DateCalibration>> {
    config.validate()?;
    let calendar = Calendar::new(dataset, config.window_days)?;
    if config.chain_warm_start {
        let mut warm: BTreeMap<Option<String>, CoefficientSet> = BTreeMap::new();
        let mut out = Vec::with_capacity(calendar.verification_dates.len());
        for &date in &calendar.verification_dates {
            let day = calibrate_date(&calendar, date, grouping, config, &warm)?;
            for f in &day.fits {
                warm.insert(f.station_id.clone(), f.fit.coefficients.clone());
            }
            out.push(day);
        }
        Ok(out)
    } else {
        let none = BTreeMap::new();
        calendar
            .verification_dates
            .par_iter()
            .map(|&date| calibrate_date(&calendar, date, grouping, config, &none))
            .collect()
    }
}

/// Climatological forecasts: the window's observations used as an ensemble.
pub fn climatology_calibrate(
    dataset: &[ForecastCase],
    config: &TrainingConfig,
) -> Result<Vec<(NaiveDate, Vec<CaseForecast<EmpiricalDistribution>>)>> {
    if config.window_days < 2 {
        return Err(Error::invalid("window_days", "must be at least 2"));
    }
    let calendar = Calendar::new(dataset, config.window_days)?;
    let mut out = Vec::with_capacity(calendar.verification_dates.len());
    for &date in &calendar.verification_dates {
        let mut forecasts = Vec::new();
        for scope in calendar.scopes(date, config.pooling) {
            let obs: Vec<f64> = calendar
                .training(date, scope.as_deref())
                .iter()
                .filter_map(|c| c.observation)
                .collect();
            if obs.is_empty() {
                return Err(Error::NoTrainingData {
                    date,
                    scope: scope_label(&scope),
                });
            }
            let climatology = EmpiricalDistribution::new(&obs)?;
            for case in calendar.by_date[&date]
                .iter()
                .filter(|c| scope.as_deref().is_none_or(|s| c.station_id == s))
            {
                forecasts.push(CaseForecast {
                    date,
                    station_id: case.station_id.clone(),
                    observation: case.observation,
                    forecast: climatology.clone(),
                });
            }
        }
        out.push((date, forecasts));
    }
    Ok(out)
}
