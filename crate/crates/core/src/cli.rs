//! Command-line pipeline: `simulate`, `calibrate` and `verify`.
//!
//! Each stage reads the previous stage's files, writes its outputs into the
//! `--out` directory and records a `manifest.json` listing the resolved
//! configuration, inputs and outputs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::data_io::{
    load_dataset, load_forecasts, write_coefficients, write_dataset, write_forecasts, write_json, write_report_csv,
    write_report_json, write_table, CoefficientRecord, Dataset, ForecastRecord, RunConfig,
};
use crate::distributions::{EmpiricalDistribution, Forecast, Predictive};
use crate::emos::{ForecastCase, ModelKind};
use crate::error::{Error, Result};
use crate::estimation::{climatology_calibrate, rolling_calibrate, Objective, Pooling};
use crate::synthetic::generate;
use crate::verification::{
    bootstrap_rejection_rate, build_report, dm_test, ensemble_range_nominal_pct, pit_histogram, score_cases, twcrpss,
    ReportOptions, ScoreKind, ScoreSeries,
};

/// Label of the raw-ensemble forecast in verification outputs.
pub const ENSEMBLE_LABEL: &str = "ENSEMBLE";
/// Label of the climatological forecast written by `calibrate`.
pub const CLIMATOLOGY_LABEL: &str = "CLIMATOLOGY";
/// Number of thresholds on the twCRPSS curve.
const TWCRPSS_POINTS: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "emos", version, about = "EMOS post-processing of wind speed ensembles")]
pub struct Cli {
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic data set from a known EMOS process.
    Simulate(SimulateArgs),
    /// Fit an EMOS model over rolling training windows and issue forecasts.
    Calibrate(CalibrateArgs),
    /// Score forecasts and run the calibration and comparison tests.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// TN, LN, MIXTURE or REGIME_SWITCH.
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// MIN_CRPS or MAX_LIKELIHOOD.
    #[arg(long)]
    pub objective: Option<Objective>,
    /// Training window in calendar days.
    #[arg(long)]
    pub window: Option<u32>,
    /// Ensemble-median threshold for REGIME_SWITCH.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// REGIONAL or LOCAL.
    #[arg(long)]
    pub pooling: Option<Pooling>,
    /// Fit every date from the default start, in parallel, instead of
    /// warm-starting from the previous date.
    #[arg(long)]
    pub independent_dates: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Forecast files written by `calibrate`; repeat to compare models.
    #[arg(long, required = true)]
    pub forecasts: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    threads: Option<usize>,
    config: &'a RunConfig,
    inputs: Vec<String>,
    out_dir: String,
    /// File names inside `out_dir`, including this manifest.
    outputs: Vec<String>,
    notes: Vec<String>,
    timing_ms: u128,
}

/// Tracks output files and writes the manifest last.
struct Run<'a> {
    command: &'a str,
    out: PathBuf,
    started: Instant,
    inputs: Vec<String>,
    outputs: Vec<String>,
    notes: Vec<String>,
}

impl<'a> Run<'a> {
    fn new(command: &'a str, out: &Path, inputs: &[&Path]) -> Result<Self> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        Ok(Self {
            command,
            out: out.to_path_buf(),
            started: Instant::now(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: Vec::new(),
            notes: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out.join(name)
    }

    fn finish(mut self, config: &RunConfig, threads: Option<usize>) -> Result<Vec<PathBuf>> {
        let manifest_path = self.path("manifest.json");
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            threads,
            config,
            inputs: self.inputs.clone(),
            out_dir: self.out.display().to_string(),
            outputs: self.outputs.clone(),
            notes: self.notes.clone(),
            timing_ms: self.started.elapsed().as_millis(),
        };
        write_json(&manifest_path, &manifest)?;
        Ok(self.outputs.iter().map(|o| self.out.join(o)).collect())
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

/// Parses `args` and runs the selected stage. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one stage and returns the files it wrote.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::invalid("threads", "must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config {
            field: "threads".into(),
            message: e.to_string(),
        })?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => simulate(a, cli.threads),
        Command::Calibrate(a) => calibrate(a, cli.threads),
        Command::Verify(a) => verify(a, cli.threads),
    })
}

pub fn simulate(args: &SimulateArgs, threads: Option<usize>) -> Result<Vec<PathBuf>> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let spec = config.scenario()?;
    let mut run = Run::new("simulate", &args.out, &[&args.config])?;
    let cases = generate(&spec)?;
    write_dataset(&run.path("data.csv"), &cases)?;
    run.finish(&config, threads)
}

/// Output label for a fitted model, e.g. `MIXTURE_CRPS`.
pub fn model_label(model: ModelKind, objective: Objective) -> String {
    let suffix = match objective {
        Objective::MinCrps => "CRPS",
        Objective::MaxLikelihood => "ML",
    };
    format!("{}_{suffix}", model.as_str())
}

pub fn calibrate(args: &CalibrateArgs, threads: Option<usize>) -> Result<Vec<PathBuf>> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(m) = args.model {
        config.model = m;
    }
    if let Some(o) = args.objective {
        config.objective = o;
    }
    if let Some(w) = args.window {
        config.window_days = w;
    }
    if args.threshold.is_some() {
        config.threshold = args.threshold;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(p) = args.pooling {
        config.pooling = p;
    }
    if args.independent_dates {
        config.chain_warm_start = false;
    }
    let training = config.training()?;
    let mut inputs: Vec<&Path> = vec![&args.data];
    if let Some(c) = &args.config {
        inputs.push(c);
    }
    let dataset = load_dataset(&args.data)?;
    let grouping = config.grouping(dataset.members)?;
    let mut run = Run::new("calibrate", &args.out, &inputs)?;

    let label = model_label(config.model, config.objective);
    let days = rolling_calibrate(&dataset.cases, &grouping, &training)?;
    let mut forecasts = Vec::new();
    let mut coefficients = Vec::new();
    let mut failures = Vec::new();
    for day in &days {
        for f in &day.fits {
            coefficients.push(CoefficientRecord {
                model: label.clone(),
                date: day.date,
                station_id: f.station_id.clone(),
                training_cases: f.training_cases,
                objective_value: f.fit.objective_value,
                iterations: f.fit.iterations,
                converged: f.fit.converged,
                coefficients: f.fit.coefficients.clone(),
            });
        }
        for c in &day.forecasts {
            forecasts.push(ForecastRecord {
                model: label.clone(),
                date: c.date,
                station_id: c.station_id.clone(),
                forecast: c.forecast.into(),
            });
        }
        for (station, message) in &day.failures {
            failures.push(vec![day.date.to_string(), station.clone(), message.clone()]);
        }
    }
    if config.climatology {
        for (_, day) in climatology_calibrate(&dataset.cases, &training)? {
            forecasts.extend(day.into_iter().map(|c| ForecastRecord {
                model: CLIMATOLOGY_LABEL.into(),
                date: c.date,
                station_id: c.station_id,
                forecast: c.forecast.into(),
            }));
        }
    }
    let unconverged = coefficients.iter().filter(|c| !c.converged).count();
    if unconverged > 0 {
        run.notes.push(format!("{unconverged} fits stopped at the evaluation budget"));
    }
    if !failures.is_empty() {
        run.notes.push(format!("{} cases had infeasible predictive links", failures.len()));
    }
    write_forecasts(&run.path("forecasts.csv"), &forecasts)?;
    write_coefficients(&run.path("coefficients.csv"), &coefficients, grouping.group_count())?;
    write_table(&run.path("failures.csv"), &["date", "station_id", "message"], &failures)?;
    run.finish(&config, threads)
}

type CaseKey = (NaiveDate, String);

/// Forecasts of several models on a common, ordered set of cases.
struct Aligned {
    keys: Vec<CaseKey>,
    observations: Vec<Option<f64>>,
    models: Vec<(String, Vec<Forecast>)>,
    ensembles: Vec<Vec<f64>>,
}

fn align(dataset: &Dataset, records: Vec<ForecastRecord>) -> Result<Aligned> {
    let cases: HashMap<CaseKey, &ForecastCase> = dataset
        .cases
        .iter()
        .map(|c| ((c.date, c.station_id.clone()), c))
        .collect();
    let mut order: Vec<String> = Vec::new();
    let mut by_model: HashMap<String, BTreeMap<CaseKey, Forecast>> = HashMap::new();
    for r in records {
        let key = (r.date, r.station_id.clone());
        if !cases.contains_key(&key) {
            return Err(Error::Misaligned(format!(
                "model {} has a forecast for {} {}, which is not in the data set",
                r.model, r.date, r.station_id
            )));
        }
        if r.model == ENSEMBLE_LABEL {
            return Err(Error::Misaligned(format!("model label {ENSEMBLE_LABEL} is reserved for the raw ensemble")));
        }
        let entry = by_model.entry(r.model.clone()).or_insert_with(|| {
            order.push(r.model.clone());
            BTreeMap::new()
        });
        // The same climatology appears in every calibrate output; identical
        // repeats are harmless, conflicting ones are not.
        if let Some(previous) = entry.insert(key, r.forecast.clone()) {
            if previous != r.forecast {
                return Err(Error::Misaligned(format!(
                    "model {} has conflicting forecasts for {} {}",
                    r.model, r.date, r.station_id
                )));
            }
        }
    }
    let first = order.first().ok_or(Error::Empty("forecast records"))?;
    let reference: BTreeSet<&CaseKey> = by_model[first].keys().collect();
    for name in &order[1..] {
        let keys: BTreeSet<&CaseKey> = by_model[name].keys().collect();
        if keys != reference {
            return Err(Error::Misaligned(format!(
                "models {first} and {name} cover different cases ({} vs {})",
                reference.len(),
                keys.len()
            )));
        }
    }
    let keys: Vec<CaseKey> = reference
        .into_iter()
        .filter(|k| cases[*k].observation.is_some())
        .cloned()
        .collect();
    if keys.is_empty() {
        return Err(Error::Empty("verification cases with observations"));
    }
    let mut models = Vec::with_capacity(order.len());
    for name in order {
        let mut map = by_model.remove(&name).expect("model present");
        let forecasts = keys.iter().map(|k| map.remove(k).expect("aligned key")).collect();
        models.push((name, forecasts));
    }
    Ok(Aligned {
        observations: keys.iter().map(|k| cases[k].observation).collect(),
        ensembles: keys.iter().map(|k| cases[k].members.clone()).collect(),
        keys,
        models,
    })
}

/// Order-statistic quantile of `values` at level `p`.
/// Mean twCRPS over cases at each threshold in `grid`.
fn mean_twcrps_curve(forecasts: &[Forecast], observations: &[Option<f64>], grid: &[f64]) -> Result<Vec<f64>> {
    let curves = forecasts
        .par_iter()
        .zip(observations)
        .map(|(f, obs)| match obs {
            Some(x) => f.twcrps_curve(*x, grid),
            None => Err(Error::invalid("observations", "verification cases need observations")),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sums = vec![0.0; grid.len()];
    for curve in &curves {
        for (s, v) in sums.iter_mut().zip(curve) {
            *s += v;
        }
    }
    Ok(sums.into_iter().map(|s| s / curves.len() as f64).collect())
}

fn percentile(values: &[f64], p: f64) -> Result<f64> {
    EmpiricalDistribution::new(values)?.quantile(p)
}

/// Shortest round-trip representation, in scientific notation for very
/// small or large magnitudes.
fn full(v: f64) -> String {
    format!("{v:?}")
}

/// Data-derived thresholds are rounded to 0.01 so table headers stay short.
fn round_threshold(r: f64) -> f64 {
    (r * 100.0).round() / 100.0
}

pub fn verify(args: &VerifyArgs, threads: Option<usize>) -> Result<Vec<PathBuf>> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if config.dm_lag == 0 {
        return Err(Error::config("dm_lag", "must be at least 1"));
    }
    if config.thresholds.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::config("thresholds", "twCRPS thresholds must be positive"));
    }
    let mut inputs: Vec<&Path> = vec![&args.data];
    inputs.extend(args.forecasts.iter().map(PathBuf::as_path));
    if let Some(c) = &args.config {
        inputs.push(c);
    }
    let dataset = load_dataset(&args.data)?;
    let mut records = Vec::new();
    for path in &args.forecasts {
        records.extend(load_forecasts(path)?);
    }
    let aligned = align(&dataset, records)?;
    let mut run = Run::new("verify", &args.out, &inputs)?;

    let observed: Vec<f64> = aligned.observations.iter().map(|o| o.expect("filtered")).collect();
    let thresholds = if config.thresholds.is_empty() {
        let t = [0.90, 0.95, 0.99]
            .iter()
            .map(|&p| percentile(&observed, p).map(round_threshold))
            .collect::<Result<Vec<_>>>()?;
        run.notes.push("twCRPS thresholds set to the 90th, 95th and 99th observation percentiles".into());
        t
    } else {
        config.thresholds.clone()
    };
    let nominal = config
        .nominal_coverage
        .unwrap_or_else(|| ensemble_range_nominal_pct(dataset.members));
    let opts = ReportOptions {
        thresholds,
        nominal_pct: nominal,
        bins: dataset.members + 1,
        seed: config.seed,
    };

    let ensemble: Vec<Forecast> = aligned
        .ensembles
        .iter()
        .map(|m| EmpiricalDistribution::new(m).map(Forecast::from))
        .collect::<Result<_>>()?;
    let mut all: Vec<(String, Vec<Forecast>)> = vec![(ENSEMBLE_LABEL.to_string(), ensemble)];
    all.extend(aligned.models.iter().cloned());

    let member_refs: Vec<&[f64]> = aligned.ensembles.iter().map(Vec::as_slice).collect();
    let mut reports = Vec::with_capacity(all.len());
    for (name, forecasts) in &all {
        let ranks = (name == ENSEMBLE_LABEL).then_some(member_refs.as_slice());
        reports.push(build_report(name, forecasts, &aligned.observations, ranks, &opts)?);
    }
    write_report_csv(&run.path("report.csv"), &reports)?;
    write_report_json(&run.path("report.json"), &reports)?;

    let mut pit_rows = Vec::new();
    let mut rank_rows = Vec::new();
    for r in &reports {
        let counts = pit_histogram(&r.pit_values, opts.bins);
        for (b, c) in counts.iter().enumerate() {
            let lower = b as f64 / opts.bins as f64;
            let upper = (b + 1) as f64 / opts.bins as f64;
            pit_rows.push(vec![r.forecast.clone(), (b + 1).to_string(), full(lower), full(upper), c.to_string()]);
        }
        for (b, c) in r.rank_counts.iter().enumerate() {
            rank_rows.push(vec![r.forecast.clone(), (b + 1).to_string(), c.to_string()]);
        }
    }
    write_table(&run.path("pit_histogram.csv"), &["forecast", "bin", "lower", "upper", "count"], &pit_rows)?;
    write_table(&run.path("rank_histogram.csv"), &["forecast", "rank", "count"], &rank_rows)?;

    let crps: Vec<ScoreSeries> = all
        .iter()
        .map(|(_, f)| score_cases(f, &aligned.observations, ScoreKind::Crps))
        .collect::<Result<_>>()?;
    let logs: Vec<Option<ScoreSeries>> = all
        .iter()
        .map(|(_, f)| {
            let parametric = f.iter().all(|x| matches!(x, Forecast::Parametric(_)));
            parametric
                .then(|| score_cases(f, &aligned.observations, ScoreKind::LogScore))
                .transpose()
        })
        .collect::<Result<_>>()?;
    let mut dm_rows = Vec::new();
    for (i, (fi, _)) in all.iter().enumerate() {
        for (j, (gj, _)) in all.iter().enumerate() {
            let mut pairs = vec![("CRPS", &crps[i], &crps[j])];
            if let (Some(a), Some(b)) = (&logs[i], &logs[j]) {
                pairs.push(("LogS", a, b));
            }
            for (score, a, b) in pairs {
                match dm_test(a, b, config.dm_lag) {
                    Ok(d) => dm_rows.push(vec![
                        fi.clone(),
                        gj.clone(),
                        score.into(),
                        full(d.statistic),
                        full(d.p_value),
                        d.lag.to_string(),
                        d.n.to_string(),
                        d.variance_fallback.to_string(),
                        d.infinite_against_f.to_string(),
                        d.infinite_against_g.to_string(),
                        d.both_non_finite.to_string(),
                    ]),
                    Err(e) => run.notes.push(format!("DM test {fi} vs {gj} on {score} skipped: {e}")),
                }
            }
        }
    }
    write_table(
        &run.path("dm_tests.csv"),
        &[
            "forecast_f",
            "forecast_g",
            "score",
            "statistic",
            "p_value",
            "lag",
            "n",
            "variance_fallback",
            "infinite_against_f",
            "infinite_against_g",
            "both_non_finite",
        ],
        &dm_rows,
    )?;

    let lag = config.uniformity_lag.unwrap_or(config.dm_lag - 1);
    let sample_size = config.bootstrap_size.min(observed.len());
    if sample_size < config.bootstrap_size {
        run.notes.push(format!(
            "bootstrap sample size reduced from {} to the {} verified cases",
            config.bootstrap_size, sample_size
        ));
    }
    let mut boot_rows = Vec::new();
    for r in &reports {
        // Every model uses the same subsamples, so the rates are paired.
        match bootstrap_rejection_rate(
            &r.pit_values,
            config.bootstrap_samples,
            sample_size,
            config.bootstrap_level,
            lag,
            config.seed,
        ) {
            Ok(rate) => boot_rows.push(vec![
                r.forecast.clone(),
                config.bootstrap_samples.to_string(),
                sample_size.to_string(),
                full(config.bootstrap_level),
                lag.to_string(),
                full(rate),
            ]),
            Err(e) => run.notes.push(format!("bootstrap for {} skipped: {e}", r.forecast)),
        }
    }
    write_table(
        &run.path("bootstrap_rejection.csv"),
        &["forecast", "samples", "sample_size", "level", "lag", "rejection_rate"],
        &boot_rows,
    )?;

    let reference = all
        .iter()
        .position(|(name, _)| name == &config.reference_model || name.starts_with(&format!("{}_", config.reference_model)));
    let mut curve_rows = Vec::new();
    match reference {
        Some(k) => {
            let grid = (0..TWCRPSS_POINTS)
                .map(|i| percentile(&observed, 0.5 + 0.49 * i as f64 / (TWCRPSS_POINTS - 1) as f64).map(round_threshold))
                .collect::<Result<Vec<_>>>()?;
            let mean_curve = |forecasts: &[Forecast]| -> Result<Vec<f64>> {
                mean_twcrps_curve(forecasts, &aligned.observations, &grid)
            };
            let reference_scores = mean_curve(&all[k].1)?;
            for (i, (name, forecasts)) in all.iter().enumerate() {
                let own = if i == k { reference_scores.clone() } else { mean_curve(forecasts)? };
                for ((&r, &ref_score), &own) in grid.iter().zip(&reference_scores).zip(&own) {
                    let skill = twcrpss(own, ref_score).map(full).unwrap_or_default();
                    curve_rows.push(vec![name.clone(), full(r), skill]);
                }
            }
        }
        None => run.notes.push(format!(
            "no forecast matches reference_model = {}; twCRPSS curve left empty",
            config.reference_model
        )),
    }
    write_table(&run.path("twcrpss_curve.csv"), &["forecast", "threshold", "twcrpss"], &curve_rows)?;
    let case_count = aligned.keys.len();
    run.notes.push(format!("{case_count} cases verified"));
    run.finish(&config, threads)
}
