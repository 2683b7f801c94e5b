//! File formats: ensemble data sets, run configuration, forecasts,
//! coefficients and verification reports.
//!
//! All CSV output uses `.` decimals, LF line endings and the shortest
//! representation that parses back to the same `f64`, so writing is
//! deterministic and reading inverts writing exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::distributions::{EmpiricalDistribution, Forecast, LogNormal, MixtureTnLn, PredictiveDistribution, TruncNormal};
use crate::emos::{CoefficientSet, ExchangeableGrouping, ForecastCase, LinkCoefficients, ModelKind};
use crate::error::{Error, Result};
use crate::estimation::{Objective, Pooling, TrainingConfig};
use crate::synthetic::{MemberProcess, ScenarioSpec};
use crate::verification::VerificationReport;

/// Cases sorted by (date, station) and their common member count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub cases: Vec<ForecastCase>,
    pub members: usize,
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: line as usize,
        message: message.into(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().flexible(true).from_reader(file))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_f64(path: &Path, line: u64, column: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("column `{column}`: `{cell}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("column `{column}`: value must be finite")));
    }
    Ok(v)
}

fn parse_opt_f64(path: &Path, line: u64, column: &str, cell: &str) -> Result<Option<f64>> {
    if cell.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(path, line, column, cell).map(Some)
    }
}

fn parse_date(path: &Path, line: u64, cell: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(cell.trim(), "%Y-%m-%d")
        .map_err(|_| parse_err(path, line, format!("column `date`: `{cell}` is not an ISO-8601 date")))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Reads `date,station_id,observation,member_1..member_M`. An empty
/// observation cell marks a missing observation.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = csv_reader(path)?;
    let header = reader.headers()?.clone();
    let fixed = ["date", "station_id", "observation"];
    if header.len() < fixed.len() + 2 || fixed.iter().zip(header.iter()).any(|(a, b)| *a != b.trim()) {
        return Err(parse_err(
            path,
            1,
            "header must be `date,station_id,observation,member_1,...,member_M` with M >= 2",
        ));
    }
    let members = header.len() - fixed.len();
    let mut cases = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        if record.len() != header.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let date = parse_date(path, line, &record[0])?;
        let station_id = record[1].trim().to_string();
        if station_id.is_empty() {
            return Err(parse_err(path, line, "column `station_id` is empty"));
        }
        let observation = parse_opt_f64(path, line, "observation", &record[2])?;
        if observation.is_some_and(|x| x < 0.0) {
            return Err(parse_err(path, line, "column `observation`: wind speed must be nonnegative"));
        }
        let mut values = Vec::with_capacity(members);
        for (k, cell) in record.iter().skip(3).enumerate() {
            let column = &header[k + 3];
            let v = parse_f64(path, line, column, cell)?;
            if v < 0.0 {
                return Err(parse_err(path, line, format!("column `{column}`: member must be nonnegative, got {v}")));
            }
            values.push(v);
        }
        cases.push((line, ForecastCase {
            date,
            station_id,
            members: values,
            observation,
        }));
    }
    cases.sort_by(|(_, a), (_, b)| (a.date, &a.station_id).cmp(&(b.date, &b.station_id)));
    for pair in cases.windows(2) {
        let (a, b) = (&pair[0].1, &pair[1].1);
        if a.date == b.date && a.station_id == b.station_id {
            return Err(parse_err(path, pair[1].0, format!("duplicate case {}", b.label())));
        }
    }
    Ok(Dataset {
        cases: cases.into_iter().map(|(_, c)| c).collect(),
        members,
    })
}

pub fn write_dataset(path: &Path, cases: &[ForecastCase]) -> Result<()> {
    let members = cases.first().map_or(0, |c| c.members.len());
    let mut w = csv_writer(path)?;
    let mut header = vec!["date".to_string(), "station_id".into(), "observation".into()];
    header.extend((1..=members).map(|k| format!("member_{k}")));
    w.write_record(&header)?;
    for c in cases {
        if c.members.len() != members {
            return Err(Error::LengthMismatch {
                what: "member counts across cases",
                left: c.members.len(),
                right: members,
            });
        }
        let mut row = vec![c.date.to_string(), c.station_id.clone(), fmt_opt(c.observation)];
        row.extend(c.members.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Declarative run configuration, read from a flat `key = value` file.
/// Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,

    /// Exchangeable group sizes in member order, e.g. `[1, 10]`.
    pub group_sizes: Option<Vec<usize>>,
    pub group_names: Option<Vec<String>>,

    pub model: ModelKind,
    pub objective: Objective,
    pub window_days: u32,
    pub threshold: Option<f64>,
    pub pooling: Pooling,
    pub chain_warm_start: bool,
    pub climatology: bool,

    /// Central-interval nominal coverage in percent; defaults to the
    /// ensemble-range coverage `(M−1)/(M+1)`.
    pub nominal_coverage: Option<f64>,
    /// twCRPS thresholds; empty means the 90th, 95th and 99th percentiles
    /// of the verified observations.
    pub thresholds: Vec<f64>,
    pub dm_lag: usize,
    /// HAC truncation for the uniformity test; defaults to `dm_lag - 1`.
    pub uniformity_lag: Option<usize>,
    pub bootstrap_samples: usize,
    pub bootstrap_size: usize,
    pub bootstrap_level: f64,
    pub reference_model: String,

    pub n_days: usize,
    pub n_stations: usize,
    pub start_date: NaiveDate,
    pub base_level: f64,
    pub daily_variability: f64,
    pub level_min: f64,
    pub level_max: f64,
    pub station_variability: f64,
    pub member_spread: f64,
    pub spread_variability: f64,
    pub group_bias: Vec<f64>,
    pub missing_fraction: f64,
    pub max_retries: u32,
    pub truth_model: ModelKind,
    /// `[a_0, a_1..a_m, b_0, b_1]`
    pub truth_tn: Option<Vec<f64>>,
    /// `[α_0, α_1..α_m, β_0, β_1]`
    pub truth_ln: Option<Vec<f64>>,
    pub truth_weight: Option<f64>,
    pub truth_threshold: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let process = MemberProcess::default();
        Self {
            seed: 1,
            group_sizes: None,
            group_names: None,
            model: ModelKind::Tn,
            objective: Objective::MinCrps,
            window_days: 20,
            threshold: None,
            pooling: Pooling::Regional,
            chain_warm_start: true,
            climatology: true,
            nominal_coverage: None,
            thresholds: Vec::new(),
            dm_lag: 1,
            uniformity_lag: None,
            bootstrap_samples: 10_000,
            bootstrap_size: 2_500,
            bootstrap_level: 0.05,
            reference_model: "TN".into(),
            n_days: 365,
            n_stations: 10,
            start_date: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
            base_level: process.base_level,
            daily_variability: process.daily_variability,
            level_min: process.level_min,
            level_max: process.level_max,
            station_variability: process.station_variability,
            member_spread: process.member_spread,
            spread_variability: process.spread_variability,
            group_bias: Vec::new(),
            missing_fraction: 0.0,
            max_retries: 100,
            truth_model: ModelKind::Tn,
            truth_tn: None,
            truth_ln: None,
            truth_weight: None,
            truth_threshold: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1);
            parse_err(origin, line as u64, e.message())
        })
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// The grouping for an `members`-member ensemble: the configured sizes,
    /// or a single group when none are given.
    pub fn grouping(&self, members: usize) -> Result<ExchangeableGrouping> {
        let sizes = self.group_sizes.clone().unwrap_or_else(|| vec![members]);
        let total: usize = sizes.iter().sum();
        if total != members {
            return Err(Error::config(
                "group_sizes",
                format!("sizes {sizes:?} sum to {total}, but the ensemble has {members} members"),
            ));
        }
        if let Some(names) = &self.group_names {
            if names.len() != sizes.len() {
                return Err(Error::config(
                    "group_names",
                    format!("{} names for {} groups", names.len(), sizes.len()),
                ));
            }
        }
        ExchangeableGrouping::new(sizes).map_err(|e| Error::config("group_sizes", e.to_string()))
    }

    pub fn training(&self) -> Result<TrainingConfig> {
        let t = TrainingConfig {
            window_days: self.window_days,
            objective: self.objective,
            model_kind: self.model,
            pooling: self.pooling,
            threshold: self.threshold,
            chain_warm_start: self.chain_warm_start,
        };
        t.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::config(name, reason),
            other => other,
        })?;
        Ok(t)
    }

    fn truth_block(&self, field: &'static str, values: &Option<Vec<f64>>, groups: usize) -> Result<LinkCoefficients> {
        let v = values
            .as_ref()
            .ok_or_else(|| Error::config(field, format!("required by truth_model = {}", self.truth_model.as_str())))?;
        if v.len() != groups + 3 {
            return Err(Error::config(
                field,
                format!("expected {} values (intercept, {groups} slopes, two variance terms), got {}", groups + 3, v.len()),
            ));
        }
        Ok(LinkCoefficients::new(v[0], v[1..=groups].to_vec(), v[groups + 1], v[groups + 2]))
    }

    pub fn scenario(&self) -> Result<ScenarioSpec> {
        let sizes = self
            .group_sizes
            .clone()
            .ok_or_else(|| Error::config("group_sizes", "required to simulate"))?;
        let members = sizes.iter().sum();
        let grouping = self.grouping(members)?;
        let m = grouping.group_count();
        let truth = match self.truth_model {
            ModelKind::Tn => CoefficientSet::tn(self.truth_block("truth_tn", &self.truth_tn, m)?),
            ModelKind::Ln => CoefficientSet::ln(self.truth_block("truth_ln", &self.truth_ln, m)?),
            ModelKind::Mixture => CoefficientSet::mixture(
                self.truth_block("truth_tn", &self.truth_tn, m)?,
                self.truth_block("truth_ln", &self.truth_ln, m)?,
                self.truth_weight
                    .ok_or_else(|| Error::config("truth_weight", "required by truth_model = MIXTURE"))?,
            ),
            ModelKind::RegimeSwitch => CoefficientSet::regime_switch(
                self.truth_block("truth_tn", &self.truth_tn, m)?,
                self.truth_block("truth_ln", &self.truth_ln, m)?,
                self.truth_threshold
                    .ok_or_else(|| Error::config("truth_threshold", "required by truth_model = REGIME_SWITCH"))?,
            ),
        };
        let spec = ScenarioSpec {
            start_date: self.start_date,
            n_days: self.n_days,
            n_stations: self.n_stations,
            grouping,
            member_process: MemberProcess {
                base_level: self.base_level,
                daily_variability: self.daily_variability,
                level_min: self.level_min,
                level_max: self.level_max,
                station_variability: self.station_variability,
                member_spread: self.member_spread,
                spread_variability: self.spread_variability,
                group_bias: self.group_bias.clone(),
            },
            truth,
            missing_fraction: self.missing_fraction,
            seed: self.seed,
            max_retries: self.max_retries,
        };
        spec.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::config(name, reason),
            other => other,
        })?;
        Ok(spec)
    }
}

/// One predictive distribution written by calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub model: String,
    pub date: NaiveDate,
    pub station_id: String,
    pub forecast: Forecast,
}

const FORECAST_HEADER: [&str; 10] = [
    "model",
    "date",
    "station_id",
    "family",
    "weight",
    "tn_location",
    "tn_scale",
    "ln_location",
    "ln_shape",
    "values",
];

/// Writes one row per forecast. Parametric forecasts fill the parameter
/// columns; empirical ones list their values, `;`-separated.
pub fn write_forecasts(path: &Path, records: &[ForecastRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(FORECAST_HEADER)?;
    for r in records {
        let (weight, tn, ln, values) = match &r.forecast {
            Forecast::Parametric(PredictiveDistribution::TruncNormal(t)) => (Some(1.0), Some(*t), None, String::new()),
            Forecast::Parametric(PredictiveDistribution::LogNormal(l)) => (Some(0.0), None, Some(*l), String::new()),
            Forecast::Parametric(PredictiveDistribution::Mixture(m)) => (Some(m.weight()), Some(*m.tn()), Some(*m.ln()), String::new()),
            Forecast::Empirical(e) => (
                None,
                None,
                None,
                e.values().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
            ),
        };
        w.write_record([
            r.model.clone(),
            r.date.to_string(),
            r.station_id.clone(),
            r.forecast.family().to_string(),
            fmt_opt(weight),
            fmt_opt(tn.map(|t| t.location())),
            fmt_opt(tn.map(|t| t.scale())),
            fmt_opt(ln.map(|l| l.location())),
            fmt_opt(ln.map(|l| l.shape())),
            values,
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_forecasts(path: &Path) -> Result<Vec<ForecastRecord>> {
    let mut reader = csv_reader(path)?;
    let header = reader.headers()?.clone();
    if header.iter().map(str::trim).ne(FORECAST_HEADER) {
        return Err(parse_err(path, 1, format!("header must be `{}`", FORECAST_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        if record.len() != FORECAST_HEADER.len() {
            return Err(parse_err(path, line, format!("expected {} fields, found {}", FORECAST_HEADER.len(), record.len())));
        }
        let num = |k: usize| parse_f64(path, line, FORECAST_HEADER[k], &record[k]);
        let bad = |e: Error| parse_err(path, line, e.to_string());
        let tn = || -> Result<TruncNormal> { TruncNormal::new(num(5)?, num(6)?).map_err(bad) };
        let ln = || -> Result<LogNormal> { LogNormal::new(num(7)?, num(8)?).map_err(bad) };
        let forecast: Forecast = match record[3].trim() {
            "TN" => PredictiveDistribution::TruncNormal(tn()?).into(),
            "LN" => PredictiveDistribution::LogNormal(ln()?).into(),
            "MIX" => PredictiveDistribution::Mixture(MixtureTnLn::new(num(4)?, tn()?, ln()?).map_err(bad)?).into(),
            "EMP" => {
                let values = record[9]
                    .split(';')
                    .map(|v| parse_f64(path, line, "values", v))
                    .collect::<Result<Vec<_>>>()?;
                EmpiricalDistribution::new(&values).map_err(bad)?.into()
            }
            other => return Err(parse_err(path, line, format!("column `family`: unknown family `{other}`"))),
        };
        out.push(ForecastRecord {
            model: record[0].trim().to_string(),
            date: parse_date(path, line, &record[1])?,
            station_id: record[2].trim().to_string(),
            forecast,
        });
    }
    Ok(out)
}

/// One fitted coefficient set and its fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRecord {
    pub model: String,
    pub date: NaiveDate,
    /// Station for LOCAL pooling, `None` for a regional fit.
    pub station_id: Option<String>,
    pub training_cases: usize,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub coefficients: CoefficientSet,
}

/// Writes one row per fit. Blocks absent from a model are left empty.
pub fn write_coefficients(path: &Path, records: &[CoefficientRecord], groups: usize) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = ["model", "date", "scope", "training_cases", "objective_value", "evaluations", "converged"]
        .map(String::from)
        .to_vec();
    for block in ["tn", "ln"] {
        header.push(format!("{block}_intercept"));
        header.extend((1..=groups).map(|k| format!("{block}_slope_{k}")));
        header.push(format!("{block}_var_intercept"));
        header.push(format!("{block}_var_slope"));
    }
    header.push("weight".into());
    header.push("threshold".into());
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.model.clone(),
            r.date.to_string(),
            r.station_id.clone().unwrap_or_else(|| "ALL".into()),
            r.training_cases.to_string(),
            r.objective_value.to_string(),
            r.iterations.to_string(),
            r.converged.to_string(),
        ];
        for block in [&r.coefficients.tn, &r.coefficients.ln] {
            match block {
                Some(c) => {
                    row.push(c.intercept.to_string());
                    row.extend(c.slopes.iter().map(|v| v.to_string()));
                    row.push(c.var_intercept.to_string());
                    row.push(c.var_slope.to_string());
                }
                None => row.extend(std::iter::repeat_n(String::new(), groups + 3)),
            }
        }
        row.push(fmt_opt(r.coefficients.weight));
        row.push(fmt_opt(r.coefficients.threshold));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn fixed3(v: f64) -> String {
    format!("{v:.3}")
}

/// Table layout: forecast, CRPS, twCRPS at each threshold, MAE, RMSE,
/// coverage, average width, then LogS. Three decimals throughout.
pub fn write_report_csv(path: &Path, reports: &[VerificationReport]) -> Result<()> {
    let thresholds: Vec<f64> = reports
        .first()
        .map(|r| r.mean_twcrps.iter().map(|t| t.threshold).collect())
        .unwrap_or_default();
    let mut w = csv_writer(path)?;
    let mut header = vec!["forecast".to_string(), "CRPS".into()];
    header.extend(thresholds.iter().map(|r| format!("twCRPS@{r}")));
    header.extend(["MAE", "RMSE", "coverage", "avg_width", "LogS"].map(String::from));
    w.write_record(&header)?;
    for r in reports {
        if r.mean_twcrps.iter().map(|t| t.threshold).ne(thresholds.iter().copied()) {
            return Err(Error::Misaligned(format!("report `{}` uses different twCRPS thresholds", r.forecast)));
        }
        let mut row = vec![r.forecast.clone(), fixed3(r.mean_crps)];
        row.extend(r.mean_twcrps.iter().map(|t| fixed3(t.value)));
        row.extend([r.mae_median, r.rmse_mean, r.coverage_pct, r.avg_width].map(fixed3));
        row.push(r.mean_logs.map(fixed3).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

pub fn write_report_json(path: &Path, reports: &[VerificationReport]) -> Result<()> {
    write_json(path, &reports)
}

pub fn load_report_json(path: &Path) -> Result<Vec<VerificationReport>> {
    read_json(path)
}

/// Writes rows of already-formatted cells under `header`.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
