//! Monte Carlo sweeps over the scenario parameters, aggregation and output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{build_dictionaries_with, FourierDictionaries};
use crate::error::{Error, Result};
use crate::estimators::{self, support_matches, EstimateResult, Method};
use crate::scenario::{
    build_channels, gen_paths, gen_training, synthesize_measurements, true_composite_channel,
    true_support_pairs, FrameCount, RisConstraint, ScenarioConfig,
};

/// RNG purposes; each trial draws from disjoint ChaCha streams.
const STREAM_PATHS: u64 = 0;
const STREAM_TRAINING: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAMS_PER_TRIAL: u64 = 4;

/// Total RIS elements held fixed by the group-size timing sweep.
pub const TIMING_RIS_ELEMS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Snr,
    MeasFraction,
    NPaths,
    TimingKbar,
    Single,
}

impl SweepKind {
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepKind::Snr => (0..9).map(|i| -10.0 + 5.0 * i as f64).collect(),
            SweepKind::MeasFraction => (1..10).map(|i| i as f64 / 10.0).collect(),
            SweepKind::NPaths => (1..=6).map(f64::from).collect(),
            SweepKind::TimingKbar => vec![2.0, 4.0, 8.0, 16.0],
            SweepKind::Single => vec![0.0],
        }
    }
}

/// One experiment: a base scenario, the swept parameter and the methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub base: ScenarioConfig,
    pub sweep_values: Vec<f64>,
    pub methods: Vec<Method>,
    pub n_trials: usize,
    pub master_seed: u64,
    /// Run trials on the rayon pool. Ignored by timing sweeps.
    pub parallel: bool,
}

impl SweepSpec {
    pub fn new(kind: SweepKind, base: ScenarioConfig) -> Self {
        let master_seed = base.seed;
        Self {
            kind,
            base,
            sweep_values: kind.default_values(),
            methods: vec![Method::Storm, Method::Star, Method::OracleLs],
            n_trials: 200,
            master_seed,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::config("n_trials must be at least 1"));
        }
        if self.sweep_values.is_empty() {
            return Err(Error::config("sweep_values must not be empty"));
        }
        if self.sweep_values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config("sweep_values must be sorted"));
        }
        for &v in &self.sweep_values {
            self.config_for(v)?.validate()?;
        }
        Ok(())
    }

    /// Scenario at one sweep point.
    pub fn config_for(&self, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = self.base.clone();
        cfg.seed = self.master_seed;
        let as_count = |what: &str| -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::config(format!("{what} sweep value {value} is not a positive integer")))
            }
        };
        match self.kind {
            SweepKind::Snr => cfg.snr_db = value,
            SweepKind::MeasFraction => cfg.frames = FrameCount::Fraction(value),
            SweepKind::NPaths => {
                cfg.p_paths = as_count("path")?;
                cfg.sparsity = None;
            }
            SweepKind::TimingKbar => {
                let k_bar = as_count("group size")?;
                cfg.k_ris_elems = TIMING_RIS_ELEMS;
                if !TIMING_RIS_ELEMS.is_multiple_of(k_bar) {
                    return Err(Error::config(format!(
                        "group size {k_bar} does not divide {TIMING_RIS_ELEMS} elements"
                    )));
                }
                cfg.k_bar = k_bar;
                cfg.q_groups = TIMING_RIS_ELEMS / k_bar;
            }
            SweepKind::Single => {}
        }
        Ok(cfg)
    }
}

/// Outcome of one method on one trial.
#[derive(Debug)]
pub struct MethodRun {
    pub method: Method,
    pub result: Result<EstimateResult>,
    /// Exact support recovery; `None` when the truth is off-grid.
    pub support_exact: Option<bool>,
}

/// Per-trial, per-method record as emitted in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_value: f64,
    pub trial: usize,
    pub method: Method,
    pub nmse: Option<f64>,
    pub nmse_full: Option<f64>,
    pub support_exact: Option<bool>,
    pub t_stage1_s: Option<f64>,
    pub t_stage2_s: Option<f64>,
    pub error: Option<String>,
}

impl TrialRecord {
    fn from_run(sweep_value: f64, trial: usize, run: &MethodRun) -> Self {
        let ok = run.result.as_ref().ok();
        Self {
            sweep_value,
            trial,
            method: run.method,
            nmse: ok.map(|r| r.nmse),
            nmse_full: ok.map(|r| r.nmse_full),
            support_exact: run.support_exact,
            t_stage1_s: ok.map(|r| r.stage1_time),
            t_stage2_s: ok.map(|r| r.stage2_time),
            error: run.result.as_ref().err().map(|e| e.to_string()),
        }
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Aggregate of one `(sweep value, method)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub sweep_value: f64,
    pub method: Method,
    pub n_trials: usize,
    pub n_failed: usize,
    /// Mean of per-trial NMSE ratios over successful trials.
    pub nmse_mean: Option<f64>,
    pub nmse_db: Option<f64>,
    pub nmse_std: Option<f64>,
    /// Fraction of all trials with exact support.
    pub support_rate: Option<f64>,
    pub t_stage1_s: Option<f64>,
    pub t_stage2_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub cells: Vec<CellSummary>,
    pub trials: Vec<TrialRecord>,
}

impl SweepResult {
    pub fn cell(&self, sweep_value: f64, method: Method) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.sweep_value == sweep_value && c.method == method)
    }
}

fn trial_rng(seed: u64, trial: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 * STREAMS_PER_TRIAL + purpose);
    rng
}

/// Runs every method on one realization. The realization depends only on
/// `(cfg.seed, trial)`.
pub fn run_trial(cfg: &ScenarioConfig, methods: &[Method], trial: usize) -> Result<Vec<MethodRun>> {
    cfg.validate()?;
    let base = Arc::new(FourierDictionaries::new(cfg)?);
    run_trial_with(cfg, methods, trial, &base)
}

/// [`run_trial`] with prebuilt configuration-only dictionaries.
pub fn run_trial_with(
    cfg: &ScenarioConfig,
    methods: &[Method],
    trial: usize,
    base: &Arc<FourierDictionaries>,
) -> Result<Vec<MethodRun>> {
    let paths = gen_paths(cfg, &mut trial_rng(cfg.seed, trial, STREAM_PATHS))?;
    let ch = build_channels(&paths, cfg)?;
    let tr = gen_training(cfg, &mut trial_rng(cfg.seed, trial, STREAM_TRAINING))?;
    let ms = synthesize_measurements(&ch, &tr, cfg, &mut trial_rng(cfg.seed, trial, STREAM_NOISE))?;
    let ds = build_dictionaries_with(Arc::clone(base), &tr)?;
    let c_true = true_composite_channel(&ch, cfg.k_bar);
    let truth = true_support_pairs(&paths);
    Ok(methods
        .iter()
        .map(|&method| {
            let result = match method {
                Method::Storm => estimators::storm(&ms, &ds, cfg, &c_true),
                Method::Star => estimators::star(&ms, &ds, cfg, &c_true),
                Method::OracleLs => estimators::oracle_ls(&ms, &ch, &ds, cfg),
                Method::VectorizedCs => estimators::vectorized_cs(&ms, &ds, cfg, &c_true),
            };
            if let Err(e) = &result {
                log::warn!("trial {trial}: {method} failed: {e}");
            }
            let support_exact = truth.as_ref().map(|t| match &result {
                Ok(r) => support_matches(&ds, &r.support(), t),
                Err(_) => false,
            });
            MethodRun {
                method,
                result,
                support_exact,
            }
        })
        .collect())
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn sample_std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Aggregates one cell from its trial records (any order).
pub fn summarize(sweep_value: f64, method: Method, records: &[&TrialRecord]) -> CellSummary {
    let mut sorted: Vec<&TrialRecord> = records.to_vec();
    sorted.sort_by_key(|r| r.trial);
    let nmse: Vec<f64> = sorted.iter().filter_map(|r| r.nmse).collect();
    let t1: Vec<f64> = sorted.iter().filter_map(|r| r.t_stage1_s).collect();
    let t2: Vec<f64> = sorted.iter().filter_map(|r| r.t_stage2_s).collect();
    let graded: Vec<bool> = sorted.iter().filter_map(|r| r.support_exact).collect();
    let nmse_mean = mean(&nmse);
    CellSummary {
        sweep_value,
        method,
        n_trials: sorted.len(),
        n_failed: sorted.iter().filter(|r| r.failed()).count(),
        nmse_mean,
        nmse_db: nmse_mean.map(|m| 10.0 * m.log10()),
        nmse_std: sample_std(&nmse),
        support_rate: (!graded.is_empty())
            .then(|| graded.iter().filter(|&&b| b).count() as f64 / graded.len() as f64),
        t_stage1_s: mean(&t1),
        t_stage2_s: mean(&t2),
    }
}

/// Runs the whole grid. Trial failures are recorded per cell; only an
/// invalid spec is an error.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let mut trials = Vec::with_capacity(spec.sweep_values.len() * spec.n_trials * spec.methods.len());
    let mut cells = Vec::new();
    for &value in &spec.sweep_values {
        let cfg = spec.config_for(value)?;
        let base = Arc::new(FourierDictionaries::new(&cfg)?);
        log::info!("{:?} = {value}: {} trials", spec.kind, spec.n_trials);
        let one = |t: usize| -> Result<Vec<TrialRecord>> {
            let runs = run_trial_with(&cfg, &spec.methods, t, &base)?;
            Ok(runs.iter().map(|r| TrialRecord::from_run(value, t, r)).collect())
        };
        let per_trial: Vec<Vec<TrialRecord>> = if spec.parallel && spec.kind != SweepKind::TimingKbar {
            (0..spec.n_trials).into_par_iter().map(one).collect::<Result<_>>()?
        } else {
            (0..spec.n_trials).map(one).collect::<Result<_>>()?
        };
        let records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
        for &method in &spec.methods {
            let mine: Vec<&TrialRecord> = records.iter().filter(|r| r.method == method).collect();
            cells.push(summarize(value, method, &mine));
        }
        trials.extend(records);
    }
    Ok(SweepResult {
        spec: spec.clone(),
        cells,
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::invalid(format!("unknown output format '{other}'"))),
        }
    }
}

pub const CSV_HEADER: &str =
    "sweep_value,method,n_trials,nmse_mean,nmse_db,nmse_std,support_rate,t_stage1_s,t_stage2_s";

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), |v| v.to_string())
}

pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in &result.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            c.sweep_value,
            c.method,
            c.n_trials,
            opt(c.nmse_mean),
            opt(c.nmse_db),
            opt(c.nmse_std),
            opt(c.support_rate),
            opt(c.t_stage1_s),
            opt(c.t_stage2_s)
        );
    }
    out
}

pub fn to_json(result: &SweepResult) -> Result<String> {
    serde_json::to_string_pretty(result).map_err(|e| Error::NumericFailure(format!("json encoding: {e}")))
}

pub fn render(result: &SweepResult, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => Ok(to_csv(result)),
        OutputFormat::Json => to_json(result),
    }
}

/// Writes the result to `path`, replacing any existing file.
pub fn emit(result: &SweepResult, format: OutputFormat, path: &Path) -> Result<()> {
    let text = render(result, format)?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Settings read from a `key = value` config file.
#[derive(Debug, Clone, PartialEq)]
pub struct FileConfig {
    pub scenario: ScenarioConfig,
    pub sweep_values: Option<Vec<f64>>,
    pub methods: Option<Vec<Method>>,
    pub trials: Option<usize>,
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::config(format!("bad value for {key}: '{raw}'")))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

/// Parses the flat config format: one `key = value` per line, `#` comments,
/// comma-separated lists. Keys mirror [`ScenarioConfig`] plus `meas_fraction`,
/// `n_frames`, `sweep_values`, `methods` and `trials`.
pub fn parse_config(text: &str) -> Result<FileConfig> {
    let mut cfg = ScenarioConfig::default();
    let mut out_values = None;
    let mut out_methods = None;
    let mut trials = None;
    let mut q_given = false;
    let mut k_bar_given = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, raw) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected 'key = value'", lineno + 1)))?;
        let (key, raw) = (key.trim(), raw.trim());
        match key {
            "n_bs" => cfg.n_bs = parse_value(key, raw)?,
            "m_ue" => cfg.m_ue = parse_value(key, raw)?,
            "k_ris_elems" => cfg.k_ris_elems = parse_value(key, raw)?,
            "k_bar" => {
                cfg.k_bar = parse_value(key, raw)?;
                k_bar_given = true;
            }
            "q_groups" => {
                cfg.q_groups = parse_value(key, raw)?;
                q_given = true;
            }
            "n_tx" => cfg.n_tx = parse_value(key, raw)?,
            "m_rx" => cfg.m_rx = parse_value(key, raw)?,
            "n_frames" => cfg.frames = FrameCount::Frames(parse_value(key, raw)?),
            "meas_fraction" => cfg.frames = FrameCount::Fraction(parse_value(key, raw)?),
            "p_paths" => cfg.p_paths = parse_value(key, raw)?,
            "n_grid" => cfg.n_grid = parse_value(key, raw)?,
            "snr_db" => cfg.snr_db = parse_value(key, raw)?,
            "noiseless" => cfg.noiseless = parse_value(key, raw)?,
            "sparsity" => cfg.sparsity = Some(parse_value(key, raw)?),
            "seed" => cfg.seed = parse_value(key, raw)?,
            "ris_constraint" => cfg.ris_constraint = raw.parse::<RisConstraint>()?,
            "off_grid" => cfg.off_grid = parse_value(key, raw)?,
            "vcs_atom_budget" => cfg.vcs_atom_budget = parse_value(key, raw)?,
            "sweep_values" => out_values = Some(parse_list(key, raw)?),
            "methods" => {
                out_methods = Some(
                    parse_list::<String>(key, raw)?
                        .iter()
                        .map(|m| m.parse::<Method>().map_err(|e| Error::config(e.to_string())))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "trials" => trials = Some(parse_value(key, raw)?),
            other => return Err(Error::config(format!("unknown key '{other}'"))),
        }
    }
    if k_bar_given && !q_given && cfg.k_bar > 0 {
        cfg.q_groups = cfg.k_ris_elems / cfg.k_bar;
    }
    Ok(FileConfig {
        scenario: cfg,
        sweep_values: out_values,
        methods: out_methods,
        trials,
    })
}

pub fn load_config(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Fails with a resource-limit error if vectorized CS is requested on a
/// point whose dictionary exceeds the atom budget.
pub fn check_resources(spec: &SweepSpec) -> Result<()> {
    if !spec.methods.contains(&Method::VectorizedCs) {
        return Ok(());
    }
    for &v in &spec.sweep_values {
        let cfg = spec.config_for(v)?;
        let atoms = (cfg.n_grid as u128).pow(4);
        if atoms > cfg.vcs_atom_budget as u128 {
            return Err(Error::ResourceLimit(format!(
                "vectorized CS at {v} needs {atoms} atoms, budget is {}",
                cfg.vcs_atom_budget
            )));
        }
    }
    Ok(())
}
