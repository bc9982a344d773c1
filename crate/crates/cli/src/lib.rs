//! Experiment runner: JSON configs in, JSON/CSV reports out.
//!
//! A config lists experiments, each naming an operator, a set of vectors and
//! the checks to run on them. Every check is run in isolation: an error in
//! one is recorded in the report and never affects another.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use recurlab::classify::{
    birkhoff_frequent_check, classify_detailed, default_epsilon_grid, eigen_span_check, inverse_recurrence_check,
    product_recurrence_check, unimodular_return_set, ProbeOptions, RecurrenceReport, Thresholds,
    DEFAULT_SPAN_TOLERANCE,
};
use recurlab::empmeasure::{
    best_banach_window, conjugation_invariance_check, covariance, empirical_from_window, invariance_defect, moments,
    support_span_vs_kernel, symmetrize, Ball,
};
use recurlab::linop::{
    euclidean_norm, jdg_split, principal_angle, realize, unimodular_eigenpairs, LinearOperator, LinopError,
    OperatorSpec, DEFAULT_TOL_UNIMOD,
};
use recurlab::natset::summarize;
use recurlab::orbit::{iterate, return_set};
use recurlab::Complex64;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const THREADS_ENV: &str = "RECURLAB_THREADS";

/// Largest admissible `|dens − mass|` in the Birkhoff check.
pub const BIRKHOFF_TOLERANCE: f64 = 5e-3;
/// Largest admissible angle between the reversible part and the eigen-span.
pub const JDG_ANGLE_TOLERANCE: f64 = 1e-10;
const SERIES_POINTS: usize = 100;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("invalid config: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Parse { .. } | CliError::Validation(_) => 2,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    Classify,
    Birkhoff,
    EigenSpan,
    Jdg,
    UnimodularReturn,
    Product,
    Inverse,
    Measure,
}

/// Explicit coordinates (`[[re, im], ...]`) or a generator: `basis:k`
/// (0-based), `ones`, `random:k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Explicit(Vec<Complex64>),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartnerSpec {
    pub operator: OperatorSpec,
    pub vector: VectorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureOptions {
    #[serde(default = "default_balls")]
    pub balls: usize,
    #[serde(default = "default_roots")]
    pub roots: u32,
}

fn default_balls() -> usize {
    16
}

fn default_roots() -> u32 {
    8
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self { balls: default_balls(), roots: default_roots() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub operator: OperatorSpec,
    pub vectors: Vec<VectorSpec>,
    #[serde(default)]
    pub epsilons: Option<Vec<f64>>,
    pub horizon: u64,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub checks: Vec<CheckId>,
    /// Second summand for the product check; the experiment's own operator
    /// and vector when absent.
    #[serde(default)]
    pub partner: Option<PartnerSpec>,
    #[serde(default)]
    pub measure: MeasureOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub experiments: Vec<ExperimentSpec>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

/// A validated experiment with its operator realized and vectors resolved.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub spec: ExperimentSpec,
    pub operator: LinearOperator,
    pub vectors: Vec<(String, Vec<Complex64>)>,
    pub partner: Option<(LinearOperator, Vec<Complex64>)>,
}

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    /// Input text, echoed verbatim into reports.
    pub raw: String,
    pub config: ExperimentConfig,
    pub experiments: Vec<Experiment>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream per `(config seed, purpose, index)`.
pub fn derived_seed(seed: u64, purpose: u64, index: u64) -> u64 {
    splitmix(splitmix(seed ^ splitmix(purpose)) ^ index)
}

const SEED_VECTOR: u64 = 1;
const SEED_BALLS: u64 = 2;
const SEED_PROBES: u64 = 3;

pub fn resolve_vector(spec: &VectorSpec, dim: usize, seed: u64) -> Result<Vec<Complex64>, String> {
    match spec {
        VectorSpec::Explicit(v) if v.len() == dim => Ok(v.clone()),
        VectorSpec::Explicit(v) => Err(format!("vector has dimension {}, operator has dimension {dim}", v.len())),
        VectorSpec::Named(name) => {
            if name == "ones" {
                return Ok(vec![Complex64::new(1.0, 0.0); dim]);
            }
            let (kind, arg) = name.split_once(':').ok_or_else(|| format!("unknown vector generator {name:?}"))?;
            let k: u64 = arg.parse().map_err(|_| format!("bad index in {name:?}"))?;
            match kind {
                "basis" if (k as usize) < dim => {
                    let mut v = vec![Complex64::new(0.0, 0.0); dim];
                    v[k as usize] = Complex64::new(1.0, 0.0);
                    Ok(v)
                }
                "basis" => Err(format!("{name:?} is out of range for dimension {dim}")),
                "random" => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(seed, SEED_VECTOR, k));
                    let s = std::f64::consts::FRAC_1_SQRT_2;
                    Ok((0..dim)
                        .map(|_| {
                            let re: f64 = rng.sample(StandardNormal);
                            let im: f64 = rng.sample(StandardNormal);
                            Complex64::new(s * re, s * im)
                        })
                        .collect())
                }
                _ => Err(format!("unknown vector generator {name:?}")),
            }
        }
    }
}

fn vector_id(spec: &VectorSpec, index: usize) -> String {
    match spec {
        VectorSpec::Named(n) => n.clone(),
        VectorSpec::Explicit(_) => format!("v{index}"),
    }
}

pub fn parse_config(raw: &str, path: &Path) -> Result<LoadedConfig, CliError> {
    let config: ExperimentConfig = serde_json::from_str(raw).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let experiments = validate(&config)?;
    Ok(LoadedConfig { raw: raw.to_string(), config, experiments })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let raw = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&raw, path)
}

fn validate(config: &ExperimentConfig) -> Result<Vec<Experiment>, CliError> {
    if config.schema_version != SCHEMA_VERSION {
        return Err(CliError::Validation(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            config.schema_version
        )));
    }
    let mut names = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(config.experiments.len());
    for spec in &config.experiments {
        let fail = |msg: String| CliError::Validation(format!("experiment {:?}: {msg}", spec.name));
        if spec.name.is_empty() || !names.insert(spec.name.clone()) {
            return Err(fail("names must be nonempty and unique".into()));
        }
        if spec.vectors.is_empty() {
            return Err(fail("at least one vector is required".into()));
        }
        spec.thresholds.validate().map_err(|e| fail(e.to_string()))?;
        if spec.horizon < spec.thresholds.min_horizon {
            return Err(fail(format!("horizon {} is below the minimum {}", spec.horizon, spec.thresholds.min_horizon)));
        }
        if let Some(eps) = &spec.epsilons {
            if eps.is_empty() || eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) || eps.windows(2).any(|w| w[1] < w[0]) {
                return Err(fail("epsilons must be a nonempty ascending list of positive numbers".into()));
            }
        }
        let operator = realize(&spec.operator).map_err(|e| fail(format!("operator: {e}")))?;
        let vectors = spec
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| {
                resolve_vector(v, operator.dim(), config.seed)
                    .map(|x| (vector_id(v, i), x))
                    .map_err(|m| fail(format!("vector {i}: {m}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let partner = match &spec.partner {
            Some(p) => {
                let op = realize(&p.operator).map_err(|e| fail(format!("partner operator: {e}")))?;
                let x = resolve_vector(&p.vector, op.dim(), config.seed).map_err(|m| fail(format!("partner vector: {m}")))?;
                Some((op, x))
            }
            None => None,
        };
        out.push(Experiment { spec: spec.clone(), operator, vectors, partner });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Passed,
    Failed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: CheckId,
    pub status: CheckStatus,
    pub wall_time_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub checks: Vec<CheckOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub config_echo: String,
    pub experiments: Vec<ExperimentReport>,
}

impl ReportDocument {
    /// Copy with every wall-time field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> ReportDocument {
        let mut doc = self.clone();
        for e in &mut doc.experiments {
            for c in &mut e.checks {
                c.wall_time_ms = 0.0;
            }
        }
        doc
    }

    pub fn all_passed(&self) -> bool {
        self.experiments.iter().all(|e| e.checks.iter().all(|c| c.status == CheckStatus::Passed))
    }
}

/// Prefix densities of one return set, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySeries {
    pub vector: String,
    pub epsilon: f64,
    pub points: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOutcome {
    pub reports: Vec<RecurrenceReport>,
    pub series: Vec<DensitySeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureOutcome {
    pub vector: String,
    pub epsilon: f64,
    pub window_start: u64,
    pub window_len: u64,
    pub atoms: usize,
    pub invariance_defect: f64,
    pub defect_bound: f64,
    pub within_bound: bool,
    pub conjugation_defect: f64,
    pub expectation_norm: f64,
    pub second_moment: f64,
    pub support_angle: f64,
    pub symmetrized_expectation_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JdgOutcome {
    pub power_bounded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub rev_dim: usize,
    pub fl_dim: usize,
    pub fl_decay: f64,
    pub espan_dim: usize,
    pub rev_vs_espan_angle: f64,
}

type CheckResult = Result<(bool, Value), String>;

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn epsilons_for(exp: &Experiment, x: &[Complex64]) -> Vec<f64> {
    exp.spec.epsilons.clone().unwrap_or_else(|| default_epsilon_grid(x))
}

fn run_classify(exp: &Experiment) -> CheckResult {
    let spectral = unimodular_eigenpairs(&exp.operator, DEFAULT_TOL_UNIMOD).ok();
    let mut reports = Vec::new();
    let mut series = Vec::new();
    for (id, x) in &exp.vectors {
        let eps = epsilons_for(exp, x);
        let c = recurlab::classify::classify_with_spectral(
            &exp.operator,
            spectral.as_ref(),
            x,
            &eps,
            exp.spec.horizon,
            &exp.spec.thresholds,
        )
        .map_err(err)?;
        for (e, r) in eps.iter().zip(&c.return_sets) {
            let s = summarize(r, &[], SERIES_POINTS).map_err(err)?;
            let points = s.prefix_profile.iter().map(|(n, d)| (*n, *d.numer() as f64 / *d.denom() as f64)).collect();
            series.push(DensitySeries { vector: id.clone(), epsilon: *e, points });
        }
        let mut report = c.report;
        report.vector_id = id.clone();
        reports.push(report);
    }
    let passed = reports.iter().all(|r| r.records.iter().all(|rec| rec.flags.monotone()));
    Ok((passed, to_value(&ClassifyOutcome { reports, series })))
}

fn run_birkhoff(exp: &Experiment) -> CheckResult {
    let mut out = Vec::new();
    for (id, x) in &exp.vectors {
        for e in epsilons_for(exp, x) {
            let b = birkhoff_frequent_check(&exp.operator, x, e, exp.spec.horizon, &exp.spec.thresholds).map_err(err)?;
            out.push((id.clone(), b));
        }
    }
    let passed = out.iter().all(|(_, b)| b.gap <= BIRKHOFF_TOLERANCE);
    let rows: Vec<Value> = out
        .iter()
        .map(|(id, b)| serde_json::json!({ "vector": id, "check": to_value(b) }))
        .collect();
    Ok((passed, Value::Array(rows)))
}

fn run_eigen_span(exp: &Experiment) -> CheckResult {
    let xs: Vec<Vec<Complex64>> = exp.vectors.iter().map(|(_, x)| x.clone()).collect();
    let chk = eigen_span_check(
        &exp.operator,
        &xs,
        exp.spec.epsilons.as_deref(),
        exp.spec.horizon,
        &exp.spec.thresholds,
        DEFAULT_SPAN_TOLERANCE,
    )
    .map_err(err)?;
    Ok((chk.flagged_implies_span && chk.span_implies_uniform, to_value(&chk)))
}

fn run_jdg(exp: &Experiment) -> CheckResult {
    let spectral = unimodular_eigenpairs(&exp.operator, DEFAULT_TOL_UNIMOD).map_err(err)?;
    match jdg_split(&exp.operator) {
        Ok(s) => {
            let angle = principal_angle(&s.rev_basis, &spectral.espan_basis);
            let out = JdgOutcome {
                power_bounded: true,
                reason: None,
                rev_dim: s.rev_basis.ncols(),
                fl_dim: s.fl_basis.ncols(),
                fl_decay: s.fl_decay,
                espan_dim: spectral.espan_dim(),
                rev_vs_espan_angle: angle,
            };
            Ok((angle <= JDG_ANGLE_TOLERANCE, to_value(&out)))
        }
        Err(LinopError::NotPowerBounded { reason, .. }) => {
            let out = JdgOutcome {
                power_bounded: false,
                reason: Some(reason),
                rev_dim: 0,
                fl_dim: 0,
                fl_decay: 0.0,
                espan_dim: spectral.espan_dim(),
                rev_vs_espan_angle: 0.0,
            };
            Ok((true, to_value(&out)))
        }
        Err(e) => Err(e.to_string()),
    }
}

fn run_unimodular(exp: &Experiment, seed: u64) -> CheckResult {
    let spectral = unimodular_eigenpairs(&exp.operator, DEFAULT_TOL_UNIMOD).map_err(err)?;
    let angles = spectral.unimodular_angles_turns();
    if angles.is_empty() {
        return Err("operator has no unimodular eigenvalues".into());
    }
    let eps = exp.spec.epsilons.clone().unwrap_or_else(|| vec![0.1, 0.25, 0.5]);
    let mut out = Vec::new();
    for (k, e) in eps.iter().enumerate() {
        let opts = ProbeOptions { seed: derived_seed(seed, SEED_PROBES, k as u64), ..ProbeOptions::default() };
        out.push(unimodular_return_set(&angles, *e, exp.spec.horizon, &opts).map_err(err)?);
    }
    let passed = out.iter().all(|u| u.all_probes_hit && u.syndetic_gap.is_some());
    Ok((passed, serde_json::json!({ "angles_turns": angles, "epsilons": eps, "sets": to_value(&out) })))
}

fn run_product(exp: &Experiment) -> CheckResult {
    let mut out = Vec::new();
    for (id, x) in &exp.vectors {
        let (t2, x2) = match &exp.partner {
            Some((op, v)) => (op.clone(), v.clone()),
            None => (exp.operator.clone(), x.clone()),
        };
        for e in epsilons_for(exp, x) {
            let p = product_recurrence_check(&exp.operator, x, &t2, &x2, e, exp.spec.horizon, &exp.spec.thresholds)
                .map_err(err)?;
            out.push((id.clone(), p));
        }
    }
    let passed = out.iter().all(|(_, p)| p.intersection_exact && p.reiterative_parts_give_frequent_sum != Some(false));
    let rows: Vec<Value> = out
        .iter()
        .map(|(id, p)| {
            serde_json::json!({
                "vector": id,
                "epsilon": p.epsilon,
                "intersection_exact": p.intersection_exact,
                "sum_return_count": p.sum_return_count,
                "intersection_count": p.intersection_count,
                "sum_density": to_value(&p.sum_density),
                "product_of_densities": p.product_of_densities,
                "reiterative_parts_give_frequent_sum": p.reiterative_parts_give_frequent_sum,
                "sum_flags": to_value(&p.sum.flags),
                "first_flags": to_value(&p.first.flags),
                "second_flags": to_value(&p.second.flags),
            })
        })
        .collect();
    Ok((passed, Value::Array(rows)))
}

fn run_inverse(exp: &Experiment) -> CheckResult {
    let mut rows = Vec::new();
    let mut passed = true;
    for (id, x) in &exp.vectors {
        let eps = epsilons_for(exp, x);
        let c = inverse_recurrence_check(&exp.operator, x, &eps, exp.spec.horizon, &exp.spec.thresholds).map_err(err)?;
        passed &= c.flags_agree;
        rows.push(serde_json::json!({
            "vector": id,
            "epsilons": eps,
            "identical_return_sets": c.identical_return_sets,
            "flags_agree": c.flags_agree,
            "forward_flags": to_value(&c.forward.flags),
            "backward_flags": to_value(&c.backward.flags),
        }));
    }
    Ok((passed, Value::Array(rows)))
}

fn run_measure(exp: &Experiment, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(seed, SEED_BALLS, 0));
    let th = exp.spec.thresholds.resolve(exp.spec.horizon).map_err(err)?;
    let mut out = Vec::new();
    for (id, x) in &exp.vectors {
        let eps = epsilons_for(exp, x)[0];
        let orbit = iterate(&exp.operator, x, exp.spec.horizon).map_err(err)?;
        let r = return_set(&orbit, eps).map_err(err)?;
        let n = th.n_win.min(orbit.horizon_effective());
        let w = best_banach_window(&r, n).map_err(err)?;
        let mu = empirical_from_window(&orbit, w.start, n).map_err(err)?;
        let balls: Vec<Ball> = (0..exp.spec.measure.balls)
            .map(|_| {
                let k = rng.random_range(w.start..=w.start + n);
                let radius = eps * rng.random_range(0.5..2.0);
                Ball { center: orbit.point(k).to_vec(), radius }
            })
            .collect();
        let defect = invariance_defect(&exp.operator, &mu, &balls).map_err(err)?;
        let s = covariance(&mu);
        let m = moments(&mu);
        let nu = symmetrize(&mu, exp.spec.measure.roots);
        let bound = 2.0 / (n + 1) as f64;
        out.push(MeasureOutcome {
            vector: id.clone(),
            epsilon: eps,
            window_start: w.start,
            window_len: n,
            atoms: mu.len(),
            invariance_defect: defect,
            defect_bound: bound,
            within_bound: defect <= bound,
            conjugation_defect: conjugation_invariance_check(&exp.operator, &s).map_err(err)?,
            expectation_norm: euclidean_norm(&m.expectation),
            second_moment: m.second_moment,
            support_angle: support_span_vs_kernel(&mu, &s, 1e-10).map_err(err)?.principal_angle,
            symmetrized_expectation_norm: euclidean_norm(&moments(&nu).expectation),
        });
    }
    Ok((out.iter().all(|o| o.within_bound), to_value(&out)))
}

fn run_check(exp: &Experiment, check: CheckId, seed: u64) -> CheckOutcome {
    let start = Instant::now();
    let result = match check {
        CheckId::Classify => run_classify(exp),
        CheckId::Birkhoff => run_birkhoff(exp),
        CheckId::EigenSpan => run_eigen_span(exp),
        CheckId::Jdg => run_jdg(exp),
        CheckId::UnimodularReturn => run_unimodular(exp, seed),
        CheckId::Product => run_product(exp),
        CheckId::Inverse => run_inverse(exp),
        CheckId::Measure => run_measure(exp, seed),
    };
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok((passed, value)) => CheckOutcome {
            check,
            status: if passed { CheckStatus::Passed } else { CheckStatus::Failed },
            wall_time_ms,
            result: Some(value),
            error: None,
        },
        Err(message) => CheckOutcome { check, status: CheckStatus::Error, wall_time_ms, result: None, error: Some(message) },
    }
}

fn run_one(exp: &Experiment, config_seed: u64, index: usize) -> ExperimentReport {
    let seed = derived_seed(config_seed, 0, index as u64);
    let checks = exp.spec.checks.iter().map(|&c| run_check(exp, c, seed)).collect();
    ExperimentReport { name: exp.spec.name.clone(), checks }
}

fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()).filter(|&n| n > 0)
}

/// Runs every experiment; results keep config order whatever the scheduling.
pub fn run_experiment(loaded: &LoadedConfig) -> ReportDocument {
    let seed = loaded.config.seed;
    let work = || -> Vec<ExperimentReport> {
        loaded.experiments.par_iter().enumerate().map(|(i, e)| run_one(e, seed, i)).collect()
    };
    let experiments = match thread_count().map(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build()) {
        Some(Ok(pool)) => pool.install(work),
        _ => work(),
    };
    ReportDocument {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        seed,
        config_echo: loaded.raw.clone(),
        experiments,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// `<stem>_series.csv` next to `path`.
pub fn series_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    path.with_file_name(format!("{stem}_series.csv"))
}

fn classify_outcomes(doc: &ReportDocument) -> Vec<(&str, ClassifyOutcome)> {
    let mut out = Vec::new();
    for e in &doc.experiments {
        for c in &e.checks {
            if c.check != CheckId::Classify {
                continue;
            }
            if let Some(v) = &c.result {
                if let Ok(o) = serde_json::from_value::<ClassifyOutcome>(v.clone()) {
                    out.push((e.name.as_str(), o));
                }
            }
        }
    }
    out
}

fn ratio(r: recurlab::natset::Density) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// One row per (experiment, vector, ε) of every classify check.
pub fn write_csv<W: Write>(doc: &ReportDocument, mut w: W) -> io::Result<()> {
    writeln!(w, "experiment,vector,epsilon,lower,upper,banach,gap")?;
    for (name, o) in classify_outcomes(doc) {
        for r in &o.reports {
            for rec in &r.records {
                let gap = rec.syndetic_gap.map(|g| g.to_string()).unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    csv_field(name),
                    csv_field(&r.vector_id),
                    rec.epsilon,
                    ratio(rec.lower_density.value),
                    ratio(rec.upper_density.value),
                    ratio(rec.banach.ratio),
                    gap
                )?;
            }
        }
    }
    Ok(())
}

pub fn write_series_csv<W: Write>(doc: &ReportDocument, mut w: W) -> io::Result<()> {
    writeln!(w, "experiment,vector,epsilon,n,density")?;
    for (name, o) in classify_outcomes(doc) {
        for s in &o.series {
            for (n, d) in &s.points {
                writeln!(w, "{},{},{},{},{}", csv_field(name), csv_field(&s.vector), s.epsilon, n, d)?;
            }
        }
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn to_json(doc: &ReportDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("report serializes");
    s.push('\n');
    s
}

pub fn emit_report(doc: &ReportDocument, format: Format, path: &Path) -> Result<(), CliError> {
    match format {
        Format::Json => fs::write(path, to_json(doc)).map_err(|e| CliError::io(path, e)),
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(doc, &mut buf).map_err(|e| CliError::io(path, e))?;
            fs::write(path, buf).map_err(|e| CliError::io(path, e))?;
            let series = series_path(path);
            let mut buf = Vec::new();
            write_series_csv(doc, &mut buf).map_err(|e| CliError::io(&series, e))?;
            fs::write(&series, buf).map_err(|e| CliError::io(&series, e))
        }
    }
}

/// Classification of a single vector, for the `classify` subcommand.
pub fn classify_single(
    op_path: &Path,
    vector: &str,
    epsilons: &[f64],
    horizon: u64,
    thresholds: &Thresholds,
) -> Result<RecurrenceReport, CliError> {
    let raw = fs::read_to_string(op_path).map_err(|e| CliError::io(op_path, e))?;
    let spec: OperatorSpec = serde_json::from_str(&raw).map_err(|e| CliError::Parse {
        path: op_path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let t = realize(&spec).map_err(|e| CliError::Validation(e.to_string()))?;
    let vspec: VectorSpec = serde_json::from_str(vector).unwrap_or_else(|_| VectorSpec::Named(vector.to_string()));
    let x = resolve_vector(&vspec, t.dim(), 0).map_err(CliError::Validation)?;
    let eps = if epsilons.is_empty() { default_epsilon_grid(&x) } else { epsilons.to_vec() };
    let c = classify_detailed(&t, &x, &eps, horizon, thresholds).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut report = c.report;
    report.vector_id = vector_id(&vspec, 0);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<LoadedConfig, CliError> {
        parse_config(text, Path::new("test.json"))
    }

    const ROTATION: &str = r#"{
        "experiments": [{
            "name": "quarter",
            "operator": {"type": "diagonal_unimodular", "angles_turns": [0.25]},
            "vectors": ["basis:0"],
            "epsilons": [0.5],
            "horizon": 10000,
            "checks": ["classify"]
        }]
    }"#;

    #[test]
    fn minimal_config_gets_default_thresholds() {
        let c = parse(ROTATION).unwrap();
        assert_eq!(c.config.experiments[0].thresholds, Thresholds::default());
        assert_eq!(c.config.seed, 0);
        assert_eq!(c.experiments[0].vectors[0].1, vec![Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn unknown_check_is_named() {
        let text = ROTATION.replace("\"classify\"", "\"foo\"");
        let e = parse(&text).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let msg = e.to_string();
        assert!(msg.contains("foo"), "{msg}");
        assert!(matches!(e, CliError::Parse { line: 8, .. }), "{e:?}");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = r#"{"experiments": [{
            "name": "m",
            "operator": {"type": "dense_matrix", "entries": [[[1,0],[0,0]],[[0,0],[1,0]]]},
            "vectors": [[[1,0],[0,0],[0,0]]],
            "horizon": 10000,
            "checks": ["classify"]
        }]}"#;
        let e = parse(text).unwrap_err();
        assert!(matches!(e, CliError::Validation(_)));
        assert!(e.to_string().contains("dimension 3"), "{e}");
    }

    #[test]
    fn other_validation_errors() {
        for (from, to) in [
            ("\"horizon\": 10000", "\"horizon\": 10"),
            ("\"basis:0\"", "\"basis:3\""),
            ("\"basis:0\"", "\"nope\""),
            ("[0.5]", "[0.5, 0.1]"),
        ] {
            assert!(matches!(parse(&ROTATION.replace(from, to)), Err(CliError::Validation(_))), "{to}");
        }
        assert!(matches!(parse("{\"experiments\": [}"), Err(CliError::Parse { .. })));
    }

    #[test]
    fn random_vectors_follow_the_seed() {
        let a = resolve_vector(&VectorSpec::Named("random:3".into()), 4, 7).unwrap();
        let b = resolve_vector(&VectorSpec::Named("random:3".into()), 4, 7).unwrap();
        let c = resolve_vector(&VectorSpec::Named("random:3".into()), 4, 8).unwrap();
        let d = resolve_vector(&VectorSpec::Named("random:4".into()), 4, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn empty_batch_is_an_empty_report() {
        let c = parse(r#"{"experiments": []}"#).unwrap();
        let doc = run_experiment(&c);
        assert!(doc.experiments.is_empty());
        assert!(doc.all_passed());
        assert_eq!(doc.config_echo, r#"{"experiments": []}"#);
    }

    #[test]
    fn quarter_rotation_report() {
        let doc = run_experiment(&parse(ROTATION).unwrap());
        let c = &doc.experiments[0].checks[0];
        assert_eq!(c.status, CheckStatus::Passed);
        let o: ClassifyOutcome = serde_json::from_value(c.result.clone().unwrap()).unwrap();
        assert!(o.reports[0].flags.uniformly);
        assert_eq!(o.reports[0].vector_id, "basis:0");
        let mut csv = Vec::new();
        write_csv(&doc, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().starts_with("quarter,basis:0,0.5,0.25,0.25,"));
    }

    #[test]
    fn failing_check_does_not_leak() {
        let text = r#"{"experiments": [
            {"name": "bad", "operator": {"type": "dense_matrix", "entries": [[[0.5,0]]]},
             "vectors": ["ones"], "horizon": 10000, "checks": ["unimodular_return", "classify"]},
            {"name": "good", "operator": {"type": "diagonal_unimodular", "angles_turns": [0.25]},
             "vectors": ["ones"], "epsilons": [0.5], "horizon": 10000, "checks": ["classify"]}
        ]}"#;
        let doc = run_experiment(&parse(text).unwrap());
        assert_eq!(doc.experiments[0].checks[0].status, CheckStatus::Error);
        assert_eq!(doc.experiments[0].checks[1].status, CheckStatus::Passed);
        let alone = run_experiment(&parse(&ROTATION.replace("basis:0", "ones").replace("quarter", "good")).unwrap());
        assert_eq!(doc.experiments[1].without_timing(), alone.experiments[0].without_timing());
    }

    impl ExperimentReport {
        fn without_timing(&self) -> ExperimentReport {
            let mut r = self.clone();
            for c in &mut r.checks {
                c.wall_time_ms = 0.0;
            }
            r
        }
    }
}
