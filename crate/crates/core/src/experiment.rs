//! Experiment configuration, presets and the batch runner behind the CLI.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::barriers;
use crate::geometry::{self, BallDomain};
use crate::grid::{build_grid, Grid};
use crate::io;
use crate::operators::OperatorSpec;
use crate::problem::{ProblemError, ProblemSpec, WeightKind};
use crate::profile::{Certificate, RadialProfile};
use crate::radial_ode::{self, C1Report};
use crate::solver::{self, ExponentFit, ProbeReport, SolverError, Verdict};

/// Report schema version, bumped when the summary layout changes.
pub const REPORT_SCHEMA: &str = "1";

const MODULES: [&str; 6] = [
    "geometry",
    "operators",
    "barriers",
    "radial_ode",
    "grid_solver",
    "cli_harness",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    Probe,
    OdeOnly,
    BarrierOnly,
    ConvergenceStudy,
}

fn default_width() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Spacings, strictly decreasing.
    pub h: Vec<f64>,
    #[serde(default = "default_width")]
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Probe threshold `M`.
    pub growth_threshold: f64,
    pub probe_sweeps: usize,
    pub fit_band: [f64; 2],
    /// Sample count for barrier-ordering checks.
    pub samples: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_sweeps: 200_000,
            growth_threshold: 3.0,
            probe_sweeps: 20_000,
            fit_band: [0.01, 0.2],
            samples: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub csv: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { dir: None, csv: true }
    }
}

/// Assertions checked after a run; absent entries are not checked.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Expectations {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_verdicts: Option<Vec<Verdict>>,
    /// L∞ error bound at the finest spacing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors_decreasing: Option<bool>,
    /// `[lo, hi]` for the fitted boundary exponent at the finest spacing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier_violations: Option<usize>,
    /// `[value, tolerance]` for `u(0)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_value: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1_finite: Option<Vec<bool>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ordering_violations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub mode: Mode,
    pub problem: ProblemSpec,
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub seed: u64,
    /// Drift strengths for a threshold scan (probe mode).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scan_b: Vec<f64>,
    /// Also solve with `p` multiplied by this factor and compare nodewise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_factor: Option<f64>,
    /// Exponents `γ` for boundary-gradient reports (ode_only mode).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c1_gammas: Vec<f64>,
    #[serde(default)]
    pub expect: Expectations,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("unknown preset `{0}`; available: {list}", list = PRESETS.join(", "))]
    UnknownPreset(String),
}

fn cfg_err(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no exact solution available: {0}")]
    NoExactSolution(String),
    #[error("{context}: {message}")]
    Module { context: String, message: String },
    #[error("writing outputs: {0}")]
    Output(#[from] std::io::Error),
}

fn ctx<E: Display>(context: impl Into<String>) -> impl FnOnce(E) -> ExperimentError {
    let context = context.into();
    move |e| ExperimentError::Module {
        context,
        message: e.to_string(),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let c: Self = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        let c: Self = serde_json::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Loads `.json` files as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes to JSON")
    }

    /// SHA-256 of the canonical JSON encoding, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.outputs.dir = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes to JSON");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let h = &self.grid.h;
        if h.is_empty() {
            return Err(cfg_err("grid.h", "empty h list"));
        }
        let limit = self.problem.domain.radius() / 4.0;
        for (i, v) in h.iter().enumerate() {
            if !(*v > 0.0 && *v <= limit) {
                return Err(cfg_err(format!("grid.h[{i}]"), format!("{v} outside (0, R/4 = {limit}]")));
            }
        }
        if let Some(i) = h.windows(2).position(|w| w[1] >= w[0]) {
            return Err(cfg_err(format!("grid.h[{}]", i + 1), "h list must be strictly decreasing"));
        }
        if !(1..=3).contains(&self.grid.width) {
            return Err(cfg_err("grid.width", format!("must be 1, 2 or 3, got {}", self.grid.width)));
        }
        self.problem.validate().map_err(|e| match e {
            ProblemError::Field { field, message } => cfg_err(format!("problem.{field}"), message),
            ProblemError::Operator(o) => cfg_err("problem.operator", o.to_string()),
        })?;
        let t = &self.tolerances;
        if !(t.tol > 0.0) {
            return Err(cfg_err("tolerances.tol", "must be positive"));
        }
        if t.max_sweeps == 0 || t.probe_sweeps == 0 {
            return Err(cfg_err("tolerances.max_sweeps", "sweep limits must be positive"));
        }
        if !(t.growth_threshold > 0.0) {
            return Err(cfg_err("tolerances.growth_threshold", "must be positive"));
        }
        let [lo, hi] = t.fit_band;
        if !(lo > 0.0 && lo < hi && hi <= self.problem.domain.radius() / 2.0) {
            return Err(cfg_err("tolerances.fit_band", "need 0 < lo < hi ≤ R/2"));
        }
        if let Some(f) = self.weight_factor {
            if !(f > 0.0) {
                return Err(cfg_err("weight_factor", "must be positive"));
            }
        }
        match self.mode {
            Mode::Solve | Mode::ConvergenceStudy | Mode::BarrierOnly => {
                if let Err(e) = self.problem.existence_regime() {
                    let path = if self.problem.beta <= -1.0 {
                        "problem.beta"
                    } else {
                        "problem.drift_b"
                    };
                    return Err(cfg_err(path, e.0));
                }
                if matches!(self.problem.operator, OperatorSpec::MinimalSurface) && self.mode != Mode::BarrierOnly {
                    return Err(cfg_err("problem.operator", "minimal_surface has no grid discretization"));
                }
            }
            Mode::Probe => {
                if self.scan_b.iter().any(|b| !(*b >= 0.0)) {
                    return Err(cfg_err("scan_b", "drift strengths must be ≥ 0"));
                }
            }
            Mode::OdeOnly => {
                if !matches!(
                    self.problem.operator,
                    OperatorSpec::LowerPartialSum { .. }
                        | OperatorSpec::InfinityLaplacianLower
                        | OperatorSpec::InfinityLaplacianUpper
                ) {
                    return Err(cfg_err(
                        "problem.operator",
                        "ode_only needs lower_partial_sum or an infinity Laplacian",
                    ));
                }
                if self.c1_gammas.iter().any(|g| !(*g > 0.0)) {
                    return Err(cfg_err("c1_gammas", "exponents must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// One pass/fail assertion of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub name: String,
    pub mode: Mode,
    pub config_sha256: String,
    pub versions: BTreeMap<String, String>,
    pub seed: u64,
    pub results: serde_json::Value,
    pub checks: Vec<Check>,
}

/// The JSON summary plus named CSV tables.
#[derive(Clone, Debug)]
pub struct ReportBundle {
    pub summary: Summary,
    pub tables: BTreeMap<String, String>,
}

impl ReportBundle {
    pub fn passed(&self) -> bool {
        self.summary.checks.iter().all(|c| c.passed)
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    /// Writes `summary.json` and every table into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("summary.json"), self.summary_json() + "\n")?;
        for (name, body) in &self.tables {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

fn versions() -> BTreeMap<String, String> {
    let mut m: BTreeMap<String, String> = MODULES
        .iter()
        .map(|m| (m.to_string(), crate::VERSION.to_string()))
        .collect();
    m.insert("report_schema".into(), REPORT_SCHEMA.into());
    m
}

/// Runs independent jobs in parallel unless `sequential`; results keep input order.
fn map_jobs<T, R, F>(items: &[T], sequential: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if sequential {
        items.iter().map(f).collect()
    } else {
        items.par_iter().map(f).collect()
    }
}

/// Exact radial solution on a single ball, when one of the closed forms
/// solves the problem rather than bounding it.
pub fn exact_solution(spec: &ProblemSpec) -> Result<(Vec<f64>, RadialProfile), ExperimentError> {
    let none = |why: &str| Err(ExperimentError::NoExactSolution(why.to_string()));
    let d = &spec.domain;
    if d.centers().len() != 1 {
        return none("domain is not a single ball");
    }
    if !matches!(spec.operator, OperatorSpec::UpperPartialSum { .. }) {
        return none("closed forms solve the upper partial sum only");
    }
    if spec.beta > 0.0 {
        return none("β > 0 closed forms are supersolutions, not solutions");
    }
    if spec.weight_kind == WeightKind::PowerOfDelta && spec.c1 != spec.c2 {
        return none("weight is not c δ^β");
    }
    let (r, k, g, b) = (d.radius(), spec.k, spec.gamma, spec.beta);
    let profile = match (spec.drift_sign, spec.drift_b) {
        (_, 0.0) => barriers::ball_solution_beta_nonpos(spec.c2, k, g, b, r),
        (0, _) => barriers::ball_solution_beta_nonpos(spec.c2, k, g, b, r),
        (1, x) => barriers::drift_ball_supersolution(spec.c2, k, g, b, x, r),
        _ => return none("no closed form for −b|Du|"),
    }
    .map_err(|e| ExperimentError::NoExactSolution(e.to_string()))?;
    if profile.certificate() != Certificate::Concave {
        return none("profile is not certified concave");
    }
    Ok((d.centers()[0].clone(), profile))
}

fn radius_from(c: &[f64], x: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Per-spacing results of a solve.
#[derive(Clone, Debug, Serialize)]
pub struct LevelResult {
    pub h: f64,
    pub nodes: usize,
    pub frozen_nodes: usize,
    pub sweeps: usize,
    pub last_update: f64,
    pub monotone: bool,
    pub lower_scale: f64,
    pub upper_scale: f64,
    pub eps: f64,
    pub center_value: f64,
    pub max_value: f64,
    /// Distance from the argmax node to the nearest center.
    pub argmax_offset: f64,
    pub linf_error: Option<f64>,
    pub exponent: Option<ExponentFit>,
    /// Nodes where the field exceeds the closed-form supersolution.
    pub barrier_violations: usize,
    pub comparison: Option<ComparisonResult>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonResult {
    pub factor: f64,
    /// Nodes violating the expected order by more than `tol`.
    pub violations: usize,
    pub min_gap: f64,
}

fn slice_csv(grid: &Grid, values: &[f64], exact: Option<&(Vec<f64>, RadialProfile)>) -> String {
    let h = grid.h;
    let mut rows: Vec<(f64, f64, f64)> = grid
        .nodes
        .iter()
        .zip(values)
        .filter(|(n, _)| n.x[1..].iter().all(|x| x.abs() < 0.5 * h))
        .map(|(n, v)| (n.x[0], n.delta, *v))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = String::from("x,delta,u,exact\n");
    for (x, d, v) in rows {
        let e = exact.map_or(String::new(), |(c, p)| {
            let mut pt = vec![0.0; grid.dimension()];
            pt[0] = x;
            p.value(radius_from(c, &pt)).to_string()
        });
        out.push_str(&format!("{x},{d},{v},{e}\n"));
    }
    out
}

fn scaled_weight(spec: &ProblemSpec, factor: f64) -> ProblemSpec {
    let mut s = spec.clone();
    s.c1 *= factor;
    s.c2 *= factor;
    s
}

fn solve_level(
    cfg: &ExperimentConfig,
    h: f64,
    exact: Option<&(Vec<f64>, RadialProfile)>,
) -> Result<(LevelResult, Vec<(String, String)>), ExperimentError> {
    let spec = &cfg.problem;
    let t = &cfg.tolerances;
    let here = format!("h = {h}");
    let grid = build_grid(&spec.domain, h, cfg.grid.width).map_err(ctx(&here))?;
    let out = solver::solve_problem(&grid, spec, t.tol, t.max_sweeps).map_err(ctx(&here))?;
    let u = &out.field.values;

    let centers = spec.domain.centers();
    let center_node = grid.nearest_node(&centers[0]);
    let (imax, max_value) = u
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    let argmax_offset = centers
        .iter()
        .map(|c| radius_from(c, &grid.nodes[imax].x))
        .fold(f64::INFINITY, f64::min);
    let linf_error = exact.map(|(c, p)| {
        grid.nodes
            .iter()
            .zip(u)
            .map(|(n, v)| (v - p.value(radius_from(c, &n.x))).abs())
            .fold(0.0, f64::max)
    });
    let exponent = match solver::fit_boundary_exponent(&grid, u, (t.fit_band[0], t.fit_band[1])) {
        Ok(f) => Some(f),
        Err(SolverError::InsufficientNodes { .. }) => None,
        Err(e) => return Err(ctx(&here)(e)),
    };
    let sup = barriers::inf_ball_supersolution(spec).map_err(ctx(&here))?;
    let barrier_violations = grid
        .nodes
        .iter()
        .zip(u)
        .filter(|(n, v)| **v > sup.value(&n.x) + t.tol)
        .count();
    let comparison = match cfg.weight_factor {
        Some(f) => {
            let other = scaled_weight(spec, f);
            let o = solver::solve_problem(&grid, &other, t.tol, t.max_sweeps)
                .map_err(ctx(format!("{here}, weight × {f}")))?;
            let sign = if f >= 1.0 { 1.0 } else { -1.0 };
            let gaps: Vec<f64> = o.field.values.iter().zip(u).map(|(a, b)| sign * (a - b)).collect();
            Some(ComparisonResult {
                factor: f,
                violations: gaps.iter().filter(|g| **g < -t.tol).count(),
                min_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
            })
        }
        None => None,
    };
    let mut tables = Vec::new();
    if cfg.outputs.csv {
        let mut buf = Vec::new();
        io::write_field_csv(&grid, u, &mut buf).map_err(ctx(&here))?;
        tables.push((format!("field_h{h}.csv"), String::from_utf8(buf).expect("utf-8")));
        tables.push((format!("slice_h{h}.csv"), slice_csv(&grid, u, exact)));
    }
    Ok((
        LevelResult {
            h,
            nodes: grid.len(),
            frozen_nodes: grid.nodes.iter().filter(|n| n.frozen).count(),
            sweeps: out.field.sweeps,
            last_update: out.field.last_update,
            monotone: out.field.monotone,
            lower_scale: out.barriers.lower_scale,
            upper_scale: out.barriers.upper_scale,
            eps: out.barriers.eps,
            center_value: u[center_node],
            max_value,
            argmax_offset,
            linf_error,
            exponent,
            barrier_violations,
            comparison,
        },
        tables,
    ))
}

fn solve_levels(
    cfg: &ExperimentConfig,
    exact: Option<&(Vec<f64>, RadialProfile)>,
    sequential: bool,
) -> Result<(Vec<LevelResult>, BTreeMap<String, String>), ExperimentError> {
    let results = map_jobs(&cfg.grid.h, sequential, |h| solve_level(cfg, *h, exact));
    let mut levels = Vec::new();
    let mut tables = BTreeMap::new();
    for r in results {
        let (level, t) = r?;
        levels.push(level);
        tables.extend(t);
    }
    Ok((levels, tables))
}

fn level_checks(cfg: &ExperimentConfig, levels: &[LevelResult], checks: &mut Vec<Check>) {
    let e = &cfg.expect;
    let last = levels.last().expect("h list is nonempty");
    let errors: Vec<f64> = levels.iter().filter_map(|l| l.linf_error).collect();
    if let Some(want) = e.errors_decreasing {
        let dec = errors.len() == levels.len() && errors.windows(2).all(|w| w[1] < w[0]);
        checks.push(check("errors_decreasing", dec == want, format!("L∞ errors {errors:?}")));
    }
    if let Some(bound) = e.max_error {
        let ok = last.linf_error.is_some_and(|x| x <= bound);
        checks.push(check(
            "max_error",
            ok,
            format!("L∞ error {:?} at h = {}, bound {bound}", last.linf_error, last.h),
        ));
    }
    if let Some([lo, hi]) = e.exponent {
        let x = last.exponent.as_ref().map(|f| f.exponent);
        let ok = x.is_some_and(|x| x >= lo && x <= hi);
        checks.push(check("exponent", ok, format!("fitted {x:?} at h = {}, want [{lo}, {hi}]", last.h)));
    }
    if let Some(want) = e.barrier_violations {
        let got: usize = levels.iter().map(|l| l.barrier_violations).sum();
        checks.push(check("barrier_violations", got == want, format!("{got} nodes above the supersolution")));
    }
    if let Some(want) = e.comparison_violations {
        let got: Option<usize> = levels
            .iter()
            .map(|l| l.comparison.as_ref().map(|c| c.violations))
            .sum();
        checks.push(check(
            "comparison_violations",
            got == Some(want),
            format!("{got:?} order violations"),
        ));
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub linf_error: f64,
    pub exponent: Option<f64>,
    /// `ln(e(h_prev)/e(h)) / ln(h_prev/h)`; `log₂` of the error ratio under halving.
    pub observed_order: Option<f64>,
}

/// Error, boundary exponent and observed order per spacing.
pub fn convergence_study(
    cfg: &ExperimentConfig,
    sequential: bool,
) -> Result<(Vec<ConvergenceRow>, Vec<LevelResult>, BTreeMap<String, String>), ExperimentError> {
    let exact = exact_solution(&cfg.problem)?;
    let (levels, mut tables) = solve_levels(cfg, Some(&exact), sequential)?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for (i, l) in levels.iter().enumerate() {
        let err = l.linf_error.expect("exact solution present");
        let order = (i > 0).then(|| {
            let prev = &levels[i - 1];
            (prev.linf_error.unwrap() / err).ln() / (prev.h / l.h).ln()
        });
        rows.push(ConvergenceRow {
            h: l.h,
            linf_error: err,
            exponent: l.exponent.as_ref().map(|f| f.exponent),
            observed_order: order,
        });
    }
    let mut csv = String::from("h,linf_error,exponent,observed_order\n");
    for r in &rows {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        csv.push_str(&format!("{},{},{},{}\n", r.h, r.linf_error, opt(r.exponent), opt(r.observed_order)));
    }
    tables.insert("convergence.csv".into(), csv);
    Ok((rows, levels, tables))
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub b: f64,
    pub verdict: Verdict,
    pub core_min: f64,
    pub sweeps: usize,
    pub message: String,
}

/// Probes `+b|Du|` for each `b` on the finest configured grid.
pub fn threshold_scan(cfg: &ExperimentConfig, b_values: &[f64], sequential: bool) -> Result<Vec<ScanRow>, ExperimentError> {
    let h = *cfg.grid.h.last().expect("h list is nonempty");
    let grid = build_grid(&cfg.problem.domain, h, cfg.grid.width).map_err(ctx(format!("h = {h}")))?;
    let t = &cfg.tolerances;
    map_jobs(b_values, sequential, |&b| {
        let spec = cfg.problem.clone().with_drift(b, 1);
        let r = solver::nonexistence_probe(&grid, &spec, t.growth_threshold, t.probe_sweeps)
            .map_err(ctx(format!("b = {b}")))?;
        Ok(ScanRow {
            b,
            verdict: r.verdict,
            core_min: r.core_min,
            sweeps: r.sweeps,
            message: r.message,
        })
    })
    .into_iter()
    .collect()
}

fn probe_levels(cfg: &ExperimentConfig, sequential: bool) -> Result<(Vec<(f64, ProbeReport)>, BTreeMap<String, String>), ExperimentError> {
    let t = &cfg.tolerances;
    let results = map_jobs(&cfg.grid.h, sequential, |&h| {
        let here = format!("h = {h}");
        let grid = build_grid(&cfg.problem.domain, h, cfg.grid.width).map_err(ctx(&here))?;
        let r = solver::nonexistence_probe(&grid, &cfg.problem, t.growth_threshold, t.probe_sweeps).map_err(ctx(&here))?;
        Ok::<_, ExperimentError>((h, r))
    });
    let mut out = Vec::new();
    let mut tables = BTreeMap::new();
    for r in results {
        let (h, mut report) = r?;
        if cfg.outputs.csv {
            let mut csv = String::from("sweep,core_min\n");
            for (i, v) in report.core_history.iter().enumerate() {
                csv.push_str(&format!("{},{v}\n", i + 1));
            }
            tables.insert(format!("probe_h{h}.csv"), csv);
        }
        report.core_history.clear();
        out.push((h, report));
    }
    let mut floor = String::from("h,family,parameter,center_value,nodes_below,core_min\n");
    for (h, r) in &out {
        if let Some(f) = &r.floor {
            floor.push_str(&format!(
                "{h},{},{},{},{},{}\n",
                f.family, f.parameter, f.center_value, f.nodes_below, r.core_min
            ));
        }
    }
    tables.insert("floor.csv".into(), floor);
    Ok((out, tables))
}

#[derive(Clone, Debug, Serialize)]
struct OdeResult {
    kdim: usize,
    u0: f64,
    residual: f64,
    c1: Vec<C1Report>,
}

fn ode_run(cfg: &ExperimentConfig, sequential: bool) -> Result<(OdeResult, BTreeMap<String, String>), ExperimentError> {
    let spec = &cfg.problem;
    let kdim = match spec.operator {
        OperatorSpec::LowerPartialSum { k } => k,
        _ => 1,
    };
    let r = spec.domain.radius();
    let profile = radial_ode::shoot_second_order(kdim, spec.gamma, r).map_err(ctx("shooting"))?;
    let residual = profile
        .ode()
        .map_or(f64::NAN, |o| radial_ode::residual(&profile, o, 1000));
    let c1 = map_jobs(&cfg.c1_gammas, sequential, |&g| {
        radial_ode::infinity_laplacian_profile(g, r)
            .map(|(_, rep)| rep)
            .map_err(ctx(format!("γ = {g}")))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut tables = BTreeMap::new();
    if cfg.outputs.csv {
        let mut buf = Vec::new();
        profile.write_csv(&mut buf, 1000)?;
        tables.insert("profile.csv".into(), String::from_utf8(buf).expect("utf-8"));
        let mut buf = Vec::new();
        io::write_c1_csv(&c1, &mut buf).map_err(ctx("c1 table"))?;
        tables.insert("c1.csv".into(), String::from_utf8(buf).expect("utf-8"));
    }
    Ok((
        OdeResult {
            kdim,
            u0: profile.value(0.0),
            residual,
            c1,
        },
        tables,
    ))
}

#[derive(Clone, Debug, Serialize)]
struct BarrierResult {
    profile: String,
    center_value: f64,
    residual: Option<f64>,
    certificate: Certificate,
    exponents: barriers::ExponentReport,
    eps: f64,
    t: f64,
    constants: geometry::DistanceConstants,
    samples: usize,
    ordering_violations: usize,
    min_gap: f64,
}

/// Checks `ε d^t ≤ inf_y u_y` at sampled interior points.
pub fn barrier_ordering(spec: &ProblemSpec, samples: usize, seed: u64) -> Result<(usize, f64), ExperimentError> {
    let sub = barriers::subsolution_field(spec, spec.smoothing()).map_err(ctx("subsolution"))?;
    let sup = barriers::inf_ball_supersolution(spec).map_err(ctx("supersolution"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = geometry::sample_interior(&spec.domain, samples, &mut rng);
    let gaps: Vec<f64> = pts.iter().map(|x| sup.value(x) - sub.value(x)).collect();
    Ok((
        gaps.iter().filter(|g| **g < 0.0).count(),
        gaps.iter().copied().fold(f64::INFINITY, f64::min),
    ))
}

fn barrier_run(cfg: &ExperimentConfig) -> Result<(BarrierResult, BTreeMap<String, String>), ExperimentError> {
    let spec = &cfg.problem;
    let profile = barriers::ball_barrier_profile(spec).map_err(ctx("barrier profile"))?;
    let exponents = barriers::boundary_estimate(spec).map_err(ctx("boundary estimate"))?;
    let sub = barriers::subsolution_field(spec, spec.smoothing()).map_err(ctx("subsolution"))?;
    let (violations, min_gap) = barrier_ordering(spec, cfg.tolerances.samples, cfg.seed)?;
    let mut tables = BTreeMap::new();
    if cfg.outputs.csv {
        let mut buf = Vec::new();
        profile.write_csv(&mut buf, 1000)?;
        tables.insert("barrier_profile.csv".into(), String::from_utf8(buf).expect("utf-8"));
    }
    Ok((
        BarrierResult {
            profile: profile.name().to_string(),
            center_value: profile.value(0.0),
            residual: profile.ode().map(|o| radial_ode::residual(&profile, o, 1000)),
            certificate: profile.certificate(),
            exponents,
            eps: sub.eps,
            t: sub.t,
            constants: sub.constants,
            samples: cfg.tolerances.samples,
            ordering_violations: violations,
            min_gap,
        },
        tables,
    ))
}

/// Runs the configured mode. Jobs inside a run (spacings, scan values,
/// exponents) execute concurrently unless `sequential`.
pub fn run(cfg: &ExperimentConfig, sequential: bool) -> Result<ReportBundle, ExperimentError> {
    cfg.validate()?;
    let e = &cfg.expect;
    let mut checks = Vec::new();
    let (results, tables) = match cfg.mode {
        Mode::Solve => {
            let exact = exact_solution(&cfg.problem).ok();
            let (levels, tables) = solve_levels(cfg, exact.as_ref(), sequential)?;
            level_checks(cfg, &levels, &mut checks);
            (serde_json::json!({ "levels": levels }), tables)
        }
        Mode::ConvergenceStudy => {
            let (rows, levels, tables) = convergence_study(cfg, sequential)?;
            level_checks(cfg, &levels, &mut checks);
            let sigma = barriers::holder_exponent(cfg.problem.gamma, cfg.problem.beta).ok();
            (
                serde_json::json!({ "table": rows, "levels": levels, "predicted_sigma": sigma }),
                tables,
            )
        }
        Mode::Probe if !cfg.scan_b.is_empty() => {
            let rows = threshold_scan(cfg, &cfg.scan_b, sequential)?;
            if let Some(want) = &e.scan_verdicts {
                let got: Vec<Verdict> = rows.iter().map(|r| r.verdict).collect();
                checks.push(check("scan_verdicts", &got == want, format!("got {got:?}, want {want:?}")));
            }
            let mut csv = String::from("b,verdict,core_min,sweeps\n");
            for r in &rows {
                csv.push_str(&format!("{},{},{},{}\n", r.b, r.verdict, r.core_min, r.sweeps));
            }
            let tables = BTreeMap::from([("scan.csv".to_string(), csv)]);
            (serde_json::json!({ "scan": rows }), tables)
        }
        Mode::Probe => {
            let (reports, tables) = probe_levels(cfg, sequential)?;
            if let Some(want) = e.verdict {
                let (h, r) = reports.last().expect("h list is nonempty");
                checks.push(check("verdict", r.verdict == want, format!("h = {h}: {}", r.message)));
            }
            let levels: Vec<_> = reports
                .iter()
                .map(|(h, r)| serde_json::json!({ "h": h, "report": r }))
                .collect();
            (serde_json::json!({ "levels": levels }), tables)
        }
        Mode::OdeOnly => {
            let (res, tables) = ode_run(cfg, sequential)?;
            if let Some([v, tol]) = e.center_value {
                checks.push(check(
                    "center_value",
                    (res.u0 - v).abs() <= tol,
                    format!("u(0) = {}, want {v} ± {tol}", res.u0),
                ));
            }
            if let Some(want) = &e.c1_finite {
                let got: Vec<bool> = res.c1.iter().map(|c| c.finite_boundary_gradient).collect();
                checks.push(check("c1_finite", &got == want, format!("got {got:?}, want {want:?}")));
            }
            (serde_json::to_value(&res).expect("serializes"), tables)
        }
        Mode::BarrierOnly => {
            let (res, tables) = barrier_run(cfg)?;
            if let Some(want) = e.ordering_violations {
                checks.push(check(
                    "ordering_violations",
                    res.ordering_violations == want,
                    format!("{} of {} samples, min gap {:e}", res.ordering_violations, res.samples, res.min_gap),
                ));
            }
            (serde_json::to_value(&res).expect("serializes"), tables)
        }
    };
    let bundle = ReportBundle {
        summary: Summary {
            name: cfg.name.clone(),
            mode: cfg.mode,
            config_sha256: cfg.hash(),
            versions: versions(),
            seed: cfg.seed,
            results,
            checks,
        },
        tables,
    };
    if let Some(dir) = &cfg.outputs.dir {
        bundle.write_to(dir)?;
    }
    Ok(bundle)
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 9] = [
    "hemisphere",
    "singular_weight",
    "comparison",
    "singular_nonexistence",
    "probe_control",
    "drift_threshold",
    "drift_existence",
    "shooting",
    "two_ball_barriers",
];

fn disk() -> BallDomain {
    BallDomain::ball(1.0, 2).expect("unit disk")
}

fn base(name: &str, mode: Mode, problem: ProblemSpec, h: Vec<f64>) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        mode,
        problem,
        grid: GridConfig { h, width: 2 },
        tolerances: Tolerances::default(),
        outputs: Outputs::default(),
        seed: 0,
        scan_b: Vec::new(),
        weight_factor: None,
        c1_gammas: Vec::new(),
        expect: Expectations::default(),
    }
}

/// Built-in configurations, one per reproducible claim.
pub fn preset(name: &str) -> Result<ExperimentConfig, ConfigError> {
    let hs = vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
    let mut c = match name {
        "hemisphere" => {
            let mut c = base(
                name,
                Mode::ConvergenceStudy,
                ProblemSpec::upper_constant(disk(), 1, 1.0, 1.0),
                hs,
            );
            c.expect.errors_decreasing = Some(true);
            c.expect.max_error = Some(0.1);
            c.expect.exponent = Some([0.4, 0.6]);
            c
        }
        "singular_weight" => {
            let mut c = base(
                name,
                Mode::ConvergenceStudy,
                ProblemSpec::upper_power(disk(), 1, 1.0, -0.5, 1.0),
                vec![1.0 / 16.0, 1.0 / 32.0],
            );
            c.expect.exponent = Some([0.15, 0.35]);
            c
        }
        "comparison" => {
            let mut c = base(
                name,
                Mode::Solve,
                ProblemSpec::upper_constant(disk(), 1, 1.0, 1.0),
                vec![1.0 / 16.0],
            );
            c.weight_factor = Some(2.0);
            c.expect.comparison_violations = Some(0);
            c
        }
        "singular_nonexistence" => {
            let mut c = base(
                name,
                Mode::Probe,
                ProblemSpec::upper_power(disk(), 1, 1.0, -1.0, 1.0),
                vec![1.0 / 32.0],
            );
            c.expect.verdict = Some(Verdict::BlowUp);
            c
        }
        "probe_control" => {
            let mut c = base(
                name,
                Mode::Probe,
                ProblemSpec::upper_power(disk(), 1, 1.0, 0.0, 1.0),
                vec![1.0 / 32.0],
            );
            c.expect.verdict = Some(Verdict::Bounded);
            c
        }
        "drift_threshold" => {
            let mut c = base(
                name,
                Mode::Probe,
                ProblemSpec::upper_power(disk(), 1, 1.0, 0.0, 1.0).with_drift(0.0, 1),
                vec![1.0 / 32.0],
            );
            c.scan_b = vec![0.5, 0.9, 1.1, 1.5];
            c.expect.scan_verdicts = Some(vec![
                Verdict::Bounded,
                Verdict::Bounded,
                Verdict::BlowUp,
                Verdict::BlowUp,
            ]);
            c
        }
        "drift_existence" => {
            let mut c = base(
                name,
                Mode::Solve,
                ProblemSpec::upper_power(disk(), 1, 1.0, 0.0, 1.0).with_drift(0.5, 1),
                vec![1.0 / 16.0, 1.0 / 32.0],
            );
            c.expect.barrier_violations = Some(0);
            c
        }
        "shooting" => {
            let mut spec = ProblemSpec::upper_power(disk(), 1, 1.0, 0.0, 1.0);
            spec.operator = OperatorSpec::LowerPartialSum { k: 1 };
            let mut c = base(name, Mode::OdeOnly, spec, vec![0.25]);
            c.c1_gammas = vec![0.5, 0.9, 1.0, 1.5, 2.0];
            c.expect.center_value = Some([(2.0 / std::f64::consts::PI).sqrt(), 1e-4]);
            c.expect.c1_finite = Some(vec![true, true, false, false, false]);
            c
        }
        "two_ball_barriers" => {
            let domain = BallDomain::new(vec![vec![-0.5, 0.0], vec![0.5, 0.0]], 1.0, 2).expect("two balls");
            let mut c = base(
                name,
                Mode::BarrierOnly,
                ProblemSpec::upper_power(domain, 1, 1.0, 0.0, 1.0),
                vec![0.125],
            );
            c.expect.ordering_violations = Some(0);
            c
        }
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    };
    c.seed = 0;
    c.validate()?;
    Ok(c)
}

/// One closed-form or shooting profile checked against its ODE and,
/// where known, a reference value of `u(0)`.
#[derive(Clone, Debug, Serialize)]
pub struct OracleRow {
    pub name: String,
    pub params: String,
    pub center_value: f64,
    pub expected: Option<f64>,
    pub residual: Option<f64>,
    pub passed: bool,
}

/// Largest difference between two profiles on a 10³-point grid of `[0, R]`.
pub fn max_profile_gap(a: &RadialProfile, b: &RadialProfile) -> f64 {
    let s = a.support().min(b.support());
    (0..1000)
        .map(|i| {
            let r = s * i as f64 / 999.0;
            (a.value(r) - b.value(r)).abs()
        })
        .fold(0.0, f64::max)
}

/// Reference values, ODE residuals and two-formula consistency checks.
pub fn oracle_table() -> Result<Vec<OracleRow>, ExperimentError> {
    let s83 = (8.0f64 / 3.0).sqrt();
    // u(0)² = 2(−ρ − ln(1 − ρ)) and u_ε(0)² = 2(ε − 1 + ln(1/ε)) for k = b = γ = 1.
    let w0 = |rho: f64| (2.0 * (-rho - (1.0 - rho).ln())).sqrt();
    let ue0 = |eps: f64| (2.0 * (eps - 1.0 - eps.ln())).sqrt();
    let b = |e: barriers::BarrierError| ExperimentError::Module {
        context: "oracle".into(),
        message: e.to_string(),
    };
    let cases: Vec<(&str, RadialProfile, Option<f64>)> = vec![
        ("c2=1 k=1 γ=1 β=0 R=1", barriers::ball_solution_beta_nonpos(1.0, 1, 1.0, 0.0, 1.0).map_err(b)?, Some(1.0)),
        ("c2=1 k=1 γ=1 β=−0.5 R=1", barriers::ball_solution_beta_nonpos(1.0, 1, 1.0, -0.5, 1.0).map_err(b)?, Some(s83)),
        ("c2=1 k=1 γ=1 β=0.5 R=1", barriers::ball_supersolution_beta_pos(1.0, 1, 1.0, 0.5, 1.0).map_err(b)?, None),
        ("k=1 γ=1 ρ=0.5", barriers::nonexistence_profile(1, 1.0, 0.5).map_err(b)?, Some(w0(0.5))),
        ("k=1 γ=1 ρ=0.999", barriers::nonexistence_profile(1, 1.0, 0.999).map_err(b)?, Some(w0(0.999))),
        ("k=1 γ=1 b=1 ε=0.1", barriers::drift_nonexistence_profile(1, 1.0, 1.0, 0.1).map_err(b)?, Some(ue0(0.1))),
        ("k=1 γ=1 b=1 ε=0.01", barriers::drift_nonexistence_profile(1, 1.0, 1.0, 0.01).map_err(b)?, Some(ue0(0.01))),
        ("c2=1 k=1 γ=1 β=0 b=0.5 R=1", barriers::drift_ball_integral_form(1.0, 1, 1.0, 0.0, 0.5, 1.0).map_err(b)?, Some(1.243051)),
        ("c2=1 k=1 γ=1 β=0 b=0.5 R=1", barriers::drift_ball_log_form(1.0, 1, 1.0, 0.0, 0.5, 1.0).map_err(b)?, Some(1.243051)),
        ("c2=1 k=1 γ=1 β=−0.5 b=0.5 R=1", barriers::drift_ball_integral_form(1.0, 1, 1.0, -0.5, 0.5, 1.0).map_err(b)?, None),
        ("α=0.5 γ=1 k=1 R=1", barriers::br_equals_k_solution(0.5, 1.0, 1, 1.0).map_err(b)?, Some(s83)),
        ("α=2 γ=1 k=1", barriers::partial_sum_alpha_solution(2.0, 1.0, 1).map_err(b)?, None),
        ("k=1 γ=1 β=−1 b=0.5 R=1 ρ=0.5", barriers::drift_blowup_integral_profile(1, 1.0, -1.0, 0.5, 1.0, 0.5).map_err(b)?, None),
        (
            "kdim=1 γ=1 R=1",
            radial_ode::shoot_second_order(1, 1.0, 1.0).map_err(ctx("shooting"))?,
            Some((2.0 / std::f64::consts::PI).sqrt()),
        ),
    ];
    let mut rows: Vec<OracleRow> = cases
        .into_iter()
        .map(|(params, p, expected)| {
            let u0 = p.value(0.0);
            let residual = p.ode().map(|o| radial_ode::residual(&p, o, 1000));
            let tol = if p.table_data().is_some() { 1e-4 } else { 1e-6 };
            let passed = expected.is_none_or(|e| (u0 - e).abs() <= tol) && residual.is_none_or(|r| r <= 1e-6);
            OracleRow {
                name: p.name().to_string(),
                params: params.to_string(),
                center_value: u0,
                expected,
                residual,
                passed,
            }
        })
        .collect();

    let pos = barriers::ball_supersolution_beta_pos(1.0, 1, 1.0, 1e-12, 1.0).map_err(b)?;
    let nonpos = barriers::ball_solution_beta_nonpos(1.0, 1, 1.0, 0.0, 1.0).map_err(b)?;
    let gap = max_profile_gap(&pos, &nonpos);
    rows.push(OracleRow {
        name: "consistency:beta_pos_vs_nonpos".into(),
        params: "β = 10⁻¹² vs β = 0".into(),
        center_value: gap,
        expected: Some(0.0),
        residual: None,
        passed: gap <= 1e-8,
    });
    let int = barriers::drift_ball_integral_form(1.0, 1, 1.0, 0.0, 0.5, 1.0).map_err(b)?;
    let log = barriers::drift_ball_log_form(1.0, 1, 1.0, 0.0, 0.5, 1.0).map_err(b)?;
    let gap = max_profile_gap(&int, &log);
    rows.push(OracleRow {
        name: "consistency:drift_integral_vs_log".into(),
        params: "β = 0, b = 0.5".into(),
        center_value: gap,
        expected: Some(0.0),
        residual: None,
        passed: gap <= 1e-8,
    });
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let c = preset(name).unwrap();
            assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml()).unwrap(), c, "{name} toml");
            assert_eq!(ExperimentConfig::from_json_str(&c.to_json()).unwrap(), c, "{name} json");
        }
        assert!(matches!(preset("nope"), Err(ConfigError::UnknownPreset(_))));
    }

    #[test]
    fn config_errors_name_the_field() {
        let mut c = preset("hemisphere").unwrap();
        c.grid.h.clear();
        assert_eq!(c.validate().unwrap_err().to_string(), "grid.h: empty h list");

        let mut c = preset("hemisphere").unwrap();
        c.grid.h = vec![0.0625, 0.125];
        assert!(c.validate().unwrap_err().to_string().starts_with("grid.h[1]"));

        let mut c = preset("drift_existence").unwrap();
        c.problem.drift_b = 1.0;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.starts_with("problem.drift_b: bR ≥ k"), "{msg}");

        let mut c = preset("hemisphere").unwrap();
        c.problem.gamma = -1.0;
        assert!(c.validate().unwrap_err().to_string().starts_with("problem.gamma"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let c = preset("hemisphere").unwrap();
        let text = c.to_toml().replace("seed = 0", "seed = 0\nsede = 1");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn exact_solution_availability() {
        assert!(exact_solution(&preset("hemisphere").unwrap().problem).is_ok());
        let mut spec = preset("hemisphere").unwrap().problem;
        spec.operator = OperatorSpec::LowerPartialSum { k: 1 };
        assert!(matches!(exact_solution(&spec), Err(ExperimentError::NoExactSolution(_))));
        let two = preset("two_ball_barriers").unwrap().problem;
        assert!(exact_solution(&two).is_err());
    }
}
