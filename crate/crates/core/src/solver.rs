//! Discrete Perron iteration: nonlinear Gauss–Seidel from a discrete
//! supersolution down to the fixed point, bracketed by a discrete
//! subsolution; and a ceiling-free variant that probes for blow-up.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barriers::{self, BarrierError};
use crate::grid::Grid;
use crate::problem::{ProblemSpec, RegimeError};
use crate::scheme::{LocalStencil, Scheme, SchemeError};

/// Smallest value the per-node root finder will return.
pub const VALUE_FLOOR: f64 = 1e-14;
const ROOT_ITERATIONS: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Regime(#[from] RegimeError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error("barrier fields invalid: {0}")]
    BadBarriers(String),
    #[error("barrier calibration failed: {0}")]
    Calibration(String),
    #[error("node {node} left the bracket: value {value}, bracket [{lower}, {upper}]")]
    BracketViolation {
        node: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("no convergence after {sweeps} sweeps (last update {last_update:e})")]
    NoConvergence { sweeps: usize, last_update: f64 },
    #[error("{found} nodes in the band, need at least {needed}")]
    InsufficientNodes { found: usize, needed: usize },
    #[error("band ({0}, {1}) must satisfy 0 < lo < hi ≤ R/2")]
    BadBand(f64, f64),
}

/// A nodal field with iteration metadata.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridField {
    pub values: Vec<f64>,
    pub sweeps: usize,
    pub last_update: f64,
    /// Every sweep was nonincreasing (up to `tol`) at every node.
    pub monotone: bool,
}

impl GridField {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            sweeps: 0,
            last_update: 0.0,
            monotone: true,
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Root of the strictly decreasing `g` in `[lo, hi]`, widening the bracket
/// when needed (never below [`VALUE_FLOOR`]). Log-space bisection until
/// `hi/lo < 2`, then Illinois.
fn node_root<G: FnMut(f64) -> f64>(mut g: G, lo: f64, hi: f64) -> f64 {
    let mut lo = lo.max(VALUE_FLOOR);
    let mut hi = hi.max(lo);
    let mut glo = g(lo);
    while glo < 0.0 && lo > VALUE_FLOOR {
        hi = lo;
        lo = (lo * 0.25).max(VALUE_FLOOR);
        glo = g(lo);
    }
    if glo <= 0.0 {
        return lo;
    }
    let mut ghi = g(hi);
    while ghi > 0.0 && hi < 1e300 {
        lo = hi;
        glo = ghi;
        hi *= 2.0;
        ghi = g(hi);
    }
    if ghi >= 0.0 {
        return hi;
    }
    let mut side = 0i8;
    let mut m = hi;
    for _ in 0..ROOT_ITERATIONS {
        if hi > 2.0 * lo {
            m = (lo * hi).sqrt();
        } else {
            m = (lo * ghi - hi * glo) / (ghi - glo);
            if !(m > lo && m < hi) {
                m = 0.5 * (lo + hi);
            }
        }
        let gm = g(m);
        if gm > 0.0 {
            lo = m;
            glo = gm;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else if gm < 0.0 {
            hi = m;
            ghi = gm;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        } else {
            return m;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    m
}

/// Discrete sub- and supersolution for the problem on `grid`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Barriers {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Factor applied to the continuum subsolution `ε d^t`.
    pub lower_scale: f64,
    /// Factor applied to the continuum supersolution `inf_y u_y`.
    pub upper_scale: f64,
    pub eps: f64,
}

/// Samples the continuum barriers at the nodes and rescales them until the
/// discrete residual has the right sign at every node. Scaling works because
/// `F_h` and `H_h` are positively homogeneous while `s^{−γ}` is not:
/// `λū` becomes a supersolution for large `λ` wherever `F_h + H_h < 0`, and
/// `μu̲` a subsolution for small `μ`.
pub fn calibrated_barriers(grid: &Grid, spec: &ProblemSpec, scheme: &Scheme) -> Result<Barriers, SolverError> {
    spec.existence_regime()?;
    let sub = barriers::subsolution_field(spec, spec.smoothing())?;
    let sup = barriers::inf_ball_supersolution(spec)?;
    let base_lower: Vec<f64> = grid.nodes.iter().map(|n| sub.value(&n.x)).collect();
    let base_upper: Vec<f64> = grid.nodes.iter().map(|n| sup.value(&n.x)).collect();
    if let Some(i) = base_lower.iter().position(|v| !(*v > 0.0)) {
        return Err(SolverError::Calibration(format!("subsolution vanishes at node {i}")));
    }

    let mut mu = 1.0;
    let mut lower = base_lower.clone();
    for _ in 0..200 {
        lower = base_lower.iter().map(|v| mu * v).collect();
        let res = scheme.residuals(grid, &lower)?;
        let ok = grid
            .nodes
            .iter()
            .zip(&res)
            .all(|(n, r)| n.frozen || *r >= 0.0);
        let below = lower.iter().zip(&base_upper).all(|(l, u)| l <= u);
        if ok && below {
            break;
        }
        mu *= 0.5;
    }

    let pin = |field: &mut Vec<f64>, lower: &[f64]| {
        for (i, n) in grid.nodes.iter().enumerate() {
            if n.frozen {
                field[i] = lower[i];
            }
        }
    };
    let mut lambda = 1.0;
    let mut upper = Vec::new();
    let mut done = false;
    for _ in 0..200 {
        upper = base_upper.iter().map(|v| lambda * v).collect();
        pin(&mut upper, &lower);
        let res = scheme.residuals(grid, &upper)?;
        if grid.nodes.iter().zip(&res).all(|(n, r)| n.frozen || *r <= 0.0) {
            done = true;
            break;
        }
        lambda *= 1.25;
    }
    if !done {
        return Err(SolverError::Calibration(
            "no multiple of the supersolution is a discrete supersolution".into(),
        ));
    }
    Ok(Barriers {
        lower,
        upper,
        lower_scale: mu,
        upper_scale: lambda,
        eps: sub.eps,
    })
}

/// Monotone Gauss–Seidel from `upper`, sweeping alternately in lexicographic
/// and reverse order, until the sup-norm update drops below `tol`.
pub fn solve(
    grid: &Grid,
    spec: &ProblemSpec,
    lower: &GridField,
    upper: &GridField,
    tol: f64,
    max_sweeps: usize,
) -> Result<GridField, SolverError> {
    spec.existence_regime()?;
    let scheme = Scheme::new(grid, spec)?;
    solve_with(grid, &scheme, &lower.values, &upper.values, tol, max_sweeps)
}

/// [`solve`] with a precompiled scheme.
pub fn solve_with(
    grid: &Grid,
    scheme: &Scheme,
    lower: &[f64],
    upper: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<GridField, SolverError> {
    let n = grid.len();
    if lower.len() != n || upper.len() != n {
        return Err(SolverError::BadBarriers(format!(
            "fields have {} and {} values for {n} nodes",
            lower.len(),
            upper.len()
        )));
    }
    if let Some(i) = (0..n).find(|&i| !(lower[i] > 0.0) || lower[i] > upper[i]) {
        return Err(SolverError::BadBarriers(format!(
            "need 0 < lower ≤ upper, node {i} has [{}, {}]",
            lower[i], upper[i]
        )));
    }
    let mut u = upper.to_vec();
    for (i, node) in grid.nodes.iter().enumerate() {
        if node.frozen {
            u[i] = lower[i];
        }
    }
    let mut local = LocalStencil::default();
    let mut monotone = true;
    let mut last = f64::INFINITY;
    for sweep in 0..max_sweeps {
        let mut update: f64 = 0.0;
        for step in 0..n {
            let i = if sweep % 2 == 0 { step } else { n - 1 - step };
            if grid.nodes[i].frozen {
                continue;
            }
            scheme.local(grid, &u, i, &mut local);
            let new = node_root(|s| scheme.eval_local(&mut local, i, s), lower[i], u[i]);
            if new < lower[i] - 10.0 * tol || new > upper[i] + 10.0 * tol {
                return Err(SolverError::BracketViolation {
                    node: i,
                    value: new,
                    lower: lower[i],
                    upper: upper[i],
                });
            }
            if new > u[i] + tol {
                monotone = false;
            }
            update = update.max((new - u[i]).abs());
            u[i] = new;
        }
        last = update;
        if update < tol {
            return Ok(GridField {
                values: u,
                sweeps: sweep + 1,
                last_update: update,
                monotone,
            });
        }
    }
    Err(SolverError::NoConvergence {
        sweeps: max_sweeps,
        last_update: last,
    })
}

/// Calibrated barriers plus the solved field.
#[derive(Clone, Debug, Serialize)]
pub struct SolveOutcome {
    pub field: GridField,
    pub barriers: Barriers,
}

/// Builds the scheme, calibrates barriers and solves.
pub fn solve_problem(grid: &Grid, spec: &ProblemSpec, tol: f64, max_sweeps: usize) -> Result<SolveOutcome, SolverError> {
    spec.existence_regime()?;
    let scheme = Scheme::new(grid, spec)?;
    let barriers = calibrated_barriers(grid, spec, &scheme)?;
    let field = solve_with(grid, &scheme, &barriers.lower, &barriers.upper, tol, max_sweeps)?;
    Ok(SolveOutcome { field, barriers })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    BlowUp,
    Bounded,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::BlowUp => "blow_up",
            Verdict::Bounded => "bounded",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Analytic lower bound from a blow-up family, evaluated at the center.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyticFloor {
    pub family: String,
    pub parameter: f64,
    pub center_value: f64,
    /// Nodes where the final iterate lies below the profile.
    pub nodes_below: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub verdict: Verdict,
    pub threshold: f64,
    pub sweeps: usize,
    /// Minimum over the core `{δ ≥ 0.9 max δ}` at the last sweep.
    pub core_min: f64,
    /// Core-minimum change over the last 10% of sweeps.
    pub trend: f64,
    pub max_value: f64,
    pub last_update: f64,
    pub core_history: Vec<f64>,
    pub floor: Option<AnalyticFloor>,
    pub message: String,
}

fn analytic_floor(grid: &Grid, spec: &ProblemSpec, values: &[f64]) -> Option<AnalyticFloor> {
    let d = &grid.domain;
    let unit_ball = d.centers().len() == 1
        && d.radius() == 1.0
        && d.centers()[0].iter().all(|c| *c == 0.0);
    if !unit_ball {
        return None;
    }
    let h = grid.h;
    let (family, parameter, profile) = if spec.drift_sign > 0 && spec.drift_b * d.radius() >= spec.k as f64 {
        let p = barriers::drift_nonexistence_profile(spec.k, spec.gamma, spec.drift_b, h).ok()?;
        ("drift_nonexistence_profile", h, p)
    } else if spec.beta <= -1.0 && spec.drift_sign == 0 {
        let p = barriers::nonexistence_profile(spec.k, spec.gamma, 1.0 - h).ok()?;
        ("nonexistence_profile", 1.0 - h, p)
    } else {
        return None;
    };
    let nodes_below = grid
        .nodes
        .iter()
        .zip(values)
        .filter(|(n, v)| {
            let r = n.x.iter().map(|x| x * x).sum::<f64>().sqrt();
            **v < profile.value(r)
        })
        .count();
    Some(AnalyticFloor {
        family: family.into(),
        parameter,
        center_value: profile.value(0.0),
        nodes_below,
    })
}

/// Monotone iteration upward from a small discrete subsolution with no
/// ceiling. `blow_up` when the core minimum exceeds `threshold` while still
/// rising over the last 10% of sweeps; `bounded` when the iteration converges.
pub fn nonexistence_probe(
    grid: &Grid,
    spec: &ProblemSpec,
    threshold: f64,
    max_sweeps: usize,
) -> Result<ProbeReport, SolverError> {
    let scheme = Scheme::new(grid, spec)?;
    let n = grid.len();
    let mut u: Vec<f64> = grid.nodes.iter().map(|nd| 0.1 * nd.delta).collect();
    for _ in 0..200 {
        let res = scheme.residuals(grid, &u)?;
        if grid.nodes.iter().zip(&res).all(|(nd, r)| nd.frozen || *r >= 0.0) {
            break;
        }
        u.iter_mut().for_each(|v| *v *= 0.5);
    }
    let dmax = grid.max_delta();
    let core: Vec<usize> = (0..n).filter(|&i| grid.nodes[i].delta >= 0.9 * dmax).collect();
    let core_min = |u: &[f64]| core.iter().map(|&i| u[i]).fold(f64::INFINITY, f64::min);

    let tol = 1e-9;
    let mut local = LocalStencil::default();
    let mut history = Vec::new();
    let mut verdict = Verdict::Inconclusive;
    let mut last_update = f64::INFINITY;
    let mut sweeps = 0;
    for sweep in 0..max_sweeps {
        sweeps = sweep + 1;
        let mut update: f64 = 0.0;
        for step in 0..n {
            let i = if sweep % 2 == 0 { step } else { n - 1 - step };
            if grid.nodes[i].frozen {
                continue;
            }
            scheme.local(grid, &u, i, &mut local);
            let new = node_root(|s| scheme.eval_local(&mut local, i, s), u[i], 2.0 * u[i]);
            update = update.max((new - u[i]).abs());
            u[i] = new;
        }
        last_update = update;
        history.push(core_min(&u));
        let scale = u.iter().copied().fold(1.0, f64::max);
        if update < tol * scale {
            verdict = Verdict::Bounded;
            break;
        }
        if sweeps >= 10 {
            let back = (sweeps / 10).max(1);
            let trend = history[sweeps - 1] - history[sweeps - 1 - back];
            if history[sweeps - 1] > threshold && trend > 0.0 {
                verdict = Verdict::BlowUp;
                break;
            }
        }
    }
    let back = (sweeps / 10).max(1).min(sweeps.saturating_sub(1));
    let trend = if sweeps >= 2 {
        history[sweeps - 1] - history[sweeps - 1 - back]
    } else {
        0.0
    };
    let cm = history.last().copied().unwrap_or(f64::NAN);
    let message = match verdict {
        Verdict::BlowUp => format!(
            "blow_up evidence at M={threshold}, sweeps={sweeps}: core min {cm:.6} still rising ({trend:+.3e} over last 10%)"
        ),
        Verdict::Bounded => format!("bounded: converged after {sweeps} sweeps, core min {cm:.6}"),
        Verdict::Inconclusive => format!(
            "inconclusive after {sweeps} sweeps: core min {cm:.6}, trend {trend:+.3e}, M={threshold}"
        ),
    };
    let floor = analytic_floor(grid, spec, &u);
    Ok(ProbeReport {
        verdict,
        threshold,
        sweeps,
        core_min: cm,
        trend,
        max_value: u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        last_update,
        core_history: history,
        floor,
        message,
    })
}

/// Least-squares fit of `ln u = ln a + σ ln δ` over nodes with `δ` in the band.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub constant: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub nodes: usize,
}

pub fn fit_boundary_exponent(grid: &Grid, values: &[f64], band: (f64, f64)) -> Result<ExponentFit, SolverError> {
    let (lo, hi) = band;
    if !(lo > 0.0 && lo < hi && hi <= grid.domain.radius() / 2.0) {
        return Err(SolverError::BadBand(lo, hi));
    }
    let pts: Vec<(f64, f64)> = grid
        .nodes
        .iter()
        .zip(values)
        .filter(|(n, v)| n.delta >= lo && n.delta <= hi && **v > 0.0)
        .map(|(n, v)| (n.delta.ln(), v.ln()))
        .collect();
    if pts.len() < 20 {
        return Err(SolverError::InsufficientNodes {
            found: pts.len(),
            needed: 20,
        });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(ExponentFit {
        exponent: slope,
        constant: intercept.exp(),
        residual: rms,
        nodes: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_of_power() {
        // 1 − s: root 1; and p s^{-1} − 4 s: root 0.5
        let r = node_root(|s| 1.0 - s, 1e-3, 10.0);
        assert!((r - 1.0).abs() < 1e-12);
        let r = node_root(|s| 1.0 / s - 4.0 * s, 1.0, 2.0);
        assert!((r - 0.5).abs() < 1e-12);
    }
}
