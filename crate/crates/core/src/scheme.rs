//! Monotone wide-stencil discretization of `F(D²u) + H(Du) + p u^{−γ}`.
//!
//! Along every axis the Shortley–Weller second difference
//! `Δₐu = c₊u₊ + c₋u₋ − c₀u` is exact on quadratics and carries boundary values 0
//! on cut arms. Operators are assembled from these by max/min over orthogonal
//! axis frames, so the scheme is nondecreasing in neighbor values and
//! nonincreasing in the center value.

use thiserror::Error;

use crate::grid::Grid;
use crate::operators::OperatorSpec;
use crate::problem::ProblemSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("operator `{0}` has no grid discretization")]
    UnsupportedOnGrid(&'static str),
    #[error("no stencil frame spans the range of the projection")]
    NoStencilFrame,
    #[error("field value {value} at node {node} is not positive")]
    NonpositiveValue { node: usize, value: f64 },
    #[error("field has {got} values, grid has {expected} nodes")]
    FieldLength { got: usize, expected: usize },
}

/// An operator compiled against the axes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub enum GridOp {
    /// `max` (upper) or `min` over frames of `Σ_{a∈frame} Δₐ`.
    Frames { frames: Vec<Vec<usize>>, upper: bool },
    /// `Σⱼ λⱼ` with `λⱼ = min over j-dim frame spans of max over axes in the span`.
    Index { levels: Vec<Vec<Vec<usize>>> },
    /// `Σ_{a∈axes} Δₐ` for an axis frame spanning the range of a projection.
    Trace { axes: Vec<usize> },
    /// `max over outer of min over inner`.
    Bellman { members: Vec<Vec<GridOp>> },
    /// Infinity Laplacian: `(max s + min s)/ℓ` over slopes `s` on the outer ring.
    Ring { axes: Vec<usize>, length: f64 },
}

impl GridOp {
    pub fn compile(op: &OperatorSpec, grid: &Grid) -> Result<Self, SchemeError> {
        match op {
            OperatorSpec::LowerPartialSum { k } => Ok(GridOp::Frames {
                frames: grid.frames(*k),
                upper: false,
            }),
            OperatorSpec::UpperPartialSum { k } => Ok(GridOp::Frames {
                frames: grid.frames(*k),
                upper: true,
            }),
            OperatorSpec::IndexPartialSum { indices } => {
                let levels = indices
                    .iter()
                    .map(|&j| {
                        grid.frames(j)
                            .iter()
                            .map(|f| grid.axes_in_span(f))
                            .collect::<Vec<_>>()
                    })
                    .collect();
                Ok(GridOp::Index { levels })
            }
            OperatorSpec::ProjectionTrace { projection } => {
                let k = projection.trace().round() as usize;
                let in_range = |a: usize| {
                    let v = &grid.axes[a].unit;
                    let n = v.len();
                    (0..n).all(|i| {
                        let av: f64 = (0..n).map(|j| projection.get(i, j) * v[j]).sum();
                        (av - v[i]).abs() < 1e-9
                    })
                };
                grid.all_frames(k)
                    .into_iter()
                    .find(|f| f.iter().all(|&a| in_range(a)))
                    .map(|axes| GridOp::Trace { axes })
                    .ok_or(SchemeError::NoStencilFrame)
            }
            OperatorSpec::BellmanSupinf { members } => {
                let members = members
                    .iter()
                    .map(|inner| inner.iter().map(|m| GridOp::compile(m, grid)).collect())
                    .collect::<Result<Vec<Vec<GridOp>>, _>>()?;
                Ok(GridOp::Bellman { members })
            }
            OperatorSpec::InfinityLaplacianLower | OperatorSpec::InfinityLaplacianUpper => {
                let longest = grid.axes.iter().map(|a| a.norm).fold(0.0, f64::max);
                let axes: Vec<usize> = (0..grid.axes.len())
                    .filter(|&a| (grid.axes[a].norm - longest).abs() < 1e-12)
                    .collect();
                Ok(GridOp::Ring {
                    axes,
                    length: grid.h * longest,
                })
            }
            OperatorSpec::MinimalSurface => Err(SchemeError::UnsupportedOnGrid("minimal_surface")),
        }
    }

    fn uses_ring(&self) -> bool {
        match self {
            GridOp::Ring { .. } => true,
            GridOp::Bellman { members } => members.iter().flatten().any(|m| m.uses_ring()),
            _ => false,
        }
    }

    /// Value from the axis second differences `d` and the arm slopes
    /// `slopes[a] = [forward, backward]`.
    pub fn apply(&self, d: &[f64], slopes: &[[f64; 2]]) -> f64 {
        match self {
            GridOp::Frames { frames, upper } => {
                let sums = frames.iter().map(|f| f.iter().map(|&a| d[a]).sum::<f64>());
                if *upper {
                    sums.fold(f64::NEG_INFINITY, f64::max)
                } else {
                    sums.fold(f64::INFINITY, f64::min)
                }
            }
            GridOp::Index { levels } => levels
                .iter()
                .map(|spans| {
                    spans
                        .iter()
                        .map(|s| s.iter().map(|&a| d[a]).fold(f64::NEG_INFINITY, f64::max))
                        .fold(f64::INFINITY, f64::min)
                })
                .sum(),
            GridOp::Trace { axes } => axes.iter().map(|&a| d[a]).sum(),
            GridOp::Bellman { members } => members
                .iter()
                .map(|inner| {
                    inner
                        .iter()
                        .map(|m| m.apply(d, slopes))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::NEG_INFINITY, f64::max),
            GridOp::Ring { axes, length } => {
                let mut hi = f64::NEG_INFINITY;
                let mut lo = f64::INFINITY;
                for &a in axes {
                    for s in slopes[a] {
                        hi = hi.max(s);
                        lo = lo.min(s);
                    }
                }
                (hi + lo) / length
            }
        }
    }
}

/// Per-node constants with neighbor values frozen: `Δₐ(s) = Aₐ − c₀ₐ s` and
/// arm slopes `(u_nb − s)/ℓ`.
#[derive(Clone, Debug, Default)]
pub struct LocalStencil {
    pub a: Vec<f64>,
    pub c0: Vec<f64>,
    /// `[forward, backward]` neighbor values.
    pub nb: Vec<[f64; 2]>,
    /// `[forward, backward]` arm lengths.
    pub len: Vec<[f64; 2]>,
    d: Vec<f64>,
    slopes: Vec<[f64; 2]>,
}

/// A compiled scheme for one problem on one grid.
#[derive(Clone, Debug)]
pub struct Scheme {
    pub op: GridOp,
    pub gamma: f64,
    /// `p(xᵢ)` per node.
    pub weight: Vec<f64>,
    pub drift_b: f64,
    pub drift_sign: i8,
    needs_slopes: bool,
}

impl Scheme {
    pub fn new(grid: &Grid, spec: &ProblemSpec) -> Result<Self, SchemeError> {
        let op = GridOp::compile(&spec.operator, grid)?;
        let needs_slopes = op.uses_ring() || (spec.drift_sign != 0 && spec.drift_b > 0.0);
        Ok(Self {
            op,
            gamma: spec.gamma,
            weight: grid.nodes.iter().map(|n| spec.weight(n.delta)).collect(),
            drift_b: spec.drift_b,
            drift_sign: spec.drift_sign,
            needs_slopes,
        })
    }

    /// Returns a copy with every weight multiplied by `factor`.
    pub fn scale_weight(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.weight.iter_mut().for_each(|w| *w *= factor);
        s
    }

    /// Fills `local` with the frozen-neighbor constants of `node`.
    pub fn local(&self, grid: &Grid, field: &[f64], node: usize, local: &mut LocalStencil) {
        let arms = &grid.nodes[node].arms;
        let m = arms.len();
        local.a.clear();
        local.c0.clear();
        local.nb.clear();
        local.len.clear();
        for pair in arms {
            let up = pair[0].neighbor.map_or(0.0, |j| field[j]);
            let um = pair[1].neighbor.map_or(0.0, |j| field[j]);
            let (lp, lm) = (pair[0].length, pair[1].length);
            let cp = 2.0 / (lp * (lp + lm));
            let cm = 2.0 / (lm * (lp + lm));
            local.a.push(cp * up + cm * um);
            local.c0.push(2.0 / (lp * lm));
            local.nb.push([up, um]);
            local.len.push([lp, lm]);
        }
        local.d.resize(m, 0.0);
        local.slopes.resize(m, [0.0; 2]);
    }

    /// `F_h + H_h + p s^{−γ}` at `node` with center value `s`; strictly
    /// decreasing in `s`.
    pub fn eval_local(&self, local: &mut LocalStencil, node: usize, s: f64) -> f64 {
        let m = local.a.len();
        for i in 0..m {
            local.d[i] = local.a[i] - local.c0[i] * s;
        }
        if self.needs_slopes {
            for i in 0..m {
                local.slopes[i] = [
                    (local.nb[i][0] - s) / local.len[i][0],
                    (local.nb[i][1] - s) / local.len[i][1],
                ];
            }
        }
        let f = self.op.apply(&local.d, &local.slopes);
        let h = if self.drift_sign != 0 && self.drift_b > 0.0 {
            let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
            for sl in &local.slopes {
                for &v in sl {
                    hi = hi.max(v);
                    lo = lo.min(v);
                }
            }
            if self.drift_sign > 0 {
                self.drift_b * hi.max(0.0)
            } else {
                self.drift_b * lo.min(0.0)
            }
        } else {
            0.0
        };
        let w = self.weight[node];
        if w == 0.0 {
            f + h
        } else {
            f + h + w * s.powf(-self.gamma)
        }
    }

    /// Residual at `node` for the whole field.
    pub fn residual(&self, grid: &Grid, field: &[f64], node: usize) -> Result<f64, SchemeError> {
        if field.len() != grid.len() {
            return Err(SchemeError::FieldLength {
                got: field.len(),
                expected: grid.len(),
            });
        }
        let s = field[node];
        if !(s > 0.0) {
            return Err(SchemeError::NonpositiveValue { node, value: s });
        }
        let mut local = LocalStencil::default();
        self.local(grid, field, node, &mut local);
        Ok(self.eval_local(&mut local, node, s))
    }

    /// Residuals at every node.
    pub fn residuals(&self, grid: &Grid, field: &[f64]) -> Result<Vec<f64>, SchemeError> {
        let mut local = LocalStencil::default();
        (0..grid.len())
            .map(|i| {
                let s = field[i];
                if !(s > 0.0) {
                    return Err(SchemeError::NonpositiveValue { node: i, value: s });
                }
                self.local(grid, field, i, &mut local);
                Ok(self.eval_local(&mut local, i, s))
            })
            .collect()
    }
}

/// `F_h + H_h + p u^{−γ}` at one node.
pub fn discrete_operator(grid: &Grid, spec: &ProblemSpec, field: &[f64], node: usize) -> Result<f64, SchemeError> {
    Scheme::new(grid, spec)?.residual(grid, field, node)
}

/// The operator part `F_h` alone (no drift, no source) at one node.
pub fn discrete_second_order(grid: &Grid, op: &OperatorSpec, field: &[f64], node: usize) -> Result<f64, SchemeError> {
    let gop = GridOp::compile(op, grid)?;
    let sch = Scheme {
        needs_slopes: gop.uses_ring(),
        op: gop,
        gamma: 1.0,
        weight: vec![0.0; grid.len()],
        drift_b: 0.0,
        drift_sign: 0,
    };
    let mut local = LocalStencil::default();
    sch.local(grid, field, node, &mut local);
    Ok(sch.eval_local(&mut local, node, field[node]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BallDomain;
    use crate::grid::build_grid;

    fn disk_grid(h: f64, w: usize) -> Grid {
        build_grid(&BallDomain::ball(1.0, 2).unwrap(), h, w).unwrap()
    }

    #[test]
    fn quadratic_exactness() {
        let g = disk_grid(0.125, 2);
        let field: Vec<f64> = g.nodes.iter().map(|n| n.x[0].powi(2) - n.x[1].powi(2)).collect();
        let op = OperatorSpec::UpperPartialSum { k: 1 };
        let c = g.nearest_node(&[0.0, 0.0]);
        let v = discrete_second_order(&g, &op, &field, c).unwrap();
        assert!((v - 2.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn constant_field() {
        let g = disk_grid(0.125, 2);
        let mut spec = crate::problem::ProblemSpec::upper_constant(g.domain.clone(), 1, 1.0, 1.0);
        spec.weight_kind = crate::problem::WeightKind::Constant;
        let field = vec![2.0; g.len()];
        let c = g.nearest_node(&[0.0, 0.0]);
        let v = discrete_operator(&g, &spec, &field, c).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_rejected() {
        let g = disk_grid(0.25, 1);
        let spec = crate::problem::ProblemSpec::upper_constant(g.domain.clone(), 1, 1.0, 1.0);
        let field = vec![0.0; g.len()];
        assert!(matches!(
            discrete_operator(&g, &spec, &field, 0),
            Err(SchemeError::NonpositiveValue { .. })
        ));
    }

    #[test]
    fn minimal_surface_unsupported() {
        let g = disk_grid(0.25, 1);
        assert!(matches!(
            GridOp::compile(&OperatorSpec::MinimalSurface, &g),
            Err(SchemeError::UnsupportedOnGrid(_))
        ));
    }
}
