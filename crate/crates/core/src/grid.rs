//! Cartesian grids clipped to a ball intersection, with wide-stencil axes and
//! cut-cell arm lengths.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{boundary_ray_fraction, delta, BallDomain};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("no lattice point lies inside the domain at h = {0}")]
    EmptyGrid(f64),
    #[error("spacing h = {h} must lie in (0, R/4 = {limit}]")]
    BadSpacing { h: f64, limit: f64 },
    #[error("stencil width W = {0} must be 1, 2 or 3")]
    BadWidth(usize),
}

/// A lattice direction `v` (first nonzero entry positive) used in both signs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub lattice: Vec<i64>,
    pub unit: Vec<f64>,
    /// `|v|` in lattice units.
    pub norm: f64,
}

/// One side of a node along an axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Arm {
    /// Interior neighbor, or `None` when the arm ends on ∂Ω (value 0).
    pub neighbor: Option<usize>,
    /// Physical arm length `θ h |v|`.
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Node {
    pub index: Vec<i64>,
    pub x: Vec<f64>,
    pub delta: f64,
    /// `arms[a] = [forward, backward]` along axis `a`.
    pub arms: Vec<[Arm; 2]>,
    /// Every arm ends on the boundary; the value is pinned to the subsolution.
    pub frozen: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Grid {
    pub h: f64,
    pub width: usize,
    #[serde(skip)]
    pub domain: BallDomain,
    pub axes: Vec<Axis>,
    pub nodes: Vec<Node>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Primitive integer vectors with max-norm ≤ `w`, one per ± pair, ordered by
/// length then lexicographically.
pub fn lattice_axes(dim: usize, w: usize) -> Vec<Axis> {
    let w = w as i64;
    let mut out: Vec<Vec<i64>> = Vec::new();
    let side = (2 * w + 1) as usize;
    let total = side.pow(dim as u32);
    for code in 0..total {
        let mut c = code;
        let mut v = vec![0i64; dim];
        for slot in v.iter_mut() {
            *slot = (c % side) as i64 - w;
            c /= side;
        }
        let first = v.iter().find(|&&x| x != 0);
        match first {
            Some(&f) if f > 0 => {}
            _ => continue,
        }
        if v.iter().fold(0, |g, &x| gcd(g, x)) != 1 {
            continue;
        }
        out.push(v);
    }
    out.sort_by(|a, b| {
        let na: i64 = a.iter().map(|x| x * x).sum();
        let nb: i64 = b.iter().map(|x| x * x).sum();
        na.cmp(&nb).then_with(|| b.cmp(a))
    });
    out.into_iter()
        .map(|lattice| {
            let norm = (lattice.iter().map(|x| (x * x) as f64).sum::<f64>()).sqrt();
            let unit = lattice.iter().map(|&x| x as f64 / norm).collect();
            Axis { lattice, unit, norm }
        })
        .collect()
}

/// Builds the grid `{h·i : i ∈ ℤᴺ, δ(h·i) > 0}` with stencil width `w`.
pub fn build_grid(domain: &BallDomain, h: f64, width: usize) -> Result<Grid, GridError> {
    let limit = domain.radius() / 4.0;
    if !(h > 0.0 && h <= limit) {
        return Err(GridError::BadSpacing { h, limit });
    }
    if !(1..=3).contains(&width) {
        return Err(GridError::BadWidth(width));
    }
    let n = domain.dimension();
    let (lo, hi) = domain.bounding_box();
    let lo_i: Vec<i64> = lo.iter().map(|v| (v / h).floor() as i64).collect();
    let hi_i: Vec<i64> = hi.iter().map(|v| (v / h).ceil() as i64).collect();

    let mut nodes = Vec::new();
    let mut lookup: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut idx = lo_i.clone();
    'outer: loop {
        let x: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
        let d = delta(domain, &x);
        if d > 0.0 {
            lookup.insert(idx.clone(), nodes.len());
            nodes.push(Node {
                index: idx.clone(),
                x,
                delta: d,
                arms: Vec::new(),
                frozen: false,
            });
        }
        for j in 0..n {
            idx[j] += 1;
            if idx[j] <= hi_i[j] {
                continue 'outer;
            }
            idx[j] = lo_i[j];
        }
        break;
    }
    if nodes.is_empty() {
        return Err(GridError::EmptyGrid(h));
    }

    let axes = lattice_axes(n, width);
    for node in nodes.iter_mut() {
        let mut arms = Vec::with_capacity(axes.len());
        for axis in &axes {
            let full = h * axis.norm;
            let arm = |sign: i64| {
                let nb: Vec<i64> = node
                    .index
                    .iter()
                    .zip(&axis.lattice)
                    .map(|(i, v)| i + sign * v)
                    .collect();
                match lookup.get(&nb) {
                    Some(&j) => Arm {
                        neighbor: Some(j),
                        length: full,
                    },
                    None => {
                        let dir: Vec<f64> = axis.unit.iter().map(|u| sign as f64 * u).collect();
                        let theta = boundary_ray_fraction(domain, &node.x, &dir, full);
                        Arm {
                            neighbor: None,
                            length: theta * full,
                        }
                    }
                }
            };
            arms.push([arm(1), arm(-1)]);
        }
        node.frozen = arms
            .iter()
            .all(|a| a[0].neighbor.is_none() && a[1].neighbor.is_none());
        node.arms = arms;
    }
    Ok(Grid {
        h,
        width,
        domain: domain.clone(),
        axes,
        nodes,
    })
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    fn orthogonal(&self, a: usize, b: usize) -> bool {
        self.axes[a]
            .lattice
            .iter()
            .zip(&self.axes[b].lattice)
            .map(|(x, y)| x * y)
            .sum::<i64>()
            == 0
    }

    /// All mutually orthogonal `k`-subsets of axes, in lexicographic order.
    pub fn all_frames(&self, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(k);
        self.extend_frames(k, 0, &mut cur, &mut out, usize::MAX);
        out
    }

    /// Frames used by the partial-sum operators: all of them in 2D or for
    /// `k = 1`, the first 32 otherwise.
    pub fn frames(&self, k: usize) -> Vec<Vec<usize>> {
        let cap = if self.dimension() >= 3 && k >= 2 { 32 } else { usize::MAX };
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(k);
        self.extend_frames(k, 0, &mut cur, &mut out, cap);
        out
    }

    fn extend_frames(
        &self,
        k: usize,
        start: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        cap: usize,
    ) {
        if out.len() >= cap {
            return;
        }
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for a in start..self.axes.len() {
            if cur.iter().all(|&b| self.orthogonal(a, b)) {
                cur.push(a);
                self.extend_frames(k, a + 1, cur, out, cap);
                cur.pop();
                if out.len() >= cap {
                    return;
                }
            }
        }
    }

    /// Axes lying in the span of the given frame.
    pub fn axes_in_span(&self, frame: &[usize]) -> Vec<usize> {
        (0..self.axes.len())
            .filter(|&a| {
                let v = &self.axes[a].unit;
                let mut resid = v.clone();
                for &f in frame {
                    let e = &self.axes[f].unit;
                    let dot: f64 = v.iter().zip(e).map(|(x, y)| x * y).sum();
                    resid.iter_mut().zip(e).for_each(|(r, y)| *r -= dot * y);
                }
                resid.iter().map(|r| r * r).sum::<f64>() < 1e-18
            })
            .collect()
    }

    /// Index of the node closest to `x`.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let d: f64 = n.x.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (i, d)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .unwrap()
    }

    pub fn max_delta(&self) -> f64 {
        self.nodes.iter().map(|n| n.delta).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_2d() {
        let a = lattice_axes(2, 1);
        let lat: Vec<Vec<i64>> = a.iter().map(|x| x.lattice.clone()).collect();
        assert_eq!(lat, vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, -1]]);
        assert_eq!(lattice_axes(2, 2).len(), 8);
        assert_eq!(lattice_axes(3, 1).len(), 13);
    }

    #[test]
    fn disk_node_count() {
        let disk = BallDomain::ball(1.0, 2).unwrap();
        let g = build_grid(&disk, 0.25, 1).unwrap();
        let mut count = 0;
        for i in -4i32..=4 {
            for j in -4i32..=4 {
                if i * i + j * j < 16 {
                    count += 1;
                }
            }
        }
        assert_eq!(g.len(), count);
        assert_eq!(count, 45);
    }

    #[test]
    fn cut_arm_at_boundary() {
        let disk = BallDomain::ball(1.0, 2).unwrap();
        let g = build_grid(&disk, 0.25, 1).unwrap();
        let i = g.nearest_node(&[0.75, 0.0]);
        let arm = g.nodes[i].arms[0][0];
        assert!(arm.neighbor.is_none());
        assert!((arm.length - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let disk = BallDomain::ball(1.0, 2).unwrap();
        assert!(build_grid(&disk, 0.3, 1).is_err());
        assert!(build_grid(&disk, 0.1, 4).is_err());
    }

    #[test]
    fn frames_2d() {
        let disk = BallDomain::ball(1.0, 2).unwrap();
        let g = build_grid(&disk, 0.125, 2).unwrap();
        assert_eq!(g.frames(1).len(), 8);
        assert_eq!(g.frames(2).len(), 4);
        assert_eq!(g.axes_in_span(&[0, 1]).len(), 8);
        assert_eq!(g.axes_in_span(&[0]), vec![0]);
    }
}
