//! Functions that are continuous between breakpoints and carry one-sided
//! limits at them, sampled on a per-segment uniform grid.
//!
//! Each segment `[α_l, α_{l+1}]` holds `m + 1` nodes. Node 0 of a segment
//! stores the right limit at `α_l`, node `m` the left limit at `α_{l+1}`. A
//! two-sided query at a breakpoint returns the left limit.

use serde::Serialize;
use std::io::{self, Write};
use std::sync::Arc;

/// Default number of panels per segment.
pub const DEFAULT_PANELS: usize = 256;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PiecewiseError {
    #[error("time {t} is outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("functions live on different grids")]
    GridMismatch,
    #[error("partition must start at 0, be strictly increasing and have at least two points")]
    BadPartition,
    #[error("need at least one panel per segment")]
    NoPanels,
    #[error("non-finite sample value at t = {0}")]
    NonFinite(f64),
}

/// Location of a time inside a [`Grid`]: a segment plus either a node index
/// or an interior time strictly between two nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub seg: usize,
    pub t: f64,
    pub node: Option<usize>,
}

/// Partition `0 = α_0 < … < α_M = T` with `panels` uniform panels per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    partition: Vec<f64>,
    panels: usize,
}

impl Grid {
    pub fn new(partition: Vec<f64>, panels: usize) -> Result<Self, PiecewiseError> {
        if panels == 0 {
            return Err(PiecewiseError::NoPanels);
        }
        if partition.len() < 2
            || partition[0] != 0.0
            || partition.windows(2).any(|w| !(w[1] > w[0]))
            || !partition.iter().all(|v| v.is_finite())
        {
            return Err(PiecewiseError::BadPartition);
        }
        Ok(Grid { partition, panels })
    }

    /// Single segment `[0, T]`.
    pub fn uniform(horizon: f64, panels: usize) -> Result<Self, PiecewiseError> {
        Grid::new(vec![0.0, horizon], panels)
    }

    pub fn partition(&self) -> &[f64] {
        &self.partition
    }

    pub fn horizon(&self) -> f64 {
        *self.partition.last().unwrap()
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn segments(&self) -> usize {
        self.partition.len() - 1
    }

    pub fn nodes_per_segment(&self) -> usize {
        self.panels + 1
    }

    pub fn len(&self) -> usize {
        self.segments() * self.nodes_per_segment()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, seg: usize, node: usize) -> usize {
        seg * (self.panels + 1) + node
    }

    #[inline]
    pub fn node_time(&self, seg: usize, node: usize) -> f64 {
        let a = self.partition[seg];
        let b = self.partition[seg + 1];
        if node == self.panels {
            b
        } else {
            a + (b - a) * (node as f64 / self.panels as f64)
        }
    }

    pub fn panel_width(&self, seg: usize) -> f64 {
        (self.partition[seg + 1] - self.partition[seg]) / self.panels as f64
    }

    pub fn node_point(&self, seg: usize, node: usize) -> Point {
        Point {
            seg,
            t: self.node_time(seg, node),
            node: Some(node),
        }
    }

    /// All node points in storage order.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.segments()).flat_map(move |s| (0..=self.panels).map(move |k| self.node_point(s, k)))
    }

    fn check(&self, t: f64) -> Result<f64, PiecewiseError> {
        let horizon = self.horizon();
        let slack = 1e-12 * horizon.max(1.0);
        if !(t >= -slack && t <= horizon + slack) {
            return Err(PiecewiseError::OutOfRange { t, horizon });
        }
        Ok(t.clamp(0.0, horizon))
    }

    fn point_in(&self, seg: usize, t: f64) -> Point {
        let a = self.partition[seg];
        let b = self.partition[seg + 1];
        if t <= a {
            return self.node_point(seg, 0);
        }
        if t >= b {
            return self.node_point(seg, self.panels);
        }
        let mut k = (((t - a) / (b - a)) * self.panels as f64).floor() as usize;
        k = k.min(self.panels - 1);
        while k > 0 && self.node_time(seg, k) > t {
            k -= 1;
        }
        while k < self.panels && self.node_time(seg, k + 1) <= t {
            k += 1;
        }
        if self.node_time(seg, k) == t {
            self.node_point(seg, k)
        } else {
            Point { seg, t, node: None }
        }
    }

    /// Locate `t` with the left-limit convention at breakpoints.
    pub fn locate(&self, t: f64) -> Result<Point, PiecewiseError> {
        let t = self.check(t)?;
        // first l with t <= α_{l+1}
        let seg = self.partition[1..]
            .partition_point(|&b| b < t)
            .min(self.segments() - 1);
        Ok(self.point_in(seg, t))
    }

    /// Locate `t` with the right-limit convention at breakpoints. At `T`
    /// there is no right limit and the left one is returned.
    pub fn locate_right(&self, t: f64) -> Result<Point, PiecewiseError> {
        let t = self.check(t)?;
        // last l with α_l <= t
        let seg = self.partition[1..]
            .partition_point(|&b| b <= t)
            .min(self.segments() - 1);
        Ok(self.point_in(seg, t))
    }

    /// Index of the interior breakpoint equal to `t` (within `tol`), if any.
    pub fn breakpoint_index(&self, t: f64, tol: f64) -> Option<usize> {
        (1..self.segments()).find(|&l| (self.partition[l] - t).abs() <= tol)
    }
}

/// A sampled element of the piecewise-continuous function space.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFn {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PiecewiseFn {
    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, PiecewiseError> {
        if values.len() != grid.len() {
            return Err(PiecewiseError::LengthMismatch {
                left: values.len(),
                right: grid.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let seg = i / grid.nodes_per_segment();
            return Err(PiecewiseError::NonFinite(grid.node_time(seg, i % grid.nodes_per_segment())));
        }
        Ok(PiecewiseFn { grid, values })
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.len();
        PiecewiseFn {
            grid,
            values: vec![c; n],
        }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Sample `f` at every node point.
    pub fn sample<E>(grid: Arc<Grid>, mut f: impl FnMut(Point) -> Result<f64, E>) -> Result<Self, E> {
        let values = grid.points().map(&mut f).collect::<Result<Vec<_>, _>>()?;
        Ok(PiecewiseFn { grid, values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at_node(&self, seg: usize, node: usize) -> f64 {
        self.values[self.grid.index(seg, node)]
    }

    /// Value at a located point: stored node value, or linear interpolation
    /// inside the point's segment.
    #[inline]
    pub fn value_at(&self, p: &Point) -> f64 {
        if let Some(k) = p.node {
            return self.at_node(p.seg, k);
        }
        let a = self.grid.partition[p.seg];
        let h = self.grid.panel_width(p.seg);
        let x = (p.t - a) / h;
        let k = (x.floor() as usize).min(self.grid.panels - 1);
        let w = x - k as f64;
        let v0 = self.at_node(p.seg, k);
        let v1 = self.at_node(p.seg, k + 1);
        v0 + w * (v1 - v0)
    }

    /// Two-sided evaluation; at a breakpoint this is the left limit.
    pub fn eval(&self, t: f64) -> Result<f64, PiecewiseError> {
        Ok(self.value_at(&self.grid.locate(t)?))
    }

    pub fn eval_left(&self, t: f64) -> Result<f64, PiecewiseError> {
        self.eval(t)
    }

    pub fn eval_right(&self, t: f64) -> Result<f64, PiecewiseError> {
        Ok(self.value_at(&self.grid.locate_right(t)?))
    }

    pub fn same_grid(&self, other: &PiecewiseFn) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn sub(&self, other: &PiecewiseFn) -> Result<PiecewiseFn, PiecewiseError> {
        self.zip(other, |a, b| a - b)
    }

    pub fn add(&self, other: &PiecewiseFn) -> Result<PiecewiseFn, PiecewiseError> {
        self.zip(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> PiecewiseFn {
        PiecewiseFn {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    fn zip(&self, other: &PiecewiseFn, f: impl Fn(f64, f64) -> f64) -> Result<PiecewiseFn, PiecewiseError> {
        if !self.same_grid(other) {
            return Err(PiecewiseError::GridMismatch);
        }
        Ok(PiecewiseFn {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    /// Unweighted maximum of |value| over stored nodes.
    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Rows `(t, left, right)` for every distinct node time.
    pub fn rows(&self) -> Vec<SampleRow> {
        let g = &self.grid;
        let m = g.panels;
        let mut rows = Vec::with_capacity(g.segments() * m + 1);
        for seg in 0..g.segments() {
            let first = if seg == 0 { 0 } else { 1 };
            for k in first..m {
                let v = self.at_node(seg, k);
                rows.push(SampleRow {
                    t: g.node_time(seg, k),
                    left: v,
                    right: v,
                });
            }
            let left = self.at_node(seg, m);
            let right = if seg + 1 < g.segments() {
                self.at_node(seg + 1, 0)
            } else {
                left
            };
            rows.push(SampleRow {
                t: g.node_time(seg, m),
                left,
                right,
            });
        }
        // t = 0 has no left limit
        if let Some(r) = rows.first_mut() {
            r.left = r.right;
        }
        rows
    }

    /// CSV with header `t,x_left,x_right`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x_left,x_right")?;
        for r in self.rows() {
            writeln!(w, "{:.17e},{:.17e},{:.17e}", r.t, r.left, r.right)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleRow {
    pub t: f64,
    pub left: f64,
    pub right: f64,
}

/// Values aligned with the fixed impulse times: `η_i = x(τ_i^-)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DiscreteVector(pub Vec<f64>);

impl DiscreteVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sub(&self, other: &DiscreteVector) -> Result<DiscreteVector, PiecewiseError> {
        if self.len() != other.len() {
            return Err(PiecewiseError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(DiscreteVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }
}

/// `max over nodes of e^{-μt} |ξ(t)|`, both one-sided values included.
pub fn norm_c(xi: &PiecewiseFn, mu: f64) -> f64 {
    let g = &xi.grid;
    let mut best = 0.0f64;
    for seg in 0..g.segments() {
        for k in 0..=g.panels {
            let t = g.node_time(seg, k);
            best = best.max((-mu * t).exp() * xi.at_node(seg, k).abs());
        }
    }
    best
}

/// `max_i e^{-μ τ_i} |η_i|`; zero for an empty vector.
pub fn norm_d(eta: &DiscreteVector, tau: &[f64], mu: f64) -> Result<f64, PiecewiseError> {
    if eta.len() != tau.len() {
        return Err(PiecewiseError::LengthMismatch {
            left: eta.len(),
            right: tau.len(),
        });
    }
    Ok(eta
        .0
        .iter()
        .zip(tau)
        .fold(0.0, |m, (v, t)| m.max((-mu * t).exp() * v.abs())))
}

/// `max_i max over nodes of e^{-μ σ_i(t)} |β_i(t)|`, with `sigma_nodes[i]`
/// holding `σ_i` at every node of the β grid (storage order).
pub fn norm_m_sampled(beta: &[PiecewiseFn], sigma_nodes: &[Vec<f64>], mu: f64) -> Result<f64, PiecewiseError> {
    if beta.len() != sigma_nodes.len() {
        return Err(PiecewiseError::LengthMismatch {
            left: beta.len(),
            right: sigma_nodes.len(),
        });
    }
    let mut best = 0.0f64;
    for (b, s) in beta.iter().zip(sigma_nodes) {
        if b.values.len() != s.len() {
            return Err(PiecewiseError::LengthMismatch {
                left: b.values.len(),
                right: s.len(),
            });
        }
        for (v, sv) in b.values.iter().zip(s) {
            best = best.max((-mu * sv).exp() * v.abs());
        }
    }
    Ok(best)
}
