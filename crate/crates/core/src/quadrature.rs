//! Composite trapezoid quadrature on a segmented grid.
//!
//! Integrals run from 0 to a located [`Point`]. Every segment is integrated
//! over its own nodes, so the one-sided values stored at segment ends are the
//! ones used; an upper limit inside a segment ends with a partial panel whose
//! right value is the integrand at the point itself. Panels are accumulated in
//! ascending time order, which keeps results bitwise reproducible and makes
//! [`Cumulative`] agree exactly with [`integrate`].

use crate::piecewise::{Grid, Point};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("non-finite integrand value at s = {0}")]
pub struct NonFinite(pub f64);

#[inline]
fn checked<E: From<NonFinite>>(v: f64, s: f64) -> Result<f64, E> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NonFinite(s).into())
    }
}

/// `(k_last, partial)`: the last whole node at or before `p` in its segment,
/// and whether a partial panel follows it.
#[inline]
fn last_node(grid: &Grid, p: &Point) -> (usize, bool) {
    match p.node {
        Some(k) => (k, false),
        None => {
            let a = grid.partition()[p.seg];
            let h = grid.panel_width(p.seg);
            let mut k = (((p.t - a) / h).floor() as usize).min(grid.panels() - 1);
            while k > 0 && grid.node_time(p.seg, k) > p.t {
                k -= 1;
            }
            while k + 1 < grid.panels() && grid.node_time(p.seg, k + 1) <= p.t {
                k += 1;
            }
            (k, true)
        }
    }
}

/// `∫_0^{upto.t} f(s) ds`, with `f` called at node points and at `upto`.
pub fn integrate<E: From<NonFinite>>(
    grid: &Grid,
    upto: &Point,
    mut f: impl FnMut(&Point) -> Result<f64, E>,
) -> Result<f64, E> {
    let mut acc = 0.0;
    let (k_last, partial) = last_node(grid, upto);
    for seg in 0..=upto.seg {
        let last = if seg == upto.seg { k_last } else { grid.panels() };
        let p0 = grid.node_point(seg, 0);
        let mut prev_t = p0.t;
        let mut prev = checked(f(&p0)?, p0.t)?;
        for k in 1..=last {
            let p = grid.node_point(seg, k);
            let v = checked(f(&p)?, p.t)?;
            acc += 0.5 * (p.t - prev_t) * (prev + v);
            prev = v;
            prev_t = p.t;
        }
        if seg == upto.seg && partial {
            let v = checked(f(upto)?, upto.t)?;
            acc += 0.5 * (upto.t - prev_t) * (prev + v);
        }
    }
    Ok(acc)
}

/// `∫_0^t ∫_0^s f(s, s1) ds1 ds` over the triangle `0 ≤ s1 ≤ s ≤ t`: outer
/// trapezoid in `s`, inner [`integrate`] up to every outer sample.
pub fn integrate_double<E: From<NonFinite>>(
    grid: &Grid,
    upto: &Point,
    mut f: impl FnMut(&Point, &Point) -> Result<f64, E>,
) -> Result<f64, E> {
    integrate(grid, upto, |p| integrate(grid, p, |q| f(p, q)))
}

/// Prefix integrals `∫_0^{t_node}` of a node-sampled integrand, in grid
/// storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct Cumulative {
    node_values: Vec<f64>,
    prefix: Vec<f64>,
}

impl Cumulative {
    /// `node_values` must be in grid storage order.
    pub fn new(grid: &Grid, node_values: Vec<f64>) -> Result<Self, NonFinite> {
        assert_eq!(node_values.len(), grid.len(), "node values do not match the grid");
        let mut prefix = Vec::with_capacity(node_values.len());
        let mut acc = 0.0;
        for seg in 0..grid.segments() {
            let mut prev_t = grid.node_time(seg, 0);
            let mut prev = checked::<NonFinite>(node_values[grid.index(seg, 0)], prev_t)?;
            prefix.push(acc);
            for k in 1..=grid.panels() {
                let t = grid.node_time(seg, k);
                let v = checked::<NonFinite>(node_values[grid.index(seg, k)], t)?;
                acc += 0.5 * (t - prev_t) * (prev + v);
                prefix.push(acc);
                prev = v;
                prev_t = t;
            }
        }
        Ok(Cumulative { node_values, prefix })
    }

    /// Integral up to `p`; `at_point` supplies the integrand at `p` when `p`
    /// is not a node.
    pub fn at<E: From<NonFinite>>(
        &self,
        grid: &Grid,
        p: &Point,
        at_point: impl FnOnce() -> Result<f64, E>,
    ) -> Result<f64, E> {
        let (k, partial) = last_node(grid, p);
        let i = grid.index(p.seg, k);
        if !partial {
            return Ok(self.prefix[i]);
        }
        let v = checked(at_point()?, p.t)?;
        let tk = grid.node_time(p.seg, k);
        Ok(self.prefix[i] + 0.5 * (p.t - tk) * (self.node_values[i] + v))
    }
}
