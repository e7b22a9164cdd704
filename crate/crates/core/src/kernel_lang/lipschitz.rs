//! Sampling-based Lipschitz estimates and the constant set used by the
//! contraction bounds.

use super::{EvalError, KernelExpr};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Multiplier callers apply to sampled estimates, which are under-estimates
/// of the true supremum.
pub const DEFAULT_SAFETY_FACTOR: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LipschitzError {
    #[error("box has zero width in '{0}'")]
    DegenerateBox(String),
    #[error("variable '{0}' has no interval in the box")]
    Unbounded(String),
    #[error("'{0}' is not a variable of the expression")]
    UnknownVariable(String),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("kernel evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

/// Lipschitz constants of the hybrid kernels, plus optional per-order
/// constants for the multiple-integral series.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzSet {
    #[serde(default, rename = "L1")]
    pub l1: f64,
    #[serde(default, rename = "L21")]
    pub l21: f64,
    #[serde(default, rename = "L22")]
    pub l22: f64,
    #[serde(default, rename = "LG1")]
    pub lg1: f64,
    #[serde(default, rename = "LG21")]
    pub lg21: f64,
    #[serde(default, rename = "LG22")]
    pub lg22: f64,
    #[serde(default, rename = "LG31")]
    pub lg31: f64,
    #[serde(default, rename = "LG32")]
    pub lg32: f64,
    #[serde(default, rename = "Lg1")]
    pub lsmall_g1: f64,
    #[serde(default, rename = "Lg2")]
    pub lsmall_g2: f64,
    #[serde(default, rename = "Lg3")]
    pub lsmall_g3: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series_l: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series_c: Vec<f64>,
}

impl LipschitzSet {
    pub fn all_nonnegative(&self) -> bool {
        self.scalars().iter().all(|v| *v >= 0.0 && v.is_finite())
            && self.series_l.iter().chain(&self.series_c).all(|v| *v >= 0.0)
    }

    fn scalars(&self) -> [f64; 11] {
        [
            self.l1,
            self.l21,
            self.l22,
            self.lg1,
            self.lg21,
            self.lg22,
            self.lg31,
            self.lg32,
            self.lsmall_g1,
            self.lsmall_g2,
            self.lsmall_g3,
        ]
    }

    /// `max(L21, L22)`.
    pub fn l2(&self) -> f64 {
        self.l21.max(self.l22)
    }

    pub fn lg2(&self) -> f64 {
        self.lg21.max(self.lg22)
    }

    pub fn lg3(&self) -> f64 {
        self.lg31.max(self.lg32)
    }

    /// `max(Lg1, Lg2, Lg3)`.
    pub fn lg(&self) -> f64 {
        self.lsmall_g1.max(self.lsmall_g2).max(self.lsmall_g3)
    }

    /// Every constant multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: f64| v * factor;
        LipschitzSet {
            l1: s(self.l1),
            l21: s(self.l21),
            l22: s(self.l22),
            lg1: s(self.lg1),
            lg21: s(self.lg21),
            lg22: s(self.lg22),
            lg31: s(self.lg31),
            lg32: s(self.lg32),
            lsmall_g1: s(self.lsmall_g1),
            lsmall_g2: s(self.lsmall_g2),
            lsmall_g3: s(self.lsmall_g3),
            series_l: self.series_l.iter().map(|v| s(*v)).collect(),
            series_c: self.series_c.clone(),
        }
    }
}

/// Sampled estimate of `sup |d expr / d wrt|` over `bounds`.
///
/// Central differences are taken at `samples` points stratified along `wrt`
/// (other coordinates uniform), plus one-sided differences and full-width
/// secants at every corner of the box. The result is the sample maximum, an
/// under-estimate up to the differencing error.
pub fn estimate_lipschitz(
    expr: &KernelExpr,
    wrt: &str,
    bounds: &BTreeMap<String, Interval>,
    samples: usize,
    seed: u64,
) -> Result<f64, LipschitzError> {
    if samples < 2 {
        return Err(LipschitzError::TooFewSamples(samples));
    }
    let dims = expr.arity().len();
    let axis = expr
        .arity()
        .iter()
        .position(|n| n == wrt)
        .ok_or_else(|| LipschitzError::UnknownVariable(wrt.to_string()))?;
    let boxes: Vec<Interval> = expr
        .arity()
        .iter()
        .map(|n| {
            bounds
                .get(n)
                .copied()
                .ok_or_else(|| LipschitzError::Unbounded(n.clone()))
        })
        .collect::<Result<_, _>>()?;
    let span = boxes[axis];
    if !(span.width() > 0.0) {
        return Err(LipschitzError::DegenerateBox(wrt.to_string()));
    }
    let step = 2e-3 * span.width();

    // central difference in the interior; second-order one-sided at the edges
    let slope_at = |point: &mut Vec<f64>| -> Result<f64, LipschitzError> {
        let centre = point[axis];
        let mut at = |x: f64| -> Result<f64, LipschitzError> {
            point[axis] = x;
            Ok(expr.eval(point)?)
        };
        let d = if centre - step < span.lo {
            let x = span.lo;
            (-3.0 * at(x)? + 4.0 * at(x + step)? - at(x + 2.0 * step)?) / (2.0 * step)
        } else if centre + step > span.hi {
            let x = span.hi;
            (3.0 * at(x)? - 4.0 * at(x - step)? + at(x - 2.0 * step)?) / (2.0 * step)
        } else {
            (at(centre + step)? - at(centre - step)?) / (2.0 * step)
        };
        point[axis] = centre;
        Ok(d.abs())
    };

    let mut best = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = vec![0.0; dims];
    for k in 0..samples {
        for (d, iv) in boxes.iter().enumerate() {
            point[d] = if d == axis {
                iv.lo + iv.width() * (k as f64 + rng.gen::<f64>()) / samples as f64
            } else if iv.width() > 0.0 {
                rng.gen_range(iv.lo..=iv.hi)
            } else {
                iv.lo
            };
        }
        best = best.max(slope_at(&mut point)?);
    }

    // corners: cap enumeration at 2^16
    let free: Vec<usize> = (0..dims).filter(|&d| d != axis).collect();
    let corner_dims = free.len().min(16);
    for mask in 0u32..(1u32 << corner_dims) {
        for (bit, &d) in free.iter().enumerate() {
            let hi = bit < corner_dims && mask & (1 << bit) != 0;
            point[d] = if hi { boxes[d].hi } else { boxes[d].lo };
        }
        point[axis] = span.lo;
        let f_lo = expr.eval(&point)?;
        best = best.max(slope_at(&mut point)?);
        point[axis] = span.hi;
        let f_hi = expr.eval(&point)?;
        best = best.max(slope_at(&mut point)?);
        best = best.max(((f_hi - f_lo) / span.width()).abs());
    }
    Ok(best)
}
