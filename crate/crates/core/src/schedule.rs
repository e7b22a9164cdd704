//! Impulse data: fixed impulse times `τ`, moving impulse times `σ_i(t)`, the
//! roots of `t = σ_i(t)`, the merged breakpoint set, and the separation check.

use crate::kernel_lang::{EvalError, KernelExpr};
use serde::Serialize;
use std::fmt;

/// Default number of scan points for root finding and separation checks.
pub const DEFAULT_SCAN_GRID: usize = 4096;
/// Default residual tolerance for roots of `σ_i(t) − t`.
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
/// Breakpoints closer than this are merged.
pub const MERGE_TOL: f64 = 1e-10;
/// Slack granted to the separation inequalities for rounding.
const H7_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScheduleError {
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("impulse times must be strictly increasing (index {0})")]
    TauNotIncreasing(usize),
    #[error("impulse time {value} (index {index}) is outside (0, {horizon})")]
    TauOutOfRange { index: usize, value: f64, horizon: f64 },
    #[error("separation h must be positive and finite, got {0}")]
    BadSeparation(f64),
    #[error("moving time {index} must have arity (t)")]
    SigmaArity { index: usize },
    #[error("scan grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
    #[error("moving time {index} failed at t = {t}: {source}")]
    SigmaEval { index: usize, t: f64, source: EvalError },
}

/// Every real root of `σ(t) = t` on `[0, horizon]` detectable on a scan of
/// `grid` points: sign changes are refined by bisection until
/// `|σ(r) − r| ≤ tol`; grid points where the residual is already within
/// `tol` count as roots (this is the only way tangential roots are found).
pub fn solve_sigma_roots(
    sigma: &KernelExpr,
    horizon: f64,
    tol: f64,
    grid: usize,
) -> Result<Vec<f64>, ScheduleError> {
    if grid < 2 {
        return Err(ScheduleError::GridTooSmall(grid));
    }
    let f = |t: f64| -> Result<f64, ScheduleError> {
        sigma
            .eval(&[t])
            .map(|s| s - t)
            .map_err(|source| ScheduleError::SigmaEval { index: 0, t, source })
    };
    let times: Vec<f64> = (0..grid)
        .map(|k| if k + 1 == grid { horizon } else { horizon * k as f64 / (grid - 1) as f64 })
        .collect();
    let vals = times.iter().map(|&t| f(t)).collect::<Result<Vec<_>, _>>()?;

    let mut roots = Vec::new();
    for k in 0..grid {
        if vals[k].abs() <= tol {
            roots.push(times[k]);
            continue;
        }
        if k + 1 < grid && vals[k + 1].abs() > tol && vals[k].signum() != vals[k + 1].signum() {
            roots.push(bisect(&f, times[k], times[k + 1], vals[k], tol)?);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= MERGE_TOL);
    Ok(roots)
}

fn bisect(
    f: &impl Fn(f64) -> Result<f64, ScheduleError>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    tol: f64,
) -> Result<f64, ScheduleError> {
    let mut best = (f64::INFINITY, a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = f(mid)?;
        if fm.abs() < best.0 {
            best = (fm.abs(), mid);
        }
        if fm.abs() <= tol || mid <= a || mid >= b {
            break;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(best.1)
}

/// The breakpoint set `I` and the induced partition `0 = α_0 < … < α_M = T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Breakpoints {
    pub set: Vec<f64>,
    pub partition: Vec<f64>,
}

/// Merge `τ` and all roots into a sorted set (points within [`MERGE_TOL`]
/// collapse onto the first), and build the partition with `0` and `T` as
/// its endpoints.
pub fn build_breakpoints(tau: &[f64], rho: &[Vec<f64>], horizon: f64) -> Breakpoints {
    let mut all: Vec<f64> = tau.iter().chain(rho.iter().flatten()).copied().collect();
    all.sort_by(f64::total_cmp);
    let mut set: Vec<f64> = Vec::with_capacity(all.len());
    for v in all {
        match set.last() {
            Some(&last) if v - last <= MERGE_TOL => {}
            _ => set.push(v),
        }
    }
    let mut partition = vec![0.0];
    for &v in &set {
        if v > MERGE_TOL && v < horizon - MERGE_TOL {
            partition.push(v);
        }
    }
    partition.push(horizon);
    Breakpoints { set, partition }
}

/// Which separation clause failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum H7Clause {
    /// `τ_i − τ_{i−1} ≥ h`.
    #[serde(rename = "τ-gap")]
    TauGap,
    /// `σ_j(t) − σ_{j−1}(t) ≥ h` for every scan time.
    #[serde(rename = "σ-gap")]
    SigmaGap,
    /// `τ_i − σ_j(s) ≥ h` whenever `σ_j(s) < τ_i`.
    #[serde(rename = "τ-σ-gap")]
    TauSigmaGap,
    /// `σ_{i+1}(t) − σ_i(s) ≥ h` whenever `s ≤ σ_i(t)`.
    #[serde(rename = "σ-order")]
    SigmaOrder,
}

impl fmt::Display for H7Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            H7Clause::TauGap => "τ-gap",
            H7Clause::SigmaGap => "σ-gap",
            H7Clause::TauSigmaGap => "τ-σ-gap",
            H7Clause::SigmaOrder => "σ-order",
        })
    }
}

/// First failing clause, with 1-based indices and the scan time involved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H7Violation {
    pub clause: H7Clause,
    pub indices: (usize, usize),
    pub time: f64,
    pub gap: f64,
}

/// Outcome of the separation check. A pass means "verified on the scan
/// grid", not proven.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H7Report {
    pub satisfied: bool,
    pub grid: usize,
    pub violation: Option<H7Violation>,
}

impl H7Report {
    pub fn verdict(&self) -> String {
        match &self.violation {
            None => format!("verified on grid ({} points)", self.grid),
            Some(v) => format!(
                "violated on grid: clause {} at indices ({}, {}), t = {}, gap = {}",
                v.clause, v.indices.0, v.indices.1, v.time, v.gap
            ),
        }
    }
}

/// Fixed and moving impulse data with derived roots and breakpoints.
#[derive(Debug, Clone)]
pub struct ImpulseSchedule {
    horizon: f64,
    tau: Vec<f64>,
    sigma: Vec<KernelExpr>,
    h: f64,
    rho: Vec<Vec<f64>>,
    breakpoints: Breakpoints,
}

impl ImpulseSchedule {
    pub fn new(horizon: f64, tau: Vec<f64>, sigma: Vec<KernelExpr>, h: f64) -> Result<Self, ScheduleError> {
        Self::with_root_options(horizon, tau, sigma, h, DEFAULT_ROOT_TOL, DEFAULT_SCAN_GRID)
    }

    pub fn with_root_options(
        horizon: f64,
        tau: Vec<f64>,
        sigma: Vec<KernelExpr>,
        h: f64,
        root_tol: f64,
        grid: usize,
    ) -> Result<Self, ScheduleError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(ScheduleError::BadHorizon(horizon));
        }
        for (i, &v) in tau.iter().enumerate() {
            if !(v > 0.0 && v < horizon) {
                return Err(ScheduleError::TauOutOfRange {
                    index: i + 1,
                    value: v,
                    horizon,
                });
            }
            if i > 0 && !(v > tau[i - 1]) {
                return Err(ScheduleError::TauNotIncreasing(i + 1));
            }
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(ScheduleError::BadSeparation(h));
        }
        for (i, s) in sigma.iter().enumerate() {
            if s.arity().len() != 1 || s.arity()[0] != "t" {
                return Err(ScheduleError::SigmaArity { index: i + 1 });
            }
        }
        let rho = sigma
            .iter()
            .enumerate()
            .map(|(i, s)| {
                solve_sigma_roots(s, horizon, root_tol, grid).map_err(|e| match e {
                    ScheduleError::SigmaEval { t, source, .. } => ScheduleError::SigmaEval {
                        index: i + 1,
                        t,
                        source,
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let breakpoints = build_breakpoints(&tau, &rho, horizon);
        Ok(ImpulseSchedule {
            horizon,
            tau,
            sigma,
            h,
            rho,
            breakpoints,
        })
    }

    /// Smallest gap between consecutive impulse times, or the horizon when
    /// there are fewer than two.
    pub fn default_separation(horizon: f64, tau: &[f64]) -> f64 {
        tau.windows(2).map(|w| w[1] - w[0]).fold(horizon, f64::min)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn sigma(&self) -> &[KernelExpr] {
        &self.sigma
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn rho(&self) -> &[Vec<f64>] {
        &self.rho
    }

    pub fn breakpoints(&self) -> &Breakpoints {
        &self.breakpoints
    }

    pub fn partition(&self) -> &[f64] {
        &self.breakpoints.partition
    }

    pub fn n_tau(&self) -> usize {
        self.tau.len()
    }

    pub fn n_sigma(&self) -> usize {
        self.sigma.len()
    }

    /// True if `t` is in the breakpoint set (within the merge tolerance).
    pub fn is_breakpoint(&self, t: f64) -> bool {
        self.breakpoints.set.iter().any(|b| (b - t).abs() <= MERGE_TOL)
    }

    /// `σ_i(t)` (0-based `i`), unclamped.
    pub fn sigma_at(&self, i: usize, t: f64) -> Result<f64, ScheduleError> {
        self.sigma[i]
            .eval(&[t])
            .map_err(|source| ScheduleError::SigmaEval { index: i + 1, t, source })
    }

    /// `σ_i(t)` clamped into `[0, T]`.
    pub fn sigma_clamped(&self, i: usize, t: f64) -> Result<f64, ScheduleError> {
        Ok(self.sigma_at(i, t)?.clamp(0.0, self.horizon))
    }

    /// Grid check of the separation hypothesis. Clauses are tested in the
    /// order τ-gap, σ-gap, τ-σ-gap, σ-order and the first violation is
    /// reported.
    pub fn check_h7(&self, grid: usize) -> Result<H7Report, ScheduleError> {
        if grid < 2 {
            return Err(ScheduleError::GridTooSmall(grid));
        }
        let h = self.h;
        let fail = |clause, i: usize, j: usize, time: f64, gap: f64| H7Report {
            satisfied: false,
            grid,
            violation: Some(H7Violation {
                clause,
                indices: (i, j),
                time,
                gap,
            }),
        };

        for i in 1..self.tau.len() {
            let gap = self.tau[i] - self.tau[i - 1];
            if gap < h - H7_SLACK {
                return Ok(fail(H7Clause::TauGap, i, i + 1, self.tau[i], gap));
            }
        }

        let times: Vec<f64> = (0..grid)
            .map(|k| {
                if k + 1 == grid {
                    self.horizon
                } else {
                    self.horizon * k as f64 / (grid - 1) as f64
                }
            })
            .collect();
        let sig: Vec<Vec<f64>> = (0..self.sigma.len())
            .map(|i| times.iter().map(|&t| self.sigma_at(i, t)).collect())
            .collect::<Result<_, _>>()?;

        for j in 1..sig.len() {
            for (k, &t) in times.iter().enumerate() {
                let gap = sig[j][k] - sig[j - 1][k];
                if gap < h - H7_SLACK {
                    return Ok(fail(H7Clause::SigmaGap, j, j + 1, t, gap));
                }
            }
        }

        for (i, &ti) in self.tau.iter().enumerate() {
            for (j, sj) in sig.iter().enumerate() {
                for (k, &s) in times.iter().enumerate() {
                    if sj[k] < ti {
                        let gap = ti - sj[k];
                        if gap < h - H7_SLACK {
                            return Ok(fail(H7Clause::TauSigmaGap, i + 1, j + 1, s, gap));
                        }
                    }
                }
            }
        }

        // max_{s ≤ u} σ_i(s) over scan points, via prefix maxima
        for i in 0..sig.len().saturating_sub(1) {
            let mut prefix = Vec::with_capacity(grid);
            let mut m = f64::NEG_INFINITY;
            for v in &sig[i] {
                m = m.max(*v);
                prefix.push(m);
            }
            for (k, &t) in times.iter().enumerate() {
                let u = sig[i][k];
                if u < 0.0 {
                    continue;
                }
                let upto = times.partition_point(|&s| s <= u);
                if upto == 0 {
                    continue;
                }
                let gap = sig[i + 1][k] - prefix[upto - 1];
                if gap < h - H7_SLACK {
                    return Ok(fail(H7Clause::SigmaOrder, i + 1, i + 2, t, gap));
                }
            }
        }

        Ok(H7Report {
            satisfied: true,
            grid,
            violation: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sig(src: &str) -> KernelExpr {
        KernelExpr::parse(src, &["t"]).unwrap()
    }

    #[test]
    fn roots_examples() {
        assert_eq!(solve_sigma_roots(&sig("0.5*t"), 1.0, 1e-12, 4096).unwrap(), vec![0.0]);
        assert!(solve_sigma_roots(&sig("t - 0.3"), 1.0, 1e-12, 4096).unwrap().is_empty());
        let r = solve_sigma_roots(&sig("t^2"), 1.5, 1e-12, 4096).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0], 0.0);
        assert!((r[1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn roots_satisfy_residual_bound() {
        let s = sig("0.3 + 0.5*sin(3*t)");
        let r = solve_sigma_roots(&s, 2.0, 1e-12, 4096).unwrap();
        assert!(!r.is_empty());
        for x in r {
            assert!((s.eval(&[x]).unwrap() - x).abs() <= 1e-12);
        }
    }

    #[test]
    fn breakpoint_examples() {
        let b = build_breakpoints(&[0.5, 1.0], &[vec![0.25]], 2.0);
        assert_eq!(b.set, vec![0.25, 0.5, 1.0]);
        assert_eq!(b.partition, vec![0.0, 0.25, 0.5, 1.0, 2.0]);
        let b = build_breakpoints(&[], &[], 2.0);
        assert!(b.set.is_empty());
        assert_eq!(b.partition, vec![0.0, 2.0]);
        let b = build_breakpoints(&[0.5], &[vec![0.5 + 1e-12]], 1.0);
        assert_eq!(b.set, vec![0.5]);
        assert_eq!(b.partition, vec![0.0, 0.5, 1.0]);
        // a root at 0 is a breakpoint but not an extra partition point
        let b = build_breakpoints(&[], &[vec![0.0]], 1.0);
        assert_eq!(b.set, vec![0.0]);
        assert_eq!(b.partition, vec![0.0, 1.0]);
    }

    #[test]
    fn schedule_validation() {
        assert!(matches!(ImpulseSchedule::new(0.0, vec![], vec![], 1.0), Err(ScheduleError::BadHorizon(_))));
        assert!(matches!(
            ImpulseSchedule::new(1.0, vec![0.5, 0.4], vec![], 0.1),
            Err(ScheduleError::TauNotIncreasing(2))
        ));
        assert!(matches!(
            ImpulseSchedule::new(1.0, vec![1.0], vec![], 0.1),
            Err(ScheduleError::TauOutOfRange { .. })
        ));
        assert!(matches!(ImpulseSchedule::new(1.0, vec![], vec![], 0.0), Err(ScheduleError::BadSeparation(_))));
        let s = ImpulseSchedule::new(2.0, vec![0.5, 1.0], vec![sig("0.5*t")], 0.4).unwrap();
        assert_eq!(s.rho(), &[vec![0.0]]);
        assert_eq!(s.partition(), &[0.0, 0.5, 1.0, 2.0]);
        assert!(s.is_breakpoint(0.0) && s.is_breakpoint(1.0) && !s.is_breakpoint(0.7));
    }

    #[test]
    fn h7_examples() {
        let pass = ImpulseSchedule::new(2.0, vec![0.5, 1.0], vec![], 0.4).unwrap();
        let r = pass.check_h7(512).unwrap();
        assert!(r.satisfied);
        assert!(r.verdict().contains("verified on grid"));

        let fail = ImpulseSchedule::new(2.0, vec![0.5, 1.0], vec![], 0.6).unwrap();
        let v = fail.check_h7(512).unwrap().violation.unwrap();
        assert_eq!(v.clause, H7Clause::TauGap);
        assert_eq!(v.indices, (1, 2));

        let sg = ImpulseSchedule::new(1.0, vec![], vec![sig("0.1*t"), sig("0.1*t + 0.05")], 0.1).unwrap();
        let v = sg.check_h7(512).unwrap().violation.unwrap();
        assert_eq!(v.clause, H7Clause::SigmaGap);
        assert_eq!(v.indices, (1, 2));
    }

    #[test]
    fn h7_tau_sigma_and_order_clauses() {
        let ts = ImpulseSchedule::new(1.0, vec![0.3], vec![sig("0.5*t")], 0.1).unwrap();
        let v = ts.check_h7(256).unwrap().violation.unwrap();
        assert_eq!(v.clause, H7Clause::TauSigmaGap);
        assert_eq!(v.indices, (1, 1));
        assert!(v.gap < 0.1);

        // σ_2 − σ_1 = 0.5 everywhere but σ_1 can reach its own max
        let ok = ImpulseSchedule::new(1.0, vec![], vec![sig("0.1*t"), sig("0.1*t + 0.5")], 0.2).unwrap();
        assert!(ok.check_h7(256).unwrap().satisfied);
        let ord = ImpulseSchedule::new(1.0, vec![], vec![sig("0.9*t"), sig("0.9*t + 0.2")], 0.2).unwrap();
        // σ_2(t) − max_{s ≤ σ_1(t)} σ_1(s) = 0.2 + 0.09·t
        assert!(ord.check_h7(256).unwrap().satisfied);
        let bad = ImpulseSchedule::new(1.0, vec![], vec![sig("0.5 - 0.5*t"), sig("0.8 - 0.5*t")], 0.25).unwrap();
        let v = bad.check_h7(256).unwrap().violation.unwrap();
        assert_eq!(v.clause, H7Clause::SigmaOrder);
    }

    proptest! {
        #[test]
        fn breakpoints_permutation_invariant(mut v in proptest::collection::vec(0.01f64..0.99, 0..8), seed in 0u64..1000) {
            let a = build_breakpoints(&[], &[v.clone()], 1.0);
            // deterministic shuffle
            let n = v.len();
            for i in 0..n {
                let j = ((seed as usize).wrapping_mul(31).wrapping_add(i * 17)) % n;
                v.swap(i, j);
            }
            let b = build_breakpoints(&[], &[v], 1.0);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn affine_root_found(a in -3.0f64..0.9, b in 0.0f64..1.0) {
            let s = KernelExpr::parse(&format!("{a:?}*t + {b:?}"), &["t"]).unwrap();
            let r = solve_sigma_roots(&s, 2.0, 1e-12, 4096).unwrap();
            let exact = b / (1.0 - a);
            if exact <= 2.0 {
                prop_assert_eq!(r.len(), 1);
                prop_assert!((r[0] - exact).abs() <= 1e-11);
            } else {
                prop_assert!(r.is_empty());
            }
        }
    }
}
