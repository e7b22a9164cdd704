//! The hybrid equation, its fixed-point operator `S = (S_c, S_d, S_m)`, jumps
//! at breakpoints, and the equation residual.
//!
//! The equation is
//!
//! ```text
//! x(t) = x0(t) + ∫_0^t f1(t,s,x(s)) ds + ∫_0^t ∫_0^s f2(t,s,s1,x(s),x(s1)) ds1 ds
//!      + Σ_{τ_i<t} G1(t,τ_i,x(τ_i^-)) + Σ_{τ_i<t} Σ_{j<i} G2(t,τ_i,τ_j,x(τ_i^-),x(τ_j^-))
//!      + ∫_0^t Σ_{i:σ_i(s)<t} Σ_{j:τ_j<t} g(t,s,σ_i(s),τ_j,x(s),x(σ_i(s)^-),x(τ_j^-)) ds
//!      + Σ_{i:σ_i(t)<t} Σ_{j:τ_j<t} G3(t,σ_i(t),τ_j,x(σ_i(t)^-),x(τ_j^-))
//! ```
//!
//! The operator acts on triples `(ξ, η, β)` in which `η_i` stands for
//! `x(τ_i^-)` and `β_i(t)` for `x(σ_i(t)^-)`. All memberships are strict.
//!
//! One-sided values are obtained by shifting the membership time by
//! [`ONE_SIDED_OFFSET`] while keeping the kernel time and the integration
//! limit at the breakpoint itself.

use crate::kernel_lang::{estimate_lipschitz, EvalError, Interval, KernelExpr, LipschitzError, LipschitzSet, ParseError};
use crate::piecewise::{
    norm_c, norm_d, norm_m_sampled, DiscreteVector, Grid, PiecewiseError, PiecewiseFn, Point, DEFAULT_PANELS,
};
use crate::quadrature::{integrate, Cumulative, NonFinite};
use crate::schedule::{ImpulseSchedule, ScheduleError, MERGE_TOL};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// Offset used to evaluate memberships just left or right of a breakpoint.
pub const ONE_SIDED_OFFSET: f64 = MERGE_TOL;

/// Names and arities of the hybrid kernels.
pub const KERNEL_SIGNATURES: [(&str, &[&str]); 7] = [
    ("x0", &["t"]),
    ("f1", &["t", "s", "x"]),
    ("f2", &["t", "s", "s1", "x", "x1"]),
    ("G1", &["t", "tau", "eta"]),
    ("G2", &["t", "taui", "tauj", "etai", "etaj"]),
    ("G3", &["t", "sig", "tau", "beta", "eta"]),
    ("g", &["t", "s", "sig", "tau", "x", "beta", "eta"]),
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OperatorError {
    #[error("kernel {kernel}: {source}")]
    Parse { kernel: String, source: ParseError },
    #[error("unknown kernel name '{0}'")]
    UnknownKernel(String),
    #[error("kernel {kernel} failed: {source}")]
    Eval { kernel: &'static str, source: EvalError },
    #[error(transparent)]
    NonFinite(#[from] NonFinite),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Piecewise(#[from] PiecewiseError),
    #[error("solution triple does not conform to the problem: {0}")]
    Shape(String),
    #[error("{0} is not a breakpoint")]
    NotBreakpoint(f64),
}

/// The seven kernels of the hybrid equation; omitted kernels are zero.
#[derive(Debug, Clone)]
pub struct Kernels {
    pub x0: KernelExpr,
    pub f1: KernelExpr,
    pub f2: KernelExpr,
    pub g1: KernelExpr,
    pub g2: KernelExpr,
    pub g3: KernelExpr,
    pub g: KernelExpr,
}

impl Default for Kernels {
    fn default() -> Self {
        let z = |i: usize| KernelExpr::zero(KERNEL_SIGNATURES[i].1);
        Kernels {
            x0: z(0),
            f1: z(1),
            f2: z(2),
            g1: z(3),
            g2: z(4),
            g3: z(5),
            g: z(6),
        }
    }
}

impl Kernels {
    /// Parse `source` as the kernel called `name` (`x0`, `f1`, `f2`, `G1`,
    /// `G2`, `G3` or `g`) with its fixed signature.
    pub fn set(&mut self, name: &str, source: &str) -> Result<(), OperatorError> {
        let (_, arity) = KERNEL_SIGNATURES
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| OperatorError::UnknownKernel(name.to_string()))?;
        let expr = KernelExpr::parse(source, arity).map_err(|source| OperatorError::Parse {
            kernel: name.to_string(),
            source,
        })?;
        *self.slot(name) = expr;
        Ok(())
    }

    fn slot(&mut self, name: &str) -> &mut KernelExpr {
        match name {
            "x0" => &mut self.x0,
            "f1" => &mut self.f1,
            "f2" => &mut self.f2,
            "G1" => &mut self.g1,
            "G2" => &mut self.g2,
            "G3" => &mut self.g3,
            _ => &mut self.g,
        }
    }

    pub fn get(&self, name: &str) -> Option<&KernelExpr> {
        Some(match name {
            "x0" => &self.x0,
            "f1" => &self.f1,
            "f2" => &self.f2,
            "G1" => &self.g1,
            "G2" => &self.g2,
            "G3" => &self.g3,
            "g" => &self.g,
            _ => return None,
        })
    }

    pub fn impulse_free(&self) -> bool {
        [&self.g1, &self.g2, &self.g3, &self.g].iter().all(|k| k.is_constant_zero())
    }
}

/// A hybrid equation on `[0, T]` together with its discretization grid.
#[derive(Debug, Clone)]
pub struct HybridProblem {
    kernels: Kernels,
    schedule: ImpulseSchedule,
    lipschitz: Option<LipschitzSet>,
    grid: Arc<Grid>,
    /// `σ_i` clamped to `[0, T]` at every grid node, storage order.
    sigma_nodes: Vec<Vec<f64>>,
}

impl HybridProblem {
    pub fn new(kernels: Kernels, schedule: ImpulseSchedule, panels: usize) -> Result<Self, OperatorError> {
        let grid = Arc::new(Grid::new(schedule.partition().to_vec(), panels)?);
        let sigma_nodes = (0..schedule.n_sigma())
            .map(|i| {
                grid.points()
                    .map(|p| schedule.sigma_clamped(i, p.t))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(HybridProblem {
            kernels,
            schedule,
            lipschitz: None,
            grid,
            sigma_nodes,
        })
    }

    pub fn with_lipschitz(mut self, lipschitz: Option<LipschitzSet>) -> Self {
        self.lipschitz = lipschitz;
        self
    }

    /// Same equation on a grid with a different number of panels per segment.
    pub fn with_panels(&self, panels: usize) -> Result<Self, OperatorError> {
        Ok(HybridProblem::new(self.kernels.clone(), self.schedule.clone(), panels)?.with_lipschitz(self.lipschitz.clone()))
    }

    pub fn kernels(&self) -> &Kernels {
        &self.kernels
    }

    pub fn schedule(&self) -> &ImpulseSchedule {
        &self.schedule
    }

    pub fn lipschitz(&self) -> Option<&LipschitzSet> {
        self.lipschitz.as_ref()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn horizon(&self) -> f64 {
        self.schedule.horizon()
    }

    pub fn sigma_nodes(&self) -> &[Vec<f64>] {
        &self.sigma_nodes
    }

    /// Sampled Lipschitz constants of every kernel, each multiplied by
    /// `safety`. Time-like variables range over `[0, T]`, state-like ones over
    /// `[-x_range, x_range]`; zero kernels give zero.
    pub fn estimate_lipschitz(
        &self,
        x_range: f64,
        samples: usize,
        seed: u64,
        safety: f64,
    ) -> Result<LipschitzSet, LipschitzError> {
        let horizon = self.horizon();
        let time_like = ["t", "s", "s1", "tau", "taui", "tauj", "sig"];
        let est = |expr: &KernelExpr, wrt: &str, salt: u64| -> Result<f64, LipschitzError> {
            if expr.is_constant_zero() || !expr.references(wrt) {
                return Ok(0.0);
            }
            let bounds = expr
                .arity()
                .iter()
                .map(|n| {
                    let iv = if time_like.contains(&n.as_str()) {
                        Interval::new(0.0, horizon)
                    } else {
                        Interval::new(-x_range, x_range)
                    };
                    (n.clone(), iv)
                })
                .collect();
            Ok(safety * estimate_lipschitz(expr, wrt, &bounds, samples, seed.wrapping_add(salt))?)
        };
        let k = &self.kernels;
        Ok(LipschitzSet {
            l1: est(&k.f1, "x", 1)?,
            l21: est(&k.f2, "x", 2)?,
            l22: est(&k.f2, "x1", 3)?,
            lg1: est(&k.g1, "eta", 4)?,
            lg21: est(&k.g2, "etai", 5)?,
            lg22: est(&k.g2, "etaj", 6)?,
            lg31: est(&k.g3, "beta", 7)?,
            lg32: est(&k.g3, "eta", 8)?,
            lsmall_g1: est(&k.g, "x", 9)?,
            lsmall_g2: est(&k.g, "beta", 10)?,
            lsmall_g3: est(&k.g, "eta", 11)?,
            ..Default::default()
        })
    }

    /// Check that `v` lives on this problem's grid with matching sizes.
    pub fn conforms(&self, v: &SolutionTriple) -> Result<(), OperatorError> {
        let shape = |m: &str| Err(OperatorError::Shape(m.to_string()));
        if *v.xi.grid().as_ref() != *self.grid {
            return shape("ξ grid differs from the problem grid");
        }
        if v.eta.len() != self.schedule.n_tau() {
            return shape("η length differs from the number of fixed impulse times");
        }
        if v.beta.len() != self.schedule.n_sigma() {
            return shape("β count differs from the number of moving impulse times");
        }
        if v.beta.iter().any(|b| *b.grid().as_ref() != *self.grid) {
            return shape("β grid differs from the problem grid");
        }
        Ok(())
    }

    /// Weighted distance between two triples, componentwise `[c, d, m]`.
    pub fn distance(&self, a: &SolutionTriple, b: &SolutionTriple, mu: f64) -> Result<[f64; 3], OperatorError> {
        let dx = a.xi.sub(&b.xi)?;
        let de = a.eta.sub(&b.eta)?;
        let db = a
            .beta
            .iter()
            .zip(&b.beta)
            .map(|(x, y)| x.sub(y))
            .collect::<Result<Vec<_>, _>>()?;
        Ok([
            norm_c(&dx, mu),
            norm_d(&de, self.schedule.tau(), mu)?,
            norm_m_sampled(&db, &self.sigma_nodes, mu)?,
        ])
    }
}

/// Convenience constructor for problems given as kernel strings.
#[derive(Debug, Clone)]
pub struct ProblemBuilder {
    horizon: f64,
    kernels: Vec<(String, String)>,
    tau: Vec<f64>,
    sigma: Vec<String>,
    h: Option<f64>,
    panels: usize,
    lipschitz: Option<LipschitzSet>,
}

impl ProblemBuilder {
    pub fn new(horizon: f64) -> Self {
        ProblemBuilder {
            horizon,
            kernels: Vec::new(),
            tau: Vec::new(),
            sigma: Vec::new(),
            h: None,
            panels: DEFAULT_PANELS,
            lipschitz: None,
        }
    }

    pub fn kernel(mut self, name: &str, source: &str) -> Self {
        self.kernels.push((name.to_string(), source.to_string()));
        self
    }

    pub fn tau(mut self, tau: &[f64]) -> Self {
        self.tau = tau.to_vec();
        self
    }

    pub fn sigma(mut self, sigma: &[&str]) -> Self {
        self.sigma = sigma.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn h(mut self, h: f64) -> Self {
        self.h = Some(h);
        self
    }

    pub fn panels(mut self, panels: usize) -> Self {
        self.panels = panels;
        self
    }

    pub fn lipschitz(mut self, lip: LipschitzSet) -> Self {
        self.lipschitz = Some(lip);
        self
    }

    pub fn build(self) -> Result<HybridProblem, OperatorError> {
        let mut kernels = Kernels::default();
        for (name, src) in &self.kernels {
            kernels.set(name, src)?;
        }
        let sigma = self
            .sigma
            .iter()
            .enumerate()
            .map(|(i, s)| {
                KernelExpr::parse(s, &["t"]).map_err(|source| OperatorError::Parse {
                    kernel: format!("sigma[{}]", i + 1),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let h = self
            .h
            .unwrap_or_else(|| ImpulseSchedule::default_separation(self.horizon, &self.tau));
        let schedule = ImpulseSchedule::new(self.horizon, self.tau, sigma, h)?;
        Ok(HybridProblem::new(kernels, schedule, self.panels)?.with_lipschitz(self.lipschitz))
    }
}

/// An element `(ξ, η, β)` of the operator's domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTriple {
    pub xi: PiecewiseFn,
    pub eta: DiscreteVector,
    pub beta: Vec<PiecewiseFn>,
}

/// Where and how to evaluate the right-hand side: `t` is the kernel time and
/// integration limit (located by `point`), `memb` the time used in the
/// strict membership tests.
#[derive(Debug, Clone, Copy)]
struct Target {
    t: f64,
    memb: f64,
    point: Point,
}

fn kernel(name: &'static str, k: &KernelExpr, args: &[f64]) -> Result<f64, OperatorError> {
    k.eval(args).map_err(|source| OperatorError::Eval { kernel: name, source })
}

/// Per-application state: the input triple plus prefix integrals of the
/// memory terms whose kernels do not depend on `t`.
pub(crate) struct Evaluator<'a> {
    p: &'a HybridProblem,
    v: &'a SolutionTriple,
    f1_cum: Option<Cumulative>,
    f2_cum: Option<Cumulative>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(p: &'a HybridProblem, v: &'a SolutionTriple) -> Result<Self, OperatorError> {
        p.conforms(v)?;
        let grid = &p.grid;
        let k = &p.kernels;
        let mut ev = Evaluator {
            p,
            v,
            f1_cum: None,
            f2_cum: None,
        };
        if !k.f1.is_constant_zero() && !k.f1.references("t") {
            let vals = grid.points().map(|s| ev.f1_at(0.0, &s)).collect::<Result<Vec<_>, _>>()?;
            ev.f1_cum = Some(Cumulative::new(grid, vals)?);
        }
        if !k.f2.is_constant_zero() && !k.f2.references("t") {
            let pts: Vec<Point> = grid.points().collect();
            let vals = pts
                .par_iter()
                .map(|s| ev.f2_inner(0.0, s))
                .collect::<Result<Vec<_>, _>>()?;
            ev.f2_cum = Some(Cumulative::new(grid, vals)?);
        }
        Ok(ev)
    }

    fn f1_at(&self, t: f64, s: &Point) -> Result<f64, OperatorError> {
        kernel("f1", &self.p.kernels.f1, &[t, s.t, self.v.xi.value_at(s)])
    }

    /// `∫_0^s f2(t, s, s1, ξ(s), ξ(s1)) ds1`.
    fn f2_inner(&self, t: f64, s: &Point) -> Result<f64, OperatorError> {
        let xs = self.v.xi.value_at(s);
        let f2 = &self.p.kernels.f2;
        integrate(&self.p.grid, s, |q| kernel("f2", f2, &[t, s.t, q.t, xs, self.v.xi.value_at(q)]))
    }

    fn sigma_at_point(&self, i: usize, s: &Point) -> Result<f64, OperatorError> {
        match s.node {
            Some(k) => Ok(self.p.sigma_nodes[i][self.p.grid.index(s.seg, k)]),
            None => Ok(self.p.schedule.sigma_clamped(i, s.t)?),
        }
    }

    fn eval(&self, tg: &Target) -> Result<f64, OperatorError> {
        let p = self.p;
        let k = &p.kernels;
        let grid = &p.grid;
        let tau = p.schedule.tau();
        let eta = &self.v.eta.0;
        let (t, memb, pt) = (tg.t, tg.memb, &tg.point);
        let n_tau_in = tau.partition_point(|&x| x < memb);

        let mut acc = kernel("x0", &k.x0, &[t])?;

        if !k.f1.is_constant_zero() {
            acc += match &self.f1_cum {
                Some(c) => c.at(grid, pt, || self.f1_at(t, pt))?,
                None => integrate(grid, pt, |s| self.f1_at(t, s))?,
            };
        }
        if !k.f2.is_constant_zero() {
            acc += match &self.f2_cum {
                Some(c) => c.at(grid, pt, || self.f2_inner(t, pt))?,
                None => integrate(grid, pt, |s| self.f2_inner(t, s))?,
            };
        }
        if !k.g1.is_constant_zero() {
            for i in 0..n_tau_in {
                acc += kernel("G1", &k.g1, &[t, tau[i], eta[i]])?;
            }
        }
        if !k.g2.is_constant_zero() {
            for i in 0..n_tau_in {
                for j in 0..i {
                    acc += kernel("G2", &k.g2, &[t, tau[i], tau[j], eta[i], eta[j]])?;
                }
            }
        }
        let n_sigma = p.schedule.n_sigma();
        if !k.g.is_constant_zero() && n_sigma > 0 && n_tau_in > 0 {
            acc += integrate(grid, pt, |s| {
                let xs = self.v.xi.value_at(s);
                let mut sum = 0.0;
                for i in 0..n_sigma {
                    let sig = self.sigma_at_point(i, s)?;
                    if !(sig < memb) {
                        continue;
                    }
                    let b = self.v.beta[i].value_at(s);
                    for j in 0..n_tau_in {
                        sum += kernel("g", &k.g, &[t, s.t, sig, tau[j], xs, b, eta[j]])?;
                    }
                }
                Ok::<_, OperatorError>(sum)
            })?;
        }
        if !k.g3.is_constant_zero() && n_tau_in > 0 {
            let horizon = p.horizon();
            for i in 0..n_sigma {
                let sig_memb = p.schedule.sigma_clamped(i, memb.clamp(0.0, horizon))?;
                if !(sig_memb < memb) {
                    continue;
                }
                let sig = self.sigma_at_point(i, pt)?;
                let b = self.v.beta[i].value_at(pt);
                for j in 0..n_tau_in {
                    acc += kernel("G3", &k.g3, &[t, sig, tau[j], b, eta[j]])?;
                }
            }
        }
        if !acc.is_finite() {
            return Err(NonFinite(t).into());
        }
        Ok(acc)
    }

    /// Target for the grid node `(seg, k)`: interior nodes use their own time
    /// for memberships, segment ends the one-sided offsets.
    fn node_target(&self, seg: usize, k: usize) -> Target {
        let grid = &self.p.grid;
        let point = grid.node_point(seg, k);
        let t = point.t;
        let memb = if seg == 0 && k == 0 {
            0.0
        } else if k == grid.panels() {
            t - ONE_SIDED_OFFSET
        } else if k == 0 {
            t + ONE_SIDED_OFFSET
        } else {
            t
        };
        Target { t, memb, point }
    }

    /// Left-limit target at an arbitrary time in `[0, T]`.
    fn left_target(&self, u: f64) -> Result<Target, OperatorError> {
        Ok(Target {
            t: u,
            memb: u - ONE_SIDED_OFFSET,
            point: self.p.grid.locate(u)?,
        })
    }

    pub(crate) fn sc_node(&self, seg: usize, k: usize) -> Result<f64, OperatorError> {
        self.eval(&self.node_target(seg, k))
    }

    /// `S_d` component for `τ_l` (0-based `l`).
    pub(crate) fn sd(&self, l: usize) -> Result<f64, OperatorError> {
        self.eval(&self.left_target(self.p.schedule.tau()[l])?)
    }

    /// `S_m` component `i` at grid node `(seg, k)`.
    pub(crate) fn sm_node(&self, i: usize, seg: usize, k: usize) -> Result<f64, OperatorError> {
        let u = self.p.sigma_nodes[i][self.p.grid.index(seg, k)];
        self.eval(&self.left_target(u)?)
    }

    fn sc_right(&self, alpha: f64) -> Result<f64, OperatorError> {
        self.eval(&Target {
            t: alpha,
            memb: alpha + ONE_SIDED_OFFSET,
            point: self.p.grid.locate_right(alpha)?,
        })
    }

    fn sc_left(&self, alpha: f64) -> Result<f64, OperatorError> {
        self.eval(&self.left_target(alpha)?)
    }

    fn apply_sc(&self) -> Result<PiecewiseFn, OperatorError> {
        let grid = self.p.grid.clone();
        let nodes: Vec<(usize, usize)> = (0..grid.segments())
            .flat_map(|s| (0..=grid.panels()).map(move |k| (s, k)))
            .collect();
        let values = nodes
            .par_iter()
            .map(|&(s, k)| self.sc_node(s, k))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PiecewiseFn::from_values(grid, values)?)
    }

    fn apply_sd(&self) -> Result<DiscreteVector, OperatorError> {
        Ok(DiscreteVector(
            (0..self.p.schedule.n_tau()).map(|l| self.sd(l)).collect::<Result<_, _>>()?,
        ))
    }

    fn apply_sm(&self) -> Result<Vec<PiecewiseFn>, OperatorError> {
        let grid = self.p.grid.clone();
        (0..self.p.schedule.n_sigma())
            .map(|i| {
                let nodes: Vec<(usize, usize)> = (0..grid.segments())
                    .flat_map(|s| (0..=grid.panels()).map(move |k| (s, k)))
                    .collect();
                let values = nodes
                    .par_iter()
                    .map(|&(s, k)| self.sm_node(i, s, k))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(PiecewiseFn::from_values(grid.clone(), values)?)
            })
            .collect()
    }
}

/// `S_c(v)` at every grid node.
pub fn apply_sc(p: &HybridProblem, v: &SolutionTriple) -> Result<PiecewiseFn, OperatorError> {
    Evaluator::new(p, v)?.apply_sc()
}

/// `S_d(v)`: the right-hand side as a left limit at each `τ_l`.
pub fn apply_sd(p: &HybridProblem, v: &SolutionTriple) -> Result<DiscreteVector, OperatorError> {
    Evaluator::new(p, v)?.apply_sd()
}

/// `S_m(v)`: the right-hand side as a left limit at `σ_i(t)` for every node `t`.
pub fn apply_sm(p: &HybridProblem, v: &SolutionTriple) -> Result<Vec<PiecewiseFn>, OperatorError> {
    Evaluator::new(p, v)?.apply_sm()
}

/// All three components of `S(v)`.
pub fn apply(p: &HybridProblem, v: &SolutionTriple) -> Result<SolutionTriple, OperatorError> {
    let ev = Evaluator::new(p, v)?;
    Ok(SolutionTriple {
        xi: ev.apply_sc()?,
        eta: ev.apply_sd()?,
        beta: ev.apply_sm()?,
    })
}

/// `S_c(v)(α^+) − S_c(v)(α^-)` at a breakpoint `α`; zero at `0` and `T`,
/// which have only one side inside the horizon.
pub fn jump_at(p: &HybridProblem, v: &SolutionTriple, alpha: f64) -> Result<f64, OperatorError> {
    if !p.schedule.is_breakpoint(alpha) {
        return Err(OperatorError::NotBreakpoint(alpha));
    }
    let part = p.grid.partition();
    let Some(l) = p.grid.breakpoint_index(alpha, MERGE_TOL) else {
        return Ok(0.0);
    };
    let a = part[l];
    let ev = Evaluator::new(p, v)?;
    Ok(ev.sc_right(a)? - ev.sc_left(a)?)
}

/// Componentwise defect `|S(v) − v|` in the unweighted sup norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub continuous: f64,
    pub discrete: f64,
    pub mixed: f64,
}

impl Residual {
    pub fn max(&self) -> f64 {
        self.continuous.max(self.discrete).max(self.mixed)
    }
}

impl fmt::Display for Residual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c = {:e}, d = {:e}, m = {:e}", self.continuous, self.discrete, self.mixed)
    }
}

pub fn residual_parts(p: &HybridProblem, v: &SolutionTriple) -> Result<Residual, OperatorError> {
    let s = apply(p, v)?;
    let [c, d, m] = p.distance(&s, v, 0.0)?;
    Ok(Residual {
        continuous: c,
        discrete: d,
        mixed: m,
    })
}

/// Largest of the three componentwise defects.
pub fn residual(p: &HybridProblem, v: &SolutionTriple) -> Result<f64, OperatorError> {
    Ok(residual_parts(p, v)?.max())
}
