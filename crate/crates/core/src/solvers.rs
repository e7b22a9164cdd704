//! Global Picard iteration on `(ξ, η, β)` and the segment-by-segment solver
//! that marches across breakpoints with explicit jumps.

use crate::contraction::{find_mu, MuCriterion, MuSearch, ScheduleCounts, DEFAULT_MU_MAX, DEFAULT_MU_MIN};
use crate::hybrid_operator::{apply, jump_at, residual, Evaluator, HybridProblem, OperatorError, SolutionTriple};
use crate::piecewise::{DiscreteVector, PiecewiseFn};
use rayon::prelude::*;
use serde::Serialize;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_KMAX: usize = 200;
/// Weight used when no Lipschitz data (or no contracting weight) is available.
pub const FALLBACK_MU: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("invalid solver options: {0}")]
    Options(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Weight for the convergence deltas; chosen automatically when `None`.
    pub mu: Option<f64>,
    pub tol: f64,
    pub kmax: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mu: None,
            tol: DEFAULT_TOL,
            kmax: DEFAULT_KMAX,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<(), SolveError> {
        if !(self.tol > 0.0) {
            return Err(SolveError::Options(format!("tol must be positive, got {}", self.tol)));
        }
        if self.kmax < 1 {
            return Err(SolveError::Options("kmax must be at least 1".into()));
        }
        if let Some(mu) = self.mu {
            if !(mu >= 0.0 && mu.is_finite()) {
                return Err(SolveError::Options(format!("mu must be nonnegative, got {mu}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MuSource {
    /// Given in the solver options.
    Explicit,
    /// Smallest contracting weight of the majorant matrix.
    Contraction,
    /// No Lipschitz data, or no contracting weight in range.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub method: &'static str,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub mu: f64,
    pub mu_source: MuSource,
    /// Weighted distances `[c, d, m]` between successive iterates.
    pub deltas: Vec<[f64; 3]>,
    /// Sweeps spent on each segment (segment solver only).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub segment_iterations: Vec<usize>,
}

/// Weight for convergence monitoring: explicit, else the contracting weight
/// of the majorant matrix, else [`FALLBACK_MU`].
pub fn choose_mu(p: &HybridProblem, opts: &SolverOptions) -> (f64, MuSource) {
    if let Some(mu) = opts.mu {
        return (mu, MuSource::Explicit);
    }
    if let Some(lip) = p.lipschitz() {
        let counts = ScheduleCounts::from(p.schedule());
        if let Ok(MuSearch::Found { mu, .. }) = find_mu(lip, &counts, DEFAULT_MU_MIN, DEFAULT_MU_MAX, MuCriterion::Contractive) {
            return (mu, MuSource::Contraction);
        }
    }
    (FALLBACK_MU, MuSource::Fallback)
}

/// `ξ_0 = x0` on the grid, `η_i = ξ_0(τ_i^-)`, `β_i(t) = ξ_0(σ_i(t)^-)`.
pub fn default_init(p: &HybridProblem) -> Result<SolutionTriple, OperatorError> {
    let grid = p.grid().clone();
    let x0 = &p.kernels().x0;
    let xi = PiecewiseFn::sample(grid.clone(), |q| {
        x0.eval(&[q.t]).map_err(|source| OperatorError::Eval { kernel: "x0", source })
    })?;
    let eta = p
        .schedule()
        .tau()
        .iter()
        .map(|&t| xi.eval_left(t))
        .collect::<Result<Vec<_>, _>>()?;
    let beta = p
        .sigma_nodes()
        .iter()
        .map(|sig| {
            let vals = sig.iter().map(|&u| xi.eval_left(u)).collect::<Result<Vec<_>, _>>()?;
            Ok(PiecewiseFn::from_values(grid.clone(), vals)?)
        })
        .collect::<Result<Vec<_>, OperatorError>>()?;
    Ok(SolutionTriple {
        xi,
        eta: DiscreteVector(eta),
        beta,
    })
}

fn max3(v: &[f64; 3]) -> f64 {
    v[0].max(v[1]).max(v[2])
}

/// Iterate `v_{k+1} = S(v_k)` until successive iterates differ by at most
/// `tol` both in the weighted norms and unweighted, or `kmax` is reached.
pub fn picard_solve(
    p: &HybridProblem,
    init: Option<SolutionTriple>,
    opts: &SolverOptions,
) -> Result<(SolutionTriple, SolveReport), SolveError> {
    opts.validate()?;
    let (mu, mu_source) = choose_mu(p, opts);
    let mut v = match init {
        Some(v) => {
            p.conforms(&v)?;
            v
        }
        None => default_init(p)?,
    };
    let mut deltas = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.kmax {
        let next = apply(p, &v)?;
        let weighted = p.distance(&next, &v, mu)?;
        let plain = p.distance(&next, &v, 0.0)?;
        deltas.push(weighted);
        v = next;
        iterations += 1;
        if max3(&weighted) <= opts.tol && max3(&plain) <= opts.tol {
            converged = true;
            break;
        }
    }
    let residual = residual(p, &v)?;
    Ok((
        v,
        SolveReport {
            method: "picard",
            iterations,
            converged,
            residual,
            mu,
            mu_source,
            deltas,
            segment_iterations: Vec::new(),
        },
    ))
}

/// Solve segment by segment: on `[α_l, α_{l+1}]` the equation has no
/// impulses inside, so Picard iteration runs over that segment's nodes
/// only, together with the `η_i` of the impulse at `α_{l+1}` and the `β_i`
/// nodes whose `σ_i(t)` falls in the segment. The first node of the next
/// segment is the converged left limit plus [`jump_at`].
pub fn segment_solve(p: &HybridProblem, opts: &SolverOptions) -> Result<(SolutionTriple, SolveReport), SolveError> {
    opts.validate()?;
    let (mu, mu_source) = choose_mu(p, opts);
    let grid = p.grid().clone();
    let m = grid.panels();
    let tau = p.schedule().tau().to_vec();
    let mut v = default_init(p)?;

    let eta_owner = tau
        .iter()
        .map(|&t| grid.locate(t).map(|q| q.seg))
        .collect::<Result<Vec<_>, _>>()
        .map_err(OperatorError::from)?;
    let mut beta_owned: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); grid.segments()];
    for (i, sig) in p.sigma_nodes().iter().enumerate() {
        for seg in 0..grid.segments() {
            for k in 0..=m {
                let u = sig[grid.index(seg, k)];
                let owner = grid.locate(u).map_err(OperatorError::from)?.seg;
                beta_owned[owner].push((i, seg, k));
            }
        }
    }

    let mut deltas = Vec::new();
    let mut segment_iterations = Vec::new();
    let mut converged = true;
    #[allow(clippy::needless_range_loop)]
    for l in 0..grid.segments() {
        let first = if l == 0 {
            0
        } else {
            let alpha = grid.partition()[l];
            let left = v.xi.at_node(l - 1, m);
            let jump = jump_at(p, &v, alpha)?;
            v.xi.values_mut()[grid.index(l, 0)] = left + jump;
            1
        };
        let etas: Vec<usize> = (0..tau.len()).filter(|&i| eta_owner[i] == l).collect();
        let betas = &beta_owned[l];

        let mut seg_converged = false;
        let mut sweeps = 0;
        while sweeps < opts.kmax {
            let ev = Evaluator::new(p, &v)?;
            let xi_new = (first..=m)
                .into_par_iter()
                .map(|k| ev.sc_node(l, k))
                .collect::<Result<Vec<_>, _>>()?;
            let eta_new = etas.iter().map(|&i| ev.sd(i)).collect::<Result<Vec<_>, _>>()?;
            let beta_new = betas
                .par_iter()
                .map(|&(i, seg, k)| ev.sm_node(i, seg, k))
                .collect::<Result<Vec<_>, _>>()?;
            drop(ev);

            let mut weighted = [0.0f64; 3];
            let mut plain = [0.0f64; 3];
            let mut track = |c: usize, d: f64, at: f64| {
                plain[c] = plain[c].max(d.abs());
                weighted[c] = weighted[c].max((-mu * at).exp() * d.abs());
            };
            for (k, val) in (first..=m).zip(xi_new) {
                let idx = grid.index(l, k);
                track(0, val - v.xi.values()[idx], grid.node_time(l, k));
                v.xi.values_mut()[idx] = val;
            }
            for (&i, val) in etas.iter().zip(eta_new) {
                track(1, val - v.eta.0[i], tau[i]);
                v.eta.0[i] = val;
            }
            for (&(i, seg, k), val) in betas.iter().zip(beta_new) {
                let idx = grid.index(seg, k);
                track(2, val - v.beta[i].values()[idx], p.sigma_nodes()[i][idx]);
                v.beta[i].values_mut()[idx] = val;
            }
            deltas.push(weighted);
            sweeps += 1;
            if max3(&weighted) <= opts.tol && max3(&plain) <= opts.tol {
                seg_converged = true;
                break;
            }
        }
        converged &= seg_converged;
        segment_iterations.push(sweeps);
    }
    let residual = residual(p, &v)?;
    Ok((
        v,
        SolveReport {
            method: "segment",
            iterations: segment_iterations.iter().sum(),
            converged,
            residual,
            mu,
            mu_source,
            deltas,
            segment_iterations,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid_operator::ProblemBuilder;

    fn exp_problem() -> HybridProblem {
        ProblemBuilder::new(1.0).kernel("x0", "1").kernel("f1", "x").build().unwrap()
    }

    #[test]
    fn exponential_closed_form() {
        let (v, r) = picard_solve(&exp_problem(), None, &SolverOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.mu_source, MuSource::Fallback);
        assert!((v.xi.eval(1.0).unwrap() - 1f64.exp()).abs() < 1e-4);
        assert!(r.residual < 5e-5);
    }

    #[test]
    fn fixed_impulse_exact_in_two_iterations() {
        let p = ProblemBuilder::new(2.0)
            .kernel("x0", "1")
            .kernel("G1", "1")
            .tau(&[1.0])
            .panels(16)
            .build()
            .unwrap();
        let (v, r) = picard_solve(&p, None, &SolverOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 2);
        assert_eq!(v.xi.eval(0.5).unwrap(), 1.0);
        assert_eq!(v.xi.eval(1.0).unwrap(), 1.0);
        assert_eq!(v.xi.eval_right(1.0).unwrap(), 2.0);
        assert_eq!(v.xi.eval(2.0).unwrap(), 2.0);
    }

    #[test]
    fn cosh_closed_form() {
        let p = ProblemBuilder::new(1.0).kernel("x0", "1").kernel("f2", "x1").build().unwrap();
        let (v, r) = picard_solve(&p, None, &SolverOptions::default()).unwrap();
        assert!(r.converged);
        assert!((v.xi.eval(1.0).unwrap() - 1f64.cosh()).abs() < 1e-4);
    }

    #[test]
    fn default_init_examples() {
        let p = ProblemBuilder::new(1.0)
            .kernel("x0", "1")
            .tau(&[0.5])
            .sigma(&["t/2"])
            .panels(8)
            .build()
            .unwrap();
        let v = default_init(&p).unwrap();
        assert!(v.xi.values().iter().all(|x| *x == 1.0));
        assert_eq!(v.eta.0, vec![1.0]);
        assert!(v.beta[0].values().iter().all(|x| *x == 1.0));

        let p = ProblemBuilder::new(1.0)
            .kernel("x0", "t")
            .tau(&[0.5])
            .sigma(&["t/2"])
            .panels(8)
            .build()
            .unwrap();
        let v = default_init(&p).unwrap();
        assert_eq!(v.eta.0, vec![0.5]);
        for t in [0.0, 0.25, 0.8, 1.0] {
            assert!((v.beta[0].eval(t).unwrap() - t / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn segment_matches_picard_without_impulses() {
        let p = exp_problem();
        let (a, _) = picard_solve(&p, None, &SolverOptions::default()).unwrap();
        let (b, r) = segment_solve(&p, &SolverOptions::default()).unwrap();
        assert!(r.converged);
        let d = a.xi.sub(&b.xi).unwrap().sup();
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn segment_jump_is_exact() {
        let p = ProblemBuilder::new(2.0)
            .kernel("x0", "1")
            .kernel("G1", "1")
            .tau(&[1.0])
            .panels(16)
            .build()
            .unwrap();
        let (v, _) = segment_solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(v.xi.eval_right(1.0).unwrap() - v.xi.eval_left(1.0).unwrap(), 1.0);
    }

    #[test]
    fn segment_matches_picard_with_moving_impulse() {
        let p = ProblemBuilder::new(1.0)
            .kernel("x0", "1")
            .kernel("f1", "0.5*x")
            .kernel("G3", "1")
            .sigma(&["t/2"])
            .tau(&[0.5])
            .panels(64)
            .build()
            .unwrap();
        let (a, ra) = picard_solve(&p, None, &SolverOptions::default()).unwrap();
        let (b, rb) = segment_solve(&p, &SolverOptions::default()).unwrap();
        assert!(ra.converged && rb.converged);
        assert!(a.xi.sub(&b.xi).unwrap().sup() < 1e-6);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let opts = SolverOptions {
            kmax: 1,
            ..Default::default()
        };
        let (_, r) = picard_solve(&exp_problem(), None, &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
        let bad = SolverOptions {
            tol: 0.0,
            ..Default::default()
        };
        assert!(matches!(picard_solve(&exp_problem(), None, &bad), Err(SolveError::Options(_))));
    }
}
