//! Truncated multiple-integral Volterra series
//!
//! ```text
//! y(t) = y0(t) + Σ_{n=1}^{N} (1/n!) ∫_{[0,t]^n} f_n(t, s_1..s_n, y(s_1)..y(s_n)) ds
//! ```
//!
//! solved by Picard iteration, with the contraction coefficient of the
//! weighted sup norm and the symmetric nested-integral identity.

use crate::kernel_lang::{series_arity, symmetrize2, EvalError, KernelExpr, ParseError};
use crate::piecewise::{norm_c, Grid, PiecewiseError, PiecewiseFn, Point};
use crate::quadrature::{integrate, integrate_double, NonFinite};
use crate::solvers::{MuSource, SolveReport, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Highest order accepted without an explicit override; the cube quadrature
/// costs `O(m^N)` per node.
pub const MAX_DEFAULT_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeriesError {
    #[error("kernel {kernel}: {source}")]
    Parse { kernel: String, source: ParseError },
    #[error("kernel {kernel} failed: {source}")]
    Eval { kernel: String, source: EvalError },
    #[error("truncation order {order} exceeds {max}; pass the high-order override to allow it")]
    OrderTooHigh { order: usize, max: usize },
    #[error("at least one kernel is required")]
    NoKernels,
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("need {needed} Lipschitz constants, got {got}")]
    MissingLipschitz { needed: usize, got: usize },
    #[error("weight μ must be positive, got {0}")]
    NonPositiveMu(f64),
    #[error("kernel is not symmetric in its (s, x) pairs")]
    Asymmetric,
    #[error("kernel must have arity (t, s1, s2, x1, x2)")]
    WrongArity,
    #[error(transparent)]
    NonFinite(#[from] NonFinite),
    #[error(transparent)]
    Piecewise(#[from] PiecewiseError),
    #[error("invalid solver options: {0}")]
    Options(String),
}

#[derive(Debug, Clone)]
pub struct SeriesProblem {
    horizon: f64,
    y0: KernelExpr,
    kernels: Vec<KernelExpr>,
    lipschitz: Vec<f64>,
    grid: Arc<Grid>,
}

impl SeriesProblem {
    /// `kernels[n-1]` is `f_n` over `(t, s1..sn, x1..xn)`.
    pub fn new(
        horizon: f64,
        y0: &str,
        kernels: &[&str],
        lipschitz: Vec<f64>,
        panels: usize,
        allow_high_order: bool,
    ) -> Result<Self, SeriesError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(SeriesError::BadHorizon(horizon));
        }
        if kernels.is_empty() {
            return Err(SeriesError::NoKernels);
        }
        if kernels.len() > MAX_DEFAULT_ORDER && !allow_high_order {
            return Err(SeriesError::OrderTooHigh {
                order: kernels.len(),
                max: MAX_DEFAULT_ORDER,
            });
        }
        let y0 = KernelExpr::parse(y0, &["t"]).map_err(|source| SeriesError::Parse {
            kernel: "y0".into(),
            source,
        })?;
        let kernels = kernels
            .iter()
            .enumerate()
            .map(|(i, src)| {
                KernelExpr::parse(src, &series_arity(i + 1)).map_err(|source| SeriesError::Parse {
                    kernel: format!("f{}", i + 1),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let grid = Arc::new(Grid::uniform(horizon, panels)?);
        Ok(SeriesProblem {
            horizon,
            y0,
            kernels,
            lipschitz,
            grid,
        })
    }

    pub fn order(&self) -> usize {
        self.kernels.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    pub fn sample_y0(&self) -> Result<PiecewiseFn, SeriesError> {
        PiecewiseFn::sample(self.grid.clone(), |q| {
            self.y0.eval(&[q.t]).map_err(|source| SeriesError::Eval {
                kernel: "y0".into(),
                source,
            })
        })
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Trapezoid weights on nodes `0..=k` of a uniform grid with step `h`.
fn weights(k: usize, h: f64) -> Vec<f64> {
    if k == 0 {
        return vec![0.0];
    }
    let mut w = vec![h; k + 1];
    w[0] = 0.5 * h;
    w[k] = 0.5 * h;
    w
}

/// `Σ_{multi-index ≤ k} Π w · value(index)` over `[0..=k]^n`.
fn cube_sum(n: usize, k: usize, w: &[f64], mut value: impl FnMut(&[usize]) -> Result<f64, SeriesError>) -> Result<f64, SeriesError> {
    let mut idx = vec![0usize; n];
    let mut acc = 0.0;
    loop {
        let weight: f64 = idx.iter().map(|&i| w[i]).product();
        if weight != 0.0 {
            acc += weight * value(&idx)?;
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == n {
                return Ok(acc);
            }
            idx[d] += 1;
            if idx[d] <= k {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// `y0(t) + Σ_n (1/n!) ∫_{[0,t]^n} f_n` at every node, by tensor-product
/// trapezoid quadrature on the cube.
pub fn apply_series_operator(p: &SeriesProblem, x: &PiecewiseFn) -> Result<PiecewiseFn, SeriesError> {
    let grid = &p.grid;
    if *x.grid().as_ref() != **grid {
        return Err(PiecewiseError::GridMismatch.into());
    }
    let m = grid.panels();
    let h = grid.panel_width(0);
    let times: Vec<f64> = (0..=m).map(|k| grid.node_time(0, k)).collect();
    let xs = x.values();
    let mut out = p.sample_y0()?.values().to_vec();

    for (i, f) in p.kernels.iter().enumerate() {
        if f.is_constant_zero() {
            continue;
        }
        let n = i + 1;
        let scale = 1.0 / factorial(n);
        let name = format!("f{n}");
        let eval = |t: f64, idx: &[usize], args: &mut Vec<f64>| -> Result<f64, SeriesError> {
            args.clear();
            args.push(t);
            args.extend(idx.iter().map(|&j| times[j]));
            args.extend(idx.iter().map(|&j| xs[j]));
            f.eval(args).map_err(|source| SeriesError::Eval {
                kernel: name.clone(),
                source,
            })
        };
        let mut args = Vec::with_capacity(1 + 2 * n);
        if f.references("t") {
            for (k, o) in out.iter_mut().enumerate() {
                let w = weights(k, h);
                *o += scale * cube_sum(n, k, &w, |idx| eval(times[k], idx, &mut args))?;
            }
        } else {
            // tabulate f_n once on the full cube
            let side = m + 1;
            let total = side.pow(n as u32);
            let mut table = Vec::with_capacity(total);
            let mut idx = vec![0usize; n];
            for flat in 0..total {
                let mut r = flat;
                for d in idx.iter_mut() {
                    *d = r % side;
                    r /= side;
                }
                table.push(eval(0.0, &idx, &mut args)?);
            }
            for (k, o) in out.iter_mut().enumerate() {
                let w = weights(k, h);
                let sum = cube_sum(n, k, &w, |idx| {
                    let flat = idx.iter().rev().fold(0, |a, &j| a * side + j);
                    Ok(table[flat])
                })?;
                *o += scale * sum;
            }
        }
    }
    if let Some(k) = out.iter().position(|v| !v.is_finite()) {
        return Err(NonFinite(times[k]).into());
    }
    Ok(PiecewiseFn::from_values(grid.clone(), out)?)
}

/// `((1 − e^{−μT})/μ) · Σ_{m=0}^{N−1} T^m/m! · L_{m+1}`.
pub fn series_contraction_coefficient(l: &[f64], horizon: f64, mu: f64, order: usize) -> Result<f64, SeriesError> {
    if !(mu > 0.0) {
        return Err(SeriesError::NonPositiveMu(mu));
    }
    if l.len() < order {
        return Err(SeriesError::MissingLipschitz {
            needed: order,
            got: l.len(),
        });
    }
    let c = -(-mu * horizon).exp_m1() / mu;
    let sum: f64 = (0..order).map(|m| horizon.powi(m as i32) / factorial(m) * l[m]).sum();
    Ok(c * sum)
}

/// Smallest weight (to 1% relative) with contraction coefficient below one,
/// searched by doubling from `mu_min` up to `mu_max`.
pub fn series_find_mu(l: &[f64], horizon: f64, order: usize, mu_min: f64, mu_max: f64) -> Result<Option<f64>, SeriesError> {
    let ok = |mu: f64| series_contraction_coefficient(l, horizon, mu, order).map(|c| c < 1.0);
    if ok(mu_min)? {
        return Ok(Some(mu_min));
    }
    let mut lo = mu_min;
    let mut hi = None;
    while lo < mu_max {
        let next = (2.0 * lo).min(mu_max);
        if ok(next)? {
            hi = Some(next);
            break;
        }
        lo = next;
    }
    let Some(mut hi) = hi else { return Ok(None) };
    while (hi - lo) / hi > 0.01 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Picard iteration of [`apply_series_operator`] from `y0`.
pub fn series_solve(p: &SeriesProblem, opts: &SolverOptions) -> Result<(PiecewiseFn, SolveReport), SeriesError> {
    if !(opts.tol > 0.0) || opts.kmax < 1 {
        return Err(SeriesError::Options("tol must be positive and kmax at least 1".into()));
    }
    let (mu, mu_source) = match opts.mu {
        Some(mu) => (mu, MuSource::Explicit),
        None if p.lipschitz.len() >= p.order() => {
            match series_find_mu(&p.lipschitz, p.horizon, p.order(), 0.01, 1e4)? {
                Some(mu) => (mu, MuSource::Contraction),
                None => (crate::solvers::FALLBACK_MU, MuSource::Fallback),
            }
        }
        None => (crate::solvers::FALLBACK_MU, MuSource::Fallback),
    };
    let mut x = p.sample_y0()?;
    let mut deltas = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.kmax {
        let next = apply_series_operator(p, &x)?;
        let diff = next.sub(&x)?;
        let weighted = norm_c(&diff, mu);
        deltas.push([weighted, 0.0, 0.0]);
        x = next;
        iterations += 1;
        if weighted <= opts.tol && diff.sup() <= opts.tol {
            converged = true;
            break;
        }
    }
    let residual = apply_series_operator(p, &x)?.sub(&x)?.sup();
    Ok((
        x,
        SolveReport {
            method: "series",
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

/// True if `f2` equals its symmetrization on 64 seeded random bindings in
/// `[-2, 2]^5` (relative tolerance 1e-12).
pub fn is_symmetric2(f2: &KernelExpr) -> Result<bool, SeriesError> {
    let sym = symmetrize2(f2).map_err(|_| SeriesError::WrongArity)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..64 {
        let b: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let (Ok(a), Ok(s)) = (f2.eval(&b), sym.eval(&b)) else {
            continue;
        };
        if (a - s).abs() > 1e-12 * (1.0 + a.abs()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `((1/2!)·∫_{[0,t]²} f2, ∫_0^t ∫_0^{s2} f2 ds1 ds2)` for a symmetric `f2`
/// over `(t, s1, s2, x1, x2)`, both by trapezoid quadrature on `x`'s grid.
pub fn nested_equals_cube(f2: &KernelExpr, x: &PiecewiseFn, t: f64) -> Result<(f64, f64), SeriesError> {
    if f2.arity() != series_arity(2).as_slice() {
        return Err(SeriesError::WrongArity);
    }
    if !is_symmetric2(f2)? {
        return Err(SeriesError::Asymmetric);
    }
    let grid = x.grid();
    let end = grid.locate(t)?;
    let f = |a: &Point, b: &Point| -> Result<f64, SeriesError> {
        f2.eval(&[t, a.t, b.t, x.value_at(a), x.value_at(b)])
            .map_err(|source| SeriesError::Eval {
                kernel: "f2".into(),
                source,
            })
    };
    let cube = integrate(grid, &end, |a| integrate(grid, &end, |b| f(a, b)))?;
    let nested = integrate_double(grid, &end, |s2, s1| f(s1, s2))?;
    Ok((0.5 * cube, nested))
}
