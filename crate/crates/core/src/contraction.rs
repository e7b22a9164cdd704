//! Matrix-valued contraction analysis: the unit-disk criterion for 3×3
//! matrices, an independent eigenvalue oracle, majorant matrices `A(μ)` for
//! the hybrid operator, and the search for a contracting weight `μ`.

use crate::kernel_lang::LipschitzSet;
use crate::schedule::ImpulseSchedule;
use num_complex::Complex64;
use serde::Serialize;

/// Criterion quantities within this distance of zero are reported as
/// inconclusive.
pub const CRITERION_BAND: f64 = 1e-12;
/// Discriminant magnitude below which the cubic is treated as having a
/// repeated root.
const DISC_EPS: f64 = 1e-14;
pub const DEFAULT_MU_MIN: f64 = 0.01;
pub const DEFAULT_MU_MAX: f64 = 1e4;
/// Tolerance of the limit-regime μ search.
pub const DEFAULT_LIMIT_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContractionError {
    #[error("weight μ must be positive and finite, got {0}")]
    NonPositiveMu(f64),
    #[error("separation h must be positive, got {0}")]
    NonPositiveH(f64),
    #[error("horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("need 0 < μ_min < μ_max, got [{0}, {1}]")]
    BadRange(f64, f64),
    #[error("Lipschitz constants must be nonnegative and finite")]
    NegativeConstant,
}

/// Coefficients `(Tr, S2, D)` of `λ³ − Tr·λ² + S2·λ − D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Invariants {
    pub trace: f64,
    pub s2: f64,
    pub det: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Contractive,
    NotContractive,
    Inconclusive,
}

/// Unit-disk criterion outcome. `contractive` is the strict reading (all
/// four quantities positive); `verdict` additionally flags quantities
/// within [`CRITERION_BAND`] of zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriterionReport {
    pub quantities: [f64; 4],
    pub contractive: bool,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenReport {
    pub eigenvalues: Vec<(f64, f64)>,
    pub spectral_radius: f64,
    pub contractive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionMatrix {
    pub a: [[f64; 3]; 3],
}

impl ContractionMatrix {
    pub fn new(a: [[f64; 3]; 3]) -> Self {
        ContractionMatrix { a }
    }

    pub fn zero() -> Self {
        ContractionMatrix { a: [[0.0; 3]; 3] }
    }

    pub fn from_row_major(v: &[f64; 9]) -> Self {
        let mut a = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = v[3 * i + j];
            }
        }
        ContractionMatrix { a }
    }

    pub fn invariants(&self) -> Invariants {
        let a = &self.a;
        let trace = a[0][0] + a[1][1] + a[2][2];
        let s2 = a[0][0] * a[1][1] + a[1][1] * a[2][2] + a[2][2] * a[0][0]
            - a[0][2] * a[2][0]
            - a[1][2] * a[2][1]
            - a[0][1] * a[1][0];
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        Invariants { trace, s2, det }
    }

    /// The four sign conditions of the unit-disk test, obtained by mapping
    /// the disk onto the left half-plane and applying Routh–Hurwitz to
    /// `p0 ω³ + p1 ω² + p2 ω + p3`:
    ///
    /// `p0 = 1 − Tr + S2 − D`, `p1 = 3 − Tr − S2 + 3D`,
    /// `p3 = 1 + Tr + S2 + D`, `p1·p2 − p0·p3 = 8 − 8·S2 + 8·D·Tr − 8·D²`.
    pub fn criterion(&self) -> CriterionReport {
        let Invariants { trace: t, s2: s, det: d } = self.invariants();
        let q = [
            1.0 - t + s - d,
            3.0 - s + 3.0 * d - t,
            1.0 + t + s + d,
            8.0 - 8.0 * s - 8.0 * d * d + 8.0 * d * t,
        ];
        let contractive = q.iter().all(|v| *v > 0.0);
        let verdict = if q.iter().all(|v| *v > CRITERION_BAND) {
            Verdict::Contractive
        } else if q.iter().any(|v| *v < -CRITERION_BAND) {
            Verdict::NotContractive
        } else {
            Verdict::Inconclusive
        };
        CriterionReport {
            quantities: q,
            contractive,
            verdict,
        }
    }

    /// Roots of the characteristic polynomial in closed form, polished by a
    /// few complex Newton steps.
    pub fn eigenvalues(&self) -> [Complex64; 3] {
        let inv = self.invariants();
        cubic_roots(-inv.trace, inv.s2, -inv.det)
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Independent oracle: contractive iff every eigenvalue has modulus
    /// strictly below one.
    pub fn eigen(&self) -> EigenReport {
        let ev = self.eigenvalues();
        let r = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
        EigenReport {
            eigenvalues: ev.iter().map(|z| (z.re, z.im)).collect(),
            spectral_radius: r,
            contractive: r < 1.0,
        }
    }

    /// `A·x` for a nonnegative 3-vector.
    pub fn mul_vec(&self, x: &[f64; 3]) -> [f64; 3] {
        let mut y = [0.0; 3];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..3).map(|j| self.a[i][j] * x[j]).sum();
        }
        y
    }
}

/// Roots of `λ³ + a·λ² + b·λ + c`.
pub fn cubic_roots(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let re = |x: f64| Complex64::new(x, 0.0);

    let ys: [Complex64; 3] = if disc.abs() < DISC_EPS {
        if p.abs() < DISC_EPS {
            [re(0.0); 3]
        } else {
            let y1 = 3.0 * q / p;
            let y2 = -1.5 * q / p;
            [re(y1), re(y2), re(y2)]
        }
    } else if disc > 0.0 {
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        let half = -(u + v) / 2.0;
        let im = (3f64.sqrt() / 2.0) * (u - v);
        [re(u + v), Complex64::new(half, im), Complex64::new(half, -im)]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let tau = 2.0 * std::f64::consts::PI / 3.0;
        [re(m * theta.cos()), re(m * (theta - tau).cos()), re(m * (theta - 2.0 * tau).cos())]
    };

    let poly = |z: Complex64| ((z + a) * z + b) * z + c;
    let dpoly = |z: Complex64| (3.0 * z + 2.0 * a) * z + b;
    ys.map(|y| {
        let mut z = y - shift;
        for _ in 0..4 {
            let d = dpoly(z);
            if d.norm() < 1e-300 {
                break;
            }
            let next = z - poly(z) / d;
            if !(poly(next).norm() < poly(z).norm()) {
                break;
            }
            z = next;
        }
        z
    })
}

/// Problem sizes entering the majorant matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleCounts {
    pub n_tau: usize,
    pub n_sigma: usize,
    pub h: f64,
    pub horizon: f64,
}

impl From<&ImpulseSchedule> for ScheduleCounts {
    fn from(s: &ImpulseSchedule) -> Self {
        ScheduleCounts {
            n_tau: s.n_tau(),
            n_sigma: s.n_sigma(),
            h: s.h(),
            horizon: s.horizon(),
        }
    }
}

/// Upper bounds `A(μ)` such that the weighted distances of `S(v¹)` and
/// `S(v²)` are componentwise at most `A(μ)` times those of `v¹` and `v²`.
///
/// With `L2 = max(L21, L22)`, `LG2 = max(LG21, LG22)`,
/// `LG3 = max(LG31, LG32)`, `Lg = max(Lg1, Lg2, Lg3)`, `q = e^{−μh}`,
/// `c = (1 − e^{−μT})/μ` and `K = LG1 + 2·Nτ·LG2 + Lg·Nσ·T + LG3·Nσ`:
///
/// ```text
/// a11 = a21 = a31 = (L1 + 2·L2·T + Lg·Nσ·Nτ)·c
/// a12 = a32 = K/(1 − q)            a22 = K·q/(1 − q)
/// a13 = Nσ·Nτ·(Lg·T + LG3)         a23 = Nσ·Nτ·(Lg·T + LG3)·q
/// a33 = Lg·Nσ·Nτ·c + LG3·Nσ·Nτ·q/(1 − q)
/// ```
///
/// The bounds rely on the separation hypothesis (consecutive impulse times
/// at least `h` apart, moving times at least `h` before any later fixed
/// time) and on delay-type moving times (`σ_i(s) ≤ s`).
pub fn majorant_bounds(lip: &LipschitzSet, counts: &ScheduleCounts, mu: f64) -> Result<ContractionMatrix, ContractionError> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(ContractionError::NonPositiveMu(mu));
    }
    if !(counts.h > 0.0) {
        return Err(ContractionError::NonPositiveH(counts.h));
    }
    if !(counts.horizon > 0.0) {
        return Err(ContractionError::NonPositiveHorizon(counts.horizon));
    }
    if !lip.all_nonnegative() {
        return Err(ContractionError::NegativeConstant);
    }
    let t = counts.horizon;
    let nt = counts.n_tau as f64;
    let ns = counts.n_sigma as f64;
    let (l1, l2, lg1, lg2, lg3, lg) = (lip.l1, lip.l2(), lip.lg1, lip.lg2(), lip.lg3(), lip.lg());
    let q = (-mu * counts.h).exp();
    let geo = 1.0 / (-(-mu * counts.h).exp_m1());
    let c = -(-mu * t).exp_m1() / mu;
    let k = lg1 + 2.0 * nt * lg2 + lg * ns * t + lg3 * ns;
    let cont = (l1 + 2.0 * l2 * t + lg * ns * nt) * c;
    let beta_direct = ns * nt * (lg * t + lg3);
    Ok(ContractionMatrix::new([
        [cont, k * geo, beta_direct],
        [cont, k * q * geo, beta_direct * q],
        [cont, k * geo, lg * ns * nt * c + lg3 * ns * nt * q * geo],
    ]))
}

/// `(a12, a13, a32)` in the limit `μ → ∞`.
pub fn majorant_limits(lip: &LipschitzSet, counts: &ScheduleCounts) -> [f64; 3] {
    let t = counts.horizon;
    let nt = counts.n_tau as f64;
    let ns = counts.n_sigma as f64;
    let k = lip.lg1 + 2.0 * nt * lip.lg2() + lip.lg() * ns * t + lip.lg3() * ns;
    [k, ns * nt * (lip.lg() * t + lip.lg3()), k]
}

/// Entries `(1,1), (2,1), (2,2), (2,3), (3,1), (3,3)` (1-based), which vanish
/// as `μ → ∞`.
pub const VANISHING_ENTRIES: [(usize, usize); 6] = [(0, 0), (1, 0), (1, 1), (1, 2), (2, 0), (2, 2)];

/// What `find_mu` asks of `A(μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MuCriterion {
    /// The unit-disk criterion holds.
    Contractive,
    /// `|Tr|, |S2|, |D|` and the six vanishing entries are all below `eps`.
    Limit { eps: f64 },
}

impl MuCriterion {
    fn accepts(&self, a: &ContractionMatrix) -> bool {
        match *self {
            MuCriterion::Contractive => a.criterion().contractive,
            MuCriterion::Limit { eps } => {
                let inv = a.invariants();
                inv.trace.abs() < eps
                    && inv.s2.abs() < eps
                    && inv.det.abs() < eps
                    && VANISHING_ENTRIES.iter().all(|&(i, j)| a.a[i][j] < eps)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MuSearch {
    Found { mu: f64, matrix: ContractionMatrix },
    NotFound { mu_max: f64 },
}

impl MuSearch {
    pub fn mu(&self) -> Option<f64> {
        match self {
            MuSearch::Found { mu, .. } => Some(*mu),
            MuSearch::NotFound { .. } => None,
        }
    }
}

/// Doubling search from `mu_min` for the first accepted `μ`, then bisection
/// downward until the bracket is within 1% relative width; the returned `μ`
/// is always an accepted one.
pub fn find_mu(
    lip: &LipschitzSet,
    counts: &ScheduleCounts,
    mu_min: f64,
    mu_max: f64,
    mode: MuCriterion,
) -> Result<MuSearch, ContractionError> {
    if !(mu_min > 0.0 && mu_min < mu_max && mu_max.is_finite()) {
        return Err(ContractionError::BadRange(mu_min, mu_max));
    }
    let ok = |mu: f64| -> Result<(bool, ContractionMatrix), ContractionError> {
        let a = majorant_bounds(lip, counts, mu)?;
        Ok((mode.accepts(&a), a))
    };
    let (pass, a) = ok(mu_min)?;
    if pass {
        return Ok(MuSearch::Found { mu: mu_min, matrix: a });
    }
    let mut lo = mu_min;
    let mut hi = None;
    while lo < mu_max {
        let next = (2.0 * lo).min(mu_max);
        let (pass, a) = ok(next)?;
        if pass {
            hi = Some((next, a));
            break;
        }
        lo = next;
    }
    let Some((mut hi, mut best)) = hi else {
        return Ok(MuSearch::NotFound { mu_max });
    };
    while (hi - lo) / hi > 0.01 {
        let mid = 0.5 * (lo + hi);
        let (pass, a) = ok(mid)?;
        if pass {
            hi = mid;
            best = a;
        } else {
            lo = mid;
        }
    }
    Ok(MuSearch::Found { mu: hi, matrix: best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(v: f64) -> ContractionMatrix {
        ContractionMatrix::new([[v, 0.0, 0.0], [0.0, v, 0.0], [0.0, 0.0, v]])
    }

    fn companion() -> ContractionMatrix {
        ContractionMatrix::new([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.9, 0.0, 0.0]])
    }

    #[test]
    fn invariants_examples() {
        let i = diag(0.5).invariants();
        assert_eq!((i.trace, i.s2, i.det), (1.5, 0.75, 0.125));
        let i = ContractionMatrix::zero().invariants();
        assert_eq!((i.trace, i.s2, i.det), (0.0, 0.0, 0.0));
        let i = companion().invariants();
        assert_eq!((i.trace, i.s2, i.det), (0.0, 0.0, 0.9));
    }

    #[test]
    fn criterion_examples() {
        let z = ContractionMatrix::zero().criterion();
        assert!(z.contractive);
        assert_eq!(z.quantities, [1.0, 3.0, 1.0, 8.0]);
        let d = diag(0.5).criterion();
        assert!(d.contractive);
        let want = [0.125, 1.125, 3.375, 3.375];
        for (q, w) in d.quantities.iter().zip(want) {
            assert!((q - w).abs() < 1e-14, "{q} vs {w}");
        }
        let bad = ContractionMatrix::new([[2.0, 0.0, 0.0], [0.0; 3], [0.0; 3]]).criterion();
        assert!(!bad.contractive);
        assert_eq!(bad.quantities[0], -1.0);
        assert_eq!(bad.verdict, Verdict::NotContractive);
        assert_eq!(diag(1.0).criterion().verdict, Verdict::Inconclusive);
    }

    #[test]
    fn eigen_examples() {
        let e = diag(0.5).eigen();
        assert!((e.spectral_radius - 0.5).abs() < 1e-12 && e.contractive);
        let e = companion().eigen();
        assert!((e.spectral_radius - 0.9f64.powf(1.0 / 3.0)).abs() < 1e-12 && e.contractive);
        let e = diag(1.0).eigen();
        assert!((e.spectral_radius - 1.0).abs() < 1e-12);
        assert!(!ContractionMatrix::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).eigen().contractive);
    }

    #[test]
    fn cubic_roots_satisfy_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let (a, b, c) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            for z in cubic_roots(a, b, c) {
                let r = ((z + a) * z + b) * z + c;
                assert!(r.norm() < 1e-9 * (1.0 + z.norm().powi(3)), "{a} {b} {c}: {z}");
            }
        }
        // repeated roots: (λ − 1)²(λ + 2)
        let r = cubic_roots(0.0, -3.0, 2.0);
        let mut re: Vec<f64> = r.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 2.0).abs() < 1e-7 && (re[1] - 1.0).abs() < 1e-7 && (re[2] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn criterion_agrees_with_oracle_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let v: [f64; 9] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
            let m = ContractionMatrix::from_row_major(&v);
            let e = m.eigen();
            if (e.spectral_radius - 1.0).abs() > 1e-9 {
                assert_eq!(m.criterion().contractive, e.contractive, "{v:?}");
            }
        }
    }

    fn counts(n_tau: usize, n_sigma: usize, h: f64, horizon: f64) -> ScheduleCounts {
        ScheduleCounts {
            n_tau,
            n_sigma,
            h,
            horizon,
        }
    }

    #[test]
    fn bounds_examples() {
        let c = counts(2, 1, 0.2, 1.0);
        let z = majorant_bounds(&LipschitzSet::default(), &c, 3.0).unwrap();
        assert_eq!(z, ContractionMatrix::zero());
        let lip = LipschitzSet {
            l1: 1.0,
            ..Default::default()
        };
        let a = majorant_bounds(&lip, &counts(0, 0, 0.5, 1.0), 1.0).unwrap();
        assert!((a.a[0][0] - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert_eq!(a.a[1][1], 0.0);
        assert_eq!(a.a[0][1], 0.0);
        assert!(matches!(majorant_bounds(&lip, &c, 0.0), Err(ContractionError::NonPositiveMu(_))));
        assert!(matches!(
            majorant_bounds(&lip, &counts(1, 0, 0.0, 1.0), 1.0),
            Err(ContractionError::NonPositiveH(_))
        ));
    }

    fn rich() -> LipschitzSet {
        LipschitzSet {
            l1: 0.7,
            l21: 0.3,
            l22: 0.4,
            lg1: 0.5,
            lg21: 0.2,
            lg22: 0.1,
            lg31: 0.3,
            lg32: 0.2,
            lsmall_g1: 0.25,
            lsmall_g2: 0.1,
            lsmall_g3: 0.2,
            ..Default::default()
        }
    }

    #[test]
    fn vanishing_entries_are_monotone_in_mu() {
        let c = counts(2, 2, 0.1, 1.5);
        let mut prev = majorant_bounds(&rich(), &c, 0.1).unwrap();
        for k in 1..60 {
            let mu = 0.1 * 1.3f64.powi(k);
            let a = majorant_bounds(&rich(), &c, mu).unwrap();
            for &(i, j) in &VANISHING_ENTRIES {
                assert!(a.a[i][j] <= prev.a[i][j] * (1.0 + 1e-12), "({i},{j}) at {mu}");
            }
            prev = a;
        }
        let lim = majorant_limits(&rich(), &c);
        assert!((prev.a[0][1] - lim[0]).abs() < 1e-9);
        assert!((prev.a[0][2] - lim[1]).abs() < 1e-15);
    }

    #[test]
    fn find_mu_examples() {
        let c = counts(1, 1, 0.1, 1.0);
        let r = find_mu(&LipschitzSet::default(), &c, 0.01, 1e4, MuCriterion::Contractive).unwrap();
        assert_eq!(r.mu(), Some(0.01));
        let l1 = LipschitzSet {
            l1: 1.0,
            ..Default::default()
        };
        let r = find_mu(&l1, &counts(0, 0, 0.1, 1.0), 0.01, 1e4, MuCriterion::Contractive).unwrap();
        assert_eq!(r.mu(), Some(0.01));

        let big = LipschitzSet {
            lsmall_g1: 1e3,
            ..Default::default()
        };
        let r = find_mu(&big, &c, 0.01, 1e4, MuCriterion::Contractive).unwrap();
        assert!(!majorant_bounds(&big, &c, 1e4).unwrap().criterion().contractive);
        assert_eq!(r, MuSearch::NotFound { mu_max: 1e4 });

        let r = find_mu(&rich(), &counts(2, 1, 0.2, 1.0), 0.01, 1e4, MuCriterion::Contractive).unwrap();
        let MuSearch::Found { mu, matrix } = r else { panic!() };
        assert!(matrix.criterion().contractive);
        assert!(!majorant_bounds(&rich(), &counts(2, 1, 0.2, 1.0), mu * 0.98).unwrap().criterion().contractive);
        assert!(matches!(
            find_mu(&rich(), &c, 1.0, 0.5, MuCriterion::Contractive),
            Err(ContractionError::BadRange(..))
        ));
    }
}
