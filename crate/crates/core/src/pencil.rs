//! The optimality pencil `sE - A_S` and its regularity.
//!
//! Unknowns are ordered `[lambda; x; u]` (co-state, state, control), so
//!
//! ```text
//!     E = [  0  I  0 ]        A_S = [ 0      F    B ]
//!         [ -I  0  0 ]              [ F^H  QRQ    0 ]
//!         [  0  0  0 ]              [ B^H    0    S ]
//! ```
//!
//! with `F = (J - R) Q`. Regularity is decided by several criteria that are
//! equivalent in exact arithmetic; [`full_report`] runs all of them and
//! refuses to produce a verdict when they disagree.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, column_space, identity, inverse, norm2, preimage, rank_and_kernel,
    rank_and_kernel_scaled, sigma_min, subspace_intersection, subspace_sum_dim, zeros, Mat,
    Subspace, C64, DEFAULT_TOL_REL,
};
use crate::system::{CostPerturbation, PHSystem};

/// Relative distance below which a shift counts as hitting a spectrum.
pub const CLASH_TOL: f64 = 1e-6;
/// Threshold on `sigma_min / sigma_max` of `mu E - A_S` at a sampled shift.
pub const DET_TOL: f64 = 1e-12;
/// Fractions of `1 + |A_S| / max(|E|, 1)` used as sampling radii, in turn.
const DET_RADII: [f64; 3] = [0.1, 0.01, 1.0];
/// Subspace equality tolerance in the Wong iteration.
pub const WONG_TOL: f64 = 1e-9;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Debug)]
pub struct OptimalityPencil {
    e: Mat,
    a: Mat,
    sys: PHSystem,
    s: CostPerturbation,
}

/// Assembles `(E, A_S)`.
pub fn build_pencil(sys: &PHSystem, s: &CostPerturbation) -> Result<OptimalityPencil> {
    let (n, m) = (sys.n(), sys.m());
    if s.dim() != m {
        return Err(Error::InvalidInput(format!(
            "S is {0}x{0} but the system has {1} inputs",
            s.dim(),
            m
        )));
    }
    let size = 2 * n + m;
    let mut e = zeros(size, size);
    let one = C64::new(1.0, 0.0);
    for i in 0..n {
        e[(i, n + i)] = one;
        e[(n + i, i)] = -one;
    }
    let f = sys.f();
    let mut a = zeros(size, size);
    a.view_mut((0, n), (n, n)).copy_from(&f);
    a.view_mut((0, 2 * n), (n, m)).copy_from(sys.b());
    a.view_mut((n, 0), (n, n)).copy_from(&f.adjoint());
    a.view_mut((n, n), (n, n)).copy_from(&sys.qrq());
    a.view_mut((2 * n, 0), (m, n)).copy_from(&sys.b().adjoint());
    a.view_mut((2 * n, 2 * n), (m, m)).copy_from(s.matrix());
    Ok(OptimalityPencil {
        e,
        a,
        sys: sys.clone(),
        s: s.clone(),
    })
}

impl OptimalityPencil {
    pub fn e(&self) -> &Mat {
        &self.e
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn system(&self) -> &PHSystem {
        &self.sys
    }

    pub fn cost(&self) -> &CostPerturbation {
        &self.s
    }

    pub fn size(&self) -> usize {
        self.e.nrows()
    }

    /// `sE - A_S` at a given point.
    pub fn at(&self, s: C64) -> Mat {
        &self.e * s - &self.a
    }

    /// Deviation of `A_S` from Hermitian and of `E` from skew-Hermitian.
    pub fn self_adjointness_defect(&self) -> f64 {
        let a = linalg::max_abs(&(&self.a - self.a.adjoint()));
        let e = linalg::max_abs(&(&self.e + self.e.adjoint()));
        a.max(e)
    }
}

/// Knobs shared by the regularity criteria.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub tol_rel: f64,
    /// Number of frequencies sampled; `None` means `4n + 1`.
    pub omega_grid_size: Option<usize>,
    pub seed: u64,
    /// Number of regridding attempts after a spectrum clash.
    pub retries: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            tol_rel: DEFAULT_TOL_REL,
            omega_grid_size: None,
            seed: 0x5eed,
            retries: 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    NotApplicable,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }
}

/// Regularity tests run by [`full_report`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// `det(mu E - A_S) != 0` at a sampled shift.
    DetSampling,
    /// The shifted Schur complement `S_mu` is invertible.
    SchurComplement,
    /// `ker S ∩ ker RQ (F - iw)^-1 B = {0}` for some `w`.
    ResolventDissipative,
    /// Same with `JQ` in place of `F`.
    ResolventLossless,
    /// `ker S ∩ B^-1 (JQ - iw) ker RQ = {0}` for some `w`.
    Preimage,
    /// `dim(B ker S + (JQ - iw) ker RQ) = m + n - rk S - rk RQ`.
    RankCriterion,
    /// `ker S ∩ ker RQ (JQ)^r B, r < n, = {0}`; necessary, and sufficient when `m = 1`.
    NecessaryKrylov,
    /// `B ker S ∩ ker RQ = {0} = ker B ∩ ker S`; sufficient.
    SufficientKernel,
}

impl Criterion {
    /// The criteria that are each equivalent to regularity.
    pub const EQUIVALENT: [Criterion; 6] = [
        Criterion::DetSampling,
        Criterion::SchurComplement,
        Criterion::ResolventDissipative,
        Criterion::ResolventLossless,
        Criterion::Preimage,
        Criterion::RankCriterion,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Criterion::DetSampling => "det_sampling",
            Criterion::SchurComplement => "schur_complement",
            Criterion::ResolventDissipative => "resolvent_dissipative",
            Criterion::ResolventLossless => "resolvent_lossless",
            Criterion::Preimage => "preimage",
            Criterion::RankCriterion => "rank_criterion",
            Criterion::NecessaryKrylov => "necessary_krylov",
            Criterion::SufficientKernel => "sufficient_kernel",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularityReport {
    pub regular: bool,
    pub witness_omega: Option<f64>,
    pub witness_mu: Option<C64>,
    pub criteria: BTreeMap<Criterion, Verdict>,
    pub kronecker_index: Option<usize>,
    pub index_three_flag: bool,
    pub notes: Vec<String>,
}

impl RegularityReport {
    pub fn verdict(&self, c: Criterion) -> Verdict {
        self.criteria
            .get(&c)
            .copied()
            .unwrap_or(Verdict::NotApplicable)
    }
}

// ---------------------------------------------------------------------------
// determinant sampling

#[derive(Clone, Debug)]
pub struct DetSample {
    pub mu: C64,
    /// `|det| / prod(row norms)`, in `[0, 1]` by Hadamard's inequality.
    pub hadamard: f64,
    /// `sigma_min / sigma_max`, the quantity that is thresholded.
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct DetVerdict {
    pub regular: bool,
    pub witness_mu: Option<C64>,
    pub samples: Vec<DetSample>,
}

/// `|det M| / prod_i |row_i|`, evaluated in log space.
pub fn normalized_det(m: &Mat) -> f64 {
    let n = m.nrows();
    let mut log_rows = 0.0;
    for i in 0..n {
        let r = m.row(i).norm();
        if r == 0.0 {
            return 0.0;
        }
        log_rows += r.ln();
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let mut log_det = 0.0;
    for i in 0..n {
        let d = u[(i, i)].norm();
        if d == 0.0 {
            return 0.0;
        }
        log_det += d.ln();
    }
    (log_det - log_rows).exp()
}

/// `sigma_min / sigma_max`, zero for a zero matrix.
pub fn reciprocal_condition(m: &Mat) -> f64 {
    let sv = linalg::singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&smax), Some(&smin)) if smax > 0.0 => smin / smax,
        _ => 0.0,
    }
}

/// Samples `mu E - A_S` at `2n + 1` seeded shifts on circles of decreasing
/// radius. The determinant of a regular high-index pencil has low degree, so
/// its Hadamard ratio decays polynomially in `|mu|`; the pencil is declared
/// regular once `sigma_min / sigma_max` clears `DET_TOL` at some sample.
pub fn regular_by_det_sampling(p: &OptimalityPencil, seed: u64) -> DetVerdict {
    let n = p.sys.n();
    let radius = 1.0 + norm2(&p.a) / norm2(&p.e).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(2 * n + 1);
    let mut witness = None;
    for k in 0..(2 * n + 1) {
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mu = C64::from_polar(radius * DET_RADII[k % DET_RADII.len()], theta);
        let m = p.at(mu);
        let ratio = reciprocal_condition(&m);
        samples.push(DetSample {
            mu,
            hadamard: normalized_det(&m),
            ratio,
        });
        if ratio > DET_TOL {
            witness = Some(mu);
            break;
        }
    }
    DetVerdict {
        regular: witness.is_some(),
        witness_mu: witness,
        samples,
    }
}

// ---------------------------------------------------------------------------
// shifted Schur complement

fn clashes(m: &Mat) -> bool {
    let sv = linalg::singular_values(m);
    let (Some(&smax), Some(&smin)) = (sv.first(), sv.last()) else {
        return false;
    };
    smin <= CLASH_TOL * (1.0 + smax)
}

/// Block matrix `K(mu) = [[0, F - mu I], [F^H + mu I, QRQ]]`; note
/// `mu E - A_S = -[[K, B~], [B~^H, S]]` with `B~ = [B; 0]`.
pub fn shifted_block(sys: &PHSystem, mu: C64) -> Mat {
    let n = sys.n();
    let f = sys.f();
    let shift = identity(n) * mu;
    let mut k = zeros(2 * n, 2 * n);
    k.view_mut((0, n), (n, n)).copy_from(&(&f - &shift));
    k.view_mut((n, 0), (n, n))
        .copy_from(&(f.adjoint() + &shift));
    k.view_mut((n, n), (n, n)).copy_from(&sys.qrq());
    k
}

/// `[B; 0]`.
pub fn lifted_input(sys: &PHSystem) -> Mat {
    let (n, m) = (sys.n(), sys.m());
    let mut bt = zeros(2 * n, m);
    bt.view_mut((0, 0), (n, m)).copy_from(sys.b());
    bt
}

/// Fails with [`Error::SpectrumClash`] if `mu` is (numerically) an eigenvalue
/// of `(J-R)Q` or of `-((J-R)Q)^H`.
pub fn check_shift(sys: &PHSystem, mu: C64) -> Result<()> {
    let f = sys.f();
    let n = sys.n();
    let shift = identity(n) * mu;
    if clashes(&(&f - &shift)) || clashes(&(f.adjoint() + &shift)) {
        return Err(Error::SpectrumClash { mu });
    }
    Ok(())
}

/// `E_mu = K(mu)^-1` and `S_mu = S - B~^H E_mu B~`.
pub fn schur_complement(p: &OptimalityPencil, mu: C64) -> Result<(Mat, Mat)> {
    check_shift(&p.sys, mu)?;
    let e_mu = inverse(&shifted_block(&p.sys, mu)).map_err(|_| Error::SpectrumClash { mu })?;
    let bt = lifted_input(&p.sys);
    let s_mu = p.s.matrix() - bt.adjoint() * &e_mu * &bt;
    Ok((e_mu, s_mu))
}

fn schur_invertible(p: &OptimalityPencil, e_mu: &Mat, s_mu: &Mat, tol: f64) -> bool {
    let scale = norm2(p.s.matrix()) + norm2(p.sys.b()).powi(2) * norm2(e_mu);
    sigma_min(s_mu) > tol * scale.max(f64::MIN_POSITIVE)
}

/// Regularity via invertibility of `S_mu` at the given shift.
pub fn regular_by_campbell_mu(p: &OptimalityPencil, mu: C64, tol_rel: f64) -> Result<bool> {
    let (e_mu, s_mu) = schur_complement(p, mu)?;
    Ok(schur_invertible(p, &e_mu, &s_mu, tol_rel))
}

/// Deterministic shift candidates `(1 + |F|)(1 + k/7) exp(i pi (2k+1)/17)`,
/// followed by a geometric tail reaching `1e7 (1 + |F|)` for pencils with
/// very large finite eigenvalues (nearly singular `S`).
pub fn mu_candidates(sys: &PHSystem) -> Vec<C64> {
    let base = 1.0 + norm2(&sys.f());
    let ring = (0..=50).map(|k| {
        let k = k as f64;
        let angle = std::f64::consts::PI * (2.0 * k + 1.0) / 17.0;
        C64::from_polar(base * (1.0 + k / 7.0), angle)
    });
    let tail = (2..=14).map(|k| {
        let angle = std::f64::consts::PI * (2.0 * k as f64 + 1.0) / 17.0;
        C64::from_polar(base * 10f64.powf(k as f64 / 2.0), angle)
    });
    ring.chain(tail).collect()
}

#[derive(Clone, Debug)]
pub struct SchurVerdict {
    pub holds: bool,
    pub witness_mu: Option<C64>,
    pub tried: Vec<C64>,
}

/// Tries admissible candidates until `S_mu` is invertible. A regular pencil
/// has at most `2n` finite eigenvalues, so `2n + m + 1` admissible shifts
/// settle the question.
pub fn regular_by_campbell(p: &OptimalityPencil, tol_rel: f64) -> Result<SchurVerdict> {
    let budget = 2 * p.sys.n() + p.sys.m() + 1;
    let mut tried = Vec::new();
    for mu in mu_candidates(&p.sys) {
        let (e_mu, s_mu) = match schur_complement(p, mu) {
            Ok(v) => v,
            Err(Error::SpectrumClash { .. }) => continue,
            Err(e) => return Err(e),
        };
        tried.push(mu);
        if schur_invertible(p, &e_mu, &s_mu, tol_rel) {
            return Ok(SchurVerdict {
                holds: true,
                witness_mu: Some(mu),
                tried,
            });
        }
        if tried.len() >= budget {
            break;
        }
    }
    if tried.is_empty() {
        return Err(Error::MuSearchExhausted { tried: 51 });
    }
    Ok(SchurVerdict {
        holds: false,
        witness_mu: None,
        tried,
    })
}

// ---------------------------------------------------------------------------
// frequency criteria

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventVariant {
    /// Resolvent of `(J - R) Q`.
    Dissipative,
    /// Resolvent of `J Q`.
    Lossless,
    /// Preimage form, no resolvent needed.
    Preimage,
}

/// Deterministic frequency grid on `[-L, L]`, `L = 2 + 2|JQ|`, with an
/// irrational phase that changes on every attempt.
pub fn omega_grid(sys: &PHSystem, size: usize, attempt: usize) -> Vec<f64> {
    let l = 2.0 + 2.0 * norm2(&sys.jq());
    let phase = (GOLDEN * (attempt + 1) as f64).fract();
    let k_total = size.max(1) as f64;
    (0..size.max(1))
        .map(|k| l * (std::f64::consts::PI * (k as f64 + phase) / k_total).cos())
        .collect()
}

/// Whether `i w` is (numerically) an eigenvalue of `(J-R)Q` or `JQ`.
pub fn omega_clashes(sys: &PHSystem, omega: f64) -> bool {
    let shift = identity(sys.n()) * C64::new(0.0, omega);
    clashes(&(sys.f() - &shift)) || clashes(&(sys.jq() - &shift))
}

/// Walks the frequency grid, skipping points on the spectrum. Clash checks
/// are cached so several criteria can share one scanner.
pub struct OmegaScanner<'a> {
    sys: &'a PHSystem,
    size: usize,
    retries: usize,
    // (grid, clash flags) per attempt, filled lazily
    grids: Vec<(Vec<f64>, Vec<Option<bool>>)>,
}

impl<'a> OmegaScanner<'a> {
    pub fn new(sys: &'a PHSystem, opts: &AnalysisOptions) -> Self {
        Self {
            sys,
            size: opts.omega_grid_size.unwrap_or(4 * sys.n() + 1).max(1),
            retries: opts.retries,
            grids: Vec::new(),
        }
    }

    fn admissible(&mut self, attempt: usize, k: usize) -> Option<f64> {
        while self.grids.len() <= attempt {
            let g = omega_grid(self.sys, self.size, self.grids.len());
            let flags = vec![None; g.len()];
            self.grids.push((g, flags));
        }
        let (grid, flags) = &mut self.grids[attempt];
        let w = grid[k];
        let clash = *flags[k].get_or_insert_with(|| omega_clashes(self.sys, w));
        (!clash).then_some(w)
    }

    /// Returns the first admissible `w` where `test` holds. Regrids only if
    /// every point of a grid hits the spectrum.
    pub fn scan<F>(&mut self, mut test: F) -> Result<OmegaVerdict>
    where
        F: FnMut(f64) -> Result<bool>,
    {
        for attempt in 0..=self.retries {
            let mut sampled = 0;
            for k in 0..self.size {
                let Some(w) = self.admissible(attempt, k) else {
                    continue;
                };
                sampled += 1;
                if test(w)? {
                    return Ok(OmegaVerdict {
                        holds: true,
                        witness_omega: Some(w),
                        sampled,
                    });
                }
            }
            if sampled > 0 {
                return Ok(OmegaVerdict {
                    holds: false,
                    witness_omega: None,
                    sampled,
                });
            }
        }
        Err(Error::AllOmegaClash {
            retries: self.retries,
        })
    }

    /// All admissible points of the first grid that has any.
    pub fn admissible_points(&mut self) -> Result<Vec<f64>> {
        for attempt in 0..=self.retries {
            let pts: Vec<f64> = (0..self.size)
                .filter_map(|k| self.admissible(attempt, k))
                .collect();
            if !pts.is_empty() {
                return Ok(pts);
            }
        }
        Err(Error::AllOmegaClash {
            retries: self.retries,
        })
    }
}

/// Kernel of `S` with a purely relative cut-off.
pub fn kernel_of_s(p: &OptimalityPencil, tol: f64) -> Result<Subspace> {
    Ok(rank_and_kernel(p.s.matrix(), tol)?.1)
}

pub fn kernel_of_rq(sys: &PHSystem, tol: f64) -> Result<Subspace> {
    Ok(rank_and_kernel(&sys.rq(), tol)?.1)
}

/// `ker S ∩ ker (RQ X B)` with `X` the resolvent of `(J-R)Q` or `JQ`.
fn resolvent_intersection(
    p: &OptimalityPencil,
    generator: &Mat,
    omega: f64,
    tol: f64,
) -> Result<Subspace> {
    let sys = &p.sys;
    let shift = identity(sys.n()) * C64::new(0.0, omega);
    let resolvent = inverse(&(generator - shift))?;
    let rq = sys.rq();
    let ks = kernel_of_s(p, tol)?;
    let m = sys.m();
    if ks.is_trivial() {
        return Ok(Subspace::zero(m));
    }
    let g = &rq * &resolvent * sys.b() * ks.basis();
    let floor = norm2(&rq) * norm2(&resolvent) * norm2(sys.b());
    let (_, c) = rank_and_kernel_scaled(&g, tol, floor)?;
    Ok(Subspace::from_orthonormal_trusted(
        m,
        ks.basis() * c.basis(),
    ))
}

/// `B^-1 (JQ - i w) ker RQ`.
pub fn preimage_space(sys: &PHSystem, omega: f64, tol: f64) -> Result<Subspace> {
    let shift = identity(sys.n()) * C64::new(0.0, omega);
    let kr = kernel_of_rq(sys, tol)?;
    let image = kr.mapped_by(&(sys.jq() - shift), tol)?;
    preimage(sys.b(), &image, tol)
}

/// Evaluates one frequency criterion at a single `w`.
pub fn resolvent_condition_at(
    p: &OptimalityPencil,
    variant: ResolventVariant,
    omega: f64,
    tol: f64,
) -> Result<bool> {
    let sys = &p.sys;
    let meet = match variant {
        ResolventVariant::Dissipative => resolvent_intersection(p, &sys.f(), omega, tol)?,
        ResolventVariant::Lossless => resolvent_intersection(p, &sys.jq(), omega, tol)?,
        ResolventVariant::Preimage => {
            let ks = kernel_of_s(p, tol)?;
            subspace_intersection(&ks, &preimage_space(sys, omega, tol)?, tol)?
        }
    };
    Ok(meet.is_trivial())
}

/// Left and right side of the rank identity at `w`.
pub fn rank_criterion_at(p: &OptimalityPencil, omega: f64, tol: f64) -> Result<(usize, usize)> {
    let sys = &p.sys;
    let (n, m) = (sys.n(), sys.m());
    let (rk_s, ks) = rank_and_kernel(p.s.matrix(), tol)?;
    let (rk_rq, kr) = rank_and_kernel(&sys.rq(), tol)?;
    let shift = identity(n) * C64::new(0.0, omega);
    let b_ks = column_space(&(sys.b() * ks.basis()), tol, norm2(sys.b()))?;
    let moved = kr.mapped_by(&(sys.jq() - shift), tol)?;
    let lhs = subspace_sum_dim(&b_ks, &moved, tol)?;
    // rk S + rk RQ <= m + n always, so the target is non-negative.
    Ok((lhs, m + n - rk_s - rk_rq))
}

#[derive(Clone, Debug)]
pub struct OmegaVerdict {
    pub holds: bool,
    pub witness_omega: Option<f64>,
    pub sampled: usize,
}

pub fn regular_by_resolvent(
    p: &OptimalityPencil,
    variant: ResolventVariant,
    opts: &AnalysisOptions,
) -> Result<OmegaVerdict> {
    OmegaScanner::new(&p.sys, opts).scan(|w| resolvent_condition_at(p, variant, w, opts.tol_rel))
}

pub fn regular_by_rank_criterion(
    p: &OptimalityPencil,
    opts: &AnalysisOptions,
) -> Result<OmegaVerdict> {
    OmegaScanner::new(&p.sys, opts).scan(|w| {
        let (lhs, rhs) = rank_criterion_at(p, w, opts.tol_rel)?;
        Ok(lhs == rhs)
    })
}

// ---------------------------------------------------------------------------
// necessary and sufficient conditions

/// `ker S ∩ ⋂_{r<n} ker RQ (JQ)^r B`.
pub fn krylov_kernel(p: &OptimalityPencil, tol: f64) -> Result<Subspace> {
    let sys = &p.sys;
    let m = sys.m();
    let rq = sys.rq();
    let rq_norm = norm2(&rq);
    let jq = sys.jq();
    let jq_norm = norm2(&jq);
    let mut meet = kernel_of_s(p, tol)?;
    let mut power = sys.b().clone();
    let mut reference = norm2(&power);
    for _ in 0..sys.n() {
        if meet.is_trivial() {
            break;
        }
        // Normalising the Krylov block does not move kernels and keeps
        // high powers finite, but a block that is rounding noise relative
        // to its predecessor must not be blown up.
        let pn = norm2(&power);
        if pn <= tol * reference {
            break;
        }
        power /= C64::new(pn, 0.0);
        let g = &rq * &power * meet.basis();
        let (_, c) = rank_and_kernel_scaled(&g, tol, rq_norm)?;
        meet = Subspace::from_orthonormal_trusted(m, meet.basis() * c.basis());
        power = &jq * &power;
        reference = jq_norm;
    }
    Ok(meet)
}

pub fn necessary_condition(p: &OptimalityPencil, tol: f64) -> Result<bool> {
    Ok(krylov_kernel(p, tol)?.is_trivial())
}

/// The two kernel intersections of the sufficient condition.
pub fn sufficient_parts(p: &OptimalityPencil, tol: f64) -> Result<(Subspace, Subspace)> {
    let sys = &p.sys;
    let ks = kernel_of_s(p, tol)?;
    let kr = kernel_of_rq(sys, tol)?;
    let b_ks = column_space(&(sys.b() * ks.basis()), tol, norm2(sys.b()))?;
    let first = subspace_intersection(&b_ks, &kr, tol)?;
    let (_, kb) = rank_and_kernel(sys.b(), tol)?;
    let second = subspace_intersection(&kb, &ks, tol)?;
    Ok((first, second))
}

pub fn sufficient_condition_kernel(p: &OptimalityPencil, tol: f64) -> Result<bool> {
    let (a, b) = sufficient_parts(p, tol)?;
    Ok(a.is_trivial() && b.is_trivial())
}

/// `im B ∩ ker RQ = {0} = ker B`, the structural side of the index-three
/// characterisation at `S = 0`.
pub fn index_three_condition(sys: &PHSystem, tol: f64) -> Result<bool> {
    let kr = kernel_of_rq(sys, tol)?;
    let im_b = column_space(sys.b(), tol, 0.0)?;
    let (rk_b, _) = rank_and_kernel(sys.b(), tol)?;
    Ok(rk_b == sys.m() && subspace_intersection(&im_b, &kr, tol)?.is_trivial())
}

// ---------------------------------------------------------------------------
// Kronecker index

/// Dimensions of the Wong spaces `W_0 = {0}`, `W_{k+1} = E^-1 A W_k` until
/// they stabilise, and the step at which that happens.
pub fn wong_sequence(p: &OptimalityPencil, tol: f64) -> Result<(usize, Vec<usize>)> {
    let size = p.size();
    let cap = size + 1;
    let mut w = Subspace::zero(size);
    let mut dims = vec![0];
    for k in 0..cap {
        let next = preimage(&p.e, &w.mapped_by(&p.a, tol)?, tol)?;
        dims.push(next.dim());
        if next.dim() == w.dim() && next.distance(&w) <= WONG_TOL {
            return Ok((k, dims));
        }
        w = next;
    }
    Err(Error::NoStabilization { steps: cap })
}

/// Kronecker index of a regular pencil.
pub fn kronecker_index(p: &OptimalityPencil, opts: &AnalysisOptions) -> Result<usize> {
    if !regular_by_det_sampling(p, opts.seed).regular {
        return Err(Error::SingularPencil);
    }
    Ok(wong_sequence(p, opts.tol_rel)?.0)
}

// ---------------------------------------------------------------------------
// report

pub fn full_report(sys: &PHSystem, s: &CostPerturbation) -> Result<RegularityReport> {
    full_report_with(sys, s, &AnalysisOptions::default())
}

pub fn full_report_with(
    sys: &PHSystem,
    s: &CostPerturbation,
    opts: &AnalysisOptions,
) -> Result<RegularityReport> {
    let tol = opts.tol_rel;
    let p = build_pencil(sys, s)?;
    let mut omegas = OmegaScanner::new(sys, opts);

    let det = regular_by_det_sampling(&p, opts.seed);
    let schur = regular_by_campbell(&p, tol)?;
    let dissipative =
        omegas.scan(|w| resolvent_condition_at(&p, ResolventVariant::Dissipative, w, tol))?;
    let lossless =
        omegas.scan(|w| resolvent_condition_at(&p, ResolventVariant::Lossless, w, tol))?;
    let pre = omegas.scan(|w| resolvent_condition_at(&p, ResolventVariant::Preimage, w, tol))?;
    let rank = omegas.scan(|w| {
        let (l, r) = rank_criterion_at(&p, w, tol)?;
        Ok(l == r)
    })?;
    let necessary = necessary_condition(&p, tol)?;
    let sufficient = sufficient_condition_kernel(&p, tol)?;

    let mut criteria = BTreeMap::new();
    criteria.insert(Criterion::DetSampling, Verdict::from_bool(det.regular));
    criteria.insert(Criterion::SchurComplement, Verdict::from_bool(schur.holds));
    criteria.insert(
        Criterion::ResolventDissipative,
        Verdict::from_bool(dissipative.holds),
    );
    criteria.insert(
        Criterion::ResolventLossless,
        Verdict::from_bool(lossless.holds),
    );
    criteria.insert(Criterion::Preimage, Verdict::from_bool(pre.holds));
    criteria.insert(Criterion::RankCriterion, Verdict::from_bool(rank.holds));
    criteria.insert(Criterion::NecessaryKrylov, Verdict::from_bool(necessary));
    criteria.insert(Criterion::SufficientKernel, Verdict::from_bool(sufficient));

    let describe = |c: Criterion| -> String {
        match c {
            Criterion::DetSampling => format!(
                "best sigma_min / sigma_max of mu E - A_S {:.3e}",
                det.samples.iter().map(|s| s.ratio).fold(0.0, f64::max)
            ),
            Criterion::SchurComplement => format!("{} shifts tried", schur.tried.len()),
            Criterion::ResolventDissipative => format!("witness {:?}", dissipative.witness_omega),
            Criterion::ResolventLossless => format!("witness {:?}", lossless.witness_omega),
            Criterion::Preimage => format!("witness {:?}", pre.witness_omega),
            Criterion::RankCriterion => format!("witness {:?}", rank.witness_omega),
            _ => String::new(),
        }
    };

    let regular = det.regular;
    for c in Criterion::EQUIVALENT {
        if criteria[&c].holds() != regular {
            return Err(Error::InconsistentCriteria {
                first: Criterion::DetSampling.key().into(),
                second: c.key().into(),
                detail: format!("{}; {}", describe(Criterion::DetSampling), describe(c)),
            });
        }
    }
    if sufficient && !regular {
        return Err(Error::InconsistentCriteria {
            first: Criterion::SufficientKernel.key().into(),
            second: Criterion::DetSampling.key().into(),
            detail: "sufficient condition holds for a singular pencil".into(),
        });
    }
    if regular && !necessary {
        return Err(Error::InconsistentCriteria {
            first: Criterion::NecessaryKrylov.key().into(),
            second: Criterion::DetSampling.key().into(),
            detail: "necessary condition fails for a regular pencil".into(),
        });
    }
    if sys.m() == 1 && necessary != regular {
        return Err(Error::InconsistentCriteria {
            first: Criterion::NecessaryKrylov.key().into(),
            second: Criterion::DetSampling.key().into(),
            detail: "single-input system: the Krylov condition must decide regularity".into(),
        });
    }

    let mut notes = Vec::new();
    if sufficient {
        notes.push("sufficient kernel condition holds; optimal controls are unique".into());
    }
    if sys.m() == 1 {
        notes.push("single input: the Krylov condition is also sufficient".into());
    }
    if necessary && !regular {
        notes.push("Krylov condition holds although the pencil is singular".into());
    }
    if !regular {
        notes.push(
            "pencil is singular; a rank-minimal cost regularisation restores regularity".into(),
        );
    }

    let kronecker_index = if regular {
        Some(wong_sequence(&p, tol)?.0)
    } else {
        None
    };
    let structural = index_three_condition(sys, tol)?;
    let s_zero = linalg::max_abs(s.matrix()) == 0.0;
    let index_three_flag = s_zero && structural;
    if s_zero && (structural != (regular && kronecker_index == Some(3))) {
        notes.push(format!(
            "structural index-three test ({structural}) disagrees with computed index {kronecker_index:?}"
        ));
    }

    Ok(RegularityReport {
        regular,
        witness_omega: dissipative.witness_omega,
        witness_mu: det.witness_mu,
        criteria,
        kronecker_index,
        index_three_flag,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_matrix, real_matrix};

    fn i() -> C64 {
        C64::new(0.0, 1.0)
    }

    fn siso_trivial() -> PHSystem {
        PHSystem::validate(
            Mat::zeros(1, 1),
            Mat::zeros(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn scalar_pencil_blocks() {
        let p = build_pencil(&siso_trivial(), &CostPerturbation::identity(1)).unwrap();
        let expected_a = real_matrix(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let expected_e = real_matrix(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.a(), &expected_a);
        assert_eq!(p.e(), &expected_e);
        assert_eq!(p.self_adjointness_defect(), 0.0);
    }

    #[test]
    fn mismatched_cost_rejected() {
        assert!(build_pencil(&siso_trivial(), &CostPerturbation::zero(2)).is_err());
    }

    #[test]
    fn shift_clash_detected() {
        // F = i, so mu = i clashes.
        let sys = PHSystem::validate(
            complex_matrix(1, 1, &[i()]),
            Mat::zeros(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
        )
        .unwrap();
        let p = build_pencil(&sys, &CostPerturbation::zero(1)).unwrap();
        assert!(matches!(
            regular_by_campbell_mu(&p, i(), 1e-10),
            Err(Error::SpectrumClash { .. })
        ));
        assert!(regular_by_campbell_mu(&p, C64::new(2.0, 0.0), 1e-10).is_ok());
    }

    #[test]
    fn positive_definite_cost_is_regular() {
        let p = build_pencil(&siso_trivial(), &CostPerturbation::identity(1)).unwrap();
        let opts = AnalysisOptions::default();
        for v in [
            ResolventVariant::Dissipative,
            ResolventVariant::Lossless,
            ResolventVariant::Preimage,
        ] {
            assert!(regular_by_resolvent(&p, v, &opts).unwrap().holds);
        }
        assert!(regular_by_det_sampling(&p, 1).regular);
    }

    #[test]
    fn grid_is_deterministic_and_bounded() {
        let sys = siso_trivial();
        let a = omega_grid(&sys, 9, 0);
        assert_eq!(a, omega_grid(&sys, 9, 0));
        assert_ne!(a, omega_grid(&sys, 9, 1));
        assert!(a.iter().all(|w| w.abs() < 2.0));
    }

    #[test]
    fn normalized_det_bounds() {
        assert!((normalized_det(&Mat::identity(4, 4)) - 1.0).abs() < 1e-15);
        assert_eq!(normalized_det(&Mat::zeros(2, 2)), 0.0);
        let m = real_matrix(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-13]);
        assert!(normalized_det(&m) < 1e-12);
        assert!(reciprocal_condition(&m) < DET_TOL);
    }

    #[test]
    fn report_serialises_with_descriptive_keys() {
        let r = full_report(&siso_trivial(), &CostPerturbation::identity(1)).unwrap();
        let js = serde_json::to_string(&r).unwrap();
        assert!(js.contains("\"schur_complement\":\"holds\""));
        assert!(js.contains("\"necessary_krylov\""));
    }
}
