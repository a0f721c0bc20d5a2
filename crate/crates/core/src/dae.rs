//! Closed-form solution of the optimality DAE through Drazin inverses.
//!
//! For a shift `mu` with `mu E - A_S` invertible, write `w = [lambda; x]`.
//! Multiplying the DAE by `(mu E - A_S)^-1` gives
//!
//! ```text
//!     (mu E - A_S)^-1 E = [[N_mu, 0], [M_mu, 0]]
//! ```
//!
//! so every classical solution starts in `im N^D N`, evolves as
//! `w(t) = exp(-N^D (I - mu N) (t - t0)) w0` and has control
//! `u = M_mu N^D w`.

use crate::error::{Error, Result};
use crate::linalg::{
    self, drazin, identity, inverse, norm2, rank_and_kernel, vstack, zeros, CVector, DrazinResult,
    Mat, Subspace, C64, DEFAULT_TOL_REL,
};
use crate::pencil::{
    build_pencil, lifted_input, mu_candidates, regular_by_det_sampling, schur_complement,
    AnalysisOptions, OptimalityPencil,
};
use crate::system::{CostPerturbation, Field, PHSystem, Trajectory};

/// Admissibility tolerance for initial values, relative to `1 + |w0|`.
pub const TOL_ADMISSIBLE: f64 = 1e-8;
/// Relative threshold on `sigma_min(E3)` below which the least-squares path runs.
pub const TOL_E3: f64 = 1e-8;
/// Smallest relative singular value the least-squares boundary solve may use.
pub const TOL_LSQ: f64 = 1e-13;
/// Default number of samples for boundary value solutions.
pub const DEFAULT_GRID_POINTS: usize = 1001;
/// Normalised DAE residual above which a warning is attached.
pub const DAE_RESIDUAL_WARN: f64 = 1e-6;

/// `[[0, -I], [I, 0]]` of size `2n`.
fn rotation(n: usize) -> Mat {
    let mut jr = zeros(2 * n, 2 * n);
    for i in 0..n {
        jr[(i, n + i)] = C64::new(-1.0, 0.0);
        jr[(n + i, i)] = C64::new(1.0, 0.0);
    }
    jr
}

/// Everything the closed-form solution needs at one shift.
#[derive(Clone, Debug)]
pub struct DrazinData {
    pub mu: C64,
    pub e_mu: Mat,
    pub s_mu: Mat,
    pub n_mu: Mat,
    pub m_mu: Mat,
    pub n_drazin: DrazinResult,
    pub admissible: Subspace,
    /// `N^D (I - mu N)`; the flow is `exp(-generator (t - t0))`.
    pub generator: Mat,
    pencil: OptimalityPencil,
}

impl DrazinData {
    pub fn n(&self) -> usize {
        self.pencil.system().n()
    }

    pub fn m(&self) -> usize {
        self.pencil.system().m()
    }

    pub fn pencil(&self) -> &OptimalityPencil {
        &self.pencil
    }

    pub fn system(&self) -> &PHSystem {
        self.pencil.system()
    }

    /// Feedback gain `M_mu N^D` mapping `[lambda; x]` to `u`.
    pub fn gain(&self) -> Mat {
        &self.m_mu * &self.n_drazin.drazin
    }

    /// Distance of `w` from the admissible subspace.
    pub fn admissibility_residual(&self, w: &CVector) -> f64 {
        let p = self.admissible.projector();
        (w - &p * w).norm()
    }

    /// Commutator of `(mu E - A)^-1 E` and `(mu E - A)^-1 A`, relative to
    /// the product of their norms.
    pub fn commutator_residual(&self) -> Result<f64> {
        let p = &self.pencil;
        let lu = p.at(self.mu).lu();
        let e_hat = lu
            .solve(p.e())
            .ok_or_else(|| Error::NumericalFailure("shifted pencil is singular".into()))?;
        let a_hat = lu
            .solve(p.a())
            .ok_or_else(|| Error::NumericalFailure("shifted pencil is singular".into()))?;
        let c = &e_hat * &a_hat - &a_hat * &e_hat;
        let scale = norm2(&e_hat) * norm2(&a_hat);
        Ok(if scale == 0.0 { 0.0 } else { norm2(&c) / scale })
    }
}

/// Assembles the Drazin data at a single shift.
pub fn drazin_data_at(p: &OptimalityPencil, mu: C64, tol: f64) -> Result<DrazinData> {
    let sys = p.system();
    let n = sys.n();
    let (e_mu, s_mu) = schur_complement(p, mu)?;
    let bt = lifted_input(sys);
    let scale = norm2(p.cost().matrix()) + norm2(sys.b()).powi(2) * norm2(&e_mu);
    if linalg::sigma_min(&s_mu) <= tol * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput(format!(
            "mu = {mu} is an eigenvalue of the pencil (or the pencil is singular)"
        )));
    }
    let s_inv = inverse(&s_mu)?;
    let jr = rotation(n);
    let e_b = &e_mu * &bt;
    let n_mu = (&e_mu + &e_b * &s_inv * bt.adjoint() * &e_mu) * &jr;
    let m_mu = -(&s_inv * bt.adjoint() * &e_mu * &jr);
    let n_drazin = drazin(&n_mu)?;
    let admissible = Subspace::span(&n_drazin.projector, tol)?;
    let generator = &n_drazin.drazin * (identity(2 * n) - &n_mu * mu);
    Ok(DrazinData {
        mu,
        e_mu,
        s_mu,
        n_mu,
        m_mu,
        n_drazin,
        admissible,
        generator,
        pencil: p.clone(),
    })
}

/// Picks a shift (the hint if given, else the first usable deterministic
/// candidate) and assembles the Drazin data.
pub fn build_drazin_data(
    sys: &PHSystem,
    s: &CostPerturbation,
    mu_hint: Option<C64>,
) -> Result<DrazinData> {
    build_drazin_data_with(sys, s, mu_hint, &AnalysisOptions::default())
}

pub fn build_drazin_data_with(
    sys: &PHSystem,
    s: &CostPerturbation,
    mu_hint: Option<C64>,
    opts: &AnalysisOptions,
) -> Result<DrazinData> {
    let p = build_pencil(sys, s)?;
    if !regular_by_det_sampling(&p, opts.seed).regular {
        return Err(Error::SingularPencil);
    }
    if let Some(mu) = mu_hint {
        return drazin_data_at(&p, mu, opts.tol_rel);
    }
    // Real shifts keep every factor of a real system real.
    let mut candidates = Vec::new();
    if sys.field() == Field::Real {
        let base = 1.0 + norm2(&sys.f());
        candidates.extend((0..=20).map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            C64::new(sign * base * (1.0 + k as f64 / 7.0), 0.0)
        }));
    }
    candidates.extend(mu_candidates(sys));
    for &mu in &candidates {
        match drazin_data_at(&p, mu, opts.tol_rel) {
            Ok(dd) => return Ok(dd),
            Err(Error::SpectrumClash { .. })
            | Err(Error::InvalidInput(_))
            | Err(Error::NumericalFailure(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::MuSearchExhausted {
        tried: candidates.len(),
    })
}

/// The `n x n` blocks of a `2n x 2n` flow matrix.
#[derive(Clone, Debug)]
pub struct Blocks {
    pub e1: Mat,
    pub e2: Mat,
    pub e3: Mat,
    pub e4: Mat,
}

impl Blocks {
    fn split(h: &Mat, n: usize) -> Self {
        Self {
            e1: h.view((0, 0), (n, n)).into_owned(),
            e2: h.view((0, n), (n, n)).into_owned(),
            e3: h.view((n, 0), (n, n)).into_owned(),
            e4: h.view((n, n), (n, n)).into_owned(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowBlocks {
    pub t: f64,
    /// `exp(-G (t - t0))`.
    pub full: Mat,
    /// `exp(-G (t - t0)) N^D N`, the flow restricted to admissible data.
    pub projected: Mat,
    pub raw: Blocks,
    pub proj: Blocks,
}

pub fn flow_at(dd: &DrazinData, t: f64, t0: f64) -> Result<FlowBlocks> {
    let n = dd.n();
    let full = linalg::expm(&(&dd.generator * C64::new(-(t - t0), 0.0)))?;
    let projected = &full * &dd.n_drazin.projector;
    Ok(FlowBlocks {
        t,
        raw: Blocks::split(&full, n),
        proj: Blocks::split(&projected, n),
        full,
        projected,
    })
}

/// State feedback form of an optimal solution.
#[derive(Clone, Debug)]
pub struct Feedback {
    /// `M_mu N^D`.
    pub gain: Mat,
    /// `N^D (I - mu N)`.
    pub generator: Mat,
    /// `[lambda(t0); x(t0)]`.
    pub initial: CVector,
    pub t0: f64,
}

impl Feedback {
    /// `[lambda(t); x(t)]`.
    pub fn stacked_at(&self, t: f64) -> Result<CVector> {
        let h = linalg::expm(&(&self.generator * C64::new(-(t - self.t0), 0.0)))?;
        Ok(h * &self.initial)
    }

    pub fn control_at(&self, t: f64) -> Result<CVector> {
        Ok(&self.gain * self.stacked_at(t)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BvpPath {
    /// Initial co-state from the invertible lower-left flow block.
    Direct,
    /// Minimum-norm least squares over the admissible subspace.
    LeastSquares,
    /// Initial value problem, no boundary condition imposed.
    InitialValue,
}

#[derive(Clone, Debug)]
pub struct BvpSolution {
    pub lambda0: CVector,
    pub path: BvpPath,
    /// Dimension of the set of initial co-states that solve the problem.
    pub nonuniqueness_dim: usize,
    /// Residual of the boundary/admissibility equations at the solution.
    pub feasibility_residual: f64,
    pub adjoint: Vec<CVector>,
    pub trajectory: Trajectory,
    pub feedback: Feedback,
    /// `max |E z' - A_S z| / (1 + |A_S| |z|_inf)`, derivative by finite differences.
    pub dae_residual: f64,
    pub warnings: Vec<String>,
}

/// Derivative weights of the Lagrange interpolant through `nodes` at `at`.
fn lagrange_derivative_weights(nodes: &[f64], at: f64) -> Vec<f64> {
    let k = nodes.len();
    (0..k)
        .map(|j| {
            let mut sum = 0.0;
            for l in 0..k {
                if l == j {
                    continue;
                }
                let mut term = 1.0 / (nodes[j] - nodes[l]);
                for m in 0..k {
                    if m != j && m != l {
                        term *= (at - nodes[m]) / (nodes[j] - nodes[m]);
                    }
                }
                sum += term;
            }
            sum
        })
        .collect()
}

/// Five-point finite-difference derivative on a possibly non-uniform grid.
pub fn differentiate(times: &[f64], values: &[CVector]) -> Vec<CVector> {
    let len = times.len();
    let width = len.min(5);
    (0..len)
        .map(|k| {
            let start = k.saturating_sub(width / 2).min(len - width);
            let nodes = &times[start..start + width];
            let w = lagrange_derivative_weights(nodes, times[k]);
            let mut d = CVector::zeros(values[k].len());
            for (j, wj) in w.iter().enumerate() {
                d += &values[start + j] * C64::new(*wj, 0.0);
            }
            d
        })
        .collect()
}

/// Normalised residual of `E z' = A_S z` along sampled `z = [lambda; x; u]`.
pub fn dae_residual(p: &OptimalityPencil, times: &[f64], z: &[CVector]) -> f64 {
    if times.len() < 2 {
        return 0.0;
    }
    let dz = differentiate(times, z);
    let a_norm = norm2(p.a());
    let z_sup = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let worst = z
        .iter()
        .zip(&dz)
        .map(|(zk, dk)| (p.e() * dk - p.a() * zk).norm())
        .fold(0.0, f64::max);
    worst / (1.0 + a_norm * z_sup)
}

fn uniform_grid(t0: f64, t1: f64, points: usize) -> Vec<f64> {
    let k = points.max(2);
    (0..k)
        .map(|i| t0 + (t1 - t0) * i as f64 / (k - 1) as f64)
        .collect()
}

fn sample(
    dd: &DrazinData,
    w0: CVector,
    times: &[f64],
    path: BvpPath,
    nonuniqueness_dim: usize,
    feasibility_residual: f64,
) -> Result<BvpSolution> {
    let n = dd.n();
    let t0 = times[0];
    let feedback = Feedback {
        gain: dd.gain(),
        generator: dd.generator.clone(),
        initial: w0.clone(),
        t0,
    };
    let mut adjoint = Vec::with_capacity(times.len());
    let mut state = Vec::with_capacity(times.len());
    let mut control = Vec::with_capacity(times.len());
    let mut stacked = Vec::with_capacity(times.len());
    for &t in times {
        let w = feedback.stacked_at(t)?;
        let u = &feedback.gain * &w;
        adjoint.push(w.rows(0, n).into_owned());
        state.push(w.rows(n, n).into_owned());
        let mut z = CVector::zeros(2 * n + u.len());
        z.rows_mut(0, 2 * n).copy_from(&w);
        z.rows_mut(2 * n, u.len()).copy_from(&u);
        stacked.push(z);
        control.push(u);
    }
    let residual = dae_residual(&dd.pencil, times, &stacked);
    let mut warnings = Vec::new();
    if !dd.system().is_controllable() {
        warnings.push(
            "system is not controllable; normalising the cost multiplier to one is an assumption"
                .to_string(),
        );
    }
    if residual > DAE_RESIDUAL_WARN {
        warnings.push(format!(
            "DAE residual {residual:.3e} exceeds {DAE_RESIDUAL_WARN:.0e}; refine the grid"
        ));
    }
    Ok(BvpSolution {
        lambda0: w0.rows(0, n).into_owned(),
        path,
        nonuniqueness_dim,
        feasibility_residual,
        adjoint,
        trajectory: Trajectory {
            times: times.to_vec(),
            state,
            control,
        },
        feedback,
        dae_residual: residual,
        warnings,
    })
}

fn stack(a: &CVector, b: &CVector) -> CVector {
    let mut out = CVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidInput(
            "time grid needs at least 2 points".into(),
        ));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "time grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Samples the solution through an admissible `(lambda0, x0)`.
pub fn solve_ivp(
    dd: &DrazinData,
    lambda0: &CVector,
    x0: &CVector,
    t_grid: &[f64],
) -> Result<BvpSolution> {
    let n = dd.n();
    if lambda0.len() != n || x0.len() != n {
        return Err(Error::InvalidInput(format!(
            "initial values must have length {n}"
        )));
    }
    check_grid(t_grid)?;
    let w0 = stack(lambda0, x0);
    let residual = dd.admissibility_residual(&w0);
    if residual > TOL_ADMISSIBLE * (1.0 + w0.norm()) {
        return Err(Error::InadmissibleInitialValue { residual });
    }
    sample(dd, w0, t_grid, BvpPath::InitialValue, 0, residual)
}

/// Truncated-SVD least squares with the smallest truncation rank, starting
/// from the default numerical rank, whose residual meets `tol` (discrepancy
/// principle). Short horizons make the boundary system badly conditioned
/// without making it infeasible, so small singular values are only used when
/// needed. Returns the best attempt when none meets `tol`.
fn truncated_lsq(lhs: &Mat, rhs: &CVector, tol: f64) -> (CVector, f64) {
    let svd = linalg::full_svd(lhs);
    let smax = svd.sv.first().copied().unwrap_or(0.0);
    let start = svd
        .sv
        .iter()
        .filter(|&&s| s > DEFAULT_TOL_REL * smax)
        .count();
    let last = svd.sv.iter().filter(|&&s| s > TOL_LSQ * smax).count();
    let coeffs = svd.u.adjoint() * rhs;
    let mut c = CVector::zeros(lhs.ncols());
    for i in 0..start {
        c += svd.v.column(i) * (coeffs[i] / svd.sv[i]);
    }
    let mut best = (c.clone(), (lhs * &c - rhs).norm());
    for i in start..last {
        if best.1 <= tol {
            break;
        }
        c += svd.v.column(i) * (coeffs[i] / svd.sv[i]);
        let residual = (lhs * &c - rhs).norm();
        if residual < best.1 {
            best = (c.clone(), residual);
        }
    }
    best
}

/// Optimal transfer from `x0` at `t0` to `x1` at `t1`.
pub fn solve_bvp(
    dd: &DrazinData,
    x0: &CVector,
    x1: &CVector,
    t0: f64,
    t1: f64,
    grid_points: usize,
) -> Result<BvpSolution> {
    let n = dd.n();
    if x0.len() != n || x1.len() != n {
        return Err(Error::InvalidInput(format!(
            "boundary values must have length {n}"
        )));
    }
    if !t0.is_finite() || !t1.is_finite() || t1 <= t0 {
        return Err(Error::InvalidInput(format!(
            "need t0 < t1, got [{t0}, {t1}]"
        )));
    }
    let times = uniform_grid(t0, t1, grid_points);
    let flow = flow_at(dd, t1, t0)?;
    let e3 = &flow.proj.e3;
    let e3_sv = linalg::singular_values(e3);
    let e3_max = e3_sv.first().copied().unwrap_or(0.0);
    let e3_min = e3_sv.last().copied().unwrap_or(0.0);
    let tol_feasible = TOL_ADMISSIBLE * (1.0 + x1.norm());

    if e3_max > 0.0 && e3_min > TOL_E3 * e3_max {
        let rhs = x1 - &flow.proj.e4 * x0;
        let lambda0 = e3
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NumericalFailure("E3 solve failed".into()))?;
        let w0 = stack(&lambda0, x0);
        let residual = dd.admissibility_residual(&w0);
        if residual <= TOL_ADMISSIBLE * (1.0 + w0.norm()) {
            return sample(dd, w0, &times, BvpPath::Direct, 0, residual);
        }
        // An ill-conditioned E3 can spoil lambda0; the least-squares path
        // below stays inside the admissible set and decides feasibility.
    }

    // Least squares over w = U c, U an orthonormal admissible basis:
    // x-part of U c is x0, x-part of H(t1) U c is x1.
    let u = dd.admissible.basis();
    if u.ncols() == 0 {
        let residual = x0.norm().max(x1.norm());
        if residual > tol_feasible {
            return Err(Error::NoOptimalTrajectory { residual });
        }
        return sample(
            dd,
            CVector::zeros(2 * n),
            &times,
            BvpPath::LeastSquares,
            0,
            residual,
        );
    }
    let hu = &flow.full * u;
    let lhs = vstack(&u.rows(n, n).into_owned(), &hu.rows(n, n).into_owned());
    let rhs = stack(x0, x1);
    let (c, residual) = truncated_lsq(&lhs, &rhs, tol_feasible);
    if residual > tol_feasible {
        return Err(Error::NoOptimalTrajectory { residual });
    }
    let (_, kernel) = rank_and_kernel(&lhs, DEFAULT_TOL_REL)?;
    let w0 = u * c;
    sample(
        dd,
        w0,
        &times,
        BvpPath::LeastSquares,
        kernel.dim(),
        residual,
    )
}

/// Map `x0 -> x(t0 + tau)` along optimal arcs, available when every state is
/// the state part of exactly one admissible initial value.
pub fn boundary_map(dd: &DrazinData, tau: f64) -> Result<Option<Mat>> {
    let n = dd.n();
    let u = dd.admissible.basis();
    if u.ncols() != n {
        return Ok(None);
    }
    let ux = u.rows(n, n).into_owned();
    let sv = linalg::singular_values(&ux);
    if sv.last().copied().unwrap_or(0.0) <= TOL_E3 * sv.first().copied().unwrap_or(0.0) {
        return Ok(None);
    }
    let flow = flow_at(dd, tau, 0.0)?;
    let hx = (&flow.full * u).rows(n, n).into_owned();
    Ok(Some(hx * inverse(&ux)?))
}

#[derive(Clone, Debug)]
pub struct MuIndependence {
    pub equal: bool,
    pub residual: f64,
    pub dims: (usize, usize),
}

/// Compares the admissible subspaces obtained at two shifts.
pub fn mu_independence_check(
    sys: &PHSystem,
    s: &CostPerturbation,
    mu1: C64,
    mu2: C64,
) -> Result<MuIndependence> {
    let a = build_drazin_data(sys, s, Some(mu1))?;
    let b = build_drazin_data(sys, s, Some(mu2))?;
    let residual = a.admissible.distance(&b.admissible);
    Ok(MuIndependence {
        equal: a.admissible.dim() == b.admissible.dim() && residual <= 1e-8,
        residual,
        dims: (a.admissible.dim(), b.admissible.dim()),
    })
}

/// `[lambda; x]` for sampled co-state and state (helper for callers building
/// their own initial values).
pub fn stacked(lambda: &CVector, x: &CVector) -> CVector {
    stack(lambda, x)
}
