//! Dense complex linear algebra used throughout the crate.
//!
//! Everything works in complex double precision; real data is embedded with
//! zero imaginary parts. Rank decisions are made against singular values with
//! a relative tolerance and an optional absolute floor, so that products which
//! vanish in exact arithmetic are not promoted to full rank by rounding noise.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default relative rank tolerance.
pub const DEFAULT_TOL_REL: f64 = 1e-10;
/// Orthonormality tolerance for subspace bases.
pub const TOL_ORTH: f64 = 1e-12;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Builds a complex matrix from row-major real entries.
pub fn real_matrix(rows: usize, cols: usize, entries: &[f64]) -> Mat {
    assert_eq!(
        entries.len(),
        rows * cols,
        "entry count does not match shape"
    );
    Mat::from_row_iterator(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)))
}

/// Builds a complex matrix from row-major complex entries.
pub fn complex_matrix(rows: usize, cols: usize, entries: &[C64]) -> Mat {
    assert_eq!(
        entries.len(),
        rows * cols,
        "entry count does not match shape"
    );
    Mat::from_row_slice(rows, cols, entries)
}

pub fn identity(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> Mat {
    Mat::zeros(rows, cols)
}

pub fn ensure_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} has non-finite entries"
        )))
    }
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_real(m: &Mat, tol: f64) -> bool {
    m.iter().all(|z| z.im.abs() <= tol * (1.0 + z.re.abs()))
}

/// Spectral norm.
pub fn norm2(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Induced 1-norm (maximum column sum).
pub fn norm1(m: &Mat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Singular values in descending order.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = match to_faer(m).singular_values() {
        Ok(sv) => sv,
        Err(_) => m.clone().singular_values().iter().copied().collect(),
    };
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Smallest singular value of a square matrix.
pub fn sigma_min(m: &Mat) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Full singular value decomposition with descending singular values.
///
/// `u` holds the left singular vectors belonging to the first `min(rows, cols)`
/// values, `v` is always the complete `cols x cols` unitary factor, so that
/// its trailing columns span the kernel.
pub(crate) struct FullSvd {
    pub u: Mat,
    pub sv: Vec<f64>,
    pub v: Mat,
}

fn to_faer(m: &Mat) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> Mat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

// nalgebra's complex SVD can lose accuracy in the singular vectors when
// singular values repeat, so faer is used and nalgebra is only a fallback.
pub(crate) fn full_svd(m: &Mat) -> FullSvd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return FullSvd {
            u: zeros(rows, 0),
            sv: Vec::new(),
            v: identity(cols),
        };
    }
    let kept = rows.min(cols);
    match to_faer(m).svd() {
        Ok(svd) => FullSvd {
            u: from_faer(svd.U().get(.., ..kept)),
            sv: svd.S().column_vector().iter().map(|z| z.re).collect(),
            v: from_faer(svd.V()),
        },
        Err(_) => full_svd_nalgebra(m),
    }
}

fn full_svd_nalgebra(m: &Mat) -> FullSvd {
    let (rows, cols) = m.shape();
    // nalgebra returns thin factors; padding with zero rows keeps the
    // singular values and the kernel while making V square.
    let padded = if rows < cols {
        let mut p = zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, true, true);
    let u_raw = svd.u.expect("left singular vectors requested");
    let vt_raw = svd.v_t.expect("right singular vectors requested");
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let kept = rows.min(cols);
    let mut u = zeros(rows, kept);
    let mut v = zeros(cols, cols);
    let mut sv = Vec::with_capacity(kept);
    for (dst, &src) in order.iter().enumerate() {
        if dst < kept {
            sv.push(svd.singular_values[src]);
            for i in 0..rows {
                u[(i, dst)] = u_raw[(i, src)];
            }
        }
        for i in 0..cols {
            v[(i, dst)] = vt_raw[(src, i)].conj();
        }
    }
    FullSvd { u, sv, v }
}

/// Rank cut-off: `tol * max(sigma_max, floor)`.
fn rank_from(sv: &[f64], tol: f64, floor: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    let scale = smax.max(floor);
    if scale == 0.0 {
        return 0;
    }
    let thr = tol * scale;
    sv.iter().filter(|&&s| s > thr).count()
}

/// Numerical rank and an orthonormal kernel basis.
///
/// Singular values above `tol_rel * sigma_max` count towards the rank.
pub fn rank_and_kernel(m: &Mat, tol_rel: f64) -> Result<(usize, Subspace)> {
    rank_and_kernel_scaled(m, tol_rel, 0.0)
}

/// Like [`rank_and_kernel`], with the cut-off raised to at least
/// `tol_rel * floor`. `floor` is the natural magnitude of the matrix (for a
/// product, the product of the factor norms).
pub fn rank_and_kernel_scaled(m: &Mat, tol_rel: f64, floor: f64) -> Result<(usize, Subspace)> {
    check_tol(tol_rel)?;
    ensure_finite(m, "matrix")?;
    let cols = m.ncols();
    let svd = full_svd(m);
    let rank = rank_from(&svd.sv, tol_rel, floor);
    let kernel = svd.v.columns(rank, cols - rank).into_owned();
    Ok((rank, Subspace::from_basis_unchecked(cols, kernel)))
}

pub fn rank(m: &Mat, tol_rel: f64) -> usize {
    rank_from(&singular_values(m), tol_rel, 0.0)
}

pub fn rank_scaled(m: &Mat, tol_rel: f64, floor: f64) -> usize {
    rank_from(&singular_values(m), tol_rel, floor)
}

/// Orthonormal basis of the column space.
pub fn column_space(m: &Mat, tol_rel: f64, floor: f64) -> Result<Subspace> {
    check_tol(tol_rel)?;
    ensure_finite(m, "matrix")?;
    let rows = m.nrows();
    if m.ncols() == 0 {
        return Ok(Subspace::zero(rows));
    }
    let svd = full_svd(m);
    let r = rank_from(&svd.sv, tol_rel, floor);
    Ok(Subspace::from_basis_unchecked(
        rows,
        svd.u.columns(0, r).into_owned(),
    ))
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )))
    }
}

/// A linear subspace of C^n stored through an orthonormal basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    ambient: usize,
    basis: Mat,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Self {
            ambient,
            basis: zeros(ambient, 0),
        }
    }

    pub fn full(ambient: usize) -> Self {
        Self {
            ambient,
            basis: identity(ambient),
        }
    }

    /// Wraps a basis that is already orthonormal; fails if it is not.
    pub fn from_orthonormal(basis: Mat) -> Result<Self> {
        let k = basis.ncols();
        let gram = basis.adjoint() * &basis - identity(k);
        let dev = max_abs(&gram);
        if dev > TOL_ORTH {
            return Err(Error::InvalidInput(format!(
                "basis deviates from orthonormality by {dev:.3e}"
            )));
        }
        Ok(Self {
            ambient: basis.nrows(),
            basis,
        })
    }

    /// Wraps a basis known to be orthonormal by construction (for example a
    /// product of two orthonormal factors), skipping the check.
    pub fn from_orthonormal_trusted(ambient: usize, basis: Mat) -> Self {
        Self::from_basis_unchecked(ambient, basis)
    }

    fn from_basis_unchecked(ambient: usize, basis: Mat) -> Self {
        debug_assert_eq!(basis.nrows(), ambient);
        Self { ambient, basis }
    }

    /// Span of the columns of `m` (pure relative rank tolerance).
    pub fn span(m: &Mat, tol_rel: f64) -> Result<Self> {
        column_space(m, tol_rel, 0.0)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_trivial(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> Mat {
        &self.basis * self.basis.adjoint()
    }

    pub fn complement_projector(&self) -> Mat {
        identity(self.ambient) - self.projector()
    }

    pub fn orthogonal_complement(&self) -> Self {
        let svd = full_svd(&self.basis.adjoint());
        let k = self.dim();
        let basis = if k == 0 {
            identity(self.ambient)
        } else {
            svd.v.columns(k, self.ambient - k).into_owned()
        };
        Self::from_basis_unchecked(self.ambient, basis)
    }

    /// Largest distance of a unit vector of `other` from `self`.
    pub fn containment_residual(&self, other: &Subspace) -> f64 {
        if other.is_trivial() {
            return 0.0;
        }
        let r = &other.basis - &self.basis * (self.basis.adjoint() * &other.basis);
        norm2(&r)
    }

    pub fn contains(&self, other: &Subspace, tol: f64) -> bool {
        self.ambient == other.ambient && self.containment_residual(other) <= tol
    }

    /// Mutual projector residual `max(|(I-P_U) V|, |(I-P_V) U|)`.
    pub fn distance(&self, other: &Subspace) -> f64 {
        if self.dim() != other.dim() {
            return 1.0;
        }
        self.containment_residual(other)
            .max(other.containment_residual(self))
    }

    pub fn same_as(&self, other: &Subspace, tol: f64) -> bool {
        self.ambient == other.ambient && self.dim() == other.dim() && self.distance(other) <= tol
    }

    /// Image of the subspace under `m`.
    pub fn mapped_by(&self, m: &Mat, tol_rel: f64) -> Result<Subspace> {
        if m.ncols() != self.ambient {
            return Err(Error::InvalidInput(format!(
                "cannot map a subspace of C^{} by a {}x{} matrix",
                self.ambient,
                m.nrows(),
                m.ncols()
            )));
        }
        column_space(&(m * &self.basis), tol_rel, norm2(m))
    }
}

fn same_ambient(u: &Subspace, v: &Subspace) -> Result<()> {
    if u.ambient != v.ambient {
        return Err(Error::InvalidInput(format!(
            "subspaces live in C^{} and C^{}",
            u.ambient, v.ambient
        )));
    }
    Ok(())
}

/// Intersection, computed as the kernel of the stacked complement projectors.
pub fn subspace_intersection(u: &Subspace, v: &Subspace, tol_rel: f64) -> Result<Subspace> {
    same_ambient(u, v)?;
    if u.is_trivial() || v.is_trivial() {
        return Ok(Subspace::zero(u.ambient));
    }
    let n = u.ambient;
    let mut stacked = zeros(2 * n, n);
    stacked
        .view_mut((0, 0), (n, n))
        .copy_from(&u.complement_projector());
    stacked
        .view_mut((n, 0), (n, n))
        .copy_from(&v.complement_projector());
    let (_, k) = rank_and_kernel_scaled(&stacked, tol_rel, 1.0)?;
    Ok(k)
}

/// `dim(U + V)`.
pub fn subspace_sum_dim(u: &Subspace, v: &Subspace, tol_rel: f64) -> Result<usize> {
    same_ambient(u, v)?;
    let mut cat = zeros(u.ambient, u.dim() + v.dim());
    cat.columns_mut(0, u.dim()).copy_from(&u.basis);
    cat.columns_mut(u.dim(), v.dim()).copy_from(&v.basis);
    Ok(rank_scaled(&cat, tol_rel, 1.0))
}

/// Preimage `{ v : M v in W }`.
pub fn preimage(m: &Mat, w: &Subspace, tol_rel: f64) -> Result<Subspace> {
    if m.nrows() != w.ambient {
        return Err(Error::InvalidInput(format!(
            "preimage under a {}x{} matrix of a subspace of C^{}",
            m.nrows(),
            m.ncols(),
            w.ambient
        )));
    }
    let residual_map = w.complement_projector() * m;
    let (_, k) = rank_and_kernel_scaled(&residual_map, tol_rel, norm2(m))?;
    Ok(k)
}

/// Moore-Penrose inverse keeping exactly the `rank` largest singular values.
pub fn pinv_with_rank(m: &Mat, rank: usize) -> Mat {
    let (rows, cols) = m.shape();
    let svd = full_svd(m);
    let r = rank.min(svd.sv.len());
    let mut out = zeros(cols, rows);
    for k in 0..r {
        let s = svd.sv[k];
        if s == 0.0 {
            continue;
        }
        let vk = svd.v.column(k);
        let uk = svd.u.column(k);
        out += (vk * uk.adjoint()) * C64::new(1.0 / s, 0.0);
    }
    out
}

/// Moore-Penrose inverse with relative singular value cut-off.
pub fn pinv(m: &Mat, tol_rel: f64) -> Mat {
    let r = rank(m, tol_rel);
    pinv_with_rank(m, r)
}

/// Inverse through LU, rejecting numerically singular input.
pub fn inverse(m: &Mat) -> Result<Mat> {
    if !m.is_square() {
        return Err(Error::InvalidInput("inverse of a non-square matrix".into()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(zeros(0, 0));
    }
    let smax = norm2(m);
    let smin = sigma_min(m);
    if smax == 0.0 || smin <= 1e-14 * smax {
        return Err(Error::NumericalFailure(format!(
            "matrix is numerically singular (sigma_min/sigma_max = {:.3e})",
            if smax == 0.0 { 0.0 } else { smin / smax }
        )));
    }
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("LU inverse failed".into()))
}

pub fn matrix_power(m: &Mat, k: usize) -> Mat {
    let mut out = identity(m.nrows());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

/// Drazin inverse together with the index and the spectral projector.
#[derive(Clone, Debug)]
pub struct DrazinResult {
    pub drazin: Mat,
    pub index: usize,
    pub projector: Mat,
}

/// Residuals of the three defining identities and the projector idempotence.
#[derive(Clone, Copy, Debug)]
pub struct DrazinResiduals {
    pub commute: f64,
    pub inner: f64,
    pub annihilate: f64,
    pub idempotent: f64,
}

impl DrazinResiduals {
    pub fn max(&self) -> f64 {
        self.commute
            .max(self.inner)
            .max(self.annihilate)
            .max(self.idempotent)
    }
}

pub fn drazin_residuals(m: &Mat, d: &Mat, index: usize) -> DrazinResiduals {
    let dm = d * m;
    let md = m * d;
    let pow = matrix_power(m, index);
    DrazinResiduals {
        commute: norm2(&(&dm - &md)),
        inner: norm2(&(&dm * d - d)),
        annihilate: norm2(&(&dm * &pow - &pow)),
        idempotent: norm2(&(&dm * &dm - &dm)),
    }
}

/// Tolerance the Drazin identities are checked against.
pub fn drazin_tolerance(m: &Mat, index: usize) -> f64 {
    1e-9 * (1.0 + norm2(m)).powi(index as i32 + 1)
}

/// Drazin inverse via index stabilisation and `M^nu pinv(M^(2nu+1)) M^nu`.
pub fn drazin(m: &Mat) -> Result<DrazinResult> {
    drazin_with_tol(m, DEFAULT_TOL_REL)
}

pub fn drazin_with_tol(m: &Mat, tol_rel: f64) -> Result<DrazinResult> {
    check_tol(tol_rel)?;
    if !m.is_square() {
        return Err(Error::InvalidInput(
            "Drazin inverse of a non-square matrix".into(),
        ));
    }
    ensure_finite(m, "matrix")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(DrazinResult {
            drazin: zeros(0, 0),
            index: 0,
            projector: zeros(0, 0),
        });
    }
    let norm = norm2(m);
    let mut power = identity(n);
    let mut prev_rank = n;
    let mut index = None;
    let mut ranks = vec![n];
    for k in 0..=n {
        let next = &power * m;
        // Relative to |M^(k+1)|, but never below the rounding level of the
        // computed power, so nilpotent noise is not mistaken for rank.
        let floor = 1e3 * n as f64 * f64::EPSILON * norm.powi(k as i32 + 1) / tol_rel;
        let r = rank_scaled(&next, tol_rel, floor);
        ranks.push(r);
        if r == prev_rank {
            index = Some(k);
            break;
        }
        prev_rank = r;
        power = next;
    }
    let index = index.ok_or_else(|| {
        Error::NumericalFailure(format!("rank sequence {ranks:?} did not stabilise"))
    })?;
    let core_rank = ranks[index];
    let m_nu = matrix_power(m, index);
    let m_big = matrix_power(m, 2 * index + 1);
    let eps = drazin_tolerance(m, index);
    let mut d = &m_nu * pinv_with_rank(&m_big, core_rank) * &m_nu;
    let mut res = drazin_residuals(m, &d, index);
    // The pseudoinverse of M^(2nu+1) squares the conditioning of the core
    // part; the core-nilpotent splitting does not (at nu = 0 it is an LU
    // inverse). Keep the better one.
    if let Some(alt) = drazin_by_splitting(m, &m_nu, core_rank) {
        let alt_res = drazin_residuals(m, &alt, index);
        if alt_res.max() < res.max() {
            d = alt;
            res = alt_res;
        }
    }
    if res.max() > eps {
        return Err(Error::NumericalFailure(format!(
            "Drazin identities violated: {res:?} exceeds {eps:.3e}"
        )));
    }
    let projector = &d * m;
    Ok(DrazinResult {
        drazin: d,
        index,
        projector,
    })
}

/// `T diag(C^-1, 0) T^-1` with `T = [im M^nu, ker M^nu]` and `C` the
/// restriction of `M` to `im M^nu`.
fn drazin_by_splitting(m: &Mat, m_nu: &Mat, core_rank: usize) -> Option<Mat> {
    let n = m.nrows();
    let svd = full_svd(m_nu);
    let range = svd.u.columns(0, core_rank).into_owned();
    let kernel = svd.v.columns(core_rank, n - core_rank).into_owned();
    let t = hstack(&range, &kernel);
    let t_inv = t.clone().lu().try_inverse()?;
    let split = &t_inv * m * &t;
    let core = split.view((0, 0), (core_rank, core_rank)).into_owned();
    let core_inv = core.lu().try_inverse()?;
    let mut block = zeros(n, n);
    block
        .view_mut((0, 0), (core_rank, core_rank))
        .copy_from(&core_inv);
    Some(&t * block * t_inv)
}

// Pade coefficients for scaling and squaring (Higham 2005).
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

fn scale(m: &Mat, s: f64) -> Mat {
    m * C64::new(s, 0.0)
}

fn pade_low(a: &Mat, b: &[f64]) -> (Mat, Mat) {
    let n = a.nrows();
    let a2 = a * a;
    let mut u = scale(&identity(n), b[1]);
    let mut v = scale(&identity(n), b[0]);
    let mut p = identity(n);
    let degree = b.len() - 1;
    for k in 1..=degree / 2 {
        p = &p * &a2;
        u += scale(&p, b[2 * k + 1]);
        v += scale(&p, b[2 * k]);
    }
    (a * u, v)
}

fn pade13(a: &Mat) -> (Mat, Mat) {
    let b = &PADE13;
    let n = a.nrows();
    let id = identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (scale(&a6, b[13]) + scale(&a4, b[11]) + scale(&a2, b[9]));
    let u =
        a * (inner_u + scale(&a6, b[7]) + scale(&a4, b[5]) + scale(&a2, b[3]) + scale(&id, b[1]));
    let inner_v = &a6 * (scale(&a6, b[12]) + scale(&a4, b[10]) + scale(&a2, b[8]));
    let v = inner_v + scale(&a6, b[6]) + scale(&a4, b[4]) + scale(&a2, b[2]) + scale(&id, b[0]);
    (u, v)
}

/// Matrix exponential by scaling and squaring with diagonal Pade approximants.
pub fn expm(m: &Mat) -> Result<Mat> {
    if !m.is_square() {
        return Err(Error::InvalidInput(
            "exponential of a non-square matrix".into(),
        ));
    }
    ensure_finite(m, "matrix")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(zeros(0, 0));
    }
    let norm = norm1(m);
    let low = THETA.iter().find(|(_, theta)| norm <= *theta);
    let (u, v, squarings) = if let Some(&(deg, _)) = low {
        let b: &[f64] = match deg {
            3 => &PADE3,
            5 => &PADE5,
            7 => &PADE7,
            _ => &PADE9,
        };
        let (u, v) = pade_low(m, b);
        (u, v, 0)
    } else {
        let s = ((norm / THETA13).log2().ceil()).max(0.0) as i32;
        if s > 1000 {
            return Err(Error::NumericalFailure(format!(
                "matrix norm {norm:.3e} too large for the exponential"
            )));
        }
        let a = scale(m, 2f64.powi(-s));
        let (u, v) = pade13(&a);
        (u, v, s as usize)
    };
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut r = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("singular Pade denominator".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalFailure(
            "matrix exponential overflowed".into(),
        ));
    }
    Ok(r)
}

/// Hermitian part `(M + M^H)/2`.
pub fn hermitian_part(m: &Mat) -> Mat {
    scale(&(m + m.adjoint()), 0.5)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let h = hermitian_part(m);
    let mut ev: Vec<f64> = match to_faer(&h).self_adjoint_eigenvalues(faer::Side::Lower) {
        Ok(ev) => ev,
        Err(_) => SymmetricEigen::new(h).eigenvalues.iter().copied().collect(),
    };
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Deviation from Hermitian symmetry and most negative eigenvalue of the
/// Hermitian part (clamped at zero).
pub fn hermitian_psd_defects(m: &Mat) -> (f64, f64) {
    let asym = max_abs(&(m - m.adjoint()));
    let neg = hermitian_eigenvalues(m)
        .first()
        .map(|&l| (-l).max(0.0))
        .unwrap_or(0.0);
    (asym, neg)
}

pub fn is_hermitian_psd(m: &Mat, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let bound = tol * (1.0 + norm2(m));
    let (asym, neg) = hermitian_psd_defects(m);
    asym <= bound && neg <= bound
}

/// Stacks `[a; b]`.
pub fn vstack(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

/// Concatenates `[a, b]`.
pub fn hstack(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

pub fn vector(entries: &[C64]) -> CVector {
    CVector::from_column_slice(entries)
}

/// Single-column matrix holding `v`.
pub fn as_column(v: &CVector) -> Mat {
    Mat::from_column_slice(v.len(), 1, v.as_slice())
}

pub fn real_vector(entries: &[f64]) -> CVector {
    CVector::from_iterator(entries.len(), entries.iter().map(|&x| C64::new(x, 0.0)))
}
