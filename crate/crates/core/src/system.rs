//! Port-Hamiltonian quadruples and quantities read off them directly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, column_space, hermitian_psd_defects, hstack, norm2, CVector, Mat, C64, DEFAULT_TOL_REL,
};

/// Scalar field the data was given over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

/// Which structural requirement a matrix fails.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureKind {
    JNotSkewHermitian,
    RNotHermitian,
    RNotPositiveSemidefinite,
    QNotHermitian,
    QNotPositiveSemidefinite,
    SNotHermitian,
    SNotPositiveSemidefinite,
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StructureKind::JNotSkewHermitian => "J is not skew-Hermitian",
            StructureKind::RNotHermitian => "R is not Hermitian",
            StructureKind::RNotPositiveSemidefinite => "R is not positive semidefinite",
            StructureKind::QNotHermitian => "Q is not Hermitian",
            StructureKind::QNotPositiveSemidefinite => "Q is not positive semidefinite",
            StructureKind::SNotHermitian => "S is not Hermitian",
            StructureKind::SNotPositiveSemidefinite => "S is not positive semidefinite",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub which: StructureKind,
    /// Size of the defect (max-entry asymmetry or most negative eigenvalue).
    pub magnitude: f64,
}

/// Validated port-Hamiltonian system `x' = (J - R) Q x + B u`, `y = B^H Q x`.
#[derive(Clone, Debug)]
pub struct PHSystem {
    j: Mat,
    r: Mat,
    q: Mat,
    b: Mat,
    field: Field,
}

fn square_of(name: &str, m: &Mat, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "{name} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn hermitian_psd_violations(
    m: &Mat,
    tol: f64,
    not_herm: StructureKind,
    not_psd: StructureKind,
    out: &mut Vec<Violation>,
) {
    let bound = tol * (1.0 + norm2(m));
    let (asym, neg) = hermitian_psd_defects(m);
    if asym > bound {
        out.push(Violation {
            which: not_herm,
            magnitude: asym,
        });
    }
    if neg > bound {
        out.push(Violation {
            which: not_psd,
            magnitude: neg,
        });
    }
}

impl PHSystem {
    /// Checks dimensions and the structure `J = -J^H`, `R = R^H >= 0`,
    /// `Q = Q^H >= 0` with the default tolerance.
    pub fn validate(j: Mat, r: Mat, q: Mat, b: Mat) -> Result<Self> {
        Self::validate_with_tol(j, r, q, b, DEFAULT_TOL_REL)
    }

    pub fn validate_with_tol(j: Mat, r: Mat, q: Mat, b: Mat, tol: f64) -> Result<Self> {
        let n = j.nrows();
        square_of("J", &j, n)?;
        square_of("R", &r, n)?;
        square_of("Q", &q, n)?;
        if b.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "B has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if n == 0 || b.ncols() == 0 {
            return Err(Error::InvalidInput(
                "system needs at least one state and one input".into(),
            ));
        }
        for (name, m) in [("J", &j), ("R", &r), ("Q", &q), ("B", &b)] {
            linalg::ensure_finite(m, name)?;
        }

        let mut violations = Vec::new();
        let skew = linalg::max_abs(&(&j + j.adjoint()));
        if skew > tol * (1.0 + norm2(&j)) {
            violations.push(Violation {
                which: StructureKind::JNotSkewHermitian,
                magnitude: skew,
            });
        }
        hermitian_psd_violations(
            &r,
            tol,
            StructureKind::RNotHermitian,
            StructureKind::RNotPositiveSemidefinite,
            &mut violations,
        );
        hermitian_psd_violations(
            &q,
            tol,
            StructureKind::QNotHermitian,
            StructureKind::QNotPositiveSemidefinite,
            &mut violations,
        );
        if !violations.is_empty() {
            return Err(Error::StructureViolation(violations));
        }

        let field = if [&j, &r, &q, &b].iter().all(|m| linalg::is_real(m, 0.0)) {
            Field::Real
        } else {
            Field::Complex
        };
        Ok(Self { j, r, q, b, field })
    }

    pub fn n(&self) -> usize {
        self.j.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn j(&self) -> &Mat {
        &self.j
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn field(&self) -> Field {
        self.field
    }

    /// System matrix `(J - R) Q`.
    pub fn f(&self) -> Mat {
        (&self.j - &self.r) * &self.q
    }

    pub fn jq(&self) -> Mat {
        &self.j * &self.q
    }

    pub fn rq(&self) -> Mat {
        &self.r * &self.q
    }

    /// Dissipation weight `Q R Q`.
    pub fn qrq(&self) -> Mat {
        &self.q * &self.r * &self.q
    }

    /// Dimension of the reachable subspace `im [B, FB, ..., F^(n-1) B]`.
    pub fn controllability_rank(&self) -> usize {
        self.controllability_rank_with_tol(DEFAULT_TOL_REL)
    }

    pub fn controllability_rank_with_tol(&self, tol: f64) -> usize {
        let n = self.n();
        let f = self.f();
        let f_norm = norm2(&f);
        let Ok(mut basis) = column_space(&self.b, tol, 0.0) else {
            return 0;
        };
        let mut fresh = basis.basis().clone();
        // Block Arnoldi: only newly found directions are pushed through F, and
        // each batch is orthonormalised, so powers of F never overflow.
        while fresh.ncols() > 0 && basis.dim() < n {
            let image = &f * &fresh;
            let old = basis.basis().clone();
            let residual = &image - &old * (old.adjoint() * &image);
            let new = match column_space(&residual, tol, f_norm) {
                Ok(s) => s.basis().clone(),
                Err(_) => break,
            };
            if new.ncols() == 0 {
                break;
            }
            let Ok(grown) = column_space(&hstack(&old, &new), tol, 1.0) else {
                break;
            };
            if grown.dim() == basis.dim() {
                break;
            }
            basis = grown;
            fresh = new;
        }
        basis.dim()
    }

    /// Kalman rank test. Only used to decide whether normalising the scalar
    /// multiplier of the cost to one is justified.
    pub fn is_controllable(&self) -> bool {
        self.controllability_rank() == self.n()
    }
}

/// Hermitian positive semidefinite weight `S` on the control.
#[derive(Clone, Debug)]
pub struct CostPerturbation {
    s: Mat,
}

impl CostPerturbation {
    pub fn new(s: Mat) -> Result<Self> {
        Self::with_tol(s, DEFAULT_TOL_REL)
    }

    pub fn with_tol(s: Mat, tol: f64) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::InvalidInput(format!(
                "S is {}x{}, expected square",
                s.nrows(),
                s.ncols()
            )));
        }
        linalg::ensure_finite(&s, "S")?;
        let mut violations = Vec::new();
        hermitian_psd_violations(
            &s,
            tol,
            StructureKind::SNotHermitian,
            StructureKind::SNotPositiveSemidefinite,
            &mut violations,
        );
        if !violations.is_empty() {
            return Err(Error::StructureViolation(violations));
        }
        Ok(Self { s })
    }

    pub fn zero(m: usize) -> Self {
        Self {
            s: Mat::zeros(m, m),
        }
    }

    pub fn identity(m: usize) -> Self {
        Self {
            s: Mat::identity(m, m),
        }
    }

    pub fn scaled(&self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "scale must be >= 0, got {eps}"
            )));
        }
        Ok(Self {
            s: &self.s * C64::new(eps, 0.0),
        })
    }

    pub fn matrix(&self) -> &Mat {
        &self.s
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.s.iter().all(|z| *z == C64::new(0.0, 0.0))
    }
}

/// State and control sampled on a common time grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub state: Vec<CVector>,
    pub control: Vec<CVector>,
}

impl Trajectory {
    fn check(&self, n: usize, m: usize) -> Result<()> {
        let k = self.times.len();
        if k < 2 {
            return Err(Error::InvalidInput(format!(
                "trajectory needs at least 2 samples, got {k}"
            )));
        }
        if self.state.len() != k || self.control.len() != k {
            return Err(Error::InvalidInput(
                "times, states and controls have different lengths".into(),
            ));
        }
        if self.state.iter().any(|x| x.len() != n) || self.control.iter().any(|u| u.len() != m) {
            return Err(Error::InvalidInput(format!(
                "samples must have {n} states and {m} controls"
            )));
        }
        if self
            .times
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::InvalidInput(
                "time grid must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn state_sup_norm(&self) -> f64 {
        self.state.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

fn quad_form(x: &CVector, m: &Mat) -> f64 {
    x.dotc(&(m * x)).re
}

/// Defect of the energy balance
/// `H(x(t1)) - H(x(t0)) = int Re(y^H u) - x^H Q R Q x dt` on the given samples.
pub fn energy_balance_residual(sys: &PHSystem, traj: &Trajectory) -> Result<f64> {
    traj.check(sys.n(), sys.m())?;
    let qrq = sys.qrq();
    let bhq = sys.b.adjoint() * &sys.q;
    let integrand: Vec<f64> = traj
        .state
        .iter()
        .zip(&traj.control)
        .map(|(x, u)| {
            let y = &bhq * x;
            y.dotc(u).re - quad_form(x, &qrq)
        })
        .collect();
    let first = &traj.state[0];
    let last = traj.state.last().expect("checked length");
    let storage = 0.5 * (quad_form(last, &sys.q) - quad_form(first, &sys.q));
    Ok((storage - trapezoid(&traj.times, &integrand)).abs())
}

/// `1/2 int x^H Q R Q x + u^H S u dt` by the trapezoid rule.
pub fn objective_value(sys: &PHSystem, s: &CostPerturbation, traj: &Trajectory) -> Result<f64> {
    traj.check(sys.n(), sys.m())?;
    if s.dim() != sys.m() {
        return Err(Error::InvalidInput(format!(
            "S is {0}x{0}, expected {1}x{1}",
            s.dim(),
            sys.m()
        )));
    }
    if sys.field == Field::Real {
        for u in &traj.control {
            let scale = 1.0 + u.norm();
            if u.iter().any(|z| z.im.abs() > 1e-9 * scale) {
                return Err(Error::InvalidInput(
                    "complex control supplied to a real system".into(),
                ));
            }
        }
    }
    let qrq = sys.qrq();
    let integrand: Vec<f64> = traj
        .state
        .iter()
        .zip(&traj.control)
        .map(|(x, u)| quad_form(x, &qrq) + quad_form(u, &s.s))
        .collect();
    Ok(0.5 * trapezoid(&traj.times, &integrand))
}
