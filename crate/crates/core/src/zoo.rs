//! Ready-made systems: damped mechanics, a discretised heat rod and two small
//! complex examples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, complex_matrix, identity, inverse, real_matrix, zeros, Mat, C64};
use crate::system::PHSystem;

fn check_pd(name: &str, m: &Mat) -> Result<()> {
    let herm = linalg::max_abs(&(m - m.adjoint())) <= 1e-12 * (1.0 + linalg::norm2(m));
    let min_ev = linalg::hermitian_eigenvalues(m)
        .first()
        .copied()
        .unwrap_or(0.0);
    if !m.is_square() || !herm || min_ev <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "{name} must be Hermitian positive definite"
        )));
    }
    Ok(())
}

/// Second-order system `M q'' + D q' + K q = u` in port-Hamiltonian form with
/// state `(p, q)`, `p = M q'`.
pub fn mechanical(mass: &Mat, damping: &Mat, stiffness: &Mat) -> Result<PHSystem> {
    let l = mass.nrows();
    for (name, m) in [("M", mass), ("D", damping), ("K", stiffness)] {
        if m.shape() != (l, l) {
            return Err(Error::InvalidInput(format!("{name} must be {l}x{l}")));
        }
    }
    check_pd("M", mass)?;
    check_pd("K", stiffness)?;
    if !linalg::is_hermitian_psd(damping, 1e-12) {
        return Err(Error::InvalidInput(
            "D must be Hermitian positive semidefinite".into(),
        ));
    }
    let n = 2 * l;
    let id = identity(l);
    let mut j = zeros(n, n);
    j.view_mut((0, l), (l, l)).copy_from(&(-&id));
    j.view_mut((l, 0), (l, l)).copy_from(&id);
    let mut r = zeros(n, n);
    r.view_mut((0, 0), (l, l)).copy_from(damping);
    let mut q = zeros(n, n);
    q.view_mut((0, 0), (l, l)).copy_from(&inverse(mass)?);
    q.view_mut((l, l), (l, l)).copy_from(stiffness);
    let mut b = zeros(n, l);
    b.view_mut((0, 0), (l, l)).copy_from(&id);
    PHSystem::validate(j, r, q, b)
}

/// Unit mass and stiffness with damping `d`.
pub fn oscillator(d: f64) -> Result<PHSystem> {
    let one = identity(1);
    mechanical(&one, &real_matrix(1, 1, &[d]), &one)
}

/// Heat rod on `[0, 1]` with `n` nodes, `h = 1/(n-1)`, boundary nodes
/// decoupled and control entering at the first interior node. With
/// `unit_scaling` the stencil is left unscaled instead of multiplied by
/// `kappa / h^2`.
pub fn heat1d_with(n: usize, kappa: f64, unit_scaling: bool) -> Result<PHSystem> {
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "heat model needs n >= 3, got {n}"
        )));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    let h = 1.0 / (n as f64 - 1.0);
    let c = if unit_scaling { 1.0 } else { kappa / (h * h) };
    let mut r = zeros(n, n);
    for i in 1..n - 1 {
        r[(i, i)] = C64::new(2.0 * c, 0.0);
        if i > 1 {
            r[(i, i - 1)] = C64::new(-c, 0.0);
        }
        if i + 2 < n {
            r[(i, i + 1)] = C64::new(-c, 0.0);
        }
    }
    let mut b = zeros(n, 1);
    b[(1, 0)] = C64::new(1.0, 0.0);
    PHSystem::validate(zeros(n, n), r, identity(n), b)
}

pub fn heat1d(n: usize, kappa: f64) -> Result<PHSystem> {
    heat1d_with(n, kappa, false)
}

/// Two states, one input, complex data, regular with `S = 0`.
pub fn example52() -> PHSystem {
    let i = C64::new(0.0, 1.0);
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    PHSystem::validate(
        complex_matrix(2, 2, &[i, o, o, o]),
        real_matrix(2, 2, &[0.0, 0.0, 0.0, 1.0]),
        complex_matrix(2, 2, &[one, i, -i, one]),
        real_matrix(2, 1, &[1.0, 0.0]),
    )
    .expect("built-in example is port-Hamiltonian")
}

/// One state, two inputs, lossless; singular with `S = 0`.
pub fn example53() -> PHSystem {
    let i = C64::new(0.0, 1.0);
    PHSystem::validate(
        complex_matrix(1, 1, &[i]),
        zeros(1, 1),
        identity(1),
        complex_matrix(1, 2, &[C64::new(1.0, 0.0), i]),
    )
    .expect("built-in example is port-Hamiltonian")
}

/// Parameterised description of a built-in model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `l` degrees of freedom with `M = mass I`, `D = damping I`, `K = stiffness I`.
    Mechanical {
        l: usize,
        mass: f64,
        damping: f64,
        stiffness: f64,
    },
    Heat1d {
        n: usize,
        kappa: f64,
        #[serde(default)]
        unit_scaling: bool,
    },
    Example52,
    Example53,
}

impl ModelSpec {
    pub fn build(&self) -> Result<PHSystem> {
        match *self {
            ModelSpec::Mechanical {
                l,
                mass,
                damping,
                stiffness,
            } => {
                if l == 0 {
                    return Err(Error::InvalidInput("mechanical model needs l >= 1".into()));
                }
                let scaled = |s: f64| identity(l) * C64::new(s, 0.0);
                mechanical(&scaled(mass), &scaled(damping), &scaled(stiffness))
            }
            ModelSpec::Heat1d {
                n,
                kappa,
                unit_scaling,
            } => heat1d_with(n, kappa, unit_scaling),
            ModelSpec::Example52 => Ok(example52()),
            ModelSpec::Example53 => Ok(example53()),
        }
    }
}
