#![allow(dead_code)]

use phsoc::linalg::{self, CVector, Mat, C64};
use phsoc::{CostPerturbation, PHSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn i() -> C64 {
    C64::new(0.0, 1.0)
}

pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    linalg::max_abs(&(a - b))
}

pub struct Gen {
    pub rng: ChaCha8Rng,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn scalar(&mut self, complex: bool) -> C64 {
        let r = self.rng.random_range(-1.0..1.0);
        let im = if complex {
            self.rng.random_range(-1.0..1.0)
        } else {
            0.0
        };
        C64::new(r, im)
    }

    pub fn matrix(&mut self, rows: usize, cols: usize, complex: bool) -> Mat {
        Mat::from_fn(rows, cols, |_, _| self.scalar(complex))
    }

    /// Hermitian PSD matrix of the given rank.
    pub fn psd(&mut self, n: usize, rank: usize, complex: bool) -> Mat {
        let l = self.matrix(n, rank, complex);
        &l * l.adjoint()
    }

    pub fn skew(&mut self, n: usize, complex: bool) -> Mat {
        let x = self.matrix(n, n, complex);
        (&x - x.adjoint()) * re(0.5)
    }

    pub fn rank_upto(&mut self, n: usize) -> usize {
        // Full rank half the time, otherwise anything from 0 to n.
        if self.rng.random_bool(0.5) {
            n
        } else {
            self.rng.random_range(0..=n)
        }
    }
}

pub struct Instance {
    pub sys: PHSystem,
    pub s: CostPerturbation,
    pub complex: bool,
}

/// Random port-Hamiltonian system with random rank deficiencies in R, Q, B
/// and S.
pub fn random_instance(g: &mut Gen) -> Instance {
    let n = g.rng.random_range(1..=6);
    let m = g.rng.random_range(1..=3);
    let complex = g.rng.random_bool(0.5);
    let j = g.skew(n, complex);
    let rk_r = g.rank_upto(n);
    let r = g.psd(n, rk_r, complex);
    let q = if g.rng.random_bool(0.3) {
        Mat::identity(n, n)
    } else {
        let rk_q = g.rank_upto(n);
        g.psd(n, rk_q, complex)
    };
    let b = if g.rng.random_bool(0.7) {
        g.matrix(n, m, complex)
    } else {
        let inner = g.rng.random_range(0..=m.min(n));
        let left = g.matrix(n, inner, complex);
        left * g.matrix(inner, m, complex)
    };
    let rk_s = if g.rng.random_bool(0.4) {
        0
    } else {
        g.rank_upto(m)
    };
    let s = g.psd(m, rk_s, complex);
    let sys = PHSystem::validate(j, r, q, b).expect("random instance is port-Hamiltonian");
    let s = CostPerturbation::new(s).expect("random weight is PSD");
    Instance { sys, s, complex }
}

pub fn corpus(seed: u64, count: usize) -> Vec<Instance> {
    let mut g = Gen::new(seed);
    (0..count).map(|_| random_instance(&mut g)).collect()
}

/// Classical RK4 for `w' = f(w)`.
pub fn rk4<F>(f: F, w0: &CVector, t0: f64, t1: f64, steps: usize) -> Vec<CVector>
where
    F: Fn(&CVector) -> CVector,
{
    let h = (t1 - t0) / steps as f64;
    let half = re(0.5 * h);
    let mut out = Vec::with_capacity(steps + 1);
    let mut w = w0.clone();
    out.push(w.clone());
    for _ in 0..steps {
        let k1 = f(&w);
        let k2 = f(&(&w + &k1 * half));
        let k3 = f(&(&w + &k2 * half));
        let k4 = f(&(&w + &k3 * re(h)));
        w += (k1 + k2 * re(2.0) + k3 * re(2.0) + k4) * re(h / 6.0);
        out.push(w.clone());
    }
    out
}

/// Right-hand side of the optimality system with positive definite `S`:
/// `u = -S^-1 B^H lambda`, `lambda' = -F^H lambda - QRQ x`,
/// `x' = F x + B u`. Returns the map on `[lambda; x]`.
pub fn hamiltonian_rhs(sys: &PHSystem, s: &Mat) -> impl Fn(&CVector) -> CVector {
    let n = sys.n();
    let f = sys.f();
    let fh = f.adjoint();
    let qrq = sys.qrq();
    let b = sys.b().clone();
    let s_inv = s.clone().try_inverse().expect("S is invertible");
    let bsb = &b * &s_inv * b.adjoint();
    move |w: &CVector| {
        let lam = w.rows(0, n).into_owned();
        let x = w.rows(n, n).into_owned();
        let dl = -(&fh * &lam) - &qrq * &x;
        let dx = &f * &x - &bsb * &lam;
        let mut out = CVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&dl);
        out.rows_mut(n, n).copy_from(&dx);
        out
    }
}

/// Independent matrix exponential by a long Taylor series with scaling and
/// squaring, for cross-checking.
pub fn expm_taylor(m: &Mat) -> Mat {
    let norm = linalg::norm1(m);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let a = m * re(2f64.powi(-s));
    let n = m.nrows();
    let mut term = Mat::identity(n, n);
    let mut sum = term.clone();
    for k in 1..40 {
        term = &term * &a * re(1.0 / k as f64);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}
