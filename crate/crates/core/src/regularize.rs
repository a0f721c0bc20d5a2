//! Rank-minimal cost weights that make a singular optimality pencil regular.
//!
//! With `V = B^-1 (JQ - iw) ker RQ` at a frequency where its dimension is
//! minimal, any PSD `S` with `ker S = V^perp` gives a regular pencil, and no
//! weight of smaller rank does. The orthogonal projector onto `V` is used.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{Mat, Subspace, C64};
use crate::pencil::{
    build_pencil, full_report_with, preimage_space, regular_by_det_sampling, AnalysisOptions,
    OmegaScanner, RegularityReport,
};
use crate::system::{CostPerturbation, Field, PHSystem};

/// Number of random lower-rank weights tried when spot-checking minimality.
pub const SPOT_CHECKS: usize = 10;

#[derive(Clone, Debug)]
pub struct MinimalDim {
    pub omega: f64,
    pub v: Subspace,
    /// `(w, dim V(w))` for every grid point visited (the scan stops early
    /// once a trivial `V` is found).
    pub sampled: Vec<(f64, usize)>,
}

/// Frequency on the grid where `dim B^-1 (JQ - iw) ker RQ` is smallest.
pub fn minimal_dim_omega(sys: &PHSystem, opts: &AnalysisOptions) -> Result<MinimalDim> {
    let mut best: Option<(f64, Subspace)> = None;
    let mut sampled = Vec::new();
    // Dimension zero cannot be beaten, so the scan stops there.
    OmegaScanner::new(sys, opts).scan(|w| {
        let v = preimage_space(sys, w, opts.tol_rel)?;
        sampled.push((w, v.dim()));
        let zero = v.is_trivial();
        if best.as_ref().is_none_or(|(_, b)| v.dim() < b.dim()) {
            best = Some((w, v));
        }
        Ok(zero)
    })?;
    let (omega, v) = best.expect("scan visits at least one frequency");
    Ok(MinimalDim { omega, v, sampled })
}

#[derive(Clone, Debug)]
pub struct RegularizationResult {
    pub s_min: Mat,
    pub rank: usize,
    pub omega_used: f64,
    pub v_dim: usize,
    pub v: Subspace,
    pub sampled_dims: Vec<(f64, usize)>,
    pub certificate: RegularityReport,
    /// Random weights of smaller rank that were tried.
    pub spot_checks: usize,
    /// How many of those nevertheless gave a regular pencil (expected 0).
    pub minimality_violations: usize,
}

fn random_low_rank_psd(rng: &mut ChaCha8Rng, m: usize, rank: usize, field: Field) -> Mat {
    let l = Mat::from_fn(m, rank, |_, _| {
        let re = rng.random_range(-1.0..1.0);
        let im = match field {
            Field::Real => 0.0,
            Field::Complex => rng.random_range(-1.0..1.0),
        };
        C64::new(re, im)
    });
    &l * l.adjoint()
}

/// Orthogonal projector onto `V`, certified regular.
pub fn rank_minimal_s(sys: &PHSystem, opts: &AnalysisOptions) -> Result<RegularizationResult> {
    rank_minimal_s_scaled(sys, 1.0, opts)
}

/// `eps` times the rank-minimal projector.
pub fn rank_minimal_s_scaled(
    sys: &PHSystem,
    eps: f64,
    opts: &AnalysisOptions,
) -> Result<RegularizationResult> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "scale must be positive, got {eps}"
        )));
    }
    let md = minimal_dim_omega(sys, opts)?;
    let rank = md.v.dim();
    let s_min = md.v.projector() * C64::new(eps, 0.0);
    let weight = CostPerturbation::new(s_min.clone())?;
    let certificate = full_report_with(sys, &weight, opts)?;
    if !certificate.regular {
        return Err(Error::NumericalFailure(format!(
            "projector of rank {rank} at w = {} did not regularise the pencil; \
             consider a larger frequency grid",
            md.omega
        )));
    }

    let mut spot_checks = 0;
    let mut minimality_violations = 0;
    if rank > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x0005_u64.rotate_left(40));
        for _ in 0..SPOT_CHECKS {
            let k = rng.random_range(0..rank);
            let trial = random_low_rank_psd(&mut rng, sys.m(), k, sys.field());
            let p = build_pencil(sys, &CostPerturbation::new(trial)?)?;
            spot_checks += 1;
            if regular_by_det_sampling(&p, opts.seed).regular {
                minimality_violations += 1;
            }
        }
    }

    Ok(RegularizationResult {
        s_min,
        rank,
        omega_used: md.omega,
        v_dim: rank,
        v: md.v,
        sampled_dims: md.sampled,
        certificate,
        spot_checks,
        minimality_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, real_matrix};

    #[test]
    fn dead_input_needs_full_weight() {
        // B = 0: the pencil has a zero control row unless S > 0.
        let sys = PHSystem::validate(
            Mat::zeros(1, 1),
            real_matrix(1, 1, &[1.0]),
            real_matrix(1, 1, &[1.0]),
            Mat::zeros(1, 1),
        )
        .unwrap();
        let res = rank_minimal_s(&sys, &AnalysisOptions::default()).unwrap();
        assert_eq!(res.rank, 1);
        assert!((res.s_min[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(res.certificate.regular);
        assert_eq!(res.minimality_violations, 0);
        assert_eq!(res.spot_checks, SPOT_CHECKS);
    }

    #[test]
    fn dissipative_state_needs_nothing() {
        let sys = PHSystem::validate(
            Mat::zeros(2, 2),
            Mat::identity(2, 2),
            Mat::identity(2, 2),
            real_matrix(2, 1, &[1.0, 0.0]),
        )
        .unwrap();
        let res = rank_minimal_s(&sys, &AnalysisOptions::default()).unwrap();
        assert_eq!(res.rank, 0);
        assert_eq!(max_abs(&res.s_min), 0.0);
        assert_eq!(res.spot_checks, 0);
    }

    #[test]
    fn scale_must_be_positive() {
        let sys = crate::zoo::example53();
        assert!(rank_minimal_s_scaled(&sys, 0.0, &AnalysisOptions::default()).is_err());
    }
}
