use num_complex::Complex64;
use thiserror::Error;

use crate::system::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("port-Hamiltonian structure violated: {}", format_violations(.0))]
    StructureViolation(Vec<Violation>),

    /// The shift collides with the spectrum of (J-R)Q or -((J-R)Q)^H.
    #[error("shift {mu} lies (numerically) on the spectrum of (J-R)Q or -((J-R)Q)^H")]
    SpectrumClash { mu: Complex64 },

    #[error("every sampled frequency hit the spectrum after {retries} regridding attempts")]
    AllOmegaClash { retries: usize },

    #[error("the optimality pencil is singular")]
    SingularPencil,

    #[error("Wong sequence did not stabilize within {steps} steps")]
    NoStabilization { steps: usize },

    #[error("equivalent regularity criteria disagree: {first} vs {second} ({detail})")]
    InconsistentCriteria {
        first: String,
        second: String,
        detail: String,
    },

    #[error("no admissible shift found among {tried} candidates")]
    MuSearchExhausted { tried: usize },

    #[error("initial value is not admissible (projector residual {residual:.3e})")]
    InadmissibleInitialValue { residual: f64 },

    #[error("boundary pair is not connected by an optimal trajectory (residual {residual:.3e})")]
    NoOptimalTrajectory { residual: f64 },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("{} (by {:.3e})", v.which, v.magnitude))
        .collect::<Vec<_>>()
        .join(", ")
}
