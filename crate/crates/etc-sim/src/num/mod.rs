//! Dense small-matrix numerics: vectors, matrices, norms, an RK4 step,
//! bisection event localization, a Lyapunov equation solver, and
//! eigenvalue routines sized for state dimensions up to about 8.

mod eig;
mod linalg;
mod lyap;
mod ode;
mod seq;

pub use eig::{eigenvalues, is_hurwitz, spectral_norm, sym_eig_bounds};
pub use linalg::{Matrix, Vector};
pub use lyap::solve_lyapunov;
pub use ode::{locate_event, rk4_step};
pub(crate) use seq::LowDiscrepancy;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumError {
    /// A constructor or result contained NaN or an infinity.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    /// A vector field evaluation produced NaN or an infinity.
    #[error("non-finite derivative at t = {t}")]
    NonFiniteDerivative { t: f64 },
    /// Both bracket ends of an event function have the same strict sign.
    #[error("no sign change over the bracket")]
    NoSignChange,
    /// The vectorized Lyapunov system is singular (M and -M share an
    /// eigenvalue, e.g. M is not Hurwitz in the symmetric sense).
    #[error("singular Lyapunov system")]
    SingularLyapunov,
    /// An eigenvalue iteration hit its cap without converging.
    #[error("eigenvalue iteration did not converge")]
    Indeterminate,
}
