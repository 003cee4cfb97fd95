//! Moment dynamics, invariant states and mean-square optimal observers for
//! open quantum systems whose variables form an algebra closed under
//! multiplication (Pauli-like), driven by quantum Wiener processes.
//!
//! The modules are layered bottom-up:
//!
//! * [`algebra`] structure constants `XXᵀ = α + β·X` and their identities
//! * [`linalg`] matrix exponential, Lyapunov/Riccati solvers, ODE steppers
//! * [`dynamics`] drift/dispersion synthesis, moment flows, invariant state
//! * [`moments`] entire-function reduction, characteristic functions,
//!   multi-point moments
//! * [`filter`] measurement model, error covariance, optimal observer gains
//! * [`oracle`] exact matrix representations used as ground truth
//!
//! Batch entry points take an [`Execution`] policy; with the default
//! `parallel` feature they fan out over rayon, otherwise they run on the
//! calling thread.

pub mod algebra;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod filter;
pub mod linalg;
pub mod moments;
pub mod oracle;
pub mod presets;

pub use algebra::{StructureConstants, ValidationReport};
pub use dynamics::{synthesize, CoefficientSet, SystemSpec};
pub use error::{Error, Result};
pub use exec::Execution;
