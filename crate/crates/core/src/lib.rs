//! Prolonged Lagrangians and the Jacobi variational equations.
//!
//! Given a Lagrangian `L(q, q̇, t)` this crate builds the prolonged Lagrangian
//! `γ = (∂L/∂q̇)·ε̇ + (∂L/∂q)·ε` on configurations paired with virtual
//! displacements, derives the equations of motion and the linear variational
//! system `M ε̈ + C ε̇ + K ε = 0`, integrates both jointly, and monitors the
//! conserved quantities the construction carries.

pub mod autodiff;
pub mod cli;
pub mod conserved;
pub mod dynamics;
pub mod error;
pub mod exprdsl;
pub mod linalg;
pub mod prolong;
pub mod scenario;
pub mod stability;
pub mod state;
pub mod systems;
pub mod verify;

pub use error::{Error, Result};
pub use state::{AdjointState, DAlembertState, PhaseState};
pub use systems::LagrangianModel;
