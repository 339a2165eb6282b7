//! Stability diagnostics built on the variational flow.

mod lyapunov;
mod modes;
mod planar;

pub use lyapunov::{lyapunov_spectrum, reorthonormalize, LyapunovConfig, LyapunovResult};
pub use modes::{mck_spectrum, small_oscillations, sort_complex, sorted_eigenvalues, NormalMode, NormalModes, EQUILIBRIUM_ATOL};
pub use planar::planar_stability_indicator;
