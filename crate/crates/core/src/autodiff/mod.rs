//! Forward-mode automatic differentiation.
//!
//! [`Dual`] carries one directional derivative; [`Dual2`] carries a gradient and
//! Hessian over several seeded directions. They nest, which is how third-order
//! directional information (`d/dt` of the Hessian blocks along the motion) is
//! obtained without ever forming a third-derivative tensor.

mod derivs;
mod dual;
mod dual2;
mod scalar;

pub(crate) use derivs::{accel_from_blocks, accel_generic, along_trajectory, blocks};
pub use derivs::{derive_all, time_derivative_of_blocks, LagrangianDerivs};
pub use dual::Dual;
pub use dual2::Dual2;
pub use scalar::Scalar;
