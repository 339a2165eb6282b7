//! Equations of motion and the joint integration of motions, displacements
//! and adjoint covectors.

mod flow;
mod integrator;
mod transform;

pub use flow::{eom_accel, integrate, integrate_motion, FlowOptions, LinearizationPath, Monitor, Trajectory};
pub use integrator::{integrate_ode, IntegratorConfig, IntegratorStats, Method, OdeSystem};
pub use transform::{apply_point_transform, PointTransform};
