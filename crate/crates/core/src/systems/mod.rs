//! Lagrangian models: user-defined, builtin, geodesic, Newtonian, rotating-frame
//! and curvature-coordinate systems.

mod builtin;
mod geodesic;
mod mechanical;
mod model;

pub use builtin::{example_params, list_systems, make_builtin, ParamValue, Params, SystemInfo};
pub use geodesic::{curvature_oracle_2d, make_geodesic, normalize_speed, MetricSpec};
pub use mechanical::{make_newton, make_planar_curvature, make_rotating, planar_symbols, potential_symbols};
pub use model::{LagrangianModel, ModelKind, Provenance, SampleDomain};
