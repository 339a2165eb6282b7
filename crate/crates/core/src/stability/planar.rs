use std::collections::BTreeMap;

use crate::autodiff::Dual2;
use crate::error::{Error, Result};
use crate::exprdsl::{evaluate, Bindings};
use crate::state::PhaseState;
use crate::systems::{LagrangianModel, ModelKind};

/// `ṡ²/ρ + (ρ/3) ∂²V/∂z²` at the state of a curvature-coordinate model; a
/// positive value means the orbit is stable against displacements that keep
/// the energy unchanged.
pub fn planar_stability_indicator(model: &LagrangianModel, s: &PhaseState) -> Result<f64> {
    let ModelKind::PlanarCurvature { rho, potential } = model.kind() else {
        return Err(Error::WrongModelKind { expected: "planar-curvature" });
    };
    s.check(2)?;
    let none = BTreeMap::new();
    let q = [Dual2::constant(s.q[0]), Dual2::variable(s.q[1], 0, 1)];
    let qd = [Dual2::constant(s.qd[0]), Dual2::constant(s.qd[1])];
    let t = Dual2::constant(s.t);
    let b = Bindings { q: &q, qd: &qd, t: &t, params: &none };
    let r = evaluate(rho, &b)?.value;
    if r.is_nan() || r <= 0.0 {
        return Err(Error::NonPositiveCurvatureRadius { s: s.q[0] });
    }
    let v_zz = evaluate(potential, &b)?.hess(0, 0);
    Ok(s.qd[0] * s.qd[0] / r + r / 3.0 * v_zz)
}
