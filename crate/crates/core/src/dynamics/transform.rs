use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::flow::Trajectory;
use crate::autodiff::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::exprdsl::{differentiate, evaluate, parse, Bindings, ExprAst, Symbol};
use crate::linalg::DEGENERACY_RTOL;
use crate::state::DAlembertState;
use crate::systems::{LagrangianModel, Provenance};

/// A point transformation `Q = F(q, t)` with an optional inverse `q = G(Q, t)`.
///
/// Both maps are written over `q1..qN` and `t`; in the inverse, `qi` stands for `Qi`.
#[derive(Clone, Debug)]
pub struct PointTransform {
    forward: Vec<ExprAst>,
    inverse: Option<Vec<ExprAst>>,
    params: BTreeMap<String, f64>,
}

impl PointTransform {
    pub fn new(forward: Vec<ExprAst>, inverse: Option<Vec<ExprAst>>, params: BTreeMap<String, f64>) -> Result<Self> {
        let n = forward.len();
        if n == 0 {
            return Err(Error::InvalidConfig("transform has no components".into()));
        }
        for e in forward.iter().chain(inverse.iter().flatten()) {
            for sym in e.symbols() {
                match sym {
                    Symbol::Coord(i) if i >= n => return Err(Error::dims("transform coordinate", n, i + 1)),
                    Symbol::Vel(_) => {
                        return Err(Error::InvalidConfig(format!("point transform may not depend on `{sym}`")))
                    }
                    _ => {}
                }
            }
        }
        if let Some(inv) = &inverse {
            if inv.len() != n {
                return Err(Error::dims("inverse transform", n, inv.len()));
            }
        }
        Ok(PointTransform { forward, inverse, params })
    }

    pub fn parse(forward: &[&str], inverse: Option<&[&str]>, params: BTreeMap<String, f64>) -> Result<Self> {
        let n = forward.len();
        let names: Vec<String> = params.keys().cloned().collect();
        let p = |texts: &[&str]| -> Result<Vec<ExprAst>> {
            texts.iter().map(|t| Ok(parse(t, n, names.iter().cloned())?)).collect()
        };
        let inv = inverse.map(p).transpose()?;
        Self::new(p(forward)?, inv, params)
    }

    pub fn dim(&self) -> usize {
        self.forward.len()
    }

    fn eval<S: Scalar>(&self, exprs: &[ExprAst], q: &[S], t: &S) -> Result<Vec<S>> {
        let b = Bindings { q, qd: &[], t, params: &self.params };
        exprs.iter().map(|e| Ok(evaluate(e, &b)?)).collect()
    }

    /// `F(q, t)`.
    pub fn apply(&self, q: &[f64], t: f64) -> Result<Vec<f64>> {
        self.eval(&self.forward, q, &t)
    }

    /// `∂F/∂q` at `(q, t)`.
    pub fn jacobian(&self, q: &[f64], t: f64) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let qv: Vec<Dual<f64>> = q.iter().enumerate().map(|(i, &x)| Dual::new(x, (i == j) as u8 as f64)).collect();
            for (i, v) in self.eval(&self.forward, &qv, &Dual::constant(t))?.iter().enumerate() {
                jac[(i, j)] = v.du;
            }
        }
        Ok(jac)
    }

    /// Map one state: `Q = F`, `Q̇ = F_q q̇ + F_t`, `ε' = F_q ε`, `ε̇' = d/dt(F_q ε)`.
    pub fn map_state(&self, d: &DAlembertState) -> Result<DAlembertState> {
        let n = self.dim();
        d.check(n)?;
        let jac = self.jacobian(&d.q, d.t)?;
        let det = jac.clone().lu().determinant();
        if !det.is_finite() || det.abs() < DEGENERACY_RTOL * jac.amax().powi(n as i32) || jac.amax() == 0.0 {
            return Err(Error::SingularTransformJacobian { t: d.t });
        }
        if let Some(inv) = &self.inverse {
            let back = self.eval(inv, &self.apply(&d.q, d.t)?, &d.t)?;
            let err = back.iter().zip(&d.q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale = 1.0 + d.q.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if err > 1e-8 * scale {
                return Err(Error::InverseMismatch { error: err });
            }
        }
        // outer level: time along the motion; inner level: the displacement
        let q: Vec<Dual<Dual<f64>>> = (0..n)
            .map(|i| Dual::new(Dual::new(d.q[i], d.eps[i]), Dual::new(d.qd[i], d.epsd[i])))
            .collect();
        let t = Dual::new(Dual::constant(d.t), Dual::constant(1.0));
        let out = self.eval(&self.forward, &q, &t)?;
        Ok(DAlembertState {
            q: out.iter().map(|v| v.re.re).collect(),
            eps: out.iter().map(|v| v.re.du).collect(),
            qd: out.iter().map(|v| v.du.re).collect(),
            epsd: out.iter().map(|v| v.du.du).collect(),
            t: d.t,
        })
    }

    /// The Lagrangian in the new coordinates, `L'(Q, Q̇, t) = L(G(Q, t), G_Q Q̇ + G_t, t)`.
    /// Needs the inverse.
    pub fn transform_lagrangian(&self, model: &LagrangianModel) -> Result<LagrangianModel> {
        let n = self.dim();
        if model.dim() != n {
            return Err(Error::dims("transform dimension", model.dim(), n));
        }
        let inv = self
            .inverse
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("transforming a Lagrangian needs the inverse map".into()))?;
        let inv: Vec<ExprAst> = inv.iter().map(|e| e.bind_params(&self.params)).collect();
        let velocities: Vec<ExprAst> = inv
            .iter()
            .map(|g| {
                let mut terms: Vec<ExprAst> = (0..n)
                    .map(|j| differentiate(g, &Symbol::Coord(j)).mul(ExprAst::sym(Symbol::Vel(j))))
                    .collect();
                if g.uses(&Symbol::Time) {
                    terms.push(differentiate(g, &Symbol::Time));
                }
                ExprAst::sum(terms)
            })
            .collect();
        let l = model.lagrangian().substitute(&|s| match s {
            Symbol::Coord(i) => Some(inv[*i].clone()),
            Symbol::Vel(i) => Some(velocities[*i].clone()),
            _ => None,
        });
        LagrangianModel::from_ast(l, n, BTreeMap::new(), Provenance::Dsl(format!("transformed {}", model.provenance())))
    }
}

/// Map every sample of `traj` through the transform. Monitors and adjoint
/// covectors are coordinate-dependent and are dropped.
pub fn apply_point_transform(transform: &PointTransform, traj: &Trajectory) -> Result<Trajectory> {
    let states = traj.states.iter().map(|d| transform.map_state(d)).collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: traj.times.clone(),
        states,
        adjoint: None,
        monitors: Vec::new(),
        stats: traj.stats.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, FlowOptions, IntegratorConfig};
    use crate::systems::{make_builtin, Params};

    #[test]
    fn identity_is_identity() {
        let osc = make_builtin("harmonic_oscillator", &Params::new()).unwrap();
        let d0 = DAlembertState::new(vec![1.0], vec![0.1], vec![0.0], vec![0.2], 0.0);
        let cfg = IntegratorConfig::dopri5(3.0, 1e-10).with_output_interval(0.5);
        let traj = integrate(&osc, &d0, &cfg, &FlowOptions::default()).unwrap();
        let id = PointTransform::parse(&["q1"], Some(&["q1"]), BTreeMap::new()).unwrap();
        let mapped = apply_point_transform(&id, &traj).unwrap();
        assert_eq!(mapped.states, traj.states);
    }

    #[test]
    fn polar_to_cartesian_state() {
        let tr = PointTransform::parse(&["q1*cos(q2)", "q1*sin(q2)"], None, BTreeMap::new()).unwrap();
        // r = 1, φ = 0, ṙ = 0, φ̇ = 1; ε = (δr, δφ) = (0.1, 0.2), ε̇ = 0
        let d = DAlembertState::new(vec![1.0, 0.0], vec![0.1, 0.2], vec![0.0, 1.0], vec![0.0, 0.0], 0.0);
        let m = tr.map_state(&d).unwrap();
        assert_eq!(m.q, vec![1.0, 0.0]);
        assert_eq!(m.qd, vec![0.0, 1.0]);
        assert_eq!(m.eps, vec![0.1, 0.2]);
        // ε̇'_x = d/dt(cos φ δr − r sin φ δφ) = −sin φ φ̇ δr − ṙ sin φ δφ − r cos φ φ̇ δφ = −0.2
        assert!((m.epsd[0] + 0.2).abs() < 1e-15);
        assert!((m.epsd[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn singular_jacobian() {
        let tr = PointTransform::parse(&["q1*cos(q2)", "q1*sin(q2)"], None, BTreeMap::new()).unwrap();
        let d = DAlembertState::new(vec![0.0, 0.0], vec![0.0; 2], vec![1.0, 0.0], vec![0.0; 2], 0.0);
        assert!(matches!(tr.map_state(&d), Err(Error::SingularTransformJacobian { .. })));
    }

    #[test]
    fn wrong_inverse_detected() {
        let tr = PointTransform::parse(&["2*q1"], Some(&["q1/3"]), BTreeMap::new()).unwrap();
        let d = DAlembertState::new(vec![1.0], vec![0.0], vec![1.0], vec![0.0], 0.0);
        assert!(matches!(tr.map_state(&d), Err(Error::InverseMismatch { .. })));
    }

    #[test]
    fn scaling_matches_transformed_lagrangian() {
        let osc = make_builtin("harmonic_oscillator", &Params::new()).unwrap();
        let tr = PointTransform::parse(&["2*q1"], Some(&["q1/2"]), BTreeMap::new()).unwrap();
        let scaled = tr.transform_lagrangian(&osc).unwrap();
        let d0 = DAlembertState::new(vec![0.8], vec![0.1], vec![0.3], vec![-0.2], 0.0);
        let cfg = IntegratorConfig::dopri5(10.0, 1e-11).with_output_interval(0.5);
        let mapped = apply_point_transform(&tr, &integrate(&osc, &d0, &cfg, &FlowOptions::default()).unwrap()).unwrap();
        let direct = integrate(&scaled, &tr.map_state(&d0).unwrap(), &cfg, &FlowOptions::default()).unwrap();
        for (a, b) in mapped.states.iter().zip(&direct.states) {
            for (x, y) in a.to_flat().iter().zip(b.to_flat()) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }
}
