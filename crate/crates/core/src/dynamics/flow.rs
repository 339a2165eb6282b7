use serde::{Deserialize, Serialize};

use super::integrator::{integrate_ode, IntegratorConfig, IntegratorStats};
use crate::autodiff::accel_generic;
use crate::error::{Error, Result};
use crate::prolong::{mck_at, tangent_jacobian, tangent_rhs, variational_rhs};
use crate::state::{DAlembertState, PhaseState};
use crate::systems::{normalize_speed, LagrangianModel, ModelKind};

/// `q̈ = M⁻¹(∂L/∂q − A q̇ − ∂²L/∂q̇∂t)`, the solved Euler–Lagrange equations.
pub fn eom_accel(model: &LagrangianModel, s: &PhaseState) -> Result<Vec<f64>> {
    s.check(model.dim())?;
    accel_generic(model, &s.q, &s.qd, &s.t).map_err(|e| e.at(s.t))
}

/// How `ε̈` is obtained inside a joint integration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearizationPath {
    /// `−M⁻¹(C ε̇ + K ε)` from the second-derivative blocks of `L`.
    #[default]
    Mck,
    /// `Df·ξ` from differentiating the solved equations of motion.
    Tangent,
}

/// Named series sampled alongside a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Monitor {
    pub name: String,
    pub values: Vec<f64>,
}

/// Samples of a joint `(q, ε)` integration.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DAlembertState>,
    /// Adjoint covector per sample when integrated.
    pub adjoint: Option<Vec<Vec<f64>>>,
    pub monitors: Vec<Monitor>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &DAlembertState {
        self.states.last().expect("trajectory has at least two samples")
    }

    pub fn monitor(&self, name: &str) -> Option<&[f64]> {
        self.monitors.iter().find(|m| m.name == name).map(|m| m.values.as_slice())
    }

    /// Add a monitor series; names must be unique and lengths match.
    pub fn push_monitor(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if self.monitor(&name).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate monitor `{name}`")));
        }
        if values.len() != self.len() {
            return Err(Error::dims(format!("monitor `{name}`"), self.len(), values.len()));
        }
        self.monitors.push(Monitor { name, values });
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct FlowOptions {
    pub path: LinearizationPath,
    /// Integrate the adjoint covector too, starting from this value.
    pub adjoint: Option<Vec<f64>>,
}

/// Integrate the equations of motion together with the variational equations
/// (and optionally the adjoint flow) as one system.
///
/// Geodesic models have their initial speed normalised to one first.
pub fn integrate(model: &LagrangianModel, d0: &DAlembertState, cfg: &IntegratorConfig, opts: &FlowOptions) -> Result<Trajectory> {
    let n = model.dim();
    d0.check(n)?;
    cfg.validate()?;
    let mut d0 = d0.clone();
    d0.t = cfg.t_start;
    if let ModelKind::Geodesic(metric) = model.kind() {
        let mut s = d0.phase();
        if normalize_speed(metric, &mut s)? {
            d0.qd = s.qd;
        }
    }
    let with_adjoint = opts.adjoint.is_some();
    let mut y0 = d0.to_flat();
    if let Some(p) = &opts.adjoint {
        if p.len() != 2 * n {
            return Err(Error::dims("adjoint p", 2 * n, p.len()));
        }
        y0.extend(p);
    }
    let path = opts.path;
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (q, eps, qd, epsd) = (&y[..n], &y[n..2 * n], &y[2 * n..3 * n], &y[3 * n..4 * n]);
        dy[..n].copy_from_slice(qd);
        dy[n..2 * n].copy_from_slice(epsd);
        match path {
            LinearizationPath::Mck => {
                let s = PhaseState::new(q.to_vec(), qd.to_vec(), t);
                let (qdd, mats) = mck_at(model, &s)?;
                dy[2 * n..3 * n].copy_from_slice(&qdd);
                dy[3 * n..4 * n].copy_from_slice(&variational_rhs(&mats, eps, epsd)?);
            }
            LinearizationPath::Tangent => {
                let x: Vec<f64> = q.iter().chain(qd).copied().collect();
                let xi: Vec<f64> = eps.iter().chain(epsd).copied().collect();
                let (xdot, xidot) = tangent_rhs(model, &x, &xi, t)?;
                dy[2 * n..3 * n].copy_from_slice(&xdot[n..]);
                dy[3 * n..4 * n].copy_from_slice(&xidot[n..]);
            }
        }
        if with_adjoint {
            let x: Vec<f64> = q.iter().chain(qd).copied().collect();
            let (_, jac) = tangent_jacobian(model, &x, t)?;
            let p = &y[4 * n..];
            for j in 0..2 * n {
                dy[4 * n + j] = -(0..2 * n).map(|i| p[i] * jac[(i, j)]).sum::<f64>();
            }
        }
        Ok(())
    };
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut adjoint = Vec::new();
    let stats = integrate_ode(&mut rhs, &y0, cfg, &mut |t, y| {
        times.push(t);
        states.push(DAlembertState::from_flat(y, n, t));
        if with_adjoint {
            adjoint.push(y[4 * n..].to_vec());
        }
        Ok(())
    })?;
    Ok(Trajectory {
        times,
        states,
        adjoint: with_adjoint.then_some(adjoint),
        monitors: Vec::new(),
        stats,
    })
}

/// Integrate the equations of motion alone.
pub fn integrate_motion(model: &LagrangianModel, s0: &PhaseState, cfg: &IntegratorConfig) -> Result<Vec<PhaseState>> {
    let n = model.dim();
    s0.check(n)?;
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        dy[..n].copy_from_slice(&y[n..]);
        dy[n..].copy_from_slice(&accel_generic(model, &y[..n], &y[n..], &t)?);
        Ok(())
    };
    let mut out = Vec::new();
    integrate_ode(&mut rhs, &s0.first_order(), cfg, &mut |t, y| {
        out.push(PhaseState::from_first_order(y, t));
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;
    use crate::systems::{make_builtin, Params};

    #[test]
    fn accelerations() {
        let osc = make_builtin("harmonic_oscillator", &Params::new()).unwrap();
        assert_eq!(eom_accel(&osc, &PhaseState::new(vec![1.0], vec![0.0], 0.0)).unwrap(), vec![-1.0]);
        let kep = make_builtin("kepler2d_cartesian", &Params::new()).unwrap();
        let a = eom_accel(&kep, &PhaseState::new(vec![1.0, 0.0], vec![0.0, 1.0], 0.0)).unwrap();
        assert!((a[0] + 1.0).abs() < 1e-15 && a[1].abs() < 1e-15);
        let sph = make_builtin("sphere_geodesic", &Params::new()).unwrap();
        let a = eom_accel(&sph, &PhaseState::new(vec![FRAC_PI_2, 0.0], vec![0.0, 1.0], 0.0)).unwrap();
        assert!(a[0].abs() < 1e-15 && a[1].abs() < 1e-15);
        let newton = make_builtin(
            "newton_generic",
            &Params::from([
                ("mass".into(), vec![vec![2.0, 0.0], vec![0.0, 1.0]].into()),
                ("potential".into(), "q1^2*q2".into()),
            ]),
        )
        .unwrap();
        let a = eom_accel(&newton, &PhaseState::new(vec![1.0, 1.0], vec![0.0, 0.0], 0.0)).unwrap();
        assert_eq!(a, vec![-1.0, -1.0]);
    }

    #[test]
    fn oscillator_closed_form() {
        let osc = make_builtin("harmonic_oscillator", &Params::new()).unwrap();
        let d0 = DAlembertState::new(vec![1.0], vec![0.0], vec![0.0], vec![1.0], 0.0);
        let traj = integrate(&osc, &d0, &IntegratorConfig::rk4(2.0 * PI, 1e-3), &FlowOptions::default()).unwrap();
        let end = traj.last();
        assert!((end.q[0] - 1.0).abs() < 1e-9);
        assert!(end.eps[0].abs() < 1e-8);
    }

    #[test]
    fn free_particle_exact() {
        let free = make_builtin("free_particle", &Params::new()).unwrap();
        let d0 = DAlembertState::new(vec![0.25], vec![0.0], vec![1.0], vec![0.0], 0.0);
        let traj = integrate(&free, &d0, &IntegratorConfig::dopri5(5.0, 1e-10), &FlowOptions::default()).unwrap();
        assert!((traj.last().q[0] - 5.25).abs() < 1e-14);
    }

    #[test]
    fn degenerate_reports_time() {
        let m = LagrangianModel::from_dsl("0.5*q1^2*qd1^2 - 0.5*q1", 1, Default::default()).unwrap();
        let d0 = DAlembertState::new(vec![0.0], vec![0.0], vec![1.0], vec![0.0], 0.0);
        let err = integrate(&m, &d0, &IntegratorConfig::rk4(1.0, 0.5), &FlowOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateLagrangian { t: Some(_), .. }), "{err}");
    }
}
