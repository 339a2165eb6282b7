use nalgebra::DMatrix;
use serde::Serialize;

use super::{Dual, Dual2, Scalar};
use crate::error::{Error, Result};
use crate::linalg::{check_nondegenerate, solve_generic, to_dmatrix, values};
use crate::state::PhaseState;
use crate::systems::LagrangianModel;

/// Every first and second partial derivative of `L` at one phase-space point.
///
/// `d2l_qdq[(a, b)] = ∂²L/∂q̇_a∂q_b` (row index on the velocity).
#[derive(Clone, Debug, Serialize)]
pub struct LagrangianDerivs {
    pub value: f64,
    pub dl_dq: Vec<f64>,
    pub dl_dqd: Vec<f64>,
    pub d2l_qdqd: DMatrix<f64>,
    pub d2l_qdq: DMatrix<f64>,
    pub d2l_qq: DMatrix<f64>,
    pub dl_dt: f64,
    /// `∂²L/∂q̇_a∂t`, needed by the explicit-acceleration form of the equations of motion.
    pub d2l_qdt: Vec<f64>,
}

/// Derivative blocks in a generic scalar; row-major `N × N` matrices.
#[derive(Clone, Debug)]
pub(crate) struct Blocks<S> {
    pub value: S,
    pub dq: Vec<S>,
    pub dqd: Vec<S>,
    pub qdqd: Vec<S>,
    pub qdq: Vec<S>,
    pub qq: Vec<S>,
    pub dt: S,
    pub qdt: Vec<S>,
}

/// Seed the `2N + 1` directions `(q, q̇, t)` and read off gradient and Hessian.
pub(crate) fn blocks<S: Scalar>(model: &LagrangianModel, q: &[S], qd: &[S], t: &S) -> Result<Blocks<S>> {
    let n = model.dim();
    let dirs = 2 * n + 1;
    let qv: Vec<Dual2<S>> = q.iter().enumerate().map(|(i, x)| Dual2::variable(x.clone(), i, dirs)).collect();
    let qdv: Vec<Dual2<S>> =
        qd.iter().enumerate().map(|(i, x)| Dual2::variable(x.clone(), n + i, dirs)).collect();
    let tv = Dual2::variable(t.clone(), 2 * n, dirs);
    let l = model.eval(&qv, &qdv, &tv)?;
    if !l.all_finite() {
        return Err(Error::NonFiniteDerivative);
    }
    let mat = |r0: usize, c0: usize| -> Vec<S> {
        let mut m = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                m.push(l.hess(r0 + a, c0 + b));
            }
        }
        m
    };
    Ok(Blocks {
        dq: (0..n).map(|i| l.grad(i)).collect(),
        dqd: (0..n).map(|i| l.grad(n + i)).collect(),
        qdqd: mat(n, n),
        qdq: mat(n, 0),
        qq: mat(0, 0),
        dt: l.grad(2 * n),
        qdt: (0..n).map(|i| l.hess(n + i, 2 * n)).collect(),
        value: l.value,
    })
}

/// All partial derivatives of `L` needed by the equations of motion, the
/// variational equations and the conserved quantities, exact to rounding.
pub fn derive_all(model: &LagrangianModel, s: &PhaseState) -> Result<LagrangianDerivs> {
    let n = model.dim();
    s.check(n)?;
    let b = blocks(model, &s.q, &s.qd, &s.t)?;
    Ok(LagrangianDerivs {
        value: b.value,
        dl_dq: b.dq,
        dl_dqd: b.dqd,
        d2l_qdqd: to_dmatrix(&b.qdqd, n),
        d2l_qdq: to_dmatrix(&b.qdq, n),
        d2l_qq: to_dmatrix(&b.qq, n),
        dl_dt: b.dt,
        d2l_qdt: b.qdt,
    })
}

/// `q̈ = M⁻¹(∂L/∂q − A q̇ − ∂²L/∂q̇∂t)` carried out in the scalar `S`, so a
/// dual-valued state yields the directional derivative of the acceleration.
pub(crate) fn accel_from_blocks<S: Scalar>(b: &Blocks<S>, qd: &[S], n: usize) -> Result<Vec<S>> {
    check_nondegenerate(&to_dmatrix(&values(&b.qdqd), n))?;
    let rhs: Vec<S> = (0..n)
        .map(|a| {
            let mut r = b.dq[a].clone() - b.qdt[a].clone();
            for (c, v) in qd.iter().enumerate() {
                r = r - b.qdq[a * n + c].clone() * v.clone();
            }
            r
        })
        .collect();
    Ok(solve_generic(b.qdqd.clone(), n, rhs))
}

pub(crate) fn accel_generic<S: Scalar>(model: &LagrangianModel, q: &[S], qd: &[S], t: &S) -> Result<Vec<S>> {
    let b = blocks(model, q, qd, t)?;
    accel_from_blocks(&b, qd, model.dim())
}

/// Lift a real state along the trajectory direction `(q̇, q̈, 1)`.
pub(crate) fn along_trajectory(s: &PhaseState, qdd: &[f64]) -> (Vec<Dual<f64>>, Vec<Dual<f64>>, Dual<f64>) {
    let q = s.q.iter().zip(&s.qd).map(|(&x, &v)| Dual::new(x, v)).collect();
    let qd = s.qd.iter().zip(qdd).map(|(&v, &a)| Dual::new(v, a)).collect();
    (q, qd, Dual::new(s.t, 1.0))
}

/// Total time derivatives along the motion of `M_ab = ∂²L/∂q̇_a∂q̇_b` and
/// `A_ab = ∂²L/∂q̇_a∂q_b`, from one third-order directional sweep.
pub fn time_derivative_of_blocks(
    model: &LagrangianModel,
    s: &PhaseState,
    qdd: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = model.dim();
    s.check(n)?;
    if qdd.len() != n {
        return Err(Error::dims("qdd", n, qdd.len()));
    }
    let (q, qd, t) = along_trajectory(s, qdd);
    let b = blocks(model, &q, &qd, &t)?;
    let dm: Vec<f64> = b.qdqd.iter().map(|x| x.du).collect();
    let da: Vec<f64> = b.qdq.iter().map(|x| x.du).collect();
    if dm.iter().chain(&da).any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteDerivative);
    }
    Ok((to_dmatrix(&dm, n), to_dmatrix(&da, n)))
}
