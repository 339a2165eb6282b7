//! The prolonged Lagrangian `γ` and the linear flows built from it.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::autodiff::{accel_from_blocks, accel_generic, along_trajectory, blocks, Dual, Dual2, Scalar};
use crate::error::{Error, Result};
use crate::exprdsl::{evaluate, Bindings, ExprAst, Symbol};
use crate::linalg::{check_nondegenerate, to_dmatrix};
use crate::state::{AdjointState, DAlembertState, PhaseState};
use crate::systems::{LagrangianModel, Provenance};

/// `γ = (∂L/∂q̇)·ε̇ + (∂L/∂q)·ε` in any scalar: `L` is evaluated on dual inputs
/// `q + ε δ`, `q̇ + ε̇ δ` and the `δ` coefficient read off.
pub fn gamma_generic<S: Scalar>(
    model: &LagrangianModel,
    q: &[S],
    eps: &[S],
    qd: &[S],
    epsd: &[S],
    t: &S,
) -> Result<S> {
    let lift = |x: &[S], dx: &[S]| -> Vec<Dual<S>> { x.iter().zip(dx).map(|(a, b)| Dual::new(a.clone(), b.clone())).collect() };
    let l = model.eval(&lift(q, eps), &lift(qd, epsd), &Dual::constant(t.clone()))?;
    Ok(l.du)
}

pub fn gamma_eval(model: &LagrangianModel, d: &DAlembertState) -> Result<f64> {
    d.check(model.dim())?;
    let g = gamma_generic(model, &d.q, &d.eps, &d.qd, &d.epsd, &d.t)?;
    if !g.is_finite() {
        return Err(Error::NonFiniteDerivative);
    }
    Ok(g)
}

/// First partials of `γ` with respect to its four argument blocks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaPartials {
    pub d_eps: Vec<f64>,
    pub d_epsd: Vec<f64>,
    pub d_q: Vec<f64>,
    pub d_qd: Vec<f64>,
}

/// Differentiates `γ` itself, one direction per sweep, so the result does not
/// share a code path with [`derive_all`](crate::autodiff::derive_all).
pub fn gamma_partials(model: &LagrangianModel, d: &DAlembertState) -> Result<GammaPartials> {
    let n = model.dim();
    d.check(n)?;
    let y = d.to_flat();
    let mut grad = vec![0.0; 4 * n];
    for (k, g) in grad.iter_mut().enumerate() {
        let v: Vec<Dual<f64>> =
            y.iter().enumerate().map(|(i, &x)| Dual::new(x, if i == k { 1.0 } else { 0.0 })).collect();
        let r = gamma_generic(model, &v[..n], &v[n..2 * n], &v[2 * n..3 * n], &v[3 * n..], &Dual::constant(d.t))?;
        if !r.all_finite() {
            return Err(Error::NonFiniteDerivative);
        }
        *g = r.du;
    }
    Ok(GammaPartials {
        d_q: grad[..n].to_vec(),
        d_eps: grad[n..2 * n].to_vec(),
        d_qd: grad[2 * n..3 * n].to_vec(),
        d_epsd: grad[3 * n..].to_vec(),
    })
}

/// Coefficients of `M ε̈ + C ε̇ + K ε = 0` at one point of a motion.
#[derive(Clone, Debug, Serialize)]
pub struct LinearizationMatrices {
    pub m: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// `dM/dt` along the motion; `C + Cᵀ = 2 dM/dt`.
    pub dm_dt: DMatrix<f64>,
    pub evaluated_at: PhaseState,
}

/// `M = L_q̇q̇`, `C = dM/dt + A − Aᵀ`, `K = dA/dt − L_qq` with `A_ab = ∂²L/∂q̇_a∂q_b`.
pub fn assemble_mck(model: &LagrangianModel, s: &PhaseState, qdd: &[f64]) -> Result<LinearizationMatrices> {
    let n = model.dim();
    s.check(n)?;
    if qdd.len() != n {
        return Err(Error::dims("qdd", n, qdd.len()));
    }
    let (q, qd, t) = along_trajectory(s, qdd);
    let b = blocks(model, &q, &qd, &t)?;
    let re = |v: &[Dual<f64>]| to_dmatrix(&v.iter().map(|x| x.re).collect::<Vec<_>>(), n);
    let du = |v: &[Dual<f64>]| to_dmatrix(&v.iter().map(|x| x.du).collect::<Vec<_>>(), n);
    let m = re(&b.qdqd);
    let a = re(&b.qdq);
    let dm_dt = du(&b.qdqd);
    let c = &dm_dt + &a - a.transpose();
    let k = du(&b.qdq) - re(&b.qq);
    if [&m, &c, &k].iter().any(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFiniteDerivative);
    }
    Ok(LinearizationMatrices { m, c, k, dm_dt, evaluated_at: s.clone() })
}

/// Acceleration and linearization at `s` in one call.
pub fn mck_at(model: &LagrangianModel, s: &PhaseState) -> Result<(Vec<f64>, LinearizationMatrices)> {
    s.check(model.dim())?;
    let qdd = accel_generic(model, &s.q, &s.qd, &s.t).map_err(|e| e.at(s.t))?;
    let mats = assemble_mck(model, s, &qdd)?;
    Ok((qdd, mats))
}

/// `ε̈ = −M⁻¹(C ε̇ + K ε)`.
pub fn variational_rhs(mats: &LinearizationMatrices, eps: &[f64], epsd: &[f64]) -> Result<Vec<f64>> {
    let n = mats.m.nrows();
    if eps.len() != n || epsd.len() != n {
        return Err(Error::dims("displacement", n, eps.len().min(epsd.len())));
    }
    check_nondegenerate(&mats.m)?;
    let rhs = -(&mats.c * DVector::from_column_slice(epsd) + &mats.k * DVector::from_column_slice(eps));
    let lu = mats.m.clone().lu();
    let sol = lu.solve(&rhs).ok_or(Error::DegenerateLagrangian { det: 0.0, threshold: 0.0, t: None })?;
    Ok(sol.iter().copied().collect())
}

/// First-order vector field `f(x) = (q̇, q̈(q, q̇, t))`.
pub fn first_order_field(model: &LagrangianModel, x: &[f64], t: f64) -> Result<Vec<f64>> {
    let n = model.dim();
    if x.len() != 2 * n {
        return Err(Error::dims("x", 2 * n, x.len()));
    }
    let qdd = accel_generic(model, &x[..n], &x[n..], &t)?;
    Ok(x[n..].iter().copied().chain(qdd).collect())
}

/// `(ẋ, ξ̇) = (f(x), Df(x)·ξ)` with `Df·ξ` obtained by differentiating `f` along
/// `ξ`, independently of the `M, C, K` route.
pub fn tangent_rhs(model: &LagrangianModel, x: &[f64], xi: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = model.dim();
    if x.len() != 2 * n || xi.len() != 2 * n {
        return Err(Error::dims("tangent state", 2 * n, x.len().min(xi.len())));
    }
    let lifted: Vec<Dual<f64>> = x.iter().zip(xi).map(|(&a, &b)| Dual::new(a, b)).collect();
    let tt = Dual::constant(t);
    let b = blocks(model, &lifted[..n], &lifted[n..], &tt)?;
    let qdd = accel_from_blocks(&b, &lifted[n..], n)?;
    if qdd.iter().any(|a| !a.all_finite()) {
        return Err(Error::NonFiniteDerivative);
    }
    let xdot = x[n..].iter().copied().chain(qdd.iter().map(|a| a.re)).collect();
    let xidot = xi[n..].iter().copied().chain(qdd.iter().map(|a| a.du)).collect();
    Ok((xdot, xidot))
}

/// `(f(x), Df(x))`, the Jacobian assembled column by column.
pub fn tangent_jacobian(model: &LagrangianModel, x: &[f64], t: f64) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = x.len();
    let mut jac = DMatrix::zeros(dim, dim);
    let mut f = Vec::new();
    for j in 0..dim {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        let (fx, col) = tangent_rhs(model, x, &e, t)?;
        jac.set_column(j, &DVector::from_vec(col));
        f = fx;
    }
    Ok((f, jac))
}

/// `(ẋ, ṗ) = (f(x), −p·Df(x))`: Hamilton's equations for `H(x, p) = p·f(x)`.
pub fn adjoint_rhs(model: &LagrangianModel, a: &AdjointState) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.p.len() != a.x.len() {
        return Err(Error::dims("p", a.x.len(), a.p.len()));
    }
    let (f, jac) = tangent_jacobian(model, &a.x, a.t)?;
    let p = DVector::from_column_slice(&a.p);
    let pdot = -(jac.transpose() * p);
    Ok((f, pdot.iter().copied().collect()))
}

/// Which second term the prolongation Lagrangian `½|v|² + ½·(·)` carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProlongationForm {
    /// `½|f(x)|²`; its Euler–Lagrange equations are `ẍ = Df·f` for gradient fields.
    Squared,
    /// `½|f(x)|`, kept for comparison only.
    Unsquared,
}

/// `L(x, v) = ½|v|² + ½|f(x)|²` (or the unsquared variant) for a field over `x = (q1..qN)`.
pub fn prolongation_lagrangian(
    f: &[ExprAst],
    params: &BTreeMap<String, f64>,
    form: ProlongationForm,
) -> Result<LagrangianModel> {
    let n = f.len();
    check_field(f)?;
    let kinetic = ExprAst::sum((0..n).map(|a| ExprAst::sym(Symbol::Vel(a)).pow(2.0)));
    let norm2 = ExprAst::sum(f.iter().map(|e| e.clone().pow(2.0)));
    let potential = match form {
        ProlongationForm::Squared => norm2,
        ProlongationForm::Unsquared => norm2.pow(0.5),
    };
    let l = ExprAst::num(0.5).mul(kinetic).add(ExprAst::num(0.5).mul(potential));
    let fields: Vec<String> = f.iter().map(|e| e.to_string()).collect();
    LagrangianModel::from_ast(l, n, params.clone(), Provenance::Dsl(format!("prolongation of [{}]", fields.join(", "))))
}

fn check_field(f: &[ExprAst]) -> Result<()> {
    let n = f.len();
    if n == 0 {
        return Err(Error::InvalidConfig("vector field has no components".into()));
    }
    for e in f {
        for sym in e.symbols() {
            match sym {
                Symbol::Coord(i) if i >= n => return Err(Error::dims("field coordinate", n, i + 1)),
                Symbol::Vel(_) | Symbol::Time => {
                    return Err(Error::InvalidConfig(format!("vector field may not depend on `{sym}`")))
                }
                _ => {}
            }
        }
    }
    Ok(())
}

/// `(f(x), Df(x))` for an expression field.
pub fn field_jacobian(f: &[ExprAst], params: &BTreeMap<String, f64>, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = f.len();
    if x.len() != n {
        return Err(Error::dims("sample", n, x.len()));
    }
    let xv: Vec<Dual2<f64>> = x.iter().enumerate().map(|(i, &v)| Dual2::variable(v, i, n)).collect();
    let zero = Dual2::constant(0.0);
    let b = Bindings { q: &xv, qd: &[], t: &zero, params };
    let mut fx = Vec::with_capacity(n);
    let mut jac = DMatrix::zeros(n, n);
    for (i, e) in f.iter().enumerate() {
        let v = evaluate(e, &b)?;
        fx.push(v.value);
        for j in 0..n {
            jac[(i, j)] = v.grad(j);
        }
    }
    Ok((fx, jac))
}

#[derive(Clone, Debug, Serialize)]
pub struct ProlongationReport {
    /// `max_a |ẍ_a − (Df·f)_a|` per sample.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub max_asymmetry: f64,
}

/// Euler–Lagrange residuals of the prolongation Lagrangian against `ẍ = Df·f`,
/// without the symmetry precondition.
pub fn prolongation_residuals(
    f: &[ExprAst],
    params: &BTreeMap<String, f64>,
    samples: &[Vec<f64>],
    form: ProlongationForm,
) -> Result<Vec<f64>> {
    let model = prolongation_lagrangian(f, params, form)?;
    samples
        .iter()
        .map(|x| {
            let (fx, jac) = field_jacobian(f, params, x)?;
            let want = &jac * DVector::from_column_slice(&fx);
            let got = accel_generic(&model, x, &fx, &0.0)?;
            Ok(got.iter().zip(want.iter()).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max))
        })
        .collect()
}

/// Check that a field with symmetric Jacobian is the Euler–Lagrange flow of
/// `½|v|² + ½|f(x)|²`, i.e. that `ẍ = Df·f` along its integral curves.
pub fn first_prolongation_check(
    f: &[ExprAst],
    params: &BTreeMap<String, f64>,
    samples: &[Vec<f64>],
) -> Result<ProlongationReport> {
    check_field(f)?;
    let mut max_asymmetry = 0.0_f64;
    for (k, x) in samples.iter().enumerate() {
        let (_, jac) = field_jacobian(f, params, x)?;
        let scale = jac.amax().max(1.0);
        for i in 0..jac.nrows() {
            for j in i + 1..jac.ncols() {
                let d = (jac[(i, j)] - jac[(j, i)]).abs();
                if d > 1e-10 * scale {
                    return Err(Error::NonSymmetricJacobian { max_asymmetry: d, sample: k, i: i + 1, j: j + 1 });
                }
                max_asymmetry = max_asymmetry.max(d);
            }
        }
    }
    let residuals = prolongation_residuals(f, params, samples, ProlongationForm::Squared)?;
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(ProlongationReport { residuals, max_residual, max_asymmetry })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprdsl::parse;
    use crate::systems::{make_builtin, Params};

    fn oscillator() -> LagrangianModel {
        make_builtin("harmonic_oscillator", &Params::new()).unwrap()
    }

    #[test]
    fn gamma_values() {
        let free = make_builtin("free_particle", &Params::new()).unwrap();
        let d = DAlembertState::new(vec![0.7], vec![-2.0], vec![2.0], vec![3.0], 0.0);
        assert_eq!(gamma_eval(&free, &d).unwrap(), 6.0);
        let d = DAlembertState::new(vec![1.0], vec![3.0], vec![2.0], vec![4.0], 0.0);
        assert_eq!(gamma_eval(&oscillator(), &d).unwrap(), 5.0);
        let d = DAlembertState::new(vec![1.0], vec![0.0], vec![2.0], vec![0.0], 0.0);
        assert_eq!(gamma_eval(&oscillator(), &d).unwrap(), 0.0);
    }

    #[test]
    fn gamma_partial_values() {
        let d = DAlembertState::new(vec![1.0], vec![3.0], vec![2.0], vec![4.0], 0.0);
        let p = gamma_partials(&oscillator(), &d).unwrap();
        assert_eq!(p.d_epsd, vec![2.0]);
        assert_eq!(p.d_eps, vec![-1.0]);
        assert_eq!(p.d_q, vec![-3.0]);
        assert_eq!(p.d_qd, vec![4.0]);
    }

    #[test]
    fn oscillator_mck() {
        let s = PhaseState::new(vec![0.3], vec![0.1], 0.0);
        let (_, mats) = mck_at(&oscillator(), &s).unwrap();
        assert_eq!((mats.m[(0, 0)], mats.c[(0, 0)], mats.k[(0, 0)]), (1.0, 0.0, 1.0));
        assert_eq!(variational_rhs(&mats, &[1.0], &[0.0]).unwrap(), vec![-1.0]);
        assert_eq!(variational_rhs(&mats, &[0.0], &[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn oscillator_tangent_and_adjoint() {
        let m = oscillator();
        let (_, jac) = tangent_jacobian(&m, &[0.4, -0.2], 0.0).unwrap();
        assert_eq!(jac, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let (_, xi) = tangent_rhs(&m, &[0.4, -0.2], &[1.0, 0.0], 0.0).unwrap();
        assert_eq!(xi, vec![0.0, -1.0]);
        let a = AdjointState { x: vec![0.4, -0.2], p: vec![1.0, 0.0], t: 0.0 };
        assert_eq!(adjoint_rhs(&m, &a).unwrap().1, vec![0.0, -1.0]);
    }

    #[test]
    fn prolongation_identity_field() {
        let f = vec![parse("q1", 1, Vec::<String>::new()).unwrap()];
        let r = first_prolongation_check(&f, &BTreeMap::new(), &[vec![0.5], vec![-2.0]]).unwrap();
        assert!(r.max_residual < 1e-14);
    }

    #[test]
    fn prolongation_rejects_shear() {
        let f = vec![parse("q2", 2, Vec::<String>::new()).unwrap(), parse("0", 2, Vec::<String>::new()).unwrap()];
        let err = first_prolongation_check(&f, &BTreeMap::new(), &[vec![0.5, 0.1]]).unwrap_err();
        assert!(matches!(err, Error::NonSymmetricJacobian { i: 1, j: 2, .. }));
    }

    #[test]
    fn unsquared_prolongation_fails() {
        let f = vec![parse("q1", 1, Vec::<String>::new()).unwrap()];
        let r = prolongation_residuals(&f, &BTreeMap::new(), &[vec![2.0]], ProlongationForm::Unsquared).unwrap();
        assert!(r[0] > 1.0);
    }
}
