use std::collections::BTreeMap;

use log::warn;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{LagrangianModel, ModelKind, Provenance, SampleDomain};
use crate::autodiff::{Dual2, Scalar};
use crate::error::{Error, Result};
use crate::exprdsl::{evaluate, parse_with, Bindings, ExprAst, Node, Symbol, SymbolTable};
use crate::state::PhaseState;

const PROBE_POINTS: usize = 32;

/// Riemannian metric `g_ab(q)` given component-wise as expressions over `q`.
#[derive(Clone, Debug)]
pub struct MetricSpec {
    dim: usize,
    /// Row-major, parameters bound.
    components: Vec<ExprAst>,
    params: BTreeMap<String, f64>,
    probe: SampleDomain,
}

impl MetricSpec {
    /// `rows[a][b]` is the text of `g_ab`; coordinates may be written `q1..qN`
    /// or through `labels`.
    pub fn parse(
        rows: &[Vec<String>],
        params: BTreeMap<String, f64>,
        labels: &[&str],
        probe: SampleDomain,
    ) -> Result<Self> {
        let n = rows.len();
        let mut table = SymbolTable::new(n, params.keys().cloned()).map_err(Error::InvalidConfig)?;
        for (i, l) in labels.iter().enumerate() {
            table = table.with_alias(l, Symbol::Coord(i)).map_err(Error::InvalidConfig)?;
        }
        let mut components = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::dims("metric row", n, row.len()));
            }
            for text in row {
                components.push(parse_with(text, &table)?);
            }
        }
        Self::new(components, n, params, probe)
    }

    pub fn new(components: Vec<ExprAst>, dim: usize, params: BTreeMap<String, f64>, probe: SampleDomain) -> Result<Self> {
        if components.len() != dim * dim {
            return Err(Error::dims("metric components", dim * dim, components.len()));
        }
        let components: Vec<ExprAst> = components.iter().map(|c| c.bind_params(&params)).collect();
        for c in &components {
            for sym in c.symbols() {
                if !matches!(sym, Symbol::Coord(_)) {
                    return Err(Error::InvalidConfig(format!("metric component depends on `{sym}`")));
                }
            }
        }
        let spec = MetricSpec { dim, components, params, probe };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn component(&self, a: usize, b: usize) -> &ExprAst {
        &self.components[a * self.dim + b]
    }

    /// Row-major `g(q)` in any scalar.
    pub fn eval<S: Scalar>(&self, q: &[S]) -> Result<Vec<S>> {
        let no_params = BTreeMap::new();
        let zero = S::zero();
        let b = Bindings { q, qd: &[], t: &zero, params: &no_params };
        self.components.iter().map(|c| Ok(evaluate(c, &b)?)).collect()
    }

    pub fn matrix(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_row_slice(self.dim, self.dim, &self.eval(q)?))
    }

    fn validate(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6d65_7472);
        for _ in 0..PROBE_POINTS {
            let q = self.probe.sample(&mut rng).q;
            let g = self.matrix(&q)?;
            let asym = (&g - g.transpose()).amax();
            if asym > 1e-12 * (1.0 + g.amax()) {
                return Err(Error::InvalidConfig(format!("metric not symmetric at q = {q:?}")));
            }
            if g.cholesky().is_none() {
                return Err(Error::NonPositiveDefiniteMetric { at: q });
            }
        }
        Ok(())
    }
}

/// `L = ½ g_ab q̇_a q̇_b`; its equations of motion are the geodesic equations and
/// its variational equations are the equations of geodesic deviation.
pub fn make_geodesic(metric: &MetricSpec) -> Result<LagrangianModel> {
    geodesic_model(metric, Provenance::Dsl(format!("geodesic metric {}", render(metric))))
}

pub(crate) fn geodesic_model(metric: &MetricSpec, provenance: Provenance) -> Result<LagrangianModel> {
    let n = metric.dim;
    let mut terms = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let g = metric.component(a, b);
            if matches!(g.node, Node::Number(v) if v == 0.0) {
                continue;
            }
            terms.push(g.clone().mul(ExprAst::sym(Symbol::Vel(a))).mul(ExprAst::sym(Symbol::Vel(b))));
        }
    }
    let lagrangian = ExprAst::num(0.5).mul(ExprAst::sum(terms));
    LagrangianModel::from_ast(lagrangian, n, BTreeMap::new(), provenance)?
        .with_domain(metric.probe.clone())
        .map(|m| m.with_kind(ModelKind::Geodesic(metric.clone())))
}

fn render(metric: &MetricSpec) -> String {
    let rows: Vec<String> = (0..metric.dim)
        .map(|a| {
            let cols: Vec<String> = (0..metric.dim).map(|b| metric.component(a, b).to_string()).collect();
            format!("[{}]", cols.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

/// Gaussian curvature of a 2D metric at `s.q` by the Brioschi formula, with the
/// metric's first and second partials taken by dual numbers.
pub fn curvature_oracle_2d(metric: &MetricSpec, s: &PhaseState) -> Result<f64> {
    if metric.dim != 2 {
        return Err(Error::dims("curvature oracle dimension", 2, metric.dim));
    }
    if s.q.len() != 2 {
        return Err(Error::dims("q", 2, s.q.len()));
    }
    let q = [Dual2::variable(s.q[0], 0, 2), Dual2::variable(s.q[1], 1, 2)];
    let g = metric.eval(&q)?;
    let (e, f, gg) = (&g[0], &g[1], &g[3]);
    let (ev, fv, gv) = (e.value, f.value, gg.value);
    let det = ev * gv - fv * fv;
    if det <= 0.0 || !det.is_finite() {
        return Err(Error::NonPositiveDefiniteMetric { at: s.q.clone() });
    }
    let (e_u, e_v, e_vv) = (e.grad(0), e.grad(1), e.hess(1, 1));
    let (f_u, f_v, f_uv) = (f.grad(0), f.grad(1), f.hess(0, 1));
    let (g_u, g_v, g_uu) = (gg.grad(0), gg.grad(1), gg.hess(0, 0));
    let a = nalgebra::Matrix3::new(
        -0.5 * e_vv + f_uv - 0.5 * g_uu,
        0.5 * e_u,
        f_u - 0.5 * e_v,
        f_v - 0.5 * g_u,
        ev,
        fv,
        0.5 * g_v,
        fv,
        gv,
    );
    let b = nalgebra::Matrix3::new(0.0, 0.5 * e_v, 0.5 * g_u, 0.5 * e_v, ev, fv, 0.5 * g_u, fv, gv);
    Ok((a.determinant() - b.determinant()) / (det * det))
}

/// Rescale `q̇` to unit speed so the evolution parameter is arc length.
/// Returns whether a rescale happened.
pub fn normalize_speed(metric: &MetricSpec, s: &mut PhaseState) -> Result<bool> {
    let g = metric.matrix(&s.q)?;
    let v = nalgebra::DVector::from_column_slice(&s.qd);
    let speed = (v.transpose() * &g * &v)[(0, 0)].sqrt();
    if speed == 0.0 || !speed.is_finite() {
        return Err(Error::InvalidConfig("geodesic initial velocity has zero length".into()));
    }
    if (speed - 1.0).abs() <= 1e-12 {
        return Ok(false);
    }
    warn!("geodesic initial speed {speed} renormalised to 1 (arc-length parameter)");
    for x in &mut s.qd {
        *x /= speed;
    }
    Ok(true)
}
