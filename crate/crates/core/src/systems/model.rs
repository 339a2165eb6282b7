use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::autodiff::Scalar;
use crate::error::{Error, Result};
use crate::exprdsl::{evaluate, parse, Bindings, EvalError, ExprAst, Symbol};
use crate::state::PhaseState;

use super::geodesic::MetricSpec;

/// Where a model came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Builtin(String),
    Dsl(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Builtin(name) => write!(f, "builtin:{name}"),
            Provenance::Dsl(src) => write!(f, "dsl:{src}"),
        }
    }
}

/// Extra structure some diagnostics need beyond the Lagrangian itself.
#[derive(Clone, Debug)]
pub enum ModelKind {
    General,
    Geodesic(MetricSpec),
    /// Plane motion in curvature coordinates `(s, z) = (q1, q2)` about a
    /// reference curve of radius `rho(s)` in a potential `V(s, z)`.
    /// Both expressions have parameters already bound.
    PlanarCurvature { rho: ExprAst, potential: ExprAst },
}

/// Box from which random phase-space states are drawn for identity checks and
/// numerical ignorability tests.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleDomain {
    pub q: Vec<(f64, f64)>,
    pub qd: Vec<(f64, f64)>,
    pub t: (f64, f64),
    /// Reject configurations with `|q| <` this radius.
    pub min_radius: Option<f64>,
}

impl SampleDomain {
    pub fn uniform(n: usize, q: (f64, f64), qd: (f64, f64)) -> Self {
        SampleDomain { q: vec![q; n], qd: vec![qd; n], t: (0.0, 1.0), min_radius: None }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhaseState {
        let draw = |rng: &mut R, (lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let q = loop {
            let q: Vec<f64> = self.q.iter().map(|&r| draw(rng, r)).collect();
            match self.min_radius {
                Some(r) if q.iter().map(|x| x * x).sum::<f64>().sqrt() < r => continue,
                _ => break q,
            }
        };
        let qd = self.qd.iter().map(|&r| draw(rng, r)).collect();
        PhaseState { q, qd, t: draw(rng, self.t) }
    }
}

/// An evaluatable Lagrangian `L(q, q̇, t)` on an `N`-dimensional configuration space.
///
/// The Lagrangian is held as an expression tree; parameters are folded into
/// literals at construction so evaluation needs no lookups.
#[derive(Clone, Debug)]
pub struct LagrangianModel {
    dim: usize,
    source: ExprAst,
    lagrangian: ExprAst,
    params: BTreeMap<String, f64>,
    autonomous: bool,
    provenance: Provenance,
    labels: Vec<String>,
    domain: SampleDomain,
    kind: ModelKind,
}

static NO_PARAMS: BTreeMap<String, f64> = BTreeMap::new();

impl LagrangianModel {
    /// Parse a user-supplied Lagrangian.
    pub fn from_dsl(text: &str, dim: usize, params: BTreeMap<String, f64>) -> Result<Self> {
        let source = parse(text, dim, params.keys().cloned())?;
        Self::from_ast(source, dim, params, Provenance::Dsl(text.to_string()))
    }

    pub fn from_ast(
        source: ExprAst,
        dim: usize,
        params: BTreeMap<String, f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        for (name, v) in &params {
            if !v.is_finite() {
                return Err(Error::InvalidParameter { name: name.clone(), reason: "not finite".into() });
            }
        }
        let lagrangian = source.bind_params(&params);
        for sym in lagrangian.symbols() {
            match sym {
                Symbol::Param(p) => {
                    return Err(Error::InvalidParameter { name: p, reason: "no value given".into() })
                }
                Symbol::Coord(i) | Symbol::Vel(i) if i >= dim => {
                    return Err(Error::dims("coordinate index", dim, i + 1))
                }
                _ => {}
            }
        }
        let autonomous = !lagrangian.uses(&Symbol::Time);
        Ok(LagrangianModel {
            dim,
            source,
            lagrangian,
            params,
            autonomous,
            provenance,
            labels: (1..=dim).map(|i| format!("q{i}")).collect(),
            domain: SampleDomain::uniform(dim, (-1.0, 1.0), (-1.0, 1.0)),
            kind: ModelKind::General,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim {
            return Err(Error::dims("labels", self.dim, labels.len()));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn with_domain(mut self, domain: SampleDomain) -> Result<Self> {
        if domain.q.len() != self.dim || domain.qd.len() != self.dim {
            return Err(Error::dims("sample domain", self.dim, domain.q.len()));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn with_kind(mut self, kind: ModelKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lagrangian as written, parameters still symbolic.
    pub fn source(&self) -> &ExprAst {
        &self.source
    }

    /// Lagrangian with parameters folded in; what gets evaluated.
    pub fn lagrangian(&self) -> &ExprAst {
        &self.lagrangian
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn is_dsl(&self) -> bool {
        matches!(self.provenance, Provenance::Dsl(_))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn domain(&self) -> &SampleDomain {
        &self.domain
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn eval<S: Scalar>(&self, q: &[S], qd: &[S], t: &S) -> std::result::Result<S, EvalError> {
        evaluate(&self.lagrangian, &Bindings { q, qd, t, params: &NO_PARAMS })
    }

    /// Evaluate an auxiliary expression (a constant of motion, a monitor) with
    /// this model's parameter values.
    pub fn eval_expr<S: Scalar>(
        &self,
        expr: &ExprAst,
        q: &[S],
        qd: &[S],
        t: &S,
    ) -> std::result::Result<S, EvalError> {
        evaluate(expr, &Bindings { q, qd, t, params: &self.params })
    }

    /// Parse an auxiliary expression in this model's symbol space.
    pub fn parse_expr(&self, text: &str) -> Result<ExprAst> {
        Ok(parse(text, self.dim, self.params.keys().cloned())?)
    }

    pub fn value(&self, s: &PhaseState) -> Result<f64> {
        s.check(self.dim)?;
        Ok(self.eval(&s.q, &s.qd, &s.t)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn dsl_model_basics() {
        let m = LagrangianModel::from_dsl(
            "0.5*qd1^2 - 0.5*omega^2*q1^2",
            1,
            BTreeMap::from([("omega".into(), 2.0)]),
        )
        .unwrap();
        assert!(m.is_autonomous());
        assert!(m.is_dsl());
        let v = m.value(&PhaseState::new(vec![1.0], vec![3.0], 0.0)).unwrap();
        assert_eq!(v, 2.5);
    }

    #[test]
    fn time_dependence_detected() {
        let m = LagrangianModel::from_dsl("0.5*qd1^2 - q1*t", 1, BTreeMap::new()).unwrap();
        assert!(!m.is_autonomous());
    }

    #[test]
    fn missing_parameter_value() {
        let ast = parse("k*q1", 1, ["k"]).unwrap();
        let err = LagrangianModel::from_ast(ast, 1, BTreeMap::new(), Provenance::Dsl("k*q1".into()));
        assert!(matches!(err, Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn domain_respects_min_radius() {
        let mut d = SampleDomain::uniform(2, (-1.0, 1.0), (-1.0, 1.0));
        d.min_radius = Some(0.5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = d.sample(&mut rng);
            assert!(s.q.iter().map(|x| x * x).sum::<f64>().sqrt() >= 0.5);
        }
    }
}
