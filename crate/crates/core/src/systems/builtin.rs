use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::geodesic::{geodesic_model, MetricSpec};
use super::mechanical::{
    make_newton, make_planar_curvature, make_rotating, planar_symbols, potential_symbols, DEFAULT_S_RANGE,
};
use super::model::{LagrangianModel, Provenance, SampleDomain};
use crate::error::{Error, Result};
use crate::exprdsl::parse_with;

/// A builtin parameter: a number, a matrix (row list) or an expression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Matrix(Vec<Vec<f64>>),
    Expr(String),
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Expr(v.to_string())
    }
}

impl From<Vec<Vec<f64>>> for ParamValue {
    fn from(v: Vec<Vec<f64>>) -> Self {
        ParamValue::Matrix(v)
    }
}

pub type Params = BTreeMap<String, ParamValue>;

/// One catalog line.
#[derive(Clone, Debug, Serialize)]
pub struct SystemInfo {
    pub name: &'static str,
    /// Configuration dimension; `None` when set by the parameters.
    pub dim: Option<usize>,
    pub params: &'static str,
    pub family: &'static str,
    pub lagrangian: &'static str,
}

const CATALOG: &[SystemInfo] = &[
    SystemInfo {
        name: "free_particle",
        dim: Some(1),
        params: "m=1",
        family: "baseline",
        lagrangian: "½ m q̇²",
    },
    SystemInfo {
        name: "harmonic_oscillator",
        dim: Some(1),
        params: "omega=1",
        family: "Newton / small oscillations",
        lagrangian: "½q̇² − ½ω²q²",
    },
    SystemInfo {
        name: "inverted_oscillator",
        dim: Some(1),
        params: "lambda=1",
        family: "baseline (saddle)",
        lagrangian: "½q̇² + ½λ²q²",
    },
    SystemInfo {
        name: "double_well",
        dim: Some(1),
        params: "a=1 b=1",
        family: "Newton",
        lagrangian: "½q̇² − (¼bq⁴ − ½aq²)",
    },
    SystemInfo {
        name: "pendulum",
        dim: Some(1),
        params: "g=1 l=1",
        family: "Newton",
        lagrangian: "½l²q̇² + gl cos q",
    },
    SystemInfo {
        name: "coupled_oscillators",
        dim: Some(2),
        params: "k=1 kc=1",
        family: "Newton / small oscillations",
        lagrangian: "½|q̇|² − ½k|q|² − ½kc(q1 − q2)²",
    },
    SystemInfo {
        name: "kepler2d_cartesian",
        dim: Some(2),
        params: "mu=1",
        family: "Newton (central force)",
        lagrangian: "½|q̇|² + μ/|q|",
    },
    SystemInfo {
        name: "kepler2d_polar",
        dim: Some(2),
        params: "mu=1",
        family: "Newton (central force, ignorable angle)",
        lagrangian: "½(ṙ² + r²φ̇²) + μ/r",
    },
    SystemInfo {
        name: "newton_generic",
        dim: None,
        params: "mass=<matrix> potential=<expr> [numeric params used by potential]",
        family: "Newton",
        lagrangian: "½ m_ab q̇_a q̇_b − V(q)",
    },
    SystemInfo {
        name: "sphere_geodesic",
        dim: Some(2),
        params: "radius=1",
        family: "geodesic flow",
        lagrangian: "½R²(θ̇² + sin²θ φ̇²)",
    },
    SystemInfo {
        name: "plane_geodesic",
        dim: Some(2),
        params: "",
        family: "geodesic flow",
        lagrangian: "½(ẋ² + ẏ²)",
    },
    SystemInfo {
        name: "torus_geodesic",
        dim: Some(2),
        params: "R=2 r=1",
        family: "geodesic flow",
        lagrangian: "½(r²θ̇² + (R + r cos θ)²φ̇²)",
    },
    SystemInfo {
        name: "planar_curvature",
        dim: Some(2),
        params: "rho=\"1\" potential=\"v0^2*z + 0.5*kz*z^2\" v0=1 kz=1",
        family: "plane motion in curvature coordinates",
        lagrangian: "½[ż² + ṡ²(ρ+z)²/ρ²] − V(s,z)",
    },
    SystemInfo {
        name: "rotating_frame",
        dim: None,
        params: "rate=1 | omega=<skew matrix>, potential=\"0.5*(3*q1^2 + 2*q2^2)\", inertia=Ω²",
        family: "rotating Lagrangian systems",
        lagrangian: "½|Q̇|² + ⟨ΩQ,Q̇⟩ − V(Q) − ½⟨𝓘Q,Q⟩",
    },
    SystemInfo {
        name: "driven_particle",
        dim: Some(1),
        params: "f=1",
        family: "baseline (non-autonomous)",
        lagrangian: "½q̇² − f q t",
    },
];

pub fn list_systems() -> &'static [SystemInfo] {
    CATALOG
}

/// Parameters that build every catalog entry, including the ones whose
/// parameters have no defaults.
pub fn example_params(name: &str) -> Params {
    match name {
        "newton_generic" => Params::from([
            ("mass".into(), vec![vec![2.0, 0.0], vec![0.0, 1.0]].into()),
            ("potential".into(), "0.5*k*(q1^2 + q2^2) + 0.1*q1^2*q2".into()),
            ("k".into(), 1.0.into()),
        ]),
        _ => Params::new(),
    }
}

fn number(name: &str, v: &ParamValue) -> Result<f64> {
    match v {
        ParamValue::Number(x) if x.is_finite() => Ok(*x),
        ParamValue::Number(_) => Err(Error::InvalidParameter { name: name.into(), reason: "not finite".into() }),
        _ => Err(Error::InvalidParameter { name: name.into(), reason: "expected a number".into() }),
    }
}

fn matrix(name: &str, v: &ParamValue) -> Result<DMatrix<f64>> {
    match v {
        ParamValue::Matrix(rows) => {
            let n = rows.len();
            if n == 0 || rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidParameter { name: name.into(), reason: "expected a square matrix".into() });
            }
            Ok(DMatrix::from_row_iterator(n, n, rows.iter().flatten().copied()))
        }
        _ => Err(Error::InvalidParameter { name: name.into(), reason: "expected a matrix".into() }),
    }
}

fn text<'a>(name: &str, v: &'a ParamValue) -> Result<&'a str> {
    match v {
        ParamValue::Expr(s) => Ok(s),
        _ => Err(Error::InvalidParameter { name: name.into(), reason: "expected an expression string".into() }),
    }
}

/// Overlay user numbers on `defaults`, rejecting anything not declared there.
fn numeric(params: &Params, defaults: &[(&str, f64)]) -> Result<BTreeMap<String, f64>> {
    let mut out: BTreeMap<String, f64> = defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in params {
        if !out.contains_key(k) {
            return Err(Error::InvalidParameter { name: k.clone(), reason: "unknown parameter".into() });
        }
        out.insert(k.clone(), number(k, v)?);
    }
    Ok(out)
}

/// Numbers not in `reserved` become expression parameters.
fn passthrough(params: &Params, reserved: &[&str]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (k, v) in params {
        if reserved.contains(&k.as_str()) {
            continue;
        }
        out.insert(k.clone(), number(k, v)?);
    }
    Ok(out)
}

fn simple(
    name: &str,
    text: &str,
    dim: usize,
    params: &Params,
    defaults: &[(&str, f64)],
) -> Result<LagrangianModel> {
    let values = numeric(params, defaults)?;
    let ast = crate::exprdsl::parse(text, dim, values.keys().cloned())?;
    LagrangianModel::from_ast(ast, dim, values, Provenance::Builtin(name.into()))
}

fn labelled(m: LagrangianModel, labels: &[&str]) -> Result<LagrangianModel> {
    m.with_labels(labels.iter().map(|s| s.to_string()).collect())
}

fn metric(rows: [[&str; 2]; 2], values: BTreeMap<String, f64>, labels: &[&str], probe: SampleDomain) -> Result<MetricSpec> {
    let rows: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect();
    MetricSpec::parse(&rows, values, labels, probe)
}

/// Instantiate a catalog system.
pub fn make_builtin(name: &str, params: &Params) -> Result<LagrangianModel> {
    let builtin = || Provenance::Builtin(name.to_string());
    match name {
        "free_particle" => simple(name, "0.5*m*qd1^2", 1, params, &[("m", 1.0)]),
        "harmonic_oscillator" => simple(name, "0.5*qd1^2 - 0.5*omega^2*q1^2", 1, params, &[("omega", 1.0)]),
        "inverted_oscillator" => simple(name, "0.5*qd1^2 + 0.5*lambda^2*q1^2", 1, params, &[("lambda", 1.0)]),
        "double_well" => {
            simple(name, "0.5*qd1^2 - (0.25*b*q1^4 - 0.5*a*q1^2)", 1, params, &[("a", 1.0), ("b", 1.0)])
        }
        "pendulum" => simple(name, "0.5*l^2*qd1^2 + g*l*cos(q1)", 1, params, &[("g", 1.0), ("l", 1.0)]),
        "coupled_oscillators" => simple(
            name,
            "0.5*(qd1^2 + qd2^2) - 0.5*k*(q1^2 + q2^2) - 0.5*kc*(q1 - q2)^2",
            2,
            params,
            &[("k", 1.0), ("kc", 1.0)],
        ),
        "kepler2d_cartesian" => {
            let m = simple(name, "0.5*(qd1^2 + qd2^2) + mu/sqrt(q1^2 + q2^2)", 2, params, &[("mu", 1.0)])?;
            let mut d = SampleDomain::uniform(2, (-2.0, 2.0), (-1.0, 1.0));
            d.min_radius = Some(0.1);
            labelled(m, &["x", "y"])?.with_domain(d)
        }
        "kepler2d_polar" => {
            let m = simple(name, "0.5*(qd1^2 + q1^2*qd2^2) + mu/q1", 2, params, &[("mu", 1.0)])?;
            let mut d = SampleDomain::uniform(2, (0.5, 2.0), (-1.0, 1.0));
            d.q[1] = (-PI, PI);
            labelled(m, &["r", "phi"])?.with_domain(d)
        }
        "driven_particle" => simple(name, "0.5*qd1^2 - f*q1*t", 1, params, &[("f", 1.0)]),
        "sphere_geodesic" => {
            let values = numeric(params, &[("radius", 1.0)])?;
            if values["radius"] <= 0.0 {
                return Err(Error::InvalidParameter { name: "radius".into(), reason: "must be positive".into() });
            }
            let mut probe = SampleDomain::uniform(2, (0.3, PI - 0.3), (-1.0, 1.0));
            probe.q[1] = (-PI, PI);
            let g = metric([["radius^2", "0"], ["0", "radius^2*sin(theta)^2"]], values, &["theta", "phi"], probe)?;
            labelled(geodesic_model(&g, builtin())?, &["theta", "phi"])
        }
        "plane_geodesic" => {
            numeric(params, &[])?;
            let probe = SampleDomain::uniform(2, (-2.0, 2.0), (-1.0, 1.0));
            let g = metric([["1", "0"], ["0", "1"]], BTreeMap::new(), &["x", "y"], probe)?;
            labelled(geodesic_model(&g, builtin())?, &["x", "y"])
        }
        "torus_geodesic" => {
            let values = numeric(params, &[("R", 2.0), ("r", 1.0)])?;
            if !(values["r"] > 0.0 && values["R"] > values["r"]) {
                return Err(Error::InvalidParameter { name: "r".into(), reason: "need 0 < r < R".into() });
            }
            let probe = SampleDomain::uniform(2, (-PI, PI), (-1.0, 1.0));
            let g = metric([["r^2", "0"], ["0", "(R + r*cos(theta))^2"]], values, &["theta", "phi"], probe)?;
            labelled(geodesic_model(&g, builtin())?, &["theta", "phi"])
        }
        "newton_generic" => {
            let mass = params
                .get("mass")
                .ok_or_else(|| Error::MissingParameter { system: name.into(), name: "mass".into() })?;
            let v = params
                .get("potential")
                .ok_or_else(|| Error::MissingParameter { system: name.into(), name: "potential".into() })?;
            let mass = matrix("mass", mass)?;
            let values = passthrough(params, &["mass", "potential"])?;
            let v = parse_with(text("potential", v)?, &potential_symbols(mass.nrows(), &values)?)?;
            let m = make_newton(&mass, &v, values)?;
            let rebuilt = LagrangianModel::from_ast(m.source().clone(), m.dim(), m.params().clone(), builtin())?;
            Ok(rebuilt)
        }
        "rotating_frame" => {
            let omega = match (params.get("omega"), params.get("rate")) {
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidParameter { name: "rate".into(), reason: "give either rate or omega".into() })
                }
                (Some(m), None) => matrix("omega", m)?,
                (None, r) => {
                    let w = r.map(|r| number("rate", r)).transpose()?.unwrap_or(1.0);
                    DMatrix::from_row_slice(2, 2, &[0.0, -w, w, 0.0])
                }
            };
            let n = omega.nrows();
            let inertia = match params.get("inertia") {
                Some(m) => matrix("inertia", m)?,
                None => &omega * &omega,
            };
            let values = passthrough(params, &["omega", "rate", "inertia", "potential"])?;
            let v_text = match params.get("potential") {
                Some(v) => text("potential", v)?.to_string(),
                None if n == 2 => "0.5*(3*q1^2 + 2*q2^2)".to_string(),
                None => {
                    return Err(Error::MissingParameter { system: name.into(), name: "potential".into() })
                }
            };
            let v = parse_with(&v_text, &potential_symbols(n, &values)?)?;
            let m = make_rotating(&omega, &v, &inertia, values)?;
            LagrangianModel::from_ast(m.source().clone(), n, m.params().clone(), builtin())
        }
        "planar_curvature" => {
            let mut values = passthrough(params, &["rho", "potential"])?;
            let rho_text = params.get("rho").map(|v| text("rho", v)).transpose()?.unwrap_or("1");
            let v_text = match params.get("potential") {
                Some(v) => text("potential", v)?,
                None => {
                    values.entry("v0".into()).or_insert(1.0);
                    values.entry("kz".into()).or_insert(1.0);
                    "v0^2*z + 0.5*kz*z^2"
                }
            };
            let table = planar_symbols(&values)?;
            let rho = parse_with(rho_text, &table)?;
            let v = parse_with(v_text, &table)?;
            let m = make_planar_curvature(&rho, &v, values, DEFAULT_S_RANGE)?;
            let kind = m.kind().clone();
            let domain = m.domain().clone();
            LagrangianModel::from_ast(m.source().clone(), 2, m.params().clone(), builtin())?
                .with_labels(vec!["s".into(), "z".into()])?
                .with_domain(domain)
                .map(|m| m.with_kind(kind))
        }
        _ => Err(Error::UnknownSystem(name.to_string())),
    }
}
