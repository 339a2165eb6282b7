use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::model::{LagrangianModel, ModelKind, Provenance, SampleDomain};
use crate::error::{Error, Result};
use crate::exprdsl::{evaluate, Bindings, ExprAst, Symbol, SymbolTable};

fn vel(a: usize) -> ExprAst {
    ExprAst::sym(Symbol::Vel(a))
}

fn coord(a: usize) -> ExprAst {
    ExprAst::sym(Symbol::Coord(a))
}

/// `Σ_ab m_ab u_a w_b`, skipping zero entries.
fn bilinear(m: &DMatrix<f64>, u: impl Fn(usize) -> ExprAst, w: impl Fn(usize) -> ExprAst) -> Vec<ExprAst> {
    let mut terms = Vec::new();
    for a in 0..m.nrows() {
        for b in 0..m.ncols() {
            let c = m[(a, b)];
            if c != 0.0 {
                terms.push(ExprAst::num(c).mul(u(a)).mul(w(b)));
            }
        }
    }
    terms
}

fn check_potential(v: &ExprAst, dim: usize) -> Result<()> {
    for sym in v.symbols() {
        match sym {
            Symbol::Coord(i) if i >= dim => return Err(Error::dims("coordinate index", dim, i + 1)),
            Symbol::Vel(_) => {
                return Err(Error::InvalidConfig(format!("potential may not depend on velocity `{sym}`")))
            }
            _ => {}
        }
    }
    Ok(())
}

fn check_square(name: &str, m: &DMatrix<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidParameter { name: name.into(), reason: "must be a non-empty square matrix".into() });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter { name: name.into(), reason: "not finite".into() });
    }
    Ok(m.nrows())
}

/// Symbol table for potentials of an `n`-dimensional mechanical system.
pub fn potential_symbols(n: usize, params: &BTreeMap<String, f64>) -> Result<SymbolTable> {
    SymbolTable::new(n, params.keys().cloned()).map_err(Error::InvalidConfig)
}

/// `L = ½ m_ab q̇_a q̇_b − V(q)` with a constant symmetric mass matrix.
pub fn make_newton(mass: &DMatrix<f64>, potential: &ExprAst, params: BTreeMap<String, f64>) -> Result<LagrangianModel> {
    let n = check_square("mass", mass)?;
    if (mass - mass.transpose()).amax() > 1e-12 * mass.amax() {
        return Err(Error::InvalidParameter { name: "mass".into(), reason: "not symmetric".into() });
    }
    check_potential(potential, n)?;
    let kinetic = ExprAst::num(0.5).mul(ExprAst::sum(bilinear(mass, vel, vel)));
    let l = kinetic.sub(potential.clone());
    let text = format!("newton m={mass:?} V={potential}");
    LagrangianModel::from_ast(l, n, params, Provenance::Dsl(text))
}

/// Lagrangian of a system seen from a frame rotating at the constant skew rate `Ω`:
/// `L = ½⟨Q̇,Q̇⟩ + ⟨ΩQ,Q̇⟩ − V(Q) − ½⟨𝓘Q,Q⟩`.
///
/// `inertia = Ω²` reproduces the centrifugal term of a genuine rotating frame.
pub fn make_rotating(
    omega: &DMatrix<f64>,
    potential: &ExprAst,
    inertia: &DMatrix<f64>,
    params: BTreeMap<String, f64>,
) -> Result<LagrangianModel> {
    let n = check_square("omega", omega)?;
    let asym = (omega + omega.transpose()).amax();
    if asym > 1e-12 * (1.0 + omega.amax()) {
        return Err(Error::NonSkewOmega { max_asymmetry: asym });
    }
    if check_square("inertia", inertia)? != n {
        return Err(Error::dims("inertia", n, inertia.nrows()));
    }
    check_potential(potential, n)?;
    let kinetic = ExprAst::num(0.5).mul(ExprAst::sum((0..n).map(|a| vel(a).mul(vel(a)))));
    let cross = ExprAst::sum(bilinear(omega, vel, coord));
    let centrifugal = ExprAst::num(0.5).mul(ExprAst::sum(bilinear(inertia, coord, coord)));
    let l = kinetic.add(cross).sub(potential.clone()).sub(centrifugal);
    let text = format!("rotating omega={omega:?} V={potential} I={inertia:?}");
    LagrangianModel::from_ast(l, n, params, Provenance::Dsl(text))
}

/// Symbol table for curvature-coordinate systems: `s = q1` along the reference
/// curve, `z = q2` normal to it.
pub fn planar_symbols(params: &BTreeMap<String, f64>) -> Result<SymbolTable> {
    SymbolTable::new(2, params.keys().cloned())
        .and_then(|t| t.with_alias("s", Symbol::Coord(0)))
        .and_then(|t| t.with_alias("z", Symbol::Coord(1)))
        .map_err(Error::InvalidConfig)
}

/// Plane motion in curvature coordinates about a reference curve of radius
/// `ρ(s)`: `L = ½[ż² + ṡ²(ρ + z)²/ρ²] − V(s, z)`.
///
/// `ρ` is checked positive on `s ∈ s_range`.
pub fn make_planar_curvature(
    rho: &ExprAst,
    potential: &ExprAst,
    params: BTreeMap<String, f64>,
    s_range: (f64, f64),
) -> Result<LagrangianModel> {
    if rho.symbols().iter().any(|s| !matches!(s, Symbol::Coord(0) | Symbol::Param(_))) {
        return Err(Error::InvalidConfig("rho may depend on s only".into()));
    }
    check_potential(potential, 2)?;
    let rho_bound = rho.bind_params(&params);
    let potential_bound = potential.bind_params(&params);
    let no_params = BTreeMap::new();
    let mut rho_min = f64::INFINITY;
    const PROBES: usize = 257;
    for k in 0..PROBES {
        let s = s_range.0 + (s_range.1 - s_range.0) * k as f64 / (PROBES - 1) as f64;
        let q = [s, 0.0];
        let r = evaluate(&rho_bound, &Bindings { q: &q, qd: &[0.0, 0.0], t: &0.0, params: &no_params })
            .map_err(|_| Error::NonPositiveCurvatureRadius { s })?;
        if r.is_nan() || r <= 0.0 {
            return Err(Error::NonPositiveCurvatureRadius { s });
        }
        rho_min = rho_min.min(r);
    }
    let z = coord(1);
    let stretch = rho.clone().add(z.clone()).div(rho.clone());
    let l = ExprAst::num(0.5)
        .mul(vel(1).pow(2.0).add(vel(0).pow(2.0).mul(stretch.pow(2.0))))
        .sub(potential.clone());
    let zmax = 0.2 * rho_min;
    let domain = SampleDomain {
        q: vec![s_range, (-zmax, zmax)],
        qd: vec![(-1.0, 1.0); 2],
        t: (0.0, 1.0),
        min_radius: None,
    };
    let text = format!("planar rho={rho} V={potential}");
    LagrangianModel::from_ast(l, 2, params, Provenance::Dsl(text))?
        .with_labels(vec!["s".into(), "z".into()])?
        .with_domain(domain)
        .map(|m| m.with_kind(ModelKind::PlanarCurvature { rho: rho_bound, potential: potential_bound }))
}

pub(crate) const DEFAULT_S_RANGE: (f64, f64) = (-PI, PI);
