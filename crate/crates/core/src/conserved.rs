//! Energy, displaced energy, momenta of ignorable coordinates, inherited
//! constants, and drift monitoring along trajectories.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{derive_all, Dual, Scalar};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::exprdsl::{ExprAst, Symbol};
use crate::linalg::dot;
use crate::prolong::{gamma_eval, gamma_partials};
use crate::state::{DAlembertState, PhaseState};
use crate::systems::LagrangianModel;

/// Threshold below which `|∂L/∂q_s|` counts as zero when sampling.
pub const IGNORABLE_ATOL: f64 = 1e-12;

/// Agreement required between the three expressions for `h`, relative to `max(1, |h|)`.
pub const H_FORM_RTOL: f64 = 1e-10;

/// `H = (∂L/∂q̇)·q̇ − L` in any scalar, using one directional sweep along `q̇`.
pub(crate) fn energy_generic<S: Scalar>(model: &LagrangianModel, q: &[S], qd: &[S], t: &S) -> Result<S> {
    let qv: Vec<Dual<S>> = q.iter().map(|x| Dual::constant(x.clone())).collect();
    let qdv: Vec<Dual<S>> = qd.iter().map(|v| Dual::new(v.clone(), v.clone())).collect();
    let l = model.eval(&qv, &qdv, &Dual::constant(t.clone()))?;
    Ok(l.du - l.re)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Energy {
    pub value: f64,
    /// `L` depends on `t`, so `H` is not expected to be conserved.
    pub non_autonomous: bool,
}

pub fn energy(model: &LagrangianModel, s: &PhaseState) -> Result<Energy> {
    s.check(model.dim())?;
    let value = energy_generic(model, &s.q, &s.qd, &s.t)?;
    if !value.is_finite() {
        return Err(Error::NonFiniteDerivative);
    }
    Ok(Energy { value, non_autonomous: !model.is_autonomous() })
}

/// The three equivalent expressions for the displaced energy `h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplacedEnergyForm {
    /// `(∂γ/∂q̇)·q̇ + (∂γ/∂ε̇)·ε̇ − γ`, the energy function of `γ`.
    GammaEnergy,
    /// `(∂γ/∂q̇)·q̇ − (∂γ/∂ε)·ε`.
    Reduced,
    /// `(∂H/∂q̇)·ε̇ + (∂H/∂q)·ε`, the first-order change of `H`.
    EnergyVariation,
}

impl DisplacedEnergyForm {
    pub const ALL: [DisplacedEnergyForm; 3] =
        [DisplacedEnergyForm::GammaEnergy, DisplacedEnergyForm::Reduced, DisplacedEnergyForm::EnergyVariation];
}

pub fn displaced_energy(model: &LagrangianModel, d: &DAlembertState, form: DisplacedEnergyForm) -> Result<f64> {
    d.check(model.dim())?;
    let h = match form {
        DisplacedEnergyForm::GammaEnergy => {
            let p = gamma_partials(model, d)?;
            dot(&p.d_qd, &d.qd) + dot(&p.d_epsd, &d.epsd) - gamma_eval(model, d)?
        }
        DisplacedEnergyForm::Reduced => {
            let p = gamma_partials(model, d)?;
            dot(&p.d_qd, &d.qd) - dot(&p.d_eps, &d.eps)
        }
        DisplacedEnergyForm::EnergyVariation => {
            let lift = |x: &[f64], dx: &[f64]| -> Vec<Dual<f64>> { x.iter().zip(dx).map(|(&a, &b)| Dual::new(a, b)).collect() };
            energy_generic(model, &lift(&d.q, &d.eps), &lift(&d.qd, &d.epsd), &Dual::constant(d.t))?.du
        }
    };
    if !h.is_finite() {
        return Err(Error::NonFiniteDerivative);
    }
    Ok(h)
}

/// All three forms, in [`DisplacedEnergyForm::ALL`] order.
pub fn displaced_energy_forms(model: &LagrangianModel, d: &DAlembertState) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (o, f) in out.iter_mut().zip(DisplacedEnergyForm::ALL) {
        *o = displaced_energy(model, d, f)?;
    }
    Ok(out)
}

/// Largest pairwise disagreement of the three forms relative to `max(1, |h|)`.
pub fn form_disagreement(h: &[f64; 3]) -> f64 {
    let scale = h.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let spread = h.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)) - h.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    spread / scale
}

/// Coordinates absent from `L`: the symbol `q<s>` does not occur and
/// `|∂L/∂q_s| < 1e-12` at `n_samples` states drawn from the model's domain.
pub fn ignorable_coordinates(model: &LagrangianModel, n_samples: usize, seed: u64) -> Result<BTreeSet<usize>> {
    if n_samples < 100 {
        return Err(Error::InvalidConfig("ignorability needs at least 100 samples".into()));
    }
    let mut candidates: BTreeSet<usize> =
        (0..model.dim()).filter(|&s| !model.lagrangian().uses(&Symbol::Coord(s))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_samples {
        if candidates.is_empty() {
            break;
        }
        let st = model.domain().sample(&mut rng);
        let d = derive_all(model, &st)?;
        candidates.retain(|&s| d.dl_dq[s].abs() < IGNORABLE_ATOL);
    }
    Ok(candidates)
}

fn require_ignorable(model: &LagrangianModel, s: &PhaseState, idx: usize) -> Result<crate::autodiff::LagrangianDerivs> {
    if idx >= model.dim() {
        return Err(Error::dims("coordinate index", model.dim(), idx + 1));
    }
    let d = derive_all(model, s)?;
    if model.lagrangian().uses(&Symbol::Coord(idx)) || d.dl_dq[idx].abs() >= IGNORABLE_ATOL {
        return Err(Error::NotIgnorable { index: idx });
    }
    Ok(d)
}

/// `p_s = ∂L/∂q̇_s` for an ignorable `q_s`.
pub fn momentum_p(model: &LagrangianModel, s: &PhaseState, idx: usize) -> Result<f64> {
    Ok(require_ignorable(model, s, idx)?.dl_dqd[idx])
}

/// `π_s = (∂²L/∂q̇_s∂q̇_b) ε̇_b + (∂²L/∂q̇_s∂q_b) ε_b`, which equals `∂γ/∂q̇_s`.
pub fn momentum_pi(model: &LagrangianModel, d: &DAlembertState, idx: usize) -> Result<f64> {
    d.check(model.dim())?;
    let l = require_ignorable(model, &d.phase(), idx)?;
    let m = l.d2l_qdqd.row(idx);
    let a = l.d2l_qdq.row(idx);
    Ok((0..model.dim()).map(|b| m[b] * d.epsd[b] + a[b] * d.eps[b]).sum())
}

/// `j = (∂J/∂q)·ε + (∂J/∂q̇)·ε̇`, the displacement-linear constant inherited
/// from a constant of motion `J(q, q̇)`.
pub fn inherited_constant(j: &ExprAst, model: &LagrangianModel, d: &DAlembertState) -> Result<f64> {
    d.check(model.dim())?;
    for sym in j.symbols() {
        match sym {
            Symbol::Coord(i) | Symbol::Vel(i) if i >= model.dim() => {
                return Err(Error::dims("coordinate index", model.dim(), i + 1))
            }
            Symbol::Time => return Err(Error::InvalidConfig("inherited constant may not depend on t".into())),
            _ => {}
        }
    }
    let lift = |x: &[f64], dx: &[f64]| -> Vec<Dual<f64>> { x.iter().zip(dx).map(|(&a, &b)| Dual::new(a, b)).collect() };
    let v = model.eval_expr(j, &lift(&d.q, &d.eps), &lift(&d.qd, &d.epsd), &Dual::constant(d.t))?;
    if !v.du.is_finite() {
        return Err(Error::NonFiniteDerivative);
    }
    Ok(v.du)
}

#[derive(Clone, Debug)]
pub enum QuantityKind {
    EnergyH,
    /// Displaced energy; all three forms are evaluated and cross-checked.
    EnergyLowerH,
    MomentumP(usize),
    MomentumPi(usize),
    Inherited(ExprAst),
    /// A plain expression in `(q, q̇, t)` monitored for drift.
    Custom(ExprAst),
}

impl QuantityKind {
    pub fn tag(&self) -> &'static str {
        match self {
            QuantityKind::EnergyH => "energy_H",
            QuantityKind::EnergyLowerH => "energy_h",
            QuantityKind::MomentumP(_) => "momentum_p",
            QuantityKind::MomentumPi(_) => "momentum_pi",
            QuantityKind::Inherited(_) => "inherited_j",
            QuantityKind::Custom(_) => "custom",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConservedQuantity {
    pub name: String,
    pub kind: QuantityKind,
    /// Flag the quantity when its max drift exceeds this.
    pub threshold: Option<f64>,
}

impl ConservedQuantity {
    pub fn new(name: impl Into<String>, kind: QuantityKind) -> Self {
        ConservedQuantity { name: name.into(), kind, threshold: None }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }

    pub fn energy() -> Self {
        Self::new("H", QuantityKind::EnergyH)
    }

    pub fn displaced_energy() -> Self {
        Self::new("h", QuantityKind::EnergyLowerH)
    }

    /// Names are one-based: `p1` is the momentum of `q1`.
    pub fn momentum_p(idx: usize) -> Self {
        Self::new(format!("p{}", idx + 1), QuantityKind::MomentumP(idx))
    }

    pub fn momentum_pi(idx: usize) -> Self {
        Self::new(format!("pi{}", idx + 1), QuantityKind::MomentumPi(idx))
    }

    /// Value at one state; for `h`, the energy-variation form.
    pub fn evaluate(&self, model: &LagrangianModel, d: &DAlembertState) -> Result<f64> {
        match &self.kind {
            QuantityKind::EnergyH => Ok(energy(model, &d.phase())?.value),
            QuantityKind::EnergyLowerH => displaced_energy(model, d, DisplacedEnergyForm::EnergyVariation),
            QuantityKind::MomentumP(i) => momentum_p(model, &d.phase(), *i),
            QuantityKind::MomentumPi(i) => momentum_pi(model, d, *i),
            QuantityKind::Inherited(j) => inherited_constant(j, model, d),
            QuantityKind::Custom(e) => Ok(model.eval_expr(e, &d.q, &d.qd, &d.t)?),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftEntry {
    pub name: String,
    pub kind: &'static str,
    pub reference: f64,
    pub max_abs_drift: f64,
    pub threshold: Option<f64>,
    /// False for `H` of a time-dependent Lagrangian.
    pub expected_conserved: bool,
    /// Largest relative disagreement among the three forms of `h`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub form_disagreement: Option<f64>,
    pub passed: bool,
    #[serde(skip)]
    pub values: Vec<f64>,
    #[serde(skip)]
    pub drift: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftReport {
    pub entries: Vec<DriftEntry>,
    pub all_passed: bool,
}

impl DriftReport {
    pub fn entry(&self, name: &str) -> Option<&DriftEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// CSV with one column per quantity's drift.
    pub fn drift_csv(&self, times: &[f64]) -> String {
        let mut out = String::from("t");
        for e in &self.entries {
            out.push(',');
            out.push_str(&e.name);
        }
        out.push('\n');
        for (k, t) in times.iter().enumerate() {
            out.push_str(&format!("{t:?}"));
            for e in &self.entries {
                out.push_str(&format!(",{:?}", e.drift[k]));
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluate every quantity on every sample, record the series as trajectory
/// monitors and summarise the drift.
pub fn drift_report(model: &LagrangianModel, traj: &mut Trajectory, quantities: &[ConservedQuantity]) -> Result<DriftReport> {
    let mut entries = Vec::with_capacity(quantities.len());
    for q in quantities {
        let mut values = Vec::with_capacity(traj.len());
        let mut disagreement = None;
        for d in &traj.states {
            match q.kind {
                QuantityKind::EnergyLowerH => {
                    let forms = displaced_energy_forms(model, d)?;
                    let dis = form_disagreement(&forms);
                    disagreement = Some(disagreement.map_or(dis, |m: f64| m.max(dis)));
                    values.push(forms[2]);
                }
                _ => values.push(q.evaluate(model, d)?),
            }
        }
        let reference = values.first().copied().unwrap_or(0.0);
        let drift: Vec<f64> = values.iter().map(|v| v - reference).collect();
        let max_abs_drift = drift.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let forms_ok = disagreement.is_none_or(|d| d <= H_FORM_RTOL);
        let passed = forms_ok && q.threshold.is_none_or(|th| max_abs_drift <= th);
        let expected_conserved = match q.kind {
            QuantityKind::EnergyH | QuantityKind::EnergyLowerH => model.is_autonomous(),
            _ => true,
        };
        traj.push_monitor(q.name.clone(), values.clone())?;
        entries.push(DriftEntry {
            name: q.name.clone(),
            kind: q.kind.tag(),
            reference,
            max_abs_drift,
            threshold: q.threshold,
            expected_conserved,
            form_disagreement: disagreement,
            passed,
            values,
            drift,
        });
    }
    let all_passed = entries.iter().all(|e| e.passed);
    Ok(DriftReport { entries, all_passed })
}
