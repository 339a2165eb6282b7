//! Randomised checks of the identities relating `L`, `γ` and the two
//! linearisations, at seeded states drawn from a model's sample domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::autodiff::derive_all;
use crate::conserved::{displaced_energy, form_disagreement, DisplacedEnergyForm};
use crate::error::Result;
use crate::linalg::{dot, max_abs};
use crate::prolong::{gamma_eval, gamma_partials, mck_at, tangent_rhs, variational_rhs, GammaPartials};
use crate::state::DAlembertState;
use crate::systems::LagrangianModel;

pub const REPORT_VERSION: u32 = 1;

/// Supplies `γ` and its partials to the suite; swapped out to test the checks themselves.
pub trait GammaSource: Sync {
    fn gamma(&self, model: &LagrangianModel, d: &DAlembertState) -> Result<f64>;
    fn partials(&self, model: &LagrangianModel, d: &DAlembertState) -> Result<GammaPartials>;
}

/// The real prolonged Lagrangian.
pub struct Prolonged;

impl GammaSource for Prolonged {
    fn gamma(&self, model: &LagrangianModel, d: &DAlembertState) -> Result<f64> {
        gamma_eval(model, d)
    }

    fn partials(&self, model: &LagrangianModel, d: &DAlembertState) -> Result<GammaPartials> {
        gamma_partials(model, d)
    }
}

/// `−γ`: a deliberately wrong sign, used as a negative control.
pub struct NegatedGamma;

impl GammaSource for NegatedGamma {
    fn gamma(&self, model: &LagrangianModel, d: &DAlembertState) -> Result<f64> {
        Ok(-gamma_eval(model, d)?)
    }

    fn partials(&self, model: &LagrangianModel, d: &DAlembertState) -> Result<GammaPartials> {
        let p = gamma_partials(model, d)?;
        let neg = |v: Vec<f64>| v.into_iter().map(|x| -x).collect();
        Ok(GammaPartials { d_eps: neg(p.d_eps), d_epsd: neg(p.d_epsd), d_q: neg(p.d_q), d_qd: neg(p.d_qd) })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Thresholds {
    pub gamma_reduction: f64,
    pub gamma_homogeneity: f64,
    pub c_structure: f64,
    pub mck_vs_tangent: f64,
    pub h_forms: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { gamma_reduction: 1e-12, gamma_homogeneity: 1e-13, c_structure: 1e-10, mck_vs_tangent: 1e-8, h_forms: 1e-12 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub description: &'static str,
    pub max_violation: f64,
    pub threshold: f64,
    pub worst_sample: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub report_version: u32,
    pub system: String,
    pub n_samples: usize,
    pub seed: u64,
    pub checks: Vec<IdentityCheck>,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const NAMES: [(&str, &str); 5] = [
    ("gamma_reduction", "max |∂γ/∂ε̇ − ∂L/∂q̇|, |∂γ/∂ε − ∂L/∂q|"),
    ("gamma_homogeneity", "|γ − (∂γ/∂ε)·ε − (∂γ/∂ε̇)·ε̇| / (1 + |γ|)"),
    ("c_structure", "max |C + Cᵀ − 2 dM/dt| / max(1, max |dM/dt|)"),
    ("mck_vs_tangent", "|ε̈(M,C,K) − ε̈(Df·ξ)| / max(1, |ε̈|)"),
    ("h_forms", "spread of the three displaced-energy forms / max(1, |h|)"),
];

/// Draw sample `k` of a seeded sequence; each sample has its own stream so the
/// result does not depend on how samples are split across threads.
pub fn sample_state(model: &LagrangianModel, seed: u64, k: usize) -> DAlembertState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    let s = model.domain().sample(&mut rng);
    let n = model.dim();
    let eps = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let epsd = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DAlembertState::new(s.q, eps, s.qd, epsd, s.t)
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    max_abs(&diff) / max_abs(a).max(max_abs(b)).max(1.0)
}

fn violations(model: &LagrangianModel, d: &DAlembertState, source: &dyn GammaSource) -> Result<[f64; 5]> {
    let l = derive_all(model, &d.phase())?;
    let p = source.partials(model, d)?;
    let g = source.gamma(model, d)?;
    let reduction = p
        .d_epsd
        .iter()
        .zip(&l.dl_dqd)
        .chain(p.d_eps.iter().zip(&l.dl_dq))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let homogeneity = (g - dot(&p.d_eps, &d.eps) - dot(&p.d_epsd, &d.epsd)).abs() / (1.0 + g.abs());
    let (_, mats) = mck_at(model, &d.phase())?;
    let c_structure = (&mats.c + mats.c.transpose() - &mats.dm_dt * 2.0).amax() / mats.dm_dt.amax().max(1.0);
    let via_mck = variational_rhs(&mats, &d.eps, &d.epsd)?;
    let n = model.dim();
    let (_, xidot) = tangent_rhs(model, &d.phase().first_order(), &d.xi(), d.t)?;
    let mck = rel_diff(&via_mck, &xidot[n..]);
    let h12 = dot(&p.d_qd, &d.qd) + dot(&p.d_epsd, &d.epsd) - g;
    let h13 = dot(&p.d_qd, &d.qd) - dot(&p.d_eps, &d.eps);
    let h14 = displaced_energy(model, d, DisplacedEnergyForm::EnergyVariation)?;
    let forms = form_disagreement(&[h12, h13, h14]);
    Ok([reduction, homogeneity, c_structure, mck, forms])
}

/// Run the identity suite with the real `γ`.
pub fn verify_identities(model: &LagrangianModel, system: &str, n_samples: usize, seed: u64) -> Result<VerifyReport> {
    verify_with(model, system, n_samples, seed, &Thresholds::default(), &Prolonged)
}

pub fn verify_with(
    model: &LagrangianModel,
    system: &str,
    n_samples: usize,
    seed: u64,
    thresholds: &Thresholds,
    source: &dyn GammaSource,
) -> Result<VerifyReport> {
    let per_sample: Vec<[f64; 5]> = (0..n_samples)
        .into_par_iter()
        .map(|k| violations(model, &sample_state(model, seed, k), source))
        .collect::<Result<_>>()?;
    let limits = [
        thresholds.gamma_reduction,
        thresholds.gamma_homogeneity,
        thresholds.c_structure,
        thresholds.mck_vs_tangent,
        thresholds.h_forms,
    ];
    let checks: Vec<IdentityCheck> = (0..5)
        .map(|c| {
            let (worst_sample, max_violation) = per_sample
                .iter()
                .enumerate()
                .map(|(k, v)| (k, v[c]))
                .fold((0, 0.0), |best, cur| if cur.1 > best.1 || cur.1.is_nan() { cur } else { best });
            IdentityCheck {
                name: NAMES[c].0,
                description: NAMES[c].1,
                max_violation,
                threshold: limits[c],
                worst_sample,
                passed: max_violation <= limits[c],
            }
        })
        .collect();
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { report_version: REPORT_VERSION, system: system.to_string(), n_samples, seed, checks, all_passed })
}
