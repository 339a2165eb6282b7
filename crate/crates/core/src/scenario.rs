//! JSON scenarios: system, initial data, integrator settings, monitors and
//! outputs, plus the runner that turns one into CSV and JSON artifacts.
//!
//! The schema is documented in `docs/scenario.md`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conserved::{drift_report, ConservedQuantity, DriftReport, QuantityKind};
use crate::dynamics::{integrate, FlowOptions, IntegratorConfig, IntegratorStats, LinearizationPath, Trajectory};
use crate::error::{Error, Result};
use crate::state::DAlembertState;
use crate::systems::{make_builtin, LagrangianModel, ParamValue, Params};

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemSpec,
    pub initial: InitialSpec,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub linearization: LinearizationPath,
    #[serde(default)]
    pub monitors: Vec<MonitorSpec>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

/// Either a catalog entry or a Lagrangian in the expression language.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lagrangian: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default)]
    pub params: Params,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsd: Option<Vec<f64>>,
    /// Adjoint covector over `(q, q̇)`, length `2N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjoint: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum MonitorSpec {
    #[serde(rename = "H")]
    Energy {
        #[serde(default)]
        threshold: Option<f64>,
    },
    #[serde(rename = "h")]
    DisplacedEnergy {
        #[serde(default)]
        threshold: Option<f64>,
    },
    /// One-based coordinate index.
    #[serde(rename = "p")]
    Momentum {
        index: usize,
        #[serde(default)]
        threshold: Option<f64>,
    },
    #[serde(rename = "pi")]
    DisplacedMomentum {
        index: usize,
        #[serde(default)]
        threshold: Option<f64>,
    },
    #[serde(rename = "inherited")]
    Inherited {
        name: String,
        expr: String,
        #[serde(default)]
        threshold: Option<f64>,
    },
    #[serde(rename = "custom")]
    Custom {
        name: String,
        expr: String,
        #[serde(default)]
        threshold: Option<f64>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// Write every `stride`-th sample to the CSV.
    #[serde(default = "one")]
    pub stride: usize,
}

fn one() -> usize {
    1
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { csv: None, report: None, stride: 1 }
    }
}

impl SystemSpec {
    /// Build the model named by the system block.
    pub fn build_model(&self) -> Result<LagrangianModel> {
        match (&self.builtin, &self.lagrangian) {
            (Some(name), None) => {
                let model = make_builtin(name, &self.params)?;
                if let Some(n) = self.dim {
                    if n != model.dim() {
                        return Err(schema("system.dim", format!("`{name}` has dimension {}, not {n}", model.dim())));
                    }
                }
                Ok(model)
            }
            (None, Some(text)) => {
                let n = self.dim.ok_or_else(|| schema("system.dim", "required with `lagrangian`"))?;
                let mut params = BTreeMap::new();
                for (k, v) in &self.params {
                    match v {
                        ParamValue::Number(x) => {
                            params.insert(k.clone(), *x);
                        }
                        _ => return Err(schema(&format!("system.params.{k}"), "expected a number")),
                    }
                }
                LagrangianModel::from_dsl(text, n, params)
            }
            (Some(_), Some(_)) => Err(schema("system", "give either `builtin` or `lagrangian`, not both")),
            (None, None) => Err(schema("system", "one of `builtin` or `lagrangian` is required")),
        }
    }
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema { path: path.to_string(), message: message.into() }
}

impl Scenario {
    /// Parse and validate; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(&path, e.into_inner().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build_model(&self) -> Result<LagrangianModel> {
        self.system.build_model()
    }

    fn validate(&self) -> Result<()> {
        let n = match (self.system.dim, &self.system.builtin) {
            (Some(n), _) => n,
            (None, Some(_)) => self.build_model()?.dim(),
            (None, None) => return Err(schema("system.dim", "required with `lagrangian`")),
        };
        let init = &self.initial;
        let check = |field: &str, v: &[f64], len: usize| -> Result<()> {
            if v.len() != len {
                return Err(schema(&format!("initial.{field}"), format!("expected length {len}, got {}", v.len())));
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(schema(&format!("initial.{field}[{i}]"), "not finite"));
            }
            Ok(())
        };
        check("q", &init.q, n)?;
        check("qd", &init.qd, n)?;
        if let Some(e) = &init.eps {
            check("eps", e, n)?;
        }
        if let Some(e) = &init.epsd {
            check("epsd", e, n)?;
        }
        if let Some(p) = &init.adjoint {
            check("adjoint", p, 2 * n)?;
        }
        self.integrator.validate().map_err(|e| schema("integrator", e.to_string()))?;
        for (k, m) in self.monitors.iter().enumerate() {
            let at = |f: &str| format!("monitors[{k}].{f}");
            match m {
                MonitorSpec::Momentum { index, .. } | MonitorSpec::DisplacedMomentum { index, .. }
                    if *index == 0 || *index > n =>
                {
                    return Err(schema(&at("index"), format!("expected 1..={n}, got {index}")));
                }
                _ => {}
            }
            if let Some(th) = m.threshold() {
                if th.is_nan() || th < 0.0 {
                    return Err(schema(&at("threshold"), "must be non-negative"));
                }
            }
        }
        if self.outputs.stride == 0 {
            return Err(schema("outputs.stride", "must be at least 1"));
        }
        Ok(())
    }

    /// Initial state with missing displacement blocks set to zero.
    pub fn initial_state(&self) -> DAlembertState {
        let n = self.initial.q.len();
        let i = &self.initial;
        DAlembertState::new(
            i.q.clone(),
            i.eps.clone().unwrap_or_else(|| vec![0.0; n]),
            i.qd.clone(),
            i.epsd.clone().unwrap_or_else(|| vec![0.0; n]),
            self.integrator.t_start,
        )
    }

    pub fn quantities(&self, model: &LagrangianModel) -> Result<Vec<ConservedQuantity>> {
        self.monitors
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let q = match m {
                    MonitorSpec::Energy { .. } => ConservedQuantity::energy(),
                    MonitorSpec::DisplacedEnergy { .. } => ConservedQuantity::displaced_energy(),
                    MonitorSpec::Momentum { index, .. } => ConservedQuantity::momentum_p(index - 1),
                    MonitorSpec::DisplacedMomentum { index, .. } => ConservedQuantity::momentum_pi(index - 1),
                    MonitorSpec::Inherited { name, expr, .. } | MonitorSpec::Custom { name, expr, .. } => {
                        let ast = model.parse_expr(expr).map_err(|e| schema(&format!("monitors[{k}].expr"), e.to_string()))?;
                        let kind = match m {
                            MonitorSpec::Inherited { .. } => QuantityKind::Inherited(ast),
                            _ => QuantityKind::Custom(ast),
                        };
                        ConservedQuantity::new(name.clone(), kind)
                    }
                };
                Ok(match m.threshold() {
                    Some(th) => q.with_threshold(th),
                    None => q,
                })
            })
            .collect()
    }
}

impl MonitorSpec {
    pub fn threshold(&self) -> Option<f64> {
        match self {
            MonitorSpec::Energy { threshold }
            | MonitorSpec::DisplacedEnergy { threshold }
            | MonitorSpec::Momentum { threshold, .. }
            | MonitorSpec::DisplacedMomentum { threshold, .. }
            | MonitorSpec::Inherited { threshold, .. }
            | MonitorSpec::Custom { threshold, .. } => *threshold,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub report_version: u32,
    pub system: String,
    pub dim: usize,
    pub autonomous: bool,
    pub linearization: LinearizationPath,
    pub integrator: IntegratorConfig,
    pub stats: IntegratorStats,
    pub samples: usize,
    pub drift: DriftReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

impl RunReport {
    /// 0 when every monitored quantity is within its threshold, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.drift.all_passed {
            0
        } else {
            2
        }
    }
}

pub struct RunOutput {
    pub trajectory: Trajectory,
    pub report: RunReport,
}

/// Integrate a scenario and evaluate its monitors; writes nothing.
pub fn execute(scenario: &Scenario) -> Result<RunOutput> {
    let model = scenario.build_model()?;
    let quantities = scenario.quantities(&model)?;
    let opts = FlowOptions { path: scenario.linearization, adjoint: scenario.initial.adjoint.clone() };
    let mut trajectory = integrate(&model, &scenario.initial_state(), &scenario.integrator, &opts)?;
    let drift = drift_report(&model, &mut trajectory, &quantities)?;
    let system = match (&scenario.system.builtin, &scenario.system.lagrangian) {
        (Some(name), _) => name.clone(),
        (_, Some(text)) => text.clone(),
        _ => unreachable!("validated"),
    };
    let report = RunReport {
        report_version: REPORT_VERSION,
        system,
        dim: model.dim(),
        autonomous: model.is_autonomous(),
        linearization: scenario.linearization,
        integrator: scenario.integrator.clone(),
        stats: trajectory.stats.clone(),
        samples: trajectory.len(),
        drift,
        csv: None,
    };
    Ok(RunOutput { trajectory, report })
}

/// Output paths in a scenario are relative to the scenario file's directory.
pub fn run_scenario(path: &Path) -> Result<RunReport> {
    let scenario = Scenario::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let RunOutput { trajectory, mut report } = execute(&scenario)?;
    if let Some(csv) = &scenario.outputs.csv {
        let target = base.join(csv);
        std::fs::write(&target, trajectory_csv(&trajectory, scenario.outputs.stride))?;
        report.csv = Some(target);
    }
    if let Some(out) = &scenario.outputs.report {
        std::fs::write(base.join(out), serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(report)
}

/// `t, q_i, qd_i, eps_i, epsd_i`, monitors, then `p_i` when an adjoint was
/// integrated. Numbers use the shortest representation that reads back exactly.
pub fn trajectory_csv(traj: &Trajectory, stride: usize) -> String {
    let n = traj.states.first().map_or(0, |d| d.dim());
    let mut out = String::from("t");
    for block in ["q", "qd", "eps", "epsd"] {
        for i in 1..=n {
            let _ = write!(out, ",{block}_{i}");
        }
    }
    for m in &traj.monitors {
        let _ = write!(out, ",{}", m.name);
    }
    if let Some(p) = traj.adjoint.as_ref().and_then(|a| a.first()) {
        for i in 1..=p.len() {
            let _ = write!(out, ",p_{i}");
        }
    }
    out.push('\n');
    let stride = stride.max(1);
    let last = traj.len().saturating_sub(1);
    for k in (0..traj.len()).filter(|k| k % stride == 0 || *k == last) {
        let d = &traj.states[k];
        let _ = write!(out, "{:?}", traj.times[k]);
        for v in d.q.iter().chain(&d.qd).chain(&d.eps).chain(&d.epsd) {
            let _ = write!(out, ",{v:?}");
        }
        for m in &traj.monitors {
            let _ = write!(out, ",{:?}", m.values[k]);
        }
        if let Some(a) = &traj.adjoint {
            for v in &a[k] {
                let _ = write!(out, ",{v:?}");
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const OSC: &str = r#"{
        "system": {"builtin": "harmonic_oscillator"},
        "initial": {"q": [1.0], "qd": [0.0], "eps": [0.1], "epsd": [0.0]},
        "integrator": {"method": "dopri5", "t_end": 10.0, "output_interval": 1.0},
        "monitors": [{"kind": "H", "threshold": 1e-8}, {"kind": "h"}]
    }"#;

    #[test]
    fn parse_and_run() {
        let s = Scenario::from_json(OSC).unwrap();
        let out = execute(&s).unwrap();
        assert_eq!(out.report.exit_code(), 0);
        assert_eq!(out.trajectory.len(), 11);
        let csv = trajectory_csv(&out.trajectory, 1);
        assert!(csv.starts_with("t,q_1,qd_1,eps_1,epsd_1,H,h\n"));
        assert_eq!(csv.lines().count(), 12);
        let reread: f64 = csv.lines().nth(5).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(reread, out.trajectory.states[4].q[0]);
    }

    #[test]
    fn eps_length_names_path() {
        let bad = OSC.replace(r#""eps": [0.1]"#, r#""eps": [0.1, 0.2]"#);
        let err = Scenario::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("initial.eps"), "{err}");
    }

    #[test]
    fn unknown_field_names_path() {
        let bad = OSC.replace(r#""method": "dopri5""#, r#""method": "dopri5", "tolerance": 1"#);
        let err = Scenario::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("integrator"), "{err}");
        let bad = OSC.replace(r#"{"kind": "h"}"#, r#"{"kind": "p", "index": 3}"#);
        let err = Scenario::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("monitors[1].index"), "{err}");
    }

    #[test]
    fn dsl_system() {
        let text = r#"{
            "system": {"lagrangian": "0.5*qd1^2 - 0.5*k*q1^2", "dim": 1, "params": {"k": 4}},
            "initial": {"q": [1.0], "qd": [0.0]},
            "integrator": {"method": "rk4", "dt": 0.01, "t_end": 1.0}
        }"#;
        let s = Scenario::from_json(text).unwrap();
        let out = execute(&s).unwrap();
        assert!((out.trajectory.last().q[0] - 2f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn stride_keeps_last_row() {
        let s = Scenario::from_json(OSC).unwrap();
        let out = execute(&s).unwrap();
        let csv = trajectory_csv(&out.trajectory, 3);
        assert_eq!(csv.lines().count(), 1 + 5);
        assert!(csv.lines().last().unwrap().starts_with("10.0,"));
    }
}
