use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ẏ = F(t, y)`.
pub trait OdeSystem {
    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

impl<F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>> OdeSystem for F {
    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self(t, y, dy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Dopri5,
}

/// Integration settings. `dt` is used by `rk4`; `rtol`/`atol` by `dopri5`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_tol")]
    pub rtol: f64,
    #[serde(default = "default_tol")]
    pub atol: f64,
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    /// Time between recorded samples; `None` records only the end points.
    #[serde(default)]
    pub output_interval: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_steps() -> usize {
    10_000_000
}

impl IntegratorConfig {
    pub fn rk4(t_end: f64, dt: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            dt: Some(dt),
            rtol: default_tol(),
            atol: default_tol(),
            t_start: 0.0,
            t_end,
            output_interval: None,
            max_steps: default_max_steps(),
        }
    }

    pub fn dopri5(t_end: f64, tol: f64) -> Self {
        IntegratorConfig {
            method: Method::Dopri5,
            dt: None,
            rtol: tol,
            atol: tol,
            t_start: 0.0,
            t_end,
            output_interval: None,
            max_steps: default_max_steps(),
        }
    }

    pub fn with_output_interval(mut self, dt: f64) -> Self {
        self.output_interval = Some(dt);
        self
    }

    pub fn with_start(mut self, t_start: f64) -> Self {
        self.t_start = t_start;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.t_start.is_finite() && self.t_end.is_finite()) || self.t_end <= self.t_start {
            return bad("t_end must exceed t_start");
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("rtol and atol must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        if let Some(h) = self.output_interval {
            if !(h > 0.0 && h.is_finite()) {
                return bad("output_interval must be positive");
            }
        }
        match (self.method, self.dt) {
            (Method::Rk4, None) => bad("rk4 needs a fixed step dt"),
            (Method::Rk4, Some(h)) if !(h > 0.0 && h.is_finite()) => bad("dt must be positive"),
            _ => Ok(()),
        }
    }

    /// Output times: `t_start`, every `output_interval`, and `t_end`.
    pub fn output_times(&self) -> Vec<f64> {
        let span = self.t_end - self.t_start;
        let mut times = vec![self.t_start];
        if let Some(h) = self.output_interval {
            let n = (span / h * (1.0 - 1e-12)).floor() as usize;
            times.extend((1..=n).map(|k| self.t_start + k as f64 * h));
        }
        if self.t_end - times.last().copied().unwrap_or(self.t_start) > 1e-12 * span {
            times.push(self.t_end);
        } else {
            *times.last_mut().unwrap() = self.t_end;
        }
        if times.len() == 1 {
            times.push(self.t_end);
        }
        times
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest scaled error estimate over accepted `dopri5` steps (≤ 1).
    pub max_error_norm: Option<f64>,
}

/// Integrate `sys` from `y0`, calling `observe(t, y)` at every output time
/// (including the start). Steps are clipped to land on the output times.
pub fn integrate_ode(
    sys: &mut dyn OdeSystem,
    y0: &[f64],
    cfg: &IntegratorConfig,
    observe: &mut dyn FnMut(f64, &[f64]) -> Result<()>,
) -> Result<IntegratorStats> {
    cfg.validate()?;
    if y0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig("initial state is not finite".into()));
    }
    let times = cfg.output_times();
    match cfg.method {
        Method::Rk4 => rk4(sys, y0, cfg, &times, observe),
        Method::Dopri5 => Dopri5::new(cfg, y0.len()).run(sys, y0, &times, observe),
    }
}

fn call(sys: &mut dyn OdeSystem, t: f64, y: &[f64], dy: &mut [f64], stats: &mut IntegratorStats) -> Result<()> {
    stats.rhs_evals += 1;
    sys.rhs(t, y, dy).map_err(|e| e.at(t))?;
    if dy.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(format!("right-hand side not finite at t = {t}")));
    }
    Ok(())
}

fn axpy(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..out.len() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

fn rk4(
    sys: &mut dyn OdeSystem,
    y0: &[f64],
    cfg: &IntegratorConfig,
    times: &[f64],
    observe: &mut dyn FnMut(f64, &[f64]) -> Result<()>,
) -> Result<IntegratorStats> {
    let dt = cfg.dt.expect("validated");
    let n = y0.len();
    let mut stats = IntegratorStats::default();
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    observe(times[0], &y)?;
    for w in times.windows(2) {
        let (a, b) = (w[0], w[1]);
        let steps = ((b - a) / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        for i in 0..steps {
            if stats.accepted >= cfg.max_steps {
                return Err(Error::MaxStepsExceeded { t: a + i as f64 * h, steps: stats.accepted });
            }
            let t = a + i as f64 * h;
            call(sys, t, &y, &mut k1, &mut stats)?;
            axpy(&mut tmp, &y, 0.5 * h, &[(1.0, &k1)]);
            call(sys, t + 0.5 * h, &tmp, &mut k2, &mut stats)?;
            axpy(&mut tmp, &y, 0.5 * h, &[(1.0, &k2)]);
            call(sys, t + 0.5 * h, &tmp, &mut k3, &mut stats)?;
            axpy(&mut tmp, &y, h, &[(1.0, &k3)]);
            call(sys, t + h, &tmp, &mut k4, &mut stats)?;
            let yc = y.clone();
            axpy(&mut y, &yc, h / 6.0, &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)]);
            stats.accepted += 1;
        }
        observe(b, &y)?;
    }
    Ok(stats)
}

// Dormand–Prince 5(4)
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const ALPHA: f64 = 0.17;
const BETA: f64 = 0.04;

struct Dopri5 {
    rtol: f64,
    atol: f64,
    max_steps: usize,
    span: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl Dopri5 {
    fn new(cfg: &IntegratorConfig, n: usize) -> Self {
        Dopri5 {
            rtol: cfg.rtol,
            atol: cfg.atol,
            max_steps: cfg.max_steps,
            span: cfg.t_end - cfg.t_start,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
        }
    }

    fn scaled_norm(&self, v: &[f64], y: &[f64], y2: &[f64]) -> f64 {
        let n = v.len().max(1) as f64;
        let s: f64 = v
            .iter()
            .zip(y.iter().zip(y2))
            .map(|(e, (a, b))| {
                let sc = self.atol + self.rtol * a.abs().max(b.abs());
                (e / sc).powi(2)
            })
            .sum();
        (s / n).sqrt()
    }

    /// Starting step from the magnitudes of `y0`, `f(y0)` and a trial Euler step.
    fn initial_step(&mut self, sys: &mut dyn OdeSystem, t: f64, y: &[f64], stats: &mut IntegratorStats) -> Result<f64> {
        let d0 = self.scaled_norm(y, y, y);
        let d1 = self.scaled_norm(&self.k[0], y, y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.span);
        axpy(&mut self.tmp, y, h0, &[(1.0, &self.k[0])]);
        let mut f1 = vec![0.0; y.len()];
        call(sys, t + h0, &self.tmp, &mut f1, stats)?;
        let diff: Vec<f64> = f1.iter().zip(&self.k[0]).map(|(a, b)| a - b).collect();
        let d2 = self.scaled_norm(&diff, y, y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        Ok((100.0 * h0).min(h1).min(self.span))
    }

    /// One trial step of size `h`; leaves the proposal in `y_new`, its
    /// derivative in `k[6]`, and returns the scaled error.
    fn attempt(&mut self, sys: &mut dyn OdeSystem, t: f64, y: &[f64], h: f64, stats: &mut IntegratorStats) -> Result<f64> {
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        axpy(&mut self.tmp, y, h, &[(A21, k1)]);
        call(sys, t + C2 * h, &self.tmp, k2, stats)?;
        axpy(&mut self.tmp, y, h, &[(A31, k1), (A32, k2)]);
        call(sys, t + C3 * h, &self.tmp, k3, stats)?;
        axpy(&mut self.tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
        call(sys, t + C4 * h, &self.tmp, k4, stats)?;
        axpy(&mut self.tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
        call(sys, t + C5 * h, &self.tmp, k5, stats)?;
        axpy(&mut self.tmp, y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
        call(sys, t + h, &self.tmp, k6, stats)?;
        axpy(&mut self.y_new, y, h, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
        call(sys, t + h, &self.y_new, k7, stats)?;
        let err: Vec<f64> = (0..y.len())
            .map(|i| h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]))
            .collect();
        Ok(self.scaled_norm(&err, y, &self.y_new))
    }

    fn run(
        mut self,
        sys: &mut dyn OdeSystem,
        y0: &[f64],
        times: &[f64],
        observe: &mut dyn FnMut(f64, &[f64]) -> Result<()>,
    ) -> Result<IntegratorStats> {
        let mut stats = IntegratorStats { max_error_norm: Some(0.0), ..Default::default() };
        let mut t = times[0];
        let mut y = y0.to_vec();
        call(sys, t, &y, &mut self.k[0], &mut stats)?;
        let mut h = self.initial_step(sys, t, &y, &mut stats)?;
        let mut err_prev: f64 = 1e-4;
        let mut just_rejected = false;
        observe(t, &y)?;
        for &target in &times[1..] {
            while t < target {
                if stats.accepted + stats.rejected >= self.max_steps {
                    return Err(Error::MaxStepsExceeded { t, steps: stats.accepted + stats.rejected });
                }
                if h < 1e-14 * self.span {
                    return Err(Error::StepSizeUnderflow { t, h });
                }
                let last = t + 1.01 * h >= target;
                let step = if last { target - t } else { h };
                let err = self.attempt(sys, t, &y, step, &mut stats)?;
                if err <= 1.0 {
                    stats.accepted += 1;
                    let m = stats.max_error_norm.get_or_insert(0.0);
                    *m = m.max(err);
                    t = if last { target } else { t + step };
                    std::mem::swap(&mut y, &mut self.y_new);
                    self.k.swap(0, 6);
                    let e = err.max(1e-10);
                    let mut fac = SAFETY * e.powf(-ALPHA) * err_prev.powf(BETA);
                    fac = fac.clamp(FAC_MIN, FAC_MAX);
                    if just_rejected {
                        fac = fac.min(1.0);
                    }
                    // A step clipped to an output time says little about the natural step.
                    if !last || step >= h {
                        h = step * fac;
                    }
                    err_prev = e;
                    just_rejected = false;
                } else {
                    stats.rejected += 1;
                    h = step * (SAFETY * err.powf(-0.2)).max(FAC_MIN);
                    just_rejected = true;
                }
            }
            observe(target, &y)?;
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy[0] = y[1];
        dy[1] = -y[0];
        Ok(())
    }

    fn run(cfg: &IntegratorConfig) -> (Vec<(f64, Vec<f64>)>, IntegratorStats) {
        let mut out = Vec::new();
        let mut sys = oscillator;
        let stats = integrate_ode(&mut sys, &[1.0, 0.0], cfg, &mut |t, y| {
            out.push((t, y.to_vec()));
            Ok(())
        })
        .unwrap();
        (out, stats)
    }

    #[test]
    fn output_grid() {
        let cfg = IntegratorConfig::dopri5(1.0, 1e-8).with_output_interval(0.25);
        assert_eq!(cfg.output_times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let cfg = IntegratorConfig::dopri5(1.0, 1e-8).with_output_interval(0.3);
        assert_eq!(cfg.output_times().len(), 5);
        assert_eq!(IntegratorConfig::dopri5(2.0, 1e-8).output_times(), vec![0.0, 2.0]);
    }

    #[test]
    fn dopri5_accuracy() {
        let cfg = IntegratorConfig::dopri5(10.0, 1e-10).with_output_interval(1.0);
        let (out, stats) = run(&cfg);
        assert_eq!(out.len(), 11);
        for (t, y) in &out {
            assert!((y[0] - t.cos()).abs() < 1e-8, "t={t}");
        }
        assert!(stats.max_error_norm.unwrap() <= 1.0);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn rk4_accuracy() {
        let (out, stats) = run(&IntegratorConfig::rk4(1.0, 0.01));
        assert_eq!(stats.accepted, 100);
        assert!((out.last().unwrap().1[0] - 1f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = IntegratorConfig::dopri5(1.0, 1e-8);
        cfg.t_end = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = IntegratorConfig::rk4(1.0, 0.1);
        cfg.dt = None;
        assert!(cfg.validate().is_err());
        let mut cfg = IntegratorConfig::dopri5(1.0, 1e-8);
        cfg.rtol = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn max_steps() {
        let mut cfg = IntegratorConfig::rk4(1.0, 0.01);
        cfg.max_steps = 10;
        let mut sys = oscillator;
        let err = integrate_ode(&mut sys, &[1.0, 0.0], &cfg, &mut |_, _| Ok(())).unwrap_err();
        assert!(matches!(err, Error::MaxStepsExceeded { .. }));
    }

    #[test]
    fn blow_up_underflows() {
        // ẏ = y², y(0) = 1 blows up at t = 1
        let mut sys = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            dy[0] = y[0] * y[0];
            Ok(())
        };
        let cfg = IntegratorConfig::dopri5(2.0, 1e-8);
        let err = integrate_ode(&mut sys, &[1.0], &cfg, &mut |_, _| Ok(())).unwrap_err();
        assert!(matches!(err, Error::StepSizeUnderflow { .. } | Error::InvalidConfig(_)), "{err}");
    }
}
