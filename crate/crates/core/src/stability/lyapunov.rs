use log::warn;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::{integrate_ode, IntegratorConfig};
use crate::error::{Error, Result};
use crate::prolong::tangent_jacobian;
use crate::state::PhaseState;
use crate::systems::LagrangianModel;

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovConfig {
    pub total_time: f64,
    pub renorm_interval: f64,
    pub tol: f64,
}

impl LyapunovConfig {
    pub fn new(total_time: f64) -> Self {
        LyapunovConfig { total_time, renorm_interval: 1.0, tol: 1e-10 }
    }

    pub fn with_interval(mut self, dt: f64) -> Self {
        self.renorm_interval = dt;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovResult {
    /// Sorted descending, `2N` values.
    pub exponents: Vec<f64>,
    /// Running estimates after each renormalisation, unsorted (column order).
    pub history: Vec<Vec<f64>>,
    pub renorm_interval: f64,
    pub total_time: f64,
    /// False when the last quarter of the history still varies by more than 10%.
    pub plateaued: bool,
}

/// Modified Gram–Schmidt with a second orthogonalisation pass. Columns of `v`
/// are replaced by an orthonormal basis; returns the diagonal of `R`.
pub fn reorthonormalize(v: &mut DMatrix<f64>) -> Vec<f64> {
    let k = v.ncols();
    let mut r = vec![0.0; k];
    for (j, rj) in r.iter_mut().enumerate() {
        for _pass in 0..2 {
            for i in 0..j {
                let proj = v.column(i).dot(&v.column(j));
                let qi = v.column(i).clone_owned();
                v.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = v.column(j).norm();
        *rj = norm;
        if norm > 0.0 {
            v.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    r
}

/// Benettin's method: evolve `2N` tangent vectors with `Df`, re-orthonormalise
/// every `renorm_interval`, and average the logarithmic stretch factors.
pub fn lyapunov_spectrum(model: &LagrangianModel, x0: &PhaseState, cfg: &LyapunovConfig) -> Result<LyapunovResult> {
    let n = model.dim();
    x0.check(n)?;
    if !(cfg.renorm_interval > 0.0 && cfg.total_time >= cfg.renorm_interval) {
        return Err(Error::InvalidConfig("need total_time >= renorm_interval > 0".into()));
    }
    let d = 2 * n;
    let intervals = (cfg.total_time / cfg.renorm_interval).round().max(1.0) as usize;
    let mut x = x0.first_order();
    let mut basis = DMatrix::<f64>::identity(d, d);
    let mut sums = vec![0.0; d];
    let mut history = Vec::with_capacity(intervals);
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (f, jac) = tangent_jacobian(model, &y[..d], t)?;
        dy[..d].copy_from_slice(&f);
        let xi = DMatrix::from_column_slice(d, d, &y[d..]);
        dy[d..].copy_from_slice((jac * xi).as_slice());
        Ok(())
    };
    let mut t = x0.t;
    for k in 0..intervals {
        let mut y = x.clone();
        y.extend_from_slice(basis.as_slice());
        let seg = IntegratorConfig::dopri5(t + cfg.renorm_interval, cfg.tol).with_start(t);
        let mut end = Vec::new();
        integrate_ode(&mut rhs, &y, &seg, &mut |_, y| {
            end = y.to_vec();
            Ok(())
        })?;
        t += cfg.renorm_interval;
        x = end[..d].to_vec();
        basis = DMatrix::from_column_slice(d, d, &end[d..]);
        let r = reorthonormalize(&mut basis);
        for (s, rj) in sums.iter_mut().zip(&r) {
            if *rj <= 0.0 || !rj.is_finite() {
                return Err(Error::InvalidConfig(format!("tangent basis collapsed at t = {t}")));
            }
            *s += rj.ln();
        }
        let elapsed = (k + 1) as f64 * cfg.renorm_interval;
        history.push(sums.iter().map(|s| s / elapsed).collect::<Vec<f64>>());
    }
    let mut exponents = history.last().cloned().unwrap_or_default();
    exponents.sort_by(|a, b| b.total_cmp(a));
    let plateaued = plateau(&history);
    if !plateaued {
        warn!("Lyapunov estimates have not plateaued over the last quarter of the run");
    }
    Ok(LyapunovResult { exponents, history, renorm_interval: cfg.renorm_interval, total_time: intervals as f64 * cfg.renorm_interval, plateaued })
}

fn plateau(history: &[Vec<f64>]) -> bool {
    let Some(last) = history.last() else { return true };
    let tail = &history[history.len() - history.len().div_ceil(4)..];
    (0..last.len()).all(|j| {
        let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), h| (lo.min(h[j]), hi.max(h[j])));
        hi - lo <= 0.1 * last[j].abs().max(1e-2)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_schmidt() {
        let mut v = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 4.0, 1.0]);
        let r = reorthonormalize(&mut v);
        assert!((r[0] - 5.0).abs() < 1e-15);
        assert!((v.transpose() * &v - DMatrix::identity(2, 2)).amax() < 1e-15);
        // |det| preserved: r0 r1 = |3 - 4|
        assert!((r[0] * r[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn plateau_detection() {
        let flat: Vec<Vec<f64>> = (0..40).map(|_| vec![1.0, -1.0]).collect();
        assert!(plateau(&flat));
        let drifting: Vec<Vec<f64>> = (0..40).map(|k| vec![1.0 + k as f64 * 0.1, -1.0]).collect();
        assert!(!plateau(&drifting));
    }
}
