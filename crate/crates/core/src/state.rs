use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point `(q, q̇, t)` of the velocity phase space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub t: f64,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, qd: Vec<f64>, t: f64) -> Self {
        PhaseState { q, qd, t }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn check(&self, n: usize) -> Result<()> {
        check_vec("q", &self.q, n)?;
        check_vec("qd", &self.qd, n)?;
        check_finite("t", self.t)
    }

    /// `x = (q, q̇)`.
    pub fn first_order(&self) -> Vec<f64> {
        self.q.iter().chain(&self.qd).copied().collect()
    }

    pub fn from_first_order(x: &[f64], t: f64) -> Self {
        let n = x.len() / 2;
        PhaseState { q: x[..n].to_vec(), qd: x[n..].to_vec(), t }
    }
}

/// A point `(q, ε, q̇, ε̇, t)` of the tangent bundle of the displaced
/// configuration space: configuration, virtual displacement and their rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DAlembertState {
    pub q: Vec<f64>,
    pub eps: Vec<f64>,
    pub qd: Vec<f64>,
    pub epsd: Vec<f64>,
    pub t: f64,
}

impl DAlembertState {
    pub fn new(q: Vec<f64>, eps: Vec<f64>, qd: Vec<f64>, epsd: Vec<f64>, t: f64) -> Self {
        DAlembertState { q, eps, qd, epsd, t }
    }

    /// Base state with zero displacement.
    pub fn undisplaced(s: &PhaseState) -> Self {
        let n = s.dim();
        DAlembertState { q: s.q.clone(), eps: vec![0.0; n], qd: s.qd.clone(), epsd: vec![0.0; n], t: s.t }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn phase(&self) -> PhaseState {
        PhaseState { q: self.q.clone(), qd: self.qd.clone(), t: self.t }
    }

    /// `ξ = (ε, ε̇)`, the tangent vector over `x = (q, q̇)`.
    pub fn xi(&self) -> Vec<f64> {
        self.eps.iter().chain(&self.epsd).copied().collect()
    }

    pub fn check(&self, n: usize) -> Result<()> {
        check_vec("q", &self.q, n)?;
        check_vec("eps", &self.eps, n)?;
        check_vec("qd", &self.qd, n)?;
        check_vec("epsd", &self.epsd, n)?;
        check_finite("t", self.t)
    }

    /// Flat layout `[q, ε, q̇, ε̇]` used by the integrators.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(4 * self.dim());
        y.extend(&self.q);
        y.extend(&self.eps);
        y.extend(&self.qd);
        y.extend(&self.epsd);
        y
    }

    pub fn from_flat(y: &[f64], n: usize, t: f64) -> Self {
        DAlembertState {
            q: y[..n].to_vec(),
            eps: y[n..2 * n].to_vec(),
            qd: y[2 * n..3 * n].to_vec(),
            epsd: y[3 * n..4 * n].to_vec(),
            t,
        }
    }
}

/// `(x, p)`: first-order state and its adjoint covector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjointState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

fn check_vec(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::dims(name, n, v.len()));
    }
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(format!("{name} contains non-finite value {bad}")));
    }
    Ok(())
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} is not finite")))
    }
}
