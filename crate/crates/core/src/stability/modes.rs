use log::warn;
use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::dynamics::eom_accel;
use crate::error::{Error, Result};
use crate::linalg::max_abs;
use crate::prolong::{assemble_mck, LinearizationMatrices};
use crate::state::PhaseState;
use crate::systems::LagrangianModel;

/// Largest `|q̈|` at rest that still counts as an equilibrium.
pub const EQUILIBRIUM_ATOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct NormalMode {
    pub omega_squared: f64,
    /// `√ω²`; absent for an unstable direction.
    pub frequency: Option<f64>,
    /// `√(−ω²)` for an unstable direction.
    pub growth_rate: Option<f64>,
    pub unstable: bool,
    /// `M`-orthonormal.
    pub shape: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalModes {
    /// Sorted by `ω²` ascending.
    pub modes: Vec<NormalMode>,
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
}

impl NormalModes {
    pub fn frequencies(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.frequency.unwrap_or(f64::NAN)).collect()
    }

    pub fn any_unstable(&self) -> bool {
        self.modes.iter().any(|m| m.unstable)
    }
}

/// Normal modes about a rest point: `K v = ω² M v` with `M, K` from the
/// linearisation at `(q_eq, q̇ = 0)`.
pub fn small_oscillations(model: &LagrangianModel, q_eq: &[f64]) -> Result<NormalModes> {
    let n = model.dim();
    let s = PhaseState::new(q_eq.to_vec(), vec![0.0; n], 0.0);
    s.check(n)?;
    let qdd = eom_accel(model, &s)?;
    let residual = max_abs(&qdd);
    if residual >= EQUILIBRIUM_ATOL {
        return Err(Error::NotAnEquilibrium { residual });
    }
    let mats = assemble_mck(model, &s, &qdd)?;
    if mats.c.amax() > 0.0 {
        warn!("velocity coupling C is ignored by the symmetric normal-mode problem");
    }
    let m = mats.m.clone();
    let k = (&mats.k + mats.k.transpose()) * 0.5;
    let chol = m.clone().cholesky().ok_or_else(|| Error::InvalidConfig("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l.clone().try_inverse().ok_or(Error::DegenerateLagrangian { det: 0.0, threshold: 0.0, t: None })?;
    let reduced = &l_inv * &k * l_inv.transpose();
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = reduced.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let modes = order
        .into_iter()
        .map(|i| {
            let w2 = eig.eigenvalues[i];
            let shape = l_inv.transpose() * eig.eigenvectors.column(i);
            let unstable = w2 < 0.0;
            NormalMode {
                omega_squared: w2,
                frequency: (!unstable).then(|| w2.sqrt()),
                growth_rate: unstable.then(|| (-w2).sqrt()),
                unstable,
                shape: shape.iter().copied().collect(),
            }
        })
        .collect();
    Ok(NormalModes { modes, mass: m, stiffness: k })
}

/// Roots `λ` of `det(λ² M + λ C + K) = 0` via the companion matrix.
pub fn mck_spectrum(mats: &LinearizationMatrices) -> Result<Vec<Complex<f64>>> {
    let n = mats.m.nrows();
    let m_inv = mats.m.clone().try_inverse().ok_or(Error::DegenerateLagrangian { det: 0.0, threshold: 0.0, t: None })?;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).copy_from(&DMatrix::identity(n, n));
    a.view_mut((n, 0), (n, n)).copy_from(&(-&m_inv * &mats.k));
    a.view_mut((n, n), (n, n)).copy_from(&(-&m_inv * &mats.c));
    Ok(a.complex_eigenvalues().iter().copied().collect())
}

/// Eigenvalues of a real matrix, sorted by real then imaginary part.
pub fn sorted_eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = a.complex_eigenvalues().iter().copied().collect();
    sort_complex(&mut ev);
    ev
}

pub fn sort_complex(v: &mut [Complex<f64>]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{make_builtin, Params};

    #[test]
    fn oscillator_frequency() {
        let m = make_builtin("harmonic_oscillator", &Params::from([("omega".into(), 2.0.into())])).unwrap();
        let modes = small_oscillations(&m, &[0.0]).unwrap();
        assert!((modes.modes[0].frequency.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coupled_pair() {
        let m = make_builtin("coupled_oscillators", &Params::new()).unwrap();
        let modes = small_oscillations(&m, &[0.0, 0.0]).unwrap();
        let f = modes.frequencies();
        assert!((f[0] - 1.0).abs() < 1e-12 && (f[1] - 3f64.sqrt()).abs() < 1e-12);
        for a in &modes.modes {
            for b in &modes.modes {
                let va = nalgebra::DVector::from_column_slice(&a.shape);
                let vb = nalgebra::DVector::from_column_slice(&b.shape);
                let g = (va.transpose() * &modes.mass * vb)[(0, 0)];
                let want = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10);
            }
            let v = nalgebra::DVector::from_column_slice(&a.shape);
            let res = &modes.stiffness * &v - &modes.mass * &v * a.omega_squared;
            assert!(res.amax() < 1e-9);
        }
    }

    #[test]
    fn hilltop_is_unstable() {
        let m = make_builtin("double_well", &Params::new()).unwrap();
        let modes = small_oscillations(&m, &[0.0]).unwrap();
        assert!(modes.any_unstable());
        assert!((modes.modes[0].omega_squared + 1.0).abs() < 1e-12);
        assert!(matches!(small_oscillations(&m, &[0.5]), Err(Error::NotAnEquilibrium { .. })));
    }
}
