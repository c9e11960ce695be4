//! Plane stress / plane strain constitutive law in Voigt form.
//!
//! Stresses are stored as `(σ11, σ22, σ12)` and strains as
//! `(ε11, ε22, 2ε12)` (engineering shear), so tensor contractions such as
//! `σ : ε` become plain dot products. The tensor `C` here is the unit-modulus
//! elasticity tensor: the physical law is `σ = Ẽ C ε` with the Young's
//! modulus `Ẽ` split off as a scalar factor.

use alloc::format;
use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Plane stress vs plane strain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElasticMode {
    PlaneStress,
    PlaneStrain,
}

/// Lamé parameters for Young's modulus `e` and Poisson ratio `nu`.
///
/// Plane strain: μ = E/(2(1+ν)), λ = Eν/((1+ν)(1-2ν)).
/// Plane stress uses the reduced λ* = Eν/((1+ν)(1-ν)) so that the 2D law
/// σ = 2με + λ* tr(ε) I reproduces the plane-stress relations.
pub fn lame(mode: ElasticMode, e: f64, nu: f64) -> Result<(f64, f64)> {
    if !(e > 0.0) {
        return Err(Error::invalid(format!("Young's modulus must be positive, got {e}")));
    }
    if !(nu > 0.0 && nu < 0.5) {
        return Err(Error::invalid(format!(
            "Poisson ratio must lie in (0, 0.5), got {nu}"
        )));
    }
    let mu = e / (2.0 * (1.0 + nu));
    let lambda = match mode {
        ElasticMode::PlaneStrain => e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
        ElasticMode::PlaneStress => e * nu / ((1.0 + nu) * (1.0 - nu)),
    };
    Ok((mu, lambda))
}

/// Unit-modulus constitutive tensor and its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialLaw {
    pub nu: f64,
    /// Lamé parameters at unit Young's modulus.
    pub mu_hat: f64,
    pub lambda_hat: f64,
    /// Voigt stiffness: stress = Ẽ · C · strain.
    pub c: Matrix3<f64>,
    /// Voigt compliance at unit modulus: strain = C⁻¹ · stress.
    pub c_inv: Matrix3<f64>,
}

impl MaterialLaw {
    pub fn new(mode: ElasticMode, nu: f64) -> Result<Self> {
        let (mu_hat, lambda_hat) = lame(mode, 1.0, nu)?;
        Ok(Self::from_lame_unchecked(nu, mu_hat, lambda_hat))
    }

    /// Builds the law directly from unit-modulus Lamé parameters (used by the
    /// λ-sweep stability diagnostics).
    pub fn from_lame(mu_hat: f64, lambda_hat: f64) -> Result<Self> {
        if !(mu_hat > 0.0) || !(lambda_hat > 0.0) {
            return Err(Error::invalid("Lamé parameters must be positive"));
        }
        let nu = lambda_hat / (2.0 * (lambda_hat + mu_hat));
        Ok(Self::from_lame_unchecked(nu, mu_hat, lambda_hat))
    }

    fn from_lame_unchecked(nu: f64, mu_hat: f64, lambda_hat: f64) -> Self {
        let d = 2.0 * mu_hat + lambda_hat;
        let c = Matrix3::new(
            d, lambda_hat, 0.0, //
            lambda_hat, d, 0.0, //
            0.0, 0.0, mu_hat,
        );
        let det2 = d * d - lambda_hat * lambda_hat;
        let c_inv = Matrix3::new(
            d / det2,
            -lambda_hat / det2,
            0.0,
            -lambda_hat / det2,
            d / det2,
            0.0,
            0.0,
            0.0,
            1.0 / mu_hat,
        );
        MaterialLaw {
            nu,
            mu_hat,
            lambda_hat,
            c,
            c_inv,
        }
    }

    /// σ = Ẽ · C · ε for strain in engineering Voigt form.
    pub fn stress_from_strain(&self, e_modulus: f64, strain: Vector3<f64>) -> Vector3<f64> {
        self.c * strain * e_modulus
    }

    /// ε = C⁻¹ · τ at unit modulus.
    pub fn compliance_apply(&self, tau: Vector3<f64>) -> Vector3<f64> {
        self.c_inv * tau
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lame_values() {
        let (mu, la) = lame(ElasticMode::PlaneStrain, 1.0, 0.25).unwrap();
        assert!((mu - 0.4).abs() < 1e-15);
        assert!((la - 0.4).abs() < 1e-15);

        let (mu, la) = lame(ElasticMode::PlaneStress, 1.0, 0.25).unwrap();
        assert!((mu - 0.4).abs() < 1e-15);
        assert!((la - 4.0 / 15.0).abs() < 1e-15);

        // near-incompressible plane strain: λ/μ ≈ 4999
        let (mu, la) = lame(ElasticMode::PlaneStrain, 3.0, 0.4999).unwrap();
        assert!((la / mu - 0.4999 * 2.0 / (1.0 - 2.0 * 0.4999)).abs() < 1e-6);
        assert!((la / mu - 4999.0).abs() < 0.5);
    }

    #[test]
    fn lame_rejects_bad_inputs() {
        assert!(lame(ElasticMode::PlaneStrain, 0.0, 0.3).is_err());
        assert!(lame(ElasticMode::PlaneStrain, 1.0, 0.5).is_err());
        assert!(lame(ElasticMode::PlaneStress, 1.0, 0.0).is_err());
    }

    #[test]
    fn stress_from_strain_plane_strain() {
        let law = MaterialLaw::new(ElasticMode::PlaneStrain, 0.25).unwrap();
        let s = law.stress_from_strain(1.0, Vector3::new(1.0, 0.0, 0.0));
        assert!((s[0] - 1.2).abs() < 1e-14);
        assert!((s[1] - 0.4).abs() < 1e-14);
        assert!(s[2].abs() < 1e-14);

        // linear in the modulus
        let s2 = law.stress_from_strain(2.0, Vector3::new(1.0, 0.0, 0.0));
        assert!((s2 - s * 2.0).norm() < 1e-14);

        assert!(law
            .stress_from_strain(1.0, Vector3::zeros())
            .norm()
            .abs()
            < 1e-15);
    }

    #[test]
    fn compliance_closed_forms() {
        let law = MaterialLaw::new(ElasticMode::PlaneStrain, 0.3).unwrap();
        // hydrostatic stress maps to hydrostatic strain with factor 1/(2(μ+λ))
        let eps = law.compliance_apply(Vector3::new(1.0, 1.0, 0.0));
        let f = 1.0 / (2.0 * (law.mu_hat + law.lambda_hat));
        assert!((eps[0] - f).abs() < 1e-14);
        assert!((eps[1] - f).abs() < 1e-14);
        assert!(eps[2].abs() < 1e-15);
        // pure shear: engineering shear strain 1/μ
        let eps = law.compliance_apply(Vector3::new(0.0, 0.0, 1.0));
        assert!((eps[2] - 1.0 / law.mu_hat).abs() < 1e-14);
        assert!(eps[0].abs() < 1e-15 && eps[1].abs() < 1e-15);
    }

    #[test]
    fn stiffness_compliance_round_trip_and_spd() {
        for &nu in &[0.05, 0.1, 0.2, 0.3, 0.4, 0.45, 0.49, 0.499, 0.4999] {
            for mode in [ElasticMode::PlaneStress, ElasticMode::PlaneStrain] {
                let law = MaterialLaw::new(mode, nu).unwrap();
                let id = law.c * law.c_inv;
                assert!((id - Matrix3::identity()).norm() < 1e-13, "nu={nu}");
                // symmetric positive definite
                assert!((law.c - law.c.transpose()).norm() == 0.0);
                let eig = law.c.symmetric_eigen();
                assert!(eig.eigenvalues.min() > 0.0, "nu={nu}");
            }
        }
    }

    #[test]
    fn plane_strain_lambda_diverges_plane_stress_bounded() {
        let mut prev = 0.0;
        for &nu in &[0.4, 0.45, 0.49, 0.499, 0.4999] {
            let (_, la) = lame(ElasticMode::PlaneStrain, 1.0, nu).unwrap();
            assert!(la > prev);
            prev = la;
            let (_, ls) = lame(ElasticMode::PlaneStress, 1.0, nu).unwrap();
            assert!(ls < 1.0);
        }
    }

    proptest! {
        #[test]
        fn energy_identity(nu in 0.01f64..0.49, e1 in -1.0f64..1.0, e2 in -1.0f64..1.0, e3 in -1.0f64..1.0) {
            // ε·(Cε) = (Cε)·(C⁻¹(Cε)) — consistency of the stiffness/compliance pair.
            let law = MaterialLaw::new(ElasticMode::PlaneStrain, nu).unwrap();
            let eps = Vector3::new(e1, e2, e3);
            let sig = law.c * eps;
            let lhs = eps.dot(&sig);
            let rhs = sig.dot(&law.compliance_apply(sig));
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn round_trip_strain(nu in 0.01f64..0.49, e1 in -1.0f64..1.0, e2 in -1.0f64..1.0, e3 in -1.0f64..1.0) {
            let law = MaterialLaw::new(ElasticMode::PlaneStress, nu).unwrap();
            let eps = Vector3::new(e1, e2, e3);
            let back = law.compliance_apply(law.stress_from_strain(1.0, eps));
            prop_assert!((back - eps).norm() <= 1e-13 * (1.0 + eps.norm()));
        }
    }
}
