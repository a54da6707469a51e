//! Unit-range isotropic covariance models in two dimensions and their radial
//! spectral densities.
//!
//! Densities follow the Fourier convention
//! `C₀(r) = ∫_{ℝ²} f₀(‖ξ‖) e^{iξ·h} dξ = 2π ∫₀^∞ f₀(s) J₀(rs) s ds`,
//! so `C₀(0) = sill` fixes the Matérn constant to `ν/π`.
//! [`SpectralModel::hankel_roundtrip`] checks this numerically.
//!
//! Ranges are always 1 here; all scale information lives in the anisotropy
//! field of a component.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::{integrate, matern_correlation, oscillatory_j0_integral};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Matern,
    Exponential,
    Nugget,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Matern => "matern",
            Family::Exponential => "exponential",
            Family::Nugget => "nugget",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralModel {
    family: Family,
    sill: f64,
    nu: f64,
}

impl SpectralModel {
    pub fn new(family: Family, sill: f64, nu: Option<f64>) -> Result<Self> {
        if !(sill > 0.0) || !sill.is_finite() {
            return Err(invalid(format!("sill must be positive and finite, got {sill}")));
        }
        let nu = match family {
            Family::Matern => {
                let nu = nu.ok_or_else(|| invalid("matern model needs a smoothness nu"))?;
                if !(nu > 0.0) || !nu.is_finite() {
                    return Err(invalid(format!("smoothness must be positive and finite, got {nu}")));
                }
                nu
            }
            Family::Exponential => 0.5,
            Family::Nugget => f64::NAN,
        };
        Ok(Self { family, sill, nu })
    }

    pub fn matern(sill: f64, nu: f64) -> Result<Self> {
        Self::new(Family::Matern, sill, Some(nu))
    }

    pub fn exponential(sill: f64) -> Result<Self> {
        Self::new(Family::Exponential, sill, None)
    }

    pub fn nugget(sill: f64) -> Result<Self> {
        Self::new(Family::Nugget, sill, None)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn sill(&self) -> f64 {
        self.sill
    }

    /// Smoothness; 1/2 for the exponential model, `None` for the nugget.
    pub fn smoothness(&self) -> Option<f64> {
        match self.family {
            Family::Nugget => None,
            _ => Some(self.nu),
        }
    }

    pub fn is_nugget(&self) -> bool {
        self.family == Family::Nugget
    }

    /// `C₀(r)`.
    pub fn covariance(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(invalid(format!("distance must be non-negative, got {r}")));
        }
        Ok(match self.family {
            Family::Matern => self.sill * matern_correlation(self.nu, r),
            Family::Exponential => self.sill * (-r).exp(),
            Family::Nugget => {
                if r == 0.0 {
                    self.sill
                } else {
                    0.0
                }
            }
        })
    }

    /// `f₀(ξ) = sill · (ν/π) · (1 + ξ²)^{−(ν+1)}`.
    pub fn spectral_density(&self, xi: f64) -> Result<f64> {
        if self.is_nugget() {
            return Err(Error::UnsupportedFamily("nugget"));
        }
        if !(xi >= 0.0) {
            return Err(invalid(format!("frequency must be non-negative, got {xi}")));
        }
        Ok(self.density_unchecked(xi * xi))
    }

    #[inline]
    fn density_unchecked(&self, xi2: f64) -> f64 {
        self.sill * self.nu / PI * (1.0 + xi2).powf(-(self.nu + 1.0))
    }

    /// Weight of a Laplacian eigenvalue `λ = ‖ξ‖²`: `(2π)² f₀(√λ)`.
    ///
    /// The `(2π)²` turns the eigen-expansion on the mesh into a field whose
    /// covariance is `C₀` itself under the convention above.
    pub fn g_of_lambda(&self, lambda: f64) -> Result<f64> {
        if self.is_nugget() {
            return Err(Error::UnsupportedFamily("nugget"));
        }
        if !(lambda >= 0.0) {
            return Err(invalid(format!("eigenvalue must be non-negative, got {lambda}")));
        }
        Ok(self.g(lambda))
    }

    /// Unchecked `g`, for use inside fits and oracles once the family is known
    /// to be spectral. Negative arguments are clamped to 0.
    pub(crate) fn g(&self, lambda: f64) -> f64 {
        4.0 * PI * PI * self.density_unchecked(lambda.max(0.0))
    }

    /// `g(0)`, the maximum of `g` on `[0, ∞)`.
    pub fn g_max(&self) -> f64 {
        self.g(0.0)
    }

    /// For Matérn models with integer `ν + 1`, the monomial coefficients of
    /// the polynomial `P₀` with `g = 1/P₀`.
    pub fn markov_polynomial(&self) -> Option<Vec<f64>> {
        if self.family != Family::Matern {
            return None;
        }
        let m = self.nu + 1.0;
        if (m - m.round()).abs() > 1e-12 || m > 64.0 {
            return None;
        }
        let m = m.round() as usize;
        let scale = 1.0 / self.g_max();
        // (1 + x)^m by binomial coefficients.
        let mut coeffs = vec![0.0; m + 1];
        coeffs[0] = 1.0;
        for _ in 0..m {
            for k in (1..coeffs.len()).rev() {
                coeffs[k] += coeffs[k - 1];
            }
        }
        Some(coeffs.into_iter().map(|c| c * scale).collect())
    }

    /// `γ(r) = C₀(0) − C₀(r)`.
    pub fn semivariogram(&self, r: f64) -> Result<f64> {
        Ok(self.sill - self.covariance(r)?)
    }

    /// Recovers `C₀(r)` by numerical Hankel inversion of the density.
    pub fn hankel_roundtrip(&self, radii: &[f64]) -> Result<Vec<f64>> {
        if self.is_nugget() {
            return Err(Error::UnsupportedFamily("nugget"));
        }
        radii
            .iter()
            .map(|&r| {
                if !(r >= 0.0) {
                    return Err(invalid(format!("distance must be non-negative, got {r}")));
                }
                let tol = 1e-10 * self.sill;
                let v = if r == 0.0 {
                    // s = t / (1 − t) maps [0, 1) onto [0, ∞).
                    integrate(
                        |t: f64| {
                            let u = 1.0 - t;
                            let s = t / u;
                            self.density_unchecked(s * s) * s / (u * u)
                        },
                        0.0,
                        1.0,
                        tol,
                        1e-12,
                    )?
                } else {
                    oscillatory_j0_integral(|s: f64| self.density_unchecked(s * s) * s, r, tol)?
                };
                Ok(2.0 * PI * v)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sills_at_origin() {
        assert_eq!(SpectralModel::matern(1.0, 3.0).unwrap().covariance(0.0).unwrap(), 1.0);
        assert_eq!(SpectralModel::exponential(0.4).unwrap().covariance(0.0).unwrap(), 0.4);
        let nug = SpectralModel::nugget(0.4).unwrap();
        assert_eq!(nug.covariance(0.0).unwrap(), 0.4);
        assert_eq!(nug.covariance(0.1).unwrap(), 0.0);
    }

    #[test]
    fn half_smoothness_is_exponential() {
        let m = SpectralModel::matern(1.0, 0.5).unwrap();
        let e = SpectralModel::exponential(1.0).unwrap();
        assert!((m.covariance(1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
        for k in 0..50 {
            let r = 0.13 * k as f64;
            assert!((m.covariance(r).unwrap() - e.covariance(r).unwrap()).abs() < 1e-10);
            let xi = 0.4 * k as f64;
            assert!((m.spectral_density(xi).unwrap() - e.spectral_density(xi).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SpectralModel::matern(0.0, 1.0).is_err());
        assert!(SpectralModel::matern(1.0, -1.0).is_err());
        assert!(SpectralModel::new(Family::Matern, 1.0, None).is_err());
        let m = SpectralModel::matern(1.0, 1.0).unwrap();
        assert!(m.covariance(-1.0).is_err());
        assert!(m.g_of_lambda(-0.5).is_err());
        let nug = SpectralModel::nugget(1.0).unwrap();
        assert!(matches!(nug.spectral_density(1.0), Err(Error::UnsupportedFamily(_))));
        assert!(nug.hankel_roundtrip(&[0.0]).is_err());
    }

    #[test]
    fn g_is_scaled_density_of_root() {
        let m = SpectralModel::matern(1.3, 3.0).unwrap();
        let g4 = m.g_of_lambda(4.0).unwrap();
        assert_eq!(g4, 4.0 * PI * PI * m.spectral_density(2.0).unwrap());
        assert_eq!(m.g_of_lambda(0.0).unwrap(), m.g_max());
        // 4πνσ² for the Matérn family.
        assert!((m.g_max() - 4.0 * PI * 3.0 * 1.3).abs() < 1e-12);
    }

    #[test]
    fn hankel_recovers_sill_and_closed_forms() {
        let m = SpectralModel::matern(1.0, 3.0).unwrap();
        assert!((m.hankel_roundtrip(&[0.0]).unwrap()[0] - 1.0).abs() < 1e-3);
        let e = SpectralModel::exponential(1.0).unwrap();
        assert!((e.hankel_roundtrip(&[1.0]).unwrap()[0] - (-1.0f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn hankel_consistency_on_radius_grid() {
        let radii: Vec<f64> = (0..20).map(|k| 5.0 * k as f64 / 19.0).collect();
        for model in [
            SpectralModel::matern(1.0, 1.0).unwrap(),
            SpectralModel::matern(2.0, 3.0).unwrap(),
            SpectralModel::exponential(0.4).unwrap(),
        ] {
            let h = model.hankel_roundtrip(&radii).unwrap();
            for (r, v) in radii.iter().zip(h) {
                let c = model.covariance(*r).unwrap();
                assert!((v - c).abs() <= 1e-3 * c, "{model:?} r={r}: {v} vs {c}");
            }
        }
    }

    #[test]
    fn markov_polynomial_inverts_g() {
        let m = SpectralModel::matern(0.7, 1.0).unwrap();
        let p = m.markov_polynomial().unwrap();
        assert_eq!(p.len(), 3);
        for x in [0.0f64, 0.5, 3.0] {
            let p0: f64 = p.iter().enumerate().map(|(k, c)| c * x.powi(k as i32)).sum();
            assert!((p0 * m.g(x) - 1.0).abs() < 1e-13);
        }
        assert!(SpectralModel::matern(1.0, 1.5).unwrap().markov_polynomial().is_none());
        assert!(SpectralModel::exponential(1.0).unwrap().markov_polynomial().is_none());
    }

    #[test]
    fn model_semivariogram_examples() {
        let e = SpectralModel::exponential(0.4).unwrap();
        assert_eq!(e.semivariogram(0.0).unwrap(), 0.0);
        assert!((e.semivariogram(1e3).unwrap() - 0.4).abs() < 1e-15);
        let m = SpectralModel::matern(1.0, 0.5).unwrap();
        assert!((m.semivariogram(1.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn density_and_g_decrease(nu in 0.2f64..6.0, a in 0.0f64..50.0, b in 0.0f64..50.0) {
            let m = SpectralModel::matern(1.0, nu).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(m.g_of_lambda(hi).unwrap() < m.g_of_lambda(lo).unwrap());
            prop_assert!(m.spectral_density(hi).unwrap() < m.spectral_density(lo).unwrap());
            prop_assert!(m.spectral_density(hi).unwrap() > 0.0);
        }

        #[test]
        fn semivariogram_nondecreasing(nu in 0.2f64..6.0, a in 0.0f64..20.0, b in 0.0f64..20.0) {
            let m = SpectralModel::matern(1.0, nu).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(m.semivariogram(hi).unwrap() >= m.semivariogram(lo).unwrap() - 1e-14);
        }
    }
}
