//! Conformally flat metrics g = U^{4/(n−2)} δ on an exterior chart.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::{norm, ScalarField};
use crate::harmonic::ExteriorHarmonic;

/// Ricci tensor (covariant components) of U^{4/(n−2)} δ from the jet of U.
///
/// With g = e^{2f} δ and f = (2/(n−2)) ln U,
/// Ric = −(n−2)(∇²f − df⊗df) − (Δf + (n−2)|df|²) δ.
pub fn conformal_ricci(n: usize, u: f64, grad: &DVector<f64>, hess: &DMatrix<f64>) -> DMatrix<f64> {
    let nf = n as f64;
    let c = 2.0 / (nf - 2.0);
    let df = grad * (c / u);
    let hf = hess * (c / u) - grad * grad.transpose() * (c / (u * u));
    let lap_f = hf.trace();
    let df2 = df.norm_squared();
    let outer = &df * df.transpose();
    let mut ric = (hf - outer) * (-(nf - 2.0));
    let iso = lap_f + (nf - 2.0) * df2;
    for i in 0..n {
        ric[(i, i)] -= iso;
    }
    // symmetrise away roundoff
    (&ric + ric.transpose()) * 0.5
}

/// Coefficient (n−2)/(4(n−1)) of the scalar curvature in the conformal
/// Laplacian.
pub fn conformal_coupling(n: usize) -> f64 {
    let nf = n as f64;
    (nf - 2.0) / (4.0 * (nf - 1.0))
}

/// g = U^{4/(n−2)} δ on |x| ≥ R.
#[derive(Clone)]
pub struct ConformallyFlatMetric {
    n: usize,
    inner_radius: f64,
    factor: Arc<dyn ScalarField>,
    harmonic: Option<ExteriorHarmonic>,
}

impl std::fmt::Debug for ConformallyFlatMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConformallyFlatMetric")
            .field("n", &self.n)
            .field("inner_radius", &self.inner_radius)
            .field("harmonic", &self.harmonic)
            .finish()
    }
}

impl ConformallyFlatMetric {
    pub fn from_harmonic(u: ExteriorHarmonic) -> Self {
        Self {
            n: u.n(),
            inner_radius: u.inner_radius(),
            factor: Arc::new(u.clone()),
            harmonic: Some(u),
        }
    }

    /// A general positive smooth conformal factor (not necessarily harmonic).
    pub fn from_field(factor: Arc<dyn ScalarField>, inner_radius: f64) -> Result<Self> {
        let n = factor.dim();
        if n < 3 {
            return Err(Error::InvalidParameter("dimension must be at least 3".into()));
        }
        Ok(Self {
            n,
            inner_radius,
            factor,
            harmonic: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn factor(&self) -> &dyn ScalarField {
        self.factor.as_ref()
    }

    pub fn harmonic(&self) -> Option<&ExteriorHarmonic> {
        self.harmonic.as_ref()
    }

    fn exponent(&self) -> f64 {
        4.0 / (self.n as f64 - 2.0)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        let r = norm(x);
        if x.len() != self.n {
            return Err(Error::InvalidParameter("point has wrong dimension".into()));
        }
        if r < self.inner_radius {
            return Err(Error::Domain {
                radius: r,
                inner: self.inner_radius,
            });
        }
        Ok(())
    }

    /// g_ij(x).
    pub fn components(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let u = self.factor.value(x);
        Ok(DMatrix::identity(self.n, self.n) * u.powf(self.exponent()))
    }

    /// R = −(4(n−1)/(n−2)) U^{−(n+2)/(n−2)} ΔU.
    pub fn scalar_curvature(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let nf = self.n as f64;
        let u = self.factor.value(x);
        let lap = self.factor.laplacian(x);
        Ok(-(4.0 * (nf - 1.0) / (nf - 2.0)) * u.powf(-(nf + 2.0) / (nf - 2.0)) * lap)
    }

    /// Covariant Ricci components Ric_ij(x).
    pub fn ricci(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let u = self.factor.value(x);
        let g = DVector::from_vec(self.factor.gradient(x));
        let h = self.factor.hessian(x);
        Ok(conformal_ricci(self.n, u, &g, &h))
    }

    /// Metric trace g^{ij} Ric_ij.
    pub fn ricci_trace(&self, x: &[f64]) -> Result<f64> {
        let ric = self.ricci(x)?;
        let u = self.factor.value(x);
        Ok(ric.trace() * u.powf(-self.exponent()))
    }

    /// |Ric|²_g = g^{ik} g^{jl} Ric_ij Ric_kl.
    pub fn ricci_norm_sq(&self, x: &[f64]) -> Result<f64> {
        let ric = self.ricci(x)?;
        let u = self.factor.value(x);
        Ok(ric.norm_squared() * u.powf(-2.0 * self.exponent()))
    }

    /// Volume density √det g relative to Lebesgue measure.
    pub fn volume_density(&self, x: &[f64]) -> f64 {
        let nf = self.n as f64;
        self.factor.value(x).powf(2.0 * nf / (nf - 2.0))
    }

    /// Δ_g w = U^{−4/(n−2)} (Δw + 2 ∇ln U · ∇w).
    pub fn laplacian(&self, w: &dyn ScalarField, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let u = self.factor.value(x);
        let gu = self.factor.gradient(x);
        let gw = w.gradient(x);
        let dot: f64 = gu.iter().zip(&gw).map(|(a, b)| a * b).sum();
        Ok(u.powf(-self.exponent()) * (w.laplacian(x) + 2.0 * dot / u))
    }

    /// L_g w = Δ_g w − ((n−2)/(4(n−1))) R_g w.
    pub fn conformal_laplacian_apply(&self, w: &dyn ScalarField, x: &[f64]) -> Result<f64> {
        let lap = self.laplacian(w, x)?;
        let r = self.scalar_curvature(x)?;
        Ok(lap - conformal_coupling(self.n) * r * w.value(x))
    }
}
