//! Conformally flat radial metrics W^{4/(n−2)} δ whose factor solves
//! ΔW = −ρ for a compactly supported polynomial density ρ ≥ 0, so R ≥ 0.

use serde::{Deserialize, Serialize};

use super::radial::{Core, GridSpec, LogGrid, RadialMetric};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// ρ(r) = amplitude (1 − ((r − center)/width)²)⁸ on |r − center| < width,
/// plus an optional point mass at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalBump {
    pub n: usize,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    /// Mass of the Schwarzschild core (m_p/2) r^{2−n}; zero for a filled centre.
    #[serde(default)]
    pub point_mass: f64,
}

const R_FLAT: f64 = 1.0;

impl ConformalBump {
    pub fn new(n: usize, amplitude: f64, center: f64, width: f64, point_mass: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("dimension n = {n} must be at least 3")));
        }
        if !(amplitude >= 0.0 && width > 0.0 && center - width >= 0.0 && center + width <= R_FLAT) {
            return Err(Error::InvalidParameter(format!(
                "bump support [{}, {}] must lie in [0, 1] with amplitude ≥ 0",
                center - width,
                center + width
            )));
        }
        if !(point_mass >= 0.0) {
            return Err(Error::InvalidParameter("point mass must be nonnegative".into()));
        }
        Ok(Self {
            n,
            amplitude,
            center,
            width,
            point_mass,
        })
    }

    pub fn density(&self, r: f64) -> f64 {
        let z = (r - self.center) / self.width;
        if z.abs() >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - z * z).powi(8)
        }
    }

    /// ∫_lo^hi ρ(s) s^k ds, exact (polynomial integrand).
    fn moment(&self, lo: f64, hi: f64, k: i32) -> f64 {
        let lo = lo.max(self.center - self.width);
        let hi = hi.min(self.center + self.width);
        if hi <= lo {
            return 0.0;
        }
        let (x, w) = gauss_legendre(12);
        let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
        x.iter()
            .zip(&w)
            .map(|(xi, wi)| {
                let s = mid + half * xi;
                wi * self.density(s) * s.powi(k)
            })
            .sum::<f64>()
            * half
    }

    /// (W, W', W'') at radius r.
    pub fn factor(&self, r: f64) -> (f64, f64, f64) {
        let nf = self.n as f64;
        let k = self.n as i32;
        let m_in = self.moment(0.0, r, k - 1);
        let n_out = self.moment(r, f64::INFINITY, 1);
        let c = 0.5 * self.point_mass;
        let w = 1.0 + c * r.powi(2 - k) + (r.powi(2 - k) * m_in + n_out) / (nf - 2.0);
        let w1 = -(nf - 2.0) * c * r.powi(1 - k) - m_in * r.powi(1 - k);
        let w2 = (nf - 2.0) * (nf - 1.0) * c * r.powi(-k) - self.density(r) + (nf - 1.0) * m_in * r.powi(-k);
        (w, w1, w2)
    }

    /// ADM mass: m_p + 2 ∫ρ s^{n−1} ds / (n−2).
    pub fn mass(&self) -> f64 {
        self.point_mass + 2.0 * self.moment(0.0, f64::INFINITY, self.n as i32 - 1) / (self.n as f64 - 2.0)
    }

    /// Sampled metric: a filled centre from r = 10⁻³ without a point mass,
    /// otherwise a grid symmetric about the neck of the core.
    pub fn metric(&self, spec: GridSpec) -> Result<RadialMetric> {
        let nf = self.n as f64;
        let r_max = R_FLAT * 10f64.powf(spec.decades_beyond_flat);
        let (r_min, core) = if self.point_mass > 0.0 {
            let a0 = 1.0 + self.moment(0.0, f64::INFINITY, 1) / (nf - 2.0);
            let b0 = 0.5 * self.point_mass;
            let neck = (b0 / a0).powf(1.0 / (nf - 2.0));
            ((neck * neck / r_max).min(1e-3 * R_FLAT), Core::SecondEnd)
        } else {
            (1e-3 * R_FLAT, Core::FilledCenter)
        };
        let grid = LogGrid::new(r_min, r_max, spec.points_per_decade)?;
        RadialMetric::conformal(self.n, grid, |r| self.factor(r).0, R_FLAT, core)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::central_first;

    #[test]
    fn factor_solves_poisson_equation() {
        let b = ConformalBump::new(3, 2.0, 0.5, 0.3, 0.2).unwrap();
        for r in [0.25, 0.4, 0.55, 0.79, 1.5] {
            let (_, w1, w2) = b.factor(r);
            let d1 = central_first(|s| b.factor(s).0, r, 1e-3);
            let d2 = central_first(|s| b.factor(s).1, r, 1e-3);
            assert!((w1 - d1).abs() < 1e-8 * w1.abs().max(1.0), "{w1} {d1}");
            assert!((w2 - d2).abs() < 1e-8 * w2.abs().max(1.0), "{w2} {d2}");
            let lap = w2 + 2.0 / r * w1;
            assert!((lap + b.density(r)).abs() < 1e-10);
        }
    }

    #[test]
    fn exterior_is_a_monopole_with_the_stated_mass() {
        let b = ConformalBump::new(4, 1.0, 0.6, 0.3, 0.0).unwrap();
        let m = b.mass();
        for r in [1.0, 3.0, 10.0] {
            assert!((b.factor(r).0 - 1.0 - 0.5 * m / (r * r)).abs() < 1e-13);
        }
    }

    #[test]
    fn sampled_metric_has_nonnegative_curvature() {
        let b = ConformalBump::new(3, 5.0, 0.5, 0.4, 0.0).unwrap();
        let g = b.metric(GridSpec::default()).unwrap();
        g.validate().unwrap();
        let c = g.curvature();
        let peak = c.scalar.iter().fold(0.0f64, |m, v| m.max(*v));
        assert!(peak > 1.0);
        assert!(c.scalar[2..g.len() - 2].iter().all(|&r| r > -1e-4 * peak));
    }
}
