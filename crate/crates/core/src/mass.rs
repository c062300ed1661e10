//! ADM mass from flux integrals over large coordinate spheres, extrapolated
//! to infinity.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;
use crate::harmonic::quadrature_resolution;
use crate::metric::{ConformallyFlatMetric, RadialMetric};
use crate::quadrature::golden_min;
use crate::sphere::{unit_sphere_area, SphereSample};

/// Either metric representation.
#[derive(Debug, Clone, Copy)]
pub enum MetricRef<'a> {
    Conformal(&'a ConformallyFlatMetric),
    Radial(&'a RadialMetric),
}

impl<'a> From<&'a ConformallyFlatMetric> for MetricRef<'a> {
    fn from(g: &'a ConformallyFlatMetric) -> Self {
        MetricRef::Conformal(g)
    }
}

impl<'a> From<&'a RadialMetric> for MetricRef<'a> {
    fn from(g: &'a RadialMetric) -> Self {
        MetricRef::Radial(g)
    }
}

/// Result of an ADM mass evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    pub radii: Vec<f64>,
    pub flux_values: Vec<f64>,
    pub extrapolated_mass: f64,
    /// 2 × monopole coefficient of the end's conformal factor, when known.
    pub expansion_mass: Option<f64>,
    pub discrepancy: Option<f64>,
    /// Fitted β in flux(ρ) ≈ m + c ρ^{−β}; `None` when the flux is constant.
    pub convergence_order: Option<f64>,
    /// RMS residual of the fit.
    pub fit_residual: f64,
}

/// Where the flux is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassOptions {
    pub radii_count: usize,
    pub decades: f64,
    /// Outer radius for analytic metrics (multiples of the chart's inner radius).
    pub analytic_outer_factor: f64,
    /// Radial-grid samples stop where |g − δ| falls below this level, since
    /// finite differences of profiles at roundoff carry no information.
    pub deviation_floor: f64,
    /// Radial-grid samples start no closer in than this.
    pub min_radius: f64,
}

impl Default for MassOptions {
    fn default() -> Self {
        Self {
            radii_count: 8,
            decades: 2.0,
            analytic_outer_factor: 1e4,
            deviation_floor: 1e-6,
            min_radius: 0.0,
        }
    }
}

/// Fit flux(ρ) = m + c ρ^{−β} + d ρ^{−2β}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    pub limit: f64,
    pub order: Option<f64>,
    pub residual: f64,
}

/// (1/(2(n−1)ω_{n−1})) ∫_{S_ρ} (g_ij,i − g_ii,j) ν_j dA.
pub fn adm_flux<'a>(g: impl Into<MetricRef<'a>>, rho: f64) -> Result<f64> {
    match g.into() {
        MetricRef::Conformal(g) => conformal_flux(g, rho),
        MetricRef::Radial(g) => {
            let i = g.grid().nearest(rho);
            if (g.radii()[i] / rho - 1.0).abs() > 1e-9 {
                let fluxes = radial_flux_profile(g);
                return g.interpolate(&fluxes, rho);
            }
            if !fd::has_centered_margin(i, g.len(), 1) {
                return Err(Error::Margin {
                    index: i,
                    needed: 2,
                    len: g.len(),
                });
            }
            Ok(radial_flux_profile(g)[i])
        }
    }
}

fn conformal_flux(g: &ConformallyFlatMetric, rho: f64) -> Result<f64> {
    if rho < g.inner_radius() {
        return Err(Error::Domain {
            radius: rho,
            inner: g.inner_radius(),
        });
    }
    let n = g.n();
    let nf = n as f64;
    let p = 4.0 / (nf - 2.0);
    let u = g.factor();
    // g_ij = U^p δ_ij, so (g_ij,i − g_ii,j) ν_j = (1 − n) p U^{p−1} ∂_ν U
    let density = |x: &[f64]| {
        let v = u.value(x);
        let grad = u.gradient(x);
        let dn: f64 = grad.iter().zip(x).map(|(g, xi)| g * xi).sum::<f64>() / rho;
        (1.0 - nf) * p * v.powf(p - 1.0) * dn
    };
    let total = if g.harmonic().map(|h| h.is_radial()).unwrap_or(false) {
        let mut x = vec![0.0; n];
        x[0] = rho;
        unit_sphere_area(n) * rho.powi(n as i32 - 1) * density(&x)
    } else {
        let deepest = g.harmonic().map(|h| h.deepest_singularity()).unwrap_or(0.0);
        let q = quadrature_resolution(n, rho, deepest);
        SphereSample::product(n, q)?.at_radius(rho).integrate(density)
    };
    Ok(total / (2.0 * (nf - 1.0) * unit_sphere_area(n)))
}

/// Flux at every node: (ρ^{n−2}/2)(A − B − B_t), with B_t = ρ dB/dρ taken
/// as B (ln B)_t so that a flat profile gives exactly zero.
fn radial_flux_profile(g: &RadialMetric) -> Vec<f64> {
    let n = g.n() as f64;
    let ln_b: Vec<f64> = g.b().iter().map(|b| b.ln()).collect();
    let lb_t = fd::first_derivative_sixth(&ln_b, g.grid().h);
    (0..g.len())
        .map(|i| {
            let b = g.b()[i];
            0.5 * g.radii()[i].powf(n - 2.0) * (g.a()[i] - b - b * lb_t[i])
        })
        .collect()
}

fn geometric_radii(outer: f64, decades: f64, count: usize) -> Vec<f64> {
    let inner = outer / 10f64.powf(decades);
    (0..count)
        .map(|k| inner * (outer / inner).powf(k as f64 / (count - 1) as f64))
        .collect()
}

/// Node indices for a radial flux window: the outer end sits two nodes in
/// from the grid edge, or earlier where |g − δ| has dropped to roundoff.
pub fn flux_window(g: &RadialMetric, opts: &MassOptions) -> Result<Vec<usize>> {
    let len = g.len();
    let last = len - 4;
    let dev = |i: usize| (g.a()[i] - 1.0).abs().max((g.b()[i] - 1.0).abs());
    let outer = if dev(last) >= opts.deviation_floor {
        last
    } else {
        (0..=last)
            .rev()
            .find(|&i| dev(i) >= opts.deviation_floor)
            .unwrap_or(last)
    };
    let outer_r = g.radii()[outer];
    let inner_r = (outer_r / 10f64.powf(opts.decades))
        .max(2.0 * g.r_flat())
        .max(opts.min_radius);
    let inner = g.grid().nearest(inner_r).max(3).min(outer);
    let span = outer - inner;
    if span + 1 < opts.radii_count.min(4) {
        return Err(Error::NonConvergentFit(format!(
            "only {} grid nodes between r = {inner_r:.3e} and r = {outer_r:.3e}",
            span + 1
        )));
    }
    let count = opts.radii_count.min(span + 1);
    let mut idx: Vec<usize> = (0..count)
        .map(|k| inner + ((span as f64) * k as f64 / (count - 1) as f64).round() as usize)
        .collect();
    idx.dedup();
    Ok(idx)
}

/// Fits m + c ρ^{−β} + d ρ^{−2β} by variable projection: linear least squares
/// in (m, c, d) for each β, golden-section search in β over [1/4, n + 2].
pub fn extrapolate(radii: &[f64], values: &[f64], n: usize) -> Result<Extrapolation> {
    if radii.len() != values.len() || radii.len() < 4 {
        return Err(Error::InvalidParameter("need at least four radius/value pairs".into()));
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let spread =
        values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if spread <= 1e-13 * scale.max(1e-300) || spread < 1e-15 {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        return Ok(Extrapolation {
            limit: mean,
            order: None,
            residual: spread,
        });
    }
    let r0 = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let x: Vec<f64> = radii.iter().map(|r| r / r0).collect();
    let y = DVector::from_column_slice(values);
    let solve = |beta: f64| -> (DVector<f64>, f64) {
        let cols = if x.len() >= 5 { 3 } else { 2 };
        let a = DMatrix::from_fn(x.len(), cols, |i, j| x[i].powf(-(j as f64) * beta));
        let svd = a.clone().svd(true, true);
        let c = svd.solve(&y, 1e-14).unwrap_or_else(|_| DVector::zeros(cols));
        let r = (&a * &c - &y).norm();
        (c, r)
    };
    let (lo, hi) = (0.25, n as f64 + 2.0);
    // coarse scan guards against a local minimum of the projected residual
    let scan = 64;
    let mut best = (lo, f64::INFINITY);
    for k in 0..=scan {
        let b = lo + (hi - lo) * k as f64 / scan as f64;
        let r = solve(b).1;
        if r < best.1 {
            best = (b, r);
        }
    }
    let step = (hi - lo) / scan as f64;
    let (beta, _) = golden_min(|b| solve(b).1, (best.0 - step).max(lo), (best.0 + step).min(hi), 1e-10);
    let (coef, resid) = solve(beta);
    let rms = resid / (x.len() as f64).sqrt();
    let tol = 1e-4 * spread + 1e-10 * scale.max(1.0);
    if !rms.is_finite() || rms > tol {
        return Err(Error::NonConvergentFit(format!(
            "flux fit residual {rms:e} exceeds {tol:e} (β = {beta:.4})"
        )));
    }
    Ok(Extrapolation {
        limit: coef[0],
        order: Some(beta),
        residual: rms,
    })
}

fn report(radii: Vec<f64>, flux_values: Vec<f64>, n: usize, expansion_mass: Option<f64>) -> Result<MassReport> {
    let fit = extrapolate(&radii, &flux_values, n)?;
    Ok(MassReport {
        discrepancy: expansion_mass.map(|e| (fit.limit - e).abs()),
        radii,
        flux_values,
        extrapolated_mass: fit.limit,
        expansion_mass,
        convergence_order: fit.order,
        fit_residual: fit.residual,
    })
}

/// ADM mass with [`MassOptions::default`].
pub fn adm_mass<'a>(g: impl Into<MetricRef<'a>>) -> Result<MassReport> {
    adm_mass_with(g, &MassOptions::default())
}

pub fn adm_mass_with<'a>(g: impl Into<MetricRef<'a>>, opts: &MassOptions) -> Result<MassReport> {
    match g.into() {
        MetricRef::Conformal(g) => {
            let outer = g.inner_radius().max(1e-3) * opts.analytic_outer_factor;
            let radii = geometric_radii(outer, opts.decades, opts.radii_count);
            let flux = radii
                .iter()
                .map(|&r| conformal_flux(g, r))
                .collect::<Result<Vec<_>>>()?;
            report(radii, flux, g.n(), g.harmonic().map(|h| h.mass_from_expansion()))
        }
        MetricRef::Radial(g) => adm_mass_on_window(g, &flux_window(g, opts)?),
    }
}

/// ADM mass of a radial metric from the flux at the given nodes. Reusing one
/// window across a family of metrics keeps their masses comparable.
pub fn adm_mass_on_window(g: &RadialMetric, window: &[usize]) -> Result<MassReport> {
    if window.iter().any(|&i| !(3..g.len().saturating_sub(3)).contains(&i)) {
        return Err(Error::Margin {
            index: *window.iter().max().unwrap_or(&0),
            needed: 3,
            len: g.len(),
        });
    }
    let profile = radial_flux_profile(g);
    let radii = window.iter().map(|&i| g.radii()[i]).collect();
    let flux = window.iter().map(|&i| profile[i]).collect();
    let expansion = match g.end_harmonic() {
        Ok((u, resid)) if resid < 1e-6 => Some(u.mass_from_expansion()),
        _ => None,
    };
    report(radii, flux, g.n(), expansion)
}

/// Mass change when a scalar-flat end is rescaled by u^{4/(n−2)}, computed
/// two ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassDifference {
    /// −(2/(ω_{n−1}(n−2))) lim ∫_{S_ρ} u ∂_r u dA.
    pub flux_route: f64,
    /// adm_mass(u^{4/(n−2)} g) − adm_mass(g).
    pub composed_route: f64,
    pub convergence_order: Option<f64>,
}

pub fn mass_difference_flux(g: &RadialMetric, u: &[f64]) -> Result<MassDifference> {
    mass_difference_flux_with(g, u, &MassOptions::default())
}

pub fn mass_difference_flux_with(g: &RadialMetric, u: &[f64], opts: &MassOptions) -> Result<MassDifference> {
    if u.len() != g.len() {
        return Err(Error::InvalidParameter("conformal factor length mismatch".into()));
    }
    let nf = g.n() as f64;
    let u_t = fd::first_derivative_sixth(u, g.grid().h);
    let dev = |i: usize| (u[i] - 1.0).abs();
    let last = g.len() - 4;
    let outer = (0..=last)
        .rev()
        .find(|&i| dev(i) >= opts.deviation_floor)
        .unwrap_or(last);
    let outer_r = g.radii()[outer];
    let inner = g
        .grid()
        .nearest((outer_r / 10f64.powf(opts.decades)).max(2.0 * g.r_flat()))
        .max(2)
        .min(outer);
    let span = outer - inner;
    let count = opts.radii_count.min(span + 1).max(1);
    let idx: Vec<usize> = if count < 4 {
        vec![last; 4]
    } else {
        (0..count)
            .map(|k| inner + ((span as f64) * k as f64 / (count - 1) as f64).round() as usize)
            .collect()
    };
    // in t = ln r: ρ^{n−1} u u_r = ρ^{n−2} u u_t
    let radii: Vec<f64> = idx.iter().map(|&i| g.radii()[i]).collect();
    let values: Vec<f64> = idx
        .iter()
        .map(|&i| -2.0 / (nf - 2.0) * g.radii()[i].powf(nf - 2.0) * u[i] * u_t[i])
        .collect();
    let fit = extrapolate(&radii, &values, g.n())?;
    let before = adm_mass_with(g, opts)?.extrapolated_mass;
    let after = adm_mass_with(&g.conformally_rescaled(u)?, opts)?.extrapolated_mass;
    Ok(MassDifference {
        flux_route: fit.limit,
        composed_route: after - before,
        convergence_order: fit.order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::{ExteriorHarmonic, Multipole};
    use crate::metric::{Core, GridSpec, LogGrid};

    #[test]
    fn flat_flux_vanishes() {
        let g = ConformallyFlatMetric::from_harmonic(ExteriorHarmonic::flat(3, 1.0).unwrap());
        assert_eq!(adm_flux(&g, 5.0).unwrap(), 0.0);
        let rep = adm_mass(&g).unwrap();
        assert!(rep.extrapolated_mass.abs() < 1e-12);
        let radial = RadialMetric::flat(3, GridSpec::default()).unwrap();
        assert!(adm_mass(&radial).unwrap().extrapolated_mass.abs() < 1e-12);
    }

    #[test]
    fn schwarzschild_flux_closed_form() {
        // U⁴δ with U = 1 + 1/(2ρ): flux(ρ) = (1 + 1/(2ρ))³
        let u = ExteriorHarmonic::schwarzschild(3, 1.0, 1.0).unwrap();
        let g = ConformallyFlatMetric::from_harmonic(u);
        let f = adm_flux(&g, 100.0).unwrap();
        assert!((f - 1.005f64.powi(3)).abs() < 1e-12);
        assert!((f - 1.0).abs() < 0.02);
        let radial = RadialMetric::schwarzschild(3, 1.0, GridSpec::default()).unwrap();
        let i = radial.grid().nearest(100.0);
        let rho = radial.radii()[i];
        let fr = adm_flux(&radial, rho).unwrap();
        assert!((fr - (1.0 + 0.5 / rho).powi(3)).abs() < 1e-8, "{fr}");
    }

    #[test]
    fn schwarzschild_mass() {
        let u = ExteriorHarmonic::schwarzschild(3, 1.0, 1.0).unwrap();
        let rep = adm_mass(&ConformallyFlatMetric::from_harmonic(u)).unwrap();
        assert!((rep.extrapolated_mass - 1.0).abs() < 1e-6, "{rep:?}");
        assert_eq!(rep.expansion_mass, Some(1.0));
        let order = rep.convergence_order.unwrap();
        assert!((0.5..=3.0).contains(&order));

        let radial = RadialMetric::schwarzschild(3, 1.0, GridSpec::default()).unwrap();
        let rep = adm_mass(&radial).unwrap();
        assert!((rep.extrapolated_mass - 1.0).abs() < 1e-6, "{rep:?}");
        assert!(rep.discrepancy.unwrap() < 1e-6);
    }

    #[test]
    fn four_dimensional_monopole() {
        let u = ExteriorHarmonic::monopole_only(4, 1.0, 0.3).unwrap();
        let rep = adm_mass(&ConformallyFlatMetric::from_harmonic(u.clone())).unwrap();
        assert!((rep.extrapolated_mass - 0.6).abs() < 1e-6, "{rep:?}");
        let radial = RadialMetric::from_harmonic(&u, 1e-2, 1e4, 64, Core::FilledCenter).unwrap();
        let rep = adm_mass(&radial).unwrap();
        assert!((rep.extrapolated_mass - 0.6).abs() < 1e-6, "{rep:?}");
    }

    #[test]
    fn higher_multipoles_leave_mass_unchanged() {
        let base = ExteriorHarmonic::monopole_only(3, 1.0, 0.5).unwrap();
        let lumpy = ExteriorHarmonic::new(
            3,
            1.0,
            0.5,
            vec![
                Multipole {
                    l: 1,
                    index: 0,
                    coeff: 0.1,
                },
                Multipole {
                    l: 2,
                    index: 1,
                    coeff: 0.05,
                },
            ],
            vec![],
        )
        .unwrap();
        let a = adm_mass(&ConformallyFlatMetric::from_harmonic(base)).unwrap();
        let b = adm_mass(&ConformallyFlatMetric::from_harmonic(lumpy)).unwrap();
        assert!((a.extrapolated_mass - b.extrapolated_mass).abs() < 1e-6);
    }

    #[test]
    fn areal_schwarzschild_mass() {
        let grid = LogGrid::new(3.0, 1e4, 64).unwrap();
        let g = RadialMetric::sample(
            3,
            grid,
            |r| 1.0 / (1.0 - 2.0 / r),
            |_| 1.0,
            3.0,
            1.0,
            Core::FilledCenter,
        )
        .unwrap();
        let rep = adm_mass(&g).unwrap();
        assert!((rep.extrapolated_mass - 1.0).abs() < 1e-6, "{rep:?}");
        assert_eq!(rep.expansion_mass, None);
    }

    #[test]
    fn mass_difference_of_monopole_rescaling() {
        let g = RadialMetric::flat(3, GridSpec::default()).unwrap();
        let u: Vec<f64> = g.radii().iter().map(|r| 1.0 + 0.1 / r).collect();
        let d = mass_difference_flux(&g, &u).unwrap();
        assert!((d.flux_route - 0.2).abs() < 1e-8, "{d:?}");
        assert!((d.composed_route - 0.2).abs() < 1e-8, "{d:?}");
        let one = vec![1.0; g.len()];
        let d = mass_difference_flux(&g, &one).unwrap();
        assert_eq!(d.flux_route, 0.0);
    }

    #[test]
    fn extrapolation_reports_bad_fits() {
        let radii: Vec<f64> = (0..8).map(|k| 100.0 * 1.5f64.powi(k)).collect();
        let noisy: Vec<f64> = radii
            .iter()
            .enumerate()
            .map(|(k, _)| if k % 2 == 0 { 1.0 } else { 1.1 })
            .collect();
        assert!(matches!(
            extrapolate(&radii, &noisy, 3),
            Err(Error::NonConvergentFit(_))
        ));
        let clean: Vec<f64> = radii.iter().map(|r| 2.0 + 3.0 / (r * r)).collect();
        let fit = extrapolate(&radii, &clean, 3).unwrap();
        assert!((fit.limit - 2.0).abs() < 1e-12);
        assert!((fit.order.unwrap() - 2.0).abs() < 1e-4 || (fit.order.unwrap() - 1.0).abs() < 1e-4);
    }
}
