//! The Ricci deformation g_s = g + s φ Ric(g), the mass curve
//! m(s) = m(u_s^{4/(n−2)} g_s), and the first-variation argument built on it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::ExteriorHarmonic;
use crate::mass::{adm_mass_on_window, flux_window, MassOptions};
use crate::metric::{grad_u_fourth_integral, RadialMetric};
use crate::solver::{solve_conformal_factor, ConformalBvp, InnerEnd};
use crate::sphere::{dense_directions, unit_sphere_area};

/// φ = 0 on r ≤ a/3, rising to 1 on [a/3, a/2], 1 on [a/2, 3a], falling on
/// [3a, 4a], 0 beyond; transitions by the quintic smoothstep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub a: f64,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

fn smoothstep_prime(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    30.0 * t * t * (t - 1.0) * (t - 1.0)
}

impl Cutoff {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 3.0) {
            return Err(Error::InvalidParameter(format!("cutoff scale a = {a} must exceed 3")));
        }
        Ok(Self { a })
    }

    pub fn eval(&self, r: f64) -> f64 {
        let a = self.a;
        if r <= a / 3.0 || r >= 4.0 * a {
            0.0
        } else if r < a / 2.0 {
            smoothstep((r - a / 3.0) / (a / 6.0))
        } else if r <= 3.0 * a {
            1.0
        } else {
            1.0 - smoothstep((r - 3.0 * a) / a)
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let a = self.a;
        if r < a / 2.0 {
            smoothstep_prime((r - a / 3.0) / (a / 6.0)) / (a / 6.0)
        } else if r <= 3.0 * a {
            0.0
        } else {
            -smoothstep_prime((r - 3.0 * a) / a) / a
        }
    }

    /// (inner, outer) edge of the support.
    pub fn support(&self) -> (f64, f64) {
        (self.a / 3.0, 4.0 * self.a)
    }
}

/// g_s = g + s φ Ric(g). For g = A dr² + B r² dΩ² the Ricci tensor is
/// λ_r A dr² + λ_t B r² dΩ², so A_s = A (1 + s φ λ_r) and B_s = B (1 + s φ λ_t).
pub fn deform(g: &RadialMetric, s: f64, c: &Cutoff) -> Result<RadialMetric> {
    if s == 0.0 {
        return Ok(g.clone());
    }
    let curv = g.curvature();
    let mut a = g.a().to_vec();
    let mut b = g.b().to_vec();
    for i in 0..g.len() {
        let phi = c.eval(g.radii()[i]);
        if phi == 0.0 {
            continue;
        }
        let fa = 1.0 + s * phi * curv.radial[i];
        let fb = 1.0 + s * phi * curv.tangential[i];
        if !(fa > 0.0 && fb > 0.0) {
            return Err(Error::Inadmissible {
                s,
                reason: format!("metric degenerates at r = {:e}", g.radii()[i]),
            });
        }
        a[i] *= fa;
        b[i] *= fb;
    }
    g.with_profiles(a, b)
}

/// ṁ(0) closed form and its annulus lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstVariation {
    /// (1/(2ω_{n−1}(n−1))) ∫ φ |Ric|² dμ.
    pub value: f64,
    /// Same with φ replaced by the indicator of a/2 < r < 3a.
    pub annulus_lower_bound: f64,
    pub quadrature_error: f64,
}

pub fn mdot0_formula(g: &RadialMetric, c: &Cutoff) -> FirstVariation {
    let n = g.n() as f64;
    let norm = 1.0 / (2.0 * unit_sphere_area(g.n()) * (n - 1.0));
    let (lo, hi) = c.support();
    let (v, e) = g.ricci_norm_sq_integral(lo, hi, |r| c.eval(r));
    let (lb, _) = g.ricci_norm_sq_integral(c.a / 2.0, 3.0 * c.a, |_| 1.0);
    FirstVariation {
        value: norm * v,
        annulus_lower_bound: norm * lb,
        quadrature_error: norm * e,
    }
}

/// Tuning for [`mass_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Number of points of the symmetric s grid (odd).
    pub points: usize,
    /// Grid step as a fraction of the first failing |s| found by doubling.
    pub step_fraction: f64,
    /// Step of the fourth-order derivative stencil for ṁ(0), as a fraction
    /// of the largest admissible |s| found by doubling.
    pub derivative_fraction: f64,
    pub max_doublings: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            points: 9,
            step_fraction: 0.25,
            derivative_fraction: 1e-1,
            max_doublings: 60,
        }
    }
}

/// One point of the mass curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassSample {
    pub s: f64,
    pub mass: Option<f64>,
    pub residual: Option<f64>,
    pub failure: Option<String>,
}

impl MassSample {
    pub fn admissible(&self) -> bool {
        self.mass.is_some()
    }
}

/// A computed mass curve.
#[derive(Debug, Clone)]
pub struct FlowRun {
    pub base_metric: RadialMetric,
    pub cutoff: Cutoff,
    pub s_grid: Vec<f64>,
    pub mass_samples: Vec<MassSample>,
    pub mdot0_formula: FirstVariation,
    pub mdot0_fd: f64,
    pub mddot_max: f64,
    /// Largest h such that every grid point with |s| ≤ h succeeded.
    pub admissible_range: f64,
    /// First |s| (by doubling) at which a deformation or solve failed.
    pub failure_scale: f64,
    pub m0: f64,
    window: Vec<usize>,
}

impl FlowRun {
    /// m(s) by a direct solve on the run's flux window.
    pub fn mass_at(&self, s: f64) -> Result<f64> {
        mass_at(&self.base_metric, &self.cutoff, s, &self.window).map(|(m, _)| m)
    }

    /// Summary record for serialisation.
    pub fn summary(&self) -> FlowSummary {
        FlowSummary {
            a: self.cutoff.a,
            m0: self.m0,
            mdot0_formula: self.mdot0_formula.value,
            mdot0_annulus: self.mdot0_formula.annulus_lower_bound,
            mdot0_fd: self.mdot0_fd,
            relative_gap: relative_gap(self.mdot0_fd, self.mdot0_formula.value),
            mddot_max: self.mddot_max,
            admissible_range: self.admissible_range,
            failure_scale: self.failure_scale,
        }
    }
}

/// |fd − formula| / max(formula, 1e−12).
pub fn relative_gap(fd: f64, formula: f64) -> f64 {
    (fd - formula).abs() / formula.max(1e-12)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub a: f64,
    pub m0: f64,
    pub mdot0_formula: f64,
    pub mdot0_annulus: f64,
    pub mdot0_fd: f64,
    pub relative_gap: f64,
    pub mddot_max: f64,
    pub admissible_range: f64,
    pub failure_scale: f64,
}

fn mass_at(g: &RadialMetric, c: &Cutoff, s: f64, window: &[usize]) -> Result<(f64, f64)> {
    let gs = deform(g, s, c)?;
    // R_h(g) is pure truncation error of a scalar-flat base; removing it
    // keeps u_0 ≡ 1 and u_s exactly harmonic outside supp φ
    let bvp = ConformalBvp {
        inner: InnerEnd::FluxFree,
        scalar_offset: Some(g.curvature().scalar),
        ..ConformalBvp::homogeneous(gs.clone())
    };
    let sol = solve_conformal_factor(&bvp).map_err(|e| match e {
        Error::Solver(reason) => Error::Inadmissible { s, reason },
        other => other,
    })?;
    let composed = gs.conformally_rescaled(&sol.u)?;
    let rep = adm_mass_on_window(&composed, window)?;
    Ok((rep.extrapolated_mass, sol.residual))
}

/// Runs the pipeline deform → solve → compose → mass over a symmetric s grid.
///
/// At a second end u_s is taken flux-free, so the whole first variation of
/// ∫ R_s u_s² shows up in the mass of the outer end.
///
/// The grid step is `step_fraction` of the first |s| at which either sign
/// fails, found by doubling from a scale where s φ Ric is 10⁻³ of g.
pub fn mass_curve(g: &RadialMetric, c: &Cutoff, opts: &FlowOptions) -> Result<FlowRun> {
    if opts.points < 5 || opts.points.is_multiple_of(2) {
        return Err(Error::InvalidParameter(
            "s grid needs an odd number ≥ 5 of points".into(),
        ));
    }
    let defect = crate::solver::scalar_flatness_defect(g);
    if defect > 1e-4 {
        return Err(Error::invariant(
            "scalar-flat-base",
            format!("base metric has |R| A r² up to {defect:e}"),
        ));
    }
    // the window sits outside supp φ, where every g_s agrees with g
    let window = flux_window(
        g,
        &MassOptions {
            min_radius: 1.5 * c.support().1,
            ..MassOptions::default()
        },
    )?;
    let (m0, _) = mass_at(g, c, 0.0, &window)?;
    let curv = g.curvature();
    let ric_max = (0..g.len())
        .map(|i| c.eval(g.radii()[i]) * curv.radial[i].abs().max(curv.tangential[i].abs()))
        .fold(0.0, f64::max);
    let mdot = mdot0_formula(g, c);
    if ric_max == 0.0 {
        let samples = (0..opts.points)
            .map(|k| MassSample {
                s: k as f64 - (opts.points / 2) as f64,
                mass: Some(m0),
                residual: Some(0.0),
                failure: None,
            })
            .collect::<Vec<_>>();
        return Ok(FlowRun {
            base_metric: g.clone(),
            cutoff: *c,
            s_grid: samples.iter().map(|m| m.s).collect(),
            mass_samples: samples,
            mdot0_formula: mdot,
            mdot0_fd: 0.0,
            mddot_max: 0.0,
            admissible_range: f64::INFINITY,
            failure_scale: f64::INFINITY,
            m0,
            window,
        });
    }
    let mut s = 1e-3 / ric_max;
    let mut last_ok = 0.0;
    let mut failure_scale = f64::INFINITY;
    for _ in 0..opts.max_doublings {
        let outcomes = [s, -s]
            .par_iter()
            .map(|&x| mass_at(g, c, x, &window).map(|_| ()))
            .collect::<Vec<_>>();
        match outcomes.into_iter().find(|o| o.is_err()) {
            None => {
                last_ok = s;
                s *= 2.0;
            }
            Some(Err(e)) if last_ok == 0.0 => return Err(e),
            Some(_) => {
                failure_scale = s;
                break;
            }
        }
    }
    let reference = if failure_scale.is_finite() {
        failure_scale
    } else {
        last_ok
    };
    let step = opts.step_fraction * reference;
    let half = (opts.points / 2) as i64;
    let s_grid: Vec<f64> = (-half..=half).map(|k| k as f64 * step).collect();
    let mass_samples: Vec<MassSample> = s_grid
        .par_iter()
        .map(|&s| match mass_at(g, c, s, &window) {
            Ok((m, r)) => MassSample {
                s,
                mass: Some(m),
                residual: Some(r),
                failure: None,
            },
            Err(e) => MassSample {
                s,
                mass: None,
                residual: None,
                failure: Some(e.to_string()),
            },
        })
        .collect();
    let mut admissible_range = 0.0;
    for k in 1..=half {
        let plus = &mass_samples[(half + k) as usize];
        let minus = &mass_samples[(half - k) as usize];
        if plus.admissible() && minus.admissible() {
            admissible_range = k as f64 * step;
        } else {
            break;
        }
    }
    // fourth-order central difference with its own small step
    let d = opts.derivative_fraction * last_ok;
    let pts: Vec<f64> = [-2.0, -1.0, 1.0, 2.0]
        .par_iter()
        .map(|&k| mass_at(g, c, k * d, &window).map(|(m, _)| m))
        .collect::<Result<Vec<_>>>()?;
    let mdot0_fd = (pts[0] - 8.0 * pts[1] + 8.0 * pts[2] - pts[3]) / (12.0 * d);
    let mut mddot_max: f64 = 0.0;
    for k in 1..mass_samples.len() - 1 {
        if let (Some(a), Some(b), Some(c)) = (mass_samples[k - 1].mass, mass_samples[k].mass, mass_samples[k + 1].mass)
        {
            mddot_max = mddot_max.max(((a - 2.0 * b + c) / (step * step)).abs());
        }
    }
    Ok(FlowRun {
        base_metric: g.clone(),
        cutoff: *c,
        s_grid,
        mass_samples,
        mdot0_formula: mdot,
        mdot0_fd,
        mddot_max,
        admissible_range,
        failure_scale,
        m0,
        window,
    })
}

/// Outcome of the δ–γ argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaGammaReport {
    pub gamma: f64,
    pub c0: f64,
    pub m0: f64,
    pub mdot0: f64,
    /// m(0) < γ²/(2C₀).
    pub premise: bool,
    pub s_test: f64,
    /// m(−γ/C₀), when −γ/C₀ is admissible.
    pub mass_at_test: Option<f64>,
    /// m(0) − m(−γ/C₀) ≤ ṁ(0) γ/C₀ + C₀ (γ/C₀)²/2.
    pub taylor_consistent: Option<bool>,
    pub verdict: Verdict,
    pub note: String,
}

/// Checks that m(0) < γ²/(2C₀) and m(−γ/C₀) ≥ 0 force ṁ(0) < γ, with
/// C₀ = mddot_max of the run. m(−γ/C₀) is evaluated by a direct solve.
pub fn delta_gamma_experiment(run: &FlowRun, gamma: f64) -> DeltaGammaReport {
    let c0 = run.mddot_max;
    let mdot0 = run.mdot0_formula.value;
    let m0 = run.m0;
    let premise = c0 > 0.0 && m0 < gamma * gamma / (2.0 * c0);
    let s_test = if c0 > 0.0 { -gamma / c0 } else { f64::NEG_INFINITY };
    let mut report = DeltaGammaReport {
        gamma,
        c0,
        m0,
        mdot0,
        premise,
        s_test,
        mass_at_test: None,
        taylor_consistent: None,
        verdict: Verdict::Inconclusive,
        note: String::new(),
    };
    if s_test.is_finite() {
        match run.mass_at(s_test) {
            Ok(m) => {
                let t = gamma / c0;
                report.mass_at_test = Some(m);
                report.taylor_consistent = Some(m0 - m <= mdot0 * t + 0.5 * c0 * t * t);
                if s_test.abs() > run.admissible_range {
                    report.note = format!(
                        "−γ/C₀ = {s_test:e} lies beyond the sampled range ±{:e}",
                        run.admissible_range
                    );
                }
            }
            Err(e) => report.note = format!("direct solve at s = {s_test:e} failed: {e}"),
        }
    } else {
        report.note = "C₀ = 0: the curve is flat to sampling accuracy".into();
    }
    report.verdict = if mdot0 < gamma {
        Verdict::Pass
    } else if report.mass_at_test.is_none() || !premise {
        Verdict::Inconclusive
    } else {
        Verdict::Fail
    };
    report
}

/// Quantities of the oscillation bound sup_{|x|>a}|U−1| ≲ (a^{4−n} ṁ(0))^{1/4} + a^{2−n}|m(0)|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub lhs: f64,
    pub mdot_term: f64,
    pub mass_term: f64,
    /// lhs / (mdot_term + mass_term), or 0 when both vanish.
    pub ratio: f64,
    /// sup over a < |x| < 2a of |U − spherical average|.
    pub shell_oscillation: f64,
    /// ∫_{B_{3a}∖B_{a/2}} |∇U|⁴.
    pub grad_fourth: f64,
    /// shell_oscillation / (a^{4−n} grad_fourth)^{1/4}.
    pub chain_constant: f64,
    /// grad_fourth / ṁ(0).
    pub grad_to_mdot: f64,
}

pub fn oscillation_bound_check(u: &ExteriorHarmonic, a: f64, mdot0: f64, m0: f64) -> Result<OscillationReport> {
    if !(a > 3.0 * u.inner_radius()) {
        return Err(Error::InvalidParameter(format!(
            "a = {a} must exceed 3R = {}",
            3.0 * u.inner_radius()
        )));
    }
    let n = u.n() as f64;
    let lhs = u.sup_deviation(a)?;
    let mdot_term = (a.powf(4.0 - n) * mdot0.max(0.0)).powf(0.25);
    let mass_term = a.powf(2.0 - n) * m0.abs();
    let denom = mdot_term + mass_term;
    let shell_oscillation = if u.is_radial() {
        0.0
    } else {
        let dirs = dense_directions(u.n(), 2048);
        (0..=8)
            .map(|k| {
                let r = a * (1.0 + k as f64 / 8.0);
                let avg = u.spherical_average_closed_form(r);
                dirs.iter()
                    .map(|d| {
                        let x: Vec<f64> = d.iter().map(|v| v * r).collect();
                        (u.eval(&x).unwrap_or(avg) - avg).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };
    let grad_fourth = grad_u_fourth_integral(u, a)?.value;
    let chain_denom = (a.powf(4.0 - n) * grad_fourth).powf(0.25);
    Ok(OscillationReport {
        lhs,
        mdot_term,
        mass_term,
        ratio: if denom > 0.0 { lhs / denom } else { 0.0 },
        shell_oscillation,
        grad_fourth,
        chain_constant: if chain_denom > 0.0 {
            shell_oscillation / chain_denom
        } else {
            0.0
        },
        grad_to_mdot: if mdot0 > 0.0 { grad_fourth / mdot0 } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{ConformalBump, GridSpec};

    fn schwarzschild(m: f64) -> RadialMetric {
        RadialMetric::schwarzschild(3, m, GridSpec::default()).unwrap()
    }

    #[test]
    fn cutoff_regions_and_smoothness() {
        let c = Cutoff::new(6.0).unwrap();
        for (r, v) in [
            (1.0, 0.0),
            (2.0, 0.0),
            (3.0, 1.0),
            (10.0, 1.0),
            (18.0, 1.0),
            (24.0, 0.0),
            (30.0, 0.0),
        ] {
            assert_eq!(c.eval(r), v, "φ({r})");
        }
        assert!((c.eval(2.5) - 0.5).abs() < 1e-15);
        assert!((c.eval(21.0) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        for r in [2.2, 2.7, 19.0, 23.5] {
            let fd = (c.eval(r + h) - c.eval(r - h)) / (2.0 * h);
            assert!((fd - c.derivative(r)).abs() < 1e-7);
        }
        // both transitions are C²: φ' and the second difference vanish at the seams
        for r in [2.0, 3.0, 18.0, 24.0] {
            assert!(c.derivative(r).abs() < 1e-15);
            let d2 = (c.eval(r + 1e-3) - 2.0 * c.eval(r) + c.eval(r - 1e-3)) / 1e-6;
            assert!(d2.abs() < 1e-2, "φ'' at {r}: {d2}");
        }
        assert!(Cutoff::new(3.0).is_err());
    }

    #[test]
    fn deformation_is_local() {
        let g = schwarzschild(1.0);
        let c = Cutoff::new(4.0).unwrap();
        assert_eq!(deform(&g, 0.0, &c).unwrap().a(), g.a());
        let gs = deform(&g, 2.0, &c).unwrap();
        let (lo, hi) = c.support();
        for (i, &r) in g.radii().iter().enumerate() {
            if r <= lo || r >= hi {
                assert_eq!(gs.a()[i], g.a()[i]);
                assert_eq!(gs.b()[i], g.b()[i]);
            }
        }
        assert!(gs.a().iter().zip(g.a()).any(|(x, y)| x != y));
        let flat = RadialMetric::flat(3, GridSpec::default()).unwrap();
        let fs = deform(&flat, 100.0, &c).unwrap();
        assert_eq!(fs.a(), flat.a());
        assert!(matches!(deform(&g, 1e3, &c), Err(Error::Inadmissible { .. })));
    }

    #[test]
    fn first_variation_formula() {
        let c = Cutoff::new(4.0).unwrap();
        let flat = RadialMetric::flat(3, GridSpec::default()).unwrap();
        let f0 = mdot0_formula(&flat, &c);
        assert_eq!(f0.value, 0.0);
        // |Ric|² = 6m²/R⁶ in areal radius, integrated by adaptive quadrature
        let f = mdot0_formula(&schwarzschild(1.0), &c);
        assert!((f.value - 0.034_062_720_069_150_54).abs() < 1e-4 * f.value, "{f:?}");
        assert!(f.value >= f.annulus_lower_bound && f.annulus_lower_bound > 0.0);
    }

    #[test]
    fn schwarzschild_dual_route() {
        let g = schwarzschild(1.0);
        let run = mass_curve(&g, &Cutoff::new(4.0).unwrap(), &FlowOptions::default()).unwrap();
        let s = run.summary();
        assert!(s.relative_gap < 1e-3, "{s:?}");
        assert!((run.m0 - 1.0).abs() < 1e-6);
        assert_eq!(run.mass_samples.len(), 9);
        assert!(run.admissible_range > 0.0 && run.mddot_max > 0.0);
        // the curve increases through s = 0
        let mid = &run.mass_samples[3..6];
        assert!(mid[0].mass.unwrap() < mid[1].mass.unwrap() && mid[1].mass.unwrap() < mid[2].mass.unwrap());
    }

    #[test]
    fn flat_base_gives_constant_curve() {
        let flat = RadialMetric::flat(3, GridSpec::default()).unwrap();
        let run = mass_curve(&flat, &Cutoff::new(5.0).unwrap(), &FlowOptions::default()).unwrap();
        assert_eq!(run.m0, 0.0);
        assert_eq!(run.mdot0_formula.value, 0.0);
        assert!(run.mass_samples.iter().all(|m| m.mass == Some(0.0)));
    }

    #[test]
    fn rejects_curved_base() {
        let bump = ConformalBump::new(3, 0.3, 0.5, 0.4, 0.0).unwrap();
        let g = bump.metric(GridSpec::default()).unwrap();
        let err = mass_curve(&g, &Cutoff::new(4.0).unwrap(), &FlowOptions::default()).unwrap_err();
        assert!(
            matches!(&err, Error::Invariant { invariant, .. } if invariant == "scalar-flat-base"),
            "{err}"
        );
    }

    #[test]
    fn oscillation_for_monopole() {
        let u = ExteriorHarmonic::schwarzschild(3, 1.0, 0.1).unwrap();
        let rep = oscillation_bound_check(&u, 5.0, 1e-4, 0.1).unwrap();
        assert!((rep.lhs - 0.01).abs() < 1e-12);
        assert_eq!(rep.shell_oscillation, 0.0);
        assert!((rep.mass_term - 0.02).abs() < 1e-15);
        assert!(rep.ratio > 0.0 && rep.grad_fourth > 0.0);
        assert!(oscillation_bound_check(&u, 2.0, 1e-4, 0.1).is_err());
    }
}
