//! Weighted Hölder norms on exterior regions, the barrier f_∞ = −|x|^σ/U,
//! and empirical constants for the injectivity estimates of Δ_g and L_g.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;
use crate::field::{norm, ScalarField};
use crate::harmonic::ExteriorHarmonic;
use crate::metric::{conformal_coupling, LogGrid, RadialMetric};
use crate::solver::{solve_conformal_factor, ConformalBvp};
use crate::sphere::fibonacci_directions;

/// Parameters of |v|_{k+α,σ,ρ}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormSpec {
    pub sigma: f64,
    pub alpha: f64,
    pub k: usize,
    pub rho: f64,
}

impl WeightedNormSpec {
    pub fn new(n: usize, sigma: f64, alpha: f64, k: usize, rho: f64) -> Result<Self> {
        let spec = Self { sigma, alpha, k, rho };
        spec.validate(n)?;
        Ok(spec)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        check_sigma(n, self.sigma)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "α = {} must lie in (0, 1)",
                self.alpha
            )));
        }
        if self.k > 2 {
            return Err(Error::InvalidParameter(format!(
                "derivative order k = {} exceeds 2",
                self.k
            )));
        }
        if !(self.rho > 1.0) {
            return Err(Error::InvalidParameter(format!("ρ = {} must exceed 1", self.rho)));
        }
        Ok(())
    }
}

fn check_sigma(n: usize, sigma: f64) -> Result<()> {
    let lo = 2.0 - n as f64;
    if !(sigma > lo && sigma < 0.0) {
        return Err(Error::InvalidParameter(format!("σ = {sigma} must lie in ({lo}, 0)")));
    }
    Ok(())
}

/// A radial function on ℝⁿ sampled on a log-uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSamples {
    pub n: usize,
    pub grid: LogGrid,
    pub values: Vec<f64>,
}

impl RadialSamples {
    pub fn new(n: usize, grid: LogGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter("sample count differs from grid length".into()));
        }
        Ok(Self { n, grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(n: usize, grid: LogGrid, f: F) -> Self {
        let values = grid.r.iter().map(|&r| f(r)).collect();
        Self { n, grid, values }
    }

    /// Frame components of ∇^k v with their multiplicities: for a radial v,
    /// ∇v = v′ r̂ and ∇²v = v″ r̂⊗r̂ + (v′/r)(I − r̂⊗r̂).
    fn components(&self, k: usize) -> Vec<(Vec<f64>, f64)> {
        let h = self.grid.h;
        let r = &self.grid.r;
        match k {
            0 => vec![(self.values.clone(), 1.0)],
            1 => {
                let vt = fd::derivative(&self.values, h, 1);
                vec![(vt.iter().zip(r).map(|(d, r)| d / r).collect(), 1.0)]
            }
            _ => {
                let vt = fd::derivative(&self.values, h, 1);
                let vtt = fd::derivative(&self.values, h, 2);
                let radial = (0..r.len()).map(|i| (vtt[i] - vt[i]) / (r[i] * r[i])).collect();
                let tangential = (0..r.len()).map(|i| vt[i] / (r[i] * r[i])).collect();
                vec![(radial, 1.0), (tangential, self.n as f64 - 1.0)]
            }
        }
    }
}

/// The pieces of |v|_{k+α,σ,ρ}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParts {
    /// sup_{r ≥ ρ} r^{j−σ} |∇^j v| for j = 0..=k.
    pub sup_terms: Vec<f64>,
    /// Sampled lower estimate of [r^{k+α−σ} ∇^k v]_α.
    pub holder: f64,
    pub total: f64,
}

/// |v|_{k+α,σ,ρ} from samples.
///
/// The Hölder seminorm is the maximum of |w(x) − w(y)| / |x − y|^α over
/// sample pairs x, y on a common ray with ρ ≤ |x| and |x − y| ≤ |x|/2, so
/// both points share a dyadic scale; it bounds the true seminorm from below.
pub fn weighted_norm(v: &RadialSamples, spec: &WeightedNormSpec) -> Result<f64> {
    weighted_norm_parts(v, spec).map(|p| p.total)
}

pub fn weighted_norm_parts(v: &RadialSamples, spec: &WeightedNormSpec) -> Result<NormParts> {
    spec.validate(v.n)?;
    parts(v, spec)
}

/// |f|_{α,σ−2,ρ}, the norm of the target space of a second-order operator
/// defined on the space of `spec`.
pub fn image_norm_parts(f: &RadialSamples, spec: &WeightedNormSpec) -> Result<NormParts> {
    spec.validate(f.n)?;
    let image = WeightedNormSpec {
        sigma: spec.sigma - 2.0,
        k: 0,
        ..*spec
    };
    parts(f, &image)
}

fn parts(v: &RadialSamples, spec: &WeightedNormSpec) -> Result<NormParts> {
    let r = &v.grid.r;
    let len = r.len();
    let first = r.partition_point(|&x| x < spec.rho * (1.0 - 1e-12));
    if r[0] > spec.rho * (1.0 + 1e-12) || len < first + 5 {
        return Err(Error::Margin {
            index: first,
            needed: 5,
            len,
        });
    }
    let mut sup_terms = Vec::with_capacity(spec.k + 1);
    for j in 0..=spec.k {
        let comps = v.components(j);
        let s = (first..len)
            .map(|i| r[i].powf(j as f64 - spec.sigma) * tensor_norm(&comps, i))
            .fold(0.0, f64::max);
        sup_terms.push(s);
    }
    let weight = spec.k as f64 + spec.alpha - spec.sigma;
    let weighted: Vec<(Vec<f64>, f64)> = v
        .components(spec.k)
        .into_iter()
        .map(|(c, m)| ((0..len).map(|i| r[i].powf(weight) * c[i]).collect(), m))
        .collect();
    let mut holder: f64 = 0.0;
    for i in first..len {
        for j in i + 1..len {
            let d = r[j] - r[i];
            if d > 0.5 * r[i] {
                break;
            }
            let diff: f64 = weighted
                .iter()
                .map(|(c, m)| m * (c[j] - c[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            holder = holder.max(diff / d.powf(spec.alpha));
        }
    }
    let total = sup_terms.iter().sum::<f64>() + holder;
    Ok(NormParts {
        sup_terms,
        holder,
        total,
    })
}

fn tensor_norm(comps: &[(Vec<f64>, f64)], i: usize) -> f64 {
    comps.iter().map(|(c, m)| m * c[i] * c[i]).sum::<f64>().sqrt()
}

/// f_∞(x) = −|x|^σ / U(x) on |x| ≥ 2.
pub fn barrier_f_infinity(u: &ExteriorHarmonic, sigma: f64, x: &[f64]) -> Result<f64> {
    check_sigma(u.n(), sigma)?;
    let r = norm(x);
    if r < 2.0 {
        return Err(Error::Domain { radius: r, inner: 2.0 });
    }
    Ok(-r.powf(sigma) / u.eval(x)?)
}

/// Δ_g f_∞ = −σ(n−2+σ) |x|^{σ−2} U^{−(n+2)/(n−2)} for g = U^{4/(n−2)} δ.
pub fn barrier_laplacian_closed_form(u: &ExteriorHarmonic, sigma: f64, x: &[f64]) -> Result<f64> {
    let n = u.n() as f64;
    let r = norm(x);
    Ok(-sigma * (n - 2.0 + sigma) * r.powf(sigma - 2.0) * u.eval(x)?.powf(-(n + 2.0) / (n - 2.0)))
}

/// Δ_g f = U^{−2n/(n−2)} ∂_i(U² ∂_i f) by conservative central differences
/// with step `h`, Richardson-extrapolated from h and h/2.
pub fn barrier_laplacian_fd(u: &ExteriorHarmonic, sigma: f64, x: &[f64], h: f64) -> Result<f64> {
    let lap = |h: f64| -> Result<f64> {
        let mut acc = 0.0;
        let mut y = x.to_vec();
        let f0 = barrier_f_infinity(u, sigma, x)?;
        let u0 = u.value(x);
        for i in 0..x.len() {
            y[i] = x[i] + h;
            let fp = barrier_f_infinity(u, sigma, &y)?;
            let up = u.value(&y);
            y[i] = x[i] - h;
            let fm = barrier_f_infinity(u, sigma, &y)?;
            let um = u.value(&y);
            y[i] = x[i];
            let ap = 0.5 * (up * up + u0 * u0);
            let am = 0.5 * (um * um + u0 * u0);
            acc += (ap * (fp - f0) - am * (f0 - fm)) / (h * h);
        }
        let n = u.n() as f64;
        Ok(acc * u0.powf(-2.0 * n / (n - 2.0)))
    };
    let coarse = lap(h)?;
    let fine = lap(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub sigma: f64,
    pub points: usize,
    /// max |closed − fd| / |closed|.
    pub max_relative_gap: f64,
    pub min_closed_form: f64,
    /// Smallest C₂ with Δ_g f_∞ > |x|^{σ−2}/C₂ at every sample.
    pub c2: f64,
    pub positive: bool,
}

impl BarrierReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.positive && self.max_relative_gap <= tolerance
    }
}

/// Compares the closed form of Δ_g f_∞ with the difference oracle and
/// measures C₂.
pub fn barrier_subharmonicity_check(u: &ExteriorHarmonic, sigma: f64, points: &[Vec<f64>]) -> Result<BarrierReport> {
    check_sigma(u.n(), sigma)?;
    let mut gap: f64 = 0.0;
    let mut min_closed = f64::INFINITY;
    let mut c2: f64 = 0.0;
    for x in points {
        let r = norm(x);
        if !(r > 2.0) {
            return Err(Error::Domain { radius: r, inner: 2.0 });
        }
        let closed = barrier_laplacian_closed_form(u, sigma, x)?;
        let fd = barrier_laplacian_fd(u, sigma, x, 0.02 * r)?;
        gap = gap.max((closed - fd).abs() / closed.abs());
        min_closed = min_closed.min(closed);
        c2 = c2.max(r.powf(sigma - 2.0) / closed);
    }
    Ok(BarrierReport {
        sigma,
        points: points.len(),
        max_relative_gap: gap,
        min_closed_form: min_closed,
        c2,
        positive: min_closed > 0.0,
    })
}

/// `count` points with radii geometric in [r_min, r_max] along spread directions.
pub fn sample_points(n: usize, count: usize, r_min: f64, r_max: f64) -> Vec<Vec<f64>> {
    let dirs = if n == 3 {
        fibonacci_directions(count)
    } else {
        crate::sphere::dense_directions(n, count)
    };
    (0..count)
        .map(|k| {
            let t = if count > 1 { k as f64 / (count - 1) as f64 } else { 0.0 };
            let r = r_min * (r_max / r_min).powf(t);
            dirs[k % dirs.len()].iter().map(|d| d * r).collect()
        })
        .collect()
}

/// A sampled v together with Δ_g v and L_g v.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub id: String,
    pub v: RadialSamples,
    pub laplacian: Vec<f64>,
    pub conformal_laplacian: Vec<f64>,
}

impl TestFunction {
    /// v = r^σ on flat space, with Δv = σ(σ+n−2) r^{σ−2} exactly.
    pub fn flat_power(n: usize, sigma: f64, grid: LogGrid) -> Self {
        let c = sigma * (sigma + n as f64 - 2.0);
        let lap: Vec<f64> = grid.r.iter().map(|r| c * r.powf(sigma - 2.0)).collect();
        Self {
            id: format!("flat r^{sigma}"),
            v: RadialSamples::from_fn(n, grid, |r| r.powf(sigma)),
            conformal_laplacian: lap.clone(),
            laplacian: lap,
        }
    }

    /// Δ_g v and L_g v of a sampled v by the metric's stencils.
    pub fn on_metric(id: impl Into<String>, g: &RadialMetric, v: Vec<f64>) -> Result<Self> {
        let lap = g.laplacian_profile(&v);
        let kappa = conformal_coupling(g.n());
        let scalar = g.curvature().scalar;
        let conf = (0..v.len()).map(|i| lap[i] - kappa * scalar[i] * v[i]).collect();
        Ok(Self {
            id: id.into(),
            v: RadialSamples::new(g.n(), g.grid().clone(), v)?,
            laplacian: lap,
            conformal_laplacian: conf,
        })
    }
}

/// Solves L_g v = f for `count` seeded radial forcings supported in
/// (a/3, 4a), so each v is Δ_g-harmonic inside r = a/3.
pub fn random_forcing_family(g: &RadialMetric, a: f64, count: usize, seed: u64) -> Result<Vec<TestFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (a / 3.0, 4.0 * a);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let t1: f64 = rng.gen_range(0.0..1.0);
        let t2: f64 = rng.gen_range(0.0..1.0);
        let amplitude: f64 = rng.gen_range(-1.0..1.0);
        let (l1, l2) = (
            lo.ln() + t1.min(t2) * (hi / lo).ln(),
            lo.ln() + t1.max(t2) * (hi / lo).ln(),
        );
        let (r1, r2) = (l1.exp(), l2.exp().max(l1.exp() * 1.2).min(hi));
        let (c, w) = (0.5 * (r1 + r2), 0.5 * (r2 - r1));
        let forcing: Vec<f64> = g
            .radii()
            .iter()
            .map(|&r| {
                let z = (r - c) / w;
                if z.abs() < 1.0 {
                    amplitude * (1.0 - z * z).powi(4)
                } else {
                    0.0
                }
            })
            .collect();
        let sol = solve_conformal_factor(&ConformalBvp::poisson(g.clone(), forcing))?;
        out.push(TestFunction::on_metric(format!("forcing-{k}"), g, sol.u)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRatio {
    pub id: String,
    /// |v|_{0,σ,a/5} / |Δ_g v|_{0,σ−2,a/5}.
    pub zeroth_order: f64,
    /// |v|_{2+α,σ,a/4} / |L_g v|_{α,σ−2,a/4}.
    pub full: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub members: Vec<MemberRatio>,
    /// Max of `zeroth_order` over the family.
    pub c_zeroth: f64,
    /// Max of `full` over the family.
    pub c_full: f64,
    pub excluded: Vec<String>,
}

/// Empirical constants of the weighted injectivity estimates. Only σ and α
/// of `spec` are used; the radii are a/5 and a/4.
pub fn injectivity_ratio(family: &[TestFunction], spec: &WeightedNormSpec, a: f64) -> Result<InjectivityReport> {
    let mut members = Vec::new();
    let mut excluded = Vec::new();
    for f in family {
        let sup0 = WeightedNormSpec {
            k: 0,
            rho: a / 5.0,
            ..*spec
        };
        let lap = RadialSamples::new(f.v.n, f.v.grid.clone(), f.laplacian.clone())?;
        let num0 = weighted_norm_parts(&f.v, &sup0)?.sup_terms[0];
        let den0 = image_norm_parts(&lap, &sup0)?.sup_terms[0];
        let full = WeightedNormSpec {
            k: 2,
            rho: a / 4.0,
            ..*spec
        };
        let conf = RadialSamples::new(f.v.n, f.v.grid.clone(), f.conformal_laplacian.clone())?;
        let num = weighted_norm(&f.v, &full)?;
        let den = image_norm_parts(&conf, &full)?.total;
        if !(den0 > 0.0 && den > 0.0) {
            excluded.push(format!("{}: operator image vanishes on the exterior", f.id));
            continue;
        }
        members.push(MemberRatio {
            id: f.id.clone(),
            zeroth_order: num0 / den0,
            full: num / den,
        });
    }
    let c_zeroth = members.iter().map(|m| m.zeroth_order).fold(0.0, f64::max);
    let c_full = members.iter().map(|m| m.full).fold(0.0, f64::max);
    Ok(InjectivityReport {
        members,
        c_zeroth,
        c_full,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::GridSpec;

    fn grid() -> LogGrid {
        LogGrid::new(1.0, 1e4, 64).unwrap()
    }

    #[test]
    fn power_norms() {
        let sigma = -0.5;
        let v = RadialSamples::from_fn(3, grid(), |r| r.powf(sigma));
        let s0 = WeightedNormSpec::new(3, sigma, 0.5, 0, 2.0).unwrap();
        let p0 = weighted_norm_parts(&v, &s0).unwrap();
        assert!((p0.sup_terms[0] - 1.0).abs() < 1e-12);
        // r^{α−σ}·r^σ = r^α is Hölder-α with constant scale-invariant on dyadic pairs
        assert!(p0.holder > 0.0 && p0.holder < 1.0);
        let s1 = WeightedNormSpec { k: 1, ..s0 };
        let p1 = weighted_norm_parts(&v, &s1).unwrap();
        assert!((p1.sup_terms[1] - 0.5).abs() < 1e-7, "{p1:?}");
        let s2 = WeightedNormSpec { k: 2, ..s0 };
        let p2 = weighted_norm_parts(&v, &s2).unwrap();
        // |∇²r^σ| = r^{σ−2} √(σ²(σ−1)² + (n−1)σ²)
        let exact = (0.25f64 * 2.25 + 2.0 * 0.25).sqrt();
        assert!((p2.sup_terms[2] - exact).abs() < 1e-6);
    }

    #[test]
    fn norm_axioms_and_restriction() {
        let s = WeightedNormSpec::new(3, -0.5, 0.3, 2, 2.0).unwrap();
        let f = RadialSamples::from_fn(3, grid(), |r| (r.ln()).sin() / r);
        let g = RadialSamples::from_fn(3, grid(), |r| r.powf(-0.7));
        let nf = weighted_norm(&f, &s).unwrap();
        let ng = weighted_norm(&g, &s).unwrap();
        let scaled = RadialSamples::new(3, grid(), f.values.iter().map(|v| -3.0 * v).collect()).unwrap();
        assert!((weighted_norm(&scaled, &s).unwrap() - 3.0 * nf).abs() < 1e-12 * nf);
        let sum = RadialSamples::new(3, grid(), f.values.iter().zip(&g.values).map(|(a, b)| a + b).collect()).unwrap();
        assert!(weighted_norm(&sum, &s).unwrap() <= nf + ng + 1e-12);
        let outer = WeightedNormSpec { rho: 20.0, ..s };
        assert!(weighted_norm(&f, &outer).unwrap() <= nf);
    }

    #[test]
    fn spec_validation_and_margin() {
        assert!(WeightedNormSpec::new(3, -1.0, 0.5, 0, 2.0).is_err());
        assert!(WeightedNormSpec::new(3, -0.5, 1.0, 0, 2.0).is_err());
        assert!(WeightedNormSpec::new(3, -0.5, 0.5, 3, 2.0).is_err());
        assert!(WeightedNormSpec::new(3, -0.5, 0.5, 0, 1.0).is_err());
        assert!(WeightedNormSpec::new(4, -1.5, 0.5, 0, 2.0).is_ok());
        let v = RadialSamples::from_fn(3, grid(), |r| 1.0 / r);
        let late = WeightedNormSpec::new(3, -0.5, 0.5, 0, 9.9e3).unwrap();
        assert!(matches!(weighted_norm(&v, &late), Err(Error::Margin { .. })));
        let early = WeightedNormSpec::new(3, -0.5, 0.5, 0, 1.01).unwrap();
        let shifted = RadialSamples::from_fn(3, LogGrid::new(2.0, 1e3, 64).unwrap(), |r| 1.0 / r);
        assert!(weighted_norm(&shifted, &early).is_err());
    }

    #[test]
    fn barrier_closed_form_and_oracle() {
        let flat = ExteriorHarmonic::flat(3, 1.0).unwrap();
        assert!((barrier_f_infinity(&flat, -0.5, &[4.0, 0.0, 0.0]).unwrap() + 0.5).abs() < 1e-15);
        let x = [0.0, 3.0, 0.0];
        let closed = barrier_laplacian_closed_form(&flat, -0.5, &x).unwrap();
        assert!((closed - 0.25 * 3f64.powf(-2.5)).abs() < 1e-15);
        assert!(barrier_f_infinity(&flat, -0.5, &[1.0, 0.0, 0.0]).is_err());
        let u = ExteriorHarmonic::schwarzschild(3, 1.0, 1.0).unwrap();
        let pts = sample_points(3, 50, 2.5, 40.0);
        let rep = barrier_subharmonicity_check(&u, -0.5, &pts).unwrap();
        assert!(rep.passes(1e-6), "{rep:?}");
        assert!(rep.c2.is_finite() && rep.c2 > 0.0);
        assert!(pts.iter().all(|x| barrier_f_infinity(&u, -0.5, x).unwrap() < 0.0));
    }

    #[test]
    fn flat_injectivity_constant() {
        let f = TestFunction::flat_power(3, -0.5, grid());
        let spec = WeightedNormSpec::new(3, -0.5, 0.5, 0, 2.0).unwrap();
        let rep = injectivity_ratio(&[f], &spec, 10.0).unwrap();
        assert!((rep.c_zeroth - 4.0).abs() < 1e-8, "{rep:?}");
    }

    #[test]
    fn random_family_ratios_scale_invariant() {
        let g = RadialMetric::flat(3, GridSpec::default()).unwrap();
        let fam = random_forcing_family(&g, 10.0, 3, 7).unwrap();
        let spec = WeightedNormSpec::new(3, -0.5, 0.5, 0, 2.0).unwrap();
        let rep = injectivity_ratio(&fam, &spec, 10.0).unwrap();
        assert_eq!(rep.members.len(), 3);
        assert!(rep.c_zeroth.is_finite() && rep.c_zeroth > 0.0 && rep.c_full.is_finite());
        let mut scaled = fam[0].clone();
        for v in scaled
            .v
            .values
            .iter_mut()
            .chain(&mut scaled.laplacian)
            .chain(&mut scaled.conformal_laplacian)
        {
            *v *= 5.0;
        }
        let r2 = injectivity_ratio(&[scaled], &spec, 10.0).unwrap();
        assert!((r2.members[0].zeroth_order - rep.members[0].zeroth_order).abs() < 1e-12 * rep.c_zeroth);
        assert!((r2.members[0].full - rep.members[0].full).abs() < 1e-12 * rep.c_full);
        assert_eq!(random_forcing_family(&g, 10.0, 3, 7).unwrap(), fam);
    }
}
