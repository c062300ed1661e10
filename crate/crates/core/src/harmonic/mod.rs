//! Positive harmonic functions on exterior domains ℝⁿ ∖ B_R.
//!
//! An [`ExteriorHarmonic`] is `U = 1 + c|x|^{2−n} + Σ decaying multipoles +
//! Σ point sources`, which tends to one at infinity by construction. The
//! coefficient of |x|^{2−n} is half the ADM mass of the metric
//! `U^{4/(n−2)} δ`.

mod poly;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use poly::{harmonic_basis, Polynomial};

use crate::error::{Error, Result};
use crate::field::{norm, ScalarField};
use crate::quadrature::golden_max;
use crate::sphere::{dense_directions, unit_sphere_area, SphereSample};

/// Highest multipole degree admitted by constructors.
pub const MAX_DEGREE: u32 = 4;

/// Positivity is checked on this many directions per admission radius.
const ADMISSION_DIRECTIONS: usize = 4096;
const ADMISSION_MARGIN: f64 = 1e-9;

/// Decaying solid harmonic `coeff · P(x) |x|^{2−n−2l}` where `P` is the
/// `index`-th entry of [`harmonic_basis`]`(n, l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipole {
    pub l: u32,
    pub index: usize,
    pub coeff: f64,
}

/// Point source `strength · |x − location|^{2−n}` placed inside B_R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSource {
    pub location: Vec<f64>,
    pub strength: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExteriorHarmonicRecord {
    n: usize,
    #[serde(rename = "R")]
    inner_radius: f64,
    monopole: f64,
    #[serde(default)]
    higher: Vec<Multipole>,
    #[serde(default)]
    sources: Vec<PointSource>,
}

/// A positive harmonic function on ℝⁿ ∖ B_R tending to one at infinity.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ExteriorHarmonicRecord", into = "ExteriorHarmonicRecord")]
pub struct ExteriorHarmonic {
    n: usize,
    inner_radius: f64,
    monopole: f64,
    higher: Vec<Multipole>,
    sources: Vec<PointSource>,
    polys: Vec<Polynomial>,
}

impl TryFrom<ExteriorHarmonicRecord> for ExteriorHarmonic {
    type Error = Error;

    fn try_from(r: ExteriorHarmonicRecord) -> Result<Self> {
        Self::new(r.n, r.inner_radius, r.monopole, r.higher, r.sources)
    }
}

impl From<ExteriorHarmonic> for ExteriorHarmonicRecord {
    fn from(u: ExteriorHarmonic) -> Self {
        ExteriorHarmonicRecord {
            n: u.n,
            inner_radius: u.inner_radius,
            monopole: u.monopole,
            higher: u.higher,
            sources: u.sources,
        }
    }
}

impl PartialEq for ExteriorHarmonic {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.inner_radius == other.inner_radius
            && self.monopole == other.monopole
            && self.higher == other.higher
            && self.sources == other.sources
    }
}

impl ExteriorHarmonic {
    pub fn new(
        n: usize,
        inner_radius: f64,
        monopole: f64,
        higher: Vec<Multipole>,
        sources: Vec<PointSource>,
    ) -> Result<Self> {
        let u = Self::unchecked(n, inner_radius, monopole, higher, sources)?;
        u.check_positive()?;
        Ok(u)
    }

    fn unchecked(
        n: usize,
        inner_radius: f64,
        monopole: f64,
        higher: Vec<Multipole>,
        sources: Vec<PointSource>,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("dimension n = {n} must be at least 3")));
        }
        if !(inner_radius > 0.0 && inner_radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "inner radius {inner_radius} must be positive"
            )));
        }
        if !monopole.is_finite() {
            return Err(Error::InvalidParameter("monopole coefficient is not finite".into()));
        }
        let mut polys = Vec::with_capacity(higher.len());
        for term in &higher {
            if term.l == 0 || term.l > MAX_DEGREE {
                return Err(Error::InvalidParameter(format!(
                    "multipole degree {} outside 1..={MAX_DEGREE}",
                    term.l
                )));
            }
            if !term.coeff.is_finite() {
                return Err(Error::InvalidParameter("multipole coefficient is not finite".into()));
            }
            let basis = harmonic_basis(n, term.l);
            let p = basis.get(term.index).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "multipole index {} out of range for degree {} (have {})",
                    term.index,
                    term.l,
                    basis.len()
                ))
            })?;
            polys.push(p.clone());
        }
        for s in &sources {
            if s.location.len() != n {
                return Err(Error::InvalidParameter("point source has wrong dimension".into()));
            }
            if !(s.strength >= 0.0 && s.strength.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "source strength {} must be ≥ 0",
                    s.strength
                )));
            }
            if norm(&s.location) >= inner_radius {
                return Err(Error::InvalidParameter(
                    "point source must lie strictly inside B_R".into(),
                ));
            }
        }
        Ok(Self {
            n,
            inner_radius,
            monopole,
            higher,
            sources,
            polys,
        })
    }

    /// U ≡ 1.
    pub fn flat(n: usize, inner_radius: f64) -> Result<Self> {
        Self::new(n, inner_radius, 0.0, Vec::new(), Vec::new())
    }

    /// U = 1 + c|x|^{2−n}.
    pub fn monopole_only(n: usize, inner_radius: f64, coeff: f64) -> Result<Self> {
        Self::new(n, inner_radius, coeff, Vec::new(), Vec::new())
    }

    /// Conformal factor of the spatial Schwarzschild slice of mass `mass`.
    pub fn schwarzschild(n: usize, inner_radius: f64, mass: f64) -> Result<Self> {
        Self::monopole_only(n, inner_radius, 0.5 * mass)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn monopole(&self) -> f64 {
        self.monopole
    }

    pub fn higher(&self) -> &[Multipole] {
        &self.higher
    }

    pub fn sources(&self) -> &[PointSource] {
        &self.sources
    }

    /// True when the representation has no angular dependence.
    pub fn is_radial(&self) -> bool {
        self.higher.iter().all(|t| t.coeff == 0.0)
            && self
                .sources
                .iter()
                .all(|s| s.strength == 0.0 || norm(&s.location) == 0.0)
    }

    /// Same function with the inner radius replaced (used to re-admit a
    /// function on a smaller or larger exterior region).
    pub fn with_inner_radius(&self, inner_radius: f64) -> Result<Self> {
        Self::new(
            self.n,
            inner_radius,
            self.monopole,
            self.higher.clone(),
            self.sources.clone(),
        )
    }

    fn check_positive(&self) -> Result<()> {
        let dirs = dense_directions(self.n, ADMISSION_DIRECTIONS);
        for factor in [1.0, 1.1, 2.0, 10.0] {
            let r = factor * self.inner_radius;
            for d in &dirs {
                let x: Vec<f64> = d.iter().map(|v| v * r).collect();
                let u = self.value(&x);
                if !(u > ADMISSION_MARGIN) {
                    return Err(Error::NotPositive {
                        value: u,
                        location: format!("{x:?}"),
                    });
                }
            }
        }
        Ok(())
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "point has dimension {} but U lives in ℝ^{}",
                x.len(),
                self.n
            )));
        }
        let r = norm(x);
        if r < self.inner_radius {
            return Err(Error::Domain {
                radius: r,
                inner: self.inner_radius,
            });
        }
        Ok(())
    }

    /// U(x) for |x| ≥ R.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.value(x))
    }

    /// ∇U(x) for |x| ≥ R.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(x)?;
        Ok(self.gradient(x))
    }

    /// All terms of U, with derivatives, at x (no domain check).
    fn jet(&self, x: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let k0 = n as f64 - 2.0;
        let mut v = 1.0;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        let xv = DVector::from_column_slice(x);
        let mut add = |c: f64, pv: f64, pg: DVector<f64>, ph: DMatrix<f64>, y: &DVector<f64>, k: f64| {
            let (wv, wg, wh) = inverse_power(y, k);
            v += c * pv * wv;
            g += (&pg * wv + &wg * pv) * c;
            h += (&ph * wv + &pg * wg.transpose() + &wg * pg.transpose() + &wh * pv) * c;
        };
        if self.monopole != 0.0 {
            add(self.monopole, 1.0, DVector::zeros(n), DMatrix::zeros(n, n), &xv, k0);
        }
        for (term, p) in self.higher.iter().zip(&self.polys) {
            if term.coeff == 0.0 {
                continue;
            }
            let k = k0 + 2.0 * term.l as f64;
            add(
                term.coeff,
                p.eval(x),
                DVector::from_vec(p.gradient(x)),
                p.hessian(x),
                &xv,
                k,
            );
        }
        for s in &self.sources {
            if s.strength == 0.0 {
                continue;
            }
            let y = &xv - DVector::from_column_slice(&s.location);
            add(s.strength, 1.0, DVector::zeros(n), DMatrix::zeros(n, n), &y, k0);
        }
        (v, g, h)
    }

    /// m = 2 · (total coefficient of |x|^{2−n}).
    pub fn mass_from_expansion(&self) -> f64 {
        2.0 * (self.monopole + self.sources.iter().map(|s| s.strength).sum::<f64>())
    }

    /// 1 + (m/2) r^{2−n}: the exact spherical mean on S_r.
    pub fn spherical_average_closed_form(&self, r: f64) -> f64 {
        1.0 + 0.5 * self.mass_from_expansion() * r.powf(2.0 - self.n as f64)
    }

    /// Spherical mean of U over S_r, by quadrature.
    /// Largest |y| over point-source locations (0 without sources).
    pub fn deepest_singularity(&self) -> f64 {
        self.sources.iter().map(|s| norm(&s.location)).fold(0.0, f64::max)
    }

    pub fn spherical_average(&self, r: f64) -> Result<f64> {
        if r < self.inner_radius {
            return Err(Error::Domain {
                radius: r,
                inner: self.inner_radius,
            });
        }
        let q = quadrature_resolution(self.n, r, self.deepest_singularity());
        let sample = SphereSample::product(self.n, q)?.at_radius(r);
        Ok(sample.average(|x| self.value(x)))
    }

    /// sup_{|x|>a} |U(x) − 1|, located on S_a by the maximum principle and
    /// polished by golden-section search around the best sampled direction.
    pub fn sup_deviation(&self, a: f64) -> Result<f64> {
        if a < self.inner_radius {
            return Err(Error::Domain {
                radius: a,
                inner: self.inner_radius,
            });
        }
        if self.is_radial() {
            let mut x = vec![0.0; self.n];
            x[0] = a;
            return Ok((self.value(&x) - 1.0).abs());
        }
        let dirs = dense_directions(self.n, ADMISSION_DIRECTIONS);
        let f = |d: &[f64]| {
            let x: Vec<f64> = d.iter().map(|v| v * a).collect();
            (self.value(&x) - 1.0).abs()
        };
        let (mut best, mut best_val) = (dirs[0].clone(), f(&dirs[0]));
        for d in &dirs[1..] {
            let v = f(d);
            if v > best_val {
                best_val = v;
                best = d.clone();
            }
        }
        let spacing = (unit_sphere_area(self.n) / dirs.len() as f64).powf(1.0 / (self.n - 1) as f64);
        let mut width = 2.0 * spacing;
        for _ in 0..4 {
            for e in tangent_basis(&best) {
                let along =
                    |t: f64| -> Vec<f64> { best.iter().zip(&e).map(|(d, ei)| d * t.cos() + ei * t.sin()).collect() };
                let (t, v) = golden_max(|t| f(&along(t)), -width, width, 1e-12);
                if v > best_val {
                    best_val = v;
                    best = along(t);
                }
            }
            width *= 0.5;
        }
        Ok(best_val)
    }
}

impl ScalarField for ExteriorHarmonic {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let k0 = n as f64 - 2.0;
        let r = norm(x);
        let mut v = 1.0 + self.monopole * r.powf(-k0);
        for (term, p) in self.higher.iter().zip(&self.polys) {
            v += term.coeff * p.eval(x) * r.powf(-(k0 + 2.0 * term.l as f64));
        }
        for s in &self.sources {
            let d: f64 = x
                .iter()
                .zip(&s.location)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            v += s.strength * d.powf(-k0);
        }
        v
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.jet(x).1.iter().copied().collect()
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.jet(x).2
    }
}

/// |y|^{−k} with gradient and Hessian.
fn inverse_power(y: &DVector<f64>, k: f64) -> (f64, DVector<f64>, DMatrix<f64>) {
    let n = y.len();
    let r2 = y.norm_squared();
    let r = r2.sqrt();
    let w = r.powf(-k);
    let g = y * (-k * w / r2);
    let h = DMatrix::identity(n, n) * (-k * w / r2) + y * y.transpose() * (k * (k + 2.0) * w / (r2 * r2));
    (w, g, h)
}

/// Orthonormal basis of the tangent space to the unit sphere at `d`.
pub(crate) fn tangent_basis(d: &[f64]) -> Vec<Vec<f64>> {
    let n = d.len();
    let mut basis: Vec<Vec<f64>> = vec![d.to_vec()];
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        for b in &basis {
            let dot: f64 = e.iter().zip(b).map(|(a, c)| a * c).sum();
            for (ej, bj) in e.iter_mut().zip(b) {
                *ej -= dot * bj;
            }
        }
        let len = norm(&e);
        if len > 1e-8 {
            for ej in &mut e {
                *ej /= len;
            }
            basis.push(e);
        }
        if basis.len() == n {
            break;
        }
    }
    basis.remove(0);
    basis
}

/// Product-grid resolution adequate for integrands with a singularity at
/// distance (r − deepest) from S_r.
pub(crate) fn quadrature_resolution(n: usize, r: f64, deepest: f64) -> usize {
    let gap = ((r - deepest) / r).max(1e-3);
    let base = if n == 3 { 24.0 } else { 16.0 };
    let cap = match n {
        3 => 400.0,
        4 => 64.0,
        5 => 24.0,
        _ => 12.0,
    };
    (base / gap.sqrt()).clamp(base, cap).ceil() as usize
}

/// Exterior Poisson kernel of ℝⁿ ∖ B_r with zero condition at infinity:
/// K(x, y) = (|x|² − r²) / (ω_{n−1} r |x − y|ⁿ) for |y| = r < |x|.
pub fn exterior_poisson_kernel(n: usize, r: f64, x: &[f64], y: &[f64]) -> f64 {
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (x2 - r * r) / (unit_sphere_area(n) * r * d2.powf(0.5 * n as f64))
}

/// Harmonic extension to |x| > r of boundary data on S_r, decaying at
/// infinity: ∫_{S_r} K(x, y) f(y) dμ_y.
pub fn poisson_extend<F: FnMut(&[f64]) -> f64>(n: usize, boundary: F, r: f64, x: &[f64]) -> Result<f64> {
    let rx = norm(x);
    if !(rx > r) {
        return Err(Error::Domain { radius: rx, inner: r });
    }
    let q = quadrature_resolution(n, rx, r * r / rx).max(if n == 3 { 64 } else { 16 });
    let sample = SphereSample::product(n, q)?.at_radius(r);
    Ok(poisson_extend_with(&sample, boundary, x))
}

/// [`poisson_extend`] with a caller-chosen sphere sample (its radius is the
/// boundary radius).
pub fn poisson_extend_with<F: FnMut(&[f64]) -> f64>(sample: &SphereSample, mut boundary: F, x: &[f64]) -> f64 {
    let r = sample.radius;
    sample.integrate(|y| exterior_poisson_kernel(sample.n, r, x, y) * boundary(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1(n: usize, r: f64) -> Vec<f64> {
        let mut x = vec![0.0; n];
        x[0] = r;
        x
    }

    #[test]
    fn eval_examples() {
        let u = ExteriorHarmonic::monopole_only(3, 1.0, 0.5).unwrap();
        assert!((u.eval(&[2.0, 0.0, 0.0]).unwrap() - 1.25).abs() < 1e-15);
        let flat = ExteriorHarmonic::flat(3, 1.0).unwrap();
        assert_eq!(flat.eval(&[0.3, 5.0, -2.0]).unwrap(), 1.0);
        let src = ExteriorHarmonic::new(
            3,
            1.0,
            0.0,
            vec![],
            vec![PointSource {
                location: vec![0.0; 3],
                strength: 0.5,
            }],
        )
        .unwrap();
        assert!((src.eval(&[0.0, 4.0, 0.0]).unwrap() - 1.125).abs() < 1e-15);
    }

    #[test]
    fn eval_inside_ball_is_domain_error() {
        let u = ExteriorHarmonic::monopole_only(3, 2.0, 0.5).unwrap();
        assert!(matches!(u.eval(&[1.0, 0.0, 0.0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn gradient_examples() {
        let flat = ExteriorHarmonic::flat(3, 1.0).unwrap();
        assert!(flat.grad(&[1.5, 2.0, 0.0]).unwrap().iter().all(|&g| g == 0.0));
        let u = ExteriorHarmonic::monopole_only(3, 1.0, 0.5).unwrap();
        let g = u.grad(&[2.0, 0.0, 0.0]).unwrap();
        assert!((g[0] + 0.125).abs() < 1e-15 && g[1] == 0.0 && g[2] == 0.0);
    }

    #[test]
    fn constructors_reject_bad_representations() {
        assert!(ExteriorHarmonic::monopole_only(2, 1.0, 0.5).is_err());
        assert!(ExteriorHarmonic::monopole_only(3, 0.0, 0.5).is_err());
        let deg5 = vec![Multipole {
            l: 5,
            index: 0,
            coeff: 0.1,
        }];
        assert!(ExteriorHarmonic::new(3, 1.0, 0.0, deg5, vec![]).is_err());
        let bad_index = vec![Multipole {
            l: 1,
            index: 3,
            coeff: 0.1,
        }];
        assert!(ExteriorHarmonic::new(3, 1.0, 0.0, bad_index, vec![]).is_err());
        // U = 1 − 2/r is negative on S_1
        assert!(matches!(
            ExteriorHarmonic::monopole_only(3, 1.0, -2.0),
            Err(Error::NotPositive { .. })
        ));
        // dipole strong enough to push U below zero on one side
        let dip = vec![Multipole {
            l: 1,
            index: 0,
            coeff: -1.5,
        }];
        assert!(ExteriorHarmonic::new(3, 1.0, 0.0, dip, vec![]).is_err());
        let outside = vec![PointSource {
            location: vec![1.0, 0.0, 0.0],
            strength: 0.1,
        }];
        assert!(ExteriorHarmonic::new(3, 1.0, 0.0, vec![], outside).is_err());
    }

    #[test]
    fn evaluated_u_is_harmonic() {
        let u = ExteriorHarmonic::new(
            4,
            1.0,
            0.3,
            vec![
                Multipole {
                    l: 2,
                    index: 1,
                    coeff: 0.2,
                },
                Multipole {
                    l: 4,
                    index: 3,
                    coeff: -0.1,
                },
            ],
            vec![PointSource {
                location: vec![0.2, 0.1, 0.0, -0.3],
                strength: 0.05,
            }],
        )
        .unwrap();
        for x in [[1.3, 0.2, -0.7, 0.4], [2.0, 3.0, 1.0, -1.0]] {
            let lap = u.laplacian(&x);
            assert!(lap.abs() < 1e-12, "Δu = {lap}");
        }
    }

    #[test]
    fn spherical_average_examples() {
        let u = ExteriorHarmonic::schwarzschild(3, 1.0, 1.0).unwrap();
        assert!((u.spherical_average(4.0).unwrap() - 1.125).abs() < 1e-13);
        let flat = ExteriorHarmonic::flat(3, 1.0).unwrap();
        assert!((flat.spherical_average(7.0).unwrap() - 1.0).abs() < 1e-14);
        let quad = ExteriorHarmonic::new(
            3,
            1.0,
            0.5,
            vec![Multipole {
                l: 2,
                index: 3,
                coeff: 0.4,
            }],
            vec![],
        )
        .unwrap();
        let base = ExteriorHarmonic::monopole_only(3, 1.0, 0.5).unwrap();
        let d = quad.spherical_average(5.0).unwrap() - base.spherical_average(5.0).unwrap();
        assert!(d.abs() < 1e-10, "difference {d}");
        assert!(matches!(quad.spherical_average(0.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn sup_deviation_examples() {
        let u = ExteriorHarmonic::schwarzschild(3, 1.0, 1.0).unwrap();
        assert!((u.sup_deviation(10.0).unwrap() - 0.05).abs() < 1e-15);
        let flat = ExteriorHarmonic::flat(3, 1.0).unwrap();
        assert_eq!(flat.sup_deviation(3.0).unwrap(), 0.0);
    }

    #[test]
    fn mass_from_expansion_examples() {
        let u = ExteriorHarmonic::monopole_only(3, 1.0, 0.5).unwrap();
        assert_eq!(u.mass_from_expansion(), 1.0);
        assert_eq!(ExteriorHarmonic::flat(3, 1.0).unwrap().mass_from_expansion(), 0.0);
    }

    #[test]
    fn poisson_examples() {
        let v = poisson_extend(3, |_| 1.0, 2.0, &e1(3, 4.0)).unwrap();
        assert!((v - 0.5).abs() < 1e-10, "{v}");
        let w = poisson_extend(3, |y| 0.5 / norm(y), 2.0, &[6.0, 0.0, 0.0]).unwrap();
        assert!((w - 1.0 / 12.0).abs() < 1e-10, "{w}");
        assert!(poisson_extend(3, |_| 1.0, 2.0, &e1(3, 2.0)).is_err());
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let u = ExteriorHarmonic::new(
            3,
            1.0,
            0.1 + 0.2,
            vec![Multipole {
                l: 1,
                index: 2,
                coeff: 1.0 / 3.0,
            }],
            vec![PointSource {
                location: vec![0.1, -0.2, 0.3],
                strength: std::f64::consts::PI / 100.0,
            }],
        )
        .unwrap();
        let text = serde_json::to_string(&u).unwrap();
        let back: ExteriorHarmonic = serde_json::from_str(&text).unwrap();
        assert_eq!(u, back);
        let bad = text.replace("\"monopole\":0.30000000000000004", "\"monopole\":-5.0");
        assert!(serde_json::from_str::<ExteriorHarmonic>(&bad).is_err());
    }
}
