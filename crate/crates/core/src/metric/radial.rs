//! Spherically symmetric metrics g = A(r) dr² + B(r) r² dΩ² sampled on a
//! log-uniform radial grid.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;
use crate::harmonic::ExteriorHarmonic;
use crate::quadrature::{integrate_uniform_samples, lagrange4};
use crate::sphere::unit_sphere_area;

/// What lies below the innermost grid node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Core {
    /// Smooth filled centre: regularity condition at r₀.
    FilledCenter,
    /// A second asymptotically flat end reached as r → 0.
    SecondEnd,
}

impl Core {
    fn as_str(self) -> &'static str {
        match self {
            Core::FilledCenter => "filled-center",
            Core::SecondEnd => "second-end",
        }
    }
}

impl FromStr for Core {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "filled-center" => Ok(Core::FilledCenter),
            "second-end" => Ok(Core::SecondEnd),
            other => Err(Error::Parse(format!("unknown core kind `{other}`"))),
        }
    }
}

/// Log-uniform radial grid r_i = exp(t₀ + i h).
#[derive(Debug, Clone, PartialEq)]
pub struct LogGrid {
    pub r: Vec<f64>,
    pub t0: f64,
    pub h: f64,
}

impl LogGrid {
    pub fn new(r_min: f64, r_max: f64, points_per_decade: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min) {
            return Err(Error::InvalidParameter(format!("bad grid range [{r_min}, {r_max}]")));
        }
        if points_per_decade < 4 {
            return Err(Error::InvalidParameter("need at least 4 points per decade".into()));
        }
        let decades = (r_max / r_min).log10();
        let cells = (decades * points_per_decade as f64).round().max(8.0) as usize;
        let t0 = r_min.ln();
        let h = (r_max.ln() - t0) / cells as f64;
        let r = (0..=cells).map(|i| (t0 + i as f64 * h).exp()).collect();
        Ok(Self { r, t0, h })
    }

    fn from_radii(r: &[f64]) -> Result<Self> {
        if r.len() < 8 {
            return Err(Error::invariant(
                "grid-length",
                format!("{} nodes, need at least 8", r.len()),
            ));
        }
        if r.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::invariant("grid-positive", "radii must be positive and finite"));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invariant("grid-increasing", "radii must be strictly increasing"));
        }
        let t0 = r[0].ln();
        let h = (r[r.len() - 1].ln() - t0) / (r.len() - 1) as f64;
        for (i, &x) in r.iter().enumerate() {
            let dev = (x.ln() - (t0 + i as f64 * h)).abs();
            if dev > 1e-9 * h.max(1e-300) * (r.len() as f64) {
                return Err(Error::invariant(
                    "grid-log-uniform",
                    format!("node {i} deviates from log-uniform spacing by {dev:e}"),
                ));
            }
        }
        Ok(Self { r: r.to_vec(), t0, h })
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.h
    }

    /// Index of the node closest to radius `r` (clamped to the grid).
    pub fn nearest(&self, r: f64) -> usize {
        let s = ((r.ln() - self.t0) / self.h).round();
        s.clamp(0.0, (self.len() - 1) as f64) as usize
    }
}

/// Parameters for building sampled metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_decade: usize,
    /// Decades of grid beyond the flat-end marker.
    pub decades_beyond_flat: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points_per_decade: 64,
            decades_beyond_flat: 4.0,
        }
    }
}

/// Ricci eigenvalues and scalar curvature at every node.
#[derive(Debug, Clone)]
pub struct RadialCurvature {
    /// Eigenvalue of Ric^i_j on the radial direction (multiplicity 1).
    pub radial: Vec<f64>,
    /// Eigenvalue on tangential directions (multiplicity n − 1).
    pub tangential: Vec<f64>,
    pub scalar: Vec<f64>,
}

/// Quantities built from A, B needed by the radial elliptic operator.
#[derive(Debug, Clone)]
pub struct RadialGeometry {
    /// Flux coefficient P = B^{(n−1)/2} r^{n−2} / √A in (P u_t)_t.
    pub flux: Vec<f64>,
    /// Volume weight D = √A B^{(n−1)/2} rⁿ so that dμ = D dt dΩ and
    /// Δ_g u = (P u_t)_t / D.
    pub volume: Vec<f64>,
}

/// g = A(r) dr² + B(r) r² dΩ² on a log-uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMetric {
    n: usize,
    grid: LogGrid,
    a: Vec<f64>,
    b: Vec<f64>,
    r_flat: f64,
    decay_order: f64,
    core: Core,
}

impl RadialMetric {
    pub fn new(
        n: usize,
        grid: LogGrid,
        a: Vec<f64>,
        b: Vec<f64>,
        r_flat: f64,
        decay_order: f64,
        core: Core,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("dimension n = {n} must be at least 3")));
        }
        if a.len() != grid.len() || b.len() != grid.len() {
            return Err(Error::invariant("profile-length", "A, B must match the grid length"));
        }
        for (i, (&ai, &bi)) in a.iter().zip(&b).enumerate() {
            if !(ai > 0.0 && bi > 0.0 && ai.is_finite() && bi.is_finite()) {
                return Err(Error::invariant(
                    "riemannian",
                    format!("A = {ai}, B = {bi} at r = {} (node {i})", grid.r[i]),
                ));
            }
        }
        if !(decay_order > (n as f64 - 2.0) / 2.0) {
            return Err(Error::invariant(
                "decay-order",
                format!("p = {decay_order} must exceed (n−2)/2"),
            ));
        }
        Ok(Self {
            n,
            grid,
            a,
            b,
            r_flat,
            decay_order,
            core,
        })
    }

    /// Sample A and B from functions of r.
    pub fn sample<FA, FB>(
        n: usize,
        grid: LogGrid,
        a: FA,
        b: FB,
        r_flat: f64,
        decay_order: f64,
        core: Core,
    ) -> Result<Self>
    where
        FA: Fn(f64) -> f64,
        FB: Fn(f64) -> f64,
    {
        let av = grid.r.iter().map(|&r| a(r)).collect();
        let bv = grid.r.iter().map(|&r| b(r)).collect();
        Self::new(n, grid, av, bv, r_flat, decay_order, core)
    }

    /// Conformally flat radial metric W(r)^{4/(n−2)} δ.
    pub fn conformal<W: Fn(f64) -> f64>(n: usize, grid: LogGrid, w: W, r_flat: f64, core: Core) -> Result<Self> {
        let e = 4.0 / (n as f64 - 2.0);
        let v: Vec<f64> = grid.r.iter().map(|&r| w(r).powf(e)).collect();
        Self::new(n, grid, v.clone(), v, r_flat, n as f64 - 2.0, core)
    }

    /// Spatial Schwarzschild slice in isotropic coordinates, U = 1 + (m/2) r^{2−n}.
    ///
    /// The grid is symmetric about the neck under the inversion
    /// r ↦ r_h² / r, so the second end is resolved to the same depth.
    pub fn schwarzschild(n: usize, mass: f64, spec: GridSpec) -> Result<Self> {
        if !(mass > 0.0) {
            return Self::flat(n, spec);
        }
        let r_flat = 1.0;
        let r_max = r_flat * 10f64.powf(spec.decades_beyond_flat);
        let r_h = (0.5 * mass).powf(1.0 / (n as f64 - 2.0));
        let r_min = (r_h * r_h / r_max).min(r_flat * 1e-2);
        let grid = LogGrid::new(r_min, r_max, spec.points_per_decade)?;
        let c = 0.5 * mass;
        Self::conformal(n, grid, |r| 1.0 + c * r.powf(2.0 - n as f64), r_flat, Core::SecondEnd)
    }

    /// Euclidean space with a filled centre.
    pub fn flat(n: usize, spec: GridSpec) -> Result<Self> {
        let r_flat = 1.0;
        let r_max = r_flat * 10f64.powf(spec.decades_beyond_flat);
        let grid = LogGrid::new(r_flat * 1e-3, r_max, spec.points_per_decade)?;
        Self::conformal(n, grid, |_| 1.0, r_flat, Core::FilledCenter)
    }

    /// Radial metric induced by a radial exterior harmonic U on [r_min, r_max].
    pub fn from_harmonic(
        u: &ExteriorHarmonic,
        r_min: f64,
        r_max: f64,
        points_per_decade: usize,
        core: Core,
    ) -> Result<Self> {
        if !u.is_radial() {
            return Err(Error::InvalidParameter("U must be radial".into()));
        }
        let n = u.n();
        let c = 0.5 * u.mass_from_expansion();
        let grid = LogGrid::new(r_min, r_max, points_per_decade)?;
        Self::conformal(n, grid, |r| 1.0 + c * r.powf(2.0 - n as f64), u.inner_radius(), core)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &LogGrid {
        &self.grid
    }

    pub fn radii(&self) -> &[f64] {
        &self.grid.r
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn r_flat(&self) -> f64 {
        self.r_flat
    }

    pub fn decay_order(&self) -> f64 {
        self.decay_order
    }

    pub fn core(&self) -> Core {
        self.core
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Same grid and metadata, new profiles.
    pub fn with_profiles(&self, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Self::new(
            self.n,
            self.grid.clone(),
            a,
            b,
            self.r_flat,
            self.decay_order,
            self.core,
        )
    }

    /// Conformal rescaling w^{4/(n−2)} g by sampled w.
    pub fn conformally_rescaled(&self, w: &[f64]) -> Result<Self> {
        if w.len() != self.len() {
            return Err(Error::InvalidParameter("conformal factor length mismatch".into()));
        }
        let e = 4.0 / (self.n as f64 - 2.0);
        let f: Vec<f64> = w.iter().map(|x| x.powf(e)).collect();
        let a = self.a.iter().zip(&f).map(|(a, f)| a * f).collect();
        let b = self.b.iter().zip(&f).map(|(b, f)| b * f).collect();
        self.with_profiles(a, b)
    }

    /// Ricci eigenvalues and scalar curvature at every node. Nodes within two
    /// cells of the edges use one-sided stencils.
    ///
    /// Derivatives are taken of ln A and ln B in t = ln r, which are close to
    /// affine both at the flat end and near a second end, so the truncation
    /// error scales with the curvature rather than with the metric.
    pub fn curvature(&self) -> RadialCurvature {
        let n = self.n as f64;
        let h = self.grid.h;
        let (la, lb) = self.log_profiles();
        let la_t = fd::derivative(&la, h, 1);
        let lb_t = fd::derivative(&lb, h, 1);
        let lb_tt = fd::derivative(&lb, h, 2);
        let len = self.len();
        let mut radial = vec![0.0; len];
        let mut tangential = vec![0.0; len];
        let mut scalar = vec![0.0; len];
        for i in 0..len {
            let r2 = self.grid.r[i].powi(2);
            let (a, b) = (self.a[i], self.b[i]);
            // areal radius ψ = r √B: k = ψ_t / ψ, and ψ_σσ / ψ = q / (A r²)
            let k = 1.0 + 0.5 * lb_t[i];
            let q = k * k + 0.5 * lb_tt[i] - k * (1.0 + 0.5 * la_t[i]);
            let lr = -(n - 1.0) * q / (a * r2);
            let lt = -q / (a * r2) + (n - 2.0) * (1.0 / b - k * k / a) / r2;
            radial[i] = lr;
            tangential[i] = lt;
            scalar[i] = lr + (n - 1.0) * lt;
        }
        RadialCurvature {
            radial,
            tangential,
            scalar,
        }
    }

    fn log_profiles(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.a.iter().map(|x| x.ln()).collect(),
            self.b.iter().map(|x| x.ln()).collect(),
        )
    }

    fn check_margin(&self, i: usize) -> Result<()> {
        if i >= self.len() || !fd::has_centered_margin(i, self.len(), 2) {
            return Err(Error::Margin {
                index: i,
                needed: 2,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// Scalar curvature at node `i` (centred stencils only).
    pub fn scalar_curvature_at(&self, i: usize) -> Result<f64> {
        self.check_margin(i)?;
        Ok(self.curvature().scalar[i])
    }

    /// (radial, tangential) Ricci eigenvalues at node `i`.
    pub fn ricci_at(&self, i: usize) -> Result<(f64, f64)> {
        self.check_margin(i)?;
        let c = self.curvature();
        Ok((c.radial[i], c.tangential[i]))
    }

    /// Cubic interpolation of a node profile at radius `r`, requiring the
    /// interpolation stencil to avoid the one-sided edge nodes.
    pub fn interpolate(&self, profile: &[f64], r: f64) -> Result<f64> {
        let s = (r.ln() - self.grid.t0) / self.grid.h;
        let cell = s.floor();
        if !(cell >= 2.0 && cell + 3.0 < self.len() as f64 - 2.0) {
            return Err(Error::Margin {
                index: cell.max(0.0) as usize,
                needed: 3,
                len: self.len(),
            });
        }
        let start = cell as usize - 1;
        Ok(lagrange4(&profile[start..start + 4], s - start as f64))
    }

    /// Scalar curvature at an arbitrary radius.
    pub fn scalar_curvature(&self, r: f64) -> Result<f64> {
        let c = self.curvature();
        self.interpolate(&c.scalar, r)
    }

    /// (radial, tangential) Ricci eigenvalues at an arbitrary radius.
    pub fn ricci(&self, r: f64) -> Result<(f64, f64)> {
        let c = self.curvature();
        Ok((self.interpolate(&c.radial, r)?, self.interpolate(&c.tangential, r)?))
    }

    pub fn geometry(&self) -> RadialGeometry {
        let n = self.n as f64;
        let mut flux = Vec::with_capacity(self.len());
        let mut volume = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let r = self.grid.r[i];
            let sa = self.a[i].sqrt();
            let bp = self.b[i].powf(0.5 * (n - 1.0));
            flux.push(bp * r.powf(n - 2.0) / sa);
            volume.push(sa * bp * r.powf(n));
        }
        RadialGeometry { flux, volume }
    }

    /// Coefficients (P/D, (ln P)_t) with Δ_g u = (P/D)(u_tt + (ln P)_t u_t).
    pub fn laplacian_coefficients(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as f64;
        let geo = self.geometry();
        let (la, lb) = self.log_profiles();
        let la_t = fd::derivative(&la, self.grid.h, 1);
        let lb_t = fd::derivative(&lb, self.grid.h, 1);
        let ratio = geo.flux.iter().zip(&geo.volume).map(|(p, d)| p / d).collect();
        let lp_t = (0..self.len())
            .map(|i| 0.5 * (n - 1.0) * lb_t[i] + (n - 2.0) - 0.5 * la_t[i])
            .collect();
        (ratio, lp_t)
    }

    /// Δ_g u at every node for a sampled radial function u.
    pub fn laplacian_profile(&self, u: &[f64]) -> Vec<f64> {
        let h = self.grid.h;
        let (ratio, lp_t) = self.laplacian_coefficients();
        let u_t = fd::derivative(u, h, 1);
        let u_tt = fd::derivative(u, h, 2);
        (0..self.len())
            .map(|i| ratio[i] * (u_tt[i] + lp_t[i] * u_t[i]))
            .collect()
    }

    /// L_g u = Δ_g u − ((n−2)/(4(n−1))) R_g u at node `i`.
    pub fn conformal_laplacian_apply(&self, u: &[f64], i: usize) -> Result<f64> {
        self.check_margin(i)?;
        if u.len() != self.len() {
            return Err(Error::InvalidParameter("sampled function length mismatch".into()));
        }
        let lap = self.laplacian_profile(u)[i];
        let r = self.curvature().scalar[i];
        Ok(lap - super::conformal_coupling(self.n) * r * u[i])
    }

    /// ω_{n−1} ∫_{ρ₁}^{ρ₂} weight(r) f(r) dμ-density for a node profile f,
    /// with a coarse-grid error estimate.
    pub fn integrate_radial(&self, f: &[f64], rho1: f64, rho2: f64) -> (f64, f64) {
        let geo = self.geometry();
        let g: Vec<f64> = f.iter().zip(&geo.volume).map(|(a, b)| a * b).collect();
        let (ta, tb) = (rho1.ln(), rho2.ln());
        let omega = unit_sphere_area(self.n);
        let fine = integrate_uniform_samples(self.grid.t0, self.grid.h, &g, ta, tb);
        let coarse_samples: Vec<f64> = g.iter().step_by(2).copied().collect();
        let coarse = if coarse_samples.len() >= 4 {
            integrate_uniform_samples(self.grid.t0, 2.0 * self.grid.h, &coarse_samples, ta, tb)
        } else {
            fine
        };
        (omega * fine, omega * (fine - coarse).abs() / 15.0)
    }

    /// ∫_{ρ₁<r<ρ₂} weight(r) |Ric|²_g dμ_g and an error estimate.
    pub fn ricci_norm_sq_integral<W: Fn(f64) -> f64>(&self, rho1: f64, rho2: f64, weight: W) -> (f64, f64) {
        let c = self.curvature();
        let n = self.n as f64;
        let f: Vec<f64> = (0..self.len())
            .map(|i| weight(self.grid.r[i]) * (c.radial[i].powi(2) + (n - 1.0) * c.tangential[i].powi(2)))
            .collect();
        self.integrate_radial(&f, rho1, rho2)
    }

    /// Conformal factor U = B^{(n−2)/4} of the end, fitted as a monopole
    /// 1 + c r^{2−n} on nodes with r ≥ r_flat (edge nodes excluded).
    /// Returns the harmonic and the max absolute fit residual.
    pub fn end_harmonic(&self) -> Result<(ExteriorHarmonic, f64)> {
        let n = self.n as f64;
        let idx: Vec<usize> = (0..self.len() - 3)
            .filter(|&i| self.grid.r[i] >= self.r_flat * (1.0 - 1e-12))
            .collect();
        if idx.len() < 4 {
            return Err(Error::invariant("harmonically-flat-end", "too few nodes beyond r_flat"));
        }
        let mut anis: f64 = 0.0;
        let mut num = 0.0;
        let mut den = 0.0;
        let mut samples = Vec::with_capacity(idx.len());
        for &i in &idx {
            let r = self.grid.r[i];
            anis = anis.max((self.a[i] / self.b[i] - 1.0).abs());
            let u = self.b[i].powf((n - 2.0) / 4.0);
            let basis = r.powf(2.0 - n);
            num += basis * (u - 1.0);
            den += basis * basis;
            samples.push((basis, u));
        }
        let c = num / den;
        let resid = samples
            .iter()
            .map(|&(basis, u)| (u - 1.0 - c * basis).abs())
            .fold(0.0, f64::max);
        let u = ExteriorHarmonic::monopole_only(self.n, self.r_flat, c)?;
        Ok((u, resid.max(anis)))
    }

    /// Checks the stored invariants that are not enforced by construction:
    /// decay of A − 1, B − 1 with the declared order, decay of the scalar
    /// curvature faster than r^{−n}, and a harmonically flat end.
    pub fn validate(&self) -> Result<()> {
        let n = self.n as f64;
        let len = self.len();
        let r_max = self.grid.r[len - 1];
        let lo = r_max / 1e3;
        let idx: Vec<usize> = (2..len - 2).filter(|&i| self.grid.r[i] >= lo).collect();
        if idx.len() < 2 {
            return Err(Error::invariant(
                "decay-window",
                "grid does not span three outer decades",
            ));
        }
        let p = self.decay_order;
        // |g − δ| must actually decay across the window at rate ≥ p
        let i0 = idx[0];
        let i1 = *idx.last().unwrap();
        let d0 = (self.a[i0] - 1.0).abs().max((self.b[i0] - 1.0).abs());
        let d1 = (self.a[i1] - 1.0).abs().max((self.b[i1] - 1.0).abs());
        if d0 > 1e-12 {
            let rate = (d0 / d1.max(1e-300)).ln() / (self.grid.r[i1] / self.grid.r[i0]).ln();
            if rate < p - 0.05 && d1 > 1e-12 {
                return Err(Error::invariant(
                    "decay-order",
                    format!("observed decay rate {rate:.3} below declared p = {p}"),
                ));
            }
        }
        let curv = self.curvature();
        // R must be small against the Ricci scale, which itself is O(r^{−n});
        // nodes where g − δ is near roundoff carry no curvature information
        let idx: Vec<usize> = idx
            .into_iter()
            .filter(|&i| (self.a[i] - 1.0).abs().max((self.b[i] - 1.0).abs()) > 1e-9)
            .collect();
        let ric_scale = idx
            .iter()
            .map(|&i| curv.radial[i].abs().max(curv.tangential[i].abs()) * self.grid.r[i].powf(n))
            .fold(0.0, f64::max);
        for &i in &idx {
            let r = self.grid.r[i];
            if (curv.scalar[i] * r.powf(n)).abs() > 1e-2 * ric_scale + 1e-12 {
                return Err(Error::invariant(
                    "scalar-curvature-decay",
                    format!("|R| rⁿ = {:e} at r = {r}", (curv.scalar[i] * r.powf(n)).abs()),
                ));
            }
        }
        let (_, resid) = self.end_harmonic()?;
        if resid > 1e-6 {
            return Err(Error::invariant(
                "harmonically-flat-end",
                format!("metric differs from a harmonic conformal end by {resid:e} beyond r_flat"),
            ));
        }
        Ok(())
    }

    /// Columnar text table with a metadata header.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# massflow radial-metric").unwrap();
        writeln!(out, "# n = {}", self.n).unwrap();
        writeln!(out, "# r_flat = {}", self.r_flat).unwrap();
        writeln!(out, "# decay_order = {}", self.decay_order).unwrap();
        writeln!(out, "# core = {}", self.core.as_str()).unwrap();
        writeln!(out, "r,A,B").unwrap();
        for i in 0..self.len() {
            writeln!(out, "{:e},{:e},{:e}", self.grid.r[i], self.a[i], self.b[i]).unwrap();
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut n = None;
        let mut r_flat = None;
        let mut p = None;
        let mut core = Core::FilledCenter;
        let (mut r, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once('=') {
                    let v = v.trim();
                    let num = || {
                        v.parse::<f64>()
                            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
                    };
                    match k.trim() {
                        "n" => n = Some(v.parse::<usize>().map_err(|e| Error::Parse(format!("n: {e}")))?),
                        "r_flat" => r_flat = Some(num()?),
                        "decay_order" => p = Some(num()?),
                        "core" => core = v.parse()?,
                        _ => {}
                    }
                }
                continue;
            }
            if line.starts_with('r') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 columns", lineno + 1)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            r.push(parse(cols[0])?);
            a.push(parse(cols[1])?);
            b.push(parse(cols[2])?);
        }
        let n = n.ok_or_else(|| Error::Parse("missing `n` header".into()))?;
        let r_flat = r_flat.ok_or_else(|| Error::Parse("missing `r_flat` header".into()))?;
        let p = p.ok_or_else(|| Error::Parse("missing `decay_order` header".into()))?;
        let grid = LogGrid::from_radii(&r)?;
        let mut metric = Self::new(n, grid, a, b, r_flat, p, core)?;
        // keep the exact stored radii
        metric.grid.r = r;
        Ok(metric)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::RadialField;
    use crate::metric::ConformallyFlatMetric;
    use std::sync::Arc;

    #[test]
    fn isotropic_schwarzschild_is_scalar_flat() {
        for n in [3, 4, 5] {
            let g = RadialMetric::schwarzschild(n, 1.0, GridSpec::default()).unwrap();
            let c = g.curvature();
            // two decades either side of the neck, away from roundoff-level curvature
            let worst = (3..g.len() - 3)
                .filter(|&i| (1e-2..1e2).contains(&g.radii()[i]))
                .map(|i| c.scalar[i].abs() / c.radial[i].abs().max(c.tangential[i].abs()))
                .fold(0.0, f64::max);
            assert!(worst < 1e-3, "n = {n}: |R|/|Ric| up to {worst:e}");
            g.validate().unwrap();
        }
    }

    #[test]
    fn areal_schwarzschild_has_vanishing_scalar_curvature() {
        let m = 1.0;
        let grid = LogGrid::new(3.0, 1e4, 200).unwrap();
        let g = RadialMetric::sample(
            3,
            grid,
            |r| 1.0 / (1.0 - 2.0 * m / r),
            |_| 1.0,
            3.0,
            1.0,
            Core::FilledCenter,
        )
        .unwrap();
        let i = g.grid().nearest(10.0);
        let r = g.scalar_curvature_at(i).unwrap();
        assert!(r.abs() < 1e-8, "R(10) = {r:e}");
        // Ric = (m/r³) diag(−2, 1, 1) in orthonormal frame
        let (lr, lt) = g.ricci_at(i).unwrap();
        let ri = g.radii()[i];
        assert!((lr + 2.0 * m / ri.powi(3)).abs() < 1e-7);
        assert!((lt - m / ri.powi(3)).abs() < 1e-7);
    }

    #[test]
    fn round_sphere_cap_curvature() {
        // stereographic round metric 4/(1+r²)² δ has Ric = (n−1) g
        let n = 3;
        let grid = LogGrid::new(0.05, 5.0, 200).unwrap();
        let f = |r: f64| 4.0 / (1.0 + r * r).powi(2);
        let g = RadialMetric::sample(n, grid, f, f, 10.0, 1.0, Core::FilledCenter).unwrap();
        let c = g.curvature();
        for i in 5..g.len() - 5 {
            assert!((c.radial[i] - 2.0).abs() < 1e-6, "{}", c.radial[i]);
            assert!((c.tangential[i] - 2.0).abs() < 1e-6);
            assert!((c.scalar[i] - 6.0).abs() < 3e-6);
        }
    }

    #[test]
    fn agrees_with_cartesian_conformal_formula() {
        let n = 4;
        let profile = |r: f64| {
            let e = (-r * r).exp();
            (1.0 + 0.3 * e, -0.6 * r * e, 0.3 * e * (4.0 * r * r - 2.0))
        };
        let grid = LogGrid::new(0.1, 20.0, 256).unwrap();
        let g = RadialMetric::conformal(n, grid, |r| profile(r).0, 5.0, Core::FilledCenter).unwrap();
        let field = Arc::new(RadialField { n, profile });
        let cf = ConformallyFlatMetric::from_field(field, 0.0).unwrap();
        let curv = g.curvature();
        for i in (10..g.len() - 10).step_by(37) {
            let r = g.radii()[i];
            let mut x = vec![0.0; n];
            x[0] = r;
            let comps = cf.components(&x).unwrap();
            let ric = cf.ricci(&x).unwrap();
            let scale = comps[(0, 0)];
            assert!((ric[(0, 0)] / scale - curv.radial[i]).abs() < 1e-6);
            assert!((ric[(1, 1)] / scale - curv.tangential[i]).abs() < 1e-6);
            assert!((cf.scalar_curvature(&x).unwrap() - curv.scalar[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn laplacian_of_radial_power() {
        // flat: Δ r² = 2n
        let grid = LogGrid::new(0.01, 100.0, 64).unwrap();
        let g = RadialMetric::sample(5, grid, |_| 1.0, |_| 1.0, 1.0, 3.0, Core::FilledCenter).unwrap();
        let u: Vec<f64> = g.radii().iter().map(|r| r * r).collect();
        let lap = g.laplacian_profile(&u);
        for v in &lap[3..lap.len() - 3] {
            assert!((v - 10.0).abs() < 1e-4, "{v}");
        }
    }

    #[test]
    fn table_round_trip_is_exact() {
        let g = RadialMetric::schwarzschild(3, 0.7, GridSpec::default()).unwrap();
        let text = g.to_table();
        let back = RadialMetric::from_table(&text).unwrap();
        assert_eq!(g, back);
        assert_eq!(back.core(), Core::SecondEnd);
    }

    #[test]
    fn validation_names_the_inconsistency() {
        let g = RadialMetric::schwarzschild(3, 1.0, GridSpec::default()).unwrap();
        let mut a = g.a().to_vec();
        let k = a.len() - 20;
        a[k] *= 1.01;
        let bad = g.with_profiles(a, g.b().to_vec()).unwrap();
        let err = bad.validate().unwrap_err().to_string();
        assert!(
            err.contains("scalar-curvature-decay") || err.contains("harmonically-flat-end"),
            "{err}"
        );

        let text = g.to_table().replacen("decay_order = 1", "decay_order = 0.25", 1);
        let err = RadialMetric::from_table(&text).unwrap_err().to_string();
        assert!(err.contains("decay-order"), "{err}");

        let mut b = g.b().to_vec();
        b[10] = -1.0;
        let err = g.with_profiles(g.a().to_vec(), b).unwrap_err().to_string();
        assert!(err.contains("riemannian"), "{err}");
    }

    #[test]
    fn margin_is_enforced() {
        let g = RadialMetric::flat(3, GridSpec::default()).unwrap();
        assert!(matches!(g.scalar_curvature_at(0), Err(Error::Margin { .. })));
        assert!(matches!(g.scalar_curvature_at(g.len() - 1), Err(Error::Margin { .. })));
        assert!(g.scalar_curvature_at(2).is_ok());
    }
}
