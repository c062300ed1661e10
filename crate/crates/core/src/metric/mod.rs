//! Metrics, curvature and the conformal Laplacian.
//!
//! Sign convention: Δ = div grad, so Δ|x|² = 2n in flat space, and the
//! conformal Laplacian is L_g = Δ_g − ((n−2)/(4(n−1))) R_g throughout.

mod bump;
mod conformal;
mod radial;

pub use bump::ConformalBump;

pub use conformal::{conformal_coupling, conformal_ricci, ConformallyFlatMetric};
pub use radial::{Core, GridSpec, LogGrid, RadialCurvature, RadialGeometry, RadialMetric};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::harmonic::ExteriorHarmonic;
use crate::quadrature::CompositeRule;
use crate::sphere::SphereSample;

/// Value of a shell integral with a refinement-based error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn shell_integral<F: Fn(&[f64]) -> f64>(n: usize, rho1: f64, rho2: f64, panels: usize, radial_sym: bool, f: &F) -> f64 {
    let rule = CompositeRule::geometric(rho1, rho2, panels, 4);
    if radial_sym {
        let omega = crate::sphere::unit_sphere_area(n);
        return omega
            * rule.integrate(|r| {
                let mut x = vec![0.0; n];
                x[0] = r;
                f(&x) * r.powi(n as i32 - 1)
            });
    }
    let q = if n == 3 { 24 } else { 10 };
    let sphere = SphereSample::product(n, q).expect("valid sphere sample");
    rule.integrate(|r| sphere.at_radius(r).integrate(f))
}

/// ∫_{ρ₁<|x|<ρ₂} weight(|x|) |Ric|²_g dμ_g for a conformally flat metric,
/// by a radial composite Gauss rule times sphere quadrature.
pub fn ricci_norm_sq_integral<W: Fn(f64) -> f64>(
    g: &ConformallyFlatMetric,
    rho1: f64,
    rho2: f64,
    weight: W,
) -> Result<Estimate> {
    if rho1 < g.inner_radius() || rho2 <= rho1 {
        return Err(Error::Domain {
            radius: rho1,
            inner: g.inner_radius(),
        });
    }
    let radial = g.harmonic().map(|u| u.is_radial()).unwrap_or(false);
    let f = |x: &[f64]| {
        let r = crate::field::norm(x);
        weight(r) * g.ricci_norm_sq(x).unwrap_or(0.0) * g.volume_density(x)
    };
    let panels = 16;
    let fine = shell_integral(g.n(), rho1, rho2, 2 * panels, radial, &f);
    let coarse = shell_integral(g.n(), rho1, rho2, panels, radial, &f);
    Ok(Estimate {
        value: fine,
        error: (fine - coarse).abs(),
    })
}

/// ∫_{B_{3a} ∖ B_{a/2}} |∇U|⁴ dx (Euclidean).
pub fn grad_u_fourth_integral(u: &ExteriorHarmonic, a: f64) -> Result<Estimate> {
    grad_u_fourth_integral_with(u, a, 8)
}

/// [`grad_u_fourth_integral`] with an explicit radial panel count; the error
/// estimate compares against half as many panels.
pub fn grad_u_fourth_integral_with(u: &ExteriorHarmonic, a: f64, panels: usize) -> Result<Estimate> {
    if a / 2.0 < u.inner_radius() {
        return Err(Error::Domain {
            radius: a / 2.0,
            inner: u.inner_radius(),
        });
    }
    let f = |x: &[f64]| {
        let g = u.gradient(x);
        let s: f64 = g.iter().map(|v| v * v).sum();
        s * s
    };
    let fine = shell_integral(u.n(), 0.5 * a, 3.0 * a, 2 * panels, u.is_radial(), &f);
    let coarse = shell_integral(u.n(), 0.5 * a, 3.0 * a, panels, u.is_radial(), &f);
    Ok(Estimate {
        value: fine,
        error: (fine - coarse).abs(),
    })
}

/// L_g w for a conformally flat metric and a smooth field.
pub fn conformal_laplacian_apply(g: &ConformallyFlatMetric, w: &dyn ScalarField, x: &[f64]) -> Result<f64> {
    g.conformal_laplacian_apply(w, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Product;
    use crate::harmonic::{Multipole, PointSource};
    use std::sync::Arc;

    fn lumpy() -> ExteriorHarmonic {
        ExteriorHarmonic::new(
            3,
            1.0,
            0.4,
            vec![
                Multipole {
                    l: 1,
                    index: 2,
                    coeff: 0.05,
                },
                Multipole {
                    l: 2,
                    index: 0,
                    coeff: -0.03,
                },
            ],
            vec![PointSource {
                location: vec![0.2, -0.1, 0.3],
                strength: 0.1,
            }],
        )
        .unwrap()
    }

    fn points() -> Vec<Vec<f64>> {
        vec![vec![1.3, 0.2, -0.4], vec![-2.0, 3.0, 0.5], vec![0.1, -0.2, 7.0]]
    }

    #[test]
    fn harmonic_factor_is_scalar_flat() {
        let g = ConformallyFlatMetric::from_harmonic(lumpy());
        for x in points() {
            let r = g.scalar_curvature(&x).unwrap();
            assert!(r.abs() < 1e-10, "R = {r:e}");
            assert!(g.ricci_trace(&x).unwrap().abs() < 1e-10);
            let ric = g.ricci(&x).unwrap();
            assert_eq!(ric, ric.transpose());
        }
    }

    #[test]
    fn ricci_trace_matches_scalar_curvature() {
        let profile = |r: f64| {
            let e = (-r * r / 4.0).exp();
            (1.0 + 0.5 * e, -0.25 * r * e, 0.5 * e * (r * r / 4.0 - 0.5))
        };
        let field = Arc::new(crate::field::RadialField { n: 3, profile });
        let g = ConformallyFlatMetric::from_field(field, 0.0).unwrap();
        for x in points() {
            let (r, t) = (g.scalar_curvature(&x).unwrap(), g.ricci_trace(&x).unwrap());
            assert!((r - t).abs() < 1e-12 * (1.0 + r.abs()), "{r} vs {t}");
        }
    }

    #[test]
    fn conformal_covariance() {
        let u = lumpy();
        let w_profile = |r: f64| {
            let e = (-r).exp();
            (1.0 + 0.3 * e, -0.3 * e, 0.3 * e)
        };
        let w = crate::field::RadialField {
            n: 3,
            profile: w_profile,
        };
        let g = ConformallyFlatMetric::from_harmonic(u.clone());
        let composed = ConformallyFlatMetric::from_field(
            Arc::new(OwnedProduct {
                u: u.clone(),
                w: crate::field::RadialField {
                    n: 3,
                    profile: w_profile,
                },
            }),
            1.0,
        )
        .unwrap();
        for x in points() {
            let lhs = composed.scalar_curvature(&x).unwrap();
            let wx = w.value(&x);
            let rhs = -8.0 * wx.powi(-5) * g.conformal_laplacian_apply(&w, &x).unwrap();
            assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1e-12), "{lhs} vs {rhs}");
        }
        // the borrowed product gives the same value
        let x = &points()[0];
        let p = Product { left: &u, right: &w };
        assert!((p.value(x) - u.value(x) * w.value(x)).abs() < 1e-15);
    }

    struct OwnedProduct<F: Fn(f64) -> (f64, f64, f64) + Send + Sync> {
        u: ExteriorHarmonic,
        w: crate::field::RadialField<F>,
    }

    impl<F: Fn(f64) -> (f64, f64, f64) + Send + Sync> crate::field::ScalarField for OwnedProduct<F> {
        fn dim(&self) -> usize {
            3
        }
        fn value(&self, x: &[f64]) -> f64 {
            Product {
                left: &self.u,
                right: &self.w,
            }
            .value(x)
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            Product {
                left: &self.u,
                right: &self.w,
            }
            .gradient(x)
        }
        fn hessian(&self, x: &[f64]) -> nalgebra::DMatrix<f64> {
            Product {
                left: &self.u,
                right: &self.w,
            }
            .hessian(x)
        }
    }

    #[test]
    fn conformal_laplacian_trivial_cases() {
        let g = ConformallyFlatMetric::from_harmonic(ExteriorHarmonic::flat(3, 1.0).unwrap());
        let one = ExteriorHarmonic::flat(3, 1.0).unwrap();
        let green = ExteriorHarmonic::monopole_only(3, 1.0, 1.0).unwrap();
        for x in points() {
            assert_eq!(conformal_laplacian_apply(&g, &one, &x).unwrap(), 0.0);
            assert!(conformal_laplacian_apply(&g, &green, &x).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn grad_u_fourth_closed_form() {
        let u = ExteriorHarmonic::schwarzschild(3, 1.0, 1.0).unwrap();
        let est = grad_u_fourth_integral(&u, 3.0).unwrap();
        // ∫ 4π r² / (16 r⁸) dr on [1.5, 9]
        let exact = std::f64::consts::PI / 20.0 * (1.5f64.powi(-5) - 9f64.powi(-5));
        assert!((est.value - exact).abs() < 1e-10, "{} vs {exact}", est.value);
        let flat = ExteriorHarmonic::flat(3, 1.0).unwrap();
        assert_eq!(grad_u_fourth_integral(&flat, 3.0).unwrap().value, 0.0);
        assert!(grad_u_fourth_integral(&u, 1.0).is_err());
    }

    #[test]
    fn grad_u_fourth_refinement_is_fourth_order() {
        let u = ExteriorHarmonic::schwarzschild(3, 1.0, 1.0).unwrap();
        let exact = std::f64::consts::PI / 20.0 * (1.5f64.powi(-5) - 9f64.powi(-5));
        let errs: Vec<f64> = [1, 2, 4]
            .iter()
            .map(|&p| (grad_u_fourth_integral_with(&u, 3.0, p).unwrap().value - exact).abs())
            .collect();
        assert!(errs[0] / errs[1] >= 4.0 && errs[1] / errs[2] >= 4.0, "{errs:?}");
        let lumpy = lumpy().with_inner_radius(1.0).unwrap();
        let a = grad_u_fourth_integral_with(&lumpy, 2.0, 2).unwrap();
        let b = grad_u_fourth_integral_with(&lumpy, 2.0, 4).unwrap();
        assert!(b.error <= a.error / 4.0, "{} {}", a.error, b.error);
    }

    #[test]
    fn ricci_integral_radial_and_cartesian_agree() {
        let u = ExteriorHarmonic::schwarzschild(3, 1.0, 1.0).unwrap();
        let g = ConformallyFlatMetric::from_harmonic(u.clone());
        let cart = ricci_norm_sq_integral(&g, 1.0, 50.0, |_| 1.0).unwrap();
        let radial = RadialMetric::from_harmonic(&u, 0.05, 1e3, 128, Core::FilledCenter).unwrap();
        let (v, _) = radial.ricci_norm_sq_integral(1.0, 50.0, |_| 1.0);
        assert!((cart.value - v).abs() < 1e-6 * cart.value, "{} vs {v}", cart.value);
    }
}
