use approx::assert_relative_eq;
use proptest::prelude::*;

use massflow::deformation::{deform, mdot0_formula, Cutoff};
use massflow::experiments::criteria::random_harmonic;
use massflow::experiments::{Family, Scenario};
use massflow::harmonic::{poisson_extend, ExteriorHarmonic};
use massflow::mass::adm_mass;
use massflow::metric::{ConformallyFlatMetric, GridSpec, LogGrid, RadialMetric};
use massflow::norms::{barrier_laplacian_closed_form, weighted_norm, RadialSamples, WeightedNormSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid() -> LogGrid {
    LogGrid::new(1.0, 1e3, 48).unwrap()
}

/// Smooth decaying profiles c₀ r^σ₀ + c₁ r^σ₁ sin(log r).
fn profile(c: [f64; 2], s: [f64; 2]) -> RadialSamples {
    RadialSamples::from_fn(3, grid(), move |r| {
        c[0] * r.powf(s[0]) + c[1] * r.powf(s[1]) * r.ln().sin()
    })
}

fn coeffs() -> impl Strategy<Value = [f64; 2]> {
    [-2.0..2.0f64, -2.0..2.0f64]
}

fn powers() -> impl Strategy<Value = [f64; 2]> {
    [-0.9..-0.1f64, -2.0..-0.5f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weighted_norm_is_a_norm(c1 in coeffs(), s1 in powers(), c2 in coeffs(), s2 in powers(), t in -5.0..5.0f64, k in 0usize..3) {
        let spec = WeightedNormSpec::new(3, -0.5, 0.5, k, 2.0).unwrap();
        let u = profile(c1, s1);
        let v = profile(c2, s2);
        let sum = RadialSamples::new(3, grid(), u.values.iter().zip(&v.values).map(|(a, b)| a + b).collect()).unwrap();
        let scaled = RadialSamples::new(3, grid(), u.values.iter().map(|a| t * a).collect()).unwrap();
        let nu = weighted_norm(&u, &spec).unwrap();
        let nv = weighted_norm(&v, &spec).unwrap();
        prop_assert!(nu >= 0.0);
        prop_assert!(weighted_norm(&sum, &spec).unwrap() <= (nu + nv) * (1.0 + 1e-12) + 1e-15);
        prop_assert!((weighted_norm(&scaled, &spec).unwrap() - t.abs() * nu).abs() <= 1e-10 * (1.0 + nu * t.abs()));
    }

    #[test]
    fn cutoff_is_a_bump(a in 3.5..50.0f64, t in 0.0..1.0f64) {
        let c = Cutoff::new(a).unwrap();
        let (lo, hi) = c.support();
        let r = t * 5.0 * a;
        let v = c.eval(r);
        prop_assert!((0.0..=1.0).contains(&v));
        if r <= lo || r >= hi {
            prop_assert_eq!(v, 0.0);
            prop_assert_eq!(c.derivative(r), 0.0);
        }
        if (a / 2.0..=3.0 * a).contains(&r) {
            prop_assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn first_variation_is_nonnegative(m in 1e-4..2.0f64, a in 3.5..20.0f64) {
        let g = RadialMetric::schwarzschild(3, m, GridSpec::default()).unwrap();
        let fv = mdot0_formula(&g, &Cutoff::new(a).unwrap());
        prop_assert!(fv.value > 0.0);
        prop_assert!(fv.annulus_lower_bound >= 0.0 && fv.annulus_lower_bound <= fv.value);
    }

    #[test]
    fn deformation_leaves_exterior_untouched(m in 0.01..1.0f64, s in -1.0..1.0f64) {
        let g = RadialMetric::schwarzschild(3, m, GridSpec::default()).unwrap();
        let c = Cutoff::new(5.0).unwrap();
        let h = deform(&g, s, &c).unwrap();
        let (lo, hi) = c.support();
        for (i, &r) in g.radii().iter().enumerate() {
            if r < lo || r > hi {
                prop_assert_eq!(h.a()[i], g.a()[i]);
                prop_assert_eq!(h.b()[i], g.b()[i]);
            }
        }
    }

    #[test]
    fn harmonic_ends_are_scalar_flat(seed in 0u64..1000, t in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_harmonic(&mut rng, 3);
        let g = ConformallyFlatMetric::from_harmonic(u);
        let r = 1.1 + 30.0 * t;
        let x = [0.6 * r, -0.48 * r, 0.64 * r];
        prop_assert!(g.scalar_curvature(&x).unwrap().abs() < 1e-10);
    }

    #[test]
    fn poisson_extension_of_constants(r in 0.5..5.0f64, f in 1.05..20.0f64, c in -3.0..3.0f64) {
        let x = [0.0, r * f, 0.0];
        let v = poisson_extend(3, |_| c, r, &x).unwrap();
        prop_assert!((v - c / f).abs() < 1e-8 * (1.0 + c.abs()));
    }

    #[test]
    fn barrier_is_subharmonic(m in 0.0..2.0f64, sigma in -0.95..-0.05f64, r in 2.5..100.0f64) {
        let u = ExteriorHarmonic::schwarzschild(3, 1.0, m).unwrap();
        prop_assert!(barrier_laplacian_closed_form(&u, sigma, &[r, 0.0, 0.0]).unwrap() > 0.0);
    }

    #[test]
    fn scenario_toml_round_trip(masses in prop::collection::vec(1e-3..2.0f64, 0..6), a in 3.5..20.0f64, seed in any::<u64>()) {
        let s = Scenario {
            name: "p".into(),
            n: 3,
            a,
            grid: GridSpec::default(),
            flow_points: 9,
            gamma_factor: 1.01,
            epsilons: vec![0.1],
            seed,
            family: Family::Schwarzschild { masses },
        };
        let back = Scenario::from_toml(&s.to_toml()).unwrap();
        prop_assert_eq!(back.hash(), s.hash());
        prop_assert_eq!(back, s);
    }
}

#[test]
fn mass_is_stable_under_table_round_trip() {
    let g = RadialMetric::schwarzschild(3, 0.3, GridSpec::default()).unwrap();
    let back = RadialMetric::from_table(&g.to_table()).unwrap();
    assert_relative_eq!(
        adm_mass(&g).unwrap().extrapolated_mass,
        adm_mass(&back).unwrap().extrapolated_mass,
        max_relative = 1e-12
    );
}
