//! The desk-scale acceptance suite: eleven criteria, each returning a
//! deterministic pass/fail outcome with its measured quantities.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{flow_csv, run_scenario, to_csv, Family, Scenario, SweepTable};
use crate::deformation::{delta_gamma_experiment, mass_curve, Cutoff, FlowOptions, FlowRun, Verdict};
use crate::error::{Error, Result};
use crate::harmonic::{harmonic_basis, poisson_extend, ExteriorHarmonic, Multipole, PointSource};
use crate::mass::adm_mass;
use crate::metric::{ConformalBump, ConformallyFlatMetric, GridSpec, RadialMetric};
use crate::norms::{
    barrier_subharmonicity_check, injectivity_ratio, random_forcing_family, sample_points, TestFunction,
    WeightedNormSpec,
};
use crate::solver::{comparison_bound_constant, scalar_flatten};
use crate::sphere::dense_directions;

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(id: u8, name: &'static str, result: Result<(bool, String)>) -> Outcome {
    match result {
        Ok((passed, detail)) => Outcome {
            id,
            name,
            passed,
            detail,
        },
        Err(e) => Outcome {
            id,
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Bump metrics with a point-mass core: their flattened representatives
/// keep a second end and a nontrivial Ricci tensor on the cutoff annulus.
pub const FLOW_BUMPS: [(f64, f64, f64, f64); 3] = [(0.5, 0.6, 0.3, 0.2), (1.0, 0.5, 0.4, 0.1), (2.0, 0.5, 0.4, 0.5)];

/// Bumps with R ≥ 0, filled and with point masses.
pub const NONNEGATIVE_BUMPS: [(f64, f64, f64, f64); 5] = [
    (0.3, 0.5, 0.4, 0.0),
    (1.0, 0.5, 0.4, 0.0),
    (3.0, 0.5, 0.45, 0.0),
    (0.5, 0.6, 0.3, 0.2),
    (1.0, 0.5, 0.4, 0.1),
];

pub fn flattened_bump(amplitude: f64, center: f64, width: f64, point_mass: f64) -> Result<RadialMetric> {
    let b = ConformalBump::new(3, amplitude, center, width, point_mass)?;
    Ok(scalar_flatten(&b.metric(GridSpec::default())?)?.g_tilde)
}

/// 1. Flux extrapolation and expansion agree on Schwarzschild.
pub fn mass_route_agreement() -> Outcome {
    let run = || -> Result<(bool, String)> {
        let mut ok = true;
        let mut detail = String::new();
        for m in [0.01, 0.1, 1.0] {
            let u = ExteriorHarmonic::schwarzschild(3, 1.0, m)?;
            let conformal = adm_mass(&ConformallyFlatMetric::from_harmonic(u))?;
            let radial = adm_mass(&RadialMetric::schwarzschild(3, m, GridSpec::default())?)?;
            let expansion = conformal.expansion_mass.unwrap_or(f64::NAN);
            let e1 = (conformal.extrapolated_mass - expansion).abs();
            let e2 = (radial.extrapolated_mass - m).abs();
            ok &= e1 <= 1e-6 && e2 <= 1e-6;
            write!(detail, "m={m}: |flux−expansion| {e1:.2e}, radial {e2:.2e}; ").unwrap();
        }
        Ok((ok, detail))
    };
    outcome(1, "mass route agreement", run())
}

/// A seeded positive exterior harmonic on ℝⁿ ∖ B_1 with multipoles up to
/// degree 3 and an interior point source.
pub fn random_harmonic(rng: &mut ChaCha8Rng, n: usize) -> ExteriorHarmonic {
    loop {
        let monopole = rng.gen_range(0.0..0.5);
        let mut higher = Vec::new();
        for l in 1..=3u32 {
            let count = harmonic_basis(n, l).len();
            for _ in 0..2 {
                higher.push(Multipole {
                    l,
                    index: rng.gen_range(0..count),
                    coeff: rng.gen_range(-0.08..0.08),
                });
            }
        }
        let loc: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let sources = vec![PointSource {
            location: loc,
            strength: rng.gen_range(0.0..0.1),
        }];
        if let Ok(u) = ExteriorHarmonic::new(n, 1.0, monopole, higher, sources) {
            return u;
        }
    }
}

/// 2. U^{4/(n−2)} δ is scalar-flat for harmonic U.
pub fn harmonic_scalar_flat() -> Outcome {
    let run = || -> Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut worst: f64 = 0.0;
        for k in 0..20 {
            let n = 3 + k % 2;
            let g = ConformallyFlatMetric::from_harmonic(random_harmonic(&mut rng, n));
            let dirs = dense_directions(n, 100);
            for j in 0..1000 {
                let r = 1.05 * 20f64.powf((j / dirs.len()) as f64 / (1000 / dirs.len()) as f64);
                let x: Vec<f64> = dirs[j % dirs.len()].iter().map(|d| d * r).collect();
                worst = worst.max(g.scalar_curvature(&x)?.abs());
            }
        }
        Ok((worst < 1e-10, format!("max |R| = {worst:.2e} over 20 × 1000 points")))
    };
    outcome(2, "harmonic implies scalar-flat", run())
}

fn flow(g: &RadialMetric, a: f64) -> Result<FlowRun> {
    mass_curve(g, &Cutoff::new(a)?, &FlowOptions::default())
}

/// 3. ṁ(0) by finite differences of m(s) matches the closed form.
pub fn first_variation_dual_route() -> Outcome {
    let run = || -> Result<(bool, String)> {
        let mut bases = vec![(
            "schwarzschild m=1".to_string(),
            RadialMetric::schwarzschild(3, 1.0, GridSpec::default())?,
        )];
        for (k, &(amp, c, w, pm)) in FLOW_BUMPS.iter().enumerate() {
            bases.push((format!("bump {k}"), flattened_bump(amp, c, w, pm)?));
        }
        let mut ok = true;
        let mut detail = String::new();
        for (name, g) in &bases {
            let s = flow(g, 4.0)?.summary();
            ok &= s.relative_gap <= 1e-3;
            write!(detail, "{name}: gap {:.2e}; ", s.relative_gap).unwrap();
        }
        Ok((ok, detail))
    };
    outcome(3, "first-variation dual route", run())
}

/// 4. ṁ(0) ≥ 0 on the family, vanishing only for the flat member.
pub fn first_variation_sign() -> Outcome {
    let run = || -> Result<(bool, String)> {
        let flat = RadialMetric::flat(3, GridSpec::default())?;
        let flat_mdot = flow(&flat, 5.0)?.mdot0_formula.value;
        let mut ok = flat_mdot == 0.0;
        let mut detail = format!("flat: {flat_mdot:e}; ");
        let mut members = Vec::new();
        for m in [1.0, 0.1, 0.01, 0.001] {
            members.push((
                format!("schwarzschild m={m}"),
                RadialMetric::schwarzschild(3, m, GridSpec::default())?,
            ));
        }
        for (k, &(amp, c, w, pm)) in FLOW_BUMPS.iter().enumerate() {
            members.push((format!("bump {k}"), flattened_bump(amp, c, w, pm)?));
        }
        for (name, g) in &members {
            let run = flow(g, 5.0)?;
            let v = run.mdot0_formula.value;
            ok &= v > 0.0 && run.mdot0_fd > 0.0;
            write!(detail, "{name}: {v:.3e}; ").unwrap();
        }
        Ok((ok, detail))
    };
    outcome(4, "sign of first variation", run())
}

/// 5. The δ–γ argument on Schwarzschild with m(0) = 10⁻³, a = 5.
pub fn delta_gamma_pipeline() -> Outcome {
    let run = || -> Result<(bool, String)> {
        let g = RadialMetric::schwarzschild(3, 1e-3, GridSpec::default())?;
        let run = flow(&g, 5.0)?;
        let gamma = 1.01 * (2.0 * run.mddot_max * run.m0).sqrt();
        let rep = delta_gamma_experiment(&run, gamma);
        let ok = rep.verdict == Verdict::Pass && rep.taylor_consistent == Some(true);
        Ok((
            ok,
            format!(
                "m0 {:.6e}, C0 {:.3e}, γ {:.3e}, ṁ(0) {:.3e}, m(−γ/C0) {:?}, verdict {:?}",
                rep.m0, rep.c0, rep.gamma, rep.mdot0, rep.mass_at_test, rep.verdict
            ),
        ))
    };
    outcome(5, "delta-gamma pipeline", run())
}

pub fn monopole_scenario() -> Scenario {
    Scenario {
        name: "monopole".into(),
        n: 3,
        a: 5.0,
        grid: GridSpec::default(),
        flow_points: 9,
        gamma_factor: 1.01,
        epsilons: vec![0.05, 0.01, 0.002],
        seed: 0,
        family: Family::Schwarzschild {
            masses: vec![1.0, 0.3, 0.1, 0.03, 0.01],
        },
    }
}

pub fn bump_scenario() -> Scenario {
    Scenario {
        name: "bump".into(),
        family: Family::Bump {
            center: 0.5,
            width: 0.4,
            amplitude: 1.0,
            point_mass: 0.2,
            scales: vec![1.0, 0.3, 0.1, 0.03, 0.01],
        },
        ..monopole_scenario()
    }
}

/// Slack on the upper end of the power bracket: radial families give a
/// slope of exactly one, measured through extrapolated masses.
const POWER_SLACK: f64 = 1e-4;

fn sweep_verdict(t: &SweepTable) -> (bool, String) {
    let masses: Vec<f64> = t.rows.iter().filter_map(|r| r.mass).collect();
    let complete = masses.len() == t.rows.len() && !t.rows.is_empty();
    let power = t.fitted_power.unwrap_or(f64::NAN);
    let ok = complete && t.monotone && (0.25..=1.0 + POWER_SLACK).contains(&power);
    (
        ok,
        format!(
            "{}: power {power:.6}, monotone {}, smallest sup {:.3e}",
            t.scenario,
            t.monotone,
            t.rows.first().and_then(|r| r.sup_deviation).unwrap_or(f64::NAN)
        ),
    )
}

/// 6. sup|U − 1| → 0 with m(0) in both families.
pub fn near_equality_sweep() -> Outcome {
    let run = || -> Result<(bool, String)> {
        let (a, da) = sweep_verdict(&run_scenario(&monopole_scenario(), None)?);
        let (b, db) = sweep_verdict(&run_scenario(&bump_scenario(), None)?);
        Ok((a && b, format!("{da}; {db}")))
    };
    outcome(6, "near-equality sweep", run())
}

/// 7. Flattening a metric with R ≥ 0: v ≥ 1, U ≥ Ũ, and the comparison bound.
pub fn flattening_comparison() -> Outcome {
    let run = || -> Result<(bool, String)> {
        let a = 5.0;
        let c = comparison_bound_constant(a, 3)?;
        let mut ok = true;
        let mut detail = format!("C(a,n) = {c:.4}; ");
        for &(amp, center, width, pm) in &NONNEGATIVE_BUMPS {
            let b = ConformalBump::new(3, amp, center, width, pm)?;
            let g = b.metric(GridSpec::default())?;
            let fl = scalar_flatten(&g)?;
            let v_min = fl.v.iter().copied().fold(f64::INFINITY, f64::min);
            let m = adm_mass(&g)?.extrapolated_mass;
            let mt = adm_mass(&fl.g_tilde)?.extrapolated_mass;
            let (mut diff_min, mut sup) = (f64::INFINITY, f64::NEG_INFINITY);
            for &r in g.radii().iter().filter(|&&r| r >= fl.u_original.inner_radius()) {
                let x = [r, 0.0, 0.0];
                let d = fl.u_original.eval(&x)? - fl.u_tilde.eval(&x)?;
                diff_min = diff_min.min(d);
                if r >= a {
                    sup = sup.max(d);
                }
            }
            let pass = v_min >= 1.0 && diff_min >= 0.0 && sup <= c * (m - mt);
            ok &= pass;
            write!(
                detail,
                "amp {amp} pm {pm}: min v {v_min:.6}, sup(U−Ũ) {sup:.3e} ≤ {:.3e}; ",
                c * (m - mt)
            )
            .unwrap();
        }
        Ok((ok, detail))
    };
    outcome(7, "flattening comparison", run())
}

/// 8. Δ_g f_∞: closed form against the difference oracle, and positivity.
pub fn barrier_identity() -> Outcome {
    let run = || -> Result<(bool, String)> {
        let mut ok = true;
        let mut detail = String::new();
        let pts = sample_points(3, 50, 2.5, 50.0);
        for m in [0.0, 0.1, 1.0] {
            let u = ExteriorHarmonic::schwarzschild(3, 1.0, m)?;
            for sigma in [-0.25, -0.5, -0.75] {
                let rep = barrier_subharmonicity_check(&u, sigma, &pts)?;
                ok &= rep.passes(1e-6);
                write!(
                    detail,
                    "m={m} σ={sigma}: gap {:.1e} C2 {:.3}; ",
                    rep.max_relative_gap, rep.c2
                )
                .unwrap();
            }
        }
        Ok((ok, detail))
    };
    outcome(8, "barrier identity", run())
}

/// 9. Injectivity constants: exact flat case and refinement stability.
pub fn estimate_echoes() -> Outcome {
    let run = || -> Result<(bool, String)> {
        let spec = WeightedNormSpec::new(3, -0.5, 0.5, 0, 2.0)?;
        let a = 10.0;
        let grid = crate::metric::LogGrid::new(1.0, 1e4, 64)?;
        let flat = injectivity_ratio(&[TestFunction::flat_power(3, -0.5, grid)], &spec, a)?;
        let exact = 1.0 / (0.5f64 * 0.5);
        let flat_err = (flat.c_zeroth - exact).abs();
        let mut ok = flat_err < 1e-8;
        let mut detail = format!("flat r^σ: |C − 4| = {flat_err:.1e}; ");
        for m in [0.0, 1.0] {
            let mut consts = Vec::new();
            for ppd in [64, 128] {
                let g = RadialMetric::schwarzschild(
                    3,
                    m,
                    GridSpec {
                        points_per_decade: ppd,
                        ..GridSpec::default()
                    },
                )?;
                let fam = random_forcing_family(&g, a, 8, 42)?;
                let rep = injectivity_ratio(&fam, &spec, a)?;
                consts.push((rep.c_zeroth, rep.c_full));
            }
            let d0 = (consts[1].0 - consts[0].0).abs() / consts[0].0;
            let d1 = (consts[1].1 - consts[0].1).abs() / consts[0].1;
            ok &= consts.iter().all(|c| c.0.is_finite() && c.1.is_finite()) && d0 < 0.05 && d1 < 0.05;
            write!(
                detail,
                "m={m}: zeroth-order {:.4} (drift {d0:.1e}), full {:.4} (drift {d1:.1e}); ",
                consts[0].0, consts[0].1
            )
            .unwrap();
        }
        Ok((ok, detail))
    };
    outcome(9, "estimate echoes", run())
}

/// 10. The exterior Poisson kernel integrates to (r/|x|)^{n−2}.
pub fn poisson_normalization() -> Outcome {
    let run = || -> Result<(bool, String)> {
        let mut worst: f64 = 0.0;
        for r in [1.0, 1.5, 2.0, 3.0, 5.0] {
            for f in [1.2, 1.5, 2.0, 4.0, 10.0] {
                let x = [0.3 * r * f, -0.4 * r * f, (0.75f64).sqrt() * r * f];
                let v = poisson_extend(3, |_| 1.0, r, &x)?;
                worst = worst.max((v - 1.0 / f).abs());
            }
        }
        Ok((worst < 1e-8, format!("max error {worst:.2e} over 25 (r, |x|) pairs")))
    };
    outcome(10, "Poisson normalization", run())
}

fn read_tree(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| Error::Parse(format!("{}: {e}", d.display())))? {
            let path = entry.map_err(|e| Error::Parse(e.to_string()))?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                files.push((path.strip_prefix(dir).unwrap().display().to_string(), bytes));
            }
        }
    }
    files.sort();
    Ok(files)
}

fn write_outputs(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    run_scenario(&monopole_scenario(), Some(dir))?;
    run_scenario(&bump_scenario(), Some(dir))?;
    let g = RadialMetric::schwarzschild(3, 1.0, GridSpec::default())?;
    let path = dir.join("flow_schwarzschild.csv");
    std::fs::write(&path, flow_csv(&flow(&g, 4.0)?, "")?)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    read_tree(dir)
}

/// 11. Two evaluations write byte-identical artifact trees.
pub fn determinism() -> Outcome {
    let run = || -> Result<(bool, String)> {
        let root = std::env::temp_dir().join(format!("massflow-determinism-{}", std::process::id()));
        let result = (|| {
            let first = write_outputs(&root.join("first"))?;
            let second = write_outputs(&root.join("second"))?;
            Ok((
                first == second && !first.is_empty(),
                format!("{} files compared", first.len()),
            ))
        })();
        let _ = std::fs::remove_dir_all(&root);
        result
    };
    outcome(11, "determinism", run())
}

pub type Criterion = fn() -> Outcome;

pub const ALL: [Criterion; 11] = [
    mass_route_agreement,
    harmonic_scalar_flat,
    first_variation_dual_route,
    first_variation_sign,
    delta_gamma_pipeline,
    near_equality_sweep,
    flattening_comparison,
    barrier_identity,
    estimate_echoes,
    poisson_normalization,
    determinism,
];

/// Runs all criteria, prints a table, and writes `check.csv` plus the two
/// family sweeps into `out` when given. Fails if any criterion fails.
pub fn check_all(out: Option<&Path>) -> Result<Vec<Outcome>> {
    let outcomes: Vec<Outcome> = ALL.iter().map(|c| c()).collect();
    for o in &outcomes {
        println!(
            "{:>2}  {:<4}  {:<30}  {}",
            o.id,
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?;
        run_scenario(&monopole_scenario(), Some(dir))?;
        run_scenario(&bump_scenario(), Some(dir))?;
        let path = dir.join("check.csv");
        std::fs::write(&path, to_csv(&outcomes)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    }
    Ok(outcomes)
}
