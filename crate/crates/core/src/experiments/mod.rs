//! Scenario files, the family sweep, and the desk-scale check suite.

pub mod criteria;
pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::deformation::{
    delta_gamma_experiment, mass_curve, oscillation_bound_check, Cutoff, DeltaGammaReport, FlowOptions, FlowRun,
    FlowSummary, Verdict,
};
use crate::error::{Error, Result};
use crate::harmonic::ExteriorHarmonic;
use crate::mass::adm_mass;
use crate::metric::{ConformalBump, GridSpec, RadialMetric};
use crate::solver::scalar_flatten;

use plot::{Plot, Series};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Dual-route tolerance on |ṁ_fd − ṁ_formula| / ṁ_formula.
pub const DUAL_ROUTE_TOLERANCE: f64 = 1e-3;

/// Base metrics of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Family {
    /// Spatial Schwarzschild slices.
    Schwarzschild { masses: Vec<f64> },
    /// Conformal bumps, optionally around a point mass, flattened before
    /// the flow. Member k uses amplitude·scales[k] and point_mass·scales[k].
    Bump {
        center: f64,
        width: f64,
        amplitude: f64,
        #[serde(default)]
        point_mass: f64,
        scales: Vec<f64>,
    },
}

fn default_flow_points() -> usize {
    9
}

fn default_gamma_factor() -> f64 {
    1.01
}

/// One sweep, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    /// Cutoff scale.
    pub a: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_flow_points")]
    pub flow_points: usize,
    /// γ = gamma_factor · √(2 C₀ m(0)) in the δ–γ check.
    #[serde(default = "default_gamma_factor")]
    pub gamma_factor: f64,
    /// ε values for the empirical δ(ε) thresholds.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    pub family: Family,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        {
            return bad(format!(
                "scenario name {:?} must be nonempty ASCII [A-Za-z0-9-_.]",
                self.name
            ));
        }
        if self.n < 3 {
            return bad(format!("dimension n = {} must be at least 3", self.n));
        }
        if !(self.a > 3.0 && self.a.is_finite()) {
            return bad(format!("cutoff scale a = {} must exceed 3", self.a));
        }
        if self.grid.points_per_decade < 8 || !(self.grid.decades_beyond_flat >= 2.0) {
            return bad("grid needs ≥ 8 points per decade and ≥ 2 decades".into());
        }
        if self.flow_points < 5 || self.flow_points.is_multiple_of(2) {
            return bad(format!("flow_points = {} must be odd and ≥ 5", self.flow_points));
        }
        if !(self.gamma_factor > 1.0) {
            return bad("gamma_factor must exceed 1".into());
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return bad("epsilons must be positive".into());
        }
        match &self.family {
            Family::Schwarzschild { masses } => {
                if masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
                    return bad("Schwarzschild masses must be positive".into());
                }
            }
            Family::Bump {
                center,
                width,
                amplitude,
                point_mass,
                scales,
            } => {
                if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    return bad("bump scales must be positive".into());
                }
                ConformalBump::new(self.n, *amplitude, *center, *width, *point_mass)?;
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    fn members(&self) -> Vec<(String, Member)> {
        match &self.family {
            Family::Schwarzschild { masses } => masses
                .iter()
                .map(|&m| (format!("schwarzschild-m{m}"), Member::Schwarzschild(m)))
                .collect(),
            Family::Bump {
                center,
                width,
                amplitude,
                point_mass,
                scales,
            } => scales
                .iter()
                .map(|&s| {
                    (
                        format!("bump-s{s}"),
                        Member::Bump {
                            amplitude: amplitude * s,
                            center: *center,
                            width: *width,
                            point_mass: point_mass * s,
                        },
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Member {
    Schwarzschild(f64),
    Bump {
        amplitude: f64,
        center: f64,
        width: f64,
        point_mass: f64,
    },
}

/// A scalar-flat base metric with the harmonic conformal factor of its end.
pub struct Base {
    pub metric: RadialMetric,
    pub end: ExteriorHarmonic,
    /// Mass of the metric before flattening, when it was flattened.
    pub original_mass: Option<f64>,
}

fn build_base(n: usize, member: Member, grid: GridSpec) -> Result<Base> {
    match member {
        Member::Schwarzschild(m) => Ok(Base {
            metric: RadialMetric::schwarzschild(n, m, grid)?,
            end: ExteriorHarmonic::schwarzschild(n, 1.0, m)?,
            original_mass: None,
        }),
        Member::Bump {
            amplitude,
            center,
            width,
            point_mass,
        } => {
            let bump = ConformalBump::new(n, amplitude, center, width, point_mass)?;
            let fl = scalar_flatten(&bump.metric(grid)?)?;
            Ok(Base {
                metric: fl.g_tilde,
                end: fl.u_tilde,
                original_mass: Some(bump.mass()),
            })
        }
    }
}

/// One member's pipeline outcome. Every row carries the scenario hash and
/// crate version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario_hash: String,
    pub version: String,
    pub member: String,
    pub mass: Option<f64>,
    pub original_mass: Option<f64>,
    pub a: f64,
    pub sup_deviation: Option<f64>,
    pub mdot0_formula: Option<f64>,
    pub mdot0_fd: Option<f64>,
    pub relative_gap: Option<f64>,
    pub mddot_max: Option<f64>,
    pub admissible_range: Option<f64>,
    pub oscillation_ratio: Option<f64>,
    pub chain_constant: Option<f64>,
    pub grad_to_mdot: Option<f64>,
    pub dual_route: Option<bool>,
    pub first_variation_sign: Option<bool>,
    pub delta_gamma: Option<Verdict>,
    pub failure: Option<String>,
}

impl SweepRow {
    fn failed(hash: &str, member: String, a: f64, e: &Error) -> Self {
        Self {
            failure: Some(e.to_string()),
            ..Self::blank(hash, member, a)
        }
    }

    fn blank(hash: &str, member: String, a: f64) -> Self {
        Self {
            scenario_hash: hash.into(),
            version: VERSION.into(),
            member,
            mass: None,
            original_mass: None,
            a,
            sup_deviation: None,
            mdot0_formula: None,
            mdot0_fd: None,
            relative_gap: None,
            mddot_max: None,
            admissible_range: None,
            oscillation_ratio: None,
            chain_constant: None,
            grad_to_mdot: None,
            dual_route: None,
            first_variation_sign: None,
            delta_gamma: None,
            failure: None,
        }
    }
}

/// Empirical δ(ε): the largest sampled mass below which every member has
/// sup_{|x|>a}|U − 1| < ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub epsilon: f64,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub scenario: String,
    pub scenario_hash: String,
    pub version: String,
    /// Sorted by mass; failed members last.
    pub rows: Vec<SweepRow>,
    /// Slope of log sup_deviation against log m(0).
    pub fitted_power: Option<f64>,
    /// sup_deviation nondecreasing in mass.
    pub monotone: bool,
    pub thresholds: Vec<Threshold>,
    pub warnings: Vec<String>,
}

struct MemberOutcome {
    row: SweepRow,
    run: Option<FlowRun>,
}

fn run_member(s: &Scenario, hash: &str, id: String, member: Member) -> MemberOutcome {
    let attempt = || -> Result<(SweepRow, FlowRun)> {
        let base = build_base(s.n, member, s.grid)?;
        let m0 = adm_mass(&base.metric)?.extrapolated_mass;
        let sup = base.end.sup_deviation(s.a)?;
        let run = mass_curve(
            &base.metric,
            &Cutoff::new(s.a)?,
            &FlowOptions {
                points: s.flow_points,
                ..FlowOptions::default()
            },
        )?;
        let sum = run.summary();
        let osc = oscillation_bound_check(&base.end, s.a, sum.mdot0_formula, m0)?;
        let gamma = s.gamma_factor * (2.0 * sum.mddot_max * m0.max(0.0)).sqrt();
        let dg = (gamma > 0.0).then(|| delta_gamma_experiment(&run, gamma));
        let row = SweepRow {
            mass: Some(m0),
            original_mass: base.original_mass,
            sup_deviation: Some(sup),
            mdot0_formula: Some(sum.mdot0_formula),
            mdot0_fd: Some(sum.mdot0_fd),
            relative_gap: Some(sum.relative_gap),
            mddot_max: Some(sum.mddot_max),
            admissible_range: Some(sum.admissible_range),
            oscillation_ratio: Some(osc.ratio),
            chain_constant: Some(osc.chain_constant),
            grad_to_mdot: Some(osc.grad_to_mdot),
            dual_route: Some(sum.relative_gap <= DUAL_ROUTE_TOLERANCE),
            first_variation_sign: Some(sum.mdot0_formula >= 0.0),
            delta_gamma: dg.map(|d| d.verdict),
            ..SweepRow::blank(hash, id.clone(), s.a)
        };
        Ok((row, run))
    };
    match attempt() {
        Ok((row, run)) => MemberOutcome { row, run: Some(run) },
        Err(e) => MemberOutcome {
            row: SweepRow::failed(hash, id, s.a, &e),
            run: None,
        },
    }
}

fn fit_power(rows: &[SweepRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| match (r.mass, r.sup_deviation) {
            (Some(m), Some(d)) if m > 0.0 && d > 0.0 => Some((m.ln(), d.ln())),
            _ => None,
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / k,
        pts.iter().map(|p| p.1).sum::<f64>() / k,
    );
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn thresholds(rows: &[SweepRow], epsilons: &[f64]) -> Vec<Threshold> {
    let ok: Vec<(f64, f64)> = rows.iter().filter_map(|r| Some((r.mass?, r.sup_deviation?))).collect();
    epsilons
        .iter()
        .map(|&eps| {
            let mut delta = None;
            for &(m, d) in &ok {
                if d < eps {
                    delta = Some(m);
                } else {
                    break;
                }
            }
            Threshold { epsilon: eps, delta }
        })
        .collect()
}

/// Runs every family member through build → flatten → mass → flow →
/// oscillation check and, when `out` is given, writes the artifacts into
/// `out/<scenario name>/`.
pub fn run_scenario(s: &Scenario, out: Option<&Path>) -> Result<SweepTable> {
    s.validate()?;
    let hash = s.hash();
    let members = s.members();
    let mut warnings = Vec::new();
    if members.is_empty() {
        warnings.push("empty family: nothing to run".to_string());
    }
    let mut outcomes: Vec<MemberOutcome> = members
        .into_par_iter()
        .map(|(id, m)| run_member(s, &hash, id, m))
        .collect();
    outcomes.sort_by(|x, y| match (x.row.mass, y.row.mass) {
        (Some(a), Some(b)) => a.total_cmp(&b),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => x.row.member.cmp(&y.row.member),
    });
    let rows: Vec<SweepRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    for r in &rows {
        if let Some(f) = &r.failure {
            warnings.push(format!("{}: {f}", r.member));
        }
    }
    let devs: Vec<f64> = rows.iter().filter_map(|r| r.sup_deviation).collect();
    let monotone = devs.windows(2).all(|w| w[0] <= w[1]);
    if !monotone {
        warnings.push("sup_deviation is not monotone in mass".into());
    }
    let table = SweepTable {
        scenario: s.name.clone(),
        scenario_hash: hash,
        version: VERSION.into(),
        fitted_power: fit_power(&rows),
        monotone,
        thresholds: thresholds(&rows, &s.epsilons),
        rows,
        warnings,
    };
    if let Some(dir) = out {
        write_artifacts(&table, &outcomes, &dir.join(&s.name))?;
    }
    Ok(table)
}

/// One member's flow, as reported by the `flow` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowRecord {
    pub scenario_hash: String,
    pub member: String,
    pub summary: Option<FlowSummary>,
    pub delta_gamma: Option<DeltaGammaReport>,
    pub failure: Option<String>,
}

/// Runs only the mass flow of every member, writing `flow_<member>.csv`
/// and `flows.json` into `out/<scenario name>/` when `out` is given.
pub fn run_flows(s: &Scenario, out: Option<&Path>) -> Result<Vec<FlowRecord>> {
    s.validate()?;
    let hash = s.hash();
    let opts = FlowOptions {
        points: s.flow_points,
        ..FlowOptions::default()
    };
    let runs: Vec<(String, Result<FlowRun>)> = s
        .members()
        .into_par_iter()
        .map(|(id, m)| {
            let run = build_base(s.n, m, s.grid).and_then(|b| mass_curve(&b.metric, &Cutoff::new(s.a)?, &opts));
            (id, run)
        })
        .collect();
    let dir = out.map(|d| d.join(&s.name));
    if let Some(d) = &dir {
        fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
    }
    let mut records = Vec::new();
    for (member, run) in runs {
        let record = match run {
            Ok(run) => {
                if let Some(d) = &dir {
                    write_file(d.join(format!("flow_{member}.csv")), flow_csv(&run, &hash)?.as_bytes())?;
                }
                let sum = run.summary();
                let gamma = s.gamma_factor * (2.0 * sum.mddot_max * sum.m0.max(0.0)).sqrt();
                FlowRecord {
                    scenario_hash: hash.clone(),
                    member,
                    delta_gamma: (gamma > 0.0).then(|| delta_gamma_experiment(&run, gamma)),
                    summary: Some(sum),
                    failure: None,
                }
            }
            Err(e) => FlowRecord {
                scenario_hash: hash.clone(),
                member,
                summary: None,
                delta_gamma: None,
                failure: Some(e.to_string()),
            },
        };
        records.push(record);
    }
    if let Some(d) = &dir {
        let json = serde_json::to_string_pretty(&records).map_err(|e| Error::Parse(e.to_string()))?;
        write_file(d.join("flows.json"), (json + "\n").as_bytes())?;
    }
    Ok(records)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

fn write_file(path: PathBuf, contents: &[u8]) -> Result<()> {
    fs::write(&path, contents).map_err(|e| io_err(&path, e))
}

/// RFC 4180 CSV of serialisable rows.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Serialize)]
struct FlowCsvRow<'a> {
    scenario_hash: &'a str,
    version: &'a str,
    s: f64,
    mass: Option<f64>,
    residual: Option<f64>,
    admissible: bool,
}

/// (s, m(s), residual, admissible) rows of a flow run.
pub fn flow_csv(run: &FlowRun, scenario_hash: &str) -> Result<String> {
    let rows: Vec<FlowCsvRow> = run
        .mass_samples
        .iter()
        .map(|m| FlowCsvRow {
            scenario_hash,
            version: VERSION,
            s: m.s,
            mass: m.mass,
            residual: m.residual,
            admissible: m.admissible(),
        })
        .collect();
    to_csv(&rows)
}

fn write_artifacts(table: &SweepTable, outcomes: &[MemberOutcome], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_file(dir.join("sweep.csv"), to_csv(&table.rows)?.as_bytes())?;
    let summary = serde_json::to_string_pretty(table).map_err(|e| Error::Parse(e.to_string()))?;
    write_file(dir.join("summary.json"), (summary + "\n").as_bytes())?;
    let mut sup = Plot::new("sup |U − 1| over |x| > a", "m(0)", "sup deviation").log_log();
    sup.series.push(Series {
        name: table.scenario.clone(),
        points: table
            .rows
            .iter()
            .filter_map(|r| Some((r.mass?, r.sup_deviation?)))
            .collect(),
        scatter: false,
    });
    write_file(dir.join("sup_deviation.svg"), sup.to_svg().as_bytes())?;
    let mut curves = Plot::new("mass curves m(s)", "s", "m(s)");
    for o in outcomes {
        if let Some(run) = &o.run {
            write_file(
                dir.join(format!("flow_{}.csv", o.row.member)),
                flow_csv(run, &table.scenario_hash)?.as_bytes(),
            )?;
            curves.series.push(Series {
                name: o.row.member.clone(),
                points: run.mass_samples.iter().filter_map(|m| Some((m.s, m.mass?))).collect(),
                scatter: false,
            });
        }
    }
    write_file(dir.join("mass_curves.svg"), curves.to_svg().as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHWARZSCHILD: &str = r#"
name = "monopole"
n = 3
a = 5.0
epsilons = [0.05, 0.005]

[family]
kind = "schwarzschild"
masses = [1.0, 0.3, 0.1, 0.03, 0.01]
"#;

    #[test]
    fn scenario_round_trip_and_hash() {
        let s = Scenario::from_toml(SCHWARZSCHILD).unwrap();
        assert_eq!(s.grid, GridSpec::default());
        assert_eq!(s.flow_points, 9);
        let back = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash(), s.hash());
        let mut t = s.clone();
        t.a = 6.0;
        assert_ne!(t.hash(), s.hash());
        assert!(Scenario::from_toml(&SCHWARZSCHILD.replace("a = 5.0", "a = 2.0")).is_err());
        assert!(Scenario::from_toml(&SCHWARZSCHILD.replace("n = 3", "n = 3\nbogus = 1")).is_err());
    }

    #[test]
    fn monopole_sweep_matches_closed_form() {
        let s = Scenario::from_toml(SCHWARZSCHILD).unwrap();
        let t = run_scenario(&s, None).unwrap();
        assert_eq!(t.rows.len(), 5);
        for (row, m) in t.rows.iter().zip([0.01, 0.03, 0.1, 0.3, 1.0]) {
            assert!(row.failure.is_none(), "{row:?}");
            assert!((row.sup_deviation.unwrap() - m / 10.0).abs() < 1e-12);
            assert!((row.mass.unwrap() - m).abs() < 1e-6);
            assert_eq!(row.scenario_hash, t.scenario_hash);
        }
        assert!(t.monotone);
        assert!((t.fitted_power.unwrap() - 1.0).abs() < 1e-6);
        assert!((t.thresholds[0].delta.unwrap() - 0.3).abs() < 1e-6);
        assert!((t.thresholds[1].delta.unwrap() - 0.03).abs() < 1e-6);
    }

    #[test]
    fn empty_family_warns() {
        let s = Scenario::from_toml(&SCHWARZSCHILD.replace("[1.0, 0.3, 0.1, 0.03, 0.01]", "[]")).unwrap();
        let t = run_scenario(&s, None).unwrap();
        assert!(t.rows.is_empty() && !t.warnings.is_empty());
    }

    #[test]
    fn artifacts_are_written_deterministically() {
        let s = Scenario::from_toml(&SCHWARZSCHILD.replace("[1.0, 0.3, 0.1, 0.03, 0.01]", "[0.1, 0.01]")).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run_scenario(&s, Some(d1.path())).unwrap();
        run_scenario(&s, Some(d2.path())).unwrap();
        let names = [
            "sweep.csv",
            "summary.json",
            "sup_deviation.svg",
            "mass_curves.svg",
            "flow_schwarzschild-m0.1.csv",
        ];
        for f in names {
            let a = fs::read(d1.path().join("monopole").join(f)).unwrap();
            let b = fs::read(d2.path().join("monopole").join(f)).unwrap();
            assert!(!a.is_empty());
            assert_eq!(a, b, "{f}");
        }
        let csv = fs::read_to_string(d1.path().join("monopole/sweep.csv")).unwrap();
        assert!(csv.starts_with("scenario_hash,version,member,mass"));
    }
}
