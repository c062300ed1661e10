use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use massflow::experiments::criteria::check_all;
use massflow::experiments::{run_flows, run_scenario, Scenario};
use massflow::mass::adm_mass;
use massflow::metric::RadialMetric;
use massflow::solver::{comparison_bound_constant, scalar_flatten};
use massflow::{Error, Result};

/// ADM mass, conformal flattening, and Ricci-deformation mass flows of
/// spherically symmetric asymptotically flat metrics.
#[derive(Parser)]
#[command(name = "massflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Grid points per decade; overrides the scenario grid.
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Cutoff scale a; overrides the scenario value.
    #[arg(long, global = true)]
    a: Option<f64>,
    /// Output directory. Falls back to $MASSFLOW_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// ADM mass of a radial metric table.
    Mass { metric: PathBuf },
    /// Conformally flatten a metric with R ≥ 0 and compare the masses.
    Flatten { metric: PathBuf },
    /// Mass flow m(s) of every member of a scenario.
    Flow { scenario: PathBuf },
    /// Full near-equality sweep of a scenario.
    Sweep { scenario: PathBuf },
    /// Run the acceptance criteria.
    Check,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serialises") + "\n"
}

fn load_metric(path: &Path) -> Result<RadialMetric> {
    let g = RadialMetric::from_table(&read(path)?)?;
    g.validate()?;
    Ok(g)
}

#[derive(Serialize)]
struct FlattenReport {
    mass: f64,
    flattened_mass: f64,
    min_v: f64,
    a: f64,
    sup_difference: f64,
    comparison_bound: f64,
    residual: f64,
}

impl Cli {
    fn out(&self) -> Option<PathBuf> {
        self.out
            .clone()
            .or_else(|| std::env::var_os("MASSFLOW_OUT").map(PathBuf::from))
    }

    fn scenario(&self, path: &Path) -> Result<Scenario> {
        let mut s = Scenario::load(path)?;
        if let Some(p) = self.grid_points {
            s.grid.points_per_decade = p;
        }
        if let Some(a) = self.a {
            s.a = a;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s.validate()?;
        Ok(s)
    }

    fn run(&self) -> Result<bool> {
        let out = self.out();
        match &self.command {
            Command::Mass { metric } => {
                let report = json(&adm_mass(&load_metric(metric)?)?);
                print!("{report}");
                if let Some(dir) = &out {
                    write(&dir.join("mass.json"), &report)?;
                }
            }
            Command::Flatten { metric } => {
                let g = load_metric(metric)?;
                let fl = scalar_flatten(&g)?;
                let a = self.a.unwrap_or(5.0);
                let n = g.n();
                let mut sup = f64::NEG_INFINITY;
                for &r in g.radii().iter().filter(|&&r| r >= a) {
                    let mut x = vec![0.0; n];
                    x[0] = r;
                    sup = sup.max(fl.u_original.eval(&x)? - fl.u_tilde.eval(&x)?);
                }
                let mass = adm_mass(&g)?.extrapolated_mass;
                let flattened_mass = adm_mass(&fl.g_tilde)?.extrapolated_mass;
                let report = FlattenReport {
                    mass,
                    flattened_mass,
                    min_v: fl.v.iter().copied().fold(f64::INFINITY, f64::min),
                    a,
                    sup_difference: sup,
                    comparison_bound: comparison_bound_constant(a, n)? * (mass - flattened_mass),
                    residual: fl.residual,
                };
                print!("{}", json(&report));
                if let Some(dir) = &out {
                    write(&dir.join("flattened.csv"), &fl.g_tilde.to_table())?;
                    write(&dir.join("flatten.json"), &json(&report))?;
                }
            }
            Command::Flow { scenario } => {
                let records = run_flows(&self.scenario(scenario)?, out.as_deref())?;
                print!("{}", json(&records));
                return Ok(records.iter().all(|r| r.failure.is_none()));
            }
            Command::Sweep { scenario } => {
                let table = run_scenario(&self.scenario(scenario)?, out.as_deref())?;
                for w in &table.warnings {
                    eprintln!("warning: {w}");
                }
                print!("{}", json(&table));
            }
            Command::Check => {
                let outcomes = check_all(out.as_deref())?;
                let failed = outcomes.iter().filter(|o| !o.passed).count();
                println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
                return Ok(failed == 0);
            }
        }
        Ok(true)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
