//! Command-line interface: argument definitions and subcommand handlers.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;
use twohop_core::gridsearch::{
    brute_force_profiles, enumerate_profiles, ratio_bound, ratio_bound_limit,
};
use twohop_core::mcsim::{validate, BeaconMode, SimConfig, Validation};
use twohop_core::model::{NodeClass, Scenario};
use twohop_core::roots::RootError;

use crate::policy_file::{load_policy, PolicyFileError};
use crate::report::{run_instance, write_csv, Algorithm, RunError, RunOptions};
use crate::scenario_file::{load_scenario, ScenarioFileError};
use crate::sweep::{run_sweep, SweepError, SweepSpec};

/// Largest horizon `validate-enum` accepts; the brute force scan is
/// `(horizon)^classes`.
pub const ENUM_HORIZON_CAP: usize = 64;

#[derive(Debug, Parser)]
#[command(
    name = "twohop",
    version,
    about = "Energy-budgeted two-hop forwarding policies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Override the scenario's sub-slots per slot.
    #[arg(long)]
    pub resolution: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scenario with one or more algorithms.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum, num_args = 1.., required = true)]
        algorithm: Vec<Algorithm>,
        /// Compute the upper bound only up to this many classes.
        #[arg(long, default_value_t = 3)]
        ub_class_cap: usize,
        /// Stop grid search after this many seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run a sweep described by a TOML spec file.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        resolution: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a policy's analytic delivery and energy with simulation.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Policy file (JSON or TOML) with `vectors` or `thresholds`.
        #[arg(
            long,
            conflicts_with = "algorithm",
            required_unless_present = "algorithm"
        )]
        policy: Option<PathBuf>,
        /// Simulate the policy this algorithm produces.
        #[arg(long, value_enum)]
        algorithm: Option<Algorithm>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Draw beaconing per sub-slot instead of charging its expectation.
        #[arg(long)]
        sampled_beacons: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Worst-case grid search objective ratio.
    Bound {
        #[arg(long)]
        slots: usize,
        #[arg(long)]
        resolution: u32,
        /// Number of classes; omit for the limit as it grows.
        #[arg(long)]
        classes: Option<usize>,
    },
    /// Check grid enumeration against a brute-force scan on small instances.
    ValidateEnum {
        /// Scenario to check; without it, random two-class instances are drawn.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Contract(String),
    #[error("{0}")]
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Contract(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl From<ScenarioFileError> for Failure {
    fn from(e: ScenarioFileError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<PolicyFileError> for Failure {
    fn from(e: PolicyFileError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<RootError> for Failure {
    fn from(e: RootError) -> Self {
        Failure::Numeric(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::NeedsZeroBeacon(_) => Failure::Contract(e.to_string()),
            RunError::Numeric(_) => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Run { source, id } => match Failure::from(source) {
                Failure::Numeric(m) => Failure::Numeric(format!("instance {id}: {m}")),
                other => other,
            },
            other => Failure::Input(other.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| io_failure(p, e))?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<(), Failure> {
    let mut w = open_out(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Input(e.to_string()))?;
    writeln!(w).map_err(|e| Failure::Input(e.to_string()))
}

fn load(args: &ScenarioArgs) -> Result<Scenario, Failure> {
    let sc = load_scenario(&args.scenario)?;
    match args.resolution {
        Some(r) => sc
            .with_resolution(r)
            .map_err(|e| Failure::Input(e.to_string())),
        None => Ok(sc),
    }
}

fn instance_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

/// One row of the simulation comparison table.
#[derive(Debug, Serialize)]
pub struct ValidationRow {
    pub quantity: &'static str,
    pub analytic: f64,
    pub empirical: f64,
    pub ci95: f64,
    pub gap: f64,
    pub flagged: bool,
}

pub fn validation_rows(v: &Validation) -> [ValidationRow; 2] {
    [
        ValidationRow {
            quantity: "delivery",
            analytic: v.analytic_delivery,
            empirical: v.empirical.delivery_freq,
            ci95: v.empirical.ci95_halfwidth,
            gap: v.delivery_gap,
            flagged: v.delivery_flag,
        },
        ValidationRow {
            quantity: "energy",
            analytic: v.analytic_energy,
            empirical: v.empirical.mean_energy,
            ci95: v.empirical.mean_energy_ci,
            gap: v.energy_gap,
            flagged: v.energy_flag,
        },
    ]
}

/// Random two-class instance small enough for the brute-force scan.
pub fn small_instance(rng: &mut ChaCha8Rng) -> Scenario {
    use rand::Rng;
    let slots = rng.random_range(1..=6usize);
    let resolution = rng.random_range(1..=(12 / slots) as u32);
    let mut b = Scenario::builder()
        .deadline(slots as f64 * 100.0)
        .slot_len(100.0)
        .resolution(resolution)
        .technology("a", rng.random_range(0.0..0.02))
        .technology("b", 0.0);
    for _ in 0..2 {
        let tech = if rng.random_bool(0.5) { "a" } else { "b" };
        b = b.class(NodeClass::with_rate(
            rng.random_range(1..=12),
            rng.random_range(1..=slots as u32),
            rng.random_range(1e-4..3e-3),
            rng.random_range(0.2..2.0),
            tech,
        ));
    }
    let sc = b.build().expect("generated instances are valid");
    let full = crate::presets::full_profile_cost(&sc);
    sc.with_budget(full * rng.random_range(0.05..0.9))
        .expect("budget is nonnegative")
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve {
            scenario,
            algorithm,
            ub_class_cap,
            time_limit,
            out,
            format,
        } => {
            let sc = load(&scenario)?;
            let opts = RunOptions {
                grid_time_limit: time_limit.map(Duration::from_secs_f64),
                omit_timing: false,
            };
            let name = instance_name(&scenario.scenario);
            // single-algorithm requests surface contract errors instead of a rejected row
            if let [alg] = algorithm[..] {
                if alg.needs_zero_beacon() && sc.has_beaconing() {
                    return Err(RunError::NeedsZeroBeacon(alg).into());
                }
            }
            let outcomes = run_instance(&name, &sc, &algorithm, ub_class_cap, &opts)?;
            match format {
                Format::Json => write_json(&out, &outcomes),
                Format::Csv => {
                    let rows: Vec<_> = outcomes.into_iter().map(|o| o.row).collect();
                    write_csv(open_out(&out)?, &rows).map_err(|e| Failure::Input(e.to_string()))
                }
            }
        }
        Command::Sweep {
            spec,
            seed,
            resolution,
            out,
        } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| io_failure(&spec, e))?;
            let mut s: SweepSpec = toml::from_str(&text).map_err(|e| io_failure(&spec, e))?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(r) = resolution {
                s.resolution = r;
            }
            let rows = run_sweep(&s)?;
            write_csv(open_out(&out)?, &rows).map_err(|e| Failure::Input(e.to_string()))
        }
        Command::Simulate {
            scenario,
            policy,
            algorithm,
            trials,
            seed,
            sampled_beacons,
            out,
            format,
        } => {
            let sc = load(&scenario)?;
            let pol = match (policy, algorithm) {
                (Some(p), _) => load_policy(&p, &sc)?,
                (None, Some(alg)) => {
                    let name = instance_name(&scenario.scenario);
                    let o = crate::report::run_algorithm(
                        &name,
                        &sc,
                        alg,
                        None,
                        &RunOptions::default(),
                    )?;
                    o.policy()
                        .expand(&sc)
                        .map_err(|e| Failure::Numeric(e.to_string()))?
                }
                (None, None) => {
                    return Err(Failure::Input("--policy or --algorithm required".into()))
                }
            };
            if trials == 0 {
                return Err(Failure::Input("--trials must be positive".into()));
            }
            let mut cfg = SimConfig::new(trials, seed);
            if sampled_beacons {
                cfg.beacon_mode = BeaconMode::Sampled;
            }
            let v = validate(&sc, &pol, &cfg).map_err(|e| Failure::Input(e.to_string()))?;
            match format {
                Format::Json => write_json(&out, &v),
                Format::Csv => {
                    let mut wr = csv::Writer::from_writer(open_out(&out)?);
                    for r in validation_rows(&v) {
                        wr.serialize(r).map_err(|e| Failure::Input(e.to_string()))?;
                    }
                    wr.flush().map_err(|e| Failure::Input(e.to_string()))
                }
            }
        }
        Command::Bound {
            slots,
            resolution,
            classes,
        } => {
            if slots == 0 || resolution == 0 || classes == Some(0) {
                return Err(Failure::Input(
                    "slots, resolution and classes must be positive".into(),
                ));
            }
            let b = match classes {
                Some(c) => ratio_bound(slots, resolution, c),
                None => ratio_bound_limit(slots, resolution),
            };
            println!("{b}");
            Ok(())
        }
        Command::ValidateEnum {
            scenario,
            count,
            seed,
        } => {
            let instances: Vec<(String, Scenario)> = match scenario {
                Some(p) => vec![(instance_name(&p), load_scenario(&p)?)],
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..count)
                        .map(|i| (format!("e{i:04}"), small_instance(&mut rng)))
                        .collect()
                }
            };
            let mut mismatches = 0;
            for (name, sc) in &instances {
                if sc.horizon() > ENUM_HORIZON_CAP || sc.num_classes() > 3 {
                    return Err(Failure::Input(format!(
                        "{name}: brute force is limited to 3 classes and {ENUM_HORIZON_CAP} sub-slots"
                    )));
                }
                let got: Vec<_> = enumerate_profiles(sc)?
                    .into_iter()
                    .map(|p| p.key())
                    .collect();
                let want = brute_force_profiles(sc);
                let ok = got == want;
                mismatches += usize::from(!ok);
                println!(
                    "{name}\t{}\t{}",
                    got.len(),
                    if ok { "match" } else { "MISMATCH" }
                );
            }
            if mismatches > 0 {
                return Err(Failure::Contract(format!(
                    "{mismatches} of {} instances disagree with the brute-force scan",
                    instances.len()
                )));
            }
            Ok(())
        }
    }
}
