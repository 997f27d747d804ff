//! Running one algorithm on one scenario and the CSV row it produces.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use twohop_core::baselines::{arrival_rate_greedy, class_independent};
use twohop_core::greedy::{
    combined_best, greedy_construct, GreedyError, GreedyReport, GreedyVariant,
};
use twohop_core::gridsearch::{grid_search_with, upper_bound, GridOptions, SolveReport};
use twohop_core::model::{Scenario, ThresholdEvaluator, ThresholdPolicy};
use twohop_core::roots::RootError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Grid,
    Greedy1,
    Greedy2,
    Combined,
    Arrival,
    Uniform,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Grid,
        Algorithm::Greedy1,
        Algorithm::Greedy2,
        Algorithm::Combined,
        Algorithm::Arrival,
        Algorithm::Uniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Grid => "grid",
            Algorithm::Greedy1 => "greedy1",
            Algorithm::Greedy2 => "greedy2",
            Algorithm::Combined => "combined",
            Algorithm::Arrival => "arrival",
            Algorithm::Uniform => "uniform",
        }
    }

    /// Needs every technology to have zero beaconing cost.
    pub fn needs_zero_beacon(self) -> bool {
        matches!(self, Algorithm::Greedy2 | Algorithm::Combined)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    /// Grid search hit its time limit; the row holds the best profile found.
    Timeout,
    /// The algorithm does not apply to this instance.
    Rejected,
}

/// One CSV line. The column order is part of the output format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: String,
    pub algorithm: Algorithm,
    pub status: Status,
    pub objective: Option<f64>,
    pub upper_bound: Option<f64>,
    pub ratio: Option<f64>,
    pub energy: Option<f64>,
    pub wall_time_s: Option<f64>,
    /// Profiles enumerated (grid) or sub-slots awarded (greedy).
    pub iterations: Option<u64>,
}

pub const CSV_HEADER: [&str; 9] = [
    "instance",
    "algorithm",
    "status",
    "objective",
    "upper_bound",
    "ratio",
    "energy",
    "wall_time_s",
    "iterations",
];

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0} requires beacon_cost = 0 for every technology")]
    NeedsZeroBeacon(Algorithm),
    #[error("numeric failure: {0}")]
    Numeric(#[from] RootError),
}

impl From<GreedyError> for RunError {
    fn from(e: GreedyError) -> Self {
        match e {
            GreedyError::BeaconingPresent(GreedyVariant::Gain) => {
                RunError::NeedsZeroBeacon(Algorithm::Greedy1)
            }
            GreedyError::BeaconingPresent(GreedyVariant::GainPerCost) => {
                RunError::NeedsZeroBeacon(Algorithm::Greedy2)
            }
            GreedyError::Root(r) => RunError::Numeric(r),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Detail {
    Grid(SolveReport),
    Greedy(GreedyReport),
    Baseline {
        policy: ThresholdPolicy,
        objective: f64,
        energy: f64,
        wall_time: f64,
    },
}

/// Full outcome of a solve, serialized as the JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub row: ResultRow,
    pub detail: Detail,
}

impl Outcome {
    pub fn policy(&self) -> &ThresholdPolicy {
        match &self.detail {
            Detail::Grid(r) => &r.policy,
            Detail::Greedy(r) => &r.policy,
            Detail::Baseline { policy, .. } => policy,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub grid_time_limit: Option<Duration>,
    pub omit_timing: bool,
}

pub fn ratio(objective: f64, ub: Option<f64>) -> Option<f64> {
    match ub {
        Some(u) if u > 0.0 => Some((objective / u).min(1.0)),
        _ => None,
    }
}

pub fn run_algorithm(
    instance: &str,
    sc: &Scenario,
    alg: Algorithm,
    ub: Option<f64>,
    opts: &RunOptions,
) -> Result<Outcome, RunError> {
    let timing = |t: f64| (!opts.omit_timing).then_some(t);
    let row = |status, objective: f64, energy: f64, ub: Option<f64>, t: f64, it: u64| ResultRow {
        instance: instance.to_string(),
        algorithm: alg,
        status,
        objective: Some(objective),
        upper_bound: ub,
        ratio: ratio(objective, ub),
        energy: Some(energy),
        wall_time_s: timing(t),
        iterations: Some(it),
    };
    match alg {
        Algorithm::Grid => {
            let r = grid_search_with(
                sc,
                &GridOptions {
                    time_limit: opts.grid_time_limit,
                    sequential: false,
                },
            )?;
            let status = if r.complete {
                Status::Ok
            } else {
                Status::Timeout
            };
            let ub = ub.or(r.upper_bound);
            Ok(Outcome {
                row: row(status, r.objective, r.energy, ub, r.wall_time, r.enumerated),
                detail: Detail::Grid(r),
            })
        }
        Algorithm::Greedy1 | Algorithm::Greedy2 | Algorithm::Combined => {
            if alg.needs_zero_beacon() && sc.has_beaconing() {
                return Err(RunError::NeedsZeroBeacon(alg));
            }
            let r = match alg {
                Algorithm::Greedy1 => greedy_construct(sc, GreedyVariant::Gain)?,
                Algorithm::Greedy2 => greedy_construct(sc, GreedyVariant::GainPerCost)?,
                _ => combined_best(sc)?,
            };
            Ok(Outcome {
                row: row(
                    Status::Ok,
                    r.objective,
                    r.energy,
                    ub,
                    r.wall_time,
                    r.iterations as u64,
                ),
                detail: Detail::Greedy(r),
            })
        }
        Algorithm::Arrival | Algorithm::Uniform => {
            let start = Instant::now();
            let policy = if alg == Algorithm::Arrival {
                arrival_rate_greedy(sc)?
            } else {
                class_independent(sc)?.policy(sc)
            };
            let ev = ThresholdEvaluator::new(sc);
            let objective = ev.delivery_of(&policy);
            let energy = ev.energy(policy.thresholds());
            let wall_time = start.elapsed().as_secs_f64();
            Ok(Outcome {
                row: row(Status::Ok, objective, energy, ub, wall_time, 1),
                detail: Detail::Baseline {
                    policy,
                    objective,
                    energy,
                    wall_time,
                },
            })
        }
    }
}

/// Runs each algorithm, sharing one upper bound when the instance has at most
/// `ub_class_cap` classes. Algorithms that do not apply yield `rejected` rows.
pub fn run_instance(
    instance: &str,
    sc: &Scenario,
    algorithms: &[Algorithm],
    ub_class_cap: usize,
    opts: &RunOptions,
) -> Result<Vec<Outcome>, RunError> {
    let mut ub = None;
    let mut out = Vec::with_capacity(algorithms.len());
    let with_ub = sc.num_classes() <= ub_class_cap;
    // grid search produces the bound as a by-product, so run it first
    let mut order: Vec<(usize, Algorithm)> = algorithms.iter().copied().enumerate().collect();
    order.sort_by_key(|&(i, a)| (a != Algorithm::Grid, i));
    for (i, alg) in order {
        if with_ub && ub.is_none() && alg != Algorithm::Grid {
            ub = Some(upper_bound(sc)?);
        }
        match run_algorithm(instance, sc, alg, if with_ub { ub } else { None }, opts) {
            Ok(mut o) => {
                if alg == Algorithm::Grid {
                    if with_ub {
                        ub = o.row.upper_bound;
                    } else {
                        o.row.upper_bound = None;
                        o.row.ratio = None;
                    }
                }
                out.push((i, o));
            }
            Err(RunError::NeedsZeroBeacon(_)) => out.push((
                i,
                Outcome {
                    row: ResultRow {
                        instance: instance.to_string(),
                        algorithm: alg,
                        status: Status::Rejected,
                        objective: None,
                        upper_bound: ub,
                        ratio: None,
                        energy: None,
                        wall_time_s: None,
                        iterations: None,
                    },
                    detail: Detail::Baseline {
                        policy: ThresholdPolicy::empty(sc.num_classes()),
                        objective: 0.0,
                        energy: 0.0,
                        wall_time: 0.0,
                    },
                },
            )),
            Err(e) => return Err(e),
        }
    }
    out.sort_by_key(|(i, _)| *i);
    Ok(out.into_iter().map(|(_, o)| o).collect())
}

pub fn write_csv<W: std::io::Write>(w: W, rows: &[ResultRow]) -> csv::Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}
