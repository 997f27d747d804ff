//! Seeded parameter sweeps over generated instances.
//!
//! Instances are generated up front from one ChaCha stream, solved in
//! parallel, and written in generation order, so a `(seed, spec)` pair always
//! yields the same table (timing columns aside, which can be omitted).

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;
use twohop_core::model::{Scenario, ScenarioError};

use crate::presets::{scalability_instance, GridInstance, ARENA_RADII, DEADLINE_SLOTS};
use crate::report::{run_instance, Algorithm, ResultRow, RunError, RunOptions};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SweepMode {
    /// `count` instances with class counts, deadlines, radii and class
    /// presets drawn uniformly.
    Random { count: usize, classes: Vec<usize> },
    /// Every (deadline, radius, class count) cell, with `per_cell` randomly
    /// composed class sets in each.
    Cross {
        #[serde(default = "default_deadlines")]
        deadline_slots: Vec<usize>,
        #[serde(default = "default_radii")]
        arena_radii: Vec<f64>,
        classes: Vec<usize>,
        per_cell: usize,
    },
    /// Random scalability instances with `per_count` instances per class count.
    Scalability {
        classes: Vec<usize>,
        per_count: usize,
        /// Grid search is skipped above this many classes.
        grid_class_cap: usize,
    },
}

fn default_deadlines() -> Vec<usize> {
    DEADLINE_SLOTS.to_vec()
}

fn default_radii() -> Vec<f64> {
    ARENA_RADII.to_vec()
}

fn default_budget_fraction() -> (f64, f64) {
    (0.1, 0.6)
}

fn default_ttl_fraction() -> f64 {
    1.0
}

fn default_ub_cap() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SweepSpec {
    #[serde(flatten)]
    pub mode: SweepMode,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    /// Preset-grid instances only; scalability instances use their own.
    #[serde(default = "default_resolution")]
    pub resolution: u32,
    /// Budget drawn uniformly from this fraction range of the full cost.
    #[serde(default = "default_budget_fraction")]
    pub budget_fraction: (f64, f64),
    #[serde(default = "default_ttl_fraction")]
    pub ttl_fraction: f64,
    /// Set every beaconing cost to zero, as the cost-aware greedy requires.
    #[serde(default)]
    pub zero_beacon: bool,
    #[serde(default = "default_ub_cap")]
    pub ub_class_cap: usize,
    #[serde(default)]
    pub grid_time_limit_s: Option<f64>,
    #[serde(default)]
    pub omit_timing: bool,
}

fn default_resolution() -> u32 {
    5
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("{0}: empty range")]
    EmptyRange(&'static str),
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("instance {id}: {source}")]
    Instance { id: String, source: ScenarioError },
    #[error("instance {id}: {source}")]
    Run { id: String, source: RunError },
}

fn non_empty<T>(v: &[T], field: &'static str) -> Result<(), SweepError> {
    if v.is_empty() {
        Err(SweepError::EmptyRange(field))
    } else {
        Ok(())
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        non_empty(&self.algorithms, "algorithms")?;
        let (lo, hi) = self.budget_fraction;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(SweepError::Invalid {
                field: "budget_fraction",
                reason: format!("({lo}, {hi}) is not an ordered pair in [0, 1]"),
            });
        }
        if !(self.ttl_fraction > 0.0 && self.ttl_fraction <= 1.0) {
            return Err(SweepError::Invalid {
                field: "ttl_fraction",
                reason: format!("{} is outside (0, 1]", self.ttl_fraction),
            });
        }
        let positive = |v: &[usize], field| {
            non_empty(v, field)?;
            if v.contains(&0) {
                return Err(SweepError::Invalid {
                    field,
                    reason: "entries must be positive".into(),
                });
            }
            Ok(())
        };
        match &self.mode {
            SweepMode::Random { count, classes } => {
                positive(classes, "classes")?;
                if *count == 0 {
                    return Err(SweepError::EmptyRange("count"));
                }
            }
            SweepMode::Cross {
                deadline_slots,
                arena_radii,
                classes,
                per_cell,
            } => {
                positive(deadline_slots, "deadline_slots")?;
                non_empty(arena_radii, "arena_radii")?;
                positive(classes, "classes")?;
                if *per_cell == 0 {
                    return Err(SweepError::EmptyRange("per_cell"));
                }
            }
            SweepMode::Scalability {
                classes, per_count, ..
            } => {
                positive(classes, "classes")?;
                if *per_count == 0 {
                    return Err(SweepError::EmptyRange("per_count"));
                }
            }
        }
        Ok(())
    }

    fn run_options(&self) -> RunOptions {
        RunOptions {
            grid_time_limit: self.grid_time_limit_s.map(Duration::from_secs_f64),
            omit_timing: self.omit_timing,
        }
    }
}

/// A generated instance and the algorithms to run on it.
#[derive(Debug, Clone)]
pub struct SweepInstance {
    pub id: String,
    pub scenario: Scenario,
    pub algorithms: Vec<Algorithm>,
}

fn build(id: String, inst: &GridInstance) -> Result<Scenario, SweepError> {
    inst.build()
        .map_err(|source| SweepError::Instance { id, source })
}

pub fn generate(spec: &SweepSpec) -> Result<Vec<SweepInstance>, SweepError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::new();
    let zero = |mut g: GridInstance| {
        g.zero_beacon = spec.zero_beacon;
        g
    };
    match &spec.mode {
        SweepMode::Random { count, classes } => {
            for i in 0..*count {
                let nc = classes[rand::Rng::random_range(&mut rng, 0..classes.len())];
                let g = zero(GridInstance::sample(
                    &mut rng,
                    nc,
                    spec.resolution,
                    spec.budget_fraction,
                    spec.ttl_fraction,
                ));
                let id = format!("r{i:04}");
                out.push(SweepInstance {
                    scenario: build(id.clone(), &g)?,
                    id,
                    algorithms: spec.algorithms.clone(),
                });
            }
        }
        SweepMode::Cross {
            deadline_slots,
            arena_radii,
            classes,
            per_cell,
        } => {
            for &k in deadline_slots {
                for &l in arena_radii {
                    for &nc in classes {
                        for rep in 0..*per_cell {
                            let mut g = zero(GridInstance::sample(
                                &mut rng,
                                nc,
                                spec.resolution,
                                spec.budget_fraction,
                                spec.ttl_fraction,
                            ));
                            g.deadline_slots = k;
                            g.arena_radius = l;
                            let id = format!("K{k}-L{l}-C{nc}-{rep}");
                            out.push(SweepInstance {
                                scenario: build(id.clone(), &g)?,
                                id,
                                algorithms: spec.algorithms.clone(),
                            });
                        }
                    }
                }
            }
        }
        SweepMode::Scalability {
            classes,
            per_count,
            grid_class_cap,
        } => {
            for &nc in classes {
                for rep in 0..*per_count {
                    let frac = if spec.budget_fraction.0 < spec.budget_fraction.1 {
                        rand::Rng::random_range(
                            &mut rng,
                            spec.budget_fraction.0..spec.budget_fraction.1,
                        )
                    } else {
                        spec.budget_fraction.0
                    };
                    let id = format!("S{nc}-{rep}");
                    let mut sc = scalability_instance(&mut rng, nc, frac).map_err(|source| {
                        SweepError::Instance {
                            id: id.clone(),
                            source,
                        }
                    })?;
                    if spec.zero_beacon {
                        sc = strip_beacons(&sc).map_err(|source| SweepError::Instance {
                            id: id.clone(),
                            source,
                        })?;
                    }
                    let algorithms = spec
                        .algorithms
                        .iter()
                        .copied()
                        .filter(|&a| a != Algorithm::Grid || nc <= *grid_class_cap)
                        .collect();
                    out.push(SweepInstance {
                        id,
                        scenario: sc,
                        algorithms,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// The same scenario with every beaconing cost set to zero.
pub fn strip_beacons(sc: &Scenario) -> Result<Scenario, ScenarioError> {
    Scenario::builder()
        .deadline(sc.deadline())
        .slot_len(sc.slot_len())
        .arena_radius(sc.arena_radius())
        .budget(sc.budget())
        .resolution(sc.resolution())
        .speed_constant(sc.speed_constant())
        .technologies(
            sc.technologies()
                .iter()
                .map(|t| twohop_core::model::Technology::new(t.id.clone(), 0.0)),
        )
        .classes(sc.classes().iter().cloned())
        .build()
}

/// Runs every generated instance; rows come back in instance order, and
/// within an instance in the spec's algorithm order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>, SweepError> {
    let instances = generate(spec)?;
    let opts = spec.run_options();
    let results: Vec<Result<Vec<ResultRow>, SweepError>> = instances
        .par_iter()
        .map(|inst| {
            run_instance(
                &inst.id,
                &inst.scenario,
                &inst.algorithms,
                spec.ub_class_cap,
                &opts,
            )
            .map(|os| os.into_iter().map(|o| o.row).collect())
            .map_err(|source| SweepError::Run {
                id: inst.id.clone(),
                source,
            })
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}
