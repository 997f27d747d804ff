//! Mobility and radio presets, and random instance generators for sweeps.
//!
//! Per-packet transmission and per-slot beaconing energies are not published
//! for the radio presets; they default to the midpoints of the scalability
//! sampling intervals and can be overridden in scenario files.

use rand::Rng;
use twohop_core::model::{NodeClass, Scenario, ScenarioError, ThresholdPolicy};

/// Average speeds, m/s.
pub const MOBILITY: [(&str, f64); 3] = [("pedestrian", 1.5), ("bicycle", 6.0), ("vehicle", 9.0)];

/// Communication ranges, m.
pub const RADIOS: [(&str, f64); 3] = [
    ("zigbee", 15.0),
    ("bluetooth", 50.0),
    ("wifi-direct", 100.0),
];

/// Reconstructed energy per forwarded packet.
pub const PRESET_TX_COST: f64 = 0.15;

/// Reconstructed beaconing energy per slot.
pub const PRESET_BEACON_COST: f64 = 5.5e-7;

/// Slot length used by every experiment grid, seconds.
pub const SLOT_LEN_S: f64 = 10.0;

/// Experiment value sets: deadlines (in slots), arena radii (m), populations.
pub const DEADLINE_SLOTS: [usize; 4] = [25, 50, 100, 250];
pub const ARENA_RADII: [f64; 4] = [350.0, 500.0, 750.0, 1000.0];
pub const POPULATIONS: [u32; 3] = [9, 15, 20];

/// Scalability sampling intervals.
pub const SCAL_RANGE: (f64, f64) = (15.0, 50.0);
pub const SCAL_SPEED: (f64, f64) = (1.0, 15.0);
pub const SCAL_TX_COST: (f64, f64) = (0.05, 0.25);
pub const SCAL_BEACON: (f64, f64) = (3e-7, 8e-7);
pub const SCAL_DEADLINE_SLOTS: usize = 100;
pub const SCAL_POPULATION: u32 = 10;
pub const SCAL_RADIUS: f64 = 500.0;
pub const SCAL_RESOLUTION: u32 = 3;

pub fn mobility_speed(name: &str) -> Option<f64> {
    MOBILITY.iter().find(|m| m.0 == name).map(|m| m.1)
}

pub fn radio_range(name: &str) -> Option<f64> {
    RADIOS.iter().find(|r| r.0 == name).map(|r| r.1)
}

/// Splits a class preset such as `pedestrian-zigbee` or `vehicle-wifi-direct`
/// into its speed and radio.
pub fn class_preset(name: &str) -> Option<(f64, &'static str, f64)> {
    let (mobility, radio) = name.split_once('-')?;
    let speed = mobility_speed(mobility)?;
    let (radio, range) = RADIOS.iter().find(|r| r.0 == radio)?;
    Some((speed, radio, *range))
}

/// Cost of transmitting in every sub-slot with every class.
pub fn full_profile_cost(sc: &Scenario) -> f64 {
    twohop_core::model::ThresholdEvaluator::new(sc)
        .cost()
        .energy(ThresholdPolicy::full(sc).thresholds())
}

/// Parameters for one experiment-grid instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GridInstance {
    pub deadline_slots: usize,
    pub arena_radius: f64,
    /// (mobility preset, radio preset, population) per class
    pub classes: Vec<(String, String, u32)>,
    pub resolution: u32,
    /// Budget as a fraction of the full-transmission cost.
    pub budget_fraction: f64,
    /// Local TTL as a fraction of the deadline, at least one slot.
    pub ttl_fraction: f64,
    /// Drop beaconing (required by the gain-per-cost greedy).
    pub zero_beacon: bool,
}

impl GridInstance {
    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        let ttl = ((self.deadline_slots as f64 * self.ttl_fraction).round() as u32).max(1);
        let beacon = if self.zero_beacon {
            0.0
        } else {
            PRESET_BEACON_COST
        };
        let mut b = Scenario::builder()
            .deadline(self.deadline_slots as f64 * SLOT_LEN_S)
            .slot_len(SLOT_LEN_S)
            .arena_radius(self.arena_radius)
            .resolution(self.resolution)
            .budget(0.0);
        for (id, _) in RADIOS {
            b = b.technology(id, beacon);
        }
        for (mob, radio, n) in &self.classes {
            let speed = mobility_speed(mob).ok_or_else(|| unknown("mobility", mob))?;
            let range = radio_range(radio).ok_or_else(|| unknown("radio", radio))?;
            b = b.class(NodeClass::new(
                *n,
                ttl,
                speed,
                range,
                PRESET_TX_COST,
                radio.as_str(),
            ));
        }
        let sc = b.build()?;
        let full = full_profile_cost(&sc);
        sc.with_budget(full * self.budget_fraction)
    }

    /// Draws classes uniformly from the presets and the value sets.
    pub fn sample<R: Rng>(
        rng: &mut R,
        classes: usize,
        resolution: u32,
        budget_fraction: (f64, f64),
        ttl_fraction: f64,
    ) -> Self {
        let pick = |rng: &mut R, n: usize| rng.random_range(0..n);
        let deadline_slots = DEADLINE_SLOTS[pick(rng, DEADLINE_SLOTS.len())];
        let arena_radius = ARENA_RADII[pick(rng, ARENA_RADII.len())];
        let classes = (0..classes)
            .map(|_| {
                let m = MOBILITY[pick(rng, MOBILITY.len())].0;
                let r = RADIOS[pick(rng, RADIOS.len())].0;
                let n = POPULATIONS[pick(rng, POPULATIONS.len())];
                (m.to_string(), r.to_string(), n)
            })
            .collect();
        let budget_fraction = if budget_fraction.0 < budget_fraction.1 {
            rng.random_range(budget_fraction.0..budget_fraction.1)
        } else {
            budget_fraction.0
        };
        Self {
            deadline_slots,
            arena_radius,
            classes,
            resolution,
            budget_fraction,
            ttl_fraction,
            zero_beacon: false,
        }
    }
}

fn unknown(kind: &'static str, name: &str) -> ScenarioError {
    ScenarioError::InvalidParameter {
        field: kind,
        reason: format!("unknown preset `{name}`"),
    }
}

/// Random instance for the class-count scaling runs: every class gets its own
/// technology and mobility drawn from the scalability intervals.
pub fn scalability_instance<R: Rng>(
    rng: &mut R,
    classes: usize,
    budget_fraction: f64,
) -> Result<Scenario, ScenarioError> {
    let mut b = Scenario::builder()
        .deadline(SCAL_DEADLINE_SLOTS as f64 * SLOT_LEN_S)
        .slot_len(SLOT_LEN_S)
        .arena_radius(SCAL_RADIUS)
        .resolution(SCAL_RESOLUTION)
        .budget(0.0);
    for c in 0..classes {
        let id = format!("tech{c}");
        let range = rng.random_range(SCAL_RANGE.0..=SCAL_RANGE.1);
        let speed = rng.random_range(SCAL_SPEED.0..=SCAL_SPEED.1);
        let rho = rng.random_range(SCAL_TX_COST.0..=SCAL_TX_COST.1);
        let beta = rng.random_range(SCAL_BEACON.0..=SCAL_BEACON.1);
        b = b.technology(&id, beta).class(NodeClass::new(
            SCAL_POPULATION,
            SCAL_DEADLINE_SLOTS as u32,
            speed,
            range,
            rho,
            id.as_str(),
        ));
    }
    let sc = b.build()?;
    let full = full_profile_cost(&sc);
    sc.with_budget(full * budget_fraction)
}
