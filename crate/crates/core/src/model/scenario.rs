//! Problem instances: node classes, radio technologies and the global
//! deadline/budget parameters.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mobility constant used by the contact-rate formula for random-direction
/// motion inside a disc.
pub const DEFAULT_SPEED_CONSTANT: f64 = 1.3693;

/// Relative slack allowed when checking a policy against the budget.
pub const FEASIBILITY_RTOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("at least one class required")]
    NoClasses,
    #[error("classes[{index}].{field}: {reason}")]
    InvalidClass {
        index: usize,
        field: &'static str,
        reason: String,
    },
    #[error("technologies[{index}].{field}: {reason}")]
    InvalidTechnology {
        index: usize,
        field: &'static str,
        reason: String,
    },
    #[error("classes[{index}].technology: unknown technology `{id}`")]
    UnknownTechnology { index: usize, id: String },
    #[error("{field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

/// A radio technology. Every class using it shares its beaconing cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Technology {
    pub id: String,
    /// Energy spent per slot in which some class on this technology may transmit.
    pub beacon_cost: f64,
}

impl Technology {
    pub fn new(id: impl Into<String>, beacon_cost: f64) -> Self {
        Self {
            id: id.into(),
            beacon_cost,
        }
    }
}

/// One category of mobile relays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeClass {
    pub population: u32,
    /// Local time to live, in whole slots of length `slot_len`.
    pub ttl_slots: u32,
    /// Average speed, m/s.
    pub speed: f64,
    /// Communication range, m.
    pub range: f64,
    /// Energy per packet handed to a relay of this class.
    pub tx_cost: f64,
    pub technology: String,
    /// Contact rate (1/s) used instead of the mobility formula when set.
    pub contact_rate: Option<f64>,
}

impl NodeClass {
    pub fn new(
        population: u32,
        ttl_slots: u32,
        speed: f64,
        range: f64,
        tx_cost: f64,
        technology: impl Into<String>,
    ) -> Self {
        Self {
            population,
            ttl_slots,
            speed,
            range,
            tx_cost,
            technology: technology.into(),
            contact_rate: None,
        }
    }

    /// A class described directly by its contact rate rather than by mobility.
    pub fn with_rate(
        population: u32,
        ttl_slots: u32,
        rate: f64,
        tx_cost: f64,
        technology: impl Into<String>,
    ) -> Self {
        Self {
            population,
            ttl_slots,
            speed: 1.0,
            range: 1.0,
            tx_cost,
            technology: technology.into(),
            contact_rate: Some(rate),
        }
    }
}

/// Contact rate from mobility: `8 w R v / (pi L^2)`.
pub fn mobility_rate(range: f64, speed: f64, arena_radius: f64, speed_constant: f64) -> f64 {
    8.0 * speed_constant * range * speed / (PI * arena_radius * arena_radius)
}

/// Contact rate of `cls` (at the source or at the sink) inside `sc`'s arena.
pub fn contact_rate(cls: &NodeClass, sc: &Scenario) -> f64 {
    cls.contact_rate
        .unwrap_or_else(|| mobility_rate(cls.range, cls.speed, sc.arena_radius, sc.speed_constant))
}

/// A validated problem instance. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    classes: Vec<NodeClass>,
    technologies: Vec<Technology>,
    deadline: f64,
    slot_len: f64,
    arena_radius: f64,
    budget: f64,
    resolution: u32,
    speed_constant: f64,
    // derived
    slots: usize,
    rates: Vec<f64>,
    tech_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Scenario {
    pub fn builder() -> ScenarioBuilder {
        ScenarioBuilder::default()
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.classes
    }

    pub fn class(&self, c: usize) -> &NodeClass {
        &self.classes[c]
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn technologies(&self) -> &[Technology] {
        &self.technologies
    }

    /// Deadline tau, seconds.
    pub fn deadline(&self) -> f64 {
        self.deadline
    }

    /// Slot length Delta, seconds.
    pub fn slot_len(&self) -> f64 {
        self.slot_len
    }

    pub fn arena_radius(&self) -> f64 {
        self.arena_radius
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Number of sub-slots per slot (1/eps).
    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn speed_constant(&self) -> f64 {
        self.speed_constant
    }

    /// K = floor(tau / Delta).
    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Number of sub-slots K/eps; the length of every policy vector.
    pub fn horizon(&self) -> usize {
        self.slots * self.resolution as usize
    }

    /// Effective sub-slot length eps * Delta.
    pub fn sub_slot_len(&self) -> f64 {
        self.slot_len / f64::from(self.resolution)
    }

    /// Largest admissible threshold, the last sub-slot index.
    pub fn max_threshold(&self) -> f64 {
        (self.horizon() - 1) as f64
    }

    pub fn contact_rate(&self, c: usize) -> f64 {
        self.rates[c]
    }

    /// lambda_c * eps * Delta: expected source contacts of one node per sub-slot.
    pub fn contacts_per_sub_slot(&self, c: usize) -> f64 {
        self.rates[c] * self.sub_slot_len()
    }

    /// Local TTL of class `c` in sub-slots.
    pub fn ttl(&self, c: usize) -> usize {
        self.classes[c].ttl_slots as usize * self.resolution as usize
    }

    /// Index into `technologies()` of the technology used by class `c`.
    pub fn technology_of(&self, c: usize) -> usize {
        self.tech_of[c]
    }

    /// Classes using technology `w`.
    pub fn members(&self, w: usize) -> &[usize] {
        &self.members[w]
    }

    /// Beaconing energy per active sub-slot for technology `w`.
    pub fn beacon_per_sub_slot(&self, w: usize) -> f64 {
        self.technologies[w].beacon_cost / f64::from(self.resolution)
    }

    pub fn has_beaconing(&self) -> bool {
        self.technologies.iter().any(|t| t.beacon_cost > 0.0)
    }

    /// Budget slack used for all feasibility verdicts.
    pub fn feasibility_tolerance(&self) -> f64 {
        FEASIBILITY_RTOL * self.budget.max(1.0)
    }

    /// A class whose transmissions and beacons cost nothing. Such classes are
    /// always set to full transmission before optimizing.
    pub fn is_free(&self, c: usize) -> bool {
        let cls = &self.classes[c];
        let tx = cls.tx_cost * f64::from(cls.population) * self.rates[c];
        tx == 0.0 && self.technologies[self.tech_of[c]].beacon_cost == 0.0
    }

    pub fn with_budget(&self, budget: f64) -> Result<Scenario, ScenarioError> {
        self.to_builder().budget(budget).build()
    }

    pub fn with_resolution(&self, resolution: u32) -> Result<Scenario, ScenarioError> {
        self.to_builder().resolution(resolution).build()
    }

    pub fn to_builder(&self) -> ScenarioBuilder {
        ScenarioBuilder {
            classes: self.classes.clone(),
            technologies: self.technologies.clone(),
            deadline: self.deadline,
            slot_len: self.slot_len,
            arena_radius: self.arena_radius,
            budget: self.budget,
            resolution: self.resolution,
            speed_constant: self.speed_constant,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioBuilder {
    classes: Vec<NodeClass>,
    technologies: Vec<Technology>,
    deadline: f64,
    slot_len: f64,
    arena_radius: f64,
    budget: f64,
    resolution: u32,
    speed_constant: f64,
}

impl Default for ScenarioBuilder {
    fn default() -> Self {
        Self {
            classes: Vec::new(),
            technologies: Vec::new(),
            deadline: 0.0,
            slot_len: 1.0,
            arena_radius: 1.0,
            budget: 0.0,
            resolution: 1,
            speed_constant: DEFAULT_SPEED_CONSTANT,
        }
    }
}

impl ScenarioBuilder {
    pub fn deadline(mut self, seconds: f64) -> Self {
        self.deadline = seconds;
        self
    }

    pub fn slot_len(mut self, seconds: f64) -> Self {
        self.slot_len = seconds;
        self
    }

    pub fn arena_radius(mut self, meters: f64) -> Self {
        self.arena_radius = meters;
        self
    }

    pub fn budget(mut self, budget: f64) -> Self {
        self.budget = budget;
        self
    }

    pub fn resolution(mut self, resolution: u32) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn speed_constant(mut self, w: f64) -> Self {
        self.speed_constant = w;
        self
    }

    pub fn technology(mut self, id: impl Into<String>, beacon_cost: f64) -> Self {
        self.technologies.push(Technology::new(id, beacon_cost));
        self
    }

    pub fn technologies(mut self, techs: impl IntoIterator<Item = Technology>) -> Self {
        self.technologies.extend(techs);
        self
    }

    pub fn class(mut self, cls: NodeClass) -> Self {
        self.classes.push(cls);
        self
    }

    pub fn classes(mut self, classes: impl IntoIterator<Item = NodeClass>) -> Self {
        self.classes.extend(classes);
        self
    }

    pub fn build(self) -> Result<Scenario, ScenarioError> {
        fn param(field: &'static str, reason: &str) -> ScenarioError {
            ScenarioError::InvalidParameter {
                field,
                reason: reason.to_string(),
            }
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;

        if !positive(self.deadline) {
            return Err(param("deadline_s", "must be > 0"));
        }
        if !positive(self.slot_len) {
            return Err(param("slot_len_s", "must be > 0"));
        }
        if !positive(self.arena_radius) {
            return Err(param("arena_radius_m", "must be > 0"));
        }
        if !nonneg(self.budget) {
            return Err(param("budget", "must be >= 0"));
        }
        if self.resolution < 1 {
            return Err(param("resolution", "must be >= 1"));
        }
        if !positive(self.speed_constant) {
            return Err(param("speed_constant", "must be > 0"));
        }
        let slots = (self.deadline / self.slot_len).floor();
        if slots < 1.0 {
            return Err(param("deadline_s", "must cover at least one slot"));
        }
        if self.classes.is_empty() {
            return Err(ScenarioError::NoClasses);
        }

        for (i, t) in self.technologies.iter().enumerate() {
            if !nonneg(t.beacon_cost) {
                return Err(ScenarioError::InvalidTechnology {
                    index: i,
                    field: "beacon_cost",
                    reason: "must be >= 0".into(),
                });
            }
            if self.technologies[..i].iter().any(|o| o.id == t.id) {
                return Err(ScenarioError::InvalidTechnology {
                    index: i,
                    field: "id",
                    reason: format!("duplicate id `{}`", t.id),
                });
            }
        }

        let mut tech_of = Vec::with_capacity(self.classes.len());
        for (i, cls) in self.classes.iter().enumerate() {
            let bad = |field, reason: &str| ScenarioError::InvalidClass {
                index: i,
                field,
                reason: reason.to_string(),
            };
            if cls.population < 1 {
                return Err(bad("population", "must be >= 1"));
            }
            if cls.ttl_slots < 1 {
                return Err(bad("ttl_slots", "must be >= 1"));
            }
            if !positive(cls.speed) {
                return Err(bad("speed_mps", "must be > 0"));
            }
            if !positive(cls.range) {
                return Err(bad("range_m", "must be > 0"));
            }
            if !nonneg(cls.tx_cost) {
                return Err(bad("tx_cost", "must be >= 0"));
            }
            if let Some(rate) = cls.contact_rate {
                if !nonneg(rate) {
                    return Err(bad("contact_rate", "must be >= 0"));
                }
            }
            let w = self
                .technologies
                .iter()
                .position(|t| t.id == cls.technology)
                .ok_or_else(|| ScenarioError::UnknownTechnology {
                    index: i,
                    id: cls.technology.clone(),
                })?;
            tech_of.push(w);
        }

        let mut members = vec![Vec::new(); self.technologies.len()];
        for (c, &w) in tech_of.iter().enumerate() {
            members[w].push(c);
        }
        let rates = self
            .classes
            .iter()
            .map(|cls| {
                cls.contact_rate.unwrap_or_else(|| {
                    mobility_rate(cls.range, cls.speed, self.arena_radius, self.speed_constant)
                })
            })
            .collect();

        Ok(Scenario {
            classes: self.classes,
            technologies: self.technologies,
            deadline: self.deadline,
            slot_len: self.slot_len,
            arena_radius: self.arena_radius,
            budget: self.budget,
            resolution: self.resolution,
            speed_constant: self.speed_constant,
            slots: slots as usize,
            rates,
            tech_of,
            members,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ScenarioBuilder {
        Scenario::builder()
            .deadline(100.0)
            .slot_len(10.0)
            .arena_radius(500.0)
            .budget(1.0)
            .technology("zigbee", 0.0)
    }

    #[test]
    fn pedestrian_zigbee_rate() {
        let sc = base()
            .class(NodeClass::new(5, 10, 1.5, 15.0, 0.1, "zigbee"))
            .build()
            .unwrap();
        assert!((sc.contact_rate(0) - 3.1382e-4).abs() < 5e-8);
    }

    #[test]
    fn vehicle_wifi_rate() {
        let r = mobility_rate(100.0, 9.0, 1000.0, DEFAULT_SPEED_CONSTANT);
        assert!((r - 3.1382e-3).abs() < 5e-7);
    }

    #[test]
    fn doubling_radius_quarters_rate() {
        let a = mobility_rate(50.0, 6.0, 350.0, DEFAULT_SPEED_CONSTANT);
        let b = mobility_rate(50.0, 6.0, 700.0, DEFAULT_SPEED_CONSTANT);
        assert!((a / 4.0 - b).abs() <= 1e-18);
    }

    #[test]
    fn rate_override_wins() {
        let sc = base()
            .class(NodeClass::with_rate(1, 1, 2e-4, 1.0, "zigbee"))
            .build()
            .unwrap();
        assert_eq!(sc.contact_rate(0), 2e-4);
        assert_eq!(contact_rate(sc.class(0), &sc), 2e-4);
    }

    #[test]
    fn derived_quantities() {
        let sc = base()
            .deadline(105.0)
            .resolution(5)
            .class(NodeClass::new(5, 3, 1.5, 15.0, 0.1, "zigbee"))
            .build()
            .unwrap();
        assert_eq!(sc.slots(), 10);
        assert_eq!(sc.horizon(), 50);
        assert_eq!(sc.sub_slot_len(), 2.0);
        assert_eq!(sc.ttl(0), 15);
        assert_eq!(sc.max_threshold(), 49.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(base().build(), Err(ScenarioError::NoClasses));
        let err = base()
            .class(NodeClass::new(0, 1, 1.0, 1.0, 0.1, "zigbee"))
            .build()
            .unwrap_err();
        assert!(err.to_string().starts_with("classes[0].population"));
        let err = base()
            .class(NodeClass::new(1, 1, 1.0, 1.0, 0.1, "wifi"))
            .build()
            .unwrap_err();
        assert!(matches!(err, ScenarioError::UnknownTechnology { .. }));
        let err = base()
            .deadline(5.0)
            .class(NodeClass::new(1, 1, 1.0, 1.0, 0.1, "zigbee"))
            .build()
            .unwrap_err();
        assert!(err.to_string().starts_with("deadline_s"));
        let err = base()
            .technology("zigbee", 1.0)
            .class(NodeClass::new(1, 1, 1.0, 1.0, 0.1, "zigbee"))
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn free_class_detection() {
        let sc = base()
            .technology("bt", 1e-3)
            .class(NodeClass::new(1, 1, 1.0, 1.0, 0.0, "zigbee"))
            .class(NodeClass::new(1, 1, 1.0, 1.0, 0.0, "bt"))
            .class(NodeClass::new(1, 1, 1.0, 1.0, 0.2, "zigbee"))
            .build()
            .unwrap();
        assert!(sc.is_free(0));
        assert!(!sc.is_free(1));
        assert!(!sc.is_free(2));
    }
}
