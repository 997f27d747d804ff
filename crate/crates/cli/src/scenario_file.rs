//! Scenario documents (TOML, or JSON by file extension).
//!
//! ```toml
//! deadline_s = 2000.0
//! slot_len_s = 100.0
//! arena_radius_m = 500.0
//! budget = 0.7
//! resolution = 1
//!
//! [[technologies]]
//! id = "zigbee"
//! beacon_cost = 0.0
//!
//! [[classes]]
//! preset = "pedestrian-zigbee"
//! population = 10
//! ttl_slots = 20
//! ```
//!
//! A class needs `speed_mps` and `range_m` unless it names a `preset` or sets
//! `contact_rate`. A technology whose id is a radio preset may omit
//! `beacon_cost`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use twohop_core::model::{NodeClass, Scenario, ScenarioError, Technology, DEFAULT_SPEED_CONSTANT};

use crate::presets::{class_preset, radio_range, PRESET_BEACON_COST, PRESET_TX_COST};

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(#[from] ScenarioError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnologyEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beacon_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub population: u32,
    pub ttl_slots: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_mps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub technology: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub deadline_s: f64,
    pub slot_len_s: f64,
    pub arena_radius_m: f64,
    pub budget: f64,
    pub resolution: u32,
    #[serde(default = "default_speed_constant")]
    pub speed_constant: f64,
    pub technologies: Vec<TechnologyEntry>,
    pub classes: Vec<ClassEntry>,
}

fn default_speed_constant() -> f64 {
    DEFAULT_SPEED_CONSTANT
}

fn missing(index: usize, field: &'static str) -> ScenarioError {
    ScenarioError::InvalidClass {
        index,
        field,
        reason: "missing (no preset or contact_rate to fill it in)".into(),
    }
}

impl ScenarioFile {
    pub fn to_scenario(&self) -> Result<Scenario, ScenarioError> {
        let mut b = Scenario::builder()
            .deadline(self.deadline_s)
            .slot_len(self.slot_len_s)
            .arena_radius(self.arena_radius_m)
            .budget(self.budget)
            .resolution(self.resolution)
            .speed_constant(self.speed_constant);
        for (index, t) in self.technologies.iter().enumerate() {
            let beta = match (t.beacon_cost, radio_range(&t.id)) {
                (Some(b), _) => b,
                (None, Some(_)) => PRESET_BEACON_COST,
                (None, None) => {
                    return Err(ScenarioError::InvalidTechnology {
                        index,
                        field: "beacon_cost",
                        reason: "missing (not a radio preset)".into(),
                    })
                }
            };
            b = b.technology(&t.id, beta);
        }
        for (index, c) in self.classes.iter().enumerate() {
            let preset = match &c.preset {
                Some(name) => {
                    Some(
                        class_preset(name).ok_or_else(|| ScenarioError::InvalidClass {
                            index,
                            field: "preset",
                            reason: format!("unknown preset `{name}`"),
                        })?,
                    )
                }
                None => None,
            };
            let by_rate = c.contact_rate.is_some();
            let speed = c
                .speed_mps
                .or(preset.map(|p| p.0))
                .or(by_rate.then_some(1.0))
                .ok_or_else(|| missing(index, "speed_mps"))?;
            let range = c
                .range_m
                .or(preset.map(|p| p.2))
                .or(by_rate.then_some(1.0))
                .ok_or_else(|| missing(index, "range_m"))?;
            let tx_cost = c
                .tx_cost
                .or(preset.map(|_| PRESET_TX_COST))
                .ok_or_else(|| missing(index, "tx_cost"))?;
            let technology = c
                .technology
                .clone()
                .or(preset.map(|p| p.1.to_string()))
                .ok_or_else(|| missing(index, "technology"))?;
            let mut cls =
                NodeClass::new(c.population, c.ttl_slots, speed, range, tx_cost, technology);
            cls.contact_rate = c.contact_rate;
            b = b.class(cls);
        }
        b.build()
    }

    /// Fully explicit document for `sc` (no presets).
    pub fn from_scenario(sc: &Scenario) -> Self {
        Self {
            deadline_s: sc.deadline(),
            slot_len_s: sc.slot_len(),
            arena_radius_m: sc.arena_radius(),
            budget: sc.budget(),
            resolution: sc.resolution(),
            speed_constant: sc.speed_constant(),
            technologies: sc
                .technologies()
                .iter()
                .map(|t: &Technology| TechnologyEntry {
                    id: t.id.clone(),
                    beacon_cost: Some(t.beacon_cost),
                })
                .collect(),
            classes: sc
                .classes()
                .iter()
                .map(|c| ClassEntry {
                    preset: None,
                    population: c.population,
                    ttl_slots: c.ttl_slots,
                    speed_mps: Some(c.speed),
                    range_m: Some(c.range),
                    tx_cost: Some(c.tx_cost),
                    technology: Some(c.technology.clone()),
                    contact_rate: c.contact_rate,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocFormat {
    Toml,
    Json,
}

impl DocFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => DocFormat::Json,
            _ => DocFormat::Toml,
        }
    }
}

pub fn parse_scenario(text: &str, format: DocFormat) -> Result<Scenario, ScenarioFileError> {
    let doc: ScenarioFile = match format {
        DocFormat::Toml => toml::from_str(text)?,
        DocFormat::Json => serde_json::from_str(text)?,
    };
    Ok(doc.to_scenario()?)
}

pub fn render_scenario(sc: &Scenario) -> String {
    toml::to_string(&ScenarioFile::from_scenario(sc)).expect("scenario documents always serialize")
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text, DocFormat::from_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PRESET_DOC: &str = r#"
deadline_s = 250.0
slot_len_s = 10.0
arena_radius_m = 500.0
budget = 0.5
resolution = 5

[[technologies]]
id = "zigbee"

[[classes]]
preset = "pedestrian-zigbee"
population = 10
ttl_slots = 25
"#;

    #[test]
    fn preset_class() {
        let sc = parse_scenario(PRESET_DOC, DocFormat::Toml).unwrap();
        assert!((sc.contact_rate(0) - 3.1382e-4).abs() < 1e-8);
        assert_eq!(sc.class(0).tx_cost, PRESET_TX_COST);
        assert_eq!(sc.technologies()[0].beacon_cost, PRESET_BEACON_COST);
        assert_eq!(sc.horizon(), 125);
        assert_eq!(sc.ttl(0), 125);
        assert_eq!(sc.sub_slot_len(), 2.0);
    }

    #[test]
    fn round_trip_is_exact() {
        let sc = parse_scenario(PRESET_DOC, DocFormat::Toml).unwrap();
        let sc = sc.with_budget(0.1 + 0.2).unwrap();
        let text = render_scenario(&sc);
        assert_eq!(parse_scenario(&text, DocFormat::Toml).unwrap(), sc);
        let json = serde_json::to_string(&ScenarioFile::from_scenario(&sc)).unwrap();
        assert_eq!(parse_scenario(&json, DocFormat::Json).unwrap(), sc);
    }

    #[test]
    fn errors_name_the_field() {
        let no_classes = PRESET_DOC
            .split("[[classes]]")
            .next()
            .unwrap()
            .replace("resolution = 5\n", "resolution = 5\nclasses = []\n");
        let err = parse_scenario(&no_classes, DocFormat::Toml).unwrap_err();
        assert_eq!(err.to_string(), "at least one class required");

        let bad = PRESET_DOC.replace("population = 10", "population = \"ten\"");
        let msg = parse_scenario(&bad, DocFormat::Toml)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("population"), "{msg}");
        assert!(msg.contains("line"), "{msg}");

        let no_budget = PRESET_DOC.replace("budget = 0.5\n", "");
        let msg = parse_scenario(&no_budget, DocFormat::Toml)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("budget"), "{msg}");

        let bare = PRESET_DOC.replace("preset = \"pedestrian-zigbee\"\n", "");
        let msg = parse_scenario(&bare, DocFormat::Toml)
            .unwrap_err()
            .to_string();
        assert!(msg.starts_with("classes[0].speed_mps"), "{msg}");
    }
}
