//! Policy documents for simulation: either per-class forwarding vectors
//! (`{"vectors": [[1.0, 0.5, 0.0], ...]}`) or one threshold per class
//! (`{"thresholds": [1.5, 0.0]}`). JSON, or TOML by file extension.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use twohop_core::model::{Policy, PolicyError, Scenario, ThresholdPolicy};

use crate::scenario_file::DocFormat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PolicyDoc {
    Vectors { vectors: Vec<Vec<f64>> },
    Thresholds { thresholds: Vec<f64> },
}

#[derive(Debug, Error)]
pub enum PolicyFileError {
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
    Policy(#[from] PolicyError),
}

impl PolicyDoc {
    /// Checks the document against `sc` and expands thresholds into vectors.
    pub fn to_policy(&self, sc: &Scenario) -> Result<Policy, PolicyError> {
        let pol = match self {
            PolicyDoc::Vectors { vectors } => Policy::new(vectors.clone())?,
            PolicyDoc::Thresholds { thresholds } => {
                if thresholds.len() != sc.num_classes() {
                    return Err(PolicyError::ClassCountMismatch {
                        got: thresholds.len(),
                        expected: sc.num_classes(),
                    });
                }
                let h_max = sc.max_threshold();
                if let Some((class, &value)) = thresholds
                    .iter()
                    .enumerate()
                    .find(|(_, h)| !(0.0..=h_max).contains(*h))
                {
                    return Err(PolicyError::ThresholdOutOfRange {
                        class,
                        value,
                        max: h_max,
                    });
                }
                ThresholdPolicy::new(thresholds.clone()).expand(sc)?
            }
        };
        pol.check_shape(sc)?;
        Ok(pol)
    }
}

pub fn parse_policy(
    text: &str,
    format: DocFormat,
    sc: &Scenario,
) -> Result<Policy, PolicyFileError> {
    let doc: PolicyDoc = match format {
        DocFormat::Toml => toml::from_str(text)?,
        DocFormat::Json => serde_json::from_str(text)?,
    };
    Ok(doc.to_policy(sc)?)
}

pub fn load_policy(path: &Path, sc: &Scenario) -> Result<Policy, PolicyFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| PolicyFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("toml") => DocFormat::Toml,
        _ => DocFormat::Json,
    };
    parse_policy(&text, format, sc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use twohop_core::model::NodeClass;

    fn sc() -> Scenario {
        Scenario::builder()
            .deadline(300.0)
            .slot_len(100.0)
            .budget(1.0)
            .technology("r", 0.0)
            .class(NodeClass::with_rate(2, 3, 1e-3, 1.0, "r"))
            .build()
            .unwrap()
    }

    #[test]
    fn thresholds_expand() {
        let p = parse_policy(r#"{"thresholds": [1.5]}"#, DocFormat::Json, &sc()).unwrap();
        assert_eq!(p.class(0), &[1.0, 0.5, 0.0]);
    }

    #[test]
    fn wrong_length_is_structured() {
        let err = parse_policy(r#"{"vectors": [[1.0, 0.0]]}"#, DocFormat::Json, &sc()).unwrap_err();
        assert!(matches!(
            err,
            PolicyFileError::Policy(PolicyError::LengthMismatch {
                class: 0,
                len: 2,
                expected: 3
            })
        ));
        let err = parse_policy(r#"{"thresholds": [5.0]}"#, DocFormat::Json, &sc()).unwrap_err();
        assert!(matches!(
            err,
            PolicyFileError::Policy(PolicyError::ThresholdOutOfRange { .. })
        ));
    }
}
