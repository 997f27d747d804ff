use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Scenario;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("class {class}: slot {slot} has forwarding probability {value} outside [0, 1]")]
    ProbabilityOutOfRange {
        class: usize,
        slot: usize,
        value: f64,
    },
    #[error("class {class}: vector length {len}, expected {expected}")]
    LengthMismatch {
        class: usize,
        len: usize,
        expected: usize,
    },
    #[error("policy has {got} classes, scenario has {expected}")]
    ClassCountMismatch { got: usize, expected: usize },
    #[error("class {class}: threshold {value} outside [0, {max}]")]
    ThresholdOutOfRange { class: usize, value: f64, max: f64 },
}

/// Per-class forwarding probabilities, one entry per sub-slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Policy {
    vectors: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self, PolicyError> {
        let expected = vectors.first().map_or(0, Vec::len);
        for (class, v) in vectors.iter().enumerate() {
            if v.len() != expected {
                return Err(PolicyError::LengthMismatch {
                    class,
                    len: v.len(),
                    expected,
                });
            }
            if let Some((slot, &value)) = v
                .iter()
                .enumerate()
                .find(|(_, &x)| !(0.0..=1.0).contains(&x))
            {
                return Err(PolicyError::ProbabilityOutOfRange { class, slot, value });
            }
        }
        Ok(Self { vectors })
    }

    pub fn zeros(classes: usize, len: usize) -> Self {
        Self {
            vectors: vec![vec![0.0; len]; classes],
        }
    }

    pub fn ones(classes: usize, len: usize) -> Self {
        Self {
            vectors: vec![vec![1.0; len]; classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.vectors.len()
    }

    /// Number of sub-slots covered.
    pub fn len(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class(&self, c: usize) -> &[f64] {
        &self.vectors[c]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Checks that the policy has one vector per class of `sc`, each covering
    /// the scenario horizon.
    pub fn check_shape(&self, sc: &Scenario) -> Result<(), PolicyError> {
        if self.num_classes() != sc.num_classes() {
            return Err(PolicyError::ClassCountMismatch {
                got: self.num_classes(),
                expected: sc.num_classes(),
            });
        }
        if self.len() != sc.horizon() {
            return Err(PolicyError::LengthMismatch {
                class: 0,
                len: self.len(),
                expected: sc.horizon(),
            });
        }
        Ok(())
    }

    /// Returns the threshold form if every class vector has threshold shape.
    pub fn to_threshold(&self) -> Option<ThresholdPolicy> {
        self.vectors
            .iter()
            .map(|v| threshold_of(v))
            .collect::<Option<Vec<_>>>()
            .map(|thresholds| ThresholdPolicy { thresholds })
    }
}

impl TryFrom<Vec<Vec<f64>>> for Policy {
    type Error = PolicyError;
    fn try_from(v: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Policy::new(v)
    }
}

impl From<Policy> for Vec<Vec<f64>> {
    fn from(p: Policy) -> Self {
        p.vectors
    }
}

fn threshold_of(v: &[f64]) -> Option<f64> {
    let m = v.iter().take_while(|&&x| x == 1.0).count();
    let alpha = v.get(m).copied().unwrap_or(0.0);
    let rest_zero = v.iter().skip(m + 1).all(|&x| x == 0.0);
    if !rest_zero || alpha >= 1.0 || m == v.len() {
        return None;
    }
    Some(m as f64 + alpha)
}

/// Per-class thresholds h_c: transmit with probability 1 before floor(h_c),
/// with the fractional part at floor(h_c), never after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    thresholds: Vec<f64>,
}

impl ThresholdPolicy {
    /// # Panics
    /// Panics on negative or non-finite thresholds.
    pub fn new(thresholds: Vec<f64>) -> Self {
        assert!(
            thresholds.iter().all(|h| h.is_finite() && *h >= 0.0),
            "thresholds must be finite and nonnegative: {thresholds:?}"
        );
        Self { thresholds }
    }

    pub fn empty(classes: usize) -> Self {
        Self {
            thresholds: vec![0.0; classes],
        }
    }

    /// Every class at the largest admissible threshold.
    pub fn full(sc: &Scenario) -> Self {
        Self {
            thresholds: vec![sc.max_threshold(); sc.num_classes()],
        }
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn into_thresholds(self) -> Vec<f64> {
        self.thresholds
    }

    pub fn get(&self, c: usize) -> f64 {
        self.thresholds[c]
    }

    pub fn integer_part(&self, c: usize) -> usize {
        self.thresholds[c].floor() as usize
    }

    /// Fractional tail alpha in [0, 1).
    pub fn fraction(&self, c: usize) -> f64 {
        let h = self.thresholds[c];
        h - h.floor()
    }

    /// Total sub-slots of transmission across classes.
    pub fn total_mass(&self) -> f64 {
        self.thresholds.iter().sum()
    }

    pub fn check_range(&self, sc: &Scenario) -> Result<(), PolicyError> {
        if self.thresholds.len() != sc.num_classes() {
            return Err(PolicyError::ClassCountMismatch {
                got: self.thresholds.len(),
                expected: sc.num_classes(),
            });
        }
        let max = sc.max_threshold();
        match self.thresholds.iter().position(|&h| h > max) {
            Some(class) => Err(PolicyError::ThresholdOutOfRange {
                class,
                value: self.thresholds[class],
                max,
            }),
            None => Ok(()),
        }
    }

    /// Expands to per-sub-slot probabilities over the scenario horizon.
    pub fn expand(&self, sc: &Scenario) -> Result<Policy, PolicyError> {
        self.check_range(sc)?;
        let n = sc.horizon();
        let vectors = (0..self.thresholds.len())
            .map(|c| {
                let m = self.integer_part(c);
                let mut v = vec![0.0; n];
                v[..m].fill(1.0);
                v[m] = self.fraction(c);
                v
            })
            .collect();
        Ok(Policy { vectors })
    }
}

/// Free-function form of [`ThresholdPolicy::expand`].
pub fn expand_threshold(tp: &ThresholdPolicy, sc: &Scenario) -> Result<Policy, PolicyError> {
    tp.expand(sc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NodeClass;
    use proptest::prelude::*;

    fn scenario(slots: usize, resolution: u32) -> Scenario {
        Scenario::builder()
            .deadline(slots as f64)
            .slot_len(1.0)
            .budget(1.0)
            .resolution(resolution)
            .technology("t", 0.0)
            .class(NodeClass::with_rate(1, 1, 0.1, 1.0, "t"))
            .class(NodeClass::with_rate(1, 1, 0.1, 1.0, "t"))
            .build()
            .unwrap()
    }

    #[test]
    fn expand_shapes() {
        let sc = scenario(4, 1);
        let p = ThresholdPolicy::new(vec![0.0, 2.5]).expand(&sc).unwrap();
        assert_eq!(p.class(0), &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.class(1), &[1.0, 1.0, 0.5, 0.0]);

        let p = ThresholdPolicy::new(vec![3.0, 1.0]).expand(&sc).unwrap();
        assert_eq!(p.class(0), &[1.0, 1.0, 1.0, 0.0]);
        assert_eq!(p.to_threshold().unwrap().thresholds(), &[3.0, 1.0]);
    }

    #[test]
    fn expand_rejects_out_of_range() {
        let sc = scenario(4, 1);
        let err = ThresholdPolicy::new(vec![3.5, 0.0])
            .expand(&sc)
            .unwrap_err();
        assert!(matches!(
            err,
            PolicyError::ThresholdOutOfRange { class: 0, .. }
        ));
        let err = ThresholdPolicy::new(vec![1.0]).expand(&sc).unwrap_err();
        assert!(matches!(err, PolicyError::ClassCountMismatch { .. }));
    }

    #[test]
    fn policy_validation() {
        assert!(Policy::new(vec![vec![0.0, 1.0], vec![0.5]]).is_err());
        assert!(Policy::new(vec![vec![0.0, 1.2]]).is_err());
        assert!(Policy::new(vec![vec![0.0, f64::NAN]]).is_err());
        let p = Policy::new(vec![vec![1.0, 0.0, 1.0]]).unwrap();
        assert!(p.to_threshold().is_none());
        assert!(Policy::ones(1, 3).to_threshold().is_none());
    }

    proptest! {
        #[test]
        fn expand_then_extract_is_identity(
            res in 1u32..5,
            slots in 1usize..8,
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let sc = scenario(slots, res);
            let hmax = sc.max_threshold();
            let tp = ThresholdPolicy::new(vec![a * hmax, b * hmax]);
            let p = tp.expand(&sc).unwrap();
            prop_assert_eq!(p.len(), sc.horizon());
            let back = p.to_threshold().unwrap();
            for c in 0..2 {
                prop_assert!((back.get(c) - tp.get(c)).abs() < 1e-12);
                let mass: f64 = p.class(c).iter().sum();
                prop_assert!((mass - tp.get(c)).abs() < 1e-9);
            }
        }
    }
}
