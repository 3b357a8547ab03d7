//! State spaces and the set descriptors used as transition targets.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// The state spaces supported by the library.
///
/// Finite sets carry real labels; a state of a finite chain is identified
/// with its label, so moments can be taken directly on states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StateSpace {
    RealLine,
    HalfLinePositive,
    FiniteSet { values: Vec<f64> },
}

impl StateSpace {
    pub fn finite(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("values", "finite state set must be non-empty"));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(invalid("values", format!("label {i} is not finite")));
            }
            if values[..i].contains(v) {
                return Err(invalid("values", format!("label {v} appears twice")));
            }
        }
        Ok(StateSpace::FiniteSet { values })
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            StateSpace::RealLine => x.is_finite(),
            StateSpace::HalfLinePositive => x.is_finite() && x > 0.0,
            StateSpace::FiniteSet { values } => values.contains(&x),
        }
    }

    pub fn finite_values(&self) -> Option<&[f64]> {
        match self {
            StateSpace::FiniteSet { values } => Some(values),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, StateSpace::FiniteSet { .. })
    }

    /// Index of a finite-set label.
    pub fn index_of(&self, x: f64) -> Result<usize> {
        match self {
            StateSpace::FiniteSet { values } => values
                .iter()
                .position(|&v| v == x)
                .ok_or(Error::UnknownState(x)),
            _ => Err(Error::DomainError(
                "continuous state space has no state indices".into(),
            )),
        }
    }
}

/// Set descriptor Γ for transition probabilities.
///
/// Intervals are closed and may have infinite ends. On finite spaces an
/// interval selects every label inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Target {
    Whole,
    Interval { lo: f64, hi: f64 },
    Subset { states: Vec<f64> },
}

impl Target {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Target::Interval { lo, hi }
    }

    pub fn singleton(x: f64) -> Self {
        Target::Subset { states: vec![x] }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            Target::Whole => true,
            Target::Interval { lo, hi } => *lo <= x && x <= *hi,
            Target::Subset { states } => states.contains(&x),
        }
    }

    /// Checks that the target is representable on `space`.
    pub fn validate(&self, space: &StateSpace) -> Result<()> {
        match (self, space) {
            (Target::Whole, _) => Ok(()),
            (Target::Interval { lo, hi }, _) => {
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    Err(Error::UnsupportedTarget(format!(
                        "interval [{lo}, {hi}] is empty or malformed"
                    )))
                } else {
                    Ok(())
                }
            }
            (Target::Subset { states }, StateSpace::FiniteSet { values }) => {
                match states.iter().find(|s| !values.contains(s)) {
                    Some(s) => Err(Error::UnsupportedTarget(format!(
                        "subset member {s} is not a state of the chain"
                    ))),
                    None => Ok(()),
                }
            }
            (Target::Subset { .. }, _) => Err(Error::UnsupportedTarget(
                "explicit subsets are only supported on finite state sets".into(),
            )),
        }
    }

    /// Indices of the finite-set labels selected by the target.
    pub fn indices(&self, values: &[f64]) -> Vec<usize> {
        values
            .iter()
            .enumerate()
            .filter(|(_, &v)| self.contains(v))
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_labels_must_be_distinct() {
        assert!(StateSpace::finite(vec![0.0, 1.0, 0.0]).is_err());
        assert!(StateSpace::finite(vec![]).is_err());
        let s = StateSpace::finite(vec![0.0, 2.5, -1.0]).unwrap();
        assert_eq!(s.index_of(-1.0).unwrap(), 2);
        assert!(matches!(s.index_of(3.0), Err(Error::UnknownState(_))));
    }

    #[test]
    fn target_validation() {
        let line = StateSpace::RealLine;
        assert!(Target::interval(1.0, 0.0).validate(&line).is_err());
        assert!(Target::interval(f64::NEG_INFINITY, 0.0).validate(&line).is_ok());
        assert!(Target::singleton(0.0).validate(&line).is_err());
        let fin = StateSpace::finite(vec![0.0, 1.0]).unwrap();
        assert!(Target::singleton(1.0).validate(&fin).is_ok());
        assert!(Target::singleton(2.0).validate(&fin).is_err());
        assert_eq!(Target::interval(0.5, 5.0).indices(&[0.0, 1.0, 3.0]), vec![1, 2]);
    }
}
