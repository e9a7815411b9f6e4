//! Feedback vectors returned by a pull.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Domain of the entries of an observation vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationKind {
    /// Real-valued per-arm rewards.
    Reward,
    /// One-hot indicator of the winning arm.
    Winner,
    /// Ranks `1..=|Q|`, a permutation.
    Rank,
}

/// Per-arm feedback aligned with the sorted members of a query set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationVector<T> {
    /// Entry domain.
    pub kind: ObservationKind,
    /// One value per member arm, in the query set's sorted order.
    pub values: Vec<T>,
}

impl<T: Scalar> ObservationVector<T> {
    /// Real-valued reward feedback.
    pub fn reward(values: Vec<T>) -> Self {
        Self { kind: ObservationKind::Reward, values }
    }

    /// One-hot feedback naming position `winner` out of `len` arms.
    pub fn winner(len: usize, winner: usize) -> Self {
        let values = (0..len).map(|i| if i == winner { T::one() } else { T::zero() }).collect();
        Self { kind: ObservationKind::Winner, values }
    }

    /// Number of entries.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Whether the vector has no entries.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Checks the entry domain invariants for the vector's kind.
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ObservationKind::Reward => {
                if self.values.iter().all(Scalar::is_finite_scalar) {
                    Ok(())
                } else {
                    Err(Error::Domain("non-finite reward".into()))
                }
            }
            ObservationKind::Winner => check_one_hot(&self.values),
            ObservationKind::Rank => {
                let mut seen = vec![false; self.values.len()];
                for v in &self.values {
                    let r = v.to_f64_lossy();
                    let idx = r as usize;
                    if r.fract() != 0.0 || idx < 1 || idx > seen.len() || seen[idx - 1] {
                        return Err(Error::Domain("rank vector is not a permutation".into()));
                    }
                    seen[idx - 1] = true;
                }
                Ok(())
            }
        }
    }
}

/// Verifies that every entry is 0 or 1 and exactly one entry is 1.
pub(crate) fn check_one_hot<T: Scalar>(values: &[T]) -> Result<()> {
    let mut ones = 0;
    for v in values {
        if v.is_one() {
            ones += 1;
        } else if !v.is_zero() {
            return Err(Error::Domain(format!("winner indicator entry {v:?} is not 0 or 1")));
        }
    }
    if ones == 1 {
        Ok(())
    } else {
        Err(Error::Domain(format!("winner indicator has {ones} ones")))
    }
}
