//! Incremental per-set statistics `s_{i|Q}(t)` and the empirical Borda score.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::{check_one_hot, ObservationVector};
use crate::query::{ArmId, QuerySet};
use crate::scalar::{cmp_scalar, Scalar};

/// Pointwise transform applied before averaging.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Transform {
    /// `r(x) = x`.
    Identity,
    /// `r(x) = min(max(x, lo), hi)`.
    Clip { lo: f64, hi: f64 },
    /// `r(x) = 1` if `x >= threshold`, else `0`.
    Indicator { threshold: f64 },
}

impl Transform {
    /// Applies the transform.
    pub fn apply<T: Scalar>(&self, x: &T) -> T {
        match self {
            Self::Identity => x.clone(),
            Self::Clip { lo, hi } => {
                let (lo, hi) = (T::from_f64_lossy(*lo), T::from_f64_lossy(*hi));
                if *x < lo {
                    lo
                } else if *x > hi {
                    hi
                } else {
                    x.clone()
                }
            }
            Self::Indicator { threshold } => {
                if *x >= T::from_f64_lossy(*threshold) {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// Which statistic summarizes an arm's observations within a set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StatisticKind {
    /// Arithmetic mean of the observations.
    EmpiricalMean,
    /// Fraction of pulls the arm won; needs winner-indicator feedback.
    WinnerFrequency,
    /// Mean of `r(o)` for a transform `r`.
    TransformMean { transform: Transform },
    /// Sample median, midpoint of the two central values for even counts.
    Median,
    /// `((1/t) sum o^q)^(1/q)` with `q >= 1`.
    PowerMean { q: f64 },
}

impl StatisticKind {
    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::PowerMean { q } if !(*q >= 1.0 && q.is_finite()) => {
                Err(Error::InvalidParameter(format!("power mean needs q >= 1, got {q}")))
            }
            Self::TransformMean { transform: Transform::Clip { lo, hi } } if !(lo <= hi) => {
                Err(Error::InvalidParameter(format!("clip needs lo <= hi, got [{lo}, {hi}]")))
            }
            _ => Ok(()),
        }
    }

    /// Short label used in CSV output.
    pub fn label(&self) -> String {
        match self {
            Self::EmpiricalMean => "mean".into(),
            Self::WinnerFrequency => "winner-frequency".into(),
            Self::TransformMean { transform: Transform::Identity } => "r-mean-identity".into(),
            Self::TransformMean { transform: Transform::Clip { lo, hi } } => format!("r-mean-clip[{lo};{hi}]"),
            Self::TransformMean { transform: Transform::Indicator { threshold } } => {
                format!("r-mean-indicator[{threshold}]")
            }
            Self::Median => "median".into(),
            Self::PowerMean { q } => format!("power-mean[{q}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Aggregate<T> {
    Sums(Vec<T>),
    Wins(Vec<u64>),
    Samples(Vec<Vec<T>>),
}

/// Running statistic of every member arm of one query set.
#[derive(Clone, Debug, PartialEq)]
pub struct StatisticState<T> {
    kind: StatisticKind,
    t: u64,
    agg: Aggregate<T>,
}

impl<T: Scalar> StatisticState<T> {
    /// Fresh state for a set of `arms` members.
    pub fn new(kind: StatisticKind, arms: usize) -> Self {
        let agg = match &kind {
            StatisticKind::WinnerFrequency => Aggregate::Wins(vec![0; arms]),
            StatisticKind::Median => Aggregate::Samples(vec![Vec::new(); arms]),
            _ => Aggregate::Sums(vec![T::zero(); arms]),
        };
        Self { kind, t: 0, agg }
    }

    /// Statistic kind.
    pub fn kind(&self) -> &StatisticKind {
        &self.kind
    }

    /// Number of updates so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    fn arms(&self) -> usize {
        match &self.agg {
            Aggregate::Sums(v) => v.len(),
            Aggregate::Wins(v) => v.len(),
            Aggregate::Samples(v) => v.len(),
        }
    }

    /// Folds one observation vector into the statistic.
    pub fn update(&mut self, obs: &ObservationVector<T>) -> Result<()> {
        if obs.len() != self.arms() {
            return Err(Error::InvalidParameter(format!(
                "observation has {} entries for {} arms",
                obs.len(),
                self.arms()
            )));
        }
        match (&self.kind, &mut self.agg) {
            (StatisticKind::WinnerFrequency, Aggregate::Wins(wins)) => {
                check_one_hot(&obs.values)?;
                for (w, v) in wins.iter_mut().zip(&obs.values) {
                    if v.is_one() {
                        *w += 1;
                    }
                }
            }
            (StatisticKind::Median, Aggregate::Samples(samples)) => {
                for (s, v) in samples.iter_mut().zip(&obs.values) {
                    let at = s.partition_point(|x| cmp_scalar(x, v).is_le());
                    s.insert(at, v.clone());
                }
            }
            (kind, Aggregate::Sums(sums)) => {
                for (s, v) in sums.iter_mut().zip(&obs.values) {
                    *s = s.clone() + summand(kind, v);
                }
            }
            _ => unreachable!("aggregate always matches the statistic kind"),
        }
        self.t += 1;
        Ok(())
    }

    /// Current statistic of every member, aligned with the set's sorted arms.
    pub fn values(&self) -> Result<Vec<T>> {
        if self.t == 0 {
            return Err(Error::NoObservations);
        }
        let t = T::from_count(self.t);
        Ok(match (&self.kind, &self.agg) {
            (StatisticKind::WinnerFrequency, Aggregate::Wins(wins)) => {
                wins.iter().map(|&w| T::from_count(w) / t.clone()).collect()
            }
            (StatisticKind::Median, Aggregate::Samples(samples)) => samples.iter().map(|s| median_sorted(s)).collect(),
            (StatisticKind::PowerMean { q }, Aggregate::Sums(sums)) => {
                sums.iter().map(|s| (s.clone() / t.clone()).powf(1.0 / q)).collect()
            }
            (_, Aggregate::Sums(sums)) => sums.iter().map(|s| s.clone() / t.clone()).collect(),
            _ => unreachable!("aggregate always matches the statistic kind"),
        })
    }
}

fn summand<T: Scalar>(kind: &StatisticKind, v: &T) -> T {
    match kind {
        StatisticKind::TransformMean { transform } => transform.apply(v),
        StatisticKind::PowerMean { q } => v.powf(*q),
        _ => v.clone(),
    }
}

fn median_sorted<T: Scalar>(s: &[T]) -> T {
    let m = s.len();
    if m % 2 == 1 {
        s[m / 2].clone()
    } else {
        (s[m / 2 - 1].clone() + s[m / 2].clone()) / T::from_count(2)
    }
}

/// Batch evaluation of a statistic over a whole observation stream.
///
/// Used as the reference against which incremental updates are checked.
pub fn batch_values<T: Scalar>(kind: &StatisticKind, stream: &[ObservationVector<T>]) -> Result<Vec<T>> {
    let first = stream.first().ok_or(Error::NoObservations)?;
    let arms = first.len();
    let t = T::from_count(stream.len() as u64);
    (0..arms)
        .map(|i| {
            let column: Vec<T> = stream.iter().map(|o| o.values[i].clone()).collect();
            Ok(match kind {
                StatisticKind::Median => {
                    let mut sorted = column;
                    sorted.sort_by(cmp_scalar);
                    median_sorted(&sorted)
                }
                StatisticKind::PowerMean { q } => {
                    let total = column.iter().fold(T::zero(), |acc, v| acc + v.powf(*q));
                    (total / t.clone()).powf(1.0 / q)
                }
                _ => column.iter().fold(T::zero(), |acc, v| acc + summand(kind, v)) / t.clone(),
            })
        })
        .collect()
}

/// Average of `s_{arm|Q}` over every observed set `Q` containing `arm`.
///
/// Unobserved sets are skipped; an arm seen in no set is an error.
pub fn empirical_borda<T: Scalar>(states: &BTreeMap<QuerySet, StatisticState<T>>, arm: ArmId) -> Result<T> {
    let mut total = T::zero();
    let mut count = 0_u64;
    for (q, state) in states {
        if state.t() == 0 {
            continue;
        }
        if let Some(pos) = q.position(arm) {
            total = total + state.values()?[pos].clone();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoObservations);
    }
    Ok(total / T::from_count(count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    fn reward(values: &[f64]) -> ObservationVector<f64> {
        ObservationVector::reward(values.to_vec())
    }

    #[test]
    fn winner_frequency_example() {
        let mut s = StatisticState::<Exact>::new(StatisticKind::WinnerFrequency, 2);
        for w in [0, 0, 1] {
            s.update(&ObservationVector::winner(2, w)).unwrap();
        }
        assert_eq!(s.values().unwrap(), vec![Exact::from_ratio(2, 3), Exact::from_ratio(1, 3)]);
    }

    #[test]
    fn winner_frequency_rejects_non_indicator() {
        let mut s = StatisticState::<f64>::new(StatisticKind::WinnerFrequency, 2);
        assert!(matches!(s.update(&reward(&[0.5, 0.5])), Err(Error::Domain(_))));
        assert_eq!(s.t(), 0);
    }

    #[test]
    fn mean_zero_case() {
        let mut s = StatisticState::<f64>::new(StatisticKind::EmpiricalMean, 2);
        s.update(&reward(&[0.0, 0.0])).unwrap();
        s.update(&reward(&[0.0, 0.0])).unwrap();
        assert_eq!(s.values().unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn power_mean_example() {
        let mut s = StatisticState::<f64>::new(StatisticKind::PowerMean { q: 2.0 }, 1);
        for v in [1.0, 2.0, 2.0] {
            s.update(&reward(&[v])).unwrap();
        }
        assert!((s.values().unwrap()[0] - 3.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn median_examples() {
        let mut s = StatisticState::<f64>::new(StatisticKind::Median, 1);
        for v in [1.0, 3.0, 2.0] {
            s.update(&reward(&[v])).unwrap();
        }
        assert_eq!(s.values().unwrap(), vec![2.0]);
        s.update(&reward(&[4.0])).unwrap();
        assert_eq!(s.values().unwrap(), vec![2.5]);
    }

    #[test]
    fn no_data_and_misaligned() {
        let mut s = StatisticState::<f64>::new(StatisticKind::EmpiricalMean, 2);
        assert!(matches!(s.values(), Err(Error::NoObservations)));
        assert!(s.update(&reward(&[1.0])).is_err());
    }

    #[test]
    fn transforms() {
        let clip = Transform::Clip { lo: 0.0, hi: 1.0 };
        assert_eq!(clip.apply(&1.5_f64), 1.0);
        assert_eq!(clip.apply(&-0.5_f64), 0.0);
        assert_eq!(clip.apply(&0.25_f64), 0.25);
        let ind = Transform::Indicator { threshold: 0.5 };
        assert_eq!(ind.apply(&0.5_f64), 1.0);
        assert_eq!(ind.apply(&0.4_f64), 0.0);
    }

    #[test]
    fn kind_validation() {
        assert!(StatisticKind::PowerMean { q: 0.5 }.validate().is_err());
        assert!(StatisticKind::PowerMean { q: 1.0 }.validate().is_ok());
        let bad = StatisticKind::TransformMean { transform: Transform::Clip { lo: 1.0, hi: 0.0 } };
        assert!(bad.validate().is_err());
    }

    fn state_with(kind: StatisticKind, values: &[f64]) -> StatisticState<f64> {
        let mut s = StatisticState::new(kind, values.len());
        s.update(&reward(values)).unwrap();
        s
    }

    #[test]
    fn borda_example() {
        let mut states = BTreeMap::new();
        states.insert(QuerySet::new([0, 1]).unwrap(), state_with(StatisticKind::EmpiricalMean, &[0.9, 0.1]));
        states.insert(QuerySet::new([0, 2]).unwrap(), state_with(StatisticKind::EmpiricalMean, &[0.8, 0.2]));
        states.insert(QuerySet::new([1, 2]).unwrap(), state_with(StatisticKind::EmpiricalMean, &[0.7, 0.3]));
        assert!((empirical_borda(&states, 0).unwrap() - 0.85).abs() < 1e-12);
        assert!((empirical_borda(&states, 1).unwrap() - 0.4).abs() < 1e-12);
        assert!((empirical_borda(&states, 2).unwrap() - 0.25).abs() < 1e-12);
        assert!(empirical_borda(&states, 3).is_err());
    }

    #[test]
    fn borda_single_set() {
        let mut states = BTreeMap::new();
        states.insert(QuerySet::new([0, 1]).unwrap(), state_with(StatisticKind::EmpiricalMean, &[0.3, 0.6]));
        states.insert(QuerySet::new([0, 2]).unwrap(), StatisticState::new(StatisticKind::EmpiricalMean, 2));
        assert_eq!(empirical_borda(&states, 1).unwrap(), 0.6);
        assert_eq!(empirical_borda(&states, 0).unwrap(), 0.3);
    }
}
