//! Worst-case deterministic instances and the class-membership checker.

use std::collections::BTreeMap;

use super::deterministic::{DeterministicInstance, Trajectory};
use crate::error::{Error, Result};
use crate::limits::{strict_argmax_of, LimitProfile};
use crate::query::{enumerate_query_sets, enumerate_query_sets_up_to, ArmId, QuerySet};
use crate::rate::{rate_inverse, RateFunction};
use crate::scalar::{cmp_scalar, Scalar};

/// Upper limit on the number of query sets an eager generator will visit.
const MAX_SETS: usize = 2_000_000;

fn sets_of<T: Scalar>(profile: &LimitProfile<T>) -> Result<Vec<QuerySet>> {
    if let Some(table) = profile.table() {
        return Ok(table.keys().cloned().collect());
    }
    let sets: Vec<QuerySet> = enumerate_query_sets_up_to(profile.n(), profile.k(), None)?.take(MAX_SETS + 1).collect();
    if sets.len() > MAX_SETS {
        return Err(Error::Unsupported(format!("more than {MAX_SETS} query sets to enumerate")));
    }
    Ok(sets)
}

/// `B' = min_Q gamma^{-1}((S_(1)|Q - S_(|Q|)|Q) / 2)` over every set of the
/// profile (or over `family` when given).
pub fn lower_bound_b_prime<T: Scalar>(profile: &LimitProfile<T>, family: Option<&[QuerySet]>) -> Result<u64> {
    let sets = match family {
        Some(f) => f.to_vec(),
        None => sets_of(profile)?,
    };
    let mut best: Option<u64> = None;
    for q in &sets {
        let sorted = profile.order_statistics(q)?;
        if sorted.len() >= 2 && sorted[0] == sorted[1] {
            return Err(Error::InvalidProfile(format!("tie at the top of {q}")));
        }
        let half = (sorted[0].clone() - sorted[sorted.len() - 1].clone()) / T::from_count(2);
        let t = rate_inverse(profile.rate(), &half)?;
        best = Some(best.map_or(t, |b| b.min(t)));
    }
    best.ok_or_else(|| Error::InvalidProfile("profile has no query sets".into()))
}

/// Base instance and its single-arm swaps for the GCW lower bound.
#[derive(Clone, Debug)]
pub struct GcwLowerBoundFamily<T> {
    /// The switching time `B'`.
    pub b_prime: u64,
    /// Limits after `B'` of the base instance (arm 0 is the GCW).
    pub base_limits: LimitProfile<T>,
    /// Base instance: per-set midpoint before `B'`, sorted limits afterwards.
    pub base: DeterministicInstance<T>,
    /// `(l, s^l)` for every arm `l != 0`; `s^l` has GCW `l`.
    pub swapped: Vec<(ArmId, DeterministicInstance<T>)>,
}

/// Builds the lower-bound family for GCW identification from per-set limit
/// values. Only the multiset of values in each set matters: after `B'` the
/// largest value of every set goes to arm 0 when present and the remaining
/// values are assigned in decreasing order to increasing arm indices.
pub fn make_gcw_lowerbound_instance<T: Scalar>(limits: &LimitProfile<T>) -> Result<GcwLowerBoundFamily<T>> {
    let sets = sets_of(limits)?;
    let b_prime = lower_bound_b_prime(limits, Some(&sets))?;
    let two = T::from_count(2);
    let mut assigned: BTreeMap<QuerySet, Vec<T>> = BTreeMap::new();
    let mut midpoint: BTreeMap<QuerySet, T> = BTreeMap::new();
    for q in &sets {
        let sorted = limits.order_statistics(q)?;
        midpoint.insert(q.clone(), (sorted[0].clone() + sorted[sorted.len() - 1].clone()) / two.clone());
        assigned.insert(q.clone(), sorted);
    }
    let build = |values: &BTreeMap<QuerySet, Vec<T>>, gcw: ArmId| DeterministicInstance {
        n: limits.n(),
        k: limits.k(),
        rate: limits.rate().clone(),
        declared_gcw: Some(gcw),
        sets: values
            .iter()
            .map(|(q, v)| {
                let mid = midpoint[q].clone();
                let traj = v
                    .iter()
                    .map(|after| Trajectory::Step { before: mid.clone(), after: after.clone(), switch_at: b_prime })
                    .collect();
                (q.clone(), traj)
            })
            .collect(),
    };
    let base = build(&assigned, 0);
    let base_limits = LimitProfile::from_table(limits.n(), limits.k(), assigned.clone(), limits.rate().clone())?
        .with_declared_gcw(0);
    let swapped = (1..limits.n())
        .map(|l| {
            let mut values = assigned.clone();
            for (q, v) in values.iter_mut() {
                if let Some(pos) = q.position(l) {
                    let top = strict_argmax_of(v).expect("ties rejected above");
                    v.swap(pos, top);
                }
            }
            (l, build(&values, l))
        })
        .collect();
    Ok(GcwLowerBoundFamily { b_prime, base_limits, base, swapped })
}

/// A necessity instance together with the limits it converges to.
#[derive(Clone, Debug)]
pub struct NecessityInstance<T> {
    /// Limits after snapping every half-gap to the `A/m` grid.
    pub adjusted: LimitProfile<T>,
    /// Deterministic instance with `s = S - A/t` for the per-set argmax and
    /// `s = S + A/t` for the others.
    pub instance: DeterministicInstance<T>,
}

/// Builds the worst-case instance for elimination algorithms.
///
/// Every half-gap `(S_top - S_j) / 2` is moved to the nearest value `A/m`,
/// `m >= 1` integer, so that the perturbation `A/t` closes it exactly at
/// `t = m`. `A` must be at least the largest half-gap.
pub fn make_necessity_instance<T: Scalar>(limits: &LimitProfile<T>, amplitude: T) -> Result<NecessityInstance<T>> {
    if !(amplitude > T::zero()) {
        return Err(Error::InvalidParameter("amplitude must be positive".into()));
    }
    let two = T::from_count(2);
    let mut adjusted = BTreeMap::new();
    let mut sets = BTreeMap::new();
    for q in sets_of(limits)? {
        let v = limits.limits(&q)?;
        let top = strict_argmax_of(&v).ok_or_else(|| Error::InvalidProfile(format!("tie at the top of {q}")))?;
        let mut snapped = v.clone();
        for (j, s) in v.iter().enumerate() {
            if j == top {
                continue;
            }
            let half = (v[top].clone() - s.clone()) / two.clone();
            if half > amplitude {
                return Err(Error::InvalidParameter(format!(
                    "amplitude {amplitude:?} is below the half-gap {half:?} in {q}"
                )));
            }
            let m = (amplitude.clone() / half).to_f64_lossy().round().max(1.0) as u64;
            snapped[j] = v[top].clone() - two.clone() * amplitude.clone() / T::from_count(m);
        }
        let traj = snapped
            .iter()
            .enumerate()
            .map(|(j, s)| Trajectory::Reciprocal {
                limit: s.clone(),
                amplitude: if j == top { -amplitude.clone() } else { amplitude.clone() },
            })
            .collect();
        adjusted.insert(q.clone(), snapped);
        sets.insert(q, traj);
    }
    let rate = RateFunction::Reciprocal { amplitude };
    let mut adjusted = LimitProfile::from_table(limits.n(), limits.k(), adjusted, rate.clone())?;
    if let Some(g) = limits.declared_gcw() {
        adjusted = adjusted.with_declared_gcw(g);
    }
    let instance = DeterministicInstance { n: limits.n(), k: limits.k(), rate, declared_gcw: limits.declared_gcw(), sets };
    Ok(NecessityInstance { adjusted, instance })
}

/// Builds the worst-case instance for Borda-score round robin over the
/// size-`k` sets: every arm follows `S + A/t` except the unique Borda winner,
/// which follows `S - A/t`. Returns the instance and the Borda winner.
pub fn make_round_robin_necessity_instance<T: Scalar>(
    limits: &LimitProfile<T>,
    amplitude: T,
) -> Result<(DeterministicInstance<T>, ArmId)> {
    if !(amplitude > T::zero()) {
        return Err(Error::InvalidParameter("amplitude must be positive".into()));
    }
    let borda = crate::oracle::find_gbw(limits)?;
    let mut sets = BTreeMap::new();
    for q in enumerate_query_sets(limits.n(), limits.k(), None)? {
        let v = limits.limits(&q)?;
        let traj = q
            .arms()
            .iter()
            .zip(v)
            .map(|(&arm, s)| Trajectory::Reciprocal {
                limit: s,
                amplitude: if arm == borda { -amplitude.clone() } else { amplitude.clone() },
            })
            .collect();
        sets.insert(q, traj);
    }
    let instance = DeterministicInstance {
        n: limits.n(),
        k: limits.k(),
        rate: RateFunction::Reciprocal { amplitude },
        declared_gcw: None,
        sets,
    };
    Ok((instance, borda))
}

/// A failed membership condition.
#[derive(Clone, Debug, PartialEq)]
pub enum MembershipViolation {
    /// The limits of a set are not a permutation of the reference limits.
    NotAPermutation { set: QuerySet },
    /// `|s(t) - lim| > gamma(t)` at some pull index.
    Envelope { set: QuerySet, arm: ArmId, t: u64 },
    /// The instance lacks a set the reference defines.
    MissingSet { set: QuerySet },
}

/// Checks that `instance` belongs to the class of instances with limits
/// that permute `reference` within each set and deviate from their limit by
/// at most the instance's rate `gamma(t)` for `t = 1..=horizon`.
pub fn check_membership<T: Scalar>(
    instance: &DeterministicInstance<T>,
    reference: &LimitProfile<T>,
    horizon: u64,
) -> Vec<MembershipViolation> {
    let mut out = Vec::new();
    for (q, traj) in &instance.sets {
        let Ok(mut expected) = reference.limits(q) else {
            out.push(MembershipViolation::MissingSet { set: q.clone() });
            continue;
        };
        let mut got: Vec<T> = traj.iter().map(Trajectory::limit).collect();
        expected.sort_by(cmp_scalar);
        got.sort_by(cmp_scalar);
        if expected != got {
            out.push(MembershipViolation::NotAPermutation { set: q.clone() });
        }
        for (pos, tr) in traj.iter().enumerate() {
            let lim = tr.limit();
            if let Some(t) = (1..=horizon).find(|&t| (tr.eval(t) - lim.clone()).abs() > instance.rate.eval(t)) {
                out.push(MembershipViolation::Envelope { set: q.clone(), arm: q.arms()[pos], t });
            }
        }
    }
    if let Some(table) = reference.table() {
        for q in table.keys() {
            if !instance.sets.contains_key(q) {
                out.push(MembershipViolation::MissingSet { set: q.clone() });
            }
        }
    }
    out
}
