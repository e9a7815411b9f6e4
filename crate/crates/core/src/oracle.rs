//! Ground-truth winners of a limit profile.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{strict_argmax_of, LimitProfile};
use crate::query::{binomial, enumerate_query_sets, enumerate_query_sets_up_to, ArmId, QuerySet};
use crate::scalar::Scalar;

/// Largest number of sets an exhaustive check will visit.
pub const EXHAUSTIVE_LIMIT: u64 = 250_000;

/// Number of sampled sets used to verify a declared winner of a large profile.
pub const SAMPLED_FAMILY: usize = 1000;

/// Winners of a profile under the three notions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinnerReport<T> {
    /// Generalized Condorcet winner, if one exists.
    pub gcw: Option<ArmId>,
    /// All arms maximizing the Borda score over size-`k` sets.
    pub gbw_set: Vec<ArmId>,
    /// All arms maximizing the Copeland score over size-`k` sets.
    pub gcopew_set: Vec<ArmId>,
    /// Borda score of every arm.
    pub borda_scores: Vec<T>,
    /// Copeland score (fraction of won size-`k` sets) of every arm.
    pub copeland_scores: Vec<T>,
}

fn count_up_to(n: usize, k: usize) -> u64 {
    (2..=k).map(|s| binomial(n as u64, s as u64)).fold(0_u64, u64::saturating_add)
}

/// Whether `arm` beats every other member of every set in `sets` that contains it.
fn dominates<T: Scalar>(profile: &LimitProfile<T>, arm: ArmId, sets: impl Iterator<Item = QuerySet>) -> Result<bool> {
    for q in sets {
        let Some(pos) = q.position(arm) else { continue };
        if strict_argmax_of(&profile.limits(&q)?) != Some(pos) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Generalized Condorcet winner: the arm whose limit is strictly largest in
/// every query set containing it.
///
/// Tabulated profiles are checked on their stored sets and small rule-based
/// profiles on all sets of sizes `2..=k`. Large rule-based profiles only
/// have their declared winner verified on a seeded sample of sets.
pub fn find_gcw<T: Scalar>(profile: &LimitProfile<T>) -> Result<Option<ArmId>> {
    let (n, k) = (profile.n(), profile.k());
    if let Some(table) = profile.table() {
        let mut candidate: Vec<bool> = vec![true; n];
        let mut seen = vec![false; n];
        for (q, v) in table {
            let top = strict_argmax_of(v);
            for (pos, &arm) in q.arms().iter().enumerate() {
                seen[arm] = true;
                if top != Some(pos) {
                    candidate[arm] = false;
                }
            }
        }
        return Ok((0..n).find(|&a| candidate[a] && seen[a]));
    }
    if count_up_to(n, k) <= EXHAUSTIVE_LIMIT {
        for arm in 0..n {
            if dominates(profile, arm, enumerate_query_sets_up_to(n, k, Some(arm))?)? {
                return Ok(Some(arm));
            }
        }
        return Ok(None);
    }
    let Some(arm) = profile.declared_gcw() else {
        return Err(Error::Unsupported("large rule-based profile without a declared winner".into()));
    };
    let family = sample_sets_containing(n, k, arm, SAMPLED_FAMILY, 0x5EED_6C17);
    Ok(dominates(profile, arm, family.into_iter())?.then_some(arm))
}

/// Uniformly sampled query sets of random size in `2..=k` that contain `arm`.
pub fn sample_sets_containing(n: usize, k: usize, arm: ArmId, count: usize, seed: u64) -> Vec<QuerySet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let size = rng.random_range(2..=k);
            let mut others: Vec<ArmId> = (0..n).filter(|&a| a != arm).collect();
            for i in 0..size - 1 {
                let j = rng.random_range(i..others.len());
                others.swap(i, j);
            }
            others.truncate(size - 1);
            others.push(arm);
            QuerySet::new(others).expect("distinct arms")
        })
        .collect()
}

/// Borda scores over the size-`k` sets: the average limit of each arm over
/// all `C(n-1, k-1)` sets containing it.
pub fn borda_scores<T: Scalar>(profile: &LimitProfile<T>) -> Result<Vec<T>> {
    let (n, k) = (profile.n(), profile.k());
    if binomial(n as u64, k as u64) > EXHAUSTIVE_LIMIT {
        return Err(Error::Unsupported(format!("C({n},{k}) sets are too many to enumerate")));
    }
    let mut sums = vec![T::zero(); n];
    for q in enumerate_query_sets(n, k, None)? {
        for (&arm, v) in q.arms().iter().zip(profile.limits(&q)?) {
            sums[arm] = sums[arm].clone() + v;
        }
    }
    let per_arm = T::from_count(binomial(n as u64 - 1, k as u64 - 1));
    Ok(sums.into_iter().map(|s| s / per_arm.clone()).collect())
}

/// The unique Borda winner; ties are an error.
pub fn find_gbw<T: Scalar>(profile: &LimitProfile<T>) -> Result<ArmId> {
    let scores = borda_scores(profile)?;
    strict_argmax_of(&scores).ok_or_else(|| Error::InvalidProfile("Borda scores tie at the top".into()))
}

fn argmax_set<T: Scalar>(v: &[T]) -> Vec<ArmId> {
    let Some(best) = v.iter().cloned().reduce(|a, b| if b > a { b } else { a }) else {
        return Vec::new();
    };
    (0..v.len()).filter(|&i| v[i] == best).collect()
}

/// Borda and Copeland scores with their argmax sets, plus the GCW.
pub fn find_gbw_gcopew<T: Scalar>(profile: &LimitProfile<T>) -> Result<WinnerReport<T>> {
    let (n, k) = (profile.n(), profile.k());
    let borda = borda_scores(profile)?;
    let mut wins = vec![0_u64; n];
    for q in enumerate_query_sets(n, k, None)? {
        let v = profile.limits(&q)?;
        for pos in argmax_set(&v) {
            wins[q.arms()[pos]] += 1;
        }
    }
    let per_arm = T::from_count(binomial(n as u64 - 1, k as u64 - 1));
    let copeland: Vec<T> = wins.iter().map(|&w| T::from_count(w) / per_arm.clone()).collect();
    Ok(WinnerReport {
        gcw: find_gcw(profile)?,
        gbw_set: argmax_set(&borda),
        gcopew_set: argmax_set(&copeland),
        borda_scores: borda,
        copeland_scores: copeland,
    })
}

/// Whether `arm` is the strict maximizer of every set in `sets` containing it.
pub fn verify_gcw_on<T: Scalar>(profile: &LimitProfile<T>, arm: ArmId, sets: &[QuerySet]) -> Result<bool> {
    dominates(profile, arm, sets.iter().cloned())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::rate::RateFunction;
    use crate::scalar::Exact;

    fn three_arm() -> LimitProfile<Exact> {
        let r = |a, b| Exact::from_ratio(a, b);
        let mut table = BTreeMap::new();
        table.insert(QuerySet::new([0, 1]).unwrap(), vec![r(9, 10), r(1, 10)]);
        table.insert(QuerySet::new([0, 2]).unwrap(), vec![r(8, 10), r(2, 10)]);
        table.insert(QuerySet::new([1, 2]).unwrap(), vec![r(7, 10), r(3, 10)]);
        LimitProfile::from_table(3, 2, table, RateFunction::Reciprocal { amplitude: r(3, 5) }).unwrap()
    }

    #[test]
    fn three_arm_winners() {
        let p = three_arm();
        assert_eq!(find_gcw(&p).unwrap(), Some(0));
        let report = find_gbw_gcopew(&p).unwrap();
        assert_eq!(report.borda_scores, vec![Exact::from_ratio(85, 100), Exact::from_ratio(4, 10), Exact::from_ratio(1, 4)]);
        assert_eq!(report.copeland_scores, vec![Exact::from_integer(1), Exact::from_ratio(1, 2), Exact::from_integer(0)]);
        assert_eq!(report.gbw_set, vec![0]);
        assert_eq!(report.gcopew_set, vec![0]);
    }

    #[test]
    fn cyclic_has_no_gcw() {
        let mut table = BTreeMap::new();
        table.insert(QuerySet::new([0, 1]).unwrap(), vec![0.6, 0.4]);
        table.insert(QuerySet::new([1, 2]).unwrap(), vec![0.6, 0.4]);
        table.insert(QuerySet::new([0, 2]).unwrap(), vec![0.4, 0.6]);
        let p = LimitProfile::from_table(3, 2, table, RateFunction::inverse_sqrt(1.0)).unwrap();
        assert_eq!(find_gcw(&p).unwrap(), None);
    }

    #[test]
    fn all_equal_everyone_wins() {
        let p = LimitProfile::tabulate(4, 2, RateFunction::inverse_sqrt(1.0), |q| vec![0.5; q.len()]).unwrap();
        let report = find_gbw_gcopew(&p).unwrap();
        assert_eq!(report.gbw_set, vec![0, 1, 2, 3]);
        assert_eq!(report.gcopew_set, vec![0, 1, 2, 3]);
        assert_eq!(report.gcw, None);
        assert!(find_gbw(&p).is_err());
    }

    #[test]
    fn sampled_sets_contain_arm() {
        for q in sample_sets_containing(50, 10, 7, 100, 3) {
            assert!(q.contains(7));
            assert!(q.len() >= 2 && q.len() <= 10);
        }
    }
}
