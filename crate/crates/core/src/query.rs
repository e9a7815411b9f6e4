//! Arms, query sets and their enumeration.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of an arm, in `0..n`.
pub type ArmId = usize;

/// A canonical (sorted, duplicate-free) subset of at least two arms.
///
/// Two query sets built from the same arms in any order compare equal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<ArmId>", into = "Vec<ArmId>")]
pub struct QuerySet {
    arms: Vec<ArmId>,
}

impl QuerySet {
    /// Builds the canonical set from arms given in any order.
    pub fn new(arms: impl IntoIterator<Item = ArmId>) -> Result<Self> {
        let mut arms: Vec<ArmId> = arms.into_iter().collect();
        arms.sort_unstable();
        if arms.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidQuerySet(format!("duplicate arm in {arms:?}")));
        }
        if arms.len() < 2 {
            return Err(Error::InvalidQuerySet(format!(
                "a query set needs at least two arms, got {}",
                arms.len()
            )));
        }
        Ok(Self { arms })
    }

    /// Wraps arms that are already strictly increasing with length at least two.
    pub(crate) fn from_sorted(arms: Vec<ArmId>) -> Self {
        debug_assert!(arms.len() >= 2 && arms.windows(2).all(|w| w[0] < w[1]));
        Self { arms }
    }

    /// Member arms in increasing order.
    pub fn arms(&self) -> &[ArmId] {
        &self.arms
    }

    /// Number of member arms.
    pub fn len(&self) -> usize {
        self.arms.len()
    }

    /// Always false; present for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    /// Whether `arm` is a member.
    pub fn contains(&self, arm: ArmId) -> bool {
        self.arms.binary_search(&arm).is_ok()
    }

    /// Position of `arm` within the sorted member list.
    pub fn position(&self, arm: ArmId) -> Option<usize> {
        self.arms.binary_search(&arm).ok()
    }

    /// Checks that the set is admissible for an instance with `n` arms and
    /// maximum set size `k`.
    pub fn check_instance(&self, n: usize, k: usize) -> Result<()> {
        if self.len() > k {
            return Err(Error::InvalidQuerySet(format!("{self} has more than k={k} arms")));
        }
        if let Some(&last) = self.arms.last() {
            if last >= n {
                return Err(Error::InvalidQuerySet(format!("{self} names an arm outside 0..{n}")));
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<ArmId>> for QuerySet {
    type Error = Error;

    fn try_from(arms: Vec<ArmId>) -> Result<Self> {
        Self::new(arms)
    }
}

impl From<QuerySet> for Vec<ArmId> {
    fn from(q: QuerySet) -> Self {
        q.arms
    }
}

impl fmt::Display for QuerySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (idx, arm) in self.arms.iter().enumerate() {
            if idx > 0 {
                write!(f, ",")?;
            }
            write!(f, "{arm}")?;
        }
        write!(f, "}}")
    }
}

/// Binomial coefficient `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Lazy lexicographic stream of size-`k` subsets of `0..n`.
#[derive(Clone, Debug)]
pub struct QuerySetIter {
    pool: Vec<ArmId>,
    pinned: Option<ArmId>,
    indices: Vec<usize>,
    done: bool,
}

impl QuerySetIter {
    fn new(pool: Vec<ArmId>, choose: usize, pinned: Option<ArmId>) -> Self {
        let done = choose > pool.len();
        Self { indices: (0..choose).collect(), pool, pinned, done }
    }
}

impl Iterator for QuerySetIter {
    type Item = QuerySet;

    fn next(&mut self) -> Option<QuerySet> {
        if self.done {
            return None;
        }
        let mut arms: Vec<ArmId> = self.indices.iter().map(|&i| self.pool[i]).collect();
        if let Some(pin) = self.pinned {
            let at = arms.partition_point(|&a| a < pin);
            arms.insert(at, pin);
        }
        let m = self.indices.len();
        let len = self.pool.len();
        match (0..m).rev().find(|&i| self.indices[i] != i + len - m) {
            Some(i) => {
                self.indices[i] += 1;
                for j in i + 1..m {
                    self.indices[j] = self.indices[j - 1] + 1;
                }
            }
            None => self.done = true,
        }
        Some(QuerySet::from_sorted(arms))
    }
}

/// Enumerates all size-`k` query sets over `n` arms in lexicographic order,
/// optionally only those containing `containing`.
///
/// Yields `C(n, k)` sets, or `C(n-1, k-1)` when an arm is pinned.
pub fn enumerate_query_sets(n: usize, k: usize, containing: Option<ArmId>) -> Result<QuerySetIter> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("need 2 <= k <= n, got n={n}, k={k}")));
    }
    match containing {
        None => Ok(QuerySetIter::new((0..n).collect(), k, None)),
        Some(arm) if arm < n => {
            let pool = (0..n).filter(|&a| a != arm).collect();
            Ok(QuerySetIter::new(pool, k - 1, Some(arm)))
        }
        Some(arm) => Err(Error::InvalidParameter(format!("arm {arm} outside 0..{n}"))),
    }
}

/// Enumerates all query sets of sizes `2..=k` (grouped by size, each group
/// lexicographic), optionally only those containing `containing`.
pub fn enumerate_query_sets_up_to(
    n: usize,
    k: usize,
    containing: Option<ArmId>,
) -> Result<impl Iterator<Item = QuerySet>> {
    let streams = (2..=k)
        .map(|size| enumerate_query_sets(n, size, containing))
        .collect::<Result<Vec<_>>>()?;
    Ok(streams.into_iter().flatten())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets(it: impl Iterator<Item = QuerySet>) -> Vec<Vec<ArmId>> {
        it.map(|q| q.arms().to_vec()).collect()
    }

    #[test]
    fn pairs_of_three() {
        let got = sets(enumerate_query_sets(3, 2, None).unwrap());
        assert_eq!(got, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn pairs_containing_first_arm() {
        let got = sets(enumerate_query_sets(4, 2, Some(0)).unwrap());
        assert_eq!(got, vec![vec![0, 1], vec![0, 2], vec![0, 3]]);
    }

    #[test]
    fn triples_of_five_count() {
        assert_eq!(enumerate_query_sets(5, 3, None).unwrap().count(), 10);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(enumerate_query_sets(3, 1, None).is_err());
        assert!(enumerate_query_sets(3, 4, None).is_err());
        assert!(enumerate_query_sets(3, 2, Some(3)).is_err());
    }

    #[test]
    fn canonical_construction() {
        let a = QuerySet::new([3, 1, 2]).unwrap();
        let b = QuerySet::new([1, 2, 3]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "{1,2,3}");
        assert!(QuerySet::new([1, 1]).is_err());
        assert!(QuerySet::new([1]).is_err());
    }

    #[test]
    fn instance_check() {
        let q = QuerySet::new([0, 4]).unwrap();
        assert!(q.check_instance(5, 2).is_ok());
        assert!(q.check_instance(4, 2).is_err());
        assert!(QuerySet::new([0, 1, 2]).unwrap().check_instance(5, 2).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 3), 10);
        assert_eq!(binomial(50, 2), 1225);
        assert_eq!(binomial(4, 5), 0);
        assert_eq!(binomial(10, 0), 1);
    }

    #[test]
    fn serde_round_trip_validates() {
        let q = QuerySet::new([2, 0]).unwrap();
        let text = serde_json::to_string(&q).unwrap();
        assert_eq!(text, "[0,2]");
        let back: QuerySet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<QuerySet>("[1,1]").is_err());
    }
}
