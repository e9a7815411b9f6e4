//! Limit profiles: the asymptotic per-set statistic values `S_{i|Q}`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::{binomial, ArmId, QuerySet};
use crate::rate::RateFunction;
use crate::scalar::{cmp_scalar, Scalar};

/// Generative rule mapping a query set to the limits of its members.
pub type LimitRule<T> = Arc<dyn Fn(&QuerySet) -> Result<Vec<T>> + Send + Sync>;

/// Where a profile's limits come from.
#[derive(Clone)]
pub enum LimitSource<T> {
    /// Explicit table, one entry per stored query set.
    Table(BTreeMap<QuerySet, Vec<T>>),
    /// Lazily evaluated rule for instances too large to tabulate.
    Rule(LimitRule<T>),
}

impl<T: fmt::Debug> fmt::Debug for LimitSource<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Table(table) => f.debug_tuple("Table").field(table).finish(),
            Self::Rule(_) => f.write_str("Rule(..)"),
        }
    }
}

/// Limits `S_{i|Q}` for every admissible query set, with a shared rate envelope.
#[derive(Clone, Debug)]
pub struct LimitProfile<T> {
    n: usize,
    k: usize,
    source: LimitSource<T>,
    rate: RateFunction<T>,
    declared_gcw: Option<ArmId>,
}

/// One row of a serialized limit table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitEntry<T> {
    /// The query set.
    pub set: QuerySet,
    /// Limits aligned with the set's sorted members.
    pub limits: Vec<T>,
}

/// Serializable form of a tabulated profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitTable<T> {
    /// Arm count.
    pub n: usize,
    /// Maximum set size.
    pub k: usize,
    /// Shared rate envelope.
    pub rate: RateFunction<T>,
    /// Declared generalized Condorcet winner, if any.
    #[serde(default)]
    pub declared_gcw: Option<ArmId>,
    /// Tabulated limits.
    pub entries: Vec<LimitEntry<T>>,
}

fn check_dims(n: usize, k: usize) -> Result<()> {
    if n < 2 || k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("need 2 <= k <= n, got n={n}, k={k}")));
    }
    Ok(())
}

impl<T: Scalar> LimitProfile<T> {
    /// Builds a tabulated profile, validating every entry.
    pub fn from_table(n: usize, k: usize, table: BTreeMap<QuerySet, Vec<T>>, rate: RateFunction<T>) -> Result<Self> {
        check_dims(n, k)?;
        rate.validate()?;
        for (q, limits) in &table {
            q.check_instance(n, k)?;
            if limits.len() != q.len() {
                return Err(Error::InvalidProfile(format!(
                    "{q} has {} limits for {} arms",
                    limits.len(),
                    q.len()
                )));
            }
        }
        Ok(Self { n, k, source: LimitSource::Table(table), rate, declared_gcw: None })
    }

    /// Builds a profile whose limits are produced on demand by `rule`.
    pub fn from_rule(n: usize, k: usize, rule: LimitRule<T>, rate: RateFunction<T>) -> Result<Self> {
        check_dims(n, k)?;
        rate.validate()?;
        Ok(Self { n, k, source: LimitSource::Rule(rule), rate, declared_gcw: None })
    }

    /// Tabulates `f` over all query sets of sizes `2..=k`.
    pub fn tabulate(
        n: usize,
        k: usize,
        rate: RateFunction<T>,
        mut f: impl FnMut(&QuerySet) -> Vec<T>,
    ) -> Result<Self> {
        let table = crate::query::enumerate_query_sets_up_to(n, k, None)?
            .map(|q| {
                let v = f(&q);
                (q, v)
            })
            .collect();
        Self::from_table(n, k, table, rate)
    }

    /// Rebuilds a profile from its serialized table form.
    pub fn from_limit_table(table: LimitTable<T>) -> Result<Self> {
        let map = table.entries.into_iter().map(|e| (e.set, e.limits)).collect();
        let profile = Self::from_table(table.n, table.k, map, table.rate)?;
        Ok(match table.declared_gcw {
            Some(arm) => profile.with_declared_gcw(arm),
            None => profile,
        })
    }

    /// Copy with every limit evaluated into a table, refused when the family
    /// of sets of sizes `2..=k` exceeds `max_sets`.
    pub fn tabulated(&self, max_sets: u64) -> Result<Self> {
        if self.table().is_some() {
            return Ok(self.clone());
        }
        let count = (2..=self.k).fold(0_u64, |acc, s| acc.saturating_add(binomial(self.n as u64, s as u64)));
        if count > max_sets {
            return Err(Error::Unsupported(format!("{count} query sets exceed the tabulation limit {max_sets}")));
        }
        let mut table = BTreeMap::new();
        for q in crate::query::enumerate_query_sets_up_to(self.n, self.k, None)? {
            let v = self.limits(&q)?;
            table.insert(q, v);
        }
        let mut out = Self::from_table(self.n, self.k, table, self.rate.clone())?;
        out.declared_gcw = self.declared_gcw;
        Ok(out)
    }

    /// Serializable table form; `None` for rule-based profiles.
    pub fn to_limit_table(&self) -> Option<LimitTable<T>> {
        let table = self.table()?;
        Some(LimitTable {
            n: self.n,
            k: self.k,
            rate: self.rate.clone(),
            declared_gcw: self.declared_gcw,
            entries: table.iter().map(|(q, v)| LimitEntry { set: q.clone(), limits: v.clone() }).collect(),
        })
    }

    /// Attaches a declared generalized Condorcet winner.
    pub fn with_declared_gcw(mut self, arm: ArmId) -> Self {
        self.declared_gcw = Some(arm);
        self
    }

    /// Replaces the rate envelope.
    pub fn with_rate(mut self, rate: RateFunction<T>) -> Self {
        self.rate = rate;
        self
    }

    /// Arm count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Maximum query-set size.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Shared rate envelope.
    pub fn rate(&self) -> &RateFunction<T> {
        &self.rate
    }

    /// Declared generalized Condorcet winner, if any.
    pub fn declared_gcw(&self) -> Option<ArmId> {
        self.declared_gcw
    }

    /// The explicit table, if the profile is tabulated.
    pub fn table(&self) -> Option<&BTreeMap<QuerySet, Vec<T>>> {
        match &self.source {
            LimitSource::Table(t) => Some(t),
            LimitSource::Rule(_) => None,
        }
    }

    /// Limits of the members of `q`, aligned with its sorted arms.
    pub fn limits(&self, q: &QuerySet) -> Result<Vec<T>> {
        q.check_instance(self.n, self.k)?;
        match &self.source {
            LimitSource::Table(table) => table
                .get(q)
                .cloned()
                .ok_or_else(|| Error::InvalidProfile(format!("no limits stored for {q}"))),
            LimitSource::Rule(rule) => {
                let v = rule(q)?;
                if v.len() != q.len() {
                    return Err(Error::InvalidProfile(format!("rule returned {} limits for {q}", v.len())));
                }
                Ok(v)
            }
        }
    }

    /// Limit `S_{arm|q}`.
    pub fn limit(&self, arm: ArmId, q: &QuerySet) -> Result<T> {
        let pos = q
            .position(arm)
            .ok_or_else(|| Error::InvalidQuerySet(format!("arm {arm} not in {q}")))?;
        Ok(self.limits(q)?.swap_remove(pos))
    }

    /// Limits of `q` in decreasing order: `S_(1)|Q >= S_(2)|Q >= ...`.
    pub fn order_statistics(&self, q: &QuerySet) -> Result<Vec<T>> {
        let mut v = self.limits(q)?;
        v.sort_by(|a, b| cmp_scalar(b, a));
        Ok(v)
    }

    /// The unique arm attaining the largest limit in `q`; ties are an error.
    pub fn strict_argmax(&self, q: &QuerySet) -> Result<ArmId> {
        let v = self.limits(q)?;
        strict_argmax_of(&v)
            .map(|pos| q.arms()[pos])
            .ok_or_else(|| Error::InvalidProfile(format!("tie at the top of {q}")))
    }

    /// Gap `Delta_(l)|Q = S_{best|Q} - S_(l)|Q` for 1-based order index `l`,
    /// where `best` is the strict argmax of `q`.
    pub fn order_gap(&self, q: &QuerySet, l: usize) -> Result<T> {
        let sorted = self.order_statistics(q)?;
        if l == 0 || l > sorted.len() {
            return Err(Error::InvalidParameter(format!("order index {l} outside 1..={}", sorted.len())));
        }
        Ok(sorted[0].clone() - sorted[l - 1].clone())
    }
}

/// Position of the unique maximum of `v`, `None` on a tie at the top or empty input.
pub(crate) fn strict_argmax_of<T: Scalar>(v: &[T]) -> Option<usize> {
    let mut best: Option<usize> = None;
    let mut tied = false;
    for (i, x) in v.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) => {
                if *x > v[b] {
                    best = Some(i);
                    tied = false;
                } else if *x == v[b] {
                    tied = true;
                }
            }
        }
    }
    if tied {
        None
    } else {
        best
    }
}
