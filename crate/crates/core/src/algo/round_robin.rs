//! Round robin over all size-`k` query sets with an empirical Borda decision.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EliminationContext, PartitionOrder, RunFlag, RunRecord, RunScope, TieBreak};
use crate::env::{mix_seed, Environment};
use crate::error::{Error, Result};
use crate::query::{binomial, enumerate_query_sets, ArmId, QuerySet};
use crate::scalar::Scalar;
use crate::stats::{empirical_borda, StatisticKind, StatisticState};

const TAG_ORDER: u64 = 41;

/// Largest family that is enumerated and shuffled in full; larger families
/// are sampled without replacement.
const SHUFFLE_LIMIT: u64 = 200_000;

/// Configuration of a round-robin run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRobinConfig {
    /// Total set-pull budget `B`.
    pub budget: u64,
    /// Statistic whose per-set values are averaged into Borda scores.
    pub statistic: StatisticKind,
    /// Lexicographic or seeded-shuffled set order.
    #[serde(default)]
    pub order: PartitionOrder,
    /// Seed of the shuffle.
    #[serde(default)]
    pub seed: u64,
}

impl RoundRobinConfig {
    /// Lexicographic order with the empirical mean.
    pub fn sorted(budget: u64) -> Self {
        Self { budget, statistic: StatisticKind::EmpiricalMean, order: PartitionOrder::Sorted, seed: 0 }
    }
}

fn random_set(n: usize, k: usize, rng: &mut ChaCha8Rng) -> QuerySet {
    let mut pool: Vec<ArmId> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    QuerySet::new(pool).expect("distinct arms")
}

/// The first `min(B, C(n,k))` sets of the cycle.
fn cycle(n: usize, k: usize, budget: u64, order: PartitionOrder, seed: u64) -> Result<Vec<QuerySet>> {
    let total = binomial(n as u64, k as u64);
    let len = usize::try_from(budget.min(total)).map_err(|_| Error::Unsupported("cycle too long".into()))?;
    Ok(match order {
        PartitionOrder::Sorted => enumerate_query_sets(n, k, None)?.take(len).collect(),
        PartitionOrder::SeededShuffle => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, TAG_ORDER]));
            if total <= SHUFFLE_LIMIT {
                let mut all: Vec<QuerySet> = enumerate_query_sets(n, k, None)?.collect();
                all.shuffle(&mut rng);
                all.truncate(len);
                all
            } else {
                let mut seen = HashSet::with_capacity(len);
                let mut out = Vec::with_capacity(len);
                while out.len() < len {
                    let q = random_set(n, k, &mut rng);
                    if seen.insert(q.clone()) {
                        out.push(q);
                    }
                }
                out
            }
        }
    })
}

/// Pulls the size-`k` sets one after another, cycling until `B` pulls are
/// spent, and returns the arm with the highest empirical Borda score.
///
/// Arms that were never observed rank below all observed arms; ties go to
/// the lower index. When `B < C(n,k)` only the first `B` sets of the cycle
/// are seen and the record is flagged [`RunFlag::PartialCoverage`].
pub fn run_round_robin<T: Scalar>(config: &RoundRobinConfig, env: &mut dyn Environment<T>) -> Result<RunRecord> {
    if config.budget == 0 {
        return Err(Error::InvalidParameter("budget must be at least 1".into()));
    }
    config.statistic.validate()?;
    let (n, k) = (env.n(), env.k());
    let sets = cycle(n, k, config.budget, config.order, config.seed)?;
    let mut record = RunRecord::new("RoundRobin");
    if (sets.len() as u64) < binomial(n as u64, k as u64) {
        record.flag(RunFlag::PartialCoverage);
    }
    let scope = RunScope::begin(env, config.budget);
    let mut ctx: EliminationContext<T> = EliminationContext::new(config.statistic.clone(), TieBreak::LowestIndex, 0);
    let mut outcome = Ok(());
    for i in 0..config.budget {
        let q = &sets[(i % sets.len() as u64) as usize];
        match env.pull(q) {
            Ok(obs) => {
                let statistic = config.statistic.clone();
                let state = ctx.states.entry(q.clone()).or_insert_with(|| StatisticState::new(statistic, q.len()));
                if let Err(e) = state.update(&obs) {
                    outcome = Err(e);
                    break;
                }
            }
            Err(e) => {
                outcome = Err(e);
                break;
            }
        }
    }
    scope.finish(env, &mut record);
    let winner = borda_winner(&ctx, n);
    match outcome {
        Ok(()) => record.returned_arm = winner,
        Err(Error::BudgetExhausted { .. }) => record.flag(RunFlag::BudgetExhausted),
        Err(e) => return Err(e),
    }
    record.best_effort_arm = winner;
    record.rounds_executed = 1;
    Ok(record)
}

fn borda_winner<T: Scalar>(ctx: &EliminationContext<T>, n: usize) -> Option<ArmId> {
    let mut best: Option<(ArmId, T)> = None;
    for arm in 0..n {
        let Ok(score) = empirical_borda(ctx.states(), arm) else { continue };
        if best.as_ref().is_none_or(|(_, b)| score > *b) {
            best = Some((arm, score));
        }
    }
    best.map(|(a, _)| a).or(if n > 0 { Some(0) } else { None })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::env::{DeterministicEnv, DeterministicInstance, EnvironmentSpec};
    use crate::limits::LimitProfile;
    use crate::rate::RateFunction;

    fn borda_env() -> DeterministicEnv<f64> {
        let mut table = BTreeMap::new();
        table.insert(QuerySet::new([0, 1]).unwrap(), vec![0.9, 0.1]);
        table.insert(QuerySet::new([0, 2]).unwrap(), vec![0.8, 0.2]);
        table.insert(QuerySet::new([1, 2]).unwrap(), vec![0.7, 0.3]);
        let profile = LimitProfile::from_table(3, 2, table, RateFunction::instant()).unwrap();
        DeterministicEnv::new(DeterministicInstance::constant_from_profile(&profile).unwrap()).unwrap()
    }

    #[test]
    fn returns_borda_winner() {
        let mut env = borda_env();
        let rec = run_round_robin(&RoundRobinConfig::sorted(9), &mut env).unwrap();
        assert_eq!(rec.returned_arm, Some(0));
        assert_eq!(rec.pulls_used, 9);
        assert_eq!(rec.distinct_query_sets, 3);
        assert!(!rec.has_flag(RunFlag::PartialCoverage));
    }

    #[test]
    fn exact_multiple_pulls_every_set_equally() {
        let mut env = EnvironmentSpec::gaussian(5, 3, 2).build().unwrap();
        let rec = run_round_robin(&RoundRobinConfig::sorted(30), env.as_mut()).unwrap();
        assert_eq!(rec.distinct_query_sets, 10);
        for q in enumerate_query_sets(5, 3, None).unwrap() {
            assert_eq!(env.ledger().count(&q), 3);
        }
    }

    #[test]
    fn partial_coverage_observes_prefix() {
        let mut env = EnvironmentSpec::gaussian(6, 3, 2).build().unwrap();
        let rec = run_round_robin(&RoundRobinConfig::sorted(4), env.as_mut()).unwrap();
        assert!(rec.has_flag(RunFlag::PartialCoverage));
        let prefix: Vec<QuerySet> = enumerate_query_sets(6, 3, None).unwrap().take(4).collect();
        for q in enumerate_query_sets(6, 3, None).unwrap() {
            assert_eq!(env.ledger().count(&q), u64::from(prefix.contains(&q)));
        }
    }

    #[test]
    fn large_families_are_sampled_without_repeats() {
        let sets = cycle(60, 8, 500, PartitionOrder::SeededShuffle, 3).unwrap();
        let distinct: HashSet<_> = sets.iter().collect();
        assert_eq!(distinct.len(), 500);
        assert!(sets.iter().all(|q| q.len() == 8));
    }

    #[test]
    fn shuffled_order_covers_every_set() {
        let sets = cycle(6, 3, 100, PartitionOrder::SeededShuffle, 1).unwrap();
        let distinct: HashSet<_> = sets.iter().collect();
        assert_eq!(distinct.len(), 20);
    }
}
