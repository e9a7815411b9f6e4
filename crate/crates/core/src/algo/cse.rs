//! Combinatorial successive elimination.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{arm_elimination, EliminationContext, PartitionOrder, RoundLog, RunConfig, RunFlag, RunRecord, RunScope};
use crate::env::{mix_seed, Environment};
use crate::error::{Error, Result};
use crate::query::{ArmId, QuerySet};
use crate::scalar::Scalar;

const TAG_PARTITION: u64 = 31;
const TAG_TIES: u64 = 32;

/// Splits `active` into consecutive blocks of size `k`; a shorter final
/// block is returned separately as the carried remainder.
pub(crate) fn partition(
    active: &[ArmId],
    k: usize,
    order: PartitionOrder,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<ArmId>>, Vec<ArmId>) {
    let mut arms = active.to_vec();
    arms.sort_unstable();
    if order == PartitionOrder::SeededShuffle {
        arms.shuffle(rng);
    }
    let mut blocks: Vec<Vec<ArmId>> = arms.chunks(k).map(|c| {
        let mut b = c.to_vec();
        b.sort_unstable();
        b
    }).collect();
    let carried = match blocks.last() {
        Some(last) if last.len() < k => blocks.pop().unwrap_or_default(),
        _ => Vec::new(),
    };
    (blocks, carried)
}

/// Runs combinatorial successive elimination on `env`.
///
/// While at least `k` arms are active, round `r` cuts them into blocks of
/// size `k`, pulls every block `b_r = floor(B / (P_r R))` times and keeps
/// `f(k)` arms per block; a shorter final block is carried over unplayed.
/// The remaining arms are then eliminated as one set with the per-set budget
/// of the current round (`P_{min(r,R)}`) until a single arm is left.
///
/// A run stopped by the budget cap returns no arm, flags
/// [`RunFlag::BudgetExhausted`] and records its best guess in
/// `best_effort_arm`.
pub fn run_cse<T: Scalar>(config: &RunConfig, env: &mut dyn Environment<T>) -> Result<RunRecord> {
    config.validate()?;
    let (n, k) = (env.n(), env.k());
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("need 2 <= k <= n, got n={n}, k={k}")));
    }
    config.schedule.policy.validate(k)?;
    let mut record = RunRecord::new(config.schedule.name());
    let scope = RunScope::begin(env, config.budget);
    let mut ctx = EliminationContext::new(config.statistic.clone(), config.tie_break, mix_seed(&[config.seed, TAG_TIES]));
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[config.seed, TAG_PARTITION]));
    let mut active: Vec<ArmId> = (0..n).collect();
    let outcome = eliminate(config, env, &mut ctx, &mut rng, &mut active, &mut record);
    scope.finish(env, &mut record);
    match outcome {
        Ok(()) => {
            record.returned_arm = active.first().copied();
            record.best_effort_arm = record.returned_arm;
        }
        Err(Error::BudgetExhausted { .. }) => {
            record.flag(RunFlag::BudgetExhausted);
            record.best_effort_arm = best_effort(&active, &mut ctx);
        }
        Err(e) => return Err(e),
    }
    record.rounds_executed = record.rounds.len();
    Ok(record)
}

fn eliminate<T: Scalar>(
    config: &RunConfig,
    env: &mut dyn Environment<T>,
    ctx: &mut EliminationContext<T>,
    rng: &mut ChaCha8Rng,
    active: &mut Vec<ArmId>,
    record: &mut RunRecord,
) -> Result<()> {
    let k = env.k();
    let schedule = &config.schedule;
    let mut round = 0;
    while active.len() >= k {
        round += 1;
        let b = schedule.per_set_budget(config.budget, round);
        let (blocks, carried) = partition(active, k, config.partition_order, rng);
        let mut next = carried.clone();
        record.rounds.push(RoundLog {
            round,
            budget_per_set: b,
            blocks: blocks.clone(),
            carried,
            survivors: Vec::new(),
            final_loop: false,
        });
        if b == 0 {
            record.flag(RunFlag::ZeroBudgetRound);
        }
        for block in &blocks {
            let kept = arm_elimination(block, b, schedule.policy.survivors(block.len()), env, ctx);
            match kept {
                Ok(kept) => next.extend(kept),
                Err(e) => {
                    *active = next.into_iter().chain(blocks.iter().flatten().copied()).collect();
                    active.sort_unstable();
                    active.dedup();
                    return Err(e);
                }
            }
        }
        next.sort_unstable();
        *active = next;
        if let Some(log) = record.rounds.last_mut() {
            log.survivors = active.clone();
        }
    }
    while active.len() > 1 {
        round += 1;
        let b = schedule.per_set_budget(config.budget, round);
        if b == 0 {
            record.flag(RunFlag::ZeroBudgetRound);
        }
        let block = active.clone();
        record.rounds.push(RoundLog {
            round,
            budget_per_set: b,
            blocks: vec![block.clone()],
            carried: Vec::new(),
            survivors: Vec::new(),
            final_loop: true,
        });
        *active = arm_elimination(&block, b, schedule.policy.survivors(block.len()), env, ctx)?;
        if let Some(log) = record.rounds.last_mut() {
            log.survivors = active.clone();
        }
    }
    Ok(())
}

/// Best arm of the most informative pulled set among the active arms, or the
/// tie-rule choice when nothing was observed.
fn best_effort<T: Scalar>(active: &[ArmId], ctx: &mut EliminationContext<T>) -> Option<ArmId> {
    let candidate = ctx
        .states()
        .iter()
        .filter(|(q, s)| s.t() > 0 && q.arms().iter().all(|a| active.contains(a)))
        .max_by_key(|(q, s)| (q.len(), s.t()))
        .map(|(q, _)| q.clone());
    match candidate {
        Some(q) => {
            let values = ctx.values(&q);
            let order = ctx.ranking(q.arms(), values.as_deref());
            Some(q.arms()[order[0]])
        }
        None => {
            let order = ctx.ranking(active, None);
            order.first().map(|&p| active[p])
        }
    }
}

/// Sets of the partitions containing `arm`, one per round, in round order.
pub fn sets_containing(record: &RunRecord, arm: ArmId) -> Vec<QuerySet> {
    record
        .rounds
        .iter()
        .filter_map(|log| log.blocks.iter().find(|b| b.contains(&arm)))
        .filter_map(|b| QuerySet::new(b.iter().copied()).ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{DeterministicEnv, DeterministicInstance};
    use crate::limits::LimitProfile;
    use crate::rate::RateFunction;
    use crate::schedule::{schedule_for, Variant};

    fn dominant_env(n: usize, k: usize, best: ArmId) -> DeterministicEnv<f64> {
        let profile = LimitProfile::tabulate(n, k, RateFunction::instant(), |q| {
            q.arms().iter().map(|&a| if a == best { 2.0 } else { 1.0 / (1.0 + a as f64) }).collect()
        })
        .unwrap()
        .with_declared_gcw(best);
        DeterministicEnv::new(DeterministicInstance::constant_from_profile(&profile).unwrap()).unwrap()
    }

    #[test]
    fn four_arm_trace() {
        let mut env = dominant_env(4, 2, 0);
        let config = RunConfig::deterministic(100, schedule_for(Variant::Csws, 4, 2).unwrap());
        let rec = run_cse(&config, &mut env).unwrap();
        assert_eq!(rec.returned_arm, Some(0));
        assert_eq!(rec.rounds_executed, 2);
        assert_eq!(rec.rounds[0].blocks, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(rec.rounds[1].blocks, vec![vec![0, 2]]);
        assert!(rec.pulls_used <= 100);
    }

    #[test]
    fn remainder_is_carried_unplayed() {
        for variant in Variant::ALL {
            let mut env = dominant_env(5, 2, 0);
            let config = RunConfig::deterministic(200, schedule_for(variant, 5, 2).unwrap());
            let rec = run_cse(&config, &mut env).unwrap();
            let first = &rec.rounds[0];
            assert_eq!(first.blocks.len(), 2);
            assert_eq!(first.carried, vec![4]);
            assert!(rec.rounds[0].survivors.contains(&4));
            assert_eq!(rec.returned_arm, Some(0));
        }
    }

    #[test]
    fn zero_budget_is_flagged_and_stays_within_budget() {
        let mut env = dominant_env(9, 3, 4);
        let config = RunConfig::deterministic(1, schedule_for(Variant::Csh, 9, 3).unwrap());
        let rec = run_cse(&config, &mut env).unwrap();
        assert!(rec.has_flag(RunFlag::ZeroBudgetRound));
        assert_eq!(rec.pulls_used, 0);
        assert!(rec.returned_arm.is_some());
    }

    #[test]
    fn cap_cuts_run_short() {
        let mut env = dominant_env(6, 2, 3);
        let config = RunConfig::deterministic(60, schedule_for(Variant::Csws, 6, 2).unwrap());
        env.ledger_mut().set_cap(Some(5));
        let rec = run_cse(&config, &mut env).unwrap();
        assert!(rec.has_flag(RunFlag::BudgetExhausted));
        assert_eq!(rec.returned_arm, None);
        assert_eq!(rec.pulls_used, 5);
        assert_eq!(env.ledger().cap(), Some(5));
    }

    #[test]
    fn shuffled_partitions_are_seeded() {
        let run = |seed| {
            let mut env = dominant_env(12, 3, 7);
            let mut config = RunConfig::deterministic(500, schedule_for(Variant::Csr, 12, 3).unwrap());
            config.partition_order = PartitionOrder::SeededShuffle;
            config.seed = seed;
            run_cse(&config, &mut env).unwrap()
        };
        assert_eq!(run(1), run(1));
        assert_eq!(run(1).returned_arm, Some(7));
        assert_ne!(run(1).rounds[0].blocks, run(2).rounds[0].blocks);
    }

    #[test]
    fn set_trace_of_an_arm() {
        let mut env = dominant_env(4, 2, 0);
        let config = RunConfig::deterministic(100, schedule_for(Variant::Csws, 4, 2).unwrap());
        let rec = run_cse(&config, &mut env).unwrap();
        let trace: Vec<Vec<ArmId>> = sets_containing(&rec, 0).iter().map(|q| q.arms().to_vec()).collect();
        assert_eq!(trace, vec![vec![0, 1], vec![0, 2]]);
    }
}
