//! Single-arm successive halving on runtimes.

use super::{RunFlag, RunRecord, RunScope, RoundLog};
use crate::env::Environment;
use crate::error::Result;
use crate::query::ArmId;
use crate::scalar::{cmp_scalar, Scalar};
use crate::schedule::ceil_log;

/// Successive halving over single arms with budget `B_eff`.
///
/// Runs `L = ceil(log2 n)` rounds; each round pulls every surviving arm
/// `floor(B_eff / (|S| L))` times and keeps the `ceil(|S|/2)` arms with the
/// lowest mean observed runtime. Arms never pulled rank last and ties go to
/// the lower index. A round that cannot pull every arm once is flagged
/// [`RunFlag::DegenerateBudget`].
///
/// Needs an environment that supports single-arm pulls.
pub fn run_sh_baseline<T: Scalar>(budget: u64, env: &mut dyn Environment<T>) -> Result<RunRecord> {
    let n = env.n();
    let rounds = ceil_log(2, n as u64).max(1) as u64;
    let mut record = RunRecord::new("SH");
    let scope = RunScope::begin(env, budget);
    let mut sums = vec![T::zero(); n];
    let mut counts = vec![0_u64; n];
    let mut survivors: Vec<ArmId> = (0..n).collect();
    let mut outcome = Ok(());
    let mut round = 0;
    'rounds: while survivors.len() > 1 {
        round += 1;
        let per_arm = budget / (survivors.len() as u64 * rounds);
        if per_arm == 0 {
            record.flag(RunFlag::DegenerateBudget);
        }
        for &arm in &survivors {
            for _ in 0..per_arm {
                match env.pull_arm(arm) {
                    Ok(x) => {
                        sums[arm] = sums[arm].clone() + x;
                        counts[arm] += 1;
                    }
                    Err(e) => {
                        outcome = Err(e);
                        break 'rounds;
                    }
                }
            }
        }
        let before = survivors.clone();
        survivors = keep_fastest(&survivors, survivors.len().div_ceil(2), &sums, &counts);
        record.rounds.push(RoundLog {
            round,
            budget_per_set: per_arm,
            blocks: before.iter().map(|&a| vec![a]).collect(),
            carried: Vec::new(),
            survivors: survivors.clone(),
            final_loop: false,
        });
    }
    scope.finish(env, &mut record);
    let guess = keep_fastest(&survivors, 1, &sums, &counts).first().copied();
    match outcome {
        Ok(()) => record.returned_arm = guess,
        Err(crate::error::Error::BudgetExhausted { .. }) => record.flag(RunFlag::BudgetExhausted),
        Err(e) => return Err(e),
    }
    record.best_effort_arm = guess;
    record.rounds_executed = record.rounds.len();
    Ok(record)
}

fn keep_fastest<T: Scalar>(arms: &[ArmId], keep: usize, sums: &[T], counts: &[u64]) -> Vec<ArmId> {
    let mean = |a: ArmId| (counts[a] > 0).then(|| sums[a].clone() / T::from_count(counts[a]));
    let mut order = arms.to_vec();
    order.sort_by(|&a, &b| match (mean(a), mean(b)) {
        (Some(x), Some(y)) => cmp_scalar(&x, &y).then(a.cmp(&b)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(&b),
    });
    order.truncate(keep);
    order.sort_unstable();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvironmentModel, EnvironmentSpec, RaceParams};

    fn constant(runtimes: &[f64]) -> Box<dyn Environment<f64>> {
        EnvironmentSpec {
            model: EnvironmentModel::CensoredRace(RaceParams::constant(runtimes)),
            ..EnvironmentSpec::race(runtimes.len(), 2, 0)
        }
        .build()
        .unwrap()
    }

    #[test]
    fn dominance() {
        let mut env = constant(&[1.0, 2.0, 3.0, 4.0]);
        let rec = run_sh_baseline(80, env.as_mut()).unwrap();
        assert_eq!(rec.returned_arm, Some(0));
        assert!(rec.pulls_used <= 80);
        assert_eq!(rec.rounds_executed, 2);
        assert!(rec.flags.is_empty());
    }

    #[test]
    fn tiny_budget_is_flagged() {
        let mut env = constant(&[4.0, 3.0, 2.0, 1.0]);
        let rec = run_sh_baseline(3, env.as_mut()).unwrap();
        assert!(rec.has_flag(RunFlag::DegenerateBudget));
        assert!(rec.returned_arm.is_some());
        assert!(rec.pulls_used <= 3);
    }

    #[test]
    fn two_arms_single_round() {
        let mut env = constant(&[2.0, 1.0]);
        let rec = run_sh_baseline(10, env.as_mut()).unwrap();
        assert_eq!(rec.rounds_executed, 1);
        assert_eq!(rec.returned_arm, Some(1));
        assert!((rec.simulated_wallclock - 15.0).abs() < 1e-9);
    }

    #[test]
    fn needs_single_arm_pulls() {
        let mut env = EnvironmentSpec::gaussian(4, 2, 0).build().unwrap();
        assert!(run_sh_baseline(40, env.as_mut()).is_err());
    }
}
