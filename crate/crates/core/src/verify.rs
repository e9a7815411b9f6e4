//! Deterministic boundary suites: elimination learners on worst-case
//! instances at `B = z + 1` and `B = z - 1`, and round robin at every
//! multiple of `C(n,k)` around its threshold.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algo::{run_cse, run_round_robin, RoundRobinConfig, RunConfig};
use crate::budget::{dry_run_trace, partition_trace, round_robin_budget_z, sufficient_budget_z};
use crate::env::{make_necessity_instance, make_round_robin_necessity_instance, mix_seed, DeterministicEnv, NecessityInstance};
use crate::error::{Error, Result};
use crate::limits::LimitProfile;
use crate::oracle::find_gbw;
use crate::query::{binomial, enumerate_query_sets, enumerate_query_sets_up_to, ArmId};
use crate::rate::RateFunction;
use crate::scalar::Exact;
use crate::schedule::{schedule_for, Variant};

/// Dimensions cycled through by the elimination suite.
pub const CSE_DIMENSIONS: [(usize, usize); 6] = [(6, 2), (6, 3), (9, 2), (9, 3), (12, 2), (12, 3)];

/// Dimensions cycled through by the round-robin suite.
pub const ROUND_ROBIN_DIMENSIONS: [(usize, usize); 5] = [(4, 2), (5, 2), (5, 3), (6, 2), (6, 3)];

/// One boundary check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCase {
    /// Algorithm name.
    pub algorithm: String,
    /// Instance number within the suite.
    pub instance: usize,
    /// Arm count.
    pub n: usize,
    /// Subset size.
    pub k: usize,
    /// Threshold budget `z`.
    pub threshold: u64,
    /// Budget of the run.
    pub budget: u64,
    /// Arm that should be returned on success.
    pub target: ArmId,
    /// Returned arm.
    pub returned: Option<ArmId>,
    /// Whether the run was expected to return `target`.
    pub expected_success: bool,
    /// Whether it did.
    pub observed_success: bool,
    /// Run flags.
    pub flags: Vec<String>,
    /// Threshold recomputed from the sets the run actually played.
    pub threshold_from_run: Option<u64>,
}

impl BoundaryCase {
    /// Whether the outcome matched the expectation.
    pub fn pass(&self) -> bool {
        self.expected_success == self.observed_success
    }
}

fn ratio(num: i64, den: i64) -> Exact {
    Exact::new(num, den)
}

/// Limits of a worst-case elimination instance with GCW arm 0 and
/// amplitude `A = 1`.
///
/// In every set of size `s` containing arm 0 the other members sit at
/// `1 - 2/m` for a fixed multiset of integers `m` in `2..=6` that depends
/// only on `s`, so the sufficient budget does not depend on which arms share
/// a block with arm 0. Sets without arm 0 get distinct values in `(0, 1/2)`.
pub fn necessity_profile(n: usize, k: usize, seed: u64) -> Result<LimitProfile<Exact>> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 51]));
    let gaps: BTreeMap<usize, Vec<i64>> =
        (2..=k).map(|s| (s, (1..s).map(|_| rng.random_range(2..=6_i64)).collect())).collect();
    let mut table = BTreeMap::new();
    for q in enumerate_query_sets_up_to(n, k, None)? {
        let s = q.len();
        let values = if q.contains(0) {
            let mut ms = gaps[&s].clone();
            ms.shuffle(&mut rng);
            let mut others = ms.into_iter();
            q.arms()
                .iter()
                .map(|&a| if a == 0 { Exact::from_integer(1) } else { Exact::from_integer(1) - ratio(2, others.next().unwrap_or(2)) })
                .collect()
        } else {
            let mut ranks: Vec<i64> = (1..=s as i64).collect();
            ranks.shuffle(&mut rng);
            ranks.into_iter().map(|p| ratio(p, 2 * (s as i64 + 1))).collect()
        };
        table.insert(q, values);
    }
    Ok(LimitProfile::from_table(n, k, table, RateFunction::Reciprocal { amplitude: Exact::from_integer(1) })?
        .with_declared_gcw(0))
}

/// Worst-case instance built from [`necessity_profile`].
pub fn necessity_case(n: usize, k: usize, seed: u64) -> Result<NecessityInstance<Exact>> {
    make_necessity_instance(&necessity_profile(n, k, seed)?, Exact::from_integer(1))
}

fn run_elimination(variant: Variant, nec: &NecessityInstance<Exact>, budget: u64) -> Result<crate::algo::RunRecord> {
    let (n, k) = (nec.instance.n, nec.instance.k);
    let mut env = DeterministicEnv::new(nec.instance.clone())?;
    run_cse(&RunConfig::deterministic(budget, schedule_for(variant, n, k)?), &mut env)
}

/// Elimination boundary suite: `instances` worst-case instances per variant,
/// each run at `B = z + 1` (success expected) and `B = z - 1` (failure
/// expected), with sorted partitions and the empirical mean.
pub fn cse_boundary_suite(instances: usize, seed: u64) -> Result<Vec<BoundaryCase>> {
    let mut out = Vec::new();
    for variant in Variant::ALL {
        for i in 0..instances {
            let (n, k) = CSE_DIMENSIONS[i % CSE_DIMENSIONS.len()];
            let nec = necessity_case(n, k, mix_seed(&[seed, i as u64]))?;
            let schedule = schedule_for(variant, n, k)?;
            let trace = dry_run_trace(&schedule, &nec.adjusted, 0)?;
            let z = sufficient_budget_z(&schedule, &nec.adjusted, &trace)?;
            for (budget, expected) in [(z + 1, true), (z.saturating_sub(1), false)] {
                let record = run_elimination(variant, &nec, budget.max(1))?;
                let from_run = sufficient_budget_z(&schedule, &nec.adjusted, &partition_trace(&record, 0)).ok();
                out.push(BoundaryCase {
                    algorithm: variant.to_string(),
                    instance: i,
                    n,
                    k,
                    threshold: z,
                    budget,
                    target: 0,
                    returned: record.returned_arm,
                    expected_success: expected,
                    observed_success: record.returned_arm == Some(0),
                    flags: record.flags.iter().map(|f| f.as_str().to_string()).collect(),
                    threshold_from_run: from_run,
                });
            }
        }
    }
    Ok(out)
}

/// Limits on the size-`k` sets with a unique Borda winner at arm 0.
pub fn round_robin_profile(n: usize, k: usize, seed: u64) -> Result<LimitProfile<Exact>> {
    for attempt in 0..1000_u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 61, attempt]));
        let mut table = BTreeMap::new();
        for q in enumerate_query_sets(n, k, None)? {
            let v: Vec<Exact> = q
                .arms()
                .iter()
                .map(|&a| ratio(rng.random_range(0..20) + if a == 0 { 4 } else { 0 }, 24))
                .collect();
            table.insert(q, v);
        }
        let profile = LimitProfile::from_table(n, k, table, RateFunction::Reciprocal { amplitude: Exact::from_integer(1) })?;
        if matches!(find_gbw(&profile), Ok(0)) {
            return Ok(profile);
        }
    }
    Err(Error::InvalidProfile("no profile with Borda winner 0 found".into()))
}

/// Round-robin boundary suite: for every instance and every multiple
/// `B = c C(n,k)` from `C(n,k)` to `z_RR + 2 C(n,k)`, success is expected
/// exactly when `B >= z_RR`.
pub fn round_robin_boundary_suite(instances: usize, seed: u64) -> Result<Vec<BoundaryCase>> {
    let mut out = Vec::new();
    for i in 0..instances {
        let (n, k) = ROUND_ROBIN_DIMENSIONS[i % ROUND_ROBIN_DIMENSIONS.len()];
        let profile = round_robin_profile(n, k, mix_seed(&[seed, i as u64]))?;
        let (instance, winner) = make_round_robin_necessity_instance(&profile, Exact::from_integer(1))?;
        let z = round_robin_budget_z(&profile)?;
        let sets = binomial(n as u64, k as u64);
        for c in 1..=(z / sets + 2) {
            let budget = c * sets;
            let mut env = DeterministicEnv::new(instance.clone())?;
            let record = run_round_robin(&RoundRobinConfig::sorted(budget), &mut env)?;
            out.push(BoundaryCase {
                algorithm: "RoundRobin".into(),
                instance: i,
                n,
                k,
                threshold: z,
                budget,
                target: winner,
                returned: record.returned_arm,
                expected_success: budget >= z,
                observed_success: record.returned_arm == Some(winner),
                flags: record.flags.iter().map(|f| f.as_str().to_string()).collect(),
                threshold_from_run: None,
            });
        }
    }
    Ok(out)
}

/// Renders a case as one aligned report line.
pub fn describe(case: &BoundaryCase) -> String {
    format!(
        "{} {:<10} instance={:<2} n={:<2} k={} z={:<5} B={:<5} returned={:<4} expected={:<7} observed={}",
        if case.pass() { "PASS" } else { "FAIL" },
        case.algorithm,
        case.instance,
        case.n,
        case.k,
        case.threshold,
        case.budget,
        case.returned.map_or_else(|| "none".to_string(), |a| a.to_string()),
        if case.expected_success { "success" } else { "failure" },
        if case.observed_success { "success" } else { "failure" },
    )
}
