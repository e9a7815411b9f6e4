//! Learners: combinatorial successive elimination, round robin over query
//! sets and the single-arm successive halving baseline.

mod cse;
mod halving;
mod round_robin;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::query::{ArmId, QuerySet};
use crate::scalar::{cmp_scalar, Scalar};
use crate::schedule::Schedule;
use crate::stats::{StatisticKind, StatisticState};

pub use cse::{run_cse, sets_containing};
pub use halving::run_sh_baseline;
pub use round_robin::{run_round_robin, RoundRobinConfig};

/// How active arms are assigned to blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionOrder {
    /// Shuffle with the run seed, then cut into consecutive blocks.
    #[default]
    SeededShuffle,
    /// Cut the ascending arm list into consecutive blocks.
    Sorted,
}

/// How equal statistics are ordered during elimination.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Lower arm index first.
    #[default]
    LowestIndex,
    /// Random order drawn from the run seed.
    SeededRandom,
}

/// Configuration of one elimination run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Total set-pull budget `B`.
    pub budget: u64,
    /// Round schedule and survivor rule.
    pub schedule: Schedule,
    /// Statistic used to rank arms within a set.
    pub statistic: StatisticKind,
    /// Block assignment.
    #[serde(default)]
    pub partition_order: PartitionOrder,
    /// Tie handling.
    #[serde(default)]
    pub tie_break: TieBreak,
    /// Seed of the partition shuffle and random tie breaks.
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Configuration with sorted partitions, lowest-index ties and the
    /// empirical mean.
    pub fn deterministic(budget: u64, schedule: Schedule) -> Self {
        Self {
            budget,
            schedule,
            statistic: StatisticKind::EmpiricalMean,
            partition_order: PartitionOrder::Sorted,
            tie_break: TieBreak::LowestIndex,
            seed: 0,
        }
    }

    /// Checks `B >= 1` and the schedule and statistic parameters.
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidParameter("budget must be at least 1".into()));
        }
        self.schedule.validate()?;
        self.statistic.validate()
    }
}

/// Condition attached to a run record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunFlag {
    /// The environment refused a pull because the budget cap was reached.
    BudgetExhausted,
    /// Some elimination step had zero pulls and chose by the tie rule.
    ZeroBudgetRound,
    /// Round robin did not observe every size-`k` set.
    PartialCoverage,
    /// The baseline ran with `k` times the nominal budget.
    ShInflatedBudget,
    /// The baseline could not pull every arm in some round.
    DegenerateBudget,
    /// The run aborted with an error other than budget exhaustion.
    Error,
}

impl RunFlag {
    /// Snake-case name used in CSV output.
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BudgetExhausted => "budget_exhausted",
            Self::ZeroBudgetRound => "zero_budget_round",
            Self::PartialCoverage => "partial_coverage",
            Self::ShInflatedBudget => "sh_inflated_budget",
            Self::DegenerateBudget => "degenerate_budget",
            Self::Error => "error",
        }
    }

    /// Parses a CSV flag name.
    pub fn parse(s: &str) -> Result<Self> {
        [
            Self::BudgetExhausted,
            Self::ZeroBudgetRound,
            Self::PartialCoverage,
            Self::ShInflatedBudget,
            Self::DegenerateBudget,
            Self::Error,
        ]
        .into_iter()
        .find(|f| f.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown run flag {s:?}")))
    }
}

/// One round of an elimination run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLog {
    /// 1-based round index.
    pub round: usize,
    /// Pulls per played block.
    pub budget_per_set: u64,
    /// Played blocks.
    pub blocks: Vec<Vec<ArmId>>,
    /// Arms carried into the next round without being played.
    pub carried: Vec<ArmId>,
    /// Active arms after the round, ascending.
    pub survivors: Vec<ArmId>,
    /// Whether the round belongs to the final loop over the remaining set.
    pub final_loop: bool,
}

/// Outcome and accounting of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Algorithm name.
    pub algorithm: String,
    /// Returned arm; `None` when the run was cut short by the budget cap.
    pub returned_arm: Option<ArmId>,
    /// Arm the algorithm would pick from its statistics at termination.
    pub best_effort_arm: Option<ArmId>,
    /// Pulls charged to the environment during the run.
    pub pulls_used: u64,
    /// Distinct query sets pulled during the run.
    pub distinct_query_sets: usize,
    /// Number of rounds executed.
    pub rounds_executed: usize,
    /// Per-round partition log.
    pub rounds: Vec<RoundLog>,
    /// Simulated wallclock spent by the run.
    pub simulated_wallclock: f64,
    /// Conditions raised during the run.
    pub flags: Vec<RunFlag>,
}

impl RunRecord {
    pub(crate) fn new(algorithm: impl Into<String>) -> Self {
        Self {
            algorithm: algorithm.into(),
            returned_arm: None,
            best_effort_arm: None,
            pulls_used: 0,
            distinct_query_sets: 0,
            rounds_executed: 0,
            rounds: Vec::new(),
            simulated_wallclock: 0.0,
            flags: Vec::new(),
        }
    }

    pub(crate) fn flag(&mut self, flag: RunFlag) {
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
            self.flags.sort();
        }
    }

    /// Whether `flag` was raised.
    pub fn has_flag(&self, flag: RunFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Ledger snapshot taken when a run starts.
pub(crate) struct RunScope {
    pulls: u64,
    wallclock: f64,
    cap: Option<u64>,
    sets_before: usize,
}

impl RunScope {
    /// Installs a cap of `budget` further pulls on `env`.
    pub(crate) fn begin<T: Scalar>(env: &mut dyn Environment<T>, budget: u64) -> Self {
        let ledger = env.ledger_mut();
        let scope = Self {
            pulls: ledger.total_pulls(),
            wallclock: ledger.wallclock(),
            cap: ledger.cap(),
            sets_before: ledger.distinct_query_sets(),
        };
        let cap = scope.pulls.saturating_add(budget);
        ledger.set_cap(Some(scope.cap.map_or(cap, |c| c.min(cap))));
        scope
    }

    /// Restores the previous cap and fills the accounting fields of `record`.
    pub(crate) fn finish<T: Scalar>(self, env: &mut dyn Environment<T>, record: &mut RunRecord) {
        let ledger = env.ledger_mut();
        ledger.set_cap(self.cap);
        record.pulls_used = ledger.total_pulls() - self.pulls;
        record.distinct_query_sets = ledger.distinct_query_sets() - self.sets_before;
        record.simulated_wallclock = ledger.wallclock() - self.wallclock;
    }
}

/// Per-run statistic states and tie-break randomness.
pub struct EliminationContext<T> {
    statistic: StatisticKind,
    tie_break: TieBreak,
    rng: ChaCha8Rng,
    states: BTreeMap<QuerySet, StatisticState<T>>,
}

impl<T: Scalar> EliminationContext<T> {
    /// Fresh context.
    pub fn new(statistic: StatisticKind, tie_break: TieBreak, seed: u64) -> Self {
        Self { statistic, tie_break, rng: ChaCha8Rng::seed_from_u64(seed), states: BTreeMap::new() }
    }

    /// Statistic states of every set pulled so far.
    pub fn states(&self) -> &BTreeMap<QuerySet, StatisticState<T>> {
        &self.states
    }

    /// Current statistics of `q`, if it was pulled.
    pub fn values(&self, q: &QuerySet) -> Option<Vec<T>> {
        self.states.get(q).and_then(|s| s.values().ok())
    }

    fn tie_keys(&mut self, arms: &[ArmId]) -> Vec<u64> {
        match self.tie_break {
            TieBreak::LowestIndex => arms.iter().map(|&a| a as u64).collect(),
            TieBreak::SeededRandom => arms.iter().map(|_| self.rng.random()).collect(),
        }
    }

    /// Positions of `arms` ordered by decreasing value, ties by the tie rule.
    /// Without values the order is the tie rule alone.
    pub(crate) fn ranking(&mut self, arms: &[ArmId], values: Option<&[T]>) -> Vec<usize> {
        let keys = self.tie_keys(arms);
        let mut order: Vec<usize> = (0..arms.len()).collect();
        order.sort_by(|&a, &b| {
            let by_value = values.map_or(std::cmp::Ordering::Equal, |v| cmp_scalar(&v[b], &v[a]));
            by_value.then(keys[a].cmp(&keys[b]))
        });
        order
    }
}

/// Pulls `arms` as one query set `b` times and keeps the `keep` arms with the
/// largest statistic. With `b = 0` the tie rule alone decides.
///
/// Returns the survivors in ascending order.
pub fn arm_elimination<T: Scalar>(
    arms: &[ArmId],
    b: u64,
    keep: usize,
    env: &mut dyn Environment<T>,
    ctx: &mut EliminationContext<T>,
) -> Result<Vec<ArmId>> {
    if arms.len() < 2 || keep < 1 || keep >= arms.len() {
        return Err(Error::InvalidParameter(format!("cannot keep {keep} of {} arms", arms.len())));
    }
    let q = QuerySet::new(arms.iter().copied())?;
    for _ in 0..b {
        let obs = env.pull(&q)?;
        let statistic = ctx.statistic.clone();
        ctx.states.entry(q.clone()).or_insert_with(|| StatisticState::new(statistic, q.len())).update(&obs)?;
    }
    let values = if b == 0 { None } else { ctx.values(&q) };
    let order = ctx.ranking(q.arms(), values.as_deref());
    let mut kept: Vec<ArmId> = order[..keep].iter().map(|&p| q.arms()[p]).collect();
    kept.sort_unstable();
    Ok(kept)
}
