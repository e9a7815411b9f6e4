//! Closed-form budgets: per-round budgets, sufficient budgets, round-robin
//! budgets, lower bounds, stochastic sufficiency constants and bounds on the
//! number of distinct query sets.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::algo::RunRecord;
use crate::env::lower_bound_b_prime;
use crate::error::{Error, Result};
use crate::limits::LimitProfile;
use crate::oracle::{borda_scores, find_gbw, find_gcw};
use crate::query::{binomial, enumerate_query_sets_up_to, ArmId, QuerySet};
use crate::rate::rate_inverse;
use crate::scalar::{cmp_scalar, Scalar};
use crate::schedule::{schedule_for, Schedule, Variant};

/// A query set containing the tracked arm, tagged with its 1-based round.
pub type TraceEntry = (usize, QuerySet);

/// Rounds and sets in which `arm` was played during a recorded run.
pub fn partition_trace(record: &RunRecord, arm: ArmId) -> Vec<TraceEntry> {
    record
        .rounds
        .iter()
        .filter_map(|log| {
            let block = log.blocks.iter().find(|b| b.contains(&arm))?;
            Some((log.round, QuerySet::new(block.iter().copied()).ok()?))
        })
        .collect()
}

/// Trace of `arm` in a noiseless run: sorted partitions, every block keeps
/// the arms with the largest limits (ties to the lower index).
pub fn dry_run_trace<T: Scalar>(schedule: &Schedule, profile: &LimitProfile<T>, arm: ArmId) -> Result<Vec<TraceEntry>> {
    let (n, k) = (profile.n(), profile.k());
    let keep = |block: &[ArmId]| -> Result<Vec<ArmId>> {
        let q = QuerySet::new(block.iter().copied())?;
        let v = profile.limits(&q)?;
        let mut order: Vec<usize> = (0..q.len()).collect();
        order.sort_by(|&a, &b| cmp_scalar(&v[b], &v[a]).then(a.cmp(&b)));
        let mut kept: Vec<ArmId> = order[..schedule.policy.survivors(q.len())].iter().map(|&p| q.arms()[p]).collect();
        kept.sort_unstable();
        Ok(kept)
    };
    let mut trace = Vec::new();
    let mut active: Vec<ArmId> = (0..n).collect();
    let mut round = 0;
    while active.len() >= k {
        round += 1;
        let mut next = Vec::new();
        for block in active.chunks(k) {
            if block.len() < k {
                next.extend_from_slice(block);
                continue;
            }
            if block.contains(&arm) {
                trace.push((round, QuerySet::new(block.iter().copied())?));
            }
            next.extend(keep(block)?);
        }
        next.sort_unstable();
        active = next;
    }
    while active.len() > 1 {
        round += 1;
        if active.contains(&arm) {
            trace.push((round, QuerySet::new(active.iter().copied())?));
        }
        active = keep(&active)?;
    }
    Ok(trace)
}

/// Sufficient budget of a generic elimination schedule along a trace:
/// `R * max_r P_{min(r,R)} * ceil(gamma^{-1}(Delta_(f(|A_r|)+1)|A_r / 2))`.
///
/// Every set of the trace must have the same strict maximizer.
pub fn sufficient_budget_z<T: Scalar>(schedule: &Schedule, profile: &LimitProfile<T>, trace: &[TraceEntry]) -> Result<u64> {
    let first = trace.first().ok_or_else(|| Error::InvalidParameter("empty partition trace".into()))?;
    let best = profile.strict_argmax(&first.1)?;
    let two = T::from_count(2);
    let mut worst = 0_u64;
    for (round, q) in trace {
        if profile.strict_argmax(q)? != best {
            return Err(Error::InvalidProfile(format!("arm {best} does not win {q}")));
        }
        let l = schedule.policy.survivors(q.len()) + 1;
        let gap = profile.order_gap(q, l)?;
        let t = rate_inverse(profile.rate(), &(gap / two.clone()))?;
        worst = worst.max(schedule.partitions_at(*round).saturating_mul(t));
    }
    Ok(worst.saturating_mul(schedule.rounds as u64))
}

fn sets_containing<T: Scalar>(profile: &LimitProfile<T>, arm: ArmId) -> Result<Vec<QuerySet>> {
    Ok(match profile.table() {
        Some(table) => table.keys().filter(|q| q.contains(arm)).cloned().collect(),
        None => enumerate_query_sets_up_to(profile.n(), profile.k(), Some(arm))?.collect(),
    })
}

/// Sufficient budget in the closed form of the named variant.
///
/// With `i*` the GCW and `Q` ranging over the sets containing it:
/// * CSWS: `ceil(n/k) R * max_Q max_{i != i*} ceil(gamma^{-1}((S_i* - S_i)/2))`,
/// * CSR: the same with `min_{i != i*}` and the CSR round count,
/// * CSH: the gap to the `(floor(|Q|/2)+1)`-th best arm of `Q`.
pub fn sufficient_budget_table<T: Scalar>(variant: Variant, profile: &LimitProfile<T>) -> Result<u64> {
    let (n, k) = (profile.n(), profile.k());
    let schedule = schedule_for(variant, n, k)?;
    let best = find_gcw(profile)?.ok_or_else(|| Error::InvalidProfile("profile has no GCW".into()))?;
    let two = T::from_count(2);
    let mut worst = 0_u64;
    for q in sets_containing(profile, best)? {
        let sorted = profile.order_statistics(&q)?;
        let l = match variant {
            Variant::Csws => 2,
            Variant::Csr => q.len(),
            Variant::Csh => q.len() / 2 + 1,
        };
        let gap = sorted[0].clone() - sorted[l - 1].clone();
        worst = worst.max(rate_inverse(profile.rate(), &(gap / two.clone()))?);
    }
    let blocks = n.div_ceil(k) as u64;
    Ok(blocks.saturating_mul(schedule.rounds as u64).saturating_mul(worst))
}

/// Sufficient budget of round robin:
/// `C(n,k) * max_{rho != i_B} gamma^{-1}((S^B_{i_B} - S^B_rho) / 2)`.
pub fn round_robin_budget_z<T: Scalar>(profile: &LimitProfile<T>) -> Result<u64> {
    let (n, k) = (profile.n(), profile.k());
    let winner = find_gbw(profile)?;
    let scores = borda_scores(profile)?;
    let two = T::from_count(2);
    let mut worst = 0_u64;
    for (rho, s) in scores.iter().enumerate() {
        if rho == winner {
            continue;
        }
        let gap = scores[winner].clone() - s.clone();
        worst = worst.max(rate_inverse(profile.rate(), &(gap / two.clone()))?);
    }
    Ok(binomial(n as u64, k as u64).saturating_mul(worst))
}

/// Lower bound for GCW identification: `ceil(n/k) * B'`.
///
/// With `family` the minimum defining `B'` runs over the given sets only,
/// which over-estimates the bound.
pub fn lower_bound_gcw<T: Scalar>(profile: &LimitProfile<T>, family: Option<&[QuerySet]>) -> Result<u64> {
    let b_prime = lower_bound_b_prime(profile, family)?;
    Ok((profile.n().div_ceil(profile.k()) as u64).saturating_mul(b_prime))
}

/// Lower bounds for Borda and Copeland winner identification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinnerLowerBound {
    /// `ceil((1 - 1/n) k / (k + n - 2) * C(n,k) * B')`.
    pub exact: u64,
    /// `ceil(C(n-1,k-1) B' / 4)`.
    pub quarter: u64,
    /// `B'`.
    pub b_prime: u64,
}

/// Lower bounds for GBW and GCopeW identification on size-`k` sets.
pub fn lower_bound_gbw_gcopew<T: Scalar>(profile: &LimitProfile<T>, family: Option<&[QuerySet]>) -> Result<WinnerLowerBound> {
    let (n, k) = (profile.n() as u64, profile.k() as u64);
    let b_prime = lower_bound_b_prime(profile, family)?;
    let big = |x: u64| BigInt::from(x);
    let exact = BigRational::new(big(n - 1) * big(k) * big(binomial(n, k)) * big(b_prime), big(n) * big(k + n - 2));
    let quarter = BigRational::new(big(binomial(n - 1, k - 1)) * big(b_prime), big(4));
    let ceil = |r: BigRational| r.ceil().to_integer().to_u64().unwrap_or(u64::MAX);
    Ok(WinnerLowerBound { exact: ceil(exact), quarter: ceil(quarter), b_prime })
}

/// Feedback setting of the stochastic sufficiency constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StochasticSetting {
    /// Sub-Gaussian rewards with variance proxy `sigma^2`.
    Reward { sigma: f64 },
    /// Categorical winner feedback.
    Preference,
}

/// Per-partition pull count `C(delta, epsilon, k, R)` after which every
/// block's statistic is within `epsilon/2` of its limit with probability at
/// least `1 - delta` overall.
pub fn stochastic_constant(setting: StochasticSetting, delta: f64, epsilon: f64, k: usize, rounds: usize) -> Result<u64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if k < 2 || rounds == 0 {
        return Err(Error::InvalidParameter("need k >= 2 and R >= 1".into()));
    }
    let (k, r) = (k as f64, rounds as f64);
    let value = match setting {
        StochasticSetting::Reward { sigma } => {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
            }
            let c = (1.0 + 0.5_f64.sqrt()).powi(2) * sigma * sigma;
            let kr = (10.0 * k * r).powf(2.0 / 3.0);
            let d = delta.powf(2.0 / 3.0) * 1.5_f64.ln();
            let inner = (72.0 * kr * c / (d * epsilon * epsilon)).ln();
            48.0 * c / (epsilon * epsilon) * (2.0 * kr / d * inner).ln()
        }
        StochasticSetting::Preference => {
            let base = 32.0 * (2.0 * r / (3.0 * delta)).sqrt() * std::f64::consts::PI / (epsilon * epsilon);
            32.0 / (epsilon * epsilon) * ((base * std::f64::consts::E).ln() + base.ln().ln())
        }
    };
    if !value.is_finite() {
        return Err(Error::Domain("sufficiency constant is not finite".into()));
    }
    Ok(value.ceil().max(0.0) as u64 + 1)
}

/// Total budget `C(delta, epsilon, k, R) * R * max_r P_r` for a schedule.
pub fn stochastic_sufficiency(setting: StochasticSetting, delta: f64, epsilon: f64, schedule: &Schedule, k: usize) -> Result<u64> {
    let c = stochastic_constant(setting, delta, epsilon, k, schedule.rounds)?;
    let max_p = schedule.partitions.iter().copied().max().unwrap_or(1);
    Ok(c.saturating_mul(schedule.rounds as u64).saturating_mul(max_p))
}

fn rational(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Upper bound on the number of distinct query sets a variant can pull:
/// * CSWS: `R + n (1 - k^{-R}) / (k - 1)`,
/// * CSR: `R + n (1 - (1 - 1/k)^R)`,
/// * CSH: `R + (2n/k) (1 - 2^{-R})`,
///
/// with the variant's round count `R`, floored to an integer.
pub fn max_query_sets(variant: Variant, n: usize, k: usize) -> Result<u64> {
    let schedule = schedule_for(variant, n, k)?;
    let r = schedule.rounds as i32;
    let (n64, k64) = (n as u64, k as u64);
    let one = BigRational::one();
    let tail = match variant {
        Variant::Csws => rational(n64, k64 - 1) * (&one - rational(1, k64).pow(r)),
        Variant::Csr => rational(n64, 1) * (&one - rational(k64 - 1, k64).pow(r)),
        Variant::Csh => rational(2 * n64, k64) * (&one - rational(1, 2).pow(r)),
    };
    let bound = rational(r as u64, 1) + tail;
    Ok(bound.floor().to_integer().to_u64().unwrap_or(u64::MAX))
}

/// Number of size-`k` sets, the distinct-set count of round robin.
pub fn max_query_sets_round_robin(n: usize, k: usize) -> u64 {
    binomial(n as u64, k as u64)
}

/// Everything the budget module can say about one variant and instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    /// Algorithm name.
    pub variant: String,
    /// Arm count.
    pub n: usize,
    /// Subset size.
    pub k: usize,
    /// Round count `R` (1 for round robin).
    pub rounds: usize,
    /// `P_1..P_R`.
    pub partitions: Vec<u64>,
    /// Total budget the per-round budgets refer to.
    pub budget: Option<u64>,
    /// `b_1..b_R` for `budget`.
    pub per_set_budgets: Option<Vec<u64>>,
    /// `sum_r P_r b_r`.
    pub nominal_spend: Option<u64>,
    /// Sufficient budget along the noiseless trace of the GCW.
    pub sufficient_budget: Option<u64>,
    /// Sufficient budget in the variant's closed form.
    pub sufficient_budget_table: Option<u64>,
    /// Lower bound for GCW identification.
    pub lower_bound_gcw: Option<u64>,
    /// Lower bounds for GBW and GCopeW identification.
    pub lower_bound_gbw_gcopew: Option<WinnerLowerBound>,
    /// Bound on the number of distinct query sets.
    pub max_distinct_query_sets: u64,
}

impl BudgetReport {
    /// Profile-free report of a named variant.
    pub fn for_variant(variant: Variant, n: usize, k: usize, budget: Option<u64>) -> Result<Self> {
        let schedule = schedule_for(variant, n, k)?;
        Ok(Self {
            variant: variant.to_string(),
            n,
            k,
            rounds: schedule.rounds,
            partitions: schedule.partitions.clone(),
            budget,
            per_set_budgets: budget.map(|b| schedule.per_set_budgets(b)),
            nominal_spend: budget.map(|b| schedule.nominal_spend(b)),
            sufficient_budget: None,
            sufficient_budget_table: None,
            lower_bound_gcw: None,
            lower_bound_gbw_gcopew: None,
            max_distinct_query_sets: max_query_sets(variant, n, k)?,
        })
    }

    /// Profile-free report of round robin.
    pub fn for_round_robin(n: usize, k: usize, budget: Option<u64>) -> Result<Self> {
        if k < 2 || k > n {
            return Err(Error::InvalidParameter(format!("need 2 <= k <= n, got n={n}, k={k}")));
        }
        let sets = max_query_sets_round_robin(n, k);
        Ok(Self {
            variant: "RoundRobin".into(),
            n,
            k,
            rounds: 1,
            partitions: vec![sets],
            budget,
            per_set_budgets: budget.map(|b| vec![b / sets]),
            nominal_spend: budget,
            sufficient_budget: None,
            sufficient_budget_table: None,
            lower_bound_gcw: None,
            lower_bound_gbw_gcopew: None,
            max_distinct_query_sets: sets,
        })
    }

    /// Adds the gap-dependent quantities of `profile`.
    pub fn with_profile<T: Scalar>(mut self, variant: Option<Variant>, profile: &LimitProfile<T>) -> Result<Self> {
        if profile.n() != self.n || profile.k() != self.k {
            return Err(Error::InvalidParameter(format!(
                "profile has n={}, k={} but the report is for n={}, k={}",
                profile.n(),
                profile.k(),
                self.n,
                self.k
            )));
        }
        match variant {
            Some(v) => {
                let schedule = schedule_for(v, self.n, self.k)?;
                let best = find_gcw(profile)?.ok_or_else(|| Error::InvalidProfile("profile has no GCW".into()))?;
                let trace = dry_run_trace(&schedule, profile, best)?;
                self.sufficient_budget = Some(sufficient_budget_z(&schedule, profile, &trace)?);
                self.sufficient_budget_table = Some(sufficient_budget_table(v, profile)?);
            }
            None => self.sufficient_budget = Some(round_robin_budget_z(profile)?),
        }
        self.lower_bound_gcw = Some(lower_bound_gcw(profile, None)?);
        let size_k: Vec<QuerySet> = match profile.table() {
            Some(t) => t.keys().filter(|q| q.len() == self.k).cloned().collect(),
            None => crate::query::enumerate_query_sets(self.n, self.k, None)?.collect(),
        };
        if !size_k.is_empty() {
            self.lower_bound_gbw_gcopew = Some(lower_bound_gbw_gcopew(profile, Some(&size_k))?);
        }
        Ok(self)
    }
}

/// Exact `sum_r P_r` of a schedule, the realized partition count when every
/// round is full.
pub fn partition_sum(schedule: &Schedule) -> u64 {
    schedule.partitions.iter().sum()
}
