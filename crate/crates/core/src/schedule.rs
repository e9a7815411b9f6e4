//! Elimination policies and round schedules of the CSE variants.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How many arms of a block of size `x` survive an elimination step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EliminationPolicy {
    /// `f(x) = 1`: keep only the block winner.
    KeepWinner,
    /// `f(x) = x - 1`: discard only the worst arm.
    RejectWorst,
    /// `f(x) = ceil(x / 2)`: keep the better half.
    Halving,
    /// Explicit values, `keep[x - 2] = f(x)` for `x = 2..`.
    Custom { keep: Vec<usize> },
}

impl EliminationPolicy {
    /// Number of survivors `f(x)` of a block of size `x >= 2`.
    pub fn survivors(&self, x: usize) -> usize {
        match self {
            Self::KeepWinner => 1,
            Self::RejectWorst => x - 1,
            Self::Halving => x.div_ceil(2),
            Self::Custom { keep } => keep[x - 2],
        }
    }

    /// Checks `1 <= f(x) <= x - 1` on `2..=k`.
    pub fn validate(&self, k: usize) -> Result<()> {
        if let Self::Custom { keep } = self {
            if keep.len() + 1 < k {
                return Err(Error::InvalidParameter(format!("custom policy undefined for sizes up to {k}")));
            }
        }
        for x in 2..=k {
            let f = self.survivors(x);
            if f < 1 || f > x - 1 {
                return Err(Error::InvalidParameter(format!("policy keeps {f} of {x} arms")));
            }
        }
        Ok(())
    }
}

/// The three named CSE instantiations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Combinatorial successive winner stays.
    Csws,
    /// Combinatorial successive rejection.
    Csr,
    /// Combinatorial successive halving.
    Csh,
}

impl Variant {
    /// All variants in canonical order.
    pub const ALL: [Variant; 3] = [Variant::Csws, Variant::Csr, Variant::Csh];

    /// The variant's elimination policy.
    pub fn policy(self) -> EliminationPolicy {
        match self {
            Self::Csws => EliminationPolicy::KeepWinner,
            Self::Csr => EliminationPolicy::RejectWorst,
            Self::Csh => EliminationPolicy::Halving,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csws => "CSWS",
            Self::Csr => "CSR",
            Self::Csh => "CSH",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csws" => Ok(Self::Csws),
            "csr" => Ok(Self::Csr),
            "csh" => Ok(Self::Csh),
            other => Err(Error::InvalidParameter(format!("unknown variant {other:?}"))),
        }
    }
}

/// Round count, per-round partition denominators and elimination policy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    /// Which instantiation produced the schedule, `None` for custom ones.
    pub variant: Option<Variant>,
    /// Number of rounds `R`.
    pub rounds: usize,
    /// `P_1..P_R`.
    pub partitions: Vec<u64>,
    /// Survivor rule `f`.
    pub policy: EliminationPolicy,
}

impl Schedule {
    /// Builds a custom schedule after checking `R >= 1`, `P_r >= 1` and
    /// `P` non-increasing.
    pub fn custom(partitions: Vec<u64>, policy: EliminationPolicy) -> Result<Self> {
        let s = Self { variant: None, rounds: partitions.len(), partitions, policy };
        s.validate()?;
        Ok(s)
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.partitions.len() != self.rounds {
            return Err(Error::InvalidParameter("schedule needs R >= 1 entries".into()));
        }
        if self.partitions.contains(&0) {
            return Err(Error::InvalidParameter("schedule has P_r = 0".into()));
        }
        if self.partitions.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter("schedule P is not non-increasing".into()));
        }
        Ok(())
    }

    /// Display name: CSWS, CSR, CSH or custom.
    pub fn name(&self) -> String {
        self.variant.map_or_else(|| "custom".to_string(), |v| v.to_string())
    }

    /// `P_{min(r, R)}` for a 1-based round index `r`.
    pub fn partitions_at(&self, round: usize) -> u64 {
        self.partitions[round.clamp(1, self.rounds) - 1]
    }

    /// Per-set budget `b_r = floor(B / (P_{min(r,R)} * R))`.
    pub fn per_set_budget(&self, budget: u64, round: usize) -> u64 {
        budget / (self.partitions_at(round) * self.rounds as u64)
    }

    /// `b_1..b_R` for a total budget `B`.
    pub fn per_set_budgets(&self, budget: u64) -> Vec<u64> {
        (1..=self.rounds).map(|r| self.per_set_budget(budget, r)).collect()
    }

    /// `sum_r P_r * b_r`, the nominal spend of a run with budget `B`.
    pub fn nominal_spend(&self, budget: u64) -> u64 {
        (1..=self.rounds).map(|r| self.partitions_at(r) * self.per_set_budget(budget, r)).sum()
    }
}

/// Smallest `m >= 0` with `base^m >= n`.
pub fn ceil_log(base: u64, n: u64) -> u32 {
    assert!(base >= 2, "logarithm base must be at least 2");
    let mut m = 0;
    let mut p: u128 = 1;
    while p < u128::from(n) {
        p *= u128::from(base);
        m += 1;
    }
    m
}

/// Smallest `m >= 0` with `n * ((k-1)/k)^m <= 1`, evaluated exactly.
pub fn csr_log_rounds(n: u64, k: u64) -> u32 {
    let num = BigUint::from(k - 1);
    let den = BigUint::from(k);
    let mut lhs = BigUint::from(n);
    let mut rhs = BigUint::one();
    let mut m = 0;
    while lhs > rhs {
        lhs *= &num;
        rhs *= &den;
        m += 1;
    }
    m
}

fn big_div_ceil(num: &BigUint, den: &BigUint) -> u64 {
    num.div_ceil(den).to_u64().unwrap_or(u64::MAX)
}

/// Schedule of a named variant for `n` arms and subset size `k`.
///
/// * CSWS: `R = ceil(log_k n) + 1`, `P_r = ceil(n / k^r)`.
/// * CSR: `R = ceil(log_{(k-1)/k}(1/n)) + k - 1`, `P_r = ceil(n (1-1/k)^(r-1) / k)`.
/// * CSH: `R = ceil(log2 n) + ceil(log2 k)`, `P_r = ceil(n / (2^(r-1) k))`.
///
/// All logarithms and ceilings are evaluated with integer arithmetic.
pub fn schedule_for(variant: Variant, n: usize, k: usize) -> Result<Schedule> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("need 2 <= k <= n, got n={n}, k={k}")));
    }
    let (n64, k64) = (n as u64, k as u64);
    let big_n = BigUint::from(n64);
    let big_k = BigUint::from(k64);
    let (rounds, partitions): (usize, Vec<u64>) = match variant {
        Variant::Csws => {
            let r = ceil_log(k64, n64) as usize + 1;
            let p = (1..=r).map(|i| big_div_ceil(&big_n, &big_k.pow(i as u32))).collect();
            (r, p)
        }
        Variant::Csr => {
            let r = csr_log_rounds(n64, k64) as usize + k - 1;
            let km1 = BigUint::from(k64 - 1);
            let p = (1..=r)
                .map(|i| {
                    let num = &big_n * km1.pow(i as u32 - 1);
                    let den = big_k.pow(i as u32);
                    big_div_ceil(&num, &den)
                })
                .collect();
            (r, p)
        }
        Variant::Csh => {
            let r = (ceil_log(2, n64) + ceil_log(2, k64)) as usize;
            let two = BigUint::from(2_u32);
            let p = (1..=r)
                .map(|i| big_div_ceil(&big_n, &(two.pow(i as u32 - 1) * &big_k)))
                .collect();
            (r, p)
        }
    };
    Ok(Schedule { variant: Some(variant), rounds, partitions, policy: variant.policy() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csws_example() {
        let s = schedule_for(Variant::Csws, 20, 4).unwrap();
        assert_eq!(s.rounds, 4);
        assert_eq!(s.partitions, vec![5, 2, 1, 1]);
        assert_eq!(s.per_set_budgets(500), vec![25, 62, 125, 125]);
    }

    #[test]
    fn csr_example() {
        let s = schedule_for(Variant::Csr, 8, 2).unwrap();
        assert_eq!(s.rounds, 4);
        assert_eq!(s.partitions, vec![4, 2, 1, 1]);
    }

    #[test]
    fn csh_example() {
        let s = schedule_for(Variant::Csh, 16, 4).unwrap();
        assert_eq!(s.rounds, 6);
        assert_eq!(s.partitions, vec![4, 2, 1, 1, 1, 1]);
    }

    #[test]
    fn policies() {
        assert_eq!(EliminationPolicy::Halving.survivors(5), 3);
        assert_eq!(EliminationPolicy::RejectWorst.survivors(5), 4);
        assert_eq!(EliminationPolicy::KeepWinner.survivors(5), 1);
        assert!(EliminationPolicy::Custom { keep: vec![1, 3] }.validate(3).is_err());
        assert!(EliminationPolicy::Custom { keep: vec![1, 2] }.validate(3).is_ok());
    }

    #[test]
    fn custom_schedule_validation() {
        assert!(Schedule::custom(vec![], EliminationPolicy::KeepWinner).is_err());
        assert!(Schedule::custom(vec![1, 2], EliminationPolicy::KeepWinner).is_err());
        let s = Schedule::custom(vec![1], EliminationPolicy::KeepWinner).unwrap();
        assert_eq!(s.name(), "custom");
        assert_eq!(s.partitions_at(5), 1);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("CSH".parse::<Variant>().unwrap(), Variant::Csh);
        assert!("csx".parse::<Variant>().is_err());
    }

    #[test]
    fn exact_logs() {
        assert_eq!(ceil_log(4, 20), 3);
        assert_eq!(ceil_log(2, 16), 4);
        assert_eq!(ceil_log(2, 17), 5);
        assert_eq!(csr_log_rounds(8, 2), 3);
        assert_eq!(csr_log_rounds(1, 3), 0);
    }
}
