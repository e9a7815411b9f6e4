//! Deterministic environments driven by explicit statistic trajectories.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Environment, PullLedger};
use crate::error::{Error, Result};
use crate::limits::LimitProfile;
use crate::observation::{ObservationKind, ObservationVector};
use crate::query::{enumerate_query_sets_up_to, ArmId, QuerySet};
use crate::rate::RateFunction;
use crate::scalar::Scalar;

/// Target value `s(t)` of one arm's statistic within one set, `t >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Trajectory<T> {
    /// `s(t) = value`.
    Constant { value: T },
    /// `s(t) = limit + amplitude / t`.
    Reciprocal { limit: T, amplitude: T },
    /// `s(t) = before` for `t < switch_at`, `after` from then on.
    Step { before: T, after: T, switch_at: u64 },
    /// `s(t) = values[t-1]`, the last entry repeated afterwards.
    Table { values: Vec<T> },
}

impl<T: Scalar> Trajectory<T> {
    /// `s(t)` for `t >= 1`.
    pub fn eval(&self, t: u64) -> T {
        match self {
            Self::Constant { value } => value.clone(),
            Self::Reciprocal { limit, amplitude } => limit.clone() + amplitude.clone() / T::from_count(t.max(1)),
            Self::Step { before, after, switch_at } => {
                if t < *switch_at {
                    before.clone()
                } else {
                    after.clone()
                }
            }
            Self::Table { values } => {
                let idx = usize::try_from(t.max(1) - 1).unwrap_or(usize::MAX).min(values.len() - 1);
                values[idx].clone()
            }
        }
    }

    /// `lim_{t -> inf} s(t)`.
    pub fn limit(&self) -> T {
        match self {
            Self::Constant { value } => value.clone(),
            Self::Reciprocal { limit, .. } => limit.clone(),
            Self::Step { after, .. } => after.clone(),
            Self::Table { values } => values.last().cloned().unwrap_or_else(T::zero),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Self::Table { values } = self {
            if values.is_empty() {
                return Err(Error::InvalidParameter("empty trajectory table".into()));
            }
        }
        Ok(())
    }
}

/// Explicit trajectories for a family of query sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterministicInstance<T> {
    /// Arm count.
    pub n: usize,
    /// Maximum set size.
    pub k: usize,
    /// Envelope of `|s(t) - lim|`.
    pub rate: RateFunction<T>,
    /// Declared generalized Condorcet winner.
    #[serde(default)]
    pub declared_gcw: Option<ArmId>,
    /// Per-set trajectories aligned with the set's sorted arms, serialized as
    /// nested maps `"0,1" -> "0" -> trajectory`.
    #[serde(with = "set_table")]
    pub sets: BTreeMap<QuerySet, Vec<Trajectory<T>>>,
}

impl<T: Scalar> DeterministicInstance<T> {
    /// Checks dimensions and alignment.
    pub fn validate(&self) -> Result<()> {
        for (q, traj) in &self.sets {
            q.check_instance(self.n, self.k)?;
            if traj.len() != q.len() {
                return Err(Error::InvalidProfile(format!("{q} has {} trajectories", traj.len())));
            }
            traj.iter().try_for_each(Trajectory::validate)?;
        }
        Ok(())
    }

    /// Instance whose statistics equal the limits of `profile` from the first
    /// pull on, over every set of sizes `2..=k`.
    pub fn constant_from_profile(profile: &LimitProfile<T>) -> Result<Self> {
        let mut sets = BTreeMap::new();
        for q in enumerate_query_sets_up_to(profile.n(), profile.k(), None)? {
            let v = profile.limits(&q)?;
            sets.insert(q, v.into_iter().map(|value| Trajectory::Constant { value }).collect());
        }
        Ok(Self {
            n: profile.n(),
            k: profile.k(),
            rate: RateFunction::instant(),
            declared_gcw: profile.declared_gcw(),
            sets,
        })
    }

    /// Statistic `s_{arm|q}(t)`.
    pub fn statistic(&self, q: &QuerySet, arm: ArmId, t: u64) -> Result<T> {
        let traj = self.sets.get(q).ok_or_else(|| Error::InvalidQuerySet(format!("{q} is not part of the instance")))?;
        let pos = q.position(arm).ok_or_else(|| Error::InvalidQuerySet(format!("arm {arm} not in {q}")))?;
        Ok(traj[pos].eval(t))
    }

    /// Limits of every stored set.
    pub fn limit_profile(&self) -> Result<LimitProfile<T>> {
        let table = self
            .sets
            .iter()
            .map(|(q, traj)| (q.clone(), traj.iter().map(Trajectory::limit).collect()))
            .collect();
        let profile = LimitProfile::from_table(self.n, self.k, table, self.rate.clone())?;
        Ok(match self.declared_gcw {
            Some(arm) => profile.with_declared_gcw(arm),
            None => profile,
        })
    }
}

mod set_table {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Trajectory;
    use crate::query::{ArmId, QuerySet};

    type Nested<V> = BTreeMap<String, BTreeMap<String, V>>;

    fn set_key(q: &QuerySet) -> String {
        q.arms().iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
    }

    pub fn serialize<S: Serializer, T: Serialize>(
        map: &BTreeMap<QuerySet, Vec<Trajectory<T>>>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let nested: Nested<&Trajectory<T>> = map
            .iter()
            .map(|(q, traj)| (set_key(q), q.arms().iter().map(ToString::to_string).zip(traj.iter()).collect()))
            .collect();
        nested.serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, T: Deserialize<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<QuerySet, Vec<Trajectory<T>>>, D::Error> {
        let nested: Nested<Trajectory<T>> = Nested::deserialize(deserializer)?;
        let mut out = BTreeMap::new();
        for (key, per_arm) in nested {
            let arms = key
                .split(',')
                .map(|s| s.trim().parse::<ArmId>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| D::Error::custom(format!("bad set key {key:?}: {e}")))?;
            let q = QuerySet::new(arms).map_err(D::Error::custom)?;
            let mut by_arm = BTreeMap::new();
            for (arm_key, traj) in per_arm {
                let arm: ArmId =
                    arm_key.trim().parse().map_err(|e| D::Error::custom(format!("bad arm key {arm_key:?}: {e}")))?;
                by_arm.insert(arm, traj);
            }
            if by_arm.keys().copied().ne(q.arms().iter().copied()) {
                return Err(D::Error::custom(format!("arms listed for {q} do not match the set")));
            }
            out.insert(q, by_arm.into_values().collect());
        }
        Ok(out)
    }
}

/// Environment replaying a [`DeterministicInstance`].
///
/// The `t`-th pull of `Q` returns `o(t) = t s(t) - (t-1) s(t-1)`, so the
/// empirical mean after `t` pulls equals `s(t)` (exactly for rational scalars).
#[derive(Clone, Debug)]
pub struct DeterministicEnv<T> {
    instance: Arc<DeterministicInstance<T>>,
    ledger: PullLedger,
}

impl<T: Scalar> DeterministicEnv<T> {
    /// Wraps a validated instance.
    pub fn new(instance: DeterministicInstance<T>) -> Result<Self> {
        instance.validate()?;
        Ok(Self { instance: Arc::new(instance), ledger: PullLedger::default() })
    }

    /// The replayed instance.
    pub fn instance(&self) -> &DeterministicInstance<T> {
        &self.instance
    }
}

impl<T: Scalar> Environment<T> for DeterministicEnv<T> {
    fn n(&self) -> usize {
        self.instance.n
    }

    fn k(&self) -> usize {
        self.instance.k
    }

    fn observation_kind(&self) -> ObservationKind {
        ObservationKind::Reward
    }

    fn pull(&mut self, q: &QuerySet) -> Result<ObservationVector<T>> {
        let traj = self
            .instance
            .sets
            .get(q)
            .ok_or_else(|| Error::InvalidQuerySet(format!("{q} is not part of the instance")))?;
        let t = self.ledger.record_set(q)?;
        let tt = T::from_count(t);
        let prev = T::from_count(t - 1);
        let values = traj
            .iter()
            .map(|s| if t == 1 { s.eval(1) } else { tt.clone() * s.eval(t) - prev.clone() * s.eval(t - 1) })
            .collect();
        Ok(ObservationVector::reward(values))
    }

    fn ledger(&self) -> &PullLedger {
        &self.ledger
    }

    fn ledger_mut(&mut self) -> &mut PullLedger {
        &mut self.ledger
    }

    fn latent_limits(&self) -> Result<LimitProfile<T>> {
        self.instance.limit_profile()
    }

    fn true_best(&self) -> Option<ArmId> {
        self.instance.declared_gcw
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;
    use crate::stats::{StatisticKind, StatisticState};

    fn pair_instance() -> DeterministicInstance<Exact> {
        let q = QuerySet::new([0, 1]).unwrap();
        let a = Exact::from_ratio(3, 5);
        let mut sets = BTreeMap::new();
        sets.insert(
            q,
            vec![
                Trajectory::Reciprocal { limit: Exact::from_ratio(4, 5), amplitude: -a },
                Trajectory::Reciprocal { limit: Exact::from_ratio(1, 5), amplitude: a },
            ],
        );
        DeterministicInstance { n: 2, k: 2, rate: RateFunction::Reciprocal { amplitude: a }, declared_gcw: Some(0), sets }
    }

    #[test]
    fn empirical_mean_reproduces_trajectory() {
        let mut env = DeterministicEnv::new(pair_instance()).unwrap();
        let q = QuerySet::new([0, 1]).unwrap();
        let mut state = StatisticState::new(StatisticKind::EmpiricalMean, 2);
        for t in 1..=6_u64 {
            state.update(&env.pull(&q).unwrap()).unwrap();
            let expected: Vec<Exact> = (0..2).map(|arm| env.instance().statistic(&q, arm, t).unwrap()).collect();
            assert_eq!(state.values().unwrap(), expected);
        }
    }

    #[test]
    fn first_pull_matches_construction_example() {
        let mut env = DeterministicEnv::new(pair_instance()).unwrap();
        let q = QuerySet::new([0, 1]).unwrap();
        let o = env.pull(&q).unwrap();
        assert_eq!(o.values, vec![Exact::from_ratio(1, 5), Exact::from_ratio(4, 5)]);
    }

    #[test]
    fn unknown_set_is_rejected_without_charging() {
        let mut inst = pair_instance();
        inst.n = 3;
        let mut env = DeterministicEnv::new(inst).unwrap();
        assert!(env.pull(&QuerySet::new([0, 2]).unwrap()).is_err());
        assert_eq!(env.ledger().total_pulls(), 0);
    }

    #[test]
    fn nested_map_json_round_trip() {
        let inst = pair_instance();
        let text = serde_json::to_string(&inst).unwrap();
        assert!(text.contains("\"0,1\":{\"0\":"));
        let back: DeterministicInstance<Exact> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, inst);
        let bad = text.replace("\"1\":{", "\"2\":{");
        assert!(serde_json::from_str::<DeterministicInstance<Exact>>(&bad).is_err());
    }

    #[test]
    fn limits_and_best() {
        let env = DeterministicEnv::new(pair_instance()).unwrap();
        let p = env.latent_limits().unwrap();
        assert_eq!(p.limit(0, &QuerySet::new([0, 1]).unwrap()).unwrap(), Exact::from_ratio(4, 5));
        assert_eq!(env.true_best(), Some(0));
    }
}
