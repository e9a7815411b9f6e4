//! Categorical winner feedback with a forced generalized Condorcet winner.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_set, mix_seed, Environment, EnvironmentSpec, PullLedger};
use crate::error::{Error, Result};
use crate::limits::LimitProfile;
use crate::observation::{ObservationKind, ObservationVector};
use crate::query::{ArmId, QuerySet};
use crate::rate::RateFunction;

const TAG_WEIGHTS: u64 = 11;
const TAG_ROLES: u64 = 12;
const TAG_DRAWS: u64 = 13;

/// How the per-arm preference weights are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreferenceWeights {
    /// Weights drawn uniformly from `[0.1, 1]`.
    #[default]
    Random,
    /// All weights equal.
    Uniform,
}

/// Parameters of the categorical preference environment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PreferenceParams {
    /// Weight family.
    #[serde(default)]
    pub weights: PreferenceWeights,
    /// Explicit winning probabilities per set, keyed like `"0,1"`.
    ///
    /// Overrides the generated probabilities for the listed sets.
    #[serde(default)]
    pub probabilities: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug)]
struct PreferenceModel {
    gcw: ArmId,
    epsilon: f64,
    weights: Vec<f64>,
    explicit: BTreeMap<QuerySet, Vec<f64>>,
}

fn parse_set_key(key: &str) -> Result<QuerySet> {
    let arms = key
        .split(',')
        .map(|s| s.trim().parse::<ArmId>().map_err(|e| Error::Config(format!("bad set key {key:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    QuerySet::new(arms)
}

impl PreferenceModel {
    fn new(spec: &EnvironmentSpec, params: &PreferenceParams) -> Result<Self> {
        if spec.epsilon >= 1.0 {
            return Err(Error::InvalidParameter("preference gap epsilon must be below 1".into()));
        }
        if spec.force_distinct_gbw {
            return Err(Error::Unsupported("force_distinct_gbw is only implemented for gaussian-subset".into()));
        }
        let mut roles = ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, TAG_ROLES]));
        let gcw = roles.random_range(0..spec.n);
        let mut wrng = ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, TAG_WEIGHTS]));
        let weights = (0..spec.n)
            .map(|_| match params.weights {
                PreferenceWeights::Random => wrng.random_range(0.1..=1.0),
                PreferenceWeights::Uniform => 1.0,
            })
            .collect();
        let mut explicit = BTreeMap::new();
        for (key, p) in &params.probabilities {
            let q = parse_set_key(key)?;
            q.check_instance(spec.n, spec.k)?;
            if p.len() != q.len() || p.iter().any(|x| !(*x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("probabilities for {q} are not a distribution")));
            }
            explicit.insert(q, p.clone());
        }
        Ok(Self { gcw, epsilon: spec.epsilon, weights, explicit })
    }

    /// Winning probabilities `p_Q` of the members of `q`.
    fn probabilities(&self, q: &QuerySet) -> Vec<f64> {
        if let Some(p) = self.explicit.get(q) {
            return p.clone();
        }
        let w: Vec<f64> = q.arms().iter().map(|&a| self.weights[a]).collect();
        match q.position(self.gcw) {
            None => {
                let total: f64 = w.iter().sum();
                w.iter().map(|x| x / total).collect()
            }
            Some(pos) => {
                let others: f64 = w.iter().enumerate().filter(|&(i, _)| i != pos).map(|(_, x)| x).sum();
                let w_max = w.iter().enumerate().filter(|&(i, _)| i != pos).map(|(_, &x)| x).fold(0.0, f64::max);
                let ratio = w_max / others;
                let p_star = (ratio + self.epsilon) / (1.0 + ratio);
                w.iter()
                    .enumerate()
                    .map(|(i, x)| if i == pos { p_star } else { (1.0 - p_star) * x / others })
                    .collect()
            }
        }
    }
}

/// Categorical preference environment: each pull reveals one winner drawn
/// from `p_Q`. For sets containing the GCW `i*`, the remaining arms share
/// `1 - p*` in proportion to their weights and `p*` exceeds the best of them
/// by exactly `epsilon`.
#[derive(Debug)]
pub struct PreferenceEnv {
    model: Arc<PreferenceModel>,
    n: usize,
    k: usize,
    rng: ChaCha8Rng,
    ledger: PullLedger,
}

impl PreferenceEnv {
    /// Builds the environment described by `spec`.
    pub fn new(spec: &EnvironmentSpec, params: PreferenceParams) -> Result<Self> {
        Ok(Self {
            model: Arc::new(PreferenceModel::new(spec, &params)?),
            n: spec.n,
            k: spec.k,
            rng: ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, TAG_DRAWS])),
            ledger: PullLedger::default(),
        })
    }

    /// Winning probabilities of the members of `q`.
    pub fn probabilities(&self, q: &QuerySet) -> Vec<f64> {
        self.model.probabilities(q)
    }
}

impl Environment<f64> for PreferenceEnv {
    fn n(&self) -> usize {
        self.n
    }

    fn k(&self) -> usize {
        self.k
    }

    fn observation_kind(&self) -> ObservationKind {
        ObservationKind::Winner
    }

    fn pull(&mut self, q: &QuerySet) -> Result<ObservationVector<f64>> {
        check_set(q, self.n, self.k)?;
        self.ledger.record_set(q)?;
        let p = self.model.probabilities(q);
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut winner = p.len() - 1;
        for (i, pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                winner = i;
                break;
            }
        }
        while p[winner] == 0.0 && winner > 0 {
            winner -= 1;
        }
        Ok(ObservationVector::winner(p.len(), winner))
    }

    fn ledger(&self) -> &PullLedger {
        &self.ledger
    }

    fn ledger_mut(&mut self) -> &mut PullLedger {
        &mut self.ledger
    }

    fn latent_limits(&self) -> Result<LimitProfile<f64>> {
        let model = Arc::clone(&self.model);
        let rule = Arc::new(move |q: &QuerySet| Ok(model.probabilities(q)));
        Ok(LimitProfile::from_rule(self.n, self.k, rule, RateFunction::inverse_sqrt(0.5))?
            .with_declared_gcw(self.model.gcw))
    }

    fn true_best(&self) -> Option<ArmId> {
        Some(self.model.gcw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvironmentModel;
    use crate::query::enumerate_query_sets_up_to;

    #[test]
    fn pair_gap_equals_epsilon() {
        let mut spec = EnvironmentSpec::preference(8, 2, 3);
        spec.epsilon = 0.2;
        let env = PreferenceEnv::new(&spec, PreferenceParams::default()).unwrap();
        let gcw = env.true_best().unwrap();
        for q in enumerate_query_sets_up_to(8, 2, Some(gcw)).unwrap() {
            let p = env.probabilities(&q);
            let pos = q.position(gcw).unwrap();
            assert!((p[pos] - p[1 - pos] - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn larger_sets_keep_gap_and_sum() {
        let spec = EnvironmentSpec::preference(7, 4, 9);
        let env = PreferenceEnv::new(&spec, PreferenceParams::default()).unwrap();
        let gcw = env.true_best().unwrap();
        for q in enumerate_query_sets_up_to(7, 4, None).unwrap() {
            let p = env.probabilities(&q);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            if let Some(pos) = q.position(gcw) {
                let best_other = p.iter().enumerate().filter(|&(i, _)| i != pos).map(|(_, &x)| x).fold(0.0, f64::max);
                assert!((p[pos] - best_other - 0.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_weights_without_gcw() {
        let spec = EnvironmentSpec {
            model: EnvironmentModel::CategoricalPreference(PreferenceParams {
                weights: PreferenceWeights::Uniform,
                ..PreferenceParams::default()
            }),
            ..EnvironmentSpec::preference(6, 3, 1)
        };
        let env = spec.build().unwrap();
        let gcw = env.true_best().unwrap();
        let limits = env.latent_limits().unwrap();
        let q = enumerate_query_sets_up_to(6, 3, None).unwrap().find(|q| !q.contains(gcw)).unwrap();
        for v in limits.limits(&q).unwrap() {
            assert!((v - 1.0 / q.len() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_probabilities() {
        let mut probabilities = BTreeMap::new();
        probabilities.insert("0,1".to_string(), vec![1.0, 0.0]);
        let spec = EnvironmentSpec {
            model: EnvironmentModel::CategoricalPreference(PreferenceParams {
                probabilities,
                ..PreferenceParams::default()
            }),
            ..EnvironmentSpec::preference(3, 2, 4)
        };
        let mut env = spec.build().unwrap();
        let q = QuerySet::new([0, 1]).unwrap();
        for _ in 0..50 {
            assert_eq!(env.pull(&q).unwrap().values, vec![1.0, 0.0]);
        }
    }
}
