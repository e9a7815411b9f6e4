//! Feedback environments: stochastic, preference, censored-race and
//! deterministic adversarial instances.

mod adversarial;
mod deterministic;
mod gaussian;
mod preference;
mod race;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::LimitProfile;
use crate::observation::{ObservationKind, ObservationVector};
use crate::query::{ArmId, QuerySet};
use crate::scalar::Scalar;

pub use adversarial::{
    check_membership, make_gcw_lowerbound_instance, make_necessity_instance, make_round_robin_necessity_instance,
    lower_bound_b_prime, GcwLowerBoundFamily, MembershipViolation, NecessityInstance,
};
pub use deterministic::{DeterministicEnv, DeterministicInstance, Trajectory};
pub use gaussian::{GaussianEnv, GaussianFeedback, GaussianParams};
pub use preference::{PreferenceEnv, PreferenceParams, PreferenceWeights};
pub use race::{RaceEnv, RaceParams};

/// Folds `parts` into one well-mixed 64-bit seed (SplitMix64 finalizer chain).
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x9E37_79B9_7F4A_7C15_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed derived from a base seed, a domain tag, a query set and an arm.
pub(crate) fn set_arm_seed(seed: u64, tag: u64, q: &QuerySet, arm: ArmId) -> u64 {
    let mut parts = Vec::with_capacity(q.len() + 4);
    parts.push(seed);
    parts.push(tag);
    parts.push(q.len() as u64);
    parts.extend(q.arms().iter().map(|&a| a as u64));
    parts.push(arm as u64);
    mix_seed(&parts)
}

/// Pull accounting shared by all environments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PullLedger {
    total_pulls: u64,
    per_set: HashMap<QuerySet, u64>,
    singleton_pulls: u64,
    wallclock: f64,
    cap: Option<u64>,
}

impl PullLedger {
    /// Total pulls, set pulls and singleton pulls combined.
    pub fn total_pulls(&self) -> u64 {
        self.total_pulls
    }

    /// Number of times `q` has been pulled.
    pub fn count(&self, q: &QuerySet) -> u64 {
        self.per_set.get(q).copied().unwrap_or(0)
    }

    /// Number of distinct query sets pulled at least once.
    pub fn distinct_query_sets(&self) -> usize {
        self.per_set.len()
    }

    /// Number of single-arm pulls.
    pub fn singleton_pulls(&self) -> u64 {
        self.singleton_pulls
    }

    /// Accumulated simulated wallclock seconds.
    pub fn wallclock(&self) -> f64 {
        self.wallclock
    }

    /// Current pull cap.
    pub fn cap(&self) -> Option<u64> {
        self.cap
    }

    /// Sets or clears the pull cap.
    pub fn set_cap(&mut self, cap: Option<u64>) {
        self.cap = cap;
    }

    fn admit(&self) -> Result<()> {
        match self.cap {
            Some(cap) if self.total_pulls >= cap => Err(Error::BudgetExhausted { cap }),
            _ => Ok(()),
        }
    }

    /// Records a pull of `q` and returns its new count `n_Q`.
    pub fn record_set(&mut self, q: &QuerySet) -> Result<u64> {
        self.admit()?;
        self.total_pulls += 1;
        let c = self.per_set.entry(q.clone()).or_insert(0);
        *c += 1;
        Ok(*c)
    }

    /// Records a single-arm pull.
    pub fn record_singleton(&mut self) -> Result<()> {
        self.admit()?;
        self.total_pulls += 1;
        self.singleton_pulls += 1;
        Ok(())
    }

    /// Adds simulated elapsed time.
    pub fn add_wallclock(&mut self, seconds: f64) {
        self.wallclock += seconds;
    }
}

/// A source of feedback for query-set pulls.
pub trait Environment<T: Scalar>: Send {
    /// Arm count `n`.
    fn n(&self) -> usize;

    /// Maximum query-set size `k`.
    fn k(&self) -> usize;

    /// Domain of the observation vectors this environment emits.
    fn observation_kind(&self) -> ObservationKind;

    /// Pulls `q` once and returns the feedback vector.
    fn pull(&mut self, q: &QuerySet) -> Result<ObservationVector<T>>;

    /// Runs a single arm and returns its raw observation.
    fn pull_arm(&mut self, arm: ArmId) -> Result<T> {
        let _ = arm;
        Err(Error::Unsupported("single-arm pulls are only available in the censored-race environment".into()))
    }

    /// Pull accounting.
    fn ledger(&self) -> &PullLedger;

    /// Mutable pull accounting, used to install a budget cap.
    fn ledger_mut(&mut self) -> &mut PullLedger;

    /// Asymptotic statistics `S_{i|Q}` of the environment.
    fn latent_limits(&self) -> Result<LimitProfile<T>>;

    /// The arm a learner should return (GCW or minimal expected runtime).
    fn true_best(&self) -> Option<ArmId>;
}

/// Checks that `q` is admissible for an environment with `n` arms and size cap `k`.
pub(crate) fn check_set(q: &QuerySet, n: usize, k: usize) -> Result<()> {
    q.check_instance(n, k)
}

fn default_epsilon() -> f64 {
    0.1
}

/// Kind-specific environment parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvironmentModel {
    /// Per-set Gaussian rewards with a forced GCW.
    GaussianSubset(GaussianParams),
    /// Categorical winner feedback with a forced GCW.
    CategoricalPreference(PreferenceParams),
    /// Parallel runtime races revealing only the fastest arm.
    CensoredRace(RaceParams),
    /// Explicit statistic trajectories.
    DeterministicSequence {
        /// The tabulated instance.
        instance: DeterministicInstance<f64>,
    },
}

impl EnvironmentModel {
    /// Short kind label used in CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            Self::GaussianSubset(p) if p.feedback == GaussianFeedback::Winner => "gaussian-subset-winner",
            Self::GaussianSubset(_) => "gaussian-subset",
            Self::CategoricalPreference(_) => "categorical-preference",
            Self::CensoredRace(_) => "censored-race",
            Self::DeterministicSequence { .. } => "deterministic-sequence",
        }
    }
}

/// Complete, serializable description of an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    /// Arm count.
    pub n: usize,
    /// Maximum query-set size.
    pub k: usize,
    /// Seed determining every sampled quantity.
    #[serde(default)]
    pub seed: u64,
    /// Gap of the forced GCW.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Force a Borda winner different from the GCW.
    #[serde(default)]
    pub force_distinct_gbw: bool,
    /// Kind-specific parameters.
    #[serde(flatten)]
    pub model: EnvironmentModel,
}

impl EnvironmentSpec {
    /// Gaussian reward environment with default parameters.
    pub fn gaussian(n: usize, k: usize, seed: u64) -> Self {
        Self {
            n,
            k,
            seed,
            epsilon: default_epsilon(),
            force_distinct_gbw: false,
            model: EnvironmentModel::GaussianSubset(GaussianParams::default()),
        }
    }

    /// Categorical preference environment with default parameters.
    pub fn preference(n: usize, k: usize, seed: u64) -> Self {
        Self { model: EnvironmentModel::CategoricalPreference(PreferenceParams::default()), ..Self::gaussian(n, k, seed) }
    }

    /// Censored race environment with default parameters.
    pub fn race(n: usize, k: usize, seed: u64) -> Self {
        Self { model: EnvironmentModel::CensoredRace(RaceParams::default()), ..Self::gaussian(n, k, seed) }
    }

    /// Deterministic environment wrapping an explicit instance.
    pub fn deterministic(instance: DeterministicInstance<f64>) -> Self {
        Self {
            n: instance.n,
            k: instance.k,
            seed: 0,
            epsilon: default_epsilon(),
            force_distinct_gbw: false,
            model: EnvironmentModel::DeterministicSequence { instance },
        }
    }

    /// Copy with a different seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Copy with different dimensions.
    pub fn with_dims(mut self, n: usize, k: usize) -> Self {
        self.n = n;
        self.k = k;
        self
    }

    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<()> {
        let generative = !matches!(self.model, EnvironmentModel::DeterministicSequence { .. });
        if self.n < 2 || self.k < 2 || self.k > self.n {
            return Err(Error::InvalidParameter(format!("need 2 <= k <= n, got n={}, k={}", self.n, self.k)));
        }
        if generative && !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.force_distinct_gbw && self.n < 3 {
            return Err(Error::InvalidParameter("a distinct Borda winner needs n >= 3".into()));
        }
        Ok(())
    }

    /// Instantiates the environment.
    pub fn build(&self) -> Result<Box<dyn Environment<f64>>> {
        self.validate()?;
        Ok(match &self.model {
            EnvironmentModel::GaussianSubset(p) => Box::new(GaussianEnv::new(self, p.clone())?),
            EnvironmentModel::CategoricalPreference(p) => Box::new(PreferenceEnv::new(self, p.clone())?),
            EnvironmentModel::CensoredRace(p) => Box::new(RaceEnv::new(self, p.clone())?),
            EnvironmentModel::DeterministicSequence { instance } => {
                if instance.n != self.n || instance.k != self.k {
                    return Err(Error::InvalidParameter(format!(
                        "deterministic instance has n={}, k={} but the spec says n={}, k={}",
                        instance.n, instance.k, self.n, self.k
                    )));
                }
                Box::new(DeterministicEnv::new(instance.clone())?)
            }
        })
    }
}
