//! Per-set Gaussian rewards with a forced generalized Condorcet winner.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::{check_set, mix_seed, set_arm_seed, Environment, EnvironmentSpec, PullLedger};
use crate::error::{Error, Result};
use crate::limits::{LimitProfile, LimitRule};
use crate::observation::{ObservationKind, ObservationVector};
use crate::query::{ArmId, QuerySet};
use crate::rate::RateFunction;

const TAG_MEAN: u64 = 1;
const TAG_SIGMA: u64 = 2;
const TAG_NOISE: u64 = 3;
const TAG_ROLES: u64 = 4;

/// What a Gaussian pull reveals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaussianFeedback {
    /// The sampled reward vector.
    #[default]
    Reward,
    /// Only a one-hot indicator of the largest sampled reward.
    Winner,
}

fn default_mean_range() -> (f64, f64) {
    (0.0, 1.0)
}

fn default_sigma_range() -> (f64, f64) {
    (0.05, 0.2)
}

/// Parameters of the Gaussian subset environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    /// Reward or winner feedback.
    #[serde(default)]
    pub feedback: GaussianFeedback,
    /// Range of the uniformly drawn means of non-forced arms.
    #[serde(default = "default_mean_range")]
    pub mean_range: (f64, f64),
    /// Range of the uniformly drawn standard deviations.
    #[serde(default = "default_sigma_range")]
    pub sigma_range: (f64, f64),
}

impl Default for GaussianParams {
    fn default() -> Self {
        Self { feedback: GaussianFeedback::Reward, mean_range: default_mean_range(), sigma_range: default_sigma_range() }
    }
}

/// The deterministic part of a Gaussian instance: roles and per-set parameters.
#[derive(Clone, Debug)]
struct GaussianModel {
    n: usize,
    seed: u64,
    epsilon: f64,
    gcw: ArmId,
    borda: Option<ArmId>,
    params: GaussianParams,
}

impl GaussianModel {
    fn new(spec: &EnvironmentSpec, params: GaussianParams) -> Result<Self> {
        let (lo, hi) = params.mean_range;
        let (slo, shi) = params.sigma_range;
        if !(lo <= hi) || !(0.0 < slo && slo <= shi) {
            return Err(Error::InvalidParameter("gaussian ranges must be ordered with positive sigma".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, TAG_ROLES]));
        let gcw = rng.random_range(0..spec.n);
        let borda = spec.force_distinct_gbw.then(|| {
            let b = rng.random_range(0..spec.n - 1);
            if b >= gcw {
                b + 1
            } else {
                b
            }
        });
        Ok(Self { n: spec.n, seed: spec.seed, epsilon: spec.epsilon, gcw, borda, params })
    }

    fn uniform(&self, tag: u64, q: &QuerySet, arm: ArmId, range: (f64, f64)) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(set_arm_seed(self.seed, tag, q, arm));
        let u: f64 = rng.random();
        range.0 + (range.1 - range.0) * u
    }

    /// Means and standard deviations of the members of `q`.
    fn parameters(&self, q: &QuerySet) -> Vec<(f64, f64)> {
        let mut mu: Vec<f64> = q.arms().iter().map(|&a| self.uniform(TAG_MEAN, q, a, self.params.mean_range)).collect();
        let sigma: Vec<f64> =
            q.arms().iter().map(|&a| self.uniform(TAG_SIGMA, q, a, self.params.sigma_range)).collect();
        let boost = |mu: &mut Vec<f64>, pos: usize, gap: f64| {
            let best_other = mu
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != pos)
                .map(|(_, &m)| m)
                .fold(f64::NEG_INFINITY, f64::max);
            mu[pos] = best_other + gap;
        };
        if let Some(pos) = q.position(self.gcw) {
            boost(&mut mu, pos, self.epsilon);
        } else if let Some(pos) = self.borda.and_then(|b| q.position(b)) {
            boost(&mut mu, pos, 2.0 * self.epsilon);
        }
        mu.into_iter().zip(sigma).collect()
    }
}

/// Probability that each member of a Gaussian vector is the largest.
///
/// Evaluated by composite Simpson quadrature of
/// `P(i wins) = int phi_i(x) prod_{j != i} Phi_j(x) dx`.
pub(crate) fn gaussian_win_probabilities(params: &[(f64, f64)]) -> Vec<f64> {
    let lo = params.iter().map(|&(m, s)| m - 10.0 * s).fold(f64::INFINITY, f64::min);
    let hi = params.iter().map(|&(m, s)| m + 10.0 * s).fold(f64::NEG_INFINITY, f64::max);
    let normals: Vec<Normal> = params.iter().map(|&(m, s)| Normal::new(m, s).expect("positive sigma")).collect();
    let steps = 4000;
    let h = (hi - lo) / steps as f64;
    let mut out = vec![0.0; params.len()];
    for step in 0..=steps {
        let x = lo + h * step as f64;
        let w = if step == 0 || step == steps {
            1.0
        } else if step % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let cdfs: Vec<f64> = normals.iter().map(|d| d.cdf(x)).collect();
        for (i, d) in normals.iter().enumerate() {
            let others: f64 = cdfs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &c)| c).product();
            out[i] += w * d.pdf(x) * others;
        }
    }
    out.iter_mut().for_each(|p| *p *= h / 3.0);
    out
}

/// Gaussian subset environment.
#[derive(Debug)]
pub struct GaussianEnv {
    model: Arc<GaussianModel>,
    k: usize,
    cache: HashMap<QuerySet, Vec<(f64, f64)>>,
    rng: ChaCha8Rng,
    ledger: PullLedger,
}

impl GaussianEnv {
    /// Builds the environment described by `spec`.
    pub fn new(spec: &EnvironmentSpec, params: GaussianParams) -> Result<Self> {
        let model = GaussianModel::new(spec, params)?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, TAG_NOISE])),
            model: Arc::new(model),
            k: spec.k,
            cache: HashMap::new(),
            ledger: PullLedger::default(),
        })
    }

    /// Means and standard deviations of the members of `q`.
    pub fn parameters(&self, q: &QuerySet) -> Vec<(f64, f64)> {
        self.model.parameters(q)
    }

    /// The forced Borda winner, when `force_distinct_gbw` is set.
    pub fn forced_borda_winner(&self) -> Option<ArmId> {
        self.model.borda
    }
}

impl Environment<f64> for GaussianEnv {
    fn n(&self) -> usize {
        self.model.n
    }

    fn k(&self) -> usize {
        self.k
    }

    fn observation_kind(&self) -> ObservationKind {
        match self.model.params.feedback {
            GaussianFeedback::Reward => ObservationKind::Reward,
            GaussianFeedback::Winner => ObservationKind::Winner,
        }
    }

    fn pull(&mut self, q: &QuerySet) -> Result<ObservationVector<f64>> {
        check_set(q, self.model.n, self.k)?;
        self.ledger.record_set(q)?;
        let model = &self.model;
        let params = self.cache.entry(q.clone()).or_insert_with(|| model.parameters(q));
        let sample: Vec<f64> = params
            .iter()
            .map(|&(m, s)| {
                let z: f64 = self.rng.sample(StandardNormal);
                m + s * z
            })
            .collect();
        Ok(match model.params.feedback {
            GaussianFeedback::Reward => ObservationVector::reward(sample),
            GaussianFeedback::Winner => {
                let mut best = 0;
                for (i, v) in sample.iter().enumerate() {
                    if *v > sample[best] {
                        best = i;
                    }
                }
                ObservationVector::winner(sample.len(), best)
            }
        })
    }

    fn ledger(&self) -> &PullLedger {
        &self.ledger
    }

    fn ledger_mut(&mut self) -> &mut PullLedger {
        &mut self.ledger
    }

    fn latent_limits(&self) -> Result<LimitProfile<f64>> {
        let model = Arc::clone(&self.model);
        let sigma_max = model.params.sigma_range.1;
        let (rule, rate): (LimitRule<f64>, RateFunction<f64>) = match model.params.feedback {
            GaussianFeedback::Reward => (
                Arc::new(move |q: &QuerySet| Ok(model.parameters(q).into_iter().map(|(m, _)| m).collect())),
                RateFunction::inverse_sqrt(sigma_max),
            ),
            GaussianFeedback::Winner => (
                Arc::new(move |q: &QuerySet| Ok(gaussian_win_probabilities(&model.parameters(q)))),
                RateFunction::inverse_sqrt(0.5),
            ),
        };
        Ok(LimitProfile::from_rule(self.model.n, self.k, rule, rate)?.with_declared_gcw(self.model.gcw))
    }

    fn true_best(&self) -> Option<ArmId> {
        Some(self.model.gcw)
    }
}
