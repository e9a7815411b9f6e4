//! Censored runtime races: pulling a set runs its members in parallel and
//! reveals only the fastest.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_set, mix_seed, Environment, EnvironmentSpec, PullLedger};
use crate::error::{Error, Result};
use crate::limits::LimitProfile;
use crate::observation::{ObservationKind, ObservationVector};
use crate::query::{ArmId, QuerySet};
use crate::rate::RateFunction;

const TAG_ARMS: u64 = 21;
const TAG_RUNS: u64 = 22;
const TAG_MONTE_CARLO: u64 = 23;

fn default_location_range() -> (f64, f64) {
    (0.0, 2.0)
}

fn default_scale_range() -> (f64, f64) {
    (0.5, 1.0)
}

fn default_mc_samples() -> u64 {
    1_000_000
}

/// Log-normal runtime parameters of the race environment.
///
/// Arm `i` runs for `exp(mu_i + sigma_i Z)` seconds with `Z` standard normal;
/// `sigma_i = 0` gives a constant runtime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaceParams {
    /// Explicit log-locations; drawn from `location_range` when absent.
    #[serde(default)]
    pub locations: Option<Vec<f64>>,
    /// Explicit log-scales; drawn from `scale_range` when absent.
    #[serde(default)]
    pub scales: Option<Vec<f64>>,
    /// Range of the drawn log-locations.
    #[serde(default = "default_location_range")]
    pub location_range: (f64, f64),
    /// Range of the drawn log-scales.
    #[serde(default = "default_scale_range")]
    pub scale_range: (f64, f64),
    /// Monte-Carlo sample count for win probabilities.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: u64,
}

impl Default for RaceParams {
    fn default() -> Self {
        Self {
            locations: None,
            scales: None,
            location_range: default_location_range(),
            scale_range: default_scale_range(),
            mc_samples: default_mc_samples(),
        }
    }
}

impl RaceParams {
    /// Constant runtimes `exp(location) = runtimes[i]`.
    pub fn constant(runtimes: &[f64]) -> Self {
        Self {
            locations: Some(runtimes.iter().map(|r| r.ln()).collect()),
            scales: Some(vec![0.0; runtimes.len()]),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
struct RaceModel {
    seed: u64,
    locations: Vec<f64>,
    scales: Vec<f64>,
    mc_samples: u64,
}

impl RaceModel {
    fn new(spec: &EnvironmentSpec, params: &RaceParams) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, TAG_ARMS]));
        let mut draw = |given: &Option<Vec<f64>>, range: (f64, f64), what: &str| -> Result<Vec<f64>> {
            match given {
                Some(v) if v.len() == spec.n => Ok(v.clone()),
                Some(v) => Err(Error::InvalidParameter(format!("{} {what} for {} arms", v.len(), spec.n))),
                None => Ok((0..spec.n).map(|_| range.0 + (range.1 - range.0) * rng.random::<f64>()).collect()),
            }
        };
        let locations = draw(&params.locations, params.location_range, "locations")?;
        let scales = draw(&params.scales, params.scale_range, "scales")?;
        if scales.iter().any(|s| !(*s >= 0.0)) || locations.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("race scales must be >= 0 and locations finite".into()));
        }
        if params.mc_samples == 0 {
            return Err(Error::InvalidParameter("mc_samples must be positive".into()));
        }
        Ok(Self { seed: spec.seed, locations, scales, mc_samples: params.mc_samples })
    }

    fn sample(&self, arm: ArmId, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.locations[arm] + self.scales[arm] * z).exp()
    }

    fn expected_runtime(&self, arm: ArmId) -> f64 {
        (self.locations[arm] + 0.5 * self.scales[arm] * self.scales[arm]).exp()
    }

    fn best_arm(&self) -> ArmId {
        let mut best = 0;
        for arm in 1..self.locations.len() {
            if self.expected_runtime(arm) < self.expected_runtime(best) {
                best = arm;
            }
        }
        best
    }

    /// Monte-Carlo win probabilities and their standard errors.
    fn win_probabilities(&self, q: &QuerySet) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(super::set_arm_seed(self.seed, TAG_MONTE_CARLO, q, 0));
        let mut wins = vec![0_u64; q.len()];
        for _ in 0..self.mc_samples {
            let (winner, _) = race(q.arms().iter().map(|&a| self.sample(a, &mut rng)));
            wins[winner] += 1;
        }
        let m = self.mc_samples as f64;
        let p: Vec<f64> = wins.iter().map(|&w| w as f64 / m).collect();
        let se = p.iter().map(|&x| (x * (1.0 - x) / m).sqrt()).collect();
        (p, se)
    }
}

/// Position and value of the smallest runtime; ties go to the earliest position.
fn race(runtimes: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, r) in runtimes.enumerate() {
        if r < best.1 {
            best = (i, r);
        }
    }
    best
}

/// Censored race environment over log-normal runtimes.
#[derive(Debug)]
pub struct RaceEnv {
    model: Arc<RaceModel>,
    n: usize,
    k: usize,
    rng: ChaCha8Rng,
    ledger: PullLedger,
}

impl RaceEnv {
    /// Builds the environment described by `spec`.
    pub fn new(spec: &EnvironmentSpec, params: RaceParams) -> Result<Self> {
        Ok(Self {
            model: Arc::new(RaceModel::new(spec, &params)?),
            n: spec.n,
            k: spec.k,
            rng: ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, TAG_RUNS])),
            ledger: PullLedger::default(),
        })
    }

    /// Expected runtime `exp(mu + sigma^2 / 2)` of `arm`.
    pub fn expected_runtime(&self, arm: ArmId) -> f64 {
        self.model.expected_runtime(arm)
    }

    /// Monte-Carlo win probabilities of the members of `q` with standard errors.
    pub fn win_probabilities(&self, q: &QuerySet) -> (Vec<f64>, Vec<f64>) {
        self.model.win_probabilities(q)
    }
}

impl Environment<f64> for RaceEnv {
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
        let model = &self.model;
        let rng = &mut self.rng;
        let (winner, fastest) = race(q.arms().iter().map(|&a| model.sample(a, rng)));
        self.ledger.add_wallclock(fastest);
        Ok(ObservationVector::winner(q.len(), winner))
    }

    fn pull_arm(&mut self, arm: ArmId) -> Result<f64> {
        if arm >= self.n {
            return Err(Error::InvalidParameter(format!("arm {arm} outside 0..{}", self.n)));
        }
        self.ledger.record_singleton()?;
        let runtime = self.model.sample(arm, &mut self.rng);
        self.ledger.add_wallclock(runtime);
        Ok(runtime)
    }

    fn ledger(&self) -> &PullLedger {
        &self.ledger
    }

    fn ledger_mut(&mut self) -> &mut PullLedger {
        &mut self.ledger
    }

    fn latent_limits(&self) -> Result<LimitProfile<f64>> {
        let model = Arc::clone(&self.model);
        let rule = Arc::new(move |q: &QuerySet| Ok(model.win_probabilities(q).0));
        LimitProfile::from_rule(self.n, self.k, rule, RateFunction::inverse_sqrt(0.5))
    }

    fn true_best(&self) -> Option<ArmId> {
        Some(self.model.best_arm())
    }
}
