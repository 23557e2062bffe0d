//! Random instances with a planted gap.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{binomial, Family, MeanVector};
use crate::error::{Error, Result};
use crate::gaps::gap_summary;
use crate::oracle::top_k_singletons;
use crate::reward::{NnWeights, RewardKind, RewardModel, ENUMERATION_CAP};
use crate::rng::{Seed, Stream};

/// Per-step shrink factor for the suboptimal means.
const SHRINK: f64 = 0.95;
const SHRINK_STEPS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceSpec {
    pub m: usize,
    pub k: usize,
    pub reward: RewardKind,
    /// Required minimum gap (exact below the enumeration cap, else the
    /// top-`K` singleton margin).
    pub gap_target: f64,
    pub hidden: usize,
    pub weight_scale: f64,
    pub max_retries: usize,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            m: 500,
            k: 5,
            reward: RewardKind::Linear,
            gap_target: 0.25,
            hidden: 20,
            weight_scale: 1.0,
            max_retries: 100,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeneratedInstance {
    pub mu: MeanVector,
    pub model: RewardModel,
    pub weights: Option<NnWeights>,
    /// Achieved gap, measured as for `gap_target`.
    pub margin: f64,
    pub attempts: usize,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k >= self.m {
            return Err(Error::config(format!("need 0 < K < m, got K = {}, m = {}", self.k, self.m)));
        }
        if !(self.gap_target >= 0.0) || self.max_retries == 0 {
            return Err(Error::config("gap_target must be nonnegative and max_retries positive"));
        }
        if self.reward == RewardKind::Nn && (self.hidden == 0 || !(self.weight_scale > 0.0)) {
            return Err(Error::config("network needs hidden >= 1 and weight_scale > 0"));
        }
        Ok(())
    }

    /// Draws `mu ~ U[0,1]^m` (and network weights), then shrinks every mean
    /// outside the top `K` geometrically until the gap reaches the target.
    /// Starts over with fresh draws when shrinking stalls.
    pub fn generate(&self, seed: Seed) -> Result<GeneratedInstance> {
        self.validate()?;
        let mut rng = seed.stream(Stream::Instance);
        let mut last = f64::NAN;
        for attempt in 1..=self.max_retries {
            let weights = match self.reward {
                RewardKind::Linear => None,
                RewardKind::Nn => Some(NnWeights::random(self.hidden, self.m, self.weight_scale, &mut rng)),
            };
            let model = match &weights {
                None => RewardModel::linear(self.k),
                Some(w) => RewardModel::nn(w.clone(), self.k),
            };
            let mut mu: Vec<f64> = (0..self.m).map(|_| rng.random::<f64>()).collect();
            let top = top_k_singletons(model.function(), &MeanVector::new(mu.clone())?, self.k);
            for _ in 0..=SHRINK_STEPS {
                let theta = MeanVector::new(mu.clone())?;
                last = self.margin(&model, &theta, &top)?;
                if last >= self.gap_target {
                    return Ok(GeneratedInstance { mu: theta, model, weights, margin: last, attempts: attempt });
                }
                for (i, x) in mu.iter_mut().enumerate() {
                    if !top.contains(&i) {
                        *x *= SHRINK;
                    }
                }
            }
        }
        Err(Error::Generation {
            attempts: self.max_retries,
            reason: format!("gap {last} never reached the target {}", self.gap_target),
        })
    }

    fn margin(&self, model: &RewardModel, theta: &MeanVector, top: &[usize]) -> Result<f64> {
        if binomial(self.m, self.k) <= ENUMERATION_CAP {
            // the planted set must stay optimal
            let g = gap_summary(model, theta, Family::ExactlyK, ENUMERATION_CAP)?;
            if g.optimal_sets.len() != 1 || g.optimal_sets[0].arms() != top {
                return Ok(0.0);
            }
            return Ok(g.delta_min);
        }
        let f = model.function();
        let th = theta.as_slice();
        let single = |i: usize| f.value(&[i], th);
        let worst_top = top.iter().map(|&i| single(i)).fold(f64::INFINITY, f64::min);
        let best_rest = (0..self.m).filter(|i| !top.contains(i)).map(single).fold(f64::NEG_INFINITY, f64::max);
        Ok(worst_top - best_rest)
    }
}
