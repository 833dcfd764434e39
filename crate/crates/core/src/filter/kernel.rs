use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::model::{DriftPolicy, ModelSpec, PolicyInput};

/// Moves a particle over one grid step.
pub trait SignalDynamics: Send + Sync {
    fn initial(&self) -> f64;

    /// Whether `advance` reads the particle weight or the filter estimate.
    fn needs_features(&self) -> (bool, bool) {
        (false, false)
    }

    fn advance(&self, x: f64, input: &PolicyInput, dt: f64, rng: &mut ChaCha8Rng) -> Result<f64>;
}

/// Euler-Maruyama step of the signal SDE under an assumed drift policy.
#[derive(Debug, Clone)]
pub struct DiffusionDynamics {
    pub model: ModelSpec,
    pub policy: DriftPolicy,
}

impl DiffusionDynamics {
    pub fn new(model: &ModelSpec, policy: &DriftPolicy) -> Self {
        Self { model: model.clone(), policy: policy.clone() }
    }
}

impl SignalDynamics for DiffusionDynamics {
    fn initial(&self) -> f64 {
        self.model.x0
    }

    fn needs_features(&self) -> (bool, bool) {
        (self.policy.needs_m(), self.policy.needs_u())
    }

    #[inline]
    fn advance(&self, x: f64, input: &PolicyInput, dt: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        let theta = self.policy.eval(input)?;
        let s = self.model.sigma.value(x);
        let z: f64 = rng.sample(StandardNormal);
        Ok(x + (self.model.b.value(x) + s * theta) * dt + s * dt.sqrt() * z)
    }
}

/// Finite-state Markov chain with a fixed one-step transition matrix.
#[derive(Debug, Clone)]
pub struct ChainDynamics {
    states: Vec<f64>,
    start: usize,
    cumulative: Vec<Vec<f64>>,
}

impl ChainDynamics {
    /// `transition[i][j]` is the probability of moving from state `i` to `j`
    /// in one step.
    pub fn new(states: Vec<f64>, start: usize, transition: &[Vec<f64>]) -> Result<Self> {
        let n = states.len();
        if n == 0 || start >= n || transition.len() != n || transition.iter().any(|r| r.len() != n) {
            return Err(invalid("transition matrix must be square over the state list"));
        }
        let cumulative = transition
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                let mut c: Vec<f64> = row
                    .iter()
                    .map(|p| {
                        acc += p.max(0.0);
                        acc
                    })
                    .collect();
                let total = acc;
                c.iter_mut().for_each(|v| *v /= total);
                c
            })
            .collect();
        Ok(Self { states, start, cumulative })
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    fn index_of(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, s) in self.states.iter().enumerate() {
            if (s - x).abs() < (self.states[best] - x).abs() {
                best = i;
            }
        }
        best
    }
}

impl SignalDynamics for ChainDynamics {
    fn initial(&self) -> f64 {
        self.states[self.start]
    }

    fn advance(&self, x: f64, _input: &PolicyInput, _dt: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        let row = &self.cumulative[self.index_of(x)];
        let r: f64 = rng.random();
        let j = row.iter().position(|c| r < *c).unwrap_or(row.len() - 1);
        Ok(self.states[j])
    }
}
