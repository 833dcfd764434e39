use rayon::prelude::*;

use super::{ControlRule, ControlTracker, RuleContext};
use crate::error::{invalid, Result};
use crate::model::{path_increments, weight_factor, DriftPolicy, Measure, ModelSpec, PolicyInput, TimeGrid};
use crate::rng::Role;
use crate::stats::MeanSe;

/// Monte Carlo estimate of the mean-square cost `E^Q ∫ |f(X_t) − u_t|² dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub j: f64,
    pub se: f64,
    pub n_paths: usize,
    pub measure: Measure,
    pub policy_digest: String,
    /// Per-path integrals, in path order.
    pub samples: Vec<f64>,
}

impl CostReport {
    fn from_samples(samples: Vec<f64>, measure: Measure, policy: &DriftPolicy) -> Self {
        let s = MeanSe::of(samples.iter().copied());
        Self { j: s.mean, se: s.se, n_paths: s.n, measure, policy_digest: policy.digest(), samples }
    }
}

/// Simulates `(X, Y)` under the measure selected by `theta` and runs the control
/// rule alongside, integrating the squared error with left-point sums.
///
/// Path `i` draws its signal, observation and particle noise from the
/// `(seed, i)` substreams, so two calls with the same seed share random numbers.
pub fn evaluate_cost(
    model: &ModelSpec,
    rule: &ControlRule,
    theta: &DriftPolicy,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<CostReport> {
    if n_paths == 0 {
        return Err(invalid("n_paths must be at least 1"));
    }
    if theta.radius() > model.k * (1.0 + 1e-12) {
        return Err(invalid(format!("policy radius {} exceeds k = {}", theta.radius(), model.k)));
    }
    let ctx = RuleContext::new(rule, model, seed)?;
    let samples: Result<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| path_cost(model, rule, &ctx, theta, grid, seed, i))
        .collect();
    let measure = if theta.is_zero() { Measure::P } else { Measure::Q };
    Ok(CostReport::from_samples(samples?, measure, theta))
}

fn path_cost(
    model: &ModelSpec,
    rule: &ControlRule,
    ctx: &RuleContext,
    theta: &DriftPolicy,
    grid: &TimeGrid,
    seed: u64,
    path_id: u64,
) -> Result<f64> {
    let dw = path_increments(grid, seed, path_id, Role::SignalNoise);
    let db = path_increments(grid, seed, path_id, Role::ObservationNoise);
    let mut tr = ControlTracker::new(rule, ctx, model, grid.dt, path_id)?;
    let (mut x, mut m, mut cost) = (model.x0, 1.0, 0.0);
    for n in 0..grid.n_steps {
        let u = tr.value();
        let th = theta.eval(&PolicyInput { step: n, t: grid.times[n], x, m: Some(m), u: Some(u) })?;
        let e = model.f.value(x) - u;
        cost += e * e * grid.dt;
        let hx = model.h.value(x);
        let dy = hx * grid.dt + db[n];
        m *= weight_factor(hx, dy, grid.dt);
        let s = model.sigma.value(x);
        x += (model.b.value(x) + s * th) * grid.dt + s * dw[n];
        tr.advance(dy)?;
    }
    Ok(cost)
}
