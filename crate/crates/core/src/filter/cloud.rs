use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::SignalDynamics;
use crate::error::{invalid, Error, Result};
use crate::model::{Coefficient, PolicyInput};
use crate::stats::log_sum_exp;

/// Particles with unnormalized log weights.
///
/// The weights start at `1/N` each, so `Σ exp(log_w)` estimates the
/// conditional mean of the likelihood weight `M_t` given the observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    pub x: Vec<f64>,
    pub log_w: Vec<f64>,
    pub step: usize,
    pub t: f64,
}

impl ParticleCloud {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn log_total_mass(&self) -> f64 {
        log_sum_exp(&self.log_w)
    }

    pub fn normalized_weights(&self) -> Vec<f64> {
        let lt = self.log_total_mass();
        self.log_w.iter().map(|l| (l - lt).exp()).collect()
    }

    /// `1 / Σ w̄²` for the normalized weights.
    pub fn ess(&self) -> f64 {
        1.0 / self.normalized_weights().iter().map(|w| w * w).sum::<f64>()
    }

    /// Per-particle likelihood weight `N · exp(log_w_i)`.
    pub fn weight_feature(&self, i: usize) -> f64 {
        self.len() as f64 * self.log_w[i].exp()
    }
}

pub fn init_cloud(n_particles: usize, x0: f64) -> Result<ParticleCloud> {
    if n_particles < 2 {
        return Err(invalid(format!("a particle cloud needs at least two particles, got {n_particles}")));
    }
    let lw = -(n_particles as f64).ln();
    Ok(ParticleCloud { x: vec![x0; n_particles], log_w: vec![lw; n_particles], step: 0, t: 0.0 })
}

/// Absorbs the increment `dy` over `[t_n, t_n + dt]` and moves every particle.
///
/// The likelihood factor uses the positions at `t_n`, which is the exact
/// Bayes update for the discretized observation `ΔY_n = h(X_n) dt + ΔB_n`.
/// `u` is the filter estimate at `t_n`, exposed to state-feedback dynamics.
pub fn step_cloud(
    cloud: &mut ParticleCloud,
    dynamics: &dyn SignalDynamics,
    h: &Coefficient,
    dy: f64,
    u: f64,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if !dy.is_finite() {
        return Err(Error::Data { step: cloud.step });
    }
    let (needs_m, needs_u) = dynamics.needs_features();
    let n = cloud.len();
    let mut max = f64::NEG_INFINITY;
    for i in 0..n {
        let x = cloud.x[i];
        let mut input = PolicyInput::new(cloud.step, cloud.t, x);
        if needs_m {
            input.m = Some(n as f64 * cloud.log_w[i].exp());
        }
        if needs_u {
            input.u = Some(u);
        }
        let hx = h.value(x);
        cloud.log_w[i] += hx * dy - 0.5 * hx * hx * dt;
        max = max.max(cloud.log_w[i]);
        cloud.x[i] = dynamics.advance(x, &input, dt, rng)?;
    }
    cloud.step += 1;
    cloud.t += dt;
    if !max.is_finite() || cloud.log_w.iter().any(|l| l.is_nan()) {
        return Err(Error::DegenerateCloud { t: cloud.t });
    }
    Ok(())
}

/// Log mass, ESS and two normalized estimates from a single pass over the weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudSummary {
    pub log_mass: f64,
    pub ess: f64,
    pub f: f64,
    pub h: f64,
}

pub fn summarize(cloud: &ParticleCloud, f: impl Fn(f64) -> f64, h: impl Fn(f64) -> f64) -> CloudSummary {
    let max = cloud.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (f0, h0) = (f(cloud.x[0]), h(cloud.x[0]));
    let (mut flo, mut fhi, mut hlo, mut hhi) = (f0, f0, h0, h0);
    let (mut mass, mut sq, mut fa, mut ha) = (0.0, 0.0, 0.0, 0.0);
    for (x, l) in cloud.x.iter().zip(&cloud.log_w) {
        let w = (l - max).exp();
        let (fv, hv) = (f(*x), h(*x));
        flo = flo.min(fv);
        fhi = fhi.max(fv);
        hlo = hlo.min(hv);
        hhi = hhi.max(hv);
        mass += w;
        sq += w * w;
        fa += w * (fv - f0);
        ha += w * (hv - h0);
    }
    CloudSummary {
        log_mass: max + mass.ln(),
        ess: mass * mass / sq,
        f: (f0 + fa / mass).clamp(flo, fhi),
        h: (h0 + ha / mass).clamp(hlo, hhi),
    }
}

/// `Σ exp(log_w_i) f(x_i)`.
pub fn unnormalized_estimate(cloud: &ParticleCloud, f: impl Fn(f64) -> f64) -> f64 {
    cloud.x.iter().zip(&cloud.log_w).map(|(x, l)| l.exp() * f(*x)).sum()
}

/// Weighted mean `Σ w̄_i f(x_i)`, clamped to the range of the `f(x_i)`.
///
/// The sum is taken relative to the first particle's value so that a
/// constant `f` is reproduced exactly.
pub fn normalized_estimate(cloud: &ParticleCloud, f: impl Fn(f64) -> f64) -> f64 {
    let lt = cloud.log_total_mass();
    let f0 = f(cloud.x[0]);
    let (mut lo, mut hi, mut acc) = (f0, f0, 0.0);
    for (x, l) in cloud.x.iter().zip(&cloud.log_w) {
        let v = f(*x);
        lo = lo.min(v);
        hi = hi.max(v);
        acc += (l - lt).exp() * (v - f0);
    }
    (f0 + acc).clamp(lo, hi)
}

/// Systematic resampling when `ESS < threshold · N`. Returns whether it fired.
///
/// Total mass is preserved: every survivor gets weight `mass / N`.
pub fn resample_if_needed(cloud: &mut ParticleCloud, threshold: f64, rng: &mut ChaCha8Rng) -> bool {
    let n = cloud.len();
    if cloud.ess() >= threshold * n as f64 {
        return false;
    }
    let w = cloud.normalized_weights();
    let lt = cloud.log_total_mass();
    let u0: f64 = rng.random::<f64>() / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cum = w[0];
    let mut j = 0;
    for i in 0..n {
        let target = u0 + i as f64 / n as f64;
        while target > cum && j + 1 < n {
            j += 1;
            cum += w[j];
        }
        out.push(cloud.x[j]);
    }
    cloud.x = out;
    let lw = lt - (n as f64).ln();
    cloud.log_w.iter_mut().for_each(|l| *l = lw);
    true
}
