//! Weighted particle approximation of the filter under an assumed drift.
//!
//! Given observations `Y` on the grid, a cloud of `N` particles tracks the
//! conditional law of `X_t`. Each step first reweights the particles by the
//! likelihood of the new increment at their current positions and then
//! moves them with the assumed dynamics; systematic resampling fires when the
//! effective sample size drops below a fraction of `N`.

mod cloud;
mod kernel;

pub use cloud::{
    init_cloud, normalized_estimate, resample_if_needed, step_cloud, summarize, unnormalized_estimate, CloudSummary,
    ParticleCloud,
};
pub use kernel::{ChainDynamics, DiffusionDynamics, SignalDynamics};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{Coefficient, DriftPolicy, ModelSpec, PathMatrix, TimeGrid};
use crate::rng::{Role, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub n_particles: usize,
    /// Resample when `ESS < ess_threshold · N`.
    pub ess_threshold: f64,
    pub seed: u64,
}

impl FilterConfig {
    pub fn new(n_particles: usize, ess_threshold: f64, seed: u64) -> Result<Self> {
        let c = Self { n_particles, ess_threshold, seed };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(invalid(format!("n_particles must be at least 2, got {}", self.n_particles)));
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold <= 1.0) {
            return Err(invalid(format!("ESS threshold must lie in (0, 1], got {}", self.ess_threshold)));
        }
        Ok(())
    }
}

/// Online filter for one observation path.
pub struct FilterTracker<'a> {
    dynamics: &'a dyn SignalDynamics,
    h: &'a Coefficient,
    f: &'a Coefficient,
    cloud: ParticleCloud,
    rng: ChaCha8Rng,
    dt: f64,
    threshold: f64,
    u: f64,
    pi_h: f64,
    ess: f64,
    resampled: bool,
}

impl<'a> FilterTracker<'a> {
    pub fn new(
        dynamics: &'a dyn SignalDynamics,
        h: &'a Coefficient,
        f: &'a Coefficient,
        config: &FilterConfig,
        path_id: u64,
        dt: f64,
    ) -> Result<Self> {
        config.validate()?;
        let cloud = init_cloud(config.n_particles, dynamics.initial())?;
        let mut t = Self {
            dynamics,
            h,
            f,
            ess: cloud.len() as f64,
            cloud,
            rng: StreamKey::new(config.seed, path_id, Role::Particles).rng(),
            dt,
            threshold: config.ess_threshold,
            u: 0.0,
            pi_h: 0.0,
            resampled: false,
        };
        t.refresh();
        Ok(t)
    }

    fn refresh(&mut self) -> f64 {
        let s = summarize(&self.cloud, |x| self.f.value(x), |x| self.h.value(x));
        self.u = s.f;
        self.pi_h = s.h;
        s.ess
    }

    /// Current estimate of `f(X_t)`.
    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn pi_h(&self) -> f64 {
        self.pi_h
    }

    /// ESS after the last reweighting, before any resampling.
    pub fn ess(&self) -> f64 {
        self.ess
    }

    pub fn resampled(&self) -> bool {
        self.resampled
    }

    pub fn cloud(&self) -> &ParticleCloud {
        &self.cloud
    }

    pub fn advance(&mut self, dy: f64) -> Result<()> {
        step_cloud(&mut self.cloud, self.dynamics, self.h, dy, self.u, self.dt, &mut self.rng)?;
        self.ess = self.refresh();
        self.resampled = false;
        if self.ess < self.threshold * self.cloud.len() as f64 {
            self.resampled = resample_if_needed(&mut self.cloud, self.threshold, &mut self.rng);
        }
        Ok(())
    }
}

/// Filter output along one observation path, one entry per grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterEstimatePath {
    pub grid: TimeGrid,
    pub u: Vec<f64>,
    pub pi_h: Vec<f64>,
    pub ess: Vec<f64>,
    pub resampled: Vec<bool>,
}

impl FilterEstimatePath {
    pub fn n_resamples(&self) -> usize {
        self.resampled.iter().filter(|r| **r).count()
    }
}

/// Runs a filter with arbitrary dynamics over the observation path `y`.
pub fn run_filter_with(
    dynamics: &dyn SignalDynamics,
    h: &Coefficient,
    f: &Coefficient,
    y: &[f64],
    grid: &TimeGrid,
    config: &FilterConfig,
    path_id: u64,
) -> Result<FilterEstimatePath> {
    if y.len() != grid.n_steps + 1 {
        return Err(Error::GridMismatch(format!(
            "observation path has {} points, grid has {}",
            y.len(),
            grid.n_steps + 1
        )));
    }
    let mut tr = FilterTracker::new(dynamics, h, f, config, path_id, grid.dt)?;
    let cap = grid.n_steps + 1;
    let mut out = FilterEstimatePath {
        grid: grid.clone(),
        u: Vec::with_capacity(cap),
        pi_h: Vec::with_capacity(cap),
        ess: Vec::with_capacity(cap),
        resampled: Vec::with_capacity(cap),
    };
    let mut record = |tr: &FilterTracker| {
        out.u.push(tr.u());
        out.pi_h.push(tr.pi_h());
        out.ess.push(tr.ess());
        out.resampled.push(tr.resampled());
    };
    record(&tr);
    for n in 0..grid.n_steps {
        tr.advance(y[n + 1] - y[n])?;
        record(&tr);
    }
    Ok(out)
}

/// Particle filter for `model` assuming the signal drift `b + σθ`.
pub fn run_filter(
    model: &ModelSpec,
    assumed: &DriftPolicy,
    y: &[f64],
    grid: &TimeGrid,
    config: &FilterConfig,
    path_id: u64,
) -> Result<FilterEstimatePath> {
    let dynamics = DiffusionDynamics::new(model, assumed);
    run_filter_with(&dynamics, &model.h, &model.f, y, grid, config, path_id)
}

/// Filter estimates `u` for every row of `y`; row `i` uses particle stream `path_ids[i]`.
pub fn run_filters(
    model: &ModelSpec,
    assumed: &DriftPolicy,
    y: &PathMatrix,
    grid: &TimeGrid,
    config: &FilterConfig,
    path_ids: &[u64],
) -> Result<PathMatrix> {
    if path_ids.len() != y.n_rows() {
        return Err(Error::Shape(format!("{} path ids for {} paths", path_ids.len(), y.n_rows())));
    }
    let dynamics = DiffusionDynamics::new(model, assumed);
    let rows: Result<Vec<Vec<f64>>> = (0..y.n_rows())
        .into_par_iter()
        .map(|i| run_filter_with(&dynamics, &model.h, &model.f, y.row(i), grid, config, path_ids[i]).map(|p| p.u))
        .collect();
    PathMatrix::from_rows(rows?)
}

/// `ν_t = Y_t − ∫_0^t π_s(h) ds` with a left-point integral.
pub fn innovation_path(y: &[f64], pi_h: &[f64], dt: f64) -> Result<Vec<f64>> {
    if y.len() != pi_h.len() || y.is_empty() {
        return Err(Error::Shape(format!("{} observations vs {} filter values", y.len(), pi_h.len())));
    }
    let mut nu = Vec::with_capacity(y.len());
    let mut compensator = 0.0;
    nu.push(y[0]);
    for n in 1..y.len() {
        compensator += pi_h[n - 1] * dt;
        nu.push(y[n] - compensator);
    }
    Ok(nu)
}
