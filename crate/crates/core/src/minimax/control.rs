use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::{DiffusionDynamics, FilterConfig, FilterTracker};
use crate::model::{DriftPolicy, ModelSpec, PathMatrix, TimeGrid};
use crate::oracles::{KalmanStepper, LinearGaussianSpec};

/// Clips every entry into `[−f_sup, f_sup]`.
pub fn clamp_control(u: &[f64], f_sup: f64) -> Vec<f64> {
    u.iter().map(|v| clamp_one(*v, Some(f_sup))).collect()
}

#[inline]
fn clamp_one(u: f64, f_sup: Option<f64>) -> f64 {
    match f_sup {
        Some(s) => u.clamp(-s, s),
        None => u,
    }
}

/// A causal estimate `u_t` built from the observations up to `t`.
#[derive(Debug, Clone)]
pub enum ControlRule {
    Constant(f64),
    /// Particle filter assuming drift `assumed`, shifted by `offset`.
    Filter { assumed: DriftPolicy, n_particles: usize, ess_threshold: f64, offset: f64 },
    /// Kalman-Bucy mean (linear-Gaussian models only).
    KalmanBucy(LinearGaussianSpec),
}

impl ControlRule {
    pub fn filter(assumed: DriftPolicy, n_particles: usize, ess_threshold: f64) -> Self {
        ControlRule::Filter { assumed, n_particles, ess_threshold, offset: 0.0 }
    }

    /// The classical filter (`θ ≡ 0`).
    pub fn classical(n_particles: usize, ess_threshold: f64) -> Self {
        Self::filter(DriftPolicy::zero(), n_particles, ess_threshold)
    }

    pub fn with_offset(&self, delta: f64) -> Self {
        match self {
            ControlRule::Constant(c) => ControlRule::Constant(c + delta),
            ControlRule::Filter { assumed, n_particles, ess_threshold, offset } => ControlRule::Filter {
                assumed: assumed.clone(),
                n_particles: *n_particles,
                ess_threshold: *ess_threshold,
                offset: offset + delta,
            },
            ControlRule::KalmanBucy(_) => self.clone(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ControlRule::Constant(c) => format!("constant({c})"),
            ControlRule::Filter { assumed, n_particles, offset, .. } => {
                format!("filter(theta={}, n={n_particles}, offset={offset})", assumed.digest())
            }
            ControlRule::KalmanBucy(_) => "kalman_bucy".into(),
        }
    }
}

/// A control rule running along one observation path.
pub struct ControlTracker<'a> {
    live: Live<'a>,
    f_sup: Option<f64>,
}

enum Live<'a> {
    Constant(f64),
    Filter(FilterTracker<'a>, f64),
    Kalman(KalmanStepper),
}

/// Dynamics a filter rule needs, built once per evaluation.
pub struct RuleContext {
    dynamics: Option<(DiffusionDynamics, FilterConfig)>,
}

impl RuleContext {
    pub fn new(rule: &ControlRule, model: &ModelSpec, seed: u64) -> Result<Self> {
        let dynamics = match rule {
            ControlRule::Filter { assumed, n_particles, ess_threshold, .. } => Some((
                DiffusionDynamics::new(model, assumed),
                FilterConfig::new(*n_particles, *ess_threshold, seed)?,
            )),
            _ => None,
        };
        Ok(Self { dynamics })
    }
}

impl<'a> ControlTracker<'a> {
    pub fn new(
        rule: &ControlRule,
        ctx: &'a RuleContext,
        model: &'a ModelSpec,
        dt: f64,
        path_id: u64,
    ) -> Result<Self> {
        let live = match rule {
            ControlRule::Constant(c) => Live::Constant(*c),
            ControlRule::Filter { offset, .. } => {
                let (dyn_, cfg) = ctx.dynamics.as_ref().expect("context built for this rule");
                Live::Filter(FilterTracker::new(dyn_, &model.h, &model.f, cfg, path_id, dt)?, *offset)
            }
            ControlRule::KalmanBucy(spec) => Live::Kalman(KalmanStepper::new(spec, dt)),
        };
        Ok(Self { live, f_sup: model.f_sup() })
    }

    /// Current control value, clamped to `‖f‖∞` when `f` is bounded.
    pub fn value(&self) -> f64 {
        let raw = match &self.live {
            Live::Constant(c) => *c,
            Live::Filter(t, offset) => t.u() + offset,
            Live::Kalman(k) => k.mean(),
        };
        clamp_one(raw, self.f_sup)
    }

    pub fn advance(&mut self, dy: f64) -> Result<()> {
        match &mut self.live {
            Live::Constant(_) => Ok(()),
            Live::Filter(t, _) => t.advance(dy),
            Live::Kalman(k) => {
                k.advance(dy);
                Ok(())
            }
        }
    }
}

/// Runs `rule` along every row of `y`; particle streams come from `(seed, path_ids[i])`.
pub fn control_paths(
    rule: &ControlRule,
    model: &ModelSpec,
    y: &PathMatrix,
    grid: &TimeGrid,
    seed: u64,
    path_ids: &[u64],
) -> Result<PathMatrix> {
    if path_ids.len() != y.n_rows() || y.n_cols() != grid.n_steps + 1 {
        return Err(Error::Shape(format!(
            "{} path ids for a {}×{} observation matrix on {} steps",
            path_ids.len(),
            y.n_rows(),
            y.n_cols(),
            grid.n_steps
        )));
    }
    let ctx = RuleContext::new(rule, model, seed)?;
    let rows: Result<Vec<Vec<f64>>> = (0..y.n_rows())
        .into_par_iter()
        .map(|i| {
            let mut tr = ControlTracker::new(rule, &ctx, model, grid.dt, path_ids[i])?;
            let yi = y.row(i);
            let mut out = Vec::with_capacity(yi.len());
            out.push(tr.value());
            for n in 0..grid.n_steps {
                tr.advance(yi[n + 1] - yi[n])?;
                out.push(tr.value());
            }
            Ok(out)
        })
        .collect();
    PathMatrix::from_rows(rows?)
}
