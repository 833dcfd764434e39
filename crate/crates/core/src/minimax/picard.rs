use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::ControlRule;
use crate::bsde::{simulate_reference, solve_adjoint, AdjointSolution, AdjointVariant};
use crate::error::{invalid, Result};
use crate::model::{hex16, DriftPolicy, ModelSpec, PathBundle, PathMatrix, PolicyKind, TimeGrid};
use crate::regression::{RegressionBasis, RegressionSeries, State, StateVar};
use crate::stats::{sign, MeanSe};

/// `θ = k·sgn(P)` from the regressed `P` surface, with `sgn(0) = 0`.
pub fn sign_policy(adjoint: &AdjointSolution, k: f64) -> Result<DriftPolicy> {
    if k == 0.0 || adjoint.big_p.is_identically_zero() {
        return Ok(DriftPolicy::zero());
    }
    DriftPolicy::sign_of_regression(k, adjoint.big_p.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardConfig {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub n_particles: usize,
    pub ess_threshold: f64,
    pub seed: u64,
    pub basis: RegressionBasis,
    pub variant: AdjointVariant,
    pub max_iters: usize,
    /// Initial damping `γ ∈ (0, 1]`.
    pub damping: f64,
    /// Sign-agreement tolerance.
    pub tol: f64,
}

impl PicardConfig {
    pub fn new(grid: TimeGrid, n_paths: usize, n_particles: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            grid,
            n_paths,
            n_particles,
            ess_threshold: 0.5,
            seed,
            basis: RegressionBasis::polynomial(&[StateVar::X, StateVar::M, StateVar::U], 3)?,
            variant: AdjointVariant::Consistent,
            max_iters: 20,
            damping: 0.5,
            tol: 0.02,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(invalid(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(0.0..1.0).contains(&self.tol) {
            return Err(invalid(format!("sign-agreement tolerance must lie in [0, 1), got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        self.basis.check_paths(self.n_paths)
    }

    pub fn rule(&self, assumed: &DriftPolicy) -> ControlRule {
        ControlRule::filter(assumed.clone(), self.n_particles, self.ess_threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardIteration {
    pub iter: usize,
    /// Cost of the iteration's simulation, `Ẽ ∫ |f − u|² M dt`.
    pub j: f64,
    pub j_se: f64,
    /// Fraction of path-steps where the new and previous sign surfaces agree.
    pub sign_agreement: f64,
    pub damping: f64,
}

#[derive(Debug, Clone)]
pub struct PicardReport {
    pub iterations: Vec<PicardIteration>,
    pub converged: bool,
    /// Drift used in the last simulation; the filter `u*` assumes it.
    pub final_policy: DriftPolicy,
    pub final_u_digest: String,
    pub final_j: f64,
    pub final_j_se: f64,
}

impl PicardReport {
    pub fn final_rule(&self, config: &PicardConfig) -> ControlRule {
        config.rule(&self.final_policy)
    }
}

fn weighted_cost(model: &ModelSpec, paths: &PathBundle, u: &PathMatrix) -> MeanSe {
    let g = &paths.grid;
    MeanSe::of((0..paths.n_paths()).map(|i| {
        (0..g.n_steps)
            .map(|n| {
                let e = model.f.value(paths.x.get(i, n)) - u.get(i, n);
                e * e * paths.m.get(i, n) * g.dt
            })
            .sum::<f64>()
    }))
}

fn digest_matrix(m: &PathMatrix) -> String {
    let mut h = Sha256::new();
    for v in m.values() {
        h.update(v.to_bits().to_le_bytes());
    }
    hex16(&h.finalize())
}

/// Share of path-steps on which two sign surfaces give the same sign.
fn agreement(a: Option<&RegressionSeries>, b: &RegressionSeries, paths: &PathBundle, u: &PathMatrix) -> f64 {
    let g = &paths.grid;
    let mut same = 0usize;
    let total = paths.n_paths() * g.n_steps;
    for i in 0..paths.n_paths() {
        for n in 0..g.n_steps {
            let s = State { x: paths.x.get(i, n), m: paths.m.get(i, n), u: u.get(i, n) };
            let sa = a.map_or(0.0, |a| sign(a.eval(n, &s)));
            if sa == sign(b.eval(n, &s)) {
                same += 1;
            }
        }
    }
    same as f64 / total as f64
}

/// `(1 − γ) θ_old + γ k·sgn(P)` as a mixture of sign surfaces.
fn damped(old: &DriftPolicy, surface: Option<Arc<RegressionSeries>>, k: f64, gamma: f64) -> Result<DriftPolicy> {
    let mut terms: Vec<(f64, Arc<RegressionSeries>)> = match old.kind() {
        PolicyKind::SignOfRegression(t) => t.iter().map(|(w, s)| ((1.0 - gamma) * w, s.clone())).collect(),
        _ => Vec::new(),
    };
    if let Some(s) = surface {
        terms.push((gamma, s));
    }
    terms.retain(|(w, _)| *w > 1e-6);
    if terms.is_empty() {
        return Ok(DriftPolicy::zero());
    }
    DriftPolicy::new(k, PolicyKind::SignOfRegression(terms))
}

/// Fixed-point iteration on `θ = k·sgn(P)`.
///
/// Every iteration reuses the configured seed, so successive costs differ
/// only through the policy. The first update from `θ ≡ 0` is taken in full;
/// later ones are damped, and the damping halves whenever sign agreement
/// drops. Convergence needs agreement `≥ 1 − tol` on two consecutive
/// iterations with a relative cost change of at most 1%, or an unchanged policy.
pub fn picard_solve(model: &ModelSpec, config: &PicardConfig) -> Result<PicardReport> {
    model.require_h1("picard_solve")?;
    config.validate()?;
    let k = model.k;
    let mut theta = DriftPolicy::zero();
    let mut prev_surface: Option<Arc<RegressionSeries>> = None;
    let mut gamma = config.damping;
    let mut iterations: Vec<PicardIteration> = Vec::new();
    let mut converged = false;
    let mut last = (0.0, 0.0, String::new());
    for iter in 0..config.max_iters {
        let paths = simulate_reference(model, &theta, &config.rule(&theta), &config.grid, config.n_paths, config.seed)?;
        let u = paths.u.clone().expect("reference paths carry u");
        let cost = weighted_cost(model, &paths, &u);
        last = (cost.mean, cost.se, digest_matrix(&u));
        let adjoint = solve_adjoint(&paths, &u, model, &config.basis, config.variant)?;
        let target = sign_policy(&adjoint, k)?;
        let surface = match target.kind() {
            PolicyKind::SignOfRegression(t) => Some(t[0].1.clone()),
            _ => None,
        };
        let agree = match &surface {
            Some(s) => agreement(prev_surface.as_deref(), s, &paths, &u),
            None if prev_surface.is_none() => 1.0,
            None => agreement(None, prev_surface.as_deref().unwrap(), &paths, &u),
        };
        if let Some(prev) = iterations.last() {
            if agree < prev.sign_agreement {
                gamma *= 0.5;
            }
        }
        let used_gamma = if iter == 0 { 1.0 } else { gamma };
        iterations.push(PicardIteration { iter, j: cost.mean, j_se: cost.se, sign_agreement: agree, damping: used_gamma });
        if surface.is_none() && theta.is_zero() {
            converged = true;
            break;
        }
        if iterations.len() >= 2 {
            let a = &iterations[iterations.len() - 2];
            let b = &iterations[iterations.len() - 1];
            let rel = (b.j - a.j).abs() / a.j.abs().max(f64::MIN_POSITIVE);
            if a.sign_agreement >= 1.0 - config.tol && b.sign_agreement >= 1.0 - config.tol && rel <= 0.01 {
                converged = true;
                break;
            }
        }
        theta = damped(&theta, surface.clone(), k, used_gamma)?;
        prev_surface = surface;
    }
    Ok(PicardReport {
        iterations,
        converged,
        final_policy: theta,
        final_u_digest: last.2,
        final_j: last.0,
        final_j_se: last.1,
    })
}
