//! Euler-Maruyama path simulation under `P`, `Q` and `Q̃`.
//!
//! All coefficients and `θ` are evaluated at the left endpoint of each step.
//! The likelihood weight uses the exact exponential step
//! `M_{n+1} = M_n · exp(h(X_n) ΔY_n − ½ h(X_n)² dt)`, which keeps it positive.

use super::{DriftPolicy, Measure, ModelSpec, NoiseBundle, PathMatrix, PolicyInput, TimeGrid};
use crate::error::{invalid, Error, Result};

/// Optional per-path features a policy may need.
#[derive(Debug, Clone, Copy, Default)]
pub struct PathFeatures<'a> {
    /// `n_paths × (n_steps + 1)` filter estimates.
    pub u: Option<&'a PathMatrix>,
    /// `n_paths × (n_steps + 1)` likelihood weights.
    pub m: Option<&'a PathMatrix>,
}

impl<'a> PathFeatures<'a> {
    fn input(&self, path: usize, step: usize, t: f64, x: f64) -> PolicyInput {
        PolicyInput {
            step,
            t,
            x,
            m: self.m.map(|m| m.get(path, step)),
            u: self.u.map(|u| u.get(path, step)),
        }
    }

    fn check(&self, n_paths: usize, n_cols: usize) -> Result<()> {
        if let Some(u) = self.u {
            u.check_shape(n_paths, n_cols, "u feature")?;
        }
        if let Some(m) = self.m {
            m.check_shape(n_paths, n_cols, "m feature")?;
        }
        Ok(())
    }
}

/// Simulated trajectories plus the noise that drove them.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub x: PathMatrix,
    pub y: PathMatrix,
    pub m: PathMatrix,
    /// `log dQ/dP` restricted to `F_t`.
    pub log_density: PathMatrix,
    pub measure: Measure,
    /// Increments driving `X`: `W` under `P`, `W̃` under `Q` and `Q̃`.
    pub dw: PathMatrix,
    /// `B` increments under `P` and `Q`; the `Y` increments under `Q̃`.
    pub db: PathMatrix,
    /// `θ` applied on each step (`n_paths × n_steps`).
    pub theta: PathMatrix,
    /// Filter estimates the simulation was conditioned on, if any.
    pub u: Option<PathMatrix>,
}

impl PathBundle {
    pub fn n_paths(&self) -> usize {
        self.x.n_rows()
    }

    pub fn dy(&self, path: usize, step: usize) -> f64 {
        self.y.get(path, step + 1) - self.y.get(path, step)
    }
}

#[inline]
pub fn weight_factor(h: f64, dy: f64, dt: f64) -> f64 {
    (h * dy - 0.5 * h * h * dt).exp()
}

fn check_noise(noise: &NoiseBundle, grid: &TimeGrid) -> Result<()> {
    if noise.n_steps() != grid.n_steps {
        return Err(Error::GridMismatch(format!(
            "noise has {} steps, grid has {}",
            noise.n_steps(),
            grid.n_steps
        )));
    }
    Ok(())
}

fn check_radius(model: &ModelSpec, policy: &DriftPolicy) -> Result<()> {
    if policy.radius() > model.k * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "policy radius {} exceeds the ambiguity radius k = {}",
            policy.radius(),
            model.k
        )));
    }
    Ok(())
}

/// `X_{n+1} = X_n + (b + σθ) dt + σ ΔW̃_n`, with `θ` from `policy`.
pub fn evolve_signal(
    model: &ModelSpec,
    policy: &DriftPolicy,
    noise: &NoiseBundle,
    grid: &TimeGrid,
    features: PathFeatures<'_>,
) -> Result<PathMatrix> {
    check_noise(noise, grid)?;
    check_radius(model, policy)?;
    let n = noise.n_paths();
    features.check(n, grid.n_steps + 1)?;
    let mut x = PathMatrix::zeros(n, grid.n_steps + 1);
    for i in 0..n {
        let mut xi = model.x0;
        x.set(i, 0, xi);
        for step in 0..grid.n_steps {
            let theta = policy.eval(&features.input(i, step, grid.times[step], xi))?;
            let s = model.sigma.value(xi);
            xi += (model.b.value(xi) + s * theta) * grid.dt + s * noise.dw.get(i, step);
            x.set(i, step + 1, xi);
        }
    }
    Ok(x)
}

/// `Y_{n+1} = Y_n + h(X_n) dt + ΔB_n` under `P`/`Q`, `Y_{n+1} = Y_n + ΔB_n` under `Q̃`.
pub fn evolve_observation(
    model: &ModelSpec,
    x: &PathMatrix,
    noise: &NoiseBundle,
    grid: &TimeGrid,
    measure: Measure,
) -> Result<PathMatrix> {
    check_noise(noise, grid)?;
    x.check_shape(noise.n_paths(), grid.n_steps + 1, "signal paths")?;
    let mut y = PathMatrix::zeros(x.n_rows(), grid.n_steps + 1);
    for i in 0..x.n_rows() {
        let mut yi = 0.0;
        for step in 0..grid.n_steps {
            let drift = match measure {
                Measure::QTilde => 0.0,
                Measure::P | Measure::Q => model.h.value(x.get(i, step)) * grid.dt,
            };
            yi += drift + noise.db.get(i, step);
            y.set(i, step + 1, yi);
        }
    }
    Ok(y)
}

pub fn evolve_weight(model: &ModelSpec, x: &PathMatrix, y: &PathMatrix, grid: &TimeGrid) -> Result<PathMatrix> {
    x.check_shape(y.n_rows(), grid.n_steps + 1, "signal paths")?;
    y.check_shape(x.n_rows(), grid.n_steps + 1, "observation paths")?;
    let mut m = PathMatrix::zeros(x.n_rows(), grid.n_steps + 1);
    for i in 0..x.n_rows() {
        let mut mi = 1.0;
        m.set(i, 0, mi);
        for step in 0..grid.n_steps {
            let dy = y.get(i, step + 1) - y.get(i, step);
            mi *= weight_factor(model.h.value(x.get(i, step)), dy, grid.dt);
            m.set(i, step + 1, mi);
        }
    }
    Ok(m)
}

/// `log Λ_n = Σ θ ΔW − ½ Σ θ² dt` along each path.
pub fn girsanov_log_density(
    policy: &DriftPolicy,
    x: &PathMatrix,
    dw: &PathMatrix,
    grid: &TimeGrid,
    features: PathFeatures<'_>,
) -> Result<PathMatrix> {
    let n = x.n_rows();
    x.check_shape(n, grid.n_steps + 1, "signal paths")?;
    dw.check_shape(n, grid.n_steps, "signal increments")?;
    features.check(n, grid.n_steps + 1)?;
    let mut out = PathMatrix::zeros(n, grid.n_steps + 1);
    for i in 0..n {
        let mut acc = 0.0;
        for step in 0..grid.n_steps {
            let th = policy.eval(&features.input(i, step, grid.times[step], x.get(i, step)))?;
            acc += th * dw.get(i, step) - 0.5 * th * th * grid.dt;
            out.set(i, step + 1, acc);
        }
    }
    Ok(out)
}

/// Paths under the base measure (`θ ≡ 0`).
pub fn simulate_p(model: &ModelSpec, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathBundle> {
    let noise = super::sample_noise(grid, n_paths, seed)?;
    let zero = DriftPolicy::zero();
    let x = evolve_signal(model, &zero, &noise, grid, PathFeatures::default())?;
    let y = evolve_observation(model, &x, &noise, grid, Measure::P)?;
    let m = evolve_weight(model, &x, &y, grid)?;
    Ok(PathBundle {
        grid: grid.clone(),
        log_density: PathMatrix::zeros(n_paths, grid.n_steps + 1),
        theta: PathMatrix::zeros(n_paths, grid.n_steps),
        x,
        y,
        m,
        measure: Measure::P,
        dw: noise.dw,
        db: noise.db,
        u: None,
    })
}

/// Paths under the reference measure `Q̃` for the drift `policy`.
///
/// `Y` is the free Brownian motion from the observation stream, so filter
/// estimates `u` can be computed from it before the signal is simulated
/// and then fed to the policy. `X` and `M` are stepped together so that
/// policies reading `m` see the current weight.
pub fn simulate_q_tilde(
    model: &ModelSpec,
    policy: &DriftPolicy,
    noise: &NoiseBundle,
    grid: &TimeGrid,
    u: Option<&PathMatrix>,
) -> Result<PathBundle> {
    check_noise(noise, grid)?;
    check_radius(model, policy)?;
    let n = noise.n_paths();
    let cols = grid.n_steps + 1;
    if let Some(u) = u {
        u.check_shape(n, cols, "u feature")?;
    }
    let mut x = PathMatrix::zeros(n, cols);
    let mut y = PathMatrix::zeros(n, cols);
    let mut m = PathMatrix::zeros(n, cols);
    let mut ld = PathMatrix::zeros(n, cols);
    let mut theta = PathMatrix::zeros(n, grid.n_steps);
    for i in 0..n {
        let (mut xi, mut yi, mut mi, mut li) = (model.x0, 0.0, 1.0, 0.0);
        x.set(i, 0, xi);
        m.set(i, 0, mi);
        for step in 0..grid.n_steps {
            let mut input = PolicyInput::new(step, grid.times[step], xi).with_m(mi);
            input.u = u.map(|u| u.get(i, step));
            let th = policy.eval(&input)?;
            theta.set(i, step, th);
            let dw = noise.dw.get(i, step);
            let dy = noise.db.get(i, step);
            let s = model.sigma.value(xi);
            let hx = model.h.value(xi);
            mi *= weight_factor(hx, dy, grid.dt);
            yi += dy;
            // log dQ/dP with W = W̃ + ∫θ dt
            li += th * dw + 0.5 * th * th * grid.dt;
            xi += (model.b.value(xi) + s * th) * grid.dt + s * dw;
            x.set(i, step + 1, xi);
            y.set(i, step + 1, yi);
            m.set(i, step + 1, mi);
            ld.set(i, step + 1, li);
        }
    }
    Ok(PathBundle {
        grid: grid.clone(),
        x,
        y,
        m,
        log_density: ld,
        measure: Measure::QTilde,
        dw: noise.dw.clone(),
        db: noise.db.clone(),
        theta,
        u: u.cloned(),
    })
}
