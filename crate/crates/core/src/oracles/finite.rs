use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::filter::{ChainDynamics, SignalDynamics};
use crate::model::{ModelSpec, PolicyInput, TimeGrid};
use crate::rng::{Role, StreamKey};

/// Continuous-time chain on a finite state grid standing in for the signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSignalSpec {
    pub states: Vec<f64>,
    /// Row `i` holds the jump rates out of state `i`.
    pub rate_matrix: Vec<Vec<f64>>,
    pub h_values: Vec<f64>,
    pub f_values: Vec<f64>,
    /// Index of the initial state.
    pub start: usize,
}

impl FiniteSignalSpec {
    /// Finite-difference surrogate of the generator `b ∂ + ½σ² ∂²` on the
    /// uniform grid `states`, reflecting at both ends.
    ///
    /// The drift uses central differences where they keep the rates
    /// non-negative and falls back to upwinding otherwise.
    pub fn from_model(model: &ModelSpec, states: Vec<f64>) -> Result<Self> {
        let m = states.len();
        if m < 2 {
            return Err(invalid("a finite surrogate needs at least two states"));
        }
        let dx = states[1] - states[0];
        if !(dx > 0.0) || states.windows(2).any(|w| ((w[1] - w[0]) - dx).abs() > 1e-9 * dx.abs()) {
            return Err(invalid("surrogate states must be a uniform increasing grid"));
        }
        let mut q = vec![vec![0.0; m]; m];
        for (i, &x) in states.iter().enumerate() {
            let b = model.b.value(x);
            let d = 0.5 * model.sigma.value(x).powi(2) / (dx * dx);
            let (mut up, mut down) = (d + b / (2.0 * dx), d - b / (2.0 * dx));
            if up < 0.0 || down < 0.0 {
                up = d + b.max(0.0) / dx;
                down = d + (-b).max(0.0) / dx;
            }
            if i + 1 < m {
                q[i][i + 1] = up;
            }
            if i > 0 {
                q[i][i - 1] = down;
            }
            q[i][i] = -(q[i].iter().sum::<f64>());
        }
        let start = nearest(&states, model.x0);
        let spec = Self {
            h_values: states.iter().map(|x| model.h.value(*x)).collect(),
            f_values: states.iter().map(|x| model.f.value(*x)).collect(),
            states,
            rate_matrix: q,
            start,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.states.len();
        if m == 0 || self.rate_matrix.len() != m || self.h_values.len() != m || self.f_values.len() != m {
            return Err(Error::Shape("finite signal arrays must all have one entry per state".into()));
        }
        if self.start >= m {
            return Err(invalid("start index out of range"));
        }
        for (i, row) in self.rate_matrix.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Shape("rate matrix must be square".into()));
            }
            if row.iter().enumerate().any(|(j, r)| j != i && *r < 0.0) {
                return Err(invalid(format!("negative off-diagonal rate in row {i}")));
            }
            let scale = row.iter().map(|r| r.abs()).sum::<f64>().max(1.0);
            if row.iter().sum::<f64>().abs() > 1e-12 * scale {
                return Err(invalid(format!("rate matrix row {i} does not sum to zero")));
            }
        }
        Ok(())
    }

    /// `expm(rate_matrix · dt)`.
    pub fn transition(&self, dt: f64) -> DMatrix<f64> {
        let m = self.states.len();
        DMatrix::from_fn(m, m, |i, j| self.rate_matrix[i][j] * dt).exp()
    }

    pub fn dynamics(&self, dt: f64) -> Result<ChainDynamics> {
        let p = self.transition(dt);
        let rows: Vec<Vec<f64>> = (0..p.nrows()).map(|i| p.row(i).iter().copied().collect()).collect();
        ChainDynamics::new(self.states.clone(), self.start, &rows)
    }
}

fn nearest(states: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, s) in states.iter().enumerate() {
        if (s - x).abs() < (states[best] - x).abs() {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteFilterPath {
    /// Unnormalized mass vector at each grid time.
    pub rho: Vec<Vec<f64>>,
    /// `Σ f_j ρ_j / Σ ρ_j`.
    pub u: Vec<f64>,
}

/// Exact discrete recursion for the unnormalized filter of the chain.
///
/// Each step weights by the likelihood of `ΔY_n` at the current state and then
/// applies the transition matrix, matching the particle filter's ordering.
pub fn finite_signal_filter(spec: &FiniteSignalSpec, y: &[f64], grid: &TimeGrid) -> Result<FiniteFilterPath> {
    spec.validate()?;
    if y.len() != grid.n_steps + 1 {
        return Err(Error::GridMismatch(format!(
            "observation path has {} points, grid has {}",
            y.len(),
            grid.n_steps + 1
        )));
    }
    let m = spec.states.len();
    let pt = spec.transition(grid.dt).transpose();
    let mut rho = nalgebra::DVector::zeros(m);
    rho[spec.start] = 1.0;
    let ratio = |r: &nalgebra::DVector<f64>| {
        let mass: f64 = r.iter().sum();
        r.iter().zip(&spec.f_values).map(|(p, f)| p * f).sum::<f64>() / mass
    };
    let mut out = FiniteFilterPath { rho: vec![rho.iter().copied().collect()], u: vec![ratio(&rho)] };
    for n in 0..grid.n_steps {
        let dy = y[n + 1] - y[n];
        if !dy.is_finite() {
            return Err(Error::Data { step: n });
        }
        for j in 0..m {
            let h = spec.h_values[j];
            rho[j] *= (h * dy - 0.5 * h * h * grid.dt).exp();
        }
        rho = &pt * rho;
        out.rho.push(rho.iter().copied().collect());
        out.u.push(ratio(&rho));
    }
    Ok(out)
}

/// A chain path and its observation path `Y_{n+1} = Y_n + h(S_n) dt + ΔB_n`.
pub fn simulate_chain(spec: &FiniteSignalSpec, grid: &TimeGrid, seed: u64, path_id: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let dynamics = spec.dynamics(grid.dt)?;
    let mut rng = StreamKey::new(seed, path_id, Role::SignalNoise).rng();
    let mut obs = StreamKey::new(seed, path_id, Role::ObservationNoise).rng();
    let sd = grid.dt.sqrt();
    let mut x = vec![dynamics.initial()];
    let mut y = vec![0.0];
    let mut idx = spec.start;
    for n in 0..grid.n_steps {
        let z: f64 = StandardNormal.sample(&mut obs);
        y.push(y[n] + spec.h_values[idx] * grid.dt + sd * z);
        let next = dynamics.advance(x[n], &PolicyInput::new(n, grid.times[n], x[n]), grid.dt, &mut rng)?;
        idx = nearest(&spec.states, next);
        x.push(next);
    }
    Ok((x, y))
}
