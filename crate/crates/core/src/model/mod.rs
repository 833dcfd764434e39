//! The filtering model with drift ambiguity and its forward simulation.
//!
//! Under the base measure `P` the signal and observation follow
//!
//! ```text
//! dX = b(X) dt + σ(X) dW,   X_0 = x0
//! dY = h(X) dt + dB,        Y_0 = 0
//! ```
//!
//! and each admissible drift perturbation `θ` with `|θ| ≤ k` selects a
//! measure `Q` under which `X` picks up the extra drift `σ(X)·θ`. The
//! reference measure `Q̃` turns `Y` into a Brownian motion independent of the
//! signal noise, with the likelihood weight `M` carrying the coupling.

mod coeff;
mod generator;
mod noise;
mod policy;
mod simulate;

pub use coeff::Coefficient;
pub use generator::{apply_generator, TestFunction};
pub use noise::{path_increments, sample_noise, NoiseBundle};
pub use policy::{DriftPolicy, PiecewiseTable, PolicyInput, PolicyKind};
pub(crate) use policy::hex16;
pub use simulate::{
    evolve_observation, evolve_signal, evolve_weight, girsanov_log_density, simulate_p,
    simulate_q_tilde, weight_factor, PathBundle, PathFeatures,
};

use crate::error::{invalid, Error, Result};

/// Which probability measure a path bundle was simulated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    /// Base measure, `θ ≡ 0`.
    P,
    /// A `θ`-perturbed measure from the ambiguity set.
    Q,
    /// Reference measure where `Y` is a free Brownian motion.
    QTilde,
}

impl Measure {
    pub fn tag(&self) -> &'static str {
        match self {
            Measure::P => "P",
            Measure::Q => "Q",
            Measure::QTilde => "Q_tilde",
        }
    }
}

/// Coefficients, initial state, horizon and ambiguity radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub b: Coefficient,
    pub sigma: Coefficient,
    pub h: Coefficient,
    pub f: Coefficient,
    pub x0: f64,
    pub horizon: f64,
    pub k: f64,
}

impl ModelSpec {
    pub fn new(
        b: Coefficient,
        sigma: Coefficient,
        h: Coefficient,
        f: Coefficient,
        x0: f64,
        horizon: f64,
        k: f64,
    ) -> Result<Self> {
        let spec = Self { b, sigma, h, f, x0, horizon, k };
        spec.validate()?;
        Ok(spec)
    }

    /// `b = 0.2·tanh`, `σ = 0.5`, `h = f = tanh`, `x0 = 0.5`, `T = 1`.
    pub fn tanh_benchmark(k: f64) -> Self {
        Self::new(
            Coefficient::tanh(0.2, 1.0),
            Coefficient::constant(0.5),
            Coefficient::tanh(1.0, 1.0),
            Coefficient::tanh(1.0, 1.0),
            0.5,
            1.0,
            k,
        )
        .expect("benchmark preset is valid")
    }

    /// Linear-Gaussian model `b = a·x`, `h = c·x`, `f = x`, with `k = 0`.
    ///
    /// Unbounded `h` and `f` make it oracle-only: usable for filtering and
    /// cost evaluation against the Kalman-Bucy filter, rejected by the
    /// ambiguity solvers.
    pub fn linear_gaussian(a: f64, sigma: f64, c: f64, x0: f64, horizon: f64) -> Result<Self> {
        Self::new(
            Coefficient::linear(a, 0.0),
            Coefficient::constant(sigma),
            Coefficient::linear(c, 0.0),
            Coefficient::identity(),
            x0,
            horizon,
            0.0,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(invalid(format!("ambiguity radius k must be non-negative, got {}", self.k)));
        }
        if !self.x0.is_finite() {
            return Err(invalid("x0 must be finite"));
        }
        // σ ≥ 0 is checked on a fixed sample of points around x0.
        for i in 0..=400 {
            let x = self.x0 - 20.0 + 0.1 * i as f64;
            if self.sigma.value(x) < 0.0 {
                return Err(invalid(format!(
                    "diffusion coefficient {} is negative at x = {x:.2}",
                    self.sigma
                )));
            }
        }
        Ok(())
    }

    /// Bounded `f` and `h` with bounded derivatives of all four coefficients.
    pub fn is_h1_compliant(&self) -> bool {
        self.f.sup_abs().is_some()
            && self.h.sup_abs().is_some()
            && [self.b, self.sigma, self.h, self.f].iter().all(|c| c.has_bounded_derivative())
    }

    pub fn is_oracle_only(&self) -> bool {
        !self.is_h1_compliant()
    }

    pub fn require_h1(&self, operation: &str) -> Result<()> {
        if self.is_h1_compliant() {
            Ok(())
        } else {
            Err(invalid(format!(
                "{operation} needs bounded f and h; the model uses oracle-only presets (h = {}, f = {})",
                self.h, self.f
            )))
        }
    }

    /// `‖f‖∞` when `f` is bounded.
    pub fn f_sup(&self) -> Option<f64> {
        self.f.sup_abs()
    }

    pub fn with_k(&self, k: f64) -> Result<Self> {
        let mut m = self.clone();
        m.k = k;
        m.validate()?;
        Ok(m)
    }
}

/// Uniform discretization of `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub n_steps: usize,
    pub dt: f64,
    pub times: Vec<f64>,
}

impl TimeGrid {
    pub fn horizon(&self) -> f64 {
        self.times[self.n_steps]
    }

    pub fn check_same(&self, other: &TimeGrid) -> Result<()> {
        if self.n_steps != other.n_steps || self.dt != other.dt {
            return Err(Error::GridMismatch(format!(
                "{} steps of {} vs {} steps of {}",
                self.n_steps, self.dt, other.n_steps, other.dt
            )));
        }
        Ok(())
    }
}

pub fn build_time_grid(horizon: f64, n_steps: usize) -> Result<TimeGrid> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    if n_steps == 0 {
        return Err(invalid("n_steps must be at least 1"));
    }
    let n = n_steps as f64;
    let times = (0..=n_steps).map(|i| horizon * (i as f64) / n).collect();
    Ok(TimeGrid { n_steps, dt: horizon / n, times })
}

/// Row-major `n_paths × n_cols` matrix of path values.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl PathMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, data: vec![0.0; n_rows * n_cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Self { n_rows, n_cols, data: rows.into_iter().flatten().collect() })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.n_cols + col] = v;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn check_shape(&self, n_rows: usize, n_cols: usize, what: &str) -> Result<()> {
        if self.n_rows != n_rows || self.n_cols != n_cols {
            return Err(Error::Shape(format!(
                "{what}: expected {n_rows}×{n_cols}, got {}×{}",
                self.n_rows, self.n_cols
            )));
        }
        Ok(())
    }
}
