use crate::error::{invalid, Error, Result};
use crate::model::{Coefficient, ModelSpec, TimeGrid};

/// `dX = a X dt + σ dW`, `dY = c X dt + dB`, `X_0 = x0` known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGaussianSpec {
    pub a: f64,
    pub sigma: f64,
    pub c: f64,
    pub x0: f64,
    pub horizon: f64,
}

impl LinearGaussianSpec {
    pub fn new(a: f64, sigma: f64, c: f64, x0: f64, horizon: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !(horizon > 0.0) || ![a, c, x0].iter().all(|v| v.is_finite()) {
            return Err(invalid("linear-Gaussian spec needs σ ≥ 0, T > 0 and finite a, c, x0"));
        }
        Ok(Self { a, sigma, c, x0, horizon })
    }

    /// Reads `a`, `σ`, `c` off a model with `b = a·x`, constant `σ`, `h = c·x`.
    pub fn from_model(model: &ModelSpec) -> Result<Self> {
        let lin = |c: &Coefficient| match *c {
            Coefficient::Linear { slope, intercept } if intercept == 0.0 => Some(slope),
            Coefficient::Constant { value } if value == 0.0 => Some(0.0),
            _ => None,
        };
        let (a, c) = match (lin(&model.b), lin(&model.h)) {
            (Some(a), Some(c)) => (a, c),
            _ => return Err(invalid("model drift and sensor must be linear through the origin")),
        };
        let sigma = match model.sigma {
            Coefficient::Constant { value } => value,
            _ => return Err(invalid("model diffusion must be constant")),
        };
        Self::new(a, sigma, c, model.x0, model.horizon)
    }

    pub fn to_model(&self) -> Result<ModelSpec> {
        ModelSpec::linear_gaussian(self.a, self.sigma, self.c, self.x0, self.horizon)
    }

    fn rhs(&self, r: f64, phi: f64) -> (f64, f64) {
        let dr = 2.0 * self.a * r + self.sigma * self.sigma - self.c * self.c * r * r;
        (dr, (self.a - self.c * self.c * r) * phi)
    }

    /// One RK4 step of the Riccati equation jointly with the mean propagator.
    /// Returns `(R(t + dt), Φ(t, t + dt))`.
    fn propagate(&self, r: f64, dt: f64) -> (f64, f64) {
        let (k1r, k1p) = self.rhs(r, 1.0);
        let (k2r, k2p) = self.rhs(r + 0.5 * dt * k1r, 1.0 + 0.5 * dt * k1p);
        let (k3r, k3p) = self.rhs(r + 0.5 * dt * k2r, 1.0 + 0.5 * dt * k2p);
        let (k4r, k4p) = self.rhs(r + dt * k3r, 1.0 + dt * k3p);
        (
            r + dt / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r),
            1.0 + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
        )
    }
}

/// Online Kalman-Bucy filter: `dm = a m dt + c R (dY − c m dt)`.
#[derive(Debug, Clone)]
pub struct KalmanStepper {
    spec: LinearGaussianSpec,
    dt: f64,
    mean: f64,
    variance: f64,
}

impl KalmanStepper {
    pub fn new(spec: &LinearGaussianSpec, dt: f64) -> Self {
        Self { spec: *spec, dt, mean: spec.x0, variance: 0.0 }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn advance(&mut self, dy: f64) {
        let (r_next, phi) = self.spec.propagate(self.variance, self.dt);
        self.mean = phi * self.mean + self.spec.c * self.variance * dy;
        self.variance = r_next;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanPath {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

pub fn kalman_bucy(spec: &LinearGaussianSpec, y: &[f64], grid: &TimeGrid) -> Result<KalmanPath> {
    if y.len() != grid.n_steps + 1 {
        return Err(Error::GridMismatch(format!(
            "observation path has {} points, grid has {}",
            y.len(),
            grid.n_steps + 1
        )));
    }
    let mut k = KalmanStepper::new(spec, grid.dt);
    let mut mean = vec![k.mean()];
    let mut variance = vec![k.variance()];
    for n in 0..grid.n_steps {
        k.advance(y[n + 1] - y[n]);
        mean.push(k.mean());
        variance.push(k.variance());
    }
    Ok(KalmanPath { mean, variance })
}
