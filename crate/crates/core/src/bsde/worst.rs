use std::sync::Arc;

use super::{check_u, states_at};
use crate::error::{invalid, Result};
use crate::model::{DriftPolicy, Measure, ModelSpec, PathBundle, PathMatrix, TimeGrid};
use crate::regression::{Design, RegressionBasis, RegressionSeries, StepFit};
use crate::stats::MeanSe;

/// Regression tables of the worst-case value process and its integrands.
#[derive(Debug, Clone, PartialEq)]
pub struct BsdeSolution {
    pub y0: f64,
    /// Standard error of `y0` across paths.
    pub y0_se: f64,
    pub y: Arc<RegressionSeries>,
    pub z: Arc<RegressionSeries>,
    pub z_tilde: Arc<RegressionSeries>,
    pub grid: TimeGrid,
    pub k: f64,
}

impl BsdeSolution {
    /// `θ = k·sgn(z)`, the drift attaining the driver's maximum.
    pub fn worst_policy(&self) -> Result<DriftPolicy> {
        if self.k == 0.0 || self.z.is_identically_zero() {
            return Ok(DriftPolicy::zero());
        }
        DriftPolicy::sign_of_regression(self.k, self.z.clone())
    }
}

/// Backward least-squares scheme for `−dy = (|f(X) − u|² + k|z|) dt − z dW − z̃ dB`, `y_T = 0`.
///
/// Each step regresses the realized `y_{n+1}` on the step-`n` features, then
/// estimates `z` and `z̃` by regressing `(y_{n+1} − E[y_{n+1} | F_n]) ΔW / dt`
/// and the same with `ΔB`. The realized value is updated with the driver
/// evaluated at the fitted `z`, so with `k = 0` the initial value is exactly
/// the plain Monte Carlo mean of the integrated squared error.
pub fn solve_worst_value(
    paths: &PathBundle,
    u: &PathMatrix,
    model: &ModelSpec,
    basis: &RegressionBasis,
) -> Result<BsdeSolution> {
    if paths.measure != Measure::P {
        return Err(invalid("the worst-value equation is solved on base-measure paths"));
    }
    let n = paths.n_paths();
    let grid = &paths.grid;
    check_u(u, n, grid)?;
    basis.check_paths(n)?;
    let dt = grid.dt;
    let mut y = vec![0.0; n];
    let mut y_steps = vec![StepFit::zero(); grid.n_steps + 1];
    let mut z_steps = vec![StepFit::zero(); grid.n_steps + 1];
    let mut zt_steps = vec![StepFit::zero(); grid.n_steps + 1];
    let mut resid = vec![0.0; n];
    for step in (0..grid.n_steps).rev() {
        let states = states_at(paths, u, step);
        let design = Design::build(basis, &states, step)?;
        let cond = design.predict(&design.fit(&y));
        for i in 0..n {
            resid[i] = y[i] - cond[i];
        }
        let target: Vec<f64> = (0..n).map(|i| resid[i] * paths.dw.get(i, step) / dt).collect();
        let z_fit = design.fit(&target);
        let z = design.predict(&z_fit);
        let target: Vec<f64> = (0..n).map(|i| resid[i] * paths.db.get(i, step) / dt).collect();
        zt_steps[step] = design.fit(&target);
        z_steps[step] = z_fit;
        for i in 0..n {
            let e = model.f.value(paths.x.get(i, step)) - u.get(i, step);
            y[i] += (e * e + model.k * z[i].abs()) * dt;
        }
        y_steps[step] = design.fit(&y);
    }
    let s = MeanSe::of(y.iter().copied());
    let series = |steps| Arc::new(RegressionSeries { features: basis.features.clone(), steps });
    Ok(BsdeSolution {
        y0: s.mean,
        y0_se: s.se,
        y: series(y_steps),
        z: series(z_steps),
        z_tilde: series(zt_steps),
        grid: grid.clone(),
        k: model.k,
    })
}
