use super::check_u;
use crate::error::{invalid, Error, Result};
use crate::model::{weight_factor, DriftPolicy, Measure, ModelSpec, PathBundle, PathMatrix, PolicyInput};
use crate::stats::MeanSe;

use super::AdjointSolution;
use crate::regression::State;

/// How the derivative of the weight `M` is propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum VariationalForm {
    /// Exact derivative of the discrete scheme:
    /// `M¹_{n+1} = e_n (M¹_n + M_n X¹_n (h′ ΔY − h h′ dt))`, the discrete
    /// counterpart of `dM¹ = (h M¹ + h′ M X¹) dY`.
    #[default]
    Tangent,
    /// Euler step of `dM¹ = −h′h M X¹ dt + (h M¹ − h′ M X¹) dY`.
    Printed,
}

/// First-order response of `(X, M)` to a perturbation `θ + εv`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalPaths {
    pub x1: PathMatrix,
    pub m1: PathMatrix,
}

/// `v` evaluated along the stored paths (open loop).
fn direction_values(v: &DriftPolicy, paths: &PathBundle) -> Result<PathMatrix> {
    let n = paths.n_paths();
    let g = &paths.grid;
    let mut out = PathMatrix::zeros(n, g.n_steps);
    for i in 0..n {
        for step in 0..g.n_steps {
            let input = PolicyInput {
                step,
                t: g.times[step],
                x: paths.x.get(i, step),
                m: Some(paths.m.get(i, step)),
                u: paths.u.as_ref().map(|u| u.get(i, step)),
            };
            out.set(i, step, v.eval(&input)?);
        }
    }
    Ok(out)
}

fn require_q_tilde(paths: &PathBundle) -> Result<()> {
    if paths.measure != Measure::QTilde {
        return Err(invalid("expected reference-measure paths"));
    }
    Ok(())
}

/// Forward solve of the linearized signal and weight along `paths`.
pub fn solve_variational(
    model: &ModelSpec,
    v: &DriftPolicy,
    paths: &PathBundle,
    form: VariationalForm,
) -> Result<VariationalPaths> {
    require_q_tilde(paths)?;
    let vv = direction_values(v, paths)?;
    let n = paths.n_paths();
    let g = &paths.grid;
    let dt = g.dt;
    let mut x1 = PathMatrix::zeros(n, g.n_steps + 1);
    let mut m1 = PathMatrix::zeros(n, g.n_steps + 1);
    for i in 0..n {
        let (mut a, mut b) = (0.0, 0.0);
        for step in 0..g.n_steps {
            let x = paths.x.get(i, step);
            let m = paths.m.get(i, step);
            let th = paths.theta.get(i, step);
            let dy = paths.db.get(i, step);
            let (h, h1) = (model.h.value(x), model.h.d1(x));
            let s1 = model.sigma.d1(x);
            b = match form {
                VariationalForm::Tangent => weight_factor(h, dy, dt) * (b + m * a * (h1 * dy - h * h1 * dt)),
                VariationalForm::Printed => b - h1 * h * m * a * dt + (h * b - h1 * m * a) * dy,
            };
            a += ((model.b.d1(x) + s1 * th) * a + model.sigma.value(x) * vv.get(i, step)) * dt
                + s1 * a * paths.dw.get(i, step);
            x1.set(i, step + 1, a);
            m1.set(i, step + 1, b);
        }
    }
    Ok(VariationalPaths { x1, m1 })
}

/// Directional derivative of `J(θ) = −½ Ẽ ∫ |f(X) − u|² M dt` with an error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GateauxEstimate {
    pub value: f64,
    pub se: f64,
    /// Per-path contributions, in path order.
    pub samples: Vec<f64>,
}

impl GateauxEstimate {
    fn from_samples(samples: Vec<f64>) -> Self {
        let s = MeanSe::of(samples.iter().copied());
        Self { value: s.mean, se: s.se, samples }
    }

    /// Standard error of the path-by-path difference with another estimate on the same paths.
    pub fn paired_se(&self, other: &GateauxEstimate) -> Option<f64> {
        if self.samples.len() != other.samples.len() {
            return None;
        }
        Some(MeanSe::of(self.samples.iter().zip(&other.samples).map(|(a, b)| a - b)).se)
    }
}

/// `Ẽ ∫ (l_x X¹ + l_m M¹) dt` with `l_x = −f′ M e`, `l_m = −½ e²`.
pub fn gateaux_variational(model: &ModelSpec, paths: &PathBundle, var: &VariationalPaths) -> Result<GateauxEstimate> {
    let u = paths.u.as_ref().ok_or_else(|| invalid("paths carry no control values"))?;
    let g = &paths.grid;
    let per_path = (0..paths.n_paths()).map(|i| {
        (0..g.n_steps)
            .map(|n| {
                let x = paths.x.get(i, n);
                let e = model.f.value(x) - u.get(i, n);
                (-model.f.d1(x) * paths.m.get(i, n) * e * var.x1.get(i, n) - 0.5 * e * e * var.m1.get(i, n)) * g.dt
            })
            .sum::<f64>()
    });
    Ok(GateauxEstimate::from_samples(per_path.collect()))
}

/// `−Ẽ ∫ σ(X) P v dt` from the adjoint tables, evaluated on the paths it was solved on.
pub fn gateaux_adjoint(
    adjoint: &AdjointSolution,
    paths: &PathBundle,
    model: &ModelSpec,
    v: &DriftPolicy,
) -> Result<GateauxEstimate> {
    require_q_tilde(paths)?;
    adjoint.grid.check_same(&paths.grid)?;
    let u = paths.u.as_ref().ok_or_else(|| invalid("paths carry no control values"))?;
    let vv = direction_values(v, paths)?;
    let g = &paths.grid;
    let per_path = (0..paths.n_paths()).map(|i| {
        -(0..g.n_steps)
            .map(|n| {
                let x = paths.x.get(i, n);
                let s = State { x, m: paths.m.get(i, n), u: u.get(i, n) };
                model.sigma.value(x) * adjoint.p_at(n, &s) * vv.get(i, n) * g.dt
            })
            .sum::<f64>()
    });
    Ok(GateauxEstimate::from_samples(per_path.collect()))
}

/// Per-path `J` contributions `−½ ∫ |f(X) − u|² M dt` after re-simulating
/// `(X, M)` with the drift `clamp(θ + εv)` on the noise of `paths`.
fn perturbed_costs(model: &ModelSpec, paths: &PathBundle, u: &PathMatrix, vv: &PathMatrix, eps: f64) -> Vec<f64> {
    let g = &paths.grid;
    let k = model.k;
    (0..paths.n_paths())
        .map(|i| {
            let (mut x, mut m, mut j) = (model.x0, 1.0, 0.0);
            for n in 0..g.n_steps {
                let e = model.f.value(x) - u.get(i, n);
                j -= 0.5 * e * e * m * g.dt;
                let th = (paths.theta.get(i, n) + eps * vv.get(i, n)).clamp(-k, k);
                let hx = model.h.value(x);
                m *= weight_factor(hx, paths.db.get(i, n), g.dt);
                let s = model.sigma.value(x);
                x += (model.b.value(x) + s * th) * g.dt + s * paths.dw.get(i, n);
            }
            j
        })
        .collect()
}

/// Central finite differences of `J(θ + εv)` on common noise, Richardson
/// extrapolated over the last two rungs of the strictly descending `epsilons`.
///
/// The control `u` is a function of `Y` alone, which does not move under
/// `Q̃`, so it stays at its base values.
pub fn gateaux_fd(model: &ModelSpec, v: &DriftPolicy, paths: &PathBundle, epsilons: &[f64]) -> Result<GateauxEstimate> {
    require_q_tilde(paths)?;
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) || epsilons.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(invalid("epsilon ladder must be positive and strictly descending"));
    }
    let u = paths.u.as_ref().ok_or_else(|| invalid("paths carry no control values"))?;
    check_u(u, paths.n_paths(), &paths.grid)?;
    let vv = direction_values(v, paths)?;
    let slopes: Vec<Vec<f64>> = epsilons
        .iter()
        .map(|&e| {
            let up = perturbed_costs(model, paths, u, &vv, e);
            let down = perturbed_costs(model, paths, u, &vv, -e);
            up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * e)).collect()
        })
        .collect();
    let last = slopes.len() - 1;
    let per_path: Vec<f64> = if last == 0 {
        slopes[0].clone()
    } else {
        // central differences have an O(ε²) leading error
        let r2 = (epsilons[last - 1] / epsilons[last]).powi(2);
        slopes[last].iter().zip(&slopes[last - 1]).map(|(fine, coarse)| (r2 * fine - coarse) / (r2 - 1.0)).collect()
    };
    if per_path.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data { step: 0 });
    }
    Ok(GateauxEstimate::from_samples(per_path))
}
