//! Least-squares Monte Carlo for the backward equations: the worst-case
//! value process, the adjoint system of the drift-control problem, and the
//! directional derivatives used to cross-check them.

mod adjoint;
mod variational;
mod worst;

pub use adjoint::{solve_adjoint, AdjointSolution, AdjointVariant};
pub use variational::{
    gateaux_adjoint, gateaux_fd, gateaux_variational, solve_variational, GateauxEstimate, VariationalForm,
    VariationalPaths,
};
pub use worst::{solve_worst_value, BsdeSolution};

use crate::error::{Error, Result};
use crate::minimax::{control_paths, ControlRule};
use crate::model::{sample_noise, simulate_q_tilde, DriftPolicy, ModelSpec, PathBundle, PathMatrix, TimeGrid};
use crate::regression::State;

fn check_u(u: &PathMatrix, n_paths: usize, grid: &TimeGrid) -> Result<()> {
    if u.n_rows() != n_paths || u.n_cols() != grid.n_steps + 1 {
        return Err(Error::Shape(format!(
            "control values: expected {n_paths}×{}, got {}×{}",
            grid.n_steps + 1,
            u.n_rows(),
            u.n_cols()
        )));
    }
    Ok(())
}

fn states_at(paths: &PathBundle, u: &PathMatrix, step: usize) -> Vec<State> {
    (0..paths.n_paths())
        .map(|i| State { x: paths.x.get(i, step), m: paths.m.get(i, step), u: u.get(i, step) })
        .collect()
}

/// `Q̃` paths for `policy` together with the control `rule` run on their observations.
///
/// `Y` is drawn first as a free Brownian motion; the control is computed from
/// it and then the signal and weight are stepped with `θ` reading `(x, m, u)`.
pub fn simulate_reference(
    model: &ModelSpec,
    policy: &DriftPolicy,
    rule: &ControlRule,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathBundle> {
    let noise = sample_noise(grid, n_paths, seed)?;
    let y = PathMatrix::from_rows(
        (0..n_paths)
            .map(|i| {
                let mut acc = 0.0;
                std::iter::once(0.0)
                    .chain(noise.db.row(i).iter().map(|d| {
                        acc += d;
                        acc
                    }))
                    .collect()
            })
            .collect(),
    )?;
    let u = control_paths(rule, model, &y, grid, seed, &noise.path_ids)?;
    simulate_q_tilde(model, policy, &noise, grid, Some(&u))
}
