use crate::error::{invalid, Result};
use crate::minimax::{evaluate_cost, ControlRule, CostReport};
use crate::model::{DriftPolicy, ModelSpec, PiecewiseTable, TimeGrid};

/// Largest cost over a finite policy family.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSup {
    pub j_worst: f64,
    pub se: f64,
    pub argmax: usize,
    pub reports: Vec<CostReport>,
}

/// Exhaustive maximum of `evaluate_cost` over `family`, all members sharing `seed`.
pub fn grid_sup_cost(
    model: &ModelSpec,
    rule: &ControlRule,
    family: &[DriftPolicy],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<GridSup> {
    if family.is_empty() {
        return Err(invalid("policy family is empty"));
    }
    let reports = family
        .iter()
        .map(|p| evaluate_cost(model, rule, p, grid, n_paths, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut argmax = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.j > reports[argmax].j {
            argmax = i;
        }
    }
    Ok(GridSup { j_worst: reports[argmax].j, se: reports[argmax].se, argmax, reports })
}

fn sign_patterns(n_buckets: usize) -> Result<Vec<Vec<f64>>> {
    if n_buckets == 0 || n_buckets > 8 {
        return Err(invalid("sign pattern families need between 1 and 8 time buckets"));
    }
    Ok((0..3usize.pow(n_buckets as u32))
        .map(|code| {
            let mut c = code;
            (0..n_buckets)
                .map(|_| {
                    let v = [-1.0, 0.0, 1.0][c % 3];
                    c /= 3;
                    v
                })
                .collect()
        })
        .collect())
}

/// All `3^n_buckets` policies constant on equal time buckets with values in `{−k, 0, k}`.
pub fn sign_pattern_family(k: f64, horizon: f64, n_buckets: usize) -> Result<Vec<DriftPolicy>> {
    sign_patterns(n_buckets)?
        .into_iter()
        .map(|s| DriftPolicy::table(k, PiecewiseTable::in_time(horizon, s.into_iter().map(|v| v * k).collect())?))
        .collect()
}

/// All `3^n_buckets` feedback policies `θ = k · s_j · sgn(f(x) − u)` with
/// `s_j ∈ {−1, 0, 1}` on equal time buckets.
///
/// Each member takes values in `{−k, 0, k}`; `s_j = 1` drives the signal
/// away from the current estimate.
pub fn feedback_sign_family(model: &ModelSpec, horizon: f64, n_buckets: usize) -> Result<Vec<DriftPolicy>> {
    sign_patterns(n_buckets)?
        .into_iter()
        .map(|s| DriftPolicy::error_sign(model.k, PiecewiseTable::in_time(horizon, s)?, model.f))
        .collect()
}
