use rand::Rng;

use super::{evaluate_cost, ControlRule, CostReport};
use crate::error::{invalid, Result};
use crate::model::{DriftPolicy, ModelSpec, PiecewiseTable, TimeGrid};
use crate::rng::{Role, StreamKey};

/// Grid estimates of `min_u sup_θ J` and `sup_θ min_u J`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxGap {
    pub min_sup: f64,
    /// Standard error of the cell attaining `min_sup`.
    pub min_sup_se: f64,
    pub sup_min: f64,
    pub sup_min_se: f64,
    pub gap: f64,
    /// `cells[c][t]` is the cost of control `c` under policy `t`.
    pub cells: Vec<Vec<CostReport>>,
}

/// Evaluates every (control, policy) pair on common random numbers.
pub fn minimax_gap(
    model: &ModelSpec,
    controls: &[ControlRule],
    thetas: &[DriftPolicy],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<MinimaxGap> {
    if controls.is_empty() || thetas.is_empty() {
        return Err(invalid("control and policy grids must be nonempty"));
    }
    let cells = controls
        .iter()
        .map(|c| thetas.iter().map(|t| evaluate_cost(model, c, t, grid, n_paths, seed)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let argmax_t = |row: &Vec<CostReport>| (0..row.len()).fold(0, |b, t| if row[t].j > row[b].j { t } else { b });
    let mut best = (0, argmax_t(&cells[0]));
    for c in 1..cells.len() {
        let t = argmax_t(&cells[c]);
        if cells[c][t].j < cells[best.0][best.1].j {
            best = (c, t);
        }
    }
    let argmin_c = |t: usize| (0..cells.len()).fold(0, |b, c| if cells[c][t].j < cells[b][t].j { c } else { b });
    let mut low = (argmin_c(0), 0);
    for t in 1..thetas.len() {
        let c = argmin_c(t);
        if cells[c][t].j > cells[low.0][low.1].j {
            low = (c, t);
        }
    }
    let min_sup = cells[best.0][best.1].j;
    let sup_min = cells[low.0][low.1].j;
    Ok(MinimaxGap {
        min_sup,
        min_sup_se: cells[best.0][best.1].se,
        sup_min,
        sup_min_se: cells[low.0][low.1].se,
        gap: min_sup - sup_min,
        cells,
    })
}

/// `n` policies constant on `n_buckets` equal time buckets, values uniform in `[−k, k]`.
pub fn random_time_policies(k: f64, horizon: f64, n_buckets: usize, n: usize, seed: u64) -> Result<Vec<DriftPolicy>> {
    let mut rng = StreamKey::new(seed, 0, Role::Probe).rng();
    (0..n)
        .map(|_| {
            let values = (0..n_buckets).map(|_| k * (2.0 * rng.random::<f64>() - 1.0)).collect();
            DriftPolicy::table(k, PiecewiseTable::in_time(horizon, values)?)
        })
        .collect()
}

/// One saddle-point probe.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleProbe {
    /// `"center"`, `"theta"` or `"control"`.
    pub kind: &'static str,
    pub id: usize,
    /// Policy or control offset that was probed.
    pub label: String,
    pub report: CostReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleCheck {
    pub center: CostReport,
    pub probes: Vec<SaddleProbe>,
}

impl SaddleCheck {
    /// `J(u*, θ) ≤ J(u*, θ*) + z·SE` and `J(u*, θ*) ≤ J(v, θ*) + z·SE` for every probe,
    /// with the larger of the two standard errors.
    pub fn violations(&self, z: f64) -> Vec<&SaddleProbe> {
        self.probes
            .iter()
            .filter(|p| {
                let se = p.report.se.max(self.center.se);
                match p.kind {
                    "theta" => p.report.j > self.center.j + z * se,
                    _ => self.center.j > p.report.j + z * se,
                }
            })
            .collect()
    }
}

/// Costs at `(u*, θ*)`, at `(u*, θ)` for each probe policy and at
/// `(clamp(u* + δ), θ*)` for each offset, on common random numbers.
#[allow(clippy::too_many_arguments)]
pub fn saddle_probes(
    model: &ModelSpec,
    rule: &ControlRule,
    theta_star: &DriftPolicy,
    probe_policies: &[DriftPolicy],
    offsets: &[f64],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<SaddleCheck> {
    let center = evaluate_cost(model, rule, theta_star, grid, n_paths, seed)?;
    let mut probes = Vec::new();
    for (id, p) in probe_policies.iter().enumerate() {
        let report = evaluate_cost(model, rule, p, grid, n_paths, seed)?;
        probes.push(SaddleProbe { kind: "theta", id, label: p.digest(), report });
    }
    for (id, d) in offsets.iter().enumerate() {
        let report = evaluate_cost(model, &rule.with_offset(*d), theta_star, grid, n_paths, seed)?;
        probes.push(SaddleProbe { kind: "control", id, label: format!("{d}"), report });
    }
    Ok(SaddleCheck { center, probes })
}
