use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::{check_u, states_at};
use crate::error::{invalid, Error, Result};
use crate::model::{Measure, ModelSpec, PathBundle, PathMatrix, TimeGrid};
use crate::regression::{Design, RegressionBasis, RegressionSeries, State, StepFit};

/// Which drift to use in the backward equation for `P`.
///
/// With `e = f − u`, all three share the `p` driver `h q + ½ e²` and differ in
/// the `P` driver:
///
/// ```text
/// Printed     (b′ + σ′θ) P + σ′Q − h′M (q + h p) + f′M e
/// Rewritten   (b′ − σ′θ) P + σ′Q − h′M q − h′h p + f′M e
/// Consistent  (b′ + σ′θ) P + σ′Q + h′M q         + f′M e
/// ```
///
/// `Consistent` is the driver for which `p M¹ + P X¹` has drift
/// `σ P v − ½ e² M¹ − e f′ M X¹` when `dM¹ = (h M¹ + h′ M X¹) dY`, the
/// derivative of `dM = h M dY` along a perturbation of the signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AdjointVariant {
    #[default]
    Printed,
    Rewritten,
    Consistent,
}

impl AdjointVariant {
    pub const ALL: [AdjointVariant; 3] = [AdjointVariant::Printed, AdjointVariant::Rewritten, AdjointVariant::Consistent];

    pub fn name(&self) -> &'static str {
        match self {
            AdjointVariant::Printed => "printed",
            AdjointVariant::Rewritten => "rewritten",
            AdjointVariant::Consistent => "consistent",
        }
    }
}

impl fmt::Display for AdjointVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdjointVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| invalid(format!("unknown adjoint variant `{s}` (expected printed, rewritten or consistent)")))
    }
}

/// Regression tables for the adjoint pair of `M` (`p`, `q`) and of `X` (`P`, `Q`).
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointSolution {
    pub p: Arc<RegressionSeries>,
    pub q: Arc<RegressionSeries>,
    pub big_p: Arc<RegressionSeries>,
    pub big_q: Arc<RegressionSeries>,
    pub grid: TimeGrid,
    pub variant: AdjointVariant,
}

impl AdjointSolution {
    pub fn p_at(&self, step: usize, s: &State) -> f64 {
        self.big_p.eval(step, s)
    }
}

/// Explicit backward scheme for the adjoint equations on `Q̃` paths.
///
/// The drift `θ` is read from `paths.theta`.
///
/// `q` and `Q` come from regressing the centred realized values against the
/// `Y` and `W̃` increments; `p` and `P` inside the drivers are the regressed
/// conditional means of the next-step values.
pub fn solve_adjoint(
    paths: &PathBundle,
    u: &PathMatrix,
    model: &ModelSpec,
    basis: &RegressionBasis,
    variant: AdjointVariant,
) -> Result<AdjointSolution> {
    if paths.measure != Measure::QTilde {
        return Err(invalid("the adjoint equations are solved on reference-measure paths"));
    }
    model.require_h1("solve_adjoint")?;
    let n = paths.n_paths();
    let grid = &paths.grid;
    check_u(u, n, grid)?;
    basis.check_paths(n)?;
    let dt = grid.dt;
    let (mut p, mut bp) = (vec![0.0; n], vec![0.0; n]);
    let zero = || vec![StepFit::zero(); grid.n_steps + 1];
    let (mut p_steps, mut q_steps, mut bp_steps, mut bq_steps) = (zero(), zero(), zero(), zero());
    for step in (0..grid.n_steps).rev() {
        let states = states_at(paths, u, step);
        let design = Design::build(basis, &states, step)?;
        let cp = design.predict(&design.fit(&p));
        let cbp = design.predict(&design.fit(&bp));
        let tq: Vec<f64> = (0..n).map(|i| (p[i] - cp[i]) * paths.db.get(i, step) / dt).collect();
        let tbq: Vec<f64> = (0..n).map(|i| (bp[i] - cbp[i]) * paths.dw.get(i, step) / dt).collect();
        q_steps[step] = design.fit(&tq);
        bq_steps[step] = design.fit(&tbq);
        let q = design.predict(&q_steps[step]);
        let bq = design.predict(&bq_steps[step]);
        for i in 0..n {
            let x = paths.x.get(i, step);
            let m = paths.m.get(i, step);
            let th = paths.theta.get(i, step);
            let e = model.f.value(x) - u.get(i, step);
            let (h, h1) = (model.h.value(x), model.h.d1(x));
            let (b1, s1) = (model.b.d1(x), model.sigma.d1(x));
            let common = s1 * bq[i] + model.f.d1(x) * m * e;
            let drive_p = match variant {
                AdjointVariant::Printed => (b1 + s1 * th) * cbp[i] - h1 * m * (q[i] + h * cp[i]),
                AdjointVariant::Rewritten => (b1 - s1 * th) * cbp[i] - h1 * m * q[i] - h1 * h * cp[i],
                AdjointVariant::Consistent => (b1 + s1 * th) * cbp[i] + h1 * m * q[i],
            } + common;
            p[i] += (h * q[i] + 0.5 * e * e) * dt;
            bp[i] += drive_p * dt;
        }
        p_steps[step] = design.fit(&p);
        bp_steps[step] = design.fit(&bp);
    }
    let series = |steps| Arc::new(RegressionSeries { features: basis.features.clone(), steps });
    Ok(AdjointSolution {
        p: series(p_steps),
        q: series(q_steps),
        big_p: series(bp_steps),
        big_q: series(bq_steps),
        grid: grid.clone(),
        variant,
    })
}
