//! Feedback rules for the drift perturbation `θ`.
//!
//! Every evaluation is clamped to `[-radius, radius]`, so a policy can never
//! leave the ambiguity set it was built for.

use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::Coefficient;
use crate::error::{invalid, Error, Result};
use crate::regression::{RegressionSeries, State, StateVar};
use crate::stats::sign;

/// What a policy may look at: grid step, time, signal state, likelihood
/// weight and the current filter estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyInput {
    pub step: usize,
    pub t: f64,
    pub x: f64,
    pub m: Option<f64>,
    pub u: Option<f64>,
}

impl PolicyInput {
    pub fn new(step: usize, t: f64, x: f64) -> Self {
        Self { step, t, x, m: None, u: None }
    }

    pub fn with_m(mut self, m: f64) -> Self {
        self.m = Some(m);
        self
    }

    pub fn with_u(mut self, u: f64) -> Self {
        self.u = Some(u);
        self
    }
}

/// Values on a (time bucket × state bucket) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseTable {
    horizon: f64,
    time_buckets: usize,
    state_edges: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseTable {
    /// `values` is row-major over time buckets; each row has
    /// `state_edges.len() + 1` entries.
    pub fn new(horizon: f64, time_buckets: usize, state_edges: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0) || time_buckets == 0 {
            return Err(invalid("table needs a positive horizon and at least one time bucket"));
        }
        if state_edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("state edges must be strictly increasing"));
        }
        if values.len() != time_buckets * (state_edges.len() + 1) {
            return Err(invalid(format!(
                "table expects {} values, got {}",
                time_buckets * (state_edges.len() + 1),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("table values must be finite"));
        }
        Ok(Self { horizon, time_buckets, state_edges, values })
    }

    /// Piecewise constant in time only.
    pub fn in_time(horizon: f64, values: Vec<f64>) -> Result<Self> {
        Self::new(horizon, values.len(), Vec::new(), values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn lookup(&self, t: f64, x: f64) -> f64 {
        let tb = ((t / self.horizon) * self.time_buckets as f64).floor();
        let tb = (tb.max(0.0) as usize).min(self.time_buckets - 1);
        let sb = self.state_edges.partition_point(|e| *e <= x);
        self.values[tb * (self.state_edges.len() + 1) + sb]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    Zero,
    Constant(f64),
    Table(PiecewiseTable),
    /// `θ = radius · Σ w_i · sgn(P_i(state))` over regressed surfaces `P_i`.
    /// A single term with unit weight is the plain bang-bang rule; several
    /// terms arise from damped fixed-point updates.
    SignOfRegression(Vec<(f64, Arc<RegressionSeries>)>),
    /// `θ = radius · s(t) · sgn(target(x) − u)`: pushes the signal away from
    /// (`s > 0`) or towards (`s < 0`) the current estimate, with the
    /// multiplier `s(t)` read from a time table.
    ErrorSign { multipliers: PiecewiseTable, target: Coefficient },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftPolicy {
    radius: f64,
    kind: PolicyKind,
}

impl DriftPolicy {
    pub fn new(radius: f64, kind: PolicyKind) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(invalid(format!("policy radius must be non-negative, got {radius}")));
        }
        if let PolicyKind::Constant(c) = kind {
            if !c.is_finite() {
                return Err(invalid("constant policy value must be finite"));
            }
        }
        if let PolicyKind::SignOfRegression(terms) = &kind {
            if terms.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
                return Err(invalid("sign-policy weights must be non-negative"));
            }
            if terms.iter().map(|(w, _)| w).sum::<f64>() > 1.0 + 1e-12 {
                return Err(invalid("sign-policy weights must sum to at most one"));
            }
        }
        Ok(Self { radius, kind })
    }

    pub fn zero() -> Self {
        Self { radius: 0.0, kind: PolicyKind::Zero }
    }

    pub fn constant(radius: f64, value: f64) -> Result<Self> {
        Self::new(radius, PolicyKind::Constant(value))
    }

    pub fn table(radius: f64, table: PiecewiseTable) -> Result<Self> {
        Self::new(radius, PolicyKind::Table(table))
    }

    pub fn error_sign(radius: f64, multipliers: PiecewiseTable, target: Coefficient) -> Result<Self> {
        Self::new(radius, PolicyKind::ErrorSign { multipliers, target })
    }

    pub fn sign_of_regression(radius: f64, surface: Arc<RegressionSeries>) -> Result<Self> {
        Self::new(radius, PolicyKind::SignOfRegression(vec![(1.0, surface)]))
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PolicyKind::Zero) || self.radius == 0.0
    }

    fn needs(&self, var: StateVar) -> bool {
        match &self.kind {
            PolicyKind::ErrorSign { .. } => var == StateVar::U,
            PolicyKind::SignOfRegression(terms) => terms.iter().any(|(_, s)| s.features.uses(var)),
            _ => false,
        }
    }

    pub fn needs_m(&self) -> bool {
        self.needs(StateVar::M)
    }

    pub fn needs_u(&self) -> bool {
        self.needs(StateVar::U)
    }

    /// True when the value depends on the signal state `x` (directly or
    /// through a regression surface).
    pub fn depends_on_state(&self) -> bool {
        match &self.kind {
            PolicyKind::Zero | PolicyKind::Constant(_) => false,
            PolicyKind::Table(t) => !t.state_edges.is_empty(),
            PolicyKind::SignOfRegression(_) | PolicyKind::ErrorSign { .. } => true,
        }
    }

    #[inline]
    pub fn eval(&self, input: &PolicyInput) -> Result<f64> {
        let raw = match &self.kind {
            PolicyKind::Zero => return Ok(0.0),
            PolicyKind::Constant(c) => *c,
            PolicyKind::Table(t) => t.lookup(input.t, input.x),
            PolicyKind::SignOfRegression(terms) => {
                let mut state = State { x: input.x, m: 1.0, u: 0.0 };
                if self.needs_m() {
                    state.m = input.m.ok_or(Error::MissingFeature("m"))?;
                }
                if self.needs_u() {
                    state.u = input.u.ok_or(Error::MissingFeature("u"))?;
                }
                let s: f64 = terms.iter().map(|(w, p)| w * sign(p.eval(input.step, &state))).sum();
                self.radius * s
            }
            PolicyKind::ErrorSign { multipliers, target } => {
                let u = input.u.ok_or(Error::MissingFeature("u"))?;
                self.radius * multipliers.lookup(input.t, input.x) * sign(target.value(input.x) - u)
            }
        };
        Ok(raw.clamp(-self.radius, self.radius))
    }

    /// The same rule with every value and the radius multiplied by `factor ≥ 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0) {
            return Err(invalid("scale factor must be non-negative"));
        }
        let kind = match &self.kind {
            PolicyKind::Zero => PolicyKind::Zero,
            PolicyKind::Constant(c) => PolicyKind::Constant(c * factor),
            PolicyKind::Table(t) => {
                let mut t = t.clone();
                t.values.iter_mut().for_each(|v| *v *= factor);
                PolicyKind::Table(t)
            }
            PolicyKind::SignOfRegression(terms) => PolicyKind::SignOfRegression(terms.clone()),
            PolicyKind::ErrorSign { .. } => self.kind.clone(),
        };
        Self::new(self.radius * factor, kind)
    }

    /// Short hex digest of the radius and payload.
    pub fn digest(&self) -> String {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&self.radius.to_bits().to_le_bytes());
        match &self.kind {
            PolicyKind::Zero => bytes.push(0),
            PolicyKind::Constant(c) => {
                bytes.push(1);
                bytes.extend_from_slice(&c.to_bits().to_le_bytes());
            }
            PolicyKind::Table(t) => {
                bytes.push(2);
                bytes.extend_from_slice(&(t.time_buckets as u64).to_le_bytes());
                for v in std::iter::once(&t.horizon).chain(&t.state_edges).chain(&t.values) {
                    bytes.extend_from_slice(&v.to_bits().to_le_bytes());
                }
            }
            PolicyKind::SignOfRegression(terms) => {
                bytes.push(3);
                for (w, s) in terms {
                    bytes.extend_from_slice(&w.to_bits().to_le_bytes());
                    bytes.extend_from_slice(s.features.id().as_bytes());
                    for step in &s.steps {
                        step.digest_into(&mut bytes);
                    }
                }
            }
            PolicyKind::ErrorSign { multipliers, target } => {
                bytes.push(4);
                bytes.extend_from_slice(target.to_string().as_bytes());
                bytes.extend_from_slice(&(multipliers.time_buckets as u64).to_le_bytes());
                for v in std::iter::once(&multipliers.horizon).chain(&multipliers.state_edges).chain(&multipliers.values) {
                    bytes.extend_from_slice(&v.to_bits().to_le_bytes());
                }
            }
        }
        hex16(&Sha256::digest(&bytes))
    }
}

pub(crate) fn hex16(bytes: &[u8]) -> String {
    bytes.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
