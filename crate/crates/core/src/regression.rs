//! Least-squares projection of path values onto polynomial state features.
//!
//! Conditional expectations `E[· | F_t]` in the backward recursions are
//! replaced by per-time-step ridge regressions on monomials of the
//! standardized state `(X, M, u)`. Variables with no spread at a given step
//! (all paths start at `x0` with `M = 1`) drop out of that step's design.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// Upper bound on the condition number of the regularized Gram matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Default ridge penalty per path (`λ = 1e-8 · n_paths`).
pub const DEFAULT_RIDGE_PER_PATH: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateVar {
    X = 0,
    M = 1,
    U = 2,
}

impl StateVar {
    fn label(&self) -> &'static str {
        match self {
            StateVar::X => "x",
            StateVar::M => "m",
            StateVar::U => "u",
        }
    }
}

/// The state a regression surface is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub x: f64,
    pub m: f64,
    pub u: f64,
}

impl State {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.m,
            _ => self.u,
        }
    }
}

/// All monomials of total degree `≤ degree` in the chosen variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureMap {
    uses: [bool; 3],
    degree: usize,
}

impl FeatureMap {
    pub fn polynomial(vars: &[StateVar], degree: usize) -> Result<Self> {
        if vars.is_empty() && degree > 0 {
            return Err(invalid("a polynomial feature map needs at least one variable"));
        }
        let mut uses = [false; 3];
        for v in vars {
            uses[*v as usize] = true;
        }
        Ok(Self { uses, degree })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn uses(&self, v: StateVar) -> bool {
        self.uses[v as usize]
    }

    /// Number of features when every variable is active.
    pub fn n_features(&self) -> usize {
        exponents(self.uses, self.degree).len()
    }

    pub fn id(&self) -> String {
        let vars: Vec<&str> = [StateVar::X, StateVar::M, StateVar::U]
            .iter()
            .filter(|v| self.uses(**v))
            .map(StateVar::label)
            .collect();
        format!("poly{}[{}]", self.degree, vars.join(","))
    }
}

fn exponents(active: [bool; 3], degree: usize) -> Vec<[u8; 3]> {
    let cap = |i: usize| if active[i] { degree } else { 0 };
    let mut out = Vec::new();
    for total in 0..=degree {
        for ex in 0..=cap(0).min(total) {
            for em in 0..=cap(1).min(total - ex) {
                let eu = total - ex - em;
                if eu <= cap(2) {
                    out.push([ex as u8, em as u8, eu as u8]);
                }
            }
        }
    }
    out
}

/// Feature set and ridge penalty for one backward solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionBasis {
    pub features: FeatureMap,
    pub ridge_per_path: f64,
}

impl RegressionBasis {
    pub fn new(features: FeatureMap) -> Self {
        Self { features, ridge_per_path: DEFAULT_RIDGE_PER_PATH }
    }

    pub fn polynomial(vars: &[StateVar], degree: usize) -> Result<Self> {
        Ok(Self::new(FeatureMap::polynomial(vars, degree)?))
    }

    /// Regression well-posedness guard: at least ten paths per feature.
    pub fn check_paths(&self, n_paths: usize) -> Result<()> {
        let p = self.features.n_features();
        if p == 0 || p * 10 > n_paths {
            return Err(invalid(format!(
                "basis {} has {p} features; needs at least {} paths, got {n_paths}",
                self.features.id(),
                10 * p.max(1)
            )));
        }
        if !(self.ridge_per_path.is_finite() && self.ridge_per_path >= 0.0) {
            return Err(invalid("ridge penalty must be non-negative"));
        }
        Ok(())
    }
}

/// Fitted surface at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFit {
    center: [f64; 3],
    scale: [f64; 3],
    exponents: Vec<[u8; 3]>,
    coeffs: Vec<f64>,
}

impl StepFit {
    /// The identically zero surface.
    pub fn zero() -> Self {
        Self { center: [0.0; 3], scale: [1.0; 3], exponents: vec![[0, 0, 0]], coeffs: vec![0.0] }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub fn eval(&self, s: &State) -> f64 {
        let z = [
            (s.get(0) - self.center[0]) / self.scale[0],
            (s.get(1) - self.center[1]) / self.scale[1],
            (s.get(2) - self.center[2]) / self.scale[2],
        ];
        self.exponents
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| c * monomial(&z, e))
            .sum()
    }

    pub(crate) fn digest_into(&self, out: &mut Vec<u8>) {
        for v in self.center.iter().chain(&self.scale).chain(&self.coeffs) {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        for e in &self.exponents {
            out.extend_from_slice(e);
        }
    }
}

#[inline]
fn monomial(z: &[f64; 3], e: &[u8; 3]) -> f64 {
    let mut v = 1.0;
    for i in 0..3 {
        for _ in 0..e[i] {
            v *= z[i];
        }
    }
    v
}

/// One fitted surface per grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSeries {
    pub features: FeatureMap,
    pub steps: Vec<StepFit>,
}

impl RegressionSeries {
    pub fn eval(&self, step: usize, s: &State) -> f64 {
        self.steps[step.min(self.steps.len() - 1)].eval(s)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.steps.iter().all(StepFit::is_zero)
    }
}

/// Design matrix and factorized normal equations for one time step.
pub struct Design {
    center: [f64; 3],
    scale: [f64; 3],
    exponents: Vec<[u8; 3]>,
    rows: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Design {
    pub fn build(basis: &RegressionBasis, states: &[State], step: usize) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(invalid("regression needs at least one path"));
        }
        let mut center = [0.0; 3];
        let mut scale = [1.0; 3];
        let mut active = [false; 3];
        for i in 0..3 {
            if !basis.features.uses[i] {
                continue;
            }
            let mean = states.iter().map(|s| s.get(i)).sum::<f64>() / n as f64;
            let var = states.iter().map(|s| (s.get(i) - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            center[i] = mean;
            if sd > 1e-12 * (1.0 + mean.abs()) {
                scale[i] = sd;
                active[i] = true;
            }
        }
        let exps = exponents(active, basis.features.degree);
        let p = exps.len();
        let rows = DMatrix::from_fn(n, p, |r, c| {
            let s = &states[r];
            let z = [
                (s.x - center[0]) / scale[0],
                (s.m - center[1]) / scale[1],
                (s.u - center[2]) / scale[2],
            ];
            monomial(&z, &exps[c])
        });
        let lambda = basis.ridge_per_path * n as f64;
        let mut gram = rows.tr_mul(&rows);
        for d in 0..p {
            gram[(d, d)] += lambda;
        }
        let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned { step, condition });
        }
        let chol = gram
            .cholesky()
            .ok_or(Error::IllConditioned { step, condition: f64::INFINITY })?;
        Ok(Self { center, scale, exponents: exps, rows, chol })
    }

    pub fn n_features(&self) -> usize {
        self.exponents.len()
    }

    pub fn fit(&self, target: &[f64]) -> StepFit {
        let rhs = self.rows.tr_mul(&DVector::from_column_slice(target));
        let coeffs = self.chol.solve(&rhs);
        StepFit {
            center: self.center,
            scale: self.scale,
            exponents: self.exponents.clone(),
            coeffs: coeffs.iter().copied().collect(),
        }
    }

    /// In-sample fitted values of `fit` (which must come from this design).
    pub fn predict(&self, fit: &StepFit) -> Vec<f64> {
        let c = DVector::from_column_slice(&fit.coeffs);
        (&self.rows * c).iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(x: f64, m: f64, u: f64) -> State {
        State { x, m, u }
    }

    #[test]
    fn feature_counts() {
        let f = FeatureMap::polynomial(&[StateVar::X, StateVar::M, StateVar::U], 3).unwrap();
        assert_eq!(f.n_features(), 20);
        let f = FeatureMap::polynomial(&[StateVar::X, StateVar::U], 2).unwrap();
        assert_eq!(f.n_features(), 6);
        assert_eq!(f.id(), "poly2[x,u]");
    }

    #[test]
    fn recovers_polynomial_exactly() {
        let basis = RegressionBasis::polynomial(&[StateVar::X, StateVar::U], 2).unwrap();
        let states: Vec<State> =
            (0..200).map(|i| st((i as f64 * 0.37).sin() * 2.0, 1.0, (i as f64 * 0.11).cos())).collect();
        let target: Vec<f64> = states.iter().map(|s| 1.0 + 2.0 * s.x - s.x * s.u + 0.5 * s.u * s.u).collect();
        let d = Design::build(&basis, &states, 0).unwrap();
        let fit = d.fit(&target);
        for (s, t) in states.iter().zip(&target) {
            assert!((fit.eval(s) - t).abs() < 1e-6);
        }
        let pred = d.predict(&fit);
        assert!((pred[17] - target[17]).abs() < 1e-6);
    }

    #[test]
    fn degenerate_variables_drop_out() {
        let basis = RegressionBasis::polynomial(&[StateVar::X, StateVar::M, StateVar::U], 3).unwrap();
        let states = vec![st(0.5, 1.0, 0.2); 50];
        let d = Design::build(&basis, &states, 0).unwrap();
        assert_eq!(d.n_features(), 1);
        let fit = d.fit(&(0..50).map(|i| i as f64).collect::<Vec<_>>());
        assert!((fit.eval(&states[0]) - 24.5).abs() < 1e-6);
    }

    #[test]
    fn duplicated_columns_are_rejected() {
        // x and u identical: collinear features with no ridge
        let mut basis = RegressionBasis::polynomial(&[StateVar::X, StateVar::U], 1).unwrap();
        basis.ridge_per_path = 0.0;
        let states: Vec<State> = (0..100).map(|i| st(i as f64, 1.0, i as f64)).collect();
        let err = Design::build(&basis, &states, 4).err().unwrap();
        assert!(matches!(err, Error::IllConditioned { step: 4, .. }));
    }

    #[test]
    fn zero_target_gives_exact_zero_fit() {
        let basis = RegressionBasis::polynomial(&[StateVar::X], 3).unwrap();
        let states: Vec<State> = (0..100).map(|i| st(i as f64 / 10.0, 1.0, 0.0)).collect();
        let fit = Design::build(&basis, &states, 0).unwrap().fit(&vec![0.0; 100]);
        assert!(fit.is_zero());
    }

    #[test]
    fn path_guard() {
        let basis = RegressionBasis::polynomial(&[StateVar::X, StateVar::M, StateVar::U], 3).unwrap();
        assert!(basis.check_paths(199).is_err());
        assert!(basis.check_paths(200).is_ok());
    }
}
