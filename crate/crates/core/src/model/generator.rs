use super::{Coefficient, ModelSpec};

/// A twice-differentiable test function `φ`.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    Preset(Coefficient),
    /// `Σ c_i x^i`
    Polynomial(Vec<f64>),
}

impl TestFunction {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            TestFunction::Preset(c) => c.value(x),
            TestFunction::Polynomial(c) => c.iter().rev().fold(0.0, |acc, ci| acc * x + ci),
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match self {
            TestFunction::Preset(c) => c.d1(x),
            TestFunction::Polynomial(c) => {
                c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (i, ci)| acc * x + i as f64 * ci)
            }
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match self {
            TestFunction::Preset(c) => c.d2(x),
            TestFunction::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (i, ci)| acc * x + (i * (i - 1)) as f64 * ci),
        }
    }
}

/// `Lφ(x) = φ'(x)(b(x) + σ(x)θ) + ½φ''(x)σ(x)²`.
pub fn apply_generator(model: &ModelSpec, theta: f64, phi: &TestFunction, x: f64) -> f64 {
    let s = model.sigma.value(x);
    phi.d1(x) * (model.b.value(x) + s * theta) + 0.5 * phi.d2(x) * s * s
}
