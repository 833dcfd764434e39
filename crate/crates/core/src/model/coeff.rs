//! Named coefficient presets for `b`, `σ`, `h` and `f`.
//!
//! Arbitrary closures cannot live in a config file, so every coefficient is
//! one of a handful of parametric families. Each family knows its value and
//! first two derivatives, and whether it is bounded.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    /// `c`
    Constant { value: f64 },
    /// `slope·x + intercept`
    Linear { slope: f64, intercept: f64 },
    /// `amplitude·tanh(rate·x)`
    Tanh { amplitude: f64, rate: f64 },
    /// `amplitude·sin(frequency·x)`
    Sine { amplitude: f64, frequency: f64 },
}

impl Coefficient {
    pub const fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    pub const fn linear(slope: f64, intercept: f64) -> Self {
        Coefficient::Linear { slope, intercept }
    }

    pub const fn identity() -> Self {
        Coefficient::Linear { slope: 1.0, intercept: 0.0 }
    }

    pub const fn tanh(amplitude: f64, rate: f64) -> Self {
        Coefficient::Tanh { amplitude, rate }
    }

    pub const fn sine(amplitude: f64, frequency: f64) -> Self {
        Coefficient::Sine { amplitude, frequency }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Coefficient::Constant { value } => value,
            Coefficient::Linear { slope, intercept } => slope * x + intercept,
            Coefficient::Tanh { amplitude, rate } => amplitude * (rate * x).tanh(),
            Coefficient::Sine { amplitude, frequency } => amplitude * (frequency * x).sin(),
        }
    }

    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        match *self {
            Coefficient::Constant { .. } => 0.0,
            Coefficient::Linear { slope, .. } => slope,
            Coefficient::Tanh { amplitude, rate } => {
                let th = (rate * x).tanh();
                amplitude * rate * (1.0 - th * th)
            }
            Coefficient::Sine { amplitude, frequency } => amplitude * frequency * (frequency * x).cos(),
        }
    }

    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        match *self {
            Coefficient::Constant { .. } | Coefficient::Linear { .. } => 0.0,
            Coefficient::Tanh { amplitude, rate } => {
                let th = (rate * x).tanh();
                -2.0 * amplitude * rate * rate * th * (1.0 - th * th)
            }
            Coefficient::Sine { amplitude, frequency } => {
                -amplitude * frequency * frequency * (frequency * x).sin()
            }
        }
    }

    /// `sup |c(x)|`, or `None` when the preset is unbounded.
    pub fn sup_abs(&self) -> Option<f64> {
        match *self {
            Coefficient::Constant { value } => Some(value.abs()),
            Coefficient::Linear { slope, intercept } => (slope == 0.0).then_some(intercept.abs()),
            Coefficient::Tanh { amplitude, .. } | Coefficient::Sine { amplitude, .. } => {
                Some(amplitude.abs())
            }
        }
    }

    /// Every preset family has a globally bounded first derivative.
    pub fn has_bounded_derivative(&self) -> bool {
        true
    }

    pub fn name(&self) -> &'static str {
        match self {
            Coefficient::Constant { .. } => "constant",
            Coefficient::Linear { .. } => "linear",
            Coefficient::Tanh { .. } => "tanh",
            Coefficient::Sine { .. } => "sine",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Coefficient::Constant { value } => vec![value],
            Coefficient::Linear { slope, intercept } => vec![slope, intercept],
            Coefficient::Tanh { amplitude, rate } => vec![amplitude, rate],
            Coefficient::Sine { amplitude, frequency } => vec![amplitude, frequency],
        }
    }

    fn from_parts(name: &str, params: &[f64]) -> Result<Self, Error> {
        let want = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(invalid(format!("preset `{name}` takes {n} parameter(s), got {}", params.len())))
            }
        };
        let c = match name {
            "constant" => {
                want(1)?;
                Coefficient::constant(params[0])
            }
            "linear" => {
                want(2)?;
                Coefficient::linear(params[0], params[1])
            }
            "identity" => {
                want(0)?;
                Coefficient::identity()
            }
            "tanh" => {
                want(2)?;
                Coefficient::tanh(params[0], params[1])
            }
            "sine" => {
                want(2)?;
                Coefficient::sine(params[0], params[1])
            }
            other => {
                return Err(invalid(format!(
                    "unknown coefficient preset `{other}` (expected constant, linear, identity, tanh or sine)"
                )))
            }
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(invalid(format!("preset `{name}` has a non-finite parameter")));
        }
        Ok(c)
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params().iter().map(|p| format!("{p}")).collect();
        write!(f, "{}({})", self.name(), params.join(", "))
    }
}

/// Parses `name(p1, p2, ...)`; a bare number is shorthand for a constant.
impl FromStr for Coefficient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(v) = s.parse::<f64>() {
            return Coefficient::from_parts("constant", &[v]);
        }
        let (name, rest) = match s.find('(') {
            Some(i) => (&s[..i], &s[i + 1..]),
            None => return Coefficient::from_parts(s, &[]),
        };
        let inner = rest
            .strip_suffix(')')
            .ok_or_else(|| invalid(format!("missing `)` in coefficient `{s}`")))?;
        let params = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| invalid(format!("bad number `{}` in coefficient `{s}`", p.trim())))
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        Coefficient::from_parts(name.trim(), &params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_and_display() {
        let c: Coefficient = "tanh(0.2, 1)".parse().unwrap();
        assert_eq!(c, Coefficient::tanh(0.2, 1.0));
        assert_eq!(c.to_string(), "tanh(0.2, 1)");
        assert_eq!("0.5".parse::<Coefficient>().unwrap(), Coefficient::constant(0.5));
        assert_eq!("identity".parse::<Coefficient>().unwrap(), Coefficient::identity());
        assert!("cubic(1)".parse::<Coefficient>().is_err());
        assert!("tanh(1)".parse::<Coefficient>().is_err());
        assert!("tanh(1, x)".parse::<Coefficient>().is_err());
    }

    #[test]
    fn boundedness() {
        assert_eq!(Coefficient::identity().sup_abs(), None);
        assert_eq!(Coefficient::linear(0.0, -2.0).sup_abs(), Some(2.0));
        assert_eq!(Coefficient::tanh(-0.3, 4.0).sup_abs(), Some(0.3));
    }

    fn presets() -> impl Strategy<Value = Coefficient> {
        let p = -3.0..3.0f64;
        prop_oneof![
            p.clone().prop_map(Coefficient::constant),
            (p.clone(), p.clone()).prop_map(|(a, b)| Coefficient::linear(a, b)),
            (p.clone(), p.clone()).prop_map(|(a, b)| Coefficient::tanh(a, b)),
            (p.clone(), p).prop_map(|(a, b)| Coefficient::sine(a, b)),
        ]
    }

    proptest! {
        #[test]
        fn derivatives_match_central_differences(c in presets(), x in -3.0..3.0f64) {
            let h = 1e-5;
            let fd1 = (c.value(x + h) - c.value(x - h)) / (2.0 * h);
            let fd2 = (c.d1(x + h) - c.d1(x - h)) / (2.0 * h);
            prop_assert!((fd1 - c.d1(x)).abs() < 1e-6 * (1.0 + c.d1(x).abs()));
            prop_assert!((fd2 - c.d2(x)).abs() < 1e-5 * (1.0 + c.d2(x).abs()));
        }

        #[test]
        fn display_round_trips(c in presets()) {
            let back: Coefficient = c.to_string().parse().unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
