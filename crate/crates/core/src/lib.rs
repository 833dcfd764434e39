//! Robust nonlinear filtering when the signal drift is only known up to a
//! bounded perturbation.
//!
//! The signal follows `dX = (b(X) + σ(X)θ) dt + σ(X) dW` for an unknown
//! adapted `θ` with `|θ| ≤ k`, and is observed through `dY = h(X) dt + dB`.
//! An estimator `u` of `f(X)` is judged by its worst-case integrated squared
//! error over all such drifts.
//!
//! * [`model`] holds the coefficients, drift policies and path simulation
//!   under the base, perturbed and reference measures.
//! * [`filter`] carries the unnormalized filter on weighted particles.
//! * [`bsde`] solves the worst-case value equation and the adjoint system
//!   by least-squares Monte Carlo.
//! * [`minimax`] evaluates costs, runs the fixed-point iteration on
//!   `θ = k·sgn(P)` and measures the minimax gap.
//! * [`oracles`] provides Kalman-Bucy, an exact finite-state recursion and
//!   brute-force policy search.
//! * [`cli`] runs config-driven experiments for the `ambifilter` binary.
//!
//! ```
//! use ambifilter::filter::{run_filter, FilterConfig};
//! use ambifilter::model::{build_time_grid, simulate_p, DriftPolicy, ModelSpec};
//!
//! let model = ModelSpec::tanh_benchmark(0.25);
//! let grid = build_time_grid(1.0, 50).unwrap();
//! let paths = simulate_p(&model, &grid, 1, 42).unwrap();
//! let config = FilterConfig::new(200, 0.5, 42).unwrap();
//! let est = run_filter(&model, &DriftPolicy::zero(), paths.y.row(0), &grid, &config, 0).unwrap();
//! assert_eq!(est.u.len(), 51);
//! ```

pub mod bsde;
pub mod cli;
pub mod error;
pub mod filter;
pub mod minimax;
pub mod model;
pub mod oracles;
pub mod regression;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

// The guide's snippets run as doctests through these empty modules.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/filtering.md")]
    mod filtering {}
    #[doc = include_str!("../../../book/src/worst_case.md")]
    mod worst_case {}
    #[doc = include_str!("../../../book/src/adjoint.md")]
    mod adjoint {}
    #[doc = include_str!("../../../book/src/minimax.md")]
    mod minimax {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
