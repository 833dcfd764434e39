//! Independent references: the Kalman-Bucy filter, the exact filter of a
//! finite-state chain, and brute-force maximization over policy families.

mod finite;
mod grid;
mod kalman;

pub use finite::{finite_signal_filter, simulate_chain, FiniteFilterPath, FiniteSignalSpec};
pub use grid::{feedback_sign_family, grid_sup_cost, sign_pattern_family, GridSup};
pub use kalman::{kalman_bucy, KalmanPath, KalmanStepper, LinearGaussianSpec};
