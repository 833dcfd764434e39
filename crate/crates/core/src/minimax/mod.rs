//! Cost evaluation, the Picard iteration for the saddle point and minimax
//! gap estimates.

mod control;
mod cost;
mod gap;
mod picard;

pub use control::{clamp_control, control_paths, ControlRule, ControlTracker, RuleContext};
pub use cost::{evaluate_cost, CostReport};
pub use gap::{minimax_gap, random_time_policies, saddle_probes, MinimaxGap, SaddleCheck, SaddleProbe};
pub use picard::{picard_solve, sign_policy, PicardConfig, PicardIteration, PicardReport};
