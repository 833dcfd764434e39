//! Config-driven experiment runner behind the `ambifilter` binary.
//!
//! Every subcommand reads one config file, writes its CSV artifacts into the
//! output directory and finishes with `manifest.txt`, which records the
//! config digest, seed, artifacts, timing and any errors.

mod commands;
mod config;
mod output;

pub use commands::{run_cli, run_subcommand, Command, RunError, RunOutcome};
pub use config::{load_config, parse_config, parse_pairs, ConfigErrors, ExperimentConfig, FamilyKind, OVERRIDABLE};
pub use output::{Cell, Csv, RunManifest};
