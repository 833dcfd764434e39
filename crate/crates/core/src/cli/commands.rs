use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use super::output::{Csv, RunManifest};
use super::{load_config, ExperimentConfig, FamilyKind};
use crate::bsde::solve_worst_value;
use crate::error::Error;
use crate::filter::{innovation_path, run_filter, run_filter_with, FilterConfig};
use crate::minimax::{
    control_paths, minimax_gap, picard_solve, random_time_policies, saddle_probes, ControlRule, PicardConfig,
};
use crate::model::{
    build_time_grid, evolve_observation, evolve_signal, path_increments, simulate_p, DriftPolicy,
    Measure, NoiseBundle, PathFeatures, PathMatrix,
};
use crate::oracles::{
    feedback_sign_family, finite_signal_filter, grid_sup_cost, kalman_bucy, sign_pattern_family, simulate_chain,
    FiniteSignalSpec, LinearGaussianSpec,
};
use crate::regression::{RegressionBasis, StateVar};
use crate::rng::Role;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Simulate,
    Filter,
    WorstCase,
    Picard,
    MinimaxGap,
    OracleCheck,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Simulate,
        Command::Filter,
        Command::WorstCase,
        Command::Picard,
        Command::MinimaxGap,
        Command::OracleCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Filter => "filter",
            Command::WorstCase => "worst-case",
            Command::Picard => "picard",
            Command::MinimaxGap => "minimax-gap",
            Command::OracleCheck => "oracle-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

/// Why a run stopped early; each maps to a process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Config(Vec<String>),
    Numerical(String),
    NotConverged(String),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 1,
            RunError::Numerical(_) => 2,
            RunError::NotConverged(_) => 3,
        }
    }

    fn status(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config_error",
            RunError::Io(_) => "io_error",
            RunError::Numerical(_) => "numerical_failure",
            RunError::NotConverged(_) => "not_converged",
        }
    }

    fn messages(&self) -> Vec<String> {
        match self {
            RunError::Config(v) => v.clone(),
            RunError::Numerical(s) | RunError::NotConverged(s) | RunError::Io(s) => vec![s.clone()],
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            RunError::Numerical(e.to_string())
        } else {
            RunError::Config(vec![e.to_string()])
        }
    }
}

/// Result of a subcommand invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub manifest: Option<RunManifest>,
    pub errors: Vec<String>,
}

#[derive(Default)]
struct Produced {
    tables: Vec<Csv>,
    converged: Option<bool>,
    iterations: Option<usize>,
    failure: Option<RunError>,
}

/// Loads the config, runs `cmd` and writes its CSV files followed by the manifest.
///
/// When the config itself is invalid the manifest goes to the `--out-dir`
/// override if one was given; otherwise only the returned errors remain.
pub fn run_cli(cmd: Command, config_path: &Path, overrides: &[(String, String)]) -> RunOutcome {
    let started = Instant::now();
    match load_config(config_path, overrides) {
        Ok(cfg) => run_subcommand(cmd, &cfg),
        Err(errs) => {
            let err = RunError::Config(errs.0);
            let out_dir = overrides.iter().find(|(k, _)| k == "output.dir").map(|(_, v)| v.clone());
            let manifest = RunManifest {
                command: cmd.name().into(),
                label: String::new(),
                config_digest: String::new(),
                seed: 0,
                version: env!("CARGO_PKG_VERSION").into(),
                wall_clock_seconds: started.elapsed().as_secs_f64(),
                artifacts: Vec::new(),
                status: err.status().into(),
                exit_code: err.exit_code(),
                errors: err.messages(),
                converged: None,
                iterations: None,
            };
            let written = out_dir.and_then(|d| {
                std::fs::create_dir_all(&d).ok()?;
                manifest.write(Path::new(&d)).ok()
            });
            RunOutcome { exit_code: err.exit_code(), errors: err.messages(), manifest: written.map(|_| manifest) }
        }
    }
}

pub fn run_subcommand(cmd: Command, cfg: &ExperimentConfig) -> RunOutcome {
    let started = Instant::now();
    let produced = match cmd {
        Command::Simulate => simulate(cfg),
        Command::Filter => filter(cfg),
        Command::WorstCase => worst_case(cfg),
        Command::Picard => picard(cfg),
        Command::MinimaxGap => gap(cfg),
        Command::OracleCheck => oracle_check(cfg),
    };
    let mut produced = produced.unwrap_or_else(|e| Produced { failure: Some(e), ..Produced::default() });
    let mut artifacts = Vec::new();
    if let Err(e) = std::fs::create_dir_all(&cfg.out_dir) {
        produced.failure = Some(RunError::Io(format!("cannot create {}: {e}", cfg.out_dir.display())));
    } else {
        for t in &produced.tables {
            match t.write(&cfg.out_dir) {
                Ok(p) => artifacts.push(p.file_name().unwrap().to_string_lossy().into_owned()),
                Err(e) => produced.failure = Some(RunError::Io(e.to_string())),
            }
        }
    }
    let (status, exit_code, errors) = match &produced.failure {
        None => ("ok", 0, Vec::new()),
        Some(e) => (e.status(), e.exit_code(), e.messages()),
    };
    let manifest = RunManifest {
        command: cmd.name().into(),
        label: cfg.label.clone(),
        config_digest: cfg.digest(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        artifacts,
        status: status.into(),
        exit_code,
        errors: errors.clone(),
        converged: produced.converged,
        iterations: produced.iterations,
    };
    let written = manifest.write(&cfg.out_dir).is_ok();
    RunOutcome { exit_code, manifest: written.then_some(manifest), errors }
}

fn grid_of(cfg: &ExperimentConfig) -> Result<crate::model::TimeGrid, RunError> {
    Ok(build_time_grid(cfg.model.horizon, cfg.n_steps)?)
}

fn single_path_noise(cfg: &ExperimentConfig, grid: &crate::model::TimeGrid) -> Result<NoiseBundle, RunError> {
    let id = cfg.filter_path_id;
    Ok(NoiseBundle {
        dw: PathMatrix::from_rows(vec![path_increments(grid, cfg.seed, id, Role::SignalNoise)])?,
        db: PathMatrix::from_rows(vec![path_increments(grid, cfg.seed, id, Role::ObservationNoise)])?,
        seed: cfg.seed,
        path_ids: vec![id],
    })
}

fn simulate(cfg: &ExperimentConfig) -> Result<Produced, RunError> {
    let grid = grid_of(cfg)?;
    let p = simulate_p(&cfg.model, &grid, cfg.n_paths, cfg.seed)?;
    let mut csv = Csv::new("paths.csv", &["t", "path", "X", "Y", "M"]);
    for i in 0..p.n_paths() {
        for n in 0..=grid.n_steps {
            csv.row(&[grid.times[n].into(), i.into(), p.x.get(i, n).into(), p.y.get(i, n).into(), p.m.get(i, n).into()]);
        }
    }
    Ok(Produced { tables: vec![csv], ..Produced::default() })
}

fn filter(cfg: &ExperimentConfig) -> Result<Produced, RunError> {
    let grid = grid_of(cfg)?;
    let noise = single_path_noise(cfg, &grid)?;
    let zero = DriftPolicy::zero();
    let x = evolve_signal(&cfg.model, &zero, &noise, &grid, PathFeatures::default())?;
    let y = evolve_observation(&cfg.model, &x, &noise, &grid, Measure::P)?;
    let fc = FilterConfig::new(cfg.n_particles, cfg.ess_threshold, cfg.seed)?;
    let est = run_filter(&cfg.model, &zero, y.row(0), &grid, &fc, cfg.filter_path_id)?;
    let nu = innovation_path(y.row(0), &est.pi_h, grid.dt)?;
    let mut csv = Csv::new("filter_path.csv", &["t", "X", "Y", "u", "pi_h", "nu", "ess"]);
    for n in 0..=grid.n_steps {
        csv.row(&[
            grid.times[n].into(),
            x.get(0, n).into(),
            y.get(0, n).into(),
            est.u[n].into(),
            est.pi_h[n].into(),
            nu[n].into(),
            est.ess[n].into(),
        ]);
    }
    Ok(Produced { tables: vec![csv], ..Produced::default() })
}

fn worst_case(cfg: &ExperimentConfig) -> Result<Produced, RunError> {
    cfg.model.require_h1("worst-case")?;
    let grid = grid_of(cfg)?;
    let p = simulate_p(&cfg.model, &grid, cfg.n_paths, cfg.seed)?;
    let rule = ControlRule::classical(cfg.n_particles, cfg.ess_threshold);
    let ids: Vec<u64> = (0..cfg.n_paths as u64).collect();
    let u = control_paths(&rule, &cfg.model, &p.y, &grid, cfg.seed, &ids)?;
    let mut basis = RegressionBasis::polynomial(&[StateVar::X, StateVar::U], cfg.degree)?;
    basis.ridge_per_path = cfg.ridge_lambda;
    let mut csv = Csv::new("worst_case.csv", &["k", "J_bsde", "J_grid", "se_grid", "rel_diff"]);
    for &k in &cfg.k_values {
        let model = cfg.model.with_k(k)?;
        let bsde = solve_worst_value(&p, &u, &model, &basis)?;
        let family = match cfg.family {
            FamilyKind::Feedback => feedback_sign_family(&model, model.horizon, cfg.n_buckets)?,
            FamilyKind::OpenLoop => sign_pattern_family(k, model.horizon, cfg.n_buckets)?,
        };
        let sup = grid_sup_cost(&model, &rule, &family, &grid, cfg.n_paths, cfg.seed)?;
        let rel = (bsde.y0 - sup.j_worst).abs() / sup.j_worst;
        csv.row(&[k.into(), bsde.y0.into(), sup.j_worst.into(), sup.se.into(), rel.into()]);
    }
    Ok(Produced { tables: vec![csv], ..Produced::default() })
}

fn picard_config(cfg: &ExperimentConfig) -> Result<PicardConfig, RunError> {
    let mut pc = PicardConfig::new(grid_of(cfg)?, cfg.n_paths, cfg.n_particles, cfg.seed)?;
    pc.ess_threshold = cfg.ess_threshold;
    pc.basis = RegressionBasis::polynomial(&[StateVar::X, StateVar::M, StateVar::U], cfg.degree)?;
    pc.basis.ridge_per_path = cfg.ridge_lambda;
    pc.variant = cfg.variant;
    pc.max_iters = cfg.max_iters;
    pc.damping = cfg.damping;
    pc.tol = cfg.tol;
    Ok(pc)
}

fn picard(cfg: &ExperimentConfig) -> Result<Produced, RunError> {
    let pc = picard_config(cfg)?;
    let report = picard_solve(&cfg.model, &pc)?;
    let mut csv = Csv::new("picard.csv", &["iter", "J", "sign_agreement", "damping"]);
    for it in &report.iterations {
        csv.row(&[it.iter.into(), it.j.into(), it.sign_agreement.into(), it.damping.into()]);
    }
    let mut tables = vec![csv];
    if cfg.n_probes > 0 {
        let probes = random_time_policies(cfg.model.k, cfg.model.horizon, 3, cfg.n_probes, cfg.seed)?;
        let check = saddle_probes(
            &cfg.model,
            &report.final_rule(&pc),
            &report.final_policy,
            &probes,
            &[-0.1, -0.05, 0.05, 0.1],
            &pc.grid,
            cfg.n_paths,
            cfg.seed,
        )?;
        let mut s = Csv::new("saddle.csv", &["probe_kind", "probe_id", "J", "se"]);
        s.row(&["center".into(), 0usize.into(), check.center.j.into(), check.center.se.into()]);
        for p in &check.probes {
            s.row(&[p.kind.into(), p.id.into(), p.report.j.into(), p.report.se.into()]);
        }
        tables.push(s);
    }
    let failure = (!report.converged)
        .then(|| RunError::NotConverged(format!("no fixed point after {} iterations", report.iterations.len())));
    Ok(Produced { tables, converged: Some(report.converged), iterations: Some(report.iterations.len()), failure })
}

fn gap(cfg: &ExperimentConfig) -> Result<Produced, RunError> {
    cfg.model.require_h1("minimax-gap")?;
    let grid = grid_of(cfg)?;
    let k = cfg.model.k;
    let g = cfg.grid_size;
    let levels: Vec<f64> =
        (0..g).map(|i| if g == 1 { 0.0 } else { -k + 2.0 * k * i as f64 / (g - 1) as f64 }).collect();
    let thetas = levels.iter().map(|v| DriftPolicy::constant(k, *v)).collect::<Result<Vec<_>, _>>()?;
    let controls: Vec<ControlRule> =
        thetas.iter().map(|t| ControlRule::filter(t.clone(), cfg.n_particles, cfg.ess_threshold)).collect();
    let r = minimax_gap(&cfg.model, &controls, &thetas, &grid, cfg.n_paths, cfg.seed)?;
    let mut s = Csv::new("saddle.csv", &["probe_kind", "probe_id", "J", "se"]);
    for (c, row) in r.cells.iter().enumerate() {
        for (t, cell) in row.iter().enumerate() {
            s.row(&["cell".into(), (c * g + t).into(), cell.j.into(), cell.se.into()]);
        }
    }
    s.row(&["min_sup".into(), 0usize.into(), r.min_sup.into(), r.min_sup_se.into()]);
    s.row(&["sup_min".into(), 0usize.into(), r.sup_min.into(), r.sup_min_se.into()]);
    let gap_se = r.min_sup_se.hypot(r.sup_min_se);
    s.row(&["gap".into(), 0usize.into(), r.gap.into(), gap_se.into()]);
    Ok(Produced { tables: vec![s], ..Produced::default() })
}

fn oracle_check(cfg: &ExperimentConfig) -> Result<Produced, RunError> {
    let grid = grid_of(cfg)?;
    let fc = FilterConfig::new(cfg.n_particles, cfg.ess_threshold, cfg.seed)?;
    let (particle, oracle) = match LinearGaussianSpec::from_model(&cfg.model) {
        Ok(spec) => {
            let noise = single_path_noise(cfg, &grid)?;
            let zero = DriftPolicy::zero();
            let x = evolve_signal(&cfg.model, &zero, &noise, &grid, PathFeatures::default())?;
            let y = evolve_observation(&cfg.model, &x, &noise, &grid, Measure::P)?;
            let est = run_filter(&cfg.model, &zero, y.row(0), &grid, &fc, cfg.filter_path_id)?;
            (est.u, kalman_bucy(&spec, y.row(0), &grid)?.mean)
        }
        Err(_) => {
            let m = cfg.n_states;
            let x0 = cfg.model.x0;
            let states =
                (0..m).map(|i| x0 - cfg.half_width + 2.0 * cfg.half_width * i as f64 / (m - 1) as f64).collect();
            let spec = FiniteSignalSpec::from_model(&cfg.model, states)?;
            let (_, y) = simulate_chain(&spec, &grid, cfg.seed, cfg.filter_path_id)?;
            let dynamics = spec.dynamics(grid.dt)?;
            let est = run_filter_with(&dynamics, &cfg.model.h, &cfg.model.f, &y, &grid, &fc, cfg.filter_path_id)?;
            (est.u, finite_signal_filter(&spec, &y, &grid)?.u)
        }
    };
    let mut csv = Csv::new("oracle_check.csv", &["t", "u_particle", "u_oracle", "abs_err"]);
    for n in 0..=grid.n_steps {
        csv.row(&[grid.times[n].into(), particle[n].into(), oracle[n].into(), (particle[n] - oracle[n]).abs().into()]);
    }
    Ok(Produced { tables: vec![csv], ..Produced::default() })
}
