use std::fs;
use std::path::Path;
use std::process::Command;

use ambifilter::cli::{parse_config, FamilyKind};
use ambifilter::model::build_time_grid;
use ambifilter::oracles::{kalman_bucy, LinearGaussianSpec};

const SMALL: &str = "grid.n_steps = 10\nmc.n_paths = 200\nmc.n_particles = 40\nsaddle.n_probes = 2\nminimax.grid_size = 2\n";

fn run(dir: &Path, sub: &str, config: &str, extra: &[&str]) -> (i32, String) {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ambifilter"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .args(extra)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect()).collect();
    (header, rows)
}

fn manifest(dir: &Path) -> String {
    fs::read_to_string(dir.join("manifest.txt")).unwrap()
}

#[test]
fn defaults_fill_a_minimal_file() {
    let c = parse_config("model.preset = tanh\n", &[]).unwrap();
    assert_eq!((c.n_steps, c.n_paths, c.n_particles, c.degree), (50, 2000, 500, 3));
    assert_eq!((c.max_iters, c.damping, c.tol, c.ess_threshold), (20, 0.5, 0.02, 0.5));
    assert_eq!(c.model.horizon, 1.0);
    assert_eq!(c.family, FamilyKind::Feedback);
    assert_eq!(c.k_values, vec![0.25]);
}

#[test]
fn every_config_error_is_reported() {
    let e = parse_config("model.k = -0.1\n", &[]).unwrap_err();
    assert!(e.0.iter().any(|m| m.contains("`model.k`") && m.contains("out of range")), "{e}");

    let e = parse_config("model.kk = 0.2\nmc.n_paths = x\nnot a pair\npicard.damping = 2\n", &[]).unwrap_err();
    assert_eq!(e.0.len(), 4, "{e}");
    assert!(e.0[0].contains("did you mean `model.k`"));
    assert!(e.0.iter().any(|m| m.starts_with("line 3:")));

    let o = [("bsde.degree".to_string(), "2".to_string())];
    assert!(parse_config("", &o).is_err());
    let o = [("model.k".to_string(), "0.4".to_string())];
    assert_eq!(parse_config("model.k = 0.1\n", &o).unwrap().model.k, 0.4);
}

#[test]
fn config_errors_exit_one_with_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let (code, err) = run(dir.path(), "picard", "model.kk = 1\n", &["--k", "-0.1", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("did you mean `model.k`") && err.contains("`model.k` = -0.1"), "{err}");
    let m = manifest(&out);
    assert!(m.contains("run.status = config_error"));
    assert!(m.contains("model.k"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(dir.path(), "smooth", "", &[]);
    assert_eq!(code, 1);
}

#[test]
fn every_subcommand_is_deterministic() {
    let files = [
        ("simulate", "paths.csv"),
        ("filter", "filter_path.csv"),
        ("worst-case", "worst_case.csv"),
        ("picard", "picard.csv"),
        ("minimax-gap", "saddle.csv"),
        ("oracle-check", "oracle_check.csv"),
    ];
    let dir = tempfile::tempdir().unwrap();
    for (sub, file) in files {
        let a = dir.path().join(format!("{sub}-a"));
        let b = dir.path().join(format!("{sub}-b"));
        for d in [&a, &b] {
            let (code, err) = run(dir.path(), sub, SMALL, &["--seed", "4", "--out-dir", d.to_str().unwrap()]);
            assert!(code == 0 || (sub == "picard" && code == 3), "{sub}: {code} {err}");
        }
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{sub}");
        let m = manifest(&a);
        assert!(m.contains(&format!("run.artifacts = {file}")) && m.contains("run.seed = 4"), "{m}");
    }
}

#[test]
fn headers_follow_the_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("filter", "filter_path.csv", "t,X,Y,u,pi_h,nu,ess"),
        ("worst-case", "worst_case.csv", "k,J_bsde,J_grid,se_grid,rel_diff"),
        ("picard", "picard.csv", "iter,J,sign_agreement,damping"),
        ("minimax-gap", "saddle.csv", "probe_kind,probe_id,J,se"),
        ("oracle-check", "oracle_check.csv", "t,u_particle,u_oracle,abs_err"),
    ];
    for (sub, file, header) in cases {
        let out = dir.path().join(sub);
        run(dir.path(), sub, SMALL, &["--out-dir", out.to_str().unwrap()]);
        let text = fs::read_to_string(out.join(file)).unwrap();
        assert_eq!(text.lines().next().unwrap(), header);
    }
}

#[test]
fn picard_without_ambiguity_converges_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let (code, _) = run(dir.path(), "picard", SMALL, &["--k", "0", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let m = manifest(&out);
    assert!(m.contains("picard.converged = true") && m.contains("picard.iterations = 1"), "{m}");
}

#[test]
fn picard_non_convergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let cfg = format!("{SMALL}picard.max_iters = 1\n");
    let (code, _) = run(dir.path(), "picard", &cfg, &["--out-dir", out.to_str().unwrap()]);
    assert_eq!(code, 3);
    let m = manifest(&out);
    assert!(m.contains("picard.converged = false") && m.contains("run.status = not_converged"));
    assert!(out.join("picard.csv").exists());
}

#[test]
fn linear_filter_run_matches_kalman_bucy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f");
    let cfg = "model.preset = linear_gaussian\nmodel.k = 0\ngrid.n_steps = 100\nmc.n_particles = 2000\n";
    let (code, err) = run(dir.path(), "filter", cfg, &["--out-dir", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let (header, rows) = read_csv(&out.join("filter_path.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let y: Vec<f64> = rows.iter().map(|r| r[col("Y")]).collect();
    let spec = LinearGaussianSpec::new(0.0, 1.0, 1.0, 0.0, 1.0).unwrap();
    let kb = kalman_bucy(&spec, &y, &build_time_grid(1.0, 100).unwrap()).unwrap();
    let mse = rows.iter().zip(&kb.mean).map(|(r, m)| (r[col("u")] - m).powi(2)).sum::<f64>() / rows.len() as f64;
    assert!(mse.sqrt() <= 0.05, "rmse {}", mse.sqrt());
    assert!(rows.iter().all(|r| r[col("t")].is_finite()));
}

#[test]
fn oracle_only_models_are_refused_by_the_solvers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w");
    let cfg = format!("{SMALL}model.preset = linear_gaussian\n");
    let (code, err) = run(dir.path(), "worst-case", &cfg, &["--out-dir", out.to_str().unwrap()]);
    assert_eq!(code, 1, "{err}");
    assert!(manifest(&out).contains("bounded f and h"));
}
