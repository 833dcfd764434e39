use std::sync::Arc;

use ambifilter::bsde::{simulate_reference, AdjointSolution, AdjointVariant};
use ambifilter::minimax::*;
use ambifilter::model::*;
use ambifilter::oracles::{feedback_sign_family, grid_sup_cost, LinearGaussianSpec};
use ambifilter::regression::{Design, RegressionBasis, RegressionSeries, State, StateVar, StepFit};
use approx::assert_relative_eq;
use proptest::prelude::*;

fn small_picard(k: f64, n_paths: usize) -> (ModelSpec, PicardConfig) {
    let model = ModelSpec::tanh_benchmark(k);
    let grid = build_time_grid(1.0, 25).unwrap();
    (model, PicardConfig::new(grid, n_paths, 100, 11).unwrap())
}

#[test]
fn clamp_examples() {
    assert_eq!(clamp_control(&[0.5, 3.0, -7.0], 1.0), vec![0.5, 1.0, -1.0]);
}

#[test]
fn constant_target_costs() {
    let mut model = ModelSpec::tanh_benchmark(0.25);
    model.f = Coefficient::constant(0.5);
    let g = build_time_grid(1.0, 20).unwrap();
    let theta = DriftPolicy::constant(0.25, -0.25).unwrap();
    let perfect = evaluate_cost(&model, &ControlRule::Constant(0.5), &theta, &g, 50, 1).unwrap();
    assert_eq!(perfect.j, 0.0);
    let zero = evaluate_cost(&model, &ControlRule::Constant(0.0), &theta, &g, 50, 1).unwrap();
    assert_relative_eq!(zero.j, 0.25, max_relative = 1e-12);
    assert!(zero.j <= 4.0 * 0.25);
}

#[test]
fn kalman_control_attains_the_riccati_risk() {
    let spec = LinearGaussianSpec::new(0.0, 1.0, 1.0, 0.0, 1.0).unwrap();
    let model = spec.to_model().unwrap();
    let g = build_time_grid(1.0, 100).unwrap();
    let c = evaluate_cost(&model, &ControlRule::KalmanBucy(spec), &DriftPolicy::zero(), &g, 2000, 3).unwrap();
    // ∫₀¹ tanh(t) dt = ln cosh 1
    let exact = 1.0f64.cosh().ln();
    assert!((c.j / exact - 1.0).abs() <= 0.05, "J {} vs {exact}", c.j);
}

#[test]
fn sign_policy_examples() {
    let grid = build_time_grid(1.0, 4).unwrap();
    let basis = RegressionBasis::polynomial(&[StateVar::X], 1).unwrap();
    let states: Vec<State> = (0..40).map(|i| State { x: i as f64 / 10.0, m: 1.0, u: 0.0 }).collect();
    let positive = Design::build(&basis, &states, 0).unwrap().fit(&vec![1.0; 40]);
    let series = |fit: StepFit| {
        Arc::new(RegressionSeries { features: basis.features.clone(), steps: vec![fit; grid.n_steps + 1] })
    };
    let zero = series(StepFit::zero());
    let solution = |p: Arc<RegressionSeries>| AdjointSolution {
        p: zero.clone(),
        q: zero.clone(),
        big_p: p,
        big_q: zero.clone(),
        grid: grid.clone(),
        variant: AdjointVariant::default(),
    };
    let up = sign_policy(&solution(series(positive)), 0.3).unwrap();
    for x in [-2.0, 0.0, 1.7] {
        assert_eq!(up.eval(&PolicyInput::new(1, 0.25, x).with_m(1.0).with_u(0.0)).unwrap(), 0.3);
    }
    assert!(sign_policy(&solution(zero.clone()), 0.3).unwrap().is_zero());
    let any = solution(series(Design::build(&basis, &states, 0).unwrap().fit(&vec![1.0; 40])));
    assert!(sign_policy(&any, 0.0).unwrap().is_zero());
}

#[test]
fn picard_without_ambiguity_is_the_classical_filter() {
    let (model, cfg) = small_picard(0.0, 400);
    let r = picard_solve(&model, &cfg).unwrap();
    assert!(r.converged);
    assert_eq!(r.iterations.len(), 1);
    assert!(r.final_policy.is_zero());
    // the same u and cost as the classical filter on the same seed
    let classical = ControlRule::classical(cfg.n_particles, cfg.ess_threshold);
    let q = simulate_reference(&model, &DriftPolicy::zero(), &classical, &cfg.grid, cfg.n_paths, cfg.seed).unwrap();
    let ids: Vec<u64> = (0..cfg.n_paths as u64).collect();
    let ambiguity = control_paths(&r.final_rule(&cfg), &model, &q.y, &cfg.grid, cfg.seed, &ids).unwrap();
    assert_eq!(&ambiguity, q.u.as_ref().unwrap());
    let mut j = 0.0;
    for i in 0..cfg.n_paths {
        for n in 0..cfg.grid.n_steps {
            j += (model.f.value(q.x.get(i, n)) - ambiguity.get(i, n)).powi(2) * q.m.get(i, n) * cfg.grid.dt;
        }
    }
    assert_relative_eq!(r.final_j, j / cfg.n_paths as f64, max_relative = 1e-10);
}

#[test]
fn picard_with_a_constant_target() {
    let (mut model, cfg) = small_picard(0.25, 200);
    model.f = Coefficient::constant(0.2);
    let r = picard_solve(&model, &cfg).unwrap();
    assert!(r.converged);
    assert!(r.final_policy.is_zero());
    assert_eq!(r.final_j, 0.0);
}

#[test]
fn picard_rejects_unbounded_models() {
    let model = ModelSpec::linear_gaussian(0.0, 1.0, 1.0, 0.0, 1.0).unwrap();
    let cfg = PicardConfig::new(build_time_grid(1.0, 10).unwrap(), 200, 50, 0).unwrap();
    assert!(picard_solve(&model, &cfg).is_err());
}

#[test]
fn picard_output_is_near_the_worst_case_cost() {
    let (model, cfg) = small_picard(0.25, 1000);
    let r = picard_solve(&model, &cfg).unwrap();
    assert!(r.iterations.iter().all(|it| (0.0..=1.0).contains(&it.sign_agreement)));
    let fam = feedback_sign_family(&model, 1.0, 3).unwrap();
    let sup = grid_sup_cost(&model, &r.final_rule(&cfg), &fam, &cfg.grid, cfg.n_paths, cfg.seed).unwrap();
    assert!((r.final_j / sup.j_worst - 1.0).abs() <= 0.05, "picard {} grid {}", r.final_j, sup.j_worst);
}

#[test]
fn gap_examples() {
    let model = ModelSpec::tanh_benchmark(0.25);
    let g = build_time_grid(1.0, 20).unwrap();
    let theta = DriftPolicy::constant(0.25, 0.25).unwrap();
    let one = minimax_gap(&model, &[ControlRule::classical(50, 0.5)], &[theta.clone()], &g, 100, 1).unwrap();
    assert_eq!(one.min_sup, one.sup_min);
    assert_eq!(one.gap, 0.0);

    let controls: Vec<ControlRule> =
        [-0.2, 0.0, 0.2].iter().map(|d| ControlRule::classical(50, 0.5).with_offset(*d)).collect();
    let point = minimax_gap(&model, &controls, &[DriftPolicy::zero()], &g, 100, 1).unwrap();
    assert_eq!(point.gap, 0.0);

    let thetas: Vec<DriftPolicy> =
        [-0.25, 0.0, 0.25].iter().map(|v| DriftPolicy::constant(0.25, *v).unwrap()).collect();
    let r = minimax_gap(&model, &controls, &thetas, &g, 200, 1).unwrap();
    // the min of a row maximum can never fall below the max of a column minimum
    assert!(r.sup_min <= r.min_sup);
    assert!(minimax_gap(&model, &[], &thetas, &g, 10, 1).is_err());
}

#[test]
fn probes_are_reproducible_and_admissible() {
    let a = random_time_policies(0.3, 1.0, 4, 10, 5).unwrap();
    assert_eq!(a, random_time_policies(0.3, 1.0, 4, 10, 5).unwrap());
    for p in &a {
        for t in [0.0, 0.3, 0.6, 0.99] {
            assert!(p.eval(&PolicyInput::new(0, t, 0.0)).unwrap().abs() <= 0.3);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn clamping_never_increases_the_error(
        u in prop::collection::vec(-5.0..5.0f64, 1..40),
        x in prop::collection::vec(-3.0..3.0f64, 40),
    ) {
        let f = Coefficient::tanh(1.0, 1.0);
        let clamped = clamp_control(&u, 1.0);
        for (i, (a, b)) in u.iter().zip(&clamped).enumerate() {
            let fx = f.value(x[i]);
            prop_assert!(b.abs() <= 1.0);
            prop_assert!((fx - b).abs() <= (fx - a).abs());
        }
    }
}
