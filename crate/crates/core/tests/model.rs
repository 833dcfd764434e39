use ambifilter::model::*;
use ambifilter::stats::MeanSe;
use proptest::prelude::*;

fn ou(x0: f64) -> ModelSpec {
    ModelSpec::new(
        Coefficient::linear(-1.0, 0.0),
        Coefficient::constant(1.0),
        Coefficient::tanh(1.0, 1.0),
        Coefficient::tanh(1.0, 1.0),
        x0,
        1.0,
        0.5,
    )
    .unwrap()
}

#[test]
fn p_paths_start_where_they_should() {
    let m = ModelSpec::tanh_benchmark(0.25);
    let g = build_time_grid(1.0, 20).unwrap();
    let p = simulate_p(&m, &g, 50, 3).unwrap();
    for i in 0..50 {
        assert_eq!(p.x.get(i, 0), m.x0);
        assert_eq!(p.y.get(i, 0), 0.0);
        assert_eq!(p.m.get(i, 0), 1.0);
        assert_eq!(p.log_density.get(i, 0), 0.0);
        assert!(p.m.row(i).iter().all(|v| *v > 0.0));
    }
    assert_eq!(p, simulate_p(&m, &g, 50, 3).unwrap());
}

#[test]
fn change_of_measure_identity() {
    // E_Q[φ(X_T)] from θ-perturbed paths against E_P[Λ_T φ(X_T)] from base paths.
    let k = 0.5;
    let m = ou(0.3);
    let g = build_time_grid(1.0, 50).unwrap();
    let n = 10_000;
    let theta = DriftPolicy::constant(k, k).unwrap();
    let phi = |x: f64| x.tanh();
    let q_noise = sample_noise(&g, n, 21).unwrap();
    let xq = evolve_signal(&m, &theta, &q_noise, &g, PathFeatures::default()).unwrap();
    let q = MeanSe::of((0..n).map(|i| phi(xq.get(i, g.n_steps))));
    let p = simulate_p(&m, &g, n, 22).unwrap();
    let ld = girsanov_log_density(&theta, &p.x, &p.dw, &g, PathFeatures::default()).unwrap();
    let w = MeanSe::of((0..n).map(|i| ld.get(i, g.n_steps).exp() * phi(p.x.get(i, g.n_steps))));
    let se = q.se.hypot(w.se);
    assert!((q.mean - w.mean).abs() <= 3.0 * se, "Q {} vs weighted P {} (se {se})", q.mean, w.mean);
    // and the two genuinely differ from the unweighted P mean
    let plain = MeanSe::of((0..n).map(|i| phi(p.x.get(i, g.n_steps))));
    assert!((plain.mean - q.mean).abs() > 3.0 * se);
}

#[test]
fn halving_dt_moves_the_ou_mean_less_than_its_se() {
    let m = ou(2.0);
    let n = 10_000;
    let mean_at = |steps| {
        let g = build_time_grid(1.0, steps).unwrap();
        let noise = sample_noise(&g, n, 5).unwrap();
        let x = evolve_signal(&m, &DriftPolicy::zero(), &noise, &g, PathFeatures::default()).unwrap();
        MeanSe::of(x.column(steps))
    };
    let a = mean_at(50);
    let b = mean_at(100);
    assert!((a.mean - b.mean).abs() < a.se.max(b.se), "{} vs {}", a.mean, b.mean);
}

#[test]
fn q_tilde_weight_mean_is_one() {
    let m = ModelSpec::tanh_benchmark(0.25);
    let g = build_time_grid(1.0, 50).unwrap();
    let noise = sample_noise(&g, 10_000, 8).unwrap();
    let b = simulate_q_tilde(&m, &DriftPolicy::zero(), &noise, &g, None).unwrap();
    let s = MeanSe::of(b.m.column(g.n_steps));
    assert!((s.mean - 1.0).abs() <= 3.0 * s.se, "{} ± {}", s.mean, s.se);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weights_and_densities_stay_positive(seed in 0u64..1000, k in 0.0..1.0f64, level in -1.0..1.0f64) {
        let m = ModelSpec::tanh_benchmark(k);
        let g = build_time_grid(1.0, 10).unwrap();
        let p = simulate_p(&m, &g, 8, seed).unwrap();
        let theta = DriftPolicy::constant(k, level * k).unwrap();
        let ld = girsanov_log_density(&theta, &p.x, &p.dw, &g, PathFeatures::default()).unwrap();
        prop_assert!(p.m.values().iter().all(|v| *v > 0.0 && v.is_finite()));
        prop_assert!(ld.values().iter().all(|v| v.exp() > 0.0));
    }

    #[test]
    fn grids_are_uniform(horizon in 0.01..10.0f64, n in 1usize..500) {
        let g = build_time_grid(horizon, n).unwrap();
        prop_assert_eq!(g.times[0], 0.0);
        prop_assert!((g.times[n] - horizon).abs() <= 1e-12 * horizon);
        for w in g.times.windows(2) {
            prop_assert!((w[1] - w[0] - g.dt).abs() <= 1e-12 * horizon);
        }
    }
}
