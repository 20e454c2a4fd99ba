use lmscreen::data::{LongitudinalDataset, TimeCoding};
use lmscreen::lmm::{RandomEffectsSpec, SlopeCorrelation};
use lmscreen::screening::{
    bootstrap_stability, estimate_icc, fit_null_model, rank_descending, screen_likelihood, DPolicy,
    ScreeningConfig,
};
use lmscreen::simbench::{generate_dataset, Example, SimConfig};
use proptest::prelude::*;

const SLOPE: RandomEffectsSpec = RandomEffectsSpec::InterceptSlope(SlopeCorrelation::Diagonal);

/// Example-1 layout with only the given coefficients switched on.
fn sim(n: usize, p: usize, sigma_b: f64, sigma_eps: f64) -> SimConfig {
    SimConfig {
        sigma_b,
        sigma_eps,
        beta_main: 0.0,
        beta_inter: 0.0,
        tau: 0.0,
        active_main: vec![1],
        active_inter: vec![1],
        ..SimConfig::new(Example::Baseline, n, p)
    }
}

fn strong_signal() -> SimConfig {
    SimConfig {
        active_main: vec![1],
        active_inter: vec![1],
        beta_main: 5.0,
        beta_inter: 2.0,
        sigma_b: 0.5,
        sigma_eps: 0.5,
        ..SimConfig::new(Example::Baseline, 60, 51)
    }
}

fn data(cfg: &SimConfig, replicate: u64) -> LongitudinalDataset {
    generate_dataset(cfg, replicate).unwrap().0
}

#[test]
fn strong_signal_is_ranked_first() {
    let cfg = strong_signal();
    let screen = ScreeningConfig::new(SLOPE, TimeCoding::Linear);
    let hits = (0..100)
        .filter(|&r| screen_likelihood(&data(&cfg, r), &screen).unwrap().ranking[0] == 0)
        .count();
    assert!(hits >= 99, "{hits}");
}

#[test]
fn noise_only_screen_respects_nesting_and_cardinality() {
    let cfg = sim(40, 30, 0.5, 1.0);
    for spec in [RandomEffectsSpec::Intercept, SLOPE] {
        let mut screen = ScreeningConfig::new(spec, TimeCoding::Linear);
        screen.d = DPolicy::Fixed(7);
        for r in 0..5 {
            let res = screen_likelihood(&data(&cfg, r), &screen).unwrap();
            assert_eq!(res.selected.len(), 7);
            for (lr, &ok) in res.lr.iter().zip(&res.converged) {
                if ok {
                    assert!(lr.unwrap() >= -1e-6, "{spec:?}: {lr:?}");
                }
            }
        }
    }
}

#[test]
fn baseline_example_captures_the_active_set() {
    let mut cfg = SimConfig::new(Example::Baseline, 100, 200);
    cfg.master_seed = 2024;
    let screen = ScreeningConfig::new(SLOPE, TimeCoding::Linear);
    let captured = (0..100)
        .filter(|&r| {
            let (ds, truth) = generate_dataset(&cfg, r).unwrap();
            let res = screen_likelihood(&ds, &screen).unwrap();
            truth.union().iter().all(|k| res.selected.contains(k))
        })
        .count();
    assert!(captured >= 95, "{captured}");
}

#[test]
fn null_model_time_effect_is_near_zero_for_noise() {
    let cfg = sim(200, 1, 0.5, 1.0);
    let ds = data(&cfg, 0);
    let fit = fit_null_model(&ds, TimeCoding::Linear, &[], RandomEffectsSpec::Intercept).unwrap();
    assert_eq!(fit.beta.len(), 2);
    // sd of the slope estimate: sigma_eps / sqrt(n * sum (t - tbar)^2), times 0..3
    let se = 1.0 / (200.0f64 * 5.0).sqrt();
    assert!(fit.beta[1].abs() < 3.0 * se, "{} vs {se}", fit.beta[1]);
}

#[test]
fn icc_tracks_the_generating_variances() {
    let none = estimate_icc(&data(&sim(200, 1, 0.0, 1.0), 0), &[]).unwrap();
    assert!(none <= 0.02, "{none}");
    let half = estimate_icc(&data(&sim(500, 1, 1.0, 1.0), 0), &[]).unwrap();
    assert!((half - 0.5).abs() <= 0.05, "{half}");
}

#[test]
fn icc_of_pure_between_subject_variation() {
    let ds = data(&sim(30, 1, 1.0, 1.0), 0);
    let m = 4;
    let y: Vec<f64> = (0..ds.n_obs()).map(|r| ((r / m) as f64 * 0.7).sin() * 3.0 + 1e-4 * (r % m) as f64).collect();
    let icc = estimate_icc(&ds.with_response(y).unwrap(), &[]).unwrap();
    assert!(icc >= 0.98, "{icc}");
}

#[test]
fn all_zero_conditioning_column_is_dropped() {
    let cfg = strong_signal();
    let ds = data(&cfg, 3);
    let base = screen_likelihood(&ds, &ScreeningConfig::new(SLOPE, TimeCoding::Linear)).unwrap();
    let padded = ds.with_conditioning_column("zero", &vec![0.0; ds.n_obs()]).unwrap();
    let mut screen = ScreeningConfig::new(SLOPE, TimeCoding::Linear);
    screen.conditioning = vec![0];
    let res = screen_likelihood(&padded, &screen).unwrap();
    assert_eq!(res.dropped_conditioning, vec!["zero".to_string()]);
    assert_eq!(res.ranking, base.ranking);
}

#[test]
fn dummy_coding_with_conditioning_column() {
    let mut cfg = SimConfig::new(Example::DummyTime, 50, 20);
    cfg.master_seed = 5;
    let (ds, truth) = generate_dataset(&cfg, 0).unwrap();
    let group: Vec<f64> = (0..ds.n_obs()).map(|r| ((r / 4) % 2) as f64).collect();
    let ds = ds.with_conditioning_column("group", &group).unwrap();
    let mut screen = ScreeningConfig::new(SLOPE, TimeCoding::Dummy);
    screen.conditioning = vec![0];
    screen.d = DPolicy::Fixed(5);
    let res = screen_likelihood(&ds, &screen).unwrap();
    // interactions with every time contrast are the strongest signals here
    for k in &truth.inter {
        assert!(res.selected.contains(k), "{k} not in {:?}", res.selected);
    }
}

#[test]
fn serial_and_parallel_screens_agree_bitwise() {
    let cfg = SimConfig::new(Example::TimeVarying, 40, 60);
    let ds = data(&cfg, 1);
    let screen = ScreeningConfig::new(SLOPE, TimeCoding::Linear);
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = serial.install(|| screen_likelihood(&ds, &screen).unwrap());
    let b = wide.install(|| screen_likelihood(&ds, &screen).unwrap());
    assert_eq!(a, b);
}

#[test]
fn bootstrap_is_seeded_and_conserves_counts() {
    let cfg = strong_signal();
    let ds = data(&cfg, 9);
    let mut screen = ScreeningConfig::new(SLOPE, TimeCoding::Linear);
    screen.d = DPolicy::Fixed(4);
    let a = bootstrap_stability(&ds, &screen, 12, 77).unwrap();
    let b = bootstrap_stability(&ds, &screen, 12, 77).unwrap();
    assert_eq!(a, b);
    assert!(a.failures.is_empty());
    assert_eq!(a.counts.iter().sum::<usize>(), 12 * 4);
    let c = bootstrap_stability(&ds, &screen, 12, 78).unwrap();
    assert_eq!(c.counts.iter().sum::<usize>(), 12 * 4);
    assert!(bootstrap_stability(&ds, &screen, 0, 1).is_err());
}

#[test]
fn bootstrap_keeps_a_strong_signal() {
    let cfg = strong_signal();
    let ds = data(&cfg, 4);
    let mut screen = ScreeningConfig::new(SLOPE, TimeCoding::Linear);
    screen.d = DPolicy::Fixed(5);
    let res = bootstrap_stability(&ds, &screen, 100, 5).unwrap();
    assert!(res.counts[0] >= 95, "{}", res.counts[0]);
    assert_eq!(res.order()[0], 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn likelihood_and_ratio_rankings_coincide(seed in 0u64..10_000, intercept in any::<bool>()) {
        let spec = if intercept { RandomEffectsSpec::Intercept } else { SLOPE };
        let mut cfg = SimConfig::new(Example::Baseline, 20, 15);
        cfg.master_seed = seed;
        let res = screen_likelihood(&data(&cfg, 0), &ScreeningConfig::new(spec, TimeCoding::Linear)).unwrap();
        let demoted: Vec<bool> = res.converged.iter().map(|c| !c).collect();
        let lr: Vec<f64> = res.lr.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect();
        prop_assert_eq!(rank_descending(&lr, &demoted), res.ranking.clone());
        for (lr, &ok) in res.lr.iter().zip(&res.converged) {
            if ok {
                prop_assert!(lr.unwrap() >= -1e-6);
            }
        }
    }
}
