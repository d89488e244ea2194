use canonlab_core::engagement::{
    dissonance_index, encode_all, fit_its, negbin, tenure_design, Contribution, ItsWindow, Regressor, Scope,
    TenureRecord, UserEvent, WEEK, WINDOW_SWEEP,
};
use canonlab_core::synth::{count_regression, its_planted};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PLANT: [f64; 4] = [0.5, -0.01, -0.02, -0.01];

#[test]
fn zero_noise_series_recovered_exactly() {
    for weeks in WINDOW_SWEEP {
        let obs = its_planted(20, PLANT, 0.0, ItsWindow::new(weeks).unwrap(), 0);
        let fit = fit_its(&obs, Scope::Inside, false).unwrap();
        for (got, want) in fit.coef().iter().zip(PLANT) {
            assert!((got - want).abs() < 1e-9, "{weeks}: {got} vs {want}");
        }
        assert!((fit.post_slope.coef - (PLANT[1] + PLANT[3])).abs() < 1e-9);
        assert!((fit.piecewise_post_slope.coef - (PLANT[1] + PLANT[3])).abs() < 1e-9);
    }
}

#[test]
fn noisy_series_intervals_cover_truth() {
    let mut covered = [0; 4];
    let mut joint = 0;
    for seed in 0..100 {
        let obs = its_planted(200, PLANT, 0.01, ItsWindow::default(), seed);
        let fit = fit_its(&obs, Scope::Inside, false).unwrap();
        let hits: Vec<bool> = fit.coefficients.iter().zip(PLANT).map(|(r, b)| r.covers(b)).collect();
        for (c, h) in covered.iter_mut().zip(&hits) {
            *c += usize::from(*h);
        }
        joint += usize::from(hits.iter().all(|&h| h));
    }
    assert!(covered.iter().all(|&c| c >= 90), "{covered:?} joint {joint}");
}

#[test]
fn cluster_robust_option_runs() {
    let obs = its_planted(50, PLANT, 0.01, ItsWindow::default(), 3);
    let fit = fit_its(&obs, Scope::Outside, true).unwrap();
    assert!(fit.cluster_robust);
    assert!(fit.coefficients.iter().all(|r| r.std_err.is_finite() && (0.0..=1.0).contains(&r.p)));
}

#[test]
fn encoded_users_have_full_windows() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t0 = 1_550_000_000;
    let events: Vec<UserEvent> = (0..40)
        .map(|u| UserEvent {
            user: format!("u{u}"),
            intervention: t0,
            contributions: (0..60)
                .map(|_| Contribution { time: t0 + rng.random_range(-20 * WEEK..20 * WEEK), inside: rng.random_bool(0.7) })
                .collect(),
        })
        .collect();
    let window = ItsWindow::default();
    let (obs, excluded) = encode_all(&events, window, Scope::Inside);
    assert_eq!(obs.len() + excluded.len() * window.weeks(), events.len() * window.weeks());
    assert!(obs.iter().all(|o| (o.d == 1) == (o.p >= 1)));
    for e in &events {
        let mine: Vec<_> = obs.iter().filter(|o| o.user == e.user).collect();
        assert!(mine.is_empty() || mine.len() == window.weeks());
        assert!(mine.windows(2).all(|w| w[0].t < w[1].t));
    }
}

#[test]
fn dissonance_index_is_monotone_in_d() {
    for b in 0..20 {
        let mut prev = -1.0;
        for d in 0..40 {
            if let Some(v) = dissonance_index(d, b).unwrap() {
                assert!(v >= prev && (0.0..=1.0).contains(&v));
                prev = v;
            }
        }
    }
}

#[test]
fn negbin_recovers_planted_coefficients() {
    let beta = [3.6, -0.06, 0.04, -0.03];
    let names: Vec<String> = ["const", "x1", "x2", "x3"].map(String::from).to_vec();
    let mut within = [0; 4];
    for seed in 0..100 {
        let (x, y) = count_regression(2000, &beta, 0.3, seed);
        let (fit, _) = negbin(&x, &y, &names).unwrap();
        for j in 0..4 {
            let se = fit.cov[(j, j)].sqrt();
            within[j] += usize::from((fit.coef[j] - beta[j]).abs() <= 2.0 * se);
        }
    }
    assert!(within.iter().all(|&w| w >= 90), "{within:?}");
}

#[test]
fn poisson_data_gives_small_alpha() {
    let names: Vec<String> = ["const", "x1", "x2", "x3"].map(String::from).to_vec();
    let (x, y) = count_regression(5000, &[1.5, 0.2, -0.1, 0.05], 0.0, 11);
    let (_, alpha) = negbin(&x, &y, &names).unwrap();
    assert!(alpha.coef < 0.05, "{}", alpha.coef);
}

#[test]
fn tenure_regressors_are_standardized() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let records: Vec<TenureRecord> = (0..300)
        .map(|i| TenureRecord {
            user: format!("u{i}"),
            belief: rng.random_range(0..10),
            dissonance: rng.random_range(0..10),
            avg_d: Some(rng.random_range(0.0..1.0)),
            max_d: Some(rng.random_range(0.0..1.0)),
            min_score: rng.random_range(-5..3),
            avg_score: rng.random_range(0.0..10.0),
            max_score: rng.random_range(5..50),
            born: rng.random_range(0..1_000_000),
            created: rng.random_range(1_000_000..2_000_000),
            remaining_days: rng.random_range(0..100),
            remaining_comments: rng.random_range(0..500),
            remains_after_days: rng.random_bool(0.5),
            censored: i % 10 == 0,
        })
        .collect();
    let all = Regressor::defaults(canonlab_core::engagement::ModelKind::Ols);
    let d = tenure_design(&records, &all).unwrap();
    assert_eq!(d.x.nrows(), 270);
    for j in 1..d.x.ncols() {
        let col: Vec<f64> = d.x.column(j).iter().copied().collect();
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let v = col.iter().map(|c| (c - m).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(m.abs() < 1e-9 && (v - 1.0).abs() < 1e-9, "{}: {m} {v}", d.names[j]);
    }
}
