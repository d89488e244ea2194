use canonlab_core::features::{Family, Slot};
use canonlab_core::importance::{fit_importance, fit_multitask, lambda_max, Design, ImportanceConfig};
use canonlab_core::lexicon::{dimension_tag, Lexicon, Provenance};
use canonlab_core::sampling::Label;
use canonlab_core::stats::standardize;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const PLANTED: usize = 7;

fn slots(p: usize) -> Vec<Slot> {
    (0..p)
        .map(|j| Slot { name: format!("f{j:02}"), family: Family::Category, normalization: "raw".into(), tag: "LEX".into() })
        .collect()
}

fn planted(n: usize, p: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let label = Label::from_index(i % 3);
        let mut r: Vec<f64> = (0..p).map(|_| noise.sample(&mut rng)).collect();
        r[PLANTED] = if label == Label::Dissonance { 1.0 + 0.3 * noise.sample(&mut rng) } else { 0.0 };
        rows.push(r);
        labels.push(label);
    }
    (rows, labels)
}

#[test]
fn planted_feature_ranks_first_for_its_class() {
    let cfg = ImportanceConfig { n_lambdas: 30, ..ImportanceConfig::default() };
    let mut hits = 0;
    for seed in 0..20 {
        let (rows, labels) = planted(150, 20, seed);
        let report = fit_importance(&rows, &labels, &slots(20), &ImportanceConfig { seed, ..cfg.clone() }).unwrap();
        assert!(report.lambda_path.contains(&report.lambda));
        let top = report.top_features(Label::Dissonance, 3);
        if top.first().is_some_and(|f| f.slot == format!("f{PLANTED:02}") && f.coefficient > 0.0) {
            hits += 1;
        }
    }
    assert!(hits >= 18, "{hits}/20");
}

fn centered_design(seed: u64, n: usize, p: usize) -> (Design, Vec<Vec<f64>>, Vec<[f64; 3]>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let rows = standardize(&raw);
    let mut y: Vec<[f64; 3]> = (0..n).map(|i| std::array::from_fn(|k| if i % 3 == k { 1.0 } else { 0.0 })).collect();
    for k in 0..3 {
        let m = y.iter().map(|r| r[k]).sum::<f64>() / n as f64;
        y.iter_mut().for_each(|r| r[k] -= m);
    }
    (Design::from_rows(&rows), rows, y)
}

#[test]
fn vanishing_penalty_matches_least_squares() {
    let (x, rows, y) = centered_design(3, 60, 5);
    let fit = fit_multitask(&x, &y, 1e-10, 0.5, None, 100_000, 1e-12);
    let a = DMatrix::from_fn(60, 5, |i, j| rows[i][j]);
    for k in 0..3 {
        let b = DVector::from_fn(60, |i, _| y[i][k]);
        let ols = (a.transpose() * &a).lu().solve(&(a.transpose() * b)).unwrap();
        for j in 0..5 {
            assert!((fit.coef[j][k] - ols[j]).abs() < 1e-4, "{} vs {}", fit.coef[j][k], ols[j]);
        }
    }
}

#[test]
fn objective_never_increases() {
    let (x, _, y) = centered_design(9, 80, 12);
    for rho in [0.2, 0.5, 1.0] {
        let lam = 0.05 * lambda_max(&x, &y, rho);
        let fit = fit_multitask(&x, &y, lam, rho, None, 10_000, 1e-9);
        assert!(fit.objective.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{:?}", fit.objective);
    }
}

#[test]
fn strong_penalty_reports_nothing() {
    let (rows, labels) = planted(60, 10, 1);
    let cfg = ImportanceConfig { n_lambdas: 1, ..ImportanceConfig::default() };
    let report = fit_importance(&rows, &labels, &slots(10), &cfg).unwrap();
    for class in Label::ALL {
        assert!(report.top_features(class, 5).is_empty());
    }
}

#[test]
fn bad_inputs_rejected() {
    let (mut rows, labels) = planted(30, 8, 2);
    let single = vec![Label::Belief; 30];
    assert!(fit_importance(&rows, &single, &slots(8), &ImportanceConfig::default()).is_err());
    rows[3][1] = f64::NAN;
    assert!(fit_importance(&rows, &labels, &slots(8), &ImportanceConfig::default()).is_err());
}

#[test]
fn canon_slots_carry_dimension_tags() {
    let mut lex = Lexicon::new();
    lex.insert("deep state", &["foes".to_string()], Provenance::Seed).unwrap();
    lex.insert("patriots", &["heroes".to_string()], Provenance::Seed).unwrap();
    let schema = canonlab_core::features::FeatureSchema::new(&lex, &canonlab_core::features::CategoryLexica::builtin());
    let (rows, labels) = planted(90, schema.len(), 5);
    let mut rows = rows;
    let hero = schema.index_of("canon:patriots").unwrap();
    for (r, l) in rows.iter_mut().zip(&labels) {
        r[hero] = if *l == Label::Belief { 2.0 } else { 0.0 };
    }
    let report = fit_importance(&rows, &labels, &schema.slots, &ImportanceConfig { n_lambdas: 20, ..Default::default() }).unwrap();
    let top = report.top_features(Label::Belief, 1);
    assert_eq!(top[0].slot, "canon:patriots");
    assert_eq!(top[0].tag, dimension_tag("heroes"));
    assert_eq!(top[0].tag, "HERO");
}
