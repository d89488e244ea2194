use canonlab_core::learner::{
    entropy, evaluate, grid_search, pool_predictions, train_final, ActiveConfig, ClassDistribution, Classifier,
    Dataset, GbtGrid, Hyper, ModelArtifact, Outcome, PoolingStrategy, RfGrid, SelectionStrategy, TrainedModel,
};
use canonlab_core::sampling::Label;
use canonlab_core::synth::{labels_to_target, separable_pool};
use canonlab_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_distribution(rng: &mut ChaCha8Rng) -> ClassDistribution {
    let raw: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
    let s: f64 = raw.iter().sum();
    let mut p = raw.map(|v| v / s);
    p[2] = 1.0 - p[0] - p[1];
    ClassDistribution(p)
}

fn plain_argmax(p: &[f64; 3]) -> usize {
    let mut best = 0;
    for k in 1..3 {
        if p[k] > p[best] {
            best = k;
        }
    }
    best
}

#[test]
fn consensus_abstains_exactly_on_disagreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let a = random_distribution(&mut rng);
        let b = random_distribution(&mut rng);
        let e = pool_predictions(a, b, PoolingStrategy::Consensus, None).unwrap();
        let disagree = plain_argmax(&a.0) != plain_argmax(&b.0);
        assert_eq!(e.outcome == Outcome::Abstain, disagree);
        let avg = pool_predictions(a, b, PoolingStrategy::Average, None).unwrap().outcome;
        assert_eq!(avg, pool_predictions(b, a, PoolingStrategy::Average, None).unwrap().outcome);
    }
}

#[test]
fn entropy_extremes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let max = entropy(&[1.0 / 3.0; 3]);
    for _ in 0..1000 {
        let d = random_distribution(&mut rng);
        assert!(d.entropy() <= max + 1e-12);
    }
    assert_eq!(entropy(&[0.0, 1.0, 0.0]), 0.0);
}

#[test]
fn uncertainty_sampling_needs_fewer_labels() {
    let mut active = Vec::new();
    let mut random = Vec::new();
    for seed in 0..20 {
        let pool = separable_pool(1000, 0.05, 5, seed);
        let base = ActiveConfig { holdout_fraction: 0.0, seed, ..ActiveConfig::default() };
        let us = ActiveConfig { strategy: SelectionStrategy::Uncertainty, ..base.clone() };
        let rs = ActiveConfig { strategy: SelectionStrategy::Random, ..base };
        active.push(labels_to_target(&pool, us, 0.6, 1000).unwrap().unwrap_or(1000));
        random.push(labels_to_target(&pool, rs, 0.6, 1000).unwrap().unwrap_or(1000));
    }
    active.sort_unstable();
    random.sort_unstable();
    let median = |v: &[usize]| (v[9] + v[10]) as f64 / 2.0;
    assert!(median(&active) <= 0.75 * median(&random), "active {active:?} random {random:?}");
}

fn blobs(n: usize, seed: u64, classes: usize) -> Dataset {
    let pool = separable_pool(n, 0.2, 4, seed);
    let mut d = Dataset::default();
    for (x, y) in pool.x.into_iter().zip(pool.y) {
        if y.index() < classes {
            d.x.push(x);
            d.y.push(y.index());
        }
    }
    d
}

#[test]
fn final_models_and_trace() {
    let random = blobs(150, 1, 3);
    let biased = blobs(150, 2, 3);
    let rf_grid = RfGrid { n_trees: vec![10], max_depth: vec![2, 6], min_samples_leaf: vec![1], ..RfGrid::default() };
    let gbt_grid = GbtGrid { n_rounds: vec![5, 20], max_depth: vec![2], ..GbtGrid::default() };
    let ((rf, rf_trace), (gbt, gbt_trace)) = train_final(&random, &biased, &rf_grid, &gbt_grid, 5, 3).unwrap();
    for trace in [&rf_trace, &gbt_trace] {
        assert!(trace.trace.iter().all(|t| trace.best_score >= t.mean_score));
        let best = trace.trace.iter().find(|t| t.hyper == trace.best).unwrap();
        assert_eq!(best.mean_score, trace.best_score);
    }
    let truth: Vec<Label> = random.y.iter().map(|&y| Label::from_index(y)).collect();
    let pred: Vec<Outcome> = random
        .x
        .iter()
        .map(|x| {
            let a = ClassDistribution(rf.predict_proba(x));
            let b = ClassDistribution(gbt.predict_proba(x));
            pool_predictions(a, b, PoolingStrategy::Consensus, None).unwrap().outcome
        })
        .collect();
    let e = evaluate(&truth, &pred).unwrap();
    assert!(e.meets(0.9), "{e:?}");

    let art = ModelArtifact::new(TrainedModel::Forest(rf.clone()), serde_json::to_value(&rf.params).unwrap(), "abc", 3);
    let mut buf = Vec::new();
    art.write(&mut buf).unwrap();
    let back = ModelArtifact::read(buf.as_slice(), Some("abc")).unwrap();
    assert_eq!(back.predict_proba(&random.x[0]), rf.predict_proba(&random.x[0]));
    assert!(matches!(ModelArtifact::read(buf.as_slice(), Some("other")), Err(Error::Schema(_))));
}

#[test]
fn missing_class_is_an_error() {
    let two = blobs(100, 1, 2);
    let three = blobs(100, 2, 3);
    let r = train_final(&two, &three, &RfGrid::default(), &GbtGrid::default(), 5, 0);
    assert!(matches!(r, Err(Error::MissingClass(_))));
}

#[test]
fn grid_search_is_deterministic() {
    let data = blobs(90, 4, 3);
    let points: Vec<Hyper> = RfGrid { n_trees: vec![5], max_depth: vec![1, 3], min_samples_leaf: vec![1], ..RfGrid::default() }
        .points()
        .into_iter()
        .map(Hyper::Rf)
        .collect();
    assert_eq!(grid_search(&data, &points, 5, 8).unwrap(), grid_search(&data, &points, 5, 8).unwrap());
}
