use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::MaxFeatures;
use super::{evaluate, Classifier, Dataset, GbtModel, GbtParams, Outcome, RandomForest, RfParams, N_CLASSES};
use crate::error::{Error, Result};
use crate::sampling::Label;
use crate::stats::argmax;

/// Balanced accuracy rescaled so chance (1/3) is 0 and perfect is 1.
pub fn adjusted_balanced_accuracy(ba: f64) -> f64 {
    (3.0 * ba - 1.0) / 2.0
}

/// Fold index per example. Each class is shuffled and dealt round-robin,
/// continuing where the previous class stopped.
pub fn stratified_folds(y: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; y.len()];
    let mut next = 0;
    for c in 0..N_CLASSES {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Hyper {
    Rf(RfParams),
    Gbt(GbtParams),
}

impl Hyper {
    pub fn fit(&self, data: &Dataset, seed: u64) -> Box<dyn Classifier> {
        match self {
            Hyper::Rf(p) => Box::new(RandomForest::fit(data, p, seed)),
            Hyper::Gbt(p) => Box::new(GbtModel::fit(data, p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfGrid {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
}

impl Default for RfGrid {
    fn default() -> Self {
        RfGrid {
            n_trees: vec![100],
            max_depth: vec![6, 12],
            min_samples_leaf: vec![1, 5],
            max_features: vec![MaxFeatures::Sqrt, MaxFeatures::Fraction(0.3)],
        }
    }
}

impl RfGrid {
    pub fn points(&self) -> Vec<RfParams> {
        let mut out = Vec::new();
        for &n_trees in &self.n_trees {
            for &max_depth in &self.max_depth {
                for &min_samples_leaf in &self.min_samples_leaf {
                    for &max_features in &self.max_features {
                        out.push(RfParams { n_trees, max_depth, min_samples_leaf, max_features });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtGrid {
    pub n_rounds: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub lambda: Vec<f64>,
    pub min_child_weight: Vec<f64>,
}

impl Default for GbtGrid {
    fn default() -> Self {
        GbtGrid {
            n_rounds: vec![50, 150],
            learning_rate: vec![0.1],
            max_depth: vec![3, 6],
            lambda: vec![1.0],
            min_child_weight: vec![1.0],
        }
    }
}

impl GbtGrid {
    pub fn points(&self) -> Vec<GbtParams> {
        let mut out = Vec::new();
        for &n_rounds in &self.n_rounds {
            for &learning_rate in &self.learning_rate {
                for &max_depth in &self.max_depth {
                    for &lambda in &self.lambda {
                        for &min_child_weight in &self.min_child_weight {
                            out.push(GbtParams { n_rounds, learning_rate, max_depth, lambda, min_child_weight });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub hyper: Hyper,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

/// Search outcome with one trace entry per grid point, in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub folds: usize,
    pub seed: u64,
    pub best: Hyper,
    pub best_score: f64,
    pub trace: Vec<TraceEntry>,
}

impl GridResult {
    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// Cross-validated adjusted balanced accuracy of one configuration.
/// A fold with no defined score counts as -0.5, the floor of the scale.
pub fn cv_scores(data: &Dataset, hyper: &Hyper, fold: &[usize], k: usize, seed: u64) -> Vec<f64> {
    (0..k)
        .map(|f| {
            let train: Vec<usize> = (0..data.len()).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..data.len()).filter(|&i| fold[i] == f).collect();
            let model = hyper.fit(&data.subset(&train), seed);
            let truth: Vec<Label> = test.iter().map(|&i| Label::from_index(data.y[i])).collect();
            let pred: Vec<Outcome> =
                test.iter().map(|&i| Label::from_index(argmax(&model.predict_proba(&data.x[i]))).into()).collect();
            evaluate(&truth, &pred).ok().and_then(|e| e.adjusted_balanced_accuracy).unwrap_or(-0.5)
        })
        .collect()
}

/// Exhaustive search; the earliest grid point with the highest mean wins.
pub fn grid_search(data: &Dataset, points: &[Hyper], folds: usize, seed: u64) -> Result<GridResult> {
    if points.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    if folds < 2 || data.len() < folds {
        return Err(Error::invalid(format!("{} examples cannot fill {folds} folds", data.len())));
    }
    let fold = stratified_folds(&data.y, folds, seed);
    let trace: Vec<TraceEntry> = points
        .par_iter()
        .map(|h| {
            let fold_scores = cv_scores(data, h, &fold, folds, seed);
            let mean_score = fold_scores.iter().sum::<f64>() / folds as f64;
            TraceEntry { hyper: h.clone(), fold_scores, mean_score }
        })
        .collect();
    let mut best = 0;
    for (i, t) in trace.iter().enumerate() {
        if t.mean_score > trace[best].mean_score {
            best = i;
        }
    }
    Ok(GridResult { folds, seed, best: trace[best].hyper.clone(), best_score: trace[best].mean_score, trace })
}
