//! Active learning over unlabeled pools, the two final tree classifiers,
//! and pooling of their predictions.

mod active;
mod grid;
mod logistic;
mod tree;

pub use active::{ActiveConfig, ActiveSession, MetricPoint, MetricSource, Next, SelectionStrategy};
pub use grid::{
    adjusted_balanced_accuracy, grid_search, stratified_folds, GbtGrid, GridResult, Hyper, RfGrid, TraceEntry,
};
pub use logistic::{LogisticConfig, LogisticModel};
pub use tree::{GbtModel, GbtParams, RandomForest, RfParams};

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::Label;
use crate::stats::argmax;

pub use crate::stats::entropy;

pub const N_CLASSES: usize = 3;

/// Probabilities over belief, dissonance, neutral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution(pub [f64; 3]);

impl ClassDistribution {
    pub fn new(p: [f64; 3]) -> Result<Self> {
        if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("not a probability distribution: {p:?}")));
        }
        Ok(ClassDistribution(p))
    }

    pub fn uniform() -> Self {
        ClassDistribution([1.0 / 3.0; 3])
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.0)
    }

    pub fn argmax(&self) -> Label {
        Label::from_index(argmax(&self.0))
    }
}

/// A fitted three-class probabilistic model.
pub trait Classifier: Send + Sync {
    fn predict_proba(&self, x: &[f64]) -> [f64; 3];
}

/// Labeled rows. `y` holds class indices in `Label` order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset { x: idx.iter().map(|&i| self.x[i].clone()).collect(), y: idx.iter().map(|&i| self.y[i]).collect() }
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for &y in &self.y {
            c[y] += 1;
        }
        c
    }

    /// Error unless all three classes are present.
    pub fn require_all_classes(&self, what: &str) -> Result<()> {
        let c = self.class_counts();
        if let Some(missing) = (0..N_CLASSES).find(|&k| c[k] == 0) {
            return Err(Error::MissingClass(format!("{what} has no {} examples", Label::from_index(missing))));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolingStrategy {
    Consensus,
    Max,
    Average,
    Stacking,
}

impl FromStr for PoolingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "consensus" => Ok(PoolingStrategy::Consensus),
            "max" => Ok(PoolingStrategy::Max),
            "average" | "avg" => Ok(PoolingStrategy::Average),
            "stacking" => Ok(PoolingStrategy::Stacking),
            other => Err(Error::invalid(format!("unknown pooling strategy {other:?}"))),
        }
    }
}

impl fmt::Display for PoolingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PoolingStrategy::Consensus => "consensus",
            PoolingStrategy::Max => "max",
            PoolingStrategy::Average => "average",
            PoolingStrategy::Stacking => "stacking",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Belief,
    Dissonance,
    Neutral,
    Abstain,
}

impl From<Label> for Outcome {
    fn from(l: Label) -> Self {
        match l {
            Label::Belief => Outcome::Belief,
            Label::Dissonance => Outcome::Dissonance,
            Label::Neutral => Outcome::Neutral,
        }
    }
}

impl Outcome {
    pub fn label(self) -> Option<Label> {
        match self {
            Outcome::Belief => Some(Label::Belief),
            Outcome::Dissonance => Some(Label::Dissonance),
            Outcome::Neutral => Some(Label::Neutral),
            Outcome::Abstain => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub a: ClassDistribution,
    pub b: ClassDistribution,
    pub outcome: Outcome,
    pub strategy: PoolingStrategy,
}

/// Combine two model outputs. Stacking needs the third model and the
/// comment's feature row.
pub fn pool_predictions(
    a: ClassDistribution,
    b: ClassDistribution,
    strategy: PoolingStrategy,
    stack: Option<(&dyn Classifier, &[f64])>,
) -> Result<EnsemblePrediction> {
    let outcome = match strategy {
        PoolingStrategy::Consensus => {
            let (la, lb) = (a.argmax(), b.argmax());
            if la == lb {
                la.into()
            } else {
                Outcome::Abstain
            }
        }
        PoolingStrategy::Max => {
            let (ia, ib) = (argmax(&a.0), argmax(&b.0));
            let pick = if b.0[ib] > a.0[ia] { ib } else { ia };
            Label::from_index(pick).into()
        }
        PoolingStrategy::Average => {
            let avg: Vec<f64> = (0..N_CLASSES).map(|k| (a.0[k] + b.0[k]) / 2.0).collect();
            Label::from_index(argmax(&avg)).into()
        }
        PoolingStrategy::Stacking => {
            let (model, features) =
                stack.ok_or_else(|| Error::invalid("stacking needs a trained stacker and the feature row"))?;
            Label::from_index(argmax(&model.predict_proba(&stack_row(&a, &b, features)))).into()
        }
    };
    Ok(EnsemblePrediction { a, b, outcome, strategy })
}

/// Stacker input: both distributions followed by the feature row.
pub fn stack_row(a: &ClassDistribution, b: &ClassDistribution, features: &[f64]) -> Vec<f64> {
    let mut r = Vec::with_capacity(6 + features.len());
    r.extend_from_slice(&a.0);
    r.extend_from_slice(&b.0);
    r.extend_from_slice(features);
    r
}

/// Per-class metrics over non-abstained predictions. Undefined values are
/// `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n: usize,
    pub abstained: usize,
    pub abstention_rate: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: [[usize; 3]; 3],
    pub precision: [Option<f64>; 3],
    pub recall: [Option<f64>; 3],
    pub balanced_accuracy: Option<f64>,
    pub adjusted_balanced_accuracy: Option<f64>,
}

impl Evaluation {
    /// True when every class has precision and recall of at least `tau`.
    pub fn meets(&self, tau: f64) -> bool {
        self.precision.iter().chain(&self.recall).all(|m| m.is_some_and(|v| v >= tau))
    }
}

pub fn evaluate(truth: &[Label], predicted: &[Outcome]) -> Result<Evaluation> {
    if truth.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    if truth.len() != predicted.len() {
        return Err(Error::invalid("truth and predictions differ in length"));
    }
    let mut confusion = [[0usize; 3]; 3];
    let mut abstained = 0;
    for (t, p) in truth.iter().zip(predicted) {
        match p.label() {
            Some(l) => confusion[t.index()][l.index()] += 1,
            None => abstained += 1,
        }
    }
    let mut precision = [None; 3];
    let mut recall = [None; 3];
    for k in 0..N_CLASSES {
        let tp = confusion[k][k] as f64;
        let pred_k: usize = (0..N_CLASSES).map(|t| confusion[t][k]).sum();
        let true_k: usize = confusion[k].iter().sum();
        if pred_k > 0 {
            precision[k] = Some(tp / pred_k as f64);
        }
        if true_k > 0 {
            recall[k] = Some(tp / true_k as f64);
        }
    }
    let defined: Vec<f64> = recall.iter().flatten().copied().collect();
    let balanced_accuracy = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(Evaluation {
        n: truth.len(),
        abstained,
        abstention_rate: abstained as f64 / truth.len() as f64,
        confusion,
        precision,
        recall,
        balanced_accuracy,
        adjusted_balanced_accuracy: balanced_accuracy.map(adjusted_balanced_accuracy),
    })
}

/// One line of a prediction dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub comment_id: String,
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub outcome: Outcome,
    pub strategy: PoolingStrategy,
}

pub fn write_predictions<W: Write>(mut w: W, records: &[PredictionRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_predictions<R: BufRead>(r: R) -> Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok(out)
}

/// Serialized model with the metadata needed to reuse it safely.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub version: u32,
    pub family: String,
    pub hyperparameters: serde_json::Value,
    pub schema_hash: String,
    pub seed: u64,
    pub standardizer: Option<crate::stats::Standardizer>,
    pub model: TrainedModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Forest(RandomForest),
    Gbt(GbtModel),
    Logistic(LogisticModel),
}

impl Classifier for TrainedModel {
    fn predict_proba(&self, x: &[f64]) -> [f64; 3] {
        match self {
            TrainedModel::Forest(m) => m.predict_proba(x),
            TrainedModel::Gbt(m) => m.predict_proba(x),
            TrainedModel::Logistic(m) => m.predict_proba(x),
        }
    }
}

impl Classifier for ModelArtifact {
    fn predict_proba(&self, x: &[f64]) -> [f64; 3] {
        match &self.standardizer {
            Some(s) => self.model.predict_proba(&s.transform_row(x)),
            None => self.model.predict_proba(x),
        }
    }
}

pub const MODEL_FORMAT: &str = "canonlab-model";
pub const MODEL_VERSION: u32 = 1;

impl ModelArtifact {
    pub fn new(model: TrainedModel, hyperparameters: serde_json::Value, schema_hash: &str, seed: u64) -> Self {
        let family = match &model {
            TrainedModel::Forest(_) => "random_forest",
            TrainedModel::Gbt(_) => "gradient_boosted_trees",
            TrainedModel::Logistic(_) => "logistic",
        };
        ModelArtifact {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            family: family.into(),
            hyperparameters,
            schema_hash: schema_hash.into(),
            seed,
            standardizer: None,
            model,
        }
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn read<R: BufRead>(r: R, expected_schema: Option<&str>) -> Result<Self> {
        let m: ModelArtifact = serde_json::from_reader(r)?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(Error::Version {
                expected: format!("{MODEL_FORMAT} v{MODEL_VERSION}"),
                found: format!("{} v{}", m.format, m.version),
            });
        }
        if let Some(s) = expected_schema {
            if s != m.schema_hash {
                return Err(Error::Schema(format!("model trained on schema {}, features are {s}", m.schema_hash)));
            }
        }
        Ok(m)
    }
}

/// Fit the random-forest model on the random-pool labels and the boosted
/// model on the biased-pool labels, each tuned by grid search.
pub fn train_final(
    random: &Dataset,
    biased: &Dataset,
    rf_grid: &RfGrid,
    gbt_grid: &GbtGrid,
    folds: usize,
    seed: u64,
) -> Result<((RandomForest, GridResult), (GbtModel, GridResult))> {
    random.require_all_classes("random-pool training set")?;
    biased.require_all_classes("biased-pool training set")?;
    let rf_points: Vec<Hyper> = rf_grid.points().into_iter().map(Hyper::Rf).collect();
    let gbt_points: Vec<Hyper> = gbt_grid.points().into_iter().map(Hyper::Gbt).collect();
    let rf_search = grid_search(random, &rf_points, folds, seed)?;
    let gbt_search = grid_search(biased, &gbt_points, folds, seed)?;
    let Hyper::Rf(rp) = rf_search.best.clone() else { unreachable!("rf grid holds rf points") };
    let Hyper::Gbt(gp) = gbt_search.best.clone() else { unreachable!("gbt grid holds gbt points") };
    let rf = RandomForest::fit(random, &rp, seed);
    let gbt = GbtModel::fit(biased, &gp);
    Ok(((rf, rf_search), (gbt, gbt_search)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(p: [f64; 3]) -> ClassDistribution {
        ClassDistribution::new(p).unwrap()
    }

    #[test]
    fn distribution_validated() {
        assert!(ClassDistribution::new([0.5, 0.5, 0.1]).is_err());
        assert!(ClassDistribution::new([1.2, -0.2, 0.0]).is_err());
    }

    #[test]
    fn consensus_and_abstain() {
        let a = d([0.1, 0.8, 0.1]);
        let b = d([0.2, 0.5, 0.3]);
        assert_eq!(pool_predictions(a, b, PoolingStrategy::Consensus, None).unwrap().outcome, Outcome::Dissonance);
        let a = d([0.7, 0.2, 0.1]);
        let b = d([0.1, 0.2, 0.7]);
        assert_eq!(pool_predictions(a, b, PoolingStrategy::Consensus, None).unwrap().outcome, Outcome::Abstain);
    }

    #[test]
    fn max_rule() {
        let a = d([0.6, 0.3, 0.1]);
        let b = d([0.2, 0.7, 0.1]);
        assert_eq!(pool_predictions(a, b, PoolingStrategy::Max, None).unwrap().outcome, Outcome::Dissonance);
    }

    #[test]
    fn average_symmetric() {
        let a = d([0.5, 0.4, 0.1]);
        let b = d([0.1, 0.6, 0.3]);
        let ab = pool_predictions(a, b, PoolingStrategy::Average, None).unwrap().outcome;
        let ba = pool_predictions(b, a, PoolingStrategy::Average, None).unwrap().outcome;
        assert_eq!(ab, ba);
        assert_eq!(ab, Outcome::Dissonance);
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("MAX".parse::<PoolingStrategy>().unwrap(), PoolingStrategy::Max);
        assert!("vote".parse::<PoolingStrategy>().is_err());
        assert!(pool_predictions(d([1.0, 0.0, 0.0]), d([1.0, 0.0, 0.0]), PoolingStrategy::Stacking, None).is_err());
    }

    #[test]
    fn perfect_and_abstained_evaluations() {
        let t = [Label::Belief, Label::Dissonance, Label::Neutral];
        let p: Vec<Outcome> = t.iter().map(|&l| l.into()).collect();
        let e = evaluate(&t, &p).unwrap();
        assert_eq!(e.precision, [Some(1.0); 3]);
        assert_eq!(e.recall, [Some(1.0); 3]);
        assert_eq!(e.adjusted_balanced_accuracy, Some(1.0));
        let e = evaluate(&t, &[Outcome::Abstain; 3]).unwrap();
        assert_eq!(e.abstention_rate, 1.0);
        assert_eq!(e.precision, [None; 3]);
        assert_eq!(e.balanced_accuracy, None);
        assert!(evaluate(&[], &[]).is_err());
    }

    #[test]
    fn confusion_oracle() {
        use Label::*;
        let truth = [Belief, Belief, Belief, Dissonance, Dissonance, Neutral, Neutral, Neutral];
        let pred = [
            Outcome::Belief,
            Outcome::Belief,
            Outcome::Neutral,
            Outcome::Dissonance,
            Outcome::Abstain,
            Outcome::Neutral,
            Outcome::Belief,
            Outcome::Neutral,
        ];
        let e = evaluate(&truth, &pred).unwrap();
        assert_eq!(e.confusion, [[2, 0, 1], [0, 1, 0], [1, 0, 2]]);
        assert_eq!(e.precision, [Some(2.0 / 3.0), Some(1.0), Some(2.0 / 3.0)]);
        assert_eq!(e.recall, [Some(2.0 / 3.0), Some(1.0), Some(2.0 / 3.0)]);
        assert_eq!(e.abstained, 1);
        let ba = (2.0 / 3.0 + 1.0 + 2.0 / 3.0) / 3.0;
        assert!((e.balanced_accuracy.unwrap() - ba).abs() < 1e-15);
    }
}
