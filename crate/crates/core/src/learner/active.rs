use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::stratified_folds;
use super::{evaluate, Classifier, ClassDistribution, Dataset, Evaluation, LogisticConfig, LogisticModel, Outcome};
use crate::error::{Error, Result};
use crate::sampling::Label;
use crate::stats::{argmax, entropy, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionStrategy {
    Uncertainty,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActiveConfig {
    pub eval_interval: usize,
    pub tau: f64,
    /// Share of the pool frozen as held-out at session start.
    pub holdout_fraction: f64,
    pub cv_folds: usize,
    pub seed: u64,
    pub strategy: SelectionStrategy,
    pub logistic: LogisticConfig,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        ActiveConfig {
            eval_interval: 50,
            tau: 0.6,
            holdout_fraction: 0.2,
            cv_folds: 5,
            seed: 0,
            strategy: SelectionStrategy::Uncertainty,
            logistic: LogisticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSource {
    CrossValidated,
    HeldOut,
}

/// Metrics recorded after the `labels`-th label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub labels: usize,
    pub cross_validated: Option<Evaluation>,
    pub held_out: Option<Evaluation>,
    /// Which of the two decided `meets`.
    pub source: Option<MetricSource>,
    pub meets: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Next {
    Item(String),
    Exhausted,
}

/// Uncertainty-sampling loop over one pool. Held-out items are served in
/// proportion to `holdout_fraction` and never train the interim model.
#[derive(Debug, Clone)]
pub struct ActiveSession {
    cfg: ActiveConfig,
    ids: Vec<String>,
    x: Vec<Vec<f64>>,
    position: HashMap<String, usize>,
    holdout: Vec<bool>,
    holdout_order: Vec<usize>,
    labels: Vec<Option<Label>>,
    stream: Vec<(String, Label)>,
    skipped: HashSet<usize>,
    pending: Option<usize>,
    model: Option<LogisticModel>,
    rng: ChaCha8Rng,
    history: Vec<MetricPoint>,
    complete: bool,
    standardizer: Standardizer,
}

impl ActiveSession {
    pub fn new(ids: Vec<String>, features: &[Vec<f64>], cfg: ActiveConfig) -> Result<Self> {
        if ids.is_empty() || ids.len() != features.len() {
            return Err(Error::invalid("pool ids and feature rows must be non-empty and aligned"));
        }
        let position: HashMap<String, usize> = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        if position.len() != ids.len() {
            return Err(Error::invalid("duplicate comment id in pool"));
        }
        let standardizer = Standardizer::fit(features);
        let x = standardizer.transform(features);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.shuffle(&mut rng);
        let n_hold = (cfg.holdout_fraction.clamp(0.0, 1.0) * ids.len() as f64).round() as usize;
        let mut holdout = vec![false; ids.len()];
        let holdout_order: Vec<usize> = order[..n_hold].to_vec();
        holdout_order.iter().for_each(|&i| holdout[i] = true);
        Ok(ActiveSession {
            labels: vec![None; ids.len()],
            cfg,
            ids,
            x,
            position,
            holdout,
            holdout_order,
            stream: Vec::new(),
            skipped: HashSet::new(),
            pending: None,
            model: None,
            rng,
            history: Vec::new(),
            complete: false,
            standardizer,
        })
    }

    pub fn config(&self) -> &ActiveConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn labeled_count(&self) -> usize {
        self.stream.len()
    }

    pub fn stream(&self) -> &[(String, Label)] {
        &self.stream
    }

    pub fn history(&self) -> &[MetricPoint] {
        &self.history
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn pending(&self) -> Option<&str> {
        self.pending.map(|i| self.ids[i].as_str())
    }

    pub fn is_holdout(&self, id: &str) -> bool {
        self.position.get(id).is_some_and(|&i| self.holdout[i])
    }

    pub fn label_of(&self, id: &str) -> Option<Label> {
        self.position.get(id).and_then(|&i| self.labels[i])
    }

    /// Interim predictive distribution on a raw feature row; uniform until
    /// a model exists.
    pub fn predict(&self, features: &[f64]) -> ClassDistribution {
        self.predict_std(&self.standardizer.transform_row(features))
    }

    fn predict_std(&self, x: &[f64]) -> ClassDistribution {
        match &self.model {
            Some(m) => ClassDistribution(m.predict_proba(x)),
            None => ClassDistribution::uniform(),
        }
    }

    pub fn distribution_of(&self, id: &str) -> Option<ClassDistribution> {
        self.position.get(id).map(|&i| self.predict_std(&self.x[i]))
    }

    fn training_set(&self) -> Dataset {
        let mut d = Dataset::default();
        for (i, l) in self.labels.iter().enumerate() {
            if let (Some(l), false) = (l, self.holdout[i]) {
                d.x.push(self.x[i].clone());
                d.y.push(l.index());
            }
        }
        d
    }

    fn holdout_due(&self) -> bool {
        let f = self.cfg.holdout_fraction;
        if f <= 0.0 {
            return false;
        }
        let done = self.labels.iter().enumerate().filter(|(i, l)| l.is_some() && self.holdout[*i]).count();
        (done as f64) < f * (self.stream.len() + 1) as f64
    }

    /// The item to label next. Repeats the pending item until it is labeled
    /// or skipped.
    pub fn next_to_label(&mut self) -> Next {
        if let Some(p) = self.pending {
            return Next::Item(self.ids[p].clone());
        }
        let open = |i: usize| self.labels[i].is_none() && !self.skipped.contains(&i);
        let held = self.holdout_order.iter().copied().find(|&i| open(i));
        let train: Vec<usize> = (0..self.ids.len()).filter(|&i| !self.holdout[i] && open(i)).collect();
        let pick = match (held, train.is_empty()) {
            (Some(h), _) if self.holdout_due() || train.is_empty() => Some(h),
            (_, true) => None,
            _ => Some(self.select(&train)),
        };
        match pick {
            Some(i) => {
                self.pending = Some(i);
                Next::Item(self.ids[i].clone())
            }
            None => Next::Exhausted,
        }
    }

    fn select(&mut self, candidates: &[usize]) -> usize {
        if self.model.is_none() || self.cfg.strategy == SelectionStrategy::Random {
            return candidates[self.rng.random_range(0..candidates.len())];
        }
        let mut best = candidates[0];
        let mut best_h = f64::NEG_INFINITY;
        for &i in candidates {
            let h = entropy(&self.predict_std(&self.x[i]).0);
            if h > best_h || (h == best_h && self.ids[i] < self.ids[best]) {
                best = i;
                best_h = h;
            }
        }
        best
    }

    /// Set aside the pending item for the rest of the session.
    pub fn skip(&mut self, id: &str) -> Result<()> {
        let i = self.expect_pending(id)?;
        self.skipped.insert(i);
        self.pending = None;
        Ok(())
    }

    fn expect_pending(&self, id: &str) -> Result<usize> {
        let &i = self.position.get(id).ok_or_else(|| Error::NotPending(id.to_string()))?;
        if self.labels[i].is_some() {
            return Err(Error::AlreadyLabeled(id.to_string()));
        }
        if self.pending != Some(i) {
            return Err(Error::NotPending(id.to_string()));
        }
        Ok(i)
    }

    pub fn submit_label(&mut self, id: &str, label: Label) -> Result<()> {
        let i = self.expect_pending(id)?;
        self.labels[i] = Some(label);
        self.stream.push((id.to_string(), label));
        self.pending = None;
        if !self.holdout[i] {
            self.retrain();
        }
        if self.cfg.eval_interval > 0 && self.stream.len().is_multiple_of(self.cfg.eval_interval) {
            let point = self.measure();
            self.complete |= point.meets;
            self.history.push(point);
        }
        Ok(())
    }

    fn retrain(&mut self) {
        let data = self.training_set();
        let seen = data.class_counts().iter().filter(|&&c| c > 0).count();
        if seen < 2 {
            return;
        }
        let init = self.model.take().unwrap_or_else(|| LogisticModel::zeros(self.x[0].len()));
        self.model = Some(LogisticModel::fit_from(init, &data, &self.cfg.logistic));
    }

    fn measure(&self) -> MetricPoint {
        let data = self.training_set();
        let k = self.cfg.cv_folds;
        let cross_validated = (data.len() >= k && k >= 2).then(|| {
            let fold = stratified_folds(&data.y, k, self.cfg.seed);
            let mut truth = Vec::with_capacity(data.len());
            let mut pred = Vec::with_capacity(data.len());
            for f in 0..k {
                let train: Vec<usize> = (0..data.len()).filter(|&i| fold[i] != f).collect();
                let m = LogisticModel::fit(&data.subset(&train), &self.cfg.logistic);
                for i in (0..data.len()).filter(|&i| fold[i] == f) {
                    truth.push(Label::from_index(data.y[i]));
                    pred.push(Outcome::from(Label::from_index(argmax(&m.predict_proba(&data.x[i])))));
                }
            }
            evaluate(&truth, &pred)
        });
        let cross_validated = cross_validated.and_then(|r| r.ok());
        let held: Vec<usize> = self.holdout_order.iter().copied().filter(|&i| self.labels[i].is_some()).collect();
        let held_out = (!held.is_empty())
            .then(|| {
                let truth: Vec<Label> = held.iter().filter_map(|&i| self.labels[i]).collect();
                let pred: Vec<Outcome> = held.iter().map(|&i| self.predict_std(&self.x[i]).argmax().into()).collect();
                evaluate(&truth, &pred).ok()
            })
            .flatten();
        let held_covers = held_out.as_ref().is_some_and(|e| e.confusion.iter().all(|row| row.iter().sum::<usize>() > 0));
        let (source, meets) = if held_covers {
            (Some(MetricSource::HeldOut), held_out.as_ref().is_some_and(|e| e.meets(self.cfg.tau)))
        } else if let Some(cv) = &cross_validated {
            (Some(MetricSource::CrossValidated), cv.meets(self.cfg.tau))
        } else {
            (None, false)
        };
        MetricPoint { labels: self.stream.len(), cross_validated, held_out, source, meets }
    }

    /// Rebuild a session by feeding a recorded label stream back through
    /// `next_to_label` and `submit_label`.
    pub fn replay(
        ids: Vec<String>,
        features: &[Vec<f64>],
        cfg: ActiveConfig,
        stream: &[(String, Label)],
    ) -> Result<Self> {
        let mut s = ActiveSession::new(ids, features, cfg)?;
        for (id, label) in stream {
            match s.next_to_label() {
                Next::Item(next) if &next == id => s.submit_label(id, *label)?,
                _ => return Err(Error::NotPending(id.clone())),
            }
        }
        Ok(s)
    }
}
