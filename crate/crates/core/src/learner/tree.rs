use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Classifier, Dataset, N_CLASSES};

/// Candidate thresholds per feature are capped at this many.
const MAX_BINS: usize = 64;
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: Vec<f64> },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Binary tree; samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(&self, x: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match &t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

/// Features discretized once per training set: `bins[f][i]` counts the
/// thresholds of feature `f` strictly below `x[i][f]`.
struct Binned {
    bins: Vec<Vec<u16>>,
    thresholds: Vec<Vec<f64>>,
}

impl Binned {
    fn new(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let (bins, thresholds) = (0..d)
            .into_par_iter()
            .map(|f| {
                let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                let mids: Vec<f64> = vals.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
                let thr: Vec<f64> = if mids.len() <= MAX_BINS {
                    mids
                } else {
                    let mut t: Vec<f64> =
                        (1..=MAX_BINS).map(|q| mids[(q * mids.len()) / (MAX_BINS + 1)]).collect();
                    t.dedup();
                    t
                };
                let b = x.iter().map(|r| thr.partition_point(|&t| t < r[f]) as u16).collect();
                (b, thr)
            })
            .unzip();
        Binned { bins, thresholds }
    }
}

/// Per-sample statistics are summed in a four-slot accumulator.
type Acc = [f64; 4];

trait Criterion: Sync {
    fn score(&self, a: &Acc) -> f64;
    fn admissible(&self, a: &Acc) -> bool;
    fn leaf(&self, a: &Acc) -> Vec<f64>;
}

fn add(a: &mut Acc, b: &Acc) {
    for i in 0..4 {
        a[i] += b[i];
    }
}

/// Gini criterion over `[c0, c1, c2, n]`.
struct Gini {
    min_leaf: usize,
}

impl Criterion for Gini {
    fn score(&self, a: &Acc) -> f64 {
        if a[3] == 0.0 {
            0.0
        } else {
            (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]) / a[3]
        }
    }

    fn admissible(&self, a: &Acc) -> bool {
        a[3] >= self.min_leaf.max(1) as f64
    }

    fn leaf(&self, a: &Acc) -> Vec<f64> {
        (0..N_CLASSES).map(|k| a[k] / a[3]).collect()
    }
}

/// Second-order boosting criterion over `[g, h, n, 0]`.
struct Newton {
    lambda: f64,
    min_child_weight: f64,
}

impl Criterion for Newton {
    fn score(&self, a: &Acc) -> f64 {
        a[0] * a[0] / (a[1] + self.lambda)
    }

    fn admissible(&self, a: &Acc) -> bool {
        a[2] >= 1.0 && a[1] >= self.min_child_weight
    }

    fn leaf(&self, a: &Acc) -> Vec<f64> {
        vec![-a[0] / (a[1] + self.lambda)]
    }
}

fn grow<C: Criterion>(
    binned: &Binned,
    stats: &[Acc],
    crit: &C,
    idx: Vec<usize>,
    max_depth: usize,
    mut feature_sampler: Option<(&mut ChaCha8Rng, usize)>,
) -> Tree {
    let d = binned.bins.len();
    let mut nodes = vec![Node::Leaf { value: Vec::new() }];
    let mut stack = vec![(0usize, idx, 0usize)];
    while let Some((slot, idx, depth)) = stack.pop() {
        let mut total = [0.0; 4];
        idx.iter().for_each(|&i| add(&mut total, &stats[i]));
        let features: Vec<usize> = match feature_sampler.as_mut() {
            Some((rng, m)) if *m < d => {
                let mut f = sample(*rng, d, *m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let mut best: Option<(f64, usize, usize)> = None;
        if depth < max_depth && idx.len() >= 2 {
            let parent = crit.score(&total);
            for &f in &features {
                let thr = &binned.thresholds[f];
                if thr.is_empty() {
                    continue;
                }
                let mut hist = vec![[0.0; 4]; thr.len() + 1];
                for &i in &idx {
                    add(&mut hist[binned.bins[f][i] as usize], &stats[i]);
                }
                let mut left = [0.0; 4];
                for (j, h) in hist.iter().enumerate().take(thr.len()) {
                    add(&mut left, h);
                    let right: Acc = std::array::from_fn(|s| total[s] - left[s]);
                    if !crit.admissible(&left) || !crit.admissible(&right) {
                        continue;
                    }
                    let gain = crit.score(&left) + crit.score(&right) - parent;
                    if gain > MIN_GAIN && best.is_none_or(|(g, _, _)| gain > g) {
                        best = Some((gain, f, j));
                    }
                }
            }
        }
        match best {
            None => nodes[slot] = Node::Leaf { value: crit.leaf(&total) },
            Some((_, f, j)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| binned.bins[f][i] as usize <= j);
                let (li, ri) = (nodes.len(), nodes.len() + 1);
                nodes.push(Node::Leaf { value: Vec::new() });
                nodes.push(Node::Leaf { value: Vec::new() });
                nodes[slot] = Node::Split { feature: f, threshold: binned.thresholds[f][j], left: li, right: ri };
                stack.push((ri, r, depth + 1));
                stack.push((li, l, depth + 1));
            }
        }
    }
    Tree { nodes }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Fraction(f64),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().round() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Fraction(f) => (f * d as f64).round() as usize,
        };
        m.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams { n_trees: 100, max_depth: 8, min_samples_leaf: 1, max_features: MaxFeatures::Sqrt }
    }
}

/// Bootstrap-aggregated gini trees; probabilities are the mean of leaf
/// class frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: RfParams,
    pub trees: Vec<Tree>,
}

impl RandomForest {
    pub fn fit(data: &Dataset, params: &RfParams, seed: u64) -> Self {
        let binned = Binned::new(&data.x);
        let stats: Vec<Acc> = data
            .y
            .iter()
            .map(|&y| {
                let mut a = [0.0, 0.0, 0.0, 1.0];
                a[y] = 1.0;
                a
            })
            .collect();
        let crit = Gini { min_leaf: params.min_samples_leaf };
        let n = data.len();
        let m = params.max_features.resolve(binned.bins.len());
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                grow(&binned, &stats, &crit, idx, params.max_depth, Some((&mut rng, m)))
            })
            .collect();
        RandomForest { params: params.clone(), trees }
    }
}

impl Classifier for RandomForest {
    fn predict_proba(&self, x: &[f64]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for t in &self.trees {
            for (pk, v) in p.iter_mut().zip(t.leaf(x)) {
                *pk += v;
            }
        }
        let n = self.trees.len().max(1) as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub min_child_weight: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams { n_rounds: 100, learning_rate: 0.1, max_depth: 4, lambda: 1.0, min_child_weight: 1e-3 }
    }
}

/// Softmax gradient boosting with one regression tree per class per round,
/// grown on gradient and hessian sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub params: GbtParams,
    /// `rounds[r][k]` is class `k`'s tree in round `r`.
    pub rounds: Vec<Vec<Tree>>,
}

fn softmax(z: [f64; 3]) -> [f64; 3] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

impl GbtModel {
    pub fn fit(data: &Dataset, params: &GbtParams) -> Self {
        let binned = Binned::new(&data.x);
        let n = data.len();
        let crit = Newton { lambda: params.lambda, min_child_weight: params.min_child_weight };
        let mut margin = vec![[0.0; 3]; n];
        let mut rounds = Vec::with_capacity(params.n_rounds);
        for _ in 0..params.n_rounds {
            let probs: Vec<[f64; 3]> = margin.iter().map(|&z| softmax(z)).collect();
            let trees: Vec<Tree> = (0..N_CLASSES)
                .into_par_iter()
                .map(|k| {
                    let stats: Vec<Acc> = (0..n)
                        .map(|i| {
                            let p = probs[i][k];
                            let y = if data.y[i] == k { 1.0 } else { 0.0 };
                            [p - y, (p * (1.0 - p)).max(1e-16), 1.0, 0.0]
                        })
                        .collect();
                    grow(&binned, &stats, &crit, (0..n).collect(), params.max_depth, None)
                })
                .collect();
            for (i, m) in margin.iter_mut().enumerate() {
                for k in 0..N_CLASSES {
                    m[k] += params.learning_rate * trees[k].leaf(&data.x[i])[0];
                }
            }
            rounds.push(trees);
        }
        GbtModel { params: params.clone(), rounds }
    }
}

impl Classifier for GbtModel {
    fn predict_proba(&self, x: &[f64]) -> [f64; 3] {
        let mut z = [0.0; 3];
        for round in &self.rounds {
            for (zk, t) in z.iter_mut().zip(round) {
                *zk += self.params.learning_rate * t.leaf(x)[0];
            }
        }
        softmax(z)
    }
}
