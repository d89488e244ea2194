//! Unlabeled pool construction (uniform and cluster-extreme) and one-sided
//! selection of labeled data.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats::{sq_dist, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Belief,
    Dissonance,
    Neutral,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Belief, Label::Dissonance, Label::Neutral];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Label {
        Self::ALL[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Belief => "belief",
            Label::Dissonance => "dissonance",
            Label::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Label> {
        match s.trim().to_lowercase().as_str() {
            "belief" => Ok(Label::Belief),
            "dissonance" => Ok(Label::Dissonance),
            "neutral" => Ok(Label::Neutral),
            other => Err(Error::invalid(format!("unknown label {other:?}; expected belief, dissonance or neutral"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Random,
    Biased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    pub name: PoolKind,
    pub ids: Vec<String>,
    pub seed: u64,
    pub k: Option<usize>,
    pub n_per_extreme: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct PoolHeader {
    format: String,
    version: u32,
    name: PoolKind,
    seed: u64,
    k: Option<usize>,
    n_per_extreme: Option<usize>,
    count: usize,
}

impl Pool {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let h = PoolHeader {
            format: "canonlab-pool".into(),
            version: 1,
            name: self.name,
            seed: self.seed,
            k: self.k,
            n_per_extreme: self.n_per_extreme,
            count: self.ids.len(),
        };
        serde_json::to_writer(&mut w, &h)?;
        writeln!(w)?;
        for id in &self.ids {
            writeln!(w, "{id}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Pool> {
        let mut lines = r.lines();
        let head = lines.next().ok_or_else(|| Error::invalid("empty pool file"))??;
        let h: PoolHeader = serde_json::from_str(&head)?;
        if h.format != "canonlab-pool" || h.version != 1 {
            return Err(Error::Version { expected: "canonlab-pool v1".into(), found: format!("{} v{}", h.format, h.version) });
        }
        let ids: Vec<String> = lines.collect::<std::io::Result<_>>()?;
        if ids.len() != h.count {
            return Err(Error::invalid(format!("pool header promises {} ids, found {}", h.count, ids.len())));
        }
        Ok(Pool { name: h.name, ids, seed: h.seed, k: h.k, n_per_extreme: h.n_per_extreme })
    }
}

/// `n` comments drawn uniformly without replacement, skipping `exclude`.
pub fn random_pool(corpus: &Corpus, n: usize, seed: u64, exclude: &HashSet<String>) -> Result<Pool> {
    let mut ids: Vec<&str> =
        corpus.comments().iter().map(|c| c.id.as_str()).filter(|id| !exclude.contains(*id)).collect();
    if n > ids.len() {
        return Err(Error::invalid(format!("pool of {n} requested from {} eligible comments", ids.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chosen, _) = ids.partial_shuffle(&mut rng, n);
    Ok(Pool { name: PoolKind::Random, ids: chosen.iter().map(|s| s.to_string()).collect(), seed, k: None, n_per_extreme: None })
}

#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

pub const KMEANS_MAX_ITER: usize = 300;
pub const KMEANS_TOL: f64 = 1e-6;

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.iter().enumerate() {
        let d = sq_dist(p, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn distinct_count(points: &[Vec<f64>]) -> usize {
    points.iter().map(|p| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect::<HashSet<_>>().len()
}

/// k-means++ seeding: first center uniform, then each next center with
/// probability proportional to squared distance to the nearest chosen one.
fn plus_plus(points: &[Vec<f64>], k: usize, start: Vec<Vec<f64>>, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = start;
    if centers.is_empty() {
        centers.push(points[rng.random_range(0..points.len())].clone());
    }
    while centers.len() < k {
        let d: Vec<f64> = points.iter().map(|p| nearest(p, &centers).1).collect();
        let total: f64 = d.iter().sum();
        let pick = if total <= 0.0 {
            rng.random_range(0..points.len())
        } else {
            let mut r = rng.random::<f64>() * total;
            let mut idx = d.len() - 1;
            for (i, &w) in d.iter().enumerate() {
                if r < w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        };
        centers.push(points[pick].clone());
    }
    centers
}

/// Lloyd iterations from given centers.
pub fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> KMeans {
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignment = vec![0; points.len()];
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        assignment = points.par_iter().map(|p| nearest(p, &centroids).0).collect();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut next = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                next[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // Reseed an empty cluster at the point farthest from its center.
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a], &centroids[assignment[a]]);
                        let db = sq_dist(&points[b], &centroids[assignment[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("points non-empty");
                next[c] = points[far].clone();
            }
        }
        let shift = centroids.iter().zip(&next).map(|(a, b)| sq_dist(a, b).sqrt()).fold(0.0, f64::max);
        centroids = next;
        if shift < KMEANS_TOL {
            break;
        }
    }
    assignment = points.par_iter().map(|p| nearest(p, &centroids).0).collect();
    let inertia = points.iter().zip(&assignment).map(|(p, &a)| sq_dist(p, &centroids[a])).sum();
    KMeans { centroids, assignment, inertia, iterations }
}

/// Best of `n_init` seeded k-means++ runs.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, n_init: usize) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let distinct = distinct_count(points);
    if k > distinct {
        return Err(Error::invalid(format!("k={k} exceeds the {distinct} distinct points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeans> = None;
    for _ in 0..n_init.max(1) {
        let fit = lloyd(points, plus_plus(points, k, Vec::new(), &mut rng));
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one run"))
}

/// Inertia for k = 1..=k_max. Each fit warm-starts from the previous
/// centers plus one k-means++ draw, so inertia never increases with k.
pub fn inertia_sweep(points: &[Vec<f64>], k_max: usize, seed: u64) -> Vec<(usize, f64)> {
    let k_max = k_max.min(distinct_count(points));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut centers: Vec<Vec<f64>> = Vec::new();
    for k in 1..=k_max {
        let fit = lloyd(points, plus_plus(points, k, centers, &mut rng));
        let prev = out.last().map_or(f64::INFINITY, |&(_, i): &(usize, f64)| i);
        out.push((k, fit.inertia.min(prev)));
        centers = fit.centroids;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiasedConfig {
    pub k: usize,
    pub n_per_extreme: usize,
    pub seed: u64,
    pub n_init: usize,
    pub sweep_max: usize,
}

impl Default for BiasedConfig {
    fn default() -> Self {
        BiasedConfig { k: 3, n_per_extreme: 20_000, seed: 0, n_init: 4, sweep_max: 8 }
    }
}

/// Cluster standardized feature rows and take the points nearest to and
/// farthest from each centroid. Also returns the inertia-vs-k sweep.
pub fn biased_pool(
    features: &FeatureMatrix,
    cfg: &BiasedConfig,
    exclude: &HashSet<String>,
) -> Result<(Pool, Vec<(usize, f64)>)> {
    let idx: Vec<usize> = (0..features.rows()).filter(|&i| !exclude.contains(&features.ids[i])).collect();
    if idx.is_empty() {
        return Err(Error::invalid("no eligible comments for the biased pool"));
    }
    let raw: Vec<Vec<f64>> = idx.iter().map(|&i| features.row(i).to_vec()).collect();
    let points = Standardizer::fit(&raw).transform(&raw);
    let fit = kmeans(&points, cfg.k, cfg.seed, cfg.n_init)?;
    let sweep = inertia_sweep(&points, cfg.sweep_max.max(cfg.k), cfg.seed);

    let mut seen = HashSet::new();
    let mut ids = Vec::new();
    for c in 0..cfg.k {
        let mut members: Vec<(usize, f64)> = (0..points.len())
            .filter(|&p| fit.assignment[p] == c)
            .map(|p| (p, sq_dist(&points[p], &fit.centroids[c])))
            .collect();
        members.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let near = members.iter().take(cfg.n_per_extreme);
        let far = members.iter().rev().take(cfg.n_per_extreme);
        for &(p, _) in near.chain(far) {
            if seen.insert(p) {
                ids.push(features.ids[idx[p]].clone());
            }
        }
    }
    let pool = Pool { name: PoolKind::Biased, ids, seed: cfg.seed, k: Some(cfg.k), n_per_extreme: Some(cfg.n_per_extreme) };
    Ok((pool, sweep))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledEntry {
    pub comment_id: String,
    pub label: Label,
    pub annotator: String,
    pub timestamp: i64,
    pub pool: String,
}

/// Labels with at most one label per comment per annotator.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub entries: Vec<LabeledEntry>,
}

impl LabeledSet {
    pub fn insert(&mut self, e: LabeledEntry) -> Result<()> {
        if self.entries.iter().any(|x| x.comment_id == e.comment_id && x.annotator == e.annotator) {
            return Err(Error::AlreadyLabeled(format!("{} by {}", e.comment_id, e.annotator)));
        }
        self.entries.push(e);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> HashSet<String> {
        self.entries.iter().map(|e| e.comment_id.clone()).collect()
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for e in &self.entries {
            c[e.label.index()] += 1;
        }
        c
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{{\"format\":\"canonlab-labels\",\"version\":1,\"entries\":{}}}", self.entries.len())?;
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<LabeledSet> {
        let mut lines = r.lines();
        let head = lines.next().ok_or_else(|| Error::invalid("empty label file"))??;
        let h: serde_json::Value = serde_json::from_str(&head)?;
        if h["format"] != "canonlab-labels" || h["version"] != 1 {
            return Err(Error::Version { expected: "canonlab-labels v1".into(), found: head });
        }
        let mut set = LabeledSet::default();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: LabeledEntry = serde_json::from_str(&line)
                .map_err(|err| Error::Parse { line: n + 2, message: err.to_string() })?;
            set.insert(e)?;
        }
        Ok(set)
    }
}

/// Classes whose count equals the smallest class count.
pub fn minority_classes(labels: &[usize]) -> HashSet<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let min = counts.values().copied().min().unwrap_or(0);
    counts.into_iter().filter(|&(_, c)| c == min).map(|(l, _)| l).collect()
}

fn nearest_in(points: &[Vec<f64>], set: &[usize], i: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in set {
        if j == i {
            continue;
        }
        let d = sq_dist(&points[i], &points[j]);
        if best.is_none_or(|(b, bd)| d < bd || (d == bd && j < b)) {
            best = Some((j, d));
        }
    }
    best.map(|(j, _)| j)
}

/// One-sided selection over points with class labels. Returns the kept
/// indices in ascending order.
///
/// All minority points plus one random point per majority class seed the
/// subset; majority points misclassified by 1-NN over that seed subset are
/// added; majority points in Tomek links within the subset are dropped.
pub fn one_sided_selection(points: &[Vec<f64>], labels: &[usize], seed: u64) -> Result<Vec<usize>> {
    let classes: HashSet<usize> = labels.iter().copied().collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass("one-sided selection needs at least two classes".into()));
    }
    let minority = minority_classes(labels);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut subset: Vec<usize> = (0..labels.len()).filter(|&i| minority.contains(&labels[i])).collect();
    let mut majority: Vec<usize> = classes.iter().copied().filter(|c| !minority.contains(c)).collect();
    majority.sort_unstable();
    for &m in &majority {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == m).collect();
        subset.push(members[rng.random_range(0..members.len())]);
    }
    let seed_subset = subset.clone();
    let in_seed: HashSet<usize> = seed_subset.iter().copied().collect();
    for i in 0..labels.len() {
        if in_seed.contains(&i) {
            continue;
        }
        let nn = nearest_in(points, &seed_subset, i).expect("seed subset non-empty");
        if labels[nn] != labels[i] {
            subset.push(i);
        }
    }
    subset.sort_unstable();

    let nn: Vec<Option<usize>> = subset.iter().map(|&i| nearest_in(points, &subset, i)).collect();
    let pos: BTreeMap<usize, usize> = subset.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let mut drop = HashSet::new();
    for (k, &i) in subset.iter().enumerate() {
        let Some(j) = nn[k] else { continue };
        if labels[i] != labels[j] && nn[pos[&j]] == Some(i) && !minority.contains(&labels[i]) {
            drop.insert(i);
        }
    }
    Ok(subset.into_iter().filter(|i| !drop.contains(i)).collect())
}

/// One-sided selection of labeled comments in standardized feature space.
pub fn one_sided_select(labeled: &[LabeledEntry], features: &FeatureMatrix, seed: u64) -> Result<Vec<LabeledEntry>> {
    let rows = labeled
        .iter()
        .map(|e| {
            features
                .position(&e.comment_id)
                .map(|p| features.row(p).to_vec())
                .ok_or_else(|| Error::invalid(format!("no features for labeled comment {}", e.comment_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let points = Standardizer::fit(&rows).transform(&rows);
    let labels: Vec<usize> = labeled.iter().map(|e| e.label.index()).collect();
    let keep = one_sided_selection(&points, &labels, seed)?;
    Ok(keep.into_iter().map(|i| labeled[i].clone()).collect())
}
