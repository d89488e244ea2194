//! Multitask elastic net over one-hot class targets, giving per-class
//! feature coefficients on a shared feature space.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Slot;
use crate::learner::stratified_folds;
use crate::sampling::Label;
use crate::stats::Standardizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportanceConfig {
    pub l1_ratio: f64,
    pub n_lambdas: usize,
    /// The path runs from lambda_max down this many decades.
    pub decades: f64,
    pub folds: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        ImportanceConfig { l1_ratio: 0.5, n_lambdas: 100, decades: 4.0, folds: 5, seed: 0, max_sweeps: 10_000, tol: 1e-6 }
    }
}

/// Design in column-major form, already centered and scaled.
#[derive(Debug, Clone)]
pub struct Design {
    pub cols: Vec<Vec<f64>>,
    pub n: usize,
}

impl Design {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let p = rows.first().map_or(0, Vec::len);
        let cols = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Design { cols, n: rows.len() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultitaskFit {
    /// One row of three task coefficients per feature.
    pub coef: Vec<[f64; 3]>,
    pub sweeps: usize,
    /// Objective after each sweep.
    pub objective: Vec<f64>,
}

/// Smallest lambda at which every coefficient row is zero.
pub fn lambda_max(x: &Design, y: &[[f64; 3]], rho: f64) -> f64 {
    x.cols
        .iter()
        .map(|c| {
            let g: [f64; 3] = std::array::from_fn(|k| c.iter().zip(y).map(|(a, b)| a * b[k]).sum());
            norm(&g)
        })
        .fold(0.0, f64::max)
        / (x.n as f64 * rho)
}

fn norm(v: &[f64; 3]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn objective(resid: &[[f64; 3]], coef: &[[f64; 3]], n: usize, lambda: f64, rho: f64) -> f64 {
    let rss: f64 = resid.iter().flat_map(|r| r.iter()).map(|v| v * v).sum();
    let l21: f64 = coef.iter().map(norm).sum();
    let l2: f64 = coef.iter().flat_map(|r| r.iter()).map(|v| v * v).sum();
    rss / (2.0 * n as f64) + lambda * (rho * l21 + (1.0 - rho) / 2.0 * l2)
}

/// Cyclic block coordinate descent on feature rows. Stops when the largest
/// coefficient change in a sweep falls below `tol`, or after `max_sweeps`.
pub fn fit_multitask(
    x: &Design,
    y: &[[f64; 3]],
    lambda: f64,
    rho: f64,
    init: Option<Vec<[f64; 3]>>,
    max_sweeps: usize,
    tol: f64,
) -> MultitaskFit {
    let n = x.n as f64;
    let p = x.cols.len();
    let mut coef = init.unwrap_or_else(|| vec![[0.0; 3]; p]);
    let mut resid: Vec<[f64; 3]> = y.to_vec();
    for (j, c) in x.cols.iter().enumerate() {
        if coef[j] != [0.0; 3] {
            for (r, v) in resid.iter_mut().zip(c) {
                for k in 0..3 {
                    r[k] -= v * coef[j][k];
                }
            }
        }
    }
    let sq: Vec<f64> = x.cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / n).collect();
    let mut trace = Vec::new();
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..p {
            let c = &x.cols[j];
            let old = coef[j];
            let mut z = [0.0; 3];
            for (r, v) in resid.iter().zip(c) {
                for k in 0..3 {
                    z[k] += v * r[k];
                }
            }
            for k in 0..3 {
                z[k] = z[k] / n + sq[j] * old[k];
            }
            let zn = norm(&z);
            let denom = sq[j] + lambda * (1.0 - rho);
            let new = if zn <= lambda * rho || denom == 0.0 {
                [0.0; 3]
            } else {
                let shrink = (1.0 - lambda * rho / zn) / denom;
                z.map(|v| v * shrink)
            };
            let delta: [f64; 3] = std::array::from_fn(|k| new[k] - old[k]);
            if delta != [0.0; 3] {
                for (r, v) in resid.iter_mut().zip(c) {
                    for k in 0..3 {
                        r[k] -= v * delta[k];
                    }
                }
                coef[j] = new;
                max_delta = delta.iter().fold(max_delta, |m, d| m.max(d.abs()));
            }
        }
        trace.push(objective(&resid, &coef, x.n, lambda, rho));
        if max_delta < tol {
            break;
        }
    }
    MultitaskFit { coef, sweeps, objective: trace }
}

/// Standardized design and centered one-hot targets for a subset of rows.
fn prepare(rows: &[Vec<f64>], labels: &[Label]) -> (Standardizer, Design, [f64; 3], Vec<[f64; 3]>) {
    let s = Standardizer::fit(rows);
    let x = Design::from_rows(&s.transform(rows));
    let mut mean = [0.0; 3];
    for l in labels {
        mean[l.index()] += 1.0 / labels.len() as f64;
    }
    let y = labels
        .iter()
        .map(|l| std::array::from_fn(|k| if k == l.index() { 1.0 } else { 0.0 } - mean[k]))
        .collect();
    (s, x, mean, y)
}

pub fn lambda_path(lmax: f64, n: usize, decades: f64) -> Vec<f64> {
    if n <= 1 {
        return vec![lmax];
    }
    (0..n).map(|i| lmax * 10f64.powf(-decades * i as f64 / (n - 1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub slot: String,
    pub tag: String,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub slots: Vec<Slot>,
    /// `coef[class][slot]` on the standardized scale.
    pub coef: [Vec<f64>; 3],
    pub intercept: [f64; 3],
    pub lambda: f64,
    pub l1_ratio: f64,
    pub lambda_path: Vec<f64>,
    pub cv_mse: Vec<f64>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub sweeps: usize,
}

pub fn fit_importance(rows: &[Vec<f64>], labels: &[Label], slots: &[Slot], cfg: &ImportanceConfig) -> Result<ImportanceReport> {
    if rows.len() != labels.len() || rows.is_empty() {
        return Err(Error::invalid("feature rows and labels must be non-empty and aligned"));
    }
    if rows.iter().any(|r| r.len() != slots.len()) {
        return Err(Error::Schema(format!("rows do not have {} slots", slots.len())));
    }
    if let Some((i, j)) =
        rows.iter().enumerate().find_map(|(i, r)| r.iter().position(|v| !v.is_finite()).map(|j| (i, j)))
    {
        return Err(Error::NonFinite(format!("row {i}, slot {}", slots[j].name)));
    }
    if labels.iter().all(|l| *l == labels[0]) {
        return Err(Error::SingleClass(format!("every label is {}", labels[0])));
    }
    if !(cfg.l1_ratio > 0.0 && cfg.l1_ratio <= 1.0) {
        return Err(Error::invalid("l1_ratio must lie in (0, 1]"));
    }
    let rho = cfg.l1_ratio;
    let (std, x, intercept, y) = prepare(rows, labels);
    let path = lambda_path(lambda_max(&x, &y, rho), cfg.n_lambdas.max(1), cfg.decades);

    let folds = cfg.folds.clamp(2, rows.len());
    let yi: Vec<usize> = labels.iter().map(|l| l.index()).collect();
    let fold = stratified_folds(&yi, folds, cfg.seed);
    let per_fold: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let tr: Vec<usize> = (0..rows.len()).filter(|&i| fold[i] != f).collect();
            let te: Vec<usize> = (0..rows.len()).filter(|&i| fold[i] == f).collect();
            let tr_rows: Vec<Vec<f64>> = tr.iter().map(|&i| rows[i].clone()).collect();
            let tr_labels: Vec<Label> = tr.iter().map(|&i| labels[i]).collect();
            let (s, xt, mean, yt) = prepare(&tr_rows, &tr_labels);
            let te_rows: Vec<Vec<f64>> = te.iter().map(|&i| s.transform_row(&rows[i])).collect();
            let mut init = None;
            path.iter()
                .map(|&lam| {
                    let fit = fit_multitask(&xt, &yt, lam, rho, init.take(), cfg.max_sweeps, cfg.tol);
                    let mut sse = 0.0;
                    for (r, &i) in te_rows.iter().zip(&te) {
                        for k in 0..3 {
                            let pred = mean[k] + r.iter().zip(&fit.coef).map(|(v, c)| v * c[k]).sum::<f64>();
                            let truth = if labels[i].index() == k { 1.0 } else { 0.0 };
                            sse += (truth - pred).powi(2);
                        }
                    }
                    init = Some(fit.coef);
                    sse
                })
                .collect()
        })
        .collect();
    let cv_mse: Vec<f64> =
        (0..path.len()).map(|l| per_fold.iter().map(|f| f[l]).sum::<f64>() / (3 * rows.len()) as f64).collect();
    let mut best = 0;
    for (i, m) in cv_mse.iter().enumerate() {
        if *m < cv_mse[best] {
            best = i;
        }
    }
    let mut init = None;
    let mut fit = None;
    for &lam in &path[..=best] {
        let f = fit_multitask(&x, &y, lam, rho, init.take(), cfg.max_sweeps, cfg.tol);
        init = Some(f.coef.clone());
        fit = Some(f);
    }
    let fit = fit.expect("path is non-empty");
    Ok(ImportanceReport {
        slots: slots.to_vec(),
        coef: std::array::from_fn(|k| fit.coef.iter().map(|c| c[k]).collect()),
        intercept,
        lambda: path[best],
        l1_ratio: rho,
        lambda_path: path,
        cv_mse,
        mean: std.mean,
        scale: std.sd,
        sweeps: fit.sweeps,
    })
}

impl ImportanceReport {
    /// Nonzero coefficients for `class`, largest magnitude first.
    pub fn top_features(&self, class: Label, n: usize) -> Vec<RankedFeature> {
        let c = &self.coef[class.index()];
        let mut idx: Vec<usize> = (0..c.len()).filter(|&j| c[j] != 0.0).collect();
        idx.sort_by(|&a, &b| c[b].abs().total_cmp(&c[a].abs()).then(a.cmp(&b)));
        idx.into_iter()
            .take(n)
            .map(|j| RankedFeature { slot: self.slots[j].name.clone(), tag: self.slots[j].tag.clone(), coefficient: c[j] })
            .collect()
    }

    /// Ranked per-class coefficient tables.
    pub fn write_text<W: Write>(&self, mut w: W, n: usize) -> Result<()> {
        writeln!(w, "# canonlab-importance v1")?;
        writeln!(w, "# model: multitask elastic net on one-hot class targets, standardized features")?;
        writeln!(w, "# lambda: {:.6e}  l1_ratio: {}", self.lambda, self.l1_ratio)?;
        for class in Label::ALL {
            writeln!(w, "\n[{class}]")?;
            writeln!(w, "{:>4}  {:<40} {:<12} {:>12}", "rank", "feature", "tag", "coef")?;
            for (i, f) in self.top_features(class, n).iter().enumerate() {
                writeln!(w, "{:>4}  {:<40} {:<12} {:>12.6}", i + 1, f.slot, f.tag, f.coefficient)?;
            }
        }
        Ok(())
    }
}

pub fn top_features(report: Option<&ImportanceReport>, class: Label, n: usize) -> Result<Vec<RankedFeature>> {
    report.map(|r| r.top_features(class, n)).ok_or(Error::NotFitted)
}
