//! Interrupted time series around disclosures, the dissonance index, and
//! tenure regressions.

mod regression;
mod tenure;

pub use regression::{check_rank, logit, negbin, ols, CoefRow, MleFit, ModelKind, OlsFit, RegressionReport, MAX_ITER};
pub use tenure::{
    build_tenure, fit_tenure, tenure_design, DissonanceWindow, Regressor, TenureConfig, TenureDesign, TenureRecord,
};

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEEK: i64 = 7 * 24 * 3600;
pub const DAY: i64 = 24 * 3600;

/// Fraction of disclosures that are dissonant; `None` when there are none.
pub fn dissonance_index(d: i64, b: i64) -> Result<Option<f64>> {
    if d < 0 || b < 0 {
        return Err(Error::invalid(format!("negative disclosure count ({d}, {b})")));
    }
    if d + b == 0 {
        return Ok(None);
    }
    Ok(Some(d as f64 / (d + b) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Inside,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    pub time: i64,
    pub inside: bool,
}

/// Odd number of weeks centred on the intervention week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItsWindow {
    weeks: usize,
}

pub const WINDOW_SWEEP: [usize; 8] = [5, 7, 9, 11, 13, 15, 17, 21];

impl ItsWindow {
    pub fn new(weeks: usize) -> Result<Self> {
        if weeks < 3 || weeks.is_multiple_of(2) {
            return Err(Error::invalid(format!("window of {weeks} weeks must be odd and at least 3")));
        }
        Ok(ItsWindow { weeks })
    }

    pub fn weeks(&self) -> usize {
        self.weeks
    }

    pub fn pre_weeks(&self) -> usize {
        (self.weeks - 1) / 2
    }

    /// (T, D, P) for the week `rel` weeks after the intervention week
    /// (negative before, 0 for the intervention week itself).
    pub fn encode(&self, rel: i64) -> Option<(u32, u8, u32)> {
        let n_pre = self.pre_weeks() as i64;
        if rel < -n_pre || rel > n_pre {
            return None;
        }
        let t = rel + n_pre + 1;
        if rel >= 0 {
            Some((t as u32, 1, (t - n_pre) as u32))
        } else {
            Some((t as u32, 0, 0))
        }
    }
}

impl Default for ItsWindow {
    fn default() -> Self {
        ItsWindow { weeks: 13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItsObservation {
    pub user: String,
    pub t: u32,
    pub d: u8,
    pub p: u32,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    NoContributions,
    NoneBeforeWindow,
    NoneAfterWindow,
    NoneBeforeIntervention,
    NoneAfterIntervention,
}

/// Weekly contribution fractions for one user around one intervention.
pub fn encode_its(
    user: &str,
    contributions: &[Contribution],
    intervention: i64,
    window: ItsWindow,
    scope: Scope,
) -> std::result::Result<Vec<ItsObservation>, Exclusion> {
    let times: Vec<i64> = contributions
        .iter()
        .filter(|c| c.inside == (scope == Scope::Inside))
        .map(|c| c.time)
        .collect();
    if times.is_empty() {
        return Err(Exclusion::NoContributions);
    }
    let n_pre = window.pre_weeks() as i64;
    let start = intervention - n_pre * WEEK;
    let end = intervention + (n_pre + 1) * WEEK;
    if !times.iter().any(|&t| t < start) {
        return Err(Exclusion::NoneBeforeWindow);
    }
    if !times.iter().any(|&t| t >= end) {
        return Err(Exclusion::NoneAfterWindow);
    }
    if !times.iter().any(|&t| (start..intervention).contains(&t)) {
        return Err(Exclusion::NoneBeforeIntervention);
    }
    if !times.iter().any(|&t| (intervention..end).contains(&t)) {
        return Err(Exclusion::NoneAfterIntervention);
    }
    let mut counts = vec![0usize; window.weeks()];
    for &t in &times {
        if (start..end).contains(&t) {
            counts[((t - start) / WEEK) as usize] += 1;
        }
    }
    let lifetime = times.len() as f64;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(w, &c)| {
            let (t, d, p) = window.encode(w as i64 - n_pre).expect("week inside window");
            ItsObservation { user: user.to_string(), t, d, p, y: c as f64 / lifetime }
        })
        .collect())
}

/// One user's history and the intervention time to center on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEvent {
    pub user: String,
    pub intervention: i64,
    pub contributions: Vec<Contribution>,
}

pub fn encode_all(
    events: &[UserEvent],
    window: ItsWindow,
    scope: Scope,
) -> (Vec<ItsObservation>, Vec<(String, Exclusion)>) {
    let results: Vec<_> = events
        .par_iter()
        .map(|e| (e.user.clone(), encode_its(&e.user, &e.contributions, e.intervention, window, scope)))
        .collect();
    let mut obs = Vec::new();
    let mut excluded = Vec::new();
    for (user, r) in results {
        match r {
            Ok(o) => obs.extend(o),
            Err(x) => excluded.push((user, x)),
        }
    }
    (obs, excluded)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItsFit {
    pub scope: Scope,
    pub n: usize,
    /// b0 (intercept), b1 (T), b2 (D), b3 (P).
    pub coefficients: Vec<CoefRow>,
    /// b1 + b3, the slope after the intervention.
    pub post_slope: CoefRow,
    /// Slope of a separate line fitted to post-intervention weeks only.
    pub piecewise_post_slope: CoefRow,
    pub cluster_robust: bool,
}

impl ItsFit {
    pub fn coef(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.coefficients[i].coef)
    }
}

/// Pooled user-week OLS of `y ~ b0 + b1 T + b2 D + b3 P`.
pub fn fit_its(obs: &[ItsObservation], scope: Scope, cluster_robust: bool) -> Result<ItsFit> {
    let pre: BTreeSet<u32> = obs.iter().filter(|o| o.d == 0).map(|o| o.t).collect();
    let post: BTreeSet<u32> = obs.iter().filter(|o| o.d == 1).map(|o| o.t).collect();
    if pre.len() < 2 || post.len() < 2 {
        return Err(Error::invalid("need at least two distinct weeks on each side of the intervention"));
    }
    if obs.iter().any(|o| (o.d == 1) != (o.p >= 1)) {
        return Err(Error::invalid("observation with D and P out of step"));
    }
    let names: Vec<String> = ["b0", "b1", "b2", "b3"].map(String::from).to_vec();
    let x = DMatrix::from_fn(obs.len(), 4, |i, j| match j {
        0 => 1.0,
        1 => obs[i].t as f64,
        2 => obs[i].d as f64,
        _ => obs[i].p as f64,
    });
    let y = DVector::from_iterator(obs.len(), obs.iter().map(|o| o.y));
    let clusters = cluster_robust.then(|| cluster_ids(obs));
    let fit = ols(&x, &y, &names, clusters.as_deref())?;
    let df = Some(fit.df_resid);
    let coefficients: Vec<CoefRow> =
        (0..4).map(|j| CoefRow::wald(&names[j], fit.coef[j], fit.cov[(j, j)].sqrt(), df)).collect();
    let slope_var = fit.cov[(1, 1)] + fit.cov[(3, 3)] + 2.0 * fit.cov[(1, 3)];
    let post_slope = CoefRow::wald("b1+b3", fit.coef[1] + fit.coef[3], slope_var.sqrt(), df);

    let post_obs: Vec<&ItsObservation> = obs.iter().filter(|o| o.d == 1).collect();
    let px = DMatrix::from_fn(post_obs.len(), 2, |i, j| if j == 0 { 1.0 } else { post_obs[i].t as f64 });
    let py = DVector::from_iterator(post_obs.len(), post_obs.iter().map(|o| o.y));
    let pnames = vec!["c0".to_string(), "c1".to_string()];
    let pclusters = cluster_robust.then(|| cluster_ids(&post_obs.iter().map(|o| (*o).clone()).collect::<Vec<_>>()));
    let pfit = ols(&px, &py, &pnames, pclusters.as_deref())?;
    let piecewise_post_slope = CoefRow::wald("post slope", pfit.coef[1], pfit.cov[(1, 1)].sqrt(), Some(pfit.df_resid));
    Ok(ItsFit { scope, n: obs.len(), coefficients, post_slope, piecewise_post_slope, cluster_robust })
}

fn cluster_ids(obs: &[ItsObservation]) -> Vec<usize> {
    let mut users: Vec<&str> = obs.iter().map(|o| o.user.as_str()).collect();
    users.sort_unstable();
    users.dedup();
    obs.iter().map(|o| users.binary_search(&o.user.as_str()).expect("user present")).collect()
}

/// Week, mean observed fraction, and fitted value, for charting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItsPlotPoint {
    pub t: u32,
    pub mean_y: f64,
    pub fitted: f64,
}

pub fn its_plot_data(obs: &[ItsObservation], fit: &ItsFit) -> Vec<ItsPlotPoint> {
    let ts: BTreeSet<u32> = obs.iter().map(|o| o.t).collect();
    let b = fit.coef();
    ts.into_iter()
        .map(|t| {
            let week: Vec<&ItsObservation> = obs.iter().filter(|o| o.t == t).collect();
            let mean_y = week.iter().map(|o| o.y).sum::<f64>() / week.len() as f64;
            let (d, p) = (week[0].d as f64, week[0].p as f64);
            ItsPlotPoint { t, mean_y, fitted: b[0] + b[1] * t as f64 + b[2] * d + b[3] * p }
        })
        .collect()
}

impl ItsFit {
    pub fn write_text<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "Interrupted time series, scope {:?}, {} user-weeks", self.scope, self.n)?;
        writeln!(w, "contributions ~ b0 + b1 T + b2 D + b3 P{}", if self.cluster_robust { " (cluster-robust by user)" } else { "" })?;
        writeln!(w, "{:<12}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}  sig", "", "coef", "std err", "t", "P>|t|", "[0.025", "0.975]")?;
        for r in self.coefficients.iter().chain([&self.post_slope, &self.piecewise_post_slope]) {
            writeln!(
                w,
                "{:<12}{:>10.4}{:>10.4}{:>10.3}{:>10.3}{:>10.4}{:>10.4}  {}",
                r.name,
                r.coef,
                r.std_err,
                r.stat,
                r.p,
                r.ci_low,
                r.ci_high,
                if r.significant() { "*" } else { "" }
            )?;
        }
        Ok(())
    }
}
