use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::regression::{logit, negbin, ols, CoefRow, ModelKind, RegressionReport};
use super::{dissonance_index, DAY};
use crate::corpus::Comment;
use crate::error::{Error, Result};
use crate::sampling::Label;

/// How the dissonance index is tracked over a user's first comments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissonanceWindow {
    /// Every prefix 1..=prefix.
    Cumulative,
    /// Trailing windows of this many comments.
    Sliding(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TenureConfig {
    /// Users need strictly more community comments than this.
    pub min_comments: usize,
    pub prefix: usize,
    pub censor_days: i64,
    pub remain_days: i64,
    pub dissonance: DissonanceWindow,
}

impl Default for TenureConfig {
    fn default() -> Self {
        TenureConfig {
            min_comments: 100,
            prefix: 100,
            censor_days: 30,
            remain_days: 10,
            dissonance: DissonanceWindow::Cumulative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TenureRecord {
    pub user: String,
    pub belief: usize,
    pub dissonance: usize,
    pub avg_d: Option<f64>,
    pub max_d: Option<f64>,
    pub min_score: i64,
    pub avg_score: f64,
    pub max_score: i64,
    /// First community comment.
    pub born: i64,
    /// The comment that completes the prefix.
    pub created: i64,
    pub remaining_days: u64,
    pub remaining_comments: usize,
    pub remains_after_days: bool,
    pub censored: bool,
}

/// Covariates from each qualifying user's first comments in `community`.
/// `disclosures` maps comment ids to their belief/dissonance/neutral label.
pub fn build_tenure(
    comments: &[Comment],
    community: &str,
    disclosures: &HashMap<String, Label>,
    ban_time: Option<i64>,
    cfg: &TenureConfig,
) -> Result<Vec<TenureRecord>> {
    let ban = ban_time.ok_or_else(|| Error::invalid("ban time is required for tenure records"))?;
    if cfg.prefix == 0 || cfg.min_comments < cfg.prefix {
        return Err(Error::invalid("prefix must be positive and not exceed the comment threshold"));
    }
    let mut by_user: BTreeMap<&str, Vec<&Comment>> = BTreeMap::new();
    for c in comments.iter().filter(|c| c.community == community) {
        by_user.entry(c.author.as_str()).or_default().push(c);
    }
    let mut out = Vec::new();
    for (user, mut cs) in by_user {
        if cs.len() <= cfg.min_comments {
            continue;
        }
        cs.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        let first = &cs[..cfg.prefix];
        let labels: Vec<Option<Label>> = first.iter().map(|c| disclosures.get(&c.id).copied()).collect();
        let is = |l: Label| move |x: &Option<Label>| *x == Some(l);
        let belief = labels.iter().filter(|x| is(Label::Belief)(x)).count();
        let dissonance = labels.iter().filter(|x| is(Label::Dissonance)(x)).count();
        let series = dissonance_series(&labels, cfg.dissonance)?;
        let (avg_d, max_d) = if series.is_empty() {
            (None, None)
        } else {
            (Some(series.iter().sum::<f64>() / series.len() as f64), Some(series.iter().copied().fold(0.0, f64::max)))
        };
        let scores: Vec<i64> = first.iter().map(|c| c.score).collect();
        let created = first[cfg.prefix - 1].created_at;
        let last = cs.last().expect("non-empty").created_at;
        out.push(TenureRecord {
            user: user.to_string(),
            belief,
            dissonance,
            avg_d,
            max_d,
            min_score: *scores.iter().min().expect("non-empty"),
            avg_score: scores.iter().sum::<i64>() as f64 / scores.len() as f64,
            max_score: *scores.iter().max().expect("non-empty"),
            born: first[0].created_at,
            created,
            remaining_days: ((last - created).max(0) / DAY) as u64,
            remaining_comments: cs.len() - cfg.prefix,
            remains_after_days: last - created > cfg.remain_days * DAY,
            censored: ban - last < cfg.censor_days * DAY,
        });
    }
    Ok(out)
}

/// Defined dissonance-index values over prefixes or trailing windows.
fn dissonance_series(labels: &[Option<Label>], window: DissonanceWindow) -> Result<Vec<f64>> {
    let mut d = vec![0i64; labels.len() + 1];
    let mut b = vec![0i64; labels.len() + 1];
    for (i, l) in labels.iter().enumerate() {
        d[i + 1] = d[i] + i64::from(*l == Some(Label::Dissonance));
        b[i + 1] = b[i] + i64::from(*l == Some(Label::Belief));
    }
    let mut out = Vec::new();
    for end in 1..=labels.len() {
        let start = match window {
            DissonanceWindow::Cumulative => 0,
            DissonanceWindow::Sliding(w) => {
                if end < w {
                    continue;
                }
                end - w
            }
        };
        if let Some(v) = dissonance_index(d[end] - d[start], b[end] - b[start])? {
            out.push(v);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regressor {
    Belief,
    Dissonance,
    AvgD,
    MaxD,
    MinScore,
    AvgScore,
    MaxScore,
    Born,
    Created,
}

impl Regressor {
    pub fn name(self) -> &'static str {
        match self {
            Regressor::Belief => "belief",
            Regressor::Dissonance => "dissonance",
            Regressor::AvgD => "avg(D)",
            Regressor::MaxD => "max(D)",
            Regressor::MinScore => "min(score)",
            Regressor::AvgScore => "avg(score)",
            Regressor::MaxScore => "max(score)",
            Regressor::Born => "born",
            Regressor::Created => "created",
        }
    }

    fn value(self, r: &TenureRecord) -> Option<f64> {
        match self {
            Regressor::Belief => Some(r.belief as f64),
            Regressor::Dissonance => Some(r.dissonance as f64),
            Regressor::AvgD => r.avg_d,
            Regressor::MaxD => r.max_d,
            Regressor::MinScore => Some(r.min_score as f64),
            Regressor::AvgScore => Some(r.avg_score),
            Regressor::MaxScore => Some(r.max_score as f64),
            Regressor::Born => Some(r.born as f64),
            Regressor::Created => Some(r.created as f64),
        }
    }

    /// Regressors used for each outcome by default.
    pub fn defaults(model: ModelKind) -> Vec<Regressor> {
        use Regressor::*;
        match model {
            ModelKind::NegativeBinomial => vec![Born, MaxScore, Dissonance, Belief, Created],
            ModelKind::Ols => vec![Born, MinScore, MaxScore, AvgD, MaxD, Dissonance, Belief, Created],
            ModelKind::Logit => vec![Born, AvgScore, MinScore, AvgD, MaxD, Created],
        }
    }
}

/// Standardized design over uncensored records, constant column first.
#[derive(Debug, Clone, PartialEq)]
pub struct TenureDesign {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub records: Vec<TenureRecord>,
}

/// Each regressor is z-scored over its defined values; undefined values
/// (users without disclosures) sit at the mean, i.e. 0.
pub fn tenure_design(records: &[TenureRecord], regressors: &[Regressor]) -> Result<TenureDesign> {
    let kept: Vec<TenureRecord> = records.iter().filter(|r| !r.censored).cloned().collect();
    if kept.is_empty() {
        return Err(Error::invalid("no uncensored tenure records"));
    }
    let n = kept.len();
    let mut x = DMatrix::from_element(n, regressors.len() + 1, 1.0);
    let mut names = vec!["const".to_string()];
    for (j, reg) in regressors.iter().enumerate() {
        let vals: Vec<Option<f64>> = kept.iter().map(|r| reg.value(r)).collect();
        let defined: Vec<f64> = vals.iter().flatten().copied().collect();
        if defined.is_empty() {
            return Err(Error::RankDeficient(format!("{} is undefined for every user", reg.name())));
        }
        let mean = defined.iter().sum::<f64>() / defined.len() as f64;
        let sd = (defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / defined.len() as f64).sqrt();
        if !(sd > 0.0) {
            return Err(Error::RankDeficient(format!("{} is constant", reg.name())));
        }
        for (i, v) in vals.iter().enumerate() {
            x[(i, j + 1)] = v.map_or(0.0, |v| (v - mean) / sd);
        }
        names.push(reg.name().to_string());
    }
    Ok(TenureDesign { names, x, records: kept })
}

pub fn fit_tenure(
    records: &[TenureRecord],
    model: ModelKind,
    regressors: Option<&[Regressor]>,
    logit_ridge: f64,
) -> Result<RegressionReport> {
    let regs = regressors.map_or_else(|| Regressor::defaults(model), <[Regressor]>::to_vec);
    let design = tenure_design(records, &regs)?;
    let (n, k) = (design.x.nrows(), design.x.ncols());
    let rows_from = |coef: &DVector<f64>, cov: &DMatrix<f64>, df: Option<f64>| -> Vec<CoefRow> {
        (0..k).map(|j| CoefRow::wald(&design.names[j], coef[j], cov[(j, j)].max(0.0).sqrt(), df)).collect()
    };
    let ones = DMatrix::from_element(n, 1, 1.0);
    let const_name = vec!["const".to_string()];
    let mut report = RegressionReport {
        model,
        dep_variable: String::new(),
        n,
        df_resid: n.saturating_sub(k),
        df_model: k - 1,
        rows: Vec::new(),
        log_likelihood: None,
        ll_null: None,
        r_squared: None,
        adj_r_squared: None,
        iterations: None,
    };
    match model {
        ModelKind::NegativeBinomial => {
            let y: Vec<f64> = design.records.iter().map(|r| r.remaining_days as f64).collect();
            let (fit, alpha) = negbin(&design.x, &y, &design.names)?;
            let (null, _) = negbin(&ones, &y, &const_name)?;
            report.dep_variable = "days until user leaves".into();
            report.rows = rows_from(&fit.coef, &fit.cov, None);
            report.rows.push(alpha);
            report.log_likelihood = Some(fit.loglik);
            report.ll_null = Some(null.loglik);
            report.iterations = Some(fit.iterations);
        }
        ModelKind::Ols => {
            let y = DVector::from_iterator(n, design.records.iter().map(|r| (r.remaining_comments as f64).ln_1p()));
            let fit = ols(&design.x, &y, &design.names, None)?;
            report.dep_variable = "log(comments left)".into();
            report.rows = rows_from(&fit.coef, &fit.cov, Some(fit.df_resid));
            report.r_squared = Some(fit.r2);
            report.adj_r_squared = Some(1.0 - (1.0 - fit.r2) * (n as f64 - 1.0) / fit.df_resid);
            let s2 = fit.rss / n as f64;
            report.log_likelihood = Some(-0.5 * n as f64 * ((2.0 * std::f64::consts::PI * s2).ln() + 1.0));
        }
        ModelKind::Logit => {
            let y: Vec<bool> = design.records.iter().map(|r| r.remains_after_days).collect();
            let fit = logit(&design.x, &y, &design.names, logit_ridge)?;
            let pbar = y.iter().filter(|&&b| b).count() as f64 / n as f64;
            report.dep_variable = "remains after 10 days".into();
            report.rows = rows_from(&fit.coef, &fit.cov, None);
            report.log_likelihood = Some(fit.loglik);
            report.ll_null = (pbar > 0.0 && pbar < 1.0)
                .then(|| n as f64 * (pbar * pbar.ln() + (1.0 - pbar) * (1.0 - pbar).ln()));
            report.iterations = Some(fit.iterations);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CommentKind;

    fn comment(i: usize, author: &str, t: i64) -> Comment {
        Comment {
            id: format!("{author}-{i:03}"),
            parent_id: None,
            thread_id: "t".into(),
            community: "q".into(),
            author: author.into(),
            created_at: t,
            body: "x".into(),
            score: i as i64 % 7 - 2,
            kind: CommentKind::Post,
            empty_text: false,
        }
    }

    #[test]
    fn prefix_trace_matches_hand_values() {
        let cs: Vec<Comment> = (1..=120).map(|i| comment(i, "u", i as i64 * 3600)).collect();
        let mut disc = HashMap::new();
        disc.insert("u-010".to_string(), Label::Dissonance);
        disc.insert("u-020".to_string(), Label::Dissonance);
        disc.insert("u-005".to_string(), Label::Belief);
        disc.insert("u-110".to_string(), Label::Dissonance);
        let ban = 120 * 3600 + 40 * DAY;
        let r = &build_tenure(&cs, "q", &disc, Some(ban), &TenureConfig::default()).unwrap()[0];
        assert_eq!((r.dissonance, r.belief), (2, 1));
        assert!((r.max_d.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        // prefixes 5..9 give 0, 10..19 give 1/2, 20..100 give 2/3
        let avg = (5.0 * 0.0 + 10.0 * 0.5 + 81.0 * (2.0 / 3.0)) / 96.0;
        assert!((r.avg_d.unwrap() - avg).abs() < 1e-12);
        assert_eq!(r.remaining_comments, 20);
        assert_eq!(r.born, 3600);
        assert_eq!(r.created, 100 * 3600);
        assert!(!r.censored);
    }

    #[test]
    fn no_disclosures_and_censoring() {
        let cs: Vec<Comment> = (1..=101).map(|i| comment(i, "v", i as i64 * 3600)).collect();
        let last = 101 * 3600;
        let r = build_tenure(&cs, "q", &HashMap::new(), Some(last + 10 * DAY), &TenureConfig::default()).unwrap();
        assert_eq!((r[0].belief, r[0].dissonance), (0, 0));
        assert_eq!(r[0].avg_d, None);
        assert!(r[0].censored);
        assert!(build_tenure(&cs, "q", &HashMap::new(), None, &TenureConfig::default()).is_err());
        let short: Vec<Comment> = cs[..100].to_vec();
        assert!(build_tenure(&short, "q", &HashMap::new(), Some(0), &TenureConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn sliding_window_series() {
        let l = [Some(Label::Dissonance), None, Some(Label::Belief), None];
        let s = dissonance_series(&l, DissonanceWindow::Sliding(2)).unwrap();
        assert_eq!(s, vec![1.0, 0.0, 0.0]);
    }
}
