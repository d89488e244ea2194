use std::fmt::Write as _;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest mark a rank-deficient
/// design.
const RANK_TOL: f64 = 1e-10;
pub const MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefRow {
    pub name: String,
    pub coef: f64,
    pub std_err: f64,
    pub stat: f64,
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl CoefRow {
    /// Wald row; `df` selects Student t, `None` the normal.
    pub fn wald(name: &str, coef: f64, std_err: f64, df: Option<f64>) -> Self {
        let stat = coef / std_err;
        let (p, q) = match df {
            Some(df) => {
                let t = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
                (2.0 * t.sf(stat.abs()), t.inverse_cdf(0.975))
            }
            None => {
                let z = Normal::standard();
                (2.0 * z.sf(stat.abs()), z.inverse_cdf(0.975))
            }
        };
        CoefRow {
            name: name.to_string(),
            coef,
            std_err,
            stat,
            p: p.clamp(0.0, 1.0),
            ci_low: coef - q * std_err,
            ci_high: coef + q * std_err,
        }
    }

    pub fn significant(&self) -> bool {
        self.p < 0.05
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

pub fn check_rank(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    if x.nrows() < x.ncols() {
        return Err(Error::RankDeficient(format!("{} rows for {} columns", x.nrows(), x.ncols())));
    }
    let sv = x.clone().svd(false, false).singular_values;
    let max = sv.max();
    if !(max > 0.0) || sv.iter().any(|&s| s < RANK_TOL * max) {
        return Err(Error::RankDeficient(format!("columns {}", names.join(", "))));
    }
    Ok(())
}

fn check_finite(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression input".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coef: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub rss: f64,
    pub df_resid: f64,
    pub r2: f64,
    pub residuals: DVector<f64>,
}

/// Ordinary least squares with classical covariance, or the cluster-robust
/// sandwich when `clusters` is given.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String], clusters: Option<&[usize]>) -> Result<OlsFit> {
    check_finite(x, y)?;
    check_rank(x, names)?;
    let (n, k) = (x.nrows(), x.ncols());
    if n <= k {
        return Err(Error::RankDeficient(format!("{n} observations for {k} coefficients")));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient(names.join(", ")))?;
    let residuals = y - x * &coef;
    let rss = residuals.norm_squared();
    let df_resid = (n - k) as f64;
    let xtx_inv = (x.transpose() * x)
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient(names.join(", ")))?;
    let cov = match clusters {
        None => &xtx_inv * (rss / df_resid),
        Some(g) => {
            let groups = g.iter().copied().max().map_or(0, |m| m + 1);
            let mut scores = DMatrix::<f64>::zeros(groups, k);
            for i in 0..n {
                for j in 0..k {
                    scores[(g[i], j)] += x[(i, j)] * residuals[i];
                }
            }
            let meat = scores.transpose() * &scores;
            let gf = groups as f64;
            let c = gf / (gf - 1.0) * (n as f64 - 1.0) / df_resid;
            &xtx_inv * meat * &xtx_inv * c
        }
    };
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };
    Ok(OlsFit { coef, cov, rss, df_resid, r2, residuals })
}

/// Newton's method with step halving on a concave log-likelihood.
/// `eval` returns (loglik, gradient, hessian) or `None` outside the domain.
fn newton<F>(mut theta: DVector<f64>, mut eval: F, what: &str) -> Result<(DVector<f64>, DMatrix<f64>, f64, usize)>
where
    F: FnMut(&DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)>,
{
    let mut trace = Vec::new();
    let (mut ll, mut g, mut h) = eval(&theta).ok_or_else(|| Error::NonFinite(format!("{what} start")))?;
    for it in 1..=MAX_ITER {
        trace.push(ll);
        let neg_h = -&h;
        let mut ridge = 0.0;
        let step = loop {
            let m = &neg_h + DMatrix::identity(h.nrows(), h.ncols()) * ridge;
            if let Some(ch) = m.cholesky() {
                break ch.solve(&g);
            }
            ridge = if ridge == 0.0 { 1e-8 * neg_h.diagonal().abs().max().max(1.0) } else { ridge * 10.0 };
            if ridge > 1e12 {
                return Err(Error::NoConvergence { iterations: it, trace: fmt_trace(&trace) });
            }
        };
        let mut t = 1.0;
        let accepted = loop {
            let cand = &theta + &step * t;
            if let Some((l2, g2, h2)) = eval(&cand) {
                if l2 >= ll - 1e-12 * ll.abs().max(1.0) {
                    break Some((cand, l2, g2, h2));
                }
            }
            t *= 0.5;
            if t < 1e-10 {
                break None;
            }
        };
        let Some((cand, l2, g2, h2)) = accepted else {
            return Err(Error::NoConvergence { iterations: it, trace: fmt_trace(&trace) });
        };
        let moved = (&cand - &theta).amax();
        let gain = l2 - ll;
        theta = cand;
        ll = l2;
        g = g2;
        h = h2;
        if moved < 1e-8 || (gain.abs() < 1e-12 * ll.abs().max(1.0) && g.amax() < 1e-6) {
            return Ok((theta, h, ll, it));
        }
    }
    trace.push(ll);
    Err(Error::NoConvergence { iterations: MAX_ITER, trace: fmt_trace(&trace) })
}

fn fmt_trace(trace: &[f64]) -> String {
    let mut s = String::from("loglik");
    for v in trace.iter().rev().take(10).rev() {
        let _ = write!(s, " {v:.6}");
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub coef: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub loglik: f64,
    pub iterations: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic regression by Newton's method. A positive `ridge` adds
/// `ridge/2 * |beta|^2` (intercept excluded when column 0 is constant).
pub fn logit(x: &DMatrix<f64>, y: &[bool], names: &[String], ridge: f64) -> Result<MleFit> {
    let yv = DVector::from_iterator(y.len(), y.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    check_finite(x, &yv)?;
    check_rank(x, names)?;
    let k = x.ncols();
    let penal = |j: usize| j > 0 || x.column(0).iter().any(|&v| v != 1.0);
    let eval = |b: &DVector<f64>| {
        let eta = x * b;
        let mut ll = 0.0;
        let mut g = DVector::zeros(k);
        let mut h = DMatrix::zeros(k, k);
        for i in 0..x.nrows() {
            let p = sigmoid(eta[i]);
            // log(1+e^eta) computed stably
            let sp = if eta[i] > 0.0 { eta[i] + (-eta[i]).exp().ln_1p() } else { eta[i].exp().ln_1p() };
            ll += yv[i] * eta[i] - sp;
            let w = p * (1.0 - p);
            let xi = x.row(i).transpose();
            g += &xi * (yv[i] - p);
            h -= &xi * xi.transpose() * w;
        }
        for j in (0..k).filter(|&j| penal(j)) {
            ll -= 0.5 * ridge * b[j] * b[j];
            g[j] -= ridge * b[j];
            h[(j, j)] -= ridge;
        }
        ll.is_finite().then_some((ll, g, h))
    };
    let (coef, h, loglik, iterations) = newton(DVector::zeros(k), eval, "logit")?;
    let cov = (-h).try_inverse().ok_or_else(|| Error::RankDeficient(names.join(", ")))?;
    if ridge == 0.0 {
        // Separated data: coefficients run off, the likelihood saturates or
        // the curvature vanishes.
        let max_var = cov.diagonal().amax();
        if coef.amax() > 50.0 || loglik > -1e-6 || max_var > 1e8 {
            return Err(Error::NoConvergence {
                iterations,
                trace: format!(
                    "data look separable (max |beta| {:.1}, loglik {loglik:.2e}, max variance {max_var:.2e})",
                    coef.amax()
                ),
            });
        }
    }
    Ok(MleFit { coef, cov, loglik, iterations })
}

/// Fixed-width table cell; large magnitudes switch to scientific notation.
fn cell(v: f64, precision: usize) -> String {
    if v.is_finite() && v.abs() >= 1e5 {
        format!("{v:.2e}")
    } else {
        format!("{v:.precision$}")
    }
}

/// Per-observation NB2 pieces in terms of eta = x'beta and a = ln(alpha).
/// Returns (loglik, d/deta, d2/deta2, d/da, d2/da2, d2/deta da).
fn nb2_terms(y: f64, eta: f64, a: f64) -> (f64, f64, f64, f64, f64, f64) {
    let mu = eta.exp();
    let alpha = a.exp();
    let r = 1.0 / alpha;
    let yi = y as u64;
    // lgamma(y+r) - lgamma(r) and its first two r-derivatives as finite sums
    let (mut lg, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for j in 0..yi {
        let v = r + j as f64;
        lg += v.ln();
        d1 += 1.0 / v;
        d2 -= 1.0 / (v * v);
    }
    let ll = lg - statrs::function::gamma::ln_gamma(y + 1.0) + r * (r / (r + mu)).ln() + y * (mu / (r + mu)).ln();
    let l_eta = (y - mu) / (1.0 + alpha * mu);
    let l_eta2 = -mu * (1.0 + alpha * y) / (1.0 + alpha * mu).powi(2);
    let g_r = d1 + (r / (r + mu)).ln() + (mu - y) / (r + mu);
    let h_rr = d2 + 1.0 / r - 1.0 / (r + mu) - (mu - y) / (r + mu).powi(2);
    let l_alpha = -g_r / (alpha * alpha);
    let l_alpha2 = 2.0 * g_r / alpha.powi(3) + h_rr / alpha.powi(4);
    let l_eta_alpha = -mu * (y - mu) / ((r + mu).powi(2) * alpha * alpha);
    let l_a = alpha * l_alpha;
    let l_a2 = alpha * alpha * l_alpha2 + alpha * l_alpha;
    let l_eta_a = alpha * l_eta_alpha;
    (ll, l_eta, l_eta2, l_a, l_a2, l_eta_a)
}

/// Lower bound on ln(alpha); fits that reach it are reported at the
/// Poisson limit with an undefined alpha standard error.
pub const LN_ALPHA_MIN: f64 = -25.0;

/// Negative binomial (NB2, log link) by joint Newton over beta and
/// ln(alpha). Counts must be non-negative integers.
pub fn negbin(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<(MleFit, CoefRow)> {
    let yv = DVector::from_column_slice(y);
    check_finite(x, &yv)?;
    if y.iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
        return Err(Error::invalid("negative binomial outcome must be non-negative integer counts"));
    }
    check_rank(x, names)?;
    let (n, k) = (x.nrows(), x.ncols());
    let mean = yv.mean().max(1e-3);
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let alpha0 = ((var - mean) / (mean * mean)).clamp(1e-3, 10.0);
    // start from the intercept-only mean when column 0 is constant
    let mut start = DVector::zeros(k + 1);
    if x.column(0).iter().all(|&v| v == 1.0) {
        start[0] = mean.ln();
    }
    start[k] = alpha0.ln();
    let eval = |th: &DVector<f64>| {
        let a = th[k];
        if !(LN_ALPHA_MIN..=10.0).contains(&a) {
            return None;
        }
        let beta = th.rows(0, k);
        let eta = x * beta;
        let mut ll = 0.0;
        let mut g = DVector::zeros(k + 1);
        let mut h = DMatrix::zeros(k + 1, k + 1);
        for i in 0..n {
            if eta[i] > 50.0 {
                return None;
            }
            let (l, le, le2, la, la2, lea) = nb2_terms(y[i], eta[i], a);
            ll += l;
            for p in 0..k {
                let xp = x[(i, p)];
                g[p] += le * xp;
                for q in 0..=p {
                    h[(p, q)] += le2 * xp * x[(i, q)];
                }
                h[(k, p)] += lea * xp;
            }
            g[k] += la;
            h[(k, k)] += la2;
        }
        for p in 0..=k {
            for q in 0..p {
                h[(q, p)] = h[(p, q)];
            }
        }
        ll.is_finite().then_some((ll, g, h))
    };
    let (theta, h, loglik, iterations, boundary) = match newton(start.clone(), &eval, "negative binomial") {
        Ok((t, h, l, i)) => (t, h, l, i, false),
        Err(e @ Error::NoConvergence { .. }) => {
            // Underdispersed counts push ln(alpha) to its lower bound: fit
            // beta at the Poisson limit and keep it if the likelihood still
            // rises toward the bound there.
            let with_a = |b: &DVector<f64>| {
                b.clone().insert_row(k, LN_ALPHA_MIN)
            };
            let fixed = |b: &DVector<f64>| {
                eval(&with_a(b)).map(|(l, g, h)| (l, g.rows(0, k).clone_owned(), h.view((0, 0), (k, k)).clone_owned()))
            };
            let Ok((beta, hb, l, i)) = newton(start.rows(0, k).clone_owned(), fixed, "poisson limit") else {
                return Err(e);
            };
            let theta = with_a(&beta);
            let (_, g, _) = eval(&theta).ok_or(e)?;
            if g[k] > 1e-6 * l.abs().max(1.0) {
                return Err(Error::NoConvergence { iterations: MAX_ITER, trace: "alpha neither interior nor at the Poisson limit".into() });
            }
            let mut h = DMatrix::zeros(k + 1, k + 1);
            h.view_mut((0, 0), (k, k)).copy_from(&hb);
            (theta, h, l, i, true)
        }
        Err(e) => return Err(e),
    };
    let neg_h = -h;
    let cov = neg_h.clone().try_inverse().unwrap_or_else(|| {
        // boundary alpha: fall back to the beta block with alpha held fixed
        let mut c = DMatrix::zeros(k + 1, k + 1);
        if let Some(b) = neg_h.view((0, 0), (k, k)).clone_owned().try_inverse() {
            c.view_mut((0, 0), (k, k)).copy_from(&b);
        }
        c
    });
    let alpha = theta[k].exp();
    let alpha_se = if boundary { f64::NAN } else { alpha * cov[(k, k)].max(0.0).sqrt() };
    let alpha_row = CoefRow::wald("alpha", alpha, alpha_se, None);
    Ok((
        MleFit { coef: theta.rows(0, k).clone_owned(), cov: cov.view((0, 0), (k, k)).clone_owned(), loglik, iterations },
        alpha_row,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NegativeBinomial,
    Ols,
    Logit,
}

/// Coefficient table plus fit statistics, laid out like a statistics
/// package summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub model: ModelKind,
    pub dep_variable: String,
    pub n: usize,
    pub df_resid: usize,
    pub df_model: usize,
    pub rows: Vec<CoefRow>,
    pub log_likelihood: Option<f64>,
    pub ll_null: Option<f64>,
    pub r_squared: Option<f64>,
    pub adj_r_squared: Option<f64>,
    pub iterations: Option<usize>,
}

impl RegressionReport {
    pub fn row(&self, name: &str) -> Option<&CoefRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    fn stat_label(&self) -> &'static str {
        match self.model {
            ModelKind::Ols => "t",
            _ => "z",
        }
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let model = match self.model {
            ModelKind::NegativeBinomial => "NegativeBinomial",
            ModelKind::Ols => "OLS",
            ModelKind::Logit => "Logit",
        };
        writeln!(w, "Dep. Variable: {:>28}   No. Observations: {:>10}", self.dep_variable, self.n)?;
        writeln!(w, "Model: {:>36}   Df Residuals: {:>14}", model, self.df_resid)?;
        writeln!(w, "Method: {:>35}   Df Model: {:>18}", if self.model == ModelKind::Ols { "Least Squares" } else { "MLE" }, self.df_model)?;
        if let Some(r2) = self.r_squared {
            writeln!(w, "R-squared: {:>32.3}   Adj. R-squared: {:>12.3}", r2, self.adj_r_squared.unwrap_or(f64::NAN))?;
        }
        if let Some(ll) = self.log_likelihood {
            writeln!(w, "Log-Likelihood: {ll:>27.1}")?;
        }
        if let (Some(ll), Some(null)) = (self.log_likelihood, self.ll_null) {
            writeln!(w, "LL-Null: {null:>34.1}   Pseudo R-squ.: {:>13.5}", 1.0 - ll / null)?;
        }
        let s = self.stat_label();
        writeln!(w)?;
        writeln!(
            w,
            "{:<16}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}",
            "",
            "coef",
            "std err",
            s,
            format!("P>|{s}|"),
            "[0.025",
            "0.975]"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{:<16}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}",
                r.name,
                cell(r.coef, 4),
                cell(r.std_err, 3),
                cell(r.stat, 3),
                cell(r.p, 3),
                cell(r.ci_low, 3),
                cell(r.ci_high, 3)
            )?;
        }
        Ok(())
    }

    /// One JSON object per coefficient.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.rows {
            serde_json::to_writer(&mut w, &serde_json::json!({ "model": self.model, "dep_variable": self.dep_variable, "row": r }))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn ols_exact_line() {
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_fn(10, |i, _| 2.0 - 0.5 * i as f64);
        let f = ols(&x, &y, &names(2), None).unwrap();
        assert!((f.coef[0] - 2.0).abs() < 1e-12 && (f.coef[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn collinear_design_rejected() {
        let x = DMatrix::from_fn(10, 3, |i, j| if j == 0 { 1.0 } else { i as f64 * j as f64 });
        let y = DVector::from_fn(10, |i, _| i as f64);
        assert!(matches!(ols(&x, &y, &names(3), None), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn nb2_derivatives_match_finite_differences() {
        for &(y, eta, a) in &[(0.0, 0.3, -1.0), (7.0, 1.2, -0.5), (30.0, 3.0, 0.4)] {
            let (_, le, le2, la, la2, lea) = nb2_terms(y, eta, a);
            let h = 1e-5;
            let f = |e: f64, aa: f64| nb2_terms(y, e, aa).0;
            let fd_e = (f(eta + h, a) - f(eta - h, a)) / (2.0 * h);
            let fd_a = (f(eta, a + h) - f(eta, a - h)) / (2.0 * h);
            let fd_ee = (nb2_terms(y, eta + h, a).1 - nb2_terms(y, eta - h, a).1) / (2.0 * h);
            let fd_aa = (nb2_terms(y, eta, a + h).3 - nb2_terms(y, eta, a - h).3) / (2.0 * h);
            let fd_ea = (nb2_terms(y, eta, a + h).1 - nb2_terms(y, eta, a - h).1) / (2.0 * h);
            for (an, fd) in [(le, fd_e), (la, fd_a), (le2, fd_ee), (la2, fd_aa), (lea, fd_ea)] {
                assert!((an - fd).abs() < 1e-5 * (1.0 + fd.abs()), "{an} vs {fd}");
            }
        }
    }

    #[test]
    fn nb2_loglik_matches_pmf() {
        // alpha = 0.5, mu = 2, y = 3: Gamma(3+2)/(Gamma(2) 3!) (2/4)^2 (2/4)^3
        let (ll, ..) = nb2_terms(3.0, 2f64.ln(), 0.5f64.ln());
        let pmf: f64 = 24.0 / 6.0 * 0.25 * 0.125;
        assert!((ll - pmf.ln()).abs() < 1e-12);
    }

    #[test]
    fn separable_logit_fails_or_ridges() {
        let x = DMatrix::from_fn(20, 2, |i, j| if j == 0 { 1.0 } else { i as f64 - 9.5 });
        let y: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        assert!(matches!(logit(&x, &y, &names(2), 0.0), Err(Error::NoConvergence { .. })));
        let f = logit(&x, &y, &names(2), 1.0).unwrap();
        assert!(f.coef.iter().all(|v| v.is_finite()) && f.coef[1] > 0.0);
    }

    #[test]
    fn separated_logit_with_many_regressors_is_reported() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let x = DMatrix::from_fn(13, 7, |_, j| if j == 0 { 1.0 } else { nd.sample(&mut rng) });
        let y: Vec<bool> = (0..13).map(|i| x[(i, 1)] + 0.5 * x[(i, 2)] > 0.0).collect();
        assert!(matches!(logit(&x, &y, &names(7), 0.0), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn underdispersed_counts_fit_at_poisson_limit() {
        use rand::SeedableRng;
        use rand_distr::{Binomial, Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let bin = Binomial::new(20, 0.5).unwrap();
        let n = 300;
        let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { nd.sample(&mut rng) });
        let y: Vec<f64> = (0..n).map(|_| bin.sample(&mut rng) as f64).collect();
        let (fit, alpha) = negbin(&x, &y, &names(2)).unwrap();
        assert!(alpha.coef < 1e-6, "{alpha:?}");
        assert!((fit.coef[0] - 10f64.ln()).abs() < 0.05, "{}", fit.coef[0]);
        assert!(fit.cov[(1, 1)] > 0.0 && fit.cov[(1, 1)].is_finite());
    }

    #[test]
    fn wald_row_values() {
        let r = CoefRow::wald("b", 2.0, 1.0, None);
        assert!((r.p - 0.04550026389635842).abs() < 1e-9);
        assert!((r.ci_high - (2.0 + 1.959963984540054)).abs() < 1e-9);
    }
}
