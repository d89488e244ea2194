use serde::{Deserialize, Serialize};

use super::{Classifier, Dataset, N_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    /// L2 penalty on non-intercept weights, scaled per example.
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { l2: 1e-3, max_iter: 200, tol: 1e-6 }
    }
}

/// Multinomial logistic regression. `w[k]` holds the intercept followed by
/// one weight per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub w: Vec<Vec<f64>>,
}

fn softmax(z: &mut [f64; 3]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
}

fn scores(w: &[f64], d: usize, x: &[f64]) -> [f64; 3] {
    let mut z = [0.0; 3];
    for (k, zk) in z.iter_mut().enumerate() {
        let wk = &w[k * (d + 1)..(k + 1) * (d + 1)];
        *zk = wk[0] + wk[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
    z
}

/// Mean negative log-likelihood plus penalty, and its gradient.
fn objective(w: &[f64], data: &Dataset, d: usize, l2: f64, grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let n = data.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in data.x.iter().zip(&data.y) {
        let mut p = scores(w, d, x);
        let m = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + p.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - p[y];
        softmax(&mut p);
        for k in 0..N_CLASSES {
            let r = (p[k] - if k == y { 1.0 } else { 0.0 }) / n;
            let g = &mut grad[k * (d + 1)..(k + 1) * (d + 1)];
            g[0] += r;
            for (gj, xj) in g[1..].iter_mut().zip(x) {
                *gj += r * xj;
            }
        }
    }
    loss /= n;
    for k in 0..N_CLASSES {
        for j in 1..=d {
            let i = k * (d + 1) + j;
            loss += 0.5 * l2 * w[i] * w[i];
            grad[i] += l2 * w[i];
        }
    }
    loss
}

impl LogisticModel {
    pub fn zeros(d: usize) -> Self {
        LogisticModel { w: vec![vec![0.0; d + 1]; N_CLASSES] }
    }

    pub fn dim(&self) -> usize {
        self.w[0].len() - 1
    }

    pub fn fit(data: &Dataset, cfg: &LogisticConfig) -> Self {
        let d = data.x.first().map_or(0, Vec::len);
        Self::fit_from(LogisticModel::zeros(d), data, cfg)
    }

    /// L-BFGS starting from `init`, so successive refits stay cheap.
    pub fn fit_from(init: LogisticModel, data: &Dataset, cfg: &LogisticConfig) -> Self {
        if data.is_empty() {
            return init;
        }
        let d = init.dim();
        let mut w: Vec<f64> = init.w.concat();
        let m = 7;
        let mut g = vec![0.0; w.len()];
        let mut f = objective(&w, data, d, cfg.l2, &mut g);
        let mut s_hist: Vec<Vec<f64>> = Vec::new();
        let mut y_hist: Vec<Vec<f64>> = Vec::new();
        let mut g_new = vec![0.0; w.len()];
        for _ in 0..cfg.max_iter {
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm < cfg.tol {
                break;
            }
            // two-loop recursion
            let mut q = g.clone();
            let mut alpha = vec![0.0; s_hist.len()];
            for i in (0..s_hist.len()).rev() {
                let rho = 1.0 / dotv(&y_hist[i], &s_hist[i]);
                alpha[i] = rho * dotv(&s_hist[i], &q);
                axpy(-alpha[i], &y_hist[i], &mut q);
            }
            if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
                let gamma = dotv(s, y) / dotv(y, y);
                q.iter_mut().for_each(|v| *v *= gamma);
            }
            for i in 0..s_hist.len() {
                let rho = 1.0 / dotv(&y_hist[i], &s_hist[i]);
                let beta = rho * dotv(&y_hist[i], &q);
                axpy(alpha[i] - beta, &s_hist[i], &mut q);
            }
            let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
            let mut slope = dotv(&dir, &g);
            if slope >= 0.0 {
                dir = g.iter().map(|v| -v).collect();
                slope = -gnorm * gnorm;
                s_hist.clear();
                y_hist.clear();
            }
            let mut step = 1.0;
            let mut w_new = vec![0.0; w.len()];
            let mut f_new;
            loop {
                for i in 0..w.len() {
                    w_new[i] = w[i] + step * dir[i];
                }
                f_new = objective(&w_new, data, d, cfg.l2, &mut g_new);
                if f_new <= f + 1e-4 * step * slope || step < 1e-12 {
                    break;
                }
                step *= 0.5;
            }
            let s: Vec<f64> = w_new.iter().zip(&w).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let improvement = f - f_new;
            if dotv(&s, &y) > 1e-12 {
                s_hist.push(s);
                y_hist.push(y);
                if s_hist.len() > m {
                    s_hist.remove(0);
                    y_hist.remove(0);
                }
            }
            std::mem::swap(&mut w, &mut w_new);
            std::mem::swap(&mut g, &mut g_new);
            f = f_new;
            if improvement.abs() < cfg.tol * cfg.tol {
                break;
            }
        }
        LogisticModel { w: w.chunks(d + 1).map(<[f64]>::to_vec).collect() }
    }
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

impl Classifier for LogisticModel {
    fn predict_proba(&self, x: &[f64]) -> [f64; 3] {
        let d = self.dim();
        let mut z = [0.0; 3];
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = self.w[k][0] + self.w[k][1..].iter().zip(x).take(d).map(|(a, b)| a * b).sum::<f64>();
        }
        softmax(&mut z);
        z
    }
}
