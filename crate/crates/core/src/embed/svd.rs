use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Csr;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// Left singular vectors, `rows x k`.
    pub u: DMatrix<f64>,
    /// Singular values, non-increasing.
    pub sigma: Vec<f64>,
    /// Right singular vectors, `k x cols`.
    pub vt: DMatrix<f64>,
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Seeded randomized truncated SVD (range finder with power iterations).
pub fn randomized_svd(a: &Csr, k: usize, oversample: usize, power_iters: usize, seed: u64) -> Result<TruncatedSvd> {
    let dim = a.rows.min(a.cols);
    if k == 0 {
        return Err(Error::invalid("rank must be >= 1"));
    }
    if k > dim {
        return Err(Error::RankTooLarge { requested: k, available: dim });
    }
    let l = (k + oversample).min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(a.cols, l, |_, _| StandardNormal.sample(&mut rng));

    let mut q = orthonormalize(a.mul_dense(&omega));
    for _ in 0..power_iters {
        let z = orthonormalize(a.tmul_dense(&q));
        q = orthonormalize(a.mul_dense(&z));
    }
    let b = a.tmul_dense(&q).transpose();
    let svd = b.svd(true, true);
    let (ub, vtb) = (svd.u.expect("requested u"), svd.v_t.expect("requested v_t"));

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    order.truncate(k);

    let u_full = &q * &ub;
    let u = DMatrix::from_fn(a.rows, k, |r, c| u_full[(r, order[c])]);
    let vt = DMatrix::from_fn(k, a.cols, |r, c| vtb[(order[r], c)]);
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    Ok(TruncatedSvd { u, sigma, vt })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_csr(m: &DMatrix<f64>) -> Csr {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push((i as u32, j as u32, m[(i, j)]));
                }
            }
        }
        Csr::from_sorted(m.nrows(), m.ncols(), &t)
    }

    #[test]
    fn rank_one_has_single_singular_value() {
        let x = DMatrix::from_fn(30, 1, |i, _| (i as f64 + 1.0).sqrt());
        let y = DMatrix::from_fn(1, 25, |_, j| 1.0 + (j % 4) as f64);
        let a = dense_to_csr(&(&x * &y));
        let s = randomized_svd(&a, 10, 5, 2, 7).unwrap();
        assert!(s.sigma[0] > 0.0);
        for &v in &s.sigma[1..] {
            assert!(v <= 1e-6 * s.sigma[0], "{v}");
        }
    }

    #[test]
    fn matches_exact_singular_values() {
        let m = DMatrix::from_fn(20, 20, |i, j| if (i * 7 + j * 3) % 5 == 0 { (i + j) as f64 / 10.0 } else { 0.0 });
        let exact = m.clone().svd(false, false).singular_values;
        let mut exact: Vec<f64> = exact.iter().copied().collect();
        exact.sort_by(|a, b| b.total_cmp(a));
        let s = randomized_svd(&dense_to_csr(&m), 5, 10, 3, 1).unwrap();
        for (a, b) in s.sigma.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-8 * exact[0], "{a} vs {b}");
        }
        assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rank_bounds() {
        let a = dense_to_csr(&DMatrix::identity(4, 4));
        assert!(matches!(randomized_svd(&a, 5, 0, 2, 0), Err(Error::RankTooLarge { requested: 5, available: 4 })));
        assert!(randomized_svd(&a, 0, 0, 2, 0).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let m = DMatrix::from_fn(15, 15, |i, j| ((i * j) % 7) as f64);
        let a = dense_to_csr(&m);
        let s1 = randomized_svd(&a, 4, 3, 2, 42).unwrap();
        let s2 = randomized_svd(&a, 4, 3, 2, 42).unwrap();
        assert_eq!(s1.u, s2.u);
        assert_eq!(s1.sigma, s2.sigma);
    }
}
