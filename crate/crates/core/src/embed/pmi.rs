use super::{CoocMatrix, Csr};
use crate::error::{Error, Result};

/// Positive pointwise mutual information over a co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PmiMatrix {
    pub values: Csr,
    /// Row sums of the count matrix.
    pub marginals: Vec<f64>,
    /// Total pair count.
    pub total: f64,
}

/// `max(0, log2(count(i,j) * N / (marg(i) * marg(j))))`, stored sparsely;
/// clipped entries are dropped.
pub fn pmi(cooc: &CoocMatrix) -> Result<PmiMatrix> {
    let counts = &cooc.counts;
    let total = cooc.total();
    if total <= 0.0 {
        return Err(Error::invalid("co-occurrence matrix has no counts"));
    }
    let marginals: Vec<f64> = (0..counts.rows).map(|i| counts.row(i).map(|(_, v)| v).sum()).collect();
    let mut triplets = Vec::with_capacity(counts.nnz());
    for i in 0..counts.rows {
        for (j, c) in counts.row(i) {
            let v = (c * total / (marginals[i] * marginals[j])).log2();
            if v > 0.0 {
                triplets.push((i as u32, j as u32, v));
            }
        }
    }
    Ok(PmiMatrix { values: Csr::from_sorted(counts.rows, counts.cols, &triplets), marginals, total })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cooc_from_dense(d: &[&[f64]]) -> CoocMatrix {
        let n = d.len();
        let mut t = Vec::new();
        for (i, row) in d.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i as u32, j as u32, v));
                }
            }
        }
        CoocMatrix { window: 5, counts: Csr::from_sorted(n, n, &t) }
    }

    #[test]
    fn worked_value_is_two_bits() {
        // count(x,y)=4, marg(x)=marg(y)=10, N=100: log2(4*100/100) = 2.
        // x: 4 with y, 6 with z; y: 4 with x, 6 with z; z absorbs the rest.
        let d: &[&[f64]] = &[&[0.0, 4.0, 6.0], &[4.0, 0.0, 6.0], &[6.0, 6.0, 68.0]];
        let m = pmi(&cooc_from_dense(d)).unwrap();
        assert_eq!(m.total, 100.0);
        assert_eq!(m.marginals[0], 10.0);
        assert!((m.values.get(0, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn independence_and_clipping() {
        // Independent pair: count*N == marg*marg gives exactly 0 (absent).
        let d: &[&[f64]] = &[&[1.0, 1.0], &[1.0, 1.0]];
        let m = pmi(&cooc_from_dense(d)).unwrap();
        assert_eq!(m.values.nnz(), 0);
        // count*N < marg*marg is clipped to zero.
        let d: &[&[f64]] = &[&[0.0, 1.0, 9.0], &[1.0, 0.0, 9.0], &[9.0, 9.0, 0.0]];
        let m = pmi(&cooc_from_dense(d)).unwrap();
        assert_eq!(m.values.get(0, 1), 0.0);
        assert!(m.values.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn empty_matrix_errors() {
        let d: &[&[f64]] = &[&[0.0, 0.0], &[0.0, 0.0]];
        assert!(pmi(&cooc_from_dense(d)).is_err());
    }
}
