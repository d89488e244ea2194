use nalgebra::{DMatrix, SymmetricEigen};

use crate::embed::EmbeddingTable;
use crate::textprep::{PhraseSequence, PhraseVocab};

pub const SIF_A: f64 = 1e-3;

/// Smooth-inverse-frequency average `sum a/(a+p(w)) v_w / |seq|`, before
/// common-component removal. Tokens missing from the vocabulary add nothing
/// but still count toward `|seq|`.
pub fn sif_raw(seq: &PhraseSequence, vocab: &PhraseVocab, table: &EmbeddingTable, a: f64) -> Vec<f64> {
    let mut v = vec![0.0; table.k];
    if seq.tokens.is_empty() {
        return v;
    }
    let total = vocab.total_count().max(1) as f64;
    for id in seq.ids(vocab).into_iter().flatten() {
        if id as usize >= table.len() {
            continue;
        }
        let p = vocab.count(id) as f64 / total;
        let w = a / (a + p);
        for (acc, x) in v.iter_mut().zip(table.row(id)) {
            *acc += w * x;
        }
    }
    let n = seq.tokens.len() as f64;
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// First principal direction (uncentered) of the document vectors, with
/// its largest-magnitude coordinate made positive. `None` if all are zero.
pub fn common_component(rows: &[Vec<f64>]) -> Option<Vec<f64>> {
    let k = rows.first()?.len();
    let mut gram = DMatrix::<f64>::zeros(k, k);
    for r in rows {
        for i in 0..k {
            if r[i] == 0.0 {
                continue;
            }
            for j in 0..k {
                gram[(i, j)] += r[i] * r[j];
            }
        }
    }
    if gram.iter().all(|&x| x == 0.0) {
        return None;
    }
    let eig = SymmetricEigen::new(gram);
    let top = (0..k).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(b.cmp(&a)))?;
    let mut u: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    let lead = (0..k).max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()).then(b.cmp(&a)))?;
    if u[lead] < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
    Some(u)
}

/// Subtract each row's projection onto the common component. Returns the
/// component that was removed.
pub fn remove_common_component(rows: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let u = common_component(rows)?;
    for r in rows.iter_mut() {
        let p: f64 = r.iter().zip(&u).map(|(a, b)| a * b).sum();
        for (x, ui) in r.iter_mut().zip(&u) {
            *x -= p * ui;
        }
    }
    Some(u)
}
