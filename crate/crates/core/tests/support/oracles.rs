//! Textbook reference implementations, written independently of the
//! library code they check.

use std::collections::BTreeSet;

/// Cohen's kappa from an explicit confusion matrix, in floating point.
pub fn kappa(a: &[u32], b: &[u32]) -> f64 {
    let alphabet: Vec<u32> = a.iter().chain(b).copied().collect::<BTreeSet<_>>().into_iter().collect();
    let k = alphabet.len();
    let idx = |v: u32| alphabet.iter().position(|&x| x == v).unwrap();
    let mut confusion = vec![vec![0.0f64; k]; k];
    for (&x, &y) in a.iter().zip(b) {
        confusion[idx(x)][idx(y)] += 1.0;
    }
    let n = a.len() as f64;
    let p_o: f64 = (0..k).map(|i| confusion[i][i]).sum::<f64>() / n;
    let p_e: f64 = (0..k)
        .map(|i| {
            let row: f64 = confusion[i].iter().sum();
            let col: f64 = confusion.iter().map(|r| r[i]).sum();
            (row / n) * (col / n)
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return 1.0;
    }
    (p_o - p_e) / (1.0 - p_e)
}

/// Krippendorff's nominal alpha for two coders via the coincidence matrix:
/// alpha = 1 - D_o / D_e.
pub fn alpha(a: &[u32], b: &[u32]) -> f64 {
    let alphabet: Vec<u32> = a.iter().chain(b).copied().collect::<BTreeSet<_>>().into_iter().collect();
    let k = alphabet.len();
    let idx = |v: u32| alphabet.iter().position(|&x| x == v).unwrap();
    let mut o = vec![vec![0.0f64; k]; k];
    for (&x, &y) in a.iter().zip(b) {
        o[idx(x)][idx(y)] += 1.0;
        o[idx(y)][idx(x)] += 1.0;
    }
    let marginals: Vec<f64> = o.iter().map(|r| r.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    let mut d_o = 0.0;
    let mut d_e = 0.0;
    for c in 0..k {
        for kk in 0..k {
            if c != kk {
                d_o += o[c][kk];
                d_e += marginals[c] * marginals[kk];
            }
        }
    }
    let d_o = d_o / n;
    let d_e = d_e / (n * (n - 1.0));
    if d_e == 0.0 {
        return 1.0;
    }
    1.0 - d_o / d_e
}
