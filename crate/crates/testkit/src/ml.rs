//! Model-side references: a literal logistic loss and pair-counting ARI.

/// Mean cross-entropy plus (l2/2)·‖w‖², evaluated directly from the definition.
pub fn logistic_loss(w: &[f64], b: f64, x: &[Vec<f64>], y: &[u8], l2: f64) -> f64 {
    let mut total = 0.0;
    for (row, label) in x.iter().zip(y) {
        let z: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        let p = 1.0 / (1.0 + (-z).exp());
        total += if *label == 1 { -p.ln() } else { -(1.0 - p).ln() };
    }
    let norm: f64 = w.iter().map(|v| v * v).sum();
    total / x.len() as f64 + 0.5 * l2 * norm
}

/// Adjusted Rand index from the four pair counts over all n(n−1)/2 pairs.
pub fn ari_pairs(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut neither) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let total = both + only_a + only_b + neither;
    let same_a = both + only_a;
    let same_b = both + only_b;
    let expected = same_a * same_b / total;
    let max = (same_a + same_b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

/// Relative error, compared absolutely when both sides are effectively zero.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-7 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}
