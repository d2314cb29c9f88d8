use std::collections::BTreeMap;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_matrix, check_row, MlError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iters: 300,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia of each assignment step, in order.
    pub inertia_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, lowest index on ties.
fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn plus_plus(x: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![x[first].clone()];
    let mut d2: Vec<f64> = x.iter().map(|p| sq_dist(p, &x[first])).collect();
    while centroids.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // every remaining point coincides with a centroid
            Err(_) => {
                let free: Vec<usize> = (0..n).filter(|i| !chosen[*i]).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        chosen[next] = true;
        centroids.push(x[next].clone());
        for (dist, p) in d2.iter_mut().zip(x) {
            *dist = dist.min(sq_dist(p, &x[next]));
        }
    }
    centroids
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans_fit(x: &[Vec<f64>], k: usize, cfg: &KMeansConfig) -> Result<Clustering, MlError> {
    let d = check_matrix(x)?;
    if k == 0 {
        return Err(MlError::InvalidConfig("k must be >= 1".into()));
    }
    if k > x.len() {
        return Err(MlError::KTooLarge { k, n: x.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centroids = plus_plus(x, k, &mut rng);
    let mut assign = vec![0usize; x.len()];
    let mut dists = vec![0.0; x.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let mut inertia = 0.0;
        for (i, p) in x.iter().enumerate() {
            let (c, dist) = nearest(&centroids, p);
            assign[i] = c;
            dists[i] = dist;
            inertia += dist;
        }
        history.push(inertia);
        if iterations >= cfg.max_iters {
            break;
        }
        iterations += 1;
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, c) in x.iter().zip(&assign) {
            counts[*c] += 1;
            for (s, v) in sums[*c].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        let mut taken = vec![false; x.len()];
        for c in 0..k {
            let new = if counts[c] > 0 {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            } else {
                // reseed an empty cluster at the point farthest from its centroid
                let far = (0..x.len())
                    .filter(|i| !taken[*i])
                    .max_by(|a, b| dists[*a].total_cmp(&dists[*b]).then(b.cmp(a)))
                    .expect("k <= n leaves a free point");
                taken[far] = true;
                x[far].clone()
            };
            shift = shift.max(sq_dist(&new, &centroids[c]).sqrt());
            centroids[c] = new;
        }
        if shift < cfg.tol {
            // one last assignment against the settled centroids
            push_final_inertia(x, &centroids, &mut history);
            break;
        }
    }
    let inertia = *history.last().expect("at least one assignment step");
    Ok(Clustering {
        centroids,
        inertia,
        iterations,
        inertia_history: history,
    })
}

fn push_final_inertia(x: &[Vec<f64>], centroids: &[Vec<f64>], history: &mut Vec<f64>) {
    let inertia = x.iter().map(|p| nearest(centroids, p).1).sum();
    history.push(inertia);
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn assign(&self, x: &[f64]) -> Result<usize, MlError> {
        check_row(x, self.centroids[0].len())?;
        Ok(nearest(&self.centroids, x).0)
    }
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Hubert-Arabie adjusted Rand index of two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64, MlError> {
    if a.len() != b.len() {
        return Err(MlError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((*x, *y)).or_default() += 1;
        *rows.entry(*x).or_default() += 1;
        *cols.entry(*y).or_default() += 1;
    }
    let index: f64 = table.values().map(|v| choose2(*v)).sum();
    let sa: f64 = rows.values().map(|v| choose2(*v)).sum();
    let sb: f64 = cols.values().map(|v| choose2(*v)).sum();
    let total = choose2(a.len() as u64);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = (sa + sb) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_one_is_the_mean() {
        let x = vec![vec![0.0, 0.0], vec![2.0, 4.0], vec![4.0, 2.0]];
        let c = kmeans_fit(&x, 1, &KMeansConfig::default()).unwrap();
        assert!((c.centroids[0][0] - 2.0).abs() < 1e-12);
        assert!((c.centroids[0][1] - 2.0).abs() < 1e-12);
        assert_eq!(c.assign(&[100.0, -3.0]).unwrap(), 0);
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let x = vec![vec![0.0], vec![1.0], vec![1.0], vec![5.0], vec![9.0]];
        let c = kmeans_fit(&x, 5, &KMeansConfig::default()).unwrap();
        assert_eq!(c.inertia, 0.0);
        assert_eq!(
            kmeans_fit(&x, 6, &KMeansConfig::default()),
            Err(MlError::KTooLarge { k: 6, n: 5 })
        );
    }

    #[test]
    fn ari_examples() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap(), 1.0);
        // contingency [[1,1],[1,1]]: index 0, expected 2·2/6, max 2
        assert!((adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap() + 0.5).abs() < 1e-12);
    }
}
