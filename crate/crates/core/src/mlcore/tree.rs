//! Greedy CART regression trees on (gradient, hessian) sums.
//!
//! With unit hessians the split gain is the reduction in squared error and
//! a leaf holds the mean target. Ties are broken towards the lowest feature
//! index, then the lowest threshold, because candidates are scanned in that
//! order and only a strictly better gain replaces the incumbent.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_matrix, check_row, MlError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_gain: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 3,
            min_samples_leaf: 1,
            min_gain: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Root is `nodes[0]`.
    pub nodes: Vec<Node>,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub n_features: usize,
}

impl RegressionTree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Unchecked prediction for callers that validated `x` already.
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, MlError> {
        check_row(x, self.n_features)?;
        Ok(self.eval(x))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { value } => Some(*value),
                Node::Split { .. } => None,
            })
            .collect()
    }

    pub(crate) fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= factor;
            }
        }
    }
}

/// Row indices of every feature column, sorted by value then row index.
pub(crate) struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub(crate) fn new(x: &[Vec<f64>], d: usize) -> Self {
        let order = (0..d)
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.len() as u32).collect();
                idx.sort_by(|a, b| x[*a as usize][f].total_cmp(&x[*b as usize][f]).then(a.cmp(b)));
                idx
            })
            .collect();
        Self { order }
    }

    fn restrict(&self, include: &[bool]) -> Vec<Vec<u32>> {
        self.order
            .iter()
            .map(|col| col.iter().copied().filter(|r| include[*r as usize]).collect())
            .collect()
    }
}

/// Per-split feature sampling for random forests.
pub(crate) struct FeatureSampler<'a> {
    pub mtry: usize,
    pub rng: &'a mut ChaCha8Rng,
}

pub(crate) struct Grown {
    pub tree: RegressionTree,
    /// (feature, gain) for every split made.
    pub gains: Vec<(usize, f64)>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    g: &'a [f64],
    h: &'a [f64],
    cfg: &'a TreeConfig,
    sampler: Option<FeatureSampler<'a>>,
    mark: Vec<bool>,
    nodes: Vec<Node>,
    gains: Vec<(usize, f64)>,
    d: usize,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    /// Position in the feature's sorted list of the last row going left.
    cut: usize,
}

impl Builder<'_> {
    fn build(&mut self, lists: Vec<Vec<u32>>, depth: usize) -> usize {
        let rows = &lists[0];
        let (big_g, big_h) = rows.iter().fold((0.0, 0.0), |(sg, sh), r| {
            (sg + self.g[*r as usize], sh + self.h[*r as usize])
        });
        let value = if big_h > 0.0 { big_g / big_h } else { 0.0 };
        let idx = self.nodes.len();
        self.nodes.push(Node::Leaf { value });
        let n = rows.len();
        let min_leaf = self.cfg.min_samples_leaf.max(1);
        if depth >= self.cfg.max_depth || n < 2 * min_leaf || big_h <= 0.0 {
            return idx;
        }
        let features: Vec<usize> = match &mut self.sampler {
            None => (0..self.d).collect(),
            Some(s) => {
                let mut f = sample(s.rng, self.d, s.mtry.min(self.d)).into_vec();
                f.sort_unstable();
                f
            }
        };
        let parent = big_g * big_g / big_h;
        let mut best: Option<Candidate> = None;
        for f in features {
            let list = &lists[f];
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..n - 1 {
                let r = list[i] as usize;
                gl += self.g[r];
                hl += self.h[r];
                let n_left = i + 1;
                if n_left < min_leaf {
                    continue;
                }
                if n - n_left < min_leaf {
                    break;
                }
                let v = self.x[r][f];
                let next = self.x[list[i + 1] as usize][f];
                if v == next {
                    continue;
                }
                let (gr, hr) = (big_g - gl, big_h - hl);
                if hl <= 0.0 || hr <= 0.0 {
                    continue;
                }
                let gain = gl * gl / hl + gr * gr / hr - parent;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        gain,
                        cut: i,
                    });
                }
            }
        }
        // with non-negative min_gain, ignore gains that are only rounding noise
        let floor = if self.cfg.min_gain >= 0.0 {
            self.cfg.min_gain.max(1e-12 * parent.abs())
        } else {
            self.cfg.min_gain
        };
        let Some(best) = best.filter(|b| b.gain > floor) else {
            return idx;
        };
        for r in &lists[best.feature][..=best.cut] {
            self.mark[*r as usize] = true;
        }
        let mut left_lists = Vec::with_capacity(self.d);
        let mut right_lists = Vec::with_capacity(self.d);
        for list in &lists {
            let (l, r): (Vec<u32>, Vec<u32>) = list.iter().partition(|r| self.mark[**r as usize]);
            left_lists.push(l);
            right_lists.push(r);
        }
        for r in &lists[best.feature][..=best.cut] {
            self.mark[*r as usize] = false;
        }
        drop(lists);
        self.gains.push((best.feature, best.gain.max(0.0)));
        let left = self.build(left_lists, depth + 1);
        let right = self.build(right_lists, depth + 1);
        self.nodes[idx] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        idx
    }
}

/// Grows one tree on the rows with positive hessian. `g[i]` is the
/// hessian-weighted target `h[i]·t[i]`.
pub(crate) fn grow(
    x: &[Vec<f64>],
    d: usize,
    presorted: &Presorted,
    g: &[f64],
    h: &[f64],
    cfg: &TreeConfig,
    sampler: Option<FeatureSampler<'_>>,
) -> Grown {
    let include: Vec<bool> = h.iter().map(|v| *v > 0.0).collect();
    let lists = presorted.restrict(&include);
    let mut b = Builder {
        x,
        g,
        h,
        cfg,
        sampler,
        mark: vec![false; x.len()],
        nodes: Vec::new(),
        gains: Vec::new(),
        d,
    };
    if d == 0 {
        // no features: a single leaf over every included row
        let (sg, sh) = g.iter().zip(h).fold((0.0, 0.0), |(a, b), (gi, hi)| (a + gi, b + hi));
        b.nodes.push(Node::Leaf {
            value: if sh > 0.0 { sg / sh } else { 0.0 },
        });
    } else {
        b.build(lists, 0);
    }
    Grown {
        tree: RegressionTree {
            nodes: b.nodes,
            max_depth: cfg.max_depth,
            min_samples_leaf: cfg.min_samples_leaf,
            n_features: d,
        },
        gains: b.gains,
    }
}

/// Fits a regression tree. With `hessians` the leaf values are
/// hessian-weighted means and the gain is the second-order gain.
pub fn train_tree(
    x: &[Vec<f64>],
    targets: &[f64],
    hessians: Option<&[f64]>,
    cfg: &TreeConfig,
) -> Result<RegressionTree, MlError> {
    if x.len() != targets.len() {
        return Err(MlError::LengthMismatch {
            left: x.len(),
            right: targets.len(),
        });
    }
    let d = check_matrix(x)?;
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(MlError::NonFiniteInput);
    }
    let h: Vec<f64> = match hessians {
        None => vec![1.0; x.len()],
        Some(h) => {
            if h.len() != x.len() {
                return Err(MlError::LengthMismatch {
                    left: x.len(),
                    right: h.len(),
                });
            }
            if h.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(MlError::NonFiniteInput);
            }
            h.to_vec()
        }
    };
    let g: Vec<f64> = targets.iter().zip(&h).map(|(t, w)| t * w).collect();
    let presorted = Presorted::new(x, d);
    Ok(grow(x, d, &presorted, &g, &h, cfg, None).tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_targets_make_one_leaf() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let t = vec![0.3; 20];
        let tree = train_tree(&x, &t, None, &TreeConfig::default()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert!((tree.predict(&[4.0, 1.0]).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn two_values_one_split() {
        let x = vec![vec![1.0], vec![1.0], vec![5.0], vec![5.0]];
        let t = vec![1.0, 1.0, 5.0, 5.0];
        let tree = train_tree(&x, &t, None, &TreeConfig::default()).unwrap();
        assert_eq!(tree.nodes.len(), 3);
        assert_eq!(tree.predict(&[1.0]).unwrap(), 1.0);
        assert_eq!(tree.predict(&[5.0]).unwrap(), 5.0);
        assert!(matches!(tree.nodes[0], Node::Split { threshold, .. } if threshold == 3.0));
    }

    fn xor() -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut x = Vec::new();
        let mut t = Vec::new();
        for _ in 0..3 {
            for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                x.push(vec![a, b]);
                t.push(f64::from(u8::from(a != b)));
            }
        }
        (x, t)
    }

    #[test]
    fn xor_needs_depth_two() {
        // every root split of XOR has zero gain, so allow zero-gain splits
        let (x, t) = xor();
        let cfg = |max_depth| TreeConfig {
            max_depth,
            min_samples_leaf: 1,
            min_gain: -1e-9,
        };
        let deep = train_tree(&x, &t, None, &cfg(2)).unwrap();
        assert_eq!(deep.leaves().len(), 4);
        for (row, target) in x.iter().zip(&t) {
            assert_eq!(deep.predict(row).unwrap(), *target);
        }
        let shallow = train_tree(&x, &t, None, &cfg(1)).unwrap();
        assert!(x
            .iter()
            .zip(&t)
            .any(|(row, target)| shallow.predict(row).unwrap() != *target));
        assert!(shallow.depth() <= 1);
    }

    #[test]
    fn hessian_weighted_leaf() {
        let x = vec![vec![0.0], vec![0.0]];
        let tree = train_tree(&x, &[1.0, 4.0], Some(&[3.0, 1.0]), &TreeConfig::default()).unwrap();
        assert_eq!(tree.predict(&[0.0]).unwrap(), (3.0 + 4.0) / 4.0);
    }

    #[test]
    fn min_samples_leaf_respected() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let t: Vec<f64> = (0..10).map(|i| if i == 0 { 10.0 } else { 0.0 }).collect();
        let cfg = TreeConfig {
            max_depth: 4,
            min_samples_leaf: 3,
            min_gain: 0.0,
        };
        let tree = train_tree(&x, &t, None, &cfg).unwrap();
        for leaf in 0..tree.nodes.len() {
            if matches!(tree.nodes[leaf], Node::Leaf { .. }) {
                let hits = x.iter().filter(|r| tree.leaf_index(r) == leaf).count();
                assert!(hits >= 3, "leaf {leaf} has {hits} rows");
            }
        }
    }

    #[test]
    fn rejects_nan() {
        assert_eq!(
            train_tree(&[vec![f64::NAN]], &[1.0], None, &TreeConfig::default()),
            Err(MlError::NonFiniteInput)
        );
        assert_eq!(
            train_tree(&[vec![1.0]], &[f64::INFINITY], None, &TreeConfig::default()),
            Err(MlError::NonFiniteInput)
        );
    }
}
