//! Gradient-boosted regression trees on squared loss with histogram splits
//! and leaf-wise growth.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{cmp, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreesConfig {
    pub n_trees: usize,
    pub max_leaves: usize,
    pub learning_rate: f64,
    pub min_data_in_leaf: usize,
    /// Share of features considered by each tree.
    pub feature_fraction: f64,
    /// Fit on every `row_stride`-th training row.
    pub row_stride: usize,
    /// Upper bound on split thresholds per feature (at most 255).
    pub max_bins: usize,
    pub l2_regularization: f64,
    /// Training residuals for the quantile fans come from models fitted
    /// with every `residual_folds`-th training sequence held out; values
    /// below 2 use the in-sample residuals of the final model.
    pub residual_folds: usize,
}

impl Default for TreesConfig {
    fn default() -> Self {
        Self {
            n_trees: 300,
            max_leaves: 31,
            learning_rate: 0.1,
            min_data_in_leaf: 20,
            feature_fraction: 1.0,
            row_stride: 1,
            max_bins: 255,
            l2_regularization: 0.0,
            residual_folds: 2,
        }
    }
}

impl TreesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_leaves < 2 && self.n_trees > 0 {
            return Err(Error::InvalidArgument("trees need at least two leaves".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(Error::InvalidArgument("learning rate and feature fraction must be positive".into()));
        }
        if self.row_stride == 0 || self.max_bins == 0 || self.max_bins > 255 || self.min_data_in_leaf == 0 {
            return Err(Error::InvalidArgument("invalid stride, bin count or leaf size".into()));
        }
        Ok(())
    }
}

/// Training features quantized to at most 256 bins per column. A value
/// falls in bin `b` when `edges[b−1] < x ≤ edges[b]`.
#[derive(Clone, Debug)]
pub struct BinnedFeatures<T> {
    n_rows: usize,
    n_features: usize,
    edges: Vec<Vec<T>>,
    /// Row-major bin codes.
    bins: Vec<u8>,
}

impl<T: Scalar> BinnedFeatures<T> {
    pub fn new(x: &Matrix<T>, max_bins: usize) -> Self {
        let (n, p) = x.shape();
        let mut edges = Vec::with_capacity(p);
        let mut col = Vec::with_capacity(n);
        for f in 0..p {
            col.clear();
            col.extend((0..n).map(|r| x[(r, f)]));
            col.sort_by(cmp);
            col.dedup();
            let e: Vec<T> = if col.len() <= max_bins + 1 {
                col.windows(2).map(|w| (w[0] + w[1]) / T::lit(2.0)).collect()
            } else {
                let mut e: Vec<T> = (1..=max_bins)
                    .map(|k| {
                        let i = k * (col.len() - 1) / (max_bins + 1);
                        (col[i] + col[i + 1]) / T::lit(2.0)
                    })
                    .collect();
                e.dedup();
                e
            };
            edges.push(e);
        }
        let mut bins = vec![0u8; n * p];
        for r in 0..n {
            for f in 0..p {
                bins[r * p + f] = edges[f].partition_point(|e| *e < x[(r, f)]) as u8;
            }
        }
        Self { n_rows: n, n_features: p, edges, bins }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    fn bin(&self, r: usize, f: usize) -> u8 {
        self.bins[r * self.n_features + f]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node<T> {
    Split { feature: usize, threshold: T, left: usize, right: usize },
    Leaf(T),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn predict(&self, x: &[T]) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return *v,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

/// One step-ahead model: `base + learning_rate · Σ tree(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostedTreesModel<T> {
    pub base: T,
    pub learning_rate: T,
    pub trees: Vec<Tree<T>>,
}

impl<T: Scalar> BoostedTreesModel<T> {
    pub fn bt_forecast(&self, x: &[T]) -> T {
        self.base + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<T>()
    }
}

#[derive(Clone, Copy)]
struct Cell {
    sum: f64,
    count: u32,
}

struct Candidate {
    node: usize,
    rows: Vec<u32>,
    hist: Vec<Cell>,
    sum: f64,
    best: Option<(f64, usize, usize)>,
}

struct Grower<'a, T> {
    data: &'a BinnedFeatures<T>,
    feats: Vec<usize>,
    /// Histogram offset of each selected feature (`feats.len() + 1` entries).
    offs: Vec<usize>,
    min_leaf: u32,
    l2: f64,
}

impl<T: Scalar> Grower<'_, T> {
    fn histogram(&self, rows: &[u32], grad: &[f64]) -> Vec<Cell> {
        let mut h = vec![Cell { sum: 0.0, count: 0 }; self.offs[self.feats.len()]];
        for &r in rows {
            let g = grad[r as usize];
            for (k, &f) in self.feats.iter().enumerate() {
                let c = &mut h[self.offs[k] + self.data.bin(r as usize, f) as usize];
                c.sum += g;
                c.count += 1;
            }
        }
        h
    }

    /// Best (gain, selected-feature slot, bin) over the histogram.
    fn best_split(&self, hist: &[Cell], total: f64, n: usize) -> Option<(f64, usize, usize)> {
        let parent = total * total / (n as f64 + self.l2);
        let mut best: Option<(f64, usize, usize)> = None;
        for k in 0..self.feats.len() {
            let nbins = self.data.edges[self.feats[k]].len();
            let (mut sl, mut nl) = (0.0, 0u32);
            for b in 0..nbins {
                let c = hist[self.offs[k] + b];
                sl += c.sum;
                nl += c.count;
                let nr = n as u32 - nl;
                if nl < self.min_leaf {
                    continue;
                }
                if nr < self.min_leaf {
                    break;
                }
                let sr = total - sl;
                let gain = sl * sl / (nl as f64 + self.l2) + sr * sr / (nr as f64 + self.l2) - parent;
                if gain > best.map_or(1e-12 * (1.0 + parent.abs()), |b| b.0) {
                    best = Some((gain, k, b));
                }
            }
        }
        best
    }

    fn candidate(&self, node: usize, rows: Vec<u32>, hist: Vec<Cell>, grad: &[f64]) -> Candidate {
        let sum: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
        let best = self.best_split(&hist, sum, rows.len());
        Candidate { node, rows, hist, sum, best }
    }

    /// Grows one tree on `grad`; returns it and the leaf value of each row.
    fn grow(&self, rows: Vec<u32>, grad: &[f64], max_leaves: usize) -> (Tree<T>, Vec<(Vec<u32>, f64)>) {
        let mut nodes = vec![Node::Leaf(T::zero())];
        let hist = self.histogram(&rows, grad);
        let mut open = vec![self.candidate(0, rows, hist, grad)];
        let mut done: Vec<Candidate> = Vec::new();
        while open.len() + done.len() < max_leaves {
            let Some(pick) = open
                .iter()
                .enumerate()
                .filter_map(|(i, c)| c.best.map(|b| (i, b.0)))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
            else {
                break;
            };
            let c = open.swap_remove(pick);
            let (_, slot, bin) = c.best.expect("picked candidate has a split");
            let f = self.feats[slot];
            let (left, right): (Vec<u32>, Vec<u32>) =
                c.rows.iter().partition(|&&r| self.data.bin(r as usize, f) as usize <= bin);
            let (small, large_is_left) = if left.len() <= right.len() { (&left, false) } else { (&right, true) };
            let small_hist = self.histogram(small, grad);
            let large_hist: Vec<Cell> = c
                .hist
                .iter()
                .zip(&small_hist)
                .map(|(p, s)| Cell { sum: p.sum - s.sum, count: p.count - s.count })
                .collect();
            let (lh, rh) = if large_is_left { (large_hist, small_hist) } else { (small_hist, large_hist) };
            let (li, ri) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf(T::zero()));
            nodes.push(Node::Leaf(T::zero()));
            nodes[c.node] = Node::Split { feature: f, threshold: self.data.edges[f][bin], left: li, right: ri };
            open.push(self.candidate(li, left, lh, grad));
            open.push(self.candidate(ri, right, rh, grad));
        }
        done.extend(open);
        done.sort_by_key(|c| c.node);
        let mut leaves = Vec::with_capacity(done.len());
        for c in done {
            let v = c.sum / (c.rows.len() as f64 + self.l2);
            nodes[c.node] = Node::Leaf(T::lit(v));
            leaves.push((c.rows, v));
        }
        (Tree { nodes }, leaves)
    }
}

/// Fits one boosted ensemble to `y` (one value per binned row, using only
/// the rows in `rows`).
pub fn fit_boosted_trees<T: Scalar>(
    data: &BinnedFeatures<T>,
    rows: &[u32],
    y: &[T],
    cfg: &TreesConfig,
    seed: u64,
) -> Result<BoostedTreesModel<T>> {
    cfg.validate()?;
    if rows.len() < 2 {
        return Err(Error::TooShort { needed: 2, available: rows.len() });
    }
    if y.len() != data.n_rows() {
        return Err(Error::Dimension(format!("{} targets for {} binned rows", y.len(), data.n_rows())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = rows.iter().map(|&r| y[r as usize].as_f64()).sum::<f64>() / rows.len() as f64;
    let lr = cfg.learning_rate;
    let mut pred = vec![base; data.n_rows()];
    let mut grad = vec![0.0; data.n_rows()];
    let all: Vec<usize> = (0..data.n_features).collect();
    let n_sel = ((data.n_features as f64 * cfg.feature_fraction).ceil() as usize).clamp(1, data.n_features.max(1));
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for _ in 0..cfg.n_trees {
        for &r in rows {
            grad[r as usize] = y[r as usize].as_f64() - pred[r as usize];
        }
        let feats = if n_sel < data.n_features {
            let mut f: Vec<usize> = all.choose_multiple(&mut rng, n_sel).copied().collect();
            f.sort_unstable();
            f
        } else {
            // Keep the generator's stream independent of the fraction.
            let _: u64 = rng.gen();
            all.clone()
        };
        let offs = std::iter::once(0)
            .chain(feats.iter().scan(0, |acc, &f| {
                *acc += data.edges[f].len() + 1;
                Some(*acc)
            }))
            .collect();
        let grower = Grower { data, feats, offs, min_leaf: cfg.min_data_in_leaf as u32, l2: cfg.l2_regularization };
        let (tree, leaves) = grower.grow(rows.to_vec(), &grad, cfg.max_leaves);
        if tree.nodes.len() == 1 {
            // No admissible split: further trees would all be this leaf.
            if let Node::Leaf(v) = tree.nodes[0] {
                if v.as_f64().abs() > 0.0 {
                    trees.push(tree);
                }
            }
            break;
        }
        for (leaf_rows, v) in leaves {
            for r in leaf_rows {
                pred[r as usize] += lr * v;
            }
        }
        trees.push(tree);
    }
    Ok(BoostedTreesModel { base: T::lit(base), learning_rate: T::lit(lr), trees })
}

/// One boosted model per step ahead sharing the binned training features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostedTreesSet<T> {
    pub per_step: Vec<BoostedTreesModel<T>>,
}

impl<T: Scalar> BoostedTreesSet<T> {
    /// Fits every column of `y` on `x` (rows already restricted to training).
    pub fn fit(x: &Matrix<T>, y: &Matrix<T>, cfg: &TreesConfig, seed: u64) -> Result<Self> {
        use rayon::prelude::*;
        if x.nrows() != y.nrows() {
            return Err(Error::Dimension("feature and target rows differ".into()));
        }
        let data = BinnedFeatures::new(x, cfg.max_bins);
        let rows: Vec<u32> = (0..x.nrows() as u32).step_by(cfg.row_stride).collect();
        let per_step = (0..y.ncols())
            .into_par_iter()
            .map(|j| {
                let col = y.col(j);
                fit_boosted_trees(&data, &rows, &col, cfg, seed.wrapping_add(j as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { per_step })
    }

    pub fn predict(&self, x: &[T]) -> Vec<T> {
        self.per_step.iter().map(|m| m.bt_forecast(x)).collect()
    }
}
