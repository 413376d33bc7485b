//! Random-forest regression built on CART trees with squared-error splits.
//!
//! Trees are grown on bootstrap samples to purity (or `min_samples_leaf`).
//! Every active feature is sorted once; each tree keeps, per feature, its
//! sample rows in that order and stably partitions them on every split, so a
//! node costs one linear pass per feature instead of a sort.
//!
//! Split candidates are midpoints between consecutive distinct values, a row
//! goes left when `x <= threshold`, and ties in the split score go to the
//! lowest feature index, then the lowest threshold.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "phml-forest/1";

const LEAF: i64 = -1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_trees: usize,
    /// Fraction of the features drawn as split candidates at every node.
    pub max_features_fraction: f64,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_trees: 500,
            max_features_fraction: 1.0,
            min_samples_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// One regression tree as parallel node arrays. Node 0 is the root; leaves
/// have `feature == -1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    /// Weighted mean target of the node's training samples.
    pub value: Vec<f64>,
    /// Weighted squared-error decrease of the split, 0 for leaves.
    pub impurity_decrease: Vec<f64>,
    /// Weighted training sample count reaching the node.
    pub weighted_samples: Vec<f64>,
}

impl Tree {
    fn empty() -> Self {
        Self {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
            impurity_decrease: Vec::new(),
            weighted_samples: Vec::new(),
        }
    }

    fn push_leaf(&mut self, value: f64, weight: f64) -> usize {
        self.feature.push(LEAF);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.impurity_decrease.push(0.0);
        self.weighted_samples.push(weight);
        self.feature.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.feature.len()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        loop {
            let f = self.feature[node];
            if f == LEAF {
                return self.value[node];
            }
            node = if x[f as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub format: String,
    pub config: TrainConfig,
    pub feature_count: usize,
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let forest: Forest = serde_json::from_str(text)?;
        if forest.format != MODEL_FORMAT {
            return Err(Error::invalid(format!(
                "model format {:?}, expected {MODEL_FORMAT:?}",
                forest.format
            )));
        }
        Ok(forest)
    }
}

fn validate(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} targets", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::invalid("training needs at least two samples"));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::invalid("training needs at least one feature"));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(Error::invalid(format!("row {i} has {} features, expected {d}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("row {i} has a non-finite feature")));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite target"));
    }
    Ok(d)
}

/// Column-major copy of the non-constant features with their global order.
struct Presorted {
    /// original feature index of each active feature
    features: Vec<usize>,
    columns: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl Presorted {
    fn new(x: &[Vec<f64>], d: usize) -> Self {
        let n = x.len();
        let mut features = Vec::new();
        let mut columns = Vec::new();
        let mut order = Vec::new();
        for f in 0..d {
            let col: Vec<f64> = x.iter().map(|row| row[f]).collect();
            if col.iter().all(|&v| v == col[0]) {
                continue;
            }
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            features.push(f);
            columns.push(col);
            order.push(idx);
        }
        Self {
            features,
            columns,
            order,
        }
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

struct TreeBuilder<'a> {
    data: &'a Presorted,
    y: &'a [f64],
    weight: Vec<f64>,
    /// per active feature, the tree's rows in sorted order, `m` each
    order: Vec<u32>,
    m: usize,
    min_leaf: usize,
    n_candidates: usize,
    rng: ChaCha8Rng,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
}

impl<'a> TreeBuilder<'a> {
    fn segment(&self, f: usize, start: usize, end: usize) -> &[u32] {
        &self.order[f * self.m + start..f * self.m + end]
    }

    fn best_split(&mut self, start: usize, end: usize, total_w: f64, total_s: f64) -> Option<Split> {
        let n_active = self.data.features.len();
        let mut candidates: Vec<usize> = (0..n_active).collect();
        if self.n_candidates < n_active {
            candidates.partial_shuffle(&mut self.rng, self.n_candidates);
            candidates.truncate(self.n_candidates);
            candidates.sort_unstable();
        }
        let len = end - start;
        let mut best: Option<Split> = None;
        for f in candidates {
            let seg = self.segment(f, start, end);
            let col = &self.data.columns[f];
            if col[seg[0] as usize] == col[seg[len - 1] as usize] {
                continue;
            }
            let (mut wl, mut sl) = (0.0, 0.0);
            for k in 0..len - 1 {
                let r = seg[k] as usize;
                wl += self.weight[r];
                sl += self.weight[r] * self.y[r];
                let here = col[r];
                let next = col[seg[k + 1] as usize];
                if next <= here || k + 1 < self.min_leaf || len - k - 1 < self.min_leaf {
                    continue;
                }
                let wr = total_w - wl;
                let sr = total_s - sl;
                let score = sl * sl / wl + sr * sr / wr;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mut threshold = here + (next - here) / 2.0;
                    if threshold >= next {
                        threshold = here;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }

    fn partition(&mut self, split: &Split, start: usize, end: usize) -> usize {
        let col = &self.data.columns[split.feature];
        for &r in &self.order[start..end] {
            self.goes_left[r as usize] = col[r as usize] <= split.threshold;
        }
        let mut n_left = 0;
        for f in 0..self.data.features.len() {
            let base = f * self.m;
            self.scratch.clear();
            let mut write = base + start;
            for k in base + start..base + end {
                let r = self.order[k];
                if self.goes_left[r as usize] {
                    self.order[write] = r;
                    write += 1;
                } else {
                    self.scratch.push(r);
                }
            }
            n_left = write - base - start;
            self.order[write..base + end].copy_from_slice(&self.scratch);
        }
        n_left
    }

    fn build(mut self) -> Tree {
        let mut tree = Tree::empty();
        if self.data.features.is_empty() || self.m == 0 {
            let (w, s) = self.rows_sum(0, self.m);
            tree.push_leaf(s / w, w);
            return tree;
        }
        // (node, start, end)
        let mut stack = vec![(0usize, 0usize, self.m)];
        tree.push_leaf(0.0, 0.0);
        while let Some((node, start, end)) = stack.pop() {
            let (w, s) = self.rows_sum(start, end);
            tree.value[node] = s / w;
            tree.weighted_samples[node] = w;
            if end - start < 2 * self.min_leaf || self.constant_target(start, end) {
                continue;
            }
            let Some(split) = self.best_split(start, end, w, s) else {
                continue;
            };
            let n_left = self.partition(&split, start, end);
            let left = tree.push_leaf(0.0, 0.0);
            let right = tree.push_leaf(0.0, 0.0);
            tree.feature[node] = self.data.features[split.feature] as i64;
            tree.threshold[node] = split.threshold;
            tree.left[node] = left as u32;
            tree.right[node] = right as u32;
            tree.impurity_decrease[node] = (split.score - s * s / w).max(0.0);
            stack.push((right, start + n_left, end));
            stack.push((left, start, start + n_left));
        }
        tree
    }

    fn rows_sum(&self, start: usize, end: usize) -> (f64, f64) {
        let rows: &[u32] = if self.data.features.is_empty() {
            &self.order[start..end]
        } else {
            self.segment(0, start, end)
        };
        rows.iter().fold((0.0, 0.0), |(w, s), &r| {
            let r = r as usize;
            (w + self.weight[r], s + self.weight[r] * self.y[r])
        })
    }

    fn constant_target(&self, start: usize, end: usize) -> bool {
        let seg = self.segment(0, start, end);
        let first = self.y[seg[0] as usize];
        seg.iter().all(|&r| self.y[r as usize] == first)
    }
}

fn grow_tree(data: &Presorted, y: &[f64], config: &TrainConfig, tree_index: usize) -> Tree {
    let n = y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(tree_index as u64);
    let mut weight = vec![0.0; n];
    if config.bootstrap {
        for _ in 0..n {
            weight[rng.gen_range(0..n)] += 1.0;
        }
    } else {
        weight.iter_mut().for_each(|w| *w = 1.0);
    }

    let n_active = data.features.len();
    let mut order = Vec::new();
    let m = if n_active == 0 {
        order.extend((0..n as u32).filter(|&r| weight[r as usize] > 0.0));
        order.len()
    } else {
        for sorted in &data.order {
            order.extend(sorted.iter().copied().filter(|&r| weight[r as usize] > 0.0));
        }
        order.len() / n_active
    };
    let n_candidates = ((config.max_features_fraction * n_active as f64).round() as usize)
        .clamp(1, n_active.max(1));

    TreeBuilder {
        data,
        y,
        weight,
        order,
        m,
        min_leaf: config.min_samples_leaf.max(1),
        n_candidates,
        rng,
        goes_left: vec![false; n],
        scratch: Vec::new(),
    }
    .build()
}

/// Trains a forest. Tree `t` draws its bootstrap sample from the ChaCha
/// stream `t` of `config.seed`, so results do not depend on scheduling.
pub fn train(x: &[Vec<f64>], y: &[f64], config: &TrainConfig) -> Result<Forest> {
    let d = validate(x, y)?;
    if config.n_trees == 0 {
        return Err(Error::invalid("n_trees must be >= 1"));
    }
    if !(config.max_features_fraction > 0.0 && config.max_features_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "max_features_fraction {} must lie in (0, 1]",
            config.max_features_fraction
        )));
    }
    let data = Presorted::new(x, d);
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| grow_tree(&data, y, config, t))
        .collect();
    Ok(Forest {
        format: MODEL_FORMAT.to_string(),
        config: config.clone(),
        feature_count: d,
        trees,
    })
}

pub fn predict(forest: &Forest, x: &[f64]) -> Result<f64> {
    if x.len() != forest.feature_count {
        return Err(Error::invalid(format!(
            "{} features given, model expects {}",
            x.len(),
            forest.feature_count
        )));
    }
    let sum: f64 = forest.trees.iter().map(|t| t.predict(x)).sum();
    Ok(sum / forest.trees.len() as f64)
}

pub fn predict_all(forest: &Forest, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    x.iter().map(|row| predict(forest, row)).collect()
}

/// Coefficient of determination `1 - SSres / SStot`.
pub fn r2(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() || targets.len() < 2 {
        return Err(Error::invalid("r2 needs two equal-length series of length >= 2"));
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let ss_tot: f64 = targets.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::invalid("r2 is undefined for constant targets"));
    }
    let ss_res: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (t - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean decrease in impurity: per tree, each split's weighted squared-error
/// decrease divided by the root weight, averaged over trees and scaled to
/// sum to one. All zeros if the forest never splits.
pub fn impurity_importance(forest: &Forest) -> Vec<f64> {
    let mut imp = vec![0.0; forest.feature_count];
    for tree in &forest.trees {
        let root_w = tree.weighted_samples[0];
        for (node, &f) in tree.feature.iter().enumerate() {
            if f != LEAF {
                imp[f as usize] += tree.impurity_decrease[node] / root_w;
            }
        }
    }
    let total: f64 = imp.iter().sum();
    if total > 0.0 {
        imp.iter_mut().for_each(|v| *v /= total);
    }
    imp
}

/// Mean R² drop over `repeats` shuffles of each column. Features the forest
/// never splits on cannot change a prediction and score exactly 0.
pub fn permutation_importance(
    forest: &Forest,
    x: &[Vec<f64>],
    y: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    validate(x, y)?;
    if repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    let base = r2(&predict_all(forest, x)?, y)?;
    let mut used = vec![false; forest.feature_count];
    for tree in &forest.trees {
        for &f in &tree.feature {
            if f != LEAF {
                used[f as usize] = true;
            }
        }
    }
    (0..forest.feature_count)
        .into_par_iter()
        .map(|j| {
            if !used[j] {
                return Ok(0.0);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut column: Vec<f64> = x.iter().map(|row| row[j]).collect();
            let mut row_buf = vec![0.0; forest.feature_count];
            let mut drop = 0.0;
            for _ in 0..repeats {
                column.shuffle(&mut rng);
                let preds: Vec<f64> = x
                    .iter()
                    .zip(&column)
                    .map(|(row, &v)| {
                        row_buf.copy_from_slice(row);
                        row_buf[j] = v;
                        predict(forest, &row_buf)
                    })
                    .collect::<Result<_>>()?;
                drop += base - r2(&preds, y)?;
            }
            Ok(drop / repeats as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(n_trees: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            n_trees,
            seed,
            ..TrainConfig::default()
        }
    }

    fn step_data(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let y = x.iter().map(|r| if r[0] > 0.0 { 1.0 } else { 0.0 }).collect();
        (x, y)
    }

    /// Recursive walk over the node arrays, independent of `Tree::predict`.
    fn traverse(tree: &Tree, node: usize, x: &[f64]) -> f64 {
        if tree.feature[node] < 0 {
            tree.value[node]
        } else if x[tree.feature[node] as usize] <= tree.threshold[node] {
            traverse(tree, tree.left[node] as usize, x)
        } else {
            traverse(tree, tree.right[node] as usize, x)
        }
    }

    #[test]
    fn constant_target() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![4.5; 10];
        let f = train(&x, &y, &small_config(5, 0)).unwrap();
        for row in &x {
            assert_eq!(predict(&f, row).unwrap(), 4.5);
        }
        assert!(impurity_importance(&f).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_function_is_learned() {
        let (x, y) = step_data(200);
        let f = train(&x, &y, &small_config(50, 3)).unwrap();
        let r = r2(&predict_all(&f, &x).unwrap(), &y).unwrap();
        assert!(r >= 0.99, "r2 = {r}");
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = step_data(60);
        let a = train(&x, &y, &small_config(10, 9)).unwrap();
        let b = train(&x, &y, &small_config(10, 9)).unwrap();
        let probe: Vec<Vec<f64>> = (0..20).map(|i| vec![-1.0 + i as f64 / 10.0]).collect();
        assert_eq!(predict_all(&a, &probe).unwrap(), predict_all(&b, &probe).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(train(&[vec![1.0]], &[1.0], &TrainConfig::default()).is_err());
        assert!(train(&[vec![], vec![]], &[1.0, 2.0], &TrainConfig::default()).is_err());
        assert!(train(&[vec![f64::NAN], vec![1.0]], &[1.0, 2.0], &TrainConfig::default()).is_err());
        let f = train(&[vec![0.0], vec![1.0]], &[1.0, 2.0], &small_config(1, 0)).unwrap();
        assert!(predict(&f, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn single_tree_and_traversal_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 3.0 + r[1].sin()).collect();
        let one = train(&x, &y, &small_config(1, 2)).unwrap();
        let forest = train(&x, &y, &small_config(25, 2)).unwrap();
        let (lo, hi) = y.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        for _ in 0..50 {
            let probe: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..1.5)).collect();
            assert_eq!(predict(&one, &probe).unwrap(), traverse(&one.trees[0], 0, &probe));
            let naive = forest.trees.iter().map(|t| traverse(t, 0, &probe)).sum::<f64>()
                / forest.trees.len() as f64;
            let p = predict(&forest, &probe).unwrap();
            assert!((p - naive).abs() < 1e-12);
            assert!(p >= lo && p <= hi);
        }
    }

    #[test]
    fn r2_cases() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        // targets 1,2,3,6 (mean 3, SStot 14); residuals 0.5,-0.5,1,-1 (SSres 2.5)
        let r = r2(&[0.5, 2.5, 2.0, 7.0], &[1.0, 2.0, 3.0, 6.0]).unwrap();
        assert!((r - (1.0 - 2.5 / 14.0)).abs() < 1e-15);
        assert!(r2(&[1.0, 1.0], &[2.0, 2.0]).is_err());
        assert!(r2(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn impurity_importance_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<Vec<f64>> = (0..150)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 7.0])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| (r[0] * 6.0).floor()).collect();
        let f = train(&x, &y, &small_config(30, 1)).unwrap();
        let imp = impurity_importance(&f);
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(imp.iter().all(|&v| v >= 0.0));
        assert_eq!(imp[2], 0.0);
        assert!(imp[0] > 0.9, "{imp:?}");
    }

    #[test]
    fn permutation_importance_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x: Vec<Vec<f64>> = (0..120)
            .map(|_| vec![rng.gen_range(0.0..1.0), 3.0, rng.gen_range(0.0..1.0)])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0]).collect();
        let f = train(&x, &y, &small_config(20, 5)).unwrap();
        let a = permutation_importance(&f, &x, &y, 3, 77).unwrap();
        let b = permutation_importance(&f, &x, &y, 3, 77).unwrap();
        assert_eq!(a, b);
        assert!(a[0] >= 0.5, "{a:?}");
        assert!(a[1].abs() < 0.01);
        assert!(a[2].abs() < 0.05);
    }

    #[test]
    fn feature_subsampling_and_leaf_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..5).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r.iter().sum()).collect();
        let config = TrainConfig {
            n_trees: 10,
            max_features_fraction: 0.4,
            min_samples_leaf: 5,
            bootstrap: false,
            seed: 3,
        };
        let f = train(&x, &y, &config).unwrap();
        for t in &f.trees {
            for (node, &feat) in t.feature.iter().enumerate() {
                if feat < 0 {
                    assert!(t.weighted_samples[node] >= 5.0);
                }
            }
        }
        let json = f.to_json().unwrap();
        assert_eq!(Forest::from_json(&json).unwrap(), f);
        assert!(Forest::from_json(&json.replace(MODEL_FORMAT, "other/9")).is_err());
    }
}
