//! Extremely randomized regression trees.
//!
//! Each tree is grown on the full training set (no bootstrap). At a node,
//! candidate features are drawn without replacement until `k_features`
//! non-constant ones have been tried; each gets one threshold drawn
//! uniformly from the open interval between its node minimum and maximum.
//! Rows with `x <= threshold` go left. Nodes are expanded breadth-first, so
//! a tree grown with a smaller `max_depth` is a prefix of the deeper one.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::features::FeatureMatrix;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features tried per node; `None` tries every feature.
    pub k_features: Option<usize>,
    pub seed: u64,
}

impl Default for ExtParams {
    fn default() -> Self {
        ExtParams {
            n_estimators: 100,
            max_depth: None,
            min_samples_split: 2,
            k_features: None,
            seed: 0,
        }
    }
}

impl ExtParams {
    pub fn validate(&self, width: usize) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidParams("n_estimators must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParams("min_samples_split must be >= 2".into()));
        }
        if let Some(k) = self.k_features {
            if k == 0 || k > width {
                return Err(Error::InvalidParams(format!(
                    "k_features = {k} outside 1..={width}"
                )));
            }
        }
        Ok(())
    }
}

/// How split thresholds are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    #[default]
    Random,
    /// Every feature, every midpoint between distinct node values. Slow;
    /// meant for checking the tree builder against a reference.
    Exhaustive,
}

/// Flat node arrays. `feature[i] == -1` marks a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
}

impl Tree {
    fn with_root() -> Tree {
        let mut t = Tree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
        };
        t.push_leaf();
        t
    }

    fn push_leaf(&mut self) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(0.0);
        self.feature.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.feature.iter().filter(|&&f| f < 0).count()
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((n, d)) = stack.pop() {
            best = best.max(d);
            if self.feature[n] >= 0 {
                stack.push((self.left[n] as usize, d + 1));
                stack.push((self.right[n] as usize, d + 1));
            }
        }
        best
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut n = 0;
        loop {
            let f = self.feature[n];
            if f < 0 {
                return self.value[n];
            }
            n = if row[f as usize] <= self.threshold[n] {
                self.left[n]
            } else {
                self.right[n]
            } as usize;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub format_version: u32,
    pub params: ExtParams,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Forest> {
        let f: Forest = serde_json::from_str(s)?;
        if f.format_version != FORMAT_VERSION {
            return Err(Error::Bundle(format!(
                "unsupported forest format {}",
                f.format_version
            )));
        }
        Ok(f)
    }
}

struct Grower<'a> {
    x: &'a FeatureMatrix,
    y: &'a [f64],
    params: &'a ExtParams,
    mode: SplitMode,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// `sl²/nl + sr²/nr − s²/n`: the reduction in squared error from the split.
fn split_score(sl: f64, nl: usize, sr: f64, nr: usize) -> f64 {
    let s = sl + sr;
    sl * sl / nl as f64 + sr * sr / nr as f64 - s * s / (nl + nr) as f64
}

impl Grower<'_> {
    fn score(&self, idx: &[usize], feature: usize, threshold: f64) -> Option<f64> {
        let (mut sl, mut nl, mut sr, mut nr) = (0.0, 0usize, 0.0, 0usize);
        for &i in idx {
            if self.x.value(i, feature) <= threshold {
                sl += self.y[i];
                nl += 1;
            } else {
                sr += self.y[i];
                nr += 1;
            }
        }
        (nl > 0 && nr > 0).then(|| split_score(sl, nl, sr, nr))
    }

    fn range(&self, idx: &[usize], feature: usize) -> (f64, f64) {
        idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let v = self.x.value(i, feature);
            (lo.min(v), hi.max(v))
        })
    }

    fn random_split(&self, idx: &[usize], perm: &mut [usize], rng: &mut ChaCha8Rng) -> Option<Split> {
        let p = perm.len();
        let k = self.params.k_features.unwrap_or(p);
        let mut tried = 0;
        let mut best: Option<Split> = None;
        for i in 0..p {
            let j = rng.random_range(i..p);
            perm.swap(i, j);
            let f = perm[i];
            let (lo, hi) = self.range(idx, f);
            if !(hi > lo) {
                continue;
            }
            let u: f64 = rng.sample(Open01);
            let mut threshold = lo + u * (hi - lo);
            if threshold >= hi {
                threshold = lo;
            }
            if let Some(score) = self.score(idx, f, threshold) {
                if best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(Split {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
            tried += 1;
            if tried == k {
                break;
            }
        }
        best
    }

    fn exhaustive_split(&self, idx: &[usize]) -> Option<Split> {
        let mut best: Option<Split> = None;
        for f in 0..self.x.n_cols() {
            let mut vals: Vec<f64> = idx.iter().map(|&i| self.x.value(i, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let threshold = 0.5 * (w[0] + w[1]);
                if let Some(score) = self.score(idx, f, threshold) {
                    if best.as_ref().is_none_or(|b| score > b.score) {
                        best = Some(Split {
                            feature: f,
                            threshold,
                            score,
                        });
                    }
                }
            }
        }
        best
    }

    fn grow(&self, rng: &mut ChaCha8Rng) -> Tree {
        let n = self.x.n_rows();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut left_buf = Vec::with_capacity(n);
        let mut right_buf = Vec::with_capacity(n);
        let mut perm: Vec<usize> = (0..self.x.n_cols()).collect();
        let mut tree = Tree::with_root();
        // (node, lo, hi, depth)
        let mut queue = VecDeque::from([(0usize, 0usize, n, 0usize)]);
        while let Some((node, lo, hi, depth)) = queue.pop_front() {
            let rows = &idx[lo..hi];
            let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64;
            tree.value[node] = mean;
            let first = self.y[rows[0]];
            if rows.len() < self.params.min_samples_split
                || self.params.max_depth.is_some_and(|d| depth >= d)
                || rows.iter().all(|&i| self.y[i] == first)
            {
                continue;
            }
            let split = match self.mode {
                SplitMode::Random => self.random_split(rows, &mut perm, rng),
                SplitMode::Exhaustive => self.exhaustive_split(rows),
            };
            let Some(split) = split else { continue };

            // Stable partition keeps each side in original row order.
            left_buf.clear();
            right_buf.clear();
            for &i in &idx[lo..hi] {
                if self.x.value(i, split.feature) <= split.threshold {
                    left_buf.push(i);
                } else {
                    right_buf.push(i);
                }
            }
            let n_left = left_buf.len();
            idx[lo..lo + n_left].copy_from_slice(&left_buf);
            idx[lo + n_left..hi].copy_from_slice(&right_buf);

            let l = tree.push_leaf();
            let r = tree.push_leaf();
            tree.feature[node] = split.feature as i32;
            tree.threshold[node] = split.threshold;
            tree.left[node] = l as u32;
            tree.right[node] = r as u32;
            queue.push_back((l, lo, lo + n_left, depth + 1));
            queue.push_back((r, lo + n_left, hi, depth + 1));
        }
        tree
    }
}

pub fn ext_fit(x: &FeatureMatrix, params: &ExtParams) -> Result<Forest> {
    ext_fit_with(x, params, SplitMode::Random, Execution::default())
}

/// Fits `n_estimators` trees to `x.target`. Tree `j` draws from stream `j`
/// of a ChaCha8 generator seeded with `params.seed`, so the result does not
/// depend on the execution mode or thread count.
pub fn ext_fit_with(x: &FeatureMatrix, params: &ExtParams, mode: SplitMode, exec: Execution) -> Result<Forest> {
    if x.n_rows() == 0 {
        return Err(Error::EmptyTraining);
    }
    params.validate(x.n_cols())?;
    let grower = Grower {
        x,
        y: &x.target,
        params,
        mode,
    };
    let trees = map_range(exec, params.n_estimators, |j| {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(j as u64);
        grower.grow(&mut rng)
    });
    log::debug!("fitted {} trees on {} rows", trees.len(), x.n_rows());
    Ok(Forest {
        format_version: FORMAT_VERSION,
        params: *params,
        feature_names: x.columns.clone(),
        trees,
    })
}

pub fn ext_predict(forest: &Forest, x: &FeatureMatrix) -> Result<Vec<f64>> {
    ext_predict_with(forest, x, Execution::default())
}

pub fn ext_predict_with(forest: &Forest, x: &FeatureMatrix, exec: Execution) -> Result<Vec<f64>> {
    if x.n_cols() != forest.n_features() {
        return Err(Error::WidthMismatch {
            expected: forest.n_features(),
            got: x.n_cols(),
        });
    }
    Ok(map_range(exec, x.n_rows(), |i| forest.predict_row(x.row(i))))
}

/// Candidate values per hyperparameter. `None` keeps the base value; an
/// empty list is an error.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamGrid {
    pub n_estimators: Option<Vec<usize>>,
    pub max_depth: Option<Vec<Option<usize>>>,
    pub min_samples_split: Option<Vec<usize>>,
    pub k_features: Option<Vec<Option<usize>>>,
}

impl ParamGrid {
    pub fn default_grid() -> ParamGrid {
        ParamGrid {
            n_estimators: Some(vec![100, 300, 500]),
            max_depth: Some(vec![None, Some(10), Some(20)]),
            min_samples_split: Some(vec![2, 5]),
            k_features: None,
        }
    }

    /// Cartesian product in the order n_estimators, max_depth,
    /// min_samples_split, k_features (last varies fastest).
    pub fn combinations(&self, base: &ExtParams) -> Result<Vec<ExtParams>> {
        fn axis<T: Clone>(v: &Option<Vec<T>>, base: T) -> Result<Vec<T>> {
            match v {
                None => Ok(vec![base]),
                Some(v) if v.is_empty() => Err(Error::EmptyGrid),
                Some(v) => Ok(v.clone()),
            }
        }
        let ns = axis(&self.n_estimators, base.n_estimators)?;
        let ds = axis(&self.max_depth, base.max_depth)?;
        let ms = axis(&self.min_samples_split, base.min_samples_split)?;
        let ks = axis(&self.k_features, base.k_features)?;
        let mut out = Vec::with_capacity(ns.len() * ds.len() * ms.len() * ks.len());
        for &n_estimators in &ns {
            for &max_depth in &ds {
                for &min_samples_split in &ms {
                    for &k_features in &ks {
                        out.push(ExtParams {
                            n_estimators,
                            max_depth,
                            min_samples_split,
                            k_features,
                            seed: base.seed,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub params: ExtParams,
    pub validation_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: ExtParams,
    pub scores: Vec<GridScore>,
}

/// Share of rows (taken from the end) held out for grid validation.
pub const VALIDATION_FRACTION: f64 = 0.2;

/// Scores every combination on a chronological holdout (the last 20% of
/// rows) and returns the one with the lowest validation MSE; ties go to the
/// earliest combination.
pub fn grid_search(x: &FeatureMatrix, grid: &ParamGrid, base: &ExtParams) -> Result<GridResult> {
    grid_search_with(x, grid, base, Execution::default())
}

pub fn grid_search_with(x: &FeatureMatrix, grid: &ParamGrid, base: &ExtParams, exec: Execution) -> Result<GridResult> {
    let combos = grid.combinations(base)?;
    let n = x.n_rows();
    let n_val = ((n as f64) * VALIDATION_FRACTION).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::TooFewRows(format!("{n} rows cannot be split for validation")));
    }
    let train = x.slice_rows(0..n - n_val);
    let val = x.slice_rows(n - n_val..n);
    let mut scores = Vec::with_capacity(combos.len());
    let mut best: Option<(usize, f64)> = None;
    for (ci, params) in combos.iter().enumerate() {
        let forest = ext_fit_with(&train, params, SplitMode::Random, exec)?;
        let pred = ext_predict_with(&forest, &val, exec)?;
        let mse = pred
            .iter()
            .zip(&val.target)
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>()
            / n_val as f64;
        log::debug!("grid {params:?}: validation mse {mse}");
        if best.is_none_or(|(_, b)| mse < b) {
            best = Some((ci, mse));
        }
        scores.push(GridScore {
            params: *params,
            validation_mse: mse,
        });
    }
    let (bi, _) = best.expect("grid has at least one combination");
    Ok(GridResult {
        best: combos[bi],
        scores,
    })
}
