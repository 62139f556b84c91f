//! Sequential backward selection.
//!
//! Starting from every feature, each round drops the single feature whose
//! removal gives the highest score, until `k` remain. Ties drop the lowest
//! index. The default scorer is stratified k-fold cross-validated accuracy
//! of the RBF SVM, standardized with training-fold statistics.

use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::prep::{stratified_folds, Standardizer, MIN_STD};
use crate::classifier::svm::{
    check_training_input, exp, model_from_solution, scale_gamma, solve_dual, KernelSource,
    RbfKernel, SvmParams,
};
use crate::datamodel::{FeatureVector, RemovalStep};
use crate::error::{Error, Result};

/// Number of features kept by the pipeline.
pub const TARGET_FEATURES: usize = 20;
pub const CV_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub original_dim: usize,
    /// Kept feature indices, ascending.
    pub selected_indices: Vec<usize>,
    pub removal_trace: Vec<RemovalStep>,
}

impl SelectionResult {
    pub fn identity(dim: usize) -> Self {
        Self {
            original_dim: dim,
            selected_indices: (0..dim).collect(),
            removal_trace: Vec::new(),
        }
    }
}

/// Scores a feature subset; higher is better.
pub trait SubsetScorer: Sync {
    fn n_features(&self) -> usize;
    fn score(&self, subset: &[usize]) -> f64;

    /// Scores of `current` minus each of its entries, in position order.
    fn score_removals(&self, current: &[usize]) -> Vec<f64> {
        (0..current.len())
            .into_par_iter()
            .map(|pos| self.score(&without(current, pos)))
            .collect()
    }
}

fn without(current: &[usize], pos: usize) -> Vec<usize> {
    let mut v = current.to_vec();
    v.remove(pos);
    v
}

/// Greedy backward elimination down to `k` features.
pub fn sbs_with_scorer(scorer: &dyn SubsetScorer, k: usize) -> Result<SelectionResult> {
    let dim = scorer.n_features();
    if k < 1 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if k > dim {
        return Err(Error::InvalidInput(format!(
            "k = {k} exceeds the {dim} available features"
        )));
    }
    let mut current: Vec<usize> = (0..dim).collect();
    let mut trace = Vec::with_capacity(dim - k);
    while current.len() > k {
        let scores = scorer.score_removals(&current);
        let mut best = 0;
        for (pos, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = pos;
            }
        }
        trace.push(RemovalStep {
            removed_index: current[best],
            score_after_removal: scores[best],
        });
        current.remove(best);
    }
    Ok(SelectionResult {
        original_dim: dim,
        selected_indices: current,
        removal_trace: trace,
    })
}

/// Largest training fold for which pairwise distance tables are kept.
const MAX_TABLE_ROWS: usize = 4000;

/// One cross-validation fold, standardized with its training statistics.
/// Per-column standardization does not depend on which other columns are
/// kept, so it is done once for every subset.
struct Fold {
    train_y: Vec<bool>,
    val_y: Vec<bool>,
    /// Column-major: `train[j][i]` is feature `j` of training row `i`.
    train: Vec<Vec<f64>>,
    val: Vec<Vec<f64>>,
    /// Whether each standardized training column is non-constant.
    varying: Vec<bool>,
}

impl Fold {
    fn new(x: &[Vec<f64>], y: &[bool], val_idx: &[usize]) -> Self {
        let mut in_val = vec![false; x.len()];
        for &i in val_idx {
            in_val[i] = true;
        }
        let train_idx: Vec<usize> = (0..x.len()).filter(|&i| !in_val[i]).collect();
        let raw: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
        let scaler = Standardizer::fit(&raw).expect("fold has training rows");
        let d = scaler.mean.len();
        let columns = |rows: &[usize]| -> Vec<Vec<f64>> {
            (0..d)
                .map(|j| {
                    rows.iter()
                        .map(|&i| (x[i][j] - scaler.mean[j]) / scaler.std[j])
                        .collect()
                })
                .collect()
        };
        let train = columns(&train_idx);
        let varying = train
            .iter()
            .map(|c| c.iter().any(|v| v.abs() > MIN_STD))
            .collect();
        Self {
            train_y: train_idx.iter().map(|&i| y[i]).collect(),
            val_y: val_idx.iter().map(|&i| y[i]).collect(),
            train,
            val: columns(val_idx),
            varying,
        }
    }

    fn n_train(&self) -> usize {
        self.train_y.len()
    }

    /// `1 / (d * var)` of the standardized subset, as `scale_gamma` would
    /// compute it.
    fn gamma(&self, subset: &[usize]) -> f64 {
        let d = subset.len().max(1) as f64;
        let n = self.n_train() as f64;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for &j in subset {
            sum += self.train[j].iter().sum::<f64>();
            sum_sq += self.train[j].iter().map(|v| v * v).sum::<f64>();
        }
        let count = n * d;
        let mean = sum / count;
        let var = sum_sq / count - mean * mean;
        if var > 1e-12 && subset.iter().any(|&j| self.varying[j]) {
            1.0 / (d * var)
        } else {
            1.0 / d
        }
    }

    /// Squared distances over `subset`: training × training (row-major) and
    /// validation × training.
    fn tables(&self, subset: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_train();
        let m = self.val_y.len();
        let mut tt = vec![0.0; n * n];
        let mut vt = vec![0.0; m * n];
        for &j in subset {
            let c = &self.train[j];
            for a in 0..n {
                let row = &mut tt[a * n..(a + 1) * n];
                for (t, r) in row.iter_mut().enumerate() {
                    let diff = c[a] - c[t];
                    *r += diff * diff;
                }
            }
            let v = &self.val[j];
            for a in 0..m {
                let row = &mut vt[a * n..(a + 1) * n];
                for (t, r) in row.iter_mut().enumerate() {
                    let diff = v[a] - c[t];
                    *r += diff * diff;
                }
            }
        }
        (tt, vt)
    }

    /// Removes the contribution of feature `j` from tables built over a
    /// subset that contained it.
    fn subtract(&self, tables: &mut (Vec<f64>, Vec<f64>), j: usize) {
        let n = self.n_train();
        let c = &self.train[j];
        for (a, row) in tables.0.chunks_exact_mut(n).enumerate() {
            for (r, ct) in row.iter_mut().zip(c) {
                let diff = c[a] - ct;
                *r -= diff * diff;
            }
        }
        let v = &self.val[j];
        for (a, row) in tables.1.chunks_exact_mut(n).enumerate() {
            for (r, ct) in row.iter_mut().zip(c) {
                let diff = v[a] - ct;
                *r -= diff * diff;
            }
        }
    }

    /// Correct validation predictions of an SVM trained on the distances
    /// `tt` minus feature `drop`.
    fn hits(&self, tt: &[f64], vt: &[f64], drop: Option<usize>, gamma: f64, c: f64) -> usize {
        let y = &self.train_y;
        if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
            // degenerate fold: majority-class guess
            let guess = y[0];
            return self.val_y.iter().filter(|&&l| l == guess).count();
        }
        let n = self.n_train();
        let col = drop.map(|j| self.train[j].as_slice());
        let mut kernel = TableKernel {
            n,
            gamma,
            table: tt,
            col,
            rows: vec![None; n],
        };
        let params = SvmParams::new(c, gamma);
        let sol = solve_dual(&mut kernel, y, &params);
        let vcol = drop.map(|j| self.val[j].as_slice());
        let sv: Vec<usize> = (0..n).filter(|&i| sol.alpha[i] > 0.0).collect();
        self.val_y
            .iter()
            .enumerate()
            .filter(|&(a, &label)| {
                let row = &vt[a * n..(a + 1) * n];
                let f: f64 = sv
                    .iter()
                    .map(|&t| {
                        let mut d = row[t];
                        if let (Some(cv), Some(ct)) = (vcol, col) {
                            let diff = cv[a] - ct[t];
                            d = (d - diff * diff).max(0.0);
                        }
                        let coef = if y[t] { sol.alpha[t] } else { -sol.alpha[t] };
                        coef * exp(-gamma * d)
                    })
                    .sum::<f64>()
                    - sol.rho;
                (f > 0.0) == label
            })
            .count()
    }
}

/// RBF kernel read off a squared-distance table, optionally with one
/// feature's contribution subtracted.
struct TableKernel<'a> {
    n: usize,
    gamma: f64,
    table: &'a [f64],
    col: Option<&'a [f64]>,
    rows: Vec<Option<Box<[f64]>>>,
}

impl KernelSource for TableKernel<'_> {
    fn len(&self) -> usize {
        self.n
    }

    fn diag(&self, _i: usize) -> f64 {
        1.0
    }

    fn ensure_row(&mut self, i: usize) {
        if self.rows[i].is_some() {
            return;
        }
        let base = &self.table[i * self.n..(i + 1) * self.n];
        let g = self.gamma;
        let row: Box<[f64]> = match self.col {
            Some(c) => base
                .iter()
                .zip(c)
                .map(|(d, ct)| {
                    let diff = c[i] - ct;
                    exp(-g * (d - diff * diff).max(0.0))
                })
                .collect(),
            None => base.iter().map(|d| exp(-g * d)).collect(),
        };
        self.rows[i] = Some(row);
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows[i].as_deref().expect("kernel row requested before ensure_row")
    }
}

/// Cross-validated RBF-SVM accuracy.
pub struct CvSvmScorer<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    folds: Vec<Vec<usize>>,
    prepared: Vec<Fold>,
    c: f64,
    /// Tables from the previous `score_removals` call and their subset.
    cache: Mutex<Option<(Vec<usize>, Vec<Tables>)>>,
}

type Tables = (Vec<f64>, Vec<f64>);

impl<'a> CvSvmScorer<'a> {
    pub fn new(x: &'a [Vec<f64>], y: &'a [bool], n_folds: usize, c: f64, seed: u64) -> Result<Self> {
        check_training_input(x, y)?;
        let minority = y.iter().filter(|&&l| l).count().min(y.iter().filter(|&&l| !l).count());
        if minority < 2 {
            return Err(Error::InsufficientData {
                got: minority,
                required: 2,
            });
        }
        let n_folds = n_folds.min(minority).max(2);
        let folds = stratified_folds(y, n_folds, seed);
        let prepared = folds.iter().map(|f| Fold::new(x, y, f)).collect();
        Ok(Self {
            x,
            y,
            folds,
            prepared,
            c,
            cache: Mutex::new(None),
        })
    }

    /// Reference path: standardize, train and predict from raw rows.
    fn direct_hits(&self, fold: &[usize], subset: &[usize]) -> usize {
        let mut in_fold = vec![false; self.x.len()];
        for &i in fold {
            in_fold[i] = true;
        }
        let project = |i: usize| -> Vec<f64> { subset.iter().map(|&f| self.x[i][f]).collect() };
        let train_idx: Vec<usize> = (0..self.x.len()).filter(|&i| !in_fold[i]).collect();
        let train_raw: Vec<Vec<f64>> = train_idx.iter().map(|&i| project(i)).collect();
        let train_y: Vec<bool> = train_idx.iter().map(|&i| self.y[i]).collect();
        if train_y.iter().all(|&l| l) || train_y.iter().all(|&l| !l) {
            let guess = train_y[0];
            return fold.iter().filter(|&&i| self.y[i] == guess).count();
        }
        let scaler = Standardizer::fit(&train_raw).expect("non-empty fold");
        let train = scaler.apply_all(&train_raw).expect("same dimension");
        let params = SvmParams::new(self.c, scale_gamma(&train));
        let mut kernel = RbfKernel::new(&train, params.gamma);
        let sol = solve_dual(&mut kernel, &train_y, &params);
        let model = model_from_solution(&train, &train_y, &sol, &params);
        fold.iter()
            .filter(|&&i| {
                let z = scaler.apply(&project(i)).expect("same dimension");
                model.predict(&z) == self.y[i]
            })
            .count()
    }

    /// Tables over `current`, reusing the cached ones when `current` only
    /// drops features from the cached subset.
    fn tables_for(&self, current: &[usize]) -> Vec<Tables> {
        let cached = self.cache.lock().expect("cache lock").take();
        if let Some((prev, mut tables)) = cached {
            if current.iter().all(|j| prev.contains(j)) {
                let gone: Vec<usize> = prev.into_iter().filter(|j| !current.contains(j)).collect();
                self.prepared
                    .par_iter()
                    .zip(tables.par_iter_mut())
                    .for_each(|(f, t)| gone.iter().for_each(|&j| f.subtract(t, j)));
                return tables;
            }
        }
        self.prepared.par_iter().map(|f| f.tables(current)).collect()
    }

    fn use_tables(&self) -> bool {
        self.prepared.iter().all(|f| f.n_train() <= MAX_TABLE_ROWS)
    }
}

impl SubsetScorer for CvSvmScorer<'_> {
    fn n_features(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    fn score(&self, subset: &[usize]) -> f64 {
        let hits: usize = if self.use_tables() {
            self.prepared
                .iter()
                .map(|f| {
                    let (tt, vt) = f.tables(subset);
                    f.hits(&tt, &vt, None, f.gamma(subset), self.c)
                })
                .sum()
        } else {
            self.folds.iter().map(|f| self.direct_hits(f, subset)).sum()
        };
        hits as f64 / self.x.len() as f64
    }

    fn score_removals(&self, current: &[usize]) -> Vec<f64> {
        if !self.use_tables() {
            return (0..current.len())
                .into_par_iter()
                .map(|pos| self.score(&without(current, pos)))
                .collect();
        }
        // distances over `current` once per fold; each candidate subtracts
        // its own feature
        let tables = self.tables_for(current);
        let scores = (0..current.len())
            .into_par_iter()
            .map(|pos| {
                let subset = without(current, pos);
                let hits: usize = self
                    .prepared
                    .iter()
                    .zip(&tables)
                    .map(|(f, (tt, vt))| f.hits(tt, vt, Some(current[pos]), f.gamma(&subset), self.c))
                    .sum();
                hits as f64 / self.x.len() as f64
            })
            .collect();
        *self.cache.lock().expect("cache lock") = Some((current.to_vec(), tables));
        scores
    }
}

/// SBS with the cross-validated SVM scorer.
pub fn sbs_select(x: &[Vec<f64>], y: &[bool], k: usize, c: f64, seed: u64) -> Result<SelectionResult> {
    if k < 1 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let scorer = CvSvmScorer::new(x, y, CV_FOLDS, c, seed)?;
    sbs_with_scorer(&scorer, k)
}

/// `x[selected_indices[i]]` for each kept index.
pub fn apply_selection(values: &[f64], result: &SelectionResult) -> Result<Vec<f64>> {
    if values.len() != result.original_dim {
        return Err(Error::DimensionMismatch {
            expected: result.original_dim,
            got: values.len(),
        });
    }
    project(values, &result.selected_indices)
}

pub fn apply_selection_vector(x: &FeatureVector, result: &SelectionResult) -> Result<Vec<f64>> {
    apply_selection(&x.values, result)
}

pub(crate) fn project(values: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
    indices
        .iter()
        .map(|&i| {
            values.get(i).copied().ok_or(Error::DimensionMismatch {
                expected: i + 1,
                got: values.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scores subsets by a fixed weight per feature.
    struct Weighted(Vec<f64>);

    impl SubsetScorer for Weighted {
        fn n_features(&self) -> usize {
            self.0.len()
        }
        fn score(&self, subset: &[usize]) -> f64 {
            subset.iter().map(|&i| self.0[i]).sum()
        }
    }

    #[test]
    fn removes_least_useful_first() {
        let s = Weighted(vec![5.0, 1.0, 3.0, 0.5, 4.0]);
        let r = sbs_with_scorer(&s, 2).unwrap();
        assert_eq!(r.selected_indices, [0, 4]);
        let removed: Vec<usize> = r.removal_trace.iter().map(|t| t.removed_index).collect();
        assert_eq!(removed, [3, 1, 2]);
    }

    #[test]
    fn ties_drop_lowest_index() {
        let s = Weighted(vec![1.0, 1.0, 1.0]);
        let r = sbs_with_scorer(&s, 1).unwrap();
        assert_eq!(r.selected_indices, [2]);
    }

    #[test]
    fn k_equal_dim_is_identity() {
        let s = Weighted(vec![1.0, 2.0]);
        let r = sbs_with_scorer(&s, 2).unwrap();
        assert_eq!(r, SelectionResult::identity(2));
    }

    #[test]
    fn trace_length() {
        let s = Weighted((0..25).map(|i| i as f64).collect());
        let r = sbs_with_scorer(&s, 20).unwrap();
        assert_eq!(r.selected_indices.len(), 20);
        assert_eq!(r.removal_trace.len(), 5);
    }

    #[test]
    fn bad_k() {
        let s = Weighted(vec![1.0, 2.0]);
        assert!(sbs_with_scorer(&s, 0).is_err());
        assert!(sbs_with_scorer(&s, 3).is_err());
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![0.0, 1.0]; 10];
        let y = vec![true; 10];
        assert!(matches!(
            sbs_select(&x, &y, 1, 1.0, 0),
            Err(Error::SingleClassData)
        ));
    }

    fn noisy_problem(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<bool> = (0..n).map(|i| i % 3 != 0).collect();
        let x = y
            .iter()
            .map(|&l| {
                (0..d)
                    .map(|j| {
                        let shift = if l && j < 2 { 1.0 } else { 0.0 };
                        shift + rng.random::<f64>() * (j + 1) as f64
                    })
                    .collect()
            })
            .collect();
        (x, y)
    }

    #[test]
    fn table_path_matches_direct_path() {
        let (x, y) = noisy_problem(90, 6, 5);
        let scorer = CvSvmScorer::new(&x, &y, 5, 1.0, 3).unwrap();
        let current = vec![0, 1, 2, 4, 5];
        let fast = scorer.score_removals(&current);
        for (pos, s) in fast.iter().enumerate() {
            let subset = without(&current, pos);
            let direct: usize = scorer.folds.iter().map(|f| scorer.direct_hits(f, &subset)).sum();
            assert_eq!(*s, direct as f64 / x.len() as f64, "candidate {pos}");
            assert_eq!(*s, scorer.score(&subset));
        }
    }

    #[test]
    fn projection() {
        let r = SelectionResult {
            original_dim: 4,
            selected_indices: vec![0, 2],
            removal_trace: vec![],
        };
        assert_eq!(apply_selection(&[5.0, 6.0, 7.0, 8.0], &r).unwrap(), [5.0, 7.0]);
        let id = SelectionResult::identity(3);
        assert_eq!(apply_selection(&[1.0, 2.0, 3.0], &id).unwrap(), [1.0, 2.0, 3.0]);
        let bad = SelectionResult {
            original_dim: 3,
            selected_indices: vec![0, 4],
            removal_trace: vec![],
        };
        assert!(apply_selection(&[1.0, 2.0, 3.0], &bad).is_err());
        assert!(apply_selection(&[1.0, 2.0], &id).is_err());
    }
}
