use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviations below this are treated as constant columns.
pub const MIN_STD: f64 = 1e-12;

/// Column means and population standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self> {
        let first = x
            .first()
            .ok_or_else(|| Error::InvalidInput("cannot standardize an empty matrix".into()))?;
        let d = first.len();
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < MIN_STD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        Ok(x
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub fn apply_all(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        x.iter().map(|row| self.apply(row)).collect()
    }
}

/// Mean and std of `x`.
pub fn standardize_fit(x: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = Standardizer::fit(x)?;
    Ok((s.mean, s.std))
}

pub fn standardize_apply(x: &[f64], mean: &[f64], std: &[f64]) -> Result<Vec<f64>> {
    if mean.len() != std.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            got: std.len(),
        });
    }
    Standardizer {
        mean: mean.to_vec(),
        std: std.to_vec(),
    }
    .apply(x)
}

fn class_indices(labels: &[bool], class: bool, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
    idx.shuffle(rng);
    idx
}

/// Index split with `round(test_fraction * n_class)` test samples per class.
/// Both halves come back sorted.
pub fn stratified_split(labels: &[bool], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [false, true] {
        let idx = class_indices(labels, class, &mut rng);
        let n_test = ((idx.len() as f64) * test_fraction).round() as usize;
        let n_test = n_test.min(idx.len().saturating_sub(1));
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Validation-index sets of a stratified k-fold partition.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for class in [false, true] {
        let idx = class_indices(labels, class, &mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            folds[(pos + offset) % k].push(i);
        }
        // continue round-robin so fold sizes stay balanced overall
        offset += labels.iter().filter(|&&l| l == class).count();
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardize_arithmetic() {
        let (mean, std) = standardize_fit(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(mean, [1.0]);
        assert_eq!(std, [1.0]);
        assert_eq!(standardize_apply(&[4.0], &mean, &std).unwrap(), [3.0]);
    }

    #[test]
    fn constant_column() {
        let s = Standardizer::fit(&[vec![7.0, 1.0], vec![7.0, 3.0]]).unwrap();
        assert_eq!(s.std[0], 1.0);
        assert_eq!(s.apply(&[7.0, 2.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn wrong_dimension_and_empty() {
        let s = Standardizer::fit(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            s.apply(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Standardizer::fit(&[]).is_err());
    }

    #[test]
    fn split_preserves_ratio() {
        let labels: Vec<bool> = (0..103).map(|i| i % 3 == 0).collect();
        let (train, test) = stratified_split(&labels, 0.2, 9);
        assert_eq!(train.len() + test.len(), labels.len());
        let pos = labels.iter().filter(|&&l| l).count();
        let test_pos = test.iter().filter(|&&i| labels[i]).count();
        assert!((test_pos as f64 - 0.2 * pos as f64).abs() <= 1.0);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_seeded() {
        let labels: Vec<bool> = (0..50).map(|i| i % 2 == 0).collect();
        assert_eq!(stratified_split(&labels, 0.2, 4), stratified_split(&labels, 0.2, 4));
        assert_ne!(stratified_split(&labels, 0.2, 4), stratified_split(&labels, 0.2, 5));
    }

    #[test]
    fn folds_partition() {
        let labels: Vec<bool> = (0..47).map(|i| i % 4 == 0).collect();
        let folds = stratified_folds(&labels, 5, 1);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..47).collect::<Vec<_>>());
        for f in &folds {
            assert!(f.len() >= 9 && f.len() <= 10, "{}", f.len());
            let pos = f.iter().filter(|&&i| labels[i]).count();
            assert!((2..=3).contains(&pos));
        }
    }
}
