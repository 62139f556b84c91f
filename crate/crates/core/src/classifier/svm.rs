//! Soft-margin RBF support vector machine trained with sequential minimal
//! optimization.
//!
//! The solver follows the LIBSVM formulation: pairwise updates on the dual,
//! working pairs chosen by maximal violation with second-order gain, stop
//! when the maximal KKT violation drops below `tol`. Per-class box bounds
//! implement class weighting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
    /// Scale C per class by `n / (2 * n_class)`.
    pub balanced: bool,
    pub max_iter: usize,
}

impl SvmParams {
    pub fn new(c: f64, gamma: f64) -> Self {
        Self {
            c,
            gamma,
            tol: 1e-3,
            balanced: true,
            max_iter: 10_000_000,
        }
    }
}

/// Rows of a symmetric kernel matrix, computed on demand.
pub trait KernelSource {
    fn len(&self) -> usize;
    fn diag(&self, i: usize) -> f64;
    fn ensure_row(&mut self, i: usize);
    /// Row `i`; `ensure_row(i)` must have been called.
    fn row(&self, i: usize) -> &[f64];
}

/// Squared Euclidean distance.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    exp(-gamma * sq_dist(a, b))
}

/// `e^x`, accurate to a couple of ulp, inlinable into kernel loops.
/// Arguments are clamped to ±700.
#[inline(always)]
pub fn exp(x: f64) -> f64 {
    // round-to-nearest via the 1.5 * 2^52 shifter
    const SHIFTER: f64 = 6_755_399_441_055_744.0;
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let x = x.clamp(-700.0, 700.0);
    let kf = x * std::f64::consts::LOG2_E + SHIFTER;
    let k = kf - SHIFTER;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    // Taylor series to r^13 on |r| <= ln2 / 2
    let mut p = 1.0 / 6_227_020_800.0;
    for c in [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    p * f64::from_bits(kf.to_bits().wrapping_add(1023) << 52)
}

/// RBF kernel over a fixed sample set with a full row cache.
pub struct RbfKernel<'a> {
    x: &'a [Vec<f64>],
    gamma: f64,
    rows: Vec<Option<Box<[f64]>>>,
}

impl<'a> RbfKernel<'a> {
    pub fn new(x: &'a [Vec<f64>], gamma: f64) -> Self {
        Self {
            x,
            gamma,
            rows: vec![None; x.len()],
        }
    }
}

impl KernelSource for RbfKernel<'_> {
    fn len(&self) -> usize {
        self.x.len()
    }

    fn diag(&self, _i: usize) -> f64 {
        1.0
    }

    fn ensure_row(&mut self, i: usize) {
        if self.rows[i].is_none() {
            let xi = &self.x[i];
            let row = self.x.iter().map(|xt| rbf(xi, xt, self.gamma)).collect();
            self.rows[i] = Some(row);
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows[i].as_deref().expect("kernel row requested before ensure_row")
    }
}

/// Dual solution on the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Decision threshold: `f(x) = sum(alpha_i y_i K(x_i, x)) - rho`.
    pub rho: f64,
    pub iterations: usize,
    pub upper_bounds: Vec<f64>,
}

fn sign(label: bool) -> f64 {
    if label {
        1.0
    } else {
        -1.0
    }
}

/// Per-sample box bounds.
pub fn box_bounds(y: &[bool], c: f64, balanced: bool) -> Vec<f64> {
    let n = y.len() as f64;
    let n_pos = y.iter().filter(|&&l| l).count() as f64;
    let n_neg = n - n_pos;
    let (w_pos, w_neg) = if balanced {
        (n / (2.0 * n_pos), n / (2.0 * n_neg))
    } else {
        (1.0, 1.0)
    };
    y.iter()
        .map(|&l| if l { c * w_pos } else { c * w_neg })
        .collect()
}

/// Solves the C-SVC dual for the given kernel and labels.
pub fn solve_dual<K: KernelSource>(kernel: &mut K, y: &[bool], params: &SvmParams) -> DualSolution {
    let n = y.len();
    let ys: Vec<f64> = y.iter().map(|&l| sign(l)).collect();
    let cap = box_bounds(y, params.c, params.balanced);
    let diag: Vec<f64> = (0..n).map(|i| kernel.diag(i)).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];

    let at_upper = |a: &[f64], t: usize| a[t] >= cap[t];
    let at_lower = |a: &[f64], t: usize| a[t] <= 0.0;
    // membership in I_up / I_low, refreshed for the two updated indices
    let in_up = |a: &[f64], t: usize| if ys[t] > 0.0 { !at_upper(a, t) } else { !at_lower(a, t) };
    let in_low = |a: &[f64], t: usize| if ys[t] > 0.0 { !at_lower(a, t) } else { !at_upper(a, t) };
    let mut up: Vec<bool> = (0..n).map(|t| in_up(&alpha, t)).collect();
    let mut low: Vec<bool> = (0..n).map(|t| in_low(&alpha, t)).collect();

    let mut iterations = 0;
    while iterations < params.max_iter {
        // i: maximal violator in I_up
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let v = if up[t] { -ys[t] * grad[t] } else { f64::NEG_INFINITY };
            if v >= g_max && up[t] {
                g_max = v;
                i_sel = t;
            }
        }
        if i_sel == usize::MAX {
            break;
        }
        let i = i_sel;
        kernel.ensure_row(i);

        // j: best second-order gain in I_low
        let mut g_max2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        {
            let k_i = kernel.row(i);
            let d_i = diag[i];
            for t in 0..n {
                if !low[t] {
                    continue;
                }
                let v = ys[t] * grad[t];
                g_max2 = g_max2.max(v);
                let grad_diff = g_max + v;
                if grad_diff > 0.0 {
                    let quad = d_i + diag[t] - 2.0 * k_i[t];
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        if g_max + g_max2 < params.tol {
            break;
        }
        let Some(j) = j_sel else { break };
        kernel.ensure_row(j);
        iterations += 1;

        let k_ij = kernel.row(i)[j];
        let (c_i, c_j) = (cap[i], cap[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = {
            let q = diag[i] + diag[j] - 2.0 * k_ij;
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        if ys[i] != ys[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > c_i - c_j {
                if alpha[i] > c_i {
                    alpha[i] = c_i;
                    alpha[j] = c_i - diff;
                }
            } else if alpha[j] > c_j {
                alpha[j] = c_j;
                alpha[i] = c_j + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c_i {
                if alpha[i] > c_i {
                    alpha[i] = c_i;
                    alpha[j] = sum - c_i;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c_j {
                if alpha[j] > c_j {
                    alpha[j] = c_j;
                    alpha[i] = sum - c_j;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        for t in [i, j] {
            up[t] = in_up(&alpha, t);
            low[t] = in_low(&alpha, t);
        }

        let d_i = (alpha[i] - old_i) * ys[i];
        let d_j = (alpha[j] - old_j) * ys[j];
        let k_i = kernel.row(i);
        let k_j = kernel.row(j);
        for ((g, y), (ki, kj)) in grad.iter_mut().zip(&ys).zip(k_i.iter().zip(k_j)) {
            *g += y * (ki * d_i + kj * d_j);
        }
    }

    // threshold from free vectors, or the midpoint of the feasible interval
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut n_free = 0usize;
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if at_upper(&alpha, t) {
            if ys[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if at_lower(&alpha, t) {
            if ys[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else {
        (upper + lower) / 2.0
    };

    DualSolution {
        alpha,
        rho,
        iterations,
        upper_bounds: cap,
    }
}

/// A trained RBF classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i`.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
}

impl Svm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefficients)
            .map(|(sv, coef)| coef * rbf(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) > 0.0
    }

    pub fn accuracy(&self, x: &[Vec<f64>], y: &[bool]) -> f64 {
        if x.is_empty() {
            return 0.0;
        }
        let hits = x
            .iter()
            .zip(y)
            .filter(|(row, &label)| self.predict(row) == label)
            .count();
        hits as f64 / x.len() as f64
    }
}

pub(crate) fn check_training_input(x: &[Vec<f64>], y: &[bool]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::InsufficientData {
            got: 0,
            required: 2,
        });
    }
    if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(Error::SingleClassData);
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
    }
    Ok(d)
}

/// Trains on `x` (rows) with boolean labels.
pub fn svm_train(x: &[Vec<f64>], y: &[bool], params: &SvmParams) -> Result<Svm> {
    check_training_input(x, y)?;
    if !(params.c > 0.0 && params.gamma > 0.0) {
        return Err(Error::InvalidInput("C and gamma must be positive".into()));
    }
    let mut kernel = RbfKernel::new(x, params.gamma);
    let sol = solve_dual(&mut kernel, y, params);
    Ok(model_from_solution(x, y, &sol, params))
}

pub(crate) fn model_from_solution(
    x: &[Vec<f64>],
    y: &[bool],
    sol: &DualSolution,
    params: &SvmParams,
) -> Svm {
    let mut support_vectors = Vec::new();
    let mut dual_coefficients = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x[i].clone());
            dual_coefficients.push(a * sign(y[i]));
        }
    }
    Svm {
        support_vectors,
        dual_coefficients,
        bias: -sol.rho,
        gamma: params.gamma,
        c: params.c,
    }
}

/// `1 / (d * var(X))` over all entries; `1 / d` for constant data.
pub fn scale_gamma(x: &[Vec<f64>]) -> f64 {
    let d = x.first().map_or(1, Vec::len).max(1) as f64;
    let count = x.len() as f64 * d;
    let mean = x.iter().flatten().sum::<f64>() / count;
    let var = x.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    if var > 0.0 && var.is_finite() {
        1.0 / (d * var)
    } else {
        1.0 / d
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;

    fn blobs(seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..100 {
            let label = i % 2 == 0;
            let c = if label { 5.0 } else { 0.0 };
            x.push(vec![
                c + 0.5 * rng.sample::<f64, _>(StandardNormal),
                c + 0.5 * rng.sample::<f64, _>(StandardNormal),
            ]);
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn exp_matches_std() {
        let mut worst: f64 = 0.0;
        for i in 0..100_000 {
            let x = -700.0 + i as f64 * 0.014;
            worst = worst.max(((exp(x) - x.exp()) / x.exp()).abs());
        }
        assert!(worst < 1e-15, "{worst}");
        assert_eq!(exp(0.0), 1.0);
    }

    #[test]
    fn separable_blobs() {
        let (x, y) = blobs(1);
        let m = svm_train(&x, &y, &SvmParams::new(1.0, 0.5)).unwrap();
        assert!(m.accuracy(&x, &y) >= 0.99);
        assert!(m.predict(&[5.0, 5.0]));
        assert!(!m.predict(&[0.0, 0.0]));
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            svm_train(&x, &[true, true], &SvmParams::new(1.0, 1.0)),
            Err(Error::SingleClassData)
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let x = vec![vec![0.0], vec![f64::NAN]];
        assert!(svm_train(&x, &[true, false], &SvmParams::new(1.0, 1.0)).is_err());
    }

    #[test]
    fn dual_constraints_hold() {
        let (x, y) = blobs(3);
        let params = SvmParams::new(1.0, 0.5);
        let mut k = RbfKernel::new(&x, params.gamma);
        let sol = solve_dual(&mut k, &y, &params);
        let eq: f64 = sol
            .alpha
            .iter()
            .zip(&y)
            .map(|(a, &l)| a * sign(l))
            .sum();
        assert!(eq.abs() < 1e-9, "{eq}");
        for (a, c) in sol.alpha.iter().zip(&sol.upper_bounds) {
            assert!(*a >= 0.0 && *a <= *c + 1e-12);
        }
    }

    #[test]
    fn two_points() {
        let x = vec![vec![0.0], vec![1.0]];
        let m = svm_train(&x, &[false, true], &SvmParams::new(10.0, 1.0)).unwrap();
        assert!(m.decision(&[0.5]).abs() < 1e-6);
        assert!(m.predict(&[1.0]));
    }

    #[test]
    fn gamma_scale() {
        let x = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        assert!((scale_gamma(&x) - 0.5).abs() < 1e-12);
        assert_eq!(scale_gamma(&[vec![3.0, 3.0]]), 0.5);
    }
}
