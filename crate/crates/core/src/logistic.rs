//! Multinomial logistic regression on an expanded feature basis.
//!
//! These are the fixed per-leaf classifiers: trained once on exactly the
//! sensor columns of their subset and frozen before decision functions are
//! learned. The trainer is a plain line-search-safeguarded gradient
//! descent; determinism (zero initialization, fixed step policy) matters
//! more here than raw speed.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::{expand_basis, expand_basis_matrix, BasisConfig};
use crate::{Error, Result};

/// A trained softmax classifier over the expanded basis of one sensor set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    /// C x B weight matrix (classes by basis dimensions, bias included
    /// when the basis carries one).
    #[serde(with = "crate::model::array2_serde")]
    pub weights: Array2<f64>,
    /// Sensor ids this model was trained on.
    pub subset: BTreeSet<usize>,
    pub basis: BasisConfig,
}

/// What the trainer saw: useful for consistency checks and logs.
#[derive(Debug, Clone, Copy)]
pub struct FitReport {
    pub train_error: f64,
    pub final_loss: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
}

const MAX_ITERS: usize = 500;
const GRAD_TOL: f64 = 1e-6;
const ARMIJO_C: f64 = 1e-4;

/// Mean multinomial log-loss plus l2/2 * ||W||^2 on a pre-expanded basis
/// matrix. This is exactly the objective the trainer minimizes.
pub fn multinomial_loss(
    weights: &Array2<f64>,
    basis_matrix: &Array2<f64>,
    labels: &[usize],
    l2: f64,
) -> f64 {
    let n = basis_matrix.nrows() as f64;
    let scores = basis_matrix.dot(&weights.t());
    let mut total = 0.0;
    for (i, row) in scores.rows().into_iter().enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let logsum = row.iter().map(|s| (s - max).exp()).sum::<f64>().ln() + max;
        total += logsum - row[labels[i]];
    }
    total / n + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`multinomial_loss`] with respect to the weights.
pub fn multinomial_gradient(
    weights: &Array2<f64>,
    basis_matrix: &Array2<f64>,
    labels: &[usize],
    l2: f64,
) -> Array2<f64> {
    let n = basis_matrix.nrows() as f64;
    let scores = basis_matrix.dot(&weights.t());
    let mut probs = Array2::zeros(scores.dim());
    for (i, row) in scores.rows().into_iter().enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|s| (s - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for (c, e) in exps.iter().enumerate() {
            probs[[i, c]] = e / sum;
        }
        probs[[i, labels[i]]] -= 1.0;
    }
    let mut grad = probs.t().dot(basis_matrix);
    grad.mapv_inplace(|g| g / n);
    grad + &(weights * l2)
}

/// Trains a softmax classifier on `x` restricted to the subset's columns.
///
/// Gradient descent from zero weights with a backtracking line search, so
/// the loss sequence is monotone non-increasing; stops when the gradient
/// infinity norm drops to 1e-6 or after 500 iterations.
pub fn train_logistic(
    x_restricted: &Array2<f64>,
    labels: &[usize],
    n_classes: usize,
    subset: BTreeSet<usize>,
    basis: BasisConfig,
    l2: f64,
) -> Result<(LogisticModel, FitReport)> {
    if n_classes < 2 {
        return Err(Error::SingleClass);
    }
    if labels.len() != x_restricted.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x_restricted.nrows(),
            got: labels.len(),
        });
    }
    let phi = expand_basis_matrix(x_restricted, &basis);
    let b = phi.ncols();
    let mut weights: Array2<f64> = Array2::zeros((n_classes, b));
    let mut loss = multinomial_loss(&weights, &phi, labels, l2);
    if !loss.is_finite() {
        return Err(Error::Divergence {
            iteration: 0,
            step: 0.0,
        });
    }
    let mut step = 1.0;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    for iter in 0..MAX_ITERS {
        let grad = multinomial_gradient(&weights, &phi, labels, l2);
        grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm <= GRAD_TOL {
            break;
        }
        iterations = iter + 1;
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
        // Grow the step back after cautious iterations, then backtrack.
        step *= 2.0;
        let mut accepted = false;
        while step > 1e-20 {
            let candidate = &weights - &(&grad * step);
            let candidate_loss = multinomial_loss(&candidate, &phi, labels, l2);
            if !candidate_loss.is_finite() {
                return Err(Error::Divergence {
                    iteration: iter,
                    step,
                });
            }
            if candidate_loss <= loss - ARMIJO_C * step * grad_sq {
                weights = candidate;
                loss = candidate_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break; // step underflow: flat within machine precision
        }
    }

    let model = LogisticModel {
        weights,
        subset,
        basis,
    };
    let mut wrong = 0usize;
    for (i, row) in x_restricted.rows().into_iter().enumerate() {
        if model.predict(row.as_slice().expect("row is contiguous"))? != labels[i] {
            wrong += 1;
        }
    }
    let report = FitReport {
        train_error: wrong as f64 / labels.len() as f64,
        final_loss: loss,
        grad_inf_norm: grad_norm,
        iterations,
    };
    Ok((model, report))
}

impl LogisticModel {
    pub fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    fn scores(&self, x_restricted: &[f64]) -> Result<Array1<f64>> {
        let phi = expand_basis(x_restricted, &self.basis);
        if phi.len() != self.weights.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.ncols(),
                got: phi.len(),
            });
        }
        Ok(self.weights.dot(&Array1::from_vec(phi)))
    }

    /// Predicted class id; score ties break toward the smallest id.
    pub fn predict(&self, x_restricted: &[f64]) -> Result<usize> {
        let scores = self.scores(x_restricted)?;
        let mut best = 0usize;
        for c in 1..scores.len() {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        Ok(best)
    }

    /// Softmax class probabilities; sums to 1 up to rounding.
    pub fn predict_proba(&self, x_restricted: &[f64]) -> Result<Vec<f64>> {
        let scores = self.scores(x_restricted)?;
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / sum).collect())
    }

    pub fn predict_batch(&self, x_restricted: &Array2<f64>) -> Result<Vec<usize>> {
        x_restricted
            .rows()
            .into_iter()
            .map(|row| self.predict(row.as_slice().expect("row is contiguous")))
            .collect()
    }

    /// 1 iff the prediction differs from `y`.
    pub fn error_indicator(&self, x_restricted: &[f64], y: usize) -> Result<u8> {
        Ok(u8::from(self.predict(x_restricted)? != y))
    }
}
