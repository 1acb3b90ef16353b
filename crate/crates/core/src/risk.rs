//! Savings, leaf risks, the product-of-indicators empirical risk, its
//! max-of-sums reformulation, and the hinge surrogate.
//!
//! The savings pi[i][k] of example i at leaf k is the gap between the
//! worst-case risk (acquire everything, misclassify) and the risk of
//! stopping at leaf k. Routing an example away from a leaf forfeits that
//! leaf's savings; the reformulated risk charges exactly the forfeited
//! savings, which is what makes a linear-program training step possible.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::SensorSpec;
use crate::logistic::LogisticModel;
use crate::tree::{TreeSpec, TreeStructure};
use crate::{Error, Result};

/// Per-(example, leaf) savings plus the worst-case risk they are measured
/// against.
#[derive(Debug, Clone)]
pub struct SavingsMatrix {
    /// N x K, entries in [0, r_max].
    pub pi: Array2<f64>,
    /// 1 + alpha * total sensor cost.
    pub r_max: f64,
    pub alpha: f64,
}

impl SavingsMatrix {
    pub fn n_examples(&self) -> usize {
        self.pi.nrows()
    }

    pub fn n_leaves(&self) -> usize {
        self.pi.ncols()
    }

    /// Sum of all leaf savings for example i.
    pub fn total(&self, i: usize) -> f64 {
        self.pi.row(i).sum()
    }
}

/// Computes the savings matrix from frozen leaf classifiers:
/// pi[i][k] = 1{f_k(x_i) = y_i} + alpha * cost(complement of S_k).
///
/// The decisions g play no part here; savings depend only on the leaves.
pub fn savings(
    models: &[LogisticModel],
    tree: &TreeStructure,
    examples: &Array2<f64>,
    labels: &[usize],
    sensors: &SensorSpec,
    alpha: f64,
) -> Result<SavingsMatrix> {
    let k = tree.n_leaves();
    if models.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: models.len(),
        });
    }
    let n = examples.nrows();
    let r_max = 1.0 + alpha * sensors.total_cost();
    let mut pi = Array2::zeros((n, k));
    for (leaf, model) in models.iter().enumerate() {
        let cols = sensors.columns_of(&tree.leaves[leaf].sensors);
        let restricted = crate::data::restrict_columns(examples, &cols);
        let complement_cost = sensors.subset_cost(&tree.leaves[leaf].complement);
        let predictions = model.predict_batch(&restricted)?;
        for i in 0..n {
            let correct = f64::from(predictions[i] == labels[i]);
            pi[[i, leaf]] = correct + alpha * complement_cost;
        }
    }
    Ok(SavingsMatrix { pi, r_max, alpha })
}

/// The empirical risk of example i in its literal product-of-indicators
/// form: sum over leaves of (r_max - pi) times the path-state indicator.
/// This is the brute-force oracle the reformulation is checked against.
pub fn product_risk(
    tree: &TreeStructure,
    savings: &SavingsMatrix,
    signs: &[bool],
    i: usize,
) -> f64 {
    let (p, n) = tree.path_matrices();
    let mut total = 0.0;
    for leaf in 0..tree.n_leaves() {
        let mut state = 1.0;
        for j in 0..tree.n_internal() {
            if p[leaf][j] == 1 {
                state *= f64::from(signs[j]);
            }
            if n[leaf][j] == 1 {
                state *= f64::from(!signs[j]);
            }
        }
        total += (savings.r_max - savings.pi[[i, leaf]]) * state;
    }
    total
}

/// Lost-savings weight vectors for every (example, leaf) pair.
///
/// Internally stores per-node subtree savings sums; the per-leaf vectors
/// are masked views through the path matrices.
#[derive(Debug, Clone)]
pub struct WeightVectors {
    /// N x (K-1): sum of pi over leaves in node j's positive subtree.
    /// Multiplies the negative indicator 1{g_j <= 0}.
    sum_pos_subtree: Array2<f64>,
    /// N x (K-1): sum of pi over leaves in node j's negative subtree.
    /// Multiplies the positive indicator 1{g_j > 0}.
    sum_neg_subtree: Array2<f64>,
    p: Vec<Vec<u8>>,
    n: Vec<Vec<u8>>,
}

impl WeightVectors {
    /// w_p for (example i, leaf k): entry j is P[k][j] * sum of savings in
    /// node j's negative subtree.
    pub fn w_p(&self, i: usize, k: usize) -> Vec<f64> {
        (0..self.p[k].len())
            .map(|j| f64::from(self.p[k][j]) * self.sum_neg_subtree[[i, j]])
            .collect()
    }

    /// w_n for (example i, leaf k): entry j is N[k][j] * sum of savings in
    /// node j's positive subtree.
    pub fn w_n(&self, i: usize, k: usize) -> Vec<f64> {
        (0..self.n[k].len())
            .map(|j| f64::from(self.n[k][j]) * self.sum_pos_subtree[[i, j]])
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.p.len()
    }

    pub fn n_internal(&self) -> usize {
        self.p.first().map_or(0, Vec::len)
    }
}

/// Builds the weight vectors from the tree's child-leaf sets.
pub fn build_weights(tree: &TreeStructure, savings: &SavingsMatrix) -> WeightVectors {
    let n = savings.n_examples();
    let j_count = tree.n_internal();
    let mut sum_pos = Array2::zeros((n, j_count));
    let mut sum_neg = Array2::zeros((n, j_count));
    for j in 0..j_count {
        for &leaf in tree.leaves_positive(j) {
            for i in 0..n {
                sum_pos[[i, j]] += savings.pi[[i, leaf]];
            }
        }
        for &leaf in tree.leaves_negative(j) {
            for i in 0..n {
                sum_neg[[i, j]] += savings.pi[[i, leaf]];
            }
        }
    }
    let (p, n_mat) = tree.path_matrices();
    WeightVectors {
        sum_pos_subtree: sum_pos,
        sum_neg_subtree: sum_neg,
        p: p.to_vec(),
        n: n_mat.to_vec(),
    }
}

/// The term of the max for (example i, leaf k) at fixed decision signs:
/// the savings forfeited on the path to leaf k.
pub fn lost_savings_term(
    weights: &WeightVectors,
    i: usize,
    k: usize,
    signs: &[bool],
) -> f64 {
    let mut term = 0.0;
    for j in 0..weights.n_internal() {
        if weights.p[k][j] == 1 && signs[j] {
            term += weights.sum_neg_subtree[[i, j]];
        }
        if weights.n[k][j] == 1 && !signs[j] {
            term += weights.sum_pos_subtree[[i, j]];
        }
    }
    term
}

/// The reformulated empirical risk: r_max - total savings + the largest
/// lost-savings term over leaves. Equal to [`product_risk`] for every
/// total sign assignment.
pub fn max_form_risk(
    tree: &TreeStructure,
    savings: &SavingsMatrix,
    weights: &WeightVectors,
    signs: &[bool],
    i: usize,
) -> f64 {
    let max_term = (0..tree.n_leaves())
        .map(|k| lost_savings_term(weights, i, k, signs))
        .fold(f64::NEG_INFINITY, f64::max);
    savings.r_max - savings.total(i) + max_term
}

/// Hinge values substituted for the two indicator directions.
#[inline]
pub fn hinge_pos(g: f64) -> f64 {
    (1.0 + g).max(0.0)
}

#[inline]
pub fn hinge_neg(g: f64) -> f64 {
    (1.0 - g).max(0.0)
}

/// The convex surrogate risk: the max-form risk with the indicator
/// 1{g > 0} replaced by max(1+g, 0) and 1{g <= 0} by max(1-g, 0).
/// Upper-bounds `max_form_risk(sign(g))` pointwise and is convex in g.
pub fn surrogate_risk(
    tree: &TreeStructure,
    savings: &SavingsMatrix,
    weights: &WeightVectors,
    g_values: &[f64],
    i: usize,
) -> f64 {
    let mut max_term = f64::NEG_INFINITY;
    for k in 0..tree.n_leaves() {
        let mut term = 0.0;
        for j in 0..weights.n_internal() {
            if weights.p[k][j] == 1 {
                term += weights.sum_neg_subtree[[i, j]] * hinge_pos(g_values[j]);
            }
            if weights.n[k][j] == 1 {
                term += weights.sum_pos_subtree[[i, j]] * hinge_neg(g_values[j]);
            }
        }
        max_term = max_term.max(term);
    }
    savings.r_max - savings.total(i) + max_term
}

/// Decision signs from raw g values: g = 0 routes negative.
pub fn signs_of(g_values: &[f64]) -> Vec<bool> {
    g_values.iter().map(|&g| g > 0.0).collect()
}

/// Outcome of the product-form vs. max-form equivalence sweep.
#[derive(Debug, Clone, Copy, Default)]
pub struct EquivalenceReport {
    pub cases: usize,
    pub failures: usize,
    pub max_abs_diff: f64,
}

/// Sweeps random tree shapes and random rational savings matrices through
/// every sign assignment, comparing the product-form risk against the
/// max-form reformulation. Used by the `risk-check` diagnostic and the
/// test suite.
pub fn equivalence_suite(n_trees: usize, seed: u64) -> EquivalenceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = EquivalenceReport::default();
    for _ in 0..n_trees {
        let k = rng.random_range(2..=8usize);
        let spec = TreeSpec::random_shape(k, &mut rng);
        let tree = TreeStructure::from_spec(&spec, k).expect("random shape is valid");
        let n = rng.random_range(1..=3usize);
        // Savings on a 1/16 grid keep every sum exact in binary floating point.
        let pi = Array2::from_shape_fn((n, k), |_| rng.random_range(0..=32) as f64 / 16.0);
        let savings = SavingsMatrix {
            pi,
            r_max: 2.0,
            alpha: 0.1,
        };
        let weights = build_weights(&tree, &savings);
        for i in 0..n {
            for bits in 0..(1u32 << (k - 1)) {
                let signs: Vec<bool> = (0..k - 1).map(|j| bits >> j & 1 == 1).collect();
                let prod = product_risk(&tree, &savings, &signs, i);
                let max_form = max_form_risk(&tree, &savings, &weights, &signs, i);
                let diff = (prod - max_form).abs();
                report.cases += 1;
                report.max_abs_diff = report.max_abs_diff.max(diff);
                if diff > 1e-12 {
                    report.failures += 1;
                }
            }
        }
    }
    report
}
