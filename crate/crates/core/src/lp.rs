//! Assembles the decision-function training problem as a linear program
//! and extracts the trained functions from its optimum.
//!
//! Variables: per-node weight vectors and biases (boxed by W_max), one
//! epigraph variable gamma per example, and hinge variables alpha/beta
//! per (example, node). Constraints bind gamma above every leaf's
//! lost-savings term and the hinges above 1 +- g. Constant risk terms are
//! dropped here and restored in the report so the surrogate identity can
//! be checked literally.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{expand_basis, expand_basis_matrix, restrict_columns, BasisConfig, SensorSpec};
use crate::risk::{hinge_neg, hinge_pos, SavingsMatrix, WeightVectors};
use crate::simplex::{
    solve_lp, LinearProgram, Rel, Row, SimplexSolution, SolveStatus, VarDef,
};
use crate::tree::TreeStructure;
use crate::{Error, Result};

/// A trained affine decision function for one internal node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionFunction {
    pub node: usize,
    /// Weights over the node basis (bias excluded).
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// All internal decision functions, indexed by node id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionFunctions {
    pub funcs: Vec<DecisionFunction>,
    pub basis: BasisConfig,
}

impl DecisionFunctions {
    /// Evaluates g_j on features already restricted to node j's acquired
    /// columns (standardized space).
    pub fn eval(&self, node: usize, x_restricted: &[f64]) -> Result<f64> {
        let f = &self.funcs[node];
        let phi = expand_basis(x_restricted, &self.nobias_basis());
        if phi.len() != f.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: f.weights.len(),
                got: phi.len(),
            });
        }
        Ok(f.weights.iter().zip(&phi).map(|(w, p)| w * p).sum::<f64>() + f.bias)
    }

    fn nobias_basis(&self) -> BasisConfig {
        BasisConfig {
            include_bias: false,
            ..self.basis
        }
    }
}

/// Layout bookkeeping for the assembled program.
#[derive(Debug, Clone)]
pub struct LpLayout {
    /// (start, len) of each node's weight block; len excludes the bias,
    /// which sits at start + len.
    pub node_weights: Vec<(usize, usize)>,
    pub gamma_start: usize,
    pub alpha_start: usize,
    pub beta_start: usize,
    pub n_examples: usize,
    pub n_nodes: usize,
}

impl LpLayout {
    pub fn gamma(&self, i: usize) -> usize {
        self.gamma_start + i
    }
    pub fn alpha(&self, i: usize, j: usize) -> usize {
        self.alpha_start + i * self.n_nodes + j
    }
    pub fn beta(&self, i: usize, j: usize) -> usize {
        self.beta_start + i * self.n_nodes + j
    }
}

/// Builds the linear program from the lost-savings weights and per-node
/// expanded bases (one N x (B_j + 1) matrix per node, bias column last).
pub fn assemble_lp(
    tree: &TreeStructure,
    weights: &WeightVectors,
    node_bases: &[Array2<f64>],
    w_max: f64,
) -> Result<(LinearProgram, LpLayout)> {
    let n_nodes = tree.n_internal();
    let k = tree.n_leaves();
    if n_nodes == 0 {
        return Err(Error::BadProgram("tree has no internal nodes".into()));
    }
    if node_bases.len() != n_nodes {
        return Err(Error::DimensionMismatch {
            expected: n_nodes,
            got: node_bases.len(),
        });
    }
    let n = node_bases[0].nrows();
    for basis in node_bases {
        if basis.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: basis.nrows(),
            });
        }
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadProgram("non-finite basis entry".into()));
        }
    }
    if !w_max.is_finite() || w_max <= 0.0 {
        return Err(Error::BadProgram(format!("w_max must be positive, got {w_max}")));
    }

    let mut vars: Vec<VarDef> = Vec::new();
    let mut node_weights = Vec::with_capacity(n_nodes);
    for (j, basis) in node_bases.iter().enumerate() {
        let b = basis.ncols() - 1; // last column is the bias input
        node_weights.push((vars.len(), b));
        for t in 0..b {
            vars.push(VarDef {
                name: format!("g{j}_w{t}"),
                lower: -w_max,
                upper: Some(w_max),
            });
        }
        vars.push(VarDef {
            name: format!("g{j}_bias"),
            lower: -w_max,
            upper: Some(w_max),
        });
    }
    let gamma_start = vars.len();
    for i in 0..n {
        vars.push(VarDef {
            name: format!("gamma{i}"),
            lower: 0.0,
            upper: None,
        });
    }
    let alpha_start = vars.len();
    for i in 0..n {
        for j in 0..n_nodes {
            vars.push(VarDef {
                name: format!("alpha_{i}_{j}"),
                lower: 0.0,
                upper: None,
            });
        }
    }
    let beta_start = vars.len();
    for i in 0..n {
        for j in 0..n_nodes {
            vars.push(VarDef {
                name: format!("beta_{i}_{j}"),
                lower: 0.0,
                upper: None,
            });
        }
    }
    let layout = LpLayout {
        node_weights,
        gamma_start,
        alpha_start,
        beta_start,
        n_examples: n,
        n_nodes,
    };

    let mut objective = vec![0.0; vars.len()];
    for i in 0..n {
        objective[layout.gamma(i)] = 1.0;
    }

    let mut rows: Vec<Row> = Vec::with_capacity(n * k + 2 * n * n_nodes);
    // Epigraph rows: lost savings of every leaf stay below gamma.
    for i in 0..n {
        for leaf in 0..k {
            let wp = weights.w_p(i, leaf);
            let wn = weights.w_n(i, leaf);
            if wp.iter().chain(&wn).any(|v| !v.is_finite()) {
                return Err(Error::BadProgram("non-finite savings weight".into()));
            }
            let mut coeffs: Vec<(usize, f64)> = Vec::new();
            for (j, &w) in wp.iter().enumerate() {
                if w != 0.0 {
                    coeffs.push((layout.alpha(i, j), w));
                }
            }
            for (j, &w) in wn.iter().enumerate() {
                if w != 0.0 {
                    coeffs.push((layout.beta(i, j), w));
                }
            }
            coeffs.push((layout.gamma(i), -1.0));
            rows.push(Row {
                coeffs,
                rel: Rel::Le,
                rhs: 0.0,
            });
        }
    }
    // Hinge rows: alpha >= 1 + g(x_i), beta >= 1 - g(x_i).
    for i in 0..n {
        for j in 0..n_nodes {
            let (start, b) = layout.node_weights[j];
            let phi = node_bases[j].row(i);
            let mut pos: Vec<(usize, f64)> = Vec::with_capacity(b + 2);
            let mut neg: Vec<(usize, f64)> = Vec::with_capacity(b + 2);
            for t in 0..=b {
                let v = phi[t];
                if v != 0.0 {
                    pos.push((start + t, v));
                    neg.push((start + t, -v));
                }
            }
            pos.push((layout.alpha(i, j), -1.0));
            neg.push((layout.beta(i, j), -1.0));
            // 1 + g <= alpha  rewritten as  g - alpha <= -1
            rows.push(Row {
                coeffs: pos,
                rel: Rel::Le,
                rhs: -1.0,
            });
            // 1 - g <= beta  rewritten as  -g - beta <= -1
            rows.push(Row {
                coeffs: neg,
                rel: Rel::Le,
                rhs: -1.0,
            });
        }
    }

    Ok((
        LinearProgram {
            vars,
            objective,
            rows,
        },
        layout,
    ))
}

/// Diagnostics from one LP training run: the surrogate identity and the
/// tightness of the optimum's auxiliary variables.
#[derive(Debug, Clone)]
pub struct LpTrainReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub lp_objective: f64,
    /// Sum over examples of (r_max - total savings): the constant dropped
    /// from the LP objective.
    pub restored_constant: f64,
    /// Sum of surrogate risks at the extracted decision functions.
    pub surrogate_total: f64,
    /// |lp_objective + restored_constant - surrogate_total|.
    pub identity_gap: f64,
    /// Largest |alpha - hinge(g)| or |beta - hinge(-g)| at the optimum.
    pub hinge_gap: f64,
    /// Largest |gamma - max leaf term| at the optimum.
    pub gamma_gap: f64,
    pub n_vars: usize,
    pub n_rows: usize,
}

/// Trains the decision functions for a fixed tree by solving the
/// surrogate-risk LP built from `savings` on the given standardized
/// training examples.
pub fn train_decisions(
    tree: &TreeStructure,
    savings: &SavingsMatrix,
    weights: &WeightVectors,
    examples: &Array2<f64>,
    sensors: &SensorSpec,
    basis: BasisConfig,
    w_max: f64,
    max_iters: usize,
) -> Result<(DecisionFunctions, LpTrainReport)> {
    let n = examples.nrows();
    if savings.n_examples() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: savings.n_examples(),
        });
    }
    let with_bias = BasisConfig {
        include_bias: true,
        ..basis
    };
    if tree.n_internal() == 0 {
        // Single-leaf tree: nothing to train.
        let restored: f64 = (0..n).map(|i| savings.r_max - savings.total(i)).sum();
        return Ok((
            DecisionFunctions {
                funcs: Vec::new(),
                basis: with_bias,
            },
            LpTrainReport {
                status: SolveStatus::Optimal,
                iterations: 0,
                lp_objective: 0.0,
                restored_constant: restored,
                surrogate_total: restored,
                identity_gap: 0.0,
                hinge_gap: 0.0,
                gamma_gap: 0.0,
                n_vars: 0,
                n_rows: 0,
            },
        ));
    }

    let node_bases: Vec<Array2<f64>> = tree
        .nodes
        .iter()
        .map(|node| {
            let cols = sensors.columns_of(&node.acquired);
            expand_basis_matrix(&restrict_columns(examples, &cols), &with_bias)
        })
        .collect();
    let (lp, layout) = assemble_lp(tree, weights, &node_bases, w_max)?;
    let solution = solve_lp(&lp, max_iters)?;
    if solution.status != SolveStatus::Optimal {
        return Err(Error::Solver(solution.status));
    }
    let decisions = extract_decisions(&solution, &layout, with_bias);
    let report = build_report(tree, savings, weights, &node_bases, &solution, &layout, &lp);
    Ok((decisions, report))
}

fn extract_decisions(
    solution: &SimplexSolution,
    layout: &LpLayout,
    basis: BasisConfig,
) -> DecisionFunctions {
    let funcs = layout
        .node_weights
        .iter()
        .enumerate()
        .map(|(j, &(start, b))| DecisionFunction {
            node: j,
            weights: solution.primal[start..start + b].to_vec(),
            bias: solution.primal[start + b],
        })
        .collect();
    DecisionFunctions { funcs, basis }
}

fn build_report(
    tree: &TreeStructure,
    savings: &SavingsMatrix,
    weights: &WeightVectors,
    node_bases: &[Array2<f64>],
    solution: &SimplexSolution,
    layout: &LpLayout,
    lp: &LinearProgram,
) -> LpTrainReport {
    let n = layout.n_examples;
    let n_nodes = layout.n_nodes;
    // g values straight from the node bases and extracted weights.
    let mut g = Array2::zeros((n, n_nodes));
    for j in 0..n_nodes {
        let (start, b) = layout.node_weights[j];
        for i in 0..n {
            let phi = node_bases[j].row(i);
            let mut v = 0.0;
            for t in 0..=b {
                v += solution.primal[start + t] * phi[t];
            }
            g[[i, j]] = v;
        }
    }

    let mut restored = 0.0;
    let mut surrogate_total = 0.0;
    let mut hinge_gap = 0.0f64;
    let mut gamma_gap = 0.0f64;
    for i in 0..n {
        restored += savings.r_max - savings.total(i);
        let g_row: Vec<f64> = (0..n_nodes).map(|j| g[[i, j]]).collect();
        surrogate_total += crate::risk::surrogate_risk(tree, savings, weights, &g_row, i);
        for j in 0..n_nodes {
            let alpha = solution.primal[layout.alpha(i, j)];
            let beta = solution.primal[layout.beta(i, j)];
            hinge_gap = hinge_gap.max((alpha - hinge_pos(g[[i, j]])).abs());
            hinge_gap = hinge_gap.max((beta - hinge_neg(g[[i, j]])).abs());
        }
        let max_term = (0..tree.n_leaves())
            .map(|k| {
                let wp = weights.w_p(i, k);
                let wn = weights.w_n(i, k);
                (0..n_nodes)
                    .map(|j| {
                        wp[j] * solution.primal[layout.alpha(i, j)]
                            + wn[j] * solution.primal[layout.beta(i, j)]
                    })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        gamma_gap = gamma_gap.max((solution.primal[layout.gamma(i)] - max_term).abs());
    }
    LpTrainReport {
        status: solution.status,
        iterations: solution.iterations,
        lp_objective: solution.objective,
        restored_constant: restored,
        surrogate_total,
        identity_gap: (solution.objective + restored - surrogate_total).abs(),
        hinge_gap,
        gamma_gap,
        n_vars: lp.n_vars(),
        n_rows: lp.n_rows(),
    }
}
