//! Executes a trained decision system on held-out examples, accounts
//! acquisition costs exactly, and runs the myopic baseline.

use std::collections::BTreeSet;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{restrict_columns, Scaler, SensorSpec};
use crate::logistic::{train_logistic, LogisticModel};
use crate::lp::DecisionFunctions;
use crate::tree::{Child, TreeStructure};
use crate::Result;

/// The full trained tuple: tree, decision functions, frozen leaf
/// classifiers, and the preprocessing needed to apply them.
#[derive(Debug, Clone)]
pub struct DecisionSystem {
    pub sensors: SensorSpec,
    pub scaler: Scaler,
    pub tree: TreeStructure,
    /// One classifier per leaf, trained on exactly that leaf's sensor set.
    pub leaf_models: Vec<LogisticModel>,
    pub decisions: DecisionFunctions,
    pub alpha: f64,
    pub label_names: Vec<String>,
}

/// Where one example ended up and what it paid to get there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleOutcome {
    pub leaf: usize,
    pub predicted: usize,
    pub cost: f64,
    pub correct: bool,
}

/// Aggregate results of one evaluation pass.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub outcomes: Vec<ExampleOutcome>,
    pub error: f64,
    pub mean_cost: f64,
    /// mean_cost divided by the cost of acquiring every sensor.
    pub cost_fraction: f64,
}

impl EvalRecord {
    fn from_outcomes(outcomes: Vec<ExampleOutcome>, total_cost: f64) -> Self {
        let n = outcomes.len() as f64;
        let wrong = outcomes.iter().filter(|o| !o.correct).count() as f64;
        let mean_cost = outcomes.iter().map(|o| o.cost).sum::<f64>() / n;
        EvalRecord {
            error: wrong / n,
            mean_cost,
            cost_fraction: if total_cost > 0.0 { mean_cost / total_cost } else { 0.0 },
            outcomes,
        }
    }
}

impl DecisionSystem {
    /// Routes one standardized example down the tree: g = 0 takes the
    /// negative branch. Returns the leaf and the union of sensors
    /// acquired along the way.
    pub fn route_example(&self, x_std: &[f64]) -> Result<(usize, BTreeSet<usize>)> {
        if self.tree.n_internal() == 0 {
            return Ok((0, self.tree.leaves[0].sensors.clone()));
        }
        let mut acquired = self.tree.root().expect("nonempty").acquired.clone();
        let mut at = Child::Node(0);
        loop {
            match at {
                Child::Leaf(l) => return Ok((l, acquired)),
                Child::Node(j) => {
                    let node = &self.tree.nodes[j];
                    let cols = self.sensors.columns_of(&node.acquired);
                    let restricted: Vec<f64> = cols.iter().map(|&c| x_std[c]).collect();
                    let g = self.decisions.eval(j, &restricted)?;
                    let (next, newly) = if g > 0.0 {
                        (node.pos_child, &node.pos_new)
                    } else {
                        (node.neg_child, &node.neg_new)
                    };
                    acquired.extend(newly.iter().copied());
                    at = next;
                }
            }
        }
    }

    /// Decision values g_j(x) for all internal nodes of one standardized
    /// example.
    pub fn decision_values(&self, x_std: &[f64]) -> Result<Vec<f64>> {
        (0..self.tree.n_internal())
            .map(|j| {
                let cols = self.sensors.columns_of(&self.tree.nodes[j].acquired);
                let restricted: Vec<f64> = cols.iter().map(|&c| x_std[c]).collect();
                self.decisions.eval(j, &restricted)
            })
            .collect()
    }

    fn classify_at(&self, leaf: usize, x_std: &[f64]) -> Result<usize> {
        let cols = self.sensors.columns_of(&self.tree.leaves[leaf].sensors);
        let restricted: Vec<f64> = cols.iter().map(|&c| x_std[c]).collect();
        self.leaf_models[leaf].predict(&restricted)
    }

    /// Evaluates on already-standardized examples.
    pub fn evaluate_std(&self, x_std: &Array2<f64>, y: &[usize]) -> Result<EvalRecord> {
        let outcomes: Vec<ExampleOutcome> = x_std
            .rows()
            .into_iter()
            .zip(y)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|(row, &label)| {
                let x = row.as_slice().expect("row is contiguous");
                let (leaf, acquired) = self.route_example(x)?;
                let predicted = self.classify_at(leaf, x)?;
                Ok(ExampleOutcome {
                    leaf,
                    predicted,
                    cost: self.sensors.subset_cost(&acquired),
                    correct: predicted == label,
                })
            })
            .collect::<Result<_>>()?;
        Ok(EvalRecord::from_outcomes(outcomes, self.sensors.total_cost()))
    }

    /// Standardizes raw examples with the training scaler, then evaluates.
    pub fn evaluate(&self, x_raw: &Array2<f64>, y: &[usize]) -> Result<EvalRecord> {
        self.evaluate_std(&self.scaler.apply(x_raw), y)
    }
}

/// Per-node confidence classifiers for the myopic baseline, trained on
/// each internal node's acquired sensor set.
pub fn train_myopic_models(
    system: &DecisionSystem,
    x_train_std: &Array2<f64>,
    y_train: &[usize],
    n_classes: usize,
    l2: f64,
) -> Result<Vec<LogisticModel>> {
    system
        .tree
        .nodes
        .par_iter()
        .map(|node| {
            let cols = system.sensors.columns_of(&node.acquired);
            let restricted = restrict_columns(x_train_std, &cols);
            let basis = system.leaf_models[0].basis;
            train_logistic(&restricted, y_train, n_classes, node.acquired.clone(), basis, l2)
                .map(|(m, _)| m)
        })
        .collect()
}

/// Myopic policy: at each internal node, classify provisionally with the
/// node's confidence model; confident examples (max probability >= tau)
/// take the branch that acquires the cheaper additional sensors, the
/// rest take the costlier, information-acquiring branch. Cost ties take
/// the negative branch as cheap.
pub fn myopic_eval(
    system: &DecisionSystem,
    node_models: &[LogisticModel],
    tau: f64,
    x_std: &Array2<f64>,
    y: &[usize],
) -> Result<EvalRecord> {
    let outcomes: Vec<ExampleOutcome> = x_std
        .rows()
        .into_iter()
        .zip(y)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(row, &label)| {
            let x = row.as_slice().expect("row is contiguous");
            let mut acquired = match system.tree.root() {
                Some(root) => root.acquired.clone(),
                None => system.tree.leaves[0].sensors.clone(),
            };
            let mut at = if system.tree.n_internal() == 0 {
                Child::Leaf(0)
            } else {
                Child::Node(0)
            };
            let leaf = loop {
                match at {
                    Child::Leaf(l) => break l,
                    Child::Node(j) => {
                        let node = &system.tree.nodes[j];
                        let cols = system.sensors.columns_of(&node.acquired);
                        let restricted: Vec<f64> = cols.iter().map(|&c| x[c]).collect();
                        let probs = node_models[j].predict_proba(&restricted)?;
                        let confidence = probs.iter().cloned().fold(0.0f64, f64::max);
                        let neg_cost = system.sensors.subset_cost(&node.neg_new);
                        let pos_cost = system.sensors.subset_cost(&node.pos_new);
                        let neg_is_cheap = neg_cost <= pos_cost;
                        let take_cheap = confidence >= tau;
                        let positive = if take_cheap { !neg_is_cheap } else { neg_is_cheap };
                        let (next, newly) = if positive {
                            (node.pos_child, &node.pos_new)
                        } else {
                            (node.neg_child, &node.neg_new)
                        };
                        acquired.extend(newly.iter().copied());
                        at = next;
                    }
                }
            };
            let cols = system.sensors.columns_of(&system.tree.leaves[leaf].sensors);
            let restricted: Vec<f64> = cols.iter().map(|&c| x[c]).collect();
            let predicted = system.leaf_models[leaf].predict(&restricted)?;
            Ok(ExampleOutcome {
                leaf,
                predicted,
                cost: system.sensors.subset_cost(&acquired),
                correct: predicted == label,
            })
        })
        .collect::<Result<_>>()?;
    Ok(EvalRecord::from_outcomes(outcomes, system.sensors.total_cost()))
}

/// One point of an error-vs-budget curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    /// The swept parameter: alpha for the trained systems, tau for the
    /// myopic baseline.
    pub param: f64,
    pub mean_cost: f64,
    pub cost_fraction: f64,
    pub error: f64,
}

/// A budget curve sorted by mean cost.
#[derive(Debug, Clone, Default)]
pub struct BudgetCurve {
    pub points: Vec<CurvePoint>,
}

impl BudgetCurve {
    pub fn push(&mut self, param: f64, record: &EvalRecord) {
        self.points.push(CurvePoint {
            param,
            mean_cost: record.mean_cost,
            cost_fraction: record.cost_fraction,
            error: record.error,
        });
    }

    pub fn sort_by_cost(&mut self) {
        self.points.sort_by(|a, b| {
            a.mean_cost
                .partial_cmp(&b.mean_cost)
                .unwrap()
                .then(a.param.partial_cmp(&b.param).unwrap())
        });
    }

    /// CSV block with the given name for the parameter column.
    pub fn to_csv(&self, param_name: &str) -> String {
        let mut out = format!("{param_name},mean_cost,cost_fraction,error\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.param, p.mean_cost, p.cost_fraction, p.error
            ));
        }
        out
    }
}
