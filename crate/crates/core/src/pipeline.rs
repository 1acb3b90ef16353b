//! End-to-end wiring: configuration, data preparation, system training,
//! and alpha/tau sweeps. The CLI is a thin shell over this module.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    load_dataset, make_split, restrict_columns, standardize, BasisConfig, Dataset, Scaler,
    SensorSpec, Split,
};
use crate::eval::{myopic_eval, train_myopic_models, BudgetCurve, DecisionSystem, EvalRecord};
use crate::logistic::{train_logistic, LogisticModel};
use crate::lp::{train_decisions, LpTrainReport};
use crate::risk::{build_weights, savings};
use crate::subsets::{greedy_select, SearchConfig, SubsetCollection};
use crate::tree::{cluster_tree, TreeSpec, TreeStructure};
use crate::{Error, Result};

// Salt so the LP subsample draw never collides with the split shuffle.
const LP_SAMPLE_SALT: u64 = 0x6c70_5f73_616d_706c;

/// Everything a run needs, echoed verbatim into the model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub sensors: PathBuf,
    pub label: String,
    pub split: (f64, f64, f64),
    pub seed: u64,
    /// Number of subset slots K for the greedy search.
    pub leaves: usize,
    /// Polynomial degree of the leaf-classifier basis (1 or 2; degree 2
    /// uses homogeneous monomials).
    pub basis_degree: u8,
    /// Polynomial degree of the decision-function basis.
    pub g_degree: u8,
    pub l2: f64,
    pub w_max: f64,
    /// Cap on candidate sensors per greedy step; None tries all.
    pub candidate_budget: Option<usize>,
    /// Cap on training examples fed to the LP; None uses all.
    pub lp_max_examples: Option<usize>,
    pub lp_max_iters: usize,
    pub fixed_tree: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::new(),
            sensors: PathBuf::new(),
            label: "label".into(),
            split: (0.7, 0.15, 0.15),
            seed: 1,
            leaves: 4,
            basis_degree: 2,
            g_degree: 2,
            l2: 1e-4,
            w_max: 1e3,
            candidate_budget: None,
            lp_max_examples: None,
            lp_max_iters: 400_000,
            fixed_tree: None,
        }
    }
}

impl RunConfig {
    pub fn classifier_basis(&self) -> Result<BasisConfig> {
        BasisConfig::from_degree(self.basis_degree)
    }

    pub fn decision_basis(&self) -> Result<BasisConfig> {
        BasisConfig::from_degree(self.g_degree)
    }
}

/// Loaded, split, and standardized data ready for training.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub dataset: Dataset,
    pub sensors: SensorSpec,
    pub split: Split,
    pub scaler: Scaler,
    pub x_train: Array2<f64>,
    pub y_train: Vec<usize>,
    pub x_val: Array2<f64>,
    pub y_val: Vec<usize>,
    pub x_test: Array2<f64>,
    pub y_test: Vec<usize>,
}

/// Loads the dataset and sensor config, splits, and standardizes (scaler
/// fitted on the training split only).
pub fn prepare(cfg: &RunConfig) -> Result<PreparedData> {
    let dataset = load_dataset(&cfg.data, &cfg.label)?;
    let sensors = SensorSpec::load(&cfg.sensors)?;
    sensors.validate(dataset.n_features())?;
    let split = make_split(dataset.n_examples(), cfg.split, cfg.seed)?;
    prepare_with(dataset, sensors, split)
}

/// Same as [`prepare`] but over already-loaded pieces; useful for tests
/// and for evaluating a stored model against its recorded split.
pub fn prepare_with(dataset: Dataset, sensors: SensorSpec, split: Split) -> Result<PreparedData> {
    let (train_raw, y_train) = dataset.select_rows(&split.train_idx);
    let (val_raw, y_val) = dataset.select_rows(&split.val_idx);
    let (test_raw, y_test) = dataset.select_rows(&split.test_idx);
    let (scaler, x_train) = standardize(&train_raw);
    let x_val = scaler.apply(&val_raw);
    let x_test = scaler.apply(&test_raw);
    Ok(PreparedData {
        dataset,
        sensors,
        split,
        scaler,
        x_train,
        y_train,
        x_val,
        y_val,
        x_test,
        y_test,
    })
}

/// Cache of trained leaf classifiers keyed by subset, basis, and ridge.
#[derive(Default)]
pub struct ModelCache {
    map: HashMap<(Vec<usize>, BasisConfig, u64), LogisticModel>,
}

impl ModelCache {
    pub fn get_or_train(
        &mut self,
        subset: &BTreeSet<usize>,
        basis: BasisConfig,
        l2: f64,
        prep: &PreparedData,
    ) -> Result<LogisticModel> {
        let key = (
            subset.iter().copied().collect::<Vec<_>>(),
            basis,
            l2.to_bits(),
        );
        if let Some(m) = self.map.get(&key) {
            return Ok(m.clone());
        }
        let cols = prep.sensors.columns_of(subset);
        let (model, _) = train_logistic(
            &restrict_columns(&prep.x_train, &cols),
            &prep.y_train,
            prep.dataset.n_classes(),
            subset.clone(),
            basis,
            l2,
        )?;
        self.map.insert(key, model.clone());
        Ok(model)
    }

    pub fn insert(&mut self, model: &LogisticModel, l2: f64) {
        let key = (
            model.subset.iter().copied().collect::<Vec<_>>(),
            model.basis,
            l2.to_bits(),
        );
        self.map.entry(key).or_insert_with(|| model.clone());
    }
}

/// Byproducts of one training run, for logs and diagnostics.
#[derive(Debug)]
pub struct TrainArtifacts {
    pub collection: Option<SubsetCollection>,
    pub lp_report: LpTrainReport,
    /// Training-split indices the LP actually saw.
    pub lp_rows: Vec<usize>,
}

/// Runs the greedy subset search for this config at the given alpha.
pub fn search_subsets(
    prep: &PreparedData,
    cfg: &RunConfig,
    alpha: f64,
) -> Result<SubsetCollection> {
    let l = prep.sensors.n_sensors();
    let search = SearchConfig {
        k: cfg.leaves,
        alpha,
        candidate_budget: cfg.candidate_budget.unwrap_or(l),
        l2: cfg.l2,
        search_basis: BasisConfig::linear(),
        final_basis: cfg.classifier_basis()?,
    };
    greedy_select(
        &prep.x_train,
        &prep.y_train,
        &prep.x_val,
        &prep.y_val,
        prep.dataset.n_classes(),
        &prep.sensors,
        &search,
    )
}

/// Deterministic subsample of training rows for the LP stage.
fn lp_rows(n_train: usize, cap: Option<usize>, seed: u64) -> Vec<usize> {
    match cap {
        Some(cap) if cap < n_train => {
            let mut order: Vec<usize> = (0..n_train).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ LP_SAMPLE_SALT);
            order.shuffle(&mut rng);
            let mut rows = order[..cap].to_vec();
            rows.sort_unstable();
            rows
        }
        _ => (0..n_train).collect(),
    }
}

/// Trains a full decision system for one alpha: subsets (searched or from
/// a fixed tree), clustered tree, frozen leaf classifiers, savings, and
/// the LP-trained decision functions.
pub fn train_system(
    prep: &PreparedData,
    cfg: &RunConfig,
    alpha: f64,
    fixed_tree: Option<&TreeSpec>,
    fixed_subsets: Option<&[BTreeSet<usize>]>,
    cache: &mut ModelCache,
) -> Result<(DecisionSystem, TrainArtifacts)> {
    let l = prep.sensors.n_sensors();
    let classifier_basis = cfg.classifier_basis()?;
    let (tree, collection) = match (fixed_tree, fixed_subsets) {
        (Some(spec), _) => (TreeStructure::from_spec(spec, l)?, None),
        (None, Some(subsets)) => (cluster_tree(subsets, l)?, None),
        (None, None) => {
            let collection = search_subsets(prep, cfg, alpha)?;
            if collection.subsets.len() < 2 {
                return Err(Error::DegenerateCollection {
                    distinct: collection.subsets.len(),
                });
            }
            for model in &collection.oracle_models {
                cache.insert(model, cfg.l2);
            }
            (cluster_tree(&collection.subsets, l)?, Some(collection))
        }
    };

    let leaf_models: Vec<LogisticModel> = tree
        .leaves
        .iter()
        .map(|leaf| cache.get_or_train(&leaf.sensors, classifier_basis, cfg.l2, prep))
        .collect::<Result<_>>()?;

    let rows = lp_rows(prep.x_train.nrows(), cfg.lp_max_examples, cfg.seed);
    let x_lp = select_matrix_rows(&prep.x_train, &rows);
    let y_lp: Vec<usize> = rows.iter().map(|&i| prep.y_train[i]).collect();

    let savings_matrix = savings(&leaf_models, &tree, &x_lp, &y_lp, &prep.sensors, alpha)?;
    let weights = build_weights(&tree, &savings_matrix);
    let (decisions, lp_report) = train_decisions(
        &tree,
        &savings_matrix,
        &weights,
        &x_lp,
        &prep.sensors,
        cfg.decision_basis()?,
        cfg.w_max,
        cfg.lp_max_iters,
    )?;

    let system = DecisionSystem {
        sensors: prep.sensors.clone(),
        scaler: prep.scaler.clone(),
        tree,
        leaf_models,
        decisions,
        alpha,
        label_names: prep.dataset.label_names.clone(),
    };
    Ok((
        system,
        TrainArtifacts {
            collection,
            lp_report,
            lp_rows: rows,
        },
    ))
}

/// Copy of the given rows of a matrix, in order.
pub fn select_matrix_rows(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), x.ncols()));
    for (r, &i) in rows.iter().enumerate() {
        out.row_mut(r).assign(&x.row(i));
    }
    out
}

/// Log-spaced grid from lo to hi inclusive.
pub fn log_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && steps >= 1) {
        return Err(Error::Config(format!(
            "alpha grid needs 0 < lo <= hi and steps >= 1, got {lo}:{hi}:{steps}"
        )));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let ratio = (hi / lo).powf(1.0 / (steps - 1) as f64);
    Ok((0..steps).map(|t| lo * ratio.powi(t as i32)).collect())
}

/// One sweep row that failed to train, with the reason.
#[derive(Debug, Clone)]
pub struct SweepFailure {
    pub alpha: f64,
    pub reason: String,
}

/// Result of an alpha sweep evaluated on the test split.
pub struct SweepOutcome {
    pub curve: BudgetCurve,
    pub failures: Vec<SweepFailure>,
    /// System trained at the smallest successful alpha; the myopic
    /// baseline runs against this tree.
    pub reference: Option<(f64, DecisionSystem)>,
}

/// Retrains and evaluates per alpha. With `search_per_alpha` the greedy
/// subset search reruns for every grid point; otherwise subsets are
/// searched once at the median alpha of the grid (fixed trees skip the
/// search entirely). Failures are recorded and the sweep continues.
pub fn sweep_alpha(
    prep: &PreparedData,
    cfg: &RunConfig,
    grid: &[f64],
    fixed_tree: Option<&TreeSpec>,
    search_per_alpha: bool,
) -> Result<SweepOutcome> {
    if grid.is_empty() || grid.iter().any(|&a| a <= 0.0) {
        return Err(Error::Config("alpha grid must be nonempty and positive".into()));
    }
    let mut sorted_grid = grid.to_vec();
    sorted_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut cache = ModelCache::default();
    let shared_subsets: Option<Vec<BTreeSet<usize>>> =
        if fixed_tree.is_none() && !search_per_alpha {
            let median = sorted_grid[sorted_grid.len() / 2];
            let collection = search_subsets(prep, cfg, median)?;
            if collection.subsets.len() < 2 {
                return Err(Error::DegenerateCollection {
                    distinct: collection.subsets.len(),
                });
            }
            for model in &collection.oracle_models {
                cache.insert(model, cfg.l2);
            }
            Some(collection.subsets)
        } else {
            None
        };

    let mut curve = BudgetCurve::default();
    let mut failures = Vec::new();
    let mut reference: Option<(f64, DecisionSystem)> = None;
    for &alpha in &sorted_grid {
        let result = train_system(
            prep,
            cfg,
            alpha,
            fixed_tree,
            shared_subsets.as_deref(),
            &mut cache,
        );
        match result {
            Ok((system, _)) => {
                let record = system.evaluate_std(&prep.x_test, &prep.y_test)?;
                curve.push(alpha, &record);
                if reference.is_none() {
                    reference = Some((alpha, system));
                }
            }
            Err(e) => failures.push(SweepFailure {
                alpha,
                reason: e.to_string(),
            }),
        }
    }
    curve.sort_by_cost();
    Ok(SweepOutcome {
        curve,
        failures,
        reference,
    })
}

/// Traces the myopic baseline curve over the tau grid on the given
/// (standardized) evaluation split.
pub fn myopic_curve(
    system: &DecisionSystem,
    prep: &PreparedData,
    l2: f64,
    taus: &[f64],
    x_eval_std: &Array2<f64>,
    y_eval: &[usize],
) -> Result<BudgetCurve> {
    let node_models = train_myopic_models(
        system,
        &prep.x_train,
        &prep.y_train,
        prep.dataset.n_classes(),
        l2,
    )?;
    let mut curve = BudgetCurve::default();
    for &tau in taus {
        let record: EvalRecord = myopic_eval(system, &node_models, tau, x_eval_std, y_eval)?;
        curve.push(tau, &record);
    }
    curve.sort_by_cost();
    Ok(curve)
}

/// Parses "lo:hi:steps" into a log-spaced alpha grid.
pub fn parse_alpha_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "alpha grid must be lo:hi:steps, got {text:?}"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid lower bound {:?}", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid upper bound {:?}", parts[1])))?;
    let steps: usize = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid step count {:?}", parts[2])))?;
    log_grid(lo, hi, steps)
}

/// Parses "lo:hi:step" into a linear tau grid, endpoints included.
pub fn parse_tau_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "tau grid must be lo:hi:step, got {text:?}"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Config(format!("bad tau lower bound {:?}", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("bad tau upper bound {:?}", parts[1])))?;
    let step: f64 = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("bad tau step {:?}", parts[2])))?;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || hi < lo || step <= 0.0 {
        return Err(Error::Config(format!("bad tau grid {text:?}")));
    }
    let mut taus = Vec::new();
    let mut t = lo;
    while t <= hi + 1e-12 {
        taus.push(t.min(1.0));
        t += step;
    }
    Ok(taus)
}
