//! Command-line surface for the budgeted-classification pipeline.
//!
//! Exit codes: 0 success, 2 configuration problem, 3 degenerate subset
//! search, 4 model format mismatch, 5 solver failure, 1 anything else.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use budget_tree::data::{load_dataset, restrict_columns};
use budget_tree::error::Error;
use budget_tree::eval::BudgetCurve;
use budget_tree::lp::assemble_lp;
use budget_tree::model::{write_atomic, ModelFile};
use budget_tree::pipeline::{
    myopic_curve, parse_alpha_grid, parse_tau_grid, prepare, search_subsets, select_matrix_rows,
    sweep_alpha, train_system, ModelCache, RunConfig,
};
use budget_tree::risk::{build_weights, equivalence_suite, savings};
use budget_tree::tree::TreeSpec;

#[derive(Parser)]
#[command(
    name = "budget-tree",
    about = "Budgeted classification with learned sensor-acquisition trees",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// CSV dataset with a header row; all non-label columns numeric.
    #[arg(long)]
    data: PathBuf,
    /// Sensor config JSON: {"sensors":[{"name","cost","columns"},...]}.
    #[arg(long)]
    sensors: PathBuf,
    /// Name of the label column.
    #[arg(long)]
    label: String,
    /// Train,val,test fractions.
    #[arg(long, default_value = "0.7,0.15,0.15")]
    split: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Clone)]
struct TrainArgs {
    /// Number of subset slots K for the greedy search.
    #[arg(long, default_value_t = 4)]
    leaves: usize,
    /// Leaf-classifier basis degree (1 linear, 2 homogeneous quadratic).
    #[arg(long, default_value_t = 2)]
    basis_degree: u8,
    /// Decision-function basis degree.
    #[arg(long, default_value_t = 2)]
    g_degree: u8,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    /// Box bound on decision weights and biases.
    #[arg(long, default_value_t = 1e3)]
    wmax: f64,
    /// Cap on candidate sensors per greedy step (default: all).
    #[arg(long)]
    candidate_budget: Option<usize>,
    /// Cap on training examples fed to the LP (default: all).
    #[arg(long)]
    lp_max_examples: Option<usize>,
    #[arg(long, default_value_t = 400_000)]
    lp_max_iters: usize,
    /// Tree spec JSON to use instead of searching and clustering.
    #[arg(long)]
    fixed_tree: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the greedy sensor-subset search and write the subsets as JSON.
    Subsets {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Error-vs-cost trade-off parameter.
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a full decision system and write the model JSON.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        alpha: f64,
        /// Also write the assembled linear program in plain text.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a stored model on one split of its dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Dataset path; defaults to the one recorded in the model.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Split to evaluate: train, val, or test.
        #[arg(long, default_value = "test")]
        on: String,
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON-lines dump of per-example outcomes.
        #[arg(long)]
        per_example: Option<PathBuf>,
    },
    /// Sweep alpha, evaluating each trained system on the test split.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// lo:hi:steps, log-spaced.
        #[arg(long)]
        alpha_grid: String,
        /// "myopic" appends the baseline curve to the CSV.
        #[arg(long)]
        baseline: Option<String>,
        /// lo:hi:step for the myopic confidence threshold.
        #[arg(long, default_value = "0:1:0.1")]
        tau_grid: String,
        /// Rerun the subset search at every grid point instead of once at
        /// the median alpha.
        #[arg(long)]
        search_per_alpha: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the product-form vs max-form risk equivalence on random trees.
    RiskCheck {
        #[arg(long, default_value_t = 200)]
        trees: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_)
        | Error::Csv(_)
        | Error::EmptyFile
        | Error::MissingLabelColumn(_)
        | Error::NonNumericCell { .. }
        | Error::NonFiniteValue { .. }
        | Error::SensorConfig(_)
        | Error::BadSplitFractions(_)
        | Error::TooFewExamples(_)
        | Error::TreeSpec(_)
        | Error::DuplicateSubsets
        | Error::Config(_) => 2,
        Error::AllSubsetsEmpty | Error::DegenerateCollection { .. } => 3,
        Error::ModelFormat { .. } => 4,
        Error::Solver(_) | Error::BadProgram(_) => 5,
        _ => 1,
    }
}

fn parse_split(text: &str) -> Result<(f64, f64, f64), Error> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "--split needs three comma-separated fractions, got {text:?}"
        )));
    }
    let mut vals = [0.0f64; 3];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad split fraction {p:?}")))?;
    }
    Ok((vals[0], vals[1], vals[2]))
}

fn require_file(path: &PathBuf, what: &str) -> Result<(), Error> {
    if !path.is_file() {
        return Err(Error::Config(format!(
            "{what} file not found: {}",
            path.display()
        )));
    }
    Ok(())
}

fn build_config(data: &DataArgs, train: &TrainArgs) -> Result<RunConfig, Error> {
    require_file(&data.data, "data")?;
    require_file(&data.sensors, "sensor config")?;
    if let Some(t) = &train.fixed_tree {
        require_file(t, "fixed tree")?;
    }
    Ok(RunConfig {
        data: data.data.clone(),
        sensors: data.sensors.clone(),
        label: data.label.clone(),
        split: parse_split(&data.split)?,
        seed: data.seed,
        leaves: train.leaves,
        basis_degree: train.basis_degree,
        g_degree: train.g_degree,
        l2: train.l2,
        w_max: train.wmax,
        candidate_budget: train.candidate_budget,
        lp_max_examples: train.lp_max_examples,
        lp_max_iters: train.lp_max_iters,
        fixed_tree: train.fixed_tree.clone(),
    })
}

fn load_fixed_tree(cfg: &RunConfig) -> Result<Option<TreeSpec>, Error> {
    match &cfg.fixed_tree {
        None => Ok(None),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let spec: TreeSpec = serde_json::from_str(&text)
                .map_err(|e| Error::TreeSpec(format!("bad tree file {}: {e}", path.display())))?;
            Ok(Some(spec))
        }
    }
}

fn cmd_subsets(data: DataArgs, train: TrainArgs, alpha: f64, out: PathBuf) -> Result<(), Error> {
    let cfg = build_config(&data, &train)?;
    let prep = prepare(&cfg)?;
    let collection = search_subsets(&prep, &cfg, alpha)?;
    let names: Vec<Vec<String>> = collection
        .subsets
        .iter()
        .map(|s| {
            s.iter()
                .map(|&m| prep.sensors.sensors[m].name.clone())
                .collect()
        })
        .collect();
    let doc = serde_json::json!({
        "alpha": alpha,
        "subsets": names,
        "search_loss": collection.search_loss,
        "final_loss": collection.final_loss,
        "loss_trace": collection.loss_trace,
    });
    write_atomic(&out, serde_json::to_string_pretty(&doc).unwrap().as_bytes())?;
    println!(
        "wrote {} subsets to {} (validation loss {:.6})",
        names.len(),
        out.display(),
        collection.final_loss
    );
    Ok(())
}

fn cmd_train(
    data: DataArgs,
    train: TrainArgs,
    alpha: f64,
    dump_lp: Option<PathBuf>,
    out: PathBuf,
) -> Result<(), Error> {
    let cfg = build_config(&data, &train)?;
    let prep = prepare(&cfg)?;
    let fixed = load_fixed_tree(&cfg)?;
    let mut cache = ModelCache::default();
    let (system, artifacts) = train_system(&prep, &cfg, alpha, fixed.as_ref(), None, &mut cache)?;

    if let Some(dump_path) = dump_lp {
        dump_assembled_lp(&system, &prep, &cfg, &artifacts.lp_rows, &dump_path)?;
    }

    let report = &artifacts.lp_report;
    eprintln!(
        "lp: {} vars, {} rows, {} pivots; objective {:.6}; surrogate identity gap {:.2e}; hinge gap {:.2e}",
        report.n_vars,
        report.n_rows,
        report.iterations,
        report.lp_objective,
        report.identity_gap,
        report.hinge_gap
    );

    let file = ModelFile::from_system(&system, &cfg, &prep.split);
    file.save(&out)?;
    let record = system.evaluate_std(&prep.x_test, &prep.y_test)?;
    println!(
        "model written to {}; test error {:.4}, mean cost {:.4} ({:.1}% of budget)",
        out.display(),
        record.error,
        record.mean_cost,
        100.0 * record.cost_fraction
    );
    Ok(())
}

// Rebuilds the LP the training stage solved (same rows, same weights) and
// writes the plain-text form.
fn dump_assembled_lp(
    system: &budget_tree::eval::DecisionSystem,
    prep: &budget_tree::pipeline::PreparedData,
    cfg: &RunConfig,
    lp_rows: &[usize],
    path: &PathBuf,
) -> Result<(), Error> {
    use budget_tree::data::expand_basis_matrix;
    use budget_tree::data::BasisConfig;
    let x = select_matrix_rows(&prep.x_train, lp_rows);
    let y: Vec<usize> = lp_rows.iter().map(|&i| prep.y_train[i]).collect();
    let savings_matrix = savings(
        &system.leaf_models,
        &system.tree,
        &x,
        &y,
        &prep.sensors,
        system.alpha,
    )?;
    let weights = build_weights(&system.tree, &savings_matrix);
    let with_bias = BasisConfig {
        include_bias: true,
        ..cfg.decision_basis()?
    };
    let node_bases: Vec<_> = system
        .tree
        .nodes
        .iter()
        .map(|node| {
            let cols = prep.sensors.columns_of(&node.acquired);
            expand_basis_matrix(&restrict_columns(&x, &cols), &with_bias)
        })
        .collect();
    let (lp, _) = assemble_lp(&system.tree, &weights, &node_bases, cfg.w_max)?;
    write_atomic(path, lp.dump().as_bytes())?;
    Ok(())
}

fn cmd_eval(
    model_path: PathBuf,
    data: Option<PathBuf>,
    on: String,
    out: PathBuf,
    per_example: Option<PathBuf>,
) -> Result<(), Error> {
    require_file(&model_path, "model")?;
    let file = ModelFile::load(&model_path)?;
    let (system, cfg, split) = file.into_system()?;
    let data_path = data.unwrap_or_else(|| cfg.data.clone());
    require_file(&data_path, "data")?;
    let dataset = load_dataset(&data_path, &cfg.label)?;
    if dataset.n_features() != system.scaler.mean.len() {
        return Err(Error::Config(format!(
            "dataset has {} feature columns, model expects {}",
            dataset.n_features(),
            system.scaler.mean.len()
        )));
    }
    let idx = match on.as_str() {
        "train" => &split.train_idx,
        "val" => &split.val_idx,
        "test" => &split.test_idx,
        other => {
            return Err(Error::Config(format!(
                "--on must be train, val, or test, got {other:?}"
            )))
        }
    };
    if idx.iter().any(|&i| i >= dataset.n_examples()) {
        return Err(Error::Config(
            "model split indexes rows beyond this dataset".into(),
        ));
    }
    let (x_raw, y) = dataset.select_rows(idx);
    let record = system.evaluate(&x_raw, &y)?;

    let mut curve = BudgetCurve::default();
    curve.push(system.alpha, &record);
    write_atomic(&out, curve.to_csv("alpha").as_bytes())?;
    if let Some(pe) = per_example {
        let mut lines = String::new();
        for o in &record.outcomes {
            lines.push_str(&serde_json::to_string(o).unwrap());
            lines.push('\n');
        }
        write_atomic(&pe, lines.as_bytes())?;
    }
    println!(
        "{} split: error {:.4}, mean cost {:.4} ({:.1}% of budget)",
        on,
        record.error,
        record.mean_cost,
        100.0 * record.cost_fraction
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    data: DataArgs,
    train: TrainArgs,
    alpha_grid: String,
    baseline: Option<String>,
    tau_grid: String,
    search_per_alpha: bool,
    out: PathBuf,
) -> Result<(), Error> {
    let cfg = build_config(&data, &train)?;
    if let Some(b) = &baseline {
        if b != "myopic" {
            return Err(Error::Config(format!(
                "--baseline supports only \"myopic\", got {b:?}"
            )));
        }
    }
    let grid = parse_alpha_grid(&alpha_grid)?;
    let taus = parse_tau_grid(&tau_grid)?;
    let prep = prepare(&cfg)?;
    let fixed = load_fixed_tree(&cfg)?;
    let outcome = sweep_alpha(&prep, &cfg, &grid, fixed.as_ref(), search_per_alpha)?;
    for failure in &outcome.failures {
        eprintln!("alpha {}: {}", failure.alpha, failure.reason);
    }
    let mut csv = outcome.curve.to_csv("alpha");
    if baseline.is_some() {
        match &outcome.reference {
            Some((ref_alpha, system)) => {
                let curve = myopic_curve(system, &prep, cfg.l2, &taus, &prep.x_test, &prep.y_test)?;
                eprintln!("myopic baseline uses the tree trained at alpha {ref_alpha}");
                csv.push_str(&curve.to_csv("tau"));
            }
            None => eprintln!("no successful alpha; skipping myopic baseline"),
        }
    }
    write_atomic(&out, csv.as_bytes())?;
    println!(
        "wrote {} curve points ({} failures) to {}",
        outcome.curve.points.len(),
        outcome.failures.len(),
        out.display()
    );
    Ok(())
}

fn cmd_risk_check(trees: usize, seed: u64) -> Result<(), Error> {
    let report = equivalence_suite(trees, seed);
    println!(
        "risk equivalence: {} cases, {} failures, max |diff| {:.3e}",
        report.cases, report.failures, report.max_abs_diff
    );
    if report.failures > 0 {
        return Err(Error::Config(format!(
            "{} equivalence failures",
            report.failures
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Subsets {
            data,
            train,
            alpha,
            out,
        } => cmd_subsets(data, train, alpha, out),
        Command::Train {
            data,
            train,
            alpha,
            dump_lp,
            out,
        } => cmd_train(data, train, alpha, dump_lp, out),
        Command::Eval {
            model,
            data,
            on,
            out,
            per_example,
        } => cmd_eval(model, data, on, out, per_example),
        Command::Sweep {
            data,
            train,
            alpha_grid,
            baseline,
            tau_grid,
            search_per_alpha,
            out,
        } => cmd_sweep(data, train, alpha_grid, baseline, tau_grid, search_per_alpha, out),
        Command::RiskCheck { trees, seed } => cmd_risk_check(trees, seed),
    }
}

fn main() {
    if let Ok(threads) = std::env::var("BUDGET_TREE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
