mod common;

use budget_tree::data::make_split;
use budget_tree::lp::assemble_lp;
use budget_tree::pipeline::{prepare_with, select_matrix_rows, ModelCache, RunConfig};
use budget_tree::risk::{build_weights, savings};
use budget_tree::simplex::solve_lp;
use budget_tree::tree::TreeStructure;
use common::*;

#[test]
fn debug_cascade_lp() {
    let (dataset, sensors) = planted_cascade(500, 2025);
    let split = make_split(dataset.n_examples(), (0.7, 0.15, 0.15), 5).unwrap();
    let prep = prepare_with(dataset, sensors, split).unwrap();
    let cfg = RunConfig {
        basis_degree: 1,
        g_degree: 2,
        lp_max_examples: Some(220),
        ..RunConfig::default()
    };
    let spec = cascade_spec();
    let tree = TreeStructure::from_spec(&spec, 2).unwrap();
    let mut cache = ModelCache::default();
    let leaf_models: Vec<_> = tree
        .leaves
        .iter()
        .map(|leaf| {
            cache
                .get_or_train(&leaf.sensors, cfg.classifier_basis().unwrap(), cfg.l2, &prep)
                .unwrap()
        })
        .collect();
    let rows: Vec<usize> = (0..220).collect();
    let x_lp = select_matrix_rows(&prep.x_train, &rows);
    let y_lp: Vec<usize> = rows.iter().map(|&i| prep.y_train[i]).collect();
    let s = savings(&leaf_models, &tree, &x_lp, &y_lp, &prep.sensors, 0.03).unwrap();
    
    let w = build_weights(&tree, &s);
    let with_bias = budget_tree::data::BasisConfig {
        include_bias: true,
        ..cfg.decision_basis().unwrap()
    };
    let node_bases: Vec<_> = tree
        .nodes
        .iter()
        .map(|node| {
            let cols = prep.sensors.columns_of(&node.acquired);
            budget_tree::data::expand_basis_matrix(
                &budget_tree::data::restrict_columns(&x_lp, &cols),
                &with_bias,
            )
        })
        .collect();
    
    let (lp, _) = assemble_lp(&tree, &w, &node_bases, cfg.w_max).unwrap();
    println!("lp: {} vars {} rows", lp.n_vars(), lp.n_rows());
    let sol = solve_lp(&lp, 100_000).unwrap();
    println!(
        "status {:?}, obj {}, iters {}, viol {}",
        sol.status, sol.objective, sol.iterations, sol.max_violation
    );
}

#[test]
fn debug_train_system_path() {
    for (seed, alpha) in [(2025u64, 0.03), (2025, 0.12), (4049, 0.05)] {
        let (dataset, sensors) = planted_cascade(500, seed);
        let split = make_split(dataset.n_examples(), (0.7, 0.15, 0.15), 5).unwrap();
        let prep = prepare_with(dataset, sensors, split).unwrap();
        let cfg = RunConfig {
            basis_degree: 1,
            g_degree: 2,
            lp_max_examples: Some(220),
            ..RunConfig::default()
        };
        let spec = cascade_spec();
        let mut cache = ModelCache::default();
        match budget_tree::pipeline::train_system(&prep, &cfg, alpha, Some(&spec), None, &mut cache) {
            Ok((_, artifacts)) => println!(
                "seed {seed} alpha {alpha}: OK obj {} iters {} identity {:.2e}",
                artifacts.lp_report.lp_objective,
                artifacts.lp_report.iterations,
                artifacts.lp_report.identity_gap
            ),
            Err(e) => println!("seed {seed} alpha {alpha}: ERR {e}"),
        }
    }
}

#[test]
fn debug_criterion5_routing() {
    let (dataset, sensors) = planted_cascade(800, 2025);
    let split = make_split(dataset.n_examples(), (0.7, 0.15, 0.15), 11).unwrap();
    let prep = prepare_with(dataset, sensors, split).unwrap();
    let cfg = RunConfig {
        basis_degree: 1,
        g_degree: 2,
        lp_max_examples: Some(300),
        ..RunConfig::default()
    };
    let spec = cascade_spec();
    let mut cache = ModelCache::default();
    let (system, artifacts) =
        budget_tree::pipeline::train_system(&prep, &cfg, 0.02, Some(&spec), None, &mut cache)
            .unwrap();
    // Cheap-leaf classifier behavior on train split.
    let cheap = &system.leaf_models[0];
    println!("cheap model weights: {:?}", cheap.weights);
    println!("leaf0 sensors {:?} leaf1 {:?}", system.tree.leaves[0].sensors, system.tree.leaves[1].sensors);
    // savings summary on the LP rows
    let rows = &artifacts.lp_rows;
    let x_lp = select_matrix_rows(&prep.x_train, rows);
    let y_lp: Vec<usize> = rows.iter().map(|&i| prep.y_train[i]).collect();
    let s = savings(&system.leaf_models, &system.tree, &x_lp, &y_lp, &prep.sensors, 0.02).unwrap();
    let mut hard_count = 0;
    let mut hard_cheap_wrong = 0;
    let mut easy_cheap_wrong = 0;
    for (r, &i) in rows.iter().enumerate() {
        let raw_x0 = prep.scaler.invert(&x_lp).row(r)[0];
        let hard = raw_x0 > 2.0;
        let pi_cheap = s.pi[[r, 0]];
        let wrong = pi_cheap < 1.0 - 1e-9 + 0.02 * 4.0 - 1.0; // pi = 1{right} + 0.08
        let _ = wrong;
        let right = pi_cheap > 1.0;
        if hard {
            hard_count += 1;
            if !right {
                hard_cheap_wrong += 1;
            }
        } else if !right {
            easy_cheap_wrong += 1;
        }
        let _ = i;
    }
    println!("lp rows: {} hard ({} wrong at cheap), easy wrong {}", hard_count, hard_cheap_wrong, easy_cheap_wrong);
    // g over raw x0 values
    for raw in [-1.5, 0.0, 1.5, 2.0, 2.5] {
        let std = (raw - system.scaler.mean[0]) / system.scaler.std[0];
        let g = system.decisions.eval(0, &[std]).unwrap();
        println!("g(x0={raw}) = {g:.4}");
    }
    println!("lp objective {} identity {:.2e}", artifacts.lp_report.lp_objective, artifacts.lp_report.identity_gap);
}

#[test]
fn debug_crafted_routing_value() {
    let (dataset, sensors) = planted_cascade(800, 2025);
    let split = make_split(dataset.n_examples(), (0.7, 0.15, 0.15), 11).unwrap();
    let prep = prepare_with(dataset, sensors, split).unwrap();
    let tree = TreeStructure::from_spec(&cascade_spec(), 2).unwrap();
    let cfg = RunConfig { basis_degree: 1, g_degree: 2, lp_max_examples: Some(300), ..RunConfig::default() };
    let mut cache = ModelCache::default();
    let leaf_models: Vec<_> = tree.leaves.iter().map(|leaf| {
        cache.get_or_train(&leaf.sensors, cfg.classifier_basis().unwrap(), cfg.l2, &prep).unwrap()
    }).collect();
    let rows: Vec<usize> = (0..300).collect();
    let x_lp = select_matrix_rows(&prep.x_train, &rows);
    let y_lp: Vec<usize> = rows.iter().map(|&i| prep.y_train[i]).collect();
    let alpha = 0.02;
    let s = savings(&leaf_models, &tree, &x_lp, &y_lp, &prep.sensors, alpha).unwrap();
    let w = build_weights(&tree, &s);
    // z values per row (x0_std squared)
    let zs: Vec<f64> = x_lp.rows().into_iter().map(|r| r[0] * r[0]).collect();
    let z_hard = zs.iter().cloned().fold(f64::INFINITY, f64::min);
    let z_easy_mean = zs.iter().filter(|&&z| z > 0.5).sum::<f64>() / zs.iter().filter(|&&z| z > 0.5).count() as f64;
    println!("z_hard {z_hard:.5} z_easy_mean {z_easy_mean:.4}");
    for (ghard, geasy) in [(0.852f64, -0.0385f64), (1.0, -0.04), (0.5, -0.02), (0.852, -0.1)] {
        let a = (geasy - ghard) / (z_easy_mean - z_hard);
        let b = ghard - a * z_hard;
        let total: f64 = (0..300).map(|i| {
            let g = a * zs[i] + b;
            budget_tree::risk::surrogate_risk(&tree, &s, &w, &[g], i)
        }).sum();
        let constant: f64 = (0..300).map(|i| s.r_max - s.total(i)).sum();
        println!("crafted g_hard={ghard} g_easy={geasy}: surrogate total {:.4} (lp-equivalent {:.4})", total, total - constant);
    }
}

#[test]
fn debug_group_surrogates() {
    let (dataset, sensors) = planted_cascade(800, 2025);
    let split = make_split(dataset.n_examples(), (0.7, 0.15, 0.15), 11).unwrap();
    let prep = prepare_with(dataset, sensors, split).unwrap();
    let tree = TreeStructure::from_spec(&cascade_spec(), 2).unwrap();
    let cfg = RunConfig { basis_degree: 1, g_degree: 2, lp_max_examples: Some(300), ..RunConfig::default() };
    let mut cache = ModelCache::default();
    let leaf_models: Vec<_> = tree.leaves.iter().map(|leaf| {
        cache.get_or_train(&leaf.sensors, cfg.classifier_basis().unwrap(), cfg.l2, &prep).unwrap()
    }).collect();
    let rows: Vec<usize> = (0..300).collect();
    let x_lp = select_matrix_rows(&prep.x_train, &rows);
    let y_lp: Vec<usize> = rows.iter().map(|&i| prep.y_train[i]).collect();
    let alpha = 0.02;
    let s = savings(&leaf_models, &tree, &x_lp, &y_lp, &prep.sensors, alpha).unwrap();
    let w = build_weights(&tree, &s);
    let zs: Vec<f64> = x_lp.rows().into_iter().map(|r| r[0] * r[0]).collect();
    let z_hard = zs.iter().cloned().fold(f64::INFINITY, f64::min);
    let is_hard: Vec<bool> = zs.iter().map(|&z| z < 0.5).collect();
    let n_hard = is_hard.iter().filter(|&&h| h).count();
    let wrong_hard = (0..300).filter(|&i| is_hard[i] && s.pi[[i, 0]] < 0.5).count();
    println!("hards {n_hard}, wrong-at-cheap {wrong_hard}, pi examples: hard ({}, {}), easy ({}, {})",
        s.pi[[(0..300).position(|i| is_hard[i]).unwrap(), 0]],
        s.pi[[(0..300).position(|i| is_hard[i]).unwrap(), 1]],
        s.pi[[(0..300).position(|i| !is_hard[i]).unwrap(), 0]],
        s.pi[[(0..300).position(|i| !is_hard[i]).unwrap(), 1]]);
    let z_easy_mean = 1.2476;
    for (ghard, geasy) in [(-0.0385f64, -0.0385f64), (0.852, -0.0385)] {
        let a = (geasy - ghard) / (z_easy_mean - z_hard);
        let b = ghard - a * z_hard;
        let mut hard_sum = 0.0;
        let mut easy_sum = 0.0;
        for i in 0..300 {
            let g = a * zs[i] + b;
            let const_i = s.r_max - s.total(i);
            let v = budget_tree::risk::surrogate_risk(&tree, &s, &w, &[g], i) - const_i;
            if is_hard[i] { hard_sum += v; } else { easy_sum += v; }
        }
        println!("g=({ghard},{geasy}): hard_sum {hard_sum:.3} easy_sum {easy_sum:.3} total {:.3}", hard_sum + easy_sum);
    }
}

#[test]
fn debug_seed4_greedy() {
    use budget_tree::data::{restrict_columns, BasisConfig};
    use budget_tree::logistic::train_logistic;
    use budget_tree::subsets::{collection_loss, greedy_select, SearchConfig};
    use std::collections::BTreeSet;
    for seed in [7u64, 2, 8, 13, 19] {
        let l = 3 + (seed as usize) % 4;
        let (x, y, sensors) = planted_multi(l, 300, 1000 + seed);
        let x_train = select_matrix_rows(&x, &(0..200).collect::<Vec<_>>());
        let y_train = y[..200].to_vec();
        let x_val = select_matrix_rows(&x, &(200..300).collect::<Vec<_>>());
        let y_val = y[200..].to_vec();
        let alpha = [0.03, 0.05, 0.07][(seed as usize) % 3];
        let cfg = SearchConfig {
            k: 2, alpha, candidate_budget: l, l2: 1e-4,
            search_basis: BasisConfig::linear(), final_basis: BasisConfig::linear(),
        };
        let greedy = greedy_select(&x_train, &y_train, &x_val, &y_val, 2, &sensors, &cfg).unwrap();
        let all: Vec<BTreeSet<usize>> = (1u32..(1 << l)).map(|b| (0..l).filter(|m| b >> m & 1 == 1).collect()).collect();
        let models: Vec<_> = all.iter().map(|s| {
            let cols = sensors.columns_of(s);
            train_logistic(&restrict_columns(&x_train, &cols), &y_train, 2, s.clone(), BasisConfig::linear(), 1e-4).unwrap().0
        }).collect();
        let mut best = f64::INFINITY;
        let mut best_pair = (0, 0);
        for i in 0..all.len() {
            for j in i..all.len() {
                let loss = collection_loss(&[all[i].clone(), all[j].clone()], &[Some(&models[i]), Some(&models[j])], &sensors, &x_val, &y_val, alpha).unwrap();
                if loss < best { best = loss; best_pair = (i, j); }
            }
        }
        println!("seed {seed} alpha {alpha}: greedy {:?} loss {:.4} | exhaustive {:?},{:?} loss {:.4} ratio {:.3}",
            greedy.subsets, greedy.final_loss, all[best_pair.0], all[best_pair.1], best, greedy.final_loss / best);
    }
}
