//! Greedy sensor-subset selection.
//!
//! Grows K subsets one sensor at a time, keeping a step only when the
//! collection loss strictly decreases. The loss of a collection on an
//! evaluation split is the mean over examples of the best leaf term:
//! classification error of that subset's oracle classifier plus the
//! alpha-scaled acquisition cost. Oracle classifiers are retrained per
//! candidate subset, so the loss is scored on the validation split to
//! keep the greed from chasing training noise.

use std::collections::{BTreeSet, HashMap};

use ndarray::Array2;
use rayon::prelude::*;

use crate::data::{restrict_columns, BasisConfig, SensorSpec};
use crate::logistic::{train_logistic, LogisticModel};
use crate::{Error, Result};

/// Tolerance below which a loss decrease does not count as progress.
pub const IMPROVEMENT_TOL: f64 = 1e-9;

/// The outcome of a greedy search: deduplicated nonempty subsets with
/// their final-basis oracle classifiers.
#[derive(Debug, Clone)]
pub struct SubsetCollection {
    pub subsets: Vec<BTreeSet<usize>>,
    /// One classifier per subset, retrained with the configured basis.
    pub oracle_models: Vec<LogisticModel>,
    pub alpha: f64,
    /// Validation loss of the working collection after each accepted step.
    pub loss_trace: Vec<f64>,
    /// Loss reached by the search itself (search-time basis).
    pub search_loss: f64,
    /// Validation loss of the finalized collection with the final models.
    pub final_loss: f64,
}

/// Knobs of the greedy loop.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Number of subset slots K.
    pub k: usize,
    pub alpha: f64,
    /// Cap on candidate sensors evaluated per step (smallest ids first).
    pub candidate_budget: usize,
    pub l2: f64,
    /// Basis for the throwaway oracle classifiers trained inside the loop.
    pub search_basis: BasisConfig,
    /// Basis for the classifiers returned with the collection.
    pub final_basis: BasisConfig,
}

/// Collection loss on an evaluation set: mean over examples of
/// min over subsets of (error indicator + alpha * subset cost).
/// Empty subsets contribute a constant term of 1 (always wrong, free).
pub fn collection_loss(
    subsets: &[BTreeSet<usize>],
    models: &[Option<&LogisticModel>],
    sensors: &SensorSpec,
    x_eval: &Array2<f64>,
    y_eval: &[usize],
    alpha: f64,
) -> Result<f64> {
    if subsets.len() != models.len() {
        return Err(Error::DimensionMismatch {
            expected: subsets.len(),
            got: models.len(),
        });
    }
    let n = x_eval.nrows();
    let mut terms: Vec<Vec<f64>> = Vec::with_capacity(subsets.len());
    for (subset, model) in subsets.iter().zip(models) {
        if subset.is_empty() {
            terms.push(vec![1.0; n]);
            continue;
        }
        let model = model.ok_or_else(|| {
            Error::Config("nonempty subset without an oracle model".into())
        })?;
        let cost = alpha * sensors.subset_cost(subset);
        let restricted = restrict_columns(x_eval, &sensors.columns_of(subset));
        let predictions = model.predict_batch(&restricted)?;
        terms.push(
            predictions
                .iter()
                .zip(y_eval)
                .map(|(&p, &y)| f64::from(p != y) + cost)
                .collect(),
        );
    }
    let mut total = 0.0;
    for i in 0..n {
        total += terms
            .iter()
            .map(|t| t[i])
            .fold(f64::INFINITY, f64::min);
    }
    Ok(total / n as f64)
}

// Validation error vector and cost for one trained subset; enough to
// score any collection containing it.
struct CachedSubset {
    errors: Vec<u8>,
    cost: f64,
}

struct SearchState<'a> {
    x_train: &'a Array2<f64>,
    y_train: &'a [usize],
    x_val: &'a Array2<f64>,
    y_val: &'a [usize],
    n_classes: usize,
    sensors: &'a SensorSpec,
    cfg: &'a SearchConfig,
    cache: HashMap<Vec<usize>, CachedSubset>,
}

impl<'a> SearchState<'a> {
    fn train_cached(&self, subset: &BTreeSet<usize>) -> Result<CachedSubset> {
        let cols = self.sensors.columns_of(subset);
        let (model, _) = train_logistic(
            &restrict_columns(self.x_train, &cols),
            self.y_train,
            self.n_classes,
            subset.clone(),
            self.cfg.search_basis,
            self.cfg.l2,
        )?;
        let restricted = restrict_columns(self.x_val, &cols);
        let predictions = model.predict_batch(&restricted)?;
        Ok(CachedSubset {
            errors: predictions
                .iter()
                .zip(self.y_val)
                .map(|(&p, &y)| u8::from(p != y))
                .collect(),
            cost: self.sensors.subset_cost(subset),
        })
    }

    fn ensure_cached(&mut self, candidates: &[BTreeSet<usize>]) -> Result<()> {
        let missing: Vec<BTreeSet<usize>> = candidates
            .iter()
            .filter(|s| !self.cache.contains_key(&key_of(s)))
            .cloned()
            .collect();
        let trained: Vec<(Vec<usize>, Result<CachedSubset>)> = missing
            .par_iter()
            .map(|s| (key_of(s), self.train_cached(s)))
            .collect();
        for (key, cached) in trained {
            self.cache.insert(key, cached?);
        }
        Ok(())
    }

    /// Loss of a working collection, empty slots counting as error-1 leaves.
    fn loss(&self, collection: &[BTreeSet<usize>]) -> f64 {
        let n = self.y_val.len();
        let entries: Vec<Option<&CachedSubset>> = collection
            .iter()
            .map(|s| {
                if s.is_empty() {
                    None
                } else {
                    Some(&self.cache[&key_of(s)])
                }
            })
            .collect();
        let mut total = 0.0;
        for i in 0..n {
            let mut best = f64::INFINITY;
            for entry in &entries {
                let term = match entry {
                    None => 1.0,
                    Some(c) => f64::from(c.errors[i]) + self.cfg.alpha * c.cost,
                };
                best = best.min(term);
            }
            total += best;
        }
        total / n as f64
    }
}

fn key_of(subset: &BTreeSet<usize>) -> Vec<usize> {
    subset.iter().copied().collect()
}

/// Runs the greedy subset search.
///
/// For each slot in turn, repeatedly adds the sensor whose inclusion
/// minimizes the collection loss, stopping when no sensor improves it by
/// more than [`IMPROVEMENT_TOL`]. Candidate ties break toward the
/// smallest sensor id. Finalization drops empty slots and duplicates and
/// retrains the surviving subsets' classifiers with the final basis.
pub fn greedy_select(
    x_train: &Array2<f64>,
    y_train: &[usize],
    x_val: &Array2<f64>,
    y_val: &[usize],
    n_classes: usize,
    sensors: &SensorSpec,
    cfg: &SearchConfig,
) -> Result<SubsetCollection> {
    if cfg.k == 0 {
        return Err(Error::Config("need at least one subset slot".into()));
    }
    if cfg.alpha <= 0.0 {
        return Err(Error::Config(format!(
            "alpha must be positive, got {}",
            cfg.alpha
        )));
    }
    let mut state = SearchState {
        x_train,
        y_train,
        x_val,
        y_val,
        n_classes,
        sensors,
        cfg,
        cache: HashMap::new(),
    };
    let l = sensors.n_sensors();
    let mut collection: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); cfg.k];
    let mut loss_trace = Vec::new();

    for k in 0..cfg.k {
        loop {
            let current_loss = state.loss(&collection);
            let candidates: Vec<BTreeSet<usize>> = (0..l)
                .filter(|m| !collection[k].contains(m))
                .take(cfg.candidate_budget.max(1))
                .map(|m| {
                    let mut s = collection[k].clone();
                    s.insert(m);
                    s
                })
                .collect();
            if candidates.is_empty() {
                break;
            }
            state.ensure_cached(&candidates)?;
            let mut best: Option<(f64, usize)> = None;
            for (idx, candidate) in candidates.iter().enumerate() {
                let mut trial = collection.clone();
                trial[k] = candidate.clone();
                let loss = state.loss(&trial);
                // Strict improvement over earlier candidates keeps the
                // smallest sensor id on ties.
                if best.map_or(true, |(b, _)| loss < b - IMPROVEMENT_TOL) {
                    best = Some((loss, idx));
                }
            }
            let (best_loss, best_idx) = best.expect("candidates nonempty");
            if best_loss < current_loss - IMPROVEMENT_TOL {
                collection[k] = candidates[best_idx].clone();
                loss_trace.push(best_loss);
            } else {
                break;
            }
        }
    }
    let search_loss = state.loss(&collection);

    // Finalize: drop empties, deduplicate preserving first appearance.
    let mut final_subsets: Vec<BTreeSet<usize>> = Vec::new();
    for s in collection.into_iter().filter(|s| !s.is_empty()) {
        if !final_subsets.contains(&s) {
            final_subsets.push(s);
        }
    }
    if final_subsets.is_empty() {
        return Err(Error::AllSubsetsEmpty);
    }

    let oracle_models: Vec<LogisticModel> = final_subsets
        .par_iter()
        .map(|s| {
            let cols = sensors.columns_of(s);
            train_logistic(
                &restrict_columns(x_train, &cols),
                y_train,
                n_classes,
                s.clone(),
                cfg.final_basis,
                cfg.l2,
            )
            .map(|(m, _)| m)
        })
        .collect::<Result<_>>()?;

    let model_refs: Vec<Option<&LogisticModel>> =
        oracle_models.iter().map(Some).collect();
    let final_loss = collection_loss(
        &final_subsets,
        &model_refs,
        sensors,
        x_val,
        y_val,
        cfg.alpha,
    )?;

    Ok(SubsetCollection {
        subsets: final_subsets,
        oracle_models,
        alpha: cfg.alpha,
        loss_trace,
        search_loss,
        final_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sensor;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_sensors(l: usize) -> SensorSpec {
        SensorSpec {
            sensors: (0..l)
                .map(|m| Sensor {
                    name: format!("s{m}"),
                    cost: 1.0,
                    columns: vec![m],
                })
                .collect(),
        }
    }

    fn search_cfg(k: usize, alpha: f64, l: usize) -> SearchConfig {
        SearchConfig {
            k,
            alpha,
            candidate_budget: l,
            l2: 1e-4,
            search_basis: BasisConfig::linear(),
            final_basis: BasisConfig::linear(),
        }
    }

    /// Labels follow the sign of one planted column; other columns are
    /// structured noise.
    fn planted(l: usize, n: usize, informative: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, l));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = usize::from(rng.random::<bool>());
            for m in 0..l {
                x[[i, m]] = if m == informative {
                    (if label == 1 { 1.0 } else { -1.0 }) + rng.random_range(-0.3..0.3)
                } else {
                    rng.random_range(-1.0..1.0)
                };
            }
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn single_perfect_subset_loss_is_pure_cost() {
        let sensors = SensorSpec {
            sensors: vec![
                Sensor { name: "a".into(), cost: 2.0, columns: vec![0] },
                Sensor { name: "b".into(), cost: 1.0, columns: vec![1] },
            ],
        };
        let (x, y) = planted(2, 60, 0, 5);
        let subset: BTreeSet<usize> = [0].into();
        let cols = sensors.columns_of(&subset);
        let (model, report) = train_logistic(
            &restrict_columns(&x, &cols),
            &y,
            2,
            subset.clone(),
            BasisConfig::linear(),
            1e-4,
        )
        .unwrap();
        assert_eq!(report.train_error, 0.0, "planted data must be separable");
        let loss =
            collection_loss(&[subset], &[Some(&model)], &sensors, &x, &y, 0.1).unwrap();
        assert!((loss - 0.2).abs() <= 1e-12, "0 error + 0.1 * cost 2, got {loss}");
    }

    #[test]
    fn dominated_subset_never_changes_the_loss() {
        let sensors = unit_sensors(2);
        let (x, y) = planted(2, 50, 0, 9);
        let good: BTreeSet<usize> = [0].into();
        let bad: BTreeSet<usize> = [0, 1].into();
        let train = |s: &BTreeSet<usize>| {
            let cols = sensors.columns_of(s);
            train_logistic(
                &restrict_columns(&x, &cols),
                &y,
                2,
                s.clone(),
                BasisConfig::linear(),
                1e-4,
            )
            .unwrap()
            .0
        };
        let m_good = train(&good);
        let m_bad = train(&bad);
        // The wider subset costs more with no error left to fix, so the
        // cheap subset dominates per-example.
        let single =
            collection_loss(&[good.clone()], &[Some(&m_good)], &sensors, &x, &y, 0.05).unwrap();
        let both = collection_loss(
            &[good, bad],
            &[Some(&m_good), Some(&m_bad)],
            &sensors,
            &x,
            &y,
            0.05,
        )
        .unwrap();
        assert!((single - both).abs() <= 1e-12);
    }

    #[test]
    fn loss_matches_brute_force_enumeration() {
        let sensors = unit_sensors(3);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 40;
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let subsets: Vec<BTreeSet<usize>> = vec![[0].into(), [1, 2].into(), [0, 1, 2].into()];
        let models: Vec<LogisticModel> = subsets
            .iter()
            .map(|s| {
                let cols = sensors.columns_of(s);
                train_logistic(
                    &restrict_columns(&x, &cols),
                    &y,
                    2,
                    s.clone(),
                    BasisConfig::linear(),
                    1e-3,
                )
                .unwrap()
                .0
            })
            .collect();
        let alpha = 0.07;
        let refs: Vec<Option<&LogisticModel>> = models.iter().map(Some).collect();
        let fast = collection_loss(&subsets, &refs, &sensors, &x, &y, alpha).unwrap();
        // Independent per-example enumeration.
        let mut slow = 0.0;
        for i in 0..n {
            let mut best = f64::INFINITY;
            for (s, m) in subsets.iter().zip(&models) {
                let cols = sensors.columns_of(s);
                let xi: Vec<f64> = cols.iter().map(|&c| x[[i, c]]).collect();
                let term = f64::from(m.error_indicator(&xi, y[i]).unwrap())
                    + alpha * sensors.subset_cost(s);
                best = best.min(term);
            }
            slow += best;
        }
        slow /= n as f64;
        assert!((fast - slow).abs() <= 1e-12);
    }

    #[test]
    fn duplicate_subset_does_not_increase_loss() {
        let sensors = unit_sensors(2);
        let (x, y) = planted(2, 50, 0, 13);
        let s: BTreeSet<usize> = [0].into();
        let cols = sensors.columns_of(&s);
        let (m, _) = train_logistic(
            &restrict_columns(&x, &cols),
            &y,
            2,
            s.clone(),
            BasisConfig::linear(),
            1e-4,
        )
        .unwrap();
        let single = collection_loss(&[s.clone()], &[Some(&m)], &sensors, &x, &y, 0.1).unwrap();
        let doubled =
            collection_loss(&[s.clone(), s], &[Some(&m), Some(&m)], &sensors, &x, &y, 0.1)
                .unwrap();
        assert!(doubled <= single + 1e-12);
    }

    #[test]
    fn greedy_finds_the_single_informative_sensor() {
        // Sensor 2 alone resolves the labels; with one slot and a small
        // alpha the loop picks it and stops, since any further sensor
        // raises cost with no error left.
        let (x, y) = planted(3, 240, 2, 21);
        let sensors = unit_sensors(3);
        let x_train = x.slice(ndarray::s![..160, ..]).to_owned();
        let y_train = y[..160].to_vec();
        let x_val = x.slice(ndarray::s![160.., ..]).to_owned();
        let y_val = y[160..].to_vec();
        let cfg = search_cfg(1, 0.01, 3);
        let collection =
            greedy_select(&x_train, &y_train, &x_val, &y_val, 2, &sensors, &cfg).unwrap();
        assert_eq!(collection.subsets.len(), 1);
        assert_eq!(collection.subsets[0], [2usize].into());
    }

    #[test]
    fn cost_dominated_regime_returns_all_subsets_empty() {
        let (x, y) = planted(3, 120, 2, 33);
        let sensors = unit_sensors(3);
        let x_train = x.slice(ndarray::s![..80, ..]).to_owned();
        let y_train = y[..80].to_vec();
        let x_val = x.slice(ndarray::s![80.., ..]).to_owned();
        let y_val = y[80..].to_vec();
        // Every sensor costs more than a guaranteed error.
        let cfg = search_cfg(2, 1.5, 3);
        match greedy_select(&x_train, &y_train, &x_val, &y_val, 2, &sensors, &cfg) {
            Err(Error::AllSubsetsEmpty) => {}
            other => panic!("expected AllSubsetsEmpty, got {other:?}"),
        }
    }

    #[test]
    fn accepted_steps_strictly_decrease() {
        let (x, y) = planted(4, 300, 1, 55);
        let sensors = unit_sensors(4);
        let x_train = x.slice(ndarray::s![..200, ..]).to_owned();
        let y_train = y[..200].to_vec();
        let x_val = x.slice(ndarray::s![200.., ..]).to_owned();
        let y_val = y[200..].to_vec();
        let cfg = search_cfg(2, 0.02, 4);
        let collection =
            greedy_select(&x_train, &y_train, &x_val, &y_val, 2, &sensors, &cfg).unwrap();
        for pair in collection.loss_trace.windows(2) {
            assert!(pair[1] < pair[0] - IMPROVEMENT_TOL / 2.0);
        }
        // Final loss at most the empty-collection baseline of 1.
        assert!(collection.search_loss <= 1.0);
    }

    #[test]
    fn greedy_is_deterministic() {
        let (x, y) = planted(4, 200, 0, 71);
        let sensors = unit_sensors(4);
        let x_train = x.slice(ndarray::s![..140, ..]).to_owned();
        let y_train = y[..140].to_vec();
        let x_val = x.slice(ndarray::s![140.., ..]).to_owned();
        let y_val = y[140..].to_vec();
        let cfg = search_cfg(3, 0.05, 4);
        let a = greedy_select(&x_train, &y_train, &x_val, &y_val, 2, &sensors, &cfg).unwrap();
        let b = greedy_select(&x_train, &y_train, &x_val, &y_val, 2, &sensors, &cfg).unwrap();
        assert_eq!(a.subsets, b.subsets);
        assert_eq!(a.search_loss.to_bits(), b.search_loss.to_bits());
    }
}
