//! The versioned on-disk model document.
//!
//! A single self-describing JSON file carries every learned coefficient
//! (scaler, tree with path matrices, leaf classifier weights, decision
//! functions) plus the run configuration and split that produced them,
//! so any number in it can be audited or re-derived.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Scaler, SensorSpec, Split};
use crate::eval::DecisionSystem;
use crate::logistic::LogisticModel;
use crate::lp::DecisionFunctions;
use crate::pipeline::RunConfig;
use crate::tree::{Child, TreeSpec, TreeStructure};
use crate::{Error, Result};

pub const MODEL_FORMAT: &str = "budget-tree/1";

/// Serde adapter storing an `Array2<f64>` as a row-major nested vector.
pub mod array2_serde {
    use ndarray::Array2;
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(arr: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = arr.rows().into_iter().map(|r| r.to_vec()).collect();
        serde::Serialize::serialize(&rows, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let n = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(D::Error::custom("ragged weight matrix"));
        }
        Array2::from_shape_vec((n, width), rows.into_iter().flatten().collect())
            .map_err(D::Error::custom)
    }
}

/// Derived, human-auditable view of one internal node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    /// Sensor names readable at this node.
    pub reads: Vec<String>,
    pub neg_child: Child,
    pub pos_child: Child,
    pub neg_acquires: Vec<String>,
    pub pos_acquires: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafRecord {
    pub id: usize,
    pub sensors: Vec<String>,
}

/// Tree as stored: the canonical spec plus derived records and the path
/// matrices, which are re-derived and verified on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeModel {
    pub spec: TreeSpec,
    pub nodes: Vec<NodeRecord>,
    pub leaves: Vec<LeafRecord>,
    pub p: Vec<Vec<u8>>,
    pub n: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub config: RunConfig,
    pub alpha: f64,
    pub sensors: SensorSpec,
    pub label_names: Vec<String>,
    pub scaler: Scaler,
    pub split: Split,
    pub tree: TreeModel,
    pub leaf_models: Vec<LogisticModel>,
    pub decisions: DecisionFunctions,
}

fn names_of(sensors: &SensorSpec, ids: impl IntoIterator<Item = usize>) -> Vec<String> {
    ids.into_iter()
        .map(|m| sensors.sensors[m].name.clone())
        .collect()
}

impl ModelFile {
    pub fn from_system(system: &DecisionSystem, config: &RunConfig, split: &Split) -> Self {
        let tree = &system.tree;
        let (p, n) = tree.path_matrices();
        let tree_model = TreeModel {
            spec: tree.to_spec(),
            nodes: tree
                .nodes
                .iter()
                .map(|node| NodeRecord {
                    id: node.id,
                    reads: names_of(&system.sensors, node.acquired.iter().copied()),
                    neg_child: node.neg_child,
                    pos_child: node.pos_child,
                    neg_acquires: names_of(&system.sensors, node.neg_new.iter().copied()),
                    pos_acquires: names_of(&system.sensors, node.pos_new.iter().copied()),
                })
                .collect(),
            leaves: tree
                .leaves
                .iter()
                .map(|leaf| LeafRecord {
                    id: leaf.id,
                    sensors: names_of(&system.sensors, leaf.sensors.iter().copied()),
                })
                .collect(),
            p: p.to_vec(),
            n: n.to_vec(),
        };
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            config: config.clone(),
            alpha: system.alpha,
            sensors: system.sensors.clone(),
            label_names: system.label_names.clone(),
            scaler: system.scaler.clone(),
            split: split.clone(),
            tree: tree_model,
            leaf_models: system.leaf_models.clone(),
            decisions: system.decisions.clone(),
        }
    }

    /// Rebuilds the runtime system, re-deriving the tree from its spec and
    /// checking the stored path matrices against the rebuilt ones.
    pub fn into_system(self) -> Result<(DecisionSystem, RunConfig, Split)> {
        if self.format != MODEL_FORMAT {
            return Err(Error::ModelFormat {
                expected: MODEL_FORMAT.to_string(),
                found: self.format,
            });
        }
        let tree = TreeStructure::from_spec(&self.tree.spec, self.sensors.n_sensors())?;
        let (p, n) = tree.path_matrices();
        if p != self.tree.p.as_slice() || n != self.tree.n.as_slice() {
            return Err(Error::Config(
                "model file path matrices disagree with its tree spec".into(),
            ));
        }
        if self.leaf_models.len() != tree.n_leaves() {
            return Err(Error::Config(format!(
                "model file has {} leaf models for {} leaves",
                self.leaf_models.len(),
                tree.n_leaves()
            )));
        }
        if self.decisions.funcs.len() != tree.n_internal() {
            return Err(Error::Config(format!(
                "model file has {} decision functions for {} internal nodes",
                self.decisions.funcs.len(),
                tree.n_internal()
            )));
        }
        let system = DecisionSystem {
            sensors: self.sensors,
            scaler: self.scaler,
            tree,
            leaf_models: self.leaf_models,
            decisions: self.decisions,
            alpha: self.alpha,
            label_names: self.label_names,
        };
        Ok((system, self.config, self.split))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("model serialization failed: {e}")))?;
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        let text = std::fs::read_to_string(path)?;
        // Check the version tag before insisting on the full schema.
        #[derive(Deserialize)]
        struct Probe {
            format: String,
        }
        let probe: Probe = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("not a model file: {e}")))?;
        if probe.format != MODEL_FORMAT {
            return Err(Error::ModelFormat {
                expected: MODEL_FORMAT.to_string(),
                found: probe.format,
            });
        }
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("model parse failed: {e}")))
    }
}

/// Writes through a temp file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp_name = format!(
        ".{}.tmp",
        path.file_name().and_then(|f| f.to_str()).unwrap_or("out")
    );
    let tmp = match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(d) => d.join(&tmp_name),
        None => std::path::PathBuf::from(&tmp_name),
    };
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BasisConfig;
    use ndarray::array;
    use std::collections::BTreeSet;

    fn toy_system() -> DecisionSystem {
        let sensors = SensorSpec {
            sensors: vec![
                crate::data::Sensor { name: "a".into(), cost: 1.0, columns: vec![0] },
                crate::data::Sensor { name: "b".into(), cost: 2.0, columns: vec![1] },
            ],
        };
        let spec = TreeSpec::node(TreeSpec::leaf([0]), TreeSpec::leaf([0, 1]));
        let tree = TreeStructure::from_spec(&spec, 2).unwrap();
        let model = LogisticModel {
            weights: array![[0.1, -0.2], [0.0, 0.3]],
            subset: BTreeSet::from([0]),
            basis: BasisConfig::linear(),
        };
        let model_full = LogisticModel {
            weights: array![[0.1, -0.2, 0.5], [0.0, 0.3, -0.1]],
            subset: BTreeSet::from([0, 1]),
            basis: BasisConfig::linear(),
        };
        DecisionSystem {
            sensors,
            scaler: Scaler { mean: vec![0.0, 1.0], std: vec![1.0, 2.0] },
            tree,
            leaf_models: vec![model, model_full],
            decisions: DecisionFunctions {
                funcs: vec![crate::lp::DecisionFunction {
                    node: 0,
                    weights: vec![0.7],
                    bias: -0.1,
                }],
                basis: BasisConfig::linear(),
            },
            alpha: 0.05,
            label_names: vec!["x".into(), "y".into()],
        }
    }

    #[test]
    fn model_file_round_trips() {
        let system = toy_system();
        let cfg = RunConfig::default();
        let split = Split {
            train_idx: vec![0, 1],
            val_idx: vec![2],
            test_idx: vec![3],
            seed: 9,
        };
        let file = ModelFile::from_system(&system, &cfg, &split);
        let json = serde_json::to_string(&file).unwrap();
        let parsed: ModelFile = serde_json::from_str(&json).unwrap();
        let (rebuilt, _, split2) = parsed.into_system().unwrap();
        assert_eq!(split2, split);
        assert_eq!(rebuilt.tree.path_matrices(), system.tree.path_matrices());
        assert_eq!(rebuilt.leaf_models[0].weights, system.leaf_models[0].weights);
        assert_eq!(rebuilt.decisions.funcs[0].weights, system.decisions.funcs[0].weights);
    }

    #[test]
    fn format_mismatch_is_detected() {
        let system = toy_system();
        let cfg = RunConfig::default();
        let split = Split {
            train_idx: vec![0],
            val_idx: vec![1],
            test_idx: vec![2],
            seed: 9,
        };
        let mut file = ModelFile::from_system(&system, &cfg, &split);
        file.format = "budget-tree/999".into();
        match file.into_system() {
            Err(Error::ModelFormat { found, .. }) => assert_eq!(found, "budget-tree/999"),
            other => panic!("expected ModelFormat, got {other:?}"),
        }
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains("tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
