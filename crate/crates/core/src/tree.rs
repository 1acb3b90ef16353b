//! Binary sensor-acquisition trees: intersection-based clustering of sensor
//! subsets, path matrices, and routing.
//!
//! Leaves are numbered left to right with the negative branch on the left;
//! internal nodes are numbered in breadth-first order from the root. A
//! leaf's path is encoded by the binary matrices P and N: `P[k][j] = 1`
//! means node j must decide positive (g_j > 0) on the way to leaf k,
//! `N[k][j] = 1` means it must decide negative (g_j <= 0).

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Shape-and-leaf-sets description of a tree; the serialized form.
///
/// Everything else (node numbering, acquired sets, path matrices) is
/// derived deterministically from this.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TreeSpec {
    Node { neg: Box<TreeSpec>, pos: Box<TreeSpec> },
    Leaf { sensors: Vec<usize> },
}

impl TreeSpec {
    pub fn leaf(sensors: impl IntoIterator<Item = usize>) -> Self {
        TreeSpec::Leaf {
            sensors: sensors.into_iter().collect(),
        }
    }

    pub fn node(neg: TreeSpec, pos: TreeSpec) -> Self {
        TreeSpec::Node {
            neg: Box::new(neg),
            pos: Box::new(pos),
        }
    }

    /// Uniformly random shape with `k` leaves; leaf i carries sensors
    /// {0..=i} so the sets are distinct, nonempty, and intersect properly.
    /// Used by the risk-equivalence diagnostic and by tests.
    pub fn random_shape(k: usize, rng: &mut impl Rng) -> Self {
        fn build(leaf_ids: &[usize], rng: &mut impl Rng) -> TreeSpec {
            if leaf_ids.len() == 1 {
                return TreeSpec::leaf(0..=leaf_ids[0]);
            }
            let cut = rng.random_range(1..leaf_ids.len());
            TreeSpec::node(build(&leaf_ids[..cut], rng), build(&leaf_ids[cut..], rng))
        }
        let ids: Vec<usize> = (0..k.max(1)).collect();
        build(&ids, rng)
    }
}

/// Reference to a child slot of an internal node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Child {
    Node(usize),
    Leaf(usize),
}

#[derive(Debug, Clone)]
pub struct InternalNode {
    pub id: usize,
    /// Sensors available when an example arrives at this node; the node's
    /// decision function reads exactly these.
    pub acquired: BTreeSet<usize>,
    pub neg_child: Child,
    pub pos_child: Child,
    /// Sensors newly acquired when taking each branch.
    pub neg_new: BTreeSet<usize>,
    pub pos_new: BTreeSet<usize>,
}

#[derive(Debug, Clone)]
pub struct Leaf {
    pub id: usize,
    /// Full sensor set acquired on the path to this leaf.
    pub sensors: BTreeSet<usize>,
    /// Sensors never acquired on that path.
    pub complement: BTreeSet<usize>,
}

#[derive(Debug, Clone)]
pub struct TreeStructure {
    pub n_sensors: usize,
    pub nodes: Vec<InternalNode>,
    pub leaves: Vec<Leaf>,
    /// K x (K-1): positive-decision path requirements.
    p: Vec<Vec<u8>>,
    /// K x (K-1): negative-decision path requirements.
    n: Vec<Vec<u8>>,
    /// Per node j: leaves reachable through the positive branch.
    cp: Vec<BTreeSet<usize>>,
    /// Per node j: leaves reachable through the negative branch.
    cn: Vec<BTreeSet<usize>>,
}

// Flat working representation while numbering a TreeSpec.
struct FlatNode {
    neg: Child,
    pos: Child,
}

fn flatten(
    spec: &TreeSpec,
    nodes: &mut Vec<FlatNode>,
    leaves: &mut Vec<BTreeSet<usize>>,
) -> Result<Child> {
    match spec {
        TreeSpec::Leaf { sensors } => {
            let set: BTreeSet<usize> = sensors.iter().copied().collect();
            if set.is_empty() {
                return Err(Error::TreeSpec("leaf with empty sensor set".into()));
            }
            leaves.push(set);
            Ok(Child::Leaf(leaves.len() - 1))
        }
        TreeSpec::Node { neg, pos } => {
            let neg = flatten(neg, nodes, leaves)?;
            let pos = flatten(pos, nodes, leaves)?;
            nodes.push(FlatNode { neg, pos });
            Ok(Child::Node(nodes.len() - 1))
        }
    }
}

impl TreeStructure {
    /// Builds the full structure from a spec: leaves numbered in order
    /// (negative branch first), nodes renumbered breadth-first, acquired
    /// sets derived as the intersection of all leaf sets below each node.
    pub fn from_spec(spec: &TreeSpec, n_sensors: usize) -> Result<Self> {
        let mut flat_nodes = Vec::new();
        let mut leaf_sets = Vec::new();
        let root = flatten(spec, &mut flat_nodes, &mut leaf_sets)?;
        for set in &leaf_sets {
            if let Some(&m) = set.iter().next_back() {
                if m >= n_sensors {
                    return Err(Error::TreeSpec(format!(
                        "leaf references sensor {m}, only {n_sensors} sensors exist"
                    )));
                }
            }
        }
        let k = leaf_sets.len();

        // BFS numbering of internal nodes.
        let mut bfs_order = Vec::new();
        if let Child::Node(r) = root {
            let mut queue = std::collections::VecDeque::from([r]);
            while let Some(old) = queue.pop_front() {
                bfs_order.push(old);
                for child in [flat_nodes[old].neg, flat_nodes[old].pos] {
                    if let Child::Node(c) = child {
                        queue.push_back(c);
                    }
                }
            }
        }
        let mut new_id = vec![usize::MAX; flat_nodes.len()];
        for (new, &old) in bfs_order.iter().enumerate() {
            new_id[old] = new;
        }
        let renumber = |c: Child| match c {
            Child::Node(old) => Child::Node(new_id[old]),
            Child::Leaf(l) => Child::Leaf(l),
        };

        // Leaves below each node, in leaf order.
        let mut below: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); flat_nodes.len()];
        fn collect_below(
            c: Child,
            nodes: &[FlatNode],
            below: &mut [BTreeSet<usize>],
        ) -> BTreeSet<usize> {
            match c {
                Child::Leaf(l) => BTreeSet::from([l]),
                Child::Node(j) => {
                    let neg = collect_below(nodes[j].neg, nodes, below);
                    let pos = collect_below(nodes[j].pos, nodes, below);
                    let all: BTreeSet<usize> = neg.union(&pos).copied().collect();
                    below[j] = all.clone();
                    all
                }
            }
        }
        collect_below(root, &flat_nodes, &mut below);

        let acquired_of = |leaves_below: &BTreeSet<usize>| -> BTreeSet<usize> {
            let mut iter = leaves_below.iter();
            let first = *iter.next().expect("node has leaves below");
            let mut acc = leaf_sets[first].clone();
            for &l in iter {
                acc = acc.intersection(&leaf_sets[l]).copied().collect();
            }
            acc
        };

        let mut nodes: Vec<InternalNode> = Vec::with_capacity(flat_nodes.len());
        for (new, &old) in bfs_order.iter().enumerate() {
            let acquired = acquired_of(&below[old]);
            let arrival = |c: Child| match c {
                Child::Leaf(l) => leaf_sets[l].clone(),
                Child::Node(j) => acquired_of(&below[j]),
            };
            let neg_arrival = arrival(flat_nodes[old].neg);
            let pos_arrival = arrival(flat_nodes[old].pos);
            nodes.push(InternalNode {
                id: new,
                neg_new: neg_arrival.difference(&acquired).copied().collect(),
                pos_new: pos_arrival.difference(&acquired).copied().collect(),
                acquired,
                neg_child: renumber(flat_nodes[old].neg),
                pos_child: renumber(flat_nodes[old].pos),
            });
        }

        let leaves: Vec<Leaf> = leaf_sets
            .iter()
            .enumerate()
            .map(|(id, set)| Leaf {
                id,
                complement: (0..n_sensors).filter(|m| !set.contains(m)).collect(),
                sensors: set.clone(),
            })
            .collect();

        // Path matrices by walking down from the root.
        let mut p = vec![vec![0u8; k.saturating_sub(1)]; k];
        let mut n = vec![vec![0u8; k.saturating_sub(1)]; k];
        fn mark(
            c: Child,
            nodes: &[InternalNode],
            path: &mut Vec<(usize, bool)>,
            p: &mut [Vec<u8>],
            n: &mut [Vec<u8>],
        ) {
            match c {
                Child::Leaf(l) => {
                    for &(j, positive) in path.iter() {
                        if positive {
                            p[l][j] = 1;
                        } else {
                            n[l][j] = 1;
                        }
                    }
                }
                Child::Node(j) => {
                    path.push((j, false));
                    mark(nodes[j].neg_child, nodes, path, p, n);
                    path.pop();
                    path.push((j, true));
                    mark(nodes[j].pos_child, nodes, path, p, n);
                    path.pop();
                }
            }
        }
        let root_new = renumber(root);
        mark(root_new, &nodes, &mut Vec::new(), &mut p, &mut n);

        let n_internal = nodes.len();
        let mut cp = vec![BTreeSet::new(); n_internal];
        let mut cn = vec![BTreeSet::new(); n_internal];
        for leaf in 0..k {
            for j in 0..n_internal {
                if p[leaf][j] == 1 {
                    cp[j].insert(leaf);
                }
                if n[leaf][j] == 1 {
                    cn[j].insert(leaf);
                }
            }
        }

        Ok(Self {
            n_sensors,
            nodes,
            leaves,
            p,
            n,
            cp,
            cn,
        })
    }

    /// Number of leaves K.
    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Number of internal nodes, K-1 (0 for a single-leaf tree).
    pub fn n_internal(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> Option<&InternalNode> {
        self.nodes.first()
    }

    /// The K x (K-1) positive/negative path matrices.
    pub fn path_matrices(&self) -> (&[Vec<u8>], &[Vec<u8>]) {
        (&self.p, &self.n)
    }

    /// Leaves in the positive subtree of node j.
    pub fn leaves_positive(&self, j: usize) -> &BTreeSet<usize> {
        &self.cp[j]
    }

    /// Leaves in the negative subtree of node j.
    pub fn leaves_negative(&self, j: usize) -> &BTreeSet<usize> {
        &self.cn[j]
    }

    /// Follows the decisions down to a leaf; `signs[j] = true` means
    /// g_j > 0. Exactly one leaf satisfies any total assignment.
    pub fn route(&self, signs: &[bool]) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        let mut at = Child::Node(0);
        loop {
            match at {
                Child::Leaf(l) => return l,
                Child::Node(j) => {
                    at = if signs[j] {
                        self.nodes[j].pos_child
                    } else {
                        self.nodes[j].neg_child
                    };
                }
            }
        }
    }

    /// Rebuilds the spec this structure was derived from.
    pub fn to_spec(&self) -> TreeSpec {
        fn build(c: Child, tree: &TreeStructure) -> TreeSpec {
            match c {
                Child::Leaf(l) => TreeSpec::leaf(tree.leaves[l].sensors.iter().copied()),
                Child::Node(j) => TreeSpec::node(
                    build(tree.nodes[j].neg_child, tree),
                    build(tree.nodes[j].pos_child, tree),
                ),
            }
        }
        if self.nodes.is_empty() {
            TreeSpec::leaf(self.leaves[0].sensors.iter().copied())
        } else {
            build(Child::Node(0), self)
        }
    }
}

// A cluster during agglomeration: its running intersection, the subtree
// built so far, and the sorted list of leaf sensor-sets below it (used for
// deterministic tie-breaking and branch polarity).
struct Cluster {
    set: BTreeSet<usize>,
    spec: TreeSpec,
    leaf_sig: Vec<Vec<usize>>,
}

impl Cluster {
    fn key(&self) -> (Vec<usize>, &Vec<Vec<usize>>) {
        (self.set.iter().copied().collect(), &self.leaf_sig)
    }
}

/// Agglomeratively merges the subsets into a binary tree: the pair with
/// the largest sensor intersection merges first and is replaced by that
/// intersection, repeated until one cluster remains.
///
/// Ties pick the pair whose sorted sensor-id signatures compare smallest;
/// within a merge the child whose leaf-set signature is lexicographically
/// smaller takes the negative branch.
pub fn cluster_tree(subsets: &[BTreeSet<usize>], n_sensors: usize) -> Result<TreeStructure> {
    if subsets.len() < 2 {
        return Err(Error::TreeSpec(format!(
            "need at least 2 subsets, got {}",
            subsets.len()
        )));
    }
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    for s in subsets {
        if s.is_empty() {
            return Err(Error::TreeSpec("empty subset".into()));
        }
        if !seen.insert(s.iter().copied().collect()) {
            return Err(Error::DuplicateSubsets);
        }
    }

    let mut clusters: Vec<Cluster> = subsets
        .iter()
        .map(|s| Cluster {
            set: s.clone(),
            spec: TreeSpec::leaf(s.iter().copied()),
            leaf_sig: vec![s.iter().copied().collect()],
        })
        .collect();

    while clusters.len() > 1 {
        let mut best: Option<(usize, usize)> = None;
        let mut best_common = 0usize;
        for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let common = clusters[i].set.intersection(&clusters[j].set).count();
                let candidate_better = match best {
                    None => true,
                    Some((bi, bj)) => {
                        if common != best_common {
                            common > best_common
                        } else {
                            let cand = ordered_pair_key(&clusters[i], &clusters[j]);
                            let cur = ordered_pair_key(&clusters[bi], &clusters[bj]);
                            cand < cur
                        }
                    }
                };
                if candidate_better {
                    best = Some((i, j));
                    best_common = common;
                }
            }
        }
        let (i, j) = best.expect("at least one pair");
        // Remove j first so index i stays valid.
        let b = clusters.remove(j);
        let a = clusters.remove(i);
        let (neg, pos) = if a.leaf_sig <= b.leaf_sig { (a, b) } else { (b, a) };
        let mut leaf_sig = [neg.leaf_sig.clone(), pos.leaf_sig.clone()].concat();
        leaf_sig.sort();
        clusters.push(Cluster {
            set: neg.set.intersection(&pos.set).copied().collect(),
            spec: TreeSpec::node(neg.spec, pos.spec),
            leaf_sig,
        });
    }

    TreeStructure::from_spec(&clusters[0].spec, n_sensors)
}

fn ordered_pair_key<'a>(
    a: &'a Cluster,
    b: &'a Cluster,
) -> ((Vec<usize>, &'a Vec<Vec<usize>>), (Vec<usize>, &'a Vec<Vec<usize>>)) {
    let (ka, kb) = (a.key(), b.key());
    if ka <= kb {
        (ka, kb)
    } else {
        (kb, ka)
    }
}
