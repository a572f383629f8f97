//! The categorization tree and its incremental sorting procedure.
//!
//! Every node keeps a [`ConceptStats`] summary of the instances sorted below
//! it. [`ConceptTree::fit`] sorts a new instance from the root, choosing at
//! each internal node between adding to the best child, creating a new child,
//! merging the two best children or splitting the best child, whichever yields
//! the highest category utility.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{FlatInstance, Instance, Mapping};
use crate::matcher;
use crate::params::TreeParams;
use crate::stats::{category_utility_from_parts, ConceptStats};

/// Stable identifier of a concept. Identifiers grow with creation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(pub u64);

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptNode {
    pub id: ConceptId,
    pub parent: Option<ConceptId>,
    pub children: Vec<ConceptId>,
    pub stats: ConceptStats,
}

impl ConceptNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn count(&self) -> u64 {
        self.stats.count()
    }
}

/// Operation chosen while sorting an instance through an internal node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Operation {
    Add(ConceptId),
    Create,
    Merge(ConceptId, ConceptId),
    Split(ConceptId),
}

/// Category utilities of the candidate operations at one node.
#[derive(Clone, Debug, PartialEq)]
pub struct OperationScores {
    /// Children ranked by the utility of adding the instance to them.
    pub ranked: Vec<(ConceptId, f64)>,
    pub create: f64,
    pub merge: Option<f64>,
    pub split: Option<f64>,
}

impl OperationScores {
    /// Best operation, ties resolved in the order add, create, merge, split.
    pub fn best(&self) -> (Operation, f64) {
        let (best1, add) = self.ranked[0];
        let mut choice = (Operation::Add(best1), add);
        if self.create > choice.1 {
            choice = (Operation::Create, self.create);
        }
        if let Some(merge) = self.merge {
            if merge > choice.1 {
                choice = (Operation::Merge(best1, self.ranked[1].0), merge);
            }
        }
        if let Some(split) = self.split {
            if split > choice.1 {
                choice = (Operation::Split(best1), split);
            }
        }
        choice
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConceptTree {
    params: TreeParams,
    root: ConceptId,
    next_id: u64,
    nodes: BTreeMap<ConceptId, ConceptNode>,
}

impl ConceptTree {
    pub fn new(params: TreeParams) -> Result<Self> {
        params.validate()?;
        let root = ConceptId(0);
        let mut nodes = BTreeMap::new();
        nodes.insert(
            root,
            ConceptNode {
                id: root,
                parent: None,
                children: Vec::new(),
                stats: ConceptStats::default(),
            },
        );
        Ok(ConceptTree {
            params,
            root,
            next_id: 1,
            nodes,
        })
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn root(&self) -> ConceptId {
        self.root
    }

    pub fn root_stats(&self) -> &ConceptStats {
        &self.node(self.root).stats
    }

    /// Number of instances the tree has absorbed.
    pub fn count(&self) -> u64 {
        self.root_stats().count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn get(&self, id: ConceptId) -> Option<&ConceptNode> {
        self.nodes.get(&id)
    }

    /// Panics on an unknown id; ids handed out by the tree stay valid until a
    /// merge or split removes them.
    pub fn node(&self, id: ConceptId) -> &ConceptNode {
        &self.nodes[&id]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ConceptNode> {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Length of the longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        fn walk(tree: &ConceptTree, id: ConceptId) -> usize {
            tree.node(id)
                .children
                .iter()
                .map(|&c| 1 + walk(tree, c))
                .max()
                .unwrap_or(0)
        }
        walk(self, self.root)
    }

    pub fn depth_of(&self, id: ConceptId) -> usize {
        self.path_to(id).len() - 1
    }

    /// Root-to-`id` path, both ends included.
    pub fn path_to(&self, id: ConceptId) -> Vec<ConceptId> {
        let mut path = vec![id];
        let mut current = id;
        while let Some(parent) = self.node(current).parent {
            path.push(parent);
            current = parent;
        }
        path.reverse();
        path
    }

    /// Matches `instance` against the root and flattens it under the mapping.
    pub fn prepare(&self, instance: &Instance) -> Result<(Mapping, FlatInstance)> {
        let result = matcher::best_match(self.root_stats(), instance, &self.params)?;
        let flat = instance.flatten(&result.mapping)?;
        Ok((result.mapping, flat))
    }

    /// Matches, flattens and sorts `instance` into the tree. Returns the
    /// concept that finally stores it.
    pub fn fit(&mut self, instance: &Instance) -> Result<ConceptId> {
        let (_, flat) = self.prepare(instance)?;
        self.fit_flat(&flat)
    }

    pub fn fit_flat(&mut self, flat: &FlatInstance) -> Result<ConceptId> {
        self.root_stats().check_compatible(flat)?;
        let mut current = self.root;
        loop {
            let node = self.node(current);
            if node.is_leaf() {
                if node.count() == 0 || node.stats.is_exact_match(flat) {
                    self.increment(current, flat);
                    return Ok(current);
                }
                // fringe split: the leaf becomes the parent of its own copy
                let copy = node.stats.clone();
                self.attach(current, copy);
                self.increment(current, flat);
                return Ok(self.attach(current, ConceptStats::from_flat(flat)));
            }
            match self.score_operations(current, flat).best().0 {
                Operation::Add(child) => {
                    self.increment(current, flat);
                    current = child;
                }
                Operation::Create => {
                    self.increment(current, flat);
                    return Ok(self.attach(current, ConceptStats::from_flat(flat)));
                }
                Operation::Merge(a, b) => {
                    self.increment(current, flat);
                    current = self.merge_children(current, a, b);
                }
                Operation::Split(child) => self.split_child(current, child),
            }
        }
    }

    /// Non-modifying categorization: descends while adding to the best child
    /// beats creating a new one, and stops at leaves.
    pub fn categorize(&self, instance: &Instance) -> Result<ConceptId> {
        let (_, flat) = self.prepare_nonempty(instance)?;
        self.categorize_flat(&flat)
    }

    pub fn categorize_flat(&self, flat: &FlatInstance) -> Result<ConceptId> {
        Ok(*self
            .categorize_path_flat(flat)?
            .last()
            .expect("path always holds the root"))
    }

    /// Like [`categorize_flat`](Self::categorize_flat) but returns the whole
    /// root-to-concept path.
    pub fn categorize_path_flat(&self, flat: &FlatInstance) -> Result<Vec<ConceptId>> {
        if self.is_empty() {
            return Err(Error::EmptyTree);
        }
        self.root_stats().check_compatible(flat)?;
        let mut path = vec![self.root];
        let mut current = self.root;
        loop {
            let node = self.node(current);
            if node.is_leaf() {
                return Ok(path);
            }
            let scores = self.score_add_create(current, flat);
            let (best, add) = scores.0[0];
            if scores.1 > add {
                return Ok(path);
            }
            current = best;
            path.push(current);
        }
    }

    /// Child of `id` that best absorbs `flat`, or `None` at a leaf.
    pub fn best_child(&self, id: ConceptId, flat: &FlatInstance) -> Option<ConceptId> {
        if self.node(id).is_leaf() {
            return None;
        }
        Some(self.score_add_create(id, flat).0[0].0)
    }

    pub(crate) fn prepare_nonempty(&self, instance: &Instance) -> Result<(Mapping, FlatInstance)> {
        if self.is_empty() {
            return Err(Error::EmptyTree);
        }
        self.prepare(instance)
    }

    /// Scores all four operations at internal node `id` for `flat`.
    pub fn score_operations(&self, id: ConceptId, flat: &FlatInstance) -> OperationScores {
        let node = self.node(id);
        let params = &self.params;
        let n_children = node.children.len() as f64;
        let parent_count = node.count() as f64;
        let with_count = parent_count + 1.0;
        let parent_ecg_with = node.stats.ecg_with(flat, params);

        let (ranked, create, children) = self.rank_children(id, flat);
        let base: f64 = children
            .iter()
            .map(|c| c.count / with_count * (c.ecg - parent_ecg_with))
            .sum();
        let index_of = |cid: ConceptId| children.iter().position(|c| c.id == cid).unwrap();

        // merging the only two children yields a one-child partition that is
        // indistinguishable from its parent, so every level would repeat it
        let merge = if children.len() >= 3 {
            let a = &children[index_of(ranked[0].0)];
            let b = &children[index_of(ranked[1].0)];
            let merged = self
                .node(a.id)
                .stats
                .merge(&self.node(b.id).stats)
                .expect("sibling statistics share attribute types");
            let merged_ecg = merged.ecg_with(flat, params);
            let sum = base
                - a.count / with_count * (a.ecg - parent_ecg_with)
                - b.count / with_count * (b.ecg - parent_ecg_with)
                + (a.count + b.count + 1.0) / with_count * (merged_ecg - parent_ecg_with);
            Some(sum / (n_children - 1.0))
        } else {
            None
        };

        let best = self.node(ranked[0].0);
        let split = if best.is_leaf() {
            None
        } else {
            // the split partition is scored on the node as it stands
            let parent_ecg = node.stats.ecg_unchecked(params);
            let parts = node
                .children
                .iter()
                .filter(|&&c| c != best.id)
                .chain(best.children.iter())
                .map(|&c| {
                    let s = &self.node(c).stats;
                    (s.count() as f64, s.ecg_unchecked(params))
                });
            Some(category_utility_from_parts(parent_count, parent_ecg, parts))
        };

        OperationScores {
            ranked,
            create,
            merge,
            split,
        }
    }

    fn score_add_create(&self, id: ConceptId, flat: &FlatInstance) -> (Vec<(ConceptId, f64)>, f64) {
        let (ranked, create, _) = self.rank_children(id, flat);
        (ranked, create)
    }

    /// Utility of adding `flat` to each child (best first, earlier ids win
    /// ties) and of creating a new singleton child.
    fn rank_children(
        &self,
        id: ConceptId,
        flat: &FlatInstance,
    ) -> (Vec<(ConceptId, f64)>, f64, Vec<ChildScore>) {
        let node = self.node(id);
        let params = &self.params;
        let with_count = node.count() as f64 + 1.0;
        let parent_ecg_with = node.stats.ecg_with(flat, params);
        let children: Vec<ChildScore> = node
            .children
            .iter()
            .map(|&c| {
                let stats = &self.node(c).stats;
                ChildScore {
                    id: c,
                    count: stats.count() as f64,
                    ecg: stats.ecg_unchecked(params),
                    ecg_with: stats.ecg_with(flat, params),
                }
            })
            .collect();
        let k = children.len() as f64;
        let base: f64 = children
            .iter()
            .map(|c| c.count / with_count * (c.ecg - parent_ecg_with))
            .sum();
        let mut ranked: Vec<(ConceptId, f64)> = children
            .iter()
            .map(|c| {
                let sum = base - c.count / with_count * (c.ecg - parent_ecg_with)
                    + (c.count + 1.0) / with_count * (c.ecg_with - parent_ecg_with);
                (c.id, sum / k)
            })
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        let singleton_ecg = ConceptStats::from_flat(flat).ecg_unchecked(params);
        let create = (base + (singleton_ecg - parent_ecg_with) / with_count) / (k + 1.0);
        (ranked, create, children)
    }

    fn increment(&mut self, id: ConceptId, flat: &FlatInstance) {
        self.nodes
            .get_mut(&id)
            .expect("live node")
            .stats
            .increment(flat)
            .expect("compatibility checked at the root");
    }

    fn fresh_id(&mut self) -> ConceptId {
        let id = ConceptId(self.next_id);
        self.next_id += 1;
        id
    }

    fn attach(&mut self, parent: ConceptId, stats: ConceptStats) -> ConceptId {
        let id = self.fresh_id();
        self.nodes.insert(
            id,
            ConceptNode {
                id,
                parent: Some(parent),
                children: Vec::new(),
                stats,
            },
        );
        self.nodes.get_mut(&parent).unwrap().children.push(id);
        id
    }

    fn merge_children(&mut self, parent: ConceptId, a: ConceptId, b: ConceptId) -> ConceptId {
        let stats = self
            .node(a)
            .stats
            .merge(&self.node(b).stats)
            .expect("sibling statistics share attribute types");
        let id = self.fresh_id();
        let mut children = vec![a, b];
        children.sort();
        self.nodes.insert(
            id,
            ConceptNode {
                id,
                parent: Some(parent),
                children,
                stats,
            },
        );
        for child in [a, b] {
            self.nodes.get_mut(&child).unwrap().parent = Some(id);
        }
        let siblings = &mut self.nodes.get_mut(&parent).unwrap().children;
        let pos = siblings.iter().position(|&c| c == a).unwrap();
        siblings[pos] = id;
        siblings.retain(|&c| c != b);
        id
    }

    fn split_child(&mut self, parent: ConceptId, child: ConceptId) {
        let removed = self.nodes.remove(&child).expect("live node");
        for &grandchild in &removed.children {
            self.nodes.get_mut(&grandchild).unwrap().parent = Some(parent);
        }
        let siblings = &mut self.nodes.get_mut(&parent).unwrap().children;
        let pos = siblings.iter().position(|&c| c == child).unwrap();
        siblings.splice(pos..=pos, removed.children);
    }

    /// Checks structural invariants: parent links, count conservation and
    /// identifier bounds.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSnapshot(msg));
        let Some(root) = self.nodes.get(&self.root) else {
            return bad("root node missing".into());
        };
        if root.parent.is_some() {
            return bad("root has a parent".into());
        }
        let mut reached = 0usize;
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            reached += 1;
            let node = &self.nodes[&id];
            if node.id != id || id.0 >= self.next_id {
                return bad(format!("node {id} has an inconsistent id"));
            }
            if node.is_leaf() {
                continue;
            }
            let mut sum = 0;
            for child in &node.children {
                let Some(c) = self.nodes.get(child) else {
                    return bad(format!("node {id} lists missing child {child}"));
                };
                if c.parent != Some(id) {
                    return bad(format!("child {child} does not point back to {id}"));
                }
                sum += c.count();
                stack.push(*child);
            }
            if sum != node.count() {
                return bad(format!(
                    "node {id} count {} != children total {sum}",
                    node.count()
                ));
            }
        }
        if reached != self.nodes.len() {
            return bad("unreachable nodes present".into());
        }
        Ok(())
    }

    pub fn to_snapshot(&self) -> TreeSnapshot {
        TreeSnapshot {
            params: self.params,
            root: self.root,
            next_id: self.next_id,
            nodes: self.nodes.values().cloned().collect(),
        }
    }

    pub fn from_snapshot(snapshot: TreeSnapshot) -> Result<Self> {
        snapshot.params.validate()?;
        let mut nodes = BTreeMap::new();
        for node in snapshot.nodes {
            let id = node.id;
            if nodes.insert(id, node).is_some() {
                return Err(Error::InvalidSnapshot(format!("duplicate node {id}")));
            }
        }
        let tree = ConceptTree {
            params: snapshot.params,
            root: snapshot.root,
            next_id: snapshot.next_id,
            nodes,
        };
        tree.validate()?;
        Ok(tree)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_snapshot()).expect("snapshot serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let snapshot: TreeSnapshot =
            serde_json::from_str(text).map_err(|e| Error::InvalidSnapshot(e.to_string()))?;
        Self::from_snapshot(snapshot)
    }
}

#[derive(Clone, Copy, Debug)]
struct ChildScore {
    id: ConceptId,
    count: f64,
    ecg: f64,
    ecg_with: f64,
}

/// Serialized form of a [`ConceptTree`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSnapshot {
    pub params: TreeParams,
    pub root: ConceptId,
    pub next_id: u64,
    pub nodes: Vec<ConceptNode>,
}
