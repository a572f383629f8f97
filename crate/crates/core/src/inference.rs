//! Attribute prediction and flat clustering on a fitted tree.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, Value};
use crate::params::TreeParams;
use crate::stats::{AttrStats, ConceptStats};
use crate::tree::{ConceptId, ConceptTree};

/// A predicted attribute value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub attribute: String,
    pub value: Value,
    /// Probability mass of `value` at the concept; nominal targets only.
    pub confidence: Option<f64>,
    /// Concept whose table supplied the value.
    pub concept: ConceptId,
}

/// Most likely value of `attribute` in `stats`: the most frequent token
/// (lexicographically first on ties) or the mean.
pub fn most_likely(stats: &ConceptStats, attribute: &str) -> Option<(Value, Option<f64>)> {
    match stats.get(attribute)? {
        AttrStats::Nominal(table) => {
            let mut best: Option<(&String, u64)> = None;
            for (token, &count) in table {
                if count > 0 && best.is_none_or(|(_, c)| count > c) {
                    best = Some((token, count));
                }
            }
            let (token, count) = best?;
            Some((
                Value::Nominal(token.clone()),
                Some(count as f64 / stats.count() as f64),
            ))
        }
        AttrStats::Numeric(s) if s.n > 0 => Some((Value::Numeric(s.mean), None)),
        AttrStats::Numeric(_) => None,
    }
}

/// Returns `instance` without the flat attribute `target`.
pub fn mask(instance: &Instance, target: &str) -> Result<Instance> {
    let mut flat = instance.flatten_identity();
    flat.remove(target);
    flat.unflatten()
}

/// Predicts `target` (a flat name in the instance's own namespace) by
/// non-modifying categorization of the instance with `target` removed. Falls
/// back to the nearest ancestor when the selected concept never saw `target`.
pub fn predict(tree: &ConceptTree, instance: &Instance, target: &str) -> Result<Prediction> {
    if tree.is_empty() {
        return Err(Error::EmptyTree);
    }
    let masked = mask(instance, target)?;
    let (mapping, flat) = tree.prepare(&masked)?;
    let concept_target = mapping.apply_to_flat_name(target);
    if tree.root_stats().get(&concept_target).is_none() {
        return Err(Error::UnknownAttribute(target.to_string()));
    }
    let path = tree.categorize_path_flat(&flat)?;
    for &id in path.iter().rev() {
        if let Some((value, confidence)) = most_likely(&tree.node(id).stats, &concept_target) {
            return Ok(Prediction {
                attribute: target.to_string(),
                value,
                confidence,
                concept: id,
            });
        }
    }
    Err(Error::UnknownAttribute(target.to_string()))
}

/// Predicts every attribute the selected concept knows but `instance` lacks.
/// Attribute names are reported in the instance's namespace where the match
/// links them back to an instance component.
pub fn predict_all_missing(tree: &ConceptTree, instance: &Instance) -> Result<Vec<Prediction>> {
    let (mapping, flat) = tree.prepare_nonempty(instance)?;
    let concept = tree.categorize_flat(&flat)?;
    let inverse = mapping.inverse();
    let stats = &tree.node(concept).stats;
    let mut out = Vec::new();
    for name in stats.attributes().keys() {
        if flat.contains(name) {
            continue;
        }
        if let Some((value, confidence)) = most_likely(stats, name) {
            out.push(Prediction {
                attribute: inverse.apply_to_flat_name(name),
                value,
                confidence,
                concept,
            });
        }
    }
    Ok(out)
}

/// Per-instance concept labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledClustering {
    pub labels: Vec<ConceptId>,
    /// Root-to-label path for each instance.
    pub paths: Vec<Vec<ConceptId>>,
    /// Splits actually performed.
    pub split_count: usize,
    pub requested_splits: usize,
}

impl LabeledClustering {
    pub fn clamped(&self) -> bool {
        self.split_count < self.requested_splits
    }

    pub fn label_set(&self) -> BTreeSet<ConceptId> {
        self.labels.iter().copied().collect()
    }

    /// `instance_index,label_id,path` with `/`-separated ids.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance_index,label_id,path\n");
        for (i, (label, path)) in self.labels.iter().zip(&self.paths).enumerate() {
            let path: Vec<String> = path.iter().map(|id| id.0.to_string()).collect();
            writeln!(out, "{i},{},{}", label.0, path.join("/")).unwrap();
        }
        out
    }
}

/// Full descent paths of a fixed set of instances through a frozen tree.
///
/// Each path follows the best child at every level down to a leaf, so an
/// instance labeled by a split concept always moves to one of its children.
pub struct SplitClusterer<'t> {
    tree: &'t ConceptTree,
    paths: Vec<Vec<ConceptId>>,
}

impl<'t> SplitClusterer<'t> {
    pub fn new(tree: &'t ConceptTree, instances: &[Instance]) -> Result<Self> {
        let mut paths = Vec::with_capacity(instances.len());
        for instance in instances {
            let (_, flat) = tree.prepare_nonempty(instance)?;
            tree.root_stats().check_compatible(&flat)?;
            let mut path = vec![tree.root()];
            while let Some(child) = tree.best_child(*path.last().unwrap(), &flat) {
                path.push(child);
            }
            paths.push(path);
        }
        Ok(SplitClusterer { tree, paths })
    }

    /// Labels after splitting the most general unsplit label `n_splits`
    /// times: shallowest first, then the larger concept, then the older one.
    /// Leaves are never split; the count is clamped when none remain.
    pub fn labels(&self, n_splits: usize) -> LabeledClustering {
        let mut level = vec![0usize; self.paths.len()];
        let mut performed = 0;
        while performed < n_splits {
            let candidates: BTreeSet<ConceptId> = self
                .paths
                .iter()
                .zip(&level)
                .map(|(p, &l)| p[l])
                .filter(|&id| !self.tree.node(id).is_leaf())
                .collect();
            let Some(target) = candidates.into_iter().min_by(|&a, &b| {
                let (na, nb) = (self.tree.node(a), self.tree.node(b));
                self.tree
                    .depth_of(a)
                    .cmp(&self.tree.depth_of(b))
                    .then(nb.count().cmp(&na.count()))
                    .then(a.cmp(&b))
            }) else {
                break;
            };
            for (path, l) in self.paths.iter().zip(level.iter_mut()) {
                if path[*l] == target {
                    *l += 1;
                }
            }
            performed += 1;
        }
        LabeledClustering {
            labels: self.paths.iter().zip(&level).map(|(p, &l)| p[l]).collect(),
            paths: self
                .paths
                .iter()
                .zip(&level)
                .map(|(p, &l)| p[..=l].to_vec())
                .collect(),
            split_count: performed,
            requested_splits: n_splits,
        }
    }
}

/// Flat clustering of `instances` on a fitted tree after `n_splits` splits.
pub fn cluster_flat(
    tree: &ConceptTree,
    instances: &[Instance],
    n_splits: usize,
) -> Result<LabeledClustering> {
    Ok(SplitClusterer::new(tree, instances)?.labels(n_splits))
}

/// Fits a fresh tree on a seeded shuffle of `instances`, then labels a second
/// shuffle on the frozen tree. One clustering per requested split count, all
/// from the same tree.
pub fn cluster_two_pass_multi(
    params: &TreeParams,
    instances: &[Instance],
    split_counts: &[usize],
    seed: u64,
) -> Result<Vec<LabeledClustering>> {
    if instances.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(&mut rng);
    let mut tree = ConceptTree::new(*params)?;
    for &i in &order {
        tree.fit(&instances[i])?;
    }
    order.shuffle(&mut rng);
    let shuffled: Vec<Instance> = order.iter().map(|&i| instances[i].clone()).collect();
    let clusterer = SplitClusterer::new(&tree, &shuffled)?;
    Ok(split_counts
        .iter()
        .map(|&n| {
            let c = clusterer.labels(n);
            let mut labels = vec![ConceptId(0); instances.len()];
            let mut paths = vec![Vec::new(); instances.len()];
            for (pos, &original) in order.iter().enumerate() {
                labels[original] = c.labels[pos];
                paths[original] = c.paths[pos].clone();
            }
            LabeledClustering { labels, paths, ..c }
        })
        .collect())
}

pub fn cluster_two_pass(
    params: &TreeParams,
    instances: &[Instance],
    n_splits: usize,
    seed: u64,
) -> Result<LabeledClustering> {
    Ok(
        cluster_two_pass_multi(params, instances, &[n_splits], seed)?
            .pop()
            .expect("one clustering per split count"),
    )
}
