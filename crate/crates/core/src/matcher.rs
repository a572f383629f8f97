//! Partial matching of instance components onto root-concept components.
//!
//! A mapping's quality is the expected number of correct guesses at the root
//! after the renamed instance is hypothetically added to it. The objective
//! splits into a mapping-independent base, one gain per (component, target)
//! pair and one gain per relation, which lets the search bound unfinished
//! mappings by taking every unmatched component's best individual gain.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::instance::{Attribute, Component, Instance, Mapping, Relation, Value, RELATION_TRUE};
use crate::params::TreeParams;
use crate::stats::ConceptStats;

/// Outcome of a match search.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    pub mapping: Mapping,
    /// Equals [`mapping_objective`] of `mapping`.
    pub objective: f64,
    pub nodes_expanded: usize,
}

/// A partial mapping together with its realized gain `g` and the optimistic
/// remaining gain `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchState {
    pub partial: BTreeMap<String, String>,
    pub unmatched: Vec<String>,
    pub g: f64,
    pub h: f64,
}

impl MatchState {
    pub fn bound(&self) -> f64 {
        self.g + self.h
    }
}

/// Expected correct guesses at the root after adding `instance` renamed by
/// `mapping`. The root itself is not modified.
pub fn mapping_objective(
    root: &ConceptStats,
    instance: &Instance,
    mapping: &Mapping,
    params: &TreeParams,
) -> Result<f64> {
    let flat = instance.flatten(mapping)?;
    root.check_compatible(&flat)?;
    Ok(root.ecg_with(&flat, params))
}

/// Upper bound on the objective of any completion of `partial`.
pub fn heuristic_upper_bound(
    root: &ConceptStats,
    instance: &Instance,
    partial: &BTreeMap<String, String>,
    params: &TreeParams,
) -> Result<f64> {
    Ok(Matcher::new(root, instance, params)?
        .state(partial)?
        .bound())
}

/// Beam search by default, A* when `params.exact_match_astar` is set.
pub fn best_match(
    root: &ConceptStats,
    instance: &Instance,
    params: &TreeParams,
) -> Result<MatchResult> {
    let matcher = Matcher::new(root, instance, params)?;
    if params.exact_match_astar {
        matcher.astar()
    } else {
        matcher.beam(params.beam_width)
    }
}

/// Names the root uses for components: leading segments of dotted attribute
/// names and of relation arguments.
pub fn concept_component_names(root: &ConceptStats) -> BTreeSet<String> {
    let mut plain = BTreeSet::new();
    let mut names = BTreeSet::new();
    for name in root.attributes().keys() {
        if name.starts_with('(') {
            if let Ok(rel) = Relation::parse(name) {
                for arg in rel.args() {
                    names.insert(head(arg).to_string());
                }
            }
        } else if let Some((h, _)) = name.split_once('.') {
            names.insert(h.to_string());
        } else {
            plain.insert(name.clone());
        }
    }
    names.retain(|n| !plain.contains(n));
    names
}

fn head(path: &str) -> &str {
    path.split_once('.').map_or(path, |(h, _)| h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Target(usize),
    Fresh,
}

#[derive(Clone, Debug)]
struct RelationTerm {
    relation: Relation,
    /// Component indices (expansion order) of the argument heads.
    heads: Vec<usize>,
    bound: f64,
}

#[derive(Clone, Debug)]
struct Node {
    assign: Vec<Option<Slot>>,
    used: Vec<bool>,
    depth: usize,
    g: f64,
    f: f64,
}

impl Node {
    fn non_fresh(&self) -> usize {
        self.assign
            .iter()
            .filter(|s| matches!(s, Some(Slot::Target(_))))
            .count()
    }

    fn lex_key(&self) -> impl Iterator<Item = usize> + '_ {
        self.assign.iter().map(|s| match s {
            Some(Slot::Target(t)) => *t,
            Some(Slot::Fresh) => usize::MAX - 1,
            None => usize::MAX,
        })
    }

    /// Preference among equally scored states: fewer concept assignments,
    /// then lexicographically smaller target indices.
    fn tie_order(&self, other: &Node) -> Ordering {
        self.non_fresh()
            .cmp(&other.non_fresh())
            .then_with(|| self.lex_key().cmp(other.lex_key()))
    }
}

/// Heap entry: greater means popped first.
struct Frontier(Node);

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .f
            .total_cmp(&other.0.f)
            .then(self.0.depth.cmp(&other.0.depth))
            .then_with(|| other.0.tie_order(&self.0))
    }
}

/// Precomputed search problem for one (root, instance) pair.
pub struct Matcher<'a> {
    root: &'a ConceptStats,
    instance: &'a Instance,
    params: &'a TreeParams,
    components: Vec<String>,
    targets: Vec<String>,
    gains: Vec<Vec<Option<f64>>>,
    fresh_gains: Vec<f64>,
    fresh_names: Vec<String>,
    relations: Vec<RelationTerm>,
    base: f64,
}

impl<'a> Matcher<'a> {
    pub fn new(
        root: &'a ConceptStats,
        instance: &'a Instance,
        params: &'a TreeParams,
    ) -> Result<Self> {
        let mut base = root.ecg_diluted(params);
        for (name, value) in instance.values() {
            base += root
                .attribute_gain(name, value, params)
                .ok_or_else(|| Error::TypeConflict(name.to_string()))?;
        }

        let mut components: Vec<(&str, &Component)> = instance.components().collect();
        components.sort_by(|a, b| b.1.leaf_count().cmp(&a.1.leaf_count()).then(a.0.cmp(b.0)));
        let index: HashMap<&str, usize> = components
            .iter()
            .enumerate()
            .map(|(i, (n, _))| (*n, i))
            .collect();

        let value_names: BTreeSet<&str> = instance.values().map(|(n, _)| n).collect();
        let targets: Vec<String> = concept_component_names(root)
            .into_iter()
            .filter(|t| !value_names.contains(t.as_str()))
            .collect();

        let reserved: BTreeSet<&str> = root
            .attributes()
            .keys()
            .filter(|n| !n.starts_with('('))
            .map(|n| head(n))
            .chain(targets.iter().map(String::as_str))
            .chain(value_names.iter().copied())
            .collect();
        let fresh_names: Vec<String> = (1..)
            .map(|i| format!("o{i}"))
            .filter(|n| !reserved.contains(n.as_str()))
            .take(components.len())
            .collect();

        let mut gains = Vec::with_capacity(components.len());
        let mut fresh_gains = Vec::with_capacity(components.len());
        for (_, component) in &components {
            let mut leaves = Vec::new();
            collect_leaves(component, "", &mut leaves);
            let gain_under = |prefix: &str| -> Option<f64> {
                leaves
                    .iter()
                    .map(|(suffix, v)| {
                        root.attribute_gain(&format!("{prefix}.{suffix}"), v, params)
                    })
                    .sum()
            };
            gains.push(targets.iter().map(|t| gain_under(t)).collect());
            fresh_gains.push(gain_under(&fresh_names[0]).expect("fresh names are unseen"));
        }

        let true_value = Value::nominal(RELATION_TRUE);
        let unseen = unseen_nominal_gain(root);
        let mut bounds: HashMap<(String, usize), f64> = HashMap::new();
        for name in root.attributes().keys().filter(|n| n.starts_with('(')) {
            if let (Ok(rel), Some(gain)) = (
                Relation::parse(name),
                root.attribute_gain(name, &true_value, params),
            ) {
                let entry = bounds
                    .entry((rel.predicate().to_string(), rel.args().len()))
                    .or_insert(unseen);
                *entry = entry.max(gain);
            }
        }
        let relations = instance
            .relations()
            .iter()
            .map(|rel| {
                let mut heads: Vec<usize> = rel.args().iter().map(|a| index[head(a)]).collect();
                heads.sort_unstable();
                heads.dedup();
                let bound = bounds
                    .get(&(rel.predicate().to_string(), rel.args().len()))
                    .copied()
                    .unwrap_or(unseen);
                RelationTerm {
                    relation: rel.clone(),
                    heads,
                    bound,
                }
            })
            .collect();

        Ok(Matcher {
            root,
            instance,
            params,
            components: components.iter().map(|(n, _)| n.to_string()).collect(),
            targets,
            gains,
            fresh_gains,
            fresh_names,
            relations,
            base,
        })
    }

    /// Instance components in expansion order.
    pub fn components(&self) -> &[String] {
        &self.components
    }

    /// Concept component names available as targets.
    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    /// Evaluates a partial mapping given by name. Targets that are not
    /// concept components count as fresh.
    pub fn state(&self, partial: &BTreeMap<String, String>) -> Result<MatchState> {
        let mut assign = vec![None; self.components.len()];
        let mut used = vec![false; self.targets.len()];
        let mut seen = BTreeSet::new();
        for (comp, target) in partial {
            let i = self
                .components
                .iter()
                .position(|c| c == comp)
                .ok_or_else(|| Error::MappingIncomplete(comp.clone()))?;
            if !seen.insert(target) {
                return Err(Error::MappingNotInjective(target.clone()));
            }
            assign[i] = Some(match self.targets.iter().position(|t| t == target) {
                Some(t) => {
                    if self.gains[i][t].is_none() {
                        return Err(Error::TypeConflict(format!("{target}.*")));
                    }
                    used[t] = true;
                    Slot::Target(t)
                }
                None => Slot::Fresh,
            });
        }
        let node = self.node(assign, used, 0);
        Ok(MatchState {
            partial: partial.clone(),
            unmatched: self
                .components
                .iter()
                .zip(&node.assign)
                .filter(|(_, s)| s.is_none())
                .map(|(c, _)| c.clone())
                .collect(),
            g: node.g,
            h: node.f - node.g,
        })
    }

    fn node(&self, assign: Vec<Option<Slot>>, used: Vec<bool>, depth: usize) -> Node {
        let mut g = self.base;
        let mut h = 0.0;
        for (i, slot) in assign.iter().enumerate() {
            match slot {
                Some(Slot::Target(t)) => g += self.gains[i][*t].unwrap(),
                Some(Slot::Fresh) => g += self.fresh_gains[i],
                None => h += self.best_gain(i, &used),
            }
        }
        for rel in &self.relations {
            if rel.heads.iter().all(|&i| assign[i].is_some()) {
                g += self.relation_gain(rel, &assign);
            } else {
                h += rel.bound;
            }
        }
        Node {
            assign,
            used,
            depth,
            g,
            f: g + h,
        }
    }

    fn best_gain(&self, component: usize, used: &[bool]) -> f64 {
        self.gains[component]
            .iter()
            .zip(used)
            .filter_map(|(g, &u)| if u { None } else { *g })
            .fold(self.fresh_gains[component], f64::max)
    }

    fn relation_gain(&self, rel: &RelationTerm, assign: &[Option<Slot>]) -> f64 {
        let mut fresh = false;
        let renamed = rel.relation.renamed(|c| {
            let i = self.components.iter().position(|n| n == c).unwrap();
            match assign[i] {
                Some(Slot::Target(t)) => self.targets[t].clone(),
                _ => {
                    fresh = true;
                    String::new()
                }
            }
        });
        if fresh {
            return unseen_nominal_gain(self.root);
        }
        self.root
            .attribute_gain(
                &renamed.to_string(),
                &Value::nominal(RELATION_TRUE),
                self.params,
            )
            .unwrap_or_else(|| unseen_nominal_gain(self.root))
    }

    fn expand(&self, node: &Node) -> Vec<Node> {
        let i = node.depth;
        let mut out = Vec::with_capacity(self.targets.len() + 1);
        for (t, gain) in self.gains[i].iter().enumerate() {
            if node.used[t] || gain.is_none() {
                continue;
            }
            let mut assign = node.assign.clone();
            let mut used = node.used.clone();
            assign[i] = Some(Slot::Target(t));
            used[t] = true;
            out.push(self.node(assign, used, i + 1));
        }
        let mut assign = node.assign.clone();
        assign[i] = Some(Slot::Fresh);
        out.push(self.node(assign, node.used.clone(), i + 1));
        out
    }

    fn initial(&self) -> Node {
        self.node(
            vec![None; self.components.len()],
            vec![false; self.targets.len()],
            0,
        )
    }

    fn to_mapping(&self, node: &Node) -> Mapping {
        let mut fresh = self.fresh_names.iter();
        let pairs = self
            .components
            .iter()
            .zip(&node.assign)
            .map(|(c, slot)| {
                let target = match slot {
                    Some(Slot::Target(t)) => self.targets[*t].clone(),
                    _ => fresh.next().expect("one fresh name per component").clone(),
                };
                (c.clone(), target)
            })
            .collect();
        Mapping::new(pairs).expect("targets are distinct")
    }

    fn finish(&self, node: &Node, nodes_expanded: usize) -> Result<MatchResult> {
        let mapping = self.to_mapping(node);
        let objective = mapping_objective(self.root, self.instance, &mapping, self.params)?;
        Ok(MatchResult {
            mapping,
            objective,
            nodes_expanded,
        })
    }

    /// Beam search keeping the `width` best states per level.
    pub fn beam(&self, width: usize) -> Result<MatchResult> {
        let width = width.max(1);
        let mut beam = vec![self.initial()];
        let mut expanded = 0;
        for _ in 0..self.components.len() {
            let mut next: Vec<Node> = Vec::new();
            for node in &beam {
                expanded += 1;
                next.extend(self.expand(node));
            }
            next.sort_by(|a, b| b.f.total_cmp(&a.f).then_with(|| a.tie_order(b)));
            next.truncate(width);
            beam = next;
        }
        let mut best: Option<MatchResult> = None;
        for node in &beam {
            let result = self.finish(node, expanded)?;
            if best.as_ref().is_none_or(|b| result.objective > b.objective) {
                best = Some(result);
            }
        }
        Ok(best.expect("beam is never empty"))
    }

    /// Best-first search with the admissible bound. Keeps popping states
    /// whose bound is within rounding of the best complete mapping and returns
    /// the one with the largest directly evaluated objective.
    pub fn astar(&self) -> Result<MatchResult> {
        let mut heap = BinaryHeap::new();
        heap.push(Frontier(self.initial()));
        let mut expanded = 0;
        let mut best: Option<MatchResult> = None;
        while let Some(Frontier(node)) = heap.pop() {
            if let Some(b) = &best {
                let slack = 1e-9 * b.objective.abs().max(1.0);
                if node.f < b.objective - slack {
                    break;
                }
            }
            if node.depth == self.components.len() {
                let result = self.finish(&node, 0)?;
                if best.as_ref().is_none_or(|b| result.objective > b.objective) {
                    best = Some(result);
                }
                continue;
            }
            expanded += 1;
            for child in self.expand(&node) {
                heap.push(Frontier(child));
            }
        }
        let mut best = best.expect("search space always holds the all-fresh mapping");
        best.nodes_expanded = expanded;
        Ok(best)
    }
}

fn unseen_nominal_gain(root: &ConceptStats) -> f64 {
    let p = 1.0 / (root.count() + 1) as f64;
    p * p
}

fn collect_leaves(component: &Component, prefix: &str, out: &mut Vec<(String, Value)>) {
    for (name, attr) in component.attributes() {
        let path = if prefix.is_empty() {
            name.clone()
        } else {
            format!("{prefix}.{name}")
        };
        match attr {
            Attribute::Value(v) => out.push((path, v.clone())),
            Attribute::Component(c) => collect_leaves(c, &path, out),
        }
    }
}
