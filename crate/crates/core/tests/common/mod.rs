//! Generators and brute-force oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use arbor::{
    mapping_objective, Attribute, Component, ConceptStats, Instance, Mapping, Matcher, Relation,
    TreeParams, Value,
};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const TOKENS: [&str; 4] = ["red", "blue", "green", "grey"];

fn random_value<R: Rng>(rng: &mut R) -> Value {
    if rng.random_bool(0.5) {
        Value::nominal(*TOKENS.choose(rng).unwrap())
    } else {
        Value::Numeric((rng.random_range(-20..=20) as f64) * 0.25)
    }
}

fn random_component<R: Rng>(rng: &mut R, depth: usize) -> Component {
    let mut attrs = BTreeMap::new();
    for i in 0..rng.random_range(1..=3) {
        attrs.insert(format!("v{i}"), Attribute::Value(random_value(rng)));
    }
    if depth > 1 && rng.random_bool(0.4) {
        attrs.insert(
            "part".into(),
            Attribute::Component(random_component(rng, depth - 1)),
        );
    }
    Component::new(attrs).unwrap()
}

/// A random instance with nesting up to depth 2 and relations whose
/// arguments may point into nested components.
pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let mut attrs = BTreeMap::new();
    for i in 0..rng.random_range(0..=2) {
        attrs.insert(format!("g{i}"), Attribute::Value(random_value(rng)));
    }
    let n = rng.random_range(0..=3);
    for i in 0..n {
        attrs.insert(
            format!("k{i}"),
            Attribute::Component(random_component(rng, 2)),
        );
    }
    let mut paths: Vec<String> = Vec::new();
    for (name, attr) in &attrs {
        if let Attribute::Component(c) = attr {
            paths.push(name.clone());
            if matches!(c.attributes().get("part"), Some(Attribute::Component(_))) {
                paths.push(format!("{name}.part"));
            }
        }
    }
    let mut relations = Vec::new();
    if !paths.is_empty() {
        for _ in 0..rng.random_range(0..=3) {
            let pred = *["on", "left", "near"].choose(rng).unwrap();
            let arity = rng.random_range(1..=2);
            let args = (0..arity)
                .map(|_| paths.choose(rng).unwrap().clone())
                .collect();
            relations.push(Relation::new(pred, args).unwrap());
        }
    }
    Instance::new(attrs, relations).unwrap()
}

/// Flat components named `prefix1..prefixN` with a nominal `t` and numeric `x`,
/// plus random `on` relations between them.
pub fn random_match_instance<R: Rng>(rng: &mut R, prefix: &str, n: usize) -> Instance {
    let mut attrs = BTreeMap::new();
    for i in 1..=n {
        let mut inner = BTreeMap::new();
        inner.insert(
            "t".into(),
            Attribute::Value(Value::nominal(*TOKENS[..3].choose(rng).unwrap())),
        );
        if rng.random_bool(0.7) {
            inner.insert(
                "x".into(),
                Attribute::Value(Value::Numeric(rng.random_range(0..8) as f64 * 0.5)),
            );
        }
        attrs.insert(
            format!("{prefix}{i}"),
            Attribute::Component(Component::new(inner).unwrap()),
        );
    }
    let mut relations = Vec::new();
    if n >= 2 {
        for _ in 0..rng.random_range(0..=2) {
            let a = rng.random_range(1..=n);
            let b = rng.random_range(1..=n);
            if a != b {
                relations.push(
                    Relation::new("on", vec![format!("{prefix}{a}"), format!("{prefix}{b}")])
                        .unwrap(),
                );
            }
        }
    }
    Instance::new(attrs, relations).unwrap()
}

/// Maximum objective over every injective assignment of instance components
/// to concept components or fresh names. Fresh names follow the documented
/// convention: `o1, o2, ...` skipping names the concept or instance already
/// use, handed out in the matcher's component order.
pub fn exhaustive_best(root: &ConceptStats, instance: &Instance, params: &TreeParams) -> f64 {
    let matcher = Matcher::new(root, instance, params).unwrap();
    let order: Vec<String> = matcher.components().to_vec();

    let value_names: BTreeSet<String> = instance.values().map(|(n, _)| n.to_string()).collect();
    let concept_heads: BTreeSet<String> = root
        .attributes()
        .keys()
        .filter(|n| !n.starts_with('('))
        .map(|n| n.split('.').next().unwrap().to_string())
        .collect();
    let targets: Vec<String> = root
        .attributes()
        .keys()
        .filter(|n| !n.starts_with('(') && n.contains('.'))
        .map(|n| n.split('.').next().unwrap().to_string())
        .filter(|n| !value_names.contains(n))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let fresh: Vec<String> = (1..)
        .map(|i| format!("o{i}"))
        .filter(|n| !concept_heads.contains(n) && !value_names.contains(n))
        .take(order.len())
        .collect();

    let mut best = f64::NEG_INFINITY;
    let mut choice: Vec<Option<usize>> = Vec::new();
    enumerate(&order, &targets, &mut choice, &mut |choice| {
        let mut next_fresh = fresh.iter();
        let pairs: BTreeMap<String, String> = order
            .iter()
            .zip(choice)
            .map(|(c, slot)| {
                let target = match slot {
                    Some(t) => targets[*t].clone(),
                    None => next_fresh.next().unwrap().clone(),
                };
                (c.clone(), target)
            })
            .collect();
        let mapping = Mapping::new(pairs).unwrap();
        if let Ok(v) = mapping_objective(root, instance, &mapping, params) {
            if v > best {
                best = v;
            }
        }
    });
    best
}

fn enumerate(
    order: &[String],
    targets: &[String],
    choice: &mut Vec<Option<usize>>,
    visit: &mut dyn FnMut(&[Option<usize>]),
) {
    if choice.len() == order.len() {
        visit(choice);
        return;
    }
    choice.push(None);
    enumerate(order, targets, choice, visit);
    choice.pop();
    for t in 0..targets.len() {
        if !choice.contains(&Some(t)) {
            choice.push(Some(t));
            enumerate(order, targets, choice, visit);
            choice.pop();
        }
    }
}

/// Two-pass mean and population standard deviation.
pub fn batch_mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let diff = (a - b).abs();
    diff <= tol * a.abs().max(b.abs()) || diff < 1e-12
}

/// Nominal attribute values at a flat path, one per instance.
pub fn nominal_at(instances: &[Instance], path: &str) -> Vec<String> {
    instances
        .iter()
        .map(|x| {
            x.flatten_identity()
                .get(path)
                .and_then(Value::as_nominal)
                .unwrap_or_default()
                .to_string()
        })
        .collect()
}
