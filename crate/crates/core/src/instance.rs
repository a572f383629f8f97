//! Structured and flat instance representations.
//!
//! A structured [`Instance`] holds nominal and numeric values, nested
//! [`Component`]s and [`Relation`]s among components. Flattening turns it into
//! a [`FlatInstance`] whose keys are dot paths (`block1.type`) or
//! parenthesized relation tuples (`(on block1 block2)`) valued `"True"`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Map;

use crate::error::{Error, Result};

/// Token carried by every flattened relation attribute.
pub const RELATION_TRUE: &str = "True";

/// A leaf attribute value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Numeric(f64),
    Nominal(String),
}

impl Value {
    pub fn nominal(token: impl Into<String>) -> Self {
        Value::Nominal(token.into())
    }

    pub fn as_nominal(&self) -> Option<&str> {
        match self {
            Value::Nominal(s) => Some(s),
            Value::Numeric(_) => None,
        }
    }

    pub fn as_numeric(&self) -> Option<f64> {
        match self {
            Value::Numeric(x) => Some(*x),
            Value::Nominal(_) => None,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match self {
            Value::Numeric(x) if !x.is_finite() => Err(Error::NonFinite(name.to_string())),
            Value::Nominal(s) if s.is_empty() => Err(Error::InvalidAttribute {
                name: name.to_string(),
                reason: "nominal token is empty".into(),
            }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nominal(s) => f.write_str(s),
            Value::Numeric(x) => write!(f, "{x}"),
        }
    }
}

/// Either a leaf value or a nested component.
#[derive(Clone, Debug, PartialEq)]
pub enum Attribute {
    Value(Value),
    Component(Component),
}

/// An object inside an instance. Its name is the key it is stored under.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Component {
    attributes: BTreeMap<String, Attribute>,
}

impl Component {
    pub fn new(attributes: BTreeMap<String, Attribute>) -> Result<Self> {
        for (name, attr) in &attributes {
            validate_name(name)?;
            if let Attribute::Value(v) = attr {
                v.validate(name)?;
            }
        }
        Ok(Self { attributes })
    }

    pub fn attributes(&self) -> &BTreeMap<String, Attribute> {
        &self.attributes
    }

    /// Number of leaf values below this component, at any depth.
    pub fn leaf_count(&self) -> usize {
        self.attributes
            .values()
            .map(|a| match a {
                Attribute::Value(_) => 1,
                Attribute::Component(c) => c.leaf_count(),
            })
            .sum()
    }

    fn resolve(&self, path: &[&str]) -> bool {
        match path.split_first() {
            None => true,
            Some((head, rest)) => match self.attributes.get(*head) {
                Some(Attribute::Component(c)) => c.resolve(rest),
                _ => false,
            },
        }
    }

    fn flatten_into(&self, prefix: &str, out: &mut BTreeMap<String, Value>) {
        for (name, attr) in &self.attributes {
            let path = format!("{prefix}.{name}");
            match attr {
                Attribute::Value(v) => {
                    out.insert(path, v.clone());
                }
                Attribute::Component(c) => c.flatten_into(&path, out),
            }
        }
    }
}

/// A predicate over component identifiers, e.g. `(on block1 block2)`.
///
/// Arguments name top-level components or dot paths into nested ones.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Relation {
    predicate: String,
    args: Vec<String>,
}

impl Relation {
    pub fn new(predicate: impl Into<String>, args: Vec<String>) -> Result<Self> {
        let predicate = predicate.into();
        let rel = Relation { predicate, args };
        if rel.args.is_empty() || validate_name(&rel.predicate).is_err() {
            return Err(Error::MalformedRelation(rel.to_string()));
        }
        for arg in &rel.args {
            if arg.is_empty() || arg.split('.').any(|seg| validate_name(seg).is_err()) {
                return Err(Error::MalformedRelation(rel.to_string()));
            }
        }
        Ok(rel)
    }

    /// Parses the parenthesized form `(pred a b ...)`.
    pub fn parse(text: &str) -> Result<Self> {
        let inner = text
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| Error::MalformedRelation(text.to_string()))?;
        let mut tokens = inner.split_whitespace();
        let predicate = tokens
            .next()
            .ok_or_else(|| Error::MalformedRelation(text.to_string()))?;
        let args = tokens.map(str::to_string).collect();
        Relation::new(predicate, args).map_err(|_| Error::MalformedRelation(text.to_string()))
    }

    pub fn predicate(&self) -> &str {
        &self.predicate
    }

    pub fn args(&self) -> &[String] {
        &self.args
    }

    /// Rewrites the leading component segment of every argument.
    pub fn renamed(&self, mut rename: impl FnMut(&str) -> String) -> Relation {
        let args = self
            .args
            .iter()
            .map(|arg| match arg.split_once('.') {
                Some((head, rest)) => format!("{}.{rest}", rename(head)),
                None => rename(arg),
            })
            .collect();
        Relation {
            predicate: self.predicate.clone(),
            args,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for arg in &self.args {
            write!(f, " {arg}")?;
        }
        f.write_str(")")
    }
}

/// A structured example: values, components and relations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Instance {
    attributes: BTreeMap<String, Attribute>,
    relations: BTreeSet<Relation>,
}

impl Instance {
    pub fn new(
        attributes: BTreeMap<String, Attribute>,
        relations: impl IntoIterator<Item = Relation>,
    ) -> Result<Self> {
        for (name, attr) in &attributes {
            validate_name(name)?;
            match attr {
                Attribute::Value(v) => v.validate(name)?,
                Attribute::Component(_) => {}
            }
        }
        let instance = Instance {
            attributes,
            relations: relations.into_iter().collect(),
        };
        instance.check_relations()?;
        Ok(instance)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let json: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        Self::from_json(&json)
    }

    /// Nested objects become components, `"(pred a b)"` keys become relations,
    /// numbers become numeric values and strings or booleans become nominals.
    pub fn from_json(json: &serde_json::Value) -> Result<Self> {
        let object = json.as_object().ok_or(Error::NotAnObject)?;
        let mut attributes = BTreeMap::new();
        let mut relations = BTreeSet::new();
        for (key, value) in object {
            if key.starts_with('(') {
                let relation = Relation::parse(key)?;
                match value {
                    serde_json::Value::Bool(true) => {}
                    serde_json::Value::String(s) if s == RELATION_TRUE => {}
                    _ => {
                        return Err(Error::InvalidAttribute {
                            name: key.clone(),
                            reason: "relation keys must carry the value true".into(),
                        })
                    }
                }
                relations.insert(relation);
            } else {
                validate_name(key)?;
                attributes.insert(key.clone(), attribute_from_json(key, value)?);
            }
        }
        let instance = Instance {
            attributes,
            relations,
        };
        instance.check_relations()?;
        Ok(instance)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut object = attributes_to_json(&self.attributes);
        for relation in &self.relations {
            object.insert(relation.to_string(), serde_json::Value::Bool(true));
        }
        serde_json::Value::Object(object)
    }

    pub fn attributes(&self) -> &BTreeMap<String, Attribute> {
        &self.attributes
    }

    pub fn relations(&self) -> &BTreeSet<Relation> {
        &self.relations
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty() && self.relations.is_empty()
    }

    /// Top-level components in name order.
    pub fn components(&self) -> impl Iterator<Item = (&str, &Component)> {
        self.attributes
            .iter()
            .filter_map(|(name, attr)| match attr {
                Attribute::Component(c) => Some((name.as_str(), c)),
                Attribute::Value(_) => None,
            })
    }

    /// Top-level leaf values in name order.
    pub fn values(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.attributes
            .iter()
            .filter_map(|(name, attr)| match attr {
                Attribute::Value(v) => Some((name.as_str(), v)),
                Attribute::Component(_) => None,
            })
    }

    fn check_relations(&self) -> Result<()> {
        for relation in &self.relations {
            for arg in relation.args() {
                let path: Vec<&str> = arg.split('.').collect();
                let resolved = match self.attributes.get(path[0]) {
                    Some(Attribute::Component(c)) => c.resolve(&path[1..]),
                    _ => false,
                };
                if !resolved {
                    return Err(Error::UnknownComponent {
                        relation: relation.to_string(),
                        component: arg.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Renames top-level components per `mapping`, rewriting relation arguments.
    pub fn rename(&self, mapping: &Mapping) -> Result<Instance> {
        let mut attributes = BTreeMap::new();
        for (name, attr) in &self.attributes {
            if let Attribute::Value(v) = attr {
                attributes.insert(name.clone(), Attribute::Value(v.clone()));
            }
        }
        for (name, component) in self.components() {
            let target = mapping
                .get(name)
                .ok_or_else(|| Error::MappingIncomplete(name.to_string()))?;
            validate_name(target)?;
            if attributes
                .insert(target.to_string(), Attribute::Component(component.clone()))
                .is_some()
            {
                return Err(Error::NameCollision(target.to_string()));
            }
        }
        let relations = self
            .relations
            .iter()
            .map(|r| r.renamed(|c| mapping.get(c).unwrap_or(c).to_string()))
            .collect();
        Ok(Instance {
            attributes,
            relations,
        })
    }

    /// Renames per `mapping`, then replaces components with dot-path keys and
    /// relations with `"(pred a b)": "True"` entries.
    pub fn flatten(&self, mapping: &Mapping) -> Result<FlatInstance> {
        let renamed = self.rename(mapping)?;
        let mut out = BTreeMap::new();
        for (name, attr) in &renamed.attributes {
            match attr {
                Attribute::Value(v) => {
                    out.insert(name.clone(), v.clone());
                }
                Attribute::Component(c) => c.flatten_into(name, &mut out),
            }
        }
        for relation in &renamed.relations {
            let key = relation.to_string();
            if out
                .insert(key.clone(), Value::nominal(RELATION_TRUE))
                .is_some()
            {
                return Err(Error::NameCollision(key));
            }
        }
        Ok(FlatInstance(out))
    }

    /// Flattens under the identity mapping.
    pub fn flatten_identity(&self) -> FlatInstance {
        self.flatten(&Mapping::identity(self))
            .expect("identity mapping is always valid")
    }
}

fn attribute_from_json(name: &str, value: &serde_json::Value) -> Result<Attribute> {
    use serde_json::Value as J;
    let attr = match value {
        J::Object(map) => {
            let mut attributes = BTreeMap::new();
            for (key, inner) in map {
                validate_name(key)?;
                attributes.insert(key.clone(), attribute_from_json(key, inner)?);
            }
            Attribute::Component(Component { attributes })
        }
        J::Number(n) => {
            let x = n
                .as_f64()
                .ok_or_else(|| Error::NonFinite(name.to_string()))?;
            let v = Value::Numeric(x);
            v.validate(name)?;
            Attribute::Value(v)
        }
        J::String(s) => {
            let v = Value::Nominal(s.clone());
            v.validate(name)?;
            Attribute::Value(v)
        }
        J::Bool(b) => Attribute::Value(Value::nominal(if *b { "True" } else { "False" })),
        J::Null | J::Array(_) => {
            return Err(Error::InvalidAttribute {
                name: name.to_string(),
                reason: "only objects, numbers, strings and booleans are supported".into(),
            })
        }
    };
    Ok(attr)
}

fn attributes_to_json(attributes: &BTreeMap<String, Attribute>) -> Map<String, serde_json::Value> {
    attributes
        .iter()
        .map(|(name, attr)| {
            let json = match attr {
                Attribute::Value(Value::Nominal(s)) => serde_json::Value::String(s.clone()),
                Attribute::Value(Value::Numeric(x)) => serde_json::Value::from(*x),
                Attribute::Component(c) => {
                    serde_json::Value::Object(attributes_to_json(&c.attributes))
                }
            };
            (name.clone(), json)
        })
        .collect()
}

/// Attribute and component names may not contain the characters the flat
/// naming scheme reserves.
pub(crate) fn validate_name(name: &str) -> Result<()> {
    let bad = name.is_empty()
        || name
            .chars()
            .any(|c| c == '.' || c == '(' || c == ')' || c.is_whitespace());
    if bad {
        return Err(Error::InvalidAttribute {
            name: name.to_string(),
            reason: "names must be non-empty and free of '.', '(', ')' and whitespace".into(),
        });
    }
    Ok(())
}

/// An instance with no structure: flat names to leaf values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlatInstance(BTreeMap<String, Value>);

impl FlatInstance {
    pub fn new(attributes: BTreeMap<String, Value>) -> Self {
        FlatInstance(attributes)
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Value) -> Option<Value> {
        self.0.insert(name.into(), value)
    }

    pub fn remove(&mut self, name: &str) -> Option<Value> {
        self.0.remove(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_map(&self) -> &BTreeMap<String, Value> {
        &self.0
    }

    /// Rebuilds components from dot paths and relations from parenthesized
    /// names. Components named only as relation arguments come back empty.
    pub fn unflatten(&self) -> Result<Instance> {
        let mut root = Component::default();
        let mut relations = BTreeSet::new();
        for (name, value) in &self.0 {
            if name.starts_with('(') {
                if value.as_nominal() != Some(RELATION_TRUE) {
                    return Err(Error::InvalidAttribute {
                        name: name.clone(),
                        reason: "relation attributes must carry the value \"True\"".into(),
                    });
                }
                relations.insert(Relation::parse(name)?);
                continue;
            }
            value.validate(name)?;
            let segments: Vec<&str> = name.split('.').collect();
            for seg in &segments {
                validate_name(seg)?;
            }
            let (leaf, parents) = segments.split_last().expect("split yields one segment");
            let holder = descend(&mut root, parents, name)?;
            match holder.attributes.get(*leaf) {
                Some(_) => return Err(Error::AmbiguousName(name.clone())),
                None => {
                    holder
                        .attributes
                        .insert(leaf.to_string(), Attribute::Value(value.clone()));
                }
            }
        }
        for relation in &relations {
            for arg in relation.args() {
                let segments: Vec<&str> = arg.split('.').collect();
                descend(&mut root, &segments, arg)?;
            }
        }
        Ok(Instance {
            attributes: root.attributes,
            relations,
        })
    }
}

impl FromIterator<(String, Value)> for FlatInstance {
    fn from_iter<I: IntoIterator<Item = (String, Value)>>(iter: I) -> Self {
        FlatInstance(iter.into_iter().collect())
    }
}

fn descend<'a>(
    mut node: &'a mut Component,
    path: &[&str],
    full: &str,
) -> Result<&'a mut Component> {
    for seg in path {
        let entry = node
            .attributes
            .entry(seg.to_string())
            .or_insert_with(|| Attribute::Component(Component::default()));
        node = match entry {
            Attribute::Component(c) => c,
            Attribute::Value(_) => return Err(Error::AmbiguousName(full.to_string())),
        };
    }
    Ok(node)
}

/// Injective renaming of instance component names.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mapping {
    pairs: BTreeMap<String, String>,
}

impl Mapping {
    pub fn new(pairs: BTreeMap<String, String>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for target in pairs.values() {
            if !seen.insert(target) {
                return Err(Error::MappingNotInjective(target.clone()));
            }
        }
        Ok(Mapping { pairs })
    }

    pub fn identity(instance: &Instance) -> Self {
        Mapping {
            pairs: instance
                .components()
                .map(|(name, _)| (name.to_string(), name.to_string()))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.pairs.get(name).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn inverse(&self) -> Mapping {
        Mapping {
            pairs: self
                .pairs
                .iter()
                .map(|(k, v)| (v.clone(), k.clone()))
                .collect(),
        }
    }

    /// Rewrites a flat attribute name from instance names to target names.
    /// Unmapped prefixes pass through untouched.
    pub fn apply_to_flat_name(&self, name: &str) -> String {
        if name.starts_with('(') {
            return match Relation::parse(name) {
                Ok(r) => r
                    .renamed(|c| self.get(c).unwrap_or(c).to_string())
                    .to_string(),
                Err(_) => name.to_string(),
            };
        }
        match name.split_once('.') {
            Some((head, rest)) => match self.get(head) {
                Some(target) => format!("{target}.{rest}"),
                None => name.to_string(),
            },
            None => name.to_string(),
        }
    }
}
