//! Per-concept probability tables and the expected-correct-guesses measure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{FlatInstance, Value};
use crate::params::TreeParams;

/// Running count, mean and sum of squared deviations of a numeric attribute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl NumericStats {
    pub fn single(x: f64) -> Self {
        NumericStats {
            n: 1,
            mean: x,
            m2: 0.0,
        }
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn pushed(mut self, x: f64) -> Self {
        self.push(x);
        self
    }

    /// Parallel combination of two summaries.
    pub fn combine(&self, other: &NumericStats) -> NumericStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let nf = n as f64;
        let mean = self.mean + delta * (other.n as f64 / nf);
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64 / nf);
        NumericStats { n, mean, m2 }
    }

    /// Population variance; zero for fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0)
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }
}

/// Statistics for one flat attribute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrStats {
    Nominal(BTreeMap<String, u64>),
    Numeric(NumericStats),
}

impl AttrStats {
    fn from_value(value: &Value) -> AttrStats {
        match value {
            Value::Nominal(s) => AttrStats::Nominal(BTreeMap::from([(s.clone(), 1)])),
            Value::Numeric(x) => AttrStats::Numeric(NumericStats::single(*x)),
        }
    }

    fn accepts(&self, value: &Value) -> bool {
        matches!(
            (self, value),
            (AttrStats::Nominal(_), Value::Nominal(_)) | (AttrStats::Numeric(_), Value::Numeric(_))
        )
    }

    /// Number of instances carrying this attribute.
    pub fn presence(&self) -> u64 {
        match self {
            AttrStats::Nominal(table) => table.values().sum(),
            AttrStats::Numeric(s) => s.n,
        }
    }

    fn term(&self, count: f64, params: &TreeParams) -> f64 {
        match self {
            AttrStats::Nominal(table) => table
                .values()
                .map(|&c| {
                    let p = c as f64 / count;
                    p * p
                })
                .sum(),
            AttrStats::Numeric(s) => numeric_term(s, count, params),
        }
    }

    fn term_with(&self, value: &Value, count: f64, params: &TreeParams) -> f64 {
        match (self, value) {
            (AttrStats::Nominal(table), Value::Nominal(token)) => {
                let mut sum = 0.0;
                let mut seen = false;
                for (v, &c) in table {
                    let c = if v == token {
                        seen = true;
                        c + 1
                    } else {
                        c
                    };
                    let p = c as f64 / count;
                    sum += p * p;
                }
                if !seen {
                    let p = 1.0 / count;
                    sum += p * p;
                }
                sum
            }
            (AttrStats::Numeric(s), Value::Numeric(x)) => {
                numeric_term(&s.pushed(*x), count, params)
            }
            _ => unreachable!("type compatibility is checked before scoring"),
        }
    }
}

fn numeric_term(s: &NumericStats, count: f64, params: &TreeParams) -> f64 {
    let presence = s.n as f64 / count;
    presence * presence * params.numeric_term(s.std())
}

/// Term of an attribute seen once in a concept holding `count` instances.
fn fresh_term(value: &Value, count: f64, params: &TreeParams) -> f64 {
    let p = 1.0 / count;
    match value {
        Value::Nominal(_) => p * p,
        Value::Numeric(_) => p * p * params.numeric_term(0.0),
    }
}

/// Instance count plus per-attribute tables for one concept.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConceptStats {
    count: u64,
    attributes: BTreeMap<String, AttrStats>,
}

impl ConceptStats {
    pub fn from_flat(flat: &FlatInstance) -> ConceptStats {
        ConceptStats {
            count: 1,
            attributes: flat
                .iter()
                .map(|(k, v)| (k.to_string(), AttrStats::from_value(v)))
                .collect(),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn attributes(&self) -> &BTreeMap<String, AttrStats> {
        &self.attributes
    }

    pub fn get(&self, name: &str) -> Option<&AttrStats> {
        self.attributes.get(name)
    }

    /// Fails when `flat` gives an attribute a different type than stored.
    pub fn check_compatible(&self, flat: &FlatInstance) -> Result<()> {
        for (name, value) in flat.iter() {
            if let Some(stats) = self.attributes.get(name) {
                if !stats.accepts(value) {
                    return Err(Error::TypeConflict(name.to_string()));
                }
            }
        }
        Ok(())
    }

    pub fn increment(&mut self, flat: &FlatInstance) -> Result<()> {
        self.check_compatible(flat)?;
        self.count += 1;
        for (name, value) in flat.iter() {
            match (self.attributes.get_mut(name), value) {
                (None, _) => {
                    self.attributes
                        .insert(name.to_string(), AttrStats::from_value(value));
                }
                (Some(AttrStats::Nominal(table)), Value::Nominal(token)) => {
                    *table.entry(token.clone()).or_insert(0) += 1;
                }
                (Some(AttrStats::Numeric(s)), Value::Numeric(x)) => s.push(*x),
                _ => unreachable!("checked above"),
            }
        }
        Ok(())
    }

    /// Adds `other`'s instances into `self`.
    pub fn absorb(&mut self, other: &ConceptStats) -> Result<()> {
        for (name, theirs) in &other.attributes {
            if let Some(ours) = self.attributes.get(name) {
                if std::mem::discriminant(ours) != std::mem::discriminant(theirs) {
                    return Err(Error::TypeConflict(name.clone()));
                }
            }
        }
        self.count += other.count;
        for (name, theirs) in &other.attributes {
            match self.attributes.get_mut(name) {
                None => {
                    self.attributes.insert(name.clone(), theirs.clone());
                }
                Some(AttrStats::Nominal(table)) => {
                    let AttrStats::Nominal(other_table) = theirs else {
                        unreachable!()
                    };
                    for (v, c) in other_table {
                        *table.entry(v.clone()).or_insert(0) += c;
                    }
                }
                Some(AttrStats::Numeric(s)) => {
                    let AttrStats::Numeric(o) = theirs else {
                        unreachable!()
                    };
                    *s = s.combine(o);
                }
            }
        }
        Ok(())
    }

    pub fn merge(&self, other: &ConceptStats) -> Result<ConceptStats> {
        let mut merged = self.clone();
        merged.absorb(other)?;
        Ok(merged)
    }

    /// Sum of squared value probabilities over nominal attributes, plus the
    /// presence-weighted density term for numeric ones.
    pub fn expected_correct_guesses(&self, params: &TreeParams) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::EmptyConcept);
        }
        Ok(self.ecg_unchecked(params))
    }

    pub(crate) fn ecg_unchecked(&self, params: &TreeParams) -> f64 {
        let count = self.count as f64;
        self.attributes
            .values()
            .map(|a| a.term(count, params))
            .sum()
    }

    /// Expected correct guesses after hypothetically adding `flat`, without
    /// modifying the concept. `flat` must be type compatible.
    pub fn ecg_with(&self, flat: &FlatInstance, params: &TreeParams) -> f64 {
        let count = (self.count + 1) as f64;
        let mut total = 0.0;
        for (name, stats) in &self.attributes {
            total += match flat.get(name) {
                Some(v) => stats.term_with(v, count, params),
                None => stats.term(count, params),
            };
        }
        for (name, value) in flat.iter() {
            if !self.attributes.contains_key(name) {
                total += fresh_term(value, count, params);
            }
        }
        total
    }

    /// Change in one attribute's term when an instance with `value` joins a
    /// concept of `count + 1` instances, relative to the same attribute
    /// without the value at that count.
    pub fn attribute_gain(&self, name: &str, value: &Value, params: &TreeParams) -> Option<f64> {
        let count = (self.count + 1) as f64;
        match self.attributes.get(name) {
            None => Some(fresh_term(value, count, params)),
            Some(stats) if stats.accepts(value) => {
                Some(stats.term_with(value, count, params) - stats.term(count, params))
            }
            Some(_) => None,
        }
    }

    /// Sum of every stored attribute's term at `count + 1` instances.
    pub fn ecg_diluted(&self, params: &TreeParams) -> f64 {
        let count = (self.count + 1) as f64;
        self.attributes
            .values()
            .map(|a| a.term(count, params))
            .sum()
    }

    /// True when every stored instance equals `flat` attribute for attribute.
    pub fn is_exact_match(&self, flat: &FlatInstance) -> bool {
        if self.count == 0 || self.attributes.len() != flat.len() {
            return false;
        }
        self.attributes
            .iter()
            .all(|(name, stats)| match (stats, flat.get(name)) {
                (AttrStats::Nominal(table), Some(Value::Nominal(token))) => {
                    table.len() == 1 && table.get(token) == Some(&self.count)
                }
                (AttrStats::Numeric(s), Some(Value::Numeric(x))) => {
                    s.n == self.count && s.m2 == 0.0 && s.mean == *x
                }
                _ => false,
            })
    }
}

/// Category utility of a partition given precomputed `(count, ecg)` pairs.
pub(crate) fn category_utility_from_parts(
    parent_count: f64,
    parent_ecg: f64,
    children: impl IntoIterator<Item = (f64, f64)>,
) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (count, ecg) in children {
        sum += count / parent_count * (ecg - parent_ecg);
        n += 1;
    }
    sum / n as f64
}

/// Average over children of `P(child) * (ECG(child) - ECG(parent))`.
pub fn category_utility(
    parent: &ConceptStats,
    children: &[&ConceptStats],
    params: &TreeParams,
) -> Result<f64> {
    if children.is_empty() || children.iter().any(|c| c.count == 0) {
        return Err(Error::EmptyPartition);
    }
    let parent_ecg = parent.expected_correct_guesses(params)?;
    let parts = children
        .iter()
        .map(|c| (c.count as f64, c.ecg_unchecked(params)));
    Ok(category_utility_from_parts(
        parent.count as f64,
        parent_ecg,
        parts,
    ))
}
