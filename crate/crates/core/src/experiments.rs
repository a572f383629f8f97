//! Synthetic structured datasets and the two evaluation protocols:
//! sequential prediction learning curves and two-pass clustering scored by
//! adjusted Rand index.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{cluster_two_pass_multi, mask, predict};
use crate::instance::{Attribute, Component, Instance, Relation, Value};
use crate::metrics::{accuracy_by_opportunity, adjusted_rand_index, Curve};
use crate::params::TreeParams;
use crate::tree::ConceptTree;

/// Seed of run `index` under `master`, via the SplitMix64 finalizer.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericFeature {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// Added once per component position, so later components sit further out.
    #[serde(default)]
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NominalFeature {
    pub name: String,
    pub pool: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    /// Value of the label attribute for this cluster.
    pub label: String,
    pub min_components: usize,
    pub max_components: usize,
    pub component_numeric: Vec<NumericFeature>,
    pub component_nominal: Vec<NominalFeature>,
    #[serde(default)]
    pub instance_numeric: Vec<NumericFeature>,
    #[serde(default)]
    pub instance_nominal: Vec<NominalFeature>,
    /// Predicate chaining consecutive components, e.g. `(on b2 b1)`.
    #[serde(default)]
    pub chain_relation: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub clusters: Vec<ClusterSpec>,
    pub n_instances: usize,
    pub label_attribute: String,
    /// Probability of replacing the label by another cluster's label.
    pub label_noise: f64,
    pub seed: u64,
}

/// Instances plus the index of the cluster each was drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    pub clusters: Vec<usize>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.clusters.is_empty() {
            return bad("at least one cluster is required");
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return bad("label_noise must lie in [0, 1]");
        }
        for c in &self.clusters {
            if c.min_components > c.max_components {
                return bad("min_components exceeds max_components");
            }
            let numeric = c.component_numeric.iter().chain(&c.instance_numeric);
            for f in numeric {
                if !(f.sd.is_finite() && f.sd >= 0.0 && f.mean.is_finite() && f.step.is_finite()) {
                    return bad("numeric features need finite mean/step and sd >= 0");
                }
            }
            if c.component_nominal
                .iter()
                .chain(&c.instance_nominal)
                .any(|f| f.pool.is_empty())
            {
                return bad("nominal pools must be non-empty");
            }
        }
        Ok(())
    }

    /// Two classes with disjoint nominal pools and numeric sd 0.1. The label
    /// attribute is `success` with values `True`/`False`.
    pub fn two_class_separable(n_instances: usize, label_noise: f64, seed: u64) -> Self {
        let cluster =
            |label: &str, types: [&str; 2], colors: [&str; 2], x: f64, y: f64| ClusterSpec {
                label: label.into(),
                min_components: 2,
                max_components: 3,
                component_numeric: vec![
                    NumericFeature {
                        name: "x".into(),
                        mean: x,
                        sd: 0.1,
                        step: 0.0,
                    },
                    NumericFeature {
                        name: "y".into(),
                        mean: y,
                        sd: 0.1,
                        step: 1.0,
                    },
                ],
                component_nominal: vec![NominalFeature {
                    name: "type".into(),
                    pool: types.iter().map(|s| s.to_string()).collect(),
                }],
                instance_numeric: vec![],
                instance_nominal: vec![NominalFeature {
                    name: "shape".into(),
                    pool: colors.iter().map(|s| s.to_string()).collect(),
                }],
                chain_relation: Some("on".into()),
            };
        SyntheticSpec {
            clusters: vec![
                cluster("True", ["cube", "rect"], ["tower", "column"], 0.0, 0.0),
                cluster("False", ["ufo", "tri"], ["spread", "heap"], 3.0, 5.0),
            ],
            n_instances,
            label_attribute: "success".into(),
            label_noise,
            seed,
        }
    }

    /// Three structurally distinct clusters for clustering evaluation.
    pub fn three_cluster(n_instances: usize, seed: u64) -> Self {
        let cluster = |label: &str, comps: (usize, usize), ty: &str, x: f64, w: f64| ClusterSpec {
            label: label.into(),
            min_components: comps.0,
            max_components: comps.1,
            component_numeric: vec![
                NumericFeature {
                    name: "x".into(),
                    mean: x,
                    sd: 0.1,
                    step: 0.5,
                },
                NumericFeature {
                    name: "width".into(),
                    mean: w,
                    sd: 0.1,
                    step: 0.0,
                },
            ],
            component_nominal: vec![NominalFeature {
                name: "type".into(),
                pool: vec![ty.to_string()],
            }],
            instance_numeric: vec![],
            instance_nominal: vec![],
            chain_relation: None,
        };
        SyntheticSpec {
            clusters: vec![
                cluster("tower", (2, 2), "rect", 0.0, 1.0),
                cluster("bridge", (3, 3), "plank", 4.0, 3.0),
                cluster("pyramid", (4, 4), "tri", 8.0, 2.0),
            ],
            n_instances,
            label_attribute: "kind".into(),
            label_noise: 0.0,
            seed,
        }
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels: Vec<&str> = spec.clusters.iter().map(|c| c.label.as_str()).collect();
    let mut instances = Vec::with_capacity(spec.n_instances);
    let mut clusters = Vec::with_capacity(spec.n_instances);
    for _ in 0..spec.n_instances {
        let k = rng.random_range(0..spec.clusters.len());
        let cluster = &spec.clusters[k];
        let mut label = cluster.label.as_str();
        if spec.label_noise > 0.0 && rng.random_bool(spec.label_noise) {
            let others: Vec<&str> = labels.iter().copied().filter(|l| *l != label).collect();
            if let Some(other) = others.choose(&mut rng) {
                label = other;
            }
        }
        instances.push(draw_instance(
            cluster,
            &spec.label_attribute,
            label,
            &mut rng,
        )?);
        clusters.push(k);
    }
    Ok(Dataset {
        instances,
        clusters,
    })
}

fn gaussian(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    Normal::new(mean, sd).expect("validated sd").sample(rng)
}

fn draw_instance(
    cluster: &ClusterSpec,
    label_attr: &str,
    label: &str,
    rng: &mut ChaCha8Rng,
) -> Result<Instance> {
    let mut attributes = std::collections::BTreeMap::new();
    attributes.insert(
        label_attr.to_string(),
        Attribute::Value(Value::nominal(label)),
    );
    for f in &cluster.instance_nominal {
        let token = f.pool.choose(rng).expect("non-empty pool");
        attributes.insert(
            f.name.clone(),
            Attribute::Value(Value::nominal(token.clone())),
        );
    }
    for f in &cluster.instance_numeric {
        attributes.insert(
            f.name.clone(),
            Attribute::Value(Value::Numeric(gaussian(rng, f.mean, f.sd))),
        );
    }

    let n = rng.random_range(cluster.min_components..=cluster.max_components);
    // names carry no positional information
    let mut names: Vec<String> = (1..=n).map(|i| format!("b{i}")).collect();
    names.shuffle(rng);
    for (position, name) in names.iter().enumerate() {
        let mut inner = std::collections::BTreeMap::new();
        for f in &cluster.component_nominal {
            let token = f.pool.choose(rng).expect("non-empty pool");
            inner.insert(
                f.name.clone(),
                Attribute::Value(Value::nominal(token.clone())),
            );
        }
        for f in &cluster.component_numeric {
            let mean = f.mean + f.step * position as f64;
            inner.insert(
                f.name.clone(),
                Attribute::Value(Value::Numeric(gaussian(rng, mean, f.sd))),
            );
        }
        attributes.insert(name.clone(), Attribute::Component(Component::new(inner)?));
    }
    let relations = match &cluster.chain_relation {
        Some(pred) => names
            .windows(2)
            .map(|w| Relation::new(pred.clone(), vec![w[1].clone(), w[0].clone()]))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    Instance::new(attributes, relations)
}

/// Per-split-count ARI summary across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitAri {
    pub splits: usize,
    pub mean_ari: f64,
    /// Sample standard deviation across runs; zero for a single run.
    pub std_ari: f64,
    pub runs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "task")]
pub enum ReportBody {
    SequentialPrediction {
        target: String,
        n_examples: usize,
        curve: Curve,
    },
    Clustering {
        splits: Vec<SplitAri>,
    },
}

/// Result of one experiment, reproducible from its inputs and `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub params: TreeParams,
    pub seed: u64,
    pub run_seeds: Vec<u64>,
    pub n_runs: usize,
    pub body: ReportBody,
}

impl ExperimentReport {
    pub fn curve(&self) -> Option<&Curve> {
        match &self.body {
            ReportBody::SequentialPrediction { curve, .. } => Some(curve),
            ReportBody::Clustering { .. } => None,
        }
    }

    pub fn splits(&self) -> Option<&[SplitAri]> {
        match &self.body {
            ReportBody::Clustering { splits } => Some(splits),
            ReportBody::SequentialPrediction { .. } => None,
        }
    }

    pub fn to_csv(&self) -> String {
        match &self.body {
            ReportBody::SequentialPrediction { curve, .. } => curve.to_csv(),
            ReportBody::Clustering { splits } => {
                let mut out = String::from("splits,mean_ari,std_ari,n_runs\n");
                for s in splits {
                    writeln!(
                        out,
                        "{},{},{},{}",
                        s.splits,
                        s.mean_ari,
                        s.std_ari,
                        s.runs.len()
                    )
                    .unwrap();
                }
                out
            }
        }
    }

    /// JSON sidecar: parameters, seeds, settings and the crate version.
    pub fn metadata_json(&self) -> String {
        let settings = match &self.body {
            ReportBody::SequentialPrediction {
                target, n_examples, ..
            } => {
                serde_json::json!({"task": "sequential_prediction", "target": target, "n_examples": n_examples})
            }
            ReportBody::Clustering { splits } => serde_json::json!({
                "task": "clustering",
                "split_counts": splits.iter().map(|s| s.splits).collect::<Vec<_>>(),
            }),
        };
        serde_json::to_string_pretty(&serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "params": self.params,
            "seed": self.seed,
            "run_seeds": self.run_seeds,
            "n_runs": self.n_runs,
            "settings": settings,
        }))
        .expect("metadata serializes")
    }
}

/// Settings of the sequential prediction protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequentialConfig {
    pub target: String,
    pub n_runs: usize,
    pub n_examples: usize,
    pub seed: u64,
    pub params: TreeParams,
}

/// Predict-then-train learning curve. Each run starts from an empty tree,
/// draws `n_examples` instances without replacement in random order, predicts
/// `target` from the masked instance and only then fits the full instance.
/// Unanswerable predictions count as incorrect.
pub fn run_sequential_prediction(
    instances: &[Instance],
    config: &SequentialConfig,
) -> Result<ExperimentReport> {
    config.params.validate()?;
    if instances.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if instances.len() < config.n_examples {
        return Err(Error::DatasetTooSmall {
            available: instances.len(),
            requested: config.n_examples,
        });
    }
    let mut truths = Vec::with_capacity(instances.len());
    for (i, x) in instances.iter().enumerate() {
        match x.flatten_identity().get(&config.target) {
            None => return Err(Error::TargetMissing(config.target.clone(), i)),
            Some(Value::Numeric(_)) => return Err(Error::NonNominalTarget(config.target.clone())),
            Some(v) => truths.push(v.clone()),
        }
    }
    let masked: Vec<Instance> = instances
        .iter()
        .map(|x| mask(x, &config.target))
        .collect::<Result<_>>()?;
    for m in &masked {
        assert!(
            !m.flatten_identity().contains(&config.target),
            "masked instance still carries the target"
        );
    }

    let run_seeds: Vec<u64> = (0..config.n_runs as u64)
        .map(|r| derive_seed(config.seed, r))
        .collect();
    let outcomes: Vec<Vec<bool>> = run_seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let order = sample(&mut rng, instances.len(), config.n_examples);
            let mut tree = ConceptTree::new(config.params)?;
            let mut run = Vec::with_capacity(config.n_examples);
            for i in order.iter() {
                let correct = match predict(&tree, &masked[i], &config.target) {
                    Ok(p) => p.value == truths[i],
                    Err(Error::EmptyTree) | Err(Error::UnknownAttribute(_)) => false,
                    Err(e) => return Err(e),
                };
                run.push(correct);
                tree.fit(&instances[i])?;
            }
            Ok(run)
        })
        .collect::<Result<_>>()?;
    let curve = accuracy_by_opportunity(&outcomes)?;
    Ok(ExperimentReport {
        params: config.params,
        seed: config.seed,
        run_seeds,
        n_runs: config.n_runs,
        body: ReportBody::SequentialPrediction {
            target: config.target.clone(),
            n_examples: config.n_examples,
            curve,
        },
    })
}

/// Settings of the clustering protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub split_counts: Vec<usize>,
    pub n_runs: usize,
    pub seed: u64,
    pub params: TreeParams,
}

/// Two-pass clustering per run, scored against `reference` at every split
/// count.
pub fn run_clustering_eval(
    instances: &[Instance],
    reference: &[usize],
    config: &ClusteringConfig,
) -> Result<ExperimentReport> {
    config.params.validate()?;
    if instances.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: instances.len(),
            right: reference.len(),
        });
    }
    if instances.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let run_seeds: Vec<u64> = (0..config.n_runs as u64)
        .map(|r| derive_seed(config.seed, r))
        .collect();
    let per_run: Vec<Vec<f64>> = run_seeds
        .par_iter()
        .map(|&seed| {
            cluster_two_pass_multi(&config.params, instances, &config.split_counts, seed)?
                .iter()
                .map(|c| {
                    let labels: Vec<u64> = c.labels.iter().map(|id| id.0).collect();
                    adjusted_rand_index(&labels, reference)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let splits = config
        .split_counts
        .iter()
        .enumerate()
        .map(|(j, &splits)| {
            let runs: Vec<f64> = per_run.iter().map(|r| r[j]).collect();
            let (mean_ari, std_ari) = mean_and_sample_std(&runs);
            SplitAri {
                splits,
                mean_ari,
                std_ari,
                runs,
            }
        })
        .collect();
    Ok(ExperimentReport {
        params: config.params,
        seed: config.seed,
        run_seeds,
        n_runs: config.n_runs,
        body: ReportBody::Clustering { splits },
    })
}

fn mean_and_sample_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
