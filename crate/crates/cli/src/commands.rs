use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use arbor::{
    cluster_flat, cluster_two_pass, generate_synthetic, mask, predict as predict_one,
    run_clustering_eval, run_sequential_prediction, ClusteringConfig, ConceptTree,
    ExperimentReport, Instance, SequentialConfig, SyntheticSpec, TreeParams, Value,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Parses an NDJSON file, skipping blank lines. Errors name the 1-based line.
pub fn read_instances(path: &Path) -> Result<Vec<Instance>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let instance = Instance::from_json_str(line)
            .with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        out.push(instance);
    }
    Ok(out)
}

pub fn read_tree(path: &Path) -> Result<ConceptTree> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ConceptTree::from_json_str(&text)
        .with_context(|| format!("loading tree from {}", path.display()))
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn to_ndjson(instances: &[Instance]) -> String {
    let mut out = String::new();
    for x in instances {
        out.push_str(&x.to_json().to_string());
        out.push('\n');
    }
    out
}

pub enum Synthetic {
    TwoClass { noise: f64 },
    ThreeCluster,
}

pub fn synthetic(kind: Synthetic, n: usize, seed: u64) -> Result<Vec<Instance>> {
    let spec = match kind {
        Synthetic::TwoClass { noise } => SyntheticSpec::two_class_separable(n, noise, seed),
        Synthetic::ThreeCluster => SyntheticSpec::three_cluster(n, seed),
    };
    Ok(generate_synthetic(&spec)?.instances)
}

pub fn fit(
    params: &TreeParams,
    input: &Path,
    output: &Path,
    shuffle_seed: Option<u64>,
) -> Result<()> {
    let mut instances = read_instances(input)?;
    if let Some(seed) = shuffle_seed {
        instances.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut tree = ConceptTree::new(*params)?;
    for (i, x) in instances.iter().enumerate() {
        tree.fit(x)
            .with_context(|| format!("fitting instance {i}"))?;
    }
    emit(&tree.to_json_string(), Some(output))?;
    println!("nodes: {} depth: {}", tree.node_count(), tree.depth());
    Ok(())
}

pub fn predict(tree: &Path, input: &Path, target: &str, output: Option<&Path>) -> Result<()> {
    let tree = read_tree(tree)?;
    if tree.root_stats().get(target).is_none() {
        bail!("unknown target attribute {target:?}");
    }
    let instances = read_instances(input)?;
    let mut csv = String::from("index,value,confidence\n");
    for (i, x) in instances.iter().enumerate() {
        let p =
            predict_one(&tree, x, target).with_context(|| format!("predicting instance {i}"))?;
        let value = match &p.value {
            Value::Nominal(s) => csv_field(s),
            Value::Numeric(v) => v.to_string(),
        };
        let confidence = p.confidence.map(|c| c.to_string()).unwrap_or_default();
        writeln!(csv, "{i},{value},{confidence}")?;
    }
    emit(&csv, output)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn cluster(
    params: &TreeParams,
    input: &Path,
    splits: usize,
    tree: Option<&Path>,
    seed: u64,
    output: Option<&Path>,
) -> Result<()> {
    let instances = read_instances(input)?;
    let clustering = match tree {
        Some(path) => cluster_flat(&read_tree(path)?, &instances, splits)?,
        None => cluster_two_pass(params, &instances, splits, seed)?,
    };
    if clustering.clamped() {
        eprintln!(
            "only {} of {} requested splits were possible",
            clustering.split_count, clustering.requested_splits
        );
    }
    emit(&clustering.to_csv(), output)
}

fn write_report(report: &ExperimentReport, output: Option<&Path>) -> Result<()> {
    emit(&report.to_csv(), output)?;
    if let Some(path) = output {
        let mut meta = PathBuf::from(path).into_os_string();
        meta.push(".meta.json");
        emit(&report.metadata_json(), Some(Path::new(&meta)))?;
    }
    Ok(())
}

pub fn task1(
    params: &TreeParams,
    instances: &[Instance],
    target: &str,
    runs: usize,
    examples: usize,
    seed: u64,
    output: Option<&Path>,
) -> Result<()> {
    let config = SequentialConfig {
        target: target.to_string(),
        n_runs: runs,
        n_examples: examples,
        seed,
        params: *params,
    };
    write_report(&run_sequential_prediction(instances, &config)?, output)
}

pub fn task2(
    params: &TreeParams,
    instances: &[Instance],
    label_attr: &str,
    splits: &[usize],
    runs: usize,
    seed: u64,
    output: Option<&Path>,
) -> Result<()> {
    let mut names: Vec<String> = Vec::new();
    let mut reference = Vec::with_capacity(instances.len());
    let mut unlabeled = Vec::with_capacity(instances.len());
    for (i, x) in instances.iter().enumerate() {
        let Some(label) = x.flatten_identity().get(label_attr).map(|v| v.to_string()) else {
            bail!("instance {i} has no {label_attr:?} attribute");
        };
        let id = match names.iter().position(|n| *n == label) {
            Some(id) => id,
            None => {
                names.push(label);
                names.len() - 1
            }
        };
        reference.push(id);
        unlabeled.push(mask(x, label_attr)?);
    }
    let config = ClusteringConfig {
        split_counts: splits.to_vec(),
        n_runs: runs,
        seed,
        params: *params,
    };
    write_report(
        &run_clustering_eval(&unlabeled, &reference, &config)?,
        output,
    )
}
