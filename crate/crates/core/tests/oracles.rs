//! Simple reference learners on the synthetic datasets. They establish that
//! the accuracy and ARI thresholds are reachable on this data at all.

mod common;

use arbor::{
    adjusted_rand_index, derive_seed, generate_synthetic, Attribute, Instance, SyntheticSpec, Value,
};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Order-free description of an instance: top-level nominal values (minus
/// the excluded attribute) and components sorted by their numeric features.
struct Features {
    nominals: Vec<(String, String)>,
    components: Vec<(String, Vec<f64>)>,
}

fn features(x: &Instance, exclude: &str) -> Features {
    let nominals = x
        .values()
        .filter(|(n, _)| *n != exclude)
        .filter_map(|(n, v)| v.as_nominal().map(|s| (n.to_string(), s.to_string())))
        .collect();
    let mut components: Vec<(String, Vec<f64>)> = x
        .components()
        .map(|(_, c)| {
            let values: Vec<&Value> = c
                .attributes()
                .values()
                .filter_map(|a| match a {
                    Attribute::Value(v) => Some(v),
                    Attribute::Component(_) => None,
                })
                .collect();
            let ty = values
                .iter()
                .find_map(|v| v.as_nominal())
                .unwrap_or_default()
                .to_string();
            let nums = values.iter().filter_map(|v| v.as_numeric()).collect();
            (ty, nums)
        })
        .collect();
    components.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    Features {
        nominals,
        components,
    }
}

fn distance(a: &Features, b: &Features) -> f64 {
    let mut d = 0.0;
    for (name, value) in &a.nominals {
        if !b.nominals.iter().any(|(n, v)| n == name && v == value) {
            d += 1.0;
        }
    }
    d += a.components.len().abs_diff(b.components.len()) as f64;
    for (ca, cb) in a.components.iter().zip(&b.components) {
        d += f64::from(u8::from(ca.0 != cb.0));
        d +=
            ca.1.iter()
                .zip(&cb.1)
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>();
    }
    d
}

#[test]
fn nearest_neighbor_reaches_task1_threshold() {
    let data = generate_synthetic(&SyntheticSpec::two_class_separable(200, 0.0, 6)).unwrap();
    let feats: Vec<Features> = data
        .instances
        .iter()
        .map(|x| features(x, "success"))
        .collect();
    let labels = common::nominal_at(&data.instances, "success");
    let runs = 100;
    let mut hits_at = vec![0usize; 30];
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(60, run));
        let order = sample(&mut rng, data.instances.len(), 30).into_vec();
        for (t, &i) in order.iter().enumerate() {
            let guess = order[..t]
                .iter()
                .min_by(|&&p, &&q| {
                    distance(&feats[i], &feats[p]).total_cmp(&distance(&feats[i], &feats[q]))
                })
                .map(|&j| &labels[j]);
            hits_at[t] += usize::from(guess == Some(&labels[i]));
        }
    }
    let at_20 = hits_at[19] as f64 / runs as f64;
    assert!(at_20 >= 0.9, "1-NN accuracy at opportunity 20 was {at_20}");
}

#[test]
fn k_medoids_reaches_task2_threshold() {
    let data = generate_synthetic(&SyntheticSpec::three_cluster(250, 7)).unwrap();
    let feats: Vec<Features> = data.instances.iter().map(|x| features(x, "kind")).collect();
    let n = feats.len();
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| distance(&feats[i], &feats[j])).collect())
        .collect();

    // farthest-first initialization, then alternate assignment and medoid update
    let mut medoids = vec![0usize];
    while medoids.len() < 3 {
        let next = (0..n)
            .max_by(|&a, &b| {
                let da = medoids
                    .iter()
                    .map(|&m| dist[a][m])
                    .fold(f64::INFINITY, f64::min);
                let db = medoids
                    .iter()
                    .map(|&m| dist[b][m])
                    .fold(f64::INFINITY, f64::min);
                da.total_cmp(&db)
            })
            .unwrap();
        medoids.push(next);
    }
    let mut assignment = vec![0usize; n];
    for _ in 0..20 {
        for i in 0..n {
            assignment[i] = (0..3)
                .min_by(|&a, &b| dist[i][medoids[a]].total_cmp(&dist[i][medoids[b]]))
                .unwrap();
        }
        for (k, medoid) in medoids.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| assignment[i] == k).collect();
            if let Some(&best) = members.iter().min_by(|&&a, &&b| {
                let sa: f64 = members.iter().map(|&m| dist[a][m]).sum();
                let sb: f64 = members.iter().map(|&m| dist[b][m]).sum();
                sa.total_cmp(&sb)
            }) {
                *medoid = best;
            }
        }
    }
    let ari = adjusted_rand_index(&assignment, &data.clusters).unwrap();
    assert!(ari >= 0.8, "k-medoids ARI {ari}");
}

#[test]
fn labels_follow_clusters_without_noise() {
    let spec = SyntheticSpec::three_cluster(90, 2);
    let data = generate_synthetic(&spec).unwrap();
    for (x, &k) in data.instances.iter().zip(&data.clusters) {
        let label = x.flatten_identity().get("kind").cloned();
        assert_eq!(label, Some(Value::nominal(spec.clusters[k].label.clone())));
    }
}
