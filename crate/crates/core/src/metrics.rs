//! Adjusted Rand index and learning-curve aggregation.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn comb2(n: u64) -> i128 {
    let n = n as i128;
    n * (n - 1) / 2
}

/// Adjusted Rand index between two labelings of the same items.
///
/// When the denominator vanishes (both labelings trivial, e.g. both a single
/// cluster or both all singletons) the result is 1.0 for identical partitions
/// and 0.0 otherwise.
pub fn adjusted_rand_index<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Hash + Eq,
    B: Hash + Eq,
{
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooFewLabels(a.len()));
    }
    let mut left: HashMap<&A, u64> = HashMap::new();
    let mut right: HashMap<&B, u64> = HashMap::new();
    let mut joint: HashMap<(&A, &B), u64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *left.entry(x).or_default() += 1;
        *right.entry(y).or_default() += 1;
        *joint.entry((x, y)).or_default() += 1;
    }
    // pair counts are integers; scaling numerator and denominator by
    // 2 * total keeps everything exact until the final division
    let index: i128 = joint.values().map(|&n| comb2(n)).sum();
    let sum_a: i128 = left.values().map(|&n| comb2(n)).sum();
    let sum_b: i128 = right.values().map(|&n| comb2(n)).sum();
    let total = comb2(a.len() as u64);
    let numerator = 2 * (index * total - sum_a * sum_b);
    let denominator = (sum_a + sum_b) * total - 2 * sum_a * sum_b;
    if denominator == 0 {
        let same = joint.len() == left.len() && joint.len() == right.len();
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok(numerator as f64 / denominator as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub opportunity: usize,
    pub mean: f64,
    /// Half-width of the 95% normal-approximation interval.
    pub ci_halfwidth: f64,
    pub n: usize,
}

/// Mean accuracy per opportunity across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub points: Vec<CurvePoint>,
}

impl Curve {
    /// Mean of the per-opportunity means over the 1-based inclusive range.
    pub fn window_mean(&self, first: usize, last: usize) -> f64 {
        let slice = &self.points[first - 1..last];
        slice.iter().map(|p| p.mean).sum::<f64>() / slice.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("opportunity,mean,ci_halfwidth,n\n");
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{}",
                p.opportunity, p.mean, p.ci_halfwidth, p.n
            )
            .unwrap();
        }
        out
    }
}

pub fn accuracy_by_opportunity(outcomes: &[Vec<bool>]) -> Result<Curve> {
    let first = outcomes.first().ok_or(Error::NoRuns)?;
    if outcomes.iter().any(|r| r.len() != first.len()) {
        return Err(Error::RaggedRuns);
    }
    let n = outcomes.len();
    let points = (0..first.len())
        .map(|t| {
            let hits = outcomes.iter().filter(|run| run[t]).count();
            let mean = hits as f64 / n as f64;
            CurvePoint {
                opportunity: t + 1,
                mean,
                ci_halfwidth: 1.96 * (mean * (1.0 - mean) / n as f64).sqrt(),
                n,
            }
        })
        .collect();
    Ok(Curve { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ari_examples() {
        let a = [0, 0, 1, 1, 2];
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&a, &[7; 5]).unwrap(), 0.0);
        assert_eq!(
            adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(),
            -0.5
        );
    }

    #[test]
    fn ari_degenerate_and_errors() {
        assert_eq!(
            adjusted_rand_index(&[1, 1, 1], &["x", "x", "x"]).unwrap(),
            1.0
        );
        assert_eq!(adjusted_rand_index(&[1, 2, 3], &[4, 5, 6]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[1, 2, 3], &[0, 0, 0]).unwrap(), 0.0);
        assert!(matches!(
            adjusted_rand_index(&[1, 2], &[1]),
            Err(Error::LengthMismatch { .. })
        ));
        assert_eq!(adjusted_rand_index(&[1], &[1]), Err(Error::TooFewLabels(1)));
    }

    #[test]
    fn curve_examples() {
        let c = accuracy_by_opportunity(&[vec![true, true], vec![true, true]]).unwrap();
        assert!(c
            .points
            .iter()
            .all(|p| p.mean == 1.0 && p.ci_halfwidth == 0.0));
        let c = accuracy_by_opportunity(&[vec![true], vec![false]]).unwrap();
        assert_eq!(c.points[0].mean, 0.5);
        assert_eq!(accuracy_by_opportunity(&[]), Err(Error::NoRuns));
        assert_eq!(
            accuracy_by_opportunity(&[vec![true], vec![]]),
            Err(Error::RaggedRuns)
        );
        assert!(c
            .to_csv()
            .starts_with("opportunity,mean,ci_halfwidth,n\n1,0.5,"));
    }

    #[test]
    fn bernoulli_runs_recover_rate() {
        // 0.03 is about two standard errors per point, so the seed matters
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let runs: Vec<Vec<bool>> = (0..1000)
            .map(|_| (0..30).map(|_| rng.random_bool(0.7)).collect())
            .collect();
        let c = accuracy_by_opportunity(&runs).unwrap();
        for p in &c.points {
            assert!(
                (p.mean - 0.7).abs() < 0.03,
                "t={} mean={}",
                p.opportunity,
                p.mean
            );
        }
    }
}
