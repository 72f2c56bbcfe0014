use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::ClassifierParams;

/// Probabilities are clipped to this range before taking entropy.
pub const ENTROPY_CLIP: (f64, f64) = (0.01, 0.99);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Uniform,
    Entropy,
    InfoDensity,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Uniform => "uniform",
            StrategyKind::Entropy => "entropy",
            StrategyKind::InfoDensity => "info_density",
        }
    }

    pub fn needs_training(self) -> bool {
        self != StrategyKind::Uniform
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(StrategyKind::Uniform),
            "entropy" => Ok(StrategyKind::Entropy),
            "info_density" | "id" => Ok(StrategyKind::InfoDensity),
            other => Err(Error::ConfigInvalid(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryStrategy {
    pub kind: StrategyKind,
    /// Density exponent, used by `InfoDensity` only.
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    1.0
}

impl QueryStrategy {
    pub fn new(kind: StrategyKind) -> Self {
        QueryStrategy { kind, beta: 1.0 }
    }

    pub fn info_density(beta: f64) -> Self {
        QueryStrategy {
            kind: StrategyKind::InfoDensity,
            beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::ConfigInvalid(format!("beta {} must be >= 0", self.beta)));
        }
        Ok(())
    }

    /// Scores each candidate; higher is queried first.
    pub fn score(&self, theta: &ClassifierParams, xs: &[&[f64]], rng: &mut impl Rng) -> Result<Vec<f64>> {
        match self.kind {
            StrategyKind::Uniform => score_uniform(xs.len(), rng),
            StrategyKind::Entropy => score_entropy(theta, xs),
            StrategyKind::InfoDensity => score_info_density(theta, xs, self.beta),
        }
    }
}

/// Binary entropy in nats after clipping `p` to [`ENTROPY_CLIP`].
pub fn binary_entropy(p: f64) -> f64 {
    let p = p.clamp(ENTROPY_CLIP.0, ENTROPY_CLIP.1);
    let q = 1.0 - p;
    -(p * p.ln() + q * q.ln())
}

/// I.i.d. uniform scores; their argmax order is a uniform permutation.
pub fn score_uniform(n: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptyPool);
    }
    Ok((0..n).map(|_| rng.random::<f64>()).collect())
}

pub fn score_entropy(theta: &ClassifierParams, xs: &[&[f64]]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptyPool);
    }
    xs.iter()
        .map(|x| theta.predict_proba(x).map(binary_entropy))
        .collect()
}

/// Mean cosine similarity of each vector to all vectors in `xs` (itself
/// included). Zero vectors have similarity 0 with everything.
///
/// Uses `mean_j cos(x_i, x_j) = u_i . (sum_j u_j) / n` with unit vectors
/// `u`, so the cost is linear in the pool size.
pub fn mean_cosine_similarity(xs: &[&[f64]]) -> Vec<f64> {
    let n = xs.len();
    if n == 0 {
        return Vec::new();
    }
    let dim = xs[0].len();
    let units: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                x.iter().map(|v| v / norm).collect()
            } else {
                vec![0.0; dim]
            }
        })
        .collect();
    let mut total = vec![0.0; dim];
    for u in &units {
        for (t, v) in total.iter_mut().zip(u) {
            *t += v;
        }
    }
    units
        .iter()
        .map(|u| u.iter().zip(&total).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect()
}

/// Entropy times `max(mean cosine similarity, 0)^beta`, density taken over
/// the candidate set passed in.
pub fn score_info_density(theta: &ClassifierParams, xs: &[&[f64]], beta: f64) -> Result<Vec<f64>> {
    let entropy = score_entropy(theta, xs)?;
    if beta == 0.0 {
        return Ok(entropy);
    }
    let density = mean_cosine_similarity(xs);
    Ok(entropy
        .into_iter()
        .zip(density)
        .map(|(e, d)| e * d.max(0.0).powf(beta))
        .collect())
}

/// Positions of the `b` highest scores; equal scores go to the smaller id.
pub fn select_top(scores: &[f64], ids: &[u64], b: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| {
        scores[j]
            .partial_cmp(&scores[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(ids[i].cmp(&ids[j]))
    });
    order.truncate(b);
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn entropy_reference_values() {
        assert!((binary_entropy(0.5) - std::f64::consts::LN_2).abs() < 1e-12);
        let e99 = -0.99f64 * 0.99f64.ln() - 0.01f64 * 0.01f64.ln();
        assert!((binary_entropy(0.99) - e99).abs() < 1e-15);
        assert!((binary_entropy(1.0) - 0.0560).abs() < 1e-4);
        for p in [0.0, 0.1, 0.37, 0.5, 0.8] {
            assert!((binary_entropy(p) - binary_entropy(1.0 - p)).abs() < 1e-15);
        }
    }

    #[test]
    fn beta_zero_is_entropy() {
        let theta = ClassifierParams::zeros(2, 3);
        let pts = [vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.0, 0.0]];
        let xs: Vec<&[f64]> = pts.iter().map(|v| v.as_slice()).collect();
        assert_eq!(score_info_density(&theta, &xs, 0.0).unwrap(), score_entropy(&theta, &xs).unwrap());
    }

    #[test]
    fn parallel_vectors_have_unit_density() {
        let theta = ClassifierParams::constant(2, 0.3);
        let pts = [vec![1.0, 2.0], vec![2.0, 4.0], vec![0.5, 1.0]];
        let xs: Vec<&[f64]> = pts.iter().map(|v| v.as_slice()).collect();
        let ent = score_entropy(&theta, &xs).unwrap();
        for beta in [0.5, 1.0, 3.0] {
            let id = score_info_density(&theta, &xs, beta).unwrap();
            for (a, b) in id.iter().zip(&ent) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn empty_pool_errors() {
        let theta = ClassifierParams::cold_start(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(score_uniform(0, &mut rng), Err(Error::EmptyPool)));
        assert!(matches!(score_entropy(&theta, &[]), Err(Error::EmptyPool)));
        assert!(matches!(score_info_density(&theta, &[], 1.0), Err(Error::EmptyPool)));
    }

    #[test]
    fn uniform_first_pick_is_uniform() {
        let n = 20;
        let trials = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ids: Vec<u64> = (0..n as u64).collect();
        let mut counts = vec![0usize; n];
        for _ in 0..trials {
            let scores = score_uniform(n, &mut rng).unwrap();
            counts[select_top(&scores, &ids, 1)[0]] += 1;
        }
        let p = 1.0 / n as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        for c in counts {
            let f = c as f64 / trials as f64;
            assert!((f - p).abs() <= 3.5 * sigma, "frequency {f}");
        }
    }

    #[test]
    fn tie_break_smallest_id() {
        let scores = [0.5, 0.7, 0.7, 0.1];
        let ids = [10, 30, 20, 40];
        assert_eq!(select_top(&scores, &ids, 3), vec![2, 1, 0]);
    }

    #[test]
    fn strategy_names_parse() {
        for k in [StrategyKind::Uniform, StrategyKind::Entropy, StrategyKind::InfoDensity] {
            assert_eq!(k.as_str().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("bogus".parse::<StrategyKind>().is_err());
    }
}
