//! Soft-margin linear separator fit by full-batch subgradient descent on
//! `lambda / 2 * |w|^2 + mean(hinge)`.
//!
//! Features are standardized internally and the bias is carried as an extra
//! constant feature; the returned hyperplane is expressed in raw feature
//! coordinates.

use serde::{Deserialize, Serialize};

use super::mlp::standardization;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmOptions {
    pub lambda: f64,
    pub iterations: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions {
            lambda: 1e-2,
            iterations: 4000,
        }
    }
}

/// Decision hyperplane `w . x + b = 0`; positive side is label 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub w: Vec<f64>,
    pub b: f64,
    /// Geometric margin `1 / |w|` in raw coordinates.
    pub margin: f64,
}

impl Hyperplane {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }

    pub fn norm(&self) -> f64 {
        self.w.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Signed Euclidean distance to the hyperplane.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        self.decision(x) / self.norm()
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        self.signed_distance(x).abs()
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.decision(x) >= 0.0)
    }

    pub fn scaled(&self, c: f64) -> Hyperplane {
        Hyperplane {
            w: self.w.iter().map(|w| w * c).collect(),
            b: self.b * c,
            margin: self.margin / c,
        }
    }
}

/// Fits a linear max-margin separator to labelled points.
pub fn fit_boundary(xs: &[Vec<f64>], ys: &[u8], options: &SvmOptions) -> Result<Hyperplane> {
    let dim = xs.first().map_or(0, Vec::len);
    if xs.len() != ys.len() || xs.iter().any(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch("ragged SVM input".into()));
    }
    let positives = ys.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == ys.len() {
        return Err(Error::DegenerateData("both classes must be present".into()));
    }
    if xs.iter().all(|x| x == &xs[0]) {
        return Err(Error::DegenerateData("all points identical".into()));
    }
    let (mean, scale) = standardization(xs, dim);
    let zs: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let mut z: Vec<f64> = x
                .iter()
                .zip(mean.iter().zip(&scale))
                .map(|(v, (m, s))| (v - m) / s)
                .collect();
            z.push(1.0);
            z
        })
        .collect();
    let signs: Vec<f64> = ys.iter().map(|&y| if y == 1 { 1.0 } else { -1.0 }).collect();
    let n = xs.len() as f64;
    let lambda = options.lambda;
    let radius = 1.0 / lambda.sqrt();

    let mut w = vec![0.0; dim + 1];
    let mut avg = vec![0.0; dim + 1];
    let mut averaged = 0usize;
    let tail_start = options.iterations / 2;
    let mut sub = vec![0.0; dim + 1];
    for t in 1..=options.iterations {
        sub.iter_mut().for_each(|s| *s = 0.0);
        for (z, &s) in zs.iter().zip(&signs) {
            let margin = s * z.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            if margin < 1.0 {
                for (g, v) in sub.iter_mut().zip(z) {
                    *g += s * v;
                }
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        for (wk, g) in w.iter_mut().zip(&sub) {
            *wk = (1.0 - eta * lambda) * *wk + eta * g / n;
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > radius {
            w.iter_mut().for_each(|v| *v *= radius / norm);
        }
        if t > tail_start {
            averaged += 1;
            for (a, v) in avg.iter_mut().zip(&w) {
                *a += (v - *a) / averaged as f64;
            }
        }
    }

    let w_raw: Vec<f64> = avg[..dim].iter().zip(&scale).map(|(w, s)| w / s).collect();
    let b_raw = avg[dim] - avg[..dim].iter().zip(mean.iter().zip(&scale)).map(|(w, (m, s))| w * m / s).sum::<f64>();
    let norm = w_raw.iter().map(|w| w * w).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::DegenerateData("separator collapsed to zero".into()));
    }
    Ok(Hyperplane {
        w: w_raw,
        b: b_raw,
        margin: 1.0 / norm,
    })
}
