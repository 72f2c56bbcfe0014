//! Two-layer fully connected classifier: `tanh` hidden layer, logistic
//! output, binary cross-entropy with L2 on the weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability bounds used by the prior-only classifier.
pub const PRIOR_CLIP: (f64, f64) = (0.01, 0.99);
/// Keeps `predict_proba` strictly inside (0, 1).
const OUTPUT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Step size at epoch `e` is `learning_rate / (1 + decay * e)`.
    pub decay: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            hidden: 32,
            epochs: 500,
            learning_rate: 1e-2,
            decay: 1e-3,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Trained network plus the feature standardization it was fit with.
/// A `prior` value replaces the network with a constant output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub dim: usize,
    pub hidden: usize,
    /// `hidden x dim`
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub prior: Option<f64>,
    pub hyper: Hyper,
}

impl ClassifierParams {
    /// All-zero network: predicts 0.5 everywhere.
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        ClassifierParams {
            dim,
            hidden,
            w1: vec![vec![0.0; dim]; hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
            prior: None,
            hyper: Hyper { hidden, ..Hyper::default() },
        }
    }

    /// Constant classifier.
    pub fn constant(dim: usize, p: f64) -> Self {
        let mut c = Self::zeros(dim, 0);
        c.prior = Some(p);
        c
    }

    /// Cold-start classifier (no labels yet).
    pub fn cold_start(dim: usize) -> Self {
        Self::constant(dim, 0.5)
    }

    pub fn n_params(&self) -> usize {
        self.hidden * self.dim + 2 * self.hidden + 1
    }

    /// Weights flattened as `[w1 (row-major), b1, w2, b2]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for row in &self.w1 {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.push(self.b2);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let (d, h) = (self.dim, self.hidden);
        for (j, row) in self.w1.iter_mut().enumerate() {
            row.copy_from_slice(&flat[j * d..(j + 1) * d]);
        }
        self.b1.copy_from_slice(&flat[h * d..h * d + h]);
        self.w2.copy_from_slice(&flat[h * d + h..h * d + 2 * h]);
        self.b2 = flat[h * d + 2 * h];
    }

    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Output logit for an already standardized input, with hidden
    /// activations written to `hidden`.
    fn logit_std(&self, z: &[f64], hidden: &mut [f64]) -> f64 {
        let mut out = self.b2;
        for j in 0..self.hidden {
            let a = self.b1[j] + self.w1[j].iter().zip(z).map(|(w, v)| w * v).sum::<f64>();
            hidden[j] = a.tanh();
            out += self.w2[j] * hidden[j];
        }
        out
    }

    /// `P(y = 1 | x)`, strictly inside (0, 1).
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "feature vector has {} entries, classifier expects {}",
                x.len(),
                self.dim
            )));
        }
        if let Some(p) = self.prior {
            return Ok(p);
        }
        let z = self.standardize(x);
        let mut hidden = vec![0.0; self.hidden];
        let p = sigmoid(self.logit_std(&z, &mut hidden));
        Ok(p.clamp(OUTPUT_EPS, 1.0 - OUTPUT_EPS))
    }

    /// `[P(y = 0 | x), P(y = 1 | x)]`
    pub fn predict_pair(&self, x: &[f64]) -> Result<[f64; 2]> {
        let p = self.predict_proba(x)?;
        Ok([1.0 - p, p])
    }

    /// Mean binary cross-entropy plus `l2 / 2 * |W|^2`, and its gradient in
    /// the [`to_flat`](Self::to_flat) layout. Inputs must already be
    /// standardized.
    pub fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[u8]) -> (f64, Vec<f64>) {
        let (d, h) = (self.dim, self.hidden);
        let n = xs.len().max(1) as f64;
        let mut grad = vec![0.0; self.n_params()];
        let mut loss = 0.0;
        let mut hidden = vec![0.0; h];
        for (z, &y) in xs.iter().zip(ys) {
            let logit = self.logit_std(z, &mut hidden);
            let y = y as f64;
            loss += softplus(logit) - y * logit;
            let delta = (sigmoid(logit) - y) / n;
            for j in 0..h {
                grad[h * d + h + j] += delta * hidden[j];
                let back = delta * self.w2[j] * (1.0 - hidden[j] * hidden[j]);
                grad[h * d + j] += back;
                let row = &mut grad[j * d..(j + 1) * d];
                for (g, v) in row.iter_mut().zip(z) {
                    *g += back * v;
                }
            }
            grad[h * d + 2 * h] += delta;
        }
        loss /= n;
        let l2 = self.hyper.l2;
        let mut reg = 0.0;
        for j in 0..h {
            for i in 0..d {
                let w = self.w1[j][i];
                reg += w * w;
                grad[j * d + i] += l2 * w;
            }
            let w = self.w2[j];
            reg += w * w;
            grad[h * d + h + j] += l2 * w;
        }
        (loss + 0.5 * l2 * reg, grad)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Per-feature mean and scale (population std, 1 where the feature is
/// constant).
pub fn standardization(xs: &[Vec<f64>], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len().max(1) as f64;
    let mut mean = vec![0.0; dim];
    for x in xs {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for x in xs {
        for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let scale = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

/// Fits the classifier by full-batch Adam from a seeded initialization.
///
/// With fewer than two classes present the result is the constant prior:
/// 0.5 for no data, otherwise the positive-class frequency clipped to
/// [`PRIOR_CLIP`].
pub fn train(xs: &[Vec<f64>], ys: &[u8], dim: usize, hyper: &Hyper) -> Result<ClassifierParams> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows for {} labels",
            xs.len(),
            ys.len()
        )));
    }
    if let Some(x) = xs.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "feature row has {} entries, expected {dim}",
            x.len()
        )));
    }
    let positives = ys.iter().filter(|&&y| y == 1).count();
    if xs.is_empty() {
        return Ok(ClassifierParams::cold_start(dim));
    }
    if positives == 0 || positives == ys.len() {
        let freq = positives as f64 / ys.len() as f64;
        return Ok(ClassifierParams::constant(dim, freq.clamp(PRIOR_CLIP.0, PRIOR_CLIP.1)));
    }

    let h = hyper.hidden.max(1);
    let (mean, scale) = standardization(xs, dim);
    let mut params = ClassifierParams {
        dim,
        hidden: h,
        w1: vec![vec![0.0; dim]; h],
        b1: vec![0.0; h],
        w2: vec![0.0; h],
        b2: 0.0,
        mean,
        scale,
        prior: None,
        hyper: Hyper { hidden: h, ..*hyper },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let a1 = (6.0 / (dim + h) as f64).sqrt();
    let a2 = (6.0 / (h + 1) as f64).sqrt();
    for row in params.w1.iter_mut() {
        for w in row.iter_mut() {
            *w = rng.random_range(-a1..a1);
        }
    }
    for w in params.w2.iter_mut() {
        *w = rng.random_range(-a2..a2);
    }

    let zs: Vec<Vec<f64>> = xs.iter().map(|x| params.standardize(x)).collect();
    let mut theta = params.to_flat();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    for epoch in 0..hyper.epochs {
        params.set_flat(&theta);
        let (_, grad) = params.loss_and_grad(&zs, ys);
        let step = hyper.learning_rate / (1.0 + hyper.decay * epoch as f64);
        let t = (epoch + 1) as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for k in 0..theta.len() {
            m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
            theta[k] -= step * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
        }
    }
    params.set_flat(&theta);
    Ok(params)
}

/// Fraction of rows whose thresholded prediction matches the label.
pub fn accuracy(params: &ClassifierParams, xs: &[Vec<f64>], ys: &[u8]) -> Result<f64> {
    if xs.is_empty() {
        return Ok(1.0);
    }
    let mut hits = 0usize;
    for (x, &y) in xs.iter().zip(ys) {
        let p = params.predict_proba(x)?;
        if u8::from(p >= 0.5) == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / xs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let y = (i % 2) as u8;
            let c = if y == 1 { 3.0 } else { -3.0 };
            xs.push(vec![c + rng.random_range(-1.0..1.0), c + rng.random_range(-1.0..1.0)]);
            ys.push(y);
        }
        (xs, ys)
    }

    #[test]
    fn zero_network_predicts_half() {
        let c = ClassifierParams::zeros(3, 4);
        assert_eq!(c.predict_proba(&[1.0, -2.0, 5.0]).unwrap(), 0.5);
    }

    #[test]
    fn dimension_checked() {
        let c = ClassifierParams::zeros(3, 4);
        assert!(matches!(c.predict_proba(&[1.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn separable_blobs_fit_exactly() {
        let (xs, ys) = blobs(20, 1);
        let c = train(&xs, &ys, 2, &Hyper::default()).unwrap();
        assert_eq!(accuracy(&c, &xs, &ys).unwrap(), 1.0);
    }

    #[test]
    fn single_class_gives_clipped_prior() {
        let xs = vec![vec![0.0], vec![1.0]];
        let c = train(&xs, &[1, 1], 1, &Hyper::default()).unwrap();
        assert_eq!(c.predict_proba(&[7.0]).unwrap(), 0.99);
        let c = train(&xs, &[0, 0], 1, &Hyper::default()).unwrap();
        assert_eq!(c.predict_proba(&[7.0]).unwrap(), 0.01);
        let c = train(&[], &[], 1, &Hyper::default()).unwrap();
        assert_eq!(c.predict_proba(&[7.0]).unwrap(), 0.5);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let (xs, ys) = blobs(30, 4);
        let h = Hyper { seed: 9, ..Hyper::default() };
        assert_eq!(train(&xs, &ys, 2, &h).unwrap(), train(&xs, &ys, 2, &h).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let (xs, ys) = blobs(10, 2);
        let c = train(&xs, &ys, 2, &Hyper { epochs: 5, ..Hyper::default() }).unwrap();
        let back: ClassifierParams = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn positive_affine_rescaling_leaves_predictions_unchanged() {
        let (xs, ys) = blobs(24, 6);
        let scale = [250.0, 0.02];
        let shift = [-40.0, 7.5];
        let warp = |x: &[f64]| -> Vec<f64> { x.iter().zip(scale.iter().zip(&shift)).map(|(v, (a, b))| a * v + b).collect() };
        let warped: Vec<Vec<f64>> = xs.iter().map(|x| warp(x)).collect();
        let h = Hyper { epochs: 200, ..Hyper::default() };
        let c = train(&xs, &ys, 2, &h).unwrap();
        let w = train(&warped, &ys, 2, &h).unwrap();
        for x in &xs {
            let d = (c.predict_proba(x).unwrap() - w.predict_proba(&warp(x)).unwrap()).abs();
            assert!(d < 1e-9, "{d:e}");
        }
    }

    proptest! {
        #[test]
        fn probabilities_normalized(seed in 0u64..1000, x0 in -50.0f64..50.0, x1 in -50.0f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut c = ClassifierParams::zeros(2, 5);
            let flat: Vec<f64> = (0..c.n_params()).map(|_| rng.random_range(-5.0..5.0)).collect();
            c.set_flat(&flat);
            let [p0, p1] = c.predict_pair(&[x0, x1]).unwrap();
            prop_assert!(p1 > 0.0 && p1 < 1.0);
            prop_assert_eq!(p0 + p1, 1.0);
        }
    }
}
