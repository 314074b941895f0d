use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::backbone::EmbeddingSet;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixupConfig {
    pub alpha: f64,
    pub enabled: bool,
}

impl Default for MixupConfig {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            enabled: true,
        }
    }
}

/// Inputs that can be blended as `λ·self + (1−λ)·other`.
pub trait Mixable: Clone {
    fn mix(&self, lambda: f64, other: &Self) -> Self;
}

impl Mixable for Tensor {
    fn mix(&self, lambda: f64, other: &Self) -> Self {
        self.lincomb(lambda, other, 1.0 - lambda).expect("mixed inputs share a shape")
    }
}

impl Mixable for EmbeddingSet {
    fn mix(&self, lambda: f64, other: &Self) -> Self {
        self.lincomb(lambda, other, 1.0 - lambda).expect("mixed sets share a tap and dimension")
    }
}

fn check_labels(ys: &[Vec<f64>]) -> Result<()> {
    for (i, y) in ys.iter().enumerate() {
        if y.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Validation(format!("label row {i} has negative or non-finite entries")));
        }
        let s: f64 = y.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("label row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Draws a partner permutation and one `λ ~ Beta(α, α)` per sample, then
/// mixes. With mixup disabled the batch is returned unchanged.
pub fn mixup_samples<X: Mixable, R: Rng + ?Sized>(
    xs: &[X],
    ys: &[Vec<f64>],
    cfg: &MixupConfig,
    rng: &mut R,
) -> Result<(Vec<X>, Vec<Vec<f64>>)> {
    if !(cfg.alpha > 0.0) {
        return Err(Error::Config(format!("mixup alpha must be positive, got {}", cfg.alpha)));
    }
    if xs.len() != ys.len() {
        return Err(Error::dims(xs.len(), ys.len()));
    }
    check_labels(ys)?;
    if !cfg.enabled {
        return Ok((xs.to_vec(), ys.to_vec()));
    }
    let beta = Beta::new(cfg.alpha, cfg.alpha).map_err(|e| Error::Config(e.to_string()))?;
    let mut perm: Vec<usize> = (0..xs.len()).collect();
    perm.shuffle(rng);
    let lambdas: Vec<f64> = (0..xs.len()).map(|_| beta.sample(rng)).collect();
    mixup_with(xs, ys, &perm, &lambdas)
}

/// Mixing with a given partner permutation and per-sample weights.
pub fn mixup_with<X: Mixable>(
    xs: &[X],
    ys: &[Vec<f64>],
    partners: &[usize],
    lambdas: &[f64],
) -> Result<(Vec<X>, Vec<Vec<f64>>)> {
    let n = xs.len();
    if ys.len() != n || partners.len() != n || lambdas.len() != n {
        return Err(Error::dims(n, (ys.len(), partners.len(), lambdas.len())));
    }
    if let Some(&j) = partners.iter().find(|&&j| j >= n) {
        return Err(Error::Validation(format!("partner index {j} out of range")));
    }
    if let Some(l) = lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::Validation(format!("mixing weight {l} outside [0, 1]")));
    }
    let mut mx = Vec::with_capacity(n);
    let mut my = Vec::with_capacity(n);
    for i in 0..n {
        let (j, lam) = (partners[i], lambdas[i]);
        if lam == 1.0 {
            mx.push(xs[i].clone());
            my.push(ys[i].clone());
            continue;
        }
        mx.push(xs[i].mix(lam, &xs[j]));
        my.push(ys[i].iter().zip(&ys[j]).map(|(a, b)| lam * a + (1.0 - lam) * b).collect());
    }
    Ok((mx, my))
}

/// Row-wise mixup over batched tensors: `xs` is `batch × …`, `ys` is
/// `batch × k`.
pub fn mixup_batch<R: Rng + ?Sized>(xs: &Tensor, ys: &Tensor, cfg: &MixupConfig, rng: &mut R) -> Result<(Tensor, Tensor)> {
    let batch = *xs.shape().first().ok_or_else(|| Error::EmptyInput("empty batch".into()))?;
    let (yb, k) = ys.matrix_dims()?;
    if yb != batch || batch == 0 {
        return Err(Error::dims(batch, yb));
    }
    let row = xs.len() / batch;
    let x_rows: Vec<Tensor> = xs.data().chunks(row).map(|r| Tensor::vector(r.to_vec())).collect();
    let y_rows: Vec<Vec<f64>> = ys.data().chunks(k).map(<[f64]>::to_vec).collect();
    let (mx, my) = mixup_samples(&x_rows, &y_rows, cfg, rng)?;
    let xd: Vec<f64> = mx.into_iter().flat_map(Tensor::into_data).collect();
    let yd: Vec<f64> = my.into_iter().flatten().collect();
    Ok((Tensor::new(xs.shape().to_vec(), xd)?, Tensor::new(vec![batch, k], yd)?))
}
