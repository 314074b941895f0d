//! Dense row-major tensors, fully connected layers with hand-written
//! gradients, softmax and the Adam optimizer.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Dense row-major array of `f64` values. The batch dimension, when present,
/// leads.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, checking that every dimension is positive, that the
    /// shape covers the data exactly and that all values are finite.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Validation(format!(
                "tensor shape must be non-empty with positive dims, got {shape:?}"
            )));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dims(
                format!("{n} elements for shape {shape:?}"),
                format!("{} elements", data.len()),
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value {} at flat index {i}",
                data[i]
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        assert!(
            !shape.is_empty() && shape.iter().all(|&d| d > 0),
            "invalid shape {shape:?}"
        );
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    /// One-dimensional tensor; panics on empty input.
    pub fn vector(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "empty vector");
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// Matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Validation("ragged rows".into()));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn random_normal<R: Rng + ?Sized>(shape: &[usize], std: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std).expect("std must be finite and non-negative");
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(|_| normal.sample(rng)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Rows and columns of a rank-2 tensor.
    pub fn matrix_dims(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            other => Err(Error::dims("rank-2 tensor", other)),
        }
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.shape[self.shape.len() - 1];
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Elementwise `self * a + other * b`.
    pub fn lincomb(&self, a: f64, other: &Tensor, b: f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::dims(&self.shape, &other.shape));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (m, k) = self.matrix_dims()?;
        let (k2, n) = rhs.matrix_dims()?;
        if k != k2 {
            return Err(Error::dims(
                format!("rhs with {k} rows to match lhs {:?}", self.shape),
                &rhs.shape,
            ));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for (p, &a) in self.data[i * k..(i + 1) * k].iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (r, c) = self.matrix_dims()?;
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(Tensor {
            shape: vec![c, r],
            data,
        })
    }
}

/// Fully connected layer computing `y = x·W + b` row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Tensor,
    bias: Tensor,
}

/// Gradients of a scalar loss with respect to a dense layer and its input.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weights: Tensor,
    pub bias: Tensor,
    pub input: Tensor,
}

impl DenseLayer {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        let (_, out_dim) = weights.matrix_dims()?;
        if bias.shape() != [out_dim] {
            return Err(Error::dims([out_dim], bias.shape()));
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: Tensor::zeros(&[in_dim, out_dim]),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    /// He-normal weights, zero bias.
    pub fn he_init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let std = (2.0 / in_dim as f64).sqrt();
        Self {
            weights: Tensor::random_normal(&[in_dim, out_dim], std, rng),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut Tensor {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut Tensor {
        &mut self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        match x.shape() {
            [batch, d] if *d == self.in_dim() => Ok(*batch),
            other => Err(Error::dims(
                format!("[batch, {}] for layer {:?}", self.in_dim(), self.weights.shape()),
                other,
            )),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut y = x.matmul(&self.weights)?;
        let out = self.out_dim();
        for row in y.data.chunks_mut(out) {
            for (v, b) in row.iter_mut().zip(&self.bias.data) {
                *v += b;
            }
        }
        Ok(y)
    }

    /// `dW = xᵀ·g`, `db = Σ_rows g`, `dx = g·Wᵀ`.
    pub fn backward(&self, x: &Tensor, upstream: &Tensor) -> Result<DenseGrads> {
        let batch = self.check_input(x)?;
        if upstream.shape() != [batch, self.out_dim()] {
            return Err(Error::dims([batch, self.out_dim()], upstream.shape()));
        }
        let weights = x.transpose()?.matmul(upstream)?;
        let mut bias = vec![0.0; self.out_dim()];
        for row in upstream.data.chunks(self.out_dim()) {
            for (b, g) in bias.iter_mut().zip(row) {
                *b += g;
            }
        }
        let input = upstream.matmul(&self.weights.transpose()?)?;
        Ok(DenseGrads {
            weights,
            bias: Tensor::vector(bias),
            input,
        })
    }

    /// Weights followed by bias, flattened.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = self.weights.data.clone();
        v.extend_from_slice(&self.bias.data);
        v
    }

    /// Inverse of [`flat_params`](Self::flat_params); returns the number of
    /// values consumed.
    pub fn load_flat(&mut self, values: &[f64]) -> Result<usize> {
        let n = self.param_count();
        if values.len() < n {
            return Err(Error::dims(n, values.len()));
        }
        let w = self.weights.len();
        self.weights.data.copy_from_slice(&values[..w]);
        self.bias.data.copy_from_slice(&values[w..n]);
        Ok(n)
    }
}

pub fn dense_forward(layer: &DenseLayer, x: &Tensor) -> Result<Tensor> {
    layer.forward(x)
}

pub fn dense_backward(layer: &DenseLayer, x: &Tensor, upstream: &Tensor) -> Result<DenseGrads> {
    layer.backward(x, upstream)
}

/// Row-wise softmax over the last dimension, max-subtracted.
pub fn softmax(x: &Tensor) -> Tensor {
    let k = *x.shape().last().expect("tensor has at least one dim");
    let mut data = x.data.clone();
    for row in data.chunks_mut(k) {
        softmax_in_place(row);
    }
    Tensor {
        shape: x.shape.clone(),
        data,
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Vector-Jacobian product of softmax: given probabilities `p` and
/// `g = dL/dp`, returns `dL/dz`.
pub(crate) fn softmax_vjp(p: &[f64], g: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
    p.iter().zip(g).map(|(pi, gi)| pi * (gi - dot)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moment estimates for one flat parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Tensor,
    pub v: Tensor,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(config: AdamConfig, shape: &[usize]) -> Self {
        Self {
            step: 0,
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
            config,
        }
    }
}

/// One bias-corrected Adam update. Returns the new parameters and state;
/// the inputs are left untouched.
pub fn adam_step(state: &AdamState, params: &Tensor, grads: &Tensor) -> Result<(Tensor, AdamState)> {
    for (name, t) in [("grads", grads), ("m", &state.m), ("v", &state.v)] {
        if t.shape() != params.shape() {
            return Err(Error::dims(
                format!("{name} shaped like params {:?}", params.shape()),
                t.shape(),
            ));
        }
    }
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let step = state.step + 1;
    let bc1 = 1.0 - beta1.powi(step as i32);
    let bc2 = 1.0 - beta2.powi(step as i32);

    let n = params.len();
    let mut p = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let g = grads.data[i];
        let mi = beta1 * state.m.data[i] + (1.0 - beta1) * g;
        let vi = beta2 * state.v.data[i] + (1.0 - beta2) * g * g;
        let m_hat = mi / bc1;
        let v_hat = vi / bc2;
        p.push(params.data[i] - learning_rate * m_hat / (v_hat.sqrt() + epsilon));
        m.push(mi);
        v.push(vi);
    }
    let shape = params.shape.clone();
    Ok((
        Tensor {
            shape: shape.clone(),
            data: p,
        },
        AdamState {
            step,
            m: Tensor {
                shape: shape.clone(),
                data: m,
            },
            v: Tensor { shape, data: v },
            config: state.config,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    out[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        out
    }

    #[test]
    fn new_rejects_bad_tensors() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
        assert!(Tensor::new(vec![1], vec![f64::NAN]).is_err());
    }

    #[test]
    fn dense_identity_and_bias() {
        let eye = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let layer = DenseLayer::new(eye.clone(), Tensor::zeros(&[2])).unwrap();
        let x = Tensor::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(layer.forward(&x).unwrap().data(), &[3.0, 4.0]);

        let layer = DenseLayer::new(eye, Tensor::vector(vec![1.0, 1.0])).unwrap();
        let x = Tensor::zeros(&[1, 2]);
        assert_eq!(layer.forward(&x).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn dense_forward_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = Tensor::random_normal(&[3, 4], 1.0, &mut rng);
        let b = Tensor::random_normal(&[4], 1.0, &mut rng);
        let x = Tensor::random_normal(&[2, 3], 1.0, &mut rng);
        let layer = DenseLayer::new(w.clone(), b.clone()).unwrap();
        let y = layer.forward(&x).unwrap();
        let mut expect = naive_matmul(x.data(), w.data(), 2, 3, 4);
        for r in 0..2 {
            for c in 0..4 {
                expect[r * 4 + c] += b.data()[c];
            }
        }
        for (a, e) in y.data().iter().zip(&expect) {
            assert_abs_diff_eq!(a, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn dense_shape_mismatch_names_both_shapes() {
        let layer = DenseLayer::zeros(3, 2);
        let err = layer.forward(&Tensor::zeros(&[1, 4])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[1, 4]") && msg.contains("[3, 2]"), "{msg}");
    }

    #[test]
    fn dense_backward_trivial_cases() {
        let layer = DenseLayer::new(Tensor::vector(vec![5.0]).reshape(vec![1, 1]).unwrap(), Tensor::zeros(&[1])).unwrap();
        let x = Tensor::from_rows(&[vec![2.0]]).unwrap();
        let g = Tensor::from_rows(&[vec![3.0]]).unwrap();
        let grads = layer.backward(&x, &g).unwrap();
        assert_eq!(grads.weights.data(), &[6.0]);
        assert_eq!(grads.bias.data(), &[3.0]);
        assert_eq!(grads.input.data(), &[15.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = DenseLayer::he_init(4, 3, &mut rng);
        let x = Tensor::random_normal(&[2, 4], 1.0, &mut rng);
        let grads = layer.backward(&x, &Tensor::zeros(&[2, 3])).unwrap();
        assert!(grads.weights.data().iter().chain(grads.bias.data()).chain(grads.input.data()).all(|&v| v == 0.0));
    }

    /// Scalar loss L = Σ c ⊙ dense(x) for a fixed random c, checked against
    /// central differences.
    fn check_dense_fd(in_dim: usize, out_dim: usize, batch: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer = DenseLayer::new(
            Tensor::random_normal(&[in_dim, out_dim], 1.0, &mut rng),
            Tensor::random_normal(&[out_dim], 1.0, &mut rng),
        )
        .unwrap();
        let x = Tensor::random_normal(&[batch, in_dim], 1.0, &mut rng);
        let c = Tensor::random_normal(&[batch, out_dim], 1.0, &mut rng);
        let loss = |l: &DenseLayer, x: &Tensor| -> f64 {
            l.forward(x).unwrap().data().iter().zip(c.data()).map(|(a, b)| a * b).sum()
        };
        let grads = layer.backward(&x, &c).unwrap();
        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
        let mut worst: f64 = 0.0;
        let params = layer.flat_params();
        let mut analytic = grads.weights.data().to_vec();
        analytic.extend_from_slice(grads.bias.data());
        for i in 0..params.len() {
            let mut lp = layer.clone();
            let mut plus = params.clone();
            plus[i] += h;
            lp.load_flat(&plus).unwrap();
            let mut lm = layer.clone();
            let mut minus = params.clone();
            minus[i] -= h;
            lm.load_flat(&minus).unwrap();
            let num = (loss(&lp, &x) - loss(&lm, &x)) / (2.0 * h);
            worst = worst.max(rel(analytic[i], num));
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            let num = (loss(&layer, &xp) - loss(&layer, &xm)) / (2.0 * h);
            worst = worst.max(rel(grads.input.data()[i], num));
        }
        worst
    }

    #[test]
    fn dense_backward_matches_finite_differences() {
        assert!(check_dense_fd(3, 2, 2, 3) < 1e-4);
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&Tensor::vector(vec![0.0, 0.0]));
        assert_eq!(p.data(), &[0.5, 0.5]);
        let p = softmax(&Tensor::vector(vec![1000.0, 0.0]));
        assert!(p.all_finite());
        assert_abs_diff_eq!(p.data()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.data()[1], 0.0, epsilon = 1e-12);
        // direct exp/sum evaluation
        let (e1, e2, e3) = (1f64.exp(), 2f64.exp(), 3f64.exp());
        let s = e1 + e2 + e3;
        let p = softmax(&Tensor::vector(vec![1.0, 2.0, 3.0]));
        for (got, want) in p.data().iter().zip([e1 / s, e2 / s, e3 / s]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        for (got, want) in p.data().iter().zip([0.09003, 0.24473, 0.66524]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-5);
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let state = AdamState::new(AdamConfig::default(), &[3]);
        let params = Tensor::vector(vec![1.0, -2.0, 3.0]);
        let (p, s) = adam_step(&state, &params, &Tensor::zeros(&[3])).unwrap();
        assert_eq!(p, params);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn adam_first_step_magnitude_is_learning_rate() {
        let cfg = AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        };
        for g in [1e-3, 1.0, 1e3] {
            let state = AdamState::new(cfg, &[1]);
            let (p, _) = adam_step(&state, &Tensor::vector(vec![0.0]), &Tensor::vector(vec![g])).unwrap();
            // t = 1: m̂ = g, v̂ = g², update = lr·g/(|g|+ε)
            let expect = -0.1 * g / (g.abs() + 1e-8);
            assert_abs_diff_eq!(p.data()[0], expect, epsilon = 1e-15);
            assert_abs_diff_eq!(p.data()[0].abs(), 0.1, epsilon = 1e-5);
        }
    }

    #[test]
    fn adam_minimizes_parabola_like_scalar_oracle() {
        let cfg = AdamConfig {
            learning_rate: 0.05,
            ..AdamConfig::default()
        };
        // scalar oracle loop
        let (mut p, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=100 {
            let g = 2.0 * p;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            p -= 0.05 * mh / (vh.sqrt() + 1e-8);
        }
        let mut state = AdamState::new(cfg, &[1]);
        let mut params = Tensor::vector(vec![1.0]);
        for _ in 0..100 {
            let grads = Tensor::vector(vec![2.0 * params.data()[0]]);
            let (np, ns) = adam_step(&state, &params, &grads).unwrap();
            params = np;
            state = ns;
        }
        assert_abs_diff_eq!(params.data()[0], p, epsilon = 1e-12);
        assert!(params.data()[0].abs() < 0.1);
        assert_eq!(state.step, 100);
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let state = AdamState::new(AdamConfig::default(), &[2]);
        assert!(adam_step(&state, &Tensor::zeros(&[3]), &Tensor::zeros(&[3])).is_err());
        assert!(adam_step(&state, &Tensor::zeros(&[2]), &Tensor::zeros(&[3])).is_err());
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(vals in prop::collection::vec(-500.0f64..500.0, 1..40), k in 1usize..8) {
            let rows = vals.len() / k;
            prop_assume!(rows > 0);
            let t = Tensor::new(vec![rows, k], vals[..rows * k].to_vec()).unwrap();
            let p = softmax(&t);
            prop_assert!(p.all_finite());
            for r in 0..rows {
                let s: f64 = p.row(r).iter().sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
                prop_assert!(p.row(r).iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn dense_gradients_agree_with_fd(i in 1usize..=8, o in 1usize..=8, b in 1usize..=8, seed in 0u64..1000) {
            prop_assert!(check_dense_fd(i, o, b, seed) < 1e-4);
        }

        #[test]
        fn adam_is_deterministic(vals in prop::collection::vec(-10.0f64..10.0, 1..16), seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = vals.len();
            let params = Tensor::vector(vals);
            let grads = Tensor::random_normal(&[n], 1.0, &mut rng);
            let mut state = AdamState::new(AdamConfig::default(), &[n]);
            state.m = Tensor::random_normal(&[n], 0.1, &mut rng);
            let a = adam_step(&state, &params, &grads).unwrap();
            let b = adam_step(&state, &params, &grads).unwrap();
            prop_assert_eq!(a.0.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.0.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert!(a.1.v.data().iter().all(|&x| x >= 0.0));
            prop_assert_eq!(a.1, b.1);
        }
    }
}
