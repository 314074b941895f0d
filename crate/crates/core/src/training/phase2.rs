use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::loss::{kl_row, kl_row_grad_logits};
use super::mixup::{mixup_samples, MixupConfig};
use super::phase1::add_l2;
use super::{argmax, check_batch_size, EpochRecord, LossConfig, Phase, TrainRun};
use crate::backbone::{BackboneModel, EmbeddingSet};
use crate::error::{Error, Result};
use crate::fusion::{fuse, fuse_backward, FusionModel};
use crate::tensor::{adam_step, softmax, AdamConfig, AdamState, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Config {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub mixup: MixupConfig,
    pub loss: LossConfig,
}

impl Default for Phase2Config {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 16,
            seed: 0,
            adam: AdamConfig {
                learning_rate: 5e-3,
                ..Default::default()
            },
            mixup: MixupConfig::default(),
            loss: LossConfig::default(),
        }
    }
}

/// SHA-256 over everything a backbone checkpoint carries.
pub fn backbone_digest(model: &BackboneModel) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update([model.kind().index() as u8, u8::from(model.is_frozen())]);
    let norm = model.input_norm();
    for v in norm.mean.iter().chain(&norm.std).chain(&model.flat_params()) {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}

fn check_sets(model: &FusionModel, sets: &[EmbeddingSet], targets: &[Vec<f64>]) -> Result<()> {
    let method = model.method;
    let d = model.params.dim();
    if model.head.in_dim() != method.output_dim(d) {
        return Err(Error::Contract(format!(
            "{method} at dimension {d} outputs {} values but the head takes {}",
            method.output_dim(d),
            model.head.in_dim()
        )));
    }
    if sets.len() != targets.len() {
        return Err(Error::dims(sets.len(), targets.len()));
    }
    for s in sets {
        if s.tap() != method.tap() {
            return Err(Error::Contract(format!(
                "{method} needs {} embeddings, got {}",
                method.tap(),
                s.tap()
            )));
        }
        if s.dim() != d {
            return Err(Error::Contract(format!(
                "{method} parameters have dimension {d}, embeddings {}",
                s.dim()
            )));
        }
    }
    if let Some(y) = targets.iter().find(|y| y.len() != model.head.out_dim()) {
        return Err(Error::dims(format!("label of dimension {}", model.head.out_dim()), y.len()));
    }
    Ok(())
}

fn batch_pass(model: &FusionModel, sets: &[EmbeddingSet], targets: &[Vec<f64>], eps: f64) -> Result<(f64, Vec<f64>, usize)> {
    let mask = model.mask();
    let n_fusion = mask.vector_count() * model.params.dim();
    let mut grads = vec![0.0; n_fusion + model.head.param_count()];
    let mut loss = 0.0;
    let mut correct = 0;
    for (e, y) in sets.iter().zip(targets) {
        let f = fuse(model.method, &model.params, e)?;
        let n = f.len();
        let f = f.reshape(vec![1, n])?;
        let logits = model.head.forward(&f)?;
        let p = softmax(&logits).into_data();
        loss += kl_row(y, &p, eps);
        correct += usize::from(argmax(&p) == argmax(y));
        let dz = kl_row_grad_logits(y, &p, eps);
        let k = dz.len();
        let hg = model.head.backward(&f, &Tensor::new(vec![1, k], dz)?)?;
        let fg = fuse_backward(model.method, &model.params, e, hg.input.data())?;
        let flat = fg.params.flatten(&mask);
        grads[..n_fusion].iter_mut().zip(&flat).for_each(|(g, v)| *g += v);
        let head = hg.weights.data().iter().chain(hg.bias.data());
        grads[n_fusion..].iter_mut().zip(head).for_each(|(g, v)| *g += v);
    }
    Ok((loss, grads, correct))
}

/// Loss and gradient of the full Phase-II graph (fuse, dense head, softmax,
/// KL plus ℓ2) with respect to [`FusionModel::trainable_params`].
pub fn fusion_loss_and_grad(
    model: &FusionModel,
    sets: &[EmbeddingSet],
    targets: &[Vec<f64>],
    cfg: &LossConfig,
) -> Result<(f64, Vec<f64>)> {
    check_sets(model, sets, targets)?;
    let (mut loss, mut grads, _) = batch_pass(model, sets, targets, cfg.epsilon_div)?;
    add_l2(&mut loss, &mut grads, &model.trainable_params(), cfg.lambda_l2);
    Ok((loss, grads))
}

/// Trains the fusion parameters and head on fixed embeddings. Every
/// backbone passed in must be frozen and is checked for changes afterwards.
pub fn train_phase2(
    model: &mut FusionModel,
    data: &[(EmbeddingSet, Vec<f64>)],
    backbones: &[&BackboneModel],
    cfg: &Phase2Config,
) -> Result<TrainRun> {
    if let Some(b) = backbones.iter().find(|b| !b.is_frozen()) {
        return Err(Error::FreezeViolation(format!(
            "{} must be frozen before Phase II",
            b.kind().display_name()
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput("no Phase II training samples".into()));
    }
    check_batch_size(cfg.batch_size)?;
    let sets: Vec<EmbeddingSet> = data.iter().map(|(e, _)| e.clone()).collect();
    let targets: Vec<Vec<f64>> = data.iter().map(|(_, y)| y.clone()).collect();
    check_sets(model, &sets, &targets)?;
    let digests: Vec<[u8; 32]> = backbones.iter().map(|b| backbone_digest(b)).collect();

    model.params.apply_modality(model.modality);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut theta = model.trainable_params();
    let mut state = AdamState::new(cfg.adam, &[theta.len()]);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct, mut batches) = (0.0, 0usize, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<EmbeddingSet> = chunk.iter().map(|&i| sets[i].clone()).collect();
            let ys: Vec<Vec<f64>> = chunk.iter().map(|&i| targets[i].clone()).collect();
            let (mx, my) = mixup_samples(&xs, &ys, &cfg.mixup, &mut rng)?;
            let (mut loss, mut grads, c) = batch_pass(model, &mx, &my, cfg.loss.epsilon_div)?;
            add_l2(&mut loss, &mut grads, &theta, cfg.loss.lambda_l2);
            let n = theta.len();
            let (next, st) = adam_step(&state, &Tensor::vector(theta), &Tensor::new(vec![n], grads)?)?;
            state = st;
            theta = next.into_data();
            model.load_trainable(&theta)?;
            loss_sum += loss;
            correct += c;
            batches += 1;
        }
        history.push(EpochRecord {
            epoch,
            loss: loss_sum / batches as f64,
            accuracy: correct as f64 / data.len() as f64,
        });
    }

    for (b, before) in backbones.iter().zip(&digests) {
        if backbone_digest(b) != *before {
            return Err(Error::FreezeViolation(format!(
                "{} changed during Phase II",
                b.kind().display_name()
            )));
        }
    }
    Ok(TrainRun {
        phase: Phase::II,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
        history,
    })
}
