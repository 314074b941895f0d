use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::loss::{kl_row, kl_row_grad_logits};
use super::mixup::{mixup_samples, MixupConfig};
use super::{argmax, check_batch_size, EpochRecord, LossConfig, Phase, TrainRun};
use crate::backbone::{BackboneModel, InputNorm};
use crate::error::{Error, Result};
use crate::tensor::{adam_step, AdamConfig, AdamState, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Config {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub mixup: MixupConfig,
    pub loss: LossConfig,
    /// Refit the per-channel input standardization on the training inputs
    /// before the first step.
    pub fit_input_norm: bool,
}

impl Default for Phase1Config {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 16,
            seed: 0,
            adam: AdamConfig::default(),
            mixup: MixupConfig::default(),
            loss: LossConfig::default(),
            fit_input_norm: true,
        }
    }
}

struct SampleResult {
    loss: f64,
    grads: Vec<f64>,
    correct: bool,
}

fn batch_pass(
    model: &BackboneModel,
    inputs: &[Tensor],
    targets: &[Vec<f64>],
    eps: f64,
) -> Result<(f64, Vec<f64>, usize)> {
    let per_sample: Vec<SampleResult> = inputs
        .par_iter()
        .zip(targets)
        .map(|(x, y)| {
            let (out, trace) = model.forward_traced(x)?;
            let p = out.probs.data();
            let dlogits = kl_row_grad_logits(y, p, eps);
            Ok(SampleResult {
                loss: kl_row(y, p, eps),
                grads: model.backward(&trace, &dlogits)?,
                correct: argmax(p) == argmax(y),
            })
        })
        .collect::<Result<_>>()?;
    let mut loss = 0.0;
    let mut grads = vec![0.0; model.param_count()];
    let mut correct = 0;
    for s in per_sample {
        loss += s.loss;
        grads.iter_mut().zip(&s.grads).for_each(|(g, v)| *g += v);
        correct += usize::from(s.correct);
    }
    Ok((loss, grads, correct))
}

/// Summed KL loss plus `λ/2·‖Θ‖²` over a batch and its gradient with
/// respect to [`BackboneModel::flat_params`].
pub fn backbone_loss_and_grad(
    model: &BackboneModel,
    inputs: &[Tensor],
    targets: &[Vec<f64>],
    cfg: &LossConfig,
) -> Result<(f64, Vec<f64>)> {
    let (mut loss, mut grads, _) = batch_pass(model, inputs, targets, cfg.epsilon_div)?;
    let theta = model.flat_params();
    add_l2(&mut loss, &mut grads, &theta, cfg.lambda_l2);
    Ok((loss, grads))
}

pub(crate) fn add_l2(loss: &mut f64, grads: &mut [f64], theta: &[f64], lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    *loss += 0.5 * lambda * theta.iter().map(|t| t * t).sum::<f64>();
    grads.iter_mut().zip(theta).for_each(|(g, t)| *g += lambda * t);
}

/// Minibatch loop of mixup, forward, KL loss, backprop and Adam. The model
/// is updated in place.
pub fn train_phase1(model: &mut BackboneModel, data: &[(Tensor, Vec<f64>)], cfg: &Phase1Config) -> Result<TrainRun> {
    if model.is_frozen() {
        return Err(Error::FreezeViolation(format!(
            "{} is frozen and cannot be trained",
            model.kind().display_name()
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput("no Phase I training samples".into()));
    }
    check_batch_size(cfg.batch_size)?;
    let classes = model.arch().classes;
    if let Some((_, y)) = data.iter().find(|(_, y)| y.len() != classes) {
        return Err(Error::dims(format!("label of dimension {classes}"), y.len()));
    }
    let shape = model.arch().input_shape;
    if let Some((x, _)) = data.iter().find(|(x, _)| x.shape() != shape) {
        return Err(Error::dims(shape, x.shape()));
    }

    if cfg.fit_input_norm {
        let inputs: Vec<Tensor> = data.iter().map(|(x, _)| x.clone()).collect();
        model.set_input_norm(InputNorm::fit(&inputs, shape[2]))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(cfg.adam, &[model.param_count()]);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct, mut batches) = (0.0, 0usize, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<Tensor> = chunk.iter().map(|&i| data[i].0.clone()).collect();
            let ys: Vec<Vec<f64>> = chunk.iter().map(|&i| data[i].1.clone()).collect();
            let (mx, my) = mixup_samples(&xs, &ys, &cfg.mixup, &mut rng)?;
            let (mut loss, mut grads, c) = batch_pass(model, &mx, &my, cfg.loss.epsilon_div)?;
            let theta = model.flat_params();
            add_l2(&mut loss, &mut grads, &theta, cfg.loss.lambda_l2);
            let n = theta.len();
            let (next, st) = adam_step(&state, &Tensor::vector(theta), &Tensor::new(vec![n], grads)?)?;
            state = st;
            model.load_flat(next.data())?;
            loss_sum += loss;
            correct += c;
            batches += 1;
        }
        history.push(EpochRecord {
            epoch,
            loss: loss_sum / batches as f64,
            accuracy: correct as f64 / data.len() as f64,
        });
        log::debug!(
            "{} epoch {epoch}: loss {:.5} acc {:.3}",
            model.kind().display_name(),
            loss_sum / batches as f64,
            correct as f64 / data.len() as f64
        );
    }
    Ok(TrainRun {
        phase: Phase::I,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
        history,
    })
}
