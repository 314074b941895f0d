use crate::error::{Error, Result};
use crate::tensor::{softmax_vjp, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda_l2: f64,
    pub epsilon_div: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_l2: 1e-4,
            epsilon_div: 1e-12,
        }
    }
}

/// `Σ_c y·ln(y/ŷ)` for one row, with `0·ln 0 = 0` and ŷ floored at `eps`.
pub(crate) fn kl_row(y: &[f64], p: &[f64], eps: f64) -> f64 {
    y.iter()
        .zip(p)
        .filter(|(yv, _)| **yv > 0.0)
        .map(|(yv, pv)| yv * (yv / pv.max(eps)).ln())
        .sum()
}

/// Gradient of [`kl_row`] with respect to the logits that produced `p`
/// through softmax.
pub(crate) fn kl_row_grad_logits(y: &[f64], p: &[f64], eps: f64) -> Vec<f64> {
    let dp: Vec<f64> = y
        .iter()
        .zip(p)
        .map(|(yv, pv)| if *pv >= eps { -yv / pv } else { 0.0 })
        .collect();
    softmax_vjp(p, &dp)
}

/// Summed KL divergence over the batch plus `λ/2·‖Θ‖²`.
pub fn kl_loss(y: &Tensor, yhat: &Tensor, params: &[f64], cfg: &LossConfig) -> Result<f64> {
    if y.shape() != yhat.shape() {
        return Err(Error::dims(y.shape(), yhat.shape()));
    }
    if y.data().iter().any(|v| *v < 0.0) {
        return Err(Error::Validation("negative target probability".into()));
    }
    if !(cfg.lambda_l2 >= 0.0) || !(cfg.epsilon_div > 0.0) {
        return Err(Error::Config("loss needs λ ≥ 0 and a positive epsilon".into()));
    }
    let k = *y.shape().last().ok_or_else(|| Error::EmptyInput("scalar targets".into()))?;
    let kl: f64 = y
        .data()
        .chunks(k)
        .zip(yhat.data().chunks(k))
        .map(|(yr, pr)| kl_row(yr, pr, cfg.epsilon_div))
        .sum();
    Ok(kl + 0.5 * cfg.lambda_l2 * params.iter().map(|t| t * t).sum::<f64>())
}
