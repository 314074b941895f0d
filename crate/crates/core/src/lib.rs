//! Audio-visual scene classification with two-phase training.
//!
//! Phase I trains one backbone per input view (three audio spectrogram
//! kinds, two visual models) and taps their FC(1024) or FC(10) activations
//! as embeddings. Phase II freezes the backbones and trains a fusion layer
//! plus a dense softmax head over the five embeddings.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod backbone;
pub mod config;
pub mod data_io;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod pipeline;
pub mod tensor;
pub mod training;

pub use backbone::{backbone_forward, load_embedding_set, tap_embedding, BackboneModel, EmbeddingSet, EmbeddingTap, ModelKind};
pub use error::{Error, Result};
pub use eval::{evaluate, modal_ablation, ConfusionMatrix, EvalReport};
pub use fusion::{fuse, fuse_backward, init_fusion_params, FusionMethod, FusionModel, FusionParams, Modality};
pub use tensor::{adam_step, dense_backward, dense_forward, softmax, AdamConfig, AdamState, DenseGrads, DenseLayer, Tensor};
pub use training::{finite_difference_audit, kl_loss, mixup_batch, train_phase1, train_phase2, LossConfig, MixupConfig};
