//! Phase-I feature producers.
//!
//! Each of the five models is a small convolutional stack (three 3×3 conv
//! blocks with 2×2 average pooling and ReLU, then global average pooling)
//! topped by the FC(1024) → FC(10) dense block. Embeddings are tapped at the
//! ReLU output of FC(1024) or at the pre-softmax FC(10) logits.

mod conv;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use conv::Conv3x3;
use conv::{avg_pool2, avg_pool2_backward};

use crate::data_io::EmbeddingCache;
use crate::dsp::SpectrogramKind;
use crate::error::{Error, Result};
use crate::tensor::{softmax, DenseLayer, Tensor};

pub const NUM_CLASSES: usize = 10;
pub const HIDDEN_DIM: usize = 1024;
pub const AUDIO_INPUT_SHAPE: [usize; 3] = [128, 305, 6];
pub const VISUAL_INPUT_SHAPE: [usize; 3] = [224, 224, 3];

/// The five Phase-I models, in fusion-slot order
/// (`ae_g, ae_m, ae_c, ve_i, ve_c` ↔ `w1..w5`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    AudGam,
    AudMel,
    AudCqt,
    VisInc,
    VisConv,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [Self::AudGam, Self::AudMel, Self::AudCqt, Self::VisInc, Self::VisConv];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AudGam => "aud_gam",
            Self::AudMel => "aud_mel",
            Self::AudCqt => "aud_cqt",
            Self::VisInc => "vis_inc",
            Self::VisConv => "vis_conv",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Self::AudGam => "Aud-GAM",
            Self::AudMel => "Aud-MEL",
            Self::AudCqt => "Aud-CQT",
            Self::VisInc => "Vis-INC",
            Self::VisConv => "Vis-CONV",
        }
    }

    /// Name of the embedding this model feeds into the fusion layer.
    pub fn slot_name(self) -> &'static str {
        match self {
            Self::AudGam => "ae_g",
            Self::AudMel => "ae_m",
            Self::AudCqt => "ae_c",
            Self::VisInc => "ve_i",
            Self::VisConv => "ve_c",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_audio(self) -> bool {
        self.feature_kind().is_some()
    }

    pub fn feature_kind(self) -> Option<SpectrogramKind> {
        match self {
            Self::AudGam => Some(SpectrogramKind::Gammatone),
            Self::AudMel => Some(SpectrogramKind::Mel),
            Self::AudCqt => Some(SpectrogramKind::Cqt),
            Self::VisInc | Self::VisConv => None,
        }
    }

    pub fn input_shape(self) -> [usize; 3] {
        if self.is_audio() {
            AUDIO_INPUT_SHAPE
        } else {
            VISUAL_INPUT_SHAPE
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown model '{s}' (expected aud_mel, aud_gam, aud_cqt, vis_inc or vis_conv)"
                ))
            })
    }
}

/// Dense layer whose activation is used as an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmbeddingTap {
    Fc1024,
    Fc10,
}

impl EmbeddingTap {
    pub fn dim(self) -> usize {
        match self {
            Self::Fc1024 => HIDDEN_DIM,
            Self::Fc10 => NUM_CLASSES,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fc1024 => "fc1024",
            Self::Fc10 => "fc10",
        }
    }
}

impl fmt::Display for EmbeddingTap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmbeddingTap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fc1024" => Ok(Self::Fc1024),
            "fc10" => Ok(Self::Fc10),
            other => Err(Error::Config(format!("unknown tap '{other}' (expected fc1024 or fc10)"))),
        }
    }
}

/// The five per-model embeddings of one sample, all of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    tap: EmbeddingTap,
    vectors: [Vec<f64>; 5],
}

impl EmbeddingSet {
    /// Builds a set whose vectors all have the tap's dimension.
    pub fn new(tap: EmbeddingTap, vectors: [Vec<f64>; 5]) -> Result<Self> {
        let set = Self::with_dim(tap, vectors)?;
        if set.dim() != tap.dim() {
            return Err(Error::Format(format!(
                "embeddings of dimension {} do not match tap {tap} (dimension {})",
                set.dim(),
                tap.dim()
            )));
        }
        Ok(set)
    }

    /// Builds a set of any common dimension; used for reduced-size fusion
    /// checks.
    pub fn with_dim(tap: EmbeddingTap, vectors: [Vec<f64>; 5]) -> Result<Self> {
        let d = vectors[0].len();
        if d == 0 {
            return Err(Error::EmptyInput("empty embedding".into()));
        }
        for (k, v) in ModelKind::ALL.iter().zip(&vectors) {
            if v.len() != d {
                return Err(Error::dims(
                    format!("{} of dimension {d}", k.slot_name()),
                    v.len(),
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("{} has non-finite values", k.slot_name())));
            }
        }
        Ok(Self { tap, vectors })
    }

    pub fn tap(&self) -> EmbeddingTap {
        self.tap
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn get(&self, kind: ModelKind) -> &[f64] {
        &self.vectors[kind.index()]
    }

    pub fn vectors(&self) -> &[Vec<f64>; 5] {
        &self.vectors
    }

    pub fn ae_g(&self) -> &[f64] {
        self.get(ModelKind::AudGam)
    }

    pub fn ae_m(&self) -> &[f64] {
        self.get(ModelKind::AudMel)
    }

    pub fn ae_c(&self) -> &[f64] {
        self.get(ModelKind::AudCqt)
    }

    pub fn ve_i(&self) -> &[f64] {
        self.get(ModelKind::VisInc)
    }

    pub fn ve_c(&self) -> &[f64] {
        self.get(ModelKind::VisConv)
    }

    /// `a·self + b·other`, slot by slot.
    pub fn lincomb(&self, a: f64, other: &EmbeddingSet, b: f64) -> Result<EmbeddingSet> {
        if self.dim() != other.dim() || self.tap != other.tap {
            return Err(Error::dims(self.dim(), other.dim()));
        }
        let vectors = std::array::from_fn(|i| {
            self.vectors[i]
                .iter()
                .zip(&other.vectors[i])
                .map(|(x, y)| a * x + b * y)
                .collect()
        });
        Ok(Self {
            tap: self.tap,
            vectors,
        })
    }
}

/// Layer widths of a backbone. The standard architecture is
/// `[8, 16, 32]` conv channels, 1024 hidden units and 10 classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackboneArch {
    pub input_shape: [usize; 3],
    pub conv_widths: Vec<usize>,
    pub hidden: usize,
    pub classes: usize,
}

impl BackboneArch {
    pub fn standard(kind: ModelKind) -> Self {
        Self {
            input_shape: kind.input_shape(),
            conv_widths: vec![8, 16, 32],
            hidden: HIDDEN_DIM,
            classes: NUM_CLASSES,
        }
    }

    fn validate(&self) -> Result<()> {
        let [h, w, c] = self.input_shape;
        let min = 1usize << self.conv_widths.len();
        if h < min || w < min || c == 0 {
            return Err(Error::Config(format!(
                "input {:?} too small for {} pooling stages",
                self.input_shape,
                self.conv_widths.len()
            )));
        }
        if self.conv_widths.is_empty() || self.conv_widths.contains(&0) || self.hidden == 0 || self.classes == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Fixed per-channel standardization applied before the first convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl InputNorm {
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    /// Per-channel mean and standard deviation over every cell of every input.
    pub fn fit(inputs: &[Tensor], channels: usize) -> Self {
        let mut sum = vec![0.0; channels];
        let mut sq = vec![0.0; channels];
        let mut n = 0usize;
        for t in inputs {
            for px in t.data().chunks(channels) {
                for (c, v) in px.iter().enumerate() {
                    sum[c] += v;
                    sq[c] += v * v;
                }
                n += 1;
            }
        }
        let n = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let var = (s / n - m * m).max(0.0);
                if var > 1e-12 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }
}

/// Outputs of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneOutput {
    pub emb1024: Tensor,
    pub emb10: Tensor,
    pub probs: Tensor,
}

impl BackboneOutput {
    pub fn tap(&self, tap: EmbeddingTap) -> &Tensor {
        match tap {
            EmbeddingTap::Fc1024 => &self.emb1024,
            EmbeddingTap::Fc10 => &self.emb10,
        }
    }
}

struct BlockTrace {
    input: Vec<f64>,
    h: usize,
    w: usize,
    pooled: Vec<f64>,
}

pub(crate) struct ForwardTrace {
    blocks: Vec<BlockTrace>,
    last_hw: (usize, usize),
    gap: Tensor,
    hidden_pre: Tensor,
    hidden: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneModel {
    pub(crate) kind: ModelKind,
    pub(crate) arch: BackboneArch,
    pub(crate) norm: InputNorm,
    pub(crate) convs: Vec<Conv3x3>,
    pub(crate) fc1: DenseLayer,
    pub(crate) fc2: DenseLayer,
    pub(crate) frozen: bool,
}

impl BackboneModel {
    /// Standard architecture with He-initialized weights.
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        Self::with_arch(kind, BackboneArch::standard(kind), seed).expect("standard architecture is valid")
    }

    /// Standard architecture with every weight and bias zero.
    pub fn zeros(kind: ModelKind) -> Self {
        let arch = BackboneArch::standard(kind);
        let mut in_ch = arch.input_shape[2];
        let convs = arch
            .conv_widths
            .iter()
            .map(|&w| {
                let c = Conv3x3::zeros(in_ch, w);
                in_ch = w;
                c
            })
            .collect();
        Self {
            kind,
            norm: InputNorm::identity(arch.input_shape[2]),
            convs,
            fc1: DenseLayer::zeros(in_ch, arch.hidden),
            fc2: DenseLayer::zeros(arch.hidden, arch.classes),
            arch,
            frozen: false,
        }
    }

    pub fn with_arch(kind: ModelKind, arch: BackboneArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_ch = arch.input_shape[2];
        let mut convs = Vec::with_capacity(arch.conv_widths.len());
        for &w in &arch.conv_widths {
            convs.push(Conv3x3::he_init(in_ch, w, &mut rng));
            in_ch = w;
        }
        let fc1 = DenseLayer::he_init(in_ch, arch.hidden, &mut rng);
        let fc2 = DenseLayer::he_init(arch.hidden, arch.classes, &mut rng);
        Ok(Self {
            kind,
            norm: InputNorm::identity(arch.input_shape[2]),
            arch,
            convs,
            fc1,
            fc2,
            frozen: false,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn arch(&self) -> &BackboneArch {
        &self.arch
    }

    pub fn input_norm(&self) -> &InputNorm {
        &self.norm
    }

    pub fn set_input_norm(&mut self, norm: InputNorm) -> Result<()> {
        let c = self.arch.input_shape[2];
        if norm.mean.len() != c || norm.std.len() != c {
            return Err(Error::dims(c, norm.mean.len()));
        }
        if norm.std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Validation("input std must be positive".into()));
        }
        self.norm = norm;
        Ok(())
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    pub fn pool_dim(&self) -> usize {
        self.fc1.in_dim()
    }

    pub fn head(&self) -> (&DenseLayer, &DenseLayer) {
        (&self.fc1, &self.fc2)
    }

    pub fn param_count(&self) -> usize {
        self.convs.iter().map(Conv3x3::param_count).sum::<usize>() + self.fc1.param_count() + self.fc2.param_count()
    }

    /// Conv weights and biases block by block, then FC(1024), then FC(10).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for c in &self.convs {
            v.extend_from_slice(&c.weights);
            v.extend_from_slice(&c.bias);
        }
        v.extend(self.fc1.flat_params());
        v.extend(self.fc2.flat_params());
        v
    }

    pub fn load_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::dims(self.param_count(), values.len()));
        }
        if self.frozen {
            return Err(Error::FreezeViolation(format!("{} is frozen", self.kind.display_name())));
        }
        let mut at = 0;
        for c in &mut self.convs {
            let n = c.weights.len();
            c.weights.copy_from_slice(&values[at..at + n]);
            at += n;
            let n = c.bias.len();
            c.bias.copy_from_slice(&values[at..at + n]);
            at += n;
        }
        at += self.fc1.load_flat(&values[at..])?;
        self.fc2.load_flat(&values[at..])?;
        Ok(())
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape() != self.arch.input_shape {
            return Err(Error::dims(
                format!("{} input {:?}", self.kind.display_name(), self.arch.input_shape),
                input.shape(),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor) -> Result<BackboneOutput> {
        Ok(self.forward_traced(input)?.0)
    }

    pub fn tap_embedding(&self, input: &Tensor, tap: EmbeddingTap) -> Result<Tensor> {
        let out = self.forward(input)?;
        Ok(match tap {
            EmbeddingTap::Fc1024 => out.emb1024,
            EmbeddingTap::Fc10 => out.emb10,
        })
    }

    pub(crate) fn forward_traced(&self, input: &Tensor) -> Result<(BackboneOutput, ForwardTrace)> {
        self.check_input(input)?;
        let [mut h, mut w, c0] = self.arch.input_shape;
        let mut x: Vec<f64> = input
            .data()
            .chunks(c0)
            .flat_map(|px| {
                px.iter()
                    .enumerate()
                    .map(|(c, v)| (v - self.norm.mean[c]) / self.norm.std[c])
                    .collect::<Vec<_>>()
            })
            .collect();

        let mut blocks = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let z = conv.forward(&x, h, w);
            let (pooled, oh, ow) = avg_pool2(&z, h, w, conv.out_ch);
            let activated = pooled.iter().map(|v| v.max(0.0)).collect();
            blocks.push(BlockTrace {
                input: std::mem::replace(&mut x, activated),
                h,
                w,
                pooled,
            });
            h = oh;
            w = ow;
        }
        let channels = self.pool_dim();
        let mut gap = vec![0.0; channels];
        for px in x.chunks(channels) {
            for (g, v) in gap.iter_mut().zip(px) {
                *g += v;
            }
        }
        let area = (h * w) as f64;
        gap.iter_mut().for_each(|g| *g /= area);
        let gap = Tensor::new(vec![1, channels], gap)?;
        let hidden_pre = self.fc1.forward(&gap)?;
        let hidden = Tensor::new(
            hidden_pre.shape().to_vec(),
            hidden_pre.data().iter().map(|v| v.max(0.0)).collect(),
        )?;
        let logits = self.fc2.forward(&hidden)?;
        let probs = softmax(&logits);
        let out = BackboneOutput {
            emb1024: Tensor::vector(hidden.data().to_vec()),
            emb10: Tensor::vector(logits.data().to_vec()),
            probs: Tensor::vector(probs.into_data()),
        };
        Ok((
            out,
            ForwardTrace {
                blocks,
                last_hw: (h, w),
                gap,
                hidden_pre,
                hidden,
            },
        ))
    }

    /// Gradient of a scalar loss with respect to every parameter, in
    /// [`flat_params`](Self::flat_params) order, given `dL/dlogits`.
    pub(crate) fn backward(&self, trace: &ForwardTrace, dlogits: &[f64]) -> Result<Vec<f64>> {
        let g_logits = Tensor::new(vec![1, dlogits.len()], dlogits.to_vec())?;
        let fc2 = self.fc2.backward(&trace.hidden, &g_logits)?;
        let dh_pre: Vec<f64> = fc2
            .input
            .data()
            .iter()
            .zip(trace.hidden_pre.data())
            .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
            .collect();
        let fc1 = self.fc1.backward(&trace.gap, &Tensor::new(vec![1, dh_pre.len()], dh_pre)?)?;

        let (h, w) = trace.last_hw;
        let channels = self.pool_dim();
        let area = (h * w) as f64;
        let mut upstream: Vec<f64> = (0..h * w)
            .flat_map(|_| fc1.input.data().iter().map(move |g| g / area))
            .collect();

        let mut conv_grads = Vec::with_capacity(self.convs.len());
        for (i, (conv, block)) in self.convs.iter().zip(&trace.blocks).enumerate().rev() {
            debug_assert_eq!(upstream.len(), block.pooled.len());
            let dpooled: Vec<f64> = upstream
                .iter()
                .zip(&block.pooled)
                .map(|(g, p)| if *p > 0.0 { *g } else { 0.0 })
                .collect();
            let dz = avg_pool2_backward(&dpooled, block.h, block.w, conv.out_ch);
            let grads = conv.backward(&block.input, block.h, block.w, &dz, i > 0);
            if let Some(dx) = &grads.input {
                upstream = dx.clone();
            }
            conv_grads.push(grads);
        }
        let _ = channels;
        conv_grads.reverse();

        let mut flat = Vec::with_capacity(self.param_count());
        for g in conv_grads {
            flat.extend(g.weights);
            flat.extend(g.bias);
        }
        flat.extend_from_slice(fc1.weights.data());
        flat.extend_from_slice(fc1.bias.data());
        flat.extend_from_slice(fc2.weights.data());
        flat.extend_from_slice(fc2.bias.data());
        Ok(flat)
    }
}

pub fn backbone_forward(model: &BackboneModel, input: &Tensor) -> Result<BackboneOutput> {
    model.forward(input)
}

pub fn tap_embedding(model: &BackboneModel, input: &Tensor, tap: EmbeddingTap) -> Result<Tensor> {
    model.tap_embedding(input, tap)
}

/// Mean of per-frame embeddings; aggregates a video's frames into one vector.
pub fn mean_embedding(frames: &[Tensor]) -> Result<Tensor> {
    let first = frames
        .first()
        .ok_or_else(|| Error::EmptyInput("no frames to aggregate".into()))?;
    let mut acc = vec![0.0; first.len()];
    for f in frames {
        if f.shape() != first.shape() {
            return Err(Error::dims(first.shape(), f.shape()));
        }
        for (a, v) in acc.iter_mut().zip(f.data()) {
            *a += v;
        }
    }
    let n = frames.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Tensor::new(first.shape().to_vec(), acc)
}

/// Decodes an image to a `224 × 224 × 3` RGB tensor in `[0, 1]`, resizing
/// when the stored image has another size.
pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::file(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    })?;
    let [h, w, _] = VISUAL_INPUT_SHAPE;
    let mut rgb = img.to_rgb8();
    if rgb.width() as usize != w || rgb.height() as usize != h {
        rgb = image::imageops::resize(&rgb, w as u32, h as u32, image::imageops::FilterType::Triangle);
    }
    let data = rgb.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect();
    Tensor::new(VISUAL_INPUT_SHAPE.to_vec(), data)
}

/// Reads the five embeddings of one sample at one tap from the cache.
pub fn load_embedding_set(store: &EmbeddingCache, sample_id: &str, tap: EmbeddingTap) -> Result<EmbeddingSet> {
    let keys: Vec<String> = ModelKind::ALL
        .iter()
        .map(|k| EmbeddingCache::embedding_key(sample_id, *k, tap))
        .collect();
    let missing: Vec<&str> = ModelKind::ALL
        .iter()
        .zip(&keys)
        .filter(|(_, key)| !store.contains(key))
        .map(|(k, _)| k.slot_name())
        .collect();
    if !missing.is_empty() {
        return Err(Error::NotFound(format!(
            "sample '{sample_id}' at {tap} is missing embeddings: {}",
            missing.join(", ")
        )));
    }
    let tensors = store.read_many(&keys)?;
    let mut it = tensors.into_iter().map(Tensor::into_data);
    let vectors = std::array::from_fn(|_| it.next().unwrap());
    EmbeddingSet::new(tap, vectors)
}
