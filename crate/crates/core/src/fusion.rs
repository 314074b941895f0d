//! The six fusion layers over the five embeddings.
//!
//! With `a = ae_g⊙w1 + ae_m⊙w2 + ae_c⊙w3` and `v = ve_i⊙w4 + ve_c⊙w5`:
//! flat `a + v + b`, hierarchical `a⊙wa + v⊙wv + b`, concat `[a, v]`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::backbone::{EmbeddingSet, EmbeddingTap};
use crate::error::{Error, Result};
use crate::tensor::{softmax, DenseLayer, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FusionForm {
    FlatLinear,
    Hierarchical,
    Concat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FusionMethod {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 6] = [Self::F1, Self::F2, Self::F3, Self::F4, Self::F5, Self::F6];

    /// 1-based method number.
    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn from_number(n: usize) -> Option<Self> {
        n.checked_sub(1).and_then(|i| Self::ALL.get(i).copied())
    }

    pub fn as_str(self) -> &'static str {
        ["f1", "f2", "f3", "f4", "f5", "f6"][self as usize]
    }

    pub fn tap(self) -> EmbeddingTap {
        match self {
            Self::F1 | Self::F2 | Self::F3 => EmbeddingTap::Fc1024,
            Self::F4 | Self::F5 | Self::F6 => EmbeddingTap::Fc10,
        }
    }

    pub fn form(self) -> FusionForm {
        match self {
            Self::F1 | Self::F4 => FusionForm::FlatLinear,
            Self::F2 | Self::F5 => FusionForm::Hierarchical,
            Self::F3 | Self::F6 => FusionForm::Concat,
        }
    }

    /// Same form at the other tap.
    pub fn twin(self) -> Self {
        Self::ALL[(self as usize + 3) % 6]
    }

    pub fn output_dim(self, d: usize) -> usize {
        match self.form() {
            FusionForm::Concat => 2 * d,
            _ => d,
        }
    }

    pub fn uses_branch_weights(self) -> bool {
        self.form() == FusionForm::Hierarchical
    }

    pub fn uses_bias(self) -> bool {
        self.form() != FusionForm::Concat
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        t.strip_prefix('f')
            .and_then(|n| n.parse::<usize>().ok())
            .and_then(Self::from_number)
            .ok_or_else(|| Error::Config(format!("unknown fusion method '{s}' (expected f1..f6)")))
    }
}

/// Which embeddings a head is allowed to see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    Audio,
    Visual,
    AudioVisual,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Self::Audio, Self::Visual, Self::AudioVisual];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Audio => "audio",
            Self::Visual => "visual",
            Self::AudioVisual => "av",
        }
    }

    pub fn report_name(self) -> &'static str {
        match self {
            Self::Audio => "audio_only",
            Self::Visual => "visual_only",
            Self::AudioVisual => "audio_visual",
        }
    }

    /// Per-slot activity of `w1..w5`.
    pub fn active_slots(self) -> [bool; 5] {
        match self {
            Self::Audio => [true, true, true, false, false],
            Self::Visual => [false, false, false, true, true],
            Self::AudioVisual => [true; 5],
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "audio" | "audio_only" => Ok(Self::Audio),
            "visual" | "visual_only" => Ok(Self::Visual),
            "av" | "audio_visual" | "fused" => Ok(Self::AudioVisual),
            other => Err(Error::Config(format!("unknown mode '{other}' (expected audio, visual or av)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub w: [Vec<f64>; 5],
    pub wa: Vec<f64>,
    pub wv: Vec<f64>,
    pub b: Vec<f64>,
}

/// Trainable subset of [`FusionParams`] for a method and modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamMask {
    pub w: [bool; 5],
    pub wa: bool,
    pub wv: bool,
    pub b: bool,
}

impl ParamMask {
    pub fn new(method: FusionMethod, modality: Modality) -> Self {
        let w = modality.active_slots();
        let branch = method.uses_branch_weights();
        Self {
            w,
            wa: branch && modality != Modality::Visual,
            wv: branch && modality != Modality::Audio,
            b: method.uses_bias(),
        }
    }

    pub fn vector_count(&self) -> usize {
        self.w.iter().filter(|&&x| x).count() + [self.wa, self.wv, self.b].iter().filter(|&&x| x).count()
    }
}

impl FusionParams {
    /// All weights one, bias zero.
    pub fn ones(d: usize) -> Self {
        Self {
            w: std::array::from_fn(|_| vec![1.0; d]),
            wa: vec![1.0; d],
            wv: vec![1.0; d],
            b: vec![0.0; d],
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            w: std::array::from_fn(|_| vec![0.0; d]),
            wa: vec![0.0; d],
            wv: vec![0.0; d],
            b: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    fn vectors(&self) -> [&Vec<f64>; 8] {
        [&self.w[0], &self.w[1], &self.w[2], &self.w[3], &self.w[4], &self.wa, &self.wv, &self.b]
    }

    fn vectors_mut(&mut self) -> [&mut Vec<f64>; 8] {
        let [w1, w2, w3, w4, w5] = &mut self.w;
        [w1, w2, w3, w4, w5, &mut self.wa, &mut self.wv, &mut self.b]
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        for (name, v) in PARAM_NAMES.iter().zip(self.vectors()) {
            if v.len() != d {
                return Err(Error::dims(format!("{name} of dimension {d}"), v.len()));
            }
        }
        Ok(())
    }

    /// Zeroes the weights of slots the modality excludes.
    pub fn apply_modality(&mut self, modality: Modality) {
        for (w, active) in self.w.iter_mut().zip(modality.active_slots()) {
            if !active {
                w.iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }

    /// Concatenation of the masked vectors in `w1..w5, wa, wv, b` order.
    pub fn flatten(&self, mask: &ParamMask) -> Vec<f64> {
        mask_flags(mask)
            .iter()
            .zip(self.vectors())
            .filter(|(on, _)| **on)
            .flat_map(|(_, v)| v.iter().copied())
            .collect()
    }

    pub fn load_flat(&mut self, mask: &ParamMask, values: &[f64]) -> Result<()> {
        let d = self.dim();
        let expected = mask.vector_count() * d;
        if values.len() != expected {
            return Err(Error::dims(expected, values.len()));
        }
        let mut chunks = values.chunks(d.max(1));
        for (on, v) in mask_flags(mask).iter().zip(self.vectors_mut()) {
            if *on {
                v.copy_from_slice(chunks.next().unwrap());
            }
        }
        Ok(())
    }

    /// Every vector, including inactive ones, in `w1..w5, wa, wv, b` order.
    pub fn named_vectors(&self) -> Vec<(&'static str, &[f64])> {
        PARAM_NAMES.iter().copied().zip(self.vectors().map(|v| v.as_slice())).collect()
    }
}

pub const PARAM_NAMES: [&str; 8] = ["w1", "w2", "w3", "w4", "w5", "wa", "wv", "b"];

fn mask_flags(mask: &ParamMask) -> [bool; 8] {
    [mask.w[0], mask.w[1], mask.w[2], mask.w[3], mask.w[4], mask.wa, mask.wv, mask.b]
}

/// Unit weights and zero bias at the method's tap dimension.
pub fn init_fusion_params(method: FusionMethod, _seed: u64) -> FusionParams {
    FusionParams::ones(method.tap().dim())
}

/// Unit/zero initialization plus N(0, `jitter`²) noise on every entry.
pub fn init_fusion_params_jittered(d: usize, seed: u64, jitter: f64) -> FusionParams {
    let mut p = FusionParams::ones(d);
    if jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, jitter).expect("positive jitter");
        for v in p.vectors_mut() {
            v.iter_mut().for_each(|x| *x += normal.sample(&mut rng));
        }
    }
    p
}

fn check(method: FusionMethod, params: &FusionParams, e: &EmbeddingSet) -> Result<usize> {
    if e.tap() != method.tap() {
        return Err(Error::Contract(format!(
            "{method} expects {} embeddings, got {}",
            method.tap(),
            e.tap()
        )));
    }
    params.validate()?;
    if params.dim() != e.dim() {
        return Err(Error::dims(format!("{method} parameters of dimension {}", params.dim()), e.dim()));
    }
    Ok(e.dim())
}

fn branches(params: &FusionParams, e: &EmbeddingSet, d: usize) -> (Vec<f64>, Vec<f64>) {
    let ev = e.vectors();
    let mut a = vec![0.0; d];
    let mut v = vec![0.0; d];
    for k in 0..d {
        a[k] = ev[0][k] * params.w[0][k] + ev[1][k] * params.w[1][k] + ev[2][k] * params.w[2][k];
        v[k] = ev[3][k] * params.w[3][k] + ev[4][k] * params.w[4][k];
    }
    (a, v)
}

pub fn fuse(method: FusionMethod, params: &FusionParams, e: &EmbeddingSet) -> Result<Tensor> {
    let d = check(method, params, e)?;
    let (a, v) = branches(params, e, d);
    let out = match method.form() {
        FusionForm::FlatLinear => (0..d).map(|k| a[k] + v[k] + params.b[k]).collect(),
        FusionForm::Hierarchical => (0..d)
            .map(|k| a[k] * params.wa[k] + v[k] * params.wv[k] + params.b[k])
            .collect(),
        FusionForm::Concat => {
            let mut out = a;
            out.extend(v);
            out
        }
    };
    Ok(Tensor::vector(out))
}

/// Gradients of `⟨upstream, fuse(...)⟩` with respect to every parameter
/// vector and every embedding. Parameters a form does not use get zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionGrads {
    pub params: FusionParams,
    pub embeddings: [Vec<f64>; 5],
}

pub fn fuse_backward(
    method: FusionMethod,
    params: &FusionParams,
    e: &EmbeddingSet,
    upstream: &[f64],
) -> Result<FusionGrads> {
    let d = check(method, params, e)?;
    let out_dim = method.output_dim(d);
    if upstream.len() != out_dim {
        return Err(Error::dims(out_dim, upstream.len()));
    }
    let (a, v) = branches(params, e, d);
    let mut g = FusionParams::zeros(d);
    let (ga, gv): (Vec<f64>, Vec<f64>) = match method.form() {
        FusionForm::FlatLinear => {
            g.b.copy_from_slice(upstream);
            (upstream.to_vec(), upstream.to_vec())
        }
        FusionForm::Hierarchical => {
            g.b.copy_from_slice(upstream);
            for k in 0..d {
                g.wa[k] = upstream[k] * a[k];
                g.wv[k] = upstream[k] * v[k];
            }
            (
                (0..d).map(|k| upstream[k] * params.wa[k]).collect(),
                (0..d).map(|k| upstream[k] * params.wv[k]).collect(),
            )
        }
        FusionForm::Concat => (upstream[..d].to_vec(), upstream[d..].to_vec()),
    };
    let ev = e.vectors();
    let mut ge: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; d]);
    for slot in 0..5 {
        let up = if slot < 3 { &ga } else { &gv };
        for k in 0..d {
            g.w[slot][k] = up[k] * ev[slot][k];
            ge[slot][k] = up[k] * params.w[slot][k];
        }
    }
    Ok(FusionGrads {
        params: g,
        embeddings: ge,
    })
}

/// Trained Phase-II state: fusion parameters plus the softmax classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub method: FusionMethod,
    pub modality: Modality,
    pub params: FusionParams,
    pub head: DenseLayer,
}

impl FusionModel {
    /// Unit-initialized fusion at dimension `d` and a He-initialized head
    /// sized to the fusion output.
    pub fn new(method: FusionMethod, modality: Modality, d: usize, classes: usize, seed: u64) -> Self {
        let mut params = FusionParams::ones(d);
        params.apply_modality(modality);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head = DenseLayer::he_init(method.output_dim(d), classes, &mut rng);
        Self {
            method,
            modality,
            params,
            head,
        }
    }

    pub fn mask(&self) -> ParamMask {
        ParamMask::new(self.method, self.modality)
    }

    pub fn logits(&self, e: &EmbeddingSet) -> Result<Tensor> {
        let f = fuse(self.method, &self.params, e)?;
        let n = f.len();
        self.head.forward(&f.reshape(vec![1, n])?)
    }

    pub fn probs(&self, e: &EmbeddingSet) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(e)?).into_data())
    }

    /// Masked fusion parameters followed by the head's weights and bias.
    pub fn trainable_params(&self) -> Vec<f64> {
        let mut v = self.params.flatten(&self.mask());
        v.extend(self.head.flat_params());
        v
    }

    pub fn load_trainable(&mut self, values: &[f64]) -> Result<()> {
        let n = self.mask().vector_count() * self.params.dim();
        if values.len() != n + self.head.param_count() {
            return Err(Error::dims(n + self.head.param_count(), values.len()));
        }
        let mask = self.mask();
        self.params.load_flat(&mask, &values[..n])?;
        self.head.load_flat(&values[n..])?;
        Ok(())
    }
}
