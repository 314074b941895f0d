//! Python bindings. Tensors cross the boundary as nested lists or as a
//! `(shape, flat_data)` pair in row-major order.

use pyo3::exceptions::{PyKeyError, PyOSError, PyValueError};
use pyo3::prelude::*;

use avfuse::backbone::{EmbeddingTap, ModelKind};
use avfuse::data_io::{self, SceneLabel, Split};
use avfuse::dsp::{self, AudioClip, FrontEndBank, FrontEndConfig, SpectrogramKind};
use avfuse::fusion::{FusionMethod, Modality};
use avfuse::training::{LossConfig, MixupConfig, Phase2Config};
use avfuse::{Error, Tensor};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NotFound(_) => PyKeyError::new_err(e.to_string()),
        Error::Io(_) | Error::File { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

type Flat = (Vec<usize>, Vec<f64>);

fn flat(t: Tensor) -> Flat {
    (t.shape().to_vec(), t.into_data())
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Tensor> {
    let k = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != k) {
        return Err(PyValueError::new_err("rows differ in length"));
    }
    let n = rows.len();
    Tensor::new(vec![n, k], rows.concat()).map_err(to_py)
}

fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    let k = *t.shape().last().unwrap_or(&1);
    t.data().chunks(k.max(1)).map(<[f64]>::to_vec).collect()
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn embedding_set(tap: EmbeddingTap, vectors: Vec<Vec<f64>>) -> PyResult<avfuse::EmbeddingSet> {
    let vectors: [Vec<f64>; 5] = vectors
        .try_into()
        .map_err(|v: Vec<Vec<f64>>| PyValueError::new_err(format!("expected 5 embeddings, got {}", v.len())))?;
    avfuse::EmbeddingSet::with_dim(tap, vectors).map_err(to_py)
}

/// Row-wise softmax of a list of rows.
#[pyfunction]
fn softmax(x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&avfuse::softmax(&matrix(x)?)))
}

/// Summed KL divergence of predicted rows from target rows plus the l2 term.
#[pyfunction]
#[pyo3(signature = (y, yhat, params = Vec::new(), lambda_l2 = 0.0))]
fn kl_loss(y: Vec<Vec<f64>>, yhat: Vec<Vec<f64>>, params: Vec<f64>, lambda_l2: f64) -> PyResult<f64> {
    let cfg = LossConfig {
        lambda_l2,
        ..Default::default()
    };
    avfuse::kl_loss(&matrix(y)?, &matrix(yhat)?, &params, &cfg).map_err(to_py)
}

#[pyfunction]
fn labels() -> Vec<&'static str> {
    SceneLabel::ALL.iter().map(|l| l.as_str()).collect()
}

/// Returns `(sample_rate, channels)`.
#[pyfunction]
fn read_wav(path: &str) -> PyResult<(u32, Vec<Vec<f64>>)> {
    let clip = dsp::read_wav(path).map_err(to_py)?;
    Ok((clip.sample_rate(), clip.into_channels()))
}

#[pyfunction]
fn resample(channels: Vec<Vec<f64>>, rate: u32, target_rate: u32) -> PyResult<Vec<Vec<f64>>> {
    let clip = AudioClip::new(channels, rate).map_err(to_py)?;
    Ok(dsp::resample(&clip, target_rate).map_err(to_py)?.into_channels())
}

/// Log spectrogram (`128 × 309 × 2`) of a stereo clip at the front-end rate.
#[pyfunction]
fn spectrogram(channels: Vec<Vec<f64>>, rate: u32, kind: &str) -> PyResult<Flat> {
    let kind: SpectrogramKind = parse(kind)?;
    let cfg = FrontEndConfig::default();
    let clip = AudioClip::new(channels, rate).map_err(to_py)?;
    let s = match kind {
        SpectrogramKind::Mel => dsp::mel_spectrogram(&clip, &cfg),
        SpectrogramKind::Gammatone => dsp::gammatone_spectrogram(&clip, &cfg),
        SpectrogramKind::Cqt => dsp::cqt_spectrogram(&clip, &cfg),
    }
    .map_err(to_py)?;
    Ok(flat(s.into_tensor()))
}

/// Resampled, delta-stacked `128 × 305 × 6` input for one feature kind.
#[pyfunction]
fn features(channels: Vec<Vec<f64>>, rate: u32, kind: &str) -> PyResult<Flat> {
    let kind: SpectrogramKind = parse(kind)?;
    let bank = FrontEndBank::new(&FrontEndConfig::default()).map_err(to_py)?;
    let clip = AudioClip::new(channels, rate).map_err(to_py)?;
    Ok(flat(dsp::features(&bank, kind, &clip).map_err(to_py)?.into_tensor()))
}

#[pyfunction]
#[pyo3(signature = (shape, data, half_width = 1))]
fn delta(shape: Vec<usize>, data: Vec<f64>, half_width: usize) -> PyResult<Flat> {
    let t = Tensor::new(shape, data).map_err(to_py)?;
    Ok(flat(dsp::delta(&t, half_width).map_err(to_py)?))
}

#[pyfunction]
fn stack_deltas(shape: Vec<usize>, data: Vec<f64>) -> PyResult<Flat> {
    let s = dsp::Spectrogram::new(Tensor::new(shape, data).map_err(to_py)?, SpectrogramKind::Mel).map_err(to_py)?;
    Ok(flat(dsp::stack_deltas(&s).map_err(to_py)?.into_tensor()))
}

/// Fuses five embeddings with unit weights and zero bias.
#[pyfunction]
fn fuse(method: &str, embeddings: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let method: FusionMethod = parse(method)?;
    let set = embedding_set(method.tap(), embeddings)?;
    let params = avfuse::fusion::FusionParams::ones(set.dim());
    Ok(avfuse::fuse(method, &params, &set).map_err(to_py)?.into_data())
}

/// Accuracy report for predicted and true class indices.
#[pyfunction]
fn evaluate(predictions: Vec<usize>, truths: Vec<usize>) -> PyResult<EvalReport> {
    Ok(EvalReport(avfuse::evaluate(&predictions, &truths).map_err(to_py)?))
}

#[pyclass(module = "pyavfuse", frozen)]
struct EvalReport(avfuse::EvalReport);

#[pymethods]
impl EvalReport {
    /// Percent.
    #[getter]
    fn overall_accuracy(&self) -> f64 {
        self.0.overall_accuracy
    }

    #[getter]
    fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        self.0.per_class_accuracy.to_vec()
    }

    #[getter]
    fn confusion(&self) -> Vec<Vec<u64>> {
        (0..SceneLabel::COUNT)
            .map(|r| (0..SceneLabel::COUNT).map(|c| self.0.confusion.get(r, c)).collect())
            .collect()
    }

    fn table(&self) -> String {
        self.0.to_table()
    }

    fn __repr__(&self) -> String {
        format!("EvalReport(mode={}, overall={:.2}%)", self.0.mode.report_name(), self.0.overall_accuracy)
    }
}

/// A trained or freshly initialized fusion layer with its dense head.
#[pyclass(module = "pyavfuse")]
struct FusionModel(avfuse::FusionModel);

#[pymethods]
impl FusionModel {
    #[new]
    #[pyo3(signature = (method, mode = "av", dim = None, seed = 0))]
    fn new(method: &str, mode: &str, dim: Option<usize>, seed: u64) -> PyResult<Self> {
        let method: FusionMethod = parse(method)?;
        let mode: Modality = parse(mode)?;
        let d = dim.unwrap_or(method.tap().dim());
        Ok(Self(avfuse::FusionModel::new(method, mode, d, SceneLabel::COUNT, seed)))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self(data_io::load_fusion(path).map_err(to_py)?))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        data_io::save_fusion(&self.0, path).map_err(to_py)
    }

    #[getter]
    fn method(&self) -> String {
        self.0.method.to_string()
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.0.modality.as_str()
    }

    #[getter]
    fn head_input_dim(&self) -> usize {
        self.0.head.in_dim()
    }

    fn trainable_params(&self) -> Vec<f64> {
        self.0.trainable_params()
    }

    fn fused(&self, embeddings: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let set = embedding_set(self.0.method.tap(), embeddings)?;
        Ok(avfuse::fuse(self.0.method, &self.0.params, &set).map_err(to_py)?.into_data())
    }

    fn probs(&self, embeddings: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let set = embedding_set(self.0.method.tap(), embeddings)?;
        self.0.probs(&set).map_err(to_py)
    }

    /// Phase II training on `(five embeddings, class index)` pairs; returns
    /// the per-epoch `(loss, accuracy)` history.
    #[pyo3(signature = (samples, labels, epochs = 40, lr = 5e-3, batch_size = 16, seed = 0, mixup = true))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        &mut self,
        samples: Vec<Vec<Vec<f64>>>,
        labels: Vec<usize>,
        epochs: usize,
        lr: f64,
        batch_size: usize,
        seed: u64,
        mixup: bool,
    ) -> PyResult<Vec<(f64, f64)>> {
        if samples.len() != labels.len() {
            return Err(PyValueError::new_err("samples and labels differ in length"));
        }
        let tap = self.0.method.tap();
        let data = samples
            .into_iter()
            .zip(labels)
            .map(|(e, c)| {
                let label = SceneLabel::from_index(c).ok_or_else(|| PyValueError::new_err(format!("class {c} out of range")))?;
                Ok((embedding_set(tap, e)?, label.one_hot()))
            })
            .collect::<PyResult<Vec<_>>>()?;
        let mut cfg = Phase2Config {
            epochs,
            batch_size,
            seed,
            mixup: MixupConfig {
                enabled: mixup,
                ..Default::default()
            },
            ..Default::default()
        };
        cfg.adam.learning_rate = lr;
        let run = avfuse::train_phase2(&mut self.0, &data, &[], &cfg).map_err(to_py)?;
        Ok(run.history.iter().map(|r| (r.loss, r.accuracy)).collect())
    }

    fn __repr__(&self) -> String {
        format!("FusionModel({}, mode={})", self.0.method, self.0.modality.as_str())
    }
}

/// A backbone loaded from a checkpoint.
#[pyclass(module = "pyavfuse", frozen)]
struct Backbone(avfuse::BackboneModel);

#[pymethods]
impl Backbone {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self(data_io::load_backbone(path).map_err(to_py)?))
    }

    /// Untrained standard backbone of the given kind.
    #[staticmethod]
    #[pyo3(signature = (kind, seed = 0))]
    fn new(kind: &str, seed: u64) -> PyResult<Self> {
        Ok(Self(avfuse::BackboneModel::new(parse::<ModelKind>(kind)?, seed)))
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().as_str()
    }

    #[getter]
    fn frozen(&self) -> bool {
        self.0.is_frozen()
    }

    #[getter]
    fn input_shape(&self) -> Vec<usize> {
        self.0.kind().input_shape().to_vec()
    }

    /// Returns `(fc1024, fc10, probs)` for one input in row-major order.
    fn forward(&self, data: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let x = Tensor::new(self.input_shape(), data).map_err(to_py)?;
        let out = self.0.forward(&x).map_err(to_py)?;
        Ok((out.emb1024.into_data(), out.emb10.into_data(), out.probs.into_data()))
    }
}

/// Read access to a spectrogram or embedding cache.
#[pyclass(module = "pyavfuse", frozen)]
struct Cache(data_io::EmbeddingCache);

#[pymethods]
impl Cache {
    #[new]
    fn open(path: &str) -> PyResult<Self> {
        Ok(Self(data_io::EmbeddingCache::open(path).map_err(to_py)?))
    }

    fn keys(&self) -> Vec<String> {
        self.0.keys().to_vec()
    }

    fn __contains__(&self, key: &str) -> bool {
        self.0.contains(key)
    }

    fn __len__(&self) -> usize {
        self.0.keys().len()
    }

    fn read(&self, key: &str) -> PyResult<Flat> {
        Ok(flat(self.0.read(key).map_err(to_py)?))
    }

    /// The five embeddings of one sample at a tap, in model order.
    fn embeddings(&self, sample_id: &str, tap: &str) -> PyResult<Vec<Vec<f64>>> {
        let set = avfuse::load_embedding_set(&self.0, sample_id, parse(tap)?).map_err(to_py)?;
        Ok(set.vectors().to_vec())
    }

    /// `(sample_id, label, split)` for every sample with a label record.
    fn samples(&self) -> PyResult<Vec<(String, &'static str, Option<&'static str>)>> {
        Ok(avfuse::pipeline::cached_samples(&self.0)
            .map_err(to_py)?
            .into_iter()
            .map(|s| (s.sample_id, s.label.as_str(), s.split.map(Split::as_str)))
            .collect())
    }
}

#[pymodule]
pub fn pyavfuse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(kl_loss, m)?)?;
    m.add_function(wrap_pyfunction!(labels, m)?)?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(resample, m)?)?;
    m.add_function(wrap_pyfunction!(spectrogram, m)?)?;
    m.add_function(wrap_pyfunction!(features, m)?)?;
    m.add_function(wrap_pyfunction!(delta, m)?)?;
    m.add_function(wrap_pyfunction!(stack_deltas, m)?)?;
    m.add_function(wrap_pyfunction!(fuse, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_class::<EvalReport>()?;
    m.add_class::<FusionModel>()?;
    m.add_class::<Backbone>()?;
    m.add_class::<Cache>()?;
    m.add("MODEL_KINDS", ModelKind::ALL.iter().map(|k| k.as_str()).collect::<Vec<_>>())?;
    Ok(())
}
