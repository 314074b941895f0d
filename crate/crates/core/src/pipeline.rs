//! End-to-end stages connecting manifests, caches and checkpoints. The
//! command-line tool is a thin layer over these functions.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::backbone::{load_embedding_set, load_image, mean_embedding, BackboneModel, EmbeddingSet, EmbeddingTap, ModelKind};
use crate::config::RunConfig;
use crate::data_io::{
    embedding_set_records, ContainerWriter, DType, EmbeddingCache, Manifest, ManifestEntry, SceneLabel, Split,
};
use crate::dsp::{features, read_wav, resample, FrontEndBank, FrontEndConfig, SpectrogramKind};
use crate::error::{Error, Result};
use crate::eval::{evaluate, predict_all, EvalReport};
use crate::fusion::{FusionMethod, FusionModel, Modality};
use crate::tensor::Tensor;
use crate::training::{train_phase1, train_phase2, TrainRun};

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractSummary {
    pub written: usize,
    /// `(sample_id, message)` for every clip that could not be processed.
    pub failures: Vec<(String, String)>,
}

fn extract_one(bank: &FrontEndBank, cfg: &FrontEndConfig, manifest: &Manifest, entry: &ManifestEntry, kinds: &[SpectrogramKind]) -> Result<Vec<Tensor>> {
    let path = manifest.resolve(&entry.audio_path);
    let clip = read_wav(&path)?;
    let clip = if clip.sample_rate() != cfg.target_rate {
        resample(&clip, cfg.target_rate)?
    } else {
        clip
    };
    kinds
        .iter()
        .map(|&k| features(bank, k, &clip).map(|s| s.into_tensor()))
        .collect()
}

/// Computes the delta-stacked spectrograms of every clip in the manifest
/// and writes them to one cache. Clips that fail are reported and skipped.
pub fn extract(manifest: &Manifest, kinds: &[SpectrogramKind], out: &Path, workers: usize) -> Result<ExtractSummary> {
    let cfg = FrontEndConfig::default();
    let bank = FrontEndBank::new(&cfg)?;
    let pool = pool(workers)?;
    let chunk = pool.current_num_threads().max(1) * 2;
    let mut writer = ContainerWriter::create(out)?;
    let mut summary = ExtractSummary::default();
    for group in manifest.entries.chunks(chunk) {
        let results: Vec<Result<Vec<Tensor>>> = pool.install(|| {
            group
                .par_iter()
                .map(|e| extract_one(&bank, &cfg, manifest, e, kinds))
                .collect()
        });
        for (entry, res) in group.iter().zip(results) {
            match res {
                Ok(tensors) => {
                    for (k, t) in kinds.iter().zip(&tensors) {
                        writer.write(&EmbeddingCache::spectrogram_key(&entry.sample_id, *k), t, DType::F32)?;
                        summary.written += 1;
                    }
                }
                Err(e) => {
                    log::error!("{}: {e}", entry.sample_id);
                    summary.failures.push((entry.sample_id.clone(), e.to_string()));
                }
            }
        }
    }
    writer.finish()?;
    Ok(summary)
}

/// Entries of the requested split, or every entry when the manifest carries
/// no tag of that split.
pub fn select_split(manifest: &Manifest, split: Split) -> Vec<&ManifestEntry> {
    let tagged = manifest.split(Some(split));
    if tagged.is_empty() && !manifest.entries.iter().any(|e| e.split.is_some()) {
        manifest.entries.iter().collect()
    } else {
        tagged
    }
}

fn visual_frames(manifest: &Manifest, entry: &ManifestEntry) -> Result<Vec<Tensor>> {
    if entry.image_paths.is_empty() {
        return Err(Error::NotFound(format!("sample '{}' lists no images", entry.sample_id)));
    }
    entry
        .image_paths
        .iter()
        .map(|p| load_image(manifest.resolve(p)))
        .collect()
}

fn audio_input(cache: &EmbeddingCache, entry: &ManifestEntry, kind: SpectrogramKind) -> Result<Tensor> {
    let key = EmbeddingCache::spectrogram_key(&entry.sample_id, kind);
    if !cache.contains(&key) {
        return Err(Error::NotFound(format!(
            "cache has no '{kind}' spectrogram for sample '{}'",
            entry.sample_id
        )));
    }
    cache.read(&key)
}

/// Training pairs for one backbone: one spectrogram per clip for audio
/// models, one pair per image frame for visual models.
pub fn phase1_dataset(
    kind: ModelKind,
    manifest: &Manifest,
    entries: &[&ManifestEntry],
    spectrograms: Option<&EmbeddingCache>,
) -> Result<Vec<(Tensor, Vec<f64>)>> {
    let per_entry: Vec<Vec<(Tensor, Vec<f64>)>> = entries
        .par_iter()
        .map(|e| {
            let y = e.label.one_hot();
            match kind.feature_kind() {
                Some(f) => {
                    let cache = spectrograms
                        .ok_or_else(|| Error::Config(format!("{} needs a spectrogram cache", kind.display_name())))?;
                    Ok(vec![(audio_input(cache, e, f)?, y)])
                }
                None => Ok(visual_frames(manifest, e)?.into_iter().map(|x| (x, y.clone())).collect()),
            }
        })
        .collect::<Result<_>>()?;
    Ok(per_entry.into_iter().flatten().collect())
}

/// Trains one backbone on the training split and freezes it.
pub fn train_backbone(
    kind: ModelKind,
    manifest: &Manifest,
    spectrograms: Option<&EmbeddingCache>,
    cfg: &RunConfig,
) -> Result<(BackboneModel, TrainRun)> {
    let entries = select_split(manifest, Split::Train);
    let data = phase1_dataset(kind, manifest, &entries, spectrograms)?;
    let mut model = BackboneModel::new(kind, cfg.seed.wrapping_add(kind.index() as u64));
    let run = train_phase1(&mut model, &data, &cfg.phase1())?;
    model.freeze();
    Ok((model, run))
}

const LABEL_SUFFIX: &str = "/label";
const SPLIT_SUFFIX: &str = "/split";

fn split_code(s: Option<Split>) -> f64 {
    match s {
        None => 0.0,
        Some(Split::Train) => 1.0,
        Some(Split::Eval) => 2.0,
    }
}

/// Runs the five frozen backbones over every manifest entry and writes the
/// embeddings at each requested tap, plus each sample's label and split.
pub fn export_embeddings(
    backbones: &[BackboneModel],
    manifest: &Manifest,
    spectrograms: Option<&EmbeddingCache>,
    taps: &[EmbeddingTap],
    out: &Path,
) -> Result<usize> {
    let mut by_kind: BTreeMap<ModelKind, &BackboneModel> = BTreeMap::new();
    for b in backbones {
        by_kind.insert(b.kind(), b);
    }
    if let Some(k) = ModelKind::ALL.iter().find(|k| !by_kind.contains_key(k)) {
        return Err(Error::NotFound(format!("no checkpoint for model {}", k.as_str())));
    }
    let mut writer = ContainerWriter::create(out)?;
    let mut count = 0;
    for group in manifest.entries.chunks(32) {
        let sets: Vec<Vec<EmbeddingSet>> = group
            .par_iter()
            .map(|e| sample_embeddings(&by_kind, manifest, e, spectrograms, taps))
            .collect::<Result<_>>()?;
        for (entry, per_tap) in group.iter().zip(sets) {
            for set in &per_tap {
                for (key, t) in embedding_set_records(&entry.sample_id, set) {
                    writer.write(&key, &t, DType::F32)?;
                }
            }
            let id = &entry.sample_id;
            writer.write(&format!("{id}{LABEL_SUFFIX}"), &Tensor::vector(entry.label.one_hot()), DType::F32)?;
            writer.write(&format!("{id}{SPLIT_SUFFIX}"), &Tensor::vector(vec![split_code(entry.split)]), DType::F32)?;
            count += 1;
        }
    }
    writer.finish()?;
    Ok(count)
}

fn sample_embeddings(
    by_kind: &BTreeMap<ModelKind, &BackboneModel>,
    manifest: &Manifest,
    entry: &ManifestEntry,
    spectrograms: Option<&EmbeddingCache>,
    taps: &[EmbeddingTap],
) -> Result<Vec<EmbeddingSet>> {
    let mut per_model: Vec<(Tensor, Tensor)> = Vec::with_capacity(5);
    let mut frames = None;
    for kind in ModelKind::ALL {
        let model = by_kind[&kind];
        let outs = match kind.feature_kind() {
            Some(f) => {
                let cache = spectrograms.ok_or_else(|| Error::Config("audio models need a spectrogram cache".into()))?;
                vec![model.forward(&audio_input(cache, entry, f)?)?]
            }
            None => {
                if frames.is_none() {
                    frames = Some(visual_frames(manifest, entry)?);
                }
                frames
                    .as_ref()
                    .unwrap()
                    .iter()
                    .map(|x| model.forward(x))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let e1024: Vec<Tensor> = outs.iter().map(|o| o.emb1024.clone()).collect();
        let e10: Vec<Tensor> = outs.iter().map(|o| o.emb10.clone()).collect();
        per_model.push((mean_embedding(&e1024)?, mean_embedding(&e10)?));
    }
    taps.iter()
        .map(|&tap| {
            let vectors = std::array::from_fn(|i| {
                let (a, b) = &per_model[i];
                match tap {
                    EmbeddingTap::Fc1024 => a.data().to_vec(),
                    EmbeddingTap::Fc10 => b.data().to_vec(),
                }
            });
            EmbeddingSet::new(tap, vectors)
        })
        .collect()
}

/// A labeled sample read back from an embedding cache.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedSample {
    pub sample_id: String,
    pub label: SceneLabel,
    pub split: Option<Split>,
}

/// Samples recorded in an embedding cache, in file order.
pub fn cached_samples(cache: &EmbeddingCache) -> Result<Vec<CachedSample>> {
    let mut out = Vec::new();
    for key in cache.keys() {
        let Some(id) = key.strip_suffix(LABEL_SUFFIX) else {
            continue;
        };
        let y = cache.read(key)?;
        let label = SceneLabel::from_index(crate::training::argmax(y.data()))
            .ok_or_else(|| Error::Format(format!("bad label record for '{id}'")))?;
        let split = match cache.read(&format!("{id}{SPLIT_SUFFIX}"))?.data().first() {
            Some(1.0) => Some(Split::Train),
            Some(2.0) => Some(Split::Eval),
            _ => None,
        };
        out.push(CachedSample {
            sample_id: id.to_string(),
            label,
            split,
        });
    }
    Ok(out)
}

fn pick_split(samples: &[CachedSample], split: Split) -> Vec<&CachedSample> {
    if samples.iter().any(|s| s.split.is_some()) {
        samples.iter().filter(|s| s.split == Some(split)).collect()
    } else {
        samples.iter().collect()
    }
}

/// Refuses a fusion method whose tap the cache does not hold.
pub fn check_cache_tap(cache: &EmbeddingCache, method: FusionMethod) -> Result<()> {
    if !cache.has_tap(method.tap()) {
        let held: Vec<&str> = [EmbeddingTap::Fc1024, EmbeddingTap::Fc10]
            .into_iter()
            .filter(|t| cache.has_tap(*t))
            .map(EmbeddingTap::as_str)
            .collect();
        return Err(Error::Contract(format!(
            "{method} fuses {} embeddings but the cache holds {}",
            method.tap(),
            if held.is_empty() { "none".to_string() } else { held.join(", ") }
        )));
    }
    Ok(())
}

/// Trains a fusion layer and head on the training split of the cache.
pub fn train_fusion(
    method: FusionMethod,
    modality: Modality,
    cache: &EmbeddingCache,
    cfg: &RunConfig,
) -> Result<(FusionModel, TrainRun)> {
    check_cache_tap(cache, method)?;
    let samples = cached_samples(cache)?;
    let train = pick_split(&samples, Split::Train);
    let data: Vec<(EmbeddingSet, Vec<f64>)> = train
        .iter()
        .map(|s| Ok((load_embedding_set(cache, &s.sample_id, method.tap())?, s.label.one_hot())))
        .collect::<Result<_>>()?;
    let mut model = FusionModel::new(method, modality, method.tap().dim(), SceneLabel::COUNT, cfg.seed);
    let run = train_phase2(&mut model, &data, &[], &cfg.phase2())?;
    Ok((model, run))
}

/// Evaluates a trained head on the manifest's evaluation split (every entry
/// when the manifest has no split tags).
pub fn evaluate_fusion(model: &FusionModel, manifest: &Manifest, cache: &EmbeddingCache, split: Split) -> Result<EvalReport> {
    check_cache_tap(cache, model.method)?;
    let entries = select_split(manifest, split);
    if entries.is_empty() {
        return Err(Error::EmptyInput(format!("no '{split}' samples in the manifest")));
    }
    let sets: Vec<EmbeddingSet> = entries
        .iter()
        .map(|e| load_embedding_set(cache, &e.sample_id, model.method.tap()))
        .collect::<Result<_>>()?;
    let truths: Vec<usize> = entries.iter().map(|e| e.label.index()).collect();
    Ok(evaluate(&predict_all(model, &sets)?, &truths)?.with_mode(model.modality))
}
