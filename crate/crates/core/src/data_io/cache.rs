use std::path::Path;

use super::container::{ContainerReader, ContainerWriter, DType};
use crate::backbone::{EmbeddingSet, EmbeddingTap, ModelKind};
use crate::dsp::SpectrogramKind;
use crate::error::Result;
use crate::tensor::Tensor;

/// Read handle over a cache of spectrograms or embeddings. Values are
/// stored as f32.
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    reader: ContainerReader,
}

impl EmbeddingCache {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self {
            reader: ContainerReader::open(path)?,
        })
    }

    pub fn embedding_key(sample_id: &str, kind: ModelKind, tap: EmbeddingTap) -> String {
        format!("{sample_id}/{}/{}", kind.as_str(), tap.as_str())
    }

    pub fn spectrogram_key(sample_id: &str, kind: SpectrogramKind) -> String {
        format!("{sample_id}/{}", kind.as_str())
    }

    pub fn path(&self) -> &Path {
        self.reader.path()
    }

    pub fn keys(&self) -> &[String] {
        self.reader.keys()
    }

    pub fn len(&self) -> usize {
        self.reader.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reader.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.reader.contains(key)
    }

    pub fn shape(&self, key: &str) -> Option<&[usize]> {
        self.reader.shape(key)
    }

    pub fn read(&self, key: &str) -> Result<Tensor> {
        self.reader.read(key)
    }

    pub fn read_many<S: AsRef<str>>(&self, keys: &[S]) -> Result<Vec<Tensor>> {
        self.reader.read_many(keys)
    }

    /// Whether any embedding at `tap` is present; used to reject a fusion
    /// method before training starts.
    pub fn has_tap(&self, tap: EmbeddingTap) -> bool {
        let suffix = format!("/{}", tap.as_str());
        self.keys().iter().any(|k| k.ends_with(&suffix))
    }
}

/// Writes named vectors as f32 records and publishes the file atomically.
pub fn write_embeddings<K: AsRef<str>>(path: impl AsRef<Path>, items: &[(K, Tensor)]) -> Result<()> {
    let mut w = ContainerWriter::create(path)?;
    for (k, t) in items {
        w.write(k.as_ref(), t, DType::F32)?;
    }
    w.finish()
}

pub fn read_embeddings<S: AsRef<str>>(path: impl AsRef<Path>, keys: &[S]) -> Result<Vec<Tensor>> {
    EmbeddingCache::open(path)?.read_many(keys)
}

/// Records for one sample's five embeddings at the set's tap.
pub fn embedding_set_records(sample_id: &str, set: &EmbeddingSet) -> Vec<(String, Tensor)> {
    ModelKind::ALL
        .iter()
        .map(|&k| {
            (
                EmbeddingCache::embedding_key(sample_id, k, set.tap()),
                Tensor::vector(set.get(k).to_vec()),
            )
        })
        .collect()
}
