//! Manifests, the binary tensor container, embedding caches and checkpoints.

mod cache;
mod checkpoint;
pub mod container;
mod labels;
mod manifest;

pub use cache::{embedding_set_records, read_embeddings, write_embeddings, EmbeddingCache};
pub use checkpoint::{checkpoint_kind, load_backbone, load_fusion, save_backbone, save_fusion};
pub use container::{ContainerReader, ContainerWriter, DType};
pub use labels::SceneLabel;
pub use manifest::{parse_manifest, parse_manifest_reader, write_manifest, Manifest, ManifestEntry, Split, MANIFEST_HEADER};
