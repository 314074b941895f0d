use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::labels::SceneLabel;
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 5] = ["sample_id", "label", "split", "audio_path", "image_paths"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Eval,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Eval => "eval",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Self::Train),
            "eval" | "evaluate" | "test" => Ok(Self::Eval),
            other => Err(Error::Validation(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub label: SceneLabel,
    pub split: Option<Split>,
    pub audio_path: PathBuf,
    pub image_paths: Vec<PathBuf>,
}

/// Parsed manifest. Relative paths are kept as written and resolved against
/// `base_dir` on use.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            validate_id(&e.sample_id).map_err(Error::Validation)?;
            if !seen.insert(e.sample_id.as_str()) {
                return Err(Error::Validation(format!("duplicate sample id '{}'", e.sample_id)));
            }
        }
        Ok(Self {
            entries,
            base_dir: base_dir.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Entries with the given split tag; `None` selects every entry.
    pub fn split(&self, split: Option<Split>) -> Vec<&ManifestEntry> {
        self.entries
            .iter()
            .filter(|e| split.is_none() || e.split == split)
            .collect()
    }

    pub fn get(&self, sample_id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.sample_id == sample_id)
    }
}

fn validate_id(id: &str) -> std::result::Result<(), String> {
    if id.is_empty() {
        return Err("empty sample id".into());
    }
    if id.contains('/') {
        return Err(format!("sample id '{id}' contains '/'"));
    }
    Ok(())
}

pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest_reader(file, base)
}

pub fn parse_manifest_reader(reader: impl std::io::Read, base_dir: impl Into<PathBuf>) -> Result<Manifest> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let mut cols = [0usize; 5];
    for (slot, name) in cols.iter_mut().zip(MANIFEST_HEADER) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| Error::Manifest {
            line: 1,
            message: format!("missing column '{name}'"),
        })?;
    }

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(e, line)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(cols[i]).unwrap_or("");
        let fail = |message: String| Error::Manifest { line, message };

        let sample_id = field(0).to_string();
        validate_id(&sample_id).map_err(fail)?;
        if !seen.insert(sample_id.clone()) {
            return Err(fail(format!("duplicate sample id '{sample_id}'")));
        }
        let label = field(1)
            .parse::<SceneLabel>()
            .map_err(|_| fail(format!("unknown label '{}'", field(1))))?;
        let split = match field(2) {
            "" => None,
            s => Some(s.parse::<Split>().map_err(|_| fail(format!("unknown split '{s}'")))?),
        };
        let audio = field(3);
        if audio.is_empty() {
            return Err(fail(format!("sample '{sample_id}' has no audio path")));
        }
        let image_paths = field(4)
            .split(';')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(PathBuf::from)
            .collect();
        entries.push(ManifestEntry {
            sample_id,
            label,
            split,
            audio_path: PathBuf::from(audio),
            image_paths,
        });
    }
    Ok(Manifest {
        entries,
        base_dir: base_dir.into(),
    })
}

fn csv_error(e: csv::Error, line: u64) -> Error {
    Error::Manifest {
        line,
        message: format!("malformed row: {e}"),
    }
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(MANIFEST_HEADER).map_err(to_io)?;
    for e in &manifest.entries {
        let images: Vec<String> = e.image_paths.iter().map(|p| p.to_string_lossy().into_owned()).collect();
        w.write_record([
            e.sample_id.as_str(),
            e.label.as_str(),
            e.split.map_or("", Split::as_str),
            &e.audio_path.to_string_lossy(),
            &images.join(";"),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}
