//! Binary tensor container.
//!
//! Layout (little-endian): magic `AVF1`, version `u32`, record count `u64`,
//! then per record: key length `u32`, UTF-8 key, dtype tag `u8`
//! (1 = f32, 2 = f64), rank `u32`, `rank` dims as `u32`, payload.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"AVF1";
pub const VERSION: u32 = 1;
const HEADER_LEN: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32 = 1,
    F64 = 2,
}

impl DType {
    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Self::F32),
            2 => Some(Self::F64),
            _ => None,
        }
    }

    fn width(self) -> u64 {
        match self {
            Self::F32 => 4,
            Self::F64 => 8,
        }
    }
}

/// Streams records to a temporary file next to the target; `finish`
/// publishes it with an atomic rename.
pub struct ContainerWriter {
    out: Option<BufWriter<File>>,
    tmp: PathBuf,
    path: PathBuf,
    count: u64,
    keys: std::collections::HashSet<String>,
}

impl ContainerWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let name = path
            .file_name()
            .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
        let mut tmp_name = name.to_os_string();
        tmp_name.push(format!(".tmp{}", std::process::id()));
        let tmp = path.with_file_name(tmp_name);
        let file = File::create(&tmp).map_err(|e| Error::file(&tmp, e))?;
        let mut out = BufWriter::new(file);
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&0u64.to_le_bytes())?;
        Ok(Self {
            out: Some(out),
            tmp,
            path,
            count: 0,
            keys: Default::default(),
        })
    }

    pub fn write(&mut self, key: &str, tensor: &Tensor, dtype: DType) -> Result<()> {
        if !self.keys.insert(key.to_string()) {
            return Err(Error::Validation(format!("duplicate key '{key}'")));
        }
        let k = key.as_bytes();
        let out = self.out.as_mut().expect("writer is open");
        out.write_all(&u32::try_from(k.len()).map_err(|_| Error::Validation("key too long".into()))?.to_le_bytes())?;
        out.write_all(k)?;
        out.write_all(&[dtype as u8])?;
        out.write_all(&(tensor.rank() as u32).to_le_bytes())?;
        for &d in tensor.shape() {
            let d = u32::try_from(d).map_err(|_| Error::Validation(format!("dimension {d} too large")))?;
            out.write_all(&d.to_le_bytes())?;
        }
        match dtype {
            DType::F32 => {
                for &v in tensor.data() {
                    out.write_all(&(v as f32).to_le_bytes())?;
                }
            }
            DType::F64 => {
                for &v in tensor.data() {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn finish(mut self) -> Result<()> {
        let mut out = self.out.take().expect("writer is open");
        out.flush()?;
        let mut file = out.into_inner().map_err(|e| e.into_error())?;
        file.seek(SeekFrom::Start(8))?;
        file.write_all(&self.count.to_le_bytes())?;
        file.sync_all()?;
        drop(file);
        fs::rename(&self.tmp, &self.path).map_err(|e| Error::file(&self.path, e))
    }
}

impl Drop for ContainerWriter {
    fn drop(&mut self) {
        if self.out.take().is_some() {
            let _ = fs::remove_file(&self.tmp);
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    offset: u64,
    dtype: DType,
    shape: Vec<usize>,
}

/// Read handle over a finished container. The index is validated on open;
/// each read opens its own file handle, so one reader may be shared across
/// threads.
#[derive(Debug, Clone)]
pub struct ContainerReader {
    path: PathBuf,
    order: Vec<String>,
    index: HashMap<String, Entry>,
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

impl ContainerReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::file(&path, e))?;
        let file_len = file.metadata()?.len();
        let mut r = BufReader::new(file);
        let truncated = |what: &str| Error::Format(format!("{}: truncated {what}", path.display()));

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| truncated("header"))?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("{}: bad magic {:?}", path.display(), magic)));
        }
        let version = read_u32(&mut r).map_err(|_| truncated("header"))?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "{}: unsupported version {version} (expected {VERSION})",
                path.display()
            )));
        }
        let mut cnt = [0u8; 8];
        r.read_exact(&mut cnt).map_err(|_| truncated("header"))?;
        let count = u64::from_le_bytes(cnt);

        let mut pos = HEADER_LEN;
        let mut order = Vec::new();
        let mut index = HashMap::new();
        for _ in 0..count {
            let klen = u64::from(read_u32(&mut r).map_err(|_| truncated("record"))?);
            if pos + 4 + klen > file_len {
                return Err(truncated("record key"));
            }
            let mut key = vec![0u8; klen as usize];
            r.read_exact(&mut key).map_err(|_| truncated("record key"))?;
            let key = String::from_utf8(key)
                .map_err(|_| Error::Format(format!("{}: key is not UTF-8", path.display())))?;
            let mut tag = [0u8; 1];
            r.read_exact(&mut tag).map_err(|_| truncated("record"))?;
            let dtype = DType::from_tag(tag[0])
                .ok_or_else(|| Error::Format(format!("{}: unknown dtype tag {}", path.display(), tag[0])))?;
            let rank = read_u32(&mut r).map_err(|_| truncated("record"))? as u64;
            if pos + 4 + klen + 5 + 4 * rank > file_len {
                return Err(truncated("record shape"));
            }
            let mut shape = Vec::with_capacity(rank as usize);
            for _ in 0..rank {
                shape.push(read_u32(&mut r).map_err(|_| truncated("record shape"))? as usize);
            }
            let n: u64 = shape.iter().map(|&d| d as u64).product();
            let offset = pos + 4 + klen + 5 + 4 * rank;
            let end = offset + n * dtype.width();
            if end > file_len {
                return Err(truncated(&format!("payload for '{key}'")));
            }
            r.seek(SeekFrom::Start(end))?;
            pos = end;
            if index.insert(key.clone(), Entry { offset, dtype, shape }).is_some() {
                return Err(Error::Format(format!("{}: duplicate key '{key}'", path.display())));
            }
            order.push(key);
        }
        if pos != file_len {
            return Err(Error::Format(format!(
                "{}: {} trailing bytes after {count} records",
                path.display(),
                file_len - pos
            )));
        }
        Ok(Self { path, order, index })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Keys in file order.
    pub fn keys(&self) -> &[String] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn shape(&self, key: &str) -> Option<&[usize]> {
        self.index.get(key).map(|e| e.shape.as_slice())
    }

    pub fn dtype(&self, key: &str) -> Option<DType> {
        self.index.get(key).map(|e| e.dtype)
    }

    pub fn read(&self, key: &str) -> Result<Tensor> {
        let entry = self
            .index
            .get(key)
            .ok_or_else(|| Error::NotFound(format!("key '{key}' in {}", self.path.display())))?;
        let mut file = File::open(&self.path).map_err(|e| Error::file(&self.path, e))?;
        file.seek(SeekFrom::Start(entry.offset))?;
        let n: usize = entry.shape.iter().product();
        let mut buf = vec![0u8; n * entry.dtype.width() as usize];
        file.read_exact(&mut buf)
            .map_err(|_| Error::Format(format!("{}: truncated payload for '{key}'", self.path.display())))?;
        let data: Vec<f64> = match entry.dtype {
            DType::F32 => buf
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
                .collect(),
            DType::F64 => buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        };
        Tensor::new(entry.shape.clone(), data)
            .map_err(|e| Error::Format(format!("{}: record '{key}': {e}", self.path.display())))
    }

    /// Reads several keys; a missing key fails the whole call, naming every
    /// absent key.
    pub fn read_many<S: AsRef<str>>(&self, keys: &[S]) -> Result<Vec<Tensor>> {
        let missing: Vec<&str> = keys.iter().map(AsRef::as_ref).filter(|k| !self.contains(k)).collect();
        if !missing.is_empty() {
            return Err(Error::NotFound(format!(
                "keys {} in {}",
                missing.join(", "),
                self.path.display()
            )));
        }
        keys.iter().map(|k| self.read(k.as_ref())).collect()
    }
}
