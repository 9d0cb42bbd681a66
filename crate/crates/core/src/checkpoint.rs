//! Checkpoint files: a flat binary record container plus a text manifest.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "DSRNCKPT"
//! version  u32      1
//! count    u32      number of records
//! record*  name_len u32, name (UTF-8), ndim u32, dims u64 × ndim,
//!          values f64 × product(dims)
//! ```
//!
//! The manifest lives next to the binary at `<path>.manifest` and holds
//! `key=value` lines. Both files are written to a temporary name and renamed
//! into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"DSRNCKPT";
const VERSION: u32 = 1;

pub type Manifest = IndexMap<String, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub records: IndexMap<String, Tensor>,
    pub manifest: Manifest,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint {
            records: IndexMap::new(),
            manifest: Manifest::new(),
        }
    }

    /// All parameter values of a store, in store order.
    pub fn from_params(store: &ParamStore) -> Self {
        let mut ck = Self::new();
        for (_, name, value) in store.iter() {
            ck.records.insert(name.to_string(), value.clone());
        }
        ck
    }

    /// Copies matching records into a store; every parameter must be present
    /// with the same shape.
    pub fn load_params(&self, store: &mut ParamStore) -> Result<()> {
        for id in store.ids().collect::<Vec<_>>() {
            let name = store.name(id).to_string();
            let t = self
                .records
                .get(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
            if t.shape() != store.value(id).shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{name}` has shape {:?}, model expects {:?}",
                    t.shape(),
                    store.value(id).shape()
                )));
            }
            store.set_value(id, t.clone())?;
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for (name, t) in &self.records {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<IndexMap<String, Tensor>> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let count = r.u32()?;
        let mut records = IndexMap::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Checkpoint("record name is not UTF-8".into()))?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| r.u64().map(f64::from_bits))
                .collect::<Result<Vec<_>>>()?;
            let t = Tensor::from_vec(&shape, data).map_err(|e| Error::Checkpoint(format!("record `{name}`: {e}")))?;
            records.insert(name, t);
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(records)
    }

    pub fn encode_manifest(&self) -> String {
        self.manifest.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse_manifest(text: &str) -> Result<Manifest> {
        let mut m = Manifest::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Checkpoint(format!("manifest line {} has no `=`", i + 1)))?;
            m.insert(k.to_string(), v.to_string());
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())?;
        write_atomic(&manifest_path(path), self.encode_manifest().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let records = Self::decode(&bytes)?;
        let mpath = manifest_path(path);
        let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
        Ok(Checkpoint {
            records,
            manifest: Self::parse_manifest(&text)?,
        })
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.manifest
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Checkpoint(format!("manifest has no `{key}`")))
    }
}

impl Default for Checkpoint {
    fn default() -> Self {
        Self::new()
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
