//! The `URSTW1` named-tensor container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     6 bytes  "URSTW1"
//! count     u32
//! per tensor:
//!   name_len u16, name (UTF-8)
//!   dtype    u8      (0 = f32)
//!   ndim     u8
//!   dims     ndim × u32
//!   payload  Π(dims) × f32
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{shape_err, Error, Result};

pub const MAGIC: &[u8; 6] = b"URSTW1";
const DTYPE_F32: u8 = 0;

/// An n-dimensional `f32` array as stored in the container.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedArray {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl NamedArray {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(shape_err!("array dims {:?} need {} values, got {}", dims, expected, data.len()));
        }
        if dims.len() > u8::MAX as usize {
            return Err(shape_err!("array rank {} exceeds 255", dims.len()));
        }
        Ok(NamedArray { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

/// Ordered collection of named arrays. Insertion order is the on-disk order,
/// so load → save reproduces a file byte for byte.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    entries: Vec<(String, NamedArray)>,
    index: HashMap<String, usize>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, name: impl Into<String>, array: NamedArray) -> Result<()> {
        let name = name.into();
        if name.len() > u16::MAX as usize {
            return Err(Error::Argument(format!("tensor name of {} bytes is too long", name.len())));
        }
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateName(name));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, array));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&NamedArray> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    pub fn require(&self, name: &str) -> Result<&NamedArray> {
        self.get(name).ok_or_else(|| Error::MissingWeight(name.to_owned()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &NamedArray)> {
        self.entries.iter().map(|(n, a)| (n.as_str(), a))
    }

    /// Merges another store into this one, rejecting name collisions.
    pub fn extend(&mut self, other: WeightStore) -> Result<()> {
        for (name, array) in other.entries {
            self.insert(name, array)?;
        }
        Ok(())
    }

    /// Exact size of the serialized container.
    pub fn encoded_len(&self) -> usize {
        MAGIC.len()
            + 4
            + self
                .entries
                .iter()
                .map(|(name, a)| 2 + name.len() + 1 + 1 + 4 * a.dims.len() + 4 * a.data.len())
                .sum::<usize>()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, a) in &self.entries {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(DTYPE_F32);
            out.push(a.dims.len() as u8);
            for &d in &a.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len(), "magic").map_err(|_| Error::BadMagic)? != MAGIC {
            return Err(Error::BadMagic);
        }
        let count = r.u32("tensor count")?;
        let mut store = WeightStore::new();
        for _ in 0..count {
            let name_len = r.u16("name length")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "name")?)
                .map_err(|e| Error::Argument(format!("tensor name is not UTF-8: {e}")))?
                .to_owned();
            let dtype = r.u8("dtype")?;
            if dtype != DTYPE_F32 {
                return Err(Error::UnsupportedDtype(dtype));
            }
            let ndim = r.u8("rank")? as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(r.u32("dims")? as usize);
            }
            let count = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or(Error::Truncated("payload"))?;
            let raw = r.take(count.checked_mul(4).ok_or(Error::Truncated("payload"))?, "payload")?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            store.insert(name, NamedArray { dims, data })?;
        }
        if r.pos != bytes.len() {
            return Err(Error::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightStore> {
    WeightStore::load(path)
}

pub fn save_weights(store: &WeightStore, path: impl AsRef<Path>) -> Result<()> {
    store.save(path)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(Error::Truncated(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
