//! Binary kernel cache files.
//!
//! Layout: magic `CKRN`, `u32` user count (little-endian), each user id as a
//! `u32` byte length followed by UTF-8 bytes, then `n * n` little-endian
//! `f64` values in row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{KernelMatrix, KernelTag, SubKernel};
use crate::data::{write_atomic, ItemSeries};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CKRN";

pub fn write_ckrn(path: &Path, k: &KernelMatrix) -> Result<()> {
    write_atomic(path, &encode(k))
}

fn encode(k: &KernelMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + k.values().len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(k.n() as u32).to_le_bytes());
    for u in &k.user_index {
        out.extend_from_slice(&(u.len() as u32).to_le_bytes());
        out.extend_from_slice(u.as_bytes());
    }
    for v in k.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Reads a cache file; the tag is not stored and must be supplied.
pub fn read_ckrn(path: &Path, tag: KernelTag) -> Result<KernelMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, tag).map_err(|msg| Error::Parse {
        file: path.display().to_string(),
        line: 0,
        message: msg,
    })
}

fn decode(bytes: &[u8], tag: KernelTag) -> std::result::Result<KernelMatrix, String> {
    let mut pos = 0usize;
    let mut take = |len: usize| -> std::result::Result<&[u8], String> {
        let s = bytes
            .get(pos..pos + len)
            .ok_or_else(|| format!("truncated kernel file at byte {pos}"))?;
        pos += len;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err("bad magic, expected CKRN".into());
    }
    let read_u32 = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
    let n = read_u32(take(4)?);
    let mut users = Vec::with_capacity(n);
    for _ in 0..n {
        let len = read_u32(take(4)?);
        let s = std::str::from_utf8(take(len)?).map_err(|e| e.to_string())?;
        users.push(s.to_string());
    }
    let mut values = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        values.push(f64::from_le_bytes(take(8)?.try_into().expect("8 bytes")));
    }
    if take(1).is_ok() {
        return Err("trailing bytes after kernel values".into());
    }
    KernelMatrix::from_values(tag, users, values).map_err(|e| e.to_string())
}

/// Content hash of a kernel's inputs, used as the cache key.
pub fn series_digest(series: &[ItemSeries], item: SubKernel, time: Option<SubKernel>, normalized: bool) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&(item, time, normalized)).expect("serialisable"));
    for s in series {
        h.update((s.user_id.len() as u64).to_le_bytes());
        h.update(s.user_id.as_bytes());
        h.update((s.dim() as u64).to_le_bytes());
        h.update((s.len() as u64).to_le_bytes());
        for t in s.timestamps() {
            h.update(t.to_le_bytes());
        }
        for v in s.values() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Directory of `<key>.ckrn` files.
#[derive(Debug, Clone)]
pub struct KernelCache {
    dir: PathBuf,
}

impl KernelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(KernelCache { dir })
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.ckrn"))
    }

    pub fn get(&self, key: &str, tag: KernelTag) -> Option<KernelMatrix> {
        let p = self.path_for(key);
        if !p.exists() {
            return None;
        }
        match read_ckrn(&p, tag) {
            Ok(k) => Some(k),
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {}: {e}", p.display());
                None
            }
        }
    }

    pub fn put(&self, key: &str, k: &KernelMatrix) -> Result<()> {
        write_ckrn(&self.path_for(key), k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_bits() {
        let k = KernelMatrix::from_values(
            KernelTag::Nt,
            vec!["α".into(), "b".into()],
            vec![1.0, -0.1, f64::MIN_POSITIVE, 1.0 / 3.0],
        )
        .unwrap();
        let bytes = encode(&k);
        assert_eq!(&bytes[..4], b"CKRN");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        let back = decode(&bytes, KernelTag::Nt).unwrap();
        assert_eq!(back, k);
        assert!(decode(&bytes[..bytes.len() - 1], KernelTag::Nt).is_err());
        assert!(decode(b"XKRN\0\0\0\0", KernelTag::Nt).is_err());
    }

    #[test]
    fn cache_dir_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KernelCache::new(dir.path().join("c")).unwrap();
        let k = KernelMatrix::from_values(KernelTag::W, vec!["u".into()], vec![2.5]).unwrap();
        assert!(cache.get("abc", KernelTag::W).is_none());
        cache.put("abc", &k).unwrap();
        assert_eq!(cache.get("abc", KernelTag::W).unwrap(), k);
    }
}
