//! Binary weight container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"TOCW"                    magic
//! u32                        format version (FORMAT_VERSION)
//! u32 + bytes                UTF-8 JSON manifest
//! u32                        tensor count
//! per tensor:
//!   u16 + bytes              UTF-8 name
//!   u8                       ndim (always 2 here)
//!   u32 * ndim               dims
//!   f32 * prod(dims)         row-major data
//! ```
//!
//! Values are kept as f64 in memory and narrowed to f32 on disk.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::Param;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TOCW";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightFile {
    pub manifest: serde_json::Value,
    pub tensors: Vec<(String, Array2<f64>)>,
}

impl WeightFile {
    pub fn from_params<'a>(manifest: serde_json::Value, params: impl IntoIterator<Item = &'a Param>) -> Self {
        WeightFile {
            manifest,
            tensors: params.into_iter().map(|p| (p.name.clone(), p.value.clone())).collect(),
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let manifest = serde_json::to_vec(&self.manifest).map_err(std::io::Error::other)?;
        w.write_all(&(manifest.len() as u32).to_le_bytes())?;
        w.write_all(&manifest)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&[2u8])?;
            w.write_all(&(t.nrows() as u32).to_le_bytes())?;
            w.write_all(&(t.ncols() as u32).to_le_bytes())?;
            for v in t.iter() {
                w.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let bad = |m: &str| Error::ModelMismatch {
            stage: "weights".into(),
            message: m.to_string(),
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("not a weight file"));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(bad(&format!(
                "weight format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let mlen = read_u32(&mut r)? as usize;
        let manifest: serde_json::Value = serde_json::from_slice(&read_bytes(&mut r, mlen)?)?;
        let count = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let mut nl = [0u8; 2];
            r.read_exact(&mut nl).map_err(truncated)?;
            let name = String::from_utf8(read_bytes(&mut r, u16::from_le_bytes(nl) as usize)?)
                .map_err(|_| bad("tensor name is not UTF-8"))?;
            let mut nd = [0u8; 1];
            r.read_exact(&mut nd).map_err(truncated)?;
            if nd[0] != 2 {
                return Err(bad(&format!("tensor {name} has {} dims, expected 2", nd[0])));
            }
            let rows = read_u32(&mut r)? as usize;
            let cols = read_u32(&mut r)? as usize;
            let raw = read_bytes(&mut r, rows * cols * 4)?;
            let data: Vec<f64> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            let t = Array2::from_shape_vec((rows, cols), data)
                .map_err(|e| Error::Shape(e.to_string()))?;
            tensors.push((name, t));
        }
        Ok(WeightFile { manifest, tensors })
    }

    /// Copies stored tensors into `params` by name; every param must be present
    /// with the same shape.
    pub fn load_into<'a>(&self, params: impl IntoIterator<Item = &'a mut Param>) -> Result<()> {
        for p in params {
            let (_, t) = self
                .tensors
                .iter()
                .find(|(n, _)| *n == p.name)
                .ok_or_else(|| Error::ModelMismatch {
                    stage: "weights".into(),
                    message: format!("missing tensor {}", p.name),
                })?;
            if t.dim() != p.value.dim() {
                return Err(Error::ModelMismatch {
                    stage: "weights".into(),
                    message: format!(
                        "tensor {} has shape {:?}, model expects {:?}",
                        p.name,
                        t.dim(),
                        p.value.dim()
                    ),
                });
            }
            p.value.assign(t);
        }
        Ok(())
    }
}

/// JSON sidecar of a weight file: `model.tocw` pairs with `model.tocw.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the weight container and its sidecar. `kind` tags both files so a
/// detector bundle cannot be loaded as a hierarchizer.
pub fn save_bundle<'a, S: Serialize>(
    path: &Path,
    kind: &str,
    sidecar: &S,
    params: impl IntoIterator<Item = &'a Param>,
) -> Result<()> {
    let manifest = serde_json::json!({ "kind": kind, "format_version": FORMAT_VERSION });
    let file = WeightFile::from_params(manifest.clone(), params);
    std::fs::write(path, file.to_bytes()).map_err(|e| Error::io(path, e))?;
    let mut side = serde_json::to_value(sidecar)?;
    if let serde_json::Value::Object(map) = &mut side {
        map.insert("kind".into(), kind.into());
        map.insert("format_version".into(), FORMAT_VERSION.into());
    }
    let side_path = sidecar_path(path);
    let mut text = serde_json::to_string_pretty(&side)?;
    text.push('\n');
    std::fs::write(&side_path, text).map_err(|e| Error::io(side_path, e))
}

/// Reads a bundle written by [`save_bundle`], checking kind and version.
pub fn load_bundle<S: DeserializeOwned>(path: &Path, kind: &str) -> Result<(S, WeightFile)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let file = WeightFile::from_bytes(&bytes)?;
    let mismatch = |message: String| Error::ModelMismatch {
        stage: kind.to_string(),
        message,
    };
    if file.manifest.get("kind").and_then(|k| k.as_str()) != Some(kind) {
        return Err(mismatch(format!("{} does not hold a {kind} model", path.display())));
    }
    let side_path = sidecar_path(path);
    let text = std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
    let side: serde_json::Value = serde_json::from_str(&text)?;
    if side.get("kind").and_then(|k| k.as_str()) != Some(kind)
        || side.get("format_version").and_then(|v| v.as_u64()) != Some(FORMAT_VERSION as u64)
    {
        return Err(mismatch(format!("sidecar {} does not match", side_path.display())));
    }
    let parsed = serde_json::from_value(side).map_err(|e| mismatch(format!("sidecar: {e}")))?;
    Ok((parsed, file))
}

fn truncated(_: std::io::Error) -> Error {
    Error::ModelMismatch {
        stage: "weights".into(),
        message: "truncated weight file".into(),
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_bytes(r: &mut impl Read, n: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(n as u64).read_to_end(&mut buf).map_err(truncated)?;
    if buf.len() != n {
        return Err(truncated(std::io::ErrorKind::UnexpectedEof.into()));
    }
    Ok(buf)
}
