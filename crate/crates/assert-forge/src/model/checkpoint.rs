//! Checkpoint directory layout: a flat-text manifest, an index of tensor
//! names and shapes, and one raw little-endian blob per tensor.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::tensor::{Matrix, Scalar};
use super::{ModelConfig, ModelError, Parameters};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const INDEX_FILE: &str = "tensors.idx";

fn dtype_of<T: Scalar>() -> &'static str {
    if std::mem::size_of::<T>() == 4 {
        "f32"
    } else {
        "f64"
    }
}

fn blob_name(tensor: &str) -> String {
    format!("{tensor}.bin")
}

pub fn write_manifest(dir: &Path, manifest: &BTreeMap<String, String>) -> Result<(), ModelError> {
    let mut text = String::new();
    for (k, v) in manifest {
        text.push_str(&format!("{k}={v}\n"));
    }
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<BTreeMap<String, String>, ModelError> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let mut out = BTreeMap::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ModelError::Checkpoint(format!("bad manifest line `{line}`")))?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

/// Write named tensors plus the manifest into `dir` (created if missing).
/// Blobs are row-major little-endian in the element width of `T`.
pub fn save_checkpoint<T: Scalar>(
    dir: &Path,
    manifest: &BTreeMap<String, String>,
    tensors: &[(String, &Matrix<T>)],
) -> Result<(), ModelError> {
    fs::create_dir_all(dir)?;
    write_manifest(dir, manifest)?;
    let mut index = String::new();
    for (name, m) in tensors {
        index.push_str(&format!(
            "{name} {} {} {}\n",
            m.rows,
            m.cols,
            dtype_of::<T>()
        ));
        let mut bytes: Vec<u8> = Vec::with_capacity(m.data.len() * std::mem::size_of::<T>());
        if dtype_of::<T>() == "f32" {
            for v in &m.data {
                bytes.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
            }
        } else {
            for v in &m.data {
                bytes.extend_from_slice(&v.to_f64().to_le_bytes());
            }
        }
        let mut f = fs::File::create(dir.join(blob_name(name)))?;
        f.write_all(&bytes)?;
    }
    fs::write(dir.join(INDEX_FILE), index)?;
    Ok(())
}

/// Read every tensor listed in the index, converting to `T` if the stored
/// dtype differs.
pub fn load_tensors<T: Scalar>(dir: &Path) -> Result<BTreeMap<String, Matrix<T>>, ModelError> {
    let index = fs::read_to_string(dir.join(INDEX_FILE))?;
    let mut out = BTreeMap::new();
    for line in index.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(ModelError::Checkpoint(format!("bad index line `{line}`")));
        }
        let name = parts[0];
        let rows: usize = parts[1]
            .parse()
            .map_err(|_| ModelError::Checkpoint(format!("bad rows in `{line}`")))?;
        let cols: usize = parts[2]
            .parse()
            .map_err(|_| ModelError::Checkpoint(format!("bad cols in `{line}`")))?;
        let dtype = parts[3];
        let mut f = fs::File::open(dir.join(blob_name(name)))?;
        let mut bytes = Vec::new();
        f.read_to_end(&mut bytes)?;
        let expected = rows * cols * if dtype == "f32" { 4 } else { 8 };
        if bytes.len() != expected {
            return Err(ModelError::Checkpoint(format!(
                "tensor `{name}` blob is {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let mut data = Vec::with_capacity(rows * cols);
        match dtype {
            "f32" => {
                for chunk in bytes.chunks_exact(4) {
                    let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
                    data.push(T::from_f64(v as f64));
                }
            }
            "f64" => {
                for chunk in bytes.chunks_exact(8) {
                    let v = f64::from_le_bytes([
                        chunk[0], chunk[1], chunk[2], chunk[3], chunk[4], chunk[5], chunk[6],
                        chunk[7],
                    ]);
                    data.push(T::from_f64(v));
                }
            }
            other => {
                return Err(ModelError::Checkpoint(format!("unknown dtype `{other}`")));
            }
        }
        out.insert(name.to_string(), Matrix::from_vec(rows, cols, data));
    }
    Ok(out)
}

impl<T: Scalar> Parameters<T> {
    /// Rebuild parameters from a named-tensor map, verifying shapes against
    /// the configuration.
    pub fn from_named(
        cfg: &ModelConfig,
        map: &BTreeMap<String, Matrix<T>>,
    ) -> Result<Self, ModelError> {
        let mut params = Parameters::zeros(cfg);
        let mut missing = None;
        params.visit_mut(&mut |name, m| match map.get(name) {
            Some(src) if src.rows == m.rows && src.cols == m.cols => {
                m.data.copy_from_slice(&src.data);
            }
            Some(src) => {
                missing.get_or_insert(format!(
                    "tensor `{name}` has shape {}x{}, expected {}x{}",
                    src.rows, src.cols, m.rows, m.cols
                ));
            }
            None => {
                missing.get_or_insert(format!("tensor `{name}` missing from checkpoint"));
            }
        });
        match missing {
            Some(msg) => Err(ModelError::Checkpoint(msg)),
            None => Ok(params),
        }
    }
}
