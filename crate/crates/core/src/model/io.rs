//! Model files.
//!
//! Layout (all integers little-endian):
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `CLSTMIDS` |
//! | 4 | format version, `u32` (= 1) |
//! | 8 | header length `n`, `u64` |
//! | n | UTF-8 JSON header |
//! | rest | every parameter as little-endian `f64`, in manifest order |
//!
//! The header holds `scalar` (`"f64"` or `"f32"`), `seed`, the architecture
//! `config`, and `tensors`, the ordered manifest of `{name, shape, offset}`
//! where `offset` is the byte offset of the tensor inside the data section.
//! An optional `preprocessing` object records how raw CSV rows must be
//! transformed before they are fed to the model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Preprocessing;
use crate::error::{Error, LoadError, Result};
use crate::model::{ArchitectureConfig, HybridModel, ModelParams};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"CLSTMIDS";
pub const FORMAT_VERSION: u32 = 1;

const PREAMBLE: usize = 8 + 4 + 8;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    scalar: String,
    seed: u64,
    config: ArchitectureConfig,
    tensors: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preprocessing: Option<Preprocessing>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

/// A loaded model plus the preprocessing recorded with it.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile<T = f64> {
    pub model: HybridModel<T>,
    pub preprocessing: Option<Preprocessing>,
}

fn manifest<T: Scalar>(params: &ModelParams<T>) -> Vec<ManifestEntry> {
    let mut offset = 0u64;
    params
        .named()
        .into_iter()
        .map(|(name, t)| {
            let e = ManifestEntry {
                name,
                shape: t.shape().to_vec(),
                offset,
            };
            offset += 8 * t.len() as u64;
            e
        })
        .collect()
}

pub fn model_to_bytes<T: Scalar>(model: &HybridModel<T>, preprocessing: Option<&Preprocessing>) -> Vec<u8> {
    let header = Header {
        scalar: T::NAME.to_string(),
        seed: model.seed(),
        config: model.config().clone(),
        tensors: manifest(&model.params),
        preprocessing: preprocessing.cloned(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(PREAMBLE + json.len() + 8 * model.params.count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in model.params.tensors() {
        for v in t.data() {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    out
}

fn take<'b>(bytes: &'b [u8], at: usize, n: u64, section: &'static str) -> Result<&'b [u8], LoadError> {
    let available = bytes.len().saturating_sub(at) as u64;
    if available < n {
        return Err(LoadError::Truncated {
            section,
            needed: n,
            available,
        });
    }
    Ok(&bytes[at..at + n as usize])
}

fn parse_header(bytes: &[u8]) -> Result<(Header, usize), LoadError> {
    let magic = take(bytes, 0, 8, "magic")?;
    if magic != MAGIC {
        return Err(LoadError::BadMagic {
            found: magic.to_vec(),
        });
    }
    let version = u32::from_le_bytes(take(bytes, 8, 4, "version")?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(LoadError::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let header_len = u64::from_le_bytes(take(bytes, 12, 8, "header length")?.try_into().unwrap());
    let raw = take(bytes, PREAMBLE, header_len, "header")?;
    let header: Header =
        serde_json::from_slice(raw).map_err(|e| LoadError::Header(e.to_string()))?;
    Ok((header, PREAMBLE + header_len as usize))
}

/// The scalar type (`"f64"` or `"f32"`) a model file was written with.
pub fn stored_scalar(bytes: &[u8]) -> Result<String, LoadError> {
    Ok(parse_header(bytes)?.0.scalar)
}

pub fn model_from_bytes<T: Scalar>(bytes: &[u8]) -> Result<ModelFile<T>, LoadError> {
    let (header, data_at) = parse_header(bytes)?;
    if header.scalar != T::NAME {
        return Err(LoadError::Header(format!(
            "file stores {} parameters, caller asked for {}",
            header.scalar,
            T::NAME
        )));
    }
    let expected = ModelParams::<T>::zeros(&header.config)
        .map_err(|e| LoadError::Header(format!("invalid architecture: {e}")))?;
    let want = manifest(&expected);
    if want != header.tensors {
        let detail = want
            .iter()
            .zip(&header.tensors)
            .find(|(a, b)| a != b)
            .map(|(a, b)| format!("expected {} {:?} at {}, file has {} {:?} at {}", a.name, a.shape, a.offset, b.name, b.shape, b.offset))
            .unwrap_or_else(|| format!("expected {} tensors, file lists {}", want.len(), header.tensors.len()));
        return Err(LoadError::ShapeMismatch(detail));
    }
    let needed = 8 * expected.count() as u64;
    let data = take(bytes, data_at, needed, "tensor data")?;
    let trailing = (bytes.len() - data_at) as u64 - needed;
    if trailing != 0 {
        return Err(LoadError::TrailingBytes(trailing));
    }

    let mut params = expected;
    let mut chunks = data.chunks_exact(8);
    for (entry, t) in header.tensors.iter().zip(params.tensors_mut()) {
        let mut values = Vec::with_capacity(t.len());
        for c in chunks.by_ref().take(t.len()) {
            values.push(T::lit(f64::from_le_bytes(c.try_into().unwrap())));
        }
        *t = Tensor::new(&entry.shape, values)
            .map_err(|e| LoadError::Header(format!("tensor {}: {e}", entry.name)))?;
    }
    let model = HybridModel::from_parts(header.config, params, header.seed)
        .map_err(|e| LoadError::ShapeMismatch(e.to_string()))?;
    Ok(ModelFile {
        model,
        preprocessing: header.preprocessing,
    })
}

/// Writes `model` (and optional preprocessing) to `path`.
pub fn save_model<T: Scalar>(
    model: &HybridModel<T>,
    preprocessing: Option<&Preprocessing>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_bytes(model, preprocessing)).map_err(|e| Error::io(path, e))
}

pub fn load_model_file<T: Scalar>(path: impl AsRef<Path>) -> Result<ModelFile<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(model_from_bytes(&bytes)?)
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<HybridModel<T>> {
    Ok(load_model_file(path)?.model)
}
