//! Binary model container:
//!
//! ```text
//! magic    8 bytes   "PLXCKPT\0"
//! version  u32 LE
//! hlen     u32 LE    length of the JSON header
//! header   hlen      JSON object; always has "shapes": [[r, c], ...]
//!                    denoiser: {"model": <config>, "echo": <any>, "shapes"}
//! params   f64 LE    every tensor in header order, column-major
//! ```

use std::fs;
use std::path::Path;

use super::denoiser::{ToyDenoiser, ToyDenoiserConfig};
use super::nn::Mat;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PLXCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Write `header` (a JSON object) plus a `shapes` entry, followed by the
/// tensors.
pub(crate) fn write_container(
    path: &Path,
    magic: &[u8; 8],
    mut header: serde_json::Map<String, serde_json::Value>,
    params: &[Mat],
) -> Result<()> {
    let shapes: Vec<(usize, usize)> = params.iter().map(|m| m.shape()).collect();
    header.insert("shapes".into(), serde_json::json!(shapes));
    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let n: usize = params.iter().map(|m| m.len()).sum();
    let mut buf = Vec::with_capacity(16 + json.len() + 8 * n);
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for m in params {
        for v in m.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_container`]: the header object and the tensors.
pub(crate) fn read_container(
    path: &Path,
    magic: &[u8; 8],
) -> Result<(serde_json::Map<String, serde_json::Value>, Vec<Mat>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Checkpoint(format!("{}: {m}", path.display()));
    if bytes.len() < 16 || &bytes[..8] != magic {
        return Err(bad("not a checkpoint of this kind (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: serde_json::Map<String, serde_json::Value> =
        serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
    let shapes: Vec<(usize, usize)> = header
        .get("shapes")
        .cloned()
        .ok_or_else(|| bad("header has no shapes"))
        .and_then(|v| serde_json::from_value(v).map_err(|e| bad(&e.to_string())))?;
    let mut rest = &bytes[16 + hlen..];
    let mut params = Vec::with_capacity(shapes.len());
    for &(r, c) in &shapes {
        let need = 8 * r * c;
        if rest.len() < need {
            return Err(bad("truncated parameters"));
        }
        let vals: Vec<f64> = rest[..need]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        params.push(Mat::from_vec(r, c, vals));
        rest = &rest[need..];
    }
    if !rest.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok((header, params))
}

pub fn save_checkpoint(path: &Path, model: &ToyDenoiser, echo: &serde_json::Value) -> Result<()> {
    let mut header = serde_json::Map::new();
    header.insert(
        "model".into(),
        serde_json::to_value(&model.config).map_err(|e| Error::Checkpoint(e.to_string()))?,
    );
    header.insert("echo".into(), echo.clone());
    write_container(path, CHECKPOINT_MAGIC, header, model.params())
}

/// Returns the model and the stored config echo.
pub fn load_checkpoint(path: &Path) -> Result<(ToyDenoiser, serde_json::Value)> {
    let (mut header, params) = read_container(path, CHECKPOINT_MAGIC)?;
    let config: ToyDenoiserConfig = header
        .remove("model")
        .ok_or_else(|| Error::Checkpoint("header has no model config".into()))
        .and_then(|v| serde_json::from_value(v).map_err(|e| Error::Checkpoint(e.to_string())))?;
    let mut model = ToyDenoiser::new(config);
    model.set_params(params)?;
    Ok((model, header.remove("echo").unwrap_or(serde_json::Value::Null)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let model = ToyDenoiser::new(ToyDenoiserConfig {
            d_model: 8,
            n_heads: 2,
            n_blocks: 1,
            mlp_hidden: 8,
            init_seed: 4,
            ..Default::default()
        });
        let echo = serde_json::json!({"steps": 12});
        save_checkpoint(&path, &model, &echo).unwrap();
        let (back, e) = load_checkpoint(&path).unwrap();
        assert_eq!(back.params(), model.params());
        assert_eq!(back.config, model.config);
        assert_eq!(e, echo);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        fs::write(&path, b"hello world, not a model").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
    }
}
