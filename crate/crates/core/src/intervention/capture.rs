//! Per-layer attention/gradient capture files.
//!
//! Each layer is one little-endian binary file:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "CLCP"
//!      4     2  version (1)
//!      6     2  kind (0 attention, 1 gradient)
//!      8     4  layer index
//!     12     4  heads H
//!     16     4  queries Q
//!     20     4  keys K
//!     24  4HQK  f32 values, row-major H×Q×K
//! ```
//!
//! A `sidecar.json` next to the layer files names the visual span, the patch grid and
//! the plan that was applied.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{InterventionPlan, PatchGrid, VisualSpan};

pub const MAGIC: [u8; 4] = *b"CLCP";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;
pub const SIDECAR_FILE: &str = "sidecar.json";

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("not a capture file (bad magic)")]
    BadMagic,
    #[error("unsupported capture version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown capture kind {0}")]
    UnknownKind(u16),
    #[error("capture body holds {actual} bytes, header implies {expected}")]
    Length { expected: u64, actual: u64 },
    #[error("capture header is shorter than {HEADER_LEN} bytes")]
    Truncated,
    #[error("capture values must be finite")]
    NonFinite,
    #[error("invalid capture: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureKind {
    Attention,
    Gradient,
}

impl CaptureKind {
    fn code(self) -> u16 {
        match self {
            CaptureKind::Attention => 0,
            CaptureKind::Gradient => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureLayer {
    pub kind: CaptureKind,
    pub layer: u32,
    pub heads: u32,
    pub queries: u32,
    pub keys: u32,
    pub data: Vec<f32>,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

impl CaptureLayer {
    /// Narrows to f32.
    pub fn from_array(kind: CaptureKind, layer: u32, a: &Array3<f64>) -> Result<Self, CaptureError> {
        let (h, q, k) = a.dim();
        let dim = |n: usize| u32::try_from(n).map_err(|_| CaptureError::Invalid(format!("dimension {n} too large")));
        Ok(Self {
            kind,
            layer,
            heads: dim(h)?,
            queries: dim(q)?,
            keys: dim(k)?,
            data: a.iter().map(|v| *v as f32).collect(),
        })
    }

    pub fn to_array(&self) -> Array3<f64> {
        let shape = (self.heads as usize, self.queries as usize, self.keys as usize);
        Array3::from_shape_vec(shape, self.data.iter().map(|v| *v as f64).collect())
            .expect("length checked at construction")
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.kind.code().to_le_bytes());
        for v in [self.layer, self.heads, self.queries, self.keys] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CaptureError> {
        if bytes.len() < HEADER_LEN {
            return Err(if bytes.len() >= 4 && bytes[..4] != MAGIC { CaptureError::BadMagic } else { CaptureError::Truncated });
        }
        if bytes[..4] != MAGIC {
            return Err(CaptureError::BadMagic);
        }
        let version = u16_at(bytes, 4);
        if version != VERSION {
            return Err(CaptureError::UnsupportedVersion(version));
        }
        let kind = match u16_at(bytes, 6) {
            0 => CaptureKind::Attention,
            1 => CaptureKind::Gradient,
            k => return Err(CaptureError::UnknownKind(k)),
        };
        let (layer, heads, queries, keys) = (u32_at(bytes, 8), u32_at(bytes, 12), u32_at(bytes, 16), u32_at(bytes, 20));
        let body = &bytes[HEADER_LEN..];
        let expected = (heads as u128) * (queries as u128) * (keys as u128) * 4;
        if expected != body.len() as u128 {
            return Err(CaptureError::Length { expected: expected.min(u64::MAX as u128) as u64, actual: body.len() as u64 });
        }
        let data: Vec<f32> = body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CaptureError::NonFinite);
        }
        Ok(Self { kind, layer, heads, queries, keys, data })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarLayer {
    pub layer: u32,
    pub attention: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureSidecar {
    pub image_id: String,
    pub backend_id: String,
    /// The plan the backend actually applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<InterventionPlan>,
    pub seq_len: usize,
    pub visual_span: VisualSpan,
    pub patch_grid: PatchGrid,
    /// Output positions whose loss produced the gradients.
    #[serde(default)]
    pub supervised_positions: Vec<usize>,
    #[serde(default)]
    pub layers: Vec<SidecarLayer>,
}

impl CaptureSidecar {
    pub fn validate(&self) -> Result<(), CaptureError> {
        let span = self.visual_span;
        if span.start > span.end || span.end >= self.seq_len {
            return Err(CaptureError::Invalid(format!("visual span {span:?} outside {} tokens", self.seq_len)));
        }
        if span.len() != self.patch_grid.num_patches() {
            return Err(CaptureError::Invalid(format!(
                "visual span has {} tokens but the patch grid has {}",
                span.len(),
                self.patch_grid.num_patches()
            )));
        }
        if let Some(p) = self.supervised_positions.iter().find(|p| **p >= self.seq_len) {
            return Err(CaptureError::Invalid(format!("supervised position {p} outside {} tokens", self.seq_len)));
        }
        for l in &self.layers {
            for name in std::iter::once(&l.attention).chain(l.gradient.as_ref()) {
                if name.is_empty() || name.contains(['/', '\\']) || name == ".." || name == "." {
                    return Err(CaptureError::Invalid(format!("capture file name {name:?} must be a plain file name")));
                }
            }
        }
        Ok(())
    }
}

/// An attention capture with its optional gradient.
pub type CapturePair = (CaptureLayer, Option<CaptureLayer>);

fn check_pair(sidecar: &CaptureSidecar, (a, g): &CapturePair) -> Result<(), CaptureError> {
    if a.kind != CaptureKind::Attention || a.keys as usize != sidecar.seq_len {
        return Err(CaptureError::Invalid(format!("layer {} attention does not span {} keys", a.layer, sidecar.seq_len)));
    }
    if let Some(g) = g {
        let same = (g.layer, g.heads, g.queries, g.keys) == (a.layer, a.heads, a.queries, a.keys);
        if g.kind != CaptureKind::Gradient || !same {
            return Err(CaptureError::Invalid(format!("layer {} gradient does not match its attention", a.layer)));
        }
    }
    Ok(())
}

/// Writes the layer files and the sidecar; `sidecar.layers` is rewritten to match.
pub fn write_captures(dir: &Path, sidecar: &CaptureSidecar, layers: &[CapturePair]) -> Result<CaptureSidecar, CaptureError> {
    fs::create_dir_all(dir)?;
    let mut side = sidecar.clone();
    side.layers.clear();
    for pair in layers {
        check_pair(sidecar, pair)?;
        let (a, g) = pair;
        let attention = format!("layer_{:03}.attn.bin", a.layer);
        fs::write(dir.join(&attention), a.encode())?;
        let gradient = match g {
            Some(g) => {
                let name = format!("layer_{:03}.grad.bin", g.layer);
                fs::write(dir.join(&name), g.encode())?;
                Some(name)
            }
            None => None,
        };
        side.layers.push(SidecarLayer { layer: a.layer, attention, gradient });
    }
    side.validate()?;
    fs::write(dir.join(SIDECAR_FILE), serde_json::to_vec_pretty(&side)?)?;
    Ok(side)
}

/// Reads a capture directory written by [`write_captures`], in sidecar layer order.
pub fn read_captures(dir: &Path) -> Result<(CaptureSidecar, Vec<CapturePair>), CaptureError> {
    let side: CaptureSidecar = serde_json::from_slice(&fs::read(dir.join(SIDECAR_FILE))?)?;
    side.validate()?;
    let load = |name: &str| -> Result<CaptureLayer, CaptureError> {
        let path: PathBuf = dir.join(name);
        CaptureLayer::decode(&fs::read(path)?)
    };
    let mut out = Vec::with_capacity(side.layers.len());
    for l in &side.layers {
        let a = load(&l.attention)?;
        let g = l.gradient.as_deref().map(load).transpose()?;
        if a.layer != l.layer {
            return Err(CaptureError::Invalid(format!("file {} holds layer {}, sidecar says {}", l.attention, a.layer, l.layer)));
        }
        let pair = (a, g);
        check_pair(&side, &pair)?;
        out.push(pair);
    }
    Ok((side, out))
}
