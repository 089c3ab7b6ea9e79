//! Provider boundary for synthesis, detection, segmentation and label services.

pub mod fallback;
pub mod oracle;
pub mod remote;
pub mod wire;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocks::{BlockId, BlockSet};
use crate::render::BinaryMask;
use crate::scad::SourceFile;

pub use oracle::{oracle_detect, OracleConfig, OracleProvider};
pub use remote::RemoteProvider;

pub const DEFAULT_SEEDS: [i64; 4] = [1, 2, 3, 4];

/// Masks of every commentable block in one view.
pub type BlockMasks = BTreeMap<BlockId, BinaryMask>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("ProviderUnreachable: {0}")]
    Unreachable(String),
    #[error("ProviderError status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("BadImage: {0}")]
    BadImage(String),
    #[error("UnknownCategory: no label table for `{0}`")]
    UnknownCategory(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("provider misconfigured: {0}")]
    Misconfigured(String),
}

/// Pixel box with half-open extent: columns `x0..x1`, rows `y0..y1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct PixelBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<[f64; 4]> for PixelBox {
    fn from(b: [f64; 4]) -> Self {
        PixelBox { x0: b[0], y0: b[1], x1: b[2], y1: b[3] }
    }
}

impl From<PixelBox> for [f64; 4] {
    fn from(b: PixelBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

impl PixelBox {
    /// Box covering the inclusive pixel range `[x0, x1] × [y0, y1]`.
    pub fn from_pixels(b: [u32; 4]) -> Self {
        PixelBox {
            x0: b[0] as f64,
            y0: b[1] as f64,
            x1: b[2] as f64 + 1.0,
            y1: b[3] as f64 + 1.0,
        }
    }

    pub fn is_valid(&self, width: u32, height: u32) -> bool {
        self.x0 < self.x1
            && self.y0 < self.y1
            && self.x0 >= 0.0
            && self.y0 >= 0.0
            && self.x1 <= width as f64
            && self.y1 <= height as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: PixelBox,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentMask {
    pub mask: BinaryMask,
    pub source_box: PixelBox,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelList {
    pub category: String,
    pub labels: Vec<String>,
}

impl LabelList {
    /// Lowercases, trims and drops duplicates; fails on an empty result.
    pub fn new(category: &str, labels: impl IntoIterator<Item = impl AsRef<str>>) -> Result<Self, ProviderError> {
        let mut out: Vec<String> = Vec::new();
        for l in labels {
            let l = l.as_ref().trim().to_lowercase();
            if !l.is_empty() && !out.contains(&l) {
                out.push(l);
            }
        }
        if out.is_empty() {
            return Err(ProviderError::Protocol(format!("empty label list for `{category}`")));
        }
        Ok(LabelList {
            category: category.to_string(),
            labels: out,
        })
    }
}

/// Predicted label → ground-truth label, or `None` when nothing matches.
pub type SynonymMap = BTreeMap<String, Option<String>>;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisRequest {
    pub depth_image: Vec<u8>,
    pub prompt: String,
    pub n_images: usize,
    pub seeds: Vec<i64>,
    pub control_strength: f64,
    pub steps: u32,
    pub resolution: u32,
}

impl SynthesisRequest {
    pub fn new(depth_png: Vec<u8>, category: &str, resolution: u32) -> Self {
        SynthesisRequest {
            depth_image: depth_png,
            prompt: prompt_for(category),
            n_images: DEFAULT_SEEDS.len(),
            seeds: DEFAULT_SEEDS.to_vec(),
            control_strength: 1.0,
            steps: 20,
            resolution,
        }
    }
}

/// Text prompt for the depth-conditioned synthesizer.
pub fn prompt_for(category: &str) -> String {
    format!("{category}, realistic")
}

/// Which image a detect/segment call is about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ImageContext {
    pub view: usize,
    pub image: usize,
}

pub trait VisionProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Called once before any view of a program is processed.
    fn prepare_program(&self, _source: &SourceFile, _blocks: &BlockSet) -> Result<(), ProviderError> {
        Ok(())
    }

    /// Called with the rendered block masks before a view's images are requested.
    fn prepare_view(&self, _view: usize, _masks: &BlockMasks) {}

    fn synthesize(&self, view: usize, req: &SynthesisRequest) -> Result<Vec<Vec<u8>>, ProviderError>;

    fn detect(&self, ctx: ImageContext, image: &[u8], labels: &LabelList) -> Result<Vec<Detection>, ProviderError>;

    fn segment(&self, ctx: ImageContext, image: &[u8], bbox: &PixelBox, label: &str) -> Result<SegmentMask, ProviderError>;

    fn suggest_labels(&self, category: &str) -> Result<LabelList, ProviderError>;

    fn map_synonyms(&self, predicted: &[String], ground_truth: &[String]) -> Result<SynonymMap, ProviderError>;
}

/// Clamps a confidence into `[0, 1]`, logging values that needed it.
pub(crate) fn clamp_confidence(c: f64, source: &str) -> f64 {
    let clamped = if c.is_finite() { c.clamp(0.0, 1.0) } else { 0.0 };
    if clamped != c {
        log::warn!("{source}: confidence {c} clamped to {clamped}");
    }
    clamped
}
