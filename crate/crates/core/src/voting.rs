//! Per-image confidence scoring and thresholded aggregation over images,
//! views and the whole shape.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocks::{BlockAssignment, BlockId, UNLABELED};
use crate::render::BinaryMask;
use crate::vision::{BlockMasks, Detection, SegmentMask};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VoteError {
    #[error("DimensionMismatch: block mask {block_w}x{block_h} vs segment {seg_w}x{seg_h}")]
    DimensionMismatch { block_w: u32, block_h: u32, seg_w: u32, seg_h: u32 },
    #[error("ShapeMismatch: matrices disagree on block or label order")]
    ShapeMismatch,
}

/// How several same-label detections in one image become one segment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentMerge {
    /// Highest-confidence detection only.
    #[default]
    Best,
    /// Union of all masks, scored with the best confidence.
    Union,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoteConfig {
    pub t_image: f64,
    pub t_view: f64,
    pub t_shape: f64,
    pub images_per_view: usize,
    pub views: usize,
    pub segment_merge: SegmentMerge,
}

impl Default for VoteConfig {
    fn default() -> Self {
        VoteConfig {
            t_image: 0.001,
            t_view: 0.01,
            t_shape: 0.02,
            images_per_view: 4,
            views: 10,
            segment_merge: SegmentMerge::Best,
        }
    }
}

impl VoteConfig {
    /// Same config with every threshold set to zero.
    pub fn unthresholded(&self) -> Self {
        VoteConfig { t_image: 0.0, t_view: 0.0, t_shape: 0.0, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, t) in [("t_image", self.t_image), ("t_view", self.t_view), ("t_shape", self.t_shape)] {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(format!("{name} must be finite and >= 0, got {t}"));
            }
        }
        if self.images_per_view == 0 || self.views == 0 {
            return Err("images_per_view and views must be positive".into());
        }
        Ok(())
    }
}

/// Row-major blocks × labels grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceMatrix {
    pub blocks: Vec<BlockId>,
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl ConfidenceMatrix {
    pub fn zeros(blocks: Vec<BlockId>, labels: Vec<String>) -> Self {
        let values = vec![0.0; blocks.len() * labels.len()];
        ConfidenceMatrix { blocks, labels, values }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.labels.len() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        let n = self.labels.len();
        self.values[row * n + col] = v;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.labels.len();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn entry(&self, block: BlockId, label: &str) -> Option<f64> {
        let r = self.blocks.iter().position(|b| *b == block)?;
        let c = self.labels.iter().position(|l| l == label)?;
        Some(self.get(r, c))
    }

    pub fn same_shape(&self, o: &ConfidenceMatrix) -> bool {
        self.blocks == o.blocks && self.labels == o.labels
    }

    /// Zeroes every entry strictly below `t`.
    pub fn threshold(&mut self, t: f64) {
        for v in &mut self.values {
            if *v < t {
                *v = 0.0;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// Picks the detection standing in for `label`: highest confidence, then
/// larger mask, then earliest.
fn select<'a>(dets: &'a [(Detection, SegmentMask)], label: &str) -> Option<&'a (Detection, SegmentMask)> {
    let mut best: Option<&(Detection, SegmentMask)> = None;
    for d in dets.iter().filter(|(d, _)| d.label == label) {
        best = match best {
            None => Some(d),
            Some(b) => {
                let better = d.0.confidence > b.0.confidence
                    || (d.0.confidence == b.0.confidence && d.1.mask.count() > b.1.mask.count());
                Some(if better { d } else { b })
            }
        };
    }
    best
}

fn merged_segment(dets: &[(Detection, SegmentMask)], label: &str, merge: SegmentMerge) -> Option<(f64, BinaryMask)> {
    let best = select(dets, label)?;
    match merge {
        SegmentMerge::Best => Some((best.0.confidence, best.1.mask.clone())),
        SegmentMerge::Union => {
            let mut m = best.1.mask.clone();
            for (d, s) in dets {
                if d.label == label && s.mask.width == m.width && s.mask.height == m.height {
                    m.or_assign(&s.mask);
                }
            }
            Some((best.0.confidence, m))
        }
    }
}

/// Confidence of each label on each block for one image: detector confidence
/// times the IoU between the block's visible mask and the label's segment.
pub fn score_image(
    dets: &[(Detection, SegmentMask)],
    block_masks: &BlockMasks,
    labels: &[String],
    blocks: &[BlockId],
    cfg: &VoteConfig,
) -> Result<ConfidenceMatrix, VoteError> {
    let mut c = ConfidenceMatrix::zeros(blocks.to_vec(), labels.to_vec());
    for (col, label) in labels.iter().enumerate() {
        let Some((conf, seg)) = merged_segment(dets, label, cfg.segment_merge) else {
            continue;
        };
        for (row, b) in blocks.iter().enumerate() {
            let Some(bm) = block_masks.get(b) else { continue };
            if bm.width != seg.width || bm.height != seg.height {
                return Err(VoteError::DimensionMismatch {
                    block_w: bm.width,
                    block_h: bm.height,
                    seg_w: seg.width,
                    seg_h: seg.height,
                });
            }
            c.set(row, col, conf * bm.iou(&seg));
        }
    }
    c.threshold(cfg.t_image);
    Ok(c)
}

fn sum_thresholded(ms: &[ConfidenceMatrix], t: f64) -> Result<ConfidenceMatrix, VoteError> {
    let Some(first) = ms.first() else {
        return Err(VoteError::ShapeMismatch);
    };
    let mut acc = ConfidenceMatrix::zeros(first.blocks.clone(), first.labels.clone());
    for m in ms {
        if !m.same_shape(&acc) {
            return Err(VoteError::ShapeMismatch);
        }
        for (a, v) in acc.values.iter_mut().zip(&m.values) {
            *a += v;
        }
    }
    acc.threshold(t);
    Ok(acc)
}

/// Entrywise sum over one view's images, then the view threshold.
pub fn aggregate_view(images: &[ConfidenceMatrix], cfg: &VoteConfig) -> Result<ConfidenceMatrix, VoteError> {
    sum_thresholded(images, cfg.t_view)
}

/// Entrywise sum over views in index order, then the shape threshold.
pub fn aggregate_shape(views: &[ConfidenceMatrix], cfg: &VoteConfig) -> Result<ConfidenceMatrix, VoteError> {
    sum_thresholded(views, cfg.t_shape)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assignment {
    pub assignment: BlockAssignment,
    /// Blocks whose top score was shared by several labels.
    pub ties: Vec<BlockId>,
}

/// Argmax label per block. Exact ties go to the lexicographically smallest
/// label; an all-zero row becomes `unlabeled`.
pub fn assign_labels(c: &ConfidenceMatrix) -> Assignment {
    let mut out = Assignment::default();
    for (row, b) in c.blocks.iter().enumerate() {
        let r = c.row(row);
        let top = r.iter().copied().fold(0.0, f64::max);
        if top <= 0.0 {
            out.assignment.set(*b, vec![UNLABELED.to_string()]);
            out.assignment.scores.insert(*b, 0.0);
            continue;
        }
        let winners: Vec<&String> = c.labels.iter().zip(r).filter(|(_, v)| **v == top).map(|(l, _)| l).collect();
        if winners.len() > 1 {
            out.ties.push(*b);
        }
        let label = winners.into_iter().min().expect("top was attained").clone();
        out.assignment.set(*b, vec![label]);
        out.assignment.scores.insert(*b, top);
    }
    out
}
