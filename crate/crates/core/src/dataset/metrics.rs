//! Block accuracy and per-label block-set IoU.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::blocks::{BlockAssignment, BlockId};
use crate::vision::SynonymMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub b_acc: f64,
    pub s_iou: f64,
    pub per_label_iou: BTreeMap<String, f64>,
    pub n_blocks: usize,
    pub m_correct: usize,
    /// predicted label → ground-truth label → block count.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
}

fn gt_blocks(gt: &BlockAssignment) -> Result<Vec<(BlockId, &[String])>, DatasetError> {
    let blocks: Vec<_> = gt.labeled().collect();
    if blocks.is_empty() {
        Err(DatasetError::NoGroundTruth)
    } else {
        Ok(blocks)
    }
}

/// Fraction of ground-truth blocks whose predicted label is among their GT labels.
pub fn block_accuracy(pred: &BlockAssignment, gt: &BlockAssignment) -> Result<(f64, usize, usize), DatasetError> {
    let blocks = gt_blocks(gt)?;
    let m = blocks
        .iter()
        .filter(|(b, labels)| pred.primary(*b).is_some_and(|p| labels.iter().any(|l| l == p)))
        .count();
    let n = blocks.len();
    Ok((m as f64 / n as f64, m, n))
}

/// Mean over ground-truth labels of IoU between the block set predicted as
/// the label and the block set carrying it in ground truth.
pub fn semantic_iou(pred: &BlockAssignment, gt: &BlockAssignment) -> Result<(f64, BTreeMap<String, f64>), DatasetError> {
    let blocks = gt_blocks(gt)?;
    let mut truth: BTreeMap<&str, BTreeSet<BlockId>> = BTreeMap::new();
    let mut predicted: BTreeMap<&str, BTreeSet<BlockId>> = BTreeMap::new();
    for (b, labels) in &blocks {
        for l in labels.iter() {
            truth.entry(l).or_default().insert(*b);
        }
        if let Some(p) = pred.primary(*b) {
            predicted.entry(p).or_default().insert(*b);
        }
    }
    let empty = BTreeSet::new();
    let per_label: BTreeMap<String, f64> = truth
        .iter()
        .map(|(l, t)| {
            let p = predicted.get(l).unwrap_or(&empty);
            let inter = t.intersection(p).count();
            let union = t.union(p).count();
            (l.to_string(), inter as f64 / union as f64)
        })
        .collect();
    let s = per_label.values().sum::<f64>() / per_label.len() as f64;
    Ok((s, per_label))
}

pub fn evaluate(pred: &BlockAssignment, gt: &BlockAssignment) -> Result<MetricsReport, DatasetError> {
    let (b_acc, m_correct, n_blocks) = block_accuracy(pred, gt)?;
    let (s_iou, per_label_iou) = semantic_iou(pred, gt)?;
    let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (b, labels) in gt.labeled() {
        let p = pred.primary(b).unwrap_or(crate::blocks::UNLABELED);
        // A hit counts against the matched label, a miss against the first GT label.
        let g = labels.iter().find(|l| *l == p).unwrap_or(&labels[0]);
        *confusion.entry(p.to_string()).or_default().entry(g.clone()).or_default() += 1;
    }
    Ok(MetricsReport { b_acc, s_iou, per_label_iou, n_blocks, m_correct, confusion })
}

/// Replaces each predicted label that the map sends somewhere.
pub fn apply_synonyms(pred: &BlockAssignment, map: &SynonymMap) -> BlockAssignment {
    let mut out = pred.clone();
    for labels in out.labels.values_mut() {
        for l in labels.iter_mut() {
            if let Some(Some(to)) = map.get(l.as_str()) {
                *l = to.clone();
            }
        }
    }
    out
}
