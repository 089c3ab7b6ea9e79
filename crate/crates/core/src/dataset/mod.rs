//! Machine-made benchmark tracks and the evaluation metrics.

pub mod manifest;
pub mod metrics;
pub mod records;
pub mod synth;
pub mod transfer;

use thiserror::Error;

use crate::blocks::{insert_comments, BlockAssignment};
use crate::program::Program;
use crate::vision::fallback::builtin_labels;
use crate::vision::LabelList;

pub use manifest::{build_manifest, write_dataset, DatasetEntry, DatasetStats, Manifest, ManifestEntry, Track};
pub use metrics::{apply_synonyms, block_accuracy, evaluate, semantic_iou, MetricsReport};
pub use records::{translate_primitives, PrimitiveRecord, RecordFile, RecordKind, Rotation};
pub use synth::synthetic_records;
pub use transfer::{transfer_labels, LabeledPointCloud};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("InvalidPrimitive record {index}: {reason}")]
    InvalidPrimitive { index: usize, reason: String },
    #[error("EmptyCloud: labeled point cloud has no points")]
    EmptyCloud,
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),
    #[error("NoGroundTruth: no block carries a ground-truth label")]
    NoGroundTruth,
    #[error("DuplicateId: `{0}` appears more than once")]
    DuplicateId(String),
    #[error("unknown track `{0}`")]
    UnknownTrack(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("generated program failed to load: {0}")]
    Program(String),
    #[error("{0}")]
    Io(String),
}

/// Label set for an entry: the category's built-in table when it covers
/// every ground-truth label, otherwise the labels in order of appearance.
fn label_set_for(category: &str, gt: &BlockAssignment) -> Result<LabelList, DatasetError> {
    let mut used: Vec<&String> = Vec::new();
    for (_, labels) in gt.labeled() {
        for l in labels {
            if !used.contains(&l) {
                used.push(l);
            }
        }
    }
    if let Ok(table) = builtin_labels(category) {
        if used.iter().all(|u| table.labels.contains(u)) {
            return Ok(table);
        }
    }
    LabelList::new(category, used).map_err(|_| DatasetError::NoGroundTruth)
}

/// Translates records into a program with ground-truth comments. Labels come
/// from the records when all carry `gt_labels`, otherwise from the cloud.
pub fn build_entry(
    id: &str,
    track: Track,
    category: &str,
    records: &[PrimitiveRecord],
    cloud: Option<&LabeledPointCloud>,
) -> Result<(DatasetEntry, Vec<String>), DatasetError> {
    let (source, spans) = translate_primitives(records)?;
    let program = Program::load(source).map_err(|e| DatasetError::Program(e.to_string()))?;
    let mut warnings = Vec::new();
    let inline = records.iter().all(|r| r.gt_labels.as_ref().is_some_and(|l| !l.is_empty()));
    let gt = if inline {
        let mut gt = BlockAssignment::default();
        for span in &spans {
            let block = program
                .blocks
                .blocks
                .iter()
                .filter(|b| b.span.start_line <= span.line && span.line <= b.span.end_line)
                .max_by_key(|b| b.span.start_line)
                .ok_or_else(|| DatasetError::Program(format!("record {} has no block", span.record)))?;
            let labels = records[span.record].gt_labels.clone().unwrap_or_default();
            let mut merged = gt.labels_of(block.id).to_vec();
            for l in labels.into_iter().map(|l| l.trim().to_lowercase()) {
                if !merged.contains(&l) {
                    merged.push(l);
                }
            }
            gt.set(block.id, merged);
        }
        gt
    } else {
        let cloud = cloud.ok_or(DatasetError::NoGroundTruth)?;
        let shape = program.shape().map_err(|e| DatasetError::Program(e.to_string()))?;
        let (gt, w) = transfer_labels(&program.blocks, &shape, cloud, transfer::DEFAULT_SHARE)?;
        warnings.extend(w);
        gt
    };
    let label_set = label_set_for(category, &gt)?;
    let (commented, w) = insert_comments(&program.source, &program.blocks, &gt);
    warnings.extend(w);
    Ok((
        DatasetEntry {
            id: id.to_string(),
            track,
            category: category.to_string(),
            program: commented,
            gt,
            label_set,
        },
        warnings,
    ))
}
