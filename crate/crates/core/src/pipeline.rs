//! End-to-end commenting: render views, query the provider, vote, and write
//! labels back into the source.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::blocks::{insert_comments, BlockId, BlockSet};
use crate::config::RenderConfig;
use crate::geometry::{GeometryError, Shape};
use crate::program::{Program, ProgramError};
use crate::render::{encode_depth_8bit, morphological_close, render_depth, Camera, DepthImage, OwnerMap, RenderError};
use crate::scad::SourceFile;
use crate::vision::{BlockMasks, Detection, ImageContext, LabelList, PixelBox, ProviderError, SegmentMask, SynthesisRequest, VisionProvider};
use crate::voting::{aggregate_shape, aggregate_view, assign_labels, score_image, ConfidenceMatrix, SegmentMerge, VoteConfig, VoteError};

/// Share of views that must succeed for a run to count.
pub const MIN_VIEW_SHARE: f64 = 0.6;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage parse: {0}")]
    Program(#[from] ProgramError),
    #[error("stage geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("stage render: {0}")]
    Render(#[from] RenderError),
    #[error("stage {stage}: {source}")]
    Provider { stage: &'static str, source: ProviderError },
    #[error("stage vote: {0}")]
    Vote(#[from] VoteError),
    #[error("PipelineFailed at stage {stage}: only {succeeded} of {views} views succeeded (need {needed}); first error: {message}")]
    Failed { stage: &'static str, succeeded: usize, views: usize, needed: usize, message: String },
}

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub category: String,
    /// Overrides the provider's label suggestion.
    pub labels: Option<Vec<String>>,
    pub render: RenderConfig,
    pub vote: VoteConfig,
    pub timings: bool,
}

impl PipelineOptions {
    pub fn new(category: &str) -> Self {
        PipelineOptions {
            category: category.to_string(),
            labels: None,
            render: RenderConfig::default(),
            vote: VoteConfig::default(),
            timings: true,
        }
    }
}

/// Depth, closed depth and per-block visible masks for one camera.
pub struct ViewRender {
    pub camera: Camera,
    pub depth: DepthImage,
    pub closed_png: Vec<u8>,
    pub masks: BlockMasks,
}

pub fn render_view(shape: &Shape, blocks: &BlockSet, camera: &Camera, closing: usize) -> ViewRender {
    let depth = render_depth(shape, camera);
    let owner = OwnerMap::compute(shape, camera, &depth);
    let masks = blocks.ids().map(|b| (b, owner.mask(blocks, b))).collect();
    let closed = morphological_close(&encode_depth_8bit(&depth), closing);
    let closed_png = closed.to_png().expect("in-memory PNG encoding");
    ViewRender { camera: camera.clone(), depth, closed_png, masks }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockReport {
    pub id: BlockId,
    pub span: [u32; 2],
    pub kind: String,
    pub label: String,
    pub score: f64,
    pub scores_by_label: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub program: String,
    pub category: String,
    pub provider: String,
    pub labels: Vec<String>,
    pub blocks: Vec<BlockReport>,
    pub ties: Vec<BlockId>,
    pub views_used: Vec<usize>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl RunReport {
    /// Sorted-key JSON value.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report is plain data")
    }
}

#[derive(Default)]
struct Clock {
    spent: BTreeMap<String, f64>,
}

impl Clock {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.spent.entry(stage.to_string()).or_default() += t.elapsed().as_secs_f64();
        out
    }
}

struct ViewFailure {
    stage: &'static str,
    error: String,
}

/// Clips a provider box to the image; `None` when nothing is left.
fn clip_box(b: &PixelBox, w: u32, h: u32) -> Option<PixelBox> {
    let c = PixelBox {
        x0: b.x0.max(0.0),
        y0: b.y0.max(0.0),
        x1: b.x1.min(w as f64),
        y1: b.y1.min(h as f64),
    };
    (c.x0.is_finite() && c.y0.is_finite() && c.x1.is_finite() && c.y1.is_finite() && c.is_valid(w, h)).then_some(c)
}

/// Detections sent on to segmentation: the best per label, or all of them
/// when masks are merged.
fn to_segment(dets: &[Detection], merge: SegmentMerge) -> Vec<&Detection> {
    match merge {
        SegmentMerge::Union => dets.iter().collect(),
        SegmentMerge::Best => {
            let mut best: Vec<&Detection> = Vec::new();
            for d in dets {
                match best.iter_mut().find(|b| b.label == d.label) {
                    Some(b) if d.confidence > b.confidence => *b = d,
                    Some(_) => {}
                    None => best.push(d),
                }
            }
            best
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_view(
    v: usize,
    view: &ViewRender,
    provider: &dyn VisionProvider,
    labels: &LabelList,
    blocks: &[BlockId],
    opts: &PipelineOptions,
    clock: &mut Clock,
    warnings: &mut Vec<String>,
) -> Result<ConfidenceMatrix, ViewFailure> {
    let fail = |stage: &'static str| move |e: ProviderError| ViewFailure { stage, error: e.to_string() };
    let res = opts.render.resolution;
    provider.prepare_view(v, &view.masks);
    let req = SynthesisRequest::new(view.closed_png.clone(), &opts.category, res);
    let images = clock.time("synthesize", || provider.synthesize(v, &req)).map_err(fail("synthesize"))?;
    let mut per_image = Vec::with_capacity(images.len());
    for (i, image) in images.iter().enumerate() {
        let ctx = ImageContext { view: v, image: i };
        let dets = clock.time("detect", || provider.detect(ctx, image, labels)).map_err(fail("detect"))?;
        let dets: Vec<Detection> = dets.into_iter().filter(|d| labels.labels.contains(&d.label)).collect();
        let mut pairs: Vec<(Detection, SegmentMask)> = Vec::new();
        for d in to_segment(&dets, opts.vote.segment_merge) {
            let Some(bbox) = clip_box(&d.bbox, res, res) else {
                warnings.push(format!("view {v} image {i}: dropped `{}` detection with box outside the image", d.label));
                continue;
            };
            let seg = clock
                .time("segment", || provider.segment(ctx, image, &bbox, &d.label))
                .map_err(fail("segment"))?;
            pairs.push((Detection { bbox, ..d.clone() }, seg));
        }
        let c = clock
            .time("vote", || score_image(&pairs, &view.masks, &labels.labels, blocks, &opts.vote))
            .map_err(|e| ViewFailure { stage: "segment", error: e.to_string() })?;
        per_image.push(c);
    }
    if per_image.is_empty() {
        return Err(ViewFailure { stage: "synthesize", error: "provider returned no images".into() });
    }
    aggregate_view(&per_image, &opts.vote).map_err(|e| ViewFailure { stage: "vote", error: e.to_string() })
}

/// Labels every block of `source` and returns the commented source with a report.
pub fn comment_pipeline(
    source: &SourceFile,
    provider: &dyn VisionProvider,
    opts: &PipelineOptions,
) -> Result<(SourceFile, RunReport), PipelineError> {
    let start = Instant::now();
    let mut clock = Clock::default();
    let program = clock.time("parse", || Program::load(source.clone()))?;
    let shape = clock.time("geometry", || program.shape())?;
    let mut warnings = shape.warnings.clone();

    let labels = match &opts.labels {
        Some(l) => LabelList::new(&opts.category, l).map_err(|source| PipelineError::Provider { stage: "labels", source })?,
        None => clock
            .time("labels", || provider.suggest_labels(&opts.category))
            .map_err(|source| PipelineError::Provider { stage: "labels", source })?,
    };
    provider
        .prepare_program(&program.source, &program.blocks)
        .map_err(|source| PipelineError::Provider { stage: "prepare", source })?;

    let ring = opts.render.ring_spec().ring(&shape.root_bounds())?;
    let block_ids: Vec<BlockId> = program.blocks.ids().collect();
    let mut view_matrices = Vec::new();
    let mut views_used = Vec::new();
    let mut first_failure: Option<ViewFailure> = None;
    for (v, cam) in ring.cameras.iter().enumerate() {
        let view = clock.time("render", || render_view(&shape, &program.blocks, cam, opts.render.closing_iterations));
        match run_view(v, &view, provider, &labels, &block_ids, opts, &mut clock, &mut warnings) {
            Ok(m) => {
                view_matrices.push(m);
                views_used.push(v);
            }
            Err(f) => {
                warnings.push(format!("view {v} dropped at stage {}: {}", f.stage, f.error));
                first_failure.get_or_insert(f);
            }
        }
    }

    let views = ring.cameras.len();
    let needed = ((MIN_VIEW_SHARE * views as f64).ceil() as usize).max(1);
    if views_used.len() < needed {
        let f = first_failure.unwrap_or(ViewFailure { stage: "synthesize", error: "no view succeeded".into() });
        return Err(PipelineError::Failed { stage: f.stage, succeeded: views_used.len(), views, needed, message: f.error });
    }

    let shape_matrix = clock.time("vote", || aggregate_shape(&view_matrices, &opts.vote))?;
    let assigned = assign_labels(&shape_matrix);
    for b in &assigned.ties {
        warnings.push(format!("block {b}: tied top score, chose the lexicographically smallest label"));
    }
    let (commented, w) = insert_comments(&program.source, &program.blocks, &assigned.assignment);
    warnings.extend(w);

    let blocks = program
        .blocks
        .blocks
        .iter()
        .enumerate()
        .map(|(row, b)| BlockReport {
            id: b.id,
            span: [b.span.start_line, b.span.end_line],
            kind: format!("{:?}", b.kind).to_lowercase(),
            label: assigned.assignment.primary(b.id).unwrap_or_default().to_string(),
            score: assigned.assignment.scores.get(&b.id).copied().unwrap_or(0.0),
            scores_by_label: labels.labels.iter().cloned().zip(shape_matrix.row(row).iter().copied()).collect(),
        })
        .collect();

    let timings = opts.timings.then(|| {
        let mut t = clock.spent;
        t.insert("total".into(), start.elapsed().as_secs_f64());
        t
    });
    let report = RunReport {
        program: source.path.display().to_string(),
        category: opts.category.clone(),
        provider: provider.name().to_string(),
        labels: labels.labels.clone(),
        blocks,
        ties: assigned.ties,
        views_used,
        warnings,
        timings,
    };
    Ok((commented, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::read_ground_truth;
    use crate::vision::{OracleConfig, OracleProvider, SynonymMap};

    const PLANE: &str = "union() {\n  // body\n  translate([0, 0, 0]) cube([8, 1, 1], center = true);\n  // wings\n  translate([0.3, 0, 0]) cube([1.6, 9, 0.15], center = true);\n  // tail\n  translate([-3.5, 0, 1.1]) cube([1, 0.15, 1.2], center = true);\n  // engine\n  translate([1.6, 2.2, -0.35]) cube([1.2, 0.5, 0.5], center = true);\n}\n";

    fn small() -> PipelineOptions {
        let mut o = PipelineOptions::new("airplane");
        o.render.resolution = 96;
        o.timings = false;
        o
    }

    #[test]
    fn oracle_reproduces_ground_truth() {
        let src = SourceFile::inline(PLANE);
        let oracle = OracleProvider::new(OracleConfig::default()).unwrap();
        let (out, report) = comment_pipeline(&src, &oracle, &small()).unwrap();
        let p = Program::load(out).unwrap();
        let orig = Program::load(src).unwrap();
        assert_eq!(read_ground_truth(&p.source, &p.blocks).unwrap(), read_ground_truth(&orig.source, &orig.blocks).unwrap());
        assert_eq!(report.views_used.len(), 10);
        assert!(report.timings.is_none());
        assert_eq!(report.blocks.len(), 4);
    }

    /// Oracle that fails synthesis for chosen views.
    struct Flaky {
        inner: OracleProvider,
        bad: Vec<usize>,
    }

    impl VisionProvider for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        fn prepare_program(&self, s: &SourceFile, b: &BlockSet) -> Result<(), ProviderError> {
            self.inner.prepare_program(s, b)
        }
        fn prepare_view(&self, v: usize, m: &BlockMasks) {
            self.inner.prepare_view(v, m)
        }
        fn synthesize(&self, v: usize, r: &SynthesisRequest) -> Result<Vec<Vec<u8>>, ProviderError> {
            if self.bad.contains(&v) {
                Err(ProviderError::Unreachable("down".into()))
            } else {
                self.inner.synthesize(v, r)
            }
        }
        fn detect(&self, c: ImageContext, i: &[u8], l: &LabelList) -> Result<Vec<Detection>, ProviderError> {
            self.inner.detect(c, i, l)
        }
        fn segment(&self, c: ImageContext, i: &[u8], b: &PixelBox, l: &str) -> Result<SegmentMask, ProviderError> {
            self.inner.segment(c, i, b, l)
        }
        fn suggest_labels(&self, c: &str) -> Result<LabelList, ProviderError> {
            self.inner.suggest_labels(c)
        }
        fn map_synonyms(&self, p: &[String], g: &[String]) -> Result<SynonymMap, ProviderError> {
            self.inner.map_synonyms(p, g)
        }
    }

    #[test]
    fn tolerates_a_failed_view() {
        let p = Flaky { inner: OracleProvider::new(OracleConfig::default()).unwrap(), bad: vec![3] };
        let (_, report) = comment_pipeline(&SourceFile::inline(PLANE), &p, &small()).unwrap();
        assert_eq!(report.views_used.len(), 9);
        assert!(report.warnings.iter().any(|w| w.contains("view 3 dropped at stage synthesize")));
    }

    #[test]
    fn fails_below_view_floor() {
        let p = Flaky { inner: OracleProvider::new(OracleConfig::default()).unwrap(), bad: (0..10).collect() };
        match comment_pipeline(&SourceFile::inline(PLANE), &p, &small()) {
            Err(PipelineError::Failed { stage, succeeded, needed, .. }) => {
                assert_eq!((stage, succeeded, needed), ("synthesize", 0, 6));
            }
            other => panic!("{other:?}"),
        }
        let p = Flaky { inner: OracleProvider::new(OracleConfig::default()).unwrap(), bad: vec![0, 1, 2, 3] };
        assert!(comment_pipeline(&SourceFile::inline(PLANE), &p, &small()).is_ok());
        let p = Flaky { inner: OracleProvider::new(OracleConfig::default()).unwrap(), bad: vec![0, 1, 2, 3, 4] };
        assert!(comment_pipeline(&SourceFile::inline(PLANE), &p, &small()).is_err());
    }

    #[test]
    fn box_clipping() {
        assert_eq!(clip_box(&PixelBox::from([-3.0, 2.0, 200.0, 5.0]), 100, 100), Some(PixelBox::from([0.0, 2.0, 100.0, 5.0])));
        assert_eq!(clip_box(&PixelBox::from([120.0, 2.0, 200.0, 5.0]), 100, 100), None);
    }
}
