//! Deterministic test double that answers detection and segmentation from
//! ground-truth block masks instead of pixels.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::fallback::{builtin_labels, plural_synonyms};
use super::{
    BlockMasks, Detection, ImageContext, LabelList, PixelBox, ProviderError, SegmentMask, SynonymMap, SynthesisRequest,
    VisionProvider,
};
use crate::blocks::{read_ground_truth, BlockAssignment, BlockSet};
use crate::render::BinaryMask;
use crate::scad::SourceFile;

/// Pixel noise is confined to the clean box grown by this many pixels.
pub const NOISE_MARGIN: u32 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub seed: u64,
    pub confidence_range: [f64; 2],
    pub confidence_jitter: f64,
    pub pixel_noise_rate: f64,
    pub detection_dropout: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            seed: 0,
            confidence_range: [0.7, 0.95],
            confidence_jitter: 0.0,
            pixel_noise_rate: 0.0,
            detection_dropout: 0.0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), String> {
        let [lo, hi] = self.confidence_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(format!("confidence_range must satisfy 0 < lo <= hi <= 1, got [{lo}, {hi}]"));
        }
        if !(self.confidence_jitter >= 0.0 && self.confidence_jitter.is_finite()) {
            return Err("confidence_jitter must be a finite value >= 0".into());
        }
        for (name, v) in [("pixel_noise_rate", self.pixel_noise_rate), ("detection_dropout", self.detection_dropout)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        Ok(())
    }
}

fn fnv1a(text: &str) -> u64 {
    text.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent stream per (seed, view, image, label).
fn stream(seed: u64, view: usize, image: usize, label: &str) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for part in [view as u64, image as u64, fnv1a(label)] {
        h = splitmix(h ^ part);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// One detection and segment per label with a visible ground-truth block.
pub fn oracle_detect(
    view: usize,
    image: usize,
    gt: &BlockAssignment,
    masks: &BlockMasks,
    labels: &LabelList,
    cfg: &OracleConfig,
) -> Vec<(Detection, SegmentMask)> {
    let Some(any) = masks.values().next() else {
        return Vec::new();
    };
    let (w, h) = (any.width, any.height);
    let mut out = Vec::new();
    for label in &labels.labels {
        let mut clean = BinaryMask::new(w, h);
        for (id, m) in masks {
            if gt.labels_of(*id).iter().any(|l| l == label) {
                clean.or_assign(m);
            }
        }
        let Some(tight) = clean.bbox() else { continue };

        let mut rng = stream(cfg.seed, view, image, label);
        let dropped = rng.random::<f64>() < cfg.detection_dropout;
        let [lo, hi] = cfg.confidence_range;
        let mut confidence = rng.random_range(lo..=hi);
        if cfg.confidence_jitter > 0.0 {
            confidence += Normal::new(0.0, cfg.confidence_jitter).expect("finite sigma").sample(&mut rng);
        }
        if dropped {
            continue;
        }

        let mut noisy = clean.clone();
        if cfg.pixel_noise_rate > 0.0 {
            let x0 = tight[0].saturating_sub(NOISE_MARGIN);
            let y0 = tight[1].saturating_sub(NOISE_MARGIN);
            let x1 = (tight[2] + NOISE_MARGIN).min(w - 1);
            let y1 = (tight[3] + NOISE_MARGIN).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    if rng.random::<f64>() < cfg.pixel_noise_rate {
                        let i = (y * w + x) as usize;
                        noisy.set(i, !noisy.get(i));
                    }
                }
            }
        }
        let bbox = PixelBox::from_pixels(tight);
        out.push((
            Detection {
                label: label.clone(),
                bbox,
                confidence: confidence.clamp(0.0, 1.0),
            },
            SegmentMask {
                mask: noisy,
                source_box: bbox,
                label: label.clone(),
            },
        ));
    }
    out
}

#[derive(Default)]
struct OracleState {
    gt: BlockAssignment,
    views: HashMap<usize, BlockMasks>,
    answers: HashMap<ImageContext, Vec<(Detection, SegmentMask)>>,
}

/// Provider reading ground truth from the program's own comments.
pub struct OracleProvider {
    cfg: OracleConfig,
    state: Mutex<OracleState>,
}

impl OracleProvider {
    pub fn new(cfg: OracleConfig) -> Result<Self, ProviderError> {
        cfg.validate().map_err(ProviderError::Misconfigured)?;
        Ok(OracleProvider {
            cfg,
            state: Mutex::new(OracleState::default()),
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    fn answers(&self, ctx: ImageContext, labels: &LabelList) -> Vec<(Detection, SegmentMask)> {
        let mut st = self.state.lock().expect("oracle state poisoned");
        if let Some(a) = st.answers.get(&ctx) {
            return a.clone();
        }
        let a = match st.views.get(&ctx.view) {
            Some(masks) => oracle_detect(ctx.view, ctx.image, &st.gt, masks, labels, &self.cfg),
            None => Vec::new(),
        };
        st.answers.insert(ctx, a.clone());
        a
    }
}

impl VisionProvider for OracleProvider {
    fn name(&self) -> &str {
        "oracle"
    }

    fn prepare_program(&self, source: &SourceFile, blocks: &BlockSet) -> Result<(), ProviderError> {
        let gt = read_ground_truth(source, blocks).map_err(|e| ProviderError::Protocol(e.to_string()))?;
        let mut st = self.state.lock().expect("oracle state poisoned");
        *st = OracleState {
            gt,
            ..OracleState::default()
        };
        Ok(())
    }

    fn prepare_view(&self, view: usize, masks: &BlockMasks) {
        let mut st = self.state.lock().expect("oracle state poisoned");
        st.views.insert(view, masks.clone());
        st.answers.retain(|ctx, _| ctx.view != view);
    }

    /// Pass-through: the depth image stands in for every synthesized image.
    fn synthesize(&self, _view: usize, req: &SynthesisRequest) -> Result<Vec<Vec<u8>>, ProviderError> {
        Ok(vec![req.depth_image.clone(); req.n_images])
    }

    fn detect(&self, ctx: ImageContext, _image: &[u8], labels: &LabelList) -> Result<Vec<Detection>, ProviderError> {
        Ok(self.answers(ctx, labels).into_iter().map(|(d, _)| d).collect())
    }

    fn segment(&self, ctx: ImageContext, _image: &[u8], bbox: &PixelBox, label: &str) -> Result<SegmentMask, ProviderError> {
        let st = self.state.lock().expect("oracle state poisoned");
        let found = st
            .answers
            .get(&ctx)
            .and_then(|a| a.iter().find(|(d, _)| d.label == label))
            .map(|(_, s)| s.clone());
        match found {
            Some(s) => Ok(s),
            None => {
                let (w, h) = st
                    .views
                    .get(&ctx.view)
                    .and_then(|m| m.values().next())
                    .map(|m| (m.width, m.height))
                    .unwrap_or((0, 0));
                Ok(SegmentMask {
                    mask: BinaryMask::new(w, h),
                    source_box: *bbox,
                    label: label.to_string(),
                })
            }
        }
    }

    fn suggest_labels(&self, category: &str) -> Result<LabelList, ProviderError> {
        builtin_labels(category)
    }

    fn map_synonyms(&self, predicted: &[String], ground_truth: &[String]) -> Result<SynonymMap, ProviderError> {
        Ok(plural_synonyms(predicted, ground_truth))
    }
}
