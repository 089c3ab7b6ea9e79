//! HTTP JSON client for the five provider endpoints.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::fallback::{builtin_labels, plural_synonyms};
use super::wire::{self, b64, unb64};
use super::{
    clamp_confidence, Detection, ImageContext, LabelList, PixelBox, ProviderError, SegmentMask, SynonymMap,
    SynthesisRequest, VisionProvider,
};
use crate::render::{mask_from_png, Gray8};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
pub const MAX_IN_FLIGHT: usize = 4;
const BODY_LIMIT: u64 = 256 * 1024 * 1024;

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.free.lock().expect("gate poisoned");
        while *n == 0 {
            n = self.cv.wait(n).expect("gate poisoned");
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate poisoned") += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteProvider {
    url: String,
    llm_url: Option<String>,
    agent: ureq::Agent,
    gate: Gate,
}

fn trim_base(url: &str) -> String {
    url.trim_end_matches('/').to_string()
}

impl RemoteProvider {
    pub fn new(url: &str, llm_url: Option<&str>, timeout: Duration) -> Result<Self, ProviderError> {
        if url.trim().is_empty() {
            return Err(ProviderError::Misconfigured("remote provider needs a url".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteProvider {
            url: trim_base(url),
            llm_url: llm_url.filter(|u| !u.trim().is_empty()).map(trim_base),
            agent,
            gate: Gate {
                free: Mutex::new(MAX_IN_FLIGHT),
                cv: Condvar::new(),
            },
        })
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(&self, base: &str, path: &str, body: &Req) -> Result<Resp, ProviderError> {
        let _permit = self.gate.acquire();
        let url = format!("{base}{path}");
        let mut resp = self
            .agent
            .post(&url)
            .header("content-type", "application/json")
            .send(&wire::encode(body)[..])
            .map_err(|e| ProviderError::Unreachable(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        let bytes = resp
            .body_mut()
            .with_config()
            .limit(BODY_LIMIT)
            .read_to_vec()
            .map_err(|e| ProviderError::Unreachable(format!("{url}: {e}")))?;
        if !(200..300).contains(&status) {
            return Err(ProviderError::Status {
                status,
                body: String::from_utf8_lossy(&bytes).into_owned(),
            });
        }
        wire::decode(&bytes)
    }
}

impl VisionProvider for RemoteProvider {
    fn name(&self) -> &str {
        "remote"
    }

    fn synthesize(&self, _view: usize, req: &SynthesisRequest) -> Result<Vec<Vec<u8>>, ProviderError> {
        let body = wire::SynthesizeRequest {
            depth_png: b64(&req.depth_image),
            prompt: req.prompt.clone(),
            n_images: req.n_images,
            seeds: req.seeds.clone(),
            control_strength: req.control_strength,
            steps: req.steps,
            resolution: req.resolution,
        };
        let resp: wire::SynthesizeResponse = self.post(&self.url, "/synthesize", &body)?;
        if resp.images.len() != req.n_images {
            return Err(ProviderError::Protocol(format!(
                "asked for {} images, got {}",
                req.n_images,
                resp.images.len()
            )));
        }
        resp.images
            .iter()
            .map(|s| {
                let png = unb64(s)?;
                Gray8::from_png(&png).map_err(|e| ProviderError::BadImage(e.to_string()))?;
                Ok(png)
            })
            .collect()
    }

    fn detect(&self, _ctx: ImageContext, image: &[u8], labels: &LabelList) -> Result<Vec<Detection>, ProviderError> {
        let body = wire::DetectRequest {
            image_png: b64(image),
            labels: labels.labels.clone(),
        };
        let resp: wire::DetectResponse = self.post(&self.url, "/detect", &body)?;
        Ok(resp
            .detections
            .into_iter()
            .map(|d| Detection {
                confidence: clamp_confidence(d.confidence, "detect"),
                ..d
            })
            .collect())
    }

    fn segment(&self, _ctx: ImageContext, image: &[u8], bbox: &PixelBox, label: &str) -> Result<SegmentMask, ProviderError> {
        let body = wire::SegmentRequest {
            image_png: b64(image),
            bbox: *bbox,
            label: label.to_string(),
        };
        let resp: wire::SegmentResponse = self.post(&self.url, "/segment", &body)?;
        let mask = mask_from_png(&unb64(&resp.mask_png)?).map_err(|e| ProviderError::BadImage(e.to_string()))?;
        Ok(SegmentMask {
            mask,
            source_box: *bbox,
            label: label.to_string(),
        })
    }

    fn suggest_labels(&self, category: &str) -> Result<LabelList, ProviderError> {
        match &self.llm_url {
            Some(base) => {
                let body = wire::SuggestLabelsRequest { category: category.to_string() };
                let resp: wire::SuggestLabelsResponse = self.post(base, "/suggest_labels", &body)?;
                LabelList::new(category, resp.labels)
            }
            None => builtin_labels(category),
        }
    }

    fn map_synonyms(&self, predicted: &[String], ground_truth: &[String]) -> Result<SynonymMap, ProviderError> {
        match &self.llm_url {
            Some(base) => {
                let body = wire::MapSynonymsRequest {
                    predicted: predicted.to_vec(),
                    ground_truth: ground_truth.to_vec(),
                };
                let resp: wire::MapSynonymsResponse = self.post(base, "/map_synonyms", &body)?;
                Ok(resp.mapping)
            }
            None => Ok(plural_synonyms(predicted, ground_truth)),
        }
    }
}
