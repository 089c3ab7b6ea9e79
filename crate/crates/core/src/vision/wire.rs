//! JSON bodies of the provider HTTP protocol. Binary payloads are base64 PNG.
//!
//! Canonical encoding is compact JSON with keys sorted, so a decoded body
//! re-encodes to the same bytes.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Detection, PixelBox, ProviderError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeRequest {
    pub depth_png: String,
    pub prompt: String,
    pub n_images: usize,
    pub seeds: Vec<i64>,
    pub control_strength: f64,
    pub steps: u32,
    pub resolution: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeResponse {
    pub images: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectRequest {
    pub image_png: String,
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectResponse {
    pub detections: Vec<Detection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRequest {
    pub image_png: String,
    #[serde(rename = "box")]
    pub bbox: PixelBox,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentResponse {
    pub mask_png: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggestLabelsRequest {
    pub category: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggestLabelsResponse {
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSynonymsRequest {
    pub predicted: Vec<String>,
    pub ground_truth: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSynonymsResponse {
    pub mapping: BTreeMap<String, Option<String>>,
}

/// Compact JSON with sorted object keys.
pub fn encode<T: Serialize>(body: &T) -> Vec<u8> {
    let value = serde_json::to_value(body).expect("wire bodies are plain data");
    serde_json::to_vec(&value).expect("values always serialize")
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ProviderError> {
    serde_json::from_slice(bytes).map_err(|e| ProviderError::Protocol(e.to_string()))
}

pub fn b64(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

pub fn unb64(text: &str) -> Result<Vec<u8>, ProviderError> {
    STANDARD.decode(text).map_err(|e| ProviderError::BadImage(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_sorted_and_compact() {
        let req = SegmentRequest {
            image_png: "AA==".into(),
            bbox: PixelBox::from([1.0, 2.0, 3.5, 4.0]),
            label: "wing".into(),
        };
        assert_eq!(
            String::from_utf8(encode(&req)).unwrap(),
            r#"{"box":[1.0,2.0,3.5,4.0],"image_png":"AA==","label":"wing"}"#
        );
    }

    #[test]
    fn null_mapping_round_trips() {
        let text = br#"{"mapping":{"fuselage":"body","propeller":null}}"#;
        let m: MapSynonymsResponse = decode(text).unwrap();
        assert_eq!(m.mapping["propeller"], None);
        assert_eq!(encode(&m), text.to_vec());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(decode::<SuggestLabelsRequest>(br#"{"category":"x","extra":1}"#).is_err());
    }
}
