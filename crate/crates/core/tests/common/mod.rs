//! Wire goldens and a stub provider server that replays them.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::http::StatusCode;
use axum::routing::post;
use axum::Router;
use serde::de::DeserializeOwned;
use serde::Serialize;

use cadtalker::render::{mask_to_png, BinaryMask, Gray8};
use cadtalker::vision::wire::{self, b64};
use cadtalker::vision::{Detection, PixelBox};

pub const ENDPOINTS: [&str; 5] = ["synthesize", "detect", "segment", "suggest_labels", "map_synonyms"];
pub const SIDE: u32 = 16;

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn gradient_png(shift: u32) -> Vec<u8> {
    let mut g = Gray8::new(SIDE, SIDE);
    for (i, v) in g.data.iter_mut().enumerate() {
        *v = ((i as u32 * 7 + shift * 31) % 223 + 32) as u8;
    }
    g.to_png().unwrap()
}

fn full_mask_png() -> Vec<u8> {
    mask_to_png(&BinaryMask::from_fn(SIDE, SIDE, |_| true)).unwrap()
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn pair<A: Serialize, B: Serialize>(a: &A, b: &B) -> (Vec<u8>, Vec<u8>) {
    (wire::encode(a), wire::encode(b))
}

/// Canonical request and response bodies per endpoint, built from typed values.
pub fn golden_bodies() -> BTreeMap<&'static str, (Vec<u8>, Vec<u8>)> {
    let full = PixelBox { x0: 0.0, y0: 0.0, x1: SIDE as f64, y1: SIDE as f64 };
    let mut m = BTreeMap::new();
    m.insert(
        "synthesize",
        pair(
            &wire::SynthesizeRequest {
                depth_png: b64(&gradient_png(0)),
                prompt: "airplane, realistic".into(),
                n_images: 4,
                seeds: vec![1, 2, 3, 4],
                control_strength: 1.0,
                steps: 20,
                resolution: SIDE,
            },
            &wire::SynthesizeResponse { images: (1..=4).map(|k| b64(&gradient_png(k))).collect() },
        ),
    );
    m.insert(
        "detect",
        pair(
            &wire::DetectRequest { image_png: b64(&gradient_png(1)), labels: strings(&["body", "wings", "tail", "engine"]) },
            &wire::DetectResponse { detections: vec![Detection { label: "body".into(), bbox: full, confidence: 0.9 }] },
        ),
    );
    m.insert(
        "segment",
        pair(
            &wire::SegmentRequest { image_png: b64(&gradient_png(1)), bbox: full, label: "body".into() },
            &wire::SegmentResponse { mask_png: b64(&full_mask_png()) },
        ),
    );
    m.insert(
        "suggest_labels",
        pair(
            &wire::SuggestLabelsRequest { category: "airplane".into() },
            &wire::SuggestLabelsResponse { labels: strings(&["body", "wings", "tail", "engine"]) },
        ),
    );
    m.insert(
        "map_synonyms",
        pair(
            &wire::MapSynonymsRequest {
                predicted: strings(&["fuselage", "propeller", "wings"]),
                ground_truth: strings(&["body", "wing"]),
            },
            &wire::MapSynonymsResponse {
                mapping: [("fuselage", Some("body")), ("propeller", None), ("wings", Some("wing"))]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v.map(String::from)))
                    .collect(),
            },
        ),
    );
    m
}

/// Writes the goldens when `CADTALKER_BLESS` is set.
pub fn bless_if_requested() {
    if std::env::var_os("CADTALKER_BLESS").is_none() {
        return;
    }
    let dir = golden_dir();
    std::fs::create_dir_all(&dir).unwrap();
    for (name, (req, resp)) in golden_bodies() {
        std::fs::write(dir.join(format!("{name}.request.json")), req).unwrap();
        std::fs::write(dir.join(format!("{name}.response.json")), resp).unwrap();
    }
}

pub fn read_golden(name: &str, kind: &str) -> Vec<u8> {
    let p = golden_dir().join(format!("{name}.{kind}.json"));
    std::fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn reencode<T: Serialize + DeserializeOwned>(bytes: &[u8]) -> Option<Vec<u8>> {
    wire::decode::<T>(bytes).ok().map(|v| wire::encode(&v))
}

/// Decodes into the typed body and re-encodes; `None` if decoding fails.
pub fn round_trip(name: &str, kind: &str, bytes: &[u8]) -> Option<Vec<u8>> {
    match (name, kind) {
        ("synthesize", "request") => reencode::<wire::SynthesizeRequest>(bytes),
        ("synthesize", "response") => reencode::<wire::SynthesizeResponse>(bytes),
        ("detect", "request") => reencode::<wire::DetectRequest>(bytes),
        ("detect", "response") => reencode::<wire::DetectResponse>(bytes),
        ("segment", "request") => reencode::<wire::SegmentRequest>(bytes),
        ("segment", "response") => reencode::<wire::SegmentResponse>(bytes),
        ("suggest_labels", "request") => reencode::<wire::SuggestLabelsRequest>(bytes),
        ("suggest_labels", "response") => reencode::<wire::SuggestLabelsResponse>(bytes),
        ("map_synonyms", "request") => reencode::<wire::MapSynonymsRequest>(bytes),
        ("map_synonyms", "response") => reencode::<wire::MapSynonymsResponse>(bytes),
        _ => None,
    }
}

/// Every golden that does not survive decode then encode byte for byte.
pub fn golden_mismatches() -> Vec<String> {
    let mut bad = Vec::new();
    for name in ENDPOINTS {
        for kind in ["request", "response"] {
            let bytes = read_golden(name, kind);
            if round_trip(name, kind, &bytes).as_deref() != Some(&bytes[..]) {
                bad.push(format!("{name}.{kind}"));
            }
        }
    }
    bad
}

/// Request bodies received by the stub, by endpoint.
pub type Received = Arc<Mutex<Vec<(String, Vec<u8>)>>>;

/// Serves the golden responses on 127.0.0.1. Requests that do not decode as
/// the endpoint's body get 422. Returns the base URL and the request log.
pub fn spawn_stub() -> (String, Received) {
    let received: Received = Arc::default();
    let mut app = Router::new();
    for name in ENDPOINTS {
        let resp = read_golden(name, "response");
        let log = received.clone();
        app = app.route(
            &format!("/{name}"),
            post(move |body: Bytes| {
                let resp = resp.clone();
                let log = log.clone();
                async move {
                    log.lock().unwrap().push((name.to_string(), body.to_vec()));
                    if round_trip(name, "request", &body).is_none() {
                        return (StatusCode::UNPROCESSABLE_ENTITY, Vec::new());
                    }
                    (StatusCode::OK, resp)
                }
            }),
        );
    }
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let l = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(l, app).await.unwrap();
        });
    });
    (format!("http://{addr}"), received)
}
