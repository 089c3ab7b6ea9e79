mod common;

use std::time::Duration;

use cadtalker::blocks::read_ground_truth;
use cadtalker::dataset::apply_synonyms;
use cadtalker::pipeline::{comment_pipeline, PipelineOptions};
use cadtalker::program::Program;
use cadtalker::scad::SourceFile;
use cadtalker::vision::wire;
use cadtalker::vision::{RemoteProvider, VisionProvider};

const PLANE: &str = "union() {
  // body
  cube([4, 1, 1], center = true);
  // wings
  translate([0, 0, 0.75]) cube([1, 4, 0.5], center = true);
}
";

#[test]
fn goldens_round_trip_byte_exact() {
    common::bless_if_requested();
    assert_eq!(common::golden_mismatches(), Vec::<String>::new());
}

#[test]
fn goldens_match_typed_bodies() {
    common::bless_if_requested();
    for (name, (req, resp)) in common::golden_bodies() {
        assert_eq!(common::read_golden(name, "request"), req, "{name} request");
        assert_eq!(common::read_golden(name, "response"), resp, "{name} response");
    }
}

#[test]
fn stub_drives_full_pipeline() {
    let (url, received) = common::spawn_stub();
    let provider = RemoteProvider::new(&url, Some(&url), Duration::from_secs(30)).unwrap();
    let mut opts = PipelineOptions::new("airplane");
    opts.render.resolution = common::SIDE;
    opts.timings = false;
    let (out, report) = comment_pipeline(&SourceFile::inline(PLANE), &provider, &opts).unwrap();
    assert_eq!(report.labels, vec!["body", "wings", "tail", "engine"]);
    assert_eq!(report.views_used, (0..10).collect::<Vec<_>>());

    let pred = Program::from_text(&out.text).unwrap();
    let labels = read_ground_truth(&pred.source, &pred.blocks).unwrap();
    for b in pred.blocks.ids() {
        assert_eq!(labels.primary(b), Some("body"));
    }

    let map = provider.map_synonyms(&["fuselage".into(), "propeller".into(), "wings".into()], &["body".into(), "wing".into()]).unwrap();
    assert_eq!(map["fuselage"].as_deref(), Some("body"));
    assert_eq!(map["propeller"], None);
    assert_eq!(apply_synonyms(&labels, &map), labels);

    let log = received.lock().unwrap();
    let count = |n: &str| log.iter().filter(|(e, _)| e == n).count();
    assert_eq!(count("suggest_labels"), 1);
    assert_eq!(count("synthesize"), 10);
    assert_eq!(count("detect"), 40);
    assert_eq!(count("segment"), 40);
    assert_eq!(count("map_synonyms"), 1);
    for (name, body) in log.iter() {
        assert!(common::round_trip(name, "request", body).as_deref() == Some(&body[..]), "{name} body not canonical");
    }
    let (_, first) = log.iter().find(|(e, _)| e == "synthesize").unwrap();
    let req: wire::SynthesizeRequest = wire::decode(first).unwrap();
    assert_eq!(req.prompt, "airplane, realistic");
    assert_eq!((req.n_images, req.steps, req.resolution, req.control_strength), (4, 20, 16, 1.0));
    assert_eq!(req.seeds, vec![1, 2, 3, 4]);
}

#[test]
fn stub_rejects_malformed_bodies() {
    let (url, _) = common::spawn_stub();
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let resp = agent.post(&format!("{url}/detect")).send(&b"{\"image\": 1}"[..]).unwrap();
    assert_eq!(resp.status().as_u16(), 422);
    let provider = RemoteProvider::new(&format!("{url}/nope"), None, Duration::from_secs(5)).unwrap();
    let err = provider.synthesize(0, &cadtalker::vision::SynthesisRequest::new(vec![1], "x", 16));
    assert!(matches!(err, Err(cadtalker::vision::ProviderError::Status { status: 404, .. })), "{err:?}");
}
