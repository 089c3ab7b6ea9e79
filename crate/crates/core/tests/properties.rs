//! Property tests against independent oracles.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Point3, UnitQuaternion, Vector3};
use proptest::prelude::*;

use cadtalker::blocks::{analyze, insert_comments, read_ground_truth, BlockAssignment, BlockId};
use cadtalker::dataset::{
    apply_synonyms, block_accuracy, semantic_iou, transfer_labels, translate_primitives, LabeledPointCloud,
    PrimitiveRecord, RecordKind, Rotation,
};
use cadtalker::program::Program;
use cadtalker::render::{morphological_close, BinaryMask, Gray8};
use cadtalker::scad::{expand, parse_str, pretty_print, Env};
use cadtalker::vision::{wire, BlockMasks, Detection, PixelBox, SegmentMask};
use cadtalker::voting::{aggregate_shape, aggregate_view, assign_labels, score_image, ConfidenceMatrix, VoteConfig};

// ---------- programs ----------

#[derive(Clone, Debug)]
enum Stmt {
    Cube(f64),
    Sphere(f64),
    Cylinder(f64, f64),
    Translate([f64; 3], Box<Stmt>),
    Rotate([f64; 3], Box<Stmt>),
    Group(&'static str, Vec<Stmt>),
    Loop(u32, Box<Stmt>),
}

fn num() -> impl Strategy<Value = f64> {
    (1i32..40).prop_map(|n| n as f64 / 4.0)
}

fn stmt() -> impl Strategy<Value = Stmt> {
    let leaf = prop_oneof![
        num().prop_map(Stmt::Cube),
        num().prop_map(Stmt::Sphere),
        (num(), num()).prop_map(|(h, r)| Stmt::Cylinder(h, r)),
    ];
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            ([num(), num(), num()], inner.clone()).prop_map(|(v, s)| Stmt::Translate(v, Box::new(s))),
            ([0i32..4, 0i32..4, 0i32..4], inner.clone())
                .prop_map(|(a, s)| Stmt::Rotate(a.map(|k| k as f64 * 30.0), Box::new(s))),
            (prop::sample::select(vec!["union", "difference", "intersection", "hull"]), prop::collection::vec(inner.clone(), 1..4))
                .prop_map(|(op, c)| Stmt::Group(op, c)),
            (1u32..4, inner).prop_map(|(n, s)| Stmt::Loop(n, Box::new(s))),
        ]
    })
}

fn write_stmt(s: &Stmt, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    let v = |a: &[f64; 3]| format!("[{}, {}, {}]", a[0], a[1], a[2]);
    match s {
        Stmt::Cube(a) => out.push_str(&format!("{pad}cube({a});\n")),
        Stmt::Sphere(r) => out.push_str(&format!("{pad}sphere(r = {r});\n")),
        Stmt::Cylinder(h, r) => out.push_str(&format!("{pad}cylinder(h = {h}, r = {r});\n")),
        Stmt::Translate(a, c) => {
            out.push_str(&format!("{pad}translate({})\n", v(a)));
            write_stmt(c, indent + 1, out);
        }
        Stmt::Rotate(a, c) => {
            out.push_str(&format!("{pad}rotate({})\n", v(a)));
            write_stmt(c, indent + 1, out);
        }
        Stmt::Group(op, cs) => {
            out.push_str(&format!("{pad}{op}() {{\n"));
            for c in cs {
                write_stmt(c, indent + 1, out);
            }
            out.push_str(&format!("{pad}}}\n"));
        }
        Stmt::Loop(n, c) => {
            out.push_str(&format!("{pad}for (i = [0:{}]) translate([i * 2, 0, 0]) {{\n", n - 1));
            write_stmt(c, indent + 1, out);
            out.push_str(&format!("{pad}}}\n"));
        }
    }
}

fn program_text() -> impl Strategy<Value = String> {
    prop::collection::vec(stmt(), 1..4).prop_map(|ss| {
        let mut out = String::new();
        for s in &ss {
            write_stmt(s, 0, &mut out);
        }
        out
    })
}

fn label() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["body", "wings", "tail", "engine", "leg", "seat", "back"]).prop_map(String::from)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pretty_print_round_trips(text in program_text()) {
        let t = parse_str(&text).unwrap();
        let again = parse_str(&pretty_print(&t).text).unwrap();
        prop_assert!(t.structurally_eq(&again));
    }

    #[test]
    fn expand_is_idempotent(text in program_text()) {
        let e = expand(&parse_str(&text).unwrap(), &Env::new()).unwrap();
        let ee = expand(&e, &Env::new()).unwrap();
        prop_assert!(e.structurally_eq(&ee));
    }

    #[test]
    fn comments_round_trip(text in program_text(), labels in prop::collection::vec(prop::option::of(label()), 64)) {
        let p = Program::from_text(&text).unwrap();
        let mut a = BlockAssignment::default();
        // Blocks sharing a first line share a comment, so only one of them is assigned.
        let mut seen = std::collections::BTreeSet::new();
        for (b, l) in p.blocks.blocks.iter().zip(&labels) {
            if let Some(l) = l {
                if seen.insert(b.span.start_line) {
                    a.set(b.id, vec![l.clone()]);
                }
            }
        }
        let (commented, _) = insert_comments(&p.source, &p.blocks, &a);
        let q = Program::from_text(&commented.text).unwrap();
        prop_assert!(q.blocks.same_structure(&p.blocks));
        prop_assert!(q.tree.geometry_eq(&p.tree));
        let back = read_ground_truth(&q.source, &q.blocks).unwrap();
        // Loop copies share their source line, hence their comment.
        let by_line: BTreeMap<u32, &Vec<String>> =
            a.labels.iter().map(|(b, ls)| (p.blocks.get(*b).span.start_line, ls)).collect();
        for (b, qb) in p.blocks.blocks.iter().zip(&q.blocks.blocks) {
            match by_line.get(&b.span.start_line) {
                Some(ls) => prop_assert_eq!(back.labels_of(qb.id), ls.as_slice()),
                None => prop_assert!(back.labels_of(qb.id).is_empty()),
            }
        }
    }

    #[test]
    fn parse_is_deterministic(text in program_text()) {
        let a = analyze(&expand(&parse_str(&text).unwrap(), &Env::new()).unwrap()).unwrap();
        let b = analyze(&expand(&parse_str(&text).unwrap(), &Env::new()).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}

// ---------- metrics ----------

/// Set enumeration over explicit index arrays, sharing no code with the crate.
fn brute_force(pred: &[usize], gt: &[Vec<usize>], n_labels: usize) -> (f64, f64) {
    let n = gt.len();
    let hits = (0..n).filter(|&b| gt[b].contains(&pred[b])).count();
    let mut ious = Vec::new();
    for l in 0..n_labels {
        let in_gt: Vec<bool> = (0..n).map(|b| gt[b].contains(&l)).collect();
        if !in_gt.iter().any(|&x| x) {
            continue;
        }
        let in_pred: Vec<bool> = (0..n).map(|b| pred[b] == l).collect();
        let inter = (0..n).filter(|&b| in_gt[b] && in_pred[b]).count();
        let union = (0..n).filter(|&b| in_gt[b] || in_pred[b]).count();
        ious.push(inter as f64 / union as f64);
    }
    (hits as f64 / n as f64, ious.iter().sum::<f64>() / ious.len() as f64)
}

fn assignment_case() -> impl Strategy<Value = (usize, Vec<usize>, Vec<Vec<usize>>)> {
    (1usize..=8, 1usize..=64).prop_flat_map(|(k, n)| {
        (
            Just(k),
            prop::collection::vec(0..k, n),
            prop::collection::vec(prop::collection::btree_set(0..k, 1..=k.min(3)).prop_map(|s| s.into_iter().collect()), n),
        )
    })
}

fn to_assignment(rows: impl IntoIterator<Item = Vec<usize>>) -> BlockAssignment {
    let mut a = BlockAssignment::default();
    for (i, r) in rows.into_iter().enumerate() {
        a.set(BlockId(i as u32), r.into_iter().map(|l| format!("l{l}")).collect());
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metrics_match_brute_force((k, pred, gt) in assignment_case()) {
        let (b, s) = brute_force(&pred, &gt, k);
        let p = to_assignment(pred.iter().map(|&l| vec![l]));
        let g = to_assignment(gt.clone());
        prop_assert_eq!(block_accuracy(&p, &g).unwrap().0, b);
        let (s_iou, _) = semantic_iou(&p, &g).unwrap();
        prop_assert!((s_iou - s).abs() <= 1e-12, "{} vs {}", s_iou, s);
    }
}

proptest! {
    #[test]
    fn synonyms_idempotent(
        labels in prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "x", "y"]), 1..20),
        targets in prop::collection::vec(prop::option::of(prop::sample::select(vec!["x", "y", "z"])), 3),
    ) {
        // Domain {a, b, c}, range within {x, y, z}: disjoint.
        let map: BTreeMap<String, Option<String>> = ["a", "b", "c"]
            .iter()
            .zip(&targets)
            .map(|(k, v)| (k.to_string(), v.map(String::from)))
            .collect();
        let mut p = BlockAssignment::default();
        for (i, l) in labels.iter().enumerate() {
            p.set(BlockId(i as u32), vec![l.to_string()]);
        }
        let once = apply_synonyms(&p, &map);
        prop_assert_eq!(apply_synonyms(&once, &map), once);
    }
}

// ---------- voting ----------

fn mask_strategy(w: u32, h: u32) -> impl Strategy<Value = BinaryMask> {
    prop::collection::vec(any::<bool>(), (w * h) as usize).prop_map(move |bits| BinaryMask::from_fn(w, h, |i| bits[i]))
}

fn brute_iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let (mut i, mut u) = (0usize, 0usize);
    for k in 0..a.len() {
        i += (a.get(k) && b.get(k)) as usize;
        u += (a.get(k) || b.get(k)) as usize;
    }
    if u == 0 { 0.0 } else { i as f64 / u as f64 }
}

const LABELS: [&str; 3] = ["body", "tail", "wings"];

fn image_case() -> impl Strategy<Value = (BlockMasks, Vec<(Detection, SegmentMask)>)> {
    let blocks = prop::collection::vec(mask_strategy(8, 8), 3);
    let dets = prop::collection::vec((0usize..3, 0.0f64..1.0, mask_strategy(8, 8)), 0..5);
    (blocks, dets).prop_map(|(bm, ds)| {
        let masks: BlockMasks = bm.into_iter().enumerate().map(|(i, m)| (BlockId(i as u32), m)).collect();
        let dets = ds
            .into_iter()
            .map(|(l, c, m)| {
                let label = LABELS[l].to_string();
                let bbox = PixelBox { x0: 0.0, y0: 0.0, x1: 8.0, y1: 8.0 };
                (Detection { label: label.clone(), bbox, confidence: c }, SegmentMask { mask: m, source_box: bbox, label })
            })
            .collect();
        (masks, dets)
    })
}

fn labels() -> Vec<String> {
    LABELS.iter().map(|s| s.to_string()).collect()
}

fn blocks() -> Vec<BlockId> {
    (0..3).map(BlockId).collect()
}

fn zero_cfg() -> VoteConfig {
    VoteConfig::default().unthresholded()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn iou_matches_pixel_sets(a in mask_strategy(9, 7), b in mask_strategy(9, 7)) {
        prop_assert_eq!(a.iou(&b), brute_iou(&a, &b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scorer_is_confidence_times_iou((masks, dets) in image_case()) {
        let c = score_image(&dets, &masks, &labels(), &blocks(), &zero_cfg()).unwrap();
        for (col, l) in LABELS.iter().enumerate() {
            let best = dets.iter().filter(|(d, _)| d.label == *l).fold(None::<&(Detection, SegmentMask)>, |acc, d| match acc {
                Some(a) if a.0.confidence > d.0.confidence
                    || (a.0.confidence == d.0.confidence && a.1.mask.count() >= d.1.mask.count()) => Some(a),
                _ => Some(d),
            });
            for row in 0..3 {
                let want = best.map_or(0.0, |(d, s)| d.confidence * brute_iou(&masks[&BlockId(row as u32)], &s.mask));
                prop_assert_eq!(c.get(row, col), want);
            }
        }
    }

    #[test]
    fn scale_equivariance((masks, dets) in image_case(), alpha in 0.01f64..4.0) {
        let cfg = zero_cfg();
        let c = score_image(&dets, &masks, &labels(), &blocks(), &cfg).unwrap();
        let scaled: Vec<_> = dets.iter().map(|(d, s)| {
            (Detection { confidence: d.confidence * alpha, ..d.clone() }, s.clone())
        }).collect();
        let cs = score_image(&scaled, &masks, &labels(), &blocks(), &cfg).unwrap();
        for (a, b) in c.values.iter().zip(&cs.values) {
            prop_assert!((a * alpha - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        let (la, lb) = (assign_labels(&c).assignment, assign_labels(&cs).assignment);
        for b in blocks() {
            // Argmax sets are compared on rows without near-ties.
            let row = c.row(b.index());
            let mut sorted: Vec<f64> = row.to_vec();
            sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
            if sorted[0] - sorted[1] > 1e-9 {
                prop_assert_eq!(la.labels_of(b), lb.labels_of(b));
            }
        }
    }

    #[test]
    fn additivity_without_thresholds(values in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 6), 40)) {
        let cfg = zero_cfg();
        let mats: Vec<ConfidenceMatrix> = values.iter().map(|v| {
            let mut m = ConfidenceMatrix::zeros(vec![BlockId(0), BlockId(1)], labels());
            m.values = v.clone();
            m
        }).collect();
        let views: Vec<_> = mats.chunks(4).map(|c| aggregate_view(c, &cfg).unwrap()).collect();
        let shape = aggregate_shape(&views, &cfg).unwrap();
        for i in 0..6 {
            // Same association order as the reduction: images within a view, then views.
            let direct: f64 = mats.chunks(4).map(|c| c.iter().map(|m| m.values[i]).fold(0.0, |a, v| a + v)).fold(0.0, |a, v| a + v);
            prop_assert_eq!(shape.values[i], direct);
        }
    }

    #[test]
    fn raising_thresholds_never_adds_entries(
        values in prop::collection::vec(prop::collection::vec(0.0f64..0.05, 6), 8),
        t in [0.0f64..0.05, 0.0f64..0.05, 0.0f64..0.05],
        bump in 0usize..3,
        delta in 0.0f64..0.05,
    ) {
        let mats: Vec<ConfidenceMatrix> = values.iter().map(|v| {
            let mut m = ConfidenceMatrix::zeros(vec![BlockId(0), BlockId(1)], labels());
            m.values = v.clone();
            m
        }).collect();
        let run = |t: [f64; 3]| {
            let cfg = VoteConfig { t_image: t[0], t_view: t[1], t_shape: t[2], ..VoteConfig::default() };
            let thresholded: Vec<_> = mats.iter().map(|m| { let mut m = m.clone(); m.threshold(cfg.t_image); m }).collect();
            let views: Vec<_> = thresholded.chunks(4).map(|c| aggregate_view(c, &cfg).unwrap()).collect();
            aggregate_shape(&views, &cfg).unwrap()
        };
        let low = run(t);
        let mut t2 = t;
        t2[bump] += delta;
        let high = run(t2);
        for (a, b) in low.values.iter().zip(&high.values) {
            prop_assert!(!(*a == 0.0 && *b != 0.0));
        }
    }
}

// ---------- images ----------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn closing_never_loses_foreground(bits in prop::collection::vec(prop::sample::select(vec![0u8, 0, 0, 40, 200]), 144), k in 0usize..4) {
        let mut img = Gray8::new(12, 12);
        img.data.copy_from_slice(&bits);
        prop_assert!(morphological_close(&img, k).foreground_count() >= img.foreground_count());
    }
}

// ---------- wire ----------

proptest! {
    #[test]
    fn wire_round_trips(
        labels in prop::collection::vec("[a-z]{1,8}", 0..5),
        conf in prop::collection::vec(0.0f64..1.0, 0..5),
        b in [0.0f64..100.0, 0.0f64..100.0],
    ) {
        let dets: Vec<Detection> = labels.iter().zip(&conf).map(|(l, c)| Detection {
            label: l.clone(),
            bbox: PixelBox { x0: b[0], y0: b[1], x1: b[0] + 1.0, y1: b[1] + 2.0 },
            confidence: *c,
        }).collect();
        let resp = wire::DetectResponse { detections: dets };
        let bytes = wire::encode(&resp);
        let back: wire::DetectResponse = wire::decode(&bytes).unwrap();
        prop_assert_eq!(&back, &resp);
        prop_assert_eq!(wire::encode(&back), bytes);

        let req = wire::MapSynonymsRequest { predicted: labels.clone(), ground_truth: labels.iter().rev().cloned().collect() };
        let bytes = wire::encode(&req);
        prop_assert_eq!(wire::encode(&wire::decode::<wire::MapSynonymsRequest>(&bytes).unwrap()), bytes);
    }
}

// ---------- dataset translation ----------

fn rotation() -> impl Strategy<Value = Rotation> {
    prop_oneof![
        [-180.0f64..180.0, -90.0f64..90.0, -180.0f64..180.0].prop_map(Rotation::EulerDeg),
        [-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.0f64..std::f64::consts::PI].prop_map(|[x, y, z, a]| {
            let axis = Vector3::new(x, y, z + 1e-3);
            let m: Matrix3<f64> = UnitQuaternion::from_scaled_axis(axis.normalize() * a).to_rotation_matrix().into_inner();
            let mut row = [0.0; 9];
            for r in 0..3 {
                for c in 0..3 {
                    row[3 * r + c] = m[(r, c)];
                }
            }
            Rotation::Matrix(row)
        }),
    ]
}

fn record() -> impl Strategy<Value = PrimitiveRecord> {
    (any::<bool>(), [0.2f64..2.0, 0.2f64..2.0, 0.2f64..2.0], rotation(), [-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0])
        .prop_map(|(cube, d, r, t)| {
            if cube {
                PrimitiveRecord::cuboid(d, r, t, "part")
            } else {
                PrimitiveRecord::ellipsoid(d, r, t, "part")
            }
        })
}

/// Whether `p` lies within `eps` of the record's surface.
fn near_surface(r: &PrimitiveRecord, p: &Point3<f64>, eps: f64) -> bool {
    let m = r.rotation.matrix();
    let q = m.transpose() * (p.coords - Vector3::from(r.translation));
    match r.kind {
        RecordKind::Cuboid => {
            let h = r.size.unwrap().map(|s| s / 2.0);
            let outside = Vector3::new((q.x.abs() - h[0]).max(0.0), (q.y.abs() - h[1]).max(0.0), (q.z.abs() - h[2]).max(0.0));
            let inside = (0..3).map(|i| h[i] - q[i].abs()).fold(f64::INFINITY, f64::min);
            if outside.norm() > 0.0 { outside.norm() <= eps } else { inside <= eps }
        }
        RecordKind::Ellipsoid => {
            let a = r.semi_axes.unwrap();
            let g = Vector3::new(q.x / (a[0] * a[0]), q.y / (a[1] * a[1]), q.z / (a[2] * a[2]));
            let n = m * g.normalize();
            let probe = |s: f64| r.contains(&(p + n * s));
            probe(eps) != probe(-eps)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn translation_matches_closed_form(recs in prop::collection::vec(record(), 1..4), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let (src, spans) = translate_primitives(&recs).unwrap();
        prop_assert_eq!(spans.len(), recs.len());
        let p = Program::load(src).unwrap();
        let shape = p.shape().unwrap();
        let bb = shape.root_bounds();
        let eps = 1e-6 * shape.diag();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10_000 {
            let pt = Point3::new(
                rng.random_range(bb.min.x..=bb.max.x),
                rng.random_range(bb.min.y..=bb.max.y),
                rng.random_range(bb.min.z..=bb.max.z),
            );
            let want = recs.iter().any(|r| r.contains(&pt));
            if shape.contains_point(&pt) != want {
                prop_assert!(recs.iter().any(|r| near_surface(r, &pt, eps)), "disagreement at {pt:?}");
            }
        }
    }

    #[test]
    fn raising_share_never_adds_labels(
        recs in prop::collection::vec(record(), 2..4),
        pts in prop::collection::vec(([-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0], 0usize..3), 1..200),
        lo in 0.0f64..0.5,
        d in 0.0f64..0.5,
    ) {
        let p = Program::load(translate_primitives(&recs).unwrap().0).unwrap();
        let shape = p.shape().unwrap();
        let cloud = LabeledPointCloud {
            points: pts.iter().map(|(x, _)| *x).collect(),
            labels: pts.iter().map(|(_, l)| LABELS[*l].to_string()).collect(),
        };
        let (a, _) = transfer_labels(&p.blocks, &shape, &cloud, lo).unwrap();
        let (b, _) = transfer_labels(&p.blocks, &shape, &cloud, lo + d).unwrap();
        let (a2, _) = transfer_labels(&p.blocks, &shape, &cloud, lo).unwrap();
        prop_assert_eq!(&a, &a2);
        for blk in p.blocks.ids() {
            for l in b.labels_of(blk) {
                prop_assert!(a.labels_of(blk).contains(l));
            }
        }
    }
}
