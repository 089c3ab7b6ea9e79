//! Seeded part-based shapes standing in for fitted abstractions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::records::{PrimitiveRecord, RecordKind, Rotation};
use super::DatasetError;

/// (label, size, center) for each part; x forward, y span, z up.
type Part = (&'static str, [f64; 3], [f64; 3]);

const AIRPLANE: &[Part] = &[
    ("body", [8.0, 1.0, 1.0], [0.0, 0.0, 0.0]),
    ("wings", [1.6, 4.0, 0.15], [0.3, 2.5, 0.0]),
    ("wings", [1.6, 4.0, 0.15], [0.3, -2.5, 0.0]),
    ("tail", [1.0, 0.15, 1.2], [-3.5, 0.0, 1.1]),
    ("tail", [0.8, 2.4, 0.12], [-3.5, 0.0, 0.5]),
    // Ahead of the wing's leading edge so they show from above.
    ("engine", [1.2, 0.5, 0.5], [1.6, 2.2, -0.35]),
    ("engine", [1.2, 0.5, 0.5], [1.6, -2.2, -0.35]),
];

const CHAIR: &[Part] = &[
    ("seat", [2.0, 2.0, 0.2], [0.0, 0.0, 1.0]),
    ("back", [2.0, 0.2, 2.0], [0.0, -0.9, 2.1]),
    ("leg", [0.2, 0.2, 0.9], [0.9, 0.9, 0.45]),
    ("leg", [0.2, 0.2, 0.9], [-0.9, 0.9, 0.45]),
    ("leg", [0.2, 0.2, 0.9], [0.9, -0.9, 0.45]),
    ("leg", [0.2, 0.2, 0.9], [-0.9, -0.9, 0.45]),
    ("arm", [0.2, 1.6, 0.15], [1.0, 0.1, 1.6]),
    ("arm", [0.2, 1.6, 0.15], [-1.0, 0.1, 1.6]),
];

const TABLE: &[Part] = &[
    ("top", [3.0, 2.0, 0.2], [0.0, 0.0, 1.5]),
    ("leg", [0.2, 0.2, 1.4], [1.3, 0.8, 0.7]),
    ("leg", [0.2, 0.2, 1.4], [-1.3, 0.8, 0.7]),
    ("leg", [0.2, 0.2, 1.4], [1.3, -0.8, 0.7]),
    ("leg", [0.2, 0.2, 1.4], [-1.3, -0.8, 0.7]),
];

const ANIMAL: &[Part] = &[
    ("body", [3.0, 1.2, 1.2], [0.0, 0.0, 1.6]),
    ("head", [1.0, 0.9, 0.9], [2.0, 0.0, 2.4]),
    ("leg", [0.4, 0.4, 1.0], [1.1, 0.4, 0.5]),
    ("leg", [0.4, 0.4, 1.0], [-1.1, 0.4, 0.5]),
    ("leg", [0.4, 0.4, 1.0], [1.1, -0.4, 0.5]),
    ("leg", [0.4, 0.4, 1.0], [-1.1, -0.4, 0.5]),
    ("tail", [1.0, 0.2, 0.2], [-2.0, 0.0, 2.0]),
];

pub fn template(category: &str) -> Result<&'static [Part], DatasetError> {
    match category {
        "airplane" => Ok(AIRPLANE),
        "chair" => Ok(CHAIR),
        "table" => Ok(TABLE),
        "animal" => Ok(ANIMAL),
        other => Err(DatasetError::UnknownCategory(other.to_string())),
    }
}

/// Template parts with sizes and positions jittered by up to ±10%.
/// Ellipsoids get the cuboid's half extents as semi-axes.
pub fn synthetic_records(category: &str, kind: RecordKind, seed: u64) -> Result<Vec<PrimitiveRecord>, DatasetError> {
    let parts = template(category)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |v: f64| v * rng.random_range(0.9..1.1);
    Ok(parts
        .iter()
        .map(|&(label, size, center)| {
            let size = size.map(&mut jitter);
            let center = center.map(&mut jitter);
            match kind {
                RecordKind::Cuboid => PrimitiveRecord::cuboid(size, Rotation::default(), center, label),
                RecordKind::Ellipsoid => PrimitiveRecord::ellipsoid(size.map(|s| s / 2.0), Rotation::default(), center, label),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::fallback::builtin_labels;
    use std::collections::BTreeSet;

    #[test]
    fn labels_match_builtin_tables() {
        for cat in ["airplane", "chair", "table", "animal"] {
            let used: BTreeSet<&str> = template(cat).unwrap().iter().map(|p| p.0).collect();
            let table = builtin_labels(cat).unwrap().labels;
            assert_eq!(used.len(), table.len(), "{cat}");
            assert!(used.iter().all(|u| table.iter().any(|t| t == u)));
        }
    }

    #[test]
    fn seeded() {
        let a = synthetic_records("airplane", RecordKind::Cuboid, 1).unwrap();
        assert_eq!(a, synthetic_records("airplane", RecordKind::Cuboid, 1).unwrap());
        assert_ne!(a, synthetic_records("airplane", RecordKind::Cuboid, 2).unwrap());
        assert!(a.iter().enumerate().all(|(i, r)| r.validate(i).is_ok()));
        assert!(synthetic_records("zeppelin", RecordKind::Cuboid, 1).is_err());
    }
}
