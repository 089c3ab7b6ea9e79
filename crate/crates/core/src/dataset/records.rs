//! Abstraction primitives (cuboids, ellipsoids) and their translation to
//! OpenSCAD text.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::geometry::affine::euler_xyz;
use crate::scad::ast::format_number;
use crate::scad::SourceFile;

const ORTHONORMAL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Cuboid,
    Ellipsoid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Rotation {
    EulerDeg([f64; 3]),
    /// Row-major 3×3.
    Matrix([f64; 9]),
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation::EulerDeg([0.0; 3])
    }
}

impl Rotation {
    pub fn matrix(&self) -> Matrix3<f64> {
        match self {
            Rotation::EulerDeg(e) => euler_xyz(Vector3::from(*e)),
            Rotation::Matrix(m) => Matrix3::from_row_slice(m),
        }
    }

    /// Angles for OpenSCAD's `rotate([x, y, z])`, which applies `Rz·Ry·Rx`.
    pub fn euler_deg(&self) -> [f64; 3] {
        match self {
            Rotation::EulerDeg(e) => *e,
            Rotation::Matrix(_) => {
                let r = self.matrix();
                let sy = -r[(2, 0)].clamp(-1.0, 1.0);
                let (x, y, z) = if sy.abs() < 1.0 - 1e-12 {
                    (r[(2, 1)].atan2(r[(2, 2)]), sy.asin(), r[(1, 0)].atan2(r[(0, 0)]))
                } else {
                    // Gimbal lock: fold the z turn into x.
                    let y = sy.signum() * std::f64::consts::FRAC_PI_2;
                    (sy.signum() * r[(0, 1)].atan2(r[(1, 1)]), y, 0.0)
                };
                [x.to_degrees(), y.to_degrees(), z.to_degrees()]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveRecord {
    pub kind: RecordKind,
    /// Cuboid width, height, length along local x, y, z.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<[f64; 3]>,
    #[serde(default)]
    pub rotation: Rotation,
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_labels: Option<Vec<String>>,
}

/// Input file: one program's worth of records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub records: Vec<PrimitiveRecord>,
}

impl PrimitiveRecord {
    pub fn cuboid(size: [f64; 3], rotation: Rotation, translation: [f64; 3], label: &str) -> Self {
        PrimitiveRecord {
            kind: RecordKind::Cuboid,
            size: Some(size),
            semi_axes: None,
            rotation,
            translation,
            gt_labels: Some(vec![label.to_string()]),
        }
    }

    pub fn ellipsoid(semi_axes: [f64; 3], rotation: Rotation, translation: [f64; 3], label: &str) -> Self {
        PrimitiveRecord {
            kind: RecordKind::Ellipsoid,
            size: None,
            semi_axes: Some(semi_axes),
            rotation,
            translation,
            gt_labels: Some(vec![label.to_string()]),
        }
    }

    fn dims(&self) -> Option<[f64; 3]> {
        match self.kind {
            RecordKind::Cuboid => self.size,
            RecordKind::Ellipsoid => self.semi_axes,
        }
    }

    pub fn validate(&self, index: usize) -> Result<(), DatasetError> {
        let bad = |reason: String| DatasetError::InvalidPrimitive { index, reason };
        let (field, other) = match self.kind {
            RecordKind::Cuboid => ("size", self.semi_axes.is_some()),
            RecordKind::Ellipsoid => ("semi_axes", self.size.is_some()),
        };
        let dims = self.dims().ok_or_else(|| bad(format!("missing {field}")))?;
        if other {
            return Err(bad(format!("only {field} applies to this kind")));
        }
        if !dims.iter().all(|d| d.is_finite() && *d > 0.0) {
            return Err(bad(format!("{field} must be positive, got {dims:?}")));
        }
        if !self.translation.iter().all(|t| t.is_finite()) {
            return Err(bad("translation must be finite".into()));
        }
        let r = self.rotation.matrix();
        if !r.iter().all(|v| v.is_finite()) {
            return Err(bad("rotation must be finite".into()));
        }
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if err > ORTHONORMAL_TOL {
            return Err(bad(format!("rotation is not orthonormal (error {err:e})")));
        }
        if r.determinant() < 0.0 {
            return Err(bad("rotation is a reflection".into()));
        }
        if let Some(labels) = &self.gt_labels {
            if labels.iter().any(|l| l.trim().is_empty()) {
                return Err(bad("empty gt label".into()));
            }
        }
        Ok(())
    }

    /// Closed-form membership, independent of the CSG evaluator.
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let q = self.rotation.matrix().transpose() * (p.coords - Vector3::from(self.translation));
        let d = self.dims().unwrap_or([0.0; 3]);
        match self.kind {
            RecordKind::Cuboid => (0..3).all(|i| q[i].abs() <= d[i] / 2.0),
            RecordKind::Ellipsoid => (0..3).map(|i| (q[i] / d[i]).powi(2)).sum::<f64>() <= 1.0,
        }
    }

    fn statement(&self) -> String {
        let v = |a: [f64; 3]| format!("[{}, {}, {}]", format_number(a[0]), format_number(a[1]), format_number(a[2]));
        let placement = format!("translate({}) rotate({})", v(self.translation), v(self.rotation.euler_deg()));
        let d = self.dims().unwrap_or([0.0; 3]);
        match self.kind {
            RecordKind::Cuboid => format!("{placement} cube({}, center = true);", v(d)),
            RecordKind::Ellipsoid => format!("{placement} scale({}) sphere(r = 1);", v(d)),
        }
    }
}

/// Where each record's statement landed in the generated program.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSpan {
    pub record: usize,
    pub line: u32,
}

/// One top-level union holding one single-line statement per record, in
/// record order. Placement is always spelled out so every program of a
/// track has the same line count.
pub fn translate_primitives(records: &[PrimitiveRecord]) -> Result<(SourceFile, Vec<RecordSpan>), DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::InvalidPrimitive { index: 0, reason: "no records".into() });
    }
    let mut text = String::from("union() {\n");
    let mut spans = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        r.validate(i)?;
        text.push_str("  ");
        text.push_str(&r.statement());
        text.push('\n');
        spans.push(RecordSpan { record: i, line: i as u32 + 2 });
    }
    text.push_str("}\n");
    Ok((SourceFile::inline(&text), spans))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::Program;

    fn program(records: &[PrimitiveRecord]) -> Program {
        Program::load(translate_primitives(records).unwrap().0).unwrap()
    }

    #[test]
    fn cube_text() {
        let (src, spans) = translate_primitives(&[PrimitiveRecord::cuboid([2.0; 3], Rotation::default(), [0.0; 3], "body")]).unwrap();
        assert!(src.text.contains("cube([2, 2, 2], center = true);"));
        assert!(src.text.starts_with("union() {\n"));
        assert_eq!(spans, vec![RecordSpan { record: 0, line: 2 }]);
    }

    #[test]
    fn ellipsoid_membership() {
        let r = PrimitiveRecord::ellipsoid([1.0, 2.0, 3.0], Rotation::default(), [0.0; 3], "x");
        let p = program(&[r.clone(), PrimitiveRecord::cuboid([0.1; 3], Rotation::default(), [9.0, 0.0, 0.0], "y")]);
        let s = p.shape().unwrap();
        assert!(s.contains_point(&Point3::new(0.0, 1.99, 0.0)));
        assert!(!s.contains_point(&Point3::new(0.0, 2.01, 0.0)));
        assert!(r.contains(&Point3::new(0.0, 1.99, 0.0)));
    }

    #[test]
    fn one_block_per_record() {
        let recs: Vec<_> = (0..5)
            .map(|i| PrimitiveRecord::cuboid([1.0; 3], Rotation::default(), [i as f64 * 2.0, 0.0, 0.0], "p"))
            .collect();
        let p = program(&recs);
        assert_eq!(p.blocks.len(), 5);
        assert_eq!(p.blocks.roots.len(), 5);
        for (b, r) in p.blocks.blocks.iter().zip(0..) {
            assert_eq!(b.span.start_line, r + 2);
        }
    }

    #[test]
    fn matrix_rotation_round_trips_through_euler() {
        for e in [[10.0, 20.0, 30.0], [0.0, 90.0, 45.0], [-170.0, -30.0, 100.0], [30.0, -90.0, 0.0]] {
            let m = euler_xyz(Vector3::from(e));
            let rot = Rotation::Matrix(m.transpose().as_slice().try_into().unwrap());
            let back = euler_xyz(Vector3::from(rot.euler_deg()));
            assert!((back - m).abs().max() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn invalid_records() {
        let mut r = PrimitiveRecord::cuboid([1.0, -1.0, 1.0], Rotation::default(), [0.0; 3], "x");
        assert!(matches!(r.validate(3), Err(DatasetError::InvalidPrimitive { index: 3, .. })));
        r.size = Some([1.0; 3]);
        r.rotation = Rotation::Matrix([1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(r.validate(0).is_err());
        r.rotation = Rotation::Matrix([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0]);
        assert!(r.validate(0).is_err());
        r.rotation = Rotation::default();
        r.semi_axes = Some([1.0; 3]);
        assert!(r.validate(0).is_err());
    }

    #[test]
    fn record_json_shape() {
        let text = r#"{"records":[{"kind":"cuboid","size":[1,2,3],"rotation":{"euler_deg":[0,0,90]},"translation":[1,0,0],"gt_labels":["wing"]}]}"#;
        let f: RecordFile = serde_json::from_str(text).unwrap();
        assert_eq!(f.records[0].rotation, Rotation::EulerDeg([0.0, 0.0, 90.0]));
        let m: RecordFile = serde_json::from_str(r#"{"records":[{"kind":"ellipsoid","semi_axes":[1,1,1],"rotation":{"matrix":[1,0,0,0,1,0,0,0,1]}}]}"#).unwrap();
        assert_eq!(m.records[0].translation, [0.0; 3]);
    }
}
