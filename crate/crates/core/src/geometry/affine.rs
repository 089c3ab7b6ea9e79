//! Affine maps and decoding of primitive/transform arguments.

use nalgebra::{Matrix3, Point3, Rotation3, Unit, Vector3};

use super::GeometryError;
use crate::scad::{eval, AstNode, Env, PrimitiveKind, TransformKind, Value};

/// Determinant below which a transform is treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

/// `x ↦ lin·x + off`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub lin: Matrix3<f64>,
    pub off: Vector3<f64>,
}

impl Affine {
    pub fn identity() -> Self {
        Affine {
            lin: Matrix3::identity(),
            off: Vector3::zeros(),
        }
    }

    pub fn translation(v: Vector3<f64>) -> Self {
        Affine {
            lin: Matrix3::identity(),
            off: v,
        }
    }

    pub fn linear(m: Matrix3<f64>) -> Self {
        Affine {
            lin: m,
            off: Vector3::zeros(),
        }
    }

    #[inline]
    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.lin * p.coords + self.off)
    }

    #[inline]
    pub fn apply_vec(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.lin * v
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn then_after(&self, inner: &Affine) -> Affine {
        Affine {
            lin: self.lin * inner.lin,
            off: self.lin * inner.off + self.off,
        }
    }

    pub fn det(&self) -> f64 {
        self.lin.determinant()
    }

    pub fn inverse(&self) -> Option<Affine> {
        if self.det().abs() < SINGULAR_DET {
            return None;
        }
        let inv = self.lin.try_inverse()?;
        Some(Affine {
            lin: inv,
            off: -(inv * self.off),
        })
    }
}

fn arg_value(node: &AstNode, name: &str, pos: Option<usize>) -> Result<Option<Value>, GeometryError> {
    let expr = node.arg(name).or_else(|| pos.and_then(|i| node.positional(i)));
    match expr {
        None => Ok(None),
        Some(e) => eval(e, &Env::new(), node.span.start_line)
            .map(Some)
            .map_err(|e| GeometryError::InvalidArgument {
                line: e.line,
                message: e.message,
            }),
    }
}

fn bad(node: &AstNode, message: impl Into<String>) -> GeometryError {
    GeometryError::InvalidArgument {
        line: node.span.start_line,
        message: format!("{}: {}", node.kind.keyword(), message.into()),
    }
}

fn number(node: &AstNode, name: &str, pos: Option<usize>) -> Result<Option<f64>, GeometryError> {
    match arg_value(node, name, pos)? {
        None => Ok(None),
        Some(v) => v
            .as_number()
            .map(Some)
            .ok_or_else(|| bad(node, format!("`{name}` must be a number"))),
    }
}

fn flag(node: &AstNode, name: &str, pos: Option<usize>) -> Result<bool, GeometryError> {
    match arg_value(node, name, pos)? {
        None => Ok(false),
        Some(v) => v.as_bool().ok_or_else(|| bad(node, format!("`{name}` must be a boolean"))),
    }
}

/// Short vectors are padded with `fill`, as OpenSCAD does for 2D vectors.
fn vector(v: &Value, fill: f64) -> Option<Vector3<f64>> {
    match v {
        Value::Vector(items) if !items.is_empty() && items.len() <= 3 => {
            let mut out = Vector3::repeat(fill);
            for (i, item) in items.iter().enumerate() {
                out[i] = item.as_number()?;
            }
            Some(out)
        }
        _ => None,
    }
}

fn non_negative(node: &AstNode, what: &str, x: f64) -> Result<f64, GeometryError> {
    if x < 0.0 || !x.is_finite() {
        Err(bad(node, format!("{what} must be non-negative, got {x}")))
    } else {
        Ok(x)
    }
}

/// Primitive in a canonical local frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    /// Axis box `[lo, hi]`.
    Box { lo: Vector3<f64>, hi: Vector3<f64> },
    Sphere { r: f64 },
    /// Frustum along z over `[z0, z0 + h]`, radius `r1` at the bottom, `r2` at the top.
    Cylinder { z0: f64, h: f64, r1: f64, r2: f64 },
}

impl Primitive {
    #[inline]
    pub fn contains(&self, q: &Point3<f64>) -> bool {
        match *self {
            Primitive::Box { lo, hi } => {
                q.x >= lo.x && q.x <= hi.x && q.y >= lo.y && q.y <= hi.y && q.z >= lo.z && q.z <= hi.z
            }
            Primitive::Sphere { r } => q.coords.norm_squared() <= r * r,
            Primitive::Cylinder { z0, h, r1, r2 } => {
                let z = q.z - z0;
                if z < 0.0 || z > h {
                    return false;
                }
                let r = if h > 0.0 { r1 + (r2 - r1) * (z / h) } else { r1.max(r2) };
                q.x * q.x + q.y * q.y <= r * r
            }
        }
    }

    /// Local-frame bounding box.
    pub fn local_box(&self) -> (Vector3<f64>, Vector3<f64>) {
        match *self {
            Primitive::Box { lo, hi } => (lo, hi),
            Primitive::Sphere { r } => (Vector3::repeat(-r), Vector3::repeat(r)),
            Primitive::Cylinder { z0, h, r1, r2 } => {
                let r = r1.max(r2);
                (Vector3::new(-r, -r, z0), Vector3::new(r, r, z0 + h))
            }
        }
    }
}

pub fn decode_primitive(node: &AstNode, kind: PrimitiveKind) -> Result<Primitive, GeometryError> {
    match kind {
        PrimitiveKind::Cube => {
            let size = match arg_value(node, "size", Some(0))? {
                None => Vector3::repeat(1.0),
                Some(Value::Number(s)) => Vector3::repeat(s),
                Some(v) => vector(&v, 0.0).ok_or_else(|| bad(node, "`size` must be a number or 3-vector"))?,
            };
            for i in 0..3 {
                non_negative(node, "size", size[i])?;
            }
            let lo = if flag(node, "center", Some(1))? { -size / 2.0 } else { Vector3::zeros() };
            Ok(Primitive::Box { lo, hi: lo + size })
        }
        PrimitiveKind::Sphere => {
            let r = match (number(node, "r", Some(0))?, number(node, "d", None)?) {
                (Some(r), _) => r,
                (None, Some(d)) => d / 2.0,
                (None, None) => 1.0,
            };
            Ok(Primitive::Sphere {
                r: non_negative(node, "radius", r)?,
            })
        }
        PrimitiveKind::Cylinder => {
            let h = non_negative(node, "height", number(node, "h", Some(0))?.unwrap_or(1.0))?;
            let r = number(node, "r", None)?.or(number(node, "d", None)?.map(|d| d / 2.0));
            let r1 = number(node, "r1", Some(1))?
                .or(number(node, "d1", None)?.map(|d| d / 2.0))
                .or(r)
                .unwrap_or(1.0);
            let r2 = number(node, "r2", Some(2))?
                .or(number(node, "d2", None)?.map(|d| d / 2.0))
                .or(r)
                .unwrap_or(1.0);
            let center = flag(node, "center", Some(3))?;
            Ok(Primitive::Cylinder {
                z0: if center { -h / 2.0 } else { 0.0 },
                h,
                r1: non_negative(node, "r1", r1)?,
                r2: non_negative(node, "r2", r2)?,
            })
        }
    }
}

/// Rotation from XYZ Euler angles in degrees, applied x first: `Rz·Ry·Rx`.
pub fn euler_xyz(deg: Vector3<f64>) -> Matrix3<f64> {
    let r = deg.map(f64::to_radians);
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), r.x);
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), r.y);
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), r.z);
    (rz * ry * rx).into_inner()
}

pub fn decode_transform(node: &AstNode, kind: TransformKind) -> Result<Affine, GeometryError> {
    match kind {
        TransformKind::Translate => {
            let v = arg_value(node, "v", Some(0))?
                .and_then(|v| vector(&v, 0.0))
                .ok_or_else(|| bad(node, "expects a vector"))?;
            Ok(Affine::translation(v))
        }
        TransformKind::Scale => {
            let s = match arg_value(node, "v", Some(0))? {
                Some(Value::Number(s)) => Vector3::repeat(s),
                Some(v) => vector(&v, 1.0).ok_or_else(|| bad(node, "expects a number or vector"))?,
                None => return Err(bad(node, "expects a number or vector")),
            };
            Ok(Affine::linear(Matrix3::from_diagonal(&s)))
        }
        TransformKind::Rotate => {
            let a = arg_value(node, "a", Some(0))?;
            let axis = arg_value(node, "v", Some(1))?;
            let m = match (a, axis) {
                (Some(Value::Number(angle)), Some(v)) => {
                    let v = vector(&v, 0.0).ok_or_else(|| bad(node, "`v` must be a vector"))?;
                    if v.norm() == 0.0 {
                        Matrix3::identity()
                    } else {
                        Rotation3::from_axis_angle(&Unit::new_normalize(v), angle.to_radians()).into_inner()
                    }
                }
                (Some(Value::Number(angle)), None) => euler_xyz(Vector3::new(0.0, 0.0, angle)),
                (Some(v), _) => euler_xyz(vector(&v, 0.0).ok_or_else(|| bad(node, "`a` must be a number or vector"))?),
                (None, _) => return Err(bad(node, "expects an angle")),
            };
            Ok(Affine::linear(m))
        }
        TransformKind::Mirror => {
            let n = arg_value(node, "v", Some(0))?
                .and_then(|v| vector(&v, 0.0))
                .ok_or_else(|| bad(node, "expects a vector"))?;
            let len2 = n.norm_squared();
            if len2 == 0.0 {
                return Ok(Affine::identity());
            }
            Ok(Affine::linear(Matrix3::identity() - n * n.transpose() * (2.0 / len2)))
        }
        TransformKind::Multmatrix => {
            let m = arg_value(node, "m", Some(0))?.ok_or_else(|| bad(node, "expects a matrix"))?;
            let rows = match &m {
                Value::Vector(rows) if rows.len() == 3 || rows.len() == 4 => rows,
                _ => return Err(bad(node, "matrix must have 3 or 4 rows")),
            };
            let mut lin = Matrix3::zeros();
            let mut off = Vector3::zeros();
            for (i, row) in rows.iter().take(3).enumerate() {
                let Value::Vector(cells) = row else {
                    return Err(bad(node, "matrix rows must be vectors"));
                };
                if cells.len() < 3 || cells.len() > 4 {
                    return Err(bad(node, "matrix rows must have 3 or 4 entries"));
                }
                for (j, c) in cells.iter().enumerate() {
                    let x = c.as_number().ok_or_else(|| bad(node, "matrix entries must be numbers"))?;
                    if j < 3 {
                        lin[(i, j)] = x;
                    } else {
                        off[i] = x;
                    }
                }
            }
            Ok(Affine { lin, off })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scad::parse_str;
    use approx::assert_relative_eq;

    fn first(text: &str) -> AstNode {
        let tree = parse_str(text).unwrap();
        tree.node(tree.root().children[0]).clone()
    }

    #[test]
    fn cube_arguments() {
        let p = decode_primitive(&first("cube([1,2,3]);"), PrimitiveKind::Cube).unwrap();
        assert_eq!(p, Primitive::Box { lo: Vector3::zeros(), hi: Vector3::new(1.0, 2.0, 3.0) });
        let p = decode_primitive(&first("cube(2, center=true);"), PrimitiveKind::Cube).unwrap();
        assert_eq!(p, Primitive::Box { lo: Vector3::repeat(-1.0), hi: Vector3::repeat(1.0) });
        assert!(decode_primitive(&first("cube(-1);"), PrimitiveKind::Cube).is_err());
    }

    #[test]
    fn cylinder_arguments() {
        let p = decode_primitive(&first("cylinder(h=4, r1=2, r2=1, center=true);"), PrimitiveKind::Cylinder).unwrap();
        assert_eq!(p, Primitive::Cylinder { z0: -2.0, h: 4.0, r1: 2.0, r2: 1.0 });
        let p = decode_primitive(&first("cylinder(3, d=2);"), PrimitiveKind::Cylinder).unwrap();
        assert_eq!(p, Primitive::Cylinder { z0: 0.0, h: 3.0, r1: 1.0, r2: 1.0 });
        assert!(p.contains(&Point3::new(0.0, 0.99, 2.9)));
        assert!(!p.contains(&Point3::new(0.0, 0.0, 3.1)));
    }

    #[test]
    fn rotations() {
        let m = decode_transform(&first("rotate(90) cube(1);"), TransformKind::Rotate).unwrap();
        let p = m.apply(&Point3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(p, Point3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
        let m = decode_transform(&first("rotate([90, 0, 90]) cube(1);"), TransformKind::Rotate).unwrap();
        // x first: y→z, then z rotation: x→y.
        assert_relative_eq!(m.apply(&Point3::new(0.0, 1.0, 0.0)), Point3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
        assert_relative_eq!(m.apply(&Point3::new(1.0, 0.0, 0.0)), Point3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
        let m = decode_transform(&first("rotate(a=180, v=[0,1,0]) cube(1);"), TransformKind::Rotate).unwrap();
        assert_relative_eq!(m.apply(&Point3::new(1.0, 0.0, 0.0)), Point3::new(-1.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn mirror_and_multmatrix() {
        let m = decode_transform(&first("mirror([1,0,0]) cube(1);"), TransformKind::Mirror).unwrap();
        assert_eq!(m.apply(&Point3::new(2.0, 3.0, 4.0)), Point3::new(-2.0, 3.0, 4.0));
        let m = decode_transform(
            &first("multmatrix([[1,0,0,5],[0,2,0,0],[0,0,1,0],[0,0,0,1]]) cube(1);"),
            TransformKind::Multmatrix,
        )
        .unwrap();
        assert_eq!(m.apply(&Point3::new(1.0, 1.0, 1.0)), Point3::new(6.0, 2.0, 1.0));
        let inv = m.inverse().unwrap();
        assert_relative_eq!(inv.apply(&Point3::new(6.0, 2.0, 1.0)), Point3::new(1.0, 1.0, 1.0));
        let s = decode_transform(&first("scale([1,0,1]) cube(1);"), TransformKind::Scale).unwrap();
        assert!(s.inverse().is_none());
    }
}
