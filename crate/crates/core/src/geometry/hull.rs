//! Incremental 3D convex hull and half-space polytopes.

use std::collections::HashMap;

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    /// Unit outward normal.
    pub normal: Vector3<f64>,
    pub offset: f64,
}

/// Interior is `{p : n·p ≤ d + tolerance}` for every half-space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolytope {
    pub half_spaces: Vec<HalfSpace>,
    pub tolerance: f64,
    /// Built from the thickened-slab fallback.
    pub degenerate: bool,
}

impl ConvexPolytope {
    #[inline]
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        self.half_spaces
            .iter()
            .all(|h| h.normal.dot(&p.coords) <= h.offset + self.tolerance)
    }

    /// Parameter interval of `o + t·d` inside the (tolerance-padded) polytope.
    pub fn ray_interval(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for h in &self.half_spaces {
            let num = h.offset + self.tolerance - h.normal.dot(&o.coords);
            let den = h.normal.dot(d);
            if den == 0.0 {
                if num < 0.0 {
                    return None;
                }
            } else if den > 0.0 {
                t1 = t1.min(num / den);
            } else {
                t0 = t0.max(num / den);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegenerateHull;

struct Face {
    v: [u32; 3],
    n: Vector3<f64>,
    d: f64,
    alive: bool,
}

fn plane(points: &[Point3<f64>], v: [u32; 3]) -> (Vector3<f64>, f64) {
    let [a, b, c] = v.map(|i| points[i as usize]);
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len == 0.0 {
        return (Vector3::zeros(), 0.0);
    }
    let n = n / len;
    (n, n.dot(&a.coords))
}

/// Facet planes of the convex hull. Fails when all points lie within `eps`
/// of a common plane.
pub fn convex_hull(points: &[Point3<f64>], eps: f64) -> Result<Vec<HalfSpace>, DegenerateHull> {
    if points.len() < 4 {
        return Err(DegenerateHull);
    }
    // Initial tetrahedron from extreme points.
    let i0 = (0..points.len())
        .min_by(|&a, &b| points[a].x.total_cmp(&points[b].x))
        .unwrap();
    let far = |score: &dyn Fn(&Point3<f64>) -> f64| {
        (0..points.len())
            .max_by(|&a, &b| score(&points[a]).total_cmp(&score(&points[b])))
            .unwrap()
    };
    let p0 = points[i0];
    let i1 = far(&|p| (p - p0).norm());
    let p1 = points[i1];
    if (p1 - p0).norm() <= eps {
        return Err(DegenerateHull);
    }
    let axis = (p1 - p0).normalize();
    let i2 = far(&|p| (p - p0).cross(&axis).norm());
    let p2 = points[i2];
    if (p2 - p0).cross(&axis).norm() <= eps {
        return Err(DegenerateHull);
    }
    let base_n = (p1 - p0).cross(&(p2 - p0)).normalize();
    let i3 = far(&|p| (p - p0).dot(&base_n).abs());
    if (points[i3] - p0).dot(&base_n).abs() <= eps {
        return Err(DegenerateHull);
    }

    let centroid = Point3::from((p0.coords + p1.coords + p2.coords + points[i3].coords) / 4.0);
    let mut faces: Vec<Face> = Vec::new();
    let mut edges: HashMap<(u32, u32), usize> = HashMap::new();
    let add_face = |faces: &mut Vec<Face>, edges: &mut HashMap<(u32, u32), usize>, mut v: [u32; 3], fallback: Option<Vector3<f64>>| {
        let (mut n, mut d) = plane(points, v);
        if n == Vector3::zeros() {
            // Sliver: inherit the replaced face's orientation.
            n = fallback.unwrap_or(Vector3::z());
            d = n.dot(&points[v[0] as usize].coords);
        } else if fallback.is_none() && n.dot(&(centroid - points[v[0] as usize])) > 0.0 {
            v.swap(1, 2);
            n = -n;
            d = -d;
        }
        let id = faces.len();
        for k in 0..3 {
            edges.insert((v[k], v[(k + 1) % 3]), id);
        }
        faces.push(Face { v, n, d, alive: true });
    };
    let (a, b, c, e) = (i0 as u32, i1 as u32, i2 as u32, i3 as u32);
    for v in [[a, b, c], [a, b, e], [a, c, e], [b, c, e]] {
        add_face(&mut faces, &mut edges, v, None);
    }

    let mut visible = Vec::new();
    let mut is_visible: Vec<bool> = Vec::new();
    for (pi, p) in points.iter().enumerate() {
        if [i0, i1, i2, i3].contains(&pi) {
            continue;
        }
        visible.clear();
        is_visible.clear();
        is_visible.resize(faces.len(), false);
        for (fi, f) in faces.iter().enumerate() {
            if f.alive && f.n.dot(&p.coords) - f.d > eps {
                visible.push(fi);
                is_visible[fi] = true;
            }
        }
        if visible.is_empty() {
            continue;
        }
        let mut horizon = Vec::new();
        for &fi in &visible {
            let v = faces[fi].v;
            for k in 0..3 {
                let (x, y) = (v[k], v[(k + 1) % 3]);
                let twin = edges[&(y, x)];
                if !is_visible[twin] {
                    horizon.push((x, y, faces[fi].n));
                }
            }
        }
        for &fi in &visible {
            faces[fi].alive = false;
            let v = faces[fi].v;
            for k in 0..3 {
                let key = (v[k], v[(k + 1) % 3]);
                if edges.get(&key) == Some(&fi) {
                    edges.remove(&key);
                }
            }
        }
        for (x, y, n) in horizon {
            add_face(&mut faces, &mut edges, [x, y, pi as u32], Some(n));
        }
    }

    // Coplanar triangles collapse to one half-space.
    let mut seen = std::collections::HashSet::new();
    let scale = 1.0 / eps.max(f64::MIN_POSITIVE);
    Ok(faces
        .iter()
        .filter(|f| f.alive)
        .filter(|f| {
            let key = (
                (f.n.x * 1e9).round() as i64,
                (f.n.y * 1e9).round() as i64,
                (f.n.z * 1e9).round() as i64,
                (f.d * scale).round() as i64,
            );
            seen.insert(key)
        })
        .map(|f| HalfSpace { normal: f.n, offset: f.d })
        .collect())
}

/// Oriented box around (nearly) flat point sets, thickened by `thickness`.
pub fn slab_fallback(points: &[Point3<f64>], thickness: f64) -> Vec<HalfSpace> {
    let n = points.len().max(1) as f64;
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / n);
    let mut out = Vec::with_capacity(6);
    for i in 0..3 {
        let axis = eig.eigenvectors.column(i).normalize();
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let s = axis.dot(&p.coords);
            (lo.min(s), hi.max(s))
        });
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
        out.push(HalfSpace { normal: axis, offset: hi + thickness });
        out.push(HalfSpace { normal: -axis, offset: -lo + thickness });
    }
    out
}

/// Hull polytope, falling back to a thickened slab when the points are flat.
pub fn polytope(points: &[Point3<f64>], tolerance: f64) -> ConvexPolytope {
    let eps = (tolerance * 1e-3).max(f64::MIN_POSITIVE);
    match convex_hull(points, eps) {
        Ok(half_spaces) => ConvexPolytope {
            half_spaces,
            tolerance,
            degenerate: false,
        },
        Err(DegenerateHull) => ConvexPolytope {
            half_spaces: slab_fallback(points, tolerance),
            tolerance,
            degenerate: true,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_corners() -> Vec<Point3<f64>> {
        let mut v = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    v.push(Point3::new(x, y, z));
                }
            }
        }
        v
    }

    #[test]
    fn cube_hull_has_six_planes() {
        let hs = convex_hull(&cube_corners(), 1e-12).unwrap();
        assert_eq!(hs.len(), 6);
        let poly = ConvexPolytope { half_spaces: hs, tolerance: 1e-9, degenerate: false };
        assert!(poly.contains(&Point3::new(0.5, 0.5, 0.5)));
        assert!(poly.contains(&Point3::new(1.0, 1.0, 1.0)));
        assert!(!poly.contains(&Point3::new(1.01, 0.5, 0.5)));
    }

    #[test]
    fn random_cloud_is_enclosed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point3<f64>> = (0..500)
            .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..0.5)))
            .collect();
        let hs = convex_hull(&pts, 1e-12).unwrap();
        for h in &hs {
            assert!((h.normal.norm() - 1.0).abs() < 1e-9);
        }
        let poly = ConvexPolytope { half_spaces: hs, tolerance: 1e-9, degenerate: false };
        assert!(pts.iter().all(|p| poly.contains(p)));
        // Every facet touches some input point.
        for h in &poly.half_spaces {
            let best = pts.iter().map(|p| h.normal.dot(&p.coords)).fold(f64::NEG_INFINITY, f64::max);
            assert!((best - h.offset).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_points_are_degenerate() {
        let pts = vec![Point3::new(1.0, 2.0, 3.0); 10];
        assert_eq!(convex_hull(&pts, 1e-12), Err(DegenerateHull));
        let poly = polytope(&pts, 1e-3);
        assert!(poly.degenerate);
        assert!(poly.contains(&Point3::new(1.0, 2.0, 3.0)));
        assert!(!poly.contains(&Point3::new(1.1, 2.0, 3.0)));
    }

    #[test]
    fn flat_square_uses_slab() {
        let pts: Vec<_> = cube_corners().into_iter().filter(|p| p.z == 0.0).collect();
        let poly = polytope(&pts, 1e-3);
        assert!(poly.degenerate);
        assert!(poly.contains(&Point3::new(0.5, 0.5, 0.0005)));
        assert!(!poly.contains(&Point3::new(0.5, 0.5, 0.01)));
    }

    #[test]
    fn ray_interval_through_cube() {
        let poly = ConvexPolytope { half_spaces: convex_hull(&cube_corners(), 1e-12).unwrap(), tolerance: 0.0, degenerate: false };
        let (t0, t1) = poly.ray_interval(&Point3::new(-1.0, 0.5, 0.5), &Vector3::x()).unwrap();
        assert!((t0 - 1.0).abs() < 1e-12 && (t1 - 2.0).abs() < 1e-12);
        assert!(poly.ray_interval(&Point3::new(-1.0, 2.0, 0.5), &Vector3::x()).is_none());
    }
}
