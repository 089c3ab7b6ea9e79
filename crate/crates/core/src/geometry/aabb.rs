use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

/// Axis-aligned box. An empty box has `min > max` on some axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Self {
        Aabb { min, max }
    }

    pub fn empty() -> Self {
        Aabb {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn grow(&mut self, p: &Point3<f64>) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn merge(&self, o: &Aabb) -> Aabb {
        if self.is_empty() {
            return *o;
        }
        if o.is_empty() {
            return *self;
        }
        Aabb {
            min: self.min.inf(&o.min),
            max: self.max.sup(&o.max),
        }
    }

    pub fn intersect(&self, o: &Aabb) -> Aabb {
        let b = Aabb {
            min: self.min.sup(&o.min),
            max: self.max.inf(&o.max),
        };
        if b.is_empty() {
            Aabb::empty()
        } else {
            b
        }
    }

    pub fn dilate(&self, r: f64) -> Aabb {
        if self.is_empty() {
            return *self;
        }
        let v = Vector3::repeat(r);
        Aabb {
            min: self.min - v,
            max: self.max + v,
        }
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn diag(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.extent().norm()
        }
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn corners(&self) -> [Point3<f64>; 8] {
        let (a, b) = (self.min, self.max);
        [
            Point3::new(a.x, a.y, a.z),
            Point3::new(b.x, a.y, a.z),
            Point3::new(a.x, b.y, a.z),
            Point3::new(b.x, b.y, a.z),
            Point3::new(a.x, a.y, b.z),
            Point3::new(b.x, a.y, b.z),
            Point3::new(a.x, b.y, b.z),
            Point3::new(b.x, b.y, b.z),
        ]
    }

    /// Parameter interval where `o + t·d` lies in the box.
    pub fn ray_interval(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<(f64, f64)> {
        slab_interval(&self.min.coords, &self.max.coords, &o.coords, d)
    }
}

/// Slab test for `q0 + t·dq` against `[lo, hi]`.
pub(crate) fn slab_interval(
    lo: &Vector3<f64>,
    hi: &Vector3<f64>,
    q0: &Vector3<f64>,
    dq: &Vector3<f64>,
) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for i in 0..3 {
        if dq[i] == 0.0 {
            if q0[i] < lo[i] || q0[i] > hi[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dq[i];
        let (a, b) = ((lo[i] - q0[i]) * inv, (hi[i] - q0[i]) * inv);
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        t0 = t0.max(a);
        t1 = t1.min(b);
        if t0 > t1 {
            return None;
        }
    }
    Some((t0, t1))
}
