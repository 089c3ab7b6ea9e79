use nalgebra::{Point3, Vector3};

use super::camera::{Camera, RayGen};
use crate::geometry::Shape;

/// Marching steps per bounding-box diagonal.
pub const MARCH_STEPS: f64 = 1024.0;
pub const BISECTIONS: usize = 24;

/// Per-pixel Euclidean distance to the first surface; `INFINITY` is background.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
}

impl DepthImage {
    pub fn background(width: u32, height: u32) -> Self {
        DepthImage {
            width,
            height,
            depth: vec![f64::INFINITY; (width * height) as usize],
        }
    }

    #[inline]
    pub fn at(&self, x: u32, y: u32) -> f64 {
        self.depth[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn is_foreground(&self, i: usize) -> bool {
        self.depth[i].is_finite()
    }

    pub fn silhouette_count(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }
}

struct March<'a> {
    shape: &'a Shape,
    delta: f64,
    pad: f64,
}

impl March<'_> {
    fn inside(&self, o: &Point3<f64>, d: &Vector3<f64>, t: f64) -> bool {
        self.shape.contains_point(&(o + d * t))
    }

    /// Bisects between an outside and an inside sample; returns the inside end.
    fn refine(&self, o: &Point3<f64>, d: &Vector3<f64>, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if self.inside(o, d, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    fn hit_at(&self, o: &Point3<f64>, d: &Vector3<f64>, t_enter: f64, k: i64) -> f64 {
        let t = t_enter + k as f64 * self.delta;
        if k == 0 {
            t
        } else {
            self.refine(o, d, t_enter + (k - 1) as f64 * self.delta, t)
        }
    }

    fn span(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<(f64, i64)> {
        let bbox = self.shape.root_bounds().dilate(self.delta);
        let (t0, t1) = bbox.ray_interval(o, d)?;
        let t_enter = t0.max(0.0);
        if t1 < t_enter {
            return None;
        }
        Some((t_enter, ((t1 - t_enter) / self.delta).floor() as i64))
    }

    /// Samples every step from the bounds entry to the exit.
    fn naive(&self, o: &Point3<f64>, d: &Vector3<f64>) -> f64 {
        let Some((t_enter, k_max)) = self.span(o, d) else {
            return f64::INFINITY;
        };
        for k in 0..=k_max {
            if self.inside(o, d, t_enter + k as f64 * self.delta) {
                return self.hit_at(o, d, t_enter, k);
            }
        }
        f64::INFINITY
    }

    /// Same samples as `naive`, skipping those outside every positive leaf.
    fn skipping(&self, o: &Point3<f64>, d: &Vector3<f64>, iv: &mut Vec<(f64, f64)>) -> f64 {
        let Some((t_enter, k_max)) = self.span(o, d) else {
            return f64::INFINITY;
        };
        iv.clear();
        self.shape.ray_intervals(o, d, self.pad, iv);
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut next = 0i64;
        for &(a, b) in iv.iter() {
            let k0 = (((a - t_enter) / self.delta).ceil().max(0.0) as i64).max(next);
            let k1 = (((b - t_enter) / self.delta).floor() as i64).min(k_max);
            for k in k0..=k1 {
                if self.inside(o, d, t_enter + k as f64 * self.delta) {
                    return self.hit_at(o, d, t_enter, k);
                }
            }
            next = next.max(k1 + 1);
        }
        f64::INFINITY
    }
}

fn march(shape: &Shape) -> March<'_> {
    March {
        shape,
        delta: shape.diag() / MARCH_STEPS,
        pad: 1e-7 * shape.diag(),
    }
}

/// Ray-marched depth: fixed steps of diag/1024 through the padded bounds,
/// then bisection to the first outside→inside transition.
pub fn render_depth(shape: &Shape, cam: &Camera) -> DepthImage {
    let m = march(shape);
    let rays = cam.rays();
    let o = rays.origin();
    let mut img = DepthImage::background(cam.width, cam.height);
    let mut iv = Vec::new();
    for y in 0..cam.height {
        for x in 0..cam.width {
            img.depth[(y * cam.width + x) as usize] = m.skipping(&o, &rays.direction(x, y), &mut iv);
        }
    }
    img
}

/// Reference marcher without interval skipping.
pub fn render_depth_naive(shape: &Shape, cam: &Camera) -> DepthImage {
    let m = march(shape);
    let rays: RayGen = cam.rays();
    let o = rays.origin();
    let mut img = DepthImage::background(cam.width, cam.height);
    for y in 0..cam.height {
        for x in 0..cam.width {
            img.depth[(y * cam.width + x) as usize] = m.naive(&o, &rays.direction(x, y));
        }
    }
    img
}
