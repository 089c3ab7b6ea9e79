use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::RenderError;
use crate::geometry::Aabb;

pub const DEFAULT_VIEWS: usize = 10;
pub const DEFAULT_ELEVATION: f64 = 55.0;
pub const DEFAULT_FOV: f64 = 40.0;
pub const DEFAULT_RESOLUTION: u32 = 512;
/// Camera distance as a multiple of the half bounding-box diagonal.
pub const RADIUS_FACTOR: f64 = 2.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Point3<f64>,
    pub look_at: Point3<f64>,
    pub up: Vector3<f64>,
    /// Degrees.
    pub vertical_fov: f64,
    pub width: u32,
    pub height: u32,
}

/// Precomputed pixel-to-ray mapping for a camera.
#[derive(Clone, Copy, Debug)]
pub struct RayGen {
    origin: Point3<f64>,
    forward: Vector3<f64>,
    right: Vector3<f64>,
    up: Vector3<f64>,
    half_w: f64,
    half_h: f64,
    width: u32,
    height: u32,
}

impl Camera {
    pub fn rays(&self) -> RayGen {
        let forward = (self.look_at - self.position).normalize();
        let right = forward.cross(&self.up).normalize();
        let up = right.cross(&forward);
        let half_h = (self.vertical_fov.to_radians() / 2.0).tan();
        RayGen {
            origin: self.position,
            forward,
            right,
            up,
            half_w: half_h * self.width as f64 / self.height as f64,
            half_h,
            width: self.width,
            height: self.height,
        }
    }
}

impl RayGen {
    pub fn origin(&self) -> Point3<f64> {
        self.origin
    }

    /// Unit direction through the center of pixel `(x, y)`; row 0 is the top.
    #[inline]
    pub fn direction(&self, x: u32, y: u32) -> Vector3<f64> {
        let u = (2.0 * (x as f64 + 0.5) / self.width as f64 - 1.0) * self.half_w;
        let v = (1.0 - 2.0 * (y as f64 + 0.5) / self.height as f64) * self.half_h;
        (self.forward + self.right * u + self.up * v).normalize()
    }

    #[inline]
    pub fn point(&self, x: u32, y: u32, t: f64) -> Point3<f64> {
        self.origin + self.direction(x, y) * t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewRing {
    pub cameras: Vec<Camera>,
    pub elevation: f64,
    pub radius: f64,
    pub center: Point3<f64>,
}

/// Cameras evenly spaced in azimuth (starting at +X) around the bounds
/// center, all at the same elevation and distance, looking at the center.
pub fn make_view_ring(bounds: &Aabb, n: usize, elevation: f64) -> Result<ViewRing, RenderError> {
    make_view_ring_with(bounds, n, elevation, DEFAULT_RESOLUTION)
}

pub fn make_view_ring_with(bounds: &Aabb, n: usize, elevation: f64, resolution: u32) -> Result<ViewRing, RenderError> {
    let spec = RingSpec { views: n, elevation_deg: elevation, resolution, ..RingSpec::default() };
    spec.ring(bounds)
}

/// Every knob of the view ring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingSpec {
    pub views: usize,
    pub elevation_deg: f64,
    pub resolution: u32,
    pub radius_factor: f64,
    pub fov_deg: f64,
}

impl Default for RingSpec {
    fn default() -> Self {
        RingSpec {
            views: DEFAULT_VIEWS,
            elevation_deg: DEFAULT_ELEVATION,
            resolution: DEFAULT_RESOLUTION,
            radius_factor: RADIUS_FACTOR,
            fov_deg: DEFAULT_FOV,
        }
    }
}

impl RingSpec {
    pub fn ring(&self, bounds: &Aabb) -> Result<ViewRing, RenderError> {
        if bounds.is_empty() || !(bounds.diag() > 0.0) || !bounds.diag().is_finite() || self.views == 0 {
            return Err(RenderError::DegenerateBounds);
        }
        let center = bounds.center();
        let radius = self.radius_factor * bounds.diag() / 2.0;
        let el = self.elevation_deg.to_radians();
        let cameras = (0..self.views)
            .map(|k| {
                let az = (360.0 * k as f64 / self.views as f64).to_radians();
                let dir = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
                Camera {
                    position: center + dir * radius,
                    look_at: center,
                    up: Vector3::z(),
                    vertical_fov: self.fov_deg,
                    width: self.resolution,
                    height: self.resolution,
                }
            })
            .collect();
        Ok(ViewRing {
            cameras,
            elevation: self.elevation_deg,
            radius,
            center,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_geometry() {
        let b = Aabb::new(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        let ring = make_view_ring(&b, 10, 55.0).unwrap();
        assert_eq!(ring.cameras.len(), 10);
        let c = ring.center;
        let r = ring.radius;
        assert!((r - 2.2 * 3f64.sqrt() / 2.0).abs() < 1e-12);
        let p0 = ring.cameras[0].position;
        let e = 55f64.to_radians();
        assert!((p0 - (c + Vector3::new(e.cos(), 0.0, e.sin()) * r)).norm() < 1e-9);
        for cam in &ring.cameras {
            assert!(((cam.position - c).norm() - r).abs() < 1e-9);
            assert!((cam.position.z - c.z - r * e.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_bounds() {
        assert_eq!(make_view_ring(&Aabb::empty(), 10, 55.0), Err(RenderError::DegenerateBounds));
    }

    #[test]
    fn center_ray_points_at_target() {
        let cam = Camera {
            position: Point3::new(5.0, 0.0, 0.0),
            look_at: Point3::origin(),
            up: Vector3::z(),
            vertical_fov: 40.0,
            width: 5,
            height: 5,
        };
        let d = cam.rays().direction(2, 2);
        assert!((d - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
        // Row 0 looks up, column 0 looks left (towards -Y when facing -X).
        assert!(cam.rays().direction(2, 0).z > 0.0);
        assert!(cam.rays().direction(0, 2).y < 0.0);
    }
}
