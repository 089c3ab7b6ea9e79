//! Seeded boundary sampling on a jittered membership grid.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Shape};
use crate::blocks::BlockId;

pub const GRID: usize = 128;
const BISECTIONS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub point: Point3<f64>,
    pub block: Option<BlockId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_labels: Option<Vec<String>>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Grid point for cell `(i, j, k)`, jittered by up to a quarter cell.
fn grid_point(seed: u64, origin: &Point3<f64>, cell: &Vector3<f64>, ijk: [usize; 3]) -> Point3<f64> {
    let idx = ((ijk[0] * GRID + ijk[1]) * GRID + ijk[2]) as u64;
    let mut h = splitmix(seed ^ splitmix(idx));
    let mut p = *origin;
    for a in 0..3 {
        h = splitmix(h);
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        p[a] += (ijk[a] as f64 + 0.5 + (u - 0.5) * 0.5) * cell[a];
    }
    p
}

/// Boundary points of `shape`, refined by bisection and attributed to blocks.
/// Returns exactly `min(n, available)` samples, stratified over the detected
/// boundary edges of the grid.
pub fn sample_labeled_points(shape: &Shape, n: usize, seed: u64) -> Result<Vec<SurfaceSample>, GeometryError> {
    let b = shape.root_bounds();
    if b.is_empty() {
        return Err(GeometryError::EmptyShape);
    }
    // One cell of margin so the boundary is strictly inside the grid.
    let margin = b.extent() / (GRID as f64 - 2.0) + Vector3::repeat(1e-9 * shape.diag());
    let origin = b.min - margin;
    let cell = (b.extent() + margin * 2.0) / GRID as f64;

    let idx = |i: usize, j: usize, k: usize| (i * GRID + j) * GRID + k;
    let mut inside = vec![false; GRID * GRID * GRID];
    for i in 0..GRID {
        for j in 0..GRID {
            for k in 0..GRID {
                inside[idx(i, j, k)] = shape.contains_point(&grid_point(seed, &origin, &cell, [i, j, k]));
            }
        }
    }

    // Each transition edge joins a cell to its +x, +y or +z neighbor.
    let mut edges: Vec<([usize; 3], [usize; 3])> = Vec::new();
    for i in 0..GRID {
        for j in 0..GRID {
            for k in 0..GRID {
                let here = inside[idx(i, j, k)];
                for (di, dj, dk) in [(1, 0, 0), (0, 1, 0), (0, 0, 1)] {
                    let (a, b2, c) = (i + di, j + dj, k + dk);
                    if a < GRID && b2 < GRID && c < GRID && inside[idx(a, b2, c)] != here {
                        edges.push(([i, j, k], [a, b2, c]));
                    }
                }
            }
        }
    }
    if edges.is_empty() {
        return Err(GeometryError::EmptyShape);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: Vec<usize> = if n >= edges.len() {
        (0..edges.len()).collect()
    } else {
        (0..n)
            .map(|m| {
                let u: f64 = rng.random();
                (((m as f64 + u) * edges.len() as f64 / n as f64) as usize).min(edges.len() - 1)
            })
            .collect()
    };

    Ok(chosen
        .into_iter()
        .map(|e| {
            let (a, b2) = edges[e];
            let (pa, pb) = (grid_point(seed, &origin, &cell, a), grid_point(seed, &origin, &cell, b2));
            let (mut lo, mut hi) = if inside[idx(a[0], a[1], a[2])] { (pb, pa) } else { (pa, pb) };
            for _ in 0..BISECTIONS {
                let mid = nalgebra::center(&lo, &hi);
                if shape.contains_point(&mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            SurfaceSample {
                point: hi,
                block: shape.attribute_block(&hi),
                gt_labels: None,
            }
        })
        .collect())
}
