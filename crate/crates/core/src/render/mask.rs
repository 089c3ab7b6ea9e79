use serde::{Deserialize, Serialize};

use super::camera::Camera;
use super::depth::DepthImage;
use crate::blocks::{BlockId, BlockSet, CodeBlock};
use crate::geometry::Shape;

/// Packed per-pixel booleans, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    bits: Vec<u64>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        let n = (width as usize) * (height as usize);
        BinaryMask {
            width,
            height,
            bits: vec![0; n.div_ceil(64)],
        }
    }

    pub fn len(&self) -> usize {
        (self.width as usize) * (self.height as usize)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.bits[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn get_xy(&self, x: u32, y: u32) -> bool {
        self.get((y * self.width + x) as usize)
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        if v {
            self.bits[i >> 6] |= 1 << (i & 63);
        } else {
            self.bits[i >> 6] &= !(1 << (i & 63));
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(usize) -> bool) -> Self {
        let mut m = BinaryMask::new(width, height);
        for i in 0..m.len() {
            if f(i) {
                m.set(i, true);
            }
        }
        m
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn intersection_count(&self, o: &BinaryMask) -> usize {
        self.bits.iter().zip(&o.bits).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    pub fn union_count(&self, o: &BinaryMask) -> usize {
        self.bits.iter().zip(&o.bits).map(|(a, b)| (a | b).count_ones() as usize).sum()
    }

    pub fn or_assign(&mut self, o: &BinaryMask) {
        for (a, b) in self.bits.iter_mut().zip(&o.bits) {
            *a |= b;
        }
    }

    /// Intersection over union; two empty masks have IoU 0.
    pub fn iou(&self, o: &BinaryMask) -> f64 {
        assert_eq!((self.width, self.height), (o.width, o.height), "mask size mismatch");
        let u = self.union_count(o);
        if u == 0 {
            0.0
        } else {
            self.intersection_count(o) as f64 / u as f64
        }
    }

    /// Tight bounding box `[x0, y0, x1, y1]` (inclusive) of set pixels.
    pub fn bbox(&self) -> Option<[u32; 4]> {
        let mut b: Option<[u32; 4]> = None;
        for i in 0..self.len() {
            if self.get(i) {
                let (x, y) = ((i % self.width as usize) as u32, (i / self.width as usize) as u32);
                b = Some(match b {
                    None => [x, y, x, y],
                    Some([x0, y0, x1, y1]) => [x0.min(x), y0.min(y), x1.max(x), y1.max(y)],
                });
            }
        }
        b
    }

    /// Run lengths of alternating values starting with `false`.
    pub fn run_lengths(&self) -> Vec<u32> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut n = 0u32;
        for i in 0..self.len() {
            if self.get(i) != current {
                runs.push(n);
                current = !current;
                n = 0;
            }
            n += 1;
        }
        runs.push(n);
        runs
    }
}

/// Irreducible block owning each silhouette pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct OwnerMap {
    pub width: u32,
    pub height: u32,
    pub owner: Vec<Option<BlockId>>,
}

impl OwnerMap {
    pub fn compute(shape: &Shape, cam: &Camera, base: &DepthImage) -> OwnerMap {
        let rays = cam.rays();
        let mut owner = vec![None; base.depth.len()];
        for y in 0..base.height {
            for x in 0..base.width {
                let i = (y * base.width + x) as usize;
                if base.is_foreground(i) {
                    owner[i] = shape.attribute_block(&rays.point(x, y, base.depth[i]));
                }
            }
        }
        OwnerMap {
            width: base.width,
            height: base.height,
            owner,
        }
    }

    /// Pixels owned by `block` or any irreducible block below it.
    pub fn mask(&self, blocks: &BlockSet, block: BlockId) -> BinaryMask {
        let members = blocks.irreducible_under(block);
        BinaryMask::from_fn(self.width, self.height, |i| {
            self.owner[i].is_some_and(|o| members.contains(&o))
        })
    }
}

/// Visible pixels of `block` in the view that produced `base`.
pub fn render_block_mask(shape: &Shape, block: &CodeBlock, cam: &Camera, base: &DepthImage) -> BinaryMask {
    OwnerMap::compute(shape, cam, base).mask(shape.blocks(), block.id)
}
