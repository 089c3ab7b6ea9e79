//! 8-bit depth encoding, morphological closing and image file formats.

use std::io::Cursor;

use thiserror::Error;

use super::depth::DepthImage;
use super::mask::BinaryMask;

/// Gray value of the farthest foreground pixel; 0 is reserved for background.
pub const FAR_GRAY: u8 = 32;
pub const NEAR_GRAY: u8 = 255;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gray8 {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("png encoding failed: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("png decoding failed: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("unsupported png layout: {0}")]
    Layout(String),
}

impl Gray8 {
    pub fn new(width: u32, height: u32) -> Self {
        Gray8 {
            width,
            height,
            data: vec![0; (width * height) as usize],
        }
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v > 0).count()
    }

    pub fn to_png(&self) -> Result<Vec<u8>, ImageError> {
        encode_png(self.width, self.height, png::BitDepth::Eight, &self.data)
    }

    pub fn from_png(bytes: &[u8]) -> Result<Gray8, ImageError> {
        let decoder = png::Decoder::new(Cursor::new(bytes));
        let mut reader = decoder.read_info()?;
        let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| ImageError::Layout("image too large".into()))?];
        let info = reader.next_frame(&mut buf)?;
        let (w, h) = (info.width, info.height);
        let n = (w * h) as usize;
        let data = match (info.color_type, info.bit_depth) {
            (png::ColorType::Grayscale, png::BitDepth::Eight) => buf[..n].to_vec(),
            (png::ColorType::Grayscale, png::BitDepth::One) => {
                let stride = (w as usize).div_ceil(8);
                (0..n)
                    .map(|i| {
                        let (x, y) = (i % w as usize, i / w as usize);
                        if buf[y * stride + x / 8] >> (7 - x % 8) & 1 == 1 {
                            255
                        } else {
                            0
                        }
                    })
                    .collect()
            }
            (png::ColorType::Rgb, png::BitDepth::Eight) => buf[..n * 3]
                .chunks(3)
                .map(|c| ((c[0] as u32 + c[1] as u32 + c[2] as u32) / 3) as u8)
                .collect(),
            (png::ColorType::Rgba, png::BitDepth::Eight) => buf[..n * 4]
                .chunks(4)
                .map(|c| ((c[0] as u32 + c[1] as u32 + c[2] as u32) / 3) as u8)
                .collect(),
            (png::ColorType::GrayscaleAlpha, png::BitDepth::Eight) => buf[..n * 2].chunks(2).map(|c| c[0]).collect(),
            (c, d) => return Err(ImageError::Layout(format!("{c:?}/{d:?}"))),
        };
        Ok(Gray8 { width: w, height: h, data })
    }
}

fn encode_png(width: u32, height: u32, depth: png::BitDepth, data: &[u8]) -> Result<Vec<u8>, ImageError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(depth);
        let mut w = enc.write_header()?;
        w.write_image_data(data)?;
    }
    Ok(out)
}

/// Background 0; foreground linear in depth from 255 (nearest) to 32 (farthest).
pub fn encode_depth_8bit(d: &DepthImage) -> Gray8 {
    let (lo, hi) = d
        .depth
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = (NEAR_GRAY - FAR_GRAY) as f64;
    let data = d
        .depth
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                0
            } else if hi <= lo {
                NEAR_GRAY
            } else {
                (NEAR_GRAY as f64 - (v - lo) / (hi - lo) * range).round() as u8
            }
        })
        .collect();
    Gray8 {
        width: d.width,
        height: d.height,
        data,
    }
}

/// One 3×3 max (or min) filter pass over in-bounds neighbors, done separably.
fn filter3(img: &Gray8, max: bool) -> Gray8 {
    let (w, h) = (img.width as usize, img.height as usize);
    let pick = |a: u8, b: u8| if max { a.max(b) } else { a.min(b) };
    let mut rows = vec![0u8; w * h];
    for y in 0..h {
        let row = &img.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut v = row[x];
            if x > 0 {
                v = pick(v, row[x - 1]);
            }
            if x + 1 < w {
                v = pick(v, row[x + 1]);
            }
            rows[y * w + x] = v;
        }
    }
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut v = rows[y * w + x];
            if y > 0 {
                v = pick(v, rows[(y - 1) * w + x]);
            }
            if y + 1 < h {
                v = pick(v, rows[(y + 1) * w + x]);
            }
            out[y * w + x] = v;
        }
    }
    Gray8 {
        width: img.width,
        height: img.height,
        data: out,
    }
}

/// Grayscale closing: `iterations` dilations then as many erosions.
pub fn morphological_close(img: &Gray8, iterations: usize) -> Gray8 {
    let mut out = img.clone();
    for _ in 0..iterations {
        out = filter3(&out, true);
    }
    for _ in 0..iterations {
        out = filter3(&out, false);
    }
    out
}

/// 1-bit grayscale PNG, set pixels white.
pub fn mask_to_png(m: &BinaryMask) -> Result<Vec<u8>, ImageError> {
    let stride = (m.width as usize).div_ceil(8);
    let mut data = vec![0u8; stride * m.height as usize];
    for y in 0..m.height as usize {
        for x in 0..m.width as usize {
            if m.get(y * m.width as usize + x) {
                data[y * stride + x / 8] |= 0x80 >> (x % 8);
            }
        }
    }
    encode_png(m.width, m.height, png::BitDepth::One, &data)
}

/// Any nonzero pixel counts as set.
pub fn mask_from_png(bytes: &[u8]) -> Result<BinaryMask, ImageError> {
    let g = Gray8::from_png(bytes)?;
    Ok(BinaryMask::from_fn(g.width, g.height, |i| g.data[i] > 0))
}

/// 16-bit PGM: background 0, depth mapped linearly onto 1..=65535; the
/// depth range is kept in a header comment.
pub fn depth_to_pgm16(d: &DepthImage) -> Vec<u8> {
    let (lo, hi) = d
        .depth
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mut out = format!("P5\n# depth {lo} {hi}\n{} {}\n65535\n", d.width, d.height).into_bytes();
    for &v in &d.depth {
        let q: u16 = if !v.is_finite() {
            0
        } else if hi <= lo {
            1
        } else {
            1 + ((v - lo) / (hi - lo) * 65534.0).round() as u16
        };
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}
