//! 8-bit RGB images: binary PPM codec, bilinear resampling, tensor conversion.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-major 24-bit RGB raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageRGB {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl ImageRGB {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!("image size {width}x{height} is empty")));
        }
        if pixels.len() != width * height {
            return Err(Error::Argument(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(ImageRGB {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format(format!("PPM header: missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("PPM header: bad {what}")))
    }
}

/// Decodes a binary `P6` PPM with maxval 255.
pub fn decode_ppm(bytes: &[u8]) -> Result<ImageRGB> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(Error::Format("not a binary PPM (magic must be P6)".into()));
    }
    let mut r = HeaderReader { bytes, pos: 2 };
    let width = r.number("width")?;
    let height = r.number("height")?;
    let maxval = r.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("PPM size {width}x{height} is empty")));
    }
    if maxval != 255 {
        return Err(Error::Unsupported(format!("PPM maxval {maxval} (only 255 is supported)")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(r.pos) {
        Some(c) if c.is_ascii_whitespace() => r.pos += 1,
        _ => return Err(Error::Format("PPM header not terminated by whitespace".into())),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::Format("PPM dimensions overflow".into()))?;
    let payload = &bytes[r.pos..];
    if payload.len() < need {
        return Err(Error::Format(format!(
            "PPM payload truncated: {} of {need} bytes",
            payload.len()
        )));
    }
    let pixels = payload[..need]
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    ImageRGB::new(width, height, pixels)
}

pub fn encode_ppm(img: &ImageRGB) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.reserve(img.pixels.len() * 3);
    for p in &img.pixels {
        out.extend_from_slice(p);
    }
    out
}

pub fn read_ppm(path: &Path) -> Result<ImageRGB> {
    let bytes = std::fs::read(path)?;
    decode_ppm(&bytes)
}

/// Bilinear resampling with half-pixel centers (no corner alignment).
///
/// Source coordinate for target index `t` is `(t + 0.5) * src / dst - 0.5`,
/// clamped to the valid range; results are rounded to the nearest byte.
pub fn resample_bilinear(img: &ImageRGB, target: (usize, usize)) -> Result<ImageRGB> {
    let (th, tw) = target;
    if th == 0 || tw == 0 {
        return Err(Error::Argument(format!("resample target {th}x{tw} is empty")));
    }
    if (th, tw) == (img.height, img.width) {
        return Ok(img.clone());
    }
    let axis = |dst: usize, src: usize| -> Vec<(usize, usize, f64)> {
        (0..dst)
            .map(|t| {
                let s = ((t as f64 + 0.5) * src as f64 / dst as f64 - 0.5)
                    .clamp(0.0, (src - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(src - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let rows = axis(th, img.height);
    let cols = axis(tw, img.width);
    let mut pixels = Vec::with_capacity(th * tw);
    for &(r0, r1, fy) in &rows {
        for &(c0, c1, fx) in &cols {
            let (p00, p01) = (img.pixel(r0, c0), img.pixel(r0, c1));
            let (p10, p11) = (img.pixel(r1, c0), img.pixel(r1, c1));
            let mut out = [0u8; 3];
            for ch in 0..3 {
                let top = p00[ch] as f64 * (1.0 - fx) + p01[ch] as f64 * fx;
                let bottom = p10[ch] as f64 * (1.0 - fx) + p11[ch] as f64 * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out[ch] = v.round().clamp(0.0, 255.0) as u8;
            }
            pixels.push(out);
        }
    }
    ImageRGB::new(tw, th, pixels)
}

/// Channel-planar (3, H, W) tensor with values `byte / 255`.
pub fn to_tensor(img: &ImageRGB) -> Tensor {
    let plane = img.width * img.height;
    let mut data = vec![0.0; 3 * plane];
    for (i, p) in img.pixels.iter().enumerate() {
        for ch in 0..3 {
            data[ch * plane + i] = p[ch] as f64 / 255.0;
        }
    }
    Tensor::from_vec(&[3, img.height, img.width], data).expect("non-empty image")
}

/// Inverse of [`to_tensor`] for values in [0, 1] (clamped, rounded).
pub fn from_tensor(t: &Tensor) -> Result<ImageRGB> {
    let (c, h, w) = t.chw()?;
    if c != 3 {
        return Err(Error::Shape(format!("expected 3 channels, got {c}")));
    }
    let plane = h * w;
    let d = t.data();
    let px = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let pixels = (0..plane)
        .map(|i| [px(d[i]), px(d[plane + i]), px(d[2 * plane + i])])
        .collect();
    ImageRGB::new(w, h, pixels)
}

/// Reads, resamples to `size` = (H, W) and normalizes one image file.
pub fn load_image_tensor(path: &Path, size: (usize, usize)) -> Result<Tensor> {
    let img = read_ppm(path)?;
    Ok(to_tensor(&resample_bilinear(&img, size)?))
}
