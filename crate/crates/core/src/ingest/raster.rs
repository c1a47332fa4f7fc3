//! Binary PPM (P6) and PGM (P5) rasters, 8 bits per sample.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major RGB raster with a top-left origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; width as usize * height as usize * 3],
        }
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let mut img = Self::new(width, height);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    /// Bilinear sample at continuous pixel coordinates; integer coordinates
    /// are pixel centers, samples outside clamp to the border.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> [f64; 3] {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let u = u.clamp(0.0, max_x);
        let v = v.clamp(0.0, max_y);
        let x0 = u.floor();
        let y0 = v.floor();
        let fx = u - x0;
        let fy = v - y0;
        let x1 = (x0 + 1.0).min(max_x) as u32;
        let y1 = (y0 + 1.0).min(max_y) as u32;
        let (x0, y0) = (x0 as u32, y0 as u32);
        let (a, b, c, d) = (self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1));
        let mut out = [0.0; 3];
        for k in 0..3 {
            let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
            let bottom = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
            out[k] = top * (1.0 - fy) + bottom * fy;
        }
        out
    }
}

/// Row-major single-channel raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; width as usize * height as usize],
        }
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (width, height, data) = decode_netpbm(&bytes, b"P6", 3).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })?;
    Ok(RgbImage {
        width,
        height,
        data,
    })
}

pub fn write_image(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    write_netpbm(path.as_ref(), b"P6", img.width, img.height, &img.data, 3)
}

pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (width, height, data) = decode_netpbm(&bytes, b"P5", 1).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })?;
    Ok(GrayImage {
        width,
        height,
        data,
    })
}

pub fn write_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    write_netpbm(path.as_ref(), b"P5", img.width, img.height, &img.data, 1)
}

/// Encodes a raster as an in-memory netpbm byte stream.
pub fn encode_netpbm(magic: &[u8; 2], width: u32, height: u32, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() + 20);
    out.extend_from_slice(magic);
    out.extend_from_slice(format!("\n{width} {height}\n255\n").as_bytes());
    out.extend_from_slice(data);
    out
}

fn write_netpbm(
    path: &Path,
    magic: &[u8; 2],
    width: u32,
    height: u32,
    data: &[u8],
    channels: usize,
) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput(format!(
            "refusing to write empty {width}x{height} raster to {}",
            path.display()
        )));
    }
    debug_assert_eq!(data.len(), width as usize * height as usize * channels);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&encode_netpbm(magic, width, height, data))
        .map_err(|e| Error::io(path, e))
}

fn decode_netpbm(
    bytes: &[u8],
    magic: &[u8; 2],
    channels: usize,
) -> std::result::Result<(u32, u32, Vec<u8>), String> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(format!(
            "expected magic {}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&bytes[..bytes.len().min(2)])
        ));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("header value out of range")?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}, expected 255"));
    }
    if width == 0 || height == 0 {
        return Err(format!("empty raster {width}x{height}"));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("missing separator after header".into());
    }
    pos += 1;
    let len = width as usize * height as usize * channels;
    let data = bytes.get(pos..pos + len).ok_or("truncated pixel data")?;
    Ok((width, height, data.to_vec()))
}
