//! 8-bit RGB raster buffers and their file formats.
//!
//! Samples are interleaved `RGBRGB...`, row-major, top row first. Binary
//! PPM (`P6`, maxval 255) is the native format; PNG goes through the
//! `image` crate behind the same [`read_image`] / [`write_image`] pair.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::mesh::Rgb;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed PPM: {0}")]
    Ppm(&'static str),
    #[error("png: {0}")]
    Png(#[from] ::image::ImageError),
    #[error("unsupported image format for {0}")]
    UnknownFormat(String),
    #[error("buffer of {len} bytes does not match {width}x{height}x3")]
    BufferSize { len: usize, width: usize, height: usize },
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        let data = color.iter().copied().cycle().take(width * height * 3).collect();
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if data.len() != width * height * 3 {
            return Err(ImageError::BufferSize {
                len: data.len(),
                width,
                height,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Self {
        let mut img = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.set(x, y, f(x, y));
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn as_raw_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: Rgb) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = Rgb> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    pub fn same_dims(&self, other: &RasterImage) -> Result<(), ImageError> {
        if self.width != other.width || self.height != other.height {
            return Err(ImageError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Crop the largest centered square, then resample to `size x size`.
    pub fn center_square(&self, size: usize) -> RasterImage {
        if self.width == size && self.height == size {
            return self.clone();
        }
        let side = self.width.min(self.height);
        let x0 = (self.width - side) / 2;
        let y0 = (self.height - side) / 2;
        let buf = ::image::RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length checked at construction");
        let cropped = ::image::imageops::crop_imm(&buf, x0 as u32, y0 as u32, side as u32, side as u32)
            .to_image();
        let resized = ::image::imageops::resize(
            &cropped,
            size as u32,
            size as u32,
            ::image::imageops::FilterType::Lanczos3,
        );
        RasterImage {
            width: size,
            height: size,
            data: resized.into_raw(),
        }
    }

    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn decode_ppm(bytes: &[u8]) -> Result<Self, ImageError> {
        let mut pos = 0;
        let mut token = || -> Result<&[u8], ImageError> {
            loop {
                match bytes.get(pos) {
                    Some(b'#') => {
                        while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                            pos += 1;
                        }
                    }
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    Some(_) => break,
                    None => return Err(ImageError::Ppm("truncated header")),
                }
            }
            let start = pos;
            while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
                pos += 1;
            }
            Ok(&bytes[start..pos])
        };
        if token()? != b"P6" {
            return Err(ImageError::Ppm("expected P6 magic"));
        }
        let mut number = |what| -> Result<usize, ImageError> {
            std::str::from_utf8(token()?)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or(ImageError::Ppm(what))
        };
        let width = number("bad width")?;
        let height = number("bad height")?;
        if number("bad maxval")? != 255 {
            return Err(ImageError::Ppm("only maxval 255 is supported"));
        }
        // Exactly one whitespace byte separates the header from the raster.
        let start = pos + 1;
        let len = width * height * 3;
        if bytes.len() < start + len {
            return Err(ImageError::Ppm("truncated raster"));
        }
        Self::from_raw(width, height, bytes[start..start + len].to_vec())
    }
}

fn is_ppm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ppm"))
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Reads a PPM or PNG file, dispatching on the file's leading bytes.
pub fn read_image(path: impl AsRef<Path>) -> Result<RasterImage, ImageError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P6") {
        return RasterImage::decode_ppm(&bytes);
    }
    if bytes.starts_with(b"\x89PNG") {
        let img = ::image::load_from_memory_with_format(&bytes, ::image::ImageFormat::Png)?.to_rgb8();
        let (w, h) = img.dimensions();
        return RasterImage::from_raw(w as usize, h as usize, img.into_raw());
    }
    Err(ImageError::UnknownFormat(path.display().to_string()))
}

/// Writes PNG for a `.png` extension and binary PPM otherwise.
pub fn write_image(img: &RasterImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    if is_png(path) {
        ::image::save_buffer(
            path,
            &img.data,
            img.width as u32,
            img.height as u32,
            ::image::ExtendedColorType::Rgb8,
        )?;
        return Ok(());
    }
    if !is_ppm(path) && path.extension().is_some() {
        return Err(ImageError::UnknownFormat(path.display().to_string()));
    }
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    f.write_all(&img.encode_ppm())?;
    f.flush()?;
    Ok(())
}

/// Is this path something [`read_image`] can load?
pub fn is_image_path(path: &Path) -> bool {
    is_ppm(path) || is_png(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_with_comment() {
        let img = RasterImage::from_fn(5, 3, |x, y| [x as u8, y as u8, 7]);
        let mut bytes = b"P6\n# made by hand\n5 3\n255\n".to_vec();
        bytes.extend_from_slice(img.as_raw());
        assert_eq!(RasterImage::decode_ppm(&bytes).unwrap(), img);
        assert_eq!(RasterImage::decode_ppm(&img.encode_ppm()).unwrap(), img);
    }

    #[test]
    fn ppm_rejects_bad_input() {
        assert!(RasterImage::decode_ppm(b"P3\n1 1\n255\n").is_err());
        assert!(RasterImage::decode_ppm(b"P6\n2 2\n255\n\x00\x00").is_err());
        assert!(RasterImage::decode_ppm(b"P6\n1 1\n65535\n\x00\x00\x00").is_err());
    }

    #[test]
    fn file_round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let img = RasterImage::from_fn(9, 9, |x, y| [(x * 20) as u8, (y * 20) as u8, 99]);
        for name in ["a.ppm", "a.png"] {
            let p = dir.path().join(name);
            write_image(&img, &p).unwrap();
            assert_eq!(read_image(&p).unwrap(), img);
        }
    }

    #[test]
    fn center_square_crops_to_size() {
        let img = RasterImage::from_fn(30, 20, |x, _| if !(5..25).contains(&x) { [255, 0, 0] } else { [0, 0, 255] });
        let sq = img.center_square(10);
        assert_eq!((sq.width(), sq.height()), (10, 10));
        assert!(sq.pixels().all(|p| p[2] > 200 && p[0] < 50));
    }
}
