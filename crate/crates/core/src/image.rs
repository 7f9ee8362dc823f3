//! Unit-interval grayscale rasters and their file codecs.
//!
//! Supported on disk: binary PGM (`P5`, maxval 255 or 65535) and grayscale
//! PNG at 8 or 16 bits.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Smallest accepted side length.
pub const MIN_SIDE: usize = 8;

/// Row-major grayscale image whose samples lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Sample depth used when encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    Eight,
    #[default]
    Sixteen,
}

impl BitDepth {
    fn maxval(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65_535,
        }
    }
}

impl Image {
    /// Builds an image from row-major samples, clamping them to `[0, 1]`.
    ///
    /// Fails if a side is shorter than [`MIN_SIDE`], the buffer length does not
    /// match, or a sample is not finite.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} is below the {MIN_SIDE}x{MIN_SIDE} minimum"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!("sample {i} is not finite")));
        }
        let mut img = Image { width, height, data };
        img.clamp();
        Ok(img)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Image::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image::new(width, height, data)
    }

    /// Same dimensions, new samples; used internally where the buffer is
    /// known to have the right length.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Image {
        debug_assert_eq!(data.len(), self.data.len());
        let mut img = Image {
            width: self.width,
            height: self.height,
            data,
        };
        for v in &mut img.data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        img
    }

    fn clamp(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sample with symmetric (half-sample) reflection for out-of-range
    /// coordinates: `-1 -> 0`, `w -> w-1`.
    #[inline]
    pub fn get_reflect(&self, x: isize, y: isize) -> f64 {
        let xi = reflect_index(x, self.width);
        let yi = reflect_index(y, self.height);
        self.data[yi * self.width + xi]
    }

    pub fn same_dims(&self, other: &Image) -> Result<()> {
        if self.width == other.width && self.height == other.height {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(self.width, self.height, other.width, other.height))
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Quantises every sample to the given depth and back.
    pub fn quantized(&self, depth: BitDepth) -> Image {
        let maxval = f64::from(depth.maxval());
        self.with_data(self.data.iter().map(|v| (v * maxval).round() / maxval).collect())
    }

    /// Exact byte view of the samples, used for duplicate detection.
    pub fn sample_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_bits().to_le_bytes()).collect()
    }

    fn quantized_samples(&self, depth: BitDepth) -> Vec<u32> {
        let maxval = f64::from(depth.maxval());
        self.data.iter().map(|v| (v * maxval).round() as u32).collect()
    }

    /// Encodes as binary PGM.
    pub fn to_pgm_bytes(&self, depth: BitDepth) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, depth.maxval()).into_bytes();
        for s in self.quantized_samples(depth) {
            match depth {
                BitDepth::Eight => out.push(s as u8),
                BitDepth::Sixteen => out.extend_from_slice(&(s as u16).to_be_bytes()),
            }
        }
        out
    }

    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Image> {
        let mut pos = 0usize;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Parse("truncated PGM header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if fields[0] != "P5" {
            return Err(Error::Parse(format!("unsupported PGM magic {:?}", fields[0])));
        }
        let parse = |s: &str, what: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| Error::Parse(format!("bad PGM {what}: {s:?}")))
        };
        let width = parse(&fields[1], "width")?;
        let height = parse(&fields[2], "height")?;
        let maxval = parse(&fields[3], "maxval")?;
        if maxval == 0 || maxval > 65_535 {
            return Err(Error::Parse(format!("PGM maxval {maxval} out of range")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let bytes_per = if maxval < 256 { 1 } else { 2 };
        let need = width * height * bytes_per;
        let raster = bytes
            .get(pos..pos + need)
            .ok_or_else(|| Error::Parse("truncated PGM raster".into()))?;
        let scale = maxval as f64;
        let data = if bytes_per == 1 {
            raster.iter().map(|&b| f64::from(b) / scale).collect()
        } else {
            raster
                .chunks_exact(2)
                .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) / scale)
                .collect()
        };
        Image::new(width, height, data)
    }

    /// Encodes as a grayscale PNG.
    pub fn to_png_bytes(&self, depth: BitDepth) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(match depth {
                BitDepth::Eight => png::BitDepth::Eight,
                BitDepth::Sixteen => png::BitDepth::Sixteen,
            });
            let mut writer = enc
                .write_header()
                .map_err(|e| Error::Parse(format!("png encode: {e}")))?;
            let samples = self.quantized_samples(depth);
            let raw: Vec<u8> = match depth {
                BitDepth::Eight => samples.iter().map(|&s| s as u8).collect(),
                BitDepth::Sixteen => samples.iter().flat_map(|&s| (s as u16).to_be_bytes()).collect(),
            };
            writer
                .write_image_data(&raw)
                .map_err(|e| Error::Parse(format!("png encode: {e}")))?;
        }
        Ok(out)
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Image> {
        let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut reader = decoder
            .read_info()
            .map_err(|e| Error::Parse(format!("png decode: {e}")))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| Error::Parse("png too large".into()))?;
        let mut buf = vec![0u8; size];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::Parse(format!("png decode: {e}")))?;
        if info.color_type != png::ColorType::Grayscale {
            return Err(Error::Parse(format!("expected grayscale PNG, got {:?}", info.color_type)));
        }
        let (w, h) = (info.width as usize, info.height as usize);
        let data = match info.bit_depth {
            png::BitDepth::Eight => buf[..w * h].iter().map(|&b| f64::from(b) / 255.0).collect(),
            png::BitDepth::Sixteen => buf[..w * h * 2]
                .chunks_exact(2)
                .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) / 65_535.0)
                .collect(),
            other => return Err(Error::Parse(format!("unsupported PNG bit depth {other:?}"))),
        };
        Image::new(w, h, data)
    }

    /// Loads a PGM or PNG file, chosen by its magic bytes.
    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(b"\x89PNG") {
            Image::from_png_bytes(&bytes)
        } else {
            Image::from_pgm_bytes(&bytes)
        }
    }

    /// Saves by extension: `.png` writes PNG, anything else PGM.
    pub fn save(&self, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
        let path = path.as_ref();
        let bytes = match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("png") => self.to_png_bytes(depth)?,
            _ => self.to_pgm_bytes(depth),
        };
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, _| x as f64 / (w - 1) as f64).unwrap()
    }

    #[test]
    fn rejects_small_and_nonfinite() {
        assert!(Image::filled(7, 8, 0.5).is_err());
        assert!(Image::new(8, 8, vec![0.1; 63]).is_err());
        let mut data = vec![0.1; 64];
        data[5] = f64::NAN;
        assert!(Image::new(8, 8, data).is_err());
    }

    #[test]
    fn clamps_on_construction() {
        let img = Image::new(8, 8, vec![1.5; 64]).unwrap();
        assert!(img.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn reflection_is_half_sample_symmetric() {
        assert_eq!(reflect_index(-1, 5), 0);
        assert_eq!(reflect_index(-2, 5), 1);
        assert_eq!(reflect_index(5, 5), 4);
        assert_eq!(reflect_index(6, 5), 3);
        assert_eq!(reflect_index(13, 5), 3);
    }

    #[test]
    fn pgm_header_with_comment() {
        let mut bytes = b"P5\n# made by hand\n8 8\n255\n".to_vec();
        bytes.extend(std::iter::repeat_n(255u8, 64));
        let img = Image::from_pgm_bytes(&bytes).unwrap();
        assert_eq!(img.width(), 8);
        assert!(img.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn truncated_pgm_is_an_error() {
        let img = ramp(8, 8);
        let bytes = img.to_pgm_bytes(BitDepth::Sixteen);
        assert!(Image::from_pgm_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(Image::from_pgm_bytes(b"P2\n8 8\n255\n").is_err());
    }

    #[test]
    fn png_rejects_garbage() {
        assert!(Image::from_png_bytes(b"\x89PNGnot really").is_err());
    }

    #[test]
    fn save_and_load_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        let img = ramp(16, 9).quantized(BitDepth::Eight);
        for name in ["a.pgm", "a.png"] {
            let p = dir.path().join(name);
            img.save(&p, BitDepth::Eight).unwrap();
            assert_eq!(Image::load(&p).unwrap(), img);
        }
        assert!(Image::load(dir.path().join("missing.pgm")).unwrap_err().is_io());
    }

    proptest! {
        #[test]
        fn codecs_round_trip_quantized(seed in any::<u64>(), w in 8usize..20, h in 8usize..20, sixteen in any::<bool>()) {
            let depth = if sixteen { BitDepth::Sixteen } else { BitDepth::Eight };
            let mut s = seed;
            let img = Image::from_fn(w, h, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            }).unwrap().quantized(depth);
            prop_assert_eq!(&Image::from_pgm_bytes(&img.to_pgm_bytes(depth)).unwrap(), &img);
            prop_assert_eq!(&Image::from_png_bytes(&img.to_png_bytes(depth).unwrap()).unwrap(), &img);
        }
    }
}
