//! File formats: label maps, ground truth, rasters, overlays and manifests.
//!
//! Label maps are stored as 16-bit grayscale PNG (labels up to 65535) or as
//! CSV: a `width,height` header line followed by one line of comma-separated
//! labels per image row. The format is chosen from the file extension; `.csv`
//! selects CSV, anything else PNG.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ::image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::image::LabelMap;
use crate::metrics::GroundTruth;

/// Color painted on superpixel boundaries by [`boundary_overlay`].
pub const HIGHLIGHT: Rgb<u8> = Rgb([255, 0, 0]);

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn image_err(path: &Path) -> impl FnOnce(::image::ImageError) -> Error + '_ {
    move |source| Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_label_map(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_csv(path) {
        fs::write(path, label_map_to_csv(map)).map_err(io_err(path))
    } else {
        let buf = label_map_to_png16(map)?;
        buf.save(path).map_err(image_err(path))
    }
}

pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    if is_csv(path) {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        parse_label_csv(&text, path)
    } else {
        let img = ::image::open(path).map_err(image_err(path))?;
        label_map_from_png(img, path)
    }
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    Ok(GroundTruth::from_label_map(&load_label_map(path)?))
}

pub fn save_ground_truth(gt: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    save_label_map(gt.regions(), path)
}

fn label_map_to_png16(map: &LabelMap) -> Result<ImageBuffer<Luma<u16>, Vec<u16>>> {
    let mut raw = Vec::with_capacity(map.len());
    for &l in map.labels() {
        raw.push(u16::try_from(l).map_err(|_| Error::LabelOverflow { label: l })?);
    }
    Ok(ImageBuffer::from_raw(map.width() as u32, map.height() as u32, raw)
        .expect("buffer length equals width * height"))
}

fn label_map_from_png(img: DynamicImage, path: &Path) -> Result<LabelMap> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let labels: Vec<u32> = match img {
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        other => {
            return Err(Error::input(format!(
                "{}: label maps must be single-channel PNG, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    LabelMap::new(w, h, labels)
}

pub fn label_map_to_csv(map: &LabelMap) -> String {
    let mut out = String::with_capacity(map.len() * 4 + 16);
    let _ = writeln!(out, "{},{}", map.width(), map.height());
    for row in map.labels().chunks(map.width()) {
        for (i, l) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{l}");
        }
        out.push('\n');
    }
    out
}

/// Parses the CSV label format. `path` is only used in error messages.
pub fn parse_label_csv(text: &str, path: &Path) -> Result<LabelMap> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing width,height header".into()))?;
    let dims: Vec<&str> = header.split(',').map(str::trim).collect();
    let [w, h] = dims[..] else {
        return Err(parse_err(1, format!("expected 'width,height', got '{header}'")));
    };
    let width: usize = w
        .parse()
        .map_err(|_| parse_err(1, format!("bad width '{w}'")))?;
    let height: usize = h
        .parse()
        .map_err(|_| parse_err(1, format!("bad height '{h}'")))?;

    let mut labels = Vec::with_capacity(width.saturating_mul(height));
    let mut rows = 0;
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        if rows == height {
            return Err(parse_err(lineno, format!("more than {height} rows")));
        }
        let before = labels.len();
        for field in line.split(',') {
            let field = field.trim();
            let v: u32 = field
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad label '{field}'")))?;
            labels.push(v);
        }
        if labels.len() - before != width {
            return Err(parse_err(
                lineno,
                format!("expected {width} labels, got {}", labels.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != height {
        return Err(parse_err(
            text.lines().count() + 1,
            format!("expected {height} rows, got {rows}"),
        ));
    }
    LabelMap::new(width, height, labels)
}

/// Loads any supported image as 8-bit RGB (grayscale is replicated).
pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    Ok(::image::open(path).map_err(image_err(path))?.to_rgb8())
}

pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.save(path).map_err(image_err(path))
}

pub fn save_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.save(path).map_err(image_err(path))
}

/// Copy of `raster` with every pixel that has a 4-neighbor of a different
/// label painted [`HIGHLIGHT`].
pub fn boundary_overlay(raster: &RgbImage, map: &LabelMap) -> Result<RgbImage> {
    if !map.same_shape(raster.width() as usize, raster.height() as usize) {
        return Err(Error::input(format!(
            "raster {}x{} does not match label map {}x{}",
            raster.width(),
            raster.height(),
            map.width(),
            map.height()
        )));
    }
    let mut out = raster.clone();
    for (x, y) in boundary_pixels(map) {
        out.put_pixel(x as u32, y as u32, HIGHLIGHT);
    }
    Ok(out)
}

/// Pixels with at least one 4-neighbor carrying a different label, in raster
/// order.
pub fn boundary_pixels(map: &LabelMap) -> Vec<(usize, usize)> {
    let (w, h) = (map.width(), map.height());
    let l = map.labels();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let c = l[y * w + x];
            let differs = (x > 0 && l[y * w + x - 1] != c)
                || (x + 1 < w && l[y * w + x + 1] != c)
                || (y > 0 && l[(y - 1) * w + x] != c)
                || (y + 1 < h && l[(y + 1) * w + x] != c);
            if differs {
                out.push((x, y));
            }
        }
    }
    out
}

/// Ordered `key=value` text file. Blank lines and lines starting with `#`
/// are ignored; later duplicates overwrite earlier values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Manifest::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Required value parsed with `FromStr`.
    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::input(format!("manifest is missing '{key}'")))?;
        raw.parse()
            .map_err(|e| Error::input(format!("manifest key '{key}' = '{raw}': {e}")))
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn parse_text(text: &str, path: &Path) -> Result<Self> {
        let mut m = Manifest::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected key=value, got '{line}'"),
            })?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Manifest::parse_text(&text, path)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(io_err(path))
    }
}

/// Path of a sibling file: `dir/stem<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}
