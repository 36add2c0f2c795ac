//! Feature-space images, patches and label maps.
//!
//! Color inputs are converted to CIELab (D65). Grayscale inputs keep a single
//! lightness channel scaled to `[0, 100]` so both kinds of images share the
//! same distance scale.

use std::path::Path;

use ::image::{GrayImage, RgbImage};

use crate::error::{Error, Result};

/// A pixel coordinate: `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PixelPos {
    pub x: usize,
    pub y: usize,
}

impl PixelPos {
    pub const fn new(x: usize, y: usize) -> Self {
        PixelPos { x, y }
    }

    /// Chebyshev (L-infinity) distance.
    pub fn chebyshev(self, other: PixelPos) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

/// Square patch geometry. `side` is odd, so the patch has a center pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchSpec {
    side: usize,
}

impl PatchSpec {
    pub fn new(side: usize) -> Result<Self> {
        if side == 0 || side.is_multiple_of(2) {
            return Err(Error::input(format!(
                "patch side must be odd and >= 1, got {side}"
            )));
        }
        Ok(PatchSpec { side })
    }

    pub fn side(self) -> usize {
        self.side
    }

    pub fn half(self) -> usize {
        self.side / 2
    }

    /// Number of pixels in the patch.
    pub fn n(self) -> usize {
        self.side * self.side
    }
}

impl Default for PatchSpec {
    fn default() -> Self {
        PatchSpec { side: 7 }
    }
}

/// Image in feature space: CIELab (3 channels) or lightness only (1 channel).
///
/// Samples are stored channel-interleaved, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl LabImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::input(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::input(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(LabImage {
            width,
            height,
            channels,
            data,
        })
    }

    /// Converts a packed 8-bit sRGB buffer to CIELab.
    pub fn from_rgb_bytes(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if width == 0 || height == 0 || rgb.len() != width * height * 3 {
            return Err(Error::input(format!(
                "RGB raster of {} bytes does not match {width}x{height}x3",
                rgb.len()
            )));
        }
        let table = srgb_linear_table();
        let mut data = Vec::with_capacity(rgb.len());
        for px in rgb.chunks_exact(3) {
            let lab = linear_rgb_to_lab([
                table[px[0] as usize],
                table[px[1] as usize],
                table[px[2] as usize],
            ]);
            data.extend(lab.iter().map(|&v| v as f32));
        }
        LabImage::new(width, height, 3, data)
    }

    /// Maps gray levels linearly to lightness: `L = 100 * v / 255`.
    pub fn from_gray_bytes(width: usize, height: usize, gray: &[u8]) -> Result<Self> {
        if width == 0 || height == 0 || gray.len() != width * height {
            return Err(Error::input(format!(
                "gray raster of {} bytes does not match {width}x{height}",
                gray.len()
            )));
        }
        let data = gray.iter().map(|&v| gray_to_lightness(v)).collect();
        LabImage::new(width, height, 1, data)
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        LabImage::from_rgb_bytes(img.width() as usize, img.height() as usize, img.as_raw())
            .expect("RgbImage buffers are well formed")
    }

    pub fn from_gray8(img: &GrayImage) -> Self {
        LabImage::from_gray_bytes(img.width() as usize, img.height() as usize, img.as_raw())
            .expect("GrayImage buffers are well formed")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn contains(&self, p: PixelPos) -> bool {
        p.x < self.width && p.y < self.height
    }

    #[inline]
    pub fn index(&self, p: PixelPos) -> usize {
        p.y * self.width + p.x
    }

    /// Channel values of one pixel.
    #[inline]
    pub fn pixel(&self, p: PixelPos) -> &[f32] {
        let i = self.index(p) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    fn clamped(&self, x: isize, y: isize) -> &[f32] {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.pixel(PixelPos { x, y })
    }

    fn patch_is_interior(&self, p: PixelPos, half: usize) -> bool {
        p.x >= half && p.y >= half && p.x + half < self.width && p.y + half < self.height
    }

    /// The `side x side` neighborhood of `center`, channel-interleaved per
    /// pixel and row-major over the window. Out-of-image coordinates are
    /// clamped to the nearest valid pixel.
    pub fn patch_at(&self, center: PixelPos, spec: PatchSpec) -> Vec<f32> {
        let half = spec.half() as isize;
        let mut out = Vec::with_capacity(spec.n() * self.channels);
        for dy in -half..=half {
            for dx in -half..=half {
                out.extend_from_slice(
                    self.clamped(center.x as isize + dx, center.y as isize + dy),
                );
            }
        }
        out
    }

    /// Squared L2 distance between the patches at `a` and `b`, over all
    /// channels.
    pub fn patch_ssd(&self, a: PixelPos, b: PixelPos, spec: PatchSpec) -> f64 {
        self.patch_ssd_until(a, b, spec, |_| false)
            .expect("never stopped early")
    }

    /// [`patch_ssd`](Self::patch_ssd) that gives up, returning `None`, as soon
    /// as `stop` accepts a partial sum. Partial sums are checked after each
    /// patch row and never decrease, so a stop implies the full sum would
    /// satisfy any monotone threshold as well. A completed sum is bit-identical
    /// to `patch_ssd`.
    pub fn patch_ssd_until(
        &self,
        a: PixelPos,
        b: PixelPos,
        spec: PatchSpec,
        stop: impl Fn(f64) -> bool,
    ) -> Option<f64> {
        let half = spec.half();
        if self.patch_is_interior(a, half) && self.patch_is_interior(b, half) {
            let row_len = spec.side() * self.channels;
            let mut acc = 0.0f32;
            for dy in 0..spec.side() {
                let ra = ((a.y + dy - half) * self.width + a.x - half) * self.channels;
                let rb = ((b.y + dy - half) * self.width + b.x - half) * self.channels;
                let sa = &self.data[ra..ra + row_len];
                let sb = &self.data[rb..rb + row_len];
                acc += sa
                    .iter()
                    .zip(sb)
                    .map(|(u, v)| {
                        let d = u - v;
                        d * d
                    })
                    .sum::<f32>();
                if dy + 1 < spec.side() && stop(acc as f64) {
                    return None;
                }
            }
            return Some(acc as f64);
        }
        let h = half as isize;
        let mut acc = 0.0f64;
        for dy in -h..=h {
            for dx in -h..=h {
                let pa = self.clamped(a.x as isize + dx, a.y as isize + dy);
                let pb = self.clamped(b.x as isize + dx, b.y as isize + dy);
                for (u, v) in pa.iter().zip(pb) {
                    let d = (u - v) as f64;
                    acc += d * d;
                }
            }
            if dy < h && stop(acc) {
                return None;
            }
        }
        Some(acc)
    }

    /// `(1/n) * ||P(a) - P(b)||_2` with `n` the patch pixel count.
    pub fn patch_distance(&self, a: PixelPos, b: PixelPos, spec: PatchSpec) -> f64 {
        if a == b {
            return 0.0;
        }
        self.patch_ssd(a, b, spec).sqrt() / spec.n() as f64
    }

    /// Mean squared difference between the patches at `a` and `b`:
    /// `|P(a) - P(b)|_2^2 / n`.
    pub fn patch_msd(&self, a: PixelPos, b: PixelPos, spec: PatchSpec) -> f64 {
        if a == b {
            return 0.0;
        }
        self.patch_ssd(a, b, spec) / spec.n() as f64
    }

    /// Reads an 8-bit gray or RGB PNG / PGM / PPM file.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let dynimg = ::image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        use ::image::DynamicImage::*;
        match dynimg {
            ImageLuma8(g) => Ok(LabImage::from_gray8(&g)),
            ImageRgb8(c) => Ok(LabImage::from_rgb8(&c)),
            other => Err(Error::input(format!(
                "{}: unsupported pixel format {:?} (expected 8-bit gray or RGB)",
                path.display(),
                other.color()
            ))),
        }
    }
}

#[inline]
pub fn gray_to_lightness(v: u8) -> f32 {
    (100.0 * v as f64 / 255.0) as f32
}

fn srgb_linear_table() -> [f64; 256] {
    let mut table = [0.0; 256];
    for (i, t) in table.iter_mut().enumerate() {
        let c = i as f64 / 255.0;
        *t = if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        };
    }
    table
}

// D65 reference white.
const WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];

fn linear_rgb_to_lab([r, g, b]: [f64; 3]) -> [f64; 3] {
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let f = |t: f64| {
        if t > 0.008_856 {
            t.cbrt()
        } else {
            7.787 * t + 16.0 / 116.0
        }
    };
    let fx = f(x / WHITE[0]);
    let fy = f(y / WHITE[1]);
    let fz = f(z / WHITE[2]);
    let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
    [l, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Per-pixel superpixel labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    num_labels: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    /// Builds a map; the label count is `max + 1`.
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input(format!(
                "label map dimensions must be positive, got {width}x{height}"
            )));
        }
        if labels.len() != width * height {
            return Err(Error::input(format!(
                "{} labels do not match {width}x{height}",
                labels.len()
            )));
        }
        let num_labels = labels.iter().max().map_or(0, |&m| m as usize + 1);
        Ok(LabelMap {
            width,
            height,
            num_labels,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, label: u32) -> Self {
        LabelMap::new(width, height, vec![label; width * height]).expect("positive dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Declared label count; every label is below it.
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    #[inline]
    pub fn get(&self, p: PixelPos) -> u32 {
        self.labels[p.y * self.width + p.x]
    }

    /// Sets a label. `label` must already be below `num_labels`.
    #[inline]
    pub(crate) fn set(&mut self, p: PixelPos, label: u32) {
        debug_assert!((label as usize) < self.num_labels);
        self.labels[p.y * self.width + p.x] = label;
    }

    pub fn same_shape(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    /// Number of distinct labels actually present.
    pub fn distinct_labels(&self) -> usize {
        let mut seen = vec![false; self.num_labels];
        self.labels.iter().for_each(|&l| seen[l as usize] = true);
        seen.into_iter().filter(|&s| s).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(width: usize, height: usize) -> LabImage {
        let data = (0..width * height).map(|i| i as f32).collect();
        LabImage::new(width, height, 1, data).unwrap()
    }

    #[test]
    fn black_and_white() {
        let black = LabImage::from_rgb_bytes(1, 1, &[0, 0, 0]).unwrap();
        let [l, a, b] = [black.data[0], black.data[1], black.data[2]];
        assert_eq!(l, 0.0);
        assert!(a.abs() < 0.01 && b.abs() < 0.01);

        let white = LabImage::from_rgb_bytes(1, 1, &[255, 255, 255]).unwrap();
        assert!((white.data[0] - 100.0).abs() < 0.01);
        assert!(white.data[1].abs() < 0.01 && white.data[2].abs() < 0.01);
    }

    #[test]
    fn published_reference_colors() {
        // sRGB -> CIELab (D65, 2 degree observer) reference values.
        let cases: [([u8; 3], [f32; 3]); 4] = [
            ([128, 128, 128], [53.585, 0.0, 0.0]),
            ([255, 0, 0], [53.241, 80.092, 67.203]),
            ([0, 255, 0], [87.735, -86.183, 83.179]),
            ([0, 0, 255], [32.297, 79.188, -107.860]),
        ];
        for (rgb, want) in cases {
            let img = LabImage::from_rgb_bytes(1, 1, &rgb).unwrap();
            for (got, want) in img.data().iter().zip(want) {
                assert!((got - want).abs() < 0.05, "{rgb:?}: {:?} vs {want:?}", img.data());
            }
        }
    }

    #[test]
    fn gray_scaling() {
        let img = LabImage::from_gray_bytes(3, 1, &[0, 255, 51]).unwrap();
        assert_eq!(img.data(), &[0.0, 100.0, 20.0]);
        assert_eq!(img.channels(), 1);
    }

    #[test]
    fn malformed_rasters() {
        assert!(LabImage::from_rgb_bytes(2, 2, &[0; 11]).is_err());
        assert!(LabImage::from_gray_bytes(0, 2, &[]).is_err());
        assert!(LabImage::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(PatchSpec::new(4).is_err());
        assert!(PatchSpec::new(0).is_err());
    }

    #[test]
    fn patch_of_constant_image() {
        let img = LabImage::new(5, 4, 3, vec![7.5; 60]).unwrap();
        let spec = PatchSpec::new(3).unwrap();
        for p in [PixelPos::new(0, 0), PixelPos::new(4, 3), PixelPos::new(2, 2)] {
            assert!(img.patch_at(p, spec).iter().all(|&v| v == 7.5));
        }
    }

    #[test]
    fn unit_patch_is_pixel() {
        let img = ramp(4, 3);
        let spec = PatchSpec::new(1).unwrap();
        assert_eq!(img.patch_at(PixelPos::new(2, 1), spec), vec![6.0]);
    }

    #[test]
    fn corner_patch_replicates_border() {
        let img = ramp(4, 4);
        let spec = PatchSpec::new(3).unwrap();
        let got = img.patch_at(PixelPos::new(0, 0), spec);
        // Brute force: clamp each coordinate independently.
        let mut want = Vec::new();
        for y in -1i32..=1 {
            for x in -1i32..=1 {
                let (cx, cy) = (x.max(0) as usize, y.max(0) as usize);
                want.push((cy * 4 + cx) as f32);
            }
        }
        assert_eq!(got, want);
        assert_eq!(got, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 4.0, 4.0, 5.0]);
    }

    #[test]
    fn interior_patch_is_unclamped() {
        let img = ramp(6, 6);
        let spec = PatchSpec::new(3).unwrap();
        let got = img.patch_at(PixelPos::new(2, 3), spec);
        assert_eq!(got, vec![13.0, 14.0, 15.0, 19.0, 20.0, 21.0, 25.0, 26.0, 27.0]);
    }

    #[test]
    fn patch_distance_against_direct_sum() {
        let data: Vec<f32> = (0..36).map(|i| ((i * 37) % 11) as f32).collect();
        let img = LabImage::new(6, 6, 1, data).unwrap();
        let spec = PatchSpec::new(3).unwrap();
        let (a, b) = (PixelPos::new(1, 1), PixelPos::new(4, 3));
        let (pa, pb) = (img.patch_at(a, spec), img.patch_at(b, spec));
        let ss: f64 = pa
            .iter()
            .zip(&pb)
            .map(|(u, v)| ((u - v) as f64).powi(2))
            .sum();
        let want = ss.sqrt() / 9.0;
        assert!((img.patch_distance(a, b, spec) - want).abs() < 1e-12);
        assert_eq!(img.patch_distance(a, a, spec), 0.0);
    }

    #[test]
    fn patch_distance_two_flat_regions() {
        // Left half 10, right half 30, so interior patches differ by 20 at all 9 pixels.
        let data = (0..64)
            .map(|i| if i % 8 < 4 { 10.0 } else { 30.0 })
            .collect();
        let img = LabImage::new(8, 8, 1, data).unwrap();
        let spec = PatchSpec::new(3).unwrap();
        let d = img.patch_distance(PixelPos::new(1, 3), PixelPos::new(6, 3), spec);
        let oracle = (9.0f64 * 400.0).sqrt() / 9.0;
        assert!((d - oracle).abs() < 1e-12);
    }

    #[test]
    fn label_map_counts() {
        let m = LabelMap::new(2, 2, vec![0, 3, 3, 1]).unwrap();
        assert_eq!(m.num_labels(), 4);
        assert_eq!(m.distinct_labels(), 3);
        assert!(LabelMap::new(2, 2, vec![0; 3]).is_err());
    }
}
