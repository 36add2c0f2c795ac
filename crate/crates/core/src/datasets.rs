//! Procedural composite-texture images with tile ground truth.
//!
//! A composite is a mosaic of texture tiles (a vertical split, 2x2 or 4x4).
//! With `equal_mean`, every tile is shifted to the same mean gray level, so
//! tiles can only be told apart by their texture.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ::image::GrayImage;
use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::GroundTruth;
use crate::rng::{mix64, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextureKind {
    /// Sinusoidal grating.
    Grating,
    /// Square checkerboard; one cycle spans two cells.
    Checkerboard,
    /// Independent uniform noise.
    Noise,
    Constant,
}

impl fmt::Display for TextureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TextureKind::Grating => "grating",
            TextureKind::Checkerboard => "checker",
            TextureKind::Noise => "noise",
            TextureKind::Constant => "constant",
        })
    }
}

impl FromStr for TextureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grating" => Ok(TextureKind::Grating),
            "checker" | "checkerboard" => Ok(TextureKind::Checkerboard),
            "noise" => Ok(TextureKind::Noise),
            "constant" => Ok(TextureKind::Constant),
            other => Err(Error::input(format!("unknown texture kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureSpec {
    pub kind: TextureKind,
    /// Cycles per pixel along the texture direction.
    pub frequency: f64,
    /// Radians.
    pub orientation: f64,
    /// Mean gray level.
    pub mean: f64,
    pub amplitude: f64,
    pub noise_seed: u64,
}

impl TextureSpec {
    pub fn constant(level: f64) -> Self {
        TextureSpec {
            kind: TextureKind::Constant,
            frequency: 0.0,
            orientation: 0.0,
            mean: level,
            amplitude: 0.0,
            noise_seed: 0,
        }
    }

    fn sample(&self, x: usize, y: usize, rng: &mut impl Rng) -> f64 {
        let (sin, cos) = self.orientation.sin_cos();
        let (xf, yf) = (x as f64, y as f64);
        let u = xf * cos + yf * sin;
        let v = -xf * sin + yf * cos;
        match self.kind {
            TextureKind::Grating => self.mean + self.amplitude * (2.0 * PI * self.frequency * u).sin(),
            TextureKind::Checkerboard => {
                let cells = 2.0 * self.frequency;
                let parity = ((u * cells).floor() + (v * cells).floor()).rem_euclid(2.0);
                if parity < 1.0 {
                    self.mean + self.amplitude
                } else {
                    self.mean - self.amplitude
                }
            }
            TextureKind::Noise => self.mean + self.amplitude * rng.gen_range(-1.0..=1.0),
            TextureKind::Constant => self.mean,
        }
    }
}

/// `kind:frequency:orientation:mean:amplitude:noise_seed`
impl fmt::Display for TextureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}:{}:{}:{}",
            self.kind, self.frequency, self.orientation, self.mean, self.amplitude, self.noise_seed
        )
    }
}

impl FromStr for TextureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 6 {
            return Err(Error::input(format!(
                "texture spec '{s}' must have 6 ':'-separated fields"
            )));
        }
        let num = |i: usize| -> Result<f64> {
            parts[i]
                .parse()
                .map_err(|_| Error::input(format!("bad number '{}' in texture spec", parts[i])))
        };
        Ok(TextureSpec {
            kind: parts[0].parse()?,
            frequency: num(1)?,
            orientation: num(2)?,
            mean: num(3)?,
            amplitude: num(4)?,
            noise_seed: parts[5]
                .parse()
                .map_err(|_| Error::input(format!("bad noise seed '{}'", parts[5])))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    VerticalSplit,
    Grid2x2,
    Grid4x4,
}

impl Layout {
    /// Tiles per side `(columns, rows)`.
    pub fn tiles(self) -> (usize, usize) {
        match self {
            Layout::VerticalSplit => (2, 1),
            Layout::Grid2x2 => (2, 2),
            Layout::Grid4x4 => (4, 4),
        }
    }

    pub fn tile_count(self) -> usize {
        let (c, r) = self.tiles();
        c * r
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::VerticalSplit => "vsplit",
            Layout::Grid2x2 => "2x2",
            Layout::Grid4x4 => "4x4",
        })
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vsplit" | "vertical" => Ok(Layout::VerticalSplit),
            "2x2" => Ok(Layout::Grid2x2),
            "4x4" => Ok(Layout::Grid4x4),
            other => Err(Error::input(format!(
                "unknown layout '{other}' (expected vsplit, 2x2 or 4x4)"
            ))),
        }
    }
}

/// Everything that determines a composite.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeConfig {
    pub width: usize,
    pub height: usize,
    pub layout: Layout,
    /// One spec per tile, row-major.
    pub specs: Vec<TextureSpec>,
    pub seed: u64,
    /// Shift every tile to the mean of the first spec.
    pub equal_mean: bool,
    /// Maximum random offset, in pixels, of each interior tile boundary.
    pub jitter: usize,
}

pub struct Composite {
    pub image: GrayImage,
    pub ground_truth: GroundTruth,
}

/// Tile boundaries along one axis: `n + 1` cut positions from 0 to `len`.
fn cuts(len: usize, n: usize, jitter: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut out = vec![0];
    for i in 1..n {
        let base = (i * len) as f64 / n as f64;
        let offset = if jitter > 0 {
            rng.gen_range(-(jitter as i64)..=jitter as i64) as f64
        } else {
            0.0
        };
        let prev = *out.last().unwrap();
        let c = (base + offset).round().clamp(prev as f64 + 1.0, (len - (n - i)) as f64);
        out.push(c as usize);
    }
    out.push(len);
    out
}

/// Renders the mosaic and its tile ground truth. Deterministic in `config`.
pub fn generate_composite(config: &CompositeConfig) -> Result<Composite> {
    let (cols, rows) = config.layout.tiles();
    if config.specs.len() != config.layout.tile_count() {
        return Err(Error::input(format!(
            "layout {} needs {} texture specs, got {}",
            config.layout,
            config.layout.tile_count(),
            config.specs.len()
        )));
    }
    let (w, h) = (config.width, config.height);
    if w < cols || h < rows {
        return Err(Error::input(format!(
            "{w}x{h} is too small for layout {}",
            config.layout
        )));
    }
    let mut rng = rng_from_seed(mix64(config.seed));
    let xs = cuts(w, cols, config.jitter, &mut rng);
    let ys = cuts(h, rows, config.jitter, &mut rng);

    let mut values = vec![0.0f64; w * h];
    let mut regions = vec![0u32; w * h];
    let target = config.specs[0].mean;
    for ty in 0..rows {
        for tx in 0..cols {
            let tile = ty * cols + tx;
            let spec = &config.specs[tile];
            let mut noise = rng_from_seed(mix64(config.seed ^ mix64(spec.noise_seed)) ^ tile as u64);
            let mut sum = 0.0;
            let mut count = 0usize;
            for y in ys[ty]..ys[ty + 1] {
                for x in xs[tx]..xs[tx + 1] {
                    let v = spec.sample(x, y, &mut noise);
                    values[y * w + x] = v;
                    regions[y * w + x] = tile as u32;
                    sum += v;
                    count += 1;
                }
            }
            if config.equal_mean {
                let shift = target - sum / count as f64;
                for y in ys[ty]..ys[ty + 1] {
                    for x in xs[tx]..xs[tx + 1] {
                        values[y * w + x] += shift;
                    }
                }
            }
        }
    }
    let pixels: Vec<u8> = values
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    let image = GrayImage::from_raw(w as u32, h as u32, pixels).expect("buffer sized to w*h");
    Ok(Composite {
        image,
        ground_truth: GroundTruth::new(w, h, regions)?,
    })
}

/// Two distinct random textures for an equal-mean pair, derived from `seed`.
///
/// Amplitudes stay within `[20, 45]` around a mean of 128, so nothing clips.
pub fn random_texture_pair(seed: u64) -> [TextureSpec; 2] {
    let mut rng = rng_from_seed(mix64(seed ^ 0x7E57_u64));
    let kinds = [TextureKind::Grating, TextureKind::Checkerboard, TextureKind::Noise];
    let first = kinds[rng.gen_range(0..kinds.len())];
    let mut second = kinds[rng.gen_range(0..kinds.len())];
    let mut a = random_texture(first, &mut rng);
    let mut b = random_texture(second, &mut rng);
    if first == second {
        // Same family: force a clearly different orientation and frequency.
        b.orientation = a.orientation + PI / 2.0;
        b.frequency = if a.frequency > 0.15 { a.frequency * 0.5 } else { a.frequency * 2.0 };
        if first == TextureKind::Noise {
            second = TextureKind::Grating;
            b = random_texture(second, &mut rng);
        }
    }
    a.noise_seed = rng.gen();
    b.noise_seed = rng.gen();
    [a, b]
}

fn random_texture(kind: TextureKind, rng: &mut impl Rng) -> TextureSpec {
    TextureSpec {
        kind,
        frequency: rng.gen_range(0.06..0.25),
        orientation: rng.gen_range(0.0..PI),
        mean: 128.0,
        amplitude: rng.gen_range(20.0..45.0),
        noise_seed: 0,
    }
}

/// Equal-mean composite of the two textures of [`random_texture_pair`]`(seed)`,
/// laid out like a checkerboard over the layout's tiles, with cuts jittered by
/// a quarter of the tile size.
pub fn two_texture_config(seed: u64, width: usize, height: usize, layout: Layout) -> CompositeConfig {
    let [a, b] = random_texture_pair(seed);
    let (cols, rows) = layout.tiles();
    let specs = (0..rows * cols)
        .map(|i| if (i / cols + i % cols) % 2 == 0 { a } else { b })
        .collect();
    CompositeConfig {
        width,
        height,
        layout,
        specs,
        seed,
        equal_mean: true,
        jitter: (width / cols).min(height / rows) / 4,
    }
}
