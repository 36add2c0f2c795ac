//! Superpixel statistics, grid initialization, incremental label moves and
//! connectivity post-processing.
//!
//! Color sums are kept in 16.16 fixed point and position sums in integers, so
//! incremental updates agree exactly with a full recomputation.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::image::{LabImage, LabelMap, PixelPos};

const FIXED_SCALE: f64 = 65536.0;

#[inline]
fn to_fixed(v: f32) -> i64 {
    (v as f64 * FIXED_SCALE).round() as i64
}

/// Regularity weight `m_k` policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularity {
    /// `m_k = m0` for every superpixel.
    Constant { m0: f64 },
    /// `m_k = m0 * clamp(sigma_ref / sigma_c, 0.5, 2)`, where `sigma_c` is the
    /// superpixel's color standard deviation (root mean of per-channel
    /// variances). Flat superpixels get a stronger spatial pull.
    ///
    /// This is a heuristic stand-in: the original automatic rule is not
    /// published alongside the algorithm.
    Adaptive { m0: f64, sigma_ref: f64 },
}

impl Default for Regularity {
    fn default() -> Self {
        Regularity::Constant { m0: 10.0 }
    }
}

/// Accumulators for one superpixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SuperpixelStats {
    pub label: u32,
    pub size: usize,
    /// Per-channel color sums, 16.16 fixed point. Unused channels stay zero.
    pub color_sum: [i64; 3],
    /// Per-channel sums of squared fixed-point colors.
    pub color_sq_sum: [i128; 3],
    /// Sums of `x` and `y`.
    pub pos_sum: [u64; 2],
}

impl SuperpixelStats {
    fn add(&mut self, p: PixelPos, color: &[f32]) {
        self.size += 1;
        self.pos_sum[0] += p.x as u64;
        self.pos_sum[1] += p.y as u64;
        for (c, &v) in color.iter().enumerate() {
            let q = to_fixed(v);
            self.color_sum[c] += q;
            self.color_sq_sum[c] += (q as i128) * (q as i128);
        }
    }

    fn remove(&mut self, p: PixelPos, color: &[f32]) {
        self.size -= 1;
        self.pos_sum[0] -= p.x as u64;
        self.pos_sum[1] -= p.y as u64;
        for (c, &v) in color.iter().enumerate() {
            let q = to_fixed(v);
            self.color_sum[c] -= q;
            self.color_sq_sum[c] -= (q as i128) * (q as i128);
        }
    }

    /// Mean color; only the first `channels` entries are meaningful.
    /// Undefined (NaN) for an empty superpixel.
    pub fn mean_color(&self) -> [f64; 3] {
        let n = self.size as f64 * FIXED_SCALE;
        self.color_sum.map(|s| s as f64 / n)
    }

    /// Mean position `(x, y)`.
    pub fn barycenter(&self) -> [f64; 2] {
        let n = self.size as f64;
        [self.pos_sum[0] as f64 / n, self.pos_sum[1] as f64 / n]
    }

    /// Root mean of the per-channel color variances.
    pub fn color_std(&self, channels: usize) -> f64 {
        if self.size == 0 {
            return 0.0;
        }
        let n = self.size as f64;
        let mut var = 0.0;
        for c in 0..channels {
            let mean = self.color_sum[c] as f64 / n;
            let sq = self.color_sq_sum[c] as f64 / n;
            var += (sq - mean * mean).max(0.0);
        }
        (var / channels as f64).sqrt() / FIXED_SCALE
    }
}

/// Grid initialization geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridConfig {
    /// Requested superpixel count.
    pub k: usize,
    /// Block side in pixels.
    pub step: usize,
    pub blocks_x: usize,
    pub blocks_y: usize,
}

impl GridConfig {
    /// `step = max(1, round(sqrt(|I| / K)))`, ties rounded to even.
    pub fn new(width: usize, height: usize, k: usize) -> Result<Self> {
        let area = width * height;
        if k == 0 || k > area {
            return Err(Error::input(format!(
                "superpixel count must be in 1..={area}, got {k}"
            )));
        }
        let step = ((area as f64 / k as f64).sqrt().round_ties_even() as usize).max(1);
        Ok(GridConfig {
            k,
            step,
            blocks_x: width.div_ceil(step),
            blocks_y: height.div_ceil(step),
        })
    }

    pub fn initial_count(&self) -> usize {
        self.blocks_x * self.blocks_y
    }
}

/// Statistics of every superpixel of a label map.
#[derive(Debug, Clone, PartialEq)]
pub struct Superpixels {
    channels: usize,
    regularity: Regularity,
    stats: Vec<SuperpixelStats>,
}

impl Superpixels {
    /// Full pass over `map`. Labels with no pixels get empty stats.
    pub fn recompute(image: &LabImage, map: &LabelMap) -> Result<Self> {
        if !map.same_shape(image.width(), image.height()) {
            return Err(Error::input(format!(
                "label map {}x{} does not match image {}x{}",
                map.width(),
                map.height(),
                image.width(),
                image.height()
            )));
        }
        let mut stats: Vec<SuperpixelStats> = (0..map.num_labels())
            .map(|l| SuperpixelStats {
                label: l as u32,
                ..Default::default()
            })
            .collect();
        for y in 0..map.height() {
            for x in 0..map.width() {
                let p = PixelPos::new(x, y);
                stats[map.get(p) as usize].add(p, image.pixel(p));
            }
        }
        Ok(Superpixels {
            channels: image.channels(),
            regularity: Regularity::default(),
            stats,
        })
    }

    pub fn with_regularity(mut self, regularity: Regularity) -> Self {
        self.regularity = regularity;
        self
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn stats(&self) -> &[SuperpixelStats] {
        &self.stats
    }

    #[inline]
    pub fn get(&self, label: u32) -> &SuperpixelStats {
        &self.stats[label as usize]
    }

    pub fn total_size(&self) -> usize {
        self.stats.iter().map(|s| s.size).sum()
    }

    /// Regularity weight of one superpixel.
    pub fn m_k(&self, label: u32) -> f64 {
        match self.regularity {
            Regularity::Constant { m0 } => m0,
            Regularity::Adaptive { m0, sigma_ref } => {
                let sigma = self.get(label).color_std(self.channels);
                let ratio = if sigma > 0.0 { sigma_ref / sigma } else { 2.0 };
                m0 * ratio.clamp(0.5, 2.0)
            }
        }
    }

    /// Moves `p` from `from` to `to`, updating both accumulators.
    ///
    /// Returns `Ok(false)` and leaves everything untouched when the move
    /// would empty `from`.
    pub fn move_pixel(
        &mut self,
        image: &LabImage,
        map: &mut LabelMap,
        p: PixelPos,
        from: u32,
        to: u32,
    ) -> Result<bool> {
        let current = map.get(p);
        if current != from {
            return Err(Error::invariant(format!(
                "pixel ({}, {}) has label {current}, not {from}",
                p.x, p.y
            )));
        }
        if from == to {
            return Err(Error::invariant(format!(
                "move of pixel ({}, {}) onto its own label {from}",
                p.x, p.y
            )));
        }
        if to as usize >= self.stats.len() {
            return Err(Error::invariant(format!("unknown target label {to}")));
        }
        if self.stats[from as usize].size <= 1 {
            return Ok(false);
        }
        let color = image.pixel(p);
        self.stats[from as usize].remove(p, color);
        self.stats[to as usize].add(p, color);
        map.set(p, to);
        Ok(true)
    }
}

/// Tiles the image into `step x step` blocks (the last row and column may be
/// narrower), labeled in raster order.
pub fn init_grid(image: &LabImage, k: usize) -> Result<(LabelMap, Superpixels, GridConfig)> {
    let grid = GridConfig::new(image.width(), image.height(), k)?;
    let (w, h) = (image.width(), image.height());
    let mut labels = Vec::with_capacity(w * h);
    for y in 0..h {
        let by = y / grid.step;
        labels.extend((0..w).map(|x| (by * grid.blocks_x + x / grid.step) as u32));
    }
    let map = LabelMap::new(w, h, labels)?;
    let stats = Superpixels::recompute(image, &map)?;
    Ok((map, stats, grid))
}

/// Default minimum component size for a grid step: `step^2 / 4`.
pub fn default_min_size(step: usize) -> usize {
    (step * step / 4).max(1)
}

const NEIGHBORS4: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

struct Components {
    /// Component id per pixel.
    ids: Vec<usize>,
    /// Input label of each component.
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

fn label_components(map: &LabelMap) -> Components {
    let (w, h) = (map.width(), map.height());
    let labels = map.labels();
    let mut ids = vec![usize::MAX; w * h];
    let mut comp_labels = Vec::new();
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if ids[start] != usize::MAX {
            continue;
        }
        let id = comp_labels.len();
        let label = labels[start];
        ids[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in NEIGHBORS4 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if ids[j] == usize::MAX && labels[j] == label {
                    ids[j] = id;
                    queue.push_back(j);
                }
            }
        }
        comp_labels.push(label);
        sizes.push(size);
    }
    Components {
        ids,
        labels: comp_labels,
        sizes,
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Makes every label a single 4-connected region.
///
/// Components smaller than `min_size` are absorbed, smallest first, into the
/// largest 4-adjacent region (ties go to the smaller input label, then to the
/// earlier region in raster order). Every remaining component gets its own
/// label; output labels are dense and numbered in raster order of first
/// appearance.
pub fn enforce_connectivity(map: &LabelMap, min_size: usize) -> LabelMap {
    let comps = label_components(map);
    let n = comps.sizes.len();
    let (w, h) = (map.width(), map.height());

    let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for y in 0..h {
        for x in 0..w {
            let a = comps.ids[y * w + x];
            if x + 1 < w {
                let b = comps.ids[y * w + x + 1];
                if a != b {
                    adjacency[a].insert(b);
                    adjacency[b].insert(a);
                }
            }
            if y + 1 < h {
                let b = comps.ids[(y + 1) * w + x];
                if a != b {
                    adjacency[a].insert(b);
                    adjacency[b].insert(a);
                }
            }
        }
    }

    let mut parent: Vec<usize> = (0..n).collect();
    let mut size = comps.sizes.clone();
    // Each root carries the input label of its seed component.
    let mut small: Vec<usize> = (0..n).filter(|&c| comps.sizes[c] < min_size).collect();
    small.sort_by_key(|&c| (comps.sizes[c], c));
    for c in small {
        let root = find(&mut parent, c);
        if size[root] >= min_size {
            // Already grown past the threshold by earlier merges.
            continue;
        }
        let neighbors: Vec<usize> = adjacency[root].iter().copied().collect();
        let mut best: Option<usize> = None;
        for nb in neighbors {
            let r = find(&mut parent, nb);
            if r == root {
                continue;
            }
            best = match best {
                None => Some(r),
                Some(b) => {
                    let key = |c: usize| (std::cmp::Reverse(size[c]), comps.labels[c], c);
                    if key(r) < key(b) {
                        Some(r)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let Some(target) = best else { continue };
        parent[root] = target;
        size[target] += size[root];
        let moved = std::mem::take(&mut adjacency[root]);
        for nb in moved {
            let r = find(&mut parent, nb);
            if r != target {
                adjacency[target].insert(r);
            }
        }
    }

    let mut dense = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut out = Vec::with_capacity(w * h);
    for &id in &comps.ids {
        let root = find(&mut parent, id);
        if dense[root] == u32::MAX {
            dense[root] = next;
            next += 1;
        }
        out.push(dense[root]);
    }
    LabelMap::new(w, h, out).expect("same shape as input")
}

/// Renumbers labels densely in raster order of first appearance.
pub fn relabel_dense(map: &LabelMap) -> LabelMap {
    let mut dense = vec![u32::MAX; map.num_labels()];
    let mut next = 0u32;
    let out = map
        .labels()
        .iter()
        .map(|&l| {
            let d = &mut dense[l as usize];
            if *d == u32::MAX {
                *d = next;
                next += 1;
            }
            *d
        })
        .collect();
    LabelMap::new(map.width(), map.height(), out).expect("same shape as input")
}
