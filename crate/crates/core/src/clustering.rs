//! Nearest-neighbor superpixel clustering.
//!
//! Starting from a regular grid, every pixel searches a correspondence in its
//! window with [`PatchMatcher`] under the clustering cost
//!
//! ```text
//! D(p_i, p_k) = d_P(p_i, p_k)  +  (m_k^2 / s^2) * gamma(p_k, X_k)
//!             + |c(p_i) - mean_c(S_k)|_2  +  (m_k^2 / s^2) * |p_i - X_k|_2^2
//! ```
//!
//! where `S_k` is the superpixel owning `p_k`, `X_k` its barycenter,
//! `gamma(p, X) = 2 s^2 (1 - exp(-|p - X|^2 / s^2))` and `d_P` the patch
//! dissimilarity selected by [`PatchNorm`]. As soon as a pixel's match is
//! refined, the pixel joins the superpixel owning the match.
//!
//! The default `d_P` is the mean squared patch difference
//! `|P(p_i) - P(p_k)|_2^2 / n`. With the unsquared `|.|_2 / n` form the patch
//! term is one to two orders of magnitude below the spatial terms at usual
//! regularities, and the decomposition barely departs from the initial grid;
//! [`PatchNorm::L2OverN`] keeps that form available.
//!
//! [`slic_baseline`] implements the pixel-wise K-means framework with the same
//! color and spatial terms, for comparison.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{LabImage, LabelMap, PatchSpec, PixelPos};
use crate::matching::{MatchCost, PatchMatcher, Score, SearchConfig};
use crate::rng::run_seed;
use crate::state::{default_min_size, enforce_connectivity, init_grid, GridConfig, Regularity, Superpixels};

/// Patch dissimilarity used in the clustering cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PatchNorm {
    /// `|P(a) - P(b)|_2^2 / n`.
    #[default]
    MeanSquared,
    /// `|P(a) - P(b)|_2 / n`.
    L2OverN,
}

impl PatchNorm {
    pub fn distance(self, image: &LabImage, a: PixelPos, b: PixelPos, spec: PatchSpec) -> f64 {
        if a == b {
            return 0.0;
        }
        self.from_ssd(image.patch_ssd(a, b, spec), spec.n())
    }

    /// The dissimilarity of two patches of `n` pixels whose squared L2
    /// distance is `ssd`.
    #[inline]
    pub fn from_ssd(self, ssd: f64, n: usize) -> f64 {
        match self {
            PatchNorm::MeanSquared => ssd / n as f64,
            PatchNorm::L2OverN => ssd.sqrt() / n as f64,
        }
    }
}

impl std::fmt::Display for PatchNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PatchNorm::MeanSquared => "msd",
            PatchNorm::L2OverN => "l2",
        })
    }
}

impl std::str::FromStr for PatchNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "msd" => Ok(PatchNorm::MeanSquared),
            "l2" => Ok(PatchNorm::L2OverN),
            other => Err(Error::input(format!("unknown patch norm '{other}' (msd|l2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnscParams {
    /// Requested number of superpixels.
    pub k: usize,
    /// Patch side in pixels (odd).
    pub patch_side: usize,
    /// Exclusion radius around each pixel.
    pub sigma: usize,
    /// Clustering iterations per estimation.
    pub iterations: usize,
    /// Number of aggregated estimations.
    pub estimations: usize,
    /// Base regularity.
    pub m0: f64,
    /// Use the variance-adaptive regularity instead of a constant one.
    pub adaptive_m: bool,
    /// Reference color deviation for the adaptive regularity.
    pub sigma_ref: f64,
    pub patch_norm: PatchNorm,
    pub seed: u64,
}

impl Default for NnscParams {
    fn default() -> Self {
        NnscParams {
            k: 200,
            patch_side: 7,
            sigma: 3,
            iterations: 8,
            estimations: 4,
            m0: 10.0,
            adaptive_m: false,
            sigma_ref: 10.0,
            patch_norm: PatchNorm::MeanSquared,
            seed: 0,
        }
    }
}

impl NnscParams {
    pub fn regularity(&self) -> Regularity {
        if self.adaptive_m {
            Regularity::Adaptive {
                m0: self.m0,
                sigma_ref: self.sigma_ref,
            }
        } else {
            Regularity::Constant { m0: self.m0 }
        }
    }

    pub fn validate(&self) -> Result<()> {
        PatchSpec::new(self.patch_side)?;
        if self.estimations == 0 {
            return Err(Error::input("at least one estimation is required"));
        }
        if !(self.m0.is_finite() && self.m0 >= 0.0) {
            return Err(Error::input(format!("m0 must be finite and >= 0, got {}", self.m0)));
        }
        if self.adaptive_m && !(self.sigma_ref.is_finite() && self.sigma_ref > 0.0) {
            return Err(Error::input(format!(
                "sigma_ref must be positive, got {}",
                self.sigma_ref
            )));
        }
        Ok(())
    }
}

/// Spatial weighting `2 s^2 (1 - exp(-|p - X|^2 / s^2))`.
pub fn gamma(p: PixelPos, barycenter: [f64; 2], step: usize) -> f64 {
    let s2 = (step * step) as f64;
    2.0 * s2 * (1.0 - (-sq_dist(p, barycenter) / s2).exp())
}

#[inline]
fn sq_dist(p: PixelPos, c: [f64; 2]) -> f64 {
    let dx = p.x as f64 - c[0];
    let dy = p.y as f64 - c[1];
    dx * dx + dy * dy
}

/// Live clustering state: label map, superpixel statistics and the clustering
/// cost bound to them.
#[derive(Debug, Clone)]
pub struct ClusterCost<'a> {
    image: &'a LabImage,
    patch: PatchSpec,
    norm: PatchNorm,
    step: usize,
    map: LabelMap,
    stats: Superpixels,
    moves: u64,
    rejected_moves: u64,
}

impl<'a> ClusterCost<'a> {
    pub fn new(
        image: &'a LabImage,
        map: LabelMap,
        stats: Superpixels,
        patch: PatchSpec,
        step: usize,
    ) -> Self {
        ClusterCost {
            image,
            patch,
            norm: PatchNorm::default(),
            step,
            map,
            stats,
            moves: 0,
            rejected_moves: 0,
        }
    }

    pub fn with_norm(mut self, norm: PatchNorm) -> Self {
        self.norm = norm;
        self
    }

    pub fn norm(&self) -> PatchNorm {
        self.norm
    }

    pub fn map(&self) -> &LabelMap {
        &self.map
    }

    pub fn stats(&self) -> &Superpixels {
        &self.stats
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Accepted label changes so far.
    pub fn moves(&self) -> u64 {
        self.moves
    }

    /// Label changes refused because they would empty a superpixel.
    pub fn rejected_moves(&self) -> u64 {
        self.rejected_moves
    }

    pub fn into_parts(self) -> (LabelMap, Superpixels) {
        (self.map, self.stats)
    }

    /// `m_k^2 / s^2` of the superpixel labeled `label`.
    fn weight(&self, label: u32) -> f64 {
        let m = self.stats.m_k(label);
        m * m / (self.step * self.step) as f64
    }

    /// Patch dissimilarity plus the barycenter-weighted spatial term of `p_k`.
    pub fn patch_term(&self, p_i: PixelPos, p_k: PixelPos) -> f64 {
        let label = self.map.get(p_k);
        let bary = self.stats.get(label).barycenter();
        self.norm.distance(self.image, p_i, p_k, self.patch)
            + self.weight(label) * gamma(p_k, bary, self.step)
    }

    /// Full clustering cost of matching `p_i` to `p_k`.
    pub fn cluster_cost(&self, p_i: PixelPos, p_k: PixelPos) -> f64 {
        self.score(p_i, p_k).total
    }

    /// Every term except the patch dissimilarity; these depend on the
    /// current state of the superpixel owning `p_k`.
    fn state_terms(&self, p_i: PixelPos, p_k: PixelPos) -> f64 {
        let label = self.map.get(p_k);
        let sp = self.stats.get(label);
        let bary = sp.barycenter();
        let w = self.weight(label);
        let color_dist = self
            .image
            .pixel(p_i)
            .iter()
            .zip(sp.mean_color())
            .map(|(&v, m)| {
                let d = v as f64 - m;
                d * d
            })
            .sum::<f64>()
            .sqrt();
        w * gamma(p_k, bary, self.step) + color_dist + w * sq_dist(p_i, bary)
    }
}

impl MatchCost for ClusterCost<'_> {
    fn score(&self, p: PixelPos, q: PixelPos) -> Score {
        let fixed = self.norm.distance(self.image, p, q, self.patch);
        Score {
            total: fixed + self.state_terms(p, q),
            fixed,
        }
    }

    fn score_below(&self, p: PixelPos, q: PixelPos, bound: f64) -> Option<Score> {
        let state = self.state_terms(p, q);
        // The patch term is non-negative, so the total cannot drop below
        // `state`; stop comparing patches once the partial total reaches
        // `bound`.
        if state >= bound {
            return None;
        }
        let fixed = if p == q {
            0.0
        } else {
            let n = self.patch.n();
            let ssd = self.image.patch_ssd_until(p, q, self.patch, |partial| {
                self.norm.from_ssd(partial, n) + state >= bound
            })?;
            self.norm.from_ssd(ssd, n)
        };
        let total = fixed + state;
        (total < bound).then_some(Score { total, fixed })
    }

    fn rescore(&self, p: PixelPos, q: PixelPos, fixed: f64) -> Option<f64> {
        Some(fixed + self.state_terms(p, q))
    }

    fn visited(&mut self, p: PixelPos, matched: PixelPos) {
        let from = self.map.get(p);
        let to = self.map.get(matched);
        if from == to {
            return;
        }
        let moved = self
            .stats
            .move_pixel(self.image, &mut self.map, p, from, to)
            .expect("source label is read from the map");
        if moved {
            self.moves += 1;
        } else {
            self.rejected_moves += 1;
        }
    }
}

/// One clustering estimation, advanced iteration by iteration.
#[derive(Debug, Clone)]
pub struct NnscRun<'a> {
    grid: GridConfig,
    matcher: PatchMatcher,
    cost: ClusterCost<'a>,
    iterations_done: usize,
    iteration_evaluations: Vec<u64>,
}

impl<'a> NnscRun<'a> {
    /// Grid initialization followed by random match initialization.
    pub fn new(image: &'a LabImage, params: &NnscParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let patch = PatchSpec::new(params.patch_side)?;
        let (map, stats, grid) = init_grid(image, params.k)?;
        let stats = stats.with_regularity(params.regularity());
        let cost = ClusterCost::new(image, map, stats, patch, grid.step).with_norm(params.patch_norm);
        let config = SearchConfig::new(grid.step, params.sigma, seed);
        let matcher = PatchMatcher::random_init(image.width(), image.height(), config, &cost)?;
        Ok(NnscRun {
            grid,
            matcher,
            cost,
            iterations_done: 0,
            iteration_evaluations: Vec::new(),
        })
    }

    /// One matching pass with immediate label updates.
    pub fn iterate(&mut self) {
        let before = self.matcher.evaluations();
        self.matcher
            .pm_iteration(self.iterations_done, &mut self.cost);
        self.iteration_evaluations
            .push(self.matcher.evaluations() - before);
        self.iterations_done += 1;
    }

    pub fn grid(&self) -> &GridConfig {
        &self.grid
    }

    pub fn matcher(&self) -> &PatchMatcher {
        &self.matcher
    }

    pub fn cost(&self) -> &ClusterCost<'a> {
        &self.cost
    }

    pub fn iterations_done(&self) -> usize {
        self.iterations_done
    }

    pub fn finish(self) -> RunOutput {
        let init_evaluations = self.matcher.evaluations()
            - self.iteration_evaluations.iter().sum::<u64>();
        RunOutput {
            grid: self.grid,
            moves: self.cost.moves(),
            labels: self.cost.into_parts().0,
            init_evaluations,
            iteration_evaluations: self.iteration_evaluations,
        }
    }
}

/// Result of one estimation, before connectivity enforcement.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub labels: LabelMap,
    pub grid: GridConfig,
    /// Cost evaluations spent by random initialization.
    pub init_evaluations: u64,
    /// Cost evaluations of each iteration.
    pub iteration_evaluations: Vec<u64>,
    pub moves: u64,
}

impl RunOutput {
    pub fn total_evaluations(&self) -> u64 {
        self.init_evaluations + self.iteration_evaluations.iter().sum::<u64>()
    }
}

/// Runs one full estimation with the given seed.
pub fn nnsc_single_run(image: &LabImage, params: &NnscParams, seed: u64) -> Result<RunOutput> {
    let mut run = NnscRun::new(image, params, seed)?;
    for _ in 0..params.iterations {
        run.iterate();
    }
    Ok(run.finish())
}

/// Per-pixel majority vote. Ties go to the label voted by the lowest-index
/// map among the tied labels.
pub fn aggregate(maps: &[LabelMap]) -> Result<LabelMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::input("cannot aggregate zero label maps"))?;
    let (w, h) = (first.width(), first.height());
    if let Some(bad) = maps.iter().find(|m| !m.same_shape(w, h)) {
        return Err(Error::input(format!(
            "label map {}x{} does not match {w}x{h}",
            bad.width(),
            bad.height()
        )));
    }
    if maps.len() == 1 {
        return Ok(first.clone());
    }
    let mut votes = vec![0u32; maps.len()];
    let mut out = Vec::with_capacity(w * h);
    for i in 0..w * h {
        for (a, ma) in maps.iter().enumerate() {
            let la = ma.labels()[i];
            votes[a] = maps.iter().filter(|mb| mb.labels()[i] == la).count() as u32;
        }
        // First index with the maximal count.
        let mut best = 0;
        for a in 1..maps.len() {
            if votes[a] > votes[best] {
                best = a;
            }
        }
        out.push(maps[best].labels()[i]);
    }
    LabelMap::new(w, h, out)
}

/// Final decomposition and the counters of its estimations.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Connected, densely labeled superpixels.
    pub labels: LabelMap,
    pub grid: GridConfig,
    pub runs: Vec<RunOutput>,
}

impl Decomposition {
    pub fn total_evaluations(&self) -> u64 {
        self.runs.iter().map(RunOutput::total_evaluations).sum()
    }
}

/// Runs `params.estimations` independent estimations on the current rayon
/// pool, aggregates them and enforces connectivity.
///
/// Estimation `i` is seeded with [`run_seed`]`(params.seed, i)`, so the result
/// does not depend on how the estimations are scheduled.
pub fn nnsc_decompose(image: &LabImage, params: &NnscParams) -> Result<Decomposition> {
    params.validate()?;
    let runs = (0..params.estimations)
        .into_par_iter()
        .map(|i| nnsc_single_run(image, params, run_seed(params.seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let maps: Vec<LabelMap> = runs.iter().map(|r| r.labels.clone()).collect();
    let voted = aggregate(&maps)?;
    let grid = runs[0].grid;
    Ok(Decomposition {
        labels: enforce_connectivity(&voted, default_min_size(grid.step)),
        grid,
        runs,
    })
}

/// [`nnsc_decompose`] on a dedicated pool of `threads` workers.
pub fn nnsc_decompose_with_threads(
    image: &LabImage,
    params: &NnscParams,
    threads: usize,
) -> Result<Decomposition> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| nnsc_decompose(image, params))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlicOutput {
    /// Connected, densely labeled superpixels.
    pub labels: LabelMap,
    pub grid: GridConfig,
    /// Distance evaluations of each iteration.
    pub iteration_evaluations: Vec<u64>,
}

#[derive(Debug, Clone, Copy)]
struct Center {
    color: [f64; 3],
    pos: [f64; 2],
}

/// Pixel-wise K-means superpixels on the same grid.
///
/// Each iteration, every center scans the `(2s+1)^2` window around its
/// position and offers each pixel the distance
/// `|c(p) - c_k|_2 + (m^2 / s^2) |p - X_k|_2^2`; pixels take the closest
/// center, then centers move to the means of their pixels.
pub fn slic_baseline(image: &LabImage, k: usize, m: f64, iterations: usize) -> Result<SlicOutput> {
    let (mut map, stats, grid) = init_grid(image, k)?;
    let (w, h) = (image.width(), image.height());
    let s = grid.step;
    let weight = m * m / (s * s) as f64;
    let mut centers: Vec<Center> = stats
        .stats()
        .iter()
        .map(|st| Center {
            color: st.mean_color(),
            pos: st.barycenter(),
        })
        .collect();
    let mut dist = vec![f64::INFINITY; w * h];
    let mut iteration_evaluations = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        dist.fill(f64::INFINITY);
        let mut evaluations = 0u64;
        for (label, c) in centers.iter().enumerate() {
            let (cx, cy) = (c.pos[0].round() as isize, c.pos[1].round() as isize);
            let y0 = (cy - s as isize).max(0) as usize;
            let y1 = ((cy + s as isize) as usize).min(h - 1);
            let x0 = (cx - s as isize).max(0) as usize;
            let x1 = ((cx + s as isize) as usize).min(w - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let p = PixelPos::new(x, y);
                    let color = image.pixel(p);
                    let dc: f64 = color
                        .iter()
                        .zip(c.color)
                        .map(|(&v, m)| {
                            let d = v as f64 - m;
                            d * d
                        })
                        .sum();
                    let d = dc.sqrt() + weight * sq_dist(p, c.pos);
                    evaluations += 1;
                    let i = y * w + x;
                    if d < dist[i] {
                        dist[i] = d;
                        map.set(p, label as u32);
                    }
                }
            }
        }
        iteration_evaluations.push(evaluations);

        let mut sums = vec![([0.0f64; 3], [0.0f64; 2], 0usize); centers.len()];
        for y in 0..h {
            for x in 0..w {
                let p = PixelPos::new(x, y);
                let acc = &mut sums[map.get(p) as usize];
                for (ch, &v) in image.pixel(p).iter().enumerate() {
                    acc.0[ch] += v as f64;
                }
                acc.1[0] += x as f64;
                acc.1[1] += y as f64;
                acc.2 += 1;
            }
        }
        for (c, (color, pos, n)) in centers.iter_mut().zip(sums) {
            if n > 0 {
                let n = n as f64;
                c.color = color.map(|v| v / n);
                c.pos = pos.map(|v| v / n);
            }
        }
    }
    Ok(SlicOutput {
        labels: enforce_connectivity(&map, default_min_size(s)),
        grid,
        iteration_evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy(width: usize, height: usize, channels: usize, seed: u64) -> LabImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..width * height * channels)
            .map(|_| rng.gen_range(0.0f32..100.0))
            .collect();
        LabImage::new(width, height, channels, data).unwrap()
    }

    fn state(image: &LabImage, k: usize, m0: f64) -> ClusterCost<'_> {
        let (map, stats, grid) = init_grid(image, k).unwrap();
        let stats = stats.with_regularity(Regularity::Constant { m0 });
        ClusterCost::new(image, map, stats, PatchSpec::new(3).unwrap(), grid.step)
    }

    #[test]
    fn gamma_closed_forms() {
        let p = PixelPos::new(5, 5);
        assert_eq!(gamma(p, [5.0, 5.0], 4), 0.0);
        // |p - X|^2 = s^2 = 16
        let g = gamma(p, [5.0, 9.0], 4);
        assert!((g - 2.0 * 16.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!((g / 16.0 - 1.2642).abs() < 1e-4);
        let far = gamma(p, [5.0e3, 5.0], 4);
        assert!((far - 32.0).abs() < 1e-9);
        let mut prev = 0.0;
        for d in 1..15 {
            let v = gamma(p, [5.0 + d as f64, 5.0], 4);
            assert!(v > prev && v < 32.0);
            prev = v;
        }
    }

    #[test]
    fn cost_vanishes_on_degenerate_configuration() {
        let img = LabImage::new(9, 9, 3, vec![30.0; 243]).unwrap();
        let cost = state(&img, 9, 10.0);
        // 3x3 blocks: superpixel 4 covers 3..6 x 3..6 with barycenter (4, 4).
        let center = PixelPos::new(4, 4);
        assert_eq!(cost.stats().get(4).barycenter(), [4.0, 4.0]);
        assert_eq!(cost.patch_term(center, center), 0.0);
        assert_eq!(cost.patch_term(PixelPos::new(0, 8), center), 0.0);
        assert_eq!(cost.cluster_cost(center, center), 0.0);
    }

    #[test]
    fn zero_regularity_drops_spatial_terms() {
        let img = noisy(12, 12, 3, 1);
        let cost = state(&img, 4, 0.0);
        let spec = PatchSpec::new(3).unwrap();
        let (pi, pk) = (PixelPos::new(1, 2), PixelPos::new(9, 7));
        let mean = cost.stats().get(cost.map().get(pk)).mean_color();
        let dc: f64 = img
            .pixel(pi)
            .iter()
            .zip(mean)
            .map(|(&v, m)| (v as f64 - m).powi(2))
            .sum::<f64>()
            .sqrt();
        let want = img.patch_msd(pi, pk, spec) + dc;
        assert!((cost.cluster_cost(pi, pk) - want).abs() < 1e-9);
    }

    #[test]
    fn cost_matches_term_by_term_oracle() {
        let img = noisy(16, 16, 3, 2);
        let cost = state(&img, 4, 7.0);
        let literal = cost.clone().with_norm(PatchNorm::L2OverN);
        let spec = PatchSpec::new(3).unwrap();
        let s = 8.0f64;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let pi = PixelPos::new(rng.gen_range(0..16), rng.gen_range(0..16));
            let pk = PixelPos::new(rng.gen_range(0..16), rng.gen_range(0..16));
            // Oracle from explicit patch vectors and a from-scratch block mean.
            let (a, b) = (img.patch_at(pi, spec), img.patch_at(pk, spec));
            let ssd = a
                .iter()
                .zip(&b)
                .map(|(u, v)| ((u - v) as f64).powi(2))
                .sum::<f64>();
            let patch = ssd / 9.0;
            let (bx, by) = (pk.x / 8, pk.y / 8);
            let mut mean = [0.0f64; 3];
            for y in by * 8..by * 8 + 8 {
                for x in bx * 8..bx * 8 + 8 {
                    for (c, &v) in img.pixel(PixelPos::new(x, y)).iter().enumerate() {
                        mean[c] += v as f64 / 64.0;
                    }
                }
            }
            let bary = [bx as f64 * 8.0 + 3.5, by as f64 * 8.0 + 3.5];
            let dk2 = (pk.x as f64 - bary[0]).powi(2) + (pk.y as f64 - bary[1]).powi(2);
            let di2 = (pi.x as f64 - bary[0]).powi(2) + (pi.y as f64 - bary[1]).powi(2);
            let gamma_term = 2.0 * s * s * (1.0 - (-dk2 / (s * s)).exp());
            let w = 49.0 / (s * s);
            let dc = img
                .pixel(pi)
                .iter()
                .zip(mean)
                .map(|(&v, m)| (v as f64 - m).powi(2))
                .sum::<f64>()
                .sqrt();
            let want_patch_term = patch + w * gamma_term;
            let want = want_patch_term + dc + w * di2;
            assert!((cost.patch_term(pi, pk) - want_patch_term).abs() < 1e-6 * want.max(1.0));
            assert!((cost.cluster_cost(pi, pk) - want).abs() < 1e-6 * want.max(1.0));
            assert!(cost.cluster_cost(pi, pk) >= 0.0);
            let want_literal = ssd.sqrt() / 9.0 + w * gamma_term + dc + w * di2;
            let got = literal.cluster_cost(pi, pk);
            assert!((got - want_literal).abs() < 1e-6 * want_literal.max(1.0));
            // Re-pricing from the cached patch part reproduces the full cost.
            let sc = cost.score(pi, pk);
            assert_eq!(cost.rescore(pi, pk, sc.fixed), Some(sc.total));
            // Bounded scoring is exact below the bound and rejects at or above it.
            for c in [&cost, &literal] {
                let full = c.score(pi, pk);
                for bound in [full.total * 0.5, full.total, full.total * 1.5 + 1e-9] {
                    let got = c.score_below(pi, pk, bound);
                    if full.total < bound {
                        assert_eq!(got, Some(full));
                    } else {
                        assert_eq!(got, None);
                    }
                }
            }
        }
    }

    #[test]
    fn aggregate_rules() {
        let m = |v: Vec<u32>| LabelMap::new(2, 1, v).unwrap();
        let single = m(vec![3, 4]);
        assert_eq!(aggregate(std::slice::from_ref(&single)).unwrap(), single);

        let maps = [m(vec![5, 1]), m(vec![7, 1]), m(vec![5, 2])];
        assert_eq!(aggregate(&maps).unwrap().labels()[0], 5);

        let tie = [m(vec![9, 0]), m(vec![3, 0]), m(vec![3, 0]), m(vec![9, 0])];
        assert_eq!(aggregate(&tie).unwrap().labels()[0], 9);

        assert!(aggregate(&[]).is_err());
        let other = LabelMap::new(1, 2, vec![0, 0]).unwrap();
        assert!(aggregate(&[single, other]).is_err());
    }

    #[test]
    fn aggregate_tie_break_exhaustive() {
        // All 4^4 vote patterns over labels {0,1,2,3} at a single pixel.
        for code in 0..256u32 {
            let votes: Vec<u32> = (0..4).map(|i| (code >> (2 * i)) & 3).collect();
            let maps: Vec<LabelMap> = votes
                .iter()
                .map(|&l| LabelMap::new(1, 1, vec![l]).unwrap())
                .collect();
            let got = aggregate(&maps).unwrap().labels()[0];
            let count = |l: u32| votes.iter().filter(|&&v| v == l).count();
            let max = (0..4).map(count).max().unwrap();
            let want = *votes.iter().find(|&&v| count(v) == max).unwrap();
            assert_eq!(got, want, "votes {votes:?}");
        }
    }

    #[test]
    fn single_run_keeps_every_superpixel() {
        let img = noisy(40, 32, 3, 4);
        let params = NnscParams {
            k: 20,
            patch_side: 3,
            sigma: 1,
            iterations: 4,
            ..Default::default()
        };
        let out = nnsc_single_run(&img, &params, 11).unwrap();
        assert_eq!(out.labels.distinct_labels(), out.grid.initial_count());
        let again = nnsc_single_run(&img, &params, 11).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn slic_constant_image_near_grid() {
        let img = LabImage::new(32, 32, 1, vec![50.0; 1024]).unwrap();
        let out = slic_baseline(&img, 16, 10.0, 5).unwrap();
        assert_eq!(out.labels.num_labels(), 16);
        let grid = init_grid(&img, 16).unwrap().0;
        assert_eq!(out.labels, grid);
    }

    #[test]
    fn invalid_params() {
        let img = noisy(8, 8, 1, 5);
        let bad = NnscParams {
            k: 4,
            patch_side: 4,
            ..Default::default()
        };
        assert!(nnsc_single_run(&img, &bad, 0).is_err());
        let too_many = NnscParams {
            k: 1000,
            ..Default::default()
        };
        assert!(nnsc_single_run(&img, &too_many, 0).is_err());
    }
}
