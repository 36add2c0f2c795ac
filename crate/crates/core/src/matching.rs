//! Spatially constrained PatchMatch.
//!
//! Each pixel `p` keeps one correspondence inside its search window
//! `V(p)` (Chebyshev radius `step` around `p`) and outside its exclusion zone
//! (Chebyshev radius `sigma`). The field is refined by scan-order propagation
//! and random search in shrinking boxes around the current match. A
//! candidate replaces the incumbent only if strictly cheaper.

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::PixelPos;
use crate::rng::{rng_from_seed, RunRng};

/// A scored candidate. `fixed` is the part of `total` that does not depend on
/// mutable clustering state (typically the patch distance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub total: f64,
    pub fixed: f64,
}

/// Cost of matching pixel `p` to candidate position `q`.
///
/// `visited` is called once per pixel per iteration, right after the pixel's
/// match has been refined. Costs that depend on mutable clustering state use
/// it to apply their updates, and implement `rescore` so the incumbent match
/// can be re-priced against the current state from its cached `fixed` part.
pub trait MatchCost {
    fn score(&self, p: PixelPos, q: PixelPos) -> Score;

    fn cost(&self, p: PixelPos, q: PixelPos) -> f64 {
        self.score(p, q).total
    }

    /// `score(p, q)` if its total is strictly below `bound`, else `None`.
    /// Implementations may stop computing once the bound is provably reached,
    /// but must return exactly `score(p, q)` otherwise.
    fn score_below(&self, p: PixelPos, q: PixelPos, bound: f64) -> Option<Score> {
        let sc = self.score(p, q);
        (sc.total < bound).then_some(sc)
    }

    /// Current total for a stored match, or `None` if costs never change.
    fn rescore(&self, _p: PixelPos, _q: PixelPos, _fixed: f64) -> Option<f64> {
        None
    }

    fn visited(&mut self, _p: PixelPos, _matched: PixelPos) {}
}

/// Adapts a plain closure into a frozen cost.
pub struct CostFn<F>(pub F);

impl<F: Fn(PixelPos, PixelPos) -> f64> MatchCost for CostFn<F> {
    fn score(&self, p: PixelPos, q: PixelPos) -> Score {
        let total = (self.0)(p, q);
        Score { total, fixed: total }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Search window half-size (the grid step).
    pub step: usize,
    /// Exclusion radius; candidates need Chebyshev distance `> sigma`.
    pub sigma: usize,
    pub seed: u64,
    /// Random-search radius shrink ratio.
    pub alpha: f64,
}

impl SearchConfig {
    pub fn new(step: usize, sigma: usize, seed: u64) -> Self {
        SearchConfig {
            step,
            sigma,
            seed,
            alpha: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.step == 0 {
            return Err(Error::config("search step must be >= 1"));
        }
        if self.sigma >= self.step {
            return Err(Error::config(format!(
                "exclusion radius {} must be smaller than the search step {}",
                self.sigma, self.step
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!(
                "shrink ratio must be in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Random-search radii: `step, step*alpha, ...` while `>= 1`, floored.
    pub fn radii(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut r = self.step as f64;
        while r >= 1.0 {
            out.push(r as usize);
            r *= self.alpha;
        }
        out
    }

    /// Whether `q` is an admissible correspondence for `p`.
    #[inline]
    pub fn admissible(&self, p: PixelPos, q: PixelPos) -> bool {
        let d = p.chebyshev(q);
        d > self.sigma && d <= self.step
    }
}

/// Per-pixel best correspondence and its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchField {
    width: usize,
    height: usize,
    matches: Vec<PixelPos>,
    costs: Vec<f64>,
    fixed: Vec<f64>,
}

impl MatchField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn match_of(&self, p: PixelPos) -> PixelPos {
        self.matches[p.y * self.width + p.x]
    }

    #[inline]
    pub fn cost_of(&self, p: PixelPos) -> f64 {
        self.costs[p.y * self.width + p.x]
    }

    pub fn matches(&self) -> &[PixelPos] {
        &self.matches
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn mean_cost(&self) -> f64 {
        self.costs.iter().sum::<f64>() / self.costs.len() as f64
    }
}

#[derive(Debug, Clone, Copy)]
struct Span {
    lo: usize,
    hi: usize,
}

impl Span {
    fn around(c: usize, r: usize, len: usize) -> Span {
        Span {
            lo: c.saturating_sub(r),
            hi: (c + r).min(len - 1),
        }
    }

    fn len(self) -> usize {
        self.hi - self.lo + 1
    }

    fn contains(self, v: usize) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn intersect(self, other: Span) -> Option<Span> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Span { lo, hi })
    }
}

/// A PatchMatch run: the field, its random stream and an evaluation counter.
#[derive(Debug, Clone)]
pub struct PatchMatcher {
    config: SearchConfig,
    field: MatchField,
    radii: Vec<usize>,
    rng: RunRng,
    evaluations: u64,
    rescores: u64,
}

impl PatchMatcher {
    /// Draws, for every pixel, a uniform admissible candidate and evaluates
    /// it.
    pub fn random_init(
        width: usize,
        height: usize,
        config: SearchConfig,
        cost: &impl MatchCost,
    ) -> Result<Self> {
        config.validate()?;
        if width == 0 || height == 0 {
            return Err(Error::input("empty image"));
        }
        let mut rng = rng_from_seed(config.seed);
        let mut matches = Vec::with_capacity(width * height);
        let mut costs = Vec::with_capacity(width * height);
        let mut fixed = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let p = PixelPos::new(x, y);
                let q = draw_admissible(p, width, height, &config, &mut rng).ok_or_else(|| {
                    Error::config(format!(
                        "pixel ({x}, {y}) has no admissible candidate in a {width}x{height} \
                         image with step {} and sigma {}",
                        config.step, config.sigma
                    ))
                })?;
                let sc = cost.score(p, q);
                matches.push(q);
                costs.push(sc.total);
                fixed.push(sc.fixed);
            }
        }
        Ok(PatchMatcher {
            radii: config.radii(),
            config,
            field: MatchField {
                width,
                height,
                matches,
                costs,
                fixed,
            },
            rng,
            evaluations: (width * height) as u64,
            rescores: 0,
        })
    }

    pub fn field(&self) -> &MatchField {
        &self.field
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    /// Number of random-search radii tested per pixel.
    pub fn radii(&self) -> &[usize] {
        &self.radii
    }

    /// Candidate evaluations so far, including initialization.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Incumbent re-pricings from cached fixed parts (no patch comparison).
    pub fn rescores(&self) -> u64 {
        self.rescores
    }

    fn in_bounds(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.field.width && (y as usize) < self.field.height
    }

    fn try_candidate(&mut self, p: PixelPos, q: PixelPos, cost: &impl MatchCost) -> bool {
        let i = p.y * self.field.width + p.x;
        if q == self.field.matches[i] || !self.config.admissible(p, q) {
            return false;
        }
        self.evaluations += 1;
        match cost.score_below(p, q, self.field.costs[i]) {
            Some(sc) => {
                self.field.matches[i] = q;
                self.field.costs[i] = sc.total;
                self.field.fixed[i] = sc.fixed;
                true
            }
            None => false,
        }
    }

    /// Tests the shifted matches of the two scan-order predecessors of `p`:
    /// left and up when `forward`, right and down otherwise.
    pub fn propagate(&mut self, p: PixelPos, forward: bool, cost: &impl MatchCost) -> bool {
        let step: isize = if forward { -1 } else { 1 };
        let mut improved = false;
        for (dx, dy) in [(step, 0), (0, step)] {
            let (qx, qy) = (p.x as isize + dx, p.y as isize + dy);
            if !self.in_bounds(qx, qy) {
                continue;
            }
            let m = self.field.match_of(PixelPos::new(qx as usize, qy as usize));
            // match(q) + (p - q)
            let (cx, cy) = (m.x as isize - dx, m.y as isize - dy);
            if !self.in_bounds(cx, cy) {
                continue;
            }
            improved |= self.try_candidate(p, PixelPos::new(cx as usize, cy as usize), cost);
        }
        improved
    }

    /// One uniform draw per radius in the box around the current match,
    /// restricted to the image and to `V(p)`; kept if admissible and strictly
    /// cheaper.
    pub fn random_search(&mut self, p: PixelPos, cost: &impl MatchCost) -> bool {
        let (w, h) = (self.field.width, self.field.height);
        let window_x = Span::around(p.x, self.config.step, w);
        let window_y = Span::around(p.y, self.config.step, h);
        let mut improved = false;
        for k in 0..self.radii.len() {
            let r = self.radii[k];
            let center = self.field.match_of(p);
            let bx = Span::around(center.x, r, w).intersect(window_x);
            let by = Span::around(center.y, r, h).intersect(window_y);
            let (Some(bx), Some(by)) = (bx, by) else {
                continue;
            };
            let q = PixelPos::new(
                self.rng.gen_range(bx.lo..=bx.hi),
                self.rng.gen_range(by.lo..=by.hi),
            );
            improved |= self.try_candidate(p, q, cost);
        }
        improved
    }

    /// One full scan: forward on even `iteration`, backward on odd. Each pixel
    /// gets its incumbent re-priced (when the cost supports it), then
    /// propagation, random search and `cost.visited`.
    pub fn pm_iteration(&mut self, iteration: usize, cost: &mut impl MatchCost) {
        let (w, h) = (self.field.width, self.field.height);
        let forward = iteration.is_multiple_of(2);
        for row in 0..h {
            let y = if forward { row } else { h - 1 - row };
            for col in 0..w {
                let x = if forward { col } else { w - 1 - col };
                let p = PixelPos::new(x, y);
                let i = y * w + x;
                if let Some(c) = cost.rescore(p, self.field.matches[i], self.field.fixed[i]) {
                    self.field.costs[i] = c;
                    self.rescores += 1;
                }
                self.propagate(p, forward, cost);
                self.random_search(p, cost);
                let m = self.field.match_of(p);
                cost.visited(p, m);
            }
        }
    }

    /// Checks that every stored match is in bounds and admissible.
    pub fn check_validity(&self) -> Result<()> {
        for y in 0..self.field.height {
            for x in 0..self.field.width {
                let p = PixelPos::new(x, y);
                let q = self.field.match_of(p);
                if q.x >= self.field.width || q.y >= self.field.height {
                    return Err(Error::invariant(format!(
                        "match ({}, {}) of ({x}, {y}) is out of bounds",
                        q.x, q.y
                    )));
                }
                if !self.config.admissible(p, q) {
                    return Err(Error::invariant(format!(
                        "match ({}, {}) of ({x}, {y}) violates the window or exclusion zone",
                        q.x, q.y
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Uniform draw over the admissible set of `p`, or `None` if it is empty.
fn draw_admissible(
    p: PixelPos,
    width: usize,
    height: usize,
    config: &SearchConfig,
    rng: &mut RunRng,
) -> Option<PixelPos> {
    let bx = Span::around(p.x, config.step, width);
    let by = Span::around(p.y, config.step, height);
    let ex = Span::around(p.x, config.sigma, width);
    let ey = Span::around(p.y, config.sigma, height);
    let row_count = |y: usize| {
        if ey.contains(y) {
            bx.len() - ex.len()
        } else {
            bx.len()
        }
    };
    let total: usize = (by.lo..=by.hi).map(row_count).sum();
    if total == 0 {
        return None;
    }
    let mut idx = rng.gen_range(0..total);
    for y in by.lo..=by.hi {
        let n = row_count(y);
        if idx >= n {
            idx -= n;
            continue;
        }
        if !ey.contains(y) {
            return Some(PixelPos::new(bx.lo + idx, y));
        }
        let left = ex.lo - bx.lo;
        let x = if idx < left {
            bx.lo + idx
        } else {
            ex.hi + 1 + (idx - left)
        };
        return Some(PixelPos::new(x, y));
    }
    unreachable!("index within total count")
}
