//! Thresholding of an estimated field and circular Hough-transform detection
//! of the resulting high-intensity blobs.
//!
//! Every boundary pixel of the binary map votes, for each candidate radius,
//! into all accumulator cells lying on a rasterized circle of that radius
//! around it. Vote counts are normalized by the ideal circumference in cells
//! (`2 pi r / spacing`), so a clean circle scores close to one whatever its
//! size. Local maxima above the sensitivity floor are pruned greedily by
//! score, dropping any center closer than `r_min` to an accepted one.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Point, TestGrid};
use crate::pgm::Pgm;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMap {
    side: usize,
    bits: Vec<u8>,
}

impl BinaryMap {
    pub fn new(side: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != side * side {
            return Err(Error::DimensionMismatch {
                expected: side * side,
                actual: bits.len(),
            });
        }
        Ok(BinaryMap {
            side,
            bits: bits.into_iter().map(|b| u8::from(b != 0)).collect(),
        })
    }

    pub fn zeros(side: usize) -> Self {
        BinaryMap {
            side,
            bits: vec![0; side * side],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, j: usize, k: usize) -> bool {
        self.bits[j * self.side + k] != 0
    }

    pub fn set(&mut self, j: usize, k: usize, on: bool) {
        self.bits[j * self.side + k] = u8::from(on);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn to_pgm(&self) -> Pgm {
        let pixels = self.bits.iter().map(|&b| u32::from(b)).collect();
        Pgm {
            width: self.side,
            height: self.side,
            maxval: 1,
            pixels,
        }
    }

    /// Any nonzero pixel is foreground. The image must be square.
    pub fn from_pgm(img: &Pgm) -> Result<Self> {
        if img.width != img.height {
            return Err(Error::config("image", "image must be square"));
        }
        BinaryMap::new(img.width, img.pixels.iter().map(|&p| u8::from(p > 0)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Circle {
    pub fn new(cx: f64, cy: f64, r: f64) -> Self {
        Circle { cx, cy, r }
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }
}

/// Detected circles, best first, with scores in `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CircleSet {
    circles: Vec<Circle>,
    scores: Vec<f64>,
}

impl CircleSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Circles with unit scores, in the given order.
    pub fn from_circles(circles: Vec<Circle>) -> Self {
        let scores = vec![1.0; circles.len()];
        CircleSet { circles, scores }
    }

    pub fn circles(&self) -> &[Circle] {
        &self.circles
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.circles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circles.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Circle, f64)> {
        self.circles.iter().zip(self.scores.iter().copied())
    }

    /// First circle (best score) containing `p` with `margin`.
    pub fn containing(&self, p: &Point, margin: f64) -> Option<&Circle> {
        self.circles.iter().find(|c| point_in_circle(p, c, margin))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoughConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub sensitivity: f64,
    /// Radius quantization; one grid cell when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_step: Option<f64>,
}

impl HoughConfig {
    pub fn new(r_min: f64, r_max: f64, sensitivity: f64) -> Self {
        HoughConfig {
            r_min,
            r_max,
            sensitivity,
            radius_step: None,
        }
    }

    /// Grid-independent checks.
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min.is_finite()) {
            return Err(Error::config("hough.r_min", "must be > 0"));
        }
        if !(self.r_max > self.r_min && self.r_max.is_finite()) {
            return Err(Error::config("hough.r_max", "must be > r_min"));
        }
        if !(0.0..=1.0).contains(&self.sensitivity) {
            return Err(Error::config("hough.sensitivity", "must lie in [0, 1]"));
        }
        if let Some(step) = self.radius_step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::config("hough.radius_step", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Checks against a grid spacing: circles under two cells are not resolvable.
    pub fn validate_for_spacing(&self, spacing: f64) -> Result<()> {
        self.validate()?;
        if self.r_min < 2.0 * spacing * (1.0 - 1e-9) {
            return Err(Error::config(
                "hough.r_min",
                format!("must be at least two grid cells ({})", 2.0 * spacing),
            ));
        }
        Ok(())
    }

    pub fn step(&self, spacing: f64) -> f64 {
        self.radius_step.unwrap_or(spacing)
    }

    /// Quantized radii from `r_min` up to `r_max`, in domain units.
    pub fn radii(&self, spacing: f64) -> Vec<f64> {
        let step = self.step(spacing);
        let count = ((self.r_max - self.r_min) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.r_min + i as f64 * step).collect()
    }
}

/// Minimum normalized score accepted at `sensitivity`: 0.9 at 0, 0.3 at 1.
pub fn score_floor(sensitivity: f64) -> f64 {
    0.9 - 0.6 * sensitivity
}

/// `1` where `mean > g_thresh`, `0` otherwise (ties included).
pub fn binarize(mean: &[f64], side: usize, g_thresh: f64) -> Result<BinaryMap> {
    if mean.len() != side * side {
        return Err(Error::DimensionMismatch {
            expected: side * side,
            actual: mean.len(),
        });
    }
    let bits = mean.iter().map(|&m| u8::from(m > g_thresh)).collect();
    Ok(BinaryMap { side, bits })
}

/// Foreground pixels with a 4-neighbor that is background or off the grid,
/// as flat indices in ascending order.
pub fn boundary_pixels(map: &BinaryMap) -> Vec<usize> {
    let n = map.side;
    let mut out = Vec::new();
    for j in 0..n {
        for k in 0..n {
            if !map.get(j, k) {
                continue;
            }
            let edge = j == 0 || k == 0 || j + 1 == n || k + 1 == n;
            if edge
                || !map.get(j - 1, k)
                || !map.get(j + 1, k)
                || !map.get(j, k - 1)
                || !map.get(j, k + 1)
            {
                out.push(j * n + k);
            }
        }
    }
    out
}

/// Integer offsets of a rasterized circle of radius `rho` cells.
///
/// Each octant step picks the lattice point nearest the true circle, the same
/// choice the midpoint algorithm makes; the pattern is symmetric and
/// duplicate-free.
pub fn circle_offsets(rho: f64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let limit = (rho / std::f64::consts::SQRT_2).floor() as i64;
    for a in 0..=limit {
        let b = (rho * rho - (a * a) as f64).max(0.0).sqrt().round() as i64;
        if b < a {
            break;
        }
        for (x, y) in [(a, b), (b, a)] {
            for (sx, sy) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                out.push((sx * x, sy * y));
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Normalized vote plane for one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumulatorPlane {
    pub radius: f64,
    pub votes: Vec<u32>,
    /// `votes / (2 pi radius / spacing)`.
    pub scores: Vec<f64>,
}

impl AccumulatorPlane {
    pub fn to_pgm(&self, side: usize) -> Pgm {
        let max = self.votes.iter().copied().max().unwrap_or(0).max(1) as f64;
        let pixels = self
            .votes
            .iter()
            .map(|&v| ((v as f64 / max) * 255.0).round() as u32)
            .collect();
        Pgm {
            width: side,
            height: side,
            maxval: 255,
            pixels,
        }
    }
}

/// Fills one accumulator plane per quantized radius.
pub fn accumulate(map: &BinaryMap, cfg: &HoughConfig, grid: &TestGrid) -> Result<Vec<AccumulatorPlane>> {
    cfg.validate_for_spacing(grid.spacing())?;
    if map.side() != grid.side() {
        return Err(Error::DimensionMismatch {
            expected: grid.side(),
            actual: map.side(),
        });
    }
    let spacing = grid.spacing();
    let side = map.side() as i64;
    let sources: Vec<(i64, i64)> = boundary_pixels(map)
        .into_iter()
        .map(|i| ((i / map.side()) as i64, (i % map.side()) as i64))
        .collect();
    let planes = cfg
        .radii(spacing)
        .into_par_iter()
        .map(|radius| {
            let rho = radius / spacing;
            let offsets = circle_offsets(rho);
            let mut votes = vec![0u32; (side * side) as usize];
            for &(j, k) in &sources {
                for &(dj, dk) in &offsets {
                    let (a, b) = (j + dj, k + dk);
                    if a >= 0 && a < side && b >= 0 && b < side {
                        votes[(a * side + b) as usize] += 1;
                    }
                }
            }
            let norm = 2.0 * PI * rho;
            let scores = votes.iter().map(|&v| v as f64 / norm).collect();
            AccumulatorPlane {
                radius,
                votes,
                scores,
            }
        })
        .collect();
    Ok(planes)
}

fn is_local_max(scores: &[f64], side: usize, j: usize, k: usize) -> bool {
    let v = scores[j * side + k];
    let lo = |i: usize| i.saturating_sub(1);
    let hi = |i: usize| (i + 1).min(side - 1);
    for a in lo(j)..=hi(j) {
        for b in lo(k)..=hi(k) {
            if scores[a * side + b] > v {
                return false;
            }
        }
    }
    true
}

/// Circles approximating the foreground of `map`, in domain coordinates.
pub fn detect_circles(map: &BinaryMap, cfg: &HoughConfig, grid: &TestGrid) -> Result<CircleSet> {
    let planes = accumulate(map, cfg, grid)?;
    let floor = score_floor(cfg.sensitivity);
    let side = map.side();

    // (score, plane, cell)
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (pi, plane) in planes.iter().enumerate() {
        for (cell, &s) in plane.scores.iter().enumerate() {
            if s >= floor && s > 0.0 {
                let (j, k) = (cell / side, cell % side);
                if is_local_max(&plane.scores, side, j, k) {
                    candidates.push((s, pi, cell));
                }
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut set = CircleSet::new();
    for (score, pi, cell) in candidates {
        let center = grid.points()[cell];
        let separated = set
            .circles
            .iter()
            .all(|c| c.center().distance(&center) >= cfg.r_min);
        if separated {
            set.circles.push(Circle::new(center.x, center.y, planes[pi].radius));
            set.scores.push(score.min(1.0));
        }
    }
    Ok(set)
}

/// `|p - center| < r + margin`.
pub fn point_in_circle(p: &Point, c: &Circle, margin: f64) -> bool {
    p.distance(&c.center()) < c.r + margin
}
