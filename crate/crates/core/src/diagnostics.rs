//! Scattered-data spread measures and mission metrics.
//!
//! The fill distance is a supremum over the continuous domain; here it is the
//! maximum over the test grid, which underestimates it by at most
//! `spacing / sqrt(2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Point, TestGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadDiagnostics {
    pub fill_distance: f64,
    pub separation_radius: f64,
    pub mesh_ratio: f64,
}

impl SpreadDiagnostics {
    pub fn compute(points: &[Point], grid: &TestGrid) -> Result<Self> {
        let fill_distance = fill_distance(points, grid)?;
        let separation_radius = separation_radius(points)?;
        let mesh_ratio = mesh_ratio(fill_distance, separation_radius)?;
        Ok(SpreadDiagnostics {
            fill_distance,
            separation_radius,
            mesh_ratio,
        })
    }
}

/// Largest distance from a grid point to its nearest sample.
pub fn fill_distance(points: &[Point], grid: &TestGrid) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::UndefinedDiagnostic("fill distance needs at least one point"));
    }
    let h2 = grid
        .points()
        .iter()
        .map(|g| {
            points
                .iter()
                .map(|p| g.distance_squared(p))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(h2.sqrt())
}

/// Half the smallest pairwise distance.
pub fn separation_radius(points: &[Point]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::UndefinedDiagnostic("separation radius needs at least two points"));
    }
    let mut best = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.min(p.distance_squared(q));
        }
    }
    Ok(0.5 * best.sqrt())
}

pub fn mesh_ratio(fill_distance: f64, separation_radius: f64) -> Result<f64> {
    if separation_radius <= 0.0 {
        return Err(Error::Degenerate("mesh ratio with zero separation radius"));
    }
    Ok(fill_distance / separation_radius)
}

/// Euclidean norm of `estimate - truth`.
pub fn l2_error(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: estimate.len(),
        });
    }
    Ok(estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Root-mean-square version of [`l2_error`].
pub fn rmse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    let n = truth.len();
    if n == 0 {
        return Err(Error::UndefinedDiagnostic("rmse of an empty vector"));
    }
    Ok(l2_error(estimate, truth)? / (n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Exposure {
    pub intensity_inside: f64,
    pub count_inside: usize,
}

/// Sum and count of measured values strictly above `g_thresh`.
pub fn exposure_metrics(values: &[f64], g_thresh: f64) -> Exposure {
    values
        .iter()
        .filter(|&&y| y > g_thresh)
        .fold(Exposure::default(), |acc, &y| Exposure {
            intensity_inside: acc.intensity_inside + y,
            count_inside: acc.count_inside + 1,
        })
}

/// Fill distance and separation radius maintained as points arrive, in
/// `O(grid)` and `O(t)` per point respectively.
#[derive(Debug, Clone)]
pub struct SpreadTracker {
    nearest_sq: Vec<f64>,
    points: Vec<Point>,
    min_pair_sq: f64,
}

impl SpreadTracker {
    pub fn new(grid: &TestGrid) -> Self {
        SpreadTracker {
            nearest_sq: vec![f64::INFINITY; grid.len()],
            points: Vec::new(),
            min_pair_sq: f64::INFINITY,
        }
    }

    pub fn push(&mut self, p: Point, grid: &TestGrid) {
        for (d, g) in self.nearest_sq.iter_mut().zip(grid.points()) {
            *d = d.min(g.distance_squared(&p));
        }
        for q in &self.points {
            self.min_pair_sq = self.min_pair_sq.min(q.distance_squared(&p));
        }
        self.points.push(p);
    }

    pub fn fill_distance(&self) -> Option<f64> {
        (!self.points.is_empty()).then(|| self.nearest_sq.iter().copied().fold(0.0, f64::max).sqrt())
    }

    pub fn separation_radius(&self) -> Option<f64> {
        (self.points.len() >= 2).then(|| 0.5 * self.min_pair_sq.sqrt())
    }

    pub fn mesh_ratio(&self) -> Option<f64> {
        let h = self.fill_distance()?;
        let q = self.separation_radius()?;
        mesh_ratio(h, q).ok()
    }
}
