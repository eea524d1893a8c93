//! Per-agent measurement plans and relocation of planned points out of
//! detected high-intensity circles.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::field::{DomainBox, Point};
use crate::hough::{point_in_circle, Circle, CircleSet};

/// Default number of axis-shift attempts before falling back to sampling.
pub const DEFAULT_MAX_ATTEMPTS: usize = 20;

/// Uniform draws tried once axis shifts are exhausted.
pub const FALLBACK_DRAWS: usize = 1000;

/// Shifts land exactly `r + margin` from the center along an axis; the
/// relative nudge keeps rounding from putting them back inside.
const SHIFT_NUDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutedMeasurement {
    /// 1-based mission step at which the measurement was taken.
    pub step: usize,
    pub location: Point,
    pub value: f64,
    pub inside_true_region: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPlan {
    initial: Vec<Point>,
    executed: Vec<ExecutedMeasurement>,
    future: VecDeque<Point>,
}

impl MeasurementPlan {
    pub fn new(initial: Vec<Point>) -> Self {
        MeasurementPlan {
            future: initial.iter().copied().collect(),
            initial,
            executed: Vec::new(),
        }
    }

    /// Locations as first planned, before any relocation.
    pub fn initial(&self) -> &[Point] {
        &self.initial
    }

    pub fn executed(&self) -> &[ExecutedMeasurement] {
        &self.executed
    }

    pub fn future(&self) -> &VecDeque<Point> {
        &self.future
    }

    /// Total planned measurements, executed or not.
    pub fn len(&self) -> usize {
        self.executed.len() + self.future.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the next measurement (0-based).
    pub fn next_index(&self) -> usize {
        self.executed.len()
    }

    pub fn peek_next(&self) -> Option<Point> {
        self.future.front().copied()
    }

    /// Moves the next planned location into the executed list.
    pub fn execute_next(
        &mut self,
        step: usize,
        value: f64,
        inside_true_region: bool,
    ) -> Option<&ExecutedMeasurement> {
        let location = self.future.pop_front()?;
        self.executed.push(ExecutedMeasurement {
            step,
            location,
            value,
            inside_true_region,
        });
        self.executed.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelocationParams {
    pub margin: f64,
    pub max_attempts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relocation {
    pub point: Point,
    pub moved: bool,
    /// Every attempt failed; `point` is the original, still inside a circle.
    pub exposed: bool,
}

fn inside_any(p: &Point, circles: &CircleSet, margin: f64) -> Option<Circle> {
    circles.containing(p, margin).copied()
}

/// Moves `p` out of every circle in `circles` (inflated by `margin`).
///
/// Each attempt shifts the original `p` along a random axis by
/// `+/-(r + margin)` of the circle containing the previous candidate, then
/// clamps to the domain. After `max_attempts` misses, up to
/// [`FALLBACK_DRAWS`] uniform samples over the domain are tried.
pub fn relocate_point<R: Rng + ?Sized>(
    p: Point,
    circles: &CircleSet,
    domain: &DomainBox,
    params: &RelocationParams,
    rng: &mut R,
) -> Relocation {
    let margin = params.margin;
    let Some(mut circle) = inside_any(&p, circles, margin) else {
        return Relocation {
            point: p,
            moved: false,
            exposed: false,
        };
    };
    for _ in 0..params.max_attempts {
        let shift = (circle.r + margin) * (1.0 + SHIFT_NUDGE);
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let candidate = if rng.gen::<bool>() {
            Point::new(p.x + sign * shift, p.y)
        } else {
            Point::new(p.x, p.y + sign * shift)
        };
        let candidate = domain.clamp(candidate);
        match inside_any(&candidate, circles, margin) {
            None => {
                return Relocation {
                    point: candidate,
                    moved: true,
                    exposed: false,
                }
            }
            Some(next) => circle = next,
        }
    }
    for _ in 0..FALLBACK_DRAWS {
        let candidate = domain.sample(rng);
        if inside_any(&candidate, circles, margin).is_none() {
            return Relocation {
                point: candidate,
                moved: true,
                exposed: false,
            };
        }
    }
    Relocation {
        point: p,
        moved: false,
        exposed: true,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplanReport {
    pub relocated: usize,
    pub exposed: usize,
}

/// Passes every future location through [`relocate_point`]. Executed
/// locations are never touched.
pub fn replan<R: Rng + ?Sized>(
    plan: &mut MeasurementPlan,
    circles: &CircleSet,
    domain: &DomainBox,
    params: &RelocationParams,
    rng: &mut R,
) -> ReplanReport {
    let mut report = ReplanReport::default();
    if circles.is_empty() {
        return report;
    }
    for slot in plan.future.iter_mut() {
        let r = relocate_point(*slot, circles, domain, params, rng);
        *slot = r.point;
        report.relocated += usize::from(r.moved);
        report.exposed += usize::from(r.exposed);
    }
    report
}

/// Count of future locations inside any circle.
pub fn future_points_inside(plan: &MeasurementPlan, circles: &CircleSet, margin: f64) -> usize {
    plan.future
        .iter()
        .filter(|p| circles.circles().iter().any(|c| point_in_circle(p, c, margin)))
        .count()
}
