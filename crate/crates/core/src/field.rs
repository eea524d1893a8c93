//! Ground-truth scalar fields, the domain box, and the evaluation grid.
//!
//! Only the simulator and the metric code query a [`FieldSpec`]; agents see
//! nothing but the values they measure at their own locations.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance_squared(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.distance_squared(other).sqrt()
    }
}

/// Axis-aligned rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for DomainBox {
    fn default() -> Self {
        DomainBox::unit()
    }
}

impl DomainBox {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let b = DomainBox {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub const fn unit() -> Self {
        DomainBox {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("domain", "bounds must be finite"));
        }
        if self.x_min >= self.x_max {
            return Err(Error::config("domain.x_max", "x_min must be < x_max"));
        }
        if self.y_min >= self.y_max {
            return Err(Error::config("domain.y_max", "y_min must be < y_max"));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(self.x_min, self.x_max),
            p.y.clamp(self.y_min, self.y_max),
        )
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(
            rng.gen_range(self.x_min..=self.x_max),
            rng.gen_range(self.y_min..=self.y_max),
        )
    }
}

/// One Gaussian bump `amplitude * exp(-|p - c|^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub cx: f64,
    pub cy: f64,
    pub amplitude: f64,
    pub sigma: f64,
}

/// Regular table of field values, bilinearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// `values[i * ys.len() + j]` is the value at `(xs[i], ys[j])`.
    values: Vec<f64>,
}

impl FieldTable {
    /// Builds a table from scattered `(x, y, g)` rows that must form a full
    /// rectangular lattice.
    pub fn from_rows(rows: &[(f64, f64, f64)]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Table("no rows".into()));
        }
        let mut xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
        for v in xs.iter().chain(ys.iter()) {
            if !v.is_finite() {
                return Err(Error::Table("non-finite coordinate".into()));
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        if xs.len() < 2 || ys.len() < 2 {
            return Err(Error::Table("need at least two distinct x and y values".into()));
        }
        if xs.len() * ys.len() != rows.len() {
            return Err(Error::Table(format!(
                "{} rows do not form a {}x{} lattice",
                rows.len(),
                xs.len(),
                ys.len()
            )));
        }
        let mut values = vec![f64::NAN; rows.len()];
        for &(x, y, g) in rows {
            if !g.is_finite() {
                return Err(Error::Table(format!("non-finite value at ({x}, {y})")));
            }
            let i = xs.binary_search_by(|v| v.total_cmp(&x)).unwrap();
            let j = ys.binary_search_by(|v| v.total_cmp(&y)).unwrap();
            let slot = &mut values[i * ys.len() + j];
            if !slot.is_nan() {
                return Err(Error::Table(format!("duplicate row at ({x}, {y})")));
            }
            *slot = g;
        }
        Ok(FieldTable { xs, ys, values })
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Table(format!("bad row {:?}", record)))
            };
            // Skip a textual header such as `x,y,g`.
            if rows.is_empty() && record.get(0).is_some_and(|s| s.parse::<f64>().is_err()) {
                continue;
            }
            rows.push((parse(0)?, parse(1)?, parse(2)?));
        }
        FieldTable::from_rows(&rows)
    }

    pub fn extent(&self) -> DomainBox {
        DomainBox {
            x_min: self.xs[0],
            x_max: *self.xs.last().unwrap(),
            y_min: self.ys[0],
            y_max: *self.ys.last().unwrap(),
        }
    }

    fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    fn interpolate(&self, p: &Point) -> f64 {
        let (i, tx) = bracket(&self.xs, p.x);
        let (j, ty) = bracket(&self.ys, p.y);
        let n = self.ys.len();
        let v00 = self.values[i * n + j];
        let v01 = self.values[i * n + j + 1];
        let v10 = self.values[(i + 1) * n + j];
        let v11 = self.values[(i + 1) * n + j + 1];
        let a = v00 + (v10 - v00) * tx;
        let b = v01 + (v11 - v01) * tx;
        a + (b - a) * ty
    }
}

/// Index of the lower knot and the fractional position inside that cell.
fn bracket(knots: &[f64], v: f64) -> (usize, f64) {
    let upper = knots.partition_point(|&k| k <= v);
    let i = upper.saturating_sub(1).min(knots.len() - 2);
    let t = ((v - knots[i]) / (knots[i + 1] - knots[i])).clamp(0.0, 1.0);
    (i, t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldKind {
    /// `amplitude_x * sin(2 pi frequency_x x) + amplitude_y * cos(2 pi frequency_y y)`.
    AnalyticSinusoid {
        #[serde(default = "one")]
        amplitude_x: f64,
        #[serde(default = "one")]
        frequency_x: f64,
        #[serde(default = "one")]
        amplitude_y: f64,
        #[serde(default = "two")]
        frequency_y: f64,
    },
    SumOfGaussianBumps {
        #[serde(default)]
        offset: f64,
        bumps: Vec<Bump>,
    },
    /// Loaded from a CSV of `x,y,g` rows; call [`FieldSpec::resolve`] before use.
    TabulatedGrid {
        csv: PathBuf,
        #[serde(skip)]
        table: Option<Arc<FieldTable>>,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSpec {
    #[serde(default)]
    pub domain: DomainBox,
    #[serde(flatten)]
    pub kind: FieldKind,
    /// Gradient bound. Stored for reference, never used by the estimators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_hint: Option<f64>,
}

impl FieldSpec {
    /// `sin(2 pi x) + cos(4 pi y)` on the unit square.
    pub fn reference_sinusoid() -> Self {
        FieldSpec {
            domain: DomainBox::unit(),
            kind: FieldKind::AnalyticSinusoid {
                amplitude_x: 1.0,
                frequency_x: 1.0,
                amplitude_y: 1.0,
                frequency_y: 2.0,
            },
            lipschitz_hint: None,
        }
    }

    pub fn gaussian_bumps(domain: DomainBox, offset: f64, bumps: Vec<Bump>) -> Self {
        FieldSpec {
            domain,
            kind: FieldKind::SumOfGaussianBumps { offset, bumps },
            lipschitz_hint: None,
        }
    }

    pub fn tabulated(table: FieldTable, csv: PathBuf) -> Self {
        FieldSpec {
            domain: table.extent(),
            kind: FieldKind::TabulatedGrid {
                csv,
                table: Some(Arc::new(table)),
            },
            lipschitz_hint: None,
        }
    }

    /// Validates parameters and loads a tabulated field's CSV, resolving
    /// relative paths against `base_dir`.
    pub fn resolve(mut self, base_dir: &Path) -> Result<Self> {
        self.domain.validate()?;
        match &mut self.kind {
            FieldKind::AnalyticSinusoid {
                amplitude_x,
                frequency_x,
                amplitude_y,
                frequency_y,
            } => {
                let all = [*amplitude_x, *frequency_x, *amplitude_y, *frequency_y];
                if all.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config("field", "sinusoid parameters must be finite"));
                }
            }
            FieldKind::SumOfGaussianBumps { offset, bumps } => {
                if !offset.is_finite() {
                    return Err(Error::config("field.offset", "must be finite"));
                }
                for (i, b) in bumps.iter().enumerate() {
                    if !(b.sigma > 0.0 && b.sigma.is_finite()) {
                        return Err(Error::config(format!("field.bumps[{i}].sigma"), "must be > 0"));
                    }
                    if ![b.cx, b.cy, b.amplitude].iter().all(|v| v.is_finite()) {
                        return Err(Error::config(format!("field.bumps[{i}]"), "must be finite"));
                    }
                }
            }
            FieldKind::TabulatedGrid { csv, table } => {
                if table.is_none() {
                    let path = if csv.is_absolute() {
                        csv.clone()
                    } else {
                        base_dir.join(&*csv)
                    };
                    let loaded = FieldTable::from_csv(&path)?;
                    let extent = loaded.extent();
                    let d = &self.domain;
                    if d.x_min < extent.x_min
                        || d.x_max > extent.x_max
                        || d.y_min < extent.y_min
                        || d.y_max > extent.y_max
                    {
                        return Err(Error::config(
                            "field.domain",
                            "domain extends beyond the tabulated grid",
                        ));
                    }
                    *table = Some(Arc::new(loaded));
                    *csv = path;
                }
            }
        }
        Ok(self)
    }

    /// Lower and upper bounds on the field over its domain.
    pub fn bounds(&self) -> (f64, f64) {
        match &self.kind {
            FieldKind::AnalyticSinusoid {
                amplitude_x,
                amplitude_y,
                ..
            } => {
                let a = amplitude_x.abs() + amplitude_y.abs();
                (-a, a)
            }
            FieldKind::SumOfGaussianBumps { offset, bumps } => {
                let neg: f64 = bumps.iter().map(|b| b.amplitude.min(0.0)).sum();
                let pos: f64 = bumps.iter().map(|b| b.amplitude.max(0.0)).sum();
                (offset + neg, offset + pos)
            }
            FieldKind::TabulatedGrid { table, .. } => match table {
                Some(t) => t.min_max(),
                None => (f64::NAN, f64::NAN),
            },
        }
    }

    pub fn g_min(&self) -> f64 {
        self.bounds().0
    }

    pub fn g_max(&self) -> f64 {
        self.bounds().1
    }

    fn value_unchecked(&self, p: &Point) -> f64 {
        match &self.kind {
            FieldKind::AnalyticSinusoid {
                amplitude_x,
                frequency_x,
                amplitude_y,
                frequency_y,
            } => {
                amplitude_x * (2.0 * PI * frequency_x * p.x).sin()
                    + amplitude_y * (2.0 * PI * frequency_y * p.y).cos()
            }
            FieldKind::SumOfGaussianBumps { offset, bumps } => {
                offset
                    + bumps
                        .iter()
                        .map(|b| {
                            let d2 = p.distance_squared(&Point::new(b.cx, b.cy));
                            b.amplitude * (-d2 / (2.0 * b.sigma * b.sigma)).exp()
                        })
                        .sum::<f64>()
            }
            FieldKind::TabulatedGrid { table, .. } => table
                .as_ref()
                .map(|t| t.interpolate(p))
                .unwrap_or(f64::NAN),
        }
    }
}

/// Noiseless field intensity at `p`.
pub fn eval_field(spec: &FieldSpec, p: &Point) -> Result<f64> {
    if !spec.domain.contains(p) {
        return Err(Error::DomainViolation(*p));
    }
    if let FieldKind::TabulatedGrid { table: None, csv } = &spec.kind {
        return Err(Error::Table(format!("{} has not been loaded", csv.display())));
    }
    Ok(spec.value_unchecked(p))
}

/// Field intensity plus seeded additive Gaussian noise. With `noise_std == 0`
/// this is exactly [`eval_field`] and draws nothing from `rng`.
pub fn measure<R: Rng + ?Sized>(
    spec: &FieldSpec,
    p: &Point,
    noise_std: f64,
    rng: &mut R,
) -> Result<f64> {
    let g = eval_field(spec, p)?;
    if noise_std == 0.0 {
        return Ok(g);
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(g + noise_std * z)
}

/// Membership in the true high-intensity region `{g > g_thresh}`.
pub fn in_true_high_intensity(spec: &FieldSpec, p: &Point, g_thresh: f64) -> Result<bool> {
    Ok(eval_field(spec, p)? > g_thresh)
}

/// Uniform square evaluation grid including the domain boundary.
///
/// Point `(j, k)` sits at `(x_min + j*spacing, y_min + k*spacing)` and is
/// stored at flat index `j * side + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestGrid {
    side: usize,
    domain: DomainBox,
    spacing: f64,
    points: Vec<Point>,
}

impl TestGrid {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.side + k
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.side, index % self.side)
    }

    /// Field values at every grid point.
    pub fn truth(&self, spec: &FieldSpec) -> Result<Vec<f64>> {
        self.points.iter().map(|p| eval_field(spec, p)).collect()
    }
}

/// Builds the `side x side` test grid. The box must be square so that one
/// spacing serves both axes and all four corners are grid points.
pub fn make_test_grid(domain: &DomainBox, side: usize) -> Result<TestGrid> {
    domain.validate()?;
    if side < 2 {
        return Err(Error::config("grid_side", "must be at least 2"));
    }
    let (w, h) = (domain.width(), domain.height());
    if (w - h).abs() > 1e-12 * w.max(h) {
        return Err(Error::config("domain", "test grid requires a square domain"));
    }
    let spacing = w / (side - 1) as f64;
    let coord = |lo: f64, hi: f64, i: usize| {
        if i == side - 1 {
            hi
        } else {
            lo + i as f64 * spacing
        }
    };
    let mut points = Vec::with_capacity(side * side);
    for j in 0..side {
        let x = coord(domain.x_min, domain.x_max, j);
        for k in 0..side {
            points.push(Point::new(x, coord(domain.y_min, domain.y_max, k)));
        }
    }
    Ok(TestGrid {
        side,
        domain: *domain,
        spacing,
        points,
    })
}
