//! Squared-exponential Gaussian-process regression over a fixed set of
//! evaluation points.
//!
//! Two routes compute the same posterior:
//!
//! * [`posterior`] builds the Gram matrix from scratch and factors it with a
//!   dense Cholesky decomposition.
//! * [`IncrementalPosterior`] extends a lower-triangular factor by one row per
//!   measurement and keeps the whitened cross-covariance `L^-1 K_trn,test`, so
//!   each new point costs `O(t^2 + t n)` instead of a refactorization.
//!
//! Neither route forms an explicit inverse.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Point;

/// Default diagonal jitter added to the training Gram matrix.
pub const DEFAULT_JITTER: f64 = 1e-8;

/// Pivots at or below this fraction of the prior variance are treated as a
/// factorization failure.
const PIVOT_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    /// Output scale.
    pub alpha: f64,
    /// Length scale.
    pub beta: f64,
}

impl KernelParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let params = KernelParams { alpha, beta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("kernel.alpha", "must be > 0"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config("kernel.beta", "must be > 0"));
        }
        Ok(())
    }

    /// Prior variance `alpha^2`.
    pub fn variance(&self) -> f64 {
        self.alpha * self.alpha
    }

    fn eval(&self, p: &Point, q: &Point) -> f64 {
        self.variance() * (-p.distance_squared(q) / (2.0 * self.beta * self.beta)).exp()
    }
}

/// `alpha^2 exp(-|p - q|^2 / (2 beta^2))`.
pub fn kernel(p: &Point, q: &Point, params: &KernelParams) -> Result<f64> {
    params.validate()?;
    Ok(params.eval(p, q))
}

/// Measurement locations and values, in acquisition order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainSet {
    locations: Vec<Point>,
    values: Vec<f64>,
}

impl TrainSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(locations: Vec<Point>, values: Vec<f64>) -> Result<Self> {
        if locations.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: locations.len(),
                actual: values.len(),
            });
        }
        Ok(TrainSet { locations, values })
    }

    pub fn push(&mut self, p: Point, y: f64) {
        self.locations.push(p);
        self.values.push(y);
    }

    pub fn locations(&self) -> &[Point] {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// Training points that appear more than once.
    pub fn duplicates(&self) -> Vec<Point> {
        let mut dups: Vec<Point> = Vec::new();
        for (i, p) in self.locations.iter().enumerate() {
            let repeated = self.locations[..i].iter().any(|q| q == p);
            if repeated && !dups.contains(p) {
                dups.push(*p);
            }
        }
        dups
    }
}

/// Returns a copy of `train` with `(p, y)` appended.
pub fn append_measurement(train: &TrainSet, p: Point, y: f64) -> TrainSet {
    let mut next = train.clone();
    next.push(p, y);
    next
}

#[derive(Debug, Clone)]
pub struct KernelMatrices {
    pub trn_trn: DMatrix<f64>,
    pub test_trn: DMatrix<f64>,
    pub test_test_diag: DVector<f64>,
}

pub fn build_kernel_matrices(
    train: &TrainSet,
    points: &[Point],
    params: &KernelParams,
) -> Result<KernelMatrices> {
    params.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyModel);
    }
    let x = train.locations();
    let t = x.len();
    let trn_trn = DMatrix::from_fn(t, t, |j, k| params.eval(&x[j], &x[k]));
    let test_trn = DMatrix::from_fn(points.len(), t, |j, k| params.eval(&points[j], &x[k]));
    let test_test_diag = DVector::from_element(points.len(), params.variance());
    Ok(KernelMatrices {
        trn_trn,
        test_trn,
        test_test_diag,
    })
}

/// Posterior mean and predictive variance at each evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub mean: Vec<f64>,
    pub cov_diag: Vec<f64>,
    /// Full covariance, present only when explicitly requested.
    pub full_cov: Option<DMatrix<f64>>,
}

impl Posterior {
    pub fn prior(n: usize, params: &KernelParams, prior_mean: f64) -> Self {
        Posterior {
            mean: vec![prior_mean; n],
            cov_diag: vec![params.variance(); n],
            full_cov: None,
        }
    }
}

/// Kernel, jitter and constant prior mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    pub kernel: KernelParams,
    pub jitter: f64,
    #[serde(default)]
    pub prior_mean: f64,
}

impl GpModel {
    pub fn new(kernel: KernelParams, jitter: f64) -> Result<Self> {
        let m = GpModel {
            kernel,
            jitter,
            prior_mean: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::config("jitter", "must be >= 0"));
        }
        if !self.prior_mean.is_finite() {
            return Err(Error::config("prior_mean", "must be finite"));
        }
        Ok(())
    }

    fn pivot_floor(&self) -> f64 {
        PIVOT_TOLERANCE * (self.kernel.variance() + self.jitter)
    }

    /// From-scratch posterior. With no training data this is the prior.
    pub fn posterior(&self, train: &TrainSet, points: &[Point]) -> Result<Posterior> {
        self.solve(train, points, false)
    }

    /// From-scratch posterior including the full covariance matrix.
    pub fn posterior_with_covariance(
        &self,
        train: &TrainSet,
        points: &[Point],
    ) -> Result<Posterior> {
        self.solve(train, points, true)
    }

    fn solve(&self, train: &TrainSet, points: &[Point], full: bool) -> Result<Posterior> {
        self.validate()?;
        let n = points.len();
        if train.is_empty() {
            let mut prior = Posterior::prior(n, &self.kernel, self.prior_mean);
            if full {
                prior.full_cov = Some(DMatrix::from_fn(n, n, |a, b| {
                    self.kernel.eval(&points[a], &points[b])
                }));
            }
            return Ok(prior);
        }
        let mats = build_kernel_matrices(train, points, &self.kernel)?;
        let t = train.len();
        let gram = mats.trn_trn + DMatrix::identity(t, t) * self.jitter;
        let singular = || Error::Singular {
            duplicates: train.duplicates(),
        };
        let chol = gram.cholesky().ok_or_else(singular)?;
        let lower = chol.l();
        let floor = self.pivot_floor();
        if (0..t).any(|i| lower[(i, i)] * lower[(i, i)] <= floor) {
            return Err(singular());
        }

        let centered = DVector::from_iterator(t, train.values().iter().map(|y| y - self.prior_mean));
        let weights = chol.solve(&centered);
        let mean_vec = &mats.test_trn * weights;
        let mean: Vec<f64> = mean_vec.iter().map(|m| m + self.prior_mean).collect();

        let whitened = lower
            .solve_lower_triangular(&mats.test_trn.transpose())
            .ok_or_else(singular)?;
        let cov_diag: Vec<f64> = (0..n)
            .map(|i| mats.test_test_diag[i] - whitened.column(i).norm_squared())
            .collect();

        let full_cov = full.then(|| {
            let prior = DMatrix::from_fn(n, n, |a, b| self.kernel.eval(&points[a], &points[b]));
            prior - whitened.transpose() * &whitened
        });
        Ok(Posterior {
            mean,
            cov_diag,
            full_cov,
        })
    }

    pub fn incremental(&self, points: Vec<Point>) -> Result<IncrementalPosterior> {
        self.validate()?;
        Ok(IncrementalPosterior::new(*self, points))
    }
}

/// Zero-prior-mean posterior on `points`; see [`GpModel::posterior`].
pub fn posterior(
    train: &TrainSet,
    points: &[Point],
    params: &KernelParams,
    jitter: f64,
) -> Result<Posterior> {
    GpModel::new(*params, jitter)?.posterior(train, points)
}

/// Lower-triangular Cholesky factor stored row by row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CholeskyFactor {
    rows: Vec<Vec<f64>>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            self.rows[i][j]
        } else {
            0.0
        }
    }

    /// Solves `L x = b`.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(b.len());
        for (i, row) in self.rows.iter().enumerate() {
            let partial: f64 = row[..i].iter().zip(&x).map(|(l, v)| l * v).sum();
            x.push((b[i] - partial) / row[i]);
        }
        x
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let t = self.dim();
        DMatrix::from_fn(t, t, |i, j| self.get(i, j))
    }
}

/// Posterior that absorbs one measurement at a time.
#[derive(Debug, Clone)]
pub struct IncrementalPosterior {
    model: GpModel,
    points: Vec<Point>,
    train: TrainSet,
    factor: CholeskyFactor,
    /// Row `i` is row `i` of `L^-1 K_trn,test`.
    projections: Vec<Vec<f64>>,
    /// `L^-1 (y - prior_mean)`.
    whitened_targets: Vec<f64>,
    mean: Vec<f64>,
    variance: Vec<f64>,
}

impl IncrementalPosterior {
    fn new(model: GpModel, points: Vec<Point>) -> Self {
        let n = points.len();
        IncrementalPosterior {
            model,
            train: TrainSet::new(),
            factor: CholeskyFactor::default(),
            projections: Vec::new(),
            whitened_targets: Vec::new(),
            mean: vec![model.prior_mean; n],
            variance: vec![model.kernel.variance(); n],
            points,
        }
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn train(&self) -> &TrainSet {
        &self.train
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn posterior(&self) -> Posterior {
        Posterior {
            mean: self.mean.clone(),
            cov_diag: self.variance.clone(),
            full_cov: None,
        }
    }

    /// Adds `(p, y)` by extending the factor with one row. On error the
    /// state is left untouched.
    pub fn push(&mut self, p: Point, y: f64) -> Result<()> {
        let kernel = &self.model.kernel;
        let cross: Vec<f64> = self
            .train
            .locations()
            .iter()
            .map(|q| kernel.eval(q, &p))
            .collect();
        let link = self.factor.forward_solve(&cross);
        let pivot_sq =
            kernel.variance() + self.model.jitter - link.iter().map(|l| l * l).sum::<f64>();
        if pivot_sq.is_nan() || pivot_sq <= self.model.pivot_floor() {
            let mut duplicates: Vec<Point> = self
                .train
                .locations()
                .iter()
                .filter(|q| **q == p)
                .take(1)
                .copied()
                .collect();
            for d in self.train.duplicates() {
                if !duplicates.contains(&d) {
                    duplicates.push(d);
                }
            }
            return Err(Error::Singular { duplicates });
        }
        let pivot = pivot_sq.sqrt();

        let prior_projection: f64 = link
            .iter()
            .zip(&self.whitened_targets)
            .map(|(l, w)| l * w)
            .sum();
        let target = (y - self.model.prior_mean - prior_projection) / pivot;

        let mut row: Vec<f64> = self.points.iter().map(|s| kernel.eval(&p, s)).collect();
        for (l, proj) in link.iter().zip(&self.projections) {
            for (r, v) in row.iter_mut().zip(proj) {
                *r -= l * v;
            }
        }
        let inv_pivot = 1.0 / pivot;
        for r in row.iter_mut() {
            *r *= inv_pivot;
        }
        for ((m, v), r) in self.mean.iter_mut().zip(self.variance.iter_mut()).zip(&row) {
            *m += r * target;
            *v -= r * r;
        }

        let mut factor_row = link;
        factor_row.push(pivot);
        self.factor.rows.push(factor_row);
        self.projections.push(row);
        self.whitened_targets.push(target);
        self.train.push(p, y);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_test_grid, DomainBox};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference_kernel() -> KernelParams {
        KernelParams::new(1.0, 0.1).unwrap()
    }

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point::new(rng.gen::<f64>(), rng.gen::<f64>()))
            .collect()
    }

    #[test]
    fn kernel_examples() {
        let p = Point::new(0.3, 0.4);
        assert_eq!(kernel(&p, &p, &KernelParams::new(1.0, 0.1).unwrap()).unwrap(), 1.0);
        assert_eq!(kernel(&p, &p, &KernelParams::new(2.0, 0.1).unwrap()).unwrap(), 4.0);
        let q = Point::new(0.4, 0.4);
        let v = kernel(&p, &q, &reference_kernel()).unwrap();
        assert!((v - 0.606_530_659_712_633).abs() < 1e-6);
        assert_eq!(v, kernel(&q, &p, &reference_kernel()).unwrap());
        assert!(KernelParams::new(0.0, 1.0).is_err());
        assert!(KernelParams::new(1.0, -1.0).is_err());
        let bad = KernelParams { alpha: 1.0, beta: 0.0 };
        assert!(kernel(&p, &q, &bad).is_err());
    }

    #[test]
    fn kernel_matrices_shapes() {
        let grid = make_test_grid(&DomainBox::unit(), 5).unwrap();
        let mut train = TrainSet::new();
        assert!(matches!(
            build_kernel_matrices(&train, grid.points(), &reference_kernel()),
            Err(Error::EmptyModel)
        ));
        train.push(Point::new(0.2, 0.2), 1.0);
        let m = build_kernel_matrices(&train, grid.points(), &reference_kernel()).unwrap();
        assert_eq!(m.trn_trn.shape(), (1, 1));
        assert_eq!(m.trn_trn[(0, 0)], 1.0);
        train.push(Point::new(0.3, 0.2), 1.0);
        let m = build_kernel_matrices(&train, grid.points(), &reference_kernel()).unwrap();
        assert_eq!(m.test_trn.shape(), (25, 2));
        assert!((m.trn_trn[(0, 1)] - 0.606_531).abs() < 1e-6);
        assert_eq!(m.trn_trn[(0, 1)], m.trn_trn[(1, 0)]);
        assert!(m.test_trn.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn duplicate_points_without_jitter_are_singular() {
        let mut train = TrainSet::new();
        train.push(Point::new(0.5, 0.5), 1.0);
        train.push(Point::new(0.5, 0.5), 1.0);
        let err = posterior(&train, &[Point::new(0.1, 0.1)], &reference_kernel(), 0.0).unwrap_err();
        match err {
            Error::Singular { duplicates } => assert_eq!(duplicates, vec![Point::new(0.5, 0.5)]),
            other => panic!("unexpected {other:?}"),
        }
        let model = GpModel::new(reference_kernel(), 0.0).unwrap();
        let mut inc = model.incremental(vec![Point::new(0.1, 0.1)]).unwrap();
        inc.push(Point::new(0.5, 0.5), 1.0).unwrap();
        let before = inc.mean().to_vec();
        assert!(matches!(inc.push(Point::new(0.5, 0.5), 1.0), Err(Error::Singular { .. })));
        assert_eq!(inc.train().len(), 1);
        assert_eq!(inc.mean(), &before[..]);
    }

    #[test]
    fn single_point_interpolates_and_recovers_prior() {
        let x0 = Point::new(0.5, 0.5);
        let train = TrainSet::from_pairs(vec![x0], vec![5.0]).unwrap();
        let far = Point::new(0.0, 0.0);
        let post = posterior(&train, &[x0, far], &reference_kernel(), DEFAULT_JITTER).unwrap();
        assert!((post.mean[0] - 5.0).abs() < 1e-6);
        assert!(post.cov_diag[0] <= DEFAULT_JITTER + 1e-6);
        assert!((post.cov_diag[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn empty_train_gives_prior() {
        let grid = make_test_grid(&DomainBox::unit(), 4).unwrap();
        let post = posterior(&TrainSet::new(), grid.points(), &reference_kernel(), 0.0).unwrap();
        assert!(post.mean.iter().all(|&m| m == 0.0));
        assert!(post.cov_diag.iter().all(|&v| v == 1.0));
        let mut model = GpModel::new(reference_kernel(), 0.0).unwrap();
        model.prior_mean = 0.7;
        let post = model.posterior(&TrainSet::new(), grid.points()).unwrap();
        assert!(post.mean.iter().all(|&m| m == 0.7));
    }

    #[test]
    fn append_preserves_and_interpolates() {
        let t0 = TrainSet::new();
        let t1 = append_measurement(&t0, Point::new(0.1, 0.2), 0.3);
        assert_eq!(t1.len(), 1);
        let t2 = append_measurement(&t1, Point::new(0.6, 0.7), -1.2);
        assert_eq!(&t2.locations()[..1], t1.locations());
        assert_eq!(&t2.values()[..1], t1.values());
        let post = posterior(&t2, &[Point::new(0.6, 0.7)], &reference_kernel(), DEFAULT_JITTER).unwrap();
        assert!((post.mean[0] + 1.2).abs() < 1e-6);
    }

    #[test]
    fn constant_prior_mean_far_from_data() {
        let mut model = GpModel::new(reference_kernel(), DEFAULT_JITTER).unwrap();
        model.prior_mean = 1.5;
        let train = TrainSet::from_pairs(vec![Point::new(0.1, 0.1)], vec![-1.0]).unwrap();
        let post = model.posterior(&train, &[Point::new(0.1, 0.1), Point::new(0.9, 0.9)]).unwrap();
        assert!((post.mean[0] + 1.0).abs() < 1e-6);
        assert!((post.mean[1] - 1.5).abs() < 1e-9);
        let mut inc = model.incremental(vec![Point::new(0.1, 0.1), Point::new(0.9, 0.9)]).unwrap();
        inc.push(Point::new(0.1, 0.1), -1.0).unwrap();
        for (a, b) in inc.mean().iter().zip(&post.mean) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn incremental_first_step_matches_fresh() {
        let grid = make_test_grid(&DomainBox::unit(), 10).unwrap();
        let model = GpModel::new(reference_kernel(), DEFAULT_JITTER).unwrap();
        let mut inc = model.incremental(grid.points().to_vec()).unwrap();
        let p = Point::new(0.37, 0.61);
        inc.push(p, 0.9).unwrap();
        let fresh = model
            .posterior(&TrainSet::from_pairs(vec![p], vec![0.9]).unwrap(), grid.points())
            .unwrap();
        for i in 0..grid.len() {
            assert!((inc.mean()[i] - fresh.mean[i]).abs() <= 1e-15);
            assert!((inc.variance()[i] - fresh.cov_diag[i]).abs() <= 1e-15);
        }
    }

    #[test]
    fn incremental_matches_full_on_random_sequence() {
        let grid = make_test_grid(&DomainBox::unit(), 15).unwrap();
        let model = GpModel::new(reference_kernel(), DEFAULT_JITTER).unwrap();
        let mut inc = model.incremental(grid.points().to_vec()).unwrap();
        let mut train = TrainSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in random_points(20, 5) {
            let y = rng.gen_range(-2.0..2.0);
            inc.push(p, y).unwrap();
            train.push(p, y);
            let full = model.posterior(&train, grid.points()).unwrap();
            for i in 0..grid.len() {
                assert!((inc.mean()[i] - full.mean[i]).abs() <= 1e-8);
                assert!((inc.variance()[i] - full.cov_diag[i]).abs() <= 1e-8);
            }
        }
        let l = inc.factor().to_matrix();
        let gram = build_kernel_matrices(&train, grid.points(), &reference_kernel())
            .unwrap()
            .trn_trn
            + DMatrix::identity(20, 20) * DEFAULT_JITTER;
        assert!((&l * l.transpose() - gram).amax() < 1e-12);
    }

    #[test]
    fn duplicate_with_jitter_halves_variance() {
        let x0 = Point::new(0.4, 0.4);
        let model = GpModel::new(reference_kernel(), 1e-8).unwrap();
        let mut inc = model.incremental(vec![x0]).unwrap();
        inc.push(x0, 1.0).unwrap();
        let once = inc.variance()[0];
        inc.push(x0, 1.0).unwrap();
        let twice = inc.variance()[0];
        let full = model
            .posterior(&TrainSet::from_pairs(vec![x0, x0], vec![1.0, 1.0]).unwrap(), &[x0])
            .unwrap();
        assert!((twice - full.cov_diag[0]).abs() < 1e-12);
        assert!((twice / once - 0.5).abs() < 0.01, "ratio {}", twice / once);
    }

    #[test]
    fn gram_of_distinct_points_is_pd_with_tiny_jitter() {
        for seed in 0..20 {
            let pts = random_points(50, seed);
            let train = TrainSet::from_pairs(pts.clone(), vec![0.0; 50]).unwrap();
            let m = build_kernel_matrices(&train, &pts[..1], &reference_kernel()).unwrap();
            let gram = m.trn_trn + DMatrix::identity(50, 50) * 1e-10;
            assert!(gram.cholesky().is_some(), "seed {seed}");
        }
    }

    #[test]
    fn adding_data_never_raises_variance() {
        let grid = make_test_grid(&DomainBox::unit(), 12).unwrap();
        let model = GpModel::new(reference_kernel(), DEFAULT_JITTER).unwrap();
        let mut inc = model.incremental(grid.points().to_vec()).unwrap();
        let mut prev = inc.variance().to_vec();
        for (i, p) in random_points(30, 8).into_iter().enumerate() {
            inc.push(p, i as f64 * 0.1).unwrap();
            for (now, before) in inc.variance().iter().zip(&prev) {
                assert!(*now <= before + 1e-9);
                assert!(*now >= -1e-8);
            }
            prev = inc.variance().to_vec();
        }
    }
}
