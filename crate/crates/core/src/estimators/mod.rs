//! Monte Carlo integration and rejection sampling over random slices,
//! variance bounds and sample-size planning, and the sphere-line baseline.

mod baseline;
mod bounds;
mod integrate;
mod sampling;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expressions::{ExprError, ScalarExpression};
use crate::slicing::{IntersectMethod, ManifoldSpec, SliceError, WeightedIntersection};
use crate::solvers::SolverSettings;

pub use baseline::{baseline_sphere_estimate, baseline_sphere_values};
pub use bounds::{
    kappa, kappa_projective, plan_sample_size, projective_volume, variance_bound, SamplePlan,
};
pub use integrate::{estimate_integral, estimate_integrals, slice_values, SliceRecord};
pub use sampling::{
    estimate_bounds_by_exploration, sample_points, sample_points_projective, ExplorationBounds,
    RejectionConfig, Sample, SamplePoint,
};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EstimateError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Slice(#[from] SliceError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(
        "kappa * fbar = {value} exceeds 1 at trial {trial}; the bounds K or C are too small"
    )]
    KappaViolated { value: f64, trial: u64 },
    #[error(
        "expected acceptance rate {rate:.3e} after {trials} trials is below the floor {floor:.1e}; \
         translate the manifold towards the origin, tighten the box, or lower C"
    )]
    AcceptanceFloor { rate: f64, trials: u64, floor: f64 },
    #[error("no intersection point was found in {trials} exploration slices")]
    NoPointsFound { trials: u64 },
    #[error("intersection point {point:?} lies outside the disc of radius {radius}")]
    OutsideDisc { point: Vec<f64>, radius: f64 },
}

/// Shared settings for the slice-based estimators.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub solver: SolverSettings,
    pub method: IntersectMethod,
    /// Draw affine slices in explicit form `u + span(v_i)` instead of `(A, b)`.
    pub explicit_slices: bool,
    pub seed: u64,
    /// Distinguishes independent runs that share a seed.
    pub run: u32,
    /// Worker threads; results do not depend on this value.
    pub workers: usize,
    /// Breakdown rate above which a report is flagged unreliable.
    pub breakdown_threshold: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            method: IntersectMethod::Auto,
            explicit_slices: false,
            seed: 0,
            run: 0,
            workers: 1,
            breakdown_threshold: 0.01,
        }
    }
}

impl EstimatorConfig {
    /// The random stream of slice `index`, independent of scheduling.
    pub fn slice_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((u64::from(self.run) << 40) | index);
        rng
    }

    fn pool(&self) -> Result<rayon::ThreadPool, EstimateError> {
        if self.workers == 0 {
            return Err(EstimateError::InvalidArgument(
                "at least one worker is required".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| EstimateError::InvalidArgument(e.to_string()))
    }
}

/// Summary of `k` per-slice values.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorReport {
    /// Empirical mean `E(f, k)`, times `vol(P^n)` for projective manifolds.
    pub mean: f64,
    /// Unbiased sample variance of the per-slice values, on the same scale
    /// as `mean`.
    pub variance: f64,
    pub k: u64,
    pub deterministic_variance_bound: Option<f64>,
    /// Total path failures over all slices.
    pub failures: u64,
    /// Slices that met the manifold in no point.
    pub empty_slices: u64,
    /// Slices with at least one path failure or a solver error.
    pub breakdown_slices: u64,
    pub unreliable: bool,
    /// Total intersection points used.
    pub points: u64,
    pub rejected_by_region: u64,
    /// Constant the slice values were multiplied by.
    pub scale: f64,
}

impl EstimatorReport {
    /// Chebyshev bound `s^2 / (eps^2 k)` on `P(|E(f, k) - ∫ f| >= eps)`.
    pub fn chebyshev_bound(&self, eps: f64) -> f64 {
        self.variance / (eps * eps * self.k as f64)
    }

    pub fn breakdown_rate(&self) -> f64 {
        self.breakdown_slices as f64 / self.k as f64
    }

    pub fn with_variance_bound(mut self, bound: f64) -> Self {
        self.deterministic_variance_bound = Some(bound);
        self
    }
}

/// Neumaier's compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Mean and unbiased variance by two compensated passes.
pub(crate) fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut s = CompensatedSum::default();
    values.iter().for_each(|&v| s.add(v));
    let mean = s.value() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let mut q = CompensatedSum::default();
    values.iter().for_each(|&v| q.add((v - mean) * (v - mean)));
    (mean, q.value() / (n - 1.0))
}

/// `f̄` of one intersection: `Σ f(x) / α(x)`, with α = 1 for projective
/// manifolds. An empty intersection gives 0.
pub fn fbar(
    f: &ScalarExpression,
    wi: &WeightedIntersection,
) -> Result<f64, EstimateError> {
    let mut total = 0.0;
    for p in &wi.points {
        total += f.evaluate(&p.coordinates)? / p.alpha;
    }
    Ok(total)
}

pub(crate) fn check_integrand(
    manifold: &ManifoldSpec,
    f: &ScalarExpression,
) -> Result<(), EstimateError> {
    if f.variables() != manifold.variables() {
        return Err(EstimateError::InvalidArgument(format!(
            "integrand variables {:?} differ from manifold variables {:?}",
            f.variables(),
            manifold.variables()
        )));
    }
    Ok(())
}
