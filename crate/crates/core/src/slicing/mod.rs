//! Random affine and projective slices of algebraic manifolds, their
//! intersections with the manifold, and the density correction weight.

mod intersect;
pub(crate) mod linear;
mod weight;

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::expressions::{
    CompiledPolynomial, ExprError, Polynomial, PolynomialSystem, PowerTable,
};
use crate::solvers::SolverError;

pub use intersect::{intersect, intersect_explicit, intersect_projective, IntersectMethod};
pub use weight::{alpha_weight, normal_projection, weight_constant, PIVOT_DROP_TOL};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SliceError {
    #[error("invalid manifold: {0}")]
    InvalidManifold(String),
    #[error("slice has shape {found_rows}x{found_cols}, expected {rows}x{cols}")]
    SliceShape {
        rows: usize,
        cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
    #[error("slice matrix is numerically rank deficient")]
    DegenerateSlice,
    #[error("{found} real intersection points exceed the degree bound {bound}")]
    TooManyPoints { found: usize, bound: usize },
    #[error("all {paths} solver paths failed")]
    AllPathsFailed { paths: usize },
    #[error("Jacobian at {point:?} has numerical rank {rank}, expected {expected}")]
    RankMismatch {
        point: Vec<f64>,
        rank: usize,
        expected: usize,
    },
    #[error("operation requires a {0} manifold")]
    WrongKind(&'static str),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Axis-aligned box with closed coordinate intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxRegion {
    pub bounds: Vec<(f64, f64)>,
}

impl BoxRegion {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, SliceError> {
        for &(lo, hi) in &bounds {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(SliceError::InvalidManifold(format!(
                    "empty interval [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { bounds })
    }

    /// The whole space, in `dim` coordinates.
    pub fn unbounded(dim: usize) -> Self {
        Self {
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); dim],
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.bounds)
            .all(|(&v, &(lo, hi))| lo <= v && v <= hi)
    }
}

/// Value, Jacobian and scaled-residual evaluation of a fixed system in real
/// arithmetic.
#[derive(Debug)]
pub(crate) struct RealSystem {
    n: usize,
    values: Vec<CompiledPolynomial>,
    magnitudes: Vec<CompiledPolynomial>,
    jacobian: Vec<Vec<CompiledPolynomial>>,
    max_degree: u32,
}

impl RealSystem {
    fn new(sys: &PolynomialSystem) -> Self {
        let n = sys.num_variables();
        let vars = sys.variables();
        let polys = sys.polynomials();
        Self {
            n,
            values: polys.iter().map(CompiledPolynomial::new).collect(),
            magnitudes: polys
                .iter()
                .map(|p| {
                    let abs =
                        Polynomial::from_terms(vars, p.terms().map(|(e, c)| (e.clone(), c.abs())))
                            .expect("same variables");
                    CompiledPolynomial::new(&abs)
                })
                .collect(),
            jacobian: polys
                .iter()
                .map(|p| {
                    (0..n)
                        .map(|j| CompiledPolynomial::new(&p.differentiate_index(j)))
                        .collect()
                })
                .collect(),
            max_degree: sys.degrees().into_iter().max().unwrap_or(0).max(1),
        }
    }

    fn table(&self, x: &[f64]) -> PowerTable<f64> {
        let mut t = PowerTable::new(self.n, self.max_degree);
        t.fill(x);
        t
    }

    pub(crate) fn jacobian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let t = self.table(x);
        self.jacobian
            .iter()
            .map(|row| row.iter().map(|p| p.eval_with(&t)).collect())
            .collect()
    }

    /// Absolute residual `max |F_i|` and the scaled residual
    /// `max |F_i| / max(1, sum |c| |x^a|)`.
    pub(crate) fn residuals(&self, x: &[f64]) -> (f64, f64) {
        let t = self.table(x);
        let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let ta = self.table(&abs);
        let mut absolute = 0.0f64;
        let mut scaled = 0.0f64;
        for (p, m) in self.values.iter().zip(&self.magnitudes) {
            let v = p.eval_with(&t).abs();
            absolute = absolute.max(v);
            scaled = scaled.max(v / m.eval_with(&ta).max(1.0));
        }
        (absolute, scaled)
    }
}

/// An algebraic manifold: the nonsingular real zeros of a polynomial system,
/// optionally restricted to a box.
#[derive(Clone, Debug)]
pub struct ManifoldSpec {
    system: PolynomialSystem,
    dim: usize,
    degree_bound: usize,
    region: Option<BoxRegion>,
    projective: bool,
    shift: Option<Vec<f64>>,
    /// The system in shifted coordinates `y = x - shift`.
    working: PolynomialSystem,
    compiled: Arc<RealSystem>,
}

impl ManifoldSpec {
    /// An affine manifold of dimension `dim` cut out by `system`.
    pub fn new(
        system: PolynomialSystem,
        dim: usize,
        degree_bound: usize,
    ) -> Result<Self, SliceError> {
        let n_ambient = system.num_variables();
        if dim == 0 || dim >= n_ambient {
            return Err(SliceError::InvalidManifold(format!(
                "dimension {dim} must lie strictly between 0 and {n_ambient}"
            )));
        }
        if system.num_equations() < n_ambient - dim {
            return Err(SliceError::InvalidManifold(format!(
                "{} equations cannot cut out a manifold of codimension {}",
                system.num_equations(),
                n_ambient - dim
            )));
        }
        if degree_bound == 0 {
            return Err(SliceError::InvalidManifold(
                "degree bound must be at least 1".into(),
            ));
        }
        let compiled = Arc::new(RealSystem::new(&system));
        Ok(Self {
            working: system.clone(),
            system,
            dim,
            degree_bound,
            region: None,
            projective: false,
            shift: None,
            compiled,
        })
    }

    /// A projective manifold of dimension `dim` in `P^{N-1}` given by a
    /// homogeneous system in `N` variables.
    pub fn new_projective(
        system: PolynomialSystem,
        dim: usize,
        degree_bound: usize,
    ) -> Result<Self, SliceError> {
        let n_ambient = system.num_variables();
        if dim == 0 || dim + 1 >= n_ambient {
            return Err(SliceError::InvalidManifold(format!(
                "projective dimension {dim} must lie strictly between 0 and {}",
                n_ambient.saturating_sub(1)
            )));
        }
        if let Some(i) = system
            .polynomials()
            .iter()
            .position(|p| !p.is_homogeneous())
        {
            return Err(SliceError::InvalidManifold(format!(
                "equation {} is not homogeneous",
                i + 1
            )));
        }
        if system.num_equations() < n_ambient - 1 - dim {
            return Err(SliceError::InvalidManifold(
                "too few equations for the stated dimension".into(),
            ));
        }
        if degree_bound == 0 {
            return Err(SliceError::InvalidManifold(
                "degree bound must be at least 1".into(),
            ));
        }
        let compiled = Arc::new(RealSystem::new(&system));
        Ok(Self {
            working: system.clone(),
            system,
            dim,
            degree_bound,
            region: None,
            projective: true,
            shift: None,
            compiled,
        })
    }

    pub fn with_region(mut self, region: BoxRegion) -> Result<Self, SliceError> {
        if region.bounds.len() != self.ambient_dim() {
            return Err(SliceError::InvalidManifold(format!(
                "box has {} intervals for {} variables",
                region.bounds.len(),
                self.ambient_dim()
            )));
        }
        self.region = Some(region);
        Ok(self)
    }

    /// Slices the translated manifold `M - shift` instead of `M`. Returned
    /// points are in the original coordinates.
    pub fn with_shift(mut self, shift: Vec<f64>) -> Result<Self, SliceError> {
        if self.projective {
            return Err(SliceError::WrongKind("affine"));
        }
        let n = self.ambient_dim();
        if shift.len() != n {
            return Err(SliceError::InvalidManifold(format!(
                "shift has {} entries for {n} variables",
                shift.len()
            )));
        }
        let vars = self.system.variables().to_vec();
        let identity: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let polys = self
            .system
            .polynomials()
            .iter()
            .map(|p| p.compose_affine(&shift, &identity, &vars))
            .collect::<Result<Vec<_>, _>>()?;
        self.working = PolynomialSystem::new(&vars, polys)?;
        self.compiled = Arc::new(RealSystem::new(&self.working));
        self.shift = Some(shift);
        Ok(self)
    }

    /// Bezout number of the system obtained by slicing and squaring: the
    /// product of the degrees for a complete intersection, otherwise the
    /// largest degree raised to the codimension.
    pub fn default_degree_bound(system: &PolynomialSystem, dim: usize, projective: bool) -> usize {
        let n_ambient = system.num_variables();
        let codim = if projective {
            n_ambient.saturating_sub(1 + dim)
        } else {
            n_ambient.saturating_sub(dim)
        };
        let degrees = system.degrees();
        let bound = if degrees.len() == codim {
            degrees.iter().map(|&d| d as usize).product()
        } else {
            let max = degrees.iter().copied().max().unwrap_or(1) as usize;
            max.pow(codim as u32)
        };
        bound.max(1)
    }

    pub fn system(&self) -> &PolynomialSystem {
        &self.system
    }

    pub fn variables(&self) -> &[String] {
        self.system.variables()
    }

    /// Number of coordinates `N`.
    pub fn ambient_dim(&self) -> usize {
        self.system.num_variables()
    }

    /// Manifold dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of rows of a slice matrix.
    pub fn slice_rows(&self) -> usize {
        self.dim
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn region(&self) -> Option<&BoxRegion> {
        self.region.as_ref()
    }

    pub fn is_projective(&self) -> bool {
        self.projective
    }

    pub fn shift(&self) -> Option<&[f64]> {
        self.shift.as_deref()
    }

    pub(crate) fn working_system(&self) -> &PolynomialSystem {
        &self.working
    }

    pub(crate) fn compiled(&self) -> &RealSystem {
        &self.compiled
    }

    /// Coordinates in the shifted frame.
    pub(crate) fn to_working(&self, x: &[f64]) -> Vec<f64> {
        match &self.shift {
            Some(s) => x.iter().zip(s).map(|(a, b)| a - b).collect(),
            None => x.to_vec(),
        }
    }

    pub(crate) fn from_working(&self, y: &[f64]) -> Vec<f64> {
        match &self.shift {
            Some(s) => y.iter().zip(s).map(|(a, b)| a + b).collect(),
            None => y.to_vec(),
        }
    }

    /// Largest `|F_i(x)|` in the original coordinates.
    pub fn residual(&self, x: &[f64]) -> Result<f64, SliceError> {
        Ok(self.system.residual(x)?)
    }
}

/// The affine subspace `{x : A x = b}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSlice {
    /// `n` rows of length `N`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl AffineSlice {
    /// Largest `|A x - b|` entry.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| (row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - bi).abs())
            .fold(0.0, f64::max)
    }
}

/// The affine subspace `u + span(v_1, ..., v_{N-n})`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitSlice {
    pub u: Vec<f64>,
    pub v: Vec<Vec<f64>>,
}

impl ExplicitSlice {
    /// An implicit description `{x : A x = b}` of the same subspace, with
    /// orthonormal rows of `A`.
    pub fn to_implicit(&self) -> Result<AffineSlice, SliceError> {
        let p = linear::Parameterization::from_explicit(&self.u, &self.v)
            .ok_or(SliceError::DegenerateSlice)?;
        Ok(AffineSlice { a: p.a, b: p.b })
    }
}

/// The projective subspace `{[x] : A x = 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectiveSlice {
    pub a: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Slice {
    Affine(AffineSlice),
    Explicit(ExplicitSlice),
    Projective(ProjectiveSlice),
}

/// One real intersection point.
#[derive(Clone, Debug, PartialEq)]
pub struct IntersectionPoint {
    /// Coordinates in the original frame; unit representatives for
    /// projective manifolds.
    pub coordinates: Vec<f64>,
    /// Density correction α(x); identically 1 for projective manifolds.
    pub alpha: f64,
    /// Largest absolute value of the manifold and slice equations.
    pub residual: f64,
}

/// `M ∩ L` together with solver accounting.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedIntersection {
    pub slice: Slice,
    pub points: Vec<IntersectionPoint>,
    /// Real points discarded because they lie outside the box.
    pub rejected_by_region: usize,
    /// Paths that neither converged nor diverged, plus converged endpoints
    /// that failed verification on a square system.
    pub path_failures: usize,
    pub paths_total: usize,
    /// Solutions of a squared overdetermined system that do not solve the
    /// original one.
    pub spurious: usize,
}

/// Normalizes the sign of a projective representative so that the first
/// coordinate of magnitude above `1e-12` is positive.
pub fn normalize_projective(x: &[f64]) -> Vec<f64> {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = x
        .iter()
        .find(|v| v.abs() > 1e-12 * n.max(f64::MIN_POSITIVE))
        .map_or(1.0, |v| v.signum());
    x.iter().map(|v| sign * v / n + 0.0).collect()
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

/// Draws `(A, b)` with i.i.d. standard Gaussian entries, `A` of size `n x N`.
pub fn sample_affine_slice<R: Rng + ?Sized>(
    rng: &mut R,
    manifold: &ManifoldSpec,
) -> AffineSlice {
    let n = manifold.dim();
    let a = gaussian_matrix(rng, n, manifold.ambient_dim());
    let b = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    AffineSlice { a, b }
}

/// Draws a slice in explicit form from a Gaussian `(N - n + 1) x (N + 1)`
/// matrix `U`: the affine chart `{last coordinate = 1}` of the row span of `U`.
///
/// Returns the slice and the number of rank-deficient draws that were
/// discarded.
pub fn sample_explicit_slice<R: Rng + ?Sized>(
    rng: &mut R,
    ambient_dim: usize,
    dim: usize,
) -> (ExplicitSlice, usize) {
    assert!(dim < ambient_dim, "slice dimension must be positive");
    let rows = ambient_dim - dim + 1;
    let mut resampled = 0;
    loop {
        let u_mat = gaussian_matrix(rng, rows, ambient_dim + 1);
        if let Some(slice) = explicit_from_matrix(&u_mat, ambient_dim) {
            return (slice, resampled);
        }
        resampled += 1;
    }
}

fn explicit_from_matrix(u_mat: &[Vec<f64>], ambient_dim: usize) -> Option<ExplicitSlice> {
    let rows = u_mat.len();
    let w: Vec<f64> = u_mat.iter().map(|r| r[ambient_dim]).collect();
    let ww: f64 = w.iter().map(|x| x * x).sum();
    if ww == 0.0 {
        return None;
    }
    let combine = |lambda: &[f64]| -> Vec<f64> {
        (0..ambient_dim)
            .map(|j| lambda.iter().zip(u_mat).map(|(l, r)| l * r[j]).sum())
            .collect()
    };
    let lambda_u: Vec<f64> = w.iter().map(|x| x / ww).collect();
    let u = combine(&lambda_u);
    let w_unit: Vec<f64> = w.iter().map(|x| x / ww.sqrt()).collect();
    let lambdas = linear::complement(&[w_unit], rows);
    let v: Vec<Vec<f64>> = lambdas.iter().map(|l| combine(l)).collect();
    // rank check on the directions
    linear::orthonormalize_rows(&v)?;
    Some(ExplicitSlice { u, v })
}

/// Draws `A` with i.i.d. standard Gaussian entries, of size `n x N` for a
/// projective manifold of dimension `n` in `P^{N-1}`.
pub fn sample_projective_slice<R: Rng + ?Sized>(
    rng: &mut R,
    manifold: &ManifoldSpec,
) -> ProjectiveSlice {
    ProjectiveSlice {
        a: gaussian_matrix(rng, manifold.dim(), manifold.ambient_dim()),
    }
}
