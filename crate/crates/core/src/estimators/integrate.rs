//! The empirical mean `E(f, k)` of `f̄` over i.i.d. Gaussian slices.

use rand::Rng;
use rayon::prelude::*;

use super::bounds::projective_volume;
use super::{
    check_integrand, fbar, mean_and_variance, EstimateError, EstimatorConfig, EstimatorReport,
};
use crate::expressions::ScalarExpression;
use crate::slicing::{
    intersect, intersect_explicit, intersect_projective, sample_affine_slice,
    sample_explicit_slice, sample_projective_slice, ManifoldSpec, SliceError,
    WeightedIntersection,
};

/// Slices processed per parallel batch.
const CHUNK: u64 = 1 << 14;

/// Outcome of one slice.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceRecord {
    /// `f̄` for each integrand, before any projective volume factor.
    pub values: Vec<f64>,
    pub points: usize,
    pub path_failures: usize,
    pub rejected_by_region: usize,
    /// The slice had a path failure or the solver gave up on it.
    pub breakdown: bool,
}

/// Solver errors that affect a single slice; they are counted rather than
/// aborting the run.
pub(crate) fn is_slice_breakdown(e: &SliceError) -> bool {
    matches!(
        e,
        SliceError::DegenerateSlice
            | SliceError::AllPathsFailed { .. }
            | SliceError::RankMismatch { .. }
    )
}

/// Draws a slice from `rng` and intersects it with the manifold.
pub(crate) fn slice_intersection<R: Rng + ?Sized>(
    manifold: &ManifoldSpec,
    config: &EstimatorConfig,
    rng: &mut R,
) -> Result<WeightedIntersection, SliceError> {
    if manifold.is_projective() {
        let s = sample_projective_slice(rng, manifold);
        intersect_projective(manifold, &s, &config.solver, config.method, rng)
    } else if config.explicit_slices {
        let (s, _) = sample_explicit_slice(rng, manifold.ambient_dim(), manifold.dim());
        intersect_explicit(manifold, &s, &config.solver, config.method, rng)
    } else {
        let s = sample_affine_slice(rng, manifold);
        intersect(manifold, &s, &config.solver, config.method, rng)
    }
}

fn process_slice(
    manifold: &ManifoldSpec,
    integrands: &[ScalarExpression],
    config: &EstimatorConfig,
    index: u64,
) -> Result<SliceRecord, EstimateError> {
    match slice_intersection(manifold, config, &mut config.slice_rng(index)) {
        Ok(wi) => Ok(SliceRecord {
            values: integrands
                .iter()
                .map(|f| fbar(f, &wi))
                .collect::<Result<_, _>>()?,
            points: wi.points.len(),
            path_failures: wi.path_failures,
            rejected_by_region: wi.rejected_by_region,
            breakdown: wi.path_failures > 0,
        }),
        Err(e) if is_slice_breakdown(&e) => Ok(SliceRecord {
            values: vec![0.0; integrands.len()],
            points: 0,
            path_failures: match e {
                SliceError::AllPathsFailed { paths } => paths,
                _ => 0,
            },
            rejected_by_region: 0,
            breakdown: true,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Processes slices `start..end` in parallel, returning records in index
/// order or the first error in index order.
fn records(
    pool: &rayon::ThreadPool,
    manifold: &ManifoldSpec,
    integrands: &[ScalarExpression],
    config: &EstimatorConfig,
    start: u64,
    end: u64,
) -> Result<Vec<SliceRecord>, EstimateError> {
    let results: Vec<Result<SliceRecord, EstimateError>> = pool.install(|| {
        (start..end)
            .into_par_iter()
            .map(|i| process_slice(manifold, integrands, config, i))
            .collect()
    });
    results.into_iter().collect()
}

fn validate(
    manifold: &ManifoldSpec,
    integrands: &[ScalarExpression],
    k: u64,
) -> Result<(), EstimateError> {
    if k < 2 {
        return Err(EstimateError::InvalidArgument(format!(
            "at least 2 slices are required, got {k}"
        )));
    }
    integrands
        .iter()
        .try_for_each(|f| check_integrand(manifold, f))
}

/// Per-slice records for `k` slices, in slice order.
pub fn slice_values(
    manifold: &ManifoldSpec,
    integrands: &[ScalarExpression],
    k: u64,
    config: &EstimatorConfig,
) -> Result<Vec<SliceRecord>, EstimateError> {
    validate(manifold, integrands, k)?;
    let pool = config.pool()?;
    records(&pool, manifold, integrands, config, 0, k)
}

/// Estimates `∫_M f` for several integrands from one shared set of `k`
/// slices.
pub fn estimate_integrals(
    manifold: &ManifoldSpec,
    integrands: &[ScalarExpression],
    k: u64,
    config: &EstimatorConfig,
) -> Result<Vec<EstimatorReport>, EstimateError> {
    validate(manifold, integrands, k)?;
    let pool = config.pool()?;
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(k as usize); integrands.len()];
    let (mut failures, mut empty, mut breakdowns, mut points, mut rejected) = (0, 0, 0, 0, 0);
    let mut start = 0;
    while start < k {
        let end = (start + CHUNK).min(k);
        for r in records(&pool, manifold, integrands, config, start, end)? {
            for (v, x) in values.iter_mut().zip(&r.values) {
                v.push(*x);
            }
            failures += r.path_failures as u64;
            empty += u64::from(r.points == 0 && !r.breakdown);
            breakdowns += u64::from(r.breakdown);
            points += r.points as u64;
            rejected += r.rejected_by_region as u64;
        }
        start = end;
    }
    let scale = if manifold.is_projective() {
        projective_volume(manifold.dim())
    } else {
        1.0
    };
    Ok(values
        .iter()
        .map(|v| {
            let (mean, variance) = mean_and_variance(v);
            let report = EstimatorReport {
                mean: scale * mean,
                variance: scale * scale * variance,
                k,
                deterministic_variance_bound: None,
                failures,
                empty_slices: empty,
                breakdown_slices: breakdowns,
                unreliable: false,
                points,
                rejected_by_region: rejected,
                scale,
            };
            EstimatorReport {
                unreliable: report.breakdown_rate() > config.breakdown_threshold,
                ..report
            }
        })
        .collect())
}

/// Estimates `∫_M f` by the mean of `f̄` over `k` i.i.d. Gaussian slices;
/// for projective manifolds the mean is multiplied by `vol(P^n)`.
pub fn estimate_integral(
    manifold: &ManifoldSpec,
    f: &ScalarExpression,
    k: u64,
    config: &EstimatorConfig,
) -> Result<EstimatorReport, EstimateError> {
    Ok(estimate_integrals(manifold, std::slice::from_ref(f), k, config)?
        .pop()
        .expect("one integrand"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expressions::{parse_polynomial, parse_scalar_expression, variable_names, PolynomialSystem};
    use crate::slicing::{AffineSlice, IntersectMethod};
    use crate::solvers::SolverSettings;
    use std::f64::consts::PI;

    fn manifold(eq: &str, names: &[&str], dim: usize, d: usize, projective: bool) -> ManifoldSpec {
        let v = variable_names(names);
        let sys = PolynomialSystem::new(&v, vec![parse_polynomial(eq, &v).unwrap()]).unwrap();
        if projective {
            ManifoldSpec::new_projective(sys, dim, d).unwrap()
        } else {
            ManifoldSpec::new(sys, dim, d).unwrap()
        }
    }

    fn one(m: &ManifoldSpec) -> ScalarExpression {
        parse_scalar_expression("1", m.variables()).unwrap()
    }

    #[test]
    fn fbar_examples() {
        let m = manifold("x^2 + y^2 - 1", &["x", "y"], 1, 2, false);
        let mut rng = rand::rng();
        let far = AffineSlice {
            a: vec![vec![1.0, 0.0]],
            b: vec![5.0],
        };
        let wi = intersect(&m, &far, &SolverSettings::default(), IntersectMethod::Auto, &mut rng)
            .unwrap();
        assert_eq!(fbar(&one(&m), &wi).unwrap(), 0.0);
        let through = AffineSlice {
            a: vec![vec![1.0, 1.0]],
            b: vec![0.5],
        };
        let wi =
            intersect(&m, &through, &SolverSettings::default(), IntersectMethod::Auto, &mut rng)
                .unwrap();
        let v = fbar(&one(&m), &wi).unwrap();
        assert!((v - 2.0 * 2f64.sqrt() * PI).abs() < 1e-10);
        assert!((v - 8.8858).abs() < 1e-4);
    }

    #[test]
    fn projective_line_volume_is_exactly_pi() {
        let m = manifold("x0", &["x0", "x1", "x2"], 1, 1, true);
        for seed in 0..3 {
            let config = EstimatorConfig {
                seed,
                ..EstimatorConfig::default()
            };
            let r = estimate_integral(&m, &one(&m), 500, &config).unwrap();
            assert_eq!(r.mean, PI);
            assert_eq!(r.variance, 0.0);
            assert_eq!(r.points, 500);
        }
    }

    #[test]
    fn zero_integrand_gives_exactly_zero() {
        let m = manifold("x^2 + y^2 - 1", &["x", "y"], 1, 2, false);
        let zero = parse_scalar_expression("0", m.variables()).unwrap();
        let r = estimate_integral(&m, &zero, 100, &EstimatorConfig::default()).unwrap();
        assert_eq!(r.mean, 0.0);
    }

    #[test]
    fn report_matches_slice_values() {
        let m = manifold("x^2 + y^2 - 1", &["x", "y"], 1, 2, false);
        let config = EstimatorConfig {
            seed: 5,
            ..EstimatorConfig::default()
        };
        let f = parse_scalar_expression("x^2", m.variables()).unwrap();
        let recs = slice_values(&m, std::slice::from_ref(&f), 300, &config).unwrap();
        let vals: Vec<f64> = recs.iter().map(|r| r.values[0]).collect();
        let mean = vals.iter().sum::<f64>() / 300.0;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 299.0;
        let r = estimate_integral(&m, &f, 300, &config).unwrap();
        assert!((r.mean - mean).abs() < 1e-12);
        assert!((r.variance - var).abs() < 1e-9 * var.max(1.0));
        assert_eq!(
            r.empty_slices,
            recs.iter().filter(|r| r.points == 0).count() as u64
        );
    }

    #[test]
    fn independent_of_worker_count() {
        let m = manifold("x^4 + y^4 - 3*x^2 - x*y^2 - y + 1", &["x", "y"], 1, 4, false);
        let base = EstimatorConfig {
            seed: 42,
            ..EstimatorConfig::default()
        };
        let a = estimate_integral(&m, &one(&m), 2000, &base).unwrap();
        for workers in [2, 3, 8] {
            let c = EstimatorConfig {
                workers,
                ..base.clone()
            };
            assert_eq!(estimate_integral(&m, &one(&m), 2000, &c).unwrap(), a);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let m = manifold("x^2 + y^2 - 1", &["x", "y"], 1, 2, false);
        assert!(estimate_integral(&m, &one(&m), 1, &EstimatorConfig::default()).is_err());
        let other = parse_scalar_expression("1", &variable_names(&["u", "v"])).unwrap();
        assert!(estimate_integral(&m, &other, 10, &EstimatorConfig::default()).is_err());
    }

    #[test]
    fn domain_errors_propagate() {
        let m = manifold("x^2 + y^2 - 1", &["x", "y"], 1, 2, false);
        let f = parse_scalar_expression("log(x - 5)", m.variables()).unwrap();
        assert!(matches!(
            estimate_integral(&m, &f, 200, &EstimatorConfig::default()),
            Err(EstimateError::Expr(_))
        ));
    }
}
