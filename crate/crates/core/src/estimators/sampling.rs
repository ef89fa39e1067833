//! Rejection sampling of i.i.d. points with density proportional to `f`.

use rand::Rng;
use rayon::prelude::*;

use super::bounds::{kappa, kappa_projective};
use super::integrate::{is_slice_breakdown, slice_intersection};
use super::{check_integrand, CompensatedSum, EstimateError, EstimatorConfig};
use crate::expressions::ScalarExpression;
use crate::slicing::ManifoldSpec;

/// Trials processed per parallel batch; fixed so results do not depend on
/// the number of workers.
const BATCH: u64 = 1024;
/// Trials before the acceptance floor is enforced.
const FLOOR_WARMUP: u64 = 1000;

/// Constants of the rejection step.
#[derive(Clone, Debug, PartialEq)]
pub struct RejectionConfig {
    /// A slice is accepted with probability `κ f̄`.
    pub kappa: f64,
    /// Upper bound `K` for `f` on the manifold, if known.
    pub k_bound: Option<f64>,
    /// Upper bound `C` for `|x|^2` on the (translated) manifold, if known.
    pub c_bound: Option<f64>,
    pub degree: usize,
    /// Smallest tolerated expected acceptance rate `κ E f̄`.
    pub acceptance_floor: f64,
}

impl RejectionConfig {
    /// κ from the bounds `f <= K` and `|x|^2 <= C`; `C` is ignored for
    /// projective manifolds.
    pub fn from_bounds(
        manifold: &ManifoldSpec,
        k_bound: f64,
        c_bound: f64,
    ) -> Result<Self, EstimateError> {
        if !(k_bound > 0.0 && k_bound.is_finite()) || !(c_bound >= 0.0 && c_bound.is_finite()) {
            return Err(EstimateError::InvalidArgument(format!(
                "need K > 0 and C >= 0, got K = {k_bound}, C = {c_bound}"
            )));
        }
        let d = manifold.degree_bound();
        let value = if manifold.is_projective() {
            kappa_projective(d, k_bound)
        } else {
            kappa(d, k_bound, c_bound, manifold.dim())
        };
        Ok(Self {
            kappa: value,
            k_bound: Some(k_bound),
            c_bound: (!manifold.is_projective()).then_some(c_bound),
            degree: d,
            acceptance_floor: 1e-6,
        })
    }

    /// A user-chosen κ; violations surface at run time.
    pub fn with_kappa(manifold: &ManifoldSpec, kappa: f64) -> Result<Self, EstimateError> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(EstimateError::InvalidArgument(format!(
                "kappa must be positive, got {kappa}"
            )));
        }
        Ok(Self {
            kappa,
            k_bound: None,
            c_bound: None,
            degree: manifold.degree_bound(),
            acceptance_floor: 1e-6,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplePoint {
    pub coordinates: Vec<f64>,
    pub alpha: f64,
    pub residual: f64,
    /// Index of the slice the point came from.
    pub trial: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub points: Vec<SamplePoint>,
    pub trials: u64,
    pub accepted: u64,
    pub breakdown_slices: u64,
    pub kappa: f64,
    /// Mean of `f̄` over all trials.
    pub mean_fbar: f64,
}

impl Sample {
    pub fn acceptance_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.accepted as f64 / self.trials as f64
        }
    }
}

struct Trial {
    fbar: f64,
    point: Option<SamplePoint>,
    breakdown: bool,
}

fn run_trial(
    manifold: &ManifoldSpec,
    f: &ScalarExpression,
    kappa: f64,
    config: &EstimatorConfig,
    index: u64,
) -> Result<Trial, EstimateError> {
    let mut rng = config.slice_rng(index);
    let wi = match slice_intersection(manifold, config, &mut rng) {
        Ok(wi) => wi,
        Err(e) if is_slice_breakdown(&e) => {
            return Ok(Trial {
                fbar: 0.0,
                point: None,
                breakdown: true,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let mut weights = Vec::with_capacity(wi.points.len());
    for p in &wi.points {
        let v = f.evaluate(&p.coordinates)?;
        if v < 0.0 {
            return Err(EstimateError::InvalidArgument(format!(
                "density is negative ({v}) at {:?}",
                p.coordinates
            )));
        }
        weights.push(v / p.alpha);
    }
    let fbar: f64 = weights.iter().sum();
    let p_accept = kappa * fbar;
    if p_accept > 1.0 {
        return Err(EstimateError::KappaViolated {
            value: p_accept,
            trial: index,
        });
    }
    let breakdown = wi.path_failures > 0;
    if fbar == 0.0 || rng.random::<f64>() >= p_accept {
        return Ok(Trial {
            fbar,
            point: None,
            breakdown,
        });
    }
    // choose x with probability f(x) / (α(x) f̄)
    let target = rng.random::<f64>() * fbar;
    let mut cumulative = 0.0;
    let mut chosen = weights.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        cumulative += w;
        if target < cumulative {
            chosen = i;
            break;
        }
    }
    let p = &wi.points[chosen];
    Ok(Trial {
        fbar,
        point: Some(SamplePoint {
            coordinates: p.coordinates.clone(),
            alpha: p.alpha,
            residual: p.residual,
            trial: index,
        }),
        breakdown,
    })
}

fn sample_with(
    manifold: &ManifoldSpec,
    f: &ScalarExpression,
    count: usize,
    rejection: &RejectionConfig,
    config: &EstimatorConfig,
) -> Result<Sample, EstimateError> {
    check_integrand(manifold, f)?;
    let pool = config.pool()?;
    let mut sample = Sample {
        points: Vec::with_capacity(count),
        trials: 0,
        accepted: 0,
        breakdown_slices: 0,
        kappa: rejection.kappa,
        mean_fbar: 0.0,
    };
    let mut total = CompensatedSum::default();
    let mut start = 0u64;
    while sample.points.len() < count {
        let end = start + BATCH;
        let trials: Vec<Result<Trial, EstimateError>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| run_trial(manifold, f, rejection.kappa, config, i))
                .collect()
        });
        for t in trials {
            let t = t?;
            sample.trials += 1;
            total.add(t.fbar);
            sample.breakdown_slices += u64::from(t.breakdown);
            if let Some(p) = t.point {
                sample.points.push(p);
                sample.accepted += 1;
                if sample.points.len() == count {
                    break;
                }
            }
        }
        sample.mean_fbar = total.value() / sample.trials as f64;
        if sample.points.len() < count && sample.trials >= FLOOR_WARMUP {
            let rate = rejection.kappa * sample.mean_fbar;
            if rate < rejection.acceptance_floor {
                return Err(EstimateError::AcceptanceFloor {
                    rate,
                    trials: sample.trials,
                    floor: rejection.acceptance_floor,
                });
            }
        }
        start = end;
    }
    Ok(sample)
}

/// Draws `count` i.i.d. points from the density `f / ∫ f` on an affine
/// manifold: a slice is kept with probability `κ f̄`, and one of its points
/// is chosen with probability `f(x) / (α(x) f̄)`.
pub fn sample_points(
    manifold: &ManifoldSpec,
    f: &ScalarExpression,
    count: usize,
    rejection: &RejectionConfig,
    config: &EstimatorConfig,
) -> Result<Sample, EstimateError> {
    if manifold.is_projective() {
        return Err(EstimateError::InvalidArgument(
            "use sample_points_projective for projective manifolds".into(),
        ));
    }
    sample_with(manifold, f, count, rejection, config)
}

/// Projective analogue of [`sample_points`] with unit weights; `κ` is
/// usually `1/(dK)`.
pub fn sample_points_projective(
    manifold: &ManifoldSpec,
    f: &ScalarExpression,
    count: usize,
    rejection: &RejectionConfig,
    config: &EstimatorConfig,
) -> Result<Sample, EstimateError> {
    if !manifold.is_projective() {
        return Err(EstimateError::InvalidArgument(
            "manifold is not projective".into(),
        ));
    }
    sample_with(manifold, f, count, rejection, config)
}

/// Estimated bounds from random slicing.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplorationBounds {
    /// `safety · max f` over the points seen.
    pub k_hat: f64,
    /// `safety · max |x|^2` over the points seen, in the translated frame.
    pub c_hat: f64,
    pub max_f: f64,
    pub max_norm_sq: f64,
    pub points_seen: u64,
}

/// Estimates `sup f` and `sup |x|^2` on the manifold from the intersection
/// points of `trials` random slices, inflating both by `safety`.
pub fn estimate_bounds_by_exploration(
    manifold: &ManifoldSpec,
    f: &ScalarExpression,
    trials: u64,
    safety: f64,
    config: &EstimatorConfig,
) -> Result<ExplorationBounds, EstimateError> {
    check_integrand(manifold, f)?;
    if trials == 0 {
        return Err(EstimateError::InvalidArgument(
            "at least one exploration trial is required".into(),
        ));
    }
    let pool = config.pool()?;
    let per_slice: Vec<Result<(f64, f64, u64), EstimateError>> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = config.slice_rng(i);
                let wi = match slice_intersection(manifold, config, &mut rng) {
                    Ok(wi) => wi,
                    Err(e) if is_slice_breakdown(&e) => return Ok((0.0, 0.0, 0)),
                    Err(e) => return Err(e.into()),
                };
                let mut max_f = f64::NEG_INFINITY;
                let mut max_norm = 0.0f64;
                for p in &wi.points {
                    max_f = max_f.max(f.evaluate(&p.coordinates)?);
                    let y = manifold.to_working(&p.coordinates);
                    max_norm = max_norm.max(y.iter().map(|v| v * v).sum());
                }
                Ok((max_f, max_norm, wi.points.len() as u64))
            })
            .collect()
    });
    let mut max_f = f64::NEG_INFINITY;
    let mut max_norm_sq = 0.0f64;
    let mut points_seen = 0;
    for r in per_slice {
        let (mf, mn, n) = r?;
        if n > 0 {
            max_f = max_f.max(mf);
            max_norm_sq = max_norm_sq.max(mn);
            points_seen += n;
        }
    }
    if points_seen == 0 {
        return Err(EstimateError::NoPointsFound { trials });
    }
    Ok(ExplorationBounds {
        k_hat: safety * max_f,
        c_hat: safety * max_norm_sq,
        max_f,
        max_norm_sq,
        points_seen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::estimate_integral;
    use crate::expressions::{parse_polynomial, parse_scalar_expression, variable_names, PolynomialSystem};

    fn circle(r2: &str) -> ManifoldSpec {
        let v = variable_names(&["x", "y"]);
        let p = parse_polynomial(&format!("x^2 + y^2 - {r2}"), &v).unwrap();
        ManifoldSpec::new(PolynomialSystem::new(&v, vec![p]).unwrap(), 1, 2).unwrap()
    }

    fn one(m: &ManifoldSpec) -> ScalarExpression {
        parse_scalar_expression("1", m.variables()).unwrap()
    }

    #[test]
    fn exploration_on_circles() {
        let m = circle("1");
        let b = estimate_bounds_by_exploration(&m, &one(&m), 200, 1.2, &EstimatorConfig::default())
            .unwrap();
        assert_eq!(b.k_hat, 1.2);
        assert!((b.c_hat - 1.2).abs() < 1e-12);
        let m2 = circle("4");
        let b2 =
            estimate_bounds_by_exploration(&m2, &one(&m2), 200, 1.2, &EstimatorConfig::default())
                .unwrap();
        assert!((b2.c_hat - 4.8).abs() < 1e-10);
    }

    #[test]
    fn exploration_without_points_fails() {
        let m = circle("1e-8");
        let f = one(&m);
        // a tiny circle is almost never hit by three random lines
        let r = estimate_bounds_by_exploration(&m, &f, 3, 1.2, &EstimatorConfig::default());
        assert!(matches!(r, Err(EstimateError::NoPointsFound { trials: 3 })));
    }

    #[test]
    fn kappa_violation_is_detected() {
        let m = circle("1");
        let rej = RejectionConfig::with_kappa(&m, 10.0).unwrap();
        let r = sample_points(&m, &one(&m), 5, &rej, &EstimatorConfig::default());
        assert!(matches!(r, Err(EstimateError::KappaViolated { .. })));
    }

    #[test]
    fn acceptance_floor_aborts() {
        let m = circle("1");
        let mut rej = RejectionConfig::from_bounds(&m, 1.0, 1.0).unwrap();
        rej.acceptance_floor = 0.9;
        let r = sample_points(&m, &one(&m), 100_000, &rej, &EstimatorConfig::default());
        assert!(matches!(r, Err(EstimateError::AcceptanceFloor { .. })));
    }

    #[test]
    fn acceptance_rate_matches_kappa_times_mean() {
        let m = circle("1");
        let rej = RejectionConfig::from_bounds(&m, 1.0, 1.0).unwrap();
        let config = EstimatorConfig {
            seed: 3,
            ..EstimatorConfig::default()
        };
        let s = sample_points(&m, &one(&m), 20_000, &rej, &config).unwrap();
        let expected = rej.kappa * 2.0 * std::f64::consts::PI;
        assert!((s.acceptance_rate() / expected - 1.0).abs() < 0.05);
        assert!((s.kappa * s.mean_fbar / expected - 1.0).abs() < 0.05);
        assert_eq!(s.points.len(), 20_000);
        assert_eq!(s.accepted, 20_000);
        // the integration estimate from the same kind of slices agrees
        let e = estimate_integral(&m, &one(&m), 2000, &config).unwrap();
        assert!((e.mean - 2.0 * std::f64::consts::PI).abs() < 0.3);
    }

    #[test]
    fn sampling_is_worker_independent() {
        let m = circle("1");
        let rej = RejectionConfig::from_bounds(&m, 1.0, 1.0).unwrap();
        let c1 = EstimatorConfig {
            seed: 9,
            ..EstimatorConfig::default()
        };
        let c4 = EstimatorConfig {
            workers: 4,
            ..c1.clone()
        };
        let a = sample_points(&m, &one(&m), 500, &rej, &c1).unwrap();
        let b = sample_points(&m, &one(&m), 500, &rej, &c4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_density_is_rejected() {
        let m = circle("1");
        let f = parse_scalar_expression("x - 2", m.variables()).unwrap();
        let rej = RejectionConfig::with_kappa(&m, 1e-3).unwrap();
        assert!(sample_points(&m, &f, 10, &rej, &EstimatorConfig::default()).is_err());
    }
}
