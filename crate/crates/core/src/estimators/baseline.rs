//! Volume of a plane curve from uniformly random lines meeting a disc.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use super::integrate::is_slice_breakdown;
use super::{mean_and_variance, EstimateError, EstimatorConfig, EstimatorReport};
use crate::slicing::{intersect, AffineSlice, ManifoldSpec};

/// Relative slack when checking that intersection points lie in the disc.
const DISC_SLACK: f64 = 1e-9;

fn check_curve(manifold: &ManifoldSpec, radius: f64, k: u64) -> Result<(), EstimateError> {
    if manifold.is_projective() || manifold.ambient_dim() != 2 || manifold.dim() != 1 {
        return Err(EstimateError::InvalidArgument(
            "the baseline needs an affine plane curve".into(),
        ));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(EstimateError::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if k < 2 {
        return Err(EstimateError::InvalidArgument(format!(
            "at least 2 lines are required, got {k}"
        )));
    }
    Ok(())
}

/// Per-line values `π R h_i`, where `h_i` counts the points of the curve on
/// line `i`; lines have a uniform direction and a uniform signed offset in
/// `[-R, R]`. Their mean is `(h / g) · 2πR` with `g = 2k` the number of
/// crossings with the circle of radius `R`.
pub fn baseline_sphere_values(
    manifold: &ManifoldSpec,
    radius: f64,
    k: u64,
    config: &EstimatorConfig,
) -> Result<(Vec<f64>, u64), EstimateError> {
    check_curve(manifold, radius, k)?;
    let pool = config.pool()?;
    let results: Vec<Result<(f64, bool), EstimateError>> = pool.install(|| {
        (0..k)
            .into_par_iter()
            .map(|i| {
                let mut rng = config.slice_rng(i);
                let phi = rng.random_range(0.0..PI);
                let offset = rng.random_range(-radius..radius);
                let slice = AffineSlice {
                    a: vec![vec![phi.cos(), phi.sin()]],
                    b: vec![offset],
                };
                let wi = match intersect(manifold, &slice, &config.solver, config.method, &mut rng)
                {
                    Ok(wi) => wi,
                    Err(e) if is_slice_breakdown(&e) => return Ok((0.0, true)),
                    Err(e) => return Err(e.into()),
                };
                for p in &wi.points {
                    let r = p.coordinates.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if r > radius * (1.0 + DISC_SLACK) {
                        return Err(EstimateError::OutsideDisc {
                            point: p.coordinates.clone(),
                            radius,
                        });
                    }
                }
                Ok((PI * radius * wi.points.len() as f64, wi.path_failures > 0))
            })
            .collect()
    });
    let mut values = Vec::with_capacity(k as usize);
    let mut breakdowns = 0;
    for r in results {
        let (v, b) = r?;
        values.push(v);
        breakdowns += u64::from(b);
    }
    Ok((values, breakdowns))
}

/// The sphere-line estimate `(h / g) · vol(E)` of the length of a plane
/// curve contained in the disc `E` of radius `radius`.
pub fn baseline_sphere_estimate(
    manifold: &ManifoldSpec,
    radius: f64,
    k: u64,
    config: &EstimatorConfig,
) -> Result<EstimatorReport, EstimateError> {
    let (values, breakdowns) = baseline_sphere_values(manifold, radius, k, config)?;
    let (mean, variance) = mean_and_variance(&values);
    let empty = values.iter().filter(|&&v| v == 0.0).count() as u64;
    let points = values.iter().map(|v| (v / (PI * radius)).round() as u64).sum();
    Ok(EstimatorReport {
        mean,
        variance,
        k,
        deterministic_variance_bound: None,
        failures: 0,
        empty_slices: empty,
        breakdown_slices: breakdowns,
        unreliable: breakdowns as f64 / k as f64 > config.breakdown_threshold,
        points,
        rejected_by_region: 0,
        scale: 1.0,
    })
}
