//! Closed-form variance bound, Chebyshev sample-size planning and the
//! rejection constant κ.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use super::EstimateError;
use crate::slicing::weight_constant;

/// `vol(P^n) = π^{(n+1)/2} / Γ((n+1)/2)`, evaluated by the recursion
/// `vol(P^n) = vol(P^{n-2}) · 2π / (n - 1)` so that `vol(P^1) = π` exactly.
pub fn projective_volume(n: usize) -> f64 {
    let mut v = if n % 2 == 0 { 1.0 } else { PI };
    let mut m = 2 + n % 2;
    while m <= n {
        v *= 2.0 * PI / (m - 1) as f64;
        m += 2;
    }
    v
}

/// Deterministic bound on the variance of `f̄`:
/// `d^2 (1 + C)^{n+1} π^{n+1} / Γ((n+1)/2)^2 · K^2`
/// with `C = sup |x|^2` and `K = sup f`.
pub fn variance_bound(d: usize, sup_norm_sq: f64, n: usize, sup_f: f64) -> f64 {
    let d = d as f64;
    let e = n as f64 + 1.0;
    let g = gamma(e / 2.0);
    d * d * (1.0 + sup_norm_sq).powf(e) * PI.powf(e) / (g * g) * sup_f * sup_f
}

/// Sample sizes for accuracy `eps` at confidence parameter `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplePlan {
    /// `⌈σ² / (ε² p)⌉`.
    pub confidence_rule: u64,
    /// `⌈σ² / (ε² (1 - p))⌉` from Chebyshev's inequality with failure
    /// probability `1 - p`; undefined for `p = 1`.
    pub strict_rule: Option<u64>,
}

/// Number of slices so that the empirical mean is within `eps` of the
/// integral, given a variance bound. Both sizes are at least 1.
pub fn plan_sample_size(
    variance_bound: f64,
    eps: f64,
    confidence: f64,
) -> Result<SamplePlan, EstimateError> {
    if !(eps > 0.0) || eps.is_nan() {
        return Err(EstimateError::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if !(confidence > 0.0 && confidence <= 1.0) {
        return Err(EstimateError::InvalidArgument(format!(
            "confidence must lie in (0, 1], got {confidence}"
        )));
    }
    if !(variance_bound >= 0.0) || !variance_bound.is_finite() {
        return Err(EstimateError::InvalidArgument(format!(
            "variance bound must be finite and nonnegative, got {variance_bound}"
        )));
    }
    let size = |denominator: f64| -> u64 {
        let k = (variance_bound / (eps * eps * denominator)).ceil();
        if k.is_finite() {
            (k as u64).max(1)
        } else {
            u64::MAX
        }
    };
    Ok(SamplePlan {
        confidence_rule: size(confidence),
        strict_rule: (confidence < 1.0).then(|| size(1.0 - confidence)),
    })
}

/// `κ = 1/(dK) · Γ((n+1)/2)/π^{(n+1)/2} · (1 + C)^{-(n+1)/2}`, which makes
/// `κ f̄ <= 1` on every slice when `f <= K` and `|x|^2 <= C` on the manifold.
pub fn kappa(d: usize, k_bound: f64, c_bound: f64, n: usize) -> f64 {
    let e = (n as f64 + 1.0) / 2.0;
    weight_constant(n) / (d as f64 * k_bound) / (1.0 + c_bound).powf(e)
}

/// `κ = 1/(dK)` for projective manifolds, where every weight is 1.
pub fn kappa_projective(d: usize, k_bound: f64) -> f64 {
    1.0 / (d as f64 * k_bound)
}
