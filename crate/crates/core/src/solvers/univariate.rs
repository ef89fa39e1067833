//! All roots of a univariate polynomial by Aberth–Ehrlich iteration.

use num_complex::Complex64;

use super::{ComplexSolution, SolverError, SolverSettings};

const ABERTH_MAX_ITERS: usize = 500;
const POLISH_ITERS: usize = 8;

/// Finds all roots, with multiplicity, of `c[0] + c[1] z + ... + c[d] z^d`.
///
/// Coefficients are given in ascending order. Trailing coefficients that are
/// exactly zero are trimmed. The reported residual of a root is the backward
/// error `|p(z)| / sum_i |c_i| |z|^i`.
pub fn solve_univariate(
    coefficients: &[Complex64],
    settings: &SolverSettings,
) -> Result<Vec<ComplexSolution>, SolverError> {
    let zero = Complex64::new(0.0, 0.0);
    let last = coefficients
        .iter()
        .rposition(|c| *c != zero)
        .ok_or(SolverError::ZeroPolynomial)?;
    if last == 0 {
        return Err(SolverError::ConstantPolynomial);
    }
    let coeffs = &coefficients[..=last];

    // zero roots are exact; peel them off
    let zeros = coeffs.iter().position(|c| *c != zero).unwrap_or(0);
    let reduced = &coeffs[zeros..];
    let mut roots = vec![zero; zeros];
    let degree = reduced.len() - 1;
    if degree > 0 {
        let lead = reduced[degree];
        let monic: Vec<Complex64> = reduced.iter().map(|c| c / lead).collect();
        roots.extend(aberth(&monic));
    }

    Ok(roots
        .into_iter()
        .map(|z| {
            let z = if z == zero { z } else { polish(coeffs, z) };
            let residual = backward_error(coeffs, z);
            ComplexSolution {
                coordinates: vec![z],
                residual,
                converged: residual <= settings.residual_tolerance,
                condition_estimate: condition(coeffs, z),
            }
        })
        .collect())
}

/// Real-coefficient convenience wrapper.
pub fn solve_univariate_real(
    coefficients: &[f64],
    settings: &SolverSettings,
) -> Result<Vec<ComplexSolution>, SolverError> {
    let c: Vec<Complex64> = coefficients.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    solve_univariate(&c, settings)
}

/// Horner evaluation of `p` and `p'`.
fn eval_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn backward_error(coeffs: &[Complex64], z: Complex64) -> f64 {
    let (p, _) = eval_with_derivative(coeffs, z);
    let r = z.norm();
    let mut scale = 0.0;
    for c in coeffs.iter().rev() {
        scale = scale * r + c.norm();
    }
    if scale == 0.0 {
        0.0
    } else {
        p.norm() / scale
    }
}

fn condition(coeffs: &[Complex64], z: Complex64) -> f64 {
    let (_, dp) = eval_with_derivative(coeffs, z);
    let r = z.norm();
    let mut scale = 0.0;
    for c in coeffs.iter().rev() {
        scale = scale * r + c.norm();
    }
    if dp.norm() == 0.0 {
        f64::INFINITY
    } else {
        scale / (dp.norm() * (1.0 + r))
    }
}

/// Fujiwara's bound on the root moduli of a monic polynomial.
fn fujiwara_bound(monic: &[Complex64]) -> f64 {
    let n = monic.len() - 1;
    let mut bound: f64 = 0.0;
    for k in 1..=n {
        let mut c = monic[n - k].norm();
        if k == n {
            c /= 2.0;
        }
        bound = bound.max(c.powf(1.0 / k as f64));
    }
    2.0 * bound
}

fn aberth(monic: &[Complex64]) -> Vec<Complex64> {
    let n = monic.len() - 1;
    if n == 1 {
        return vec![-monic[0]];
    }
    let radius = fujiwara_bound(monic).max(f64::MIN_POSITIVE);
    // perturbed circle: offset angle avoids symmetric stalls on real axis
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = std::f64::consts::TAU * (k as f64) / (n as f64) + 0.4;
            Complex64::from_polar(radius * (1.0 + 0.01 * (k as f64 % 3.0)), theta)
        })
        .collect();
    let mut done = vec![false; n];
    for _ in 0..ABERTH_MAX_ITERS {
        let mut all_done = true;
        for k in 0..n {
            if done[k] {
                continue;
            }
            let (p, dp) = eval_with_derivative(monic, z[k]);
            if p.norm() == 0.0 {
                done[k] = true;
                continue;
            }
            let ratio = p / dp;
            let mut sum = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != k {
                    let diff = z[k] - z[j];
                    if diff.norm() > 0.0 {
                        sum += diff.inv();
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - ratio * sum;
            let step = if denom.norm() == 0.0 || !denom.is_finite() {
                ratio
            } else {
                ratio / denom
            };
            if !step.is_finite() {
                continue;
            }
            z[k] -= step;
            if step.norm() <= 4.0 * f64::EPSILON * z[k].norm().max(f64::MIN_POSITIVE) {
                done[k] = true;
            } else {
                all_done = false;
            }
        }
        if all_done {
            break;
        }
    }
    z
}

fn polish(coeffs: &[Complex64], mut z: Complex64) -> Complex64 {
    let mut best = (backward_error(coeffs, z), z);
    for _ in 0..POLISH_ITERS {
        let (p, dp) = eval_with_derivative(coeffs, z);
        if dp.norm() == 0.0 {
            break;
        }
        let next = z - p / dp;
        if !next.is_finite() {
            break;
        }
        z = next;
        let err = backward_error(coeffs, z);
        if err < best.0 {
            best = (err, z);
        }
        if err <= f64::EPSILON {
            break;
        }
    }
    best.1
}
