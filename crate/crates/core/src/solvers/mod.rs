//! Polynomial system solvers: univariate roots, Newton refinement and
//! total-degree homotopy continuation.

mod homotopy;
pub(crate) mod linalg;
mod newton;
mod univariate;

use num_complex::Complex64;
use thiserror::Error;

use crate::expressions::ExprError;

pub use homotopy::track_total_degree;
pub use newton::newton_refine;
pub(crate) use newton::CompiledSystem;
pub use univariate::{solve_univariate, solve_univariate_real};

/// Numerical knobs shared by all solvers.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    /// Scaled residual a solution must reach to count as converged.
    pub residual_tolerance: f64,
    pub newton_max_iters: usize,
    /// First continuation step in `t`.
    pub initial_step: f64,
    /// Largest continuation step in `t`.
    pub max_step: f64,
    /// Paths whose step falls below this are abandoned.
    pub min_step: f64,
    /// Relative Newton update size that ends a corrector loop.
    pub corrector_tolerance: f64,
    /// Imaginary parts below `real_threshold * (1 + |x|)` are treated as zero.
    pub real_threshold: f64,
    /// Solutions closer than this are merged.
    pub dedup_radius: f64,
    /// Fixed homotopy constant; drawn at random when `None`.
    pub gamma: Option<Complex64>,
    /// Track the paths of one system in parallel.
    pub parallel_paths: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            residual_tolerance: 1e-10,
            newton_max_iters: 50,
            initial_step: 0.1,
            max_step: 0.1,
            min_step: 1e-7,
            corrector_tolerance: 1e-7,
            real_threshold: 1e-8,
            dedup_radius: 1e-6,
            gamma: None,
            parallel_paths: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("residual_tolerance", self.residual_tolerance),
            ("initial_step", self.initial_step),
            ("max_step", self.max_step),
            ("min_step", self.min_step),
            ("corrector_tolerance", self.corrector_tolerance),
            ("real_threshold", self.real_threshold),
            ("dedup_radius", self.dedup_radius),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(SolverError::InvalidSettings(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.min_step > self.max_step {
            return Err(SolverError::InvalidSettings(
                "min_step exceeds max_step".into(),
            ));
        }
        if self.newton_max_iters == 0 {
            return Err(SolverError::InvalidSettings(
                "newton_max_iters must be at least 1".into(),
            ));
        }
        if let Some(g) = self.gamma {
            if !((g.norm() - 1.0).abs() < 1e-12) {
                return Err(SolverError::InvalidSettings(
                    "gamma must lie on the unit circle".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A candidate zero of a system.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSolution {
    pub coordinates: Vec<Complex64>,
    /// Largest absolute equation value at `coordinates`.
    pub residual: f64,
    pub converged: bool,
    /// Rough conditioning of the Jacobian at the solution; large values flag
    /// singular or nearly singular solutions.
    pub condition_estimate: f64,
}

impl ComplexSolution {
    /// Real part of the coordinates when every imaginary part is below
    /// `threshold * (1 + max |x_i|)`.
    pub fn real_part(&self, threshold: f64) -> Option<Vec<f64>> {
        let size = self.coordinates.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let tol = threshold * (1.0 + size);
        self.coordinates
            .iter()
            .all(|z| z.im.abs() <= tol)
            .then(|| self.coordinates.iter().map(|z| z.re).collect())
    }
}

/// Outcome of a homotopy run.
#[derive(Clone, Debug)]
pub struct TrackReport {
    pub paths_total: usize,
    pub paths_converged: usize,
    pub paths_diverged: usize,
    pub paths_failed: usize,
    /// Converged endpoints after merging duplicates.
    pub solutions: Vec<ComplexSolution>,
    /// The homotopy constant that was used.
    pub gamma: Complex64,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("polynomial is a nonzero constant")]
    ConstantPolynomial,
    #[error("system has {equations} equations in {variables} variables")]
    NonSquare { equations: usize, variables: usize },
    #[error("equation {0} is constant")]
    ConstantEquation(usize),
    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Keeps the converged, numerically real solutions and merges points closer
/// than `dedup_radius`.
pub fn filter_real(solutions: &[ComplexSolution], settings: &SolverSettings) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for s in solutions.iter().filter(|s| s.converged) {
        if let Some(x) = s.real_part(settings.real_threshold) {
            if !out.iter().any(|y| distance(&x, y) <= settings.dedup_radius) {
                out.push(x);
            }
        }
    }
    out
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

/// Merges solutions within `radius`, keeping the first of each cluster.
pub(crate) fn dedup_complex(solutions: Vec<ComplexSolution>, radius: f64) -> Vec<ComplexSolution> {
    let mut out: Vec<ComplexSolution> = Vec::with_capacity(solutions.len());
    for s in solutions {
        let duplicate = out.iter().any(|o| {
            o.coordinates
                .iter()
                .zip(&s.coordinates)
                .map(|(u, v)| (u - v).norm_sqr())
                .sum::<f64>()
                .sqrt()
                <= radius
        });
        if !duplicate {
            out.push(s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sol(re: &[f64], im: &[f64], converged: bool) -> ComplexSolution {
        ComplexSolution {
            coordinates: re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect(),
            residual: 0.0,
            converged,
            condition_estimate: 1.0,
        }
    }

    #[test]
    fn filter_real_drops_complex_unconverged_and_duplicates() {
        let sols = vec![
            sol(&[1.0, 2.0], &[0.0, 1e-12], true),
            sol(&[1.0 + 1e-9, 2.0], &[0.0, 0.0], true),
            sol(&[0.0, 1.0], &[0.5, 0.0], true),
            sol(&[3.0, 3.0], &[0.0, 0.0], false),
        ];
        let real = filter_real(&sols, &SolverSettings::default());
        assert_eq!(real, vec![vec![1.0, 2.0]]);
    }

    #[test]
    fn settings_validation() {
        assert!(SolverSettings::default().validate().is_ok());
        let bad = SolverSettings {
            min_step: 0.0,
            ..SolverSettings::default()
        };
        assert!(bad.validate().is_err());
        let bad_gamma = SolverSettings {
            gamma: Some(Complex64::new(2.0, 0.0)),
            ..SolverSettings::default()
        };
        assert!(bad_gamma.validate().is_err());
    }
}
