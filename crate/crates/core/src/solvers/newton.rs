//! Newton refinement of approximate zeros of square systems.

use num_complex::Complex64;

use super::linalg::{norm, solve_in_place};
use super::{ComplexSolution, SolverError, SolverSettings};
use crate::expressions::{CompiledPolynomial, PolynomialSystem, PowerTable};

/// A square system with precompiled values and Jacobian entries.
pub(crate) struct CompiledSystem {
    n: usize,
    values: Vec<CompiledPolynomial>,
    /// Polynomials with all coefficients replaced by their magnitude, used to
    /// scale residuals.
    magnitudes: Vec<CompiledPolynomial>,
    jacobian: Vec<Vec<CompiledPolynomial>>,
    max_degree: u32,
}

impl CompiledSystem {
    pub(crate) fn new(sys: &PolynomialSystem) -> Self {
        let n = sys.num_variables();
        let vars = sys.variables();
        let polys = sys.polynomials();
        let magnitudes = polys
            .iter()
            .map(|p| {
                let abs = crate::expressions::Polynomial::from_terms(
                    vars,
                    p.terms().map(|(e, c)| (e.clone(), c.abs())),
                )
                .expect("same variables");
                CompiledPolynomial::new(&abs)
            })
            .collect();
        Self {
            n,
            values: polys.iter().map(CompiledPolynomial::new).collect(),
            magnitudes,
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

    /// Absolute residual `max |F_i(x)|` and scaled residual
    /// `max |F_i(x)| / max(1, sum |c| |x^a|)`.
    pub(crate) fn residuals(&self, x: &[Complex64]) -> (f64, f64) {
        let mut table = PowerTable::new(self.n, self.max_degree);
        table.fill(x);
        let abs: Vec<Complex64> = x.iter().map(|z| Complex64::new(z.norm(), 0.0)).collect();
        let mut abs_table = PowerTable::new(self.n, self.max_degree);
        abs_table.fill(&abs);
        let mut absolute = 0.0f64;
        let mut scaled = 0.0f64;
        for (p, m) in self.values.iter().zip(&self.magnitudes) {
            let v = p.eval_with(&table).norm();
            let s = m.eval_with(&abs_table).re.max(1.0);
            absolute = absolute.max(v);
            scaled = scaled.max(v / s);
        }
        (absolute, scaled)
    }

    fn step(&self, x: &[Complex64], table: &mut PowerTable<Complex64>) -> Option<(Vec<Complex64>, f64)> {
        table.fill(x);
        let mut delta: Vec<Complex64> = self.values.iter().map(|p| -p.eval_with(table)).collect();
        let mut jac = Vec::with_capacity(self.n * self.n);
        for row in &self.jacobian {
            jac.extend(row.iter().map(|p| p.eval_with(table)));
        }
        let cond = solve_in_place(&mut jac, &mut delta, self.n)?;
        delta.iter().all(|d| d.is_finite()).then_some((delta, cond))
    }

    /// Newton iteration from `start`, returning the best iterate seen.
    pub(crate) fn newton(&self, start: &[Complex64], settings: &SolverSettings) -> ComplexSolution {
        let mut table = PowerTable::new(self.n, self.max_degree);
        let mut x = start.to_vec();
        let (abs0, scaled0) = self.residuals(&x);
        let mut best = (scaled0, abs0, x.clone());
        let mut condition = f64::INFINITY;
        let mut stalled = 0;
        for _ in 0..settings.newton_max_iters {
            let Some((delta, cond)) = self.step(&x, &mut table) else {
                condition = f64::INFINITY;
                break;
            };
            condition = cond;
            for (xi, d) in x.iter_mut().zip(&delta) {
                *xi += d;
            }
            let (abs, scaled) = self.residuals(&x);
            if scaled < best.0 {
                best = (scaled, abs, x.clone());
                stalled = 0;
            } else {
                stalled += 1;
            }
            let tiny = norm(&delta) <= 4.0 * f64::EPSILON * (1.0 + norm(&x));
            if tiny || stalled >= 3 || (scaled == 0.0) {
                break;
            }
        }
        let (scaled, absolute, coordinates) = best;
        if let Some((_, cond)) = self.step(&coordinates, &mut table) {
            condition = cond;
        }
        ComplexSolution {
            coordinates,
            residual: absolute,
            converged: scaled <= settings.residual_tolerance,
            condition_estimate: condition,
        }
    }
}

/// Refines `start` towards a zero of the square system `sys` by Newton's
/// method.
///
/// The returned solution is the iterate with the smallest residual. It is
/// marked converged when every `|F_i(x)|`, divided by `max(1, sum |c| |x^a|)`
/// over the terms of `F_i`, is within `settings.residual_tolerance`.
pub fn newton_refine(
    sys: &PolynomialSystem,
    start: &[Complex64],
    settings: &SolverSettings,
) -> Result<ComplexSolution, SolverError> {
    settings.validate()?;
    if !sys.is_square() {
        return Err(SolverError::NonSquare {
            equations: sys.num_equations(),
            variables: sys.num_variables(),
        });
    }
    if start.len() != sys.num_variables() {
        return Err(SolverError::Expr(crate::expressions::ExprError::DimensionMismatch {
            expected: sys.num_variables(),
            found: start.len(),
        }));
    }
    Ok(CompiledSystem::new(sys).newton(start, settings))
}
