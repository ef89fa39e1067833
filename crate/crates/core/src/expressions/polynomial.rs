//! Sparse multivariate polynomials with dense exponent vectors.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use super::ExprError;

/// Exponent vector of a monomial, one entry per variable.
pub type ExponentVector = Vec<u32>;

/// Scalars a polynomial can be evaluated over.
///
/// Evaluation performs the same sequence of products and sums for every
/// implementation, so evaluating at a complex point with zero imaginary part
/// reproduces the real result bit for bit.
pub trait EvalScalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_real(value: f64) -> Self;
    fn zero() -> Self {
        Self::from_real(0.0)
    }
    fn one() -> Self {
        Self::from_real(1.0)
    }
}

impl EvalScalar for f64 {
    #[inline]
    fn from_real(value: f64) -> Self {
        value
    }
}

impl EvalScalar for Complex64 {
    #[inline]
    fn from_real(value: f64) -> Self {
        Complex64::new(value, 0.0)
    }
}

/// A real polynomial over an ordered list of variables.
///
/// Terms are keyed by exponent vector; no stored coefficient is exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    variables: Vec<String>,
    terms: BTreeMap<ExponentVector, f64>,
}

impl Polynomial {
    pub fn zero(variables: &[String]) -> Self {
        Self {
            variables: variables.to_vec(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(variables: &[String], value: f64) -> Self {
        let mut p = Self::zero(variables);
        if value != 0.0 {
            p.terms.insert(vec![0; variables.len()], value);
        }
        p
    }

    /// The polynomial `x_index`.
    pub fn variable(variables: &[String], index: usize) -> Self {
        let mut exps = vec![0; variables.len()];
        exps[index] = 1;
        let mut p = Self::zero(variables);
        p.terms.insert(exps, 1.0);
        p
    }

    /// Builds a polynomial from raw terms, merging duplicates and dropping zeros.
    pub fn from_terms(
        variables: &[String],
        terms: impl IntoIterator<Item = (ExponentVector, f64)>,
    ) -> Result<Self, ExprError> {
        let mut p = Self::zero(variables);
        for (exps, coef) in terms {
            if exps.len() != variables.len() {
                return Err(ExprError::DimensionMismatch {
                    expected: variables.len(),
                    found: exps.len(),
                });
            }
            p.add_term(exps, coef);
        }
        Ok(p)
    }

    fn add_term(&mut self, exps: ExponentVector, coef: f64) {
        if coef == 0.0 {
            return;
        }
        match self.terms.entry(exps) {
            Entry::Vacant(slot) => {
                slot.insert(coef);
            }
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += coef;
                if *slot.get() == 0.0 {
                    slot.remove();
                }
            }
        }
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ExponentVector, f64)> {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    /// Value of the constant term.
    pub fn constant_term(&self) -> f64 {
        self.terms
            .get(&vec![0; self.variables.len()])
            .copied()
            .unwrap_or(0.0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(|e| e.iter().sum::<u32>());
        match degs.next() {
            None => true,
            Some(d) => degs.all(|e| e == d),
        }
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn evaluate<T: EvalScalar>(&self, point: &[T]) -> Result<T, ExprError> {
        if point.len() != self.variables.len() {
            return Err(ExprError::DimensionMismatch {
                expected: self.variables.len(),
                found: point.len(),
            });
        }
        let mut acc = T::zero();
        for (exps, &coef) in &self.terms {
            let mut term = T::from_real(coef);
            for (x, &e) in point.iter().zip(exps) {
                for _ in 0..e {
                    term = term * *x;
                }
            }
            acc = acc + term;
        }
        Ok(acc)
    }

    pub fn evaluate_complex(&self, point: &[Complex64]) -> Result<Complex64, ExprError> {
        self.evaluate(point)
    }

    /// Formal partial derivative with respect to the named variable.
    pub fn differentiate(&self, var: &str) -> Result<Self, ExprError> {
        let index = self
            .variables
            .iter()
            .position(|v| v == var)
            .ok_or_else(|| ExprError::UnknownVariable(var.to_string()))?;
        Ok(self.differentiate_index(index))
    }

    pub fn differentiate_index(&self, index: usize) -> Self {
        let mut out = Self::zero(&self.variables);
        for (exps, &coef) in &self.terms {
            let e = exps[index];
            if e == 0 {
                continue;
            }
            let mut de = exps.clone();
            de[index] -= 1;
            out.add_term(de, coef * f64::from(e));
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = Self::zero(&self.variables);
        for (exps, &coef) in &self.terms {
            out.add_term(exps.clone(), coef * factor);
        }
        out
    }

    pub fn pow(&self, exponent: u32) -> Self {
        let mut result = Self::constant(&self.variables, 1.0);
        for _ in 0..exponent {
            result = &result * self;
        }
        result
    }

    /// Rewrites the polynomial over a different variable list; every variable
    /// with a nonzero exponent must appear in `variables`.
    pub fn with_variables(&self, variables: &[String]) -> Result<Self, ExprError> {
        let map: Vec<usize> = self
            .variables
            .iter()
            .map(|v| {
                variables
                    .iter()
                    .position(|w| w == v)
                    .ok_or_else(|| ExprError::UnknownVariable(v.clone()))
            })
            .collect::<Result<_, _>>()?;
        let mut out = Self::zero(variables);
        for (exps, &coef) in &self.terms {
            let mut e = vec![0; variables.len()];
            for (i, &k) in exps.iter().enumerate() {
                e[map[i]] += k;
            }
            out.add_term(e, coef);
        }
        Ok(out)
    }

    /// Substitutes `x = base + directions * t` and returns a polynomial in the
    /// new variables `t`. `directions[j]` holds the coefficients of the new
    /// variables in the expression for `x_j`.
    pub fn compose_affine(
        &self,
        base: &[f64],
        directions: &[Vec<f64>],
        new_variables: &[String],
    ) -> Result<Self, ExprError> {
        let n = self.variables.len();
        if base.len() != n || directions.len() != n {
            return Err(ExprError::DimensionMismatch {
                expected: n,
                found: base.len().min(directions.len()),
            });
        }
        let m = new_variables.len();
        let linear: Vec<Polynomial> = (0..n)
            .map(|j| {
                let mut terms = vec![(vec![0; m], base[j])];
                for (k, &c) in directions[j].iter().enumerate() {
                    let mut e = vec![0; m];
                    e[k] = 1;
                    terms.push((e, c));
                }
                Polynomial::from_terms(new_variables, terms)
            })
            .collect::<Result<_, _>>()?;
        let mut powers: Vec<Vec<Polynomial>> = linear
            .into_iter()
            .map(|l| vec![Polynomial::constant(new_variables, 1.0), l])
            .collect();
        let mut out = Self::zero(new_variables);
        for (exps, &coef) in &self.terms {
            let mut term = Polynomial::constant(new_variables, coef);
            for (j, &e) in exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[j].len() <= e as usize {
                    let next = powers[j].last().unwrap() * &powers[j][1];
                    powers[j].push(next);
                }
                term = &term * &powers[j][e as usize];
            }
            out = &out + &term;
        }
        Ok(out)
    }

    /// Homogenizes to the given degree with a new leading variable.
    pub fn homogenize(&self, new_var: &str, degree: u32) -> Self {
        let mut vars = vec![new_var.to_string()];
        vars.extend(self.variables.iter().cloned());
        let mut out = Self::zero(&vars);
        for (exps, &coef) in &self.terms {
            let d: u32 = exps.iter().sum();
            let mut e = vec![degree.saturating_sub(d)];
            e.extend_from_slice(exps);
            out.add_term(e, coef);
        }
        out
    }

    /// Coefficients of a univariate polynomial in ascending order.
    pub fn univariate_coefficients(&self) -> Option<Vec<f64>> {
        if self.variables.len() != 1 {
            return None;
        }
        let d = self.degree() as usize;
        let mut out = vec![0.0; d + 1];
        for (exps, &coef) in &self.terms {
            out[exps[0] as usize] = coef;
        }
        Some(out)
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        assert_eq!(
            self.variables, other.variables,
            "polynomials over different variable lists"
        );
        let mut out = self.clone();
        for (exps, &coef) in &other.terms {
            out.add_term(exps.clone(), sign * coef);
        }
        out
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, -1.0)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(
            self.variables, rhs.variables,
            "polynomials over different variable lists"
        );
        let mut out = Polynomial::zero(&self.variables);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &rhs.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

/// Prints in the input grammar; `parse_polynomial(p.to_string())` returns `p`.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // highest degree first
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|(a, _), (b, _)| {
            let da: u32 = a.iter().sum();
            let db: u32 = b.iter().sum();
            db.cmp(&da).then_with(|| b.cmp(a))
        });
        for (i, (exps, &coef)) in terms.into_iter().enumerate() {
            let mag = coef.abs();
            if i == 0 {
                if coef < 0.0 {
                    write!(f, "-")?;
                }
            } else if coef < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut factors: Vec<String> = Vec::new();
            let is_const = exps.iter().all(|&e| e == 0);
            if mag != 1.0 || is_const {
                factors.push(format!("{mag:?}"));
            }
            for (v, &e) in self.variables.iter().zip(exps) {
                match e {
                    0 => {}
                    1 => factors.push(v.clone()),
                    _ => factors.push(format!("{v}^{e}")),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

/// Ordered equations over a shared variable list.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialSystem {
    variables: Vec<String>,
    polynomials: Vec<Polynomial>,
}

impl PolynomialSystem {
    pub fn new(variables: &[String], polynomials: Vec<Polynomial>) -> Result<Self, ExprError> {
        for p in &polynomials {
            if p.variables() != variables {
                return Err(ExprError::VariableMismatch);
            }
        }
        Ok(Self {
            variables: variables.to_vec(),
            polynomials,
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn polynomials(&self) -> &[Polynomial] {
        &self.polynomials
    }

    /// Number of equations.
    pub fn num_equations(&self) -> usize {
        self.polynomials.len()
    }

    /// Ambient dimension.
    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.polynomials.iter().map(Polynomial::degree).collect()
    }

    pub fn is_square(&self) -> bool {
        self.num_equations() == self.num_variables()
    }

    pub fn evaluate<T: EvalScalar>(&self, point: &[T]) -> Result<Vec<T>, ExprError> {
        self.polynomials.iter().map(|p| p.evaluate(point)).collect()
    }

    /// Largest absolute value of the equations at a point.
    pub fn residual(&self, point: &[f64]) -> Result<f64, ExprError> {
        Ok(self
            .evaluate(point)?
            .into_iter()
            .fold(0.0, |m, v: f64| m.max(v.abs())))
    }

    /// Row-major `r x N` Jacobian evaluated at a point.
    pub fn jacobian(&self, point: &[f64]) -> Result<Vec<Vec<f64>>, ExprError> {
        if point.len() != self.num_variables() {
            return Err(ExprError::DimensionMismatch {
                expected: self.num_variables(),
                found: point.len(),
            });
        }
        self.polynomials
            .iter()
            .map(|p| {
                (0..self.num_variables())
                    .map(|j| p.differentiate_index(j).evaluate(point))
                    .collect()
            })
            .collect()
    }

    /// Product of the total degrees.
    pub fn bezout_number(&self) -> u64 {
        self.polynomials
            .iter()
            .map(|p| u64::from(p.degree()))
            .product()
    }
}

/// Polynomial in a flat layout for repeated evaluation in inner loops.
#[derive(Clone, Debug)]
pub struct CompiledPolynomial {
    nvars: usize,
    coefficients: Vec<f64>,
    /// Nonzero `(variable, exponent)` factors of all terms, in variable order.
    factors: Vec<(u32, u32)>,
    /// `factors[offsets[t]..offsets[t + 1]]` belong to term `t`.
    offsets: Vec<usize>,
    max_exponent: Vec<u32>,
}

impl CompiledPolynomial {
    pub fn new(p: &Polynomial) -> Self {
        let nvars = p.num_variables();
        let mut coefficients = Vec::with_capacity(p.num_terms());
        let mut factors = Vec::new();
        let mut offsets = vec![0];
        let mut max_exponent = vec![0; nvars];
        for (exps, coef) in p.terms() {
            coefficients.push(coef);
            for (j, &e) in exps.iter().enumerate() {
                if e > 0 {
                    factors.push((j as u32, e));
                }
                max_exponent[j] = max_exponent[j].max(e);
            }
            offsets.push(factors.len());
        }
        Self {
            nvars,
            coefficients,
            factors,
            offsets,
            max_exponent,
        }
    }

    pub fn num_variables(&self) -> usize {
        self.nvars
    }

    /// Evaluates using a per-variable table of powers. The table is rebuilt by
    /// the caller with [`PowerTable::fill`].
    pub fn eval_with<T: EvalScalar>(&self, table: &PowerTable<T>) -> T {
        let mut acc = T::zero();
        for (t, &coef) in self.coefficients.iter().enumerate() {
            let mut term = T::from_real(coef);
            for &(j, e) in &self.factors[self.offsets[t]..self.offsets[t + 1]] {
                term = term * table.get(j as usize, e);
            }
            acc = acc + term;
        }
        acc
    }

    pub fn max_exponents(&self) -> &[u32] {
        &self.max_exponent
    }
}

/// Cached powers `x_j^e` for a point.
#[derive(Clone, Debug)]
pub struct PowerTable<T> {
    stride: usize,
    values: Vec<T>,
}

impl<T: EvalScalar> PowerTable<T> {
    pub fn new(nvars: usize, max_exponent: u32) -> Self {
        let stride = max_exponent as usize + 1;
        Self {
            stride,
            values: vec![T::one(); nvars * stride],
        }
    }

    pub fn fill(&mut self, point: &[T]) {
        for (j, &x) in point.iter().enumerate() {
            let row = &mut self.values[j * self.stride..(j + 1) * self.stride];
            row[0] = T::one();
            for e in 1..self.stride {
                row[e] = row[e - 1] * x;
            }
        }
    }

    #[inline]
    pub fn get(&self, var: usize, exponent: u32) -> T {
        self.values[var * self.stride + exponent as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn homogenize_pads_lower_degree_terms() {
        let v = vars(&["x"]);
        let p = Polynomial::from_terms(&v, vec![(vec![2], 1.0), (vec![0], -1.0)]).unwrap();
        let h = p.homogenize("h", 2);
        assert!(h.is_homogeneous());
        assert_eq!(h.num_terms(), 2);
        assert_eq!(h.evaluate(&[1.0, 3.0]).unwrap(), 8.0);
    }

    #[test]
    fn compose_affine_matches_pointwise_substitution() {
        let v = vars(&["x", "y"]);
        let p = Polynomial::from_terms(
            &v,
            vec![(vec![2, 1], 3.0), (vec![0, 3], -1.0), (vec![1, 0], 2.0)],
        )
        .unwrap();
        let t = vars(&["t"]);
        let q = p
            .compose_affine(&[0.5, -1.0], &[vec![2.0], vec![0.25]], &t)
            .unwrap();
        for s in [-2.0, -0.3, 0.0, 1.7] {
            let x = [0.5 + 2.0 * s, -1.0 + 0.25 * s];
            let a = p.evaluate(&x).unwrap();
            let b = q.evaluate(&[s]).unwrap();
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn cancelling_terms_are_dropped() {
        let v = vars(&["x"]);
        let p = Polynomial::from_terms(&v, vec![(vec![1], 2.0), (vec![1], -2.0)]).unwrap();
        assert!(p.is_zero());
    }

    #[test]
    fn compiled_evaluation_matches() {
        let v = vars(&["x", "y"]);
        let p = Polynomial::from_terms(&v, vec![(vec![3, 1], 1.5), (vec![0, 2], -4.0)]).unwrap();
        let c = CompiledPolynomial::new(&p);
        let mut table = PowerTable::new(2, 3);
        table.fill(&[1.3, -0.7]);
        assert_eq!(c.eval_with(&table), p.evaluate(&[1.3, -0.7]).unwrap());
    }
}
