//! Conversions between implicit `{x : Ax = b}` and parametric `u + V t`
//! descriptions of affine subspaces.

/// Relative size below which a Gram-Schmidt residual counts as dependent.
const DEPENDENCE_TOL: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Modified Gram-Schmidt with one reorthogonalization pass. Returns the
/// orthonormal rows `Q` and the lower-triangular `L` with `rows = L Q`, or
/// `None` when the rows are numerically dependent.
pub(crate) fn orthonormalize_rows(rows: &[Vec<f64>]) -> Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let k = rows.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut l = vec![vec![0.0; k]; k];
    for (i, row) in rows.iter().enumerate() {
        let scale = norm(row);
        if scale == 0.0 || !scale.is_finite() {
            return None;
        }
        let mut v = row.clone();
        for _ in 0..2 {
            for (j, qj) in q.iter().enumerate() {
                let c = dot(&v, qj);
                l[i][j] += c;
                for (vi, qi) in v.iter_mut().zip(qj) {
                    *vi -= c * qi;
                }
            }
        }
        let r = norm(&v);
        if r <= DEPENDENCE_TOL * scale {
            return None;
        }
        l[i][i] = r;
        v.iter_mut().for_each(|x| *x /= r);
        q.push(v);
    }
    Some((q, l))
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal rows `q` in `R^dim`, built greedily from coordinate vectors.
pub(crate) fn complement(q: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = q.to_vec();
    let mut out = Vec::with_capacity(dim - q.len());
    while basis.len() < dim {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for k in 0..dim {
            let mut v = vec![0.0; dim];
            v[k] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&v, b);
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= c * bi;
                    }
                }
            }
            let r = norm(&v);
            if best.as_ref().is_none_or(|(br, _)| r > *br) {
                best = Some((r, v));
            }
        }
        let (r, mut v) = best.expect("dim > 0");
        v.iter_mut().for_each(|x| *x /= r);
        basis.push(v.clone());
        out.push(v);
    }
    out
}

/// Both descriptions of one affine subspace: `{x : a x = b}` with orthonormal
/// rows of `a`, and `base + sum_j t_j directions[j]` with orthonormal
/// directions and `base` the point of minimal norm.
#[derive(Clone, Debug)]
pub(crate) struct Parameterization {
    pub base: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl Parameterization {
    pub fn from_implicit(a: &[Vec<f64>], b: &[f64], dim: usize) -> Option<Self> {
        let (q, l) = orthonormalize_rows(a)?;
        // L z = b by forward substitution, base = Q^T z
        let mut z = vec![0.0; b.len()];
        for i in 0..b.len() {
            let s: f64 = (0..i).map(|j| l[i][j] * z[j]).sum();
            z[i] = (b[i] - s) / l[i][i];
        }
        let mut base = vec![0.0; dim];
        for (zi, qi) in z.iter().zip(&q) {
            for (x, v) in base.iter_mut().zip(qi) {
                *x += zi * v;
            }
        }
        let directions = complement(&q, dim);
        Some(Self {
            base,
            directions,
            a: q,
            b: z,
        })
    }

    pub fn from_explicit(u: &[f64], v: &[Vec<f64>]) -> Option<Self> {
        let dim = u.len();
        let (directions, _) = orthonormalize_rows(v)?;
        let a = complement(&directions, dim);
        let b: Vec<f64> = a.iter().map(|row| dot(row, u)).collect();
        // move the base to the point of minimal norm
        let mut base = u.to_vec();
        for d in &directions {
            let c = dot(u, d);
            for (x, di) in base.iter_mut().zip(d) {
                *x -= c * di;
            }
        }
        Some(Self {
            base,
            directions,
            a,
            b,
        })
    }

    /// `directions` transposed: entry `[i][j]` is the coefficient of `t_j` in `x_i`.
    pub fn substitution_matrix(&self) -> Vec<Vec<f64>> {
        let dim = self.base.len();
        (0..dim)
            .map(|i| self.directions.iter().map(|d| d[i]).collect())
            .collect()
    }

    pub fn point(&self, t: &[f64]) -> Vec<f64> {
        let mut x = self.base.clone();
        for (tj, d) in t.iter().zip(&self.directions) {
            for (xi, di) in x.iter_mut().zip(d) {
                *xi += tj * di;
            }
        }
        x
    }

    /// Largest `|a_i x - b_i|`, with the rows of `a` of unit norm.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| (dot(row, x) - bi).abs())
            .fold(0.0, f64::max)
    }
}
