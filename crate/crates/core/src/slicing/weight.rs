//! Normal-space projection and the density correction weight α(x).

use statrs::function::gamma::gamma;

use super::{ManifoldSpec, SliceError};

/// Pivots below this multiple of the leading pivot are treated as zero when
/// determining the rank of the Jacobian.
pub const PIVOT_DROP_TOL: f64 = 1e-10;

/// Orthonormal basis of the row space of `jac` by Gram-Schmidt with column
/// pivoting on the columns of `jac^T`, dropping pivots below
/// `PIVOT_DROP_TOL` times the leading one.
pub(crate) fn row_space_basis(jac: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut residual: Vec<Vec<f64>> = jac.to_vec();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut lead = None;
    loop {
        let best = residual
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.iter().map(|v| v * v).sum::<f64>().sqrt()))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((i, pivot)) = best else { break };
        let lead = *lead.get_or_insert(pivot);
        if pivot == 0.0 || pivot < PIVOT_DROP_TOL * lead || !pivot.is_finite() {
            break;
        }
        let mut q = residual.swap_remove(i);
        // reorthogonalize against the accepted basis before normalizing
        for b in &basis {
            let c: f64 = q.iter().zip(b).map(|(x, y)| x * y).sum();
            q.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let nq = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nq == 0.0 {
            break;
        }
        q.iter_mut().for_each(|v| *v /= nq);
        for r in &mut residual {
            let c: f64 = r.iter().zip(&q).map(|(x, y)| x * y).sum();
            r.iter_mut().zip(&q).for_each(|(x, y)| *x -= c * y);
        }
        basis.push(q);
    }
    basis
}

/// Orthonormal normal-space basis at a point in working coordinates.
fn normal_basis(manifold: &ManifoldSpec, y: &[f64], x: &[f64]) -> Result<Vec<Vec<f64>>, SliceError> {
    let jac = manifold.compiled().jacobian(y);
    let basis = row_space_basis(&jac);
    let expected = manifold.ambient_dim()
        - manifold.dim()
        - usize::from(manifold.is_projective());
    // projective manifolds: the Euler relation puts x in the kernel of J, so
    // the affine cone has codimension N - 1 - n
    if basis.len() != expected {
        return Err(SliceError::RankMismatch {
            point: x.to_vec(),
            rank: basis.len(),
            expected,
        });
    }
    Ok(basis)
}

/// Orthogonal projection `Q Q^T` onto the normal space at `x`, where the
/// columns of `Q` are an orthonormal basis of the row space of the Jacobian.
pub fn normal_projection(manifold: &ManifoldSpec, x: &[f64]) -> Result<Vec<Vec<f64>>, SliceError> {
    check_len(manifold, x)?;
    let y = manifold.to_working(x);
    let q = normal_basis(manifold, &y, x)?;
    let n = x.len();
    let mut pi = vec![vec![0.0; n]; n];
    for b in &q {
        for i in 0..n {
            for j in 0..n {
                pi[i][j] += b[i] * b[j];
            }
        }
    }
    Ok(pi)
}

fn check_len(manifold: &ManifoldSpec, x: &[f64]) -> Result<(), SliceError> {
    if x.len() != manifold.ambient_dim() {
        return Err(SliceError::Expr(crate::expressions::ExprError::DimensionMismatch {
            expected: manifold.ambient_dim(),
            found: x.len(),
        }));
    }
    Ok(())
}

/// `Γ((n+1)/2) / π^{(n+1)/2}`, the reciprocal of half the volume of `S^n`.
pub fn weight_constant(n: usize) -> f64 {
    let h = (n as f64 + 1.0) / 2.0;
    gamma(h) / std::f64::consts::PI.powf(h)
}

/// The density correction
/// `α(x) = sqrt(1 + <x, Π x>) / (1 + |x|^2)^{(n+1)/2} · Γ((n+1)/2) / π^{(n+1)/2}`
/// with `Π` the projection onto the normal space at `x`.
///
/// For a shifted manifold, α is evaluated at the translated point, which is
/// where the slice actually met the manifold.
pub fn alpha_weight(manifold: &ManifoldSpec, x: &[f64]) -> Result<f64, SliceError> {
    if manifold.is_projective() {
        return Err(SliceError::WrongKind("affine"));
    }
    check_len(manifold, x)?;
    let y = manifold.to_working(x);
    let q = normal_basis(manifold, &y, x)?;
    Ok(alpha_from_basis(&y, &q, manifold.dim()))
}

pub(crate) fn alpha_from_basis(y: &[f64], q: &[Vec<f64>], n: usize) -> f64 {
    // <y, Π y> = sum_k <q_k, y>^2
    let proj: f64 = q
        .iter()
        .map(|b| {
            let c: f64 = b.iter().zip(y).map(|(u, v)| u * v).sum();
            c * c
        })
        .sum();
    let norm_sq: f64 = y.iter().map(|v| v * v).sum();
    (1.0 + proj).sqrt() / (1.0 + norm_sq).powf((n as f64 + 1.0) / 2.0) * weight_constant(n)
}

/// α at a point already in working coordinates.
pub(crate) fn alpha_working(manifold: &ManifoldSpec, y: &[f64], x: &[f64]) -> Result<f64, SliceError> {
    let q = normal_basis(manifold, y, x)?;
    Ok(alpha_from_basis(y, &q, manifold.dim()))
}
