//! Reference values computed without the sampling machinery.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;

/// Quartic curve `x^4 + y^4 - 3x^2 - xy^2 - y + 1 = 0`.
pub fn eq1(x: f64, y: f64) -> f64 {
    x.powi(4) + y.powi(4) - 3.0 * x * x - x * y * y - y + 1.0
}

fn eq1_grad(x: f64, y: f64) -> (f64, f64) {
    (
        4.0 * x.powi(3) - 6.0 * x - y * y,
        4.0 * y.powi(3) - 2.0 * x * y - 1.0,
    )
}

/// Roots of `t -> h(t)` on `[lo, hi]` by grid scan and bisection.
fn roots(h: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    let step = (hi - lo) / cells as f64;
    let mut out = Vec::new();
    let mut a = lo;
    let mut fa = h(a);
    for i in 1..=cells {
        let b = lo + i as f64 * step;
        let fb = h(b);
        if fa == 0.0 {
            out.push(a);
        } else if fa * fb < 0.0 {
            let (mut l, mut r, mut fl) = (a, b, fa);
            for _ in 0..60 {
                let m = 0.5 * (l + r);
                let fm = h(m);
                if fl * fm <= 0.0 {
                    r = m;
                } else {
                    l = m;
                    fl = fm;
                }
            }
            out.push(0.5 * (l + r));
        }
        a = b;
        fa = fb;
    }
    out
}

/// `∫ g ds` over the curve `eq1 = 0`, which lies in `[-3, 3]^2`. Arcs where
/// the curve is closer to horizontal are integrated over `x`, the rest over
/// `y`, so the arc-length factor stays below `√2`.
pub fn eq1_line_integral(g: impl Fn(f64, f64) -> f64, steps: usize) -> f64 {
    let (lo, hi) = (-3.0, 3.0);
    let h = (hi - lo) / steps as f64;
    let mut total = 0.0;
    for i in 0..steps {
        // midpoint rule in the sweep variable
        let s = lo + (i as f64 + 0.5) * h;
        for y in roots(|y| eq1(s, y), lo, hi, 1500) {
            let (fx, fy) = eq1_grad(s, y);
            if fy.abs() >= fx.abs() {
                total += g(s, y) * fx.hypot(fy) / fy.abs() * h;
            }
        }
        for x in roots(|x| eq1(x, s), lo, hi, 1500) {
            let (fx, fy) = eq1_grad(x, s);
            if fx.abs() > fy.abs() {
                total += g(x, s) * fx.hypot(fy) / fx.abs() * h;
            }
        }
    }
    total
}

/// Perimeter of the ellipse with semi-axes `a`, `b` by composite Simpson.
pub fn ellipse_perimeter(a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let speed = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
    let mut s = speed(0.0) + speed(n as f64 * h);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * speed(i as f64 * h);
    }
    s * h / 3.0
}

/// Orthonormal basis of the orthogonal complement of the rows of `g`, as
/// columns of an `N x (N - rank)` matrix (returned as a list of columns).
pub fn tangent_basis(g: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = g[0].len();
    let mut normals: Vec<Vec<f64>> = Vec::new();
    let push = |v: &[f64], basis: &mut Vec<Vec<f64>>| -> bool {
        let mut w = v.to_vec();
        for _ in 0..2 {
            for b in basis.iter() {
                let d: f64 = w.iter().zip(b).map(|(a, c)| a * c).sum();
                w.iter_mut().zip(b).for_each(|(a, c)| *a -= d * c);
            }
        }
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            basis.push(w.iter().map(|a| a / norm).collect());
            true
        } else {
            false
        }
    };
    for row in g {
        push(row, &mut normals);
    }
    let codim = normals.len();
    let mut all = normals;
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        push(&e, &mut all);
    }
    all.split_off(codim)
}

fn det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    d
}

/// Monte Carlo value of `∫ φ(A, Ax) |det(A|_{T_x M})| dA` over Gaussian
/// `n x N` matrices `A`, where `tangent` holds `n` orthonormal columns
/// spanning `T_x M`.
pub fn alpha_monte_carlo<R: Rng>(x: &[f64], tangent: &[Vec<f64>], draws: usize, rng: &mut R) -> f64 {
    let big_n = x.len();
    let n = tangent.len();
    let norm = (2.0 * std::f64::consts::PI).powf(-(n as f64) / 2.0);
    let mut sum = 0.0;
    for _ in 0..draws {
        let a: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..big_n).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let ax2: f64 = a
            .iter()
            .map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>().powi(2))
            .sum();
        let at: Vec<Vec<f64>> = a
            .iter()
            .map(|row| {
                tangent
                    .iter()
                    .map(|t| row.iter().zip(t).map(|(p, q)| p * q).sum())
                    .collect()
            })
            .collect();
        sum += norm * (-0.5 * ax2).exp() * det(at).abs();
    }
    sum / draws as f64
}

/// Sample mean and standard error.
pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}
