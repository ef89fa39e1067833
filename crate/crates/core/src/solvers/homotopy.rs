//! Total-degree homotopy continuation for square polynomial systems.
//!
//! Paths are followed with a fourth-order Runge-Kutta predictor and a Newton
//! corrector on a random affine patch of projective space, so solutions at
//! infinity stay at finite coordinates; an endpoint whose homogenizing
//! coordinate vanishes is classified as diverged.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::linalg::{norm, solve_in_place};
use super::newton::CompiledSystem;
use super::{dedup_complex, ComplexSolution, SolverError, SolverSettings, TrackReport};
use crate::expressions::{CompiledPolynomial, PolynomialSystem, PowerTable};

const CORRECTOR_ITERS: usize = 3;
const SUCCESSES_BEFORE_GROWTH: usize = 3;
/// `|x0| / |X|` below this at `t = 1` means the endpoint lies at infinity.
const INFINITY_RATIO_END: f64 = 1e-8;
/// Looser ratio applied to paths abandoned before reaching `t = 1`.
const INFINITY_RATIO_STALLED: f64 = 1e-4;
const DIVERGENCE_NORM: f64 = 1e10;
/// Past this point of `t`, paths are watched for escape to infinity.
const ENDGAME_START: f64 = 0.1;
/// Affine norm past the endgame start at which a path is truncated as diverging.
const TRUNCATION_NORM: f64 = 1e8;
/// Log-log decay rate of `|x0| / |X|` against `1 - t` that marks a stalled
/// path as heading to infinity; finite endpoints have rate zero.
const ESCAPE_RATE: f64 = 0.05;
const ESCAPE_RATIO: f64 = 1e-2;
/// Condition estimate below which two coinciding endpoints indicate a path jump.
const NONSINGULAR_CONDITION: f64 = 1e8;

#[derive(Clone, Debug)]
enum PathEnd {
    Converged(ComplexSolution),
    Diverged,
    Failed,
}

/// Homogenized straight-line homotopy
/// `H(X, t) = (1 - t) γ G(X) + t F(X)` with start system `x_i^{d_i} - x_0^{d_i}`
/// and the patch equation `<c, X> = 1`.
struct Homotopy {
    n: usize,
    degrees: Vec<u32>,
    target: Vec<CompiledPolynomial>,
    target_jacobian: Vec<Vec<CompiledPolynomial>>,
    max_degree: u32,
    gamma: Complex64,
    patch: Vec<Complex64>,
}

struct Workspace {
    table: PowerTable<Complex64>,
    value: Vec<Complex64>,
    jacobian: Vec<Complex64>,
    dt: Vec<Complex64>,
}

impl Homotopy {
    fn new(system: &PolynomialSystem, gamma: Complex64, patch: Vec<Complex64>) -> Self {
        let n = system.num_variables();
        let degrees = system.degrees();
        let homogenized: Vec<_> = system
            .polynomials()
            .iter()
            .zip(&degrees)
            .map(|(p, &d)| p.homogenize("__h0", d))
            .collect();
        let target = homogenized.iter().map(CompiledPolynomial::new).collect();
        let target_jacobian = homogenized
            .iter()
            .map(|p| {
                (0..=n)
                    .map(|j| CompiledPolynomial::new(&p.differentiate_index(j)))
                    .collect()
            })
            .collect();
        let max_degree = degrees.iter().copied().max().unwrap_or(1);
        Self {
            n,
            degrees,
            target,
            target_jacobian,
            max_degree,
            gamma,
            patch,
        }
    }

    fn workspace(&self) -> Workspace {
        let m = self.n + 1;
        Workspace {
            table: PowerTable::new(m, self.max_degree),
            value: vec![Complex64::new(0.0, 0.0); m],
            jacobian: vec![Complex64::new(0.0, 0.0); m * m],
            dt: vec![Complex64::new(0.0, 0.0); m],
        }
    }

    fn evaluate(&self, x: &[Complex64], t: f64, ws: &mut Workspace) {
        let m = self.n + 1;
        ws.table.fill(x);
        let s = Complex64::new(1.0 - t, 0.0) * self.gamma;
        let tc = Complex64::new(t, 0.0);
        for i in 0..self.n {
            let d = self.degrees[i];
            let f = self.target[i].eval_with(&ws.table);
            let g = ws.table.get(i + 1, d) - ws.table.get(0, d);
            ws.value[i] = s * g + tc * f;
            ws.dt[i] = f - self.gamma * g;
            let row = &mut ws.jacobian[i * m..(i + 1) * m];
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = tc * self.target_jacobian[i][j].eval_with(&ws.table);
            }
            let df = f64::from(d);
            row[i + 1] += s * df * ws.table.get(i + 1, d - 1);
            row[0] -= s * df * ws.table.get(0, d - 1);
        }
        let mut patch = Complex64::new(-1.0, 0.0);
        for (j, c) in self.patch.iter().enumerate() {
            patch += c * x[j];
            ws.jacobian[self.n * m + j] = *c;
        }
        ws.value[self.n] = patch;
        ws.dt[self.n] = Complex64::new(0.0, 0.0);
    }

    fn start_points(&self) -> Vec<Vec<Complex64>> {
        let total: usize = self.degrees.iter().map(|&d| d as usize).product();
        let mut out = Vec::with_capacity(total);
        let mut index = vec![0u32; self.n];
        for _ in 0..total {
            let mut x = vec![Complex64::new(1.0, 0.0)];
            for (i, &k) in index.iter().enumerate() {
                let d = self.degrees[i];
                let angle = std::f64::consts::TAU * f64::from(k) / f64::from(d);
                x.push(Complex64::from_polar(1.0, angle));
            }
            let dot: Complex64 = self.patch.iter().zip(&x).map(|(c, v)| c * v).sum();
            let scale = dot.inv();
            for v in &mut x {
                *v *= scale;
            }
            out.push(x);
            // odometer increment
            for (i, k) in index.iter_mut().enumerate() {
                *k += 1;
                if *k < self.degrees[i] {
                    break;
                }
                *k = 0;
            }
        }
        out
    }

    /// Path tangent `dX/dt = -H_X^{-1} H_t`.
    fn tangent(&self, x: &[Complex64], t: f64, ws: &mut Workspace) -> Option<Vec<Complex64>> {
        self.evaluate(x, t, ws);
        let mut v: Vec<Complex64> = ws.dt.iter().map(|d| -d).collect();
        solve_in_place(&mut ws.jacobian, &mut v, self.n + 1)?;
        v.iter().all(|z| z.is_finite()).then_some(v)
    }

    /// Classical fourth-order Runge-Kutta step along the tangent field.
    fn predict(
        &self,
        x: &[Complex64],
        t: f64,
        h: f64,
        ws: &mut Workspace,
    ) -> Option<Vec<Complex64>> {
        let shifted = |k: &[Complex64], c: f64| -> Vec<Complex64> {
            x.iter().zip(k).map(|(a, b)| a + b * c).collect()
        };
        let k1 = self.tangent(x, t, ws)?;
        let k2 = self.tangent(&shifted(&k1, h / 2.0), t + h / 2.0, ws)?;
        let k3 = self.tangent(&shifted(&k2, h / 2.0), t + h / 2.0, ws)?;
        let k4 = self.tangent(&shifted(&k3, h), t + h, ws)?;
        Some(
            (0..x.len())
                .map(|i| x[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0))
                .collect(),
        )
    }

    /// Newton correction at fixed `t`; succeeds only with contracting updates.
    fn correct(&self, x: &mut [Complex64], t: f64, tol: f64, ws: &mut Workspace) -> bool {
        let m = self.n + 1;
        let mut previous = f64::INFINITY;
        for iteration in 0..CORRECTOR_ITERS {
            self.evaluate(x, t, ws);
            let mut delta: Vec<Complex64> = ws.value.iter().map(|v| -v).collect();
            if solve_in_place(&mut ws.jacobian, &mut delta, m).is_none() {
                return false;
            }
            for (xi, d) in x.iter_mut().zip(&delta) {
                *xi += d;
            }
            let step = norm(&delta);
            if !step.is_finite() {
                return false;
            }
            if step <= tol * (1.0 + norm(x)) {
                return true;
            }
            if iteration > 0 && step > 0.5 * previous {
                return false;
            }
            previous = step;
        }
        false
    }

    fn track(
        &self,
        start: &[Complex64],
        settings: &SolverSettings,
        max_step: f64,
        affine: &CompiledSystem,
    ) -> PathEnd {
        let mut ws = self.workspace();
        let mut x = start.to_vec();
        let mut t = 0.0;
        let mut h = settings.initial_step.min(max_step);
        let mut successes = 0;
        // (1 - t, |x0| / |X|) recorded each time 1 - t drops another decade
        let mut marks: Vec<(f64, f64)> = Vec::new();
        let mut next_mark = ENDGAME_START;
        while t < 1.0 {
            let step = h.min(1.0 - t);
            let t_next = if 1.0 - t - step <= 1e-14 { 1.0 } else { t + step };
            let accepted = match self.predict(&x, t, t_next - t, &mut ws) {
                Some(mut candidate) => {
                    let ok = self.correct(
                        &mut candidate,
                        t_next,
                        settings.corrector_tolerance,
                        &mut ws,
                    );
                    if ok {
                        x = candidate;
                    }
                    ok
                }
                None => false,
            };
            if accepted {
                t = t_next;
                if 1.0 - t <= next_mark && t < 1.0 {
                    let ratio = x[0].norm() / norm(&x);
                    if ratio * TRUNCATION_NORM < 1.0 {
                        return PathEnd::Diverged;
                    }
                    marks.push((1.0 - t, ratio));
                    while 1.0 - t <= next_mark {
                        next_mark /= 10.0;
                    }
                }
                successes += 1;
                if successes >= SUCCESSES_BEFORE_GROWTH {
                    h = (h * 2.0).min(max_step);
                    successes = 0;
                }
            } else {
                h /= 2.0;
                successes = 0;
                if h < settings.min_step {
                    let ratio = x[0].norm() / norm(&x);
                    return if ratio < INFINITY_RATIO_STALLED
                        || heading_to_infinity(&marks, 1.0 - t, ratio)
                    {
                        PathEnd::Diverged
                    } else {
                        PathEnd::Failed
                    };
                }
            }
        }
        let ratio = x[0].norm() / norm(&x);
        if ratio < INFINITY_RATIO_END {
            return PathEnd::Diverged;
        }
        let affine_point: Vec<Complex64> = x[1..].iter().map(|v| v / x[0]).collect();
        if norm(&affine_point) > DIVERGENCE_NORM {
            return PathEnd::Diverged;
        }
        let refined = affine.newton(&affine_point, settings);
        if refined.converged {
            PathEnd::Converged(refined)
        } else if norm(&refined.coordinates) > DIVERGENCE_NORM {
            PathEnd::Diverged
        } else {
            PathEnd::Failed
        }
    }
}

/// Tracks every path of the total-degree homotopy to `sys` and returns the
/// deduplicated converged endpoints.
///
/// The start system is `γ (x_i^{d_i} - 1)`; γ is taken from
/// `settings.gamma` or drawn uniformly from the unit circle using `rng`.
pub fn track_total_degree<R: Rng + ?Sized>(
    sys: &PolynomialSystem,
    settings: &SolverSettings,
    rng: &mut R,
) -> Result<TrackReport, SolverError> {
    settings.validate()?;
    if !sys.is_square() {
        return Err(SolverError::NonSquare {
            equations: sys.num_equations(),
            variables: sys.num_variables(),
        });
    }
    if let Some(i) = sys.polynomials().iter().position(|p| p.degree() == 0) {
        return Err(SolverError::ConstantEquation(i));
    }
    let gamma = match settings.gamma {
        Some(g) => g,
        None => Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)),
    };
    let patch: Vec<Complex64> = (0..=sys.num_variables())
        .map(|_| {
            Complex64::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            )
        })
        .collect();
    let homotopy = Homotopy::new(sys, gamma, patch);
    let affine = CompiledSystem::new(sys);
    let starts = homotopy.start_points();

    let track_all = |indices: &[usize], max_step: f64| -> Vec<PathEnd> {
        if settings.parallel_paths {
            indices
                .par_iter()
                .map(|&i| homotopy.track(&starts[i], settings, max_step, &affine))
                .collect()
        } else {
            indices
                .iter()
                .map(|&i| homotopy.track(&starts[i], settings, max_step, &affine))
                .collect()
        }
    };
    let all: Vec<usize> = (0..starts.len()).collect();
    let mut ends = track_all(&all, settings.max_step);

    // Two nonsingular paths landing on the same point means one jumped;
    // retrack the pair with a smaller step cap.
    let jumped = coinciding_paths(&ends, settings.dedup_radius);
    if !jumped.is_empty() {
        let retracked = track_all(&jumped, settings.max_step / 8.0);
        for (i, end) in jumped.into_iter().zip(retracked) {
            ends[i] = end;
        }
    }

    let mut report = TrackReport {
        paths_total: ends.len(),
        paths_converged: 0,
        paths_diverged: 0,
        paths_failed: 0,
        solutions: Vec::new(),
        gamma,
    };
    for end in ends {
        match end {
            PathEnd::Converged(s) => {
                report.paths_converged += 1;
                report.solutions.push(s);
            }
            PathEnd::Diverged => report.paths_diverged += 1,
            PathEnd::Failed => report.paths_failed += 1,
        }
    }
    report.solutions = dedup_complex(report.solutions, settings.dedup_radius);
    Ok(report)
}

/// Estimates the decay rate `c` in `|x0| / |X| ~ (1 - t)^c` from the last
/// decade mark and the current state.
fn heading_to_infinity(marks: &[(f64, f64)], remaining: f64, ratio: f64) -> bool {
    let Some(&(s0, r0)) = marks.iter().rev().find(|(s, _)| *s > 2.0 * remaining) else {
        return false;
    };
    if ratio >= ESCAPE_RATIO || remaining <= 0.0 || ratio <= 0.0 {
        return false;
    }
    let rate = (ratio / r0).ln() / (remaining / s0).ln();
    rate > ESCAPE_RATE
}

fn coinciding_paths(ends: &[PathEnd], radius: f64) -> Vec<usize> {
    let mut flagged = Vec::new();
    for i in 0..ends.len() {
        let PathEnd::Converged(a) = &ends[i] else { continue };
        if a.condition_estimate > NONSINGULAR_CONDITION {
            continue;
        }
        for (j, other) in ends.iter().enumerate().skip(i + 1) {
            let PathEnd::Converged(b) = other else { continue };
            if b.condition_estimate > NONSINGULAR_CONDITION {
                continue;
            }
            let dist = a
                .coordinates
                .iter()
                .zip(&b.coordinates)
                .map(|(u, v)| (u - v).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if dist <= radius {
                for k in [i, j] {
                    if !flagged.contains(&k) {
                        flagged.push(k);
                    }
                }
            }
        }
    }
    flagged.sort_unstable();
    flagged
}
