//! Real intersection points of a manifold with a slice.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::linear::Parameterization;
use super::weight::alpha_working;
use super::{
    normalize_projective, AffineSlice, ExplicitSlice, IntersectionPoint, ManifoldSpec,
    ProjectiveSlice, Slice, SliceError, WeightedIntersection,
};
use crate::expressions::{Polynomial, PolynomialSystem};
use crate::solvers::{
    distance, solve_univariate_real, track_total_degree, CompiledSystem, ComplexSolution,
    SolverSettings,
};

/// Newton steps used to polish a real candidate before verification.
const POLISH_ITERS: usize = 4;

/// How the intersection system is solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IntersectMethod {
    /// Restrict the equations to the slice; one free parameter uses the
    /// univariate root finder, more use homotopy continuation.
    #[default]
    Auto,
    /// Restrict the equations to the slice and always use homotopy
    /// continuation.
    Homotopy,
    /// Track the combined system `{F = 0, A x = b}` in all `N` coordinates.
    FullSystem,
}

/// Verified real solutions in working coordinates, before region filtering.
struct Candidates {
    points: Vec<Vec<f64>>,
    path_failures: usize,
    paths_total: usize,
    spurious: usize,
}

/// Intersects an affine manifold with `{x : A x = b}` and attaches α to every
/// real point inside the region.
pub fn intersect<R: Rng + ?Sized>(
    manifold: &ManifoldSpec,
    slice: &AffineSlice,
    settings: &SolverSettings,
    method: IntersectMethod,
    rng: &mut R,
) -> Result<WeightedIntersection, SliceError> {
    if manifold.is_projective() {
        return Err(SliceError::WrongKind("affine"));
    }
    check_shape(&slice.a, slice.b.len(), manifold.dim(), manifold.ambient_dim())?;
    let param = Parameterization::from_implicit(&slice.a, &slice.b, manifold.ambient_dim())
        .ok_or(SliceError::DegenerateSlice)?;
    let candidates = solve_on(manifold, &param, settings, method, rng)?;
    finish_affine(
        manifold,
        Slice::Affine(slice.clone()),
        candidates,
        |y| slice.residual(y),
        settings,
    )
}

/// Intersects an affine manifold with `u + span(v_i)`.
pub fn intersect_explicit<R: Rng + ?Sized>(
    manifold: &ManifoldSpec,
    slice: &ExplicitSlice,
    settings: &SolverSettings,
    method: IntersectMethod,
    rng: &mut R,
) -> Result<WeightedIntersection, SliceError> {
    if manifold.is_projective() {
        return Err(SliceError::WrongKind("affine"));
    }
    let n_ambient = manifold.ambient_dim();
    let codim = n_ambient - manifold.dim();
    if slice.u.len() != n_ambient
        || slice.v.len() != codim
        || slice.v.iter().any(|v| v.len() != n_ambient)
    {
        return Err(SliceError::SliceShape {
            rows: codim,
            cols: n_ambient,
            found_rows: slice.v.len(),
            found_cols: slice.u.len(),
        });
    }
    let param =
        Parameterization::from_explicit(&slice.u, &slice.v).ok_or(SliceError::DegenerateSlice)?;
    let candidates = solve_on(manifold, &param, settings, method, rng)?;
    let check = param.clone();
    finish_affine(
        manifold,
        Slice::Explicit(slice.clone()),
        candidates,
        move |y| check.residual(y),
        settings,
    )
}

fn finish_affine(
    manifold: &ManifoldSpec,
    slice: Slice,
    candidates: Candidates,
    slice_residual: impl Fn(&[f64]) -> f64,
    _settings: &SolverSettings,
) -> Result<WeightedIntersection, SliceError> {
    check_counts(manifold, &candidates)?;
    let mut points = Vec::with_capacity(candidates.points.len());
    let mut rejected_by_region = 0;
    for y in &candidates.points {
        let x = manifold.from_working(y);
        if let Some(region) = manifold.region() {
            if !region.contains(&x) {
                rejected_by_region += 1;
                continue;
            }
        }
        let alpha = alpha_working(manifold, y, &x)?;
        let (abs, _) = manifold.compiled().residuals(y);
        points.push(IntersectionPoint {
            coordinates: x,
            alpha,
            residual: abs.max(slice_residual(y)),
        });
    }
    Ok(WeightedIntersection {
        slice,
        points,
        rejected_by_region,
        path_failures: candidates.path_failures,
        paths_total: candidates.paths_total,
        spurious: candidates.spurious,
    })
}

/// Intersects a projective manifold with `{[x] : A x = 0}` on a random
/// affine patch. Points are unit representatives with the sign convention
/// of [`normalize_projective`] and unit weight.
pub fn intersect_projective<R: Rng + ?Sized>(
    manifold: &ManifoldSpec,
    slice: &ProjectiveSlice,
    settings: &SolverSettings,
    method: IntersectMethod,
    rng: &mut R,
) -> Result<WeightedIntersection, SliceError> {
    if !manifold.is_projective() {
        return Err(SliceError::WrongKind("projective"));
    }
    let n_ambient = manifold.ambient_dim();
    check_shape(&slice.a, manifold.dim(), manifold.dim(), n_ambient)?;
    let patch: Vec<f64> = (0..n_ambient).map(|_| rng.sample(StandardNormal)).collect();
    let mut rows = slice.a.clone();
    rows.push(patch);
    let mut rhs = vec![0.0; manifold.dim()];
    rhs.push(1.0);
    let param =
        Parameterization::from_implicit(&rows, &rhs, n_ambient).ok_or(SliceError::DegenerateSlice)?;
    let candidates = solve_on(manifold, &param, settings, method, rng)?;
    check_counts(manifold, &candidates)?;

    let mut reps: Vec<Vec<f64>> = Vec::new();
    for y in &candidates.points {
        let rep = normalize_projective(y);
        if !reps.iter().any(|r| distance(r, &rep) <= settings.dedup_radius) {
            reps.push(rep);
        }
    }
    let mut points = Vec::with_capacity(reps.len());
    let mut rejected_by_region = 0;
    for rep in reps {
        if let Some(region) = manifold.region() {
            if !region.contains(&rep) {
                rejected_by_region += 1;
                continue;
            }
        }
        let (abs, _) = manifold.compiled().residuals(&rep);
        let lin = slice
            .a
            .iter()
            .map(|row| row.iter().zip(&rep).map(|(a, v)| a * v).sum::<f64>().abs())
            .fold(0.0, f64::max);
        points.push(IntersectionPoint {
            coordinates: rep,
            alpha: 1.0,
            residual: abs.max(lin),
        });
    }
    Ok(WeightedIntersection {
        slice: Slice::Projective(slice.clone()),
        points,
        rejected_by_region,
        path_failures: candidates.path_failures,
        paths_total: candidates.paths_total,
        spurious: candidates.spurious,
    })
}

fn check_shape(a: &[Vec<f64>], b_len: usize, rows: usize, cols: usize) -> Result<(), SliceError> {
    let found_cols = a.first().map_or(0, Vec::len);
    if a.len() != rows || b_len != rows || a.iter().any(|r| r.len() != cols) {
        return Err(SliceError::SliceShape {
            rows,
            cols,
            found_rows: a.len(),
            found_cols,
        });
    }
    Ok(())
}

fn check_counts(manifold: &ManifoldSpec, c: &Candidates) -> Result<(), SliceError> {
    if c.points.len() > manifold.degree_bound() {
        return Err(SliceError::TooManyPoints {
            found: c.points.len(),
            bound: manifold.degree_bound(),
        });
    }
    if c.paths_total > 0 && c.path_failures == c.paths_total {
        return Err(SliceError::AllPathsFailed {
            paths: c.paths_total,
        });
    }
    Ok(())
}

/// Random linear combinations reducing `polys` to `m` equations.
fn square_up<R: Rng + ?Sized>(polys: Vec<Polynomial>, m: usize, rng: &mut R) -> Vec<Polynomial> {
    if polys.len() <= m {
        return polys;
    }
    let vars = polys[0].variables().to_vec();
    (0..m)
        .map(|_| {
            polys.iter().fold(Polynomial::zero(&vars), |acc, p| {
                let c: f64 = rng.sample(StandardNormal);
                &acc + &p.scale(c)
            })
        })
        .collect()
}

fn solve_on<R: Rng + ?Sized>(
    manifold: &ManifoldSpec,
    param: &Parameterization,
    settings: &SolverSettings,
    method: IntersectMethod,
    rng: &mut R,
) -> Result<Candidates, SliceError> {
    settings.validate()?;
    let working = manifold.working_system();
    let m = param.directions.len();
    let overdetermined = working.num_equations() > m;

    // Each solver yields complex solutions in some coordinates together with
    // a map back to working coordinates and a square system for polishing.
    let (solutions, paths_total, path_failures, square, to_working): (
        Vec<ComplexSolution>,
        usize,
        usize,
        PolynomialSystem,
        Box<dyn Fn(&[f64]) -> Vec<f64>>,
    ) = if method == IntersectMethod::FullSystem {
        let vars = working.variables().to_vec();
        let mut polys = square_up(working.polynomials().to_vec(), m, rng);
        for (row, bi) in param.a.iter().zip(&param.b) {
            let terms = row
                .iter()
                .enumerate()
                .map(|(j, &c)| {
                    let mut e = vec![0u32; vars.len()];
                    e[j] = 1;
                    (e, c)
                })
                .chain(std::iter::once((vec![0u32; vars.len()], -bi)));
            polys.push(Polynomial::from_terms(&vars, terms)?);
        }
        let sys = PolynomialSystem::new(&vars, polys)?;
        if sys.polynomials().iter().any(|p| p.degree() == 0) {
            return Ok(empty());
        }
        let report = track_total_degree(&sys, settings, rng)?;
        (
            report.solutions,
            report.paths_total,
            report.paths_failed,
            sys,
            Box::new(|y: &[f64]| y.to_vec()),
        )
    } else {
        let tvars: Vec<String> = (1..=m).map(|j| format!("t{j}")).collect();
        let subst = param.substitution_matrix();
        let mut reduced = Vec::with_capacity(working.num_equations());
        for p in working.polynomials() {
            let q = p.compose_affine(&param.base, &subst, &tvars)?;
            if q.is_zero() {
                continue;
            }
            if q.degree() == 0 {
                // a nonzero constant: the slice misses the variety
                return Ok(empty());
            }
            reduced.push(q);
        }
        if reduced.len() < m {
            return Err(SliceError::DegenerateSlice);
        }
        let reduced = square_up(reduced, m, rng);
        let sys = PolynomialSystem::new(&tvars, reduced)?;
        let (solutions, total, failed) = if m == 1 && method == IntersectMethod::Auto {
            let coeffs = sys.polynomials()[0]
                .univariate_coefficients()
                .expect("single variable");
            let roots = solve_univariate_real(&coeffs, settings)?;
            let failed = roots.iter().filter(|r| !r.converged).count();
            let total = roots.len();
            (roots, total, failed)
        } else {
            let report = track_total_degree(&sys, settings, rng)?;
            (report.solutions, report.paths_total, report.paths_failed)
        };
        let p = param.clone();
        (
            solutions,
            total,
            failed,
            sys,
            Box::new(move |t: &[f64]| p.point(t)),
        )
    };

    let polisher = CompiledSystem::new(&square);
    let polish_settings = SolverSettings {
        newton_max_iters: POLISH_ITERS,
        ..settings.clone()
    };
    let mut out = Candidates {
        points: Vec::new(),
        path_failures,
        paths_total,
        spurious: 0,
    };
    for s in solutions.iter().filter(|s| s.converged) {
        let Some(real) = s.real_part(settings.real_threshold) else {
            continue;
        };
        let start: Vec<Complex64> = real.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let polished = polisher.newton(&start, &polish_settings);
        let coords: Vec<f64> = polished.coordinates.iter().map(|z| z.re).collect();
        let y = to_working(&coords);
        let (_, scaled) = manifold.compiled().residuals(&y);
        let size: f64 = y.iter().map(|v| v.abs()).sum::<f64>();
        let linear = param.residual(&y) / (1.0 + size);
        let valid = scaled <= settings.residual_tolerance
            && linear <= settings.residual_tolerance
            && y.iter().all(|v| v.is_finite());
        if !valid {
            if overdetermined {
                out.spurious += 1;
            } else {
                out.path_failures += 1;
            }
            continue;
        }
        if !out
            .points
            .iter()
            .any(|p| distance(p, &y) <= settings.dedup_radius)
        {
            out.points.push(y);
        }
    }
    Ok(out)
}

fn empty() -> Candidates {
    Candidates {
        points: Vec::new(),
        path_failures: 0,
        paths_total: 0,
        spurious: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expressions::{parse_polynomial, variable_names};
    use crate::slicing::{sample_affine_slice, sample_projective_slice, BoxRegion};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn system(eqs: &[&str], names: &[&str]) -> PolynomialSystem {
        let v = variable_names(names);
        let polys = eqs.iter().map(|e| parse_polynomial(e, &v).unwrap()).collect();
        PolynomialSystem::new(&v, polys).unwrap()
    }

    fn circle() -> ManifoldSpec {
        ManifoldSpec::new(system(&["x^2 + y^2 - 1"], &["x", "y"]), 1, 2).unwrap()
    }

    const EQ1: &str = "x^4 + y^4 - 3*x^2 - x*y^2 - y + 1";
    const TROTT: &str = "144*(x^4 + y^4) - 225*(x^2 + y^2) + 350*x^2*y^2 + 81";

    fn run(m: &ManifoldSpec, slice: &AffineSlice, method: IntersectMethod) -> WeightedIntersection {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        intersect(m, slice, &SolverSettings::default(), method, &mut rng).unwrap()
    }

    #[test]
    fn circle_with_line_through_interior() {
        let m = circle();
        let slice = AffineSlice {
            a: vec![vec![0.3, -1.1]],
            b: vec![0.2],
        };
        let wi = run(&m, &slice, IntersectMethod::Auto);
        assert_eq!(wi.points.len(), 2);
        for p in &wi.points {
            assert!((p.alpha - 1.0 / (2f64.sqrt() * PI)).abs() < 1e-12);
            assert!(p.residual <= 1e-10);
        }
        assert_eq!(wi.rejected_by_region, 0);
    }

    #[test]
    fn circle_with_far_line() {
        let m = circle();
        let slice = AffineSlice {
            a: vec![vec![1.0, 0.5]],
            b: vec![40.0],
        };
        let wi = run(&m, &slice, IntersectMethod::Auto);
        assert!(wi.points.is_empty());
    }

    #[test]
    fn trott_lines_meet_at_most_four_points() {
        let m = ManifoldSpec::new(system(&[TROTT], &["x", "y"]), 1, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen_four = false;
        for _ in 0..300 {
            let s = sample_affine_slice(&mut rng, &m);
            let wi = intersect(&m, &s, &SolverSettings::default(), IntersectMethod::Auto, &mut rng)
                .unwrap();
            assert!(wi.points.len() <= 4);
            seen_four |= wi.points.len() == 4;
        }
        assert!(seen_four);
    }

    #[test]
    fn fast_path_homotopy_and_full_system_agree() {
        let m = ManifoldSpec::new(system(&[EQ1], &["x", "y"]), 1, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let s = sample_affine_slice(&mut rng, &m);
            let sets: Vec<Vec<Vec<f64>>> = [
                IntersectMethod::Auto,
                IntersectMethod::Homotopy,
                IntersectMethod::FullSystem,
            ]
            .into_iter()
            .map(|method| {
                let mut pts: Vec<Vec<f64>> = run(&m, &s, method)
                    .points
                    .into_iter()
                    .map(|p| p.coordinates)
                    .collect();
                pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                pts
            })
            .collect();
            for other in &sets[1..] {
                assert_eq!(sets[0].len(), other.len());
                for (a, b) in sets[0].iter().zip(other) {
                    assert!(distance(a, b) <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn every_point_satisfies_both_systems() {
        let m = ManifoldSpec::new(system(&[EQ1], &["x", "y"]), 1, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = sample_affine_slice(&mut rng, &m);
            let wi = intersect(&m, &s, &SolverSettings::default(), IntersectMethod::Auto, &mut rng)
                .unwrap();
            for p in &wi.points {
                // independent re-check through the symbolic system
                let f = m.system().residual(&p.coordinates).unwrap();
                assert!(f <= 1e-10 && s.residual(&p.coordinates) <= 1e-10);
            }
        }
    }

    #[test]
    fn unbounded_region_rejects_nothing_and_box_filters() {
        let m = ManifoldSpec::new(system(&[TROTT], &["x", "y"]), 1, 4)
            .unwrap()
            .with_region(BoxRegion::unbounded(2))
            .unwrap();
        let boxed = ManifoldSpec::new(system(&[TROTT], &["x", "y"]), 1, 4)
            .unwrap()
            .with_region(BoxRegion::new(vec![(0.0, 2.0), (-2.0, 2.0)]).unwrap())
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut rejected = 0;
        for _ in 0..100 {
            let s = sample_affine_slice(&mut rng, &m);
            let a = run(&m, &s, IntersectMethod::Auto);
            assert_eq!(a.rejected_by_region, 0);
            let b = run(&boxed, &s, IntersectMethod::Auto);
            assert_eq!(b.points.len() + b.rejected_by_region, a.points.len());
            assert!(b.points.iter().all(|p| p.coordinates[0] >= 0.0));
            rejected += b.rejected_by_region;
        }
        assert!(rejected > 0);
    }

    #[test]
    fn degree_bound_violation_is_reported() {
        let m = ManifoldSpec::new(system(&["x^2 + y^2 - 1"], &["x", "y"]), 1, 1).unwrap();
        let slice = AffineSlice {
            a: vec![vec![0.0, 1.0]],
            b: vec![0.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            intersect(&m, &slice, &SolverSettings::default(), IntersectMethod::Auto, &mut rng),
            Err(SliceError::TooManyPoints { found: 2, bound: 1 })
        ));
    }

    #[test]
    fn degenerate_slice_is_reported() {
        let m = ManifoldSpec::new(
            system(&["x^2 + y^2 + z^2 - 1"], &["x", "y", "z"]),
            2,
            2,
        )
        .unwrap();
        let slice = AffineSlice {
            a: vec![vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0]],
            b: vec![0.0, 0.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            intersect(&m, &slice, &SolverSettings::default(), IntersectMethod::Auto, &mut rng),
            Err(SliceError::DegenerateSlice)
        );
    }

    #[test]
    fn overdetermined_curve_in_space() {
        // unit circle in the plane z = 0, with a redundant equation
        let m = ManifoldSpec::new(
            system(&["x^2 + y^2 + z^2 - 1", "z", "x*z"], &["x", "y", "z"]),
            1,
            2,
        )
        .unwrap();
        let slice = AffineSlice {
            a: vec![vec![1.0, -0.4, 2.0]],
            b: vec![0.3],
        };
        let wi = run(&m, &slice, IntersectMethod::Auto);
        assert_eq!(wi.points.len(), 2);
        for p in &wi.points {
            assert!(p.coordinates[2].abs() < 1e-12);
            assert!((p.alpha - 1.0 / (2f64.sqrt() * PI)).abs() < 1e-10);
        }
    }

    #[test]
    fn shifted_circle_points_lie_on_the_original() {
        let m = ManifoldSpec::new(
            system(&["(x - 100)^2 + (y - 100)^2 - 1"], &["x", "y"]),
            1,
            2,
        )
        .unwrap()
        .with_shift(vec![100.0, 100.0])
        .unwrap();
        let slice = AffineSlice {
            a: vec![vec![0.8, 0.6]],
            b: vec![0.1],
        };
        let wi = run(&m, &slice, IntersectMethod::Auto);
        assert_eq!(wi.points.len(), 2);
        for p in &wi.points {
            let r = ((p.coordinates[0] - 100.0).powi(2) + (p.coordinates[1] - 100.0).powi(2)).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
            assert!((p.alpha - 1.0 / (2f64.sqrt() * PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn surface_slice_uses_homotopy() {
        let m = ManifoldSpec::new(
            system(&["x^2 + y^2 + z^2 - 1"], &["x", "y", "z"]),
            2,
            2,
        )
        .unwrap();
        let slice = AffineSlice {
            a: vec![vec![1.0, 0.2, -0.3], vec![0.1, 1.0, 0.4]],
            b: vec![0.2, -0.1],
        };
        let wi = run(&m, &slice, IntersectMethod::Auto);
        assert_eq!(wi.points.len(), 2);
        let expected = crate::slicing::weight::weight_constant(2);
        for p in &wi.points {
            // unit sphere: <x, Πx> = 1, |x| = 1
            assert!((p.alpha - 2f64.sqrt() / 2f64.powf(1.5) * expected).abs() < 1e-12);
        }
    }

    #[test]
    fn projective_line_meets_generic_line_once() {
        let m = ManifoldSpec::new_projective(system(&["x0"], &["x0", "x1", "x2"]), 1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let s = sample_projective_slice(&mut rng, &m);
            let wi = intersect_projective(
                &m,
                &s,
                &SolverSettings::default(),
                IntersectMethod::Auto,
                &mut rng,
            )
            .unwrap();
            assert_eq!(wi.points.len(), 1);
            let p = &wi.points[0];
            assert_eq!(p.alpha, 1.0);
            let norm: f64 = p.coordinates.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-14);
            let first = p.coordinates.iter().find(|v| v.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn projective_conic_meets_line_at_most_twice() {
        let m = ManifoldSpec::new_projective(
            system(&["x0^2 + x1^2 - 2*x2^2"], &["x0", "x1", "x2"]),
            1,
            2,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = [0usize; 3];
        for _ in 0..200 {
            let s = sample_projective_slice(&mut rng, &m);
            let wi = intersect_projective(
                &m,
                &s,
                &SolverSettings::default(),
                IntersectMethod::Auto,
                &mut rng,
            )
            .unwrap();
            counts[wi.points.len()] += 1;
            for p in &wi.points {
                assert!(p.residual <= 1e-10);
            }
        }
        assert!(counts[0] > 0 && counts[2] > 0);
    }
}
