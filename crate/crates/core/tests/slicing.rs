mod support;

use linsect::diagnostics::{chi_square_homogeneity, count_histogram};
use linsect::expressions::{parse_polynomial, variable_names, PolynomialSystem};
use linsect::manifold_file::ManifoldFile;
use linsect::slicing::{
    alpha_weight, intersect, intersect_explicit, sample_affine_slice, sample_explicit_slice,
    IntersectMethod, ManifoldSpec,
};
use linsect::solvers::SolverSettings;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{alpha_monte_carlo, mean_and_se, tangent_basis};

fn load(name: &str) -> ManifoldSpec {
    let path = format!("{}/../../data/{name}.manifold", env!("CARGO_MANIFEST_DIR"));
    ManifoldFile::load(path).unwrap().manifold
}

fn points_on(m: &ManifoldSpec, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    while out.len() < count {
        let s = sample_affine_slice(rng, m);
        let wi = intersect(m, &s, &SolverSettings::default(), IntersectMethod::Auto, rng).unwrap();
        out.extend(wi.points.into_iter().map(|p| p.coordinates));
    }
    out.truncate(count);
    out
}

#[test]
fn alpha_agrees_with_monte_carlo_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for name in ["circle", "eq1", "s1"] {
        let m = load(name);
        for x in points_on(&m, 4, &mut rng) {
            let tangent = tangent_basis(&m.system().jacobian(&x).unwrap());
            assert_eq!(tangent.len(), m.dim());
            let oracle = alpha_monte_carlo(&x, &tangent, 200_000, &mut rng);
            let alpha = alpha_weight(&m, &x).unwrap();
            assert!(
                (alpha / oracle - 1.0).abs() < 0.02,
                "{name} at {x:?}: {alpha} vs {oracle}"
            );
        }
    }
}

fn circle_counts(explicit: bool, slices: usize, seed: u64) -> Vec<usize> {
    let m = load("circle");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let settings = SolverSettings::default();
    (0..slices)
        .map(|_| {
            let wi = if explicit {
                let (s, _) = sample_explicit_slice(&mut rng, 2, 1);
                intersect_explicit(&m, &s, &settings, IntersectMethod::Auto, &mut rng)
            } else {
                let s = sample_affine_slice(&mut rng, &m);
                intersect(&m, &s, &settings, IntersectMethod::Auto, &mut rng)
            };
            wi.unwrap().points.len()
        })
        .collect()
}

#[test]
fn explicit_and_implicit_slices_have_the_same_count_law() {
    let a = count_histogram(circle_counts(false, 20_000, 21));
    let b = count_histogram(circle_counts(true, 20_000, 22));
    let r = chi_square_homogeneity(&[a, b]);
    assert!(r.p_value > 0.01, "{r:?}");
}

#[test]
fn expected_circle_count_is_sqrt_two() {
    // α ≡ 1/(√2 π) on the unit circle, so E|M ∩ L| = α · 2π = √2
    let counts: Vec<f64> = circle_counts(false, 20_000, 23)
        .into_iter()
        .map(|c| c as f64)
        .collect();
    let (mean, se) = mean_and_se(&counts);
    assert!((mean - 2f64.sqrt()).abs() <= 4.0 * se, "{mean} ± {se}");
}

#[test]
fn count_law_is_rotation_invariant() {
    let vars = variable_names(&["x", "y"]);
    let conic = |eq: &str| {
        let p = parse_polynomial(eq, &vars).unwrap();
        ManifoldSpec::new(PolynomialSystem::new(&vars, vec![p]).unwrap(), 1, 2).unwrap()
    };
    // the ellipse x^2/4 + (y - 1)^2 = 1 and its image under rotation by 90 degrees
    let a = conic("x^2 + 4*(y - 1)^2 - 4");
    let b = conic("y^2 + 4*(x + 1)^2 - 4");
    let counts = |m: &ManifoldSpec, seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        count_histogram((0..20_000).map(|_| {
            let s = sample_affine_slice(&mut rng, m);
            intersect(m, &s, &SolverSettings::default(), IntersectMethod::Auto, &mut rng)
                .unwrap()
                .points
                .len()
        }))
    };
    let r = chi_square_homogeneity(&[counts(&a, 24), counts(&b, 25)]);
    assert!(r.p_value > 0.01, "{r:?}");
}

#[test]
fn ungauged_cyclohexane_tracks_64_paths() {
    let names: Vec<String> = (1..=6)
        .flat_map(|i| ["x", "y", "z"].map(|c| format!("{c}{i}")))
        .collect();
    let bond = |i: usize, j: usize| {
        format!("(x{i} - x{j})^2 + (y{i} - y{j})^2 + (z{i} - z{j})^2 - 1")
    };
    let polys = (1..=6)
        .map(|i| parse_polynomial(&bond(i, i % 6 + 1), &names).unwrap())
        .collect();
    let system = PolynomialSystem::new(&names, polys).unwrap();
    assert_eq!(system.bezout_number(), 64);
    let m = ManifoldSpec::new(system, 12, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let s = sample_affine_slice(&mut rng, &m);
    let wi = intersect(&m, &s, &SolverSettings::default(), IntersectMethod::Auto, &mut rng).unwrap();
    assert_eq!(wi.paths_total, 64);
    for p in &wi.points {
        assert!(m.residual(&p.coordinates).unwrap() < 1e-8);
    }
}
