use linsect::estimators::{
    estimate_bounds_by_exploration, estimate_integral, estimate_integrals, plan_sample_size,
    sample_points, sample_points_projective, slice_values, variance_bound,
    baseline_sphere_values, CompensatedSum, EstimatorConfig, EstimatorReport, RejectionConfig,
};
use linsect::expressions::{BinaryOp, ScalarExpression};
use linsect::manifold_file::{ManifoldFile, Overrides};
use linsect::slicing::{IntersectMethod, ManifoldSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Map, Value};

use crate::output::{num, Document};
use crate::{CliError, Command, Common, EstimateArgs, ManifoldArgs, SampleArgs, Status};

/// Stream reserved for the visualization projection, disjoint from slice
/// streams.
const PROJECTION_STREAM: u64 = 1 << 63;

pub fn run(common: &Common, command: Command) -> Result<Status, CliError> {
    if common.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    match command {
        Command::Volume { manifold, estimate } => volume(common, &manifold, None, &estimate),
        Command::Integrate {
            manifold,
            integrand,
            estimate,
        } => volume(common, &manifold, Some(&integrand), &estimate),
        Command::Sample {
            manifold,
            sample,
            project,
        } => sample_command(common, &manifold, &sample, project, false),
        Command::SampleProjective { manifold, sample } => {
            sample_command(common, &manifold, &sample, None, true)
        }
        Command::Physics {
            manifold,
            k,
            theta_min,
            theta_max,
            theta_step,
            delta,
            observable,
            weight,
            shared_slices,
        } => physics(
            common,
            &manifold,
            PhysicsArgs {
                k,
                theta_min,
                theta_max,
                theta_step,
                delta,
                observable,
                weight,
                shared_slices,
            },
        ),
        Command::CompareBaseline {
            manifold,
            radius,
            k,
            reference,
        } => compare_baseline(common, &manifold, radius, k, reference),
        Command::Plan {
            degree,
            dim,
            c_bound,
            k_bound,
            eps,
            confidence,
        } => plan(common, degree, dim, c_bound, k_bound, eps, confidence),
    }
}

fn load(args: &ManifoldArgs, force_projective: bool) -> Result<ManifoldFile, CliError> {
    let overrides = Overrides {
        projective: args.projective || force_projective,
        region: args.region.clone(),
    };
    Ok(ManifoldFile::load_with(&args.manifold, &overrides)?)
}

fn estimator_config(common: &Common) -> EstimatorConfig {
    EstimatorConfig {
        method: IntersectMethod::from(common.method),
        explicit_slices: common.explicit_slices,
        seed: common.seed,
        workers: common.workers,
        breakdown_threshold: common.breakdown_threshold,
        ..EstimatorConfig::default()
    }
}

/// Configuration shared by every command, without workers or output path.
fn base_config(common: &Common, manifold: Option<&ManifoldArgs>) -> Map<String, Value> {
    let solver = EstimatorConfig::default().solver;
    let mut m = Map::new();
    if let Some(a) = manifold {
        m.insert("manifold".into(), json!(a.manifold.display().to_string()));
        m.insert("projective".into(), json!(a.projective));
        m.insert("box".into(), json!(a.region));
    }
    m.insert("seed".into(), json!(common.seed));
    m.insert("method".into(), json!(format!("{:?}", common.method).to_lowercase()));
    m.insert("explicit_slices".into(), json!(common.explicit_slices));
    m.insert("breakdown_threshold".into(), num(common.breakdown_threshold));
    m.insert(
        "solver".into(),
        json!({
            "residual_tolerance": solver.residual_tolerance,
            "newton_max_iters": solver.newton_max_iters,
            "initial_step": solver.initial_step,
            "max_step": solver.max_step,
            "min_step": solver.min_step,
            "corrector_tolerance": solver.corrector_tolerance,
            "real_threshold": solver.real_threshold,
            "dedup_radius": solver.dedup_radius,
        }),
    );
    m
}

fn finish(doc: &Document, common: &Common, unreliable: bool) -> Result<Status, CliError> {
    doc.write(common.format, common.out.as_deref())?;
    Ok(if unreliable {
        Status::Unreliable
    } else {
        Status::Ok
    })
}

fn report_row(report: &EstimatorReport, eps: f64) -> Vec<Value> {
    let det = report.deterministic_variance_bound;
    vec![
        num(report.mean),
        num(report.variance),
        json!(report.k),
        num(eps),
        num(report.chebyshev_bound(eps)),
        det.map_or(Value::Null, num),
        det.map_or(Value::Null, |b| num(b / (eps * eps * report.k as f64))),
        json!(report.failures),
        json!(report.empty_slices),
        json!(report.breakdown_slices),
        num(report.breakdown_rate()),
        json!(report.unreliable),
        json!(report.points),
        json!(report.rejected_by_region),
        num(report.scale),
    ]
}

const REPORT_COLUMNS: [&str; 15] = [
    "mean",
    "variance",
    "k",
    "eps",
    "chebyshev_bound",
    "deterministic_variance_bound",
    "deterministic_chebyshev_bound",
    "failures",
    "empty_slices",
    "breakdown_slices",
    "breakdown_rate",
    "unreliable",
    "points",
    "rejected_by_region",
    "scale",
];

fn check_eps(eps: f64) -> Result<(), CliError> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--eps must be positive, got {eps}")))
    }
}

fn volume(
    common: &Common,
    margs: &ManifoldArgs,
    integrand: Option<&str>,
    args: &EstimateArgs,
) -> Result<Status, CliError> {
    check_eps(args.eps)?;
    let file = load(margs, false)?;
    let m = &file.manifold;
    let f = match integrand {
        Some(text) => file.expression(text)?,
        None => ScalarExpression::constant(m.variables(), 1.0),
    };
    let mut report = estimate_integral(m, &f, args.k, &estimator_config(common))?;
    if let (Some(k), Some(c), false) = (args.k_bound, args.c_bound, m.is_projective()) {
        report = report.with_variance_bound(variance_bound(m.degree_bound(), c, m.dim(), k));
    }
    let mut config = base_config(common, Some(margs));
    config.insert("integrand".into(), json!(integrand.unwrap_or("1")));
    config.insert("k".into(), json!(args.k));
    config.insert("eps".into(), num(args.eps));
    config.insert("K".into(), json!(args.k_bound));
    config.insert("C".into(), json!(args.c_bound));
    let name = if integrand.is_some() { "integrate" } else { "volume" };
    let mut doc = Document::new(
        name,
        config,
        REPORT_COLUMNS.iter().map(|s| s.to_string()).collect(),
    );
    doc.push(report_row(&report, args.eps));
    finish(&doc, common, report.unreliable)
}

fn rejection_config(
    common: &Common,
    m: &ManifoldSpec,
    f: &ScalarExpression,
    args: &SampleArgs,
    doc_meta: &mut Map<String, Value>,
) -> Result<RejectionConfig, CliError> {
    let mut rej = if let Some(kappa) = args.kappa {
        RejectionConfig::with_kappa(m, kappa)?
    } else if let (Some(k), Some(c)) = (args.k_bound, args.c_bound.or(m.is_projective().then_some(0.0))) {
        RejectionConfig::from_bounds(m, k, c)?
    } else if let Some(trials) = args.explore {
        let config = EstimatorConfig {
            run: 1,
            ..estimator_config(common)
        };
        let b = estimate_bounds_by_exploration(m, f, trials, args.safety, &config)?;
        doc_meta.insert("explored_max_f".into(), num(b.max_f));
        doc_meta.insert("explored_max_norm_sq".into(), num(b.max_norm_sq));
        doc_meta.insert("explored_points".into(), json!(b.points_seen));
        RejectionConfig::from_bounds(m, b.k_hat, b.c_hat)?
    } else {
        return Err(CliError::Usage(
            "give --kappa, --K and --C (only --K when projective), or --explore".into(),
        ));
    };
    rej.acceptance_floor = args.acceptance_floor;
    Ok(rej)
}

fn sample_command(
    common: &Common,
    margs: &ManifoldArgs,
    args: &SampleArgs,
    project: Option<usize>,
    projective: bool,
) -> Result<Status, CliError> {
    let file = load(margs, projective)?;
    let m = &file.manifold;
    if !projective && m.is_projective() {
        return Err(CliError::Usage(
            "the manifold is projective; use sample-projective".into(),
        ));
    }
    if project == Some(0) {
        return Err(CliError::Usage("--project needs at least one dimension".into()));
    }
    let f = file.expression(&args.density)?;
    let mut meta = Map::new();
    let rej = rejection_config(common, m, &f, args, &mut meta)?;
    let config = estimator_config(common);
    let sample = if projective {
        sample_points_projective(m, &f, args.count, &rej, &config)?
    } else {
        sample_points(m, &f, args.count, &rej, &config)?
    };

    let n = m.ambient_dim();
    let projection: Option<Vec<Vec<f64>>> = project.map(|rows| {
        let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
        rng.set_stream(PROJECTION_STREAM);
        (0..rows)
            .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
            .collect()
    });

    let mut columns: Vec<String> = m.variables().to_vec();
    if let Some(p) = &projection {
        columns.extend((1..=p.len()).map(|i| format!("proj{i}")));
    }
    columns.extend(["alpha", "residual", "trial"].map(String::from));

    let mut config_map = base_config(common, Some(margs));
    config_map.insert("density".into(), json!(args.density));
    config_map.insert("count".into(), json!(args.count));
    config_map.insert("K".into(), json!(args.k_bound));
    config_map.insert("C".into(), json!(args.c_bound));
    config_map.insert("kappa".into(), json!(args.kappa));
    config_map.insert("explore".into(), json!(args.explore));
    config_map.insert("safety".into(), num(args.safety));
    config_map.insert("acceptance_floor".into(), num(args.acceptance_floor));
    config_map.insert("project".into(), json!(project));
    let name = if projective { "sample-projective" } else { "sample" };
    let mut doc = Document::new(name, config_map, columns);
    doc.meta("seed", common.seed);
    doc.meta("kappa", num(sample.kappa));
    doc.meta("acceptance_rate", num(sample.acceptance_rate()));
    doc.meta("trials", sample.trials);
    doc.meta("accepted", sample.accepted);
    doc.meta("breakdown_slices", sample.breakdown_slices);
    if let Some(k) = rej.k_bound {
        doc.meta("K", num(k));
    }
    if let Some(c) = rej.c_bound {
        doc.meta("C", num(c));
    }
    for (k, v) in meta {
        doc.metadata.insert(k, v);
    }
    for p in &sample.points {
        let mut row: Vec<Value> = p.coordinates.iter().map(|&v| num(v)).collect();
        if let Some(proj) = &projection {
            row.extend(proj.iter().map(|r| {
                num(r.iter().zip(&p.coordinates).map(|(a, b)| a * b).sum::<f64>())
            }));
        }
        row.push(num(p.alpha));
        row.push(num(p.residual));
        row.push(json!(p.trial));
        doc.push(row);
    }
    let unreliable =
        sample.breakdown_slices as f64 > common.breakdown_threshold * sample.trials as f64;
    finish(&doc, common, unreliable)
}

pub struct PhysicsArgs {
    k: u64,
    theta_min: f64,
    theta_max: f64,
    theta_step: f64,
    delta: f64,
    observable: String,
    weight: String,
    shared_slices: bool,
}

/// Grid `min, min + step, ...` up to `max` inclusive, with slack for rounding.
fn grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| min + i as f64 * step).collect()
}

fn physics(common: &Common, margs: &ManifoldArgs, args: PhysicsArgs) -> Result<Status, CliError> {
    if !(args.theta_step > 0.0 && args.delta > 0.0 && args.theta_min <= args.theta_max) {
        return Err(CliError::Usage(
            "need theta-step > 0, delta > 0 and theta-min <= theta-max".into(),
        ));
    }
    let file = load(margs, false)?;
    let m = &file.manifold;
    let theta = file.expression(&args.observable)?;
    let weight = file.expression(&args.weight)?;
    let vars = m.variables();
    let constant = |v: f64| ScalarExpression::constant(vars, v);
    let thetas = grid(args.theta_min, args.theta_max, args.theta_step);
    let mut integrands = Vec::new();
    for &t in &thetas {
        let window = theta
            .binary(BinaryOp::Greater, &constant(t - args.delta))
            .binary(BinaryOp::Mul, &theta.binary(BinaryOp::Less, &constant(t + args.delta)));
        integrands.push(weight.binary(BinaryOp::Mul, &window));
        integrands.push(window);
    }

    let base = estimator_config(common);
    let reports: Vec<EstimatorReport> = if args.shared_slices {
        estimate_integrals(m, &integrands, args.k, &base)?
    } else {
        integrands
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let config = EstimatorConfig {
                    run: i as u32,
                    ..base.clone()
                };
                estimate_integral(m, f, args.k, &config)
            })
            .collect::<Result<_, _>>()?
    };

    let mut config = base_config(common, Some(margs));
    config.insert("k".into(), json!(args.k));
    config.insert("theta_min".into(), num(args.theta_min));
    config.insert("theta_max".into(), num(args.theta_max));
    config.insert("theta_step".into(), num(args.theta_step));
    config.insert("delta".into(), num(args.delta));
    config.insert("observable".into(), json!(args.observable));
    config.insert("weight".into(), json!(args.weight));
    config.insert("shared_slices".into(), json!(args.shared_slices));
    let columns = ["theta0", "mu1", "variance1", "mu2", "variance2", "rho", "unreliable"];
    let mut doc = Document::new("physics", config, columns.map(String::from).to_vec());
    let mut unreliable = false;
    for (t, pair) in thetas.iter().zip(reports.chunks(2)) {
        let (r1, r2) = (&pair[0], &pair[1]);
        let rho = if r2.mean > 0.0 { r1.mean / r2.mean } else { f64::NAN };
        let flag = r1.unreliable || r2.unreliable;
        unreliable |= flag;
        doc.push(vec![
            num(*t),
            num(r1.mean),
            num(r1.variance),
            num(r2.mean),
            num(r2.variance),
            num(rho),
            json!(flag),
        ]);
    }
    if let Some((t, rho)) = doc
        .rows
        .iter()
        .filter_map(|r| Some((r[0].as_f64()?, r[5].as_f64()?)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
    {
        doc.meta("argmax_theta0", num(t));
        doc.meta("max_rho", num(rho));
    }
    finish(&doc, common, unreliable)
}

/// Checkpoints 10, 20, 50, 100, ... below `k`, then `k`.
fn checkpoints(k: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut decade = 10;
    'outer: loop {
        for mult in [1, 2, 5] {
            let c = decade * mult;
            if c >= k {
                break 'outer;
            }
            out.push(c);
        }
        decade *= 10;
    }
    out.push(k);
    out
}

fn running_means(values: &[f64], at: &[u64]) -> Vec<f64> {
    let mut sum = CompensatedSum::default();
    let mut out = Vec::with_capacity(at.len());
    let mut next = at.iter().peekable();
    for (i, &v) in values.iter().enumerate() {
        sum.add(v);
        let n = i as u64 + 1;
        while next.peek() == Some(&&n) {
            out.push(sum.value() / n as f64);
            next.next();
        }
    }
    out
}

fn compare_baseline(
    common: &Common,
    margs: &ManifoldArgs,
    radius: f64,
    k: u64,
    reference: Option<f64>,
) -> Result<Status, CliError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(CliError::Usage(format!("--radius must be positive, got {radius}")));
    }
    if k < 2 {
        return Err(CliError::Usage("--k must be at least 2".into()));
    }
    let file = load(margs, false)?;
    let m = &file.manifold;
    if m.ambient_dim() != 2 || m.dim() != 1 || m.is_projective() {
        return Err(CliError::Usage("compare-baseline needs an affine plane curve".into()));
    }
    let base = estimator_config(common);
    let one = ScalarExpression::constant(m.variables(), 1.0);
    let records = slice_values(m, std::slice::from_ref(&one), k, &base)?;
    let gaussian: Vec<f64> = records.iter().map(|r| r.values[0]).collect();
    let gaussian_breakdowns = records.iter().filter(|r| r.breakdown).count() as u64;
    let baseline_config = EstimatorConfig { run: 1, ..base };
    let (baseline, baseline_breakdowns) = baseline_sphere_values(m, radius, k, &baseline_config)?;

    let at = checkpoints(k);
    let g = running_means(&gaussian, &at);
    let b = running_means(&baseline, &at);
    let mut config = base_config(common, Some(margs));
    config.insert("radius".into(), num(radius));
    config.insert("k".into(), json!(k));
    config.insert("reference".into(), json!(reference));
    let columns = ["k", "gaussian_slice_estimate", "sphere_baseline_estimate", "reference"];
    let mut doc = Document::new("compare-baseline", config, columns.map(String::from).to_vec());
    for ((n, gv), bv) in at.iter().zip(&g).zip(&b) {
        doc.push(vec![json!(n), num(*gv), num(*bv), reference.map_or(Value::Null, num)]);
    }
    doc.meta("gaussian_breakdown_slices", gaussian_breakdowns);
    doc.meta("baseline_breakdown_slices", baseline_breakdowns);
    let threshold = common.breakdown_threshold * k as f64;
    let unreliable =
        gaussian_breakdowns as f64 > threshold || baseline_breakdowns as f64 > threshold;
    finish(&doc, common, unreliable)
}

fn plan(
    common: &Common,
    degree: usize,
    dim: usize,
    c_bound: f64,
    k_bound: f64,
    eps: f64,
    confidence: f64,
) -> Result<Status, CliError> {
    if degree == 0 || dim == 0 {
        return Err(CliError::Usage("--degree and --dim must be positive".into()));
    }
    if !(c_bound >= 0.0 && k_bound >= 0.0) {
        return Err(CliError::Usage("--C and --K must be nonnegative".into()));
    }
    let bound = variance_bound(degree, c_bound, dim, k_bound);
    let plan = plan_sample_size(bound, eps, confidence)?;
    let mut config = Map::new();
    config.insert("degree".into(), json!(degree));
    config.insert("dim".into(), json!(dim));
    config.insert("C".into(), num(c_bound));
    config.insert("K".into(), num(k_bound));
    config.insert("eps".into(), num(eps));
    config.insert("confidence".into(), num(confidence));
    let columns = ["variance_bound", "confidence_rule", "strict_rule"];
    let mut doc = Document::new("plan", config, columns.map(String::from).to_vec());
    doc.push(vec![num(bound), json!(plan.confidence_rule), json!(plan.strict_rule)]);
    finish(&doc, common, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_both_ends() {
        let g = grid(60.0, 180.0, 3.0);
        assert_eq!(g.len(), 41);
        assert_eq!((g[0], g[40]), (60.0, 180.0));
        assert_eq!(grid(1.0, 1.0, 0.5), vec![1.0]);
    }

    #[test]
    fn checkpoint_sequence() {
        assert_eq!(checkpoints(250), vec![10, 20, 50, 100, 200, 250]);
        assert_eq!(checkpoints(100), vec![10, 20, 50, 100]);
        assert_eq!(checkpoints(5), vec![5]);
    }

    #[test]
    fn running_means_at_checkpoints() {
        let v = [1.0, 3.0, 5.0, 7.0];
        assert_eq!(running_means(&v, &[1, 2, 4]), vec![1.0, 2.0, 4.0]);
    }
}
