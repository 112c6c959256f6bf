//! Executes a scenario and writes its outputs.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use brinkman_bem::geometry::{make_grid, Domain, GridRegion, MeshError, SurfaceMesh, VolumeGrid};
use brinkman_bem::kernels::{Kernel, KernelError, Mat3, Vec3};
use brinkman_bem::nonlinear::{
    picard_solve, smallness_report, IterationTrace, NonlinearConfig, NonlinearError,
};
use brinkman_bem::potentials::TraceOptions;
use brinkman_bem::quadrature::QuadratureOptions;
use brinkman_bem::transmission::{
    Coupling, FlowState, Forcing, PointForce, ProblemParams, TransmissionData, TransmissionError,
    TransmissionSolver,
};
use brinkman_bem::verify::{
    default_manufactured_solution, manufactured_probes, run_decay_study, run_green_identity,
    run_jump_suite, run_manufactured, run_representation, weighted_norms, JumpSuiteOptions,
    RefinementStudy,
};

use crate::fields::read_rows;
use crate::scenario::{MeshSpec, Mode, Scenario, ValidationError};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid scenario: {0}")]
    Validation(#[from] ValidationError),
    #[error("{0}")]
    NotConverged(String),
    #[error(transparent)]
    Transmission(#[from] TransmissionError),
    #[error(transparent)]
    Nonlinear(NonlinearError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

impl RunError {
    /// Process exit status: 2 for bad input, 3 for a nonlinear iteration that
    /// failed to converge, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::NotConverged(_) => 3,
            _ => 1,
        }
    }
}

impl From<NonlinearError> for RunError {
    fn from(e: NonlinearError) -> Self {
        match e {
            NonlinearError::InvalidConfig(m) => ValidationError::new("params", m).into(),
            NonlinearError::Transmission(t) => t.into(),
            other => RunError::Nonlinear(other),
        }
    }
}

/// Accumulates report lines and stage timings for one run directory.
struct Output {
    dir: PathBuf,
    report: Vec<(String, String)>,
    timings: Vec<(String, f64)>,
    clock: Instant,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            report: Vec::new(),
            timings: Vec::new(),
            clock: Instant::now(),
        })
    }

    fn note(&mut self, key: impl Into<String>, value: impl Display) {
        self.report.push((key.into(), value.to_string()));
    }

    fn number(&mut self, key: impl Into<String>, value: f64) {
        self.note(key, format!("{value:.6e}"));
    }

    fn lap(&mut self, stage: &str) {
        self.timings.push((stage.to_string(), self.clock.elapsed().as_secs_f64()));
        self.clock = Instant::now();
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write_text(&self, name: &str, text: &str) -> Result<(), RunError> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|source| RunError::Io { path, source })
    }

    fn write_csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), RunError> {
        let path = self.path(name);
        let wrap = |source| RunError::Csv {
            path: path.clone(),
            source,
        };
        let mut w = csv::Writer::from_path(&path).map_err(wrap)?;
        w.write_record(header).map_err(wrap)?;
        for row in rows {
            w.write_record(&row).map_err(wrap)?;
        }
        w.flush().map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })
    }

    fn finish(&self) -> Result<(), RunError> {
        let width = self.report.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let report: String = self
            .report
            .iter()
            .map(|(k, v)| format!("{k:<width$} = {v}\n"))
            .collect();
        self.write_text("report.txt", &report)?;
        let timings: String = self
            .timings
            .iter()
            .map(|(k, t)| format!("{k} = {t:.3} s\n"))
            .collect();
        self.write_text("timings.txt", &timings)
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

/// Runs `scenario`, writing every output into `dir`. The report records
/// whether the run completed, so partial outputs of a failed run are marked.
pub fn run_scenario(scenario: &Scenario, dir: &Path) -> Result<(), RunError> {
    let mut out = Output::new(dir)?;
    out.write_text("resolved.toml", &scenario.to_toml())?;
    out.note("mode", scenario.mode.name());
    let result = match scenario.mode {
        Mode::Linear => run_linear(scenario, &mut out),
        Mode::Nonlinear => run_nonlinear(scenario, &mut out),
        Mode::VerifyJumps => run_jumps(scenario, &mut out),
        Mode::VerifyGreen => run_green(scenario, &mut out),
        Mode::VerifyDecay => run_decay(scenario, &mut out),
        Mode::VerifyRepresentation => run_representation_study(scenario, &mut out),
        Mode::Manufactured => run_manufactured_study(scenario, &mut out),
    };
    match &result {
        Ok(()) => out.note("status", "complete"),
        Err(e) => out.note("status", format!("incomplete, outputs are partial: {e}")),
    }
    out.finish()?;
    result
}

pub fn build_mesh(spec: &MeshSpec) -> Result<SurfaceMesh, ValidationError> {
    Ok(match spec {
        MeshSpec::Sphere { radius, level, center } => SurfaceMesh::icosphere(*level, *radius, Vec3::from(*center)),
        MeshSpec::Cube {
            edge,
            divisions,
            center,
        } => SurfaceMesh::cube(*edge, *divisions as usize, Vec3::from(*center)),
        MeshSpec::File { path } => {
            SurfaceMesh::read(path).map_err(|e| ValidationError::new("mesh.path", e.to_string()))?
        }
    })
}

pub fn build_params(scenario: &Scenario, mesh: &SurfaceMesh) -> Result<ProblemParams, ValidationError> {
    let p = &scenario.params;
    let coupling = match &p.coupling_file {
        None => Coupling::Global(p.coupling_matrix()),
        Some(file) => {
            let rows = read_rows::<9>(file).map_err(|m| ValidationError::new("params.coupling_file", m))?;
            Coupling::PerPanel(rows.iter().map(|r| Mat3::from_row_slice(r)).collect())
        }
    };
    let params = ProblemParams {
        alpha: p.alpha,
        mu: p.mu,
        coupling,
        u_inf: Vec3::from(p.u_inf),
    };
    params.validate(mesh.len()).map_err(|e| {
        let key = if p.coupling_file.is_some() {
            "params.coupling_file"
        } else {
            "params.coupling"
        };
        ValidationError::new(key, e.to_string())
    })?;
    Ok(params)
}

/// Mesh, coefficients and grids shared by the solve modes.
struct Setup {
    mesh: Arc<SurfaceMesh>,
    params: ProblemParams,
    opts: QuadratureOptions,
    spacing: f64,
    exterior_radius: f64,
}

impl Setup {
    fn new(scenario: &Scenario) -> Result<Self, RunError> {
        let mesh = build_mesh(&scenario.mesh)?;
        let params = build_params(scenario, &mesh)?;
        let radius = mesh.radius();
        let exterior_radius = scenario.grid.exterior_radius.unwrap_or(2.0 * radius);
        if exterior_radius <= radius {
            return Err(ValidationError::new(
                "grid.exterior_radius",
                format!("must exceed the mesh radius {radius}"),
            )
            .into());
        }
        Ok(Self {
            spacing: scenario.grid.spacing.unwrap_or(0.25 * radius),
            exterior_radius,
            mesh: Arc::new(mesh),
            params,
            opts: (&scenario.quadrature).into(),
        })
    }

    fn grid(&self, scenario: &Scenario, region: GridRegion) -> Result<Arc<VolumeGrid>, RunError> {
        Ok(Arc::new(make_grid(&self.mesh, self.spacing, region, scenario.grid.refine)?))
    }

    fn interior_grid(&self, scenario: &Scenario) -> Result<Arc<VolumeGrid>, RunError> {
        self.grid(scenario, GridRegion::Interior)
    }

    fn exterior_grid(&self, scenario: &Scenario) -> Result<Arc<VolumeGrid>, RunError> {
        self.grid(
            scenario,
            GridRegion::Exterior {
                radius: self.exterior_radius,
            },
        )
    }

    /// Samples the scenario data. Body forces need their grid.
    fn data(
        &self,
        scenario: &Scenario,
        interior: Option<&Arc<VolumeGrid>>,
        exterior: Option<&Arc<VolumeGrid>>,
    ) -> Result<TransmissionData, RunError> {
        let d = &scenario.data;
        let centroids: Vec<Vec3> = self.mesh.panels().iter().map(|p| p.centroid).collect();
        let mut data = TransmissionData::zeros(self.mesh.len());
        if let Some(spec) = &d.velocity_jump {
            data.velocity_jump = spec.sample(&centroids, "data.velocity_jump")?;
        }
        if let Some(spec) = &d.traction_jump {
            data.traction_jump = spec.sample(&centroids, "data.traction_jump")?;
        }
        let force = |spec: &crate::fields::FieldSpec, grid: Option<&Arc<VolumeGrid>>, key: &str| {
            let grid = grid.expect("grid built for prescribed force");
            spec.sample(&grid.points, key)
                .map(|f| Forcing::new(Arc::clone(grid), f))
        };
        if let Some(spec) = &d.interior_force {
            data.interior_force = Some(force(spec, interior, "data.interior_force")?);
        }
        if let Some(spec) = &d.exterior_force {
            data.exterior_force = Some(force(spec, exterior, "data.exterior_force")?);
        }
        Ok(data)
    }

    fn evaluation_points(&self, scenario: &Scenario) -> Vec<Vec3> {
        let e = &scenario.evaluation;
        let mut points: Vec<Vec3> = e.points.iter().map(|p| Vec3::from(*p)).collect();
        if let Some(lattice) = &e.lattice {
            points.extend(lattice.points().into_iter().map(Vec3::from));
        }
        if points.is_empty() {
            let c = self.mesh.center();
            let r = 2.0 * self.mesh.radius();
            let lattice = crate::scenario::LatticeSpec {
                lower: (c - Vec3::repeat(r)).into(),
                upper: (c + Vec3::repeat(r)).into(),
                counts: [8, 8, 8],
            };
            points.extend(lattice.points().into_iter().map(Vec3::from));
        }
        points
    }
}

fn write_state(out: &mut Output, setup: &Setup, scenario: &Scenario, state: &FlowState) -> Result<(), RunError> {
    let panels = setup.mesh.panels();
    let d = &state.densities;
    out.write_csv(
        "densities.csv",
        &["panel", "cx", "cy", "cz", "area", "phi1", "phi2", "phi3", "psi1", "psi2", "psi3"],
        panels.iter().enumerate().map(|(i, p)| {
            let mut row = vec![i.to_string()];
            row.extend(p.centroid.iter().map(|v| num(*v)));
            row.push(num(p.area));
            row.extend(d.double_layer[i].iter().map(|v| num(*v)));
            row.extend(d.single_layer[i].iter().map(|v| num(*v)));
            row
        }),
    )?;
    let points = setup.evaluation_points(scenario);
    let values = state.evaluate_many(&points);
    out.lap("evaluation");
    let near = 0.1 * setup.mesh.mean_diameter();
    let close = points.iter().filter(|x| setup.mesh.distance(x) < near).count();
    out.write_csv(
        "fields.csv",
        &["x", "y", "z", "domain", "u1", "u2", "u3", "pi"],
        points.iter().zip(&values).map(|(x, (domain, s))| {
            let mut row: Vec<String> = x.iter().map(|v| num(*v)).collect();
            row.push(
                match domain {
                    Domain::Interior => "interior",
                    Domain::Exterior => "exterior",
                }
                .to_string(),
            );
            row.extend(s.velocity.iter().map(|v| num(*v)));
            row.push(num(s.pressure));
            row
        }),
    )?;
    out.note("evaluation_points", points.len());
    out.note("evaluation_points_near_surface", close);
    out.number("density_norm", state.density_norm());
    let exterior = setup.exterior_grid(scenario)?;
    let norms = weighted_norms(state, &exterior);
    out.number("exterior_weighted_velocity_norm", norms.weighted_velocity);
    out.number("exterior_velocity_gradient_norm", norms.velocity_gradient);
    out.number("exterior_pressure_norm", norms.pressure);
    out.note("exterior_norm_radius", setup.exterior_radius);
    out.lap("norms");
    Ok(())
}

fn describe_setup(out: &mut Output, setup: &Setup) {
    out.note("panels", setup.mesh.len());
    out.number("mesh_radius", setup.mesh.radius());
    out.number("mean_panel_diameter", setup.mesh.mean_diameter());
    out.note("grid_spacing", setup.spacing);
}

fn run_linear(scenario: &Scenario, out: &mut Output) -> Result<(), RunError> {
    let setup = Setup::new(scenario)?;
    describe_setup(out, &setup);
    let interior = scenario
        .data
        .interior_force
        .as_ref()
        .map(|_| setup.interior_grid(scenario))
        .transpose()?;
    let exterior = scenario
        .data
        .exterior_force
        .as_ref()
        .map(|_| setup.exterior_grid(scenario))
        .transpose()?;
    let data = setup.data(scenario, interior.as_ref(), exterior.as_ref())?;
    out.number(
        "data_norm",
        brinkman_bem::nonlinear::data_norm(&setup.mesh, &data, &setup.params.u_inf),
    );
    out.lap("setup");
    let solver = TransmissionSolver::new(Arc::clone(&setup.mesh), setup.params.clone(), setup.opts)?;
    out.lap("assembly");
    let state = solver.solve(&data)?;
    out.lap("solve");
    write_state(out, &setup, scenario, &state)
}

fn write_trace(out: &Output, trace: &IterationTrace) -> Result<(), RunError> {
    out.write_csv(
        "trace.csv",
        &["iteration", "update_norm", "solution_norm", "contraction", "residual"],
        trace.records.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                num(r.update_norm),
                num(r.solution_norm),
                r.contraction.map(num).unwrap_or_default(),
                num(r.residual),
            ]
        }),
    )
}

fn run_nonlinear(scenario: &Scenario, out: &mut Output) -> Result<(), RunError> {
    let setup = Setup::new(scenario)?;
    describe_setup(out, &setup);
    let n = &scenario.nonlinear;
    let cfg = NonlinearConfig {
        k: scenario.params.k,
        beta: scenario.params.beta,
        max_iters: n.max_iters,
        tol: n.tol,
        relaxation: n.relaxation,
    };
    cfg.validate()?;
    let interior = setup.interior_grid(scenario)?;
    let exterior = scenario
        .data
        .exterior_force
        .as_ref()
        .map(|_| setup.exterior_grid(scenario))
        .transpose()?;
    let data = setup.data(scenario, Some(&interior), exterior.as_ref())?;
    out.note("interior_cells", interior.len());
    out.lap("setup");
    let solver = TransmissionSolver::new(Arc::clone(&setup.mesh), setup.params.clone(), setup.opts)?;
    out.lap("assembly");
    if n.smallness && !cfg.is_linear() {
        let report = smallness_report(&solver, &interior, &data, &cfg, n.probes, scenario.seed)?;
        out.number("data_norm", report.data_norm);
        out.number("solution_bound_estimate", report.solution_bound);
        out.number("quadratic_bound_estimate", report.quadratic_bound);
        out.number("admissible_data_size", report.zeta);
        out.number("solution_size_bound", report.eta);
        out.number("data_to_admissible_ratio", report.ratio());
        out.note("smallness_satisfied", report.ratio() <= 1.0);
        out.lap("smallness");
    } else {
        out.number(
            "data_norm",
            brinkman_bem::nonlinear::data_norm(&setup.mesh, &data, &setup.params.u_inf),
        );
    }
    match picard_solve(&solver, &interior, &data, &cfg, None) {
        Ok(fp) => {
            out.lap("iteration");
            write_trace(out, &fp.trace)?;
            out.note("iterations", fp.trace.len());
            out.note("contracting", fp.trace.is_contracting());
            if let Some(last) = fp.trace.records.last() {
                out.number("final_update_norm", last.update_norm);
                out.number("final_solution_norm", last.solution_norm);
                out.number("momentum_residual", last.residual);
            }
            write_state(out, &setup, scenario, &fp.state)
        }
        Err(NonlinearError::NotConverged { trace, diverged }) => {
            out.lap("iteration");
            write_trace(out, &trace)?;
            out.note("iterations", trace.len());
            let what = if diverged { "diverged" } else { "did not converge" };
            Err(RunError::NotConverged(format!(
                "nonlinear iteration {what} after {} iterations (last contraction {})",
                trace.len(),
                trace.last_contraction().map_or("n/a".to_string(), |c| format!("{c:.3e}"))
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn write_study(out: &mut Output, file: &str, study: &RefinementStudy) -> Result<(), RunError> {
    out.write_csv(
        file,
        &["level", "h", "error", "fitted_order", "order_halfwidth"],
        study.levels.iter().zip(&study.sizes).zip(&study.errors).map(|((l, h), e)| {
            vec![
                l.to_string(),
                num(*h),
                num(*e),
                num(study.fitted_order),
                num(study.order_halfwidth),
            ]
        }),
    )?;
    out.number(format!("{}.finest_error", study.name), study.finest_error());
    out.note(
        format!("{}.fitted_order", study.name),
        format!("{:.3} +- {:.3}", study.fitted_order, study.order_halfwidth),
    );
    out.note(format!("{}.converging", study.name), study.is_converging());
    Ok(())
}

/// Radius and centre of the scenario sphere, or of the unit sphere for
/// other meshes.
fn study_sphere(scenario: &Scenario) -> (f64, Vec3) {
    match &scenario.mesh {
        MeshSpec::Sphere { radius, center, .. } => (*radius, Vec3::from(*center)),
        _ => (1.0, Vec3::zeros()),
    }
}

fn run_jumps(scenario: &Scenario, out: &mut Output) -> Result<(), RunError> {
    let (radius, _) = study_sphere(scenario);
    let opts = JumpSuiteOptions {
        levels: scenario.verify.levels.clone(),
        alpha: scenario.params.alpha,
        radius,
        samples: scenario.verify.samples,
        seed: scenario.seed,
        quadrature: (&scenario.quadrature).into(),
        trace: TraceOptions::default(),
    };
    let studies = run_jump_suite(&opts)?;
    out.lap("jump_suite");
    for study in &studies {
        write_study(out, &format!("{}.csv", study.name), study)?;
    }
    Ok(())
}

fn polynomial_test_field(x: &Vec3) -> (Vec3, Mat3) {
    let v = Vec3::new(1.0 + x.y * x.z, x.x - 0.5 * x.z, x.x * x.y + 0.3);
    let g = Mat3::new(0.0, x.z, x.y, 1.0, 0.0, -0.5, x.y, x.x, 0.0);
    (v, g)
}

fn run_green(scenario: &Scenario, out: &mut Output) -> Result<(), RunError> {
    let setup = Setup::new(scenario)?;
    describe_setup(out, &setup);
    let c = setup.mesh.center();
    let r = setup.mesh.radius();
    let interior = setup.interior_grid(scenario)?;
    let exterior = setup.exterior_grid(scenario)?;
    out.lap("grids");
    let outside = PointForce {
        pole: c + Vec3::new(1.5, 0.4, -0.3) * r,
        force: Vec3::new(1.0, -0.5, 0.7),
    };
    let inside = PointForce {
        pole: c + Vec3::new(0.1, 0.2, -0.1) * r,
        force: Vec3::new(1.0, 0.5, -0.3),
    };
    let outer = setup.exterior_radius;
    let bump = move |x: &Vec3| {
        let y = x - c;
        let s = 1.0 - y.norm_squared() / (outer * outer);
        if s <= 0.0 {
            return (Vec3::zeros(), Mat3::zeros());
        }
        let (p, dp) = polynomial_test_field(&y);
        let b = s * s;
        let db = y * (-4.0 * s / (outer * outer));
        (p * b, dp * b + p * db.transpose())
    };
    let interior_kernel = Kernel::brinkman(setup.params.alpha)?;
    let cases = [
        (
            "interior",
            run_green_identity(
                &setup.mesh,
                &interior,
                &interior_kernel,
                &outside,
                Domain::Interior,
                &|x: &Vec3| polynomial_test_field(&(x - c)),
            ),
        ),
        (
            "exterior",
            run_green_identity(&setup.mesh, &exterior, &Kernel::stokes(), &inside, Domain::Exterior, &bump),
        ),
    ];
    out.lap("green_identities");
    out.write_csv(
        "green.csv",
        &["domain", "surface", "volume", "relative_gap"],
        cases
            .iter()
            .map(|(d, g)| vec![d.to_string(), num(g.surface), num(g.volume), num(g.gap())]),
    )?;
    for (d, g) in &cases {
        out.number(format!("{d}.relative_gap"), g.gap());
    }
    Ok(())
}

fn run_decay(scenario: &Scenario, out: &mut Output) -> Result<(), RunError> {
    let setup = Setup::new(scenario)?;
    describe_setup(out, &setup);
    let interior = scenario
        .data
        .interior_force
        .as_ref()
        .map(|_| setup.interior_grid(scenario))
        .transpose()?;
    let exterior = scenario
        .data
        .exterior_force
        .as_ref()
        .map(|_| setup.exterior_grid(scenario))
        .transpose()?;
    let data = setup.data(scenario, interior.as_ref(), exterior.as_ref())?;
    let solver = TransmissionSolver::new(Arc::clone(&setup.mesh), setup.params.clone(), setup.opts)?;
    let state = solver.solve(&data)?;
    out.lap("solve");
    let radius = setup.mesh.radius();
    let radii: Vec<f64> = scenario.verify.radii.iter().map(|m| m * radius).collect();
    let study = run_decay_study(&state, &radii, scenario.verify.directions);
    out.lap("decay");
    out.write_csv(
        "decay.csv",
        &["radius", "velocity", "gradient", "pressure", "leray_ratio"],
        (0..study.radii.len()).map(|i| {
            vec![
                num(study.radii[i]),
                num(study.velocity[i]),
                num(study.gradient[i]),
                num(study.pressure[i]),
                num(study.leray_ratios[i]),
            ]
        }),
    )?;
    out.number("velocity_slope", study.velocity_slope);
    out.number("gradient_slope", study.gradient_slope);
    out.number("pressure_slope", study.pressure_slope);
    Ok(())
}

fn run_representation_study(scenario: &Scenario, out: &mut Output) -> Result<(), RunError> {
    let (radius, center) = study_sphere(scenario);
    let opts: QuadratureOptions = (&scenario.quadrature).into();
    let probes = manufactured_probes(&center, radius);
    let brinkman = Kernel::brinkman(scenario.params.alpha)?;
    let outside = PointForce {
        pole: center + Vec3::new(1.6, 0.3, -0.2) * radius,
        force: Vec3::new(1.0, -0.5, 0.8),
    };
    let inside = PointForce {
        pole: center + Vec3::new(-0.2, 0.25, 0.1) * radius,
        force: Vec3::new(-0.3, 1.0, 0.6),
    };
    let levels = scenario.verify.levels.clone();
    let mut sizes = Vec::new();
    let mut errors = [Vec::new(), Vec::new()];
    for &level in &levels {
        let mesh = SurfaceMesh::icosphere(level, radius, center);
        let (inner, outer): (Vec<Vec3>, Vec<Vec3>) = probes.iter().partition(|x| mesh.contains(x));
        errors[0].push(run_representation(&mesh, &brinkman, &outside, Domain::Interior, &inner, &opts));
        errors[1].push(run_representation(
            &mesh,
            &Kernel::stokes(),
            &inside,
            Domain::Exterior,
            &outer,
            &opts,
        ));
        sizes.push(mesh.mean_diameter());
    }
    out.lap("representation");
    let [interior, exterior] = errors;
    let interior = RefinementStudy::new("representation_interior", levels.clone(), sizes.clone(), interior);
    let exterior = RefinementStudy::new("representation_exterior", levels, sizes, exterior);
    write_study(out, "representation_interior.csv", &interior)?;
    write_study(out, "representation_exterior.csv", &exterior)
}

fn run_manufactured_study(scenario: &Scenario, out: &mut Output) -> Result<(), RunError> {
    let params = build_params(scenario, &SurfaceMesh::icosphere(0, 1.0, Vec3::zeros()))?;
    if matches!(params.coupling, Coupling::PerPanel(_)) {
        return Err(ValidationError::new(
            "params.coupling_file",
            "the manufactured study refines the mesh and needs a constant interface matrix",
        )
        .into());
    }
    let center = Vec3::zeros();
    let solution = default_manufactured_solution(&center, 1.0);
    let probes = manufactured_probes(&center, 1.0);
    let result = run_manufactured(
        &scenario.verify.levels,
        &params,
        &solution,
        &probes,
        &(&scenario.quadrature).into(),
    )?;
    out.lap("manufactured");
    write_study(out, "manufactured.csv", &result.study)?;
    for row in &result.levels {
        out.number(format!("level{}.interior_error", row.level), row.error.interior);
        out.number(format!("level{}.exterior_error", row.level), row.error.exterior);
    }
    out.number("max_relative_velocity_error", result.study.finest_error());
    Ok(())
}
