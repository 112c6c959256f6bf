//! Refinement studies for the layer potential identities, Green identities,
//! the representation formula, far-field decay and manufactured solutions.

use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::geometry::{Domain, SurfaceMesh, VolumeGrid};
use crate::kernels::{Kernel, KernelError, Mat3, Vec3};
use crate::potentials::{
    assemble_boundary_operator, double_layer_eval, double_layer_eval_vertex, offset_traces,
    single_layer_eval, OperatorKind, TraceOptions,
};
use crate::quadrature::{integrate_smooth, QuadratureOptions};
use crate::transmission::{
    FlowState, ManufacturedSolution, PointForce, ProblemParams, TransmissionError, TransmissionSolver,
};

/// Errors over a refinement sequence with the fitted convergence order.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub name: String,
    pub levels: Vec<u32>,
    /// Mean panel diameter per level.
    pub sizes: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log size`.
    pub fitted_order: f64,
    /// Half-width of the 95% confidence interval of the slope.
    pub order_halfwidth: f64,
}

impl RefinementStudy {
    pub fn new(name: impl Into<String>, levels: Vec<u32>, sizes: Vec<f64>, errors: Vec<f64>) -> Self {
        assert_eq!(levels.len(), sizes.len());
        assert_eq!(levels.len(), errors.len());
        let (fitted_order, order_halfwidth) = fit_slope(&sizes, &errors);
        Self {
            name: name.into(),
            levels,
            sizes,
            errors,
            fitted_order,
            order_halfwidth,
        }
    }

    /// `errors[i] / errors[i + 1]` for consecutive levels.
    pub fn reductions(&self) -> Vec<f64> {
        self.errors.windows(2).map(|w| w[0] / w[1]).collect()
    }

    pub fn finest_error(&self) -> f64 {
        *self.errors.last().expect("non-empty study")
    }

    /// Errors decrease from level to level, except possibly between the two
    /// coarsest levels.
    pub fn is_converging(&self) -> bool {
        self.reductions().iter().skip(1).all(|r| *r > 1.0)
            && self.finest_error() < self.errors[0]
    }
}

/// Slope and 95% half-width of a log-log least-squares fit.
pub fn fit_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if lx.len() < 3 {
        return (slope, f64::INFINITY);
    }
    let ssr: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    let dof = n - 2.0;
    let t = StudentsT::new(0.0, 1.0, dof)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (slope, t * (ssr / dof / sxx).sqrt())
}

/// A vector field of degree two with random coefficients in `[-1, 1]`,
/// in coordinates scaled by `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothDensity {
    constant: Vec3,
    linear: Mat3,
    quadratic: [Mat3; 3],
    radius: f64,
}

impl SmoothDensity {
    pub fn random(rng: &mut ChaCha8Rng, radius: f64) -> Self {
        let mut draw = || rng.random_range(-1.0..1.0);
        Self {
            constant: Vec3::from_fn(|_, _| draw()),
            linear: Mat3::from_fn(|_, _| draw()),
            quadratic: std::array::from_fn(|_| Mat3::from_fn(|_, _| draw())),
            radius,
        }
    }

    pub fn eval(&self, x: &Vec3) -> Vec3 {
        let y = x / self.radius;
        self.constant + self.linear * y + Vec3::from_fn(|k, _| y.dot(&(self.quadratic[k] * y)))
    }
}

/// Settings of the jump relation suite.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSuiteOptions {
    pub levels: Vec<u32>,
    pub alpha: f64,
    pub radius: f64,
    /// Number of panels at which the identities are sampled.
    pub samples: usize,
    pub seed: u64,
    pub quadrature: QuadratureOptions,
    pub trace: TraceOptions,
}

impl Default for JumpSuiteOptions {
    fn default() -> Self {
        Self {
            levels: vec![1, 2, 3],
            alpha: 1.0,
            radius: 1.0,
            samples: 160,
            seed: 1,
            quadrature: QuadratureOptions::default(),
            trace: TraceOptions::default(),
        }
    }
}

pub const SINGLE_LAYER_CONTINUITY: &str = "single_layer_trace_continuity";
pub const DOUBLE_LAYER_JUMP: &str = "double_layer_trace_jump";
pub const SINGLE_LAYER_TRACTION_JUMP: &str = "single_layer_traction_jump";
pub const DOUBLE_LAYER_TRACTION_CONTINUITY: &str = "double_layer_traction_continuity";

fn rms(v: impl Iterator<Item = Vec3>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x.norm_squared(), n + 1));
    (sum / n.max(1) as f64).sqrt()
}

/// Offset-trace checks of the four jump and continuity relations on
/// icospheres, with random smooth densities:
///
/// * the single layer velocity is continuous across the surface,
/// * the double layer velocity jumps by the density, `γ₋Wh − γ₊Wh = h`,
/// * the single layer traction satisfies `t±(Vg) = ±½g + K*g`, with `+`
///   the interior side,
/// * the double layer traction is continuous.
///
/// Errors are relative to the density for the jump relations and to the
/// mean of the two one-sided traces for the continuity relations.
pub fn run_jump_suite(opts: &JumpSuiteOptions) -> Result<Vec<RefinementStudy>, KernelError> {
    let kernel = Kernel::brinkman(opts.alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let single = SmoothDensity::random(&mut rng, opts.radius);
    let double = SmoothDensity::random(&mut rng, opts.radius);
    let mut errors = vec![Vec::new(); 4];
    let mut sizes = Vec::new();
    for &level in &opts.levels {
        let mesh = SurfaceMesh::icosphere(level, opts.radius, Vec3::zeros());
        let q = &opts.quadrature;
        let g: Vec<Vec3> = mesh.panels().iter().map(|p| single.eval(&p.centroid)).collect();
        let h_vertex: Vec<Vec3> = mesh.vertices().iter().map(|v| double.eval(v)).collect();
        let kstar_g = assemble_boundary_operator(&mesh, &kernel, OperatorKind::AdjointDoubleLayer, q).apply(&g);
        let picks = rand::seq::index::sample(&mut rng, mesh.len(), opts.samples.min(mesh.len())).into_vec();
        let rows: Vec<[Vec3; 8]> = picks
            .par_iter()
            .map(|&a| {
                let panel = &mesh.panels()[a];
                let eps = opts.trace.offset_fraction * panel.diameter;
                let (x, n) = (&panel.centroid, &panel.normal);
                let (vi, ve) = offset_traces(x, n, eps, |y| single_layer_eval(&mesh, &kernel, &g, y, q));
                let (wi, we) = offset_traces(x, n, eps, |y| double_layer_eval_vertex(&mesh, &kernel, &h_vertex, y, q));
                let tri = mesh.triangles()[a];
                let h_here = (h_vertex[tri[0]] + h_vertex[tri[1]] + h_vertex[tri[2]]) / 3.0;
                [
                    ve.velocity - vi.velocity,
                    (vi.velocity + ve.velocity) * 0.5,
                    we.velocity - wi.velocity - h_here,
                    h_here,
                    vi.traction(n) - g[a] * 0.5 - kstar_g[a],
                    ve.traction(n) + g[a] * 0.5 - kstar_g[a],
                    we.traction(n) - wi.traction(n),
                    (we.traction(n) + wi.traction(n)) * 0.5,
                ]
            })
            .collect();
        let col = |i: usize| rms(rows.iter().map(|r| r[i]));
        let g_norm = rms(picks.iter().map(|&a| g[a]));
        errors[0].push(col(0) / col(1));
        errors[1].push(col(2) / col(3));
        errors[2].push(col(4).max(col(5)) / g_norm);
        errors[3].push(col(6) / col(7));
        sizes.push(mesh.mean_diameter());
    }
    Ok([
        SINGLE_LAYER_CONTINUITY,
        DOUBLE_LAYER_JUMP,
        SINGLE_LAYER_TRACTION_JUMP,
        DOUBLE_LAYER_TRACTION_CONTINUITY,
    ]
    .iter()
    .zip(errors)
    .map(|(name, e)| RefinementStudy::new(*name, opts.levels.clone(), sizes.clone(), e))
    .collect())
}

/// Both sides of a Green identity and their relative gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenIdentityResult {
    /// `±⟨t(u, π), γw⟩` over the surface.
    pub surface: f64,
    /// `2⟨𝔼u, 𝔼w⟩ + α⟨u, w⟩ − ⟨π, div w⟩` over the volume grid.
    pub volume: f64,
}

impl GreenIdentityResult {
    pub fn gap(&self) -> f64 {
        let scale = self.surface.abs().max(self.volume.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.surface - self.volume).abs() / scale
        }
    }
}

/// A smooth test field: value and gradient `(k, m) = ∂ₘw_k`.
pub type TestField<'a> = &'a (dyn Fn(&Vec3) -> (Vec3, Mat3) + Sync);

/// Green identity for the field of a point force with its pole outside
/// `domain`, against the test field `w`. The volume grid must cover `domain`;
/// in the exterior, `w` must vanish outside the grid.
pub fn run_green_identity(
    mesh: &SurfaceMesh,
    grid: &VolumeGrid,
    kernel: &Kernel,
    source: &PointForce,
    domain: Domain,
    w: TestField<'_>,
) -> GreenIdentityResult {
    let sign = match domain {
        Domain::Interior => 1.0,
        Domain::Exterior => -1.0,
    };
    let surface: f64 = mesh
        .panels()
        .par_iter()
        .map(|panel| {
            let mut sum = 0.0;
            integrate_smooth(&panel.vertices, |node| {
                let t = source.traction(kernel, &node.point, &panel.normal);
                sum += node.weight * t.dot(&w(&node.point).0);
            });
            sign * sum
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let volume: f64 = grid
        .points
        .par_iter()
        .zip(&grid.weights)
        .map(|(x, weight)| {
            let s = source.eval(kernel, x);
            let (wv, wg) = w(x);
            let strain_u = (s.gradient + s.gradient.transpose()) * 0.5;
            let strain_w = (wg + wg.transpose()) * 0.5;
            weight
                * (2.0 * strain_u.component_mul(&strain_w).sum() + kernel.alpha() * s.velocity.dot(&wv)
                    - s.pressure * wg.trace())
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    GreenIdentityResult { surface, volume }
}

/// Largest error of the representation `u = ±(V[t] − W[γu])` at `probes` in
/// `domain`, relative to the largest `|u|`, for the field of a point force
/// whose pole lies on the other side of the surface. Traces use the outward
/// normal, so the exterior formula carries the minus sign.
pub fn run_representation(
    mesh: &SurfaceMesh,
    kernel: &Kernel,
    source: &PointForce,
    domain: Domain,
    probes: &[Vec3],
    opts: &QuadratureOptions,
) -> f64 {
    let sign = match domain {
        Domain::Interior => 1.0,
        Domain::Exterior => -1.0,
    };
    let traction: Vec<Vec3> = mesh
        .panels()
        .iter()
        .map(|p| source.traction(kernel, &p.centroid, &p.normal))
        .collect();
    let trace: Vec<Vec3> = mesh
        .panels()
        .iter()
        .map(|p| source.eval(kernel, &p.centroid).velocity)
        .collect();
    let (worst, scale) = probes
        .par_iter()
        .map(|x| {
            let exact = source.eval(kernel, x).velocity;
            let u = (single_layer_eval(mesh, kernel, &traction, x, opts).velocity
                - double_layer_eval(mesh, kernel, &trace, x, opts).velocity)
                * sign;
            ((u - exact).norm(), exact.norm())
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// `count` nearly uniform directions (Fibonacci sphere).
pub fn sphere_directions(count: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            Vec3::new(r * t.cos(), r * t.sin(), z)
        })
        .collect()
}

/// Sphere averages of the exterior disturbance and their fitted decay rates.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayStudy {
    pub radii: Vec<f64>,
    /// Mean of `|u₋ − u∞|` over each sphere.
    pub velocity: Vec<f64>,
    /// Mean of `|∇u₋|`.
    pub gradient: Vec<f64>,
    /// Mean of `|π₋|`.
    pub pressure: Vec<f64>,
    pub velocity_slope: f64,
    pub gradient_slope: f64,
    pub pressure_slope: f64,
    /// Mean of `|u₋ − u∞|` at `2r` divided by the mean at `r`, per radius.
    pub leray_ratios: Vec<f64>,
}

fn add3(a: [f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sphere_means(state: &FlowState, center: &Vec3, radius: f64, dirs: &[Vec3]) -> [f64; 3] {
    let u_inf = state.params.u_inf;
    let sums = dirs
        .par_iter()
        .map(|d| {
            let s = state.evaluate_in(Domain::Exterior, &(center + d * radius));
            [(s.velocity - u_inf).norm(), s.gradient.norm(), s.pressure.abs()]
        })
        .collect::<Vec<_>>()
        .iter()
        .fold([0.0; 3], add3);
    sums.map(|v| v / dirs.len() as f64)
}

/// Far-field decay of a solved state over spheres centred on the mesh.
pub fn run_decay_study(state: &FlowState, radii: &[f64], points_per_sphere: usize) -> DecayStudy {
    let center = state.mesh.center();
    let dirs = sphere_directions(points_per_sphere);
    let means: Vec<[f64; 3]> = radii.iter().map(|r| sphere_means(state, &center, *r, &dirs)).collect();
    let column = |i: usize| means.iter().map(|m| m[i]).collect::<Vec<f64>>();
    let (velocity, gradient, pressure) = (column(0), column(1), column(2));
    let leray_ratios = radii
        .iter()
        .zip(&velocity)
        .map(|(r, v)| sphere_means(state, &center, 2.0 * r, &dirs)[0] / v)
        .collect();
    DecayStudy {
        velocity_slope: fit_slope(radii, &velocity).0,
        gradient_slope: fit_slope(radii, &gradient).0,
        pressure_slope: fit_slope(radii, &pressure).0,
        radii: radii.to_vec(),
        velocity,
        gradient,
        pressure,
        leray_ratios,
    }
}

/// Exterior norms with the weight `ρ(x) = (1 + |x|²)^½`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeightedNormSet {
    /// L² norm of `ρ⁻¹(u₋ − u∞)`.
    pub weighted_velocity: f64,
    /// L² norm of `∇u₋`.
    pub velocity_gradient: f64,
    /// L² norm of `π₋`.
    pub pressure: f64,
}

/// Weighted norms of the exterior field over the cells of `grid`.
pub fn weighted_norms(state: &FlowState, grid: &VolumeGrid) -> WeightedNormSet {
    let u_inf = state.params.u_inf;
    let sums = grid
        .points
        .par_iter()
        .zip(&grid.weights)
        .map(|(x, w)| {
            let s = state.evaluate_in(Domain::Exterior, x);
            let rho2 = 1.0 + x.norm_squared();
            [
                w * (s.velocity - u_inf).norm_squared() / rho2,
                w * s.gradient.norm_squared(),
                w * s.pressure * s.pressure,
            ]
        })
        .collect::<Vec<_>>()
        .iter()
        .fold([0.0; 3], add3);
    WeightedNormSet {
        weighted_velocity: sums[0].sqrt(),
        velocity_gradient: sums[1].sqrt(),
        pressure: sums[2].sqrt(),
    }
}

/// Fifty probes around a sphere of radius `radius` centred at `center`: the
/// even ones at 0.3–0.57 radii, the odd ones at 1.5–2.85 radii.
pub fn manufactured_probes(center: &Vec3, radius: f64) -> Vec<Vec3> {
    sphere_directions(50)
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let r = if i % 2 == 0 {
                0.3 + 0.3 * ((i * 7 % 10) as f64 / 10.0)
            } else {
                1.5 + 1.5 * ((i * 3 % 10) as f64 / 10.0)
            };
            center + d * (r * radius)
        })
        .collect()
}

/// A Brinkman force with its pole outside and a Stokes force with its pole
/// inside a sphere of radius `radius` centred at `center`.
pub fn default_manufactured_solution(center: &Vec3, radius: f64) -> ManufacturedSolution {
    ManufacturedSolution {
        interior: PointForce {
            pole: center + Vec3::new(1.6, 0.3, -0.2) * radius,
            force: Vec3::new(1.0, -0.5, 0.8),
        },
        exterior: PointForce {
            pole: center + Vec3::new(-0.2, 0.25, 0.1) * radius,
            force: Vec3::new(-0.3, 1.0, 0.6),
        },
    }
}

/// Velocity errors at the probes on each side, each relative to the largest
/// exact velocity on that side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedError {
    pub interior: f64,
    pub exterior: f64,
}

impl ManufacturedError {
    pub fn max(&self) -> f64 {
        self.interior.max(self.exterior)
    }
}

pub fn manufactured_error(
    state: &FlowState,
    solution: &ManufacturedSolution,
    probes: &[Vec3],
) -> Result<ManufacturedError, KernelError> {
    let alpha = state.params.alpha;
    let mut err = [0.0f64; 2];
    let mut scale = [0.0f64; 2];
    for (x, (domain, s)) in probes.iter().zip(state.evaluate_many(probes)) {
        let exact = solution.eval(alpha, domain, x)?;
        let side = usize::from(domain == Domain::Exterior);
        err[side] = err[side].max((s.velocity - exact.velocity).norm());
        scale[side] = scale[side].max(exact.velocity.norm());
    }
    let rel = |i: usize| if scale[i] > 0.0 { err[i] / scale[i] } else { err[i] };
    Ok(ManufacturedError {
        interior: rel(0),
        exterior: rel(1),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedLevel {
    pub level: u32,
    pub panels: usize,
    pub error: ManufacturedError,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedStudy {
    pub levels: Vec<ManufacturedLevel>,
    /// The larger of the two side errors per level.
    pub study: RefinementStudy,
}

/// Solves the transmission problem with data from `solution` on unit
/// icospheres of the given levels and measures the error at `probes`.
pub fn run_manufactured(
    levels: &[u32],
    params: &ProblemParams,
    solution: &ManufacturedSolution,
    probes: &[Vec3],
    opts: &QuadratureOptions,
) -> Result<ManufacturedStudy, TransmissionError> {
    let mut rows = Vec::new();
    let mut sizes = Vec::new();
    for &level in levels {
        let start = Instant::now();
        let mesh = std::sync::Arc::new(SurfaceMesh::icosphere(level, 1.0, Vec3::zeros()));
        let solver = TransmissionSolver::new(std::sync::Arc::clone(&mesh), params.clone(), *opts)?;
        let state = solver.solve(&solution.data(&mesh, params)?)?;
        let error = manufactured_error(&state, solution, probes)?;
        sizes.push(mesh.mean_diameter());
        rows.push(ManufacturedLevel {
            level,
            panels: mesh.len(),
            error,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let study = RefinementStudy::new(
        "manufactured_velocity",
        levels.to_vec(),
        sizes,
        rows.iter().map(|r| r.error.max()).collect(),
    );
    Ok(ManufacturedStudy { levels: rows, study })
}
