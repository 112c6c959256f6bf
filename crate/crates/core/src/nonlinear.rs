//! Forchheimer drag and convective inertia inside the interface, and the
//! Picard iteration that wraps the linear transmission solve around them.
//!
//! The iterate is the interior velocity (with its gradient) sampled at the
//! cells of a volume grid. Each step evaluates `k|v|v + β(∇v)v` on the cells,
//! adds it to the interior body force and solves the linear problem again.

use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Domain, SurfaceMesh, VolumeGrid};
use crate::kernels::{Mat3, Vec3};
use crate::potentials::FieldSample;
use crate::transmission::{FlowState, Forcing, TransmissionData, TransmissionError, TransmissionSolver};

/// An iterate whose norm grows past this multiple of the first iterate's norm
/// is treated as diverging.
const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearConfig {
    /// Forchheimer coefficient.
    pub k: f64,
    /// Convective coefficient.
    pub beta: f64,
    pub max_iters: usize,
    /// Relative update tolerance in the discrete H¹ norm.
    pub tol: f64,
    /// Weight of the new iterate, in `(0, 1]`.
    pub relaxation: f64,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        Self {
            k: 0.0,
            beta: 0.0,
            max_iters: 30,
            tol: 1e-8,
            relaxation: 1.0,
        }
    }
}

impl NonlinearConfig {
    pub fn validate(&self) -> Result<(), NonlinearError> {
        let bad = |msg: String| Err(NonlinearError::InvalidConfig(msg));
        if !(self.k.is_finite() && self.beta.is_finite()) {
            return bad(format!("k and beta must be finite, got {} and {}", self.k, self.beta));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return bad(format!("relaxation must lie in (0, 1], got {}", self.relaxation));
        }
        Ok(())
    }

    /// True when the nonlinear term vanishes identically.
    pub fn is_linear(&self) -> bool {
        self.k == 0.0 && self.beta == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Discrete H¹ norm of the change in the iterate.
    pub update_norm: f64,
    /// Discrete H¹ norm of the new iterate.
    pub solution_norm: f64,
    /// Ratio of this update to the previous one.
    pub contraction: Option<f64>,
    /// Relative residual of the interior momentum equation at the probes.
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.contraction).collect()
    }

    pub fn last_contraction(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.contraction)
    }

    /// Every update strictly smaller than the one before.
    pub fn is_contracting(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].update_norm < w[0].update_norm)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NonlinearError {
    #[error("invalid nonlinear configuration: {0}")]
    InvalidConfig(String),
    #[error("interior forcing must be sampled on the iteration grid")]
    GridMismatch,
    #[error(
        "fixed-point iteration {} after {} iterations (last contraction ratio {}); \
         the data is probably too large for the smallness condition",
        if *diverged { "diverged" } else { "did not converge" },
        trace.len(),
        trace.last_contraction().map_or("n/a".to_string(), |r| format!("{r:.3e}"))
    )]
    NotConverged { trace: IterationTrace, diverged: bool },
    #[error(transparent)]
    Transmission(#[from] TransmissionError),
}

/// `k|v|v + β(v·∇)v` per cell.
pub fn nonlinear_term(samples: &[FieldSample], cfg: &NonlinearConfig) -> Vec<Vec3> {
    samples
        .iter()
        .map(|s| s.velocity * (cfg.k * s.velocity.norm()) + s.gradient * s.velocity * cfg.beta)
        .collect()
}

/// Cell-quadrature L² norm of a vector field.
pub fn l2_norm(grid: &VolumeGrid, field: &[Vec3]) -> f64 {
    grid.weights
        .iter()
        .zip(field)
        .map(|(w, f)| w * f.norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Cell-quadrature H¹ norm: `(Σ w (|v|² + |∇v|²))^½`.
pub fn h1_norm(grid: &VolumeGrid, samples: &[FieldSample]) -> f64 {
    grid.weights
        .iter()
        .zip(samples)
        .map(|(w, s)| w * (s.velocity.norm_squared() + s.gradient.norm_squared()))
        .sum::<f64>()
        .sqrt()
}

pub fn h1_distance(grid: &VolumeGrid, a: &[FieldSample], b: &[FieldSample]) -> f64 {
    let diff: Vec<FieldSample> = a.iter().zip(b).map(|(x, y)| *x - *y).collect();
    h1_norm(grid, &diff)
}

/// Norm of the full data: L² norms of the body forces over their grids, the
/// surface L² norms of `h₀` and `g₀`, and `|∂Ω|^½ |u∞|`.
pub fn data_norm(mesh: &SurfaceMesh, data: &TransmissionData, u_inf: &Vec3) -> f64 {
    let forces: f64 = [&data.interior_force, &data.exterior_force]
        .iter()
        .filter_map(|f| f.as_ref())
        .map(|f| l2_norm(&f.grid, &f.force).powi(2))
        .sum();
    let surface: f64 = mesh
        .panels()
        .iter()
        .zip(data.velocity_jump.iter().zip(&data.traction_jump))
        .map(|(p, (h, g))| p.area * (h.norm_squared() + g.norm_squared()))
        .sum();
    (forces + surface + mesh.total_area() * u_inf.norm_squared()).sqrt()
}

/// Points for the momentum residual: cells of full size at least two
/// spacings from the surface, shifted off the cell centre by a fifth of the
/// spacing.
pub fn residual_probes(mesh: &SurfaceMesh, grid: &VolumeGrid, count: usize) -> Vec<Vec3> {
    let h = grid.spacing;
    let candidates: Vec<Vec3> = grid
        .points
        .iter()
        .zip(&grid.weights)
        .filter(|(x, w)| (**w - h.powi(3)).abs() <= 1e-9 * h.powi(3) && mesh.distance(x) > 2.0 * h)
        .map(|(x, _)| *x)
        .collect();
    let shift = Vec3::new(1.0, 1.0, 1.0).normalize() * (0.2 * h);
    let stride = (candidates.len() / count.max(1)).max(1);
    candidates
        .iter()
        .step_by(stride)
        .take(count)
        .map(|x| x + shift)
        .collect()
}

/// Relative residual of `Δu − αu − k|u|u − β(u·∇)u − ∇π = f` at `probes`,
/// with derivatives of the represented interior field by central differences.
/// `f` is the body force of the cell nearest each probe.
pub fn momentum_residual(
    state: &FlowState,
    cfg: &NonlinearConfig,
    body_force: Option<&Forcing>,
    probes: &[Vec3],
) -> f64 {
    let alpha = state.params.alpha;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for p in probes {
        let step = body_force.map_or(1e-3, |f| 0.01 * f.grid.spacing);
        let s = state.evaluate_in(Domain::Interior, p);
        let mut laplacian = Vec3::zeros();
        let mut grad_pressure = Vec3::zeros();
        for m in 0..3 {
            let e = Vec3::ith(m, step);
            let plus = state.evaluate_in(Domain::Interior, &(p + e));
            let minus = state.evaluate_in(Domain::Interior, &(p - e));
            laplacian += (plus.gradient.column(m) - minus.gradient.column(m)) / (2.0 * step);
            grad_pressure[m] = (plus.pressure - minus.pressure) / (2.0 * step);
        }
        let drag = nonlinear_term(std::slice::from_ref(&s), cfg)[0];
        let f = body_force
            .and_then(|f| f.grid.nearest(p).map(|i| f.force[i]))
            .unwrap_or_else(Vec3::zeros);
        let r = laplacian - s.velocity * alpha - drag - grad_pressure - f;
        worst = worst.max(r.norm());
        scale = scale
            .max(laplacian.norm())
            .max(alpha * s.velocity.norm())
            .max(grad_pressure.norm())
            .max(drag.norm());
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Converged iteration: the last linear solve, the interior iterate on the
/// grid and the history.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub state: FlowState,
    pub samples: Vec<FieldSample>,
    pub forcing: Forcing,
    pub trace: IterationTrace,
}

fn base_forcing(grid: &Arc<VolumeGrid>, data: &TransmissionData) -> Result<Vec<Vec3>, NonlinearError> {
    match &data.interior_force {
        None => Ok(vec![Vec3::zeros(); grid.len()]),
        Some(f) if Arc::ptr_eq(&f.grid, grid) || *f.grid == **grid => Ok(f.force.clone()),
        Some(_) => Err(NonlinearError::GridMismatch),
    }
}

/// Picard iteration `vⁿ⁺¹ = (1 − ω)vⁿ + ω U₊(vⁿ)`, where `U₊(v)` is the
/// interior velocity of the linear problem with body force `f₊ + I(v)`.
///
/// Starts from `initial` (or zero) and stops once the H¹ update falls below
/// `tol` times the iterate norm. When the nonlinear term vanishes the map is
/// constant and a single solve is its fixed point.
pub fn picard_solve(
    solver: &TransmissionSolver,
    grid: &Arc<VolumeGrid>,
    data: &TransmissionData,
    cfg: &NonlinearConfig,
    initial: Option<Vec<FieldSample>>,
) -> Result<FixedPoint, NonlinearError> {
    cfg.validate()?;
    let base = base_forcing(grid, data)?;
    let probes = residual_probes(solver.mesh(), grid, 8);
    let mut iterate = initial.unwrap_or_else(|| vec![FieldSample::zero(); grid.len()]);
    assert_eq!(iterate.len(), grid.len(), "one initial sample per cell");
    let mut trace = IterationTrace::default();
    let mut first_norm = None;
    for iteration in 1..=cfg.max_iters {
        let drag = nonlinear_term(&iterate, cfg);
        let forcing = Forcing::new(
            Arc::clone(grid),
            base.iter().zip(&drag).map(|(f, d)| f + d).collect(),
        );
        let step = TransmissionData {
            interior_force: Some(forcing.clone()),
            ..data.clone()
        };
        let state = solver.solve(&step)?;
        let response = state.interior_samples(grid);
        let next: Vec<FieldSample> = if cfg.relaxation == 1.0 {
            response
        } else {
            iterate
                .iter()
                .zip(&response)
                .map(|(v, u)| *v * (1.0 - cfg.relaxation) + *u * cfg.relaxation)
                .collect()
        };
        let update_norm = h1_distance(grid, &next, &iterate);
        let solution_norm = h1_norm(grid, &next);
        let contraction = trace.records.last().map(|r| update_norm / r.update_norm);
        let body = Forcing::new(Arc::clone(grid), base.clone());
        let residual = momentum_residual(&state, cfg, Some(&body), &probes);
        trace.records.push(IterationRecord {
            iteration,
            update_norm,
            solution_norm,
            contraction,
            residual,
        });
        iterate = next;
        let converged = cfg.is_linear() || update_norm <= cfg.tol * solution_norm;
        if converged {
            return Ok(FixedPoint {
                state,
                samples: iterate,
                forcing,
                trace,
            });
        }
        let reference = *first_norm.get_or_insert(solution_norm);
        if !update_norm.is_finite() || solution_norm > DIVERGENCE_FACTOR * reference.max(f64::MIN_POSITIVE) {
            return Err(NonlinearError::NotConverged { trace, diverged: true });
        }
    }
    Err(NonlinearError::NotConverged {
        trace,
        diverged: false,
    })
}

/// A random vector field of degree at most two on the grid, with its exact
/// gradient. Coordinates are taken relative to `center` and scaled by `radius`.
pub fn random_quadratic_field(
    grid: &VolumeGrid,
    center: &Vec3,
    radius: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<FieldSample> {
    let mut draw = || rng.random_range(-1.0..1.0);
    let constant = Vec3::from_fn(|_, _| draw());
    let linear = Mat3::from_fn(|_, _| draw());
    let quadratic: [Mat3; 3] = std::array::from_fn(|_| {
        let m = Mat3::from_fn(|_, _| draw());
        (m + m.transpose()) * 0.5
    });
    grid.points
        .iter()
        .map(|x| {
            let y = (x - center) / radius;
            let mut s = FieldSample::zero();
            for k in 0..3 {
                let qy = quadratic[k] * y;
                s.velocity[k] = constant[k] + linear.row(k).dot(&y.transpose()) + y.dot(&qy);
                for m in 0..3 {
                    s.gradient[(k, m)] = (linear[(k, m)] + 2.0 * qy[m]) / radius;
                }
            }
            s
        })
        .collect()
}

fn random_vectors(points: &[Vec3], center: &Vec3, radius: f64, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let constant = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let linear = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    points
        .iter()
        .map(|x| constant + linear * ((x - center) / radius))
        .collect()
}

/// Largest observed `‖I(v)‖ / ‖v‖²` over random quadratic fields.
pub fn estimate_quadratic_bound(grid: &VolumeGrid, cfg: &NonlinearConfig, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (center, radius) = grid_extent(grid);
    (0..probes)
        .map(|_| {
            let v = random_quadratic_field(grid, &center, radius, &mut rng);
            l2_norm(grid, &nonlinear_term(&v, cfg)) / h1_norm(grid, &v).powi(2)
        })
        .fold(0.0, f64::max)
}

/// `‖I(v) − I(w)‖ / ((‖v‖ + ‖w‖)‖v − w‖)` for random pairs.
pub fn lipschitz_ratios(grid: &VolumeGrid, cfg: &NonlinearConfig, pairs: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (center, radius) = grid_extent(grid);
    (0..pairs)
        .map(|_| {
            let v = random_quadratic_field(grid, &center, radius, &mut rng);
            let w = random_quadratic_field(grid, &center, radius, &mut rng);
            let iv = nonlinear_term(&v, cfg);
            let iw = nonlinear_term(&w, cfg);
            let diff: Vec<Vec3> = iv.iter().zip(&iw).map(|(a, b)| a - b).collect();
            l2_norm(grid, &diff) / ((h1_norm(grid, &v) + h1_norm(grid, &w)) * h1_distance(grid, &v, &w))
        })
        .collect()
}

fn grid_extent(grid: &VolumeGrid) -> (Vec3, f64) {
    let total: f64 = grid.total_weight();
    let center = grid
        .points
        .iter()
        .zip(&grid.weights)
        .fold(Vec3::zeros(), |c, (x, w)| c + x * *w)
        / total;
    let radius = grid
        .points
        .iter()
        .map(|x| (x - center).norm())
        .fold(0.0, f64::max)
        .max(grid.spacing);
    (center, radius)
}

/// Largest observed `‖U₊(d)‖_{H¹} / ‖d‖` over random smooth data `d`. The
/// far-field velocity direction is folded into the boundary data, which
/// leaves the interior field unchanged.
pub fn estimate_solution_bound(
    solver: &TransmissionSolver,
    grid: &Arc<VolumeGrid>,
    exterior_grid: Option<&Arc<VolumeGrid>>,
    probes: usize,
    seed: u64,
) -> Result<f64, NonlinearError> {
    let mesh = solver.mesh();
    let n = mesh.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = mesh.center();
    let radius = mesh.radius();
    let centroids: Vec<Vec3> = mesh.panels().iter().map(|p| p.centroid).collect();
    let coupling = solver.params().coupling.blocks(n);
    let baseline = solver.solve(&TransmissionData::zeros(n))?.interior_samples(grid);
    let mut best = 0.0f64;
    for _ in 0..probes {
        let u_inf = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let mut data = TransmissionData {
            interior_force: Some(Forcing::new(
                Arc::clone(grid),
                random_vectors(&grid.points, &center, radius, &mut rng),
            )),
            exterior_force: exterior_grid.map(|g| {
                Forcing::new(Arc::clone(g), random_vectors(&g.points, &center, radius, &mut rng))
            }),
            velocity_jump: random_vectors(&centroids, &center, radius, &mut rng),
            traction_jump: random_vectors(&centroids, &center, radius, &mut rng),
        };
        let norm = data_norm(mesh, &data, &u_inf);
        for (a, p) in coupling.iter().enumerate() {
            data.velocity_jump[a] += u_inf;
            data.traction_jump[a] -= p * u_inf * 0.5;
        }
        let response: Vec<FieldSample> = solver
            .solve(&data)?
            .interior_samples(grid)
            .iter()
            .zip(&baseline)
            .map(|(a, b)| *a - *b)
            .collect();
        best = best.max(h1_norm(grid, &response) / norm);
    }
    Ok(best)
}

/// Empirical counterparts of the smallness constants for given data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallnessReport {
    pub data_norm: f64,
    /// Estimated bound of the linear solution map, `c*`.
    pub solution_bound: f64,
    /// Estimated constant of `‖I(v)‖ ≤ c₁‖v‖²`.
    pub quadratic_bound: f64,
    /// `3 / (16 c₁ c*²)`: admissible data size.
    pub zeta: f64,
    /// `1 / (4 c₁ c*)`: bound on the interior solution.
    pub eta: f64,
}

impl SmallnessReport {
    pub fn new(data_norm: f64, solution_bound: f64, quadratic_bound: f64) -> Self {
        Self {
            data_norm,
            solution_bound,
            quadratic_bound,
            zeta: 3.0 / (16.0 * quadratic_bound * solution_bound.powi(2)),
            eta: 1.0 / (4.0 * quadratic_bound * solution_bound),
        }
    }

    /// `‖data‖ / ζ̂`; below one the data satisfies the estimated smallness condition.
    pub fn ratio(&self) -> f64 {
        self.data_norm / self.zeta
    }
}

pub fn smallness_report(
    solver: &TransmissionSolver,
    grid: &Arc<VolumeGrid>,
    data: &TransmissionData,
    cfg: &NonlinearConfig,
    probes: usize,
    seed: u64,
) -> Result<SmallnessReport, NonlinearError> {
    let exterior = data.exterior_force.as_ref().map(|f| &f.grid);
    let c_star = estimate_solution_bound(solver, grid, exterior, probes, seed)?;
    let c1 = estimate_quadratic_bound(grid, cfg, probes, seed.wrapping_add(1));
    Ok(SmallnessReport::new(
        data_norm(solver.mesh(), data, &solver.params().u_inf),
        c_star,
        c1,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_volume_grid;
    use crate::quadrature::QuadratureOptions;
    use crate::transmission::{Coupling, ProblemParams};
    use proptest::prelude::*;

    fn grid(h: f64) -> Arc<VolumeGrid> {
        let mesh = SurfaceMesh::icosphere(1, 1.0, Vec3::zeros());
        Arc::new(make_volume_grid(&mesh, h).unwrap())
    }

    fn cfg(k: f64, beta: f64) -> NonlinearConfig {
        NonlinearConfig {
            k,
            beta,
            ..Default::default()
        }
    }

    fn solver(level: u32) -> TransmissionSolver {
        let mesh = Arc::new(SurfaceMesh::icosphere(level, 1.0, Vec3::zeros()));
        let params = ProblemParams {
            alpha: 1.0,
            mu: 0.5,
            coupling: Coupling::Global(Mat3::identity()),
            u_inf: Vec3::zeros(),
        };
        TransmissionSolver::new(mesh, params, QuadratureOptions::default()).unwrap()
    }

    #[test]
    fn zero_field_has_zero_drag() {
        let v = vec![FieldSample::zero(); 4];
        assert!(nonlinear_term(&v, &cfg(3.0, -2.0)).iter().all(|f| *f == Vec3::zeros()));
    }

    #[test]
    fn constant_field_feels_only_forchheimer_drag() {
        let mut s = FieldSample::zero();
        s.velocity = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(nonlinear_term(&[s], &cfg(2.0, 5.0))[0], Vec3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn convective_term_is_gradient_times_velocity() {
        let mut s = FieldSample::zero();
        s.velocity = Vec3::new(1.0, 2.0, 3.0);
        s.gradient = Mat3::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0);
        // (v·∇)v: component 0 = v₁ ∂₁v₀ = 2, component 2 = v₀ ∂₀v₂ = 2.
        assert_eq!(nonlinear_term(&[s], &cfg(0.0, 1.0))[0], Vec3::new(2.0, 0.0, 2.0));
    }

    proptest! {
        #[test]
        fn drag_is_positively_homogeneous_of_order_two(
            v in prop::array::uniform3(-3.0f64..3.0),
            g in prop::array::uniform9(-3.0f64..3.0),
            k in -2.0f64..2.0,
            beta in -2.0f64..2.0,
            c in prop::sample::select(vec![0.5, 2.0, 7.0]),
        ) {
            let mut s = FieldSample::zero();
            s.velocity = Vec3::from(v);
            s.gradient = Mat3::from_row_slice(&g);
            let c_cfg = cfg(k, beta);
            let base = nonlinear_term(&[s], &c_cfg)[0];
            let scaled = nonlinear_term(&[s * c], &c_cfg)[0];
            prop_assert!((scaled - base * (c * c)).norm() <= 1e-14 * (1.0 + scaled.norm()));
        }
    }

    #[test]
    fn random_field_gradient_matches_finite_differences() {
        let g = VolumeGrid {
            points: vec![Vec3::new(0.1, -0.2, 0.3)],
            weights: vec![1.0],
            spacing: 1.0,
        };
        let h = 1e-6;
        let eval = |x: Vec3| {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let g = VolumeGrid {
                points: vec![x],
                ..g.clone()
            };
            random_quadratic_field(&g, &Vec3::new(0.05, 0.0, 0.0), 0.7, &mut rng)[0]
        };
        let s = eval(g.points[0]);
        for m in 0..3 {
            let e = Vec3::ith(m, h);
            let fd = (eval(g.points[0] + e).velocity - eval(g.points[0] - e).velocity) / (2.0 * h);
            assert!((fd - s.gradient.column(m)).norm() < 1e-8);
        }
    }

    #[test]
    fn lipschitz_bound_holds_with_one_constant() {
        let g = grid(0.25);
        let c = cfg(1.0, 1.0);
        let c1 = estimate_quadratic_bound(&g, &c, 20, 3);
        let ratios = lipschitz_ratios(&g, &c, 100, 4);
        let worst = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(c1 > 0.0 && worst <= c1, "{worst} {c1}");
    }

    #[test]
    fn smallness_ratio_is_linear_in_data() {
        let a = SmallnessReport::new(1.0, 2.0, 3.0);
        let b = SmallnessReport::new(2.0, 2.0, 3.0);
        assert!((b.ratio() - 2.0 * a.ratio()).abs() < 1e-15);
        assert_eq!(SmallnessReport::new(0.0, 2.0, 3.0).ratio(), 0.0);
    }

    #[test]
    fn rejects_bad_configuration() {
        for c in [
            NonlinearConfig { max_iters: 0, ..Default::default() },
            NonlinearConfig { tol: 0.0, ..Default::default() },
            NonlinearConfig { relaxation: 1.5, ..Default::default() },
            NonlinearConfig { k: f64::NAN, ..Default::default() },
        ] {
            assert!(matches!(c.validate(), Err(NonlinearError::InvalidConfig(_))));
        }
        assert!(cfg(-1.0, -3.0).validate().is_ok());
    }

    #[test]
    fn linear_problem_converges_in_one_iteration() {
        let s = solver(1);
        let g = grid(0.3);
        let mut data = TransmissionData::zeros(s.mesh().len());
        data.velocity_jump = s.mesh().panels().iter().map(|p| p.centroid * 0.1).collect();
        let fp = picard_solve(&s, &g, &data, &cfg(0.0, 0.0), None).unwrap();
        assert_eq!(fp.trace.len(), 1);
        let linear = s.solve(&data).unwrap().interior_samples(&g);
        assert!(h1_distance(&g, &fp.samples, &linear) <= 1e-14 * h1_norm(&g, &linear));
    }

    #[test]
    fn small_data_reaches_a_fixed_point() {
        let s = solver(1);
        let g = grid(0.3);
        let mut data = TransmissionData::zeros(s.mesh().len());
        data.velocity_jump = s
            .mesh()
            .panels()
            .iter()
            .map(|p| Vec3::new(0.05, 0.02 * p.centroid.z, 0.0))
            .collect();
        let c = cfg(1.0, 1.0);
        let fp = picard_solve(&s, &g, &data, &c, None).unwrap();
        assert!(fp.trace.len() > 1 && fp.trace.is_contracting());
        // Re-applying the map to the converged iterate barely moves it.
        let step = TransmissionData {
            interior_force: Some(Forcing::new(Arc::clone(&g), nonlinear_term(&fp.samples, &c))),
            ..data.clone()
        };
        let again = s.solve(&step).unwrap().interior_samples(&g);
        assert!(h1_distance(&g, &again, &fp.samples) <= 2.0 * c.tol * h1_norm(&g, &fp.samples));
        // Starting from the linear solution lands on the same state.
        let linear = s.solve(&data).unwrap().interior_samples(&g);
        let other = picard_solve(&s, &g, &data, &c, Some(linear)).unwrap();
        assert!(h1_distance(&g, &other.samples, &fp.samples) <= 10.0 * c.tol * h1_norm(&g, &fp.samples));
    }

    #[test]
    fn forcing_on_another_grid_is_rejected() {
        let s = solver(0);
        let g = grid(0.3);
        let other = grid(0.4);
        let mut data = TransmissionData::zeros(s.mesh().len());
        data.interior_force = Some(Forcing::new(Arc::clone(&other), vec![Vec3::zeros(); other.len()]));
        assert!(matches!(
            picard_solve(&s, &g, &data, &cfg(1.0, 0.0), None),
            Err(NonlinearError::GridMismatch)
        ));
    }
}
