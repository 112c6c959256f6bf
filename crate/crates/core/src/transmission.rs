//! Linear transmission problem: Brinkman flow inside the surface, Stokes flow
//! outside, coupled through a velocity jump and a traction condition with an
//! interface matrix `𝒫`.
//!
//! The interior solution is `u₊ = N_α f₊ + W_α Φ + V_α φ` and the exterior one
//! `u₋ = N f₋ + W Φ + V φ + u∞`. The densities solve the `6N × 6N` block system
//!
//! ```text
//! [ −I + K_α − K                        V_α − V                               ] [Φ]   [h₀₀]
//! [ D_α − μD + ½𝒫(K_α + K)    ½(1 + μ)I + K*_α − μK* + ½𝒫(V_α + V)  ] [φ] = [g₀₀]
//! ```

use std::sync::Arc;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;

use crate::dense::{DenseMatrix, LuFactor};
use crate::geometry::{Domain, SurfaceMesh, VolumeGrid};
use crate::kernels::{Kernel, KernelError, Mat3, Vec3};
use crate::potentials::{
    double_layer_eval, flatten, newtonian_eval, single_layer_eval, unflatten,
    BoundaryDensityPair, FieldSample, OperatorSet,
};
use crate::quadrature::QuadratureOptions;

#[derive(Debug, thiserror::Error)]
pub enum TransmissionError {
    #[error("alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("mu must be positive and finite, got {0}")]
    InvalidMu(f64),
    #[error("interface matrix on panel {panel} is not symmetric")]
    NotSymmetric { panel: usize },
    #[error(
        "interface matrix on panel {panel} violates the positivity condition <Pv, v> >= 0 \
         (smallest eigenvalue {min_eigenvalue})"
    )]
    Positivity { panel: usize, min_eigenvalue: f64 },
    #[error("expected {expected} per-panel interface matrices, got {got}")]
    CouplingSize { expected: usize, got: usize },
    #[error("{what} has {got} entries, expected {expected}")]
    DataSize {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("linear system is numerically singular (relative residual {residual:e})")]
    Singular { residual: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Interface matrix `𝒫`, constant or per panel.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    Global(Mat3),
    PerPanel(Vec<Mat3>),
}

impl Coupling {
    pub fn blocks(&self, n: usize) -> Vec<Mat3> {
        match self {
            Coupling::Global(m) => vec![*m; n],
            Coupling::PerPanel(v) => v.clone(),
        }
    }
}

/// Checks that `m` is symmetric and positive semidefinite to rounding.
pub fn check_positivity(m: &Mat3, panel: usize) -> Result<(), TransmissionError> {
    let scale = m.norm().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).norm() > 1e-12 * scale {
        return Err(TransmissionError::NotSymmetric { panel });
    }
    let min_eigenvalue = SymmetricEigen::new(*m).eigenvalues.min();
    if min_eigenvalue < -1e-12 * scale {
        return Err(TransmissionError::Positivity {
            panel,
            min_eigenvalue,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemParams {
    pub alpha: f64,
    /// Exterior to interior viscosity ratio.
    pub mu: f64,
    pub coupling: Coupling,
    pub u_inf: Vec3,
}

impl ProblemParams {
    pub fn validate(&self, panels: usize) -> Result<(), TransmissionError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(TransmissionError::InvalidAlpha(self.alpha));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(TransmissionError::InvalidMu(self.mu));
        }
        match &self.coupling {
            Coupling::Global(m) => check_positivity(m, 0)?,
            Coupling::PerPanel(v) => {
                if v.len() != panels {
                    return Err(TransmissionError::CouplingSize {
                        expected: panels,
                        got: v.len(),
                    });
                }
                for (i, m) in v.iter().enumerate() {
                    check_positivity(m, i)?;
                }
            }
        }
        Ok(())
    }
}

/// A body force sampled on the cells of a volume grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub grid: Arc<VolumeGrid>,
    pub force: Vec<Vec3>,
}

impl Forcing {
    pub fn new(grid: Arc<VolumeGrid>, force: Vec<Vec3>) -> Self {
        assert_eq!(grid.len(), force.len(), "one force per cell");
        Self { grid, force }
    }

    pub fn eval(&self, kernel: &Kernel, x: &Vec3) -> FieldSample {
        newtonian_eval(&self.grid, kernel, &self.force, x)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            force: self.force.iter().map(|f| f * s).collect(),
        }
    }
}

/// Right-hand data: body forces on each side, and the velocity jump `h₀` and
/// traction datum `g₀` per panel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransmissionData {
    pub interior_force: Option<Forcing>,
    pub exterior_force: Option<Forcing>,
    pub velocity_jump: Vec<Vec3>,
    pub traction_jump: Vec<Vec3>,
}

impl TransmissionData {
    pub fn zeros(panels: usize) -> Self {
        Self {
            interior_force: None,
            exterior_force: None,
            velocity_jump: vec![Vec3::zeros(); panels],
            traction_jump: vec![Vec3::zeros(); panels],
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            interior_force: self.interior_force.as_ref().map(|f| f.scaled(s)),
            exterior_force: self.exterior_force.as_ref().map(|f| f.scaled(s)),
            velocity_jump: self.velocity_jump.iter().map(|v| v * s).collect(),
            traction_jump: self.traction_jump.iter().map(|v| v * s).collect(),
        }
    }

    fn check(&self, panels: usize) -> Result<(), TransmissionError> {
        for (what, v) in [
            ("velocity jump", &self.velocity_jump),
            ("traction datum", &self.traction_jump),
        ] {
            if v.len() != panels {
                return Err(TransmissionError::DataSize {
                    what,
                    expected: panels,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }
}

/// Corrected boundary data `(h₀₀, g₀₀)` at the panel centroids, including the
/// far-field shift `h₀₀ += u∞`, `g₀₀ −= ½𝒫u∞`.
pub fn build_rhs(
    mesh: &SurfaceMesh,
    params: &ProblemParams,
    data: &TransmissionData,
) -> Result<(Vec<Vec3>, Vec<Vec3>), TransmissionError> {
    data.check(mesh.len())?;
    let brinkman = Kernel::brinkman(params.alpha)?;
    let stokes = Kernel::stokes();
    let coupling = params.coupling.blocks(mesh.len());
    let rows: Vec<(Vec3, Vec3)> = mesh
        .panels()
        .par_iter()
        .enumerate()
        .map(|(a, panel)| {
            let x = &panel.centroid;
            let n = &panel.normal;
            let inner = data
                .interior_force
                .as_ref()
                .map_or(FieldSample::zero(), |f| f.eval(&brinkman, x));
            let outer = data
                .exterior_force
                .as_ref()
                .map_or(FieldSample::zero(), |f| f.eval(&stokes, x));
            let p = &coupling[a];
            let h = data.velocity_jump[a] - inner.velocity + outer.velocity + params.u_inf;
            let g = data.traction_jump[a] - inner.traction(n) + outer.traction(n) * params.mu
                - p * (inner.velocity + outer.velocity) * 0.5
                - p * params.u_inf * 0.5;
            (h, g)
        })
        .collect();
    Ok(rows.into_iter().unzip())
}

/// Boundary operators for both kernel families on one mesh.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    pub brinkman: OperatorSet,
    pub stokes: OperatorSet,
}

impl OperatorPair {
    pub fn assemble(
        mesh: &SurfaceMesh,
        alpha: f64,
        opts: &QuadratureOptions,
    ) -> Result<Self, TransmissionError> {
        let brinkman = OperatorSet::assemble(mesh, &Kernel::brinkman(alpha)?, opts);
        let stokes = OperatorSet::assemble_with_donor(mesh, &Kernel::stokes(), opts, &brinkman);
        Ok(Self { brinkman, stokes })
    }
}

/// The `6N × 6N` block matrix of the transmission system.
pub fn assemble_system(params: &ProblemParams, ops: &OperatorPair) -> DenseMatrix {
    let b = &ops.brinkman;
    let s = &ops.stokes;
    let n3 = b.single_layer.matrix.nrows();
    let coupling = params.coupling.blocks(n3 / 3);
    let half_p = |m: DenseMatrix| m.left_block_diagonal(&coupling).scaled(0.5);
    let id = DenseMatrix::identity(n3);

    let top_left = b.double_layer.matrix.add_scaled(&s.double_layer.matrix, -1.0).add_scaled(&id, -1.0);
    let top_right = b.single_layer.matrix.add_scaled(&s.single_layer.matrix, -1.0);
    let bottom_left = b
        .hypersingular
        .matrix
        .add_scaled(&s.hypersingular.matrix, -params.mu)
        .add_scaled(&half_p(b.double_layer.matrix.add_scaled(&s.double_layer.matrix, 1.0)), 1.0);
    let bottom_right = b
        .adjoint_double_layer
        .matrix
        .add_scaled(&s.adjoint_double_layer.matrix, -params.mu)
        .add_scaled(&id, 0.5 * (1.0 + params.mu))
        .add_scaled(&half_p(b.single_layer.matrix.add_scaled(&s.single_layer.matrix, 1.0)), 1.0);

    let mut m = DenseMatrix::zeros(2 * n3, 2 * n3);
    m.insert(0, 0, &top_left);
    m.insert(0, n3, &top_right);
    m.insert(n3, 0, &bottom_left);
    m.insert(n3, n3, &bottom_right);
    m
}

/// Assembled and factorised transmission system, reusable across right-hand sides.
pub struct TransmissionSolver {
    mesh: Arc<SurfaceMesh>,
    params: ProblemParams,
    opts: QuadratureOptions,
    matrix: DenseMatrix,
    lu: LuFactor,
}

impl TransmissionSolver {
    pub fn new(
        mesh: Arc<SurfaceMesh>,
        params: ProblemParams,
        opts: QuadratureOptions,
    ) -> Result<Self, TransmissionError> {
        params.validate(mesh.len())?;
        let ops = OperatorPair::assemble(&mesh, params.alpha, &opts)?;
        Ok(Self::from_operators(mesh, params, opts, &ops))
    }

    /// Builds the solver from operators assembled earlier for the same mesh and `α`.
    pub fn from_operators(
        mesh: Arc<SurfaceMesh>,
        params: ProblemParams,
        opts: QuadratureOptions,
        ops: &OperatorPair,
    ) -> Self {
        let matrix = assemble_system(&params, ops);
        let lu = LuFactor::new(&matrix);
        Self {
            mesh,
            params,
            opts,
            matrix,
            lu,
        }
    }

    pub fn mesh(&self) -> &Arc<SurfaceMesh> {
        &self.mesh
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// Solves the block system for a stacked right-hand side `[h₀₀; g₀₀]`.
    pub fn solve_system(&self, rhs: &[f64]) -> Result<Vec<f64>, TransmissionError> {
        let norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        let x = self.lu.solve(rhs);
        let ax = self.matrix.matvec(&x);
        let residual = ax
            .iter()
            .zip(rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / norm;
        if !residual.is_finite() || residual > 1e-10 {
            return Err(TransmissionError::Singular { residual });
        }
        Ok(x)
    }

    /// Solves the transmission problem and returns the reconstructed flow.
    pub fn solve(&self, data: &TransmissionData) -> Result<FlowState, TransmissionError> {
        let (h, g) = build_rhs(&self.mesh, &self.params, data)?;
        let mut rhs = flatten(&h);
        rhs.extend(flatten(&g));
        let x = self.solve_system(&rhs)?;
        Ok(FlowState {
            mesh: Arc::clone(&self.mesh),
            params: self.params.clone(),
            opts: self.opts,
            densities: BoundaryDensityPair::from_flat(&x),
            interior_force: data.interior_force.clone(),
            exterior_force: data.exterior_force.clone(),
        })
    }
}

/// Solved densities plus everything needed to evaluate the flow anywhere.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub mesh: Arc<SurfaceMesh>,
    pub params: ProblemParams,
    pub opts: QuadratureOptions,
    pub densities: BoundaryDensityPair,
    pub interior_force: Option<Forcing>,
    pub exterior_force: Option<Forcing>,
}

impl FlowState {
    /// The flow for zero densities and no forcing: rest inside, `u∞` outside.
    pub fn at_rest(mesh: Arc<SurfaceMesh>, params: ProblemParams) -> Self {
        let n = mesh.len();
        Self {
            mesh,
            params,
            opts: QuadratureOptions::default(),
            densities: BoundaryDensityPair::zeros(n),
            interior_force: None,
            exterior_force: None,
        }
    }

    /// Field on a given side, by that side's representation. Points on the
    /// other side give the analytic continuation of the representation.
    pub fn evaluate_in(&self, domain: Domain, x: &Vec3) -> FieldSample {
        let (kernel, force) = match domain {
            Domain::Interior => (
                Kernel::brinkman(self.params.alpha).expect("validated alpha"),
                &self.interior_force,
            ),
            Domain::Exterior => (Kernel::stokes(), &self.exterior_force),
        };
        let mut s = double_layer_eval(&self.mesh, &kernel, &self.densities.double_layer, x, &self.opts)
            + single_layer_eval(&self.mesh, &kernel, &self.densities.single_layer, x, &self.opts);
        if let Some(f) = force {
            s += f.eval(&kernel, x);
        }
        if domain == Domain::Exterior {
            s.velocity += self.params.u_inf;
        }
        s
    }

    pub fn evaluate(&self, x: &Vec3) -> (Domain, FieldSample) {
        let domain = self.mesh.locate(x);
        (domain, self.evaluate_in(domain, x))
    }

    pub fn evaluate_many(&self, points: &[Vec3]) -> Vec<(Domain, FieldSample)> {
        points.par_iter().map(|x| self.evaluate(x)).collect()
    }

    /// Interior velocity and gradient at the cells of `grid`.
    pub fn interior_samples(&self, grid: &VolumeGrid) -> Vec<FieldSample> {
        grid.points
            .par_iter()
            .map(|x| self.evaluate_in(Domain::Interior, x))
            .collect()
    }

    pub fn density_norm(&self) -> f64 {
        self.densities.to_flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A point force: velocity `𝒢(x − pole) F`, pressure `Π(x − pole)·F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointForce {
    pub pole: Vec3,
    pub force: Vec3,
}

impl PointForce {
    pub fn eval(&self, kernel: &Kernel, x: &Vec3) -> FieldSample {
        let d = x - self.pole;
        let (g, dg) = kernel.velocity_with_gradient(&d);
        FieldSample {
            velocity: g * self.force,
            gradient: Mat3::from_fn(|k, m| (dg[m] * self.force)[k]),
            pressure: kernel.pressure(&d).dot(&self.force),
        }
    }

    /// Traction `(stress of the point force)·n`.
    pub fn traction(&self, kernel: &Kernel, x: &Vec3, n: &Vec3) -> Vec3 {
        kernel.stress_contract(&(x - self.pole), n) * self.force
    }
}

/// Exact transmission solution built from point forces: a Brinkman force with
/// its pole outside the surface defines `u₊`, a Stokes force with its pole
/// inside defines `u₋`. Both solve the homogeneous equations on their side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub interior: PointForce,
    pub exterior: PointForce,
}

impl ManufacturedSolution {
    pub fn eval(&self, alpha: f64, domain: Domain, x: &Vec3) -> Result<FieldSample, KernelError> {
        Ok(match domain {
            Domain::Interior => self.interior.eval(&Kernel::brinkman(alpha)?, x),
            Domain::Exterior => self.exterior.eval(&Kernel::stokes(), x),
        })
    }

    /// Boundary data `(h₀, g₀)` reproducing this solution with no body force and `u∞ = 0`.
    pub fn data(
        &self,
        mesh: &SurfaceMesh,
        params: &ProblemParams,
    ) -> Result<TransmissionData, TransmissionError> {
        let brinkman = Kernel::brinkman(params.alpha)?;
        let stokes = Kernel::stokes();
        let coupling = params.coupling.blocks(mesh.len());
        let (h, g) = mesh
            .panels()
            .iter()
            .zip(&coupling)
            .map(|(panel, p)| {
                let x = &panel.centroid;
                let n = &panel.normal;
                let up = self.interior.eval(&brinkman, x).velocity;
                let um = self.exterior.eval(&stokes, x).velocity;
                let tp = self.interior.traction(&brinkman, x, n);
                let tm = self.exterior.traction(&stokes, x, n);
                (up - um, tp - tm * params.mu + p * (up + um) * 0.5)
            })
            .unzip();
        Ok(TransmissionData {
            interior_force: None,
            exterior_force: None,
            velocity_jump: h,
            traction_jump: g,
        })
    }
}

/// Stacks per-panel vectors `[a; b]` into one flat vector.
pub fn stack(a: &[Vec3], b: &[Vec3]) -> Vec<f64> {
    let mut out = flatten(a);
    out.extend(flatten(b));
    out
}

/// Inverse of [`stack`].
pub fn unstack(x: &[f64]) -> (Vec<Vec3>, Vec<Vec3>) {
    let (a, b) = x.split_at(x.len() / 2);
    (unflatten(a), unflatten(b))
}
