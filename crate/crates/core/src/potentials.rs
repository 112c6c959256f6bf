//! Layer and volume potentials with piecewise-constant densities, and the
//! collocation matrices of the boundary operators `V`, `K`, `K*` and `D`.
//!
//! Densities are stored per panel. A panel-constant density on `N` panels maps
//! to a vector of length `3N` with components of panel `a` at `3a..3a+3`.
//! Traces are one-sided limits at panel centroids; the "interior" side is the
//! region enclosed by the surface, reached against the outward normal.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Sub};

use rayon::prelude::*;

use crate::dense::{DenseMatrix, LuFactor};
use crate::geometry::{Panel, SurfaceMesh, VolumeGrid};
use crate::kernels::{Kernel, Mat3, Vec3};
use crate::quadrature::{integrate_adaptive, integrate_singular, Node, QuadratureOptions};

/// Velocity, velocity gradient and pressure at a point.
///
/// `gradient[(k, m)] = ∂ₘ u_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub velocity: Vec3,
    pub gradient: Mat3,
    pub pressure: f64,
}

impl Default for FieldSample {
    fn default() -> Self {
        Self::zero()
    }
}

impl FieldSample {
    pub fn zero() -> Self {
        Self {
            velocity: Vec3::zeros(),
            gradient: Mat3::zeros(),
            pressure: 0.0,
        }
    }

    /// Traction `(−πI + ∇u + ∇uᵀ) n`.
    pub fn traction(&self, n: &Vec3) -> Vec3 {
        (self.gradient + self.gradient.transpose()) * n - n * self.pressure
    }

    pub fn divergence(&self) -> f64 {
        self.gradient.trace()
    }

    pub fn is_finite(&self) -> bool {
        self.velocity.iter().all(|v| v.is_finite())
            && self.gradient.iter().all(|v| v.is_finite())
            && self.pressure.is_finite()
    }
}

impl Add for FieldSample {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            velocity: self.velocity + o.velocity,
            gradient: self.gradient + o.gradient,
            pressure: self.pressure + o.pressure,
        }
    }
}

impl Sub for FieldSample {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o * -1.0
    }
}

impl AddAssign for FieldSample {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Mul<f64> for FieldSample {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self {
            velocity: self.velocity * s,
            gradient: self.gradient * s,
            pressure: self.pressure * s,
        }
    }
}

/// Double layer density `Φ` and single layer density `φ`, one vector per panel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryDensityPair {
    pub double_layer: Vec<Vec3>,
    pub single_layer: Vec<Vec3>,
}

impl BoundaryDensityPair {
    pub fn zeros(n: usize) -> Self {
        Self {
            double_layer: vec![Vec3::zeros(); n],
            single_layer: vec![Vec3::zeros(); n],
        }
    }

    /// Splits a `6N` solution vector `[Φ; φ]`.
    pub fn from_flat(x: &[f64]) -> Self {
        let n = x.len() / 6;
        let (d, s) = x.split_at(3 * n);
        Self {
            double_layer: unflatten(d),
            single_layer: unflatten(s),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = flatten(&self.double_layer);
        out.extend(flatten(&self.single_layer));
        out
    }

    pub fn len(&self) -> usize {
        self.double_layer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.double_layer.is_empty()
    }
}

pub fn flatten(v: &[Vec3]) -> Vec<f64> {
    v.iter().flat_map(|x| [x.x, x.y, x.z]).collect()
}

pub fn unflatten(v: &[f64]) -> Vec<Vec3> {
    v.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

/// Which boundary operator to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    /// `V`, the direct value of the single layer.
    SingleLayer,
    /// `K`, the direct value of the double layer.
    DoubleLayer,
    /// `K*`, the direct value of the single layer traction.
    AdjointDoubleLayer,
    /// `D`, the traction of the double layer.
    Hypersingular,
}

impl OperatorKind {
    pub fn tag(self) -> &'static str {
        match self {
            OperatorKind::SingleLayer => "V",
            OperatorKind::DoubleLayer => "K",
            OperatorKind::AdjointDoubleLayer => "Kstar",
            OperatorKind::Hypersingular => "D",
        }
    }
}

/// An assembled `3N × 3N` collocation matrix.
#[derive(Debug, Clone)]
pub struct BoundaryOperator {
    pub kind: OperatorKind,
    pub alpha: f64,
    pub matrix: DenseMatrix,
}

impl BoundaryOperator {
    pub fn apply(&self, density: &[Vec3]) -> Vec<Vec3> {
        unflatten(&self.matrix.matvec(&flatten(density)))
    }

    /// Writes the matrix in the documented binary layout: row count, column
    /// count (both u64), a 16-byte ASCII tag such as `Kstar/brinkman`, then
    /// row-major f64 entries, all little-endian.
    pub fn write_binary(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        let family = if self.alpha == 0.0 { "stokes" } else { "brinkman" };
        self.matrix
            .write_binary(w, &format!("{}/{}", self.kind.tag(), family))
    }
}

/// Offset distances used to approximate one-sided traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// Offset as a fraction of the local panel diameter.
    pub offset_fraction: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            offset_fraction: 0.1,
        }
    }
}

/// One-sided limits `(interior, exterior)` of a field at `x` on a surface
/// with outward normal `n`, from samples at offsets `ε` and `2ε` on each side
/// combined as `2f(ε) − f(2ε)`.
pub fn offset_traces(
    x: &Vec3,
    n: &Vec3,
    eps: f64,
    eval: impl Fn(&Vec3) -> FieldSample,
) -> (FieldSample, FieldSample) {
    let side = |s: f64| eval(&(x + n * (s * eps))) * 2.0 - eval(&(x + n * (2.0 * s * eps)));
    (side(-1.0), side(1.0))
}

/// True when `x` is within one mean panel diameter of the surface, where
/// off-surface evaluations lose accuracy.
pub fn near_surface(mesh: &SurfaceMesh, x: &Vec3) -> bool {
    mesh.distance(x) < mesh.mean_diameter()
}

fn each_node(panel: &Panel, x: &Vec3, opts: &QuadratureOptions, f: impl FnMut(Node)) {
    integrate_adaptive(&panel.vertices, x, opts, f);
}

fn contract_gradient(grad: &[Mat3; 3], v: &Vec3) -> Mat3 {
    Mat3::from_fn(|k, m| (grad[m] * v)[k])
}

/// Single layer velocity, gradient and pressure at an off-surface point.
pub fn single_layer_eval(
    mesh: &SurfaceMesh,
    kernel: &Kernel,
    density: &[Vec3],
    x: &Vec3,
    opts: &QuadratureOptions,
) -> FieldSample {
    let mut out = FieldSample::zero();
    for (panel, g) in mesh.panels().iter().zip(density) {
        if *g == Vec3::zeros() {
            continue;
        }
        each_node(panel, x, opts, |node| {
            let r = x - node.point;
            let (v, grad) = kernel.velocity_with_gradient(&r);
            out.velocity += v * g * node.weight;
            out.gradient += contract_gradient(&grad, g) * node.weight;
            out.pressure += kernel.pressure(&r).dot(g) * node.weight;
        });
    }
    out
}

/// Double layer velocity, gradient and pressure at an off-surface point.
pub fn double_layer_eval(
    mesh: &SurfaceMesh,
    kernel: &Kernel,
    density: &[Vec3],
    x: &Vec3,
    opts: &QuadratureOptions,
) -> FieldSample {
    let mut out = FieldSample::zero();
    for (panel, h) in mesh.panels().iter().zip(density) {
        if *h == Vec3::zeros() {
            continue;
        }
        each_node(panel, x, opts, |node| {
            add_double_layer_node(kernel, &panel.normal, x, &node.point, h, node.weight, &mut out);
        });
    }
    out
}

/// Double layer of a continuous, piecewise-linear density given at the vertices.
pub fn double_layer_eval_vertex(
    mesh: &SurfaceMesh,
    kernel: &Kernel,
    vertex_density: &[Vec3],
    x: &Vec3,
    opts: &QuadratureOptions,
) -> FieldSample {
    let mut out = FieldSample::zero();
    for (panel, tri) in mesh.panels().iter().zip(mesh.triangles()) {
        let hv = tri.map(|v| vertex_density[v]);
        each_node(panel, x, opts, |node| {
            let h = hv[0] * node.bary[0] + hv[1] * node.bary[1] + hv[2] * node.bary[2];
            add_double_layer_node(kernel, &panel.normal, x, &node.point, &h, node.weight, &mut out);
        });
    }
    out
}

fn add_double_layer_node(
    kernel: &Kernel,
    normal: &Vec3,
    x: &Vec3,
    y: &Vec3,
    h: &Vec3,
    weight: f64,
    out: &mut FieldSample,
) {
    let r = x - y;
    out.velocity += kernel.double_layer_velocity(&r, normal) * h * weight;
    out.gradient += contract_gradient(&kernel.double_layer_velocity_gradient(&r, normal), h) * weight;
    out.pressure += kernel.double_layer_pressure(&r, normal).dot(h) * weight;
}

/// Vertex values of a panel-constant density by area-weighted averaging.
pub fn vertex_density(mesh: &SurfaceMesh, density: &[Vec3]) -> Vec<Vec3> {
    mesh.vertex_averaging()
        .iter()
        .map(|adj| adj.iter().map(|&(p, w)| density[p] * w).sum())
        .collect()
}

/// Assembles row strips in parallel: `fill(a, strip)` writes the three rows
/// of panel `a`, each `ncols` wide, into `strip`.
fn assemble_rows(n: usize, ncols: usize, fill: impl Fn(usize, &mut [f64]) + Sync) -> DenseMatrix {
    let mut data = vec![0.0; 3 * n * ncols];
    data.par_chunks_mut(3 * ncols)
        .enumerate()
        .for_each(|(a, strip)| fill(a, strip));
    DenseMatrix::from_row_major(3 * n, 3 * n, data)
}

fn put_block(strip: &mut [f64], ncols: usize, b: usize, m: &Mat3) {
    for i in 0..3 {
        for j in 0..3 {
            strip[i * ncols + 3 * b + j] += m[(i, j)];
        }
    }
}

/// Integrates `kernel_fn(c_a − y, source panel, target panel)` over every
/// panel, using the polar rule on the panel containing the collocation point.
fn assemble_weakly_singular(
    mesh: &SurfaceMesh,
    opts: &QuadratureOptions,
    kernel_fn: impl Fn(&Vec3, &Panel, &Panel) -> Mat3 + Sync,
) -> DenseMatrix {
    let panels = mesh.panels();
    let n = panels.len();
    assemble_rows(n, 3 * n, |a, strip| {
        let pa = &panels[a];
        let x = pa.centroid;
        for (b, pb) in panels.iter().enumerate() {
            let mut block = Mat3::zeros();
            let acc = |node: Node| block += kernel_fn(&(x - node.point), pb, pa) * node.weight;
            if a == b {
                integrate_singular(&pb.vertices, [1.0 / 3.0; 3], opts.singular_order, acc);
            } else {
                each_node(pb, &x, opts, acc);
            }
            put_block(strip, 3 * n, b, &block);
        }
    })
}

/// Area-weighted transpose: `K*[a, b] = (|b| / |a|) K[b, a]ᵀ`.
pub fn weighted_transpose(mesh: &SurfaceMesh, k: &DenseMatrix) -> DenseMatrix {
    let panels = mesh.panels();
    let n = panels.len();
    let mut out = DenseMatrix::zeros(3 * n, 3 * n);
    for a in 0..n {
        for b in 0..n {
            let s = panels[b].area / panels[a].area;
            for i in 0..3 {
                for j in 0..3 {
                    out.set(3 * a + i, 3 * b + j, s * k.get(3 * b + j, 3 * a + i));
                }
            }
        }
    }
    out
}

/// Hypersingular operator from offset traces. The panel-constant density is
/// mapped to a continuous piecewise-linear one by vertex averaging; the
/// traction of its double layer is extrapolated to the centroid from both
/// sides and the two one-sided values are averaged.
///
/// Only first-order accurate with a large constant on curved surfaces; kept as
/// an independent cross-check of [`assemble_boundary_operator`].
pub fn hypersingular_by_offsets(
    mesh: &SurfaceMesh,
    kernel: &Kernel,
    opts: &QuadratureOptions,
    trace: &TraceOptions,
) -> DenseMatrix {
    let panels = mesh.panels();
    let triangles = mesh.triangles();
    let n = panels.len();
    let nv = mesh.vertices().len();
    let averaging = mesh.vertex_averaging();
    assemble_rows(n, 3 * n, |a, strip| {
        let pa = &panels[a];
        let eps = trace.offset_fraction * pa.diameter;
        let mut per_vertex = vec![Mat3::zeros(); nv];
        for (offset, w) in [(eps, 1.0), (2.0 * eps, -0.5), (-eps, 1.0), (-2.0 * eps, -0.5)] {
            let x = pa.centroid + pa.normal * offset;
            for (pb, tri) in panels.iter().zip(triangles) {
                each_node(pb, &x, opts, |node| {
                    let t = kernel.double_layer_traction(&(x - node.point), &pb.normal, &pa.normal)
                        * (w * node.weight);
                    for i in 0..3 {
                        per_vertex[tri[i]] += t * node.bary[i];
                    }
                });
            }
        }
        for (v, adj) in averaging.iter().enumerate() {
            for &(b, weight) in adj {
                put_block(strip, 3 * n, b, &(per_vertex[v] * weight));
            }
        }
    })
}

/// `D_a − D_b` for two kernels. The difference of the double layer traction
/// kernels is only weakly singular, so it is collocated directly.
pub fn hypersingular_difference(
    mesh: &SurfaceMesh,
    a: &Kernel,
    b: &Kernel,
    opts: &QuadratureOptions,
) -> DenseMatrix {
    assemble_weakly_singular(mesh, opts, |r, src, tgt| {
        a.double_layer_traction(r, &src.normal, &tgt.normal)
            - b.double_layer_traction(r, &src.normal, &tgt.normal)
    })
}

/// `D = (K* − ½I) V⁻¹ (½I + K)` for a Brinkman kernel, from the interior
/// Calderón relations `(½I + K)γu = V t` and `Dγu = (K* − ½I) t`.
fn calderon_hypersingular(
    single_layer: &DenseMatrix,
    double_layer: &DenseMatrix,
    adjoint_double_layer: &DenseMatrix,
) -> DenseMatrix {
    let id = DenseMatrix::identity(single_layer.nrows());
    let dirichlet = double_layer.add_scaled(&id, 0.5);
    let neumann = LuFactor::new(single_layer).solve_matrix(&dirichlet);
    adjoint_double_layer.add_scaled(&id, -0.5).matmul(&neumann)
}

/// Smallest resistance used on the Calderón route: `1/R²` with `R` the
/// mesh radius. Below it `V` approaches the Stokes single layer, which is
/// singular on closed surfaces.
pub fn reference_alpha(mesh: &SurfaceMesh) -> f64 {
    1.0 / mesh.radius().powi(2)
}

/// Assembles one boundary operator for `kernel`.
///
/// `V` and `K` integrate the kernel over each panel against collocation at
/// centroids, with the polar rule on the self panel. `K*` is the area-weighted
/// transpose of `K`, so that `M·K* = (M·K)ᵀ` with `M` the diagonal of panel
/// areas. `D` is built from `V`, `K` and `K*` of a Brinkman kernel with
/// resistance `β = max(α, reference_alpha)` by the Calderón relation, then
/// shifted by the weakly singular difference `D_β − D_α`.
pub fn assemble_boundary_operator(
    mesh: &SurfaceMesh,
    kernel: &Kernel,
    kind: OperatorKind,
    opts: &QuadratureOptions,
) -> BoundaryOperator {
    let matrix = match kind {
        OperatorKind::SingleLayer => single_layer_matrix(mesh, kernel, opts),
        OperatorKind::DoubleLayer => double_layer_matrix(mesh, kernel, opts),
        OperatorKind::AdjointDoubleLayer => {
            weighted_transpose(mesh, &double_layer_matrix(mesh, kernel, opts))
        }
        OperatorKind::Hypersingular => OperatorSet::assemble(mesh, kernel, opts).hypersingular.matrix,
    };
    BoundaryOperator {
        kind,
        alpha: kernel.alpha(),
        matrix,
    }
}

fn single_layer_matrix(mesh: &SurfaceMesh, kernel: &Kernel, opts: &QuadratureOptions) -> DenseMatrix {
    assemble_weakly_singular(mesh, opts, |r, _, _| kernel.velocity(r))
}

fn double_layer_matrix(mesh: &SurfaceMesh, kernel: &Kernel, opts: &QuadratureOptions) -> DenseMatrix {
    assemble_weakly_singular(mesh, opts, |r, src, _| kernel.double_layer_velocity(r, &src.normal))
}

/// The four operators for one kernel.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub single_layer: BoundaryOperator,
    pub double_layer: BoundaryOperator,
    pub adjoint_double_layer: BoundaryOperator,
    pub hypersingular: BoundaryOperator,
}

impl OperatorSet {
    pub fn assemble(mesh: &SurfaceMesh, kernel: &Kernel, opts: &QuadratureOptions) -> Self {
        let beta = reference_alpha(mesh);
        if kernel.alpha() >= beta {
            let v = single_layer_matrix(mesh, kernel, opts);
            let k = double_layer_matrix(mesh, kernel, opts);
            let kstar = weighted_transpose(mesh, &k);
            let d = calderon_hypersingular(&v, &k, &kstar);
            Self::from_matrices(kernel.alpha(), v, k, kstar, d)
        } else {
            let donor = Kernel::brinkman(beta).expect("positive reference resistance");
            let donor_set = Self::assemble(mesh, &donor, opts);
            Self::assemble_with_donor(mesh, kernel, opts, &donor_set)
        }
    }

    /// Assembles the set for `kernel`, deriving `D` from the hypersingular
    /// operator of an already assembled set.
    pub fn assemble_with_donor(
        mesh: &SurfaceMesh,
        kernel: &Kernel,
        opts: &QuadratureOptions,
        donor: &OperatorSet,
    ) -> Self {
        let donor_kernel = if donor.hypersingular.alpha == 0.0 {
            Kernel::stokes()
        } else {
            Kernel::brinkman(donor.hypersingular.alpha).expect("validated donor resistance")
        };
        let v = single_layer_matrix(mesh, kernel, opts);
        let k = double_layer_matrix(mesh, kernel, opts);
        let kstar = weighted_transpose(mesh, &k);
        let d = donor
            .hypersingular
            .matrix
            .add_scaled(&hypersingular_difference(mesh, &donor_kernel, kernel, opts), -1.0);
        Self::from_matrices(kernel.alpha(), v, k, kstar, d)
    }

    fn from_matrices(
        alpha: f64,
        v: DenseMatrix,
        k: DenseMatrix,
        kstar: DenseMatrix,
        d: DenseMatrix,
    ) -> Self {
        let op = |kind, matrix| BoundaryOperator {
            kind,
            alpha,
            matrix,
        };
        Self {
            single_layer: op(OperatorKind::SingleLayer, v),
            double_layer: op(OperatorKind::DoubleLayer, k),
            adjoint_double_layer: op(OperatorKind::AdjointDoubleLayer, kstar),
            hypersingular: op(OperatorKind::Hypersingular, d),
        }
    }
}

/// Radius of the ball with the volume of a cell of weight `w`.
fn ball_radius(w: f64) -> f64 {
    (3.0 * w / (4.0 * PI)).cbrt()
}

/// Stokes velocity kernel averaged over a ball of volume `w` centred at the
/// origin, times `w`, evaluated at offset `d`, with gradient and the matching
/// pressure vector and its gradient.
fn stokes_ball(d: &Vec3, w: f64) -> (Mat3, [Mat3; 3], Vec3, Mat3) {
    let radius = ball_radius(w);
    let rho = d.norm();
    let dd = d * d.transpose();
    if rho >= radius {
        let stokes = Kernel::stokes();
        let (g, dg) = stokes.velocity_with_gradient(d);
        let c = w * radius * radius / (40.0 * PI);
        let inv3 = 1.0 / rho.powi(3);
        let inv5 = inv3 / (rho * rho);
        let inv7 = inv5 / (rho * rho);
        let value = g * w + (Mat3::identity() * inv3 - dd * (3.0 * inv5)) * c;
        let grad = std::array::from_fn(|m| {
            let mut q = Mat3::identity() * (-3.0 * d[m] * inv5) + dd * (15.0 * d[m] * inv7);
            for j in 0..3 {
                q[(j, m)] -= 3.0 * d[j] * inv5;
                q[(m, j)] -= 3.0 * d[j] * inv5;
            }
            dg[m] * w + q * c
        });
        let p = stokes.pressure(d) * w;
        let dp = stokes.pressure_gradient(d) * w;
        (value, grad, p, dp)
    } else {
        let value = Mat3::identity() * (radius * radius / 3.0 - 2.0 * rho * rho / 15.0) + dd / 15.0;
        let grad = std::array::from_fn(|m| {
            let mut q = Mat3::identity() * (-4.0 * d[m] / 15.0);
            for j in 0..3 {
                q[(j, m)] += d[j] / 15.0;
                q[(m, j)] += d[j] / 15.0;
            }
            q
        });
        (value, grad, d / 3.0, Mat3::identity() / 3.0)
    }
}

/// `(𝒢^α − 𝒢)(d)` and its gradient; bounded at the origin.
fn brinkman_remainder(kernel: &Kernel, d: &Vec3) -> (Mat3, [Mat3; 3]) {
    if kernel.is_stokes() {
        return (Mat3::zeros(), [Mat3::zeros(); 3]);
    }
    if d.norm() < 1e-9 {
        return (
            Mat3::identity() * (-kernel.alpha().sqrt() / (6.0 * PI)),
            [Mat3::zeros(); 3],
        );
    }
    let (ga, dga) = kernel.velocity_with_gradient(d);
    let (g0, dg0) = Kernel::stokes().velocity_with_gradient(d);
    (ga - g0, std::array::from_fn(|m| dga[m] - dg0[m]))
}

/// Newtonian velocity and pressure potentials of a cell force density.
///
/// `u(x) = −Σ_c ∫_{B_c} 𝒢^α(x − y) dy f_c` and `π(x) = −Σ_c ∫_{B_c} Π(x − y) dy · f_c`,
/// where `B_c` is the ball of the cell's volume about its centre. The Stokes
/// part of the kernel is integrated over the ball in closed form; the bounded
/// Brinkman remainder uses the cell centre.
pub fn newtonian_eval(grid: &VolumeGrid, kernel: &Kernel, forces: &[Vec3], x: &Vec3) -> FieldSample {
    let mut out = FieldSample::zero();
    for ((y, &w), f) in grid.points.iter().zip(&grid.weights).zip(forces) {
        if *f == Vec3::zeros() {
            continue;
        }
        let d = x - y;
        let (value, grad, p, _) = if !kernel.is_stokes() && d.norm() >= ball_radius(w) {
            let (g, dg) = kernel.velocity_with_gradient(&d);
            let (b0, db0, p, dp) = stokes_ball(&d, w);
            let g0 = Kernel::stokes().velocity_with_gradient(&d);
            (
                b0 + (g - g0.0) * w,
                std::array::from_fn(|m| db0[m] + (dg[m] - g0.1[m]) * w),
                p,
                dp,
            )
        } else {
            let (b0, db0, p, dp) = stokes_ball(&d, w);
            let (r, dr) = brinkman_remainder(kernel, &d);
            (b0 + r * w, std::array::from_fn(|m| db0[m] + dr[m] * w), p, dp)
        };
        out.velocity -= value * f;
        out.gradient -= contract_gradient(&grad, f);
        out.pressure -= p.dot(f);
    }
    out
}

/// [`newtonian_eval`] at many points in parallel.
pub fn newtonian_eval_many(
    grid: &VolumeGrid,
    kernel: &Kernel,
    forces: &[Vec3],
    points: &[Vec3],
) -> Vec<FieldSample> {
    points
        .par_iter()
        .map(|x| newtonian_eval(grid, kernel, forces, x))
        .collect()
}
