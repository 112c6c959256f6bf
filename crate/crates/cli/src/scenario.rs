//! Scenario files: TOML description of a run, with defaults and validation.

use std::path::{Path, PathBuf};

use brinkman_bem::kernels::Mat3;
use brinkman_bem::quadrature::QuadratureOptions;
use brinkman_bem::transmission::{check_positivity, TransmissionError};
use serde::{Deserialize, Serialize};

use crate::fields::FieldSpec;

/// A configuration error tied to the key that caused it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ValidationError {
    /// Dotted key path such as `params.alpha`.
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Linear,
    Nonlinear,
    VerifyJumps,
    VerifyGreen,
    VerifyDecay,
    VerifyRepresentation,
    Manufactured,
}

impl Mode {
    /// The name used in scenario files.
    pub fn name(self) -> &'static str {
        match self {
            Mode::Linear => "linear",
            Mode::Nonlinear => "nonlinear",
            Mode::VerifyJumps => "verify-jumps",
            Mode::VerifyGreen => "verify-green",
            Mode::VerifyDecay => "verify-decay",
            Mode::VerifyRepresentation => "verify-representation",
            Mode::Manufactured => "manufactured",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub params: ParamsSpec,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub evaluation: EvaluationSpec,
    #[serde(default)]
    pub nonlinear: NonlinearSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

fn one() -> f64 {
    1.0
}

fn two() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeshSpec {
    /// Subdivided icosahedron projected onto a sphere.
    Sphere {
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "two")]
        level: u32,
        #[serde(default)]
        center: [f64; 3],
    },
    Cube {
        #[serde(default = "one")]
        edge: f64,
        /// Subdivisions per edge.
        #[serde(default = "two")]
        divisions: u32,
        #[serde(default)]
        center: [f64; 3],
    },
    /// An OFF or OBJ file.
    File { path: PathBuf },
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec::Sphere {
            radius: 1.0,
            level: 2,
            center: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub mu: f64,
    /// Forchheimer coefficient of `|v|v`.
    #[serde(default)]
    pub k: f64,
    /// Coefficient of the convective term `(∇v)v`.
    #[serde(default)]
    pub beta: f64,
    /// Constant interface matrix, row by row.
    #[serde(default)]
    pub coupling: [[f64; 3]; 3],
    /// Per-panel interface matrices: a CSV file with one header line and nine
    /// row-major entries per panel. Overrides `coupling`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_file: Option<PathBuf>,
    #[serde(default)]
    pub u_inf: [f64; 3],
}

impl Default for ParamsSpec {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            mu: 1.0,
            k: 0.0,
            beta: 0.0,
            coupling: [[0.0; 3]; 3],
            coupling_file: None,
            u_inf: [0.0; 3],
        }
    }
}

impl ParamsSpec {
    pub fn coupling_matrix(&self) -> Mat3 {
        Mat3::from_fn(|i, j| self.coupling[i][j])
    }
}

/// Prescribed data. Absent entries are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    /// Velocity jump `h`, sampled at panel centroids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_jump: Option<FieldSpec>,
    /// Traction jump `g`, sampled at panel centroids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traction_jump: Option<FieldSpec>,
    /// Body force inside, sampled on the interior grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interior_force: Option<FieldSpec>,
    /// Body force outside, sampled on the exterior grid and zero beyond it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exterior_force: Option<FieldSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Lattice spacing; a quarter of the mesh radius when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    /// Subdivision levels of cells cut by the surface.
    #[serde(default)]
    pub refine: u32,
    /// Outer radius of the exterior grid; twice the mesh radius when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exterior_radius: Option<f64>,
}

/// Where fields are reported: explicit points plus an optional lattice.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSpec {
    #[serde(default)]
    pub points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub counts: [u32; 3],
}

impl LatticeSpec {
    pub fn points(&self) -> Vec<[f64; 3]> {
        let axis = |d: usize| -> Vec<f64> {
            let n = self.counts[d] as usize;
            (0..n)
                .map(|i| {
                    if n == 1 {
                        0.5 * (self.lower[d] + self.upper[d])
                    } else {
                        self.lower[d] + (self.upper[d] - self.lower[d]) * i as f64 / (n - 1) as f64
                    }
                })
                .collect()
        };
        let (xs, ys, zs) = (axis(0), axis(1), axis(2));
        let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
        for &x in &xs {
            for &y in &ys {
                for &z in &zs {
                    out.push([x, y, z]);
                }
            }
        }
        out
    }
}

fn thirty() -> usize {
    30
}

fn tolerance() -> f64 {
    1e-8
}

fn twenty() -> usize {
    20
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearSpec {
    #[serde(default = "thirty")]
    pub max_iters: usize,
    #[serde(default = "tolerance")]
    pub tol: f64,
    #[serde(default = "one")]
    pub relaxation: f64,
    /// Random probes used for each smallness constant.
    #[serde(default = "twenty")]
    pub probes: usize,
    /// Whether to estimate the smallness constants before iterating.
    #[serde(default = "yes")]
    pub smallness: bool,
}

impl Default for NonlinearSpec {
    fn default() -> Self {
        Self {
            max_iters: 30,
            tol: 1e-8,
            relaxation: 1.0,
            probes: 20,
            smallness: true,
        }
    }
}

fn default_levels() -> Vec<u32> {
    vec![1, 2, 3]
}

fn default_samples() -> usize {
    160
}

fn default_radii() -> Vec<f64> {
    vec![20.0, 40.0, 80.0, 160.0]
}

fn default_directions() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    /// Icosphere levels of refinement studies.
    #[serde(default = "default_levels")]
    pub levels: Vec<u32>,
    /// Panels sampled per level in the jump suite.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Sphere radii of the decay study, in multiples of the mesh radius.
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_directions")]
    pub directions: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            levels: default_levels(),
            samples: default_samples(),
            radii: default_radii(),
            directions: default_directions(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub far_ratio: f64,
    pub near_ratio: f64,
    pub max_depth: u32,
    pub singular_order: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureOptions::default().into()
    }
}

impl From<QuadratureOptions> for QuadratureSpec {
    fn from(q: QuadratureOptions) -> Self {
        Self {
            far_ratio: q.far_ratio,
            near_ratio: q.near_ratio,
            max_depth: q.max_depth,
            singular_order: q.singular_order,
        }
    }
}

impl From<&QuadratureSpec> for QuadratureOptions {
    fn from(q: &QuadratureSpec) -> Self {
        QuadratureOptions {
            far_ratio: q.far_ratio,
            near_ratio: q.near_ratio,
            max_depth: q.max_depth,
            singular_order: q.singular_order,
        }
    }
}

impl Scenario {
    /// Parses TOML text. Errors carry the path of the offending key.
    pub fn parse(text: &str) -> Result<Self, ValidationError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ValidationError::new("<root>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "<root>".to_string() } else { path };
            let inner = e.into_inner();
            ValidationError::new(path, inner.message().trim().to_string())
        })
    }

    /// Reads, parses and validates a scenario file. Relative paths inside
    /// it are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ValidationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ValidationError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
        let mut scenario = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        scenario.resolve_paths(base);
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let MeshSpec::File { path } = &mut self.mesh {
            fix(path);
        }
        if let Some(p) = &mut self.params.coupling_file {
            fix(p);
        }
        for spec in [
            &mut self.data.velocity_jump,
            &mut self.data.traction_jump,
            &mut self.data.interior_force,
            &mut self.data.exterior_force,
        ]
        .into_iter()
        .flatten()
        {
            spec.resolve_paths(base);
        }
    }

    /// Range and consistency checks that the type system does not cover.
    pub fn validate(&self) -> Result<(), ValidationError> {
        match &self.mesh {
            MeshSpec::Sphere { radius, level, center } => {
                positive("mesh.radius", *radius)?;
                if *level > 6 {
                    return Err(ValidationError::new("mesh.level", format!("at most 6, got {level}")));
                }
                finite_vec("mesh.center", center)?;
            }
            MeshSpec::Cube { edge, divisions, center } => {
                positive("mesh.edge", *edge)?;
                if *divisions == 0 || *divisions > 32 {
                    return Err(ValidationError::new(
                        "mesh.divisions",
                        format!("must lie in 1..=32, got {divisions}"),
                    ));
                }
                finite_vec("mesh.center", center)?;
            }
            MeshSpec::File { .. } => {}
        }
        let p = &self.params;
        positive("params.alpha", p.alpha)?;
        positive("params.mu", p.mu)?;
        finite("params.k", p.k)?;
        finite("params.beta", p.beta)?;
        finite_vec("params.u_inf", &p.u_inf)?;
        for (i, row) in p.coupling.iter().enumerate() {
            finite_vec(&format!("params.coupling[{i}]"), row)?;
        }
        check_positivity(&p.coupling_matrix(), 0).map_err(|e| match e {
            TransmissionError::Positivity { min_eigenvalue, .. } => ValidationError::new(
                "params.coupling",
                format!(
                    "interface matrix violates the positivity condition <Pv, v> >= 0 \
                     (smallest eigenvalue {min_eigenvalue:e})"
                ),
            ),
            other => ValidationError::new("params.coupling", other.to_string()),
        })?;
        for (name, spec) in [
            ("data.velocity_jump", &self.data.velocity_jump),
            ("data.traction_jump", &self.data.traction_jump),
            ("data.interior_force", &self.data.interior_force),
            ("data.exterior_force", &self.data.exterior_force),
        ] {
            if let Some(spec) = spec {
                spec.validate(name)?;
            }
        }
        if let Some(h) = self.grid.spacing {
            positive("grid.spacing", h)?;
        }
        if self.grid.refine > 4 {
            return Err(ValidationError::new(
                "grid.refine",
                format!("at most 4, got {}", self.grid.refine),
            ));
        }
        if let Some(r) = self.grid.exterior_radius {
            positive("grid.exterior_radius", r)?;
        }
        for (i, x) in self.evaluation.points.iter().enumerate() {
            finite_vec(&format!("evaluation.points[{i}]"), x)?;
        }
        if let Some(l) = &self.evaluation.lattice {
            finite_vec("evaluation.lattice.lower", &l.lower)?;
            finite_vec("evaluation.lattice.upper", &l.upper)?;
            if l.counts.iter().map(|&c| c as u64).product::<u64>() > 1_000_000 {
                return Err(ValidationError::new(
                    "evaluation.lattice.counts",
                    "more than a million points",
                ));
            }
        }
        let n = &self.nonlinear;
        if n.max_iters == 0 {
            return Err(ValidationError::new("nonlinear.max_iters", "must be at least 1"));
        }
        positive("nonlinear.tol", n.tol)?;
        if !(n.relaxation > 0.0 && n.relaxation <= 1.0) {
            return Err(ValidationError::new(
                "nonlinear.relaxation",
                format!("must lie in (0, 1], got {}", n.relaxation),
            ));
        }
        if n.probes == 0 {
            return Err(ValidationError::new("nonlinear.probes", "must be at least 1"));
        }
        let v = &self.verify;
        let needs_levels = matches!(
            self.mode,
            Mode::VerifyJumps | Mode::VerifyRepresentation | Mode::Manufactured
        );
        if needs_levels && v.levels.len() < 2 {
            return Err(ValidationError::new(
                "verify.levels",
                "a refinement study needs at least two levels",
            ));
        }
        if let Some(l) = v.levels.iter().find(|&&l| l > 5) {
            return Err(ValidationError::new("verify.levels", format!("at most 5, got {l}")));
        }
        if v.samples == 0 {
            return Err(ValidationError::new("verify.samples", "must be at least 1"));
        }
        if self.mode == Mode::VerifyDecay && v.radii.len() < 2 {
            return Err(ValidationError::new("verify.radii", "the decay fit needs at least two radii"));
        }
        for (i, r) in v.radii.iter().enumerate() {
            if !(r.is_finite() && *r > 1.0) {
                return Err(ValidationError::new(
                    format!("verify.radii[{i}]"),
                    format!("must exceed 1 mesh radius, got {r}"),
                ));
            }
        }
        if v.directions < 4 {
            return Err(ValidationError::new("verify.directions", "must be at least 4"));
        }
        let q = &self.quadrature;
        positive("quadrature.far_ratio", q.far_ratio)?;
        positive("quadrature.near_ratio", q.near_ratio)?;
        if q.singular_order == 0 {
            return Err(ValidationError::new("quadrature.singular_order", "must be at least 1"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }
}

fn finite(path: &str, v: f64) -> Result<(), ValidationError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ValidationError::new(path, format!("must be finite, got {v}")))
    }
}

fn positive(path: &str, v: f64) -> Result<(), ValidationError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ValidationError::new(path, format!("must be positive and finite, got {v}")))
    }
}

fn finite_vec(path: &str, v: &[f64; 3]) -> Result<(), ValidationError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(ValidationError::new(path, format!("entries must be finite, got {v:?}")))
    }
}
