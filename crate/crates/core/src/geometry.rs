//! Closed triangulated surfaces and cell-centred volume quadrature grids.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::kernels::Vec3;

/// Errors from mesh construction, mesh files and grid generation.
#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cannot read mesh file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("mesh parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported mesh format '{0}' (expected .off or .obj)")]
    UnsupportedFormat(String),
    #[error("face {face} has {count} vertices; only triangles are supported")]
    NonTriangle { face: usize, count: usize },
    #[error("face {face} references vertex {index}, but the mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        count: usize,
    },
    #[error("triangle {0} is degenerate")]
    Degenerate(usize),
    #[error("non-closed surface: edge ({0}, {1}) is shared by {2} triangle(s)")]
    NonClosed(usize, usize, usize),
    #[error("surface is not orientable")]
    NonOrientable,
    #[error("mesh has no triangles")]
    Empty,
    #[error("grid spacing {spacing} exceeds the bounding box extent {extent}")]
    SpacingTooLarge { spacing: f64, extent: f64 },
    #[error("grid spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
}

/// A flat triangular boundary element.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub vertices: [Vec3; 3],
    pub centroid: Vec3,
    /// Unit normal pointing out of the enclosed region.
    pub normal: Vec3,
    pub area: f64,
    /// Longest edge length.
    pub diameter: f64,
}

impl Panel {
    fn new(vertices: [Vec3; 3]) -> Self {
        let [a, b, c] = vertices;
        let cross = (b - a).cross(&(c - a));
        let twice_area = cross.norm();
        let diameter = (b - a).norm().max((c - b).norm()).max((a - c).norm());
        Self {
            vertices,
            centroid: (a + b + c) / 3.0,
            normal: cross / twice_area,
            area: 0.5 * twice_area,
            diameter,
        }
    }

    /// Point with barycentric coordinates `(l0, l1, 1 − l0 − l1)`.
    pub fn point(&self, l0: f64, l1: f64) -> Vec3 {
        let [a, b, c] = self.vertices;
        a * l0 + b * l1 + c * (1.0 - l0 - l1)
    }
}

/// Which side of the interface a point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    /// The bounded region enclosed by the surface.
    Interior,
    /// The unbounded complement.
    Exterior,
}

impl Domain {
    pub fn label(self) -> &'static str {
        match self {
            Domain::Interior => "interior",
            Domain::Exterior => "exterior",
        }
    }
}

/// Closed, consistently outward-oriented triangle surface.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    panels: Vec<Panel>,
}

/// Fixed, generic ray directions for the point-in-surface parity test.
const RAY_DIRECTIONS: [[f64; 3]; 4] = [
    [0.5773502691896258, 0.5934813416301523, 0.5608817211203064],
    [-0.3814697265625, 0.8017837257372732, 0.4601113487203419],
    [0.7, -0.4082482904638631, 0.5773502691896257],
    [-0.2672612419124244, -0.5345224838248488, -0.8017837257372732],
];

impl SurfaceMesh {
    /// Validates and orients a triangle soup.
    ///
    /// Every edge must be shared by exactly two triangles. Orientation is made
    /// consistent across each connected component and then flipped globally if
    /// the enclosed signed volume is negative.
    pub fn new(vertices: Vec<Vec3>, mut triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        for (face, tri) in triangles.iter().enumerate() {
            for &index in tri {
                if index >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        face,
                        index,
                        count: vertices.len(),
                    });
                }
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            let scale = (b - a).norm_squared().max((c - a).norm_squared());
            if (b - a).cross(&(c - a)).norm() <= 1e-14 * scale || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::Degenerate(face));
            }
        }

        let mut edges: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                edges.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        for (&(a, b), owners) in &edges {
            if owners.len() != 2 {
                return Err(MeshError::NonClosed(a, b, owners.len()));
            }
        }

        orient_components(&mut triangles, &edges)?;

        let volume: f64 = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| vertices[i]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum();
        if volume < 0.0 {
            for t in &mut triangles {
                t.swap(1, 2);
            }
        }

        let panels = triangles
            .iter()
            .map(|t| Panel::new(t.map(|i| vertices[i])))
            .collect();
        Ok(Self {
            vertices,
            triangles,
            panels,
        })
    }

    /// Geodesic icosphere with `20·4^level` triangles and vertices on the sphere.
    pub fn icosphere(level: u32, radius: f64, center: Vec3) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|v| Vec3::from(*v).normalize())
        .collect();
        let mut tris: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
                *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(tris.len() * 4);
            for [a, b, c] in tris {
                let ab = midpoint(a, b, &mut verts);
                let bc = midpoint(b, c, &mut verts);
                let ca = midpoint(c, a, &mut verts);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            tris = next;
        }
        let verts = verts.into_iter().map(|v| center + v * radius).collect();
        Self::new(verts, tris).expect("icosphere construction yields a closed surface")
    }

    /// Axis-aligned cube of edge `edge` centred at `center`, each face split
    /// into `n × n` squares of two triangles.
    pub fn cube(edge: f64, n: usize, center: Vec3) -> Self {
        let n = n.max(1);
        let mut index: BTreeMap<[i64; 3], usize> = BTreeMap::new();
        let mut verts = Vec::new();
        let mut tris = Vec::new();
        let half = n as i64;
        let mut vid = |p: [i64; 3], verts: &mut Vec<Vec3>| {
            *index.entry(p).or_insert_with(|| {
                let s = edge / (2 * n) as f64;
                verts.push(center + Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64) * s);
                verts.len() - 1
            })
        };
        for axis in 0..3 {
            for sign in [-1i64, 1] {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                for i in 0..n as i64 {
                    for j in 0..n as i64 {
                        let corner = |di: i64, dj: i64| {
                            let mut p = [0i64; 3];
                            p[axis] = sign * half;
                            p[u] = -half + 2 * (i + di);
                            p[v] = -half + 2 * (j + dj);
                            p
                        };
                        let q = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)]
                            .map(|p| vid(p, &mut verts));
                        if sign > 0 {
                            tris.push([q[0], q[1], q[2]]);
                            tris.push([q[0], q[2], q[3]]);
                        } else {
                            tris.push([q[0], q[2], q[1]]);
                            tris.push([q[0], q[3], q[2]]);
                        }
                    }
                }
            }
        }
        Self::new(verts, tris).expect("cube construction yields a closed surface")
    }

    /// Reads an OFF or OBJ file, chosen by extension.
    pub fn read(path: &Path) -> Result<Self, MeshError> {
        let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        match ext.as_str() {
            "off" => Self::parse_off(&text),
            "obj" => Self::parse_obj(&text),
            other => Err(MeshError::UnsupportedFormat(other.to_string())),
        }
    }

    /// Parses the ASCII OFF format.
    pub fn parse_off(text: &str) -> Result<Self, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let parse_err = |line: usize, message: &str| MeshError::Parse {
            line,
            message: message.to_string(),
        };
        let (line, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
        let mut counts_src = header;
        let mut counts_line = line;
        if header.starts_with("OFF") {
            let rest = header.strip_prefix("OFF").unwrap_or(header).trim();
            if rest.is_empty() {
                let (l, c) = lines.next().ok_or_else(|| parse_err(line, "missing counts"))?;
                counts_src = c;
                counts_line = l;
            } else {
                counts_src = rest;
            }
        }
        let counts: Vec<usize> = counts_src
            .split_whitespace()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()
            .map_err(|_| parse_err(counts_line, "invalid element counts"))?;
        if counts.len() < 2 {
            return Err(parse_err(counts_line, "expected vertex and face counts"));
        }
        let mut verts = Vec::with_capacity(counts[0]);
        for _ in 0..counts[0] {
            let (l, src) = lines.next().ok_or_else(|| parse_err(counts_line, "missing vertex"))?;
            let v: Vec<f64> = src
                .split_whitespace()
                .take(3)
                .map(|s| s.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| parse_err(l, "invalid vertex coordinate"))?;
            if v.len() != 3 {
                return Err(parse_err(l, "vertex needs three coordinates"));
            }
            verts.push(Vec3::new(v[0], v[1], v[2]));
        }
        let mut tris = Vec::with_capacity(counts[1]);
        for face in 0..counts[1] {
            let (l, src) = lines.next().ok_or_else(|| parse_err(counts_line, "missing face"))?;
            let idx: Vec<usize> = src
                .split_whitespace()
                .map(|s| s.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| parse_err(l, "invalid face index"))?;
            let count = *idx.first().ok_or_else(|| parse_err(l, "empty face"))?;
            if count != 3 {
                return Err(MeshError::NonTriangle { face, count });
            }
            if idx.len() < 4 {
                return Err(parse_err(l, "face lists fewer indices than declared"));
            }
            tris.push([idx[1], idx[2], idx[3]]);
        }
        Self::new(verts, tris)
    }

    /// Parses the vertex and face records of a Wavefront OBJ file.
    pub fn parse_obj(text: &str) -> Result<Self, MeshError> {
        let mut verts = Vec::new();
        let mut tris = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let mut parts = raw.split('#').next().unwrap_or("").split_whitespace();
            match parts.next() {
                Some("v") => {
                    let v: Vec<f64> = parts
                        .take(3)
                        .map(|s| s.parse())
                        .collect::<Result<_, _>>()
                        .map_err(|_| MeshError::Parse {
                            line,
                            message: "invalid vertex coordinate".into(),
                        })?;
                    if v.len() != 3 {
                        return Err(MeshError::Parse {
                            line,
                            message: "vertex needs three coordinates".into(),
                        });
                    }
                    verts.push(Vec3::new(v[0], v[1], v[2]));
                }
                Some("f") => {
                    let idx: Vec<i64> = parts
                        .map(|s| s.split('/').next().unwrap_or("").parse())
                        .collect::<Result<_, _>>()
                        .map_err(|_| MeshError::Parse {
                            line,
                            message: "invalid face index".into(),
                        })?;
                    if idx.len() != 3 {
                        return Err(MeshError::NonTriangle {
                            face: tris.len(),
                            count: idx.len(),
                        });
                    }
                    let n = verts.len() as i64;
                    let resolve = |k: i64| -> Result<usize, MeshError> {
                        let r = if k < 0 { n + k } else { k - 1 };
                        if r < 0 {
                            return Err(MeshError::Parse {
                                line,
                                message: format!("face index {k} out of range"),
                            });
                        }
                        Ok(r as usize)
                    };
                    tris.push([resolve(idx[0])?, resolve(idx[1])?, resolve(idx[2])?]);
                }
                _ => {}
            }
        }
        Self::new(verts, tris)
    }

    /// ASCII OFF representation.
    pub fn to_off(&self) -> String {
        let mut s = format!("OFF\n{} {} 0\n", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    /// Writes the mesh as an OFF file.
    pub fn write_off(&self, path: &Path) -> Result<(), MeshError> {
        std::fs::write(path, self.to_off()).map_err(|source| MeshError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.panels.iter().map(|p| p.area).sum()
    }

    pub fn volume(&self) -> f64 {
        self.panels
            .iter()
            .map(|p| p.vertices[0].dot(&p.vertices[1].cross(&p.vertices[2])) / 6.0)
            .sum()
    }

    pub fn mean_diameter(&self) -> f64 {
        self.panels.iter().map(|p| p.diameter).sum::<f64>() / self.len() as f64
    }

    pub fn max_diameter(&self) -> f64 {
        self.panels.iter().map(|p| p.diameter).fold(0.0, f64::max)
    }

    /// Area-weighted mean of the vertices.
    pub fn center(&self) -> Vec3 {
        self.panels
            .iter()
            .map(|p| p.centroid * p.area)
            .sum::<Vec3>()
            / self.total_area()
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Largest distance from [`Self::center`] to a vertex.
    pub fn radius(&self) -> f64 {
        let c = self.center();
        self.vertices.iter().map(|v| (v - c).norm()).fold(0.0, f64::max)
    }

    /// Euclidean distance from `x` to the surface.
    pub fn distance(&self, x: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        for p in &self.panels {
            if (x - p.centroid).norm() - p.diameter >= best {
                continue;
            }
            best = best.min((x - closest_point_on_triangle(x, &p.vertices)).norm());
        }
        best
    }

    /// Whether `x` lies strictly inside the surface, by ray-crossing parity.
    ///
    /// A ray that passes too close to an edge or vertex is discarded and the
    /// next direction is tried.
    pub fn contains(&self, x: &Vec3) -> bool {
        'dirs: for d in RAY_DIRECTIONS {
            let dir = Vec3::from(d).normalize();
            let mut crossings = 0usize;
            for p in &self.panels {
                match ray_triangle(x, &dir, &p.vertices) {
                    RayHit::Miss => {}
                    RayHit::Hit => crossings += 1,
                    RayHit::Ambiguous => continue 'dirs,
                }
            }
            return crossings % 2 == 1;
        }
        let c = self.center();
        (x - c).norm() < self.radius()
    }

    pub fn locate(&self, x: &Vec3) -> Domain {
        if self.contains(x) {
            Domain::Interior
        } else {
            Domain::Exterior
        }
    }

    /// Vertex-to-panel averaging weights: for each vertex, the adjacent panels
    /// and their area fractions. Maps panel-constant data to vertex values.
    pub fn vertex_averaging(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.vertices.len()];
        for (p, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                adj[v].push((p, self.panels[p].area));
            }
        }
        for list in &mut adj {
            let total: f64 = list.iter().map(|(_, a)| a).sum();
            for entry in list.iter_mut() {
                entry.1 /= total;
            }
        }
        adj
    }
}

fn orient_components(
    triangles: &mut [[usize; 3]],
    edges: &BTreeMap<(usize, usize), Vec<usize>>,
) -> Result<(), MeshError> {
    let n = triangles.len();
    let mut visited = vec![false; n];
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let mut queue = VecDeque::from([seed]);
        while let Some(t) = queue.pop_front() {
            let tri = triangles[t];
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let owners = &edges[&(a.min(b), a.max(b))];
                let other = if owners[0] == t { owners[1] } else { owners[0] };
                let o = triangles[other];
                let same_direction = (0..3).any(|f| o[f] == a && o[(f + 1) % 3] == b);
                if visited[other] {
                    if same_direction {
                        return Err(MeshError::NonOrientable);
                    }
                    continue;
                }
                if same_direction {
                    triangles[other].swap(1, 2);
                }
                visited[other] = true;
                queue.push_back(other);
            }
        }
    }
    Ok(())
}

enum RayHit {
    Miss,
    Hit,
    Ambiguous,
}

fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> RayHit {
    const TOL: f64 = 1e-10;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    let scale = e1.norm() * e2.norm();
    if det.abs() <= 1e-14 * scale {
        return RayHit::Miss;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(-TOL..=1.0 + TOL).contains(&u) {
        return RayHit::Miss;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < -TOL || u + v > 1.0 + TOL {
        return RayHit::Miss;
    }
    let t = e2.dot(&q) * inv;
    if t < -TOL * scale.sqrt() {
        return RayHit::Miss;
    }
    if u < TOL || v < TOL || u + v > 1.0 - TOL || t < TOL * scale.sqrt() {
        return RayHit::Ambiguous;
    }
    RayHit::Hit
}

/// Closest point to `x` on a triangle.
pub fn closest_point_on_triangle(x: &Vec3, tri: &[Vec3; 3]) -> Vec3 {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = x - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = x - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = x - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Cell-centred quadrature over a region: one point and one weight per cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VolumeGrid {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// Base lattice spacing.
    pub spacing: f64,
}

impl VolumeGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Index of the cell whose centre is closest to `x`.
    pub fn nearest(&self, x: &Vec3) -> Option<usize> {
        self.points
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x).norm_squared().total_cmp(&(b.1 - x).norm_squared()))
            .map(|(i, _)| i)
    }
}

/// Region covered by a volume grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridRegion {
    /// Inside the surface.
    Interior,
    /// Outside the surface and within `radius` of its centre.
    Exterior { radius: f64 },
}

/// Uniform grid of cells of spacing `h` whose centres lie inside the surface.
pub fn make_volume_grid(mesh: &SurfaceMesh, h: f64) -> Result<VolumeGrid, MeshError> {
    make_grid(mesh, h, GridRegion::Interior, 0)
}

/// Cell grid over `region`, with cells within one cell diagonal of the
/// surface split into octants `refine` times to sharpen the boundary.
pub fn make_grid(
    mesh: &SurfaceMesh,
    h: f64,
    region: GridRegion,
    refine: u32,
) -> Result<VolumeGrid, MeshError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(MeshError::InvalidSpacing(h));
    }
    let (lo, hi) = match region {
        GridRegion::Interior => mesh.bounding_box(),
        GridRegion::Exterior { radius } => {
            let c = mesh.center();
            (c - Vec3::repeat(radius), c + Vec3::repeat(radius))
        }
    };
    let extent = (hi - lo).max();
    if h > extent {
        return Err(MeshError::SpacingTooLarge { spacing: h, extent });
    }
    let counts = ((hi - lo) / h).map(|e| e.ceil().max(1.0) as usize);
    let origin = (lo + hi) * 0.5 - Vec3::new(counts.x as f64, counts.y as f64, counts.z as f64) * (0.5 * h);
    let center = mesh.center();
    let keep = |x: &Vec3| match region {
        GridRegion::Interior => mesh.contains(x),
        GridRegion::Exterior { radius } => (x - center).norm() <= radius && !mesh.contains(x),
    };
    let mut grid = VolumeGrid {
        spacing: h,
        ..Default::default()
    };
    let mut stack = Vec::new();
    for i in 0..counts.x {
        for j in 0..counts.y {
            for k in 0..counts.z {
                let x = origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * h;
                stack.push((x, h, 0u32));
                while let Some((c, s, level)) = stack.pop() {
                    if level < refine && mesh.distance(&c) < 0.87 * s {
                        let q = 0.25 * s;
                        for dx in [-q, q] {
                            for dy in [-q, q] {
                                for dz in [-q, q] {
                                    stack.push((c + Vec3::new(dx, dy, dz), 0.5 * s, level + 1));
                                }
                            }
                        }
                    } else if keep(&c) {
                        grid.points.push(c);
                        grid.weights.push(s * s * s);
                    }
                }
            }
        }
    }
    Ok(grid)
}
