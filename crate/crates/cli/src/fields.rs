//! Vector fields prescribed in scenario files.

use std::path::{Path, PathBuf};

use brinkman_bem::kernels::Vec3;
use serde::{Deserialize, Serialize};

use crate::scenario::ValidationError;

/// `coefficient · x^px y^py z^pz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coefficient: [f64; 3],
    #[serde(default)]
    pub powers: [u32; 3],
}

/// A vector field given in closed form or as samples in a CSV file.
///
/// In TOML: `{ constant = [1.0, 0.0, 0.0] }`,
/// `{ polynomial = [{ coefficient = [0.0, 1.0, 0.0], powers = [1, 0, 0] }] }`,
/// `{ gaussian = { amplitude = [...], center = [...], width = 0.3 } }`,
/// `{ sum = [...] }` or `{ file = "samples.csv" }`. A file holds one header
/// line and three columns, one row per panel or grid cell in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldSpec {
    Constant([f64; 3]),
    Polynomial(Vec<Monomial>),
    Gaussian {
        amplitude: [f64; 3],
        center: [f64; 3],
        width: f64,
    },
    Sum(Vec<FieldSpec>),
    File(PathBuf),
}

impl FieldSpec {
    pub fn resolve_paths(&mut self, base: &Path) {
        match self {
            FieldSpec::File(p) if p.is_relative() => *p = base.join(&*p),
            FieldSpec::Sum(parts) => parts.iter_mut().for_each(|p| p.resolve_paths(base)),
            _ => {}
        }
    }

    pub fn validate(&self, path: &str) -> Result<(), ValidationError> {
        let finite = |v: &[f64; 3], what: &str| {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(ValidationError::new(format!("{path}.{what}"), "entries must be finite"))
            }
        };
        match self {
            FieldSpec::Constant(c) => finite(c, "constant"),
            FieldSpec::Polynomial(terms) => terms.iter().try_for_each(|t| finite(&t.coefficient, "polynomial")),
            FieldSpec::Gaussian {
                amplitude,
                center,
                width,
            } => {
                finite(amplitude, "gaussian.amplitude")?;
                finite(center, "gaussian.center")?;
                if width.is_finite() && *width > 0.0 {
                    Ok(())
                } else {
                    Err(ValidationError::new(
                        format!("{path}.gaussian.width"),
                        format!("must be positive, got {width}"),
                    ))
                }
            }
            FieldSpec::Sum(parts) => parts
                .iter()
                .enumerate()
                .try_for_each(|(i, p)| p.validate(&format!("{path}.sum[{i}]"))),
            FieldSpec::File(_) => Ok(()),
        }
    }

    /// Samples the field at `points`. File fields must list exactly one row
    /// per point.
    pub fn sample(&self, points: &[Vec3], path: &str) -> Result<Vec<Vec3>, ValidationError> {
        match self {
            FieldSpec::File(file) => {
                let rows = read_rows::<3>(file).map_err(|m| ValidationError::new(format!("{path}.file"), m))?;
                if rows.len() != points.len() {
                    return Err(ValidationError::new(
                        format!("{path}.file"),
                        format!("{} has {} rows, expected {}", file.display(), rows.len(), points.len()),
                    ));
                }
                Ok(rows.into_iter().map(Vec3::from).collect())
            }
            FieldSpec::Sum(parts) => {
                let mut total = vec![Vec3::zeros(); points.len()];
                for (i, part) in parts.iter().enumerate() {
                    let values = part.sample(points, &format!("{path}.sum[{i}]"))?;
                    for (t, v) in total.iter_mut().zip(values) {
                        *t += v;
                    }
                }
                Ok(total)
            }
            _ => Ok(points.iter().map(|x| self.eval(x)).collect()),
        }
    }

    /// Closed-form value; zero for file fields.
    pub fn eval(&self, x: &Vec3) -> Vec3 {
        match self {
            FieldSpec::Constant(c) => Vec3::from(*c),
            FieldSpec::Polynomial(terms) => terms
                .iter()
                .map(|t| {
                    let m = x.x.powi(t.powers[0] as i32) * x.y.powi(t.powers[1] as i32) * x.z.powi(t.powers[2] as i32);
                    Vec3::from(t.coefficient) * m
                })
                .fold(Vec3::zeros(), |a, b| a + b),
            FieldSpec::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let r2 = (x - Vec3::from(*center)).norm_squared();
                Vec3::from(*amplitude) * (-r2 / (width * width)).exp()
            }
            FieldSpec::Sum(parts) => parts.iter().map(|p| p.eval(x)).fold(Vec3::zeros(), |a, b| a + b),
            FieldSpec::File(_) => Vec3::zeros(),
        }
    }
}

/// Reads a headed CSV file of `N` numeric columns.
pub fn read_rows<const N: usize>(file: &Path) -> Result<Vec<[f64; N]>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(file)
        .map_err(|e| format!("cannot read {}: {e}", file.display()))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format!("{}: {e}", file.display()))?;
        if record.len() != N {
            return Err(format!(
                "{} row {}: expected {N} columns, got {}",
                file.display(),
                line + 1,
                record.len()
            ));
        }
        let mut row = [0.0; N];
        for (slot, field) in row.iter_mut().zip(record.iter()) {
            *slot = field
                .parse()
                .map_err(|_| format!("{} row {}: not a number: {field:?}", file.display(), line + 1))?;
        }
        rows.push(row);
    }
    Ok(rows)
}
