//! Fundamental solutions of the Stokes and Brinkman systems.
//!
//! The Brinkman operator is `(Δ − α)u − ∇π` with a resistance coefficient
//! `α ≥ 0`; `α = 0` is the Stokes operator. Every kernel is a function of the
//! separation `x = target − source` and all of them reduce to the classical
//! Stokes expressions when `α = 0`.
//!
//! The velocity kernel (`𝒢`) and the stress kernel (`S`) carry five radial
//! scalar functions of `z = √α·r`. Near `z = 0` their closed forms lose
//! accuracy to cancellation, so [`scalar_functions`] switches to a Taylor
//! series below [`SERIES_CROSSOVER`].

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Three-component real vector.
pub type Vec3 = Vector3<f64>;
/// Real 3×3 matrix.
pub type Mat3 = Matrix3<f64>;

/// Argument below which the scalar functions are evaluated from their series.
pub const SERIES_CROSSOVER: f64 = 0.5;

const SERIES_TERMS: usize = 24;

/// Error raised for an invalid resistance coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum KernelError {
    #[error("resistance coefficient alpha must be non-negative, got {0}")]
    NegativeAlpha(f64),
    #[error("resistance coefficient alpha must be finite, got {0}")]
    NonFiniteAlpha(f64),
}

/// Values of the five radial scalar functions at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarSet {
    pub a1: f64,
    pub a2: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl ScalarSet {
    fn from_array(v: [f64; 5]) -> Self {
        Self {
            a1: v[0],
            a2: v[1],
            d1: v[2],
            d2: v[3],
            d3: v[4],
        }
    }

    /// The values as `[a1, a2, d1, d2, d3]`.
    pub fn to_array(self) -> [f64; 5] {
        [self.a1, self.a2, self.d1, self.d2, self.d3]
    }
}

/// A function of the form `z⁻²·(e⁻ᶻ·P(z) + shift) + offset` with cubic `P`.
struct ExpRational {
    poly: [f64; 4],
    shift: f64,
    offset: f64,
}

const FUNCTIONS: [ExpRational; 5] = [
    ExpRational {
        poly: [2.0, 2.0, 2.0, 0.0],
        shift: -2.0,
        offset: 0.0,
    },
    ExpRational {
        poly: [-6.0, -6.0, -2.0, 0.0],
        shift: 6.0,
        offset: 0.0,
    },
    ExpRational {
        poly: [6.0, 6.0, 2.0, 0.0],
        shift: -6.0,
        offset: 1.0,
    },
    ExpRational {
        poly: [6.0, 6.0, 3.0, 1.0],
        shift: -6.0,
        offset: 0.0,
    },
    ExpRational {
        poly: [-30.0, -30.0, -12.0, -2.0],
        shift: 30.0,
        offset: 0.0,
    },
];

const fn exp_taylor_coefficient(m: usize) -> f64 {
    let mut fact = 1.0;
    let mut i = 2;
    while i <= m {
        fact *= i as f64;
        i += 1;
    }
    if m.is_multiple_of(2) {
        1.0 / fact
    } else {
        -1.0 / fact
    }
}

/// Taylor coefficients of `f(z) = Σ sₙ zⁿ`. The `z⁻²` and `z⁻¹` terms of the
/// expansion cancel identically for all five functions.
const fn series_coefficients(f: &ExpRational) -> [f64; SERIES_TERMS] {
    let mut out = [0.0; SERIES_TERMS];
    let mut n = 0;
    while n < SERIES_TERMS {
        let mut s = 0.0;
        let mut i = 0;
        while i < 4 {
            if n + 2 >= i {
                s += f.poly[i] * exp_taylor_coefficient(n + 2 - i);
            }
            i += 1;
        }
        if n == 0 {
            s += f.offset;
        }
        out[n] = s;
        n += 1;
    }
    out
}

const SERIES: [[f64; SERIES_TERMS]; 5] = [
    series_coefficients(&FUNCTIONS[0]),
    series_coefficients(&FUNCTIONS[1]),
    series_coefficients(&FUNCTIONS[2]),
    series_coefficients(&FUNCTIONS[3]),
    series_coefficients(&FUNCTIONS[4]),
];

fn series_value(c: &[f64; SERIES_TERMS], z: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &s| acc * z + s)
}

fn series_derivative(c: &[f64; SERIES_TERMS], z: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (n, &s)| acc * z + n as f64 * s)
}

fn closed_value(f: &ExpRational, e: f64, z: f64) -> f64 {
    let p = f.poly[0] + z * (f.poly[1] + z * (f.poly[2] + z * f.poly[3]));
    (e * p + f.shift) / (z * z) + f.offset
}

fn closed_derivative(f: &ExpRational, e: f64, z: f64) -> f64 {
    let p = f.poly[0] + z * (f.poly[1] + z * (f.poly[2] + z * f.poly[3]));
    let dp = f.poly[1] + z * (2.0 * f.poly[2] + z * 3.0 * f.poly[3]);
    let inv = 1.0 / z;
    -2.0 * inv * inv * inv * (e * p + f.shift) + inv * inv * e * (dp - p)
}

/// Series branch of the scalar functions, valid for small `z`.
pub fn scalar_functions_series(z: f64) -> ScalarSet {
    ScalarSet::from_array(std::array::from_fn(|i| series_value(&SERIES[i], z)))
}

/// Closed-form branch of the scalar functions. Loses relative accuracy as `z → 0`.
pub fn scalar_functions_closed(z: f64) -> ScalarSet {
    let e = (-z).exp();
    ScalarSet::from_array(std::array::from_fn(|i| closed_value(&FUNCTIONS[i], e, z)))
}

/// `A₁, A₂, D₁, D₂, D₃` at `z ≥ 0`, switching to the series below the crossover.
pub fn scalar_functions(z: f64) -> ScalarSet {
    if z < SERIES_CROSSOVER {
        scalar_functions_series(z)
    } else {
        scalar_functions_closed(z)
    }
}

/// Derivatives with respect to `z` of the five scalar functions.
pub fn scalar_derivatives(z: f64) -> ScalarSet {
    if z < SERIES_CROSSOVER {
        ScalarSet::from_array(std::array::from_fn(|i| series_derivative(&SERIES[i], z)))
    } else {
        let e = (-z).exp();
        ScalarSet::from_array(std::array::from_fn(|i| {
            closed_derivative(&FUNCTIONS[i], e, z)
        }))
    }
}

/// Radial profiles of the velocity kernel, `𝒢 = (δ·g1 + x⊗x·g2)/8π`.
#[derive(Debug, Clone, Copy)]
struct VelocityProfile {
    g1: f64,
    g2: f64,
    dg1: f64,
    dg2: f64,
}

/// Radial profiles of the stress kernel,
/// `S_jkl = −(δ_jl x_k c1 + (δ_jk x_l + δ_kl x_j) c2 + x_j x_k x_l c3)/4π`.
#[derive(Debug, Clone, Copy)]
struct StressProfile {
    c1: f64,
    c2: f64,
    c3: f64,
    dc1: f64,
    dc2: f64,
    dc3: f64,
}

/// Gradient of a second-order kernel: `grad[m][(j, k)] = ∂ₘ K_jk`.
pub type KernelGradient = [Mat3; 3];

/// Stokes (`α = 0`) or Brinkman (`α > 0`) fundamental solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    alpha: f64,
    root: f64,
}

impl Kernel {
    /// The Stokes fundamental solution.
    pub fn stokes() -> Self {
        Self {
            alpha: 0.0,
            root: 0.0,
        }
    }

    /// The Brinkman fundamental solution for resistance `alpha ≥ 0`.
    pub fn brinkman(alpha: f64) -> Result<Self, KernelError> {
        if !alpha.is_finite() {
            return Err(KernelError::NonFiniteAlpha(alpha));
        }
        if alpha < 0.0 {
            return Err(KernelError::NegativeAlpha(alpha));
        }
        Ok(Self {
            alpha,
            root: alpha.sqrt(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_stokes(&self) -> bool {
        self.alpha == 0.0
    }

    fn velocity_profile(&self, r: f64) -> VelocityProfile {
        if self.is_stokes() {
            let inv = 1.0 / r;
            let inv3 = inv * inv * inv;
            return VelocityProfile {
                g1: inv,
                g2: inv3,
                dg1: -inv * inv,
                dg2: -3.0 * inv3 * inv,
            };
        }
        let z = self.root * r;
        let s = scalar_functions(z);
        let ds = scalar_derivatives(z);
        let inv = 1.0 / r;
        let inv2 = inv * inv;
        let inv3 = inv2 * inv;
        VelocityProfile {
            g1: s.a1 * inv,
            g2: s.a2 * inv3,
            dg1: self.root * ds.a1 * inv - s.a1 * inv2,
            dg2: self.root * ds.a2 * inv3 - 3.0 * s.a2 * inv3 * inv,
        }
    }

    fn stress_profile(&self, r: f64) -> StressProfile {
        let inv = 1.0 / r;
        let inv2 = inv * inv;
        let inv3 = inv2 * inv;
        let inv5 = inv3 * inv2;
        if self.is_stokes() {
            return StressProfile {
                c1: 0.0,
                c2: 0.0,
                c3: 3.0 * inv5,
                dc1: 0.0,
                dc2: 0.0,
                dc3: -15.0 * inv5 * inv,
            };
        }
        let z = self.root * r;
        let s = scalar_functions(z);
        let ds = scalar_derivatives(z);
        StressProfile {
            c1: s.d1 * inv3,
            c2: s.d2 * inv3,
            c3: s.d3 * inv5,
            dc1: self.root * ds.d1 * inv3 - 3.0 * s.d1 * inv3 * inv,
            dc2: self.root * ds.d2 * inv3 - 3.0 * s.d2 * inv3 * inv,
            dc3: self.root * ds.d3 * inv5 - 5.0 * s.d3 * inv5 * inv,
        }
    }

    /// Velocity kernel `𝒢(x)`; column `k` is the flow due to a unit point force along `e_k`.
    pub fn velocity(&self, x: &Vec3) -> Mat3 {
        let r = x.norm();
        if self.is_stokes() {
            return (Mat3::identity() / r + x * x.transpose() / (r * r * r)) / (8.0 * PI);
        }
        let p = self.velocity_profile(r);
        (Mat3::identity() * p.g1 + x * x.transpose() * p.g2) / (8.0 * PI)
    }

    /// Velocity kernel together with its gradient.
    pub fn velocity_with_gradient(&self, x: &Vec3) -> (Mat3, KernelGradient) {
        let r = x.norm();
        let p = self.velocity_profile(r);
        let scale = 1.0 / (8.0 * PI);
        let xx = x * x.transpose();
        let value = (Mat3::identity() * p.g1 + xx * p.g2) * scale;
        let grad = std::array::from_fn(|m| {
            let xm = x[m] / r;
            let mut g = Mat3::identity() * (p.dg1 * xm) + xx * (p.dg2 * xm);
            for j in 0..3 {
                g[(j, m)] += x[j] * p.g2;
                g[(m, j)] += x[j] * p.g2;
            }
            g * scale
        });
        (value, grad)
    }

    /// Pressure kernel `Π(x) = x/(4π|x|³)`, independent of `α`.
    pub fn pressure(&self, x: &Vec3) -> Vec3 {
        let r = x.norm();
        x / (4.0 * PI * r * r * r)
    }

    /// Gradient of the pressure kernel, `out[(j, m)] = ∂ₘ Π_j`.
    pub fn pressure_gradient(&self, x: &Vec3) -> Mat3 {
        let r2 = x.norm_squared();
        let r = r2.sqrt();
        let inv3 = 1.0 / (r2 * r);
        (Mat3::identity() * inv3 - x * x.transpose() * (3.0 * inv3 / r2)) / (4.0 * PI)
    }

    /// Full stress kernel, `out[l][(j, k)] = S_jkl(x)`.
    pub fn stress(&self, x: &Vec3) -> [Mat3; 3] {
        std::array::from_fn(|l| self.stress_contract(x, &Vec3::ith(l, 1.0)))
    }

    /// Stress kernel contracted with a direction: `out[(j, k)] = Σ_l S_jkl(x) n_l`.
    ///
    /// With `n` the normal at the target this is the traction, component `j`,
    /// of the flow due to a point force along `e_k`.
    pub fn stress_contract(&self, x: &Vec3, n: &Vec3) -> Mat3 {
        let r = x.norm();
        let xn = x.dot(n);
        if self.is_stokes() {
            let r2 = r * r;
            return x * x.transpose() * (-3.0 * xn / (4.0 * PI * r2 * r2 * r));
        }
        let p = self.stress_profile(r);
        let m = n * x.transpose() * p.c1
            + (Mat3::identity() * xn + x * n.transpose()) * p.c2
            + x * x.transpose() * (xn * p.c3);
        m * (-1.0 / (4.0 * PI))
    }

    /// Gradient of [`Self::stress_contract`] with respect to `x` for a fixed direction.
    pub fn stress_contract_gradient(&self, x: &Vec3, n: &Vec3) -> KernelGradient {
        let r = x.norm();
        let p = self.stress_profile(r);
        let a = x.dot(n);
        let scale = -1.0 / (4.0 * PI);
        std::array::from_fn(|m| {
            let xm = x[m] / r;
            let mut g = Mat3::zeros();
            for j in 0..3 {
                for k in 0..3 {
                    let djk = if j == k { 1.0 } else { 0.0 };
                    let djm = if j == m { 1.0 } else { 0.0 };
                    let dkm = if k == m { 1.0 } else { 0.0 };
                    let v = p.c1 * n[j] * dkm
                        + p.dc1 * xm * n[j] * x[k]
                        + p.c2 * (djk * n[m] + n[k] * djm)
                        + p.dc2 * xm * (djk * a + n[k] * x[j])
                        + p.c3 * (djm * x[k] * a + x[j] * dkm * a + x[j] * x[k] * n[m])
                        + p.dc3 * xm * x[j] * x[k] * a;
                    g[(j, k)] = v * scale;
                }
            }
            g
        })
    }

    /// Pressure tensor `Λ(x)`, the pressure paired with the stress kernel.
    pub fn pressure_tensor(&self, x: &Vec3) -> Mat3 {
        let r = x.norm();
        let stokes = (Mat3::identity() * (-1.0 / r.powi(3)) + x * x.transpose() * (3.0 / r.powi(5)))
            / (2.0 * PI);
        if self.is_stokes() {
            stokes
        } else {
            stokes + Mat3::identity() * (self.alpha / (4.0 * PI * r))
        }
    }

    /// Traction kernel of the double layer potential.
    ///
    /// For a source at `y` with normal `source_normal` and a target at `y + x`
    /// with normal `target_normal`, `out[(i, j)]` is the traction component `i`
    /// at the target produced by a unit double layer density along `e_j`.
    pub fn double_layer_traction(
        &self,
        x: &Vec3,
        source_normal: &Vec3,
        target_normal: &Vec3,
    ) -> Mat3 {
        let dm = self.stress_contract_gradient(x, source_normal);
        let lam = self.pressure_tensor(x) * source_normal;
        let mut out = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = -lam[j] * target_normal[i];
                for m in 0..3 {
                    s -= (dm[i][(j, m)] + dm[m][(j, i)]) * target_normal[m];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    /// Velocity of the double layer kernel: `out[(k, j)]` is velocity component
    /// `k` at `y + x` due to a unit density along `e_j` at a source with normal `source_normal`.
    pub fn double_layer_velocity(&self, x: &Vec3, source_normal: &Vec3) -> Mat3 {
        -self.stress_contract(x, source_normal).transpose()
    }

    /// Velocity gradient of the double layer kernel, `out[m][(k, j)] = ∂ₘ` of
    /// [`Self::double_layer_velocity`].
    pub fn double_layer_velocity_gradient(&self, x: &Vec3, source_normal: &Vec3) -> KernelGradient {
        let g = self.stress_contract_gradient(x, source_normal);
        std::array::from_fn(|m| -g[m].transpose())
    }

    /// Pressure of the double layer kernel: `out[j]` is the pressure at `y + x`
    /// due to a unit density along `e_j`.
    pub fn double_layer_pressure(&self, x: &Vec3, source_normal: &Vec3) -> Vec3 {
        self.pressure_tensor(x) * source_normal
    }
}

/// `𝒢^α(x)` for resistance `alpha`.
pub fn fundamental_velocity(alpha: f64, x: &Vec3) -> Result<Mat3, KernelError> {
    Ok(Kernel::brinkman(alpha)?.velocity(x))
}

/// `Π(x)`.
pub fn fundamental_pressure(x: &Vec3) -> Vec3 {
    Kernel::stokes().pressure(x)
}

/// `S^α(x)` as `out[l][(j, k)] = S_jkl`.
pub fn stress_kernel(alpha: f64, x: &Vec3) -> Result<[Mat3; 3], KernelError> {
    Ok(Kernel::brinkman(alpha)?.stress(x))
}

/// `Λ^α(x)`.
pub fn pressure_kernel(alpha: f64, x: &Vec3) -> Result<Mat3, KernelError> {
    Ok(Kernel::brinkman(alpha)?.pressure_tensor(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use astro_float::{BigFloat, Consts, RoundingMode};
    use proptest::prelude::*;

    const PREC: usize = 256;

    /// Closed forms evaluated in 256-bit binary floating point.
    fn extended_closed_form(z: f64) -> [f64; 5] {
        let rm = RoundingMode::ToEven;
        let mut cc = Consts::new().unwrap();
        let zb = BigFloat::from_f64(z, PREC);
        let e = zb.neg().exp(PREC, rm, &mut cc);
        let inv = BigFloat::from_f64(1.0, PREC).div(&zb, PREC, rm);
        let inv2 = inv.mul(&inv, PREC, rm);
        FUNCTIONS.map(|f| {
            let mut p = BigFloat::from_f64(f.poly[3], PREC);
            for c in f.poly[..3].iter().rev() {
                p = p
                    .mul(&zb, PREC, rm)
                    .add(&BigFloat::from_f64(*c, PREC), PREC, rm);
            }
            let v = e
                .mul(&p, PREC, rm)
                .add(&BigFloat::from_f64(f.shift, PREC), PREC, rm)
                .mul(&inv2, PREC, rm)
                .add(&BigFloat::from_f64(f.offset, PREC), PREC, rm);
            format!("{v}").parse::<f64>().unwrap()
        })
    }

    #[test]
    fn low_order_series_terms_match_symbolic_expansion() {
        let expected = [
            [1.0, -4.0 / 3.0, 3.0 / 4.0, -4.0 / 15.0, 5.0 / 72.0],
            [1.0, 0.0, -1.0 / 4.0, 2.0 / 15.0, -1.0 / 24.0],
            [0.0, 0.0, 1.0 / 4.0, -2.0 / 15.0, 1.0 / 24.0],
            [0.0, 0.0, -1.0 / 4.0, 1.0 / 5.0, -1.0 / 12.0],
            [3.0, 0.0, -1.0 / 4.0, 0.0, 1.0 / 24.0],
        ];
        for (series, want) in SERIES.iter().zip(expected) {
            for (got, w) in series.iter().zip(want) {
                assert!((got - w).abs() < 1e-15, "{got} vs {w}");
            }
        }
    }

    #[test]
    fn limits_at_zero() {
        let s = scalar_functions(0.0).to_array();
        assert_eq!(s, [1.0, 1.0, 0.0, 0.0, 3.0]);
        let tiny = scalar_functions(1e-9).to_array();
        for (a, b) in tiny.iter().zip([1.0, 1.0, 0.0, 0.0, 3.0]) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn large_argument_asymptotics() {
        let z = 50.0;
        let s = scalar_functions(z);
        let z2 = z * z;
        assert_relative_eq!(s.a1, -2.0 / z2, max_relative = 1e-12);
        assert_relative_eq!(s.a2, 6.0 / z2, max_relative = 1e-12);
        assert_relative_eq!(s.d1, 1.0 - 6.0 / z2, max_relative = 1e-12);
        assert_relative_eq!(s.d2, -6.0 / z2, max_relative = 1e-12);
        assert_relative_eq!(s.d3, 30.0 / z2, max_relative = 1e-12);
    }

    #[test]
    fn branches_agree_around_crossover() {
        let n = 200;
        for i in 0..=n {
            let z = SERIES_CROSSOVER * (0.5 + 1.5 * i as f64 / n as f64);
            let a = scalar_functions_series(z).to_array();
            let b = scalar_functions_closed(z).to_array();
            for (x, y) in a.iter().zip(b) {
                assert!(((x - y) / y).abs() <= 1e-10, "z={z}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn matches_extended_precision_reference() {
        for &z in &[1e-3, 0.01, 0.1, 0.3, 0.49, 0.5, 0.51, 0.9, 2.0, 7.5, 30.0] {
            let reference = extended_closed_form(z);
            let got = scalar_functions(z).to_array();
            for (g, r) in got.iter().zip(reference) {
                assert!(((g - r) / r).abs() <= 1e-12, "z={z}: {g} vs {r}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for &z in &[0.05, 0.3, 0.7, 3.0] {
            let h = 1e-5;
            let up = scalar_functions(z + h).to_array();
            let dn = scalar_functions(z - h).to_array();
            let d = scalar_derivatives(z).to_array();
            for i in 0..5 {
                let fd = (up[i] - dn[i]) / (2.0 * h);
                assert!((fd - d[i]).abs() < 1e-8, "z={z} i={i}: {fd} vs {}", d[i]);
            }
        }
    }

    #[test]
    fn zero_alpha_is_bit_exact_stokes() {
        let x = Vec3::new(0.3, -0.7, 1.1);
        let b = Kernel::brinkman(0.0).unwrap();
        let s = Kernel::stokes();
        assert_eq!(b.velocity(&x), s.velocity(&x));
        assert_eq!(b.stress(&x), s.stress(&x));
        assert_eq!(b.pressure_tensor(&x), s.pressure_tensor(&x));
        let r = x.norm();
        let stokes_g = (Mat3::identity() / r + x * x.transpose() / (r * r * r)) / (8.0 * PI);
        assert_eq!(s.velocity(&x), stokes_g);
    }

    #[test]
    fn rejects_negative_alpha() {
        assert_eq!(Kernel::brinkman(-1.0), Err(KernelError::NegativeAlpha(-1.0)));
        assert!(Kernel::brinkman(f64::NAN).is_err());
    }

    #[test]
    fn pressure_tensor_shift() {
        let x = Vec3::new(0.4, 0.2, -0.9);
        let alpha = 2.5;
        let lhs = pressure_kernel(alpha, &x).unwrap();
        let rhs = pressure_kernel(0.0, &x).unwrap()
            + Mat3::identity() * (alpha / (4.0 * PI * x.norm()));
        assert!((lhs - rhs).abs().max() < 1e-14);
        let stokes_form = (Mat3::identity() * (-1.0 / x.norm().powi(3))
            + x * x.transpose() * (3.0 / x.norm().powi(5)))
            / (2.0 * PI);
        assert_eq!(pressure_kernel(0.0, &x).unwrap(), stokes_form);
    }

    /// Second-order central differences of `f` along each axis.
    fn laplacian(f: &dyn Fn(&Vec3) -> Mat3, x: &Vec3, h: f64) -> Mat3 {
        let mut acc = -6.0 * f(x);
        for m in 0..3 {
            let e = Vec3::ith(m, h);
            acc += f(&(x + e)) + f(&(x - e));
        }
        acc / (h * h)
    }

    fn pde_residual(alpha: f64, x: &Vec3, h: f64) -> (f64, f64) {
        let k = Kernel::brinkman(alpha).unwrap();
        let g = |y: &Vec3| k.velocity(y);
        let lap = laplacian(&g, x, h);
        let mut grad_p = Mat3::zeros();
        let mut div = Vec3::zeros();
        for m in 0..3 {
            let e = Vec3::ith(m, h);
            let dp = (k.pressure(&(x + e)) - k.pressure(&(x - e))) / (2.0 * h);
            let dg = (k.velocity(&(x + e)) - k.velocity(&(x - e))) / (2.0 * h);
            for j in 0..3 {
                grad_p[(m, j)] = dp[j];
                div[j] += dg[(m, j)];
            }
        }
        let res = lap - k.velocity(x) * alpha - grad_p;
        (res.abs().max(), div.abs().max())
    }

    #[test]
    fn finite_difference_pde_residual_is_second_order() {
        let x = Vec3::new(0.5, -0.3, 0.4);
        for &alpha in &[0.0, 0.8, 4.0] {
            let (r1, d1) = pde_residual(alpha, &x, 2e-2);
            let (r2, d2) = pde_residual(alpha, &x, 1e-2);
            assert!(r1 / r2 > 3.5 && r1 / r2 < 4.5, "alpha={alpha}: {r1} {r2}");
            assert!(d1 / d2 > 3.5 && d1 / d2 < 4.5, "alpha={alpha}: {d1} {d2}");
        }
    }

    #[test]
    fn stress_matches_definition() {
        let k = Kernel::brinkman(1.7).unwrap();
        let x = Vec3::new(0.3, -0.5, 0.7);
        let h = 1e-5;
        let s = k.stress(&x);
        let pi = k.pressure(&x);
        let dg: [Mat3; 3] = std::array::from_fn(|m| {
            let e = Vec3::ith(m, h);
            (k.velocity(&(x + e)) - k.velocity(&(x - e))) / (2.0 * h)
        });
        for j in 0..3 {
            for kk in 0..3 {
                for l in 0..3 {
                    let djl = if j == l { 1.0 } else { 0.0 };
                    let def = -pi[kk] * djl + dg[l][(j, kk)] + dg[j][(l, kk)];
                    assert!((def - s[l][(j, kk)]).abs() < 1e-8, "{j}{kk}{l}");
                }
            }
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let k = Kernel::brinkman(0.9).unwrap();
        let x = Vec3::new(-0.2, 0.6, 0.35);
        let n = Vec3::new(0.3, 0.4, -0.2).normalize();
        let h = 1e-6;
        let (_, gv) = k.velocity_with_gradient(&x);
        let gs = k.stress_contract_gradient(&x, &n);
        let gp = k.pressure_gradient(&x);
        for m in 0..3 {
            let e = Vec3::ith(m, h);
            let fv = (k.velocity(&(x + e)) - k.velocity(&(x - e))) / (2.0 * h);
            let fs = (k.stress_contract(&(x + e), &n) - k.stress_contract(&(x - e), &n)) / (2.0 * h);
            let fp = (k.pressure(&(x + e)) - k.pressure(&(x - e))) / (2.0 * h);
            assert!((fv - gv[m]).abs().max() < 1e-7);
            assert!((fs - gs[m]).abs().max() < 1e-6);
            assert!((fp - gp.column(m)).abs().max() < 1e-7);
        }
    }

    #[test]
    fn double_layer_pair_solves_brinkman() {
        let k = Kernel::brinkman(1.3).unwrap();
        let nu = Vec3::new(0.2, -0.5, 0.8).normalize();
        let x = Vec3::new(0.45, 0.1, -0.3);
        let h = 1e-3;
        let u = |y: &Vec3| k.double_layer_velocity(y, &nu);
        let lap = laplacian(&u, &x, h);
        let mut res = lap - u(&x) * k.alpha();
        for m in 0..3 {
            let e = Vec3::ith(m, h);
            let dp = (k.double_layer_pressure(&(x + e), &nu) - k.double_layer_pressure(&(x - e), &nu))
                / (2.0 * h);
            for j in 0..3 {
                res[(m, j)] -= dp[j];
            }
        }
        assert!(res.abs().max() < 1e-4, "{res}");
    }

    proptest! {
        #[test]
        fn velocity_kernel_symmetric_and_even(
            x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0, alpha in 0.0f64..10.0
        ) {
            let p = Vec3::new(x, y, z);
            prop_assume!(p.norm() > 1e-3);
            let k = Kernel::brinkman(alpha).unwrap();
            let g = k.velocity(&p);
            prop_assert!((g - g.transpose()).abs().max() <= 1e-14 * g.abs().max());
            prop_assert!((g - k.velocity(&-p)).abs().max() <= 1e-14 * g.abs().max());
        }

        #[test]
        fn stress_kernel_odd_and_symmetric_in_outer_indices(
            x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0, alpha in 0.0f64..10.0
        ) {
            let p = Vec3::new(x, y, z);
            prop_assume!(p.norm() > 1e-3);
            let k = Kernel::brinkman(alpha).unwrap();
            let s = k.stress(&p);
            let sm = k.stress(&-p);
            let scale = s.iter().map(|m| m.abs().max()).fold(0.0, f64::max);
            for l in 0..3 {
                prop_assert!((s[l] + sm[l]).abs().max() <= 1e-13 * scale);
                for j in 0..3 {
                    for kk in 0..3 {
                        prop_assert!((s[l][(j, kk)] - s[j][(l, kk)]).abs() <= 1e-13 * scale);
                    }
                }
            }
        }

        #[test]
        fn stokes_velocity_is_homogeneous(
            x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0, lambda in 0.1f64..10.0
        ) {
            let p = Vec3::new(x, y, z);
            prop_assume!(p.norm() > 1e-3);
            let k = Kernel::stokes();
            let a = k.velocity(&(p * lambda)) * lambda;
            let b = k.velocity(&p);
            prop_assert!((a - b).abs().max() <= 1e-13 * b.abs().max());
        }
    }
}
