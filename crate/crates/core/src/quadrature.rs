//! Quadrature over flat triangles: fixed rules, distance-adaptive subdivision
//! and a polar (Duffy) rule for integrands with a `1/r` point singularity.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::kernels::Vec3;

/// A symmetric rule given by barycentric points `(l0, l1)` and weights summing to one.
struct TriangleRule {
    points: &'static [[f64; 2]],
    weights: &'static [f64],
}

const CENTROID: TriangleRule = TriangleRule {
    points: &[[1.0 / 3.0, 1.0 / 3.0]],
    weights: &[1.0],
};

const A7: f64 = 0.101_286_507_323_456_34;
const B7: f64 = 0.470_142_064_105_115_1;

/// Seven-point rule, exact for polynomials of degree five.
const SEVEN_POINT: TriangleRule = TriangleRule {
    points: &[
        [1.0 / 3.0, 1.0 / 3.0],
        [A7, A7],
        [1.0 - 2.0 * A7, A7],
        [A7, 1.0 - 2.0 * A7],
        [B7, B7],
        [1.0 - 2.0 * B7, B7],
        [B7, 1.0 - 2.0 * B7],
    ],
    weights: &[
        0.225,
        0.125_939_180_544_827_15,
        0.125_939_180_544_827_15,
        0.125_939_180_544_827_15,
        0.132_394_152_788_506_2,
        0.132_394_152_788_506_2,
        0.132_394_152_788_506_2,
    ],
};

/// Controls distance-adaptive panel integration.
///
/// A (sub)triangle whose centroid lies at least `far_ratio` diameters from the
/// target uses its centroid; at least `near_ratio` diameters uses the
/// seven-point rule; closer ones are split into four until `max_depth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub far_ratio: f64,
    pub near_ratio: f64,
    pub max_depth: u32,
    /// Gauss-Legendre order per direction of the polar rule.
    pub singular_order: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            far_ratio: 10.0,
            near_ratio: 3.0,
            max_depth: 12,
            singular_order: 8,
        }
    }
}

impl QuadratureOptions {
    /// Tighter settings for reference computations.
    pub fn accurate() -> Self {
        Self {
            far_ratio: 12.0,
            near_ratio: 5.0,
            max_depth: 14,
            singular_order: 12,
        }
    }
}

/// One quadrature node: position, weight (area included) and barycentric
/// coordinates with respect to the parent triangle.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub point: Vec3,
    pub weight: f64,
    pub bary: [f64; 3],
}

fn gauss_legendre_unit(order: usize) -> &'static [(f64, f64)] {
    static CACHE: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    let table = CACHE.get_or_init(|| {
        (1..=32)
            .map(|n| {
                let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("positive order"));
                rule.as_node_weight_pairs()
                    .iter()
                    .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
                    .collect()
            })
            .collect()
    });
    &table[order.clamp(1, 32) - 1]
}

fn lerp_bary(b: &[[f64; 3]; 3], l0: f64, l1: f64) -> [f64; 3] {
    let l2 = 1.0 - l0 - l1;
    std::array::from_fn(|i| b[0][i] * l0 + b[1][i] * l1 + b[2][i] * l2)
}

fn apply_rule(
    rule: &TriangleRule,
    tri: &[Vec3; 3],
    bary: &[[f64; 3]; 3],
    area: f64,
    f: &mut impl FnMut(Node),
) {
    for (p, w) in rule.points.iter().zip(rule.weights) {
        let point = tri[0] * p[0] + tri[1] * p[1] + tri[2] * (1.0 - p[0] - p[1]);
        f(Node {
            point,
            weight: w * area,
            bary: lerp_bary(bary, p[0], p[1]),
        });
    }
}

/// Feeds quadrature nodes for the triangle `tri` to `f`, refining towards `target`.
///
/// `target` must not lie on the triangle; use [`integrate_singular`] for that case.
pub fn integrate_adaptive(
    tri: &[Vec3; 3],
    target: &Vec3,
    opts: &QuadratureOptions,
    mut f: impl FnMut(Node),
) {
    let identity = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut stack: Vec<([Vec3; 3], [[f64; 3]; 3], u32)> = vec![(*tri, identity, 0)];
    while let Some((t, b, depth)) = stack.pop() {
        let centroid = (t[0] + t[1] + t[2]) / 3.0;
        let diam = (t[1] - t[0])
            .norm()
            .max((t[2] - t[1]).norm())
            .max((t[0] - t[2]).norm());
        let ratio = (target - centroid).norm() / diam;
        let area = 0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm();
        if ratio >= opts.far_ratio {
            apply_rule(&CENTROID, &t, &b, area, &mut f);
        } else if ratio >= opts.near_ratio || depth >= opts.max_depth {
            apply_rule(&SEVEN_POINT, &t, &b, area, &mut f);
        } else {
            let m01 = (t[0] + t[1]) * 0.5;
            let m12 = (t[1] + t[2]) * 0.5;
            let m20 = (t[2] + t[0]) * 0.5;
            let bm = |i: usize, j: usize| -> [f64; 3] {
                std::array::from_fn(|k| 0.5 * (b[i][k] + b[j][k]))
            };
            let (b01, b12, b20) = (bm(0, 1), bm(1, 2), bm(2, 0));
            stack.push(([t[0], m01, m20], [b[0], b01, b20], depth + 1));
            stack.push(([m01, t[1], m12], [b01, b[1], b12], depth + 1));
            stack.push(([m20, m12, t[2]], [b20, b12, b[2]], depth + 1));
            stack.push(([m01, m12, m20], [b01, b12, b20], depth + 1));
        }
    }
}

/// Seven-point rule on a whole triangle, for integrands smooth over it.
pub fn integrate_smooth(tri: &[Vec3; 3], mut f: impl FnMut(Node)) {
    let identity = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let area = 0.5 * (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm();
    apply_rule(&SEVEN_POINT, tri, &identity, area, &mut f);
}

/// Polar rule about a point `x0` inside the triangle, given by its barycentric
/// coordinates. The triangle is split into three sub-triangles with apex at
/// `x0`; the radial Jacobian cancels a `1/r` singularity at the apex.
pub fn integrate_singular(tri: &[Vec3; 3], x0_bary: [f64; 3], order: usize, mut f: impl FnMut(Node)) {
    let gl = gauss_legendre_unit(order);
    let x0 = tri[0] * x0_bary[0] + tri[1] * x0_bary[1] + tri[2] * x0_bary[2];
    for e in 0..3 {
        let (i, j) = (e, (e + 1) % 3);
        let a = tri[i] - x0;
        let b = tri[j] - tri[i];
        let twice_area = a.cross(&b).norm();
        if twice_area <= 0.0 {
            continue;
        }
        for &(s, ws) in gl {
            for &(t, wt) in gl {
                let point = x0 + (a + b * t) * s;
                let mut bary = x0_bary.map(|v| v * (1.0 - s));
                bary[i] += s * (1.0 - t);
                bary[j] += s * t;
                f(Node {
                    point,
                    weight: ws * wt * twice_area * s,
                    bary,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> [Vec3; 3] {
        [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.1, 0.0),
            Vec3::new(0.2, 0.8, 0.3),
        ]
    }

    fn area(t: &[Vec3; 3]) -> f64 {
        0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm()
    }

    #[test]
    fn seven_point_rule_is_degree_five() {
        let t = [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let mut sum = 0.0;
        apply_rule(&SEVEN_POINT, &t, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], 0.5, &mut |n| {
            sum += n.weight * n.point.x.powi(3) * n.point.y.powi(2)
        });
        // ∫ x³y² over the unit simplex = 3!·2!/7!
        assert!((sum - 12.0 / 5040.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_integrates_area_and_barycentrics() {
        let t = tri();
        let target = Vec3::new(0.3, 0.3, 0.05);
        let mut a = 0.0;
        let mut moments = [0.0; 3];
        integrate_adaptive(&t, &target, &QuadratureOptions::default(), |n| {
            a += n.weight;
            for (m, b) in moments.iter_mut().zip(n.bary) {
                *m += n.weight * b;
            }
            let p = t[0] * n.bary[0] + t[1] * n.bary[1] + t[2] * n.bary[2];
            assert!((p - n.point).norm() < 1e-13);
        });
        assert!((a - area(&t)).abs() < 1e-13);
        for m in moments {
            assert!((m - area(&t) / 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_rule_handles_inverse_distance() {
        // Reference: refined adaptive rule at lifted targets, extrapolated to the plane.
        let t = tri();
        let bary = [0.3, 0.45, 0.25];
        let x0 = t[0] * bary[0] + t[1] * bary[1] + t[2] * bary[2];
        let mut polar = 0.0;
        integrate_singular(&t, bary, 16, |n| polar += n.weight / (n.point - x0).norm());
        let normal = (t[1] - t[0]).cross(&(t[2] - t[0])).normalize();
        let mut lifted = [0.0; 2];
        for (k, eps) in [1e-4, 2e-4].iter().enumerate() {
            let opts = QuadratureOptions {
                far_ratio: 40.0,
                near_ratio: 20.0,
                max_depth: 30,
                singular_order: 8,
            };
            integrate_adaptive(&t, &(x0 + normal * *eps), &opts, |n| {
                lifted[k] += n.weight / (n.point - x0 - normal * *eps).norm()
            });
        }
        let extrapolated = 2.0 * lifted[0] - lifted[1];
        assert!((polar - extrapolated).abs() / polar < 1e-6, "{polar} {extrapolated}");
        let mut a = 0.0;
        integrate_singular(&t, bary, 6, |n| a += n.weight);
        assert!((a - area(&t)).abs() < 1e-14);
    }
}
