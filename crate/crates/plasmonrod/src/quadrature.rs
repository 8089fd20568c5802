//! Triangle quadrature and closed-form Laplace integrals over flat panels.

use crate::geometry::{Panel, Vec3};

/// Near-field threshold in units of the source panel diameter.
pub const NEAR_FACTOR: f64 = 2.0;

const A1: f64 = 0.059_715_871_789_770;
const B1: f64 = 0.470_142_064_105_115;
const W1: f64 = 0.132_394_152_788_506;
const A2: f64 = 0.797_426_985_353_087;
const B2: f64 = 0.101_286_507_323_456;
const W2: f64 = 0.125_939_180_544_827;

/// Degree-5 seven-point rule: barycentric coordinates and weights summing to one.
pub const DUNAVANT7: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([A1, B1, B1], W1),
    ([B1, A1, B1], W1),
    ([B1, B1, A1], W1),
    ([A2, B2, B2], W2),
    ([B2, A2, B2], W2),
    ([B2, B2, A2], W2),
];

/// Quadrature nodes on a panel with weights scaled by its area.
pub fn panel_rule(p: &Panel) -> [(Vec3, f64); 7] {
    DUNAVANT7.map(|(b, w)| {
        (
            p.vertices[0] * b[0] + p.vertices[1] * b[1] + p.vertices[2] * b[2],
            w * p.area,
        )
    })
}

#[inline]
pub fn is_near(x: &Vec3, p: &Panel) -> bool {
    (x - p.centroid).norm() < NEAR_FACTOR * p.diameter
}

#[inline]
fn edge_log(rm: f64, rp: f64, lm: f64, lp: f64) -> f64 {
    // ln((R+ + l+)/(R- + l-)) written to avoid cancellation when both l are negative.
    if lp + lm >= 0.0 {
        ((rp + lp) / (rm + lm)).ln()
    } else {
        ((rm - lm) / (rp - lp)).ln()
    }
}

/// `int_T 1/|x-y| dA(y)` and its gradient in `x` for a flat triangle with unit normal `n`
/// (vertices counterclockwise about `n`). The normal component of the gradient is the
/// principal value when `x` lies in the panel plane.
pub fn laplace_triangle(v: &[Vec3; 3], n: &Vec3, x: &Vec3) -> (f64, Vec3) {
    let scale = (v[1] - v[0]).norm().max((v[2] - v[0]).norm());
    let mut h = (x - v[0]).dot(n);
    if h.abs() < 1e-14 * scale {
        h = 0.0;
    }
    let ah = h.abs();
    let mut pot = 0.0;
    let mut beta_sum = 0.0;
    let mut grad = Vec3::zeros();
    for i in 0..3 {
        let a = v[i];
        let b = v[(i + 1) % 3];
        let e = b - a;
        let len = e.norm();
        let lhat = e / len;
        let uhat = lhat.cross(n);
        let da = a - x;
        let db = b - x;
        let lm = da.dot(&lhat);
        let lp = db.dot(&lhat);
        let p0 = da.dot(&uhat);
        let rm = da.norm();
        let rp = db.norm();
        let r02 = p0 * p0 + h * h;
        let f = if r02 > 1e-28 * scale * scale || lp * lm > 0.0 {
            edge_log(rm, rp, lm, lp)
        } else {
            0.0
        };
        let beta = if ah > 0.0 || p0.abs() > 0.0 {
            (p0 * lp / (r02 + ah * rp)).atan() - (p0 * lm / (r02 + ah * rm)).atan()
        } else {
            0.0
        };
        pot += p0 * f;
        beta_sum += beta;
        grad -= uhat * f;
    }
    pot -= ah * beta_sum;
    if h != 0.0 {
        grad -= n * (h.signum() * beta_sum);
    }
    (pot, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;

    fn tri(a: Vec3, b: Vec3, c: Vec3) -> ([Vec3; 3], Vec3) {
        let n = (b - a).cross(&(c - a)).normalize();
        ([a, b, c], n)
    }

    // Brute force: recursive 4-way subdivision with the 7-point rule on each piece.
    fn brute(v: &[Vec3; 3], x: &Vec3, level: u32) -> (f64, Vec3) {
        if level == 0 {
            let area = 0.5 * (v[1] - v[0]).cross(&(v[2] - v[0])).norm();
            let mut s = 0.0;
            let mut g = Vec3::zeros();
            for (b, w) in DUNAVANT7 {
                let y = v[0] * b[0] + v[1] * b[1] + v[2] * b[2];
                let d = x - y;
                let r = d.norm();
                s += w * area / r;
                g -= d * (w * area / (r * r * r));
            }
            return (s, g);
        }
        let m01 = (v[0] + v[1]) / 2.0;
        let m12 = (v[1] + v[2]) / 2.0;
        let m20 = (v[2] + v[0]) / 2.0;
        let mut s = 0.0;
        let mut g = Vec3::zeros();
        for t in [
            [v[0], m01, m20],
            [m01, v[1], m12],
            [m20, m12, v[2]],
            [m01, m12, m20],
        ] {
            let (a, b) = brute(&t, x, level - 1);
            s += a;
            g += b;
        }
        (s, g)
    }

    // Duffy-regularized potential for a point inside the triangle plane.
    fn duffy_self(v: &[Vec3; 3], x: &Vec3) -> f64 {
        let gl: Vec<(f64, f64)> = {
            // 24-point Gauss-Legendre on [0,1] via Golub-Welsch-free Newton iteration.
            let n = 24;
            (0..n)
                .map(|i| {
                    let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                    let mut dp = 0.0;
                    for _ in 0..100 {
                        let (mut p1, mut p2) = (1.0, 0.0);
                        for j in 0..n {
                            let p3 = p2;
                            p2 = p1;
                            p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                        }
                        dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                        let dz = p1 / dp;
                        z -= dz;
                        if dz.abs() < 1e-16 {
                            break;
                        }
                    }
                    ((1.0 - z) / 2.0, 1.0 / ((1.0 - z * z) * dp * dp))
                })
                .collect()
        };
        let mut total = 0.0;
        for i in 0..3 {
            let a = v[i];
            let b = v[(i + 1) % 3];
            let jac = (a - x).cross(&(b - a)).norm();
            // Composite over 8 pieces: the integrand is analytic but peaked near the foot of x.
            for piece in 0..8 {
                for &(t, w) in &gl {
                    let t = (piece as f64 + t) / 8.0;
                    total += w / 8.0 * jac / ((a - x) + (b - a) * t).norm();
                }
            }
        }
        total
    }

    #[test]
    fn off_plane_matches_brute_force() {
        let (v, n) = tri(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.1, 0.0),
            Vec3::new(0.3, 0.8, 0.2),
        );
        for x in [
            Vec3::new(0.4, 0.3, 0.5),
            Vec3::new(-0.5, 0.2, 0.1),
            Vec3::new(2.0, 2.0, -1.0),
            Vec3::new(0.4, 0.3, -0.05),
        ] {
            let (p, g) = laplace_triangle(&v, &n, &x);
            let (pb, gb) = brute(&v, &x, 6);
            assert!((p - pb).abs() < 1e-6 * pb.abs(), "{p} {pb}");
            assert!((g - gb).norm() < 1e-5 * gb.norm(), "{g} {gb}");
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let (v, n) = tri(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.7, -0.2, 0.1),
            Vec3::new(0.1, 0.9, -0.3),
        );
        let x = Vec3::new(0.3, 0.25, 0.15);
        let (_, g) = laplace_triangle(&v, &n, &x);
        let h = 1e-6;
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            let fd = (laplace_triangle(&v, &n, &(x + e)).0 - laplace_triangle(&v, &n, &(x - e)).0)
                / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6 * g.norm());
        }
    }

    #[test]
    fn self_potential_matches_duffy() {
        let (v, n) = tri(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.2, 0.6, 0.0),
        );
        let c = (v[0] + v[1] + v[2]) / 3.0;
        let (p, g) = laplace_triangle(&v, &n, &c);
        assert!((p - duffy_self(&v, &c)).abs() < 1e-12 * p, "{p} {}", duffy_self(&v, &c));
        assert!(g.dot(&n).abs() < 1e-14);
        let off = c + Vec3::new(0.05, -0.03, 0.0);
        assert!((laplace_triangle(&v, &n, &off).0 - duffy_self(&v, &off)).abs() < 1e-11);
    }

    #[test]
    fn coplanar_outside_point() {
        let (v, n) = tri(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        );
        for x in [Vec3::new(2.0, 0.0, 0.0), Vec3::new(-1.0, -1.0, 0.0), Vec3::new(0.7, 0.7, 0.0)] {
            let (p, g) = laplace_triangle(&v, &n, &x);
            let (pb, gb) = brute(&v, &x, 6);
            assert!((p - pb).abs() < 1e-5 * pb, "{p} {pb}");
            assert!((g - gb).norm() < 1e-4 * gb.norm());
        }
    }

    #[test]
    fn rule_integrates_quintics() {
        let p = Panel {
            vertices: [Vec3::zeros(), Vec3::x(), Vec3::y()],
            centroid: Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0),
            normal: Vec3::z(),
            area: 0.5,
            region: Region::Facade,
            foot: Vec3::zeros(),
            foot_s: 0.0,
            diameter: 2f64.sqrt(),
        };
        // int x^2 y^3 over the unit simplex = 2! 3! / 7! = 12/5040
        let s: f64 = panel_rule(&p).iter().map(|(y, w)| w * y.x.powi(2) * y.y.powi(3)).sum();
        assert!((s - 12.0 / 5040.0).abs() < 1e-15);
    }
}
