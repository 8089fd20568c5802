//! Helmholtz and Laplace kernels with the `-e^{ikr}/(4 pi r)` sign convention.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Material parameters and derived wavenumbers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wavenumbers {
    pub omega: f64,
    pub eps_c: C64,
    pub mu_c: C64,
    pub eps_m: f64,
    pub mu_m: f64,
    pub k_c: C64,
    pub k_m: C64,
}

/// Square root with nonnegative imaginary part.
pub fn passive_sqrt(z: C64) -> C64 {
    let r = z.sqrt();
    if r.im < 0.0 {
        -r
    } else {
        r
    }
}

impl Wavenumbers {
    pub fn new(omega: f64, eps_c: C64, mu_c: C64, eps_m: f64, mu_m: f64) -> Result<Self> {
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::InvalidArgument(format!("omega must be nonnegative, got {omega}")));
        }
        if !(eps_m > 0.0 && mu_m > 0.0) {
            return Err(Error::InvalidArgument("eps_m and mu_m must be positive".into()));
        }
        if eps_c == C64::new(0.0, 0.0) {
            return Err(Error::InvalidArgument("eps_c must be nonzero".into()));
        }
        Ok(Wavenumbers {
            omega,
            eps_c,
            mu_c,
            eps_m,
            mu_m,
            k_c: passive_sqrt(eps_c * mu_c) * omega,
            k_m: C64::new((eps_m * mu_m).sqrt() * omega, 0.0),
        })
    }

    /// Unit background with `mu_c = 1`.
    pub fn simple(omega: f64, eps_c: C64) -> Result<Self> {
        Self::new(omega, eps_c, C64::new(1.0, 0.0), 1.0, 1.0)
    }
}

#[inline]
pub(crate) fn green_r(k: C64, r: f64) -> C64 {
    -(I * k * r).exp() / (4.0 * PI * r)
}

/// `(e^z - 1) / z`, accurate for small `|z|`.
#[inline]
pub(crate) fn expm1_over(z: C64) -> C64 {
    if z.norm() < 0.5 {
        let mut term = C64::new(1.0, 0.0);
        let mut sum = term;
        for n in 2..30 {
            term *= z / n as f64;
            sum += term;
            if term.norm() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `G^k(r) - G^0(r)`; finite at `r = 0` where it equals `-ik/(4 pi)`.
#[inline]
pub(crate) fn green_smooth_r(k: C64, r: f64) -> C64 {
    -I * k * expm1_over(I * k * r) / (4.0 * PI)
}

/// Radial derivative of [`green_smooth_r`]; finite at `r = 0` where it equals `k^2/(8 pi)`.
#[inline]
pub(crate) fn green_smooth_dr(k: C64, r: f64) -> C64 {
    let ik = I * k;
    let z = ik * r;
    if z.norm() < 0.5 {
        // (z e^z - e^z + 1) / z^2 = sum_{n>=2} (n-1) z^{n-2} / n!
        let mut pow = C64::new(0.5, 0.0);
        let mut sum = pow;
        for n in 3..30 {
            pow *= z / n as f64;
            let add = pow * (n as f64 - 1.0);
            sum += add;
            if add.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        -ik * ik * sum / (4.0 * PI)
    } else {
        -(z * z.exp() - z.exp() + 1.0) / (4.0 * PI * r * r)
    }
}

/// `-e^{ik|x-y|}/(4 pi |x-y|)`.
pub fn green(k: C64, x: &Vec3, y: &Vec3) -> Result<C64> {
    let r = (x - y).norm();
    if r == 0.0 {
        return Err(Error::Singular);
    }
    Ok(green_r(k, r))
}

#[inline]
pub(crate) fn grad_green_unchecked(k: C64, d: &Vec3, r: f64) -> [C64; 3] {
    let f = (I * k - 1.0 / r) * green_r(k, r) / r;
    [f * d.x, f * d.y, f * d.z]
}

/// Gradient of [`green`] with respect to `x`.
pub fn grad_green_x(k: C64, x: &Vec3, y: &Vec3) -> Result<[C64; 3]> {
    let d = x - y;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::Singular);
    }
    Ok(grad_green_unchecked(k, &d, r))
}

fn factorial(j: usize) -> f64 {
    (1..=j).map(|v| v as f64).product()
}

#[inline]
pub(crate) fn i_pow(j: usize) -> C64 {
    match j % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

#[inline]
pub(crate) fn series_s_coeff(j: usize) -> C64 {
    -i_pow(j) / (4.0 * PI * factorial(j))
}

#[inline]
pub(crate) fn series_k_coeff(j: usize) -> C64 {
    -i_pow(j) * (j as f64 - 1.0) / (4.0 * PI * factorial(j))
}

/// Coefficient of `k^j` in the expansion of the single-layer kernel.
pub fn series_s_term(j: usize, x: &Vec3, y: &Vec3) -> Result<C64> {
    if j == 0 {
        return Err(Error::InvalidArgument("series index must be >= 1".into()));
    }
    let r = (x - y).norm();
    Ok(series_s_coeff(j) * r.powi(j as i32 - 1))
}

/// Coefficient of `k^j` in the expansion of the NP adjoint kernel.
pub fn series_k_term(j: usize, x: &Vec3, y: &Vec3, nu_x: &Vec3) -> Result<C64> {
    if j == 0 {
        return Err(Error::InvalidArgument("series index must be >= 1".into()));
    }
    if j == 1 {
        return Ok(C64::new(0.0, 0.0));
    }
    let d = x - y;
    let r = d.norm();
    if r == 0.0 {
        if j <= 2 {
            return Err(Error::Singular);
        }
        return Ok(C64::new(0.0, 0.0));
    }
    Ok(series_k_coeff(j) * r.powi(j as i32 - 3) * d.dot(nu_x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_value() {
        let g = green(C64::new(0.0, 0.0), &Vec3::zeros(), &Vec3::x()).unwrap();
        assert!((g.re + 1.0 / (4.0 * PI)).abs() < 1e-16);
        let g2 = green(C64::new(2.0 * PI, 0.0), &Vec3::zeros(), &Vec3::x()).unwrap();
        assert!((g2 - g).norm() < 1e-15);
        let g3 = green(C64::new(0.0, 0.0), &Vec3::zeros(), &(Vec3::x() * 2.0)).unwrap();
        assert!((g3.re + 1.0 / (8.0 * PI)).abs() < 1e-16);
        assert!(green(C64::new(1.0, 0.0), &Vec3::x(), &Vec3::x()).is_err());
    }

    #[test]
    fn passive_branch() {
        let w = Wavenumbers::simple(0.5, C64::new(-1.0, 0.1)).unwrap();
        assert!(w.k_c.im >= 0.0);
        assert!((w.k_c * w.k_c - C64::new(-1.0, 0.1) * 0.25).norm() < 1e-14);
        assert!(Wavenumbers::new(1.0, C64::new(1.0, 0.0), C64::new(1.0, 0.0), -1.0, 1.0).is_err());
    }

    #[test]
    fn smooth_parts_match_direct_difference() {
        let k = C64::new(0.7, 0.2);
        for &r in &[1e-3, 0.1, 0.6, 2.0, 5.0] {
            let direct = green_r(k, r) - green_r(C64::new(0.0, 0.0), r);
            assert!((green_smooth_r(k, r) - direct).norm() < 1e-12);
            let h = 1e-6 * r.max(1e-2);
            let fd = (green_smooth_r(k, r + h) - green_smooth_r(k, r - h)) / (2.0 * h);
            assert!((green_smooth_dr(k, r) - fd).norm() < 1e-6);
        }
        let g0 = green_smooth_dr(k, 0.0);
        assert!((g0 - k * k / (8.0 * PI)).norm() < 1e-12);
    }

    #[test]
    fn series_examples() {
        let x = Vec3::zeros();
        let y = Vec3::x();
        let s1 = series_s_term(1, &x, &y).unwrap();
        assert!((s1 - C64::new(0.0, -1.0 / (4.0 * PI))).norm() < 1e-16);
        let s2 = series_s_term(2, &x, &y).unwrap();
        assert!((s2 - C64::new(1.0 / (8.0 * PI), 0.0)).norm() < 1e-16);
        assert!(series_s_term(0, &x, &y).is_err());
        let nu = -Vec3::x();
        let k2 = series_k_term(2, &x, &y, &nu).unwrap();
        assert!((k2 - C64::new(1.0 / (8.0 * PI), 0.0)).norm() < 1e-16);
        assert_eq!(series_k_term(1, &x, &y, &nu).unwrap(), C64::new(0.0, 0.0));
        assert!(series_k_term(2, &x, &x, &nu).is_err());
    }
}
