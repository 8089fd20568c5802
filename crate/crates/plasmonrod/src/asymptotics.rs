//! Quasi-static approximations of densities and fields, the straight-rod amplitude
//! profile and blowup-scaling predictions.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::geometry::{CenterlineCurve, Region, SurfaceMesh, Vec3};
use crate::linalg::{to_complex, LuSolver};
use crate::operators::{K0Blocks, StaticOperators};
use crate::solver::single_layer_at;
use crate::spectral::{lambda_of, tau_values, K0Spectrum, NPSpectrum, ResonanceParams, ETA0};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Where the expansion lives.
#[derive(Clone, Debug)]
pub enum ModelKind {
    /// Physical spectrum at finite radius; fields use the static single layer over the
    /// whole boundary and carry no explicit radius factor.
    FullRod,
    /// Spectrum of the limit operator on the unit-radius reference rod; fields use the
    /// cap moments collapsed onto the endpoints and are scaled by `delta^2`.
    Limit { curve: CenterlineCurve },
}

/// Precomputed couplings and moments of a spectrum for one incident direction.
#[derive(Clone, Debug)]
pub struct QuasiStaticModel {
    pub kind: ModelKind,
    pub mesh: SurfaceMesh,
    pub spectrum: NPSpectrum,
    pub params: ResonanceParams,
    /// `c_j = <d.nu, phi_j>` in the Gram matrix of the spectrum.
    pub coupling: Vec<C64>,
    pub moment_a: Vec<C64>,
    pub moment_b: Vec<C64>,
    /// Per mode `d lambda_j / d delta`; zero unless set by [`QuasiStaticModel::with_lambda_slope`].
    pub lambda_slope: Vec<f64>,
    pub eps_c: C64,
    pub eps_m: f64,
    pub mu_m: f64,
    pub amplitude: C64,
    pub direction: Vec3,
}

fn d_dot_nu(mesh: &SurfaceMesh, d: &Vec3) -> Vec<f64> {
    mesh.panels.iter().map(|p| d.dot(&p.normal)).collect()
}

impl QuasiStaticModel {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        kind: ModelKind,
        mesh: &SurfaceMesh,
        spectrum: NPSpectrum,
        coupling: Vec<f64>,
        eps_c: C64,
        eps_m: f64,
        mu_m: f64,
        direction: Vec3,
        amplitude: C64,
    ) -> Result<Self> {
        if ((direction.norm() - 1.0).abs()) > 1e-12 {
            return Err(Error::InvalidArgument("direction must be a unit vector".into()));
        }
        let params = tau_values(&spectrum.lambdas, eps_c, eps_m, ETA0)?;
        let m = spectrum.len();
        let moment_a = (0..m)
            .map(|j| C64::new(spectrum.region_moment(j, mesh, Region::CapA), 0.0))
            .collect();
        let moment_b = (0..m)
            .map(|j| C64::new(spectrum.region_moment(j, mesh, Region::CapB), 0.0))
            .collect();
        Ok(QuasiStaticModel {
            kind,
            mesh: mesh.clone(),
            spectrum,
            params,
            coupling: coupling.into_iter().map(|c| C64::new(c, 0.0)).collect(),
            moment_a,
            moment_b,
            lambda_slope: vec![0.0; m],
            eps_c,
            eps_m,
            mu_m,
            amplitude,
            direction,
        })
    }

    /// Model on the physical rod, paired in the full-boundary Gram matrix.
    #[allow(clippy::too_many_arguments)]
    pub fn full_rod(
        mesh: &SurfaceMesh,
        ops: &StaticOperators,
        spectrum: NPSpectrum,
        eps_c: C64,
        eps_m: f64,
        mu_m: f64,
        direction: Vec3,
        amplitude: C64,
    ) -> Result<Self> {
        let dn = d_dot_nu(mesh, &direction);
        let coupling = (0..spectrum.len())
            .map(|j| ops.gram.inner(&dn, &spectrum.eigfunc(j)))
            .collect();
        Self::assemble(ModelKind::FullRod, mesh, spectrum, coupling, eps_c, eps_m, mu_m, direction, amplitude)
    }

    /// Model on the reference rod from the limit spectrum, paired in the cap Gram matrix.
    #[allow(clippy::too_many_arguments)]
    pub fn limit(
        reference: &SurfaceMesh,
        curve: &CenterlineCurve,
        blocks: &K0Blocks,
        k0: &K0Spectrum,
        eps_c: C64,
        eps_m: f64,
        mu_m: f64,
        direction: Vec3,
        amplitude: C64,
    ) -> Result<Self> {
        let dn = d_dot_nu(reference, &direction);
        let caps = &blocks.caps;
        let dn_caps: Vec<f64> = caps.iter().map(|&i| dn[i]).collect();
        let spectrum = k0.spectrum.clone();
        let coupling = (0..spectrum.len())
            .map(|j| {
                let phi: Vec<f64> = caps.iter().map(|&i| spectrum.eigfuncs[(i, j)]).collect();
                blocks.cap_gram.inner(&dn_caps, &phi)
            })
            .collect();
        Self::assemble(
            ModelKind::Limit { curve: curve.clone() },
            reference,
            spectrum,
            coupling,
            eps_c,
            eps_m,
            mu_m,
            direction,
            amplitude,
        )
    }

    /// Sets the first-order radius dependence of the eigenvalues.
    pub fn with_lambda_slope(mut self, slope: Vec<f64>) -> Result<Self> {
        if slope.len() != self.spectrum.len() {
            return Err(Error::InvalidArgument("one slope per mode is required".into()));
        }
        self.lambda_slope = slope;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.spectrum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectrum.is_empty()
    }

    /// Nontrivial mode with the largest `|c_j|^2 / a_j`.
    pub fn dominant_mode(&self) -> Option<usize> {
        (1..self.len()).max_by(|&a, &b| {
            let w = |j: usize| self.coupling[j].norm_sqr() / self.spectrum.norms[j];
            w(a).total_cmp(&w(b))
        })
    }

    /// All nontrivial modes.
    pub fn all_modes(&self) -> Vec<usize> {
        (1..self.len()).collect()
    }

    /// `lambda(eps_m/eps_c) - lambda_j - delta * slope_j`.
    pub fn denominators(&self, delta: f64, modes: &[usize]) -> Result<Vec<C64>> {
        let lt = lambda_of(C64::new(self.eps_m, 0.0) / self.eps_c);
        modes
            .iter()
            .map(|&j| {
                self.check_mode(j)?;
                let d = lt - self.spectrum.lambdas[j] - delta * self.lambda_slope[j];
                if d == C64::new(0.0, 0.0) || !d.is_finite() {
                    return Err(Error::LosslessResonance(j));
                }
                Ok(d)
            })
            .collect()
    }

    fn check_mode(&self, j: usize) -> Result<()> {
        if j == 0 || j >= self.len() {
            return Err(Error::InvalidArgument(format!("mode {j} is not a nontrivial mode")));
        }
        Ok(())
    }

    /// Per-mode weights `i omega pref c_j / (a_j denom_j)`, times the amplitude.
    fn weights(&self, omega: f64, delta: f64, modes: &[usize], prefactor: f64) -> Result<Vec<C64>> {
        let den = self.denominators(delta, modes)?;
        Ok(modes
            .iter()
            .zip(den)
            .map(|(&j, d)| I * omega * prefactor * self.amplitude * self.coupling[j] / (self.spectrum.norms[j] * d))
            .collect())
    }

    fn combine(&self, modes: &[usize], w: &[C64]) -> Vec<C64> {
        let n = self.spectrum.eigfuncs.nrows();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (&j, &c) in modes.iter().zip(w) {
            for (i, o) in out.iter_mut().enumerate() {
                *o += c * self.spectrum.eigfuncs[(i, j)];
            }
        }
        out
    }

    fn evaluate(&self, density: &[C64], delta: f64, x: &Vec3) -> C64 {
        match &self.kind {
            ModelKind::FullRod => single_layer_at(&self.mesh, C64::new(0.0, 0.0), density, x).0,
            ModelKind::Limit { curve } => {
                let (mut ma, mut mb) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
                for (p, v) in self.mesh.panels.iter().zip(density) {
                    match p.region {
                        Region::CapA => ma += v * p.area,
                        Region::CapB => mb += v * p.area,
                        Region::Facade => {}
                    }
                }
                let g = |e: &Vec3| -1.0 / (4.0 * PI * (x - e).norm());
                (ma * g(&curve.p0) + mb * g(&curve.q0)) * delta * delta
            }
        }
    }

    fn inside(&self, delta: f64, x: &Vec3) -> bool {
        match &self.kind {
            ModelKind::FullRod => self.mesh.winding_number(x) > 0.5,
            ModelKind::Limit { curve } => curve.distance(x, delta + 1.0) < delta,
        }
    }
}

/// Leading-order exterior density on the model mesh.
pub fn psi_quasistatic(model: &QuasiStaticModel, omega: f64, modes: &[usize]) -> Result<Vec<C64>> {
    let contrast = 1.0 / model.eps_c - 1.0 / model.eps_m;
    let k = omega * (model.mu_m * model.eps_m).sqrt();
    let mut w = Vec::with_capacity(modes.len());
    for &j in modes {
        model.check_mode(j)?;
        let t = model.params.tau[j];
        if t == C64::new(0.0, 0.0) {
            return Err(Error::LosslessResonance(j));
        }
        w.push(I * k * model.amplitude * contrast * model.coupling[j] / (model.spectrum.norms[j] * t));
    }
    Ok(model.combine(modes, &w))
}

/// Leading-order scattered field at exterior points.
pub fn us_asymptotic(
    model: &QuasiStaticModel,
    omega: f64,
    delta: f64,
    modes: &[usize],
    points: &[Vec3],
) -> Result<Vec<C64>> {
    field_sum(model, omega, delta, modes, points, (model.mu_m * model.eps_m).sqrt(), false)
}

/// Leading-order interior field at points inside the rod.
pub fn u_interior_asymptotic(
    model: &QuasiStaticModel,
    omega: f64,
    delta: f64,
    modes: &[usize],
    points: &[Vec3],
) -> Result<Vec<C64>> {
    field_sum(model, omega, delta, modes, points, (model.mu_m / model.eps_m).sqrt(), true)
}

fn field_sum(
    model: &QuasiStaticModel,
    omega: f64,
    delta: f64,
    modes: &[usize],
    points: &[Vec3],
    prefactor: f64,
    interior: bool,
) -> Result<Vec<C64>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    for x in points {
        if model.inside(delta, x) != interior {
            return Err(Error::InvalidArgument(format!(
                "point ({}, {}, {}) is {} the rod",
                x.x,
                x.y,
                x.z,
                if interior { "outside" } else { "inside" }
            )));
        }
    }
    let w = model.weights(omega, delta, modes, prefactor)?;
    let density = model.combine(modes, &w);
    Ok(points.iter().map(|x| model.evaluate(&density, delta, x)).collect())
}

/// The constant `c` with `S^{-1}[1] = c phi_0`, from the projection of the discrete
/// `S^{-1}[1]` onto mode 0.
pub fn s_inverse_constant(ops: &StaticOperators, spectrum: &NPSpectrum) -> Result<f64> {
    let lu = LuSolver::new(&to_complex(&ops.s))?;
    let x: Vec<f64> = lu.solve(&vec![C64::new(1.0, 0.0); ops.len()]).iter().map(|z| z.re).collect();
    Ok(ops.gram.inner(&x, &spectrum.eigfunc(0)) / spectrum.norms[0])
}

/// Slope of each eigenvalue between two radii; modes are paired by index.
pub fn lambda_slope(delta_a: f64, lambdas_a: &[f64], delta_b: f64, lambdas_b: &[f64]) -> Result<Vec<f64>> {
    if delta_a == delta_b {
        return Err(Error::InvalidArgument("radii must differ".into()));
    }
    Ok(lambdas_a
        .iter()
        .zip(lambdas_b)
        .map(|(a, b)| (a - b) / (delta_a - delta_b))
        .collect())
}

/// `|x - P0| + |x - Q0|` on the surface of a straight rod with hemispherical caps,
/// written branchwise.
pub fn p_straight(x: &Vec3, l: f64, delta: f64, p0: &Vec3, q0: &Vec3) -> Result<f64> {
    if !(l > 0.0 && delta > 0.0) || ((q0 - p0).norm() - l).abs() > 1e-9 * (1.0 + l) {
        return Err(Error::InvalidArgument("inconsistent rod length or radius".into()));
    }
    let tol = 1e-9 * (1.0 + l + delta);
    let e = (q0 - p0) / l;
    let mid = (p0 + q0) * 0.5;
    let s = (x - mid).dot(&e);
    let radial = ((x - mid) - e * s).norm();
    if s.abs() <= l / 2.0 + tol && (radial - delta).abs() <= tol {
        let li = s.abs();
        return Ok(((l / 2.0 - li).powi(2) + delta * delta).sqrt() + ((l / 2.0 + li).powi(2) + delta * delta).sqrt());
    }
    let (end, other) = if s < 0.0 { (p0, q0) } else { (q0, p0) };
    if ((x - end).norm() - delta).abs() <= tol && (x - end).dot(&(end - other)) >= -tol {
        let arg = delta * delta + l * l + 2.0 * (x - end).dot(&(end - other));
        return Ok(delta + arg.max(0.0).sqrt());
    }
    Err(Error::OutsideRod {
        distance: radial,
        radius: delta,
    })
}

/// Dominant and subdominant magnitudes of the gradient lower bound at a resonance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingPrediction {
    /// `|rho|^{-1} omega`.
    pub dominant: f64,
    /// `|rho|^{-1} omega^2`.
    pub second: f64,
    /// `omega^{1/2}`.
    pub half: f64,
    /// `|rho|^{-1} omega^2 delta`.
    pub guard: f64,
    pub in_regime: bool,
}

/// Default regime constant for [`blowup_scaling_prediction`].
pub const C1: f64 = 0.1;

pub fn blowup_scaling_prediction(omega: f64, rho: f64, delta: f64) -> Result<ScalingPrediction> {
    blowup_scaling_prediction_with(omega, rho, delta, C1)
}

pub fn blowup_scaling_prediction_with(omega: f64, rho: f64, delta: f64, c1: f64) -> Result<ScalingPrediction> {
    if !(omega > 0.0 && delta > 0.0) || rho == 0.0 || !rho.is_finite() {
        return Err(Error::InvalidArgument("need omega > 0, delta > 0 and rho != 0".into()));
    }
    let r = rho.abs();
    let guard = omega * omega * delta / r;
    Ok(ScalingPrediction {
        dominant: omega / r,
        second: omega * omega / r,
        half: omega.sqrt(),
        guard,
        in_regime: guard <= c1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{blowup_mesh, build_centerline, build_rod_mesh, CurveKind, RodSpec};
    use crate::operators::assemble_k0_blocks;
    use crate::spectral::{k0_spectrum, np_spectrum};

    fn rod(delta: f64) -> (RodSpec, SurfaceMesh) {
        let c = build_centerline(&CurveKind::Straight { length: 4.0 }).unwrap();
        let spec = RodSpec::new(c, delta, 12, 8);
        let mesh = build_rod_mesh(&spec).unwrap();
        (spec, mesh)
    }

    fn full_model(eps_c: C64) -> QuasiStaticModel {
        let (_, mesh) = rod(0.4);
        let ops = StaticOperators::new(&mesh).unwrap();
        let sp = np_spectrum(&ops, 40).unwrap();
        QuasiStaticModel::full_rod(&mesh, &ops, sp, eps_c, 1.0, 1.0, Vec3::new(1.0, 0.0, 0.0), C64::new(1.0, 0.0))
            .unwrap()
    }

    #[test]
    fn p_extrema_match_closed_form() {
        let (l, d) = (4.0, 0.25);
        let p0 = Vec3::new(0.0, 0.0, -2.0);
        let q0 = Vec3::new(0.0, 0.0, 2.0);
        let tip = p_straight(&Vec3::new(0.0, 0.0, 2.25), l, d, &p0, &q0).unwrap();
        assert!((tip - 4.5).abs() < 1e-12);
        let tip_a = p_straight(&Vec3::new(0.0, 0.0, -2.25), l, d, &p0, &q0).unwrap();
        assert!((tip_a - 4.5).abs() < 1e-12);
        let mid = p_straight(&Vec3::new(0.25, 0.0, 0.0), l, d, &p0, &q0).unwrap();
        assert!((mid - 16.25f64.sqrt()).abs() < 1e-12);
        assert!((2.0 * (4.0f64 + 1.0 / 16.0).sqrt() - 16.25f64.sqrt()).abs() < 1e-12);
        assert!(p_straight(&Vec3::new(1.0, 0.0, 0.0), l, d, &p0, &q0).is_err());
    }

    #[test]
    fn p_branches_agree_at_the_junction() {
        let p0 = Vec3::new(0.0, 0.0, -2.0);
        let q0 = Vec3::new(0.0, 0.0, 2.0);
        let x = Vec3::new(0.25, 0.0, 2.0);
        let direct = (x - p0).norm() + (x - q0).norm();
        assert!((p_straight(&x, 4.0, 0.25, &p0, &q0).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn lambda_of_examples() {
        assert!(lambda_of(C64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!(lambda_of(C64::new(1.0, 0.0) / C64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!(!lambda_of(C64::new(1.0, 0.0)).is_finite());
    }

    #[test]
    fn transparent_contrast_gives_zero() {
        let m = full_model(C64::new(1.0, 0.0));
        let modes = m.all_modes();
        let psi = psi_quasistatic(&m, 0.02, &modes).unwrap();
        assert!(psi.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn density_is_linear_in_omega() {
        let m = full_model(C64::new(-3.0, 0.5));
        let modes = m.all_modes();
        let a = psi_quasistatic(&m, 0.02, &modes).unwrap();
        let b = psi_quasistatic(&m, 0.01, &modes).unwrap();
        let na: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((na / nb - 2.0).abs() < 1e-12);
    }

    #[test]
    fn interior_and_exterior_share_denominators() {
        let m = full_model(C64::new(-3.0, 0.5));
        let modes = m.all_modes();
        let a = m.weights(0.02, 0.4, &modes, (m.mu_m * m.eps_m).sqrt()).unwrap();
        let b = m.weights(0.02, 0.4, &modes, (m.mu_m / m.eps_m).sqrt()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y * m.eps_m).norm() <= 1e-14 * x.norm());
        }
        assert!(us_asymptotic(&m, 0.02, 0.4, &modes, &[Vec3::zeros()]).is_err());
        assert!(u_interior_asymptotic(&m, 0.02, 0.4, &modes, &[Vec3::new(5.0, 0.0, 0.0)]).is_err());
        assert!(u_interior_asymptotic(&m, 0.02, 0.4, &modes, &[Vec3::zeros()]).is_ok());
    }

    #[test]
    fn mode_zero_is_rejected() {
        let m = full_model(C64::new(-3.0, 0.5));
        assert!(psi_quasistatic(&m, 0.02, &[0]).is_err());
    }

    #[test]
    fn limit_model_collapses_and_scales() {
        let (spec, mesh) = rod(0.1);
        let reference = blowup_mesh(&mesh, &spec);
        let blocks = assemble_k0_blocks(&reference, &spec.curve, 1.0).unwrap();
        let k0 = k0_spectrum(&blocks, &reference, 20).unwrap();
        let m = QuasiStaticModel::limit(
            &reference,
            &spec.curve,
            &blocks,
            &k0,
            C64::new(-3.0, 0.5),
            1.0,
            1.0,
            Vec3::new(0.0, 0.0, 1.0),
            C64::new(1.0, 0.0),
        )
        .unwrap();
        for j in 0..m.len() {
            let (a, b) = (m.moment_a[j].norm(), m.moment_b[j].norm());
            assert!((a - b).abs() <= 1e-6 * a.max(b) + 1e-12, "mode {j}: {a} vs {b}");
        }
        let x = [Vec3::new(3.0, 1.0, 7.0)];
        let modes = m.all_modes();
        let u1 = us_asymptotic(&m, 0.02, 0.1, &modes, &x).unwrap()[0];
        let u2 = us_asymptotic(&m, 0.02, 0.05, &modes, &x).unwrap()[0];
        assert!(((u1 / u2).norm() - 4.0).abs() < 1e-10);
    }

    #[test]
    fn scaling_prediction_exponents() {
        let p = |w: f64| blowup_scaling_prediction(w, w * w, 0.01).unwrap().dominant;
        assert!((p(0.01) / p(0.02) - 2.0).abs() < 1e-12);
        let q = |w: f64| blowup_scaling_prediction(w, w, 0.01).unwrap().dominant;
        assert!((q(0.01) - q(0.02)).abs() < 1e-12);
        let g = blowup_scaling_prediction(0.1, 1e-3, 0.1).unwrap();
        assert!((g.guard - 1.0).abs() < 1e-12 && !g.in_regime);
    }

    #[test]
    fn s_inverse_of_one_is_mode_zero() {
        let (_, mesh) = rod(0.4);
        let ops = StaticOperators::new(&mesh).unwrap();
        let sp = np_spectrum(&ops, 10).unwrap();
        let c = s_inverse_constant(&ops, &sp).unwrap();
        let lu = LuSolver::new(&to_complex(&ops.s)).unwrap();
        let x: Vec<f64> = lu.solve(&vec![C64::new(1.0, 0.0); ops.len()]).iter().map(|z| z.re).collect();
        let phi0 = sp.eigfunc(0);
        let r: Vec<f64> = x.iter().zip(&phi0).map(|(a, b)| a - c * b).collect();
        assert!(ops.gram.inner(&r, &r).sqrt() < 1e-8 * ops.gram.inner(&x, &x).sqrt());
    }
}
