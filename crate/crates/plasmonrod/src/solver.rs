//! Transmission problem, field evaluation, energies and resonance strength.

use std::io::Write;

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{classify_point, PointClass, RodSpec, SurfaceMesh, Vec3};
use crate::kernels::{grad_green_unchecked, green_r, green_smooth_dr, green_smooth_r, Wavenumbers};
use crate::linalg::{matvec, to_complex, vec_norm, LuSolver};
use crate::operators::{
    assemble_series_term, dynamic_np_adjoint, dynamic_single_layer,
    SeriesKind, StaticOperators,
};
use crate::quadrature::{laplace_triangle, panel_rule};
use crate::spectral::{resonant_permittivity_for_mode, NPSpectrum};

const I: C64 = C64 { re: 0.0, im: 1.0 };
/// Default incident amplitude.
pub const DEFAULT_AMPLITUDE: f64 = 1e3;

/// Plane wave `amplitude * exp(i k_m d.x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncidentWave {
    pub direction: Vec3,
    pub amplitude: C64,
    pub k_m: C64,
}

impl IncidentWave {
    pub fn new(direction: Vec3, amplitude: C64, k_m: C64) -> Result<Self> {
        if ((direction.norm() - 1.0).abs()) > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "direction must be a unit vector, |d| = {}",
                direction.norm()
            )));
        }
        Ok(IncidentWave {
            direction,
            amplitude,
            k_m,
        })
    }

    pub fn value(&self, x: &Vec3) -> C64 {
        self.amplitude * (I * self.k_m * self.direction.dot(x)).exp()
    }

    pub fn grad(&self, x: &Vec3) -> [C64; 3] {
        let v = self.value(x) * I * self.k_m;
        [v * self.direction.x, v * self.direction.y, v * self.direction.z]
    }

    /// `i k_m (d.nu) u^i`.
    pub fn normal_derivative(&self, x: &Vec3, nu: &Vec3) -> C64 {
        self.value(x) * I * self.k_m * self.direction.dot(nu)
    }
}

/// Interior density `phi` and exterior density `psi`.
#[derive(Clone, Debug)]
pub struct DensityPair {
    pub phi: Vec<C64>,
    pub psi: Vec<C64>,
    /// Relative residual of the block system.
    pub residual: f64,
    pub condition: f64,
}

/// Frequency-dependent operators of one material configuration.
pub struct Transmission<'a> {
    pub mesh: &'a SurfaceMesh,
    pub ops: &'a StaticOperators,
    pub material: Wavenumbers,
    pub s_c: Mat<C64>,
    pub s_m: Mat<C64>,
    pub k_c: Mat<C64>,
    pub k_m: Mat<C64>,
}

fn add_real(d: Mat<C64>, r: &Mat<f64>) -> Mat<C64> {
    Mat::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)] + r[(i, j)])
}

impl<'a> Transmission<'a> {
    pub fn new(mesh: &'a SurfaceMesh, ops: &'a StaticOperators, material: Wavenumbers) -> Self {
        let s_c = add_real(dynamic_single_layer(mesh, material.k_c), &ops.s);
        let k_c = add_real(dynamic_np_adjoint(mesh, material.k_c), &ops.k);
        let (s_m, k_m) = if material.k_m == material.k_c {
            (s_c.clone(), k_c.clone())
        } else {
            (
                add_real(dynamic_single_layer(mesh, material.k_m), &ops.s),
                add_real(dynamic_np_adjoint(mesh, material.k_m), &ops.k),
            )
        };
        Transmission {
            mesh,
            ops,
            material,
            s_c,
            s_m,
            k_c,
            k_m,
        }
    }

    pub fn len(&self) -> usize {
        self.mesh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mesh.is_empty()
    }

    fn check_wave(&self, wave: &IncidentWave) -> Result<()> {
        if (wave.k_m - self.material.k_m).norm() > 1e-12 * (1.0 + self.material.k_m.norm()) {
            return Err(Error::InvalidArgument("incident wavenumber differs from k_m".into()));
        }
        Ok(())
    }

    /// `(u^i, d_nu u^i / eps_m)` at the centroids.
    pub fn rhs(&self, wave: &IncidentWave) -> (Vec<C64>, Vec<C64>) {
        let ui = self.mesh.panels.iter().map(|p| wave.value(&p.centroid)).collect();
        let dn = self
            .mesh
            .panels
            .iter()
            .map(|p| wave.normal_derivative(&p.centroid, &p.normal) / self.material.eps_m)
            .collect();
        (ui, dn)
    }

    pub fn block_matrix(&self) -> Mat<C64> {
        let n = self.len();
        let ic = 1.0 / self.material.eps_c;
        let im = 1.0 / self.material.eps_m;
        Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => self.s_c[(i, j)],
            (true, false) => -self.s_m[(i, j - n)],
            (false, true) => {
                let d = if i - n == j { -0.5 } else { 0.0 };
                (self.k_c[(i - n, j)] + d) * ic
            }
            (false, false) => {
                let d = if i == j { 0.5 } else { 0.0 };
                -(self.k_m[(i - n, j - n)] + d) * im
            }
        })
    }

    pub fn solve(&self, wave: &IncidentWave) -> Result<DensityPair> {
        self.check_wave(wave)?;
        let n = self.len();
        let a = self.block_matrix();
        let lu = LuSolver::new(&a)?;
        let (ui, dn) = self.rhs(wave);
        let b: Vec<C64> = ui.iter().chain(dn.iter()).copied().collect();
        let x = lu.solve(&b);
        let r = matvec(&a, &x);
        let res = vec_norm(&r.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>()) / vec_norm(&b).max(f64::MIN_POSITIVE);
        Ok(DensityPair {
            phi: x[..n].to_vec(),
            psi: x[n..].to_vec(),
            residual: res,
            condition: lu.condition,
        })
    }

    /// `(1/2 - K*_c) S_c^{-1}` applied on the right of `rhs`, scaled by `1/eps_c`.
    fn interior_dtn(&self, lu_sc: &LuSolver, rhs: &Mat<C64>) -> Mat<C64> {
        let x = lu_sc.solve_mat(rhs);
        let kx = &self.k_c * &x;
        let ic = 1.0 / self.material.eps_c;
        Mat::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] * 0.5 - kx[(i, j)]) * ic)
    }

    /// `A(omega) = (1/eps_m)(1/2 + K*_m) + (1/eps_c)(1/2 - K*_c) S_c^{-1} S_m`.
    pub fn reduced_operator(&self) -> Result<(Mat<C64>, LuSolver)> {
        let n = self.len();
        let lu_sc = LuSolver::new(&self.s_c)?;
        let t = self.interior_dtn(&lu_sc, &self.s_m);
        let im = 1.0 / self.material.eps_m;
        let a = Mat::from_fn(n, n, |i, j| {
            let d = if i == j { 0.5 } else { 0.0 };
            (self.k_m[(i, j)] + d) * im + t[(i, j)]
        });
        Ok((a, lu_sc))
    }

    pub fn solve_reduced(&self, wave: &IncidentWave) -> Result<DensityPair> {
        self.check_wave(wave)?;
        let (a, lu_sc) = self.reduced_operator()?;
        let (ui, dn) = self.rhs(wave);
        let n = self.len();
        let uim = Mat::from_fn(n, 1, |i, _| ui[i]);
        let t = self.interior_dtn(&lu_sc, &uim);
        let f: Vec<C64> = (0..n).map(|i| -dn[i] - t[(i, 0)]).collect();
        let lu = LuSolver::new(&a)?;
        let psi = lu.solve(&f);
        let smpsi = matvec(&self.s_m, &psi);
        let phi = lu_sc.solve(&(0..n).map(|i| smpsi[i] + ui[i]).collect::<Vec<_>>());
        let r = matvec(&a, &psi);
        let res = vec_norm(&r.iter().zip(&f).map(|(p, q)| p - q).collect::<Vec<_>>()) / vec_norm(&f).max(f64::MIN_POSITIVE);
        Ok(DensityPair {
            phi,
            psi,
            residual: res,
            condition: lu.condition,
        })
    }
}

pub fn solve_transmission(
    mesh: &SurfaceMesh,
    ops: &StaticOperators,
    material: Wavenumbers,
    wave: &IncidentWave,
) -> Result<DensityPair> {
    Transmission::new(mesh, ops, material).solve(wave)
}

pub fn solve_reduced_psi(
    mesh: &SurfaceMesh,
    ops: &StaticOperators,
    material: Wavenumbers,
    wave: &IncidentWave,
) -> Result<Vec<C64>> {
    Ok(Transmission::new(mesh, ops, material).solve_reduced(wave)?.psi)
}

/// `A_0 = (1/2)(1/eps_m + 1/eps_c) + (1/eps_m - 1/eps_c) K*`.
pub fn a0_operator(ops: &StaticOperators, eps_c: C64, eps_m: f64) -> Mat<C64> {
    let n = ops.len();
    let ic = 1.0 / eps_c;
    let im = 1.0 / eps_m;
    Mat::from_fn(n, n, |i, j| {
        let d = if i == j { (ic + im) * 0.5 } else { C64::new(0.0, 0.0) };
        d + (im - ic) * ops.k[(i, j)]
    })
}

/// Coefficient of `omega^2` in `A(omega)`.
pub fn a2_operator(mesh: &SurfaceMesh, ops: &StaticOperators, m: &Wavenumbers) -> Result<Mat<C64>> {
    let n = ops.len();
    let k2 = assemble_series_term(SeriesKind::K, 2, mesh)?.matrix;
    let s2 = assemble_series_term(SeriesKind::S, 2, mesh)?.matrix;
    let lu = LuSolver::new(&to_complex(&ops.s))?;
    let x = lu.solve_mat(&s2);
    let kx = &to_complex(&ops.k) * &x;
    let c1 = C64::new(m.mu_m, 0.0) - m.mu_c;
    let c2 = (m.mu_c * m.eps_c * -1.0 + m.eps_m * m.mu_m) / m.eps_c;
    Ok(Mat::from_fn(n, n, |i, j| c1 * k2[(i, j)] + c2 * (x[(i, j)] * 0.5 - kx[(i, j)])))
}

/// `<A(omega) phi_j, phi_j> / a_j` in the H* pairing, for `1/eps_c = theta + i rho`.
pub fn rayleigh_quotient(
    mesh: &SurfaceMesh,
    ops: &StaticOperators,
    spectrum: &NPSpectrum,
    j: usize,
    material: Wavenumbers,
) -> Result<C64> {
    let (a, _) = Transmission::new(mesh, ops, material).reduced_operator()?;
    let phi = spectrum.eigfunc(j);
    let av = matvec(&a, &phi.iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>());
    let n = phi.len();
    let mut q = C64::new(0.0, 0.0);
    for i in 0..n {
        let mp: f64 = (0..n).map(|k| ops.gram.matrix[(i, k)] * phi[k]).sum();
        q += av[i] * mp;
    }
    Ok(q / spectrum.norms[j])
}

/// Permittivity with loss `rho` whose `theta` is moved by a secant iteration until the real
/// part of [`rayleigh_quotient`] vanishes; starts from the static resonant value.
pub fn tune_resonance(
    mesh: &SurfaceMesh,
    ops: &StaticOperators,
    spectrum: &NPSpectrum,
    j: usize,
    omega: f64,
    rho: f64,
    eps_m: f64,
) -> Result<C64> {
    let start = resonant_permittivity_for_mode(j, spectrum, eps_m, rho)?;
    let f = |theta: f64| -> Result<f64> {
        let eps_c = 1.0 / C64::new(theta, rho);
        let m = Wavenumbers::new(omega, eps_c, C64::new(1.0, 0.0), eps_m, 1.0)?;
        Ok(rayleigh_quotient(mesh, ops, spectrum, j, m)?.re)
    };
    let t0 = (1.0 / start).re;
    let mut t = [t0, t0 * (1.0 + 1e-2)];
    let mut v = [f(t[0])?, f(t[1])?];
    for _ in 0..8 {
        if v[1] == v[0] || v[1].abs() < 1e-14 {
            break;
        }
        let next = t[1] - v[1] * (t[1] - t[0]) / (v[1] - v[0]);
        t = [t[1], next];
        v = [v[1], f(next)?];
    }
    if !t[1].is_finite() {
        return Err(Error::Eigen("resonance tuning diverged".into()));
    }
    Ok(1.0 / C64::new(t[1], rho))
}

/// Field-evaluation blend zone in panel diameters: the near rule below the first value,
/// the centroid rule above the second, a quintic blend in between.
const BLEND: (f64, f64) = (2.0, 4.0);

fn smootherstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

fn near_panel(x: &Vec3, p: &crate::geometry::Panel, k: C64) -> (C64, [C64; 3]) {
    let (s0, g0) = laplace_triangle(&p.vertices, &p.normal, x);
    let c = -1.0 / (4.0 * std::f64::consts::PI);
    let mut sv = C64::new(c * s0, 0.0);
    let mut gv = [C64::new(c * g0.x, 0.0), C64::new(c * g0.y, 0.0), C64::new(c * g0.z, 0.0)];
    if k != C64::new(0.0, 0.0) {
        for (y, wq) in panel_rule(p) {
            let d = x - y;
            let r = d.norm();
            sv += green_smooth_r(k, r) * wq;
            if r > 0.0 {
                let f = green_smooth_dr(k, r) * (wq / r);
                gv[0] += f * d.x;
                gv[1] += f * d.y;
                gv[2] += f * d.z;
            }
        }
    }
    (sv, gv)
}

fn far_panel(x: &Vec3, p: &crate::geometry::Panel, k: C64) -> (C64, [C64; 3]) {
    let d = x - p.centroid;
    let r = d.norm();
    let g = grad_green_unchecked(k, &d, r);
    (green_r(k, r) * p.area, [g[0] * p.area, g[1] * p.area, g[2] * p.area])
}

/// `S^k[density](x)` and its gradient, for any `x` off the panel centroids.
pub fn single_layer_at(mesh: &SurfaceMesh, k: C64, density: &[C64], x: &Vec3) -> (C64, [C64; 3]) {
    let mut v = C64::new(0.0, 0.0);
    let mut g = [C64::new(0.0, 0.0); 3];
    for (q, p) in mesh.panels.iter().enumerate() {
        let w = density[q];
        if w == C64::new(0.0, 0.0) {
            continue;
        }
        let rho = (x - p.centroid).norm() / p.diameter;
        let (sv, gv) = if rho < BLEND.0 {
            near_panel(x, p, k)
        } else if rho >= BLEND.1 {
            far_panel(x, p, k)
        } else {
            let t = smootherstep((rho - BLEND.0) / (BLEND.1 - BLEND.0));
            let (a, ga) = near_panel(x, p, k);
            let (b, gb) = far_panel(x, p, k);
            (
                a * (1.0 - t) + b * t,
                [0, 1, 2].map(|c| ga[c] * (1.0 - t) + gb[c] * t),
            )
        };
        v += sv * w;
        for c in 0..3 {
            g[c] += gv[c] * w;
        }
    }
    (v, g)
}

/// Total and scattered field with gradients at `x`, using the interior or exterior representation.
pub fn field_at(
    mesh: &SurfaceMesh,
    dens: &DensityPair,
    material: &Wavenumbers,
    wave: &IncidentWave,
    x: &Vec3,
    inside: bool,
) -> (C64, C64, [C64; 3], [C64; 3]) {
    let ui = wave.value(x);
    let gi = wave.grad(x);
    if inside {
        let (u, g) = single_layer_at(mesh, material.k_c, &dens.phi, x);
        (u, u - ui, g, [g[0] - gi[0], g[1] - gi[1], g[2] - gi[2]])
    } else {
        let (us, gs) = single_layer_at(mesh, material.k_m, &dens.psi, x);
        (ui + us, us, [gi[0] + gs[0], gi[1] + gs[1], gi[2] + gs[2]], gs)
    }
}

fn re3(g: &[C64; 3]) -> f64 {
    (g[0].re * g[0].re + g[1].re * g[1].re + g[2].re * g[2].re).sqrt()
}

fn abs3_sq(g: &[C64; 3]) -> f64 {
    g.iter().map(|z| z.norm_sqr()).sum()
}

/// Field samples on a point set.
#[derive(Clone, Debug)]
pub struct FieldGrid {
    pub points: Vec<Vec3>,
    pub mask: Vec<PointClass>,
    pub u: Vec<C64>,
    pub us: Vec<C64>,
    pub grad_u: Vec<[C64; 3]>,
    pub grad_us: Vec<[C64; 3]>,
    /// Resonance strength `|grad Re u^s|`.
    pub theta: Vec<f64>,
    pub normalized: bool,
    /// Row and column counts for planar grids.
    pub shape: Option<(usize, usize)>,
}

impl FieldGrid {
    pub fn is_valid(&self, i: usize) -> bool {
        !matches!(self.mask[i], PointClass::NearBoundary(_))
    }

    /// Scales `theta` so its maximum over valid points is one.
    pub fn normalize_theta(&mut self) {
        let m = (0..self.points.len())
            .filter(|&i| self.is_valid(i))
            .map(|i| self.theta[i])
            .fold(0.0, f64::max);
        if m > 0.0 {
            for t in &mut self.theta {
                *t /= m;
            }
        }
        self.normalized = true;
    }

    /// Index of the valid outside point maximizing `|Re u^s|`.
    pub fn argmax_re_us(&self) -> Option<usize> {
        (0..self.points.len())
            .filter(|&i| self.mask[i] == PointClass::Outside)
            .max_by(|&a, &b| self.us[a].re.abs().total_cmp(&self.us[b].re.abs()))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,z,re_u,im_u,re_us,im_us,theta,mask")?;
        for i in 0..self.points.len() {
            let p = self.points[i];
            let m = match self.mask[i] {
                PointClass::Inside => "inside",
                PointClass::Outside => "outside",
                PointClass::NearBoundary(_) => "near",
            };
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                p.x, p.y, p.z, self.u[i].re, self.u[i].im, self.us[i].re, self.us[i].im, self.theta[i], m
            )?;
        }
        Ok(())
    }

    /// Legacy VTK structured points for planar grids with `spacing` and `origin`.
    pub fn write_vtk<W: Write>(&self, origin: Vec3, spacing: [f64; 3], dims: [usize; 3], mut w: W) -> std::io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "plasmonrod field")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET STRUCTURED_POINTS")?;
        writeln!(w, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2])?;
        writeln!(w, "ORIGIN {:e} {:e} {:e}", origin.x, origin.y, origin.z)?;
        writeln!(w, "SPACING {:e} {:e} {:e}", spacing[0], spacing[1], spacing[2])?;
        writeln!(w, "POINT_DATA {}", self.points.len())?;
        let re_us: Vec<f64> = self.us.iter().map(|z| z.re).collect();
        for (name, vals) in [("re_us", &re_us), ("theta", &self.theta)] {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in vals.iter() {
                writeln!(w, "{v:e}")?;
            }
        }
        Ok(())
    }
}

/// Evaluate fields at pre-classified points. Near-boundary points are evaluated with the
/// representation chosen by the sign of `distance - delta` and flagged invalid.
pub fn eval_field(
    mesh: &SurfaceMesh,
    dens: &DensityPair,
    material: &Wavenumbers,
    wave: &IncidentWave,
    points: Vec<Vec3>,
    mask: Vec<PointClass>,
    delta: f64,
) -> FieldGrid {
    let vals: Vec<_> = points
        .par_iter()
        .zip(mask.par_iter())
        .map(|(x, m)| {
            let inside = match m {
                PointClass::Inside => true,
                PointClass::Outside => false,
                PointClass::NearBoundary(d) => *d < delta,
            };
            field_at(mesh, dens, material, wave, x, inside)
        })
        .collect();
    let theta = vals.iter().map(|v| re3(&v.3)).collect();
    FieldGrid {
        points,
        mask,
        u: vals.iter().map(|v| v.0).collect(),
        us: vals.iter().map(|v| v.1).collect(),
        grad_u: vals.iter().map(|v| v.2).collect(),
        grad_us: vals.iter().map(|v| v.3).collect(),
        theta,
        normalized: false,
        shape: None,
    }
}

pub fn classify_points(points: &[Vec3], spec: &RodSpec, collar: f64) -> Vec<PointClass> {
    points.par_iter().map(|x| classify_point(x, spec, collar)).collect()
}

/// Regular `rows x cols` grid on the plane `x1 = x1`, spanning `[lo, hi]` in `(x2, x3)`.
pub fn slice_points(x1: f64, lo: (f64, f64), hi: (f64, f64), rows: usize, cols: usize) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let z = lo.1 + (hi.1 - lo.1) * r as f64 / (rows - 1).max(1) as f64;
        for c in 0..cols {
            let y = lo.0 + (hi.0 - lo.0) * c as f64 / (cols - 1).max(1) as f64;
            out.push(Vec3::new(x1, y, z));
        }
    }
    out
}

/// Resonance strength on a slice; normalized when requested.
pub fn resonance_strength(
    mesh: &SurfaceMesh,
    spec: &RodSpec,
    dens: &DensityPair,
    material: &Wavenumbers,
    wave: &IncidentWave,
    points: Vec<Vec3>,
    collar: f64,
    normalize: bool,
) -> FieldGrid {
    let mask = classify_points(&points, spec, collar);
    let mut g = eval_field(mesh, dens, material, wave, points, mask, spec.delta);
    if normalize {
        g.normalize_theta();
    }
    g
}

/// Volume grid for the energy integrals: a coarse midpoint grid over `B`, with cells that
/// meet the padded rod box refined by `refine` in each direction.
/// Upper bound on energy-grid cells.
pub const MAX_CELLS: usize = 50_000_000;

#[derive(Clone, Debug)]
pub struct EnergyGrid {
    pub box_min: Vec3,
    pub box_max: Vec3,
    pub h_coarse: f64,
    pub refine: usize,
    pub fine_pad: f64,
    pub collar: f64,
}

impl EnergyGrid {
    /// `B` = rod bounding box inflated by 1.5 rod lengths.
    pub fn default_for(spec: &RodSpec, mesh: &SurfaceMesh) -> Self {
        let (lo, hi) = spec.curve.bounds();
        let pad = 1.5 * spec.curve.arclength + spec.delta;
        let delta = spec.delta;
        let refine = 8;
        EnergyGrid {
            box_min: lo - Vec3::repeat(pad),
            box_max: hi + Vec3::repeat(pad),
            h_coarse: delta * 2.0,
            refine,
            fine_pad: 2.0 * delta,
            collar: 0.5 * mesh.max_diameter(),
        }
    }

    pub fn h_fine(&self) -> f64 {
        self.h_coarse / self.refine as f64
    }

    /// Cell centers and volumes.
    pub fn cells(&self, spec: &RodSpec) -> Result<Vec<(Vec3, f64)>> {
        let (lo, hi) = spec.curve.bounds();
        let rlo = lo - Vec3::repeat(spec.delta);
        let rhi = hi + Vec3::repeat(spec.delta);
        for c in 0..3 {
            if !(self.box_min[c] < rlo[c] && self.box_max[c] > rhi[c]) {
                return Err(Error::InvalidArgument("energy box does not strictly contain the rod".into()));
            }
        }
        let flo = rlo - Vec3::repeat(self.fine_pad);
        let fhi = rhi + Vec3::repeat(self.fine_pad);
        let h = self.h_coarse;
        let n: Vec<usize> = (0..3)
            .map(|c| ((self.box_max[c] - self.box_min[c]) / h).ceil() as usize)
            .collect();
        let coarse: usize = n.iter().product();
        let fine: usize = (0..3)
            .map(|c| (((fhi[c] - flo[c]) / h).ceil() as usize + 1).min(n[c]))
            .product();
        let total = coarse.saturating_add(fine.saturating_mul(self.refine.pow(3)));
        if total > MAX_CELLS {
            return Err(Error::InvalidArgument(format!("energy grid needs about {total} cells, limit {MAX_CELLS}")));
        }
        let mut out = Vec::new();
        let hf = self.h_fine();
        for i in 0..n[0] {
            for j in 0..n[1] {
                for k in 0..n[2] {
                    let c0 = self.box_min + Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h);
                    let c1 = c0 + Vec3::repeat(h);
                    let meets = (0..3).all(|c| c0[c] < fhi[c] && c1[c] > flo[c]);
                    if meets {
                        for a in 0..self.refine {
                            for b in 0..self.refine {
                                for e in 0..self.refine {
                                    let p = c0 + Vec3::new((a as f64 + 0.5) * hf, (b as f64 + 0.5) * hf, (e as f64 + 0.5) * hf);
                                    out.push((p, hf * hf * hf));
                                }
                            }
                        }
                    } else {
                        out.push((c0 + Vec3::repeat(0.5 * h), h * h * h));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `E_o = ||grad Re u^s||` outside, `E_i = ||grad Re u||` inside, and the electric energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energies {
    pub e_o: f64,
    pub e_i: f64,
    pub electric: f64,
    pub collar: f64,
    pub h: f64,
}

impl Energies {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "E_o,E_i,electric,collar,h")?;
        writeln!(w, "{:e},{:e},{:e},{:e},{:e}", self.e_o, self.e_i, self.electric, self.collar, self.h)
    }
}

pub fn energies(
    mesh: &SurfaceMesh,
    spec: &RodSpec,
    dens: &DensityPair,
    material: &Wavenumbers,
    wave: &IncidentWave,
    grid: &EnergyGrid,
) -> Result<Energies> {
    let cells = grid.cells(spec)?;
    // Ordered collect then a sequential sum keeps the result independent of scheduling.
    let parts: Vec<(f64, f64, f64)> = cells
        .par_iter()
        .map(|(x, vol)| match classify_point(x, spec, grid.collar) {
            PointClass::Outside => {
                let (_, _, _, gs) = field_at(mesh, dens, material, wave, x, false);
                (re3(&gs).powi(2) * vol, 0.0, 0.0)
            }
            PointClass::Inside => {
                let (_, _, g, _) = field_at(mesh, dens, material, wave, x, true);
                (0.0, re3(&g).powi(2) * vol, abs3_sq(&g) * vol)
            }
            PointClass::NearBoundary(_) => (0.0, 0.0, 0.0),
        })
        .collect();
    let sums = parts.iter().fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    Ok(Energies {
        e_o: sums.0.sqrt(),
        e_i: sums.1.sqrt(),
        electric: material.eps_c.im / (8.0 * std::f64::consts::PI) * sums.2,
        collar: grid.collar,
        h: grid.h_fine(),
    })
}
