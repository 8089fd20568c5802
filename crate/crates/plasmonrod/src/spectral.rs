//! NP spectra in the H* inner product and the resonance quantities built on them.

use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::geometry::{Region, SurfaceMesh};
use crate::operators::{GramHstar, K0Blocks, StaticOperators};

/// Default resonance threshold.
pub const ETA0: f64 = 0.05;
/// Default number of retained modes.
pub const DEFAULT_MODES: usize = 60;
/// Modes below this magnitude are kept but not scanned for resonance.
pub const TAIL_CUTOFF: f64 = 1e-3;

/// Eigenpairs of the NP adjoint, ordered by decreasing `|lambda|`.
///
/// Columns of `eigfuncs` are real panel values with `sum phi^2 area = 1`;
/// `norms[j]` is the H* norm squared `a_j` of that column.
#[derive(Clone, Debug)]
pub struct NPSpectrum {
    pub lambdas: Vec<f64>,
    pub eigfuncs: Mat<f64>,
    pub norms: Vec<f64>,
    pub areas: Vec<f64>,
}

/// Solve `B v = lambda M v` for symmetric `B`; vectors come back M-orthonormal.
pub fn generalized_symmetric(b: &Mat<f64>, gram: &GramHstar) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = b.nrows();
    let l = gram.cholesky().L();
    let mut x = b.clone();
    solve_lower_triangular_in_place(l, x.as_mut(), Par::rayon(0));
    let mut c = x.transpose().to_owned();
    solve_lower_triangular_in_place(l, c.as_mut(), Par::rayon(0));
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let vals: Vec<f64> = (0..n).map(|i| evd.S().column_vector()[i]).collect();
    let mut v = evd.U().to_owned();
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.transpose(), v.as_mut(), Par::rayon(0));
    Ok((vals, v))
}

impl NPSpectrum {
    /// Build from M-orthonormal eigenvectors, keeping the `m` largest in magnitude.
    pub fn from_pairs(vals: Vec<f64>, vecs: &Mat<f64>, areas: Vec<f64>, m: usize) -> Self {
        let n = vecs.nrows();
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[b].abs().total_cmp(&vals[a].abs()).then(vals[b].total_cmp(&vals[a])));
        order.truncate(m.min(vals.len()));
        let mut eigfuncs = Mat::<f64>::zeros(n, order.len());
        let mut norms = Vec::with_capacity(order.len());
        for (c, &k) in order.iter().enumerate() {
            let l2 = (0..n).map(|i| vecs[(i, k)].powi(2) * areas[i]).sum::<f64>().sqrt();
            // Deterministic sign: largest-magnitude entry positive.
            let (imax, _) = (0..n).fold((0, 0.0), |a, i| {
                if vecs[(i, k)].abs() > a.1 {
                    (i, vecs[(i, k)].abs())
                } else {
                    a
                }
            });
            let s = vecs[(imax, k)].signum() / l2;
            for i in 0..n {
                eigfuncs[(i, c)] = vecs[(i, k)] * s;
            }
            norms.push(1.0 / (l2 * l2));
        }
        NPSpectrum {
            lambdas: order.iter().map(|&k| vals[k]).collect(),
            eigfuncs,
            norms,
            areas,
        }
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn eigfunc(&self, j: usize) -> Vec<f64> {
        (0..self.eigfuncs.nrows()).map(|i| self.eigfuncs[(i, j)]).collect()
    }

    /// `int phi_j dsigma`.
    pub fn moment(&self, j: usize) -> f64 {
        (0..self.areas.len()).map(|i| self.eigfuncs[(i, j)] * self.areas[i]).sum()
    }

    /// `int phi_j dsigma` over the panels tagged `region`.
    pub fn region_moment(&self, j: usize, mesh: &SurfaceMesh, region: Region) -> f64 {
        mesh.indices(region)
            .into_iter()
            .map(|i| self.eigfuncs[(i, j)] * self.areas[i])
            .sum()
    }

    /// Groups of mode indices whose eigenvalues agree to `rel_tol` of the larger magnitude.
    pub fn clusters(&self, rel_tol: f64) -> Vec<Vec<usize>> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.lambdas[b].total_cmp(&self.lambdas[a]));
        let mut out: Vec<Vec<usize>> = Vec::new();
        for &i in &idx {
            if let Some(last) = out.last_mut() {
                let prev = self.lambdas[*last.last().unwrap()];
                let lam = self.lambdas[i];
                if (prev - lam).abs() <= rel_tol * prev.abs().max(lam.abs()) {
                    last.push(i);
                    continue;
                }
            }
            out.push(vec![i]);
        }
        out.sort_by(|a, b| {
            let la = self.lambdas[a[0]].abs();
            let lb = self.lambdas[b[0]].abs();
            lb.total_cmp(&la)
        });
        out
    }

    /// Truncated expansion `sum_j lambda_j <psi, phi_j>/a_j phi_j`.
    pub fn reconstruct(&self, gram: &GramHstar, psi: &[f64]) -> Vec<f64> {
        let n = psi.len();
        let mut out = vec![0.0; n];
        for j in 0..self.len() {
            let phi = self.eigfunc(j);
            let c = self.lambdas[j] * gram.inner(psi, &phi) / self.norms[j];
            for i in 0..n {
                out[i] += c * phi[i];
            }
        }
        out
    }

    /// Relative H* distance from `v` to the span of the given modes.
    pub fn subspace_residual(&self, gram: &GramHstar, modes: &[usize], v: &[f64]) -> f64 {
        let mut r = v.to_vec();
        for &j in modes {
            let phi = self.eigfunc(j);
            let c = gram.inner(&r, &phi) / self.norms[j];
            for i in 0..r.len() {
                r[i] -= c * phi[i];
            }
        }
        (gram.inner(&r, &r) / gram.inner(v, v)).max(0.0).sqrt()
    }
}

/// Spectrum of the H*-symmetrized static NP adjoint.
pub fn np_spectrum(ops: &StaticOperators, m: usize) -> Result<NPSpectrum> {
    let (vals, vecs) = generalized_symmetric(&ops.b, &ops.gram)?;
    Ok(NPSpectrum::from_pairs(vals, &vecs, ops.areas.clone(), m))
}

/// `||M K - (M K)^T|| / ||M K||` for the raw operator.
pub fn hstar_asymmetry(ops: &StaticOperators) -> f64 {
    let mk = &ops.gram.matrix * &ops.k_raw;
    let n = mk.nrows();
    let (mut d, mut t) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            d += (mk[(i, j)] - mk[(j, i)]).powi(2);
            t += mk[(i, j)].powi(2);
        }
    }
    (d / t).sqrt()
}

/// `tau_j`, `theta = Re(1/eps_c)`, `rho = Im(1/eps_c)` and the index set at `eta0`.
#[derive(Clone, Debug)]
pub struct ResonanceParams {
    pub theta: f64,
    pub rho: f64,
    pub eps_m: f64,
    pub tau: Vec<C64>,
    pub eta0: f64,
    pub index_set: Vec<usize>,
}

pub fn tau(lambda: f64, eps_c: C64, eps_m: f64) -> C64 {
    let ic = 1.0 / eps_c;
    let im = 1.0 / eps_m;
    (im + ic) * 0.5 + (im - ic) * lambda
}

pub fn tau_values(lambdas: &[f64], eps_c: C64, eps_m: f64, eta0: f64) -> Result<ResonanceParams> {
    if eps_c.norm() == 0.0 {
        return Err(Error::InvalidArgument("eps_c must be nonzero".into()));
    }
    if !(eps_m > 0.0) {
        return Err(Error::InvalidArgument("eps_m must be positive".into()));
    }
    let inv = 1.0 / eps_c;
    let mut p = ResonanceParams {
        theta: inv.re,
        rho: inv.im,
        eps_m,
        tau: lambdas.iter().map(|&l| tau(l, eps_c, eps_m)).collect(),
        eta0,
        index_set: Vec::new(),
    };
    p.index_set = resonance_index_set(&p, eta0);
    Ok(p)
}

/// Modes `j >= 1` with `|tau_j| < eta0`.
pub fn resonance_index_set(params: &ResonanceParams, eta0: f64) -> Vec<usize> {
    (1..params.tau.len())
        .filter(|&j| params.tau[j].norm() < eta0)
        .collect()
}

/// `lambda(t) = (t+1) / (2(t-1))`.
pub fn lambda_of(t: C64) -> C64 {
    (t + 1.0) / ((t - 1.0) * 2.0)
}

/// Permittivity whose `theta` zeroes `Re tau` for eigenvalue `lambda`, with loss `rho`.
pub fn resonant_permittivity(lambda: f64, eps_m: f64, rho: f64) -> Result<C64> {
    if (lambda - 0.5).abs() < 1e-14 {
        return Err(Error::InvalidArgument("lambda = 1/2 has no resonant permittivity".into()));
    }
    let theta = (2.0 * lambda + 1.0) / ((2.0 * lambda - 1.0) * eps_m);
    Ok(1.0 / C64::new(theta, rho))
}

pub fn resonant_permittivity_for_mode(j: usize, spectrum: &NPSpectrum, eps_m: f64, rho: f64) -> Result<C64> {
    if j == 0 {
        return Err(Error::InvalidArgument("mode 0 has no resonant permittivity".into()));
    }
    let lambda = *spectrum
        .lambdas
        .get(j)
        .ok_or_else(|| Error::InvalidArgument(format!("mode {j} out of range")))?;
    resonant_permittivity(lambda, eps_m, rho)
}

/// Spectrum of the limit operator together with its facade diagnostics.
#[derive(Clone, Debug)]
pub struct K0Spectrum {
    pub spectrum: NPSpectrum,
    /// Per mode: max facade amplitude outside the collars over the max amplitude.
    pub facade_residual: Vec<f64>,
    /// Per mode: max collar amplitude over the max amplitude.
    pub collar_amplitude: Vec<f64>,
}

/// Eigenpairs of `K0*` with nonzero eigenvalue. The cap block is solved in the cap H*
/// inner product; collar values follow from the facade rows as `F v / lambda`.
pub fn k0_spectrum(blocks: &K0Blocks, mesh: &SurfaceMesh, m: usize) -> Result<K0Spectrum> {
    let caps = &blocks.caps;
    let nc = caps.len();
    let n = mesh.len();
    let c = Mat::from_fn(nc, nc, |i, j| blocks.matrix[(caps[i], caps[j])]);
    let mc = &blocks.cap_gram.matrix * &c;
    let b = Mat::from_fn(nc, nc, |i, j| 0.5 * (mc[(i, j)] + mc[(j, i)]));
    let (vals, vecs) = generalized_symmetric(&b, &blocks.cap_gram)?;
    let cap_areas: Vec<f64> = caps.iter().map(|&i| mesh.panels[i].area).collect();
    let cap_spec = NPSpectrum::from_pairs(vals, &vecs, cap_areas, m);
    let k = cap_spec.len();
    let mut full = Mat::<f64>::zeros(n, k);
    let collar: Vec<usize> = blocks.collar_p.iter().chain(blocks.collar_q.iter()).copied().collect();
    let mut facade_residual = Vec::with_capacity(k);
    let mut collar_amplitude = Vec::with_capacity(k);
    for j in 0..k {
        for (a, &p) in caps.iter().enumerate() {
            full[(p, j)] = cap_spec.eigfuncs[(a, j)];
        }
        let lam = cap_spec.lambdas[j];
        for &p in &collar {
            let fv: f64 = caps.iter().map(|&q| blocks.matrix[(p, q)] * full[(q, j)]).sum();
            full[(p, j)] = fv / lam;
        }
        let amax = (0..n).map(|i| full[(i, j)].abs()).fold(0.0, f64::max);
        let outside = mesh
            .indices(Region::Facade)
            .into_iter()
            .filter(|i| !collar.contains(i))
            .map(|i| full[(i, j)].abs())
            .fold(0.0, f64::max);
        let col = collar.iter().map(|&i| full[(i, j)].abs()).fold(0.0, f64::max);
        facade_residual.push(outside / amax);
        collar_amplitude.push(col / amax);
    }
    Ok(K0Spectrum {
        spectrum: NPSpectrum {
            lambdas: cap_spec.lambdas,
            eigfuncs: full,
            norms: cap_spec.norms,
            areas: mesh.areas(),
        },
        facade_residual,
        collar_amplitude,
    })
}

/// Plain-text table `j lambda a_j |tau_j| in_J`.
pub fn write_report<W: std::io::Write>(spec: &NPSpectrum, params: &ResonanceParams, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{:>4} {:>24} {:>24} {:>24} {:>5}", "j", "lambda", "a_j", "|tau_j|", "in_J")?;
    for j in 0..spec.len() {
        writeln!(
            w,
            "{:>4} {:>24e} {:>24e} {:>24e} {:>5}",
            j,
            spec.lambdas[j],
            spec.norms[j],
            params.tau[j].norm(),
            params.index_set.contains(&j)
        )?;
    }
    Ok(())
}

/// CSV `j,lambda,a_j,abs_tau,in_j`.
pub fn write_csv<W: std::io::Write>(spec: &NPSpectrum, params: &ResonanceParams, mut w: W) -> std::io::Result<()> {
    writeln!(w, "j,lambda,a_j,abs_tau,in_j")?;
    for j in 0..spec.len() {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{}",
            j,
            spec.lambdas[j],
            spec.norms[j],
            params.tau[j].norm(),
            u8::from(params.index_set.contains(&j))
        )?;
    }
    Ok(())
}
