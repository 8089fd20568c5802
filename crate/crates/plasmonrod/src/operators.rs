//! Dense centroid-collocation layer potentials on flat panels.
//!
//! Static operators are assembled once per mesh and then symmetrized: the single layer
//! against area weights and the NP adjoint in the H* inner product, with the constant
//! eigenvector deflated so that its eigenvalue is exactly `1/2`. Frequency-dependent
//! operators add the smooth remainder `G^k - G^0` to the symmetrized static part.

use std::f64::consts::PI;

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CenterlineCurve, Region, SurfaceMesh, Vec3};
use crate::kernels::{green_smooth_dr, green_smooth_r, series_k_coeff, series_s_coeff};
use crate::quadrature::{is_near, laplace_triangle, panel_rule};

const FOUR_PI: f64 = 4.0 * PI;

/// Which end of the rod an endpoint projection refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum End {
    P,
    Q,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKernel {
    SingleLayer,
    NpAdjoint,
}

/// How kernel arguments are substituted in a block operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Placement {
    /// Panel centroids and panel integrals.
    Direct,
    /// Sources collapsed onto their centerline feet.
    SourceFoot,
    /// Targets and sources collapsed onto their feet.
    BothFeet,
    /// Target fixed at the endpoint with the outward axial normal; sources on their feet.
    Endpoint(End),
    /// Target moved to the cap junction ring `P0 + (x - z_x)`; sources are panel integrals.
    Junction(End),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OperatorKind {
    SingleLayer(C64),
    NpAdjoint(C64),
    SeriesS(usize),
    SeriesK(usize),
    Block {
        kernel: BlockKernel,
        placement: Placement,
    },
    K0Star,
    K1Star,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesKind {
    S,
    K,
}

/// Dense operator over panel values.
#[derive(Clone, Debug)]
pub struct BoundaryOperator {
    pub matrix: Mat<C64>,
    pub kind: OperatorKind,
}

impl BoundaryOperator {
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.matrix.nrows();
        (0..n)
            .map(|i| (0..v.len()).map(|j| self.matrix[(i, j)] * v[j]).sum())
            .collect()
    }
}

/// `M = -sym(W S)`: the discrete H* Gram matrix.
#[derive(Clone, Debug)]
pub struct GramHstar {
    pub matrix: Mat<f64>,
    llt: Llt<f64>,
}

impl GramHstar {
    pub fn new(matrix: Mat<f64>) -> Result<Self> {
        let llt = matrix
            .llt(Side::Lower)
            .map_err(|e| Error::IndefiniteGram(format!("{e:?}")))?;
        Ok(GramHstar { matrix, llt })
    }

    pub fn cholesky(&self) -> &Llt<f64> {
        &self.llt
    }

    pub fn solve(&self, rhs: &Mat<f64>) -> Mat<f64> {
        let mut x = rhs.clone();
        self.llt.solve_in_place(x.as_mut());
        x
    }

    /// `<u, v>_{H*} = u^T M v`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = u.len();
        let mut s = 0.0;
        for j in 0..n {
            if v[j] == 0.0 {
                continue;
            }
            let mut col = 0.0;
            for i in 0..n {
                col += u[i] * self.matrix[(i, j)];
            }
            s += col * v[j];
        }
        s
    }

    pub fn inner_complex(&self, u: &[C64], v: &[f64]) -> C64 {
        let n = u.len();
        let mut s = C64::new(0.0, 0.0);
        for j in 0..n {
            let mut col = C64::new(0.0, 0.0);
            for i in 0..n {
                col += u[i] * self.matrix[(i, j)];
            }
            s += col * v[j];
        }
        s
    }
}

fn par_rows<T: Send + Copy + Default>(n: usize, m: usize, row: impl Fn(usize, &mut [T]) + Sync) -> Vec<T> {
    let mut data = vec![T::default(); n * m];
    data.par_chunks_mut(m.max(1))
        .enumerate()
        .for_each(|(i, r)| row(i, r));
    data
}

fn to_mat<T: Copy + faer::traits::ComplexField>(n: usize, m: usize, data: &[T]) -> Mat<T> {
    Mat::from_fn(n, m, |i, j| data[i * m + j])
}

/// Static single-layer entry `int_{T_q} G^0(x, y) dy` for an arbitrary target.
#[inline]
pub(crate) fn static_s_entry(x: &Vec3, q: &crate::geometry::Panel) -> f64 {
    if is_near(x, q) {
        -laplace_triangle(&q.vertices, &q.normal, x).0 / FOUR_PI
    } else {
        -q.area / (FOUR_PI * (x - q.centroid).norm())
    }
}

/// `int_{T_q} grad_x G^0(x, y) dy`.
#[inline]
pub(crate) fn static_grad_entry(x: &Vec3, q: &crate::geometry::Panel) -> Vec3 {
    if is_near(x, q) {
        -laplace_triangle(&q.vertices, &q.normal, x).1 / FOUR_PI
    } else {
        let d = x - q.centroid;
        let r = d.norm();
        d * (q.area / (FOUR_PI * r * r * r))
    }
}

/// Raw static operators before symmetrization.
pub fn assemble_static_raw(mesh: &SurfaceMesh) -> (Mat<f64>, Mat<f64>) {
    let n = mesh.len();
    let panels = &mesh.panels;
    let s = par_rows(n, n, |p, row| {
        let x = panels[p].centroid;
        for (q, e) in row.iter_mut().enumerate() {
            *e = static_s_entry(&x, &panels[q]);
        }
    });
    let mut k = par_rows(n, n, |p, row| {
        let x = panels[p].centroid;
        let nu = panels[p].normal;
        for (q, e) in row.iter_mut().enumerate() {
            if q != p {
                *e = nu.dot(&static_grad_entry(&x, &panels[q]));
            }
        }
    });
    // Gauss closure: the transpose applied to 1 equals 1/2 at every panel.
    let areas = mesh.areas();
    for q in 0..n {
        let mut acc = 0.0;
        for p in 0..n {
            if p != q {
                acc += k[p * n + q] * areas[p];
            }
        }
        k[q * n + q] = 0.5 - acc / areas[q];
    }
    (to_mat(n, n, &s), to_mat(n, n, &k))
}

/// Static operators of a mesh in raw and symmetrized form.
#[derive(Clone, Debug)]
pub struct StaticOperators {
    pub areas: Vec<f64>,
    pub s_raw: Mat<f64>,
    pub k_raw: Mat<f64>,
    pub gram: GramHstar,
    /// `S = -W^{-1} M`.
    pub s: Mat<f64>,
    /// H*-self-adjoint NP adjoint `M^{-1} B`.
    pub k: Mat<f64>,
    /// Symmetric `M K`.
    pub b: Mat<f64>,
    /// M-normalized eigenvector of the eigenvalue `1/2`, proportional to `S^{-1}[1]`.
    pub e0: Vec<f64>,
}

fn symmetrize(a: &Mat<f64>) -> Mat<f64> {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

impl StaticOperators {
    pub fn new(mesh: &SurfaceMesh) -> Result<Self> {
        let (s_raw, k_raw) = assemble_static_raw(mesh);
        Self::from_raw(mesh.areas(), s_raw, k_raw)
    }

    pub fn from_raw(areas: Vec<f64>, s_raw: Mat<f64>, k_raw: Mat<f64>) -> Result<Self> {
        let n = areas.len();
        let ws = Mat::from_fn(n, n, |i, j| -areas[i] * s_raw[(i, j)]);
        let gram = GramHstar::new(symmetrize(&ws))?;
        let m = &gram.matrix;
        let s = Mat::from_fn(n, n, |i, j| -m[(i, j)] / areas[i]);

        let b = symmetrize(&(m * &k_raw));
        let w1 = Mat::from_fn(n, 1, |i, _| areas[i]);
        let e = gram.solve(&w1);
        let norm = (0..n).map(|i| e[(i, 0)] * w1[(i, 0)]).sum::<f64>().sqrt();
        let e0: Vec<f64> = (0..n).map(|i| e[(i, 0)] / norm).collect();
        let w: Vec<f64> = (0..n).map(|i| w1[(i, 0)] / norm).collect();
        let be: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| b[(i, j)] * e0[j]).sum())
            .collect();
        let beta: f64 = (0..n).map(|i| e0[i] * be[i]).sum();
        let b = symmetrize(&Mat::from_fn(n, n, |i, j| {
            b[(i, j)] - be[i] * w[j] - w[i] * be[j] + (beta + 0.5) * w[i] * w[j]
        }));
        let k = gram.solve(&b);
        Ok(StaticOperators {
            areas,
            s_raw,
            k_raw,
            gram,
            s,
            k,
            b,
            e0,
        })
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    /// `S^k` = symmetrized static part plus the smooth remainder.
    pub fn single_layer(&self, mesh: &SurfaceMesh, k: C64) -> Mat<C64> {
        let d = dynamic_single_layer(mesh, k);
        let n = self.len();
        Mat::from_fn(n, n, |i, j| d[(i, j)] + self.s[(i, j)])
    }

    /// `(K^k)*` = H*-symmetrized static part plus the smooth remainder.
    pub fn np_adjoint(&self, mesh: &SurfaceMesh, k: C64) -> Mat<C64> {
        let d = dynamic_np_adjoint(mesh, k);
        let n = self.len();
        Mat::from_fn(n, n, |i, j| d[(i, j)] + self.k[(i, j)])
    }
}

/// `int_{T_q} (G^k - G^0)(x - y) dy` and its normal derivative at the centroids.
fn dynamic_entries(
    mesh: &SurfaceMesh,
    kernel: impl Fn(f64) -> C64 + Sync,
    dkernel: Option<&(dyn Fn(f64) -> C64 + Sync)>,
) -> Mat<C64> {
    let n = mesh.len();
    let panels = &mesh.panels;
    let data = par_rows(n, n, |p, row| {
        let x = panels[p].centroid;
        let nu = panels[p].normal;
        for (q, e) in row.iter_mut().enumerate() {
            let pq = &panels[q];
            let eval = |y: &Vec3| -> C64 {
                let d = x - y;
                let r = d.norm();
                match dkernel {
                    None => kernel(r),
                    Some(dk) => {
                        if r == 0.0 {
                            C64::new(0.0, 0.0)
                        } else {
                            dk(r) * (nu.dot(&d) / r)
                        }
                    }
                }
            };
            *e = if p == q || is_near(&x, pq) {
                panel_rule(pq).iter().map(|(y, w)| eval(y) * *w).sum()
            } else {
                eval(&pq.centroid) * pq.area
            };
        }
    });
    to_mat(n, n, &data)
}

pub fn dynamic_single_layer(mesh: &SurfaceMesh, k: C64) -> Mat<C64> {
    dynamic_entries(mesh, move |r| green_smooth_r(k, r), None)
}

pub fn dynamic_np_adjoint(mesh: &SurfaceMesh, k: C64) -> Mat<C64> {
    let dk = move |r: f64| green_smooth_dr(k, r);
    dynamic_entries(mesh, |_| C64::new(0.0, 0.0), Some(&dk))
}

/// Single layer `S^k` on the mesh.
pub fn assemble_single_layer(k: C64, mesh: &SurfaceMesh) -> Result<BoundaryOperator> {
    let st = StaticOperators::new(mesh)?;
    Ok(BoundaryOperator {
        matrix: st.single_layer(mesh, k),
        kind: OperatorKind::SingleLayer(k),
    })
}

/// NP adjoint `(K^k)*` on the mesh.
pub fn assemble_np_adjoint(k: C64, mesh: &SurfaceMesh) -> Result<BoundaryOperator> {
    let st = StaticOperators::new(mesh)?;
    Ok(BoundaryOperator {
        matrix: st.np_adjoint(mesh, k),
        kind: OperatorKind::NpAdjoint(k),
    })
}

/// Coefficient operators of the expansions of `S^k` and `(K^k)*` in powers of `k`.
pub fn assemble_series_term(kind: SeriesKind, j: usize, mesh: &SurfaceMesh) -> Result<BoundaryOperator> {
    if j == 0 {
        return Err(Error::InvalidArgument("series index must be >= 1".into()));
    }
    let matrix = match kind {
        SeriesKind::S => {
            let c = series_s_coeff(j);
            dynamic_entries(mesh, move |r| c * r.powi(j as i32 - 1), None)
        }
        SeriesKind::K => {
            let c = series_k_coeff(j);
            // d/dr of c r^{j-1} equals the K-term kernel times r / <x-y, nu>.
            let dk = move |r: f64| c * r.powi(j as i32 - 2);
            dynamic_entries(mesh, |_| C64::new(0.0, 0.0), Some(&dk))
        }
    };
    Ok(BoundaryOperator {
        matrix,
        kind: match kind {
            SeriesKind::S => OperatorKind::SeriesS(j),
            SeriesKind::K => OperatorKind::SeriesK(j),
        },
    })
}

pub fn assemble_gram_hstar(mesh: &SurfaceMesh) -> Result<GramHstar> {
    Ok(StaticOperators::new(mesh)?.gram)
}

fn end_data(curve: &CenterlineCurve, end: End) -> (Vec3, Vec3) {
    match end {
        End::P => (curve.p0, -curve.samples[0].tangent),
        End::Q => (curve.q0, curve.samples[curve.samples.len() - 1].tangent),
    }
}

/// Region-restricted operator embedded in an `N x N` matrix.
pub fn assemble_block(
    kernel: BlockKernel,
    rows: &[Region],
    cols: &[Region],
    mesh: &SurfaceMesh,
    curve: &CenterlineCurve,
    placement: Placement,
) -> Result<BoundaryOperator> {
    let n = mesh.len();
    let row_idx: Vec<usize> = (0..n).filter(|&i| rows.contains(&mesh.panels[i].region)).collect();
    let col_idx: Vec<usize> = (0..n).filter(|&i| cols.contains(&mesh.panels[i].region)).collect();
    if row_idx.is_empty() {
        return Err(Error::EmptyRegion(format!("{rows:?}")));
    }
    if col_idx.is_empty() {
        return Err(Error::EmptyRegion(format!("{cols:?}")));
    }
    let real = block_entries(kernel, &row_idx, &col_idx, mesh, curve, placement);
    let mut matrix = Mat::<C64>::zeros(n, n);
    for (a, &p) in row_idx.iter().enumerate() {
        for (b, &q) in col_idx.iter().enumerate() {
            matrix[(p, q)] = C64::new(real[a * col_idx.len() + b], 0.0);
        }
    }
    Ok(BoundaryOperator {
        matrix,
        kind: OperatorKind::Block { kernel, placement },
    })
}

fn block_entries(
    kernel: BlockKernel,
    rows: &[usize],
    cols: &[usize],
    mesh: &SurfaceMesh,
    curve: &CenterlineCurve,
    placement: Placement,
) -> Vec<f64> {
    let panels = &mesh.panels;
    if placement == Placement::Direct {
        let (s, k) = assemble_static_raw(mesh);
        let src = if kernel == BlockKernel::SingleLayer { s } else { k };
        return rows
            .iter()
            .flat_map(|&p| cols.iter().map(move |&q| (p, q)))
            .map(|(p, q)| src[(p, q)])
            .collect();
    }
    let m = cols.len();
    par_rows(rows.len(), m, |a, row| {
        let p = &panels[rows[a]];
        let (x, nu) = match placement {
            Placement::SourceFoot => (p.centroid, p.normal),
            Placement::BothFeet => (p.foot, p.normal),
            Placement::Endpoint(end) => end_data(curve, end),
            Placement::Junction(end) => (end_data(curve, end).0 + (p.centroid - p.foot), p.normal),
            Placement::Direct => unreachable!(),
        };
        for (b, e) in row.iter_mut().enumerate() {
            let q = &panels[cols[b]];
            *e = match placement {
                Placement::Junction(_) => match kernel {
                    BlockKernel::SingleLayer => static_s_entry(&x, q),
                    BlockKernel::NpAdjoint => nu.dot(&static_grad_entry(&x, q)),
                },
                _ => {
                    let d = x - q.foot;
                    let r = d.norm();
                    if r < 1e-12 {
                        0.0
                    } else {
                        match kernel {
                            BlockKernel::SingleLayer => -q.area / (FOUR_PI * r),
                            BlockKernel::NpAdjoint => nu.dot(&d) * q.area / (FOUR_PI * r * r * r),
                        }
                    }
                }
            };
        }
    })
}

/// Facade panels whose foot lies within `width` of the given end.
pub fn collar_indices(mesh: &SurfaceMesh, curve: &CenterlineCurve, end: End, width: f64) -> Vec<usize> {
    (0..mesh.len())
        .filter(|&i| {
            let p = &mesh.panels[i];
            p.region == Region::Facade
                && match end {
                    End::P => p.foot_s <= width,
                    End::Q => curve.arclength - p.foot_s <= width,
                }
        })
        .collect()
}

/// Structure of the limiting operator on the reference rod.
#[derive(Clone, Debug)]
pub struct K0Blocks {
    pub caps: Vec<usize>,
    pub collar_p: Vec<usize>,
    pub collar_q: Vec<usize>,
    /// Full `N x N` real matrix.
    pub matrix: Mat<f64>,
    pub cap_gram: GramHstar,
}

/// Limit operator `K0*` on the reference (unit-radius) rod, with collar width `width`
/// measured along the centerline.
pub fn assemble_k0_blocks(mesh: &SurfaceMesh, curve: &CenterlineCurve, width: f64) -> Result<K0Blocks> {
    let n = mesh.len();
    let cap_a = mesh.indices(Region::CapA);
    let cap_b = mesh.indices(Region::CapB);
    if cap_a.is_empty() || cap_b.is_empty() {
        return Err(Error::EmptyRegion("cap".into()));
    }
    let collar_p = collar_indices(mesh, curve, End::P, width);
    let collar_q = collar_indices(mesh, curve, End::Q, width);
    if collar_p.is_empty() || collar_q.is_empty() {
        return Err(Error::EmptyRegion(format!(
            "collar of width {width} contains no facade panels"
        )));
    }
    let (s_raw, k_raw) = assemble_static_raw(mesh);
    let mut matrix = Mat::<f64>::zeros(n, n);
    for cap in [&cap_a, &cap_b] {
        for &p in cap.iter() {
            for &q in cap.iter() {
                matrix[(p, q)] = k_raw[(p, q)];
            }
        }
    }
    for (collar, cap, end) in [(&collar_p, &cap_a, End::P), (&collar_q, &cap_b, End::Q)] {
        let vals = block_entries(BlockKernel::NpAdjoint, collar, cap, mesh, curve, Placement::Junction(end));
        for (a, &p) in collar.iter().enumerate() {
            for (b, &q) in cap.iter().enumerate() {
                matrix[(p, q)] = vals[a * cap.len() + b];
            }
        }
    }
    let caps: Vec<usize> = cap_a.iter().chain(cap_b.iter()).copied().collect();
    let nc = caps.len();
    let areas = mesh.areas();
    let gram = GramHstar::new(Mat::from_fn(nc, nc, |i, j| {
        let (p, q) = (caps[i], caps[j]);
        -0.5 * (areas[p] * s_raw[(p, q)] + areas[q] * s_raw[(q, p)])
    }))?;
    Ok(K0Blocks {
        caps,
        collar_p,
        collar_q,
        matrix,
        cap_gram: gram,
    })
}

pub fn assemble_k0_star(mesh: &SurfaceMesh, curve: &CenterlineCurve, width: f64) -> Result<BoundaryOperator> {
    let blocks = assemble_k0_blocks(mesh, curve, width)?;
    let n = mesh.len();
    Ok(BoundaryOperator {
        matrix: Mat::from_fn(n, n, |i, j| C64::new(blocks.matrix[(i, j)], 0.0)),
        kind: OperatorKind::K0Star,
    })
}

/// First-order correction `K1*`: endpoint rows on the caps, foot-collapsed facade block.
pub fn assemble_k1_star(mesh: &SurfaceMesh, curve: &CenterlineCurve) -> Result<BoundaryOperator> {
    let n = mesh.len();
    let f = [Region::Facade];
    let parts = [
        assemble_block(BlockKernel::NpAdjoint, &[Region::CapA], &f, mesh, curve, Placement::Endpoint(End::P))?,
        assemble_block(BlockKernel::NpAdjoint, &f, &f, mesh, curve, Placement::BothFeet)?,
        assemble_block(BlockKernel::NpAdjoint, &[Region::CapB], &f, mesh, curve, Placement::Endpoint(End::Q))?,
    ];
    Ok(BoundaryOperator {
        matrix: Mat::from_fn(n, n, |i, j| parts.iter().map(|p| p.matrix[(i, j)]).sum()),
        kind: OperatorKind::K1Star,
    })
}

/// Row-major text dump of complex entries: `re im` pairs, one matrix row per line.
pub fn write_matrix<W: std::io::Write>(m: &Mat<C64>, mut w: W) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        let mut line = String::new();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{:e} {:e}", m[(i, j)].re, m[(i, j)].im));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}
