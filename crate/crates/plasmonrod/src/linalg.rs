//! Dense complex LU with a Hager-Higham 1-norm condition estimate.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Systems whose estimated 1-norm condition exceeds this are rejected.
pub fn condition_limit() -> f64 {
    1e-3 / f64::EPSILON
}

pub struct LuSolver {
    lu: PartialPivLu<C64>,
    n: usize,
    pub condition: f64,
}

fn norm1_mat(a: &Mat<C64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn norm1(v: &Mat<C64>) -> f64 {
    (0..v.nrows()).map(|i| v[(i, 0)].norm()).sum()
}

impl LuSolver {
    /// Factor `a`; fails with [`Error::IllConditioned`] past [`condition_limit`].
    pub fn new(a: &Mat<C64>) -> Result<Self> {
        let s = Self::factor(a);
        if !(s.condition <= condition_limit()) {
            return Err(Error::IllConditioned {
                condition: s.condition,
                limit: condition_limit(),
            });
        }
        Ok(s)
    }

    /// Factor without the conditioning check.
    pub fn factor(a: &Mat<C64>) -> Self {
        let n = a.nrows();
        let lu = a.partial_piv_lu();
        let mut s = LuSolver {
            lu,
            n,
            condition: 0.0,
        };
        s.condition = norm1_mat(a) * s.inverse_norm1_estimate();
        s
    }

    fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let mut x = Mat::from_fn(n, 1, |_, _| C64::new(1.0 / n as f64, 0.0));
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for iter in 0..5 {
            let mut y = x.clone();
            self.lu.solve_in_place(y.as_mut());
            let ny = norm1(&y);
            if iter > 0 && ny <= est {
                break;
            }
            est = ny;
            let mut z = Mat::from_fn(n, 1, |i, _| {
                let v = y[(i, 0)];
                if v.norm() == 0.0 {
                    C64::new(1.0, 0.0)
                } else {
                    v / v.norm()
                }
            });
            self.lu.solve_adjoint_in_place(z.as_mut());
            let (j, zmax) = (0..n)
                .map(|i| (i, z[(i, 0)].norm()))
                .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            let ztx: f64 = (0..n).map(|i| (z[(i, 0)].conj() * x[(i, 0)]).re).sum();
            if iter > 0 && (zmax <= ztx || j == last_j) {
                break;
            }
            last_j = j;
            x = Mat::zeros(n, 1);
            x[(j, 0)] = C64::new(1.0, 0.0);
        }
        // Higham's alternating-sign safeguard.
        let mut alt = Mat::from_fn(n, 1, |i, _| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            C64::new(s * (1.0 + i as f64 / (n as f64 - 1.0).max(1.0)), 0.0)
        });
        self.lu.solve_in_place(alt.as_mut());
        est.max(2.0 * norm1(&alt) / (3.0 * n as f64))
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(x.as_mut());
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_mat(&self, b: &Mat<C64>) -> Mat<C64> {
        let mut x = b.clone();
        self.lu.solve_in_place(x.as_mut());
        x
    }
}

pub fn matvec(a: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    let x = Mat::from_fn(v.len(), 1, |i, _| v[i]);
    let y = a * &x;
    (0..a.nrows()).map(|i| y[(i, 0)]).collect()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn to_complex(a: &Mat<f64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| C64::new(a[(i, j)], 0.0))
}

/// Frobenius norm.
pub fn fro(a: &Mat<C64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}
