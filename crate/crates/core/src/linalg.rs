//! Thin dense linear-algebra layer over faer.

use crate::error::{Error, Result};
use faer::{Mat, Side};
pub use num_complex::Complex64 as C64;

pub type CMat = Mat<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(n: usize, m: usize) -> CMat {
    Mat::zeros(n, m)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn from_rows(rows: &[Vec<C64>]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(n, m, |i, j| rows[i][j])
}

pub fn adjoint(a: &CMat) -> CMat {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn scale(a: &CMat, s: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn add(a: &CMat, b: &CMat) -> CMat {
    a + b
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    a - b
}

pub fn mul(a: &CMat, b: &CMat) -> CMat {
    a * b
}

/// `a† b` without materialising the adjoint twice.
pub fn mul_adj_left(a: &CMat, b: &CMat) -> CMat {
    adjoint(a) * b
}

pub fn mul_adj_right(a: &CMat, b: &CMat) -> CMat {
    a * adjoint(b)
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn trace(a: &CMat) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn diag(a: &CMat) -> Vec<C64> {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).collect()
}

/// Diagonal of `a b` in O(n²).
pub fn diag_of_product(a: &CMat, b: &CMat) -> Vec<C64> {
    let n = a.nrows();
    let k = a.ncols();
    let mut out = vec![ZERO; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = ZERO;
        for l in 0..k {
            s += a[(i, l)] * b[(l, i)];
        }
        *o = s;
    }
    out
}

pub fn hermiticity_residual(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..=j.min(a.nrows().saturating_sub(1)) {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

pub fn unitarity_residual(u: &CMat) -> f64 {
    let p = adjoint(u) * u;
    max_abs(&(p - identity(u.ncols())))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    Mat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows() + b.nrows();
    let m = a.ncols() + b.ncols();
    Mat::from_fn(n, m, |i, j| {
        if i < a.nrows() && j < a.ncols() {
            a[(i, j)]
        } else if i >= a.nrows() && j >= a.ncols() {
            b[(i - a.nrows(), j - a.ncols())]
        } else {
            ZERO
        }
    })
}

pub fn submatrix(a: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    Mat::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn columns(a: &CMat, cols: &[usize]) -> CMat {
    Mat::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

/// Hermitian eigendecomposition, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn eigh(a: &CMat) -> Result<Eigh> {
    if a.nrows() == 0 {
        return Ok(Eigh { values: vec![], vectors: zeros(0, 0) });
    }
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let values = e.S().column_vector().iter().map(|z| z.re).collect();
    Ok(Eigh { values, vectors: e.U().to_owned() })
}

pub fn eigvalsh(a: &CMat) -> Result<Vec<f64>> {
    if a.nrows() == 0 {
        return Ok(vec![]);
    }
    let v = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    Ok(v)
}

impl Eigh {
    /// `V diag(f(E)) V†`.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> CMat {
        let fv: Vec<C64> = self.values.iter().map(|&e| f(e)).collect();
        let keep: Vec<usize> = (0..fv.len()).filter(|&i| fv[i] != ZERO).collect();
        let n = self.vectors.nrows();
        if keep.is_empty() {
            return zeros(n, n);
        }
        let v = columns(&self.vectors, &keep);
        let vf = Mat::from_fn(n, keep.len(), |i, j| v[(i, j)] * fv[keep[j]]);
        vf * adjoint(&v)
    }

    /// Derivative of `f(H)` along `dh` by the Daleckii-Krein formula.
    pub fn dk_derivative(&self, dh: &CMat, f: impl Fn(f64) -> C64, df: impl Fn(f64) -> C64) -> CMat {
        let v = &self.vectors;
        let m = adjoint(v) * dh * v;
        let n = self.values.len();
        let fv: Vec<C64> = self.values.iter().map(|&e| f(e)).collect();
        let g = Mat::from_fn(n, n, |a, b| {
            let (ea, eb) = (self.values[a], self.values[b]);
            let w = if (ea - eb).abs() > 1e-10 * (1.0 + ea.abs()) {
                (fv[a] - fv[b]) / (ea - eb)
            } else {
                df(0.5 * (ea + eb))
            };
            w * m[(a, b)]
        });
        v * g * adjoint(v)
    }
}

pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

/// Full SVD `A = U diag(s) V†`, singular values descending.
pub fn svd(a: &CMat) -> Result<Svd> {
    let d = a.svd().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = d.S().column_vector().iter().map(|z| z.re).collect();
    Ok(Svd { u: d.U().to_owned(), s, v: d.V().to_owned() })
}

pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(vec![]);
    }
    a.singular_values().map_err(|e| Error::Eigensolver(format!("{e:?}")))
}

/// Unitary polar factor `W V†` of a square matrix.
pub fn polar_unitary(a: &CMat) -> Result<(CMat, f64)> {
    let d = svd(a)?;
    let smin = d.s.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((&d.u * adjoint(&d.v), smin))
}

/// `exp(-i t K)` for Hermitian `K`.
pub fn expm_hermitian(k: &CMat, t: f64) -> Result<CMat> {
    let e = eigh(k)?;
    Ok(e.apply(|x| C64::from_polar(1.0, -t * x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut r = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = Mat::from_fn(n, n, |_, _| c(r(), r()));
        let b = adjoint(&a);
        &a + &b
    }

    #[test]
    fn eigh_reconstructs() {
        let h = herm(50, 3);
        let e = eigh(&h).unwrap();
        let r = h.clone() * &e.vectors - Mat::from_fn(50, 50, |i, j| e.vectors[(i, j)] * e.values[j]);
        assert!(max_abs(&r) < 1e-9);
        assert!(unitarity_residual(&e.vectors) < 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn dk_matches_finite_difference() {
        let h = herm(12, 5);
        let dh = herm(12, 9);
        let f = |x: f64| C64::from_polar(1.0, 0.7 * x);
        let df = |x: f64| I * 0.7 * C64::from_polar(1.0, 0.7 * x);
        let e = eigh(&h).unwrap();
        let d = e.dk_derivative(&dh, f, df);
        let eps = 1e-5;
        let hp = &h + scale(&dh, c(eps, 0.0));
        let hm = &h - scale(&dh, c(eps, 0.0));
        let fd = scale(&(eigh(&hp).unwrap().apply(f) - eigh(&hm).unwrap().apply(f)), c(0.5 / eps, 0.0));
        assert!(max_abs(&(d - fd)) < 1e-7);
    }

    #[test]
    fn polar_of_unitary_is_itself() {
        let h = herm(6, 1);
        let u = expm_hermitian(&h, 1.0).unwrap();
        let (p, smin) = polar_unitary(&u).unwrap();
        assert!(max_abs(&(p - &u)) < 1e-12);
        assert!((smin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diag_of_product_matches() {
        let a = herm(7, 2);
        let b = herm(7, 4);
        let full = &a * &b;
        let d = diag_of_product(&a, &b);
        for i in 0..7 {
            assert!((full[(i, i)] - d[i]).norm() < 1e-13);
        }
    }
}
