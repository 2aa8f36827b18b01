//! Dense complex linear algebra helpers shared by the whole crate.
//!
//! Eigen- and singular-value decompositions are delegated to LAPACK through
//! `ndarray-linalg`; the matrix exponential is a scaling-and-squaring Padé(13)
//! implementation in the style of Higham (2005).

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, Solve, UPLO};
use num_complex::Complex64 as C64;

use crate::{Error, Result};

/// Conjugate transpose.
pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Largest entry magnitude.
pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Largest entry magnitude of `a - a†`.
pub fn hermiticity_defect(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for i in 0..n {
        for j in i..n {
            m = m.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    m
}

pub fn trace(a: &Array2<C64>) -> C64 {
    a.diag().iter().sum()
}

pub fn frob(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Kronecker product, first factor on the slow index.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    ndarray::linalg::kron(a, b)
}

/// Column-stacking vectorization: `vec(X)[j*n + i] = X[i, j]`.
pub fn vec_col(x: &Array2<C64>) -> Array1<C64> {
    let (n, m) = x.dim();
    let mut v = Array1::zeros(n * m);
    for j in 0..m {
        for i in 0..n {
            v[j * n + i] = x[[i, j]];
        }
    }
    v
}

/// Inverse of [`vec_col`] for square matrices.
pub fn unvec_col(v: &Array1<C64>, n: usize) -> Array2<C64> {
    let mut x = Array2::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            x[[i, j]] = v[j * n + i];
        }
    }
    x
}

/// Eigendecomposition of a Hermitian matrix, ascending eigenvalues, with
/// eigenvectors as columns: `A = V diag(vals) V†`.
///
/// The backend hands back eigenvectors of the transposed (row-major) matrix;
/// conjugating restores the standard column convention. Validated by the
/// reconstruction test below.
pub fn eigh(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let (vals, vecs) = a.eigh(UPLO::Lower)?;
    Ok((vals, vecs.mapv(|z| z.conj())))
}

/// Eigenvalues only.
pub fn eigvalsh(a: &Array2<C64>) -> Result<Array1<f64>> {
    use ndarray_linalg::EighInto;
    let (vals, _) = a.clone().eigh_into(UPLO::Lower)?;
    Ok(vals)
}

/// Smallest eigenvalue of a Hermitian matrix; 0 for the empty matrix.
pub fn min_eig_hermitian(a: &Array2<C64>) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let vals = eigvalsh(a)?;
    Ok(vals[0])
}

/// Largest singular value.
pub fn op_norm(a: &Array2<C64>) -> Result<f64> {
    use ndarray_linalg::SVD;
    let (_, s, _) = a.svd(false, false)?;
    Ok(s.iter().cloned().fold(0.0f64, f64::max))
}

/// Rebuild `V diag(f(d)) V†` from a Hermitian eigendecomposition.
pub fn from_eigh(vals: &Array1<f64>, vecs: &Array2<C64>, f: impl Fn(f64) -> C64) -> Array2<C64> {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let fj = f(vals[j]);
        scaled.column_mut(j).mapv_inplace(|z| z * fj);
    }
    scaled.dot(&dagger(vecs))
}

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn one_norm(a: &Array2<C64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Matrix exponential by scaling-and-squaring with a Padé(13) approximant.
///
/// Diagonal matrices take an exact fast path.
pub fn expm(a: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("expm needs a square matrix".into()));
    }
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    // Diagonal fast path.
    let mut off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off = off.max(a[[i, j]].norm());
            }
        }
    }
    if off == 0.0 {
        let mut r = Array2::zeros((n, n));
        for i in 0..n {
            r[[i, i]] = a[[i, i]].exp();
        }
        return Ok(r);
    }

    let theta13 = 5.371_920_351_148_152;
    let norm = one_norm(a);
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil() as u32
    } else {
        0
    };
    let scale = C64::new((0.5f64).powi(s as i32), 0.0);
    let a1 = a.mapv(|z| z * scale);

    let eye = Array2::from_diag_elem(n, C64::new(1.0, 0.0));
    let a2 = a1.dot(&a1);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let c = |k: usize| C64::new(PADE13[k], 0.0);
    let w1 = a6.mapv(|z| z * c(13)) + a4.mapv(|z| z * c(11)) + a2.mapv(|z| z * c(9));
    let w2 = a6.mapv(|z| z * c(7))
        + a4.mapv(|z| z * c(5))
        + a2.mapv(|z| z * c(3))
        + eye.mapv(|z| z * c(1));
    let u = a1.dot(&(a6.dot(&w1) + w2));

    let z1 = a6.mapv(|z| z * c(12)) + a4.mapv(|z| z * c(10)) + a2.mapv(|z| z * c(8));
    let v = a6.dot(&z1)
        + a6.mapv(|z| z * c(6))
        + a4.mapv(|z| z * c(4))
        + a2.mapv(|z| z * c(2))
        + eye.mapv(|z| z * c(0));

    // exp(A1) ≈ (V - U)^{-1} (V + U), solved column by column.
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut r = Array2::zeros((n, n));
    for j in 0..n {
        let col = lhs.solve(&rhs.column(j).to_owned())?;
        r.column_mut(j).assign(&col);
    }
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}
