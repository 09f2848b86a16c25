//! Thin dense linear-algebra layer over `faer`, with LAPACK for the QZ step.
//!
//! Everything in the crate talks in terms of [`RMat`] (real) and [`CMat`]
//! (complex) owned matrices; the helpers here cover the handful of
//! factorizations the algorithms need.

use faer::linalg::solvers::{Solve, SolveLstsq};
use faer::{c64, Mat};

use crate::error::{Error, Result};

pub type RMat = Mat<f64>;
pub type CMat = Mat<c64>;

/// Reciprocal-condition threshold below which a solve is declared singular.
pub const RCOND_SINGULAR: f64 = 1e-14;

pub fn zeros(r: usize, c: usize) -> RMat {
    Mat::zeros(r, c)
}

pub fn identity(n: usize) -> RMat {
    Mat::identity(n, n)
}

pub fn from_rows(rows: &[Vec<f64>]) -> RMat {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

pub fn to_rows(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn complexify(m: &RMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0))
}

/// `s * m` for a real matrix and complex scalar.
pub fn scaled(m: &RMat, s: c64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| s * m[(i, j)])
}

pub fn transpose(m: &RMat) -> RMat {
    m.transpose().to_owned()
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

/// `dst += s * src` for a complex scale and a real matrix.
pub fn axpy_real(dst: &mut CMat, s: c64, src: &RMat) {
    for j in 0..src.ncols() {
        for i in 0..src.nrows() {
            let v = src[(i, j)];
            if v != 0.0 {
                dst[(i, j)] += s * v;
            }
        }
    }
}

pub fn real_mul(a: &RMat, b: &RMat) -> RMat {
    a * b
}

/// Product of a real and a complex matrix.
pub fn rc_mul(a: &RMat, b: &CMat) -> CMat {
    complexify(a) * b
}

/// Product of a complex and a real matrix.
pub fn cr_mul(a: &CMat, b: &RMat) -> CMat {
    a * complexify(b)
}

pub fn max_abs(m: &RMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].abs());
        }
    }
    best
}

/// Spectral norm of a real matrix (0 for empty matrices).
pub fn norm2(m: &RMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().map(|s| s[0]).unwrap_or(f64::NAN)
}

/// Spectral norm of a complex matrix (0 for empty matrices).
pub fn cnorm2(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().map(|s| s[0]).unwrap_or(f64::NAN)
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.singular_values().unwrap_or_default()
}

pub fn real_singular_values(m: &RMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.singular_values().unwrap_or_default()
}

/// Largest singular triplet `(sigma, left, right)` with `m * right = sigma * left`.
pub fn top_singular_triplet(m: &CMat) -> Option<(f64, Vec<c64>, Vec<c64>)> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return None;
    }
    let svd = m.svd().ok()?;
    let s = svd.S().column_vector()[0];
    let u = (0..m.nrows()).map(|i| svd.U()[(i, 0)]).collect();
    let v = (0..m.ncols()).map(|i| svd.V()[(i, 0)]).collect();
    Some((s.re, u, v))
}

/// Right singular vector for the smallest singular value of a square matrix.
pub fn smallest_right_singular_vector(m: &CMat) -> Option<(f64, Vec<c64>)> {
    let n = m.ncols();
    if n == 0 {
        return None;
    }
    let svd = m.svd().ok()?;
    let k = n.min(m.nrows()) - 1;
    let s = svd.S().column_vector()[k].re;
    let v = (0..n).map(|i| svd.V()[(i, k)]).collect();
    Some((s, v))
}

/// Solves `a x = b` by partial-pivoting LU, returning `None` when the pivot
/// ratio says the matrix is numerically singular.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    let n = a.nrows();
    if n == 0 {
        return Some(Mat::zeros(0, b.ncols()));
    }
    let lu = a.partial_piv_lu();
    let u = lu.U();
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for i in 0..n {
        let d = u[(i, i)].norm();
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    if !(dmax > 0.0) || !(dmin / dmax > RCOND_SINGULAR) || !dmin.is_finite() {
        return None;
    }
    let x = lu.solve(b);
    if x.norm_l2().is_finite() {
        Some(x)
    } else {
        None
    }
}

pub fn solve_real(a: &RMat, b: &RMat) -> Option<RMat> {
    let n = a.nrows();
    if n == 0 {
        return Some(Mat::zeros(0, b.ncols()));
    }
    let lu = a.partial_piv_lu();
    let u = lu.U();
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for i in 0..n {
        let d = u[(i, i)].abs();
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    if !(dmax > 0.0) || !(dmin / dmax > RCOND_SINGULAR) {
        return None;
    }
    Some(lu.solve(b))
}

/// Least-squares solution of an overdetermined real system via QR.
pub fn lstsq(a: &RMat, b: &RMat) -> RMat {
    a.qr().solve_lstsq(b)
}

/// Eigenvalues of a complex square matrix.
pub fn eigenvalues(m: &CMat) -> Result<Vec<c64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    m.eigenvalues()
        .map_err(|e| Error::EigSolverFailure(format!("{e:?}")))
}

pub fn spectral_radius(m: &CMat) -> Result<f64> {
    Ok(eigenvalues(m)?
        .into_iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Finite generalized eigenvalues of `a - lambda b` by the QZ algorithm.
///
/// Eigenvalues with `beta = 0`, or with `|lambda|` above `limit` times the
/// pencil scale `1 + |a| / |b|`, are treated as infinite and dropped.
pub fn finite_generalized_eigenvalues(a: &RMat, b: &RMat) -> Result<Vec<c64>> {
    finite_generalized_eigenvalues_with(a, b, 1e8)
}

pub fn finite_generalized_eigenvalues_with(a: &RMat, b: &RMat, limit: f64) -> Result<Vec<c64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let bmax = max_abs(b);
    if bmax == 0.0 {
        return Ok(Vec::new());
    }
    let scale = 1.0 + max_abs(a) / bmax;
    let col_major = |m: &RMat| -> Vec<f64> { (0..n).flat_map(|j| (0..n).map(move |i| m[(i, j)])).collect() };
    let mut aa = col_major(a);
    let mut bb = col_major(b);
    let (mut alphar, mut alphai, mut beta) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut vl, mut vr) = ([0.0f64; 1], [0.0f64; 1]);
    let ni = n as i32;
    let mut info = 0;
    let mut query = [0.0f64; 1];
    // SAFETY: every buffer is sized as dggev requires for n x n input with
    // no eigenvectors requested.
    unsafe {
        lapack::dggev(
            b'N', b'N', ni, &mut aa, ni, &mut bb, ni, &mut alphar, &mut alphai, &mut beta,
            &mut vl, 1, &mut vr, 1, &mut query, -1, &mut info,
        );
    }
    let lwork = (query[0] as usize).max(8 * n);
    let mut work = vec![0.0; lwork];
    unsafe {
        lapack::dggev(
            b'N', b'N', ni, &mut aa, ni, &mut bb, ni, &mut alphar, &mut alphai, &mut beta,
            &mut vl, 1, &mut vr, 1, &mut work, lwork as i32, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::EigSolverFailure(format!("dggev returned info = {info}")));
    }
    Ok((0..n)
        .filter(|&i| beta[i] != 0.0)
        .map(|i| c64::new(alphar[i] / beta[i], alphai[i] / beta[i]))
        .filter(|l| l.re.is_finite() && l.im.is_finite() && l.norm() <= limit * scale)
        .collect())
}

/// Block-diagonal assembly of real matrices.
pub fn block_diag(blocks: &[&RMat]) -> RMat {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(r, c);
    let (mut ro, mut co) = (0, 0);
    for b in blocks {
        set_block(&mut out, ro, co, b);
        ro += b.nrows();
        co += b.ncols();
    }
    out
}

pub fn set_block(dst: &mut RMat, r0: usize, c0: usize, src: &RMat) {
    for j in 0..src.ncols() {
        for i in 0..src.nrows() {
            dst[(r0 + i, c0 + j)] = src[(i, j)];
        }
    }
}

pub fn add_block(dst: &mut RMat, r0: usize, c0: usize, src: &RMat, scale: f64) {
    for j in 0..src.ncols() {
        for i in 0..src.nrows() {
            dst[(r0 + i, c0 + j)] += scale * src[(i, j)];
        }
    }
}

pub fn columns(m: &RMat, start: usize, count: usize) -> RMat {
    Mat::from_fn(m.nrows(), count, |i, j| m[(i, start + j)])
}

pub fn sub_real(a: &RMat, b: &RMat) -> RMat {
    a - b
}

/// Complex column vector from a slice.
pub fn col(v: &[c64]) -> CMat {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn col_to_vec(m: &CMat) -> Vec<c64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

/// `x^* m y` for complex vectors.
pub fn quad_form(x: &[c64], m: &CMat, y: &[c64]) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for i in 0..m.nrows() {
        let mut row = c64::new(0.0, 0.0);
        for j in 0..m.ncols() {
            row += m[(i, j)] * y[j];
        }
        acc += x[i].conj() * row;
    }
    acc
}

/// `x^* m y` for a real matrix.
pub fn quad_form_real(x: &[c64], m: &RMat, y: &[c64]) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for i in 0..m.nrows() {
        let mut row = c64::new(0.0, 0.0);
        for j in 0..m.ncols() {
            let a = m[(i, j)];
            if a != 0.0 {
                row += y[j] * a;
            }
        }
        acc += x[i].conj() * row;
    }
    acc
}
