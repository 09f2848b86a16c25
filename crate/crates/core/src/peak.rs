//! Gauss-Newton refinement of singular-value peaks.
//!
//! Both the frequency-domain peak of `T(jw) = C M(w)^{-1} B` and the peak of
//! the asymptotic function over the torus of phases have the same shape: a
//! matrix function `M(p)` of a few real parameters `p`, and the conditions
//!
//! ```text
//! M u - BB^T v / xi = 0
//! C^TC u / xi - M^* v = 0
//! |u|^2 + |v|^2 = 2,  Im u_r = 0
//! Re(v^* dM/dp_k u) = 0           (k = 1..P)
//! ```
//!
//! which hold exactly at a smooth local maximum `xi` of the largest singular
//! value. The complex unknowns are split into real and imaginary parts and the
//! overdetermined real system is solved by Gauss-Newton.

use faer::c64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat};

pub const MAX_ITER: usize = 30;

/// A parametrized matrix `M(p)` with its first and second derivatives.
pub trait PeakProblem {
    fn dim(&self) -> usize;
    fn nparams(&self) -> usize;
    fn matrix(&self, p: &[f64]) -> CMat;
    fn first(&self, p: &[f64]) -> Vec<CMat>;
    /// `d^2 M / dp_k dp_l` in row-major order (`P * P` entries).
    fn second(&self, p: &[f64]) -> Vec<CMat>;
    fn bbt(&self) -> &RMat;
    fn ctc(&self) -> &RMat;
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakSolution {
    pub params: Vec<f64>,
    pub xi: f64,
    pub u: Vec<c64>,
    pub v: Vec<c64>,
    pub iterations: usize,
    /// Residual norm after each iteration, starting with the initial one.
    pub residuals: Vec<f64>,
}

impl PeakSolution {
    pub fn residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }
}

fn mat_vec(m: &CMat, x: &[c64]) -> Vec<c64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum())
        .collect()
}

fn adj_vec(m: &CMat, x: &[c64]) -> Vec<c64> {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].conj() * x[i]).sum())
        .collect()
}

fn real_vec(m: &RMat, x: &[c64]) -> Vec<c64> {
    (0..m.nrows())
        .map(|i| {
            let mut acc = c64::new(0.0, 0.0);
            for j in 0..m.ncols() {
                let a = m[(i, j)];
                if a != 0.0 {
                    acc += x[j] * a;
                }
            }
            acc
        })
        .collect()
}

fn dot(x: &[c64], y: &[c64]) -> c64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Scales `(u, v)` jointly so that `|u|^2 + |v|^2 = 2` and rotates so that the
/// largest entry of `u` is real and positive. Returns that entry's index.
pub fn normalize(u: &mut [c64], v: &mut [c64]) -> Option<usize> {
    let norm2: f64 = u.iter().chain(v.iter()).map(|z| z.norm_sqr()).sum();
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return None;
    }
    let r = (0..u.len()).max_by(|&a, &b| u[a].norm().total_cmp(&u[b].norm()))?;
    if u[r].norm() == 0.0 {
        return None;
    }
    let phase = u[r].conj() / u[r].norm();
    let s = (2.0 / norm2).sqrt();
    for z in u.iter_mut().chain(v.iter_mut()) {
        *z = *z * phase * s;
    }
    Some(r)
}

struct Residual {
    values: Vec<f64>,
    norm: f64,
}

fn residual<P: PeakProblem>(
    prob: &P,
    params: &[f64],
    xi: f64,
    u: &[c64],
    v: &[c64],
    r: usize,
) -> Residual {
    let n = prob.dim();
    let np = prob.nparams();
    let m = prob.matrix(params);
    let mu = mat_vec(&m, u);
    let bv = real_vec(prob.bbt(), v);
    let cu = real_vec(prob.ctc(), u);
    let mv = adj_vec(&m, v);
    let mut values = vec![0.0; 4 * n + 2 + np];
    for i in 0..n {
        let r1 = mu[i] - bv[i] / xi;
        let r2 = cu[i] / xi - mv[i];
        values[i] = r1.re;
        values[n + i] = r1.im;
        values[2 * n + i] = r2.re;
        values[3 * n + i] = r2.im;
    }
    let nrm: f64 = u.iter().chain(v).map(|z| z.norm_sqr()).sum();
    values[4 * n] = nrm - 2.0;
    values[4 * n + 1] = u[r].im;
    for (k, g) in prob.first(params).iter().enumerate() {
        values[4 * n + 2 + k] = dot(v, &mat_vec(g, u)).re;
    }
    let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
    Residual { values, norm }
}

/// Writes the real form of the complex-linear map `x -> L x` into `jac`.
fn put_complex(jac: &mut RMat, r0: usize, c0: usize, l: &CMat, scale: f64) {
    let (rows, cols) = (l.nrows(), l.ncols());
    for i in 0..rows {
        for j in 0..cols {
            let z = l[(i, j)] * scale;
            jac[(r0 + i, c0 + j)] += z.re;
            jac[(r0 + i, c0 + cols + j)] -= z.im;
            jac[(r0 + rows + i, c0 + j)] += z.im;
            jac[(r0 + rows + i, c0 + cols + j)] += z.re;
        }
    }
}

fn jacobian<P: PeakProblem>(
    prob: &P,
    params: &[f64],
    xi: f64,
    u: &[c64],
    v: &[c64],
    r: usize,
) -> RMat {
    let n = prob.dim();
    let np = prob.nparams();
    let rows = 4 * n + 2 + np;
    let cols = np + 1 + 4 * n;
    let (cu, cv) = (np + 1, np + 1 + 2 * n);
    let mut jac = linalg::zeros(rows, cols);

    let m = prob.matrix(params);
    let d1 = prob.first(params);
    let d2 = prob.second(params);
    let bbt = linalg::complexify(prob.bbt());
    let ctc = linalg::complexify(prob.ctc());
    let m_adj = linalg::adjoint(&m);

    // r1 = M u - BB^T v / xi,  r2 = C^TC u / xi - M^* v
    put_complex(&mut jac, 0, cu, &m, 1.0);
    put_complex(&mut jac, 0, cv, &bbt, -1.0 / xi);
    put_complex(&mut jac, 2 * n, cu, &ctc, 1.0 / xi);
    put_complex(&mut jac, 2 * n, cv, &m_adj, -1.0);

    let bv = real_vec(prob.bbt(), v);
    let cuv = real_vec(prob.ctc(), u);
    for i in 0..n {
        let a = bv[i] / (xi * xi);
        let b = -cuv[i] / (xi * xi);
        jac[(i, np)] = a.re;
        jac[(n + i, np)] = a.im;
        jac[(2 * n + i, np)] = b.re;
        jac[(3 * n + i, np)] = b.im;
    }
    for (k, g) in d1.iter().enumerate() {
        let gu = mat_vec(g, u);
        let gv = adj_vec(g, v);
        for i in 0..n {
            jac[(i, k)] = gu[i].re;
            jac[(n + i, k)] = gu[i].im;
            jac[(2 * n + i, k)] = -gv[i].re;
            jac[(3 * n + i, k)] = -gv[i].im;
        }
        // Stationarity rows.
        let row = 4 * n + 2 + k;
        for i in 0..n {
            jac[(row, cu + i)] = gv[i].re;
            jac[(row, cu + n + i)] = gv[i].im;
            jac[(row, cv + i)] = gu[i].re;
            jac[(row, cv + n + i)] = gu[i].im;
        }
        for l in 0..np {
            jac[(row, l)] = dot(v, &mat_vec(&d2[k * np + l], u)).re;
        }
    }
    for i in 0..n {
        jac[(4 * n, cu + i)] = 2.0 * u[i].re;
        jac[(4 * n, cu + n + i)] = 2.0 * u[i].im;
        jac[(4 * n, cv + i)] = 2.0 * v[i].re;
        jac[(4 * n, cv + n + i)] = 2.0 * v[i].im;
    }
    jac[(4 * n + 1, cu + n + r)] = 1.0;
    jac
}

/// Runs Gauss-Newton from the given start. `u0`, `v0` need not be normalized.
pub fn correct<P: PeakProblem>(
    prob: &P,
    params0: &[f64],
    xi0: f64,
    u0: &[c64],
    v0: &[c64],
) -> Result<PeakSolution> {
    let n = prob.dim();
    let np = prob.nparams();
    if u0.len() != n || v0.len() != n || params0.len() != np {
        return Err(Error::DimensionMismatch(
            "peak correction start has wrong dimensions".into(),
        ));
    }
    if !(xi0 > 0.0) || !xi0.is_finite() {
        return Err(Error::CorrectionDiverged(format!("invalid start level {xi0}")));
    }
    let mut u = u0.to_vec();
    let mut v = v0.to_vec();
    let r = normalize(&mut u, &mut v)
        .ok_or_else(|| Error::CorrectionDiverged("zero start vectors".into()))?;
    let mut params = params0.to_vec();
    let mut xi = xi0;
    let mut res = residual(prob, &params, xi, &u, &v, r);
    let mut history = vec![res.norm];
    let tol = |xi: f64| 1e-12 * (1.0 + xi);

    for it in 1..=MAX_ITER {
        if res.norm < tol(xi) {
            return Ok(PeakSolution {
                params,
                xi,
                u,
                v,
                iterations: it - 1,
                residuals: history,
            });
        }
        let jac = jacobian(prob, &params, xi, &u, &v, r);
        let rhs = RMat::from_fn(res.values.len(), 1, |i, _| -res.values[i]);
        let step = linalg::lstsq(&jac, &rhs);
        let step_norm = step.norm_l2();
        if !step_norm.is_finite() {
            return Err(Error::CorrectionDiverged("non-finite Gauss-Newton step".into()));
        }
        for k in 0..np {
            params[k] += step[(k, 0)];
        }
        xi += step[(np, 0)];
        let cu = np + 1;
        let cv = cu + 2 * n;
        for i in 0..n {
            u[i] += c64::new(step[(cu + i, 0)], step[(cu + n + i, 0)]);
            v[i] += c64::new(step[(cv + i, 0)], step[(cv + n + i, 0)]);
        }
        if !(xi > 0.0) || !xi.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::CorrectionDiverged(format!(
                "level left the admissible range (xi = {xi})"
            )));
        }
        let prev = res.norm;
        res = residual(prob, &params, xi, &u, &v, r);
        history.push(res.norm);
        if !res.norm.is_finite() {
            return Err(Error::CorrectionDiverged("non-finite residual".into()));
        }
        // Rounding floor: the residual cannot shrink further and is tiny.
        let scale = 1.0 + xi + params.iter().map(|p| p.abs()).sum::<f64>();
        if step_norm < 1e-13 * scale && res.norm <= 1e-8 * scale && res.norm >= 0.5 * prev {
            return Ok(PeakSolution {
                params,
                xi,
                u,
                v,
                iterations: it,
                residuals: history,
            });
        }
        if res.norm > 1e6 * (1.0 + history[0]) {
            return Err(Error::CorrectionDiverged(format!(
                "residual grew to {:.3e}",
                res.norm
            )));
        }
    }
    if res.norm < tol(xi) {
        return Ok(PeakSolution {
            params,
            xi,
            u,
            v,
            iterations: MAX_ITER,
            residuals: history,
        });
    }
    Err(Error::MaxIterExceeded {
        iterations: MAX_ITER,
        residual: res.norm,
    })
}

/// Start vectors that satisfy the first two equations exactly, from the
/// top singular triplet `T x = sigma y` with `T = C M^{-1} B`.
pub fn start_from_triplet(
    m: &CMat,
    b: &RMat,
    c: &RMat,
    x: &[c64],
    y: &[c64],
) -> Option<(Vec<c64>, Vec<c64>)> {
    let bx = linalg::rc_mul(b, &linalg::col(x));
    let cy = linalg::rc_mul(&linalg::transpose(c), &linalg::col(y));
    let u = linalg::solve(m, &bx)?;
    let v = linalg::solve(&linalg::adjoint(m), &cy)?;
    Some((linalg::col_to_vec(&u), linalg::col_to_vec(&v)))
}

/// `[[M, -BB^T/xi], [C^TC/xi, -M^*]]`.
pub fn hamiltonian_matrix(m: &CMat, bbt: &RMat, ctc: &RMat, xi: f64) -> CMat {
    let n = m.nrows();
    CMat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => m[(i, j)],
        (true, false) => c64::new(-bbt[(i, j - n)] / xi, 0.0),
        (false, true) => c64::new(ctc[(i - n, j)] / xi, 0.0),
        (false, false) => -m[(j - n, i - n)].conj(),
    })
}

/// Start vectors from the right singular vector of the smallest singular
/// value of the Hamiltonian-type matrix.
pub fn start_from_hamiltonian(m: &CMat, bbt: &RMat, ctc: &RMat, xi: f64) -> Option<(Vec<c64>, Vec<c64>)> {
    let h = hamiltonian_matrix(m, bbt, ctc, xi);
    let (_, z) = linalg::smallest_right_singular_vector(&h)?;
    let n = m.nrows();
    Some((z[..n].to_vec(), z[n..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `M(w) = jw - a` for a scalar system with `b = c = 1`: `|T| = 1/|jw - a|`
    /// peaks at `w = 0`; shifting with `M(w) = j(w - w0) - a` moves it to `w0`.
    struct Shifted {
        a: f64,
        w0: f64,
        one: RMat,
    }

    impl PeakProblem for Shifted {
        fn dim(&self) -> usize {
            1
        }
        fn nparams(&self) -> usize {
            1
        }
        fn matrix(&self, p: &[f64]) -> CMat {
            CMat::from_fn(1, 1, |_, _| c64::new(-self.a, p[0] - self.w0))
        }
        fn first(&self, _: &[f64]) -> Vec<CMat> {
            vec![CMat::from_fn(1, 1, |_, _| c64::new(0.0, 1.0))]
        }
        fn second(&self, _: &[f64]) -> Vec<CMat> {
            vec![CMat::zeros(1, 1)]
        }
        fn bbt(&self) -> &RMat {
            &self.one
        }
        fn ctc(&self) -> &RMat {
            &self.one
        }
    }

    #[test]
    fn scalar_peak_converges_quadratically() {
        let prob = Shifted {
            a: -0.5,
            w0: 3.0,
            one: linalg::identity(1),
        };
        let m = prob.matrix(&[3.2]);
        let (u, v) = start_from_hamiltonian(&m, prob.bbt(), prob.ctc(), 1.9).unwrap();
        let sol = correct(&prob, &[3.2], 1.9, &u, &v).unwrap();
        assert!((sol.params[0] - 3.0).abs() < 1e-12);
        assert!((sol.xi - 2.0).abs() < 1e-12);
        assert!(sol.residual() < 1e-12 * 3.0);
    }

    #[test]
    fn start_at_solution_is_fixed_point() {
        let prob = Shifted {
            a: -0.5,
            w0: 3.0,
            one: linalg::identity(1),
        };
        let m = prob.matrix(&[3.0]);
        let (u, v) = start_from_triplet(
            &m,
            prob.bbt(),
            prob.ctc(),
            &[c64::new(1.0, 0.0)],
            &[c64::new(1.0, 0.0)],
        )
        .unwrap();
        let sol = correct(&prob, &[3.0], 2.0, &u, &v).unwrap();
        assert!(sol.iterations <= 2);
        assert!((sol.xi - 2.0).abs() < 1e-14);
    }

    #[test]
    fn normalize_fixes_scale_and_phase() {
        let mut u = vec![c64::new(0.0, 3.0), c64::new(1.0, 1.0)];
        let mut v = vec![c64::new(2.0, -1.0)];
        let r = normalize(&mut u, &mut v).unwrap();
        assert_eq!(r, 0);
        assert!(u[0].im.abs() < 1e-15 && u[0].re > 0.0);
        let n: f64 = u.iter().chain(&v).map(|z| z.norm_sqr()).sum();
        assert!((n - 2.0).abs() < 1e-14);
    }
}
