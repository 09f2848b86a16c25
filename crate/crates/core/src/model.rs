//! Delay differential-algebraic systems in standard form
//!
//! ```text
//! E x'(t) = A_0 x(t) + sum_i A_i x(t - tau_i) + B w(t),   z(t) = C x(t)
//! ```
//!
//! together with the nullspace partition that splits the differential and
//! algebraic parts, and transfer-function evaluation.

use faer::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat};

/// Default relative rank threshold for `E`.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DdaeSystem {
    e: RMat,
    a: Vec<RMat>,
    b: RMat,
    c: RMat,
    delays: Vec<f64>,
}

impl DdaeSystem {
    /// Builds a system after checking dimensions and delay positivity.
    /// `a[0]` is the undelayed matrix; `a[i]` pairs with `delays[i - 1]`.
    pub fn new(e: RMat, a: Vec<RMat>, b: RMat, c: RMat, delays: Vec<f64>) -> Result<Self> {
        let n = e.nrows();
        if e.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "E must be square, got {}x{}",
                e.nrows(),
                e.ncols()
            )));
        }
        if a.len() != delays.len() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} A matrices for {} delays, got {}",
                delays.len() + 1,
                delays.len(),
                a.len()
            )));
        }
        for (i, ai) in a.iter().enumerate() {
            if ai.nrows() != n || ai.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "A_{i} is {}x{}, expected {n}x{n}",
                    ai.nrows(),
                    ai.ncols()
                )));
            }
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "C has {} columns, expected {n}",
                c.ncols()
            )));
        }
        for (index, &value) in delays.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonpositiveDelay { index, value });
            }
        }
        Ok(Self { e, a, b, c, delays })
    }

    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    /// Number of delays `m`.
    pub fn m(&self) -> usize {
        self.delays.len()
    }

    pub fn nw(&self) -> usize {
        self.b.ncols()
    }

    pub fn nz(&self) -> usize {
        self.c.nrows()
    }

    pub fn e(&self) -> &RMat {
        &self.e
    }

    pub fn a(&self) -> &[RMat] {
        &self.a
    }

    pub fn b(&self) -> &RMat {
        &self.b
    }

    pub fn c(&self) -> &RMat {
        &self.c
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn tau_max(&self) -> f64 {
        self.delays.iter().copied().fold(0.0, f64::max)
    }

    /// Same matrices with a different delay vector.
    pub fn with_delays(&self, delays: Vec<f64>) -> Result<Self> {
        Self::new(
            self.e.clone(),
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
            delays,
        )
    }

    /// Largest entry magnitude over all `A_i`.
    pub fn max_a_norm(&self) -> f64 {
        self.a.iter().map(linalg::norm2).fold(0.0, f64::max)
    }

    /// Characteristic matrix `lambda E - A_0 - sum_i A_i exp(-lambda tau_i)`.
    pub fn characteristic_matrix(&self, lambda: c64) -> CMat {
        let mut m = linalg::scaled(&self.e, lambda);
        linalg::axpy_real(&mut m, c64::new(-1.0, 0.0), &self.a[0]);
        for (ai, &tau) in self.a[1..].iter().zip(&self.delays) {
            let f = -(-lambda * tau).exp();
            linalg::axpy_real(&mut m, f, ai);
        }
        m
    }

    /// `E + sum_i tau_i A_i exp(-j omega tau_i)`; `j` times this is the
    /// frequency derivative of the characteristic matrix on the imaginary axis.
    pub fn characteristic_derivative_weight(&self, omega: f64) -> CMat {
        let mut m = linalg::complexify(&self.e);
        for (ai, &tau) in self.a[1..].iter().zip(&self.delays) {
            let f = c64::new(0.0, -omega * tau).exp() * tau;
            linalg::axpy_real(&mut m, f, ai);
        }
        m
    }

    pub(crate) fn stable_hash(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        let mut feed = |m: &RMat| {
            m.nrows().hash(&mut h);
            m.ncols().hash(&mut h);
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    m[(i, j)].to_bits().hash(&mut h);
                }
            }
        };
        feed(&self.e);
        for a in &self.a {
            feed(a);
        }
        feed(&self.b);
        feed(&self.c);
        for d in &self.delays {
            d.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Orthonormal bases of the left/right nullspaces of `E` and their complements.
#[derive(Debug, Clone)]
pub struct NullspaceBases {
    pub nu: usize,
    pub u: RMat,
    pub v: RMat,
    pub u_perp: RMat,
    pub v_perp: RMat,
}

/// Checks dimensions, computes the nullspace bases of `E` from its SVD and
/// confirms that `U^T A_0 V` is nonsingular.
pub fn validate(sys: &DdaeSystem, tol_rank: f64) -> Result<NullspaceBases> {
    if !(tol_rank > 0.0) {
        return Err(Error::InvalidOption(format!(
            "rank tolerance must be positive, got {tol_rank}"
        )));
    }
    let n = sys.n();
    let (u_full, s, v_full) = if n == 0 {
        (linalg::zeros(0, 0), Vec::new(), linalg::zeros(0, 0))
    } else {
        let svd = sys
            .e
            .svd()
            .map_err(|e| Error::EigSolverFailure(format!("SVD of E failed: {e:?}")))?;
        let s: Vec<f64> = (0..n).map(|i| svd.S().column_vector()[i]).collect();
        (svd.U().to_owned(), s, svd.V().to_owned())
    };
    let smax = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().filter(|&&x| x > tol_rank * smax && x > 0.0).count();
    let nu = n - rank;
    let bases = NullspaceBases {
        nu,
        u_perp: linalg::columns(&u_full, 0, rank),
        u: linalg::columns(&u_full, rank, nu),
        v_perp: linalg::columns(&v_full, 0, rank),
        v: linalg::columns(&v_full, rank, nu),
    };
    if nu > 0 {
        let a22 = bases.u.transpose() * &sys.a[0] * &bases.v;
        let sv = linalg::real_singular_values(&a22);
        let sigma_min = sv.last().copied().unwrap_or(0.0);
        let threshold = tol_rank * linalg::norm2(&sys.a[0]).max(f64::MIN_POSITIVE);
        if !(sigma_min > threshold) {
            return Err(Error::AssumptionOneViolated {
                sigma_min,
                threshold,
            });
        }
    }
    Ok(bases)
}

/// The four-block decomposition of a system in the bases `[U_perp U]`, `[V_perp V]`.
#[derive(Debug, Clone)]
pub struct PartitionedSystem {
    pub nu: usize,
    pub e11: RMat,
    /// `[A_i^(11), A_i^(12), A_i^(21), A_i^(22)]` for `i = 0..=m`.
    pub blocks: Vec<[RMat; 4]>,
    pub b1: RMat,
    pub b2: RMat,
    pub c1: RMat,
    pub c2: RMat,
    pub delays: Vec<f64>,
    pub bases: NullspaceBases,
}

impl PartitionedSystem {
    pub fn a11(&self, i: usize) -> &RMat {
        &self.blocks[i][0]
    }
    pub fn a12(&self, i: usize) -> &RMat {
        &self.blocks[i][1]
    }
    pub fn a21(&self, i: usize) -> &RMat {
        &self.blocks[i][2]
    }
    pub fn a22(&self, i: usize) -> &RMat {
        &self.blocks[i][3]
    }
}

pub fn partition(sys: &DdaeSystem, bases: &NullspaceBases) -> PartitionedSystem {
    let up_t = bases.u_perp.transpose().to_owned();
    let u_t = bases.u.transpose().to_owned();
    let blocks = sys
        .a
        .iter()
        .map(|ai| {
            [
                &up_t * ai * &bases.v_perp,
                &up_t * ai * &bases.v,
                &u_t * ai * &bases.v_perp,
                &u_t * ai * &bases.v,
            ]
        })
        .collect();
    PartitionedSystem {
        nu: bases.nu,
        e11: &up_t * &sys.e * &bases.v_perp,
        blocks,
        b1: &up_t * &sys.b,
        b2: &u_t * &sys.b,
        c1: &sys.c * &bases.v_perp,
        c2: &sys.c * &bases.v,
        delays: sys.delays.clone(),
        bases: bases.clone(),
    }
}

/// `C (lambda E - A_0 - sum A_i e^{-lambda tau_i})^{-1} B` by one dense solve.
pub fn transfer(sys: &DdaeSystem, lambda: c64) -> Result<CMat> {
    let m = sys.characteristic_matrix(lambda);
    let x = linalg::solve(&m, &linalg::complexify(&sys.b)).ok_or(Error::SingularAtLambda {
        re: lambda.re,
        im: lambda.im,
    })?;
    Ok(linalg::rc_mul(&sys.c, &x))
}

fn delayed_sum(blocks: &[[RMat; 4]], which: usize, delays: &[f64], lambda: c64) -> CMat {
    let (r, c) = (blocks[0][which].nrows(), blocks[0][which].ncols());
    let mut out = CMat::zeros(r, c);
    linalg::axpy_real(&mut out, c64::new(1.0, 0.0), &blocks[0][which]);
    for (blk, &tau) in blocks[1..].iter().zip(delays) {
        linalg::axpy_real(&mut out, (-lambda * tau).exp(), &blk[which]);
    }
    out
}

/// Same value as [`transfer`], computed by eliminating the algebraic block
/// of the partitioned form.
pub fn transfer_partitioned(part: &PartitionedSystem, lambda: c64) -> Result<CMat> {
    let singular = || Error::SingularAtLambda {
        re: lambda.re,
        im: lambda.im,
    };
    let a11 = delayed_sum(&part.blocks, 0, &part.delays, lambda);
    let a12 = delayed_sum(&part.blocks, 1, &part.delays, lambda);
    let a21 = delayed_sum(&part.blocks, 2, &part.delays, lambda);
    let a22 = delayed_sum(&part.blocks, 3, &part.delays, lambda);
    let b1 = linalg::complexify(&part.b1);
    let b2 = linalg::complexify(&part.b2);
    let c1 = linalg::complexify(&part.c1);
    let c2 = linalg::complexify(&part.c2);
    let nd = part.e11.nrows();
    let nw = part.b1.ncols().max(part.b2.ncols());

    // x2 = -A22^{-1} (B2 + A21 x1)
    let (a22_inv_b2, a22_inv_a21) = if part.nu > 0 {
        let rhs = concat_cols(&b2, &a21);
        let sol = linalg::solve(&a22, &rhs).ok_or_else(singular)?;
        (
            sol.submatrix(0, 0, part.nu, b2.ncols()).to_owned(),
            sol.submatrix(0, b2.ncols(), part.nu, nd).to_owned(),
        )
    } else {
        (CMat::zeros(0, nw), CMat::zeros(0, nd))
    };
    let x1 = if nd > 0 {
        let mut p = linalg::scaled(&part.e11, lambda) - &a11;
        p += &a12 * &a22_inv_a21;
        let rhs = &b1 - &a12 * &a22_inv_b2;
        linalg::solve(&p, &rhs).ok_or_else(singular)?
    } else {
        CMat::zeros(0, nw)
    };
    let x2 = -(&a22_inv_b2 + &a22_inv_a21 * &x1);
    Ok(&c1 * &x1 + &c2 * &x2)
}

fn concat_cols(a: &CMat, b: &CMat) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols() + b.ncols(), |i, j| {
        if j < a.ncols() {
            a[(i, j)]
        } else {
            b[(i, j - a.ncols())]
        }
    })
}

/// One sample of a singular-value curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaPoint {
    pub omega: f64,
    pub sigmas: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SigmaCurve {
    pub points: Vec<SigmaPoint>,
    /// Grid frequencies where `T(j omega)` could not be evaluated.
    pub skipped: Vec<f64>,
}

impl SigmaCurve {
    /// Grid point with the largest `sigma_1`.
    pub fn peak(&self) -> Option<&SigmaPoint> {
        self.points
            .iter()
            .filter(|p| !p.sigmas.is_empty())
            .max_by(|a, b| a.sigmas[0].total_cmp(&b.sigmas[0]))
    }
}

/// Leading `k` singular values of `T(j omega)` over a sorted grid.
pub fn sigma_sweep(sys: &DdaeSystem, grid: &[f64], k: usize) -> SigmaCurve {
    let evals: Vec<(f64, Option<Vec<f64>>)> = grid
        .par_iter()
        .map(|&omega| {
            let sv = transfer(sys, c64::new(0.0, omega))
                .ok()
                .map(|t| linalg::singular_values(&t).into_iter().take(k).collect());
            (omega, sv)
        })
        .collect();
    let mut curve = SigmaCurve::default();
    for (omega, sv) in evals {
        match sv {
            Some(sigmas) => curve.points.push(SigmaPoint { omega, sigmas }),
            None => {
                log::warn!("T(j omega) singular at omega = {omega}; skipped");
                curve.skipped.push(omega);
            }
        }
    }
    curve
}

/// `count` logarithmically spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}
