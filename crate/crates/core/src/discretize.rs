//! Spectral discretization of the delay system.
//!
//! The state history on `[-tau_max, 0]` is represented by its values on a
//! Chebyshev mesh. Collocating the derivative at the history nodes and
//! imposing the system equation at `theta = 0` gives the finite pencil
//! `(E_N, A_N, B_N, C_N)` whose transfer function `T_N` approximates `T`
//! with spectral accuracy at moderate frequencies.

use std::f64::consts::PI;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat};
use crate::model::DdaeSystem;

/// Default discretization order.
pub const DEFAULT_ORDER: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub order: usize,
    /// Ascending nodes; `points[0] = -tau_max`, `points[order] = 0`.
    pub points: Vec<f64>,
    pub tau_max: f64,
}

/// Chebyshev extremal points mapped to `[-tau_max, 0]`.
pub fn build_mesh(order: usize, tau_max: f64) -> Result<Mesh> {
    if order < 1 {
        return Err(Error::InvalidOption("discretization order must be at least 1".into()));
    }
    if !(tau_max > 0.0) {
        return Err(Error::InvalidOption(format!("tau_max must be positive, got {tau_max}")));
    }
    let mut points: Vec<f64> = (0..=order)
        .map(|j| 0.5 * tau_max * ((PI * (order - j) as f64 / order as f64).cos() - 1.0))
        .collect();
    points[0] = -tau_max;
    points[order] = 0.0;
    Ok(Mesh {
        order,
        points,
        tau_max,
    })
}

fn barycentric_weights(order: usize) -> Vec<f64> {
    (0..=order)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == order {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// Values of all Lagrange basis polynomials at `x`.
fn lagrange_row(points: &[f64], weights: &[f64], x: f64) -> Vec<f64> {
    if let Some(k) = points.iter().position(|&p| p == x) {
        let mut row = vec![0.0; points.len()];
        row[k] = 1.0;
        return row;
    }
    let terms: Vec<f64> = points
        .iter()
        .zip(weights)
        .map(|(&p, &w)| w / (x - p))
        .collect();
    let denom: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / denom).collect()
}

/// Differentiation matrix `D[i][k] = l_k'(x_i)` and interpolation rows
/// `L[l][k] = l_k(-tau_l)`.
pub fn differentiation_data(mesh: &Mesh, delays: &[f64]) -> Result<(RMat, RMat)> {
    let n = mesh.order + 1;
    let x = &mesh.points;
    let w = barycentric_weights(mesh.order);
    let mut d = linalg::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (x[i] - x[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    let mut l = linalg::zeros(delays.len(), n);
    for (r, &tau) in delays.iter().enumerate() {
        if !(0.0..=mesh.tau_max).contains(&tau) {
            return Err(Error::InvalidOption(format!(
                "delay {tau} outside the mesh interval [0, {}]",
                mesh.tau_max
            )));
        }
        for (k, v) in lagrange_row(x, &w, -tau).into_iter().enumerate() {
            l[(r, k)] = v;
        }
    }
    Ok((d, l))
}

#[derive(Debug, Clone)]
pub struct DiscretizedSystem {
    pub en: RMat,
    pub an: RMat,
    pub bn: RMat,
    pub cn: RMat,
    pub mesh: Mesh,
    pub source_hash: u64,
    d: RMat,
    l: RMat,
    source: DdaeSystem,
}

impl DiscretizedSystem {
    pub fn order(&self) -> usize {
        self.mesh.order
    }

    pub fn source(&self) -> &DdaeSystem {
        &self.source
    }

    /// Rational approximations `r_l(lambda)` of `e^{-lambda tau_l}` implied by
    /// the discretization.
    pub fn exponential_surrogates(&self, lambda: c64) -> Result<Vec<c64>> {
        let nn = self.mesh.order;
        // History coefficients: (lambda I - D_hh) c = D_hN.
        let mut m = CMat::zeros(nn, nn);
        let mut rhs = CMat::zeros(nn, 1);
        for i in 0..nn {
            for k in 0..nn {
                m[(i, k)] = c64::new(-self.d[(i, k)], 0.0);
            }
            m[(i, i)] += lambda;
            rhs[(i, 0)] = c64::new(self.d[(i, nn)], 0.0);
        }
        let c = linalg::solve(&m, &rhs).ok_or(Error::SingularAtLambda {
            re: lambda.re,
            im: lambda.im,
        })?;
        Ok((0..self.l.nrows())
            .map(|r| {
                let mut acc = c64::new(self.l[(r, nn)], 0.0);
                for k in 0..nn {
                    acc += c[(k, 0)] * self.l[(r, k)];
                }
                acc
            })
            .collect())
    }

    /// `T_N(lambda)` by eliminating the history blocks; same value as
    /// [`tn_eval`] at a fraction of the cost.
    pub fn tn_eval_fast(&self, lambda: c64) -> Result<CMat> {
        let sys = &self.source;
        let r = self.exponential_surrogates(lambda)?;
        let mut m = linalg::scaled(sys.e(), lambda);
        linalg::axpy_real(&mut m, c64::new(-1.0, 0.0), &sys.a()[0]);
        for (ai, &ri) in sys.a()[1..].iter().zip(&r) {
            linalg::axpy_real(&mut m, -ri, ai);
        }
        let x = linalg::solve(&m, &linalg::complexify(sys.b())).ok_or(Error::SingularAtLambda {
            re: lambda.re,
            im: lambda.im,
        })?;
        Ok(linalg::rc_mul(sys.c(), &x))
    }
}

/// Builds `(E_N, A_N, B_N, C_N)` of order `order`.
pub fn build(sys: &DdaeSystem, order: usize) -> Result<DiscretizedSystem> {
    let n = sys.n();
    let tau_max = if sys.m() == 0 { 1.0 } else { sys.tau_max() };
    let mesh = build_mesh(order, tau_max)?;
    let (d, l) = differentiation_data(&mesh, sys.delays())?;
    let big = (order + 1) * n;
    let mut an = linalg::zeros(big, big);
    for i in 0..order {
        for k in 0..=order {
            let v = d[(i, k)];
            for s in 0..n {
                an[(i * n + s, k * n + s)] = v;
            }
        }
    }
    let last = order * n;
    for k in 0..=order {
        let mut gamma = if k == order {
            sys.a()[0].clone()
        } else {
            linalg::zeros(n, n)
        };
        for (lidx, al) in sys.a()[1..].iter().enumerate() {
            let c = l[(lidx, k)];
            if c != 0.0 {
                gamma += al * c;
            }
        }
        linalg::set_block(&mut an, last, k * n, &gamma);
    }
    let mut en = linalg::identity(big);
    linalg::set_block(&mut en, last, last, sys.e());
    let mut bn = linalg::zeros(big, sys.nw());
    linalg::set_block(&mut bn, last, 0, sys.b());
    let mut cn = linalg::zeros(sys.nz(), big);
    linalg::set_block(&mut cn, 0, last, sys.c());
    Ok(DiscretizedSystem {
        en,
        an,
        bn,
        cn,
        mesh,
        source_hash: sys.stable_hash(),
        d,
        l,
        source: sys.clone(),
    })
}

/// `C_N (lambda E_N - A_N)^{-1} B_N` by one dense solve.
pub fn tn_eval(disc: &DiscretizedSystem, lambda: c64) -> Result<CMat> {
    let mut m = linalg::scaled(&disc.en, lambda);
    linalg::axpy_real(&mut m, c64::new(-1.0, 0.0), &disc.an);
    let x = linalg::solve(&m, &linalg::complexify(&disc.bn)).ok_or(Error::SingularAtLambda {
        re: lambda.re,
        im: lambda.im,
    })?;
    Ok(linalg::rc_mul(&disc.cn, &x))
}
