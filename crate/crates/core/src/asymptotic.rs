//! The asymptotic transfer function and its strong H-infinity norm.
//!
//! At high frequencies only the algebraic part of the system survives:
//!
//! ```text
//! Ta(theta) = C2 A22(theta)^{-1} B2,
//! A22(theta) = -U^T A_0 V - sum_i U^T A_i V e^{-j theta_i}
//! ```
//!
//! Its strong norm is the maximum of `sigma_1(Ta(theta))` over the torus
//! `[0, 2 pi)^m`, independent of the delay values.

use std::f64::consts::PI;

use faer::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat};
use crate::model::{self, DdaeSystem, PartitionedSystem, DEFAULT_RANK_TOL};
use crate::peak::{self, PeakProblem, PeakSolution};

/// Default grid points per phase axis.
pub const DEFAULT_GRID: usize = 20;

#[derive(Debug, Clone)]
pub struct AsymptoticSystem {
    /// `U^T A_i V` for `i = 0..=m` (pruned terms included).
    pub a22: Vec<RMat>,
    pub b2: RMat,
    pub c2: RMat,
    /// Delay indices `i >= 1` kept in `A22(theta)`.
    pub retained: Vec<usize>,
    bbt: RMat,
    ctc: RMat,
}

impl AsymptoticSystem {
    pub fn nu(&self) -> usize {
        self.b2.nrows()
    }

    /// Number of retained delays.
    pub fn m_a(&self) -> usize {
        self.retained.len()
    }

    /// Validates, partitions and prunes with the default tolerances.
    pub fn from_system(sys: &DdaeSystem) -> Result<Self> {
        let bases = model::validate(sys, DEFAULT_RANK_TOL)?;
        let part = model::partition(sys, &bases);
        Ok(reduce_delays(&part, default_prune_tol(sys)))
    }

    /// `-A22_0 - sum_k A22_{retained[k]} e^{-j theta_k}`.
    pub fn a22_theta(&self, theta: &[f64]) -> CMat {
        let mut m = CMat::zeros(self.nu(), self.nu());
        linalg::axpy_real(&mut m, c64::new(-1.0, 0.0), &self.a22[0]);
        for (&i, &t) in self.retained.iter().zip(theta) {
            linalg::axpy_real(&mut m, -c64::new(0.0, -t).exp(), &self.a22[i]);
        }
        m
    }

    pub fn bbt(&self) -> &RMat {
        &self.bbt
    }

    pub fn ctc(&self) -> &RMat {
        &self.ctc
    }
}

/// `1e-12 * max_i |A_i|_2`.
pub fn default_prune_tol(sys: &DdaeSystem) -> f64 {
    1e-12 * sys.max_a_norm()
}

/// Drops delays whose algebraic block `U^T A_i V` is negligible.
pub fn reduce_delays(part: &PartitionedSystem, tol_prune: f64) -> AsymptoticSystem {
    let a22: Vec<RMat> = (0..part.blocks.len())
        .map(|i| part.a22(i).clone())
        .collect();
    let retained = (1..a22.len())
        .filter(|&i| linalg::norm2(&a22[i]) > tol_prune)
        .collect();
    AsymptoticSystem {
        bbt: &part.b2 * part.b2.transpose(),
        ctc: part.c2.transpose() * &part.c2,
        a22,
        b2: part.b2.clone(),
        c2: part.c2.clone(),
        retained,
    }
}

/// `C2 A22(theta)^{-1} B2`; `theta` has one phase per retained delay.
pub fn ta_eval(asys: &AsymptoticSystem, theta: &[f64]) -> Result<CMat> {
    if theta.len() != asys.m_a() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} phases, got {}",
            asys.m_a(),
            theta.len()
        )));
    }
    let m = asys.a22_theta(theta);
    let x = linalg::solve(&m, &linalg::complexify(&asys.b2))
        .ok_or_else(|| Error::SingularAtTheta(theta.to_vec()))?;
    Ok(linalg::rc_mul(&asys.c2, &x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaNormResult {
    pub value: f64,
    pub theta_hat: Vec<f64>,
    #[serde(skip)]
    pub u: Vec<c64>,
    #[serde(skip)]
    pub v: Vec<c64>,
    pub corrected: bool,
}

impl TaNormResult {
    fn zero(m_a: usize) -> Self {
        Self {
            value: 0.0,
            theta_hat: vec![0.0; m_a],
            u: Vec::new(),
            v: Vec::new(),
            corrected: true,
        }
    }
}

/// `index -> theta` on the uniform grid with `p_a` points per axis.
fn grid_point(mut index: usize, p_a: usize, m_a: usize) -> Vec<f64> {
    let mut theta = vec![0.0; m_a];
    for t in theta.iter_mut() {
        *t = 2.0 * PI * (index % p_a) as f64 / p_a as f64;
        index /= p_a;
    }
    theta
}

/// Largest `sigma_1(Ta)` over the phase grid, with its location.
pub fn grid_sweep(asys: &AsymptoticSystem, p_a: usize) -> Result<(f64, Vec<f64>)> {
    let m_a = asys.m_a();
    let count = p_a
        .checked_pow(m_a as u32)
        .ok_or_else(|| Error::InvalidOption(format!("{p_a}^{m_a} grid points overflow")))?;
    let values: Vec<Result<f64>> = (0..count)
        .into_par_iter()
        .map(|k| {
            let theta = grid_point(k, p_a, m_a);
            let t = ta_eval(asys, &theta)?;
            Ok(linalg::singular_values(&t).first().copied().unwrap_or(0.0))
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (k, v) in values.into_iter().enumerate() {
        let v = v?;
        if v > best.0 {
            best = (v, k);
        }
    }
    Ok((best.0, grid_point(best.1, p_a, m_a)))
}

/// Strong H-infinity norm of `Ta` by grid sweep and optional refinement.
pub fn strong_norm_ta(asys: &AsymptoticSystem, p_a: usize, do_correct: bool) -> Result<TaNormResult> {
    if p_a < 2 {
        return Err(Error::InvalidOption(format!("p_a must be at least 2, got {p_a}")));
    }
    let m_a = asys.m_a();
    if asys.nu() == 0 || asys.b2.ncols() == 0 || asys.c2.nrows() == 0 {
        return Ok(TaNormResult::zero(m_a));
    }
    let (value, theta) = grid_sweep(asys, p_a)?;
    if value == 0.0 {
        return Ok(TaNormResult::zero(m_a));
    }
    if m_a == 0 || !do_correct {
        let (u, v) = certificate(asys, &theta)?;
        return Ok(TaNormResult {
            value,
            theta_hat: theta,
            u,
            v,
            corrected: m_a == 0,
        });
    }
    match ta_correct(asys, &theta, value) {
        Ok(res) if res.value >= value - 1e-12 * (1.0 + value) => Ok(res),
        Ok(res) => {
            log::warn!(
                "phase correction moved to a lower peak ({} < {}); keeping the grid value",
                res.value,
                value
            );
            grid_result(asys, value, theta)
        }
        Err(e) => {
            log::warn!("phase correction failed ({e}); keeping the grid value");
            grid_result(asys, value, theta)
        }
    }
}

fn grid_result(asys: &AsymptoticSystem, value: f64, theta: Vec<f64>) -> Result<TaNormResult> {
    let (u, v) = certificate(asys, &theta)?;
    Ok(TaNormResult {
        value,
        theta_hat: theta,
        u,
        v,
        corrected: false,
    })
}

/// Exact `(u, v)` at a phase vector, normalized, built from the top
/// singular triplet of `Ta(theta)`.
fn certificate(asys: &AsymptoticSystem, theta: &[f64]) -> Result<(Vec<c64>, Vec<c64>)> {
    let t = ta_eval(asys, theta)?;
    let (_, y, x) = linalg::top_singular_triplet(&t).ok_or_else(|| Error::SingularAtTheta(theta.to_vec()))?;
    let m = asys.a22_theta(theta);
    let (mut u, mut v) = peak::start_from_triplet(&m, &asys.b2, &asys.c2, &x, &y)
        .ok_or_else(|| Error::SingularAtTheta(theta.to_vec()))?;
    peak::normalize(&mut u, &mut v);
    Ok((u, v))
}

struct PhasePeak<'a> {
    asys: &'a AsymptoticSystem,
}

impl PeakProblem for PhasePeak<'_> {
    fn dim(&self) -> usize {
        self.asys.nu()
    }
    fn nparams(&self) -> usize {
        self.asys.m_a()
    }
    fn matrix(&self, p: &[f64]) -> CMat {
        self.asys.a22_theta(p)
    }
    fn first(&self, p: &[f64]) -> Vec<CMat> {
        self.asys
            .retained
            .iter()
            .zip(p)
            .map(|(&i, &t)| linalg::scaled(&self.asys.a22[i], c64::new(0.0, -t).exp() * c64::new(0.0, 1.0)))
            .collect()
    }
    fn second(&self, p: &[f64]) -> Vec<CMat> {
        let k = self.asys.m_a();
        let nu = self.asys.nu();
        let mut out = vec![CMat::zeros(nu, nu); k * k];
        for (d, (&i, &t)) in self.asys.retained.iter().zip(p).enumerate() {
            out[d * k + d] = linalg::scaled(&self.asys.a22[i], c64::new(0.0, -t).exp());
        }
        out
    }
    fn bbt(&self) -> &RMat {
        &self.asys.bbt
    }
    fn ctc(&self) -> &RMat {
        &self.asys.ctc
    }
}

/// Gauss-Newton refinement of a phase-space peak near `(theta0, xi0)`.
pub fn ta_correct(asys: &AsymptoticSystem, theta0: &[f64], xi0: f64) -> Result<TaNormResult> {
    Ok(ta_correct_detailed(asys, theta0, xi0)?.0)
}

/// As [`ta_correct`], also returning the raw iteration data.
pub fn ta_correct_detailed(
    asys: &AsymptoticSystem,
    theta0: &[f64],
    xi0: f64,
) -> Result<(TaNormResult, PeakSolution)> {
    let t = ta_eval(asys, theta0)?;
    let (_, y, x) = linalg::top_singular_triplet(&t)
        .ok_or_else(|| Error::CorrectionDiverged("empty asymptotic transfer function".into()))?;
    let m = asys.a22_theta(theta0);
    let (u0, v0) = peak::start_from_triplet(&m, &asys.b2, &asys.c2, &x, &y)
        .ok_or_else(|| Error::SingularAtTheta(theta0.to_vec()))?;
    let sol = peak::correct(&PhasePeak { asys }, theta0, xi0, &u0, &v0)?;
    let theta_hat: Vec<f64> = sol.params.iter().map(|t| t.rem_euclid(2.0 * PI)).collect();
    // The corrected level must be the largest singular value, not a lower branch.
    let top = linalg::singular_values(&ta_eval(asys, &theta_hat)?)
        .first()
        .copied()
        .unwrap_or(0.0);
    if (top - sol.xi).abs() > 1e-8 * (1.0 + top) {
        return Err(Error::CorrectionDiverged(format!(
            "converged to singular value {} below the largest {}",
            sol.xi, top
        )));
    }
    Ok((
        TaNormResult {
            value: sol.xi,
            theta_hat,
            u: sol.u.clone(),
            v: sol.v.clone(),
            corrected: true,
        },
        sol,
    ))
}

/// Largest spectral radius of `(A22_0)^{-1} sum_k A22_k e^{-j theta_k}` over
/// the phase grid; below one means the difference part is strongly stable.
pub fn difference_radius(asys: &AsymptoticSystem, p_a: usize) -> Result<f64> {
    let m_a = asys.m_a();
    if asys.nu() == 0 || m_a == 0 {
        return Ok(0.0);
    }
    let a0 = linalg::complexify(&asys.a22[0]);
    let count = p_a.pow(m_a as u32);
    let radii: Vec<Result<f64>> = (0..count)
        .into_par_iter()
        .map(|k| {
            let theta = grid_point(k, p_a, m_a);
            let mut s = CMat::zeros(asys.nu(), asys.nu());
            for (&i, &t) in asys.retained.iter().zip(&theta) {
                linalg::axpy_real(&mut s, c64::new(0.0, -t).exp(), &asys.a22[i]);
            }
            let q = linalg::solve(&a0, &s).ok_or_else(|| Error::SingularAtTheta(theta.clone()))?;
            linalg::spectral_radius(&q)
        })
        .collect();
    radii.into_iter().try_fold(0.0f64, |acc, r| Ok(acc.max(r?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{eq10_system, eq21_system, feedthrough_example};

    fn asys_of(sys: &DdaeSystem) -> AsymptoticSystem {
        AsymptoticSystem::from_system(sys).unwrap()
    }

    #[test]
    fn eq10_asymptotic_norm_is_four() {
        let a = asys_of(&eq10_system(1.0, 2.0));
        assert_eq!(a.retained, vec![1, 2]);
        let r = strong_norm_ta(&a, DEFAULT_GRID, true).unwrap();
        assert!((r.value - 4.0).abs() < 1e-10, "{}", r.value);
        assert!(r.theta_hat[0].min(2.0 * PI - r.theta_hat[0]) < 1e-6);
        assert!((r.theta_hat[1] - PI).abs() < 1e-6);
    }

    #[test]
    fn eq10_asymptotic_values_at_phases() {
        let a = asys_of(&eq10_system(1.0, 2.0));
        let t = ta_eval(&a, &[0.0, PI]).unwrap();
        assert!((t[(0, 0)].norm() - 4.0).abs() < 1e-12);
        let t = ta_eval(&a, &[0.0, 0.0]).unwrap();
        assert!((t[(0, 0)].norm() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn eq21_asymptotic_norm_is_sixteen_sevenths() {
        let a = asys_of(&eq21_system(1.0, 2.0));
        let r = strong_norm_ta(&a, DEFAULT_GRID, true).unwrap();
        assert!((r.value - 16.0 / 7.0).abs() < 1e-10);
    }

    #[test]
    fn correction_from_off_grid_start() {
        let a = asys_of(&eq10_system(1.0, 2.0));
        let theta0 = [0.2, PI - 0.25];
        let t = ta_eval(&a, &theta0).unwrap();
        let xi0 = t[(0, 0)].norm();
        let (res, sol) = ta_correct_detailed(&a, &theta0, xi0).unwrap();
        assert!((res.value - 4.0).abs() < 1e-10);
        // Quadratic convergence: the last ratios shrink.
        let h = &sol.residuals;
        assert!(h.len() >= 3);
        let n = h.len();
        if h[n - 2] > 0.0 && h[n - 3] > 0.0 {
            assert!(h[n - 1] / h[n - 2] < h[n - 2] / h[n - 3] || h[n - 1] < 1e-12);
        }
    }

    #[test]
    fn pruning_keeps_only_algebraic_delays() {
        let a = asys_of(&feedthrough_example(0.6, &[0.7, 1.3, 2.9]));
        assert_eq!(a.retained, vec![1]);
        let r = strong_norm_ta(&a, DEFAULT_GRID, true).unwrap();
        assert!((r.value - 1.6).abs() < 1e-10);
    }

    #[test]
    fn no_algebraic_part_gives_zero() {
        let sys = DdaeSystem::new(
            linalg::identity(1),
            vec![linalg::from_rows(&[vec![-1.0]])],
            linalg::identity(1),
            linalg::identity(1),
            vec![],
        )
        .unwrap();
        let r = strong_norm_ta(&asys_of(&sys), DEFAULT_GRID, true).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn delay_free_algebraic_part_is_constant() {
        // 0 = -y + w, z = y: Ta = 1 with no phases.
        let sys = DdaeSystem::new(
            linalg::zeros(1, 1),
            vec![linalg::from_rows(&[vec![-1.0]])],
            linalg::identity(1),
            linalg::identity(1),
            vec![],
        )
        .unwrap();
        let r = strong_norm_ta(&asys_of(&sys), DEFAULT_GRID, true).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        assert!(r.theta_hat.is_empty());
    }

    #[test]
    fn difference_radius_of_eq10() {
        let a = asys_of(&eq10_system(1.0, 2.0));
        let r = difference_radius(&a, DEFAULT_GRID).unwrap();
        assert!((r - 0.75).abs() < 1e-12);
    }
}
