//! Controller synthesis by direct minimization of the strong H-infinity norm.
//!
//! The closed loop depends affinely on the controller parameters, so the
//! derivative of a simple peak follows from its singular vectors. A BFGS run
//! with a weak Wolfe line search does most of the work; gradient sampling
//! then cleans up around kinks where the maximizing peak switches.

use faer::c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{self, AsymptoticSystem};
use crate::discretize;
use crate::error::{Error, Result};
use crate::interconnect::{self, ParamClosedLoop};
use crate::levelset::{self, Branch, LevelSetOptions, StrongNormResult};
use crate::linalg;
use crate::model::{self, DdaeSystem, DEFAULT_RANK_TOL};

/// Relative gap below which two competing peaks count as a tie.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    /// Rightmost finite eigenvalue of the discretized pencil.
    pub spectral_abscissa: f64,
    pub difference_radius: f64,
}

/// Strong exponential stability test: the difference part must be strongly
/// stable and the discretized spectrum must lie in the open left half-plane.
pub fn check_strong_stability(sys: &DdaeSystem, order: usize, p_a: usize) -> Result<StabilityReport> {
    let asys = AsymptoticSystem::from_system(sys)?;
    let difference_radius = asymptotic::difference_radius(&asys, p_a)?;
    let disc = discretize::build(sys, order)?;
    let spectral_abscissa = linalg::finite_generalized_eigenvalues(&disc.an, &disc.en)?
        .into_iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(StabilityReport {
        stable: difference_radius < 1.0 - 1e-6 && spectral_abscissa < -1e-8,
        spectral_abscissa,
        difference_radius,
    })
}

/// Objective value at one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveEval {
    /// Strong norm, or `+inf` when the closed loop is unstable or the
    /// computation failed.
    pub xi: f64,
    pub result: Option<StrongNormResult>,
    /// Present only at smooth points.
    pub grad: Option<Vec<f64>>,
    /// Why `xi` is infinite.
    pub cause: Option<String>,
}

impl ObjectiveEval {
    fn infinite(cause: String) -> Self {
        Self {
            xi: f64::INFINITY,
            result: None,
            grad: None,
            cause: Some(cause),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.xi.is_finite()
    }

    pub fn branch(&self) -> Option<Branch> {
        self.result.as_ref().map(|r| r.branch)
    }
}

/// Strong norm of the closed loop at `p` with gradient when smooth.
pub fn objective(pcl: &ParamClosedLoop, p: &[f64], opts: &LevelSetOptions) -> Result<ObjectiveEval> {
    let sys = interconnect::instantiate(pcl, p)?;
    let res = match levelset::strong_hinf_norm(&sys, opts) {
        Ok(r) => r,
        Err(e) => {
            log::debug!("objective at {p:?} is infinite: {e}");
            return Ok(ObjectiveEval::infinite(e.to_string()));
        }
    };
    let mut eval = ObjectiveEval {
        xi: res.value,
        result: Some(res),
        grad: None,
        cause: None,
    };
    match gradient(pcl, p, &eval) {
        Ok(g) => eval.grad = Some(g),
        Err(e) => log::debug!("no gradient at {p:?}: {e}"),
    }
    Ok(eval)
}

/// Derivative of the strong norm with respect to the parameters, refused at
/// nonsmooth points.
pub fn gradient(pcl: &ParamClosedLoop, p: &[f64], eval: &ObjectiveEval) -> Result<Vec<f64>> {
    gradient_with_tol(pcl, p, eval, TIE_TOL)
}

/// As [`gradient`] with a custom tie tolerance.
pub fn gradient_with_tol(
    pcl: &ParamClosedLoop,
    p: &[f64],
    eval: &ObjectiveEval,
    tie_tol: f64,
) -> Result<Vec<f64>> {
    let res = finite_result(eval)?;
    let sys = interconnect::instantiate(pcl, p)?;
    let xi = res.value;
    let rival = match res.branch {
        Branch::Frequency => Some(res.ta.value),
        Branch::Asymptotic => res.frequency_peak.as_ref().map(|f| f.xi),
    };
    if let Some(r) = rival {
        if (xi - r).abs() <= tie_tol * xi {
            return Err(Error::NonsmoothPoint(format!(
                "asymptotic ({}) and frequency peaks tie",
                res.ta.value
            )));
        }
    }
    let sv = match res.branch {
        Branch::Frequency => {
            let w = res.omega_hat.unwrap_or(0.0);
            linalg::singular_values(&model::transfer(&sys, c64::new(0.0, w))?)
        }
        Branch::Asymptotic => {
            let asys = AsymptoticSystem::from_system(&sys)?;
            if asys.nu() == 0 {
                return Ok(vec![0.0; p.len()]);
            }
            linalg::singular_values(&asymptotic::ta_eval(&asys, &res.theta_hat)?)
        }
    };
    if sv.len() > 1 && sv[1] >= sv[0] * (1.0 - tie_tol) {
        return Err(Error::NonsmoothPoint(format!(
            "largest singular value {} is not simple (next {})",
            sv[0], sv[1]
        )));
    }
    one_sided_gradient(pcl, &sys, res)
}

fn finite_result(eval: &ObjectiveEval) -> Result<&StrongNormResult> {
    match &eval.result {
        Some(r) if eval.xi.is_finite() => Ok(r),
        _ => Err(Error::NonsmoothPoint("objective is infinite".into())),
    }
}

/// Gradient of the active branch without the tie checks.
fn one_sided_gradient(pcl: &ParamClosedLoop, sys: &DdaeSystem, res: &StrongNormResult) -> Result<Vec<f64>> {
    let xi = res.value;
    let (u, v) = (&res.u, &res.v);
    let slots = pcl.slots();
    if xi == 0.0 {
        return Ok(vec![0.0; slots.len()]);
    }
    if u.is_empty() || v.is_empty() {
        return Err(Error::NonsmoothPoint("peak has no certificate".into()));
    }
    match res.branch {
        Branch::Frequency => {
            let w = res.omega_hat.unwrap_or(0.0);
            let bbt = sys.b() * sys.b().transpose();
            let ctc = sys.c().transpose() * sys.c();
            let den = (linalg::quad_form_real(v, &bbt, v) + linalg::quad_form_real(u, &ctc, u)).re;
            if !(den > 0.0) {
                return Err(Error::NonsmoothPoint("vanishing gradient denominator".into()));
            }
            Ok(slots
                .iter()
                .map(|s| {
                    let tau = if s.delay_index == 0 {
                        0.0
                    } else {
                        sys.delays()[s.delay_index - 1]
                    };
                    let dm = -c64::new(0.0, -w * tau).exp() * v[s.row].conj() * u[s.col];
                    -2.0 * xi * xi * dm.re / den
                })
                .collect())
        }
        Branch::Asymptotic => {
            let bases = model::validate(sys, DEFAULT_RANK_TOL)?;
            let asys = AsymptoticSystem::from_system(sys)?;
            let den = (linalg::quad_form_real(v, asys.bbt(), v)
                + linalg::quad_form_real(u, asys.ctc(), u))
            .re;
            if !(den > 0.0) {
                return Err(Error::NonsmoothPoint("vanishing gradient denominator".into()));
            }
            let nu = bases.nu;
            let scale = 1e-12 * (1.0 + sys.max_a_norm());
            slots
                .iter()
                .map(|s| {
                    let mut left = c64::new(0.0, 0.0);
                    let mut right = c64::new(0.0, 0.0);
                    for k in 0..nu {
                        left += v[k].conj() * bases.u[(s.row, k)];
                        right += u[k] * bases.v[(s.col, k)];
                    }
                    let w = left * right;
                    let phase = if s.delay_index == 0 {
                        c64::new(1.0, 0.0)
                    } else if let Some(k) = asys.retained.iter().position(|&i| i == s.delay_index) {
                        c64::new(0.0, -res.theta_hat[k]).exp()
                    } else if w.norm() <= scale {
                        c64::new(0.0, 0.0)
                    } else {
                        return Err(Error::NonsmoothPoint(format!(
                            "parameter enters the pruned delay {}",
                            s.delay_index
                        )));
                    };
                    let dm = -phase * w;
                    Ok(-2.0 * xi * xi * dm.re / den)
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub max_iter: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Sampling radii relative to `1 + |p0|`.
    pub sampling_radii: Vec<f64>,
    /// Samples per parameter at each sampling step.
    pub samples_per_param: usize,
    /// Sampling steps per radius.
    pub sampling_iter: usize,
    pub seed: u64,
    pub step_tol: f64,
    /// Stop once the (sampled) gradient is this small.
    pub grad_tol: f64,
    pub levelset: LevelSetOptions,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 400,
            c1: 1e-4,
            c2: 0.5,
            sampling_radii: vec![1e-2, 1e-3, 1e-4],
            samples_per_param: 2,
            sampling_iter: 20,
            seed: 0,
            step_tol: 1e-8,
            grad_tol: 1e-8,
            levelset: LevelSetOptions::default(),
        }
    }
}

impl OptimizeOptions {
    pub fn check(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::InvalidOption(format!(
                "Wolfe constants must satisfy 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if self.sampling_radii.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::InvalidOption("sampling radii must be positive".into()));
        }
        self.levelset.check()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Start,
    Bfgs,
    Sampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub phase: Phase,
    pub params: Vec<f64>,
    pub xi: f64,
    pub branch: Option<Branch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub params: Vec<f64>,
    pub xi: f64,
    pub branch: Option<Branch>,
    pub trace: Vec<TraceEntry>,
    pub evaluations: usize,
    pub stop_reason: String,
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Option<Vec<f64>>,
    branch: Option<Branch>,
}

struct Evaluator<'a> {
    pcl: &'a ParamClosedLoop,
    opts: &'a LevelSetOptions,
    count: std::sync::atomic::AtomicUsize,
}

impl Evaluator<'_> {
    fn eval(&self, x: &[f64]) -> Result<Point> {
        self.count.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let e = objective(self.pcl, x, self.opts)?;
        let g = match (&e.grad, &e.result) {
            (Some(g), _) => Some(g.clone()),
            (None, Some(r)) => {
                // Kinks are reached only approximately; take the active side.
                let sys = interconnect::instantiate(self.pcl, x)?;
                one_sided_gradient(self.pcl, &sys, r).ok()
            }
            (None, None) => None,
        };
        Ok(Point {
            x: x.to_vec(),
            f: e.xi,
            branch: e.branch(),
            g,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

/// Weak Wolfe line search by bracketing; infinite values shrink the bracket.
fn weak_wolfe(ev: &Evaluator, cur: &Point, d: &[f64], opts: &OptimizeOptions) -> Result<Option<Point>> {
    let g0 = cur.g.as_ref().expect("current point has a gradient");
    let slope = dot(g0, d);
    let (mut lo, mut hi, mut t) = (0.0f64, f64::INFINITY, 1.0f64);
    let mut best: Option<Point> = None;
    for _ in 0..60 {
        let trial = ev.eval(&axpy(&cur.x, t, d))?;
        if !(trial.f <= cur.f + opts.c1 * t * slope) || trial.g.is_none() {
            hi = t;
        } else {
            let curv = dot(trial.g.as_ref().unwrap(), d);
            if curv < opts.c2 * slope {
                lo = t;
                best = Some(trial);
            } else {
                return Ok(Some(trial));
            }
        }
        t = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo.max(t) };
        if hi.is_finite() && (hi - lo) * norm(d) < 1e-14 * (1.0 + norm(&cur.x)) {
            break;
        }
    }
    // A sufficient-decrease point without the curvature condition still helps.
    Ok(best)
}

/// BFGS followed by gradient sampling, from a strongly stabilizing start.
pub fn optimize(pcl: &ParamClosedLoop, p0: &[f64], opts: &OptimizeOptions) -> Result<OptimizeResult> {
    opts.check()?;
    let ev = Evaluator {
        pcl,
        opts: &opts.levelset,
        count: Default::default(),
    };
    let start = ev.eval(p0)?;
    if !start.f.is_finite() {
        let e = objective(pcl, p0, &opts.levelset)?;
        return Err(Error::InfeasibleStart(e.cause.unwrap_or_default()));
    }
    let dim = p0.len();
    let mut trace = vec![TraceEntry {
        iteration: 0,
        phase: Phase::Start,
        params: start.x.clone(),
        xi: start.f,
        branch: start.branch,
    }];
    let mut iter = 0usize;
    let mut cur = start;
    let mut stop = String::from("iteration limit");

    // BFGS with an inverse-Hessian approximation.
    let mut h = vec![vec![0.0; dim]; dim];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut scaled = false;
    while iter < opts.max_iter {
        let Some(g) = cur.g.clone() else {
            stop = "no gradient at the current point".into();
            break;
        };
        if norm(&g) <= opts.grad_tol {
            stop = "gradient below tolerance".into();
            break;
        }
        let mut d: Vec<f64> = h.iter().map(|row| -dot(row, &g)).collect();
        if dot(&d, &g) >= 0.0 {
            for (i, row) in h.iter_mut().enumerate() {
                row.iter_mut().for_each(|x| *x = 0.0);
                row[i] = 1.0;
            }
            d = g.iter().map(|x| -x).collect();
        }
        let Some(next) = weak_wolfe(&ev, &cur, &d, opts)? else {
            stop = "line search failed".into();
            break;
        };
        iter += 1;
        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let step = norm(&s);
        if let Some(gn) = &next.g {
            let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 0.0 {
                if !scaled {
                    let gamma = sy / dot(&y, &y);
                    h.iter_mut().flatten().for_each(|x| *x *= gamma);
                    scaled = true;
                }
                bfgs_update(&mut h, &s, &y, sy);
            }
        }
        cur = next;
        trace.push(TraceEntry {
            iteration: iter,
            phase: Phase::Bfgs,
            params: cur.x.clone(),
            xi: cur.f,
            branch: cur.branch,
        });
        if step < opts.step_tol * (1.0 + norm(&cur.x)) {
            stop = "step below tolerance".into();
            break;
        }
    }
    log::info!("BFGS stopped after {iter} iterations ({stop}), xi = {}", cur.f);

    // Gradient sampling around the BFGS endpoint.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let base_radius = 1.0 + norm(p0);
    let samples = (opts.samples_per_param * dim).max(1);
    'radii: for &r in &opts.sampling_radii {
        let eps = r * base_radius;
        for _ in 0..opts.sampling_iter {
            if iter >= opts.max_iter {
                break 'radii;
            }
            let pts: Vec<Vec<f64>> = (0..samples).map(|_| ball_point(&mut rng, &cur.x, eps)).collect();
            let evals: Vec<Result<Point>> = pts.par_iter().map(|x| ev.eval(x)).collect();
            let mut grads: Vec<Vec<f64>> = cur.g.iter().cloned().collect();
            for e in evals {
                if let Some(g) = e?.g {
                    grads.push(g);
                }
            }
            if grads.is_empty() {
                break;
            }
            let gmin = min_norm_element(&grads);
            let gn = norm(&gmin);
            if gn <= opts.grad_tol.max(1e-6) {
                break;
            }
            let d: Vec<f64> = gmin.iter().map(|x| -x).collect();
            let mut t = 1.0;
            let mut accepted = None;
            while t * gn > 1e-12 * base_radius {
                let trial = ev.eval(&axpy(&cur.x, t, &d))?;
                if trial.f < cur.f - opts.c1 * t * gn * gn {
                    accepted = Some(trial);
                    break;
                }
                t *= 0.5;
            }
            let Some(next) = accepted else {
                break;
            };
            iter += 1;
            let step = t * gn;
            cur = next;
            trace.push(TraceEntry {
                iteration: iter,
                phase: Phase::Sampling,
                params: cur.x.clone(),
                xi: cur.f,
                branch: cur.branch,
            });
            if step < opts.step_tol * (1.0 + norm(&cur.x)) {
                break;
            }
        }
    }

    Ok(OptimizeResult {
        params: cur.x,
        xi: cur.f,
        branch: cur.branch,
        trace,
        evaluations: ev.count.load(std::sync::atomic::Ordering::Relaxed),
        stop_reason: stop,
    })
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Uniform sample from the ball of radius `eps` around `x`.
fn ball_point(rng: &mut ChaCha8Rng, x: &[f64], eps: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
    let len = norm(&dir).max(f64::MIN_POSITIVE);
    let radius = eps * rng.random::<f64>().powf(1.0 / x.len() as f64);
    x.iter().zip(&dir).map(|(a, d)| a + radius * d / len).collect()
}

/// Smallest-norm point in the convex hull of `grads`, by projected
/// gradient descent on the simplex of weights.
fn min_norm_element(grads: &[Vec<f64>]) -> Vec<f64> {
    let k = grads.len();
    let gram: Vec<Vec<f64>> = grads
        .iter()
        .map(|a| grads.iter().map(|b| dot(a, b)).collect())
        .collect();
    let lip: f64 = (0..k).map(|i| gram[i][i]).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut w = vec![1.0 / k as f64; k];
    for _ in 0..5000 {
        let grad: Vec<f64> = gram.iter().map(|row| dot(row, &w)).collect();
        let next: Vec<f64> = w.iter().zip(&grad).map(|(a, g)| a - g / lip).collect();
        let next = project_simplex(&next);
        let change: f64 = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
        w = next;
        if change < 1e-15 {
            break;
        }
    }
    let dim = grads[0].len();
    (0..dim)
        .map(|j| grads.iter().zip(&w).map(|(g, wi)| wi * g[j]).sum())
        .collect()
}

fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, eq10_system};
    use crate::interconnect::assemble;

    #[test]
    fn eq10_stability_report() {
        let r = check_strong_stability(&eq10_system(1.0, 2.0), 20, 20).unwrap();
        assert!(r.stable);
        assert!((r.difference_radius - 0.75).abs() < 1e-12);
        assert!(r.spectral_abscissa < 0.0);
    }

    #[test]
    fn delay_free_system_has_zero_radius() {
        let sys = DdaeSystem::new(
            linalg::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]),
            vec![linalg::from_rows(&[vec![-1.0, 1.0], vec![0.0, -1.0]])],
            linalg::from_rows(&[vec![1.0], vec![1.0]]),
            linalg::from_rows(&[vec![1.0, 1.0]]),
            vec![],
        )
        .unwrap();
        let r = check_strong_stability(&sys, 10, 20).unwrap();
        assert!(r.stable);
        assert_eq!(r.difference_radius, 0.0);
        assert!((r.spectral_abscissa + 1.0).abs() < 1e-8);
    }

    #[test]
    fn scalar_loop_outside_stability_interval_is_infinite() {
        let (plant, tpl) = catalog::scalar_loop(1.6);
        let pcl = assemble(&plant, &tpl).unwrap();
        let e = objective(&pcl, &[1.6], &LevelSetOptions::default()).unwrap();
        assert!(e.xi.is_infinite());
        assert!(e.grad.is_none());
        assert!(e.cause.is_some());
    }

    #[test]
    fn scalar_loop_gradient_matches_differences() {
        let (plant, tpl) = catalog::scalar_loop(-3.0);
        let pcl = assemble(&plant, &tpl).unwrap();
        let opts = LevelSetOptions::default();
        let e = objective(&pcl, &[-3.0], &opts).unwrap();
        let g = e.grad.clone().expect("smooth point");
        let h = 1e-6 * 3.0;
        let fp = objective(&pcl, &[-3.0 + h], &opts).unwrap().xi;
        let fm = objective(&pcl, &[-3.0 - h], &opts).unwrap().xi;
        let fd = (fp - fm) / (2.0 * h);
        assert!((g[0] - fd).abs() <= 1e-5 * fd.abs().max(1e-3), "{} vs {fd}", g[0]);
    }

    #[test]
    fn simplex_projection() {
        let w = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(w.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(project_simplex(&[2.0, -1.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn min_norm_of_opposite_gradients_is_zero() {
        let g = min_norm_element(&[vec![1.0, 1.0], vec![-1.0, 1.0], vec![0.0, -1.0]]);
        assert!(norm(&g) < 1e-8, "{g:?}");
        let g = min_norm_element(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((g[0] - 0.5).abs() < 1e-10 && (g[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn bad_wolfe_constants_are_rejected() {
        let opts = OptimizeOptions {
            c1: 0.6,
            ..Default::default()
        };
        assert!(matches!(opts.check(), Err(Error::InvalidOption(_))));
    }
}
