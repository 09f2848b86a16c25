//! Acceptance suite: one line per check, PASS or FAIL. Runs as a plain
//! binary so the report is always printed.
//!
//! A few published values cannot be reproduced from the published data.
//! Those checks are still computed and reported as FAIL, marked `known`,
//! and do not change the exit status; the README lists the reasons.

use std::f64::consts::{E, PI};
use std::time::Instant;

use ddae_hinf::asymptotic::{self, AsymptoticSystem, DEFAULT_GRID};
use ddae_hinf::bench;
use ddae_hinf::catalog;
use ddae_hinf::discretize;
use ddae_hinf::interconnect::{self, ParamClosedLoop};
use ddae_hinf::levelset::{self, LevelSetOptions};
use ddae_hinf::linalg::CMat;
use ddae_hinf::model::{self, DdaeSystem};
use ddae_hinf::synthesis::{self, OptimizeOptions};
use faer::c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Check {
    criterion: u32,
    name: String,
    pass: bool,
    detail: String,
    /// Reason the check cannot pass with the published data.
    known: Option<&'static str>,
}

struct Report {
    checks: Vec<Check>,
}

impl Report {
    fn check(&mut self, criterion: u32, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.push(criterion, name.into(), pass, detail.into(), None);
    }

    fn known(&mut self, criterion: u32, name: impl Into<String>, pass: bool, detail: impl Into<String>, why: &'static str) {
        self.push(criterion, name.into(), pass, detail.into(), Some(why));
    }

    fn push(&mut self, criterion: u32, name: String, pass: bool, detail: String, known: Option<&'static str>) {
        let tag = if pass { "PASS" } else { "FAIL" };
        let suffix = match (&known, pass) {
            (Some(why), false) => format!("  [known: {why}]"),
            _ => String::new(),
        };
        println!("{tag} criterion {criterion:>2}: {name} -- {detail}{suffix}");
        self.checks.push(Check {
            criterion,
            name,
            pass,
            detail,
            known,
        });
    }

    fn timed<T>(&mut self, criterion: u32, limit_s: f64, f: impl FnOnce(&mut Self) -> T) -> T {
        let t = Instant::now();
        let out = f(self);
        let s = t.elapsed().as_secs_f64();
        self.check(criterion, format!("runtime below {limit_s} s"), s < limit_s, format!("{s:.2} s"));
        out
    }
}

fn near(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn criterion_1(r: &mut Report) {
    r.timed(1, 1.0, |r| {
        let asys = AsymptoticSystem::from_system(&catalog::eq10_system(1.0, 2.0)).unwrap();
        let ta = asymptotic::strong_norm_ta(&asys, DEFAULT_GRID, true).unwrap();
        r.check(
            1,
            "strong asymptotic norm of the neutral loop is 4",
            near(ta.value, 4.0, 1e-6),
            format!("{:.9} at theta {:?}", ta.value, ta.theta_hat),
        );
    });
}

fn criterion_2(r: &mut Report) {
    r.timed(2, 1.0, |r| {
        let asys = AsymptoticSystem::from_system(&catalog::eq21_system(1.0, 2.0)).unwrap();
        let ta = asymptotic::strong_norm_ta(&asys, DEFAULT_GRID, true).unwrap();
        r.check(
            2,
            "strong asymptotic norm of the second loop is 16/7",
            near(ta.value, 16.0 / 7.0, 1e-6),
            format!("{:.9} (16/7 = {:.9})", ta.value, 16.0 / 7.0),
        );
    });
}

fn criterion_3(r: &mut Report) {
    r.timed(3, 5.0, |r| {
        let sys = catalog::eq10_system(1.0, 2.0);
        let p = levelset::plain_hinf_norm(&sys, &LevelSetOptions::default(), None).unwrap();
        r.check(
            3,
            "plain norm at tau = (1, 2) is 2.5788 at omega 1.6555",
            near(p.value, 2.5788, 5e-3) && near(p.omega, 1.6555, 5e-3),
            format!("{:.6} at omega {:.6}", p.value, p.omega),
        );
    });
}

fn criterion_4(r: &mut Report) {
    r.timed(4, 30.0, |r| {
        let opts = LevelSetOptions::default();
        for (tau1, value, omega) in [(0.99, 3.9993, 158.66), (0.999, 3.9944, 1515.8)] {
            let sys = catalog::eq10_system(tau1, 2.0);
            let local = levelset::correct_peak_from_sample(&sys, omega).unwrap();
            r.check(
                4,
                format!("tau1 = {tau1}: plain-norm peak {value} near omega {omega}"),
                near(local.xi, value, 5e-3) && near(local.omega, omega, 0.1),
                format!("{:.6} at omega {:.4}", local.xi, local.omega),
            );
            let global = levelset::plain_hinf_norm(&sys, &opts, None).unwrap();
            let pass = near(global.value, value, 5e-3);
            let detail = format!(
                "supremum on [0, {:.0}] is {:.6} at omega {:.4}",
                global.omega_max, global.value, global.omega
            );
            let name = format!("tau1 = {tau1}: plain norm (global supremum) equals {value}");
            if tau1 == 0.999 {
                r.known(
                    4,
                    name,
                    pass,
                    detail,
                    "the quoted value is the first large peak; later peaks of this quasi-periodic curve come closer to 4",
                );
            } else {
                r.check(4, name, pass, detail);
            }
        }
        for (t1, t2) in [(1.0, 2.0), (0.99, 2.0), (0.999, 2.0)] {
            let s = levelset::strong_hinf_norm(&catalog::eq10_system(t1, t2), &opts).unwrap();
            r.check(
                4,
                format!("strong norm at tau = ({t1}, {t2}) stays 4"),
                near(s.value, 4.0, 1e-3),
                format!("{:.6}, {:?} branch", s.value, s.branch),
            );
        }
    });
}

fn criterion_5(r: &mut Report) {
    r.timed(5, 10.0, |r| {
        let sys = catalog::eq21_system(1.0, 2.0);
        let opts = LevelSetOptions {
            order: 20,
            tol: 1e-3,
            auto_seeds: false,
            ..LevelSetOptions::default()
        };
        let res = levelset::strong_hinf_norm(&sys, &opts).unwrap();
        let crossings_match = |got: &[f64], want: &[f64]| {
            got.len() == want.len() && got.iter().zip(want).all(|(g, w)| near(*g, *w, 2e-3))
        };
        let first = &res.trace[0];
        r.check(
            5,
            "first predicted level 2.2903 with crossings {1.6600, 1.8786}",
            near(first.level, 2.2903, 2e-3) && crossings_match(&first.crossings, &[1.6600, 1.8786]),
            format!("{:.6} with {:?}", first.level, first.crossings),
        );
        let second = res.trace.get(1);
        r.check(
            5,
            "second predicted level 2.3903",
            second.is_some_and(|s| near(s.level, 2.3903, 2e-3)),
            format!("{:?}", second.map(|s| s.level)),
        );
        r.known(
            5,
            "second level has crossings {1.7656, 1.7786}",
            second.is_some_and(|s| crossings_match(&s.crossings, &[1.7656, 1.7786])),
            format!("{:?}", second.map(|s| s.crossings.clone())),
            "the exact peak is 2.385464, below 2.3903; the quoted crossings belong to level 2.3851",
        );
        r.check(
            5,
            "corrected result 2.3859 at omega 1.7721",
            near(res.value, 2.3859, 1e-3) && res.omega_hat.is_some_and(|w| near(w, 1.7721, 1e-3)),
            format!("{:.6} at omega {:?}", res.value, res.omega_hat),
        );
    });
}

fn criterion_6(r: &mut Report) {
    r.timed(6, 120.0, |r| {
        let (plant, tpl) = catalog::scalar_loop(-7.4);
        let pcl = interconnect::assemble(&plant, &tpl).unwrap();
        let res = synthesis::optimize(&pcl, &[-7.4], &OptimizeOptions::default()).unwrap();
        r.check(
            6,
            "scalar synthesis from K = -7.4 reaches xi <= 0.2237 near K = -0.8813",
            res.xi <= 0.2237 && near(res.params[0], -0.8813, 0.05),
            format!("K = {:.6}, xi = {:.6}, {} evaluations", res.params[0], res.xi, res.evaluations),
        );
    });
}

fn criterion_7(r: &mut Report) {
    r.timed(7, 180.0, |r| {
        let (plant, tpl) = catalog::second_example_loop(1.0, 2.0);
        let pcl = interconnect::assemble(&plant, &tpl).unwrap();
        let at = synthesis::objective(&pcl, &[-0.3533, -0.1012], &LevelSetOptions::default()).unwrap();
        r.check(
            7,
            "objective at the published optimum is 1.8333",
            near(at.xi, 1.8333, 1e-2),
            format!("{:.6}", at.xi),
        );
        let res = synthesis::optimize(&pcl, &[0.25, -0.5], &OptimizeOptions::default()).unwrap();
        r.check(
            7,
            "two-gain synthesis from (0.25, -0.5) reaches xi <= 1.8433",
            res.xi <= 1.8433,
            format!("K = {:?}, xi = {:.6}", res.params, res.xi),
        );
    });
}

fn criterion_8(r: &mut Report) {
    let opts = LevelSetOptions::default();
    let cases: [(&str, usize, f64, f64); 6] = [
        ("c2_fridman1998_ex1", 0, 0.4005, 1e-2),
        ("c3_fridman_ex2", 0, 2.9091, 5e-2),
        ("c6_robust", 0, 3.3145, 1e-2),
        ("c7_heat11", 0, 386.3491, 1.0),
        ("c8_bfg_ex2", 0, 1.3907, 1e-2),
        ("c8_bfg_ex2", 1, 1.2513, 1e-2),
    ];
    for (name, idx, value, tol) in cases {
        let t = Instant::now();
        let mut entry = bench::entry(name).unwrap();
        let c = entry.controllers.swap_remove(idx);
        entry.controllers = vec![c];
        let o = bench::evaluate(&entry, &opts).remove(0);
        let secs = t.elapsed().as_secs_f64();
        let pass = o.computed.is_some_and(|v| near(v, value, tol)) && secs < 60.0;
        let detail = match (o.computed, &o.error) {
            (Some(v), _) => format!("{v:.6} (published {value}, {secs:.2} s)"),
            (None, e) => format!("{} (published {value})", e.as_deref().unwrap_or("no value")),
        };
        let label = format!("{name} {} gives {value} +- {tol}", o.label);
        if name == "c7_heat11" {
            r.known(
                8,
                label,
                pass,
                detail,
                "the input matrix is not published and no tried candidate stabilizes the loop with the published gain",
            );
        } else {
            r.check(8, label, pass, detail);
        }
    }
}

fn criterion_9(r: &mut Report) {
    r.timed(9, 30.0, |r| {
        let entry = bench::entry("c8_bfg_ex2").unwrap();
        let tpl = &entry.controllers[0].template;
        let pcl = interconnect::assemble(&entry.plant, tpl).unwrap();
        let sys = interconnect::instantiate(&pcl, &tpl.initial_parameters()).unwrap();
        let disc = discretize::build(&sys, 20).unwrap();
        let eig = levelset::pencil_eigenvalues(&disc, 2.0).unwrap();
        let worst = eig
            .iter()
            .map(|l| {
                let mirror = -l.conj();
                let d = eig.iter().map(|m| (m - mirror).norm()).fold(f64::INFINITY, f64::min);
                d / l.norm().max(1.0)
            })
            .fold(0.0, f64::max);
        r.check(
            9,
            "pencil spectrum at xi = 2 is closed under reflection in the imaginary axis",
            worst <= 1e-8,
            format!("{} finite eigenvalues, worst relative mismatch {worst:.2e}", eig.len()),
        );
    });
}

/// Largest relative deviation between the analytic gradient and central
/// differences at `p`, or `None` when `p` is not a smooth stable point.
fn gradient_gap(pcl: &ParamClosedLoop, p: &[f64], opts: &LevelSetOptions) -> Option<f64> {
    let at = synthesis::objective(pcl, p, opts).ok()?;
    let g = at.grad.clone()?;
    let mut fd = vec![0.0; p.len()];
    for k in 0..p.len() {
        let h = 1e-5 * (1.0 + p[k].abs());
        let mut pp = p.to_vec();
        let mut pm = p.to_vec();
        pp[k] += h;
        pm[k] -= h;
        let ep = synthesis::objective(pcl, &pp, opts).ok()?;
        let em = synthesis::objective(pcl, &pm, opts).ok()?;
        let omega = |e: &synthesis::ObjectiveEval| e.result.as_ref().and_then(|r| r.omega_hat);
        let same_piece = |e: &synthesis::ObjectiveEval| {
            e.is_finite()
                && e.grad.is_some()
                && e.branch() == at.branch()
                && match (omega(&at), omega(e)) {
                    (Some(a), Some(b)) => (a - b).abs() <= 1e-2 * (1.0 + a),
                    (None, None) => true,
                    _ => false,
                }
        };
        if !same_piece(&ep) || !same_piece(&em) {
            return None;
        }
        fd[k] = (ep.xi - em.xi) / (2.0 * h);
    }
    let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-8);
    Some(g.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale)
}

fn criterion_10(r: &mut Report) {
    r.timed(10, 120.0, |r| {
        let opts = LevelSetOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);

        let (plant, tpl) = catalog::scalar_loop(-1.0);
        let scalar = interconnect::assemble(&plant, &tpl).unwrap();
        let entry = bench::entry("c8_bfg_ex2").unwrap();
        let c8tpl = &entry.controllers[1].template;
        let c8 = interconnect::assemble(&entry.plant, c8tpl).unwrap();
        let c8p0 = c8tpl.initial_parameters();

        let draws: [(&str, &ParamClosedLoop, Box<dyn Fn(&mut ChaCha8Rng) -> Vec<f64>>); 2] = [
            ("scalar loop", &scalar, Box::new(|rng: &mut ChaCha8Rng| vec![rng.random_range(-6.0..0.5)])),
            (
                "order-1 controller of the four-state plant",
                &c8,
                Box::new(move |rng: &mut ChaCha8Rng| {
                    c8p0.iter().map(|&v| v + rng.random_range(-0.2..0.2) * (0.1 + v.abs())).collect()
                }),
            ),
        ];
        for (label, pcl, draw) in draws {
            let mut worst = 0.0f64;
            let mut accepted = 0;
            let mut tried = 0;
            while accepted < 20 && tried < 200 {
                tried += 1;
                let p = draw(&mut rng);
                if let Some(gap) = gradient_gap(pcl, &p, &opts) {
                    worst = worst.max(gap);
                    accepted += 1;
                }
            }
            r.check(
                10,
                format!("{label}: gradient matches central differences at 20 points"),
                accepted == 20 && worst <= 1e-5,
                format!("{accepted} smooth points of {tried} draws, worst relative error {worst:.2e}"),
            );
        }
    });
}

fn criterion_11(r: &mut Report) {
    r.timed(11, 1.0, |r| {
        let values: Vec<f64> = [(1.0, 2.0), (0.3, 5.7), (PI, E)]
            .iter()
            .map(|&(a, b)| {
                let asys = AsymptoticSystem::from_system(&catalog::eq10_system(a, b)).unwrap();
                asymptotic::strong_norm_ta(&asys, DEFAULT_GRID, true).unwrap().value
            })
            .collect();
        let spread = values.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))
            - values.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        r.check(
            11,
            "asymptotic norm is the same for tau = (1, 2), (0.3, 5.7), (pi, e)",
            spread <= 1e-12,
            format!("values {values:?}, spread {spread:.1e}"),
        );
    });
}

fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    let mut m = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

fn criterion_12(r: &mut Report) {
    r.timed(12, 10.0, |r| {
        let free = DdaeSystem::new(
            ddae_hinf::linalg::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]),
            vec![ddae_hinf::linalg::from_rows(&[vec![-1.0, 2.0], vec![0.5, -2.0]])],
            ddae_hinf::linalg::from_rows(&[vec![1.0], vec![0.3]]),
            ddae_hinf::linalg::from_rows(&[vec![1.0, -1.0]]),
            vec![],
        )
        .unwrap();
        for order in [5, 20] {
            let disc = discretize::build(&free, order).unwrap();
            let err = [0.0, 0.7, 3.0, 40.0]
                .iter()
                .map(|&w| {
                    let s = c64::new(0.0, w);
                    max_abs_diff(&discretize::tn_eval(&disc, s).unwrap(), &model::transfer(&free, s).unwrap())
                })
                .fold(0.0, f64::max);
            r.check(
                12,
                format!("delay-free system is reproduced exactly at N = {order}"),
                err <= 1e-12,
                format!("max error {err:.2e}"),
            );
        }
        let sys = catalog::eq10_system(1.0, 2.0);
        let s = c64::new(0.0, 1.6555);
        let exact = model::transfer(&sys, s).unwrap();
        let errs: Vec<f64> = [5, 10, 20]
            .iter()
            .map(|&n| max_abs_diff(&discretize::tn_eval(&discretize::build(&sys, n).unwrap(), s).unwrap(), &exact))
            .collect();
        r.check(
            12,
            "error at omega = 1.6555 drops at least tenfold per step over N = 5, 10, 20",
            errs[1] * 10.0 <= errs[0] && errs[2] * 10.0 <= errs[1],
            format!("errors {}", errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")),
        );
    });
}

fn main() {
    // `cargo test` passes harness flags such as --nocapture or a filter; a
    // filter that names no criterion skips the suite.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    let mut r = Report { checks: Vec::new() };
    let criteria: [fn(&mut Report); 12] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
        criterion_11,
        criterion_12,
    ];
    for c in criteria {
        c(&mut r);
    }

    println!();
    let mut unexpected = 0;
    for n in 1..=12u32 {
        let checks: Vec<&Check> = r.checks.iter().filter(|c| c.criterion == n).collect();
        let failed: Vec<&&Check> = checks.iter().filter(|c| !c.pass).collect();
        let known = failed.iter().all(|c| c.known.is_some());
        let line = if failed.is_empty() {
            "PASS".to_string()
        } else if known {
            format!("FAIL (known: {})", failed.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join("; "))
        } else {
            "FAIL".to_string()
        };
        println!("criterion {n:>2}: {line}");
        unexpected += failed.iter().filter(|c| c.known.is_none()).count();
    }
    let failed_known = r.checks.iter().filter(|c| !c.pass && c.known.is_some()).count();
    println!(
        "\nacceptance: {} checks, {} passed, {} known failures, {} unexpected failures",
        r.checks.len(),
        r.checks.iter().filter(|c| c.pass).count(),
        failed_known,
        unexpected
    );
    for c in r.checks.iter().filter(|c| !c.pass && c.known.is_none()) {
        eprintln!("unexpected failure in criterion {}: {} ({})", c.criterion, c.name, c.detail);
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}
