//! Command-line front end. `run` parses arguments, executes one command and
//! returns the process exit code; results go to `out`, diagnostics to `err`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::asymptotic::{self, AsymptoticSystem, DEFAULT_GRID};
use crate::bench::{self, HeatVariant};
use crate::discretize::DEFAULT_ORDER;
use crate::error::{Error, Result};
use crate::interconnect;
use crate::io::{self, RunReport};
use crate::levelset::{self, Branch, LevelSetOptions};
use crate::model::{self, DEFAULT_RANK_TOL};
use crate::synthesis::{self, OptimizeOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_UNSTABLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ddae-hinf",
    version,
    about = "Strong H-infinity norms and fixed-order controller synthesis for delay differential-algebraic systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct NormArgs {
    /// Discretization order of the delay operator.
    #[arg(long = "N", visible_alias = "order", default_value_t = DEFAULT_ORDER)]
    order: usize,
    /// Relative tolerance of the level-set iteration.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Phase-grid points per axis for the asymptotic norm.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
}

impl NormArgs {
    fn options(&self) -> LevelSetOptions {
        LevelSetOptions {
            order: self.order,
            tol: self.tol,
            grid: self.grid,
            ..LevelSetOptions::default()
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check dimensions, the index of E and the nonsingularity of U^T A_0 V.
    Validate { path: PathBuf },
    /// Strong H-infinity norm of a system file.
    Norm {
        path: PathBuf,
        #[command(flatten)]
        norm: NormArgs,
        /// Plain (delay-sensitive) norm instead of the strong norm.
        #[arg(long)]
        plain: bool,
        /// Extra starting frequencies for the level-set iteration.
        #[arg(long = "seed-frequency", value_name = "OMEGA")]
        seeds: Vec<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Strong norm of the asymptotic transfer function only.
    TaNorm {
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long)]
        json: bool,
    },
    /// Singular values of T(jw) on a frequency grid, as CSV.
    Sweep {
        path: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        wmin: f64,
        #[arg(long, default_value_t = 100.0)]
        wmax: f64,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        /// Logarithmic spacing (requires wmin > 0).
        #[arg(long)]
        log: bool,
        /// Number of singular values per row.
        #[arg(long, default_value_t = 1)]
        sigmas: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Close a plant with a controller and write the resulting system.
    Assemble {
        plant: PathBuf,
        controller: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Optimize the free controller parameters of a template.
    Synthesize {
        plant: PathBuf,
        template: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 400)]
        max_iter: usize,
        #[command(flatten)]
        norm: NormArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Strong exponential stability test.
    Stability {
        path: PathBuf,
        #[arg(long = "N", visible_alias = "order", default_value_t = DEFAULT_ORDER)]
        order: usize,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate the published controllers of a benchmark problem.
    Bench {
        /// Registry name; omit with --list.
        name: Option<String>,
        #[arg(long)]
        list: bool,
        /// Heat-transfer problem: value of A_0(6,6).
        #[arg(long, default_value_t = -0.0588, allow_negative_numbers = true)]
        heat_a66: f64,
        /// Heat-transfer problem: state (1-based) driven by the input.
        #[arg(long, default_value_t = 1)]
        heat_input: usize,
        /// Write the plant of the entry as JSON.
        #[arg(long, value_name = "PATH")]
        export_plant: Option<PathBuf>,
        #[command(flatten)]
        norm: NormArgs,
        #[arg(long)]
        json: bool,
    },
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotStable { .. } | Error::InfeasibleStart(_) => EXIT_UNSTABLE,
        Error::DimensionMismatch(_)
        | Error::NonpositiveDelay { .. }
        | Error::AssumptionOneViolated { .. }
        | Error::AlgebraicLoop(_)
        | Error::IndexOutOfRange { .. }
        | Error::InvalidOption(_)
        | Error::Parse(_)
        | Error::Io(_) => EXIT_INPUT,
        _ => EXIT_NUMERICAL,
    }
}

/// Caps the global thread pool at `DDAE_THREADS` when set.
pub fn configure_threads() {
    if let Some(n) = std::env::var("DDAE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let echo: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut ctx = Ctx {
        out,
        err,
        echo,
        start: Instant::now(),
    };
    match dispatch(&mut ctx, cli.command) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(ctx.err, "error: {e}");
            exit_code(&e)
        }
    }
}

struct Ctx<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    echo: Vec<String>,
    start: Instant,
}

impl Ctx<'_> {
    fn report(&self, options: Value, result: Value, warnings: Vec<String>) -> RunReport {
        RunReport {
            command: self.echo.clone(),
            options,
            result,
            wall_time_s: self.start.elapsed().as_secs_f64(),
            warnings,
        }
    }

    fn emit(&mut self, text: &str) -> Result<()> {
        self.out.write_all(text.as_bytes())?;
        Ok(())
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("plain data serializes")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn dispatch(ctx: &mut Ctx, cmd: Command) -> Result<i32> {
    match cmd {
        Command::Validate { path } => validate(ctx, &path),
        Command::Norm {
            path,
            norm,
            plain,
            seeds,
            json,
        } => {
            let sys = io::load_system(&path)?;
            let mut opts = norm.options();
            opts.seed_frequencies = seeds;
            let options = to_value(&opts);
            if plain {
                let r = levelset::plain_hinf_norm(&sys, &opts, None)?;
                if json {
                    let report = ctx.report(options, to_value(&r), Vec::new());
                    ctx.emit(&(report.to_json() + "\n"))?;
                } else {
                    ctx.emit(&format!(
                        "plain H-infinity norm  {:.6}\nomega                  {:.6}\n",
                        r.value, r.omega
                    ))?;
                }
                return Ok(EXIT_OK);
            }
            let r = levelset::strong_hinf_norm(&sys, &opts)?;
            for w in &r.warnings {
                writeln!(ctx.err, "warning: {w}")?;
            }
            if json {
                let report = ctx.report(options, to_value(&r), r.warnings.clone());
                ctx.emit(&(report.to_json() + "\n"))?;
            } else {
                let mut text = format!("strong H-infinity norm  {:.6}\n", r.value);
                match r.branch {
                    Branch::Frequency => {
                        text += "branch                  frequency\n";
                        if let Some(w) = r.omega_hat {
                            text += &format!("omega                   {w:.6}\n");
                        }
                    }
                    Branch::Asymptotic => {
                        text += "branch                  asymptotic\n";
                        text += &format!("theta                   {:?}\n", r.theta_hat);
                    }
                }
                text += &format!("asymptotic norm         {:.6}\n", r.ta.value);
                text += &format!("levels                  {}\n", r.trace.len());
                ctx.emit(&text)?;
            }
            Ok(EXIT_OK)
        }
        Command::TaNorm { path, grid, json } => {
            let sys = io::load_system(&path)?;
            let asys = AsymptoticSystem::from_system(&sys)?;
            let r = asymptotic::strong_norm_ta(&asys, grid, true)?;
            if json {
                let report = ctx.report(json!({ "grid": grid }), to_value(&r), Vec::new());
                ctx.emit(&(report.to_json() + "\n"))?;
            } else {
                ctx.emit(&format!(
                    "asymptotic strong norm  {:.6}\ntheta                   {:?}\nretained delays         {}\n",
                    r.value,
                    r.theta_hat,
                    asys.m_a()
                ))?;
            }
            Ok(EXIT_OK)
        }
        Command::Sweep {
            path,
            wmin,
            wmax,
            points,
            log,
            sigmas,
            output,
        } => {
            if points == 0 || sigmas == 0 {
                return Err(Error::InvalidOption("--points and --sigmas must be positive".into()));
            }
            if !(wmin >= 0.0 && wmin.is_finite() && wmax.is_finite()) || wmin > wmax {
                return Err(Error::InvalidOption(format!(
                    "need 0 <= wmin <= wmax, got wmin = {wmin}, wmax = {wmax}"
                )));
            }
            if log && wmin <= 0.0 {
                return Err(Error::InvalidOption("--log needs wmin > 0".into()));
            }
            let sys = io::load_system(&path)?;
            let grid = if log {
                model::log_grid(wmin, wmax, points)
            } else {
                model::linear_grid(wmin, wmax, points)
            };
            let curve = model::sigma_sweep(&sys, &grid, sigmas);
            for w in &curve.skipped {
                writeln!(ctx.err, "warning: T(jw) singular at w = {w}; row skipped")?;
            }
            let csv = io::sweep_csv(&curve);
            match output {
                Some(p) => {
                    write_file(&p, &csv)?;
                    if let Some(pk) = curve.peak() {
                        ctx.emit(&format!(
                            "wrote {} rows to {}; peak sigma1 {:.6} at omega {:.6}\n",
                            curve.points.len(),
                            p.display(),
                            pk.sigmas[0],
                            pk.omega
                        ))?;
                    }
                }
                None => ctx.emit(&csv)?,
            }
            Ok(EXIT_OK)
        }
        Command::Assemble {
            plant,
            controller,
            output,
        } => {
            let plant = io::load_plant(&plant)?;
            let tmpl = io::load_template(&controller, &plant)?;
            let pcl = interconnect::assemble(&plant, &tmpl)?;
            let sys = interconnect::instantiate(&pcl, &tmpl.initial_parameters())?;
            let text = io::system_to_json(&sys);
            match output {
                Some(p) => {
                    write_file(&p, &text)?;
                    ctx.emit(&format!(
                        "wrote closed loop with {} states and {} delays to {}\n",
                        sys.n(),
                        sys.m(),
                        p.display()
                    ))?;
                }
                None => ctx.emit(&(text + "\n"))?,
            }
            Ok(EXIT_OK)
        }
        Command::Synthesize {
            plant,
            template,
            seed,
            max_iter,
            norm,
            output,
        } => {
            let plant = io::load_plant(&plant)?;
            let tmpl = io::load_template(&template, &plant)?;
            let pcl = interconnect::assemble(&plant, &tmpl)?;
            let opts = OptimizeOptions {
                seed,
                max_iter,
                levelset: norm.options(),
                ..OptimizeOptions::default()
            };
            let p0 = tmpl.initial_parameters();
            let r = synthesis::optimize(&pcl, &p0, &opts)?;
            let report = ctx.report(to_value(&opts), to_value(&r), Vec::new());
            let summary = format!(
                "optimized strong norm  {:.6}\nbranch                 {}\nparameters             {:?}\nevaluations            {}\nstop                   {}\n",
                r.xi,
                match r.branch {
                    Some(Branch::Frequency) => "frequency",
                    Some(Branch::Asymptotic) => "asymptotic",
                    None => "none",
                },
                r.params,
                r.evaluations,
                r.stop_reason
            );
            match output {
                Some(p) => {
                    write_file(&p, &report.to_json())?;
                    ctx.emit(&summary)?;
                }
                None => ctx.emit(&(report.to_json() + "\n"))?,
            }
            Ok(EXIT_OK)
        }
        Command::Stability {
            path,
            order,
            grid,
            json,
        } => {
            let sys = io::load_system(&path)?;
            let r = synthesis::check_strong_stability(&sys, order, grid)?;
            if json {
                let report = ctx.report(json!({ "N": order, "grid": grid }), to_value(&r), Vec::new());
                ctx.emit(&(report.to_json() + "\n"))?;
            } else {
                ctx.emit(&format!(
                    "strongly stable     {}\nspectral abscissa   {:.6e}\ndifference radius   {:.6}\n",
                    if r.stable { "yes" } else { "no" },
                    r.spectral_abscissa,
                    r.difference_radius
                ))?;
            }
            Ok(if r.stable { EXIT_OK } else { EXIT_UNSTABLE })
        }
        Command::Bench {
            name,
            list,
            heat_a66,
            heat_input,
            export_plant,
            norm,
            json,
        } => {
            if list {
                for n in bench::names() {
                    let e = bench::entry(n)?;
                    ctx.emit(&format!("{n:<22} {}\n", e.description))?;
                }
                return Ok(EXIT_OK);
            }
            let name = name.ok_or_else(|| Error::InvalidOption("missing benchmark name (or --list)".into()))?;
            let entry = if name == "c7_heat11" {
                if heat_input == 0 || heat_input > 11 {
                    return Err(Error::InvalidOption(format!("--heat-input must be in 1..=11, got {heat_input}")));
                }
                bench::c7(HeatVariant {
                    a0_66: heat_a66,
                    input_state: heat_input - 1,
                })
            } else {
                bench::entry(&name)?
            };
            if let Some(p) = export_plant {
                write_file(&p, &io::plant_to_json(&entry.plant))?;
            }
            for note in &entry.notes {
                writeln!(ctx.err, "note: {note}")?;
            }
            let outcomes = bench::evaluate(&entry, &norm.options());
            if json {
                let report = ctx.report(
                    json!({ "name": name, "levelset": to_value(&norm.options()) }),
                    to_value(&outcomes),
                    entry.notes.clone(),
                );
                ctx.emit(&(report.to_json() + "\n"))?;
            } else {
                ctx.emit(&format!("{}: {}\n", entry.name, entry.description))?;
                for o in &outcomes {
                    let line = match (o.computed, &o.error) {
                        (Some(v), _) => format!(
                            "  {:<24} strong norm {:.4}  published {:.4}  {}\n",
                            o.label,
                            v,
                            o.published,
                            if o.within_tolerance { "match" } else { "MISMATCH" }
                        ),
                        (None, Some(e)) => format!("  {:<24} failed: {e}  published {:.4}\n", o.label, o.published),
                        (None, None) => unreachable!(),
                    };
                    ctx.emit(&line)?;
                }
            }
            let unstable = outcomes
                .iter()
                .any(|o| o.error.as_deref().is_some_and(|e| e.contains("not strongly exponentially stable")));
            Ok(if unstable {
                EXIT_UNSTABLE
            } else if outcomes.iter().any(|o| o.computed.is_none()) {
                EXIT_NUMERICAL
            } else {
                EXIT_OK
            })
        }
    }
}

fn validate(ctx: &mut Ctx, path: &Path) -> Result<i32> {
    let sys = io::load_system(path)?;
    let n = sys.n();
    match model::validate(&sys, DEFAULT_RANK_TOL) {
        Ok(bases) => {
            ctx.emit(&format!(
                "n                 {n}\ndelays            {}\nrank(E)           {}\nnu                {}\nU^T A_0 V         nonsingular\nvalid             yes\n",
                sys.m(),
                n - bases.nu,
                bases.nu
            ))?;
            Ok(EXIT_OK)
        }
        Err(e @ Error::AssumptionOneViolated { .. }) => {
            ctx.emit(&format!("n                 {n}\nU^T A_0 V         singular\nvalid             no\n"))?;
            writeln!(ctx.err, "error: {e}")?;
            Ok(EXIT_INPUT)
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("ddae-hinf").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_command_is_usage_error() {
        let (code, _, err) = run_capture(&["frobnicate"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(!err.is_empty());
    }

    #[test]
    fn help_goes_to_stdout() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("synthesize"));
    }

    #[test]
    fn bench_list_names_every_entry() {
        let (code, out, _) = run_capture(&["bench", "--list"]);
        assert_eq!(code, EXIT_OK);
        for n in bench::names() {
            assert!(out.contains(n));
        }
    }

    #[test]
    fn bench_unknown_name() {
        let (code, _, err) = run_capture(&["bench", "c9"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("unknown benchmark"));
    }

    #[test]
    fn missing_file_is_input_error() {
        let (code, _, err) = run_capture(&["norm", "/nonexistent/sys.json"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("error"));
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::Parse("x".into())), EXIT_INPUT);
        assert_eq!(
            exit_code(&Error::NotStable {
                abscissa: 0.1,
                difference_radius: 0.0
            }),
            EXIT_UNSTABLE
        );
        assert_eq!(exit_code(&Error::MaxLevelsExceeded(3)), EXIT_NUMERICAL);
    }
}
