use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nonlocal_ld::hamiltonian::{h_value_with, Mode};
use nonlocal_ld::harness::{run_study, InitialDatum, StudyConfig};
use nonlocal_ld::legendre::{conjugate_many, LawForm};
use nonlocal_ld::ratefn::{bound, rate, rate_capped};
use nonlocal_ld::solver::io::{format_number as num, write_field};
use nonlocal_ld::solver::{self, Convolution, Field, Grid, SolveConfig, TimeStep};
use nonlocal_ld::{selftest, Error, Execution, Kernel};

#[derive(Parser)]
#[command(name = "nonlocal-ld", version, about = "Non-local diffusion, jump Hamiltonians and large-deviation rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate H, H' and H'' over momenta.
    Hamiltonian(HamiltonianArgs),
    /// Tabulate the Legendre transform L and its maximizer.
    Legendre(LegendreArgs),
    /// Evaluate the rate function, or the bound for a domain of radius R.
    Rate(RateArgs),
    /// Solve the Dirichlet problem once and dump the field as CSV.
    Solve(SolveArgs),
    /// Run a convergence study over several radii.
    Study(StudyArgs),
    /// Run the invariant suites.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct HamiltonianArgs {
    /// Kernel spec, e.g. `uniform:eta=1`, `gaussian`, `singular:alpha=0.5`.
    #[arg(long)]
    kernel: String,
    /// Comma-separated momenta.
    #[arg(long, allow_hyphen_values = true)]
    p: Option<String>,
    /// Evenly spaced momenta `start:end:count`.
    #[arg(long, allow_hyphen_values = true)]
    p_grid: Option<String>,
    /// Skip closed forms and integrate numerically.
    #[arg(long)]
    quadrature: bool,
}

#[derive(Args)]
struct LegendreArgs {
    #[arg(long)]
    kernel: String,
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    q_grid: Option<String>,
    /// Append the asymptotic law and the ratio L/law.
    #[arg(long)]
    law: bool,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long)]
    kernel: String,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long)]
    t: f64,
    /// Cap A of the truncated rate.
    #[arg(long = "A")]
    cap: Option<f64>,
    /// Domain radius; with --theta prints the bound prediction as JSON.
    #[arg(long = "R")]
    r: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    kernel: String,
    #[arg(long = "R")]
    r: f64,
    #[arg(long)]
    t: f64,
    /// Grid spacing (default depends on the kernel and R).
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Adaptive integration with `rtol,atol`.
    #[arg(long)]
    adaptive: Option<String>,
    /// `direct` or `fft`.
    #[arg(long, default_value = "direct")]
    convolution: String,
    /// `ones` or `indicator:radius=<r>`.
    #[arg(long, default_value = "ones")]
    u0: String,
    /// Dump 1 - u_R computed directly (only for u0 = ones).
    #[arg(long)]
    deviation: bool,
    /// Output CSV path (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    /// Flat key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<String>,
    /// Comma-separated radii.
    #[arg(long = "R")]
    r: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long = "A")]
    cap: Option<String>,
    #[arg(long)]
    u0: Option<String>,
    /// Directory for report.json, rows.csv and profile CSVs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solve radii one after another.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct SelftestArgs {
    /// Run a single suite.
    #[arg(long)]
    suite: Option<String>,
    #[arg(long, default_value_t = 20240607)]
    seed: u64,
    /// List suite names.
    #[arg(long)]
    list: bool,
}

/// Failure that maps to an exit code.
enum Failure {
    Invalid(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

type Outcome = Result<String, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

fn kernel(spec: &str) -> Result<Kernel, Failure> {
    Ok(spec.parse::<Kernel>()?)
}

fn number_list(field: &str, s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("invalid value for {field}: {v:?} is not a number")))
        })
        .collect()
}

fn grid_list(field: &str, s: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || invalid(format!("invalid value for {field}: expected start:end:count, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

fn points(field: &str, list: &Option<String>, grid: &Option<String>) -> Result<Vec<f64>, Failure> {
    match (list, grid) {
        (Some(l), None) => number_list(field, l),
        (None, Some(g)) => grid_list(&format!("{field}-grid"), g),
        _ => Err(invalid(format!("give exactly one of --{field} or --{field}-grid"))),
    }
}

fn hamiltonian(a: &HamiltonianArgs) -> Outcome {
    let k = kernel(&a.kernel)?;
    let ps = points("p", &a.p, &a.p_grid)?;
    let mode = if a.quadrature { Mode::ForceQuadrature } else { Mode::Auto };
    let mut out = String::from("p,H,dH,d2H,method,error_estimate\n");
    for p in ps {
        let e = h_value_with(&k, p, mode)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{:?},{}",
            num(e.p),
            num(e.value),
            num(e.deriv),
            num(e.second),
            e.method,
            num(e.quad_error_estimate)
        );
    }
    Ok(out)
}

fn legendre(a: &LegendreArgs) -> Outcome {
    let k = kernel(&a.kernel)?;
    let qs = points("q", &a.q, &a.q_grid)?;
    let pts = conjugate_many(&k, &qs, Execution::best())?;
    let form = LawForm::for_kernel(&k);
    let mut out = String::from("q,L,p0,iterations,residual,at_boundary");
    out.push_str(if a.law { ",law,ratio\n" } else { "\n" });
    for pt in pts {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            num(pt.q),
            num(pt.value),
            num(pt.p0),
            pt.iterations,
            num(pt.residual),
            pt.at_boundary
        );
        if a.law {
            if pt.q.abs() >= std::f64::consts::E {
                let law = form.eval(pt.q.abs());
                let _ = write!(out, ",{},{}", num(law), num(pt.value / law));
            } else {
                out.push_str(",,");
            }
        }
        out.push('\n');
    }
    Ok(out)
}

fn rate_cmd(a: &RateArgs) -> Outcome {
    let k = kernel(&a.kernel)?;
    match (a.r, a.theta) {
        (Some(r), Some(theta)) => {
            let b = bound(&k, r, theta, a.t)?;
            Ok(serde_json::to_string_pretty(&b).map_err(|e| invalid(e.to_string()))? + "\n")
        }
        (None, None) => {
            let x = a.x.ok_or_else(|| invalid("--x is required unless --R and --theta are given"))?;
            let v = match a.cap {
                Some(cap) => rate_capped(&k, x, a.t, cap)?,
                None => rate(&k, x, a.t)?,
            };
            Ok(format!("x,t,I\n{},{},{}\n", num(x), num(a.t), num(v)))
        }
        _ => Err(invalid("--R and --theta must be given together")),
    }
}

fn solve(a: &SolveArgs) -> Outcome {
    let k = kernel(&a.kernel)?;
    let grid = match a.h {
        Some(h) => Grid::with_spacing(a.r, h)?,
        None => Grid::default_for(&k, a.r)?,
    };
    let mut cfg = SolveConfig::new(a.t).with_convolution(a.convolution.parse::<Convolution>()?);
    match (a.dt, &a.adaptive) {
        (Some(_), Some(_)) => return Err(invalid("--dt and --adaptive are exclusive")),
        (Some(dt), None) => cfg = cfg.with_dt(dt),
        (None, Some(tols)) => {
            let v = number_list("adaptive", tols)?;
            if v.len() != 2 {
                return Err(invalid("invalid value for adaptive: expected rtol,atol"));
            }
            cfg = cfg.adaptive(v[0], v[1]);
        }
        (None, None) => {}
    }
    let u0 = match a.u0.parse::<InitialDatum>()? {
        InitialDatum::Ones => Field::constant(grid, 1.0),
        InitialDatum::Indicator { radius } => Field::from_fn(grid, |x| if x.abs() <= radius { 1.0 } else { 0.0 }),
    };
    let field = if a.deviation {
        if u0.values.iter().any(|&v| v != 1.0) {
            return Err(invalid("--deviation needs --u0 ones"));
        }
        solver::complement(&k, grid, &cfg)?
    } else {
        solver::integrate(&k, &u0, &cfg)?
    };
    let dt = match cfg.step {
        TimeStep::Adaptive { .. } => None,
        _ => cfg.schedule(&k)?.map(|(dt, _)| dt),
    };
    let mut buf = Vec::new();
    write_field(&mut buf, &field, &k, dt)?;
    match &a.out {
        Some(path) => {
            std::fs::write(path, &buf).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(String::from_utf8(buf).expect("ascii csv")),
    }
}

fn study(a: &StudyArgs) -> Outcome {
    let mut cfg = match &a.config {
        Some(path) => StudyConfig::from_file(path)?,
        None => {
            let need = |v: &Option<String>, name: &str| {
                v.clone().ok_or_else(|| invalid(format!("missing {name} (give --{name} or --config)")))
            };
            let mut text = String::new();
            let _ = writeln!(text, "kernel={}", need(&a.kernel, "kernel")?);
            let _ = writeln!(text, "R={}", need(&a.r, "R")?);
            let _ = writeln!(text, "theta={}", need(&a.theta, "theta")?);
            let _ = writeln!(text, "t={}", need(&a.t, "t")?);
            StudyConfig::from_kv(&text)?
        }
    };
    let overrides = [
        ("kernel", &a.kernel),
        ("R", &a.r),
        ("theta", &a.theta),
        ("t", &a.t),
        ("h", &a.h),
        ("dt", &a.dt),
        ("A", &a.cap),
        ("u0", &a.u0),
    ];
    for (key, val) in overrides {
        if let Some(v) = val {
            cfg.set(key, v)?;
        }
    }
    if let Some(out) = &a.out {
        cfg.output_dir = Some(out.clone());
    }
    if a.sequential {
        cfg.exec = Execution::Sequential;
    }
    let report = run_study(&cfg)?;
    Ok(report.to_json()? + "\n")
}

fn selftest_cmd(a: &SelftestArgs) -> Outcome {
    if a.list {
        return Ok(selftest::suite_names().join("\n") + "\n");
    }
    let results = match &a.suite {
        Some(name) => vec![selftest::run_suite(name, a.seed)?],
        None => selftest::run_all(a.seed),
    };
    let mut out = String::new();
    for r in &results {
        let _ = writeln!(
            out,
            "{} {} ({} checks){}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.checks,
            r.detail.as_ref().map(|d| format!(": {d}")).unwrap_or_default()
        );
    }
    if results.iter().all(|r| r.passed) {
        Ok(out)
    } else {
        print!("{out}");
        Err(Failure::Numerical("some invariant suites failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Hamiltonian(a) => hamiltonian(a),
        Command::Legendre(a) => legendre(a),
        Command::Rate(a) => rate_cmd(a),
        Command::Solve(a) => solve(a),
        Command::Study(a) => study(a),
        Command::Selftest(a) => selftest_cmd(a),
    };
    match outcome {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
