//! Command-line driver: condition-suite batch runs, geodesic/Jacobi
//! integration with CSV export, and the built-in example verifier.

use clap::{Args, Parser, Subcommand};
use sprayverify::driver::{infer_dim, run, verify_spiral, RunConfig, SamplingConfig, Suite};
use sprayverify::dynamics::{integrate_geodesic, integrate_jacobi, write_csv};
use sprayverify::examples::builtin_spray;
use sprayverify::fieldspec::{parse_field, FieldDef, FieldKind};
use sprayverify::spray::Point;
use sprayverify::{Error, Result};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sprayverify", about = "Numerical metrizability checks for sprays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run condition suites at sampled points and write a JSON report
    Check(CheckArgs),
    /// Integrate a geodesic and export the trajectory as CSV
    Geodesic(GeodesicArgs),
    /// Integrate a Jacobi field along a geodesic and export as CSV
    Jacobi(JacobiArgs),
    /// Built-in examples
    Example(ExampleArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// builtin name (spiral, circle, flat) or a spray component file
    #[arg(long)]
    spray: String,
    /// Finsler function file (scalar F)
    #[arg(long)]
    finsler: Option<PathBuf>,
    /// semi-basic 1-form component file (T1..Tn)
    #[arg(long)]
    theta: Option<PathBuf>,
    /// multiplier component file (Hij)
    #[arg(long)]
    multiplier: Option<PathBuf>,
    /// 2-form component file (Aij/Bij/Cij)
    #[arg(long)]
    twoform: Option<PathBuf>,
    /// comma-separated suites: helmholtz,bm,twoform,grassmann,dynamics,example
    #[arg(long)]
    suite: String,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// base-point box as "lo,hi;lo,hi;..." (one pair per coordinate)
    #[arg(long)]
    xbox: Option<String>,
    /// fibre radius range "rmin,rmax"
    #[arg(long, default_value = "0.5,2")]
    fibre_shell: String,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// record evaluation errors without failing the run
    #[arg(long)]
    skippable: bool,
    /// report output path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GeodesicArgs {
    #[arg(long)]
    spray: String,
    /// initial state "x1,..,xn;y1,..,yn"
    #[arg(long)]
    from: String,
    #[arg(long)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct JacobiArgs {
    #[arg(long)]
    spray: String,
    #[arg(long)]
    from: String,
    #[arg(long)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// initial deviation "c1,..,cn"
    #[arg(long)]
    zeta0: String,
    /// initial covariant rate "c1,..,cn"
    #[arg(long)]
    nabla_zeta0: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExampleArgs {
    /// example name (spiral)
    name: String,
    /// run the verification battery
    #[arg(long)]
    verify: bool,
}

fn load_field(path: &PathBuf, kind: FieldKind) -> Result<FieldDef> {
    let src = fs::read_to_string(path)?;
    let n = infer_dim(&src, kind)?;
    parse_field(&src, kind, n)
}

fn resolve_spray(arg: &str) -> Result<(FieldDef, String)> {
    if let Ok(s) = builtin_spray(arg) {
        return Ok((s, arg.to_string()));
    }
    let path = PathBuf::from(arg);
    if !path.exists() {
        return Err(Error::Config(format!(
            "'{arg}' is neither a builtin spray nor an existing file"
        )));
    }
    let s = load_field(&path, FieldKind::Spray)?;
    Ok((s, arg.to_string()))
}

fn parse_pairs(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(';')
        .map(|chunk| {
            let parts: Vec<&str> = chunk.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::Config(format!("bad range '{chunk}', want 'lo,hi'")));
            }
            let lo: f64 = parts[0]
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number '{}'", parts[0])))?;
            let hi: f64 = parts[1]
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number '{}'", parts[1])))?;
            Ok((lo, hi))
        })
        .collect()
}

fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number '{v}'")))
        })
        .collect()
}

fn parse_state(s: &str, n: usize) -> Result<Point> {
    let halves: Vec<&str> = s.split(';').collect();
    if halves.len() != 2 {
        return Err(Error::Config("state must be 'x1,..,xn;y1,..,yn'".into()));
    }
    let x = parse_vector(halves[0])?;
    let y = parse_vector(halves[1])?;
    if x.len() != n || y.len() != n {
        return Err(Error::Config(format!(
            "state has {}+{} components, spray has dimension {n}",
            x.len(),
            y.len()
        )));
    }
    Point::new(x, y)
}

fn cmd_check(args: &CheckArgs) -> Result<i32> {
    let (spray, name) = resolve_spray(&args.spray)?;
    let n = spray.n;
    let suites: Vec<Suite> = args
        .suite
        .split(',')
        .map(|s| Suite::parse(s.trim()))
        .collect::<Result<_>>()?;
    let xbox = match &args.xbox {
        Some(s) => {
            let pairs = parse_pairs(s)?;
            if pairs.len() == 1 {
                vec![pairs[0]; n]
            } else {
                pairs
            }
        }
        None => vec![(-1.0, 1.0); n],
    };
    let shell_pairs = parse_pairs(&args.fibre_shell)?;
    let shell = shell_pairs[0];
    let cfg = RunConfig {
        finsler: args
            .finsler
            .as_ref()
            .map(|p| load_field(p, FieldKind::Scalar))
            .transpose()?,
        theta: args
            .theta
            .as_ref()
            .map(|p| load_field(p, FieldKind::Covector))
            .transpose()?,
        multiplier: args
            .multiplier
            .as_ref()
            .map(|p| load_field(p, FieldKind::Sym2))
            .transpose()?,
        twoform: args
            .twoform
            .as_ref()
            .map(|p| load_field(p, FieldKind::TwoForm))
            .transpose()?,
        tol: args.tol,
        skippable: args.skippable,
        ..RunConfig::new(
            spray,
            &name,
            suites,
            SamplingConfig {
                xbox,
                shell,
                count: args.points,
                seed: args.seed,
            },
        )
    };
    let (report, exit) = run(&cfg)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    match &args.out {
        Some(path) => fs::write(path, json.as_bytes())?,
        None => println!("{json}"),
    }
    for c in &report.summary.conditions {
        eprintln!(
            "{}/{}: max residual {:.3e}, {}/{} pass",
            c.suite,
            c.name,
            c.max_residual,
            c.evaluated - c.failures,
            c.evaluated
        );
    }
    if report.summary.errored_points > 0 {
        eprintln!("{} point evaluations errored", report.summary.errored_points);
    }
    Ok(exit)
}

fn cmd_geodesic(args: &GeodesicArgs) -> Result<i32> {
    let (spray, _) = resolve_spray(&args.spray)?;
    let p0 = parse_state(&args.from, spray.n)?;
    let traj = integrate_geodesic(&spray, &p0, args.t_end, args.tol)?;
    emit_csv(&traj, None, &args.out)?;
    Ok(0)
}

fn cmd_jacobi(args: &JacobiArgs) -> Result<i32> {
    let (spray, _) = resolve_spray(&args.spray)?;
    let p0 = parse_state(&args.from, spray.n)?;
    let traj = integrate_geodesic(&spray, &p0, args.t_end, args.tol)?;
    let zeta0 = parse_vector(&args.zeta0)?;
    let nabla0 = parse_vector(&args.nabla_zeta0)?;
    let ch = integrate_jacobi(&spray, &traj, &zeta0, &nabla0)?;
    emit_csv(&traj, Some(&ch), &args.out)?;
    Ok(0)
}

fn emit_csv(
    traj: &sprayverify::dynamics::Trajectory,
    ch: Option<&sprayverify::dynamics::JacobiChannel>,
    out: &Option<PathBuf>,
) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(traj, ch, &mut buf)?;
    match out {
        Some(path) => fs::write(path, &buf)?,
        None => print!("{}", String::from_utf8_lossy(&buf)),
    }
    Ok(())
}

fn cmd_example(args: &ExampleArgs) -> Result<i32> {
    if args.name != "spiral" {
        return Err(Error::Config(format!(
            "no verification battery for example '{}'",
            args.name
        )));
    }
    if !args.verify {
        println!("{}", sprayverify::examples::SPIRAL_SPRAY_SRC);
        println!("{}", sprayverify::examples::SPIRAL_F_SRC);
        return Ok(0);
    }
    let (checks, exit) = verify_spiral()?;
    for (name, residual, pass) in &checks {
        println!(
            "{}: {} (worst {:.3e})",
            name,
            if *pass { "pass" } else { "FAIL" },
            residual
        );
    }
    Ok(exit)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Geodesic(a) => cmd_geodesic(a),
        Command::Jacobi(a) => cmd_jacobi(a),
        Command::Example(a) => cmd_example(a),
    };
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
