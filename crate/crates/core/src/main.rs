use clap::{Args, Parser, Subcommand};
use dipolar_cft::loewner::{trace_curve, DrivingPath};
use dipolar_cft::montecarlo::{
    drift_test_with, lattice_green_check, run_ensemble, schramm_estimate, to_c64, EnsembleConfig,
    DRIFT_THRESHOLD, SCHRAMM_POINTS,
};
use dipolar_cft::virasoro_checks::{self, IdentityReport};
use dipolar_cft::Error;
use serde::Serialize;
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

/// Dipolar SLE(4) in the strip and the mixed boundary Gaussian free field:
/// simulations, martingale tests and identity checks.
#[derive(Parser, Debug)]
#[command(name = "dipolar-cft", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON ensemble config; keys present override the command defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, global = true, value_name = "DIR", default_value = "dipolar-out")]
    out: PathBuf,
    /// Master seed; path k uses stream k of this seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Number of Monte Carlo paths.
    #[arg(long = "n-paths", global = true, value_name = "N")]
    n_paths: Option<usize>,
    /// Loewner time step.
    #[arg(long, global = true, value_name = "X")]
    dt: Option<f64>,
    /// Time horizon.
    #[arg(long = "T", global = true, value_name = "X")]
    horizon: Option<f64>,
    /// Diffusivity of the driving Brownian motion.
    #[arg(long, global = true, value_name = "X")]
    kappa: Option<f64>,
    /// Pass threshold of the command's check (see README).
    #[arg(long, global = true, value_name = "X")]
    tolerance: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Trace one curve and write its tips.
    Simulate,
    /// Run an ensemble and write the raw observable table.
    Observables,
    /// Run the identity checks.
    VerifyIdentities,
    /// Martingale drift tests between consecutive checkpoints.
    DriftTest,
    /// Schramm's formula against Monte Carlo.
    Schramm,
    /// Lattice Green's function against the continuum kernel.
    LatticeGreen,
    /// Kernel boundary checks and OPE checks.
    Kernels,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::OutsideDomain(_) | Error::BadStep(_) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numerical(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Numerical(format!("csv: {e}"))
    }
}

fn command_defaults(cmd: Command) -> EnsembleConfig {
    match cmd {
        Command::Schramm => EnsembleConfig {
            n_paths: 2000,
            horizon: 8.0,
            points: SCHRAMM_POINTS.to_vec(),
            observables: vec![],
            checkpoints: vec![],
            ..EnsembleConfig::default()
        },
        Command::Simulate => EnsembleConfig {
            n_paths: 1,
            ..EnsembleConfig::default()
        },
        _ => EnsembleConfig::default(),
    }
}

fn load_config(cmd: Command, common: &Common) -> Result<EnsembleConfig, Failure> {
    let mut base = serde_json::to_value(command_defaults(cmd)).expect("config serialises");
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let user: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let Value::Object(user) = user else {
            return Err(Failure::Config("config must be a JSON object".into()));
        };
        let obj = base.as_object_mut().expect("object");
        for (k, v) in user {
            obj.insert(k, v);
        }
    }
    let mut cfg: EnsembleConfig =
        serde_json::from_value(base).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(n) = common.n_paths {
        cfg.n_paths = n;
    }
    if let Some(dt) = common.dt {
        cfg.dt = dt;
    }
    if let Some(t) = common.horizon {
        cfg.horizon = t;
        if matches!(cmd, Command::Observables | Command::DriftTest) && common.config.is_none() {
            cfg.checkpoints = vec![0.0, t / 2.0, t];
        }
    }
    if let Some(k) = common.kappa {
        cfg.kappa = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: Serialize>(
    path: &Path,
    command: &str,
    pass: bool,
    body: &T,
) -> Result<(), Failure> {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let doc = json!({
        "schema": 1,
        "command": command,
        "pass": pass,
        "generated_at_unix": stamp,
        "result": body,
    });
    fs::write(
        path,
        serde_json::to_string_pretty(&doc).expect("json") + "\n",
    )?;
    Ok(())
}

/// Outcome of one command: pass flag and the report file to point at.
type Outcome = Result<(bool, PathBuf), Failure>;

fn identity_reports(
    reports: Vec<IdentityReport>,
    tol: Option<f64>,
    out: &Path,
    name: &str,
) -> Outcome {
    let reports: Vec<IdentityReport> = reports
        .into_iter()
        .map(|r| {
            if let Some(t) = tol {
                r.with_tolerance(t)
            } else {
                r
            }
        })
        .collect();
    for r in &reports {
        println!("{}", r.summary());
    }
    let pass = reports.iter().all(|r| r.pass);
    let path = out.join(format!("{name}.json"));
    write_json(&path, name, pass, &reports)?;
    Ok((pass, path))
}

fn simulate(cfg: &EnsembleConfig, out: &Path) -> Outcome {
    let n = cfg.n_steps();
    let drv = DrivingPath::brownian(cfg.kappa, cfg.dt, n, cfg.seed, 0)?;
    let every = (n / 2000).max(1);
    let curve = trace_curve(&drv, cfg.horizon, every)?;
    let path = out.join("curve.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["t", "re", "im"])?;
    for (t, z) in curve.times.iter().zip(&curve.tips) {
        w.serialize((t, z.re, z.im))?;
    }
    w.flush()?;
    let max_re = curve.tips.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let final_tip = *curve.tips.last().expect("tips");
    println!(
        "simulate: {} tips to T = {}, final tip {:.6}{:+.6}i, max |Re γ| = {:.3e}",
        curve.tips.len(),
        cfg.horizon,
        final_tip.re,
        final_tip.im,
        max_re
    );
    let summary = out.join("simulate.json");
    write_json(
        &summary,
        "simulate",
        true,
        &json!({"config": cfg, "n_tips": curve.tips.len(), "max_abs_re": max_re}),
    )?;
    Ok((true, summary))
}

fn observables(cfg: &EnsembleConfig, out: &Path) -> Outcome {
    let table = run_ensemble(cfg)?;
    let path = out.join("observables.csv");
    table.write_csv(fs::File::create(&path)?)?;
    println!(
        "observables: {} paths x {} checkpoints x {} observables x {} points -> {}",
        table.n_paths,
        table.checkpoints.len(),
        table.observables.len(),
        table.n_points,
        path.display()
    );
    let summary = out.join("observables.json");
    write_json(&summary, "observables", true, &json!({"config": cfg}))?;
    Ok((true, summary))
}

fn drift(cfg: &EnsembleConfig, tol: Option<f64>, out: &Path) -> Outcome {
    let table = run_ensemble(cfg)?;
    let pairs: Vec<(f64, f64)> = cfg.checkpoints.windows(2).map(|w| (w[0], w[1])).collect();
    let report = drift_test_with(&table, &pairs, tol.unwrap_or(DRIFT_THRESHOLD))?;
    let path = out.join("drift.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for cell in &report.cells {
        w.serialize(cell)?;
    }
    w.flush()?;
    println!(
        "{} drift-test: {} cells tested, {} failed, {} inconclusive, max |z| {:.3}",
        if report.all_pass() { "PASS" } else { "FAIL" },
        report.n_tested,
        report.n_failed,
        report.n_inconclusive,
        report.max_abs_z()
    );
    println!("  {}", report.multiplicity_note);
    let summary = out.join("drift.json");
    write_json(
        &summary,
        "drift-test",
        report.all_pass(),
        &json!({"config": cfg, "report": report}),
    )?;
    Ok((report.all_pass(), summary))
}

fn schramm(cfg: &EnsembleConfig, tol: Option<f64>, out: &Path) -> Outcome {
    let points: Vec<_> = cfg.points.iter().map(|&p| to_c64(p)).collect();
    let report = schramm_estimate(cfg, &points)?;
    let bound = tol.unwrap_or(3.0);
    let path = out.join("schramm.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "re",
        "im",
        "fraction_left",
        "stderr",
        "exact",
        "z",
        "n_undecided",
        "n_swallowed",
    ])?;
    for r in &report.rows {
        w.serialize((
            r.point[0],
            r.point[1],
            r.fraction_left,
            r.stderr,
            r.exact,
            r.z,
            r.n_undecided,
            r.n_swallowed,
        ))?;
    }
    w.flush()?;
    let pass = report.max_abs_z() <= bound && !report.flagged;
    println!(
        "{} schramm: {} points, {} paths, max |z| {:.3} (bound {bound}){}",
        if pass { "PASS" } else { "FAIL" },
        report.rows.len(),
        report.n_paths,
        report.max_abs_z(),
        if report.flagged {
            ", undecided above 5%"
        } else {
            ""
        }
    );
    let summary = out.join("schramm.json");
    write_json(&summary, "schramm", pass, &report)?;
    Ok((pass, summary))
}

fn lattice(tol: Option<f64>, out: &Path) -> Outcome {
    let l = 6.0 * std::f64::consts::PI;
    let coarse = lattice_green_check(1.0 / 32.0, l)?;
    let fine = lattice_green_check(1.0 / 64.0, l)?;
    let ratio = fine.max_rel_error / coarse.max_rel_error;
    let bound = tol.unwrap_or(0.05);
    let pass = fine.max_rel_error <= bound && ratio < 0.7;
    let path = out.join("lattice.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "mesh",
        "source_re",
        "source_im",
        "target_re",
        "target_im",
        "discrete",
        "continuum",
        "rel_error",
    ])?;
    for rep in [&coarse, &fine] {
        for p in &rep.pairs {
            w.serialize((
                rep.mesh,
                p.source[0],
                p.source[1],
                p.target[0],
                p.target[1],
                p.discrete,
                p.continuum,
                p.rel_error,
            ))?;
        }
    }
    w.flush()?;
    println!(
        "{} lattice-green: max relative error {:.3e} at mesh 1/64 (bound {bound}), halving ratio {:.3}",
        if pass { "PASS" } else { "FAIL" },
        fine.max_rel_error,
        ratio
    );
    let summary = out.join("lattice.json");
    write_json(
        &summary,
        "lattice-green",
        pass,
        &json!({"coarse": coarse, "fine": fine, "ratio": ratio}),
    )?;
    Ok((pass, summary))
}

fn run(cli: &Cli) -> Outcome {
    let out = &cli.common.out;
    let tol = cli.common.tolerance;
    let cfg = load_config(cli.command, &cli.common)?;
    fs::create_dir_all(out).map_err(|e| Failure::Config(format!("{}: {e}", out.display())))?;
    match cli.command {
        Command::Simulate => simulate(&cfg, out),
        Command::Observables => observables(&cfg, out),
        Command::DriftTest => drift(&cfg, tol, out),
        Command::Schramm => schramm(&cfg, tol, out),
        Command::LatticeGreen => lattice(tol, out),
        Command::VerifyIdentities => {
            identity_reports(virasoro_checks::run_suite()?, tol, out, "identities")
        }
        Command::Kernels => {
            let mut reports = virasoro_checks::kernel_suite()?;
            reports.extend(virasoro_checks::ope_suite()?);
            identity_reports(reports, tol, out, "kernels")
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((true, _)) => ExitCode::SUCCESS,
        Ok((false, path)) => {
            eprintln!("check failed, see {}", path.display());
            ExitCode::from(3)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            ExitCode::from(3)
        }
    }
}
