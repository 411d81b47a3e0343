use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use apme::driver::{self, Check, ExperimentConfig};
use apme::mesh::vtk::read_vtk;

/// Solver for the anisotropic porous medium equation with metric-driven
/// anisotropic mesh adaptation.
#[derive(Parser)]
#[command(name = "apme", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write snapshots and logs.
    Run { config: PathBuf },
    /// Run the convergence sweep of a config and write errors.csv.
    Converge { config: PathBuf },
    /// Check the closed-form solution against the PDE by finite differences.
    VerifyExact {
        config: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// Print statistics of a VTK mesh.
    MeshInfo { vtk: PathBuf },
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    if let Some(dir) = std::env::var_os("APME_OUTPUT_DIR") {
        return PathBuf::from(dir);
    }
    cfg.output
        .dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("output").join(&cfg.name))
}

fn print_checks(checks: &[Check]) -> bool {
    for c in checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    checks.iter().all(|c| c.passed)
}

fn run(path: &Path) -> Result<bool> {
    let cfg = ExperimentConfig::load(path)?;
    let dir = output_dir(&cfg);
    let summary = driver::run_simulation(&cfg, Some(&dir)).with_context(|| format!("run '{}' failed", cfg.name))?;
    print!("{}", summary.report());
    println!("output written to {}", dir.display());
    Ok(summary.passed())
}

fn converge(path: &Path) -> Result<bool> {
    let cfg = ExperimentConfig::load(path)?;
    let dir = output_dir(&cfg);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let report = driver::run_convergence(&cfg)?;
    let csv = dir.join("errors.csv");
    report.write_csv(&csv)?;
    print!("{}", report.to_csv());
    let mut ok = true;
    for r in &report.records {
        if let Some(f) = &r.failure {
            println!("[FAIL] {} N~{}: {f}", r.label, r.target_n);
            ok = false;
        }
    }
    for label in report.labels() {
        match report.slope(&label) {
            Some(s) => println!("slope {label} = {s:.3}"),
            None => println!("slope {label} = n/a"),
        }
    }
    println!("errors written to {}", csv.display());
    Ok(ok)
}

fn verify(path: &Path, h: f64, points: usize) -> Result<bool> {
    let cfg = ExperimentConfig::load(path)?;
    let report = driver::verify_exact(&cfg, h, points)?;
    println!("t = {}, h = {}, points = {}", report.t, report.h, report.points);
    Ok(print_checks(&report.checks(1e-3)))
}

fn mesh_info(path: &Path) -> Result<bool> {
    let data = read_vtk(path)?;
    let mesh = &data.mesh;
    let areas: Vec<f64> = (0..mesh.n_elements()).map(|k| mesh.area(k)).collect();
    let (amin, amax) = areas
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &a| (lo.min(a), hi.max(a)));
    let d = mesh.domain();
    println!("vertices = {}", mesh.n_vertices());
    println!("elements = {}", mesh.n_elements());
    println!("boundary vertices = {}", mesh.n_vertices() - mesh.n_interior());
    println!("domain = [{}, {}] x [{}, {}]", d.x_min, d.x_max, d.y_min, d.y_max);
    println!("total area = {}", mesh.total_area());
    println!("element area min/max = {amin:e} / {amax:e}");
    for (name, v) in &data.point_scalars {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
        println!("point scalar {name}: min {lo:e} max {hi:e}");
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(n) = std::env::var("APME_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not set thread count: {e}");
        }
    }
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(config),
        Command::Converge { config } => converge(config),
        Command::VerifyExact { config, h, points } => verify(config, *h, *points),
        Command::MeshInfo { vtk } => mesh_info(vtk),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
