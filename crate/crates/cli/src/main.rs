//! `nbv`: dataset prep, benchmark runs, theory experiments, the environment
//! server and trace export.

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use nbv_core::bench::{self, BenchError, BenchSpec, ExportFormat, Trace};
use nbv_core::env::{EnvConfig, EnvError};
use nbv_core::planners::PlannerError;
use nbv_core::protocol::{bind_address, Server, BIND_ENV};
use nbv_core::scene::{SceneError, OBJECT_CENTERS};
use nbv_core::theory::{self, TheoryError};

const EXIT_PARTIAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "nbv", version, about = "Voxel-coverage next-best-view benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build ground-truth caches for meshes at each object center.
    Prep(PrepArgs),
    /// Run planners over scenes and centers and write result tables.
    Run(RunArgs),
    /// Coupon-collector experiments.
    Theory(TheoryArgs),
    /// Serve environments over TCP or stdio.
    Serve(ServeArgs),
    /// Replay a trace and write point clouds, curves and frames.
    Export(ExportArgs),
}

#[derive(Args)]
struct Common {
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Object center indices (0-4), comma separated, or `all`.
    #[arg(long)]
    centers: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

#[derive(Args)]
struct PrepArgs {
    /// Mesh files, directories of meshes, `suite` or `suite:<name>`.
    #[arg(required = true)]
    inputs: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    surface_points: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RunArgs {
    /// Mesh files, prep directories, `suite` or `suite:<name>`.
    #[arg(long, value_delimiter = ',')]
    scenes: Vec<String>,
    /// `random`, `frontier`, `greedy` or `extern:<addr>`; repeatable.
    #[arg(long, value_delimiter = ',')]
    planner: Vec<String>,
    /// Views per episode including the reset capture.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// CR threshold in meters.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    debug_candidates: bool,
    #[arg(long)]
    no_traces: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,8,64,512,4096,8000")]
    k: Vec<u64>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "theory_out")]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, value_delimiter = ',')]
    scenes: Vec<String>,
    /// Listen address; falls back to the NBV_BIND variable.
    #[arg(long)]
    bind: Option<String>,
    /// Serve a single session on stdin/stdout instead of TCP.
    #[arg(long)]
    stdio: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ExportArgs {
    trace: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Any of `ply`, `csv`, `pgm`, `pfm`.
    #[arg(long, value_delimiter = ',', default_value = "ply,csv")]
    format: Vec<String>,
}

/// Error carrying its exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn config_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error: e.into(),
    }
}

fn failure(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_PARTIAL, error: e.into() }
}

fn classify(e: BenchError) -> Failure {
    let config = matches!(
        e,
        BenchError::Config(_)
            | BenchError::UnknownFormat(_)
            | BenchError::Planner(PlannerError::UnknownPlanner(_))
            | BenchError::Env(EnvError::Config(_))
            | BenchError::Scene(SceneError::Config(_))
    );
    if config {
        config_error(e)
    } else {
        failure(e)
    }
}

fn parse_centers(s: &str) -> Result<Vec<[f64; 2]>, Failure> {
    if s == "all" {
        return Ok(OBJECT_CENTERS.to_vec());
    }
    s.split(',')
        .map(|t| {
            let i: usize = t.trim().parse().map_err(|_| config_error(anyhow!("bad center index {t:?}")))?;
            OBJECT_CENTERS
                .get(i)
                .copied()
                .ok_or_else(|| config_error(anyhow!("center index {i} out of range 0-4")))
        })
        .collect()
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Failure> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| config_error(anyhow!("bad seed {t:?}"))))
        .collect()
}

/// Loads the config file (if any) and applies the shared flags. The flag
/// reports whether the file set an `[env]` table.
fn load_spec(common: &Common) -> Result<(BenchSpec, bool), Failure> {
    let (mut spec, has_env) = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(config_error)?;
            let table: toml::Table = text.parse().map_err(config_error)?;
            let has_env = table.contains_key("env");
            let spec: BenchSpec = toml::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(config_error)?;
            (spec, has_env)
        }
        None => (BenchSpec::default(), false),
    };
    if let Some(c) = &common.centers {
        spec.object_centers = parse_centers(c)?;
    }
    if let Some(s) = &common.seed {
        spec.seeds = parse_seeds(s)?;
    }
    Ok((spec, has_env))
}

fn cmd_prep(args: PrepArgs) -> Result<(), Failure> {
    let (mut spec, _) = load_spec(&args.common)?;
    if let Some(n) = args.surface_points {
        spec.surface_points = n;
    }
    if args.common.seed.is_some() {
        spec.prep_seed = spec.seeds[0];
    }
    let report = bench::prep(&args.inputs, &args.out, &spec).map_err(classify)?;
    let m = &report.manifest;
    println!(
        "prepared {} caches in {} ({} failures)",
        m.entries.len(),
        args.out.display(),
        m.failures.len()
    );
    if report.all_failed() {
        return Err(failure(anyhow!("every input failed")));
    }
    if !m.failures.is_empty() {
        for f in &m.failures {
            eprintln!("failed: {}: {}", f.source, f.error);
        }
        return Err(Failure {
            code: EXIT_PARTIAL,
            error: anyhow!("{} inputs failed", m.failures.len()),
        });
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let (mut spec, _) = load_spec(&args.common)?;
    if !args.scenes.is_empty() {
        spec.scenes = args.scenes;
    }
    if !args.planner.is_empty() {
        spec.planners = args.planner;
    }
    if let Some(b) = args.budget {
        spec.views_budget = b;
    }
    if let Some(o) = args.out {
        spec.output_dir = o;
    }
    if args.tau.is_some() {
        spec.tau = args.tau;
    }
    spec.debug_candidates |= args.debug_candidates;
    if args.no_traces {
        spec.write_traces = false;
    }
    spec.validate().map_err(classify)?;
    let report = bench::run(&spec).map_err(classify)?;
    bench::write_outputs(&spec, &report).map_err(classify)?;
    println!("{:<14} {:<10} {:>7} {:>8} {:>7} {:>7}", "mesh", "planner", "CR%", "CD(cm)", "AUC%", "face%");
    for s in &report.summary {
        println!(
            "{:<14} {:<10} {:>7.2} {:>8.2} {:>7.2} {:>7.2}",
            s.mesh,
            s.planner,
            100.0 * s.cr,
            s.cd_cm,
            100.0 * s.auc,
            100.0 * s.face_coverage
        );
    }
    println!("results in {}", spec.output_dir.display());
    let failed = report.failures();
    if failed > 0 {
        return Err(failure(anyhow!("{failed} episodes or scenes failed")));
    }
    Ok(())
}

fn cmd_theory(args: TheoryArgs) -> Result<(), Failure> {
    let rows = theory::theory_rows(&args.k, args.trials, args.seed).map_err(|e| match e {
        TheoryError::Empty | TheoryError::SmallK(_) => config_error(e),
    })?;
    fs::create_dir_all(&args.out).map_err(failure)?;
    let csv_path = args.out.join("theory.csv");
    fs::write(&csv_path, theory::rows_to_csv(&rows)).map_err(failure)?;
    fs::write(args.out.join("theory_curve.dat"), theory::rows_to_curve(&rows)).map_err(failure)?;
    println!("{:>6} {:>12} {:>12} {:>10} {:>12}", "k", "k^(-1/6)", "unseen", "std", "rays");
    for r in &rows {
        let cf = r.closed_form.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "{:>6} {:>12} {:>12.4} {:>10.4} {:>12.1}",
            r.k, cf, r.empirical_mean, r.empirical_std, r.mean_rays
        );
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<(), Failure> {
    let (mut spec, has_env) = load_spec(&args.common)?;
    if !has_env {
        spec.env = EnvConfig::default();
    }
    if !args.scenes.is_empty() {
        spec.scenes = args.scenes;
    }
    spec.env.validate().map_err(config_error)?;
    let recipes = spec.recipes().map_err(classify)?;
    let mut scenes = Vec::new();
    for r in &recipes {
        match r.build(&spec.env) {
            Ok(s) => scenes.push(Arc::new(s)),
            Err(e) => log::warn!("scene {}: {e}", r.id),
        }
    }
    let server = Server::new(scenes, spec.env.clone()).map_err(config_error)?;
    log::info!("serving {} scenes", server.scene_ids().len());
    if args.stdio {
        return server.serve_stdio().map_err(failure);
    }
    let addr = bind_address(args.bind.as_deref());
    let listener = TcpListener::bind(&addr)
        .with_context(|| format!("binding {addr} (set --bind or {BIND_ENV})"))
        .map_err(config_error)?;
    eprintln!("listening on {}", listener.local_addr().map_err(failure)?);
    Arc::new(server).serve_tcp(listener).map_err(failure)
}

fn cmd_export(args: ExportArgs) -> Result<(), Failure> {
    let formats = args
        .format
        .iter()
        .map(|f| f.parse::<ExportFormat>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(classify)?;
    let trace = Trace::read(Path::new(&args.trace)).map_err(classify)?;
    let report = bench::export(&trace, &args.out, &formats).map_err(classify)?;
    for f in &report.files {
        if f.extension().is_some_and(|e| e == "ply" || e == "csv") {
            println!("wrote {}", f.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prep(a) => cmd_prep(a),
        Command::Run(a) => cmd_run(a),
        Command::Theory(a) => cmd_theory(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
