//! Command-line driver for the experiments: estimate decay, boundary
//! identity, reconstruction, localization, and direct-transform
//! utilities.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cgolab::geometry::{sample_planes, BallDomain, Vec3};
use cgolab::pipeline::{
    run_estimates, run_identity, run_localize, run_reconstruct, Config, Phantom, RunContext,
    RunReport,
};
use cgolab::transform::{radon_invert_fbp, relative_plane_integral, write_samples_csv, PlaneSample};

#[derive(Parser)]
#[command(
    name = "cgolab",
    about = "Plane-concentrated exponentially growing solutions and two-plane transforms on a periodic box",
    version
)]
struct Cli {
    /// Configuration file (sectioned `key = value` text); defaults are
    /// used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for tables, field dumps, and manifests.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = library default).
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Seed recorded in the manifest (reserved for randomized
    /// diagnostics).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// E1: decay of the construction estimates over the magnitude sweep.
    Estimates,
    /// E2: boundary identity — measured I versus the plane-integral
    /// oracle.
    Identity,
    /// E3: filtered backprojection from direct transforms and from
    /// boundary data.
    Reconstruct,
    /// E4: support localization from vanishing plane integrals.
    Localize,
    /// Direct-transform utilities: writes the phantom's plane-sample
    /// table and its filtered backprojection.
    Transform {
        /// Hemisphere directions.
        #[arg(long, default_value_t = 200)]
        dirs: usize,
        /// Offsets per direction (odd).
        #[arg(long, default_value_t = 41)]
        offsets: usize,
    },
}

fn load_config(path: &Option<PathBuf>) -> cgolab::Result<Config> {
    match path {
        None => Ok(Config::default()),
        Some(p) => Config::parse(&std::fs::read_to_string(p)?),
    }
}

fn run(cli: &Cli) -> cgolab::Result<bool> {
    let cfg = load_config(&cli.config)?;
    let ctx = RunContext::new(cli.out.clone(), cli.workers, cli.seed);
    std::fs::create_dir_all(&cli.out)?;
    let report = match &cli.command {
        Command::Estimates => run_estimates(&cfg, &ctx)?.report,
        Command::Identity => run_identity(&cfg, &ctx)?.report,
        Command::Reconstruct => run_reconstruct(&cfg, &ctx)?.report,
        Command::Localize => run_localize(&cfg, &ctx)?.report,
        Command::Transform { dirs, offsets } => {
            run_transform(&cfg, &ctx, *dirs, *offsets, &cli.out)?
        }
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for f in &report.failed_jobs {
        eprintln!("failed job: {f}");
    }
    println!("{} finished in {:.1}s", report.experiment, report.wall_seconds);
    for t in &report.tables {
        println!("  table {t}");
    }
    for (k, v) in &report.summary {
        println!("  {k} = {v}");
    }
    Ok(report.ok)
}

fn run_transform(
    cfg: &Config,
    ctx: &RunContext,
    dirs: usize,
    offsets: usize,
    out: &PathBuf,
) -> cgolab::Result<RunReport> {
    cfg.validate()?;
    let t0 = std::time::Instant::now();
    let dom = BallDomain::new(Vec3::ZERO, cfg.r_omega, cfg.l, cfg.n)?;
    let phantom = Phantom {
        center: Vec3::ZERO,
        width: cfg.rec_phantom_width,
        amp: cfg.phantom_amp,
        cut: (cfg.cut_inner, cfg.cut_outer),
    };
    let truth = phantom.master(cfg.n, cfg.l);
    let planes = sample_planes(dirs, offsets, &dom)?;
    let samples: Vec<PlaneSample> = planes
        .into_iter()
        .map(|plane| PlaneSample {
            value: relative_plane_integral(&truth, &plane, &dom),
            plane,
        })
        .collect();
    let table = out.join("transform_samples.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&table)?);
    write_samples_csv(&mut w, &samples, dom.center)?;
    let rec = radon_invert_fbp(&samples, &dom, cfg.n, cfg.l, true)?;
    let mut f = std::fs::File::create(out.join("transform_fbp_field.bin"))?;
    rec.dump(&mut f)?;
    let mut report = RunReport::for_experiment("transform", cfg, ctx);
    report.tables.push(table.display().to_string());
    report.wall_seconds = t0.elapsed().as_secs_f64();
    report.write_manifest(out)?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("run incomplete: some jobs failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
