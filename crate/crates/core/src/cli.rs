//! Command-line front end: file-based steps of the simulate → calibrate →
//! reconstruct → evaluate pipeline.
//!
//! Inputs not given explicitly fall back to the `[paths]` config block and
//! then to the file a previous step writes into the output directory, so the
//! commands chain without extra flags.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, CONFIG_ENV};
use crate::error::{Error, Result};
use crate::image::AttenuationImage;
use crate::metrics::{MetricsReport, RegionMask};
use crate::raypath::build_system_matrix;
use crate::simulator::{simulate_measurement, PhantomSpec, SimulatedAcquisition};
use crate::{calibration, io, recon};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_NOT_CONVERGED: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "uatomo",
    version,
    about = "Pulse-echo ultrasound attenuation tomography"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment config (TOML).
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Regularization weight, overrides `recon.lambda`.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Noise level as a fraction of max |b| (0.05 = 5 %).
    #[arg(long, global = true)]
    pub noise: Option<f64>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Report absolute attenuation (subtract the known water path loss).
    #[arg(long, global = true, conflicts_with = "relative")]
    pub absolute: bool,
    /// Report attenuation relative to water.
    #[arg(long, global = true)]
    pub relative: bool,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterize a phantom spec into ground-truth image and inclusion mask.
    Phantom {
        #[arg(long)]
        phantom: Option<PathBuf>,
    },
    /// Simulate tissue and water amplitude matrices for a phantom.
    Simulate {
        #[arg(long)]
        phantom: Option<PathBuf>,
    },
    /// Normalize tissue amplitudes against a water calibration.
    Calibrate {
        #[arg(long)]
        tissue: Option<PathBuf>,
        #[arg(long)]
        water: Option<PathBuf>,
    },
    /// Calibrate and reconstruct an attenuation image.
    Reconstruct {
        #[arg(long)]
        tissue: Option<PathBuf>,
        #[arg(long)]
        water: Option<PathBuf>,
        /// Also write the ray-path matrix as `row,col,value` triplets.
        #[arg(long)]
        export_matrix: Option<PathBuf>,
    },
    /// Compute CRF, CNR, RMSE and PSNR against a ground truth.
    Evaluate {
        #[arg(long)]
        recon: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Simulate, reconstruct and evaluate at every configured noise level.
    Sweep {
        #[arg(long)]
        phantom: Option<PathBuf>,
    },
}

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => EXIT_OK,
            Status::NotConverged => EXIT_NOT_CONVERGED,
        }
    }
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

/// Loads the config file (if any) and applies command-line overrides.
pub fn resolve_config(global: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.noise.seed = seed;
    }
    if let Some(lambda) = global.lambda {
        cfg.recon.lambda = lambda;
    }
    if let Some(level) = global.noise {
        cfg.noise.level = level;
    }
    if let Some(dir) = &global.output_dir {
        cfg.paths.output_dir = Some(dir.clone());
    }
    if global.absolute {
        cfg.calibration.absolute = true;
    }
    if global.relative {
        cfg.calibration.absolute = false;
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<Status> {
    let cfg = resolve_config(&cli.global)?;
    let out = cfg.output_dir();
    let ext = cfg.data_extension();
    let pick = |flag: &Option<PathBuf>, configured: &Option<PathBuf>, fallback: &str| {
        flag.clone()
            .or_else(|| configured.clone())
            .unwrap_or_else(|| out.join(fallback))
    };

    match &cli.command {
        Command::Phantom { phantom } => {
            let spec = load_phantom(phantom.as_ref().or(cfg.paths.phantom.as_ref()))?;
            write_ground_truth(&cfg, &spec, &out)?;
            Ok(Status::Ok)
        }
        Command::Simulate { phantom } => {
            let spec = load_phantom(phantom.as_ref().or(cfg.paths.phantom.as_ref()))?;
            let sim = simulate(&cfg, &spec)?;
            write_simulation(&cfg, &sim, &out)?;
            Ok(Status::Ok)
        }
        Command::Calibrate { tissue, water } => {
            let tissue =
                io::read_amplitudes(&pick(tissue, &cfg.paths.tissue, &format!("tissue.{ext}")))?;
            let water =
                io::read_amplitudes(&pick(water, &cfg.paths.water, &format!("water.{ext}")))?;
            let geom = cfg.geometry()?;
            let b = calibration::normalize(
                &tissue,
                &water,
                &cfg.media()?,
                &geom,
                cfg.calibration.absolute,
            )?;
            io::write_normalized(&out.join(format!("normalized.{ext}")), &b)?;
            Ok(Status::Ok)
        }
        Command::Reconstruct {
            tissue,
            water,
            export_matrix,
        } => {
            let tissue =
                io::read_amplitudes(&pick(tissue, &cfg.paths.tissue, &format!("tissue.{ext}")))?;
            let water =
                io::read_amplitudes(&pick(water, &cfg.paths.water, &format!("water.{ext}")))?;
            let (image, report) = reconstruct(&cfg, &tissue, &water, export_matrix.as_deref())?;
            write_reconstruction(&cfg, &image, &report, &out)?;
            if report.converged {
                Ok(Status::Ok)
            } else {
                log::warn!(
                    "solver stopped at the iteration cap ({} iterations)",
                    report.iterations
                );
                Ok(Status::NotConverged)
            }
        }
        Command::Evaluate { recon, truth, mask } => {
            let recon = io::read_image(&pick(recon, &cfg.paths.recon, &format!("recon.{ext}")))?;
            let truth = io::read_image(&pick(truth, &cfg.paths.truth, &format!("truth.{ext}")))?;
            let mask = io::read_mask(&pick(mask, &cfg.paths.mask, &format!("mask.{ext}")))?;
            let report = evaluate(&recon, &truth, &mask)?;
            write_metrics(&report, &out)?;
            Ok(Status::Ok)
        }
        Command::Sweep { phantom } => {
            let spec = load_phantom(phantom.as_ref().or(cfg.paths.phantom.as_ref()))?;
            sweep(&cfg, &spec, &out)
        }
    }
}

pub fn load_phantom(path: Option<&PathBuf>) -> Result<PhantomSpec> {
    let path = path.ok_or_else(|| {
        Error::Config("no phantom spec: pass --phantom or set paths.phantom".into())
    })?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Ground truth and inclusion mask on the reconstruction grid.
pub fn ground_truth(
    cfg: &ExperimentConfig,
    spec: &PhantomSpec,
) -> Result<(AttenuationImage, RegionMask)> {
    let grid = cfg.grid()?;
    Ok((spec.rasterize(&grid)?, spec.inclusion_mask(&grid)?))
}

fn write_ground_truth(cfg: &ExperimentConfig, spec: &PhantomSpec, out: &Path) -> Result<()> {
    let (truth, mask) = ground_truth(cfg, spec)?;
    let ext = cfg.data_extension();
    io::write_image(&out.join(format!("truth.{ext}")), &truth)?;
    io::write_mask(&out.join(format!("mask.{ext}")), &mask)?;
    if cfg.output.pgm {
        io::write_pgm(&out.join("truth.pgm"), &truth, window(cfg))?;
    }
    Ok(())
}

fn window(cfg: &ExperimentConfig) -> (f64, f64) {
    let [lo, hi] = cfg.output.pgm_window_db_cm;
    (lo, hi)
}

/// Forward-simulates `spec` on the (optionally refined) simulation grid.
pub fn simulate(cfg: &ExperimentConfig, spec: &PhantomSpec) -> Result<SimulatedAcquisition> {
    let geom = cfg.geometry()?;
    let grid = cfg.simulation_grid()?;
    let alpha = spec.rasterize(&grid)?;
    let l = build_system_matrix(&geom, &grid)?;
    simulate_measurement(&alpha, &l, &geom, &cfg.media()?, &cfg.noise()?)
}

fn write_simulation(cfg: &ExperimentConfig, sim: &SimulatedAcquisition, out: &Path) -> Result<()> {
    let ext = cfg.data_extension();
    io::write_amplitudes(&out.join(format!("tissue.{ext}")), &sim.tissue)?;
    io::write_amplitudes(&out.join(format!("water.{ext}")), &sim.water)?;
    let meta = format!(
        "noise_level={}\nnoise_seed={}\nnoise_reference=max_abs_b\nnoise_reference_value={:e}\n\
         noise_sigma={:e}\nrefine={}\ncenter_frequency_hz={}\npulse_half_cycles={}\n",
        cfg.noise.level,
        cfg.noise.seed,
        sim.reference_scale,
        sim.noise_sigma,
        cfg.simulation.refine,
        cfg.simulation.center_frequency_hz,
        cfg.simulation.pulse_half_cycles,
    );
    io::write_text(&out.join("simulation.txt"), &meta)
}

/// Calibrates the amplitude pair and solves on the configured grid.
pub fn reconstruct(
    cfg: &ExperimentConfig,
    tissue: &calibration::AmplitudeMatrix,
    water: &calibration::AmplitudeMatrix,
    export_matrix: Option<&Path>,
) -> Result<(AttenuationImage, recon::ConvergenceReport)> {
    let geom = cfg.geometry()?;
    let grid = cfg.grid()?;
    let b = calibration::normalize(
        tissue,
        water,
        &cfg.media()?,
        &geom,
        cfg.calibration.absolute,
    )?;
    let l = build_system_matrix(&geom, &grid)?;
    if let Some(path) = export_matrix {
        l.write_triplets(path)?;
    }
    let rec = recon::solve(&l, &b.values, &cfg.recon_config())?;
    Ok((rec.image, rec.report))
}

fn write_reconstruction(
    cfg: &ExperimentConfig,
    image: &AttenuationImage,
    report: &recon::ConvergenceReport,
    out: &Path,
) -> Result<()> {
    io::write_image(&out.join(format!("recon.{}", cfg.data_extension())), image)?;
    io::write_text(&out.join("convergence.txt"), &report.to_key_value())?;
    if cfg.output.pgm {
        io::write_pgm(&out.join("recon.pgm"), image, window(cfg))?;
    }
    Ok(())
}

/// Metrics in dB/cm.
pub fn evaluate(
    recon: &AttenuationImage,
    truth: &AttenuationImage,
    mask: &RegionMask,
) -> Result<MetricsReport> {
    if recon.grid() != truth.grid() || recon.grid() != mask.grid() {
        return Err(Error::DimensionMismatch {
            expected: truth.grid().n_cells(),
            actual: recon.grid().n_cells(),
            context: "recon, truth and mask must share one grid",
        });
    }
    MetricsReport::evaluate(&recon.to_db_per_cm(), &truth.to_db_per_cm(), mask)
}

fn write_metrics(report: &MetricsReport, out: &Path) -> Result<()> {
    io::write_text(&out.join("metrics.txt"), &report.to_key_value())?;
    io::write_text(
        &out.join("metrics.csv"),
        &format!("{}\n{}\n", MetricsReport::csv_header(), report.to_csv_row()),
    )
}

/// One directory and metrics report per noise level, plus `sweep.csv`.
pub fn sweep(cfg: &ExperimentConfig, spec: &PhantomSpec, out: &Path) -> Result<Status> {
    write_ground_truth(cfg, spec, out)?;
    let (truth, mask) = ground_truth(cfg, spec)?;
    let mut summary = format!("noise_level,converged,{}\n", MetricsReport::csv_header());
    let mut status = Status::Ok;
    for &level in &cfg.sweep.levels {
        let mut run = cfg.clone();
        run.noise.level = level;
        let dir = out.join(format!("noise_{:05.1}pct", level * 100.0));
        let sim = simulate(&run, spec)?;
        write_simulation(&run, &sim, &dir)?;
        let (image, report) = reconstruct(&run, &sim.tissue, &sim.water, None)?;
        write_reconstruction(&run, &image, &report, &dir)?;
        let metrics = evaluate(&image, &truth, &mask)?;
        write_metrics(&metrics, &dir)?;
        log::info!(
            "noise {:.1}%: cnr={:.3} rmse={:.4} crf={:.3}",
            level * 100.0,
            metrics.cnr,
            metrics.rmse,
            metrics.crf
        );
        summary.push_str(&format!(
            "{level},{},{}\n",
            report.converged,
            metrics.to_csv_row()
        ));
        if !report.converged {
            status = Status::NotConverged;
        }
    }
    io::write_text(&out.join("sweep.csv"), &summary)?;
    Ok(status)
}
