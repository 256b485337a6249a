//! `ndcsim`: scenario runner and dispersion calculators.
//!
//! Exit codes: 0 ok, 1 numeric mismatch against expected values, 2 input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ndc_core::dispersion::{fiber_gdd_from_measured_width, grating_pair_gdd, GratingPair};
use ndc_core::exec::Exec;
use ndc_core::measurement::{deconvolve_quadrature, InstrumentResponse};
use ndc_core::report::{check_lines, key_values};
use ndc_core::reproduce::{reference, reference_phase_matching, reproduce, Target};
use ndc_core::scenario::{run_json, summary, Issue, RunError, RunOptions};
use ndc_core::spectral::PhaseMatching;

const EXIT_MISMATCH: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "ndcsim", version, about = "Two-photon correlation under dispersion: scenario runner and calculators")]
struct Cli {
    /// Directory that receives CSVs, fit reports and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the scenario seed for the photon-counting simulation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the detuning grid size (power of two, at least 256).
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Evaluate on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a JSON scenario file.
    Run { file: PathBuf },
    /// Run the bundled scenarios for a target and check them (fig3, fig4, fig6, table-derived, all).
    Reproduce { target: String },
    /// Group-delay dispersion calculators.
    #[command(subcommand)]
    Gdd(GddCommand),
}

#[derive(Debug, Subcommand)]
enum GddCommand {
    /// GDD of a parallel grating pair.
    Grating {
        /// Centre wavelength (m).
        #[arg(long)]
        lambda: f64,
        /// Groove spacing (m).
        #[arg(long)]
        d: f64,
        /// Grating separation (m).
        #[arg(long = "G")]
        separation: f64,
        /// Diffracted angle (degrees).
        #[arg(long)]
        theta: f64,
        /// 1 (single pass) or 2 (retro-reflected).
        #[arg(long, default_value_t = 2)]
        passes: u8,
    },
    /// Fiber GDD from a measured broadened correlation width.
    FiberFromWidth {
        /// Measured FWHM (s).
        #[arg(long)]
        fwhm: f64,
        /// Instrument response to remove in quadrature first (s).
        #[arg(long)]
        irf: Option<f64>,
        /// Crystal walk-off D*L (s).
        #[arg(long, default_value_t = reference::WALKOFF)]
        walkoff: f64,
        /// Gaussian-model gamma.
        #[arg(long, default_value_t = reference::GAMMA)]
        gamma: f64,
    },
}

fn input_error(issues: Vec<Issue>) -> ExitCode {
    eprintln!("{}", RunError::Invalid(issues).to_json());
    ExitCode::from(EXIT_INPUT)
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<(), String> {
    for (name, contents) in files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
        }
        fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions {
        grid_points: cli.grid_points,
        seed: cli.seed,
        exec: if cli.sequential { Exec::Sequential } else { Exec::default() },
    };
    match cli.command {
        Command::Run { file } => {
            let text = match fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => return input_error(vec![Issue { path: file.display().to_string(), message: e.to_string() }]),
            };
            let out = match run_json(&text, &opts) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("{}", e.to_json());
                    return ExitCode::from(EXIT_INPUT);
                }
            };
            if let Err(e) = write_files(&cli.out_dir, &out.files) {
                return input_error(vec![Issue { path: "--out-dir".into(), message: e }]);
            }
            print!("{}", summary(&out));
            print!("{}", check_lines(&out.checks));
            if out.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_MISMATCH)
            }
        }
        Command::Reproduce { target } => {
            let target: Target = match target.parse() {
                Ok(t) => t,
                Err(e) => return input_error(vec![Issue { path: "target".into(), message: e }]),
            };
            let report = match reproduce(target, &opts) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("{}", e.to_json());
                    return ExitCode::from(EXIT_INPUT);
                }
            };
            if let Err(e) = write_files(&cli.out_dir, &report.files) {
                return input_error(vec![Issue { path: "--out-dir".into(), message: e }]);
            }
            print!("{}", report.text);
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_MISMATCH)
            }
        }
        Command::Gdd(GddCommand::Grating {
            lambda,
            d,
            separation,
            theta,
            passes,
        }) => {
            let result = GratingPair::new(d, separation, theta.to_radians(), passes).and_then(|gp| {
                let gdd = grating_pair_gdd(&gp, lambda)?;
                let single = grating_pair_gdd(&gp.with_passes(1)?, lambda)?;
                Ok((gdd, single))
            });
            match result {
                Ok((gdd, single)) => {
                    print!(
                        "{}",
                        key_values([
                            ("gdd_s2", format!("{gdd:e}")),
                            ("sqrt_abs_gdd_s", format!("{:e}", gdd.abs().sqrt())),
                            ("passes", passes.to_string()),
                            ("single_pass_gdd_s2", format!("{single:e}")),
                            ("single_pass_sqrt_abs_gdd_s", format!("{:e}", single.abs().sqrt())),
                        ])
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => input_error(vec![Issue { path: "gdd grating".into(), message: e.to_string() }]),
            }
        }
        Command::Gdd(GddCommand::FiberFromWidth { fwhm, irf, walkoff, gamma }) => {
            let result = (|| {
                let reference = reference_phase_matching()?;
                let pm = PhaseMatching::new(
                    reference.crystal_length(),
                    walkoff / reference.crystal_length(),
                    reference.center_signal(),
                    reference.center_idler(),
                )?;
                let width = match irf {
                    Some(irf) => deconvolve_quadrature(fwhm, &InstrumentResponse::new(irf)?)?,
                    None => fwhm,
                };
                Ok::<_, ndc_core::Error>((width, fiber_gdd_from_measured_width(width, &pm, gamma)?))
            })();
            match result {
                Ok((width, est)) => {
                    print!(
                        "{}",
                        key_values([
                            ("intrinsic_fwhm_s", format!("{width:e}")),
                            ("gdd_s2", format!("{:e}", est.gdd)),
                            ("sqrt_gdd_s", format!("{:e}", est.gdd.sqrt())),
                            ("asymptotic", est.asymptotic.to_string()),
                        ])
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => input_error(vec![Issue { path: "gdd fiber-from-width".into(), message: e.to_string() }]),
            }
        }
    }
}
