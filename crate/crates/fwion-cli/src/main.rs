//! Command-line harness: scenario catalog, eigensolver runs, propagation
//! runs with checkpoint/resume, and post-processing of run directories.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use fwion_core::config::RunConfig;
use fwion_core::eigen::{self, RelaxConfig, SpectralScanConfig};
use fwion_core::photoelectron::IonizationWindow;
use fwion_core::runner::{self, Runner};
use fwion_core::snapshot;
use fwion_core::spinor::SpinorWavefunction;
use fwion_core::{scenario, FwError, Grid2D, SoftCorePotential};

const OUTPUT_ROOT_ENV: &str = "FWION_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "fwion", version, about = "2D weakly relativistic laser-ion dynamics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the scenario catalog.
    Catalog,
    /// Solve the field-free eigenproblem of a soft-core ion.
    Eigen(EigenArgs),
    /// Execute a run from a scenario or a config file.
    Run(RunArgs),
    /// Photoelectron energy spectrum of a finished run.
    Pes(PesArgs),
    /// Radiation spectrum of a recorded acceleration channel.
    Spectrum(SpectrumArgs),
    /// Compare two finished runs.
    Compare(CompareArgs),
}

#[derive(Args)]
struct EigenArgs {
    /// Soft-core coupling strength k (hartree bohr).
    #[arg(long)]
    k: f64,
    /// Soft-core softening parameter (bohr^2).
    #[arg(long, default_value_t = 1.0)]
    qe: f64,
    /// Nominal effective charge of the core.
    #[arg(long, default_value_t = 1)]
    z_charge: i32,
    #[arg(long, default_value_t = 256)]
    nx: usize,
    #[arg(long, default_value_t = 256)]
    nz: usize,
    #[arg(long, default_value_t = 0.1)]
    dx: f64,
    #[arg(long, default_value_t = 0.1)]
    dz: f64,
    /// Number of states to relax (1..=6).
    #[arg(long, default_value_t = 6)]
    states: usize,
    /// Also run the spectral scan and report both energy sets.
    #[arg(long)]
    scan: bool,
    /// Output directory (default <root>/eigen_k<k>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name from the catalog.
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// Desk-scale divisor for pulse length and box size.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default <root>/<run name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resume a checkpointed run directory.
    #[arg(long, conflicts_with_all = ["scenario", "config"])]
    resume: Option<PathBuf>,
    /// Stop (with a checkpoint) after this many steps.
    #[arg(long)]
    halt_after: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// Toggle overrides, e.g. --set-toggle mass_shift=false.
    #[arg(long = "set-toggle", value_name = "NAME=BOOL")]
    set_toggle: Vec<String>,
}

#[derive(Args)]
struct PesArgs {
    /// Run directory.
    run: PathBuf,
    /// Bound-region radius X_I in bohr (defaults to the run configuration).
    #[arg(long)]
    xi: Option<f64>,
    /// Sliding width X_0 in bohr.
    #[arg(long)]
    x0: Option<f64>,
    /// Output CSV (default <run>/pes.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Run directory.
    run: PathBuf,
    /// Recorded channel: ax_rel, az_rel, ax_plain, az_plain, x_mean, ...
    #[arg(long, default_value = "ax_rel")]
    channel: String,
    /// Window: "plateau" (turn-on end to pulse end), "post" (after the
    /// pulse), or "t0:t1" in a.u.
    #[arg(long, default_value = "plateau")]
    window: String,
    /// Output CSV (default <run>/spectrum_<channel>.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// First run directory.
    a: PathBuf,
    /// Second run directory.
    b: PathBuf,
    /// Recorded observable to diff (e.g. x_mean), or "spectrum:<channel>"
    /// together with --band for a line-shift comparison.
    #[arg(long, default_value = "x_mean")]
    observable: String,
    /// Band "lo:hi" in units of the laser frequency for spectrum comparisons.
    #[arg(long)]
    band: Option<String>,
}

fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), FwError> {
    match cli.cmd {
        Cmd::Catalog => {
            println!("{:<18} {}", "name", "description");
            for info in scenario::catalog() {
                println!("{:<18} {}", info.name, info.description);
                println!("{:<18}   scaling: {}", "", info.scaling_notes);
            }
            Ok(())
        }
        Cmd::Eigen(args) => cmd_eigen(args),
        Cmd::Run(args) => cmd_run(args),
        Cmd::Pes(args) => cmd_pes(args),
        Cmd::Spectrum(args) => cmd_spectrum(args),
        Cmd::Compare(args) => cmd_compare(args),
    }
}

fn cmd_eigen(args: EigenArgs) -> Result<(), FwError> {
    let p = SoftCorePotential::new(args.k, args.qe, args.z_charge)?;
    let grid = Arc::new(Grid2D::new(args.nx, args.nz, args.dx, args.dz)?);
    let v = p.sample_value(&grid);
    let relax_cfg = RelaxConfig::for_softcore(&p);
    let result = eigen::imaginary_time_relax(&v, &grid, args.states, &relax_cfg)?;

    let out = args
        .out
        .unwrap_or_else(|| output_root().join(format!("eigen_k{}", args.k)));
    std::fs::create_dir_all(&out)?;

    let mut index = serde_json::json!({
        "potential": { "k": args.k, "q_e": args.qe, "z_charge": args.z_charge },
        "grid": { "nx": args.nx, "nz": args.nz, "dx": args.dx, "dz": args.dz },
        "levels": result.levels,
        "code_version": runner::CODE_VERSION,
    });
    let mut files = Vec::new();
    for (i, state) in result.states.iter().enumerate() {
        let name = format!("state_{i:03}.snap");
        let psi = SpinorWavefunction::from_scalar(
            grid.clone(),
            state.clone(),
            (1.0.into(), 0.0.into()),
        );
        snapshot::write_snapshot(&out.join(&name), &psi, 0)?;
        files.push(name);
    }
    index["files"] = serde_json::json!(files);

    if args.scan {
        let scan_cfg = SpectralScanConfig::for_softcore(&p);
        let scan = eigen::spectral_scan(&v, &grid, &scan_cfg)?;
        index["spectral_scan"] = serde_json::json!(scan);
    }
    std::fs::write(
        out.join("eigen.json"),
        serde_json::to_string_pretty(&index)?,
    )?;

    for level in &result.levels {
        println!(
            "E_{} = {:+.6} hartree  ({:?}, width {:.2e})",
            level.index, level.energy, level.label, level.linewidth
        );
    }
    println!("written to {}", out.display());
    Ok(())
}

fn apply_toggle_overrides(cfg: &mut RunConfig, sets: &[String]) -> Result<(), FwError> {
    for s in sets {
        let (name, value) = s
            .split_once('=')
            .ok_or_else(|| FwError::Config(format!("bad toggle override '{s}'")))?;
        let v: bool = value
            .parse()
            .map_err(|_| FwError::Config(format!("bad boolean in '{s}'")))?;
        match name {
            "dipole_approximation" => cfg.toggles.dipole_approximation = v,
            "pauli" => cfg.toggles.pauli = v,
            "mass_shift" => cfg.toggles.mass_shift = v,
            "darwin" => cfg.toggles.darwin = v,
            "spin_orbit" => cfg.toggles.spin_orbit = v,
            "a2_half_factor" => cfg.toggles.a2_half_factor = v,
            other => {
                return Err(FwError::Config(format!("unknown toggle '{other}'")));
            }
        }
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), FwError> {
    if let Some(dir) = args.resume {
        let mut runner = Runner::resume(&dir)?;
        println!(
            "resuming '{}' at step {}/{}",
            runner.config.name,
            runner.step_index(),
            runner.steps_total()
        );
        let complete = runner.run_until(args.halt_after)?;
        let arts = runner.finalize()?;
        report_run(&arts, complete);
        return Ok(());
    }

    let mut cfg = match (&args.scenario, &args.config) {
        (Some(name), None) => scenario::build(name, args.scale)?,
        (None, Some(path)) => RunConfig::from_toml_str(&std::fs::read_to_string(path)?)?,
        _ => {
            return Err(FwError::Config(
                "give exactly one of --scenario or --config (or --resume)".into(),
            ))
        }
    };
    apply_toggle_overrides(&mut cfg, &args.set_toggle)?;

    if args.print_config {
        print!("{}", cfg.to_toml_string()?);
        return Ok(());
    }

    let out = args
        .out
        .unwrap_or_else(|| output_root().join(&cfg.name));
    let mut runner = Runner::new(cfg, Some(out.clone()))?;
    println!(
        "running '{}': {} steps on a {} grid -> {}",
        runner.config.name,
        runner.steps_total(),
        format!("{}x{}", runner.config.grid.nx, runner.config.grid.nz),
        out.display()
    );
    let complete = runner.run_until(args.halt_after)?;
    let arts = runner.finalize()?;
    report_run(&arts, complete);
    Ok(())
}

fn report_run(arts: &fwion_core::runner::RunArtifacts, complete: bool) {
    for w in &arts.warnings {
        println!("warning: {w}");
    }
    if complete {
        println!(
            "done: {} steps, final norm {:.6}, absorbed probability {:.6}",
            arts.steps_done,
            arts.psi.norm(),
            arts.ledger
                .as_ref()
                .map(|l| l.removed_probability)
                .unwrap_or(0.0)
        );
    } else {
        println!("halted at step {} (checkpoint written)", arts.steps_done);
    }
}

fn cmd_pes(args: PesArgs) -> Result<(), FwError> {
    let window = match (args.xi, args.x0) {
        (Some(xi), Some(x0)) => Some(IonizationWindow {
            x_inner: xi,
            x_slide: x0,
        }),
        (None, None) => None,
        _ => {
            return Err(FwError::Config(
                "give both --xi and --x0 or neither".into(),
            ))
        }
    };
    let es = runner::pes_from_run_dir(&args.run, window)?;
    let out = args.out.unwrap_or_else(|| args.run.join("pes.csv"));
    let manifest = runner::read_manifest(&args.run)?;
    runner::write_pes_csv(&out, &es, &manifest.config_hash)?;
    let meta = serde_json::json!({
        "x_inner": window.map(|w| w.x_inner),
        "x_slide": window.map(|w| w.x_slide),
        "total_probability": es.total_probability,
        "config_hash": manifest.config_hash,
        "note": "absorbed flux free-propagates with the x kinetic phase only",
    });
    std::fs::write(
        out.with_extension("json"),
        serde_json::to_string_pretty(&meta)?,
    )?;
    println!(
        "photoelectron spectrum: {} bins, total probability {:.6} -> {}",
        es.eps_au.len(),
        es.total_probability,
        out.display()
    );
    Ok(())
}

fn parse_window(spec: &str, manifest: &runner::Manifest) -> Result<Option<(f64, f64)>, FwError> {
    match spec {
        "plateau" => Ok(None),
        "post" => {
            let t_p = manifest
                .pulse_t_p
                .ok_or_else(|| FwError::Config("run had no pulse; use t0:t1".into()))?;
            Ok(Some((t_p, manifest.t_end)))
        }
        other => {
            let (a, b) = other
                .split_once(':')
                .ok_or_else(|| FwError::Config(format!("bad window '{other}'")))?;
            let t0: f64 = a.parse().map_err(|_| FwError::Config("bad window start".into()))?;
            let t1: f64 = b.parse().map_err(|_| FwError::Config("bad window end".into()))?;
            Ok(Some((t0, t1)))
        }
    }
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<(), FwError> {
    let manifest = runner::read_manifest(&args.run)?;
    let window = parse_window(&args.window, &manifest)?;
    let spec = runner::spectrum_from_run_dir(&args.run, &args.channel, window)?;
    let out = args
        .out
        .unwrap_or_else(|| args.run.join(format!("spectrum_{}.csv", args.channel)));
    runner::write_spectrum_csv(&out, &spec, &manifest.config_hash)?;
    println!(
        "spectrum over [{:.2}, {:.2}] a.u., resolution {:.4} omega -> {}",
        spec.window.0,
        spec.window.1,
        spec.resolution(),
        out.display()
    );
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), FwError> {
    if let Some(channel) = args.observable.strip_prefix("spectrum:") {
        let band_spec = args
            .band
            .ok_or_else(|| FwError::Config("spectrum comparison needs --band lo:hi".into()))?;
        let (lo, hi) = band_spec
            .split_once(':')
            .ok_or_else(|| FwError::Config("bad band; use lo:hi".into()))?;
        let band: (f64, f64) = (
            lo.parse().map_err(|_| FwError::Config("bad band lo".into()))?,
            hi.parse().map_err(|_| FwError::Config("bad band hi".into()))?,
        );
        let spec_a = runner::spectrum_from_run_dir(&args.a, channel, None)?;
        let spec_b = runner::spectrum_from_run_dir(&args.b, channel, None)?;
        let shift = fwion_core::observables::line_shift(&spec_a, &spec_b, band)?;
        println!("{}", serde_json::to_string_pretty(&shift)?);
        return Ok(());
    }
    check_axes_match(&args.a, &args.b)?;
    let report = runner::compare_series(&args.a, &args.b, &args.observable)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn check_axes_match(a: &Path, b: &Path) -> Result<(), FwError> {
    let ma = runner::read_manifest(a)?;
    let mb = runner::read_manifest(b)?;
    if (ma.t_end - mb.t_end).abs() > 1e-9 {
        return Err(FwError::Config(format!(
            "runs span different times ({} vs {})",
            ma.t_end, mb.t_end
        )));
    }
    Ok(())
}
