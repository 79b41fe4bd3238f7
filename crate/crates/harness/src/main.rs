//! `dpdlab`: run pre-distortion experiments from a config file, inspect the
//! companding quantizer, and generate or examine OFDM waveforms.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dpdlab::artifacts;
use dpdlab::config::{rho_from_db, ExperimentConfig};
use dpdlab::scenarios;
use dpdlab_core::error::{Error, Result};
use dpdlab_core::waveform::{self, OfdmConfig};
use dpdlab_core::{capture, io, metrics};

#[derive(Parser)]
#[command(
    name = "dpdlab",
    version,
    about = "Simulation lab for ILC pre-distortion with reference-level-controlled capture"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Key-value config file (see README for the schema).
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides DPDLAB_OUT and the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for independent sweep points.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Emit the companding quantizer's cell edges and widths as CSV.
    QuantizerReport {
        /// Peak-over-reference ratio in dB; <= 0 reports the uniform grid.
        #[arg(long = "rho-db")]
        rho_db: f64,
        /// Quantizer resolution (sign plus magnitude).
        #[arg(long)]
        bits: u32,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// OFDM waveform utilities.
    #[command(subcommand)]
    Waveform(WaveformCmd),
}

#[derive(Subcommand)]
enum WaveformCmd {
    /// Generate a default-profile OFDM waveform.
    Gen {
        /// Destination for the binary waveform.
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// OFDM symbols to generate.
        #[arg(long, default_value_t = 20)]
        symbols: usize,
        /// Also write the transmitted constellation grid as CSV.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Print measurements of a stored waveform.
    Inspect {
        path: PathBuf,
        /// Also write a Welch PSD as CSV.
        #[arg(long)]
        psd: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpdlab: {e}");
            match e {
                Error::Config(_) | Error::Parse(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            seed,
            out,
            parallel,
        } => run(config, seed, out, parallel),
        Command::QuantizerReport { rho_db, bits, out } => quantizer_report(rho_db, bits, out),
        Command::Waveform(cmd) => waveform_cmd(cmd),
    }
}

fn run(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>, parallel: usize) -> Result<()> {
    if parallel == 0 {
        return Err(Error::Config("--parallel must be at least 1".into()));
    }
    let mut cfg = ExperimentConfig::from_file(&config)?;
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    // Precedence: --out flag, then DPDLAB_OUT, then the config file.
    if let Some(out) = out {
        cfg.output_dir = out;
    } else if let Some(env_out) = std::env::var_os("DPDLAB_OUT") {
        if !env_out.is_empty() {
            cfg.output_dir = PathBuf::from(env_out);
        }
    }
    scenarios::run_experiment(&cfg, parallel)?;
    println!(
        "{} artifacts written to {}",
        cfg.scenario.tag(),
        cfg.output_dir.display()
    );
    Ok(())
}

/// Cell edges and widths of the magnitude quantizer at a given reference
/// level. Amplitudes are normalized to the peak (dimensionless, [0, 1]).
fn quantizer_report(rho_db: f64, bits: u32, out: Option<PathBuf>) -> Result<()> {
    let spec = scenarios::quantizer_for_rho(bits, rho_db);
    spec.validate()?;
    let cells = spec.cells();
    let edges: Vec<f64> = if rho_db > 0.0 {
        let mut e = vec![0.0];
        e.extend(capture::thresholds(rho_from_db(rho_db), spec.q())?);
        e.push(1.0);
        e
    } else {
        (0..=cells).map(|q| q as f64 / cells as f64).collect()
    };
    let mut text = String::from("cell_index,lower_edge_normalized,step_normalized\n");
    for q in 0..cells {
        text.push_str(&format!(
            "{q},{:.12e},{:.12e}\n",
            edges[q],
            edges[q + 1] - edges[q]
        ));
    }
    match out {
        Some(path) => {
            if let Some(dir) = path.parent() {
                artifacts::ensure_dir(dir)?;
            }
            std::fs::write(&path, text)?;
            println!("{} cells written to {}", cells, path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn waveform_cmd(cmd: WaveformCmd) -> Result<()> {
    match cmd {
        WaveformCmd::Gen {
            out,
            seed,
            symbols,
            grid,
        } => {
            let cfg = OfdmConfig {
                num_symbols: symbols,
                ..OfdmConfig::default()
            };
            let (w, gridref) = waveform::generate_ofdm(&cfg, seed)?;
            if let Some(dir) = out.parent() {
                artifacts::ensure_dir(dir)?;
            }
            io::write_waveform(&out, &w)?;
            if let Some(grid_path) = grid {
                io::write_grid_csv(&grid_path, &gridref)?;
            }
            println!(
                "{} samples at {} MHz (seed {seed}) written to {}",
                w.len(),
                w.sample_rate / 1e6,
                out.display()
            );
            Ok(())
        }
        WaveformCmd::Inspect { path, psd } => {
            let w = io::read_waveform(&path)?;
            println!("samples:     {}", w.len());
            println!("sample_rate: {} Hz", w.sample_rate);
            println!(
                "duration:    {:.3} us",
                w.len() as f64 / w.sample_rate * 1e6
            );
            println!("rms:         {:.6}", w.rms());
            println!("mean_power:  {:.6e}", w.mean_power());
            println!("papr:        {:.3} dB", waveform::measure_papr(&w)?);
            if let Some(psd_path) = psd {
                let spectrum = metrics::psd(&w, &metrics::PsdConfig::default())?;
                artifacts::write_psd(&psd_path, &spectrum)?;
                println!("psd:         {}", psd_path.display());
            }
            Ok(())
        }
    }
}
