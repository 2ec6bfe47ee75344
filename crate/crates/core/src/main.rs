use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use channel_grape::runner::{self, RunConfig};
use channel_grape::Error;

#[derive(Parser)]
#[command(name = "channel-grape", version, about = "Optimal readout pulses for a flux-biased phase qubit")]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true, env = "CHANNEL_GRAPE_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the three-level model and write model_fit.json.
    Fit,
    /// Optimize the measurement pulse.
    Optimize,
    /// Replay a pulse CSV through the model.
    Simulate {
        #[arg(long)]
        pulse: PathBuf,
    },
}

fn run(cli: Cli) -> channel_grape::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    match cli.command {
        Command::Fit => {
            let a = runner::fit(&cfg)?;
            println!(
                "phi_ref = {:.7}*2pi  omega_ref = {:.4} rad/ns  validity limit = {:.6}*2pi",
                a.phi_ref_over_2pi, a.omega_ref, a.validity_limit_over_2pi
            );
        }
        Command::Optimize => {
            let a = runner::optimize(&cfg)?;
            let r = &a.report;
            let xi = |c: Option<channel_grape::optimizer::Contrast>| c.map_or(f64::NAN, |c| c.xi);
            println!(
                "fidelity {:.5} -> {:.5}  contrast {:.4} -> {:.4}  ({} iterations, {:?})",
                r.initial_fidelity,
                r.final_fidelity,
                xi(r.initial_contrast),
                xi(r.final_contrast),
                r.iterations,
                r.termination
            );
        }
        Command::Simulate { pulse } => {
            let a = runner::simulate(&cfg, &pulse)?;
            println!(
                "fidelity {:.6}  contrast {:.6}  (P_bright {:.6}, P_dark {:.6})",
                a.fidelity, a.xi, a.p_bright, a.p_dark
            );
        }
    }
    println!("artifacts in {}", cfg.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Json(_) | Error::Argument(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
