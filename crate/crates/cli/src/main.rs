//! `shellscatter`: tables, eigenfunctions, Green functions, wavepacket
//! evolution and the self-check suite for the spherical shell potential.
//!
//! Exit codes: 0 success, 1 failed verification, 2 bad configuration,
//! 3 numeric failure (a JSON report is written to `<out>/error.json`).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "shellscatter", version, about = "Spherical shell scattering: S-matrix, eigenfunctions, Green functions, evolution")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags below take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    v0: Option<f64>,
    #[arg(long, global = true)]
    emin: Option<f64>,
    #[arg(long, global = true)]
    emax: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write smatrix.csv over the configured energy grid.
    Smatrix,
    /// Write one closed-form solution on the radial grid.
    Eigenfunction {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, allow_negative_numbers = true)]
        energy: f64,
        /// Imaginary part of the energy.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        energy_im: f64,
    },
    /// Write the resolvent kernel G(r, s; E) for a few source radii.
    Green {
        #[arg(long, allow_negative_numbers = true)]
        energy: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        energy_im: f64,
        /// Source radii; defaults to a/2, (a+b)/2 and 2b.
        #[arg(long, value_delimiter = ',')]
        s: Vec<f64>,
    },
    /// Evolve a bump packet and write radial snapshots plus manifest.json.
    Evolve {
        /// JSON test function: {"bumps": [{"center", "halfwidth", "amplitude_re", "amplitude_im"}], "r_max"}.
        #[arg(long)]
        packet: Option<PathBuf>,
        /// Single bump centre, used without --packet (default b + 4.5).
        #[arg(long)]
        center: Option<f64>,
        #[arg(long, default_value_t = 3.5)]
        halfwidth: f64,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0,1")]
        times: Vec<f64>,
        #[arg(long, value_enum, default_value_t = GeneratorArg::Full)]
        generator: GeneratorArg,
        #[arg(long, value_enum, default_value_t = SignArg::Plus)]
        sign: SignArg,
    },
    /// Run the self-check suite and write verify.json.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::Full)]
        suite: SuiteArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Kind {
    Regular,
    ChiPlus,
    ChiMinus,
    FPlus,
    FMinus,
    Sigma2,
    ChiFree,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum GeneratorArg {
    Full,
    Free,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SignArg {
    Plus,
    Minus,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SuiteArg {
    Full,
    UnitarityOnly,
}

fn configure_threads() {
    let Ok(v) = std::env::var("SHELLSCATTER_THREADS") else { return };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the thread pool: {e}");
            }
        }
        _ => log::warn!("ignoring SHELLSCATTER_THREADS={v:?}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads();
    let c = cli.common;
    let overrides = Overrides { a: c.a, b: c.b, v0: c.v0, e_min: c.emin, e_max: c.emax, out: c.out };
    let cfg = match RunConfig::load(c.config.as_deref(), &overrides) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("configuration error: {msg}");
            return ExitCode::from(2);
        }
    };
    commands::run(&cli.command, &cfg)
}
