use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use rayon::prelude::*;
use serde::Serialize;
use shellscatter::eigenfuncs::{wave, WaveKind};
use shellscatter::evolution::{evolve, write_snapshot_csv, EvolutionRequest, EvolutionState, Generator, SnapshotManifest};
use shellscatter::green::green_theorem1;
use shellscatter::testspace::{Bump, TestFunction};
use shellscatter::transforms::{PlanOptions, TransformPlan};
use shellscatter::verify::{run_suite, Suite};
use shellscatter::{csv_row, format_shortest, phase_shift_grid, s_matrix, ComplexEnergy, Error, Sign, C64};

use crate::config::RunConfig;
use crate::{Command, GeneratorArg, Kind, SignArg, SuiteArg};

/// Spectral cutoff for snapshots; keeps the t = 0 snapshot within 1e-6 of the packet.
const SNAPSHOT_OMEGA: f64 = 200.0;

/// Why a command stopped.
enum Failure {
    Config(String),
    Numeric(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numeric(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.into())
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    command: &'a str,
    error: &'static str,
    message: String,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidConfig(_) => "InvalidConfig",
        Error::DegenerateEnergy { .. } => "DegenerateEnergy",
        Error::OnRealAxis(_) => "OnRealAxis",
        Error::StepTooLarge { .. } => "StepTooLarge",
        Error::QuadratureFailure { .. } => "QuadratureFailure",
        Error::SupportViolation(_) => "SupportViolation",
        Error::OrderTooHigh { .. } => "OrderTooHigh",
        Error::InvalidArgument(_) => "InvalidArgument",
    }
}

pub fn run(command: &Command, cfg: &RunConfig) -> ExitCode {
    let name = match command {
        Command::Smatrix => "smatrix",
        Command::Eigenfunction { .. } => "eigenfunction",
        Command::Green { .. } => "green",
        Command::Evolve { .. } => "evolve",
        Command::Verify { .. } => "verify",
    };
    let result = match command {
        Command::Smatrix => smatrix(cfg),
        Command::Eigenfunction { kind, energy, energy_im } => eigenfunction(cfg, *kind, ComplexEnergy::new(*energy, *energy_im)),
        Command::Green { energy, energy_im, s } => green(cfg, ComplexEnergy::new(*energy, *energy_im), s),
        Command::Evolve { packet, center, halfwidth, times, generator, sign } => {
            evolve_packet(cfg, packet.as_deref(), *center, *halfwidth, times, *generator, *sign)
        }
        Command::Verify { suite } => verify(cfg, *suite),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Numeric(e)) => {
            let report = ErrorReport { command: name, error: error_kind(&e), message: e.to_string() };
            let text = serde_json::to_string_pretty(&report).expect("error report serialises");
            println!("{text}");
            let written = fs::create_dir_all(&cfg.output_dir).and_then(|_| fs::write(cfg.output_dir.join("error.json"), text + "\n"));
            if let Err(io) = written {
                eprintln!("could not write error.json: {io}");
            }
            ExitCode::from(3)
        }
    }
}

fn create(dir: &Path, file: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(file))?))
}

/// `2.5`, `3+2i`, `3-0.5i`.
fn energy_label(e: ComplexEnergy) -> String {
    if e.im() == 0.0 {
        format_shortest(e.re())
    } else if e.im() > 0.0 {
        format!("{}+{}i", format_shortest(e.re()), format_shortest(e.im()))
    } else {
        format!("{}{}i", format_shortest(e.re()), format_shortest(e.im()))
    }
}

fn smatrix(cfg: &RunConfig) -> Result<ExitCode, Failure> {
    let p = &cfg.potential;
    let energies = cfg.energies()?;
    let s = energies.par_iter().map(|&e| s_matrix(e, p)).collect::<shellscatter::Result<Vec<_>>>()?;
    let delta = phase_shift_grid(&energies, p)?;
    let mut out = create(&cfg.output_dir, "smatrix.csv")?;
    writeln!(out, "E,S_re,S_im,abs_S,delta")?;
    for ((e, s), d) in energies.iter().zip(&s).zip(&delta) {
        writeln!(out, "{}", csv_row(&[*e, s.re, s.im, s.norm(), *d]))?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn eigenfunction(cfg: &RunConfig, kind: Kind, energy: ComplexEnergy) -> Result<ExitCode, Failure> {
    let (wave_kind, label) = match kind {
        Kind::Regular => (WaveKind::Regular, "regular"),
        Kind::ChiPlus => (WaveKind::ChiPlus, "chi_plus"),
        Kind::ChiMinus => (WaveKind::ChiMinus, "chi_minus"),
        Kind::FPlus => (WaveKind::FPlus, "f_plus"),
        Kind::FMinus => (WaveKind::FMinus, "f_minus"),
        Kind::Sigma2 => (WaveKind::Sigma2, "sigma2"),
        Kind::ChiFree => (WaveKind::Free, "chi_free"),
    };
    let w = wave(wave_kind, energy, &cfg.potential)?;
    let radii = cfg.radii();
    let values: Vec<C64> = radii.par_iter().map(|&r| w.value(r)).collect();
    let mut out = create(&cfg.output_dir, &format!("{label}_E{}.csv", energy_label(energy)))?;
    writeln!(out, "r,re,im")?;
    for (r, v) in radii.iter().zip(&values) {
        writeln!(out, "{}", csv_row(&[*r, v.re, v.im]))?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn green(cfg: &RunConfig, energy: ComplexEnergy, sources: &[f64]) -> Result<ExitCode, Failure> {
    let p = &cfg.potential;
    let sources = if sources.is_empty() { vec![0.5 * p.a, 0.5 * (p.a + p.b), 2.0 * p.b] } else { sources.to_vec() };
    if let Some(s) = sources.iter().find(|s| s.is_nan() || **s <= 0.0) {
        return Err(Failure::Config(format!("source radius must be positive (got {s})")));
    }
    // validates the energy before anything is written
    green_theorem1(sources[0], sources[0], energy, p)?;
    let radii: Vec<f64> = cfg.radii().into_iter().filter(|&r| r > 0.0).collect();
    let mut rows = Vec::with_capacity(radii.len() * sources.len());
    for &s in &sources {
        let column = radii.par_iter().map(|&r| green_theorem1(r, s, energy, p)).collect::<shellscatter::Result<Vec<_>>>()?;
        rows.extend(radii.iter().zip(column).map(|(&r, g)| (r, s, g)));
    }
    let mut out = create(&cfg.output_dir, &format!("green_E{}.csv", energy_label(energy)))?;
    writeln!(out, "r,s,re,im")?;
    for (r, s, g) in rows {
        writeln!(out, "{}", csv_row(&[r, s, g.re, g.im]))?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn load_packet(cfg: &RunConfig, packet: Option<&Path>, center: Option<f64>, halfwidth: f64) -> Result<TestFunction, Failure> {
    let p = &cfg.potential;
    let f = match packet {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            let f: TestFunction = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("bad packet {}: {e}", path.display())))?;
            f.validate(p).map(|_| f)
        }
        None => {
            let c = center.unwrap_or(p.b + 4.5);
            TestFunction::new(vec![Bump::new(c, halfwidth, C64::new(1.0, 0.0))], c + halfwidth + 1.0, p)
        }
    };
    f.map_err(|e| Failure::Config(e.to_string()))
}

fn evolve_packet(
    cfg: &RunConfig,
    packet: Option<&Path>,
    center: Option<f64>,
    halfwidth: f64,
    times: &[f64],
    generator: GeneratorArg,
    sign: SignArg,
) -> Result<ExitCode, Failure> {
    let p = &cfg.potential;
    let f = load_packet(cfg, packet, center, halfwidth)?;
    if times.is_empty() || times.iter().any(|t| !t.is_finite()) {
        return Err(Failure::Config("need at least one finite time".into()));
    }
    let generator = match generator {
        GeneratorArg::Full => Generator::Full,
        GeneratorArg::Free => Generator::Free,
    };
    let sign = match sign {
        SignArg::Plus => Sign::Plus,
        SignArg::Minus => Sign::Minus,
    };
    let span = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let plan = TransformPlan::for_function(&f, p, PlanOptions { time_span: span, omega: SNAPSHOT_OMEGA, ..PlanOptions::round_trip() })?;
    let mut files = Vec::with_capacity(times.len());
    for &t in times {
        let req = EvolutionRequest { state: EvolutionState::Function(f.clone()), time: t, generator, sign };
        let snapshot = evolve(&req, &plan, p, cfg.tolerances.quadrature.max(1e-6))?;
        let name = format!("snapshot_t{}.csv", format_shortest(t));
        let mut out = create(&cfg.output_dir, &name)?;
        write_snapshot_csv(&snapshot, &mut out)?;
        out.flush()?;
        files.push(name);
    }
    let manifest = SnapshotManifest { times: times.to_vec(), generator, sign, cfg: *p, files };
    fs::write(cfg.output_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(ExitCode::SUCCESS)
}

fn verify(cfg: &RunConfig, suite: SuiteArg) -> Result<ExitCode, Failure> {
    let suite = match suite {
        SuiteArg::Full => Suite::Full,
        SuiteArg::UnitarityOnly => Suite::UnitarityOnly,
    };
    let report = run_suite(&cfg.potential, suite);
    let text = serde_json::to_string_pretty(&report)? + "\n";
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join("verify.json"), &text)?;
    print!("{text}");
    Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
