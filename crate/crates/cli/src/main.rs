//! Command-line front end: one subcommand per experiment kind.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use cvtransfer::experiment::{init_workers, run, ExperimentKind, ExperimentSpec, Grid};
use cvtransfer::{AmplitudeMode, Cutoffs, Error, Result};

/// Exit status of an oracle check that ran but did not pass.
const ORACLE_FAILED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "cvtransfer",
    version,
    about = "Entanglement transfer from two-mode CV resources to qubit pairs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Σ diag(n, m) of the table against ζ at fixed cutoffs.
    NormalizationScan(Flags),
    /// Negativity against τ for one resource.
    Transfer(Flags),
    /// Negativity over (n̄, τ) for a thermalized squeezed pair.
    ThermalSurface(Flags),
    /// Negativity over (Γt, τ) for a squeezed pair in a lossy channel.
    DissipationSurface(Flags),
    /// Gaussian minus s-subtracted negativity over (ζ, τ).
    DegaussDiff(Flags),
    /// Maximum transfer for s = 0..s of seeded random resources.
    RandomMaxScan(Flags),
    /// Covariance route against brute-force Fock states.
    OracleCheck(Flags),
}

impl Command {
    fn split(self) -> (ExperimentKind, Flags) {
        use Command::*;
        match self {
            NormalizationScan(f) => (ExperimentKind::NormalizationScan, f),
            Transfer(f) => (ExperimentKind::Transfer, f),
            ThermalSurface(f) => (ExperimentKind::ThermalSurface, f),
            DissipationSurface(f) => (ExperimentKind::DissipationSurface, f),
            DegaussDiff(f) => (ExperimentKind::DegaussDiff, f),
            RandomMaxScan(f) => (ExperimentKind::RandomMaxScan, f),
            OracleCheck(f) => (ExperimentKind::OracleCheck, f),
        }
    }
}

/// Grid given as `x` or `lo:hi:points`; a config file may also use a bare number.
#[derive(Debug, Clone, Copy)]
struct GridArg(Grid);

impl std::str::FromStr for GridArg {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.parse().map(GridArg)
    }
}

impl<'de> Deserialize<'de> for GridArg {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
            Full(Grid),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) => Ok(GridArg(Grid::single(x))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Full(g) => Ok(GridArg(g)),
        }
    }
}

/// Every setting is optional; unset ones fall back to the config file and
/// then to the defaults of the experiment kind.
#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct Flags {
    /// JSON file with any of these settings; flags override it.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Squeezing, `x` or `lo:hi:points`.
    #[arg(long, allow_hyphen_values = true)]
    zeta: Option<GridArg>,
    /// Interaction time grid, `x` or `lo:hi:points`.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<GridArg>,
    /// Points of the default τ grid on [0, 2π].
    #[arg(long)]
    tau_points: Option<usize>,
    /// Thermal occupation, `x` or `lo:hi:points`.
    #[arg(long, allow_hyphen_values = true)]
    nbar: Option<GridArg>,
    /// Bath occupation of the loss channel.
    #[arg(long = "bigN", allow_hyphen_values = true)]
    #[serde(rename = "bigN")]
    big_n: Option<f64>,
    /// Dissipation time, `x` or `lo:hi:points`.
    #[arg(long, allow_hyphen_values = true)]
    gamma_t: Option<GridArg>,
    /// Photons subtracted from each mode.
    #[arg(long)]
    s: Option<usize>,
    /// Beam-splitter transmittivity of a physical subtraction.
    #[arg(long, allow_hyphen_values = true)]
    transmittivity: Option<f64>,
    #[arg(long)]
    ncut: Option<usize>,
    #[arg(long)]
    mcut: Option<usize>,
    #[arg(long)]
    kcut: Option<usize>,
    /// Discarded-weight target of adaptive cutoffs.
    #[arg(long, allow_hyphen_values = true)]
    tail: Option<f64>,
    /// Random resources drawn by `random-max-scan`.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Pass threshold of `oracle-check`.
    #[arg(long, allow_hyphen_values = true)]
    tolerance: Option<f64>,
    /// Output prefix; `.csv` (and `.svg`) are appended. CSV goes to stdout without it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: bool,
    /// Use S_n = |sin(τ√n)| instead of the signed amplitude.
    #[arg(long)]
    unsigned_sn: bool,
}

impl Flags {
    /// Flags set here win over those in `file`.
    fn over(self, file: Flags) -> Flags {
        Flags {
            config: self.config,
            zeta: self.zeta.or(file.zeta),
            tau: self.tau.or(file.tau),
            tau_points: self.tau_points.or(file.tau_points),
            nbar: self.nbar.or(file.nbar),
            big_n: self.big_n.or(file.big_n),
            gamma_t: self.gamma_t.or(file.gamma_t),
            s: self.s.or(file.s),
            transmittivity: self.transmittivity.or(file.transmittivity),
            ncut: self.ncut.or(file.ncut),
            mcut: self.mcut.or(file.mcut),
            kcut: self.kcut.or(file.kcut),
            tail: self.tail.or(file.tail),
            samples: self.samples.or(file.samples),
            seed: self.seed.or(file.seed),
            tolerance: self.tolerance.or(file.tolerance),
            out: self.out.or(file.out),
            svg: self.svg || file.svg,
            unsigned_sn: self.unsigned_sn || file.unsigned_sn,
        }
    }

    fn into_spec(self, kind: ExperimentKind) -> Result<ExperimentSpec> {
        let flags = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                let file: Flags = serde_json::from_str(&text)?;
                self.over(file)
            }
            None => self,
        };
        let mut spec = ExperimentSpec::new(kind);
        if let Some(g) = flags.zeta {
            spec.zeta = g.0;
        }
        if let Some(n) = flags.tau_points {
            spec.tau.points = n;
        }
        if let Some(g) = flags.tau {
            spec.tau = g.0;
        }
        if let Some(g) = flags.nbar {
            spec.nbar = g.0;
        }
        if let Some(g) = flags.gamma_t {
            spec.gamma_t = g.0;
        }
        spec.big_n = flags.big_n.unwrap_or(spec.big_n);
        spec.s = flags.s.unwrap_or(spec.s);
        spec.transmittivity = flags.transmittivity.or(spec.transmittivity);
        if flags.ncut.is_some() || flags.mcut.is_some() || flags.kcut.is_some() {
            let d = Cutoffs::default();
            spec.cutoffs = Some(Cutoffs::new(
                flags.ncut.unwrap_or(d.n_c),
                flags.mcut.unwrap_or(d.m_c),
                flags.kcut.unwrap_or(d.k_c),
            ));
        }
        spec.tail = flags.tail.unwrap_or(spec.tail);
        spec.samples = flags.samples.unwrap_or(spec.samples);
        spec.seed = flags.seed.unwrap_or(spec.seed);
        spec.tolerance = flags.tolerance.unwrap_or(spec.tolerance);
        spec.output = flags.out;
        spec.svg = flags.svg;
        if flags.unsigned_sn {
            spec.amplitude = AmplitudeMode::Unsigned;
        }
        if spec.svg && spec.output.is_none() {
            return Err(Error::Parameter("--svg needs --out".into()));
        }
        Ok(spec)
    }
}

fn execute(kind: ExperimentKind, flags: Flags) -> Result<u8> {
    let spec = flags.into_spec(kind)?;
    log::info!("{} spec {}", kind, spec.hash());
    let table = run(&spec)?;
    match &spec.output {
        Some(prefix) => eprintln!("wrote {} rows to {}.csv", table.len(), prefix.display()),
        None => std::io::stdout().write_all(table.to_csv_string()?.as_bytes())?,
    }
    if kind == ExperimentKind::OracleCheck && table.metadata.get("passed").map(String::as_str) != Some("true") {
        let (names, failed) = (
            table.labels().unwrap_or_default(),
            table.column("pass").unwrap_or_default(),
        );
        for (name, _) in names.iter().zip(failed).filter(|(_, p)| **p == 0.0) {
            match table.metadata.get(&format!("note {name}")) {
                Some(note) => eprintln!("oracle check failed: {name}: {note}"),
                None => eprintln!("oracle check failed: {name}"),
            }
        }
        return Ok(ORACLE_FAILED);
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, flags) = cli.command.split();
    match init_workers().and_then(|_| execute(kind, flags)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
