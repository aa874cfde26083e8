//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Mode, SweepConfig};
use crate::error::{Error, Result};
use crate::presets;
use crate::sweep::run_sweep;

#[derive(Debug, Parser)]
#[command(name = "washboard", version, about = "Drift and diffusion in a tilted periodic potential")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral drift and diffusion over a sweep.
    Transport,
    /// Series coefficients and partial sums against the spectral values.
    Expand,
    /// Overdamped limit against the spectral values.
    Overdamped,
    /// Monte Carlo estimates.
    Mc,
    /// Spectral D against the finite-difference mobility.
    EinsteinCheck,
    /// Preset sweep for one of the standard figures (1 to 7).
    Fig { number: u8 },
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// TOML sweep configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output CSV; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub n_hermite: Option<usize>,
    #[arg(long, global = true)]
    pub n_fourier: Option<usize>,
    /// Expansion order K.
    #[arg(long, global = true)]
    pub order: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Add columns scaled by F_c, U_L and D_L.
    #[arg(long, global = true)]
    pub scale: bool,
}

impl Overrides {
    fn apply(&self, c: &mut SweepConfig) {
        if let Some(n) = self.n_hermite {
            c.truncation.n_hermite = n;
            c.truncation.max_hermite = c.truncation.max_hermite.max(n);
            c.expansion.n_hermite = Some(n);
        }
        if let Some(m) = self.n_fourier {
            c.truncation.n_fourier = m;
        }
        if let Some(k) = self.order {
            c.expansion.order = k;
        }
        if let Some(s) = self.seed {
            c.mc.seed = s;
        }
        if self.scale {
            c.output.scale = true;
        }
        if let Some(p) = &self.out {
            c.output.path = Some(p.clone());
        }
    }
}

/// Resolved configuration for a command line.
pub fn resolve(cli: &Cli) -> Result<SweepConfig> {
    let mut c = match (&cli.command, &cli.overrides.config) {
        (Command::Fig { number }, None) => presets::figure(*number)?,
        (Command::Fig { .. }, Some(_)) => {
            return Err(Error::Config("fig takes its parameters from the preset, not --config".into()))
        }
        (_, None) => return Err(Error::Config("--config is required".into())),
        (cmd, Some(path)) => {
            let mut c = SweepConfig::load(path)?;
            c.mode = match cmd {
                Command::Transport => Mode::Transport,
                Command::Expand => Mode::Expand,
                Command::Overdamped => Mode::Overdamped,
                Command::Mc => Mode::Mc,
                Command::EinsteinCheck => Mode::EinsteinCheck,
                Command::Fig { .. } => unreachable!(),
            };
            c
        }
    };
    cli.overrides.apply(&mut c);
    c.validate()?;
    Ok(c)
}

/// `<stem>_coefficients.csv` next to `out`.
pub fn coefficients_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_coefficients.csv"))
}

/// Runs one command line and returns the exit status: 0 on success, 1 for
/// configuration or IO errors, 2 when any sweep point failed.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(0) => 0,
        Ok(failed) => {
            eprintln!("{failed} sweep point(s) failed; see the error column");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<usize> {
    let config = resolve(cli)?;
    let out = run_sweep(&config)?;
    match &config.output.path {
        Some(path) => {
            out.table.save(path)?;
            if let Some(coeffs) = &out.coefficients {
                coeffs.save(&coefficients_path(path))?;
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            out.table.write_csv(&mut lock)?;
            lock.flush().map_err(|e| Error::io(Path::new("<stdout>"), e))?;
        }
    }
    Ok(out.failures)
}
