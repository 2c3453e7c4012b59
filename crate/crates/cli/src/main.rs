mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{run_command, Failure};
use config::{read_config, Command, ExperimentConfig, Overrides};

/// Stable ODE blowup laboratory for radial focusing wave equations.
#[derive(Debug, Parser)]
#[command(name = "odeblowup", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Spatial dimension (odd, at least 5).
    #[arg(long, global = true)]
    d: Option<i64>,
    /// Exponent of the nonlinearity.
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Rate loss in the expected decay rate.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Polynomial degree of the collocation grid.
    #[arg(long = "N", global = true)]
    n: Option<usize>,
    /// Time step as a fraction of the smallest node spacing.
    #[arg(long, global = true)]
    dt_factor: Option<f64>,
    /// Final similarity time of `evolve`.
    #[arg(long, global = true)]
    tau_end: Option<f64>,
    /// Similarity time at which `rates` reads the unstable coefficient.
    #[arg(long, global = true)]
    tau_probe: Option<f64>,
    /// Reference blowup time.
    #[arg(long = "T0", global = true)]
    t0: Option<f64>,
    /// Half width of the shooting bracket.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// `evolve` uses the blowup time T0 + offset.
    #[arg(long = "T-offset", global = true, allow_hyphen_values = true)]
    t_offset: Option<f64>,
    /// Size of the gaussian perturbation, or T* - T0 for the family one.
    #[arg(long, global = true, allow_hyphen_values = true)]
    amplitude: Option<f64>,
    /// Seed of all random corpora.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Norm family for rates: full or lower_regularity.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Perturbation: none, gaussian, family or profile.
    #[arg(long, global = true)]
    perturb: Option<String>,
    /// CSV file `r, f, g` for `--perturb profile`.
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    /// key = value file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Sub {
    /// Operator identities, norms, dissipativity, resolvent and projection checks.
    Verify,
    /// Matrix spectrum of the generator against the analytic families.
    Spectrum,
    /// Nonlinear evolution of one perturbation.
    Evolve,
    /// Shooting on the blowup time and decay rates of the tuned run.
    Rates,
    /// Residuals of the explicit resolvent.
    Resolvent,
}

impl Cli {
    fn resolve(self) -> Result<ExperimentConfig, String> {
        let command = match self.command {
            Sub::Verify => Command::Verify,
            Sub::Spectrum => Command::Spectrum,
            Sub::Evolve => Command::Evolve,
            Sub::Rates => Command::Rates,
            Sub::Resolvent => Command::Resolvent,
        };
        let file = match &self.config {
            Some(path) => read_config(path)?,
            None => Overrides::default(),
        };
        let flags = Overrides {
            d: self.d,
            p: self.p,
            epsilon: self.epsilon,
            n: self.n,
            dt_factor: self.dt_factor,
            tau_end: self.tau_end,
            tau_probe: self.tau_probe,
            t0: self.t0,
            delta: self.delta,
            t_offset: self.t_offset,
            amplitude: self.amplitude,
            seed: self.seed,
            out: self.out,
            mode: self.mode,
            perturb: self.perturb,
            profile: self.profile,
        };
        ExperimentConfig::resolve(command, flags.over(file))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli
        .resolve()
        .map_err(Failure::Usage)
        .and_then(|cfg| run_command(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.record());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
