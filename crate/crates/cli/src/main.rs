//! `spinlab` command-line front end.

/// Writes a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

mod bath_cmd;
mod coherence_cmd;
mod ctx;
mod fit_cmd;
mod relax_cmd;
mod spin_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ctx::{CliError, Ctx};

#[derive(Debug, Parser)]
#[command(name = "spinlab", version, about = "Spin Hamiltonians, relaxation, coherence models and bath Monte Carlo")]
struct Cli {
    /// Project config (TOML).
    #[arg(long, global = true, env = "SPINLAB_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's `output_dir`, then `.`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Output file prefix; defaults to the subcommand name.
    #[arg(long, global = true)]
    prefix: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Energy levels versus field magnitude.
    Levels(spin_cmd::LevelsArgs),
    /// Field-swept EPR (EDFS) or Davies ENDOR spectra.
    #[command(subcommand)]
    Spectrum(spin_cmd::SpectrumCmd),
    /// Spin-lattice relaxation: predict rates or fit T1 data.
    #[command(subcommand)]
    Relax(relax_cmd::RelaxCmd),
    /// Closed-form coherence models.
    #[command(subcommand)]
    Coherence(coherence_cmd::CoherenceCmd),
    /// Telegraph-bath Monte Carlo of a pulse sequence.
    Bathsim(bath_cmd::BathsimArgs),
    /// Fit a registered model (or `stim_echo_global`) to a CSV file.
    Fit(fit_cmd::FitArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Levels(_) => "levels",
            Command::Spectrum(spin_cmd::SpectrumCmd::Edfs(_)) => "edfs",
            Command::Spectrum(spin_cmd::SpectrumCmd::Endor(_)) => "endor",
            Command::Relax(relax_cmd::RelaxCmd::Predict(_)) => "relax_predict",
            Command::Relax(relax_cmd::RelaxCmd::Fit(_)) => "relax_fit",
            Command::Coherence(c) => c.name(),
            Command::Bathsim(_) => "bathsim",
            Command::Fit(_) => "fit",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let argv: Vec<String> = std::env::args().collect();
    let mut ctx = Ctx::new(argv, cli.config.as_deref(), cli.out_dir, cli.prefix, cli.command.name())?;
    match &cli.command {
        Command::Levels(a) => spin_cmd::levels(&mut ctx, a)?,
        Command::Spectrum(c) => spin_cmd::spectrum(&mut ctx, c)?,
        Command::Relax(c) => relax_cmd::run(&mut ctx, c)?,
        Command::Coherence(c) => coherence_cmd::run(&mut ctx, c)?,
        Command::Bathsim(a) => bath_cmd::run(&mut ctx, a)?,
        Command::Fit(a) => fit_cmd::run(&mut ctx, a)?,
    }
    ctx.finish()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
