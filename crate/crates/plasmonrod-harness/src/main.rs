use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use plasmonrod_harness::{run, HarnessError, Mode, Resolution, RunOptions, ScenarioFile};

#[derive(Parser, Debug)]
#[command(name = "plasmonrod", version, about = "Boundary-integral scattering by plasmonic nanorods")]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true, env = "PLASMONROD_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "PLASMONROD_OUT", default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "PLASMONROD_THREADS", default_value_t = 0)]
    threads: usize,
    /// coarse, desk or fine. A `resolution` key in the scenario wins.
    #[arg(long, global = true, env = "PLASMONROD_RESOLUTION", default_value = "desk", value_parser = parse_resolution)]
    resolution: Resolution,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the panel mesh as a triangle list.
    Mesh,
    /// Eigenvalues of the static NP operator with resonance data.
    Spectrum,
    /// Transmission solve; also runs `mode = "asymptotic-compare"` scenarios.
    Solve,
    /// Parameter sweep from the `[sweep]` table.
    Scan,
    /// Blowup scaling study from the `[scaling]` table.
    Scaling,
    /// Straight (1) or curved (2) figure scenario.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=2))]
        which: u8,
    },
}

fn parse_resolution(s: &str) -> Result<Resolution, String> {
    Resolution::parse(s).ok_or_else(|| format!("unknown resolution {s:?}; expected coarse, desk or fine"))
}

fn scenario(cli: &Cli) -> Result<ScenarioFile, HarnessError> {
    let preset = match cli.command {
        Command::Figure { which: 1 } => Some(ScenarioFile::figure1()),
        Command::Figure { .. } => Some(ScenarioFile::figure2()),
        _ => None,
    };
    let mut file = match (&cli.config, preset) {
        (Some(p), _) => ScenarioFile::load(p)?,
        (None, Some(f)) => f,
        (None, None) => ScenarioFile::default(),
    };
    file.mode = match cli.command {
        Command::Mesh => Mode::Mesh,
        Command::Spectrum => Mode::Spectrum,
        Command::Solve if file.mode == Mode::AsymptoticCompare => Mode::AsymptoticCompare,
        Command::Solve => Mode::Solve,
        Command::Scan => Mode::Scan,
        Command::Scaling => Mode::Scaling,
        Command::Figure { which: 1 } => Mode::Figure1,
        Command::Figure { .. } => Mode::Figure2,
    };
    Ok(file)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("plasmonrod: thread pool: {e}");
    }
    let result = scenario(&cli).and_then(|file| {
        run(
            &file,
            &RunOptions {
                out: cli.out.clone(),
                resolution: cli.resolution,
            },
        )
    });
    match result {
        Ok(report) => {
            for a in &report.artifacts {
                println!("{}", cli.out.join(a).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("plasmonrod: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
