use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bandlayer::commands;
use bandlayer::config::RunConfig;
use bandlayer::output::{OutputDir, Summary};
use bandlayer::Result;

/// No-trade bands and trading speeds under linear plus small nonlinear costs.
#[derive(Parser)]
#[command(name = "bandlayer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config; default "out").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// No-trade band on the x-grid with the configured method.
    Band(Common),
    /// Inner boundary-layer profile.
    Layer(Common),
    /// Full numerical HJB solve with value, velocity and residual dumps.
    Hjb(Common),
    /// Scaling sweeps and the regime map.
    Sweep(Common),
    /// Property suite; exits 1 if any property fails.
    Check(Common),
    /// Validity inequalities for a portfolio.
    Validate(Common),
}

impl Command {
    fn common(&self) -> &Common {
        let (Command::Band(c) | Command::Layer(c) | Command::Hjb(c) | Command::Sweep(c) | Command::Check(c) | Command::Validate(c)) = self;
        c
    }
}

fn run(cmd: &Command) -> Result<(Summary, bool, PathBuf)> {
    let c = cmd.common();
    let cfg = RunConfig::load(&c.config)?;
    let dir = c.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let mut out = OutputDir::new(&dir);
    let (summary, ok) = match cmd {
        Command::Band(_) => (commands::band(&cfg, &mut out)?, true),
        Command::Layer(_) => (commands::layer(&cfg, &mut out)?, true),
        Command::Hjb(_) => (commands::hjb(&cfg, &mut out)?, true),
        Command::Sweep(_) => (commands::sweep(&cfg, &mut out)?, true),
        Command::Check(_) => commands::check(&cfg, &mut out)?,
        Command::Validate(_) => (commands::validate(&cfg, &mut out)?, true),
    };
    out.write("summary.txt", &summary.render())?;
    Ok((summary, ok, dir))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.command.common().quiet;
    match run(&cli.command) {
        Ok((summary, ok, dir)) => {
            if !quiet || !ok {
                print!("{}", summary.render());
                println!("output in {}", dir.display());
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("bandlayer: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
