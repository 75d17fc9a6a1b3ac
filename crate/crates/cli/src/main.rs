use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mqdd::config::{parse_config, parse_duration, Command, RunConfig};
use mqdd::sequence::{gen_dd, DDScheme, SchemeKind, Timing};
use mqdd::Error;

#[derive(Parser)]
#[command(name = "mqdd", version, about = "Dynamical decoupling of multiple-quantum coherences in dipolar spin clusters")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print progress to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the event list of a decoupling sequence.
    Dump(DumpArgs),
    /// Single-quantum decoupling experiment: signal.csv.
    Sqc(RunArgs),
    /// Spin-counting experiment: spectrum.csv and alpha_sweep.csv.
    Mqc(RunArgs),
    /// Filter-function prediction: filter.csv and summary.csv.
    Filter(RunArgs),
}

#[derive(Args)]
struct DumpArgs {
    /// none, cpmg, cpmgp, udd, uddp, rudd or ruddp.
    #[arg(long)]
    scheme: String,
    /// Number of π pulses per block.
    #[arg(long)]
    n: usize,
    /// CPMG half-gap, e.g. `2us`.
    #[arg(long, conflicts_with = "t", required_unless_present = "t")]
    tau: Option<String>,
    /// Block duration, e.g. `58.1us`.
    #[arg(long)]
    t: Option<String>,
    /// π-pulse width, e.g. `4.3us`.
    #[arg(long = "tau-pi")]
    tau_pi: String,
    #[arg(long, default_value_t = 1)]
    cycles: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(errs) => Failure::Usage(format!("invalid configuration:\n  {}", errs.join("\n  "))),
            Error::InvalidParameter(m) => Failure::Usage(m),
            other => Failure::Domain(other.to_string()),
        }
    }
}

fn dump(args: &DumpArgs) -> Result<String, Failure> {
    let kind: SchemeKind = args.scheme.parse().map_err(|_| {
        Failure::Usage(format!(
            "unknown scheme '{}' (expected none, cpmg, cpmgp, udd, uddp, rudd, ruddp)",
            args.scheme
        ))
    })?;
    let timing = match (&args.tau, &args.t) {
        (Some(tau), None) => Timing::HalfGap(parse_duration(tau)?),
        (None, Some(t)) => Timing::Total(parse_duration(t)?),
        _ => return Err(Failure::Usage("give exactly one of --tau and --t".into())),
    };
    let tau_pi = parse_duration(&args.tau_pi)?;
    let scheme = DDScheme::new(kind, args.n, timing, tau_pi).with_cycles(args.cycles);
    Ok(gen_dd(&scheme)?.to_dump())
}

fn write_outputs(cfg: &RunConfig, dir: &Path, config_path: &Path, force: bool, verbose: u8) -> Result<(), Failure> {
    let targets = match cfg.command {
        Command::Sqc => vec!["signal.csv"],
        Command::Mqc => vec!["spectrum.csv", "alpha_sweep.csv"],
        Command::Filter => vec!["filter.csv", "summary.csv"],
    };
    if !force {
        let clash: Vec<String> = targets
            .iter()
            .chain(["manifest.txt"].iter())
            .map(|f| dir.join(f))
            .filter(|p| p.exists())
            .map(|p| p.display().to_string())
            .collect();
        if !clash.is_empty() {
            return Err(Failure::Usage(format!(
                "refusing to overwrite {} (use --force)",
                clash.join(", ")
            )));
        }
    }
    if verbose > 0 {
        eprintln!("running {} with seed {}", cfg.command, cfg.seed);
    }
    let output = cfg.run()?;
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    let mut manifest = format!(
        "config = {}\nout = {}\n",
        config_path.display(),
        dir.display()
    );
    manifest.push_str(&cfg.manifest());
    for (name, body) in output.files.iter().chain([("manifest.txt".to_string(), manifest)].iter()) {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        if verbose > 0 {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let (command, args) = match &cli.command {
        Cmd::Dump(args) => {
            print!("{}", dump(args)?);
            return Ok(());
        }
        Cmd::Sqc(a) => (Command::Sqc, a),
        Cmd::Mqc(a) => (Command::Mqc, a),
        Cmd::Filter(a) => (Command::Filter, a),
    };
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.config.display())))?;
    let cfg = parse_config(&text, command, args.seed)?;
    write_outputs(&cfg, &args.out, &args.config, args.force, cli.verbose)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
