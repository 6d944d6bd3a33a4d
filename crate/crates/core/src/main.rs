use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bdris_ce::estimators::Method;
use bdris_ce::harness::{self, OutputFormat, SweepKind, SweepSpec};
use bdris_ce::scenario::{RisConstraint, ScenarioConfig};
use bdris_ce::Error;
use clap::{Args, Parser, Subcommand};

/// Compressive channel estimation benchmarks for beyond-diagonal RIS.
#[derive(Parser, Debug)]
#[command(name = "bdris", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// NMSE versus SNR (dB).
    SweepSnr(Common),
    /// NMSE versus the fraction of Q*K_bar^2 RIS measurements.
    SweepMeas(Common),
    /// NMSE versus paths per channel.
    SweepPaths(Common),
    /// Stage runtimes versus group size with K = 64 fixed.
    Timing(Common),
    /// A single trial on the base configuration.
    Trial(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per sweep point.
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated subset of storm, star, oracle_ls, vectorized_cs.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Skip noise injection.
    #[arg(long)]
    noiseless: bool,
    /// unitary-symmetric or unconstrained.
    #[arg(long)]
    ris_constraint: Option<String>,
    /// Comma-separated sweep values overriding the default grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    /// Elements per RIS group for the base configuration.
    #[arg(long)]
    k_bar: Option<usize>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidConfig(_) | Error::InvalidArgument(_)) => 2,
        Some(Error::ResourceLimit(_)) => 3,
        Some(Error::Io { .. }) => 4,
        _ => 1,
    }
}

fn build_spec(kind: SweepKind, opts: &Common) -> anyhow::Result<SweepSpec> {
    let file = opts.config.as_deref().map(harness::load_config).transpose()?;
    let mut base = file
        .as_ref()
        .map_or_else(ScenarioConfig::default, |f| f.scenario.clone());
    if let Some(k_bar) = opts.k_bar {
        if k_bar == 0 || base.k_ris_elems % k_bar != 0 {
            return Err(Error::InvalidConfig(format!(
                "k_bar {k_bar} does not divide {} RIS elements",
                base.k_ris_elems
            ))
            .into());
        }
        base.k_bar = k_bar;
        base.q_groups = base.k_ris_elems / k_bar;
    }
    if let Some(seed) = opts.seed {
        base.seed = seed;
    }
    if opts.noiseless {
        base.noiseless = true;
    }
    if let Some(c) = &opts.ris_constraint {
        base.ris_constraint = c.parse::<RisConstraint>()?;
    }
    let mut spec = SweepSpec::new(kind, base);
    if kind == SweepKind::TimingKbar {
        spec.methods = vec![Method::Storm, Method::Star];
        spec.n_trials = 20;
    }
    if kind == SweepKind::Single {
        spec.n_trials = 1;
    }
    if let Some(f) = &file {
        if let Some(v) = &f.sweep_values {
            spec.sweep_values = v.clone();
        }
        if let Some(m) = &f.methods {
            spec.methods = m.clone();
        }
        if let Some(t) = f.trials {
            spec.n_trials = t;
        }
    }
    if let Some(v) = &opts.values {
        spec.sweep_values = v.clone();
    }
    if let Some(m) = &opts.methods {
        spec.methods = m
            .iter()
            .map(|s| s.parse::<Method>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(t) = opts.trials {
        spec.n_trials = t;
    }
    spec.validate()?;
    harness::check_resources(&spec)?;
    Ok(spec)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (kind, opts) = match &cli.command {
        Command::SweepSnr(o) => (SweepKind::Snr, o),
        Command::SweepMeas(o) => (SweepKind::MeasFraction, o),
        Command::SweepPaths(o) => (SweepKind::NPaths, o),
        Command::Timing(o) => (SweepKind::TimingKbar, o),
        Command::Trial(o) => (SweepKind::Single, o),
    };
    let format: OutputFormat = opts.format.parse()?;
    let spec = build_spec(kind, opts)?;
    let result = harness::run_sweep(&spec)?;
    match &opts.out {
        Some(path) => harness::emit(&result, format, path)?,
        None => {
            let text = harness::render(&result, format)?;
            std::io::stdout()
                .write_all(text.as_bytes())
                .context("writing to stdout")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
