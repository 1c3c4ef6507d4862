use std::path::PathBuf;
use std::process::ExitCode;

use anosov_lab::cli::{run, OutputFormat, RunOptions, ScenarioConfig, Verb};
use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, ValueEnum)]
enum VerbArg {
    Spectrum,
    Growth,
    Entropy,
    Exponents,
    Measure,
    Conjugacy,
    Rigidity,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Numerical experiments on partially hyperbolic Anosov maps of T³.
#[derive(Parser)]
#[command(name = "anosov-lab", version)]
struct Args {
    verb: VerbArg,
    /// Scenario TOML; defaults apply when omitted (then --seed is required).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let verb = match args.verb {
        VerbArg::Spectrum => Verb::Spectrum,
        VerbArg::Growth => Verb::Growth,
        VerbArg::Entropy => Verb::Entropy,
        VerbArg::Exponents => Verb::Exponents,
        VerbArg::Measure => Verb::Measure,
        VerbArg::Conjugacy => Verb::Conjugacy,
        VerbArg::Rigidity => Verb::Rigidity,
    };
    let opts = RunOptions {
        out_dir: args.out,
        format: match args.format {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        },
        seed: args.seed,
        threads: args.threads,
    };
    let result = args
        .config
        .as_deref()
        .map_or_else(|| Ok(ScenarioConfig::default()), ScenarioConfig::load)
        .and_then(|cfg| run(verb, &cfg, &opts));
    match result {
        Ok(m) => {
            eprintln!(
                "{verb}: {} files in {} ({:.2}s)",
                m.outputs.len() + 1,
                opts.out_dir.display(),
                m.wall_clock_seconds
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("anosov-lab {verb}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
