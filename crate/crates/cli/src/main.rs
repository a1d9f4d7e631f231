use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use commprof::analysis::{self, Metric, Rollup, SrcAveraging};
use commprof::model::ExecMode;
use commprof::runner::{self, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

/// Communication-region profiling over simulated message-passing kernels.
#[derive(Parser)]
#[command(name = "commprof", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configuration of an experiment file and write profiles.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the experiment's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a `.trace.ndjson` event trace per run.
        #[arg(long)]
        trace: bool,
        /// Keep per-rank records in each profile.
        #[arg(long)]
        per_rank: bool,
        /// One thread per rank with wall-clock timing; output is not reproducible.
        #[arg(long)]
        concurrent: bool,
        #[arg(long, default_value_t = runner::DEFAULT_MAX_RANKS)]
        max_ranks: u64,
    },
    /// Derive a metric table from a set of profiles.
    Report {
        /// Directory of `.commprof.json` files or a glob pattern.
        #[arg(long = "in")]
        input: String,
        #[arg(long, value_enum)]
        metric: MetricArg,
        /// Restrict to one region; repeat for several.
        #[arg(long)]
        region: Vec<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        allow_mixed: bool,
        /// Average source ranks over every rank at the level, not only receivers.
        #[arg(long)]
        all_ranks: bool,
        /// Roll nested regions' traffic into rate metrics (needs --per-rank profiles).
        #[arg(long)]
        inclusive: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    BytesPerSec,
    MsgsPerSec,
    TimePerRank,
    BytesPerLevel,
    SrcRanksPerLevel,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::BytesPerSec => Metric::BytesPerSec,
            MetricArg::MsgsPerSec => Metric::MsgsPerSec,
            MetricArg::TimePerRank => Metric::TimePerRank,
            MetricArg::BytesPerLevel => Metric::BytesPerLevel,
            MetricArg::SrcRanksPerLevel => Metric::SrcRanksPerLevel,
        }
    }
}

fn run(
    config: PathBuf,
    out: Option<PathBuf>,
    trace: bool,
    per_rank: bool,
    concurrent: bool,
    max_ranks: u64,
) -> Result<bool> {
    let spec = runner::load_experiment(&config)
        .with_context(|| format!("loading {}", config.display()))?;
    let opts = RunOptions {
        out_dir: out,
        trace,
        per_rank,
        mode: if concurrent {
            ExecMode::Concurrent
        } else {
            ExecMode::Deterministic
        },
        max_ranks,
    };
    let report = runner::run_experiment(&spec, &opts)?;
    println!("{report}");
    Ok(report.all_ok())
}

#[allow(clippy::too_many_arguments)]
fn report(
    input: String,
    metric: Metric,
    regions: Vec<String>,
    csv: Option<PathBuf>,
    svg: Option<PathBuf>,
    allow_mixed: bool,
    all_ranks: bool,
    inclusive: bool,
) -> Result<bool> {
    let loaded = analysis::load_profiles(&input, allow_mixed)?;
    for r in &loaded.rejected {
        eprintln!("{r}");
    }
    let set = &loaded.set;
    let rollup = if inclusive {
        Rollup::Inclusive
    } else {
        Rollup::Exclusive
    };
    let single = || -> Result<Option<&str>> {
        match regions.as_slice() {
            [] => Ok(None),
            [one] => Ok(Some(one.as_str())),
            _ => bail!("{metric} takes at most one --region"),
        }
    };
    let table = match metric {
        Metric::BytesPerSec => analysis::bytes_per_sec(set, &regions, rollup)?,
        Metric::MsgsPerSec => analysis::msgs_per_sec(set, &regions, rollup)?,
        Metric::TimePerRank => analysis::time_per_rank(set, &regions)?,
        Metric::BytesPerLevel => analysis::bytes_per_level(set, single()?)?,
        Metric::SrcRanksPerLevel => {
            let avg = if all_ranks {
                SrcAveraging::AllRanks
            } else {
                SrcAveraging::Receiving
            };
            analysis::src_ranks_per_level(set, single()?, avg)?
        }
    };
    println!("{table}");
    if let Some(p) = csv {
        analysis::emit_csv(&table, &p)?;
    }
    if let Some(p) = svg {
        analysis::emit_svg(&table, &p)?;
    }
    Ok(loaded.rejected.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            trace,
            per_rank,
            concurrent,
            max_ranks,
        } => run(config, out, trace, per_rank, concurrent, max_ranks),
        Command::Report {
            input,
            metric,
            region,
            csv,
            svg,
            allow_mixed,
            all_ranks,
            inclusive,
        } => report(input, metric.into(), region, csv, svg, allow_mixed, all_ranks, inclusive),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
