mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use apprefetch::mbm::{DEFAULT_LATENCY_MS, DEFAULT_THINK_MS};
use apprefetch::runtime::PseudoCosts;
use clap::{Parser, Subcommand};

use commands::*;
use io::{CmdResult, Fail};

#[derive(Parser)]
#[command(
    name = "apprefetch",
    version,
    about = "Analyze, instrument and simulate prefetching apps"
)]
struct Cli {
    /// Print a machine-readable JSON summary instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// With --json, also print the text summary on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the URL Map, fetch signature and Trigger Map of an app.
    Analyze {
        app: PathBuf,
        /// Profile this trace to pick the fetch signature.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        net: Option<PathBuf>,
        /// Use this net method as the fetch signature instead of profiling.
        #[arg(long)]
        signature: Option<String>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Rewrite an app against the analysis artifacts.
    Instrument {
        app: PathBuf,
        #[arg(long)]
        urlmap: PathBuf,
        #[arg(long)]
        triggermap: PathBuf,
        #[arg(long, conflicts_with = "signature_file")]
        signature: Option<String>,
        #[arg(long)]
        signature_file: Option<PathBuf>,
        #[arg(long)]
        hints: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute an original or instrumented app over a trace.
    Run {
        #[arg(long)]
        app: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long)]
        seed_urlmap: Option<PathBuf>,
        #[arg(long)]
        hints: Option<PathBuf>,
        /// Maximum prefetches per trigger.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        threshold: Option<u64>,
        /// Latency for every net method without a per-method override.
        #[arg(long)]
        latency_ms: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the ground-truth prefetchable URLs per trigger point.
        #[arg(long)]
        oracle_out: Option<PathBuf>,
    },
    /// Run the 25-case microbenchmark.
    Bench {
        #[arg(long, default_value_t = DEFAULT_LATENCY_MS, value_parser = clap::value_parser!(u64).range(1..))]
        latency_ms: u64,
        #[arg(long, default_value_t = DEFAULT_THINK_MS)]
        think_ms: u64,
        #[arg(long, default_value_t = 0)]
        sd_ms: u64,
        #[arg(long, default_value_t = 0)]
        tp_ms: u64,
        #[arg(long, default_value_t = 0)]
        ffp_ms: u64,
        /// `.tsv` writes the table, anything else JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare baseline and optimized run logs.
    Report {
        #[arg(long, required = true)]
        base: Vec<PathBuf>,
        #[arg(long, required = true)]
        opt: Vec<PathBuf>,
        #[arg(long)]
        oracle: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// analyze, instrument, run both versions and report, writing every artifact.
    Pipeline {
        app: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long)]
        hints: Option<PathBuf>,
        #[arg(long)]
        signature: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn dispatch(cmd: &Command) -> CmdResult<Outcome> {
    match cmd {
        Command::Analyze {
            app,
            trace,
            net,
            signature,
            out_dir,
        } => analyze(AnalyzeArgs {
            app,
            trace: trace.as_deref(),
            net: net.as_deref(),
            signature: signature.as_deref(),
            out_dir,
        }),
        Command::Instrument {
            app,
            urlmap,
            triggermap,
            signature,
            signature_file,
            hints,
            out,
        } => instrument_cmd(InstrumentArgs {
            app,
            urlmap,
            triggermap,
            signature: signature.as_deref(),
            signature_file: signature_file.as_deref(),
            hints: hints.as_deref(),
            out,
        }),
        Command::Run {
            app,
            trace,
            net,
            seed_urlmap,
            hints,
            threshold,
            latency_ms,
            out,
            oracle_out,
        } => run(RunArgs {
            app,
            trace,
            net: net.as_deref(),
            seed_urlmap: seed_urlmap.as_deref(),
            hints: hints.as_deref(),
            threshold: threshold.map(|t| t as usize),
            latency_ms: *latency_ms,
            out,
            oracle_out: oracle_out.as_deref(),
        }),
        Command::Bench {
            latency_ms,
            think_ms,
            sd_ms,
            tp_ms,
            ffp_ms,
            out,
        } => bench(BenchArgs {
            latency_ms: *latency_ms,
            think_ms: *think_ms,
            costs: PseudoCosts {
                send_definition_ms: *sd_ms,
                trigger_prefetch_ms: *tp_ms,
                fetch_from_proxy_ms: *ffp_ms,
            },
            out: out.as_deref(),
        }),
        Command::Report {
            base,
            opt,
            oracle,
            out,
        } => report(ReportArgs {
            base,
            opt,
            oracle,
            out: out.as_deref(),
        }),
        Command::Pipeline {
            app,
            trace,
            net,
            hints,
            signature,
            out_dir,
        } => pipeline(PipelineArgs {
            app,
            trace,
            net: net.as_deref(),
            hints: hints.as_deref(),
            signature: signature.as_deref(),
            out_dir,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli.command) {
        Ok(out) => {
            if cli.json {
                if cli.verbose {
                    eprint!("{}", out.human);
                }
                println!(
                    "{}",
                    serde_json::to_string_pretty(&out.json).expect("summary serializes")
                );
            } else {
                print!("{}", out.human);
            }
            ExitCode::SUCCESS
        }
        Err(Fail { code, message }) => {
            if cli.verbose {
                eprintln!("apprefetch: failed with exit code {code}");
            }
            eprintln!("error: {message}");
            ExitCode::from(code as u8)
        }
    }
}
