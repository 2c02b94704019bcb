use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ledgerlens::eventlog::{
    build_event_log, derive_case_field, read_eventlog_csv, write_eventlog_csv, write_xes, CaseSource,
};
use ledgerlens::ingest::{ingest_stream, to_raw_dump, write_raw_dump, RAW_DUMP_VERSION};
use ledgerlens::metrics::compute_metrics;
use ledgerlens::miner::{alpha_mine, alpha_to_dot, detect_anomalous_paths_in, dfg_to_dot, mine_dfg};
use ledgerlens::model::canonical::CANONICAL_CSV_VERSION;
use ledgerlens::recommend::{analyze_log, render_report, REPORT_SCHEMA_VERSION};
use ledgerlens::sim::{closed_loop, render_loop_table, run, SimConfig};
use ledgerlens::{read_canonical_csv, write_canonical_csv, BlockchainLog, Thresholds};

const THRESHOLDS_ENV: &str = "LEDGERLENS_THRESHOLDS";

#[derive(Parser)]
#[command(name = "ledgerlens", about = "Analyze permissioned-ledger transaction logs and recommend optimizations")]
#[command(disable_version_flag = true, subcommand_required = false, arg_required_else_help = true)]
struct Cli {
    /// Print format versions and exit.
    #[arg(long)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulator and write the resulting ledger as canonical CSV.
    Simulate {
        /// key=value file; a `preset` line starts from a built-in scenario.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the ledger as a raw block dump.
        #[arg(long)]
        emit_raw: Option<PathBuf>,
        /// Write the performance summary as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Convert a raw block dump into canonical CSV.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute log metrics.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        /// Interval length in seconds for the rate distributions.
        #[arg(long)]
        ins: Option<f64>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the recommendation rules and write a report.
    Recommend {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        /// Markdown report.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: PathBuf,
    },
    /// Build an event log and export it as XES and CSV.
    Eventlog {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        xes: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// argN or prefix:<p>; derived from the log when absent.
        #[arg(long)]
        case_field: Option<String>,
    },
    /// Mine process models from an event log CSV.
    Mine {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        dfg: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<PathBuf>,
        #[arg(long)]
        anomalies: Option<PathBuf>,
    },
    /// Simulate, recommend, apply each recommendation and simulate again.
    Loop {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Markdown comparison table; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ThresholdArgs {
    /// key=value thresholds file; overrides the LEDGERLENS_THRESHOLDS variable.
    #[arg(long)]
    thresholds: Option<PathBuf>,
}

/// Bad input maps to exit 2, everything else to exit 3.
enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

type Outcome = Result<(), Failure>;

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn internal<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Internal(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.version {
        println!("ledgerlens {}", env!("CARGO_PKG_VERSION"));
        println!("canonical-csv {CANONICAL_CSV_VERSION}");
        println!("raw-dump {RAW_DUMP_VERSION}");
        println!("report-schema {REPORT_SCHEMA_VERSION}");
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: no subcommand given");
        return ExitCode::from(2);
    };
    match dispatch(command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Simulate {
            config,
            seed,
            out,
            emit_raw,
            summary,
        } => {
            let cfg = load_config(&config, seed)?;
            let (log, perf) = run(&cfg).map_err(input)?;
            write_atomic(&out, |w| Ok(write_canonical_csv(&log, w)?))?;
            if let Some(p) = emit_raw {
                let dump = to_raw_dump(&log);
                write_atomic(&p, |w| Ok(write_raw_dump(&dump, w)?))?;
            }
            if let Some(p) = summary {
                write_json(&p, &perf)?;
            }
            Ok(())
        }
        Command::Ingest { input: src, out } => {
            let file = open(&src)?;
            let log = ingest_stream(BufReader::new(file))
                .with_context(|| format!("ingesting {}", src.display()))
                .map_err(input)?;
            write_atomic(&out, |w| Ok(write_canonical_csv(&log, w)?))
        }
        Command::Analyze {
            input: src,
            ins,
            thresholds,
            out,
        } => {
            let mut t = resolve_thresholds(&thresholds)?;
            if let Some(ins) = ins {
                t.ins = ins;
                t.validate().map_err(input)?;
            }
            let log = load_log(&src)?;
            write_json(&out, &compute_metrics(&log, &t))
        }
        Command::Recommend {
            input: src,
            thresholds,
            out,
            json,
        } => {
            let t = resolve_thresholds(&thresholds)?;
            let log = load_log(&src)?;
            let (m, analysis) = analyze_log(&log, &t);
            let report = render_report(&analysis, &m, &t);
            write_atomic(&out, |w| Ok(w.write_all(report.markdown.as_bytes())?))?;
            write_atomic(&json, |w| Ok(w.write_all(report.json.as_bytes())?))
        }
        Command::Eventlog {
            input: src,
            xes,
            csv,
            case_field,
        } => {
            if xes.is_none() && csv.is_none() {
                return Err(input(anyhow!("nothing to do: give --xes and/or --csv")));
            }
            let log = load_log(&src)?;
            let source = match case_field {
                Some(s) => s.parse::<CaseSource>().map_err(|e| input(anyhow!("--case-field: {e}")))?,
                None => derive_case_field(&log).map_err(input)?.source,
            };
            let el = build_event_log(&log, &source);
            if let Some(p) = xes {
                write_atomic(&p, |w| Ok(write_xes(&el, w)?))?;
            }
            if let Some(p) = csv {
                write_atomic(&p, |w| Ok(write_eventlog_csv(&el, w)?))?;
            }
            Ok(())
        }
        Command::Mine {
            input: src,
            dfg,
            alpha,
            anomalies,
        } => {
            if dfg.is_none() && alpha.is_none() && anomalies.is_none() {
                return Err(input(anyhow!("nothing to do: give --dfg, --alpha or --anomalies")));
            }
            let el = read_eventlog_csv(open(&src)?)
                .with_context(|| format!("reading {}", src.display()))
                .map_err(input)?;
            if let Some(p) = dfg {
                let g = mine_dfg(&el).map_err(input)?;
                write_atomic(&p, |w| Ok(w.write_all(dfg_to_dot(&g).as_bytes())?))?;
            }
            if let Some(p) = alpha {
                let net = alpha_mine(&el).map_err(input)?;
                write_atomic(&p, |w| Ok(w.write_all(alpha_to_dot(&net).as_bytes())?))?;
            }
            if let Some(p) = anomalies {
                write_json(&p, &detect_anomalous_paths_in(&el))?;
            }
            Ok(())
        }
        Command::Loop {
            config,
            thresholds,
            seed,
            out,
            json,
        } => {
            let cfg = load_config(&config, seed)?;
            let t = resolve_thresholds(&thresholds)?;
            let report = closed_loop(&cfg, &t).map_err(input)?;
            let table = render_loop_table(&report);
            match out {
                Some(p) => write_atomic(&p, |w| Ok(w.write_all(table.as_bytes())?))?,
                None => print!("{table}"),
            }
            if let Some(p) = json {
                write_json(&p, &report)?;
            }
            Ok(())
        }
    }
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(input)
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(input)
}

fn load_log(path: &Path) -> Result<BlockchainLog, Failure> {
    read_canonical_csv(open(path)?)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(input)
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<SimConfig, Failure> {
    let mut cfg = SimConfig::parse(&read_text(path)?)
        .with_context(|| format!("config {}", path.display()))
        .map_err(input)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn resolve_thresholds(args: &ThresholdArgs) -> Result<Thresholds, Failure> {
    let path = match &args.thresholds {
        Some(p) => Some(p.clone()),
        None => std::env::var_os(THRESHOLDS_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
    };
    match path {
        None => Ok(Thresholds::default()),
        Some(p) => Thresholds::parse(&read_text(&p)?)
            .with_context(|| format!("thresholds {}", p.display()))
            .map_err(input),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

/// Writes through a temp file in the target directory, then renames it into place.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> Outcome {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    if !dir.is_dir() {
        return Err(input(anyhow!("output directory {} does not exist", dir.display())));
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))
        .map_err(internal)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        body(&mut w).with_context(|| format!("writing {}", path.display())).map_err(internal)?;
        w.flush().map_err(internal)?;
    }
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))
        .map_err(internal)?;
    Ok(())
}
