//! `msvis` command line. Exit codes: 0 success, 1 domain error, 2 I/O or
//! usage error.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use msvis_core::{
    FailureKind, FailureSpec, Level, RunState, SimulationConfig, TraceSet, AUTO_TRACE,
};

use crate::format::{metrics_table, timeline, to_json};
use crate::ingest::{parse_manifest, parse_traces, IngestError};
use crate::server::{self, AppState, ServeOptions, DEFAULT_PORT};
use crate::session::{MetricKind, System, DEFAULT_SEED};

pub const EXIT_OK: u8 = 0;
pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "msvis",
    version,
    about = "Explore microservice dependency graphs and traces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LevelArg {
    System,
    Service,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Level {
        match l {
            LevelArg::System => Level::System,
            LevelArg::Service => Level::Service,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FailKindArg {
    Error,
    Timeout,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a manifest
    Validate { manifest: PathBuf },
    /// Emit a laid-out system or service view as JSON
    View {
        manifest: PathBuf,
        #[arg(long, value_enum)]
        level: LevelArg,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        layout_seed: u64,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Node or path filter of a view, as JSON
    Filter {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "service")]
        level: LevelArg,
        #[arg(long, conflicts_with = "path", required_unless_present = "path")]
        node: Option<String>,
        #[arg(long)]
        path: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        layout_seed: u64,
    },
    /// Function-level communication diagram of one service, as JSON
    Function {
        manifest: PathBuf,
        service: String,
        #[arg(long)]
        endpoint: Option<String>,
    },
    /// Rank paths or services
    Metrics {
        manifest: PathBuf,
        #[arg(long)]
        traces: Option<PathBuf>,
        #[arg(long, value_enum)]
        metric: MetricKind,
        #[arg(long)]
        top: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Replay a path with optional failure injection
    Simulate(SimulateArgs),
    /// Serve the HTTP API with the given manifests preloaded
    Serve {
        manifests: Vec<PathBuf>,
        #[arg(long, env = "MSVIS_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long)]
        ui_origin: Option<String>,
        /// Restore from and save to this file
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    manifest: PathBuf,
    /// Path key for mock mode, e.g. "A>B>C"
    #[arg(long, requires = "mock", conflicts_with_all = ["traces", "trace"])]
    path: Option<String>,
    /// Mock payload handed to the first service
    #[arg(long, requires = "path")]
    mock: Option<String>,
    #[arg(long, requires = "trace")]
    traces: Option<PathBuf>,
    /// Trace id, or "auto" for the most frequent path
    #[arg(long, requires = "traces")]
    trace: Option<String>,
    #[arg(long = "fail-node")]
    fail_nodes: Vec<String>,
    /// Edge as "FROM>TO"
    #[arg(long = "fail-edge")]
    fail_edges: Vec<String>,
    #[arg(long, value_enum, default_value = "error")]
    fail_kind: FailKindArg,
    #[arg(long)]
    json: bool,
}

/// Failure with a message and exit code.
struct Exit(u8, String);

impl From<IngestError> for Exit {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(_) => Exit(EXIT_USAGE, e.to_string()),
            _ => Exit(EXIT_DOMAIN, e.to_string()),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Exit> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Exit(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn load_system(path: &Path) -> Result<System, Exit> {
    let manifest = parse_manifest(open(path)?).map_err(|e| {
        let Exit(code, msg) = Exit::from(e);
        Exit(code, format!("{}: {msg}", path.display()))
    })?;
    System::new(manifest).map_err(|e| Exit(EXIT_DOMAIN, e.to_string()))
}

fn load_traces(path: &Path) -> Result<TraceSet, Exit> {
    parse_traces(open(path)?).map_err(|e| {
        let Exit(code, msg) = Exit::from(e);
        Exit(code, format!("{}: {msg}", path.display()))
    })
}

fn write_stdout(text: &str) -> Result<(), Exit> {
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(|e| Exit(EXIT_USAGE, e.to_string()))
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(Exit(code, msg)) => {
            eprintln!("msvis: {msg}");
            code
        }
    }
}

fn dispatch(command: Command) -> Result<u8, Exit> {
    match command {
        Command::Validate { manifest } => {
            let system = load_system(&manifest)?;
            let s = system.summary();
            eprintln!(
                "{}: ok ({} services, {} controllers)",
                manifest.display(),
                s.services,
                s.controllers
            );
            Ok(EXIT_OK)
        }
        Command::View {
            manifest,
            level,
            layout_seed,
            output,
        } => {
            let view = load_system(&manifest)?.view(level.into(), layout_seed);
            let body = to_json(&view);
            match output {
                Some(path) => std::fs::write(&path, body)
                    .map_err(|e| Exit(EXIT_USAGE, format!("{}: {e}", path.display())))?,
                None => write_stdout(&body)?,
            }
            Ok(EXIT_OK)
        }
        Command::Filter {
            manifest,
            level,
            node,
            path,
            layout_seed,
        } => {
            let system = load_system(&manifest)?;
            let view = match (node, path) {
                (Some(node), _) => system.node_filter(level.into(), &node, layout_seed),
                (None, Some(path)) => system.path_filter(level.into(), &path, layout_seed),
                (None, None) => unreachable!("clap requires --node or --path"),
            }
            .map_err(|e| Exit(EXIT_DOMAIN, e.to_string()))?;
            write_stdout(&to_json(&view))?;
            Ok(EXIT_OK)
        }
        Command::Function {
            manifest,
            service,
            endpoint,
        } => {
            let fv = load_system(&manifest)?
                .function_view(&service, endpoint.as_deref())
                .map_err(|e| Exit(EXIT_DOMAIN, e.to_string()))?;
            write_stdout(&to_json(&fv))?;
            Ok(EXIT_OK)
        }
        Command::Metrics {
            manifest,
            traces,
            metric,
            top,
            json,
        } => {
            let mut system = load_system(&manifest)?;
            match (&traces, metric.needs_traces()) {
                (Some(path), _) => system = system.with_traces(&load_traces(path)?),
                (None, true) => {
                    return Err(Exit(
                        EXIT_USAGE,
                        format!("--metric {metric} requires --traces"),
                    ))
                }
                (None, false) => {}
            }
            let report = system.metrics(metric, top);
            write_stdout(&if json {
                to_json(&report)
            } else {
                metrics_table(&report)
            })?;
            Ok(EXIT_OK)
        }
        Command::Simulate(args) => simulate(args),
        Command::Serve {
            manifests,
            port,
            ui_origin,
            snapshot,
        } => {
            let state = Arc::new(AppState::new());
            for path in &manifests {
                let system = load_system(path).map_err(|Exit(_, msg)| Exit(EXIT_DOMAIN, msg))?;
                if let Err(dup) = state.register(system) {
                    return Err(Exit(
                        EXIT_DOMAIN,
                        format!("{}: system `{}` already loaded", path.display(), dup.id),
                    ));
                }
            }
            let runtime =
                tokio::runtime::Runtime::new().map_err(|e| Exit(EXIT_DOMAIN, e.to_string()))?;
            runtime
                .block_on(server::serve(
                    state,
                    ServeOptions {
                        port,
                        ui_origin,
                        snapshot,
                    },
                ))
                .map_err(|msg| Exit(EXIT_DOMAIN, msg))?;
            Ok(EXIT_OK)
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<u8, Exit> {
    let mut system = load_system(&args.manifest)?;
    let mut config = match (&args.path, &args.mock, &args.traces, &args.trace) {
        (Some(path), Some(payload), _, _) => SimulationConfig::mock(path, payload),
        (None, None, Some(file), Some(trace)) => {
            system = system.with_traces(&load_traces(file)?);
            SimulationConfig::trace(trace)
        }
        _ => {
            return Err(Exit(
                EXIT_USAGE,
                format!(
                    "give either --path and --mock, or --traces and --trace (id or `{AUTO_TRACE}`)"
                ),
            ))
        }
    };
    let kind = match args.fail_kind {
        FailKindArg::Error => FailureKind::Error,
        FailKindArg::Timeout => FailureKind::Timeout,
    };
    for node in args.fail_nodes {
        config = config.with_failure(FailureSpec::Node {
            node_id: node,
            kind,
        });
    }
    for edge in args.fail_edges {
        let Some((from, to)) = edge.split_once('>') else {
            return Err(Exit(
                EXIT_USAGE,
                format!("--fail-edge `{edge}` is not FROM>TO"),
            ));
        };
        config = config.with_failure(FailureSpec::Edge {
            from_id: from.trim().into(),
            to_id: to.trim().into(),
            kind,
        });
    }

    let run = system
        .simulate(&config)
        .map_err(|e| Exit(EXIT_DOMAIN, e.to_string()))?;
    write_stdout(&if args.json {
        to_json(&run)
    } else {
        timeline(&run)
    })?;
    Ok(if run.state == RunState::Failed {
        EXIT_DOMAIN
    } else {
        EXIT_OK
    })
}
