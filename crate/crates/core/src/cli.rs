// SPDX-License-Identifier: Apache-2.0

//! The `tyvcd` command line.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::fixtures::{fixture_by_name, flatten_design, Strategy};
use crate::link::PathError;
use crate::session::{QueryError, Session, SessionConfig, SessionError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_WARNINGS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_PATH_NOT_FOUND: i32 = 3;
pub const EXIT_TIME_BEYOND_END: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "tyvcd", version, about = "Browse VCD traces with source-level types")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct SessionArgs {
    /// VCD trace to load
    #[arg(long)]
    pub vcd: PathBuf,
    /// Debug information file; repeat to merge per-module files
    #[arg(long = "debug")]
    pub debug: Vec<PathBuf>,
    /// Override the top module named in the debug information
    #[arg(long)]
    pub top: Option<String>,
    /// Show the raw trace hierarchy when no usable debug information is given
    #[arg(long)]
    pub allow_fallback: bool,
}

impl SessionArgs {
    pub fn config(&self, port: Option<u16>) -> SessionConfig {
        SessionConfig {
            vcd_path: self.vcd.clone(),
            debug_paths: self.debug.clone(),
            top_override: self.top.clone(),
            fallback_allowed: self.allow_fallback,
            serve_port: port,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the typed hierarchy
    Tree(SessionArgs),
    /// Print the typed value of one variable at one time
    Value {
        #[command(flatten)]
        session: SessionArgs,
        /// Hierarchical path, e.g. TopCircuit.mod1.inBundle.v[3]
        path: String,
        /// Time in trace ticks
        time: u64,
    },
    /// Write every typed value change as tab-separated records
    Export {
        #[command(flatten)]
        session: SessionArgs,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate the inputs and report diagnostics
    Check(SessionArgs),
    /// Serve the read-only JSON API and the viewer bundle
    Serve {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory holding the viewer bundle
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Generate a matched debug/trace/expected-values fixture
    Fixture {
        #[arg(long, value_parser = ["listing1", "enumcpu"])]
        name: String,
        #[arg(long, default_value = "leaf")]
        strategy: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn report_load_error(e: &SessionError, err: &mut dyn Write) -> i32 {
    let mut msg = e.to_string();
    let mut src = std::error::Error::source(e);
    while let Some(s) = src {
        msg.push_str(&format!(": {s}"));
        src = s.source();
    }
    let _ = writeln!(err, "error: {msg}");
    match e {
        SessionError::Io { .. } => EXIT_IO,
        _ => EXIT_ERROR,
    }
}

/// Loads a session for a query command; diagnostics go to stderr and errors abort with exit 2.
fn load_strict(args: &SessionArgs, err: &mut dyn Write) -> Result<Session, i32> {
    let session = Session::load(&args.config(None)).map_err(|e| report_load_error(&e, err))?;
    for d in &session.diagnostics {
        let _ = writeln!(err, "{d}");
    }
    if session.has_errors() {
        return Err(EXIT_ERROR);
    }
    Ok(session)
}

fn query_code(e: &QueryError) -> i32 {
    match e {
        QueryError::Path(PathError::PathNotFound(_))
        | QueryError::Path(PathError::IndexOutOfRange { .. })
        | QueryError::Path(PathError::NotAVariable(_))
        | QueryError::Path(PathError::Malformed(_)) => EXIT_PATH_NOT_FOUND,
        _ => EXIT_ERROR,
    }
}

/// Runs one parsed command, writing to the given streams, and returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match cli.command {
        Command::Tree(args) => match load_strict(&args, err) {
            Ok(s) => write_or_io(out, err, s.tree_text().as_bytes()),
            Err(code) => code,
        },
        Command::Value { session, path, time } => {
            let s = match load_strict(&session, err) {
                Ok(s) => s,
                Err(code) => return code,
            };
            match s.value(&path, time) {
                Ok(v) => {
                    let code = write_or_io(out, err, format!("{}\n", v.formatted).as_bytes());
                    if code != EXIT_OK {
                        return code;
                    }
                    if v.beyond_end {
                        let _ = writeln!(
                            err,
                            "warning: time {time} is beyond the end of the trace ({}); showing the last known value",
                            s.trace().end_time()
                        );
                        return EXIT_TIME_BEYOND_END;
                    }
                    EXIT_OK
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    query_code(&e)
                }
            }
        }
        Command::Export { session, out: path } => {
            let s = match load_strict(&session, err) {
                Ok(s) => s,
                Err(code) => return code,
            };
            let text = match s.export_tsv() {
                Ok(t) => t,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_ERROR;
                }
            };
            match path {
                Some(p) => match std::fs::write(&p, text) {
                    Ok(()) => EXIT_OK,
                    Err(e) => {
                        let _ = writeln!(err, "error: cannot write `{}`: {e}", p.display());
                        EXIT_IO
                    }
                },
                None => write_or_io(out, err, text.as_bytes()),
            }
        }
        Command::Check(args) => match Session::load(&args.config(None)) {
            Ok(s) => {
                for d in &s.diagnostics {
                    let _ = writeln!(out, "{d}");
                }
                s.check_code()
            }
            Err(e) => report_load_error(&e, err),
        },
        Command::Serve {
            session,
            port,
            static_dir,
        } => {
            let s = match load_strict(&session, err) {
                Ok(s) => s,
                Err(code) => return code,
            };
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(r) => r,
                Err(e) => {
                    let _ = writeln!(err, "error: cannot start runtime: {e}");
                    return EXIT_IO;
                }
            };
            let result = runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
                let _ = writeln!(out, "serving on http://{}", listener.local_addr()?);
                let _ = out.flush();
                crate::server::serve(listener, s, static_dir, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
            });
            match result {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_IO
                }
            }
        }
        Command::Fixture {
            name,
            strategy,
            out_dir,
        } => {
            let fixture = strategy
                .parse::<Strategy>()
                .and_then(|st| fixture_by_name(&name).map(|d| (d, st)))
                .and_then(|(d, st)| flatten_design(&d, st));
            let fixture = match fixture {
                Ok(f) => f,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_ERROR;
                }
            };
            match fixture.write_to(&out_dir) {
                Ok(()) => {
                    let _ = writeln!(out, "wrote {}/{}.{{tywaves.json,vcd,expected.tsv}}", out_dir.display(), name);
                    EXIT_OK
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_IO
                }
            }
        }
    }
}

fn write_or_io(out: &mut dyn Write, err: &mut dyn Write, bytes: &[u8]) -> i32 {
    match out.write_all(bytes).and_then(|_| out.flush()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: cannot write output: {e}");
            EXIT_IO
        }
    }
}
