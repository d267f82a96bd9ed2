use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use desync::scenario::parse_config;
use desync::simulate::simulate;
use desync::sweep::{parse_sweep, run_sweep};
use desync::trace::{TraceFormat, TraceWriter};
use desync::verify::{verify, VerifyOptions, VerifyReport};

const NOT_CONVERGED: u8 = 1;
const INVALID_INPUT: u8 = 2;
const INVARIANT_VIOLATION: u8 = 3;
const IO_FAILURE: u8 = 4;

#[derive(Parser)]
#[command(name = "desync", version, about = "Pulse-coupled oscillator desynchronization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its event trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Trace destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Print final P, event count, wall time and convergence.
        #[arg(long)]
        summary: bool,
    },
    /// Run every cell of a parameter grid into a directory.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Check the property suite over seeded runs.
    Verify {
        #[arg(long, default_value_t = 1000)]
        seeds: usize,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_flipped_prc: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Objects,
}

impl From<Format> for TraceFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => TraceFormat::Table,
            Format::Objects => TraceFormat::Objects,
        }
    }
}

struct Failure(u8, String);

impl Failure {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure(IO_FAILURE, format!("{}: {e}", path.display()))
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn cmd_run(config: &Path, out: Option<&Path>, format: TraceFormat, summary: bool) -> Result<u8, Failure> {
    let cfg = parse_config(&read(config)?).map_err(|e| Failure(INVALID_INPUT, e.to_string()))?;
    let started = Instant::now();
    let sim = simulate(&cfg).map_err(|e| Failure(INVARIANT_VIOLATION, e.to_string()))?;
    let elapsed = started.elapsed();

    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(BufWriter::new(fs::File::create(path).map_err(|e| Failure::io(path, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let trace_err = |e| Failure(IO_FAILURE, format!("trace: {e}"));
    let mut w = TraceWriter::new(sink, format, cfg.n).map_err(trace_err)?;
    w.write_all(&sim.records).map_err(trace_err)?;
    w.finish().map_err(trace_err)?;

    if summary {
        let text = format!(
            "final P: {:e}\nevents: {}\nwall time: {:.3} ms\nconverged: {}\n",
            sim.final_p,
            sim.events(),
            elapsed.as_secs_f64() * 1e3,
            if sim.converged { "yes" } else { "no" },
        );
        if out.is_some() {
            print!("{text}");
        } else {
            eprint!("{text}");
        }
    }
    Ok(if sim.converged { 0 } else { NOT_CONVERGED })
}

fn cmd_sweep(config: &Path, out: &Path, format: TraceFormat) -> Result<u8, Failure> {
    let spec = parse_sweep(&read(config)?).map_err(|e| Failure(INVALID_INPUT, e.to_string()))?;
    let rows = run_sweep(&spec, out, format).map_err(|e| Failure::io(out, e))?;
    let converged = rows.iter().filter(|r| r.converged).count();
    println!("{converged} of {} cells converged", rows.len());
    let mut status = 0;
    for r in &rows {
        if let Some(err) = &r.error {
            eprintln!("n={} l={} seed={}: {err}", r.n, r.l, r.seed);
            let code = if err.starts_with("invariant") { INVARIANT_VIOLATION } else { IO_FAILURE };
            status = status.max(code);
        } else if !r.converged {
            status = status.max(NOT_CONVERGED);
        }
    }
    Ok(status)
}

fn print_report(report: &VerifyReport) {
    for p in &report.properties {
        match &p.counterexample {
            None if p.passed => println!("PASS {} ({} checks)", p.name, p.checks),
            None => println!("FAIL {} (no checks ran)", p.name),
            Some(cx) => {
                let at = cx.event_index.map(|i| format!(" event {i}")).unwrap_or_default();
                println!(
                    "FAIL {} ({} of {} checks): seed {} n={} l={}{at}: {}",
                    p.name, p.failures, p.checks, cx.seed, cx.n, cx.l, cx.detail
                );
            }
        }
    }
    let c = report.coverage;
    println!(
        "coverage: case1={} case2={} case3={} silent={} collision={}",
        c.case1, c.case2, c.case3, c.silent, c.collision
    );
}

fn cmd_verify(seeds: usize, out: Option<&Path>, flip: bool) -> Result<u8, Failure> {
    if seeds == 0 {
        return Err(Failure(INVALID_INPUT, "--seeds must be at least 1".into()));
    }
    let report = verify(&VerifyOptions {
        runs: seeds,
        flip_prc: flip,
        ..VerifyOptions::default()
    });
    print_report(&report);
    if let Some(path) = out {
        let json = serde_json::to_vec_pretty(&report).expect("report serializes");
        fs::write(path, json).map_err(|e| Failure::io(path, e))?;
    }
    Ok(if report.passed { 0 } else { INVARIANT_VIOLATION })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out, format, summary } => {
            cmd_run(config, out.as_deref(), (*format).into(), *summary)
        }
        Command::Sweep { config, out, format } => cmd_sweep(config, out, (*format).into()),
        Command::Verify { seeds, out, inject_flipped_prc } => {
            cmd_verify(*seeds, out.as_deref(), *inject_flipped_prc)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
