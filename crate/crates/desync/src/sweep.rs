//! Parameter sweeps over `(n, l, seed)` grids.
//!
//! ```toml
//! schema_version = 1
//! n_values = [3, 4, 5]
//! l_values = [0.1, 0.5, 0.85]
//! seeds = [1, 2, 3]
//! # omega = 6.283185307179586          # default 2π
//! # initial_phases = "uniform_random"   # generator name only
//! # max_events = 1000                  # default 200·n per cell
//! # p_threshold = 1e-6
//! ```
//!
//! Every cell is an independent scenario; its trace is written to
//! `trace_n{n}_l{l}_seed{seed}.{csv,jsonl}` and its outcome to one row of
//! `summary.csv`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use desync_core::{InitialPhases, StopCondition};
use rayon::prelude::*;
use serde::Serialize;

use crate::scenario::{check_coupling, check_seed, check_size, ConfigError, Fields, ScenarioConfig};
use crate::simulate::simulate;
use crate::trace::{TraceFormat, TraceWriter};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub n_values: Vec<usize>,
    pub l_values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub omega: f64,
    pub initial: InitialPhases,
    pub max_events: Option<usize>,
    pub p_threshold: f64,
}

impl SweepSpec {
    pub fn cells(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for &n in &self.n_values {
            for &l in &self.l_values {
                for &seed in &self.seeds {
                    out.push(ScenarioConfig {
                        n,
                        l,
                        omega: self.omega,
                        initial: self.initial.clone(),
                        seed,
                        stop: StopCondition {
                            max_events: self.max_events.unwrap_or(200 * n),
                            p_threshold: Some(self.p_threshold),
                        },
                    });
                }
            }
        }
        out
    }
}

pub fn parse_sweep(text: &str) -> Result<SweepSpec, ConfigError> {
    let mut f = Fields::parse(text)?;
    f.schema_version()?;
    let n_values = f
        .integer_list("n_values")?
        .into_iter()
        .enumerate()
        .map(|(i, n)| check_size(&format!("n_values[{i}]"), n))
        .collect::<Result<_, _>>()?;
    let l_values = f
        .real_list("l_values")?
        .into_iter()
        .enumerate()
        .map(|(i, l)| check_coupling(&format!("l_values[{i}]"), l))
        .collect::<Result<_, _>>()?;
    let seeds = f
        .integer_list("seeds")?
        .into_iter()
        .enumerate()
        .map(|(i, s)| check_seed(&format!("seeds[{i}]"), s))
        .collect::<Result<_, _>>()?;
    let omega = f.omega(true)?;
    let initial = f.initial_phases(None)?;
    let max_events = f.max_events()?;
    let p_threshold = f.p_threshold()?;
    f.finish()?;
    Ok(SweepSpec {
        n_values,
        l_values,
        seeds,
        omega,
        initial,
        max_events,
        p_threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: usize,
    pub l: f64,
    pub seed: u64,
    pub events: usize,
    pub events_to_converge: Option<usize>,
    pub final_p: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

pub fn trace_file_name(cfg: &ScenarioConfig, format: TraceFormat) -> String {
    format!("trace_n{}_l{}_seed{}.{}", cfg.n, cfg.l, cfg.seed, format.extension())
}

/// Runs one scenario and writes its trace to `path`.
pub fn run_to_file(cfg: &ScenarioConfig, path: &Path, format: TraceFormat) -> Result<SummaryRow, String> {
    let sim = simulate(cfg).map_err(|e| format!("invariant violation: {e}"))?;
    let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut w = TraceWriter::new(BufWriter::new(file), format, cfg.n).map_err(|e| e.to_string())?;
    w.write_all(&sim.records).map_err(|e| e.to_string())?;
    w.finish().map_err(|e| e.to_string())?;
    Ok(SummaryRow {
        n: cfg.n,
        l: cfg.l,
        seed: cfg.seed,
        events: sim.events(),
        events_to_converge: sim.events_to_converge,
        final_p: Some(sim.final_p),
        converged: sim.converged,
        error: None,
    })
}

/// Runs every cell (in parallel) and writes traces plus `summary.csv` into
/// `out_dir`. A failing cell is recorded in its summary row; the others
/// still run. Rows come back in grid order.
pub fn run_sweep(spec: &SweepSpec, out_dir: &Path, format: TraceFormat) -> std::io::Result<Vec<SummaryRow>> {
    std::fs::create_dir_all(out_dir)?;
    let rows: Vec<SummaryRow> = spec
        .cells()
        .par_iter()
        .map(|cfg| {
            let path: PathBuf = out_dir.join(trace_file_name(cfg, format));
            run_to_file(cfg, &path, format).unwrap_or_else(|error| SummaryRow {
                n: cfg.n,
                l: cfg.l,
                seed: cfg.seed,
                events: 0,
                events_to_converge: None,
                final_p: None,
                converged: false,
                error: Some(error),
            })
        })
        .collect();
    let mut summary = csv::Writer::from_path(out_dir.join("summary.csv"))?;
    for row in &rows {
        summary.serialize(row).map_err(std::io::Error::other)?;
    }
    summary.flush()?;
    Ok(rows)
}
