//! Runs a scenario and turns its events into trace records.

use desync_core::{run, DesyncObserver, Error};

use crate::scenario::ScenarioConfig;
use crate::trace::TraceRecord;

#[derive(Debug, Clone)]
pub struct Simulation {
    pub records: Vec<TraceRecord>,
    pub final_p: f64,
    pub converged: bool,
    /// Events until the index entered the threshold for good, when the run
    /// converged.
    pub events_to_converge: Option<usize>,
}

impl Simulation {
    pub fn events(&self) -> usize {
        self.records.len()
    }
}

/// Fails only if a metric detects an invariant violation.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Simulation, Error> {
    let state = cfg.build_state();
    let mut observer = DesyncObserver::new(&state);
    let initial_p = observer.order().desync_index(state.phases(), state.prc()).value();
    let out = run(state, &cfg.stop);
    let mut records = Vec::with_capacity(out.events.len());
    for (i, event) in out.events.iter().enumerate() {
        let obs = observer.observe(event)?;
        records.push(TraceRecord::new(i, event, &obs));
    }
    let final_p = records.last().map_or(initial_p, |r| r.p_after);
    let events_to_converge = match (out.converged, cfg.stop.p_threshold) {
        (true, Some(eps)) => {
            let tail = records.iter().rev().take_while(|r| r.p_after <= eps).count();
            Some(records.len() - tail + 1)
        }
        _ => None,
    };
    Ok(Simulation {
        records,
        final_p,
        converged: out.converged,
        events_to_converge,
    })
}
