//! Scenario files.
//!
//! A scenario is a flat TOML table:
//!
//! ```toml
//! schema_version = 1
//! n = 5
//! l = 0.85
//! omega = 6.283185307179586
//! seed = 42
//! initial_phases = "uniform_random"   # or "evenly_spaced", "all_equal", or a list of N radians
//! # initial_value = 3.141592653589793  # required with "all_equal"
//! # max_events = 1000                  # default 200·n
//! # p_threshold = 1e-6                 # default 1e-6
//! ```
//!
//! Every rejection names the offending field.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use desync_core::{InitialPhases, NetworkState, PrcConfig, StopCondition, CONVERGENCE_THRESHOLD};
use thiserror::Error;
use toml::{Table, Value};

pub const SCHEMA_VERSION: i64 = 1;

/// A rejected document. `field` is the dotted/indexed path of the culprit,
/// or `<document>` when the text is not valid TOML.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n: usize,
    pub l: f64,
    pub omega: f64,
    pub initial: InitialPhases,
    pub seed: u64,
    pub stop: StopCondition,
}

impl ScenarioConfig {
    pub fn prc(&self) -> PrcConfig {
        PrcConfig::new(self.n, self.l).expect("validated at parse time")
    }

    pub fn build_state(&self) -> NetworkState {
        NetworkState::from_initial(self.prc(), self.omega, &self.initial, self.seed)
            .expect("validated at parse time")
    }

    /// Serializes back into the documented schema.
    pub fn to_toml(&self) -> String {
        let mut t = Table::new();
        t.insert("schema_version".into(), Value::Integer(SCHEMA_VERSION));
        t.insert("n".into(), Value::Integer(self.n as i64));
        t.insert("l".into(), Value::Float(self.l));
        t.insert("omega".into(), Value::Float(self.omega));
        t.insert("seed".into(), Value::Integer(self.seed as i64));
        let initial = match &self.initial {
            InitialPhases::Explicit(v) => Value::Array(v.iter().map(|&x| Value::Float(x)).collect()),
            InitialPhases::UniformRandom => Value::String("uniform_random".into()),
            InitialPhases::EvenlySpaced => Value::String("evenly_spaced".into()),
            InitialPhases::AllEqual(x) => {
                t.insert("initial_value".into(), Value::Float(*x));
                Value::String("all_equal".into())
            }
        };
        t.insert("initial_phases".into(), initial);
        t.insert("max_events".into(), Value::Integer(self.stop.max_events as i64));
        if let Some(eps) = self.stop.p_threshold {
            t.insert("p_threshold".into(), Value::Float(eps));
        }
        toml::to_string(&t).expect("plain table serializes")
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut f = Fields::parse(text)?;
    f.schema_version()?;
    let n = f.size("n")?;
    let l = f.coupling("l")?;
    let omega = f.omega(false)?;
    let seed = f.seed()?;
    let initial = f.initial_phases(Some(n))?;
    let stop = f.stop(n)?;
    f.finish()?;
    Ok(ScenarioConfig {
        n,
        l,
        omega,
        initial,
        seed,
        stop,
    })
}

/// Typed access to a TOML table that remembers which keys were read.
pub(crate) struct Fields {
    table: Table,
    seen: BTreeSet<String>,
}

impl Fields {
    pub(crate) fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::new("<document>", e.message()))?;
        Ok(Fields {
            table,
            seen: BTreeSet::new(),
        })
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.seen.insert(key.to_string());
        self.table.get(key).cloned()
    }

    fn required(&mut self, key: &str) -> Result<Value, ConfigError> {
        self.take(key)
            .ok_or_else(|| ConfigError::new(key, "missing required field"))
    }

    pub(crate) fn finish(self) -> Result<(), ConfigError> {
        match self.table.keys().find(|k| !self.seen.contains(*k)) {
            Some(k) => Err(ConfigError::new(k.clone(), "unknown field")),
            None => Ok(()),
        }
    }

    pub(crate) fn schema_version(&mut self) -> Result<(), ConfigError> {
        let v = integer("schema_version", self.required("schema_version")?)?;
        if v != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
            ));
        }
        Ok(())
    }

    pub(crate) fn size(&mut self, key: &str) -> Result<usize, ConfigError> {
        let v = self.required(key)?;
        check_size(key, integer(key, v)?)
    }

    pub(crate) fn coupling(&mut self, key: &str) -> Result<f64, ConfigError> {
        let v = self.required(key)?;
        check_coupling(key, real(key, v)?)
    }

    pub(crate) fn omega(&mut self, optional: bool) -> Result<f64, ConfigError> {
        let omega = match self.take("omega") {
            Some(v) => real("omega", v)?,
            None if optional => TAU,
            None => return Err(ConfigError::new("omega", "missing required field")),
        };
        if !(omega.is_finite() && omega > 0.0) {
            return Err(ConfigError::new("omega", format!("must be positive, got {omega}")));
        }
        Ok(omega)
    }

    pub(crate) fn seed(&mut self) -> Result<u64, ConfigError> {
        let v = self.required("seed")?;
        check_seed("seed", integer("seed", v)?)
    }

    pub(crate) fn integer_list(&mut self, key: &str) -> Result<Vec<i64>, ConfigError> {
        let items = array(key, self.required(key)?)?;
        if items.is_empty() {
            return Err(ConfigError::new(key, "must not be empty"));
        }
        items
            .into_iter()
            .enumerate()
            .map(|(i, v)| integer(&format!("{key}[{i}]"), v))
            .collect()
    }

    pub(crate) fn real_list(&mut self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let items = array(key, self.required(key)?)?;
        if items.is_empty() {
            return Err(ConfigError::new(key, "must not be empty"));
        }
        items
            .into_iter()
            .enumerate()
            .map(|(i, v)| real(&format!("{key}[{i}]"), v))
            .collect()
    }

    /// `n` is `None` for sweeps, where explicit lists are not allowed.
    pub(crate) fn initial_phases(&mut self, n: Option<usize>) -> Result<InitialPhases, ConfigError> {
        const KEY: &str = "initial_phases";
        let value = match self.take(KEY) {
            Some(v) => v,
            None if n.is_none() => Value::String("uniform_random".into()),
            None => return Err(ConfigError::new(KEY, "missing required field")),
        };
        let initial_value = self.take("initial_value");
        let initial = match value {
            Value::String(name) => match name.as_str() {
                "uniform_random" => InitialPhases::UniformRandom,
                "evenly_spaced" => InitialPhases::EvenlySpaced,
                "all_equal" => {
                    let v = initial_value.clone().ok_or_else(|| {
                        ConfigError::new("initial_value", "required when initial_phases = \"all_equal\"")
                    })?;
                    InitialPhases::AllEqual(phase("initial_value", real("initial_value", v)?)?)
                }
                other => {
                    return Err(ConfigError::new(
                        KEY,
                        format!("unknown generator {other:?}; expected uniform_random, evenly_spaced or all_equal"),
                    ))
                }
            },
            Value::Array(items) => {
                let Some(n) = n else {
                    return Err(ConfigError::new(KEY, "explicit phase lists are not allowed here"));
                };
                if items.len() != n {
                    return Err(ConfigError::new(
                        KEY,
                        format!("expected {n} phases, got {}", items.len()),
                    ));
                }
                let phases = items
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let path = format!("{KEY}[{i}]");
                        phase(&path, real(&path, v)?)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                InitialPhases::Explicit(phases)
            }
            other => {
                return Err(ConfigError::new(
                    KEY,
                    format!("expected a generator name or a list of phases, got {}", other.type_str()),
                ))
            }
        };
        if initial_value.is_some() && !matches!(initial, InitialPhases::AllEqual(_)) {
            return Err(ConfigError::new(
                "initial_value",
                "only meaningful with initial_phases = \"all_equal\"",
            ));
        }
        Ok(initial)
    }

    pub(crate) fn max_events(&mut self) -> Result<Option<usize>, ConfigError> {
        match self.take("max_events") {
            None => Ok(None),
            Some(v) => {
                let m = integer("max_events", v)?;
                usize::try_from(m)
                    .map(Some)
                    .map_err(|_| ConfigError::new("max_events", format!("must be non-negative, got {m}")))
            }
        }
    }

    pub(crate) fn p_threshold(&mut self) -> Result<f64, ConfigError> {
        match self.take("p_threshold") {
            None => Ok(CONVERGENCE_THRESHOLD),
            Some(v) => {
                let eps = real("p_threshold", v)?;
                if !(eps.is_finite() && eps >= 0.0) {
                    return Err(ConfigError::new(
                        "p_threshold",
                        format!("must be finite and non-negative, got {eps}"),
                    ));
                }
                Ok(eps)
            }
        }
    }

    fn stop(&mut self, n: usize) -> Result<StopCondition, ConfigError> {
        let max_events = self.max_events()?.unwrap_or(200 * n);
        let p_threshold = Some(self.p_threshold()?);
        Ok(StopCondition {
            max_events,
            p_threshold,
        })
    }
}

pub(crate) fn check_size(field: &str, n: i64) -> Result<usize, ConfigError> {
    if n < 2 {
        return Err(ConfigError::new(field, format!("need at least 2 oscillators, got {n}")));
    }
    Ok(n as usize)
}

pub(crate) fn check_coupling(field: &str, l: f64) -> Result<f64, ConfigError> {
    if !(l > 0.0 && l < 1.0) {
        return Err(ConfigError::new(
            field,
            format!("coupling strength must lie strictly between 0 and 1, got {l}"),
        ));
    }
    Ok(l)
}

pub(crate) fn check_seed(field: &str, seed: i64) -> Result<u64, ConfigError> {
    u64::try_from(seed).map_err(|_| ConfigError::new(field, format!("must be non-negative, got {seed}")))
}

fn phase(field: &str, x: f64) -> Result<f64, ConfigError> {
    if !(x.is_finite() && (0.0..TAU).contains(&x)) {
        return Err(ConfigError::new(field, format!("phase must lie in [0, 2π), got {x}")));
    }
    Ok(x)
}

fn integer(field: &str, v: Value) -> Result<i64, ConfigError> {
    match v {
        Value::Integer(i) => Ok(i),
        other => Err(ConfigError::new(field, format!("expected an integer, got {}", other.type_str()))),
    }
}

fn real(field: &str, v: Value) -> Result<f64, ConfigError> {
    match v {
        Value::Float(x) if x.is_finite() => Ok(x),
        Value::Float(x) => Err(ConfigError::new(field, format!("must be finite, got {x}"))),
        Value::Integer(i) => Ok(i as f64),
        other => Err(ConfigError::new(field, format!("expected a number, got {}", other.type_str()))),
    }
}

fn array(field: &str, v: Value) -> Result<Vec<Value>, ConfigError> {
    match v {
        Value::Array(items) => Ok(items),
        other => Err(ConfigError::new(field, format!("expected a list, got {}", other.type_str()))),
    }
}
