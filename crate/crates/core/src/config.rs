//! Run configuration: a flat `key = value` file with `#` comments, overridable
//! key by key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::Method;
use crate::io::{parse_dense_hamiltonian, parse_pauli_sum};
use crate::model::{ProbeParameters, SystemHamiltonian, DEFAULT_ALPHA, DEFAULT_COUPLING, DEFAULT_TAU};
use crate::spectroscopy::{make_grid, FrequencyGrid, Measurement, SweepConfig, DEFAULT_RELATIVE_THRESHOLD};
use crate::systems::SurrogateSpec;

pub const KEYS: &[&str] = &[
    "system",
    "system_path",
    "system_qubits",
    "system_seed",
    "window_min",
    "window_max",
    "engineer",
    "alpha",
    "c",
    "tau",
    "method",
    "trotter_slices",
    "shots",
    "seed",
    "omega_min",
    "omega_max",
    "intervals",
    "threshold",
    "out_dir",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SystemSource {
    /// Seeded surrogate whose transitions (`E - alpha`) fall in `window`.
    Builtin {
        qubits: usize,
        seed: u64,
        window: (f64, f64),
        /// `(level, component sum)` overrides.
        overrides: Vec<(usize, f64)>,
    },
    Dense(PathBuf),
    Pauli(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub system: SystemSource,
    pub alpha: f64,
    pub c: f64,
    pub tau: f64,
    pub method: Method,
    /// Zero selects the exact marginal.
    pub shots: u64,
    pub seed: u64,
    pub grid: FrequencyGrid,
    /// Detection threshold relative to the sweep maximum.
    pub threshold: f64,
    pub out_dir: PathBuf,
}

/// Parses `key = value` lines; keys are case-insensitive and `-` equals `_`.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected `key = value`, got {line:?}"),
        })?;
        let key = normalize_key(k);
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("unknown key {key:?}"),
            });
        }
        let value = v.trim().trim_matches('"').to_string();
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("duplicate key {key:?}"),
            });
        }
    }
    Ok(map)
}

pub fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('-', "_")
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse::<T>()
            .map_err(|_| Error::Config(format!("invalid value for {key}: {v:?}"))),
    }
}

fn finite(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key} must be finite")))
    }
}

fn parse_overrides(text: &str) -> Result<Vec<(usize, f64)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (l, s) = item
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("engineer entries are level:sum, got {item:?}")))?;
            let level = l
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad level {l:?}")))?;
            let sum = s
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad component sum {s:?}")))?;
            Ok((level, finite("engineer", sum)?))
        })
        .collect()
}

impl RunConfig {
    /// Builds and validates a configuration. Relative system paths resolve
    /// against `base_dir`.
    pub fn from_map(map: &BTreeMap<String, String>, base_dir: &Path) -> Result<Self> {
        let alpha = finite("alpha", get(map, "alpha", DEFAULT_ALPHA)?)?;
        let window_min = finite("window_min", get(map, "window_min", 15.8)?)?;
        let window_max = finite("window_max", get(map, "window_max", 19.2)?)?;
        let kind = map.get("system").map(|s| s.to_ascii_lowercase()).unwrap_or("builtin".into());
        let path = || -> Result<PathBuf> {
            let p = map
                .get("system_path")
                .ok_or_else(|| Error::Config(format!("system = {kind} needs system_path")))?;
            let p = PathBuf::from(p);
            Ok(if p.is_absolute() { p } else { base_dir.join(p) })
        };
        let system = match kind.as_str() {
            "builtin" | "random" | "surrogate" => {
                if map.contains_key("system_path") {
                    return Err(Error::Config("system_path given for a builtin system".into()));
                }
                if window_max <= window_min {
                    return Err(Error::Config("window_max must exceed window_min".into()));
                }
                let qubits = get(map, "system_qubits", 4usize)?;
                if !(1..=10).contains(&qubits) {
                    return Err(Error::Config("system_qubits must be in 1..=10".into()));
                }
                SystemSource::Builtin {
                    qubits,
                    seed: get(map, "system_seed", 1u64)?,
                    window: (window_min, window_max),
                    overrides: parse_overrides(map.get("engineer").map(String::as_str).unwrap_or(""))?,
                }
            }
            "dense" => SystemSource::Dense(path()?),
            "pauli" => SystemSource::Pauli(path()?),
            other => return Err(Error::Config(format!("unknown system source {other:?}"))),
        };
        let slices = get(map, "trotter_slices", 64usize)?;
        let method = match map.get("method").map(|s| s.to_ascii_lowercase()).as_deref() {
            None | Some("exact") => Method::Exact,
            Some("trotter") => Method::Trotter(slices),
            Some("circuit") => Method::Circuit(slices),
            Some(other) => return Err(Error::Config(format!("unknown method {other:?}"))),
        };
        let omega_min = finite("omega_min", get(map, "omega_min", window_min)?)?;
        let omega_max = finite("omega_max", get(map, "omega_max", window_max)?)?;
        let intervals = get(map, "intervals", 170usize)?;
        let grid = make_grid(omega_min, omega_max, intervals).map_err(|e| Error::Config(e.to_string()))?;
        let threshold = finite("threshold", get(map, "threshold", DEFAULT_RELATIVE_THRESHOLD)?)?;
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Config("threshold must lie in (0, 1)".into()));
        }
        let cfg = Self {
            system,
            alpha,
            c: finite("c", get(map, "c", DEFAULT_COUPLING)?)?,
            tau: finite("tau", get(map, "tau", DEFAULT_TAU)?)?,
            method,
            shots: get(map, "shots", 0u64)?,
            seed: get(map, "seed", 0u64)?,
            grid,
            threshold,
            out_dir: PathBuf::from(map.get("out_dir").map(String::as_str).unwrap_or("out")),
        };
        cfg.sweep_config().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads `path` (if any), applies `overrides` on top, and validates.
    pub fn load(path: Option<&Path>, overrides: &BTreeMap<String, String>) -> Result<Self> {
        let (mut map, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (parse_config_text(&text)?, base)
            }
            None => (BTreeMap::new(), PathBuf::from(".")),
        };
        for (k, v) in overrides {
            map.insert(normalize_key(k), v.clone());
        }
        Self::from_map(&map, &base)
    }

    pub fn params(&self) -> ProbeParameters {
        ProbeParameters {
            omega: 0.0,
            c: self.c,
            alpha: self.alpha,
            tau: self.tau,
        }
    }

    pub fn measurement(&self) -> Measurement {
        if self.shots == 0 {
            Measurement::ExactMarginal
        } else {
            Measurement::Shots {
                count: self.shots,
                seed: self.seed,
            }
        }
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        SweepConfig::new(self.params(), self.method, self.measurement())
    }

    pub fn load_system(&self) -> Result<SystemHamiltonian> {
        let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())));
        match &self.system {
            SystemSource::Builtin {
                qubits,
                seed,
                window,
                overrides,
            } => {
                let mut spec =
                    SurrogateSpec::new(*qubits, *seed).with_window(self.alpha + window.0, self.alpha + window.1);
                spec.overrides = overrides.clone();
                spec.build()
            }
            SystemSource::Dense(p) => parse_dense_hamiltonian(&read(p)?),
            SystemSource::Pauli(p) => parse_pauli_sum(&read(p)?),
        }
    }
}
