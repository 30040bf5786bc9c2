//! Run configuration: TOML profile, dotted overrides, hashing and manifests.
//!
//! Every key of a user file or `--set` override must already exist in the
//! default profile, so typos fail with the offending field path instead of
//! being silently ignored.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::artifacts::sha256_hex;
use crate::device::DeviceParams;
use crate::dynamics::{LzRampConfig, OpenSystem, StarkConfig};
use crate::error::{Error, Result};
use crate::gates::{BellOptions, CalibrationOptions, CzSchedule};
use crate::spectroscopy::{linspace, SweepAxis, DEFAULT_OTHER_QUBIT_NU};
use crate::transmon::TransmonParams;

/// Version tag written into every manifest and JSON report.
pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub device: DeviceParams,
    pub transmons: [TransmonParams; 2],
    /// Master seed for every stochastic step.
    pub seed: u64,
    /// Worker cap; 0 uses every core.
    pub threads: usize,
    /// Output directory.
    pub out: String,
    pub spectroscopy: SpectroscopyConfig,
    pub exchange: ExchangeConfig,
    pub lz: LzExperiment,
    pub stark: StarkExperiment,
    pub cz: CzExperiment,
    pub bell: BellExperiment,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            device: DeviceParams::fitted(),
            transmons: [TransmonParams::default(); 2],
            seed: 7,
            threads: 0,
            out: "out".into(),
            spectroscopy: SpectroscopyConfig::default(),
            exchange: ExchangeConfig::default(),
            lz: LzExperiment::default(),
            stark: StarkExperiment::default(),
            cz: CzExperiment::default(),
            bell: BellExperiment::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    Frequency,
    Flux,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectroscopyConfig {
    /// Swept qubit, 1 or 2.
    pub qubit: usize,
    pub axis: AxisKind,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// Excitation sector to diagonalise.
    pub block: usize,
    /// Frequency of the qubit that is not swept (GHz).
    pub other_nu: f64,
}

impl Default for SpectroscopyConfig {
    fn default() -> Self {
        Self {
            qubit: 1,
            axis: AxisKind::Frequency,
            start: 6.6,
            stop: 7.8,
            points: 241,
            block: 1,
            other_nu: DEFAULT_OTHER_QUBIT_NU,
        }
    }
}

impl SpectroscopyConfig {
    pub fn sweep_axis(&self, transmons: &[TransmonParams; 2]) -> SweepAxis {
        let qubit = self.qubit - 1;
        match self.axis {
            AxisKind::Frequency => SweepAxis::Frequency { qubit },
            AxisKind::Flux => SweepAxis::Flux { qubit, transmon: transmons[qubit] },
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExchangeConfig {
    /// Qubit-1 frequencies at which the exchange rate is extracted (GHz).
    pub centers: Vec<f64>,
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        Self { centers: (0..=20).map(|k| ((6.0 + 0.03 * k as f64) * 1e6).round() / 1e6).collect() }
    }
}

/// Decoherence switch of one experiment; the seed comes from the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Decoherence {
    pub enabled: bool,
    pub realizations: usize,
}

impl Default for Decoherence {
    fn default() -> Self {
        Self { enabled: false, realizations: 400 }
    }
}

impl Decoherence {
    pub fn with_seed(self, seed: u64) -> OpenSystem {
        OpenSystem { enabled: self.enabled, realizations: self.realizations, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LzExperiment {
    pub ramp: LzRampConfig,
    pub decoherence: Decoherence,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StarkExperiment {
    pub protocol: StarkConfig,
    pub decoherence: Decoherence,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CzExperiment {
    /// Starting point of the calibration.
    pub schedule: CzSchedule,
    pub calibration: CalibrationOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BellExperiment {
    pub decoherence: Decoherence,
    pub shots: u64,
    pub bootstrap_resamples: usize,
    pub dt: f64,
}

impl Default for BellExperiment {
    fn default() -> Self {
        let b = BellOptions::default();
        Self {
            decoherence: Decoherence::default(),
            shots: b.shots,
            bootstrap_resamples: b.bootstrap_resamples,
            dt: b.dt,
        }
    }
}

impl BellExperiment {
    pub fn options(&self, seed: u64) -> BellOptions {
        BellOptions {
            open: self.decoherence.with_seed(seed),
            shots: self.shots,
            bootstrap_resamples: self.bootstrap_resamples,
            dt: self.dt,
        }
    }
}

impl RunConfig {
    /// Defaults, then the TOML file if given, then each `key=value` override.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(path) => Some(
                std::fs::read_to_string(path).map_err(|e| config_error(&path.display().to_string(), e.to_string()))?,
            ),
            None => None,
        };
        Self::from_parts(text.as_deref(), overrides)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_parts(Some(text), &[])
    }

    fn from_parts(text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut tree = serde_json::to_value(Self::default())?;
        if let Some(text) = text {
            let file: toml::Table = toml::from_str(text).map_err(|e| config_error("<config>", e.message().into()))?;
            merge(&mut tree, serde_json::to_value(file)?, "")?;
        }
        for o in overrides {
            let (key, value) = parse_override(o)?;
            set_path(&mut tree, &key, value)?;
        }
        let cfg: Self = serde_json::from_value(tree).map_err(|e| config_error("<config>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        for (q, t) in self.transmons.iter().enumerate() {
            t.validate().map_err(|e| config_error(&format!("transmons.{q}"), e.to_string()))?;
        }
        let s = &self.spectroscopy;
        if !(1..=2).contains(&s.qubit) {
            return Err(config_error("spectroscopy.qubit", format!("must be 1 or 2, got {}", s.qubit)));
        }
        if s.points < 2 || !(s.stop > s.start) {
            return Err(config_error("spectroscopy", "need points >= 2 and stop > start".into()));
        }
        if self.exchange.centers.is_empty() {
            return Err(config_error("exchange.centers", "must not be empty".into()));
        }
        let p = &self.device;
        self.stark.protocol.validate(p).map_err(|e| config_error("stark.protocol", e.to_string()))?;
        self.cz.schedule.validate(p).map_err(|e| config_error("cz.schedule", e.to_string()))?;
        for (name, d) in [
            ("lz.decoherence", self.lz.decoherence),
            ("stark.decoherence", self.stark.decoherence),
            ("bell.decoherence", self.bell.decoherence),
        ] {
            if d.enabled && d.realizations == 0 {
                return Err(config_error(&format!("{name}.realizations"), "must be positive".into()));
            }
        }
        Ok(())
    }

    /// Hash of everything that affects results; `out` and `threads` excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = String::new();
        c.threads = 0;
        sha256_hex(&serde_json::to_vec(&c).expect("config serializes"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

fn config_error(path: &str, reason: String) -> Error {
    Error::Config { path: path.into(), reason }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Overlay `incoming` on `base`, rejecting keys and types `base` lacks.
fn merge(base: &mut Value, incoming: Value, path: &str) -> Result<()> {
    match (base, incoming) {
        (Value::Object(b), Value::Object(inc)) => {
            for (k, v) in inc {
                let p = join(path, &k);
                let slot = b.get_mut(&k).ok_or_else(|| config_error(&p, "unknown key".into()))?;
                merge(slot, v, &p)?;
            }
            Ok(())
        }
        (slot @ Value::Array(_), Value::Array(items)) => {
            let template = slot.as_array().and_then(|a| a.first()).cloned();
            let mut merged = Vec::with_capacity(items.len());
            for (i, item) in items.into_iter().enumerate() {
                let p = format!("{path}.{i}");
                match &template {
                    Some(t) => {
                        let mut t = t.clone();
                        merge(&mut t, item, &p)?;
                        merged.push(t);
                    }
                    None => merged.push(item),
                }
            }
            *slot = Value::Array(merged);
            Ok(())
        }
        (slot, v) => {
            if !same_kind(slot, &v) {
                return Err(config_error(path, format!("expected {}, got {v}", kind(slot))));
            }
            *slot = v;
            Ok(())
        }
    }
}

fn same_kind(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(_)) if x.is_f64() => true,
        (Value::Number(x), Value::Number(y)) if x.is_u64() => y.is_u64(),
        (Value::Number(_), Value::Number(y)) => y.is_i64(),
        (Value::Bool(_), Value::Bool(_)) | (Value::String(_), Value::String(_)) => true,
        _ => false,
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Number(n) if n.is_f64() => "a number",
        Value::Number(n) if n.is_u64() => "a non-negative integer",
        Value::Number(_) => "an integer",
        Value::Bool(_) => "a boolean",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "a table",
        Value::Null => "null",
    }
}

/// `a.b.c=value`, with the value read as a TOML literal or, failing that, a
/// bare string.
fn parse_override(s: &str) -> Result<(String, Value)> {
    let (key, raw) = s.split_once('=').ok_or_else(|| config_error(s, "override must look like key=value".into()))?;
    let key = key.trim().to_string();
    if key.is_empty() {
        return Err(config_error(s, "empty key".into()));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => serde_json::to_value(t.remove("v").expect("parsed key"))?,
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((key, value))
}

fn set_path(tree: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = tree;
    let mut walked = String::new();
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        walked = join(&walked, part);
        let next = match node {
            Value::Object(m) => m.get_mut(*part),
            Value::Array(a) => part.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
            _ => None,
        };
        node = next.ok_or_else(|| config_error(&walked, "unknown key".into()))?;
        if depth + 1 == parts.len() {
            return merge(node, value, &walked);
        }
    }
    unreachable!("split yields at least one part")
}

/// Provenance record written next to every set of artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub versions: BTreeMap<String, String>,
    pub wall_time_s: f64,
    /// Per-stage wall times (s).
    pub timings: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
    pub status: String,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig, threads: usize) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert(env!("CARGO_PKG_NAME").to_string(), env!("CARGO_PKG_VERSION").to_string());
        versions.insert("schema".into(), SCHEMA_VERSION.into());
        Self {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            threads,
            versions,
            wall_time_s: 0.0,
            timings: BTreeMap::new(),
            artifacts: Vec::new(),
            status: "ok".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(overrides: &[&str]) -> Result<RunConfig> {
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        RunConfig::load(None, &o)
    }

    #[test]
    fn default_profile_is_valid_and_round_trips() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(RunConfig::from_toml_str(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn override_sets_nested_value() {
        let c = load(&["device.g_f=0.1", "bell.decoherence.enabled=true", "transmons.1.e_c=0.3"]).unwrap();
        assert_eq!(c.device.g_f, 0.1);
        assert!(c.bell.decoherence.enabled);
        assert_eq!(c.transmons[1].e_c, 0.3);
        assert_eq!(c.transmons[0].e_c, 0.25);
    }

    #[test]
    fn integer_literal_accepted_for_float_field() {
        assert_eq!(load(&["device.nu_f=7"]).unwrap().device.nu_f, 7.0);
    }

    #[test]
    fn unknown_override_key_names_path() {
        match load(&["device.g_ff=0.1"]) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "device.g_ff"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_file_key_names_path() {
        match RunConfig::from_toml_str("[cz.schedule]\nload_tme = 30.0\n") {
            Err(Error::Config { path, .. }) => assert_eq!(path, "cz.schedule.load_tme"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_type_names_path() {
        match load(&["device.n_modes=\"three\""]) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "device.n_modes"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_value_names_path() {
        match load(&["device.g_f=-0.1"]) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "device.g_f"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_ignores_output_location_only() {
        let a = RunConfig::default();
        let b = RunConfig { out: "elsewhere".into(), threads: 3, ..a.clone() };
        let c = RunConfig { seed: 8, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
