//! Scenario configuration: presets, TOML files and `key=value` overrides.
//!
//! Every setting has a dotted key (`model.alpha1`, `initial.c0`, ...). A TOML
//! file uses the first segment as its section:
//!
//! ```toml
//! preset = "fig-correct"
//!
//! [model]
//! alpha1 = 0.5
//!
//! [initial]
//! c0 = 0.05
//! ```
//!
//! Unknown keys are rejected. Keys given on top of a preset are recorded as
//! overrides and end up in the run report.

use std::collections::BTreeMap;
use std::path::PathBuf;

use moneyflow_core::dynamics::Closure;
use moneyflow_core::indicators::{DEFAULT_BASE, DEFAULT_SAMPLE_STEP};
use moneyflow_core::{InitialSpec, IntegratorConfig, ModelParams, RawParams, State, Variant};
use serde::Serialize;
use toml::Value;

use crate::error::{CliError, Result};

pub const KEYS: &[&str] = &[
    "model.alpha1",
    "model.alpha2",
    "model.beta",
    "model.variant",
    "raw.sigma2",
    "raw.h",
    "raw.agents",
    "raw.f",
    "raw.beta",
    "raw.horizon",
    "initial.eta",
    "initial.upsilon",
    "initial.rho",
    "initial.c0",
    "initial.eta_prime0",
    "integrator.rel_tol",
    "integrator.abs_tol",
    "integrator.max_step",
    "integrator.rho_epsilon",
    "integrator.t_end",
    "sampling.dtau",
    "sampling.base",
    "output.dir",
    "output.svg",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sampling {
    pub dtau: f64,
    pub base: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            dtau: DEFAULT_SAMPLE_STEP,
            base: DEFAULT_BASE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub preset: Option<String>,
    pub model: ModelParams,
    /// When present, `alpha1`, `alpha2` and `beta` are derived from these.
    pub raw: Option<RawParams>,
    pub initial: InitialSpec,
    pub integrator: IntegratorConfig,
    pub sampling: Sampling,
    pub output: OutputConfig,
    /// Explicit settings applied after the preset, keyed by dotted name.
    pub overrides: BTreeMap<String, String>,
    #[serde(skip)]
    t_end_explicit: bool,
}

impl Default for ScenarioConfig {
    /// The figure parameters with the corrected equations and `C0 = 0`.
    fn default() -> Self {
        Self {
            preset: None,
            model: ModelParams {
                alpha1: 1.5,
                alpha2: 10.0,
                beta: 1.0,
                variant: Variant::Correct,
            },
            raw: None,
            initial: InitialSpec::with_c0(State::new(0.2, 0.0, 0.5), 0.0),
            integrator: IntegratorConfig::default(),
            sampling: Sampling::default(),
            output: OutputConfig {
                dir: PathBuf::from("out/scenario"),
                svg: true,
            },
            overrides: BTreeMap::new(),
            t_end_explicit: false,
        }
    }
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(config_err(key, format!("expected a number, got {}", other.type_str()))),
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| config_err(key, format!("expected true or false, got {}", v.type_str())))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| config_err(key, format!("expected a string, got {}", v.type_str())))
}

/// Parse the right-hand side of `--set key=value`: a TOML literal if it is
/// one, otherwise a bare string.
pub fn parse_value(text: &str) -> Value {
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(text.to_string())),
        Err(_) => Value::String(text.to_string()),
    }
}

fn display_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Float(x) => x.to_string(),
        other => other.to_string(),
    }
}

/// Resolve a possibly abbreviated key (`alpha1`) to its dotted form.
pub fn canonical_key(key: &str) -> Result<&'static str> {
    if let Some(k) = KEYS.iter().find(|k| **k == key) {
        return Ok(k);
    }
    let matches: Vec<&'static str> = KEYS
        .iter()
        .copied()
        .filter(|k| k.rsplit('.').next() == Some(key))
        .collect();
    match matches.as_slice() {
        [one] => Ok(one),
        [] => Err(CliError::Config(format!("unknown key `{key}`"))),
        many => Err(CliError::Config(format!(
            "ambiguous key `{key}`: one of {}",
            many.join(", ")
        ))),
    }
}

impl ScenarioConfig {
    pub fn from_preset(name: &str) -> Result<Self> {
        crate::preset::preset(name).ok_or_else(|| {
            CliError::Config(format!(
                "unknown preset `{name}` (known: {})",
                crate::preset::names().join(", ")
            ))
        })
    }

    /// Read a TOML document. A top-level `preset` supplies the starting point;
    /// all other keys are applied as overrides.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(format!("invalid TOML: {}", e.message())))?;
        let mut cfg = match table.get("preset") {
            Some(v) => Self::from_preset(as_str("preset", v)?)?,
            None => Self::default(),
        };
        for (section, body) in &table {
            if section == "preset" {
                continue;
            }
            let Value::Table(entries) = body else {
                return Err(CliError::Config(format!(
                    "unknown top-level key `{section}` (settings belong in sections)"
                )));
            };
            for (name, value) in entries {
                cfg.set(&format!("{section}.{name}"), value)?;
            }
        }
        Ok(cfg)
    }

    /// Apply one setting and record it as an override.
    pub fn set(&mut self, key: &str, value: &Value) -> Result<()> {
        let key = canonical_key(key)?;
        match key {
            "model.alpha1" => self.model.alpha1 = as_f64(key, value)?,
            "model.alpha2" => self.model.alpha2 = as_f64(key, value)?,
            "model.beta" => self.model.beta = as_f64(key, value)?,
            "model.variant" => {
                self.model.variant = as_str(key, value)?.parse().map_err(|e| config_err(key, e))?
            }
            "raw.agents" => {
                let n = match value {
                    Value::Integer(i) if *i > 0 => *i as u64,
                    _ => return Err(config_err(key, "expected a positive integer")),
                };
                self.raw_mut().agents = n;
            }
            k if k.starts_with("raw.") => {
                let x = as_f64(key, value)?;
                let raw = self.raw_mut();
                match k {
                    "raw.sigma2" => raw.sigma2 = x,
                    "raw.h" => raw.h = x,
                    "raw.f" => raw.f = x,
                    "raw.beta" => raw.beta = x,
                    _ => raw.horizon = x,
                }
            }
            "initial.eta" => self.initial.state0.eta = as_f64(key, value)?,
            "initial.upsilon" => self.initial.state0.upsilon = as_f64(key, value)?,
            "initial.rho" => self.initial.state0.rho = as_f64(key, value)?,
            "initial.c0" => {
                if self.overrides.contains_key("initial.eta_prime0") {
                    return Err(config_err(key, "conflicts with initial.eta_prime0; give one"));
                }
                self.initial.closure = Closure::C0(as_f64(key, value)?)
            }
            "initial.eta_prime0" => {
                if self.overrides.contains_key("initial.c0") {
                    return Err(config_err(key, "conflicts with initial.c0; give one"));
                }
                self.initial.closure = Closure::EtaPrime0(as_f64(key, value)?)
            }
            "integrator.rel_tol" => self.integrator.rel_tol = as_f64(key, value)?,
            "integrator.abs_tol" => self.integrator.abs_tol = as_f64(key, value)?,
            "integrator.max_step" => self.integrator.max_step = as_f64(key, value)?,
            "integrator.rho_epsilon" => self.integrator.rho_epsilon = as_f64(key, value)?,
            "integrator.t_end" => {
                self.integrator.t_end = as_f64(key, value)?;
                self.t_end_explicit = true;
            }
            "sampling.dtau" => self.sampling.dtau = as_f64(key, value)?,
            "sampling.base" => self.sampling.base = as_f64(key, value)?,
            "output.dir" => self.output.dir = PathBuf::from(as_str(key, value)?),
            "output.svg" => self.output.svg = as_bool(key, value)?,
            _ => unreachable!("key list and match arms out of sync: {key}"),
        }
        self.overrides.insert(key.to_string(), display_value(value));
        Ok(())
    }

    /// `--set key=value`.
    pub fn set_str(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("`{assignment}` is not of the form key=value")))?;
        self.set(key.trim(), &parse_value(value.trim()))
    }

    fn raw_mut(&mut self) -> &mut RawParams {
        self.raw.get_or_insert(RawParams {
            sigma2: f64::NAN,
            h: f64::NAN,
            agents: 0,
            f: f64::NAN,
            beta: f64::NAN,
            horizon: f64::NAN,
        })
    }

    /// Model parameters after derivation from `raw` (if given) and validation.
    pub fn params(&self) -> Result<ModelParams> {
        let params = match &self.raw {
            Some(raw) => {
                if ["model.alpha1", "model.alpha2", "model.beta"]
                    .iter()
                    .any(|k| self.overrides.contains_key(*k))
                {
                    return Err(CliError::Config(
                        "give either [raw] or model.alpha1/alpha2/beta, not both".into(),
                    ));
                }
                raw.derive(self.model.variant)
            }
            None => self.model.validated(),
        };
        params.map_err(|e| CliError::Config(e.to_string()))
    }

    /// Integrator settings; with `[raw]` and no explicit `t_end`, the span is the
    /// horizon `h T`.
    pub fn integrator(&self) -> Result<IntegratorConfig> {
        let mut cfg = self.integrator;
        if let (Some(raw), false) = (&self.raw, self.t_end_explicit) {
            cfg.t_end = raw.tau_horizon();
        }
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.integrator()?;
        let s = self.initial.state0;
        if ![s.eta, s.upsilon, s.rho].iter().all(|x| x.is_finite()) || !(s.rho > 0.0 && s.rho < 1.0) {
            return Err(CliError::Config(format!(
                "initial: need finite eta, upsilon and 0 < rho < 1, got {s:?}"
            )));
        }
        if !(self.sampling.dtau.is_finite() && self.sampling.dtau > 0.0) {
            return Err(config_err("sampling.dtau", "must be > 0"));
        }
        if !(self.sampling.base.is_finite() && self.sampling.base > 0.0) {
            return Err(config_err("sampling.base", "must be > 0"));
        }
        Ok(())
    }

    /// Name used in reports and default output directories.
    pub fn label(&self) -> &str {
        self.preset.as_deref().unwrap_or("scenario")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_overrides_preset_and_records_it() {
        let cfg = ScenarioConfig::from_toml_str(
            "preset = \"fig-correct\"\n[model]\nalpha1 = 0.5\n[initial]\nc0 = 0.1\n",
        )
        .unwrap();
        assert_eq!(cfg.preset.as_deref(), Some("fig-correct"));
        assert_eq!(cfg.model.alpha1, 0.5);
        assert_eq!(cfg.initial.closure, Closure::C0(0.1));
        assert_eq!(cfg.overrides.len(), 2);
        assert_eq!(cfg.overrides["model.alpha1"], "0.5");
    }

    #[test]
    fn unknown_keys_are_errors() {
        for doc in ["[model]\nalpha3 = 1.0\n", "[modle]\nalpha1 = 1.0\n", "alpha1 = 1.0\n"] {
            let err = ScenarioConfig::from_toml_str(doc).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{doc}: {err}");
        }
    }

    #[test]
    fn field_level_type_errors() {
        let err = ScenarioConfig::from_toml_str("[model]\nalpha2 = \"ten\"\n").unwrap_err();
        assert!(err.to_string().contains("model.alpha2"), "{err}");
    }

    #[test]
    fn set_parses_literals_and_bare_words() {
        let mut cfg = ScenarioConfig::default();
        cfg.set_str("variant=erratum").unwrap();
        cfg.set_str("integrator.t_end=10").unwrap();
        cfg.set_str("output.svg=false").unwrap();
        assert_eq!(cfg.model.variant, Variant::IlinskiErratum);
        assert_eq!(cfg.integrator.t_end, 10.0);
        assert!(!cfg.output.svg);
        assert!(cfg.set_str("beta=2").is_err(), "beta is ambiguous between model and raw");
    }

    #[test]
    fn closure_keys_conflict() {
        let mut cfg = ScenarioConfig::default();
        cfg.set_str("initial.eta_prime0=-0.3").unwrap();
        assert!(cfg.set_str("initial.c0=0").is_err());
    }

    #[test]
    fn raw_section_derives_couplings_and_span() {
        let cfg = ScenarioConfig::from_toml_str(
            "[raw]\nsigma2 = 0.01\nh = 2.0\nagents = 2000\nf = 0.75\nbeta = 1.0\nhorizon = 20.0\n",
        )
        .unwrap();
        let p = cfg.params().unwrap();
        assert_eq!((p.alpha1, p.alpha2), (1.5, 10.0));
        assert_eq!(cfg.integrator().unwrap().t_end, 40.0);

        let partial = ScenarioConfig::from_toml_str("[raw]\nsigma2 = 0.01\n").unwrap();
        assert!(partial.params().is_err());
        let mixed = ScenarioConfig::from_toml_str(
            "[model]\nalpha1 = 1.0\n[raw]\nsigma2 = 0.01\nh = 2.0\nagents = 2000\nf = 0.75\nbeta = 1.0\nhorizon = 20.0\n",
        )
        .unwrap();
        assert!(mixed.params().is_err());
    }
}
