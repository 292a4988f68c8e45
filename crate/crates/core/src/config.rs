//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Every lookup records the
//! value finally used (explicit or default) so reports can echo the fully
//! resolved configuration.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use crate::adversary::{AdversaryConfig, AdversaryKind, Placement, Strategy};
use crate::error::{Error, Result};
use crate::quantum::QuantumModel;
use crate::rng::RngSeed;
use crate::simulate::TrialSource;
use crate::spacetime::{SpacetimeConfig, SPEED_OF_LIGHT};
use crate::types::{PredictabilityMode, SettingsProfile};

pub const KEYS: &[&str] = &[
    // quantum model
    "r",
    "alpha1",
    "alpha2",
    "beta1",
    "beta2",
    "etaA",
    "etaB",
    "visibility",
    "pDark",
    // setting generators
    "kappaA",
    "kappaB",
    "epsA",
    "epsB",
    "mode",
    "qf",
    // simulation
    "model",
    "strategy",
    "placement",
    "target_c",
    "seed",
    "stream",
    "trials",
    // analysis
    "increment",
    "guard",
    "s",
    // planning
    "R",
    "J",
    "epsAB",
    "c",
    "f",
    "range",
    // optimization
    "eta",
    "fixed_r",
    "threshold",
    "tol",
    // geometry
    "d",
    "n",
    "tauG",
    "tauM",
    "tauS",
    "tauD",
    "c0",
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: u64,
}

#[derive(Debug, Default)]
pub struct Config {
    source: String,
    entries: BTreeMap<String, Entry>,
    resolved: RefCell<BTreeMap<String, Value>>,
}

impl Config {
    pub fn parse(text: &str, source: impl Into<String>) -> Result<Self> {
        let source = source.into();
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = no as u64 + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: source.clone(),
                line,
                msg,
            };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(err(format!("missing value for `{key}`")));
            }
            let entry = Entry {
                value: value.to_owned(),
                line,
            };
            if let Some(prev) = entries.insert(key.to_owned(), entry) {
                return Err(err(format!("`{key}` already set on line {}", prev.line)));
            }
        }
        Ok(Config {
            source,
            entries,
            resolved: RefCell::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text, path.display().to_string())
    }

    /// Command-line override; replaces any value from the file.
    pub fn set(&mut self, key: &str, value: impl Display) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::validation(format!("unknown key `{key}`")));
        }
        self.entries.insert(
            key.to_owned(),
            Entry {
                value: value.to_string(),
                line: 0,
            },
        );
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Everything looked up so far, with the values actually used.
    pub fn resolved(&self) -> BTreeMap<String, Value> {
        self.resolved.borrow().clone()
    }

    fn record(&self, key: &str, value: Value) {
        self.resolved.borrow_mut().insert(key.to_owned(), value);
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(entry) = self.entries.get(key) else {
            return Ok(None);
        };
        entry.value.parse().map(Some).map_err(|e: T::Err| {
            let msg = format!("bad value `{}` for `{key}`: {e}", entry.value);
            if entry.line == 0 {
                Error::Validation(msg)
            } else {
                Error::Parse {
                    path: self.source.clone(),
                    line: entry.line,
                    msg,
                }
            }
        })
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.get(key)?.unwrap_or(default);
        self.record(key, serde_json::json!(v));
        Ok(v)
    }

    pub fn f64_req(&self, key: &str) -> Result<f64> {
        let v: f64 = self
            .get(key)?
            .ok_or_else(|| Error::validation(format!("`{key}` is required")))?;
        self.record(key, serde_json::json!(v));
        Ok(v)
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.get(key)?;
        self.record(key, serde_json::json!(v));
        Ok(v)
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        let v = self.get(key)?.unwrap_or(default);
        self.record(key, serde_json::json!(v));
        Ok(v)
    }

    pub fn opt_u64(&self, key: &str) -> Result<Option<u64>> {
        let v: Option<u64> = self.get(key)?;
        self.record(key, serde_json::json!(v));
        Ok(v)
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        let v = self.get(key)?.unwrap_or(default);
        self.record(key, serde_json::json!(v));
        Ok(v)
    }

    /// Comma- or whitespace-separated list of reals.
    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let v = match self.entries.get(key) {
            None => default.to_vec(),
            Some(entry) => entry
                .value
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>().map_err(|e| Error::Parse {
                        path: self.source.clone(),
                        line: entry.line,
                        msg: format!("bad value `{s}` in `{key}`: {e}"),
                    })
                })
                .collect::<Result<_>>()?,
        };
        self.record(key, serde_json::json!(v));
        Ok(v)
    }

    /// String-valued key parsed via `FromStr`, echoed as given.
    pub fn parsed_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.get(key)?.unwrap_or(default);
        self.record(key, Value::String(v.to_string()));
        Ok(v)
    }

    pub fn settings_profile(&self) -> Result<SettingsProfile> {
        let profile = SettingsProfile {
            kappa_a: self.f64_or("kappaA", 0.0)?,
            kappa_b: self.f64_or("kappaB", 0.0)?,
            eps_a: self.f64_or("epsA", 0.0)?,
            eps_b: self.f64_or("epsB", 0.0)?,
            mode: self.parsed_or("mode", PredictabilityMode::CommunicationFraction)?,
            qf: self.f64_or("qf", 0.0)?,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Quantum model; defaults are the maximally entangled state at the
    /// angles of the quantum bound with ideal detectors.
    pub fn quantum_model(&self) -> Result<QuantumModel> {
        let d = QuantumModel::ch_optimal();
        let model = QuantumModel {
            r: self.f64_or("r", d.r)?,
            alpha1: self.f64_or("alpha1", d.alpha1)?,
            alpha2: self.f64_or("alpha2", d.alpha2)?,
            beta1: self.f64_or("beta1", d.beta1)?,
            beta2: self.f64_or("beta2", d.beta2)?,
            eta_a: self.f64_or("etaA", d.eta_a)?,
            eta_b: self.f64_or("etaB", d.eta_b)?,
            visibility: self.f64_or("visibility", d.visibility)?,
            p_dark: self.f64_or("pDark", d.p_dark)?,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn rng_seed(&self) -> Result<RngSeed> {
        Ok(RngSeed {
            seed: self.u64_or("seed", 0)?,
            stream: self.u64_or("stream", 0)?,
        })
    }

    /// Trial source selected by `model` (default `quantum`).
    pub fn trial_source(&self) -> Result<TrialSource> {
        let name: String = self.parsed_or("model", "quantum".to_owned())?;
        let profile = self.settings_profile()?;
        if name == "quantum" {
            let source = TrialSource::quantum(self.quantum_model()?, profile);
            source.validate()?;
            return Ok(source);
        }
        let strategy = |default: u8| -> Result<Strategy> { Strategy::new(self.get("strategy")?.unwrap_or(default)) };
        let placement = || self.parsed_or("placement", Placement::Bernoulli);
        let (kind, base) = match name.as_str() {
            "deterministic-lhv" => {
                let s = strategy(Strategy::ALWAYS.id())?;
                self.record("strategy", serde_json::json!(s.id()));
                (AdversaryKind::DeterministicLhv { strategy: s }, None)
            }
            "memory-lhv" => (
                AdversaryKind::MemoryLhv {
                    target_c: self.f64_or("target_c", 2.0)?,
                },
                None,
            ),
            "comm-pure" | "comm-prbox" => {
                let placement = placement()?;
                let base = strategy(Strategy::SILENT.id())?;
                self.record("strategy", serde_json::json!(base.id()));
                let kind = if name == "comm-pure" {
                    AdversaryKind::CommPure { placement }
                } else {
                    AdversaryKind::CommPrbox { placement }
                };
                (kind, Some(base))
            }
            "predictability-skew" => {
                let base = strategy(Strategy::ALWAYS.id())?;
                self.record("strategy", serde_json::json!(base.id()));
                (AdversaryKind::PredictabilitySkew, Some(base))
            }
            other => return Err(Error::validation(format!("unknown model `{other}`"))),
        };
        let mut adversary = AdversaryConfig::new(kind, profile);
        if let Some(base) = base {
            adversary = adversary.with_base(base);
        }
        let source = TrialSource::Adversary(adversary);
        source.validate()?;
        Ok(source)
    }

    pub fn spacetime(&self) -> Result<SpacetimeConfig> {
        let config = SpacetimeConfig {
            d: self.f64_req("d")?,
            n: self.f64_req("n")?,
            tau_g: self.f64_or("tauG", 0.0)?,
            tau_m: self.f64_or("tauM", 0.0)?,
            tau_s: self.f64_or("tauS", 0.0)?,
            tau_d: self.f64_or("tauD", 0.0)?,
            c0: self.f64_or("c0", SPEED_OF_LIGHT)?,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut cfg = Config::parse(
            "# header\nepsA = 0.05  # trailing\n\n  epsB=0.05\nmode = excess-predictability\n",
            "t",
        )
        .unwrap();
        assert_eq!(cfg.f64_or("epsA", 0.0).unwrap(), 0.05);
        cfg.set("epsA", 0.1).unwrap();
        let p = cfg.settings_profile().unwrap();
        assert_eq!((p.eps_a, p.eps_b), (0.1, 0.05));
        assert_eq!(p.mode, PredictabilityMode::ExcessPredictability);
        let resolved = cfg.resolved();
        assert_eq!(resolved["kappaA"], serde_json::json!(0.0));
        assert_eq!(resolved["mode"], serde_json::json!("excess-predictability"));
    }

    #[test]
    fn reports_line_numbers() {
        let err = Config::parse("epsA = 0.1\nbogus = 3\n", "cfg").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = Config::parse("epsA 0.1\n", "cfg").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = Config::parse("epsA = 0.1\nepsA = 0.2\n", "cfg").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let cfg = Config::parse("\n\nepsA = lots\n", "cfg").unwrap();
        assert!(matches!(cfg.f64_or("epsA", 0.0), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn lists_and_required_keys() {
        let cfg = Config::parse("eta = 0.7, 0.8 0.9\n", "t").unwrap();
        assert_eq!(cfg.f64_list("eta", &[]).unwrap(), vec![0.7, 0.8, 0.9]);
        assert!(cfg.spacetime().is_err());
    }

    #[test]
    fn selects_adversaries() {
        let cfg = Config::parse("model = comm-prbox\nepsA = 0.1\nplacement = leading-block\n", "t").unwrap();
        match cfg.trial_source().unwrap() {
            TrialSource::Adversary(a) => assert_eq!(
                a.kind,
                AdversaryKind::CommPrbox {
                    placement: Placement::LeadingBlock
                }
            ),
            other => panic!("{other:?}"),
        }
        let cfg = Config::parse("model = nonsense\n", "t").unwrap();
        assert!(cfg.trial_source().is_err());
        let cfg = Config::parse("model = deterministic-lhv\nstrategy = 16\n", "t").unwrap();
        assert!(cfg.trial_source().is_err());
    }
}
