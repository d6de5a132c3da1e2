//! Simulation configuration and its flat `key = value` text form.
//!
//! One setting per line, `#` starts a comment. Nested settings use dotted
//! keys (`rates.limit_bid = 40`). Keys missing from a file keep the value of
//! the base configuration they are applied over; unknown keys are errors.
//!
//! ```text
//! name = balanced
//! seed = 7
//! horizon = 200000 events
//! warmup = 20000 events
//! rates.limit_bid = 33.2
//! volume_model_limit.kind = power_law
//! volume_model_limit.gamma = 2.8
//! volume_model_limit.v_max = 1000
//! ```

use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::flow::{FlowError, Guards, RateSet};
use crate::sampler::{LevelModel, VolumeModel};

/// A run length, counted either in events or in simulated seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Span {
    Events(u64),
    Seconds(f64),
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Span::Events(n) => write!(f, "{n} events"),
            Span::Seconds(s) => write!(f, "{s} seconds"),
        }
    }
}

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        let (Some(n), Some(unit), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("expected `<n> events` or `<x> seconds`, got `{s}`"));
        };
        match unit {
            "events" => n.parse().map(Span::Events).map_err(|_| format!("bad event count `{n}`")),
            "seconds" => match n.parse::<f64>() {
                Ok(x) if x.is_finite() && x >= 0.0 => Ok(Span::Seconds(x)),
                _ => Err(format!("bad duration `{n}`")),
            },
            other => Err(format!("unknown unit `{other}` (use events or seconds)")),
        }
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Preset name, or a free label for custom configurations.
    pub name: String,
    pub rates: RateSet,
    pub level_model: LevelModel,
    pub volume_model_limit: VolumeModel,
    pub volume_model_market: VolumeModel,
    pub guards: Guards,
    /// Money value of one price step.
    pub tick: u64,
    /// Anchor price (in ticks) used before the book has quotes.
    pub initial_reference: u64,
    pub horizon: Span,
    pub warmup: Span,
    pub seed: u64,
    /// Seconds between profile snapshots.
    pub snapshot_every: f64,
    /// Levels on each side of the mid kept in a profile snapshot.
    pub profile_window: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError::Line { line, message: message.into() }
    }
}

const KEYS: &[&str] = &[
    "name",
    "seed",
    "tick",
    "initial_reference",
    "horizon",
    "warmup",
    "snapshot_every",
    "profile_window",
    "rates.limit_bid",
    "rates.limit_ask",
    "rates.market_bid",
    "rates.market_ask",
    "rates.cancel_bid",
    "rates.cancel_ask",
    "level_model.mu",
    "level_model.head_cut",
    "level_model.max_level",
    "guards.s_min",
    "guards.d_min",
    "volume_model_limit.kind",
    "volume_model_limit.gamma",
    "volume_model_limit.v_max",
    "volume_model_limit.weights",
    "volume_model_limit.exponents",
    "volume_model_market.kind",
    "volume_model_market.gamma",
    "volume_model_market.v_max",
    "volume_model_market.weights",
    "volume_model_market.exponents",
];

/// Every key accepted in a configuration file.
pub fn known_keys() -> &'static [&'static str] {
    KEYS
}

fn num<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}` as a number"))
}

fn triple(v: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got `{v}`"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = num(p)?;
    }
    Ok(out)
}

fn set_volume_field(model: &mut VolumeModel, field: &str, v: &str) -> Result<(), String> {
    match (field, model) {
        ("kind", m) => {
            let v_max = m.v_max();
            *m = match v {
                "power_law" => match m {
                    VolumeModel::PowerLaw { .. } => return Ok(()),
                    VolumeModel::RoundLotMixture { exponents, .. } => {
                        VolumeModel::PowerLaw { gamma: exponents[0], v_max }
                    }
                },
                "round_lot_mixture" => match m {
                    VolumeModel::RoundLotMixture { .. } => return Ok(()),
                    VolumeModel::PowerLaw { gamma, .. } => {
                        VolumeModel::RoundLotMixture { weights: [1.0, 0.0, 0.0], exponents: [*gamma, 2.5, 2.0], v_max }
                    }
                },
                other => return Err(format!("unknown volume model `{other}` (power_law, round_lot_mixture)")),
            };
        }
        ("v_max", VolumeModel::PowerLaw { v_max, .. } | VolumeModel::RoundLotMixture { v_max, .. }) => *v_max = num(v)?,
        ("gamma", VolumeModel::PowerLaw { gamma, .. }) => *gamma = num(v)?,
        ("weights", VolumeModel::RoundLotMixture { weights, .. }) => *weights = triple(v)?,
        ("exponents", VolumeModel::RoundLotMixture { exponents, .. }) => *exponents = triple(v)?,
        (f, VolumeModel::PowerLaw { .. }) => return Err(format!("`{f}` does not apply to kind power_law")),
        (f, VolumeModel::RoundLotMixture { .. }) => {
            return Err(format!("`{f}` does not apply to kind round_lot_mixture"))
        }
    }
    Ok(())
}

impl SimConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "name" => {
                if v.is_empty() || v.contains(char::is_whitespace) {
                    return Err("name must be a single non-empty word".into());
                }
                self.name = v.to_string();
            }
            "seed" => self.seed = num(v)?,
            "tick" => self.tick = num(v)?,
            "initial_reference" => self.initial_reference = num(v)?,
            "horizon" => self.horizon = v.parse()?,
            "warmup" => self.warmup = v.parse()?,
            "snapshot_every" => self.snapshot_every = num(v)?,
            "profile_window" => self.profile_window = num(v)?,
            "rates.limit_bid" => self.rates.limit_bid = num(v)?,
            "rates.limit_ask" => self.rates.limit_ask = num(v)?,
            "rates.market_bid" => self.rates.market_bid = num(v)?,
            "rates.market_ask" => self.rates.market_ask = num(v)?,
            "rates.cancel_bid" => self.rates.cancel_bid = num(v)?,
            "rates.cancel_ask" => self.rates.cancel_ask = num(v)?,
            "level_model.mu" => self.level_model.mu = num(v)?,
            "level_model.head_cut" => self.level_model.head_cut = num(v)?,
            "level_model.max_level" => self.level_model.max_level = num(v)?,
            "guards.s_min" => self.guards.s_min = num(v)?,
            "guards.d_min" => self.guards.d_min = num(v)?,
            _ => {
                if let Some(field) = key.strip_prefix("volume_model_limit.") {
                    if KEYS.contains(&key) {
                        return set_volume_field(&mut self.volume_model_limit, field, v);
                    }
                } else if let Some(field) = key.strip_prefix("volume_model_market.") {
                    if KEYS.contains(&key) {
                        return set_volume_field(&mut self.volume_model_market, field, v);
                    }
                }
                return Err(format!("unknown key `{key}`"));
            }
        }
        Ok(())
    }

    /// Parses a configuration file over `base`, then validates the result.
    pub fn parse_over(base: &SimConfig, text: &str) -> Result<SimConfig, ConfigError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(ConfigError::at(line, format!("expected `key = value`, got `{content}`")));
            };
            let k = k.trim();
            if entries.iter().any(|(_, key, _): &(usize, &str, &str)| *key == k) {
                return Err(ConfigError::at(line, format!("duplicate key `{k}`")));
            }
            entries.push((line, k, v.trim()));
        }
        // A model kind decides which of its fields exist, so apply it first.
        entries.sort_by_key(|(_, k, _)| !k.ends_with(".kind"));

        let mut cfg = base.clone();
        for (line, k, v) in &entries {
            cfg.set(k, v).map_err(|m| ConfigError::at(*line, format!("{k}: {m}")))?;
        }
        cfg.validate().map_err(|e| {
            // Point at the line of the offending key when there is one.
            let msg = e.to_string();
            let key = msg.split(':').next().unwrap_or("");
            let hit =
                entries.iter().find(|(_, k, _)| *k == key || k.strip_prefix(key).is_some_and(|r| r.starts_with('.')));
            match hit {
                Some((line, _, _)) => ConfigError::at(*line, msg),
                None => e,
            }
        })?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides and re-validates.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<SimConfig, ConfigError> {
        let mut cfg = self.clone();
        let mut pairs: Vec<(usize, &str, &str)> = Vec::new();
        for (i, o) in overrides.iter().enumerate() {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| ConfigError::Invalid(format!("override #{}: expected key=value, got `{o}`", i + 1)))?;
            pairs.push((i, k.trim(), v.trim()));
        }
        pairs.sort_by_key(|(_, k, _)| !k.ends_with(".kind"));
        for (i, k, v) in pairs {
            cfg.set(k, v).map_err(|m| ConfigError::Invalid(format!("override #{}: {k}: {m}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every cross-field invariant.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, m: String| Err(ConfigError::Invalid(format!("{key}: {m}")));
        if let Err(e) = self.rates.validate() {
            let key = match &e {
                FlowError::Rate { name, .. } => format!("rates.{name}"),
                _ => "rates".to_string(),
            };
            return bad(&key, e.to_string());
        }
        if let Err(e) = self.level_model.validate() {
            return bad("level_model", e.to_string());
        }
        if let Err(e) = self.volume_model_limit.validate() {
            return bad("volume_model_limit", e.to_string());
        }
        if let Err(e) = self.volume_model_market.validate() {
            return bad("volume_model_market", e.to_string());
        }
        if let Err(e) = self.guards.validate(self.volume_model_market.v_max()) {
            let key = match &e {
                FlowError::Guard { name, .. } => format!("guards.{name}"),
                _ => "guards".into(),
            };
            return bad(&key, e.to_string());
        }
        if self.tick == 0 {
            return bad("tick", "must be positive".into());
        }
        if self.initial_reference == 0 {
            return bad("initial_reference", "must be >= 1".into());
        }
        if !(self.snapshot_every.is_finite() && self.snapshot_every > 0.0) {
            return bad("snapshot_every", "must be a positive number of seconds".into());
        }
        if self.profile_window == 0 {
            return bad("profile_window", "must be >= 1".into());
        }
        match (self.horizon, self.warmup) {
            (Span::Events(0), _) => return bad("horizon", "must be positive".into()),
            (Span::Seconds(h), _) if h <= 0.0 => return bad("horizon", "must be positive".into()),
            (Span::Events(h), Span::Events(w)) if w >= h => {
                return bad("warmup", format!("{w} events is not shorter than the horizon"))
            }
            (Span::Seconds(h), Span::Seconds(w)) if w >= h => {
                return bad("warmup", format!("{w} seconds is not shorter than the horizon"))
            }
            _ => {}
        }
        Ok(())
    }

    /// Renders the configuration in its file form. Parsing the result gives
    /// back an identical configuration.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let r = &self.rates;
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "tick = {}", self.tick);
        let _ = writeln!(s, "initial_reference = {}", self.initial_reference);
        let _ = writeln!(s, "horizon = {}", self.horizon);
        let _ = writeln!(s, "warmup = {}", self.warmup);
        let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "profile_window = {}", self.profile_window);
        let _ = writeln!(s, "rates.limit_bid = {}", r.limit_bid);
        let _ = writeln!(s, "rates.limit_ask = {}", r.limit_ask);
        let _ = writeln!(s, "rates.market_bid = {}", r.market_bid);
        let _ = writeln!(s, "rates.market_ask = {}", r.market_ask);
        let _ = writeln!(s, "rates.cancel_bid = {}", r.cancel_bid);
        let _ = writeln!(s, "rates.cancel_ask = {}", r.cancel_ask);
        let _ = writeln!(s, "level_model.mu = {}", self.level_model.mu);
        let _ = writeln!(s, "level_model.head_cut = {}", self.level_model.head_cut);
        let _ = writeln!(s, "level_model.max_level = {}", self.level_model.max_level);
        let _ = writeln!(s, "guards.s_min = {}", self.guards.s_min);
        let _ = writeln!(s, "guards.d_min = {}", self.guards.d_min);
        for (prefix, model) in
            [("volume_model_limit", &self.volume_model_limit), ("volume_model_market", &self.volume_model_market)]
        {
            match model {
                VolumeModel::PowerLaw { gamma, v_max } => {
                    let _ = writeln!(s, "{prefix}.kind = power_law");
                    let _ = writeln!(s, "{prefix}.gamma = {gamma}");
                    let _ = writeln!(s, "{prefix}.v_max = {v_max}");
                }
                VolumeModel::RoundLotMixture { weights, exponents, v_max } => {
                    let _ = writeln!(s, "{prefix}.kind = round_lot_mixture");
                    let _ = writeln!(s, "{prefix}.weights = {}, {}, {}", weights[0], weights[1], weights[2]);
                    let _ = writeln!(s, "{prefix}.exponents = {}, {}, {}", exponents[0], exponents[1], exponents[2]);
                    let _ = writeln!(s, "{prefix}.v_max = {v_max}");
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn base() -> SimConfig {
        presets::preset("balanced").unwrap()
    }

    #[test]
    fn render_parse_roundtrip() {
        for name in presets::NAMES {
            let cfg = presets::preset(name).unwrap();
            let back = SimConfig::parse_over(&base(), &cfg.render()).unwrap();
            assert_eq!(back, cfg);
        }
        let mut cfg = base();
        cfg.volume_model_limit =
            VolumeModel::RoundLotMixture { weights: [0.5, 0.3, 0.2], exponents: [2.8, 2.5, 2.0], v_max: 1000 };
        let back = SimConfig::parse_over(&presets::preset("no_market").unwrap(), &cfg.render()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_names_line() {
        let err = SimConfig::parse_over(&base(), "seed = 3\n\n# x\nrates.limit_bud = 4\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Line { line: 4, message: "rates.limit_bud: unknown key `rates.limit_bud`".into() }
        );
    }

    #[test]
    fn malformed_and_duplicate_lines() {
        let err = SimConfig::parse_over(&base(), "seed 3").unwrap_err();
        assert!(matches!(err, ConfigError::Line { line: 1, .. }));
        let err = SimConfig::parse_over(&base(), "seed = 3\nseed = 4").unwrap_err();
        assert!(matches!(err, ConfigError::Line { line: 2, .. }));
        let err = SimConfig::parse_over(&base(), "tick = five").unwrap_err();
        assert!(matches!(err, ConfigError::Line { line: 1, .. }));
    }

    #[test]
    fn validation_points_at_key_line() {
        let err = SimConfig::parse_over(&base(), "seed = 1\nguards.s_min = 50\n").unwrap_err();
        assert!(matches!(err, ConfigError::Line { line: 2, .. }), "{err}");
        let err = SimConfig::parse_over(&base(), "rates.cancel_ask = -1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Line { line: 1, .. }), "{err}");
    }

    #[test]
    fn kind_applies_before_fields() {
        let text = "volume_model_limit.weights = 0.2, 0.3, 0.5\nvolume_model_limit.kind = round_lot_mixture\n";
        let cfg = SimConfig::parse_over(&base(), text).unwrap();
        assert!(matches!(cfg.volume_model_limit, VolumeModel::RoundLotMixture { weights: [0.2, 0.3, 0.5], .. }));
        let err = SimConfig::parse_over(&base(), "volume_model_market.weights = 1, 0, 0\n").unwrap_err();
        assert!(err.to_string().contains("does not apply"));
    }

    #[test]
    fn spans() {
        assert_eq!("100 events".parse::<Span>(), Ok(Span::Events(100)));
        assert_eq!("2.5 seconds".parse::<Span>(), Ok(Span::Seconds(2.5)));
        assert!("100".parse::<Span>().is_err());
        assert!("1 hours".parse::<Span>().is_err());
        let err = base().with_overrides(&["warmup=10 events", "horizon=10 events"]).unwrap_err();
        assert!(err.to_string().contains("warmup"));
    }

    #[test]
    fn overrides() {
        let cfg = base().with_overrides(&["seed=42", "rates.market_ask = 3.5"]).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.rates.market_ask, 3.5);
        assert!(base().with_overrides(&["nope=1"]).is_err());
        assert!(base().with_overrides(&["seed"]).is_err());
    }
}
