//! Simulation configuration: defaults, flat key/value files and overrides.
//!
//! Config files are flat TOML tables using the same kebab-case keys as the
//! command-line flags, e.g.
//!
//! ```toml
//! vue-pairs = 20
//! rbs = 15
//! theta = 0.3
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::allocation::{CostWeights, MatchingOptions};
use crate::channel::{PathLossModel, RadioParams};
use crate::error::{Error, Result};
use crate::scenario::{GridConfig, PlacementConfig, TurnProbabilities};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Proposed,
    Baseline,
    Both,
}

impl Scheme {
    pub fn includes_proposed(self) -> bool {
        matches!(self, Scheme::Proposed | Scheme::Both)
    }

    pub fn includes_baseline(self) -> bool {
        matches!(self, Scheme::Baseline | Scheme::Both)
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "proposed" => Ok(Scheme::Proposed),
            "baseline" => Ok(Scheme::Baseline),
            "both" => Ok(Scheme::Both),
            other => Err(format!("expected proposed, baseline or both, got `{other}`")),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Proposed => "proposed",
            Scheme::Baseline => "baseline",
            Scheme::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub vue_pairs: usize,
    pub rbs: usize,
    pub window_slots: usize,
    pub horizon_s: f64,
    pub slot_s: f64,
    pub seed: u64,

    pub grid: GridConfig,
    pub speed_kmh: f64,
    pub min_pair_distance: f64,
    pub max_pair_distance: f64,
    pub turns: TurnProbabilities,

    pub radio: RadioParams,
    pub pathloss: PathLossModel,
    pub packet_bytes: f64,
    pub arrival_min: f64,
    pub arrival_max: f64,

    pub theta: f64,
    pub sigma_d: f64,
    pub epsilon_d: f64,
    pub b_min: usize,

    pub weights: CostWeights,
    pub matching: MatchingOptions,

    pub baseline_zones: usize,
    pub scheme: Scheme,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            vue_pairs: 10,
            rbs: 15,
            window_slots: 10,
            horizon_s: 60.0,
            slot_s: 1.0,
            seed: 1,
            grid: GridConfig::default(),
            speed_kmh: 50.0,
            min_pair_distance: 15.0,
            max_pair_distance: 20.0,
            turns: TurnProbabilities::default(),
            radio: RadioParams::default(),
            pathloss: PathLossModel::default(),
            packet_bytes: 1600.0,
            arrival_min: 5.0,
            arrival_max: 25.0,
            theta: 0.3,
            sigma_d: 100.0,
            epsilon_d: 100.0,
            b_min: 2,
            weights: CostWeights::default(),
            matching: MatchingOptions::default(),
            baseline_zones: 3,
            scheme: Scheme::Both,
        }
    }
}

/// Every key accepted in config files and as an override.
pub const KEYS: &[&str] = &[
    "vue-pairs",
    "rbs",
    "window-slots",
    "horizon",
    "slot-duration",
    "seed",
    "blocks-x",
    "blocks-y",
    "building-breadth",
    "lanes-per-road",
    "lane-width",
    "speed-kmh",
    "min-pair-distance",
    "max-pair-distance",
    "p-straight",
    "p-left",
    "p-right",
    "bandwidth",
    "noise-density-dbm",
    "tx-power-dbm",
    "target-sinr-db",
    "rho-cap",
    "ref-loss-db",
    "corner-loss-db",
    "packet-bytes",
    "arrival-min",
    "arrival-max",
    "theta",
    "sigma-d",
    "epsilon-d",
    "b-min",
    "alpha",
    "beta",
    "gamma-cap",
    "count-max",
    "vacancy-moves",
    "baseline-zones",
    "scheme",
];

fn parse<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.trim()
        .parse::<T>()
        .map_err(|e| Error::config(key, format!("cannot parse `{raw}`: {e}")))
}

impl SimConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        match key {
            "vue-pairs" => self.vue_pairs = parse(key, raw)?,
            "rbs" => self.rbs = parse(key, raw)?,
            "window-slots" => self.window_slots = parse(key, raw)?,
            "horizon" => self.horizon_s = parse(key, raw)?,
            "slot-duration" => self.slot_s = parse(key, raw)?,
            "seed" => self.seed = parse(key, raw)?,
            "blocks-x" => self.grid.blocks_x = parse(key, raw)?,
            "blocks-y" => self.grid.blocks_y = parse(key, raw)?,
            "building-breadth" => self.grid.building_breadth = parse(key, raw)?,
            "lanes-per-road" => self.grid.lanes_per_road = parse(key, raw)?,
            "lane-width" => self.grid.lane_width = parse(key, raw)?,
            "speed-kmh" => self.speed_kmh = parse(key, raw)?,
            "min-pair-distance" => self.min_pair_distance = parse(key, raw)?,
            "max-pair-distance" => self.max_pair_distance = parse(key, raw)?,
            "p-straight" => self.turns.straight = parse(key, raw)?,
            "p-left" => self.turns.left = parse(key, raw)?,
            "p-right" => self.turns.right = parse(key, raw)?,
            "bandwidth" => self.radio.bandwidth_hz = parse(key, raw)?,
            "noise-density-dbm" => self.radio.noise_density_dbm_hz = parse(key, raw)?,
            "tx-power-dbm" => self.radio.tx_power_dbm = parse(key, raw)?,
            "target-sinr-db" => self.radio.target_sinr_db = parse(key, raw)?,
            "rho-cap" => self.radio.rho_cap = parse(key, raw)?,
            "ref-loss-db" => self.pathloss.ref_loss_db = parse(key, raw)?,
            "corner-loss-db" => self.pathloss.corner_loss_db = parse(key, raw)?,
            "packet-bytes" => self.packet_bytes = parse(key, raw)?,
            "arrival-min" => self.arrival_min = parse(key, raw)?,
            "arrival-max" => self.arrival_max = parse(key, raw)?,
            "theta" => self.theta = parse(key, raw)?,
            "sigma-d" => self.sigma_d = parse(key, raw)?,
            "epsilon-d" => self.epsilon_d = parse(key, raw)?,
            "b-min" => self.b_min = parse(key, raw)?,
            "alpha" => self.weights.alpha = parse(key, raw)?,
            "beta" => self.weights.beta = parse(key, raw)?,
            "gamma-cap" => self.weights.gamma_cap = parse(key, raw)?,
            "count-max" => self.matching.count_max = parse(key, raw)?,
            "vacancy-moves" => self.matching.vacancy_moves = parse(key, raw)?,
            "baseline-zones" => self.baseline_zones = parse(key, raw)?,
            "scheme" => self.scheme = parse(key, raw)?,
            other => return Err(Error::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Applies a flat TOML document on top of the current values.
    pub fn merge_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        for (key, value) in &table {
            let raw = match value {
                toml::Value::String(s) => s.clone(),
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                _ => return Err(Error::config(key, "expected a scalar value")),
            };
            self.set(key, &raw)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {v}")))
            }
        };
        if self.vue_pairs == 0 {
            return Err(Error::config("vue-pairs", "need at least one V-UE pair"));
        }
        if self.rbs == 0 {
            return Err(Error::config("rbs", "need at least one RB"));
        }
        if self.window_slots == 0 {
            return Err(Error::config("window-slots", "must be at least 1"));
        }
        positive("slot-duration", self.slot_s)?;
        positive("horizon", self.horizon_s)?;
        if self.horizon_s < self.window_slots as f64 * self.slot_s {
            return Err(Error::config("horizon", "must cover at least one window"));
        }
        positive("building-breadth", self.grid.building_breadth)?;
        positive("lane-width", self.grid.lane_width)?;
        if self.grid.lanes_per_road < 2 {
            return Err(Error::config("lanes-per-road", "need at least 2 lanes per road"));
        }
        if self.grid.blocks_x == 0 || self.grid.blocks_y == 0 {
            return Err(Error::config("blocks-x", "need at least one block per axis"));
        }
        if !(self.speed_kmh >= 0.0) {
            return Err(Error::config("speed-kmh", "must be non-negative"));
        }
        positive("min-pair-distance", self.min_pair_distance)?;
        if self.max_pair_distance < self.min_pair_distance {
            return Err(Error::config("max-pair-distance", "must be at least min-pair-distance"));
        }
        self.turns.validate()?;
        positive("bandwidth", self.radio.bandwidth_hz)?;
        positive("rho-cap", self.radio.rho_cap)?;
        positive("packet-bytes", self.packet_bytes)?;
        positive("arrival-min", self.arrival_min)?;
        if self.arrival_max < self.arrival_min {
            return Err(Error::config("arrival-max", "must be at least arrival-min"));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::config("theta", "θ must lie in [0, 1]"));
        }
        positive("sigma-d", self.sigma_d)?;
        positive("epsilon-d", self.epsilon_d)?;
        if self.b_min < 1 {
            return Err(Error::config("b-min", "must be at least 1"));
        }
        positive("alpha", self.weights.alpha)?;
        if !(self.weights.beta > self.weights.alpha) {
            return Err(Error::config("beta", "β must exceed α"));
        }
        positive("gamma-cap", self.weights.gamma_cap)?;
        if self.matching.count_max == 0 {
            return Err(Error::config("count-max", "must be at least 1"));
        }
        if self.baseline_zones == 0 {
            return Err(Error::config("baseline-zones", "need at least one zone"));
        }
        if self.baseline_zones > self.rbs {
            return Err(Error::config("baseline-zones", "cannot exceed the RB count"));
        }
        Ok(())
    }

    pub fn slots(&self) -> usize {
        (self.horizon_s / self.slot_s).round() as usize
    }

    pub fn speed_ms(&self) -> f64 {
        self.speed_kmh / 3.6
    }

    pub fn packet_bits(&self) -> f64 {
        8.0 * self.packet_bytes
    }

    pub fn placement(&self) -> PlacementConfig {
        PlacementConfig {
            speed: self.speed_ms(),
            min_pair_distance: self.min_pair_distance,
            max_pair_distance: self.max_pair_distance,
        }
    }
}

/// Defaults, then the file at `path` (if any), then `overrides` in order.
pub fn parse_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p)?;
        cfg.merge_toml(&text)?;
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let mut cfg = SimConfig::default();
        cfg.merge_toml("").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.radio.target_sinr_db, 3.0);
        assert_eq!(cfg.radio.tx_power_dbm, 10.0);
        assert_eq!(cfg.theta, 0.3);
        assert_eq!(cfg.weights.alpha, 1.0);
        assert_eq!(cfg.weights.beta, 3.0);
        assert_eq!(cfg.epsilon_d, 100.0);
        assert_eq!(cfg.sigma_d, 100.0);
        assert_eq!(cfg.radio.noise_density_dbm_hz, -174.0);
        assert_eq!(cfg.radio.bandwidth_hz, 180e3);
        assert_eq!(cfg.packet_bits(), 12_800.0);
        assert_eq!(cfg.window_slots, 10);
        assert_eq!(cfg.slots(), 60);
        assert!((cfg.speed_ms() - 13.888_888_888_888_89).abs() < 1e-9);
    }

    #[test]
    fn every_key_is_settable() {
        let cfg = SimConfig::default();
        for key in KEYS {
            let mut c = cfg.clone();
            let value = match *key {
                "scheme" => "baseline",
                "vacancy-moves" => "true",
                _ => "2",
            };
            c.set(key, value).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }

    #[test]
    fn rejections_name_the_key() {
        let mut cfg = SimConfig::default();
        cfg.weights.beta = 1.0;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("beta") && err.contains("β must exceed α"), "{err}");

        let cfg = SimConfig {
            theta: 1.5,
            ..SimConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("theta"));

        let mut cfg = SimConfig::default();
        assert!(matches!(cfg.set("warp-speed", "9"), Err(Error::UnknownKey(_))));
        assert!(cfg.set("rbs", "lots").unwrap_err().to_string().contains("rbs"));
        assert!(cfg.merge_toml("[section]\nx = 1").is_err());
    }
}
