use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adamw::AdamWConfig;
use crate::error::{Error, Result};
use crate::probes::DEFAULT_HIDDEN;

/// Optimisation and early-stopping settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Sentences per batch. The full-scale regimen uses 2048.
    pub batch_size: usize,
    /// Batches between dev evaluations.
    pub eval_every: usize,
    /// Evaluations without a strict dev improvement before stopping.
    pub patience: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub seed: u64,
    /// Hard cap on optimiser steps.
    pub max_batches: usize,
    /// Key/query width `d2` for attentional and structural probes.
    pub hidden: usize,
    pub mlp_layers: usize,
    pub mlp_hidden: usize,
    /// Longest sentence a positional probe covers; 0 takes the longest
    /// training or dev sentence.
    pub max_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamWConfig::default();
        TrainConfig {
            batch_size: 32,
            eval_every: 100,
            patience: 10,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            weight_decay: adam.weight_decay,
            dropout: 0.2,
            seed: 0,
            max_batches: 200_000,
            hidden: DEFAULT_HIDDEN,
            mlp_layers: 0,
            mlp_hidden: 0,
            max_len: 0,
        }
    }
}

impl TrainConfig {
    /// The full-scale regimen: 2048-sentence batches, dev evaluation every
    /// 100 batches, patience 10.
    pub fn full_scale() -> Self {
        TrainConfig { batch_size: 2048, ..Default::default() }
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("eval_every", self.eval_every),
            ("patience", self.patience),
            ("max_batches", self.max_batches),
            ("hidden", self.hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("lr", self.lr), ("eps", self.eps)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight_decay must be >= 0, got {}", self.weight_decay)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.mlp_layers > 2 || (self.mlp_layers > 0 && self.mlp_hidden == 0) {
            return Err(Error::Config(format!(
                "mlp_layers must be 0..=2 with mlp_hidden > 0, got {} / {}",
                self.mlp_layers, self.mlp_hidden
            )));
        }
        Ok(())
    }

    /// Parses flat `key = value` text. `#` starts a comment; unknown keys are
    /// rejected.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (key, value) in parse_kv(text)? {
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path).map_err(crate::error::at_path(path))?)
    }

    /// Sets one field by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
        }
        match key {
            "batch_size" => self.batch_size = num(key, value)?,
            "eval_every" => self.eval_every = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "beta1" => self.beta1 = num(key, value)?,
            "beta2" => self.beta2 = num(key, value)?,
            "eps" => self.eps = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "max_batches" => self.max_batches = num(key, value)?,
            "hidden" => self.hidden = num(key, value)?,
            "mlp_layers" => self.mlp_layers = num(key, value)?,
            "mlp_hidden" => self.mlp_hidden = num(key, value)?,
            "max_len" => self.max_len = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Flat `key = value` rendering accepted by [`from_kv_str`](Self::from_kv_str).
    pub fn to_kv_string(&self) -> String {
        let value = serde_json::to_value(self).expect("config serialises");
        let mut out = String::new();
        if let serde_json::Value::Object(map) = value {
            for (k, v) in map {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

/// Flat `key = value` lines, later keys overriding earlier ones.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: k + 1,
            msg: format!("expected key = value, got {raw:?}"),
        })?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let cfg = TrainConfig::from_kv_str("# regimen\nbatch_size = 2048\neval_every=100\npatience = 10 # early stopping\n").unwrap();
        assert_eq!(cfg.batch_size, 2048);
        assert_eq!(cfg.eval_every, 100);
        assert_eq!(cfg.patience, 10);
        assert_eq!(cfg.dropout, 0.2);
    }

    #[test]
    fn round_trips_through_text() {
        let cfg = TrainConfig { seed: 17, lr: 3e-4, ..TrainConfig::full_scale() };
        assert_eq!(TrainConfig::from_kv_str(&cfg.to_kv_string()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(TrainConfig::from_kv_str("learning_rate = 1").is_err());
        assert!(TrainConfig::from_kv_str("patience = 0").is_err());
        assert!(TrainConfig::from_kv_str("dropout = 1.5").is_err());
        assert!(TrainConfig::from_kv_str("batch_size").is_err());
    }
}
