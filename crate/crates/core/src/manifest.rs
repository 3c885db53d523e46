use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::seed::fnv1a;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance embedded in every artifact a command writes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// FNV-1a of the canonical key-value config text, as hex.
    pub config_hash: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub version: String,
}

impl RunManifest {
    pub fn new(subcommand: impl Into<String>, config_text: &str, seed: u64) -> Self {
        RunManifest {
            subcommand: subcommand.into(),
            config_hash: format!("{:016x}", fnv1a(config_text.as_bytes())),
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            version: TOOLKIT_VERSION.to_string(),
        }
    }

    pub fn input(mut self, key: &str, value: impl ToString) -> Self {
        self.inputs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn output(mut self, key: &str, value: impl ToString) -> Self {
        self.outputs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serialises")
    }
}
