//! The JSON report every command prints.

use std::collections::BTreeMap;

use coherence_core::matcore::ComplexMatrix;
use coherence_core::sdpcore::SolverSettings;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::doc::{Input, MatrixDocument};

#[derive(Debug, Clone, Serialize)]
pub struct CommandEcho {
    pub name: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub role: String,
    pub source: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SettingsRecord {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: CommandEcho,
    pub inputs: Vec<InputRecord>,
    /// SHA-256 over the per-input digests, in order.
    pub inputs_digest: String,
    pub settings: SettingsRecord,
    pub results: Map<String, Value>,
    pub witnesses: BTreeMap<String, MatrixDocument>,
    pub diagnostics: Map<String, Value>,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(name: &str, args: Vec<String>, settings: &SolverSettings, samples: usize) -> Self {
        Self {
            command: CommandEcho {
                name: name.to_string(),
                args,
            },
            inputs: Vec::new(),
            inputs_digest: String::new(),
            settings: SettingsRecord {
                tol: settings.tol,
                max_iter: settings.max_iter,
                seed: settings.seed,
                samples,
            },
            results: Map::new(),
            witnesses: BTreeMap::new(),
            diagnostics: Map::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn input(&mut self, role: &str, input: &Input) {
        self.inputs.push(InputRecord {
            role: role.to_string(),
            source: input.source.clone(),
            sha256: input.sha256.clone(),
        });
        let mut h = Sha256::new();
        for rec in &self.inputs {
            h.update(rec.sha256.as_bytes());
        }
        self.inputs_digest = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    }

    pub fn result(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.to_string(), value.into());
    }

    pub fn witness(&mut self, key: &str, m: &ComplexMatrix) {
        self.witnesses.insert(key.to_string(), MatrixDocument::from_matrix(m));
    }

    pub fn diagnostic(&mut self, key: &str, value: impl Into<Value>) {
        self.diagnostics.insert(key.to_string(), value.into());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are plain data")
    }
}
