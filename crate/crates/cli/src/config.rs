use std::path::PathBuf;

use anyhow::{ensure, Result};
use pbqaoa_core::{Family, GraphMeta, MAX_SPECTRUM_QUBITS};
use serde::{Deserialize, Serialize};

/// One ensemble experiment: every `(n, replica)` pair of `n_list x replicas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: Family,
    pub graph: GraphMeta,
    pub n_list: Vec<usize>,
    pub sigma2: f64,
    pub replicas: usize,
    pub master_seed: u64,
    pub lambda: f64,
    pub bins: usize,
    pub out: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.n_list.is_empty(), "at least one size is required");
        for &n in &self.n_list {
            ensure!(
                (1..=MAX_SPECTRUM_QUBITS).contains(&n),
                "size {n} outside 1..={MAX_SPECTRUM_QUBITS}"
            );
        }
        let mut sorted = self.n_list.clone();
        sorted.sort_unstable();
        sorted.dedup();
        ensure!(sorted.len() == self.n_list.len(), "sizes must be distinct");
        ensure!(self.replicas >= 1, "replicas must be at least 1");
        ensure!(self.sigma2 > 0.0 && self.sigma2.is_finite(), "sigma2 must be positive");
        ensure!(self.lambda.is_finite(), "lambda must be finite");
        ensure!(self.bins >= 1, "bins must be at least 1");
        match self.graph {
            GraphMeta::Gnm { density } => ensure!((0.0..=1.0).contains(&density), "density must lie in [0, 1]"),
            GraphMeta::Regular { degree } => ensure!(degree >= 1, "degree must be at least 1"),
        }
        Ok(())
    }
}
