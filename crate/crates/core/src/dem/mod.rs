//! Detector error models: construction from a noisy circuit, text I/O and
//! the fault–fault adjacency graph.

mod build;
mod graph;
mod text;

pub use build::build_dem;
pub use graph::FaultGraph;
pub use text::{export_dem, import_dem};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::hex_prefix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemError {
    #[error("fault count mismatch: expected {expected}, built {actual}")]
    CountMismatch { expected: usize, actual: usize },
    #[error("n·T/2 is not an integer (n = {n}, T = {rounds})")]
    NonIntegral { n: usize, rounds: usize },
    #[error("invalid arguments: {0}")]
    Invalid(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One independent fault mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub id: usize,
    pub probability: f64,
    /// Strictly ascending detector indices.
    pub detectors: Vec<u32>,
    /// Bit `i` set when the fault flips observable `i`.
    pub observables: u64,
}

impl Fault {
    pub fn weight(&self) -> usize {
        self.detectors.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DemProvenance {
    pub code: String,
    pub rounds: usize,
    pub p: f64,
    pub schedule_hash: String,
    /// Detectors per round layer, when known.
    pub checks_per_round: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dem {
    pub faults: Vec<Fault>,
    pub num_detectors: usize,
    pub num_observables: usize,
    /// Mechanisms that flip observables without triggering any detector.
    pub undetectable: Vec<(f64, u64)>,
    pub provenance: DemProvenance,
}

impl Dem {
    /// Builds a DEM from explicit mechanisms, assigning ids in the given order.
    pub fn from_mechanisms(
        num_detectors: usize,
        num_observables: usize,
        mechanisms: impl IntoIterator<Item = (f64, Vec<u32>, u64)>,
    ) -> Result<Self, DemError> {
        let mut faults = Vec::new();
        let mut undetectable = Vec::new();
        for (probability, mut detectors, observables) in mechanisms {
            if !(probability > 0.0 && probability < 0.5) {
                return Err(DemError::Invalid(format!("probability {probability} outside (0, 0.5)")));
            }
            detectors.sort_unstable();
            if detectors.windows(2).any(|w| w[0] == w[1]) {
                return Err(DemError::Invalid("repeated detector in signature".into()));
            }
            if detectors.last().is_some_and(|&d| d as usize >= num_detectors) {
                return Err(DemError::Invalid("detector index out of range".into()));
            }
            if detectors.is_empty() {
                if observables != 0 {
                    undetectable.push((probability, observables));
                }
                continue;
            }
            faults.push(Fault {
                id: faults.len(),
                probability,
                detectors,
                observables,
            });
        }
        Ok(Self {
            faults,
            num_detectors,
            num_observables,
            undetectable,
            provenance: DemProvenance::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.faults.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faults.is_empty()
    }

    /// Expected number of triggered mechanisms per shot.
    pub fn expected_faults(&self) -> f64 {
        self.faults.iter().map(|f| f.probability).sum::<f64>()
            + self.undetectable.iter().map(|u| u.0).sum::<f64>()
    }

    /// Sorts by `(first detector, weight, mask, signature)` and renumbers.
    pub fn canonicalize(&mut self) {
        self.faults.sort_by(|a, b| {
            (a.detectors[0], a.weight(), a.observables, &a.detectors)
                .cmp(&(b.detectors[0], b.weight(), b.observables, &b.detectors))
        });
        for (i, f) in self.faults.iter_mut().enumerate() {
            f.id = i;
        }
    }

    /// Short content hash of the canonical text form.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(export_dem(self).as_bytes());
        hex_prefix(&digest)
    }

    pub fn weight_histogram(&self) -> Vec<usize> {
        let max = self.faults.iter().map(Fault::weight).max().unwrap_or(0);
        let mut h = vec![0; max + 1];
        for f in &self.faults {
            h[f.weight()] += 1;
        }
        h
    }

    /// XOR of the signatures and masks of `faults`, as (sorted detectors, mask).
    pub fn combine(&self, faults: &[usize]) -> (Vec<u32>, u64) {
        let mut dets: Vec<u32> = Vec::new();
        let mut obs = 0;
        for &f in faults {
            dets.extend_from_slice(&self.faults[f].detectors);
            obs ^= self.faults[f].observables;
        }
        dets.sort_unstable();
        let mut out = Vec::with_capacity(dets.len());
        let mut i = 0;
        while i < dets.len() {
            let mut j = i;
            while j < dets.len() && dets[j] == dets[i] {
                j += 1;
            }
            if (j - i) % 2 == 1 {
                out.push(dets[i]);
            }
            i = j;
        }
        (out, obs)
    }
}

/// `n(wT + T/2 + 1)`: CNOT faults, measurement faults and boundary faults.
pub fn predicted_fault_count(n: usize, w: usize, rounds: usize) -> Result<usize, DemError> {
    if n == 0 || w == 0 || rounds == 0 {
        return Err(DemError::Invalid(format!("n={n}, w={w}, T={rounds}")));
    }
    if (n * rounds) % 2 != 0 {
        return Err(DemError::NonIntegral { n, rounds });
    }
    Ok(n * w * rounds + n * rounds / 2 + n)
}
