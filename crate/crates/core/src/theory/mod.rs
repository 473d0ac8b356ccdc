//! Analytical peeling theory: birthday parameters, collision classification,
//! the density-corrected success formula and its fitted counterpart.

mod collisions;
mod fit;
mod random_graph;

pub use collisions::{classify_collisions, BucketCount, CollisionReport, PairRecord};
pub use fit::{fit_gamma_eff, measure_peel_rate, GammaFit, GammaPoint, PeelMeasurement};
pub use random_graph::{random_graph_baseline, rewired_dem, BaselineReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::PeelTrace;
use crate::dem::{Dem, FaultGraph};

/// Fraction of pairwise collisions assumed to survive into larger clusters.
pub const CLUSTER_FACTOR: f64 = 0.70;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    /// The formula is outside its validity range; `value` is still the raw prediction.
    #[error("λ = {lambda:.3} < 2: formula outside its validity range (raw value {value:.4})")]
    OutOfValidity { lambda: f64, value: f64 },
    #[error("configuration-model rewiring failed after {attempts} attempts")]
    RewireFailure { attempts: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub n: usize,
    pub rounds: usize,
    pub num_faults: usize,
    pub mean_degree: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub gamma_analytic: f64,
    pub a0: f64,
    /// Fitted single-pass factor, when measured.
    pub a_single: Option<f64>,
    pub b: f64,
    pub cluster_factor: f64,
    pub dem_hash: String,
}

impl TheoryParams {
    /// Assembles the parameter set from a DEM, its fault graph, a fault
    /// multiplier and a collision factor.
    pub fn new(dem: &Dem, graph: &FaultGraph, n: usize, alpha: f64, a0: f64) -> Self {
        let (beta, c) = birthday_params(graph, dem, n);
        let rounds = dem.provenance.rounds;
        Self {
            n,
            rounds,
            num_faults: dem.len(),
            mean_degree: graph.mean_degree,
            alpha,
            beta,
            c,
            gamma_analytic: gamma_analytic(c, alpha, rounds),
            a0,
            a_single: None,
            b: density_factor(c, alpha, CLUSTER_FACTOR),
            cluster_factor: CLUSTER_FACTOR,
            dem_hash: dem.content_hash(),
        }
    }

    /// Expected triggered-fault count `αnTp`.
    pub fn lambda(&self, n: usize, p: f64, rounds: usize) -> f64 {
        self.alpha * n as f64 * rounds as f64 * p
    }

    /// Effective γ of the density-corrected formula at `(p, T)`.
    pub fn gamma_model(&self, p: f64, rounds: usize) -> f64 {
        let scale = (rounds as f64 / self.rounds.max(1) as f64).powi(2);
        self.gamma_analytic * scale * self.a0 * (-self.b * rounds as f64 * p).exp()
    }
}

/// `β = d̄ / 2N` and `c = βn`.
pub fn birthday_params(graph: &FaultGraph, dem: &Dem, n: usize) -> (f64, f64) {
    if dem.is_empty() {
        return (0.0, 0.0);
    }
    let beta = graph.mean_degree / (2.0 * dem.len() as f64);
    (beta, beta * n as f64)
}

/// `γ_analytic = cα²T²`.
pub fn gamma_analytic(c: f64, alpha: f64, rounds: usize) -> f64 {
    c * alpha * alpha * (rounds * rounds) as f64
}

/// `B = cluster_factor · 2cα`.
pub fn density_factor(c: f64, alpha: f64, cluster_factor: f64) -> f64 {
    cluster_factor * 2.0 * c * alpha
}

/// `exp(−A₀ γ_analytic e^{−BTp} n p²)`; errors softly when `λ < 2`.
pub fn predict_peel(n: usize, p: f64, rounds: usize, params: &TheoryParams) -> Result<f64, TheoryError> {
    let value = (-params.gamma_model(p, rounds) * n as f64 * p * p).exp();
    let lambda = params.lambda(n, p, rounds);
    if p > 0.0 && lambda < 2.0 {
        return Err(TheoryError::OutOfValidity { lambda, value });
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub peel_events: u64,
    /// Faults that went from blocked to peelable across a peel event.
    pub unblock_events: u64,
    /// Unblocks where none of the unblocked fault's detectors changed activation.
    pub pure_removal: u64,
}

impl KappaReport {
    /// Pure-removal unblocks per peel event; `None` for an empty trace.
    pub fn kappa(&self) -> Option<f64> {
        (self.peel_events > 0).then(|| self.pure_removal as f64 / self.peel_events as f64)
    }
}

pub fn measure_kappa(trace: &PeelTrace) -> KappaReport {
    let mut report = KappaReport {
        peel_events: trace.peel_events,
        unblock_events: 0,
        pure_removal: 0,
    };
    for r in &trace.records {
        if r.blocked_before && r.peelable_after {
            report.unblock_events += 1;
            if !r.activation_changed {
                report.pure_removal += 1;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests;
