//! Three-phase decoder: peeling, bounded pair search, then BP with OSD.

mod bposd;
mod graph;
mod pairs;
mod peel;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dem::Dem;
pub use graph::DecodingGraph;
pub use pairs::PairMatch;
pub use peel::{PeelMode, PeelPredicate, PeelStats, PeelTrace, UnblockRecord};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("syndrome is outside the column space of the detector matrix")]
    SolverFailure,
    #[error("syndrome has length {actual}, expected {expected}")]
    SyndromeLength { expected: usize, actual: usize },
    #[error("detector {0} out of range")]
    DetectorOutOfRange(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Peel,
    PairEnum,
    Bp,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Peel => "peel",
            Phase::PairEnum => "pair",
            Phase::Bp => "bp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    pub mode: PeelMode,
    pub predicate: PeelPredicate,
    pub pair_max_weight: usize,
    pub pair_top_k: usize,
    pub bp_iters: usize,
    pub bp_scale: f64,
    pub osd_sweep_width: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            mode: PeelMode::QueueBased,
            predicate: PeelPredicate::Strict,
            pair_max_weight: 6,
            pair_top_k: 60,
            bp_iters: 30,
            bp_scale: 0.8,
            osd_sweep_width: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub predicted_observables: u64,
    pub phase: Phase,
    pub peel: PeelStats,
    /// Residual weight handed to pair enumeration (0 when peeling cleared it).
    pub residual_after_peel: u32,
    /// Number of faults in the correction.
    pub correction_len: u32,
    pub bp_converged: bool,
}

/// Peeling output materialized for analysis code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeelOutcome {
    pub chosen: Vec<u32>,
    pub residual: Vec<u32>,
    pub observables: u64,
    pub stats: PeelStats,
}

/// Per-worker decoder. All buffers are sized at construction so that
/// [`Decoder::decode`] does not allocate.
#[derive(Debug, Clone)]
pub struct Decoder {
    graph: Arc<DecodingGraph>,
    config: DecoderConfig,
    peel: peel::PeelState,
    pairs: pairs::PairSearch,
    bp: bposd::BpOsd,
    residual: Vec<u32>,
    sparse: Vec<u32>,
    correction: Vec<u32>,
}

impl Decoder {
    pub fn new(dem: &Dem, config: DecoderConfig) -> Self {
        Self::with_graph(Arc::new(DecodingGraph::new(dem)), config)
    }

    pub fn with_graph(graph: Arc<DecodingGraph>, config: DecoderConfig) -> Self {
        let g = &*graph;
        let mut peel = peel::PeelState::new(g);
        peel.predicate = config.predicate;
        Self {
            peel,
            pairs: pairs::PairSearch::new(g),
            bp: bposd::BpOsd::new(g, g.rank, config.osd_sweep_width),
            residual: Vec::with_capacity(g.num_detectors),
            sparse: Vec::with_capacity(g.num_detectors),
            correction: Vec::with_capacity(g.num_faults),
            config,
            graph,
        }
    }

    pub fn graph(&self) -> &Arc<DecodingGraph> {
        &self.graph
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    /// Fault ids of the most recent correction, ascending within each phase.
    pub fn correction(&self) -> &[u32] {
        &self.correction
    }

    fn check_sparse(&self, syndrome: &[u32]) -> Result<(), DecodeError> {
        match syndrome.iter().find(|&&d| d as usize >= self.graph.num_detectors) {
            Some(&d) => Err(DecodeError::DetectorOutOfRange(d)),
            None => Ok(()),
        }
    }

    /// Decodes a sparse syndrome (active detector ids; repeats cancel).
    pub fn decode(&mut self, syndrome: &[u32]) -> Result<DecodeResult, DecodeError> {
        self.check_sparse(syndrome)?;
        let g = &*self.graph;
        let cfg = self.config;
        self.correction.clear();
        self.peel.load(g, syndrome);
        let stats = self.peel.run(g, cfg.mode, None);
        self.correction.extend_from_slice(&self.peel.chosen);
        let mut obs = self.peel.observables;
        self.peel.active_detectors(&mut self.residual);
        let residual_after_peel = self.residual.len() as u32;
        let mut result = DecodeResult {
            predicted_observables: obs,
            phase: Phase::Peel,
            peel: stats,
            residual_after_peel,
            correction_len: 0,
            bp_converged: false,
        };
        if !self.residual.is_empty() {
            match self.pairs.search(g, &self.residual, cfg.pair_max_weight, cfg.pair_top_k) {
                Some(PairMatch::Single(f)) => {
                    obs ^= g.observables[f as usize];
                    self.correction.push(f);
                    result.phase = Phase::PairEnum;
                }
                Some(PairMatch::Pair(a, b)) => {
                    obs ^= g.observables[a as usize] ^ g.observables[b as usize];
                    self.correction.push(a);
                    self.correction.push(b);
                    result.phase = Phase::PairEnum;
                }
                None => {
                    self.bp.run(g, &self.residual, cfg.bp_iters, cfg.bp_scale, cfg.osd_sweep_width)?;
                    for &f in &self.bp.solution {
                        obs ^= g.observables[f as usize];
                    }
                    self.correction.extend_from_slice(&self.bp.solution);
                    result.phase = Phase::Bp;
                    result.bp_converged = self.bp.converged;
                }
            }
        }
        result.predicted_observables = obs;
        result.correction_len = self.correction.len() as u32;
        Ok(result)
    }

    /// Decodes a sorted sparse syndrome with BP+OSD alone, skipping peeling
    /// and pair enumeration. Used as the comparison arm; does not allocate.
    pub fn decode_bp_only(&mut self, syndrome: &[u32]) -> Result<DecodeResult, DecodeError> {
        self.check_sparse(syndrome)?;
        let g = &*self.graph;
        let cfg = self.config;
        self.correction.clear();
        self.bp.run(g, syndrome, cfg.bp_iters, cfg.bp_scale, cfg.osd_sweep_width)?;
        self.correction.extend_from_slice(&self.bp.solution);
        let obs = self.bp.solution.iter().fold(0, |m, &f| m ^ g.observables[f as usize]);
        Ok(DecodeResult {
            predicted_observables: obs,
            phase: Phase::Bp,
            peel: PeelStats { input_weight: syndrome.len() as u32, residual_weight: syndrome.len() as u32, ..Default::default() },
            residual_after_peel: syndrome.len() as u32,
            correction_len: self.correction.len() as u32,
            bp_converged: self.bp.converged,
        })
    }

    /// Runs the configured peeling mode only; allocation-free.
    pub fn peel_only(&mut self, syndrome: &[u32]) -> Result<PeelStats, DecodeError> {
        self.check_sparse(syndrome)?;
        let g = &*self.graph;
        self.peel.load(g, syndrome);
        Ok(self.peel.run(g, self.config.mode, None))
    }

    /// Decodes a dense syndrome with one entry per detector.
    pub fn decode_dense(&mut self, syndrome: &[u8]) -> Result<DecodeResult, DecodeError> {
        if syndrome.len() != self.graph.num_detectors {
            return Err(DecodeError::SyndromeLength {
                expected: self.graph.num_detectors,
                actual: syndrome.len(),
            });
        }
        let mut sparse = std::mem::take(&mut self.sparse);
        sparse.clear();
        sparse.extend(syndrome.iter().enumerate().filter(|(_, &b)| b & 1 == 1).map(|(i, _)| i as u32));
        let r = self.decode(&sparse);
        self.sparse = sparse;
        r
    }

    /// Runs only the peeling phase and returns its full outcome.
    pub fn peel(&mut self, syndrome: &[u32], mode: PeelMode) -> Result<PeelOutcome, DecodeError> {
        self.peel_inner(syndrome, mode, None)
    }

    /// QueueBased peeling that also records unblocking events.
    pub fn peel_traced(&mut self, syndrome: &[u32], trace: &mut PeelTrace) -> Result<PeelOutcome, DecodeError> {
        self.peel_inner(syndrome, PeelMode::QueueBased, Some(trace))
    }

    fn peel_inner(
        &mut self,
        syndrome: &[u32],
        mode: PeelMode,
        trace: Option<&mut PeelTrace>,
    ) -> Result<PeelOutcome, DecodeError> {
        self.check_sparse(syndrome)?;
        let g = &*self.graph;
        self.peel.load(g, syndrome);
        let stats = self.peel.run(g, mode, trace);
        let mut residual = Vec::new();
        self.peel.active_detectors(&mut residual);
        Ok(PeelOutcome {
            chosen: self.peel.chosen.clone(),
            residual,
            observables: self.peel.observables,
            stats,
        })
    }

    /// Pair enumeration on a sorted residual, independent of peeling.
    pub fn enumerate_pairs(&mut self, residual: &[u32]) -> Option<PairMatch> {
        let cfg = self.config;
        self.pairs.search(&self.graph, residual, cfg.pair_max_weight, cfg.pair_top_k)
    }

    /// BP+OSD alone on a syndrome; returns the chosen faults.
    pub fn bp_osd(&mut self, syndrome: &[u32]) -> Result<Vec<u32>, DecodeError> {
        self.check_sparse(syndrome)?;
        let mut s = syndrome.to_vec();
        s.sort_unstable();
        s.dedup();
        let cfg = self.config;
        self.bp.run(&self.graph, &s, cfg.bp_iters, cfg.bp_scale, cfg.osd_sweep_width)?;
        Ok(self.bp.solution.clone())
    }

    /// Observable mask of a fault set.
    pub fn observables_of(&self, faults: &[u32]) -> u64 {
        faults.iter().fold(0, |m, &f| m ^ self.graph.observables[f as usize])
    }
}

#[cfg(test)]
mod tests;
