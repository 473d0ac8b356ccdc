//! Layered min-sum belief propagation with OSD-CS-2 post-processing.

use super::graph::DecodingGraph;
use super::DecodeError;
use crate::gf2::{words_for, EchelonBasis};

#[derive(Debug, Clone)]
pub(crate) struct BpOsd {
    /// Check-to-variable messages indexed like the detector incidence CSR.
    msg: Vec<f64>,
    edge_offsets: Vec<u32>,
    posterior: Vec<f64>,
    hard: Vec<u8>,
    syn: Vec<u8>,
    check: Vec<u8>,
    // OSD scratch
    rank: usize,
    order: Vec<u32>,
    basis: EchelonBasis,
    slot_fault: Vec<u32>,
    col: Vec<u64>,
    combo: Vec<u64>,
    x0: Vec<u64>,
    trial: Vec<u64>,
    sweep_faults: Vec<u32>,
    sweep_combos: Vec<u64>,
    pub(crate) solution: Vec<u32>,
    pub(crate) converged: bool,
    pub(crate) used_osd: bool,
}

impl BpOsd {
    pub(crate) fn new(g: &DecodingGraph, rank: usize, sweep_width: usize) -> Self {
        let nd = g.num_detectors;
        let nf = g.num_faults;
        let mut edge_offsets = Vec::with_capacity(nd + 1);
        edge_offsets.push(0u32);
        for d in 0..nd {
            edge_offsets.push(edge_offsets[d] + g.detector_faults(d).len() as u32);
        }
        let basis = EchelonBasis::new(nd.max(1), rank.max(1));
        let cw = basis.combo_words();
        Self {
            msg: vec![0.0; g.num_edges()],
            edge_offsets,
            posterior: vec![0.0; nf],
            hard: vec![0; nf],
            syn: vec![0; nd],
            check: vec![0; nd],
            rank,
            order: Vec::with_capacity(nf),
            basis,
            slot_fault: Vec::with_capacity(rank),
            col: vec![0; words_for(nd.max(1))],
            combo: vec![0; cw],
            x0: vec![0; cw],
            trial: vec![0; cw],
            sweep_faults: Vec::with_capacity(sweep_width),
            sweep_combos: Vec::with_capacity(sweep_width * cw),
            solution: Vec::with_capacity(nf),
            converged: false,
            used_osd: false,
        }
    }

    /// Decodes the sorted sparse `syndrome`; the chosen faults land in `self.solution`.
    pub(crate) fn run(
        &mut self,
        g: &DecodingGraph,
        syndrome: &[u32],
        iters: usize,
        scale: f64,
        sweep_width: usize,
    ) -> Result<(), DecodeError> {
        self.solution.clear();
        self.converged = false;
        self.used_osd = false;
        if syndrome.is_empty() {
            self.converged = true;
            return Ok(());
        }
        self.syn.fill(0);
        for &d in syndrome {
            self.syn[d as usize] = 1;
        }
        self.msg.fill(0.0);
        self.posterior.copy_from_slice(&g.weights);
        for _ in 0..iters {
            self.layer_pass(g, scale);
            if self.hard_decision_matches(g) {
                self.converged = true;
                break;
            }
        }
        if self.converged {
            for f in 0..g.num_faults {
                if self.hard[f] == 1 {
                    self.solution.push(f as u32);
                }
            }
            return Ok(());
        }
        self.used_osd = true;
        self.osd(g, syndrome, sweep_width)
    }

    fn layer_pass(&mut self, g: &DecodingGraph, scale: f64) {
        for d in 0..g.num_detectors {
            let faults = g.detector_faults(d);
            if faults.is_empty() {
                continue;
            }
            let base = self.edge_offsets[d] as usize;
            let mut min1 = f64::INFINITY;
            let mut min2 = f64::INFINITY;
            let mut min_idx = usize::MAX;
            let mut sign = self.syn[d] == 1;
            for (e, &f) in faults.iter().enumerate() {
                let q = self.posterior[f as usize] - self.msg[base + e];
                let a = q.abs();
                if q < 0.0 {
                    sign = !sign;
                }
                if a < min1 {
                    min2 = min1;
                    min1 = a;
                    min_idx = e;
                } else if a < min2 {
                    min2 = a;
                }
            }
            for (e, &f) in faults.iter().enumerate() {
                let fu = f as usize;
                let q = self.posterior[fu] - self.msg[base + e];
                let mag = if e == min_idx { min2 } else { min1 };
                let s = sign ^ (q < 0.0);
                let r = if s { -scale * mag } else { scale * mag };
                self.msg[base + e] = r;
                self.posterior[fu] = q + r;
            }
        }
    }

    fn hard_decision_matches(&mut self, g: &DecodingGraph) -> bool {
        self.check.fill(0);
        for f in 0..g.num_faults {
            let h = (self.posterior[f] < 0.0) as u8;
            self.hard[f] = h;
            if h == 1 {
                for &d in g.signature(f) {
                    self.check[d as usize] ^= 1;
                }
            }
        }
        self.check == self.syn
    }

    fn load_column(&mut self, g: &DecodingGraph, f: usize) {
        self.col.fill(0);
        for &d in g.signature(f) {
            self.col[d as usize / 64] ^= 1 << (d % 64);
        }
    }

    fn osd(&mut self, g: &DecodingGraph, syndrome: &[u32], sweep_width: usize) -> Result<(), DecodeError> {
        let post = &self.posterior;
        self.order.clear();
        self.order.extend(0..g.num_faults as u32);
        self.order.sort_unstable_by(|&a, &b| {
            post[a as usize].total_cmp(&post[b as usize]).then(a.cmp(&b))
        });
        self.basis.clear();
        self.slot_fault.clear();
        self.sweep_faults.clear();
        self.sweep_combos.clear();
        let cw = self.basis.combo_words();
        let mut pos = 0;
        while pos < self.order.len() && self.slot_fault.len() < self.rank {
            let f = self.order[pos] as usize;
            pos += 1;
            self.load_column(g, f);
            if self.basis.insert(&mut self.col, &mut self.combo) {
                self.slot_fault.push(f as u32);
            } else if self.sweep_faults.len() < sweep_width {
                // dependent column: the reduction already expresses it over the pivots
                self.sweep_faults.push(f as u32);
                self.sweep_combos.extend_from_slice(&self.combo);
            }
        }
        while self.sweep_faults.len() < sweep_width && pos < self.order.len() {
            let f = self.order[pos] as usize;
            pos += 1;
            self.load_column(g, f);
            self.basis.reduce(&mut self.col, &mut self.combo);
            debug_assert!(self.col.iter().all(|&w| w == 0));
            self.sweep_faults.push(f as u32);
            self.sweep_combos.extend_from_slice(&self.combo);
        }
        // OSD-0
        self.col.fill(0);
        for &d in syndrome {
            self.col[d as usize / 64] ^= 1 << (d % 64);
        }
        self.basis.reduce(&mut self.col, &mut self.x0);
        if self.col.iter().any(|&w| w != 0) {
            return Err(DecodeError::SolverFailure);
        }
        let weights = &g.weights;
        let slot_cost = |bits: &[u64], slots: &[u32]| -> f64 {
            let mut c = 0.0;
            for (wi, &word) in bits.iter().enumerate() {
                let mut w = word;
                while w != 0 {
                    let b = wi * 64 + w.trailing_zeros() as usize;
                    c += weights[slots[b] as usize];
                    w &= w - 1;
                }
            }
            c
        };
        let mut best_cost = slot_cost(&self.x0, &self.slot_fault);
        let mut best: (usize, usize) = (usize::MAX, usize::MAX);
        let m = self.sweep_faults.len();
        for i in 0..m {
            let ci = &self.sweep_combos[i * cw..(i + 1) * cw];
            for (t, (a, b)) in self.trial.iter_mut().zip(self.x0.iter().zip(ci)) {
                *t = a ^ b;
            }
            let base = weights[self.sweep_faults[i] as usize];
            let c = base + slot_cost(&self.trial, &self.slot_fault);
            if c < best_cost {
                best_cost = c;
                best = (i, usize::MAX);
            }
            for j in (i + 1)..m {
                let cj = &self.sweep_combos[j * cw..(j + 1) * cw];
                for (t, ((a, b), e)) in self.trial.iter_mut().zip(self.x0.iter().zip(ci).zip(cj)) {
                    *t = a ^ b ^ e;
                }
                let c = base + weights[self.sweep_faults[j] as usize] + slot_cost(&self.trial, &self.slot_fault);
                if c < best_cost {
                    best_cost = c;
                    best = (i, j);
                }
            }
        }
        self.trial.copy_from_slice(&self.x0);
        for &k in [best.0, best.1].iter().filter(|&&k| k != usize::MAX) {
            let ck = &self.sweep_combos[k * cw..(k + 1) * cw];
            for (t, b) in self.trial.iter_mut().zip(ck) {
                *t ^= b;
            }
            self.solution.push(self.sweep_faults[k]);
        }
        for (wi, &word) in self.trial.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let b = wi * 64 + w.trailing_zeros() as usize;
                self.solution.push(self.slot_fault[b]);
                w &= w - 1;
            }
        }
        self.solution.sort_unstable();
        Ok(())
    }
}
