//! Peeling over the fully-active fault set.
//!
//! A fault is fully active when every detector of its signature is active,
//! and peelable when it is fully active and no other fully-active fault
//! shares any of its detectors. All state is epoch-stamped so that a new
//! shot starts without clearing the dense arrays.

use serde::{Deserialize, Serialize};

use super::graph::DecodingGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum PeelMode {
    /// Peel everything peelable in the initial syndrome once.
    SinglePass,
    /// FIFO over detectors whose neighbourhood changed, to fixpoint.
    #[default]
    QueueBased,
    /// Peel all peelable faults, rescan every active detector, repeat.
    BatchIterative,
}

impl std::str::FromStr for PeelMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" | "single-pass" | "SinglePass" => Ok(Self::SinglePass),
            "queue" | "queue-based" | "QueueBased" => Ok(Self::QueueBased),
            "batch" | "batch-iterative" | "BatchIterative" => Ok(Self::BatchIterative),
            _ => Err(format!("unknown peel mode '{s}'")),
        }
    }
}

/// Which fully-active faults count as unambiguous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum PeelPredicate {
    /// No other fully-active fault shares any detector of the fault.
    #[default]
    Strict,
    /// Some detector of the fault has no other fully-active incident fault.
    Local,
}

impl std::str::FromStr for PeelPredicate {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" | "Strict" => Ok(Self::Strict),
            "local" | "Local" => Ok(Self::Local),
            _ => Err(format!("unknown peel predicate '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PeelStats {
    pub peeled: u32,
    /// Passes (queue generations or rescans) that removed at least one fault.
    pub passes: u32,
    pub input_weight: u32,
    pub residual_weight: u32,
}

/// One candidate fault observed around a peel event in traced mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnblockRecord {
    pub fault: u32,
    /// Fully active but blocked before the peel.
    pub blocked_before: bool,
    /// Peelable after the peel.
    pub peelable_after: bool,
    /// Some detector of the fault changed activation during the peel.
    pub activation_changed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct PeelTrace {
    pub peel_events: u64,
    pub records: Vec<UnblockRecord>,
}

#[derive(Debug, Clone)]
pub(crate) struct PeelState {
    epoch: u32,
    det_epoch: Vec<u32>,
    det_active: Vec<u8>,
    /// Number of fully-active faults incident to the detector.
    det_fa: Vec<u16>,
    fault_epoch: Vec<u32>,
    fault_act: Vec<u8>,
    /// Detector FIFO (ring buffer) with membership flags.
    queue: Vec<u32>,
    q_head: usize,
    q_len: usize,
    queued: Vec<u32>,
    /// Active detectors of the current shot, maintained lazily.
    touched: Vec<u32>,
    touched_mark: Vec<u32>,
    scratch: Vec<u32>,
    scratch_mark: Vec<u32>,
    scratch_epoch: u32,
    pub(crate) chosen: Vec<u32>,
    pub(crate) observables: u64,
    pub(crate) active_count: u32,
    pub(crate) predicate: PeelPredicate,
}

impl PeelState {
    pub(crate) fn new(g: &DecodingGraph) -> Self {
        let nd = g.num_detectors;
        let nf = g.num_faults;
        Self {
            epoch: 1,
            det_epoch: vec![0; nd],
            det_active: vec![0; nd],
            det_fa: vec![0; nd],
            fault_epoch: vec![0; nf],
            fault_act: vec![0; nf],
            queue: vec![0; nd.max(1)],
            q_head: 0,
            q_len: 0,
            queued: vec![0; nd],
            touched: Vec::with_capacity(nd),
            touched_mark: vec![0; nd],
            scratch: Vec::with_capacity(nf),
            scratch_mark: vec![0; nf],
            scratch_epoch: 1,
            chosen: Vec::with_capacity(nf),
            observables: 0,
            active_count: 0,
            predicate: PeelPredicate::Strict,
        }
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.det_epoch.fill(0);
            self.fault_epoch.fill(0);
            self.queued.fill(0);
            self.touched_mark.fill(0);
            self.epoch = 1;
        }
    }

    fn next_scratch_epoch(&mut self) {
        self.scratch_epoch = self.scratch_epoch.wrapping_add(1);
        if self.scratch_epoch == 0 {
            self.scratch_mark.fill(0);
            self.scratch_epoch = 1;
        }
    }

    #[inline]
    fn fresh_det(&mut self, d: usize) {
        if self.det_epoch[d] != self.epoch {
            self.det_epoch[d] = self.epoch;
            self.det_active[d] = 0;
            self.det_fa[d] = 0;
        }
    }

    #[inline]
    fn fresh_fault(&mut self, f: usize) {
        if self.fault_epoch[f] != self.epoch {
            self.fault_epoch[f] = self.epoch;
            self.fault_act[f] = 0;
        }
    }

    #[inline]
    pub(crate) fn is_active(&self, d: usize) -> bool {
        self.det_epoch[d] == self.epoch && self.det_active[d] == 1
    }

    #[inline]
    fn fa_count(&self, d: usize) -> u16 {
        if self.det_epoch[d] == self.epoch {
            self.det_fa[d]
        } else {
            0
        }
    }

    #[inline]
    pub(crate) fn is_fully_active(&self, g: &DecodingGraph, f: usize) -> bool {
        self.fault_epoch[f] == self.epoch && self.fault_act[f] as usize == g.weight(f)
    }

    #[inline]
    pub(crate) fn is_peelable(&self, g: &DecodingGraph, f: usize) -> bool {
        if !self.is_fully_active(g, f) {
            return false;
        }
        let mut unique = g.signature(f).iter().map(|&d| self.fa_count(d as usize) == 1);
        match self.predicate {
            PeelPredicate::Strict => unique.all(|u| u),
            PeelPredicate::Local => unique.any(|u| u),
        }
    }

    fn push(&mut self, d: u32) {
        if self.queued[d as usize] == self.epoch {
            return;
        }
        self.queued[d as usize] = self.epoch;
        let cap = self.queue.len();
        self.queue[(self.q_head + self.q_len) % cap] = d;
        self.q_len += 1;
    }

    fn pop(&mut self) -> Option<u32> {
        if self.q_len == 0 {
            return None;
        }
        let d = self.queue[self.q_head];
        self.q_head = (self.q_head + 1) % self.queue.len();
        self.q_len -= 1;
        self.queued[d as usize] = 0;
        Some(d)
    }

    /// Toggles detector `d`, maintaining fault activation counts and the
    /// per-detector fully-active tallies. Detectors whose tally changes are
    /// queued when `enqueue` is set.
    fn toggle(&mut self, g: &DecodingGraph, d: usize, enqueue: bool) {
        self.fresh_det(d);
        let was = self.det_active[d];
        self.det_active[d] ^= 1;
        if was == 0 {
            self.active_count += 1;
            if self.touched_mark[d] != self.epoch {
                self.touched_mark[d] = self.epoch;
                self.touched.push(d as u32);
            }
        } else {
            self.active_count -= 1;
        }
        for &f in g.detector_faults(d) {
            let f = f as usize;
            self.fresh_fault(f);
            let w = g.weight(f);
            let old_fa = self.fault_act[f] as usize == w;
            if was == 0 {
                self.fault_act[f] += 1;
            } else {
                self.fault_act[f] -= 1;
            }
            let new_fa = self.fault_act[f] as usize == w;
            if old_fa != new_fa {
                for &d2 in g.signature(f) {
                    let d2u = d2 as usize;
                    self.fresh_det(d2u);
                    if new_fa {
                        self.det_fa[d2u] += 1;
                    } else {
                        self.det_fa[d2u] -= 1;
                    }
                    if enqueue {
                        self.push(d2);
                    }
                }
            }
        }
        if enqueue {
            self.push(d as u32);
        }
    }

    /// Starts a new shot from a sparse list of active detectors (repeats cancel).
    pub(crate) fn load(&mut self, g: &DecodingGraph, syndrome: &[u32]) {
        self.next_epoch();
        self.q_head = 0;
        self.q_len = 0;
        self.touched.clear();
        self.chosen.clear();
        self.observables = 0;
        self.active_count = 0;
        for &d in syndrome {
            self.toggle(g, d as usize, false);
        }
    }

    pub(crate) fn apply(&mut self, g: &DecodingGraph, f: usize, enqueue: bool) {
        self.chosen.push(f as u32);
        self.observables ^= g.observables[f];
        for &d in g.signature(f) {
            self.toggle(g, d as usize, enqueue);
        }
    }

    /// Active detectors, ascending, written into `out`.
    pub(crate) fn active_detectors(&mut self, out: &mut Vec<u32>) {
        out.clear();
        let epoch = self.epoch;
        for &d in &self.touched {
            if self.det_epoch[d as usize] == epoch && self.det_active[d as usize] == 1 {
                out.push(d);
            }
        }
        out.sort_unstable();
    }

    /// Collects the peelable faults incident to currently active detectors
    /// into `self.scratch`, ascending.
    fn collect_peelable(&mut self, g: &DecodingGraph) {
        self.next_scratch_epoch();
        self.scratch.clear();
        for i in 0..self.touched.len() {
            let d = self.touched[i] as usize;
            if !self.is_active(d) {
                continue;
            }
            for &f in g.detector_faults(d) {
                let fu = f as usize;
                if self.scratch_mark[fu] != self.scratch_epoch && self.is_peelable(g, fu) {
                    self.scratch_mark[fu] = self.scratch_epoch;
                    self.scratch.push(f);
                }
            }
        }
        self.scratch.sort_unstable();
    }

    fn peel_collected(&mut self, g: &DecodingGraph) -> u32 {
        let count = self.scratch.len();
        // simultaneous removal: under the strict predicate the batch is detector-disjoint
        for i in 0..count {
            let f = self.scratch[i] as usize;
            self.apply(g, f, false);
        }
        count as u32
    }

    pub(crate) fn run(
        &mut self,
        g: &DecodingGraph,
        mode: PeelMode,
        mut trace: Option<&mut PeelTrace>,
    ) -> PeelStats {
        let input_weight = self.active_count;
        let mut peeled = 0;
        let mut passes = 0;
        match mode {
            PeelMode::SinglePass => {
                self.collect_peelable(g);
                peeled += self.peel_collected(g);
                passes = (peeled > 0) as u32;
            }
            PeelMode::BatchIterative => loop {
                self.collect_peelable(g);
                if self.scratch.is_empty() {
                    break;
                }
                passes += 1;
                peeled += self.peel_collected(g);
            },
            PeelMode::QueueBased => {
                // seed the FIFO with the active detectors in ascending order
                self.scratch.clear();
                for i in 0..self.touched.len() {
                    let d = self.touched[i];
                    if self.is_active(d as usize) {
                        self.scratch.push(d);
                    }
                }
                self.scratch.sort_unstable();
                for i in 0..self.scratch.len() {
                    let d = self.scratch[i];
                    self.push(d);
                }
                // a generation is the queue content at the moment the previous one was drained
                let mut generation = 0u32;
                let mut generation_left = self.q_len;
                let mut last_counted = u32::MAX;
                while let Some(d) = self.pop() {
                    if generation_left == 0 {
                        generation += 1;
                        generation_left = self.q_len + 1;
                    }
                    generation_left -= 1;
                    let d = d as usize;
                    if !self.is_active(d) {
                        continue;
                    }
                    let pick = g
                        .detector_faults(d)
                        .iter()
                        .copied()
                        .find(|&f| self.is_peelable(g, f as usize));
                    if let Some(f) = pick {
                        match trace.as_deref_mut() {
                            Some(t) => self.apply_traced(g, f as usize, t),
                            None => self.apply(g, f as usize, true),
                        }
                        peeled += 1;
                        if last_counted != generation {
                            last_counted = generation;
                            passes += 1;
                        }
                    }
                }
            }
        }
        PeelStats {
            peeled,
            passes,
            input_weight,
            residual_weight: self.active_count,
        }
    }

    /// Peels `f` while recording, for every fault within two hops, whether
    /// it moved from blocked to peelable and whether its own detectors
    /// changed activation.
    fn apply_traced(&mut self, g: &DecodingGraph, f: usize, trace: &mut PeelTrace) {
        let mut region: Vec<u32> = Vec::new();
        self.next_scratch_epoch();
        for &d in g.signature(f) {
            for &h in g.detector_faults(d as usize) {
                for &d2 in g.signature(h as usize) {
                    for &k in g.detector_faults(d2 as usize) {
                        if self.scratch_mark[k as usize] != self.scratch_epoch {
                            self.scratch_mark[k as usize] = self.scratch_epoch;
                            region.push(k);
                        }
                    }
                }
            }
        }
        let before: Vec<(bool, bool)> = region
            .iter()
            .map(|&k| {
                let k = k as usize;
                let fa = self.is_fully_active(g, k);
                (fa && !self.is_peelable(g, k), fa)
            })
            .collect();
        let flipped = g.signature(f).to_vec();
        self.apply(g, f, true);
        trace.peel_events += 1;
        for (&k, &(blocked, _)) in region.iter().zip(&before) {
            if k as usize == f {
                continue;
            }
            let ku = k as usize;
            let activation_changed = g.signature(ku).iter().any(|d| flipped.contains(d));
            let peelable_after = self.is_peelable(g, ku);
            if blocked || peelable_after {
                trace.records.push(UnblockRecord {
                    fault: k,
                    blocked_before: blocked,
                    peelable_after,
                    activation_changed,
                });
            }
        }
    }
}
