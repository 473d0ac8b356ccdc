//! Bounded single/pair search on a small residual syndrome.

use super::graph::DecodingGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMatch {
    Single(u32),
    Pair(u32, u32),
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    fault: u32,
    covered: u16,
    uncovered: u16,
}

#[derive(Debug, Clone)]
pub(crate) struct PairSearch {
    mark: Vec<u32>,
    epoch: u32,
    candidates: Vec<Candidate>,
    merged: Vec<u32>,
}

impl PairSearch {
    pub(crate) fn new(g: &DecodingGraph) -> Self {
        Self {
            mark: vec![0; g.num_faults],
            epoch: 0,
            candidates: Vec::with_capacity(g.num_faults),
            merged: Vec::with_capacity(64),
        }
    }

    /// `residual` must be sorted ascending.
    pub(crate) fn search(
        &mut self,
        g: &DecodingGraph,
        residual: &[u32],
        max_weight: usize,
        top_k: usize,
    ) -> Option<PairMatch> {
        if residual.is_empty() || residual.len() > max_weight {
            return None;
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.fill(0);
            self.epoch = 1;
        }
        self.candidates.clear();
        for &d in residual {
            for &f in g.detector_faults(d as usize) {
                if self.mark[f as usize] == self.epoch {
                    continue;
                }
                self.mark[f as usize] = self.epoch;
                let sig = g.signature(f as usize);
                let covered = sig.iter().filter(|x| residual.binary_search(x).is_ok()).count();
                self.candidates.push(Candidate {
                    fault: f,
                    covered: covered as u16,
                    uncovered: (sig.len() - covered) as u16,
                });
            }
        }
        let mut single: Option<u32> = None;
        for c in &self.candidates {
            if c.uncovered == 0 && c.covered as usize == residual.len() {
                single = Some(single.map_or(c.fault, |s| s.min(c.fault)));
            }
        }
        if let Some(f) = single {
            return Some(PairMatch::Single(f));
        }
        let probs = &g.probabilities;
        self.candidates.sort_unstable_by(|a, b| {
            b.covered
                .cmp(&a.covered)
                .then(a.uncovered.cmp(&b.uncovered))
                .then(probs[b.fault as usize].total_cmp(&probs[a.fault as usize]))
                .then(a.fault.cmp(&b.fault))
        });
        let k = self.candidates.len().min(top_k);
        for i in 0..k {
            let a = self.candidates[i];
            for j in (i + 1)..k {
                let b = self.candidates[j];
                // the uncovered parts must cancel and the covered parts must tile the residual
                if a.uncovered != b.uncovered || (a.covered + b.covered) as usize != residual.len() {
                    continue;
                }
                xor_sorted(g.signature(a.fault as usize), g.signature(b.fault as usize), &mut self.merged);
                if self.merged == residual {
                    return Some(PairMatch::Pair(a.fault.min(b.fault), a.fault.max(b.fault)));
                }
            }
        }
        None
    }

    #[cfg(test)]
    pub(crate) fn ranked(&self) -> Vec<u32> {
        self.candidates.iter().map(|c| c.fault).collect()
    }
}

pub(crate) fn xor_sorted(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}
