use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::decoder::{Decoder, DecoderConfig, DecodingGraph, PeelMode};
use crate::dem::{Dem, FaultGraph};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCount {
    pub count: u64,
    pub resolved: u64,
}

impl BucketCount {
    pub fn resolved_rate(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.resolved as f64 / self.count as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub f1: u32,
    pub f2: u32,
    pub shared: u32,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub total_pairs: u64,
    /// Keyed by the exact number of shared detectors.
    pub pairs_by_shared_count: BTreeMap<usize, BucketCount>,
    /// Pairs whose XOR syndrome peeling resolves with the right logical action.
    pub false_pairs: u64,
    pub a0: f64,
    pub records: Option<Vec<PairRecord>>,
}

impl CollisionReport {
    pub fn bucket(&self, shared: usize) -> BucketCount {
        self.pairs_by_shared_count.get(&shared).copied().unwrap_or_default()
    }

    /// Fraction of all pairs falling in the shared-`k` bucket.
    pub fn bucket_fraction(&self, shared: usize) -> f64 {
        if self.total_pairs == 0 {
            0.0
        } else {
            self.bucket(shared).count as f64 / self.total_pairs as f64
        }
    }

    fn merge(&mut self, other: CollisionReport) {
        self.total_pairs += other.total_pairs;
        self.false_pairs += other.false_pairs;
        for (k, v) in other.pairs_by_shared_count {
            let e = self.pairs_by_shared_count.entry(k).or_default();
            e.count += v.count;
            e.resolved += v.resolved;
        }
        if let (Some(a), Some(b)) = (self.records.as_mut(), other.records) {
            a.extend(b);
        }
    }
}

fn shared_count(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut s) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += 1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

/// Classifies every detector-sharing fault pair by whether QueueBased
/// peeling of the pair's XOR syndrome clears it with the pair's combined
/// observable mask. `config.predicate` selects the peeling predicate; the
/// peel mode is always QueueBased. Work is split across `threads` workers.
pub fn classify_collisions(
    dem: &Dem,
    graph: &FaultGraph,
    config: &DecoderConfig,
    keep_records: bool,
    threads: usize,
) -> CollisionReport {
    let dg = Arc::new(DecodingGraph::new(dem));
    let threads = threads.clamp(1, dem.len().max(1));
    let chunk = dem.len().div_ceil(threads);
    let work = |lo: usize, hi: usize| -> CollisionReport {
        let mut dec = Decoder::with_graph(dg.clone(), *config);
        let mut report = CollisionReport {
            total_pairs: 0,
            pairs_by_shared_count: BTreeMap::new(),
            false_pairs: 0,
            a0: 0.0,
            records: keep_records.then(Vec::new),
        };
        for a in lo..hi {
            let fa = &dem.faults[a];
            for &b in graph.neighbors(a) {
                let b = b as usize;
                if b <= a {
                    continue;
                }
                let fb = &dem.faults[b];
                let (sig, mask) = dem.combine(&[a, b]);
                let out = dec.peel(&sig, PeelMode::QueueBased).expect("detectors in range");
                let resolved = out.residual.is_empty() && out.observables == mask;
                let shared = shared_count(&fa.detectors, &fb.detectors);
                let bucket = report.pairs_by_shared_count.entry(shared).or_default();
                bucket.count += 1;
                report.total_pairs += 1;
                if resolved {
                    bucket.resolved += 1;
                    report.false_pairs += 1;
                }
                if let Some(r) = report.records.as_mut() {
                    r.push(PairRecord {
                        f1: a as u32,
                        f2: b as u32,
                        shared: shared as u32,
                        resolved,
                    });
                }
            }
        }
        report
    };
    let mut parts: Vec<CollisionReport> = if threads == 1 {
        vec![work(0, dem.len())]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let lo = (t * chunk).min(dem.len());
                    let hi = ((t + 1) * chunk).min(dem.len());
                    let work = &work;
                    s.spawn(move || work(lo, hi))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };
    let mut report = parts.remove(0);
    for p in parts {
        report.merge(p);
    }
    report.a0 = if report.total_pairs == 0 {
        1.0
    } else {
        1.0 - report.false_pairs as f64 / report.total_pairs as f64
    };
    report
}
