use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{alloc, memory_dem, ExperimentConfig, HarnessError};
use crate::decoder::{Decoder, DecoderConfig};
use crate::dem::Dem;
use crate::sampler::Sampler;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50: u64,
    pub p90: u64,
    pub p99: u64,
    pub mean: f64,
}

impl Percentiles {
    /// Nearest-rank percentiles of nanosecond durations.
    pub fn of(durations_ns: &[u64]) -> Self {
        if durations_ns.is_empty() {
            return Self::default();
        }
        let mut v = durations_ns.to_vec();
        v.sort_unstable();
        let at = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Self {
            p50: at(0.50),
            p90: at(0.90),
            p99: at(0.99),
            mean: v.iter().sum::<u64>() as f64 / v.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub code: String,
    pub p: f64,
    pub shots: u64,
    pub warmup: u64,
    pub workers: usize,
    pub greedy: Percentiles,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bp_only: Option<Percentiles>,
    /// BP-only p50 over greedy p50.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speedup: Option<f64>,
    /// Allocations seen across all measured peel-path calls; `None` when the
    /// counting allocator is not installed.
    pub peel_allocations: Option<u64>,
    /// Same for the full greedy decode.
    pub decode_allocations: Option<u64>,
    pub greedy_ns: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bp_ns: Option<Vec<u64>>,
}

impl LatencyReport {
    pub(super) fn from_durations(
        code: &str,
        p: f64,
        workers: usize,
        warmup: u64,
        greedy_ns: Vec<u64>,
        bp_ns: Option<Vec<u64>>,
        allocations: Option<(u64, u64)>,
    ) -> Self {
        let greedy = Percentiles::of(&greedy_ns);
        let bp_only = bp_ns.as_deref().map(Percentiles::of);
        Self {
            code: code.to_string(),
            p,
            shots: greedy_ns.len() as u64,
            warmup,
            workers,
            greedy,
            speedup: bp_only.map(|b| b.p50 as f64 / greedy.p50.max(1) as f64),
            bp_only,
            peel_allocations: allocations.map(|a| a.0),
            decode_allocations: allocations.map(|a| a.1),
            greedy_ns,
            bp_ns,
        }
    }

    /// `Some(true)` when instrumented and the peel path never allocated.
    pub fn allocation_free(&self) -> Option<bool> {
        self.peel_allocations.map(|a| a == 0)
    }

    pub fn csv_header() -> &'static str {
        "code,p,shots,greedy_p50_ns,greedy_p90_ns,greedy_p99_ns,bp_p50_ns,bp_p90_ns,bp_p99_ns,speedup,peel_allocations"
    }

    pub fn csv_row(&self) -> String {
        let bp = self.bp_only.map_or((String::new(), String::new(), String::new()), |b| {
            (b.p50.to_string(), b.p90.to_string(), b.p99.to_string())
        });
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.code,
            self.p,
            self.shots,
            self.greedy.p50,
            self.greedy.p90,
            self.greedy.p99,
            bp.0,
            bp.1,
            bp.2,
            self.speedup.map_or(String::new(), |s| format!("{s:.2}")),
            self.peel_allocations.map_or(String::new(), |a| a.to_string())
        )
    }
}

/// Single-worker latency benchmark on one DEM. Syndromes are sampled up
/// front so both arms see the identical stream and sampling is not timed.
pub fn bench_dem(
    dem: &Dem,
    code: &str,
    decoder: DecoderConfig,
    shots: u64,
    warmup: u64,
    seed: u64,
) -> Result<LatencyReport, HarnessError> {
    if shots == 0 {
        return Err(HarnessError::Config("shots must be ≥ 1".into()));
    }
    let mut sampler = Sampler::new(dem, seed);
    let mut triggered = Vec::new();
    let mut syndrome = Vec::new();
    let mut offsets = vec![0usize];
    let mut flat = Vec::new();
    for i in 0..shots {
        sampler.sample_into(i, &mut triggered, &mut syndrome);
        flat.extend_from_slice(&syndrome);
        offsets.push(flat.len());
    }
    let syn = |i: usize| &flat[offsets[i]..offsets[i + 1]];
    let n = shots as usize;

    let mut dec = Decoder::new(dem, decoder);
    for i in 0..warmup as usize {
        let s = syn(i % n);
        dec.decode(s)?;
        dec.decode_bp_only(s).ok();
    }

    let mut greedy_ns = Vec::with_capacity(n);
    let mut bp_ns = Vec::with_capacity(n);
    for i in 0..n {
        let start = Instant::now();
        black_box(dec.decode(syn(i))?);
        greedy_ns.push(start.elapsed().as_nanos() as u64);
    }
    for i in 0..n {
        let start = Instant::now();
        black_box(dec.decode_bp_only(syn(i)).ok());
        bp_ns.push(start.elapsed().as_nanos() as u64);
    }

    let (peel, peel_allocs) = alloc::count_allocations(|| {
        (0..n).try_for_each(|i| dec.peel_only(syn(i)).map(|s| { black_box(s); }))
    });
    peel?;
    let (full, decode_allocs) =
        alloc::count_allocations(|| (0..n).try_for_each(|i| dec.decode(syn(i)).map(|r| { black_box(r); })));
    full?;

    Ok(LatencyReport::from_durations(
        code,
        dem.provenance.p,
        1,
        warmup,
        greedy_ns,
        Some(bp_ns),
        peel_allocs.zip(decode_allocs),
    ))
}

/// One latency report per p of `config`.
pub fn bench(config: &ExperimentConfig) -> Result<Vec<LatencyReport>, HarnessError> {
    config.validate()?;
    let code = config.build_code()?;
    config
        .p
        .iter()
        .map(|&p| {
            let dem = memory_dem(&code, config.rounds, p)?;
            bench_dem(&dem, &code.name, config.decoder, config.shots, config.warmup, config.seed)
        })
        .collect()
}
