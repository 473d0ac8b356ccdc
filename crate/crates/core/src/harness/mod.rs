//! Experiment orchestration: configs, LER sweeps, latency benchmarks and
//! report output.

pub mod alloc;
mod bench;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::bbcode::{named_code, parse_code_spec, Basis, BbCode, CodeError};
use crate::circuit::{build_memory_circuit, CircuitError, NoiseModel};
use crate::decoder::{DecodeError, DecodeResult, Decoder, DecoderConfig, DecodingGraph, Phase};
use crate::dem::{build_dem, Dem, DemError};
use crate::sampler::Sampler;
use crate::stats::Proportion;
use crate::streaming::{per_cycle, StreamError};

pub use bench::{bench, bench_dem, Percentiles, LatencyReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Dem(#[from] DemError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Decode,
    Sweep,
    Theory,
    Collisions,
    Stream,
    Bench,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
}

/// Versioned JSON experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub mode: Mode,
    /// Registry name, or an inline `name l m A=.. B=..` spec line.
    pub code: String,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(deserialize_with = "one_or_many")]
    pub p: Vec<f64>,
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default)]
    pub decoder: DecoderConfig,
    /// Also decode every shot with BP+OSD alone.
    #[serde(default)]
    pub bp_arm: bool,
    #[serde(default = "default_warmup")]
    pub warmup: u64,
    #[serde(default)]
    pub out: OutputPaths,
}

fn default_rounds() -> usize {
    12
}

fn default_threads() -> usize {
    1
}

fn default_warmup() -> u64 {
    200
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(p) => vec![p],
        OneOrMany::Many(ps) => ps,
    })
}

impl ExperimentConfig {
    pub fn new(mode: Mode, code: &str, rounds: usize, p: Vec<f64>, shots: u64) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            mode,
            code: code.to_string(),
            rounds,
            p,
            shots,
            seed: 0,
            threads: 1,
            decoder: DecoderConfig::default(),
            bp_arm: false,
            warmup: default_warmup(),
            out: OutputPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.schema != SCHEMA_VERSION {
            return bad(format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema));
        }
        if self.shots == 0 {
            return bad("shots must be ≥ 1".into());
        }
        if self.p.is_empty() {
            return bad("p grid is empty".into());
        }
        if let Some(p) = self.p.iter().find(|p| !(0.0..=0.5).contains(*p)) {
            return bad(format!("p = {p} outside [0, 0.5]"));
        }
        if self.rounds == 0 {
            return bad("rounds must be ≥ 1".into());
        }
        if self.threads == 0 {
            return bad("threads must be ≥ 1".into());
        }
        if self.code.trim().is_empty() {
            return bad("code is empty".into());
        }
        Ok(())
    }

    pub fn build_code(&self) -> Result<BbCode, HarnessError> {
        Ok(resolve_code(&self.code)?)
    }
}

/// A registry name or an inline spec line.
pub fn resolve_code(code: &str) -> Result<BbCode, CodeError> {
    if code.contains('=') {
        parse_code_spec(code)
    } else {
        named_code(code)
    }
}

/// Z-basis memory DEM under uniform noise.
pub fn memory_dem(code: &BbCode, rounds: usize, p: f64) -> Result<Dem, HarnessError> {
    let circuit = build_memory_circuit(code, rounds, Basis::Z, NoiseModel::uniform(p))?;
    Ok(build_dem(&circuit)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    Greedy,
    BpOnly,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Greedy => "greedy",
            Arm::BpOnly => "bp",
        }
    }
}

/// Fraction of shots finished by each phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseFractions {
    pub peel: f64,
    pub pair: f64,
    pub bp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LerReport {
    pub code: String,
    pub rounds: usize,
    pub p: f64,
    pub arm: Arm,
    pub shots: u64,
    pub failures: u64,
    pub ler: Proportion,
    pub ler_per_cycle: f64,
    pub phases: PhaseFractions,
    /// Shots where the linear solve found no correction at all.
    pub solver_failures: u64,
    pub dem_hash: String,
}

impl LerReport {
    pub fn csv_header() -> &'static str {
        "code,rounds,p,arm,shots,failures,ler,ler_lo,ler_hi,ler_cycle,phase0,phase2,phase1,dem_hash"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.4},{:.4},{:.4},{}",
            self.code,
            self.rounds,
            self.p,
            self.arm.as_str(),
            self.shots,
            self.failures,
            self.ler.estimate,
            self.ler.lo,
            self.ler.hi,
            self.ler_per_cycle,
            self.phases.peel,
            self.phases.pair,
            self.phases.bp,
            self.dem_hash
        )
    }
}

/// Per-worker tallies for one arm.
#[derive(Debug, Clone, Default)]
struct Tally {
    failures: u64,
    phase: [u64; 3],
    solver_failures: u64,
    durations_ns: Vec<u64>,
}

impl Tally {
    fn record(&mut self, out: Result<DecodeResult, DecodeError>, truth: u64, ns: u64) -> Result<(), DecodeError> {
        match out {
            Ok(r) => {
                self.failures += (r.predicted_observables != truth) as u64;
                self.phase[match r.phase {
                    Phase::Peel => 0,
                    Phase::PairEnum => 1,
                    Phase::Bp => 2,
                }] += 1;
            }
            Err(DecodeError::SolverFailure) => {
                self.failures += 1;
                self.solver_failures += 1;
                self.phase[2] += 1;
            }
            Err(e) => return Err(e),
        }
        self.durations_ns.push(ns);
        Ok(())
    }

    fn merge(&mut self, other: Tally) {
        self.failures += other.failures;
        self.solver_failures += other.solver_failures;
        for (a, b) in self.phase.iter_mut().zip(other.phase) {
            *a += b;
        }
        self.durations_ns.extend(other.durations_ns);
    }

    fn report(&self, dem: &Dem, code: &str, arm: Arm, shots: u64) -> LerReport {
        let ler = Proportion::new(self.failures, shots);
        let frac = |k: u64| k as f64 / shots as f64;
        LerReport {
            code: code.to_string(),
            rounds: dem.provenance.rounds,
            p: dem.provenance.p,
            arm,
            shots,
            failures: self.failures,
            ler_per_cycle: per_cycle(ler.estimate, dem.provenance.rounds.max(1)),
            ler,
            phases: PhaseFractions { peel: frac(self.phase[0]), pair: frac(self.phase[1]), bp: frac(self.phase[2]) },
            solver_failures: self.solver_failures,
            dem_hash: dem.content_hash(),
        }
    }
}

fn run_range(
    dem: &Dem,
    graph: &Arc<DecodingGraph>,
    decoder: DecoderConfig,
    seed: u64,
    range: std::ops::Range<u64>,
    arms: &[Arm],
) -> Result<Vec<Tally>, DecodeError> {
    let mut dec = Decoder::with_graph(graph.clone(), decoder);
    let mut sampler = Sampler::new(dem, seed);
    let (mut triggered, mut syndrome) = (Vec::new(), Vec::new());
    let mut tallies = vec![Tally::default(); arms.len()];
    for t in &mut tallies {
        t.durations_ns.reserve((range.end - range.start) as usize);
    }
    for i in range {
        let truth = sampler.sample_into(i, &mut triggered, &mut syndrome);
        for (arm, tally) in arms.iter().zip(&mut tallies) {
            let start = Instant::now();
            let out = match arm {
                Arm::Greedy => dec.decode(&syndrome),
                Arm::BpOnly => dec.decode_bp_only(&syndrome),
            };
            tally.record(out, truth, start.elapsed().as_nanos() as u64)?;
        }
    }
    Ok(tallies)
}

/// Decodes `shots` sampled shots with each arm, partitioning shots across
/// `threads` workers. Counts do not depend on `threads`.
pub fn run_ler(
    dem: &Dem,
    code: &str,
    decoder: DecoderConfig,
    shots: u64,
    seed: u64,
    threads: usize,
    arms: &[Arm],
) -> Result<(Vec<LerReport>, Vec<Vec<u64>>), HarnessError> {
    if shots == 0 {
        return Err(HarnessError::Config("shots must be ≥ 1".into()));
    }
    let graph = Arc::new(DecodingGraph::new(dem));
    let threads = threads.clamp(1, shots as usize);
    let chunk = shots.div_ceil(threads as u64);
    let parts: Vec<Result<Vec<Tally>, DecodeError>> = if threads == 1 {
        vec![run_range(dem, &graph, decoder, seed, 0..shots, arms)]
    } else {
        thread::scope(|s| {
            let handles: Vec<_> = (0..threads as u64)
                .map(|w| {
                    let range = (w * chunk).min(shots)..((w + 1) * chunk).min(shots);
                    let graph = &graph;
                    s.spawn(move || run_range(dem, graph, decoder, seed, range, arms))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };
    let mut total = vec![Tally::default(); arms.len()];
    for part in parts {
        for (acc, t) in total.iter_mut().zip(part?) {
            acc.merge(t);
        }
    }
    let reports = arms.iter().zip(&total).map(|(&arm, t)| t.report(dem, code, arm, shots)).collect();
    Ok((reports, total.into_iter().map(|t| t.durations_ns).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: f64,
    pub greedy: LerReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bp_only: Option<LerReport>,
}

/// LER results plus the timings collected along the way. Timings are kept
/// apart so that the LER part is byte-reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub points: Vec<SweepPoint>,
    pub latency: Vec<LatencyReport>,
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput, HarnessError> {
    config.validate()?;
    let code = config.build_code()?;
    let arms: &[Arm] = if config.bp_arm { &[Arm::Greedy, Arm::BpOnly] } else { &[Arm::Greedy] };
    let mut points = Vec::new();
    let mut latency = Vec::new();
    for &p in &config.p {
        let dem = memory_dem(&code, config.rounds, p)?;
        let (mut reports, durations) =
            run_ler(&dem, &code.name, config.decoder, config.shots, config.seed, config.threads, arms)?;
        log::info!("{} p={p}: greedy LER {:.4}%", code.name, reports[0].ler.estimate * 100.0);
        let bp_only = (reports.len() == 2).then(|| reports.pop().unwrap());
        let greedy = reports.pop().unwrap();
        latency.push(LatencyReport::from_durations(
            &code.name,
            p,
            config.threads,
            0,
            durations[0].clone(),
            durations.get(1).cloned(),
            None,
        ));
        points.push(SweepPoint { p, greedy, bp_only });
    }
    Ok(SweepOutput { points, latency })
}

/// Placeholder noise point for the [[18,4,4]] memory experiment: uniform p
/// over a short memory run. The hardware experiment's device-specific
/// parameters are not used.
pub const KUNLUN_CODE: &str = "bb-18";
pub const KUNLUN_ROUNDS: usize = 2;
pub const KUNLUN_P: f64 = 0.011;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KunlunReport {
    pub code: String,
    pub rounds: usize,
    pub p: f64,
    pub greedy: LerReport,
    pub bp_only: LerReport,
    /// Greedy per-cycle LER with its Wilson bounds mapped to per-cycle.
    pub greedy_cycle: Proportion,
    pub bp_cycle: Proportion,
    /// Greedy not significantly worse than BP-OSD.
    pub ordering_ok: bool,
}

fn cycle_interval(p: &Proportion, rounds: usize) -> Proportion {
    Proportion {
        estimate: per_cycle(p.estimate, rounds),
        lo: per_cycle(p.lo, rounds),
        hi: per_cycle(p.hi, rounds),
        ..*p
    }
}

pub fn kunlun_repro(shots: u64, seed: u64, threads: usize) -> Result<KunlunReport, HarnessError> {
    kunlun_repro_at(KUNLUN_P, KUNLUN_ROUNDS, shots, seed, threads)
}

pub fn kunlun_repro_at(p: f64, rounds: usize, shots: u64, seed: u64, threads: usize) -> Result<KunlunReport, HarnessError> {
    let code = named_code(KUNLUN_CODE)?;
    let dem = memory_dem(&code, rounds, p)?;
    let (mut reports, _) =
        run_ler(&dem, &code.name, DecoderConfig::default(), shots, seed, threads, &[Arm::Greedy, Arm::BpOnly])?;
    let bp_only = reports.pop().unwrap();
    let greedy = reports.pop().unwrap();
    let greedy_cycle = cycle_interval(&greedy.ler, rounds);
    let bp_cycle = cycle_interval(&bp_only.ler, rounds);
    let ordering_ok = greedy.failures <= bp_only.failures || greedy.ler.overlaps(&bp_only.ler);
    Ok(KunlunReport { code: code.name, rounds, p, greedy, bp_only, greedy_cycle, bp_cycle, ordering_ok })
}

/// JSON summary wrapper: every report carries the config that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary<'a, T: Serialize> {
    pub schema: u32,
    pub config: &'a ExperimentConfig,
    pub dem_hashes: Vec<String>,
    pub results: &'a T,
}

impl<'a, T: Serialize> RunSummary<'a, T> {
    pub fn new(config: &'a ExperimentConfig, dem_hashes: Vec<String>, results: &'a T) -> Self {
        Self { schema: SCHEMA_VERSION, config, dem_hashes, results }
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(LerReport::csv_header());
    out.push('\n');
    for pt in points {
        for r in std::iter::once(&pt.greedy).chain(&pt.bp_only) {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.into(), source })?;
    }
    fs::write(path, contents).map_err(|source| HarnessError::Io { path: path.into(), source })
}

#[cfg(test)]
mod tests;
