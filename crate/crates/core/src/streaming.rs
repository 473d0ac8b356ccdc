//! Sliding-window decoding with commit-and-carry, and the short-window
//! versus whole-block LER comparison.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbcode::{Basis, BbCode};
use crate::circuit::{build_memory_circuit, CircuitError, NoiseModel};
use crate::decoder::{DecodeError, Decoder, DecoderConfig, DecodingGraph, Phase};
use crate::dem::{build_dem, Dem, DemError};
use crate::sampler::Sampler;
use crate::stats::{mean_std, Proportion};

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("window starting at layer {start} has {actual} detectors, expected {expected}")]
    WindowDemMismatch { start: usize, expected: usize, actual: usize },
    #[error("invalid streaming configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Dem(#[from] DemError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamingConfig {
    pub window_rounds: usize,
    pub commit_rounds: usize,
    pub total_rounds: usize,
    pub p: f64,
    pub basis: Basis,
    pub decoder: DecoderConfig,
}

impl StreamingConfig {
    pub fn two_shot(total_rounds: usize, p: f64) -> Self {
        Self {
            window_rounds: 2,
            commit_rounds: 1,
            total_rounds,
            p,
            basis: Basis::Z,
            decoder: DecoderConfig::default(),
        }
    }

    /// A single window spanning every detector layer, i.e. whole-block decoding.
    pub fn whole_block(total_rounds: usize, p: f64) -> Self {
        Self {
            window_rounds: total_rounds + 1,
            ..Self::two_shot(total_rounds, p)
        }
    }

    fn validate(&self) -> Result<(), StreamError> {
        if self.total_rounds == 0 || self.window_rounds == 0 {
            return Err(StreamError::Config("rounds must be positive".into()));
        }
        if self.commit_rounds == 0 || (self.commit_rounds >= self.window_rounds && self.window_rounds <= self.total_rounds) {
            return Err(StreamError::Config(format!(
                "need 1 ≤ commit_rounds < W, got commit_rounds = {} and W = {}",
                self.commit_rounds, self.window_rounds
            )));
        }
        if self.window_rounds > self.total_rounds + 1 {
            return Err(StreamError::Config("window longer than the stream".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamReport {
    pub code: String,
    pub p: f64,
    pub window_rounds: usize,
    pub total_rounds: usize,
    pub shots: u64,
    pub ler_total: Proportion,
    pub ler_per_cycle: f64,
    /// Fraction of windows cleared by peeling alone.
    pub peel_fraction: f64,
    /// Fraction of shots in which every window was cleared by peeling.
    pub shot_peel_fraction: f64,
    pub windows_processed: u64,
    /// Windows whose committed layers still had active detectors after commit.
    pub boundary_failures: u64,
}

impl StreamReport {
    pub fn csv_header() -> &'static str {
        "code,p,W,ler_total,ler_cycle,peel_frac,ratio_vs_T12"
    }

    pub fn csv_row(&self, ratio: Option<f64>) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.4},{}",
            self.code,
            self.p,
            self.window_rounds,
            self.ler_total.estimate,
            self.ler_per_cycle,
            self.peel_fraction,
            ratio.map_or(String::new(), |r| format!("{r:.4}"))
        )
    }
}

/// `1 − (1 − L)^(1/T)`.
pub fn per_cycle(ler_total: f64, rounds: usize) -> f64 {
    1.0 - (1.0 - ler_total).powf(1.0 / rounds as f64)
}

#[derive(Debug, Clone, PartialEq)]
struct WindowFault {
    /// Full signature relative to the window's first detector.
    full: Vec<u32>,
    observables: u64,
    commit: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Template {
    dem_faults: Vec<(u64, Vec<u32>)>,
    faults: Vec<WindowFault>,
    num_detectors: usize,
}

#[derive(Debug, Clone, Copy)]
struct WindowPlan {
    det_lo: usize,
    det_hi: usize,
    template: usize,
}

/// Per-shot window outcome counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ShotOutcome {
    pub observables: u64,
    pub windows: u32,
    pub peeled_windows: u32,
    pub boundary_failures: u32,
}

/// Streaming decoder over a full-length memory DEM. Windows with identical
/// restricted content share one decoder.
#[derive(Debug, Clone)]
pub struct StreamDecoder {
    plans: Vec<WindowPlan>,
    templates: Vec<Template>,
    decoders: Vec<Decoder>,
    eff: Vec<u8>,
    touched: Vec<u32>,
    local: Vec<u32>,
}

impl StreamDecoder {
    pub fn new(dem: &Dem, config: &StreamingConfig) -> Result<Self, StreamError> {
        config.validate()?;
        let nc = dem.provenance.checks_per_round;
        if nc == 0 || dem.num_detectors % nc != 0 {
            return Err(StreamError::Config("DEM lacks a per-round detector layout".into()));
        }
        let layers = dem.num_detectors / nc;
        if layers != config.total_rounds + 1 {
            return Err(StreamError::WindowDemMismatch {
                start: 0,
                expected: (config.total_rounds + 1) * nc,
                actual: dem.num_detectors,
            });
        }
        let mut plans = Vec::new();
        let mut templates: Vec<Template> = Vec::new();
        let mut s = 0;
        loop {
            let last = s + config.window_rounds >= layers;
            let e = if last { layers } else { s + config.window_rounds };
            let template = restrict(dem, nc, s, e, if last { e } else { s + config.commit_rounds });
            let expected = (e - s) * nc;
            if template.num_detectors != expected {
                return Err(StreamError::WindowDemMismatch { start: s, expected, actual: template.num_detectors });
            }
            let idx = match templates.iter().position(|t| *t == template) {
                Some(i) => i,
                None => {
                    templates.push(template);
                    templates.len() - 1
                }
            };
            plans.push(WindowPlan { det_lo: s * nc, det_hi: e * nc, template: idx });
            if last {
                break;
            }
            s += config.commit_rounds;
        }
        let mut decoders = Vec::with_capacity(templates.len());
        for t in &templates {
            let wdem = Dem::from_mechanisms(
                t.num_detectors,
                dem.num_observables,
                t.dem_faults.iter().map(|(p, sig)| (f64::from_bits(*p), sig.clone(), 0u64)),
            )?;
            decoders.push(Decoder::with_graph(Arc::new(DecodingGraph::new(&wdem)), config.decoder));
        }
        // window decoders see zero observable masks; committed masks come from the templates
        Ok(Self {
            plans,
            templates,
            decoders,
            eff: vec![0; dem.num_detectors],
            touched: Vec::with_capacity(dem.num_detectors),
            local: Vec::with_capacity(dem.num_detectors),
        })
    }

    pub fn num_windows(&self) -> usize {
        self.plans.len()
    }

    /// Number of distinct window DEMs (boundary variants plus the bulk one).
    pub fn num_templates(&self) -> usize {
        self.templates.len()
    }

    fn flip(&mut self, d: usize) {
        if self.eff[d] == 0 {
            self.touched.push(d as u32);
        }
        self.eff[d] ^= 1;
    }

    /// Decodes one shot given its sparse full-stream syndrome.
    pub fn decode(&mut self, syndrome: &[u32]) -> Result<ShotOutcome, StreamError> {
        for &d in &self.touched {
            self.eff[d as usize] = 0;
        }
        self.touched.clear();
        for &d in syndrome {
            self.flip(d as usize);
        }
        let mut out = ShotOutcome::default();
        for w in 0..self.plans.len() {
            let plan = self.plans[w];
            self.local.clear();
            for d in plan.det_lo..plan.det_hi {
                if self.eff[d] == 1 {
                    self.local.push((d - plan.det_lo) as u32);
                }
            }
            let dec = &mut self.decoders[plan.template];
            let r = dec.decode(&self.local)?;
            out.windows += 1;
            out.peeled_windows += (r.phase == Phase::Peel) as u32;
            let tmpl = &self.templates[plan.template];
            let mut commit_hi = plan.det_lo;
            for &f in dec.correction() {
                let wf = &tmpl.faults[f as usize];
                if !wf.commit {
                    continue;
                }
                out.observables ^= wf.observables;
                for &d in &wf.full {
                    let g = plan.det_lo + d as usize;
                    if self.eff[g] == 0 {
                        self.touched.push(g as u32);
                    }
                    self.eff[g] ^= 1;
                }
            }
            if let Some(next) = self.plans.get(w + 1) {
                commit_hi = next.det_lo;
            } else {
                commit_hi = commit_hi.max(plan.det_hi);
            }
            if (plan.det_lo..commit_hi).any(|d| self.eff[d] == 1) {
                out.boundary_failures += 1;
            }
        }
        Ok(out)
    }
}

/// Restricts `dem` to detector layers `[s, e)`: faults whose first layer is
/// in range, signatures truncated to the window, and faults with identical
/// truncation and observable mask merged (the most probable member
/// represents the group). Faults whose
/// first layer is below `commit_end` are committed by the window.
fn restrict(dem: &Dem, nc: usize, s: usize, e: usize, commit_end: usize) -> Template {
    let (lo, hi) = ((s * nc) as u32, (e * nc) as u32);
    struct Group {
        p: f64,
        best_p: f64,
        rep: usize,
    }
    let mut groups: BTreeMap<(Vec<u32>, u64), Group> = BTreeMap::new();
    for f in &dem.faults {
        let first = f.detectors[0];
        if first < lo || first >= hi {
            continue;
        }
        let trunc: Vec<u32> = f.detectors.iter().filter(|&&d| d < hi).map(|&d| d - lo).collect();
        let g = groups.entry((trunc, f.observables)).or_insert(Group { p: 0.0, best_p: -1.0, rep: f.id });
        g.p = g.p * (1.0 - f.probability) + f.probability * (1.0 - g.p);
        if f.probability > g.best_p {
            g.best_p = f.probability;
            g.rep = f.id;
        }
    }
    let mut entries: Vec<((Vec<u32>, u64), Group)> = groups.into_iter().collect();
    entries.sort_by(|(a, _), (b, _)| a.0[0].cmp(&b.0[0]).then(a.0.len().cmp(&b.0.len())).then(a.cmp(b)));
    let mut dem_faults = Vec::with_capacity(entries.len());
    let mut faults = Vec::with_capacity(entries.len());
    for ((trunc, _), g) in entries {
        let rep = &dem.faults[g.rep];
        faults.push(WindowFault {
            full: rep.detectors.iter().map(|&d| d - lo).collect(),
            observables: rep.observables,
            commit: (rep.detectors[0] as usize) < commit_end * nc,
        });
        dem_faults.push((g.p.to_bits(), trunc));
    }
    Template { dem_faults, faults, num_detectors: (e - s) * nc }
}

/// Builds the memory DEM of `config` for `code`.
pub fn stream_dem(code: &BbCode, config: &StreamingConfig) -> Result<Dem, StreamError> {
    let circuit = build_memory_circuit(code, config.total_rounds, config.basis, NoiseModel::uniform(config.p))?;
    Ok(build_dem(&circuit)?)
}

/// Samples `shots` memory experiments and decodes them window by window.
pub fn stream_decode(code: &BbCode, config: &StreamingConfig, shots: u64, seed: u64) -> Result<StreamReport, StreamError> {
    let dem = stream_dem(code, config)?;
    stream_decode_dem(&dem, &code.name, config, shots, seed)
}

pub fn stream_decode_dem(
    dem: &Dem,
    code_name: &str,
    config: &StreamingConfig,
    shots: u64,
    seed: u64,
) -> Result<StreamReport, StreamError> {
    if shots == 0 {
        return Err(StreamError::Config("shots must be ≥ 1".into()));
    }
    let mut dec = StreamDecoder::new(dem, config)?;
    let mut sampler = Sampler::new(dem, seed);
    let (mut triggered, mut syndrome) = (Vec::new(), Vec::new());
    let (mut failures, mut windows, mut peeled, mut shot_peeled, mut boundary) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for i in 0..shots {
        let truth = sampler.sample_into(i, &mut triggered, &mut syndrome);
        let out = dec.decode(&syndrome)?;
        failures += (out.observables != truth) as u64;
        windows += out.windows as u64;
        peeled += out.peeled_windows as u64;
        shot_peeled += (out.peeled_windows == out.windows) as u64;
        boundary += out.boundary_failures as u64;
    }
    let ler_total = Proportion::new(failures, shots);
    Ok(StreamReport {
        code: code_name.to_string(),
        p: config.p,
        window_rounds: config.window_rounds.min(config.total_rounds + 1),
        total_rounds: config.total_rounds,
        shots,
        ler_per_cycle: per_cycle(ler_total.estimate, config.total_rounds),
        ler_total,
        peel_fraction: peeled as f64 / windows as f64,
        shot_peel_fraction: shot_peeled as f64 / shots as f64,
        windows_processed: windows,
        boundary_failures: boundary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub code: String,
    pub p: f64,
    pub streaming: StreamReport,
    pub whole_block: StreamReport,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStudy {
    pub rows: Vec<RatioRow>,
    pub mean_ratio: f64,
    pub std_ratio: f64,
}

/// Per-cycle LER of two-round-window streaming over `stream_rounds` rounds
/// divided by that of whole-block decoding over `block_rounds` rounds.
pub fn ratio_study(
    codes: &[BbCode],
    p_grid: &[f64],
    shots: u64,
    seed: u64,
    stream_rounds: usize,
    block_rounds: usize,
    decoder: DecoderConfig,
) -> Result<RatioStudy, StreamError> {
    let mut rows = Vec::new();
    for code in codes {
        for &p in p_grid {
            let s_cfg = StreamingConfig { decoder, ..StreamingConfig::two_shot(stream_rounds, p) };
            let b_cfg = StreamingConfig { decoder, ..StreamingConfig::whole_block(block_rounds, p) };
            let streaming = stream_decode(code, &s_cfg, shots, seed)?;
            let whole_block = stream_decode(code, &b_cfg, shots, seed)?;
            let ratio = streaming.ler_per_cycle / whole_block.ler_per_cycle;
            rows.push(RatioRow { code: code.name.clone(), p, streaming, whole_block, ratio });
        }
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).filter(|r| r.is_finite()).collect();
    let (mean_ratio, std_ratio) = mean_std(&ratios);
    Ok(RatioStudy { rows, mean_ratio, std_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbcode::named_code;

    #[test]
    fn zero_noise_stream_is_clean() {
        let code = named_code("bb-18").unwrap();
        let cfg = StreamingConfig::two_shot(6, 0.0);
        let dem = stream_dem(&code, &cfg).unwrap();
        assert!(dem.is_empty());
        let mut dec = StreamDecoder::new(&dem, &cfg).unwrap();
        let out = dec.decode(&[]).unwrap();
        assert_eq!(out.observables, 0);
        assert_eq!(out.windows as usize, dec.num_windows());
        assert_eq!(out.peeled_windows, out.windows);
    }

    #[test]
    fn window_layout_and_reuse() {
        let code = named_code("bb-32").unwrap();
        let cfg = StreamingConfig::two_shot(12, 1e-3);
        let dem = stream_dem(&code, &cfg).unwrap();
        let dec = StreamDecoder::new(&dem, &cfg).unwrap();
        // 13 detector layers, two-layer windows with stride one
        assert_eq!(dec.num_windows(), 12);
        // first, bulk, last-but-one and last windows
        assert!(dec.num_templates() <= 4, "{}", dec.num_templates());
    }

    #[test]
    fn whole_block_window_matches_plain_decoding() {
        let code = named_code("bb-18").unwrap();
        let cfg = StreamingConfig::whole_block(4, 2e-3);
        let dem = stream_dem(&code, &cfg).unwrap();
        let mut stream = StreamDecoder::new(&dem, &cfg).unwrap();
        assert_eq!(stream.num_windows(), 1);
        let mut plain = Decoder::new(&dem, cfg.decoder);
        let mut sampler = Sampler::new(&dem, 1);
        let (mut tr, mut sy) = (Vec::new(), Vec::new());
        for i in 0..300 {
            sampler.sample_into(i, &mut tr, &mut sy);
            let a = stream.decode(&sy).unwrap().observables;
            let b = plain.decode(&sy).unwrap().predicted_observables;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_faults_are_corrected_by_streaming() {
        let code = named_code("gross-72").unwrap();
        let cfg = StreamingConfig::two_shot(6, 1e-3);
        let dem = stream_dem(&code, &cfg).unwrap();
        let mut dec = StreamDecoder::new(&dem, &cfg).unwrap();
        for f in dem.faults.iter().step_by(11) {
            let out = dec.decode(&f.detectors).unwrap();
            assert_eq!(out.observables, f.observables, "fault {}", f.id);
            assert_eq!(out.boundary_failures, 0);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let code = named_code("bb-18").unwrap();
        let dem = stream_dem(&code, &StreamingConfig::two_shot(4, 1e-3)).unwrap();
        let bad = StreamingConfig { commit_rounds: 2, ..StreamingConfig::two_shot(4, 1e-3) };
        assert!(matches!(StreamDecoder::new(&dem, &bad), Err(StreamError::Config(_))));
        let other = StreamingConfig::two_shot(6, 1e-3);
        assert!(matches!(StreamDecoder::new(&dem, &other), Err(StreamError::WindowDemMismatch { .. })));
        assert!(stream_decode_dem(&dem, "x", &StreamingConfig::two_shot(4, 1e-3), 0, 1).is_err());
        assert!((per_cycle(0.0, 12)).abs() < 1e-15);
    }
}
