use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bbpeel::bbcode::{registry, registry_entry, stopping_distance, syndrome_code_generator, Basis, StoppingDistance};
use bbpeel::circuit::{build_memory_circuit, NoiseModel};
use bbpeel::decoder::{Decoder, PeelMode, PeelPredicate, Phase};
use bbpeel::dem::{export_dem, import_dem, FaultGraph};
use bbpeel::harness::{self, alloc::CountingAllocator, ExperimentConfig, Mode, RunSummary};
use bbpeel::sampler::{measure_alpha, Sampler};
use bbpeel::streaming::{ratio_study, StreamReport};
use bbpeel::theory::{classify_collisions, fit_gamma_eff, measure_peel_rate, predict_peel, TheoryParams};

#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator;

#[derive(Parser)]
#[command(name = "bbpeel", version, about = "Peeling decoder and peeling theory for bivariate bicycle codes")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Global {
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// Output file stem; `.csv` / `.json` are appended. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON experiment config; command-line flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Exit with status 2 when the verb's built-in acceptance check fails.
    #[arg(long, global = true)]
    check: bool,
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Args, Clone)]
struct Experiment {
    /// Registry name or inline `name l m A=.. B=..` spec.
    #[arg(long)]
    code: Option<String>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Physical error rate(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long)]
    mode: Option<PeelMode>,
    #[arg(long)]
    predicate: Option<PeelPredicate>,
}

#[derive(Subcommand)]
enum Verb {
    /// Show code parameters (all registry codes without --code).
    Code {
        #[arg(long)]
        code: Option<String>,
    },
    /// Emit the memory circuit.
    Circuit(Experiment),
    /// Emit the detector error model, or re-export one read with --import.
    Dem {
        #[command(flatten)]
        exp: Experiment,
        #[arg(long)]
        import: Option<PathBuf>,
    },
    /// Decode sampled shots and write per-shot records.
    Decode(Experiment),
    /// LER sweep over a p grid, optionally with the BP-only arm.
    Sweep {
        #[command(flatten)]
        exp: Experiment,
        #[arg(long)]
        bp_arm: bool,
    },
    /// Formula predictions against measured peel rates.
    Theory(Experiment),
    /// Collision classification of the fault graph.
    Collisions(Experiment),
    /// Short-window streaming against whole-block decoding.
    Stream {
        #[command(flatten)]
        exp: Experiment,
        /// Total rounds of the streaming arm.
        #[arg(long, default_value_t = 2)]
        stream_rounds: usize,
        #[arg(long, default_value_t = 12)]
        block_rounds: usize,
    },
    /// Latency of greedy and BP-only decoding on identical shots.
    Bench(Experiment),
    /// Simulated [[18,4,4]] memory experiment, greedy against BP-OSD.
    ReproKunlun,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("check failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Merges the optional config file with command-line values.
fn experiment(g: &Global, e: &Experiment, mode: Mode, default_p: &[f64], default_shots: u64) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(mode, "gross-144", 12, default_p.to_vec(), default_shots),
    };
    cfg.mode = mode;
    if let Some(c) = &e.code {
        cfg.code = c.clone();
    }
    if let Some(r) = e.rounds {
        cfg.rounds = r;
    }
    if !e.p.is_empty() {
        cfg.p = e.p.clone();
    }
    if let Some(s) = g.shots {
        cfg.shots = s;
    }
    if g.config.is_none() || g.seed != 1 {
        cfg.seed = g.seed;
    }
    if g.config.is_none() || g.threads != 1 {
        cfg.threads = g.threads;
    }
    if let Some(m) = e.mode {
        cfg.decoder.mode = m;
    }
    if let Some(pr) = e.predicate {
        cfg.decoder.predicate = pr;
    }
    if let Some(out) = &g.out {
        cfg.out.csv = Some(out.with_extension("csv"));
        cfg.out.json = Some(out.with_extension("json"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => harness::write_file(p, text).map_err(Into::into),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// CSV to `cfg.out.csv` (or stdout) and the JSON summary to `cfg.out.json`.
fn emit_both<T: serde::Serialize>(cfg: &ExperimentConfig, csv: &str, hashes: Vec<String>, results: &T) -> Result<()> {
    emit(cfg.out.csv.as_deref(), csv)?;
    if let Some(json) = &cfg.out.json {
        harness::write_file(json, &RunSummary::new(cfg, hashes, results).to_json()?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let g = &cli.global;
    match &cli.verb {
        Verb::Code { code } => {
            let entries = match code {
                Some(name) => vec![registry_entry(name).with_context(|| format!("unknown code '{name}'"))?],
                None => registry(),
            };
            let mut out = String::from("name,n,k,d_declared,d_s,w,spec\n");
            for e in entries {
                let code = e.build()?;
                let gen = syndrome_code_generator(&code, Basis::Z);
                let ds = match stopping_distance(&gen, 128, 2000, g.seed) {
                    Ok(StoppingDistance::Exact(d)) => d.to_string(),
                    Ok(StoppingDistance::Unknown) => "-".into(),
                    Err(e) => format!("≤{}", e.to_string().rsplit(' ').next().unwrap_or("?")),
                };
                out.push_str(&format!("{},{},{},{},{},{},{}\n", e.name, code.n, code.k, e.d, ds, code.w, e.spec_line()));
            }
            emit(g.out.as_deref(), &out)?;
            Ok(true)
        }
        Verb::Circuit(e) => {
            let cfg = experiment(g, e, Mode::Decode, &[0.001], 1)?;
            let circuit = build_memory_circuit(&cfg.build_code()?, cfg.rounds, Basis::Z, NoiseModel::uniform(cfg.p[0]))?;
            emit(g.out.as_deref(), &circuit.to_text())?;
            Ok(true)
        }
        Verb::Dem { exp, import } => {
            let dem = match import {
                Some(path) => import_dem(&fs::read_to_string(path).with_context(|| path.display().to_string())?)?,
                None => {
                    let cfg = experiment(g, exp, Mode::Decode, &[0.001], 1)?;
                    harness::memory_dem(&cfg.build_code()?, cfg.rounds, cfg.p[0])?
                }
            };
            log::info!("{} faults, {} detectors, hash {}", dem.len(), dem.num_detectors, dem.content_hash());
            emit(g.out.as_deref(), &export_dem(&dem))?;
            Ok(true)
        }
        Verb::Decode(e) => {
            let cfg = experiment(g, e, Mode::Decode, &[0.001], 1000)?;
            let code = cfg.build_code()?;
            let dem = harness::memory_dem(&code, cfg.rounds, cfg.p[0])?;
            let mut dec = Decoder::new(&dem, cfg.decoder);
            let mut sampler = Sampler::new(&dem, cfg.seed);
            let (mut trig, mut syn) = (Vec::new(), Vec::new());
            let mut csv = String::from("shot,phase,peeled,residual_w,obs_pred,obs_true,fail\n");
            for i in 0..cfg.shots {
                let truth = sampler.sample_into(i, &mut trig, &mut syn);
                let (phase, peeled, residual, pred) = match dec.decode(&syn) {
                    Ok(r) => (r.phase.as_str(), r.peel.peeled, r.residual_after_peel, Some(r.predicted_observables)),
                    Err(err) => {
                        log::warn!("shot {i}: {err}");
                        (Phase::Bp.as_str(), 0, syn.len() as u32, None)
                    }
                };
                csv.push_str(&format!(
                    "{i},{phase},{peeled},{residual},{},{truth},{}\n",
                    pred.map_or("-".into(), |m| m.to_string()),
                    (pred != Some(truth)) as u8
                ));
            }
            emit_both(&cfg, &csv, vec![dem.content_hash()], &cfg.shots)?;
            Ok(true)
        }
        Verb::Sweep { exp, bp_arm } => {
            let mut cfg = experiment(g, exp, Mode::Sweep, &[0.001, 0.002, 0.003, 0.005, 0.007], 10_000)?;
            cfg.bp_arm |= *bp_arm;
            let out = harness::run_sweep(&cfg)?;
            let hashes = out.points.iter().map(|p| p.greedy.dem_hash.clone()).collect();
            emit_both(&cfg, &harness::sweep_csv(&out.points), hashes, &out.points)?;
            if let Some(json) = &cfg.out.json {
                let lat: String = std::iter::once(harness::LatencyReport::csv_header().to_string())
                    .chain(out.latency.iter().map(|l| l.csv_row()))
                    .map(|l| l + "\n")
                    .collect();
                harness::write_file(&json.with_extension("latency.csv"), &lat)?;
            }
            let ok = out.points.iter().all(|pt| pt.bp_only.as_ref().map_or(true, |b| b.ler.overlaps(&pt.greedy.ler)));
            Ok(!g.check || ok)
        }
        Verb::Theory(e) => {
            let cfg = experiment(g, e, Mode::Theory, &[0.001, 0.002, 0.003], 20_000)?;
            let code = cfg.build_code()?;
            let mut rows = Vec::new();
            let mut csv = String::from("code,n,T,p,lambda,alpha,c,a0,predicted,measured,measured_lo,measured_hi,in_validity\n");
            let base = harness::memory_dem(&code, cfg.rounds, cfg.p[0])?;
            let fg = FaultGraph::new(&base);
            let coll = classify_collisions(&base, &fg, &cfg.decoder, false, cfg.threads);
            for &p in &cfg.p {
                let dem = harness::memory_dem(&code, cfg.rounds, p)?;
                let alpha = measure_alpha(&dem, cfg.shots.min(100_000), cfg.seed).alpha_hat;
                let params = TheoryParams::new(&dem, &fg, code.n, alpha, coll.a0);
                let m = measure_peel_rate(&dem, code.n, &cfg.decoder, cfg.shots, cfg.seed);
                let pred = predict_peel(code.n, p, cfg.rounds, &params);
                let rate = bbpeel::stats::Proportion::new(m.cleared, m.shots);
                csv.push_str(&format!(
                    "{},{},{},{p},{:.4},{:.4},{:.4},{:.4},{},{:.4},{:.4},{:.4},{}\n",
                    code.name,
                    code.n,
                    cfg.rounds,
                    params.lambda(code.n, p, cfg.rounds),
                    alpha,
                    params.c,
                    params.a0,
                    pred.as_ref().map_or("-".into(), |v| format!("{v:.4}")),
                    rate.estimate,
                    rate.lo,
                    rate.hi,
                    pred.is_ok()
                ));
                rows.push((m, params));
            }
            let pairs: Vec<_> = rows.iter().map(|(m, p)| (*m, p)).collect();
            let fit = fit_gamma_eff(&pairs).ok();
            if let Some(f) = &fit {
                log::info!("A_eff = {:.4} ± {:.4} (CV {:.2}%)", f.a_eff, f.a_eff_std, f.a_eff_cv * 100.0);
            }
            emit_both(&cfg, &csv, vec![base.content_hash()], &(rows, fit))?;
            Ok(true)
        }
        Verb::Collisions(e) => {
            let cfg = experiment(g, e, Mode::Collisions, &[0.001], 1)?;
            let code = cfg.build_code()?;
            let dem = harness::memory_dem(&code, cfg.rounds, cfg.p[0])?;
            let fg = FaultGraph::new(&dem);
            let report = classify_collisions(&dem, &fg, &cfg.decoder, false, cfg.threads);
            let mut csv = String::from("code,shared,pairs,resolved,resolved_rate\n");
            for (k, b) in &report.pairs_by_shared_count {
                csv.push_str(&format!("{},{k},{},{},{:.4}\n", code.name, b.count, b.resolved, b.resolved_rate()));
            }
            log::info!("{}: {} pairs, A0 = {:.4}", code.name, report.total_pairs, report.a0);
            emit_both(&cfg, &csv, vec![dem.content_hash()], &report)?;
            Ok(true)
        }
        Verb::Stream { exp, stream_rounds, block_rounds } => {
            let cfg = experiment(g, exp, Mode::Stream, &[0.001, 0.002, 0.003], 20_000)?;
            let mut cfg = cfg;
            if exp.code.is_none() && g.config.is_none() {
                cfg.code = "bb-32".into();
            }
            let code = cfg.build_code()?;
            let study =
                ratio_study(&[code], &cfg.p, cfg.shots, cfg.seed, *stream_rounds, *block_rounds, cfg.decoder)?;
            let mut csv = format!("{}\n", StreamReport::csv_header());
            for row in &study.rows {
                csv.push_str(&row.streaming.csv_row(Some(row.ratio)));
                csv.push('\n');
            }
            emit_both(&cfg, &csv, vec![], &study)?;
            let ok = (study.mean_ratio - 1.29).abs() <= 0.08;
            Ok(!g.check || ok)
        }
        Verb::Bench(e) => {
            let cfg = experiment(g, e, Mode::Bench, &[0.001], 10_000)?;
            let reports = harness::bench(&cfg)?;
            let mut csv = format!("{}\n", harness::LatencyReport::csv_header());
            for r in &reports {
                csv.push_str(&r.csv_row());
                csv.push('\n');
            }
            let hashes = cfg
                .p
                .iter()
                .map(|&p| Ok(harness::memory_dem(&cfg.build_code()?, cfg.rounds, p)?.content_hash()))
                .collect::<Result<Vec<_>>>()?;
            emit_both(&cfg, &csv, hashes, &reports)?;
            let ok = reports.iter().all(|r| r.allocation_free() == Some(true))
                && reports.iter().filter(|r| r.p <= 0.001).all(|r| r.speedup.unwrap_or(0.0) >= 20.0);
            Ok(!g.check || ok)
        }
        Verb::ReproKunlun => {
            let shots = g.shots.unwrap_or(20_000);
            if shots == 0 {
                bail!("shots must be ≥ 1");
            }
            let r = harness::kunlun_repro(shots, g.seed, g.threads)?;
            let mut csv = String::from("code,rounds,p,arm,ler_cycle,ler_cycle_lo,ler_cycle_hi,ler_total\n");
            for (arm, cyc, tot) in [("greedy", &r.greedy_cycle, &r.greedy.ler), ("bp", &r.bp_cycle, &r.bp_only.ler)] {
                csv.push_str(&format!(
                    "{},{},{},{arm},{:.5},{:.5},{:.5},{:.5}\n",
                    r.code, r.rounds, r.p, cyc.estimate, cyc.lo, cyc.hi, tot.estimate
                ));
            }
            emit(g.out.as_ref().map(|o| o.with_extension("csv")).as_deref(), &csv)?;
            if let Some(o) = &g.out {
                harness::write_file(&o.with_extension("json"), &serde_json::to_string_pretty(&r)?)?;
            }
            let ok = r.ordering_ok
                && (r.greedy_cycle.estimate - 0.0371).abs() <= 0.015
                && (r.bp_cycle.estimate - 0.0396).abs() <= 0.015;
            Ok(!g.check || ok)
        }
    }
}
