use super::*;

fn sweep_config(shots: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Mode::Sweep, "bb-18", 3, vec![0.004], shots);
    cfg.seed = 9;
    cfg.bp_arm = true;
    cfg
}

#[test]
fn config_rejects_zero_shots_and_empty_grid() {
    let cfg = ExperimentConfig::new(Mode::Sweep, "gross-144", 12, vec![0.001], 0);
    assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
    let cfg = ExperimentConfig::new(Mode::Sweep, "gross-144", 12, vec![], 10);
    assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
    let mut cfg = ExperimentConfig::new(Mode::Sweep, "gross-144", 12, vec![0.001], 10);
    cfg.schema = 2;
    assert!(cfg.validate().is_err());
}

#[test]
fn config_json_accepts_scalar_p_and_defaults() {
    let cfg = ExperimentConfig::from_json(r#"{"schema": 1, "mode": "bench", "code": "gross-144", "p": 0.001, "shots": 5}"#)
        .unwrap();
    assert_eq!(cfg.p, vec![0.001]);
    assert_eq!(cfg.rounds, 12);
    assert_eq!(cfg.threads, 1);
    assert_eq!(cfg.decoder, DecoderConfig::default());
    let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
    assert!(ExperimentConfig::from_json(r#"{"schema": 1, "mode": "sweep", "code": "x", "p": [], "shots": 5}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"schema": 1, "mode": "sweep", "code": "x", "p": 0.1, "shots": 5, "typo": 1}"#)
        .is_err());
}

#[test]
fn inline_code_specs_resolve() {
    let code = resolve_code("mine 3 3 A=1+x+y B=1+y+x^2*y").unwrap();
    assert_eq!(code.n, 18);
    assert!(resolve_code("no-such-code").is_err());
}

#[test]
fn sweep_counts_do_not_depend_on_workers() {
    let one = run_sweep(&sweep_config(600)).unwrap();
    let mut cfg = sweep_config(600);
    cfg.threads = 3;
    let three = run_sweep(&cfg).unwrap();
    assert_eq!(one.points, three.points);
    let pt = &one.points[0];
    assert!(pt.greedy.failures > 0);
    let ph = pt.greedy.phases;
    assert!((ph.peel + ph.pair + ph.bp - 1.0).abs() < 1e-12);
    assert_eq!(pt.bp_only.as_ref().unwrap().phases.bp, 1.0);
    assert!(pt.greedy.ler.lo <= pt.greedy.ler.estimate && pt.greedy.ler.estimate <= pt.greedy.ler.hi);
    assert_eq!(one.latency[0].shots, 600);
    assert!(one.latency[0].speedup.is_some());
}

#[test]
fn sweep_output_is_reproducible() {
    let cfg = sweep_config(200);
    let a = run_sweep(&cfg).unwrap();
    let b = run_sweep(&cfg).unwrap();
    let text = |o: &SweepOutput| RunSummary::new(&cfg, vec![], &o.points).to_json().unwrap();
    assert_eq!(text(&a), text(&b));
    assert_eq!(sweep_csv(&a.points), sweep_csv(&b.points));
    assert_eq!(sweep_csv(&a.points).lines().count(), 3);
}

#[test]
fn noiseless_kunlun_point_has_no_errors() {
    let r = kunlun_repro_at(0.0, 3, 50, 1, 1).unwrap();
    assert_eq!((r.greedy.failures, r.bp_only.failures), (0, 0));
    assert!(r.ordering_ok);
    assert_eq!(r.greedy_cycle.estimate, 0.0);
}

#[test]
fn percentiles_are_ordered() {
    let d: Vec<u64> = (1..=1000).rev().collect();
    let p = Percentiles::of(&d);
    assert_eq!((p.p50, p.p90, p.p99), (500, 900, 990));
    assert_eq!(Percentiles::of(&[]), Percentiles::default());
}

#[test]
fn bench_reports_both_arms() {
    let code = named_code("bb-18").unwrap();
    let dem = memory_dem(&code, 3, 0.003).unwrap();
    let r = bench_dem(&dem, "bb-18", DecoderConfig::default(), 100, 10, 4).unwrap();
    assert_eq!(r.greedy_ns.len(), 100);
    assert!(r.greedy.p50 <= r.greedy.p90 && r.greedy.p90 <= r.greedy.p99);
    let bp = r.bp_only.unwrap();
    assert!(bp.p50 <= bp.p90 && bp.p90 <= bp.p99);
    // the unit-test binary does not install the counting allocator
    assert_eq!(r.allocation_free(), None);
}
