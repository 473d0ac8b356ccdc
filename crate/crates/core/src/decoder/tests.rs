use super::*;
use crate::bbcode::{named_code, Basis};
use crate::circuit::{build_memory_circuit, NoiseModel};
use crate::dem::build_dem;
use crate::sampler::Sampler;
use proptest::prelude::*;

fn memory(name: &str, rounds: usize, p: f64) -> Dem {
    let code = named_code(name).unwrap();
    build_dem(&build_memory_circuit(&code, rounds, Basis::Z, NoiseModel::uniform(p)).unwrap()).unwrap()
}

fn xor_into(acc: &mut Vec<u32>, sig: &[u32]) {
    let mut out = Vec::new();
    pairs::xor_sorted(acc, sig, &mut out);
    *acc = out;
}

#[test]
fn empty_syndrome_is_phase_zero() {
    let dem = memory("bb-18", 3, 1e-3);
    let mut dec = Decoder::new(&dem, DecoderConfig::default());
    let r = dec.decode(&[]).unwrap();
    assert_eq!(r.phase, Phase::Peel);
    assert_eq!(r.predicted_observables, 0);
    assert!(dec.correction().is_empty());
    let out = dec.peel(&[], PeelMode::QueueBased).unwrap();
    assert!(out.chosen.is_empty() && out.residual.is_empty());
}

#[test]
fn isolated_fault_peels_in_one_pass() {
    let dem = memory("gross-144", 3, 1e-3);
    let mut dec = Decoder::new(&dem, DecoderConfig::default());
    for f in [0usize, 17, 500, dem.len() - 1] {
        let out = dec.peel(&dem.faults[f].detectors, PeelMode::QueueBased).unwrap();
        assert_eq!(out.chosen, vec![f as u32]);
        assert!(out.residual.is_empty());
        assert_eq!(out.stats.passes, 1);
        assert_eq!(out.observables, dem.faults[f].observables);
    }
}

#[test]
fn shared_two_pairs_resolve_with_mask() {
    let dem = memory("gross-144", 12, 1e-3);
    let mut dec = Decoder::new(&dem, DecoderConfig::default());
    let mut checked = 0;
    'outer: for a in &dem.faults {
        for b in &dem.faults[a.id + 1..] {
            if b.detectors[0] > a.detectors[2.min(a.detectors.len() - 1)] {
                break;
            }
            let shared = a.detectors.iter().filter(|d| b.detectors.contains(d)).count();
            if shared == 2 && a.weight() == 3 && b.weight() == 3 {
                let (sig, mask) = dem.combine(&[a.id, b.id]);
                let out = dec.peel(&sig, PeelMode::QueueBased).unwrap();
                assert!(out.residual.is_empty());
                assert_eq!(out.observables, mask);
                checked += 1;
                if checked == 200 {
                    break 'outer;
                }
            }
        }
    }
    assert_eq!(checked, 200);
}

#[test]
fn strict_modes_agree_and_local_modes_are_ordered() {
    let dem = memory("gross-72", 6, 3e-3);
    let mut sampler = Sampler::new(&dem, 11);
    let graph = Arc::new(DecodingGraph::new(&dem));
    let mut decs: Vec<Decoder> = [PeelPredicate::Strict, PeelPredicate::Local]
        .into_iter()
        .map(|predicate| Decoder::with_graph(graph.clone(), DecoderConfig { predicate, ..Default::default() }))
        .collect();
    let (mut tr, mut sy) = (Vec::new(), Vec::new());
    let mut local_clears = [0; 3];
    for i in 0..300 {
        sampler.sample_into(i, &mut tr, &mut sy);
        let strict: Vec<PeelOutcome> = [PeelMode::SinglePass, PeelMode::QueueBased, PeelMode::BatchIterative]
            .iter()
            .map(|&m| {
                let mut o = decs[0].peel(&sy, m).unwrap();
                o.chosen.sort_unstable();
                o
            })
            .collect();
        assert_eq!(strict[0].chosen, strict[1].chosen);
        assert_eq!(strict[1].chosen, strict[2].chosen);
        assert_eq!(strict[0].residual, strict[2].residual);
        for (k, m) in [PeelMode::SinglePass, PeelMode::QueueBased, PeelMode::BatchIterative].iter().enumerate() {
            if decs[1].peel(&sy, *m).unwrap().residual.is_empty() {
                local_clears[k] += 1;
            }
        }
    }
    assert!(local_clears[0] <= local_clears[1], "{local_clears:?}");
}

#[test]
fn pair_enumeration_finds_single_and_declines_heavy() {
    let dem = memory("bb-18", 3, 1e-3);
    let mut dec = Decoder::new(&dem, DecoderConfig::default());
    let f = &dem.faults[5];
    let found = dec.enumerate_pairs(&f.detectors).unwrap();
    match found {
        PairMatch::Single(g) => assert_eq!(dem.faults[g as usize].detectors, f.detectors),
        other => panic!("expected a single, got {other:?}"),
    }
    let heavy: Vec<u32> = (0..7).collect();
    assert_eq!(dec.enumerate_pairs(&heavy), None);
}

#[test]
fn pair_enumeration_finds_constructed_pair() {
    let dem = memory("gross-72", 3, 1e-3);
    let mut dec = Decoder::new(&dem, DecoderConfig::default());
    let mut found = 0;
    for a in (0..dem.len()).step_by(37) {
        for b in (a + 1..dem.len()).step_by(53) {
            let (sig, _) = dem.combine(&[a, b]);
            if sig.is_empty() || sig.len() > 6 {
                continue;
            }
            // the signature must not be explained by a single fault
            if dem.faults.iter().any(|f| f.detectors == sig) {
                continue;
            }
            let Some(PairMatch::Pair(x, y)) = dec.enumerate_pairs(&sig) else {
                panic!("pair {a},{b} not found");
            };
            let (s2, _) = dem.combine(&[x as usize, y as usize]);
            assert_eq!(s2, sig);
            // oracle: both members of the true pair rank within the top 60
            let ranked = dec.pairs.ranked();
            let pos = |f: usize| ranked.iter().position(|&g| g as usize == f).unwrap();
            assert!(pos(a) < 60 && pos(b) < 60);
            found += 1;
        }
    }
    assert!(found > 20);
}

#[test]
fn bp_osd_explains_single_faults() {
    let dem = memory("bb-18", 3, 1e-3);
    let mut dec = Decoder::new(&dem, DecoderConfig::default());
    assert!(dec.bp_osd(&[]).unwrap().is_empty());
    for f in dem.faults.iter().step_by(7) {
        let sol = dec.bp_osd(&f.detectors).unwrap();
        let (sig, mask) = dem.combine(&sol.iter().map(|&x| x as usize).collect::<Vec<_>>());
        assert_eq!(sig, f.detectors);
        assert_eq!(mask, f.observables);
    }
}

#[test]
fn osd_path_satisfies_syndrome() {
    let dem = memory("gross-72", 3, 5e-3);
    let mut dec = Decoder::new(&dem, DecoderConfig { bp_iters: 1, ..Default::default() });
    let mut sampler = Sampler::new(&dem, 5);
    let (mut tr, mut sy) = (Vec::new(), Vec::new());
    let mut osd_runs = 0;
    for i in 0..200 {
        sampler.sample_into(i, &mut tr, &mut sy);
        let sol = dec.bp_osd(&sy).unwrap();
        osd_runs += dec.bp.used_osd as usize;
        let (sig, _) = dem.combine(&sol.iter().map(|&x| x as usize).collect::<Vec<_>>());
        assert_eq!(sig, sy);
    }
    assert!(osd_runs > 0);
}

#[test]
fn out_of_range_detector_is_rejected() {
    let dem = memory("bb-18", 2, 1e-3);
    let mut dec = Decoder::new(&dem, DecoderConfig::default());
    assert_eq!(
        dec.decode(&[dem.num_detectors as u32]),
        Err(DecodeError::DetectorOutOfRange(dem.num_detectors as u32))
    );
    assert!(matches!(dec.decode_dense(&[0]), Err(DecodeError::SyndromeLength { .. })));
}

#[test]
fn corrections_reproduce_the_syndrome() {
    let dem = memory("gross-72", 6, 2e-3);
    let mut dec = Decoder::new(&dem, DecoderConfig::default());
    let mut sampler = Sampler::new(&dem, 9);
    let (mut tr, mut sy) = (Vec::new(), Vec::new());
    for i in 0..300 {
        let truth = sampler.sample_into(i, &mut tr, &mut sy);
        let r = dec.decode(&sy).unwrap();
        let (sig, mask) = dem.combine(&dec.correction().iter().map(|&x| x as usize).collect::<Vec<_>>());
        assert_eq!(sig, sy);
        assert_eq!(mask, r.predicted_observables);
        let _ = truth;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn peeling_is_sound(faults in proptest::collection::vec(0usize..468, 0..12), mode in 0usize..3, local: bool) {
        let dem = memory("bb-18", 3, 1e-3);
        let cfg = DecoderConfig {
            predicate: if local { PeelPredicate::Local } else { PeelPredicate::Strict },
            ..Default::default()
        };
        let mut dec = Decoder::new(&dem, cfg);
        let ids: Vec<usize> = faults.iter().map(|f| f % dem.len()).collect();
        let (sig, _) = dem.combine(&ids);
        let mode = [PeelMode::SinglePass, PeelMode::QueueBased, PeelMode::BatchIterative][mode];
        let out = dec.peel(&sig, mode).unwrap();
        let mut acc = out.residual.clone();
        for &f in &out.chosen {
            xor_into(&mut acc, &dem.faults[f as usize].detectors);
        }
        prop_assert_eq!(acc, sig);
        prop_assert_eq!(out.stats.residual_weight as usize, out.residual.len());
    }
}
