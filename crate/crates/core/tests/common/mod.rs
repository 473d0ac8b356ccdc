//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bbpeel::decoder::{Decoder, DecoderConfig, Phase};
use bbpeel::dem::{export_dem, import_dem, Dem, FaultGraph};
use bbpeel::sampler::Sampler;
use bbpeel::theory::classify_collisions;

/// Random DEM with distinct signatures of weight 1..=3 over `detectors`
/// detectors and two observables, uniform probability `p`.
pub fn random_dem(rng: &mut ChaCha8Rng, max_faults: usize, detectors: u32, p: f64) -> Dem {
    let target = rng.gen_range(2..=max_faults);
    let mut seen = BTreeSet::new();
    let mut mechs = Vec::new();
    for _ in 0..target * 4 {
        if mechs.len() == target {
            break;
        }
        let w = rng.gen_range(1..=3);
        let sig: BTreeSet<u32> = (0..w).map(|_| rng.gen_range(0..detectors)).collect();
        if seen.insert(sig.clone()) {
            mechs.push((p, sig.into_iter().collect::<Vec<_>>(), rng.gen_range(0..4u64)));
        }
    }
    Dem::from_mechanisms(detectors as usize, 2, mechs).unwrap()
}

/// Strict peeling recomputed from scratch at every step.
pub fn naive_pair_resolves(dem: &Dem, a: usize, b: usize) -> bool {
    let (mut active, target) = dem.combine(&[a, b]);
    let mut mask = 0u64;
    loop {
        let fully: Vec<usize> =
            dem.faults.iter().filter(|f| f.detectors.iter().all(|d| active.contains(d))).map(|f| f.id).collect();
        let disjoint = |f: usize, g: usize| dem.faults[g].detectors.iter().all(|d| !dem.faults[f].detectors.contains(d));
        let Some(f) = fully.iter().copied().find(|&f| fully.iter().all(|&g| g == f || disjoint(f, g))) else {
            break;
        };
        for d in &dem.faults[f].detectors {
            active.retain(|x| x != d);
        }
        mask ^= dem.faults[f].observables;
    }
    active.is_empty() && mask == target
}

/// Compares `classify_collisions` with the naive oracle pair by pair on
/// `trials` random DEMs of at most 12 faults. Returns the pairs checked.
pub fn collision_oracle(trials: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for t in 0..trials {
        let dem = random_dem(&mut rng, 12, 8, 0.01);
        let report = classify_collisions(&dem, &FaultGraph::new(&dem), &DecoderConfig::default(), true, 1);
        let records = report.records.unwrap();
        let mut expected = 0;
        for a in 0..dem.len() {
            for b in a + 1..dem.len() {
                if dem.faults[a].detectors.iter().all(|d| !dem.faults[b].detectors.contains(d)) {
                    continue;
                }
                expected += 1;
                let rec = records
                    .iter()
                    .find(|r| (r.f1, r.f2) == (a as u32, b as u32))
                    .ok_or(format!("trial {t}: pair ({a}, {b}) missing"))?;
                if rec.resolved != naive_pair_resolves(&dem, a, b) {
                    return Err(format!("trial {t}: pair ({a}, {b}) resolved = {}", rec.resolved));
                }
            }
        }
        if records.len() != expected {
            return Err(format!("trial {t}: {} records, {expected} sharing pairs", records.len()));
        }
        checked += expected;
    }
    Ok(checked)
}

/// Per syndrome: minimum weight per observable mask, and how many subsets
/// reach the overall minimum weight.
#[derive(Debug, Clone, Copy)]
pub struct MinWeight {
    pub by_mask: [u8; 4],
    pub min: u8,
    pub count_at_min: u32,
}

/// Exhaustive walk over all fault subsets. Requires ≤ 64 detectors,
/// observable masks < 4 and ≤ 20 faults.
pub fn min_weight_table(dem: &Dem) -> HashMap<u64, MinWeight> {
    let n = dem.len();
    assert!(n <= 20 && dem.num_detectors <= 64);
    let sigs: Vec<u64> = dem.faults.iter().map(|f| f.detectors.iter().fold(0u64, |m, &d| m | 1 << d)).collect();
    let mut table: HashMap<u64, MinWeight> = HashMap::new();
    let mut update = |syn: u64, obs: u64, w: u8| {
        let e = table.entry(syn).or_insert(MinWeight { by_mask: [u8::MAX; 4], min: u8::MAX, count_at_min: 0 });
        e.by_mask[obs as usize] = e.by_mask[obs as usize].min(w);
        if w < e.min {
            e.min = w;
            e.count_at_min = 1;
        } else if w == e.min {
            e.count_at_min += 1;
        }
    };
    update(0, 0, 0);
    let (mut syn, mut obs, mut weight) = (0u64, 0u64, 0u8);
    // Gray-code walk: subset i differs from i-1 in bit trailing_zeros(i)
    for i in 1u32..(1 << n) {
        let f = i.trailing_zeros() as usize;
        syn ^= sigs[f];
        obs ^= dem.faults[f].observables;
        if (i ^ (i >> 1)) >> f & 1 == 1 {
            weight += 1;
        } else {
            weight -= 1;
        }
        update(syn, obs, weight);
    }
    table
}

#[derive(Debug, Default)]
pub struct MapOracleStats {
    pub syndromes: usize,
    /// True set is the unique most probable explanation (≥ 2× the runner-up).
    pub dominant: usize,
    pub dominant_agree: usize,
    /// Dominant and the true faults' signatures are pairwise disjoint.
    pub disjoint: usize,
    pub disjoint_agree: usize,
    /// Disjoint-dominant syndromes finished by peeling or pair enumeration.
    pub settled: usize,
    pub settled_agree: usize,
}

/// Decodes syndromes of 1–3 random faults on random ≤20-fault DEMs (uniform
/// p = 0.01) and compares the predicted mask with exhaustive
/// maximum-probability decoding. With uniform p the true set is ≥ 2× more
/// likely than every other explanation exactly when it is the unique
/// minimum-weight subset. Disagreements are counted for every dominant
/// syndrome. An error is returned only where agreement is guaranteed: the
/// true faults share no detector (so peeling commits only true faults) and
/// the decode finishes before BP (so any pair-phase match of different
/// mask would be an explanation at least as light as the true set).
pub fn map_oracle(dems: usize, shots_per_dem: usize, seed: u64) -> Result<MapOracleStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = MapOracleStats::default();
    for t in 0..dems {
        let dem = random_dem(&mut rng, 20, 12, 0.01);
        let table = min_weight_table(&dem);
        let mut dec = Decoder::new(&dem, DecoderConfig::default());
        for _ in 0..shots_per_dem {
            let k = rng.gen_range(1..=3usize.min(dem.len()));
            let faults: BTreeSet<usize> = (0..k).map(|_| rng.gen_range(0..dem.len())).collect();
            let faults: Vec<usize> = faults.into_iter().collect();
            let (syndrome, truth) = dem.combine(&faults);
            let key = syndrome.iter().fold(0u64, |m, &d| m | 1 << d);
            let entry = table[&key];
            stats.syndromes += 1;
            if entry.min as usize != faults.len() || entry.count_at_min != 1 {
                continue;
            }
            stats.dominant += 1;
            let out = dec.decode(&syndrome).map_err(|e| format!("dem {t}: {e}"))?;
            let agree = out.predicted_observables == truth;
            stats.dominant_agree += agree as usize;
            let disjoint = faults.iter().enumerate().all(|(i, &a)| {
                faults[i + 1..].iter().all(|&b| dem.faults[a].detectors.iter().all(|d| !dem.faults[b].detectors.contains(d)))
            });
            if !disjoint {
                continue;
            }
            stats.disjoint += 1;
            stats.disjoint_agree += agree as usize;
            if out.phase == Phase::Bp {
                continue;
            }
            stats.settled += 1;
            stats.settled_agree += agree as usize;
            if !agree {
                return Err(format!(
                    "dem {t}, faults {faults:?}: decoder mask {} ({}), MAP mask {truth}",
                    out.predicted_observables,
                    out.phase.as_str()
                ));
            }
        }
    }
    Ok(stats)
}

/// Every sampled shot's syndrome and mask equal the XOR of its triggered
/// faults' signatures and masks.
pub fn sampler_xor_consistent(dem: &Dem, shots: u64, seed: u64) -> Result<(), String> {
    let mut sampler = Sampler::new(dem, seed);
    for i in 0..shots {
        let shot = sampler.shot(i);
        let (syn, obs) = shot.recompute(dem);
        if syn != shot.syndrome || obs != shot.observables {
            return Err(format!("shot {i} is inconsistent"));
        }
    }
    Ok(())
}

pub fn roundtrip_identical(dem: &Dem) -> Result<(), String> {
    let text = export_dem(dem);
    let back = import_dem(&text).map_err(|e| e.to_string())?;
    if &back != dem {
        return Err(format!("round trip changed the DEM ({} faults)", dem.len()));
    }
    if export_dem(&back) != text {
        return Err("re-export differs".into());
    }
    Ok(())
}
