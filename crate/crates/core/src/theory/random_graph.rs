use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{classify_collisions, TheoryError};
use crate::decoder::DecoderConfig;
use crate::dem::{Dem, FaultGraph};
use crate::stats::mean_std;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub trials: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Random fault–detector incidence with the DEM's fault weights and
/// detector degrees (configuration model, multi-edges repaired by random
/// stub swaps). Observable masks are permuted across faults. `None` returns
/// the DEM unchanged.
pub fn rewired_dem(dem: &Dem, seed: Option<u64>) -> Result<Dem, TheoryError> {
    let Some(seed) = seed else {
        return Ok(dem.clone());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<u32> = dem.faults.iter().flat_map(|f| f.detectors.iter().copied()).collect();
    stubs.shuffle(&mut rng);
    let mut owner = Vec::with_capacity(stubs.len());
    let mut offsets = Vec::with_capacity(dem.len() + 1);
    offsets.push(0usize);
    for f in &dem.faults {
        owner.extend(std::iter::repeat(f.id).take(f.weight()));
        offsets.push(offsets.last().unwrap() + f.weight());
    }
    let has_dup = |stubs: &[u32], f: usize, skip: usize, d: u32| {
        (offsets[f]..offsets[f + 1]).any(|i| i != skip && stubs[i] == d)
    };
    let max_attempts = 1000 + 100 * stubs.len();
    let mut attempts = 0;
    for i in 0..stubs.len() {
        while has_dup(&stubs, owner[i], i, stubs[i]) {
            attempts += 1;
            if attempts > max_attempts {
                return Err(TheoryError::RewireFailure { attempts });
            }
            let j = rng.gen_range(0..stubs.len());
            if owner[j] == owner[i] {
                continue;
            }
            let (di, dj) = (stubs[i], stubs[j]);
            if !has_dup(&stubs, owner[j], j, di) && !has_dup(&stubs, owner[i], i, dj) {
                stubs.swap(i, j);
            }
        }
    }
    let mut masks: Vec<u64> = dem.faults.iter().map(|f| f.observables).collect();
    masks.shuffle(&mut rng);
    let mechanisms = dem.faults.iter().map(|f| {
        (
            f.probability,
            stubs[offsets[f.id]..offsets[f.id + 1]].to_vec(),
            masks[f.id],
        )
    });
    let mut out = Dem::from_mechanisms(dem.num_detectors, dem.num_observables, mechanisms)
        .map_err(|e| TheoryError::Invalid(e.to_string()))?;
    out.provenance = dem.provenance.clone();
    Ok(out)
}

/// Mean and spread of A₀ over configuration-model rewirings of `dem`.
pub fn random_graph_baseline(
    dem: &Dem,
    trials: usize,
    seed: u64,
    config: &DecoderConfig,
    threads: usize,
) -> Result<BaselineReport, TheoryError> {
    if trials < 5 {
        return Err(TheoryError::Invalid(format!("{trials} trials; at least 5 required")));
    }
    let mut a0s = Vec::with_capacity(trials);
    for t in 0..trials {
        let trial_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(t as u64);
        let rewired = rewired_dem(dem, Some(trial_seed))?;
        let graph = FaultGraph::new(&rewired);
        a0s.push(classify_collisions(&rewired, &graph, config, false, threads).a0);
    }
    let (mean, std) = mean_std(&a0s);
    Ok(BaselineReport { trials: a0s, mean, std })
}
