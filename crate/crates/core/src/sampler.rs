//! Monte Carlo shots drawn from a detector error model.
//!
//! Each shot is generated from its own ChaCha8 stream keyed by
//! `(seed, shot_index)`, so any range of shots can be produced on any worker
//! in any order with identical results.

use std::io::{self, Read, Write};

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dem::Dem;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub shot_index: u64,
    pub seed: u64,
    /// Triggered fault ids, ascending.
    pub triggered: Vec<u32>,
    /// Active detectors (XOR of triggered signatures), ascending.
    pub syndrome: Vec<u32>,
    pub observables: u64,
}

/// Draws shots from a DEM without allocating per shot once buffers are warm.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    dem: &'a Dem,
    seed: u64,
    thresholds: Vec<u64>,
    undetectable: Vec<(u64, u64)>,
    parity: Vec<u8>,
}

fn threshold(p: f64) -> u64 {
    // P(u < t) = p for u uniform on [0, 2^64)
    (p * 18_446_744_073_709_551_616.0).min(u64::MAX as f64) as u64
}

impl<'a> Sampler<'a> {
    pub fn new(dem: &'a Dem, seed: u64) -> Self {
        Self {
            dem,
            seed,
            thresholds: dem.faults.iter().map(|f| threshold(f.probability)).collect(),
            undetectable: dem.undetectable.iter().map(|&(p, m)| (threshold(p), m)).collect(),
            parity: vec![0; dem.num_detectors],
        }
    }

    fn rng(&self, shot_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(shot_index);
        rng
    }

    /// Fills `triggered` and `syndrome` for shot `shot_index`; returns the
    /// true observable mask.
    pub fn sample_into(
        &mut self,
        shot_index: u64,
        triggered: &mut Vec<u32>,
        syndrome: &mut Vec<u32>,
    ) -> u64 {
        let mut rng = self.rng(shot_index);
        triggered.clear();
        syndrome.clear();
        let mut obs = 0u64;
        for (i, &t) in self.thresholds.iter().enumerate() {
            if rng.next_u64() < t {
                triggered.push(i as u32);
            }
        }
        for &(t, mask) in &self.undetectable {
            if rng.next_u64() < t {
                obs ^= mask;
            }
        }
        for &f in triggered.iter() {
            let fault = &self.dem.faults[f as usize];
            obs ^= fault.observables;
            for &d in &fault.detectors {
                if self.parity[d as usize] == 0 {
                    syndrome.push(d);
                }
                self.parity[d as usize] ^= 1;
            }
        }
        // lazy zeroing: only the touched entries are cleared
        syndrome.retain(|&d| {
            let on = self.parity[d as usize] == 1;
            self.parity[d as usize] = 0;
            on
        });
        syndrome.sort_unstable();
        obs
    }

    pub fn shot(&mut self, shot_index: u64) -> Shot {
        let mut triggered = Vec::new();
        let mut syndrome = Vec::new();
        let observables = self.sample_into(shot_index, &mut triggered, &mut syndrome);
        Shot {
            shot_index,
            seed: self.seed,
            triggered,
            syndrome,
            observables,
        }
    }
}

/// Shots `0..shots` for `(dem, seed)`.
pub fn sample(dem: &Dem, shots: u64, seed: u64) -> impl Iterator<Item = Shot> + '_ {
    let mut sampler = Sampler::new(dem, seed);
    (0..shots).map(move |i| sampler.shot(i))
}

impl Shot {
    /// Dense detector bits.
    pub fn dense_syndrome(&self, num_detectors: usize) -> Vec<u8> {
        let mut out = vec![0u8; num_detectors];
        for &d in &self.syndrome {
            out[d as usize] = 1;
        }
        out
    }

    /// Recomputes syndrome and mask from the triggered list.
    pub fn recompute(&self, dem: &Dem) -> (Vec<u32>, u64) {
        let ids: Vec<usize> = self.triggered.iter().map(|&f| f as usize).collect();
        dem.combine(&ids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerStats {
    pub shots: u64,
    /// Mean number of triggered mechanisms per shot.
    pub lambda_hat: f64,
    pub lambda_std_err: f64,
    /// Sum of mechanism probabilities.
    pub lambda_analytic: f64,
    /// `lambda_hat / (n T p)`; zero when `p = 0`.
    pub alpha_hat: f64,
    pub alpha_std_err: f64,
}

impl SamplerStats {
    pub fn csv_header() -> &'static str {
        "shots,lambda_hat,lambda_std_err,lambda_analytic,alpha_hat,alpha_std_err"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.shots,
            self.lambda_hat,
            self.lambda_std_err,
            self.lambda_analytic,
            self.alpha_hat,
            self.alpha_std_err
        )
    }
}

/// Measures the fault multiplier `α = λ / (nTp)` by sampling. `n`, `T`, `p`
/// come from the DEM provenance.
pub fn measure_alpha(dem: &Dem, shots: u64, seed: u64) -> SamplerStats {
    let n = 2 * dem.provenance.checks_per_round;
    let rounds = dem.provenance.rounds;
    let p = dem.provenance.p;
    let mut sampler = Sampler::new(dem, seed);
    let (mut trig, mut syn) = (Vec::new(), Vec::new());
    let (mut sum, mut sum_sq) = (0f64, 0f64);
    for i in 0..shots {
        sampler.sample_into(i, &mut trig, &mut syn);
        let c = trig.len() as f64;
        sum += c;
        sum_sq += c * c;
    }
    let shots_f = shots.max(1) as f64;
    let mean = sum / shots_f;
    let var = (sum_sq / shots_f - mean * mean).max(0.0);
    let se = (var / shots_f).sqrt();
    let scale = n as f64 * rounds as f64 * p;
    let (alpha, alpha_se) = if scale > 0.0 { (mean / scale, se / scale) } else { (0.0, 0.0) };
    SamplerStats {
        shots,
        lambda_hat: mean,
        lambda_std_err: se,
        lambda_analytic: dem.expected_faults(),
        alpha_hat: alpha,
        alpha_std_err: alpha_se,
    }
}

/// Binary records `(shot_index: u64, count: u32, fault_ids: u32 × count, observables: u64)`, little-endian.
pub fn write_shots<W: Write>(mut out: W, shots: &[Shot]) -> io::Result<()> {
    for s in shots {
        out.write_all(&s.shot_index.to_le_bytes())?;
        out.write_all(&(s.triggered.len() as u32).to_le_bytes())?;
        for &f in &s.triggered {
            out.write_all(&f.to_le_bytes())?;
        }
        out.write_all(&s.observables.to_le_bytes())?;
    }
    Ok(())
}

/// Reads records written by [`write_shots`]; syndromes are recomputed from `dem`.
pub fn read_shots<R: Read>(mut input: R, dem: &Dem, seed: u64) -> io::Result<Vec<Shot>> {
    let mut out = Vec::new();
    let mut u64b = [0u8; 8];
    let mut u32b = [0u8; 4];
    loop {
        match input.read_exact(&mut u64b) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e),
        }
        let shot_index = u64::from_le_bytes(u64b);
        input.read_exact(&mut u32b)?;
        let count = u32::from_le_bytes(u32b) as usize;
        let mut triggered = Vec::with_capacity(count);
        for _ in 0..count {
            input.read_exact(&mut u32b)?;
            let f = u32::from_le_bytes(u32b);
            if f as usize >= dem.len() {
                return Err(io::Error::new(io::ErrorKind::InvalidData, "fault id out of range"));
            }
            triggered.push(f);
        }
        input.read_exact(&mut u64b)?;
        let observables = u64::from_le_bytes(u64b);
        let ids: Vec<usize> = triggered.iter().map(|&f| f as usize).collect();
        let (syndrome, _) = dem.combine(&ids);
        out.push(Shot { shot_index, seed, triggered, syndrome, observables });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dem {
        Dem::from_mechanisms(4, 2, vec![
            (0.2, vec![0, 1], 1),
            (0.3, vec![1, 2], 0),
            (0.1, vec![2, 3], 2),
            (0.25, vec![0, 3], 0),
        ])
        .unwrap()
    }

    #[test]
    fn reproducible_and_order_independent() {
        let dem = toy();
        let a: Vec<Shot> = sample(&dem, 50, 7).collect();
        let mut s = Sampler::new(&dem, 7);
        for i in (0..50).rev() {
            assert_eq!(s.shot(i), a[i as usize]);
        }
        let b: Vec<Shot> = sample(&dem, 50, 8).collect();
        assert_ne!(a, b);
    }

    #[test]
    fn xor_consistency() {
        let dem = toy();
        for shot in sample(&dem, 500, 3) {
            let (syn, _) = shot.recompute(&dem);
            assert_eq!(syn, shot.syndrome);
        }
    }

    #[test]
    fn empty_dem_gives_empty_shots() {
        let dem = Dem::from_mechanisms(3, 1, Vec::new()).unwrap();
        for shot in sample(&dem, 10, 1) {
            assert!(shot.syndrome.is_empty() && shot.observables == 0);
        }
        let stats = measure_alpha(&dem, 10, 1);
        assert_eq!(stats.lambda_hat, 0.0);
        assert_eq!(stats.alpha_hat, 0.0);
    }

    #[test]
    fn binary_dump_roundtrip() {
        let dem = toy();
        let shots: Vec<Shot> = sample(&dem, 20, 5).collect();
        let mut buf = Vec::new();
        write_shots(&mut buf, &shots).unwrap();
        let back = read_shots(buf.as_slice(), &dem, 5).unwrap();
        assert_eq!(back, shots);
    }
}
