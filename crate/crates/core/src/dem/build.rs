use std::collections::HashMap;

use super::{predicted_fault_count, Dem, DemError, DemProvenance};
use crate::bbcode::Basis;
use crate::circuit::{Circuit, Instruction};
use crate::gf2::{support_of, words_for};

/// Pauli sensitivity of every qubit at the current point of a backward sweep:
/// which detectors/observables an `X` (resp. `Z`) inserted here would flip.
struct Sensitivity {
    words: usize,
    x: Vec<u64>,
    z: Vec<u64>,
}

impl Sensitivity {
    fn new(qubits: usize, bits: usize) -> Self {
        let words = words_for(bits);
        Self {
            words,
            x: vec![0; qubits * words],
            z: vec![0; qubits * words],
        }
    }

    fn range(&self, q: u32) -> std::ops::Range<usize> {
        let s = q as usize * self.words;
        s..s + self.words
    }

    fn clear(&mut self, q: u32) {
        let r = self.range(q);
        self.x[r.clone()].fill(0);
        self.z[r].fill(0);
    }

    /// Writes the sensitivity of Pauli `(x, z)` on `q` into `out` (XOR).
    fn accumulate(&self, q: u32, x: bool, z: bool, out: &mut [u64]) {
        let r = self.range(q);
        if x {
            for (o, s) in out.iter_mut().zip(&self.x[r.clone()]) {
                *o ^= s;
            }
        }
        if z {
            for (o, s) in out.iter_mut().zip(&self.z[r]) {
                *o ^= s;
            }
        }
    }

    /// Backward rule for CX(c, t): X_c before = X_c X_t after; Z_t before = Z_c Z_t after.
    fn cx(&mut self, c: u32, t: u32) {
        let (rc, rt) = (self.range(c), self.range(t));
        for i in 0..self.words {
            self.x[rc.start + i] ^= self.x[rt.start + i];
            self.z[rt.start + i] ^= self.z[rc.start + i];
        }
    }
}

/// Combines two independent mechanisms with identical effect.
fn merge_prob(a: f64, b: f64) -> f64 {
    a * (1.0 - b) + b * (1.0 - a)
}

/// Builds the detector error model of `circuit` by propagating every Pauli
/// component of every noise channel to the detectors and observables it flips.
///
/// Components of one channel with identical effect are summed; identical
/// mechanisms from different channels combine as independent events. When
/// the circuit is a full-noise memory experiment the mechanism count is
/// checked against `n(wT + T/2 + 1)`.
pub fn build_dem(circuit: &Circuit) -> Result<Dem, DemError> {
    let num_det = circuit.num_detectors();
    let num_obs = circuit.num_observables();
    if num_obs > 64 {
        return Err(DemError::Invalid(format!("{num_obs} observables exceed the 64-bit mask")));
    }
    let bits = num_det + num_obs;
    let words = words_for(bits);

    // record index -> detector/observable bits containing it
    let num_records = circuit.num_measurements();
    let mut targets: Vec<Vec<u32>> = vec![Vec::new(); num_records];
    let mut det = 0u32;
    for ins in &circuit.instructions {
        match ins {
            Instruction::Detector { records } => {
                for &r in records {
                    targets[r as usize].push(det);
                }
                det += 1;
            }
            Instruction::Observable { index, records } => {
                for &r in records {
                    targets[r as usize].push(num_det as u32 + index);
                }
            }
            _ => {}
        }
    }

    let mut sens = Sensitivity::new(circuit.num_qubits, bits);
    let mut next_record = num_records;
    let mut mechanisms: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut channel: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut scratch = vec![0u64; words];

    let mut flush = |channel: &mut HashMap<Vec<u64>, f64>| {
        for (sig, p) in channel.drain() {
            if sig.iter().all(|&w| w == 0) {
                continue;
            }
            mechanisms
                .entry(sig)
                .and_modify(|q| *q = merge_prob(*q, p))
                .or_insert(p);
        }
    };

    for ins in circuit.instructions.iter().rev() {
        match ins {
            Instruction::Measure { basis, qubits } => {
                for &q in qubits.iter().rev() {
                    next_record -= 1;
                    let r = sens.range(q);
                    let (flip, clear) = match basis {
                        Basis::Z => (&mut sens.x, &mut sens.z),
                        Basis::X => (&mut sens.z, &mut sens.x),
                    };
                    clear[r.clone()].fill(0);
                    for &b in &targets[next_record] {
                        flip[r.start + b as usize / 64] ^= 1 << (b % 64);
                    }
                }
            }
            Instruction::Reset { qubits, .. } => {
                for &q in qubits {
                    sens.clear(q);
                }
            }
            Instruction::Cx { pairs } => {
                for &(c, t) in pairs.iter().rev() {
                    sens.cx(c, t);
                }
            }
            Instruction::Flip { basis, p, qubits } => {
                for &q in qubits {
                    scratch.fill(0);
                    let (x, z) = if *basis == Basis::Z { (true, false) } else { (false, true) };
                    sens.accumulate(q, x, z, &mut scratch);
                    channel.insert(scratch.clone(), *p);
                    flush(&mut channel);
                }
            }
            Instruction::Depolarize2 { p, pairs } => {
                for &(a, b) in pairs {
                    for pauli in 1u8..16 {
                        let (pa, pb) = (pauli & 3, pauli >> 2);
                        scratch.fill(0);
                        // 1 = X, 2 = Z, 3 = Y
                        sens.accumulate(a, pa & 1 == 1, pa & 2 == 2, &mut scratch);
                        sens.accumulate(b, pb & 1 == 1, pb & 2 == 2, &mut scratch);
                        *channel.entry(scratch.clone()).or_insert(0.0) += p / 15.0;
                    }
                    flush(&mut channel);
                }
            }
            Instruction::Detector { .. } | Instruction::Observable { .. } | Instruction::Tick => {}
        }
    }

    let mechs = mechanisms.into_iter().map(|(sig, p)| {
        let mut dets = Vec::new();
        let mut obs = 0u64;
        for b in support_of(&sig) {
            if b < num_det {
                dets.push(b as u32);
            } else {
                obs |= 1 << (b - num_det);
            }
        }
        (p, dets, obs)
    });
    let mut dem = Dem::from_mechanisms(num_det, num_obs, mechs)?;
    dem.canonicalize();
    dem.provenance = DemProvenance {
        code: circuit.code_name.clone(),
        rounds: circuit.rounds,
        p: circuit.noise.p,
        schedule_hash: circuit.schedule.hash(),
        checks_per_round: circuit.checks_per_round,
    };

    if let Some(acc) = circuit.accounting {
        if circuit.noise.is_full() {
            let expected = predicted_fault_count(acc.n, acc.w, acc.rounds)?;
            if dem.len() != expected {
                return Err(DemError::CountMismatch { expected, actual: dem.len() });
            }
        }
    }
    Ok(dem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbcode::named_code;
    use crate::circuit::{build_memory_circuit, NoiseModel};

    #[test]
    fn gross_144_counts() {
        let code = named_code("gross-144").unwrap();
        let c = build_memory_circuit(&code, 12, Basis::Z, NoiseModel::uniform(1e-3)).unwrap();
        let dem = build_dem(&c).unwrap();
        assert_eq!(dem.len(), 6192);
        assert_eq!(dem.num_detectors, 936);
        let h = dem.weight_histogram();
        assert_eq!(h[2], 144 * 6);
        assert_eq!(h[3], 6192 - 144 * 6);
    }

    #[test]
    fn zero_noise_gives_empty_dem() {
        let code = named_code("bb-18").unwrap();
        let c = build_memory_circuit(&code, 3, Basis::Z, NoiseModel::uniform(0.0)).unwrap();
        let dem = build_dem(&c).unwrap();
        assert!(dem.is_empty());
        assert!(dem.undetectable.is_empty());
    }

    #[test]
    fn partial_noise_breaks_accounting_silently() {
        // gate noise off: the identity does not apply and is not checked
        let code = named_code("bb-18").unwrap();
        let mut noise = NoiseModel::uniform(1e-3);
        noise.cnot = 0.0;
        let c = build_memory_circuit(&code, 3, Basis::Z, noise).unwrap();
        let dem = build_dem(&c).unwrap();
        assert!(dem.len() < predicted_fault_count(18, 3, 3).unwrap());
    }

    #[test]
    fn x_basis_matches_accounting() {
        let code = named_code("gross-72").unwrap();
        let c = build_memory_circuit(&code, 3, Basis::X, NoiseModel::uniform(1e-3)).unwrap();
        assert_eq!(build_dem(&c).unwrap().len(), predicted_fault_count(72, 3, 3).unwrap());
    }

    #[test]
    fn count_mismatch_is_reported() {
        let code = named_code("bb-18").unwrap();
        let mut c = build_memory_circuit(&code, 3, Basis::Z, NoiseModel::uniform(1e-3)).unwrap();
        c.accounting.as_mut().unwrap().rounds = 4;
        assert!(matches!(build_dem(&c), Err(DemError::CountMismatch { .. })));
    }
}
