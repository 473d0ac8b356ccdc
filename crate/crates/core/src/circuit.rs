//! Noisy syndrome-extraction circuits for BB-code memory experiments.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bbcode::{row_supports, BbCode, Basis};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("unsupported basis for this construction: {0}")]
    UnsupportedBasis(String),
    #[error("invalid circuit parameters: {0}")]
    InvalidParameters(String),
}

/// Physical error rate plus per-channel multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p: f64,
    /// Two-qubit depolarizing strength after each CNOT, as a multiple of `p`.
    pub cnot: f64,
    /// Classical flip probability of each measurement result, as a multiple of `p`.
    pub measure: f64,
    /// Flip after each reset, as a multiple of `p`.
    pub reset: f64,
}

impl NoiseModel {
    pub fn uniform(p: f64) -> Self {
        Self {
            p,
            cnot: 1.0,
            measure: 1.0,
            reset: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        if !(0.0..=0.1).contains(&self.p) {
            return Err(CircuitError::InvalidParameters(format!(
                "p = {} outside [0, 0.1]",
                self.p
            )));
        }
        if self.cnot < 0.0 || self.measure < 0.0 || self.reset < 0.0 {
            return Err(CircuitError::InvalidParameters("negative noise multiplier".into()));
        }
        Ok(())
    }

    /// Every channel is present with nonzero strength.
    pub fn is_full(&self) -> bool {
        self.p > 0.0 && self.cnot > 0.0 && self.measure > 0.0 && self.reset > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Instruction {
    Reset { basis: Basis, qubits: Vec<u32> },
    Cx { pairs: Vec<(u32, u32)> },
    /// Pauli `X` (or `Z` when `basis` is `X`) applied with probability `p`.
    Flip { basis: Basis, p: f64, qubits: Vec<u32> },
    Depolarize2 { p: f64, pairs: Vec<(u32, u32)> },
    Measure { basis: Basis, qubits: Vec<u32> },
    /// XOR of absolute measurement-record indices.
    Detector { records: Vec<u32> },
    Observable { index: u32, records: Vec<u32> },
    Tick,
}

/// CNOT layers of one extraction round: `(data qubit, check)` per entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub layers: Vec<Vec<(u32, u32)>>,
    pub description: String,
}

impl Schedule {
    /// One layer per term of `A`, then one per term of `B`, each in
    /// ascending `(i, j)` order.
    pub fn canonical(code: &BbCode, basis: Basis) -> Self {
        let ia: Vec<usize> = (0..code.poly_a.len()).collect();
        let ib: Vec<usize> = (0..code.poly_b.len()).collect();
        Self::with_term_order(code, basis, &ia, &ib)
    }

    /// Like [`Schedule::canonical`] but visiting the terms of `A` and `B` in
    /// the given orders (indices into the ascending term lists).
    pub fn with_term_order(code: &BbCode, basis: Basis, order_a: &[usize], order_b: &[usize]) -> Self {
        let (l, m) = (code.l, code.m);
        let lm = l * m;
        let mut layers = Vec::new();
        // Z checks are the rows of [Bᵀ | Aᵀ]: A terms reach the right block, B terms the left.
        // X checks are the rows of [A | B]: A terms reach the left block, B terms the right.
        let shift = |c: usize, (i, j): (usize, usize), forward: bool| -> usize {
            let (a, b) = (c / m, c % m);
            if forward {
                ((a + i) % l) * m + (b + j) % m
            } else {
                ((a + l - i) % l) * m + (b + m - j) % m
            }
        };
        for (poly, order, block_a) in [(&code.poly_a, order_a, true), (&code.poly_b, order_b, false)] {
            let terms: Vec<(usize, usize)> = poly.terms().collect();
            for term in order.iter().map(|&i| terms[i]) {
                let layer: Vec<(u32, u32)> = (0..lm)
                    .map(|c| {
                        let data = match basis {
                            // Hz[c, q] = Bᵀ[c, q] = B[q, c]: q = c shifted forward by the term
                            Basis::Z => shift(c, term, true) + if block_a { lm } else { 0 },
                            // Hx[c, q] = A[c, q]: c = q shifted forward, so q = c shifted back
                            Basis::X => shift(c, term, false) + if block_a { 0 } else { lm },
                        };
                        (data as u32, c as u32)
                    })
                    .collect();
                layers.push(layer);
            }
        }
        Self {
            layers,
            description: format!("term order A{order_a:?} then B{order_b:?} of A={}, B={}", code.poly_a, code.poly_b),
        }
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for layer in &self.layers {
            for &(d, c) in layer {
                h.update(d.to_le_bytes());
                h.update(c.to_le_bytes());
            }
            h.update(b";");
        }
        hex_prefix(&h.finalize())
    }
}

pub(crate) fn hex_prefix(bytes: &[u8]) -> String {
    bytes.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// `(n, w, T)` of a memory circuit, used to check the fault-count identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultAccounting {
    pub n: usize,
    pub w: usize,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub code_name: String,
    pub instructions: Vec<Instruction>,
    pub num_qubits: usize,
    pub num_data: usize,
    pub rounds: usize,
    pub basis: Basis,
    pub noise: NoiseModel,
    pub schedule: Schedule,
    /// Detectors per layer (checks measured each round).
    pub checks_per_round: usize,
    pub accounting: Option<FaultAccounting>,
}

impl Circuit {
    pub fn num_measurements(&self) -> usize {
        self.instructions
            .iter()
            .map(|i| match i {
                Instruction::Measure { qubits, .. } => qubits.len(),
                _ => 0,
            })
            .sum()
    }

    pub fn num_detectors(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| matches!(i, Instruction::Detector { .. }))
            .count()
    }

    pub fn num_observables(&self) -> usize {
        self.instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::Observable { index, .. } => Some(*index as usize + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Number of CNOTs per round whose noise can reach the measured checks.
    pub fn cnots_per_round(&self) -> usize {
        self.schedule.layers.iter().map(Vec::len).sum()
    }

    /// Stabilizer-circuit text, one instruction per line, measurement
    /// records referenced as `rec[-k]`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut measured = 0usize;
        let join = |qs: &[u32]| qs.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        let join_pairs = |ps: &[(u32, u32)]| {
            ps.iter()
                .map(|(a, b)| format!("{a} {b}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let recs = |rs: &[u32], measured: usize| {
            rs.iter()
                .map(|&r| format!("rec[-{}]", measured - r as usize))
                .collect::<Vec<_>>()
                .join(" ")
        };
        for ins in &self.instructions {
            let line = match ins {
                Instruction::Reset { basis: Basis::Z, qubits } => format!("R {}", join(qubits)),
                Instruction::Reset { basis: Basis::X, qubits } => format!("RX {}", join(qubits)),
                Instruction::Cx { pairs } => format!("CX {}", join_pairs(pairs)),
                Instruction::Flip { basis: Basis::Z, p, qubits } => {
                    format!("X_ERROR({p}) {}", join(qubits))
                }
                Instruction::Flip { basis: Basis::X, p, qubits } => {
                    format!("Z_ERROR({p}) {}", join(qubits))
                }
                Instruction::Depolarize2 { p, pairs } => {
                    format!("DEPOLARIZE2({p}) {}", join_pairs(pairs))
                }
                Instruction::Measure { basis, qubits } => {
                    measured += qubits.len();
                    let op = if *basis == Basis::Z { "M" } else { "MX" };
                    format!("{op} {}", join(qubits))
                }
                Instruction::Detector { records } => {
                    format!("DETECTOR {}", recs(records, measured))
                }
                Instruction::Observable { index, records } => {
                    format!("OBSERVABLE_INCLUDE({index}) {}", recs(records, measured))
                }
                Instruction::Tick => "TICK".to_string(),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

/// `T`-round memory experiment measuring the checks of `basis`.
///
/// Qubits `0..n` are data; `n..n + n/2` are the ancillas of the measured
/// checks. Detector `t·(n/2) + c` compares round `t+1` of check `c` with the
/// previous round (`t = 0` with the initialization, `t = T` with the
/// check value reconstructed from the final data readout).
pub fn build_memory_circuit(
    code: &BbCode,
    rounds: usize,
    basis: Basis,
    noise: NoiseModel,
) -> Result<Circuit, CircuitError> {
    build_memory_circuit_with(code, rounds, basis, noise, Schedule::canonical(code, basis))
}

/// [`build_memory_circuit`] with an explicit CNOT schedule.
pub fn build_memory_circuit_with(
    code: &BbCode,
    rounds: usize,
    basis: Basis,
    noise: NoiseModel,
    schedule: Schedule,
) -> Result<Circuit, CircuitError> {
    if rounds == 0 {
        return Err(CircuitError::InvalidParameters("T must be ≥ 1".into()));
    }
    noise.validate()?;
    let checks = code.check_matrix(basis);
    if checks.rows() * 2 != code.n {
        return Err(CircuitError::UnsupportedBasis(format!(
            "{basis:?} checks do not form an n/2 × n matrix"
        )));
    }
    let check_support = row_supports(checks);
    for (c, support) in check_support.iter().enumerate() {
        let scheduled = schedule
            .layers
            .iter()
            .flat_map(|layer| layer.iter())
            .filter(|&&(_, ch)| ch as usize == c)
            .count();
        if scheduled != support.len() {
            return Err(CircuitError::UnsupportedBasis(format!(
                "schedule covers {scheduled} of {} terms of check {c}",
                support.len()
            )));
        }
    }

    let n = code.n;
    let nc = n / 2;
    let data: Vec<u32> = (0..n as u32).collect();
    let anc: Vec<u32> = (n as u32..(n + nc) as u32).collect();
    let p = noise.p;
    let mut ins = Vec::new();
    let noisy = |ins: &mut Vec<Instruction>, ins_new: Instruction| {
        let zero = match &ins_new {
            Instruction::Flip { p, .. } | Instruction::Depolarize2 { p, .. } => *p == 0.0,
            _ => false,
        };
        if !zero {
            ins.push(ins_new);
        }
    };

    ins.push(Instruction::Reset { basis, qubits: data.clone() });
    noisy(&mut ins, Instruction::Flip { basis, p: p * noise.reset, qubits: data.clone() });
    let mut records = 0u32;
    let mut prev: Option<u32> = None;
    for _ in 0..rounds {
        ins.push(Instruction::Tick);
        ins.push(Instruction::Reset { basis, qubits: anc.clone() });
        noisy(&mut ins, Instruction::Flip { basis, p: p * noise.reset, qubits: anc.clone() });
        for layer in &schedule.layers {
            ins.push(Instruction::Tick);
            let pairs: Vec<(u32, u32)> = layer
                .iter()
                .map(|&(d, c)| match basis {
                    Basis::Z => (d, anc[c as usize]),
                    Basis::X => (anc[c as usize], d),
                })
                .collect();
            ins.push(Instruction::Cx { pairs: pairs.clone() });
            noisy(&mut ins, Instruction::Depolarize2 { p: p * noise.cnot, pairs });
        }
        ins.push(Instruction::Tick);
        noisy(&mut ins, Instruction::Flip { basis, p: p * noise.measure, qubits: anc.clone() });
        ins.push(Instruction::Measure { basis, qubits: anc.clone() });
        let start = records;
        records += nc as u32;
        for c in 0..nc as u32 {
            let mut recs = vec![start + c];
            if let Some(prev_start) = prev {
                recs.push(prev_start + c);
            }
            ins.push(Instruction::Detector { records: recs });
        }
        prev = Some(start);
    }
    ins.push(Instruction::Tick);
    noisy(&mut ins, Instruction::Flip { basis, p: p * noise.measure, qubits: data.clone() });
    ins.push(Instruction::Measure { basis, qubits: data.clone() });
    let data_start = records;
    let last = prev.expect("rounds ≥ 1");
    for (c, support) in check_support.iter().enumerate() {
        let mut recs: Vec<u32> = support.iter().map(|&q| data_start + q as u32).collect();
        recs.push(last + c as u32);
        ins.push(Instruction::Detector { records: recs });
    }
    let logicals = code.observables(basis);
    for i in 0..logicals.rows() {
        let recs = logicals
            .row_support(i)
            .into_iter()
            .map(|q| data_start + q as u32)
            .collect();
        ins.push(Instruction::Observable { index: i as u32, records: recs });
    }

    Ok(Circuit {
        code_name: code.name.clone(),
        instructions: ins,
        num_qubits: n + nc,
        num_data: n,
        rounds,
        basis,
        noise,
        schedule,
        checks_per_round: nc,
        accounting: Some(FaultAccounting { n, w: code.w, rounds }),
    })
}
