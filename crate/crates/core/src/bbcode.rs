//! Bivariate bicycle codes: construction from a polynomial pair, logical
//! operators, and the stopping distance of the syndrome code.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf2::{support_of, weight_of, words_for, BitMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodeError {
    #[error("invalid code parameters: {0}")]
    InvalidParameters(String),
    #[error("Hx·Hzᵀ ≠ 0 over GF(2)")]
    CommutationFailure,
    #[error("code encodes no logical qubits")]
    DegenerateCode,
    #[error("could not complete {0} independent logical representatives")]
    RankDeficiency(usize),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("search budget exhausted; best upper bound {upper_bound}")]
    BudgetExhausted { upper_bound: usize },
}

/// Sum of monomials `x^i y^j` in `F2[x, y] / (x^l - 1, y^m - 1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BivariatePolynomial {
    l: usize,
    m: usize,
    terms: BTreeSet<(usize, usize)>,
}

impl BivariatePolynomial {
    /// Exponents are reduced modulo `(l, m)`. Terms that coincide after
    /// reduction are rejected rather than cancelled.
    pub fn new(l: usize, m: usize, terms: &[(usize, usize)]) -> Result<Self, CodeError> {
        if l == 0 || m == 0 {
            return Err(CodeError::InvalidParameters("group orders must be positive".into()));
        }
        let mut set = BTreeSet::new();
        for &(i, j) in terms {
            if !set.insert((i % l, j % m)) {
                return Err(CodeError::InvalidParameters(format!(
                    "duplicate term x^{}*y^{}",
                    i % l,
                    j % m
                )));
            }
        }
        if set.is_empty() {
            return Err(CodeError::InvalidParameters("polynomial has no terms".into()));
        }
        Ok(Self { l, m, terms: set })
    }

    /// Parses `x^3+y+y^2`, `1+x*y`, `x^2*y^5`.
    pub fn parse(l: usize, m: usize, text: &str) -> Result<Self, CodeError> {
        let mut terms = Vec::new();
        for raw in text.split('+') {
            let t: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
            if t.is_empty() {
                return Err(CodeError::InvalidParameters(format!("empty term in '{text}'")));
            }
            terms.push(parse_monomial(&t)?);
        }
        Self::new(l, m, &terms)
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.terms.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// The `lm × lm` matrix of multiplication by a single monomial: basis
    /// element `(a, b)` (index `a·m + b`) maps to `(a+i, b+j)`.
    pub fn monomial_matrix(l: usize, m: usize, (i, j): (usize, usize)) -> BitMatrix {
        let size = l * m;
        let mut mat = BitMatrix::zeros(size, size);
        for a in 0..l {
            for b in 0..m {
                mat.toggle(((a + i) % l) * m + (b + j) % m, a * m + b);
            }
        }
        mat
    }

    pub fn matrix(&self) -> BitMatrix {
        let size = self.l * self.m;
        let mut mat = BitMatrix::zeros(size, size);
        for &t in &self.terms {
            let mono = Self::monomial_matrix(self.l, self.m, t);
            for r in 0..size {
                for c in mono.row_support(r) {
                    mat.toggle(r, c);
                }
            }
        }
        mat
    }
}

fn parse_monomial(t: &str) -> Result<(usize, usize), CodeError> {
    let bad = || CodeError::InvalidParameters(format!("cannot parse monomial '{t}'"));
    if t == "1" {
        return Ok((0, 0));
    }
    let (mut i, mut j) = (0usize, 0usize);
    for factor in t.split('*') {
        let (var, exp) = match factor.split_once('^') {
            Some((v, e)) => (v, e.parse::<usize>().map_err(|_| bad())?),
            None => (factor, 1),
        };
        match var {
            "x" => i += exp,
            "y" => j += exp,
            "1" if exp == 1 => {}
            _ => return Err(bad()),
        }
    }
    Ok((i, j))
}

impl fmt::Display for BivariatePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|&(i, j)| {
                let px = match i {
                    0 => None,
                    1 => Some("x".to_string()),
                    e => Some(format!("x^{e}")),
                };
                let py = match j {
                    0 => None,
                    1 => Some("y".to_string()),
                    e => Some(format!("y^{e}")),
                };
                match (px, py) {
                    (None, None) => "1".to_string(),
                    (Some(a), None) | (None, Some(a)) => a,
                    (Some(a), Some(b)) => format!("{a}*{b}"),
                }
            })
            .collect();
        write!(f, "{}", parts.join("+"))
    }
}

/// Stabilizer basis of a memory experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

impl FromStr for Basis {
    type Err = CodeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "X" | "x" => Ok(Basis::X),
            "Z" | "z" => Ok(Basis::Z),
            _ => Err(CodeError::InvalidParameters(format!("unknown basis '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BbCode {
    pub name: String,
    pub l: usize,
    pub m: usize,
    pub poly_a: BivariatePolynomial,
    pub poly_b: BivariatePolynomial,
    pub n: usize,
    pub k: usize,
    /// Column weight of each check matrix (term count of each polynomial).
    pub w: usize,
    pub hx: BitMatrix,
    pub hz: BitMatrix,
    pub logicals_x: BitMatrix,
    pub logicals_z: BitMatrix,
}

/// `Hx = [A | B]`, `Hz = [Bᵀ | Aᵀ]`; qubits `0..lm` form the left block.
pub fn build_code(
    l: usize,
    m: usize,
    poly_a: &BivariatePolynomial,
    poly_b: &BivariatePolynomial,
) -> Result<BbCode, CodeError> {
    if l < 2 || m < 2 {
        return Err(CodeError::InvalidParameters(format!("l={l}, m={m}; both must be ≥ 2")));
    }
    if poly_a.l != l || poly_a.m != m || poly_b.l != l || poly_b.m != m {
        return Err(CodeError::InvalidParameters(
            "polynomial group orders differ from (l, m)".into(),
        ));
    }
    if poly_a.len() != poly_b.len() {
        return Err(CodeError::InvalidParameters(format!(
            "term counts differ: |A|={}, |B|={}",
            poly_a.len(),
            poly_b.len()
        )));
    }
    let a = poly_a.matrix();
    let b = poly_b.matrix();
    let hx = a.hstack(&b);
    let hz = b.transpose().hstack(&a.transpose());
    if !hx.mul(&hz.transpose()).is_zero() {
        return Err(CodeError::CommutationFailure);
    }
    let n = 2 * l * m;
    let k = n - hx.rank() - hz.rank();
    if k == 0 {
        return Err(CodeError::DegenerateCode);
    }
    let mut code = BbCode {
        name: format!("bb-{n}"),
        l,
        m,
        poly_a: poly_a.clone(),
        poly_b: poly_b.clone(),
        n,
        k,
        w: poly_a.len(),
        hx,
        hz,
        logicals_x: BitMatrix::zeros(0, n),
        logicals_z: BitMatrix::zeros(0, n),
    };
    let (lx, lz) = logical_operators(&code)?;
    code.logicals_x = lx;
    code.logicals_z = lz;
    Ok(code)
}

impl BbCode {
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn num_checks(&self) -> usize {
        self.n / 2
    }

    /// Check matrix measured by a memory experiment in `basis`
    /// (Z-type checks detect X errors in a Z-basis memory).
    pub fn check_matrix(&self, basis: Basis) -> &BitMatrix {
        match basis {
            Basis::Z => &self.hz,
            Basis::X => &self.hx,
        }
    }

    /// Logical operators whose parities form the observables of a memory in `basis`.
    pub fn observables(&self, basis: Basis) -> &BitMatrix {
        match basis {
            Basis::Z => &self.logicals_z,
            Basis::X => &self.logicals_x,
        }
    }
}

/// Picks `k` vectors of `ker(commuting)` independent of `rowspace(stabilizers)`.
fn complete_logicals(
    commuting: &BitMatrix,
    stabilizers: &BitMatrix,
    k: usize,
) -> Result<BitMatrix, CodeError> {
    let n = commuting.cols();
    let kernel = commuting.kernel();
    let mut span = stabilizers.row_basis();
    let mut rank = span.rows();
    let mut out = BitMatrix::zeros(0, n);
    for r in 0..kernel.rows() {
        if out.rows() == k {
            break;
        }
        let mut trial = span.clone();
        trial.push_row(kernel.row_words(r));
        let new_rank = trial.rank();
        if new_rank > rank {
            rank = new_rank;
            span = trial;
            out.push_row(kernel.row_words(r));
        }
    }
    if out.rows() != k {
        return Err(CodeError::RankDeficiency(k));
    }
    Ok(out)
}

/// Returns `(logicals_x, logicals_z)` with `Lx · Lzᵀ = I`.
pub fn logical_operators(code: &BbCode) -> Result<(BitMatrix, BitMatrix), CodeError> {
    if code.k == 0 {
        return Err(CodeError::DegenerateCode);
    }
    // X logicals commute with Z checks, Z logicals with X checks
    let lx = complete_logicals(&code.hz, &code.hx, code.k)?;
    let lz = complete_logicals(&code.hx, &code.hz, code.k)?;
    let pairing = lx.mul(&lz.transpose());
    let inv = pairing.inverse().ok_or(CodeError::RankDeficiency(code.k))?;
    let lz = inv.transpose().mul(&lz);
    Ok((lx, lz))
}

/// Minimum weight of a nontrivial logical of the given type, by exhaustive
/// enumeration of the commutant. Only feasible when `n - rank` is small.
pub fn min_logical_weight(code: &BbCode, basis: Basis, max_dim: usize) -> Option<usize> {
    let (commuting, stabs) = match basis {
        Basis::X => (&code.hz, &code.hx),
        Basis::Z => (&code.hx, &code.hz),
    };
    let kernel = commuting.kernel();
    if kernel.rows() > max_dim {
        return None;
    }
    let mut stab_rref = stabs.row_basis();
    let pivots = stab_rref.rref();
    let in_stab_space = |v: &[u64]| {
        let mut v = v.to_vec();
        for (i, &p) in pivots.iter().enumerate() {
            if (v[p / 64] >> (p % 64)) & 1 == 1 {
                for (x, y) in v.iter_mut().zip(stab_rref.row_words(i)) {
                    *x ^= y;
                }
            }
        }
        v.iter().all(|&w| w == 0)
    };
    let mut best: Option<usize> = None;
    gray_walk(&kernel, |v| {
        let w = weight_of(v);
        if w > 0 && best.is_none_or(|b| w < b) && !in_stab_space(v) {
            best = Some(w);
        }
    });
    best
}

/// Visits every nonzero vector of the row space spanned by `rows` (which
/// must be independent) via a Gray-code walk.
fn gray_walk(rows: &BitMatrix, mut visit: impl FnMut(&[u64])) {
    let dim = rows.rows();
    let mut cur = vec![0u64; words_for(rows.cols())];
    for step in 1u64..(1u64 << dim) {
        let flip = step.trailing_zeros() as usize;
        for (x, y) in cur.iter_mut().zip(rows.row_words(flip)) {
            *x ^= y;
        }
        visit(&cur);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StoppingDistance {
    Exact(usize),
    Unknown,
}

/// Largest row-space dimension enumerated exhaustively.
const EXHAUSTIVE_DIM: usize = 24;

/// Minimum weight of a nonzero codeword in the row space of `generator`,
/// searched up to `weight_bound`.
///
/// Small row spaces are enumerated exhaustively. Larger ones use
/// Lee–Brickell information-set sampling for `trials` rounds; a codeword found
/// this way is only an upper bound and is reported as `BudgetExhausted`
/// unless it has weight 1.
pub fn stopping_distance(
    generator: &BitMatrix,
    weight_bound: usize,
    trials: usize,
    seed: u64,
) -> Result<StoppingDistance, CodeError> {
    if weight_bound == 0 {
        return Err(CodeError::InvalidParameters("weight_bound must be ≥ 1".into()));
    }
    let basis = generator.row_basis();
    if basis.rows() == 0 {
        return Ok(StoppingDistance::Unknown);
    }
    if basis.rows() <= EXHAUSTIVE_DIM {
        let mut best = usize::MAX;
        gray_walk(&basis, |v| best = best.min(weight_of(v)));
        return Ok(if best <= weight_bound {
            StoppingDistance::Exact(best)
        } else {
            StoppingDistance::Unknown
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = basis.cols();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut best = usize::MAX;
    for _ in 0..trials.max(1) {
        perm.shuffle(&mut rng);
        let mut permuted = BitMatrix::zeros(basis.rows(), cols);
        for r in 0..basis.rows() {
            for c in basis.row_support(r) {
                permuted.set(r, perm[c], true);
            }
        }
        permuted.rref();
        let rows = permuted.rows();
        for i in 0..rows {
            best = best.min(permuted.row_weight(i));
            for j in i + 1..rows {
                let w: usize = permuted
                    .row_words(i)
                    .iter()
                    .zip(permuted.row_words(j))
                    .map(|(a, b)| (a ^ b).count_ones() as usize)
                    .sum();
                best = best.min(w);
            }
        }
        if best == 1 {
            return Ok(StoppingDistance::Exact(1));
        }
    }
    if best <= weight_bound {
        Err(CodeError::BudgetExhausted { upper_bound: best })
    } else {
        Ok(StoppingDistance::Unknown)
    }
}

/// Generator of the syndrome code: the linear dependencies among the checks
/// measured in `basis` (rows `z` with `zᵀ H = 0`). A nonzero codeword is a
/// set of checks whose outcomes always have even parity, so its minimum
/// weight bounds the measurement-error patterns a single round can hide.
pub fn syndrome_code_generator(code: &BbCode, basis: Basis) -> BitMatrix {
    code.check_matrix(basis).transpose().kernel()
}

/// The code of valid single-round syndromes (column space of `H`).
pub fn valid_syndrome_generator(code: &BbCode, basis: Basis) -> BitMatrix {
    code.check_matrix(basis).transpose()
}

/// A named, declared code with parameters for cross-checking construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeRegistryEntry {
    pub name: String,
    pub l: usize,
    pub m: usize,
    pub poly_a: String,
    pub poly_b: String,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub d_s: Option<usize>,
    pub source: String,
}

impl CodeRegistryEntry {
    pub fn build(&self) -> Result<BbCode, CodeError> {
        let a = BivariatePolynomial::parse(self.l, self.m, &self.poly_a)?;
        let b = BivariatePolynomial::parse(self.l, self.m, &self.poly_b)?;
        Ok(build_code(self.l, self.m, &a, &b)?.with_name(self.name.clone()))
    }

    /// Text form `name l m A=<poly> B=<poly>`.
    pub fn spec_line(&self) -> String {
        format!("{} {} {} A={} B={}", self.name, self.l, self.m, self.poly_a, self.poly_b)
    }
}

fn entry(
    name: &str,
    (l, m): (usize, usize),
    a: &str,
    b: &str,
    (n, k, d): (usize, usize, usize),
    d_s: Option<usize>,
    source: &str,
) -> CodeRegistryEntry {
    CodeRegistryEntry {
        name: name.into(),
        l,
        m,
        poly_a: a.into(),
        poly_b: b.into(),
        n,
        k,
        d,
        d_s,
        source: source.into(),
    }
}

const BRAVYI: &str = "Bravyi et al., Nature 627, 778 (2024)";
const SELECTED: &str = "polynomials chosen here by exhaustive search for the declared (n, k); not published alongside the declared parameters";
const TWO_SHOT: &str = "l = m, A = B = x + y family";

/// Built-in codes. `d` is declared metadata and is not recomputed.
pub fn registry() -> Vec<CodeRegistryEntry> {
    vec![
        entry("bb-18", (3, 3), "1+x+y", "1+y+x^2*y", (18, 4, 4), Some(6), SELECTED),
        entry("bb-24", (3, 4), "1+y", "1+y", (24, 6, 4), None, SELECTED),
        entry("bb-32", (4, 4), "x+y", "x+y", (32, 8, 6), Some(4), TWO_SHOT),
        entry("bb-50", (5, 5), "x+y", "x+y", (50, 10, 12), None, TWO_SHOT),
        entry("gross-72", (6, 6), "x^3+y+y^2", "y^3+x+x^2", (72, 12, 6), Some(16), BRAVYI),
        entry("gross-144", (12, 6), "x^3+y+y^2", "y^3+x+x^2", (144, 12, 12), Some(32), BRAVYI),
        entry("gross-288", (12, 12), "x^3+y^2+y^7", "y^3+x+x^2", (288, 12, 18), Some(64), BRAVYI),
        entry("gross-360", (30, 6), "x^9+y+y^2", "y^3+x^25+x^26", (360, 12, 24), None, BRAVYI),
    ]
}

pub fn registry_entry(name: &str) -> Option<CodeRegistryEntry> {
    registry().into_iter().find(|e| e.name == name)
}

/// Builds a registry code by name.
pub fn named_code(name: &str) -> Result<BbCode, CodeError> {
    registry_entry(name)
        .ok_or_else(|| CodeError::InvalidParameters(format!("unknown code '{name}'")))?
        .build()
}

/// Parses one `name l m A=<poly> B=<poly>` line into a code.
pub fn parse_code_spec(line: &str) -> Result<BbCode, CodeError> {
    parse_code_specs(line)?
        .into_iter()
        .next()
        .ok_or(CodeError::Parse { line: 1, msg: "empty input".into() })
}

/// Parses a file of code specifications; blank lines and `#` comments are skipped.
pub fn parse_code_specs(text: &str) -> Result<Vec<BbCode>, CodeError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| CodeError::Parse { line: idx + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", fields.len())));
        }
        let l: usize = fields[1].parse().map_err(|_| err(format!("bad l '{}'", fields[1])))?;
        let m: usize = fields[2].parse().map_err(|_| err(format!("bad m '{}'", fields[2])))?;
        let a = fields[3]
            .strip_prefix("A=")
            .ok_or_else(|| err("expected A=<poly>".into()))?;
        let b = fields[4]
            .strip_prefix("B=")
            .ok_or_else(|| err("expected B=<poly>".into()))?;
        let pa = BivariatePolynomial::parse(l, m, a).map_err(|e| err(e.to_string()))?;
        let pb = BivariatePolynomial::parse(l, m, b).map_err(|e| err(e.to_string()))?;
        out.push(build_code(l, m, &pa, &pb)?.with_name(fields[0]));
    }
    Ok(out)
}

/// Support of each row, handy for building sparse structures.
pub(crate) fn row_supports(m: &BitMatrix) -> Vec<Vec<usize>> {
    (0..m.rows()).map(|r| support_of(m.row_words(r))).collect()
}
