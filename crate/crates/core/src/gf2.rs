//! Dense bit-packed matrices over GF(2).

use std::fmt;

#[inline]
pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

/// Row-major binary matrix, each row packed into `u64` words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from rows given as lists of set column indices.
    pub fn from_sparse_rows(cols: usize, rows: &[Vec<usize>]) -> Self {
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            for &c in row {
                m.toggle(r, c);
            }
        }
        m
    }

    pub fn from_dense(rows: &[Vec<u8>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged dense matrix");
            for (c, &v) in row.iter().enumerate() {
                if v & 1 == 1 {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        (self.data[r * self.stride + c / 64] >> (c % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let w = &mut self.data[r * self.stride + c / 64];
        if v {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    #[inline]
    pub fn toggle(&mut self, r: usize, c: usize) {
        self.data[r * self.stride + c / 64] ^= 1 << (c % 64);
    }

    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row_words_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.stride..(r + 1) * self.stride]
    }

    /// Column indices of the set bits in row `r`, ascending.
    pub fn row_support(&self, r: usize) -> Vec<usize> {
        support_of(self.row_words(r))
    }

    pub fn row_weight(&self, r: usize) -> usize {
        self.row_words(r).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn col_weight(&self, c: usize) -> usize {
        (0..self.rows).filter(|&r| self.get(r, c)).count()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&w| w == 0)
    }

    /// `rows[dst] ^= rows[src]`
    pub fn xor_rows(&mut self, dst: usize, src: usize) {
        debug_assert_ne!(dst, src);
        let s = self.stride;
        let (a, b) = if dst < src {
            let (lo, hi) = self.data.split_at_mut(src * s);
            (&mut lo[dst * s..dst * s + s], &hi[..s])
        } else {
            let (lo, hi) = self.data.split_at_mut(dst * s);
            (&mut hi[..s], &lo[src * s..src * s + s])
        };
        for (x, y) in a.iter_mut().zip(b) {
            *x ^= *y;
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.stride {
            self.data.swap(a * self.stride + i, b * self.stride + i);
        }
    }

    pub fn push_row(&mut self, words: &[u64]) {
        assert_eq!(words.len(), self.stride);
        self.data.extend_from_slice(words);
        self.rows += 1;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in support_of(self.row_words(r)) {
                t.set(c, r, true);
            }
        }
        t
    }

    pub fn hstack(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows);
        let mut out = Self::zeros(self.rows, self.cols + rhs.cols);
        for r in 0..self.rows {
            for c in self.row_support(r) {
                out.set(r, c, true);
            }
            for c in rhs.row_support(r) {
                out.set(r, self.cols + c, true);
            }
        }
        out
    }

    pub fn vstack(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.cols);
        let mut out = self.clone();
        out.data.extend_from_slice(&rhs.data);
        out.rows += rhs.rows;
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows);
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in self.row_support(r) {
                let src = rhs.row_words(k).to_vec();
                for (d, s) in out.row_words_mut(r).iter_mut().zip(&src) {
                    *d ^= s;
                }
            }
        }
        out
    }

    /// Matrix-vector product over GF(2); `v` is a packed vector of length `cols`.
    pub fn mul_vec(&self, v: &[u64]) -> Vec<u64> {
        let mut out = vec![0u64; words_for(self.rows)];
        for r in 0..self.rows {
            if dot(self.row_words(r), v) {
                out[r / 64] |= 1 << (r % 64);
            }
        }
        out
    }

    /// Reduced row echelon form in place; returns the pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| self.get(i, c)) else {
                continue;
            };
            self.swap_rows(r, p);
            for i in 0..self.rows {
                if i != r && self.get(i, c) {
                    self.xor_rows(i, r);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    /// Basis of the right null space `{v : M v = 0}`, one vector per row.
    pub fn kernel(&self) -> Self {
        let mut m = self.clone();
        let pivots = m.rref();
        let mut is_pivot = vec![false; self.cols];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let mut basis = Self::zeros(0, self.cols);
        for free in (0..self.cols).filter(|&c| !is_pivot[c]) {
            let mut v = vec![0u64; self.stride];
            v[free / 64] |= 1 << (free % 64);
            for (i, &p) in pivots.iter().enumerate() {
                if m.get(i, free) {
                    v[p / 64] |= 1 << (p % 64);
                }
            }
            basis.push_row(&v);
        }
        basis
    }

    /// Independent rows spanning the row space.
    pub fn row_basis(&self) -> Self {
        let mut m = self.clone();
        let rank = m.rref().len();
        m.data.truncate(rank * m.stride);
        m.rows = rank;
        m
    }

    /// Inverse of a square matrix, if it exists.
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = self.hstack(&Self::identity(n));
        let pivots = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        let mut inv = Self::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                if aug.get(r, n + c) {
                    inv.set(r, c, true);
                }
            }
        }
        Some(inv)
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows.min(64) {
            let line: String = (0..self.cols.min(128))
                .map(|c| if self.get(r, c) { '1' } else { '.' })
                .collect();
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}

#[inline]
pub fn dot(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).fold(0u32, |acc, (x, y)| acc ^ (x & y).count_ones()) & 1 == 1
}

pub fn support_of(words: &[u64]) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, &w) in words.iter().enumerate() {
        let mut w = w;
        while w != 0 {
            out.push(i * 64 + w.trailing_zeros() as usize);
            w &= w - 1;
        }
    }
    out
}

pub fn weight_of(words: &[u64]) -> usize {
    words.iter().map(|w| w.count_ones() as usize).sum()
}

/// Incrementally built echelon basis over GF(2) vectors of fixed length.
///
/// Each stored vector remembers which inserted vectors it combines, so a
/// target reduced against the basis also yields its expansion.
#[derive(Debug, Clone)]
pub struct EchelonBasis {
    words: usize,
    comb_words: usize,
    vectors: Vec<u64>,
    combos: Vec<u64>,
    pivot_bits: Vec<usize>,
    capacity: usize,
}

impl EchelonBasis {
    /// `len` is the vector length in bits, `capacity` the maximum number of basis vectors.
    pub fn new(len: usize, capacity: usize) -> Self {
        let words = words_for(len);
        let comb_words = words_for(capacity.max(1));
        Self {
            words,
            comb_words,
            vectors: Vec::with_capacity(words * capacity),
            combos: Vec::with_capacity(comb_words * capacity),
            pivot_bits: Vec::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.pivot_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivot_bits.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity
    }

    pub fn clear(&mut self) {
        self.vectors.clear();
        self.combos.clear();
        self.pivot_bits.clear();
    }

    pub fn combo_words(&self) -> usize {
        self.comb_words
    }

    /// Reduces `v` in place; `combo` receives the indices of the basis members used.
    pub fn reduce(&self, v: &mut [u64], combo: &mut [u64]) {
        combo.iter_mut().for_each(|w| *w = 0);
        for (i, &bit) in self.pivot_bits.iter().enumerate() {
            if (v[bit / 64] >> (bit % 64)) & 1 == 1 {
                let b = &self.vectors[i * self.words..(i + 1) * self.words];
                for (x, y) in v.iter_mut().zip(b) {
                    *x ^= y;
                }
                let c = &self.combos[i * self.comb_words..(i + 1) * self.comb_words];
                for (x, y) in combo.iter_mut().zip(c) {
                    *x ^= y;
                }
            }
        }
    }

    /// Attempts to add `v`. Returns `true` if it was independent.
    /// `scratch` must have `combo_words()` words.
    pub fn insert(&mut self, v: &mut [u64], scratch: &mut [u64]) -> bool {
        if self.is_full() {
            return false;
        }
        self.reduce(v, scratch);
        let Some(bit) = v
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, &w)| i * 64 + w.trailing_zeros() as usize)
        else {
            return false;
        };
        let idx = self.len();
        scratch[idx / 64] ^= 1 << (idx % 64);
        self.vectors.extend_from_slice(v);
        self.combos.extend_from_slice(scratch);
        self.pivot_bits.push(bit);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_kernel() {
        let m = BitMatrix::from_dense(&[vec![1, 1, 0, 0], vec![0, 1, 1, 0], vec![1, 0, 1, 0]]);
        assert_eq!(m.rank(), 2);
        let k = m.kernel();
        assert_eq!(k.rows(), 2);
        assert!(m.mul(&k.transpose()).is_zero());
    }

    #[test]
    fn inverse_roundtrip() {
        let m = BitMatrix::from_dense(&[vec![1, 1, 0], vec![0, 1, 1], vec![0, 0, 1]]);
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), BitMatrix::identity(3));
        let singular = BitMatrix::from_dense(&[vec![1, 1], vec![1, 1]]);
        assert!(singular.inverse().is_none());
    }

    #[test]
    fn echelon_basis_expansion() {
        let cols = [0b011u64, 0b110, 0b101, 0b100];
        let mut basis = EchelonBasis::new(3, 3);
        let mut scratch = vec![0u64; basis.combo_words()];
        let mut inserted = Vec::new();
        for (i, &c) in cols.iter().enumerate() {
            let mut v = [c];
            if basis.insert(&mut v, &mut scratch) {
                inserted.push(i);
            }
        }
        // 0b101 = 0b011 ^ 0b110 is dependent
        assert_eq!(inserted, vec![0, 1, 3]);
        let mut target = [0b111u64];
        let mut combo = vec![0u64; basis.combo_words()];
        basis.reduce(&mut target, &mut combo);
        assert_eq!(target[0], 0);
        let used: u64 = support_of(&combo)
            .into_iter()
            .map(|j| cols[inserted[j]])
            .fold(0, |a, b| a ^ b);
        assert_eq!(used, 0b111);
    }
}
