//! Privacy amplification over GF(2).
//!
//! Alice and Bob share an n-bit reconciled key `v`. They publish a random
//! n×(n−k) matrix `H` of full rank and keep `κ = vG`, where the k columns of
//! `G` form a basis of the vectors orthogonal to every column of `H`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::qmath::binary_entropy;

fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

fn tail_mask(bits: usize) -> u64 {
    match bits % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// Packed bit string, bit `i` at word `i / 64`, position `i % 64`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.len)
            .map(|i| if self.get(i) { '1' } else { '0' })
            .collect();
        write!(f, "BitVector({s})")
    }
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    pub fn random(len: usize, rng: &mut impl Rng) -> Self {
        let mut v = Self::zeros(len);
        for w in &mut v.words {
            *w = rng.random();
        }
        v.clear_tail();
        v
    }

    fn clear_tail(&mut self) {
        if let Some(last) = self.words.last_mut() {
            *last &= tail_mask(self.len);
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of {}", self.len);
        let m = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn xor(&self, other: &BitVector) -> Result<BitVector> {
        if self.len != other.len {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} bits",
                self.len, other.len
            )));
        }
        let mut out = self.clone();
        out.xor_assign_words(&other.words);
        Ok(out)
    }

    fn xor_assign_words(&mut self, words: &[u64]) {
        for (a, b) in self.words.iter_mut().zip(words) {
            *a ^= b;
        }
    }

    /// Parity of the bitwise AND.
    pub fn dot(&self, other: &BitVector) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum::<u32>()
            % 2
            == 1
    }

    /// Hex digits, first bit as the most significant bit of the first digit,
    /// zero-padded at the end.
    pub fn to_hex(&self) -> String {
        let digits = self.len.div_ceil(4);
        (0..digits)
            .map(|d| {
                let mut nibble = 0u32;
                for j in 0..4 {
                    let i = 4 * d + j;
                    nibble <<= 1;
                    if i < self.len && self.get(i) {
                        nibble |= 1;
                    }
                }
                char::from_digit(nibble, 16).expect("nibble < 16")
            })
            .collect()
    }

    pub fn from_hex(s: &str, len: usize) -> Result<Self> {
        if s.len() != len.div_ceil(4) {
            return Err(Error::DimensionMismatch(format!(
                "{} hex digits for {len} bits",
                s.len()
            )));
        }
        let mut v = Self::zeros(len);
        for (d, c) in s.chars().enumerate() {
            let nibble = c
                .to_digit(16)
                .ok_or_else(|| Error::DimensionMismatch(format!("not a hex digit: {c:?}")))?;
            for j in 0..4 {
                let bit = nibble >> (3 - j) & 1 == 1;
                let i = 4 * d + j;
                if i < len {
                    v.set(i, bit);
                } else if bit {
                    return Err(Error::DimensionMismatch("nonzero padding bits".into()));
                }
            }
        }
        Ok(v)
    }
}

/// Dense binary matrix with bit-packed rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    data: Vec<BitVector>,
}

impl fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Gf2Matrix {}x{}", self.rows, self.cols)?;
        for r in &self.data {
            writeln!(f, "  {r:?}")?;
        }
        Ok(())
    }
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![BitVector::zeros(cols); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        Self {
            rows,
            cols,
            data: (0..rows).map(|_| BitVector::random(cols, rng)).collect(),
        }
    }

    pub fn from_rows(rows: Vec<BitVector>) -> Result<Self> {
        let cols = rows.first().map_or(0, BitVector::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows,
        })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[BitVector], rows: usize) -> Result<Self> {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} has {} bits, expected {rows}",
                    c.len()
                )));
            }
            for i in 0..rows {
                m.set(i, j, c.get(i));
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i].get(j)
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.data[i].set(j, value);
    }

    pub fn row(&self, i: usize) -> &BitVector {
        &self.data[i]
    }

    pub fn column(&self, j: usize) -> BitVector {
        let mut c = BitVector::zeros(self.rows);
        for i in 0..self.rows {
            c.set(i, self.get(i, j));
        }
        c
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(BitVector::is_zero)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.get(i, j) {
                    t.set(j, i, true);
                }
            }
        }
        t
    }

    pub fn mul(&self, other: &Gf2Matrix) -> Result<Gf2Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                if self.get(i, l) {
                    out.data[i].xor_assign_words(&other.data[l].words);
                }
            }
        }
        Ok(out)
    }

    /// `v·M` for a row vector `v`.
    pub fn left_mul_vector(&self, v: &BitVector) -> Result<BitVector> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}-bit vector times {}x{}",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        let mut out = BitVector::zeros(self.cols);
        for i in 0..self.rows {
            if v.get(i) {
                out.xor_assign_words(&self.data[i].words);
            }
        }
        Ok(out)
    }

    /// Reduced row echelon form and its pivot columns.
    fn rref(&self) -> (Vec<BitVector>, Vec<usize>) {
        let mut rows = self.data.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == rows.len() {
                break;
            }
            let Some(p) = (r..rows.len()).find(|&i| rows[i].get(c)) else {
                continue;
            };
            rows.swap(r, p);
            let pivot = rows[r].words.clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i != r && row.get(c) {
                    row.xor_assign_words(&pivot);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (rows, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of `{x : M x = 0}`, one vector per free column.
    pub fn null_space(&self) -> Vec<BitVector> {
        let (rows, pivots) = self.rref();
        let mut is_pivot = vec![false; self.cols];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        (0..self.cols)
            .filter(|&f| !is_pivot[f])
            .map(|f| {
                let mut x = BitVector::zeros(self.cols);
                x.set(f, true);
                for (i, &p) in pivots.iter().enumerate() {
                    if rows[i].get(f) {
                        x.set(p, true);
                    }
                }
                x
            })
            .collect()
    }
}

/// Uniformly random `rows × cols` matrix of full column rank, by rejection.
pub fn random_full_rank(rows: usize, cols: usize, rng: &mut impl Rng) -> Result<Gf2Matrix> {
    if cols > rows {
        return Err(Error::InfeasibleDimensions(format!(
            "rank {cols} in a {rows}x{cols} matrix"
        )));
    }
    loop {
        let m = Gf2Matrix::random(rows, cols, rng);
        if m.rank() == cols {
            return Ok(m);
        }
    }
}

/// A uniformly random basis of the vectors orthogonal to every column of `h`,
/// as the columns of an `n × k` matrix.
pub fn sample_key_matrix(h: &Gf2Matrix, rng: &mut impl Rng) -> Result<Gf2Matrix> {
    let basis = h.transpose().null_space();
    let k = basis.len();
    let b = Gf2Matrix::from_columns(&basis, h.rows())?;
    let a = random_full_rank(k, k, rng)?;
    b.mul(&a)
}

/// Draws `(G, H)` with `G` of size n×k, `H` of size n×(n−k), both of full
/// rank, and `GᵀH = 0`.
pub fn sample_pa_matrices(n: usize, k: usize, seed: u64) -> Result<(Gf2Matrix, Gf2Matrix)> {
    if !(0 < k && k < n) {
        return Err(Error::InfeasibleDimensions(format!(
            "need 0 < k < n, got n={n}, k={k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = random_full_rank(n, n - k, &mut rng)?;
    let g = sample_key_matrix(&h, &mut rng)?;
    Ok((g, h))
}

/// `κ = vG`.
pub fn extract_key(v: &BitVector, g: &Gf2Matrix) -> Result<BitVector> {
    g.left_mul_vector(v)
}

/// Final key length `k = n − ⌈n(H(δ′) + 2ε)⌉`, floored at zero.
pub fn pa_output_length(n: usize, delta_y_prime: f64, epsilon: f64) -> Result<usize> {
    let h = binary_entropy(delta_y_prime)?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: epsilon,
            range: "[0, inf)",
        });
    }
    let removed = (n as f64 * (h + 2.0 * epsilon)).ceil();
    Ok(if removed >= n as f64 {
        0
    } else {
        n - removed as usize
    })
}

/// Header `n,k`, then the n rows of `G`, then the n rows of `H`, each row as
/// hex digits.
pub fn serialize_pa(g: &Gf2Matrix, h: &Gf2Matrix) -> Result<String> {
    let n = g.rows();
    if h.rows() != n || g.cols() + h.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "G {}x{}, H {}x{}",
            g.rows(),
            g.cols(),
            h.rows(),
            h.cols()
        )));
    }
    let mut s = format!("{n},{}\n", g.cols());
    for m in [g, h] {
        for i in 0..n {
            s.push_str(&m.row(i).to_hex());
            s.push('\n');
        }
    }
    Ok(s)
}

pub fn parse_pa(text: &str) -> Result<(Gf2Matrix, Gf2Matrix)> {
    let bad = |msg: String| Error::Config { line: 1, msg };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
    let (n, k) = header
        .split_once(',')
        .and_then(|(a, b)| {
            Some((
                a.trim().parse::<usize>().ok()?,
                b.trim().parse::<usize>().ok()?,
            ))
        })
        .ok_or_else(|| bad(format!("bad header {header:?}")))?;
    if k > n {
        return Err(bad(format!("k={k} exceeds n={n}")));
    }
    let mut read = |cols: usize| -> Result<Gf2Matrix> {
        let rows = (0..n)
            .map(|_| {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::DimensionMismatch("missing row".into()))?;
                BitVector::from_hex(line.trim(), cols)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut m = Gf2Matrix::from_rows(rows)?;
        m.cols = cols;
        Ok(m)
    };
    let g = read(k)?;
    let h = read(n - k)?;
    Ok((g, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_one() {
        let h = Gf2Matrix::from_columns(&[BitVector::from_bits(&[true, true])], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = sample_key_matrix(&h, &mut rng).unwrap();
        assert_eq!(g.column(0), BitVector::from_bits(&[true, true]));
        assert!(g.transpose().mul(&h).unwrap().is_zero());
    }

    #[test]
    fn sampled_matrices_are_consistent() {
        for seed in 0..20 {
            let (g, h) = sample_pa_matrices(8, 3, seed).unwrap();
            assert_eq!((g.rows(), g.cols(), h.cols()), (8, 3, 5));
            assert_eq!(g.rank(), 3);
            assert_eq!(h.rank(), 5);
            assert!(g.transpose().mul(&h).unwrap().is_zero());
        }
        let (_, h) = sample_pa_matrices(10, 9, 4).unwrap();
        assert_eq!(h.cols(), 1);
        assert!(!h.column(0).is_zero());
        assert!(sample_pa_matrices(4, 0, 0).is_err());
        assert!(sample_pa_matrices(4, 4, 0).is_err());
    }

    #[test]
    fn extraction() {
        let (g, _) = sample_pa_matrices(70, 20, 11).unwrap();
        assert!(extract_key(&BitVector::zeros(70), &g).unwrap().is_zero());
        assert!(extract_key(&BitVector::zeros(69), &g).is_err());

        let mut id = Gf2Matrix::zeros(6, 3);
        for i in 0..3 {
            id.set(i, i, true);
        }
        let v = BitVector::from_bits(&[true, false, true, true, true, false]);
        assert_eq!(
            extract_key(&v, &id).unwrap(),
            BitVector::from_bits(&[true, false, true])
        );
    }

    #[test]
    fn output_length() {
        assert_eq!(pa_output_length(1000, 0.0, 0.0).unwrap(), 1000);
        assert_eq!(pa_output_length(1000, 0.5, 0.0).unwrap(), 0);
        assert_eq!(pa_output_length(10_000, 0.11, 0.01).unwrap(), 4800);
        assert_eq!(pa_output_length(100, 0.3, 0.3).unwrap(), 0);
        assert!(pa_output_length(100, 1.2, 0.0).is_err());
    }

    #[test]
    fn null_space_and_rank() {
        let m = Gf2Matrix::from_rows(vec![
            BitVector::from_bits(&[true, true, false, false]),
            BitVector::from_bits(&[false, true, true, false]),
            BitVector::from_bits(&[true, false, true, false]),
        ])
        .unwrap();
        assert_eq!(m.rank(), 2);
        let ns = m.null_space();
        assert_eq!(ns.len(), 2);
        for x in &ns {
            for i in 0..3 {
                assert!(!m.row(i).dot(x));
            }
        }
        assert_eq!(Gf2Matrix::identity(5).rank(), 5);
    }

    #[test]
    fn hex_round_trip() {
        let v = BitVector::from_bits(&[true, false, false, false, true]);
        assert_eq!(v.to_hex(), "88");
        assert_eq!(BitVector::from_hex("88", 5).unwrap(), v);
        assert!(BitVector::from_hex("8c", 5).is_err());
        assert!(BitVector::from_hex("8", 5).is_err());

        let (g, h) = sample_pa_matrices(13, 5, 2).unwrap();
        let text = serialize_pa(&g, &h).unwrap();
        assert!(text.starts_with("13,5\n"));
        assert_eq!(text.lines().count(), 27);
        assert_eq!(parse_pa(&text).unwrap(), (g, h));
    }
}
