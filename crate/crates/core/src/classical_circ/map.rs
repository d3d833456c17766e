//! Bipartite classical reversible maps as explicit truth tables.

use crate::core_linalg::{zeros, BipartiteOp, C64};
use crate::error::{Error, Result};

/// A bijection on `n + m` bits, `n` on party A (most significant) and `m` on
/// party B.
#[derive(Debug, Clone)]
pub struct ReversibleMap {
    pub n_bits_a: usize,
    pub m_bits_b: usize,
    pub table: Vec<usize>,
}

impl ReversibleMap {
    pub fn new(n_bits_a: usize, m_bits_b: usize, table: Vec<usize>) -> Result<Self> {
        let size = 1usize << (n_bits_a + m_bits_b);
        if table.len() != size {
            return Err(Error::BadInput(format!(
                "table has {} entries, expected {size}",
                table.len()
            )));
        }
        let mut seen = vec![false; size];
        for &v in &table {
            if v >= size || seen[v] {
                return Err(Error::BadInput("table is not a bijection".into()));
            }
            seen[v] = true;
        }
        Ok(ReversibleMap { n_bits_a, m_bits_b, table })
    }

    pub fn total_bits(&self) -> usize {
        self.n_bits_a + self.m_bits_b
    }

    /// The corresponding permutation unitary with `dA = 2^n`, `dB = 2^m`.
    pub fn to_bipartite_op(&self) -> BipartiteOp {
        let d = 1usize << self.total_bits();
        let mut m = zeros(d, d);
        for (input, &output) in self.table.iter().enumerate() {
            m[(output, input)] = C64::new(1.0, 0.0);
        }
        BipartiteOp::new(1 << self.n_bits_a, 1 << self.m_bits_b, m).expect("dims")
    }

    /// Identity map.
    pub fn identity(n: usize, m: usize) -> Self {
        let size = 1usize << (n + m);
        ReversibleMap { n_bits_a: n, m_bits_b: m, table: (0..size).collect() }
    }

    /// CNOT with A's single bit controlling B's single bit.
    pub fn cnot() -> Self {
        let table = (0..4).map(|x| x ^ ((x >> 1) & 1)).collect();
        ReversibleMap { n_bits_a: 1, m_bits_b: 1, table }
    }

    /// DCNOT: `(a, b) ↦ (b, a ⊕ b)`.
    pub fn dcnot() -> Self {
        let table = (0..4usize)
            .map(|x| {
                let a = (x >> 1) & 1;
                let b = x & 1;
                (b << 1) | (a ^ b)
            })
            .collect();
        ReversibleMap { n_bits_a: 1, m_bits_b: 1, table }
    }

    /// SWAP of one bit each.
    pub fn swap() -> Self {
        let table = (0..4usize)
            .map(|x| {
                let a = (x >> 1) & 1;
                let b = x & 1;
                (b << 1) | a
            })
            .collect();
        ReversibleMap { n_bits_a: 1, m_bits_b: 1, table }
    }

    /// Parses the text truth-table format: one line per input,
    /// `<in-bits> <out-bits>`.
    pub fn from_text(n: usize, m: usize, text: &str) -> Result<Self> {
        let size = 1usize << (n + m);
        let mut table = vec![usize::MAX; size];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (i, o) = match (parts.next(), parts.next()) {
                (Some(i), Some(o)) => (i, o),
                _ => return Err(Error::Parse(format!("line {}: expected `<in> <out>`", lineno + 1))),
            };
            let parse = |s: &str| -> Result<usize> {
                usize::from_str_radix(s, 2)
                    .map_err(|_| Error::Parse(format!("line {}: bad bit string {s:?}", lineno + 1)))
            };
            let (i, o) = (parse(i)?, parse(o)?);
            if i >= size || o >= size {
                return Err(Error::Parse(format!("line {}: value out of range", lineno + 1)));
            }
            if table[i] != usize::MAX {
                return Err(Error::Parse(format!("line {}: duplicate input", lineno + 1)));
            }
            table[i] = o;
        }
        if table.iter().any(|&v| v == usize::MAX) {
            return Err(Error::Parse("truth table is incomplete".into()));
        }
        ReversibleMap::new(n, m, table)
    }

    pub fn to_text(&self) -> String {
        let w = self.total_bits();
        self.table
            .iter()
            .enumerate()
            .map(|(i, &o)| format!("{:0w$b} {:0w$b}", i, o, w = w))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let m = ReversibleMap::dcnot();
        let txt = m.to_text();
        let back = ReversibleMap::from_text(1, 1, &txt).unwrap();
        assert_eq!(m.table, back.table);
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(ReversibleMap::new(1, 1, vec![0, 0, 1, 2]).is_err());
    }

    #[test]
    fn quantum_lift_matches() {
        let u = ReversibleMap::dcnot().to_bipartite_op();
        let want = crate::structure::fixtures::dcnot();
        assert!((u.matrix - want.matrix).norm() < 1e-12);
    }
}
