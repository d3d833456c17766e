//! Bell numbers in exact integer arithmetic.

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// `bell(n)` via the Bell-triangle recurrence; `bell(0) = 1` by convention.
pub fn bell(n: usize) -> BigUint {
    if n == 0 {
        return BigUint::one();
    }
    let mut row = vec![BigUint::one()];
    for _ in 1..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(row.last().unwrap().clone());
        for v in &row {
            let last = next.last().unwrap().clone();
            next.push(last + v);
        }
        row = next;
    }
    row.last().unwrap().clone()
}

/// Iterator-free sequence `bell(1..=n)` sharing one triangle pass.
pub fn bell_sequence(n: usize) -> Vec<BigUint> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let mut row = vec![BigUint::one()];
    out.push(BigUint::one());
    for _ in 1..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(row.last().unwrap().clone());
        for v in &row {
            let last = next.last().unwrap().clone();
            next.push(last + v);
        }
        row = next;
        out.push(row.last().unwrap().clone());
    }
    out
}

/// `log2` of a positive big integer, accurate to double precision: the top
/// 64 bits provide the mantissa and the bit length the exponent.
pub fn log2_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 53 {
        let v: u64 = x.iter_u64_digits().next().unwrap_or(0);
        return (v as f64).log2();
    }
    let shift = bits - 53;
    let top: BigUint = x >> shift;
    let v: u64 = top.iter_u64_digits().next().unwrap();
    (v as f64).log2() + shift as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    #[test]
    fn paper_values() {
        let want = [1u64, 1, 2, 5, 15, 52, 203];
        for (n, &w) in want.iter().enumerate() {
            assert_eq!(bell(n).to_u64().unwrap(), w, "B_{n}");
        }
    }

    #[test]
    fn sequence_matches_singles() {
        let seq = bell_sequence(8);
        for (i, v) in seq.iter().enumerate() {
            assert_eq!(*v, bell(i + 1));
        }
    }

    #[test]
    fn log2_accuracy() {
        let x = BigUint::from(1664u64);
        assert!((log2_biguint(&x) - 1664f64.log2()).abs() < 1e-12);
        let big = bell(50);
        let approx = log2_biguint(&big);
        // cross-check with f64 conversion (B_50 still fits in f64 range)
        let direct = big.to_f64().unwrap().log2();
        assert!((approx - direct).abs() < 1e-9);
    }
}
