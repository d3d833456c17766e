//! Exact cost expressions: rational constants plus rational multiples of
//! base-2 logs of exact integers, so golden tests compare structurally.

use super::bell::log2_biguint;
use num_bigint::BigUint;

/// `constant + Σ coeff_i · log2(arg_i)` with exact integer arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct CostExpr {
    pub constant: f64,
    pub log_terms: Vec<(f64, BigUint)>,
}

impl CostExpr {
    pub fn zero() -> Self {
        CostExpr { constant: 0.0, log_terms: vec![] }
    }

    pub fn constant(c: f64) -> Self {
        CostExpr { constant: c, log_terms: vec![] }
    }

    pub fn log2_of(n: u64) -> Self {
        CostExpr { constant: 0.0, log_terms: vec![(1.0, BigUint::from(n))] }
    }

    pub fn log2_big(n: BigUint) -> Self {
        CostExpr { constant: 0.0, log_terms: vec![(1.0, n)] }
    }

    pub fn scaled(&self, f: f64) -> Self {
        CostExpr {
            constant: self.constant * f,
            log_terms: self.log_terms.iter().map(|(c, a)| (c * f, a.clone())).collect(),
        }
    }

    pub fn plus(&self, other: &CostExpr) -> Self {
        let mut log_terms = self.log_terms.clone();
        log_terms.extend(other.log_terms.iter().cloned());
        CostExpr { constant: self.constant + other.constant, log_terms }
    }

    /// Folds integer-coefficient log terms into a single `log2(Π arg^coeff)`
    /// when all coefficients are positive integers.
    pub fn folded(&self) -> Self {
        let mut prod = BigUint::from(1u32);
        for (c, a) in &self.log_terms {
            if c.fract() != 0.0 || *c < 1.0 {
                return self.clone();
            }
            for _ in 0..(*c as u64) {
                prod *= a;
            }
        }
        let mut constant = self.constant;
        let mut shift = 0u64;
        // absorb an integer constant as a power of two
        if constant.fract() == 0.0 && constant > 0.0 && constant < 1024.0 {
            shift = constant as u64;
            constant = 0.0;
        }
        CostExpr { constant, log_terms: vec![(1.0, prod << shift)] }
    }

    pub fn value(&self) -> f64 {
        self.constant + self.log_terms.iter().map(|(c, a)| c * log2_biguint(a)).sum::<f64>()
    }

    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        if self.constant != 0.0 || self.log_terms.is_empty() {
            parts.push(format!("{}", self.constant));
        }
        for (c, a) in &self.log_terms {
            if (*c - 1.0).abs() < 1e-15 {
                parts.push(format!("log2({a})"));
            } else {
                parts.push(format!("{c}*log2({a})"));
            }
        }
        parts.join(" + ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_and_value() {
        // log2(52) + 5 + log2(5)  =  log2(52 * 32 * 5)
        let e = CostExpr::log2_of(52).plus(&CostExpr::constant(5.0)).plus(&CostExpr::log2_of(5));
        let f = e.folded();
        assert_eq!(f.log_terms.len(), 1);
        assert_eq!(f.log_terms[0].1, BigUint::from(52u64 * 32 * 5));
        assert!((e.value() - f.value()).abs() < 1e-12);
        assert!((e.value() - (52f64 * 32.0 * 5.0).log2()).abs() < 1e-12);
    }
}
