//! The closed-form bounds from the structure and protocol analysis.

use super::bell::bell;
use super::expr::CostExpr;
use crate::error::{Error, Result};
use num_bigint::BigUint;

/// Where a bound comes from; rendered in reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostSource(pub String);

/// One costed alternative: ebits/cbits as exact expressions.
#[derive(Debug, Clone)]
pub struct CostAlternative {
    pub source: CostSource,
    pub ebits: CostExpr,
    pub cbits: CostExpr,
    pub protocol: String,
}

/// The cheapest applicable bound plus all alternatives, sorted by ebits.
#[derive(Debug, Clone)]
pub struct CostReport {
    pub ebits: f64,
    pub cbits: f64,
    pub ebits_expr: CostExpr,
    pub cbits_expr: CostExpr,
    pub source: CostSource,
    pub applicable_protocol: String,
    pub alternatives: Vec<CostAlternative>,
}

impl CostReport {
    pub fn from_alternatives(mut alts: Vec<CostAlternative>) -> CostReport {
        alts.sort_by(|a, b| a.ebits.value().partial_cmp(&b.ebits.value()).unwrap());
        let best = alts[0].clone();
        CostReport {
            ebits: best.ebits.value(),
            cbits: best.cbits.value(),
            ebits_expr: best.ebits,
            cbits_expr: best.cbits,
            source: best.source,
            applicable_protocol: best.protocol,
            alternatives: alts,
        }
    }
}

/// Basic controlled-unitary cost: `log2 N` ebits and `2 log2 N` c-bits.
pub fn bound_controlled(n_terms: usize) -> Result<CostReport> {
    if n_terms == 0 {
        return Err(Error::BadInput("controlled form needs at least one term".into()));
    }
    let e = CostExpr::log2_of(n_terms as u64);
    Ok(CostReport::from_alternatives(vec![CostAlternative {
        source: CostSource("basic controlled-unitary protocol".into()),
        cbits: e.scaled(2.0),
        ebits: e,
        protocol: "ct".into(),
    }]))
}

/// Rank-3 controlled-unitary bound:
/// ebits `log2 min{dA, dB², 4⌊dB/2⌋+2}`,
/// cbits `2 log2 min{dA, dB², max{12, 4⌊dB/2⌋+2}}`.
pub fn bound_rank3(d_a: usize, d_b: usize) -> Result<CostReport> {
    if d_a < 3 || d_b < 2 {
        return Err(Error::BadInput(format!(
            "rank-3 bound requires dA ≥ 3 and dB ≥ 2, got dA={d_a}, dB={d_b}"
        )));
    }
    let dihedral = 4 * (d_b / 2) + 2;
    let e_arg = d_a.min(d_b * d_b).min(dihedral) as u64;
    let c_arg = d_a.min(d_b * d_b).min(12usize.max(dihedral)) as u64;
    let ebits = CostExpr::log2_of(e_arg);
    let cbits = CostExpr::log2_of(c_arg).scaled(2.0);
    Ok(CostReport::from_alternatives(vec![CostAlternative {
        source: CostSource("rank-3 standard form: min{dA, dB^2, 4*floor(dB/2)+2}".into()),
        ebits,
        cbits,
        protocol: if e_arg as usize == d_a {
            "ct".into()
        } else if e_arg as usize == d_b * d_b {
            "two-way teleportation".into()
        } else {
            "group (dihedral)".into()
        },
    }]))
}

/// General permutation-unitary bound by Schmidt rank.
pub fn bound_permutation(r: usize) -> Result<CostReport> {
    if r == 0 {
        return Err(Error::BadInput("rank must be positive".into()));
    }
    let mut alts: Vec<CostAlternative> = Vec::new();
    match r {
        1 => alts.push(CostAlternative {
            source: CostSource("product operator: no resources".into()),
            ebits: CostExpr::zero(),
            cbits: CostExpr::zero(),
            protocol: "local".into(),
        }),
        2 => alts.push(CostAlternative {
            source: CostSource("two-term controlled form of rank-2 permutations".into()),
            ebits: CostExpr::constant(1.0),
            cbits: CostExpr::constant(2.0),
            protocol: "ct".into(),
        }),
        3 => alts.push(CostAlternative {
            source: CostSource("rank-3 permutation classification: 2 ebits, 4 c-bits".into()),
            ebits: CostExpr::constant(2.0),
            cbits: CostExpr::constant(4.0),
            protocol: "ct/two-level".into(),
        }),
        _ => {}
    }
    if r >= 4 {
        let first = CostExpr::log2_big(bell(r + 1))
            .plus(&CostExpr::constant(r as f64))
            .plus(&CostExpr::log2_of(r as u64))
            .folded();
        let second = CostExpr::constant((8 * r - 8) as f64);
        alts.push(CostAlternative {
            source: CostSource(format!("type-system protocol: log2(B_{}) + {} + log2({})", r + 1, r, r)),
            cbits: first.scaled(2.0),
            ebits: first,
            protocol: "ptl2".into(),
        });
        alts.push(CostAlternative {
            source: CostSource(format!("loose-type compute-uncompute protocol: 8r-8 = {}", 8 * r - 8)),
            cbits: second.scaled(2.0),
            ebits: second,
            protocol: "ptl3".into(),
        });
        if r == 4 {
            // Rank-4 refinement: worst case log2(B_5 · 2 · 2^4) = log2 1664.
            let refined = CostExpr::log2_big(BigUint::from(52u64 * 2 * 16));
            alts.push(CostAlternative {
                source: CostSource("rank-4 big-column case analysis: log2(52*2*16) < 10.71".into()),
                cbits: refined.scaled(2.0),
                ebits: refined,
                protocol: "ptl2".into(),
            });
        }
    }
    Ok(CostReport::from_alternatives(alts))
}

/// Nonlocal-CNOT bound for bipartite classical reversible maps.
/// Restore regime: `min{2⌈log2 B_{r+1}⌉ + 2r + 2⌈log2 r⌉, 8r−8}`;
/// otherwise `2r−2`.
pub fn bound_classical(r: usize, restore_ancillas: bool) -> Result<usize> {
    if r == 0 {
        return Err(Error::BadInput("rank must be positive".into()));
    }
    if r == 1 {
        return Ok(0);
    }
    if !restore_ancillas {
        return Ok(2 * r - 2);
    }
    let b = bell(r + 1);
    let ceil_log2 = |x: &BigUint| -> usize {
        let bits = x.bits() as usize;
        if x.count_ones() == 1 {
            bits - 1
        } else {
            bits
        }
    };
    let first = 2 * ceil_log2(&b) + 2 * r + 2 * ceil_log2(&BigUint::from(r));
    Ok(first.min(8 * r - 8))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank3_bound_examples() {
        let r = bound_rank3(100, 2).unwrap();
        assert!((r.ebits - 2.0).abs() < 1e-12);
        assert!((r.cbits - 4.0).abs() < 1e-12);
        let r = bound_rank3(3, 2).unwrap();
        assert!((r.ebits - 3f64.log2()).abs() < 1e-12);
        let r = bound_rank3(100, 3).unwrap();
        assert!((r.ebits - 6f64.log2()).abs() < 1e-12);
        assert!(bound_rank3(2, 2).is_err());
    }

    #[test]
    fn permutation_bound_examples() {
        let r3 = bound_permutation(3).unwrap();
        assert_eq!(r3.ebits, 2.0);
        assert_eq!(r3.cbits, 4.0);
        let r4 = bound_permutation(4).unwrap();
        assert!((r4.ebits - 1664f64.log2()).abs() < 1e-9);
        assert!(r4.ebits < 10.71);
        let r5 = bound_permutation(5).unwrap();
        let want = (203f64 * 32.0 * 5.0).log2();
        assert!((r5.ebits - want).abs() < 1e-9);
        assert!((r5.ebits - 14.987).abs() < 5e-3);
    }

    #[test]
    fn controlled_bound_examples() {
        assert!((bound_controlled(2).unwrap().ebits - 1.0).abs() < 1e-12);
        assert_eq!(bound_controlled(1).unwrap().ebits, 0.0);
        let r = bound_controlled(8).unwrap();
        assert!((r.ebits - 3.0).abs() < 1e-12); // 2^{r-1} terms with r = 4
    }

    #[test]
    fn classical_bound_examples() {
        assert_eq!(bound_classical(2, true).unwrap(), 8);
        assert_eq!(bound_classical(2, false).unwrap(), 2);
        assert_eq!(bound_classical(4, true).unwrap(), 24);
    }

    #[test]
    fn monotone_in_rank() {
        let mut prev = 0.0;
        for r in 1..=12 {
            let v = bound_permutation(r).unwrap().ebits;
            assert!(v >= prev - 1e-12, "r={r}: {v} < {prev}");
            prev = v;
        }
    }
}
