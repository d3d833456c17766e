//! Dispatch over the structural analyses to pick the cheapest applicable
//! protocol bound for a given operator.

use super::bounds::{bound_controlled, bound_permutation, bound_rank3, CostAlternative, CostReport, CostSource};
use super::expr::CostExpr;
use crate::core_linalg::{operator_schmidt, BipartiteOp};
use crate::error::Result;
use crate::structure::{
    detect_controlled, loose_type_partition, permutation_type_partitions, Side,
};

/// Runs the structure analyses on `u` and returns the minimum bound among the
/// applicable results, with each alternative citing its source.
pub fn recommend(u: &BipartiteOp) -> Result<CostReport> {
    u.check_unitary(crate::DEFAULT_TOL)?;
    let rank = operator_schmidt(u, crate::DEFAULT_TOL)?.rank();
    let mut alts: Vec<CostAlternative> = Vec::new();

    // Fallback: two-way teleportation of the smaller side.
    let dmin = u.d_a.min(u.d_b) as u64;
    let tele = CostExpr::log2_of(dmin * dmin);
    alts.push(CostAlternative {
        source: CostSource(format!("two-way teleportation of the {}-dimensional side", dmin)),
        cbits: tele.scaled(2.0),
        ebits: tele,
        protocol: "teleport".into(),
    });

    if rank == 1 {
        alts.push(CostAlternative {
            source: CostSource("product operator: local gates only".into()),
            ebits: CostExpr::zero(),
            cbits: CostExpr::zero(),
            protocol: "local".into(),
        });
    }

    // Controlled forms on either side.
    for side in [Side::A, Side::B] {
        if let Some(f) = detect_controlled(u, side)? {
            let b = bound_controlled(f.n_terms())?;
            alts.push(CostAlternative {
                source: CostSource(format!("{}-term controlled form from {}", f.n_terms(), side)),
                ebits: b.ebits_expr.clone(),
                cbits: b.cbits_expr.clone(),
                protocol: "ct".into(),
            });
        }
    }

    // Rank-3 controlled: the standard-form bound. The controlling side's
    // dimension plays the role of dA.
    if rank == 3 {
        for side in [Side::A, Side::B] {
            if detect_controlled(u, side)?.is_some() {
                let (da, db) = match side {
                    Side::A => (u.d_a, u.d_b),
                    Side::B => (u.d_b, u.d_a),
                };
                if da >= 3 && db >= 2 {
                    let b = bound_rank3(da, db)?;
                    alts.push(CostAlternative {
                        source: b.source.clone(),
                        ebits: b.ebits_expr.clone(),
                        cbits: b.cbits_expr.clone(),
                        protocol: b.applicable_protocol.clone(),
                    });
                }
            }
        }
    }

    if u.is_permutation(crate::DEFAULT_TOL) {
        // Rank-specific and general permutation bounds.
        let bp = match rank {
            4 => rank4_refined(u)?,
            _ => bound_permutation(rank)?,
        };
        for a in bp.alternatives {
            alts.push(a);
        }
        // Concrete type-system accounting for this operator (the ptl2 ledger).
        let info = permutation_type_partitions(u)?;
        let e = CostExpr::log2_of(info.input_a.len() as u64)
            .plus(&CostExpr::log2_of(info.relative_output_dim as u64))
            .plus(&CostExpr::log2_of(info.output_b.len() as u64))
            .folded();
        alts.push(CostAlternative {
            source: CostSource(format!(
                "ptl2 accounting: log2({}*{}*{}) from the type partitions",
                info.input_a.len(),
                info.relative_output_dim,
                info.output_b.len()
            )),
            cbits: e.scaled(2.0),
            ebits: e,
            protocol: "ptl2".into(),
        });
        // Concrete loose-type accounting (the ptl3 ledger).
        let la = loose_type_partition(u, Side::A)?.len() as u64;
        let lb = loose_type_partition(u, Side::B)?.len() as u64;
        let ud = BipartiteOp::new(u.d_a, u.d_b, u.matrix.adjoint())?;
        let la2 = loose_type_partition(&ud, Side::A)?.len() as u64;
        let lb2 = loose_type_partition(&ud, Side::B)?.len() as u64;
        let e3 = CostExpr::log2_of(la)
            .plus(&CostExpr::log2_of(lb))
            .plus(&CostExpr::log2_of(la2))
            .plus(&CostExpr::log2_of(lb2))
            .scaled(2.0);
        alts.push(CostAlternative {
            source: CostSource(format!(
                "ptl3 accounting: 2(log2 {la} + log2 {lb} + log2 {la2} + log2 {lb2}) from loose types"
            )),
            cbits: e3.scaled(2.0),
            ebits: e3,
            protocol: "ptl3".into(),
        });
    }

    // Diagonal rank-3 complex permutations: flag the open problem.
    if rank == 3 && u.is_complex_permutation(crate::DEFAULT_TOL) && !u.is_permutation(crate::DEFAULT_TOL) {
        let diagonal = (0..u.dim()).all(|i| {
            (0..u.dim()).all(|j| i == j || u.matrix[(i, j)].norm() <= crate::DEFAULT_TOL)
        });
        if diagonal {
            alts.push(CostAlternative {
                source: CostSource(
                    "diagonal rank-3 complex permutation: no constant bound known".into(),
                ),
                ebits: CostExpr::log2_of(u.d_a.min(u.d_b * u.d_b) as u64),
                cbits: CostExpr::log2_of(u.d_a.min(u.d_b * u.d_b) as u64).scaled(2.0),
                protocol: "ct".into(),
            });
        }
    }

    Ok(CostReport::from_alternatives(alts))
}

/// Rank-4 permutations: pick the corollary branch by the maximal big-column
/// block count (4 → controlled; 3 → three-level recursion; else the refined
/// log2(52·2·16) figure).
fn rank4_refined(u: &BipartiteOp) -> Result<CostReport> {
    let profile = crate::structure::block_profile(u)?;
    let maxcol = profile.max_blocks_per_big_column().max(profile.max_blocks_per_big_row());
    let mut alts = bound_permutation(4)?.alternatives;
    match maxcol {
        4 => alts.push(CostAlternative {
            source: CostSource("big column with 4 blocks: 4-term controlled, 2 ebits".into()),
            ebits: CostExpr::constant(2.0),
            cbits: CostExpr::constant(4.0),
            protocol: "ct".into(),
        }),
        3 => alts.push(CostAlternative {
            source: CostSource("big column with 3 blocks: max{2+log2 2, 1+log2 3} = 3 ebits".into()),
            ebits: CostExpr::constant(3.0),
            cbits: CostExpr::constant(6.0),
            protocol: "two-level".into(),
        }),
        _ => {}
    }
    Ok(CostReport::from_alternatives(alts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::fixtures;

    #[test]
    fn cnot_recommends_one_ebit() {
        let r = recommend(&fixtures::cnot()).unwrap();
        assert!((r.ebits - 1.0).abs() < 1e-12);
        assert_eq!(r.applicable_protocol, "ct");
    }

    #[test]
    fn example4_recommends_ptl2_accounting() {
        let r = recommend(&fixtures::example4()).unwrap();
        assert!((r.ebits - 12f64.log2()).abs() < 1e-9);
        assert_eq!(r.applicable_protocol, "ptl2");
        // beats two-way teleportation 2 log2 5
        assert!(r.ebits < 2.0 * 5f64.log2());
        let tele = r
            .alternatives
            .iter()
            .find(|a| a.protocol == "teleport")
            .unwrap();
        assert!(tele.ebits.value() > 4.64);
    }

    #[test]
    fn rank3_permutation_two_ebits() {
        let u = fixtures::perm_u_4terms(0, 2, 2).unwrap();
        let r = recommend(&u).unwrap();
        assert!(r.ebits <= 2.0 + 1e-12);
    }

    #[test]
    fn alternatives_sorted() {
        let r = recommend(&fixtures::example4()).unwrap();
        for w in r.alternatives.windows(2) {
            assert!(w[0].ebits.value() <= w[1].ebits.value() + 1e-12);
        }
    }
}
