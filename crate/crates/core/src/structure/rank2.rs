//! Two-term standard form for Schmidt-rank-two (complex) permutation
//! unitaries.

use super::controlled::{
    b_controlled_from_projectorized, detect_controlled, projectorize_big_column,
    projectorize_big_row, ControlledForm, ControlledTerm, Side,
};
use crate::core_linalg::{ident, zeros, BipartiteOp, C64};
use crate::error::{Error, Result};

/// Rewrites a Schmidt-rank-two (complex when `complex` is set) permutation
/// unitary as a two-term controlled form with the realizing local (complex)
/// permutations. The control side comes out as A or B depending on the block
/// pattern.
pub fn rank2_standard_form(u: &BipartiteOp, complex: bool) -> Result<ControlledForm> {
    let tol = crate::DEFAULT_TOL;
    if complex {
        if !u.is_complex_permutation(tol) {
            return Err(Error::NotPermutation);
        }
    } else if !u.is_permutation(tol) {
        return Err(Error::NotPermutation);
    }
    let rank = crate::core_linalg::operator_schmidt(u, tol)?.rank();
    if rank != 2 {
        return Err(Error::WrongSchmidtRank { expected: 2, found: rank });
    }

    // A big row or column with two nonzero blocks yields a B-side two-term
    // form by projectorization.
    for y in 0..u.d_a {
        if let Some(pz) = projectorize_big_row(u, y) {
            if pz.block_positions.len() == 2 {
                if let Some(f) = b_controlled_from_projectorized(u, &pz, true)? {
                    return Ok(f);
                }
            }
        }
    }
    for x in 0..u.d_a {
        if let Some(pz) = projectorize_big_column(u, x) {
            if pz.block_positions.len() == 2 {
                if let Some(f) = b_controlled_from_projectorized(u, &pz, false)? {
                    return Ok(f);
                }
            }
        }
    }

    // Otherwise exactly one nonzero block per big row: block-diagonal up to an
    // A permutation. Group blocks by proportionality; phases move into a
    // diagonal gauge on the A side.
    let base = detect_controlled(u, Side::A)?.ok_or(Error::Classification(
        "rank-2 permutation with neither multi-block lines nor a block-diagonal form".into(),
    ))?;
    regroup_proportional(u, base, complex, Some(2))
}

/// Groups the diagonal blocks of an A-controlled form into proportionality
/// classes, absorbing per-level phases into a diagonal complex permutation on
/// the A output. For real permutations the phases are all 1 and the grouping
/// is plain equality. `expect_terms` constrains the class count when set.
fn regroup_proportional(
    u: &BipartiteOp,
    base: ControlledForm,
    complex: bool,
    expect_terms: Option<usize>,
) -> Result<ControlledForm> {
    let tol = crate::DEFAULT_TOL;
    // Per-level blocks in the gauged basis.
    let mut level_ops = vec![None; base.control_dim()];
    for t in &base.terms {
        for &lvl in &t.support {
            level_ops[lvl] = Some(t.op.clone());
        }
    }
    let level_ops: Vec<_> = level_ops.into_iter().map(Option::unwrap).collect();

    let mut reps: Vec<crate::core_linalg::CMatrix> = Vec::new();
    let mut class_of = vec![usize::MAX; level_ops.len()];
    let mut phase_of = vec![C64::new(1.0, 0.0); level_ops.len()];
    for (lvl, op) in level_ops.iter().enumerate() {
        let mut assigned = false;
        for (ci, rep) in reps.iter().enumerate() {
            // op = phase * rep?
            let ip = (rep.adjoint() * op).trace();
            let phase = ip / C64::new(rep.norm_squared(), 0.0);
            if phase.norm() > 0.5 && (op - rep.map(|e| e * phase)).norm() <= tol * op.norm().max(1.0) {
                class_of[lvl] = ci;
                phase_of[lvl] = phase;
                assigned = true;
                break;
            }
        }
        if !assigned {
            class_of[lvl] = reps.len();
            reps.push(op.clone());
        }
    }
    if let Some(n) = expect_terms {
        if reps.len() != n {
            return Err(Error::Classification(format!(
                "expected {n} proportionality classes of diagonal blocks, found {}",
                reps.len()
            )));
        }
    }
    if !complex && phase_of.iter().any(|p| (p - C64::new(1.0, 0.0)).norm() > tol) {
        return Err(Error::Classification("real permutation grouped with nontrivial phases".into()));
    }
    // Diagonal phase gauge D on the control side: the original form factors
    // as F = (D ⊗ I)·F' with F' built from the class representatives, so
    // U = post·(D⊗I)·F'·pre and D joins the post gauge.
    let mut d = zeros(base.control_dim(), base.control_dim());
    for (lvl, ph) in phase_of.iter().enumerate() {
        d[(lvl, lvl)] = *ph;
    }
    let mut terms: Vec<ControlledTerm> = reps
        .into_iter()
        .enumerate()
        .map(|(ci, op)| ControlledTerm {
            support: (0..level_ops.len()).filter(|&l| class_of[l] == ci).collect(),
            op,
        })
        .collect();
    terms.sort_by_key(|t| t.support[0]);
    let mut gauge = base.gauge.clone();
    match base.side {
        Side::A => gauge.post_a *= d,
        Side::B => gauge.post_b *= d,
    }
    let out = ControlledForm { side: base.side, d_a: u.d_a, d_b: u.d_b, terms, gauge };
    let recon = out.reconstruct();
    let err = (recon.matrix - &u.matrix).norm();
    if err > 1e-9 * u.matrix.norm() {
        return Err(Error::StructureResidual { what: "rank-2 standard form reconstruction".into(), residual: err });
    }
    Ok(out)
}

/// Shared with the rank-3 classifier: regroup an A-controlled form by
/// proportionality classes.
pub(crate) fn group_blocks_by_proportionality(
    u: &BipartiteOp,
    base: ControlledForm,
    complex: bool,
) -> Result<ControlledForm> {
    regroup_proportional(u, base, complex, None)
}

/// Diagonal two-term complex permutation built per the lm:sch2(ii) proof
/// case: levels alternate between `I` and `xP + yP⊥`.
pub fn diagonal_two_phase(d_a: usize, d_b: usize, split: usize, x: C64, y: C64) -> Result<BipartiteOp> {
    if split == 0 || split >= d_b {
        return Err(Error::BadFixture("split must be inside (0, dB)".into()));
    }
    let mut d2 = ident(d_b);
    for i in 0..d_b {
        d2[(i, i)] = if i < split { x } else { y };
    }
    let ops: Vec<_> = (0..d_a).map(|j| if j % 2 == 0 { ident(d_b) } else { d2.clone() }).collect();
    super::fixtures::controlled_from_a(&ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::fixtures;

    #[test]
    fn cnot_two_terms_from_a() {
        let f = rank2_standard_form(&fixtures::cnot(), false).unwrap();
        assert_eq!(f.n_terms(), 2);
        assert!((f.reconstruct().matrix - fixtures::cnot().matrix).norm() < 1e-9);
    }

    #[test]
    fn b_side_two_term_from_projector_split() {
        // X⊗I on one B-sector, I on the other: controlled from B.
        let one = C64::new(1.0, 0.0);
        let mut m = zeros(6, 6);
        // B-level 0: apply 3-cycle on A; B-levels 1,2: identity.
        let cyc = [1usize, 2, 0];
        for a in 0..3 {
            m[(cyc[a] * 2, a * 2)] = one;
            m[(a * 2 + 1, a * 2 + 1)] = one;
        }
        let u = BipartiteOp::new(3, 2, m).unwrap();
        let f = rank2_standard_form(&u, false).unwrap();
        assert_eq!(f.side, Side::B);
        assert_eq!(f.n_terms(), 2);
        assert!((f.reconstruct().matrix - u.matrix).norm() < 1e-9);
    }

    #[test]
    fn complex_diagonal_instance() {
        let u = fixtures::complex_two_term(3, 4).unwrap();
        let f = rank2_standard_form(&u, true).unwrap();
        assert_eq!(f.n_terms(), 2);
        assert!((f.reconstruct().matrix - u.matrix).norm() < 1e-9);
    }

    #[test]
    fn rank_mismatch_rejected() {
        assert!(matches!(
            rank2_standard_form(&fixtures::swap2(), false),
            Err(Error::WrongSchmidtRank { expected: 2, found: 4 })
        ));
    }

    #[test]
    fn phase_blocks_grouped_complex() {
        // Levels: I, i·I-sector mix via diagonal phases: proportional blocks
        // must merge in the complex case.
        let i = C64::new(0.0, 1.0);
        let u = diagonal_two_phase(4, 3, 1, i, i).unwrap();
        // xP + yP⊥ with x = y = i is i·I: proportional to I.
        let sd = crate::core_linalg::operator_schmidt(&u, 1e-8).unwrap();
        assert_eq!(sd.rank(), 1);
        // A genuine rank-2 diagonal instance:
        let u = diagonal_two_phase(4, 3, 1, i, C64::new(1.0, 0.0)).unwrap();
        let f = rank2_standard_form(&u, true).unwrap();
        assert_eq!(f.n_terms(), 2);
    }
}
