//! Classification of Schmidt-rank-3 permutation unitaries.

use super::controlled::{
    b_controlled_from_projectorized, detect_controlled, projectorize_big_column,
    projectorize_big_row, ControlledForm, Side,
};
use super::rank2::{group_blocks_by_proportionality, rank2_standard_form};
use crate::core_linalg::{operator_schmidt, zeros, BipartiteOp, CMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank3PermClass {
    Controlled3Term,
    Controlled4Term,
    ProductPlusTwoTerm,
}

/// Constructive witness: either a controlled form, or the split (along
/// separate input and output A-level sets, since local permutations relabel
/// the two independently) into a product permutation piece and a two-term
/// controlled piece.
#[derive(Debug, Clone)]
pub enum Rank3PermWitness {
    Controlled(ControlledForm),
    ProductPlusTwoTerm {
        /// Input and output A levels of the product piece, and the piece in
        /// the canonical bases of those level sets.
        product_in: Vec<usize>,
        product_out: Vec<usize>,
        product: BipartiteOp,
        /// The two-term piece, likewise.
        two_term_in: Vec<usize>,
        two_term_out: Vec<usize>,
        two_term: ControlledForm,
    },
}

impl Rank3PermWitness {
    /// Rebuilds the full operator from the witness.
    pub fn reconstruct(&self, d_a: usize, d_b: usize) -> Result<BipartiteOp> {
        match self {
            Rank3PermWitness::Controlled(f) => Ok(f.reconstruct()),
            Rank3PermWitness::ProductPlusTwoTerm {
                product_in,
                product_out,
                product,
                two_term_in,
                two_term_out,
                two_term,
            } => {
                let mut m = zeros(d_a * d_b, d_a * d_b);
                let mut place = |ins: &[usize], outs: &[usize], piece: &CMatrix| {
                    for (yi, &y) in outs.iter().enumerate() {
                        for (xi, &x) in ins.iter().enumerate() {
                            for r in 0..d_b {
                                for cc in 0..d_b {
                                    m[(y * d_b + r, x * d_b + cc)] =
                                        piece[(yi * d_b + r, xi * d_b + cc)];
                                }
                            }
                        }
                    }
                };
                place(product_in, product_out, &product.matrix);
                place(two_term_in, two_term_out, &two_term.reconstruct().matrix);
                BipartiteOp::new(d_a, d_b, m)
            }
        }
    }
}

/// Connected components of the bipartite nonzero-block graph with input and
/// output A levels as separate vertex sets: each component is a pair of level
/// sets `(inputs, outputs)` of equal size that `u` maps onto each other.
fn bipartite_components(u: &BipartiteOp) -> Vec<(Vec<usize>, Vec<usize>)> {
    let tol = crate::DEFAULT_TOL * u.matrix.norm().max(1.0);
    let n = u.d_a;
    // vertices: 0..n inputs, n..2n outputs
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        if p[i] != i {
            let r = find(p, p[i]);
            p[i] = r;
        }
        p[i]
    }
    for y in 0..n {
        for x in 0..n {
            if u.block_norm(y, x) > tol {
                let (a, b) = (find(&mut parent, x), find(&mut parent, n + y));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut comps: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>)> = Default::default();
    for x in 0..n {
        let r = find(&mut parent, x);
        comps.entry(r).or_default().0.push(x);
    }
    for y in 0..n {
        let r = find(&mut parent, n + y);
        comps.entry(r).or_default().1.push(y);
    }
    let mut out: Vec<(Vec<usize>, Vec<usize>)> = comps.into_values().collect();
    out.sort_by_key(|(i, _)| i.first().copied().unwrap_or(usize::MAX));
    out
}

/// Classifies a Schmidt-rank-3 permutation unitary per the trichotomy:
/// controlled with three or four terms (either side), or the direct sum of a
/// product permutation unitary and a two-term controlled-permutation unitary.
pub fn classify_rank3_permutation(u: &BipartiteOp) -> Result<(Rank3PermClass, Rank3PermWitness)> {
    if !u.is_permutation(crate::DEFAULT_TOL) {
        return Err(Error::NotPermutation);
    }
    let rank = operator_schmidt(u, crate::DEFAULT_TOL)?.rank();
    if rank != 3 {
        return Err(Error::WrongSchmidtRank { expected: 3, found: rank });
    }

    // A big row or column with three nonzero blocks: three-term controlled
    // from the B side after projectorization.
    for y in 0..u.d_a {
        if let Some(pz) = projectorize_big_row(u, y) {
            if pz.block_positions.len() == 3 {
                if let Some(f) = b_controlled_from_projectorized(u, &pz, true)? {
                    return verified(u, Rank3PermClass::Controlled3Term, Rank3PermWitness::Controlled(f));
                }
            }
        }
    }
    for x in 0..u.d_a {
        if let Some(pz) = projectorize_big_column(u, x) {
            if pz.block_positions.len() == 3 {
                if let Some(f) = b_controlled_from_projectorized(u, &pz, false)? {
                    return verified(u, Rank3PermClass::Controlled3Term, Rank3PermWitness::Controlled(f));
                }
            }
        }
    }

    // Block-diagonal up to a local permutation on either side: a controlled
    // permutation with three or four distinct terms.
    for side in [Side::A, Side::B] {
        if let Some(base) = detect_controlled(u, side)? {
            let f = group_blocks_by_proportionality(u, base, false)?;
            let class = match f.n_terms() {
                3 => Rank3PermClass::Controlled3Term,
                4 => Rank3PermClass::Controlled4Term,
                n => {
                    return Err(Error::Classification(format!(
                        "rank-3 controlled permutation with {n} terms (expected 3 or 4)"
                    )))
                }
            };
            return verified(u, class, Rank3PermWitness::Controlled(f));
        }
    }

    // Remaining case: product ⊕ two-term along the bipartite component split
    // (inputs and outputs relabel independently under local permutations).
    let comps = bipartite_components(u);
    if comps.len() < 2 {
        return Err(Error::Classification(
            "rank-3 permutation with two-block lines did not split into bipartite components".into(),
        ));
    }
    // Partition components into rank-1 pieces (the product part) and the
    // rest (the two-term part).
    let mut prod_in: Vec<usize> = Vec::new();
    let mut prod_out: Vec<usize> = Vec::new();
    let mut rest_in: Vec<usize> = Vec::new();
    let mut rest_out: Vec<usize> = Vec::new();
    for (ins, outs) in &comps {
        let piece = restrict(u, ins, outs);
        let r = operator_schmidt(&piece, crate::DEFAULT_TOL)?.rank();
        if r == 1 {
            prod_in.extend(ins.iter().copied());
            prod_out.extend(outs.iter().copied());
        } else {
            rest_in.extend(ins.iter().copied());
            rest_out.extend(outs.iter().copied());
        }
    }
    if prod_in.is_empty() || rest_in.is_empty() {
        return Err(Error::Classification(
            "could not split into a product piece and a rank-2 remainder".into(),
        ));
    }
    let product = restrict(u, &prod_in, &prod_out);
    let rest = restrict(u, &rest_in, &rest_out);
    if operator_schmidt(&product, crate::DEFAULT_TOL)?.rank() != 1 {
        return Err(Error::Classification("product part is not Schmidt rank 1".into()));
    }
    let two_term = rank2_standard_form(&rest, false)?;
    verified(
        u,
        Rank3PermClass::ProductPlusTwoTerm,
        Rank3PermWitness::ProductPlusTwoTerm {
            product_in: prod_in,
            product_out: prod_out,
            product,
            two_term_in: rest_in,
            two_term_out: rest_out,
            two_term,
        },
    )
}

fn restrict(u: &BipartiteOp, ins: &[usize], outs: &[usize]) -> BipartiteOp {
    let d_b = u.d_b;
    let da = ins.len();
    let mut m = zeros(da * d_b, da * d_b);
    for (yi, &y) in outs.iter().enumerate() {
        for (xi, &x) in ins.iter().enumerate() {
            for r in 0..d_b {
                for cc in 0..d_b {
                    m[(yi * d_b + r, xi * d_b + cc)] = u.matrix[(u.idx(y, r), u.idx(x, cc))];
                }
            }
        }
    }
    BipartiteOp::new(da, d_b, m).expect("dims")
}

fn verified(
    u: &BipartiteOp,
    class: Rank3PermClass,
    witness: Rank3PermWitness,
) -> Result<(Rank3PermClass, Rank3PermWitness)> {
    let rec = witness.reconstruct(u.d_a, u.d_b)?;
    let err = (rec.matrix - &u.matrix).norm();
    if err > 1e-9 * u.matrix.norm() {
        return Err(Error::StructureResidual {
            what: "rank-3 permutation witness reconstruction".into(),
            residual: err,
        });
    }
    Ok((class, witness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::fixtures;

    #[test]
    fn uketbra11_is_product_plus_two_term() {
        let (class, w) = classify_rank3_permutation(&fixtures::uketbra11()).unwrap();
        assert_eq!(class, Rank3PermClass::ProductPlusTwoTerm);
        match w {
            Rank3PermWitness::ProductPlusTwoTerm { product_in, product_out, two_term_in, .. } => {
                assert_eq!(product_in, vec![0]);
                assert_eq!(product_out, vec![0]);
                assert_eq!(two_term_in, vec![1, 2]);
            }
            _ => panic!("wrong witness"),
        }
    }

    #[test]
    fn dressed_uketbra11_still_classifies() {
        // Independent input/output local permutations mix the invariant
        // subspaces but not the bipartite components.
        use crate::core_linalg::{perm_matrix, tensor};
        let u = fixtures::uketbra11();
        let pa = perm_matrix(&[2, 0, 1]);
        let qa = perm_matrix(&[1, 2, 0]);
        let pb = perm_matrix(&[1, 0]);
        let m = tensor(&pa, &pb) * &u.matrix * tensor(&qa, &crate::core_linalg::ident(2));
        let v = BipartiteOp::new(3, 2, m).unwrap();
        let (class, w) = classify_rank3_permutation(&v).unwrap();
        assert_eq!(class, Rank3PermClass::ProductPlusTwoTerm);
        let rec = w.reconstruct(3, 2).unwrap();
        assert!((rec.matrix - &v.matrix).norm() < 1e-9);
    }

    #[test]
    fn four_term_instance() {
        let u = fixtures::perm_u_4terms(0, 2, 2).unwrap();
        let (class, _) = classify_rank3_permutation(&u).unwrap();
        assert_eq!(class, Rank3PermClass::Controlled4Term);
    }

    #[test]
    fn three_term_direct_construction() {
        let u = fixtures::ud1_family(0, 2, 2, 0).unwrap();
        let (class, _) = classify_rank3_permutation(&u).unwrap();
        assert_eq!(class, Rank3PermClass::Controlled3Term);
    }

    #[test]
    fn rejects_wrong_inputs() {
        assert!(classify_rank3_permutation(&fixtures::cnot()).is_err());
        assert!(classify_rank3_permutation(&fixtures::example1(&[0.0, 1.0], &[]).unwrap()).is_err());
    }
}
