//! Covering subsets of partial permutation matrices.

use crate::core_linalg::CMatrix;
use crate::error::{Error, Result};

const DEFAULT_CAP: usize = 20;

/// All subsets of `s` whose members occupy pairwise disjoint column sets that
/// jointly cover every column. Exhaustive search with column-disjointness
/// pruning; `|s|` is capped at 20.
pub fn covering_subsets(s: &[CMatrix]) -> Result<Vec<Vec<usize>>> {
    if s.is_empty() {
        return Err(Error::BadInput("empty set of partial permutation matrices".into()));
    }
    if s.len() > DEFAULT_CAP {
        return Err(Error::SearchCap(format!("{} matrices exceeds the cap of {DEFAULT_CAP}", s.len())));
    }
    let d = s[0].ncols();
    let mut col_masks = Vec::with_capacity(s.len());
    for (i, m) in s.iter().enumerate() {
        if m.ncols() != d || m.nrows() != d {
            return Err(Error::DimensionMismatch(format!("matrix {i} is not of common order {d}")));
        }
        if !is_partial_perm(m) {
            return Err(Error::BadInput(format!("matrix {i} is not a 0/1 partial permutation matrix")));
        }
        let mut mask = 0u64;
        for cc in 0..d {
            if (0..d).any(|r| m[(r, cc)].norm() > 1e-9) {
                mask |= 1 << cc;
            }
        }
        if mask == 0 {
            return Err(Error::BadInput(format!("matrix {i} is zero")));
        }
        col_masks.push(mask);
    }
    let full: u64 = if d >= 64 { u64::MAX } else { (1u64 << d) - 1 };
    let union = col_masks.iter().fold(0u64, |a, b| a | b);
    if union != full {
        return Err(Error::BadInput("some column is not occupied by any matrix".into()));
    }

    let mut out = Vec::new();
    let mut chosen = Vec::new();
    search(&col_masks, full, 0, &mut chosen, &mut out);
    Ok(out)
}

fn is_partial_perm(m: &CMatrix) -> bool {
    let d = m.nrows();
    for r in 0..d {
        let mut cnt = 0;
        for cc in 0..d {
            let z = m[(r, cc)];
            if z.norm() > 1e-9 {
                if (z.re - 1.0).abs() > 1e-9 || z.im.abs() > 1e-9 {
                    return false;
                }
                cnt += 1;
            }
        }
        if cnt > 1 {
            return false;
        }
    }
    for cc in 0..d {
        if (0..d).filter(|&r| m[(r, cc)].norm() > 1e-9).count() > 1 {
            return false;
        }
    }
    true
}

fn search(masks: &[u64], missing: u64, min_idx: usize, chosen: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if missing == 0 {
        out.push(chosen.clone());
        return;
    }
    // Branch on the lowest uncovered column to prune symmetric orderings.
    let col = missing.trailing_zeros() as u64;
    for i in min_idx..masks.len() {
        let m = masks[i];
        if m & (1 << col) != 0 && m & !missing == 0 {
            chosen.push(i);
            search(masks, missing & !m, 0, chosen, out);
            chosen.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_linalg::{ident, zeros, C64};
    use crate::costs::bell;
    use num_traits::ToPrimitive;

    fn diag01(bits: &[u8]) -> CMatrix {
        let mut m = zeros(bits.len(), bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b == 1 {
                m[(i, i)] = C64::new(1.0, 0.0);
            }
        }
        m
    }

    #[test]
    fn identity_single_cover() {
        let subs = covering_subsets(&[ident(3)]).unwrap();
        assert_eq!(subs.len(), 1);
    }

    #[test]
    fn projector_pair_plus_identity() {
        let s = vec![diag01(&[1, 0]), diag01(&[0, 1]), ident(2)];
        let subs = covering_subsets(&s).unwrap();
        assert_eq!(subs.len(), 2);
    }

    #[test]
    fn m_family_span_covering_bounded_by_bell() {
        let u = crate::structure::fixtures::m_family(3).unwrap();
        let span = crate::structure::types::partial_perms_in_b_span(&u).unwrap();
        assert!(!span.is_empty());
        let subs = covering_subsets(&span).unwrap();
        let cap = bell(4).to_usize().unwrap();
        assert!(subs.len() <= cap, "{} > {}", subs.len(), cap);
    }

    #[test]
    fn cap_enforced() {
        let s = vec![ident(2); 21];
        assert!(matches!(covering_subsets(&s), Err(Error::SearchCap(_))));
    }
}
