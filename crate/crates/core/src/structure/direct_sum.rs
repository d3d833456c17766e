//! Direct-sum decomposition along one side's invariant subspaces.

use super::controlled::Side;
use crate::core_linalg::{zeros, BipartiteOp};
use crate::error::Result;

/// Finest partition of the chosen side's basis such that `U` maps each
/// subspace (tensored with the full other side) to itself, computed as
/// connected components of the nonzero-pattern graph between input and output
/// levels of that side. Returns `(levels, component operator)` pairs with the
/// component operator restricted to those levels.
pub fn direct_sum_decompose(u: &BipartiteOp, side: Side) -> Result<Vec<(Vec<usize>, BipartiteOp)>> {
    u.check_unitary(crate::DEFAULT_TOL)?;
    let v;
    let w = match side {
        Side::A => u,
        Side::B => {
            v = u.swap_sides();
            &v
        }
    };
    let tol = crate::DEFAULT_TOL * w.matrix.norm().max(1.0);
    let n = w.d_a;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        if p[i] != i {
            let r = find(p, p[i]);
            p[i] = r;
        }
        p[i]
    }
    for y in 0..n {
        for x in 0..n {
            if w.block_norm(y, x) > tol {
                let (ry, rx) = (find(&mut parent, y), find(&mut parent, x));
                if ry != rx {
                    parent[ry] = rx;
                }
            }
        }
    }
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut root_index: std::collections::BTreeMap<usize, usize> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        let idx = *root_index.entry(r).or_insert_with(|| {
            comps.push(Vec::new());
            comps.len() - 1
        });
        comps[idx].push(i);
    }
    comps.sort_by_key(|c| c[0]);

    let mut out = Vec::new();
    for levels in comps {
        let da = levels.len();
        let db = w.d_b;
        let mut m = zeros(da * db, da * db);
        for (yi, &y) in levels.iter().enumerate() {
            for (xi, &x) in levels.iter().enumerate() {
                for r in 0..db {
                    for cc in 0..db {
                        m[(yi * db + r, xi * db + cc)] = w.matrix[(w.idx(y, r), w.idx(x, cc))];
                    }
                }
            }
        }
        let comp = BipartiteOp::new(da, db, m)?;
        let comp = match side {
            Side::A => comp,
            Side::B => comp.swap_sides(),
        };
        out.push((levels, comp));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::fixtures;

    #[test]
    fn uketbra11_splits_on_a() {
        let comps = direct_sum_decompose(&fixtures::uketbra11(), Side::A).unwrap();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].0, vec![0]);
        assert_eq!(comps[1].0, vec![1, 2]);
    }

    #[test]
    fn dense_unitary_single_component() {
        let comps = direct_sum_decompose(&fixtures::swap2(), Side::A).unwrap();
        assert_eq!(comps.len(), 1);
    }

    #[test]
    fn example1_b_side_components_of_size_two() {
        let u = fixtures::example1(&[0.0, 1.0, 2.0], &[]).unwrap();
        let comps = direct_sum_decompose(&u, Side::B).unwrap();
        assert_eq!(comps.len(), 3);
        for (levels, comp) in &comps {
            assert_eq!(levels.len(), 2);
            assert!(comp.check_unitary(1e-9).is_ok());
        }
    }
}
