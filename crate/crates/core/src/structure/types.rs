//! Input/output type systems for permutation unitaries, loose types, and the
//! partial-transpose rank check.

use super::controlled::Side;
use crate::core_linalg::{BipartiteOp, CMatrix};
use crate::error::{Error, Result};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeKind {
    InputA,
    RelativeOutputA,
    OutputB,
    LooseA,
    LooseB,
}

/// A partition of one side's basis into type classes, ordered by smallest
/// member index.
#[derive(Debug, Clone)]
pub struct TypePartition {
    pub kind: TypeKind,
    pub classes: Vec<Vec<usize>>,
}

impl TypePartition {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_of(&self, level: usize) -> usize {
        self.classes.iter().position(|c| c.contains(&level)).expect("level in partition")
    }
}

/// Strict and relative type data of a permutation unitary.
#[derive(Debug, Clone)]
pub struct PermTypeInfo {
    pub input_a: TypePartition,
    /// Nonzero blocks per big column, constant within an input class.
    pub relative_output_counts: Vec<usize>,
    /// Max nonzero-block count over big columns (the dimension of the
    /// relative-output ancilla).
    pub relative_output_dim: usize,
    pub output_b: TypePartition,
}

fn quantize(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

/// Entry-exact fingerprint of a matrix at 1e-9 resolution.
fn fingerprint(m: &CMatrix) -> Vec<(usize, usize, i64, i64)> {
    let mut v = Vec::new();
    for r in 0..m.nrows() {
        for cc in 0..m.ncols() {
            let z = m[(r, cc)];
            if z.norm() > 1e-9 {
                v.push((r, cc, quantize(z.re), quantize(z.im)));
            }
        }
    }
    v
}

fn partition_by_key<K: Ord>(n: usize, kind: TypeKind, key: impl Fn(usize) -> K) -> TypePartition {
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        groups.entry(key(i)).or_default().push(i);
    }
    let mut classes: Vec<Vec<usize>> = groups.into_values().collect();
    classes.sort_by_key(|c| c[0]);
    TypePartition { kind, classes }
}

/// Nonzero blocks of big column `x`, with their big-row positions.
pub(crate) fn column_blocks(u: &BipartiteOp, x: usize, tol: f64) -> Vec<(usize, CMatrix)> {
    (0..u.d_a)
        .filter(|&y| u.block_norm(y, x) > tol)
        .map(|y| (y, u.block(y, x)))
        .collect()
}

/// Selects a maximal linearly independent set of blocks scanning columns then
/// rows; for a Schmidt-rank-r operator this yields r basis blocks.
pub(crate) fn basis_blocks(u: &BipartiteOp, tol: f64) -> Vec<CMatrix> {
    let mut basis: Vec<CMatrix> = Vec::new();
    let mut ortho: Vec<CMatrix> = Vec::new();
    for x in 0..u.d_a {
        for y in 0..u.d_a {
            if u.block_norm(y, x) > tol {
                let b = u.block(y, x);
                // Gram-Schmidt residual test.
                let mut resid = b.clone();
                for q in &ortho {
                    let ip = (q.adjoint() * &resid).trace();
                    resid -= q.map(|e| e * ip);
                }
                if resid.norm() > 1e-7 * b.norm().max(1.0) {
                    let n = resid.norm();
                    ortho.push(resid.map(|e| e / n));
                    basis.push(b);
                }
            }
        }
    }
    basis
}

/// Strict input types of A, relative output dimension, and output types of B
/// (simplified definition over a basis of r independent blocks).
pub fn permutation_type_partitions(u: &BipartiteOp) -> Result<PermTypeInfo> {
    if !u.is_permutation(crate::DEFAULT_TOL) {
        return Err(Error::NotPermutation);
    }
    let tol = crate::DEFAULT_TOL;

    let col_multisets: Vec<Vec<Vec<(usize, usize, i64, i64)>>> = (0..u.d_a)
        .map(|x| {
            let mut fps: Vec<_> = column_blocks(u, x, tol).into_iter().map(|(_, b)| fingerprint(&b)).collect();
            fps.sort();
            fps
        })
        .collect();
    let input_a = partition_by_key(u.d_a, TypeKind::InputA, |x| col_multisets[x].clone());

    let counts: Vec<usize> = (0..u.d_a).map(|x| col_multisets[x].len()).collect();
    let relative_output_counts: Vec<usize> = input_a.classes.iter().map(|cls| counts[cls[0]]).collect();
    for (ci, cls) in input_a.classes.iter().enumerate() {
        for &x in cls {
            debug_assert_eq!(counts[x], relative_output_counts[ci]);
        }
    }
    let relative_output_dim = counts.iter().copied().max().unwrap_or(1);

    let basis = basis_blocks(u, tol);
    // Row-occupation pattern of each basis block.
    let patterns: Vec<Vec<bool>> = basis
        .iter()
        .map(|b| (0..u.d_b).map(|r| (0..u.d_b).any(|cc| b[(r, cc)].norm() > tol)).collect())
        .collect();
    let output_b = partition_by_key(u.d_b, TypeKind::OutputB, |bp| {
        patterns.iter().map(|p| p[bp]).collect::<Vec<bool>>()
    });

    Ok(PermTypeInfo { input_a, relative_output_counts, relative_output_dim, output_b })
}

/// Loose types: big columns grouped by the equality of their block sums.
pub fn loose_type_partition(u: &BipartiteOp, side: Side) -> Result<TypePartition> {
    if !u.is_permutation(crate::DEFAULT_TOL) {
        return Err(Error::NotPermutation);
    }
    let v;
    let w = match side {
        Side::A => u,
        Side::B => {
            v = u.swap_sides();
            &v
        }
    };
    let kind = match side {
        Side::A => TypeKind::LooseA,
        Side::B => TypeKind::LooseB,
    };
    let tol = crate::DEFAULT_TOL;
    let sums: Vec<Vec<(usize, usize, i64, i64)>> = (0..w.d_a)
        .map(|x| {
            let mut sum = crate::core_linalg::zeros(w.d_b, w.d_b);
            for (_, b) in column_blocks(w, x, tol) {
                sum += b;
            }
            fingerprint(&sum)
        })
        .collect();
    Ok(partition_by_key(w.d_a, kind, |x| sums[x].clone()))
}

/// All nonzero partial permutation matrices in the span of `u`'s blocks,
/// enumerated exhaustively over 0/1 coefficient vectors with respect to the
/// key-element basis `G_i` (the combinations normalized so that `G_i` is 1 at
/// the `i`-th key position and 0 at the others). For a Schmidt-rank-r
/// permutation unitary the count is at most `2^r − 1`, with equality exactly
/// for r-term controlled unitaries from the B side.
pub fn partial_perms_in_b_span(u: &BipartiteOp) -> Result<Vec<CMatrix>> {
    if !u.is_permutation(crate::DEFAULT_TOL) {
        return Err(Error::NotPermutation);
    }
    let basis = basis_blocks(u, crate::DEFAULT_TOL);
    let r = basis.len();
    if r > 16 {
        return Err(Error::SearchCap(format!("rank {r} too large for exhaustive span enumeration")));
    }
    let d = u.d_b;
    // Row t of `m` is the vectorization of basis block t.
    let mut m = crate::core_linalg::zeros(r, d * d);
    for (t, b) in basis.iter().enumerate() {
        for i in 0..d {
            for j in 0..d {
                m[(t, i * d + j)] = b[(i, j)];
            }
        }
    }
    // Greedy key-position selection: columns forming an invertible r×r block.
    let mut keys: Vec<usize> = Vec::new();
    let mut work = m.clone();
    for t in 0..r {
        let mut best = None;
        let mut best_val = 0.0;
        for col in 0..d * d {
            if keys.contains(&col) {
                continue;
            }
            let v = work[(t, col)].norm();
            if v > best_val {
                best_val = v;
                best = Some(col);
            }
        }
        let col = best.ok_or_else(|| Error::BadInput("blocks are linearly dependent".into()))?;
        keys.push(col);
        // Eliminate this column from other rows.
        let pivot = work[(t, col)];
        for t2 in 0..r {
            if t2 != t {
                let f = work[(t2, col)] / pivot;
                for cc in 0..d * d {
                    let sub = work[(t, cc)] * f;
                    work[(t2, cc)] -= sub;
                }
            }
        }
    }
    // K[t][s] = basis_t at key position s; G rows are K^{-1} · M.
    let mut k = crate::core_linalg::zeros(r, r);
    for t in 0..r {
        for (s, &col) in keys.iter().enumerate() {
            k[(t, s)] = m[(t, col)];
        }
    }
    let kinv = k
        .try_inverse()
        .ok_or_else(|| Error::BadInput("key submatrix is singular".into()))?;
    let g = kinv * &m;
    let g_blocks: Vec<CMatrix> = (0..r)
        .map(|t| {
            let mut b = crate::core_linalg::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    b[(i, j)] = g[(t, i * d + j)];
                }
            }
            b
        })
        .collect();
    let mut out = Vec::new();
    for mask in 1usize..(1usize << r) {
        let mut cand = crate::core_linalg::zeros(d, d);
        for (t, gb) in g_blocks.iter().enumerate() {
            if mask & (1 << t) != 0 {
                cand += gb;
            }
        }
        if is_partial_perm_01(&cand) {
            out.push(cand);
        }
    }
    Ok(out)
}

fn is_partial_perm_01(m: &CMatrix) -> bool {
    let tol = 1e-7;
    let d = m.nrows();
    for r in 0..d {
        let mut cnt = 0;
        for cc in 0..d {
            let z = m[(r, cc)];
            if z.norm() > tol {
                if (z.re - 1.0).abs() > tol || z.im.abs() > tol {
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
        if (0..d).filter(|&r| m[(r, cc)].norm() > tol).count() > 1 {
            return false;
        }
    }
    true
}

fn numeric_rank(m: &CMatrix) -> usize {
    let gram = m * m.adjoint();
    let eig = crate::core_linalg::hermitian_eigen(&gram);
    let emax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if emax <= 0.0 {
        return 0;
    }
    let cut = (crate::DEFAULT_TOL * emax.sqrt()).powi(2);
    eig.eigenvalues.iter().filter(|&&e| e > cut).count()
}

/// Matrix ranks of `U` and its partial transpose on B, and whether
/// `rank(U) ≤ k · rank(U^{T_B})` holds.
pub fn partial_transpose_check(u: &BipartiteOp, k: usize) -> (usize, usize, bool) {
    let lhs = numeric_rank(&u.matrix);
    let rhs = numeric_rank(&u.partial_transpose_b().matrix);
    (lhs, rhs, lhs <= k * rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::fixtures;

    #[test]
    fn example4_type_counts() {
        let info = permutation_type_partitions(&fixtures::example4()).unwrap();
        assert_eq!(info.input_a.len(), 3);
        assert_eq!(info.relative_output_dim, 2);
        assert_eq!(info.output_b.len(), 2);
        assert_eq!(info.input_a.classes[1], vec![1, 2, 3]);
    }

    #[test]
    fn identity_types_trivial() {
        let info = permutation_type_partitions(&fixtures::identity(3, 4)).unwrap();
        assert_eq!(info.input_a.len(), 1);
        assert_eq!(info.relative_output_dim, 1);
        assert_eq!(info.output_b.len(), 1);
    }

    #[test]
    fn m_family_r3_input_types() {
        let u = fixtures::m_family(3).unwrap();
        let info = permutation_type_partitions(&u).unwrap();
        assert_eq!(info.input_a.len(), 4);
    }

    #[test]
    fn loose_types() {
        let u = fixtures::m_family(3).unwrap();
        let p = loose_type_partition(&u, Side::A).unwrap();
        assert_eq!(p.len(), 4); // tight bound 2^{r-1}
        let id = fixtures::identity(3, 3);
        assert_eq!(loose_type_partition(&id, Side::A).unwrap().len(), 1);
        // Example 4 side A: column block sums T1+T2, T3+T2, T3+T4 → 3 classes.
        let e4 = loose_type_partition(&fixtures::example4(), Side::A).unwrap();
        assert_eq!(e4.len(), 3);
    }

    #[test]
    fn partial_transpose_examples() {
        let (l, r, holds) = partial_transpose_check(&fixtures::swap2(), 4);
        assert_eq!((l, r), (4, 1));
        assert!(holds);
        let (l, r, holds) = partial_transpose_check(&fixtures::identity(2, 2), 1);
        assert_eq!((l, r), (4, 4));
        assert!(holds);
        let u = fixtures::ubigg_shaped();
        let rank = crate::core_linalg::operator_schmidt(&u, 1e-8).unwrap().rank();
        let (_, _, holds) = partial_transpose_check(&u, rank);
        assert!(holds);
    }

    #[test]
    fn cnot_loose_types_asymmetric() {
        let u = fixtures::cnot();
        assert_eq!(loose_type_partition(&u, Side::A).unwrap().len(), 2);
        assert_eq!(loose_type_partition(&u, Side::B).unwrap().len(), 1);
    }
}
