//! Operator-Schmidt decomposition via the reshuffle + SVD route.

use super::bipartite::BipartiteOp;
use super::matrix::{zeros, CMatrix, C64};
use crate::error::{Error, Result};

/// Schmidt data of a bipartite operator: `U = Σ_j coeff_j · a_ops[j] ⊗ b_ops[j]`
/// with the `a_ops` (resp. `b_ops`) orthonormal under the Hilbert–Schmidt
/// inner product and the coefficients positive, nonincreasing.
#[derive(Debug, Clone)]
pub struct OperatorSchmidt {
    pub coefficients: Vec<f64>,
    pub a_ops: Vec<CMatrix>,
    pub b_ops: Vec<CMatrix>,
}

impl OperatorSchmidt {
    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }

    pub fn reconstruct(&self, d_a: usize, d_b: usize) -> CMatrix {
        let mut m = zeros(d_a * d_b, d_a * d_b);
        for j in 0..self.rank() {
            m += super::matrix::tensor(&self.a_ops[j], &self.b_ops[j]).scale(self.coefficients[j]);
        }
        m
    }
}

/// Reshuffles `u` into the `dA²×dB²` matrix with row index `(a, a')` and
/// column index `(b, b')`: `R[(a,a'),(b,b')] = U[(a,b),(a',b')]`.
pub fn reshuffle(u: &BipartiteOp) -> CMatrix {
    let (da, db) = (u.d_a, u.d_b);
    let mut r = zeros(da * da, db * db);
    for a in 0..da {
        for a2 in 0..da {
            for b in 0..db {
                for b2 in 0..db {
                    r[(a * da + a2, b * db + b2)] = u.matrix[(u.idx(a, b), u.idx(a2, b2))];
                }
            }
        }
    }
    r
}

/// Operator-Schmidt decomposition. The rank counts singular values above
/// `tol * max_singular_value`.
///
/// The SVD of the reshuffled matrix is computed through the Hermitian
/// eigendecomposition of `R R†` (and back-substitution for the right
/// factors), which is robust on the highly degenerate 0/1 matrices that
/// permutation operators produce.
pub fn operator_schmidt(u: &BipartiteOp, tol: f64) -> Result<OperatorSchmidt> {
    let r = reshuffle(u);
    if r.norm() == 0.0 {
        return Err(Error::ZeroOperator);
    }
    let gram = &r * r.adjoint();
    let eig = super::eig::hermitian_eigen(&gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let s_max = eig.eigenvalues[order[0]].max(0.0).sqrt();
    if s_max == 0.0 {
        return Err(Error::ZeroOperator);
    }
    let mut coefficients = Vec::new();
    let mut a_ops = Vec::new();
    let mut b_ops = Vec::new();
    for &j in &order {
        // The eigenvalue of R R† only resolves σ down to √ε·σ_max; the norm
        // of R†u_j recovers it to full precision, which the 1e-8 rank
        // threshold needs.
        let mut v = vec![C64::new(0.0, 0.0); u.d_b * u.d_b];
        for (k, slot) in v.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..r.nrows() {
                acc += r[(i, k)].conj() * eig.eigenvectors[(i, j)];
            }
            *slot = acc;
        }
        let s = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if s <= tol * s_max {
            continue;
        }
        coefficients.push(s);
        let mut a = zeros(u.d_a, u.d_a);
        for row in 0..u.d_a {
            for col in 0..u.d_a {
                a[(row, col)] = eig.eigenvectors[(row * u.d_a + col, j)];
            }
        }
        // B_j[b,b'] = conj(v_j[(b,b')]) with v_j = R†u_j / s.
        let mut b = zeros(u.d_b, u.d_b);
        for row in 0..u.d_b {
            for col in 0..u.d_b {
                b[(row, col)] = (v[row * u.d_b + col] / C64::new(s, 0.0)).conj();
            }
        }
        a_ops.push(a);
        b_ops.push(b);
    }
    // Nonincreasing order by refined singular value.
    let mut perm: Vec<usize> = (0..coefficients.len()).collect();
    perm.sort_by(|&x, &y| coefficients[y].total_cmp(&coefficients[x]));
    let coefficients: Vec<f64> = perm.iter().map(|&i| coefficients[i]).collect();
    let a_ops: Vec<CMatrix> = perm.iter().map(|&i| a_ops[i].clone()).collect();
    let b_ops: Vec<CMatrix> = perm.iter().map(|&i| b_ops[i].clone()).collect();
    let out = OperatorSchmidt { coefficients, a_ops, b_ops };
    let err = (out.reconstruct(u.d_a, u.d_b) - &u.matrix).norm();
    let scale = u.matrix.norm();
    if err > 1e-9 * scale {
        return Err(Error::StructureResidual {
            what: "operator-Schmidt reconstruction".into(),
            residual: err / scale,
        });
    }
    Ok(out)
}

/// Schmidt rank with the crate default tolerance.
pub fn schmidt_rank(u: &BipartiteOp) -> Result<usize> {
    Ok(operator_schmidt(u, crate::DEFAULT_TOL)?.rank())
}

/// Number of equivalence classes of `values` under single-linkage clustering
/// at distance `tol`.
pub fn distinct_values(values: &[C64], tol: f64) -> usize {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        if p[i] != i {
            let r = find(p, p[i]);
            p[i] = r;
        }
        p[i]
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_linalg::matrix::{c, ident, tensor};
    use crate::structure::fixtures;

    #[test]
    fn swap_has_rank_four() {
        assert_eq!(schmidt_rank(&fixtures::swap2()).unwrap(), 4);
    }

    #[test]
    fn identity_has_rank_one() {
        for (da, db) in [(2, 2), (3, 4), (5, 2)] {
            let u = BipartiteOp::new(da, db, ident(da * db)).unwrap();
            assert_eq!(schmidt_rank(&u).unwrap(), 1);
        }
    }

    #[test]
    fn cnot_has_rank_two() {
        assert_eq!(schmidt_rank(&fixtures::cnot()).unwrap(), 2);
    }

    #[test]
    fn zero_operator_rejected() {
        let u = BipartiteOp::new(2, 2, zeros(4, 4)).unwrap();
        assert!(matches!(operator_schmidt(&u, 1e-8), Err(Error::ZeroOperator)));
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let u = fixtures::example4();
        let sd = operator_schmidt(&u, 1e-8).unwrap();
        assert_eq!(sd.rank(), 4);
        let rec = sd.reconstruct(u.d_a, u.d_b);
        assert!((rec - &u.matrix).norm() <= 1e-9 * u.matrix.norm());
        for i in 0..sd.rank() {
            for j in 0..sd.rank() {
                let ip: C64 = (sd.a_ops[i].adjoint() * &sd.a_ops[j]).trace();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - c(want, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn distinct_value_clustering() {
        let one = c(1.0, 0.0);
        assert_eq!(distinct_values(&[one, one, one], 1e-8), 1);
        assert_eq!(distinct_values(&[one, c(0.0, 1.0), c(-1.0, 0.0)], 1e-8), 3);
        // eigenvalues of diag(e^{iα}, -e^{-iα}) with α = 0.3
        let a = C64::from_polar(1.0, 0.3);
        let b = -C64::from_polar(1.0, -0.3);
        assert_eq!(distinct_values(&[a, b], 1e-8), 2);
    }

    #[test]
    fn constructed_rank_matches() {
        // A controlled unitary whose blocks span an r-dimensional space has
        // Schmidt rank exactly r.
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for r in 1..=4usize {
            let db = 4;
            let gens: Vec<CMatrix> = (0..r)
                .map(|k| {
                    let mut perm: Vec<usize> = (0..db).collect();
                    perm.shuffle(&mut rng);
                    let mut m = crate::core_linalg::perm_matrix(&perm);
                    // phase decoration keeps the span generic
                    for i in 0..db {
                        let ph = C64::from_polar(1.0, 0.7 * (k as f64 + 1.0) * (i as f64 + 1.0));
                        let col = perm.iter().position(|&p| p == i).unwrap();
                        m[(i, col)] *= ph;
                    }
                    m
                })
                .collect();
            let da = r.max(2);
            let mut m = zeros(da * db, da * db);
            for lvl in 0..da {
                let g = &gens[lvl % r];
                for i in 0..db {
                    for j in 0..db {
                        m[(lvl * db + i, lvl * db + j)] = g[(i, j)];
                    }
                }
            }
            let u = BipartiteOp::new(da, db, m).unwrap();
            assert_eq!(schmidt_rank(&u).unwrap(), r, "r={r}");
        }
        // and a non-controlled product sanity check
        let a = crate::core_linalg::perm_matrix(&[1, 2, 0]);
        let b = crate::core_linalg::perm_matrix(&[1, 0]);
        let u = BipartiteOp::new(3, 2, tensor(&a, &b)).unwrap();
        assert_eq!(schmidt_rank(&u).unwrap(), 1);
    }
}
