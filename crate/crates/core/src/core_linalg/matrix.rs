//! Matrix scalars, constructors and small utilities shared by every module.

use nalgebra::DMatrix;
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn ident(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Permutation matrix sending basis state `j` to `perm[j]` (column `j` has its
/// one in row `perm[j]`).
pub fn perm_matrix(perm: &[usize]) -> CMatrix {
    let n = perm.len();
    let mut m = zeros(n, n);
    for (j, &i) in perm.iter().enumerate() {
        m[(i, j)] = c(1.0, 0.0);
    }
    m
}

/// Kronecker product with the A-major convention: row index of the result is
/// `a * b.nrows() + b_row`, matching the composite index `i = a*dB + b` used
/// by [`super::BipartiteOp`].
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all(mats: &[&CMatrix]) -> CMatrix {
    let mut out = ident(1);
    for m in mats {
        out = tensor(&out, m);
    }
    out
}

/// `‖M M† − I‖_F`, zero for unitary `M`.
pub fn unitary_deviation(m: &CMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    (m * m.adjoint() - ident(m.nrows())).norm()
}

pub fn mat_approx_eq(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    a.nrows() == b.nrows() && a.ncols() == b.ncols() && (a - b).norm() <= tol
}

/// Applies `op` to the tensor factors `(fa, fb)` of a state vector over the
/// product space with per-factor dimensions `dims`. `op` must be square of
/// order `dims[fa] * dims[fb]` and is indexed with `fa` major.
pub fn apply_on_factor_pair(state: &[C64], dims: &[usize], fa: usize, fb: usize, op: &CMatrix) -> Vec<C64> {
    assert!(fa != fb);
    let da = dims[fa];
    let db = dims[fb];
    assert_eq!(op.nrows(), da * db);
    let total: usize = dims.iter().product();
    assert_eq!(state.len(), total);

    // Strides for each factor in the flattened state (row-major, factor 0 slowest).
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let sa = strides[fa];
    let sb = strides[fb];

    let mut out = vec![C64::new(0.0, 0.0); total];
    // Iterate over all indices with factors fa, fb fixed to zero, then apply
    // the dense op on the (fa, fb) plane.
    let mut base_indices: Vec<usize> = Vec::new();
    {
        // Enumerate all full indices; keep those whose fa and fb digits are 0.
        // total is small in this crate (≤ ~100k), so a filter pass is fine.
        for idx in 0..total {
            let ia = (idx / sa) % da;
            let ib = (idx / sb) % db;
            if ia == 0 && ib == 0 {
                base_indices.push(idx);
            }
        }
    }
    let mut amp_in = vec![C64::new(0.0, 0.0); da * db];
    for &base in &base_indices {
        for a in 0..da {
            for b in 0..db {
                amp_in[a * db + b] = state[base + a * sa + b * sb];
            }
        }
        for row in 0..da * db {
            let mut acc = C64::new(0.0, 0.0);
            for col in 0..da * db {
                let v = op[(row, col)];
                if v.re != 0.0 || v.im != 0.0 {
                    acc += v * amp_in[col];
                }
            }
            let a = row / db;
            let b = row % db;
            out[base + a * sa + b * sb] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perm_matrix_columns() {
        let p = perm_matrix(&[2, 0, 1]);
        assert_eq!(p[(2, 0)], c(1.0, 0.0));
        assert_eq!(p[(0, 1)], c(1.0, 0.0));
        assert_eq!(p[(1, 2)], c(1.0, 0.0));
        assert!(unitary_deviation(&p) < 1e-12);
    }

    #[test]
    fn tensor_projector_block() {
        // diag(1,0) ⊗ X has X in the upper-left 2x2 block, zeros elsewhere.
        let proj = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        let x = perm_matrix(&[1, 0]);
        let t = tensor(&proj, &x);
        assert_eq!(t[(0, 1)], c(1.0, 0.0));
        assert_eq!(t[(1, 0)], c(1.0, 0.0));
        for i in 2..4 {
            for j in 0..4 {
                assert_eq!(t[(i, j)], c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn factor_pair_application_matches_kron() {
        // dims (2,3,2): apply op on factors (0,2) and compare against full kron.
        let dims = [2usize, 3, 2];
        let op = {
            let mut m = zeros(4, 4);
            m[(0, 1)] = c(1.0, 0.0);
            m[(1, 0)] = c(1.0, 0.0);
            m[(2, 3)] = c(0.0, 1.0);
            m[(3, 2)] = c(0.0, -1.0);
            m
        };
        let total = 12;
        let state: Vec<C64> = (0..total).map(|i| c(i as f64 + 0.5, -(i as f64))).collect();
        let got = apply_on_factor_pair(&state, &dims, 0, 2, &op);

        // Build full operator: reorder op from (f0,f2) ordering into the full space.
        let mut full = zeros(total, total);
        for a in 0..2 {
            for b in 0..3 {
                for cidx in 0..2 {
                    for a2 in 0..2 {
                        for c2 in 0..2 {
                            let row = a * 6 + b * 2 + cidx;
                            let col = a2 * 6 + b * 2 + c2;
                            full[(row, col)] += op[(a * 2 + cidx, a2 * 2 + c2)];
                        }
                    }
                }
            }
        }
        let want: Vec<C64> = (0..total)
            .map(|r| (0..total).map(|cc| full[(r, cc)] * state[cc]).sum())
            .collect();
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).norm() < 1e-12);
        }
    }
}
