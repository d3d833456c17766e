//! Von Neumann entropy and the general partial trace.

use super::matrix::{zeros, CMatrix};
use crate::error::{Error, Result};

/// Entropy in ebits of a density matrix: `−Σ λ log2 λ` over eigenvalues
/// `λ > tol`. The input is checked to be Hermitian, positive semidefinite and
/// unit trace to `tol`; the violated check is named in the error.
pub fn von_neumann_entropy(rho: &CMatrix, tol: f64) -> Result<f64> {
    if rho.nrows() != rho.ncols() {
        return Err(Error::DimensionMismatch("density matrix must be square".into()));
    }
    let herm_dev = (rho - rho.adjoint()).norm();
    if herm_dev > tol {
        return Err(Error::NotDensity { check: "hermitian", deviation: herm_dev });
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
        return Err(Error::NotDensity { check: "unit trace", deviation: (tr.re - 1.0).hypot(tr.im) });
    }
    let eig = super::eig::hermitian_eigen(rho);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::NotDensity { check: "positive semidefinite", deviation: -min });
    }
    Ok(entropy_of_spectrum(eig.eigenvalues.as_slice(), tol))
}

pub fn entropy_of_spectrum(eigs: &[f64], tol: f64) -> f64 {
    let mut s = 0.0;
    for &l in eigs {
        if l > tol {
            s -= l * l.log2();
        }
    }
    s.max(0.0)
}

/// Reduced density matrix on the factors listed in `keep` (in the order they
/// appear in `dims`). `state` is a density matrix over the product of `dims`.
pub fn partial_trace(state: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if state.nrows() != total || state.ncols() != total {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, dims product is {total}",
            state.nrows(),
            state.ncols()
        )));
    }
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::DimensionMismatch("keep index out of range".into()));
    }
    let mut keep_sorted: Vec<usize> = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep_sorted.contains(i)).collect();

    let dk: usize = keep_sorted.iter().map(|&i| dims[i]).product();
    let dt: usize = traced.iter().map(|&i| dims[i]).product::<usize>().max(1);

    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let flat = |digits_k: usize, digits_t: usize| -> usize {
        let mut idx = 0;
        let mut dk_rem = digits_k;
        for (pos, &f) in keep_sorted.iter().enumerate().rev() {
            let base: usize = keep_sorted[pos + 1..].iter().map(|&i| dims[i]).product::<usize>().max(1);
            let _ = base;
            let d = dims[f];
            idx += (dk_rem % d) * strides[f];
            dk_rem /= d;
        }
        let mut dt_rem = digits_t;
        for &f in traced.iter().rev() {
            let d = dims[f];
            idx += (dt_rem % d) * strides[f];
            dt_rem /= d;
        }
        idx
    };

    let mut out = zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = super::matrix::C64::new(0.0, 0.0);
            for t in 0..dt {
                acc += state[(flat(i, t), flat(j, t))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_linalg::matrix::{c, ident, tensor, C64};

    #[test]
    fn pure_state_entropy_zero() {
        let mut rho = zeros(3, 3);
        rho[(1, 1)] = c(1.0, 0.0);
        assert!(von_neumann_entropy(&rho, 1e-10).unwrap().abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_entropies() {
        let rho = ident(2).scale(0.5);
        assert!((von_neumann_entropy(&rho, 1e-10).unwrap() - 1.0).abs() < 1e-12);
        let rho3 = ident(3).scale(1.0 / 3.0);
        assert!((von_neumann_entropy(&rho3, 1e-10).unwrap() - 3.0f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn non_density_inputs_are_named() {
        let mut m = zeros(2, 2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(
            von_neumann_entropy(&m, 1e-10),
            Err(Error::NotDensity { check: "hermitian", .. })
        ));
        let m2 = ident(2);
        assert!(matches!(
            von_neumann_entropy(&m2, 1e-10),
            Err(Error::NotDensity { check: "unit trace", .. })
        ));
        let mut m3 = zeros(2, 2);
        m3[(0, 0)] = c(1.5, 0.0);
        m3[(1, 1)] = c(-0.5, 0.0);
        assert!(matches!(
            von_neumann_entropy(&m3, 1e-10),
            Err(Error::NotDensity { check: "positive semidefinite", .. })
        ));
    }

    #[test]
    fn trace_out_bell_state() {
        // |Φ+⟩⟨Φ+| reduced to either side is I/2.
        let mut psi = vec![C64::new(0.0, 0.0); 4];
        psi[0] = c(1.0 / 2f64.sqrt(), 0.0);
        psi[3] = c(1.0 / 2f64.sqrt(), 0.0);
        let mut rho = zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                rho[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        let ra = partial_trace(&rho, &[2, 2], &[0]).unwrap();
        assert!((ra - ident(2).scale(0.5)).norm() < 1e-12);
    }

    #[test]
    fn trace_out_product_state() {
        let mut rho_a = zeros(2, 2);
        rho_a[(0, 0)] = c(0.25, 0.0);
        rho_a[(1, 1)] = c(0.75, 0.0);
        rho_a[(0, 1)] = c(0.1, 0.2);
        rho_a[(1, 0)] = c(0.1, -0.2);
        let rho_b = ident(3).scale(1.0 / 3.0);
        let joint = tensor(&rho_a, &rho_b);
        let got = partial_trace(&joint, &[2, 3], &[0]).unwrap();
        assert!((got - rho_a).norm() < 1e-12);
    }

    #[test]
    fn cnot_on_plus_zero_gives_mixed_half() {
        // Trace out A of CNOT |+⟩|0⟩ → diag(1/2, 1/2).
        let u = crate::structure::fixtures::cnot();
        let s = 1.0 / 2f64.sqrt();
        let input = [c(s, 0.0), c(0.0, 0.0), c(s, 0.0), c(0.0, 0.0)];
        let mut out = vec![C64::new(0.0, 0.0); 4];
        for r in 0..4 {
            for cc in 0..4 {
                out[r] += u.matrix[(r, cc)] * input[cc];
            }
        }
        let mut rho = zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                rho[(i, j)] = out[i] * out[j].conj();
            }
        }
        let rb = partial_trace(&rho, &[2, 2], &[1]).unwrap();
        assert!((rb - ident(2).scale(0.5)).norm() < 1e-12);
    }
}
