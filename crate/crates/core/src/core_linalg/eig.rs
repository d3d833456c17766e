//! Eigendecomposition helpers for unitary (normal) matrices.
//!
//! A unitary `U` is normal, so `U = Q Λ Q†` with orthonormal `Q`. We obtain
//! `Q` from the Hermitian combination `H = cos(s)(U+U†)/2 + sin(s)(U−U†)/2i`
//! for a mixing angle that separates the eigenphases, verifying the result
//! and retrying with a different angle on failure.

use super::matrix::{zeros, CMatrix, C64};
use crate::error::{Error, Result};

/// Hermitian eigendecomposition with a retry guard: nalgebra's iteration can
/// emit NaNs on exactly degenerate inputs, in which case a tiny random
/// Hermitian jitter (well below every tolerance in this crate) is added and
/// the decomposition re-run.
pub fn hermitian_eigen(m: &CMatrix) -> nalgebra::SymmetricEigen<C64, nalgebra::Dyn> {
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|l| l.is_finite())
        && eig.eigenvectors.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    {
        return eig;
    }
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x7e57);
    let scale = m.norm().max(1.0);
    for attempt in 1..=8 {
        let mut jittered = sym.clone();
        let eps = scale * 1e-13 * attempt as f64;
        let n = jittered.nrows();
        for i in 0..n {
            for j in i..n {
                let z = C64::new(rng.random_range(-eps..eps), if i == j { 0.0 } else { rng.random_range(-eps..eps) });
                jittered[(i, j)] += z;
                if i != j {
                    jittered[(j, i)] += z.conj();
                }
            }
        }
        let eig = nalgebra::SymmetricEigen::new(jittered);
        if eig.eigenvalues.iter().all(|l| l.is_finite())
            && eig.eigenvectors.iter().all(|z| z.re.is_finite() && z.im.is_finite())
        {
            return eig;
        }
    }
    // Give the caller the raw attempt; downstream residual checks will fail
    // loudly rather than silently.
    nalgebra::SymmetricEigen::new(sym)
}

/// Returns `(q, phases)` with `q† m q = diag(phases)` for a unitary `m`.
pub fn unitary_eigenbasis(m: &CMatrix) -> Result<(CMatrix, Vec<C64>)> {
    let n = m.nrows();
    if super::matrix::unitary_deviation(m) > 1e-7 * (n as f64) {
        return Err(Error::NotUnitary { deviation: super::matrix::unitary_deviation(m) });
    }
    let angles = [0.37, 1.1, 2.3, 0.9, 1.9, 2.9, 0.13, 1.53];
    for &s in &angles {
        let h = hermitian_combo(m, s);
        let eig = nalgebra::SymmetricEigen::new(h);
        let q = eig.eigenvectors.clone();
        let d = q.adjoint() * m * &q;
        if offdiag_norm(&d) <= 1e-9 * (n as f64) {
            let phases: Vec<C64> = (0..n).map(|i| d[(i, i)]).collect();
            return Ok((q, phases));
        }
        // Degenerate H eigenvalues may merge distinct U eigenphases; refine by
        // block-diagonalizing within clusters.
        if let Ok((q2, phases)) = refine_blocks(m, &q, &eig.eigenvalues.as_slice().to_vec()) {
            return Ok((q2, phases));
        }
    }
    Err(Error::StructureResidual { what: "unitary eigendecomposition".into(), residual: f64::NAN })
}

fn hermitian_combo(m: &CMatrix, s: f64) -> CMatrix {
    let a = (m + m.adjoint()).scale(0.5);
    let b = (m - m.adjoint()).map(|z| z * C64::new(0.0, -0.5));
    a.scale(s.cos()) + b.scale(s.sin())
}

fn offdiag_norm(m: &CMatrix) -> f64 {
    let mut s = 0.0;
    for r in 0..m.nrows() {
        for cc in 0..m.ncols() {
            if r != cc {
                s += m[(r, cc)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn refine_blocks(m: &CMatrix, q: &CMatrix, evals: &[f64]) -> Result<(CMatrix, Vec<C64>)> {
    let n = m.nrows();
    // Cluster H-eigenvalues.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| evals[a].partial_cmp(&evals[b]).unwrap());
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match clusters.last_mut() {
            Some(cl) if (evals[*cl.last().unwrap()] - evals[i]).abs() < 1e-8 => cl.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    let mut qout = q.clone();
    for cl in &clusters {
        if cl.len() == 1 {
            continue;
        }
        // Diagonalize the restriction of m to this cluster's span.
        let mut sub = zeros(cl.len(), cl.len());
        let d = q.adjoint() * m * q;
        for (i, &a) in cl.iter().enumerate() {
            for (j, &b) in cl.iter().enumerate() {
                sub[(i, j)] = d[(a, b)];
            }
        }
        let (qs, _) = unitary_eigenbasis(&sub)?;
        // Rotate the cluster columns of q.
        let mut cols = zeros(n, cl.len());
        for (j, &b) in cl.iter().enumerate() {
            for r in 0..n {
                cols[(r, j)] = qout[(r, b)];
            }
        }
        let rotated = cols * qs;
        for (j, &b) in cl.iter().enumerate() {
            for r in 0..n {
                qout[(r, b)] = rotated[(r, j)];
            }
        }
    }
    let d = qout.adjoint() * m * &qout;
    if offdiag_norm(&d) <= 1e-8 * (n as f64) {
        let phases: Vec<C64> = (0..n).map(|i| d[(i, i)]).collect();
        Ok((qout, phases))
    } else {
        Err(Error::StructureResidual { what: "unitary eigendecomposition refinement".into(), residual: offdiag_norm(&d) })
    }
}

/// Simultaneous eigenbasis of a family of commuting unitaries. Returns `q`
/// with every `q† m q` diagonal.
pub fn simultaneous_unitary_eigenbasis(ms: &[CMatrix]) -> Result<CMatrix> {
    if ms.is_empty() {
        return Err(Error::BadInput("empty family".into()));
    }
    let n = ms[0].nrows();
    let mut q = super::matrix::ident(n);
    // Refine a partition of the basis: start with one block of everything.
    let mut blocks: Vec<Vec<usize>> = vec![(0..n).collect()];
    for m in ms {
        let mut next_blocks = Vec::new();
        for bl in &blocks {
            if bl.len() == 1 {
                next_blocks.push(bl.clone());
                continue;
            }
            let d = q.adjoint() * m * &q;
            let mut sub = zeros(bl.len(), bl.len());
            for (i, &a) in bl.iter().enumerate() {
                for (j, &b) in bl.iter().enumerate() {
                    sub[(i, j)] = d[(a, b)];
                }
            }
            let (qs, phases) = unitary_eigenbasis(&sub)?;
            // Rotate columns.
            let mut cols = zeros(n, bl.len());
            for (j, &b) in bl.iter().enumerate() {
                for r in 0..n {
                    cols[(r, j)] = q[(r, b)];
                }
            }
            let rotated = cols * &qs;
            for (j, &b) in bl.iter().enumerate() {
                for r in 0..n {
                    q[(r, b)] = rotated[(r, j)];
                }
            }
            // Split the block by eigenphase clusters.
            let mut sub_order: Vec<usize> = (0..bl.len()).collect();
            sub_order.sort_by(|&x, &y| {
                phases[x]
                    .arg()
                    .partial_cmp(&phases[y].arg())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let mut cur: Vec<usize> = Vec::new();
            let mut prev: Option<C64> = None;
            for &si in &sub_order {
                let ph = phases[si];
                if let Some(p) = prev {
                    if (p - ph).norm() > 1e-8 {
                        next_blocks.push(cur.iter().map(|&i| bl[i]).collect());
                        cur = Vec::new();
                    }
                }
                cur.push(si);
                prev = Some(ph);
            }
            if !cur.is_empty() {
                next_blocks.push(cur.iter().map(|&i| bl[i]).collect());
            }
        }
        blocks = next_blocks;
    }
    // Verify.
    for m in ms {
        let d = q.adjoint() * m * &q;
        if offdiag_norm(&d) > 1e-7 * (n as f64) {
            return Err(Error::StructureResidual {
                what: "simultaneous diagonalization".into(),
                residual: offdiag_norm(&d),
            });
        }
    }
    Ok(q)
}

/// Finest simultaneous block-diagonalization of a family of unitaries, via
/// the eigenspaces of a random Hermitian element of their commutant. Returns
/// the change of basis `q` and the block index sets (contiguous in the new
/// ordering): every `q† m q` is block diagonal over them.
pub fn joint_block_structure(ms: &[CMatrix]) -> Result<(CMatrix, Vec<Vec<usize>>)> {
    use rand::prelude::*;
    if ms.is_empty() {
        return Err(Error::BadInput("empty family".into()));
    }
    let n = ms[0].nrows();
    // Commutant nullspace: stack (M ⊗ I − I ⊗ Mᵀ) constraints over the family.
    let mut rows = Vec::new();
    for m in ms {
        for r in 0..n {
            for cc in 0..n {
                // ([M, X])_{r,c} = Σ_k M[r,k]X[k,cc] − X[r,k]M[k,cc]
                let mut row = vec![C64::new(0.0, 0.0); n * n];
                for k in 0..n {
                    row[k * n + cc] += m[(r, k)];
                    row[r * n + k] -= m[(k, cc)];
                }
                rows.push(row);
            }
        }
    }
    let mut cons = zeros(rows.len(), n * n);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            cons[(i, j)] = *v;
        }
    }
    let svd = cons.svd(false, true);
    let vt = svd.v_t.as_ref().expect("v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max).max(1.0);
    let null_dims: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= 1e-9 * smax)
        .collect();
    // The nullspace always contains the identity. Build a random Hermitian
    // commutant element from a fixed seed.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_b10c);
    for _attempt in 0..6 {
        let mut x = zeros(n, n);
        for &i in &null_dims {
            let w = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            for j in 0..n * n {
                x[(j / n, j % n)] += vt[(i, j)].conj() * w;
            }
        }
        let y = (&x + x.adjoint()).scale(0.5);
        if y.norm() < 1e-9 {
            continue;
        }
        let eig = nalgebra::SymmetricEigen::new(y);
        // Sort eigenpairs by eigenvalue.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let mut q = zeros(n, n);
        for (new, &old) in order.iter().enumerate() {
            for r in 0..n {
                q[(r, new)] = eig.eigenvectors[(r, old)];
            }
        }
        // Cluster eigenvalues into blocks.
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut prev: Option<f64> = None;
        let scale = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1.0);
        for (new, &old) in order.iter().enumerate() {
            let v = eig.eigenvalues[old];
            match (prev, blocks.last_mut()) {
                (Some(p), Some(last)) if (v - p).abs() <= 1e-7 * scale => last.push(new),
                _ => blocks.push(vec![new]),
            }
            prev = Some(v);
        }
        // Verify family block-diagonality.
        let ok = ms.iter().all(|m| {
            let d = q.adjoint() * m * &q;
            let mut off = 0.0;
            for (bi, bl) in blocks.iter().enumerate() {
                for (bj, bl2) in blocks.iter().enumerate() {
                    if bi != bj {
                        for &r in bl {
                            for &cc in bl2 {
                                off += d[(r, cc)].norm_sqr();
                            }
                        }
                    }
                }
            }
            off.sqrt() <= 1e-7 * (n as f64)
        });
        if ok {
            return Ok((q, blocks));
        }
    }
    Err(Error::StructureResidual { what: "joint block structure".into(), residual: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_linalg::matrix::{c, ident, perm_matrix};

    #[test]
    fn eigenbasis_of_shift() {
        let x = perm_matrix(&[1, 2, 0]);
        let (q, phases) = unitary_eigenbasis(&x).unwrap();
        let d = q.adjoint() * &x * &q;
        for i in 0..3 {
            assert!((d[(i, i)] - phases[i]).norm() < 1e-9);
            assert!((phases[i].norm() - 1.0).abs() < 1e-9);
        }
        assert!(offdiag_norm(&d) < 1e-9);
    }

    #[test]
    fn eigenbasis_with_degeneracy() {
        // σz ⊕ σz has eigenvalues ±1 doubly degenerate.
        let mut m = ident(4);
        m[(1, 1)] = c(-1.0, 0.0);
        m[(3, 3)] = c(-1.0, 0.0);
        let rot = {
            // conjugate by a random-ish unitary from a cyclic shift mix
            let p = perm_matrix(&[2, 0, 3, 1]);
            p
        };
        let mm = &rot * m * rot.adjoint();
        let (q, _) = unitary_eigenbasis(&mm).unwrap();
        let d = q.adjoint() * &mm * &q;
        assert!(offdiag_norm(&d) < 1e-8);
    }

    #[test]
    fn simultaneous_family() {
        // Commuting diagonal family conjugated by a fixed permutation.
        let p = perm_matrix(&[1, 3, 0, 2]);
        let d1 = {
            let mut m = ident(4);
            m[(2, 2)] = c(-1.0, 0.0);
            m[(3, 3)] = c(-1.0, 0.0);
            m
        };
        let d2 = {
            let mut m = ident(4);
            m[(1, 1)] = c(0.0, 1.0);
            m[(3, 3)] = c(0.0, 1.0);
            m
        };
        let fam = [&p * &d1 * p.adjoint(), &p * &d2 * p.adjoint()];
        let q = simultaneous_unitary_eigenbasis(&fam).unwrap();
        for m in &fam {
            let d = q.adjoint() * m * &q;
            assert!(offdiag_norm(&d) < 1e-8);
        }
    }
}
