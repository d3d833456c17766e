//! Choi matrices as the channel-equality oracle.

use super::bipartite::BipartiteOp;
use super::matrix::{zeros, CMatrix, C64};
use crate::error::Result;

/// Choi matrix `(I ⊗ U)|Ω⟩⟨Ω|(I ⊗ U)†` with `|Ω⟩ = Σ_i |i⟩|i⟩` unnormalized
/// on two copies of the `dA·dB`-dimensional space.
pub fn choi_of_unitary(u: &BipartiteOp) -> Result<CMatrix> {
    u.check_unitary(crate::DEFAULT_TOL)?;
    Ok(choi_of_kraus(&u.matrix))
}

/// Choi matrix of the single-Kraus map `ρ ↦ KρK†` (same unnormalized `|Ω⟩`).
/// Entries: `C[(i,j),(k,l)] = K[j,i] · conj(K[l,k])`.
pub fn choi_of_kraus(k: &CMatrix) -> CMatrix {
    let d_in = k.ncols();
    let d_out = k.nrows();
    let d = d_in * d_out;
    let mut c = zeros(d, d);
    for i in 0..d_in {
        for j in 0..d_out {
            for kk in 0..d_in {
                for l in 0..d_out {
                    c[(i * d_out + j, kk * d_out + l)] = k[(j, i)] * k[(l, kk)].conj();
                }
            }
        }
    }
    c
}

/// Frobenius distance between two Choi matrices after global-phase alignment
/// (the phase maximizing `|tr(C1† C2)|`) and normalization to unit trace.
pub fn choi_distance(c1: &CMatrix, c2: &CMatrix) -> f64 {
    let t1 = c1.trace().re.max(f64::MIN_POSITIVE);
    let t2 = c2.trace().re.max(f64::MIN_POSITIVE);
    let a = c1.scale(1.0 / t1);
    let b = c2.scale(1.0 / t2);
    let ip = (a.adjoint() * &b).trace();
    let na = a.norm_squared();
    let nb = b.norm_squared();
    (na + nb - 2.0 * ip.norm()).max(0.0).sqrt()
}

/// Scale-free channel distance between two single-Kraus maps, equal to the
/// Frobenius distance of their unit-trace Choi matrices after phase
/// alignment. Computed through the explicit phase-aligned operator residual,
/// which avoids the catastrophic cancellation of `√(2 − 2·overlap²)` near
/// zero distance.
pub fn kraus_channel_distance(k1: &CMatrix, k2: &CMatrix) -> f64 {
    let n1 = k1.norm();
    let n2 = k2.norm();
    if n1 == 0.0 || n2 == 0.0 {
        return f64::INFINITY;
    }
    let ip = (k1.adjoint() * k2).trace();
    let overlap = (ip.norm() / (n1 * n2)).min(1.0);
    let phase = if ip.norm() > 0.0 { ip / C64::new(ip.norm(), 0.0) } else { C64::new(1.0, 0.0) };
    // ‖k1/n1 − e^{iθ} k2/n2‖ with θ the aligning phase
    let mut resid2 = 0.0;
    for r in 0..k1.nrows() {
        for c in 0..k1.ncols() {
            let d = k1[(r, c)] / C64::new(n1, 0.0) - phase * k2[(r, c)] / C64::new(n2, 0.0);
            resid2 += d.norm_sqr();
        }
    }
    resid2.sqrt() * (1.0 + overlap).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_linalg::matrix::{c, ident};
    use crate::structure::fixtures;
    use crate::core_linalg::BipartiteOp;

    #[test]
    fn identity_choi_is_omega_projector() {
        let u = BipartiteOp::new(2, 2, ident(4)).unwrap();
        let choi = choi_of_unitary(&u).unwrap();
        // |Ω⟩⟨Ω| with Ω = Σ|ii⟩: entries 1 at ((i,i),(k,k)).
        for i in 0..4 {
            for k in 0..4 {
                assert_eq!(choi[(i * 4 + i, k * 4 + k)], c(1.0, 0.0));
            }
        }
        assert_eq!(choi.trace().re, 4.0);
    }

    #[test]
    fn global_phase_invariance() {
        let u = fixtures::cnot();
        let mut m = u.matrix.clone();
        m *= crate::core_linalg::matrix::C64::from_polar(1.0, 1.234);
        let v = BipartiteOp::new(2, 2, m).unwrap();
        let c1 = choi_of_unitary(&u).unwrap();
        let c2 = choi_of_unitary(&v).unwrap();
        assert!((c1 - c2).norm() < 1e-12);
    }

    #[test]
    fn cnot_vs_swap_well_separated() {
        let c1 = choi_of_unitary(&fixtures::cnot()).unwrap();
        let c2 = choi_of_unitary(&fixtures::swap2()).unwrap();
        assert!(choi_distance(&c1, &c2) > 0.1);
    }

    #[test]
    fn kraus_distance_matches_choi_distance() {
        let u = fixtures::cnot();
        let v = fixtures::swap2();
        let d1 = choi_distance(
            &choi_of_unitary(&u).unwrap(),
            &choi_of_unitary(&v).unwrap(),
        );
        let d2 = kraus_channel_distance(&u.matrix, &v.matrix);
        assert!((d1 - d2).abs() < 1e-9);
    }
}
