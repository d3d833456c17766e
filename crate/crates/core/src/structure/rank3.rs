//! Standard form of Schmidt-rank-3 unitaries controlled from the A side.
//!
//! The dichotomy: either the operator is an A-direct sum of at most three
//! pieces of Schmidt rank at most two, or (after local gauging) its B side
//! splits into a diagonal chunk plus 2×2 blocks on which the second basis
//! operator is `diag(e^{iα_k}, −e^{−iα_k})` and the third has equal positive
//! off-diagonal entries.

use super::controlled::LocalGauge;
use crate::core_linalg::{
    ident, tensor, unitary_eigenbasis, zeros, BipartiteOp, CMatrix, C64,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Rank3Block {
    /// B-basis levels `(p, q)` of this 2×2 block.
    pub levels: (usize, usize),
    pub t2_block: CMatrix,
    pub t3_block: CMatrix,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub enum Rank3Form {
    /// A-direct sum of at most three unitaries of Schmidt rank ≤ 2; pieces
    /// are restrictions of the *original* operator to the level sets.
    ADirectSum { pieces: Vec<(Vec<usize>, BipartiteOp)> },
    /// B-direct sum: diagonal levels plus gauged 2×2 blocks of `t2`/`t3`.
    BDirectSum {
        diag_levels: Vec<usize>,
        blocks: Vec<Rank3Block>,
        t2: CMatrix,
        t3: CMatrix,
    },
}

#[derive(Debug, Clone)]
pub struct Rank3StandardForm {
    /// The S1/S2/S3 level partition over the A basis: levels whose block lies
    /// in span{I,T2}, in span{I,T3} minus S1, and the rest.
    pub s_partition: [Vec<usize>; 3],
    /// `U = (post_a ⊗ post_b) · F · (pre_a ⊗ pre_b)` with `F` the gauged
    /// controlled form `Σ_j |j⟩⟨j| ⊗ (c_j1 I + c_j2 T2 + c_j3 T3)`.
    pub gauge: LocalGauge,
    /// Per-A-level coefficients in the gauged frame.
    pub coefficients: Vec<(C64, C64, C64)>,
    pub form: Rank3Form,
}

impl Rank3StandardForm {
    /// Rebuilds the original operator from the gauged data.
    pub fn reconstruct(&self, d_a: usize, d_b: usize) -> Result<BipartiteOp> {
        match &self.form {
            Rank3Form::ADirectSum { pieces } => {
                let mut m = zeros(d_a * d_b, d_a * d_b);
                for (levels, piece) in pieces {
                    for (yi, &y) in levels.iter().enumerate() {
                        for (xi, &x) in levels.iter().enumerate() {
                            for r in 0..d_b {
                                for cc in 0..d_b {
                                    m[(y * d_b + r, x * d_b + cc)] =
                                        piece.matrix[(yi * d_b + r, xi * d_b + cc)];
                                }
                            }
                        }
                    }
                }
                BipartiteOp::new(d_a, d_b, m)
            }
            Rank3Form::BDirectSum { t2, t3, .. } => {
                let mut f = zeros(d_a * d_b, d_a * d_b);
                for (j, (c1, c2, c3)) in self.coefficients.iter().enumerate() {
                    let t = ident(d_b).map(|e| e * c1) + t2.map(|e| e * c2) + t3.map(|e| e * c3);
                    for r in 0..d_b {
                        for cc in 0..d_b {
                            f[(j * d_b + r, j * d_b + cc)] = t[(r, cc)];
                        }
                    }
                }
                let m = tensor(&self.gauge.post_a, &self.gauge.post_b)
                    * f
                    * tensor(&self.gauge.pre_a, &self.gauge.pre_b);
                BipartiteOp::new(d_a, d_b, m)
            }
        }
    }
}

/// Least-squares coefficients of `m` in the span of `basis`, with residual.
fn span_coefficients(m: &CMatrix, basis: &[&CMatrix]) -> (Vec<C64>, f64) {
    let d2 = m.nrows() * m.ncols();
    let k = basis.len();
    let mut a = zeros(d2, k);
    for (col, b) in basis.iter().enumerate() {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                a[(i * m.ncols() + j, col)] = b[(i, j)];
            }
        }
    }
    let mut y = zeros(d2, 1);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            y[(i * m.ncols() + j, 0)] = m[(i, j)];
        }
    }
    // Normal equations are fine at these sizes.
    let ata = a.adjoint() * &a;
    let aty = a.adjoint() * &y;
    let sol = ata.lu().solve(&aty).unwrap_or_else(|| zeros(k, 1));
    let resid = (&a * &sol - &y).norm();
    ((0..k).map(|i| sol[(i, 0)]).collect(), resid)
}

fn in_span(m: &CMatrix, basis: &[&CMatrix], tol: f64) -> bool {
    span_coefficients(m, basis).1 <= tol * m.norm().max(1.0)
}

/// Computes the standard form of a Schmidt-rank-3 unitary that is controlled
/// from the A side in the computational basis (run [`super::detect_controlled`]
/// first and gauge if needed).
pub fn rank3_standard_form(u: &BipartiteOp) -> Result<Rank3StandardForm> {
    let tol = crate::DEFAULT_TOL;
    u.check_unitary(tol)?;
    let rank = crate::core_linalg::operator_schmidt(u, tol)?.rank();
    if rank != 3 {
        return Err(Error::WrongSchmidtRank { expected: 3, found: rank });
    }
    // Must be block diagonal (controlled in the computational basis from A).
    let scale = u.matrix.norm().max(1.0);
    for y in 0..u.d_a {
        for x in 0..u.d_a {
            if y != x && u.block_norm(y, x) > tol * scale {
                return Err(Error::NotControlled { side: "A" });
            }
        }
    }
    let d_b = u.d_b;
    let k_levels = u.d_a;
    let raw: Vec<CMatrix> = (0..k_levels).map(|j| u.block(j, j)).collect();

    // Gauge T_0 to the identity: T'_j = T_j · T_0†, U = F · (I ⊗ T_0).
    let t0 = raw[0].clone();
    let mut gauge = LocalGauge::trivial(u.d_a, u.d_b);
    gauge.pre_b = t0.clone();
    let ops: Vec<CMatrix> = raw.iter().map(|t| t * t0.adjoint()).collect();

    let id = ident(d_b);
    // T2: first block outside span{I}; T3: first outside span{I,T2}.
    let t2_idx = (0..k_levels)
        .find(|&j| !in_span(&ops[j], &[&id], tol))
        .ok_or(Error::WrongSchmidtRank { expected: 3, found: 1 })?;
    let t2 = ops[t2_idx].clone();
    let t3_idx = (0..k_levels)
        .find(|&j| !in_span(&ops[j], &[&id, &t2], tol))
        .ok_or(Error::WrongSchmidtRank { expected: 3, found: 2 })?;
    let t3 = ops[t3_idx].clone();

    let mut s_partition: [Vec<usize>; 3] = [vec![], vec![], vec![]];
    for j in 0..k_levels {
        if in_span(&ops[j], &[&id, &t2], tol) {
            s_partition[0].push(j);
        } else if in_span(&ops[j], &[&id, &t3], tol) {
            s_partition[1].push(j);
        } else {
            s_partition[2].push(j);
        }
    }

    // First form when the S3 part spans at most two dimensions.
    let w3_rank = {
        let mats: Vec<&CMatrix> = s_partition[2].iter().map(|&j| &ops[j]).collect();
        span_rank(&mats, tol)
    };
    if w3_rank <= 2 {
        let pieces: Vec<(Vec<usize>, BipartiteOp)> = s_partition
            .iter()
            .filter(|lv| !lv.is_empty())
            .map(|lv| (lv.clone(), restrict_levels(u, lv)))
            .collect();
        for (_, p) in &pieces {
            let r = crate::core_linalg::operator_schmidt(p, tol)?.rank();
            if r > 2 {
                return Err(Error::StructureResidual {
                    what: format!("A-direct-sum piece has Schmidt rank {r} > 2"),
                    residual: 0.0,
                });
            }
        }
        let coefficients = all_coefficients(&ops, &id, &t2, &t3, tol)?;
        return Ok(Rank3StandardForm {
            s_partition,
            gauge,
            coefficients,
            form: Rank3Form::ADirectSum { pieces },
        });
    }

    // Second form: the finest simultaneous block structure of {T2, T3} from
    // a random Hermitian commutant element. Commuting blocks refine to
    // diagonal levels; non-commuting blocks must be 2×2 with T2 diagonalized.
    let (qjoint, blocks0) = crate::core_linalg::joint_block_structure(&[t2.clone(), t3.clone()])?;
    let mut qtotal = qjoint.clone();
    let mut diag_levels: Vec<usize> = Vec::new();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    {
        let t2j = qjoint.adjoint() * &t2 * &qjoint;
        let t3j = qjoint.adjoint() * &t3 * &qjoint;
        for bl in &blocks0 {
            let sub = |m: &CMatrix| {
                let mut s = zeros(bl.len(), bl.len());
                for (i, &a) in bl.iter().enumerate() {
                    for (j, &b) in bl.iter().enumerate() {
                        s[(i, j)] = m[(a, b)];
                    }
                }
                s
            };
            let t2b = sub(&t2j);
            let t3b = sub(&t3j);
            let comm = (&t2b * &t3b - &t3b * &t2b).norm();
            let rot = if comm <= 1e-7 {
                diag_levels.extend(bl.iter().copied());
                crate::core_linalg::simultaneous_unitary_eigenbasis(&[t2b, t3b])?
            } else {
                if bl.len() != 2 {
                    return Err(Error::StructureResidual {
                        what: format!("non-commuting joint block of size {} (expected 2)", bl.len()),
                        residual: comm,
                    });
                }
                pairs.push((bl[0], bl[1]));
                let (qb, phases) = unitary_eigenbasis(&t2b)?;
                // Deterministic order within the pair by eigenphase.
                if phases[0].arg() > phases[1].arg() {
                    let mut sw = zeros(2, 2);
                    sw[(0, 1)] = C64::new(1.0, 0.0);
                    sw[(1, 0)] = C64::new(1.0, 0.0);
                    qb * sw
                } else {
                    qb
                }
            };
            // Embed the block rotation into qtotal.
            let mut cols = zeros(d_b, bl.len());
            for (j, &b) in bl.iter().enumerate() {
                for r in 0..d_b {
                    cols[(r, j)] = qtotal[(r, b)];
                }
            }
            let rotated = cols * rot;
            for (j, &b) in bl.iter().enumerate() {
                for r in 0..d_b {
                    qtotal[(r, b)] = rotated[(r, j)];
                }
            }
        }
    }
    diag_levels.sort_unstable();
    let t2g = qtotal.adjoint() * &t2 * &qtotal;
    let t3g = qtotal.adjoint() * &t3 * &qtotal;
    gauge.post_b = gauge.post_b.clone() * &qtotal;
    gauge.pre_b = qtotal.adjoint() * gauge.pre_b.clone();

    let mut q_all = qtotal.clone();
    let (t2f, t3f) = if pairs.is_empty() {
        (t2g, t3g)
    } else {
        // (a) Global phase on T3 making E3 Hermitian.
        let (_, e3) = split_diag(&t3g);
        let (p0, q0) = pairs[0];
        if e3[(p0, q0)].norm() <= tol || e3[(q0, p0)].norm() <= tol {
            return Err(Error::StructureResidual {
                what: "pair block with vanishing T3 off-diagonal".into(),
                residual: e3[(p0, q0)].norm().min(e3[(q0, p0)].norm()),
            });
        }
        let ratio = e3[(q0, p0)].conj() / e3[(p0, q0)];
        if (ratio.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::StructureResidual {
                what: "E3 entries at transposed positions have unequal modulus".into(),
                residual: (ratio.norm() - 1.0).abs(),
            });
        }
        let phase3 = C64::from_polar(1.0, ratio.arg() / 2.0);
        let t3p = t3g.map(|z| z * phase3);
        let (_, e3p) = split_diag(&t3p);
        let herm_resid = (&e3p - &e3p.adjoint()).norm();
        if herm_resid > 1e-7 * scale {
            return Err(Error::StructureResidual { what: "E3 Hermitian gauge".into(), residual: herm_resid });
        }

        // (b) Global phase on T2: T2 E3 = −E3 T2†.
        let ratio2 = -t2g[(q0, q0)].conj() / t2g[(p0, p0)];
        let phase2 = C64::from_polar(1.0, ratio2.arg() / 2.0);
        let t2p = t2g.map(|z| z * phase2);
        let anti_resid = (&t2p * &e3p + &e3p * t2p.adjoint()).norm();
        if anti_resid > 1e-7 * scale {
            return Err(Error::StructureResidual { what: "T2 E3 = -E3 T2† gauge".into(), residual: anti_resid });
        }

        // (c) Per-pair diagonal conjugation making T3 off-diagonals positive.
        let mut qk = ident(d_b);
        for &(p, qq) in &pairs {
            let e = t3p[(p, qq)];
            if e.norm() <= tol {
                return Err(Error::StructureResidual {
                    what: format!("pair ({p},{qq}) lost its off-diagonal"),
                    residual: e.norm(),
                });
            }
            // Conjugation sends the (p,qq) entry to e · qk[qq], so the phase
            // must be the conjugate of e's.
            qk[(qq, qq)] = e.conj() / C64::new(e.norm(), 0.0);
        }
        let t2f = qk.adjoint() * &t2p * &qk;
        let t3f = qk.adjoint() * &t3p * &qk;
        gauge.post_b = gauge.post_b.clone() * &qk;
        gauge.pre_b = qk.adjoint() * gauge.pre_b.clone();
        q_all *= &qk;
        (t2f, t3f)
    };

    // Canonicalize each pair so that α lands in (−π/2, π/2]: swapping the two
    // levels maps α to π − α, and exactly one representative is in range.
    let (t2f, t3f, pairs) = {
        let mut perm: Vec<usize> = (0..d_b).collect();
        let mut new_pairs = Vec::with_capacity(pairs.len());
        let mut swapped_any = false;
        for &(p, qq) in &pairs {
            let alpha = t2f[(p, p)].arg();
            if alpha <= -std::f64::consts::FRAC_PI_2 + 1e-12 || alpha > std::f64::consts::FRAC_PI_2 + 1e-12 {
                perm.swap(p, qq);
                swapped_any = true;
            }
            new_pairs.push((p, qq));
        }
        if swapped_any {
            let pm = crate::core_linalg::perm_matrix(&perm);
            let t2n = pm.adjoint() * &t2f * &pm;
            let t3n = pm.adjoint() * &t3f * &pm;
            gauge.post_b = gauge.post_b.clone() * &pm;
            gauge.pre_b = pm.adjoint() * gauge.pre_b.clone();
            q_all *= &pm;
            (t2n, t3n, new_pairs)
        } else {
            (t2f, t3f, new_pairs)
        }
    };

    // Assemble blocks sorted by (alpha, min level) and validate shapes.
    let mut blocks = Vec::new();
    for &(p, qq) in &pairs {
        let t2b = two_by_two(&t2f, p, qq);
        let t3b = two_by_two(&t3f, p, qq);
        let alpha = t2f[(p, p)].arg();
        let want_q = -C64::from_polar(1.0, -alpha);
        if (t2f[(qq, qq)] - want_q).norm() > 1e-7 {
            return Err(Error::StructureResidual {
                what: format!("T2 block at ({p},{qq}) is not diag(e^{{iα}}, -e^{{-iα}})"),
                residual: (t2f[(qq, qq)] - want_q).norm(),
            });
        }
        let off1 = t3f[(p, qq)];
        let off2 = t3f[(qq, p)];
        if (off1 - off2).norm() > 1e-7 || off1.im.abs() > 1e-7 || off1.re <= 0.0 {
            return Err(Error::StructureResidual {
                what: format!("T3 block at ({p},{qq}) lacks equal positive off-diagonals"),
                residual: (off1 - off2).norm(),
            });
        }
        blocks.push(Rank3Block { levels: (p, qq), t2_block: t2b, t3_block: t3b, alpha });
    }
    blocks.sort_by(|a, b| {
        a.alpha
            .partial_cmp(&b.alpha)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.levels.0.cmp(&b.levels.0))
    });

    // Coefficients in the fully gauged frame, with the A-side phase gauge
    // making c1 real nonnegative.
    let mut coefficients = Vec::with_capacity(k_levels);
    let mut a_phases = zeros(k_levels, k_levels);
    for (j, op) in ops.iter().enumerate() {
        let w = q_all.adjoint() * op * &q_all;
        let (co, resid) = span_coefficients(&w, &[&ident(d_b), &t2f, &t3f]);
        if resid > 1e-6 * scale {
            return Err(Error::StructureResidual { what: format!("level {j} outside span{{I,T2,T3}}"), residual: resid });
        }
        let c1 = co[0];
        let ph = if c1.norm() > tol { C64::from_polar(1.0, -c1.arg()) } else { C64::new(1.0, 0.0) };
        a_phases[(j, j)] = ph.conj();
        coefficients.push((c1 * ph, co[1] * ph, co[2] * ph));
    }
    // F = (D_A† ⊗ I) F' with D_A the applied phases; move D_A† into post_a.
    gauge.post_a = gauge.post_a.clone() * a_phases;

    let out = Rank3StandardForm {
        s_partition,
        gauge,
        coefficients,
        form: Rank3Form::BDirectSum { diag_levels, blocks, t2: t2f, t3: t3f },
    };
    validate_reconstruction(u, &out)?;
    Ok(out)
}

fn all_coefficients(
    ops: &[CMatrix],
    id: &CMatrix,
    t2: &CMatrix,
    t3: &CMatrix,
    _tol: f64,
) -> Result<Vec<(C64, C64, C64)>> {
    let mut out = Vec::with_capacity(ops.len());
    for (j, op) in ops.iter().enumerate() {
        let (co, resid) = span_coefficients(op, &[id, t2, t3]);
        if resid > 1e-6 * op.norm().max(1.0) {
            return Err(Error::StructureResidual {
                what: format!("level {j} outside span{{I,T2,T3}}"),
                residual: resid,
            });
        }
        out.push((co[0], co[1], co[2]));
    }
    Ok(out)
}

fn span_rank(mats: &[&CMatrix], tol: f64) -> usize {
    let mut ortho: Vec<CMatrix> = Vec::new();
    for m in mats {
        let mut resid: CMatrix = (*m).clone();
        for q in &ortho {
            let ip = (q.adjoint() * &resid).trace();
            resid -= q.map(|e| e * ip);
        }
        if resid.norm() > tol * m.norm().max(1.0) {
            let n = resid.norm();
            ortho.push(resid.map(|e| e / n));
        }
    }
    ortho.len()
}

fn restrict_levels(u: &BipartiteOp, levels: &[usize]) -> BipartiteOp {
    let d_b = u.d_b;
    let da = levels.len();
    let mut m = zeros(da * d_b, da * d_b);
    for (yi, &y) in levels.iter().enumerate() {
        for (xi, &x) in levels.iter().enumerate() {
            for r in 0..d_b {
                for cc in 0..d_b {
                    m[(yi * d_b + r, xi * d_b + cc)] = u.matrix[(u.idx(y, r), u.idx(x, cc))];
                }
            }
        }
    }
    BipartiteOp::new(da, d_b, m).expect("dims")
}

fn split_diag(m: &CMatrix) -> (CMatrix, CMatrix) {
    let n = m.nrows();
    let mut d = zeros(n, n);
    let mut e = m.clone();
    for i in 0..n {
        d[(i, i)] = m[(i, i)];
        e[(i, i)] = C64::new(0.0, 0.0);
    }
    (d, e)
}

fn two_by_two(m: &CMatrix, p: usize, q: usize) -> CMatrix {
    let mut b = zeros(2, 2);
    b[(0, 0)] = m[(p, p)];
    b[(0, 1)] = m[(p, q)];
    b[(1, 0)] = m[(q, p)];
    b[(1, 1)] = m[(q, q)];
    b
}

fn validate_reconstruction(u: &BipartiteOp, form: &Rank3StandardForm) -> Result<()> {
    let rec = form.reconstruct(u.d_a, u.d_b)?;
    let err = (rec.matrix - &u.matrix).norm();
    if err > 1e-7 * u.matrix.norm() {
        return Err(Error::StructureResidual { what: "rank-3 standard form reconstruction".into(), residual: err });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::fixtures;

    #[test]
    fn example1_blocks_alpha_zero() {
        // Three generic extra levels give the fully mixed part Schmidt rank 3,
        // so the analysis lands in the B-direct-sum branch.
        let u = fixtures::example1(&[0.0, 1.0], &[(0.7, 0.3), (1.1, 1.0), (0.4, 2.0)]).unwrap();
        let f = rank3_standard_form(&u).unwrap();
        match &f.form {
            Rank3Form::BDirectSum { diag_levels, blocks, .. } => {
                assert!(diag_levels.is_empty());
                assert_eq!(blocks.len(), 2);
                for b in blocks {
                    assert!(b.alpha.abs() < 1e-9, "alpha = {}", b.alpha);
                    assert!((b.t3_block[(0, 1)] - b.t3_block[(1, 0)]).norm() < 1e-9);
                    assert!(b.t3_block[(0, 1)].re > 0.0);
                    assert!(b.t3_block[(0, 1)].im.abs() < 1e-9);
                }
            }
            _ => panic!("expected B-direct-sum form"),
        }
    }

    #[test]
    fn diagonal_case_all_in_block_one() {
        // T2, T3 both diagonal: rank-3 diagonal controlled unitary with
        // enough mixed levels to exercise the B-direct-sum branch.
        let i = C64::new(0.0, 1.0);
        let diag = |v: Vec<C64>| CMatrix::from_diagonal(&nalgebra::DVector::from_vec(v));
        let one = C64::new(1.0, 0.0);
        let d2 = diag(vec![one, i, one]);
        let d3 = diag(vec![one, one, -one]);
        let mix = |a: f64, b: f64, c: f64| {
            let n = (a * a + b * b + c * c).sqrt();
            diag(vec![
                (C64::new(a, 0.0) + C64::new(b, 0.0) + C64::new(c, 0.0)) / n,
                (C64::new(a, 0.0) + i * b + C64::new(c, 0.0)) / n,
                (C64::new(a, 0.0) + C64::new(b, 0.0) - C64::new(c, 0.0)) / n,
            ])
        };
        // Unit-modulus checks fail for careless mixes; keep them honest.
        let m1 = mix(0.0, 1.0, 0.0); // = d2 normalized: still use as S1 member
        let _ = m1;
        // Simple genuinely mixed diagonal unitaries: pick random-ish phases
        // and express them in span{I, d2, d3} by construction.
        let combo = |c1: C64, c2: C64, c3: C64| {
            diag(vec![c1 + c2 + c3, c1 + c2 * i + c3, c1 + c2 - c3])
        };
        // Choose coefficients so each diagonal entry is unimodular:
        // solve small cases by hand: phases (e^{ia}, e^{ib}, e^{ic}) always lie
        // in span{I, d2, d3} since the three diagonal patterns span all
        // diagonals on 3 levels.
        let phases = |a: f64, b: f64, c: f64| {
            diag(vec![C64::from_polar(1.0, a), C64::from_polar(1.0, b), C64::from_polar(1.0, c)])
        };
        let _ = combo;
        let u = fixtures::controlled_from_a(&[
            ident(3),
            d2,
            d3,
            phases(0.3, 1.2, 2.1),
            phases(1.0, 0.1, 0.9),
            phases(2.2, 1.4, 0.4),
        ])
        .unwrap();
        assert_eq!(crate::core_linalg::operator_schmidt(&u, 1e-8).unwrap().rank(), 3);
        let f = rank3_standard_form(&u).unwrap();
        match &f.form {
            Rank3Form::BDirectSum { diag_levels, blocks, .. } => {
                assert_eq!(diag_levels.len(), 3);
                assert!(blocks.is_empty());
            }
            _ => panic!("expected diagonal B form"),
        }
    }

    #[test]
    fn example2_has_only_pair_blocks() {
        let u = fixtures::example2(0.5, &[2.5, 3.0, 4.0, 5.0, 6.5, 8.0], &[0.4, 0.7]).unwrap();
        let f = rank3_standard_form(&u).unwrap();
        match &f.form {
            Rank3Form::BDirectSum { diag_levels, blocks, .. } => {
                assert!(diag_levels.is_empty());
                assert_eq!(blocks.len(), 2);
            }
            _ => panic!("expected B-direct-sum form"),
        }
        // c1 real and nonnegative in the gauged frame; the fully mixed levels
        // (S3) keep nonzero T2 and T3 components.
        for (c1, _, _) in &f.coefficients {
            assert!(c1.im.abs() < 1e-9);
            assert!(c1.re >= -1e-12);
        }
        for &j in &f.s_partition[2] {
            let (_, c2, c3) = f.coefficients[j];
            assert!(c2.norm() > 1e-9);
            assert!(c3.norm() > 1e-9);
        }
    }

    #[test]
    fn first_form_for_three_rank_le2_pieces() {
        // S3 empty: levels use I, diag, X-type blocks only.
        let x = fixtures::pauli('x');
        let z = fixtures::pauli('z');
        let u = fixtures::controlled_from_a(&[ident(2), z.clone(), x.clone(), z]).unwrap();
        let f = rank3_standard_form(&u).unwrap();
        match &f.form {
            Rank3Form::ADirectSum { pieces } => {
                assert!(pieces.len() <= 3);
                for (_, p) in pieces {
                    assert!(crate::core_linalg::operator_schmidt(p, 1e-8).unwrap().rank() <= 2);
                }
            }
            _ => panic!("expected A-direct-sum form"),
        }
    }

    #[test]
    fn rejects_wrong_rank_or_uncontrolled() {
        assert!(matches!(
            rank3_standard_form(&fixtures::cnot()),
            Err(Error::WrongSchmidtRank { .. })
        ));
        assert!(matches!(
            rank3_standard_form(&fixtures::uketbra11()),
            Err(Error::NotControlled { .. })
        ));
    }
}
