//! Controlled-form detection up to local (complex) permutations.

use crate::core_linalg::{ident, tensor, zeros, BipartiteOp, CMatrix};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::A => write!(f, "A"),
            Side::B => write!(f, "B"),
        }
    }
}

/// One term of a controlled unitary: the projector support on the controlling
/// side and the operator applied on the controlled side. An empty support
/// marks a padding (zero-operator) term used by the extended protocol.
#[derive(Debug, Clone)]
pub struct ControlledTerm {
    pub support: Vec<usize>,
    pub op: CMatrix,
}

/// Local complex permutations realizing a gauged form:
/// `U = (post_a ⊗ post_b) · F · (pre_a ⊗ pre_b)`.
#[derive(Debug, Clone)]
pub struct LocalGauge {
    pub pre_a: CMatrix,
    pub pre_b: CMatrix,
    pub post_a: CMatrix,
    pub post_b: CMatrix,
}

impl LocalGauge {
    pub fn trivial(d_a: usize, d_b: usize) -> Self {
        LocalGauge { pre_a: ident(d_a), pre_b: ident(d_b), post_a: ident(d_a), post_b: ident(d_b) }
    }
}

/// A controlled unitary in the computational basis after local gauging:
/// `F = Σ_k P_k ⊗ V_k` (side A controlling) or `Σ_k V_k ⊗ P_k` (side B),
/// with `U = (post_a ⊗ post_b) · F · (pre_a ⊗ pre_b)`.
#[derive(Debug, Clone)]
pub struct ControlledForm {
    pub side: Side,
    pub d_a: usize,
    pub d_b: usize,
    pub terms: Vec<ControlledTerm>,
    pub gauge: LocalGauge,
}

impl ControlledForm {
    /// Number of terms including padding terms.
    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn live_terms(&self) -> usize {
        self.terms.iter().filter(|t| !t.support.is_empty()).count()
    }

    pub fn controlled_dim(&self) -> usize {
        match self.side {
            Side::A => self.d_b,
            Side::B => self.d_a,
        }
    }

    pub fn control_dim(&self) -> usize {
        match self.side {
            Side::A => self.d_a,
            Side::B => self.d_b,
        }
    }

    /// The gauged controlled matrix `F` in the original A⊗B index ordering.
    pub fn gauged_matrix(&self) -> CMatrix {
        let (dc, dt) = (self.control_dim(), self.controlled_dim());
        let mut m = zeros(dc * dt, dc * dt);
        for term in &self.terms {
            for &lvl in &term.support {
                for r in 0..dt {
                    for cc in 0..dt {
                        m[(lvl * dt + r, lvl * dt + cc)] = term.op[(r, cc)];
                    }
                }
            }
        }
        match self.side {
            Side::A => m,
            Side::B => {
                BipartiteOp::new(self.d_b, self.d_a, m).expect("dims").swap_sides().matrix
            }
        }
    }

    pub fn reconstruct(&self) -> BipartiteOp {
        let f = self.gauged_matrix();
        let post = tensor(&self.gauge.post_a, &self.gauge.post_b);
        let pre = tensor(&self.gauge.pre_a, &self.gauge.pre_b);
        BipartiteOp::new(self.d_a, self.d_b, post * f * pre).expect("dims")
    }
}

/// Detects whether `u` is a controlled unitary from `side` in the
/// computational basis up to local permutations: every big row must contain
/// exactly one nonzero block. Equal blocks are grouped into terms, ordered by
/// smallest controlling level. Detection up to general local unitaries is out
/// of scope.
pub fn detect_controlled(u: &BipartiteOp, side: Side) -> Result<Option<ControlledForm>> {
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
    let dc = w.d_a;
    // For each big column find its unique nonzero block row, if any.
    let mut row_of = vec![usize::MAX; dc];
    let mut used_row = vec![false; dc];
    for x in 0..dc {
        let mut rows = Vec::new();
        for y in 0..dc {
            if w.block_norm(y, x) > tol {
                rows.push(y);
            }
        }
        if rows.len() != 1 || used_row[rows[0]] {
            return Ok(None);
        }
        row_of[x] = rows[0];
        used_row[rows[0]] = true;
    }
    // Gauge: relabel control outputs so block x sits on the diagonal; the
    // permutation P maps |row_of[x]⟩ ↦ |x⟩ and U = (P† ⊗ I)·F.
    let mut perm = vec![0usize; dc];
    for x in 0..dc {
        perm[row_of[x]] = x;
    }
    let p = crate::core_linalg::perm_matrix(&perm);
    let blocks: Vec<CMatrix> = (0..dc).map(|x| w.block(row_of[x], x)).collect();
    for b in &blocks {
        if crate::core_linalg::unitary_deviation(b) > 1e-7 {
            return Ok(None);
        }
    }
    let mut terms: Vec<ControlledTerm> = Vec::new();
    for (lvl, b) in blocks.iter().enumerate() {
        match terms.iter_mut().find(|t| (&t.op - b).norm() <= tol) {
            Some(t) => t.support.push(lvl),
            None => terms.push(ControlledTerm { support: vec![lvl], op: b.clone() }),
        }
    }
    let mut gauge = LocalGauge::trivial(u.d_a, u.d_b);
    match side {
        Side::A => gauge.post_a = p.adjoint(),
        Side::B => gauge.post_b = p.adjoint(),
    }
    Ok(Some(ControlledForm { side, d_a: u.d_a, d_b: u.d_b, terms, gauge }))
}

/// Result of projectorizing one big row or big column of a complex
/// permutation unitary per the disjoint-support construction: the local
/// complex permutation `q` on the B factor and the term supports.
pub(crate) struct Projectorized {
    /// Positions (big-row or big-column indices) of the nonzero blocks.
    pub block_positions: Vec<usize>,
    /// Per-block within-B support of the resulting projector.
    pub supports: Vec<Vec<usize>>,
    /// The local complex permutation: left factor for big rows
    /// (`(I⊗q)·U` has projector blocks), right factor for big columns
    /// (`U·(I⊗q)`).
    pub q: CMatrix,
}

/// Projectorizes the blocks of big row `y` of a complex permutation unitary.
/// The blocks of one big row occupy pairwise disjoint input-column sets that
/// jointly cover the B basis, so a single output-side complex permutation
/// turns them all into orthogonal projectors summing to `I_B`.
pub(crate) fn projectorize_big_row(u: &BipartiteOp, y: usize) -> Option<Projectorized> {
    let tol = crate::DEFAULT_TOL;
    if !u.is_complex_permutation(tol) {
        return None;
    }
    let d_b = u.d_b;
    let mut block_positions = Vec::new();
    let mut supports = Vec::new();
    let mut q = zeros(d_b, d_b);
    let mut covered = vec![false; d_b];
    for x in 0..u.d_a {
        if u.block_norm(y, x) <= tol {
            continue;
        }
        let blk = u.block(y, x);
        let mut supp = Vec::new();
        for cc in 0..d_b {
            for r in 0..d_b {
                let z = blk[(r, cc)];
                if z.norm() > tol {
                    if covered[cc] {
                        return None; // overlapping supports: not a complex permutation
                    }
                    covered[cc] = true;
                    supp.push(cc);
                    // q maps output row r back to input column cc, undoing the phase.
                    q[(cc, r)] = z.conj();
                }
            }
        }
        if !supp.is_empty() {
            block_positions.push(x);
            supports.push(supp);
        }
    }
    if !covered.iter().all(|&v| v) {
        return None;
    }
    Some(Projectorized { block_positions, supports, q })
}

/// Projectorizes the blocks of big column `x`; mirrored construction with an
/// input-side complex permutation.
pub(crate) fn projectorize_big_column(u: &BipartiteOp, x: usize) -> Option<Projectorized> {
    let tol = crate::DEFAULT_TOL;
    if !u.is_complex_permutation(tol) {
        return None;
    }
    let d_b = u.d_b;
    let mut block_positions = Vec::new();
    let mut supports = Vec::new();
    let mut q = zeros(d_b, d_b);
    let mut covered = vec![false; d_b];
    for y in 0..u.d_a {
        if u.block_norm(y, x) <= tol {
            continue;
        }
        let blk = u.block(y, x);
        let mut supp = Vec::new();
        for r in 0..d_b {
            for cc in 0..d_b {
                let z = blk[(r, cc)];
                if z.norm() > tol {
                    if covered[r] {
                        return None;
                    }
                    covered[r] = true;
                    supp.push(r);
                    // q maps output row r to input column cc with the inverse phase.
                    q[(cc, r)] = z.conj();
                }
            }
        }
        if !supp.is_empty() {
            block_positions.push(y);
            supports.push(supp);
        }
    }
    if !covered.iter().all(|&v| v) {
        return None;
    }
    Some(Projectorized { block_positions, supports, q })
}

/// Builds the side-B controlled form from a projectorized big row or column:
/// after gauging, every block is diagonal over the supports, so the A-side
/// term operators can be read off entrywise.
pub(crate) fn b_controlled_from_projectorized(
    u: &BipartiteOp,
    pz: &Projectorized,
    from_row: bool,
) -> Result<Option<ControlledForm>> {
    let tol = crate::DEFAULT_TOL;
    let gauged = if from_row {
        tensor(&ident(u.d_a), &pz.q) * u.matrix.clone()
    } else {
        u.matrix.clone() * tensor(&ident(u.d_a), &pz.q)
    };
    let g = BipartiteOp::new(u.d_a, u.d_b, gauged)?;
    // Every block of g must now be diagonal with constant value on each support.
    let mut terms = Vec::new();
    for supp in &pz.supports {
        let mut v = zeros(u.d_a, u.d_a);
        for y in 0..u.d_a {
            for x in 0..u.d_a {
                let val = g.matrix[(g.idx(y, supp[0]), g.idx(x, supp[0]))];
                // consistency across the support and off-diagonal sanity
                for &b in supp {
                    if (g.matrix[(g.idx(y, b), g.idx(x, b))] - val).norm() > tol {
                        return Ok(None);
                    }
                }
                v[(y, x)] = val;
            }
        }
        if crate::core_linalg::unitary_deviation(&v) > 1e-7 {
            return Ok(None);
        }
        terms.push(ControlledTerm { support: supp.clone(), op: v });
    }
    // Check no weight outside the diagonal supports.
    let mut recon = zeros(u.dim(), u.dim());
    for t in &terms {
        for &b in &t.support {
            for y in 0..u.d_a {
                for x in 0..u.d_a {
                    recon[(g.idx(y, b), g.idx(x, b))] = t.op[(y, x)];
                }
            }
        }
    }
    if (&recon - &g.matrix).norm() > tol * g.matrix.norm().max(1.0) {
        return Ok(None);
    }
    let mut gauge = LocalGauge::trivial(u.d_a, u.d_b);
    if from_row {
        // (I⊗q)U = F  ⇒  U = (I⊗q†)·F
        gauge.post_b = pz.q.adjoint();
    } else {
        // U(I⊗q) = F  ⇒  U = F·(I⊗q†)
        gauge.pre_b = pz.q.adjoint();
    }
    terms.sort_by_key(|t| t.support[0]);
    Ok(Some(ControlledForm { side: Side::B, d_a: u.d_a, d_b: u.d_b, terms, gauge }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::fixtures;
    use crate::core_linalg::perm_matrix;

    #[test]
    fn cnot_two_terms_from_a() {
        let f = detect_controlled(&fixtures::cnot(), Side::A).unwrap().unwrap();
        assert_eq!(f.n_terms(), 2);
        assert_eq!(f.terms[0].support, vec![0]);
        assert!((f.reconstruct().matrix - fixtures::cnot().matrix).norm() < 1e-12);
    }

    #[test]
    fn swap_is_not_controlled() {
        assert!(detect_controlled(&fixtures::swap2(), Side::A).unwrap().is_none());
        assert!(detect_controlled(&fixtures::swap2(), Side::B).unwrap().is_none());
    }

    #[test]
    fn m_family_r3_has_four_terms() {
        let u = fixtures::m_family(3).unwrap();
        let f = detect_controlled(&u, Side::A).unwrap().unwrap();
        assert_eq!(f.n_terms(), 4);
        assert!((f.reconstruct().matrix - u.matrix).norm() < 1e-12);
    }

    #[test]
    fn off_diagonal_controlled_detected_up_to_permutation() {
        let base = fixtures::cnot();
        let x = perm_matrix(&[1, 0]);
        let m = tensor(&x, &ident(2)) * base.matrix.clone();
        let u = BipartiteOp::new(2, 2, m).unwrap();
        let f = detect_controlled(&u, Side::A).unwrap().unwrap();
        assert_eq!(f.n_terms(), 2);
        assert!((f.reconstruct().matrix - u.matrix).norm() < 1e-12);
    }

    #[test]
    fn projectorized_big_row_gives_b_controlled_form() {
        // CNOT seen from the B side: big row of the swapped operator carries
        // two blocks with disjoint supports.
        let u = fixtures::cnot().swap_sides();
        let pz = projectorize_big_row(&u, 0).unwrap();
        assert_eq!(pz.block_positions.len(), 2);
        let f = b_controlled_from_projectorized(&u, &pz, true).unwrap().unwrap();
        assert_eq!(f.n_terms(), 2);
        assert!((f.reconstruct().matrix - u.matrix).norm() < 1e-12);
    }

    #[test]
    fn b_side_detection() {
        let u = fixtures::uketbra11();
        assert!(detect_controlled(&u, Side::A).unwrap().is_none());
        // Restriction to A-levels {1,2} is controlled from B.
        let comps = crate::structure::direct_sum_decompose(&u, Side::A).unwrap();
        let rest = &comps[1].1;
        let f = detect_controlled(rest, Side::B).unwrap().unwrap();
        assert_eq!(f.n_terms(), 2);
        assert!((f.reconstruct().matrix - rest.matrix.clone()).norm() < 1e-12);
    }
}
