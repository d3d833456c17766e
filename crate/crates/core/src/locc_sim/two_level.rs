//! Two-level controlled protocols: a higher level of control on the A side
//! selecting lower-level controlled unitaries, with the lower level either
//! uniformly controlled from the B side or mixing control directions (the
//! latter pays double classical communication for dummy messages).

use super::trace::ProtocolTrace;
use super::vm::{run_verification, shift_pow, Basis, Mode, Party, RegId, RegInit, Role, Sim, SimResult};
use crate::core_linalg::{ident, operator_schmidt, tensor, zeros, BipartiteOp, CMatrix, C64};
use crate::error::{Error, Result};
use crate::structure::{detect_controlled, ControlledForm, Side};

/// Lower-level structure of one higher-level term.
#[derive(Debug, Clone)]
pub enum LowerForm {
    /// A product operator: each party applies its factor locally.
    Product { a_op: CMatrix, b_op: CMatrix },
    /// Controlled from the B side: `S = Σ_j U_j ⊗ Q_j` with projectors on B
    /// and unitaries on the term's A-subspace (stored as a side-B controlled
    /// form on that subspace).
    BControlled(ControlledForm),
    /// Controlled from the A side within the term's subspace:
    /// `S = Σ_j R_j ⊗ V_j`.
    AControlled(ControlledForm),
}

impl LowerForm {
    fn n_terms(&self) -> usize {
        match self {
            LowerForm::Product { .. } => 1,
            LowerForm::BControlled(f) | LowerForm::AControlled(f) => f.n_terms(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwoLevelTerm {
    /// A-basis levels of this higher-level block (disjoint across terms).
    pub a_levels: Vec<usize>,
    pub lower: LowerForm,
}

#[derive(Debug, Clone)]
pub struct TwoLevelDecomposition {
    pub d_a: usize,
    pub d_b: usize,
    pub terms: Vec<TwoLevelTerm>,
}

impl TwoLevelDecomposition {
    pub fn m_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn max_lower_terms(&self) -> usize {
        self.terms.iter().map(|t| t.lower.n_terms()).max().unwrap_or(1)
    }

    pub fn has_a_controlled(&self) -> bool {
        self.terms.iter().any(|t| matches!(t.lower, LowerForm::AControlled(_)))
    }

    /// Rebuilds the full operator.
    pub fn reconstruct(&self) -> Result<BipartiteOp> {
        let d = self.d_a * self.d_b;
        let mut m = zeros(d, d);
        for term in &self.terms {
            let piece = match &term.lower {
                LowerForm::Product { a_op, b_op } => tensor(a_op, b_op),
                LowerForm::BControlled(f) | LowerForm::AControlled(f) => f.reconstruct().matrix,
            };
            for (yi, &y) in term.a_levels.iter().enumerate() {
                for (xi, &x) in term.a_levels.iter().enumerate() {
                    for r in 0..self.d_b {
                        for cc in 0..self.d_b {
                            m[(y * self.d_b + r, x * self.d_b + cc)] =
                                piece[(yi * self.d_b + r, xi * self.d_b + cc)];
                        }
                    }
                }
            }
        }
        BipartiteOp::new(self.d_a, self.d_b, m)
    }
}

/// Derives a two-level decomposition from the A-direct-sum components of `u`,
/// classifying each component as a product, a B-controlled form, or an
/// A-controlled form (in that order of preference).
pub fn decompose_two_level(u: &BipartiteOp) -> Result<TwoLevelDecomposition> {
    let comps = crate::structure::direct_sum_decompose(u, Side::A)?;
    if comps.len() < 2 {
        return Err(Error::Classification(
            "operator has a single A-direct-sum component; no two-level structure".into(),
        ));
    }
    let mut terms = Vec::new();
    for (levels, piece) in comps {
        terms.push(TwoLevelTerm { a_levels: levels, lower: lower_form_of(&piece)? });
    }
    Ok(TwoLevelDecomposition { d_a: u.d_a, d_b: u.d_b, terms })
}

/// Two-level decomposition from the pieces of a rank-3 first standard form.
pub fn decompose_from_pieces(
    u: &BipartiteOp,
    pieces: &[(Vec<usize>, BipartiteOp)],
) -> Result<TwoLevelDecomposition> {
    let mut terms = Vec::new();
    for (levels, piece) in pieces {
        terms.push(TwoLevelTerm { a_levels: levels.clone(), lower: lower_form_of(piece)? });
    }
    let d = TwoLevelDecomposition { d_a: u.d_a, d_b: u.d_b, terms };
    let rec = d.reconstruct()?;
    if (rec.matrix - &u.matrix).norm() > 1e-9 * u.matrix.norm() {
        return Err(Error::StructureResidual {
            what: "two-level decomposition reconstruction".into(),
            residual: (d.reconstruct()?.matrix - &u.matrix).norm(),
        });
    }
    Ok(d)
}

/// Classifies a Schmidt-rank ≤ 2 piece into a lower form. Rank-2 pieces must
/// be controlled in the computational basis from their own A side (they are
/// restrictions of a block-diagonal operator); the two-term structure comes
/// out either by grouping proportional blocks (A side) or by simultaneous
/// diagonalization with a two-valued spectrum pattern (B side).
pub fn lower_form_of(piece: &BipartiteOp) -> Result<LowerForm> {
    let tol = crate::DEFAULT_TOL;
    let sd = operator_schmidt(piece, tol)?;
    if sd.rank() == 1 {
        let da = piece.d_a;
        let a_op = sd.a_ops[0].map(|z| z * C64::new((da as f64).sqrt(), 0.0));
        if crate::core_linalg::unitary_deviation(&a_op) > 1e-7 {
            return Err(Error::StructureResidual {
                what: "product piece with non-unitary factor".into(),
                residual: crate::core_linalg::unitary_deviation(&a_op),
            });
        }
        let b_op = sd.b_ops[0].map(|z| z * C64::new(sd.coefficients[0] / (da as f64).sqrt(), 0.0));
        if crate::core_linalg::unitary_deviation(&b_op) > 1e-7 {
            return Err(Error::StructureResidual {
                what: "product piece with non-unitary factor".into(),
                residual: crate::core_linalg::unitary_deviation(&b_op),
            });
        }
        return Ok(LowerForm::Product { a_op, b_op });
    }
    if sd.rank() > 2 {
        return Err(Error::WrongSchmidtRank { expected: 2, found: sd.rank() });
    }
    // B-side detection first: covers permutation-style pieces directly.
    if let Some(f) = detect_controlled(piece, Side::B)? {
        return Ok(LowerForm::BControlled(f));
    }
    // The piece is controlled from its own A side in the computational basis.
    let scale = piece.matrix.norm().max(1.0);
    for y in 0..piece.d_a {
        for x in 0..piece.d_a {
            if y != x && piece.block_norm(y, x) > tol * scale {
                return Err(Error::NotControlled { side: "A (within the piece)" });
            }
        }
    }
    let blocks: Vec<CMatrix> = (0..piece.d_a).map(|j| piece.block(j, j)).collect();
    // Prefer a B-side spectral form (commuting blocks with a two-valued
    // column pattern) so the uniform-side protocol applies; fall back to
    // grouping proportional blocks on the A side.
    match b_spectral_form(piece, &blocks, tol) {
        Ok(f) => return Ok(LowerForm::BControlled(f)),
        Err(_) => {}
    }
    if let Some((classes, reps, phases)) = proportionality_classes(&blocks, tol) {
        if classes.iter().max().copied().unwrap_or(0) < 2 {
            let mut d_gauge = zeros(piece.d_a, piece.d_a);
            for (lvl, ph) in phases.iter().enumerate() {
                d_gauge[(lvl, lvl)] = *ph;
            }
            let terms: Vec<crate::structure::ControlledTerm> = reps
                .into_iter()
                .enumerate()
                .map(|(ci, op)| crate::structure::ControlledTerm {
                    support: (0..piece.d_a).filter(|&l| classes[l] == ci).collect(),
                    op,
                })
                .collect();
            let mut gauge = crate::structure::LocalGauge::trivial(piece.d_a, piece.d_b);
            gauge.post_a = d_gauge;
            let f = ControlledForm { side: Side::A, d_a: piece.d_a, d_b: piece.d_b, terms, gauge };
            let err = (f.reconstruct().matrix - &piece.matrix).norm();
            if err <= 1e-9 * scale {
                return Ok(LowerForm::AControlled(f));
            }
        }
    }
    Err(Error::Classification(
        "rank-2 piece admits neither a two-valued common eigenbasis nor a 2-term A grouping".into(),
    ))
}

/// Simultaneous diagonalization of the piece's diagonal blocks with a
/// two-class column pattern, yielding a side-B two-term form.
fn b_spectral_form(piece: &BipartiteOp, blocks: &[CMatrix], tol: f64) -> Result<ControlledForm> {
    let scale = piece.matrix.norm().max(1.0);
    let _ = tol;
    let q = crate::core_linalg::simultaneous_unitary_eigenbasis(blocks).map_err(|_| {
        Error::Classification("blocks do not commute".into())
    })?;
    let diags: Vec<Vec<C64>> = blocks
        .iter()
        .map(|b| {
            let d = q.adjoint() * b * &q;
            (0..piece.d_b).map(|i| d[(i, i)]).collect()
        })
        .collect();
    // Group B levels by their column of eigenvalues across A levels.
    let mut supports: Vec<Vec<usize>> = Vec::new();
    let mut cols: Vec<Vec<C64>> = Vec::new();
    for beta in 0..piece.d_b {
        let col: Vec<C64> = diags.iter().map(|d| d[beta]).collect();
        match cols.iter().position(|c| c.iter().zip(&col).all(|(x, y)| (x - y).norm() <= 1e-7)) {
            Some(i) => supports[i].push(beta),
            None => {
                cols.push(col);
                supports.push(vec![beta]);
            }
        }
    }
    if cols.len() != 2 {
        return Err(Error::Classification(format!(
            "rank-2 piece splits into {} spectral classes on the B side (expected 2)",
            cols.len()
        )));
    }
    let terms: Vec<crate::structure::ControlledTerm> = supports
        .iter()
        .zip(cols.iter())
        .map(|(supp, col)| {
            let mut v = zeros(piece.d_a, piece.d_a);
            for (j, z) in col.iter().enumerate() {
                v[(j, j)] = *z;
            }
            crate::structure::ControlledTerm { support: supp.clone(), op: v }
        })
        .collect();
    let mut gauge = crate::structure::LocalGauge::trivial(piece.d_a, piece.d_b);
    gauge.post_b = q.clone();
    gauge.pre_b = q.adjoint();
    let f = ControlledForm { side: Side::B, d_a: piece.d_a, d_b: piece.d_b, terms, gauge };
    let err = (f.reconstruct().matrix - &piece.matrix).norm();
    if err > 1e-9 * scale {
        return Err(Error::StructureResidual {
            what: "rank-2 piece B-side spectral form".into(),
            residual: err,
        });
    }
    Ok(f)
}

fn proportionality_classes(
    blocks: &[CMatrix],
    tol: f64,
) -> Option<(Vec<usize>, Vec<CMatrix>, Vec<C64>)> {
    let mut reps: Vec<CMatrix> = Vec::new();
    let mut classes = vec![usize::MAX; blocks.len()];
    let mut phases = vec![C64::new(1.0, 0.0); blocks.len()];
    for (lvl, op) in blocks.iter().enumerate() {
        let mut assigned = false;
        for (ci, rep) in reps.iter().enumerate() {
            let ip = (rep.adjoint() * op).trace();
            let phase = ip / C64::new(rep.norm_squared(), 0.0);
            if phase.norm() > 0.5 && (op - rep.map(|e| e * phase)).norm() <= tol * op.norm().max(1.0) {
                classes[lvl] = ci;
                phases[lvl] = phase;
                assigned = true;
                break;
            }
        }
        if !assigned {
            classes[lvl] = reps.len();
            reps.push(op.clone());
        }
    }
    if reps.len() == 2 {
        Some((classes, reps, phases))
    } else {
        None
    }
}

/// Runs the two-level protocol. With `mixed_sides` false every lower form
/// must be B-controlled or product (ledger `log2 MN` ebits, `2 log2 MN`
/// c-bits); with it true, mixed control directions are handled with dummy
/// messages (`log2 MN` ebits, `2 log2 MN²` c-bits).
pub fn run_two_level(
    u: &BipartiteOp,
    decomp: &TwoLevelDecomposition,
    mixed_sides: bool,
    mode: Mode,
) -> Result<ProtocolTrace> {
    let rec = decomp.reconstruct()?;
    if (rec.matrix - &u.matrix).norm() > 1e-9 * u.matrix.norm() {
        return Err(Error::BadInput("decomposition does not reconstruct the operator".into()));
    }
    if !mixed_sides && decomp.has_a_controlled() {
        return Err(Error::BadInput(
            "decomposition has lower-level control from the A side; run with mixed_sides".into(),
        ));
    }
    // Supports partition the A basis.
    let mut seen = vec![false; u.d_a];
    for t in &decomp.terms {
        for &lvl in &t.a_levels {
            if seen[lvl] {
                return Err(Error::BadInput(format!("A level {lvl} in two higher-level terms")));
            }
            seen[lvl] = true;
        }
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::BadInput("higher-level supports do not cover the A basis".into()));
    }

    let decomp = decomp.clone();
    let out = run_verification(u.d_a, u.d_b, mode, move |sim, a, b| {
        if mixed_sides {
            run_ptl1b(sim, &decomp, a, b)
        } else {
            run_ptl1(sim, &decomp, a, b)
        }
    })?;
    Ok(ProtocolTrace::new(if mixed_sides { "ptl1b" } else { "ptl1" }, out))
}

/// Canonical per-term data for the runners: every term becomes an effective
/// controlled structure with padded identity operators, plus optional local
/// product factors.
struct TermPlan {
    a_levels: Vec<usize>,
    /// B-side projector supports (empty list ⇒ this term is A-controlled).
    b_projs: Vec<Vec<usize>>,
    /// Per-j unitaries on the A subspace for B-controlled terms.
    d_ops: Vec<CMatrix>,
    /// A-side projector supports (within the term subspace) for A-controlled
    /// terms.
    a_projs: Vec<Vec<usize>>,
    /// Per-j unitaries on B for A-controlled terms.
    b_ops: Vec<CMatrix>,
    /// Local factors applied controlled-by-k: (A-part on the subspace, B).
    product_a: Option<CMatrix>,
    product_b: Option<CMatrix>,
    /// Term gauges: pre/post on the A subspace and on B.
    pre_a: CMatrix,
    post_a: CMatrix,
    pre_b: CMatrix,
    post_b: CMatrix,
    b_controlled: bool,
}

fn plan_terms(decomp: &TwoLevelDecomposition) -> Result<Vec<TermPlan>> {
    let d_b = decomp.d_b;
    let mut plans = Vec::new();
    for term in &decomp.terms {
        let da_sub = term.a_levels.len();
        let triv_a = ident(da_sub);
        let triv_b = ident(d_b);
        let plan = match &term.lower {
            LowerForm::Product { a_op, b_op } => TermPlan {
                a_levels: term.a_levels.clone(),
                b_projs: vec![(0..d_b).collect()],
                d_ops: vec![ident(da_sub)],
                a_projs: vec![],
                b_ops: vec![],
                product_a: Some(a_op.clone()),
                product_b: Some(b_op.clone()),
                pre_a: triv_a.clone(),
                post_a: triv_a,
                pre_b: triv_b.clone(),
                post_b: triv_b,
                b_controlled: true,
            },
            LowerForm::BControlled(f) => {
                if f.side != Side::B {
                    return Err(Error::BadInput("BControlled lower form must be side B".into()));
                }
                TermPlan {
                    a_levels: term.a_levels.clone(),
                    b_projs: f.terms.iter().map(|t| t.support.clone()).collect(),
                    d_ops: f.terms.iter().map(|t| t.op.clone()).collect(),
                    a_projs: vec![],
                    b_ops: vec![],
                    product_a: None,
                    product_b: None,
                    pre_a: f.gauge.pre_a.clone(),
                    post_a: f.gauge.post_a.clone(),
                    pre_b: f.gauge.pre_b.clone(),
                    post_b: f.gauge.post_b.clone(),
                    b_controlled: true,
                }
            }
            LowerForm::AControlled(f) => {
                if f.side != Side::A {
                    return Err(Error::BadInput("AControlled lower form must be side A".into()));
                }
                TermPlan {
                    a_levels: term.a_levels.clone(),
                    b_projs: vec![],
                    d_ops: vec![],
                    a_projs: f.terms.iter().map(|t| t.support.clone()).collect(),
                    b_ops: f.terms.iter().map(|t| t.op.clone()).collect(),
                    product_a: None,
                    product_b: None,
                    pre_a: f.gauge.pre_a.clone(),
                    post_a: f.gauge.post_a.clone(),
                    pre_b: f.gauge.pre_b.clone(),
                    post_b: f.gauge.post_b.clone(),
                    b_controlled: false,
                }
            }
        };
        plans.push(plan);
    }
    Ok(plans)
}

/// Embeds `op` (on the subspace spanned by `levels`) into the full A space,
/// acting as the identity elsewhere.
fn embed_a(d_a: usize, levels: &[usize], op: &CMatrix) -> CMatrix {
    let mut m = ident(d_a);
    for (yi, &y) in levels.iter().enumerate() {
        for (xi, &x) in levels.iter().enumerate() {
            m[(y, x)] = op[(yi, xi)];
        }
    }
    m
}

/// Projector onto `levels` within the term subspace, embedded in full A.
fn embed_proj(_d_a: usize, term_levels: &[usize], sub_levels: &[usize]) -> Vec<usize> {
    sub_levels.iter().map(|&i| term_levels[i]).collect()
}

/// The higher-level opening moves shared by both runners: share the rank-M
/// pair, imprint k on it, and hand Bob his copy.
fn higher_open(
    sim: &mut Sim,
    plans: &[TermPlan],
    d_a: usize,
    a: RegId,
    m_terms: usize,
) -> SimResult<(RegId, RegId)> {
    let (ra, rb) = sim.share_pair("hi_a", "hi_b", m_terms)?;
    let mut g1 = zeros(d_a * m_terms, d_a * m_terms);
    for (k, plan) in plans.iter().enumerate() {
        let xk = shift_pow(m_terms, -(k as i64));
        for &lvl in &plan.a_levels {
            for r in 0..m_terms {
                for cc in 0..m_terms {
                    g1[(lvl * m_terms + r, lvl * m_terms + cc)] = xk[(r, cc)];
                }
            }
        }
    }
    sim.apply(Party::Alice, &[a, ra], &g1, "ctrl-X^{-k}")?;
    let l = sim.measure_and_send(ra, Basis::Computational)? as i64;
    sim.apply(Party::Bob, &[rb], &shift_pow(m_terms, -l), "X^{-l}")?;
    Ok((ra, rb))
}

/// Applies per-term gauges controlled by the higher-level state: A-side
/// gauges embed into the supports; B-side gauges are controlled by Bob's
/// copy of k.
fn apply_term_gauges(
    sim: &mut Sim,
    plans: &[TermPlan],
    d_a: usize,
    d_b: usize,
    a: RegId,
    b: RegId,
    bk: RegId,
    pre: bool,
) -> SimResult<()> {
    let m_terms = plans.len();
    let mut ga = zeros(d_a, d_a);
    for plan in plans {
        let op = if pre { &plan.pre_a } else { &plan.post_a };
        let e = embed_a(d_a, &plan.a_levels, op);
        for &y in &plan.a_levels {
            for &x in &plan.a_levels {
                ga[(y, x)] = e[(y, x)];
            }
        }
    }
    sim.apply(Party::Alice, &[a], &ga, if pre { "pre_A(k)" } else { "post_A(k)" })?;
    let mut gb = zeros(m_terms * d_b, m_terms * d_b);
    for (k, plan) in plans.iter().enumerate() {
        let op = if pre { &plan.pre_b } else { &plan.post_b };
        for r in 0..d_b {
            for cc in 0..d_b {
                gb[(k * d_b + r, k * d_b + cc)] = op[(r, cc)];
            }
        }
    }
    sim.apply(Party::Bob, &[bk, b], &gb, if pre { "pre_B(k)" } else { "post_B(k)" })?;
    Ok(())
}

fn higher_close(
    sim: &mut Sim,
    plans: &[TermPlan],
    d_a: usize,
    a: RegId,
    rb: RegId,
    m_terms: usize,
) -> SimResult<()> {
    let m = sim.measure_and_send(rb, Basis::Fourier)?;
    let mut z = zeros(d_a, d_a);
    for (k, plan) in plans.iter().enumerate() {
        let phase = C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (k * m) as f64 / m_terms as f64);
        for &lvl in &plan.a_levels {
            z[(lvl, lvl)] = phase;
        }
    }
    sim.apply(Party::Alice, &[a], &z, "Z^{-m}")?;
    Ok(())
}

fn run_ptl1(sim: &mut Sim, decomp: &TwoLevelDecomposition, a: RegId, b: RegId) -> SimResult<Vec<RegId>> {
    let plans = plan_terms(decomp)?;
    let (d_a, d_b) = (decomp.d_a, decomp.d_b);
    let m_terms = plans.len();
    let n = decomp.max_lower_terms();

    let (_ra, rb) = higher_open(sim, &plans, d_a, a, m_terms)?;
    apply_term_gauges(sim, &plans, d_a, d_b, a, b, rb, true)?;

    // Lower level with a shared rank-N pair.
    let (q, r) = sim.share_pair("lo_q", "lo_r", n)?;
    // Bob: per-k controlled-X over his B projectors.
    let mut gb = zeros(m_terms * d_b * n, m_terms * d_b * n);
    for (k, plan) in plans.iter().enumerate() {
        // block for k: Σ_j Q_j ⊗ X^{-j} on (B, r)
        let mut blk = zeros(d_b * n, d_b * n);
        for (j, supp) in plan.b_projs.iter().enumerate() {
            let xj = shift_pow(n, -(j as i64));
            for &beta in supp {
                for rr in 0..n {
                    for cc in 0..n {
                        blk[(beta * n + rr, beta * n + cc)] = xj[(rr, cc)];
                    }
                }
            }
        }
        for rr in 0..d_b * n {
            for cc in 0..d_b * n {
                gb[(k * d_b * n + rr, k * d_b * n + cc)] = blk[(rr, cc)];
            }
        }
    }
    sim.apply(Party::Bob, &[rb, b, r], &gb, "ctrl_k(Q_j ⊗ X^{-j})")?;
    let l2 = sim.measure_and_send(r, Basis::Computational)? as i64;

    // Alice: shift, per-(k, j) unitaries on her subspaces, Fourier measure.
    sim.apply(Party::Alice, &[q], &shift_pow(n, -l2), "X^{-l2}")?;
    let mut ga = zeros(d_a * n, d_a * n);
    // identity on levels not covered below (there are none: plans cover A)
    for plan in plans.iter() {
        for j in 0..n {
            let op = plan.d_ops.get(j).cloned().unwrap_or_else(|| ident(plan.a_levels.len()));
            let e = embed_a(d_a, &plan.a_levels, &op);
            for &y in &plan.a_levels {
                for &x in &plan.a_levels {
                    ga[(y * n + j, x * n + j)] = e[(y, x)];
                }
            }
        }
    }
    sim.apply(Party::Alice, &[a, q], &ga, "ctrl_j(U_kj)")?;
    // Product A factors fold into the same structure (j-independent).
    let mut prod_a = ident(d_a);
    let mut have_prod_a = false;
    for plan in plans.iter() {
        if let Some(ap) = &plan.product_a {
            let e = embed_a(d_a, &plan.a_levels, ap);
            for &y in &plan.a_levels {
                for &x in &plan.a_levels {
                    prod_a[(y, x)] = e[(y, x)];
                    if y != x || (e[(y, x)] - C64::new(1.0, 0.0)).norm() > 1e-15 {
                        have_prod_a = true;
                    }
                }
            }
        }
    }
    if have_prod_a {
        sim.apply(Party::Alice, &[a], &prod_a, "product_A(k)")?;
    }
    let m2 = sim.measure_and_send(q, Basis::Fourier)?;

    // Bob: Z corrections and product B factors, all controlled by k.
    let mut gz = zeros(m_terms * d_b, m_terms * d_b);
    for (k, plan) in plans.iter().enumerate() {
        let mut blk = zeros(d_b, d_b);
        for (j, supp) in plan.b_projs.iter().enumerate() {
            let phase = C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * m2) as f64 / n as f64);
            for &beta in supp {
                blk[(beta, beta)] = phase;
            }
        }
        let full = match &plan.product_b {
            Some(bp) => bp * blk,
            None => blk,
        };
        for rr in 0..d_b {
            for cc in 0..d_b {
                gz[(k * d_b + rr, k * d_b + cc)] = full[(rr, cc)];
            }
        }
    }
    sim.apply(Party::Bob, &[rb, b], &gz, "ctrl_k(Z^{-m2}·B_k)")?;

    apply_term_gauges(sim, &plans, d_a, d_b, a, b, rb, false)?;
    higher_close(sim, &plans, d_a, a, rb, m_terms)?;
    Ok(vec![a, b])
}

fn run_ptl1b(sim: &mut Sim, decomp: &TwoLevelDecomposition, a: RegId, b: RegId) -> SimResult<Vec<RegId>> {
    let plans = plan_terms(decomp)?;
    let (d_a, d_b) = (decomp.d_a, decomp.d_b);
    let m_terms = plans.len();
    let n = decomp.max_lower_terms();

    let (_ra, rb) = higher_open(sim, &plans, d_a, a, m_terms)?;
    apply_term_gauges(sim, &plans, d_a, d_b, a, b, rb, true)?;

    let (q, r) = sim.share_pair("lo_q", "lo_r", n)?;
    let da1 = sim.add_register(Party::Alice, Role::Ancilla, "da1", n, RegInit::Uniform)?;
    let da2 = sim.add_register(Party::Alice, Role::Ancilla, "da2", n, RegInit::Uniform)?;
    let db1 = sim.add_register(Party::Bob, Role::Ancilla, "db1", n, RegInit::Uniform)?;
    let db2 = sim.add_register(Party::Bob, Role::Ancilla, "db2", n, RegInit::Uniform)?;
    sim.expect_final_uniform(q);
    sim.expect_final_uniform(r);

    let swap_n = swap_matrix(n);

    // ---- Stage 1: both parties extract their lower-level control info.
    // Bob: for B-controlled k, imprint j on r and route r into db1.
    let mut g_b1 = zeros(m_terms * d_b * n, m_terms * d_b * n);
    for (k, plan) in plans.iter().enumerate() {
        let mut blk = zeros(d_b * n, d_b * n);
        if plan.b_controlled {
            for (j, supp) in plan.b_projs.iter().enumerate() {
                let xj = shift_pow(n, -(j as i64));
                for &beta in supp {
                    for rr in 0..n {
                        for cc in 0..n {
                            blk[(beta * n + rr, beta * n + cc)] = xj[(rr, cc)];
                        }
                    }
                }
            }
        } else {
            for i in 0..d_b * n {
                blk[(i, i)] = C64::new(1.0, 0.0);
            }
        }
        for rr in 0..d_b * n {
            for cc in 0..d_b * n {
                g_b1[(k * d_b * n + rr, k * d_b * n + cc)] = blk[(rr, cc)];
            }
        }
    }
    sim.apply(Party::Bob, &[rb, b, r], &g_b1, "B-ctrlX(k)")?;
    let cswap_b = controlled_swap(m_terms, n, |k| plans[k].b_controlled, &swap_n);
    sim.apply(Party::Bob, &[rb, r, db1], &cswap_b, "cswap(r,db1)")?;
    let l_b1 = sim.measure_and_send(db1, Basis::Computational)? as i64;

    // Alice: for A-controlled k, imprint j on q and route q into da1.
    let mut g_a1 = zeros(d_a * n, d_a * n);
    for i in 0..d_a * n {
        g_a1[(i, i)] = C64::new(1.0, 0.0);
    }
    for plan in plans.iter() {
        if !plan.b_controlled {
            for (j, supp) in plan.a_projs.iter().enumerate() {
                let xj = shift_pow(n, -(j as i64));
                let full = embed_proj(d_a, &plan.a_levels, supp);
                for &lvl in &full {
                    for rr in 0..n {
                        for cc in 0..n {
                            g_a1[(lvl * n + rr, lvl * n + cc)] = xj[(rr, cc)];
                        }
                    }
                }
            }
        }
    }
    sim.apply(Party::Alice, &[a, q], &g_a1, "A-ctrlX(k)")?;
    let cswap_a = controlled_swap_a(&plans, d_a, n, &swap_n);
    sim.apply(Party::Alice, &[a, q, da1], &cswap_a, "cswap(q,da1)")?;
    let l_a1 = sim.measure_and_send(da1, Basis::Computational)? as i64;

    // ---- Stage 2.
    // Alice: shift by Bob's message, apply U_kj, Fourier, route into da2.
    sim.apply(Party::Alice, &[q], &shift_pow(n, -l_b1), "X^{-l_b1}")?;
    let mut g_a2 = zeros(d_a * n, d_a * n);
    for i in 0..d_a * n {
        g_a2[(i, i)] = C64::new(1.0, 0.0);
    }
    for plan in plans.iter() {
        if plan.b_controlled {
            for j in 0..n {
                let op = plan.d_ops.get(j).cloned().unwrap_or_else(|| ident(plan.a_levels.len()));
                let e = embed_a(d_a, &plan.a_levels, &op);
                for &y in &plan.a_levels {
                    for &x in &plan.a_levels {
                        g_a2[(y * n + j, x * n + j)] = e[(y, x)];
                    }
                }
            }
        }
    }
    sim.apply(Party::Alice, &[a, q], &g_a2, "ctrl_j(U_kj)")?;
    // Controlled Fourier on q for B-controlled k.
    let f_n = super::vm::fourier(n);
    let cf_a = controlled_single(&plans, d_a, n, &f_n, true)?;
    sim.apply(Party::Alice, &[a, q], &cf_a, "ctrl-F(q)")?;
    let cswap_a2 = controlled_swap_a_flag(&plans, d_a, n, &swap_n, true);
    sim.apply(Party::Alice, &[a, q, da2], &cswap_a2, "cswap(q,da2)")?;
    let m_a2 = sim.measure_and_send(da2, Basis::Computational)?;

    // Bob: mirrored for A-controlled k.
    sim.apply(Party::Bob, &[r], &shift_pow(n, -l_a1), "X^{-l_a1}")?;
    let mut g_b2 = zeros(m_terms * n * d_b, m_terms * n * d_b);
    for (k, plan) in plans.iter().enumerate() {
        let mut blk = zeros(n * d_b, n * d_b);
        if !plan.b_controlled {
            for j in 0..n {
                let op = plan.b_ops.get(j).cloned().unwrap_or_else(|| ident(d_b));
                for rr in 0..d_b {
                    for cc in 0..d_b {
                        blk[(j * d_b + rr, j * d_b + cc)] = op[(rr, cc)];
                    }
                }
            }
        } else {
            for i in 0..n * d_b {
                blk[(i, i)] = C64::new(1.0, 0.0);
            }
        }
        for rr in 0..n * d_b {
            for cc in 0..n * d_b {
                g_b2[(k * n * d_b + rr, k * n * d_b + cc)] = blk[(rr, cc)];
            }
        }
    }
    sim.apply(Party::Bob, &[rb, r, b], &g_b2, "ctrl_j(V_kj)")?;
    let cf_b = controlled_single_b(&plans, m_terms, n, &f_n, false)?;
    sim.apply(Party::Bob, &[rb, r], &cf_b, "ctrl-F(r)")?;
    let cswap_b2 = controlled_swap(m_terms, n, |k| !plans[k].b_controlled, &swap_n);
    sim.apply(Party::Bob, &[rb, r, db2], &cswap_b2, "cswap(r,db2)")?;
    let m_b2 = sim.measure_and_send(db2, Basis::Computational)?;

    // ---- Corrections and product factors.
    // Alice: Z^{-m_b2} over A-controlled supports, plus product A factors.
    let mut corr_a = ident(d_a);
    for plan in plans.iter() {
        if !plan.b_controlled {
            for (j, supp) in plan.a_projs.iter().enumerate() {
                let phase = C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * m_b2) as f64 / n as f64);
                for lvl in embed_proj(d_a, &plan.a_levels, supp) {
                    corr_a[(lvl, lvl)] = phase;
                }
            }
        }
        if let Some(ap) = &plan.product_a {
            let e = embed_a(d_a, &plan.a_levels, ap);
            for &y in &plan.a_levels {
                for &x in &plan.a_levels {
                    corr_a[(y, x)] = e[(y, x)];
                }
            }
        }
    }
    sim.apply(Party::Alice, &[a], &corr_a, "Z^{-m_b2}·A_k")?;
    // Bob: Z^{-m_a2} over B-controlled supports plus product B factors.
    let mut gz = zeros(m_terms * d_b, m_terms * d_b);
    for (k, plan) in plans.iter().enumerate() {
        let mut blk = ident(d_b);
        if plan.b_controlled {
            for (j, supp) in plan.b_projs.iter().enumerate() {
                let phase = C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * m_a2) as f64 / n as f64);
                for &beta in supp {
                    blk[(beta, beta)] = phase;
                }
            }
        }
        if let Some(bp) = &plan.product_b {
            blk = bp * blk;
        }
        for rr in 0..d_b {
            for cc in 0..d_b {
                gz[(k * d_b + rr, k * d_b + cc)] = blk[(rr, cc)];
            }
        }
    }
    sim.apply(Party::Bob, &[rb, b], &gz, "ctrl_k(Z^{-m_a2}·B_k)")?;

    apply_term_gauges(sim, &plans, d_a, d_b, a, b, rb, false)?;
    higher_close(sim, &plans, d_a, a, rb, m_terms)?;
    Ok(vec![a, b])
}

fn swap_matrix(n: usize) -> CMatrix {
    let mut s = zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            s[(j * n + i, i * n + j)] = C64::new(1.0, 0.0);
        }
    }
    s
}

/// Σ_k |k⟩⟨k| ⊗ (swap or identity) on (k-register, x, y).
fn controlled_swap(m_terms: usize, n: usize, pred: impl Fn(usize) -> bool, swap_n: &CMatrix) -> CMatrix {
    let blk = n * n;
    let mut g = zeros(m_terms * blk, m_terms * blk);
    for k in 0..m_terms {
        if pred(k) {
            for rr in 0..blk {
                for cc in 0..blk {
                    g[(k * blk + rr, k * blk + cc)] = swap_n[(rr, cc)];
                }
            }
        } else {
            for i in 0..blk {
                g[(k * blk + i, k * blk + i)] = C64::new(1.0, 0.0);
            }
        }
    }
    g
}

/// Swap of (q, da) controlled by the A data register's term membership:
/// active on the supports of A-controlled terms.
fn controlled_swap_a(plans: &[TermPlan], d_a: usize, n: usize, swap_n: &CMatrix) -> CMatrix {
    controlled_swap_a_flag(plans, d_a, n, swap_n, false)
}

fn controlled_swap_a_flag(
    plans: &[TermPlan],
    d_a: usize,
    n: usize,
    swap_n: &CMatrix,
    on_b_controlled: bool,
) -> CMatrix {
    let blk = n * n;
    let mut g = zeros(d_a * blk, d_a * blk);
    for i in 0..d_a * blk {
        g[(i, i)] = C64::new(1.0, 0.0);
    }
    for plan in plans {
        if plan.b_controlled == on_b_controlled {
            for &lvl in &plan.a_levels {
                for rr in 0..blk {
                    for cc in 0..blk {
                        g[(lvl * blk + rr, lvl * blk + cc)] = swap_n[(rr, cc)];
                    }
                }
            }
        }
    }
    g
}

/// F on q controlled by A-term membership.
fn controlled_single(
    plans: &[TermPlan],
    d_a: usize,
    n: usize,
    op: &CMatrix,
    on_b_controlled: bool,
) -> Result<CMatrix> {
    let mut g = zeros(d_a * n, d_a * n);
    for i in 0..d_a * n {
        g[(i, i)] = C64::new(1.0, 0.0);
    }
    for plan in plans {
        if plan.b_controlled == on_b_controlled {
            for &lvl in &plan.a_levels {
                for rr in 0..n {
                    for cc in 0..n {
                        g[(lvl * n + rr, lvl * n + cc)] = op[(rr, cc)];
                    }
                }
            }
        }
    }
    Ok(g)
}

/// F on r controlled by Bob's k register.
fn controlled_single_b(
    plans: &[TermPlan],
    m_terms: usize,
    n: usize,
    op: &CMatrix,
    on_b_controlled: bool,
) -> Result<CMatrix> {
    let mut g = zeros(m_terms * n, m_terms * n);
    for i in 0..m_terms * n {
        g[(i, i)] = C64::new(1.0, 0.0);
    }
    for (k, plan) in plans.iter().enumerate() {
        if plan.b_controlled == on_b_controlled {
            for rr in 0..n {
                for cc in 0..n {
                    g[(k * n + rr, k * n + cc)] = op[(rr, cc)];
                }
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locc_sim::trace::verify_channel;
    use crate::structure::fixtures;

    #[test]
    fn uketbra11_same_side_two_ebits() {
        let u = fixtures::uketbra11();
        let d = decompose_two_level(&u).unwrap();
        assert_eq!(d.m_terms(), 2);
        assert_eq!(d.max_lower_terms(), 2);
        assert!(!d.has_a_controlled());
        let trace = run_two_level(&u, &d, false, Mode::Enumerate).unwrap();
        assert!((trace.ledger.ebits - 2.0).abs() < 1e-12);
        assert!((trace.ledger.cbits - 4.0).abs() < 1e-12);
        let v = verify_channel(&trace, &u);
        assert!(v.pass, "distance {} anc {}", v.max_distance, v.max_ancilla_deviation);
    }

    #[test]
    fn uketbra11_mixed_machinery_pays_more_cbits() {
        let u = fixtures::uketbra11();
        let d = decompose_two_level(&u).unwrap();
        let trace = run_two_level(&u, &d, true, Mode::Enumerate).unwrap();
        assert!((trace.ledger.ebits - 2.0).abs() < 1e-12);
        assert!((trace.ledger.cbits - (2.0f64 * 8.0f64.log2())).abs() < 1e-12); // 2 log2(M N²)
        let v = verify_channel(&trace, &u);
        assert!(v.pass, "distance {} anc {}", v.max_distance, v.max_ancilla_deviation);
    }

    #[test]
    fn degenerate_single_level() {
        // M = 1: reduces to the basic controlled ledger log2(1·N).
        let u = fixtures::cnot();
        let f = crate::structure::detect_controlled(&u, Side::B);
        let _ = f;
        let d = TwoLevelDecomposition {
            d_a: 2,
            d_b: 2,
            terms: vec![TwoLevelTerm {
                a_levels: vec![0, 1],
                lower: lower_form_of(&u).unwrap(),
            }],
        };
        let trace = run_two_level(&u, &d, false, Mode::Enumerate).unwrap();
        assert!((trace.ledger.ebits - 1.0).abs() < 1e-12); // log2(1·2)
        assert!(verify_channel(&trace, &u).pass);
    }

    #[test]
    fn mixed_sides_fixture() {
        // Three grouped blocks: a B-controlled one, an A-controlled one with
        // non-commuting proportional blocks (X vs Z), and a product.
        let one = C64::new(1.0, 0.0);
        let x = fixtures::pauli('x');
        let z = fixtures::pauli('z');
        let mut m = zeros(10, 10);
        // levels 0,1: B-controlled: I ⊗ |0⟩⟨0| + X_A ⊗ |1⟩⟨1|
        m[(0, 0)] = one;
        m[(2, 2)] = one;
        m[(1, 3)] = one;
        m[(3, 1)] = one;
        // levels 2,3: blocks X, Z (non-commuting: A-side two-term grouping)
        for (lvl, blk) in [(2usize, &x), (3usize, &z)] {
            for r in 0..2 {
                for cc in 0..2 {
                    m[(lvl * 2 + r, lvl * 2 + cc)] = blk[(r, cc)];
                }
            }
        }
        // level 4: product |4⟩⟨4| ⊗ X
        m[(8, 9)] = one;
        m[(9, 8)] = one;
        let u = BipartiteOp::new(5, 2, m).unwrap();
        let pieces: Vec<(Vec<usize>, BipartiteOp)> = crate::structure::direct_sum_decompose(&u, Side::A)
            .unwrap()
            .into_iter()
            .collect();
        // group the {2} and {3} components into one A-controlled term
        let mut grouped: Vec<(Vec<usize>, BipartiteOp)> = Vec::new();
        let mut mid = zeros(4, 4);
        for (lvl, blk) in [(0usize, &x), (1usize, &z)] {
            for r in 0..2 {
                for cc in 0..2 {
                    mid[(lvl * 2 + r, lvl * 2 + cc)] = blk[(r, cc)];
                }
            }
        }
        for (levels, piece) in pieces {
            match levels.as_slice() {
                [2] => grouped.push((vec![2, 3], BipartiteOp::new(2, 2, mid.clone()).unwrap())),
                [3] => {}
                _ => grouped.push((levels, piece)),
            }
        }
        let d = decompose_from_pieces(&u, &grouped).unwrap();
        assert_eq!(d.m_terms(), 3);
        assert!(d.has_a_controlled());
        assert!(run_two_level(&u, &d, false, Mode::Enumerate).is_err());
        let trace = run_two_level(&u, &d, true, Mode::Enumerate).unwrap();
        // M = 3, N = 2: log2 6 ebits, 2 log2 12 c-bits.
        assert!((trace.ledger.ebits - 6f64.log2()).abs() < 1e-12);
        assert!((trace.ledger.cbits - 2.0 * 12f64.log2()).abs() < 1e-12);
        let v = verify_channel(&trace, &u);
        assert!(v.pass, "distance {} anc {}", v.max_distance, v.max_ancilla_deviation);
    }
}
