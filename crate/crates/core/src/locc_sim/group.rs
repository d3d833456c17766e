//! Group-type protocol: implementing `U = Σ_f W(f) ⊗ V(f)` with the `V(f)` a
//! projective representation, consuming one rank-|G| maximally entangled
//! resource and `2 log2 |G|` c-bits.
//!
//! Two exact mechanisms are implemented, dispatched on the representation's
//! structure:
//!
//! - commuting representations reduce to an |G|-term controlled form in the
//!   common eigenbasis (run through the padded controlled protocol);
//! - Weyl-pair representations (generators `X̂, Ẑ` of equal order `n` with
//!   `ẐX̂ = λX̂Ẑ`, `λ` a primitive n-th root, `|G| = n²`) put the operator in
//!   a normal form acting on an n-dimensional tensor factor of the group
//!   side, which is teleported to the other party and back.
//!
//! Representations outside these classes (such as the ordinary dihedral
//! representations suggested for the rank-3 standard form) have no supported
//! exact two-message mechanism here; the run reports an error rather than
//! approximating.

use super::controlled::{pad_with_zero_terms, run_basic_controlled_with, ControlledRunOptions};
use super::trace::ProtocolTrace;
use super::vm::{run_verification, Mode, Party, RegId, Sim, SimResult};
use crate::core_linalg::{
    ident, simultaneous_unitary_eigenbasis, tensor, unitary_deviation, zeros, BipartiteOp,
    CMatrix, C64,
};
use crate::error::{Error, Result};
use crate::structure::Side;

/// A finite group with a (projective) unitary representation on one side of
/// the bipartite system, plus the expansion coefficients on the other side
/// once solved.
#[derive(Debug, Clone)]
pub struct GroupSpec {
    pub order: usize,
    /// `table[f][g] = f·g`, with element 0 the identity.
    pub table: Vec<Vec<usize>>,
    /// Which side the representation acts on.
    pub side: Side,
    pub rep: Vec<CMatrix>,
    /// Expansion coefficients on the opposite side, solved from the target.
    pub coeffs: Option<Vec<CMatrix>>,
}

impl GroupSpec {
    /// Ebits the group-type protocol consumes.
    pub fn nominal_ebits(&self) -> f64 {
        (self.order as f64).log2()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.order;
        if self.table.len() != n || self.table.iter().any(|r| r.len() != n) {
            return Err(Error::BadGroup("multiplication table has wrong shape".into()));
        }
        for r in &self.table {
            for &v in r {
                if v >= n {
                    return Err(Error::BadGroup("table entry out of range".into()));
                }
            }
        }
        // identity
        for f in 0..n {
            if self.table[0][f] != f || self.table[f][0] != f {
                return Err(Error::BadGroup("element 0 is not the identity".into()));
            }
        }
        // inverses
        for f in 0..n {
            if !(0..n).any(|g| self.table[f][g] == 0 && self.table[g][f] == 0) {
                return Err(Error::BadGroup(format!("element {f} has no inverse")));
            }
        }
        // associativity
        for f in 0..n {
            for g in 0..n {
                for h in 0..n {
                    if self.table[self.table[f][g]][h] != self.table[f][self.table[g][h]] {
                        return Err(Error::BadGroup("table is not associative".into()));
                    }
                }
            }
        }
        if self.rep.len() != n {
            return Err(Error::BadGroup("representation size differs from the group order".into()));
        }
        let d = self.rep[0].nrows();
        for (i, m) in self.rep.iter().enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::BadGroup(format!("representation element {i} has wrong shape")));
            }
            if unitary_deviation(m) > 1e-8 * d as f64 {
                return Err(Error::BadGroup(format!("representation element {i} is not unitary")));
            }
        }
        // projectivity: V(f)V(g) ∝ V(fg)
        for f in 0..n {
            for g in 0..n {
                let prod = &self.rep[f] * &self.rep[g];
                let target = &self.rep[self.table[f][g]];
                let ip = (target.adjoint() * &prod).trace() / C64::new(d as f64, 0.0);
                if (ip.norm() - 1.0).abs() > 1e-8 || (prod - target.map(|z| z * ip)).norm() > 1e-7 {
                    return Err(Error::BadGroup(format!(
                        "V({f})·V({g}) is not proportional to V({}·{})",
                        f, g
                    )));
                }
            }
        }
        Ok(())
    }

    /// The inverse of element `f`.
    pub fn inverse(&self, f: usize) -> usize {
        (0..self.order).find(|&g| self.table[f][g] == 0).expect("validated group")
    }
}

/// Generalized Pauli (discrete Weyl) group of order `d²` with the
/// representation `V(j,k) = X^j Z^k` on a `d`-dimensional space.
pub fn pauli_group(d: usize, side: Side) -> GroupSpec {
    let n = d * d;
    let idx = |j: usize, k: usize| j * d + k;
    let mut table = vec![vec![0usize; n]; n];
    for j1 in 0..d {
        for k1 in 0..d {
            for j2 in 0..d {
                for k2 in 0..d {
                    table[idx(j1, k1)][idx(j2, k2)] = idx((j1 + j2) % d, (k1 + k2) % d);
                }
            }
        }
    }
    let x = super::vm::shift(d);
    let z = {
        let mut m = zeros(d, d);
        for i in 0..d {
            m[(i, i)] = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / d as f64);
        }
        m
    };
    let mut rep = Vec::with_capacity(n);
    for j in 0..d {
        let xj = crate::core_linalg::perm_matrix(&(0..d).map(|i| (i + j) % d).collect::<Vec<_>>());
        for k in 0..d {
            let mut zk = ident(d);
            for _ in 0..k {
                zk = &zk * &z;
            }
            rep.push(&xj * &zk);
        }
    }
    let _ = x;
    GroupSpec { order: n, table, side, rep, coeffs: None }
}

/// Klein-four projective representation `{I, T2, T3, T2·T3}` from a pair of
/// anticommuting involutions.
pub fn klein_from_ops(t2: &CMatrix, t3: &CMatrix, side: Side) -> Result<GroupSpec> {
    let d = t2.nrows();
    let anti = (t2 * t3 + t3 * t2).norm();
    if anti > 1e-8 * d as f64 {
        return Err(Error::BadGroup("operators do not anticommute".into()));
    }
    let table = vec![
        vec![0, 1, 2, 3],
        vec![1, 0, 3, 2],
        vec![2, 3, 0, 1],
        vec![3, 2, 1, 0],
    ];
    let rep = vec![ident(d), t2.clone(), t3.clone(), t2 * t3];
    let spec = GroupSpec { order: 4, table, side, rep, coeffs: None };
    spec.validate()?;
    Ok(spec)
}

/// Dihedral group `D_{2n}` with `n = 2⌊dB/2⌋ + 1` (odd), represented on a
/// `dB`-dimensional space by `⌊dB/2⌋` inequivalent two-dimensional irreps
/// (rotation `diag(ω^k, ω^{−k})`, reflection off-diagonal) plus the trivial
/// one-dimensional irrep when `dB` is odd.
pub fn dihedral_representation(d_b: usize) -> Result<GroupSpec> {
    if d_b < 2 {
        return Err(Error::BadInput("dihedral representation needs dB ≥ 2".into()));
    }
    let half = d_b / 2;
    let n = 2 * half + 1;
    let order = 2 * n;
    // element (ε, t) = s^ε r^t at index ε·n + t
    let mut table = vec![vec![0usize; order]; order];
    for e1 in 0..2usize {
        for t1 in 0..n {
            for e2 in 0..2usize {
                for t2 in 0..n {
                    let e = (e1 + e2) % 2;
                    let t1s = if e2 == 1 { (n - t1) % n } else { t1 };
                    let t = (t1s + t2) % n;
                    table[e1 * n + t1][e2 * n + t2] = e * n + t;
                }
            }
        }
    }
    let omega = 2.0 * std::f64::consts::PI / n as f64;
    let mut rep = Vec::with_capacity(order);
    for e in 0..2usize {
        for t in 0..n {
            let mut m = zeros(d_b, d_b);
            for k in 0..half {
                // irrep speed k+1
                let sp = (k + 1) as f64;
                let ph1 = C64::from_polar(1.0, omega * sp * t as f64);
                let ph2 = C64::from_polar(1.0, -omega * sp * t as f64);
                let (r0, r1) = (2 * k, 2 * k + 1);
                if e == 0 {
                    m[(r0, r0)] = ph1;
                    m[(r1, r1)] = ph2;
                } else {
                    m[(r0, r1)] = ph2;
                    m[(r1, r0)] = ph1;
                }
            }
            if d_b % 2 == 1 {
                m[(d_b - 1, d_b - 1)] = C64::new(1.0, 0.0);
            }
            rep.push(m);
        }
    }
    let spec = GroupSpec { order, table, side: Side::B, rep, coeffs: None };
    spec.validate()?;
    Ok(spec)
}

/// Solves the expansion coefficients `W(f)` on the non-group side by least
/// squares and verifies the reconstruction.
pub fn solve_group_expansion(u: &BipartiteOp, spec: &GroupSpec) -> Result<GroupSpec> {
    spec.validate()?;
    let (dg, dw) = match spec.side {
        Side::A => (u.d_a, u.d_b),
        Side::B => (u.d_b, u.d_a),
    };
    if spec.rep[0].nrows() != dg {
        return Err(Error::DimensionMismatch(format!(
            "representation acts on dimension {}, operator side has {}",
            spec.rep[0].nrows(),
            dg
        )));
    }
    let n = spec.order;
    // Stack vec(V(f)) as columns and precompute the pseudo-inverse pieces.
    let mut vmat = zeros(dg * dg, n);
    for (f, v) in spec.rep.iter().enumerate() {
        for i in 0..dg {
            for j in 0..dg {
                vmat[(i * dg + j, f)] = v[(i, j)];
            }
        }
    }
    let gram = vmat.adjoint() * &vmat;
    let lu = gram.clone().lu();
    // For each coefficient entry (a, a'): U-slice over the group side solves
    // the shared least-squares system.
    let mut coeffs = vec![zeros(dw, dw); n];
    let mut resid2 = 0.0;
    for a in 0..dw {
        for a2 in 0..dw {
            let mut y = zeros(dg * dg, 1);
            for i in 0..dg {
                for j in 0..dg {
                    let (ri, ci) = match spec.side {
                        Side::A => (i * u.d_b + a, j * u.d_b + a2),
                        Side::B => (a * u.d_b + i, a2 * u.d_b + j),
                    };
                    y[(i * dg + j, 0)] = u.matrix[(ri, ci)];
                }
            }
            let rhs = vmat.adjoint() * &y;
            let sol = lu
                .solve(&rhs)
                .ok_or_else(|| Error::BadGroup("representation matrices are degenerate".into()))?;
            resid2 += (&vmat * &sol - &y).norm_squared();
            for f in 0..n {
                coeffs[f][(a, a2)] = sol[(f, 0)];
            }
        }
    }
    let resid = resid2.sqrt();
    if resid > 1e-8 * u.matrix.norm() {
        return Err(Error::ExpansionResidual { residual: resid });
    }
    let mut out = spec.clone();
    out.coeffs = Some(coeffs);
    Ok(out)
}

/// Runs the group-type protocol: rank-|G| resource, `2 log2 |G|` c-bits.
pub fn run_group_type(u: &BipartiteOp, spec: &GroupSpec, mode: Mode) -> Result<ProtocolTrace> {
    u.check_unitary(crate::DEFAULT_TOL)?;
    let solved = match &spec.coeffs {
        Some(_) => spec.clone(),
        None => solve_group_expansion(u, spec)?,
    };
    let n = solved.order;
    // Dispatch on the representation structure.
    let commuting = pairwise_commuting(&solved.rep);
    if commuting {
        return run_commuting(u, &solved, mode);
    }
    if let Some((g1, g2, cyc_n)) = weyl_pair(&solved) {
        return run_weyl(u, &solved, g1, g2, cyc_n, mode);
    }
    Err(Error::UnsupportedRepresentation(format!(
        "order-{n} representation is neither commuting nor a Weyl pair; \
         no exact rank-{n} mechanism is implemented for it"
    )))
}

fn pairwise_commuting(rep: &[CMatrix]) -> bool {
    for (i, a) in rep.iter().enumerate() {
        for b in rep.iter().skip(i + 1) {
            if (a * b - b * a).norm() > 1e-8 * a.nrows() as f64 {
                return false;
            }
        }
    }
    true
}

/// Looks for generators `g1, g2` of equal representation-order `cyc` with
/// `|G| = cyc²` and a primitive commutation phase.
fn weyl_pair(spec: &GroupSpec) -> Option<(usize, usize, usize)> {
    let n = spec.order;
    let d = spec.rep[0].nrows() as f64;
    // All pairs must commute up to a scalar.
    let comm_phase = |f: usize, g: usize| -> Option<C64> {
        let ab = &spec.rep[f] * &spec.rep[g];
        let ba = &spec.rep[g] * &spec.rep[f];
        let ip = (ba.adjoint() * &ab).trace() / C64::new(d * 1.0, 0.0);
        if (ip.norm() - 1.0).abs() > 1e-8 || (&ab - ba.map(|z| z * ip)).norm() > 1e-7 {
            None
        } else {
            Some(ip)
        }
    };
    for f in 0..n {
        for g in 0..n {
            comm_phase(f, g)?;
        }
    }
    let rep_order = |f: usize| -> usize {
        let mut cur = f;
        for k in 1..=n {
            if cur == 0 {
                return k - 1;
            }
            cur = spec.table[cur][f];
            if k == n {
                break;
            }
        }
        // order in the group sense
        let mut cur = f;
        let mut k = 1;
        while cur != 0 {
            cur = spec.table[cur][f];
            k += 1;
        }
        k
    };
    let mut best: Option<(usize, usize, usize)> = None;
    let cyc = (1..=n).find(|c| c * c == n)?;
    for g1 in 1..n {
        if group_order(spec, g1) != cyc {
            continue;
        }
        for g2 in 1..n {
            if group_order(spec, g2) != cyc {
                continue;
            }
            if let Some(lambda) = comm_phase(g2, g1) {
                // λ primitive cyc-th root: λ^cyc = 1 and λ^j ≠ 1 for 0<j<cyc
                let mut p = C64::new(1.0, 0.0);
                let mut primitive = true;
                for j in 1..=cyc {
                    p *= lambda;
                    if j < cyc && (p - C64::new(1.0, 0.0)).norm() < 1e-8 {
                        primitive = false;
                        break;
                    }
                }
                if primitive && (p - C64::new(1.0, 0.0)).norm() < 1e-7 && spans_group(spec, g1, g2, cyc) {
                    best = Some((g1, g2, cyc));
                    break;
                }
            }
        }
        if best.is_some() {
            break;
        }
    }
    let _ = rep_order;
    best
}

fn group_order(spec: &GroupSpec, f: usize) -> usize {
    let mut cur = f;
    let mut k = 1;
    while cur != 0 {
        cur = spec.table[cur][f];
        k += 1;
        if k > spec.order {
            return usize::MAX;
        }
    }
    k
}

fn spans_group(spec: &GroupSpec, g1: usize, g2: usize, cyc: usize) -> bool {
    let mut seen = vec![false; spec.order];
    let mut e1 = 0usize;
    for _ in 0..cyc {
        let mut e = e1;
        for _ in 0..cyc {
            seen[e] = true;
            e = spec.table[e][g2];
        }
        e1 = spec.table[e1][g1];
    }
    seen.iter().all(|&s| s)
}

/// Commuting representation: diagonalize everything at once, pad the
/// controlled form to exactly |G| terms, and run the extended controlled
/// protocol in the rotated frame.
fn run_commuting(u: &BipartiteOp, spec: &GroupSpec, mode: Mode) -> Result<ProtocolTrace> {
    let q = simultaneous_unitary_eigenbasis(&spec.rep)?;
    let (dg, side) = (spec.rep[0].nrows(), spec.side);
    let rot = match side {
        Side::A => tensor(&q, &ident(u.d_b)),
        Side::B => tensor(&ident(u.d_a), &q),
    };
    let up = BipartiteOp::new(u.d_a, u.d_b, rot.adjoint() * &u.matrix * &rot)?;
    let base = crate::structure::detect_controlled(&up, side)?.ok_or_else(|| {
        Error::UnsupportedRepresentation(
            "commuting representation did not reduce the operator to a controlled form".into(),
        )
    })?;
    if base.n_terms() > spec.order {
        return Err(Error::UnsupportedRepresentation(format!(
            "controlled reduction needs {} terms > |G| = {}",
            base.n_terms(),
            spec.order
        )));
    }
    let mut form = pad_with_zero_terms(&base, spec.order - base.n_terms());
    // Fold the rotation into the gauge: U = rot · U' · rot†.
    match side {
        Side::A => {
            form.gauge.post_a = &q * &form.gauge.post_a;
            form.gauge.pre_a = form.gauge.pre_a.clone() * q.adjoint();
        }
        Side::B => {
            form.gauge.post_b = &q * &form.gauge.post_b;
            form.gauge.pre_b = form.gauge.pre_b.clone() * q.adjoint();
        }
    }
    let _ = dg;
    let trace = run_basic_controlled_with(
        &form,
        &ControlledRunOptions { allow_zero_terms: true, mode, skip_final_correction: false },
    )?;
    Ok(ProtocolTrace::new("group", super::vm::RunOutput {
        events: trace.events,
        ledger: trace.ledger,
        branches: trace.branches,
    }))
}

/// Weyl-pair representation: rotate to the normal form where the group side
/// factors as (cyclic n) ⊗ (multiplicity m) with the operator supported on
/// the n-factor, then teleport that factor across and back.
fn run_weyl(
    u: &BipartiteOp,
    spec: &GroupSpec,
    g1: usize,
    g2: usize,
    cyc: usize,
    mode: Mode,
) -> Result<ProtocolTrace> {
    let xhat = &spec.rep[g1];
    let zhat = &spec.rep[g2];
    let dg = xhat.nrows();
    if dg % cyc != 0 {
        return Err(Error::UnsupportedRepresentation(format!(
            "group side dimension {dg} is not a multiple of the Weyl order {cyc}"
        )));
    }
    let mult = dg / cyc;
    let q = weyl_normal_basis(xhat, zhat, cyc, mult)?;
    // Rotate and check the factorized form U' = Ũ ⊗ I_m on the group side.
    let rot = match spec.side {
        Side::A => tensor(&q, &ident(u.d_b)),
        Side::B => tensor(&ident(u.d_a), &q),
    };
    let up = BipartiteOp::new(u.d_a, u.d_b, rot.adjoint() * &u.matrix * &rot)?;
    let utilde = extract_factor_unitary(&up, spec.side, cyc, mult)?;

    let side = spec.side;
    let q2 = q.clone();
    let out = run_verification(u.d_a, u.d_b, mode, move |sim, a, b| {
        let (group_reg, group_party) = match side {
            Side::A => (a, Party::Alice),
            Side::B => (b, Party::Bob),
        };
        sim.apply(group_party, &[group_reg], &q2.adjoint(), "Q†")?;
        let (g_n, g_m) = sim.split_register(group_reg, cyc, mult)?;
        sim.teleport(g_n, group_party.other())?;
        // The other party applies Ũ on (its data, the teleported factor).
        match side {
            Side::A => sim.apply(Party::Bob, &[g_n, b], &utilde, "Ũ")?,
            Side::B => sim.apply(Party::Alice, &[a, g_n], &utilde, "Ũ")?,
        }
        sim.teleport(g_n, group_party)?;
        sim.apply(group_party, &[g_n, g_m], &q2, "Q")?;
        match side {
            Side::A => Ok(vec![g_n, g_m, b]),
            Side::B => Ok(vec![a, g_n, g_m]),
        }
    })?;
    Ok(ProtocolTrace::new("group", out))
}

/// Orthonormal basis in which `X̂ = shift ⊗ I_m` (up to the n-th root of its
/// proportionality scalar) and `Ẑ = clock-like ⊗ I_m`.
fn weyl_normal_basis(xhat: &CMatrix, zhat: &CMatrix, n: usize, m: usize) -> Result<CMatrix> {
    let d = n * m;
    // Eigenbasis of Ẑ, clustered by eigenphase.
    let (q0, phases) = crate::core_linalg::unitary_eigenbasis(zhat)?;
    // Cluster indices by phase.
    let mut clusters: Vec<(C64, Vec<usize>)> = Vec::new();
    for (i, ph) in phases.iter().enumerate() {
        match clusters.iter_mut().find(|(p, _)| (p - ph).norm() < 1e-7) {
            Some((_, v)) => v.push(i),
            None => clusters.push((*ph, vec![i])),
        }
    }
    if clusters.len() != n || clusters.iter().any(|(_, v)| v.len() != m) {
        return Err(Error::UnsupportedRepresentation(format!(
            "Ẑ spectrum splits into {} classes with sizes {:?}; expected {n} of size {m}",
            clusters.len(),
            clusters.iter().map(|(_, v)| v.len()).collect::<Vec<_>>()
        )));
    }
    // X̂^n ∝ c · I: determine c to normalize the orbit.
    let mut xn = ident(d);
    for _ in 0..n {
        xn = &xn * xhat;
    }
    let c = xn.trace() / C64::new(d as f64, 0.0);
    if (xn.clone() - ident(d).map(|z| z * c)).norm() > 1e-7 * d as f64 {
        return Err(Error::UnsupportedRepresentation("X̂^n is not proportional to the identity".into()));
    }
    let croot = C64::from_polar(1.0, c.arg() / n as f64) * C64::new(c.norm().powf(1.0 / n as f64), 0.0);
    // Start from the first cluster's basis vectors; orbit them with X̂.
    let first = &clusters[0].1;
    let mut q = zeros(d, d);
    // column index (k, α) → k*m + α
    let mut cols: Vec<Vec<C64>> = Vec::new();
    for &i0 in first {
        let mut v: Vec<C64> = (0..d).map(|r| q0[(r, i0)]).collect();
        for _k in 0..n {
            cols.push(v.clone());
            // v ← X̂ v / croot
            let mut nv = vec![C64::new(0.0, 0.0); d];
            for r in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for cc in 0..d {
                    acc += xhat[(r, cc)] * v[cc];
                }
                nv[r] = acc / croot;
            }
            v = nv;
        }
    }
    // cols are ordered (α, k): reorder to (k, α).
    for (ai, chunk) in cols.chunks(n).enumerate() {
        for (k, v) in chunk.iter().enumerate() {
            for r in 0..d {
                q[(r, k * m + ai)] = v[r];
            }
        }
    }
    // Verify orthonormality.
    if (q.adjoint() * &q - ident(d)).norm() > 1e-7 * d as f64 {
        return Err(Error::UnsupportedRepresentation(
            "Weyl orbit basis failed to be orthonormal".into(),
        ));
    }
    Ok(q)
}

/// Checks `U' = Ũ ⊗ I_m` on the group side's (n ⊗ m) split and extracts `Ũ`.
fn extract_factor_unitary(up: &BipartiteOp, side: Side, n: usize, m: usize) -> Result<CMatrix> {
    let (d_a, d_b) = (up.d_a, up.d_b);
    let dim_tilde = match side {
        Side::A => n * d_b,
        Side::B => d_a * n,
    };
    let mut ut = zeros(dim_tilde, dim_tilde);
    let mut resid = 0.0f64;
    match side {
        Side::B => {
            // index (a, (k, α))
            for a in 0..d_a {
                for k in 0..n {
                    for a2 in 0..d_a {
                        for k2 in 0..n {
                            ut[(a * n + k, a2 * n + k2)] = up.matrix[(a * d_b + k * m, a2 * d_b + k2 * m)];
                        }
                    }
                }
            }
            for a in 0..d_a {
                for k in 0..n {
                    for al in 0..m {
                        for a2 in 0..d_a {
                            for k2 in 0..n {
                                for al2 in 0..m {
                                    let got = up.matrix[(a * d_b + k * m + al, a2 * d_b + k2 * m + al2)];
                                    let want = if al == al2 { ut[(a * n + k, a2 * n + k2)] } else { C64::new(0.0, 0.0) };
                                    resid += (got - want).norm_sqr();
                                }
                            }
                        }
                    }
                }
            }
        }
        Side::A => {
            // A side index (k, α) major over B
            for k in 0..n {
                for b in 0..d_b {
                    for k2 in 0..n {
                        for b2 in 0..d_b {
                            ut[(k * d_b + b, k2 * d_b + b2)] = up.matrix[((k * m) * d_b + b, (k2 * m) * d_b + b2)];
                        }
                    }
                }
            }
            for k in 0..n {
                for al in 0..m {
                    for b in 0..d_b {
                        for k2 in 0..n {
                            for al2 in 0..m {
                                for b2 in 0..d_b {
                                    let got = up.matrix[((k * m + al) * d_b + b, (k2 * m + al2) * d_b + b2)];
                                    let want = if al == al2 { ut[(k * d_b + b, k2 * d_b + b2)] } else { C64::new(0.0, 0.0) };
                                    resid += (got - want).norm_sqr();
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let resid = resid.sqrt();
    if resid > 1e-7 * up.matrix.norm() {
        return Err(Error::ExpansionResidual { residual: resid });
    }
    if unitary_deviation(&ut) > 1e-7 * dim_tilde as f64 {
        return Err(Error::NotUnitary { deviation: unitary_deviation(&ut) });
    }
    Ok(ut)
}

impl Sim {
    /// Splits a register of dimension `d1·d2` into two registers (first
    /// slowest); pure bookkeeping, no physical operation.
    pub fn split_register(&mut self, reg: RegId, d1: usize, d2: usize) -> SimResult<(RegId, RegId)> {
        if self.dim(reg) != d1 * d2 {
            return Err(Error::DimensionMismatch(format!(
                "cannot split dim {} into {d1}×{d2}",
                self.dim(reg)
            ))
            .into());
        }
        let (p, role, name) = {
            let r = self.register(reg);
            (r.party, r.role, r.name.clone())
        };
        let r1 = self.alloc_public(p, role, &format!("{name}.0"), d1);
        let r2 = self.alloc_public(p, role, &format!("{name}.1"), d2);
        self.replace_factor(reg, &[r1, r2]);
        Ok((r1, r2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locc_sim::trace::verify_channel;
    use crate::structure::fixtures;

    #[test]
    fn group_validation_catches_bad_tables() {
        let mut spec = pauli_group(2, Side::A);
        spec.table[1][1] = 3; // breaks associativity/inverses structure
        assert!(spec.validate().is_err());
    }

    #[test]
    fn pauli_group_solves_any_unitary() {
        let u = fixtures::cnot();
        let spec = pauli_group(2, Side::A);
        let solved = solve_group_expansion(&u, &spec).unwrap();
        assert!(solved.coeffs.is_some());
    }

    #[test]
    fn trivial_group_product_unitary() {
        // U = I ⊗ X with the trivial group {e} on side A: W(e) is the B factor
        // and the run consumes nothing.
        let x = fixtures::pauli('x');
        let u = BipartiteOp::new(2, 2, tensor(&ident(2), &x)).unwrap();
        let spec = GroupSpec {
            order: 1,
            table: vec![vec![0]],
            side: Side::A,
            rep: vec![ident(2)],
            coeffs: None,
        };
        let solved = solve_group_expansion(&u, &spec).unwrap();
        let w = &solved.coeffs.as_ref().unwrap()[0];
        assert!((w - &x).norm() < 1e-9);
        let trace = run_group_type(&u, &spec, Mode::Enumerate).unwrap();
        assert_eq!(trace.ledger.ebits, 0.0);
        assert!(verify_channel(&trace, &u).pass);
        // An A-side nontrivial product cannot expand over the trivial group.
        let bad = BipartiteOp::new(2, 2, tensor(&x, &x)).unwrap();
        assert!(matches!(
            solve_group_expansion(&bad, &spec),
            Err(Error::ExpansionResidual { .. })
        ));
    }

    #[test]
    fn cnot_via_pauli_group_two_ebits() {
        let u = fixtures::cnot();
        let spec = pauli_group(2, Side::A);
        let trace = run_group_type(&u, &spec, Mode::Enumerate).unwrap();
        assert!((trace.ledger.ebits - 2.0).abs() < 1e-12);
        assert!((trace.ledger.cbits - 4.0).abs() < 1e-12);
        let v = verify_channel(&trace, &u);
        assert!(v.pass, "distance {}", v.max_distance);
    }

    #[test]
    fn example1_via_klein_group() {
        let u = fixtures::example1(&[0.0, 1.0], &[(0.7, 0.3)]).unwrap();
        let t2 = u.block(1, 1); // T2 at level 1 of the fixture
        let t3 = u.block(2, 2);
        let spec = klein_from_ops(&t2, &t3, Side::B).unwrap();
        let trace = run_group_type(&u, &spec, Mode::Enumerate).unwrap();
        assert!((trace.ledger.ebits - 2.0).abs() < 1e-12);
        assert!((trace.ledger.cbits - 4.0).abs() < 1e-12);
        let v = verify_channel(&trace, &u);
        assert!(v.pass, "distance {} anc {}", v.max_distance, v.max_ancilla_deviation);
    }

    #[test]
    fn commuting_rep_runs_as_padded_controlled() {
        // Diagonal qutrit rep of Z_3 on side B with a diagonal target.
        let z3 = {
            let mut m = ident(3);
            for i in 0..3 {
                m[(i, i)] = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / 3.0);
            }
            m
        };
        let table = vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]];
        let rep = vec![ident(3), z3.clone(), &z3 * &z3];
        let spec = GroupSpec { order: 3, table, side: Side::B, rep, coeffs: None };
        // Target: B-controlled two-term unitary in the Z3 eigenbasis.
        let one = C64::new(1.0, 0.0);
        let mut m = zeros(6, 6);
        // B-level 0: X on A; B-levels 1,2: identity.
        m[(0 + 3, 0)] = one;
        m[(0, 0 + 3)] = one;
        for b in 1..3 {
            m[(b, b)] = one;
            m[(b + 3, b + 3)] = one;
        }
        let u = BipartiteOp::new(2, 3, m).unwrap();
        let trace = run_group_type(&u, &spec, Mode::Enumerate).unwrap();
        assert!((trace.ledger.ebits - 3f64.log2()).abs() < 1e-12);
        let v = verify_channel(&trace, &u);
        assert!(v.pass, "distance {}", v.max_distance);
    }

    #[test]
    fn dihedral_spec_structure() {
        let d6 = dihedral_representation(3).unwrap();
        assert_eq!(d6.order, 6);
        assert!((d6.nominal_ebits() - 6f64.log2()).abs() < 1e-12);
        let d6b = dihedral_representation(2).unwrap();
        assert_eq!(d6b.order, 6);
        let d10 = dihedral_representation(5).unwrap();
        assert_eq!(d10.order, 10);
    }

    #[test]
    fn dihedral_expansion_solves_but_run_reports_unsupported() {
        let u = fixtures::example2(0.5, &[2.5, 3.0, 4.0, 5.0, 6.5, 8.0], &[0.4]).unwrap();
        assert_eq!(u.d_b, 2);
        let spec = dihedral_representation(2).unwrap();
        let solved = solve_group_expansion(&u, &spec).unwrap();
        assert!(solved.coeffs.is_some());
        match run_group_type(&u, &spec, Mode::Enumerate) {
            Err(Error::UnsupportedRepresentation(_)) => {}
            other => panic!("expected UnsupportedRepresentation, got {other:?}"),
        }
    }
}
