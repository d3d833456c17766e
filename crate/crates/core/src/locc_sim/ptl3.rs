//! The loose-type compute–uncompute protocol: both parties exchange loose
//! input types by teleportation, write the outputs on fresh registers, then
//! repeat the exchange for the inverse operator to erase the original inputs.
//! No measurements occur outside the teleportation primitives, so the run has
//! a single branch.

use super::trace::ProtocolTrace;
use super::vm::{run_verification, shift_pow, Mode, Party, RegId, RegInit, Role, Sim, SimResult};
use crate::core_linalg::{zeros, BipartiteOp, CMatrix};
use crate::error::{Error, Result};
use crate::structure::{loose_type_partition, Side};

struct LooseTables {
    d_a: usize,
    d_b: usize,
    /// Loose input types per level on each side, for U and U†.
    lam_a: Vec<usize>,
    lam_b: Vec<usize>,
    lam_a2: Vec<usize>,
    lam_b2: Vec<usize>,
    da1: usize,
    db1: usize,
    da2: usize,
    db2: usize,
    /// Output of A as a function of (x, loose type of B), and of B as a
    /// function of (b, loose type of A).
    y_of: Vec<Vec<usize>>,
    bp_of: Vec<Vec<usize>>,
    /// The same for U† (inputs are the outputs y, b').
    x_of: Vec<Vec<usize>>,
    b_of: Vec<Vec<usize>>,
}

fn image(u: &BipartiteOp, x: usize, b: usize) -> (usize, usize) {
    let col = u.idx(x, b);
    let row = (0..u.dim()).find(|&r| u.matrix[(r, col)].norm() > 0.5).expect("permutation column");
    (row / u.d_b, row % u.d_b)
}

fn build_tables(u: &BipartiteOp) -> Result<LooseTables> {
    if !u.is_permutation(crate::DEFAULT_TOL) {
        return Err(Error::NotPermutation);
    }
    let ud = BipartiteOp::new(u.d_a, u.d_b, u.matrix.adjoint())?;
    let pa = loose_type_partition(u, Side::A)?;
    let pb = loose_type_partition(u, Side::B)?;
    let pa2 = loose_type_partition(&ud, Side::A)?;
    let pb2 = loose_type_partition(&ud, Side::B)?;
    let lam_a: Vec<usize> = (0..u.d_a).map(|x| pa.class_of(x)).collect();
    let lam_b: Vec<usize> = (0..u.d_b).map(|b| pb.class_of(b)).collect();
    let lam_a2: Vec<usize> = (0..u.d_a).map(|x| pa2.class_of(x)).collect();
    let lam_b2: Vec<usize> = (0..u.d_b).map(|b| pb2.class_of(b)).collect();

    let fill = |op: &BipartiteOp, la: &[usize], lb: &[usize], na: usize, nb: usize| -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
        let mut yof = vec![vec![usize::MAX; nb]; op.d_a];
        let mut bpof = vec![vec![usize::MAX; na]; op.d_b];
        for x in 0..op.d_a {
            for b in 0..op.d_b {
                let (y, bp) = image(op, x, b);
                let slot = &mut yof[x][lb[b]];
                if *slot == usize::MAX {
                    *slot = y;
                } else if *slot != y {
                    return Err(Error::ProtocolFailure {
                        step: "ptl3 tables",
                        detail: format!("A-output of level {x} varies within a loose B type"),
                    });
                }
                let slot = &mut bpof[b][la[x]];
                if *slot == usize::MAX {
                    *slot = bp;
                } else if *slot != bp {
                    return Err(Error::ProtocolFailure {
                        step: "ptl3 tables",
                        detail: format!("B-output of level {b} varies within a loose A type"),
                    });
                }
            }
        }
        Ok((yof, bpof))
    };
    let (y_of, bp_of) = fill(u, &lam_a, &lam_b, pa.len(), pb.len())?;
    let (x_of, b_of) = fill(&ud, &lam_a2, &lam_b2, pa2.len(), pb2.len())?;

    Ok(LooseTables {
        d_a: u.d_a,
        d_b: u.d_b,
        lam_a,
        lam_b,
        lam_a2,
        lam_b2,
        da1: pa.len(),
        db1: pb.len(),
        da2: pa2.len(),
        db2: pb2.len(),
        y_of,
        bp_of,
        x_of,
        b_of,
    })
}

/// Controlled type imprint: `Σ_x |x⟩⟨x| ⊗ X^{±λ(x)}` on (data, ancilla).
fn imprint(d_data: usize, d_anc: usize, lam: &[usize], sign: i64) -> CMatrix {
    let mut g = zeros(d_data * d_anc, d_data * d_anc);
    for x in 0..d_data {
        let xm = shift_pow(d_anc, sign * lam[x] as i64);
        for r in 0..d_anc {
            for cc in 0..d_anc {
                g[(x * d_anc + r, x * d_anc + cc)] = xm[(r, cc)];
            }
        }
    }
    g
}

/// `Σ_{x,μ} |x⟩⟨x| |μ⟩⟨μ| ⊗ (0 ↔ out(x,μ))` writing the output level onto a
/// fresh |0⟩ register.
fn write_output(d_data: usize, d_type: usize, d_out: usize, out: &[Vec<usize>]) -> CMatrix {
    let mut g = zeros(d_data * d_type * d_out, d_data * d_type * d_out);
    for x in 0..d_data {
        for mu in 0..d_type {
            let target = out[x][mu];
            let mut perm: Vec<usize> = (0..d_out).collect();
            if target != usize::MAX && target != 0 {
                perm.swap(0, target);
            }
            let pm = crate::core_linalg::perm_matrix(&perm);
            for r in 0..d_out {
                for cc in 0..d_out {
                    g[((x * d_type + mu) * d_out + r, (x * d_type + mu) * d_out + cc)] = pm[(r, cc)];
                }
            }
        }
    }
    g
}

/// Runs the loose-type protocol. Ledger: `2(log2 da + log2 db + log2 da' +
/// log2 db')` ebits (loose-type counts for `U` and `U†`) and twice as many
/// c-bits; at most `8r − 8` of each for Schmidt rank r.
pub fn run_permutation_ptl3(u: &BipartiteOp, mode: Mode) -> Result<ProtocolTrace> {
    let t = build_tables(u)?;
    let out = run_verification(u.d_a, u.d_b, mode, move |sim, a_reg, b_reg| {
        run_inner(sim, &t, a_reg, b_reg)
    })?;
    Ok(ProtocolTrace::new("ptl3", out))
}

fn run_inner(sim: &mut Sim, t: &LooseTables, a_reg: RegId, b_reg: RegId) -> SimResult<Vec<RegId>> {
    // 1. Imprint loose input types and exchange them.
    let a_anc = sim.add_register(Party::Alice, Role::Ancilla, "a", t.da1, RegInit::Basis(0))?;
    let b_anc = sim.add_register(Party::Bob, Role::Ancilla, "b", t.db1, RegInit::Basis(0))?;
    sim.expect_final_basis(a_anc, 0);
    sim.expect_final_basis(b_anc, 0);
    sim.apply(Party::Alice, &[a_reg, a_anc], &imprint(t.d_a, t.da1, &t.lam_a, 1), "ctrl-X^λA")?;
    sim.apply(Party::Bob, &[b_reg, b_anc], &imprint(t.d_b, t.db1, &t.lam_b, 1), "ctrl-X^λB")?;
    sim.teleport(a_anc, Party::Bob)?;
    sim.teleport(b_anc, Party::Alice)?;

    // 2. Write outputs on fresh primed registers.
    let a_out = sim.add_register(Party::Alice, Role::Data, "A'", t.d_a, RegInit::Basis(0))?;
    let b_out = sim.add_register(Party::Bob, Role::Data, "B'", t.d_b, RegInit::Basis(0))?;
    sim.apply(
        Party::Alice,
        &[a_reg, b_anc, a_out],
        &write_output(t.d_a, t.db1, t.d_a, &t.y_of),
        "W",
    )?;
    sim.apply(
        Party::Bob,
        &[b_reg, a_anc, b_out],
        &write_output(t.d_b, t.da1, t.d_b, &t.bp_of),
        "W̃",
    )?;

    // 3. Teleport the type registers back and erase them.
    sim.teleport(a_anc, Party::Alice)?;
    sim.teleport(b_anc, Party::Bob)?;
    sim.apply(Party::Alice, &[a_reg, a_anc], &imprint(t.d_a, t.da1, &t.lam_a, -1), "ctrl-X^{-λA}")?;
    sim.apply(Party::Bob, &[b_reg, b_anc], &imprint(t.d_b, t.db1, &t.lam_b, -1), "ctrl-X^{-λB}")?;

    // 4. Loose types of the outputs under U†, exchanged.
    let a2 = sim.add_register(Party::Alice, Role::Ancilla, "a'", t.da2, RegInit::Basis(0))?;
    let b2 = sim.add_register(Party::Bob, Role::Ancilla, "b'", t.db2, RegInit::Basis(0))?;
    sim.expect_final_basis(a2, 0);
    sim.expect_final_basis(b2, 0);
    sim.apply(Party::Alice, &[a_out, a2], &imprint(t.d_a, t.da2, &t.lam_a2, 1), "ctrl-X^λ'A")?;
    sim.apply(Party::Bob, &[b_out, b2], &imprint(t.d_b, t.db2, &t.lam_b2, 1), "ctrl-X^λ'B")?;
    sim.teleport(a2, Party::Bob)?;
    sim.teleport(b2, Party::Alice)?;

    // 5. Erase the original inputs with the inverse action.
    sim.apply(
        Party::Alice,
        &[a_out, b2, a_reg],
        &write_output(t.d_a, t.db2, t.d_a, &t.x_of),
        "T",
    )?;
    sim.apply(
        Party::Bob,
        &[b_out, a2, b_reg],
        &write_output(t.d_b, t.da2, t.d_b, &t.b_of),
        "T̃",
    )?;

    // 6. Return and erase the primed type registers.
    sim.teleport(a2, Party::Alice)?;
    sim.teleport(b2, Party::Bob)?;
    sim.apply(Party::Alice, &[a_out, a2], &imprint(t.d_a, t.da2, &t.lam_a2, -1), "ctrl-X^{-λ'A}")?;
    sim.apply(Party::Bob, &[b_out, b2], &imprint(t.d_b, t.db2, &t.lam_b2, -1), "ctrl-X^{-λ'B}")?;

    // The original data registers end in |0⟩.
    sim.expect_final_basis(a_reg, 0);
    sim.expect_final_basis(b_reg, 0);
    Ok(vec![a_out, b_out])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locc_sim::trace::verify_channel;
    use crate::structure::fixtures;

    #[test]
    fn example4_single_branch_exact() {
        let u = fixtures::example4();
        let trace = run_permutation_ptl3(&u, Mode::Enumerate).unwrap();
        assert_eq!(trace.branches.len(), 1);
        assert!(trace.ledger.ebits <= 24.0 + 1e-9); // 8r−8 with r = 4
        assert!((trace.ledger.cbits - 2.0 * trace.ledger.ebits).abs() < 1e-9);
        let v = verify_channel(&trace, &u);
        assert!(v.pass, "distance {} anc {}", v.max_distance, v.max_ancilla_deviation);
    }

    #[test]
    fn identity_free() {
        let u = fixtures::identity(2, 3);
        let trace = run_permutation_ptl3(&u, Mode::Enumerate).unwrap();
        assert_eq!(trace.ledger.ebits, 0.0);
        assert!(verify_channel(&trace, &u).pass);
    }

    #[test]
    fn cnot_under_rank_bound() {
        let u = fixtures::cnot();
        let trace = run_permutation_ptl3(&u, Mode::Enumerate).unwrap();
        assert!(trace.ledger.ebits <= 8.0 + 1e-9); // 8r−8 with r = 2
        assert!(verify_channel(&trace, &u).pass);
    }

    #[test]
    fn dcnot_and_swap() {
        for u in [fixtures::dcnot(), fixtures::swap2(), fixtures::m_family(3).unwrap()] {
            let trace = run_permutation_ptl3(&u, Mode::Enumerate).unwrap();
            let v = verify_channel(&trace, &u);
            assert!(v.pass, "distance {} anc {}", v.max_distance, v.max_ancilla_deviation);
        }
    }
}
