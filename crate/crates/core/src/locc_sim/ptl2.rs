//! The type-system protocol for general bipartite permutation unitaries:
//! input types of A travel to Bob on a shared pair, Bob computes the output
//! of B together with the relative output label of A, the label is teleported
//! back for Alice to finish her side, and the output type of B powers the
//! erasure of the bookkeeping registers.

use super::trace::ProtocolTrace;
use super::vm::{run_verification, shift_pow, Basis, Mode, Party, RegId, RegInit, Role, Sim, SimResult};
use crate::core_linalg::{zeros, BipartiteOp, CMatrix, C64};
use crate::error::{Error, Result};
use crate::structure::permutation_type_partitions;

/// Static tables driving the protocol's controlled permutation gates.
struct Ptl2Tables {
    d_a: usize,
    d_b: usize,
    /// Input type of each A level.
    tau: Vec<usize>,
    d_in: usize,
    /// Relative-output label dimension (max nonzero blocks per big column).
    d_rel: usize,
    /// Output type of each B level.
    omega: Vec<usize>,
    d_out: usize,
    /// `(rho, b_out)` as a function of (input type, b_in).
    w_map: Vec<Vec<(usize, usize)>>,
    /// Output A level as a function of (x, rho); `usize::MAX` when undefined.
    y_map: Vec<Vec<usize>>,
    /// `(tau, rho)` as a function of (output A level, output B type);
    /// `usize::MAX` markers when the combination cannot occur.
    erase_map: Vec<Vec<(usize, usize)>>,
}

fn build_tables(u: &BipartiteOp) -> Result<Ptl2Tables> {
    if !u.is_permutation(crate::DEFAULT_TOL) {
        return Err(Error::NotPermutation);
    }
    let info = permutation_type_partitions(u)?;
    let d_a = u.d_a;
    let d_b = u.d_b;
    let tau: Vec<usize> = (0..d_a).map(|x| info.input_a.class_of(x)).collect();
    let d_in = info.input_a.len();
    let d_rel = info.relative_output_dim;
    let omega: Vec<usize> = (0..d_b).map(|b| info.output_b.class_of(b)).collect();
    let d_out = info.output_b.len();

    // Permutation action: image[(x, b)] = (y, b').
    let image = |x: usize, b: usize| -> (usize, usize) {
        let col = u.idx(x, b);
        let row = (0..u.dim()).find(|&r| u.matrix[(r, col)].norm() > 0.5).expect("permutation column");
        (row / d_b, row % d_b)
    };

    // Canonical per-type block order: for each type, the blocks of any member
    // column keyed by a canonical fingerprint; the key orders the blocks the
    // same way for every member (same multiset).
    // rho_of[(τ, b_in)] = ordinal of the block owning b_in among the type's
    // blocks, by fingerprint order.
    let mut w_map = vec![vec![(usize::MAX, usize::MAX); d_b]; d_in];
    let mut rho_count = vec![0usize; d_in];
    for cls in 0..d_in {
        let x0 = info.input_a.classes[cls][0];
        // blocks of column x0 with fingerprints
        let mut blocks: Vec<(Vec<(usize, usize)>, usize)> = Vec::new(); // (fingerprint, row)
        for y in 0..d_a {
            if u.block_norm(y, x0) > crate::DEFAULT_TOL {
                let blk = u.block(y, x0);
                let mut fp = Vec::new();
                for r in 0..d_b {
                    for cc in 0..d_b {
                        if blk[(r, cc)].norm() > 0.5 {
                            fp.push((r, cc));
                        }
                    }
                }
                fp.sort_unstable();
                blocks.push((fp, y));
            }
        }
        blocks.sort();
        rho_count[cls] = blocks.len();
        // owner of column b within this type: the block whose fingerprint
        // occupies input column b.
        for b in 0..d_b {
            let mut assigned = false;
            for (rho, (fp, y0)) in blocks.iter().enumerate() {
                if let Some(&(r_out, _)) = fp.iter().find(|&&(_, cin)| cin == b) {
                    let (_, bprime) = image(x0, b);
                    debug_assert_eq!(image(x0, b).0, *y0);
                    debug_assert_eq!(bprime, r_out);
                    w_map[cls][b] = (rho, r_out);
                    assigned = true;
                    break;
                }
            }
            if !assigned {
                return Err(Error::ProtocolFailure {
                    step: "ptl2 tables",
                    detail: format!("input column {b} not covered by any block of type {cls}"),
                });
            }
        }
        // Consistency across all members of the class.
        for &x in &info.input_a.classes[cls] {
            for b in 0..d_b {
                let (_, bp) = image(x, b);
                if w_map[cls][b].1 != bp {
                    return Err(Error::ProtocolFailure {
                        step: "ptl2 tables",
                        detail: format!("B-output of column {b} differs within input type {cls}"),
                    });
                }
            }
        }
    }

    // y_map[(x, rho)]: where the type's rho-th block sits in column x.
    let mut y_map = vec![vec![usize::MAX; d_rel]; d_a];
    for x in 0..d_a {
        let cls = tau[x];
        for b in 0..d_b {
            let (rho, _) = w_map[cls][b];
            let (y, _) = image(x, b);
            if y_map[x][rho] == usize::MAX {
                y_map[x][rho] = y;
            } else if y_map[x][rho] != y {
                return Err(Error::ProtocolFailure {
                    step: "ptl2 tables",
                    detail: format!("block ordinal {rho} maps column {x} to two different rows"),
                });
            }
        }
    }

    // erase_map[(y, ω)] = (τ, ρ) of the input that produced this output.
    let mut erase_map = vec![vec![(usize::MAX, usize::MAX); d_out]; d_a];
    for x in 0..d_a {
        for b in 0..d_b {
            let (y, bp) = image(x, b);
            let om = omega[bp];
            let (rho, _) = w_map[tau[x]][b];
            let slot = &mut erase_map[y][om];
            if *slot == (usize::MAX, usize::MAX) {
                *slot = (tau[x], rho);
            } else if *slot != (tau[x], rho) {
                return Err(Error::ProtocolFailure {
                    step: "ptl2 tables",
                    detail: format!(
                        "output (A level {y}, B type {om}) traces back to two distinct (τ, ρ) pairs"
                    ),
                });
            }
        }
    }

    Ok(Ptl2Tables { d_a, d_b, tau, d_in, d_rel, omega, d_out, w_map, y_map, erase_map })
}

/// Extends a partial injective map on `[0,d)` to a permutation matrix.
fn complete_permutation(d: usize, pairs: &[(usize, usize)]) -> CMatrix {
    let mut image = vec![usize::MAX; d];
    let mut used = vec![false; d];
    for &(src, dst) in pairs {
        image[src] = dst;
        used[dst] = true;
    }
    let mut free_dst = (0..d).filter(|&i| !used[i]);
    for i in 0..d {
        if image[i] == usize::MAX {
            image[i] = free_dst.next().expect("counting");
        }
    }
    let mut m = zeros(d, d);
    for (src, &dst) in image.iter().enumerate() {
        m[(dst, src)] = C64::new(1.0, 0.0);
    }
    m
}

/// Runs the type-system protocol on a permutation unitary. Ledger:
/// `log2(d_in · d_rel · d_out)` ebits and twice as many c-bits, where the
/// three dimensions are the input types of A, the relative output dimension,
/// and the output types of B.
pub fn run_permutation_ptl2(u: &BipartiteOp, mode: Mode) -> Result<ProtocolTrace> {
    let t = build_tables(u)?;
    let out = run_verification(u.d_a, u.d_b, mode, move |sim, a_reg, b_reg| {
        run_inner(sim, &t, a_reg, b_reg)
    })?;
    Ok(ProtocolTrace::new("ptl2", out))
}

fn run_inner(sim: &mut Sim, t: &Ptl2Tables, a_reg: RegId, b_reg: RegId) -> SimResult<Vec<RegId>> {
    let (d_a, d_b, d_in, d_rel, d_out) = (t.d_a, t.d_b, t.d_in, t.d_rel, t.d_out);

    // 1. Alice imprints the input type of A on ancilla a.
    let a_anc = sim.add_register(Party::Alice, Role::Ancilla, "a", d_in, RegInit::Basis(0))?;
    sim.expect_final_basis(a_anc, 0);
    let mut g1 = zeros(d_a * d_in, d_a * d_in);
    for x in 0..d_a {
        let xm = shift_pow(d_in, t.tau[x] as i64);
        for r in 0..d_in {
            for cc in 0..d_in {
                g1[(x * d_in + r, x * d_in + cc)] = xm[(r, cc)];
            }
        }
    }
    sim.apply(Party::Alice, &[a_reg, a_anc], &g1, "ctrl-X^τ")?;

    // 2. Copy the Z-information of a to Bob's e' using a shared pair.
    let (e, e_p) = sim.share_pair("e", "e'", d_in)?;
    let mut g2 = zeros(d_in * d_in, d_in * d_in);
    for tval in 0..d_in {
        let xm = shift_pow(d_in, -(tval as i64));
        for r in 0..d_in {
            for cc in 0..d_in {
                g2[(tval * d_in + r, tval * d_in + cc)] = xm[(r, cc)];
            }
        }
    }
    sim.apply(Party::Alice, &[a_anc, e], &g2, "ctrl-X^{-τ}")?;
    let l = sim.measure_and_send(e, Basis::Computational)? as i64;
    sim.apply(Party::Bob, &[e_p], &shift_pow(d_in, -l), "X^{-l}")?;

    // 3. Bob computes the relative output label and the B output with W.
    let f = sim.add_register(Party::Bob, Role::Ancilla, "f", d_rel, RegInit::Basis(0))?;
    let mut w = zeros(d_in * d_rel * d_b, d_in * d_rel * d_b);
    for tval in 0..d_in {
        // permutation of (f0, B): (0, b) ↦ (rho, b')
        let pairs: Vec<(usize, usize)> = (0..d_b)
            .map(|b| {
                let (rho, bp) = t.w_map[tval][b];
                (b, rho * d_b + bp)
            })
            .collect();
        let perm = complete_permutation(d_rel * d_b, &pairs);
        for r in 0..d_rel * d_b {
            for cc in 0..d_rel * d_b {
                w[(tval * d_rel * d_b + r, tval * d_rel * d_b + cc)] = perm[(r, cc)];
            }
        }
    }
    sim.apply(Party::Bob, &[e_p, f, b_reg], &w, "W")?;

    // 4. Fourier-erase e' with a phase fix on a; teleport f to Alice.
    let m = sim.measure_and_send(e_p, Basis::Fourier)?;
    let mut z = zeros(d_in, d_in);
    for tval in 0..d_in {
        z[(tval, tval)] = C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (tval * m) as f64 / d_in as f64);
    }
    sim.apply(Party::Alice, &[a_anc], &z, "Z^{-m}")?;
    sim.teleport(f, Party::Alice)?;
    sim.expect_final_basis(f, 0);

    // 5. Alice computes the output of A with V, controlled by (a, f').
    let mut v = zeros(d_in * d_rel * d_a, d_in * d_rel * d_a);
    for tval in 0..d_in {
        for rho in 0..d_rel {
            let pairs: Vec<(usize, usize)> = (0..d_a)
                .filter(|&x| t.tau[x] == tval && t.y_map[x][rho] != usize::MAX)
                .map(|x| (x, t.y_map[x][rho]))
                .collect();
            let perm = complete_permutation(d_a, &pairs);
            for r in 0..d_a {
                for cc in 0..d_a {
                    v[((tval * d_rel + rho) * d_a + r, (tval * d_rel + rho) * d_a + cc)] = perm[(r, cc)];
                }
            }
        }
    }
    sim.apply(Party::Alice, &[a_anc, f, a_reg], &v, "V")?;

    // 6. Bob imprints the output type of B on h and copies it to Alice.
    let h = sim.add_register(Party::Bob, Role::Ancilla, "h", d_out, RegInit::Basis(0))?;
    sim.expect_final_basis(h, 0);
    let mut gh = zeros(d_b * d_out, d_b * d_out);
    for b in 0..d_b {
        let xm = shift_pow(d_out, t.omega[b] as i64);
        for r in 0..d_out {
            for cc in 0..d_out {
                gh[(b * d_out + r, b * d_out + cc)] = xm[(r, cc)];
            }
        }
    }
    sim.apply(Party::Bob, &[b_reg, h], &gh, "ctrl-X^ω")?;
    let (h_a, h_b) = sim.share_pair("h'", "h''", d_out)?;
    let mut gh2 = zeros(d_out * d_out, d_out * d_out);
    for o in 0..d_out {
        let xm = shift_pow(d_out, -(o as i64));
        for r in 0..d_out {
            for cc in 0..d_out {
                gh2[(o * d_out + r, o * d_out + cc)] = xm[(r, cc)];
            }
        }
    }
    sim.apply(Party::Bob, &[h, h_b], &gh2, "ctrl-X^{-ω}")?;
    let lh = sim.measure_and_send(h_b, Basis::Computational)? as i64;
    sim.apply(Party::Alice, &[h_a], &shift_pow(d_out, -lh), "X^{-lh}")?;

    // Erase a and f' with T, controlled by (A, h').
    let mut tg = zeros(d_a * d_out * d_in * d_rel, d_a * d_out * d_in * d_rel);
    let sub = d_in * d_rel;
    for y in 0..d_a {
        for o in 0..d_out {
            let (tv, rho) = t.erase_map[y][o];
            let pairs: Vec<(usize, usize)> = if tv != usize::MAX {
                vec![(tv * d_rel + rho, 0)]
            } else {
                vec![]
            };
            let perm = complete_permutation(sub, &pairs);
            for r in 0..sub {
                for cc in 0..sub {
                    tg[((y * d_out + o) * sub + r, (y * d_out + o) * sub + cc)] = perm[(r, cc)];
                }
            }
        }
    }
    sim.apply(Party::Alice, &[a_reg, h_a, a_anc, f], &tg, "T")?;

    // Fourier-erase h' with a phase fix on Bob's h, then uncompute h from B.
    let nm = sim.measure_and_send(h_a, Basis::Fourier)?;
    let mut zh = zeros(d_out, d_out);
    for o in 0..d_out {
        zh[(o, o)] = C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (o * nm) as f64 / d_out as f64);
    }
    sim.apply(Party::Bob, &[h], &zh, "Ẑ^{-n}")?;
    let mut gh_inv = zeros(d_b * d_out, d_b * d_out);
    for b in 0..d_b {
        let xm = shift_pow(d_out, -(t.omega[b] as i64));
        for r in 0..d_out {
            for cc in 0..d_out {
                gh_inv[(b * d_out + r, b * d_out + cc)] = xm[(r, cc)];
            }
        }
    }
    sim.apply(Party::Bob, &[b_reg, h], &gh_inv, "ctrl-X^{-ω}")?;

    Ok(vec![a_reg, b_reg])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locc_sim::trace::verify_channel;
    use crate::structure::fixtures;

    #[test]
    fn example4_ledger_and_exactness() {
        let u = fixtures::example4();
        let trace = run_permutation_ptl2(&u, Mode::Enumerate).unwrap();
        assert!((trace.ledger.ebits - 12f64.log2()).abs() < 1e-12);
        assert!((trace.ledger.cbits - 2.0 * 12f64.log2()).abs() < 1e-12);
        let v = verify_channel(&trace, &u);
        assert!(v.pass, "distance {} anc {}", v.max_distance, v.max_ancilla_deviation);
    }

    #[test]
    fn identity_zero_cost() {
        let u = fixtures::identity(3, 3);
        let trace = run_permutation_ptl2(&u, Mode::Enumerate).unwrap();
        assert_eq!(trace.ledger.ebits, 0.0);
        assert_eq!(trace.ledger.cbits, 0.0);
        assert!(verify_channel(&trace, &u).pass);
    }

    #[test]
    fn standard_gates() {
        for u in [fixtures::cnot(), fixtures::dcnot(), fixtures::swap2()] {
            let trace = run_permutation_ptl2(&u, Mode::Enumerate).unwrap();
            let v = verify_channel(&trace, &u);
            assert!(v.pass, "distance {} anc {}", v.max_distance, v.max_ancilla_deviation);
        }
    }

    #[test]
    fn m_family_under_bell_bound() {
        let u = fixtures::m_family(3).unwrap();
        let trace = run_permutation_ptl2(&u, Mode::Enumerate).unwrap();
        let bound = (15.0f64 * 3.0 * 8.0).log2(); // log2(B_4 · r · 2^r)
        assert!(trace.ledger.ebits <= bound + 1e-9);
        assert!(verify_channel(&trace, &u).pass);
    }

    #[test]
    fn rejects_non_permutations() {
        let u = fixtures::example1(&[0.0, 1.0], &[]).unwrap();
        assert!(run_permutation_ptl2(&u, Mode::Enumerate).is_err());
    }
}
