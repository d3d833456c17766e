//! Synthesis of bipartite classical reversible maps into local reversible
//! gates plus counted nonlocal CNOTs, under both ancilla regimes: type
//! information crosses the cut as CNOT-copied bits, outputs are computed
//! reversibly beside kept inputs, and (in the restore regime) every copy and
//! scratch register is erased by a second pass driven by the inverse map.

use super::map::ReversibleMap;
use crate::core_linalg::operator_schmidt;
use crate::error::{Error, Result};
use crate::structure::{loose_type_partition, permutation_type_partitions, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AncillaRegime {
    Restore,
    NoRestore,
}

#[derive(Debug, Clone)]
pub struct Wire {
    pub owner: Owner,
    pub name: String,
}

/// A gate in the synthesized circuit: an arbitrary local reversible gate on
/// one party's wires, or a nonlocal CNOT across the cut.
#[derive(Debug, Clone)]
pub enum Gate {
    Local {
        owner: Owner,
        /// Wire indices, most significant first in the table index.
        bits: Vec<usize>,
        /// Bijection on `2^bits.len()` values.
        table: Vec<usize>,
        label: String,
    },
    Cnot { control: usize, target: usize },
}

#[derive(Debug, Clone)]
pub struct CnotSynthesis {
    pub regime: AncillaRegime,
    pub wires: Vec<Wire>,
    /// Wire indices of the A data bits (most significant first); outputs land
    /// here after replay. Same for B.
    pub data_a: Vec<usize>,
    pub data_b: Vec<usize>,
    pub gates: Vec<Gate>,
    pub nonlocal_count: usize,
}

impl CnotSynthesis {
    pub fn n_wires(&self) -> usize {
        self.wires.len()
    }
}

/// Schmidt rank of the map's permutation unitary.
pub fn classical_schmidt_rank(map: &ReversibleMap) -> Result<usize> {
    Ok(operator_schmidt(&map.to_bipartite_op(), crate::DEFAULT_TOL)?.rank())
}

/// Deterministic replay of a synthesis on one input (A bits high, B low).
pub fn replay(s: &CnotSynthesis, input: usize) -> Result<usize> {
    let width = s.data_a.len() + s.data_b.len();
    if input >= (1usize << width) {
        return Err(Error::BadInput(format!("input {input} exceeds {width} bits")));
    }
    let state = replay_state(s, input)?;
    let mut out = 0usize;
    for &w in s.data_a.iter().chain(s.data_b.iter()) {
        out = (out << 1) | ((state >> w) & 1) as usize;
    }
    Ok(out)
}

/// Replays and returns the full wire state (bit `w` of the result is wire w).
fn replay_state(s: &CnotSynthesis, input: usize) -> Result<u64> {
    let width = s.data_a.len() + s.data_b.len();
    let mut state: u64 = 0;
    for (pos, &w) in s.data_a.iter().chain(s.data_b.iter()).enumerate() {
        let bit = (input >> (width - 1 - pos)) & 1;
        state |= (bit as u64) << w;
    }
    for g in &s.gates {
        match g {
            Gate::Local { owner, bits, table, .. } => {
                for &b in bits {
                    if s.wires[b].owner != *owner {
                        return Err(Error::BadInput(format!("local gate touches the other party's wire {b}")));
                    }
                }
                let mut idx = 0usize;
                for &b in bits {
                    idx = (idx << 1) | (((state >> b) & 1) as usize);
                }
                let new = table[idx];
                for (pos, &b) in bits.iter().enumerate() {
                    let bit = (new >> (bits.len() - 1 - pos)) & 1;
                    state = (state & !(1u64 << b)) | ((bit as u64) << b);
                }
            }
            Gate::Cnot { control, target } => {
                if s.wires[*control].owner == s.wires[*target].owner {
                    return Err(Error::BadInput("CNOT does not cross the cut".into()));
                }
                let c = (state >> control) & 1;
                state ^= c << target;
            }
        }
    }
    Ok(state)
}

fn bits_for(count: usize) -> usize {
    if count <= 1 {
        0
    } else {
        (usize::BITS - (count - 1).leading_zeros()) as usize
    }
}

// ---------------------------------------------------------------------------
// Derived type tables.

struct Tables {
    n: usize,
    m: usize,
    // loose types of the map and its inverse
    lam_a: Vec<usize>,
    lam_b: Vec<usize>,
    lam_a2: Vec<usize>,
    lam_b2: Vec<usize>,
    dla: usize,
    dlb: usize,
    dla2: usize,
    dlb2: usize,
    y_of: Vec<Vec<usize>>,
    bp_of: Vec<Vec<usize>>,
    x_of: Vec<Vec<usize>>,
    b_of: Vec<Vec<usize>>,
    // strict types
    tau: Vec<usize>,
    d_in: usize,
    d_rel: usize,
    omega: Vec<usize>,
    d_out: usize,
    rho_of: Vec<Vec<usize>>,
    bps_of: Vec<Vec<usize>>,
    y_strict: Vec<Vec<usize>>,
    x_strict: Vec<Vec<Vec<usize>>>,
    b_inv: Vec<Vec<Vec<usize>>>,
    erase: Vec<Vec<(usize, usize)>>,
}

fn build_tables(map: &ReversibleMap) -> Result<Tables> {
    let n = map.n_bits_a;
    let m = map.m_bits_b;
    let da = 1usize << n;
    let db = 1usize << m;
    let split = |v: usize| (v >> m, v & (db - 1));
    let fwd = |x: usize, b: usize| split(map.table[(x << m) | b]);
    let mut inv_table = vec![0usize; da * db];
    for (i, &o) in map.table.iter().enumerate() {
        inv_table[o] = i;
    }
    let bwd = |y: usize, bp: usize| split(inv_table[(y << m) | bp]);

    let u = map.to_bipartite_op();
    let ud = crate::core_linalg::BipartiteOp::new(u.d_a, u.d_b, u.matrix.adjoint())?;
    let pa = loose_type_partition(&u, Side::A)?;
    let pb = loose_type_partition(&u, Side::B)?;
    let pa2 = loose_type_partition(&ud, Side::A)?;
    let pb2 = loose_type_partition(&ud, Side::B)?;
    let lam_a: Vec<usize> = (0..da).map(|x| pa.class_of(x)).collect();
    let lam_b: Vec<usize> = (0..db).map(|b| pb.class_of(b)).collect();
    let lam_a2: Vec<usize> = (0..da).map(|x| pa2.class_of(x)).collect();
    let lam_b2: Vec<usize> = (0..db).map(|b| pb2.class_of(b)).collect();

    let consist = |rows: usize, cols_types: usize, lam: &[usize], f: &dyn Fn(usize, usize) -> usize, arg_count: usize| -> Result<Vec<Vec<usize>>> {
        let mut out = vec![vec![usize::MAX; cols_types]; rows];
        for x in 0..rows {
            for arg in 0..arg_count {
                let v = f(x, arg);
                let slot = &mut out[x][lam[arg]];
                if *slot == usize::MAX {
                    *slot = v;
                } else if *slot != v {
                    return Err(Error::ProtocolFailure {
                        step: "classical tables",
                        detail: "output varies within a loose type class".into(),
                    });
                }
            }
        }
        Ok(out)
    };
    let y_of = consist(da, pb.len(), &lam_b, &|x, b| fwd(x, b).0, db)?;
    let bp_of = consist(db, pa.len(), &lam_a, &|b, x| fwd(x, b).1, da)?;
    let x_of = consist(da, pb2.len(), &lam_b2, &|y, bp| bwd(y, bp).0, db)?;
    let b_of = consist(db, pa2.len(), &lam_a2, &|bp, y| bwd(y, bp).1, da)?;

    // Strict type machinery via the quantum type partitions.
    let info = permutation_type_partitions(&u)?;
    let tau: Vec<usize> = (0..da).map(|x| info.input_a.class_of(x)).collect();
    let d_in = info.input_a.len();
    let d_rel = info.relative_output_dim;
    let omega: Vec<usize> = (0..db).map(|b| info.output_b.class_of(b)).collect();
    let d_out = info.output_b.len();

    // Canonical block order per strict type, as in the quantum protocol:
    // blocks of a member column keyed by their (row-relabeled) fingerprints.
    let mut rho_of = vec![vec![usize::MAX; db]; d_in];
    let mut bps_of = vec![vec![usize::MAX; db]; d_in];
    for cls in 0..d_in {
        let x0 = info.input_a.classes[cls][0];
        let mut blocks: Vec<(Vec<(usize, usize)>, usize)> = Vec::new();
        for b in 0..db {
            let (y, bp) = fwd(x0, b);
            match blocks.iter_mut().find(|(_, yy)| *yy == y) {
                Some((fp, _)) => fp.push((bp, b)),
                None => blocks.push((vec![(bp, b)], y)),
            }
        }
        let mut fps: Vec<Vec<(usize, usize)>> = blocks
            .into_iter()
            .map(|(mut fp, _)| {
                fp.sort_unstable();
                fp
            })
            .collect();
        fps.sort();
        for (rho, fp) in fps.iter().enumerate() {
            for &(bp, b) in fp {
                rho_of[cls][b] = rho;
                bps_of[cls][b] = bp;
            }
        }
        // consistency across members
        for &x in &info.input_a.classes[cls] {
            for b in 0..db {
                if fwd(x, b).1 != bps_of[cls][b] {
                    return Err(Error::ProtocolFailure {
                        step: "classical tables",
                        detail: "B output varies within a strict input type".into(),
                    });
                }
            }
        }
    }

    let mut y_strict = vec![vec![usize::MAX; d_rel]; da];
    for x in 0..da {
        for b in 0..db {
            let rho = rho_of[tau[x]][b];
            let (y, _) = fwd(x, b);
            let slot = &mut y_strict[x][rho];
            if *slot == usize::MAX {
                *slot = y;
            } else if *slot != y {
                return Err(Error::ProtocolFailure {
                    step: "classical tables",
                    detail: "block ordinal maps one column to two rows".into(),
                });
            }
        }
    }
    // x from (y; τ, ρ): the inverse of x ↦ y_strict[x][ρ] within type τ.
    let mut x_strict = vec![vec![vec![usize::MAX; da]; d_rel]; d_in];
    for x in 0..da {
        for rho in 0..d_rel {
            let y = y_strict[x][rho];
            if y != usize::MAX {
                x_strict[tau[x]][rho][y] = x;
            }
        }
    }
    // b from (τ, ρ, b'): invert the block action.
    let mut b_inv = vec![vec![vec![usize::MAX; db]; d_rel]; d_in];
    for cls in 0..d_in {
        for b in 0..db {
            let rho = rho_of[cls][b];
            let bp = bps_of[cls][b];
            b_inv[cls][rho][bp] = b;
        }
    }
    // (τ, ρ) from (y, ω).
    let mut erase = vec![vec![(usize::MAX, usize::MAX); d_out]; da];
    for x in 0..da {
        for b in 0..db {
            let (y, bp) = fwd(x, b);
            let om = omega[bp];
            let pair = (tau[x], rho_of[tau[x]][b]);
            let slot = &mut erase[y][om];
            if *slot == (usize::MAX, usize::MAX) {
                *slot = pair;
            } else if *slot != pair {
                return Err(Error::ProtocolFailure {
                    step: "classical tables",
                    detail: "(τ, ρ) is not a function of (output level, output type)".into(),
                });
            }
        }
    }

    Ok(Tables {
        n,
        m,
        lam_a,
        lam_b,
        lam_a2,
        lam_b2,
        dla: pa.len(),
        dlb: pb.len(),
        dla2: pa2.len(),
        dlb2: pb2.len(),
        y_of,
        bp_of,
        x_of,
        b_of,
        tau,
        d_in,
        d_rel,
        omega,
        d_out,
        rho_of,
        bps_of,
        y_strict,
        x_strict,
        b_inv,
        erase,
    })
}

// ---------------------------------------------------------------------------
// Circuit builder.

struct Builder {
    wires: Vec<Wire>,
    gates: Vec<Gate>,
    nonlocal: usize,
}

impl Builder {
    fn new() -> Self {
        Builder { wires: Vec::new(), gates: Vec::new(), nonlocal: 0 }
    }

    fn reg(&mut self, owner: Owner, name: &str, width: usize) -> Vec<usize> {
        (0..width)
            .map(|i| {
                self.wires.push(Wire { owner, name: format!("{name}[{i}]") });
                self.wires.len() - 1
            })
            .collect()
    }

    /// `targets ^= f(controls)`, an always-reversible local gate.
    fn xor_in(&mut self, owner: Owner, controls: &[usize], targets: &[usize], f: impl Fn(usize) -> usize, label: &str) {
        let cw = controls.len();
        let tw = targets.len();
        let size = 1usize << (cw + tw);
        let mut table = Vec::with_capacity(size);
        for idx in 0..size {
            let c = idx >> tw;
            let t = idx & ((1 << tw) - 1);
            table.push((c << tw) | (t ^ (f(c) & ((1 << tw) - 1))));
        }
        let mut bits = controls.to_vec();
        bits.extend_from_slice(targets);
        self.gates.push(Gate::Local { owner, bits, table, label: label.to_string() });
    }

    fn swap_regs(&mut self, owner: Owner, a: &[usize], b: &[usize], label: &str) {
        assert_eq!(a.len(), b.len());
        let w = a.len();
        let size = 1usize << (2 * w);
        let mut table = Vec::with_capacity(size);
        for idx in 0..size {
            let hi = idx >> w;
            let lo = idx & ((1 << w) - 1);
            table.push((lo << w) | hi);
        }
        let mut bits = a.to_vec();
        bits.extend_from_slice(b);
        self.gates.push(Gate::Local { owner, bits, table, label: label.to_string() });
    }

    /// One CNOT per bit copying `src` into `dst` across the cut.
    fn cnot_copy(&mut self, src: &[usize], dst: &[usize]) {
        assert_eq!(src.len(), dst.len());
        for (&c, &t) in src.iter().zip(dst.iter()) {
            self.gates.push(Gate::Cnot { control: c, target: t });
            self.nonlocal += 1;
        }
    }
}

/// Synthesizes `map` in the requested ancilla regime and verifies the result
/// by exhaustive replay (and, in the restore regime, exhaustive ancilla
/// hygiene) before returning.
pub fn synthesize(map: &ReversibleMap, regime: AncillaRegime) -> Result<CnotSynthesis> {
    let t = build_tables(map)?;
    let s = match regime {
        AncillaRegime::NoRestore => build_no_restore(&t),
        AncillaRegime::Restore => {
            let a = build_restore_loose(&t);
            let b = build_restore_strict(&t);
            if a.nonlocal_count <= b.nonlocal_count {
                a
            } else {
                b
            }
        }
    };
    verify_synthesis(map, &s)?;
    Ok(s)
}

fn lookup2(table: &[Vec<usize>], a: usize, b: usize) -> usize {
    table.get(a).and_then(|r| r.get(b)).copied().filter(|&v| v != usize::MAX).unwrap_or(0)
}

/// Loose-type exchange, outputs computed beside kept inputs, leftovers dirty.
fn build_no_restore(t: &Tables) -> CnotSynthesis {
    let mut bld = Builder::new();
    let xa = bld.reg(Owner::A, "x", t.n);
    let xb = bld.reg(Owner::B, "b", t.m);
    let ta = bld.reg(Owner::A, "typeA", bits_for(t.dla));
    let tb = bld.reg(Owner::B, "typeB", bits_for(t.dlb));
    let rxa = bld.reg(Owner::A, "recvB", bits_for(t.dlb));
    let rxb = bld.reg(Owner::B, "recvA", bits_for(t.dla));
    let ya = bld.reg(Owner::A, "yout", t.n);
    let bb = bld.reg(Owner::B, "bout", t.m);

    let (lam_a, lam_b) = (t.lam_a.clone(), t.lam_b.clone());
    bld.xor_in(Owner::A, &xa, &ta, move |x| lam_a[x], "typeA := λA(x)");
    bld.xor_in(Owner::B, &xb, &tb, move |b| lam_b[b], "typeB := λB(b)");
    bld.cnot_copy(&ta, &rxb);
    bld.cnot_copy(&tb, &rxa);
    let y_of = t.y_of.clone();
    let mut ctl = xa.clone();
    ctl.extend_from_slice(&rxa);
    let mw = bits_for(t.dlb);
    bld.xor_in(Owner::A, &ctl, &ya, move |c| {
        let x = c >> mw;
        let mu = c & ((1 << mw) - 1);
        lookup2(&y_of, x, mu)
    }, "yout := y(x, μ)");
    let bp_of = t.bp_of.clone();
    let mut ctl = xb.clone();
    ctl.extend_from_slice(&rxb);
    let nw = bits_for(t.dla);
    bld.xor_in(Owner::B, &ctl, &bb, move |c| {
        let b = c >> nw;
        let nu = c & ((1 << nw) - 1);
        lookup2(&bp_of, b, nu)
    }, "bout := b'(b, ν)");
    bld.swap_regs(Owner::A, &xa, &ya, "x ↔ yout");
    bld.swap_regs(Owner::B, &xb, &bb, "b ↔ bout");

    CnotSynthesis {
        regime: AncillaRegime::NoRestore,
        wires: bld.wires,
        data_a: xa,
        data_b: xb,
        gates: bld.gates,
        nonlocal_count: bld.nonlocal,
    }
}

/// Loose-type compute–uncompute pass: one CNOT per transferred bit, each
/// transfer later reversed, everything restored.
fn build_restore_loose(t: &Tables) -> CnotSynthesis {
    let mut bld = Builder::new();
    let xa = bld.reg(Owner::A, "x", t.n);
    let xb = bld.reg(Owner::B, "b", t.m);
    let ta = bld.reg(Owner::A, "typeA", bits_for(t.dla));
    let tb = bld.reg(Owner::B, "typeB", bits_for(t.dlb));
    let rxa = bld.reg(Owner::A, "recvB", bits_for(t.dlb));
    let rxb = bld.reg(Owner::B, "recvA", bits_for(t.dla));
    let ya = bld.reg(Owner::A, "yout", t.n);
    let bb = bld.reg(Owner::B, "bout", t.m);
    let ta2 = bld.reg(Owner::A, "typeA'", bits_for(t.dla2));
    let tb2 = bld.reg(Owner::B, "typeB'", bits_for(t.dlb2));
    let rxa2 = bld.reg(Owner::A, "recvB'", bits_for(t.dlb2));
    let rxb2 = bld.reg(Owner::B, "recvA'", bits_for(t.dla2));

    let (lam_a, lam_b) = (t.lam_a.clone(), t.lam_b.clone());
    let (lam_a_c, lam_b_c) = (lam_a.clone(), lam_b.clone());
    bld.xor_in(Owner::A, &xa, &ta, move |x| lam_a[x], "typeA := λA(x)");
    bld.xor_in(Owner::B, &xb, &tb, move |b| lam_b[b], "typeB := λB(b)");
    bld.cnot_copy(&ta, &rxb);
    bld.cnot_copy(&tb, &rxa);

    let y_of = t.y_of.clone();
    let mw = bits_for(t.dlb);
    let mut ctl = xa.clone();
    ctl.extend_from_slice(&rxa);
    bld.xor_in(Owner::A, &ctl, &ya, move |c| lookup2(&y_of, c >> mw, c & ((1 << mw) - 1)), "yout := y(x, μ)");
    let bp_of = t.bp_of.clone();
    let nw = bits_for(t.dla);
    let mut ctl = xb.clone();
    ctl.extend_from_slice(&rxb);
    bld.xor_in(Owner::B, &ctl, &bb, move |c| lookup2(&bp_of, c >> nw, c & ((1 << nw) - 1)), "bout := b'(b, ν)");

    // Undo the copies and the local type registers.
    bld.cnot_copy(&ta, &rxb);
    bld.cnot_copy(&tb, &rxa);
    bld.xor_in(Owner::A, &xa, &ta, move |x| lam_a_c[x], "typeA ⊕= λA(x)");
    bld.xor_in(Owner::B, &xb, &tb, move |b| lam_b_c[b], "typeB ⊕= λB(b)");

    // Second pass with the inverse map's loose types.
    let (lam_a2, lam_b2) = (t.lam_a2.clone(), t.lam_b2.clone());
    let (lam_a2_c, lam_b2_c) = (lam_a2.clone(), lam_b2.clone());
    bld.xor_in(Owner::A, &ya, &ta2, move |y| lam_a2[y], "typeA' := λ'A(y)");
    bld.xor_in(Owner::B, &bb, &tb2, move |b| lam_b2[b], "typeB' := λ'B(b')");
    bld.cnot_copy(&ta2, &rxb2);
    bld.cnot_copy(&tb2, &rxa2);
    let x_of = t.x_of.clone();
    let mw2 = bits_for(t.dlb2);
    let mut ctl = ya.clone();
    ctl.extend_from_slice(&rxa2);
    bld.xor_in(Owner::A, &ctl, &xa, move |c| lookup2(&x_of, c >> mw2, c & ((1 << mw2) - 1)), "x ⊕= x(y, μ')");
    let b_of = t.b_of.clone();
    let nw2 = bits_for(t.dla2);
    let mut ctl = bb.clone();
    ctl.extend_from_slice(&rxb2);
    bld.xor_in(Owner::B, &ctl, &xb, move |c| lookup2(&b_of, c >> nw2, c & ((1 << nw2) - 1)), "b ⊕= b(b', ν')");
    bld.cnot_copy(&ta2, &rxb2);
    bld.cnot_copy(&tb2, &rxa2);
    bld.xor_in(Owner::A, &ya, &ta2, move |y| lam_a2_c[y], "typeA' ⊕= λ'A(y)");
    bld.xor_in(Owner::B, &bb, &tb2, move |b| lam_b2_c[b], "typeB' ⊕= λ'B(b')");

    bld.swap_regs(Owner::A, &xa, &ya, "x ↔ yout");
    bld.swap_regs(Owner::B, &xb, &bb, "b ↔ bout");

    CnotSynthesis {
        regime: AncillaRegime::Restore,
        wires: bld.wires,
        data_a: xa,
        data_b: xb,
        gates: bld.gates,
        nonlocal_count: bld.nonlocal,
    }
}

/// Strict-type pass mirroring the type-system protocol: two CNOTs per
/// transferred bit overall (copy in, erase back).
fn build_restore_strict(t: &Tables) -> CnotSynthesis {
    let mut bld = Builder::new();
    let xa = bld.reg(Owner::A, "x", t.n);
    let xb = bld.reg(Owner::B, "b", t.m);
    let a_reg = bld.reg(Owner::A, "a", bits_for(t.d_in));
    let ep = bld.reg(Owner::B, "e'", bits_for(t.d_in));
    let f_reg = bld.reg(Owner::B, "f", bits_for(t.d_rel));
    let fp = bld.reg(Owner::A, "f'", bits_for(t.d_rel));
    let bb = bld.reg(Owner::B, "bout", t.m);
    let ya = bld.reg(Owner::A, "yout", t.n);
    let h_reg = bld.reg(Owner::B, "h", bits_for(t.d_out));
    let hp = bld.reg(Owner::A, "h'", bits_for(t.d_out));
    let tscr = bld.reg(Owner::A, "τscr", bits_for(t.d_in));

    let tau = t.tau.clone();
    bld.xor_in(Owner::A, &xa, &a_reg, move |x| tau[x], "a := τ(x)");
    bld.cnot_copy(&a_reg, &ep);

    // Bob computes (ρ, b') and erases b.
    let rho_of = t.rho_of.clone();
    
    let mut ctl = ep.clone();
    ctl.extend_from_slice(&xb);
    let mwidth = t.m;
    bld.xor_in(Owner::B, &ctl, &f_reg, move |c| lookup2(&rho_of, c >> mwidth, c & ((1 << mwidth) - 1)), "f := ρ(τ, b)");
    let bps_of = t.bps_of.clone();
    let mut ctl = ep.clone();
    ctl.extend_from_slice(&xb);
    bld.xor_in(Owner::B, &ctl, &bb, move |c| lookup2(&bps_of, c >> mwidth, c & ((1 << mwidth) - 1)), "bout := b'(τ, b)");
    let b_inv = t.b_inv.clone();
    let relw = bits_for(t.d_rel);
    let mut ctl = ep.clone();
    ctl.extend_from_slice(&f_reg);
    ctl.extend_from_slice(&bb);
    bld.xor_in(Owner::B, &ctl, &xb, move |c| {
        let tauv = c >> (relw + mwidth);
        let rho = (c >> mwidth) & ((1 << relw) - 1);
        let bp = c & ((1 << mwidth) - 1);
        b_inv
            .get(tauv)
            .and_then(|r| r.get(rho))
            .and_then(|r| r.get(bp))
            .copied()
            .filter(|&v| v != usize::MAX)
            .unwrap_or(0)
    }, "b ⊕= T⁻¹(b')");
    bld.swap_regs(Owner::B, &xb, &bb, "b ↔ bout");

    // f crosses to Alice; she computes y and erases x.
    bld.cnot_copy(&f_reg, &fp);
    let y_strict = t.y_strict.clone();
    let mut ctl = xa.clone();
    ctl.extend_from_slice(&fp);
    bld.xor_in(Owner::A, &ctl, &ya, move |c| lookup2(&y_strict, c >> relw, c & ((1 << relw) - 1)), "yout := y(x, ρ)");
    let x_strict = t.x_strict.clone();
    let nwidth = t.n;
    let mut ctl = a_reg.clone();
    ctl.extend_from_slice(&fp);
    ctl.extend_from_slice(&ya);
    bld.xor_in(Owner::A, &ctl, &xa, move |c| {
        let tauv = c >> (relw + nwidth);
        let rho = (c >> nwidth) & ((1 << relw) - 1);
        let y = c & ((1 << nwidth) - 1);
        x_strict
            .get(tauv)
            .and_then(|r| r.get(rho))
            .and_then(|r| r.get(y))
            .copied()
            .filter(|&v| v != usize::MAX)
            .unwrap_or(0)
    }, "x ⊕= V⁻¹(y; τ, ρ)");
    bld.swap_regs(Owner::A, &xa, &ya, "x ↔ yout");

    // Output type of B crosses to Alice.
    let omega = t.omega.clone();
    let omega_c = omega.clone();
    bld.xor_in(Owner::B, &xb, &h_reg, move |b| omega[b], "h := ω(b')");
    bld.cnot_copy(&h_reg, &hp);

    // Erase Bob's f copy from Alice's, then erase (a, f') via (y, ω).
    bld.cnot_copy(&fp, &f_reg);
    let erase = t.erase.clone();
    let erase2 = erase.clone();
    let outw = bits_for(t.d_out);
    let mut ctl = xa.clone();
    ctl.extend_from_slice(&hp);
    bld.xor_in(Owner::A, &ctl, &fp, move |c| {
        let (_, rho) = erase[c >> outw][c & ((1 << outw) - 1)];
        if rho == usize::MAX {
            0
        } else {
            rho
        }
    }, "f' ⊕= ρ(y, ω)");
    // Recompute τ on a scratch register to erase Bob's e' and Alice's a.
    let mut ctl = xa.clone();
    ctl.extend_from_slice(&hp);
    bld.xor_in(Owner::A, &ctl, &tscr, move |c| {
        let (tauv, _) = erase2[c >> outw][c & ((1 << outw) - 1)];
        if tauv == usize::MAX {
            0
        } else {
            tauv
        }
    }, "τscr := τ(y, ω)");
    bld.cnot_copy(&tscr, &ep);
    // a ⊕= τscr erases a; then τscr ⊕= τ(y, ω) erases the scratch.
    let w = tscr.len();
    if w > 0 {
        let mut bits = tscr.clone();
        bits.extend_from_slice(&a_reg);
        let size = 1usize << (2 * w);
        let mut table = Vec::with_capacity(size);
        for idx in 0..size {
            let s = idx >> w;
            let a = idx & ((1 << w) - 1);
            table.push((s << w) | (a ^ s));
        }
        bld.gates.push(Gate::Local { owner: Owner::A, bits, table, label: "a ⊕= τscr".into() });
    }
    let erase3 = t.erase.clone();
    let mut ctl = xa.clone();
    ctl.extend_from_slice(&hp);
    bld.xor_in(Owner::A, &ctl, &tscr, move |c| {
        let (tauv, _) = erase3[c >> outw][c & ((1 << outw) - 1)];
        if tauv == usize::MAX {
            0
        } else {
            tauv
        }
    }, "τscr ⊕= τ(y, ω)");

    // Erase Alice's h' from Bob's h, then uncompute h.
    bld.cnot_copy(&h_reg, &hp);
    bld.xor_in(Owner::B, &xb, &h_reg, move |b| omega_c[b], "h ⊕= ω(b')");

    CnotSynthesis {
        regime: AncillaRegime::Restore,
        wires: bld.wires,
        data_a: xa,
        data_b: xb,
        gates: bld.gates,
        nonlocal_count: bld.nonlocal,
    }
}

/// Exhaustive replay against the truth table; in the restore regime also
/// checks that every non-data wire ends at 0 for every input.
fn verify_synthesis(map: &ReversibleMap, s: &CnotSynthesis) -> Result<()> {
    let width = map.total_bits();
    let data: Vec<usize> = s.data_a.iter().chain(s.data_b.iter()).copied().collect();
    for input in 0..(1usize << width) {
        let state = replay_state(s, input)?;
        let mut out = 0usize;
        for &w in &data {
            out = (out << 1) | ((state >> w) & 1) as usize;
        }
        if out != map.table[input] {
            return Err(Error::ProtocolFailure {
                step: "classical synthesis replay",
                detail: format!("input {input:0w$b}: got {out:0w$b}, want {:0w$b}", map.table[input], w = width),
            });
        }
        if s.regime == AncillaRegime::Restore {
            for w in 0..s.wires.len() {
                if !data.contains(&w) && (state >> w) & 1 != 0 {
                    return Err(Error::ProtocolFailure {
                        step: "classical synthesis hygiene",
                        detail: format!("input {input:0w$b}: ancilla {} not restored", s.wires[w].name, w = width),
                    });
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::bound_classical;

    #[test]
    fn identity_costs_nothing() {
        for regime in [AncillaRegime::Restore, AncillaRegime::NoRestore] {
            let s = synthesize(&ReversibleMap::identity(2, 2), regime).unwrap();
            assert_eq!(s.nonlocal_count, 0);
        }
    }

    #[test]
    fn cnot_map_counts() {
        let map = ReversibleMap::cnot();
        let r = classical_schmidt_rank(&map).unwrap();
        assert_eq!(r, 2);
        let s = synthesize(&map, AncillaRegime::NoRestore).unwrap();
        assert!(s.nonlocal_count <= 2);
        assert_eq!(s.nonlocal_count, 1);
        let s = synthesize(&map, AncillaRegime::Restore).unwrap();
        assert!(s.nonlocal_count <= bound_classical(r, true).unwrap());
    }

    #[test]
    fn dcnot_counts() {
        let map = ReversibleMap::dcnot();
        let r = classical_schmidt_rank(&map).unwrap();
        assert_eq!(r, 4);
        let s = synthesize(&map, AncillaRegime::NoRestore).unwrap();
        assert_eq!(s.nonlocal_count, 2);
        assert!(s.nonlocal_count <= bound_classical(r, false).unwrap());
        let s = synthesize(&map, AncillaRegime::Restore).unwrap();
        assert!(s.nonlocal_count <= bound_classical(r, true).unwrap());
    }

    #[test]
    fn replay_identity_pattern() {
        let s = synthesize(&ReversibleMap::identity(2, 2), AncillaRegime::NoRestore).unwrap();
        assert_eq!(replay(&s, 0b1010).unwrap(), 0b1010);
    }

    #[test]
    fn replay_matches_tables() {
        let s = synthesize(&ReversibleMap::cnot(), AncillaRegime::NoRestore).unwrap();
        assert_eq!(replay(&s, 0b10).unwrap(), 0b11);
        let s = synthesize(&ReversibleMap::dcnot(), AncillaRegime::Restore).unwrap();
        for a in 0..2usize {
            for b in 0..2usize {
                let want = (b << 1) | (a ^ b);
                assert_eq!(replay(&s, (a << 1) | b).unwrap(), want);
            }
        }
    }

    #[test]
    fn swap_and_m_family_maps() {
        let maps = [
            ReversibleMap::swap(),
            // m(3) family as bits: dA = 4, dB = 4
            {
                let u = crate::structure::fixtures::m_family(3).unwrap();
                let mut table = vec![0usize; 16];
                for col in 0..16 {
                    let row = (0..16).find(|&r| u.matrix[(r, col)].norm() > 0.5).unwrap();
                    table[col] = row;
                }
                ReversibleMap::new(2, 2, table).unwrap()
            },
        ];
        for map in maps {
            let r = classical_schmidt_rank(&map).unwrap();
            for regime in [AncillaRegime::Restore, AncillaRegime::NoRestore] {
                let s = synthesize(&map, regime).unwrap();
                assert!(s.nonlocal_count <= bound_classical(r, regime == AncillaRegime::Restore).unwrap());
            }
        }
    }

    #[test]
    fn regime_gap() {
        // no_restore never needs more CNOTs than restore on these fixtures.
        for map in [ReversibleMap::cnot(), ReversibleMap::dcnot(), ReversibleMap::swap()] {
            let nr = synthesize(&map, AncillaRegime::NoRestore).unwrap().nonlocal_count;
            let rs = synthesize(&map, AncillaRegime::Restore).unwrap().nonlocal_count;
            assert!(nr <= rs);
        }
    }
}
