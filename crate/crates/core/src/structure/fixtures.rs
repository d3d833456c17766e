//! Generators for the operator families used across the test and acceptance
//! suites: the standard two-qubit gates, the maximal-block-count family, the
//! Schmidt-rank-3 families with anticommuting or genuinely varying blocks,
//! the rank-4 transposition example, and assorted controlled shapes.

use crate::core_linalg::{ident, perm_matrix, zeros, BipartiteOp, CMatrix, C64};
use crate::error::{Error, Result};
use serde_json::Value;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Embeds `dB×dB` blocks into a `dA·dB` square matrix; `blocks[y][x]` is the
/// block at big row `y`, big column `x` (`None` for a zero block).
pub fn from_blocks(d_a: usize, d_b: usize, blocks: &[Vec<Option<CMatrix>>]) -> Result<BipartiteOp> {
    let mut m = zeros(d_a * d_b, d_a * d_b);
    for (y, row) in blocks.iter().enumerate() {
        for (x, blk) in row.iter().enumerate() {
            if let Some(b) = blk {
                if b.nrows() != d_b || b.ncols() != d_b {
                    return Err(Error::BadFixture("block size mismatch".into()));
                }
                for r in 0..d_b {
                    for cc in 0..d_b {
                        m[(y * d_b + r, x * d_b + cc)] = b[(r, cc)];
                    }
                }
            }
        }
    }
    BipartiteOp::new(d_a, d_b, m)
}

/// A block-diagonal (computational-basis controlled from A) unitary with the
/// given per-level B-side operators.
pub fn controlled_from_a(ops: &[CMatrix]) -> Result<BipartiteOp> {
    let d_a = ops.len();
    let d_b = ops[0].nrows();
    let blocks: Vec<Vec<Option<CMatrix>>> = (0..d_a)
        .map(|y| (0..d_a).map(|x| if x == y { Some(ops[x].clone()) } else { None }).collect())
        .collect();
    from_blocks(d_a, d_b, &blocks)
}

pub fn identity(d_a: usize, d_b: usize) -> BipartiteOp {
    BipartiteOp::new(d_a, d_b, ident(d_a * d_b)).unwrap()
}

pub fn cnot() -> BipartiteOp {
    controlled_from_a(&[ident(2), perm_matrix(&[1, 0])]).unwrap()
}

pub fn swap2() -> BipartiteOp {
    let mut m = zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            m[(b * 2 + a, a * 2 + b)] = c(1.0, 0.0);
        }
    }
    BipartiteOp::new(2, 2, m).unwrap()
}

/// DCNOT: `|a,b⟩ ↦ |b, a⊕b⟩` (CNOT A→B followed by CNOT B→A).
pub fn dcnot() -> BipartiteOp {
    let mut m = zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            m[(b * 2 + (a ^ b), a * 2 + b)] = c(1.0, 0.0);
        }
    }
    BipartiteOp::new(2, 2, m).unwrap()
}

/// The Schmidt-rank-`r` controlled-permutation family with the maximal number
/// `2^{r-1}` of distinct diagonal blocks: `dA = 2^{r-1}`, `dB = 2r-2`; level
/// `y ⊆ {2..r}` applies the product of transpositions `(2(k-2), 2(k-2)+1)`
/// for `k ∈ y`.
pub fn m_family(r: usize) -> Result<BipartiteOp> {
    if r < 2 {
        return Err(Error::BadFixture("m_family requires r ≥ 2".into()));
    }
    let d_a = 1usize << (r - 1);
    let d_b = 2 * r - 2;
    let ops: Vec<CMatrix> = (0..d_a)
        .map(|mask| {
            let mut perm: Vec<usize> = (0..d_b).collect();
            for k in 0..r - 1 {
                if mask & (1 << k) != 0 {
                    perm.swap(2 * k, 2 * k + 1);
                }
            }
            perm_matrix(&perm)
        })
        .collect();
    controlled_from_a(&ops)
}

/// Pauli matrices as 2×2 complex matrices.
pub fn pauli(which: char) -> CMatrix {
    match which {
        'x' => perm_matrix(&[1, 0]),
        'y' => {
            let mut m = zeros(2, 2);
            m[(0, 1)] = c(0.0, -1.0);
            m[(1, 0)] = c(0.0, 1.0);
            m
        }
        'z' => {
            let mut m = ident(2);
            m[(1, 1)] = c(-1.0, 0.0);
            m
        }
        _ => ident(2),
    }
}

fn direct_sum_blocks(blocks: &[CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = zeros(n, n);
    let mut off = 0;
    for b in blocks {
        for r in 0..b.nrows() {
            for cc in 0..b.ncols() {
                m[(off + r, off + cc)] = b[(r, cc)];
            }
        }
        off += b.nrows();
    }
    m
}

/// Schmidt-rank-3 family with `T1 = I`, `T2 = ⊕σz`, `T3 = ⊕(cos t_j σx + sin t_j σy)`
/// on `dB = 2n`; levels beyond the first three are
/// `cosθ T1 + i sinθ cosφ T2 + i sinθ sinφ T3`.
pub fn example1(ts: &[f64], extras: &[(f64, f64)]) -> Result<BipartiteOp> {
    let n = ts.len();
    if n == 0 {
        return Err(Error::BadFixture("example1 requires at least one t".into()));
    }
    let t2 = direct_sum_blocks(&vec![pauli('z'); n]);
    let t3_blocks: Vec<CMatrix> = ts
        .iter()
        .map(|&t| {
            let mut m = zeros(2, 2);
            m[(0, 1)] = c(t.cos(), -t.sin());
            m[(1, 0)] = c(t.cos(), t.sin());
            m
        })
        .collect();
    let t3 = direct_sum_blocks(&t3_blocks);
    let d_b = 2 * n;
    let mut ops = vec![ident(d_b), t2.clone(), t3.clone()];
    for &(theta, phi) in extras {
        let a = c(theta.cos(), 0.0);
        let b = c(0.0, theta.sin() * phi.cos());
        let d = c(0.0, theta.sin() * phi.sin());
        ops.push(cscale(&ident(d_b), a) + cscale(&t2, b) + cscale(&t3, d));
    }
    controlled_from_a(&ops)
}

fn cscale(m: &CMatrix, z: C64) -> CMatrix {
    m.map(|e| e * z)
}

/// Schmidt-rank-3 family with genuinely different 2×2 blocks: the `T2`/`T3`
/// pair built from per-block parameters `b_k ∈ (0,1)` and a shared `t ∈ (0,1)`,
/// with level coefficients driven by `y_j > 1/t`. The subspace where both are
/// diagonal is empty by construction. At least three distinct `y` values are
/// needed for the level operators to span three dimensions.
pub fn example2(t: f64, ys: &[f64], bs: &[f64]) -> Result<BipartiteOp> {
    if !(0.0 < t && t < 1.0) {
        return Err(Error::BadFixture("example2 requires t in (0,1)".into()));
    }
    if ys.len() < 3 || bs.is_empty() {
        return Err(Error::BadFixture(
            "example2 requires at least three y values (for Schmidt rank 3) and one b".into(),
        ));
    }
    if ys.iter().any(|&y| y <= 1.0 / t) {
        return Err(Error::BadFixture("example2 requires every y > 1/t".into()));
    }
    if bs.iter().any(|&b| !(0.0 < b && b < 1.0)) {
        return Err(Error::BadFixture("example2 requires every b in (0,1)".into()));
    }
    let mut t2_blocks = Vec::new();
    let mut t3_blocks = Vec::new();
    for &b in bs {
        let t2k = c((1.0 - b * b).sqrt(), b);
        let d3k = c(t * b * ((1.0 - b) / (1.0 + b)).sqrt(), t * b);
        let w = (1.0 - d3k.norm_sqr()).max(0.0).sqrt();
        let mut t2b = zeros(2, 2);
        t2b[(0, 0)] = t2k;
        t2b[(1, 1)] = -t2k.conj();
        t2_blocks.push(t2b);
        let mut t3b = zeros(2, 2);
        t3b[(0, 0)] = d3k;
        t3b[(1, 1)] = -d3k.conj();
        t3b[(0, 1)] = c(w, 0.0);
        t3b[(1, 0)] = c(w, 0.0);
        t3_blocks.push(t3b);
    }
    let t2 = direct_sum_blocks(&t2_blocks);
    let t3 = direct_sum_blocks(&t3_blocks);
    let d_b = 2 * bs.len();
    let ops: Vec<CMatrix> = ys
        .iter()
        .map(|&y| {
            let denom = ((1.0 + y * y) * (t * y - 1.0).powi(2) + t * t * y * y).sqrt();
            let c1 = (t * y - 1.0) / denom;
            let c2 = c(0.0, c1 * t * y / (t * y - 1.0));
            let c3 = c(0.0, c1 * y);
            cscale(&ident(d_b), c(c1, 0.0)) + cscale(&t2, c2) + cscale(&t3, c3)
        })
        .collect();
    let u = controlled_from_a(&ops)?;
    u.check_unitary(1e-9).map_err(|_| {
        Error::BadFixture("example2 parameters produced a non-unitary operator".into())
    })?;
    let rank = crate::core_linalg::operator_schmidt(&u, crate::DEFAULT_TOL)?.rank();
    if rank != 3 {
        return Err(Error::BadFixture(format!(
            "example2 y values are too degenerate: Schmidt rank {rank} ≠ 3"
        )));
    }
    Ok(u)
}

/// The 3×2 product ⊕ two-term example:
/// `U = [|0⟩⟨0| ⊗ X] ⊕_A [(|1⟩⟨1|+|2⟩⟨2|) ⊗ |0⟩⟨0| + (|1⟩⟨2|+|2⟩⟨1|) ⊗ |1⟩⟨1|]`.
pub fn uketbra11() -> BipartiteOp {
    let mut m = zeros(6, 6);
    let one = c(1.0, 0.0);
    // |0⟩⟨0| ⊗ X
    m[(1, 0)] = one;
    m[(0, 1)] = one;
    // (|1⟩⟨1|+|2⟩⟨2|) ⊗ |0⟩⟨0|
    m[(2, 2)] = one;
    m[(4, 4)] = one;
    // (|1⟩⟨2|+|2⟩⟨1|) ⊗ |1⟩⟨1|
    m[(3, 5)] = one;
    m[(5, 3)] = one;
    BipartiteOp::new(3, 2, m).unwrap()
}

/// The Schmidt-rank-4 permutation unitary on a 5×6 system built from the
/// mutual transposition blocks `T1..T4`.
pub fn example4() -> BipartiteOp {
    let one = c(1.0, 0.0);
    let mut t1 = zeros(6, 6);
    for i in 0..3 {
        t1[(i, i)] = one;
    }
    let mut t2 = zeros(6, 6);
    for i in 0..3 {
        t2[(i, i + 3)] = one;
    }
    let t3 = t2.transpose();
    let mut t4 = zeros(6, 6);
    t4[(3, 4)] = one;
    t4[(4, 3)] = one;
    t4[(5, 5)] = one;
    let z = || None;
    let s = |m: &CMatrix| Some(m.clone());
    from_blocks(
        5,
        6,
        &[
            vec![s(&t1), s(&t3), z(), z(), z()],
            vec![s(&t2), z(), s(&t3), z(), z()],
            vec![z(), s(&t2), z(), s(&t3), z()],
            vec![z(), z(), s(&t2), z(), s(&t3)],
            vec![z(), z(), z(), s(&t2), s(&t4)],
        ],
    )
    .unwrap()
}

/// Cyclic shift permutation of order `n` (no fixed points for n ≥ 2).
fn cycle(n: usize) -> CMatrix {
    let perm: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    perm_matrix(&perm)
}

/// Three-term controlled permutation of the shape used for entangling-power
/// case analysis: `D1⊗I + D2⊗(I_m⊕I_n⊕V1⊕V2) + D3⊗(I_m⊕V3⊕I_q⊕V4)` with
/// cyclic `V`'s. `p = 0` gives the case-(I.1) family; `V2 = V4` the (I.3) one.
pub fn ud1_family(m: usize, n: usize, q: usize, p: usize) -> Result<BipartiteOp> {
    if n < 2 || q < 2 {
        return Err(Error::BadFixture("ud1_family requires n, q ≥ 2".into()));
    }
    if p == 1 {
        return Err(Error::BadFixture("ud1_family requires p = 0 or p ≥ 2".into()));
    }
    let d_b = m + n + q + p;
    let im = ident(m);
    let op2 = direct_sum_blocks(&[im.clone(), ident(n), cycle(q), if p > 0 { cycle(p) } else { ident(0) }]);
    let op3 = direct_sum_blocks(&[im, cycle(n), ident(q), if p > 0 { cycle(p) } else { ident(0) }]);
    let _ = d_b;
    controlled_from_a(&[ident(m + n + q + p), op2, op3])
}

/// Four-term Schmidt-rank-3 controlled permutation:
/// `D1⊗I + D2⊗(I_m⊕I_n⊕V1) + D3⊗(I_m⊕V2⊕I_q) + D4⊗(I_m⊕V2⊕V1)`.
pub fn perm_u_4terms(m: usize, n: usize, q: usize) -> Result<BipartiteOp> {
    if n < 2 || q < 2 {
        return Err(Error::BadFixture("perm_u_4terms requires n, q ≥ 2".into()));
    }
    let v1 = cycle(q);
    let v2 = cycle(n);
    let op1 = ident(m + n + q);
    let op2 = direct_sum_blocks(&[ident(m), ident(n), v1.clone()]);
    let op3 = direct_sum_blocks(&[ident(m), v2.clone(), ident(q)]);
    let op4 = direct_sum_blocks(&[ident(m), v2, v1]);
    controlled_from_a(&[op1, op2, op3, op4])
}

/// A rank-4 complex-permutation shape with one big row of `r−1 = 3` projector
/// blocks plus a product part, exercising the `(Q⊗P) ⊕_A …` ⊕_B decomposition.
pub fn ubigg_shaped() -> BipartiteOp {
    let one = c(1.0, 0.0);
    // dA = 3, dB = 4. B-projectors P1 = |0⟩⟨0|, P2 = |1⟩⟨1| live on span{0,1};
    // the ⊕_B part lives on span{2,3} with its own rank-2 controlled shape.
    let d_a = 3;
    let d_b = 4;
    let mut m = zeros(12, 12);
    // First bracket on B-span{0,1}:
    //   (Q ⊗ P) ⊕_A (Q1⊗P1 + Q2⊗P2) with Q = |0⟩⟨0|-part permutation on A-level 0,
    //   Q1, Q2 on A-levels {1,2}.
    // A level 0 ↔ product: Q = [1] on level 0, P = I on span{0,1}.
    m[(0 * d_b + 0, 0 * d_b + 0)] = one;
    m[(0 * d_b + 1, 0 * d_b + 1)] = one;
    // A levels 1,2: Q1 = identity on {1,2} with P1; Q2 = swap(1,2) with P2.
    m[(1 * d_b + 0, 1 * d_b + 0)] = one;
    m[(2 * d_b + 0, 2 * d_b + 0)] = one;
    m[(1 * d_b + 1, 2 * d_b + 1)] = one;
    m[(2 * d_b + 1, 1 * d_b + 1)] = one;
    // ⊕_B part on span{2,3}: U3 = Q'⊗|2⟩⟨2| + Q''⊗|3⟩⟨3| with Q' = I_3 and
    // Q'' = the 3-cycle on A.
    for a in 0..3 {
        m[(a * d_b + 2, a * d_b + 2)] = one;
        m[(((a + 1) % 3) * d_b + 3, a * d_b + 3)] = one;
    }
    BipartiteOp::new(d_a, d_b, m).unwrap()
}

/// Diagonal complex-permutation instance of the two-term complex controlled
/// form: levels apply `I` or `D2 = diag(i, i, 1, …, 1)`.
pub fn complex_two_term(d_a: usize, d_b: usize) -> Result<BipartiteOp> {
    if d_b < 2 || d_a < 2 {
        return Err(Error::BadFixture("complex_two_term requires dA, dB ≥ 2".into()));
    }
    let mut d2 = ident(d_b);
    d2[(0, 0)] = c(0.0, 1.0);
    d2[(1, 1)] = c(0.0, 1.0);
    let ops: Vec<CMatrix> = (0..d_a).map(|j| if j % 2 == 0 { ident(d_b) } else { d2.clone() }).collect();
    controlled_from_a(&ops)
}

/// Named fixture dispatch used by the CLI.
pub fn by_name(name: &str, params: &Value) -> Result<BipartiteOp> {
    let get_usize = |key: &str, default: Option<usize>| -> Result<usize> {
        match params.get(key) {
            Some(v) => v
                .as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| Error::BadFixture(format!("parameter {key} must be an integer"))),
            None => default.ok_or_else(|| Error::BadFixture(format!("missing parameter {key}"))),
        }
    };
    match name {
        "identity" => Ok(identity(get_usize("dA", Some(2))?, get_usize("dB", Some(2))?)),
        "cnot" => Ok(cnot()),
        "swap" => Ok(swap2()),
        "dcnot" => Ok(dcnot()),
        "example4" => Ok(example4()),
        "uketbra11" => Ok(uketbra11()),
        "ubigg" => Ok(ubigg_shaped()),
        "m_family" => m_family(get_usize("r", Some(3))?),
        "example1" => {
            let ts: Vec<f64> = match params.get("t") {
                Some(Value::Array(a)) => a.iter().filter_map(Value::as_f64).collect(),
                _ => vec![0.0, 1.0],
            };
            let extras: Vec<(f64, f64)> = match params.get("extras") {
                Some(Value::Array(a)) => a
                    .iter()
                    .filter_map(|p| {
                        let pair = p.as_array()?;
                        Some((pair.first()?.as_f64()?, pair.get(1)?.as_f64()?))
                    })
                    .collect(),
                _ => vec![],
            };
            example1(&ts, &extras)
        }
        "example2" => {
            let t = params.get("tparam").and_then(Value::as_f64).unwrap_or(0.5);
            let ys: Vec<f64> = match params.get("ys") {
                Some(Value::Array(a)) => a.iter().filter_map(Value::as_f64).collect(),
                _ => vec![2.5, 3.0, 4.0, 5.0, 6.5, 8.0],
            };
            let bs: Vec<f64> = match params.get("bs") {
                Some(Value::Array(a)) => a.iter().filter_map(Value::as_f64).collect(),
                _ => vec![0.4, 0.7],
            };
            example2(t, &ys, &bs)
        }
        "perm_u_4terms" => perm_u_4terms(
            get_usize("m", Some(0))?,
            get_usize("n", Some(2))?,
            get_usize("q", Some(2))?,
        ),
        "case_i1" => ud1_family(get_usize("m", Some(0))?, get_usize("n", Some(2))?, get_usize("q", Some(2))?, 0),
        "case_i3" => {
            // p > 0 with V2 = V4 happens automatically since both are cycles of
            // the same order on the same slot.
            ud1_family(
                get_usize("m", Some(0))?,
                get_usize("n", Some(2))?,
                get_usize("q", Some(2))?,
                get_usize("p", Some(2))?,
            )
        }
        "complex_two_term" => complex_two_term(get_usize("dA", Some(2))?, get_usize("dB", Some(4))?),
        _ => Err(Error::BadFixture(format!(
            "unknown fixture {name:?}; known: identity, cnot, swap, dcnot, example4, uketbra11, \
             ubigg, m_family, example1, example2, perm_u_4terms, case_i1, case_i3, complex_two_term"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_linalg::operator_schmidt;

    #[test]
    fn gate_fixtures_are_unitary_permutations() {
        for u in [cnot(), swap2(), dcnot(), example4(), uketbra11(), ubigg_shaped()] {
            assert!(u.check_unitary(1e-10).is_ok());
        }
        assert!(example4().is_permutation(1e-10));
        assert!(ubigg_shaped().is_permutation(1e-10));
    }

    #[test]
    fn dcnot_truth_table() {
        let u = dcnot();
        // |a,b⟩ ↦ |b, a⊕b⟩
        for a in 0..2usize {
            for b in 0..2usize {
                let col = a * 2 + b;
                let row = b * 2 + (a ^ b);
                assert_eq!(u.matrix[(row, col)], c(1.0, 0.0));
            }
        }
    }

    #[test]
    fn m_family_small_case() {
        let u = m_family(2).unwrap();
        assert_eq!((u.d_a, u.d_b), (2, 2));
        assert_eq!(operator_schmidt(&u, 1e-8).unwrap().rank(), 2);
    }

    #[test]
    fn example1_rank3() {
        let u = example1(&[0.0, 1.0], &[(0.7, 0.3)]).unwrap();
        assert!(u.check_unitary(1e-10).is_ok());
        assert_eq!(operator_schmidt(&u, 1e-8).unwrap().rank(), 3);
    }

    #[test]
    fn example2_rank3_and_unitary() {
        let u = example2(0.5, &[3.0, 5.0, 7.0], &[0.4, 0.7]).unwrap();
        assert_eq!((u.d_a, u.d_b), (3, 4));
        assert_eq!(operator_schmidt(&u, 1e-8).unwrap().rank(), 3);
    }

    #[test]
    fn example2_rejects_bad_params() {
        assert!(example2(0.5, &[1.0, 3.0, 4.0], &[0.4]).is_err()); // y ≤ 1/t
        assert!(example2(0.5, &[3.0, 4.0, 5.0], &[1.5]).is_err()); // b outside (0,1)
        assert!(example2(0.5, &[3.0, 5.0], &[0.4]).is_err()); // too few y values
    }

    #[test]
    fn rank3_perm_families() {
        let u = perm_u_4terms(0, 2, 2).unwrap();
        assert_eq!(operator_schmidt(&u, 1e-8).unwrap().rank(), 3);
        let v = ud1_family(0, 2, 2, 0).unwrap();
        assert_eq!(operator_schmidt(&v, 1e-8).unwrap().rank(), 3);
        let w = ud1_family(0, 2, 2, 2).unwrap();
        assert_eq!(operator_schmidt(&w, 1e-8).unwrap().rank(), 3);
        assert_eq!(operator_schmidt(&uketbra11(), 1e-8).unwrap().rank(), 3);
    }
}
