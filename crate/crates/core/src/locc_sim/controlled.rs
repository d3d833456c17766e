//! The basic controlled-unitary protocol and its zero-padded extension.

use super::trace::ProtocolTrace;
use super::vm::{run_verification, shift_pow, Basis, Mode, Party, RegId, Sim, SimResult};
use crate::core_linalg::{ident, zeros, C64};
use crate::error::{Error, Result};
use crate::structure::{ControlledForm, Side};

#[derive(Debug, Clone)]
pub struct ControlledRunOptions {
    pub allow_zero_terms: bool,
    pub mode: Mode,
    /// Test hook: skip the final phase correction to demonstrate that the
    /// verifier catches corrupted runs.
    pub skip_final_correction: bool,
}

impl Default for ControlledRunOptions {
    fn default() -> Self {
        ControlledRunOptions { allow_zero_terms: false, mode: Mode::Enumerate, skip_final_correction: false }
    }
}

/// Runs the basic controlled-unitary protocol on a (possibly padded)
/// controlled form: `log2 N` ebits and `2 log2 N` c-bits with `N` the term
/// count including padding terms.
pub fn run_basic_controlled(form: &ControlledForm, allow_zero_terms: bool) -> Result<ProtocolTrace> {
    run_basic_controlled_with(
        form,
        &ControlledRunOptions { allow_zero_terms, ..ControlledRunOptions::default() },
    )
}

pub fn run_basic_controlled_with(form: &ControlledForm, opts: &ControlledRunOptions) -> Result<ProtocolTrace> {
    let n = form.n_terms();
    if n == 0 {
        return Err(Error::BadInput("controlled form has no terms".into()));
    }
    let zero_terms = n - form.live_terms();
    if zero_terms > 0 && !opts.allow_zero_terms {
        return Err(Error::BadInput(
            "form contains zero-operator terms; enable allow_zero_terms for the extended protocol".into(),
        ));
    }
    // Supports must partition the control basis.
    let mut seen = vec![false; form.control_dim()];
    for t in &form.terms {
        for &lvl in &t.support {
            if seen[lvl] {
                return Err(Error::BadInput(format!("control level {lvl} appears in two terms")));
            }
            seen[lvl] = true;
        }
        if !t.support.is_empty() && crate::core_linalg::unitary_deviation(&t.op) > 1e-7 {
            return Err(Error::NotUnitary { deviation: crate::core_linalg::unitary_deviation(&t.op) });
        }
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::BadInput("term supports do not cover the control basis".into()));
    }

    let form = form.clone();
    let opts = opts.clone();
    let out = run_verification(form.d_a, form.d_b, opts.mode, move |sim, a, b| {
        let (ctrl_party, ctrl_reg, tgt_party, tgt_reg) = match form.side {
            Side::A => (Party::Alice, a, Party::Bob, b),
            Side::B => (Party::Bob, b, Party::Alice, a),
        };
        // Local gauges realizing the computational-basis controlled form.
        sim.apply(Party::Alice, &[a], &form.gauge.pre_a, "pre_A")?;
        sim.apply(Party::Bob, &[b], &form.gauge.pre_b, "pre_B")?;
        run_ct_core(sim, &form, ctrl_party, ctrl_reg, tgt_party, tgt_reg, opts.skip_final_correction)?;
        sim.apply(Party::Alice, &[a], &form.gauge.post_a, "post_A")?;
        sim.apply(Party::Bob, &[b], &form.gauge.post_b, "post_B")?;
        Ok(vec![a, b])
    })?;
    Ok(ProtocolTrace::new(if zero_terms > 0 { "ct-ext" } else { "ct" }, out))
}

/// Steps 0–3 of the protocol on the gauged form `Σ_k P_k ⊗ V_k`.
fn run_ct_core(
    sim: &mut Sim,
    form: &ControlledForm,
    ctrl_party: Party,
    ctrl_reg: RegId,
    tgt_party: Party,
    tgt_reg: RegId,
    skip_final_correction: bool,
) -> SimResult<()> {
    let n = form.n_terms();
    let dc = form.control_dim();
    let dt = form.controlled_dim();

    // 0. Shared entangled state of rank N.
    let (ra, rb) = sim.share_pair("res_a", "res_b", n)?;
    let (ctrl_half, tgt_half) = match ctrl_party {
        Party::Alice => (ra, rb),
        Party::Bob => (rb, ra),
    };

    // 1. Controlled-X^{-k} on (control data, ctrl half), then measure & send.
    let mut g1 = zeros(dc * n, dc * n);
    for (k, term) in form.terms.iter().enumerate() {
        let xk = shift_pow(n, -(k as i64));
        for &lvl in &term.support {
            for r in 0..n {
                for cc in 0..n {
                    g1[(lvl * n + r, lvl * n + cc)] = xk[(r, cc)];
                }
            }
        }
    }
    sim.apply(ctrl_party, &[ctrl_reg, ctrl_half], &g1, "ctrl-X^{-k}")?;
    let l = sim.measure_and_send(ctrl_half, Basis::Computational)? as i64;

    // 2. Shift correction, controlled operator, Fourier measurement.
    sim.apply(tgt_party, &[tgt_half], &shift_pow(n, -l), "X^{-l}")?;
    let mut g2 = zeros(n * dt, n * dt);
    for k in 0..n {
        let op = form
            .terms
            .get(k)
            .filter(|t| !t.support.is_empty())
            .map(|t| t.op.clone())
            .unwrap_or_else(|| ident(dt));
        for r in 0..dt {
            for cc in 0..dt {
                g2[(k * dt + r, k * dt + cc)] = op[(r, cc)];
            }
        }
    }
    sim.apply(tgt_party, &[tgt_half, tgt_reg], &g2, "ctrl-V_k")?;
    let m = sim.measure_and_send(tgt_half, Basis::Fourier)?;

    // 3. Generalized Z^{-m} correction on the control data.
    if !skip_final_correction {
        let mut z = zeros(dc, dc);
        for (k, term) in form.terms.iter().enumerate() {
            let phase = C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (k * m) as f64 / n as f64);
            for &lvl in &term.support {
                z[(lvl, lvl)] = phase;
            }
        }
        sim.apply(ctrl_party, &[ctrl_reg], &z, "Z^{-m}")?;
    }
    Ok(())
}

/// Convenience: detect the controlled structure of `u` and run the protocol.
pub fn run_controlled_auto(u: &crate::core_linalg::BipartiteOp, mode: Mode) -> Result<ProtocolTrace> {
    for side in [Side::A, Side::B] {
        if let Some(f) = crate::structure::detect_controlled(u, side)? {
            return run_basic_controlled_with(
                &f,
                &ControlledRunOptions { allow_zero_terms: false, mode, skip_final_correction: false },
            );
        }
    }
    Err(Error::NotControlled { side: "either" })
}

/// Pads a controlled form with `extra` zero-operator terms (the operators are
/// ignored by the projector machinery and replaced with identities).
pub fn pad_with_zero_terms(form: &ControlledForm, extra: usize) -> ControlledForm {
    let mut f = form.clone();
    for _ in 0..extra {
        f.terms.push(crate::structure::ControlledTerm { support: vec![], op: ident(f.controlled_dim()) });
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locc_sim::trace::verify_channel;
    use crate::structure::{detect_controlled, fixtures};

    #[test]
    fn cnot_exact_with_one_ebit() {
        let u = fixtures::cnot();
        let f = detect_controlled(&u, Side::A).unwrap().unwrap();
        let trace = run_basic_controlled(&f, false).unwrap();
        assert!((trace.ledger.ebits - 1.0).abs() < 1e-12);
        assert!((trace.ledger.cbits - 2.0).abs() < 1e-12);
        assert_eq!(trace.branches.len(), 4);
        let v = verify_channel(&trace, &u);
        assert!(v.pass, "distance {}", v.max_distance);
        assert!(v.max_distance <= 1e-9);
    }

    #[test]
    fn single_term_protocol_degenerates() {
        let u = fixtures::identity(3, 2);
        let f = detect_controlled(&u, Side::A).unwrap().unwrap();
        assert_eq!(f.n_terms(), 1);
        let trace = run_basic_controlled(&f, false).unwrap();
        assert_eq!(trace.ledger.ebits, 0.0);
        assert!(verify_channel(&trace, &u).pass);
    }

    #[test]
    fn padded_run_still_exact() {
        let u = fixtures::cnot();
        let f = detect_controlled(&u, Side::A).unwrap().unwrap();
        let padded = pad_with_zero_terms(&f, 1);
        assert!(run_basic_controlled(&padded, false).is_err());
        let trace = run_basic_controlled(&padded, true).unwrap();
        assert!((trace.ledger.ebits - 3f64.log2()).abs() < 1e-12);
        assert!((trace.ledger.cbits - 2.0 * 3f64.log2()).abs() < 1e-12);
        assert!(verify_channel(&trace, &u).pass);
    }

    #[test]
    fn corrupted_run_fails_verification() {
        let u = fixtures::cnot();
        let f = detect_controlled(&u, Side::A).unwrap().unwrap();
        let trace = run_basic_controlled_with(
            &f,
            &ControlledRunOptions { skip_final_correction: true, ..Default::default() },
        )
        .unwrap();
        let v = verify_channel(&trace, &u);
        assert!(!v.pass);
        assert!(v.max_distance > 1e-3);
    }

    #[test]
    fn b_side_control_and_high_rank_projectors() {
        // 2-term control from B with rank-2 projectors on a 2x4 system.
        let one = C64::new(1.0, 0.0);
        let mut m = zeros(8, 8);
        for b in 0..4 {
            for a in 0..2 {
                if b < 2 {
                    m[(a * 4 + b, a * 4 + b)] = one; // identity on P-sector
                } else {
                    m[(((a + 1) % 2) * 4 + b, a * 4 + b)] = one; // X_A on P⊥
                }
            }
        }
        let u = crate::core_linalg::BipartiteOp::new(2, 4, m).unwrap();
        let f = detect_controlled(&u, Side::B).unwrap().unwrap();
        assert_eq!(f.n_terms(), 2);
        let trace = run_basic_controlled(&f, false).unwrap();
        assert!((trace.ledger.ebits - 1.0).abs() < 1e-12);
        assert!(verify_channel(&trace, &u).pass);
    }

    #[test]
    fn three_term_qutrit_control() {
        let x3 = crate::locc_sim::vm::shift(3);
        let u = fixtures::controlled_from_a(&[ident(3), x3.clone(), &x3 * &x3]).unwrap();
        let f = detect_controlled(&u, Side::A).unwrap().unwrap();
        assert_eq!(f.n_terms(), 3);
        let trace = run_basic_controlled(&f, false).unwrap();
        assert!((trace.ledger.ebits - 3f64.log2()).abs() < 1e-12);
        assert_eq!(trace.branches.len(), 9);
        assert!(verify_channel(&trace, &u).pass);
    }
}
