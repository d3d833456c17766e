//! Subcommand implementations.

use crate::emit::{emit_json, fmt_f64};
use crate::{Cli, Command};
use bforge_core::classical_circ::{synthesize, AncillaRegime, Gate, ReversibleMap};
use bforge_core::core_linalg::{operator_schmidt, BipartiteOp};
use bforge_core::costs::{
    bell, bound_classical, bound_controlled, bound_permutation, bound_rank3, recommend, CostReport,
};
use bforge_core::entpower::{maximize, EntPowerConfig};
use bforge_core::error::Error;
use bforge_core::locc_sim::{
    decompose_two_level, dihedral_representation, klein_from_ops, pad_with_zero_terms,
    pauli_group, run_basic_controlled, run_group_type, run_permutation_ptl2,
    run_permutation_ptl3, run_two_level, verify_channel, GroupSpec, Mode, ProtocolTrace,
};
use bforge_core::structure::{
    block_profile, detect_controlled, direct_sum_decompose, fixtures, loose_type_partition,
    partial_transpose_check, permutation_type_partitions, Side,
};
use serde_json::{json, Value};

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::BadInput(_) | Error::BadFixture(_) | Error::DimensionMismatch(_) => 3,
        _ => 2,
    }
}

fn load_op(path: &std::path::Path) -> Result<BipartiteOp, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    BipartiteOp::from_json_str(&text)
}

fn write_artifact(cli: &Cli, v: &Value, text_render: String) -> Result<(), Error> {
    let payload = if cli.format == "json" { emit_json(v) } else { text_render };
    match &cli.out {
        Some(path) => std::fs::write(path, payload)
            .map_err(|e| Error::BadInput(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{payload}");
            Ok(())
        }
    }
}

fn cost_report_json(r: &CostReport) -> Value {
    json!({
        "ebits": r.ebits,
        "cbits": r.cbits,
        "ebits_expr": r.ebits_expr.render(),
        "cbits_expr": r.cbits_expr.render(),
        "source": r.source.0,
        "protocol": r.applicable_protocol,
        "alternatives": r.alternatives.iter().map(|a| json!({
            "source": a.source.0,
            "protocol": a.protocol,
            "ebits": a.ebits.value(),
            "cbits": a.cbits.value(),
            "ebits_expr": a.ebits.render(),
        })).collect::<Vec<_>>(),
    })
}

pub fn run(cli: &Cli) -> Result<i32, Error> {
    match &cli.command {
        Command::Analyze { input } => cmd_analyze(cli, input),
        Command::Bound { input, permutation_rank, rank3, controlled_terms, classical_rank, restore } => {
            cmd_bound(cli, input.as_deref(), *permutation_rank, rank3.as_deref(), *controlled_terms, *classical_rank, *restore)
        }
        Command::Simulate { protocol, fixture, input, params, group, pad, verify, mode } => {
            cmd_simulate(cli, protocol, fixture.as_deref(), input.as_deref(), params, group, *pad, *verify, mode)
        }
        Command::Entpower { input, restarts, ancilla_dims } => {
            cmd_entpower(cli, input, *restarts, ancilla_dims.as_deref())
        }
        Command::Synthesize { truth_table, bits, regime } => cmd_synthesize(cli, truth_table, bits, regime),
        Command::Fixtures { name, r, params, sparse } => cmd_fixtures(cli, name, *r, params, *sparse),
        Command::Report => crate::report::cmd_report(cli),
    }
}

fn cmd_analyze(cli: &Cli, input: &std::path::Path) -> Result<i32, Error> {
    let u = load_op(input)?;
    if u.check_unitary(cli.tol).is_err() {
        let v = json!({
            "dA": u.d_a, "dB": u.d_b,
            "error": "input is not unitary",
            "unitary_deviation": u.unitary_deviation(),
        });
        write_artifact(cli, &v, format!("non-unitary input (deviation {:.3e})\n", u.unitary_deviation()))?;
        return Ok(3);
    }
    let sd = operator_schmidt(&u, cli.tol)?;
    let profile = block_profile(&u)?;
    let mut report = serde_json::Map::new();
    report.insert("dA".into(), json!(u.d_a));
    report.insert("dB".into(), json!(u.d_b));
    report.insert("schmidt_rank".into(), json!(sd.rank()));
    report.insert(
        "schmidt_coefficients".into(),
        json!(sd.coefficients),
    );
    report.insert("is_permutation".into(), json!(profile.is_permutation));
    report.insert("is_complex_permutation".into(), json!(profile.is_complex_permutation));
    report.insert(
        "block_grid".into(),
        json!(profile
            .nonzero_block_grid
            .iter()
            .map(|row| row.iter().map(|&b| if b { 1 } else { 0 }).collect::<Vec<_>>())
            .collect::<Vec<_>>()),
    );
    for side in [Side::A, Side::B] {
        let key = format!("controlled_from_{}", side.to_string().to_lowercase());
        match detect_controlled(&u, side)? {
            Some(f) => report.insert(key, json!({ "terms": f.n_terms() })),
            None => report.insert(key, Value::Null),
        };
    }
    let comps = direct_sum_decompose(&u, Side::A)?;
    report.insert(
        "a_direct_sum_components".into(),
        json!(comps.iter().map(|(levels, _)| levels.clone()).collect::<Vec<_>>()),
    );
    let (lhs, rhs, holds) = partial_transpose_check(&u, sd.rank());
    report.insert(
        "partial_transpose".into(),
        json!({ "rank": lhs, "rank_pt": rhs, "holds": holds }),
    );
    if profile.is_permutation {
        let info = permutation_type_partitions(&u)?;
        report.insert(
            "permutation_types".into(),
            json!({
                "input_a": info.input_a.classes,
                "relative_output_dim": info.relative_output_dim,
                "output_b": info.output_b.classes,
                "loose_a": loose_type_partition(&u, Side::A)?.classes,
                "loose_b": loose_type_partition(&u, Side::B)?.classes,
            }),
        );
    }
    let v = Value::Object(report);
    let mut text = format!(
        "operator {}x{}: Schmidt rank {}\npermutation: {}\n",
        u.d_a,
        u.d_b,
        sd.rank(),
        profile.is_permutation
    );
    text.push_str(&format!("partial transpose: rank {lhs} vs {rhs}, inequality holds: {holds}\n"));
    write_artifact(cli, &v, text)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_bound(
    cli: &Cli,
    input: Option<&std::path::Path>,
    permutation_rank: Option<usize>,
    rank3: Option<&[usize]>,
    controlled_terms: Option<usize>,
    classical_rank: Option<usize>,
    restore: bool,
) -> Result<i32, Error> {
    let mut out = serde_json::Map::new();
    if let Some(path) = input {
        let u = load_op(path)?;
        out.insert("recommendation".into(), cost_report_json(&recommend(&u)?));
    }
    if let Some(r) = permutation_rank {
        out.insert("permutation".into(), cost_report_json(&bound_permutation(r)?));
        out.insert(
            "bell_numbers".into(),
            json!((1..=r + 1).map(|i| bell(i).to_string()).collect::<Vec<_>>()),
        );
    }
    if let Some(dims) = rank3 {
        out.insert("rank3".into(), cost_report_json(&bound_rank3(dims[0], dims[1])?));
    }
    if let Some(n) = controlled_terms {
        out.insert("controlled".into(), cost_report_json(&bound_controlled(n)?));
    }
    if let Some(r) = classical_rank {
        out.insert(
            "classical_cnots".into(),
            json!({ "rank": r, "restore": restore, "bound": bound_classical(r, restore)? }),
        );
    }
    if out.is_empty() {
        return Err(Error::BadInput("bound: nothing requested; pass --input or a formula flag".into()));
    }
    let v = Value::Object(out);
    let text = emit_json(&v);
    write_artifact(cli, &v, text)?;
    Ok(0)
}

fn fixture_from_args(name: Option<&str>, input: Option<&std::path::Path>, params: &str) -> Result<BipartiteOp, Error> {
    match (name, input) {
        (Some(n), _) => {
            let p: Value = serde_json::from_str(params).map_err(|e| Error::Parse(format!("--params: {e}")))?;
            fixtures::by_name(n, &p)
        }
        (None, Some(path)) => load_op(path),
        (None, None) => Err(Error::BadInput("pass --fixture or --input".into())),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    cli: &Cli,
    protocol: &str,
    fixture: Option<&str>,
    input: Option<&std::path::Path>,
    params: &str,
    group: &str,
    pad: usize,
    verify: bool,
    mode: &str,
) -> Result<i32, Error> {
    let u = fixture_from_args(fixture, input, params)?;
    let mode = match mode {
        "sample" => Mode::Sample(cli.seed),
        _ => Mode::Enumerate,
    };
    let trace: ProtocolTrace = match protocol {
        "ct" | "ct-ext" => {
            let mut form = None;
            for side in [Side::A, Side::B] {
                if let Some(f) = detect_controlled(&u, side)? {
                    form = Some(f);
                    break;
                }
            }
            let form = form.ok_or(Error::NotControlled { side: "either" })?;
            if protocol == "ct-ext" {
                let padded = pad_with_zero_terms(&form, pad);
                bforge_core::locc_sim::run_basic_controlled_with(
                    &padded,
                    &bforge_core::locc_sim::ControlledRunOptions {
                        allow_zero_terms: true,
                        mode,
                        skip_final_correction: false,
                    },
                )?
            } else {
                run_basic_controlled(&form, false)?
            }
        }
        "two-level" => {
            let d = decompose_two_level(&u)?;
            let mixed = d.has_a_controlled();
            run_two_level(&u, &d, mixed, mode)?
        }
        "group" => {
            let spec: GroupSpec = match group {
                "klein" => {
                    if u.d_a < 3 {
                        return Err(Error::BadInput("klein group expects a controlled fixture with ≥ 3 levels".into()));
                    }
                    klein_from_ops(&u.block(1, 1), &u.block(2, 2), Side::B)?
                }
                "dihedral" => dihedral_representation(u.d_b)?,
                "trivial" => GroupSpec {
                    order: 1,
                    table: vec![vec![0]],
                    side: Side::A,
                    rep: vec![bforge_core::core_linalg::ident(u.d_a)],
                    coeffs: None,
                },
                _ => pauli_group(u.d_a, Side::A),
            };
            run_group_type(&u, &spec, mode)?
        }
        "ptl2" => run_permutation_ptl2(&u, mode)?,
        "ptl3" => run_permutation_ptl3(&u, mode)?,
        other => {
            return Err(Error::BadInput(format!(
                "unknown protocol {other:?}; known: ct, ct-ext, two-level, group, ptl2, ptl3"
            )))
        }
    };
    let verdict = verify_channel(&trace, &u);
    let mut v = trace.to_json();
    if let Some(obj) = v.as_object_mut() {
        obj.insert(
            "verdict".into(),
            json!({
                "max_choi_distance": verdict.max_distance,
                "max_ancilla_deviation": verdict.max_ancilla_deviation,
                "total_probability": verdict.total_probability,
                "pass": verdict.pass,
            }),
        );
    }
    let text = format!(
        "protocol {} on {}x{}: ebits {} cbits {} branches {} distance {} pass {}\n",
        trace.protocol,
        u.d_a,
        u.d_b,
        fmt_f64(trace.ledger.ebits),
        fmt_f64(trace.ledger.cbits),
        trace.branches.len(),
        fmt_f64(verdict.max_distance),
        verdict.pass
    );
    write_artifact(cli, &v, text)?;
    Ok(if verify && !verdict.pass { 2 } else { 0 })
}

fn cmd_entpower(
    cli: &Cli,
    input: &std::path::Path,
    restarts: usize,
    ancilla_dims: Option<&[usize]>,
) -> Result<i32, Error> {
    let u = load_op(input)?;
    let cfg = EntPowerConfig {
        restarts,
        seed: cli.seed,
        d_ra: ancilla_dims.map(|d| d[0]),
        d_rb: ancilla_dims.map(|d| d[1]),
        ..Default::default()
    };
    let r = maximize(&u, &cfg)?;
    let v = json!({
        "best_value": r.best_value,
        "restarts": r.restarts,
        "converged": r.converged,
        "history_top": r.history.iter().take(8).copied().collect::<Vec<_>>(),
        "ancilla_dims": [r.best_input.d_ra, r.best_input.d_rb],
    });
    let text = format!("entangling power ≈ {} ({} restarts, converged: {})\n", fmt_f64(r.best_value), r.restarts, r.converged);
    write_artifact(cli, &v, text)?;
    Ok(0)
}

fn cmd_synthesize(cli: &Cli, truth_table: &std::path::Path, bits: &[usize], regime: &str) -> Result<i32, Error> {
    if bits.len() != 2 {
        return Err(Error::BadInput("--bits expects n,m".into()));
    }
    let text = std::fs::read_to_string(truth_table)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", truth_table.display())))?;
    let map = ReversibleMap::from_text(bits[0], bits[1], &text)?;
    let regime = match regime {
        "restore" => AncillaRegime::Restore,
        _ => AncillaRegime::NoRestore,
    };
    let s = synthesize(&map, regime)?;
    let gates: Vec<Value> = s
        .gates
        .iter()
        .map(|g| match g {
            Gate::Local { owner, bits, label, .. } => json!({
                "type": "local",
                "party": match owner { bforge_core::classical_circ::Owner::A => "A", _ => "B" },
                "wires": bits,
                "label": label,
            }),
            Gate::Cnot { control, target } => json!({
                "type": "cnot", "control": control, "target": target,
            }),
        })
        .collect();
    let rank = bforge_core::classical_circ::classical_schmidt_rank(&map)?;
    let v = json!({
        "n_bits_a": map.n_bits_a,
        "m_bits_b": map.m_bits_b,
        "schmidt_rank": rank,
        "regime": match s.regime { AncillaRegime::Restore => "restore", _ => "no_restore" },
        "nonlocal_cnots": s.nonlocal_count,
        "bound": bound_classical(rank, s.regime == AncillaRegime::Restore)?,
        "wires": s.wires.iter().map(|w| json!({
            "owner": match w.owner { bforge_core::classical_circ::Owner::A => "A", _ => "B" },
            "name": w.name,
        })).collect::<Vec<_>>(),
        "gates": gates,
    });
    let text = format!(
        "rank {} map: {} nonlocal CNOTs ({} regime), bound {}\n",
        rank,
        s.nonlocal_count,
        match s.regime { AncillaRegime::Restore => "restore", _ => "no-restore" },
        bound_classical(rank, s.regime == AncillaRegime::Restore)?
    );
    write_artifact(cli, &v, text)?;
    Ok(0)
}

fn cmd_fixtures(cli: &Cli, name: &str, r: Option<usize>, params: &str, sparse: bool) -> Result<i32, Error> {
    let mut p: Value = serde_json::from_str(params).map_err(|e| Error::Parse(format!("--params: {e}")))?;
    if let Some(rv) = r {
        p.as_object_mut()
            .ok_or_else(|| Error::Parse("--params must be a JSON object".into()))?
            .insert("r".into(), json!(rv));
    }
    let u = fixtures::by_name(name, &p)?;
    let v = if sparse { u.to_json_sparse(cli.tol)? } else { u.to_json() };
    let text = format!("fixture {} ({}x{})\n", name, u.d_a, u.d_b);
    write_artifact(cli, &v, text)?;
    Ok(0)
}
