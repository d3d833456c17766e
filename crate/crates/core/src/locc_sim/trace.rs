//! Protocol traces: event log, resource ledger, branch records, and the
//! channel-equality verdict.

use super::vm::{Basis, Branch, Event, Ledger, RunOutput};
use crate::core_linalg::{kraus_channel_distance, BipartiteOp};
use serde_json::{json, Value};

/// Full record of one protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolTrace {
    pub protocol: String,
    pub events: Vec<Event>,
    pub ledger: Ledger,
    pub branches: Vec<Branch>,
}

impl ProtocolTrace {
    pub fn new(protocol: &str, out: RunOutput) -> Self {
        ProtocolTrace {
            protocol: protocol.to_string(),
            events: out.events,
            ledger: out.ledger,
            branches: out.branches,
        }
    }

    pub fn to_json(&self) -> Value {
        let events: Vec<Value> = self
            .events
            .iter()
            .map(|e| match e {
                Event::LocalGate { party, label, regs } => json!({
                    "type": "local-gate", "party": party.to_string(), "label": label, "regs": regs
                }),
                Event::Measurement { party, register, basis, alphabet } => json!({
                    "type": "measurement", "party": party.to_string(), "register": register,
                    "basis": match basis { Basis::Computational => "computational", Basis::Fourier => "fourier" },
                    "alphabet": alphabet
                }),
                Event::Message { from, alphabet } => json!({
                    "type": "classical-message", "from": from.to_string(), "alphabet": alphabet
                }),
                Event::ResourceConsumed { rank } => json!({
                    "type": "resource-consumed", "schmidt_rank": rank
                }),
                Event::Teleport { register, to, rank } => json!({
                    "type": "teleport", "register": register, "to": to.to_string(), "rank": rank
                }),
            })
            .collect();
        let branches: Vec<Value> = self
            .branches
            .iter()
            .map(|b| {
                json!({
                    "outcomes": b.outcomes,
                    "probability": b.probability,
                    "ancilla_deviation": b.ancilla_deviation,
                })
            })
            .collect();
        json!({
            "protocol": self.protocol,
            "ledger": { "ebits": self.ledger.ebits, "cbits": self.ledger.cbits },
            "events": events,
            "branches": branches,
        })
    }
}

/// Outcome of checking a trace against a target unitary.
#[derive(Debug, Clone)]
pub struct ChannelVerdict {
    pub max_distance: f64,
    pub max_ancilla_deviation: f64,
    pub total_probability: f64,
    pub pass: bool,
}

/// Per-branch Choi comparison after global-phase alignment: passes iff the
/// max branch distance is ≤ 1e-8 and ancilla restoration holds per branch.
pub fn verify_channel(trace: &ProtocolTrace, target: &BipartiteOp) -> ChannelVerdict {
    let mut max_distance: f64 = 0.0;
    let mut max_anc: f64 = 0.0;
    let mut total_p = 0.0;
    for b in &trace.branches {
        let d = kraus_channel_distance(&b.kraus, &target.matrix);
        max_distance = max_distance.max(d);
        max_anc = max_anc.max(b.ancilla_deviation);
        total_p += b.probability;
    }
    if trace.branches.is_empty() {
        max_distance = f64::INFINITY;
    }
    ChannelVerdict {
        max_distance,
        max_ancilla_deviation: max_anc,
        total_probability: total_p,
        pass: max_distance <= 1e-8 && max_anc <= 1e-8 && (total_p - 1.0).abs() <= 1e-8,
    }
}
