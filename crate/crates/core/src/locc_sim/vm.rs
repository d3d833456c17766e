//! The two-party LOCC virtual machine.
//!
//! A protocol is an ordinary function over [`Sim`]: it allocates registers,
//! applies party-local gates, shares and consumes entangled resources,
//! measures, and sends classical messages. In verification mode the executor
//! enumerates every measurement branch by re-running the protocol with a
//! growing outcome script; each complete branch yields the Kraus operator of
//! the induced map on the data registers, extracted against a maximally
//! entangled reference. A seeded sampling mode follows a single path instead.

use crate::core_linalg::{zeros, CMatrix, C64};
use crate::error::Error;
use rand::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
}

impl std::fmt::Display for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Party::Alice => write!(f, "Alice"),
            Party::Bob => write!(f, "Bob"),
        }
    }
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Data,
    Ancilla,
    ResourceHalf,
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegId(pub usize);

#[derive(Debug, Clone)]
pub struct Register {
    pub name: String,
    pub dim: usize,
    pub party: Party,
    pub role: Role,
}

#[derive(Debug, Clone)]
pub enum RegInit {
    Basis(usize),
    Uniform,
    Amplitudes(Vec<C64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Computational,
    Fourier,
}

#[derive(Debug, Clone)]
pub enum Event {
    LocalGate { party: Party, label: String, regs: Vec<String> },
    Measurement { party: Party, register: String, basis: Basis, alphabet: usize },
    Message { from: Party, alphabet: usize },
    ResourceConsumed { rank: usize },
    Teleport { register: String, to: Party, rank: usize },
}

#[derive(Debug, Clone, Default)]
pub struct Ledger {
    pub ebits: f64,
    pub cbits: f64,
}

/// Protocol-visible error/interrupt type.
#[derive(Debug)]
pub enum SimStop {
    /// Executor bookkeeping: the current path reached an unscripted
    /// measurement whose live outcomes are recorded in the simulator.
    Fork,
    Fail(Error),
}

impl From<Error> for SimStop {
    fn from(e: Error) -> Self {
        SimStop::Fail(e)
    }
}

pub type SimResult<T> = std::result::Result<T, SimStop>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Enumerate,
    Sample(u64),
}

struct State {
    /// Live register ids in tensor order (slowest factor first).
    order: Vec<usize>,
    amps: Vec<C64>,
}

pub struct Sim {
    regs: Vec<Register>,
    state: State,
    pub ledger: Ledger,
    pub events: Vec<Event>,
    record_events: bool,
    script: Vec<usize>,
    cursor: usize,
    fork_outcomes: Option<Vec<(usize, f64)>>,
    outcomes_taken: Vec<usize>,
    rng: Option<rand_chacha::ChaCha8Rng>,
    expected_finals: Vec<(RegId, Vec<C64>)>,
}

impl Sim {
    fn new(script: Vec<usize>, record_events: bool, mode: Mode) -> Self {
        Sim {
            regs: Vec::new(),
            state: State { order: Vec::new(), amps: vec![C64::new(1.0, 0.0)] },
            ledger: Ledger::default(),
            events: Vec::new(),
            record_events,
            script,
            cursor: 0,
            fork_outcomes: None,
            outcomes_taken: Vec::new(),
            rng: match mode {
                Mode::Enumerate => None,
                Mode::Sample(seed) => Some(rand_chacha::ChaCha8Rng::seed_from_u64(seed)),
            },
            expected_finals: Vec::new(),
        }
    }

    fn live_dims(&self) -> Vec<usize> {
        self.state.order.iter().map(|&i| self.regs[i].dim).collect()
    }

    fn push_event(&mut self, e: Event) {
        if self.record_events {
            self.events.push(e);
        }
    }

    pub fn dim(&self, reg: RegId) -> usize {
        self.regs[reg.0].dim
    }

    pub fn party_of(&self, reg: RegId) -> Party {
        self.regs[reg.0].party
    }

    /// Allocate a fresh register in a product state.
    pub fn add_register(
        &mut self,
        party: Party,
        role: Role,
        name: &str,
        dim: usize,
        init: RegInit,
    ) -> SimResult<RegId> {
        let vec = match init {
            RegInit::Basis(k) => {
                if k >= dim {
                    return Err(Error::BadInput(format!("basis state {k} out of range for {name}")).into());
                }
                let mut v = vec![C64::new(0.0, 0.0); dim];
                v[k] = C64::new(1.0, 0.0);
                v
            }
            RegInit::Uniform => {
                let a = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
                vec![a; dim]
            }
            RegInit::Amplitudes(v) => {
                if v.len() != dim {
                    return Err(Error::BadInput(format!("init amplitudes for {name} have wrong length")).into());
                }
                let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if (n - 1.0).abs() > 1e-9 {
                    return Err(Error::BadInput(format!("init amplitudes for {name} are not normalized")).into());
                }
                v
            }
        };
        let id = self.alloc(party, role, name, dim);
        let mut new_amps = Vec::with_capacity(self.state.amps.len() * dim);
        for a in &self.state.amps {
            for b in &vec {
                new_amps.push(a * b);
            }
        }
        self.state.amps = new_amps;
        self.state.order.push(id.0);
        Ok(id)
    }

    fn alloc(&mut self, party: Party, role: Role, name: &str, dim: usize) -> RegId {
        self.regs.push(Register { name: name.to_string(), dim, party, role });
        RegId(self.regs.len() - 1)
    }

    /// Share a maximally entangled pair of Schmidt rank `rank` and account
    /// for its ebits.
    pub fn share_pair(&mut self, name_a: &str, name_b: &str, rank: usize) -> SimResult<(RegId, RegId)> {
        let ia = self.alloc(Party::Alice, Role::ResourceHalf, name_a, rank);
        let ib = self.alloc(Party::Bob, Role::ResourceHalf, name_b, rank);
        let scale = C64::new(1.0 / (rank as f64).sqrt(), 0.0);
        let mut new_amps = Vec::with_capacity(self.state.amps.len() * rank * rank);
        for a in &self.state.amps {
            for k1 in 0..rank {
                for k2 in 0..rank {
                    new_amps.push(if k1 == k2 { a * scale } else { C64::new(0.0, 0.0) });
                }
            }
        }
        self.state.amps = new_amps;
        self.state.order.push(ia.0);
        self.state.order.push(ib.0);
        self.ledger.ebits += (rank as f64).log2();
        self.push_event(Event::ResourceConsumed { rank });
        Ok((ia, ib))
    }

    /// Pair the given data registers with a fresh maximally entangled
    /// reference of the same joint dimension (the verification input). Must
    /// be called while the whole system is still in `|0…0⟩`.
    pub fn add_reference(&mut self, data: &[RegId]) -> SimResult<RegId> {
        let d: usize = data.iter().map(|&r| self.dim(r)).product();
        for (i, a) in self.state.amps.iter().enumerate() {
            if i != 0 && a.norm() > 0.0 {
                return Err(Error::BadInput("reference must be added before any other operation".into()).into());
            }
        }
        let rid = self.alloc(Party::Alice, Role::Reference, "R", d);
        let dims_rest = self.live_dims();
        let total_rest: usize = dims_rest.iter().product();
        let data_positions: Vec<usize> = data
            .iter()
            .map(|r| self.state.order.iter().position(|&x| x == r.0).expect("data register"))
            .collect();
        let mut strides = vec![1usize; dims_rest.len()];
        for i in (0..dims_rest.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims_rest[i + 1];
        }
        let scale = C64::new(1.0 / (d as f64).sqrt(), 0.0);
        let mut new_amps = vec![C64::new(0.0, 0.0); d * total_rest];
        for r in 0..d {
            let mut rest_index = 0usize;
            let mut rr = r;
            for (pos_i, &reg) in data.iter().enumerate().rev() {
                let dim = self.dim(reg);
                rest_index += (rr % dim) * strides[data_positions[pos_i]];
                rr /= dim;
            }
            new_amps[r * total_rest + rest_index] = scale;
        }
        self.state.amps = new_amps;
        self.state.order.insert(0, rid.0);
        Ok(rid)
    }

    /// Apply a unitary on the listed registers (tensor order as listed, first
    /// register slowest). All registers must belong to `party`.
    pub fn apply(&mut self, party: Party, regs: &[RegId], op: &CMatrix, label: &str) -> SimResult<()> {
        for &r in regs {
            if self.regs[r.0].party != party {
                return Err(Error::ProtocolFailure {
                    step: "apply",
                    detail: format!(
                        "register {} belongs to {}, not {party}",
                        self.regs[r.0].name, self.regs[r.0].party
                    ),
                }
                .into());
            }
        }
        let opdim: usize = regs.iter().map(|&r| self.dim(r)).product();
        if op.nrows() != opdim || op.ncols() != opdim {
            return Err(Error::DimensionMismatch(format!(
                "gate {label} is {}x{}, expected {opdim}",
                op.nrows(),
                op.ncols()
            ))
            .into());
        }
        let dims = self.live_dims();
        let factors: Vec<usize> = regs
            .iter()
            .map(|r| self.state.order.iter().position(|&x| x == r.0).expect("live register"))
            .collect();
        self.state.amps = apply_on_factors(&self.state.amps, &dims, &factors, op);
        self.push_event(Event::LocalGate {
            party,
            label: label.to_string(),
            regs: regs.iter().map(|&r| self.regs[r.0].name.clone()).collect(),
        });
        Ok(())
    }

    /// Measure `reg`; collapses, removes the register from the live state,
    /// and returns the outcome of this branch. Fourier-basis measurement is
    /// the Fourier gate followed by a standard-basis measurement.
    pub fn measure(&mut self, reg: RegId, basis: Basis) -> SimResult<usize> {
        if basis == Basis::Fourier {
            let d = self.dim(reg);
            let f = fourier(d);
            let party = self.party_of(reg);
            self.apply(party, &[reg], &f, "F")?;
            if self.record_events {
                // fold the helper gate into the measurement event
                self.events.pop();
            }
        }
        let party = self.party_of(reg);
        let d = self.dim(reg);
        self.push_event(Event::Measurement {
            party,
            register: self.regs[reg.0].name.clone(),
            basis,
            alphabet: d,
        });

        let dims = self.live_dims();
        let pos = self.state.order.iter().position(|&x| x == reg.0).expect("live register");
        let probs = outcome_weights(&self.state.amps, &dims, pos);
        let outcome = if self.cursor < self.script.len() {
            let o = self.script[self.cursor];
            self.cursor += 1;
            o
        } else if let Some(rng) = self.rng.as_mut() {
            let x: f64 = rng.random_range(0.0..1.0);
            let mut acc = 0.0;
            let mut chosen = probs.len() - 1;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if x < acc {
                    chosen = i;
                    break;
                }
            }
            self.cursor += 1;
            chosen
        } else {
            let live: Vec<(usize, f64)> =
                probs.iter().enumerate().filter(|(_, &p)| p > 1e-18).map(|(i, &p)| (i, p)).collect();
            self.fork_outcomes = Some(live);
            return Err(SimStop::Fork);
        };
        if probs[outcome] <= 1e-18 {
            return Err(Error::ProtocolFailure {
                step: "measure",
                detail: format!("outcome {outcome} has zero probability"),
            }
            .into());
        }
        self.outcomes_taken.push(outcome);
        self.project_out(pos, outcome, probs[outcome]);
        Ok(outcome)
    }

    fn project_out(&mut self, pos: usize, outcome: usize, weight: f64) {
        let dims = self.live_dims();
        let mut strides = vec![1usize; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let total: usize = dims.iter().product();
        let mut new_amps = Vec::with_capacity(total / dims[pos]);
        let norm = weight.sqrt();
        for idx in 0..total {
            if (idx / strides[pos]) % dims[pos] == outcome {
                new_amps.push(self.state.amps[idx] / norm);
            }
        }
        self.state.amps = new_amps;
        self.state.order.remove(pos);
    }

    /// Record a classical message of the given alphabet size.
    pub fn send_message(&mut self, from: Party, alphabet: usize) {
        if alphabet > 1 {
            self.ledger.cbits += (alphabet as f64).log2();
        }
        self.push_event(Event::Message { from, alphabet });
    }

    pub fn measure_and_send(&mut self, reg: RegId, basis: Basis) -> SimResult<usize> {
        let from = self.party_of(reg);
        let d = self.dim(reg);
        let o = self.measure(reg, basis)?;
        self.send_message(from, d);
        Ok(o)
    }

    /// Teleport `reg` to the other party as a primitive: consumes a rank-d
    /// maximally entangled resource and 2·log2 d c-bits; the register simply
    /// changes ownership.
    pub fn teleport(&mut self, reg: RegId, to: Party) -> SimResult<()> {
        let d = self.dim(reg);
        if self.regs[reg.0].party == to {
            return Err(Error::ProtocolFailure {
                step: "teleport",
                detail: format!("register {} already at {to}", self.regs[reg.0].name),
            }
            .into());
        }
        if d > 1 {
            self.ledger.ebits += (d as f64).log2();
            self.ledger.cbits += 2.0 * (d as f64).log2();
        }
        let from = self.regs[reg.0].party;
        self.push_event(Event::ResourceConsumed { rank: d });
        self.push_event(Event::Message { from, alphabet: d * d });
        self.push_event(Event::Teleport { register: self.regs[reg.0].name.clone(), to, rank: d });
        self.regs[reg.0].party = to;
        Ok(())
    }

    pub fn register(&self, reg: RegId) -> &Register {
        &self.regs[reg.0]
    }

    pub(crate) fn alloc_public(&mut self, party: Party, role: Role, name: &str, dim: usize) -> RegId {
        self.alloc(party, role, name, dim)
    }

    /// Replaces one live tensor factor by a sequence of registers with the
    /// same total dimension (bookkeeping only; the flat layout is unchanged).
    pub(crate) fn replace_factor(&mut self, old: RegId, news: &[RegId]) {
        let pos = self.state.order.iter().position(|&x| x == old.0).expect("live register");
        let total: usize = news.iter().map(|&r| self.regs[r.0].dim).product();
        assert_eq!(total, self.regs[old.0].dim);
        self.state.order.splice(pos..=pos, news.iter().map(|r| r.0));
    }

    /// Declare the expected final pure state of an ancilla-like register.
    pub fn expect_final_basis(&mut self, reg: RegId, k: usize) {
        let mut v = vec![C64::new(0.0, 0.0); self.dim(reg)];
        v[k] = C64::new(1.0, 0.0);
        self.expected_finals.push((reg, v));
    }

    pub fn expect_final_uniform(&mut self, reg: RegId) {
        let d = self.dim(reg);
        let a = C64::new(1.0 / (d as f64).sqrt(), 0.0);
        self.expected_finals.push((reg, vec![a; d]));
    }
}

/// Weights (squared norms) of each outcome of factor `pos`.
fn outcome_weights(amps: &[C64], dims: &[usize], pos: usize) -> Vec<f64> {
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let mut probs = vec![0.0; dims[pos]];
    for (idx, a) in amps.iter().enumerate() {
        probs[(idx / strides[pos]) % dims[pos]] += a.norm_sqr();
    }
    probs
}

/// Applies `op` on the listed tensor factors of `state` (first factor of
/// `factors` slowest in `op`'s index).
pub fn apply_on_factors(state: &[C64], dims: &[usize], factors: &[usize], op: &CMatrix) -> Vec<C64> {
    let total: usize = dims.iter().product();
    let opdim: usize = factors.iter().map(|&f| dims[f]).product();
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let mut offsets = vec![0usize; opdim];
    for k in 0..opdim {
        let mut rem = k;
        let mut off = 0;
        for &f in factors.iter().rev() {
            off += (rem % dims[f]) * strides[f];
            rem /= dims[f];
        }
        offsets[k] = off;
    }
    let mut out = vec![C64::new(0.0, 0.0); total];
    let mut in_vec = vec![C64::new(0.0, 0.0); opdim];
    let mut idx = 0usize;
    'outer: while idx < total {
        for &f in factors {
            if (idx / strides[f]) % dims[f] != 0 {
                idx += 1;
                continue 'outer;
            }
        }
        for k in 0..opdim {
            in_vec[k] = state[idx + offsets[k]];
        }
        for r in 0..opdim {
            let mut acc = C64::new(0.0, 0.0);
            for cidx in 0..opdim {
                let v = op[(r, cidx)];
                if v.re != 0.0 || v.im != 0.0 {
                    acc += v * in_vec[cidx];
                }
            }
            out[idx + offsets[r]] = acc;
        }
        idx += 1;
    }
    out
}

/// `F = (1/√n) Σ e^{2πi jk/n} |j⟩⟨k|`.
pub fn fourier(n: usize) -> CMatrix {
    let mut f = zeros(n, n);
    let s = 1.0 / (n as f64).sqrt();
    for j in 0..n {
        for k in 0..n {
            f[(j, k)] = C64::from_polar(s, 2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64);
        }
    }
    f
}

/// Cyclic shift `X|k⟩ = |k+1 mod n⟩`.
pub fn shift(n: usize) -> CMatrix {
    let perm: Vec<usize> = (0..n).map(|k| (k + 1) % n).collect();
    crate::core_linalg::perm_matrix(&perm)
}

/// `X^p` for the shift above (negative powers allowed).
pub fn shift_pow(n: usize, p: i64) -> CMatrix {
    let p = p.rem_euclid(n as i64) as usize;
    let perm: Vec<usize> = (0..n).map(|k| (k + p) % n).collect();
    crate::core_linalg::perm_matrix(&perm)
}

/// One completed branch of a protocol run.
#[derive(Debug, Clone)]
pub struct Branch {
    pub outcomes: Vec<usize>,
    pub probability: f64,
    /// Kraus operator of the branch map from the data-input space to the
    /// output registers; an exact run yields `K = e^{iθ}·U`.
    pub kraus: CMatrix,
    /// Max deviation of any checked ancilla from purity and its expected
    /// final state.
    pub ancilla_deviation: f64,
}

/// Output of the executor: events and ledger are branch-independent.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub events: Vec<Event>,
    pub ledger: Ledger,
    pub branches: Vec<Branch>,
}

/// Runs `protocol` in verification mode: the data registers are paired with
/// a maximally entangled reference, every measurement branch is enumerated
/// (or one sampled path followed), and each branch's Kraus operator is
/// extracted. The protocol returns the registers carrying the output.
pub fn run_verification<F>(d_a: usize, d_b: usize, mode: Mode, protocol: F) -> crate::error::Result<RunOutput>
where
    F: Fn(&mut Sim, RegId, RegId) -> SimResult<Vec<RegId>>,
{
    let mut scripts: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
    let mut branches = Vec::new();
    let mut events = Vec::new();
    let mut ledger = Ledger::default();
    let mut have_template = false;
    let sample = matches!(mode, Mode::Sample(_));

    while let Some((script, prob_prefix)) = scripts.pop() {
        let mut sim = Sim::new(script.clone(), !have_template, mode);
        let a = sim
            .add_register(Party::Alice, Role::Data, "A", d_a, RegInit::Basis(0))
            .map_err(stop_to_err)?;
        let b = sim
            .add_register(Party::Bob, Role::Data, "B", d_b, RegInit::Basis(0))
            .map_err(stop_to_err)?;
        let rref = sim.add_reference(&[a, b]).map_err(stop_to_err)?;
        match protocol(&mut sim, a, b) {
            Ok(out_regs) => {
                if !have_template {
                    events = std::mem::take(&mut sim.events);
                    ledger = sim.ledger.clone();
                    have_template = true;
                } else {
                    check_ledger_consistency(&ledger, &sim.ledger)?;
                }
                let branch = extract_branch(&mut sim, rref, &out_regs, prob_prefix)?;
                branches.push(branch);
            }
            Err(SimStop::Fork) => {
                let outcomes = sim.fork_outcomes.take().expect("fork outcomes");
                for (o, w) in outcomes.into_iter().rev() {
                    let mut s = script.clone();
                    s.push(o);
                    scripts.push((s, prob_prefix * w));
                }
            }
            Err(SimStop::Fail(e)) => return Err(e),
        }
        if sample && !branches.is_empty() {
            break;
        }
    }
    branches.sort_by(|x, y| x.outcomes.cmp(&y.outcomes));
    Ok(RunOutput { events, ledger, branches })
}

fn stop_to_err(s: SimStop) -> Error {
    match s {
        SimStop::Fail(e) => e,
        SimStop::Fork => Error::ProtocolFailure { step: "setup", detail: "unexpected fork".into() },
    }
}

fn check_ledger_consistency(a: &Ledger, b: &Ledger) -> crate::error::Result<()> {
    if (a.ebits - b.ebits).abs() > 1e-9 || (a.cbits - b.cbits).abs() > 1e-9 {
        return Err(Error::ProtocolFailure {
            step: "ledger",
            detail: "branches disagree on resource accounting".into(),
        });
    }
    Ok(())
}

/// Factor out every non-output register, verify its final state, and return
/// the branch Kraus operator mapping the data-input space to the outputs.
fn extract_branch(
    sim: &mut Sim,
    rref: RegId,
    out_regs: &[RegId],
    probability: f64,
) -> crate::error::Result<Branch> {
    let mut max_dev: f64 = 0.0;
    let live: Vec<usize> = sim.state.order.clone();
    for reg_idx in live {
        if reg_idx == rref.0 || out_regs.iter().any(|r| r.0 == reg_idx) {
            continue;
        }
        let dims = sim.live_dims();
        let pos = sim.state.order.iter().position(|&x| x == reg_idx).expect("live");
        let d = dims[pos];
        let mut strides = vec![1usize; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let total: usize = dims.iter().product();
        let block = strides[pos];
        let outer = total / (block * d);
        // ρ[i,j] = Σ_rest ψ(i,rest) conj(ψ(j,rest))
        let mut rho = zeros(d, d);
        for o in 0..outer {
            for r in 0..block {
                let base = o * block * d + r;
                for i in 0..d {
                    let ai = sim.state.amps[base + i * block];
                    if ai.norm_sqr() == 0.0 {
                        continue;
                    }
                    for j in 0..d {
                        let aj = sim.state.amps[base + j * block];
                        rho[(i, j)] += ai * aj.conj();
                    }
                }
            }
        }
        let eig = crate::core_linalg::hermitian_eigen(&rho);
        let (mut top, mut top_idx) = (f64::NEG_INFINITY, 0);
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if l > top {
                top = l;
                top_idx = i;
            }
        }
        max_dev = max_dev.max((1.0 - top).abs());
        let v: Vec<C64> = (0..d).map(|i| eig.eigenvectors[(i, top_idx)]).collect();
        if let Some((_, want)) = sim.expected_finals.iter().find(|(r, _)| r.0 == reg_idx) {
            let ip: C64 = v.iter().zip(want.iter()).map(|(a, b)| a.conj() * b).sum();
            max_dev = max_dev.max((1.0 - ip.norm()).abs());
        }
        // Contract ⟨v| on this register.
        let mut new_amps = Vec::with_capacity(total / d);
        for o in 0..outer {
            for r in 0..block {
                let base = o * block * d + r;
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..d {
                    acc += v[i].conj() * sim.state.amps[base + i * block];
                }
                new_amps.push(acc);
            }
        }
        let n: f64 = new_amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        max_dev = max_dev.max((1.0 - n).abs());
        if n > 0.0 {
            for z in &mut new_amps {
                *z /= n;
            }
        }
        sim.state.amps = new_amps;
        sim.state.order.remove(pos);
    }
    let want_order: Vec<usize> = std::iter::once(rref.0).chain(out_regs.iter().map(|r| r.0)).collect();
    reorder(&mut sim.state, &sim.regs, &want_order)?;
    let d_ref = sim.regs[rref.0].dim;
    let d_out: usize = out_regs.iter().map(|&r| sim.regs[r.0].dim).product();
    if sim.state.amps.len() != d_ref * d_out {
        return Err(Error::ProtocolFailure {
            step: "extract",
            detail: format!(
                "residual state has dimension {}, expected {}",
                sim.state.amps.len(),
                d_ref * d_out
            ),
        });
    }
    // ψ = (1/√d) Σ_i |i⟩_R ⊗ K|i⟩ ⇒ K[j,i] = √d · ψ[(i,j)].
    let scale = (d_ref as f64).sqrt();
    let mut kraus = zeros(d_out, d_ref);
    for i in 0..d_ref {
        for j in 0..d_out {
            kraus[(j, i)] = sim.state.amps[i * d_out + j] * scale;
        }
    }
    Ok(Branch { outcomes: sim.outcomes_taken.clone(), probability, kraus, ancilla_deviation: max_dev })
}

fn reorder(state: &mut State, regs: &[Register], want: &[usize]) -> crate::error::Result<()> {
    if state.order.len() != want.len() || want.iter().any(|w| !state.order.contains(w)) {
        return Err(Error::ProtocolFailure {
            step: "extract",
            detail: "output registers do not match the live set".into(),
        });
    }
    if state.order == want {
        return Ok(());
    }
    let dims_old: Vec<usize> = state.order.iter().map(|&i| regs[i].dim).collect();
    let mut strides_old = vec![1usize; dims_old.len()];
    for i in (0..dims_old.len().saturating_sub(1)).rev() {
        strides_old[i] = strides_old[i + 1] * dims_old[i + 1];
    }
    let positions: Vec<usize> = want
        .iter()
        .map(|w| state.order.iter().position(|x| x == w).unwrap())
        .collect();
    let dims_new: Vec<usize> = positions.iter().map(|&p| dims_old[p]).collect();
    let total: usize = dims_old.iter().product();
    let mut new_amps = vec![C64::new(0.0, 0.0); total];
    let mut digits = vec![0usize; dims_new.len()];
    for (new_idx, slot) in new_amps.iter_mut().enumerate() {
        let mut rem = new_idx;
        for k in (0..dims_new.len()).rev() {
            digits[k] = rem % dims_new[k];
            rem /= dims_new[k];
        }
        let mut old_idx = 0;
        for (k, &p) in positions.iter().enumerate() {
            old_idx += digits[k] * strides_old[p];
        }
        *slot = state.amps[old_idx];
    }
    state.amps = new_amps;
    state.order = want.to_vec();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_linalg::{ident, tensor};

    #[test]
    fn identity_protocol_round_trips() {
        let out = run_verification(2, 3, Mode::Enumerate, |_sim, a, b| Ok(vec![a, b])).unwrap();
        assert_eq!(out.branches.len(), 1);
        let k = &out.branches[0].kraus;
        assert!((k - ident(6)).norm() < 1e-10);
        assert!(out.branches[0].ancilla_deviation < 1e-10);
    }

    #[test]
    fn local_gates_compose() {
        let u = crate::structure::fixtures::pauli('x');
        let out = run_verification(2, 2, Mode::Enumerate, |sim, a, b| {
            sim.apply(Party::Alice, &[a], &u, "X")?;
            sim.apply(Party::Bob, &[b], &u, "X")?;
            Ok(vec![a, b])
        })
        .unwrap();
        let want = tensor(&u, &u);
        assert!((out.branches[0].kraus.clone() - want).norm() < 1e-10);
    }

    #[test]
    fn measurement_branches_enumerate() {
        let out = run_verification(2, 2, Mode::Enumerate, |sim, a, b| {
            let anc = sim.add_register(Party::Alice, Role::Ancilla, "anc", 3, RegInit::Uniform)?;
            let _o = sim.measure_and_send(anc, Basis::Computational)?;
            Ok(vec![a, b])
        })
        .unwrap();
        assert_eq!(out.branches.len(), 3);
        assert!((out.ledger.cbits - 3f64.log2()).abs() < 1e-12);
        for b in &out.branches {
            assert!((b.probability - 1.0 / 3.0).abs() < 1e-9);
            assert!(crate::core_linalg::kraus_channel_distance(&b.kraus, &ident(4)) < 1e-10);
        }
    }

    #[test]
    fn cross_party_gate_rejected() {
        let r = run_verification(2, 2, Mode::Enumerate, |sim, a, b| {
            sim.apply(Party::Alice, &[a, b], &ident(4), "bad")?;
            Ok(vec![a, b])
        });
        assert!(r.is_err());
    }

    #[test]
    fn teleport_moves_ownership_and_accounts() {
        let out = run_verification(2, 2, Mode::Enumerate, |sim, a, b| {
            sim.teleport(b, Party::Alice)?;
            sim.apply(Party::Alice, &[a, b], &crate::structure::fixtures::cnot().matrix, "CNOT")?;
            sim.teleport(b, Party::Bob)?;
            Ok(vec![a, b])
        })
        .unwrap();
        assert!((out.ledger.ebits - 2.0).abs() < 1e-12);
        assert!((out.ledger.cbits - 4.0).abs() < 1e-12);
        let want = crate::structure::fixtures::cnot().matrix;
        assert!((out.branches[0].kraus.clone() - want).norm() < 1e-10);
    }

    #[test]
    fn entangled_leftover_ancilla_flagged() {
        let out = run_verification(2, 2, Mode::Enumerate, |sim, a, b| {
            let anc = sim.add_register(Party::Alice, Role::Ancilla, "anc", 2, RegInit::Basis(0))?;
            let cx = crate::structure::fixtures::cnot().matrix;
            sim.apply(Party::Alice, &[a, anc], &cx, "copy")?;
            let _ = b;
            Ok(vec![a, b])
        })
        .unwrap();
        assert!(out.branches[0].ancilla_deviation > 0.3);
    }
}
