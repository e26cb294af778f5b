//! Gate-level realization of the interaction exponential `exp(-i c sigma_x⊗A t)`.
//!
//! The construction conjugates a diagonal by Hadamards on every qubit:
//!
//! ```text
//! H^{⊗(n+2)} · exp[-i c t · Z ⊗ Z ⊗ diag(√2, 0)^{⊗n}] · H^{⊗(n+2)}
//! ```
//!
//! `diag(√2, 0)^{⊗n}` is `√N |0…0><0…0|`, so the diagonal is a phase
//! `exp(∓i √N c t)` on states whose system qubits are all `|0>`, with the sign
//! set by the probe/ancilla parity. With `U0 = exp(i φ σ_z)` and
//! `φ = √N c t`, that is an `n`-controlled `U0†` on the ancilla followed by an
//! `(n+1)`-controlled `U0²` that also conditions on the probe.
//!
//! [`GateList::decompose`] lowers the multi-controlled gates to Hadamards,
//! single-qubit phases and controlled phases without extra qubits, using the
//! square-root recursion for controlled phases and borrowed-qubit Toffoli
//! chains. The elementary gate count grows quadratically with `n`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{c, ComplexMatrix, ComplexVector, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    Hadamard,
    /// `diag(1, e^{i angle})` on the target.
    SingleQubitPhase,
    /// Phase `e^{i angle}` when control and target are both `|1>`.
    ControlledPhase,
    /// `exp(i angle sigma_z)` on the target when every control matches its polarity.
    MultiControlled,
}

impl GateKind {
    fn keyword(self) -> &'static str {
        match self {
            GateKind::Hadamard => "HADAMARD",
            GateKind::SingleQubitPhase => "PHASE",
            GateKind::ControlledPhase => "CONTROLLED_PHASE",
            GateKind::MultiControlled => "MULTI_CONTROLLED",
        }
    }

    fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "HADAMARD" => GateKind::Hadamard,
            "PHASE" => GateKind::SingleQubitPhase,
            "CONTROLLED_PHASE" => GateKind::ControlledPhase,
            "MULTI_CONTROLLED" => GateKind::MultiControlled,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    pub controls: Vec<usize>,
    /// One entry per control: `true` fires on `|1>`, `false` on `|0>`.
    pub polarity: Vec<bool>,
    pub angle: f64,
}

impl Gate {
    pub fn hadamard(target: usize) -> Self {
        Self {
            kind: GateKind::Hadamard,
            target,
            controls: vec![],
            polarity: vec![],
            angle: 0.0,
        }
    }

    pub fn phase(target: usize, angle: f64) -> Self {
        Self {
            kind: GateKind::SingleQubitPhase,
            target,
            controls: vec![],
            polarity: vec![],
            angle,
        }
    }

    pub fn controlled_phase(control: usize, target: usize, angle: f64) -> Self {
        Self {
            kind: GateKind::ControlledPhase,
            target,
            controls: vec![control],
            polarity: vec![true],
            angle,
        }
    }

    pub fn multi_controlled(
        target: usize,
        controls: Vec<usize>,
        polarity: Vec<bool>,
        angle: f64,
    ) -> Self {
        assert_eq!(controls.len(), polarity.len());
        Self {
            kind: GateKind::MultiControlled,
            target,
            controls,
            polarity,
            angle,
        }
    }

    fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.target).chain(self.controls.iter().copied())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateList {
    pub num_qubits: usize,
    pub gates: Vec<Gate>,
}

impl GateList {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            gates: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) {
        debug_assert!(gate.qubits().all(|q| q < self.num_qubits));
        self.gates.push(gate);
    }

    /// Applies the gates in order to a state vector of `2^num_qubits` amplitudes.
    pub fn apply_in_place(&self, amps: &mut [C64]) {
        assert_eq!(amps.len(), 1usize << self.num_qubits);
        for gate in &self.gates {
            apply_gate(self.num_qubits, gate, amps);
        }
    }

    pub fn apply(&self, state: &ComplexVector) -> ComplexVector {
        let mut out = state.clone();
        self.apply_in_place(out.amplitudes_mut());
        out
    }

    /// Dense unitary of the whole list (first gate acts first).
    pub fn to_unitary(&self) -> ComplexMatrix {
        let dim = 1usize << self.num_qubits;
        let mut u = ComplexMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut amps = vec![c(0.0, 0.0); dim];
            amps[col] = c(1.0, 0.0);
            self.apply_in_place(&mut amps);
            for (row, z) in amps.into_iter().enumerate() {
                u[(row, col)] = z;
            }
        }
        u
    }

    /// Rewrites every multi-controlled gate into Hadamard, phase and
    /// controlled-phase gates acting on at most two qubits.
    pub fn decompose(&self) -> GateList {
        let mut out = GateList::new(self.num_qubits);
        for gate in &self.gates {
            match gate.kind {
                GateKind::MultiControlled => decompose_multi_controlled(&mut out, gate),
                _ => out.push(gate.clone()),
            }
        }
        out
    }

    pub fn count_by_kind(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    /// Plain-text form: a `QUBITS n` header, then one gate per line as
    /// `KIND target [controls...] [polarity-mask] [angle]`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "QUBITS {}", self.num_qubits).unwrap();
        for g in &self.gates {
            write!(s, "{} {}", g.kind.keyword(), g.target).unwrap();
            match g.kind {
                GateKind::Hadamard => {}
                GateKind::SingleQubitPhase => write!(s, " {}", g.angle).unwrap(),
                GateKind::ControlledPhase => write!(s, " {} {}", g.controls[0], g.angle).unwrap(),
                GateKind::MultiControlled => {
                    for q in &g.controls {
                        write!(s, " {q}").unwrap();
                    }
                    let mask: String = g
                        .polarity
                        .iter()
                        .map(|&p| if p { '1' } else { '0' })
                        .collect();
                    write!(s, " {mask} {}", g.angle).unwrap();
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<GateList> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line_no, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing QUBITS header".into(),
        })?;
        let num_qubits = match header.split_whitespace().collect::<Vec<_>>()[..] {
            ["QUBITS", n] => parse_num::<usize>(n, line_no)?,
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected `QUBITS <n>`".into(),
                })
            }
        };
        let mut list = GateList::new(num_qubits);
        for (line_no, line) in lines {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let bad = |message: &str| Error::Parse {
                line: line_no,
                message: message.to_string(),
            };
            let kind = GateKind::from_keyword(tokens[0]).ok_or_else(|| bad("unknown gate kind"))?;
            if tokens.len() < 2 {
                return Err(bad("missing target"));
            }
            let target = parse_num::<usize>(tokens[1], line_no)?;
            let gate = match (kind, tokens.len()) {
                (GateKind::Hadamard, 2) => Gate::hadamard(target),
                (GateKind::SingleQubitPhase, 3) => {
                    Gate::phase(target, parse_num(tokens[2], line_no)?)
                }
                (GateKind::ControlledPhase, 4) => Gate::controlled_phase(
                    parse_num(tokens[2], line_no)?,
                    target,
                    parse_num(tokens[3], line_no)?,
                ),
                (GateKind::MultiControlled, len) if len >= 4 => {
                    let angle = parse_num(tokens[len - 1], line_no)?;
                    let mask = tokens[len - 2];
                    let controls = tokens[2..len - 2]
                        .iter()
                        .map(|t| parse_num::<usize>(t, line_no))
                        .collect::<Result<Vec<_>>>()?;
                    if mask.len() != controls.len() || !mask.chars().all(|ch| ch == '0' || ch == '1')
                    {
                        return Err(bad("polarity mask must have one 0/1 digit per control"));
                    }
                    let polarity = mask.chars().map(|ch| ch == '1').collect();
                    Gate::multi_controlled(target, controls, polarity, angle)
                }
                _ => return Err(bad("wrong number of fields for gate kind")),
            };
            if gate.qubits().any(|q| q >= num_qubits) {
                return Err(bad("qubit index out of range"));
            }
            list.push(gate);
        }
        Ok(list)
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse `{tok}`"),
    })
}

#[inline]
fn bit(num_qubits: usize, q: usize) -> usize {
    1usize << (num_qubits - 1 - q)
}

fn apply_gate(num_qubits: usize, gate: &Gate, amps: &mut [C64]) {
    let t = bit(num_qubits, gate.target);
    match gate.kind {
        GateKind::Hadamard => {
            let h = FRAC_1_SQRT_2;
            for i in 0..amps.len() {
                if i & t == 0 {
                    let a = amps[i];
                    let b = amps[i | t];
                    amps[i] = (a + b) * h;
                    amps[i | t] = (a - b) * h;
                }
            }
        }
        GateKind::SingleQubitPhase => {
            let ph = C64::from_polar(1.0, gate.angle);
            for (i, z) in amps.iter_mut().enumerate() {
                if i & t != 0 {
                    *z *= ph;
                }
            }
        }
        GateKind::ControlledPhase => {
            let mask = t | bit(num_qubits, gate.controls[0]);
            let ph = C64::from_polar(1.0, gate.angle);
            for (i, z) in amps.iter_mut().enumerate() {
                if i & mask == mask {
                    *z *= ph;
                }
            }
        }
        GateKind::MultiControlled => {
            let mut mask = 0;
            let mut want = 0;
            for (&q, &pol) in gate.controls.iter().zip(&gate.polarity) {
                let b = bit(num_qubits, q);
                mask |= b;
                if pol {
                    want |= b;
                }
            }
            let up = C64::from_polar(1.0, gate.angle);
            let down = C64::from_polar(1.0, -gate.angle);
            for (i, z) in amps.iter_mut().enumerate() {
                if i & mask == want {
                    *z *= if i & t == 0 { up } else { down };
                }
            }
        }
    }
}

/// Gate list for `exp(-i c sigma_x⊗A · tau_over_l)` on `n + 2` qubits
/// (qubit 0 = probe, 1 = ancilla, `2..n+2` = system).
pub fn interaction_exponential_circuit(n: usize, coupling: f64, tau_over_l: f64) -> GateList {
    assert!(n >= 1, "system needs at least one qubit");
    let nq = n + 2;
    let phi = ((1usize << n) as f64).sqrt() * coupling * tau_over_l;
    let system: Vec<usize> = (2..nq).collect();

    let mut list = GateList::new(nq);
    for q in 0..nq {
        list.push(Gate::hadamard(q));
    }
    list.push(Gate::multi_controlled(
        1,
        system.clone(),
        vec![false; n],
        -phi,
    ));
    let mut controls = vec![0];
    controls.extend(&system);
    let mut polarity = vec![true];
    polarity.extend(std::iter::repeat_n(false, n));
    list.push(Gate::multi_controlled(1, controls, polarity, 2.0 * phi));
    for q in 0..nq {
        list.push(Gate::hadamard(q));
    }
    list
}

/// Number of elementary gates after decomposition, for an `n`-qubit system.
pub fn elementary_gate_count(n: usize) -> usize {
    interaction_exponential_circuit(n, 1.0, 1.0)
        .decompose()
        .len()
}

fn pauli_x(out: &mut GateList, q: usize) {
    out.push(Gate::hadamard(q));
    out.push(Gate::phase(q, PI));
    out.push(Gate::hadamard(q));
}

fn cnot(out: &mut GateList, control: usize, target: usize) {
    out.push(Gate::hadamard(target));
    out.push(Gate::controlled_phase(control, target, PI));
    out.push(Gate::hadamard(target));
}

fn toffoli(out: &mut GateList, a: usize, b: usize, target: usize) {
    out.push(Gate::hadamard(target));
    out.push(Gate::controlled_phase(b, target, PI / 2.0));
    cnot(out, a, b);
    out.push(Gate::controlled_phase(b, target, -PI / 2.0));
    cnot(out, a, b);
    out.push(Gate::controlled_phase(a, target, PI / 2.0));
    out.push(Gate::hadamard(target));
}

fn decompose_multi_controlled(out: &mut GateList, gate: &Gate) {
    for (&q, &pol) in gate.controls.iter().zip(&gate.polarity) {
        if !pol {
            pauli_x(out, q);
        }
    }
    // exp(i a Z) = e^{i a} diag(1, e^{-2 i a}); the controlled global phase
    // becomes a phase on the controls themselves.
    if !gate.controls.is_empty() {
        multi_controlled_phase(out, &gate.controls, gate.angle);
    }
    let mut all = gate.controls.clone();
    all.push(gate.target);
    multi_controlled_phase(out, &all, -2.0 * gate.angle);
    for (&q, &pol) in gate.controls.iter().zip(&gate.polarity).rev() {
        if !pol {
            pauli_x(out, q);
        }
    }
}

/// Phase `e^{i angle}` on the state where every qubit in `qubits` is `|1>`.
fn multi_controlled_phase(out: &mut GateList, qubits: &[usize], angle: f64) {
    match qubits {
        [] => {}
        [q] => out.push(Gate::phase(*q, angle)),
        [a, b] => out.push(Gate::controlled_phase(*a, *b, angle)),
        _ => {
            let m = qubits.len();
            let target = qubits[m - 1];
            let last = qubits[m - 2];
            let rest = &qubits[..m - 2];
            out.push(Gate::controlled_phase(last, target, angle / 2.0));
            multi_controlled_x(out, rest, last, &[target]);
            out.push(Gate::controlled_phase(last, target, -angle / 2.0));
            multi_controlled_x(out, rest, last, &[target]);
            let mut reduced = rest.to_vec();
            reduced.push(target);
            multi_controlled_phase(out, &reduced, angle / 2.0);
        }
    }
}

/// Multi-controlled NOT; `dirty` qubits may be borrowed in any state and are restored.
fn multi_controlled_x(out: &mut GateList, controls: &[usize], target: usize, dirty: &[usize]) {
    let k = controls.len();
    match k {
        0 => pauli_x(out, target),
        1 => cnot(out, controls[0], target),
        2 => toffoli(out, controls[0], controls[1], target),
        _ if dirty.len() >= k - 2 => toffoli_chain(out, controls, target, &dirty[..k - 2]),
        _ => {
            assert!(!dirty.is_empty(), "need one borrowed qubit");
            let borrowed = dirty[0];
            let split = k.div_ceil(2);
            let (first, second) = controls.split_at(split);
            let mut first_pool: Vec<usize> = second.to_vec();
            first_pool.push(target);
            let mut second_controls = second.to_vec();
            second_controls.push(borrowed);
            for _ in 0..2 {
                multi_controlled_x(out, first, borrowed, &first_pool);
                multi_controlled_x(out, &second_controls, target, first);
            }
        }
    }
}

/// `4(k-2)` Toffolis with `k-2` borrowed qubits.
fn toffoli_chain(out: &mut GateList, controls: &[usize], target: usize, dirty: &[usize]) {
    let k = controls.len();
    debug_assert_eq!(dirty.len(), k - 2);
    // Toffoli(controls[i], dirty[i-2] -> dirty[i-1]) for i = 2..k-1, and the
    // top rung Toffoli(controls[k-1], dirty[k-3] -> target).
    let descend = |out: &mut GateList| {
        toffoli(out, controls[k - 1], dirty[k - 3], target);
        for i in (2..k - 1).rev() {
            toffoli(out, controls[i], dirty[i - 2], dirty[i - 1]);
        }
    };
    let ascend = |out: &mut GateList| {
        for i in 2..k - 1 {
            toffoli(out, controls[i], dirty[i - 2], dirty[i - 1]);
        }
    };
    for _ in 0..2 {
        descend(out);
        toffoli(out, controls[0], controls[1], dirty[0]);
        ascend(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::interaction_term;
    use crate::operators::{expm_hermitian, hadamard_gate, kron, kron_power, pauli, Pauli};

    /// Dense permutation/phase reference for a multi-controlled X.
    fn reference_mcx(nq: usize, controls: &[usize], target: usize) -> ComplexMatrix {
        let dim = 1 << nq;
        let mut u = ComplexMatrix::zeros(dim, dim);
        for col in 0..dim {
            let fire = controls.iter().all(|&q| col & bit(nq, q) != 0);
            let row = if fire { col ^ bit(nq, target) } else { col };
            u[(row, col)] = c(1.0, 0.0);
        }
        u
    }

    fn reference_mcp(nq: usize, qubits: &[usize], angle: f64) -> ComplexMatrix {
        let dim = 1 << nq;
        let diag: Vec<C64> = (0..dim)
            .map(|i| {
                if qubits.iter().all(|&q| i & bit(nq, q) != 0) {
                    C64::from_polar(1.0, angle)
                } else {
                    c(1.0, 0.0)
                }
            })
            .collect();
        ComplexMatrix::from_diagonal(&diag)
    }

    #[test]
    fn toffoli_and_cnot_are_exact() {
        let mut list = GateList::new(3);
        toffoli(&mut list, 0, 1, 2);
        assert!(list.to_unitary().max_abs_diff(&reference_mcx(3, &[0, 1], 2)) < 1e-14);
        let mut list = GateList::new(2);
        cnot(&mut list, 1, 0);
        assert!(list.to_unitary().max_abs_diff(&reference_mcx(2, &[1], 0)) < 1e-14);
    }

    #[test]
    fn borrowed_qubit_chain_restores_dirty_qubits() {
        for k in 3..=5 {
            let nq = 2 * k - 1;
            let controls: Vec<usize> = (0..k).collect();
            let dirty: Vec<usize> = (k..2 * k - 2).collect();
            let target = nq - 1;
            let mut list = GateList::new(nq);
            toffoli_chain(&mut list, &controls, target, &dirty);
            assert_eq!(list.count_by_kind(GateKind::Hadamard) > 0, true);
            let u = list.to_unitary();
            assert!(u.max_abs_diff(&reference_mcx(nq, &controls, target)) < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn single_borrowed_qubit_split() {
        for k in 3..=6 {
            let nq = k + 2;
            let controls: Vec<usize> = (0..k).collect();
            let mut list = GateList::new(nq);
            multi_controlled_x(&mut list, &controls, k, &[k + 1]);
            let u = list.to_unitary();
            assert!(u.max_abs_diff(&reference_mcx(nq, &controls, k)) < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn multi_controlled_phase_is_exact() {
        for m in 1..=6 {
            let qubits: Vec<usize> = (0..m).collect();
            let mut list = GateList::new(m);
            multi_controlled_phase(&mut list, &qubits, 0.731);
            let u = list.to_unitary();
            assert!(u.max_abs_diff(&reference_mcp(m, &qubits, 0.731)) < 1e-12, "m = {m}");
        }
    }

    #[test]
    fn decomposition_matches_high_level_list() {
        for n in 1..=4 {
            let high = interaction_exponential_circuit(n, 0.002, 0.1);
            let low = high.decompose();
            assert_eq!(low.count_by_kind(GateKind::MultiControlled), 0);
            assert!(low.to_unitary().max_abs_diff(&high.to_unitary()) < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn circuit_matches_dense_exponential() {
        for n in 1..=4 {
            let t = 0.1;
            let coupling = 0.002;
            let dense = expm_hermitian(&interaction_term(n, coupling), t).unwrap();
            let high = interaction_exponential_circuit(n, coupling, t).to_unitary();
            assert!(high.max_abs_diff(&dense) <= 1e-10, "n = {n}");
            let low = interaction_exponential_circuit(n, coupling, t)
                .decompose()
                .to_unitary();
            assert!(low.max_abs_diff(&dense) <= 1e-10, "n = {n}");
        }
    }

    #[test]
    fn zero_angle_is_identity() {
        for n in 1..=3 {
            let u = interaction_exponential_circuit(n, 0.002, 0.0)
                .decompose()
                .to_unitary();
            assert!(u.max_abs_diff(&ComplexMatrix::identity(1 << (n + 2))) <= 1e-12);
        }
    }

    #[test]
    fn conjugation_identity() {
        for n in 1..=3 {
            let h_all = kron_power(&hadamard_gate(), n + 2);
            let d = ComplexMatrix::from_real_diagonal(&[2f64.sqrt(), 0.0]);
            let zz = kron(&pauli(Pauli::Z), &pauli(Pauli::Z));
            let middle = kron(&zz, &kron_power(&d, n));
            let conj = h_all.matmul(&middle).matmul(&h_all);
            assert!(conj.max_abs_diff(&interaction_term(n, 1.0)) <= 1e-12);
        }
    }

    #[test]
    fn middle_diagonal_acts_only_on_all_zero_system() {
        let n = 3;
        let list = interaction_exponential_circuit(n, 0.5, 0.3);
        let middle = GateList {
            num_qubits: list.num_qubits,
            gates: list.gates[n + 2..list.len() - (n + 2)].to_vec(),
        };
        let u = middle.to_unitary();
        let sys_mask = (1 << n) - 1;
        for i in 0..u.rows() {
            if i & sys_mask != 0 {
                assert!((u[(i, i)] - c(1.0, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn gate_count_grows_quadratically() {
        let counts: Vec<usize> = (1..=8).map(elementary_gate_count).collect();
        for w in counts.windows(2) {
            assert!(w[1] > w[0]);
        }
        // Second differences stay bounded, first differences grow.
        let d1: Vec<i64> = counts.windows(2).map(|w| w[1] as i64 - w[0] as i64).collect();
        assert!(d1.last().unwrap() > d1.first().unwrap());
    }

    #[test]
    fn text_round_trip() {
        let list = interaction_exponential_circuit(2, 0.002, 0.1);
        let text = list.to_text();
        assert!(text.starts_with("QUBITS 4\n"));
        assert_eq!(GateList::parse_text(&text).unwrap(), list);
        let low = list.decompose();
        assert_eq!(GateList::parse_text(&low.to_text()).unwrap(), low);
    }

    #[test]
    fn text_parse_errors() {
        assert!(GateList::parse_text("").is_err());
        assert!(GateList::parse_text("QUBITS 2\nFOO 1\n").is_err());
        assert!(GateList::parse_text("QUBITS 2\nHADAMARD 5\n").is_err());
        let err = GateList::parse_text("QUBITS 3\nMULTI_CONTROLLED 0 1 2 1 0.5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
