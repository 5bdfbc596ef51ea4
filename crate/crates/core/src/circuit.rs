//! Gate-level circuits and the QAOA MaxCut circuit builder.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::WeightedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GateKind {
    #[serde(rename = "H")]
    H,
    #[serde(rename = "RX")]
    Rx,
    #[serde(rename = "RZ")]
    Rz,
    #[serde(rename = "CNOT")]
    Cnot,
    #[serde(rename = "SWAP")]
    Swap,
}

impl GateKind {
    pub const ALL: [GateKind; 5] = [GateKind::H, GateKind::Rx, GateKind::Rz, GateKind::Cnot, GateKind::Swap];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::Rx => "RX",
            GateKind::Rz => "RZ",
            GateKind::Cnot => "CNOT",
            GateKind::Swap => "SWAP",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A gate with bound angles.
///
/// `Rz(θ) = diag(e^{-iθ/2}, e^{iθ/2})`, `Rx(θ) = cos(θ/2)·I − i·sin(θ/2)·X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GateRecord", into = "GateRecord")]
pub enum Gate {
    H(usize),
    Rx(usize, f64),
    Rz(usize, f64),
    Cnot { control: usize, target: usize },
    Swap(usize, usize),
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::H(_) => GateKind::H,
            Gate::Rx(..) => GateKind::Rx,
            Gate::Rz(..) => GateKind::Rz,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::Swap(..) => GateKind::Swap,
        }
    }

    /// Operand qubits; for CNOT the control comes first.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::Rx(q, _) | Gate::Rz(q, _) => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
            Gate::Swap(a, b) => vec![a, b],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot { .. } | Gate::Swap(..))
    }

    /// Same gate with operands renamed through `map`.
    pub fn remap(&self, map: impl Fn(usize) -> usize) -> Gate {
        match *self {
            Gate::H(q) => Gate::H(map(q)),
            Gate::Rx(q, t) => Gate::Rx(map(q), t),
            Gate::Rz(q, t) => Gate::Rz(map(q), t),
            Gate::Cnot { control, target } => Gate::Cnot {
                control: map(control),
                target: map(target),
            },
            Gate::Swap(a, b) => Gate::Swap(map(a), map(b)),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GateRecord {
    g: GateKind,
    q: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
}

impl From<Gate> for GateRecord {
    fn from(gate: Gate) -> Self {
        let theta = match gate {
            Gate::Rx(_, t) | Gate::Rz(_, t) => Some(t),
            _ => None,
        };
        GateRecord {
            g: gate.kind(),
            q: gate.qubits(),
            theta,
        }
    }
}

impl TryFrom<GateRecord> for Gate {
    type Error = String;

    fn try_from(r: GateRecord) -> std::result::Result<Self, String> {
        let arity = match r.g {
            GateKind::Cnot | GateKind::Swap => 2,
            _ => 1,
        };
        if r.q.len() != arity {
            return Err(format!("{} expects {arity} operand(s), got {}", r.g, r.q.len()));
        }
        let angle = || r.theta.ok_or_else(|| format!("{} requires theta", r.g));
        Ok(match r.g {
            GateKind::H => Gate::H(r.q[0]),
            GateKind::Rx => Gate::Rx(r.q[0], angle()?),
            GateKind::Rz => Gate::Rz(r.q[0], angle()?),
            GateKind::Cnot => Gate::Cnot {
                control: r.q[0],
                target: r.q[1],
            },
            GateKind::Swap => Gate::Swap(r.q[0], r.q[1]),
        })
    }
}

/// An ordered gate list on `qubit_count` qubits; every qubit is measured at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitFile")]
pub struct Circuit {
    #[serde(rename = "qubits")]
    qubit_count: usize,
    gates: Vec<Gate>,
}

#[derive(Deserialize)]
struct CircuitFile {
    qubits: usize,
    gates: Vec<Gate>,
}

impl TryFrom<CircuitFile> for Circuit {
    type Error = Error;

    fn try_from(f: CircuitFile) -> Result<Self> {
        Circuit::from_gates(f.qubits, f.gates)
    }
}

impl Circuit {
    pub fn new(qubit_count: usize) -> Result<Self> {
        if qubit_count == 0 {
            return Err(Error::InvalidCircuit("qubit count must be positive".into()));
        }
        Ok(Circuit {
            qubit_count,
            gates: Vec::new(),
        })
    }

    pub fn from_gates(qubit_count: usize, gates: impl IntoIterator<Item = Gate>) -> Result<Self> {
        let mut c = Circuit::new(qubit_count)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let qs = gate.qubits();
        if let Some(&q) = qs.iter().find(|&&q| q >= self.qubit_count) {
            return Err(Error::InvalidCircuit(format!(
                "{} operand {q} out of range for {} qubits",
                gate.kind(),
                self.qubit_count
            )));
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::InvalidCircuit(format!(
                "{} operands must be distinct, got {}",
                gate.kind(),
                qs[0]
            )));
        }
        if let Gate::Rx(_, t) | Gate::Rz(_, t) = gate {
            if !t.is_finite() {
                return Err(Error::InvalidCircuit(format!("non-finite angle {t}")));
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn stats(&self) -> CircuitStats {
        circuit_stats(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("circuit serialization cannot fail")
    }
}

/// Variational angles for a depth-`p` QAOA circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct QaoaParams {
    gammas: Vec<f64>,
    betas: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if gammas.len() != betas.len() {
            return Err(Error::InvalidParams(format!(
                "{} gammas but {} betas",
                gammas.len(),
                betas.len()
            )));
        }
        if gammas.is_empty() {
            return Err(Error::InvalidParams("depth p must be at least 1".into()));
        }
        if gammas.iter().chain(&betas).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("angles must be finite".into()));
        }
        Ok(QaoaParams { gammas, betas })
    }

    pub fn depth1(gamma: f64, beta: f64) -> Result<Self> {
        QaoaParams::new(vec![gamma], vec![beta])
    }

    pub fn p(&self) -> usize {
        self.gammas.len()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }
}

/// Builds the QAOA MaxCut circuit: an H wall, then per layer one
/// `CNOT(c,t) · RZ(t, −w·γ) · CNOT(c,t)` block per edge (control = larger index)
/// followed by `RX(2β)` on every qubit.
pub fn build_qaoa_circuit(g: &WeightedGraph, params: &QaoaParams) -> Result<Circuit> {
    let n = g.node_count();
    let mut c = Circuit::new(n)?;
    for q in 0..n {
        c.push(Gate::H(q))?;
    }
    for (&gamma, &beta) in params.gammas.iter().zip(&params.betas) {
        for e in g.edges() {
            let (control, target) = (e.u.max(e.v), e.u.min(e.v));
            c.push(Gate::Cnot { control, target })?;
            c.push(Gate::Rz(target, -e.weight * gamma))?;
            c.push(Gate::Cnot { control, target })?;
        }
        for q in 0..n {
            c.push(Gate::Rx(q, 2.0 * beta))?;
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CircuitStats {
    pub depth: usize,
    pub two_qubit_count: usize,
    pub gate_count: usize,
}

/// Depth under as-soon-as-possible layering, plus gate counts.
pub fn circuit_stats(c: &Circuit) -> CircuitStats {
    let mut frontier = vec![0usize; c.qubit_count()];
    let mut depth = 0;
    let mut two_qubit_count = 0;
    for g in c.gates() {
        let qs = g.qubits();
        let layer = qs.iter().map(|&q| frontier[q]).max().unwrap_or(0) + 1;
        for q in qs {
            frontier[q] = layer;
        }
        depth = depth.max(layer);
        if g.is_two_qubit() {
            two_qubit_count += 1;
        }
    }
    CircuitStats {
        depth,
        two_qubit_count,
        gate_count: c.len(),
    }
}
