//! Compilation to a device: greedy SWAP routing on a coupling map, then
//! rewriting into the device's native gate set.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitStats, Gate, GateKind};
use crate::error::{Error, Result};

/// Undirected qubit connectivity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CouplingFile", into = "CouplingFile")]
pub struct CouplingMap {
    qubit_count: usize,
    pairs: BTreeSet<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CouplingFile {
    Preset { preset: CouplingPreset, qubits: usize },
    Explicit { qubits: usize, pairs: Vec<(usize, usize)> },
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum CouplingPreset {
    Full,
    Linear,
}

impl TryFrom<CouplingFile> for CouplingMap {
    type Error = Error;

    fn try_from(f: CouplingFile) -> Result<Self> {
        match f {
            CouplingFile::Preset {
                preset: CouplingPreset::Full,
                qubits,
            } => CouplingMap::full(qubits),
            CouplingFile::Preset {
                preset: CouplingPreset::Linear,
                qubits,
            } => CouplingMap::linear(qubits),
            CouplingFile::Explicit { qubits, pairs } => CouplingMap::new(qubits, pairs),
        }
    }
}

impl From<CouplingMap> for CouplingFile {
    fn from(m: CouplingMap) -> Self {
        let qubits = m.qubit_count;
        if m == CouplingMap::full(qubits).expect("valid size") {
            CouplingFile::Preset {
                preset: CouplingPreset::Full,
                qubits,
            }
        } else if m == CouplingMap::linear(qubits).expect("valid size") {
            CouplingFile::Preset {
                preset: CouplingPreset::Linear,
                qubits,
            }
        } else {
            CouplingFile::Explicit {
                qubits,
                pairs: m.pairs.into_iter().collect(),
            }
        }
    }
}

impl CouplingMap {
    pub fn new(qubit_count: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if qubit_count == 0 {
            return Err(Error::InvalidCoupling("qubit count must be positive".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in pairs {
            if a >= qubit_count || b >= qubit_count || a == b {
                return Err(Error::InvalidCoupling(format!(
                    "pair ({a}, {b}) is invalid for {qubit_count} qubits"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(CouplingMap {
            qubit_count,
            pairs: set,
        })
    }

    pub fn full(n: usize) -> Result<Self> {
        CouplingMap::new(n, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))))
    }

    pub fn linear(n: usize) -> Result<Self> {
        CouplingMap::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    /// The sub-map on physical qubits `0..n`.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n > self.qubit_count {
            return Err(Error::InvalidCoupling(format!(
                "requested {n} qubits from a {}-qubit map",
                self.qubit_count
            )));
        }
        CouplingMap::new(n, self.pairs().filter(|&(_, b)| b < n))
    }

    pub fn are_coupled(&self, a: usize, b: usize) -> bool {
        self.pairs.contains(&(a.min(b), a.max(b)))
    }

    fn neighbors(&self, q: usize) -> impl Iterator<Item = usize> + '_ {
        self.pairs.iter().filter_map(move |&(a, b)| {
            if a == q {
                Some(b)
            } else if b == q {
                Some(a)
            } else {
                None
            }
        })
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.qubit_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(q) = stack.pop() {
            for r in self.neighbors(q) {
                if !seen[r] {
                    seen[r] = true;
                    stack.push(r);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// BFS shortest path `from ..= to`. Neighbors are visited in ascending
    /// order, so ties resolve toward lower physical indices.
    pub fn shortest_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.qubit_count];
        let mut queue = VecDeque::from([from]);
        prev[from] = from;
        while let Some(q) = queue.pop_front() {
            if q == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for r in self.neighbors(q) {
                if prev[r] == usize::MAX {
                    prev[r] = q;
                    queue.push_back(r);
                }
            }
        }
        None
    }
}

/// Gates a device executes directly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "NativeSetFile", into = "NativeSetFile")]
pub struct NativeSet(BTreeSet<GateKind>);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NativeSetFile {
    Preset(String),
    Gates(Vec<GateKind>),
}

impl TryFrom<NativeSetFile> for NativeSet {
    type Error = Error;

    fn try_from(f: NativeSetFile) -> Result<Self> {
        match f {
            NativeSetFile::Preset(name) => match name.as_str() {
                "extended" => Ok(NativeSet::extended()),
                "restricted" => Ok(NativeSet::restricted()),
                other => Err(Error::InvalidCircuit(format!("unknown native set {other:?}"))),
            },
            NativeSetFile::Gates(gates) => NativeSet::new(gates),
        }
    }
}

impl From<NativeSet> for NativeSetFile {
    fn from(s: NativeSet) -> Self {
        if s == NativeSet::extended() {
            NativeSetFile::Preset("extended".into())
        } else if s == NativeSet::restricted() {
            NativeSetFile::Preset("restricted".into())
        } else {
            NativeSetFile::Gates(s.0.into_iter().collect())
        }
    }
}

impl NativeSet {
    pub fn new(kinds: impl IntoIterator<Item = GateKind>) -> Result<Self> {
        let set: BTreeSet<_> = kinds.into_iter().collect();
        if set.is_empty() {
            return Err(Error::InvalidCircuit("native gate set must be nonempty".into()));
        }
        Ok(NativeSet(set))
    }

    /// H, RX, RZ, CNOT and SWAP.
    pub fn extended() -> Self {
        NativeSet(GateKind::ALL.into_iter().collect())
    }

    /// RX, RZ and CNOT.
    pub fn restricted() -> Self {
        NativeSet([GateKind::Rx, GateKind::Rz, GateKind::Cnot].into_iter().collect())
    }

    pub fn contains(&self, kind: GateKind) -> bool {
        self.0.contains(&kind)
    }
}

impl fmt::Display for NativeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.0.iter().map(|k| k.name()).collect();
        write!(f, "{{{}}}", names.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub coupling: CouplingMap,
    pub native_set: NativeSet,
    #[serde(default)]
    pub label: String,
}

impl DeviceSpec {
    pub fn new(coupling: CouplingMap, native_set: NativeSet, label: impl Into<String>) -> Self {
        DeviceSpec {
            coupling,
            native_set,
            label: label.into(),
        }
    }
}

/// A routed, native-only circuit with its logical→physical measurement layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledCircuit {
    #[serde(flatten)]
    pub circuit: Circuit,
    /// `layout[logical] = physical` at measurement time.
    pub layout: Vec<usize>,
    pub stats: CircuitStats,
}

fn rewrite(gate: &Gate) -> Option<Vec<Gate>> {
    match *gate {
        // H = i · RX(π/2) RZ(π/2) RX(π/2)
        Gate::H(q) => Some(vec![
            Gate::Rx(q, FRAC_PI_2),
            Gate::Rz(q, FRAC_PI_2),
            Gate::Rx(q, FRAC_PI_2),
        ]),
        Gate::Swap(a, b) => Some(vec![
            Gate::Cnot { control: a, target: b },
            Gate::Cnot { control: b, target: a },
            Gate::Cnot { control: a, target: b },
        ]),
        _ => None,
    }
}

/// Rewrites every non-native gate using the fixed decomposition rules.
pub fn decompose(c: &Circuit, spec: &DeviceSpec) -> Result<Circuit> {
    let native = &spec.native_set;
    let mut out = Circuit::new(c.qubit_count())?;
    for g in c.gates() {
        if native.contains(g.kind()) {
            out.push(*g)?;
            continue;
        }
        match rewrite(g) {
            Some(gs) if gs.iter().all(|x| native.contains(x.kind())) => {
                for x in gs {
                    out.push(x)?;
                }
            }
            _ => {
                return Err(Error::NoDecomposition {
                    gate: g.kind().to_string(),
                    native: native.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Greedy router: for each two-qubit gate on uncoupled qubits, the operand
/// with the lower logical index is swapped along a shortest path until it is
/// adjacent to the other. Starts from the identity layout.
pub fn route(c: &Circuit, coupling: &CouplingMap) -> Result<(Circuit, Vec<usize>)> {
    let n = c.qubit_count();
    if coupling.qubit_count() != n {
        return Err(Error::InvalidCoupling(format!(
            "coupling map has {} qubits, circuit has {n}",
            coupling.qubit_count()
        )));
    }
    if !coupling.is_connected() {
        return Err(Error::InvalidCoupling("coupling map is disconnected".into()));
    }
    let mut l2p: Vec<usize> = (0..n).collect();
    let mut p2l: Vec<usize> = (0..n).collect();
    let mut out = Circuit::new(n)?;
    for g in c.gates() {
        if g.is_two_qubit() {
            let qs = g.qubits();
            let (mover, anchor) = (qs[0].min(qs[1]), qs[0].max(qs[1]));
            let (from, to) = (l2p[mover], l2p[anchor]);
            if !coupling.are_coupled(from, to) {
                let path = coupling
                    .shortest_path(from, to)
                    .expect("connected coupling map has a path");
                for hop in path.windows(2).take(path.len() - 2) {
                    let (a, b) = (hop[0], hop[1]);
                    out.push(Gate::Swap(a, b))?;
                    let (la, lb) = (p2l[a], p2l[b]);
                    p2l.swap(a, b);
                    l2p[la] = b;
                    l2p[lb] = a;
                }
            }
        }
        out.push(g.remap(|q| l2p[q]))?;
    }
    Ok((out, l2p))
}

/// Route, then decompose; deterministic for identical inputs.
pub fn compile(c: &Circuit, spec: &DeviceSpec) -> Result<CompiledCircuit> {
    let (routed, layout) = route(c, &spec.coupling)?;
    let circuit = decompose(&routed, spec)?;
    let stats = circuit.stats();
    Ok(CompiledCircuit { circuit, layout, stats })
}

/// Reorders a physical-qubit distribution into logical-qubit order.
pub fn relabel_distribution(probs: &[f64], layout: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; probs.len()];
    for (phys, &p) in probs.iter().enumerate() {
        let logical = layout
            .iter()
            .enumerate()
            .fold(0, |acc, (l, &ph)| acc | (((phys >> ph) & 1) << l));
        out[logical] += p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_qaoa_circuit, QaoaParams};
    use crate::problem::WeightedGraph;
    use crate::simulator::{run_statevector, simulate_exact};
    use num_complex::Complex64;

    fn restricted_linear(n: usize) -> DeviceSpec {
        DeviceSpec::new(CouplingMap::linear(n).unwrap(), NativeSet::restricted(), "chain")
    }

    fn instance_circuit() -> Circuit {
        build_qaoa_circuit(
            &WeightedGraph::paper_instance(),
            &QaoaParams::depth1(0.47, 0.31).unwrap(),
        )
        .unwrap()
    }

    /// Columns of the unitary, built by running each basis state.
    fn unitary(c: &Circuit) -> Vec<Vec<Complex64>> {
        let n = c.qubit_count();
        (0..1usize << n)
            .map(|col| {
                let mut basis = vec![Complex64::new(0.0, 0.0); 1 << n];
                basis[col] = Complex64::new(1.0, 0.0);
                let mut s = crate::simulator::Statevector::from_amplitudes(basis).unwrap();
                for g in c.gates() {
                    s.apply(g).unwrap();
                }
                s.amplitudes().to_vec()
            })
            .collect()
    }

    fn equal_up_to_phase(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> bool {
        let (i, j) = (0..a.len())
            .flat_map(|i| (0..a.len()).map(move |j| (i, j)))
            .find(|&(i, j)| a[i][j].norm() > 1e-6)
            .unwrap();
        let phase = b[i][j] / a[i][j];
        (phase.norm() - 1.0).abs() < 1e-9
            && a.iter()
                .flatten()
                .zip(b.iter().flatten())
                .all(|(x, y)| (x * phase - y).norm() < 1e-9)
    }

    #[test]
    fn hadamard_rule_is_equal_up_to_phase() {
        let h = Circuit::from_gates(1, [Gate::H(0)]).unwrap();
        let d = decompose(&h, &restricted_linear(1)).unwrap();
        assert_eq!(
            d.gates(),
            &[Gate::Rx(0, FRAC_PI_2), Gate::Rz(0, FRAC_PI_2), Gate::Rx(0, FRAC_PI_2)]
        );
        assert!(equal_up_to_phase(&unitary(&h), &unitary(&d)));
    }

    #[test]
    fn swap_rule_is_exact() {
        let s = Circuit::from_gates(2, [Gate::Swap(0, 1)]).unwrap();
        let d = decompose(&s, &restricted_linear(2)).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.gates().iter().all(|g| matches!(g, Gate::Cnot { .. })));
        let (u, v) = (unitary(&s), unitary(&d));
        assert!(u
            .iter()
            .flatten()
            .zip(v.iter().flatten())
            .all(|(x, y)| (x - y).norm() < 1e-12));
    }

    #[test]
    fn native_circuit_is_unchanged() {
        let c = Circuit::from_gates(
            2,
            [Gate::Rx(0, 0.3), Gate::Cnot { control: 1, target: 0 }, Gate::Rz(1, 1.0)],
        )
        .unwrap();
        assert_eq!(decompose(&c, &restricted_linear(2)).unwrap(), c);
    }

    #[test]
    fn missing_rule_is_an_error() {
        let spec = DeviceSpec::new(
            CouplingMap::full(1).unwrap(),
            NativeSet::new([GateKind::Rz, GateKind::Cnot]).unwrap(),
            "",
        );
        let h = Circuit::from_gates(1, [Gate::H(0)]).unwrap();
        assert!(matches!(decompose(&h, &spec), Err(Error::NoDecomposition { .. })));
        assert!(NativeSet::new([]).is_err());
    }

    #[test]
    fn full_coupling_routes_to_identity() {
        let c = instance_circuit();
        let (routed, layout) = route(&c, &CouplingMap::full(5).unwrap()).unwrap();
        assert_eq!(routed, c);
        assert_eq!(layout, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn long_cnot_on_chain() {
        let c = Circuit::from_gates(5, [Gate::H(4), Gate::Cnot { control: 4, target: 1 }]).unwrap();
        let chain = CouplingMap::linear(5).unwrap();
        let (routed, layout) = route(&c, &chain).unwrap();
        let swaps = routed.gates().iter().filter(|g| matches!(g, Gate::Swap(..))).count();
        assert!(swaps >= 2);
        assert_eq!(layout, vec![0, 3, 1, 2, 4]);
        let before = simulate_exact(&c).unwrap();
        let after = relabel_distribution(&simulate_exact(&routed).unwrap(), &layout);
        for (x, y) in before.iter().zip(&after) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn instance_circuit_on_chain_needs_swaps() {
        let compiled = compile(&instance_circuit(), &restricted_linear(5)).unwrap();
        assert!(compiled.stats.two_qubit_count > 10);
        for g in compiled.circuit.gates() {
            assert!(NativeSet::restricted().contains(g.kind()));
            if g.is_two_qubit() {
                let q = g.qubits();
                assert!(CouplingMap::linear(5).unwrap().are_coupled(q[0], q[1]));
            }
        }
        let before = run_statevector(&instance_circuit()).unwrap().probabilities();
        let after = relabel_distribution(&simulate_exact(&compiled.circuit).unwrap(), &compiled.layout);
        for (x, y) in before.iter().zip(&after) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn instance_circuit_chain_regression_baseline() {
        let compiled = compile(&instance_circuit(), &restricted_linear(5)).unwrap();
        assert_eq!(
            compiled.stats,
            CircuitStats {
                depth: 31,
                two_qubit_count: 28,
                gate_count: 53
            }
        );
        // three two-hop moves of six SWAPs in total happen to restore the identity layout
        assert_eq!(compiled.layout, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn full_extended_compile_keeps_stats() {
        let c = instance_circuit();
        let spec = DeviceSpec::new(CouplingMap::full(5).unwrap(), NativeSet::extended(), "");
        let compiled = compile(&c, &spec).unwrap();
        assert_eq!(compiled.stats, c.stats());
        assert_eq!(compiled.circuit, c);
    }

    #[test]
    fn empty_circuit_compiles_to_empty() {
        let c = Circuit::new(3).unwrap();
        let compiled = compile(&c, &restricted_linear(3)).unwrap();
        assert!(compiled.circuit.is_empty());
        assert_eq!(compiled.layout, vec![0, 1, 2]);
    }

    #[test]
    fn compile_is_deterministic() {
        let spec = restricted_linear(5);
        assert_eq!(
            compile(&instance_circuit(), &spec).unwrap(),
            compile(&instance_circuit(), &spec).unwrap()
        );
    }

    #[test]
    fn disconnected_coupling_rejected() {
        let m = CouplingMap::new(4, [(0, 1), (2, 3)]).unwrap();
        let c = Circuit::from_gates(4, [Gate::Cnot { control: 0, target: 3 }]).unwrap();
        assert!(route(&c, &m).is_err());
        assert!(CouplingMap::new(3, [(0, 3)]).is_err());
        assert!(route(&c, &CouplingMap::linear(3).unwrap()).is_err());
    }

    #[test]
    fn prefix_of_presets_stays_connected() {
        let chain = CouplingMap::linear(7).unwrap().prefix(5).unwrap();
        assert_eq!(chain, CouplingMap::linear(5).unwrap());
        assert!(CouplingMap::full(11).unwrap().prefix(5).unwrap().is_connected());
        assert!(CouplingMap::linear(3).unwrap().prefix(4).is_err());
    }

    #[test]
    fn compiled_circuit_json_round_trip() {
        let compiled = compile(&instance_circuit(), &restricted_linear(5)).unwrap();
        let text = serde_json::to_string(&compiled).unwrap();
        assert!(text.starts_with(r#"{"qubits":5,"gates":["#));
        assert!(text.contains(r#""layout":[0,1,2,3,4],"stats":{"depth":31,"#));
        let back: CompiledCircuit = serde_json::from_str(&text).unwrap();
        assert_eq!(back, compiled);
    }

    #[test]
    fn shortest_path_prefers_low_indices() {
        let ring = CouplingMap::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(ring.shortest_path(0, 2).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn device_spec_json() {
        let spec = restricted_linear(3);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            text,
            r#"{"coupling":{"preset":"linear","qubits":3},"native_set":"restricted","label":"chain"}"#
        );
        assert_eq!(serde_json::from_str::<DeviceSpec>(&text).unwrap(), spec);
        let custom: DeviceSpec =
            serde_json::from_str(r#"{"coupling":{"qubits":3,"pairs":[[0,2],[1,2]]},"native_set":["RZ","RX","CNOT"]}"#)
                .unwrap();
        assert!(custom.coupling.are_coupled(2, 0));
        assert_eq!(custom.native_set, NativeSet::restricted());
    }
}
