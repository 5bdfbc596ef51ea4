//! Weighted MaxCut instances, cut/energy evaluation and the exhaustive oracle.
//!
//! Energies follow the convention `energy = -cut`, so lower is better and
//! landscape minima line up with good partitions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest graph (and circuit) handled by the statevector simulator and the oracle.
pub const MAX_NODES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// A MaxCut problem instance.
///
/// On disk: `{"nodes": n, "edges": [[u, v, w], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct WeightedGraph {
    node_count: usize,
    edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    nodes: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl TryFrom<GraphFile> for WeightedGraph {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Self> {
        WeightedGraph::new(file.nodes, file.edges)
    }
}

impl From<WeightedGraph> for GraphFile {
    fn from(g: WeightedGraph) -> Self {
        GraphFile {
            nodes: g.node_count,
            edges: g.edges.iter().map(|e| (e.u, e.v, e.weight)).collect(),
        }
    }
}

impl WeightedGraph {
    pub fn new<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if node_count == 0 {
            return Err(Error::InvalidGraph("node count must be positive".into()));
        }
        if node_count > MAX_NODES {
            return Err(Error::CapacityExceeded {
                what: "graph",
                got: node_count,
                limit: MAX_NODES,
            });
        }
        let mut stored: Vec<Edge> = Vec::new();
        for (u, v, weight) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) references a node outside 0..{node_count}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on node {u}")));
            }
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) has weight {weight}; weights must be finite and nonnegative"
                )));
            }
            let key = (u.min(v), u.max(v));
            if stored.iter().any(|e| (e.u.min(e.v), e.u.max(e.v)) == key) {
                return Err(Error::InvalidGraph(format!("duplicate edge {{{}, {}}}", key.0, key.1)));
            }
            stored.push(Edge { u, v, weight });
        }
        Ok(WeightedGraph {
            node_count,
            edges: stored,
        })
    }

    /// The five-node instance used throughout the experiment. Weights are the
    /// multipliers of the cost-layer R_Z angles, stored in circuit order.
    pub fn paper_instance() -> Self {
        WeightedGraph::new(5, [(0, 1, 3.0), (1, 2, 1.0), (1, 4, 1.0), (2, 4, 2.0), (3, 4, 2.0)])
            .expect("builtin instance is valid")
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Mean energy over all assignments, i.e. the maximally mixed state value.
    pub fn mixed_state_energy(&self) -> f64 {
        -self.total_weight() / 2.0
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization cannot fail")
    }

    fn check(&self, a: &Assignment) -> Result<()> {
        if a.len() != self.node_count {
            return Err(Error::LengthMismatch {
                expected: self.node_count,
                got: a.len(),
            });
        }
        Ok(())
    }

    pub fn cut_value(&self, a: &Assignment) -> Result<f64> {
        self.check(a)?;
        Ok(self.cut_of_index(a.to_index()))
    }

    pub fn energy(&self, a: &Assignment) -> Result<f64> {
        Ok(-self.cut_value(a)?)
    }

    /// Cut value of the basis state `index`, with node `q` at bit `q`.
    pub(crate) fn cut_of_index(&self, index: usize) -> f64 {
        self.edges
            .iter()
            .filter(|e| (index >> e.u) & 1 != (index >> e.v) & 1)
            .map(|e| e.weight)
            .sum()
    }

    /// Energy of every basis state, indexed like a statevector.
    pub fn energy_table(&self) -> Vec<f64> {
        (0..1usize << self.node_count).map(|i| -self.cut_of_index(i)).collect()
    }
}

/// A partition indicator / measured bit string. Rendered with node 0 leftmost.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment {
    bits: Vec<u8>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Assignment {
            bits: bits.into_iter().map(u8::from).collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Assignment { bits: vec![0; n] }
    }

    /// Basis-state index to assignment; bit `q` of the index is node `q`.
    pub fn from_index(index: usize, n: usize) -> Self {
        Assignment {
            bits: (0..n).map(|q| ((index >> q) & 1) as u8).collect(),
        }
    }

    pub fn to_index(&self) -> usize {
        self.bits
            .iter()
            .enumerate()
            .fold(0, |acc, (q, &b)| acc | ((b as usize) << q))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, node: usize) -> bool {
        self.bits[node] == 1
    }

    pub fn complement(&self) -> Self {
        Assignment {
            bits: self.bits.iter().map(|b| 1 - b).collect(),
        }
    }

    pub fn reversed(&self) -> Self {
        Assignment {
            bits: self.bits.iter().rev().copied().collect(),
        }
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::InvalidBitString(s.to_string())),
            })
            .collect::<Result<Vec<u8>>>()?;
        if bits.is_empty() {
            return Err(Error::InvalidBitString(s.to_string()));
        }
        Ok(Assignment { bits })
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Assignment {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxCutSolution {
    pub max_cut: f64,
    /// All maximizers, in ascending basis-index order.
    pub argmax: Vec<Assignment>,
}

/// Exhaustive MaxCut over all `2^n` assignments.
pub fn brute_force_max_cut(g: &WeightedGraph) -> Result<MaxCutSolution> {
    let n = g.node_count();
    if n > MAX_NODES {
        return Err(Error::CapacityExceeded {
            what: "graph",
            got: n,
            limit: MAX_NODES,
        });
    }
    let mut best = f64::NEG_INFINITY;
    let mut argmax = Vec::new();
    for index in 0..1usize << n {
        let cut = g.cut_of_index(index);
        if cut > best {
            best = cut;
            argmax.clear();
        }
        if cut == best {
            argmax.push(index);
        }
    }
    Ok(MaxCutSolution {
        max_cut: best,
        argmax: argmax.into_iter().map(|i| Assignment::from_index(i, n)).collect(),
    })
}
