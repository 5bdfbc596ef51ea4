//! Statevector simulation, exact distributions and shot sampling with a
//! stochastic Pauli-trajectory depolarizing model.
//!
//! Basis index bit `q` holds qubit `q`; [`Assignment`] renders qubit 0 leftmost.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::problem::{Assignment, WeightedGraph, MAX_NODES};
use crate::seeding::{domain, rng_for};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// `|0…0⟩` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        check_capacity(n)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Statevector { n, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n || amps.is_empty() {
            return Err(Error::InvalidCircuit(format!(
                "amplitude vector length {} is not a power of two",
                amps.len()
            )));
        }
        check_capacity(n)?;
        let s = Statevector { n, amps };
        if (s.norm_sqr() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidCircuit("state is not normalized".into()));
        }
        Ok(s)
    }

    pub fn qubit_count(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_operand(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::InvalidCircuit(format!(
                "operand {q} out of range for {} qubits",
                self.n
            )));
        }
        Ok(())
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        let qs = gate.qubits();
        for &q in &qs {
            self.check_operand(q)?;
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::InvalidCircuit("two-qubit gate on a single qubit".into()));
        }
        match *gate {
            Gate::H(q) => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                self.apply_1q(q, [[h, h], [h, -h]]);
            }
            Gate::Rx(q, theta) => {
                let c = Complex64::new((theta / 2.0).cos(), 0.0);
                let s = Complex64::new(0.0, -(theta / 2.0).sin());
                self.apply_1q(q, [[c, s], [s, c]]);
            }
            Gate::Rz(q, theta) => {
                let lo = Complex64::from_polar(1.0, -theta / 2.0);
                let hi = Complex64::from_polar(1.0, theta / 2.0);
                let mask = 1 << q;
                for (i, a) in self.amps.iter_mut().enumerate() {
                    *a *= if i & mask == 0 { lo } else { hi };
                }
            }
            Gate::Cnot { control, target } => {
                let (cm, tm) = (1 << control, 1 << target);
                for i in 0..self.amps.len() {
                    if i & cm != 0 && i & tm == 0 {
                        self.amps.swap(i, i | tm);
                    }
                }
            }
            Gate::Swap(a, b) => {
                let (am, bm) = (1 << a, 1 << b);
                for i in 0..self.amps.len() {
                    if i & am != 0 && i & bm == 0 {
                        self.amps.swap(i, (i & !am) | bm);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_pauli(&mut self, q: usize, p: Pauli) -> Result<()> {
        self.check_operand(q)?;
        let mask = 1 << q;
        match p {
            Pauli::X => {
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        self.amps.swap(i, i | mask);
                    }
                }
            }
            Pauli::Y => {
                // Y|0> = i|1>, Y|1> = -i|0>
                let i_unit = Complex64::new(0.0, 1.0);
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        let a0 = self.amps[i];
                        let a1 = self.amps[i | mask];
                        self.amps[i] = -i_unit * a1;
                        self.amps[i | mask] = i_unit * a0;
                    }
                }
            }
            Pauli::Z => {
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & mask != 0 {
                        *a = -*a;
                    }
                }
            }
        }
        Ok(())
    }

    fn apply_1q(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let mask = 1 << q;
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | mask];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }
}

fn check_capacity(n: usize) -> Result<()> {
    if n > MAX_NODES {
        return Err(Error::CapacityExceeded {
            what: "circuit",
            got: n,
            limit: MAX_NODES,
        });
    }
    Ok(())
}

/// Final statevector of `c` started from `|0…0⟩`.
pub fn run_statevector(c: &Circuit) -> Result<Statevector> {
    let mut s = Statevector::zero(c.qubit_count())?;
    for g in c.gates() {
        s.apply(g)?;
    }
    Ok(s)
}

/// Exact outcome distribution, indexed by basis state.
pub fn simulate_exact(c: &Circuit) -> Result<Vec<f64>> {
    Ok(run_statevector(c)?.probabilities())
}

fn check_sizes(g: &WeightedGraph, c: &Circuit) -> Result<()> {
    if c.qubit_count() != g.node_count() {
        return Err(Error::LengthMismatch {
            expected: g.node_count(),
            got: c.qubit_count(),
        });
    }
    Ok(())
}

pub fn expectation_from_distribution(g: &WeightedGraph, probs: &[f64]) -> f64 {
    g.energy_table().iter().zip(probs).map(|(e, p)| e * p).sum()
}

pub fn expectation_exact(g: &WeightedGraph, c: &Circuit) -> Result<f64> {
    check_sizes(g, c)?;
    Ok(expectation_from_distribution(g, &simulate_exact(c)?))
}

/// Exact mean and variance of the energy of a single shot.
pub fn energy_moments_exact(g: &WeightedGraph, c: &Circuit) -> Result<(f64, f64)> {
    check_sizes(g, c)?;
    let probs = simulate_exact(c)?;
    let table = g.energy_table();
    let mean: f64 = table.iter().zip(&probs).map(|(e, p)| e * p).sum();
    let second: f64 = table.iter().zip(&probs).map(|(e, p)| e * e * p).sum();
    Ok((mean, (second - mean * mean).max(0.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    /// Depolarizing probability after each one-qubit gate, per operand.
    pub p1: f64,
    /// Depolarizing probability after each two-qubit gate, per operand.
    pub p2: f64,
    /// Classical bit-flip probability per measured bit.
    pub p_readout: f64,
    #[serde(default)]
    pub label: String,
}

impl NoiseProfile {
    pub fn new(p1: f64, p2: f64, p_readout: f64, label: impl Into<String>) -> Result<Self> {
        let n = NoiseProfile {
            p1,
            p2,
            p_readout,
            label: label.into(),
        };
        n.validate()?;
        Ok(n)
    }

    pub fn ideal() -> Self {
        NoiseProfile {
            p1: 0.0,
            p2: 0.0,
            p_readout: 0.0,
            label: "ideal".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2), ("p_readout", self.p_readout)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidNoise(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_gate_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0
    }

    pub fn is_noiseless(&self) -> bool {
        self.is_gate_noiseless() && self.p_readout == 0.0
    }
}

/// Measurement histogram over canonical bit strings.
///
/// JSON: `{"shots": 1000, "counts": {"01001": 137, ...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CountsFile")]
pub struct Counts {
    shots: u64,
    #[serde(rename = "counts")]
    histogram: BTreeMap<Assignment, u64>,
}

#[derive(Deserialize)]
struct CountsFile {
    shots: u64,
    counts: BTreeMap<Assignment, u64>,
}

impl TryFrom<CountsFile> for Counts {
    type Error = Error;

    fn try_from(f: CountsFile) -> Result<Self> {
        Counts::new(f.shots, f.counts)
    }
}

impl Counts {
    pub fn new(shots: u64, histogram: BTreeMap<Assignment, u64>) -> Result<Self> {
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        let total: u64 = histogram.values().sum();
        if total != shots {
            return Err(Error::InvalidCounts(format!(
                "histogram sums to {total}, expected {shots}"
            )));
        }
        let mut widths = histogram.keys().map(Assignment::len);
        if let Some(w) = widths.next() {
            if widths.any(|x| x != w) {
                return Err(Error::InvalidCounts("bit strings of mixed width".into()));
            }
        }
        let histogram = histogram.into_iter().filter(|&(_, c)| c > 0).collect();
        Ok(Counts { shots, histogram })
    }

    pub fn from_outcomes(outcomes: impl IntoIterator<Item = Assignment>) -> Result<Self> {
        let mut histogram = BTreeMap::new();
        let mut shots = 0;
        for x in outcomes {
            *histogram.entry(x).or_insert(0) += 1;
            shots += 1;
        }
        Counts::new(shots, histogram)
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn histogram(&self) -> &BTreeMap<Assignment, u64> {
        &self.histogram
    }

    pub fn get(&self, x: &Assignment) -> u64 {
        self.histogram.get(x).copied().unwrap_or(0)
    }

    pub fn width(&self) -> usize {
        self.histogram.keys().next().map_or(0, Assignment::len)
    }

    /// Maps outcomes measured on physical qubits back to logical qubits:
    /// logical qubit `q` was measured on physical qubit `layout[q]`.
    pub fn relabel(&self, layout: &[usize]) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (x, &c) in &self.histogram {
            if layout.iter().any(|&p| p >= x.len()) {
                return Err(Error::LengthMismatch {
                    expected: layout.len(),
                    got: x.len(),
                });
            }
            let logical = Assignment::new(layout.iter().map(|&p| x.bit(p)).collect());
            *out.entry(logical).or_insert(0) += c;
        }
        Counts::new(self.shots, out)
    }
}

fn draw_index(cumulative: &[f64], u: f64) -> usize {
    let total = *cumulative.last().expect("nonempty distribution");
    let target = u * total;
    cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1)
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

fn flip_readout(index: usize, n: usize, p: f64, rng: &mut impl Rng) -> usize {
    if p == 0.0 {
        return index;
    }
    (0..n).fold(index, |x, q| if rng.gen_bool(p) { x ^ (1 << q) } else { x })
}

fn random_pauli(rng: &mut impl Rng) -> Pauli {
    match rng.gen_range(0..3) {
        0 => Pauli::X,
        1 => Pauli::Y,
        _ => Pauli::Z,
    }
}

/// One noisy shot: returns the measured basis index before readout error.
fn trajectory_shot(c: &Circuit, noise: &NoiseProfile, rng: &mut impl Rng) -> Result<usize> {
    let mut s = Statevector::zero(c.qubit_count())?;
    for g in c.gates() {
        s.apply(g)?;
        let p = if g.is_two_qubit() { noise.p2 } else { noise.p1 };
        if p > 0.0 {
            for q in g.qubits() {
                if rng.gen_bool(p) {
                    s.apply_pauli(q, random_pauli(rng))?;
                }
            }
        }
    }
    let cum = cumulative(&s.probabilities());
    Ok(draw_index(&cum, rng.gen::<f64>()))
}

/// Samples `shots` measurements of `c` under `noise`.
///
/// Without gate noise the outcomes are drawn from the exact distribution; with
/// gate noise each shot runs its own Pauli trajectory seeded by its shot index.
/// Readout flips use a separate stream, so raising `p_readout` never changes
/// which pre-readout outcomes are drawn.
pub fn sample_counts(c: &Circuit, shots: u64, noise: &NoiseProfile, seed: u64) -> Result<Counts> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    noise.validate()?;
    let n = c.qubit_count();
    let mut readout_rng = rng_for(seed, &[domain::READOUT]);
    let mut hist: BTreeMap<usize, u64> = BTreeMap::new();
    if noise.is_gate_noiseless() {
        let cum = cumulative(&simulate_exact(c)?);
        let mut rng = rng_for(seed, &[domain::SAMPLE]);
        for _ in 0..shots {
            let x = draw_index(&cum, rng.gen::<f64>());
            let x = flip_readout(x, n, noise.p_readout, &mut readout_rng);
            *hist.entry(x).or_insert(0) += 1;
        }
    } else {
        for shot in 0..shots {
            let mut rng = rng_for(seed, &[domain::TRAJECTORY, shot]);
            let x = trajectory_shot(c, noise, &mut rng)?;
            let x = flip_readout(x, n, noise.p_readout, &mut readout_rng);
            *hist.entry(x).or_insert(0) += 1;
        }
    }
    Counts::new(
        shots,
        hist.into_iter()
            .map(|(i, k)| (Assignment::from_index(i, n), k))
            .collect(),
    )
}

pub fn energy_from_counts(g: &WeightedGraph, counts: &Counts) -> Result<f64> {
    if counts.histogram().is_empty() {
        return Err(Error::InvalidCounts("empty counts".into()));
    }
    let mut total = 0.0;
    for (x, &k) in counts.histogram() {
        total += k as f64 * g.energy(x)?;
    }
    Ok(total / counts.shots() as f64)
}
