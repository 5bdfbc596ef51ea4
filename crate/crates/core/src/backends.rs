//! Backend descriptors, quirky result formats and a uniform access layer.
//!
//! Mock backends reproduce the inconsistencies of hosted offerings: some do
//! not accept batches, some report bit strings reversed or one string per
//! shot, metadata keys differ, and some keep compiled circuits private.
//! [`normalize`] turns every raw result into canonical [`Counts`] plus one
//! metadata record, and [`AccessLayer::execute`] hides the batching quirk.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitStats};
use crate::compiler::{compile, relabel_distribution, CompiledCircuit, CouplingMap, DeviceSpec, NativeSet};
use crate::error::{Error, Result};
use crate::problem::{Assignment, WeightedGraph};
use crate::seeding::{derive_seed, domain};
use crate::simulator::{expectation_from_distribution, sample_counts, simulate_exact, Counts, NoiseProfile};

/// Start of the simulated clock, in milliseconds since the Unix epoch.
pub const CLOCK_EPOCH_MS: u64 = 1_735_689_600_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitOrder {
    Canonical,
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultStyle {
    Aggregated,
    PerShot,
}

/// Which metadata keys a backend uses in its raw results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetadataDialect {
    /// `backend`, `shots`, `submitted_at`, `completed_at`.
    #[default]
    Plain,
    /// `device`, `device_version`, `shot_count`, `queued_at_ms`, `finished_at_ms`.
    Verbose,
    /// `backend_name`, `nshots`, `created`; no completion time.
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub supports_batching: bool,
    pub bit_order: BitOrder,
    pub result_style: ResultStyle,
    pub exposes_compiled: bool,
    /// Whether exact expectation values may be requested instead of shots.
    #[serde(default)]
    pub supports_exact: bool,
    pub device_spec: DeviceSpec,
    pub noise: NoiseProfile,
    /// Simulated queue delay in milliseconds.
    #[serde(default)]
    pub queue_delay_ms: u64,
    #[serde(default)]
    pub metadata: MetadataDialect,
}

impl BackendDescriptor {
    fn device_for(&self, qubits: usize) -> Result<DeviceSpec> {
        let available = self.device_spec.coupling.qubit_count();
        if qubits > available {
            return Err(Error::Capability {
                backend: self.name.clone(),
                capability: format!("{qubits}-qubit circuits (device has {available} qubits)"),
            });
        }
        let coupling = self.device_spec.coupling.prefix(qubits)?;
        if !coupling.is_connected() {
            return Err(Error::Capability {
                backend: self.name.clone(),
                capability: format!("{qubits}-qubit circuits (qubits 0..{qubits} are not connected)"),
            });
        }
        Ok(DeviceSpec::new(
            coupling,
            self.device_spec.native_set.clone(),
            self.device_spec.label.clone(),
        ))
    }

    pub fn compile(&self, c: &Circuit) -> Result<CompiledCircuit> {
        compile(c, &self.device_for(c.qubit_count())?)
    }
}

/// The bundled backends: `local-exact`, `mock-iontrap` and `mock-superconducting`.
pub fn registry() -> Vec<BackendDescriptor> {
    vec![
        BackendDescriptor {
            name: "local-exact".into(),
            supports_batching: true,
            bit_order: BitOrder::Canonical,
            result_style: ResultStyle::Aggregated,
            exposes_compiled: true,
            supports_exact: true,
            device_spec: DeviceSpec::new(
                CouplingMap::full(crate::problem::MAX_NODES).expect("valid preset"),
                NativeSet::extended(),
                "ideal all-to-all",
            ),
            noise: NoiseProfile::ideal(),
            queue_delay_ms: 0,
            metadata: MetadataDialect::Plain,
        },
        BackendDescriptor {
            name: "mock-iontrap".into(),
            supports_batching: true,
            bit_order: BitOrder::Canonical,
            result_style: ResultStyle::Aggregated,
            exposes_compiled: true,
            supports_exact: false,
            device_spec: DeviceSpec::new(
                CouplingMap::full(11).expect("valid preset"),
                NativeSet::extended(),
                "11-qubit all-to-all trap",
            ),
            noise: NoiseProfile {
                p1: 0.0005,
                p2: 0.005,
                p_readout: 0.003,
                label: "low".into(),
            },
            queue_delay_ms: 5 * 60 * 1000,
            metadata: MetadataDialect::Verbose,
        },
        BackendDescriptor {
            name: "mock-superconducting".into(),
            supports_batching: false,
            bit_order: BitOrder::Reversed,
            result_style: ResultStyle::PerShot,
            exposes_compiled: false,
            supports_exact: false,
            device_spec: DeviceSpec::new(
                CouplingMap::linear(7).expect("valid preset"),
                NativeSet::restricted(),
                "7-qubit chain",
            ),
            noise: NoiseProfile {
                p1: 0.002,
                p2: 0.02,
                p_readout: 0.02,
                label: "high".into(),
            },
            queue_delay_ms: 2 * 60 * 60 * 1000,
            metadata: MetadataDialect::Sparse,
        },
    ]
}

/// Parses a JSON array of descriptors (or `{"backends": [...]}`).
pub fn load_descriptors(text: &str) -> Result<Vec<BackendDescriptor>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum File {
        List(Vec<BackendDescriptor>),
        Wrapped { backends: Vec<BackendDescriptor> },
    }
    let list = match serde_json::from_str(text)? {
        File::List(l) => l,
        File::Wrapped { backends } => backends,
    };
    for d in &list {
        d.noise.validate()?;
    }
    Ok(list)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Aggregated(BTreeMap<String, u64>),
    PerShot(Vec<String>),
}

/// A result exactly as a backend hands it out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResult {
    pub payload: Payload,
    pub metadata: BTreeMap<String, String>,
}

/// Canonical metadata; `None` marks information the backend did not report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub backend: String,
    pub shots: u64,
    pub submitted_at: Option<u64>,
    pub completed_at: Option<u64>,
    pub compiled_stats: Option<CircuitStats>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedResult {
    pub counts: Counts,
    pub metadata: RunMetadata,
}

impl MetadataDialect {
    fn keys(self) -> [&'static str; 4] {
        match self {
            MetadataDialect::Plain => ["backend", "shots", "submitted_at", "completed_at"],
            MetadataDialect::Verbose => ["device", "shot_count", "queued_at_ms", "finished_at_ms"],
            MetadataDialect::Sparse => ["backend_name", "nshots", "created", ""],
        }
    }

    fn stats_keys(self) -> [&'static str; 3] {
        match self {
            MetadataDialect::Verbose => ["compiled.depth", "compiled.two_qubit_gates", "compiled.gates"],
            _ => ["compiled_depth", "compiled_two_qubit_count", "compiled_gate_count"],
        }
    }

    fn render(self, m: &RunMetadata) -> BTreeMap<String, String> {
        let [name, shots, submitted, completed] = self.keys();
        let mut out = BTreeMap::new();
        out.insert(name.to_string(), m.backend.clone());
        out.insert(shots.to_string(), m.shots.to_string());
        if let Some(t) = m.submitted_at {
            out.insert(submitted.to_string(), t.to_string());
        }
        if let (false, Some(t)) = (completed.is_empty(), m.completed_at) {
            out.insert(completed.to_string(), t.to_string());
        }
        if self == MetadataDialect::Verbose {
            out.insert("device_version".into(), "2.3.1".into());
        }
        if let Some(s) = m.compiled_stats {
            let [depth, two, gates] = self.stats_keys();
            out.insert(depth.into(), s.depth.to_string());
            out.insert(two.into(), s.two_qubit_count.to_string());
            out.insert(gates.into(), s.gate_count.to_string());
        }
        out
    }

    fn parse(self, raw: &BTreeMap<String, String>, d: &BackendDescriptor) -> Result<(Option<u64>, RunMetadata)> {
        let number = |key: &str| -> Result<Option<u64>> {
            match raw.get(key) {
                None => Ok(None),
                Some(v) => v.parse().map(Some).map_err(|_| Error::PayloadMismatch {
                    backend: d.name.clone(),
                    detail: format!("metadata {key}={v:?} is not an integer"),
                }),
            }
        };
        let [name, shots, submitted, completed] = self.keys();
        let [depth, two, gates] = self.stats_keys();
        let compiled_stats = match (number(depth)?, number(two)?, number(gates)?) {
            (Some(depth), Some(two), Some(gates)) => Some(CircuitStats {
                depth: depth as usize,
                two_qubit_count: two as usize,
                gate_count: gates as usize,
            }),
            _ => None,
        };
        let meta = RunMetadata {
            backend: raw.get(name).cloned().unwrap_or_else(|| d.name.clone()),
            shots: 0,
            submitted_at: number(submitted)?,
            completed_at: if completed.is_empty() { None } else { number(completed)? },
            compiled_stats,
        };
        Ok((number(shots)?, meta))
    }
}

/// Renders canonical counts in the backend's own format.
pub fn encode(counts: &Counts, meta: &RunMetadata, d: &BackendDescriptor) -> RawResult {
    let render = |x: &Assignment| match d.bit_order {
        BitOrder::Canonical => x.to_string(),
        BitOrder::Reversed => x.reversed().to_string(),
    };
    let payload = match d.result_style {
        ResultStyle::Aggregated => {
            Payload::Aggregated(counts.histogram().iter().map(|(x, &k)| (render(x), k)).collect())
        }
        ResultStyle::PerShot => Payload::PerShot(
            counts
                .histogram()
                .iter()
                .flat_map(|(x, &k)| std::iter::repeat_n(render(x), k as usize))
                .collect(),
        ),
    };
    RawResult {
        payload,
        metadata: d.metadata.render(meta),
    }
}

/// Converts a raw result into canonical counts and metadata.
pub fn normalize(raw: &RawResult, d: &BackendDescriptor) -> Result<NormalizedResult> {
    let mismatch = |detail: String| Error::PayloadMismatch {
        backend: d.name.clone(),
        detail,
    };
    let parse = |s: &str| -> Result<Assignment> {
        let x: Assignment = s.parse()?;
        Ok(match d.bit_order {
            BitOrder::Canonical => x,
            BitOrder::Reversed => x.reversed(),
        })
    };
    let counts = match (&raw.payload, d.result_style) {
        (Payload::Aggregated(map), ResultStyle::Aggregated) => {
            let mut hist = BTreeMap::new();
            for (s, &k) in map {
                *hist.entry(parse(s)?).or_insert(0) += k;
            }
            let shots = hist.values().sum();
            Counts::new(shots, hist)?
        }
        (Payload::PerShot(list), ResultStyle::PerShot) => {
            Counts::from_outcomes(list.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?)?
        }
        (Payload::Aggregated(_), ResultStyle::PerShot) => {
            return Err(mismatch("expected per-shot bit strings, got aggregated counts".into()))
        }
        (Payload::PerShot(_), ResultStyle::Aggregated) => {
            return Err(mismatch("expected aggregated counts, got per-shot bit strings".into()))
        }
    };
    let (reported_shots, mut metadata) = d.metadata.parse(&raw.metadata, d)?;
    if let Some(n) = reported_shots {
        if n != counts.shots() {
            return Err(mismatch(format!(
                "metadata reports {n} shots but payload holds {}",
                counts.shots()
            )));
        }
    }
    metadata.shots = counts.shots();
    Ok(NormalizedResult { counts, metadata })
}

pub type JobId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobStatus {
    Queued,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JobSummary {
    pub id: JobId,
    pub backend: String,
    pub circuits: usize,
    pub shots: u64,
    pub submitted_at: u64,
    pub completed_at: u64,
}

/// One line of the job log.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct JobRecord {
    id: JobId,
    backend: String,
    shots: u64,
    seed: u64,
    submitted_at: u64,
    completed_at: u64,
    results: Vec<RawResult>,
    compiled: Vec<CompiledCircuit>,
}

/// Uniform entry point to a set of backends, with a shared job store.
pub struct AccessLayer {
    backends: BTreeMap<String, BackendDescriptor>,
    jobs: Mutex<BTreeMap<JobId, Arc<JobRecord>>>,
    next_job: AtomicU64,
    clock_ms: AtomicU64,
    log: Option<Mutex<File>>,
}

impl AccessLayer {
    pub fn new(descriptors: impl IntoIterator<Item = BackendDescriptor>) -> Result<Self> {
        let mut backends = BTreeMap::new();
        for d in descriptors {
            d.noise.validate()?;
            if backends.contains_key(&d.name) {
                return Err(Error::DuplicateBackend(d.name));
            }
            backends.insert(d.name.clone(), d);
        }
        Ok(AccessLayer {
            backends,
            jobs: Mutex::new(BTreeMap::new()),
            next_job: AtomicU64::new(1),
            clock_ms: AtomicU64::new(CLOCK_EPOCH_MS),
            log: None,
        })
    }

    pub fn with_registry() -> Self {
        AccessLayer::new(registry()).expect("bundled registry is valid")
    }

    /// Attaches an append-only JSON-lines job log, loading earlier jobs from it.
    pub fn with_job_log(mut self, path: &Path) -> Result<Self> {
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            let mut jobs = self.jobs.lock().expect("job store poisoned");
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: JobRecord = serde_json::from_str(&line)?;
                if let Some(n) = record.id.strip_prefix("job-").and_then(|n| n.parse::<u64>().ok()) {
                    self.next_job.fetch_max(n + 1, Ordering::SeqCst);
                }
                self.clock_ms.fetch_max(record.completed_at, Ordering::SeqCst);
                jobs.insert(record.id.clone(), Arc::new(record));
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.log = Some(Mutex::new(file));
        Ok(self)
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &BackendDescriptor> {
        self.backends.values()
    }

    pub fn descriptor(&self, name: &str) -> Result<&BackendDescriptor> {
        self.backends
            .get(name)
            .ok_or_else(|| Error::UnknownBackend(name.to_string()))
    }

    /// Current simulated time in milliseconds since the Unix epoch.
    pub fn now_ms(&self) -> u64 {
        self.clock_ms.load(Ordering::SeqCst)
    }

    /// Enqueues `circuits` as one job. Circuit `i` is sampled with a seed derived
    /// from `(seed, i)`.
    pub fn submit(&self, backend: &str, circuits: &[Circuit], shots: u64, seed: u64) -> Result<JobId> {
        self.submit_indexed(backend, circuits, 0, shots, seed)
    }

    fn submit_indexed(
        &self,
        backend: &str,
        circuits: &[Circuit],
        first_index: u64,
        shots: u64,
        seed: u64,
    ) -> Result<JobId> {
        let d = self.descriptor(backend)?;
        if circuits.len() > 1 && !d.supports_batching {
            return Err(Error::Capability {
                backend: d.name.clone(),
                capability: format!("batched submission ({} circuits in one job)", circuits.len()),
            });
        }
        if circuits.is_empty() {
            return Err(Error::InvalidCircuit("job contains no circuits".into()));
        }
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        let submitted_at = self.now_ms();
        let completed_at = submitted_at + d.queue_delay_ms;
        let executed: Vec<(CompiledCircuit, Counts)> = circuits
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let compiled = d.compile(c)?;
                let circuit_seed = derive_seed(seed, &[domain::CIRCUIT, first_index + i as u64]);
                let physical = sample_counts(&compiled.circuit, shots, &d.noise, circuit_seed)?;
                Ok((compiled.clone(), physical.relabel(&compiled.layout)?))
            })
            .collect::<Result<_>>()?;
        let mut results = Vec::with_capacity(executed.len());
        let mut compiled = Vec::with_capacity(executed.len());
        for (cc, counts) in executed {
            let meta = RunMetadata {
                backend: d.name.clone(),
                shots,
                submitted_at: Some(submitted_at),
                completed_at: Some(completed_at),
                compiled_stats: d.exposes_compiled.then_some(cc.stats),
            };
            results.push(encode(&counts, &meta, d));
            compiled.push(cc);
        }
        let id = format!("job-{:06}", self.next_job.fetch_add(1, Ordering::SeqCst));
        let record = JobRecord {
            id: id.clone(),
            backend: d.name.clone(),
            shots,
            seed,
            submitted_at,
            completed_at,
            results,
            compiled,
        };
        if let Some(log) = &self.log {
            let mut f = log.lock().expect("job log poisoned");
            writeln!(f, "{}", serde_json::to_string(&record)?)?;
        }
        self.jobs
            .lock()
            .expect("job store poisoned")
            .insert(id.clone(), Arc::new(record));
        Ok(id)
    }

    fn job(&self, id: &str) -> Result<Arc<JobRecord>> {
        self.jobs
            .lock()
            .expect("job store poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownJob(id.to_string()))
    }

    pub fn job_ids(&self) -> Vec<JobId> {
        self.jobs.lock().expect("job store poisoned").keys().cloned().collect()
    }

    pub fn job_summary(&self, id: &str) -> Result<JobSummary> {
        let job = self.job(id)?;
        Ok(JobSummary {
            id: job.id.clone(),
            backend: job.backend.clone(),
            circuits: job.results.len(),
            shots: job.shots,
            submitted_at: job.submitted_at,
            completed_at: job.completed_at,
        })
    }

    pub fn status(&self, id: &str) -> Result<JobStatus> {
        let job = self.job(id)?;
        Ok(if self.now_ms() >= job.completed_at {
            JobStatus::Completed
        } else {
            JobStatus::Queued
        })
    }

    /// Waits (in simulated time) for the job and returns its raw results.
    pub fn fetch(&self, id: &str) -> Result<Vec<RawResult>> {
        let job = self.job(id)?;
        self.clock_ms.fetch_max(job.completed_at, Ordering::SeqCst);
        Ok(job.results.clone())
    }

    pub fn fetch_normalized(&self, id: &str) -> Result<Vec<NormalizedResult>> {
        let job = self.job(id)?;
        let d = self.descriptor(&job.backend)?;
        self.fetch(id)?.iter().map(|r| normalize(r, d)).collect()
    }

    /// Compiled circuits of a job, if the backend discloses them.
    pub fn compiled(&self, id: &str) -> Result<Vec<CompiledCircuit>> {
        let job = self.job(id)?;
        let d = self.descriptor(&job.backend)?;
        if !d.exposes_compiled {
            return Err(Error::Capability {
                backend: d.name.clone(),
                capability: "disclosing compiled circuits".into(),
            });
        }
        Ok(job.compiled.clone())
    }

    /// Runs circuits and returns normalized results in input order, batching
    /// when the backend allows it and submitting one job per circuit otherwise.
    /// `first_index` offsets the per-circuit seed index so a long sequence can
    /// be executed in slices with identical results.
    pub fn execute(
        &self,
        backend: &str,
        circuits: &[Circuit],
        first_index: u64,
        shots: u64,
        seed: u64,
    ) -> Result<Vec<NormalizedResult>> {
        let d = self.descriptor(backend)?;
        if d.supports_batching {
            let id = self.submit_indexed(backend, circuits, first_index, shots, seed)?;
            return self.fetch_normalized(&id);
        }
        circuits
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let id = self.submit_indexed(backend, std::slice::from_ref(c), first_index + i as u64, shots, seed)?;
                Ok(self.fetch_normalized(&id)?.remove(0))
            })
            .collect()
    }

    /// Noise-free expectation value of the compiled circuit, for backends that offer it.
    pub fn expectation_exact(&self, backend: &str, g: &WeightedGraph, c: &Circuit) -> Result<f64> {
        let d = self.descriptor(backend)?;
        if !d.supports_exact {
            return Err(Error::Capability {
                backend: d.name.clone(),
                capability: "exact expectation values".into(),
            });
        }
        if c.qubit_count() != g.node_count() {
            return Err(Error::LengthMismatch {
                expected: g.node_count(),
                got: c.qubit_count(),
            });
        }
        let compiled = d.compile(c)?;
        let probs = relabel_distribution(&simulate_exact(&compiled.circuit)?, &compiled.layout);
        Ok(expectation_from_distribution(g, &probs))
    }
}
