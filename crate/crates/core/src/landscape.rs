//! Grid sampling of QAOA energy landscapes and the warm-started depth-2 chain.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{AccessLayer, BackendDescriptor};
use crate::circuit::{build_qaoa_circuit, Circuit, QaoaParams};
use crate::error::{Error, Result};
use crate::problem::WeightedGraph;
use crate::seeding::{derive_seed, domain};
use crate::simulator::energy_from_counts;

pub const DEFAULT_SHOTS: u64 = 1000;
/// Grid spacing is `π / DEFAULT_DIVISOR`.
pub const DEFAULT_DIVISOR: usize = 20;

/// Sample points for γ and β, each strictly ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFile")]
pub struct GridSpec {
    gamma_values: Vec<f64>,
    beta_values: Vec<f64>,
}

#[derive(Deserialize)]
struct GridFile {
    gamma_values: Vec<f64>,
    beta_values: Vec<f64>,
}

impl TryFrom<GridFile> for GridSpec {
    type Error = Error;

    fn try_from(f: GridFile) -> Result<Self> {
        GridSpec::new(f.gamma_values, f.beta_values)
    }
}

impl Default for GridSpec {
    /// γ ∈ {0, π/20, …, π} and β ∈ {0, π/20, …, π/2}.
    fn default() -> Self {
        GridSpec::with_divisor(DEFAULT_DIVISOR).expect("default divisor is valid")
    }
}

impl GridSpec {
    pub fn new(gamma_values: Vec<f64>, beta_values: Vec<f64>) -> Result<Self> {
        for (axis, values) in [("gamma", &gamma_values), ("beta", &beta_values)] {
            if values.is_empty() {
                return Err(Error::InvalidGrid(format!("{axis} axis is empty")));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidGrid(format!("{axis} axis has non-finite values")));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGrid(format!("{axis} values must be strictly ascending")));
            }
        }
        Ok(GridSpec {
            gamma_values,
            beta_values,
        })
    }

    /// `γ = kπ/d` for `k = 0..=d` and `β = kπ/d` for `k = 0..=d/2`; `d` must be even.
    pub fn with_divisor(divisor: usize) -> Result<Self> {
        if divisor == 0 || !divisor.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "divisor must be a positive even number, got {divisor}"
            )));
        }
        let step = PI / divisor as f64;
        GridSpec::new(
            (0..=divisor).map(|k| k as f64 * step).collect(),
            (0..=divisor / 2).map(|k| k as f64 * step).collect(),
        )
    }

    pub fn gamma_values(&self) -> &[f64] {
        &self.gamma_values
    }

    pub fn beta_values(&self) -> &[f64] {
        &self.beta_values
    }

    pub fn point_count(&self) -> usize {
        self.gamma_values.len() * self.beta_values.len()
    }
}

/// Shot budget per grid point, or noise-free expectation values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotMode {
    Exact,
    Shots(u64),
}

impl Serialize for ShotMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ShotMode::Exact => s.serialize_str("exact"),
            ShotMode::Shots(n) => s.serialize_u64(*n),
        }
    }
}

impl<'de> Deserialize<'de> for ShotMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(u64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Count(0) => Err(serde::de::Error::custom("shots must be positive")),
            Repr::Count(n) => Ok(ShotMode::Shots(n)),
            Repr::Word(w) if w == "exact" => Ok(ShotMode::Exact),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "expected \"exact\" or a count, got {w:?}"
            ))),
        }
    }
}

/// Fixed angles of the first QAOA layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub gamma: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeMeta {
    pub backend: String,
    pub shots: ShotMode,
    pub depth: usize,
    pub fixed_layer1: Option<Layer>,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub graph: WeightedGraph,
}

/// Energies `E(γ, β)` indexed `[gamma_index][beta_index]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LandscapeFile")]
pub struct Landscape {
    grid: GridSpec,
    energies: Vec<Vec<f64>>,
    meta: LandscapeMeta,
}

#[derive(Deserialize)]
struct LandscapeFile {
    grid: GridSpec,
    energies: Vec<Vec<f64>>,
    meta: LandscapeMeta,
}

impl TryFrom<LandscapeFile> for Landscape {
    type Error = Error;

    fn try_from(f: LandscapeFile) -> Result<Self> {
        Landscape::new(f.grid, f.energies, f.meta)
    }
}

impl Landscape {
    pub fn new(grid: GridSpec, energies: Vec<Vec<f64>>, meta: LandscapeMeta) -> Result<Self> {
        let (ng, nb) = (grid.gamma_values.len(), grid.beta_values.len());
        if energies.len() != ng || energies.iter().any(|row| row.len() != nb) {
            return Err(Error::InvalidLandscape(format!("energy matrix must be {ng} x {nb}")));
        }
        if energies.iter().flatten().any(|e| !e.is_finite()) {
            return Err(Error::InvalidLandscape("non-finite energy".into()));
        }
        match (meta.depth, meta.fixed_layer1) {
            (1, None) | (2, Some(_)) => {}
            (1, Some(_)) => return Err(Error::InvalidLandscape("depth-1 landscape cannot fix layer 1".into())),
            (2, None) => return Err(Error::InvalidLandscape("depth-2 landscape needs fixed_layer1".into())),
            (p, _) => return Err(Error::InvalidLandscape(format!("depth must be 1 or 2, got {p}"))),
        }
        Ok(Landscape { grid, energies, meta })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn energies(&self) -> &[Vec<f64>] {
        &self.energies
    }

    pub fn energy(&self, gamma_index: usize, beta_index: usize) -> f64 {
        self.energies[gamma_index][beta_index]
    }

    pub fn meta(&self) -> &LandscapeMeta {
        &self.meta
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("landscape serialization cannot fail")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Landscape::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    /// `gamma,beta,energy`, one row per point, γ-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,beta,energy\n");
        for (gi, &gamma) in self.grid.gamma_values.iter().enumerate() {
            for (bi, &beta) in self.grid.beta_values.iter().enumerate() {
                writeln!(out, "{gamma},{beta},{}", self.energies[gi][bi]).expect("write to string");
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeRequest {
    pub depth: usize,
    pub fixed_layer1: Option<Layer>,
    pub grid: GridSpec,
    pub shots: ShotMode,
    pub seed: u64,
}

impl LandscapeRequest {
    pub fn depth1(grid: GridSpec, shots: ShotMode, seed: u64) -> Self {
        LandscapeRequest {
            depth: 1,
            fixed_layer1: None,
            grid,
            shots,
            seed,
        }
    }

    pub fn depth2(fixed: Layer, grid: GridSpec, shots: ShotMode, seed: u64) -> Self {
        LandscapeRequest {
            depth: 2,
            fixed_layer1: Some(fixed),
            grid,
            shots,
            seed,
        }
    }

    fn params(&self, gamma: f64, beta: f64) -> Result<QaoaParams> {
        match self.fixed_layer1 {
            None => QaoaParams::depth1(gamma, beta),
            Some(l) => QaoaParams::new(vec![l.gamma, gamma], vec![l.beta, beta]),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SamplingOptions {
    /// Thread count for point evaluation; 0 uses the global pool.
    pub workers: usize,
    /// Directory for per-row checkpoints. A finished run removes its checkpoint.
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, PartialEq)]
struct CheckpointHeader {
    backend: BackendDescriptor,
    depth: usize,
    fixed_layer1: Option<Layer>,
    shots: ShotMode,
    seed: u64,
    grid: GridSpec,
    graph: WeightedGraph,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRow {
    row: usize,
    energies: Vec<f64>,
}

/// Append-only JSON lines: a header describing the run, then one line per finished row.
struct Checkpoint {
    path: PathBuf,
    header: String,
    file: Option<File>,
}

impl Checkpoint {
    fn path_for(dir: &Path, backend: &str, depth: usize) -> PathBuf {
        dir.join(format!("{backend}-depth{depth}.checkpoint.jsonl"))
    }

    /// Reads rows finished by an earlier run. The file is created on the first append.
    fn open(path: PathBuf, header: &CheckpointHeader, rows: usize) -> Result<(Self, Vec<Option<Vec<f64>>>)> {
        let mut done = vec![None; rows];
        let mut file = None;
        if path.exists() {
            let mut lines = BufReader::new(File::open(&path)?).lines();
            let first = lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Checkpoint(format!("{} is empty", path.display())))?;
            let found: CheckpointHeader =
                serde_json::from_str(&first).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
            if &found != header {
                return Err(Error::Checkpoint(format!(
                    "{} was written by a different configuration; remove it to start over",
                    path.display()
                )));
            }
            for line in lines {
                let line = line?;
                // a torn final line from an interrupted write is ignored
                let Ok(r) = serde_json::from_str::<CheckpointRow>(&line) else {
                    continue;
                };
                if r.row < rows {
                    done[r.row] = Some(r.energies);
                }
            }
            let mut f = OpenOptions::new().append(true).open(&path)?;
            // start appended rows on a fresh line after a torn write
            writeln!(f)?;
            file = Some(f);
        }
        let header = serde_json::to_string(header)?;
        Ok((Checkpoint { path, header, file }, done))
    }

    fn append(&mut self, row: usize, energies: &[f64]) -> Result<()> {
        let line = serde_json::to_string(&CheckpointRow {
            row,
            energies: energies.to_vec(),
        })?;
        let file = match &mut self.file {
            Some(f) => f,
            None => {
                let mut f = File::create(&self.path)?;
                writeln!(f, "{}", self.header)?;
                self.file.insert(f)
            }
        };
        writeln!(file, "{line}")?;
        file.flush()?;
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if self.file.is_some() {
            drop(self.file);
            fs::remove_file(&self.path)?;
        }
        Ok(())
    }
}

fn at_point(gamma_index: usize, beta_index: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        e @ Error::AtPoint { .. } => e,
        e => Error::AtPoint {
            gamma_index,
            beta_index,
            source: Box::new(e),
        },
    }
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Evaluates the energy at every grid point through `backend`.
///
/// Rows (fixed γ) are evaluated one after another; a row is one batch on
/// batching backends and one job per point otherwise. Point `(gi, bi)` always
/// uses seed index `gi·|B| + bi`, so results do not depend on worker count,
/// batching or resumption.
pub fn sample_landscape(
    access: &AccessLayer,
    backend: &str,
    g: &WeightedGraph,
    request: &LandscapeRequest,
    options: &SamplingOptions,
) -> Result<Landscape> {
    let meta = LandscapeMeta {
        backend: backend.to_string(),
        shots: request.shots,
        depth: request.depth,
        fixed_layer1: request.fixed_layer1,
        seed: request.seed,
        created_at: unix_seconds(),
        graph: g.clone(),
    };
    // validates depth / fixed layer pairing before any work
    Landscape::new(
        request.grid.clone(),
        vec![vec![0.0; request.grid.beta_values.len()]; request.grid.gamma_values.len()],
        meta.clone(),
    )?;
    access.descriptor(backend)?;

    let pool = if options.workers > 0 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(options.workers)
                .build()
                .map_err(|e| Error::Io(std::io::Error::other(e)))?,
        )
    } else {
        None
    };
    let run = || sample_rows(access, backend, g, request, options, meta);
    match pool {
        Some(p) => p.install(run),
        None => run(),
    }
}

fn sample_rows(
    access: &AccessLayer,
    backend: &str,
    g: &WeightedGraph,
    request: &LandscapeRequest,
    options: &SamplingOptions,
    meta: LandscapeMeta,
) -> Result<Landscape> {
    let grid = &request.grid;
    let nb = grid.beta_values.len();
    let header = CheckpointHeader {
        backend: access.descriptor(backend)?.clone(),
        depth: request.depth,
        fixed_layer1: request.fixed_layer1,
        shots: request.shots,
        seed: request.seed,
        grid: grid.clone(),
        graph: g.clone(),
    };
    let (mut checkpoint, mut rows) = match &options.checkpoint_dir {
        Some(dir) => {
            let path = Checkpoint::path_for(dir, backend, request.depth);
            let (c, done) = Checkpoint::open(path, &header, grid.gamma_values.len())?;
            (Some(c), done)
        }
        None => (None, vec![None; grid.gamma_values.len()]),
    };
    let stream_seed = derive_seed(request.seed, &[domain::LANDSCAPE, request.depth as u64]);

    for (gi, &gamma) in grid.gamma_values.iter().enumerate() {
        if rows[gi].is_some() {
            continue;
        }
        let circuits = grid
            .beta_values
            .iter()
            .enumerate()
            .map(|(bi, &beta)| {
                request
                    .params(gamma, beta)
                    .and_then(|p| build_qaoa_circuit(g, &p))
                    .map_err(at_point(gi, bi))
            })
            .collect::<Result<Vec<Circuit>>>()?;
        let energies = match request.shots {
            ShotMode::Exact => circuits
                .par_iter()
                .enumerate()
                .map(|(bi, c)| access.expectation_exact(backend, g, c).map_err(at_point(gi, bi)))
                .collect::<Result<Vec<f64>>>()?,
            ShotMode::Shots(shots) => access
                .execute(backend, &circuits, (gi * nb) as u64, shots, stream_seed)
                .map_err(at_point(gi, 0))?
                .iter()
                .enumerate()
                .map(|(bi, r)| energy_from_counts(g, &r.counts).map_err(at_point(gi, bi)))
                .collect::<Result<Vec<f64>>>()?,
        };
        if let Some(c) = checkpoint.as_mut() {
            c.append(gi, &energies)?;
        }
        rows[gi] = Some(energies);
    }

    let energies: Vec<Vec<f64>> = rows.into_iter().map(|r| r.expect("every row sampled")).collect();
    let landscape = Landscape::new(grid.clone(), energies, meta)?;
    if let Some(c) = checkpoint {
        c.finish()?;
    }
    Ok(landscape)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub gamma_index: usize,
    pub beta_index: usize,
    pub gamma: f64,
    pub beta: f64,
    pub energy: f64,
}

/// Lowest grid point; ties go to the smallest γ index, then the smallest β index.
pub fn find_minimum(l: &Landscape) -> Minimum {
    let mut best = (0, 0);
    for (gi, row) in l.energies.iter().enumerate() {
        for (bi, &e) in row.iter().enumerate() {
            if e < l.energies[best.0][best.1] {
                best = (gi, bi);
            }
        }
    }
    Minimum {
        gamma_index: best.0,
        beta_index: best.1,
        gamma: l.grid.gamma_values[best.0],
        beta: l.grid.beta_values[best.1],
        energy: l.energies[best.0][best.1],
    }
}

/// Samples depth 1, fixes layer 1 at its minimum and samples depth 2 over (γ2, β2).
pub fn warm_start_chain(
    access: &AccessLayer,
    backend: &str,
    g: &WeightedGraph,
    grid: &GridSpec,
    shots: ShotMode,
    seed: u64,
    options: &SamplingOptions,
) -> Result<(Landscape, Landscape)> {
    let depth1 = sample_landscape(
        access,
        backend,
        g,
        &LandscapeRequest::depth1(grid.clone(), shots, seed),
        options,
    )?;
    let min = find_minimum(&depth1);
    let fixed = Layer {
        gamma: min.gamma,
        beta: min.beta,
    };
    let depth2 = sample_landscape(
        access,
        backend,
        g,
        &LandscapeRequest::depth2(fixed, grid.clone(), shots, seed),
        options,
    )?;
    Ok((depth1, depth2))
}

/// Noise-free landscape with the same graph, grid, depth and fixed layer as `like`.
pub fn exact_reference(like: &Landscape) -> Result<Landscape> {
    let access = AccessLayer::with_registry();
    let request = LandscapeRequest {
        depth: like.meta.depth,
        fixed_layer1: like.meta.fixed_layer1,
        grid: like.grid.clone(),
        shots: ShotMode::Exact,
        seed: like.meta.seed,
    };
    sample_landscape(
        &access,
        "local-exact",
        &like.meta.graph,
        &request,
        &SamplingOptions::default(),
    )
}
