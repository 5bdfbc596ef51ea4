use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

use qlb::backends::{AccessLayer, BackendDescriptor};
use qlb::circuit::{build_qaoa_circuit, QaoaParams};
use qlb::compiler::CouplingMap;
use qlb::config::{build_access, ConfigFile, GraphSource, NoiseOverride, RunConfig, DEFAULT_SEED};
use qlb::heatmap::Heatmap;
use qlb::landscape::{
    find_minimum, sample_landscape, warm_start_chain, Landscape, Layer, SamplingOptions, ShotMode, DEFAULT_DIVISOR,
    DEFAULT_SHOTS,
};
use qlb::metrics::{check_reference, exact_references, mad, report};
use qlb::problem::{brute_force_max_cut, WeightedGraph};
use qlb::Error;

/// `println!` that exits quietly when stdout is closed early (`qlb ... | head`).
macro_rules! say {
    ($($t:tt)*) => { emit(format_args!($($t)*)) };
}

fn emit(args: fmt::Arguments) {
    let mut out = io::stdout().lock();
    if let Err(e) = out.write_fmt(args).and_then(|()| out.write_all(b"\n")) {
        if e.kind() == io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        panic!("failed writing to stdout: {e}");
    }
}

// usage errors exit with 2 through clap
const EXIT_CAPABILITY: u8 = 3;
const EXIT_DATA: u8 = 4;

/// QAOA MaxCut landscape benchmarking on simulated backends.
#[derive(Parser)]
#[command(name = "qlb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect or validate problem instances.
    #[command(subcommand)]
    Instance(InstanceCmd),
    /// Sample energy landscapes.
    #[command(subcommand)]
    Landscape(LandscapeCmd),
    /// Compare landscapes.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Export landscapes.
    #[command(subcommand)]
    Export(ExportCmd),
    /// Inspect available backends.
    #[command(subcommand)]
    Backends(BackendsCmd),
    /// Inspect jobs recorded in a job log.
    #[command(subcommand)]
    Job(JobCmd),
    /// Build and compile single QAOA circuits.
    #[command(subcommand)]
    Circuit(CircuitCmd),
}

#[derive(Subcommand)]
enum InstanceCmd {
    /// Print a graph and its maximum cut.
    Show {
        #[arg(long, conflicts_with = "graph")]
        paper: bool,
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Print the graph file format instead.
        #[arg(long)]
        json: bool,
    },
    /// Check a graph file.
    Validate { file: PathBuf },
}

#[derive(Subcommand)]
enum LandscapeCmd {
    /// Sample a landscape (or the depth-1 → depth-2 warm-start chain).
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    backend: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    depth: u8,
    /// Sample depth 1, then depth 2 with layer 1 fixed at the depth-1 minimum.
    #[arg(long)]
    warm_start: bool,
    #[arg(long, requires = "fixed_beta")]
    fixed_gamma: Option<f64>,
    #[arg(long, requires = "fixed_gamma")]
    fixed_beta: Option<f64>,
    #[arg(long, conflicts_with = "exact")]
    shots: Option<u64>,
    /// Noise-free expectation values instead of shots.
    #[arg(long)]
    exact: bool,
    #[arg(long, env = "QLB_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// `paper` or a graph JSON file.
    #[arg(long)]
    graph: Option<String>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Noise profile from the config file.
    #[arg(long)]
    noise_profile: Option<String>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    p_readout: Option<f64>,
    /// Grid spacing is π / N (even N).
    #[arg(long)]
    step_divisor: Option<usize>,
    /// Append submitted jobs to this JSON-lines log.
    #[arg(long)]
    jobs: Option<PathBuf>,
    /// Where per-row checkpoints go (default: the output directory).
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// MAD_SIM / MAD_MMS table for a set of landscapes.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        landscapes: Vec<PathBuf>,
        /// `exact` to compute references, or reference landscape files.
        #[arg(long, num_args = 1.., default_value = "exact")]
        reference: Vec<String>,
        #[arg(long, default_value = "paper")]
        graph: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean absolute difference of two landscapes.
    Mad {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

#[derive(Subcommand)]
enum ExportCmd {
    /// Grayscale PGM heatmap, γ horizontal and β vertical.
    Heatmap {
        #[arg(long)]
        landscape: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum BackendsCmd {
    List {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum JobCmd {
    List {
        #[arg(long)]
        jobs: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the results of a job, raw or normalized.
    Fetch {
        id: String,
        #[arg(long)]
        jobs: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        normalized: bool,
    },
}

#[derive(Subcommand)]
enum CircuitCmd {
    /// Print the QAOA circuit for the given angles, optionally compiled for a backend.
    Build {
        #[arg(long, num_args = 1.., required = true)]
        gammas: Vec<f64>,
        #[arg(long, num_args = 1.., required = true)]
        betas: Vec<f64>,
        #[arg(long, default_value = "paper")]
        graph: String,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_capability() {
            let hint = remedy(&e);
            Failure {
                code: EXIT_CAPABILITY,
                message: format!("{e}\nhint: {hint}"),
            }
        } else {
            Failure {
                code: EXIT_DATA,
                message: e.to_string(),
            }
        }
    }
}

fn remedy(e: &Error) -> &'static str {
    let text = e.to_string();
    if text.contains("exact") {
        "use --shots N, or run on local-exact"
    } else if text.contains("qubit") {
        "pick a backend with a larger device; `qlb backends list` shows sizes"
    } else if text.contains("batch") {
        "submit circuits one at a time on this backend"
    } else {
        "see `qlb backends list` for backend capabilities"
    }
}

type CliResult = Result<(), Failure>;

fn in_file(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    }
}

fn usage(message: &str) -> ! {
    Cli::command().error(ErrorKind::ArgumentConflict, message).exit()
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, Failure> {
    match path {
        Some(p) => ConfigFile::load(p).map_err(in_file(p)),
        None => Ok(ConfigFile::default()),
    }
}

fn load_graph(source: &str) -> Result<WeightedGraph, Failure> {
    let s: GraphSource = source.parse().expect("infallible");
    match &s {
        GraphSource::File(p) => s.load().map_err(in_file(p)),
        GraphSource::Paper => Ok(s.load()?),
    }
}

fn load_landscape(path: &Path) -> Result<Landscape, Failure> {
    Landscape::load(path).map_err(in_file(path))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult {
    fs::write(path, bytes).map_err(|e| in_file(path)(e.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Instance(c) => instance(c),
        Command::Landscape(LandscapeCmd::Run(args)) => landscape_run(args),
        Command::Metrics(c) => metrics(c),
        Command::Export(ExportCmd::Heatmap { landscape, out }) => heatmap(&landscape, &out),
        Command::Backends(BackendsCmd::List { config, json }) => backends_list(config.as_deref(), json),
        Command::Job(c) => job(c),
        Command::Circuit(c) => circuit(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn instance(cmd: InstanceCmd) -> CliResult {
    match cmd {
        InstanceCmd::Show { paper, graph, json } => {
            let g = match (paper, graph) {
                (_, Some(p)) => WeightedGraph::from_json(&fs::read_to_string(&p).map_err(|e| in_file(&p)(e.into()))?)
                    .map_err(in_file(&p))?,
                (true, None) => WeightedGraph::paper_instance(),
                (false, None) => usage("instance show needs --paper or --graph FILE"),
            };
            if json {
                say!("{}", g.to_json());
                return Ok(());
            }
            let best = brute_force_max_cut(&g)?;
            say!("nodes: {}", g.node_count());
            say!("edges: {}", g.edges().len());
            for e in g.edges() {
                say!("  {} - {}  weight {}", e.u, e.v, e.weight);
            }
            say!("total weight: {}", g.total_weight());
            say!("mixed-state energy: {}", g.mixed_state_energy());
            say!("max cut: {}", best.max_cut);
            let argmax: Vec<String> = best.argmax.iter().map(ToString::to_string).collect();
            say!("optimal assignments: {}", argmax.join(" "));
            Ok(())
        }
        InstanceCmd::Validate { file } => {
            let text = fs::read_to_string(&file).map_err(|e| in_file(&file)(e.into()))?;
            let g = WeightedGraph::from_json(&text).map_err(in_file(&file))?;
            say!(
                "ok: {} nodes, {} edges, total weight {}",
                g.node_count(),
                g.edges().len(),
                g.total_weight()
            );
            Ok(())
        }
    }
}

fn landscape_run(args: RunArgs) -> CliResult {
    let config = load_config(args.config.as_deref())?;
    let d = &config.defaults;
    let fixed_layer1 = match (args.fixed_gamma, args.fixed_beta) {
        (Some(gamma), Some(beta)) => Some(Layer { gamma, beta }),
        _ => None,
    };
    let run = RunConfig {
        graph: args
            .graph
            .clone()
            .or_else(|| d.graph.clone())
            .unwrap_or_else(|| "paper".into())
            .parse()
            .expect("infallible"),
        backend: match args.backend.clone().or_else(|| d.backend.clone()) {
            Some(b) => b,
            None => usage("--backend is required (or set defaults.backend in the config)"),
        },
        depth: args.depth as usize,
        warm_start: args.warm_start,
        fixed_layer1,
        shots: if args.exact {
            ShotMode::Exact
        } else {
            match args.shots.or(d.shots).unwrap_or(DEFAULT_SHOTS) {
                0 => usage("--shots must be positive"),
                n => ShotMode::Shots(n),
            }
        },
        seed: args.seed.or(d.seed).unwrap_or(DEFAULT_SEED),
        step_divisor: args.step_divisor.or(d.step_divisor).unwrap_or(DEFAULT_DIVISOR),
        workers: args.workers.or(d.workers).unwrap_or(0),
        out: args.out.clone(),
    };

    let noise = NoiseOverride {
        profile: args.noise_profile.clone(),
        p1: args.p1,
        p2: args.p2,
        p_readout: args.p_readout,
    };
    let mut access = build_access(&config, &run.backend, &noise)?;
    if let Err(e) = run.validate(&access) {
        match e {
            Error::InvalidLandscape(msg) => usage(&msg),
            e => return Err(e.into()),
        }
    }
    if let Some(log) = &args.jobs {
        access = access.with_job_log(log).map_err(in_file(log))?;
    }
    let g = match &run.graph {
        GraphSource::File(p) => run.graph.load().map_err(in_file(p))?,
        GraphSource::Paper => run.graph.load()?,
    };
    let grid = run.grid()?;
    fs::create_dir_all(&run.out).map_err(|e| in_file(&run.out)(e.into()))?;
    let options = SamplingOptions {
        workers: run.workers,
        checkpoint_dir: Some(args.checkpoint_dir.clone().unwrap_or_else(|| run.out.clone())),
    };

    let landscapes = if run.warm_start {
        let (d1, d2) = warm_start_chain(&access, &run.backend, &g, &grid, run.shots, run.seed, &options)?;
        vec![d1, d2]
    } else {
        vec![sample_landscape(&access, &run.backend, &g, &run.request()?, &options)?]
    };
    for l in &landscapes {
        let stem = format!("{}-p{}-s{}", run.backend, l.meta().depth, run.seed);
        let json = run.out.join(format!("{stem}.json"));
        let csv = run.out.join(format!("{stem}.csv"));
        write(&json, l.to_json())?;
        write(&csv, l.to_csv())?;
        let m = find_minimum(l);
        say!(
            "depth {} minimum: gamma={:.6} beta={:.6} energy={:.6} (gamma index {}, beta index {})",
            l.meta().depth,
            m.gamma,
            m.beta,
            m.energy,
            m.gamma_index,
            m.beta_index
        );
        say!("wrote {} and {}", json.display(), csv.display());
    }
    Ok(())
}

fn metrics(cmd: MetricsCmd) -> CliResult {
    match cmd {
        MetricsCmd::Report {
            landscapes,
            reference,
            graph,
            out,
        } => {
            let g = load_graph(&graph)?;
            let loaded = landscapes
                .iter()
                .map(|p| load_landscape(p))
                .collect::<Result<Vec<_>, _>>()?;
            for (p, l) in landscapes.iter().zip(&loaded) {
                if l.meta().graph != g {
                    return Err(in_file(p)(Error::Provenance(
                        "landscape was sampled on a different graph".into(),
                    )));
                }
            }
            let refs = if reference == ["exact"] {
                exact_references(&loaded)?
            } else {
                let refs = reference
                    .iter()
                    .map(|p| load_landscape(Path::new(p)))
                    .collect::<Result<Vec<_>, _>>()?;
                for (p, l) in landscapes.iter().zip(&loaded) {
                    if !refs.iter().any(|r| check_reference(l, r).is_ok()) {
                        let err = refs
                            .iter()
                            .map(|r| check_reference(l, r).unwrap_err())
                            .next()
                            .unwrap_or_else(|| Error::Provenance("no reference given".into()));
                        return Err(in_file(p)(err));
                    }
                }
                refs
            };
            let table = report(&loaded, &refs, &g)?;
            say!("{}", table.render_text().trim_end());
            if let Some(out) = out {
                write(&out, table.to_csv())?;
            }
            Ok(())
        }
        MetricsCmd::Mad { a, b } => {
            let (la, lb) = (load_landscape(&a)?, load_landscape(&b)?);
            let v = mad(&la, &lb).map_err(in_file(&b))?;
            say!("{v}");
            Ok(())
        }
    }
}

fn heatmap(landscape: &Path, out: &Path) -> CliResult {
    let l = load_landscape(landscape)?;
    let h = Heatmap::render(&l);
    write(out, h.to_pgm())?;
    let m = h.minimum;
    say!(
        "wrote {}x{} heatmap to {}; minimum at gamma index {}, beta index {}",
        h.width,
        h.height,
        out.display(),
        m.gamma_index,
        m.beta_index
    );
    Ok(())
}

fn coupling_name(c: &CouplingMap) -> String {
    let n = c.qubit_count();
    if CouplingMap::full(n).is_ok_and(|f| &f == c) {
        format!("full({n})")
    } else if CouplingMap::linear(n).is_ok_and(|l| &l == c) {
        format!("linear({n})")
    } else {
        format!("custom({n}, {} pairs)", c.pairs().count())
    }
}

fn backends_list(config: Option<&Path>, json: bool) -> CliResult {
    let descriptors: Vec<BackendDescriptor> = load_config(config)?.descriptors();
    if json {
        say!("{}", serde_json::to_string_pretty(&descriptors).map_err(Error::from)?);
        return Ok(());
    }
    for d in descriptors {
        say!("{}", d.name);
        say!(
            "  device:   {} {}",
            coupling_name(&d.device_spec.coupling),
            d.device_spec.label
        );
        say!("  native:   {}", d.device_spec.native_set);
        say!(
            "  noise:    p1={} p2={} readout={} {}",
            d.noise.p1,
            d.noise.p2,
            d.noise.p_readout,
            d.noise.label
        );
        say!(
            "  results:  {:?} bit order, {:?}, metadata {:?}",
            d.bit_order,
            d.result_style,
            d.metadata
        );
        say!(
            "  supports: batching={} exact={} compiled={} queue={}ms",
            d.supports_batching,
            d.supports_exact,
            d.exposes_compiled,
            d.queue_delay_ms
        );
    }
    Ok(())
}

fn job_access(jobs: &Path, config: Option<&Path>) -> Result<AccessLayer, Failure> {
    let access = AccessLayer::new(load_config(config)?.descriptors())?;
    access.with_job_log(jobs).map_err(in_file(jobs))
}

fn job(cmd: JobCmd) -> CliResult {
    match cmd {
        JobCmd::List { jobs, config } => {
            let access = job_access(&jobs, config.as_deref())?;
            say!("id          backend               circuits  shots  completed_at");
            for id in access.job_ids() {
                let s = access.job_summary(&id)?;
                say!(
                    "{:<10}  {:<20}  {:>8}  {:>5}  {}",
                    s.id,
                    s.backend,
                    s.circuits,
                    s.shots,
                    s.completed_at
                );
            }
            Ok(())
        }
        JobCmd::Fetch {
            id,
            jobs,
            config,
            normalized,
        } => {
            let access = job_access(&jobs, config.as_deref())?;
            let text = if normalized {
                serde_json::to_string_pretty(&access.fetch_normalized(&id)?)
            } else {
                serde_json::to_string_pretty(&access.fetch(&id)?)
            };
            say!("{}", text.map_err(Error::from)?);
            Ok(())
        }
    }
}

fn circuit(cmd: CircuitCmd) -> CliResult {
    let CircuitCmd::Build {
        gammas,
        betas,
        graph,
        backend,
        config,
    } = cmd;
    let g = load_graph(&graph)?;
    let c = build_qaoa_circuit(&g, &QaoaParams::new(gammas, betas)?)?;
    match backend {
        None => say!("{}", c.to_json()),
        Some(name) => {
            let descriptors = load_config(config.as_deref())?.descriptors();
            let d = descriptors
                .iter()
                .find(|d| d.name == name)
                .ok_or(Error::UnknownBackend(name.clone()))?;
            let compiled = d.compile(&c)?;
            say!("{}", serde_json::to_string_pretty(&compiled).map_err(Error::from)?);
        }
    }
    Ok(())
}
