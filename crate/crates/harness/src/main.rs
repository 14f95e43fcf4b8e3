use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use text2seg_core::{MockBackend, StrategyId};
use text2seg_harness::config::{load_mock_scenes, BackendSpec, RunConfig, BACKEND_URL_ENV};
use text2seg_harness::error::{HarnessError, Result};
use text2seg_harness::eval::evaluate;
use text2seg_harness::mockdata::{write_mock_dataset, MockDatasetConfig};
use text2seg_harness::report::{emit_report, parse_json_report, ReportFormat};
use text2seg_harness::service::{serve, serve_router};

const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

#[derive(Parser)]
#[command(
    name = "text2seg",
    version,
    about = "Text-prompted zero-shot segmentation runs and services"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate strategies over a dataset manifest.
    Eval(EvalArgs),
    /// Render a stored run as a report table.
    Report {
        /// Run directory written by `eval`, or a run.json file.
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value = "md")]
        format: String,
    },
    /// Serve the workbench API.
    Serve {
        /// Run config JSON naming the manifest, backend and default parameters.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Serve the inference protocol backed by mock scenes.
    MockServer {
        /// Directory of mock scene JSON files.
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8000")]
        addr: SocketAddr,
    },
    /// Write a synthetic dataset with matching mock scenes.
    MockDataset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        scenes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 256)]
        tile_size: u32,
        /// Objects answer only to synonyms of their label.
        #[arg(long)]
        synonym_only: bool,
    },
}

#[derive(Args)]
struct EvalArgs {
    /// Run config JSON; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// `mock:DIR` or `remote:URL`; defaults to remote:$TEXT2SEG_BACKEND_URL.
    #[arg(long)]
    backend: Option<String>,
    /// Comma-separated strategy ids, e.g. s1,s2,s5.
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<String>,
    /// Prompt with class synonyms as well as labels.
    #[arg(long)]
    augment: bool,
    /// Also score the random-point baseline.
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    point_threshold: Option<f32>,
    #[arg(long)]
    max_points: Option<usize>,
    #[arg(long)]
    box_threshold: Option<f64>,
    #[arg(long)]
    text_threshold: Option<f64>,
    #[arg(long)]
    grid_n: Option<u32>,
    /// Store per-tile traces in run.json.
    #[arg(long)]
    traces: bool,
}

impl EvalArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let manifest = self
                    .manifest
                    .clone()
                    .ok_or_else(|| HarnessError::config("--manifest is required"))?;
                let backend = match &self.backend {
                    Some(b) => b.parse()?,
                    None => BackendSpec::from_env().ok_or_else(|| {
                        HarnessError::config(format!("--backend is required when {BACKEND_URL_ENV} is unset"))
                    })?,
                };
                RunConfig::new(manifest, backend, Vec::new())
            }
        };
        if let Some(m) = self.manifest {
            cfg.manifest = m;
        }
        if let Some(b) = &self.backend {
            cfg.backend = b.parse()?;
        }
        if !self.strategies.is_empty() {
            cfg.strategies = self
                .strategies
                .iter()
                .map(|s| s.parse::<StrategyId>())
                .collect::<text2seg_core::Result<_>>()
                .map_err(|e| HarnessError::config(e.to_string()))?;
        }
        cfg.augment |= self.augment;
        cfg.baseline |= self.baseline;
        cfg.keep_traces |= self.traces;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = self.out {
            cfg.out_dir = Some(o);
        }
        if let Some(p) = self.parallelism {
            cfg.parallelism = p;
        }
        let prompt = &mut cfg.params.prompt;
        if let Some(v) = self.point_threshold {
            prompt.points.threshold = v;
        }
        if let Some(v) = self.max_points {
            prompt.points.max_points = v;
        }
        if let Some(v) = self.box_threshold {
            prompt.box_threshold = v;
        }
        if let Some(v) = self.text_threshold {
            prompt.text_threshold = v;
        }
        if let Some(v) = self.grid_n {
            prompt.grid_n = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| HarnessError::config(format!("cannot write {}: {e}", path.display())))
}

fn run_eval(args: EvalArgs) -> Result<u8> {
    let cfg = args.into_config()?;
    let record = evaluate(&cfg)?;
    let md = emit_report(&record, ReportFormat::Markdown)?;
    if let Some(out) = &cfg.out_dir {
        std::fs::create_dir_all(out)
            .map_err(|e| HarnessError::config(format!("cannot create {}: {e}", out.display())))?;
        write_file(&out.join("run.json"), &emit_report(&record, ReportFormat::Json)?)?;
        write_file(&out.join("report.md"), &md)?;
        write_file(&out.join("report.csv"), &emit_report(&record, ReportFormat::Csv)?)?;
    }
    print!("{}", String::from_utf8_lossy(&md));
    if record.has_failures() {
        eprintln!("{} item(s) failed", record.failures.len());
        return Ok(EXIT_PARTIAL);
    }
    Ok(0)
}

fn run_report(run: &Path, format: &str) -> Result<u8> {
    let format: ReportFormat = format.parse()?;
    let path = if run.is_dir() {
        run.join("run.json")
    } else {
        run.to_path_buf()
    };
    let bytes = std::fs::read(&path).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
    let record = parse_json_report(&bytes)?;
    print!("{}", String::from_utf8_lossy(&emit_report(&record, format)?));
    Ok(0)
}

fn run_mock_server(scenes: &Path, addr: SocketAddr) -> Result<u8> {
    let scenes = load_mock_scenes(scenes)?;
    let backend = MockBackend::from_scenes(scenes).map_err(|e| HarnessError::config(e.to_string()))?;
    let ids = BTreeMap::from([("mock".to_string(), "scenes".to_string())]);
    serve_router(text2seg_remote::router(Arc::new(backend), ids), addr)?;
    Ok(0)
}

fn run_mock_dataset(out: &Path, scenes: usize, seed: u64, tile_size: u32, synonym_only: bool) -> Result<u8> {
    let mut cfg = MockDatasetConfig {
        scenes,
        seed,
        tile_size,
        ..Default::default()
    };
    if synonym_only {
        cfg = cfg.synonym_only();
    }
    let manifest = write_mock_dataset(out, &cfg)?;
    println!("{}", manifest.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(args) => run_eval(args),
        Command::Report { run, format } => run_report(&run, &format),
        Command::Serve { config, addr } => RunConfig::load(&config).and_then(|cfg| serve(&cfg, addr)).map(|_| 0),
        Command::MockServer { scenes, addr } => run_mock_server(&scenes, addr),
        Command::MockDataset {
            out,
            scenes,
            seed,
            tile_size,
            synonym_only,
        } => run_mock_dataset(&out, scenes, seed, tile_size, synonym_only),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                HarnessError::Config(_) => EXIT_CONFIG,
                _ => EXIT_PARTIAL,
            })
        }
    }
}
