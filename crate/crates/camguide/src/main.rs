use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use camguide::batch::{parse_scenario, run_batch, summarize, write_csv, BatchSpec};
use camguide::formats::{read_tracks, write_tracks, RankingJson, ReportJson, SceneConfigJson, SceneFile, TranscriptJson};
use camguide::service::{router, ServiceState};
use camguide_core::planner::SessionStatus;
use camguide_core::simulator::{generate_scene, run_online, scenario, NoiseModel, OfflineModel, PipelineConfig};
use camguide_core::sofa::{Axis, SofaRanking};
use camguide_core::ViewId;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "camguide", version, about = "Rotation-only camera guidance on synthetic multi-view scenes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    X,
    Y,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a scene file.
    GenScene {
        /// JSON generator settings; the flags below override its fields.
        #[arg(long, conflicts_with = "scenario")]
        config: Option<PathBuf>,
        /// Built-in scenario: default, large_arc or gap. Prints its view pair.
        #[arg(long, conflicts_with_all = ["n_points", "n_cameras", "layout"])]
        scenario: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_points: Option<usize>,
        #[arg(long)]
        n_cameras: Option<usize>,
        /// one_sided_arc or ring.
        #[arg(long)]
        layout: Option<String>,
        /// Store a noiseless noise model in the file.
        #[arg(long)]
        noiseless: bool,
        /// Also write the offline tracks as JSON lines.
        #[arg(long)]
        tracks_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one guidance session and print its report.
    Run {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        initial: u32,
        #[arg(long)]
        dest: u32,
        /// Auto-pilot; the only executor for offline runs, accepted for clarity.
        #[arg(long)]
        auto: bool,
        /// Write the step transcript here.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Seeded batch evaluation to CSV; prints a summary line.
    Batch {
        /// Batch spec JSON, or a built-in scenario name.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
        runs: u64,
        /// Overrides the base seed of the batch file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a global order from a tracks file.
    Rank {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the session endpoints.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory of scene files addressable by file stem.
        #[arg(long)]
        scenes: Option<PathBuf>,
    },
}

/// Usage, configuration or IO problem.
#[derive(Debug)]
struct Usage(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.into())
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

#[allow(clippy::too_many_arguments)]
fn gen_scene(
    config: Option<PathBuf>,
    named: Option<String>,
    seed: Option<u64>,
    n_points: Option<usize>,
    n_cameras: Option<usize>,
    layout: Option<String>,
    noiseless: bool,
    tracks_out: Option<PathBuf>,
    out: PathBuf,
) -> Result<ExitCode, Usage> {
    let (scene, pair) = match named {
        Some(name) => {
            let kind = parse_scenario(&name).ok_or_else(|| anyhow::anyhow!("unknown scenario {name:?}"))?;
            let sc = scenario(kind, seed.unwrap_or(0))?;
            (sc.scene, Some((sc.initial, sc.destination)))
        }
        None => {
            let mut cfg: SceneConfigJson = match config {
                Some(p) => read_json(&p)?,
                None => SceneConfigJson::default(),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.n_points = n_points.unwrap_or(cfg.n_points);
            cfg.n_cameras = n_cameras.unwrap_or(cfg.n_cameras);
            if let Some(l) = layout {
                cfg.layout = l;
            }
            (generate_scene(&cfg.to_config()?)?, None)
        }
    };
    let noise = if noiseless { NoiseModel::noiseless() } else { NoiseModel::default() }.with_seed(scene.seed);
    write_json(&out, &SceneFile::new(&scene, &noise))?;
    if let Some(p) = tracks_out {
        let model = OfflineModel::build(&scene, &noise, &PipelineConfig::default())?;
        let mut w = BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?);
        write_tracks(&mut w, model.tracks.tracks())?;
        w.flush()?;
    }
    println!("points {} cameras {}", scene.points.len(), scene.cameras.len());
    if let Some((i, d)) = pair {
        println!("initial {i} destination {d}");
    }
    Ok(ExitCode::SUCCESS)
}

fn run(scene: PathBuf, initial: u32, dest: u32, transcript: Option<PathBuf>, seed: u64) -> Result<ExitCode, Usage> {
    let file: SceneFile = read_json(&scene)?;
    let (scene, noise) = file.to_scene()?;
    let cfg = PipelineConfig::default();
    let (initial, dest) = (ViewId(initial), ViewId(dest));
    let t = Instant::now();
    let model = OfflineModel::build(&scene, &noise, &cfg)?;
    let offline_ms = t.elapsed().as_secs_f64() * 1e3;
    let t = Instant::now();
    let report = run_online(&model, &scene, initial, dest, &noise, &cfg, seed)?;
    let online_ms = t.elapsed().as_secs_f64() * 1e3;
    if let Some(p) = transcript {
        write_json(&p, &TranscriptJson::from(&report))?;
    }
    println!("{}", serde_json::to_string(&ReportJson::new(&report, offline_ms, online_ms))?);
    Ok(if report.status == SessionStatus::Success { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn batch(spec: String, runs: u64, seed: Option<u64>, out: PathBuf) -> Result<ExitCode, Usage> {
    let mut spec = match BatchSpec::named(&spec) {
        Some(s) => s,
        None => read_json(Path::new(&spec))?,
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let rows = run_batch(&spec, runs as usize)?;
    let w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
    write_csv(w, &rows)?;
    println!("{}", summarize(&rows).line());
    Ok(ExitCode::SUCCESS)
}

fn rank(tracks: PathBuf, axis: AxisArg, out: Option<PathBuf>) -> Result<ExitCode, Usage> {
    let f = File::open(&tracks).with_context(|| format!("opening {}", tracks.display()))?;
    let tracks = read_tracks(BufReader::new(f))?;
    let mut views: Vec<ViewId> = tracks.iter().flat_map(|t| t.views()).collect();
    views.sort();
    views.dedup();
    let ranking = SofaRanking::build(&tracks, &views, &PipelineConfig::default().sofa)?;
    let dump = RankingJson::new(&ranking, match axis {
        AxisArg::X => Axis::X,
        AxisArg::Y => Axis::Y,
    });
    match out {
        Some(p) => write_json(&p, &dump)?,
        None => println!("{}", serde_json::to_string(&dump)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(host: String, port: u16, scenes: Option<PathBuf>) -> Result<ExitCode, Usage> {
    if let Some(d) = &scenes {
        if !d.is_dir() {
            return Err(anyhow::anyhow!("{} is not a directory", d.display()).into());
        }
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host.as_str(), port))
            .await
            .with_context(|| format!("binding {host}:{port}"))?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        // Active sessions are dropped on shutdown.
        axum::serve(listener, router(ServiceState::new(scenes)))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::GenScene { config, scenario, seed, n_points, n_cameras, layout, noiseless, tracks_out, out } => {
            gen_scene(config, scenario, seed, n_points, n_cameras, layout, noiseless, tracks_out, out)
        }
        Cmd::Run { scene, initial, dest, auto: _, transcript, seed } => run(scene, initial, dest, transcript, seed),
        Cmd::Batch { scenario, runs, seed, out } => batch(scenario, runs, seed, out),
        Cmd::Rank { tracks, axis, out } => rank(tracks, axis, out),
        Cmd::Serve { port, host, scenes } => serve(host, port, scenes),
    };
    match result {
        Ok(code) => code,
        Err(Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
