use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ivsr::files::{self, SiteDoc};
use ivsr::gateway::Gateway;
use ivsr::store::IncidentStore;
use ivsr::twin::{ArrivalEntry, Twin, TwinConfig};
use ivsr_core::coverage::{compute_coverage, greedy_placement, union_coverage, DEFAULT_PATCH_SIZE, DEFAULT_RAYS_N};
use ivsr_core::geometry::PatchedScene;
use ivsr_core::library::precompute_library;
use ivsr_core::spread::{default_materials, Environment, SpreadConfig, SpreadState, DEFAULT_DT_S};
use ivsr_core::Vec3;
use serde_json::json;

#[derive(Parser)]
#[command(name = "ivsr", version, about = "Wildfire situation-room digital twin")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sensor coverage of a scene, optionally with greedy camera selection.
    Coverage(CoverageArgs),
    /// Run fire spread to a horizon; prints the arrival map and growth series.
    Spread(SpreadArgs),
    /// Scenario library tools.
    Library {
        #[command(subcommand)]
        command: LibraryCommand,
    },
    /// Serve the gateway.
    Serve(ServeArgs),
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long)]
    scene: PathBuf,
    /// JSON list of camera poses.
    #[arg(long)]
    cameras: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    patch_size: f64,
    #[arg(long, default_value_t = DEFAULT_RAYS_N)]
    rays_n: u32,
    /// Pick this many cameras greedily instead of reporting all of them.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    min_gain: f64,
    /// Write the hit points of every camera here.
    #[arg(long)]
    hits: Option<PathBuf>,
}

#[derive(Args)]
struct SpreadArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Material table; the shipped defaults when omitted.
    #[arg(long)]
    materials: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    patch_size: f64,
    /// Ignition as `x,y,z` or `x,y,z@t`; repeatable.
    #[arg(long, required = true)]
    ignite: Vec<String>,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = DEFAULT_DT_S)]
    dt: f64,
    #[arg(long, default_value_t = 20.0)]
    air_temp: f64,
    #[arg(long, default_value_t = 50.0)]
    humidity: f64,
    #[arg(long, default_value_t = 0.0)]
    wind_speed: f64,
    #[arg(long, default_value_t = 0.0)]
    wind_direction: f64,
}

#[derive(Subcommand)]
enum LibraryCommand {
    /// Simulate every point of a parameter grid and write one scenario file each.
    Build {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
        patch_size: f64,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Directory of scenario files.
    #[arg(long)]
    library: PathBuf,
    #[arg(long)]
    materials: PathBuf,
    #[arg(long)]
    sensors: PathBuf,
    /// Resource register, site class and drone base.
    #[arg(long)]
    site: Option<PathBuf>,
    /// Detection log file, appended to and reloaded on start.
    #[arg(long, default_value = "detections.log")]
    log: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Simulated seconds per wall-clock second.
    #[arg(long, default_value_t = 1.0)]
    sim_speed: f64,
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    patch_size: f64,
}

fn print_json(v: &serde_json::Value) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn coverage(a: CoverageArgs) -> anyhow::Result<()> {
    let scene = PatchedScene::new(files::load_scene(&a.scene)?, a.patch_size)?;
    let cams = files::load_cameras(&a.cameras)?;
    let mut reports: Vec<_> = cams.iter().map(|c| compute_coverage(&scene, c, a.rays_n)).collect();
    if let Some(path) = &a.hits {
        let hits: Vec<Vec<Vec3>> = reports.iter().map(|r| r.hit_points.iter().map(|h| h.point).collect()).collect();
        files::write_json(path, &hits)?;
    }
    for r in &mut reports {
        r.hit_points.clear();
    }
    let mut out = json!({ "cameras": reports });
    match a.k {
        Some(k) => {
            let placed = greedy_placement(&scene, &cams, k, a.min_gain, a.rays_n);
            let mut union = union_coverage(&scene, &placed.chosen, a.rays_n);
            union.hit_points.clear();
            out["placement"] = serde_json::to_value(&placed)?;
            out["union"] = serde_json::to_value(&union)?;
        }
        None => {
            let mut union = union_coverage(&scene, &cams, a.rays_n);
            union.hit_points.clear();
            out["union"] = serde_json::to_value(&union)?;
        }
    }
    print_json(&out)
}

fn parse_ignition(s: &str) -> anyhow::Result<(Vec3, f64)> {
    let (point, time) = match s.split_once('@') {
        Some((p, t)) => (p, t.trim().parse::<f64>().with_context(|| format!("ignition time in {s:?}"))?),
        None => (s, 0.0),
    };
    let c: Vec<f64> = point
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("ignition point {s:?}"))?;
    if c.len() != 3 {
        bail!("ignition point {s:?} needs three coordinates");
    }
    Ok((Vec3::new(c[0], c[1], c[2]), time))
}

fn spread(a: SpreadArgs) -> anyhow::Result<()> {
    let scene = PatchedScene::new(files::load_scene(&a.scene)?, a.patch_size)?;
    let materials = match &a.materials {
        Some(p) => files::load_materials(p)?,
        None => default_materials(),
    };
    let ignitions = a.ignite.iter().map(|s| parse_ignition(s)).collect::<anyhow::Result<Vec<_>>>()?;
    let env = Environment {
        air_temp: a.air_temp,
        humidity: a.humidity,
        wind_speed: a.wind_speed,
        wind_direction: a.wind_direction,
    };
    let mut state = SpreadState::init(&scene, &materials, &ignitions, env, SpreadConfig::default())?;
    state.run_until(a.horizon, a.dt)?;
    let arrival: Vec<ArrivalEntry> = scene
        .patches()
        .iter()
        .zip(state.arrival_map())
        .map(|(p, t)| ArrivalEntry {
            patch_id: p.id,
            surface_id: p.surface_id,
            centroid: p.centroid,
            arrival_time: t,
        })
        .collect();
    print_json(&json!({
        "sim_time": state.sim_time(),
        "burning_area": state.burning_area(),
        "arrival_map": arrival,
        "growth": state.growth_series(),
    }))
}

fn library_build(scene: &Path, grid: &Path, out: &Path, patch_size: f64) -> anyhow::Result<()> {
    let scene = PatchedScene::new(files::load_scene(scene)?, patch_size)?;
    let (grid, templates) = files::read_json::<files::GridDoc>(grid)?.into_parts()?;
    let library = precompute_library(&scene, &grid, &templates)?;
    files::save_library(out, &library)?;
    print_json(&json!({ "scenarios": library.len(), "out": out.display().to_string() }))
}

fn load_twin(a: &ServeArgs) -> anyhow::Result<Twin> {
    let scene = PatchedScene::new(files::load_scene(&a.scene)?, a.patch_size)?;
    let site = match &a.site {
        Some(p) => files::read_json(p)?,
        None => SiteDoc::default(),
    };
    Ok(Twin::new(
        scene,
        files::load_sensors(&a.sensors)?,
        files::load_materials(&a.materials)?,
        files::load_library(&a.library)?,
        IncidentStore::open(&a.log)?,
        site,
        TwinConfig::default(),
    )?)
}

async fn serve(a: ServeArgs) -> anyhow::Result<()> {
    if !a.sim_speed.is_finite() || a.sim_speed <= 0.0 {
        bail!("--sim-speed must be positive");
    }
    let gw = Gateway::new();
    let addr = SocketAddr::from(([0, 0, 0, 0], a.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    let app = gw.router();
    let server = tokio::spawn(async move { axum::serve(listener, app).await });
    // requests get 503 until loading finishes
    let twin = tokio::task::spawn_blocking(move || load_twin(&a).map(|t| (t, a.sim_speed))).await??;
    let (twin, sim_speed) = twin;
    gw.install(twin).await;
    tracing::info!("twin loaded");
    tokio::spawn(gw.clone().run_ticks(sim_speed));
    tokio::select! {
        r = server => r??,
        _ = tokio::signal::ctrl_c() => tracing::info!("shutting down"),
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Coverage(a) => coverage(a),
        Command::Spread(a) => spread(a),
        Command::Library {
            command:
                LibraryCommand::Build {
                    scene,
                    grid,
                    out,
                    patch_size,
                },
        } => library_build(&scene, &grid, &out, patch_size),
        Command::Serve(a) => tokio::runtime::Runtime::new()?.block_on(serve(a)),
    }
}
