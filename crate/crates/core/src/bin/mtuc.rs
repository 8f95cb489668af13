use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mtuc_core::a3c::{greedy_episode, save_checkpoint, train, write_curve_csv, TrainConfig};
use mtuc_core::acoustics::{linear_to_db, rate_auv_to_station, rate_device_to_auv};
use mtuc_core::baselines::{oracle, run_scheme, CacheMode, OffloadMode, OracleLimits, RoutingMode, SchemeSpec};
use mtuc_core::economics::SystemModel;
use mtuc_core::experiment::{run_experiment, ExperimentId, ExperimentSpec};
use mtuc_core::ocean::current_velocity;
use mtuc_core::scenario::{generate_random, load_scenario, DeviceCount, GenSpec, Scenario, Vec3};

#[derive(Parser)]
#[command(name = "mtuc", version, about = "Multi-tier underwater computing simulator")]
struct Cli {
    /// Seed for scenario generation, training and randomized schemes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (directory for `experiment`); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scenario file (TOML); a default scenario is generated from the seed otherwise.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a random scenario and write it as TOML.
    Gen(GenArgs),
    /// Per-device SNR bounds and link rates at each hover point.
    Linkbudget,
    /// Sample the current field on the AUV cruising plane.
    Field(FieldArgs),
    /// Evaluate a fixed offloading/caching/routing scheme.
    Baseline(BaselineArgs),
    /// Exhaustive lattice search on a small scenario.
    Oracle(OracleArgs),
    /// Train the actor-critic policy and write its learning curve.
    Train(TrainArgs),
    /// Run one experiment sweep into an output directory.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 15)]
    groups: usize,
    #[arg(long, default_value_t = 4)]
    auvs: usize,
    /// Total device count, spread evenly over the groups.
    #[arg(long, default_value_t = 190, conflicts_with = "per_group")]
    devices: usize,
    /// Fixed device count per group.
    #[arg(long)]
    per_group: Option<usize>,
    /// Side of the square holding group centroids, m.
    #[arg(long, default_value_t = 2000.0)]
    area: f64,
    #[arg(long, default_value_t = 3)]
    vortices: usize,
    #[arg(long, default_value_t = 8.0)]
    vortex_strength: f64,
    #[arg(long, default_value_t = 100.0)]
    vortex_radius: f64,
}

#[derive(Args)]
struct FieldArgs {
    /// Samples per side of the square grid.
    #[arg(long, default_value_t = 41)]
    points: usize,
    /// Half side of the sampled square, m; defaults to the scenario extent.
    #[arg(long)]
    half_width: Option<f64>,
}

#[derive(Args)]
struct BaselineArgs {
    /// Shorthand: full-offload, no-offload, random-offload or partial-offload.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, default_value = "full")]
    offload: OffloadMode,
    #[arg(long, default_value = "full")]
    cache: CacheMode,
    #[arg(long, default_value = "agnostic")]
    routing: RoutingMode,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 0.25)]
    grid: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 2000)]
    updates: usize,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long)]
    adaptive: bool,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    /// Where to write the trained (best greedy) parameters.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// fig6_profit_vs_auvs, fig7_trajectories, fig8_offload, fig9_cache,
    /// fig10_alloc, fig12_lr or oracle_gap (the part before `_` also works).
    id: ExperimentId,
    /// Number of seeds, counted up from --seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Training updates per cell; the experiment's default when omitted.
    #[arg(long)]
    updates: Option<usize>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// AUV counts for the fleet-size sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<usize>>,
    /// Full-size scenarios instead of the desk presets.
    #[arg(long)]
    full_scale: bool,
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn scenario(cli: &Cli) -> Result<Scenario> {
    Ok(match &cli.scenario {
        Some(p) => load_scenario(p)?,
        None => generate_random(&GenSpec::default(), cli.seed)?,
    })
}

fn write_rows<T: Serialize>(out: &Option<PathBuf>, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(output(out)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct LinkRow {
    group: usize,
    device: usize,
    distance_m: f64,
    snr_device_db: f64,
    snr_station_db: f64,
    full_band_rate_bps: f64,
    station_rate_bps: f64,
}

#[derive(Serialize)]
struct FieldRow {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    vz: f64,
    speed: f64,
}

#[derive(Serialize)]
struct DecisionRow {
    group: usize,
    device: usize,
    auv: usize,
    visit: usize,
    offload: bool,
    cache: bool,
    bandwidth: f64,
    compute: f64,
}

fn linkbudget(cli: &Cli) -> Result<()> {
    let s = scenario(cli)?;
    let model = SystemModel::new(&s)?;
    let c = &s.constants;
    let g = &s.geometry;
    let mut rows = Vec::new();
    for (k, grp) in s.groups.iter().enumerate() {
        let hover = s.hover_point(k);
        for (i, d) in grp.devices.iter().enumerate() {
            let q = model.links[k][i];
            rows.push(LinkRow {
                group: k,
                device: i,
                distance_m: (d.pos - hover).norm(),
                snr_device_db: linear_to_db(q.gamma_device),
                snr_station_db: linear_to_db(q.gamma_station),
                full_band_rate_bps: rate_device_to_auv(1.0, q.gamma_device, c, g.device_depth_m),
                station_rate_bps: rate_auv_to_station(q.gamma_station, c, g.auv_depth_m),
            });
        }
    }
    write_rows(&cli.out, &rows)
}

fn field(cli: &Cli, a: &FieldArgs) -> Result<()> {
    if a.points < 2 {
        bail!("--points must be at least 2");
    }
    let s = scenario(cli)?;
    let half = a.half_width.unwrap_or_else(|| {
        s.groups
            .iter()
            .map(|g| g.centroid.x.abs().max(g.centroid.y.abs()))
            .chain(s.vortices.iter().map(|v| v.center.x.abs().max(v.center.y.abs())))
            .fold(100.0, f64::max)
    });
    let d0 = s.geometry.auv_height_m;
    let step = 2.0 * half / (a.points - 1) as f64;
    let mut rows = Vec::with_capacity(a.points * a.points);
    for iy in 0..a.points {
        for ix in 0..a.points {
            let p = Vec3::new(-half + ix as f64 * step, -half + iy as f64 * step, d0);
            let v = current_velocity(&p, &s.vortices, d0);
            rows.push(FieldRow {
                x: p.x,
                y: p.y,
                vx: v.x,
                vy: v.y,
                vz: v.z,
                speed: v.norm(),
            });
        }
    }
    write_rows(&cli.out, &rows)
}

fn baseline(cli: &Cli, a: &BaselineArgs) -> Result<()> {
    let s = scenario(cli)?;
    let model = SystemModel::new(&s)?;
    let offload = match a.scheme.as_deref() {
        None => a.offload,
        Some("full-offload") => OffloadMode::Full,
        Some("no-offload") => OffloadMode::None,
        Some("random-offload") => OffloadMode::Random(0.5),
        Some("partial-offload") => OffloadMode::Partial(0.5),
        Some(other) => bail!("unknown scheme {other:?} (full-offload, no-offload, random-offload, partial-offload)"),
    };
    let spec = SchemeSpec::new(offload, a.cache).with_routing(a.routing.clone());
    let r = run_scheme(&model, &spec, cli.seed)?;
    let mut w = output(&cli.out)?;
    serde_json::to_writer_pretty(&mut w, &r.breakdown)?;
    writeln!(w)?;
    Ok(())
}

fn decision_rows(d: &mtuc_core::economics::DecisionSet) -> Vec<DecisionRow> {
    let mut rows = Vec::new();
    for (j, tour) in d.plan.tours.iter().enumerate() {
        for (visit, &k) in tour.iter().enumerate() {
            for i in 0..d.offload[k].len() {
                rows.push(DecisionRow {
                    group: k,
                    device: i,
                    auv: j,
                    visit,
                    offload: d.offload[k][i],
                    cache: d.cache[k][i],
                    bandwidth: d.bandwidth[k][i],
                    compute: d.compute[k][i],
                });
            }
        }
    }
    rows
}

fn run_oracle(cli: &Cli, a: &OracleArgs) -> Result<()> {
    let s = scenario(cli)?;
    let model = SystemModel::new(&s)?;
    let r = oracle(&model, a.grid, &OracleLimits::default())?;
    eprintln!("profit {:.3}  nodes {}  wall {:.3}s", r.profit, r.nodes, r.wall.as_secs_f64());
    write_rows(&cli.out, &decision_rows(&r.decisions))
}

fn run_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let s = scenario(cli)?;
    let model = Arc::new(SystemModel::new(&s)?);
    let cfg = TrainConfig {
        max_updates: a.updates,
        workers: a.workers,
        learning_rate: a.lr,
        adaptive_lr: a.adaptive,
        hidden: a.hidden,
        seed: cli.seed,
        ..TrainConfig::default()
    };
    let out = train(Arc::clone(&model), &cfg)?;
    let (_, profit) = greedy_episode(&model, &out.best_params)?;
    eprintln!("greedy profit {profit:.3} after {} updates", out.curve.len());
    if let Some(p) = &a.checkpoint {
        save_checkpoint(BufWriter::new(File::create(p)?), &out.best_params, out.reward_scale)?;
    }
    write_curve_csv(&out.curve, output(&cli.out)?)?;
    Ok(())
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> Result<()> {
    if a.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let mut spec = ExperimentSpec::desk(a.id);
    spec.seeds = (cli.seed..cli.seed + a.seeds).collect();
    spec.full_scale = a.full_scale;
    spec.train.workers = a.workers;
    if let Some(u) = a.updates {
        spec.train.max_updates = u;
    }
    if let Some(m) = &a.sweep {
        spec.sweep = m.clone();
    }
    if let Some(p) = &cli.scenario {
        spec.scenario = Some(load_scenario(p)?);
    }
    let dir = cli.out.clone().unwrap_or_else(|| Path::new("results").join(a.id.name()));
    let manifest = run_experiment(&spec, &dir)?;
    for f in &manifest.files {
        eprintln!("wrote {}", dir.join(f).display());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Gen(a) => {
            let mut spec = GenSpec::new(
                a.groups,
                a.auvs,
                match a.per_group {
                    Some(n) => DeviceCount::PerGroup(n),
                    None => DeviceCount::Total(a.devices),
                },
            );
            spec.area_m = a.area;
            spec.num_vortices = a.vortices;
            spec.vortex_strength = a.vortex_strength;
            spec.vortex_radius_m = a.vortex_radius;
            let s = generate_random(&spec, cli.seed)?;
            output(&cli.out)?.write_all(s.to_toml()?.as_bytes())?;
        }
        Cmd::Linkbudget => linkbudget(&cli)?,
        Cmd::Field(a) => field(&cli, a)?,
        Cmd::Baseline(a) => baseline(&cli, a)?,
        Cmd::Oracle(a) => run_oracle(&cli, a)?,
        Cmd::Train(a) => run_train(&cli, a)?,
        Cmd::Experiment(a) => experiment(&cli, a)?,
    }
    Ok(())
}
