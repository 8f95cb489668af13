//! Desk-scale experiment sweeps that write plot-ready CSV files plus a JSON
//! manifest. Every cell is seeded, so single-worker reruns are byte-identical.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::a3c::{greedy_episode, train, CurvePoint, TrainConfig, TrainOutput};
use crate::baselines::{
    cache_bits, env_agnostic_plan, env_aware_plan, oracle, run_scheme, service_times, CacheMode, OffloadMode, OracleLimits, RoutingMode, SchemeSpec,
};
use crate::economics::{DecisionSet, EvalMode, SystemModel};
use crate::error::{Error, Result};
use crate::scenario::{generate_random, DeviceCount, GenSpec, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Fig6ProfitVsAuvs,
    Fig7Trajectories,
    Fig8Offload,
    Fig9Cache,
    Fig10Alloc,
    Fig12Lr,
    OracleGap,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        Self::Fig6ProfitVsAuvs,
        Self::Fig7Trajectories,
        Self::Fig8Offload,
        Self::Fig9Cache,
        Self::Fig10Alloc,
        Self::Fig12Lr,
        Self::OracleGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig6ProfitVsAuvs => "fig6_profit_vs_auvs",
            Self::Fig7Trajectories => "fig7_trajectories",
            Self::Fig8Offload => "fig8_offload",
            Self::Fig9Cache => "fig9_cache",
            Self::Fig10Alloc => "fig10_alloc",
            Self::Fig12Lr => "fig12_lr",
            Self::OracleGap => "oracle_gap",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|id| id.name() == s || id.name().split('_').next() == Some(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|id| id.name()).collect();
                format!("unknown experiment {s:?} (one of {})", names.join(", "))
            })
    }
}

/// One sweep: which experiment, over which seeds, with which trainer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub seeds: Vec<u64>,
    /// AUV counts for the profit-vs-AUVs sweep; ignored elsewhere.
    pub sweep: Vec<usize>,
    pub train: TrainConfig,
    /// Full-size scenarios (15 groups, 190 devices) instead of desk presets.
    pub full_scale: bool,
    /// Replaces the preset scenario in every cell; seeds then only drive the
    /// trainer and the randomized schemes.
    pub scenario: Option<Scenario>,
}

impl ExperimentSpec {
    /// Desk-scale defaults: 5 seeds, one deterministic worker.
    pub fn desk(id: ExperimentId) -> Self {
        let updates = match id {
            ExperimentId::Fig6ProfitVsAuvs => 1500,
            ExperimentId::Fig7Trajectories => 0,
            ExperimentId::Fig12Lr => 3000,
            _ => 4000,
        };
        Self {
            id,
            seeds: (0..5).collect(),
            sweep: if id == ExperimentId::Fig6ProfitVsAuvs { (1..=6).collect() } else { Vec::new() },
            train: TrainConfig {
                workers: 1,
                max_updates: updates,
                ..TrainConfig::default()
            },
            full_scale: false,
            scenario: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Domain("an experiment needs at least one seed".into()));
        }
        if self.id == ExperimentId::Fig6ProfitVsAuvs && (self.sweep.is_empty() || self.sweep.contains(&0)) {
            return Err(Error::Domain("the AUV sweep must be a nonempty list of positive counts".into()));
        }
        self.train.validate()
    }
}

/// Scenario used by `id` for `seed` when no scenario is supplied.
pub fn preset(id: ExperimentId, seed: u64, full_scale: bool) -> Result<Scenario> {
    let mut spec = if full_scale {
        GenSpec::default()
    } else {
        match id {
            ExperimentId::Fig6ProfitVsAuvs => GenSpec::new(8, 1, DeviceCount::Total(60)),
            ExperimentId::Fig7Trajectories => GenSpec::new(8, 2, DeviceCount::PerGroup(2)),
            ExperimentId::Fig8Offload | ExperimentId::Fig9Cache | ExperimentId::Fig10Alloc => {
                let mut s = GenSpec::new(6, 2, DeviceCount::PerGroup(3));
                s.area_m = 1000.0;
                s
            }
            ExperimentId::Fig12Lr | ExperimentId::OracleGap => {
                let mut s = GenSpec::new(5, 1, DeviceCount::PerGroup(3));
                s.area_m = 600.0;
                s
            }
        }
    };
    match id {
        ExperimentId::Fig7Trajectories => {
            // Eddies strong enough (peak near 0.7 m/s) to bend the best loop.
            spec.num_vortices = 4;
            spec.vortex_strength = 2000.0;
            spec.vortex_radius_m = 300.0;
        }
        ExperimentId::Fig10Alloc => {
            // Cheap latency and a small store: some offloaded tasks must be
            // transmitted, so the bandwidth split matters.
            spec.time_value = (1.0, 5.0);
        }
        _ => {}
    }
    let mut s = generate_random(&spec, seed)?;
    if id == ExperimentId::Fig10Alloc {
        s.constants.storage_capacity_bits = 0.3 * s.total_task_bits();
    }
    Ok(s)
}

fn scenario_for(spec: &ExperimentSpec, seed: u64) -> Result<Scenario> {
    match &spec.scenario {
        Some(s) => Ok(s.clone()),
        None => preset(spec.id, seed, spec.full_scale),
    }
}

fn train_seeded(model: &Arc<SystemModel>, cfg: &TrainConfig, seed: u64) -> Result<TrainOutput> {
    train(Arc::clone(model), &TrainConfig { seed, ..cfg.clone() })
}

/// Greedy decisions of the best policy seen while training, and their profit.
pub fn trained_decisions(model: &Arc<SystemModel>, cfg: &TrainConfig, seed: u64) -> Result<(DecisionSet, f64, TrainOutput)> {
    let out = train_seeded(model, cfg, seed)?;
    let (d, _) = greedy_episode(model, &out.best_params)?;
    let profit = model.evaluate(&d, EvalMode::Strict)?.profit;
    Ok((d, profit, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig6Row {
    pub seed: u64,
    pub scenario_hash: String,
    pub num_auvs: usize,
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig6Summary {
    pub num_auvs: usize,
    pub mean_profit: f64,
    pub std_profit: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig7Row {
    pub seed: u64,
    pub scenario_hash: String,
    pub agnostic_profit: f64,
    pub aware_profit: f64,
    pub agnostic_movement_cost: f64,
    pub aware_movement_cost: f64,
}

/// One scheme evaluated on one seed; shared by the offloading, caching and
/// allocation comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRow {
    pub seed: u64,
    pub scenario_hash: String,
    pub scheme: String,
    pub profit: f64,
    pub offloaded: usize,
    pub cached: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig12Row {
    pub seed: u64,
    pub scenario_hash: String,
    pub mode: String,
    pub update_index: usize,
    pub global_step: usize,
    pub mean_episode_profit: f64,
    pub entropy: f64,
    pub value_loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig12Summary {
    pub seed: u64,
    pub scenario_hash: String,
    pub fixed_final_profit: f64,
    pub adaptive_final_profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleGapRow {
    pub seed: u64,
    pub scenario_hash: String,
    pub oracle_profit: f64,
    pub a3c_profit: f64,
    /// `a3c_profit` minus `0.9 × oracle` read on the oracle's magnitude:
    /// nonnegative when the policy is within 10% of the oracle.
    pub margin: f64,
    pub oracle_nodes: u64,
    pub env_steps: usize,
}

/// Profit needed to count as within 10% of `oracle`, whatever its sign.
pub fn ten_percent_floor(oracle: f64) -> f64 {
    oracle - 0.1 * oracle.abs()
}

/// Profit vs fleet size with a policy trained per cell.
pub fn fig6_cell(spec: &ExperimentSpec, seed: u64) -> Result<Vec<Fig6Row>> {
    let base = scenario_for(spec, seed)?;
    spec.sweep
        .iter()
        .map(|&m| {
            let mut s = base.clone();
            s.num_auvs = m;
            let model = Arc::new(SystemModel::new(&s)?);
            let (_, profit, _) = trained_decisions(&model, &spec.train, seed)?;
            Ok(Fig6Row {
                seed,
                scenario_hash: s.content_hash(),
                num_auvs: m,
                profit,
            })
        })
        .collect()
}

pub fn fig6_summary(rows: &[Fig6Row]) -> Vec<Fig6Summary> {
    let mut ms: Vec<usize> = rows.iter().map(|r| r.num_auvs).collect();
    ms.sort_unstable();
    ms.dedup();
    ms.into_iter()
        .map(|m| {
            let v: Vec<f64> = rows.iter().filter(|r| r.num_auvs == m).map(|r| r.profit).collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            Fig6Summary {
                num_auvs: m,
                mean_profit: mean,
                std_profit: var.sqrt(),
                seeds: v.len(),
            }
        })
        .collect()
}

/// Same offloading decisions routed with and without knowledge of the currents.
pub fn fig7_cell(spec: &ExperimentSpec, seed: u64) -> Result<(Fig7Row, DecisionSet, DecisionSet)> {
    let s = scenario_for(spec, seed)?;
    let model = SystemModel::new(&s)?;
    let base = run_scheme(&model, &SchemeSpec::new(OffloadMode::Full, CacheMode::FullCapped), seed)?.decisions;
    let svc = service_times(&model, &base)?;
    let mut agnostic = base.clone();
    agnostic.plan = env_agnostic_plan(&model, &svc)?;
    let mut aware = base;
    aware.plan = env_aware_plan(&model, &svc)?;
    let a = model.evaluate(&agnostic, EvalMode::Strict)?;
    let b = model.evaluate(&aware, EvalMode::Strict)?;
    Ok((
        Fig7Row {
            seed,
            scenario_hash: s.content_hash(),
            agnostic_profit: a.profit,
            aware_profit: b.profit,
            agnostic_movement_cost: a.movement_cost,
            aware_movement_cost: b.movement_cost,
        },
        agnostic,
        aware,
    ))
}

fn scheme_row(model: &SystemModel, seed: u64, hash: &str, scheme: &str, d: &DecisionSet) -> Result<SchemeRow> {
    let count = |v: &[Vec<bool>]| v.iter().flatten().filter(|&&b| b).count();
    Ok(SchemeRow {
        seed,
        scenario_hash: hash.to_string(),
        scheme: scheme.to_string(),
        profit: model.evaluate(d, EvalMode::Strict)?.profit,
        offloaded: count(&d.offload),
        cached: count(&d.cache),
    })
}

/// Trained policy against fixed offloading schemes. Every scheme caches as
/// much as storage allows, splits resources evenly and flies the policy's
/// route, so only the offloading choice differs.
pub fn fig8_cell(spec: &ExperimentSpec, seed: u64) -> Result<Vec<SchemeRow>> {
    let s = scenario_for(spec, seed)?;
    let hash = s.content_hash();
    let model = Arc::new(SystemModel::new(&s)?);
    let (d, _, _) = trained_decisions(&model, &spec.train, seed)?;
    let mut rows = vec![scheme_row(&model, seed, &hash, "proposed", &d)?];
    let modes = [
        OffloadMode::Full,
        OffloadMode::None,
        OffloadMode::Random(0.5),
        OffloadMode::Partial(0.25),
        OffloadMode::Partial(0.5),
        OffloadMode::Partial(0.75),
    ];
    for mode in modes {
        let scheme = SchemeSpec::new(mode, CacheMode::FullCapped).with_routing(RoutingMode::Fixed(d.plan.clone()));
        let r = run_scheme(&model, &scheme, seed)?;
        rows.push(scheme_row(&model, seed, &hash, &mode.to_string(), &r.decisions)?);
    }
    Ok(rows)
}

/// Trained policy against the same offloading with caching removed or
/// randomized; bandwidth is re-split evenly among the devices that now transmit.
pub fn fig9_cell(spec: &ExperimentSpec, seed: u64) -> Result<Vec<SchemeRow>> {
    let s = scenario_for(spec, seed)?;
    let hash = s.content_hash();
    let model = Arc::new(SystemModel::new(&s)?);
    let (d, _, _) = trained_decisions(&model, &spec.train, seed)?;
    let mut rows = vec![scheme_row(&model, seed, &hash, "proposed", &d)?];
    let variants: [(&str, CacheMode); 4] = [
        ("none", CacheMode::None),
        ("random:0.5", CacheMode::Random(0.5)),
        ("partial:0.5", CacheMode::Partial(0.5)),
        ("full", CacheMode::FullCapped),
    ];
    for (name, mode) in variants {
        let mut raw = d.clone();
        raw.cache = cache_bits(&model, &d.offload, mode, &mut ChaCha8Rng::seed_from_u64(seed));
        let fixed = model.project_to_feasible(&even_bandwidth(raw));
        rows.push(scheme_row(&model, seed, &hash, name, &fixed)?);
    }
    Ok(rows)
}

/// Even bandwidth among transmitting devices; compute shares untouched.
pub fn even_bandwidth(mut d: DecisionSet) -> DecisionSet {
    for k in 0..d.offload.len() {
        let tx: Vec<usize> = (0..d.offload[k].len()).filter(|&i| d.offload[k][i] && !d.cache[k][i]).collect();
        for i in 0..d.offload[k].len() {
            d.bandwidth[k][i] = if tx.contains(&i) { 1.0 / tx.len() as f64 } else { 0.0 };
        }
    }
    d
}

/// Even compute among offloaded devices; bandwidth shares untouched.
pub fn even_compute(mut d: DecisionSet) -> DecisionSet {
    for k in 0..d.offload.len() {
        let n = d.offload[k].iter().filter(|&&o| o).count();
        for i in 0..d.offload[k].len() {
            d.compute[k][i] = if d.offload[k][i] { 1.0 / n as f64 } else { 0.0 };
        }
    }
    d
}

/// Trained joint allocation against replacing one or both resource splits
/// with even ones under the same offloading, caching and route.
pub fn fig10_cell(spec: &ExperimentSpec, seed: u64) -> Result<Vec<SchemeRow>> {
    let s = scenario_for(spec, seed)?;
    let hash = s.content_hash();
    let model = Arc::new(SystemModel::new(&s)?);
    let (d, _, _) = trained_decisions(&model, &spec.train, seed)?;
    let variants = [
        ("joint", d.clone()),
        ("bandwidth_only", even_compute(d.clone())),
        ("compute_only", even_bandwidth(d.clone())),
        ("equal", d.clone().with_equal_allocation()),
    ];
    variants.iter().map(|(name, v)| scheme_row(&model, seed, &hash, name, v)).collect()
}

/// Mean of the moving-average profit over the last `window` curve points.
pub fn final_mean_profit(curve: &[CurvePoint], window: usize) -> f64 {
    let tail = &curve[curve.len().saturating_sub(window)..];
    tail.iter().map(|p| p.mean_episode_profit).sum::<f64>() / tail.len().max(1) as f64
}

pub const FINAL_WINDOW: usize = 100;

/// Fixed and adaptive learning rate from the same initialization.
pub fn fig12_cell(spec: &ExperimentSpec, seed: u64) -> Result<(Vec<Fig12Row>, Fig12Summary)> {
    let s = scenario_for(spec, seed)?;
    let hash = s.content_hash();
    let model = Arc::new(SystemModel::new(&s)?);
    let mut rows = Vec::new();
    let mut finals = [0.0; 2];
    for (slot, (mode, adaptive)) in [("fixed", false), ("adaptive", true)].into_iter().enumerate() {
        let cfg = TrainConfig {
            adaptive_lr: adaptive,
            ..spec.train.clone()
        };
        let out = train_seeded(&model, &cfg, seed)?;
        finals[slot] = final_mean_profit(&out.curve, FINAL_WINDOW);
        rows.extend(out.curve.iter().map(|p| Fig12Row {
            seed,
            scenario_hash: hash.clone(),
            mode: mode.to_string(),
            update_index: p.update_index,
            global_step: p.global_step,
            mean_episode_profit: p.mean_episode_profit,
            entropy: p.entropy,
            value_loss: p.value_loss,
            learning_rate: p.learning_rate,
        }));
    }
    let summary = Fig12Summary {
        seed,
        scenario_hash: hash,
        fixed_final_profit: finals[0],
        adaptive_final_profit: finals[1],
    };
    Ok((rows, summary))
}

/// Trained policy against the exhaustive oracle on a grid of 0.25.
pub fn oracle_gap_cell(spec: &ExperimentSpec, seed: u64) -> Result<OracleGapRow> {
    let s = scenario_for(spec, seed)?;
    let model = Arc::new(SystemModel::new(&s)?);
    let best = oracle(&model, 0.25, &OracleLimits::default())?;
    let (_, profit, out) = trained_decisions(&model, &spec.train, seed)?;
    Ok(OracleGapRow {
        seed,
        scenario_hash: s.content_hash(),
        oracle_profit: best.profit,
        a3c_profit: profit,
        margin: profit - ten_percent_floor(best.profit),
        oracle_nodes: best.nodes,
        env_steps: out.curve.last().map_or(0, |p| p.global_step),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: ExperimentId,
    pub code_version: String,
    pub spec: ExperimentSpec,
    pub files: Vec<String>,
    pub failed_cells: Vec<CellFailure>,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every seed of `spec`, writes the CSV files and `manifest.json` into
/// `out_dir`, and returns the manifest. Failed cells are listed in the
/// manifest and turn the result into an error after everything is written.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<Manifest> {
    spec.validate()?;
    fs::create_dir_all(out_dir)?;
    let name = spec.id.name();
    let mut files: Vec<PathBuf> = Vec::new();
    let mut failed = Vec::new();
    let mut record = |seed: u64, e: Error| failed.push(CellFailure { seed, error: e.to_string() });

    match spec.id {
        ExperimentId::Fig6ProfitVsAuvs => {
            let mut rows = Vec::new();
            for &seed in &spec.seeds {
                match fig6_cell(spec, seed) {
                    Ok(r) => rows.extend(r),
                    Err(e) => record(seed, e),
                }
            }
            files.push(out_dir.join(format!("{name}.csv")));
            write_csv(&files[0], &rows)?;
            files.push(out_dir.join(format!("{name}_summary.csv")));
            write_csv(&files[1], &fig6_summary(&rows))?;
        }
        ExperimentId::Fig7Trajectories => {
            let mut rows = Vec::new();
            for &seed in &spec.seeds {
                match fig7_cell(spec, seed) {
                    Ok((row, agnostic, aware)) => {
                        let s = scenario_for(spec, seed)?;
                        for (tag, d) in [("agnostic", &agnostic), ("aware", &aware)] {
                            let path = out_dir.join(format!("{name}_seed{seed}_{tag}_routes.csv"));
                            d.plan.write_csv(&s, fs::File::create(&path)?)?;
                            files.push(path);
                        }
                        rows.push(row);
                    }
                    Err(e) => record(seed, e),
                }
            }
            let path = out_dir.join(format!("{name}.csv"));
            write_csv(&path, &rows)?;
            files.insert(0, path);
        }
        ExperimentId::Fig8Offload | ExperimentId::Fig9Cache | ExperimentId::Fig10Alloc => {
            let cell = match spec.id {
                ExperimentId::Fig8Offload => fig8_cell,
                ExperimentId::Fig9Cache => fig9_cell,
                _ => fig10_cell,
            };
            let mut rows = Vec::new();
            for &seed in &spec.seeds {
                match cell(spec, seed) {
                    Ok(r) => rows.extend(r),
                    Err(e) => record(seed, e),
                }
            }
            files.push(out_dir.join(format!("{name}.csv")));
            write_csv(&files[0], &rows)?;
        }
        ExperimentId::Fig12Lr => {
            let mut rows = Vec::new();
            let mut summary = Vec::new();
            for &seed in &spec.seeds {
                match fig12_cell(spec, seed) {
                    Ok((r, s)) => {
                        rows.extend(r);
                        summary.push(s);
                    }
                    Err(e) => record(seed, e),
                }
            }
            files.push(out_dir.join(format!("{name}.csv")));
            write_csv(&files[0], &rows)?;
            files.push(out_dir.join(format!("{name}_summary.csv")));
            write_csv(&files[1], &summary)?;
        }
        ExperimentId::OracleGap => {
            let mut rows = Vec::new();
            for &seed in &spec.seeds {
                match oracle_gap_cell(spec, seed) {
                    Ok(r) => rows.push(r),
                    Err(e) => record(seed, e),
                }
            }
            files.push(out_dir.join(format!("{name}.csv")));
            write_csv(&files[0], &rows)?;
        }
    }

    let manifest = Manifest {
        experiment: spec.id,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        files: files
            .iter()
            .map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
            .collect(),
        failed_cells: failed,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(out_dir.join("manifest.json"), text + "\n")?;
    if !manifest.failed_cells.is_empty() {
        return Err(Error::CellsFailed(manifest.failed_cells.len()));
    }
    Ok(manifest)
}

/// One-sided sign test at a 4-of-5 style majority: at least `needed` of the
/// paired comparisons favour the first element.
pub fn sign_test(pairs: &[(f64, f64)], needed: usize, strict: bool) -> bool {
    pairs.iter().filter(|(a, b)| if strict { a > b } else { a >= b }).count() >= needed
}
