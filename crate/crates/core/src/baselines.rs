//! Fixed offloading/caching/allocation/routing schemes and an exhaustive
//! lattice oracle for small instances.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::economics::{DecisionSet, EvalMode, GroupDecision, ProfitBreakdown, SystemModel};
use crate::error::{Error, Result};
use crate::mdp::Env;
use crate::routing::{fairness_gap, RoutePlan, TravelTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OffloadMode {
    Full,
    None,
    /// Each device offloads with this probability.
    Random(f64),
    /// This share of each group's devices (rounded, chosen at random) offloads.
    Partial(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CacheMode {
    /// Offloaded tasks in descending content popularity until storage is full.
    FullCapped,
    None,
    Random(f64),
    /// The most popular share of offloaded tasks, capped by storage.
    Partial(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AllocMode {
    Equal,
    /// No optimizer exists for fixed schemes; identical to `Equal`.
    OptimizedOff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RoutingMode {
    NearestNeighbor,
    RandomOrder,
    EnvAgnostic,
    EnvAware,
    Fixed(RoutePlan),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub offload: OffloadMode,
    pub cache: CacheMode,
    pub alloc: AllocMode,
    pub routing: RoutingMode,
}

impl SchemeSpec {
    pub fn new(offload: OffloadMode, cache: CacheMode) -> Self {
        Self {
            offload,
            cache,
            alloc: AllocMode::Equal,
            routing: RoutingMode::EnvAgnostic,
        }
    }

    pub fn with_routing(mut self, routing: RoutingMode) -> Self {
        self.routing = routing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let p = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        let ok = match self.offload {
            OffloadMode::Random(x) | OffloadMode::Partial(x) => p(x),
            _ => true,
        } && match self.cache {
            CacheMode::Random(x) | CacheMode::Partial(x) => p(x),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain("scheme probabilities and shares must lie in [0, 1]".into()))
        }
    }
}

fn parse_share(s: &str, what: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|x| (0.0..=1.0).contains(x))
        .ok_or_else(|| format!("{what} needs a share in [0, 1], got {s:?}"))
}

impl FromStr for OffloadMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once(':') {
            None if s == "full" => Ok(Self::Full),
            None if s == "none" => Ok(Self::None),
            None if s == "random" => Ok(Self::Random(0.5)),
            None if s == "partial" => Ok(Self::Partial(0.5)),
            Some(("random", x)) => parse_share(x, "random").map(Self::Random),
            Some(("partial", x)) => parse_share(x, "partial").map(Self::Partial),
            _ => Err(format!("unknown offload mode {s:?} (full, none, random[:p], partial[:share])")),
        }
    }
}

impl FromStr for CacheMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once(':') {
            None if s == "full" => Ok(Self::FullCapped),
            None if s == "none" => Ok(Self::None),
            None if s == "random" => Ok(Self::Random(0.5)),
            None if s == "partial" => Ok(Self::Partial(0.5)),
            Some(("random", x)) => parse_share(x, "random").map(Self::Random),
            Some(("partial", x)) => parse_share(x, "partial").map(Self::Partial),
            _ => Err(format!("unknown cache mode {s:?} (full, none, random[:p], partial[:share])")),
        }
    }
}

impl FromStr for RoutingMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "nearest" | "nn" => Ok(Self::NearestNeighbor),
            "random" => Ok(Self::RandomOrder),
            "agnostic" => Ok(Self::EnvAgnostic),
            "aware" => Ok(Self::EnvAware),
            _ => Err(format!("unknown routing mode {s:?} (nearest, random, agnostic, aware)")),
        }
    }
}

impl fmt::Display for OffloadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Full => write!(f, "full"),
            Self::None => write!(f, "none"),
            Self::Random(p) => write!(f, "random:{p}"),
            Self::Partial(p) => write!(f, "partial:{p}"),
        }
    }
}

impl fmt::Display for CacheMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FullCapped => write!(f, "full"),
            Self::None => write!(f, "none"),
            Self::Random(p) => write!(f, "random:{p}"),
            Self::Partial(p) => write!(f, "partial:{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub decisions: DecisionSet,
    pub breakdown: ProfitBreakdown,
}

/// Offload and cache bits of a scheme, before allocation and routing.
fn scheme_bits(model: &SystemModel, spec: &SchemeSpec, rng: &mut ChaCha8Rng) -> (Vec<Vec<bool>>, Vec<Vec<bool>>) {
    let s = &model.scenario;
    let offload: Vec<Vec<bool>> = s
        .groups
        .iter()
        .map(|g| {
            let n = g.devices.len();
            match spec.offload {
                OffloadMode::Full => vec![true; n],
                OffloadMode::None => vec![false; n],
                OffloadMode::Random(p) => (0..n).map(|_| rng.gen_bool(p)).collect(),
                OffloadMode::Partial(share) => {
                    let take = (share * n as f64).round() as usize;
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.shuffle(rng);
                    let mut v = vec![false; n];
                    for &i in idx.iter().take(take) {
                        v[i] = true;
                    }
                    v
                }
            }
        })
        .collect();
    let cache = cache_bits(model, &offload, spec.cache, rng);
    (offload, cache)
}

/// Cache bits for the given offloading under `mode`: offloaded tasks are
/// considered in descending content popularity and kept while they fit.
pub fn cache_bits(model: &SystemModel, offload: &[Vec<bool>], mode: CacheMode, rng: &mut ChaCha8Rng) -> Vec<Vec<bool>> {
    let s = &model.scenario;
    let mut cache: Vec<Vec<bool>> = offload.iter().map(|v| vec![false; v.len()]).collect();
    let popularity = s.content_popularity();
    let mut ranked: Vec<(usize, usize)> = (0..s.num_groups())
        .flat_map(|k| (0..offload[k].len()).map(move |i| (k, i)))
        .filter(|&(k, i)| offload[k][i])
        .collect();
    ranked.sort_by_key(|&(k, i)| std::cmp::Reverse(popularity[&s.groups[k].devices[i].task.content_id]));
    let cap = s.constants.storage_capacity_bits;
    let mut fill = |picks: &mut dyn Iterator<Item = (usize, usize)>| {
        let mut used = 0.0;
        for (k, i) in picks {
            let z = s.groups[k].devices[i].task.data_bits;
            if used + z <= cap {
                cache[k][i] = true;
                used += z;
            }
        }
    };
    match mode {
        CacheMode::None => {}
        CacheMode::FullCapped => fill(&mut ranked.iter().copied()),
        CacheMode::Partial(share) => {
            let take = (share * ranked.len() as f64).round() as usize;
            fill(&mut ranked.iter().copied().take(take))
        }
        CacheMode::Random(p) => {
            let picks: Vec<(usize, usize)> = ranked.iter().copied().filter(|_| rng.gen_bool(p)).collect();
            fill(&mut picks.into_iter())
        }
    }
    cache
}

/// Builds, repairs, routes and evaluates a fixed scheme.
pub fn run_scheme(model: &SystemModel, spec: &SchemeSpec, seed: u64) -> Result<SchemeResult> {
    spec.validate()?;
    let s = &model.scenario;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (offload, cache) = scheme_bits(model, spec, &mut rng);
    let mut raw = DecisionSet::all_local(s, RoutePlan::new(vec![Vec::new(); s.num_auvs]));
    raw.offload = offload;
    raw.cache = cache;
    let mut d = model.project_to_feasible(&raw.with_equal_allocation());
    // Projection may demote devices without a live link; re-split among the rest.
    d = d.with_equal_allocation();
    d.plan = match &spec.routing {
        RoutingMode::NearestNeighbor => nearest_neighbor_plan(model),
        RoutingMode::RandomOrder => random_order_plan(s.num_groups(), s.num_auvs, &mut rng),
        RoutingMode::EnvAgnostic => env_agnostic_plan(model, &service_times(model, &d)?)?,
        RoutingMode::EnvAware => env_aware_plan(model, &service_times(model, &d)?)?,
        RoutingMode::Fixed(p) => p.clone(),
    };
    let breakdown = model.evaluate(&d, EvalMode::Strict)?;
    Ok(SchemeResult { decisions: d, breakdown })
}

/// Hover time of every group under `d`.
pub fn service_times(model: &SystemModel, d: &DecisionSet) -> Result<Vec<f64>> {
    (0..model.num_groups())
        .map(|k| model.group_value(k, &d.group(k)).map(|v| v.service_time_s))
        .collect()
}

/// AUVs take turns; each flies to the closest unserved group.
pub fn nearest_neighbor_plan(model: &SystemModel) -> RoutePlan {
    let dist = |a: usize, b: usize| model.travel.distance(a, b);
    round_robin_nearest(&model.travel, model.scenario.num_auvs, &dist)
}

/// Random visiting order dealt to the AUVs in turn.
pub fn random_order_plan<R: Rng>(k: usize, m: usize, rng: &mut R) -> RoutePlan {
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    let mut tours = vec![Vec::new(); m];
    for (step, g) in order.into_iter().enumerate() {
        tours[step % m].push(g);
    }
    RoutePlan::new(tours)
}

/// Groups sorted by bearing from the depot, cut into `m` contiguous blocks of
/// near-equal size.
fn sweep_partition(table: &TravelTable, m: usize) -> Vec<Vec<usize>> {
    let k = table.nodes.len() - 1;
    let depot = table.nodes[0];
    let mut order: Vec<usize> = (0..k).collect();
    let bearing = |g: usize| {
        let p = table.nodes[g + 1] - depot;
        p.y.atan2(p.x)
    };
    order.sort_by(|&a, &b| bearing(a).total_cmp(&bearing(b)).then(a.cmp(&b)));
    let mut out = Vec::with_capacity(m);
    let mut it = order.into_iter();
    for j in 0..m {
        let size = k / m + usize::from(j < k % m);
        out.push(it.by_ref().take(size).collect());
    }
    out
}

fn tour_cost(tour: &[usize], leg: &dyn Fn(usize, usize) -> f64) -> f64 {
    if tour.is_empty() {
        return 0.0;
    }
    let mut c = leg(0, tour[0] + 1);
    for w in tour.windows(2) {
        c += leg(w[0] + 1, w[1] + 1);
    }
    c + leg(tour[tour.len() - 1] + 1, 0)
}

/// Nearest neighbor from the depot, then segment reversal until no reversal
/// lowers the closed-tour cost. Works for asymmetric leg costs.
fn nn_two_opt(groups: &[usize], leg: &dyn Fn(usize, usize) -> f64) -> Vec<usize> {
    let mut left: Vec<usize> = groups.to_vec();
    let mut tour = Vec::with_capacity(left.len());
    let mut at = 0;
    while !left.is_empty() {
        let (pos, _) = left
            .iter()
            .enumerate()
            .min_by(|a, b| leg(at, a.1 + 1).total_cmp(&leg(at, b.1 + 1)).then(a.1.cmp(b.1)))
            .expect("nonempty");
        let g = left.remove(pos);
        tour.push(g);
        at = g + 1;
    }
    let mut best = tour_cost(&tour, leg);
    loop {
        let mut improved = false;
        for i in 0..tour.len() {
            for l in i + 1..tour.len() {
                tour[i..=l].reverse();
                let c = tour_cost(&tour, leg);
                if c < best - 1e-9 * best.abs() {
                    best = c;
                    improved = true;
                } else {
                    tour[i..=l].reverse();
                }
            }
        }
        if !improved {
            return tour;
        }
    }
}

/// Movement cost plus fairness penalty of `plan` when legs and hovering are
/// priced by `table`.
fn plan_cost(model: &SystemModel, table: &TravelTable, tours: &[Vec<usize>], service_s: &[f64]) -> f64 {
    let chi = model.scenario.economics.cost_auv;
    let energy: f64 = tours.iter().map(|t| table.tour_energy(t, service_s)).sum();
    let cycles: Vec<f64> = tours
        .iter()
        .map(|t| table.tour_travel_time(t) + t.iter().map(|&g| service_s[g]).sum::<f64>())
        .collect();
    chi * energy + model.fairness_penalty(fairness_gap(&cycles))
}

/// First-improvement local search over relocations, swaps and segment
/// reversals on the movement-plus-fairness objective under `table`.
fn improve(model: &SystemModel, table: &TravelTable, mut tours: Vec<Vec<usize>>, service_s: &[f64]) -> (Vec<Vec<usize>>, f64) {
    let cost = |t: &[Vec<usize>]| plan_cost(model, table, t, service_s);
    let mut best = cost(&tours);
    let better = |c: f64, best: f64| c < best - 1e-9 * best.abs().max(1.0);
    let m = tours.len();
    loop {
        let mut improved = false;
        // Relocate one group to any position of any tour.
        for a in 0..m {
            let mut i = 0;
            while i < tours[a].len() {
                let g = tours[a].remove(i);
                let mut placed = None;
                'search: for b in 0..m {
                    for j in 0..=tours[b].len() {
                        if b == a && j == i {
                            continue;
                        }
                        tours[b].insert(j, g);
                        let c = cost(&tours);
                        tours[b].remove(j);
                        if better(c, best) {
                            placed = Some((b, j, c));
                            break 'search;
                        }
                    }
                }
                match placed {
                    Some((b, j, c)) => {
                        tours[b].insert(j, g);
                        best = c;
                        improved = true;
                    }
                    None => {
                        tours[a].insert(i, g);
                        i += 1;
                    }
                }
            }
        }
        // Swap two groups on different tours.
        for a in 0..m {
            for b in a + 1..m {
                for i in 0..tours[a].len() {
                    for j in 0..tours[b].len() {
                        let (x, y) = (tours[a][i], tours[b][j]);
                        tours[a][i] = y;
                        tours[b][j] = x;
                        let c = cost(&tours);
                        if better(c, best) {
                            best = c;
                            improved = true;
                        } else {
                            tours[a][i] = x;
                            tours[b][j] = y;
                        }
                    }
                }
            }
        }
        // Reverse a segment of one tour.
        for a in 0..m {
            for i in 0..tours[a].len() {
                for l in i + 1..tours[a].len() {
                    tours[a][i..=l].reverse();
                    let c = cost(&tours);
                    if better(c, best) {
                        best = c;
                        improved = true;
                    } else {
                        tours[a][i..=l].reverse();
                    }
                }
            }
        }
        if !improved {
            return (tours, best);
        }
    }
}

/// Several constructions (bearing sweep, round-robin nearest neighbor, one AUV
/// serving everything), each polished by [`improve`]; the cheapest wins, ties
/// to the smaller plan.
fn plan_routes(model: &SystemModel, table: &TravelTable, service_s: &[f64], extra: Option<&RoutePlan>) -> RoutePlan {
    let m = model.scenario.num_auvs;
    let k = model.num_groups();
    let leg = |a: usize, b: usize| table.leg_energy(a, b);
    let mut starts: Vec<Vec<Vec<usize>>> = Vec::new();
    starts.push(sweep_partition(table, m).iter().map(|p| nn_two_opt(p, &leg)).collect());
    starts.push(round_robin_nearest(table, m, &leg).tours);
    let mut solo = vec![Vec::new(); m];
    solo[0] = nn_two_opt(&(0..k).collect::<Vec<_>>(), &leg);
    starts.push(solo);
    if let Some(p) = extra {
        starts.push(p.tours.clone());
    }
    let mut best: Option<(f64, RoutePlan)> = None;
    for s in starts {
        let (tours, c) = improve(model, table, s, service_s);
        let plan = RoutePlan::new(tours);
        let wins = match &best {
            None => true,
            Some((bc, bp)) => c < *bc || (c == *bc && plan < *bp),
        };
        if wins {
            best = Some((c, plan));
        }
    }
    best.expect("at least one start").1
}

fn round_robin_nearest(table: &TravelTable, m: usize, leg: &dyn Fn(usize, usize) -> f64) -> RoutePlan {
    let k = table.nodes.len() - 1;
    let mut at = vec![0usize; m];
    let mut tours = vec![Vec::new(); m];
    let mut served = vec![false; k];
    for step in 0..k {
        let j = step % m;
        let next = (0..k)
            .filter(|&g| !served[g])
            .min_by(|&a, &b| leg(at[j], a + 1).total_cmp(&leg(at[j], b + 1)).then(a.cmp(&b)))
            .expect("unserved group");
        served[next] = true;
        tours[j].push(next);
        at[j] = next + 1;
    }
    RoutePlan::new(tours)
}

/// Leg table of the same scenario with every vortex removed.
pub fn still_water_table(model: &SystemModel) -> Result<TravelTable> {
    let mut calm = model.scenario.clone();
    calm.vortices.clear();
    TravelTable::new(&calm)
}

/// Routes planned as if the water were still: leg energy is then proportional
/// to distance and hovering is free. The plan is later evaluated under the
/// true current field.
pub fn env_agnostic_plan(model: &SystemModel, service_s: &[f64]) -> Result<RoutePlan> {
    Ok(plan_routes(model, &still_water_table(model)?, service_s, None))
}

/// Movement cost plus fairness penalty of `plan` under the true current field.
pub fn route_objective(model: &SystemModel, plan: &RoutePlan, service_s: &[f64]) -> f64 {
    plan_cost(model, &model.travel, &plan.tours, service_s)
}

/// The same search priced with the true current field, also started from the
/// agnostic plan, so it never scores worse than that plan.
pub fn env_aware_plan(model: &SystemModel, service_s: &[f64]) -> Result<RoutePlan> {
    let agnostic = env_agnostic_plan(model, service_s)?;
    let aware = plan_routes(model, &model.travel, service_s, Some(&agnostic));
    Ok(if route_objective(model, &agnostic, service_s) < route_objective(model, &aware, service_s) {
        agnostic
    } else {
        aware
    })
}

/// Profits of uniformly random episodes in the environment.
pub fn random_policy_profits(model: &Arc<SystemModel>, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    let mut env = Env::new(Arc::clone(model));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        env.reset(0);
        let mut total = 0.0;
        loop {
            let step = env.step(&env.random_action(&mut rng))?;
            total += step.reward;
            if step.terminal {
                break;
            }
        }
        out.push(total);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_groups: usize,
    pub max_auvs: usize,
    pub max_devices_per_group: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_groups: 6,
            max_auvs: 2,
            max_devices_per_group: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub decisions: DecisionSet,
    pub profit: f64,
    pub nodes: u64,
    pub wall: Duration,
}

/// One lattice point of a group: its profit contribution (revenue minus task
/// cost minus hover cost), hover time and cached input volume.
#[derive(Debug, Clone)]
struct GroupOption {
    value: f64,
    time: f64,
    bits: f64,
    decision: GroupDecision,
}

/// Compositions of at most `units` grid units into `parts` positive parts,
/// as fractions, plus the even split.
fn fraction_lattice(parts: usize, units: usize) -> Vec<Vec<f64>> {
    fn rec(parts: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == parts {
            out.push(cur.clone());
            return;
        }
        let need = parts - cur.len() - 1;
        for u in 1..=left.saturating_sub(need) {
            cur.push(u);
            rec(parts, left - u, cur, out);
            cur.pop();
        }
    }
    if parts == 0 {
        return vec![vec![]];
    }
    let mut raw = Vec::new();
    rec(parts, units, &mut Vec::new(), &mut raw);
    let mut out: Vec<Vec<f64>> = raw
        .into_iter()
        .map(|c| c.into_iter().map(|u| u as f64 / units as f64).collect())
        .collect();
    let even = vec![1.0 / parts as f64; parts];
    if !out.contains(&even) {
        out.push(even);
    }
    out
}

/// Drops every point that another point beats regardless of how the rest of
/// the plan turns out: higher value by at least `lipschitz` times the time
/// difference, and no more cached bits.
fn prune<T>(mut pts: Vec<(f64, f64, f64, T)>, lipschitz: f64) -> Vec<(f64, f64, f64, T)> {
    pts.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let mut kept: Vec<(f64, f64, f64, T)> = Vec::new();
    for p in pts {
        let dominated = kept.iter().any(|q| q.2 <= p.2 && q.0 - lipschitz * (q.1 - p.1).abs() >= p.0);
        if !dominated {
            kept.push(p);
        }
    }
    kept
}

fn group_options(model: &SystemModel, k: usize, units: usize, track_bits: bool, lipschitz: f64) -> Result<(Vec<GroupOption>, u64)> {
    let n = model.group_size(k);
    let devices = &model.scenario.groups[k].devices;
    let chi = model.scenario.economics.cost_auv;
    let mut pts = Vec::new();
    let mut nodes = 0u64;
    for code in 0..3usize.pow(n as u32) {
        let mut offload = vec![false; n];
        let mut cache = vec![false; n];
        let mut c = code;
        for i in 0..n {
            offload[i] = c % 3 >= 1;
            cache[i] = c % 3 == 2;
            c /= 3;
        }
        let tx: Vec<usize> = (0..n).filter(|&i| offload[i] && !cache[i]).collect();
        let off: Vec<usize> = (0..n).filter(|&i| offload[i]).collect();
        let live = |i: usize| model.links[k][i].gamma_device > 0.0 && model.links[k][i].gamma_station > 0.0;
        if tx.iter().any(|&i| !live(i)) {
            continue;
        }
        let bits: f64 = if track_bits {
            (0..n).filter(|&i| cache[i]).map(|i| devices[i].task.data_bits).sum()
        } else {
            0.0
        };
        for r in fraction_lattice(tx.len(), units) {
            for f in fraction_lattice(off.len(), units) {
                let mut g = GroupDecision::local(n);
                g.offload = offload.clone();
                g.cache = cache.clone();
                for (&i, &v) in tx.iter().zip(&r) {
                    g.bandwidth[i] = v;
                }
                for (&i, &v) in off.iter().zip(&f) {
                    g.compute[i] = v;
                }
                nodes += 1;
                let v = model.group_value(k, &g)?;
                pts.push((v.revenue - v.task_cost - chi * v.hover_energy_j, v.service_time_s, bits, g));
            }
        }
    }
    let kept = prune(pts, lipschitz)
        .into_iter()
        .map(|(value, time, bits, decision)| GroupOption { value, time, bits, decision })
        .collect();
    Ok((kept, nodes))
}

/// A candidate for one AUV: its tour plus an option index per visited group.
#[derive(Debug, Clone)]
struct AuvPoint {
    tour: Vec<usize>,
    picks: Vec<usize>,
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Candidate set for one AUV serving `groups`, pruned as in [`prune`].
fn auv_frontier(
    model: &SystemModel,
    groups: &[usize],
    options: &[Vec<GroupOption>],
    lipschitz: f64,
    nodes: &mut u64,
) -> Vec<(f64, f64, f64, AuvPoint)> {
    let chi = model.scenario.economics.cost_auv;
    let tours: Vec<(f64, f64, f64, Vec<usize>)> = permutations(groups)
        .into_iter()
        .map(|t| (-chi * model.travel.tour_leg_energy(&t), model.travel.tour_travel_time(&t), 0.0, t))
        .collect();
    *nodes += tours.len() as u64;
    let tours = prune(tours, lipschitz);
    let mut acc: Vec<(f64, f64, f64, Vec<usize>)> = vec![(0.0, 0.0, 0.0, Vec::new())];
    for &g in groups {
        let mut next = Vec::with_capacity(acc.len() * options[g].len());
        for a in &acc {
            for (oi, o) in options[g].iter().enumerate() {
                let mut picks = a.3.clone();
                picks.push(oi);
                next.push((a.0 + o.value, a.1 + o.time, a.2 + o.bits, picks));
            }
        }
        *nodes += next.len() as u64;
        acc = prune(next, lipschitz);
    }
    let mut out = Vec::with_capacity(acc.len() * tours.len());
    for a in &acc {
        for t in &tours {
            out.push((
                a.0 + t.0,
                a.1 + t.1,
                a.2,
                AuvPoint {
                    tour: t.3.clone(),
                    picks: a.3.clone(),
                },
            ));
        }
    }
    prune(out, lipschitz)
}

/// Exhaustive search over routes and a per-group decision lattice with
/// fractions on a grid of `grid_step` (plus even splits). The result is
/// optimal over that lattice and satisfies every hard constraint.
pub fn oracle(model: &SystemModel, grid_step: f64, limits: &OracleLimits) -> Result<OracleResult> {
    let start = Instant::now();
    let s = &model.scenario;
    let k = s.num_groups();
    let m = s.num_auvs;
    if k > limits.max_groups {
        return Err(Error::TooLarge(format!("K = {k} exceeds the oracle limit of {} groups", limits.max_groups)));
    }
    if m > limits.max_auvs.min(2) {
        return Err(Error::TooLarge(format!("M = {m} exceeds the oracle limit of {} AUVs", limits.max_auvs.min(2))));
    }
    let n_max = s.max_devices_per_group();
    if n_max > limits.max_devices_per_group {
        return Err(Error::TooLarge(format!(
            "{n_max} devices in one group exceeds the oracle limit of {}",
            limits.max_devices_per_group
        )));
    }
    let units = (1.0 / grid_step).round();
    if !(grid_step > 0.0) || (units * grid_step - 1.0).abs() > 1e-9 || !(1.0..=8.0).contains(&units) {
        return Err(Error::Domain(format!("grid step {grid_step} must be 1/n for n in 1..=8")));
    }
    let units = units as usize;
    let cap = s.constants.storage_capacity_bits;
    let track_bits = s.total_task_bits() > cap;
    let lipschitz = if m == 1 { 0.0 } else { s.economics.fairness_penalty };

    let mut nodes = 0u64;
    let mut options = Vec::with_capacity(k);
    for g in 0..k {
        let (o, n) = group_options(model, g, units, track_bits, lipschitz)?;
        nodes += n;
        options.push(o);
    }

    let assemble = |parts: Vec<&AuvPoint>| -> DecisionSet {
        let mut d = DecisionSet::all_local(s, RoutePlan::new(parts.iter().map(|p| p.tour.clone()).collect()));
        for p in parts {
            let visit_order: Vec<usize> = {
                let mut v = p.tour.clone();
                v.sort_unstable();
                v
            };
            for (&g, &oi) in visit_order.iter().zip(&p.picks) {
                d.set_group(g, options[g][oi].decision.clone());
            }
        }
        d
    };

    struct Best {
        profit: f64,
        plan: RoutePlan,
        decisions: DecisionSet,
    }
    let better = |a: &Best, b: &Best| match a.profit.total_cmp(&b.profit) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.plan < b.plan,
    };

    let all: Vec<usize> = (0..k).collect();
    let (best, searched) = if m == 1 {
        let mut n = 0;
        let front = auv_frontier(model, &all, &options, lipschitz, &mut n);
        let top = front
            .iter()
            .filter(|p| p.2 <= cap)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .ok_or_else(|| Error::Domain("oracle found no feasible point".into()))?;
        let decisions = assemble(vec![&top.3]);
        (
            Best {
                profit: top.0,
                plan: decisions.plan.clone(),
                decisions,
            },
            n,
        )
    } else {
        let results: Vec<Result<(Option<Best>, u64)>> = (0u32..(1 << k))
            .into_par_iter()
            .map(|mask| {
                let mut n = 0u64;
                let mine: Vec<usize> = all.iter().copied().filter(|&g| mask & (1 << g) != 0).collect();
                let rest: Vec<usize> = all.iter().copied().filter(|&g| mask & (1 << g) == 0).collect();
                let fa = auv_frontier(model, &mine, &options, lipschitz, &mut n);
                let fb = auv_frontier(model, &rest, &options, lipschitz, &mut n);
                let mut top: Option<(f64, usize, usize)> = None;
                for (i, a) in fa.iter().enumerate() {
                    for (j, b) in fb.iter().enumerate() {
                        n += 1;
                        if a.2 + b.2 > cap {
                            continue;
                        }
                        let p = a.0 + b.0 - model.fairness_penalty((a.1 - b.1).abs());
                        if top.is_none_or(|t| p > t.0) {
                            top = Some((p, i, j));
                        }
                    }
                }
                Ok((
                    top.map(|(profit, i, j)| {
                        let decisions = assemble(vec![&fa[i].3, &fb[j].3]);
                        Best {
                            profit,
                            plan: decisions.plan.clone(),
                            decisions,
                        }
                    }),
                    n,
                ))
            })
            .collect();
        let mut best: Option<Best> = None;
        let mut n = 0;
        for r in results {
            let (b, c) = r?;
            n += c;
            if let Some(b) = b {
                if best.as_ref().is_none_or(|cur| better(&b, cur)) {
                    best = Some(b);
                }
            }
        }
        (best.ok_or_else(|| Error::Domain("oracle found no feasible point".into()))?, n)
    };
    nodes += searched;
    let breakdown = model.evaluate(&best.decisions, EvalMode::Strict)?;
    debug_assert!((breakdown.profit - best.profit).abs() <= 1e-6 * best.profit.abs().max(1.0));
    Ok(OracleResult {
        decisions: best.decisions,
        profit: breakdown.profit,
        nodes,
        wall: start.elapsed(),
    })
}
