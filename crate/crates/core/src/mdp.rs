//! Episodic environment: one episode is one service cycle. At each step the
//! active AUV (round-robin by index) picks an unserved group, flies there and
//! serves it with the offload/cache/allocation part of the action.
//!
//! Rewards are per step and telescope: their sum over an episode equals the
//! penalty-mode profit of the decisions the episode assembled.

use std::sync::Arc;

use rand::Rng;

use crate::economics::{DecisionSet, GroupDecision, SystemModel};
use crate::error::{Error, Result};
use crate::routing::{fairness_gap, RoutePlan};

/// The decision for one step, over the devices of the chosen group. Vectors
/// may be padded beyond the group size; the extra entries are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvAction {
    pub next_dg: usize,
    pub offload: Vec<bool>,
    pub cache: Vec<bool>,
    pub bandwidth: Vec<f64>,
    pub compute: Vec<f64>,
}

impl EnvAction {
    /// Keeps every task of group `k` local.
    pub fn local(k: usize, n: usize) -> Self {
        Self {
            next_dg: k,
            offload: vec![false; n],
            cache: vec![false; n],
            bandwidth: vec![0.0; n],
            compute: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub terminal: bool,
}

/// Mutable episode state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub served: Vec<bool>,
    /// Travel-table node each AUV currently sits at (0 = depot).
    pub auv_node: Vec<usize>,
    /// Cruise plus hover time accumulated by each AUV this cycle.
    pub auv_elapsed_s: Vec<f64>,
    pub remaining_cache_bits: f64,
    pub active: usize,
    pub steps: usize,
    pub tours: Vec<Vec<usize>>,
    pub groups: Vec<Option<GroupDecision>>,
}

/// Normalization constants fixed per scenario so every feature lies in [-1, 1].
#[derive(Debug, Clone)]
struct Scales {
    xy: f64,
    depth: f64,
    time: f64,
    max_n: f64,
    group_stats: Vec<[f64; 6]>,
}

#[derive(Debug, Clone)]
pub struct Env {
    model: Arc<SystemModel>,
    scales: Scales,
    state: EnvState,
}

impl Env {
    pub fn new(model: Arc<SystemModel>) -> Self {
        let s = &model.scenario;
        let xy = model
            .travel
            .nodes
            .iter()
            .map(|p| p.x.abs().max(p.y.abs()))
            .fold(1.0, f64::max);
        let devices = || s.groups.iter().flat_map(|g| g.devices.iter());
        let max_z = devices().map(|d| d.task.data_bits).fold(0.0, f64::max);
        let max_alpha = devices().map(|d| d.task.complexity).fold(0.0, f64::max);
        let max_f = devices().map(|d| d.cpu_hz).fold(0.0, f64::max);
        let max_n = s.max_devices_per_group() as f64;
        let group_stats = s
            .groups
            .iter()
            .map(|g| {
                let n = g.devices.len() as f64;
                let mean = |f: &dyn Fn(&crate::scenario::Device) -> f64| g.devices.iter().map(f).sum::<f64>() / n;
                [
                    g.centroid.x / xy,
                    g.centroid.y / xy,
                    n / max_n,
                    mean(&|d| d.task.data_bits) / max_z,
                    mean(&|d| d.task.complexity) / max_alpha,
                    mean(&|d| d.cpu_hz) / max_f,
                ]
            })
            .collect();
        let scales = Scales {
            xy,
            depth: s.geometry.water_depth_m,
            time: 4.0 * xy / s.constants.auv_speed_mps,
            max_n,
            group_stats,
        };
        let state = Self::initial_state(&model);
        Self { model, scales, state }
    }

    fn initial_state(model: &SystemModel) -> EnvState {
        let m = model.scenario.num_auvs;
        let k = model.num_groups();
        EnvState {
            served: vec![false; k],
            auv_node: vec![0; m],
            auv_elapsed_s: vec![0.0; m],
            remaining_cache_bits: model.scenario.constants.storage_capacity_bits,
            active: 0,
            steps: 0,
            tours: vec![Vec::new(); m],
            groups: vec![None; k],
        }
    }

    pub fn model(&self) -> &Arc<SystemModel> {
        &self.model
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn num_groups(&self) -> usize {
        self.model.num_groups()
    }

    pub fn num_auvs(&self) -> usize {
        self.model.scenario.num_auvs
    }

    pub fn max_devices(&self) -> usize {
        self.scales.max_n as usize
    }

    pub fn group_size(&self, k: usize) -> usize {
        self.model.group_size(k)
    }

    /// Length of [`Env::features`]: `4M + 7K + 2 + M`.
    pub fn feature_len(&self) -> usize {
        5 * self.num_auvs() + 7 * self.num_groups() + 2
    }

    /// Starts a new cycle. The environment is deterministic; `seed` is accepted
    /// for interface symmetry with stochastic environments.
    pub fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.state = Self::initial_state(&self.model);
        self.features()
    }

    pub fn is_terminal(&self) -> bool {
        self.state.steps == self.num_groups()
    }

    /// `true` for groups that may be chosen next.
    pub fn valid_mask(&self) -> Vec<bool> {
        self.state.served.iter().map(|s| !s).collect()
    }

    pub fn features(&self) -> Vec<f64> {
        let st = &self.state;
        let sc = &self.scales;
        let mut f = Vec::with_capacity(self.feature_len());
        for j in 0..self.num_auvs() {
            let p = self.model.travel.nodes[st.auv_node[j]];
            f.extend([p.x / sc.xy, p.y / sc.xy, p.z / sc.depth, (st.auv_elapsed_s[j] / sc.time).tanh()]);
        }
        for (k, stats) in sc.group_stats.iter().enumerate() {
            f.push(if st.served[k] { 1.0 } else { 0.0 });
            f.extend_from_slice(stats);
        }
        let cap = self.model.scenario.constants.storage_capacity_bits;
        f.push(st.remaining_cache_bits / cap);
        f.push(st.steps as f64 / self.num_groups() as f64);
        for j in 0..self.num_auvs() {
            f.push(if j == st.active { 1.0 } else { 0.0 });
        }
        f
    }

    /// Applies `action` for the active AUV.
    pub fn step(&mut self, action: &EnvAction) -> Result<StepOutcome> {
        let k = action.next_dg;
        if self.is_terminal() {
            return Err(Error::InvalidAction("episode already finished".into()));
        }
        if k >= self.num_groups() || self.state.served[k] {
            return Err(Error::InvalidAction(format!("group {k} is not available")));
        }
        let n = self.group_size(k);
        if action.offload.len() < n || action.cache.len() < n || action.bandwidth.len() < n || action.compute.len() < n {
            return Err(Error::Shape(format!("action covers fewer than the {n} devices of group {k}")));
        }
        let raw = GroupDecision {
            offload: action.offload[..n].to_vec(),
            cache: action.cache[..n].to_vec(),
            bandwidth: action.bandwidth[..n].to_vec(),
            compute: action.compute[..n].to_vec(),
        };
        let model = Arc::clone(&self.model);
        let g = model.project_group(k, &raw, self.state.remaining_cache_bits);
        let value = model.group_value(k, &g)?;
        let chi = model.scenario.economics.cost_auv;
        let st = &mut self.state;
        let j = st.active;
        let leg = model.travel.leg(st.auv_node[j], k + 1);
        let cached_bits: f64 = (0..n)
            .filter(|&i| g.cache[i])
            .map(|i| model.scenario.groups[k].devices[i].task.data_bits)
            .sum();
        let mut reward = value.revenue - value.task_cost - chi * (leg.energy_j() + value.hover_energy_j);
        st.remaining_cache_bits -= cached_bits;
        st.auv_elapsed_s[j] += leg.time_s + value.service_time_s;
        st.auv_node[j] = k + 1;
        st.served[k] = true;
        st.tours[j].push(k);
        st.groups[k] = Some(g);
        st.steps += 1;
        st.active = (j + 1) % st.auv_node.len();
        let terminal = st.steps == model.num_groups();
        if terminal {
            for j in 0..st.auv_node.len() {
                if st.auv_node[j] != 0 {
                    let back = model.travel.leg(st.auv_node[j], 0);
                    reward -= chi * back.energy_j();
                    st.auv_elapsed_s[j] += back.time_s;
                    st.auv_node[j] = 0;
                }
            }
            reward -= model.fairness_penalty(fairness_gap(&st.auv_elapsed_s));
        }
        Ok(StepOutcome { reward, terminal })
    }

    /// Decisions assembled so far; unserved groups stay local.
    pub fn decision_set(&self) -> DecisionSet {
        let s = &self.model.scenario;
        let mut d = DecisionSet::all_local(s, RoutePlan::new(self.state.tours.clone()));
        for (k, g) in self.state.groups.iter().enumerate() {
            if let Some(g) = g {
                d.set_group(k, g.clone());
            }
        }
        d
    }

    /// Uniformly random valid action: random unserved group, fair-coin offload
    /// and cache bits, Dirichlet-like random fractions.
    pub fn random_action<R: Rng>(&self, rng: &mut R) -> EnvAction {
        let free: Vec<usize> = (0..self.num_groups()).filter(|&k| !self.state.served[k]).collect();
        let k = free[rng.gen_range(0..free.len())];
        let n = self.group_size(k);
        let offload: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let cache: Vec<bool> = (0..n).map(|i| offload[i] && rng.gen_bool(0.5)).collect();
        let simplex = |rng: &mut R, extra: usize| {
            let w: Vec<f64> = (0..n + extra).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
            let sum: f64 = w.iter().sum();
            w.into_iter().map(|x| x / sum).take(n).collect::<Vec<_>>()
        };
        EnvAction {
            next_dg: k,
            bandwidth: simplex(rng, 0),
            compute: simplex(rng, 1),
            offload,
            cache,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economics::EvalMode;
    use crate::scenario::{generate_random, DeviceCount, GenSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env(k: usize, m: usize, n: usize, vortices: usize) -> Env {
        let mut spec = GenSpec::new(k, m, DeviceCount::PerGroup(n));
        spec.area_m = 800.0;
        spec.num_vortices = vortices;
        let s = generate_random(&spec, 11).unwrap();
        Env::new(Arc::new(SystemModel::new(&s).unwrap()))
    }

    #[test]
    fn reset_state() {
        let mut e = env(5, 2, 3, 2);
        let a = e.reset(1);
        let b = e.reset(1);
        assert_eq!(a, b);
        assert_eq!(a.len(), 4 * 2 + 7 * 5 + 2 + 2);
        assert_eq!(a.len(), e.feature_len());
        assert!(e.state().served.iter().all(|s| !s));
        assert!(e.state().auv_node.iter().all(|&n| n == 0));
        assert_eq!(e.state().active, 0);
    }

    #[test]
    fn local_action_in_still_water() {
        let mut e = env(3, 1, 2, 0);
        e.reset(0);
        let out = e.step(&EnvAction::local(2, 2)).unwrap();
        let leg = e.model().travel.leg_energy(0, 3);
        assert_eq!(out.reward, -2.0 * leg);
    }

    #[test]
    fn rejects_served_group() {
        let mut e = env(3, 1, 2, 0);
        e.reset(0);
        e.step(&EnvAction::local(1, 2)).unwrap();
        assert!(matches!(e.step(&EnvAction::local(1, 2)), Err(Error::InvalidAction(_))));
    }

    #[test]
    fn episodes_telescope() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut e = env(4, 2, 3, 3);
        for _ in 0..50 {
            e.reset(0);
            let mut total = 0.0;
            let mut steps = 0;
            loop {
                let a = e.random_action(&mut rng);
                let out = e.step(&a).unwrap();
                total += out.reward;
                steps += 1;
                for (x, k) in e.features().iter().zip(0..) {
                    assert!((-1.0..=1.0).contains(x), "feature {k} = {x}");
                }
                if out.terminal {
                    break;
                }
            }
            assert_eq!(steps, 4);
            let d = e.decision_set();
            let model = e.model();
            assert!(model.audit(&d).passes(), "{:?}", model.audit(&d).hard_failures());
            let p = model.evaluate(&d, EvalMode::Penalty).unwrap().profit;
            assert!((total - p).abs() <= 1e-9 * p.abs(), "{total} vs {p}");
        }
    }

    #[test]
    fn step_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut a = env(4, 2, 2, 1);
        a.reset(0);
        let act = a.random_action(&mut rng);
        let mut b = a.clone();
        assert_eq!(a.step(&act).unwrap(), b.step(&act).unwrap());
        assert_eq!(a.state(), b.state());
    }
}
