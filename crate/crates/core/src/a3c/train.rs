use std::collections::VecDeque;
use std::io::Write;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{act, gradients, ActMode, LossWeights, NetShape, Params, TrainStep};
use super::{k_step_returns, RmsProp};
use crate::economics::{DecisionSet, SystemModel};
use crate::error::{Error, Result};
use crate::mdp::Env;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub discount: f64,
    /// Steps per rollout; `None` means one episode (K steps).
    pub rollout_len: Option<usize>,
    pub entropy_weight: f64,
    pub value_coef: f64,
    pub workers: usize,
    pub max_updates: usize,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_eps: f64,
    pub hidden: usize,
    pub adaptive_lr: bool,
    /// The adaptive schedule never halves the learning rate below this.
    pub min_learning_rate: f64,
    pub simplex_noise: f64,
    /// Rewards are divided by this before training; `None` calibrates it from
    /// random episodes.
    pub reward_scale: Option<f64>,
    /// Greedy evaluation period, in updates, for best-policy tracking.
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            discount: 0.99,
            rollout_len: None,
            entropy_weight: 0.01,
            value_coef: 0.5,
            workers: 4,
            max_updates: 2000,
            learning_rate: 1e-3,
            rms_decay: 0.99,
            rms_eps: 1e-8,
            hidden: 128,
            adaptive_lr: false,
            min_learning_rate: 2.5e-4,
            simplex_noise: 0.3,
            reward_scale: None,
            eval_every: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Domain(format!("train config: {m}")));
        if !(0.0..1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1)");
        }
        if self.rollout_len == Some(0) {
            return bad("rollout length must be at least 1");
        }
        if !(self.entropy_weight >= 0.0) || !(self.value_coef >= 0.0) {
            return bad("loss weights must be nonnegative");
        }
        if self.workers == 0 || self.hidden == 0 || self.eval_every == 0 {
            return bad("workers, hidden width and eval period must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.min_learning_rate >= 0.0) || !(0.0..1.0).contains(&self.rms_decay) || !(self.rms_eps > 0.0) {
            return bad("optimizer settings out of range");
        }
        if !(self.simplex_noise >= 0.0) {
            return bad("simplex noise must be nonnegative");
        }
        if let Some(s) = self.reward_scale {
            if !(s > 0.0) {
                return bad("reward scale must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub update_index: usize,
    pub global_step: usize,
    pub mean_episode_profit: f64,
    pub entropy: f64,
    pub value_loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: Params,
    /// Parameters whose greedy policy scored highest during training.
    pub best_params: Params,
    pub best_profit: f64,
    pub curve: Vec<CurvePoint>,
    pub reward_scale: f64,
}

pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in curve {
        out.serialize(p).map_err(|e| Error::Format(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

/// Runs the greedy policy for one cycle; returns the decisions and the episode
/// profit (sum of unscaled rewards).
pub fn greedy_episode(model: &Arc<SystemModel>, params: &Params) -> Result<(DecisionSet, f64)> {
    let mut env = Env::new(Arc::clone(model));
    let sizes: Vec<usize> = (0..env.num_groups()).map(|k| env.group_size(k)).collect();
    let max_n = env.max_devices();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    env.reset(0);
    let mut total = 0.0;
    loop {
        let (rec, _) = act(params, &env.features(), &env.valid_mask(), &sizes, ActMode::Greedy, &mut rng)?;
        let out = env.step(&rec.to_env_action(max_n))?;
        total += out.reward;
        if out.terminal {
            return Ok((env.decision_set(), total));
        }
    }
}

fn calibrate_reward_scale(model: &Arc<SystemModel>, seed: u64) -> Result<f64> {
    let mut env = Env::new(Arc::clone(model));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ca1e);
    let episodes = 16;
    let mut sum = 0.0;
    for _ in 0..episodes {
        env.reset(0);
        loop {
            let out = env.step(&env.random_action(&mut rng))?;
            sum += out.reward.abs();
            if out.terminal {
                break;
            }
        }
    }
    Ok((sum / (episodes * env.num_groups()) as f64).max(1e-9))
}

struct Slot {
    theta: Vec<f64>,
    upsilon: Vec<f64>,
}

struct Log {
    curve: Vec<CurvePoint>,
    recent: VecDeque<f64>,
    learning_rate: f64,
    best: Option<(f64, Params)>,
}

struct Shared {
    slots: Vec<Mutex<Slot>>,
    tickets: AtomicUsize,
    env_steps: AtomicUsize,
    stop: AtomicBool,
    log: Mutex<Log>,
}

const RECENT_EPISODES: usize = 20;
const STALL_WINDOW: usize = 50;

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Trains a policy on `model` with `cfg.workers` asynchronous workers sharing
/// one parameter store. With a single worker the run is reproducible.
pub fn train(model: Arc<SystemModel>, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let probe = Env::new(Arc::clone(&model));
    let shape = NetShape {
        input: probe.feature_len(),
        hidden: cfg.hidden,
        groups: probe.num_groups(),
        max_devices: probe.max_devices(),
    };
    let reward_scale = match cfg.reward_scale {
        Some(s) => s,
        None => calibrate_reward_scale(&model, cfg.seed)?,
    };
    let init = Params::init(shape, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let shared = Shared {
        slots: init
            .tensors
            .iter()
            .map(|t| {
                Mutex::new(Slot {
                    theta: t.clone(),
                    upsilon: vec![0.0; t.len()],
                })
            })
            .collect(),
        tickets: AtomicUsize::new(0),
        env_steps: AtomicUsize::new(0),
        stop: AtomicBool::new(false),
        log: Mutex::new(Log {
            curve: Vec::with_capacity(cfg.max_updates),
            recent: VecDeque::new(),
            learning_rate: cfg.learning_rate,
            best: None,
        }),
    };

    let results: Vec<Result<()>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.workers)
            .map(|id| {
                let shared = &shared;
                let model = Arc::clone(&model);
                scope.spawn(move || {
                    let r = worker(id, shared, model, cfg, shape, reward_scale);
                    if r.is_err() {
                        shared.stop.store(true, Ordering::SeqCst);
                    }
                    r
                })
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(id, h)| {
                h.join().unwrap_or_else(|payload| {
                    shared.stop.store(true, Ordering::SeqCst);
                    let msg = payload
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "unknown panic".into());
                    Err(Error::Worker(format!("worker {id} panicked: {msg}")))
                })
            })
            .collect()
    });
    for r in results {
        r?;
    }

    let mut params = Params::zeros(shape);
    for (t, slot) in shared.slots.iter().enumerate() {
        params.tensors[t] = lock(slot).theta.clone();
    }
    let (final_profit, log) = {
        let log = shared.log.into_inner().unwrap_or_else(|e| e.into_inner());
        (greedy_episode(&model, &params)?.1, log)
    };
    let (best_profit, best_params) = match log.best {
        Some((p, b)) if p > final_profit => (p, b),
        _ => (final_profit, params.clone()),
    };
    Ok(TrainOutput {
        params,
        best_params,
        best_profit,
        curve: log.curve,
        reward_scale,
    })
}

fn worker(id: usize, shared: &Shared, model: Arc<SystemModel>, cfg: &TrainConfig, shape: NetShape, scale: f64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1 + id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut env = Env::new(Arc::clone(&model));
    env.reset(0);
    let sizes: Vec<usize> = (0..env.num_groups()).map(|k| env.group_size(k)).collect();
    let max_n = env.max_devices();
    let rollout_len = cfg.rollout_len.unwrap_or(env.num_groups());
    let weights = LossWeights {
        entropy: cfg.entropy_weight,
        value: cfg.value_coef,
    };
    let mode = ActMode::Sample {
        simplex_noise: cfg.simplex_noise,
    };
    let mut local = Params::zeros(shape);
    let mut episode_return = 0.0;

    loop {
        if shared.stop.load(Ordering::SeqCst) {
            return Ok(());
        }
        let ticket = shared.tickets.fetch_add(1, Ordering::SeqCst);
        if ticket >= cfg.max_updates {
            return Ok(());
        }
        for (t, slot) in shared.slots.iter().enumerate() {
            local.tensors[t].copy_from_slice(&lock(slot).theta);
        }

        let mut records = Vec::with_capacity(rollout_len);
        let mut rewards = Vec::with_capacity(rollout_len);
        let mut finished = Vec::new();
        let mut terminal = false;
        for _ in 0..rollout_len {
            let (rec, _) = act(&local, &env.features(), &env.valid_mask(), &sizes, mode, &mut rng)?;
            let out = env.step(&rec.to_env_action(max_n))?;
            episode_return += out.reward;
            rewards.push(out.reward / scale);
            records.push(rec);
            if out.terminal {
                finished.push(episode_return);
                episode_return = 0.0;
                env.reset(0);
                terminal = true;
                break;
            }
        }
        let bootstrap = if terminal {
            0.0
        } else {
            let (_, v) = act(&local, &env.features(), &env.valid_mask(), &sizes, ActMode::Greedy, &mut rng)?;
            v
        };
        let targets = k_step_returns(&rewards, bootstrap, cfg.discount);
        let steps: Vec<TrainStep> = records
            .into_iter()
            .zip(targets)
            .map(|(record, target)| TrainStep { record, target })
            .collect();
        let (grad, stats) = gradients(&local, &steps, weights)?;

        let greedy = if (ticket + 1).is_multiple_of(cfg.eval_every) {
            Some(greedy_episode(&model, &local)?.1)
        } else {
            None
        };

        let learning_rate = lock(&shared.log).learning_rate;
        let opt = RmsProp {
            learning_rate,
            decay: cfg.rms_decay,
            eps: cfg.rms_eps,
        };
        for (t, slot) in shared.slots.iter().enumerate() {
            let mut s = lock(slot);
            let Slot { theta, upsilon } = &mut *s;
            opt.apply(theta, upsilon, &grad.tensors[t])?;
        }
        let global_step = shared.env_steps.fetch_add(steps.len(), Ordering::SeqCst) + steps.len();

        let mut log = lock(&shared.log);
        for r in finished {
            log.recent.push_back(r);
            if log.recent.len() > RECENT_EPISODES {
                log.recent.pop_front();
            }
        }
        if let Some(p) = greedy {
            if log.best.as_ref().is_none_or(|(b, _)| p > *b) {
                log.best = Some((p, local.clone()));
            }
        }
        let point = CurvePoint {
            update_index: log.curve.len(),
            global_step,
            mean_episode_profit: if log.recent.is_empty() { f64::NAN } else { mean(log.recent.iter().copied()) },
            entropy: stats.entropy,
            value_loss: stats.value_loss,
            learning_rate,
        };
        log.curve.push(point);
        let n = log.curve.len();
        if cfg.adaptive_lr && n >= 2 * STALL_WINDOW && n.is_multiple_of(STALL_WINDOW) {
            let prev = mean(log.curve[n - 2 * STALL_WINDOW..n - STALL_WINDOW].iter().map(|p| p.mean_episode_profit));
            let cur = mean(log.curve[n - STALL_WINDOW..].iter().map(|p| p.mean_episode_profit));
            if prev.is_finite() && cur.is_finite() && (cur - prev) < 0.005 * prev.abs() {
                log.learning_rate = (0.5 * log.learning_rate).max(cfg.min_learning_rate.min(cfg.learning_rate));
            }
        }
    }
}
