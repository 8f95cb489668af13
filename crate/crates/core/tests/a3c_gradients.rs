use std::sync::Arc;

use mtuc_core::a3c::net::{is_critic_tensor, TENSOR_NAMES};
use mtuc_core::a3c::{act, evaluate, gradients, loss, ActMode, LossWeights, NetShape, Params, TrainStep};
use mtuc_core::economics::SystemModel;
use mtuc_core::mdp::Env;
use mtuc_core::scenario::{generate_random, DeviceCount, GenSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_env(seed: u64) -> Env {
    let mut spec = GenSpec::new(3, 2, DeviceCount::PerGroup(3));
    spec.area_m = 600.0;
    let s = generate_random(&spec, seed).unwrap();
    Env::new(Arc::new(SystemModel::new(&s).unwrap()))
}

fn rollout(env: &mut Env, p: &Params, rng: &mut ChaCha8Rng) -> Vec<TrainStep> {
    let sizes: Vec<usize> = (0..env.num_groups()).map(|k| env.group_size(k)).collect();
    env.reset(0);
    let mut steps = Vec::new();
    loop {
        let (rec, _) = act(p, &env.features(), &env.valid_mask(), &sizes, ActMode::Sample { simplex_noise: 0.5 }, rng).unwrap();
        let out = env.step(&rec.to_env_action(env.max_devices())).unwrap();
        steps.push(TrainStep {
            record: rec,
            target: rng.gen_range(-2.0..2.0),
        });
        if out.terminal {
            return steps;
        }
    }
}

fn net(env: &Env, seed: u64) -> Params {
    let shape = NetShape {
        input: env.feature_len(),
        hidden: 8,
        groups: env.num_groups(),
        max_devices: env.max_devices(),
    };
    // Larger weights than the default init so every head has non-trivial curvature.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Params::init(shape, &mut rng);
    for t in p.tensors.iter_mut() {
        for v in t.iter_mut() {
            *v += rng.gen_range(-0.5..0.5);
        }
    }
    p
}

#[test]
fn analytic_gradients_match_central_differences() {
    let w = LossWeights {
        entropy: 0.07,
        value: 0.5,
    };
    for seed in 0..3u64 {
        let mut env = tiny_env(seed + 20);
        let p = net(&env, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let steps = rollout(&mut env, &p, &mut rng);
        let adv: Vec<f64> = steps.iter().map(|s| s.target - evaluate(&p, &s.record).unwrap().value).collect();
        let (g, _) = gradients(&p, &steps, w).unwrap();
        let h = 1e-6;
        let mut checked = 0;
        for t in 0..16 {
            let mut num = vec![0.0; p.tensors[t].len()];
            for i in 0..num.len() {
                let mut plus = p.clone();
                plus.tensors[t][i] += h;
                let mut minus = p.clone();
                minus.tensors[t][i] -= h;
                num[i] = (loss(&plus, &steps, &adv, w).unwrap() - loss(&minus, &steps, &adv, w).unwrap()) / (2.0 * h);
            }
            let diff: f64 = num.iter().zip(&g.tensors[t]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm = num.iter().map(|a| a * a).sum::<f64>().sqrt().max(g.tensors[t].iter().map(|a| a * a).sum::<f64>().sqrt());
            if norm < 1e-10 {
                // Heads of groups or devices the rollout never touched.
                continue;
            }
            checked += 1;
            let rel = diff / norm;
            assert!(rel <= 1e-4, "seed {seed} tensor {}: relative error {rel:e}", TENSOR_NAMES[t]);
        }
        assert!(checked >= 14, "only {checked} tensors carried gradient");
    }
}

#[test]
fn critic_step_reduces_squared_advantage() {
    let w = LossWeights { entropy: 0.0, value: 0.5 };
    let mut env = tiny_env(7);
    let p = net(&env, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let steps = rollout(&mut env, &p, &mut rng);
    let sq = |q: &Params| -> f64 {
        steps
            .iter()
            .map(|s| (s.target - evaluate(q, &s.record).unwrap().value).powi(2))
            .sum()
    };
    let (g, _) = gradients(&p, &steps, w).unwrap();
    let mut q = p.clone();
    for t in (0..16).filter(|&t| is_critic_tensor(t)) {
        for (v, d) in q.tensors[t].iter_mut().zip(&g.tensors[t]) {
            *v -= 1e-3 * d;
        }
    }
    assert!(sq(&q) < sq(&p));
}

#[test]
fn sampled_actions_are_always_valid() {
    let mut env = tiny_env(3);
    let p = net(&env, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let steps = rollout(&mut env, &p, &mut rng);
        assert_eq!(steps.len(), 3);
        for s in &steps {
            let e = evaluate(&p, &s.record).unwrap();
            assert!(e.entropy >= 0.0 && e.log_prob.is_finite());
        }
    }
}
