//! Asynchronous advantage actor-critic over the episodic environment.

pub mod net;
mod train;

use std::io::{Read, Write};

pub use net::{act, evaluate, gradients, loss, ActMode, ActionRecord, LossStats, LossWeights, NetShape, Params, TrainStep};
pub use train::{greedy_episode, train, write_curve_csv, CurvePoint, TrainConfig, TrainOutput};

use crate::error::{Error, Result};

/// Discounted k-step targets, computed backwards from `bootstrap`.
pub fn k_step_returns(rewards: &[f64], bootstrap: f64, discount: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for (t, r) in rewards.iter().enumerate().rev() {
        acc = r + discount * acc;
        out[t] = acc;
    }
    out
}

/// RMSProp hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub eps: f64,
}

impl RmsProp {
    /// `Υ ← ΛΥ + (1-Λ)g²`, `θ ← θ - Ξ g / √(Υ + ε)`.
    pub fn apply(&self, theta: &mut [f64], upsilon: &mut [f64], grad: &[f64]) -> Result<()> {
        if theta.len() != grad.len() || upsilon.len() != grad.len() {
            return Err(Error::Shape(format!(
                "rmsprop on {} parameters with {} gradients and {} accumulators",
                theta.len(),
                grad.len(),
                upsilon.len()
            )));
        }
        for ((t, u), g) in theta.iter_mut().zip(upsilon.iter_mut()).zip(grad) {
            *u = self.decay * *u + (1.0 - self.decay) * g * g;
            *t -= self.learning_rate * g / (*u + self.eps).sqrt();
        }
        Ok(())
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"MTUCA3C\0";
const CHECKPOINT_VERSION: u32 = 1;

/// Writes a checkpoint: magic, version, net shape, reward scale, then the flat
/// parameter vector, all little-endian.
pub fn save_checkpoint<W: Write>(mut w: W, params: &Params, reward_scale: f64) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let s = params.shape;
    for d in [s.input, s.hidden, s.groups, s.max_devices] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    w.write_all(&reward_scale.to_le_bytes())?;
    let flat = params.flat();
    w.write_all(&(flat.len() as u64).to_le_bytes())?;
    for v in flat {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_checkpoint<R: Read>(mut r: R) -> Result<(Params, f64)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not an actor-critic checkpoint".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("checkpoint version {version} is not supported")));
    }
    let mut b8 = [0u8; 8];
    let mut next_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let mut dims = [0usize; 4];
    for d in dims.iter_mut() {
        *d = next_u64(&mut r)? as usize;
    }
    let reward_scale = f64::from_bits(next_u64(&mut r)?);
    let count = next_u64(&mut r)? as usize;
    let shape = NetShape {
        input: dims[0],
        hidden: dims[1],
        groups: dims[2],
        max_devices: dims[3],
    };
    let mut params = Params::zeros(shape);
    if count != params.num_params() {
        return Err(Error::Format(format!("header promises {} parameters, shape needs {}", count, params.num_params())));
    }
    let mut flat = Vec::with_capacity(count);
    for _ in 0..count {
        flat.push(f64::from_bits(next_u64(&mut r)?));
    }
    params.set_flat(&flat)?;
    Ok((params, reward_scale))
}
