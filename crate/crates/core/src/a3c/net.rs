//! Shared-trunk policy/value network with analytic gradients.
//!
//! Trunk: two fully connected tanh layers. Heads read the second hidden layer:
//! route logits over groups, and for the chosen group `k` its slice of the
//! offload, cache, bandwidth and compute logits. Compute logits carry one
//! extra slack entry per group so the allocated share can stay below one.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::EnvAction;

pub const W1: usize = 0;
pub const B1: usize = 1;
pub const W2: usize = 2;
pub const B2: usize = 3;
pub const ROUTE_W: usize = 4;
pub const ROUTE_B: usize = 5;
pub const OFFLOAD_W: usize = 6;
pub const OFFLOAD_B: usize = 7;
pub const CACHE_W: usize = 8;
pub const CACHE_B: usize = 9;
pub const BANDWIDTH_W: usize = 10;
pub const BANDWIDTH_B: usize = 11;
pub const COMPUTE_W: usize = 12;
pub const COMPUTE_B: usize = 13;
pub const VALUE_W: usize = 14;
pub const VALUE_B: usize = 15;

pub const TENSOR_NAMES: [&str; 16] = [
    "trunk1.w",
    "trunk1.b",
    "trunk2.w",
    "trunk2.b",
    "route.w",
    "route.b",
    "offload.w",
    "offload.b",
    "cache.w",
    "cache.b",
    "bandwidth.w",
    "bandwidth.b",
    "compute.w",
    "compute.b",
    "value.w",
    "value.b",
];

/// Tensors that belong to the critic; every other tensor is actor-only
/// except the shared trunk.
pub fn is_critic_tensor(t: usize) -> bool {
    matches!(t, W1 | B1 | W2 | B2 | VALUE_W | VALUE_B)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub input: usize,
    pub hidden: usize,
    pub groups: usize,
    pub max_devices: usize,
}

impl NetShape {
    /// `(rows, cols)` of each tensor; biases are column vectors.
    pub fn dims(&self) -> [(usize, usize); 16] {
        let (i, h, k, n) = (self.input, self.hidden, self.groups, self.max_devices);
        [
            (h, i),
            (h, 1),
            (h, h),
            (h, 1),
            (k, h),
            (k, 1),
            (k * n, h),
            (k * n, 1),
            (k * n, h),
            (k * n, 1),
            (k * n, h),
            (k * n, 1),
            (k * (n + 1), h),
            (k * (n + 1), 1),
            (1, h),
            (1, 1),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub shape: NetShape,
    pub tensors: Vec<Vec<f64>>,
}

impl Params {
    pub fn zeros(shape: NetShape) -> Self {
        Self {
            shape,
            tensors: shape.dims().iter().map(|(r, c)| vec![0.0; r * c]).collect(),
        }
    }

    /// Glorot-uniform trunk, small uniform heads, zero biases and value head.
    pub fn init<R: Rng>(shape: NetShape, rng: &mut R) -> Self {
        let mut p = Self::zeros(shape);
        let dims = shape.dims();
        for t in [W1, W2, ROUTE_W, OFFLOAD_W, CACHE_W, BANDWIDTH_W, COMPUTE_W] {
            let (r, c) = dims[t];
            let mut limit = (6.0 / (r + c) as f64).sqrt();
            if t != W1 && t != W2 {
                limit *= 0.1;
            }
            for w in p.tensors[t].iter_mut() {
                *w = rng.gen_range(-limit..limit);
            }
        }
        p
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(Vec::len).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors.concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!("expected {} parameters, got {}", self.num_params(), flat.len())));
        }
        let mut off = 0;
        for t in self.tensors.iter_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    fn row(&self, t: usize, r: usize) -> &[f64] {
        let c = self.shape.dims()[t].1;
        &self.tensors[t][r * c..(r + 1) * c]
    }

    /// `W[row] · h + b[row]`.
    fn unit(&self, w: usize, b: usize, row: usize, h: &[f64]) -> f64 {
        dot(self.row(w, row), h) + self.tensors[b][row]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trunk activations for one input.
#[derive(Debug, Clone)]
pub struct Trunk {
    pub x: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
}

pub fn trunk(p: &Params, x: &[f64]) -> Result<Trunk> {
    let s = p.shape;
    if x.len() != s.input {
        return Err(Error::Shape(format!("feature length {} but the net expects {}", x.len(), s.input)));
    }
    let h1: Vec<f64> = (0..s.hidden).map(|r| p.unit(W1, B1, r, x).tanh()).collect();
    let h2: Vec<f64> = (0..s.hidden).map(|r| p.unit(W2, B2, r, &h1).tanh()).collect();
    Ok(Trunk { x: x.to_vec(), h1, h2 })
}

/// Softmax over the listed logits.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Route probabilities with masked groups at exactly zero.
pub fn masked_softmax(z: &[f64], mask: &[bool]) -> Vec<f64> {
    let idx: Vec<usize> = (0..z.len()).filter(|&j| mask[j]).collect();
    let sub = softmax(&idx.iter().map(|&j| z[j]).collect::<Vec<_>>());
    let mut p = vec![0.0; z.len()];
    for (&j, v) in idx.iter().zip(sub) {
        p[j] = v;
    }
    p
}

pub fn categorical_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn bernoulli_log_prob(x: f64, y: bool) -> f64 {
    if y {
        -softplus(-x)
    } else {
        -softplus(x)
    }
}

fn bernoulli_entropy(x: f64) -> f64 {
    let s = sigmoid(x);
    s * softplus(-x) + (1.0 - s) * softplus(x)
}

/// Everything needed to re-evaluate and differentiate the policy at a step.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    pub features: Vec<f64>,
    pub mask: Vec<bool>,
    pub group: usize,
    pub n: usize,
    pub offload: Vec<bool>,
    pub cache: Vec<bool>,
    /// Devices sharing the bandwidth simplex and their realized shares.
    pub bw_set: Vec<usize>,
    pub bw_alloc: Vec<f64>,
    /// Compute simplex members (index `max_devices` is the slack) and shares.
    pub cp_set: Vec<usize>,
    pub cp_alloc: Vec<f64>,
}

impl ActionRecord {
    pub fn to_env_action(&self, max_devices: usize) -> EnvAction {
        let n = self.n;
        let mut bandwidth = vec![0.0; n];
        for (&i, &a) in self.bw_set.iter().zip(&self.bw_alloc) {
            bandwidth[i] = a;
        }
        let mut compute = vec![0.0; n];
        for (&i, &a) in self.cp_set.iter().zip(&self.cp_alloc) {
            if i < max_devices {
                compute[i] = a;
            }
        }
        EnvAction {
            next_dg: self.group,
            offload: self.offload.clone(),
            cache: self.cache.clone(),
            bandwidth,
            compute,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActMode {
    /// Sample every component; simplex heads get Gaussian logit noise of this scale.
    Sample { simplex_noise: f64 },
    /// Most likely route, bits with p > 0.5, simplex at its mean.
    Greedy,
}

fn head_rows(s: &NetShape, k: usize) -> (usize, usize) {
    (k * s.max_devices, k * (s.max_devices + 1))
}

/// Chooses an action at `features` for a scenario with `group_sizes`.
pub fn act<R: Rng>(p: &Params, features: &[f64], mask: &[bool], group_sizes: &[usize], mode: ActMode, rng: &mut R) -> Result<(ActionRecord, f64)> {
    let s = p.shape;
    let tr = trunk(p, features)?;
    let z: Vec<f64> = (0..s.groups).map(|j| p.unit(ROUTE_W, ROUTE_B, j, &tr.h2)).collect();
    let probs = masked_softmax(&z, mask);
    let k = match mode {
        ActMode::Greedy => {
            let mut best = None;
            for j in (0..s.groups).filter(|&j| mask[j]) {
                if best.is_none_or(|b: usize| probs[j] > probs[b]) {
                    best = Some(j);
                }
            }
            best.ok_or_else(|| Error::InvalidAction("no group left to serve".into()))?
        }
        ActMode::Sample { .. } => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = None;
            for j in (0..s.groups).filter(|&j| mask[j]) {
                acc += probs[j];
                pick = Some(j);
                if u < acc {
                    break;
                }
            }
            pick.ok_or_else(|| Error::InvalidAction("no group left to serve".into()))?
        }
    };
    let n = group_sizes[k];
    let (row, crow) = head_rows(&s, k);
    let draw = |x: f64, rng: &mut R| match mode {
        ActMode::Greedy => sigmoid(x) > 0.5,
        ActMode::Sample { .. } => rng.gen::<f64>() < sigmoid(x),
    };
    let mut offload = vec![false; n];
    let mut cache = vec![false; n];
    for i in 0..n {
        offload[i] = draw(p.unit(OFFLOAD_W, OFFLOAD_B, row + i, &tr.h2), rng);
    }
    for i in 0..n {
        if offload[i] {
            cache[i] = draw(p.unit(CACHE_W, CACHE_B, row + i, &tr.h2), rng);
        }
    }
    let bw_set: Vec<usize> = (0..n).filter(|&i| offload[i] && !cache[i]).collect();
    let mut cp_set: Vec<usize> = (0..n).filter(|&i| offload[i]).collect();
    if !cp_set.is_empty() {
        cp_set.push(s.max_devices);
    }
    let simplex = |logits: Vec<f64>, rng: &mut R| match mode {
        ActMode::Greedy => softmax(&logits),
        ActMode::Sample { simplex_noise } => {
            let noisy: Vec<f64> = logits
                .iter()
                .map(|v| {
                    let xi: f64 = StandardNormal.sample(rng);
                    v + simplex_noise * xi
                })
                .collect();
            softmax(&noisy)
        }
    };
    let bw_logits = bw_set.iter().map(|&i| p.unit(BANDWIDTH_W, BANDWIDTH_B, row + i, &tr.h2)).collect();
    let bw_alloc = if bw_set.is_empty() { vec![] } else { simplex(bw_logits, rng) };
    let cp_logits = cp_set.iter().map(|&i| p.unit(COMPUTE_W, COMPUTE_B, crow + i, &tr.h2)).collect();
    let cp_alloc = if cp_set.is_empty() { vec![] } else { simplex(cp_logits, rng) };
    let value = p.unit(VALUE_W, VALUE_B, 0, &tr.h2);
    Ok((
        ActionRecord {
            features: features.to_vec(),
            mask: mask.to_vec(),
            group: k,
            n,
            offload,
            cache,
            bw_set,
            bw_alloc,
            cp_set,
            cp_alloc,
        },
        value,
    ))
}

/// Log-probability, entropy and value of a recorded action under `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEval {
    pub log_prob: f64,
    pub entropy: f64,
    pub value: f64,
}

fn simplex_terms(z: &[f64], a: &[f64]) -> (f64, f64, Vec<f64>) {
    let pr = softmax(z);
    let lp = a.iter().zip(&pr).map(|(ai, pi)| ai * pi.ln()).sum();
    (lp, categorical_entropy(&pr), pr)
}

pub fn evaluate(p: &Params, rec: &ActionRecord) -> Result<PolicyEval> {
    let s = p.shape;
    let tr = trunk(p, &rec.features)?;
    let h = &tr.h2;
    let z: Vec<f64> = (0..s.groups).map(|j| p.unit(ROUTE_W, ROUTE_B, j, h)).collect();
    let probs = masked_softmax(&z, &rec.mask);
    let mut log_prob = probs[rec.group].ln();
    let mut entropy = categorical_entropy(&probs);
    let (row, crow) = head_rows(&s, rec.group);
    for i in 0..rec.n {
        let x = p.unit(OFFLOAD_W, OFFLOAD_B, row + i, h);
        log_prob += bernoulli_log_prob(x, rec.offload[i]);
        entropy += bernoulli_entropy(x);
        if rec.offload[i] {
            let x = p.unit(CACHE_W, CACHE_B, row + i, h);
            log_prob += bernoulli_log_prob(x, rec.cache[i]);
            entropy += bernoulli_entropy(x);
        }
    }
    if !rec.bw_set.is_empty() {
        let zb: Vec<f64> = rec.bw_set.iter().map(|&i| p.unit(BANDWIDTH_W, BANDWIDTH_B, row + i, h)).collect();
        let (lp, ent, _) = simplex_terms(&zb, &rec.bw_alloc);
        log_prob += lp;
        entropy += ent;
    }
    if !rec.cp_set.is_empty() {
        let zc: Vec<f64> = rec.cp_set.iter().map(|&i| p.unit(COMPUTE_W, COMPUTE_B, crow + i, h)).collect();
        let (lp, ent, _) = simplex_terms(&zc, &rec.cp_alloc);
        log_prob += lp;
        entropy += ent;
    }
    Ok(PolicyEval {
        log_prob,
        entropy,
        value: p.unit(VALUE_W, VALUE_B, 0, h),
    })
}

/// Loss weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub entropy: f64,
    pub value: f64,
}

/// One step of a rollout with its return target.
#[derive(Debug, Clone)]
pub struct TrainStep {
    pub record: ActionRecord,
    pub target: f64,
}

/// Per-step loss `-(A log π + Θ H) + c_v (R - V)^2` summed over steps, with the
/// advantages held fixed.
pub fn loss(p: &Params, steps: &[TrainStep], advantages: &[f64], w: LossWeights) -> Result<f64> {
    let mut total = 0.0;
    for (st, &adv) in steps.iter().zip(advantages) {
        let e = evaluate(p, &st.record)?;
        let td = st.target - e.value;
        total += -(adv * e.log_prob + w.entropy * e.entropy) + w.value * td * td;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

fn add_row(g: &mut [f64], cols: usize, row: usize, scale: f64, h: &[f64]) {
    for (gv, hv) in g[row * cols..(row + 1) * cols].iter_mut().zip(h) {
        *gv += scale * hv;
    }
}

fn add_back(dh: &mut [f64], w: &[f64], cols: usize, row: usize, scale: f64) {
    for (d, wv) in dh.iter_mut().zip(&w[row * cols..(row + 1) * cols]) {
        *d += scale * wv;
    }
}

/// Analytic gradient of [`loss`] with advantages `R - V` computed at `p` and
/// treated as constants. Returns the gradient and loss diagnostics.
pub fn gradients(p: &Params, steps: &[TrainStep], w: LossWeights) -> Result<(Params, LossStats)> {
    let s = p.shape;
    let hd = s.hidden;
    let mut g = Params::zeros(s);
    let mut stats = LossStats::default();
    for st in steps {
        let rec = &st.record;
        let tr = trunk(p, &rec.features)?;
        let h = &tr.h2;
        let mut dh2 = vec![0.0; hd];
        let value = p.unit(VALUE_W, VALUE_B, 0, h);
        let adv = st.target - value;
        let theta = w.entropy;

        let z: Vec<f64> = (0..s.groups).map(|j| p.unit(ROUTE_W, ROUTE_B, j, h)).collect();
        let probs = masked_softmax(&z, &rec.mask);
        let h_route = categorical_entropy(&probs);
        let mut log_prob = probs[rec.group].ln();
        let mut entropy = h_route;
        for j in (0..s.groups).filter(|&j| rec.mask[j]) {
            let pj = probs[j];
            let onehot = if j == rec.group { 1.0 } else { 0.0 };
            let plogp = if pj > 0.0 { pj * (pj.ln() + h_route) } else { 0.0 };
            let dz = -adv * (onehot - pj) + theta * plogp;
            add_row(&mut g.tensors[ROUTE_W], hd, j, dz, h);
            g.tensors[ROUTE_B][j] += dz;
            add_back(&mut dh2, &p.tensors[ROUTE_W], hd, j, dz);
        }

        let (row, crow) = head_rows(&s, rec.group);
        let bern = |wt: usize, bt: usize, r: usize, y: bool, dh2: &mut Vec<f64>, g: &mut Params| {
            let x = p.unit(wt, bt, r, h);
            let sg = sigmoid(x);
            let yv = if y { 1.0 } else { 0.0 };
            let dz = -adv * (yv - sg) + theta * sg * (1.0 - sg) * x;
            add_row(&mut g.tensors[wt], hd, r, dz, h);
            g.tensors[bt][r] += dz;
            add_back(dh2, &p.tensors[wt], hd, r, dz);
            (bernoulli_log_prob(x, y), bernoulli_entropy(x))
        };
        for i in 0..rec.n {
            let (lp, en) = bern(OFFLOAD_W, OFFLOAD_B, row + i, rec.offload[i], &mut dh2, &mut g);
            log_prob += lp;
            entropy += en;
            if rec.offload[i] {
                let (lp, en) = bern(CACHE_W, CACHE_B, row + i, rec.cache[i], &mut dh2, &mut g);
                log_prob += lp;
                entropy += en;
            }
        }

        let simplex = |wt: usize, bt: usize, rows: Vec<usize>, a: &[f64], dh2: &mut Vec<f64>, g: &mut Params| {
            if rows.is_empty() {
                return (0.0, 0.0);
            }
            let zs: Vec<f64> = rows.iter().map(|&r| p.unit(wt, bt, r, h)).collect();
            let (lp, ent, pr) = simplex_terms(&zs, a);
            for (idx, &r) in rows.iter().enumerate() {
                let pi = pr[idx];
                let plogp = if pi > 0.0 { pi * (pi.ln() + ent) } else { 0.0 };
                let dz = -adv * (a[idx] - pi) + theta * plogp;
                add_row(&mut g.tensors[wt], hd, r, dz, h);
                g.tensors[bt][r] += dz;
                add_back(dh2, &p.tensors[wt], hd, r, dz);
            }
            (lp, ent)
        };
        let bw_rows = rec.bw_set.iter().map(|&i| row + i).collect();
        let (lp, en) = simplex(BANDWIDTH_W, BANDWIDTH_B, bw_rows, &rec.bw_alloc, &mut dh2, &mut g);
        log_prob += lp;
        entropy += en;
        let cp_rows = rec.cp_set.iter().map(|&i| crow + i).collect();
        let (lp, en) = simplex(COMPUTE_W, COMPUTE_B, cp_rows, &rec.cp_alloc, &mut dh2, &mut g);
        log_prob += lp;
        entropy += en;

        let dv = 2.0 * w.value * (value - st.target);
        add_row(&mut g.tensors[VALUE_W], hd, 0, dv, h);
        g.tensors[VALUE_B][0] += dv;
        add_back(&mut dh2, &p.tensors[VALUE_W], hd, 0, dv);

        let dpre2: Vec<f64> = dh2.iter().zip(h).map(|(d, hv)| d * (1.0 - hv * hv)).collect();
        let mut dh1 = vec![0.0; hd];
        for r in 0..hd {
            add_row(&mut g.tensors[W2], hd, r, dpre2[r], &tr.h1);
            g.tensors[B2][r] += dpre2[r];
            add_back(&mut dh1, &p.tensors[W2], hd, r, dpre2[r]);
        }
        let input = s.input;
        for r in 0..hd {
            let dpre1 = dh1[r] * (1.0 - tr.h1[r] * tr.h1[r]);
            add_row(&mut g.tensors[W1], input, r, dpre1, &tr.x);
            g.tensors[B1][r] += dpre1;
        }

        stats.policy_loss += -adv * log_prob;
        stats.value_loss += adv * adv;
        stats.entropy += entropy;
    }
    let n = steps.len().max(1) as f64;
    stats.policy_loss /= n;
    stats.value_loss /= n;
    stats.entropy /= n;
    for (t, v) in g.tensors.iter().enumerate() {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(TENSOR_NAMES[t].into()));
        }
    }
    Ok((g, stats))
}
