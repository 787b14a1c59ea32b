//! Clipped-surrogate actor-critic updates for the configuration policy.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use autoec_agents::tape::{Graph, Tensor};
use autoec_agents::{clip_global_norm, Adam, ConfigPolicy};
use autoec_core::engine::Observation;
use autoec_core::space::Workflow;

use crate::accum::sum_gradients;
use crate::config::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Index of the episode within its rollout group.
    pub env: usize,
    pub workflow: Arc<Workflow>,
    pub obs: Observation,
    pub raw: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
}

/// Transitions of a rollout window, in time order within each episode.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    /// Value estimate of the state after each episode's last transition.
    pub bootstrap: BTreeMap<usize, f64>,
}

impl RolloutBuffer {
    pub fn push(&mut self, t: Transition) {
        self.transitions.push(t);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn clear(&mut self) {
        self.transitions.clear();
        self.bootstrap.clear();
    }
}

/// Generalized advantage estimates and value targets for one episode
/// segment; `last_value` is the value of the state after the segment.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], last_value: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = last_value;
    let mut running = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
        next_value = values[t];
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Per-transition advantages and value targets, grouped by episode.
pub fn advantages(buffer: &RolloutBuffer, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = buffer.len();
    let mut by_env: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, t) in buffer.transitions.iter().enumerate() {
        by_env.entry(t.env).or_default().push(i);
    }
    let mut adv = vec![0.0; n];
    let mut ret = vec![0.0; n];
    for (env, idx) in by_env {
        let pick = |f: &dyn Fn(&Transition) -> f64| idx.iter().map(|&i| f(&buffer.transitions[i])).collect::<Vec<_>>();
        let r = pick(&|t| t.reward);
        let v = pick(&|t| t.value);
        let d: Vec<bool> = idx.iter().map(|&i| buffer.transitions[i].done).collect();
        let last = buffer.bootstrap.get(&env).copied().unwrap_or(0.0);
        let (a, g) = gae(&r, &v, &d, last, gamma, lambda);
        for (k, &i) in idx.iter().enumerate() {
            adv[i] = a[k];
            ret[i] = g[k];
        }
    }
    (adv, ret)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoLoss {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
}

/// Mean over transitions of `-min(ρA, clip(ρ)A) + c·(V - target)²`, and
/// its gradient.
pub fn ppo_loss(
    policy: &ConfigPolicy,
    transitions: &[Transition],
    adv: &[f64],
    targets: &[f64],
    clip_eps: f64,
    value_coef: f64,
) -> (PpoLoss, Vec<f64>) {
    let n = transitions.len();
    let inv = 1.0 / n as f64;
    let (sums, grad) = sum_gradients(n, policy.params.len(), |i, grad| {
        let t = &transitions[i];
        let mut g = Graph::new(&policy.params);
        let heads = policy.forward(&mut g, &t.workflow, &t.obs).expect("recorded transitions are well formed");
        let mut pol = 0.0;
        let mut parts = Vec::new();
        if let Some(lp) = policy.log_prob_graph(&mut g, &heads, &t.raw).expect("recorded action shape") {
            let old = g.input(Tensor::new(1, 1, vec![t.log_prob]));
            let d = g.sub(lp, old);
            let ratio = g.exp(d);
            let s1 = g.scale(ratio, adv[i]);
            let c = g.clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
            let s2 = g.scale(c, adv[i]);
            let m = g.min(s1, s2);
            let m = g.scale(m, -1.0);
            pol = g.value(m).scalar();
            parts.push(m);
        }
        let target = g.input(Tensor::new(1, 1, vec![targets[i]]));
        let e = g.sub(heads.value, target);
        let sq = g.square(e);
        let vl = g.scale(sq, value_coef);
        let val = g.value(vl).scalar();
        parts.push(vl);
        let mut total = parts[0];
        for p in &parts[1..] {
            total = g.add(total, *p);
        }
        g.backward_into(total, inv, grad);
        [pol * inv, val * inv]
    });
    (PpoLoss { total: sums[0] + sums[1], policy: sums[0], value: sums[1] }, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    pub passes: usize,
    pub transitions: usize,
    /// Loss of the first pass, before any step.
    pub loss: PpoLoss,
    pub grad_norm: f64,
    pub mean_advantage: f64,
}

/// Standardizes advantages over the buffer when they are not constant.
fn standardize(adv: &mut [f64]) {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let sd = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 1e-12 {
        adv.iter_mut().for_each(|a| *a = (*a - mean) / sd);
    }
}

/// `kepoch` optimizer passes over the buffer, which is then cleared.
/// `None` for an empty buffer.
pub fn ppo_update(policy: &mut ConfigPolicy, opt: &mut Adam, buffer: &mut RolloutBuffer, cfg: &TrainConfig) -> Option<PpoStats> {
    if buffer.is_empty() {
        return None;
    }
    let (mut adv, targets) = advantages(buffer, cfg.gamma, cfg.gae_lambda);
    let mean_advantage = adv.iter().sum::<f64>() / adv.len() as f64;
    standardize(&mut adv);
    let mut first = None;
    let mut norm = 0.0;
    for _ in 0..cfg.kepoch {
        let (loss, mut grad) = ppo_loss(policy, &buffer.transitions, &adv, &targets, cfg.clip_eps, cfg.value_coef);
        norm = clip_global_norm(&mut grad, cfg.grad_clip);
        first.get_or_insert(loss);
        opt.step(&mut policy.params, &grad);
    }
    let stats = PpoStats {
        passes: cfg.kepoch,
        transitions: buffer.len(),
        loss: first.expect("at least one pass"),
        grad_norm: norm,
        mean_advantage,
    };
    buffer.clear();
    Some(stats)
}
