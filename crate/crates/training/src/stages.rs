//! The two training stages.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use autoec_agents::{param_hash, Adam, Composer, ConfigPolicy, Decode, PolicyController};
use autoec_core::engine::{run_episode, Controller, DefaultController, EngineOptions, Episode, Observation};
use autoec_core::features::ela::{problem_feature_vector, PROBLEM_FEATURE_DIM};
use autoec_core::features::progress::PROGRESS_DIM;
use autoec_core::problem::ProblemInstance;
use autoec_core::rng::{self, tag, Rng};
use autoec_core::space::Workflow;
use autoec_core::{Error, Result};

use crate::config::{Stage1Controller, TrainConfig};
use crate::ppo::{ppo_update, RolloutBuffer, Transition};
use crate::reinforce::{reinforce_update, EpisodeRecord};

const STAGE_COMPOSER: u64 = 1;
const STAGE_CONTROLLER: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub stage: u8,
    pub epoch: usize,
    pub updates: usize,
    pub episodes: usize,
    pub skipped: usize,
    /// Mean over episodes of the summed per-generation rewards.
    pub mean_return: f64,
    pub mean_loss: f64,
    pub mean_grad_norm: f64,
    pub ppo_passes: usize,
    pub generations: usize,
    /// Hash of the frozen agent's parameters.
    pub frozen_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct StageReport {
    pub logs: Vec<EpochLog>,
    pub ppo_passes: usize,
    pub recorded_generations: usize,
    pub skipped: Vec<String>,
}

/// Problem features fed to the composer.
pub fn composer_features(inst: &ProblemInstance, cfg: &TrainConfig) -> Vec<f64> {
    if cfg.zero_features {
        vec![0.0; PROBLEM_FEATURE_DIM]
    } else {
        problem_feature_vector(inst, cfg.seed).values
    }
}

pub fn blind(obs: &Observation) -> Observation {
    Observation { t: obs.t, per_module: vec![[0.0; PROGRESS_DIM]; obs.per_module.len()], global: [0.0; PROGRESS_DIM] }
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::from_seed(seed));
    order
}

fn degenerate(f0: f64, f_star: f64) -> bool {
    f0 - f_star <= 1e-12
}

/// REINFORCE on the composer with the controller frozen.
pub fn train_composer(
    train: &[ProblemInstance],
    composer: &mut Composer,
    controller: &ConfigPolicy,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochLog, &Composer),
) -> Result<StageReport> {
    cfg.validate().map_err(Error::Config)?;
    let opts = EngineOptions { np_init: cfg.np_init };
    let mut opt = Adam::new(composer.params.len(), cfg.lr);
    let frozen = param_hash(&controller.params);
    let mut report = StageReport::default();
    for epoch in 0..cfg.epochs {
        let order = shuffled(train.len(), rng::derive_path(cfg.seed, &[STAGE_COMPOSER, epoch as u64]));
        let mut log = EpochLog {
            stage: 1,
            epoch,
            updates: 0,
            episodes: 0,
            skipped: 0,
            mean_return: 0.0,
            mean_loss: 0.0,
            mean_grad_norm: 0.0,
            ppo_passes: 0,
            generations: 0,
            frozen_hash: frozen.clone(),
        };
        let mut return_sum = 0.0;
        for batch in order.chunks(cfg.agent1_batch) {
            let frozen_composer = &*composer;
            let results: Vec<Result<(usize, Option<EpisodeRecord>)>> = batch
                .par_iter()
                .map(|&idx| {
                    let inst = &train[idx];
                    let seed = rng::derive_path(cfg.seed, &[STAGE_COMPOSER, epoch as u64, idx as u64]);
                    let features = composer_features(inst, cfg);
                    let sample = frozen_composer.generate(&features, &mut rng::stream(seed, tag::WORKFLOW), Decode::Sample);
                    let mut policy_ctrl = PolicyController { policy: controller, decode: Decode::Sample, blind: cfg.zero_features };
                    let mut defaults = DefaultController;
                    let ctrl: &mut dyn Controller = match cfg.stage1_controller {
                        Stage1Controller::Frozen => &mut policy_ctrl,
                        Stage1Controller::Defaults => &mut defaults,
                    };
                    let tr = run_episode(&sample.workflow, inst, ctrl, seed, &opts)?;
                    if degenerate(tr.f0, tr.f_star) {
                        return Ok((idx, None));
                    }
                    Ok((
                        idx,
                        Some(EpisodeRecord {
                            instance: idx,
                            ret: tr.rewards().iter().sum(),
                            workflow: sample.workflow,
                            features,
                            log_prob: sample.total_log_prob,
                        }),
                    ))
                })
                .collect();
            let mut episodes = Vec::new();
            for r in results {
                match r? {
                    (_, Some(e)) => episodes.push(e),
                    (idx, None) => {
                        log.skipped += 1;
                        report.skipped.push(format!("stage 1 epoch {epoch}: instance {idx} has a degenerate gap"));
                    }
                }
            }
            return_sum += episodes.iter().map(|e| e.ret).sum::<f64>();
            log.episodes += episodes.len();
            if let Some(s) = reinforce_update(composer, &mut opt, &episodes, cfg.grad_clip) {
                log.updates += 1;
                log.mean_loss += s.loss;
                log.mean_grad_norm += s.grad_norm;
            }
        }
        finish(&mut log, return_sum);
        on_epoch(&log, composer);
        report.logs.push(log);
    }
    Ok(report)
}

fn finish(log: &mut EpochLog, return_sum: f64) {
    if log.episodes > 0 {
        log.mean_return = return_sum / log.episodes as f64;
    }
    if log.updates > 0 {
        log.mean_loss /= log.updates as f64;
        log.mean_grad_norm /= log.updates as f64;
    }
}

struct Env<'a> {
    episode: Episode<'a>,
    workflow: Arc<Workflow>,
    rng: Rng,
    ret: f64,
}

/// PPO on the controller with the composer frozen. `fixed_workflow`
/// replaces composed workflows when given.
pub fn train_controller(
    train: &[ProblemInstance],
    composer: &Composer,
    policy: &mut ConfigPolicy,
    cfg: &TrainConfig,
    fixed_workflow: Option<&Workflow>,
    on_epoch: &mut dyn FnMut(&EpochLog, &ConfigPolicy),
) -> Result<StageReport> {
    cfg.validate().map_err(Error::Config)?;
    let opts = EngineOptions { np_init: cfg.np_init };
    let mut opt = Adam::new(policy.params.len(), cfg.lr);
    let frozen = param_hash(&composer.params);
    let mut report = StageReport::default();
    for epoch in 0..cfg.epochs {
        let order = shuffled(train.len(), rng::derive_path(cfg.seed, &[STAGE_CONTROLLER, epoch as u64]));
        let mut log = EpochLog {
            stage: 2,
            epoch,
            updates: 0,
            episodes: 0,
            skipped: 0,
            mean_return: 0.0,
            mean_loss: 0.0,
            mean_grad_norm: 0.0,
            ppo_passes: 0,
            generations: 0,
            frozen_hash: frozen.clone(),
        };
        let mut return_sum = 0.0;
        for batch in order.chunks(cfg.agent2_batch) {
            let mut envs = Vec::new();
            for &idx in batch {
                let inst = &train[idx];
                let seed = rng::derive_path(cfg.seed, &[STAGE_CONTROLLER, epoch as u64, idx as u64]);
                let workflow = match fixed_workflow {
                    Some(w) => w.clone(),
                    None => {
                        let f = composer_features(inst, cfg);
                        composer.generate(&f, &mut rng::stream(seed, tag::WORKFLOW), Decode::Sample).workflow
                    }
                };
                let episode = Episode::new(&workflow, inst, seed, &opts)?;
                let st = episode.state();
                if degenerate(st.f0, st.f_star) {
                    log.skipped += 1;
                    report.skipped.push(format!("stage 2 epoch {epoch}: instance {idx} has a degenerate gap"));
                    continue;
                }
                envs.push(Env { episode, workflow: Arc::new(workflow), rng: rng::stream(seed, tag::CONTROLLER), ret: 0.0 });
            }
            let mut buffer = RolloutBuffer::default();
            let mut ticks = 0usize;
            loop {
                let frozen_policy = &*policy;
                let stepped: Vec<Result<Option<Transition>>> = envs
                    .par_iter_mut()
                    .enumerate()
                    .map(|(k, env)| {
                        if env.episode.is_done() {
                            return Ok(None);
                        }
                        let mut obs = env.episode.observation();
                        if cfg.zero_features {
                            obs = blind(&obs);
                        }
                        let a = frozen_policy.act(&env.workflow, &obs, &mut env.rng, Decode::Sample)?;
                        let out = env.episode.step(&a.configs)?;
                        env.ret += out.reward;
                        Ok(Some(Transition {
                            env: k,
                            workflow: env.workflow.clone(),
                            obs,
                            raw: a.raw,
                            log_prob: a.log_prob,
                            value: a.value,
                            reward: out.reward,
                            done: out.done,
                        }))
                    })
                    .collect();
                let mut any = false;
                for s in stepped {
                    if let Some(t) = s? {
                        buffer.push(t);
                        any = true;
                    }
                }
                if !any {
                    break;
                }
                ticks += 1;
                if ticks % cfg.nstep == 0 {
                    for (k, env) in envs.iter().enumerate() {
                        if !env.episode.is_done() {
                            let mut obs = env.episode.observation();
                            if cfg.zero_features {
                                obs = blind(&obs);
                            }
                            buffer.bootstrap.insert(k, policy.value(&env.workflow, &obs)?);
                        }
                    }
                    if let Some(s) = ppo_update(policy, &mut opt, &mut buffer, cfg) {
                        log.updates += 1;
                        log.ppo_passes += s.passes;
                        log.mean_loss += s.loss.total;
                        log.mean_grad_norm += s.grad_norm;
                    }
                }
            }
            // transitions past the last full window are not used
            buffer.clear();
            log.generations += ticks;
            log.episodes += envs.len();
            return_sum += envs.iter().map(|e| e.ret).sum::<f64>();
        }
        finish(&mut log, return_sum);
        report.ppo_passes += log.ppo_passes;
        report.recorded_generations += log.generations;
        on_epoch(&log, policy);
        report.logs.push(log);
    }
    Ok(report)
}
