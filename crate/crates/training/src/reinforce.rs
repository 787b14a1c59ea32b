//! Episodic policy gradient for the composer.

use serde::{Deserialize, Serialize};

use autoec_agents::tape::Graph;
use autoec_agents::{clip_global_norm, Adam, Composer};
use autoec_core::space::Workflow;

use crate::accum::sum_gradients;

/// One composed workflow and the return it earned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub instance: usize,
    pub workflow: Workflow,
    pub features: Vec<f64>,
    pub log_prob: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReinforceStats {
    pub loss: f64,
    pub grad_norm: f64,
    pub mean_return: f64,
    pub episodes: usize,
}

/// `-mean((R - b) · log π(workflow))` with the batch-mean baseline `b`, and
/// its gradient.
pub fn reinforce_loss(composer: &Composer, episodes: &[EpisodeRecord]) -> (f64, Vec<f64>) {
    let n = episodes.len();
    let baseline = episodes.iter().map(|e| e.ret).sum::<f64>() / n as f64;
    let (loss, grad) = sum_gradients(n, composer.params.len(), |i, grad| {
        let e = &episodes[i];
        let adv = e.ret - baseline;
        let mut g = Graph::new(&composer.params);
        let lp = composer
            .log_prob_graph(&mut g, &e.workflow, &e.features)
            .expect("recorded workflows are legal");
        let w = -adv / n as f64;
        g.backward_into(lp, w, grad);
        [w * g.value(lp).scalar(), 0.0]
    });
    (loss[0], grad)
}

/// One ascent step on the batch; `None` for an empty batch.
pub fn reinforce_update(
    composer: &mut Composer,
    opt: &mut Adam,
    episodes: &[EpisodeRecord],
    grad_clip: f64,
) -> Option<ReinforceStats> {
    if episodes.is_empty() {
        return None;
    }
    let (loss, mut grad) = reinforce_loss(composer, episodes);
    let grad_norm = clip_global_norm(&mut grad, grad_clip);
    opt.step(&mut composer.params, &grad);
    Some(ReinforceStats {
        loss,
        grad_norm,
        mean_return: episodes.iter().map(|e| e.ret).sum::<f64>() / episodes.len() as f64,
        episodes: episodes.len(),
    })
}
