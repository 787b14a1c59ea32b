//! The configuration policy: per-generation Gaussian hyperparameter actions
//! for every controllable module, plus a state-value head.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use autoec_core::engine::{ActionRecord, ConfigAssignment, Controller, Decision, Observation};
use autoec_core::features::progress::PROGRESS_DIM;
use autoec_core::rng::Rng;
use autoec_core::space::{registry, Workflow, END_TOKEN};
use autoec_core::{Error, Result};

use crate::composer::Decode;
use crate::nn::{positional_encoding, Init, Layout, ModelConfig, Segment, Stack, ID_BITS};
use crate::tape::{sigmoid, Graph, Tensor, Var};

pub const SIGMA_FLOOR: f64 = 1e-3;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigAction {
    /// Raw Gaussian draws, concatenated over controllable modules.
    pub raw: Vec<f64>,
    pub configs: ConfigAssignment,
    pub log_prob: f64,
    pub entropy: f64,
    pub value: f64,
}

/// Graph nodes of one forward pass.
pub struct Heads {
    pub hidden: Var,
    pub mean: Var,
    pub sigma: Var,
    pub value: Var,
    /// `(row, config length)` for each controllable module.
    pub slots: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct ConfigPolicy {
    pub config: ModelConfig,
    pub params: Vec<f64>,
    embed: Segment,
    stack: Stack,
    mean: Segment,
    sigma: Segment,
    critic: Segment,
}

impl ConfigPolicy {
    fn layout(config: &ModelConfig) -> (Layout, Segment, Stack, Segment, Segment, Segment) {
        let h = config.hidden;
        let mut l = Layout::default();
        let embed = l.add("controller.embed", ID_BITS + PROGRESS_DIM, h, Init::Normal);
        let stack = Stack::new(&mut l, "controller", config.controller_layers, h, config.heads);
        let mean = l.add("controller.mean", h, config.max_config, Init::Normal);
        let sigma = l.add("controller.sigma", h, config.max_config, Init::Normal);
        let critic = l.add("critic.value", h, 1, Init::Normal);
        (l, embed, stack, mean, sigma, critic)
    }

    pub fn param_count(config: &ModelConfig) -> usize {
        Self::layout(config).0.len
    }

    /// Length of the value head.
    pub fn critic_param_count(config: &ModelConfig) -> usize {
        config.hidden
    }

    pub fn new(config: ModelConfig, rng: &mut Rng) -> Self {
        let (l, embed, stack, mean, sigma, critic) = Self::layout(&config);
        let params = l.initialize(rng);
        ConfigPolicy { config, params, embed, stack, mean, sigma, critic }
    }

    pub fn from_params(config: ModelConfig, params: Vec<f64>) -> Result<Self> {
        let (l, embed, stack, mean, sigma, critic) = Self::layout(&config);
        if params.len() != l.len {
            return Err(Error::Dimension { expected: l.len, got: params.len() });
        }
        Ok(ConfigPolicy { config, params, embed, stack, mean, sigma, critic })
    }

    pub fn layout_entries(&self) -> Layout {
        Self::layout(&self.config).0
    }

    /// One embedded row per module: id bits and the progress features of
    /// the subpopulation it acts on (the whole population for modules
    /// without hyperparameters).
    fn inputs(workflow: &Workflow, obs: &Observation) -> Result<(Tensor, Vec<(usize, usize)>)> {
        let tokens: Vec<usize> = workflow.tokens().iter().copied().filter(|&t| t != END_TOKEN).collect();
        let positions = workflow.controllable_positions();
        if positions.len() != obs.per_module.len() {
            return Err(Error::Contract(format!(
                "{} controllable modules but {} observation rows",
                positions.len(),
                obs.per_module.len()
            )));
        }
        let width = ID_BITS + PROGRESS_DIM;
        let mut data = Vec::with_capacity(tokens.len() * width);
        let mut slots = Vec::new();
        for (i, &t) in tokens.iter().enumerate() {
            let var = registry().get(t);
            data.extend(var.id.sign_vector());
            match positions.iter().position(|&p| p == i) {
                Some(k) => {
                    data.extend(obs.per_module[k]);
                    slots.push((i, var.config.len()));
                }
                None => data.extend(obs.global),
            }
        }
        Ok((Tensor::new(tokens.len(), width, data), slots))
    }

    pub fn forward(&self, g: &mut Graph, workflow: &Workflow, obs: &Observation) -> Result<Heads> {
        let (x, slots) = Self::inputs(workflow, obs)?;
        let n = x.rows;
        let x = g.input(x);
        let we = self.embed.load(g);
        let e = g.matmul(x, we);
        let pe = g.input(positional_encoding(n, self.config.hidden));
        let e = g.add(e, pe);
        let hidden = self.stack.forward(g, e, true);
        let wm = self.mean.load(g);
        let mean = g.matmul(hidden, wm);
        let ws = self.sigma.load(g);
        let s = g.matmul(hidden, ws);
        let s = g.softplus(s);
        let floor = g.input(Tensor::new(n, self.config.max_config, vec![SIGMA_FLOOR; n * self.config.max_config]));
        let sigma = g.add(s, floor);
        let pooled = g.mean_rows(hidden);
        let wc = self.critic.load(g);
        let value = g.matmul(pooled, wc);
        Ok(Heads { hidden, mean, sigma, value, slots })
    }

    /// Scalar node: Gaussian log-density of `raw` under the heads, summed
    /// over the used entries of every controllable module.
    pub fn log_prob_graph(&self, g: &mut Graph, heads: &Heads, raw: &[f64]) -> Result<Option<Var>> {
        let need: usize = heads.slots.iter().map(|s| s.1).sum();
        if raw.len() != need {
            return Err(Error::Dimension { expected: need, got: raw.len() });
        }
        let mut terms = Vec::new();
        let mut off = 0;
        for &(row, len) in &heads.slots {
            if len == 0 {
                continue;
            }
            let mu = g.rows(heads.mean, row, 1);
            let mu = g.cols(mu, 0, len);
            let sd = g.rows(heads.sigma, row, 1);
            let sd = g.cols(sd, 0, len);
            let x = g.input(Tensor::new(1, len, raw[off..off + len].to_vec()));
            off += len;
            let d = g.sub(x, mu);
            let z = g.div(d, sd);
            let z2 = g.square(z);
            let z2 = g.scale(z2, -0.5);
            let ls = g.ln(sd);
            let t = g.sub(z2, ls);
            terms.push(g.sum(t));
        }
        if terms.is_empty() {
            return Ok(None);
        }
        let all = g.concat_cols(&terms);
        let s = g.sum(all);
        let n = g.input(Tensor::new(1, 1, vec![-HALF_LN_2PI * need as f64]));
        Ok(Some(g.add(s, n)))
    }

    /// Samples (or takes the means of) every controllable module's action
    /// and maps it into its parameter bounds.
    pub fn act(&self, workflow: &Workflow, obs: &Observation, rng: &mut Rng, decode: Decode) -> Result<ConfigAction> {
        let mut g = Graph::new(&self.params);
        let heads = self.forward(&mut g, workflow, obs)?;
        let (mean, sigma) = (g.value(heads.mean), g.value(heads.sigma));
        let value = g.value(heads.value).scalar();
        let mut raw = Vec::new();
        let mut configs = Vec::new();
        let mut log_prob = 0.0;
        let mut entropy = 0.0;
        let positions = workflow.controllable_positions();
        for (&(row, len), &pos) in heads.slots.iter().zip(&positions) {
            let var = registry().get(workflow.tokens()[pos]);
            let mut v = Vec::with_capacity(len);
            for (j, p) in var.config.params.iter().enumerate() {
                let (mu, sd) = (mean.at(row, j), sigma.at(row, j));
                let x = match decode {
                    Decode::Sample => mu + sd * rng.sample::<f64, _>(StandardNormal),
                    Decode::Greedy => mu,
                };
                let z = (x - mu) / sd;
                log_prob += -0.5 * z * z - sd.ln() - HALF_LN_2PI;
                entropy += 0.5 + HALF_LN_2PI + sd.ln();
                raw.push(x);
                v.push(p.lower + (p.upper - p.lower) * sigmoid(x));
            }
            configs.push(v);
        }
        Ok(ConfigAction { raw, configs: ConfigAssignment(configs), log_prob, entropy, value })
    }

    pub fn value(&self, workflow: &Workflow, obs: &Observation) -> Result<f64> {
        let mut g = Graph::new(&self.params);
        let heads = self.forward(&mut g, workflow, obs)?;
        Ok(g.value(heads.value).scalar())
    }
}

/// Engine controller driven by a configuration policy.
pub struct PolicyController<'a> {
    pub policy: &'a ConfigPolicy,
    pub decode: Decode,
    /// Replaces every observation by zeros.
    pub blind: bool,
}

impl Controller for PolicyController<'_> {
    fn decide(&mut self, workflow: &Workflow, obs: &Observation, rng: &mut Rng) -> Result<Decision> {
        let zeroed;
        let obs = if self.blind {
            zeroed = Observation {
                t: obs.t,
                per_module: vec![[0.0; PROGRESS_DIM]; obs.per_module.len()],
                global: [0.0; PROGRESS_DIM],
            };
            &zeroed
        } else {
            obs
        };
        let a = self.policy.act(workflow, obs, rng, self.decode)?;
        Ok(Decision {
            configs: a.configs,
            record: Some(ActionRecord { raw: a.raw, log_prob: a.log_prob, value: a.value }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use autoec_core::engine::{canonical_de, named_workflow};
    use autoec_core::rng;

    fn obs(n: usize, seed: u64) -> Observation {
        let mut r = rng::from_seed(seed);
        let mut row = || {
            let mut o = [0.0; PROGRESS_DIM];
            o.iter_mut().for_each(|v| *v = r.random_range(-1.0..1.0));
            o
        };
        Observation { t: 0, per_module: (0..n).map(|_| row()).collect(), global: row() }
    }

    #[test]
    fn parameter_counts() {
        let c = ModelConfig::default();
        assert_eq!(ConfigPolicy::param_count(&c), 153216 + 64);
        assert_eq!(ConfigPolicy::critic_param_count(&c), 64);
    }

    #[test]
    fn mapped_values_respect_bounds_and_log_prob_matches_graph() {
        let p = ConfigPolicy::new(ModelConfig::default(), &mut rng::from_seed(1));
        let mut r = rng::from_seed(2);
        for _ in 0..20 {
            let wf = Workflow::random(&mut r);
            let o = obs(wf.controllable_positions().len(), 3);
            let a = p.act(&wf, &o, &mut r, Decode::Sample).unwrap();
            a.configs.validate(&wf).unwrap();
            let mut g = Graph::new(&p.params);
            let h = p.forward(&mut g, &wf, &o).unwrap();
            match p.log_prob_graph(&mut g, &h, &a.raw).unwrap() {
                Some(v) => assert!((g.value(v).scalar() - a.log_prob).abs() < 1e-9),
                None => assert_eq!(a.log_prob, 0.0),
            }
            assert!(a.value.is_finite());
        }
    }

    #[test]
    fn floor_width_samples_concentrate() {
        let mut p = ConfigPolicy::new(ModelConfig::tiny(), &mut rng::from_seed(4));
        // unit gains and biases make every final hidden row sum to the
        // width, so large negative sigma weights drive softplus to zero
        let lay = p.layout_entries();
        let (_, bias, _) = lay.entries.iter().find(|(n, _, _)| n == "controller.ln_f.b").unwrap();
        p.params[bias.offset..bias.offset + bias.len()].fill(1.0);
        let sigma = p.sigma;
        p.params[sigma.offset..sigma.offset + sigma.len()].fill(-1e4);
        let wf = canonical_de();
        let o = obs(2, 1);
        let mut g = Graph::new(&p.params);
        let h = p.forward(&mut g, &wf, &o).unwrap();
        assert!(g.value(h.sigma).data.iter().all(|s| (s - SIGMA_FLOOR).abs() < 1e-12));
        let mut r = rng::from_seed(5);
        let a = p.act(&wf, &o, &mut r, Decode::Greedy).unwrap();
        for _ in 0..50 {
            let b = p.act(&wf, &o, &mut r, Decode::Sample).unwrap();
            for (x, y) in a.raw.iter().zip(&b.raw) {
                assert!((x - y).abs() < 6.0 * SIGMA_FLOOR, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn swapping_modules_changes_hidden_states() {
        let p = ConfigPolicy::new(ModelConfig::default(), &mut rng::from_seed(1));
        let a = named_workflow(&["Uniform", "DE/rand/1", "Binomial", "Clip", "DE-like", "end"]);
        let b = named_workflow(&["Uniform", "DE/best/1", "Binomial", "Clip", "DE-like", "end"]);
        let o = obs(2, 0);
        let run = |w: &Workflow| {
            let mut g = Graph::new(&p.params);
            let h = p.forward(&mut g, w, &o).unwrap();
            g.value(h.hidden).clone()
        };
        assert_ne!(run(&a), run(&b));
        let o2 = obs(2, 1);
        assert_ne!(p.value(&a, &o).unwrap(), p.value(&a, &o2).unwrap());
    }

    #[test]
    fn gradients_match_central_differences() {
        let base = ConfigPolicy::new(ModelConfig::tiny(), &mut rng::from_seed(8));
        let params: Vec<f64> = base.params.iter().map(|v| v * 10.0).collect();
        let wf = canonical_de();
        let o = obs(2, 2);
        let a = ConfigPolicy::from_params(ModelConfig::tiny(), params.clone())
            .unwrap()
            .act(&wf, &o, &mut rng::from_seed(1), Decode::Sample)
            .unwrap();
        let eval = |q: &[f64]| {
            let m = ConfigPolicy::from_params(ModelConfig::tiny(), q.to_vec()).unwrap();
            let mut g = Graph::new(&m.params);
            let h = m.forward(&mut g, &wf, &o).unwrap();
            let lp = m.log_prob_graph(&mut g, &h, &a.raw).unwrap().unwrap();
            let v = g.scale(h.value, 0.3);
            let out = g.add(lp, v);
            (g.value(out).scalar(), g.backward(out))
        };
        let (_, analytic) = eval(&params);
        let numeric = crate::tape::numeric_gradient(&params, 1e-5, |q| eval(q).0);
        let err = crate::tape::relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "{err:e}");
    }
}
