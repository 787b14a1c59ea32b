//! The workflow composer: an autoregressive policy over module tokens,
//! conditioned on problem features.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use autoec_core::features::ela::PROBLEM_FEATURE_DIM;
use autoec_core::rng::Rng;
use autoec_core::space::{
    registry, shared_grammar, GenerationContext, Workflow, MAX_NICHES, MIN_NICHES,
};
use autoec_core::{Error, Result};

use crate::nn::{positional_encoding, Init, Layout, ModelConfig, Segment, Stack, ID_BITS};
use crate::tape::{Graph, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Decode {
    #[default]
    Sample,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowSample {
    pub workflow: Workflow,
    pub token_log_probs: Vec<f64>,
    pub total_log_prob: f64,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Composer {
    pub config: ModelConfig,
    pub params: Vec<f64>,
    feature: Segment,
    token: Segment,
    sample: Segment,
    stack: Stack,
}

impl Composer {
    fn layout(config: &ModelConfig) -> (Layout, Segment, Segment, Segment, Stack) {
        let h = config.hidden;
        let mut l = Layout::default();
        let feature = l.add("composer.feature", PROBLEM_FEATURE_DIM, h, Init::Normal);
        let token = l.add("composer.token", ID_BITS, h, Init::Normal);
        let stack = Stack::new(&mut l, "composer", config.composer_layers, h, config.heads);
        let sample = l.add("composer.sample", h, config.vocab, Init::Normal);
        (l, feature, token, sample, stack)
    }

    pub fn param_count(config: &ModelConfig) -> usize {
        Self::layout(config).0.len
    }

    pub fn new(config: ModelConfig, rng: &mut Rng) -> Self {
        let (l, feature, token, sample, stack) = Self::layout(&config);
        let params = l.initialize(rng);
        Composer { config, params, feature, token, sample, stack }
    }

    pub fn from_params(config: ModelConfig, params: Vec<f64>) -> Result<Self> {
        let (l, feature, token, sample, stack) = Self::layout(&config);
        if params.len() != l.len {
            return Err(Error::Dimension { expected: l.len, got: params.len() });
        }
        Ok(Composer { config, params, feature, token, sample, stack })
    }

    pub fn layout_entries(&self) -> Layout {
        Self::layout(&self.config).0
    }

    /// Logits for the next token after each prefix of `tokens`: row `i`
    /// scores position `i` given the start state and `tokens[..i]`.
    pub fn logits(&self, g: &mut Graph, features: &[f64], tokens: &[usize]) -> Var {
        let h = self.config.hidden;
        let n = tokens.len() + 1;
        let f = g.input(Tensor::new(1, features.len(), features.to_vec()));
        let wf = self.feature.load(g);
        let start = g.matmul(f, wf);
        let mut rows = start;
        if !tokens.is_empty() {
            let bits: Vec<f64> = tokens.iter().flat_map(|&t| registry().get(t).id.sign_vector()).collect();
            let b = g.input(Tensor::new(tokens.len(), ID_BITS, bits));
            let wt = self.token.load(g);
            let emb = g.matmul(b, wt);
            let st = g.transpose(start);
            let et = g.transpose(emb);
            let both = g.concat_cols(&[st, et]);
            rows = g.transpose(both);
        }
        let pe = g.input(positional_encoding(n, h));
        let x = g.add(rows, pe);
        let hid = self.stack.forward(g, x, true);
        let ws = self.sample.load(g);
        g.matmul(hid, ws)
    }

    fn masks(workflow: &Workflow) -> Result<Vec<Vec<bool>>> {
        let grammar = shared_grammar();
        let n_nich = (workflow.n_nich() > 0).then_some(workflow.n_nich());
        let mut ctx = GenerationContext::default();
        let mut masks = Vec::with_capacity(workflow.len());
        for &t in workflow.tokens() {
            masks.push(grammar.mask(&ctx)?);
            ctx = grammar.advance(&ctx, t, n_nich)?;
        }
        Ok(masks)
    }

    /// Scalar graph node holding log π(workflow | features), or `None` when
    /// some token is masked out.
    pub fn log_prob_graph(&self, g: &mut Graph, workflow: &Workflow, features: &[f64]) -> Option<Var> {
        let tokens = workflow.tokens();
        let masks = Self::masks(workflow).ok()?;
        let logits = self.logits(g, features, &tokens[..tokens.len() - 1]);
        let mut terms = Vec::with_capacity(tokens.len());
        for (i, (&t, mask)) in tokens.iter().zip(&masks).enumerate() {
            if !mask[t] {
                return None;
            }
            let row = g.rows(logits, i, 1);
            let lp = g.masked_log_softmax(row, mask);
            terms.push(g.cols(lp, t, 1));
        }
        let all = g.concat_cols(&terms);
        Some(g.sum(all))
    }

    /// Teacher-forced log-probability; `-inf` for a workflow the grammar
    /// would never emit.
    pub fn score(&self, workflow: &Workflow, features: &[f64]) -> f64 {
        let mut g = Graph::new(&self.params);
        match self.log_prob_graph(&mut g, workflow, features) {
            Some(v) => g.value(v).scalar(),
            None => f64::NEG_INFINITY,
        }
    }

    /// Emits a legal workflow token by token. The niche count is drawn
    /// uniformly from [2, 4] before the first token.
    pub fn generate(&self, features: &[f64], rng: &mut Rng, decode: Decode) -> WorkflowSample {
        let grammar = shared_grammar();
        let n_nich = rng.random_range(MIN_NICHES..=MAX_NICHES);
        let mut ctx = GenerationContext::default();
        let mut tokens: Vec<usize> = Vec::new();
        let mut lps = Vec::new();
        while !ctx.finished {
            let mask = grammar.mask(&ctx).expect("grammar admits a completion");
            let mut g = Graph::new(&self.params);
            let logits = self.logits(&mut g, features, &tokens);
            let last = g.rows(logits, tokens.len(), 1);
            let lp = g.masked_log_softmax(last, &mask);
            let row = &g.value(lp).data;
            let t = match decode {
                Decode::Greedy => argmax(row),
                Decode::Sample => categorical(row, rng),
            };
            debug_assert!(mask[t]);
            lps.push(row[t]);
            ctx = grammar.advance(&ctx, t, Some(n_nich)).expect("masked token is legal");
            tokens.push(t);
        }
        let workflow = Workflow::from_tokens(tokens, Some(n_nich)).expect("generated workflow is legal");
        WorkflowSample { total_log_prob: lps.iter().sum(), token_log_probs: lps, workflow, features: features.to_vec() }
    }
}

fn argmax(log_probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in log_probs.iter().enumerate() {
        if *v > log_probs[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw over `exp(log_probs)`; masked entries are never picked.
fn categorical(log_probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, lp) in log_probs.iter().enumerate() {
        if *lp == f64::NEG_INFINITY {
            continue;
        }
        acc += lp.exp();
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use autoec_core::rng;
    use autoec_core::space::END_TOKEN;

    fn features(seed: u64) -> Vec<f64> {
        let mut r = rng::from_seed(seed);
        (0..PROBLEM_FEATURE_DIM).map(|_| r.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn parameter_count_at_default_width() {
        assert_eq!(Composer::param_count(&ModelConfig::default()), 59456);
    }

    #[test]
    fn samples_are_legal_and_rescore_exactly() {
        let c = Composer::new(ModelConfig::default(), &mut rng::from_seed(1));
        let mut r = rng::from_seed(2);
        for s in 0..30 {
            let f = features(s);
            let sample = c.generate(&f, &mut r, Decode::Sample);
            assert!(sample.workflow.len() <= 64);
            assert_eq!(*sample.workflow.tokens().last().unwrap(), END_TOKEN);
            let first = registry().get(sample.workflow.tokens()[0]);
            assert_eq!(first.kind, autoec_core::space::ModuleKind::Initialization);
            let total: f64 = sample.token_log_probs.iter().sum();
            assert_eq!(total, sample.total_log_prob);
            let rescored = c.score(&sample.workflow, &f);
            assert!((rescored - sample.total_log_prob).abs() < 1e-10, "{rescored} vs {}", sample.total_log_prob);
        }
    }

    #[test]
    fn greedy_decoding_is_legal_and_repeatable() {
        let c = Composer::new(ModelConfig::default(), &mut rng::from_seed(5));
        let f = features(9);
        let a = c.generate(&f, &mut rng::from_seed(0), Decode::Greedy);
        let b = c.generate(&f, &mut rng::from_seed(0), Decode::Greedy);
        assert_eq!(a, b);
        assert!(Workflow::from_tokens(a.workflow.tokens().to_vec(), None).is_ok());
    }

    #[test]
    fn forced_moves_cost_nothing() {
        let c = Composer::new(ModelConfig::default(), &mut rng::from_seed(1));
        let sample = c.generate(&features(3), &mut rng::from_seed(4), Decode::Sample);
        let masks = Composer::masks(&sample.workflow).unwrap();
        for (m, lp) in masks.iter().zip(&sample.token_log_probs) {
            if m.iter().filter(|v| **v).count() == 1 {
                assert_eq!(*lp, 0.0);
            }
        }
    }

    fn enumerate(c: &Composer, grammar: &autoec_core::space::Grammar, f: &[f64], ctx: GenerationContext, tokens: &mut Vec<usize>, lp: f64) -> (f64, usize) {
        if ctx.finished {
            return (lp.exp(), 1);
        }
        let mask = grammar.mask(&ctx).unwrap();
        let mut g = Graph::new(&c.params);
        let logits = c.logits(&mut g, f, tokens);
        let last = g.rows(logits, tokens.len(), 1);
        let row = g.masked_log_softmax(last, &mask);
        let row = g.value(row).data.clone();
        let mut total = (0.0, 0);
        for t in (0..mask.len()).filter(|&t| mask[t]) {
            let next = grammar.advance(&ctx, t, Some(2)).unwrap();
            tokens.push(t);
            let (p, n) = enumerate(c, grammar, f, next, tokens, lp + row[t]);
            tokens.pop();
            total.0 += p;
            total.1 += n;
        }
        total
    }

    #[test]
    fn probabilities_of_all_short_workflows_sum_to_one() {
        let grammar = autoec_core::space::Grammar::new(6);
        let c = Composer::new(ModelConfig::tiny(), &mut rng::from_seed(2));
        let c = Composer::from_params(ModelConfig::tiny(), c.params.iter().map(|v| v * 30.0).collect()).unwrap();
        let (total, count) = enumerate(&c, &grammar, &features(4), GenerationContext::default(), &mut Vec::new(), 0.0);
        assert!(count > 100, "{count}");
        assert!((total - 1.0).abs() < 1e-9, "{total} over {count} workflows");
    }

    #[test]
    fn illegal_workflow_scores_negative_infinity() {
        let c = Composer::new(ModelConfig::tiny(), &mut rng::from_seed(1));
        let wf = autoec_core::engine::canonical_de();
        assert!(c.score(&wf, &features(0)).is_finite());
        let mut tokens = wf.tokens().to_vec();
        tokens.swap(1, 2);
        let json = serde_json::json!({ "tokens": tokens, "n_nich": 0, "branches": [] });
        let bad: Workflow = serde_json::from_value(json).unwrap();
        assert_eq!(c.score(&bad, &features(0)), f64::NEG_INFINITY);
    }

    #[test]
    fn log_prob_gradient_matches_central_differences() {
        let c = Composer::new(ModelConfig::tiny(), &mut rng::from_seed(7));
        let p: Vec<f64> = c.params.iter().map(|v| v * 10.0).collect();
        let c = Composer::from_params(ModelConfig::tiny(), p).unwrap();
        let f = features(1);
        let wf = c.generate(&f, &mut rng::from_seed(3), Decode::Sample).workflow;
        let eval = |q: &[f64]| {
            let m = Composer::from_params(ModelConfig::tiny(), q.to_vec()).unwrap();
            let mut g = Graph::new(&m.params);
            let v = m.log_prob_graph(&mut g, &wf, &f).unwrap();
            (g.value(v).scalar(), g.backward(v))
        };
        let (_, analytic) = eval(&c.params);
        let numeric = crate::tape::numeric_gradient(&c.params, 1e-5, |q| eval(q).0);
        let err = crate::tape::relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "{err:e}");
    }

    proptest::proptest! {
        #[test]
        fn any_features_give_a_legal_workflow(
            f in proptest::collection::vec(-50.0f64..50.0, PROBLEM_FEATURE_DIM),
            seed in proptest::prelude::any::<u64>(),
        ) {
            let c = Composer::new(ModelConfig::tiny(), &mut rng::from_seed(seed));
            let s = c.generate(&f, &mut rng::from_seed(seed ^ 1), Decode::Sample);
            let n = s.workflow.n_nich();
            let again = Workflow::from_tokens(s.workflow.tokens().to_vec(), (n > 0).then_some(n));
            proptest::prop_assert!(again.is_ok());
            proptest::prop_assert!(s.workflow.len() <= 64);
            proptest::prop_assert!(s.total_log_prob.is_finite() && s.total_log_prob <= 0.0);
        }
    }
}
