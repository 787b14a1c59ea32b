use std::collections::HashMap;

use super::{
    registry, Condition, Follower, ModuleKind, Registry, END_TOKEN, MAX_NICHES, MAX_WORKFLOW_LEN,
    MIN_NICHES, TOKEN_SPACE,
};
use crate::error::{Error, Result};

/// State of a partially generated workflow beyond its last token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GenerationContext {
    /// Tokens emitted so far.
    pub len: usize,
    pub last: Option<usize>,
    pub niching_active: bool,
    pub n_nich: usize,
    /// Index of the niching branch currently being emitted.
    pub branch_index: usize,
    /// Branches still to be emitted after the current one.
    pub branches_remaining: usize,
    pub finished: bool,
}

impl GenerationContext {
    pub fn tokens_remaining(&self, max_len: usize) -> usize {
        max_len.saturating_sub(self.len)
    }

    fn branch_pending(&self) -> bool {
        self.niching_active && self.branches_remaining > 0
    }
}

/// Workflow grammar over a registry with a length budget.
#[derive(Debug)]
pub struct Grammar {
    registry: &'static Registry,
    max_len: usize,
    /// Shortest number of tokens (end included) needed after a token,
    /// keyed by (token, niching active, branches remaining).
    completion: HashMap<(usize, bool, usize), usize>,
}

impl Default for Grammar {
    fn default() -> Self {
        Grammar::new(MAX_WORKFLOW_LEN)
    }
}

fn is_branch_start(kind: ModuleKind) -> bool {
    matches!(kind, ModuleKind::Mutation | ModuleKind::Crossover | ModuleKind::OtherUpdate)
}

impl Grammar {
    pub fn new(max_len: usize) -> Self {
        let mut g = Grammar { registry: registry(), max_len, completion: HashMap::new() };
        let tokens: Vec<usize> = g.registry.tokens().collect();
        for &t in &tokens {
            for active in [false, true] {
                for br in 0..MAX_NICHES {
                    g.shortest_completion(t, active, br);
                }
            }
        }
        g
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn registry(&self) -> &'static Registry {
        self.registry
    }

    /// Followers that open a reproduction chain: the printed followers of
    /// Initialization.
    fn reproduction_start(&self) -> &[Follower] {
        &self.registry.tokens_of_kind(ModuleKind::Initialization)
            .first()
            .map(|&t| self.registry.get(t))
            .expect("registry has an initialization variant")
            .rule
            .followers
    }

    /// Legal immediate successors of `last` under `ctx`, before the length
    /// budget is applied.
    pub fn legal_followers(&self, last: usize, ctx: &GenerationContext) -> Vec<usize> {
        let v = self.registry.get(last);
        let mut classes: Vec<Follower> = Vec::new();
        match v.kind {
            ModuleKind::End => return Vec::new(),
            // Inside a niching program a finished branch hands over to the
            // next branch body instead of the tail.
            ModuleKind::Selection | ModuleKind::InformationSharing if ctx.branch_pending() => {
                classes.extend_from_slice(self.reproduction_start());
                if v.kind == ModuleKind::Selection {
                    classes.push(Follower::Kind(ModuleKind::InformationSharing));
                }
            }
            _ => {
                classes.extend_from_slice(&v.rule.followers);
                for &(f, cond) in &v.rule.conditional {
                    let holds = match cond {
                        Condition::NichingActive => ctx.niching_active,
                        Condition::NichingInactive => !ctx.niching_active,
                    };
                    if holds {
                        classes.push(f);
                    }
                }
            }
        }
        let mut out: Vec<usize> = self
            .registry
            .tokens()
            .filter(|&t| classes.iter().any(|&f| self.registry.get(t).matches(f)))
            .collect();
        out.sort_unstable();
        out
    }

    fn initial_tokens(&self) -> Vec<usize> {
        self.registry.tokens_of_kind(ModuleKind::Initialization)
    }

    /// Context after appending `token`. `n_nich` is required for a niching
    /// token and ignored otherwise. Does not check legality.
    fn step_unchecked(&self, ctx: &GenerationContext, token: usize, n_nich: usize) -> GenerationContext {
        let kind = self.registry.get(token).kind;
        let mut next = *ctx;
        next.len += 1;
        next.last = Some(token);
        match kind {
            ModuleKind::End => next.finished = true,
            ModuleKind::Niching => {
                next.niching_active = true;
                next.n_nich = n_nich;
                next.branch_index = 0;
                next.branches_remaining = n_nich - 1;
            }
            k if is_branch_start(k) && ctx.branch_pending() => {
                let prev = ctx.last.map(|t| self.registry.get(t).kind);
                if matches!(prev, Some(ModuleKind::Selection | ModuleKind::InformationSharing)) {
                    next.branch_index += 1;
                    next.branches_remaining -= 1;
                }
            }
            _ => {}
        }
        next
    }

    fn shortest_completion(&mut self, token: usize, active: bool, br: usize) -> usize {
        if let Some(&d) = self.completion.get(&(token, active, br)) {
            return d;
        }
        if token == END_TOKEN {
            self.completion.insert((token, active, br), 0);
            return 0;
        }
        let ctx = GenerationContext {
            len: 1,
            last: Some(token),
            niching_active: active,
            n_nich: if active { MAX_NICHES } else { 0 },
            branch_index: 0,
            branches_remaining: br,
            finished: false,
        };
        let mut best = usize::MAX;
        for f in self.legal_followers(token, &ctx) {
            let next = self.step_unchecked(&ctx, f, MAX_NICHES);
            let d = 1 + self.shortest_completion(f, next.niching_active, next.branches_remaining);
            best = best.min(d);
        }
        assert!(best != usize::MAX, "{} cannot reach end", self.registry.get(token).name);
        self.completion.insert((token, active, br), best);
        best
    }

    /// Tokens needed after `token` to reach the end token, assuming the
    /// largest niche count when `token` opens a niching program.
    pub fn completion_len(&self, ctx: &GenerationContext, token: usize) -> usize {
        if token == END_TOKEN {
            return 0;
        }
        let next = self.step_unchecked(ctx, token, MAX_NICHES);
        self.completion[&(token, next.niching_active, next.branches_remaining)]
    }

    /// Boolean mask over the full token space: true iff appending that token
    /// keeps the workflow legal and still completable within the budget.
    pub fn mask(&self, ctx: &GenerationContext) -> Result<Vec<bool>> {
        if ctx.finished {
            return Err(Error::Contract("prefix already ended".into()));
        }
        let candidates = match ctx.last {
            None => self.initial_tokens(),
            Some(last) => self.legal_followers(last, ctx),
        };
        let remaining = ctx.tokens_remaining(self.max_len);
        let mut mask = vec![false; TOKEN_SPACE];
        let mut any = false;
        for c in candidates {
            if 1 + self.completion_len(ctx, c) <= remaining {
                mask[c] = true;
                any = true;
            }
        }
        if !any {
            return Err(Error::Contract("prefix cannot be completed within the length budget".into()));
        }
        Ok(mask)
    }

    /// Appends `token`, checking it against the mask.
    pub fn advance(&self, ctx: &GenerationContext, token: usize, n_nich: Option<usize>) -> Result<GenerationContext> {
        if token >= TOKEN_SPACE || !self.registry.is_registered(token) {
            return Err(Error::IllegalWorkflow(format!("token {token} is not registered")));
        }
        let mask = self.mask(ctx).map_err(|e| Error::IllegalWorkflow(e.to_string()))?;
        if !mask[token] {
            return Err(Error::IllegalWorkflow(format!(
                "{} cannot follow {} at position {}",
                self.registry.get(token).name,
                ctx.last.map_or("start", |t| self.registry.get(t).name),
                ctx.len
            )));
        }
        let k = if self.registry.get(token).kind == ModuleKind::Niching {
            match n_nich {
                Some(k) if (MIN_NICHES..=MAX_NICHES).contains(&k) => k,
                other => {
                    return Err(Error::IllegalWorkflow(format!("niche count {other:?} not in [2, 4]")))
                }
            }
        } else {
            0
        };
        Ok(self.step_unchecked(ctx, token, k))
    }

    /// Replays a prefix from the empty context.
    pub fn context_of(&self, prefix: &[usize], n_nich: Option<usize>) -> Result<GenerationContext> {
        prefix
            .iter()
            .try_fold(GenerationContext::default(), |ctx, &t| self.advance(&ctx, t, n_nich))
    }

    /// Mask for a prefix; an illegal prefix is a contract violation.
    pub fn build_mask(&self, prefix: &[usize], n_nich: Option<usize>) -> Result<Vec<bool>> {
        let ctx = self
            .context_of(prefix, n_nich)
            .map_err(|e| Error::Contract(e.to_string()))?;
        self.mask(&ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Style, MAX_WORKFLOW_LEN};
    use std::collections::{BTreeSet, VecDeque};

    fn tok(name: &str) -> usize {
        registry().token_by_name(name).unwrap_or_else(|| panic!("no variant {name}"))
    }

    fn names(tokens: &[usize]) -> BTreeSet<&'static str> {
        tokens.iter().map(|&t| registry().get(t).name).collect()
    }

    fn true_set(mask: &[bool]) -> Vec<usize> {
        mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
    }

    #[test]
    fn empty_prefix_allows_only_initialization() {
        let g = Grammar::default();
        let mask = g.build_mask(&[], None).unwrap();
        let set = true_set(&mask);
        assert_eq!(set.len(), 5);
        assert!(set.iter().all(|&t| registry().get(t).kind == ModuleKind::Initialization));
    }

    #[test]
    fn initialization_followers() {
        let g = Grammar::default();
        let r = registry();
        let ctx = g.context_of(&[tok("Uniform")], None).unwrap();
        let got: BTreeSet<usize> = g.legal_followers(tok("Uniform"), &ctx).into_iter().collect();
        let mut want: BTreeSet<usize> = BTreeSet::new();
        want.extend(r.resolve(Follower::Styled(ModuleKind::Mutation, Style::De)));
        want.extend(r.resolve(Follower::Kind(ModuleKind::OtherUpdate)));
        want.extend(r.resolve(Follower::Styled(ModuleKind::Crossover, Style::Ga)));
        // structural clause: a niching program opens right after initialization
        want.extend(r.tokens_of_kind(ModuleKind::Niching));
        assert_eq!(got, want);
    }

    #[test]
    fn clip_is_followed_by_selection_only() {
        let g = Grammar::default();
        let prefix = [tok("Uniform"), tok("DE/rand/1"), tok("Binomial"), tok("Clip")];
        let mask = g.build_mask(&prefix, None).unwrap();
        assert_eq!(true_set(&mask), registry().tokens_of_kind(ModuleKind::Selection));
    }

    #[test]
    fn selection_followers_depend_on_niching() {
        let g = Grammar::default();
        let r = registry();
        let tail: BTreeSet<usize> = r
            .tokens_of_kind(ModuleKind::RestartStrategy)
            .into_iter()
            .chain(r.tokens_of_kind(ModuleKind::PopulationReduction))
            .chain([END_TOKEN])
            .collect();
        let flat = [tok("Uniform"), tok("DE/rand/1"), tok("Binomial"), tok("Clip"), tok("DE-like")];
        let got: BTreeSet<usize> = true_set(&g.build_mask(&flat, None).unwrap()).into_iter().collect();
        assert_eq!(got, tail);

        // two-branch niching program, last branch
        let niched = [
            tok("Uniform"), tok("Rand_Niching"),
            tok("DE/rand/1"), tok("Binomial"), tok("Clip"), tok("DE-like"),
            tok("Vanilla_PSO"), tok("Clip"), tok("DE-like"),
        ];
        let got: BTreeSet<usize> =
            true_set(&g.build_mask(&niched, Some(2)).unwrap()).into_iter().collect();
        let mut want = tail.clone();
        want.insert(tok("Sharing"));
        assert_eq!(got, want);
    }

    #[test]
    fn pending_branch_forces_next_body() {
        let g = Grammar::default();
        let prefix = [tok("Uniform"), tok("Rand_Niching"), tok("DE/rand/1"), tok("Binomial"), tok("Clip"), tok("DE-like")];
        let got = true_set(&g.build_mask(&prefix, Some(3)).unwrap());
        assert!(got.contains(&tok("Sharing")));
        assert!(got.contains(&tok("CMA-ES")));
        assert!(!got.contains(&END_TOKEN));
        assert!(!got.contains(&tok("Linear")));
        let ctx = g.context_of(&[&prefix[..], &[tok("SBX")]].concat(), Some(3)).unwrap();
        assert_eq!((ctx.branch_index, ctx.branches_remaining), (1, 1));
    }

    #[test]
    fn restart_is_followed_by_end_only() {
        let g = Grammar::default();
        let prefix = [tok("Uniform"), tok("DE/rand/1"), tok("Binomial"), tok("Clip"), tok("DE-like"), tok("Stagnation")];
        assert_eq!(true_set(&g.build_mask(&prefix, None).unwrap()), vec![END_TOKEN]);
    }

    #[test]
    fn illegal_prefix_is_contract_violation() {
        let g = Grammar::default();
        let err = g.build_mask(&[tok("Uniform"), tok("Clip")], None).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        let err = g.build_mask(&[tok("DE/rand/1")], None).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        let done = [tok("Uniform"), tok("Vanilla_PSO"), tok("Clip"), tok("PSO-like"), END_TOKEN];
        assert!(g.build_mask(&done, None).is_err());
    }

    #[test]
    fn shortest_completions() {
        let g = Grammar::default();
        let ctx = GenerationContext::default();
        // Uniform -> PSO -> BC -> Selection -> end
        assert_eq!(g.completion_len(&ctx, tok("Uniform")), 4);
        let ctx = g.context_of(&[tok("Uniform")], None).unwrap();
        // niching with four branches of (update, BC, selection) then end
        assert_eq!(g.completion_len(&ctx, tok("Rand_Niching")), 13);
    }

    #[test]
    fn tight_budget_closes_the_workflow() {
        let g = Grammar::new(6);
        let prefix = [tok("Uniform"), tok("DE/rand/1"), tok("Binomial"), tok("Clip"), tok("DE-like")];
        // prefix length = M - 1: only immediate completion remains
        assert_eq!(true_set(&g.build_mask(&prefix, None).unwrap()), vec![END_TOKEN]);
        let g = Grammar::new(5);
        let ctx = g.context_of(&[tok("Uniform")], None).unwrap();
        let mask = g.mask(&ctx).unwrap();
        assert!(!mask[tok("SBX")], "SBX chain needs 5 more tokens");
        assert!(mask[tok("Vanilla_PSO")]);
        assert!(!mask[tok("Rand_Niching")]);
    }

    /// Exhaustive walk over every prefix up to depth 8 (plus full walks with
    /// a single niche count): no dead ends, and every path ends within M.
    #[test]
    fn grammar_is_live() {
        let g = Grammar::default();
        let mut queue: VecDeque<(Vec<usize>, Option<usize>)> = VecDeque::new();
        queue.push_back((vec![], None));
        let mut visited = 0usize;
        while let Some((prefix, n)) = queue.pop_front() {
            visited += 1;
            let mask = g.build_mask(&prefix, n).expect("reachable prefix has a legal mask");
            let set = true_set(&mask);
            assert!(!set.is_empty());
            for t in set {
                if t == END_TOKEN {
                    assert!(prefix.len() + 1 <= MAX_WORKFLOW_LEN);
                    continue;
                }
                if prefix.len() + 1 >= 8 {
                    continue;
                }
                let mut next = prefix.clone();
                next.push(t);
                let n_next = if registry().get(t).kind == ModuleKind::Niching { Some(2) } else { n };
                queue.push_back((next, n_next));
            }
        }
        assert!(visited > 1000);
    }

    #[test]
    fn mask_matches_followers_at_full_budget() {
        let g = Grammar::default();
        let prefixes: Vec<Vec<usize>> = vec![
            vec![tok("Uniform")],
            vec![tok("Halton"), tok("SBX")],
            vec![tok("Halton"), tok("SBX"), tok("Gaussian_mutation")],
            vec![tok("Normal"), tok("Multi_Mutation_1")],
            vec![tok("Uniform"), tok("CMA-ES"), tok("Reflect"), tok("PSO-like"), tok("Linear")],
        ];
        for p in prefixes {
            let ctx = g.context_of(&p, None).unwrap();
            let mask = g.mask(&ctx).unwrap();
            assert_eq!(true_set(&mask), g.legal_followers(*p.last().unwrap(), &ctx), "{:?}", names(&p));
        }
    }
}
