use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{registry, Grammar, ModuleId, ModuleKind, END_TOKEN, MAX_NICHES, MIN_NICHES};
use crate::error::{Error, Result};

/// Token span of one niching branch, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub start: usize,
    pub end: usize,
}

/// A legal module sequence in pre-order, terminated by the end token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workflow {
    tokens: Vec<usize>,
    n_nich: usize,
    branches: Vec<Branch>,
}

impl Workflow {
    /// Validates a full token sequence. `n_nich` may be omitted, in which case
    /// every admissible niche count is tried.
    pub fn from_tokens(tokens: Vec<usize>, n_nich: Option<usize>) -> Result<Self> {
        let grammar = shared_grammar();
        let has_niching = tokens
            .iter()
            .any(|&t| registry().is_registered(t) && registry().get(t).kind == ModuleKind::Niching);
        let candidates: Vec<Option<usize>> = match (has_niching, n_nich) {
            (false, _) => vec![None],
            (true, Some(k)) => vec![Some(k)],
            (true, None) => (MIN_NICHES..=MAX_NICHES).map(Some).collect(),
        };
        let mut last_err = None;
        for k in candidates {
            match Self::check(grammar, &tokens, k) {
                Ok(w) => return Ok(w),
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.expect("at least one candidate"))
    }

    fn check(grammar: &Grammar, tokens: &[usize], n_nich: Option<usize>) -> Result<Self> {
        let ctx = grammar.context_of(tokens, n_nich)?;
        if !ctx.finished {
            return Err(Error::IllegalWorkflow("workflow does not end with the end token".into()));
        }
        let n = if ctx.niching_active { ctx.n_nich } else { 0 };
        let branches = if n > 0 { Self::branch_table(tokens) } else { Vec::new() };
        if branches.len() != n {
            return Err(Error::IllegalWorkflow(format!("expected {n} branches, found {}", branches.len())));
        }
        Ok(Workflow { tokens: tokens.to_vec(), n_nich: n, branches })
    }

    /// Branch spans of a legal niching workflow: a branch opens at the first
    /// reproduction token after Niching or after a Selection/Sharing, and
    /// closes at the last Selection/Sharing before the next opening or tail.
    fn branch_table(tokens: &[usize]) -> Vec<Branch> {
        let r = registry();
        let kinds: Vec<ModuleKind> = tokens.iter().map(|&t| r.get(t).kind).collect();
        let Some(niche) = kinds.iter().position(|&k| k == ModuleKind::Niching) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut start = niche + 1;
        let mut i = start;
        while i < kinds.len() {
            match kinds[i] {
                ModuleKind::Selection | ModuleKind::InformationSharing => {
                    let next = kinds.get(i + 1).copied();
                    let closes = !matches!(next, Some(ModuleKind::InformationSharing));
                    if closes {
                        out.push(Branch { start, end: i });
                        start = i + 1;
                        match next {
                            Some(ModuleKind::Mutation | ModuleKind::Crossover | ModuleKind::OtherUpdate) => {}
                            _ => break,
                        }
                    }
                }
                _ => {}
            }
            i += 1;
        }
        out
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_nich(&self) -> usize {
        self.n_nich
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn ids(&self) -> Vec<ModuleId> {
        self.tokens.iter().map(|&t| registry().get(t).id).collect()
    }

    /// Branch index owning token position `pos`, if any.
    pub fn branch_of(&self, pos: usize) -> Option<usize> {
        self.branches.iter().position(|b| (b.start..=b.end).contains(&pos))
    }

    /// Positions of controllable modules, in order.
    pub fn controllable_positions(&self) -> Vec<usize> {
        (0..self.tokens.len())
            .filter(|&i| registry().get(self.tokens[i]).is_controllable())
            .collect()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.tokens.iter().map(|&t| registry().get(t).name).collect()
    }

    pub fn contains_kind(&self, kind: ModuleKind) -> bool {
        self.tokens.iter().any(|&t| registry().get(t).kind == kind)
    }
}

pub fn shared_grammar() -> &'static Grammar {
    static G: std::sync::OnceLock<Grammar> = std::sync::OnceLock::new();
    G.get_or_init(Grammar::default)
}

impl fmt::Display for Workflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::with_capacity(self.tokens.len() + 2 * self.branches.len());
        for (i, &t) in self.tokens.iter().enumerate() {
            if self.branches.iter().any(|b| b.start == i) {
                parts.push("[".into());
            }
            parts.push(registry().get(t).id.bit_string());
            if self.branches.iter().any(|b| b.end == i) {
                parts.push("]".into());
            }
        }
        f.write_str(&parts.join(" "))
    }
}

impl FromStr for Workflow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut open: Option<usize> = None;
        let mut marked: Vec<Branch> = Vec::new();
        let mut pieces: Vec<&str> = Vec::new();
        for word in s.split_whitespace() {
            let mut w = word;
            while let Some(rest) = w.strip_prefix('[') {
                pieces.push("[");
                w = rest;
            }
            let mut closes = 0;
            while let Some(rest) = w.strip_suffix(']') {
                closes += 1;
                w = rest;
            }
            if !w.is_empty() {
                pieces.push(w);
            }
            pieces.extend(std::iter::repeat_n("]", closes));
        }
        for p in pieces {
            match p {
                "[" => {
                    if open.is_some() {
                        return Err(Error::Parse("nested branch marker".into()));
                    }
                    open = Some(tokens.len());
                }
                "]" => {
                    let start = open.take().ok_or_else(|| Error::Parse("unmatched ']'".into()))?;
                    if tokens.len() == start {
                        return Err(Error::Parse("empty branch".into()));
                    }
                    marked.push(Branch { start, end: tokens.len() - 1 });
                }
                id => {
                    let id = ModuleId::parse_bits(id)?;
                    tokens.push(registry().token_of(id)?);
                }
            }
        }
        if open.is_some() {
            return Err(Error::Parse("unclosed '['".into()));
        }
        let n = if marked.is_empty() { None } else { Some(marked.len()) };
        let w = Workflow::from_tokens(tokens, n)?;
        if w.branches != marked {
            return Err(Error::Parse("branch markers disagree with the branch structure".into()));
        }
        Ok(w)
    }
}

impl Workflow {
    /// Uniform choice among legal tokens at every step, with a niche count
    /// drawn from [2, 4].
    pub fn random(rng: &mut crate::rng::Rng) -> Self {
        use rand::Rng as _;
        let grammar = shared_grammar();
        let n_nich = rng.random_range(MIN_NICHES..=MAX_NICHES);
        let mut ctx = super::GenerationContext::default();
        let mut tokens = Vec::new();
        while !ctx.finished {
            let mask = grammar.mask(&ctx).expect("grammar admits a completion");
            let legal: Vec<usize> = (0..mask.len()).filter(|&t| mask[t]).collect();
            let t = legal[rng.random_range(0..legal.len())];
            ctx = grammar.advance(&ctx, t, Some(n_nich)).expect("masked token is legal");
            tokens.push(t);
        }
        Workflow::from_tokens(tokens, Some(n_nich)).expect("sampled workflow is legal")
    }

    /// Last token index, always the end token for a constructed workflow.
    pub fn end_position(&self) -> usize {
        debug_assert_eq!(self.tokens.last(), Some(&END_TOKEN));
        self.tokens.len() - 1
    }
}
