//! Parameter layout and pre-norm transformer blocks.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use autoec_core::rng::Rng;
use autoec_core::space::{MAX_CONFIG, TOKEN_SPACE};

use crate::tape::{Graph, Tensor, Var};

/// Width of a module id bit vector.
pub const ID_BITS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden: usize,
    pub heads: usize,
    pub composer_layers: usize,
    pub controller_layers: usize,
    pub max_config: usize,
    pub vocab: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 64,
            heads: 4,
            composer_layers: 1,
            controller_layers: 3,
            max_config: MAX_CONFIG,
            vocab: TOKEN_SPACE,
        }
    }
}

impl ModelConfig {
    /// A narrow configuration for gradient checks.
    pub fn tiny() -> Self {
        ModelConfig { hidden: 8, heads: 2, composer_layers: 1, controller_layers: 1, ..Default::default() }
    }
}

/// A named `rows × cols` block of a flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn load(&self, g: &mut Graph) -> Var {
        g.param(self.offset, self.rows, self.cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Normal,
    Zeros,
    Ones,
}

#[derive(Debug, Clone, Default)]
pub struct Layout {
    pub entries: Vec<(String, Segment, Init)>,
    pub len: usize,
}

impl Layout {
    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, init: Init) -> Segment {
        let s = Segment { offset: self.len, rows, cols };
        self.len += s.len();
        self.entries.push((name.into(), s, init));
        s
    }

    /// Scaled-Gaussian weights (std 0.02), zero biases, unit gains.
    pub fn initialize(&self, rng: &mut Rng) -> Vec<f64> {
        let mut p = vec![0.0; self.len];
        for (_, s, init) in &self.entries {
            let dst = &mut p[s.offset..s.offset + s.len()];
            match init {
                Init::Normal => dst.iter_mut().for_each(|v| *v = 0.02 * rng.sample::<f64, _>(StandardNormal)),
                Init::Zeros => {}
                Init::Ones => dst.fill(1.0),
            }
        }
        p
    }
}

#[derive(Debug, Clone)]
pub struct Block {
    ln1: (Segment, Segment),
    qkv: (Segment, Segment),
    proj: (Segment, Segment),
    ln2: (Segment, Segment),
    fc: (Segment, Segment),
    out: (Segment, Segment),
}

impl Block {
    fn new(layout: &mut Layout, prefix: &str, h: usize) -> Self {
        let mut pair = |name: &str, rows: usize, cols: usize, w: Init, b: Init| {
            (
                layout.add(format!("{prefix}.{name}.w"), rows, cols, w),
                layout.add(format!("{prefix}.{name}.b"), 1, cols, b),
            )
        };
        Block {
            ln1: pair("ln1", 1, h, Init::Ones, Init::Zeros),
            qkv: pair("qkv", h, 3 * h, Init::Normal, Init::Zeros),
            proj: pair("proj", h, h, Init::Normal, Init::Zeros),
            ln2: pair("ln2", 1, h, Init::Ones, Init::Zeros),
            fc: pair("fc", h, 4 * h, Init::Normal, Init::Zeros),
            out: pair("out", 4 * h, h, Init::Normal, Init::Zeros),
        }
    }

    fn linear(g: &mut Graph, x: Var, (w, b): (Segment, Segment)) -> Var {
        let w = w.load(g);
        let b = b.load(g);
        let y = g.matmul(x, w);
        g.add_row(y, b)
    }

    fn norm(g: &mut Graph, x: Var, (w, b): (Segment, Segment)) -> Var {
        let w = w.load(g);
        let b = b.load(g);
        g.layer_norm(x, w, b)
    }

    /// `x + attn(ln(x))` followed by `x + mlp(ln(x))`.
    pub fn forward(&self, g: &mut Graph, x: Var, heads: usize, causal: bool) -> Var {
        let h = g.value(x).cols;
        let dk = h / heads;
        let a = Self::norm(g, x, self.ln1);
        let qkv = Self::linear(g, a, self.qkv);
        let scale = 1.0 / (dk as f64).sqrt();
        let mut outs = Vec::with_capacity(heads);
        for k in 0..heads {
            let q = g.cols(qkv, k * dk, dk);
            let kk = g.cols(qkv, h + k * dk, dk);
            let v = g.cols(qkv, 2 * h + k * dk, dk);
            let kt = g.transpose(kk);
            let s = g.matmul(q, kt);
            let s = g.scale(s, scale);
            let p = g.softmax_rows(s, causal);
            outs.push(g.matmul(p, v));
        }
        let cat = if heads == 1 { outs[0] } else { g.concat_cols(&outs) };
        let att = Self::linear(g, cat, self.proj);
        let x = g.add(x, att);
        let b = Self::norm(g, x, self.ln2);
        let f = Self::linear(g, b, self.fc);
        let f = g.gelu(f);
        let m = Self::linear(g, f, self.out);
        g.add(x, m)
    }
}

/// A stack of blocks with a final normalization.
#[derive(Debug, Clone)]
pub struct Stack {
    pub blocks: Vec<Block>,
    final_norm: (Segment, Segment),
    heads: usize,
}

impl Stack {
    pub fn new(layout: &mut Layout, prefix: &str, layers: usize, h: usize, heads: usize) -> Self {
        assert!(h % heads == 0, "hidden width must divide into heads");
        let blocks = (0..layers).map(|i| Block::new(layout, &format!("{prefix}.block{i}"), h)).collect();
        let final_norm = (
            layout.add(format!("{prefix}.ln_f.w"), 1, h, Init::Ones),
            layout.add(format!("{prefix}.ln_f.b"), 1, h, Init::Zeros),
        );
        Stack { blocks, final_norm, heads }
    }

    pub fn forward(&self, g: &mut Graph, mut x: Var, causal: bool) -> Var {
        for b in &self.blocks {
            x = b.forward(g, x, self.heads, causal);
        }
        Block::norm(g, x, self.final_norm)
    }
}

/// Parameters in one block: two norms, attention and a 4× feed-forward.
pub fn block_param_count(h: usize) -> usize {
    12 * h * h + 13 * h
}

/// Interleaved sinusoidal position codes for positions `0..n`.
pub fn positional_encoding(n: usize, h: usize) -> Tensor {
    let mut data = vec![0.0; n * h];
    for pos in 0..n {
        for i in 0..h.div_ceil(2) {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / h as f64);
            data[pos * h + 2 * i] = angle.sin();
            if 2 * i + 1 < h {
                data[pos * h + 2 * i + 1] = angle.cos();
            }
        }
    }
    Tensor::new(n, h, data)
}
