//! Reverse-mode differentiation over small dense matrices.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s. Parameters
//! are views into one flat vector, so [`Graph::backward`] returns a gradient
//! laid out exactly like the parameter vector.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "tensor shape");
        Tensor { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn scalar(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "not a scalar");
        self.data[0]
    }
}

fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.cols, b.rows, "matmul shape {}x{} * {}x{}", a.rows, a.cols, b.rows, b.cols);
    let mut out = vec![0.0; a.rows * b.cols];
    for i in 0..a.rows {
        let o = &mut out[i * b.cols..(i + 1) * b.cols];
        for p in 0..a.cols {
            let s = a.data[i * a.cols + p];
            if s == 0.0 {
                continue;
            }
            let br = &b.data[p * b.cols..(p + 1) * b.cols];
            for (x, y) in o.iter_mut().zip(br) {
                *x += s * y;
            }
        }
    }
    Tensor::new(a.rows, b.cols, out)
}

fn transpose(a: &Tensor) -> Tensor {
    let mut out = vec![0.0; a.data.len()];
    for i in 0..a.rows {
        for j in 0..a.cols {
            out[j * a.rows + i] = a.data[i * a.cols + j];
        }
    }
    Tensor::new(a.cols, a.rows, out)
}

const GELU_C: f64 = 0.797_884_560_802_865_4;
const LN_EPS: f64 = 1e-5;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Exp(Var),
    Ln(Var),
    Softplus(Var),
    Gelu(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Min(Var, Var),
    Transpose(Var),
    Cols(Var, usize),
    Rows(Var, usize),
    ConcatCols(Vec<Var>),
    SoftmaxRows(Var),
    LogSoftmaxMasked(Var, Vec<bool>),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, rstd: Vec<f64> },
    Sum(Var),
    MeanRows(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// A recording of one forward computation.
pub struct Graph<'p> {
    params: &'p [f64],
    nodes: Vec<Node>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p [f64]) -> Self {
        Graph { params, nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input)
    }

    /// A `rows × cols` block of the parameter vector starting at `offset`.
    pub fn param(&mut self, offset: usize, rows: usize, cols: usize) -> Var {
        let data = self.params[offset..offset + rows * cols].to_vec();
        self.push(Tensor::new(rows, cols, data), Op::Param(offset))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = matmul(self.value(a), self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!((x.rows, x.cols), (y.rows, y.cols), "elementwise shape");
        let data = x.data.iter().zip(&y.data).map(|(p, q)| f(*p, *q)).collect();
        let t = Tensor::new(x.rows, x.cols, data);
        self.push(t, op)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let x = self.value(a);
        let t = Tensor::new(x.rows, x.cols, x.data.iter().map(|v| f(*v)).collect());
        self.push(t, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |p, q| p + q, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |p, q| p - q, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |p, q| p * q, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |p, q| p / q, Op::Div(a, b))
    }

    pub fn min(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, f64::min, Op::Min(a, b))
    }

    /// Adds a `1 × cols` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (x, r) = (self.value(a), self.value(row));
        assert!(r.rows == 1 && r.cols == x.cols, "broadcast shape");
        let mut data = x.data.clone();
        for chunk in data.chunks_mut(x.cols) {
            for (v, b) in chunk.iter_mut().zip(&r.data) {
                *v += b;
            }
        }
        let t = Tensor::new(x.rows, x.cols, data);
        self.push(t, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |v| v * c, Op::Scale(a, c))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, f64::exp, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.map(a, f64::ln, Op::Ln(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.map(a, softplus, Op::Softplus(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        self.map(a, gelu, Op::Gelu(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, |v| v * v, Op::Square(a))
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.map(a, |v| v.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let t = transpose(self.value(a));
        self.push(t, Op::Transpose(a))
    }

    /// Columns `start..start + len`.
    pub fn cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let x = self.value(a);
        let mut data = Vec::with_capacity(x.rows * len);
        for i in 0..x.rows {
            data.extend_from_slice(&x.row(i)[start..start + len]);
        }
        let t = Tensor::new(x.rows, len, data);
        self.push(t, Op::Cols(a, start))
    }

    /// Rows `start..start + len`.
    pub fn rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let x = self.value(a);
        let t = Tensor::new(len, x.cols, x.data[start * x.cols..(start + len) * x.cols].to_vec());
        self.push(t, Op::Rows(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                let x = self.value(*p);
                assert_eq!(x.rows, rows, "concat rows");
                data.extend_from_slice(x.row(i));
            }
        }
        self.push(Tensor::new(rows, cols, data), Op::ConcatCols(parts.to_vec()))
    }

    /// Row-wise softmax. Under a causal mask row `i` only covers columns
    /// `0..=i` and the rest are exactly zero.
    pub fn softmax_rows(&mut self, a: Var, causal: bool) -> Var {
        let x = self.value(a);
        let mut data = vec![0.0; x.data.len()];
        for i in 0..x.rows {
            let width = if causal { (i + 1).min(x.cols) } else { x.cols };
            let row = &x.row(i)[..width];
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for (j, v) in row.iter().enumerate() {
                let e = (v - m).exp();
                data[i * x.cols + j] = e;
                s += e;
            }
            for v in &mut data[i * x.cols..i * x.cols + row.len()] {
                *v /= s;
            }
        }
        let t = Tensor::new(x.rows, x.cols, data);
        self.push(t, Op::SoftmaxRows(a))
    }

    /// Log-softmax of a `1 × n` row over the entries where `mask` holds;
    /// other entries are `-inf`.
    pub fn masked_log_softmax(&mut self, a: Var, mask: &[bool]) -> Var {
        let x = self.value(a);
        assert!(x.rows == 1 && x.cols == mask.len(), "mask shape");
        let m = x.data.iter().zip(mask).filter(|(_, k)| **k).map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = x.data.iter().zip(mask).filter(|(_, k)| **k).map(|(v, _)| (v - m).exp()).sum();
        let lse = m + s.ln();
        let data = x.data.iter().zip(mask).map(|(v, k)| if *k { v - lse } else { f64::NEG_INFINITY }).collect();
        let t = Tensor::new(1, x.cols, data);
        self.push(t, Op::LogSoftmaxMasked(a, mask.to_vec()))
    }

    /// Per-row normalization with learned `1 × cols` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let (t, g, b) = (self.value(x), self.value(gamma), self.value(beta));
        let c = t.cols;
        let mut xhat = vec![0.0; t.data.len()];
        let mut rstd = vec![0.0; t.rows];
        let mut out = vec![0.0; t.data.len()];
        for i in 0..t.rows {
            let row = t.row(i);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let r = 1.0 / (var + LN_EPS).sqrt();
            rstd[i] = r;
            for j in 0..c {
                let h = (row[j] - mean) * r;
                xhat[i * c + j] = h;
                out[i * c + j] = h * g.data[j] + b.data[j];
            }
        }
        let v = Tensor::new(t.rows, c, out);
        self.push(v, Op::LayerNorm { x, gamma, beta, xhat, rstd })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Tensor::new(1, 1, vec![s]), Op::Sum(a))
    }

    /// Column means as a `1 × cols` row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut data = vec![0.0; x.cols];
        for i in 0..x.rows {
            for (d, v) in data.iter_mut().zip(x.row(i)) {
                *d += v;
            }
        }
        for d in &mut data {
            *d /= x.rows as f64;
        }
        let t = Tensor::new(1, x.cols, data);
        self.push(t, Op::MeanRows(a))
    }

    /// Gradient of the scalar `out` with respect to the parameter vector.
    pub fn backward(&self, out: Var) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        self.backward_into(out, 1.0, &mut grad);
        grad
    }

    /// Adds `scale · ∂out/∂params` into `grad`.
    pub fn backward_into(&self, out: Var, scale: f64, grad: &mut [f64]) {
        assert_eq!(self.value(out).data.len(), 1, "backward from a non-scalar");
        let mut g: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        g[out.0] = Some(vec![scale]);
        fn acc(g: &mut [Option<Vec<f64>>], v: Var, d: Vec<f64>) {
            match &mut g[v.0] {
                Some(x) => x.iter_mut().zip(&d).for_each(|(a, b)| *a += b),
                slot => *slot = Some(d),
            }
        }
        for idx in (0..=out.0).rev() {
            let Some(go) = g[idx].take() else { continue };
            let node = &self.nodes[idx];
            let val = &node.value;
            match &node.op {
                Op::Input => {}
                Op::Param(off) => {
                    for (dst, v) in grad[*off..*off + go.len()].iter_mut().zip(&go) {
                        *dst += v;
                    }
                }
                Op::MatMul(a, b) => {
                    let gt = Tensor::new(val.rows, val.cols, go);
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(&mut g, *a, matmul(&gt, &transpose(bv)).data);
                    acc(&mut g, *b, matmul(&transpose(av), &gt).data);
                }
                Op::Add(a, b) => {
                    acc(&mut g, *a, go.clone());
                    acc(&mut g, *b, go);
                }
                Op::Sub(a, b) => {
                    acc(&mut g, *b, go.iter().map(|v| -v).collect());
                    acc(&mut g, *a, go);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.value(*a).data, &self.value(*b).data);
                    acc(&mut g, *a, go.iter().zip(bv).map(|(d, y)| d * y).collect());
                    acc(&mut g, *b, go.iter().zip(av).map(|(d, x)| d * x).collect());
                }
                Op::Div(a, b) => {
                    let (av, bv) = (&self.value(*a).data, &self.value(*b).data);
                    acc(&mut g, *a, go.iter().zip(bv).map(|(d, y)| d / y).collect());
                    acc(&mut g, *b, go.iter().zip(av.iter().zip(bv)).map(|(d, (x, y))| -d * x / (y * y)).collect());
                }
                Op::AddRow(a, r) => {
                    let mut dr = vec![0.0; val.cols];
                    for chunk in go.chunks(val.cols) {
                        dr.iter_mut().zip(chunk).for_each(|(s, v)| *s += v);
                    }
                    acc(&mut g, *r, dr);
                    acc(&mut g, *a, go);
                }
                Op::Scale(a, c) => acc(&mut g, *a, go.iter().map(|v| v * c).collect()),
                Op::Exp(a) => acc(&mut g, *a, go.iter().zip(&val.data).map(|(d, y)| d * y).collect()),
                Op::Ln(a) => {
                    let x = &self.value(*a).data;
                    acc(&mut g, *a, go.iter().zip(x).map(|(d, x)| d / x).collect());
                }
                Op::Softplus(a) => {
                    let x = &self.value(*a).data;
                    acc(&mut g, *a, go.iter().zip(x).map(|(d, x)| d * sigmoid(*x)).collect());
                }
                Op::Gelu(a) => {
                    let x = &self.value(*a).data;
                    acc(&mut g, *a, go.iter().zip(x).map(|(d, x)| d * gelu_grad(*x)).collect());
                }
                Op::Square(a) => {
                    let x = &self.value(*a).data;
                    acc(&mut g, *a, go.iter().zip(x).map(|(d, x)| 2.0 * d * x).collect());
                }
                Op::Clamp(a, lo, hi) => {
                    let x = &self.value(*a).data;
                    acc(&mut g, *a, go.iter().zip(x).map(|(d, x)| if *x > *lo && *x < *hi { *d } else { 0.0 }).collect());
                }
                Op::Min(a, b) => {
                    let (av, bv) = (&self.value(*a).data, &self.value(*b).data);
                    let left: Vec<bool> = av.iter().zip(bv).map(|(x, y)| x <= y).collect();
                    acc(&mut g, *a, go.iter().zip(&left).map(|(d, l)| if *l { *d } else { 0.0 }).collect());
                    acc(&mut g, *b, go.iter().zip(&left).map(|(d, l)| if *l { 0.0 } else { *d }).collect());
                }
                Op::Transpose(a) => acc(&mut g, *a, transpose(&Tensor::new(val.rows, val.cols, go)).data),
                Op::Cols(a, start) => {
                    let src = self.value(*a);
                    let mut d = vec![0.0; src.data.len()];
                    for i in 0..val.rows {
                        d[i * src.cols + start..i * src.cols + start + val.cols]
                            .copy_from_slice(&go[i * val.cols..(i + 1) * val.cols]);
                    }
                    acc(&mut g, *a, d);
                }
                Op::Rows(a, start) => {
                    let src = self.value(*a);
                    let mut d = vec![0.0; src.data.len()];
                    d[start * src.cols..start * src.cols + go.len()].copy_from_slice(&go);
                    acc(&mut g, *a, d);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let w = self.value(*p).cols;
                        let mut d = Vec::with_capacity(val.rows * w);
                        for i in 0..val.rows {
                            d.extend_from_slice(&go[i * val.cols + offset..i * val.cols + offset + w]);
                        }
                        acc(&mut g, *p, d);
                        offset += w;
                    }
                }
                Op::SoftmaxRows(a) => {
                    let c = val.cols;
                    let mut d = vec![0.0; go.len()];
                    for i in 0..val.rows {
                        let y = &val.data[i * c..(i + 1) * c];
                        let gr = &go[i * c..(i + 1) * c];
                        let dot: f64 = y.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for j in 0..c {
                            d[i * c + j] = y[j] * (gr[j] - dot);
                        }
                    }
                    acc(&mut g, *a, d);
                }
                Op::LogSoftmaxMasked(a, mask) => {
                    let total: f64 = go.iter().zip(mask).filter(|(_, k)| **k).map(|(d, _)| *d).sum();
                    let d = go
                        .iter()
                        .zip(&val.data)
                        .zip(mask)
                        .map(|((d, y), k)| if *k { d - y.exp() * total } else { 0.0 })
                        .collect();
                    acc(&mut g, *a, d);
                }
                Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                    let c = val.cols;
                    let gv = &self.value(*gamma).data;
                    let mut dg = vec![0.0; c];
                    let mut db = vec![0.0; c];
                    let mut dx = vec![0.0; go.len()];
                    for i in 0..val.rows {
                        let gr = &go[i * c..(i + 1) * c];
                        let xh = &xhat[i * c..(i + 1) * c];
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for j in 0..c {
                            dg[j] += gr[j] * xh[j];
                            db[j] += gr[j];
                            let dh = gr[j] * gv[j];
                            m1 += dh;
                            m2 += dh * xh[j];
                        }
                        m1 /= c as f64;
                        m2 /= c as f64;
                        for j in 0..c {
                            dx[i * c + j] = rstd[i] * (gr[j] * gv[j] - m1 - xh[j] * m2);
                        }
                    }
                    acc(&mut g, *gamma, dg);
                    acc(&mut g, *beta, db);
                    acc(&mut g, *x, dx);
                }
                Op::Sum(a) => {
                    let n = self.value(*a).data.len();
                    acc(&mut g, *a, vec![go[0]; n]);
                }
                Op::MeanRows(a) => {
                    let src = self.value(*a);
                    let k = 1.0 / src.rows as f64;
                    let mut d = Vec::with_capacity(src.data.len());
                    for _ in 0..src.rows {
                        d.extend(go.iter().map(|v| v * k));
                    }
                    acc(&mut g, *a, d);
                }
            }
        }
    }
}

/// Central finite-difference gradient of `f` at `params`.
pub fn numeric_gradient(params: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + step;
            let up = f(&p);
            p[i] = orig - step;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, tiny)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(params: &[f64], build: impl Fn(&mut Graph) -> Var) {
        let mut g = Graph::new(params);
        let out = build(&mut g);
        let analytic = g.backward(out);
        let numeric = numeric_gradient(params, 1e-5, |p| {
            let mut g = Graph::new(p);
            let o = build(&mut g);
            g.value(o).scalar()
        });
        let err = relative_error(&analytic, &numeric);
        assert!(err < 1e-7, "relative error {err:e}");
    }

    fn params(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i as f64) * 0.713).sin() * 0.9 + 0.05).collect()
    }

    #[test]
    fn matmul_and_elementwise() {
        check(&params(12), |g| {
            let a = g.param(0, 2, 3);
            let b = g.param(6, 3, 2);
            let c = g.matmul(a, b);
            let d = g.gelu(c);
            let e = g.square(d);
            let f = g.softplus(e);
            let t = g.transpose(c);
            let m = g.matmul(f, t);
            let x = g.exp(m);
            g.sum(x)
        });
    }

    #[test]
    fn division_log_min_clamp() {
        check(&params(8), |g| {
            let a = g.param(0, 1, 4);
            let b = g.param(4, 1, 4);
            let sb = g.softplus(b);
            let q = g.div(a, sb);
            let l = g.ln(sb);
            let c = g.clamp(q, -0.3, 0.3);
            let m = g.min(c, l);
            let s = g.sub(m, a);
            let k = g.mul(s, q);
            g.sum(k)
        });
    }

    #[test]
    fn structural_ops() {
        check(&params(16), |g| {
            let a = g.param(0, 4, 3);
            let r = g.param(12, 1, 3);
            let gamma = g.param(13, 1, 3);
            let x = g.add_row(a, r);
            let beta = g.rows(x, 1, 1);
            let n = g.layer_norm(x, gamma, beta);
            let left = g.cols(n, 0, 2);
            let right = g.cols(x, 1, 2);
            let cat = g.concat_cols(&[left, right]);
            let t = g.transpose(cat);
            let s = g.matmul(cat, t);
            let p = g.softmax_rows(s, true);
            let q = g.softmax_rows(s, false);
            let p = g.mul(p, q);
            let pm = g.mean_rows(p);
            let w = g.scale(pm, 3.0);
            let sq = g.square(w);
            g.sum(sq)
        });
    }

    #[test]
    fn masked_log_softmax_gradient_and_values() {
        let mask = [true, false, true, true, false];
        check(&params(5), |g| {
            let a = g.param(0, 1, 5);
            let l = g.masked_log_softmax(a, &mask);
            let picked = g.cols(l, 2, 1);
            let other = g.cols(l, 3, 1);
            let s = g.scale(other, 0.5);
            let t = g.add(picked, s);
            g.sum(t)
        });
        let p = params(5);
        let mut g = Graph::new(&p);
        let a = g.param(0, 1, 5);
        let l = g.masked_log_softmax(a, &mask);
        let v = g.value(l);
        let total: f64 = v.data.iter().zip(mask).filter(|(_, k)| *k).map(|(x, _)| x.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(v.data[1], f64::NEG_INFINITY);
        assert_eq!(v.data[4].exp(), 0.0);
    }

    #[test]
    fn causal_rows_ignore_future() {
        let p = vec![0.0; 0];
        let mut g = Graph::new(&p);
        let s = g.input(Tensor::new(3, 3, vec![1.0, 50.0, 50.0, 2.0, 3.0, 50.0, 0.0, 0.0, 0.0]));
        let y = g.softmax_rows(s, true);
        let v = g.value(y);
        assert_eq!(v.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(v.at(1, 2), 0.0);
        assert!((v.row(2).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
