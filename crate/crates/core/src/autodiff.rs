//! Minimal reverse-mode differentiation over dense row-major matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Parameter leaves
//! borrow their values from the flat parameter vector and remember their
//! offset, so [`Tape::backward`] can scatter gradients straight into a
//! gradient vector of the same layout.

use std::borrow::Cow;
use std::rc::Rc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Param { offset: usize },
    MatMul(Var, Var),
    MatMulTransB(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Relu(Var),
    Mask(Var, Vec<f64>),
    Scale(Var, f64),
    Concat(Vec<Var>),
    RepeatRows(Var),
    /// `a + bias[col] * pattern`
    AddPattern { a: Var, bias: Var, col: usize, pattern: Rc<Vec<f64>> },
    SoftmaxRows(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
}

struct Node<'a> {
    rows: usize,
    cols: usize,
    value: Cow<'a, [f64]>,
    op: Op,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// `c += a * b` for `a: m x k`, `b: k x n`.
pub fn gemm(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += aip * bv;
            }
        }
    }
}

/// `c += a^T * b` for `a: k x m`, `b: k x n`.
fn gemm_tn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let api = a[p * m + i];
            if api == 0.0 {
                continue;
            }
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += api * bv;
            }
        }
    }
}

/// `c += a * b^T` for `a: m x k`, `b: n x k`.
fn gemm_nt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            c[i * n + j] += arow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::with_capacity(256) }
    }

    fn push(&mut self, rows: usize, cols: usize, value: Cow<'a, [f64]>, op: Op) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node { rows, cols, value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        self.push(rows, cols, Cow::Owned(value), Op::Leaf)
    }

    /// Leaf backed by `params[offset..offset + rows*cols]`.
    pub fn param(&mut self, params: &'a [f64], offset: usize, rows: usize, cols: usize) -> Var {
        let value = Cow::Borrowed(&params[offset..offset + rows * cols]);
        self.push(rows, cols, value, Op::Param { offset })
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        (self.nodes[v.0].rows, self.nodes[v.0].cols)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        assert_eq!(k, k2, "matmul shape mismatch");
        let mut out = vec![0.0; m * n];
        gemm(self.value(a), self.value(b), &mut out, m, k, n);
        self.push(m, n, Cow::Owned(out), Op::MatMul(a, b))
    }

    /// `a * b^T`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.shape(a);
        let (n, k2) = self.shape(b);
        assert_eq!(k, k2, "matmul_t shape mismatch");
        let mut out = vec![0.0; m * n];
        gemm_nt(self.value(a), self.value(b), &mut out, m, k, n);
        self.push(m, n, Cow::Owned(out), Op::MatMulTransB(a, b))
    }

    /// Adds a `1 x cols` row to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Var {
        let (m, n) = self.shape(a);
        assert_eq!(self.shape(bias), (1, n), "bias shape mismatch");
        let b = self.value(bias);
        let out: Vec<f64> = self.value(a).chunks(n).flat_map(|row| row.iter().zip(b).map(|(x, y)| x + y)).collect();
        let _ = m;
        self.push(m, n, Cow::Owned(out), Op::AddBias(a, bias))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (m, n) = self.shape(a);
        assert_eq!(self.shape(b), (m, n), "add shape mismatch");
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        self.push(m, n, Cow::Owned(out), Op::Add(a, b))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let out = self.value(a).iter().map(|&x| x.max(0.0)).collect();
        self.push(m, n, Cow::Owned(out), Op::Relu(a))
    }

    /// Elementwise product with a constant mask (dropout).
    pub fn mask(&mut self, a: Var, mask: Vec<f64>) -> Var {
        let (m, n) = self.shape(a);
        assert_eq!(mask.len(), m * n);
        let out = self.value(a).iter().zip(&mask).map(|(x, k)| x * k).collect();
        self.push(m, n, Cow::Owned(out), Op::Mask(a, mask))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let (m, n) = self.shape(a);
        let out = self.value(a).iter().map(|x| x * c).collect();
        self.push(m, n, Cow::Owned(out), Op::Scale(a, c))
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let m = self.shape(parts[0]).0;
        let widths: Vec<usize> = parts.iter().map(|&p| self.shape(p).1).collect();
        let n: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * n);
        for r in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                assert_eq!(self.shape(p).0, m, "concat row mismatch");
                out.extend_from_slice(&self.value(p)[r * w..(r + 1) * w]);
            }
        }
        self.push(m, n, Cow::Owned(out), Op::Concat(parts.to_vec()))
    }

    /// Broadcasts a `1 x cols` row to `rows x cols`.
    pub fn repeat_rows(&mut self, a: Var, rows: usize) -> Var {
        let (one, n) = self.shape(a);
        assert_eq!(one, 1);
        let out = self.value(a).repeat(rows);
        self.push(rows, n, Cow::Owned(out), Op::RepeatRows(a))
    }

    /// `a + bias[col] * pattern` with a constant pattern the shape of `a`.
    pub fn add_pattern(&mut self, a: Var, bias: Var, col: usize, pattern: Rc<Vec<f64>>) -> Var {
        let (m, n) = self.shape(a);
        assert_eq!(pattern.len(), m * n);
        let w = self.value(bias)[col];
        let out = self.value(a).iter().zip(pattern.iter()).map(|(x, p)| x + w * p).collect();
        self.push(m, n, Cow::Owned(out), Op::AddPattern { a, bias, col, pattern })
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let mut out = self.value(a).to_vec();
        for row in out.chunks_mut(n) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        self.push(m, n, Cow::Owned(out), Op::SoftmaxRows(a))
    }

    /// Per-row layer normalization with learned `1 x cols` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let (m, n) = self.shape(x);
        assert_eq!(self.shape(gain), (1, n));
        assert_eq!(self.shape(bias), (1, n));
        let xv = self.value(x);
        let (g, b) = (self.value(gain), self.value(bias));
        let mut xhat = vec![0.0; m * n];
        let mut inv_std = vec![0.0; m];
        let mut out = vec![0.0; m * n];
        for r in 0..m {
            let row = &xv[r * n..(r + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std[r] = is;
            for c in 0..n {
                let h = (row[c] - mean) * is;
                xhat[r * n + c] = h;
                out[r * n + c] = g[c] * h + b[c];
            }
        }
        self.push(m, n, Cow::Owned(out), Op::LayerNorm { x, gain, bias, xhat, inv_std })
    }

    /// Back-propagates `seed` (the gradient of some scalar with respect to
    /// `output`) and adds every parameter gradient into `grads`.
    pub fn backward(&self, output: Var, seed: &[f64], grads: &mut [f64]) {
        let mut adj: Vec<Option<Vec<f64>>> = (0..=output.0).map(|_| None).collect();
        adj[output.0] = Some(seed.to_vec());

        fn acc(adj: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            adj[v.0].get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=output.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            let (m, n) = (node.rows, node.cols);
            match &node.op {
                Op::Leaf => {}
                Op::Param { offset } => {
                    for (dst, src) in grads[*offset..offset + g.len()].iter_mut().zip(&g) {
                        *dst += src;
                    }
                }
                Op::MatMul(a, b) => {
                    let (_, k) = self.shape(*a);
                    let da = acc(&mut adj, *a, m * k);
                    gemm_nt(&g, self.value(*b), da, m, n, k);
                    let db = acc(&mut adj, *b, k * n);
                    gemm_tn(self.value(*a), &g, db, k, m, n);
                }
                Op::MatMulTransB(a, b) => {
                    let (_, k) = self.shape(*a);
                    let da = acc(&mut adj, *a, m * k);
                    gemm(&g, self.value(*b), da, m, n, k);
                    let db = acc(&mut adj, *b, n * k);
                    gemm_tn(&g, self.value(*a), db, n, m, k);
                }
                Op::AddBias(a, bias) => {
                    let da = acc(&mut adj, *a, m * n);
                    da.iter_mut().zip(&g).for_each(|(d, x)| *d += x);
                    let db = acc(&mut adj, *bias, n);
                    for row in g.chunks(n) {
                        db.iter_mut().zip(row).for_each(|(d, x)| *d += x);
                    }
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        let d = acc(&mut adj, v, m * n);
                        d.iter_mut().zip(&g).for_each(|(d, x)| *d += x);
                    }
                }
                Op::Relu(a) => {
                    let av = self.value(*a);
                    let da = acc(&mut adj, *a, m * n);
                    for ((d, x), &inp) in da.iter_mut().zip(&g).zip(av) {
                        if inp > 0.0 {
                            *d += x;
                        }
                    }
                }
                Op::Mask(a, mask) => {
                    let da = acc(&mut adj, *a, m * n);
                    for ((d, x), k) in da.iter_mut().zip(&g).zip(mask) {
                        *d += x * k;
                    }
                }
                Op::Scale(a, c) => {
                    let da = acc(&mut adj, *a, m * n);
                    da.iter_mut().zip(&g).for_each(|(d, x)| *d += c * x);
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        let dp = acc(&mut adj, p, m * w);
                        for r in 0..m {
                            for c in 0..w {
                                dp[r * w + c] += g[r * n + start + c];
                            }
                        }
                        start += w;
                    }
                }
                Op::RepeatRows(a) => {
                    let da = acc(&mut adj, *a, n);
                    for row in g.chunks(n) {
                        da.iter_mut().zip(row).for_each(|(d, x)| *d += x);
                    }
                }
                Op::AddPattern { a, bias, col, pattern } => {
                    let da = acc(&mut adj, *a, m * n);
                    da.iter_mut().zip(&g).for_each(|(d, x)| *d += x);
                    let width = self.shape(*bias).1;
                    let dw: f64 = g.iter().zip(pattern.iter()).map(|(x, p)| x * p).sum();
                    acc(&mut adj, *bias, width)[*col] += dw;
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let da = acc(&mut adj, *a, m * n);
                    for r in 0..m {
                        let (yr, gr) = (&y[r * n..(r + 1) * n], &g[r * n..(r + 1) * n]);
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for c in 0..n {
                            da[r * n + c] += yr[c] * (gr[c] - dot);
                        }
                    }
                }
                Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                    let gv = self.value(*gain);
                    let mut dgain = vec![0.0; n];
                    let mut dbias = vec![0.0; n];
                    let mut dx = vec![0.0; m * n];
                    for r in 0..m {
                        let gr = &g[r * n..(r + 1) * n];
                        let hr = &xhat[r * n..(r + 1) * n];
                        let mut sum_dh = 0.0;
                        let mut sum_dh_h = 0.0;
                        for c in 0..n {
                            dgain[c] += gr[c] * hr[c];
                            dbias[c] += gr[c];
                            let dh = gr[c] * gv[c];
                            sum_dh += dh;
                            sum_dh_h += dh * hr[c];
                        }
                        let scale = inv_std[r] / n as f64;
                        for c in 0..n {
                            let dh = gr[c] * gv[c];
                            dx[r * n + c] = scale * (n as f64 * dh - sum_dh - hr[c] * sum_dh_h);
                        }
                    }
                    let d = acc(&mut adj, *x, m * n);
                    d.iter_mut().zip(&dx).for_each(|(d, v)| *d += v);
                    let d = acc(&mut adj, *gain, n);
                    d.iter_mut().zip(&dgain).for_each(|(d, v)| *d += v);
                    let d = acc(&mut adj, *bias, n);
                    d.iter_mut().zip(&dbias).for_each(|(d, v)| *d += v);
                }
            }
        }
    }
}
