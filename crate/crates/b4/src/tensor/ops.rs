use super::tape::{Tape, Var};
use super::Tensor;
use crate::error::TensorError;

/// Recorded operation kinds. Clone is cheap except for the gather/mask
/// payloads, which are small at the scales this crate targets.
#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    MatMul(usize, usize),
    Transpose(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddRow(usize, usize),
    Exp(usize),
    Ln(usize),
    Tanh(usize),
    SoftmaxRows(usize),
    LayerNormRows {
        x: usize,
        gain: usize,
        bias: usize,
        eps: f64,
    },
    RowSums(usize),
    SumAll(usize),
    ConcatRows(usize, usize),
    ConcatCols(usize, usize),
    GatherRows(usize, Vec<usize>),
    RowDot(usize, usize),
    MaskedLseRows(usize, Vec<bool>),
}

fn matmul_raw(a: &Tensor, b: &Tensor) -> Vec<f64> {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a.data[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

fn transpose_raw(t: &Tensor) -> Vec<f64> {
    let (m, n) = (t.rows(), t.cols());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = t.data[i * n + j];
        }
    }
    out
}

fn softmax_rows_raw(t: &Tensor) -> Vec<f64> {
    let (m, n) = (t.rows(), t.cols());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &t.data[i * n..(i + 1) * n];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for j in 0..n {
            let e = (row[j] - max).exp();
            out[i * n + j] = e;
            sum += e;
        }
        for j in 0..n {
            out[i * n + j] /= sum;
        }
    }
    out
}

/// Masked row softmax used by the backward pass of masked log-sum-exp.
fn masked_softmax_row(row: &[f64], mask: &[bool]) -> Vec<f64> {
    let max = row
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![0.0; row.len()];
    let mut sum = 0.0;
    for (j, (&v, &m)) in row.iter().zip(mask).enumerate() {
        if m {
            let e = (v - max).exp();
            out[j] = e;
            sum += e;
        }
    }
    if sum > 0.0 {
        for o in &mut out {
            *o /= sum;
        }
    }
    out
}

impl Tape {
    fn finish(
        &mut self,
        op: Op,
        name: &'static str,
        shape: Vec<usize>,
        data: Vec<f64>,
        parents: &[Var],
    ) -> Result<Var, TensorError> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op: name });
        }
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        Ok(self.push(Tensor { shape, data }, op, requires_grad))
    }

    fn shape2(&self, v: Var, op: &'static str) -> Result<(usize, usize), TensorError> {
        let s = &self.value(v).shape;
        if s.len() != 2 {
            return Err(TensorError::Dimension {
                op,
                detail: format!("expected 2-D tensor, got shape {s:?}"),
            });
        }
        Ok((s[0], s[1]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (m, k) = self.shape2(a, "matmul")?;
        let (k2, n) = self.shape2(b, "matmul")?;
        if k != k2 {
            return Err(TensorError::Dimension {
                op: "matmul",
                detail: format!("inner dims {k} vs {k2}"),
            });
        }
        let data = matmul_raw(self.value(a), self.value(b));
        self.finish(Op::MatMul(a.0, b.0), "matmul", vec![m, n], data, &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, TensorError> {
        let (m, n) = self.shape2(a, "transpose")?;
        let data = transpose_raw(self.value(a));
        self.finish(Op::Transpose(a.0), "transpose", vec![n, m], data, &[a])
    }

    fn elementwise(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var, TensorError> {
        if self.value(a).shape != self.value(b).shape {
            return Err(TensorError::Dimension {
                op: name,
                detail: format!(
                    "shape {:?} vs {:?}",
                    self.value(a).shape,
                    self.value(b).shape
                ),
            });
        }
        let shape = self.value(a).shape.clone();
        let data = self
            .value(a)
            .data
            .iter()
            .zip(&self.value(b).data)
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.finish(op, name, shape, data, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.elementwise(a, b, "add", |x, y| x + y, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.elementwise(a, b, "sub", |x, y| x - y, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.elementwise(a, b, "mul", |x, y| x * y, Op::Mul(a.0, b.0))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var, TensorError> {
        let shape = self.value(a).shape.clone();
        let data = self.value(a).data.iter().map(|&x| x * k).collect();
        self.finish(Op::Scale(a.0, k), "scale", shape, data, &[a])
    }

    /// Row-wise bias: `a` is [m,n], `bias` is [1,n], added to every row.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var, TensorError> {
        let (m, n) = self.shape2(a, "add_row")?;
        let (bm, bn) = self.shape2(bias, "add_row")?;
        if bm != 1 || bn != n {
            return Err(TensorError::Dimension {
                op: "add_row",
                detail: format!("bias shape [{bm},{bn}] against [{m},{n}]"),
            });
        }
        let mut data = self.value(a).data.clone();
        let bdata = self.value(bias).data.clone();
        for i in 0..m {
            for j in 0..n {
                data[i * n + j] += bdata[j];
            }
        }
        self.finish(Op::AddRow(a.0, bias.0), "add_row", vec![m, n], data, &[a, bias])
    }

    fn unary(
        &mut self,
        a: Var,
        name: &'static str,
        f: impl Fn(f64) -> f64,
        op: Op,
    ) -> Result<Var, TensorError> {
        let shape = self.value(a).shape.clone();
        let data = self.value(a).data.iter().map(|&x| f(x)).collect();
        self.finish(op, name, shape, data, &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary(a, "exp", f64::exp, Op::Exp(a.0))
    }

    pub fn ln(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary(a, "ln", f64::ln, Op::Ln(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary(a, "tanh", f64::tanh, Op::Tanh(a.0))
    }

    /// Row-wise softmax, shift-invariant per row.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        let (m, n) = self.shape2(a, "softmax_rows")?;
        if n == 0 {
            return Err(TensorError::Empty { op: "softmax_rows" });
        }
        let data = softmax_rows_raw(self.value(a));
        self.finish(Op::SoftmaxRows(a.0), "softmax_rows", vec![m, n], data, &[a])
    }

    /// Per-row layer normalization with learned gain and bias (each [1,n]).
    pub fn layer_norm_rows(
        &mut self,
        x: Var,
        gain: Var,
        bias: Var,
        eps: f64,
    ) -> Result<Var, TensorError> {
        let (m, n) = self.shape2(x, "layer_norm_rows")?;
        let (gm, gn) = self.shape2(gain, "layer_norm_rows")?;
        let (bm, bn) = self.shape2(bias, "layer_norm_rows")?;
        if gm != 1 || gn != n || bm != 1 || bn != n {
            return Err(TensorError::Dimension {
                op: "layer_norm_rows",
                detail: format!("gain [{gm},{gn}] / bias [{bm},{bn}] against [{m},{n}]"),
            });
        }
        let xv = self.value(x).data.clone();
        let g = self.value(gain).data.clone();
        let b = self.value(bias).data.clone();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &xv[i * n..(i + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for j in 0..n {
                data[i * n + j] = g[j] * (row[j] - mean) * inv + b[j];
            }
        }
        self.finish(
            Op::LayerNormRows {
                x: x.0,
                gain: gain.0,
                bias: bias.0,
                eps,
            },
            "layer_norm_rows",
            vec![m, n],
            data,
            &[x, gain, bias],
        )
    }

    /// Sum over each row: [m,n] -> [m,1].
    pub fn row_sums(&mut self, a: Var) -> Result<Var, TensorError> {
        let (m, n) = self.shape2(a, "row_sums")?;
        let v = self.value(a);
        let data = (0..m)
            .map(|i| v.data[i * n..(i + 1) * n].iter().sum())
            .collect();
        self.finish(Op::RowSums(a.0), "row_sums", vec![m, 1], data, &[a])
    }

    /// Sum of all entries -> scalar [1,1].
    pub fn sum_all(&mut self, a: Var) -> Result<Var, TensorError> {
        let total: f64 = self.value(a).data.iter().sum();
        self.finish(Op::SumAll(a.0), "sum_all", vec![1, 1], vec![total], &[a])
    }

    /// Vertical concatenation: [m,n] over [p,n] -> [m+p,n].
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (m, n) = self.shape2(a, "concat_rows")?;
        let (p, n2) = self.shape2(b, "concat_rows")?;
        if n != n2 {
            return Err(TensorError::Dimension {
                op: "concat_rows",
                detail: format!("widths {n} vs {n2}"),
            });
        }
        let mut data = self.value(a).data.clone();
        data.extend_from_slice(&self.value(b).data);
        self.finish(
            Op::ConcatRows(a.0, b.0),
            "concat_rows",
            vec![m + p, n],
            data,
            &[a, b],
        )
    }

    /// Horizontal concatenation: [m,n] beside [m,p] -> [m,n+p].
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (m, n) = self.shape2(a, "concat_cols")?;
        let (m2, p) = self.shape2(b, "concat_cols")?;
        if m != m2 {
            return Err(TensorError::Dimension {
                op: "concat_cols",
                detail: format!("heights {m} vs {m2}"),
            });
        }
        let av = &self.value(a).data;
        let bv = &self.value(b).data;
        let mut data = Vec::with_capacity(m * (n + p));
        for i in 0..m {
            data.extend_from_slice(&av[i * n..(i + 1) * n]);
            data.extend_from_slice(&bv[i * p..(i + 1) * p]);
        }
        self.finish(
            Op::ConcatCols(a.0, b.0),
            "concat_cols",
            vec![m, n + p],
            data,
            &[a, b],
        )
    }

    /// Select rows by index (repeats allowed); backward scatter-adds.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var, TensorError> {
        let (m, n) = self.shape2(a, "gather_rows")?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= m) {
            return Err(TensorError::Dimension {
                op: "gather_rows",
                detail: format!("row index {bad} out of range for {m} rows"),
            });
        }
        let v = &self.value(a).data;
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend_from_slice(&v[i * n..(i + 1) * n]);
        }
        self.finish(
            Op::GatherRows(a.0, indices.to_vec()),
            "gather_rows",
            vec![indices.len(), n],
            data,
            &[a],
        )
    }

    /// Row-pairwise dot products of two [m,n] tensors -> [m,1].
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (m, n) = self.shape2(a, "row_dot")?;
        if self.value(b).shape != vec![m, n] {
            return Err(TensorError::Dimension {
                op: "row_dot",
                detail: format!(
                    "shape {:?} vs {:?}",
                    self.value(a).shape,
                    self.value(b).shape
                ),
            });
        }
        let av = &self.value(a).data;
        let bv = &self.value(b).data;
        let data = (0..m)
            .map(|i| {
                av[i * n..(i + 1) * n]
                    .iter()
                    .zip(&bv[i * n..(i + 1) * n])
                    .map(|(x, y)| x * y)
                    .sum()
            })
            .collect();
        self.finish(Op::RowDot(a.0, b.0), "row_dot", vec![m, 1], data, &[a, b])
    }

    /// Per-row log-sum-exp over the masked entries -> [m,1]. Rows whose
    /// mask is empty produce 0 and carry no gradient. Max-shifted for
    /// stability; the shift is value-invariant so gradients are exact.
    pub fn masked_lse_rows(&mut self, a: Var, mask: &[bool]) -> Result<Var, TensorError> {
        let (m, n) = self.shape2(a, "masked_lse_rows")?;
        if mask.len() != m * n {
            return Err(TensorError::Dimension {
                op: "masked_lse_rows",
                detail: format!("mask length {} for [{m},{n}]", mask.len()),
            });
        }
        let v = &self.value(a).data;
        let mut data = vec![0.0; m];
        for i in 0..m {
            let row = &v[i * n..(i + 1) * n];
            let mrow = &mask[i * n..(i + 1) * n];
            if !mrow.iter().any(|&x| x) {
                continue;
            }
            let max = row
                .iter()
                .zip(mrow)
                .filter(|(_, m)| **m)
                .map(|(v, _)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row
                .iter()
                .zip(mrow)
                .filter(|(_, m)| **m)
                .map(|(v, _)| (v - max).exp())
                .sum();
            data[i] = sum.ln() + max;
        }
        self.finish(
            Op::MaskedLseRows(a.0, mask.to_vec()),
            "masked_lse_rows",
            vec![m, 1],
            data,
            &[a],
        )
    }

    /// Mean of all entries -> scalar.
    pub fn mean_all(&mut self, a: Var) -> Result<Var, TensorError> {
        let n = self.value(a).numel();
        if n == 0 {
            return Err(TensorError::Empty { op: "mean_all" });
        }
        let s = self.sum_all(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// softmax(q·kᵀ/scale)·v — the attention core shared by P2C and the
    /// encoder blocks.
    pub fn scaled_dot_attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        scale: f64,
    ) -> Result<Var, TensorError> {
        if scale <= 0.0 {
            return Err(TensorError::Config(format!(
                "attention scale must be positive, got {scale}"
            )));
        }
        let kt = self.transpose(k)?;
        let logits = self.matmul(q, kt)?;
        let scaled = self.scale(logits, 1.0 / scale)?;
        let weights = self.softmax_rows(scaled)?;
        self.matmul(weights, v)
    }
}

impl Op {
    /// Propagate `upstream` (gradient of the loss w.r.t. node `idx`)
    /// into this op's parents.
    pub(crate) fn accumulate(
        &self,
        tape: &mut Tape,
        idx: usize,
        upstream: &[f64],
    ) -> Result<(), TensorError> {
        match self {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let av = tape.nodes[*a].value.clone();
                let bv = tape.nodes[*b].value.clone();
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                let up = Tensor {
                    shape: vec![m, n],
                    data: upstream.to_vec(),
                };
                // dA = dC · Bᵀ
                let bt = Tensor {
                    shape: vec![n, k],
                    data: transpose_raw(&bv),
                };
                tape.add_grad(*a, &matmul_raw(&up, &bt));
                // dB = Aᵀ · dC
                let at = Tensor {
                    shape: vec![k, m],
                    data: transpose_raw(&av),
                };
                tape.add_grad(*b, &matmul_raw(&at, &up));
            }
            Op::Transpose(a) => {
                let (n, m) = {
                    let s = &tape.nodes[idx].value.shape;
                    (s[0], s[1])
                };
                let up = Tensor {
                    shape: vec![n, m],
                    data: upstream.to_vec(),
                };
                tape.add_grad(*a, &transpose_raw(&up));
            }
            Op::Add(a, b) => {
                tape.add_grad(*a, upstream);
                tape.add_grad(*b, upstream);
            }
            Op::Sub(a, b) => {
                tape.add_grad(*a, upstream);
                let neg: Vec<f64> = upstream.iter().map(|g| -g).collect();
                tape.add_grad(*b, &neg);
            }
            Op::Mul(a, b) => {
                let av = tape.nodes[*a].value.data.clone();
                let bv = tape.nodes[*b].value.data.clone();
                let da: Vec<f64> = upstream.iter().zip(&bv).map(|(g, y)| g * y).collect();
                let db: Vec<f64> = upstream.iter().zip(&av).map(|(g, x)| g * x).collect();
                tape.add_grad(*a, &da);
                tape.add_grad(*b, &db);
            }
            Op::Scale(a, k) => {
                let da: Vec<f64> = upstream.iter().map(|g| g * k).collect();
                tape.add_grad(*a, &da);
            }
            Op::AddRow(a, bias) => {
                tape.add_grad(*a, upstream);
                let n = tape.nodes[*bias].value.numel();
                let mut db = vec![0.0; n];
                for (i, g) in upstream.iter().enumerate() {
                    db[i % n] += g;
                }
                tape.add_grad(*bias, &db);
            }
            Op::Exp(a) => {
                let y = tape.nodes[idx].value.data.clone();
                let da: Vec<f64> = upstream.iter().zip(&y).map(|(g, v)| g * v).collect();
                tape.add_grad(*a, &da);
            }
            Op::Ln(a) => {
                let x = tape.nodes[*a].value.data.clone();
                let da: Vec<f64> = upstream.iter().zip(&x).map(|(g, v)| g / v).collect();
                tape.add_grad(*a, &da);
            }
            Op::Tanh(a) => {
                let y = tape.nodes[idx].value.data.clone();
                let da: Vec<f64> = upstream
                    .iter()
                    .zip(&y)
                    .map(|(g, v)| g * (1.0 - v * v))
                    .collect();
                tape.add_grad(*a, &da);
            }
            Op::SoftmaxRows(a) => {
                let s = tape.nodes[idx].value.clone();
                let (m, n) = (s.rows(), s.cols());
                let mut da = vec![0.0; m * n];
                for i in 0..m {
                    let srow = &s.data[i * n..(i + 1) * n];
                    let grow = &upstream[i * n..(i + 1) * n];
                    let dot: f64 = srow.iter().zip(grow).map(|(s, g)| s * g).sum();
                    for j in 0..n {
                        da[i * n + j] = srow[j] * (grow[j] - dot);
                    }
                }
                tape.add_grad(*a, &da);
            }
            Op::LayerNormRows { x, gain, bias, eps } => {
                let xv = tape.nodes[*x].value.clone();
                let g = tape.nodes[*gain].value.data.clone();
                let (m, n) = (xv.rows(), xv.cols());
                let nf = n as f64;
                let mut dx = vec![0.0; m * n];
                let mut dg = vec![0.0; n];
                let mut db = vec![0.0; n];
                for i in 0..m {
                    let row = &xv.data[i * n..(i + 1) * n];
                    let grow = &upstream[i * n..(i + 1) * n];
                    let mean = row.iter().sum::<f64>() / nf;
                    let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
                    let inv = 1.0 / (var + eps).sqrt();
                    let xhat: Vec<f64> = row.iter().map(|v| (v - mean) * inv).collect();
                    for j in 0..n {
                        dg[j] += grow[j] * xhat[j];
                        db[j] += grow[j];
                    }
                    let gl: Vec<f64> = grow.iter().zip(&g).map(|(gr, gj)| gr * gj).collect();
                    let mean_gl = gl.iter().sum::<f64>() / nf;
                    let mean_gl_xhat =
                        gl.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / nf;
                    for j in 0..n {
                        dx[i * n + j] = (gl[j] - mean_gl - xhat[j] * mean_gl_xhat) * inv;
                    }
                }
                tape.add_grad(*x, &dx);
                tape.add_grad(*gain, &dg);
                tape.add_grad(*bias, &db);
            }
            Op::RowSums(a) => {
                let (m, n) = {
                    let s = &tape.nodes[*a].value.shape;
                    (s[0], s[1])
                };
                let mut da = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        da[i * n + j] = upstream[i];
                    }
                }
                tape.add_grad(*a, &da);
            }
            Op::SumAll(a) => {
                let numel = tape.nodes[*a].value.numel();
                let da = vec![upstream[0]; numel];
                tape.add_grad(*a, &da);
            }
            Op::ConcatRows(a, b) => {
                let an = tape.nodes[*a].value.numel();
                tape.add_grad(*a, &upstream[..an]);
                tape.add_grad(*b, &upstream[an..]);
            }
            Op::ConcatCols(a, b) => {
                let (m, n) = {
                    let s = &tape.nodes[*a].value.shape;
                    (s[0], s[1])
                };
                let p = tape.nodes[*b].value.cols();
                let mut da = vec![0.0; m * n];
                let mut db = vec![0.0; m * p];
                for i in 0..m {
                    da[i * n..(i + 1) * n].copy_from_slice(&upstream[i * (n + p)..i * (n + p) + n]);
                    db[i * p..(i + 1) * p]
                        .copy_from_slice(&upstream[i * (n + p) + n..(i + 1) * (n + p)]);
                }
                tape.add_grad(*a, &da);
                tape.add_grad(*b, &db);
            }
            Op::GatherRows(a, indices) => {
                let (m, n) = {
                    let s = &tape.nodes[*a].value.shape;
                    (s[0], s[1])
                };
                let mut da = vec![0.0; m * n];
                for (r, &src) in indices.iter().enumerate() {
                    for j in 0..n {
                        da[src * n + j] += upstream[r * n + j];
                    }
                }
                tape.add_grad(*a, &da);
            }
            Op::RowDot(a, b) => {
                let av = tape.nodes[*a].value.clone();
                let bv = tape.nodes[*b].value.clone();
                let (m, n) = (av.rows(), av.cols());
                let mut da = vec![0.0; m * n];
                let mut db = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        da[i * n + j] = upstream[i] * bv.data[i * n + j];
                        db[i * n + j] = upstream[i] * av.data[i * n + j];
                    }
                }
                tape.add_grad(*a, &da);
                tape.add_grad(*b, &db);
            }
            Op::MaskedLseRows(a, mask) => {
                let av = tape.nodes[*a].value.clone();
                let (m, n) = (av.rows(), av.cols());
                let mut da = vec![0.0; m * n];
                for i in 0..m {
                    let row = &av.data[i * n..(i + 1) * n];
                    let mrow = &mask[i * n..(i + 1) * n];
                    if !mrow.iter().any(|&x| x) {
                        continue;
                    }
                    let sm = masked_softmax_row(row, mrow);
                    for j in 0..n {
                        da[i * n + j] = upstream[i] * sm[j];
                    }
                }
                tape.add_grad(*a, &da);
            }
        }
        Ok(())
    }
}
