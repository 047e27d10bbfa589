//! Reverse-mode autodiff over dense 2-D arrays.
//!
//! A [`Tape`] is built fresh for every forward pass. Nodes are appended in
//! evaluation order, so a reverse sweep over the node list is a valid
//! topological order for backpropagation.

use ndarray::{Array2, Axis};

use crate::params::Params;
use crate::NnError;

pub type Result<T> = std::result::Result<T, NnError>;

/// BCE clamps probabilities into `[BCE_EPS, 1 - BCE_EPS]`.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Exp(Var),
    Clamp(Var, f64, f64),
    SoftmaxRows(Var),
    MaskedSoftmaxRows(Var),
    ConcatCols(Var, Var),
    MeanRows(Var),
    LookupRows(Var, Vec<usize>),
    Transpose(Var),
    OuterAdd(Var, Var),
    SumAll(Var),
    Reparam(Var, Var, Array2<f64>),
    Mse(Var, Array2<f64>),
    Bce(Var, Array2<f64>, Array2<f64>),
    Kl(Var, Var),
    CrossEntropy(Var, Vec<usize>),
}

struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
    param: Option<usize>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape(a: &Array2<f64>) -> (usize, usize) {
    a.dim()
}

fn shape_err(op: &'static str, shapes: &[(usize, usize)]) -> NnError {
    NnError::Shape {
        op,
        shapes: shapes.to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_row(row: ndarray::ArrayView1<f64>, mask: Option<ndarray::ArrayView1<f64>>) -> Vec<f64> {
    let allowed = |j: usize| mask.map_or(true, |m| m[j] != 0.0);
    let max = (0..row.len())
        .filter(|&j| allowed(j))
        .map(|j| row[j])
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; row.len()];
    }
    let e: Vec<f64> = (0..row.len())
        .map(|j| if allowed(j) { (row[j] - max).exp() } else { 0.0 })
        .collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn scalar(v: f64) -> Array2<f64> {
    Array2::from_elem((1, 1), v)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Differentiable input.
    pub fn var(&mut self, value: Array2<f64>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf bound to parameter `index` of `params`.
    pub fn param(&mut self, params: &Params, index: usize) -> Var {
        let v = self.var(params.value(index).clone());
        self.nodes[v.0].param = Some(index);
        v
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.ncols() != y.nrows() {
            return Err(shape_err("matmul", &[shape(x), shape(y)]));
        }
        let out = x.dot(y);
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.ncols() != y.ncols() {
            return Err(shape_err("matmul_t", &[shape(x), shape(y)]));
        }
        let out = x.dot(&y.t());
        Ok(self.push(out, Op::MatMulT(a, b), &[a, b]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (x, y) = (self.value(a), self.value(b));
        if x.dim() != y.dim() {
            return Err(shape_err(op, &[shape(x), shape(y)]));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a) + self.value(b);
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    /// Add a `1×F` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        if r.nrows() != 1 || r.ncols() != x.ncols() {
            return Err(shape_err("add_row", &[shape(x), shape(r)]));
        }
        let out = x + r;
        Ok(self.push(out, Op::AddRow(a, row), &[a, row]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a) - self.value(b);
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a) * self.value(b);
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a) * s;
        self.push(out, Op::Scale(a, s), &[a])
    }

    /// Gradient at exactly 0 is 0.
    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|v| v.max(0.0));
        self.push(out, Op::Relu(a), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).mapv(|v| if v > 0.0 { v } else { slope * v });
        self.push(out, Op::LeakyRelu(a, slope), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(sigmoid);
        self.push(out, Op::Sigmoid(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::exp);
        self.push(out, Op::Exp(a), &[a])
    }

    /// Clamp into `[lo, hi]`; no gradient outside the open interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let out = self.value(a).mapv(|v| v.clamp(lo, hi));
        self.push(out, Op::Clamp(a, lo, hi), &[a])
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = Array2::zeros(x.dim());
        for (i, row) in x.rows().into_iter().enumerate() {
            for (j, v) in softmax_row(row, None).into_iter().enumerate() {
                out[[i, j]] = v;
            }
        }
        self.push(out, Op::SoftmaxRows(a), &[a])
    }

    /// Row softmax restricted to entries where `mask != 0`; fully masked
    /// rows become zero.
    pub fn masked_softmax_rows(&mut self, a: Var, mask: Array2<f64>) -> Result<Var> {
        let x = self.value(a);
        if x.dim() != mask.dim() {
            return Err(shape_err("masked_softmax_rows", &[shape(x), shape(&mask)]));
        }
        let mut out = Array2::zeros(x.dim());
        for (i, row) in x.rows().into_iter().enumerate() {
            for (j, v) in softmax_row(row, Some(mask.row(i))).into_iter().enumerate() {
                out[[i, j]] = v;
            }
        }
        Ok(self.push(out, Op::MaskedSoftmaxRows(a), &[a]))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.nrows() != y.nrows() {
            return Err(shape_err("concat", &[shape(x), shape(y)]));
        }
        let out = ndarray::concatenate(Axis(1), &[x.view(), y.view()]).expect("row counts checked");
        Ok(self.push(out, Op::ConcatCols(a, b), &[a, b]))
    }

    /// Column means as a `1×F` row; an empty input gives zeros.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = if x.nrows() == 0 {
            Array2::zeros((1, x.ncols()))
        } else {
            x.mean_axis(Axis(0)).expect("non-empty").insert_axis(Axis(0))
        };
        self.push(out, Op::MeanRows(a), &[a])
    }

    pub fn lookup_rows(&mut self, table: Var, idx: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if let Some(&bad) = idx.iter().find(|&&i| i >= t.nrows()) {
            return Err(shape_err("lookup_rows", &[shape(t), (bad, 0)]));
        }
        let out = t.select(Axis(0), idx);
        Ok(self.push(out, Op::LookupRows(table, idx.to_vec()), &[table]))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).t().to_owned();
        self.push(out, Op::Transpose(a), &[a])
    }

    /// `out[i][j] = col[i] + row[j]` for an `N×1` column and `1×M` row.
    pub fn outer_add(&mut self, col: Var, row: Var) -> Result<Var> {
        let (c, r) = (self.value(col), self.value(row));
        if c.ncols() != 1 || r.nrows() != 1 {
            return Err(shape_err("outer_add", &[shape(c), shape(r)]));
        }
        let out = c + r;
        Ok(self.push(out, Op::OuterAdd(col, row), &[col, row]))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let out = scalar(self.value(a).sum());
        self.push(out, Op::SumAll(a), &[a])
    }

    /// `mu + exp(½ logvar) ⊙ eps` with `eps` held constant.
    pub fn reparameterize(&mut self, mu: Var, logvar: Var, eps: Array2<f64>) -> Result<Var> {
        self.same_shape("reparameterize", mu, logvar)?;
        if self.value(mu).dim() != eps.dim() {
            return Err(shape_err("reparameterize", &[shape(self.value(mu)), shape(&eps)]));
        }
        let out = self.value(mu) + &(self.value(logvar).mapv(|v| (0.5 * v).exp()) * &eps);
        Ok(self.push(out, Op::Reparam(mu, logvar, eps), &[mu, logvar]))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, pred: Var, target: &Array2<f64>) -> Result<Var> {
        let p = self.value(pred);
        if p.dim() != target.dim() {
            return Err(shape_err("mse", &[shape(p), shape(target)]));
        }
        let n = p.len().max(1) as f64;
        let out = scalar((p - target).mapv(|d| d * d).sum() / n);
        Ok(self.push(out, Op::Mse(pred, target.clone()), &[pred]))
    }

    /// Weighted mean binary cross entropy `Σ w·bce / Σ w` on probabilities.
    /// A weight of 0 masks an entry out.
    pub fn bce(&mut self, pred: Var, target: &Array2<f64>, weight: Option<&Array2<f64>>) -> Result<Var> {
        let p = self.value(pred);
        if p.dim() != target.dim() || weight.is_some_and(|w| w.dim() != p.dim()) {
            let mut shapes = vec![shape(p), shape(target)];
            shapes.extend(weight.map(shape));
            return Err(shape_err("bce", &shapes));
        }
        let w = weight.cloned().unwrap_or_else(|| Array2::ones(p.dim()));
        let total: f64 = w.sum();
        let mut loss = 0.0;
        if total > 0.0 {
            for ((pv, yv), wv) in p.iter().zip(target.iter()).zip(w.iter()) {
                if *wv != 0.0 {
                    let pc = pv.clamp(BCE_EPS, 1.0 - BCE_EPS);
                    loss -= wv * (yv * pc.ln() + (1.0 - yv) * (1.0 - pc).ln());
                }
            }
            loss /= total;
        }
        Ok(self.push(scalar(loss), Op::Bce(pred, target.clone(), w), &[pred]))
    }

    /// `-½ mean(1 + logvar - mu² - exp(logvar))`.
    pub fn kl(&mut self, mu: Var, logvar: Var) -> Result<Var> {
        self.same_shape("kl", mu, logvar)?;
        let (m, l) = (self.value(mu), self.value(logvar));
        let n = m.len().max(1) as f64;
        let s: f64 = m.iter().zip(l.iter()).map(|(m, l)| 1.0 + l - m * m - l.exp()).sum();
        Ok(self.push(scalar(-0.5 * s / n), Op::Kl(mu, logvar), &[mu, logvar]))
    }

    /// Mean softmax cross entropy of `N×C` logits against class labels.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let x = self.value(logits);
        if x.nrows() != labels.len() || labels.iter().any(|&l| l >= x.ncols()) {
            return Err(shape_err("cross_entropy", &[shape(x), (labels.len(), 1)]));
        }
        let mut loss = 0.0;
        for (row, &y) in x.rows().into_iter().zip(labels) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[y];
        }
        let n = labels.len().max(1) as f64;
        Ok(self.push(scalar(loss / n), Op::CrossEntropy(logits, labels.to_vec()), &[logits]))
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::ones(self.nodes[loss.0].value.dim()));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let mut send = |v: Var, d: Array2<f64>| {
                if !self.nodes[v.0].requires_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => *acc += &d,
                    slot => *slot = Some(d),
                }
            };
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    send(*a, g.dot(&val(*b).t()));
                    send(*b, val(*a).t().dot(&g));
                }
                Op::MatMulT(a, b) => {
                    send(*a, g.dot(val(*b)));
                    send(*b, g.t().dot(val(*a)));
                }
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::AddRow(a, r) => {
                    send(*r, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    send(*a, g);
                }
                Op::Sub(a, b) => {
                    send(*b, -&g);
                    send(*a, g);
                }
                Op::Mul(a, b) => {
                    send(*a, &g * val(*b));
                    send(*b, &g * val(*a));
                }
                Op::Scale(a, s) => send(*a, g * *s),
                Op::Relu(a) => {
                    let mask = val(*a).mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    send(*a, g * mask);
                }
                Op::LeakyRelu(a, slope) => {
                    let d = val(*a).mapv(|v| if v > 0.0 { 1.0 } else { *slope });
                    send(*a, g * d);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    send(*a, g * &y.mapv(|s| s * (1.0 - s)));
                }
                Op::Exp(a) => send(*a, g * &node.value),
                Op::Clamp(a, lo, hi) => {
                    let d = val(*a).mapv(|v| if v > *lo && v < *hi { 1.0 } else { 0.0 });
                    send(*a, g * d);
                }
                Op::SoftmaxRows(a) | Op::MaskedSoftmaxRows(a) => {
                    let y = &node.value;
                    let mut d = Array2::zeros(y.dim());
                    for r in 0..y.nrows() {
                        let dot: f64 = (0..y.ncols()).map(|j| g[[r, j]] * y[[r, j]]).sum();
                        for j in 0..y.ncols() {
                            d[[r, j]] = y[[r, j]] * (g[[r, j]] - dot);
                        }
                    }
                    send(*a, d);
                }
                Op::ConcatCols(a, b) => {
                    let k = val(*a).ncols();
                    send(*a, g.slice(ndarray::s![.., ..k]).to_owned());
                    send(*b, g.slice(ndarray::s![.., k..]).to_owned());
                }
                Op::MeanRows(a) => {
                    let n = val(*a).nrows();
                    let mut d = Array2::zeros(val(*a).dim());
                    if n > 0 {
                        let row = g.row(0).mapv(|v| v / n as f64);
                        for mut r in d.rows_mut() {
                            r.assign(&row);
                        }
                    }
                    send(*a, d);
                }
                Op::LookupRows(t, idx) => {
                    let mut d = Array2::zeros(val(*t).dim());
                    for (r, &k) in idx.iter().enumerate() {
                        let mut row = d.row_mut(k);
                        row += &g.row(r);
                    }
                    send(*t, d);
                }
                Op::Transpose(a) => send(*a, g.t().to_owned()),
                Op::OuterAdd(c, r) => {
                    send(*c, g.sum_axis(Axis(1)).insert_axis(Axis(1)));
                    send(*r, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
                Op::SumAll(a) => send(*a, Array2::from_elem(val(*a).dim(), g[[0, 0]])),
                Op::Reparam(mu, lv, eps) => {
                    let d = val(*lv).mapv(|v| 0.5 * (0.5 * v).exp()) * eps * &g;
                    send(*mu, g);
                    send(*lv, d);
                }
                Op::Mse(p, t) => {
                    let n = t.len().max(1) as f64;
                    send(*p, (val(*p) - t) * (2.0 * g[[0, 0]] / n));
                }
                Op::Bce(p, t, w) => {
                    let total = w.sum();
                    let gs = g[[0, 0]];
                    let mut d = Array2::zeros(t.dim());
                    if total > 0.0 {
                        for (((dv, pv), yv), wv) in d.iter_mut().zip(val(*p).iter()).zip(t.iter()).zip(w.iter()) {
                            if *wv != 0.0 && *pv > BCE_EPS && *pv < 1.0 - BCE_EPS {
                                *dv = -gs * wv * (yv / pv - (1.0 - yv) / (1.0 - pv)) / total;
                            }
                        }
                    }
                    send(*p, d);
                }
                Op::Kl(mu, lv) => {
                    let n = val(*mu).len().max(1) as f64;
                    let gs = g[[0, 0]];
                    send(*mu, val(*mu) * (gs / n));
                    send(*lv, val(*lv).mapv(|l| -0.5 * (1.0 - l.exp()) * gs / n));
                }
                Op::CrossEntropy(l, labels) => {
                    let x = val(*l);
                    let n = labels.len().max(1) as f64;
                    let mut d = Array2::zeros(x.dim());
                    for (r, &y) in labels.iter().enumerate() {
                        let sm = softmax_row(x.row(r), None);
                        for j in 0..x.ncols() {
                            d[[r, j]] = g[[0, 0]] * (sm[j] - if j == y { 1.0 } else { 0.0 }) / n;
                        }
                    }
                    send(*l, d);
                }
            }
        }
        Gradients {
            grads,
            params: self.nodes.iter().map(|n| n.param).collect(),
        }
    }
}

pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
    params: Vec<Option<usize>>,
}

impl Gradients {
    /// Gradient of a leaf; `None` if nothing flowed into it.
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads[v.0].as_ref()
    }

    /// Gradients for every parameter of `params` (zeros where unused),
    /// summed over all leaves bound to the same parameter.
    pub fn for_params(&self, params: &Params) -> Vec<Array2<f64>> {
        let mut out: Vec<Array2<f64>> = (0..params.len()).map(|i| Array2::zeros(params.value(i).dim())).collect();
        for (g, p) in self.grads.iter().zip(&self.params) {
            if let (Some(g), Some(p)) = (g, p) {
                out[*p] += g;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| {
            // keep away from relu / clamp kinks
            let v: f64 = rng.gen_range(0.1..1.5);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
    }

    #[test]
    fn matmul_identity() {
        let mut t = Tape::new();
        let i = t.constant(Array2::eye(2));
        let x = t.var(array![[1.0, 2.0], [3.0, 4.0]]);
        let y = t.matmul(i, x).unwrap();
        assert_eq!(t.value(y), t.value(x));
        let s = t.sum_all(y);
        let g = t.backward(s);
        assert_eq!(g.get(x).unwrap(), &Array2::ones((2, 2)));
    }

    #[test]
    fn relu_at_negative_and_zero() {
        let mut t = Tape::new();
        let x = t.var(array![[-1.0, 0.0, 2.0]]);
        let y = t.relu(x);
        assert_eq!(t.value(y), &array![[0.0, 0.0, 2.0]]);
        let s = t.sum_all(y);
        assert_eq!(t.backward(s).get(x).unwrap(), &array![[0.0, 0.0, 1.0]]);
    }

    #[test]
    fn shape_errors_name_the_op() {
        let mut t = Tape::new();
        let a = t.var(Array2::zeros((2, 3)));
        let b = t.var(Array2::zeros((2, 3)));
        let err = t.matmul(a, b).unwrap_err();
        assert!(err.to_string().contains("matmul"), "{err}");
        assert!(err.to_string().contains("(2, 3)"));
        let c = t_rows(&mut t, 3);
        assert!(t.concat_cols(a, c).is_err());
    }

    fn t_rows(t: &mut Tape, r: usize) -> Var {
        t.var(Array2::zeros((r, 1)))
    }

    #[test]
    fn loss_closed_forms() {
        let mut t = Tape::new();
        let x = t.var(array![[1.0, -2.0], [0.5, 3.0]]);
        let target = t.value(x).clone();
        let m = t.mse(x, &target).unwrap();
        assert_eq!(t.scalar(m), 0.0);

        let z = t.var(Array2::zeros((3, 4)));
        let k = t.kl(z, z).unwrap();
        assert_eq!(t.scalar(k), 0.0);

        let half = t.var(Array2::from_elem((2, 3), 0.5));
        let y = array![[1.0, 0.0, 1.0], [0.0, 0.0, 1.0]];
        let b = t.bce(half, &y, None).unwrap();
        assert!((t.scalar(b) - std::f64::consts::LN_2).abs() < 1e-12);

        let logits = t.var(array![[0.0, 0.0]]);
        let ce = t.cross_entropy(logits, &[1]).unwrap();
        assert!((t.scalar(ce) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn kl_is_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let mut t = Tape::new();
            let mu = t.var(rand_mat(&mut rng, 3, 2));
            let lv = t.var(rand_mat(&mut rng, 3, 2));
            let k = t.kl(mu, lv).unwrap();
            assert!(t.scalar(k) > 0.0);
        }
    }

    #[test]
    fn masked_softmax_empty_row_is_zero() {
        let mut t = Tape::new();
        let x = t.var(array![[1.0, 2.0], [3.0, 4.0]]);
        let y = t.masked_softmax_rows(x, array![[1.0, 1.0], [0.0, 0.0]]).unwrap();
        assert_eq!(t.value(y).row(1).to_vec(), vec![0.0, 0.0]);
        assert!((t.value(y).row(0).sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn every_op_passes_finite_differences() {
        for (name, report) in crate::gradcheck::op_checks(42).unwrap() {
            assert!(report.max_rel_error < 1e-4, "{name}: {report:?}");
        }
    }
}
