//! Tape-based reverse-mode differentiation over [`Matrix`] values.
//!
//! Every forward op appends one node holding its value; inputs always precede
//! outputs on the tape, so walking it backwards from the loss is a reverse
//! topological order and each node is visited exactly once.

use rand::Rng;

use super::matrix::{gemm, Matrix};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Row-to-group assignment for the segment ops.
#[derive(Clone, Debug)]
pub struct Segments {
    ids: Vec<usize>,
    counts: Vec<usize>,
}

impl Segments {
    /// `ids[i]` is the group of row `i`; groups are `0..num_groups`.
    pub fn new(ids: Vec<usize>, num_groups: usize) -> Result<Self> {
        let mut counts = vec![0usize; num_groups];
        for &g in &ids {
            *counts.get_mut(g).ok_or_else(|| Error::Shape {
                op: "segments",
                detail: format!("group {g} >= {num_groups}"),
            })? += 1;
        }
        Ok(Segments { ids, counts })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn num_groups(&self) -> usize {
        self.counts.len()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    ConcatCols(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    GatherRows(Var, Vec<usize>),
    SegmentMean(Var, Segments),
    SegmentSum(Var, Segments),
    SegmentSoftmax(Var, Segments),
    ScaleRows(Var, Var),
    L2NormalizeRows(Var, Vec<f64>),
    Dropout(Var, Vec<f64>),
    WeightedBce {
        logits: Var,
        labels: Vec<f64>,
        weights: Vec<f64>,
        pos_weight: f64,
    },
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every tape value that needs one.
pub struct Gradients(Vec<Option<Matrix>>);

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.0.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of `shape` if nothing flowed into it.
    pub fn take_or_zeros(&mut self, v: Var, shape: (usize, usize)) -> Matrix {
        self.0[v.0]
            .take()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::Shape { op, detail }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, name: &'static str, value: Matrix, op: Op, needs_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Result<Var> {
        self.push("param", value, Op::Leaf, true)
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, value: Matrix) -> Result<Var> {
        self.push("constant", value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(shape_err("matmul", format!("{sa:?} x {sb:?}")));
        }
        let mut out = Matrix::zeros(sa.0, sb.1);
        gemm(1.0, self.value(a), false, self.value(b), false, 0.0, &mut out);
        let ng = self.needs(a) || self.needs(b);
        self.push("matmul", out, Op::MatMul(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("add", format!("{:?} + {:?}", self.shape(a), self.shape(b))));
        }
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push("add", out, Op::Add(a, b), ng)
    }

    /// Adds the `1 x d` row `bias` to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (sx, sb) = (self.shape(x), self.shape(bias));
        if sb != (1, sx.1) {
            return Err(shape_err("add_bias", format!("{sx:?} + {sb:?}")));
        }
        let mut out = self.value(x).clone();
        let b = self.value(bias).row(0);
        for i in 0..sx.0 {
            for (o, bv) in out.row_mut(i).iter_mut().zip(b) {
                *o += bv;
            }
        }
        let ng = self.needs(x) || self.needs(bias);
        self.push("add_bias", out, Op::AddBias(x, bias), ng)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.0 != sb.0 {
            return Err(shape_err("concat_cols", format!("{sa:?} | {sb:?}")));
        }
        let mut data = Vec::with_capacity(sa.0 * (sa.1 + sb.1));
        for i in 0..sa.0 {
            data.extend_from_slice(self.value(a).row(i));
            data.extend_from_slice(self.value(b).row(i));
        }
        let out = Matrix::from_vec(sa.0, sa.1 + sb.1, data);
        let ng = self.needs(a) || self.needs(b);
        self.push("concat_cols", out, Op::ConcatCols(a, b), ng)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| v.max(0.0));
        let ng = self.needs(x);
        self.push("relu", out, Op::Relu(x), ng)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(sigmoid);
        let ng = self.needs(x);
        self.push("sigmoid", out, Op::Sigmoid(x), ng)
    }

    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let rows = self.shape(x).0;
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(shape_err("gather_rows", format!("row {bad} >= {rows}")));
        }
        let out = self.value(x).gather_rows(idx);
        let ng = self.needs(x);
        self.push("gather_rows", out, Op::GatherRows(x, idx.to_vec()), ng)
    }

    /// First `n` rows of `x`.
    pub fn head_rows(&mut self, x: Var, n: usize) -> Result<Var> {
        let idx: Vec<usize> = (0..n).collect();
        self.gather_rows(x, &idx)
    }

    fn check_segments(&self, op: &'static str, x: Var, seg: &Segments) -> Result<()> {
        if self.shape(x).0 != seg.len() {
            return Err(shape_err(
                op,
                format!("{} rows, {} segment ids", self.shape(x).0, seg.len()),
            ));
        }
        Ok(())
    }

    fn segment_accumulate(&self, x: Var, seg: &Segments) -> Matrix {
        let cols = self.shape(x).1;
        let mut out = Matrix::zeros(seg.num_groups(), cols);
        let xv = self.value(x);
        for (i, &g) in seg.ids.iter().enumerate() {
            for (o, v) in out.row_mut(g).iter_mut().zip(xv.row(i)) {
                *o += v;
            }
        }
        out
    }

    /// Per-group mean of rows; an empty group yields a zero row.
    pub fn segment_mean(&mut self, x: Var, seg: Segments) -> Result<Var> {
        self.check_segments("segment_mean", x, &seg)?;
        let mut out = self.segment_accumulate(x, &seg);
        for (g, &c) in seg.counts.iter().enumerate() {
            if c > 1 {
                let inv = 1.0 / c as f64;
                out.row_mut(g).iter_mut().for_each(|v| *v *= inv);
            }
        }
        let ng = self.needs(x);
        self.push("segment_mean", out, Op::SegmentMean(x, seg), ng)
    }

    pub fn segment_sum(&mut self, x: Var, seg: Segments) -> Result<Var> {
        self.check_segments("segment_sum", x, &seg)?;
        let out = self.segment_accumulate(x, &seg);
        let ng = self.needs(x);
        self.push("segment_sum", out, Op::SegmentSum(x, seg), ng)
    }

    /// Softmax of an `n x 1` logit column within each group.
    pub fn segment_softmax(&mut self, x: Var, seg: Segments) -> Result<Var> {
        self.check_segments("segment_softmax", x, &seg)?;
        if self.shape(x).1 != 1 {
            return Err(shape_err("segment_softmax", format!("{:?} not a column", self.shape(x))));
        }
        let z = self.value(x).data();
        let mut max = vec![f64::NEG_INFINITY; seg.num_groups()];
        for (i, &g) in seg.ids.iter().enumerate() {
            max[g] = max[g].max(z[i]);
        }
        let mut e: Vec<f64> = seg.ids.iter().enumerate().map(|(i, &g)| (z[i] - max[g]).exp()).collect();
        let mut sum = vec![0.0; seg.num_groups()];
        for (i, &g) in seg.ids.iter().enumerate() {
            sum[g] += e[i];
        }
        for (i, &g) in seg.ids.iter().enumerate() {
            e[i] /= sum[g];
        }
        let out = Matrix::column(e);
        let ng = self.needs(x);
        self.push("segment_softmax", out, Op::SegmentSoftmax(x, seg), ng)
    }

    /// Multiplies row `i` of `x` by the scalar `w[i]` (`w` is `n x 1`).
    pub fn scale_rows(&mut self, x: Var, w: Var) -> Result<Var> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        if sw != (sx.0, 1) {
            return Err(shape_err("scale_rows", format!("{sx:?} * {sw:?}")));
        }
        let mut out = self.value(x).clone();
        let wv = self.value(w).data();
        for (i, &s) in wv.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|v| *v *= s);
        }
        let ng = self.needs(x) || self.needs(w);
        self.push("scale_rows", out, Op::ScaleRows(x, w), ng)
    }

    /// Scales each row to unit Euclidean norm; zero rows pass through.
    pub fn l2_normalize_rows(&mut self, x: Var) -> Result<Var> {
        let mut out = self.value(x).clone();
        let mut norms = Vec::with_capacity(out.rows());
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                row.iter_mut().for_each(|v| *v /= n);
            }
            norms.push(n);
        }
        let ng = self.needs(x);
        self.push("l2_normalize_rows", out, Op::L2NormalizeRows(x, norms), ng)
    }

    /// Inverted dropout. Identity when not training or when `rate == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(shape_err("dropout", format!("rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let n = self.value(x).data().len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let mut out = self.value(x).clone();
        for (v, m) in out.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        let ng = self.needs(x);
        self.push("dropout", out, Op::Dropout(x, mask), ng)
    }

    /// Weighted mean of `-[pw * y * log s(z) + (1 - y) * log(1 - s(z))]`.
    ///
    /// `weights` are per-row sample weights (all ones for a plain mean);
    /// rows with zero weight do not affect the loss.
    pub fn weighted_bce_with_logits(
        &mut self,
        logits: Var,
        labels: &[f64],
        weights: Option<&[f64]>,
        pos_weight: f64,
    ) -> Result<Var> {
        let s = self.shape(logits);
        if s.1 != 1 || s.0 != labels.len() {
            return Err(shape_err("weighted_bce", format!("logits {s:?}, {} labels", labels.len())));
        }
        if pos_weight.is_nan() || pos_weight <= 0.0 {
            return Err(shape_err("weighted_bce", format!("pos_weight {pos_weight} must be > 0")));
        }
        let weights = match weights {
            Some(w) if w.len() != labels.len() => {
                return Err(shape_err("weighted_bce", "weights length".into()))
            }
            Some(w) => w.to_vec(),
            None => vec![1.0; labels.len()],
        };
        let total: f64 = weights.iter().sum();
        let z = self.value(logits).data();
        let mut loss = 0.0;
        if total > 0.0 {
            for ((&zi, &y), &w) in z.iter().zip(labels).zip(&weights) {
                if w != 0.0 {
                    loss += w * (pos_weight * y * softplus(-zi) + (1.0 - y) * softplus(zi));
                }
            }
            loss /= total;
        }
        let ng = self.needs(logits);
        self.push(
            "weighted_bce",
            Matrix::scalar(loss),
            Op::WeightedBce {
                logits,
                labels: labels.to_vec(),
                weights,
                pos_weight,
            },
            ng,
        )
    }

    /// Reverse pass from a `1 x 1` output.
    pub fn backward(&self, out: Var) -> Result<Gradients> {
        if self.shape(out) != (1, 1) {
            return Err(shape_err("backward", format!("output {:?} is not scalar", self.shape(out))));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Matrix::scalar(1.0));

        for i in (0..=out.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients(grads))
    }

    fn backprop(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let mut acc = |v: Var, delta: Matrix| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    let mut ga = Matrix::zeros(av.rows(), av.cols());
                    gemm(1.0, g, false, bv, true, 0.0, &mut ga);
                    acc(*a, ga);
                }
                if self.needs(*b) {
                    let mut gb = Matrix::zeros(bv.rows(), bv.cols());
                    gemm(1.0, av, true, g, false, 0.0, &mut gb);
                    acc(*b, gb);
                }
            }
            Op::Add(a, b) => {
                if self.needs(*a) {
                    acc(*a, g.clone());
                }
                if self.needs(*b) {
                    acc(*b, g.clone());
                }
            }
            Op::AddBias(x, b) => {
                if self.needs(*x) {
                    acc(*x, g.clone());
                }
                if self.needs(*b) {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in gb.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(*b, gb);
                }
            }
            Op::ConcatCols(a, b) => {
                let ca = self.shape(*a).1;
                let cb = self.shape(*b).1;
                if self.needs(*a) {
                    let mut ga = Matrix::zeros(g.rows(), ca);
                    for r in 0..g.rows() {
                        ga.row_mut(r).copy_from_slice(&g.row(r)[..ca]);
                    }
                    acc(*a, ga);
                }
                if self.needs(*b) {
                    let mut gb = Matrix::zeros(g.rows(), cb);
                    for r in 0..g.rows() {
                        gb.row_mut(r).copy_from_slice(&g.row(r)[ca..]);
                    }
                    acc(*b, gb);
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                let mut gx = g.clone();
                for (gv, &v) in gx.data_mut().iter_mut().zip(xv) {
                    if v <= 0.0 {
                        *gv = 0.0;
                    }
                }
                acc(*x, gx);
            }
            Op::Sigmoid(x) => {
                let mut gx = g.clone();
                for (gv, &s) in gx.data_mut().iter_mut().zip(node.value.data()) {
                    *gv *= s * (1.0 - s);
                }
                acc(*x, gx);
            }
            Op::GatherRows(x, idx) => {
                let (r, c) = self.shape(*x);
                let mut gx = Matrix::zeros(r, c);
                for (k, &i) in idx.iter().enumerate() {
                    for (o, v) in gx.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                acc(*x, gx);
            }
            Op::SegmentMean(x, seg) | Op::SegmentSum(x, seg) => {
                let mean = matches!(node.op, Op::SegmentMean(..));
                let (r, c) = self.shape(*x);
                let mut gx = Matrix::zeros(r, c);
                for (i, &grp) in seg.ids.iter().enumerate() {
                    let scale = if mean { 1.0 / seg.counts[grp] as f64 } else { 1.0 };
                    for (o, v) in gx.row_mut(i).iter_mut().zip(g.row(grp)) {
                        *o = v * scale;
                    }
                }
                acc(*x, gx);
            }
            Op::SegmentSoftmax(x, seg) => {
                let y = node.value.data();
                let gy = g.data();
                let mut dot = vec![0.0; seg.num_groups()];
                for (i, &grp) in seg.ids.iter().enumerate() {
                    dot[grp] += y[i] * gy[i];
                }
                let gx: Vec<f64> = seg
                    .ids
                    .iter()
                    .enumerate()
                    .map(|(i, &grp)| y[i] * (gy[i] - dot[grp]))
                    .collect();
                acc(*x, Matrix::column(gx));
            }
            Op::ScaleRows(x, w) => {
                let xv = self.value(*x);
                let wv = self.value(*w).data();
                if self.needs(*x) {
                    let mut gx = g.clone();
                    for (i, &s) in wv.iter().enumerate() {
                        gx.row_mut(i).iter_mut().for_each(|v| *v *= s);
                    }
                    acc(*x, gx);
                }
                if self.needs(*w) {
                    let gw: Vec<f64> = (0..xv.rows())
                        .map(|i| xv.row(i).iter().zip(g.row(i)).map(|(a, b)| a * b).sum())
                        .collect();
                    acc(*w, Matrix::column(gw));
                }
            }
            Op::L2NormalizeRows(x, norms) => {
                let y = &node.value;
                let mut gx = g.clone();
                for (i, &n) in norms.iter().enumerate() {
                    if n > 0.0 {
                        let yr = y.row(i);
                        let dot: f64 = yr.iter().zip(g.row(i)).map(|(a, b)| a * b).sum();
                        for (o, &yv) in gx.row_mut(i).iter_mut().zip(yr) {
                            *o = (*o - yv * dot) / n;
                        }
                    }
                }
                acc(*x, gx);
            }
            Op::Dropout(x, mask) => {
                let mut gx = g.clone();
                for (v, m) in gx.data_mut().iter_mut().zip(mask) {
                    *v *= m;
                }
                acc(*x, gx);
            }
            Op::WeightedBce {
                logits,
                labels,
                weights,
                pos_weight,
            } => {
                let total: f64 = weights.iter().sum();
                let scale = if total > 0.0 { g.item() / total } else { 0.0 };
                let z = self.value(*logits).data();
                let gz: Vec<f64> = z
                    .iter()
                    .zip(labels)
                    .zip(weights)
                    .map(|((&zi, &y), &w)| {
                        let s = sigmoid(zi);
                        scale * w * (pos_weight * y * (s - 1.0) + (1.0 - y) * s)
                    })
                    .collect();
                acc(*logits, Matrix::column(gz));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sigmoid_at_zero() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::scalar(0.0)).unwrap();
        let s = t.sigmoid(x).unwrap();
        assert_eq!(t.value(s).item(), 0.5);
    }

    #[test]
    fn segment_mean_and_empty_groups() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::from_rows(&[&[1.0, 1.0], &[3.0, 3.0]])).unwrap();
        let seg = Segments::new(vec![0, 0], 2).unwrap();
        let m = t.segment_mean(x, seg).unwrap();
        assert_eq!(t.value(m), &Matrix::from_rows(&[&[2.0, 2.0], &[0.0, 0.0]]));
    }

    #[test]
    fn segment_softmax_uniform_and_singleton() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::column(vec![7.5, 7.5, 7.5, -3.0])).unwrap();
        let seg = Segments::new(vec![0, 0, 0, 1], 2).unwrap();
        let y = t.segment_softmax(x, seg).unwrap();
        let v = t.value(y).data();
        for &w in &v[..3] {
            assert!(close(w, 1.0 / 3.0, 1e-15));
        }
        assert_eq!(v[3], 1.0);
    }

    #[test]
    fn softmax_survives_large_logits() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::column(vec![1000.0, 999.0])).unwrap();
        let y = t.segment_softmax(x, Segments::new(vec![0, 0], 1).unwrap()).unwrap();
        let s: f64 = t.value(y).data().iter().sum();
        assert!(close(s, 1.0, 1e-12));
    }

    #[test]
    fn bce_reference_values() {
        let mut t = Tape::new();
        let z = t.constant(Matrix::column(vec![0.0])).unwrap();
        let l = t.weighted_bce_with_logits(z, &[1.0], None, 1.0).unwrap();
        assert!(close(t.value(l).item(), std::f64::consts::LN_2, 1e-15));
        let l3 = t.weighted_bce_with_logits(z, &[1.0], None, 3.0).unwrap();
        assert!(close(t.value(l3).item(), 3.0 * std::f64::consts::LN_2, 1e-15));
    }

    #[test]
    fn bce_is_stable_for_extreme_logits() {
        let mut t = Tape::new();
        let z = t.constant(Matrix::column(vec![800.0, -800.0])).unwrap();
        let l = t.weighted_bce_with_logits(z, &[1.0, 0.0], None, 1.0).unwrap();
        assert!(t.value(l).item() < 1e-300);
        let l = t.weighted_bce_with_logits(z, &[0.0, 1.0], None, 1.0).unwrap();
        assert!(close(t.value(l).item(), 800.0, 1e-9));
    }

    #[test]
    fn l2_normalize_rows_values() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::from_rows(&[&[3.0, 4.0], &[0.0, 0.0]])).unwrap();
        let y = t.l2_normalize_rows(x).unwrap();
        assert_eq!(t.value(y), &Matrix::from_rows(&[&[0.6, 0.8], &[0.0, 0.0]]));
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = Tape::new();
        let x = t.constant(Matrix::filled(4, 4, 2.0)).unwrap();
        assert_eq!(t.dropout(x, 0.0, true, &mut rng).unwrap(), x);
        assert_eq!(t.dropout(x, 0.7, false, &mut rng).unwrap(), x);
        let y = t.dropout(x, 0.5, true, &mut rng).unwrap();
        assert!(t.value(y).data().iter().all(|&v| v == 0.0 || v == 4.0));
        assert!(t.dropout(x, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn shape_errors_and_non_finite() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros(2, 3)).unwrap();
        let b = t.constant(Matrix::zeros(2, 3)).unwrap();
        assert!(matches!(t.matmul(a, b), Err(Error::Shape { .. })));
        assert!(matches!(t.constant(Matrix::scalar(f64::NAN)), Err(Error::NonFinite(_))));
        let big = t.constant(Matrix::scalar(1e200)).unwrap();
        assert!(matches!(t.matmul(big, big), Err(Error::NonFinite("matmul"))));
    }

    #[test]
    fn backward_needs_scalar() {
        let mut t = Tape::new();
        let a = t.param(Matrix::zeros(2, 2)).unwrap();
        assert!(t.backward(a).is_err());
    }
}
