use super::{NumericsError, Tensor};

/// Identifier of a node on a [`Tape`]. Nodes are appended in forward
/// order, so every node's inputs have smaller ids than the node itself.
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Tanh,
    Relu,
    Sigmoid,
    Exp,
    Log,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul { a: NodeId, b: NodeId },
    /// out = A Bᵀ with A: [m×k], B: [n×k].
    MatmulTB { a: NodeId, b: NodeId },
    MatVec { w: NodeId, x: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    /// Row-broadcast add: [r×c] + [c].
    AddBias { m: NodeId, bias: NodeId },
    Scale { x: NodeId, c: f64 },
    AddConst { x: NodeId },
    Unary { x: NodeId, f: UnaryFn },
    Softmax { x: NodeId },
    L1Normalize { x: NodeId },
    Sum { x: NodeId },
    Dot { a: NodeId, b: NodeId },
    Concat { parts: Vec<NodeId> },
    Slice { x: NodeId, start: usize, len: usize },
    Pick { x: NodeId, index: usize },
    Row { m: NodeId, i: usize },
    Col { m: NodeId, j: usize },
    MaxElem { x: NodeId },
    /// Minimum over entries strictly greater than `eps`; 0 when none qualify.
    MinPositive { x: NodeId, eps: f64 },
    /// Shannon entropy −Σ x ln x with the 0·ln 0 := 0 convention.
    Entropy { x: NodeId },
    LogSumExp { x: NodeId },
    ClampMin { x: NodeId, lo: f64 },
    /// Stack equal-length vectors into a matrix, one vector per row.
    StackRows { parts: Vec<NodeId> },
    /// Scale row i of a matrix by w[i].
    ScaleRows { m: NodeId, w: NodeId },
    /// Scale every entry of x by a scalar node.
    ScaleBy { x: NodeId, s: NodeId },
    /// Column-wise sum over rows: [r×c] → [c].
    SumRows { m: NodeId },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Define-by-run computation tape. Every operation evaluates eagerly and
/// records itself; a tape lives for one forward pass and one backward
/// replay, and is confined to a single worker.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by [`Tape::backward`]. Nodes the loss does
/// not reach report zero gradients of the node's shape.
pub struct Gradients {
    entries: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `id`, densified to zeros when the loss never reached it.
    pub fn for_node(&self, id: NodeId) -> Tensor {
        match &self.entries[id] {
            Some(t) => t.clone(),
            None => Tensor::zeros(&self.shapes[id]),
        }
    }

    pub fn reached(&self, id: NodeId) -> bool {
        self.entries[id].is_some()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { op, value });
        id
    }

    /// Register a leaf holding `t`. Leaves receive gradients like any
    /// other node; constants simply never read theirs.
    pub fn leaf(&mut self, t: Tensor) -> NodeId {
        self.push(Op::Leaf, t)
    }

    pub fn scalar(&mut self, v: f64) -> NodeId {
        self.leaf(Tensor::scalar(v))
    }

    // ── binary linear algebra ────────────────────────────────────────

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows() {
            return Err(NumericsError::ShapeMismatch {
                op: "matmul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let aip = ta.values()[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += aip * tb.values()[p * n + j];
                }
            }
        }
        Ok(self.push(Op::Matmul { a, b }, Tensor::new(vec![m, n], out).unwrap()))
    }

    /// out = A Bᵀ for A: [m×k], B: [n×k].
    pub fn matmul_tb(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.cols() {
            return Err(NumericsError::ShapeMismatch {
                op: "matmul_tb",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.rows());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += ta.values()[i * k + p] * tb.values()[j * k + p];
                }
                out[i * n + j] = acc;
            }
        }
        Ok(self.push(Op::MatmulTB { a, b }, Tensor::new(vec![m, n], out).unwrap()))
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId, NumericsError> {
        let (tw, tx) = (self.value(w), self.value(x));
        if tw.rank() != 2 || tx.rank() != 1 || tw.cols() != tx.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "matvec",
                lhs: tw.shape().to_vec(),
                rhs: tx.shape().to_vec(),
            });
        }
        let (r, c) = (tw.rows(), tw.cols());
        let mut out = vec![0.0; r];
        for i in 0..r {
            let mut acc = 0.0;
            for j in 0..c {
                acc += tw.values()[i * c + j] * tx.values()[j];
            }
            out[i] = acc;
        }
        Ok(self.push(Op::MatVec { w, x }, Tensor::vector(out)))
    }

    // ── elementwise ─────────────────────────────────────────────────

    fn elementwise(
        &mut self,
        op_name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
        make: impl Fn(NodeId, NodeId) -> Op,
    ) -> Result<NodeId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(NumericsError::ShapeMismatch {
                op: op_name,
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let values = ta
            .values()
            .iter()
            .zip(tb.values())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let t = Tensor::new(ta.shape().to_vec(), values).unwrap();
        Ok(self.push(make(a, b), t))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        self.elementwise("add", a, b, |x, y| x + y, |a, b| Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        self.elementwise("sub", a, b, |x, y| x - y, |a, b| Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        self.elementwise("mul", a, b, |x, y| x * y, |a, b| Op::Mul { a, b })
    }

    pub fn add_bias(&mut self, m: NodeId, bias: NodeId) -> Result<NodeId, NumericsError> {
        let (tm, tb) = (self.value(m), self.value(bias));
        if tm.rank() != 2 || tb.rank() != 1 || tm.cols() != tb.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "add_bias",
                lhs: tm.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (r, c) = (tm.rows(), tm.cols());
        let mut out = tm.values().to_vec();
        for i in 0..r {
            for j in 0..c {
                out[i * c + j] += tb.values()[j];
            }
        }
        Ok(self.push(Op::AddBias { m, bias }, Tensor::new(vec![r, c], out).unwrap()))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let t = self.value(x);
        let values = t.values().iter().map(|v| v * c).collect();
        let out = Tensor::new(t.shape().to_vec(), values).unwrap();
        self.push(Op::Scale { x, c }, out)
    }

    pub fn add_const(&mut self, x: NodeId, c: f64) -> NodeId {
        let t = self.value(x);
        let values = t.values().iter().map(|v| v + c).collect();
        let out = Tensor::new(t.shape().to_vec(), values).unwrap();
        self.push(Op::AddConst { x }, out)
    }

    pub fn clamp_min(&mut self, x: NodeId, lo: f64) -> NodeId {
        let t = self.value(x);
        let values = t.values().iter().map(|v| v.max(lo)).collect();
        let out = Tensor::new(t.shape().to_vec(), values).unwrap();
        self.push(Op::ClampMin { x, lo }, out)
    }

    // ── unary functions ─────────────────────────────────────────────

    /// Elementwise tanh / relu / sigmoid / exp / log. Only log can fail:
    /// its inputs must be strictly positive.
    pub fn unary_apply(&mut self, x: NodeId, f: UnaryFn) -> Result<NodeId, NumericsError> {
        let t = self.value(x);
        if f == UnaryFn::Log {
            if let Some((index, &value)) = t
                .values()
                .iter()
                .enumerate()
                .find(|(_, v)| **v <= 0.0 || !v.is_finite())
            {
                return Err(NumericsError::LogDomain { index, value });
            }
        }
        let apply = |v: f64| match f {
            UnaryFn::Tanh => v.tanh(),
            UnaryFn::Relu => v.max(0.0),
            UnaryFn::Sigmoid => 1.0 / (1.0 + (-v).exp()),
            UnaryFn::Exp => v.exp(),
            UnaryFn::Log => v.ln(),
        };
        let values = t.values().iter().map(|&v| apply(v)).collect();
        let out = Tensor::new(t.shape().to_vec(), values).unwrap();
        Ok(self.push(Op::Unary { x, f }, out))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.unary_apply(x, UnaryFn::Tanh).unwrap()
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.unary_apply(x, UnaryFn::Relu).unwrap()
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.unary_apply(x, UnaryFn::Sigmoid).unwrap()
    }

    // ── normalizations and reductions ───────────────────────────────

    /// Numerically stable softmax over a vector (max-subtraction).
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        let t = self.value(x);
        if t.rank() != 1 || t.is_empty() {
            return Err(NumericsError::RankMismatch {
                op: "softmax",
                expected: "non-empty vector",
                shape: t.shape().to_vec(),
            });
        }
        let max = t.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = t.values().iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let values = exps.iter().map(|e| e / sum).collect();
        Ok(self.push(Op::Softmax { x }, Tensor::vector(values)))
    }

    /// Linear normalization w / ‖w‖₁ for non-negative vectors.
    pub fn l1_normalize(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        let t = self.value(x);
        if t.rank() != 1 || t.is_empty() {
            return Err(NumericsError::RankMismatch {
                op: "l1_normalize",
                expected: "non-empty vector",
                shape: t.shape().to_vec(),
            });
        }
        debug_assert!(
            t.values().iter().all(|v| *v >= 0.0),
            "l1_normalize expects non-negative entries"
        );
        let sum: f64 = t.values().iter().sum();
        if sum <= 0.0 {
            return Err(NumericsError::DegenerateL1);
        }
        let values = t.values().iter().map(|v| v / sum).collect();
        Ok(self.push(Op::L1Normalize { x }, Tensor::vector(values)))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let total: f64 = self.value(x).values().iter().sum();
        self.push(Op::Sum { x }, Tensor::scalar(total))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() || ta.rank() != 1 {
            return Err(NumericsError::ShapeMismatch {
                op: "dot",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let v = ta
            .values()
            .iter()
            .zip(tb.values())
            .map(|(x, y)| x * y)
            .sum();
        Ok(self.push(Op::Dot { a, b }, Tensor::scalar(v)))
    }

    pub fn max_elem(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        assert!(!t.is_empty(), "max_elem on empty tensor");
        let v = t.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.push(Op::MaxElem { x }, Tensor::scalar(v))
    }

    /// Minimum over entries strictly above `eps`; evaluates to 0 when no
    /// entry qualifies (and then routes no gradient).
    pub fn min_positive(&mut self, x: NodeId, eps: f64) -> NodeId {
        let t = self.value(x);
        let v = t
            .values()
            .iter()
            .cloned()
            .filter(|v| *v > eps)
            .fold(f64::INFINITY, f64::min);
        let v = if v.is_finite() { v } else { 0.0 };
        self.push(Op::MinPositive { x, eps }, Tensor::scalar(v))
    }

    /// Shannon entropy −Σ x ln x (natural log, 0·ln 0 := 0).
    pub fn entropy(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let h = -t
            .values()
            .iter()
            .filter(|v| **v > 0.0)
            .map(|v| v * v.ln())
            .sum::<f64>();
        self.push(Op::Entropy { x }, Tensor::scalar(h))
    }

    pub fn log_sum_exp(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        assert!(!t.is_empty(), "log_sum_exp on empty tensor");
        let max = t.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let v = max + t.values().iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        self.push(Op::LogSumExp { x }, Tensor::scalar(v))
    }

    // ── structural ops ──────────────────────────────────────────────

    /// Concatenate the flattened parts into one vector.
    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat of zero parts");
        let mut values = Vec::new();
        for &p in parts {
            values.extend_from_slice(self.value(p).values());
        }
        self.push(
            Op::Concat {
                parts: parts.to_vec(),
            },
            Tensor::vector(values),
        )
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId, NumericsError> {
        let t = self.value(x);
        if start + len > t.len() {
            return Err(NumericsError::IndexOutOfBounds {
                what: "slice",
                index: start + len,
                size: t.len(),
            });
        }
        let values = t.values()[start..start + len].to_vec();
        Ok(self.push(Op::Slice { x, start, len }, Tensor::vector(values)))
    }

    /// Scalar at a flat index.
    pub fn pick(&mut self, x: NodeId, index: usize) -> Result<NodeId, NumericsError> {
        let t = self.value(x);
        if index >= t.len() {
            return Err(NumericsError::IndexOutOfBounds {
                what: "pick",
                index,
                size: t.len(),
            });
        }
        let v = t.values()[index];
        Ok(self.push(Op::Pick { x, index }, Tensor::scalar(v)))
    }

    pub fn row(&mut self, m: NodeId, i: usize) -> Result<NodeId, NumericsError> {
        let t = self.value(m);
        if t.rank() != 2 || i >= t.rows() {
            return Err(NumericsError::IndexOutOfBounds {
                what: "row",
                index: i,
                size: if t.rank() == 2 { t.rows() } else { 0 },
            });
        }
        let c = t.cols();
        let values = t.values()[i * c..(i + 1) * c].to_vec();
        Ok(self.push(Op::Row { m, i }, Tensor::vector(values)))
    }

    pub fn col(&mut self, m: NodeId, j: usize) -> Result<NodeId, NumericsError> {
        let t = self.value(m);
        if t.rank() != 2 || j >= t.cols() {
            return Err(NumericsError::IndexOutOfBounds {
                what: "col",
                index: j,
                size: if t.rank() == 2 { t.cols() } else { 0 },
            });
        }
        let (r, c) = (t.rows(), t.cols());
        let values = (0..r).map(|i| t.values()[i * c + j]).collect();
        Ok(self.push(Op::Col { m, j }, Tensor::vector(values)))
    }

    /// Stack equal-length vectors as the rows of a new matrix.
    pub fn stack_rows(&mut self, parts: &[NodeId]) -> Result<NodeId, NumericsError> {
        assert!(!parts.is_empty(), "stack_rows of zero parts");
        let c = self.value(parts[0]).len();
        let mut values = Vec::with_capacity(parts.len() * c);
        for &p in parts {
            let t = self.value(p);
            if t.rank() != 1 || t.len() != c {
                return Err(NumericsError::ShapeMismatch {
                    op: "stack_rows",
                    lhs: vec![c],
                    rhs: t.shape().to_vec(),
                });
            }
            values.extend_from_slice(t.values());
        }
        Ok(self.push(
            Op::StackRows {
                parts: parts.to_vec(),
            },
            Tensor::new(vec![parts.len(), c], values).unwrap(),
        ))
    }

    /// Scale row i of `m` by `w[i]`.
    pub fn scale_rows(&mut self, m: NodeId, w: NodeId) -> Result<NodeId, NumericsError> {
        let (tm, tw) = (self.value(m), self.value(w));
        if tm.rank() != 2 || tw.rank() != 1 || tm.rows() != tw.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "scale_rows",
                lhs: tm.shape().to_vec(),
                rhs: tw.shape().to_vec(),
            });
        }
        let (r, c) = (tm.rows(), tm.cols());
        let mut values = tm.values().to_vec();
        for i in 0..r {
            for j in 0..c {
                values[i * c + j] *= tw.values()[i];
            }
        }
        Ok(self.push(Op::ScaleRows { m, w }, Tensor::new(vec![r, c], values).unwrap()))
    }

    /// Scale every entry of `x` by the scalar node `s`.
    pub fn scale_by(&mut self, x: NodeId, s: NodeId) -> Result<NodeId, NumericsError> {
        let ts = self.value(s);
        if ts.len() != 1 {
            return Err(NumericsError::RankMismatch {
                op: "scale_by",
                expected: "scalar",
                shape: ts.shape().to_vec(),
            });
        }
        let sv = ts.scalar_value();
        let tx = self.value(x);
        let values = tx.values().iter().map(|v| v * sv).collect();
        let out = Tensor::new(tx.shape().to_vec(), values).unwrap();
        Ok(self.push(Op::ScaleBy { x, s }, out))
    }

    /// Column-wise sum over rows: [r×c] → [c].
    pub fn sum_rows(&mut self, m: NodeId) -> Result<NodeId, NumericsError> {
        let t = self.value(m);
        if t.rank() != 2 {
            return Err(NumericsError::RankMismatch {
                op: "sum_rows",
                expected: "matrix",
                shape: t.shape().to_vec(),
            });
        }
        let (r, c) = (t.rows(), t.cols());
        let mut values = vec![0.0; c];
        for i in 0..r {
            for j in 0..c {
                values[j] += t.values()[i * c + j];
            }
        }
        Ok(self.push(Op::SumRows { m }, Tensor::vector(values)))
    }

    // ── backward ────────────────────────────────────────────────────

    /// Reverse replay from a scalar loss node. Visits each recorded node
    /// exactly once and accumulates vector-Jacobian products; nodes not
    /// reachable from the loss end up with zero gradients.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, NumericsError> {
        let loss_t = self.value(loss);
        if loss_t.len() != 1 {
            return Err(NumericsError::NonScalarLoss {
                shape: loss_t.shape().to_vec(),
            });
        }
        let mut entries: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        entries[loss] = Some(Tensor::new(loss_t.shape().to_vec(), vec![1.0]).unwrap());

        for id in (0..=loss).rev() {
            let Some(d_out) = entries[id].clone() else {
                continue;
            };
            self.backward_node(id, d_out.values(), &mut entries);
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { entries, shapes })
    }

    fn accumulate(&self, entries: &mut [Option<Tensor>], id: NodeId, grad: &[f64]) {
        match &mut entries[id] {
            Some(t) => {
                for (acc, g) in t.values_mut().iter_mut().zip(grad) {
                    *acc += g;
                }
            }
            None => {
                let shape = self.nodes[id].value.shape().to_vec();
                entries[id] = Some(Tensor::new(shape, grad.to_vec()).unwrap());
            }
        }
    }

    fn backward_node(&self, id: NodeId, d_out: &[f64], entries: &mut [Option<Tensor>]) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Matmul { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                let mut d_a = vec![0.0; m * k];
                let mut d_b = vec![0.0; k * n];
                for i in 0..m {
                    for j in 0..n {
                        let d = d_out[i * n + j];
                        if d == 0.0 {
                            continue;
                        }
                        for p in 0..k {
                            d_a[i * k + p] += d * tb.values()[p * n + j];
                            d_b[p * n + j] += d * ta.values()[i * k + p];
                        }
                    }
                }
                self.accumulate(entries, *a, &d_a);
                self.accumulate(entries, *b, &d_b);
            }
            Op::MatmulTB { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.rows());
                let mut d_a = vec![0.0; m * k];
                let mut d_b = vec![0.0; n * k];
                for i in 0..m {
                    for j in 0..n {
                        let d = d_out[i * n + j];
                        if d == 0.0 {
                            continue;
                        }
                        for p in 0..k {
                            d_a[i * k + p] += d * tb.values()[j * k + p];
                            d_b[j * k + p] += d * ta.values()[i * k + p];
                        }
                    }
                }
                self.accumulate(entries, *a, &d_a);
                self.accumulate(entries, *b, &d_b);
            }
            Op::MatVec { w, x } => {
                let (tw, tx) = (self.value(*w), self.value(*x));
                let (r, c) = (tw.rows(), tw.cols());
                let mut d_w = vec![0.0; r * c];
                let mut d_x = vec![0.0; c];
                for i in 0..r {
                    let d = d_out[i];
                    if d == 0.0 {
                        continue;
                    }
                    for j in 0..c {
                        d_w[i * c + j] += d * tx.values()[j];
                        d_x[j] += d * tw.values()[i * c + j];
                    }
                }
                self.accumulate(entries, *w, &d_w);
                self.accumulate(entries, *x, &d_x);
            }
            Op::Add { a, b } => {
                self.accumulate(entries, *a, d_out);
                self.accumulate(entries, *b, d_out);
            }
            Op::Sub { a, b } => {
                self.accumulate(entries, *a, d_out);
                let neg: Vec<f64> = d_out.iter().map(|d| -d).collect();
                self.accumulate(entries, *b, &neg);
            }
            Op::Mul { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let d_a: Vec<f64> = d_out.iter().zip(tb.values()).map(|(d, y)| d * y).collect();
                let d_b: Vec<f64> = d_out.iter().zip(ta.values()).map(|(d, x)| d * x).collect();
                self.accumulate(entries, *a, &d_a);
                self.accumulate(entries, *b, &d_b);
            }
            Op::AddBias { m, bias } => {
                let t = self.value(*m);
                let (r, c) = (t.rows(), t.cols());
                self.accumulate(entries, *m, d_out);
                let mut d_bias = vec![0.0; c];
                for i in 0..r {
                    for j in 0..c {
                        d_bias[j] += d_out[i * c + j];
                    }
                }
                self.accumulate(entries, *bias, &d_bias);
            }
            Op::Scale { x, c } => {
                let d_x: Vec<f64> = d_out.iter().map(|d| d * c).collect();
                self.accumulate(entries, *x, &d_x);
            }
            Op::AddConst { x } => {
                self.accumulate(entries, *x, d_out);
            }
            Op::ClampMin { x, lo } => {
                let t = self.value(*x);
                let d_x: Vec<f64> = d_out
                    .iter()
                    .zip(t.values())
                    .map(|(d, v)| if *v > *lo { *d } else { 0.0 })
                    .collect();
                self.accumulate(entries, *x, &d_x);
            }
            Op::Unary { x, f } => {
                let (tx, ty) = (self.value(*x), self.value(id));
                let d_x: Vec<f64> = match f {
                    UnaryFn::Tanh => d_out
                        .iter()
                        .zip(ty.values())
                        .map(|(d, y)| d * (1.0 - y * y))
                        .collect(),
                    UnaryFn::Relu => d_out
                        .iter()
                        .zip(tx.values())
                        .map(|(d, x)| if *x > 0.0 { *d } else { 0.0 })
                        .collect(),
                    UnaryFn::Sigmoid => d_out
                        .iter()
                        .zip(ty.values())
                        .map(|(d, y)| d * y * (1.0 - y))
                        .collect(),
                    UnaryFn::Exp => d_out
                        .iter()
                        .zip(ty.values())
                        .map(|(d, y)| d * y)
                        .collect(),
                    UnaryFn::Log => d_out
                        .iter()
                        .zip(tx.values())
                        .map(|(d, x)| d / x)
                        .collect(),
                };
                self.accumulate(entries, *x, &d_x);
            }
            Op::Softmax { x } => {
                let y = self.value(id).values();
                let dot: f64 = d_out.iter().zip(y).map(|(d, yi)| d * yi).sum();
                let d_x: Vec<f64> = d_out
                    .iter()
                    .zip(y)
                    .map(|(d, yi)| yi * (d - dot))
                    .collect();
                self.accumulate(entries, *x, &d_x);
            }
            Op::L1Normalize { x } => {
                let tx = self.value(*x);
                let y = self.value(id).values();
                let s: f64 = tx.values().iter().sum();
                let dot: f64 = d_out.iter().zip(y).map(|(d, yi)| d * yi).sum();
                let d_x: Vec<f64> = d_out.iter().map(|d| (d - dot) / s).collect();
                self.accumulate(entries, *x, &d_x);
            }
            Op::Sum { x } => {
                let n = self.value(*x).len();
                let d_x = vec![d_out[0]; n];
                self.accumulate(entries, *x, &d_x);
            }
            Op::Dot { a, b } => {
                let d = d_out[0];
                let d_a: Vec<f64> = self.value(*b).values().iter().map(|v| d * v).collect();
                let d_b: Vec<f64> = self.value(*a).values().iter().map(|v| d * v).collect();
                self.accumulate(entries, *a, &d_a);
                self.accumulate(entries, *b, &d_b);
            }
            Op::Concat { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    self.accumulate(entries, p, &d_out[offset..offset + len]);
                    offset += len;
                }
            }
            Op::Slice { x, start, len } => {
                let mut d_x = vec![0.0; self.value(*x).len()];
                d_x[*start..start + len].copy_from_slice(d_out);
                self.accumulate(entries, *x, &d_x);
            }
            Op::Pick { x, index } => {
                let mut d_x = vec![0.0; self.value(*x).len()];
                d_x[*index] = d_out[0];
                self.accumulate(entries, *x, &d_x);
            }
            Op::Row { m, i } => {
                let t = self.value(*m);
                let c = t.cols();
                let mut d_m = vec![0.0; t.len()];
                d_m[i * c..(i + 1) * c].copy_from_slice(d_out);
                self.accumulate(entries, *m, &d_m);
            }
            Op::Col { m, j } => {
                let t = self.value(*m);
                let (r, c) = (t.rows(), t.cols());
                let mut d_m = vec![0.0; t.len()];
                for i in 0..r {
                    d_m[i * c + j] = d_out[i];
                }
                self.accumulate(entries, *m, &d_m);
            }
            Op::MaxElem { x } => {
                let t = self.value(*x);
                let mut best = 0;
                for (i, v) in t.values().iter().enumerate() {
                    if *v > t.values()[best] {
                        best = i;
                    }
                }
                let mut d_x = vec![0.0; t.len()];
                d_x[best] = d_out[0];
                self.accumulate(entries, *x, &d_x);
            }
            Op::MinPositive { x, eps } => {
                let t = self.value(*x);
                let mut best: Option<usize> = None;
                for (i, v) in t.values().iter().enumerate() {
                    if *v > *eps && best.map_or(true, |b| *v < t.values()[b]) {
                        best = Some(i);
                    }
                }
                if let Some(i) = best {
                    let mut d_x = vec![0.0; t.len()];
                    d_x[i] = d_out[0];
                    self.accumulate(entries, *x, &d_x);
                }
            }
            Op::Entropy { x } => {
                let t = self.value(*x);
                let d = d_out[0];
                let d_x: Vec<f64> = t
                    .values()
                    .iter()
                    .map(|v| if *v > 0.0 { -d * (v.ln() + 1.0) } else { 0.0 })
                    .collect();
                self.accumulate(entries, *x, &d_x);
            }
            Op::LogSumExp { x } => {
                let t = self.value(*x);
                let lse = self.value(id).scalar_value();
                let d = d_out[0];
                let d_x: Vec<f64> = t.values().iter().map(|v| d * (v - lse).exp()).collect();
                self.accumulate(entries, *x, &d_x);
            }
            Op::StackRows { parts } => {
                let c = self.value(parts[0]).len();
                for (i, &p) in parts.iter().enumerate() {
                    self.accumulate(entries, p, &d_out[i * c..(i + 1) * c]);
                }
            }
            Op::ScaleRows { m, w } => {
                let (tm, tw) = (self.value(*m), self.value(*w));
                let (r, c) = (tm.rows(), tm.cols());
                let mut d_m = vec![0.0; r * c];
                let mut d_w = vec![0.0; r];
                for i in 0..r {
                    for j in 0..c {
                        let d = d_out[i * c + j];
                        d_m[i * c + j] = d * tw.values()[i];
                        d_w[i] += d * tm.values()[i * c + j];
                    }
                }
                self.accumulate(entries, *m, &d_m);
                self.accumulate(entries, *w, &d_w);
            }
            Op::ScaleBy { x, s } => {
                let sv = self.value(*s).scalar_value();
                let tx = self.value(*x);
                let d_x: Vec<f64> = d_out.iter().map(|d| d * sv).collect();
                let d_s: f64 = d_out.iter().zip(tx.values()).map(|(d, v)| d * v).sum();
                self.accumulate(entries, *x, &d_x);
                self.accumulate(entries, *s, &[d_s]);
            }
            Op::SumRows { m } => {
                let t = self.value(*m);
                let (r, c) = (t.rows(), t.cols());
                let mut d_m = vec![0.0; r * c];
                for i in 0..r {
                    d_m[i * c..(i + 1) * c].copy_from_slice(&d_out[..c]);
                }
                self.accumulate(entries, *m, &d_m);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(actual: &[f64], expected: &[f64], tol: f64) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert!((a - e).abs() < tol, "actual {actual:?} expected {expected:?}");
        }
    }

    #[test]
    fn matmul_identity_passthrough() {
        let mut tape = Tape::new();
        let eye = tape.leaf(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let m = tape.leaf(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let out = tape.matmul(eye, m).unwrap();
        assert_close(tape.value(out).values(), &[1.0, 2.0, 3.0, 4.0], 1e-15);
    }

    #[test]
    fn matmul_row_selection() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap());
        let b = tape.leaf(Tensor::matrix(2, 1, vec![2.0, 5.0]).unwrap());
        let out = tape.matmul(a, b).unwrap();
        assert_close(tape.value(out).values(), &[2.0], 1e-15);
    }

    #[test]
    fn matmul_dimension_mismatch_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
        let b = tape.leaf(Tensor::matrix(2, 2, vec![0.0; 4]).unwrap());
        let err = tape.matmul(a, b).unwrap_err();
        match err {
            NumericsError::ShapeMismatch { lhs, rhs, .. } => {
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2, 2]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unary_examples() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![0.0]));
        let y = tape.tanh(x);
        assert_eq!(tape.value(y).values()[0], 0.0);

        let x = tape.leaf(Tensor::vector(vec![-1.0, 2.0]));
        let y = tape.relu(x);
        assert_close(tape.value(y).values(), &[0.0, 2.0], 1e-15);

        let x = tape.leaf(Tensor::vector(vec![1.5]));
        let y = tape.tanh(x);
        assert!((tape.value(y).values()[0] - 0.905148253644866).abs() < 1e-12);
    }

    #[test]
    fn log_of_non_positive_reports_offending_index() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 0.0, 2.0]));
        let err = tape.unary_apply(x, UnaryFn::Log).unwrap_err();
        match err {
            NumericsError::LogDomain { index, value } => {
                assert_eq!(index, 1);
                assert_eq!(value, 0.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn softmax_symmetry_and_shift_invariance() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![0.0, 0.0, 0.0]));
        let y = tape.softmax(x).unwrap();
        assert_close(tape.value(y).values(), &[1.0 / 3.0; 3], 1e-12);

        let x = tape.leaf(Tensor::vector(vec![1000.0, 1000.0]));
        let y = tape.softmax(x).unwrap();
        assert_close(tape.value(y).values(), &[0.5, 0.5], 1e-12);

        let x = tape.leaf(Tensor::vector(vec![0.0, 3.0_f64.ln()]));
        let y = tape.softmax(x).unwrap();
        assert_close(tape.value(y).values(), &[0.25, 0.75], 1e-12);
    }

    #[test]
    fn l1_normalize_examples_and_degenerate_error() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 3.0]));
        let y = tape.l1_normalize(x).unwrap();
        assert_close(tape.value(y).values(), &[0.25, 0.75], 1e-15);

        let x = tape.leaf(Tensor::vector(vec![5.0]));
        let y = tape.l1_normalize(x).unwrap();
        assert_close(tape.value(y).values(), &[1.0], 1e-15);

        let x = tape.leaf(Tensor::vector(vec![2.0, 0.0, 2.0]));
        let y = tape.l1_normalize(x).unwrap();
        assert_close(tape.value(y).values(), &[0.5, 0.0, 0.5], 1e-15);

        let x = tape.leaf(Tensor::vector(vec![0.0, 0.0]));
        assert!(matches!(
            tape.l1_normalize(x),
            Err(NumericsError::DegenerateL1)
        ));
    }

    #[test]
    fn l1_normalize_is_idempotent_on_simplex_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.gen_range(1..8);
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0) + 1e-3).collect();
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::vector(raw));
            let once = tape.l1_normalize(x).unwrap();
            let twice = tape.l1_normalize(once).unwrap();
            assert_close(tape.value(twice).values(), tape.value(once).values(), 1e-14);
        }
    }

    #[test]
    fn backward_of_sum_is_all_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![3.0, -1.0, 2.0]));
        let loss = tape.sum(x);
        let grads = tape.backward(loss).unwrap();
        assert_close(grads.for_node(x).values(), &[1.0, 1.0, 1.0], 1e-15);
    }

    #[test]
    fn backward_of_square_is_two_x() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let loss = tape.mul(x, x).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_close(grads.for_node(x).values(), &[6.0], 1e-15);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(
            tape.backward(x),
            Err(NumericsError::NonScalarLoss { .. })
        ));
    }

    #[test]
    fn unreachable_leaves_get_zero_gradients() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(1.0));
        let unused = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        let loss = tape.mul(x, x).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!(!grads.reached(unused));
        assert_close(grads.for_node(unused).values(), &[0.0, 0.0], 1e-15);
    }

    // ── finite-difference property over every differentiable op ──────

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
        let n: usize = shape.iter().product();
        let values = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        Tensor::new(shape.to_vec(), values).unwrap()
    }

    /// Builds the op under a random linear readout so that symmetric
    /// cancellations (e.g. constant-sum outputs) cannot hide a wrong VJP,
    /// then compares tape gradients to central finite differences.
    fn check_op<F>(build: F, inputs: &[Tensor], seed: u64, tol: f64, name: &str)
    where
        F: Fn(&mut Tape, &[NodeId]) -> NodeId,
    {
        let shapes: Vec<Vec<usize>> = inputs.iter().map(|t| t.shape().to_vec()).collect();
        let flat: Vec<f64> = inputs.iter().flat_map(|t| t.values().to_vec()).collect();
        let (_, analytic) = run_full(&shapes, &flat, &build, seed);
        let err = finite_diff_check(
            |x| run_full(&shapes, x, &build, seed).0,
            &flat,
            &analytic,
            1e-5,
        );
        assert!(err < tol, "{name}: max rel err {err} at seed {seed}");
    }

    fn run_full<F>(shapes: &[Vec<usize>], flat: &[f64], build: &F, seed: u64) -> (f64, Vec<f64>)
    where
        F: Fn(&mut Tape, &[NodeId]) -> NodeId,
    {
        let mut tape = Tape::new();
        let mut ids = Vec::new();
        let mut offset = 0;
        for s in shapes {
            let n: usize = s.iter().product();
            let t = Tensor::new(s.clone(), flat[offset..offset + n].to_vec()).unwrap();
            offset += n;
            ids.push(tape.leaf(t));
        }
        let out = build(&mut tape, &ids);
        let flat_out = tape.concat(&[out]);
        let out_len = tape.value(flat_out).len();
        let mut ro_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xFEED);
        let readout: Vec<f64> = (0..out_len).map(|_| ro_rng.gen_range(-1.0..1.0)).collect();
        let w = tape.leaf(Tensor::vector(readout));
        let loss = tape.dot(flat_out, w).unwrap();
        let grads = tape.backward(loss).unwrap();
        let analytic: Vec<f64> = ids
            .iter()
            .flat_map(|&id| grads.for_node(id).values().to_vec())
            .collect();
        (tape.value(loss).scalar_value(), analytic)
    }

    #[test]
    fn gradients_match_finite_differences_for_every_op() {
        let tol = 1e-4;
        for seed in 0..120u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (m, k, n) = (
                rng.gen_range(1..4usize),
                rng.gen_range(1..4usize),
                rng.gen_range(1..4usize),
            );
            let a = rand_tensor(&mut rng, &[m, k], -2.0, 2.0);
            let b = rand_tensor(&mut rng, &[k, n], -2.0, 2.0);
            check_op(|t, ids| t.matmul(ids[0], ids[1]).unwrap(), &[a, b], seed, tol, "matmul");

            let a = rand_tensor(&mut rng, &[m, k], -2.0, 2.0);
            let b = rand_tensor(&mut rng, &[n, k], -2.0, 2.0);
            check_op(
                |t, ids| t.matmul_tb(ids[0], ids[1]).unwrap(),
                &[a, b],
                seed,
                tol,
                "matmul_tb",
            );

            let w = rand_tensor(&mut rng, &[m, k], -2.0, 2.0);
            let x = rand_tensor(&mut rng, &[k], -2.0, 2.0);
            check_op(
                |t, ids| t.matvec(ids[0], ids[1]).unwrap(),
                &[w, x],
                seed,
                tol,
                "matvec",
            );

            let v1 = rand_tensor(&mut rng, &[k], -2.0, 2.0);
            let v2 = rand_tensor(&mut rng, &[k], -2.0, 2.0);
            check_op(|t, ids| t.add(ids[0], ids[1]).unwrap(), &[v1.clone(), v2.clone()], seed, tol, "add");
            check_op(|t, ids| t.sub(ids[0], ids[1]).unwrap(), &[v1.clone(), v2.clone()], seed, tol, "sub");
            check_op(|t, ids| t.mul(ids[0], ids[1]).unwrap(), &[v1.clone(), v2.clone()], seed, tol, "mul");
            check_op(|t, ids| t.dot(ids[0], ids[1]).unwrap(), &[v1.clone(), v2.clone()], seed, tol, "dot");

            let mat = rand_tensor(&mut rng, &[m, k], -2.0, 2.0);
            let bias = rand_tensor(&mut rng, &[k], -2.0, 2.0);
            check_op(
                |t, ids| t.add_bias(ids[0], ids[1]).unwrap(),
                &[mat.clone(), bias],
                seed,
                tol,
                "add_bias",
            );

            check_op(|t, ids| t.scale(ids[0], -1.7), &[v1.clone()], seed, tol, "scale");
            check_op(|t, ids| t.add_const(ids[0], 0.9), &[v1.clone()], seed, tol, "add_const");

            // keep inputs away from the clamp threshold and relu kink
            let away: Tensor = {
                let vals: Vec<f64> = v1
                    .values()
                    .iter()
                    .map(|v| if v.abs() < 0.05 { v + 0.2 } else { *v })
                    .collect();
                Tensor::vector(vals)
            };
            check_op(|t, ids| t.clamp_min(ids[0], 0.0), &[away.clone()], seed, tol, "clamp_min");
            check_op(|t, ids| t.relu(ids[0]), &[away.clone()], seed, tol, "relu");
            check_op(|t, ids| t.tanh(ids[0]), &[v1.clone()], seed, tol, "tanh");
            check_op(|t, ids| t.sigmoid(ids[0]), &[v1.clone()], seed, tol, "sigmoid");
            check_op(
                |t, ids| t.unary_apply(ids[0], UnaryFn::Exp).unwrap(),
                &[v1.clone()],
                seed,
                tol,
                "exp",
            );

            let positive = rand_tensor(&mut rng, &[k], 0.2, 3.0);
            check_op(
                |t, ids| t.unary_apply(ids[0], UnaryFn::Log).unwrap(),
                &[positive.clone()],
                seed,
                tol,
                "log",
            );
            check_op(
                |t, ids| t.l1_normalize(ids[0]).unwrap(),
                &[positive.clone()],
                seed,
                tol,
                "l1_normalize",
            );
            check_op(|t, ids| t.entropy(ids[0]), &[positive.clone()], seed, tol, "entropy");
            check_op(|t, ids| t.softmax(ids[0]).unwrap(), &[v1.clone()], seed, tol, "softmax");
            check_op(|t, ids| t.log_sum_exp(ids[0]), &[v1.clone()], seed, tol, "log_sum_exp");
            check_op(|t, ids| t.sum(ids[0]), &[v1.clone()], seed, tol, "sum");

            // distinct entries so max/min selections are stable under ±h
            let distinct = Tensor::vector(
                (0..k)
                    .map(|i| 0.3 + 0.41 * i as f64 + rng.gen_range(0.0..0.1))
                    .collect(),
            );
            check_op(|t, ids| t.max_elem(ids[0]), &[distinct.clone()], seed, tol, "max_elem");
            check_op(
                |t, ids| t.min_positive(ids[0], 1e-8),
                &[distinct.clone()],
                seed,
                tol,
                "min_positive",
            );

            let v3 = rand_tensor(&mut rng, &[m], -2.0, 2.0);
            check_op(
                |t, ids| t.concat(&[ids[0], ids[1]]),
                &[v1.clone(), v3.clone()],
                seed,
                tol,
                "concat",
            );
            if k > 1 {
                check_op(|t, ids| t.slice(ids[0], 1, k - 1).unwrap(), &[v1.clone()], seed, tol, "slice");
            }
            check_op(|t, ids| t.pick(ids[0], k - 1).unwrap(), &[v1.clone()], seed, tol, "pick");
            check_op(|t, ids| t.row(ids[0], m - 1).unwrap(), &[mat.clone()], seed, tol, "row");
            check_op(|t, ids| t.col(ids[0], k - 1).unwrap(), &[mat.clone()], seed, tol, "col");

            let r1 = rand_tensor(&mut rng, &[k], -2.0, 2.0);
            let r2 = rand_tensor(&mut rng, &[k], -2.0, 2.0);
            check_op(
                |t, ids| t.stack_rows(&[ids[0], ids[1]]).unwrap(),
                &[r1, r2],
                seed,
                tol,
                "stack_rows",
            );
            let weights = rand_tensor(&mut rng, &[m], -2.0, 2.0);
            check_op(
                |t, ids| t.scale_rows(ids[0], ids[1]).unwrap(),
                &[mat.clone(), weights],
                seed,
                tol,
                "scale_rows",
            );
            let s = rand_tensor(&mut rng, &[], -2.0, 2.0);
            check_op(
                |t, ids| t.scale_by(ids[0], ids[1]).unwrap(),
                &[v1.clone(), s],
                seed,
                tol,
                "scale_by",
            );
            check_op(|t, ids| t.sum_rows(ids[0]).unwrap(), &[mat.clone()], seed, tol, "sum_rows");
        }
    }

    #[test]
    fn chained_mlp_gradient_matches_finite_differences() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let w1 = rand_tensor(&mut rng, &[4, 3], -1.0, 1.0);
            let b1 = rand_tensor(&mut rng, &[4], -1.0, 1.0);
            let w2 = rand_tensor(&mut rng, &[3, 4], -1.0, 1.0);
            let x = rand_tensor(&mut rng, &[3], -1.0, 1.0);
            check_op(
                |t, ids| {
                    let h = t.matvec(ids[0], ids[3]).unwrap();
                    let h = t.add(h, ids[1]).unwrap();
                    let h = t.tanh(h);
                    let logits = t.matvec(ids[2], h).unwrap();
                    let probs = t.softmax(logits).unwrap();
                    let p = t.pick(probs, 1).unwrap();
                    let clamped = t.clamp_min(p, 1e-12);
                    let logp = t.unary_apply(clamped, UnaryFn::Log).unwrap();
                    t.scale(logp, -1.0)
                },
                &[w1, b1, w2, x],
                seed,
                1e-4,
                "mlp_chain",
            );
        }
    }
}
