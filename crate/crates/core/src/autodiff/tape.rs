use super::kernels;
use super::tensor::{check_shape, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Exp(Var),
    Log(Var),
    Tanh(Var),
    Relu(Var),
    Scale(Var, f64),
    ClampMin(Var, f64),
    Softmax(Var),
    Sum(Var, Option<usize>),
    Mean(Var, Option<usize>),
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    values: Vec<f64>,
    op: Op,
    /// Some differentiable leaf feeds into this node.
    tracked: bool,
}

/// Record of executed operations, replayed in reverse by [`Tape::backward`].
///
/// One tape covers one forward/backward pass; build a fresh tape per step.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of the differentiable leaves after a backward pass.
#[derive(Debug)]
pub struct Gradients {
    adj: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to a leaf, if the leaf influenced it.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.adj.get(v.0).and_then(|a| a.as_deref())
    }

    /// Adds the gradient for `v` into `tensor.grad`. Leaves the loss did not
    /// reach contribute zeros.
    pub fn accumulate_into(&self, v: Var, tensor: &mut Tensor) -> Result<()> {
        match self.wrt(v) {
            Some(g) => tensor.accumulate_grad(g),
            None => tensor.accumulate_grad(&vec![0.0; tensor.len()]),
        }
    }
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a == b {
        return Ok(a.to_vec());
    }
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if long.ends_with(short) {
        Ok(long.to_vec())
    } else {
        Err(Error::Dimension(format!("shapes {a:?} and {b:?} do not broadcast")))
    }
}

/// Adjoint buffer for `v`, allocated on first use; `None` for untracked nodes.
fn slot<'a>(nodes: &[Node], adj: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
    let n = &nodes[v.0];
    if !n.tracked {
        return None;
    }
    let len = n.values.len();
    Some(adj[v.0].get_or_insert_with(|| vec![0.0; len]))
}

fn reduce_dims(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
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

    fn push(&mut self, shape: Vec<usize>, values: Vec<f64>, op: Op, tracked: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.nodes.push(Node {
            shape,
            values,
            op,
            tracked,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).values
    }

    pub fn item(&self, v: Var) -> Result<f64> {
        match self.value(v) {
            [x] => Ok(*x),
            _ => Err(Error::Contract(format!("item() on value of shape {:?}", self.shape(v)))),
        }
    }

    /// Copies a tensor onto the tape. The leaf is differentiable iff the
    /// tensor has `requires_grad` set.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.values().to_vec(), Op::Leaf, t.requires_grad())
    }

    /// Records a non-differentiable constant.
    pub fn constant(&mut self, shape: &[usize], values: Vec<f64>) -> Result<Var> {
        let len = check_shape(shape)?;
        if len != values.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} holds {len} values, got {}",
                values.len()
            )));
        }
        Ok(self.push(shape.to_vec(), values, Op::Leaf, false))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Dimension(format!("matmul of {sa:?} by {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let out = kernels::matmul(self.value(a), self.value(b), m, k, n);
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b), tracked))
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let shape = broadcast_shape(self.shape(a), self.shape(b))?;
        let (va, vb) = (self.value(a), self.value(b));
        let len: usize = shape.iter().product();
        let out = (0..len).map(|i| f(va[i % va.len()], vb[i % vb.len()])).collect();
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(shape, out, op, tracked))
    }

    /// Elementwise sum; the lower-rank operand broadcasts over leading axes.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(b).contains(&0.0) {
            return Err(Error::Domain("division by zero".into()));
        }
        self.binary(a, b, Op::Div(a, b), |x, y| x / y)
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let out = self.value(x).iter().map(|&v| f(v)).collect();
        let shape = self.shape(x).to_vec();
        let tracked = self.tracked(x);
        self.push(shape, out, op, tracked)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x), f64::exp)
    }

    /// Natural log; every input must be strictly positive.
    pub fn log(&mut self, x: Var) -> Result<Var> {
        if let Some(v) = self.value(x).iter().find(|&&v| v <= 0.0 || v.is_nan()) {
            return Err(Error::Domain(format!("log of non-positive value {v}")));
        }
        Ok(self.unary(x, Op::Log(x), f64::ln))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), f64::tanh)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Relu(x), |v| v.max(0.0))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, Op::Scale(x, c), |v| v * c)
    }

    /// `max(x, floor)`; the gradient is zero where the floor is active.
    pub fn clamp_min(&mut self, x: Var, floor: f64) -> Var {
        self.unary(x, Op::ClampMin(x, floor), |v| v.max(floor))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Var {
        let shape = self.shape(x).to_vec();
        let n = *shape.last().expect("shapes are nonempty");
        let out = kernels::softmax_rows(self.value(x), n);
        let tracked = self.tracked(x);
        self.push(shape, out, Op::Softmax(x), tracked)
    }

    fn reduce(&mut self, x: Var, axis: Option<usize>, mean: bool) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let vals = self.value(x);
        let (out_shape, out) = match axis {
            None => {
                let total: f64 = vals.iter().sum();
                let v = if mean { total / vals.len() as f64 } else { total };
                (vec![1], vec![v])
            }
            Some(ax) => {
                if ax >= shape.len() {
                    return Err(Error::Dimension(format!("axis {ax} out of range for shape {shape:?}")));
                }
                let (outer, len, inner) = reduce_dims(&shape, ax);
                let mut out = vec![0.0; outer * inner];
                for o in 0..outer {
                    for j in 0..len {
                        let base = (o * len + j) * inner;
                        for i in 0..inner {
                            out[o * inner + i] += vals[base + i];
                        }
                    }
                }
                if mean {
                    out.iter_mut().for_each(|v| *v /= len as f64);
                }
                let mut s = shape.clone();
                s.remove(ax);
                if s.is_empty() {
                    s.push(1);
                }
                (s, out)
            }
        };
        let op = if mean { Op::Mean(x, axis) } else { Op::Sum(x, axis) };
        let tracked = self.tracked(x);
        Ok(self.push(out_shape, out, op, tracked))
    }

    /// Sum over one axis, or over everything when `axis` is `None`.
    pub fn sum(&mut self, x: Var, axis: Option<usize>) -> Result<Var> {
        self.reduce(x, axis, false)
    }

    pub fn mean(&mut self, x: Var, axis: Option<usize>) -> Result<Var> {
        self.reduce(x, axis, true)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let len = check_shape(shape)?;
        if len != self.value(x).len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape(x)
            )));
        }
        let vals = self.value(x).to_vec();
        let tracked = self.tracked(x);
        Ok(self.push(shape.to_vec(), vals, Op::Reshape(x), tracked))
    }

    /// Reverse-mode pass from a single-element loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::Contract("backward on an empty tape".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            self.propagate(node, &g, &mut adj);
        }
        Ok(Gradients { adj })
    }

    fn propagate(&self, node: &Node, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let y = &node.values;
        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.shape(a)[0], self.shape(a)[1]);
                let n = self.shape(b)[1];
                let (va, vb) = (self.value(a), self.value(b));
                if let Some(ga) = slot(&self.nodes, adj, a) {
                    kernels::matmul_grad_lhs(g, vb, ga, m, k, n);
                }
                if let Some(gb) = slot(&self.nodes, adj, b) {
                    kernels::matmul_grad_rhs(va, g, gb, m, k, n);
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if let Some(ga) = slot(&self.nodes, adj, a) {
                    let n = ga.len();
                    for (i, gv) in g.iter().enumerate() {
                        ga[i % n] += gv;
                    }
                }
                if let Some(gb) = slot(&self.nodes, adj, b) {
                    let n = gb.len();
                    for (i, gv) in g.iter().enumerate() {
                        gb[i % n] += sign * gv;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(a), self.value(b));
                if let Some(ga) = slot(&self.nodes, adj, a) {
                    let n = ga.len();
                    for (i, gv) in g.iter().enumerate() {
                        ga[i % n] += gv * vb[i % vb.len()];
                    }
                }
                if let Some(gb) = slot(&self.nodes, adj, b) {
                    let n = gb.len();
                    for (i, gv) in g.iter().enumerate() {
                        gb[i % n] += gv * va[i % va.len()];
                    }
                }
            }
            Op::Div(a, b) => {
                let (va, vb) = (self.value(a), self.value(b));
                if let Some(ga) = slot(&self.nodes, adj, a) {
                    let n = ga.len();
                    for (i, gv) in g.iter().enumerate() {
                        ga[i % n] += gv / vb[i % vb.len()];
                    }
                }
                if let Some(gb) = slot(&self.nodes, adj, b) {
                    let n = gb.len();
                    for (i, gv) in g.iter().enumerate() {
                        let bv = vb[i % vb.len()];
                        gb[i % n] -= gv * va[i % va.len()] / (bv * bv);
                    }
                }
            }
            Op::Exp(x) => {
                if let Some(gx) = slot(&self.nodes, adj, x) {
                    for ((o, gv), yv) in gx.iter_mut().zip(g).zip(y) {
                        *o += gv * yv;
                    }
                }
            }
            Op::Log(x) => {
                let vx = self.value(x);
                if let Some(gx) = slot(&self.nodes, adj, x) {
                    for ((o, gv), xv) in gx.iter_mut().zip(g).zip(vx) {
                        *o += gv / xv;
                    }
                }
            }
            Op::Tanh(x) => {
                if let Some(gx) = slot(&self.nodes, adj, x) {
                    for ((o, gv), yv) in gx.iter_mut().zip(g).zip(y) {
                        *o += gv * (1.0 - yv * yv);
                    }
                }
            }
            Op::Relu(x) => {
                let vx = self.value(x);
                if let Some(gx) = slot(&self.nodes, adj, x) {
                    for ((o, gv), xv) in gx.iter_mut().zip(g).zip(vx) {
                        if *xv > 0.0 {
                            *o += gv;
                        }
                    }
                }
            }
            Op::Scale(x, c) => {
                if let Some(gx) = slot(&self.nodes, adj, x) {
                    for (o, gv) in gx.iter_mut().zip(g) {
                        *o += gv * c;
                    }
                }
            }
            Op::ClampMin(x, floor) => {
                let vx = self.value(x);
                if let Some(gx) = slot(&self.nodes, adj, x) {
                    for ((o, gv), xv) in gx.iter_mut().zip(g).zip(vx) {
                        if *xv >= floor {
                            *o += gv;
                        }
                    }
                }
            }
            Op::Softmax(x) => {
                let n = *node.shape.last().expect("nonempty shape");
                if let Some(gx) = slot(&self.nodes, adj, x) {
                    for ((orow, grow), yrow) in gx.chunks_mut(n).zip(g.chunks(n)).zip(y.chunks(n)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                        for ((o, gv), yv) in orow.iter_mut().zip(grow).zip(yrow) {
                            *o += yv * (gv - dot);
                        }
                    }
                }
            }
            Op::Sum(x, axis) | Op::Mean(x, axis) => {
                let mean = matches!(node.op, Op::Mean(..));
                let shape = self.shape(x).to_vec();
                if let Some(gx) = slot(&self.nodes, adj, x) {
                    match axis {
                        None => {
                            let d = if mean { g[0] / gx.len() as f64 } else { g[0] };
                            gx.iter_mut().for_each(|o| *o += d);
                        }
                        Some(ax) => {
                            let (outer, len, inner) = reduce_dims(&shape, ax);
                            let div = if mean { len as f64 } else { 1.0 };
                            for o in 0..outer {
                                for j in 0..len {
                                    let base = (o * len + j) * inner;
                                    for i in 0..inner {
                                        let gv = g[o * inner + i];
                                        gx[base + i] += if mean { gv / div } else { gv };
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Op::Reshape(x) => {
                if let Some(gx) = slot(&self.nodes, adj, x) {
                    for (o, gv) in gx.iter_mut().zip(g) {
                        *o += gv;
                    }
                }
            }
        }
    }
}
