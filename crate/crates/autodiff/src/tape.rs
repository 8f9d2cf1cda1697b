//! The tape, its variables, and the reverse sweep.
//!
//! Every primitive's backward rule is itself written in terms of primitives.
//! With `create_graph` set, the reverse sweep records onto the same tape, so
//! the returned gradients can be differentiated again.

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use crate::error::{AutodiffError, Result};
use crate::tensor::{SparseConst, Tensor};

#[derive(Clone)]
pub(crate) enum Op {
    Leaf,
    MatMul(usize, usize),
    Transpose(usize),
    SpMM(SparseConst, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Relu(usize),
    Sigmoid(usize),
    Log(usize),
    Exp(usize),
    Pow(usize, f64),
    RowSoftmax(usize),
    LogSoftmax(usize),
    Sum(usize),
    SumRows(usize),
    SumCols(usize),
    Expand(usize),
    Trace(usize),
}

impl Op {
    fn inputs(&self) -> [Option<usize>; 2] {
        use Op::*;
        match *self {
            Leaf => [None, None],
            MatMul(a, b) | Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => [Some(a), Some(b)],
            Transpose(a) | SpMM(_, a) | Scale(a, _) | AddScalar(a) | Relu(a) | Sigmoid(a)
            | Log(a) | Exp(a) | Pow(a, _) | RowSoftmax(a) | LogSoftmax(a) | Sum(a)
            | SumRows(a) | SumCols(a) | Expand(a) | Trace(a) => [Some(a), None],
        }
    }
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of primitive operations. Node ids are assigned in
/// creation order, which is a topological order.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    warned: Cell<bool>,
}

/// A handle to one node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

/// Result of [`Tape::grad`].
pub struct Grads<'t> {
    /// One gradient per `wrt` entry, shaped like that entry.
    pub values: Vec<Var<'t>>,
    /// Indices into `wrt` that the output does not depend on. Their
    /// gradients are zero.
    pub disconnected: Vec<usize>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True once any `grad` call has hit a disconnected `wrt` variable.
    pub fn warned(&self) -> bool {
        self.warned.get()
    }

    /// A leaf that gradients can be taken with respect to.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(Rc::new(value), Op::Leaf, true)
    }

    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(Rc::new(value), Op::Leaf, false)
    }

    pub fn constant_rc(&self, value: Rc<Tensor>) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Tensor::scalar(value))
    }

    /// `a @ x` for a constant sparse `a`.
    pub fn spmm<'t>(&'t self, a: &SparseConst, x: Var<'t>) -> Result<Var<'t>> {
        self.check(x)?;
        let v = a.fwd.matmul_dense(&x.value())?;
        Ok(self.record(v, Op::SpMM(a.clone(), x.id), &[x.id]))
    }

    fn push(&self, value: Rc<Tensor>, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn record(&self, value: Tensor, op: Op, inputs: &[usize]) -> Var<'_> {
        let rg = {
            let nodes = self.nodes.borrow();
            inputs.iter().any(|&i| nodes[i].requires_grad)
        };
        if rg {
            self.push(Rc::new(value), op, true)
        } else {
            self.push(Rc::new(value), Op::Leaf, false)
        }
    }

    fn check(&self, v: Var<'_>) -> Result<()> {
        if std::ptr::eq(self, v.tape) {
            Ok(())
        } else {
            Err(AutodiffError::ForeignVar)
        }
    }

    fn value_of(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// Gradients of a scalar `output` with respect to each of `wrt`.
    ///
    /// With `create_graph` the returned variables are recorded on this tape
    /// and depend differentiably on the forward inputs.
    pub fn grad<'t>(&'t self, output: Var<'t>, wrt: &[Var<'t>], create_graph: bool) -> Result<Grads<'t>> {
        self.check(output)?;
        for w in wrt {
            self.check(*w)?;
        }
        let out_shape = output.shape();
        if out_shape != [1, 1] {
            return Err(AutodiffError::NotScalar(out_shape));
        }
        let n = output.id + 1;
        let snapshot: Vec<(Op, bool)> = self.nodes.borrow()[..n]
            .iter()
            .map(|nd| (nd.op.clone(), nd.requires_grad))
            .collect();

        let mut is_wrt = vec![false; n];
        for w in wrt {
            if w.id < n {
                is_wrt[w.id] = true;
            }
        }
        let mut needed = vec![false; n];
        for i in 0..n {
            let (op, rg) = &snapshot[i];
            if !rg {
                continue;
            }
            needed[i] = is_wrt[i]
                || op
                    .inputs()
                    .iter()
                    .flatten()
                    .any(|&p| needed[p]);
        }

        let mut grads: Vec<Option<Var<'t>>> = vec![None; n];
        let mut found: Vec<Option<Var<'t>>> = vec![None; n];
        if needed[output.id] {
            grads[output.id] = Some(self.scalar(1.0));
        }
        for id in (0..n).rev() {
            if !needed[id] {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            if is_wrt[id] {
                found[id] = Some(g);
            }
            let op = &snapshot[id].0;
            for (input, contrib) in self.backward(op, id, g, &needed, create_graph)? {
                grads[input] = Some(match grads[input] {
                    Some(prev) => prev.add(contrib)?,
                    None => contrib,
                });
            }
        }

        let mut values = Vec::with_capacity(wrt.len());
        let mut disconnected = Vec::new();
        for (k, w) in wrt.iter().enumerate() {
            match found.get(w.id).copied().flatten() {
                Some(g) => values.push(g),
                None => {
                    let [r, c] = w.shape();
                    values.push(self.constant(Tensor::zeros(r, c)));
                    disconnected.push(k);
                }
            }
        }
        if !disconnected.is_empty() {
            self.warned.set(true);
        }
        Ok(Grads {
            values,
            disconnected,
        })
    }

    fn backward<'t>(
        &'t self,
        op: &Op,
        id: usize,
        g: Var<'t>,
        needed: &[bool],
        create_graph: bool,
    ) -> Result<Vec<(usize, Var<'t>)>> {
        // Without create_graph every operand is detached so the sweep only
        // records constants.
        let var = |i: usize| -> Var<'t> {
            if create_graph {
                Var { tape: self, id: i }
            } else {
                self.constant_rc(self.value_of(i))
            }
        };
        let shape = |i: usize| self.value_of(i).shape();
        let need = |i: usize| needed[i];
        let mut out = Vec::with_capacity(2);
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if need(a) {
                    out.push((a, g.matmul(var(b).t())?));
                }
                if need(b) {
                    out.push((b, var(a).t().matmul(g)?));
                }
            }
            Op::Transpose(a) => out.push((a, g.t())),
            Op::SpMM(ref sp, x) => out.push((x, self.spmm(&sp.transposed(), g)?)),
            Op::Add(a, b) => {
                if need(a) {
                    out.push((a, g));
                }
                if need(b) {
                    out.push((b, g.reduce_to(shape(b))?));
                }
            }
            Op::Sub(a, b) => {
                if need(a) {
                    out.push((a, g));
                }
                if need(b) {
                    out.push((b, g.neg().reduce_to(shape(b))?));
                }
            }
            Op::Mul(a, b) => {
                if need(a) {
                    out.push((a, g.mul(var(b))?));
                }
                if need(b) {
                    out.push((b, g.mul(var(a))?.reduce_to(shape(b))?));
                }
            }
            Op::Div(a, b) => {
                if need(a) {
                    out.push((a, g.div(var(b))?));
                }
                if need(b) {
                    let gb = g.mul(var(id))?.div(var(b))?.neg();
                    out.push((b, gb.reduce_to(shape(b))?));
                }
            }
            Op::Scale(a, c) => out.push((a, g.scale(c))),
            Op::AddScalar(a) => out.push((a, g)),
            Op::Relu(a) => {
                let mask = self.value_of(a).map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                out.push((a, g.mul(self.constant(mask))?));
            }
            Op::Sigmoid(a) => {
                let s = var(id);
                let ds = s.mul(s.neg().add_scalar(1.0))?;
                out.push((a, g.mul(ds)?));
            }
            Op::Log(a) => out.push((a, g.div(var(a))?)),
            Op::Exp(a) => out.push((a, g.mul(var(id))?)),
            Op::Pow(a, p) => {
                let d = var(a).pow(p - 1.0)?.scale(p);
                out.push((a, g.mul(d)?));
            }
            Op::RowSoftmax(a) => {
                let s = var(id);
                let inner = g.sub(g.mul(s)?.sum_cols())?;
                out.push((a, s.mul(inner)?));
            }
            Op::LogSoftmax(a) => {
                let s = var(a).row_softmax();
                out.push((a, g.sub(s.mul(g.sum_cols())?)?));
            }
            Op::Sum(a) | Op::SumRows(a) | Op::SumCols(a) => {
                let [r, c] = shape(a);
                out.push((a, g.expand(r, c)?));
            }
            Op::Expand(a) => out.push((a, g.reduce_to(shape(a))?)),
            Op::Trace(a) => {
                let [n, _] = shape(a);
                let eye = self.constant(Tensor::eye(n));
                out.push((a, g.expand(n, n)?.mul(eye)?));
            }
        }
        Ok(out)
    }
}

/// How the right operand of an elementwise op lines up with the left one.
fn broadcast(op: &'static str, a: [usize; 2], b: [usize; 2]) -> Result<()> {
    let ok = b == a || b == [1, 1] || b == [1, a[1]] || b == [a[0], 1];
    if ok {
        Ok(())
    } else {
        Err(AutodiffError::ShapeMismatch { op, lhs: a, rhs: b })
    }
}

fn zip_broadcast(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let [r, c] = a.shape();
    let [br, bc] = b.shape();
    let (ad, bd) = (a.data(), b.data());
    if br == r && bc == c {
        return ad.iter().zip(bd).map(|(&x, &y)| f(x, y)).collect();
    }
    let mut out = Vec::with_capacity(r * c);
    if c == 0 {
        return out;
    }
    for (i, row) in ad.chunks_exact(c).enumerate() {
        let bi = if br == 1 { 0 } else { i };
        if bc == 1 {
            let y = bd[bi];
            out.extend(row.iter().map(|&x| f(x, y)));
        } else {
            out.extend(row.iter().zip(&bd[..c]).map(|(&x, &y)| f(x, y)));
        }
    }
    out
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> [usize; 2] {
        self.value().shape()
    }

    /// The value of a `1x1` variable.
    pub fn item(&self) -> f64 {
        self.value().item()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    /// A constant copy of this variable, cut off from the graph.
    pub fn detach(self) -> Var<'t> {
        self.tape.constant_rc(self.value())
    }

    fn unary(self, value: Tensor, op: Op) -> Var<'t> {
        self.tape.record(value, op, &[self.id])
    }

    fn binary(self, other: Var<'t>, value: Tensor, op: Op) -> Var<'t> {
        self.tape.record(value, op, &[self.id, other.id])
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.tape.check(other)?;
        let v = self.value().matmul(&other.value())?;
        Ok(self.binary(other, v, Op::MatMul(self.id, other.id)))
    }

    pub fn t(self) -> Var<'t> {
        let v = self.value().transpose();
        self.unary(v, Op::Transpose(self.id))
    }

    fn elementwise(
        self,
        other: Var<'t>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var<'t>> {
        self.tape.check(other)?;
        let (a, b) = (self.value(), other.value());
        broadcast(name, a.shape(), b.shape())?;
        let [r, c] = a.shape();
        let v = Tensor::checked(r, c, zip_broadcast(&a, &b, f), name)?;
        Ok(self.binary(other, v, op))
    }

    /// Elementwise sum. `other` may be the same shape, a row vector, a
    /// column vector or a scalar.
    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.elementwise(other, "add", |x, y| x + y, Op::Add(self.id, other.id))
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.elementwise(other, "sub", |x, y| x - y, Op::Sub(self.id, other.id))
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.elementwise(other, "mul", |x, y| x * y, Op::Mul(self.id, other.id))
    }

    pub fn div(self, other: Var<'t>) -> Result<Var<'t>> {
        self.elementwise(other, "div", |x, y| x / y, Op::Div(self.id, other.id))
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        let v = self.value().map(|x| x * c);
        self.unary(v, Op::Scale(self.id, c))
    }

    pub fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        let v = self.value().map(|x| x + c);
        self.unary(v, Op::AddScalar(self.id))
    }

    /// `max(x, 0)`; the subgradient at zero is zero.
    pub fn relu(self) -> Var<'t> {
        let v = self.value().map(|x| if x > 0.0 { x } else { 0.0 });
        self.unary(v, Op::Relu(self.id))
    }

    pub fn sigmoid(self) -> Var<'t> {
        let v = self.value().map(|x| 1.0 / (1.0 + (-x).exp()));
        self.unary(v, Op::Sigmoid(self.id))
    }

    pub fn log(self) -> Result<Var<'t>> {
        let a = self.value();
        let v = Tensor::checked(a.rows(), a.cols(), a.data().iter().map(|x| x.ln()).collect(), "log")?;
        Ok(self.unary(v, Op::Log(self.id)))
    }

    pub fn exp(self) -> Result<Var<'t>> {
        let a = self.value();
        let v = Tensor::checked(a.rows(), a.cols(), a.data().iter().map(|x| x.exp()).collect(), "exp")?;
        Ok(self.unary(v, Op::Exp(self.id)))
    }

    pub fn pow(self, p: f64) -> Result<Var<'t>> {
        let a = self.value();
        let v = Tensor::checked(a.rows(), a.cols(), a.data().iter().map(|x| x.powf(p)).collect(), "pow")?;
        Ok(self.unary(v, Op::Pow(self.id, p)))
    }

    pub fn sqrt(self) -> Result<Var<'t>> {
        self.pow(0.5)
    }

    pub fn row_softmax(self) -> Var<'t> {
        let a = self.value();
        let [r, c] = a.shape();
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            let row = a.row(i);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
            let s: f64 = e.iter().sum();
            out.extend(e.into_iter().map(|x| x / s));
        }
        self.unary(Tensor::raw(r, c, out), Op::RowSoftmax(self.id))
    }

    /// Row-wise `log(softmax(x))`, computed with the max-shift.
    pub fn log_softmax(self) -> Var<'t> {
        let a = self.value();
        let [r, c] = a.shape();
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            let row = a.row(i);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            out.extend(row.iter().map(|x| x - lse));
        }
        self.unary(Tensor::raw(r, c, out), Op::LogSoftmax(self.id))
    }

    /// Sum of all entries, as `1x1`.
    pub fn sum(self) -> Var<'t> {
        let s = self.value().sum();
        self.unary(Tensor::scalar(s), Op::Sum(self.id))
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.value().len().max(1) as f64;
        self.sum().scale(1.0 / n)
    }

    /// Column sums, as a `1xc` row vector.
    pub fn sum_rows(self) -> Var<'t> {
        let a = self.value();
        let [r, c] = a.shape();
        let mut out = vec![0.0; c];
        for i in 0..r {
            for (o, x) in out.iter_mut().zip(a.row(i)) {
                *o += x;
            }
        }
        self.unary(Tensor::raw(1, c, out), Op::SumRows(self.id))
    }

    /// Row sums, as an `rx1` column vector.
    pub fn sum_cols(self) -> Var<'t> {
        let a = self.value();
        let out = (0..a.rows()).map(|i| a.row(i).iter().sum()).collect();
        self.unary(Tensor::raw(a.rows(), 1, out), Op::SumCols(self.id))
    }

    /// Broadcasts a scalar, row vector or column vector to `rows x cols`.
    pub fn expand(self, rows: usize, cols: usize) -> Result<Var<'t>> {
        let a = self.value();
        if a.shape() == [rows, cols] {
            return Ok(self);
        }
        broadcast("expand", [rows, cols], a.shape())?;
        let v = Tensor::raw(rows, cols, zip_broadcast(&Tensor::zeros(rows, cols), &a, |_, y| y));
        Ok(self.unary(v, Op::Expand(self.id)))
    }

    /// Sums down to `shape`, the adjoint of [`Var::expand`].
    pub fn reduce_to(self, shape: [usize; 2]) -> Result<Var<'t>> {
        let own = self.shape();
        if own == shape {
            Ok(self)
        } else if shape == [1, 1] {
            Ok(self.sum())
        } else if shape == [1, own[1]] {
            Ok(self.sum_rows())
        } else if shape == [own[0], 1] {
            Ok(self.sum_cols())
        } else {
            Err(AutodiffError::ShapeMismatch {
                op: "reduce_to",
                lhs: own,
                rhs: shape,
            })
        }
    }

    pub fn trace(self) -> Result<Var<'t>> {
        let a = self.value();
        let [r, c] = a.shape();
        if r != c {
            return Err(AutodiffError::ShapeMismatch {
                op: "trace",
                lhs: [r, c],
                rhs: [c, r],
            });
        }
        let s = (0..r).map(|i| a.get(i, i)).sum();
        Ok(self.unary(Tensor::scalar(s), Op::Trace(self.id)))
    }

    /// Divides each row by its sum, with sums floored at `floor`.
    pub fn row_normalize(self, floor: f64) -> Result<Var<'t>> {
        let sums = self.sum_cols();
        let floored = sums.value().map(|s| if s < floor { floor } else { s });
        // Only the value is floored; the derivative follows the raw row sum.
        let shift = self.tape.constant(Tensor::raw(
            floored.rows(),
            1,
            floored
                .data()
                .iter()
                .zip(sums.value().data())
                .map(|(f, s)| f - s)
                .collect(),
        ));
        self.div(sums.add(shift)?)
    }

    /// Sum of elementwise products.
    pub fn dot(self, other: Var<'t>) -> Result<Var<'t>> {
        if self.shape() != other.shape() {
            return Err(AutodiffError::ShapeMismatch {
                op: "dot",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(self.mul(other)?.sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn relu_clamps_negatives() {
        let tape = Tape::new();
        let x = tape.constant(t1(&[vec![-1.0, 2.0]]));
        assert_eq!(x.relu().value().data(), &[0.0, 2.0]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let tape = Tape::new();
        let x = tape.constant(t1(&[vec![0.0, 0.0]]));
        assert_eq!(x.row_softmax().value().data(), &[0.5, 0.5]);
    }

    #[test]
    fn identity_matmul_returns_input() {
        let tape = Tape::new();
        let x = t1(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let y = tape.constant(Tensor::eye(3)).matmul(tape.constant(x.clone())).unwrap();
        assert_eq!(*y.value(), x);
    }

    #[test]
    fn square_derivative() {
        let tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0));
        let y = x.mul(x).unwrap();
        assert_eq!(tape.grad(y, &[x], false).unwrap().values[0].item(), 6.0);
    }

    #[test]
    fn relu_sum_derivative() {
        let tape = Tape::new();
        let x = tape.param(t1(&[vec![-1.0, 2.0]]));
        let y = x.relu().sum();
        let g = tape.grad(y, &[x], false).unwrap().values[0];
        assert_eq!(g.value().data(), &[0.0, 1.0]);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let tape = Tape::new();
        let x = tape.param(Tensor::scalar(0.0));
        let g = tape.grad(x.relu().sum(), &[x], false).unwrap().values[0];
        assert_eq!(g.item(), 0.0);
    }

    #[test]
    fn cube_second_derivative() {
        let tape = Tape::new();
        let x = tape.param(Tensor::scalar(2.0));
        let y = x.mul(x).unwrap().mul(x).unwrap();
        let dy = tape.grad(y, &[x], true).unwrap().values[0];
        assert_eq!(dy.item(), 12.0);
        let d2y = tape.grad(dy, &[x], false).unwrap().values[0];
        assert_eq!(d2y.item(), 12.0);
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let tape = Tape::new();
        let x = tape.param(t1(&[vec![1.0, 2.0]]));
        assert!(matches!(
            tape.grad(x.relu(), &[x], false),
            Err(AutodiffError::NotScalar([1, 2]))
        ));
    }

    #[test]
    fn disconnected_wrt_gets_zero_and_flag() {
        let tape = Tape::new();
        let x = tape.param(Tensor::scalar(1.0));
        let z = tape.param(t1(&[vec![1.0, 1.0]]));
        let y = x.mul(x).unwrap();
        let g = tape.grad(y, &[x, z], false).unwrap();
        assert_eq!(g.disconnected, vec![1]);
        assert_eq!(g.values[1].value().data(), &[0.0, 0.0]);
        assert!(tape.warned());
    }

    #[test]
    fn shape_mismatch_is_descriptive() {
        let tape = Tape::new();
        let a = tape.constant(Tensor::zeros(2, 3));
        let b = tape.constant(Tensor::zeros(2, 3));
        let err = a.matmul(b).unwrap_err();
        assert_eq!(err.to_string(), "shape mismatch in matmul: [2, 3] vs [2, 3]");
    }

    #[test]
    fn non_finite_result_is_an_error() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::scalar(0.0));
        assert!(matches!(x.log(), Err(AutodiffError::NonFinite("log"))));
    }

    #[test]
    fn constants_are_not_recorded_as_differentiable() {
        let tape = Tape::new();
        let a = tape.constant(Tensor::scalar(2.0));
        let b = a.mul(a).unwrap();
        assert!(!b.requires_grad());
    }

    #[test]
    fn foreign_vars_are_rejected() {
        let t1 = Tape::new();
        let t2 = Tape::new();
        let a = t1.scalar(1.0);
        let b = t2.scalar(1.0);
        assert!(matches!(a.add(b), Err(AutodiffError::ForeignVar)));
    }
}
