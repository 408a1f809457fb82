use std::cell::{Ref, RefCell};
use std::rc::Rc;

use super::kernels::{self, ConvGeometry};
use super::special::{erfc, erfc_derivative};
use super::{AdError, Result, Tensor};
use crate::linalg::{CMatrix, LinalgError};

/// Records operations for one reverse pass.
///
/// Node ids grow monotonically and every op only references existing nodes,
/// so id order is a topological order.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    requires_grad: bool,
}

enum Op {
    Leaf,
    Constant,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    ScaleBy(usize, usize),
    MatMul(usize, usize),
    Transpose(usize),
    Sum(usize),
    SumRows(usize),
    Diag(usize),
    Prod(usize),
    Sqrt(usize),
    Recip(usize),
    Exp(usize),
    Tanh(usize),
    Sigmoid(usize),
    Relu(usize),
    Erfc(usize),
    Clamp { x: usize, lo: f64, hi: f64 },
    Reshape(usize),
    Slice { x: usize, offset: usize },
    Concat(Vec<usize>),
    Conv2d { x: usize, w: usize, b: usize, geom: ConvGeometry },
    MaxPool2d { x: usize, argmax: Vec<usize> },
    ComplexInverse { re: usize, im: usize },
}

impl Op {
    fn parents(&self) -> Vec<usize> {
        use Op::*;
        match self {
            Leaf | Constant => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | ScaleBy(a, b) | MatMul(a, b) => vec![*a, *b],
            Scale(a, _) | AddScalar(a) | Transpose(a) | Sum(a) | SumRows(a) | Diag(a) | Prod(a)
            | Sqrt(a) | Recip(a) | Exp(a) | Tanh(a) | Sigmoid(a) | Relu(a) | Erfc(a)
            | Reshape(a) => vec![*a],
            Clamp { x, .. } | Slice { x, .. } | MaxPool2d { x, .. } => vec![*x],
            Concat(xs) => xs.clone(),
            Conv2d { x, w, b, .. } => vec![*x, *w, *b],
            ComplexInverse { re, im } => vec![*re, *im],
        }
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).field("shape", &self.shape()).finish()
    }
}

/// Gradients of a scalar root with respect to every leaf of the tape.
#[derive(Debug)]
pub struct Gradients {
    leaves: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `var`; all zeros if `var` does not influence the root.
    ///
    /// Panics if `var` is not a leaf.
    pub fn wrt(&self, var: Var<'_>) -> &Tensor {
        self.leaves[var.id].as_ref().expect("gradient requested for a non-leaf variable")
    }
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

    /// A differentiable input.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push_unchecked(value, Op::Leaf, true)
    }

    /// A non-differentiable input.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push_unchecked(value, Op::Constant, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Tensor::scalar(value))
    }

    fn push_unchecked(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value: Rc::new(value), op, requires_grad });
        Var { tape: self, id: nodes.len() - 1 }
    }

    fn push(&self, name: &'static str, value: Tensor, op: Op) -> Result<Var<'_>> {
        if !value.is_finite() {
            return Err(AdError::NonFinite { op: name });
        }
        let requires_grad = {
            let nodes = self.nodes.borrow();
            op.parents().iter().any(|&p| nodes[p].requires_grad)
        };
        Ok(self.push_unchecked(value, op, requires_grad))
    }

    fn value(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// Reverse pass from a one-element `root`.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients> {
        assert!(std::ptr::eq(root.tape, self), "root belongs to another tape");
        let nodes = self.nodes.borrow();
        let rv = &nodes[root.id].value;
        if rv.len() != 1 {
            return Err(AdError::NonScalarRoot { shape: rv.shape().to_vec() });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.id + 1];
        grads[root.id] = Some(vec![1.0]);
        for id in (0..=root.id).rev() {
            let node = &nodes[id];
            if matches!(node.op, Op::Leaf | Op::Constant) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            if !node.requires_grad {
                continue;
            }
            backprop(&nodes, id, &g, &mut grads);
        }
        let leaves = nodes
            .iter()
            .enumerate()
            .map(|(id, n)| match n.op {
                Op::Leaf => Some(match grads.get_mut(id).and_then(Option::take) {
                    Some(g) => Tensor::from_raw(n.value.shape().to_vec(), g),
                    None => Tensor::zeros(n.value.shape().to_vec()),
                }),
                _ => None,
            })
            .collect();
        Ok(Gradients { leaves })
    }
}

fn accumulate(nodes: &[Node], grads: &mut [Option<Vec<f64>>], id: usize, contrib: Vec<f64>) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(g) => g.iter_mut().zip(&contrib).for_each(|(a, b)| *a += b),
        slot => *slot = Some(contrib),
    }
}

fn map_grad(g: &[f64], x: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    g.iter().zip(x).map(|(&g, &x)| f(g, x)).collect()
}

fn backprop(nodes: &[Node], id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let y = nodes[id].value.data();
    let val = |i: usize| nodes[i].value.data();
    let needs = |i: usize| nodes[i].requires_grad;
    let mut acc = |i: usize, c: Vec<f64>| accumulate(nodes, grads, i, c);
    match &nodes[id].op {
        Op::Leaf | Op::Constant => {}
        Op::Add(a, b) => {
            acc(*a, g.to_vec());
            acc(*b, g.to_vec());
        }
        Op::Sub(a, b) => {
            acc(*a, g.to_vec());
            acc(*b, g.iter().map(|v| -v).collect());
        }
        Op::Mul(a, b) => {
            if needs(*a) {
                acc(*a, map_grad(g, val(*b), |g, bv| g * bv));
            }
            if needs(*b) {
                acc(*b, map_grad(g, val(*a), |g, av| g * av));
            }
        }
        Op::Scale(a, s) => acc(*a, g.iter().map(|v| v * s).collect()),
        Op::AddScalar(a) => acc(*a, g.to_vec()),
        Op::ScaleBy(a, s) => {
            let sv = val(*s)[0];
            if needs(*a) {
                acc(*a, g.iter().map(|v| v * sv).collect());
            }
            if needs(*s) {
                let d: f64 = g.iter().zip(val(*a)).map(|(g, x)| g * x).sum();
                acc(*s, vec![d]);
            }
        }
        Op::MatMul(a, b) => {
            let (m, k) = nodes[*a].value.dims2().unwrap();
            let n = nodes[*b].value.shape()[1];
            if needs(*a) {
                acc(*a, kernels::matmul_nt(g, val(*b), m, n, k));
            }
            if needs(*b) {
                acc(*b, kernels::matmul_tn(val(*a), g, m, k, n));
            }
        }
        Op::Transpose(a) => {
            let (r, c) = nodes[*a].value.dims2().unwrap();
            acc(*a, kernels::transpose(g, c, r));
        }
        Op::Sum(a) => acc(*a, vec![g[0]; val(*a).len()]),
        Op::SumRows(a) => {
            let (r, c) = nodes[*a].value.dims2().unwrap();
            let mut d = vec![0.0; r * c];
            for i in 0..r {
                d[i * c..(i + 1) * c].fill(g[i]);
            }
            acc(*a, d);
        }
        Op::Diag(a) => {
            let n = g.len();
            let mut d = vec![0.0; n * n];
            for i in 0..n {
                d[i * n + i] = g[i];
            }
            acc(*a, d);
        }
        Op::Prod(a) => {
            // prefix/suffix products keep this exact when some factors are 0
            let x = val(*a);
            let n = x.len();
            let mut prefix = vec![1.0; n + 1];
            for i in 0..n {
                prefix[i + 1] = prefix[i] * x[i];
            }
            let mut d = vec![0.0; n];
            let mut suffix = 1.0;
            for i in (0..n).rev() {
                d[i] = g[0] * prefix[i] * suffix;
                suffix *= x[i];
            }
            acc(*a, d);
        }
        Op::Sqrt(a) => acc(*a, map_grad(g, y, |g, y| 0.5 * g / y)),
        Op::Recip(a) => acc(*a, map_grad(g, y, |g, y| -g * y * y)),
        Op::Exp(a) => acc(*a, map_grad(g, y, |g, y| g * y)),
        Op::Tanh(a) => acc(*a, map_grad(g, y, |g, y| g * (1.0 - y * y))),
        Op::Sigmoid(a) => acc(*a, map_grad(g, y, |g, y| g * y * (1.0 - y))),
        Op::Relu(a) => acc(*a, map_grad(g, val(*a), |g, x| if x > 0.0 { g } else { 0.0 })),
        Op::Erfc(a) => acc(*a, map_grad(g, val(*a), |g, x| g * erfc_derivative(x))),
        Op::Clamp { x, lo, hi } => {
            let (lo, hi) = (*lo, *hi);
            acc(*x, map_grad(g, val(*x), |g, x| if x >= lo && x <= hi { g } else { 0.0 }));
        }
        Op::Reshape(a) => acc(*a, g.to_vec()),
        Op::Slice { x, offset } => {
            let mut d = vec![0.0; val(*x).len()];
            d[*offset..*offset + g.len()].copy_from_slice(g);
            acc(*x, d);
        }
        Op::Concat(parts) => {
            let mut off = 0;
            for &p in parts {
                let len = val(p).len();
                if needs(p) {
                    acc(p, g[off..off + len].to_vec());
                }
                off += len;
            }
        }
        Op::Conv2d { x, w, b, geom } => {
            let (dx, dw, db) = kernels::conv2d_backward(val(*x), val(*w), g, *geom, needs(*x));
            if let Some(dx) = dx {
                acc(*x, dx);
            }
            acc(*w, dw);
            acc(*b, db);
        }
        Op::MaxPool2d { x, argmax } => {
            let mut d = vec![0.0; val(*x).len()];
            for (gi, &src) in g.iter().zip(argmax) {
                d[src] += gi;
            }
            acc(*x, d);
        }
        Op::ComplexInverse { re, im } => {
            // G_A = -C^H G_C C^H with C = A^{-1}
            let n = nodes[*re].value.shape()[0];
            let nn = n * n;
            let c = CMatrix::from_parts(n, n, &y[..nn], &y[nn..]);
            let gc = CMatrix::from_parts(n, n, &g[..nn], &g[nn..]);
            let ch = c.adjoint();
            let ga = (&(&ch * &gc) * &ch).scale((-1.0).into());
            acc(*re, ga.real_part());
            acc(*im, ga.imag_part());
        }
    }
}

fn shape_err(op: &'static str, detail: String) -> AdError {
    AdError::Shape { op, detail }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value(self.id)
    }

    /// Borrow of the forward value without bumping the refcount.
    pub fn with_value<R>(&self, f: impl FnOnce(&Tensor) -> R) -> R {
        let nodes: Ref<'_, Vec<Node>> = self.tape.nodes.borrow();
        f(&nodes[self.id].value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.with_value(|t| t.shape().to_vec())
    }

    pub fn item(&self) -> f64 {
        self.with_value(|t| t.item())
    }

    fn same_tape(&self, other: &Var<'_>) {
        assert!(std::ptr::eq(self.tape, other.tape), "variables from different tapes");
    }

    fn unary(&self, name: &'static str, f: impl Fn(f64) -> f64, op: Op) -> Result<Var<'t>> {
        let v = self.value();
        let data = v.data().iter().map(|&x| f(x)).collect();
        self.tape.push(name, Tensor::from_raw(v.shape().to_vec(), data), op)
    }

    fn binary(
        &self,
        other: Var<'t>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var<'t>> {
        self.same_tape(&other);
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() {
            return Err(shape_err(name, format!("{:?} vs {:?}", a.shape(), b.shape())));
        }
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        self.tape.push(name, Tensor::from_raw(a.shape().to_vec(), data), op)
    }

    pub fn add(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "add", |x, y| x + y, Op::Add(self.id, other.id))
    }

    pub fn sub(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "sub", |x, y| x - y, Op::Sub(self.id, other.id))
    }

    /// Elementwise product.
    pub fn mul(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "mul", |x, y| x * y, Op::Mul(self.id, other.id))
    }

    pub fn scale(&self, s: f64) -> Result<Var<'t>> {
        self.unary("scale", |x| x * s, Op::Scale(self.id, s))
    }

    pub fn neg(&self) -> Result<Var<'t>> {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, c: f64) -> Result<Var<'t>> {
        self.unary("add_scalar", |x| x + c, Op::AddScalar(self.id))
    }

    /// Multiplies every entry by the one-element tensor `s`.
    pub fn scale_by(&self, s: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&s);
        let sv = s.value();
        if sv.len() != 1 {
            return Err(shape_err("scale_by", format!("scale factor has shape {:?}", sv.shape())));
        }
        let k = sv.data()[0];
        self.unary("scale_by", |x| x * k, Op::ScaleBy(self.id, s.id))
    }

    pub fn matmul(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other);
        let (a, b) = (self.value(), other.value());
        let (Some((m, k)), Some((k2, n))) = (a.dims2(), b.dims2()) else {
            return Err(shape_err("matmul", format!("{:?} x {:?}", a.shape(), b.shape())));
        };
        if k != k2 {
            return Err(shape_err("matmul", format!("{:?} x {:?}", a.shape(), b.shape())));
        }
        let data = kernels::matmul(a.data(), b.data(), m, k, n);
        self.tape.push("matmul", Tensor::from_raw(vec![m, n], data), Op::MatMul(self.id, other.id))
    }

    pub fn transpose(&self) -> Result<Var<'t>> {
        let a = self.value();
        let Some((r, c)) = a.dims2() else {
            return Err(shape_err("transpose", format!("{:?}", a.shape())));
        };
        let data = kernels::transpose(a.data(), r, c);
        self.tape.push("transpose", Tensor::from_raw(vec![c, r], data), Op::Transpose(self.id))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&self) -> Result<Var<'t>> {
        let s = self.with_value(|t| t.data().iter().sum());
        self.tape.push("sum", Tensor::scalar(s), Op::Sum(self.id))
    }

    /// `[r, c] -> [r]`, summing each row.
    pub fn sum_rows(&self) -> Result<Var<'t>> {
        let a = self.value();
        let Some((r, c)) = a.dims2() else {
            return Err(shape_err("sum_rows", format!("{:?}", a.shape())));
        };
        let data = (0..r).map(|i| a.data()[i * c..(i + 1) * c].iter().sum()).collect();
        self.tape.push("sum_rows", Tensor::from_raw(vec![r], data), Op::SumRows(self.id))
    }

    /// Main diagonal of a square matrix.
    pub fn diag(&self) -> Result<Var<'t>> {
        let a = self.value();
        let n = match a.dims2() {
            Some((r, c)) if r == c => r,
            _ => return Err(shape_err("diag", format!("{:?}", a.shape()))),
        };
        let data = (0..n).map(|i| a.data()[i * n + i]).collect();
        self.tape.push("diag", Tensor::from_raw(vec![n], data), Op::Diag(self.id))
    }

    /// Product of all entries, as a scalar.
    pub fn prod(&self) -> Result<Var<'t>> {
        let p = self.with_value(|t| t.data().iter().product());
        self.tape.push("prod", Tensor::scalar(p), Op::Prod(self.id))
    }

    pub fn sqrt(&self) -> Result<Var<'t>> {
        self.unary("sqrt", f64::sqrt, Op::Sqrt(self.id))
    }

    pub fn recip(&self) -> Result<Var<'t>> {
        self.unary("reciprocal", f64::recip, Op::Recip(self.id))
    }

    pub fn exp(&self) -> Result<Var<'t>> {
        self.unary("exp", f64::exp, Op::Exp(self.id))
    }

    pub fn tanh(&self) -> Result<Var<'t>> {
        self.unary("tanh", f64::tanh, Op::Tanh(self.id))
    }

    pub fn sigmoid(&self) -> Result<Var<'t>> {
        self.unary("sigmoid", sigmoid, Op::Sigmoid(self.id))
    }

    pub fn relu(&self) -> Result<Var<'t>> {
        self.unary("relu", |x| x.max(0.0), Op::Relu(self.id))
    }

    pub fn erfc(&self) -> Result<Var<'t>> {
        self.unary("erfc", erfc, Op::Erfc(self.id))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&self, lo: f64, hi: f64) -> Result<Var<'t>> {
        self.unary("clamp", |x| x.clamp(lo, hi), Op::Clamp { x: self.id, lo, hi })
    }

    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Var<'t>> {
        let shape = shape.into();
        let a = self.value();
        if shape.iter().product::<usize>() != a.len() || shape.contains(&0) {
            return Err(shape_err("reshape", format!("{:?} -> {shape:?}", a.shape())));
        }
        self.tape.push("reshape", Tensor::from_raw(shape, a.data().to_vec()), Op::Reshape(self.id))
    }

    /// Contiguous flat range `[offset, offset + len)` of the row-major data,
    /// reshaped to `shape`.
    pub fn slice(&self, offset: usize, shape: impl Into<Vec<usize>>) -> Result<Var<'t>> {
        let shape = shape.into();
        let len: usize = shape.iter().product();
        let a = self.value();
        if offset + len > a.len() || len == 0 {
            return Err(shape_err(
                "slice",
                format!("[{offset}, {}) of {:?}", offset + len, a.shape()),
            ));
        }
        let data = a.data()[offset..offset + len].to_vec();
        self.tape.push("slice", Tensor::from_raw(shape, data), Op::Slice { x: self.id, offset })
    }

    /// Rows `[start, start + count)` of a matrix.
    pub fn rows(&self, start: usize, count: usize) -> Result<Var<'t>> {
        let Some((r, c)) = self.with_value(|t| t.dims2()) else {
            return Err(shape_err("rows", format!("{:?}", self.shape())));
        };
        if start + count > r {
            return Err(shape_err("rows", format!("rows {start}+{count} of {r}")));
        }
        self.slice(start * c, [count, c])
    }

    /// Flat concatenation of all parts into `shape`.
    pub fn concat(parts: &[Var<'t>], shape: impl Into<Vec<usize>>) -> Result<Var<'t>> {
        let shape = shape.into();
        let tape = parts.first().expect("concat of nothing").tape;
        let mut data = Vec::new();
        for p in parts {
            p.same_tape(&parts[0]);
            p.with_value(|t| data.extend_from_slice(t.data()));
        }
        if shape.iter().product::<usize>() != data.len() {
            return Err(shape_err("concat", format!("{} values into {shape:?}", data.len())));
        }
        tape.push("concat", Tensor::from_raw(shape, data), Op::Concat(parts.iter().map(|p| p.id).collect()))
    }

    /// Multi-channel 2-D convolution (cross-correlation), stride 1.
    ///
    /// `self: [c_in, h, w]`, `weight: [c_out, c_in, kh, kw]`, `bias: [c_out]`.
    pub fn conv2d(&self, weight: Var<'t>, bias: Var<'t>, padding: usize) -> Result<Var<'t>> {
        self.same_tape(&weight);
        self.same_tape(&bias);
        let (x, w, b) = (self.value(), weight.value(), bias.value());
        let (&[c_in, h, wd], &[c_out, wc_in, kh, kw], &[bc]) = (x.shape(), w.shape(), b.shape()) else {
            return Err(shape_err(
                "conv2d",
                format!("input {:?}, weight {:?}, bias {:?}", x.shape(), w.shape(), b.shape()),
            ));
        };
        if wc_in != c_in || bc != c_out || h + 2 * padding < kh || wd + 2 * padding < kw {
            return Err(shape_err(
                "conv2d",
                format!("input {:?}, weight {:?}, bias {:?}", x.shape(), w.shape(), b.shape()),
            ));
        }
        let geom = ConvGeometry { c_in, h, w: wd, c_out, kh, kw, padding };
        let data = kernels::conv2d(x.data(), w.data(), b.data(), geom);
        let shape = vec![c_out, geom.out_h(), geom.out_w()];
        self.tape.push(
            "conv2d",
            Tensor::from_raw(shape, data),
            Op::Conv2d { x: self.id, w: weight.id, b: bias.id, geom },
        )
    }

    /// Max pooling over `[c, h, w]` with window and stride `size`.
    pub fn max_pool2d(&self, size: usize) -> Result<Var<'t>> {
        let x = self.value();
        let &[c, h, w] = x.shape() else {
            return Err(shape_err("max_pool2d", format!("{:?}", x.shape())));
        };
        if size == 0 || h < size || w < size {
            return Err(shape_err("max_pool2d", format!("window {size} on {:?}", x.shape())));
        }
        let (data, argmax) = kernels::max_pool2d(x.data(), c, h, w, size);
        let shape = vec![c, h / size, w / size];
        self.tape.push("max_pool2d", Tensor::from_raw(shape, data), Op::MaxPool2d { x: self.id, argmax })
    }

    /// Inverse of the complex matrix `re + j·im`, returned stacked as
    /// `[2, n, n]` (real plane first).
    pub(crate) fn complex_inverse(re: Var<'t>, im: Var<'t>) -> Result<Var<'t>> {
        re.same_tape(&im);
        let (a, b) = (re.value(), im.value());
        let n = match a.dims2() {
            Some((r, c)) if r == c && a.shape() == b.shape() => r,
            _ => {
                return Err(shape_err(
                    "complex_inverse",
                    format!("{:?} / {:?}", a.shape(), b.shape()),
                ))
            }
        };
        let m = CMatrix::from_parts(n, n, a.data(), b.data());
        let inv = m.inverse().map_err(|e| match e {
            LinalgError::Singular { pivot, magnitude } => {
                AdError::Singular { op: "complex_inverse", pivot, magnitude }
            }
            LinalgError::Dimension { .. } => shape_err("complex_inverse", e.to_string()),
        })?;
        let mut data = inv.real_part();
        data.extend(inv.imag_part());
        re.tape.push(
            "complex_inverse",
            Tensor::from_raw(vec![2, n, n], data),
            Op::ComplexInverse { re: re.id, im: im.id },
        )
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
