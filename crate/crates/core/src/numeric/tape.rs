//! Define-by-run reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every primitive applied to its [`Var`]s. Nodes are
//! appended in evaluation order, so a node's parents always precede it and
//! [`Tape::backward`] is a single reverse sweep. Tapes are meant to live for
//! one training step and then be dropped.

use std::cell::RefCell;
use std::rc::Rc;

use super::tensor::{dot, ConvGeometry, Tensor};
use crate::error::{shape_err, Error, Result};

pub type NodeId = usize;

/// Geometry of a 2×2, stride-2 average pool over NHWC rows `[n * h * w, c]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolGeometry {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

/// The differentiable primitive set.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    MatMul,
    /// Elementwise sum. The second operand may be broadcast from `[1, m]`,
    /// `[n, 1]` or a scalar.
    Add,
    /// Elementwise product of equally shaped operands.
    Mul,
    Scale(f64),
    Exp,
    Log,
    Relu,
    /// `[n, m] -> [n, 1]`
    SumRows,
    /// `[n, m] -> [n, 1]`
    MaxRows,
    Sum,
    Mean,
    L2NormalizeRows,
    /// `Z -> Z Zᵀ`
    Gram,
    /// `out[k] = x[indices[k]]` over flat storage, reshaped to `shape`.
    Gather {
        indices: Rc<Vec<usize>>,
        shape: Vec<usize>,
    },
    Reshape(Vec<usize>),
    Im2Col(ConvGeometry),
    AvgPool2(PoolGeometry),
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::MatMul => "matmul",
            Primitive::Add => "add",
            Primitive::Mul => "mul",
            Primitive::Scale(_) => "scale",
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Relu => "relu",
            Primitive::SumRows => "sum_rows",
            Primitive::MaxRows => "max_rows",
            Primitive::Sum => "sum",
            Primitive::Mean => "mean",
            Primitive::L2NormalizeRows => "l2_normalize_rows",
            Primitive::Gram => "gram",
            Primitive::Gather { .. } => "gather",
            Primitive::Reshape(_) => "reshape",
            Primitive::Im2Col(_) => "im2col",
            Primitive::AvgPool2(_) => "avg_pool2",
        }
    }

    fn arity(&self) -> usize {
        match self {
            Primitive::MatMul | Primitive::Add | Primitive::Mul => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    Row,
    Col,
    Scalar,
}

/// Forward-pass side data some primitives need for their backward rule.
#[derive(Debug, Clone)]
enum Aux {
    None,
    Broadcast(Broadcast),
    Argmax(Vec<usize>),
    Norms(Vec<f64>),
}

fn require_matrix(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    if t.shape().len() != 2 {
        return Err(shape_err(op, &[t.shape()]));
    }
    Ok((t.shape()[0], t.shape()[1]))
}

/// Evaluate a primitive without recording it.
pub fn forward_primitive(prim: &Primitive, inputs: &[&Tensor]) -> Result<Tensor> {
    forward(prim, inputs).map(|(t, _)| t)
}

fn forward(prim: &Primitive, inputs: &[&Tensor]) -> Result<(Tensor, Aux)> {
    let name = prim.name();
    if inputs.len() != prim.arity() {
        return Err(Error::InvalidTensor(format!(
            "{name} takes {} inputs, got {}",
            prim.arity(),
            inputs.len()
        )));
    }
    let x = inputs[0];
    let out = match prim {
        Primitive::MatMul => (x.matmul(inputs[1])?, Aux::None),
        Primitive::Add => {
            let b = inputs[1];
            let mode = if b.shape() == x.shape() {
                Broadcast::Same
            } else if b.len() == 1 {
                Broadcast::Scalar
            } else if x.shape().len() == 2 && b.shape() == [1, x.shape()[1]] {
                Broadcast::Row
            } else if x.shape().len() == 2 && b.shape() == [x.shape()[0], 1] {
                Broadcast::Col
            } else {
                return Err(shape_err(name, &[x.shape(), b.shape()]));
            };
            let cols = x.cols();
            let mut data = x.data().to_vec();
            for (k, v) in data.iter_mut().enumerate() {
                *v += match mode {
                    Broadcast::Same => b.data()[k],
                    Broadcast::Scalar => b.data()[0],
                    Broadcast::Row => b.data()[k % cols],
                    Broadcast::Col => b.data()[k / cols],
                };
            }
            (Tensor::new(x.shape().to_vec(), data)?, Aux::Broadcast(mode))
        }
        Primitive::Mul => (x.zip_with(inputs[1], name, |a, b| a * b)?, Aux::None),
        Primitive::Scale(s) => (x.map(|v| v * s), Aux::None),
        Primitive::Exp => (x.map(f64::exp), Aux::None),
        Primitive::Log => (x.map(f64::ln), Aux::None),
        Primitive::Relu => (x.map(|v| v.max(0.0)), Aux::None),
        Primitive::SumRows => {
            let (n, _) = require_matrix(name, x)?;
            let sums = (0..n).map(|i| x.row(i).iter().sum()).collect();
            (Tensor::matrix(n, 1, sums)?, Aux::None)
        }
        Primitive::MaxRows => {
            let (n, _) = require_matrix(name, x)?;
            let mut arg = Vec::with_capacity(n);
            let mut max = Vec::with_capacity(n);
            for i in 0..n {
                let row = x.row(i);
                let (j, v) = row
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |(bj, bv), (j, &v)| {
                        if v > bv {
                            (j, v)
                        } else {
                            (bj, bv)
                        }
                    });
                arg.push(j);
                max.push(v);
            }
            (Tensor::matrix(n, 1, max)?, Aux::Argmax(arg))
        }
        Primitive::Sum => (Tensor::scalar(x.sum()), Aux::None),
        Primitive::Mean => (Tensor::scalar(x.sum() / x.len() as f64), Aux::None),
        Primitive::L2NormalizeRows => {
            let (n, _) = require_matrix(name, x)?;
            let norms = (0..n).map(|i| dot(x.row(i), x.row(i)).sqrt()).collect();
            (x.l2_normalize_rows(), Aux::Norms(norms))
        }
        Primitive::Gram => {
            require_matrix(name, x)?;
            (x.matmul_t(x)?, Aux::None)
        }
        Primitive::Gather { indices, shape } => {
            if let Some(&bad) = indices.iter().find(|&&k| k >= x.len()) {
                return Err(Error::InvalidTensor(format!(
                    "gather index {bad} out of bounds for {} elements",
                    x.len()
                )));
            }
            let data = indices.iter().map(|&k| x.data()[k]).collect();
            (Tensor::new(shape.clone(), data)?, Aux::None)
        }
        Primitive::Reshape(shape) => (x.reshape(shape)?, Aux::None),
        Primitive::Im2Col(g) => {
            let (n, len) = require_matrix(name, x)?;
            if len != g.input_len() {
                return Err(shape_err(name, &[x.shape(), &[n, g.input_len()]]));
            }
            let offs = g.patch_offsets();
            let mut data = Vec::with_capacity(n * offs.len());
            for s in 0..n {
                let row = x.row(s);
                data.extend(offs.iter().map(|o| o.map_or(0.0, |k| row[k])));
            }
            let patches = n * g.out_height() * g.out_width();
            (Tensor::matrix(patches, g.patch_len(), data)?, Aux::None)
        }
        Primitive::AvgPool2(g) => {
            let (rows, c) = require_matrix(name, x)?;
            let per = g.height * g.width;
            if c != g.channels || rows % per != 0 || g.height % 2 != 0 || g.width % 2 != 0 {
                return Err(shape_err(name, &[x.shape(), &[per, g.channels]]));
            }
            let n = rows / per;
            let (oh, ow) = (g.height / 2, g.width / 2);
            let mut data = vec![0.0; n * oh * ow * c];
            for s in 0..n {
                for y in 0..g.height {
                    for xx in 0..g.width {
                        let src = x.row(s * per + y * g.width + xx);
                        let o = ((s * oh + y / 2) * ow + xx / 2) * c;
                        for ch in 0..c {
                            data[o + ch] += 0.25 * src[ch];
                        }
                    }
                }
            }
            (Tensor::matrix(n * oh * ow, c, data)?, Aux::None)
        }
    };
    Ok(out)
}

struct Node {
    prim: Option<Primitive>,
    parents: Vec<NodeId>,
    value: Rc<Tensor>,
    aux: Aux,
}

/// Append-only computation record.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: NodeId,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).finish()
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

    /// Record a leaf. Parameters and constants are both leaves; the
    /// distinction is only which gradients a caller reads back.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(None, Vec::new(), value, Aux::None)
    }

    fn push(&self, prim: Option<Primitive>, parents: Vec<NodeId>, value: Tensor, aux: Aux) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            prim,
            parents,
            value: Rc::new(value),
            aux,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    pub fn apply<'t>(&'t self, prim: Primitive, inputs: &[Var<'t>]) -> Result<Var<'t>> {
        let values: Vec<Rc<Tensor>> = {
            let nodes = self.nodes.borrow();
            inputs.iter().map(|v| Rc::clone(&nodes[v.id].value)).collect()
        };
        let refs: Vec<&Tensor> = values.iter().map(|v| v.as_ref()).collect();
        let (out, aux) = forward(&prim, &refs)?;
        Ok(self.push(Some(prim), inputs.iter().map(|v| v.id).collect(), out, aux))
    }

    pub fn value(&self, id: NodeId) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root_val = &nodes[root.id].value;
        if !root_val.is_scalar() {
            return Err(Error::NonScalarRoot(root_val.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[root.id] = Some(Tensor::ones(root_val.shape()));
        for id in (0..=root.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if let Some(prim) = &node.prim {
                let parents: Vec<&Tensor> = node.parents.iter().map(|&p| nodes[p].value.as_ref()).collect();
                let contribs = vjp(prim, &node.aux, &parents, &node.value, &g)?;
                for (&p, c) in node.parents.iter().zip(contribs) {
                    match &mut grads[p] {
                        Some(acc) => acc.add_assign(&c),
                        slot => *slot = Some(c),
                    }
                }
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

/// Result of [`Tape::backward`]: one gradient per node reachable from the root.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros shaped like it when the root does not depend on it.
    pub fn wrt(&self, var: Var<'_>) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(var.value().shape()))
    }
}

fn vjp(prim: &Primitive, aux: &Aux, xs: &[&Tensor], y: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
    let x = xs[0];
    let out = match prim {
        Primitive::MatMul => vec![g.matmul_t(xs[1])?, x.t_matmul(g)?],
        Primitive::Add => {
            let b = xs[1];
            let mode = match aux {
                Aux::Broadcast(m) => *m,
                _ => Broadcast::Same,
            };
            let gb = match mode {
                Broadcast::Same => g.clone(),
                Broadcast::Scalar => Tensor::new(b.shape().to_vec(), vec![g.sum()])?,
                Broadcast::Row => {
                    let cols = g.cols();
                    let mut acc = vec![0.0; cols];
                    for (k, v) in g.data().iter().enumerate() {
                        acc[k % cols] += v;
                    }
                    Tensor::new(b.shape().to_vec(), acc)?
                }
                Broadcast::Col => {
                    let sums = (0..g.rows()).map(|i| g.row(i).iter().sum()).collect();
                    Tensor::new(b.shape().to_vec(), sums)?
                }
            };
            vec![g.clone(), gb]
        }
        Primitive::Mul => vec![
            g.zip_with(xs[1], "mul", |a, b| a * b)?,
            g.zip_with(x, "mul", |a, b| a * b)?,
        ],
        Primitive::Scale(s) => vec![g.map(|v| v * s)],
        Primitive::Exp => vec![g.zip_with(y, "exp", |a, b| a * b)?],
        Primitive::Log => vec![g.zip_with(x, "log", |a, b| a / b)?],
        Primitive::Relu => vec![g.zip_with(x, "relu", |a, b| if b > 0.0 { a } else { 0.0 })?],
        Primitive::SumRows => {
            let c = x.cols();
            let data = (0..x.len()).map(|k| g.data()[k / c]).collect();
            vec![Tensor::new(x.shape().to_vec(), data)?]
        }
        Primitive::MaxRows => {
            let Aux::Argmax(arg) = aux else { unreachable!("max_rows without argmax") };
            let c = x.cols();
            let mut gx = Tensor::zeros(x.shape());
            for (i, &j) in arg.iter().enumerate() {
                gx.data_mut()[i * c + j] = g.data()[i];
            }
            vec![gx]
        }
        Primitive::Sum => vec![Tensor::full(x.shape(), g.item())],
        Primitive::Mean => vec![Tensor::full(x.shape(), g.item() / x.len() as f64)],
        Primitive::L2NormalizeRows => {
            let Aux::Norms(norms) = aux else { unreachable!("normalize without norms") };
            let c = x.cols();
            let mut gx = g.clone();
            for (i, &norm) in norms.iter().enumerate() {
                // zero rows are passed through unchanged, and so is their gradient
                if norm == 0.0 {
                    continue;
                }
                let yr = y.row(i);
                let gr = g.row(i);
                let proj = dot(yr, gr);
                for j in 0..c {
                    gx.data_mut()[i * c + j] = (gr[j] - yr[j] * proj) / norm;
                }
            }
            vec![gx]
        }
        Primitive::Gram => {
            let sym = g.zip_with(&g.transpose()?, "gram", |a, b| a + b)?;
            vec![sym.matmul(x)?]
        }
        Primitive::Gather { indices, .. } => {
            let mut gx = Tensor::zeros(x.shape());
            for (k, &src) in indices.iter().enumerate() {
                gx.data_mut()[src] += g.data()[k];
            }
            vec![gx]
        }
        Primitive::Reshape(_) => vec![g.reshape(x.shape())?],
        Primitive::Im2Col(geom) => {
            let offs = geom.patch_offsets();
            let per = offs.len();
            let mut gx = Tensor::zeros(x.shape());
            let len = geom.input_len();
            for s in 0..x.rows() {
                let gs = &g.data()[s * per..(s + 1) * per];
                let dst = &mut gx.data_mut()[s * len..(s + 1) * len];
                for (o, &v) in offs.iter().zip(gs) {
                    if let Some(k) = o {
                        dst[*k] += v;
                    }
                }
            }
            vec![gx]
        }
        Primitive::AvgPool2(geom) => {
            let c = geom.channels;
            let per = geom.height * geom.width;
            let (oh, ow) = (geom.height / 2, geom.width / 2);
            let n = x.rows() / per;
            let mut gx = Tensor::zeros(x.shape());
            for s in 0..n {
                for yy in 0..geom.height {
                    for xx in 0..geom.width {
                        let dst = (s * per + yy * geom.width + xx) * c;
                        let src = ((s * oh + yy / 2) * ow + xx / 2) * c;
                        for ch in 0..c {
                            gx.data_mut()[dst + ch] = 0.25 * g.data()[src + ch];
                        }
                    }
                }
            }
            vec![gx]
        }
    };
    Ok(out)
}

impl<'t> Var<'t> {
    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    fn unary(self, prim: Primitive) -> Result<Var<'t>> {
        self.tape.apply(prim, &[self])
    }

    fn binary(self, prim: Primitive, other: Var<'t>) -> Result<Var<'t>> {
        self.tape.apply(prim, &[self, other])
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(Primitive::MatMul, other)
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(Primitive::Add, other)
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        let neg = other.scale(-1.0)?;
        self.add(neg)
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(Primitive::Mul, other)
    }

    pub fn scale(self, s: f64) -> Result<Var<'t>> {
        self.unary(Primitive::Scale(s))
    }

    pub fn exp(self) -> Result<Var<'t>> {
        self.unary(Primitive::Exp)
    }

    pub fn ln(self) -> Result<Var<'t>> {
        self.unary(Primitive::Log)
    }

    pub fn relu(self) -> Result<Var<'t>> {
        self.unary(Primitive::Relu)
    }

    pub fn sum_rows(self) -> Result<Var<'t>> {
        self.unary(Primitive::SumRows)
    }

    pub fn max_rows(self) -> Result<Var<'t>> {
        self.unary(Primitive::MaxRows)
    }

    pub fn sum(self) -> Result<Var<'t>> {
        self.unary(Primitive::Sum)
    }

    pub fn mean(self) -> Result<Var<'t>> {
        self.unary(Primitive::Mean)
    }

    pub fn l2_normalize_rows(self) -> Result<Var<'t>> {
        self.unary(Primitive::L2NormalizeRows)
    }

    pub fn gram(self) -> Result<Var<'t>> {
        self.unary(Primitive::Gram)
    }

    pub fn gather(self, indices: Vec<usize>, shape: Vec<usize>) -> Result<Var<'t>> {
        self.unary(Primitive::Gather {
            indices: Rc::new(indices),
            shape,
        })
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Var<'t>> {
        self.unary(Primitive::Reshape(shape))
    }

    pub fn im2col(self, geom: ConvGeometry) -> Result<Var<'t>> {
        self.unary(Primitive::Im2Col(geom))
    }

    pub fn avg_pool2(self, geom: PoolGeometry) -> Result<Var<'t>> {
        self.unary(Primitive::AvgPool2(geom))
    }

    /// Row-wise `log Σ_j exp(x_ij)` for entries where `mask` is 1, via
    /// max subtraction. `mask` is a constant `[n, m]` 0/1 tensor.
    pub fn masked_logsumexp_rows(self, mask: &Tensor) -> Result<Var<'t>> {
        let tape = self.tape;
        let x = self.value();
        if x.shape() != mask.shape() || x.shape().len() != 2 {
            return Err(shape_err("masked_logsumexp_rows", &[x.shape(), mask.shape()]));
        }
        // The shift is the max over kept entries only; the result does not
        // depend on it, so it enters as a constant.
        let cols = x.cols();
        let shift: Vec<f64> = x
            .data()
            .chunks(cols)
            .zip(mask.data().chunks(cols))
            .map(|(r, k)| {
                let m = r
                    .iter()
                    .zip(k)
                    .filter(|(_, &keep)| keep != 0.0)
                    .map(|(&v, _)| v)
                    .fold(f64::NEG_INFINITY, f64::max);
                if m.is_finite() {
                    m
                } else {
                    0.0
                }
            })
            .collect();
        let m = tape.leaf(Tensor::matrix(x.rows(), 1, shift)?);
        let keep = tape.leaf(mask.clone());
        // Masking before exp keeps dropped entries from overflowing to inf * 0.
        let kept = self.sub(m)?.mul(keep)?.exp()?.mul(keep)?;
        kept.sum_rows()?.ln()?.add(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn relu_forward() {
        let x = Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap();
        let y = forward_primitive(&Primitive::Relu, &[&x]).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn normalize_forward() {
        let x = t(&[vec![3.0, 4.0]]);
        let y = forward_primitive(&Primitive::L2NormalizeRows, &[&x]).unwrap();
        assert!((y.data()[0] - 0.6).abs() < 1e-15 && (y.data()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn matmul_shape_error_names_primitive() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        let err = forward_primitive(&Primitive::MatMul, &[&a, &b]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("matmul") && msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn add_rejects_incompatible_broadcast() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[3, 2]);
        assert!(forward_primitive(&Primitive::Add, &[&a, &b]).is_err());
    }

    #[test]
    fn sum_gradient_is_ones() {
        let tape = Tape::new();
        let x = tape.leaf(t(&[vec![1.0, -2.0, 3.0], vec![0.5, 0.0, 9.0]]));
        let s = x.sum().unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(x), Tensor::ones(&[2, 3]));
    }

    #[test]
    fn dot_self_gradient() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        let y = x.mul(x).unwrap().sum().unwrap();
        assert_eq!(y.value().item(), 5.0);
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(x).data(), &[2.0, 4.0]);
    }

    #[test]
    fn non_scalar_root_rejected() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[2, 2]));
        let y = x.relu().unwrap();
        assert!(matches!(tape.backward(y), Err(Error::NonScalarRoot(_))));
    }

    #[test]
    fn unreached_leaf_has_zero_gradient() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::ones(&[2]));
        let unused = tape.leaf(Tensor::ones(&[3]));
        let y = x.sum().unwrap();
        let g = tape.backward(y).unwrap();
        assert!(g.get(unused).is_none());
        assert_eq!(g.wrt(unused), Tensor::zeros(&[3]));
    }

    #[test]
    fn parents_precede_children() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::ones(&[2, 2]));
        let y = x.gram().unwrap().exp().unwrap().sum().unwrap();
        let nodes = tape.nodes.borrow();
        for (id, node) in nodes.iter().enumerate() {
            assert!(node.parents.iter().all(|&p| p < id));
        }
        assert_eq!(y.id(), nodes.len() - 1);
    }

    #[test]
    fn masked_logsumexp_matches_direct() {
        let tape = Tape::new();
        let x = tape.leaf(t(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.0]]));
        let mask = t(&[vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0]]);
        let lse = x.masked_logsumexp_rows(&mask).unwrap().value();
        let r0 = (2f64.exp() + 3f64.exp()).ln();
        let r1 = ((-1f64).exp() + 0f64.exp()).ln();
        assert!((lse.data()[0] - r0).abs() < 1e-14);
        assert!((lse.data()[1] - r1).abs() < 1e-14);
    }

    #[test]
    fn avg_pool_halves_resolution() {
        let g = PoolGeometry {
            height: 2,
            width: 2,
            channels: 1,
        };
        let x = Tensor::matrix(4, 1, vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        let y = forward_primitive(&Primitive::AvgPool2(g), &[&x]).unwrap();
        assert_eq!(y.shape(), &[1, 1]);
        assert_eq!(y.item(), 3.0);
    }
}
