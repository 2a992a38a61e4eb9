//! Graph execution: forward evaluation and reverse-mode accumulation.

use std::collections::BTreeMap;

use super::ops;
use super::{ComputationGraph, NodeId, Op, ParameterSet};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Batch-statistics handling for normalization layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

enum Aux {
    None,
    Pool(Vec<u32>),
    Bn { mean: Vec<f64>, var: Vec<f64> },
    Xent { probs: Tensor, logp: Tensor },
}

/// Every node value of one forward pass.
pub struct Execution {
    pub values: Vec<Tensor>,
    aux: Vec<Aux>,
    pub mode: Mode,
    /// Running-statistic updates `(param index, new value)` produced by
    /// train-mode normalization; apply with [`Execution::apply_stat_updates`].
    pub stat_updates: Vec<(usize, Tensor)>,
}

impl Execution {
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.values[id]
    }

    pub fn apply_stat_updates(&self, params: &mut ParameterSet) {
        for (idx, v) in &self.stat_updates {
            params.values[*idx] = v.clone();
        }
    }
}

/// Evaluate the graph on a batch.
pub fn forward(
    graph: &ComputationGraph,
    params: &ParameterSet,
    inputs: &BTreeMap<String, Tensor>,
    mode: Mode,
) -> Result<Execution> {
    params.validate_against(graph)?;
    let mut values: Vec<Tensor> = Vec::with_capacity(graph.nodes.len());
    let mut aux: Vec<Aux> = Vec::with_capacity(graph.nodes.len());
    let mut stat_updates = Vec::new();
    for node in &graph.nodes {
        let ins = &node.inputs;
        let mut a = Aux::None;
        let value = match &node.op {
            Op::Input { name } => inputs
                .get(name)
                .cloned()
                .ok_or_else(|| Error::Graph(format!("missing input `{name}`")))?,
            Op::Param { index } => params.values[*index].clone(),
            Op::Conv1d { stride, pad } => {
                ops::conv1d_forward(&values[ins[0]], &values[ins[1]], *stride, *pad)?
            }
            Op::Conv2d { stride, pad } => {
                ops::conv2d_forward(&values[ins[0]], &values[ins[1]], *stride, *pad)?
            }
            Op::BiasAdd => ops::bias_add_forward(&values[ins[0]], &values[ins[1]])?,
            Op::MaxPool1d { window, stride, pad } => {
                let (y, idx) = ops::maxpool1d_forward(&values[ins[0]], *window, *stride, *pad)?;
                a = Aux::Pool(idx);
                y
            }
            Op::MaxPool2d { window, stride, pad } => {
                let (y, idx) = ops::maxpool2d_forward(&values[ins[0]], *window, *stride, *pad)?;
                a = Aux::Pool(idx);
                y
            }
            Op::Relu => values[ins[0]].map(|v| v.max(0.0)),
            Op::BatchNorm { rm, rv, momentum, eps } => {
                let x = &values[ins[0]];
                let gamma = &values[ins[1]];
                let beta = &values[ins[2]];
                match mode {
                    Mode::Train => {
                        let out = ops::batchnorm_train(
                            x,
                            gamma,
                            beta,
                            &params.values[*rm],
                            &params.values[*rv],
                            *momentum,
                            *eps,
                        )?;
                        stat_updates.push((*rm, out.new_rm));
                        stat_updates.push((*rv, out.new_rv));
                        a = Aux::Bn { mean: out.mean, var: out.var };
                        out.y
                    }
                    Mode::Eval => ops::batchnorm_eval(
                        x,
                        gamma,
                        beta,
                        &params.values[*rm],
                        &params.values[*rv],
                        *eps,
                    ),
                }
            }
            Op::SoftmaxT { temperature } => {
                ops::softmax_t_forward(&values[ins[0]], *temperature)?
            }
            Op::CrossEntropy => {
                ops::cross_entropy_forward(&values[ins[0]], &values[ins[1]])?
            }
            Op::SoftmaxXent { temperature } => {
                let (loss, probs, logp) =
                    ops::softmax_xent_forward(&values[ins[0]], &values[ins[1]], *temperature)?;
                a = Aux::Xent { probs, logp };
                loss
            }
            Op::Transpose { perm } => ops::transpose_forward(&values[ins[0]], perm),
            Op::Reshape { dims } => {
                let x = &values[ins[0]];
                let shape = ops::resolve_dims(dims, x.len())?;
                x.clone().reshaped(&shape)?
            }
            Op::MeanAxes { axes } => ops::mean_axes_forward(&values[ins[0]], axes),
            Op::Scale { c } => values[ins[0]].map(|v| v * c),
            Op::Add => {
                let (a0, b0) = (&values[ins[0]], &values[ins[1]]);
                if a0.shape() != b0.shape() {
                    return Err(Error::Shape(format!(
                        "add: {:?} vs {:?}",
                        a0.shape(),
                        b0.shape()
                    )));
                }
                let mut y = a0.clone();
                y.add_in_place(b0);
                y
            }
            Op::Mul => {
                let (a0, b0) = (&values[ins[0]], &values[ins[1]]);
                if a0.shape() != b0.shape() {
                    return Err(Error::Shape(format!(
                        "mul: {:?} vs {:?}",
                        a0.shape(),
                        b0.shape()
                    )));
                }
                let mut y = a0.clone();
                for (v, b) in y.data_mut().iter_mut().zip(b0.data()) {
                    *v *= b;
                }
                y
            }
            Op::Concat { axis } => {
                let parts: Vec<&Tensor> = ins.iter().map(|&i| &values[i]).collect();
                ops::concat_forward(&parts, *axis)?
            }
        };
        values.push(value);
        aux.push(a);
    }
    Ok(Execution { values, aux, mode, stat_updates })
}

/// Parameter gradients of one backward pass, aligned with the graph's
/// parameter table. Unused parameters get `None`, i.e. exactly zero.
pub struct Gradients {
    pub by_param: Vec<Option<Tensor>>,
    /// Gradients for explicitly requested nodes (e.g. inputs, for probes).
    pub by_node: BTreeMap<NodeId, Tensor>,
}

impl Gradients {
    /// Gradient tensor for parameter `index`, materializing zeros.
    pub fn param(&self, graph: &ComputationGraph, index: usize) -> Tensor {
        self.by_param[index]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(&graph.params[index].shape))
    }
}

/// Reverse-mode accumulation from a scalar loss node. Gradient buffers
/// are dropped as soon as their consumers are processed.
pub fn backward(
    graph: &ComputationGraph,
    params: &ParameterSet,
    exec: &Execution,
    loss: NodeId,
    want_nodes: &[NodeId],
) -> Result<Gradients> {
    if exec.values[loss].len() != 1 {
        return Err(Error::Graph(format!(
            "loss node must be scalar, has shape {:?}",
            exec.values[loss].shape()
        )));
    }
    let mut node_grads: Vec<Option<Tensor>> = vec![None; graph.nodes.len()];
    node_grads[loss] = Some(Tensor::scalar(1.0));
    let mut by_param: Vec<Option<Tensor>> = vec![None; graph.params.len()];
    let mut by_node = BTreeMap::new();

    for id in (0..=loss).rev() {
        let Some(g) = node_grads[id].take() else { continue };
        if want_nodes.contains(&id) {
            by_node.insert(id, g.clone());
        }
        let node = &graph.nodes[id];
        let ins = &node.inputs;
        let mut push = |node_grads: &mut Vec<Option<Tensor>>, to: NodeId, grad: Tensor| {
            match &mut node_grads[to] {
                Some(acc) => acc.add_in_place(&grad),
                slot => *slot = Some(grad),
            }
        };
        match &node.op {
            Op::Input { .. } => {}
            Op::Param { index } => match &mut by_param[*index] {
                Some(acc) => acc.add_in_place(&g),
                slot => *slot = Some(g.clone()),
            },
            Op::Conv1d { stride, pad } => {
                let (dx, dw) = ops::conv1d_backward(
                    &exec.values[ins[0]],
                    &exec.values[ins[1]],
                    *stride,
                    *pad,
                    &g,
                );
                push(&mut node_grads, ins[0], dx);
                push(&mut node_grads, ins[1], dw);
            }
            Op::Conv2d { stride, pad } => {
                let (dx, dw) = ops::conv2d_backward(
                    &exec.values[ins[0]],
                    &exec.values[ins[1]],
                    *stride,
                    *pad,
                    &g,
                );
                push(&mut node_grads, ins[0], dx);
                push(&mut node_grads, ins[1], dw);
            }
            Op::BiasAdd => {
                let db = ops::bias_add_backward(exec.values[ins[1]].len(), &g);
                push(&mut node_grads, ins[0], g.clone());
                push(&mut node_grads, ins[1], db);
            }
            Op::MaxPool1d { window, stride, pad } => {
                let Aux::Pool(idx) = &exec.aux[id] else { unreachable!() };
                let dx = ops::maxpool1d_backward(
                    exec.values[ins[0]].shape(),
                    *window,
                    *stride,
                    *pad,
                    idx,
                    &g,
                );
                push(&mut node_grads, ins[0], dx);
            }
            Op::MaxPool2d { window, stride, pad } => {
                let Aux::Pool(idx) = &exec.aux[id] else { unreachable!() };
                let dx = ops::maxpool2d_backward(
                    exec.values[ins[0]].shape(),
                    *window,
                    *stride,
                    *pad,
                    idx,
                    &g,
                );
                push(&mut node_grads, ins[0], dx);
            }
            Op::Relu => {
                let x = &exec.values[ins[0]];
                let mut dx = g.clone();
                for (d, v) in dx.data_mut().iter_mut().zip(x.data()) {
                    if *v <= 0.0 {
                        *d = 0.0;
                    }
                }
                push(&mut node_grads, ins[0], dx);
            }
            Op::BatchNorm { rm, rv, eps, .. } => {
                let x = &exec.values[ins[0]];
                let gamma = &exec.values[ins[1]];
                let (dx, dgamma, dbeta) = match (&exec.aux[id], exec.mode) {
                    (Aux::Bn { mean, var }, Mode::Train) => {
                        ops::batchnorm_train_backward(x, gamma, mean, var, *eps, &g)
                    }
                    (_, Mode::Eval) => ops::batchnorm_eval_backward(
                        x,
                        gamma,
                        &params.values[*rm],
                        &params.values[*rv],
                        *eps,
                        &g,
                    ),
                    _ => unreachable!(),
                };
                push(&mut node_grads, ins[0], dx);
                push(&mut node_grads, ins[1], dgamma);
                push(&mut node_grads, ins[2], dbeta);
            }
            Op::SoftmaxT { temperature } => {
                let dx = ops::softmax_t_backward(&exec.values[id], *temperature, &g);
                push(&mut node_grads, ins[0], dx);
            }
            Op::CrossEntropy => {
                let (dt, dp) = ops::cross_entropy_backward(
                    &exec.values[ins[0]],
                    &exec.values[ins[1]],
                    g.item(),
                );
                push(&mut node_grads, ins[0], dt);
                push(&mut node_grads, ins[1], dp);
            }
            Op::SoftmaxXent { temperature } => {
                let Aux::Xent { probs, logp } = &exec.aux[id] else { unreachable!() };
                let (dt, dz) = ops::softmax_xent_backward(
                    &exec.values[ins[0]],
                    probs,
                    logp,
                    *temperature,
                    g.item(),
                );
                push(&mut node_grads, ins[0], dt);
                push(&mut node_grads, ins[1], dz);
            }
            Op::Transpose { perm } => {
                let dx = ops::transpose_forward(&g, &ops::invert_perm(perm));
                push(&mut node_grads, ins[0], dx);
            }
            Op::Reshape { .. } => {
                let dx = g.clone().reshaped(exec.values[ins[0]].shape())?;
                push(&mut node_grads, ins[0], dx);
            }
            Op::MeanAxes { axes } => {
                let dx = ops::mean_axes_backward(exec.values[ins[0]].shape(), axes, &g);
                push(&mut node_grads, ins[0], dx);
            }
            Op::Scale { c } => {
                let mut dx = g.clone();
                dx.scale_in_place(*c);
                push(&mut node_grads, ins[0], dx);
            }
            Op::Add => {
                push(&mut node_grads, ins[0], g.clone());
                push(&mut node_grads, ins[1], g.clone());
            }
            Op::Mul => {
                let mut da = g.clone();
                for (d, b) in da.data_mut().iter_mut().zip(exec.values[ins[1]].data()) {
                    *d *= b;
                }
                let mut db = g.clone();
                for (d, a) in db.data_mut().iter_mut().zip(exec.values[ins[0]].data()) {
                    *d *= a;
                }
                push(&mut node_grads, ins[0], da);
                push(&mut node_grads, ins[1], db);
            }
            Op::Concat { axis } => {
                let shapes: Vec<Vec<usize>> =
                    ins.iter().map(|&i| exec.values[i].shape().to_vec()).collect();
                let grads = ops::concat_backward(&shapes, *axis, &g);
                for (&i, gi) in ins.iter().zip(grads) {
                    push(&mut node_grads, i, gi);
                }
            }
        }
    }
    Ok(Gradients { by_param, by_node })
}
