//! Convenience builder for assembling graphs in topological order.

use std::collections::BTreeMap;

use super::params::{Init, ParamSpec};
use super::{ComputationGraph, Node, NodeId, Op};
use crate::error::{Error, Result};

#[derive(Default)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    params: Vec<ParamSpec>,
    tags: BTreeMap<String, NodeId>,
    input_names: Vec<String>,
}

impl GraphBuilder {
    pub fn new() -> GraphBuilder {
        GraphBuilder::default()
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { op, inputs });
        id
    }

    pub fn input(&mut self, name: &str) -> NodeId {
        self.input_names.push(name.to_string());
        self.push(Op::Input { name: name.to_string() }, vec![])
    }

    pub fn param(&mut self, name: &str, shape: &[usize], init: Init) -> NodeId {
        let index = self.new_param(name, shape, init, true);
        self.push(Op::Param { index }, vec![])
    }

    fn new_param(&mut self, name: &str, shape: &[usize], init: Init, trainable: bool) -> usize {
        assert!(
            self.params.iter().all(|p| p.name != name),
            "duplicate parameter name {name}"
        );
        self.params.push(ParamSpec {
            name: name.to_string(),
            shape: shape.to_vec(),
            init,
            trainable,
        });
        self.params.len() - 1
    }

    pub fn conv1d(&mut self, x: NodeId, kernel: NodeId, stride: usize, pad: usize) -> NodeId {
        self.push(Op::Conv1d { stride, pad }, vec![x, kernel])
    }

    pub fn conv2d(&mut self, x: NodeId, kernel: NodeId, stride: usize, pad: usize) -> NodeId {
        self.push(Op::Conv2d { stride, pad }, vec![x, kernel])
    }

    pub fn bias_add(&mut self, x: NodeId, bias: NodeId) -> NodeId {
        self.push(Op::BiasAdd, vec![x, bias])
    }

    pub fn maxpool1d(
        &mut self,
        x: NodeId,
        window: usize,
        stride: usize,
        pad: (usize, usize),
    ) -> NodeId {
        self.push(Op::MaxPool1d { window, stride, pad }, vec![x])
    }

    pub fn maxpool2d(
        &mut self,
        x: NodeId,
        window: (usize, usize),
        stride: (usize, usize),
        pad: ((usize, usize), (usize, usize)),
    ) -> NodeId {
        self.push(Op::MaxPool2d { window, stride, pad }, vec![x])
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Relu, vec![x])
    }

    /// Batch normalization over the channel (last) axis. Creates gamma,
    /// beta, and non-trainable running mean / variance named under
    /// `prefix`.
    pub fn batchnorm(&mut self, x: NodeId, prefix: &str, channels: usize) -> NodeId {
        let gamma = self.param(&format!("{prefix}.gamma"), &[channels], Init::Ones);
        let beta = self.param(&format!("{prefix}.beta"), &[channels], Init::Zeros);
        let rm = self.new_param(&format!("{prefix}.running_mean"), &[channels], Init::Zeros, false);
        let rv = self.new_param(&format!("{prefix}.running_var"), &[channels], Init::Ones, false);
        self.push(
            Op::BatchNorm { rm, rv, momentum: 0.1, eps: 1e-5 },
            vec![x, gamma, beta],
        )
    }

    pub fn softmax_t(&mut self, logits: NodeId, temperature: f64) -> Result<NodeId> {
        if temperature <= 0.0 {
            return Err(Error::Graph(format!(
                "softmax temperature must be positive, got {temperature}"
            )));
        }
        Ok(self.push(Op::SoftmaxT { temperature }, vec![logits]))
    }

    pub fn cross_entropy(&mut self, targets: NodeId, predictions: NodeId) -> NodeId {
        self.push(Op::CrossEntropy, vec![targets, predictions])
    }

    pub fn softmax_xent(
        &mut self,
        targets: NodeId,
        logits: NodeId,
        temperature: f64,
    ) -> Result<NodeId> {
        if temperature <= 0.0 {
            return Err(Error::Graph(format!(
                "softmax temperature must be positive, got {temperature}"
            )));
        }
        Ok(self.push(Op::SoftmaxXent { temperature }, vec![targets, logits]))
    }

    pub fn transpose(&mut self, x: NodeId, perm: &[usize]) -> NodeId {
        self.push(Op::Transpose { perm: perm.to_vec() }, vec![x])
    }

    pub fn reshape(&mut self, x: NodeId, dims: &[i64]) -> NodeId {
        self.push(Op::Reshape { dims: dims.to_vec() }, vec![x])
    }

    pub fn mean_axes(&mut self, x: NodeId, axes: &[usize]) -> NodeId {
        assert!(axes.windows(2).all(|w| w[1] == w[0] + 1), "axes must be contiguous");
        self.push(Op::MeanAxes { axes: axes.to_vec() }, vec![x])
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        self.push(Op::Scale { c }, vec![x])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Add, vec![a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Mul, vec![a, b])
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> NodeId {
        self.push(Op::Concat { axis }, parts.to_vec())
    }

    /// Register a node under a stable name (e.g. "logits", "conv3").
    pub fn tag(&mut self, name: &str, node: NodeId) {
        let prev = self.tags.insert(name.to_string(), node);
        assert!(prev.is_none(), "duplicate tag {name}");
    }

    pub fn finish(self) -> ComputationGraph {
        ComputationGraph {
            nodes: self.nodes,
            params: self.params,
            tags: self.tags,
            input_names: self.input_names,
        }
    }
}
