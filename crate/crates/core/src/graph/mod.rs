//! Dense-tensor computation graphs with reverse-mode differentiation.
//!
//! A [`ComputationGraph`] is a static, immutable description: nodes in
//! topological (construction) order, named parameter leaves, and tagged
//! outputs. Running it is a separate concern: [`forward`] produces an
//! [`Execution`] holding every node value, and [`backward`] accumulates
//! gradients in reverse order. Parameter values live outside the graph in
//! a [`ParameterSet`], so one graph can serve many training runs.
//!
//! Layouts are channels-last throughout: `[N, L, C]` for 1-D data,
//! `[N, H, W, C]` for images, `[N, T, H, W, C]` for image sequences.

mod adam;
mod builder;
pub mod check;
mod exec;
mod ops;
mod params;


pub use adam::OptimizerState;
pub use builder::GraphBuilder;
pub use exec::{backward, forward, Execution, Gradients, Mode};
pub use params::{init_params, Init, ParamSpec, ParameterSet};

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Graph operations. Convolutions use the cross-correlation convention.
#[derive(Clone, Debug)]
pub enum Op {
    /// Batch input fed at run time.
    Input { name: String },
    /// Parameter leaf, index into the parameter table.
    Param { index: usize },
    /// inputs `[x [N,L,Cin], kernel [k,Cin,Cout]]`
    Conv1d { stride: usize, pad: usize },
    /// inputs `[x [N,H,W,Cin], kernel [kh,kw,Cin,Cout]]`
    Conv2d { stride: usize, pad: usize },
    /// inputs `[x [..,C], bias [C]]`
    BiasAdd,
    /// Zero-padded max pooling; pad is (before, after).
    MaxPool1d { window: usize, stride: usize, pad: (usize, usize) },
    /// Zero-padded 2-D max pooling; pads are ((top,bottom),(left,right)).
    MaxPool2d {
        window: (usize, usize),
        stride: (usize, usize),
        pad: ((usize, usize), (usize, usize)),
    },
    Relu,
    /// inputs `[x [..,C], gamma [C], beta [C]]`; `rm`/`rv` are the
    /// non-trainable running-stat parameter indices.
    BatchNorm { rm: usize, rv: usize, momentum: f64, eps: f64 },
    /// Row-wise tempered softmax of `[N, C]` logits.
    SoftmaxT { temperature: f64 },
    /// inputs `[targets [N,C], predictions [N,C]]`, both probability rows;
    /// mean over the batch of `-sum t ln(max(p, 1e-10))`.
    CrossEntropy,
    /// inputs `[targets [N,C], logits [N,C]]`; numerically exact fused
    /// `mean(-sum t log_softmax(z / T))`.
    SoftmaxXent { temperature: f64 },
    Transpose { perm: Vec<usize> },
    /// New shape; one entry may be -1 (inferred).
    Reshape { dims: Vec<i64> },
    /// Mean over a contiguous ascending run of axes, dims removed.
    MeanAxes { axes: Vec<usize> },
    Scale { c: f64 },
    /// Elementwise sum of two same-shape inputs.
    Add,
    /// Elementwise product of two same-shape inputs.
    Mul,
    Concat { axis: usize },
}

#[derive(Clone, Debug)]
pub struct Node {
    pub op: Op,
    pub inputs: Vec<NodeId>,
}

/// Immutable graph description.
#[derive(Clone, Debug)]
pub struct ComputationGraph {
    pub(crate) nodes: Vec<Node>,
    pub(crate) params: Vec<ParamSpec>,
    pub(crate) tags: BTreeMap<String, NodeId>,
    pub(crate) input_names: Vec<String>,
}

impl ComputationGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Names of the run-time inputs this graph reads. The student's
    /// privileged-information boundary is checked against this set.
    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    /// Node id of a named input.
    pub fn input_node(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(
            |n| matches!(&n.op, Op::Input { name: n2 } if n2 == name),
        )
    }

    pub fn tag(&self, name: &str) -> Result<NodeId> {
        self.tags.get(name).copied().ok_or_else(|| {
            Error::Graph(format!(
                "unknown activation tag `{name}`; available: {}",
                self.tag_names().join(", ")
            ))
        })
    }

    pub fn tag_names(&self) -> Vec<String> {
        self.tags.keys().cloned().collect()
    }

    pub fn trainable_parameter_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.shape.iter().product::<usize>())
            .sum()
    }
}
