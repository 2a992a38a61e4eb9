//! Parameter storage and initialization.

use rand::Rng;

use super::ComputationGraph;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// How a parameter leaf is filled at initialization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform in `[-sqrt(6 / fan_in), sqrt(6 / fan_in)]`.
    KaimingUniform { fan_in: usize },
}

#[derive(Clone, Debug)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
    /// Running statistics are parameters too, but the optimizer skips them.
    pub trainable: bool,
}

/// Concrete values for every parameter of one graph, in table order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet {
    pub values: Vec<Tensor>,
}

impl ParameterSet {
    pub fn get(&self, index: usize) -> &Tensor {
        &self.values[index]
    }

    pub fn by_name<'a>(&'a self, graph: &ComputationGraph, name: &str) -> Option<&'a Tensor> {
        graph.param_index(name).map(|i| &self.values[i])
    }

    /// Total stored values, trainable or not.
    pub fn value_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn validate_against(&self, graph: &ComputationGraph) -> Result<()> {
        if self.values.len() != graph.params.len() {
            return Err(Error::Graph(format!(
                "parameter set has {} tensors, graph declares {}",
                self.values.len(),
                graph.params.len()
            )));
        }
        for (v, spec) in self.values.iter().zip(&graph.params) {
            if v.shape() != spec.shape.as_slice() {
                return Err(Error::Graph(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    spec.name,
                    v.shape(),
                    spec.shape
                )));
            }
        }
        Ok(())
    }
}

/// Deterministically initialize parameters: each leaf draws from its own
/// derived stream, so values do not depend on the other leaves' sizes.
pub fn init_params(graph: &ComputationGraph, seed: u64) -> ParameterSet {
    let values = graph
        .params
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let mut t = Tensor::zeros(&spec.shape);
            match spec.init {
                Init::Zeros => {}
                Init::Ones => t.data_mut().iter_mut().for_each(|v| *v = 1.0),
                Init::KaimingUniform { fan_in } => {
                    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
                    let mut r = rng::stream(seed, "param", i as u64);
                    t.data_mut()
                        .iter_mut()
                        .for_each(|v| *v = r.gen_range(-bound..=bound));
                }
            }
            t
        })
        .collect();
    ParameterSet { values }
}
