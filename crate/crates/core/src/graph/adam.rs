//! Adam with bias correction.

use super::{ComputationGraph, Gradients, ParameterSet};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-parameter first/second moment state.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step_count: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(graph: &ComputationGraph, learning_rate: f64) -> OptimizerState {
        OptimizerState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            m: graph.params.iter().map(|p| Tensor::zeros(&p.shape)).collect(),
            v: graph.params.iter().map(|p| Tensor::zeros(&p.shape)).collect(),
        }
    }

    /// One bias-corrected update over the trainable parameters. Missing
    /// gradients are exact zeros.
    pub fn step(
        &mut self,
        graph: &ComputationGraph,
        params: &mut ParameterSet,
        grads: &Gradients,
    ) -> Result<()> {
        self.step_count += 1;
        let c1 = 1.0 - self.beta1.powi(self.step_count as i32);
        let c2 = 1.0 - self.beta2.powi(self.step_count as i32);
        for (i, spec) in graph.params.iter().enumerate() {
            if !spec.trainable {
                continue;
            }
            let zero;
            let g = match &grads.by_param[i] {
                Some(g) => {
                    if g.shape() != spec.shape.as_slice() {
                        return Err(Error::Graph(format!(
                            "gradient shape {:?} for parameter `{}` {:?}",
                            g.shape(),
                            spec.name,
                            spec.shape
                        )));
                    }
                    g
                }
                None => {
                    zero = Tensor::zeros(&spec.shape);
                    &zero
                }
            };
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params.values[i].data_mut();
            for j in 0..p.len() {
                let gj = g.data()[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                p[j] -= self.learning_rate * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
