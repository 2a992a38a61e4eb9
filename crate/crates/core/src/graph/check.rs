//! Central finite-difference gradient validation.
//!
//! Compares analytic parameter gradients against `(L(p+h) - L(p-h)) / 2h`
//! on a deterministic sample of coordinates. Used by the test suites for
//! every op and every architecture.

use std::collections::BTreeMap;

use rand::Rng;

use super::{backward, forward, ComputationGraph, Mode, NodeId, ParameterSet};
use crate::error::Result;
use crate::rng;
use crate::tensor::Tensor;

/// Worst observed relative error across the sampled coordinates.
pub struct CheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub coords_checked: usize,
}

/// Relative error with a floor that keeps near-zero gradients comparable.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Check up to `per_param` coordinates of every trainable parameter.
pub fn finite_difference_check(
    graph: &ComputationGraph,
    params: &ParameterSet,
    inputs: &BTreeMap<String, Tensor>,
    loss: NodeId,
    mode: Mode,
    per_param: usize,
    h: f64,
    seed: u64,
) -> Result<CheckReport> {
    let exec = forward(graph, params, inputs, mode)?;
    let grads = backward(graph, params, &exec, loss, &[])?;
    let mut report =
        CheckReport { max_rel_err: 0.0, worst_param: String::new(), coords_checked: 0 };
    let mut probe = params.clone();
    for (pi, spec) in graph.params.iter().enumerate() {
        if !spec.trainable {
            continue;
        }
        let analytic = grads.param(graph, pi);
        let len = analytic.len();
        let mut r = rng::stream(seed, "fdcheck", pi as u64);
        let coords: Vec<usize> = if len <= per_param {
            (0..len).collect()
        } else {
            (0..per_param).map(|_| r.gen_range(0..len)).collect()
        };
        for j in coords {
            let orig = probe.values[pi].data()[j];
            probe.values[pi].data_mut()[j] = orig + h;
            let lp = forward(graph, &probe, inputs, mode)?.values[loss].item();
            probe.values[pi].data_mut()[j] = orig - h;
            let lm = forward(graph, &probe, inputs, mode)?.values[loss].item();
            probe.values[pi].data_mut()[j] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let e = rel_err(analytic.data()[j], fd);
            report.coords_checked += 1;
            if e > report.max_rel_err {
                report.max_rel_err = e;
                report.worst_param = format!("{}[{j}]", spec.name);
            }
        }
    }
    Ok(report)
}
