//! AVNet-style fusion of teacher and student penultimate features.

use super::ModelSpec;
use crate::error::Result;
use crate::graph::{ComputationGraph, GraphBuilder, Init};

/// Inputs `teacher_feat [N, F_t]` and `student_feat [N, F_s]` are
/// concatenated and classified by two fully convolutional layers of
/// `1000w` and `C` filters. Tags `fused`, `logits`.
pub fn build_fusion_head(
    teacher_feat_dim: usize,
    student_feat_dim: usize,
    spec: &ModelSpec,
) -> Result<ComputationGraph> {
    spec.validate()?;
    let joint = teacher_feat_dim + student_feat_dim;
    let hidden = spec.scaled(1000);
    let mut b = GraphBuilder::new();
    let t = b.input("teacher_feat");
    let s = b.input("student_feat");
    let cat = b.concat(&[t, s], 1);
    b.tag("fused", cat);
    let cat = b.reshape(cat, &[-1, 1, joint as i64]);
    let w1 = b.param("fc1.weight", &[1, joint, hidden], Init::KaimingUniform { fan_in: joint });
    let b1 = b.param("fc1.bias", &[hidden], Init::Zeros);
    let mut y = b.conv1d(cat, w1, 1, 0);
    y = b.bias_add(y, b1);
    y = b.relu(y);
    let w2 = b.param(
        "logits.weight",
        &[1, hidden, spec.class_count],
        Init::KaimingUniform { fan_in: hidden },
    );
    let b2 = b.param("logits.bias", &[spec.class_count], Init::Zeros);
    let mut z = b.conv1d(y, w2, 1, 0);
    z = b.bias_add(z, b2);
    let logits = b.reshape(z, &[-1, spec.class_count as i64]);
    b.tag("logits", logits);
    Ok(b.finish())
}
