//! The raw-waveform student network.

use super::ModelSpec;
use crate::error::Result;
use crate::graph::{ComputationGraph, GraphBuilder, Init, NodeId};

/// Samples consumed per input (5 s at 22 kHz).
pub const INPUT_SAMPLES: usize = 110_000;

/// Backbone dimensions: kernel sizes, channel bases, and whether a
/// factor-4 pool follows the stage. Overridable configuration defaults.
pub const STAGES: [(usize, usize, bool); 5] = [
    (64, 16, true),
    (32, 32, true),
    (16, 64, false),
    (8, 128, false),
    (4, 256, false),
];

/// Input `[N, 110000]`; five stride-2 convolution stages (factor-4 pools
/// after the first two), then the 1024/1000/C fully convolutional head
/// with global temporal averaging. Tags `conv1`..`conv5`, `fc1`,
/// `penultimate`, `logits`.
pub fn build_oursoundnet(spec: &ModelSpec) -> Result<ComputationGraph> {
    spec.validate()?;
    let mut b = GraphBuilder::new();
    let x = b.input("waveform");
    let mut y = b.reshape(x, &[-1, INPUT_SAMPLES as i64, 1]);
    let mut cin = 1;
    for (i, (k, ch, pool)) in STAGES.iter().enumerate() {
        let cout = spec.scaled(*ch);
        y = conv1d(&mut b, y, &format!("conv{}", i + 1), *k, cin, cout, *k / 2, 2, true);
        if *pool {
            y = b.maxpool1d(y, 4, 4, (0, 0));
        }
        b.tag(&format!("conv{}", i + 1), y);
        cin = cout;
    }
    let h1 = spec.scaled(1024);
    let h2 = spec.scaled(1000);
    let f1 = conv1d(&mut b, y, "fc1", 1, cin, h1, 0, 1, true);
    b.tag("fc1", f1);
    let pen = b.mean_axes(f1, &[1]);
    b.tag("penultimate", pen);
    let f2 = conv1d(&mut b, f1, "fc2", 1, h1, h2, 0, 1, true);
    b.tag("fc2", f2);
    let lmap = conv1d(&mut b, f2, "logits", 1, h2, spec.class_count, 0, 1, false);
    let logits = b.mean_axes(lmap, &[1]);
    b.tag("logits", logits);
    Ok(b.finish())
}

#[allow(clippy::too_many_arguments)]
fn conv1d(
    b: &mut GraphBuilder,
    x: NodeId,
    name: &str,
    k: usize,
    cin: usize,
    cout: usize,
    pad: usize,
    stride: usize,
    relu: bool,
) -> NodeId {
    let w = b.param(
        &format!("{name}.weight"),
        &[k, cin, cout],
        Init::KaimingUniform { fan_in: k * cin },
    );
    let bias = b.param(&format!("{name}.bias"), &[cout], Init::Zeros);
    let mut y = b.conv1d(x, w, stride, pad);
    y = b.bias_add(y, bias);
    if relu {
        y = b.relu(y);
    }
    y
}
