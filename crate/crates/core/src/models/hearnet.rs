//! The spectrogram student network.

use super::ModelSpec;
use crate::error::Result;
use crate::featurize::{SPEC_BINS, SPEC_FRAMES};
use crate::graph::{ComputationGraph, GraphBuilder, Init, NodeId};

/// Input `[N, 500, 257]`; temporal chain 500 -> 100 -> 20 -> 4 -> 1.
/// Tags `conv1`..`conv5`, `fc1`, `penultimate` (`[N, 1024w]`, the conv4
/// activation), `logits`.
pub fn build_hearnet(spec: &ModelSpec) -> Result<ComputationGraph> {
    spec.validate()?;
    let c1 = spec.scaled(128);
    let c2 = spec.scaled(256);
    let c3 = spec.scaled(256);
    let c4 = spec.scaled(1024);
    let c5 = spec.scaled(1024);
    let cf = spec.scaled(1000);

    let mut b = GraphBuilder::new();
    let x = b.input("spectrogram");
    let x = b.reshape(x, &[-1, SPEC_FRAMES as i64, SPEC_BINS as i64]);

    let mut y = conv_block(&mut b, x, "conv1", 11, SPEC_BINS, c1, 5, true);
    y = conv_block(&mut b, y, "conv2", 5, c1, c2, 2, true); // 100 -> 20
    y = conv_block(&mut b, y, "conv3", 3, c2, c3, 1, true); // 20 -> 4
    // conv4: width-4 valid convolution collapses the time axis to 1
    let y4 = conv1d(&mut b, y, "conv4", 4, c3, c4, 0, true);
    b.tag("conv4", y4);
    let pen = b.mean_axes(y4, &[1]);
    b.tag("penultimate", pen);

    let y5 = conv1d(&mut b, y4, "conv5", 1, c4, c5, 0, true);
    b.tag("conv5", y5);
    let f1 = conv1d(&mut b, y5, "fc1", 1, c5, cf, 0, true);
    b.tag("fc1", f1);
    let lmap = conv1d(&mut b, f1, "logits", 1, cf, spec.class_count, 0, false);
    let logits = b.mean_axes(lmap, &[1]);
    b.tag("logits", logits);
    Ok(b.finish())
}

/// Same-padded convolution, ReLU, then factor-5 max pooling.
fn conv_block(
    b: &mut GraphBuilder,
    x: NodeId,
    name: &str,
    k: usize,
    cin: usize,
    cout: usize,
    pad: usize,
    pool: bool,
) -> NodeId {
    let mut y = conv1d(b, x, name, k, cin, cout, pad, true);
    if pool {
        y = b.maxpool1d(y, 5, 5, (0, 0));
    }
    b.tag(name, y);
    y
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
    relu: bool,
) -> NodeId {
    let w = b.param(
        &format!("{name}.weight"),
        &[k, cin, cout],
        Init::KaimingUniform { fan_in: k * cin },
    );
    let bias = b.param(&format!("{name}.bias"), &[cout], Init::Zeros);
    let mut y = b.conv1d(x, w, 1, pad);
    y = b.bias_add(y, bias);
    if relu {
        y = b.relu(y);
    }
    y
}
