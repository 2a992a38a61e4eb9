//! The acoustic-image teacher network.

use super::ModelSpec;
use crate::error::Result;
use crate::graph::{ComputationGraph, GraphBuilder, Init, NodeId};

/// Acoustic frames consumed per sample (1 s at 12 fps).
pub const INPUT_FRAMES: usize = 12;
/// Spatial dims of the acoustic image.
pub const INPUT_H: usize = 36;
pub const INPUT_W: usize = 48;

/// Input `[N, 12, 36, 48, mfcc]`; tags `conv1`, `conv2`, `conv3`, `fc1`,
/// `fc2`, `penultimate` (`[N, 1024w]`), `logits` (`[N, C]`).
pub fn build_dualcamnet(spec: &ModelSpec) -> Result<ComputationGraph> {
    spec.validate()?;
    let cm = spec.mfcc_coeffs;
    let c2 = spec.scaled(32);
    let c3 = spec.scaled(64);
    let h1 = spec.scaled(1024);
    let h2 = spec.scaled(1000);
    let (pool_stride, pool_pad) = if spec.pool_stride2 {
        ((2usize, 2usize), ((0usize, 1usize), (0usize, 1usize)))
    } else {
        ((1, 1), ((0, 1), (0, 1)))
    };

    let mut b = GraphBuilder::new();
    let x = b.input("acoustic");

    // block 1: temporal conv at every spatial site, channels kept at cm
    let xt = b.transpose(x, &[0, 2, 3, 1, 4]); // [N, H, W, T, C]
    let xt = b.reshape(xt, &[-1, INPUT_FRAMES as i64, cm as i64]);
    let w1 = b.param("conv1.weight", &[7, cm, cm], Init::KaimingUniform { fan_in: 7 * cm });
    let bias1 = b.param("conv1.bias", &[cm], Init::Zeros);
    let t1 = b.conv1d(xt, w1, 1, 3);
    let t1 = b.bias_add(t1, bias1);
    let t1 = b.relu(t1);
    b.tag("conv1", t1);
    let t1 = b.reshape(
        t1,
        &[-1, INPUT_H as i64, INPUT_W as i64, INPUT_FRAMES as i64, cm as i64],
    );
    let t1 = b.transpose(t1, &[0, 3, 1, 2, 4]); // [N, T, H, W, C]

    // blocks 2-3: 5x5 spatial convolutions shared across timesteps
    let s = b.reshape(t1, &[-1, INPUT_H as i64, INPUT_W as i64, cm as i64]);
    let (s, h_after2, w_after2) =
        spatial_block(&mut b, s, "conv2", cm, c2, INPUT_H, INPUT_W, pool_stride, pool_pad);
    let (s, h_after3, w_after3) =
        spatial_block(&mut b, s, "conv3", c2, c3, h_after2, w_after2, pool_stride, pool_pad);

    // temporal mean pooling
    let s = b.reshape(
        s,
        &[-1, INPUT_FRAMES as i64, h_after3 as i64, w_after3 as i64, c3 as i64],
    );
    let pooled = b.mean_axes(s, &[1]); // [N, H, W, C]

    // fully convolutional head over the remaining spatial map
    let (f1, _) = conv1x1(&mut b, pooled, "fc1", c3, h1, true);
    b.tag("fc1", f1);
    let pen = b.mean_axes(f1, &[1, 2]);
    b.tag("penultimate", pen);
    let (f2, _) = conv1x1(&mut b, f1, "fc2", h1, h2, true);
    b.tag("fc2", f2);
    let (lmap, _) = conv1x1(&mut b, f2, "logits", h2, spec.class_count, false);
    b.tag("logits_map", lmap);
    let logits = b.mean_axes(lmap, &[1, 2]);
    b.tag("logits", logits);
    Ok(b.finish())
}

#[allow(clippy::too_many_arguments)]
fn spatial_block(
    b: &mut GraphBuilder,
    x: NodeId,
    name: &str,
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    pool_stride: (usize, usize),
    pool_pad: ((usize, usize), (usize, usize)),
) -> (NodeId, usize, usize) {
    let kw = b.param(
        &format!("{name}.weight"),
        &[5, 5, cin, cout],
        Init::KaimingUniform { fan_in: 25 * cin },
    );
    let kb = b.param(&format!("{name}.bias"), &[cout], Init::Zeros);
    let y = b.conv2d(x, kw, 1, 2);
    let y = b.bias_add(y, kb);
    let y = b.batchnorm(y, &format!("{name}.bn"), cout);
    let y = b.relu(y);
    let y = b.maxpool2d(y, (2, 2), pool_stride, pool_pad);
    b.tag(name, y);
    let out_dim = |d: usize, (pb, pa): (usize, usize), s: usize| (d + pb + pa - 2) / s + 1;
    (y, out_dim(h, pool_pad.0, pool_stride.0), out_dim(w, pool_pad.1, pool_stride.1))
}

fn conv1x1(
    b: &mut GraphBuilder,
    x: NodeId,
    name: &str,
    cin: usize,
    cout: usize,
    relu: bool,
) -> (NodeId, NodeId) {
    let kw = b.param(
        &format!("{name}.weight"),
        &[1, 1, cin, cout],
        Init::KaimingUniform { fan_in: cin },
    );
    let kb = b.param(&format!("{name}.bias"), &[cout], Init::Zeros);
    let mut y = b.conv2d(x, kw, 1, 0);
    y = b.bias_add(y, kb);
    if relu {
        y = b.relu(y);
    }
    (y, kw)
}
