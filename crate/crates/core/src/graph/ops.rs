//! Forward and backward kernels for the graph ops.

use crate::error::{Error, Result};
use crate::linalg::{gemm_acc, transpose};
use crate::tensor::Tensor;

/// Log floor for cross-entropy on probability rows.
pub const CE_LOG_FLOOR: f64 = 1e-10;

/// Sentinel pool index meaning "a zero pad position won".
pub const POOL_PAD: u32 = u32::MAX;

fn shape3(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match t.shape() {
        [a, b, c] => Ok((*a, *b, *c)),
        s => Err(Error::Shape(format!("{what}: expected rank 3, got {s:?}"))),
    }
}

fn shape4(t: &Tensor, what: &str) -> Result<(usize, usize, usize, usize)> {
    match t.shape() {
        [a, b, c, d] => Ok((*a, *b, *c, *d)),
        s => Err(Error::Shape(format!("{what}: expected rank 4, got {s:?}"))),
    }
}

pub fn conv1d_out_len(l: usize, k: usize, stride: usize, pad: usize) -> usize {
    (l + 2 * pad - k) / stride + 1
}

fn im2col_1d(
    x: &[f64],
    l: usize,
    cin: usize,
    k: usize,
    stride: usize,
    pad: usize,
    lo: usize,
    cols: &mut [f64],
) {
    cols.iter_mut().for_each(|v| *v = 0.0);
    for o in 0..lo {
        let start = (o * stride) as i64 - pad as i64;
        let row = &mut cols[o * k * cin..(o + 1) * k * cin];
        for kk in 0..k {
            let idx = start + kk as i64;
            if idx >= 0 && (idx as usize) < l {
                let src = &x[idx as usize * cin..(idx as usize + 1) * cin];
                row[kk * cin..(kk + 1) * cin].copy_from_slice(src);
            }
        }
    }
}

pub fn conv1d_forward(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let (n, l, cin) = shape3(x, "conv1d input")?;
    let (k, wcin, cout) = shape3(w, "conv1d kernel")?;
    if wcin != cin {
        return Err(Error::Shape(format!(
            "conv1d: input has {cin} channels, kernel expects {wcin}"
        )));
    }
    if k > l + 2 * pad {
        return Err(Error::Shape(format!(
            "conv1d: kernel {k} longer than padded input {}",
            l + 2 * pad
        )));
    }
    let lo = conv1d_out_len(l, k, stride, pad);
    let mut out = Tensor::zeros(&[n, lo, cout]);
    let mut cols = vec![0.0; lo * k * cin];
    for s in 0..n {
        let xs = &x.data()[s * l * cin..(s + 1) * l * cin];
        im2col_1d(xs, l, cin, k, stride, pad, lo, &mut cols);
        gemm_acc(
            lo,
            k * cin,
            cout,
            &cols,
            w.data(),
            &mut out.data_mut()[s * lo * cout..(s + 1) * lo * cout],
        );
    }
    Ok(out)
}

pub fn conv1d_backward(
    x: &Tensor,
    w: &Tensor,
    stride: usize,
    pad: usize,
    dout: &Tensor,
) -> (Tensor, Tensor) {
    let (n, l, cin) = shape3(x, "conv1d input").expect("validated in forward");
    let (k, _, cout) = shape3(w, "conv1d kernel").expect("validated in forward");
    let lo = conv1d_out_len(l, k, stride, pad);
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let kc = k * cin;
    let mut cols = vec![0.0; lo * kc];
    let mut cols_t = vec![0.0; lo * kc];
    let mut dcols = vec![0.0; lo * kc];
    let mut w_t = vec![0.0; w.len()];
    transpose(kc, cout, w.data(), &mut w_t);
    for s in 0..n {
        let xs = &x.data()[s * l * cin..(s + 1) * l * cin];
        let gs = &dout.data()[s * lo * cout..(s + 1) * lo * cout];
        im2col_1d(xs, l, cin, k, stride, pad, lo, &mut cols);
        transpose(lo, kc, &cols, &mut cols_t);
        gemm_acc(kc, lo, cout, &cols_t, gs, dw.data_mut());
        dcols.iter_mut().for_each(|v| *v = 0.0);
        gemm_acc(lo, cout, kc, gs, &w_t, &mut dcols);
        // col2im scatter
        let dxs = &mut dx.data_mut()[s * l * cin..(s + 1) * l * cin];
        for o in 0..lo {
            let start = (o * stride) as i64 - pad as i64;
            let row = &dcols[o * kc..(o + 1) * kc];
            for kk in 0..k {
                let idx = start + kk as i64;
                if idx >= 0 && (idx as usize) < l {
                    let dst = &mut dxs[idx as usize * cin..(idx as usize + 1) * cin];
                    for (d, v) in dst.iter_mut().zip(&row[kk * cin..(kk + 1) * cin]) {
                        *d += v;
                    }
                }
            }
        }
    }
    (dx, dw)
}

fn im2col_2d(
    x: &[f64],
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
    cols: &mut [f64],
) {
    cols.iter_mut().for_each(|v| *v = 0.0);
    let patch = kh * kw * cin;
    for oy in 0..ho {
        for ox in 0..wo {
            let row = &mut cols[(oy * wo + ox) * patch..(oy * wo + ox + 1) * patch];
            let y0 = (oy * stride) as i64 - pad as i64;
            let x0 = (ox * stride) as i64 - pad as i64;
            for dy in 0..kh {
                let yy = y0 + dy as i64;
                if yy < 0 || yy as usize >= h {
                    continue;
                }
                for dx in 0..kw {
                    let xx = x0 + dx as i64;
                    if xx < 0 || xx as usize >= w {
                        continue;
                    }
                    let src = &x[(yy as usize * w + xx as usize) * cin..][..cin];
                    row[(dy * kw + dx) * cin..][..cin].copy_from_slice(src);
                }
            }
        }
    }
}

pub fn conv2d_forward(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let (n, h, wd, cin) = shape4(x, "conv2d input")?;
    let (kh, kw, wcin, cout) = shape4(w, "conv2d kernel")?;
    if wcin != cin {
        return Err(Error::Shape(format!(
            "conv2d: input has {cin} channels, kernel expects {wcin}"
        )));
    }
    if kh > h + 2 * pad || kw > wd + 2 * pad {
        return Err(Error::Shape("conv2d: kernel larger than padded input".into()));
    }
    let ho = conv1d_out_len(h, kh, stride, pad);
    let wo = conv1d_out_len(wd, kw, stride, pad);
    let patch = kh * kw * cin;
    let mut out = Tensor::zeros(&[n, ho, wo, cout]);
    let mut cols = vec![0.0; ho * wo * patch];
    for s in 0..n {
        let xs = &x.data()[s * h * wd * cin..(s + 1) * h * wd * cin];
        im2col_2d(xs, h, wd, cin, kh, kw, stride, pad, ho, wo, &mut cols);
        gemm_acc(
            ho * wo,
            patch,
            cout,
            &cols,
            w.data(),
            &mut out.data_mut()[s * ho * wo * cout..(s + 1) * ho * wo * cout],
        );
    }
    Ok(out)
}

pub fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    stride: usize,
    pad: usize,
    dout: &Tensor,
) -> (Tensor, Tensor) {
    let (n, h, wd, cin) = shape4(x, "conv2d input").expect("validated in forward");
    let (kh, kw, _, cout) = shape4(w, "conv2d kernel").expect("validated in forward");
    let ho = conv1d_out_len(h, kh, stride, pad);
    let wo = conv1d_out_len(wd, kw, stride, pad);
    let patch = kh * kw * cin;
    let rows = ho * wo;
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut cols = vec![0.0; rows * patch];
    let mut cols_t = vec![0.0; rows * patch];
    let mut dcols = vec![0.0; rows * patch];
    let mut w_t = vec![0.0; w.len()];
    transpose(patch, cout, w.data(), &mut w_t);
    for s in 0..n {
        let xs = &x.data()[s * h * wd * cin..(s + 1) * h * wd * cin];
        let gs = &dout.data()[s * rows * cout..(s + 1) * rows * cout];
        im2col_2d(xs, h, wd, cin, kh, kw, stride, pad, ho, wo, &mut cols);
        transpose(rows, patch, &cols, &mut cols_t);
        gemm_acc(patch, rows, cout, &cols_t, gs, dw.data_mut());
        dcols.iter_mut().for_each(|v| *v = 0.0);
        gemm_acc(rows, cout, patch, gs, &w_t, &mut dcols);
        let dxs = &mut dx.data_mut()[s * h * wd * cin..(s + 1) * h * wd * cin];
        for oy in 0..ho {
            for ox in 0..wo {
                let row = &dcols[(oy * wo + ox) * patch..(oy * wo + ox + 1) * patch];
                let y0 = (oy * stride) as i64 - pad as i64;
                let x0 = (ox * stride) as i64 - pad as i64;
                for dy in 0..kh {
                    let yy = y0 + dy as i64;
                    if yy < 0 || yy as usize >= h {
                        continue;
                    }
                    for dxk in 0..kw {
                        let xx = x0 + dxk as i64;
                        if xx < 0 || xx as usize >= wd {
                            continue;
                        }
                        let dst =
                            &mut dxs[(yy as usize * wd + xx as usize) * cin..][..cin];
                        for (d, v) in dst.iter_mut().zip(&row[(dy * kw + dxk) * cin..][..cin])
                        {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
    (dx, dw)
}

/// Max pooling with literal zero padding: padded positions compete with
/// value 0.0. Ties go to the first position in scan order; a winning pad
/// routes no gradient. Returns the per-output window index of the winner.
pub fn maxpool1d_forward(
    x: &Tensor,
    window: usize,
    stride: usize,
    pad: (usize, usize),
) -> Result<(Tensor, Vec<u32>)> {
    let (n, l, c) = shape3(x, "maxpool1d input")?;
    let lp = l + pad.0 + pad.1;
    if window == 0 || window > lp {
        return Err(Error::Shape(format!(
            "maxpool1d: window {window} invalid for padded length {lp}"
        )));
    }
    let lo = (lp - window) / stride + 1;
    let mut out = Tensor::zeros(&[n, lo, c]);
    let mut idx = vec![POOL_PAD; n * lo * c];
    let xd = x.data();
    let od = out.data_mut();
    for s in 0..n {
        for o in 0..lo {
            let base_out = (s * lo + o) * c;
            let mut first = true;
            for kk in 0..window {
                let pos = (o * stride + kk) as i64 - pad.0 as i64;
                let in_bounds = pos >= 0 && (pos as usize) < l;
                for ch in 0..c {
                    let v = if in_bounds {
                        xd[(s * l + pos as usize) * c + ch]
                    } else {
                        0.0
                    };
                    if first || v > od[base_out + ch] {
                        od[base_out + ch] = v;
                        idx[base_out + ch] = if in_bounds { kk as u32 } else { POOL_PAD };
                    }
                }
                first = false;
            }
        }
    }
    Ok((out, idx))
}

pub fn maxpool1d_backward(
    x_shape: &[usize],
    window: usize,
    stride: usize,
    pad: (usize, usize),
    idx: &[u32],
    dout: &Tensor,
) -> Tensor {
    let (n, l, c) = (x_shape[0], x_shape[1], x_shape[2]);
    let lp = l + pad.0 + pad.1;
    let lo = (lp - window) / stride + 1;
    let mut dx = Tensor::zeros(x_shape);
    let dd = dx.data_mut();
    for s in 0..n {
        for o in 0..lo {
            let base = (s * lo + o) * c;
            for ch in 0..c {
                let kk = idx[base + ch];
                if kk != POOL_PAD {
                    let pos = (o * stride + kk as usize) as i64 - pad.0 as i64;
                    dd[(s * l + pos as usize) * c + ch] += dout.data()[base + ch];
                }
            }
        }
    }
    dx
}

pub fn maxpool2d_forward(
    x: &Tensor,
    window: (usize, usize),
    stride: (usize, usize),
    pad: ((usize, usize), (usize, usize)),
) -> Result<(Tensor, Vec<u32>)> {
    let (n, h, w, c) = shape4(x, "maxpool2d input")?;
    let hp = h + pad.0 .0 + pad.0 .1;
    let wp = w + pad.1 .0 + pad.1 .1;
    if window.0 == 0 || window.1 == 0 || window.0 > hp || window.1 > wp {
        return Err(Error::Shape(format!(
            "maxpool2d: window {window:?} invalid for padded input {hp}x{wp}"
        )));
    }
    let ho = (hp - window.0) / stride.0 + 1;
    let wo = (wp - window.1) / stride.1 + 1;
    let mut out = Tensor::zeros(&[n, ho, wo, c]);
    let mut idx = vec![POOL_PAD; n * ho * wo * c];
    let xd = x.data();
    let od = out.data_mut();
    for s in 0..n {
        for oy in 0..ho {
            for ox in 0..wo {
                let base_out = ((s * ho + oy) * wo + ox) * c;
                let mut first = true;
                for dy in 0..window.0 {
                    let yy = (oy * stride.0 + dy) as i64 - pad.0 .0 as i64;
                    let y_ok = yy >= 0 && (yy as usize) < h;
                    for dx in 0..window.1 {
                        let xx = (ox * stride.1 + dx) as i64 - pad.1 .0 as i64;
                        let in_bounds = y_ok && xx >= 0 && (xx as usize) < w;
                        let scan = (dy * window.1 + dx) as u32;
                        for ch in 0..c {
                            let v = if in_bounds {
                                xd[((s * h + yy as usize) * w + xx as usize) * c + ch]
                            } else {
                                0.0
                            };
                            if first || v > od[base_out + ch] {
                                od[base_out + ch] = v;
                                idx[base_out + ch] =
                                    if in_bounds { scan } else { POOL_PAD };
                            }
                        }
                        first = false;
                    }
                }
            }
        }
    }
    Ok((out, idx))
}

pub fn maxpool2d_backward(
    x_shape: &[usize],
    window: (usize, usize),
    stride: (usize, usize),
    pad: ((usize, usize), (usize, usize)),
    idx: &[u32],
    dout: &Tensor,
) -> Tensor {
    let (n, h, w, c) = (x_shape[0], x_shape[1], x_shape[2], x_shape[3]);
    let hp = h + pad.0 .0 + pad.0 .1;
    let wp = w + pad.1 .0 + pad.1 .1;
    let ho = (hp - window.0) / stride.0 + 1;
    let wo = (wp - window.1) / stride.1 + 1;
    let mut dx = Tensor::zeros(x_shape);
    let dd = dx.data_mut();
    for s in 0..n {
        for oy in 0..ho {
            for ox in 0..wo {
                let base = ((s * ho + oy) * wo + ox) * c;
                for ch in 0..c {
                    let scan = idx[base + ch];
                    if scan == POOL_PAD {
                        continue;
                    }
                    let dy = scan as usize / window.1;
                    let dxk = scan as usize % window.1;
                    let yy = (oy * stride.0 + dy) as i64 - pad.0 .0 as i64;
                    let xx = (ox * stride.1 + dxk) as i64 - pad.1 .0 as i64;
                    dd[((s * h + yy as usize) * w + xx as usize) * c + ch] +=
                        dout.data()[base + ch];
                }
            }
        }
    }
    dx
}

/// Per-channel statistics over all leading axes.
fn channel_stats(x: &Tensor) -> (Vec<f64>, Vec<f64>, usize) {
    let c = *x.shape().last().expect("batchnorm input has rank >= 2");
    let rows = x.len() / c;
    let mut mean = vec![0.0; c];
    for row in x.data().chunks_exact(c) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    let mut var = vec![0.0; c];
    for row in x.data().chunks_exact(c) {
        for ((vv, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *vv += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|v| *v /= rows as f64);
    (mean, var, rows)
}

pub struct BnTrainOut {
    pub y: Tensor,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub new_rm: Tensor,
    pub new_rv: Tensor,
}

pub fn batchnorm_train(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    rm: &Tensor,
    rv: &Tensor,
    momentum: f64,
    eps: f64,
) -> Result<BnTrainOut> {
    if x.shape().first().copied().unwrap_or(0) < 2 {
        return Err(Error::Graph("batchnorm in train mode needs batch >= 2".into()));
    }
    let (mean, var, rows) = channel_stats(x);
    let c = mean.len();
    let mut y = Tensor::zeros(x.shape());
    let g = gamma.data();
    let b = beta.data();
    for (yrow, xrow) in y.data_mut().chunks_exact_mut(c).zip(x.data().chunks_exact(c)) {
        for ch in 0..c {
            let xhat = (xrow[ch] - mean[ch]) / (var[ch] + eps).sqrt();
            yrow[ch] = g[ch] * xhat + b[ch];
        }
    }
    // running statistics: convex update, variance stored unbiased
    let unbias = rows as f64 / (rows as f64 - 1.0);
    let mut new_rm = rm.clone();
    let mut new_rv = rv.clone();
    for ch in 0..c {
        new_rm.data_mut()[ch] = (1.0 - momentum) * rm.data()[ch] + momentum * mean[ch];
        new_rv.data_mut()[ch] = (1.0 - momentum) * rv.data()[ch] + momentum * var[ch] * unbias;
    }
    Ok(BnTrainOut { y, mean, var, new_rm, new_rv })
}

pub fn batchnorm_eval(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    rm: &Tensor,
    rv: &Tensor,
    eps: f64,
) -> Tensor {
    let c = gamma.len();
    let mut y = Tensor::zeros(x.shape());
    for (yrow, xrow) in y.data_mut().chunks_exact_mut(c).zip(x.data().chunks_exact(c)) {
        for ch in 0..c {
            let xhat = (xrow[ch] - rm.data()[ch]) / (rv.data()[ch] + eps).sqrt();
            yrow[ch] = gamma.data()[ch] * xhat + beta.data()[ch];
        }
    }
    y
}

/// Gradients through train-mode batch statistics.
pub fn batchnorm_train_backward(
    x: &Tensor,
    gamma: &Tensor,
    mean: &[f64],
    var: &[f64],
    eps: f64,
    dout: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let c = mean.len();
    let rows = x.len() / c;
    let nf = rows as f64;
    let istd: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    let mut dvar = vec![0.0; c];
    let mut dmean_a = vec![0.0; c];
    let mut dxc_sum = vec![0.0; c];
    for (grow, xrow) in dout.data().chunks_exact(c).zip(x.data().chunks_exact(c)) {
        for ch in 0..c {
            let xc = xrow[ch] - mean[ch];
            let dxhat = grow[ch] * gamma.data()[ch];
            dgamma[ch] += grow[ch] * xc * istd[ch];
            dbeta[ch] += grow[ch];
            dvar[ch] += dxhat * xc * (-0.5) * istd[ch].powi(3);
            dmean_a[ch] += -dxhat * istd[ch];
            dxc_sum[ch] += xc;
        }
    }
    let dmean: Vec<f64> = (0..c)
        .map(|ch| dmean_a[ch] + dvar[ch] * (-2.0) * dxc_sum[ch] / nf)
        .collect();
    let mut dx = Tensor::zeros(x.shape());
    for (dxrow, (grow, xrow)) in dx
        .data_mut()
        .chunks_exact_mut(c)
        .zip(dout.data().chunks_exact(c).zip(x.data().chunks_exact(c)))
    {
        for ch in 0..c {
            let xc = xrow[ch] - mean[ch];
            let dxhat = grow[ch] * gamma.data()[ch];
            dxrow[ch] = dxhat * istd[ch] + dvar[ch] * 2.0 * xc / nf + dmean[ch] / nf;
        }
    }
    (
        dx,
        Tensor::from_vec(dgamma, &[c]).expect("shape"),
        Tensor::from_vec(dbeta, &[c]).expect("shape"),
    )
}

/// Gradients with frozen running statistics.
pub fn batchnorm_eval_backward(
    x: &Tensor,
    gamma: &Tensor,
    rm: &Tensor,
    rv: &Tensor,
    eps: f64,
    dout: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let c = gamma.len();
    let istd: Vec<f64> = rv.data().iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    let mut dx = Tensor::zeros(x.shape());
    for ((dxrow, grow), xrow) in dx
        .data_mut()
        .chunks_exact_mut(c)
        .zip(dout.data().chunks_exact(c))
        .zip(x.data().chunks_exact(c))
    {
        for ch in 0..c {
            dgamma[ch] += grow[ch] * (xrow[ch] - rm.data()[ch]) * istd[ch];
            dbeta[ch] += grow[ch];
            dxrow[ch] = grow[ch] * gamma.data()[ch] * istd[ch];
        }
    }
    (
        dx,
        Tensor::from_vec(dgamma, &[c]).expect("shape"),
        Tensor::from_vec(dbeta, &[c]).expect("shape"),
    )
}

/// Row-wise `softmax(z / T)` with max subtraction.
pub fn softmax_t_forward(logits: &Tensor, temperature: f64) -> Result<Tensor> {
    let c = match logits.shape() {
        [_, c] => *c,
        s => return Err(Error::Shape(format!("softmax expects [N, C] logits, got {s:?}"))),
    };
    let mut out = Tensor::zeros(logits.shape());
    for (orow, zrow) in out
        .data_mut()
        .chunks_exact_mut(c)
        .zip(logits.data().chunks_exact(c))
    {
        let m = zrow.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (o, z) in orow.iter_mut().zip(zrow) {
            *o = ((z - m) / temperature).exp();
            sum += *o;
        }
        orow.iter_mut().for_each(|o| *o /= sum);
    }
    Ok(out)
}

pub fn softmax_t_backward(probs: &Tensor, temperature: f64, dout: &Tensor) -> Tensor {
    let c = probs.shape()[1];
    let mut dz = Tensor::zeros(probs.shape());
    for ((dzrow, prow), grow) in dz
        .data_mut()
        .chunks_exact_mut(c)
        .zip(probs.data().chunks_exact(c))
        .zip(dout.data().chunks_exact(c))
    {
        let dot: f64 = prow.iter().zip(grow).map(|(p, g)| p * g).sum();
        for ch in 0..c {
            dzrow[ch] = prow[ch] * (grow[ch] - dot) / temperature;
        }
    }
    dz
}

fn validate_prob_rows(t: &Tensor, what: &str) -> Result<usize> {
    let c = match t.shape() {
        [_, c] => *c,
        s => return Err(Error::Shape(format!("{what}: expected [N, C], got {s:?}"))),
    };
    for (i, row) in t.data().chunks_exact(c).enumerate() {
        if row.iter().any(|&v| v < 0.0) {
            return Err(Error::Graph(format!("{what}: negative entry in row {i}")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Graph(format!("{what}: row {i} sums to {sum}, not 1")));
        }
    }
    Ok(c)
}

/// Mean over the batch of `-sum_c t_c ln(max(p_c, 1e-10))`.
pub fn cross_entropy_forward(targets: &Tensor, preds: &Tensor) -> Result<Tensor> {
    let ct = validate_prob_rows(targets, "cross-entropy targets")?;
    let cp = validate_prob_rows(preds, "cross-entropy predictions")?;
    if targets.shape() != preds.shape() {
        return Err(Error::Shape(format!(
            "cross-entropy: target shape {:?} vs prediction shape {:?}",
            targets.shape(),
            preds.shape()
        )));
    }
    debug_assert_eq!(ct, cp);
    let n = targets.shape()[0];
    let mut loss = 0.0;
    for (trow, prow) in targets
        .data()
        .chunks_exact(ct)
        .zip(preds.data().chunks_exact(ct))
    {
        for (t, p) in trow.iter().zip(prow) {
            loss -= t * p.max(CE_LOG_FLOOR).ln();
        }
    }
    Ok(Tensor::scalar(loss / n as f64))
}

pub fn cross_entropy_backward(
    targets: &Tensor,
    preds: &Tensor,
    dout: f64,
) -> (Tensor, Tensor) {
    let c = targets.shape()[1];
    let n = targets.shape()[0] as f64;
    let mut dt = Tensor::zeros(targets.shape());
    let mut dp = Tensor::zeros(preds.shape());
    for (((dtrow, dprow), trow), prow) in dt
        .data_mut()
        .chunks_exact_mut(c)
        .zip(dp.data_mut().chunks_exact_mut(c))
        .zip(targets.data().chunks_exact(c))
        .zip(preds.data().chunks_exact(c))
    {
        for ch in 0..c {
            let p = prow[ch];
            dtrow[ch] = -p.max(CE_LOG_FLOOR).ln() * dout / n;
            dprow[ch] = if p > CE_LOG_FLOOR { -trow[ch] / p * dout / n } else { 0.0 };
        }
    }
    (dt, dp)
}

/// Numerically exact fused softmax + cross entropy on logits.
pub fn softmax_xent_forward(
    targets: &Tensor,
    logits: &Tensor,
    temperature: f64,
) -> Result<(Tensor, Tensor, Tensor)> {
    let c = validate_prob_rows(targets, "distillation targets")?;
    if targets.shape() != logits.shape() {
        return Err(Error::Shape(format!(
            "softmax cross-entropy: target shape {:?} vs logit shape {:?}",
            targets.shape(),
            logits.shape()
        )));
    }
    let n = targets.shape()[0];
    let mut probs = Tensor::zeros(logits.shape());
    let mut logp = Tensor::zeros(logits.shape());
    let mut loss = 0.0;
    for (((prow, lrow), zrow), trow) in probs
        .data_mut()
        .chunks_exact_mut(c)
        .zip(logp.data_mut().chunks_exact_mut(c))
        .zip(logits.data().chunks_exact(c))
        .zip(targets.data().chunks_exact(c))
    {
        let m = zrow.iter().map(|z| z / temperature).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (p, z) in prow.iter_mut().zip(zrow) {
            *p = (z / temperature - m).exp();
            sum += *p;
        }
        let lse = m + sum.ln();
        for ch in 0..c {
            prow[ch] /= sum;
            lrow[ch] = zrow[ch] / temperature - lse;
            loss -= trow[ch] * lrow[ch];
        }
    }
    Ok((Tensor::scalar(loss / n as f64), probs, logp))
}

pub fn softmax_xent_backward(
    targets: &Tensor,
    probs: &Tensor,
    logp: &Tensor,
    temperature: f64,
    dout: f64,
) -> (Tensor, Tensor) {
    let c = targets.shape()[1];
    let n = targets.shape()[0] as f64;
    let mut dt = Tensor::zeros(targets.shape());
    let mut dz = Tensor::zeros(targets.shape());
    for (((dtrow, dzrow), (trow, prow)), lrow) in dt
        .data_mut()
        .chunks_exact_mut(c)
        .zip(dz.data_mut().chunks_exact_mut(c))
        .zip(targets.data().chunks_exact(c).zip(probs.data().chunks_exact(c)))
        .zip(logp.data().chunks_exact(c))
    {
        let tsum: f64 = trow.iter().sum();
        for ch in 0..c {
            dzrow[ch] = (prow[ch] * tsum - trow[ch]) * dout / (n * temperature);
            dtrow[ch] = -lrow[ch] * dout / n;
        }
    }
    (dt, dz)
}

pub fn transpose_forward(x: &Tensor, perm: &[usize]) -> Tensor {
    let in_shape = x.shape();
    let rank = in_shape.len();
    debug_assert_eq!(perm.len(), rank);
    let out_shape: Vec<usize> = perm.iter().map(|&p| in_shape[p]).collect();
    let mut in_strides = vec![1usize; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
    }
    let strides_for_out: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let mut out = Tensor::zeros(&out_shape);
    let od = out.data_mut();
    let xd = x.data();
    let mut coord = vec![0usize; rank];
    let mut src = 0usize;
    for o in od.iter_mut() {
        *o = xd[src];
        // increment the mixed-radix counter, updating the source offset
        for axis in (0..rank).rev() {
            coord[axis] += 1;
            src += strides_for_out[axis];
            if coord[axis] < out_shape[axis] {
                break;
            }
            src -= strides_for_out[axis] * out_shape[axis];
            coord[axis] = 0;
        }
    }
    out
}

pub fn invert_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Mean over a contiguous run of axes.
pub fn mean_axes_forward(x: &Tensor, axes: &[usize]) -> Tensor {
    let shape = x.shape();
    let first = axes[0];
    let last = *axes.last().unwrap();
    let outer: usize = shape[..first].iter().product();
    let red: usize = shape[first..=last].iter().product();
    let inner: usize = shape[last + 1..].iter().product();
    let mut out_shape: Vec<usize> = shape[..first].to_vec();
    out_shape.extend_from_slice(&shape[last + 1..]);
    let mut out = Tensor::zeros(&out_shape);
    let od = out.data_mut();
    let xd = x.data();
    for o in 0..outer {
        for r in 0..red {
            let src = (o * red + r) * inner;
            let dst = o * inner;
            for i in 0..inner {
                od[dst + i] += xd[src + i];
            }
        }
    }
    od.iter_mut().for_each(|v| *v /= red as f64);
    out
}

pub fn mean_axes_backward(x_shape: &[usize], axes: &[usize], dout: &Tensor) -> Tensor {
    let first = axes[0];
    let last = *axes.last().unwrap();
    let outer: usize = x_shape[..first].iter().product();
    let red: usize = x_shape[first..=last].iter().product();
    let inner: usize = x_shape[last + 1..].iter().product();
    let mut dx = Tensor::zeros(x_shape);
    let dd = dx.data_mut();
    let gd = dout.data();
    let scale = 1.0 / red as f64;
    for o in 0..outer {
        for r in 0..red {
            let dst = (o * red + r) * inner;
            let src = o * inner;
            for i in 0..inner {
                dd[dst + i] = gd[src + i] * scale;
            }
        }
    }
    dx
}

pub fn bias_add_forward(x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let c = bias.len();
    if x.shape().last() != Some(&c) {
        return Err(Error::Shape(format!(
            "bias of {c} channels against input {:?}",
            x.shape()
        )));
    }
    let mut y = x.clone();
    for row in y.data_mut().chunks_exact_mut(c) {
        for (v, b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    Ok(y)
}

pub fn bias_add_backward(bias_len: usize, dout: &Tensor) -> Tensor {
    let mut db = Tensor::zeros(&[bias_len]);
    for row in dout.data().chunks_exact(bias_len) {
        for (d, g) in db.data_mut().iter_mut().zip(row) {
            *d += g;
        }
    }
    db
}

pub fn concat_forward(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
    let first = parts[0].shape().to_vec();
    let mut axis_total = 0;
    for p in parts {
        if p.rank() != first.len() {
            return Err(Error::Shape("concat: rank mismatch".into()));
        }
        for (d, (a, b)) in p.shape().iter().zip(&first).enumerate() {
            if d != axis && a != b {
                return Err(Error::Shape(format!(
                    "concat: shapes {:?} and {:?} differ off-axis",
                    p.shape(),
                    first
                )));
            }
        }
        axis_total += p.shape()[axis];
    }
    let mut out_shape = first.clone();
    out_shape[axis] = axis_total;
    let outer: usize = first[..axis].iter().product();
    let inner: usize = first[axis + 1..].iter().product();
    let mut out = Tensor::zeros(&out_shape);
    let od = out.data_mut();
    let row_out = axis_total * inner;
    for o in 0..outer {
        let mut offset = 0;
        for p in parts {
            let block = p.shape()[axis] * inner;
            od[o * row_out + offset..o * row_out + offset + block]
                .copy_from_slice(&p.data()[o * block..(o + 1) * block]);
            offset += block;
        }
    }
    Ok(out)
}

pub fn concat_backward(shapes: &[Vec<usize>], axis: usize, dout: &Tensor) -> Vec<Tensor> {
    let outer: usize = shapes[0][..axis].iter().product();
    let inner: usize = shapes[0][axis + 1..].iter().product();
    let total: usize = shapes.iter().map(|s| s[axis]).sum();
    let row_out = total * inner;
    let mut grads: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(s)).collect();
    for o in 0..outer {
        let mut offset = 0;
        for (g, s) in grads.iter_mut().zip(shapes) {
            let block = s[axis] * inner;
            g.data_mut()[o * block..(o + 1) * block]
                .copy_from_slice(&dout.data()[o * row_out + offset..o * row_out + offset + block]);
            offset += block;
        }
    }
    grads
}

/// Resolve a reshape spec with at most one -1 against a value count.
pub fn resolve_dims(dims: &[i64], len: usize) -> Result<Vec<usize>> {
    let inferred = dims.iter().filter(|&&d| d == -1).count();
    if inferred > 1 || dims.iter().any(|&d| d == 0 || d < -1) {
        return Err(Error::Shape(format!("bad reshape spec {dims:?}")));
    }
    let known: usize = dims.iter().filter(|&&d| d > 0).map(|&d| d as usize).product();
    let mut out = Vec::with_capacity(dims.len());
    for &d in dims {
        if d == -1 {
            if known == 0 || len % known != 0 {
                return Err(Error::Shape(format!("cannot infer -1 in {dims:?} for {len} values")));
            }
            out.push(len / known);
        } else {
            out.push(d as usize);
        }
    }
    let total: usize = out.iter().product();
    if total != len {
        return Err(Error::Shape(format!("reshape {dims:?} does not fit {len} values")));
    }
    Ok(out)
}
