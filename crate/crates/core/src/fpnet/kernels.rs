use alloc::vec;

use crate::conv::ConvGeom;

/// Dot product with eight independent partial sums.
#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f32; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub(crate) fn axpy(alpha: f32, x: &[f32], y: &mut [f32]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out[b, o] = bias[o] + W[o, :] . x[b, :]`
pub(crate) fn linear_forward(
    x: &[f32],
    weight: &[f32],
    bias: &[f32],
    inputs: usize,
    outputs: usize,
    out: &mut [f32],
) {
    for (xb, ob) in x.chunks_exact(inputs).zip(out.chunks_exact_mut(outputs)) {
        for (o, w_row) in weight.chunks_exact(inputs).enumerate() {
            ob[o] = bias[o] + dot(w_row, xb);
        }
    }
}

/// Accumulates parameter gradients and optionally the input error.
pub(crate) fn linear_backward(
    x: &[f32],
    err: &[f32],
    weight: &[f32],
    inputs: usize,
    outputs: usize,
    grad_w: &mut [f32],
    grad_b: &mut [f32],
    mut err_in: Option<&mut [f32]>,
) {
    for (b, (xb, eb)) in x.chunks_exact(inputs).zip(err.chunks_exact(outputs)).enumerate() {
        for o in 0..outputs {
            let e = eb[o];
            if e == 0.0 {
                continue;
            }
            grad_b[o] += e;
            axpy(e, xb, &mut grad_w[o * inputs..(o + 1) * inputs]);
            if let Some(ei) = err_in.as_deref_mut() {
                axpy(e, &weight[o * inputs..(o + 1) * inputs], &mut ei[b * inputs..(b + 1) * inputs]);
            }
        }
    }
}

pub(crate) fn conv_forward(
    g: &ConvGeom,
    x: &[f32],
    weight: &[f32],
    bias: &[f32],
    batch: usize,
    out: &mut [f32],
) {
    let mut padded = vec![0.0f32; g.in_ch * g.padded_plane()];
    let mut wide = vec![0.0f32; g.span];
    let taps = g.taps();
    for b in 0..batch {
        let xb = &x[b * g.in_ch * g.in_plane()..(b + 1) * g.in_ch * g.in_plane()];
        g.pad_into(xb, &mut padded, |v| v);
        for oc in 0..g.out_ch {
            wide.fill(bias[oc]);
            for ic in 0..g.in_ch {
                let plane = &padded[ic * g.padded_plane()..(ic + 1) * g.padded_plane()];
                let w = &weight[(oc * g.in_ch + ic) * taps..(oc * g.in_ch + ic + 1) * taps];
                for ky in 0..g.k {
                    for kx in 0..g.k {
                        let off = ky * g.wp + kx;
                        axpy(w[ky * g.k + kx], &plane[off..off + g.span], &mut wide);
                    }
                }
            }
            let o = (b * g.out_ch + oc) * g.out_plane();
            g.compact(&wide, &mut out[o..o + g.out_plane()]);
        }
    }
}

pub(crate) fn conv_backward(
    g: &ConvGeom,
    x: &[f32],
    err: &[f32],
    weight: &[f32],
    batch: usize,
    grad_w: &mut [f32],
    grad_b: &mut [f32],
    mut err_in: Option<&mut [f32]>,
) {
    let mut padded = vec![0.0f32; g.in_ch * g.padded_plane()];
    let mut err_pad = vec![0.0f32; g.in_ch * g.padded_plane()];
    let mut wide = vec![0.0f32; g.span];
    let taps = g.taps();
    for b in 0..batch {
        let xb = &x[b * g.in_ch * g.in_plane()..(b + 1) * g.in_ch * g.in_plane()];
        g.pad_into(xb, &mut padded, |v| v);
        err_pad.fill(0.0);
        for oc in 0..g.out_ch {
            let e = &err[(b * g.out_ch + oc) * g.out_plane()..(b * g.out_ch + oc + 1) * g.out_plane()];
            grad_b[oc] += e.iter().sum::<f32>();
            g.widen(e, &mut wide);
            for ic in 0..g.in_ch {
                let base = (oc * g.in_ch + ic) * taps;
                let plane = &padded[ic * g.padded_plane()..(ic + 1) * g.padded_plane()];
                for ky in 0..g.k {
                    for kx in 0..g.k {
                        let off = ky * g.wp + kx;
                        grad_w[base + ky * g.k + kx] += dot(&wide, &plane[off..off + g.span]);
                    }
                }
                if err_in.is_some() {
                    let ep = &mut err_pad[ic * g.padded_plane()..(ic + 1) * g.padded_plane()];
                    for ky in 0..g.k {
                        for kx in 0..g.k {
                            let off = ky * g.wp + kx;
                            axpy(weight[base + ky * g.k + kx], &wide, &mut ep[off..off + g.span]);
                        }
                    }
                }
            }
        }
        if let Some(ei) = err_in.as_deref_mut() {
            for ic in 0..g.in_ch {
                let o = (b * g.in_ch + ic) * g.in_plane();
                g.crop(
                    &err_pad[ic * g.padded_plane()..(ic + 1) * g.padded_plane()],
                    &mut ei[o..o + g.in_plane()],
                );
            }
        }
    }
}

/// Index of the maximum inside each pooling window, first index on ties.
#[inline]
pub(crate) fn pool_argmax<T: PartialOrd + Copy>(
    plane: &[T],
    w: usize,
    k: usize,
    oy: usize,
    ox: usize,
) -> usize {
    let mut best = (oy * k) * w + ox * k;
    for dy in 0..k {
        for dx in 0..k {
            let idx = (oy * k + dy) * w + ox * k + dx;
            if plane[idx] > plane[best] {
                best = idx;
            }
        }
    }
    best
}

/// Max pooling over `planes` independent `h x w` planes.
pub(crate) fn maxpool_forward<T: PartialOrd + Copy>(
    x: &[T],
    planes: usize,
    h: usize,
    w: usize,
    k: usize,
    out: &mut [T],
) {
    let (oh, ow) = (h / k, w / k);
    for p in 0..planes {
        let plane = &x[p * h * w..(p + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                out[p * oh * ow + oy * ow + ox] = plane[pool_argmax(plane, w, k, oy, ox)];
            }
        }
    }
}

/// Routes each output error to the argmax recomputed from the cached input.
pub(crate) fn maxpool_backward<T: PartialOrd + Copy, E: Copy + Default>(
    x: &[T],
    err: &[E],
    planes: usize,
    h: usize,
    w: usize,
    k: usize,
    err_in: &mut [E],
) {
    let (oh, ow) = (h / k, w / k);
    err_in.fill(E::default());
    for p in 0..planes {
        let plane = &x[p * h * w..(p + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let idx = pool_argmax(plane, w, k, oy, ox);
                err_in[p * h * w + idx] = err[p * oh * ow + oy * ow + ox];
            }
        }
    }
}
