//! Integer kernels: int8 operands, int32 products, int64 gradient sums.

use alloc::vec;

use crate::conv::ConvGeom;

// Operands are int8 values widened to i16, so one product (at most 2^14 in
// magnitude) fits in i16 and the multiplies stay on 16-bit lanes. Sums are
// i32: even the widest reduction here (784 products) stays below 2^24.
// Wrapping ops never wrap on these ranges; they only keep overflow checks out
// of the inner loops so that checked builds still vectorize.

#[inline]
fn mul_i16(a: i16, b: i16) -> i32 {
    a.wrapping_mul(b) as i32
}

#[inline]
fn dot_i8(a: &[i8], b: &[i8]) -> i32 {
    a.iter().zip(b).fold(0i32, |s, (&x, &y)| s.wrapping_add(mul_i16(x as i16, y as i16)))
}

#[inline]
fn dot_i16(a: &[i16], b: &[i16]) -> i32 {
    a.iter().zip(b).fold(0i32, |s, (&x, &y)| s.wrapping_add(mul_i16(x, y)))
}

#[inline]
fn axpy_i16(alpha: i16, x: &[i16], y: &mut [i32]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = yi.wrapping_add(mul_i16(alpha, xi));
    }
}

pub(crate) fn linear_forward(x: &[i8], weight: &[i8], inputs: usize, outputs: usize, out: &mut [i32]) {
    for (xb, ob) in x.chunks_exact(inputs).zip(out.chunks_exact_mut(outputs)) {
        for (o, w_row) in weight.chunks_exact(inputs).enumerate() {
            ob[o] = dot_i8(w_row, xb);
        }
    }
}

/// Weight gradient sum over the batch and, optionally, the int32 input error.
pub(crate) fn linear_backward(
    x: &[i8],
    err: &[i8],
    weight: &[i8],
    inputs: usize,
    outputs: usize,
    grad_w: &mut [i64],
    mut err_in: Option<&mut [i32]>,
) {
    for (b, (xb, eb)) in x.chunks_exact(inputs).zip(err.chunks_exact(outputs)).enumerate() {
        for (o, &e) in eb.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let e = e as i16;
            for (g, &xi) in grad_w[o * inputs..(o + 1) * inputs].iter_mut().zip(xb) {
                *g += mul_i16(e, xi as i16) as i64;
            }
            if let Some(ei) = err_in.as_deref_mut() {
                let w_row = &weight[o * inputs..(o + 1) * inputs];
                for (d, &w) in ei[b * inputs..(b + 1) * inputs].iter_mut().zip(w_row) {
                    *d = d.wrapping_add(mul_i16(e, w as i16));
                }
            }
        }
    }
}

pub(crate) fn conv_forward(g: &ConvGeom, x: &[i8], weight: &[i8], batch: usize, out: &mut [i32]) {
    let mut padded = vec![0i16; g.in_ch * g.padded_plane()];
    let mut wide = vec![0i32; g.span];
    let taps = g.taps();
    for b in 0..batch {
        let xb = &x[b * g.in_ch * g.in_plane()..(b + 1) * g.in_ch * g.in_plane()];
        g.pad_into(xb, &mut padded, |v| v as i16);
        for oc in 0..g.out_ch {
            wide.fill(0);
            for ic in 0..g.in_ch {
                let plane = &padded[ic * g.padded_plane()..(ic + 1) * g.padded_plane()];
                let w = &weight[(oc * g.in_ch + ic) * taps..(oc * g.in_ch + ic + 1) * taps];
                for ky in 0..g.k {
                    for kx in 0..g.k {
                        let off = ky * g.wp + kx;
                        axpy_i16(w[ky * g.k + kx] as i16, &plane[off..off + g.span], &mut wide);
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
    x: &[i8],
    err: &[i8],
    weight: &[i8],
    batch: usize,
    grad_w: &mut [i64],
    mut err_in: Option<&mut [i32]>,
) {
    let mut padded = vec![0i16; g.in_ch * g.padded_plane()];
    let mut err_pad = vec![0i32; g.in_ch * g.padded_plane()];
    let mut plane_err = vec![0i16; g.out_plane()];
    let mut wide = vec![0i16; g.span];
    let taps = g.taps();
    for b in 0..batch {
        let xb = &x[b * g.in_ch * g.in_plane()..(b + 1) * g.in_ch * g.in_plane()];
        g.pad_into(xb, &mut padded, |v| v as i16);
        err_pad.fill(0);
        for oc in 0..g.out_ch {
            let e = &err[(b * g.out_ch + oc) * g.out_plane()..(b * g.out_ch + oc + 1) * g.out_plane()];
            if e.iter().all(|&v| v == 0) {
                continue;
            }
            for (d, &v) in plane_err.iter_mut().zip(e) {
                *d = v as i16;
            }
            g.widen(&plane_err, &mut wide);
            for ic in 0..g.in_ch {
                let base = (oc * g.in_ch + ic) * taps;
                let plane = &padded[ic * g.padded_plane()..(ic + 1) * g.padded_plane()];
                for ky in 0..g.k {
                    for kx in 0..g.k {
                        let off = ky * g.wp + kx;
                        grad_w[base + ky * g.k + kx] +=
                            dot_i16(&wide, &plane[off..off + g.span]) as i64;
                    }
                }
                if err_in.is_some() {
                    let ep = &mut err_pad[ic * g.padded_plane()..(ic + 1) * g.padded_plane()];
                    for ky in 0..g.k {
                        for kx in 0..g.k {
                            let off = ky * g.wp + kx;
                            axpy_i16(weight[base + ky * g.k + kx] as i16, &wide, &mut ep[off..off + g.span]);
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
