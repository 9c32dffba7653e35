//! Straightforward f64 reference implementation of the layer stack, written
//! independently of the crate kernels (plain nested loops, no layout tricks).

use elasticzo_core::fpnet::Network;
use elasticzo_core::LayerKind;

/// Per-layer parameters as f64: `(weight, bias)` for trainable layers.
pub type Params = Vec<Option<(Vec<f64>, Vec<f64>)>>;

pub fn params_of(net: &Network) -> Params {
    (0..net.depth())
        .map(|l| {
            net.params(l).map(|p| {
                (
                    p.weight.data().iter().map(|&v| v as f64).collect(),
                    p.bias.data().iter().map(|&v| v as f64).collect(),
                )
            })
        })
        .collect()
}

/// One sample, shape `dims` (C,H,W or N).
#[derive(Clone)]
struct Act {
    dims: Vec<usize>,
    v: Vec<f64>,
}

fn layer(kind: &LayerKind, p: Option<&(Vec<f64>, Vec<f64>)>, x: Act) -> Act {
    match *kind {
        LayerKind::Conv2d { in_ch, out_ch, kernel, pad } => {
            let (w, b) = p.unwrap();
            let (h, wd) = (x.dims[1], x.dims[2]);
            let (oh, ow) = (h + 2 * pad - kernel + 1, wd + 2 * pad - kernel + 1);
            let mut out = vec![0.0; out_ch * oh * ow];
            for o in 0..out_ch {
                for y in 0..oh {
                    for xx in 0..ow {
                        let mut s = b[o];
                        for c in 0..in_ch {
                            for ky in 0..kernel {
                                for kx in 0..kernel {
                                    let iy = y as isize + ky as isize - pad as isize;
                                    let ix = xx as isize + kx as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                        continue;
                                    }
                                    let wi = ((o * in_ch + c) * kernel + ky) * kernel + kx;
                                    s += w[wi] * x.v[(c * h + iy as usize) * wd + ix as usize];
                                }
                            }
                        }
                        out[(o * oh + y) * ow + xx] = s;
                    }
                }
            }
            Act { dims: vec![out_ch, oh, ow], v: out }
        }
        LayerKind::Linear { inputs, outputs } => {
            let (w, b) = p.unwrap();
            let v = (0..outputs)
                .map(|o| b[o] + (0..inputs).map(|i| w[o * inputs + i] * x.v[i]).sum::<f64>())
                .collect();
            Act { dims: vec![outputs], v }
        }
        LayerKind::Relu => Act { dims: x.dims, v: x.v.iter().map(|&a| a.max(0.0)).collect() },
        LayerKind::MaxPool2d { k } => {
            let (c, h, w) = (x.dims[0], x.dims[1], x.dims[2]);
            let (oh, ow) = (h / k, w / k);
            let mut out = vec![f64::NEG_INFINITY; c * oh * ow];
            for ch in 0..c {
                for y in 0..h {
                    for xx in 0..w {
                        let o = &mut out[(ch * oh + y / k) * ow + xx / k];
                        *o = o.max(x.v[(ch * h + y) * w + xx]);
                    }
                }
            }
            Act { dims: vec![c, oh, ow], v: out }
        }
        LayerKind::Flatten => Act { dims: vec![x.v.len()], v: x.v },
    }
}

/// Mean softmax cross-entropy over the batch.
pub fn loss(layers: &[LayerKind], params: &Params, input_dims: &[usize], input: &[f32], labels: &[usize]) -> f64 {
    let per: usize = input_dims.iter().product();
    let mut total = 0.0;
    for (b, &y) in labels.iter().enumerate() {
        let mut a = Act {
            dims: input_dims.to_vec(),
            v: input[b * per..(b + 1) * per].iter().map(|&v| v as f64).collect(),
        };
        for (l, kind) in layers.iter().enumerate() {
            a = layer(kind, params[l].as_ref(), a);
        }
        let m = a.v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + a.v.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
        total += lse - a.v[y];
    }
    total / labels.len() as f64
}
