//! Binary model checkpoints.
//!
//! Layout (little-endian): magic `EZO1`, precision byte (0 fp32, 1 int8),
//! input rank and dims (`u32`), layer count (`u32`) and one record per layer
//! (tag byte then its `u32` hyperparameters), then the parameters of every
//! trainable layer in order. FP32 layers store weights then biases as `f32`;
//! INT8 layers store an `i16` exponent then the `i8` weights.

use std::path::Path;

use elasticzo_core::fpnet::Network;
use elasticzo_core::qnet::QuantNetwork;
use elasticzo_core::qtensor::QuantTensor;
use elasticzo_core::LayerKind;

use crate::error::{CliError, Result};
use crate::model::Model;

const MAGIC: &[u8; 4] = b"EZO1";

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode(model: &Model) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    let (input, layers) = (model.input_shape(), model.layers());
    out.push(matches!(model, Model::Int8(_)) as u8);
    put_u32(&mut out, input.len());
    input.iter().for_each(|&d| put_u32(&mut out, d));
    put_u32(&mut out, layers.len());
    for layer in layers {
        match *layer {
            LayerKind::Conv2d { in_ch, out_ch, kernel, pad } => {
                out.push(0);
                [in_ch, out_ch, kernel, pad].iter().for_each(|&v| put_u32(&mut out, v));
            }
            LayerKind::Linear { inputs, outputs } => {
                out.push(1);
                put_u32(&mut out, inputs);
                put_u32(&mut out, outputs);
            }
            LayerKind::Relu => out.push(2),
            LayerKind::MaxPool2d { k } => {
                out.push(3);
                put_u32(&mut out, k);
            }
            LayerKind::Flatten => out.push(4),
        }
    }
    match model {
        Model::Fp32(net) => {
            for l in 0..net.depth() {
                if let Some(p) = net.params(l) {
                    p.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
                }
            }
        }
        Model::Int8(net) => {
            for l in 0..net.depth() {
                if let Some(w) = net.weights(l) {
                    out.extend_from_slice(&(w.exponent as i16).to_le_bytes());
                    out.extend(w.data().iter().map(|&v| v as u8));
                }
            }
        }
    }
    out
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n).ok_or_else(|| CliError::format(self.path, "truncated checkpoint"))?;
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<Model> {
    let mut c = Cursor { path, bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(CliError::format(path, "not a checkpoint (bad magic)"));
    }
    let int8 = match c.u8()? {
        0 => false,
        1 => true,
        p => return Err(CliError::format(path, format!("unknown precision tag {p}"))),
    };
    let rank = c.u32()?;
    let input = (0..rank).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
    let count = c.u32()?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        layers.push(match c.u8()? {
            0 => LayerKind::Conv2d { in_ch: c.u32()?, out_ch: c.u32()?, kernel: c.u32()?, pad: c.u32()? },
            1 => LayerKind::linear(c.u32()?, c.u32()?),
            2 => LayerKind::Relu,
            3 => LayerKind::MaxPool2d { k: c.u32()? },
            4 => LayerKind::Flatten,
            t => return Err(CliError::format(path, format!("unknown layer tag {t}"))),
        });
    }
    let model = if int8 {
        let mut net = QuantNetwork::zeros(&input, layers)?;
        for l in 0..net.depth() {
            let Some(shape) = net.layers()[l].weight_shape() else { continue };
            let exponent = i16::from_le_bytes(c.take(2)?.try_into().unwrap()) as i32;
            let n = shape.iter().product();
            let data = c.take(n)?.iter().map(|&b| b as i8).collect();
            net.set_weights(l, QuantTensor::new(shape, data, exponent)?)?;
        }
        Model::Int8(net)
    } else {
        let mut net = Network::zeros(&input, layers)?;
        for l in 0..net.depth() {
            let Some(p) = net.params_mut(l) else { continue };
            let n = p.len();
            let raw = c.take(4 * n)?;
            for (v, chunk) in p.iter_mut().zip(raw.chunks_exact(4)) {
                *v = f32::from_le_bytes(chunk.try_into().unwrap());
            }
        }
        Model::Fp32(net)
    };
    if c.pos != bytes.len() {
        return Err(CliError::format(path, format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok(model)
}

pub fn save(path: &Path, model: &Model) -> Result<()> {
    std::fs::write(path, encode(model)).map_err(CliError::io(path))
}

pub fn load(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    decode(path, &bytes)
}
