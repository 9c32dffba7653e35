use elasticzo_core::data::Dataset;
use elasticzo_core::fpnet::{cross_entropy, Network};
use elasticzo_core::memmodel::Precision;
use elasticzo_core::qfloat::{dequantized_cross_entropy, quantize_input, FloatOps};
use elasticzo_core::qnet::{argmax_rows, QuantNetwork};
use elasticzo_core::{LayerKind, SeededGenerator, Tensor};

use crate::error::Result;

/// A network of either precision.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Fp32(Network),
    Int8(QuantNetwork),
}

/// Mean loss and accuracy over a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

fn argmax_f32(logits: &Tensor) -> Vec<usize> {
    let classes = logits.shape()[1];
    logits
        .data()
        .chunks_exact(classes)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f32::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}

impl Model {
    pub fn init(precision: Precision, input: &[usize], layers: Vec<LayerKind>, gen: &mut SeededGenerator) -> Result<Self> {
        Ok(match precision {
            Precision::Fp32 => Model::Fp32(Network::init_uniform(input, layers, gen)?),
            Precision::Int8 => Model::Int8(QuantNetwork::init_uniform(input, layers, gen)?),
        })
    }

    pub fn precision(&self) -> Precision {
        match self {
            Model::Fp32(_) => Precision::Fp32,
            Model::Int8(_) => Precision::Int8,
        }
    }

    pub fn input_shape(&self) -> &[usize] {
        match self {
            Model::Fp32(n) => n.input_shape(),
            Model::Int8(n) => n.input_shape(),
        }
    }

    pub fn layers(&self) -> &[LayerKind] {
        match self {
            Model::Fp32(n) => n.layers(),
            Model::Int8(n) => n.layers(),
        }
    }

    pub fn depth(&self) -> usize {
        self.layers().len()
    }

    /// Test-set loss and accuracy in chunks of `chunk` samples. INT8 models run
    /// the integer forward pass and take the integer argmax; only the reported
    /// loss is computed in floating point.
    pub fn evaluate(&self, ds: &Dataset, chunk: usize) -> Result<Evaluation> {
        let (mut loss, mut correct) = (0.0, 0usize);
        let indices: Vec<usize> = (0..ds.len()).collect();
        for idx in indices.chunks(chunk.max(1)) {
            let batch = ds.batch(idx)?;
            let (batch_loss, predicted) = match self {
                Model::Fp32(net) => {
                    let logits = net.forward(&batch.images)?;
                    (cross_entropy(&logits, &batch.labels)?, argmax_f32(&logits))
                }
                Model::Int8(net) => {
                    let logits = net.forward(&quantize_input(&batch.images)?)?;
                    let mut ops = FloatOps::default();
                    (dequantized_cross_entropy(&logits, &batch.labels, &mut ops)?, argmax_rows(&logits))
                }
            };
            loss += batch_loss * idx.len() as f64;
            correct += predicted.iter().zip(&batch.labels).filter(|(p, y)| p == y).count();
        }
        Ok(Evaluation { loss: loss / ds.len() as f64, accuracy: correct as f64 / ds.len() as f64 })
    }
}
