//! Epoch loop shared by `train` and `finetune`.

use elasticzo_core::data::{batch_indices, Dataset};
use elasticzo_core::fpnet::{bp_step_timed, BpOptimizer};
use elasticzo_core::memmodel::OptimizerKind;
use elasticzo_core::prng::derive_seed;
use elasticzo_core::qfloat::{dequantized_cross_entropy, quantize_input, FloatOps};
use elasticzo_core::zo::{train_step_timed, ZoConfig};
use elasticzo_core::zo_int8::{train_step_int8_timed, ZoInt8Config};
use elasticzo_core::{SeededGenerator, ZeroProb};

use crate::config::RunConfig;
use crate::error::Result;
use crate::metrics::{EpochMetrics, PhaseTimes};
use crate::model::Model;

/// Stream ids for [`derive_seed`]; every random choice in a run comes from
/// one of these streams of the master seed.
pub mod streams {
    pub const INIT: u32 = 1;
    pub const SHUFFLE: u32 = 2;
    pub const PERTURB: u32 = 3;
    pub const ROTATE_TRAIN: u32 = 4;
    pub const ROTATE_TEST: u32 = 5;
    pub const BASE: u32 = 6;
}

/// Counters that are not part of the metrics file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunCounters {
    pub steps: u64,
    /// FP32 steps abandoned because a perturbed loss was not finite.
    pub skipped: u64,
    /// Floating-point operations inside INT8 training steps.
    pub step_float_ops: u64,
    /// Floating-point operations spent on reporting INT8 training loss.
    pub monitor_float_ops: u64,
}

pub struct Trainer<'a> {
    pub cfg: &'a RunConfig,
    pub model: Model,
    pub counters: RunCounters,
    partition: usize,
    optimizer: BpOptimizer,
    shuffle: SeededGenerator,
    perturb: SeededGenerator,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &'a RunConfig, model: Model) -> Result<Self> {
        let partition = cfg.partition.resolve(model.layers());
        if partition > model.depth() {
            return Err(elasticzo_core::Error::InvalidPartition { partition, layers: model.depth() }.into());
        }
        Ok(Trainer {
            cfg,
            model,
            counters: RunCounters::default(),
            partition,
            optimizer: match cfg.optimizer {
                OptimizerKind::Sgd => BpOptimizer::Sgd,
                OptimizerKind::Adam => BpOptimizer::adam(),
            },
            shuffle: SeededGenerator::new(derive_seed(cfg.seed, streams::SHUFFLE)),
            perturb: SeededGenerator::new(derive_seed(cfg.seed, streams::PERTURB)),
        })
    }

    pub fn partition(&self) -> usize {
        self.partition
    }

    /// One pass over `train`; returns the mean training loss.
    pub fn epoch(&mut self, epoch: usize, train: &Dataset, times: &mut PhaseTimes) -> Result<f64> {
        let cfg = self.cfg;
        let lr = cfg.lr_at(epoch);
        let batches = batch_indices(train.len(), cfg.batch, Some(&mut self.shuffle), cfg.drop_last)?;
        let (mut total, mut seen) = (0.0, 0usize);
        let int8_cfg = ZoInt8Config {
            r_max: cfg.r_max,
            p_zero: ZeroProb::new(cfg.p_zero.at(epoch))?,
            b_zo: cfg.b_zo,
            b_bp: cfg.b_bp.at(epoch),
            partition: self.partition,
            sign_mode: cfg.sign_mode,
        };
        let zo_cfg = ZoConfig {
            eps: cfg.eps,
            lr,
            partition: self.partition,
            grad_clip: cfg.grad_clip,
            merged: cfg.merged,
            bp_activations: cfg.bp_activations,
        };
        for idx in &batches {
            let batch = train.batch(idx)?;
            let seed = self.perturb.next_u32();
            let loss = match &mut self.model {
                Model::Fp32(net) if self.partition == 0 => {
                    bp_step_timed(net, &batch.images, &batch.labels, &mut self.optimizer, lr, times)?
                }
                Model::Fp32(net) => {
                    let m = train_step_timed(net, &batch.images, &batch.labels, &zo_cfg, seed, &mut self.optimizer, times)?;
                    self.counters.skipped += m.skipped as u64;
                    if m.skipped {
                        continue;
                    }
                    m.bp_loss
                }
                Model::Int8(net) => {
                    let x = quantize_input(&batch.images)?;
                    let m = train_step_int8_timed(net, &x, &batch.labels, &int8_cfg, seed, times)?;
                    self.counters.step_float_ops += m.float_ops;
                    let mut ops = FloatOps::default();
                    let loss = dequantized_cross_entropy(&m.logits_minus, &batch.labels, &mut ops)?;
                    self.counters.monitor_float_ops += ops.0;
                    loss
                }
            };
            self.counters.steps += 1;
            total += loss * idx.len() as f64;
            seen += idx.len();
        }
        Ok(if seen == 0 { f64::NAN } else { total / seen as f64 })
    }

    /// Evaluates before training (epoch 0 row of `init_stage`), then trains
    /// `cfg.epochs` epochs, calling `record` after every row.
    pub fn run(
        &mut self,
        train: &Dataset,
        test: &Dataset,
        init_stage: &str,
        stage: &str,
        mut record: impl FnMut(&EpochMetrics, Option<&PhaseTimes>) -> Result<()>,
    ) -> Result<Vec<EpochMetrics>> {
        let mut rows = Vec::with_capacity(self.cfg.epochs + 1);
        let eval = self.model.evaluate(test, self.cfg.eval_batch)?;
        let init = EpochMetrics {
            stage: init_stage.to_string(),
            epoch: 0,
            lr: 0.0,
            train_loss: None,
            test_loss: eval.loss,
            test_acc: eval.accuracy,
        };
        record(&init, None)?;
        rows.push(init);
        for epoch in 0..self.cfg.epochs {
            let mut times = PhaseTimes::default();
            let train_loss = self.epoch(epoch, train, &mut times)?;
            let eval = self.model.evaluate(test, self.cfg.eval_batch)?;
            // INT8 training has no learning rate; its step size is the bit budget.
            let lr = match self.model {
                Model::Fp32(_) => self.cfg.lr_at(epoch) as f64,
                Model::Int8(_) => 0.0,
            };
            let row = EpochMetrics {
                stage: stage.to_string(),
                epoch,
                lr,
                train_loss: Some(train_loss),
                test_loss: eval.loss,
                test_acc: eval.accuracy,
            };
            record(&row, Some(&times))?;
            rows.push(row);
        }
        Ok(rows)
    }
}
