//! The five subcommands as library functions.

use std::io::Write;
use std::path::{Path, PathBuf};

use elasticzo_core::data::{make_rotated_subset, Dataset, Split};
use elasticzo_core::memmodel::{mem_fp32, mem_int8, MemoryReport, Mode, OptimizerKind, Precision, ShapeSpec};
use elasticzo_core::prng::derive_seed;
use elasticzo_core::signtest::{run_sign_test, SignAgreement, SignTestConfig};
use elasticzo_core::{lenet5, SeededGenerator, MNIST_INPUT};

use crate::checkpoint;
use crate::config::{ModelSpec, RunConfig};
use crate::error::{CliError, Result};
use crate::idx::load_split;
use crate::metrics::{CsvSink, EpochMetrics};
use crate::model::{Evaluation, Model};
use crate::shapefile::{load_shape, ModelShape};
use crate::train::{streams, RunCounters, Trainer};

pub fn model_shape(spec: &ModelSpec) -> Result<ModelShape> {
    match spec {
        ModelSpec::Lenet5 => Ok(ModelShape { input: MNIST_INPUT.to_vec(), layers: lenet5() }),
        ModelSpec::ShapeFile(path) => load_shape(path),
    }
}

fn limited(ds: Dataset, limit: usize) -> Result<Dataset> {
    if limit == 0 || limit >= ds.len() {
        Ok(ds)
    } else {
        Ok(ds.head(limit)?)
    }
}

/// Train and test splits from `cfg.data_dir`, cut to the configured limits.
pub fn load_data(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let train = limited(load_split(&cfg.data_dir, Split::Train)?, cfg.train_limit)?;
    let test = limited(load_split(&cfg.data_dir, Split::Test)?, cfg.test_limit)?;
    Ok((train, test))
}

pub fn init_model(cfg: &RunConfig) -> Result<Model> {
    let shape = model_shape(&cfg.model)?;
    let mut gen = SeededGenerator::new(derive_seed(cfg.seed, streams::INIT));
    Model::init(cfg.precision, &shape.input, shape.layers, &mut gen)
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub rows: Vec<EpochMetrics>,
    pub counters: RunCounters,
    pub model: Model,
    pub partition: usize,
}

impl TrainReport {
    pub fn final_accuracy(&self) -> f64 {
        self.rows.last().map(|r| r.test_acc).unwrap_or(f64::NAN)
    }
}

fn run_and_save(
    cfg: &RunConfig,
    model: Model,
    train: &Dataset,
    test: &Dataset,
    stages: (&str, &str),
) -> Result<TrainReport> {
    cfg.validate()?;
    let mut sink = CsvSink::create(&cfg.out_dir)?;
    let mut trainer = Trainer::new(cfg, model)?;
    let rows = trainer.run(train, test, stages.0, stages.1, |row, times| sink.record(row, times))?;
    checkpoint::save(&cfg.out_dir.join("final.ckpt"), &trainer.model)?;
    Ok(TrainReport { rows, counters: trainer.counters, partition: trainer.partition(), model: trainer.model })
}

/// Trains from a fresh initialization on already loaded data.
pub fn train_on(cfg: &RunConfig, train: &Dataset, test: &Dataset) -> Result<TrainReport> {
    cfg.validate()?;
    run_and_save(cfg, init_model(cfg)?, train, test, ("init", "train"))
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let (train, test) = load_data(cfg)?;
    train_on(cfg, &train, &test)
}

pub fn cmd_eval(cfg: &RunConfig, checkpoint_path: &Path) -> Result<Evaluation> {
    let model = checkpoint::load(checkpoint_path)?;
    let test = limited(load_split(&cfg.data_dir, Split::Test)?, cfg.test_limit)?;
    if model.input_shape() != MNIST_INPUT {
        return Err(CliError::Config(format!(
            "checkpoint expects input {:?}, the dataset provides {:?}",
            model.input_shape(),
            MNIST_INPUT
        )));
    }
    model.evaluate(&test, cfg.eval_batch)
}

/// Rotated train and test subsets for fine-tuning.
pub fn rotated_subsets(cfg: &RunConfig, train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset)> {
    let angle = cfg.rotate_angle;
    let tr = make_rotated_subset(train, cfg.rotate_n.min(train.len()), angle, derive_seed(cfg.seed, streams::ROTATE_TRAIN))?;
    let te = make_rotated_subset(test, cfg.rotate_n.min(test.len()), angle, derive_seed(cfg.seed, streams::ROTATE_TEST))?;
    Ok((tr, te))
}

/// Continues training `base` on rotated data; the first row is the baseline.
pub fn finetune_on(cfg: &RunConfig, base: Model, train: &Dataset, test: &Dataset) -> Result<TrainReport> {
    cfg.validate()?;
    if base.precision() != cfg.precision {
        return Err(CliError::Config("precision: does not match the base checkpoint".into()));
    }
    let (rot_train, rot_test) = rotated_subsets(cfg, train, test)?;
    run_and_save(cfg, base, &rot_train, &rot_test, ("baseline", "finetune"))
}

pub fn cmd_finetune(cfg: &RunConfig) -> Result<TrainReport> {
    let path = cfg
        .base_checkpoint
        .as_ref()
        .ok_or_else(|| CliError::Config("base_checkpoint: required for finetune".into()))?;
    let base = checkpoint::load(path)?;
    let train = load_split(&cfg.data_dir, Split::Train)?;
    let test = load_split(&cfg.data_dir, Split::Test)?;
    finetune_on(cfg, base, &train, &test)
}

pub fn cmd_signtest(cfg: &SignTestConfig, out_dir: &Path) -> Result<SignAgreement> {
    let result = run_sign_test(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let path = out_dir.join("signtest.csv");
    let mut f = std::fs::File::create(&path).map_err(CliError::io(&path))?;
    let rate = if result.counted() == 0 { String::from("1.0 (no counted trials)") } else { format!("{:.6}", result.rate()) };
    writeln!(
        f,
        "trials,batch,classes,seed,excluded,agreements,rate\n{},{},{},{},{},{},{}",
        cfg.trials, cfg.batch, cfg.classes, cfg.seed, result.excluded, result.agreements, rate
    )
    .map_err(CliError::io(&path))?;
    Ok(result)
}

fn mode_name(m: Mode, depth: usize) -> String {
    match m {
        Mode::FullBp => "full_bp".into(),
        Mode::FullZo => "full_zo".into(),
        Mode::Elastic(c) if c == depth => "full_zo".into(),
        Mode::Elastic(0) => "full_bp".into(),
        Mode::Elastic(c) => format!("elastic_c{c}"),
    }
}

/// Every partition point for both precisions (and FP32 with Adam) at each batch size.
pub fn memreport_rows(spec: &ShapeSpec, batches: &[u64]) -> Result<Vec<MemoryReport>> {
    let mut rows = Vec::new();
    for &b in batches {
        for c in 0..=spec.depth() {
            rows.push(mem_fp32(spec, b, Mode::Elastic(c), OptimizerKind::Sgd)?);
            rows.push(mem_fp32(spec, b, Mode::Elastic(c), OptimizerKind::Adam)?);
            rows.push(mem_int8(spec, b, Mode::Elastic(c))?);
        }
    }
    Ok(rows)
}

pub fn cmd_memreport(model: &ModelSpec, batches: &[u64], out_dir: &Path) -> Result<(PathBuf, Vec<(u64, MemoryReport)>)> {
    let shape = model_shape(model)?;
    let spec_fp = ShapeSpec::from_layers(&shape.input, &shape.layers, true)?;
    let mut out = String::from(
        "batch,precision,optimizer,partition,mode,params,activations,grads,errors,optimizer_state,int32_scratch,total_bytes,total_mib\n",
    );
    let mut rows = Vec::new();
    for &b in batches {
        for r in memreport_rows(&spec_fp, &[b])? {
            let precision = match r.precision {
                Precision::Fp32 => "fp32",
                Precision::Int8 => "int8",
            };
            let optimizer = match r.optimizer {
                OptimizerKind::Sgd => "sgd",
                OptimizerKind::Adam => "adam",
            };
            out.push_str(&format!(
                "{b},{precision},{optimizer},{},{},{},{},{},{},{},{},{},{:.4}\n",
                r.partition,
                mode_name(r.mode, spec_fp.depth()),
                r.params,
                r.activations,
                r.grads,
                r.errors,
                r.optimizer_state,
                r.int32_scratch,
                r.total,
                r.total as f64 / (1024.0 * 1024.0)
            ));
            rows.push((b, r));
        }
    }
    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let path = out_dir.join("memreport.csv");
    std::fs::write(&path, out).map_err(CliError::io(&path))?;
    Ok((path, rows))
}
