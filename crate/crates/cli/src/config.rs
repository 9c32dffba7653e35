//! Flat `key = value` run configuration with command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use elasticzo_core::layers::partition_for_bp_tail;
use elasticzo_core::memmodel::{OptimizerKind, Precision};
use elasticzo_core::zo::BpActivations;
use elasticzo_core::zo_int8::SignMode;
use elasticzo_core::LayerKind;

use crate::error::{CliError, Result};

/// Which layers are trained by zeroth-order updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionSpec {
    FullBp,
    FullZo,
    /// Backprop on the last two trainable layers.
    Cls1,
    /// Backprop on the last trainable layer.
    Cls2,
    Index(usize),
}

impl PartitionSpec {
    pub fn resolve(self, layers: &[LayerKind]) -> usize {
        match self {
            PartitionSpec::FullBp => 0,
            PartitionSpec::FullZo => layers.len(),
            PartitionSpec::Cls1 => partition_for_bp_tail(layers, 2),
            PartitionSpec::Cls2 => partition_for_bp_tail(layers, 1),
            PartitionSpec::Index(c) => c,
        }
    }
}

impl FromStr for PartitionSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "full_bp" => PartitionSpec::FullBp,
            "full_zo" => PartitionSpec::FullZo,
            "cls1" => PartitionSpec::Cls1,
            "cls2" => PartitionSpec::Cls2,
            n => PartitionSpec::Index(
                n.parse().map_err(|_| format!("expected full_bp, full_zo, cls1, cls2 or a layer index, got `{n}`"))?,
            ),
        })
    }
}

impl fmt::Display for PartitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionSpec::FullBp => f.write_str("full_bp"),
            PartitionSpec::FullZo => f.write_str("full_zo"),
            PartitionSpec::Cls1 => f.write_str("cls1"),
            PartitionSpec::Cls2 => f.write_str("cls2"),
            PartitionSpec::Index(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    Lenet5,
    ShapeFile(PathBuf),
}

/// Piecewise-constant value over epochs: `epoch:value` pairs sorted by epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule<T> {
    points: Vec<(usize, T)>,
}

impl<T: Copy> Schedule<T> {
    pub fn constant(v: T) -> Self {
        Schedule { points: vec![(0, v)] }
    }

    pub fn new(points: Vec<(usize, T)>) -> std::result::Result<Self, String> {
        if points.first().map(|p| p.0) != Some(0) {
            return Err("schedule must start at epoch 0".into());
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err("schedule epochs must be strictly increasing".into());
        }
        Ok(Schedule { points })
    }

    pub fn at(&self, epoch: usize) -> T {
        self.points.iter().rev().find(|p| p.0 <= epoch).map(|p| p.1).unwrap_or(self.points[0].1)
    }

    pub fn values(&self) -> impl Iterator<Item = T> + '_ {
        self.points.iter().map(|p| p.1)
    }
}

impl<T: FromStr + Copy> FromStr for Schedule<T> {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let points = s
            .split(',')
            .map(|item| {
                let item = item.trim();
                match item.split_once(':') {
                    Some((e, v)) => Ok((
                        e.trim().parse().map_err(|_| format!("bad epoch in `{item}`"))?,
                        v.trim().parse().map_err(|_| format!("bad value in `{item}`"))?,
                    )),
                    None => Ok((0, item.parse().map_err(|_| format!("bad value `{item}`"))?)),
                }
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        Schedule::new(points)
    }
}

impl<T: fmt::Display> fmt::Display for Schedule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.points.iter().map(|(e, v)| format!("{e}:{v}")).collect();
        f.write_str(&items.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub precision: Precision,
    pub model: ModelSpec,
    pub partition: PartitionSpec,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u32,
    /// Use only the first `train_limit` training images (0 keeps all).
    pub train_limit: usize,
    pub test_limit: usize,
    pub drop_last: bool,
    pub eval_batch: usize,

    pub lr: f32,
    pub lr_decay: f32,
    pub lr_decay_every: usize,
    pub eps: f32,
    pub grad_clip: Option<f32>,
    pub optimizer: OptimizerKind,
    pub merged: bool,
    pub bp_activations: BpActivations,

    pub r_max: u8,
    pub b_zo: u32,
    pub b_bp: Schedule<u32>,
    pub p_zero: Schedule<f64>,
    pub sign_mode: SignMode,

    pub base_checkpoint: Option<PathBuf>,
    pub rotate_angle: f32,
    pub rotate_n: usize,

    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            precision: Precision::Fp32,
            model: ModelSpec::Lenet5,
            partition: PartitionSpec::FullBp,
            epochs: 20,
            batch: 32,
            seed: 0,
            train_limit: 0,
            test_limit: 0,
            drop_last: false,
            eval_batch: 500,
            lr: 1e-2,
            lr_decay: 0.8,
            lr_decay_every: 10,
            eps: 1e-3,
            grad_clip: Some(10.0),
            optimizer: OptimizerKind::Sgd,
            merged: true,
            bp_activations: BpActivations::Negative,
            r_max: 15,
            b_zo: 1,
            b_bp: Schedule::new(vec![(0, 5), (20, 4), (50, 3)]).unwrap(),
            p_zero: Schedule::new(vec![(0, 0.33), (20, 0.5), (50, 0.9)]).unwrap(),
            sign_mode: SignMode::Integer,
            base_checkpoint: None,
            rotate_angle: 45.0,
            rotate_n: 1024,
            data_dir: PathBuf::from("data/mnist"),
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| CliError::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_with<T>(key: &str, value: &str, f: impl FnOnce(&str) -> std::result::Result<T, String>) -> Result<T> {
    f(value).map_err(|e| CliError::Config(format!("{key}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Config(format!("{key}: expected true or false, got `{value}`"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "precision" => {
                self.precision = match value {
                    "fp32" => Precision::Fp32,
                    "int8" => Precision::Int8,
                    _ => return Err(CliError::Config(format!("precision: expected fp32 or int8, got `{value}`"))),
                }
            }
            "model" => {
                self.model = match value {
                    "lenet5" => ModelSpec::Lenet5,
                    path => ModelSpec::ShapeFile(PathBuf::from(path)),
                }
            }
            "partition" | "mode" => self.partition = parse_with(key, value, str::parse)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch" => self.batch = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "train_limit" => self.train_limit = parse(key, value)?,
            "test_limit" => self.test_limit = parse(key, value)?,
            "drop_last" => self.drop_last = parse_bool(key, value)?,
            "eval_batch" => self.eval_batch = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "lr_decay" => self.lr_decay = parse(key, value)?,
            "lr_decay_every" => self.lr_decay_every = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "grad_clip" => {
                self.grad_clip = match value {
                    "none" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "optimizer" => {
                self.optimizer = match value {
                    "sgd" => OptimizerKind::Sgd,
                    "adam" => OptimizerKind::Adam,
                    _ => return Err(CliError::Config(format!("optimizer: expected sgd or adam, got `{value}`"))),
                }
            }
            "merged" => self.merged = parse_bool(key, value)?,
            "bp_activations" => {
                self.bp_activations = match value {
                    "negative" => BpActivations::Negative,
                    "positive" => BpActivations::Positive,
                    "unperturbed" => BpActivations::Unperturbed,
                    _ => {
                        return Err(CliError::Config(format!(
                            "bp_activations: expected negative, positive or unperturbed, got `{value}`"
                        )))
                    }
                }
            }
            "r_max" => self.r_max = parse(key, value)?,
            "b_zo" => self.b_zo = parse(key, value)?,
            "b_bp" => self.b_bp = parse_with(key, value, str::parse)?,
            "p_zero" => self.p_zero = parse_with(key, value, str::parse)?,
            "sign_mode" => {
                self.sign_mode = match value {
                    "integer" => SignMode::Integer,
                    "float_reference" => SignMode::FloatReference,
                    _ => {
                        return Err(CliError::Config(format!(
                            "sign_mode: expected integer or float_reference, got `{value}`"
                        )))
                    }
                }
            }
            "base_checkpoint" => {
                self.base_checkpoint = if value.is_empty() { None } else { Some(PathBuf::from(value)) }
            }
            "rotate_angle" => self.rotate_angle = parse(key, value)?,
            "rotate_n" => self.rotate_n = parse(key, value)?,
            "data_dir" => self.data_dir = PathBuf::from(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got `{pair}`")))?;
        self.set(k, v)
    }

    /// Applies every non-comment line of a config file. Relative paths in the
    /// file stay relative to the working directory.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.set_pair(line).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("line {}: {msg}", n + 1)),
                e => e,
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Checks ranges; every problem is reported with its field name.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.batch == 0 {
            problems.push("batch: must be at least 1".to_string());
        }
        if self.eval_batch == 0 {
            problems.push("eval_batch: must be at least 1".to_string());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            problems.push(format!("lr: {} must be positive", self.lr));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            problems.push(format!("lr_decay: {} must lie in (0, 1]", self.lr_decay));
        }
        if self.lr_decay_every == 0 {
            problems.push("lr_decay_every: must be at least 1".to_string());
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            problems.push(format!("eps: {} must be positive", self.eps));
        }
        if matches!(self.grad_clip, Some(c) if !(c > 0.0)) {
            problems.push("grad_clip: must be positive or `none`".to_string());
        }
        if !(1..=127).contains(&self.r_max) {
            problems.push(format!("r_max: {} is outside 1..=127", self.r_max));
        }
        if !(1..=7).contains(&self.b_zo) {
            problems.push(format!("b_zo: {} is outside 1..=7", self.b_zo));
        }
        if self.b_bp.values().any(|b| !(1..=7).contains(&b)) {
            problems.push(format!("b_bp: {} has a value outside 1..=7", self.b_bp));
        }
        if self.p_zero.values().any(|p| !(0.0..1.0).contains(&p)) {
            problems.push(format!("p_zero: {} has a value outside [0, 1)", self.p_zero));
        }
        if self.precision == Precision::Int8 && self.optimizer == OptimizerKind::Adam {
            problems.push("optimizer: adam is only available for fp32".to_string());
        }
        if self.rotate_n == 0 {
            problems.push("rotate_n: must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems.join("; ")))
        }
    }

    /// Learning rate during 0-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f32 {
        self.lr * self.lr_decay.powi((epoch / self.lr_decay_every) as i32)
    }
}
