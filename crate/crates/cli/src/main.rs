use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use elasticzo::commands::{cmd_eval, cmd_finetune, cmd_memreport, cmd_signtest, cmd_train, TrainReport};
use elasticzo::config::ModelSpec;
use elasticzo::{Result, RunConfig};
use elasticzo_core::signtest::SignTestConfig;

#[derive(Parser)]
#[command(name = "elasticzo", version, about = "Hybrid zeroth-order / backprop training on MNIST-style data")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Directory holding the IDX files.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Directory for metrics, checkpoints and reports.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Train from scratch; writes metrics.csv, timings.csv and final.ckpt.
    Train,
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Fine-tune a checkpoint on rotated train/test subsets.
    Finetune {
        /// Base checkpoint (overrides `base_checkpoint`).
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Agreement of the integer loss-difference sign with float cross-entropy.
    Signtest {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        /// Largest exponent offset between the two logit tensors.
        #[arg(long, default_value_t = 4)]
        max_gap: i32,
    },
    /// Closed-form training memory for every partition point.
    Memreport {
        /// `lenet5` or a shape file.
        #[arg(long, default_value = "lenet5")]
        model: String,
        /// Batch sizes (repeatable).
        #[arg(long = "batch", default_values_t = [32u64, 256])]
        batches: Vec<u64>,
    },
}

fn config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for pair in &common.overrides {
        cfg.set_pair(pair)?;
    }
    if let Some(d) = &common.data_dir {
        cfg.data_dir = d.clone();
    }
    if let Some(d) = &common.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summarize(report: &TrainReport) {
    for row in &report.rows {
        println!("{}", row.csv_row());
    }
    println!(
        "partition {}: {} steps, {} skipped, final test accuracy {:.4}",
        report.partition,
        report.counters.steps,
        report.counters.skipped,
        report.final_accuracy()
    );
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = config(&cli.common)?;
    match cli.command {
        Command::Train => summarize(&cmd_train(&cfg)?),
        Command::Eval { checkpoint } => {
            let e = cmd_eval(&cfg, &checkpoint)?;
            println!("test_loss {:.6} test_acc {:.6}", e.loss, e.accuracy);
        }
        Command::Finetune { base } => {
            if base.is_some() {
                cfg.base_checkpoint = base;
            }
            summarize(&cmd_finetune(&cfg)?);
        }
        Command::Signtest { trials, batch, classes, max_gap } => {
            let mut st = SignTestConfig::new(trials, batch, classes, cfg.seed);
            st.max_gap = max_gap;
            let r = cmd_signtest(&st, &cfg.out_dir)?;
            println!(
                "trials {} excluded {} agreements {} rate {:.4}",
                r.trials,
                r.excluded,
                r.agreements,
                r.rate()
            );
        }
        Command::Memreport { model, batches } => {
            let spec = if model == "lenet5" { ModelSpec::Lenet5 } else { ModelSpec::ShapeFile(model.into()) };
            let (path, rows) = cmd_memreport(&spec, &batches, &cfg.out_dir)?;
            for (b, r) in rows.iter().filter(|(_, r)| r.optimizer == elasticzo_core::memmodel::OptimizerKind::Sgd) {
                println!(
                    "B={b:<4} {:?} C={:<3} {:>12} bytes {:>9.3} MiB",
                    r.precision,
                    r.partition,
                    r.total,
                    r.total as f64 / 1048576.0
                );
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
