//! Per-epoch metrics and phase timings as CSV.
//!
//! `metrics.csv` holds only deterministic values so that identical runs give
//! identical files; wall-clock times go to `timings.csv`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use elasticzo_core::phases::{Phase, PhaseTimer};

use crate::error::{CliError, Result};

pub const METRICS_VERSION_LINE: &str = "# elasticzo-metrics v1";
pub const METRICS_HEADER: &str = "stage,epoch,lr,train_loss,test_loss,test_acc";

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub stage: String,
    pub epoch: usize,
    pub lr: f64,
    /// Absent for evaluation-only rows.
    pub train_loss: Option<f64>,
    pub test_loss: f64,
    pub test_acc: f64,
}

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        let train = self.train_loss.map(|l| format!("{l:.6}")).unwrap_or_default();
        format!("{},{},{:.8},{},{:.6},{:.6}", self.stage, self.epoch, self.lr, train, self.test_loss, self.test_acc)
    }
}

/// Accumulated wall time per phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseTimes {
    pub totals: [Duration; 5],
    started: [Option<Instant>; 5],
}

fn slot(phase: Phase) -> usize {
    Phase::ALL.iter().position(|&p| p == phase).expect("phase listed in ALL")
}

impl PhaseTimer for PhaseTimes {
    fn begin(&mut self, phase: Phase) {
        self.started[slot(phase)] = Some(Instant::now());
    }

    fn end(&mut self, phase: Phase) {
        let i = slot(phase);
        if let Some(t) = self.started[i].take() {
            self.totals[i] += t.elapsed();
        }
    }
}

impl PhaseTimes {
    pub fn get(&self, phase: Phase) -> Duration {
        self.totals[slot(phase)]
    }
}

pub struct CsvSink {
    metrics: BufWriter<File>,
    timings: BufWriter<File>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(CliError::io(path))?))
}

impl CsvSink {
    pub fn create(out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
        let metrics_path = out_dir.join("metrics.csv");
        let timings_path = out_dir.join("timings.csv");
        let mut metrics = create(&metrics_path)?;
        writeln!(metrics, "{METRICS_VERSION_LINE}\n{METRICS_HEADER}").map_err(CliError::io(&metrics_path))?;
        let mut timings = create(&timings_path)?;
        let names: Vec<&str> = Phase::ALL.iter().map(|p| p.name()).collect();
        writeln!(timings, "stage,epoch,{}", names.join(",")).map_err(CliError::io(&timings_path))?;
        Ok(CsvSink { metrics, timings })
    }

    /// Writes one row to each file and flushes both.
    pub fn record(&mut self, row: &EpochMetrics, times: Option<&PhaseTimes>) -> Result<()> {
        let err = |e| CliError::Io { path: "metrics.csv".into(), source: e };
        writeln!(self.metrics, "{}", row.csv_row()).map_err(err)?;
        self.metrics.flush().map_err(err)?;
        if let Some(t) = times {
            let secs: Vec<String> = t.totals.iter().map(|d| format!("{:.6}", d.as_secs_f64())).collect();
            let err = |e| CliError::Io { path: "timings.csv".into(), source: e };
            writeln!(self.timings, "{},{},{}", row.stage, row.epoch, secs.join(",")).map_err(err)?;
            self.timings.flush().map_err(err)?;
        }
        Ok(())
    }
}

/// Parses the rows of a metrics file written by [`CsvSink`].
pub fn parse_metrics(text: &str) -> std::result::Result<Vec<EpochMetrics>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_VERSION_LINE) || lines.next() != Some(METRICS_HEADER) {
        return Err("missing metrics header".into());
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(format!("bad row `{line}`"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number `{s}`"));
            Ok(EpochMetrics {
                stage: f[0].to_string(),
                epoch: f[1].parse().map_err(|_| format!("bad epoch `{}`", f[1]))?,
                lr: num(f[2])?,
                train_loss: if f[3].is_empty() { None } else { Some(num(f[3])?) },
                test_loss: num(f[4])?,
                test_acc: num(f[5])?,
            })
        })
        .collect()
}
