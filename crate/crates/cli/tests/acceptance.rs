//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 1-4, 7 and 9 are self-contained. 8 and 11 train on MNIST when it
//! is available (`ELASTICZO_MNIST_DIR`, default `/root/data/mnist`) and on a
//! synthetic set otherwise. The desk-scale training criteria 5, 6 and 10 take
//! tens of minutes and run only with `ELASTICZO_ACCEPTANCE_FULL=1`; with that
//! variable set, criterion 11 compares two complete desk-scale runs.

mod common;
#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;

use elasticzo::commands::{finetune_on, load_data, train_on, TrainReport};
use elasticzo::config::{PartitionSpec, RunConfig};
use elasticzo::model::Model;
use elasticzo_core::data::Dataset;
use elasticzo_core::fpnet::{bp_step, BpOptimizer, Network};
use elasticzo_core::memmodel::{mem_fp32, mem_int8, Mode, OptimizerKind, ShapeSpec};
use elasticzo_core::qnet::QuantNetwork;
use elasticzo_core::signtest::{run_sign_test, SignTestConfig};
use elasticzo_core::zo::{perturb_parameters, train_step, zo_gradient, ZoConfig};
use elasticzo_core::zo_int8::{max_zo_weight, perturb_parameters_int8, SignMode};
use elasticzo_core::{lenet5, LayerKind, SeededGenerator, Tensor, ZeroProb, MNIST_INPUT};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

enum Status {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn run(f: impl FnOnce() -> Outcome) -> Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) if o.pass => Status::Pass(o.detail),
        Ok(o) => Status::Fail(o.detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Status::Fail(format!("panicked: {msg}"))
        }
    }
}

fn full_mode() -> bool {
    std::env::var("ELASTICZO_ACCEPTANCE_FULL").is_ok_and(|v| v != "0" && !v.is_empty())
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn scratch() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| tempfile::tempdir().unwrap()).path()
}

// ---------------------------------------------------------------- criterion 1

const H: f64 = 1e-6;

/// Returns `(compared, worst relative error)` over sampled coordinates.
fn gradcheck(net: &Network, input: &Tensor, labels: &[usize], per_layer: usize, seed: u32) -> (usize, f64) {
    let cache = net.forward_cached(input, 0).unwrap();
    let grads = net.backward_partial(&cache, labels).unwrap();
    let base = oracle::params_of(net);
    let dims = net.input_shape().to_vec();
    let mut gen = SeededGenerator::new(seed);
    let (mut compared, mut worst) = (0, 0.0f64);
    for l in 0..net.depth() {
        let Some(g) = grads.get(l) else { continue };
        let analytic: Vec<f32> = g.iter().copied().collect();
        let n_w = g.weight.len();
        let picks: Vec<usize> = if analytic.len() <= per_layer {
            (0..analytic.len()).collect()
        } else {
            (0..per_layer).map(|_| gen.next_below(analytic.len() as u64) as usize).collect()
        };
        for i in picks {
            let eval = |delta: f64| {
                let mut p = base.clone();
                let (w, b) = p[l].as_mut().unwrap();
                if i < n_w {
                    w[i] += delta;
                } else {
                    b[i - n_w] += delta;
                }
                oracle::loss(net.layers(), &p, &dims, input.data(), labels)
            };
            let fd = (eval(H) - eval(-H)) / (2.0 * H);
            let a = analytic[i] as f64;
            if a.abs() > 1e-4 {
                worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()));
                compared += 1;
            }
        }
    }
    (compared, worst)
}

fn random_input(gen: &mut SeededGenerator, batch: usize, dims: &[usize]) -> (Tensor, Vec<usize>) {
    let n = batch * dims.iter().product::<usize>();
    let mut shape = vec![batch];
    shape.extend_from_slice(dims);
    let x = Tensor::new(shape, (0..n).map(|_| gen.next_uniform_f32(0.0, 1.0)).collect()).unwrap();
    (x, (0..batch).map(|_| gen.next_below(3) as usize).collect())
}

fn criterion_1() -> Outcome {
    let mut gen = SeededGenerator::new(101);
    let (mut compared, mut worst, mut instances) = (0, 0.0f64, 0);
    for _ in 0..20 {
        let (inputs, hidden) = (1 + gen.next_below(11) as usize, 1 + gen.next_below(9) as usize);
        let layers = vec![LayerKind::linear(inputs, hidden), LayerKind::Relu, LayerKind::linear(hidden, 3)];
        let net = Network::init_uniform(&[inputs], layers, &mut gen).unwrap();
        let batch = 1 + gen.next_below(4) as usize;
        let (x, y) = random_input(&mut gen, batch, &[inputs]);
        let (c, w) = gradcheck(&net, &x, &y, 200, gen.next_u32());
        compared += c;
        worst = worst.max(w);
        instances += 1;
    }
    for _ in 0..20 {
        let in_ch = 1 + gen.next_below(2) as usize;
        let out_ch = 1 + gen.next_below(3) as usize;
        let kernel = [1, 3][gen.next_below(2) as usize];
        let pad = (kernel - 1) / 2;
        let layers = vec![
            LayerKind::Conv2d { in_ch, out_ch, kernel, pad },
            LayerKind::Relu,
            LayerKind::MaxPool2d { k: 2 },
            LayerKind::Flatten,
            LayerKind::linear(out_ch * 9, 3),
        ];
        let net = Network::init_uniform(&[in_ch, 6, 6], layers, &mut gen).unwrap();
        let batch = 1 + gen.next_below(2) as usize;
        let (x, y) = random_input(&mut gen, batch, &[in_ch, 6, 6]);
        let (c, w) = gradcheck(&net, &x, &y, 200, gen.next_u32());
        compared += c;
        worst = worst.max(w);
        instances += 1;
    }
    let net = Network::init_uniform(&MNIST_INPUT, lenet5(), &mut gen).unwrap();
    let (x, _) = random_input(&mut gen, 2, &MNIST_INPUT);
    let y = vec![4, 7];
    let (lenet_compared, w) = gradcheck(&net, &x, &y, 40, 7);
    worst = worst.max(w);
    Outcome::check(
        worst < 1e-3 && lenet_compared >= 80,
        format!(
            "{instances} random stacks + LeNet-5, {} coordinates, worst rel err {worst:.2e} (< 1e-3)",
            compared + lenet_compared
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

fn criterion_2() -> Outcome {
    const DIM: usize = 50;
    let mut gen = SeededGenerator::new(2024);
    let diag: Vec<f64> = (0..DIM).map(|_| gen.next_uniform_f32(0.5, 2.0) as f64).collect();
    let center: Vec<f64> = (0..DIM).map(|_| gen.next_uniform_f32(-1.0, 1.0) as f64).collect();
    let loss = |t: &[f32]| -> f64 {
        t.iter().zip(&diag).zip(&center).map(|((&t, a), c)| 0.5 * a * (t as f64 - c).powi(2)).sum()
    };
    let theta: Vec<f32> = (0..DIM).map(|_| gen.next_uniform_f32(-1.0, 1.0)).collect();
    let truth: Vec<f64> = theta.iter().zip(&diag).zip(&center).map(|((&t, a), c)| a * (t as f64 - c)).collect();
    let (eps, draws) = (1e-3f32, 10_000);
    let mut mean = vec![0.0f64; DIM];
    for _ in 0..draws {
        let z = SeededGenerator::new(gen.next_u32()).gaussian_vector(DIM);
        let plus: Vec<f32> = theta.iter().zip(&z).map(|(t, z)| t + eps * z).collect();
        let minus: Vec<f32> = theta.iter().zip(&z).map(|(t, z)| t - eps * z).collect();
        let g = zo_gradient(loss(&plus), loss(&minus), eps, None).unwrap();
        for (m, zi) in mean.iter_mut().zip(&z) {
            *m += g * *zi as f64 / draws as f64;
        }
    }
    let dot: f64 = mean.iter().zip(&truth).map(|(a, b)| a * b).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cos = dot / (norm(&mean) * norm(&truth));
    Outcome::check(cos > 0.9, format!("cosine {cos:.4} over {draws} draws (> 0.9)"))
}

// ---------------------------------------------------------------- criterion 3

fn criterion_3() -> Outcome {
    let mut gen = SeededGenerator::new(3);
    let net = Network::init_uniform(&MNIST_INPUT, lenet5(), &mut gen).unwrap();
    let eps = 1e-3f32;
    let mut fp_worst = 0.0f64;
    for seed in [0u32, 1, 99, u32::MAX] {
        let mut p = net.clone();
        perturb_parameters(&mut p, 12, seed, 1.0, eps);
        perturb_parameters(&mut p, 12, seed, -2.0, eps);
        perturb_parameters(&mut p, 12, seed, 1.0, eps);
        for l in 0..net.depth() {
            let (Some(a), Some(b)) = (net.params(l), p.params(l)) else { continue };
            for (x, y) in a.iter().zip(b.iter()) {
                // Parameters near zero are compared against the perturbation scale.
                let rel = ((x - y).abs() / x.abs().max(6.0 * eps)) as f64;
                fp_worst = fp_worst.max(rel);
            }
        }
    }

    let q = QuantNetwork::init_uniform(&MNIST_INPUT, lenet5(), &mut SeededGenerator::new(2)).unwrap();
    let r_max = 15u8;
    let headroom = max_zo_weight(&q, 12) <= 127 - 3 * r_max as u64;
    let p = ZeroProb::from_ratio(1, 3).unwrap();
    let mut cycled = q.clone();
    for k in [1, -2, 1] {
        perturb_parameters_int8(&mut cycled, 12, 77, k, r_max, p).unwrap();
    }
    let int8_exact = cycled == q;

    // A weight at the clamp bound with a perturbation of +5: 127 -> 127 -> 117 -> 122.
    let seed = (0..10_000u32)
        .find(|&s| {
            let mut z = 0;
            SeededGenerator::new(s).sparse_int8_for_each(1, 5, ZeroProb::NEVER, |_, v| z = v).unwrap();
            z == 5
        })
        .unwrap();
    let mut sat = QuantNetwork::zeros(&[1], vec![LayerKind::linear(1, 1)]).unwrap();
    sat.weights_mut(0).unwrap().data_mut()[0] = 127;
    for k in [1, -2, 1] {
        perturb_parameters_int8(&mut sat, 1, seed, k, 5, ZeroProb::NEVER).unwrap();
    }
    let saturated = sat.weights(0).unwrap().data()[0];
    Outcome::check(
        fp_worst < 1e-5 && headroom && int8_exact && saturated != 127,
        format!(
            "fp32 worst rel {fp_worst:.1e} (< 1e-5); int8 unsaturated exact: {int8_exact}; saturated 127 -> {saturated}"
        ),
    )
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Outcome {
    let mut gen = SeededGenerator::new(5);
    let net = Network::init_uniform(&MNIST_INPUT, lenet5(), &mut gen).unwrap();
    let x = Tensor::new(vec![8, 1, 28, 28], (0..8 * 784).map(|_| gen.next_uniform_f32(0.0, 1.0)).collect()).unwrap();
    let labels: Vec<usize> = (0..8).map(|_| gen.next_below(10) as usize).collect();
    let mut hybrid = net.clone();
    let cfg = ZoConfig::new(0);
    train_step(&mut hybrid, &x, &labels, &cfg, 99, &mut BpOptimizer::Sgd).unwrap();
    let mut plain = net.clone();
    bp_step(&mut plain, &x, &labels, &mut BpOptimizer::Sgd, cfg.lr).unwrap();
    let bitwise = hybrid == plain;

    let spec = ShapeSpec::from_layers(&MNIST_INPUT, &lenet5(), true).unwrap();
    let mut mem_equal = true;
    for b in [1, 32, 256] {
        for opt in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            mem_equal &= mem_fp32(&spec, b, Mode::Elastic(0), opt).unwrap().total
                == mem_fp32(&spec, b, Mode::FullBp, opt).unwrap().total;
            mem_equal &= mem_fp32(&spec, b, Mode::Elastic(12), opt).unwrap().total
                == mem_fp32(&spec, b, Mode::FullZo, opt).unwrap().total;
        }
        mem_equal &= mem_int8(&spec, b, Mode::Elastic(0)).unwrap().total == mem_int8(&spec, b, Mode::FullBp).unwrap().total;
        mem_equal &= mem_int8(&spec, b, Mode::Elastic(12)).unwrap().total == mem_int8(&spec, b, Mode::FullZo).unwrap().total;
    }
    Outcome::check(bitwise && mem_equal, format!("C=0 step equals BP+SGD bitwise: {bitwise}; memory boundaries equal: {mem_equal}"))
}

// ---------------------------------------------------------------- criterion 7

fn criterion_7() -> Outcome {
    let at = |batch| run_sign_test(&SignTestConfig::new(10_000, batch, 10, 7)).unwrap().rate();
    let (b256, b1) = (at(256), at(1));
    Outcome::check(b256 >= 0.90 && b1 >= 0.97, format!("agreement B=256 {b256:.4} (>= 0.90), B=1 {b1:.4} (>= 0.97)"))
}

// ---------------------------------------------------------------- criterion 9

fn criterion_9() -> Outcome {
    const MIB: f64 = 1024.0 * 1024.0;
    let spec = ShapeSpec::from_layers(&MNIST_INPUT, &lenet5(), true).unwrap();
    let fp = |b, m| mem_fp32(&spec, b, m, OptimizerKind::Sgd).unwrap().total;
    let q = |b, m| mem_int8(&spec, b, m).unwrap().total;
    let (zo, bp) = (fp(32, Mode::FullZo), fp(32, Mode::FullBp));
    let ratio_exact = 2 * zo == bp;
    let (zo_mib, bp_mib) = (zo as f64 / MIB, bp as f64 / MIB);
    let abs_ok = (zo_mib / 2.6 - 1.0).abs() <= 0.15 && (bp_mib / 5.2 - 1.0).abs() <= 0.15;

    let within_2x = |ours: f64, reference: f64| ours >= reference / 2.0 && ours <= reference * 2.0;
    let mut overhead_ok = true;
    let mut overheads = Vec::new();
    for (b, cls2_ref, cls1_ref) in [(32u64, 0.17, 2.4), (256, 0.072, 1.2)] {
        let base = fp(b, Mode::FullZo) as f64;
        let cls2 = 100.0 * (fp(b, Mode::Elastic(11)) as f64 / base - 1.0);
        let cls1 = 100.0 * (fp(b, Mode::Elastic(9)) as f64 / base - 1.0);
        overhead_ok &= within_2x(cls2, cls2_ref) && within_2x(cls1, cls1_ref);
        overheads.push(format!("B={b} +{cls2:.3}%/+{cls1:.2}%"));
    }

    let mut savings = Vec::new();
    for b in [32u64, 256] {
        for m in [Mode::FullZo, Mode::Elastic(11), Mode::Elastic(9)] {
            savings.push(fp(b, m) as f64 / q(b, m) as f64);
        }
    }
    let (lo, hi) = savings.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    let savings_ok = lo >= 1.4 && hi <= 1.7;
    Outcome::check(
        ratio_exact && abs_ok && overhead_ok && savings_ok,
        format!(
            "full_zo {zo_mib:.3} MiB / full_bp {bp_mib:.3} MiB (ratio 0.5 exact: {ratio_exact}); overheads {}; int8 savings {lo:.3}-{hi:.3}",
            overheads.join(", ")
        ),
    )
}

// ------------------------------------------------------------- MNIST helpers

struct Mnist {
    dir: PathBuf,
    train: Dataset,
    test: Dataset,
    real: bool,
}

/// Real MNIST if present, else a synthetic stand-in written to scratch space.
fn mnist() -> &'static Mnist {
    static DATA: OnceLock<Mnist> = OnceLock::new();
    DATA.get_or_init(|| {
        let (dir, real) = match common::mnist_dir() {
            Some(d) => (d, true),
            None => {
                let d = scratch().join("synthetic");
                common::write_synthetic(&d, 4000, 1000);
                (d, false)
            }
        };
        let cfg = RunConfig { data_dir: dir.clone(), ..RunConfig::default() };
        let (train, test) = load_data(&cfg).unwrap();
        Mnist { dir, train, test, real }
    })
}

fn desk_config(file: &str, partition: PartitionSpec, out: &str) -> RunConfig {
    let mut cfg = RunConfig::from_file(&repo_file(file)).unwrap();
    cfg.partition = partition;
    cfg.data_dir = mnist().dir.clone();
    cfg.out_dir = scratch().join(out);
    cfg
}

fn desk_run(cfg: &RunConfig) -> TrainReport {
    let data = mnist();
    let train = data.train.head(cfg.train_limit.min(data.train.len())).unwrap();
    let test = if cfg.test_limit == 0 { data.test.clone() } else { data.test.head(cfg.test_limit).unwrap() };
    let t = std::time::Instant::now();
    let report = train_on(cfg, &train, &test).unwrap();
    eprintln!(
        "  [{:?} {} c={}] final acc {:.4} in {:.0?}",
        cfg.precision,
        cfg.partition,
        report.partition,
        report.final_accuracy(),
        t.elapsed()
    );
    report
}

// ---------------------------------------------------------------- criterion 5

struct Fp32Runs {
    full_zo: f64,
    cls2: f64,
    cls1: f64,
    full_bp: f64,
}

fn fp32_runs() -> &'static Fp32Runs {
    static RUNS: OnceLock<Fp32Runs> = OnceLock::new();
    RUNS.get_or_init(|| {
        let acc = |p, out| desk_run(&desk_config("configs/desk_fp32.conf", p, out)).final_accuracy();
        Fp32Runs {
            full_bp: acc(PartitionSpec::FullBp, "c5_full_bp"),
            cls1: acc(PartitionSpec::Cls1, "c5_cls1"),
            cls2: acc(PartitionSpec::Cls2, "c5_cls2"),
            full_zo: acc(PartitionSpec::FullZo, "c5_full_zo"),
        }
    })
}

fn criterion_5() -> Outcome {
    let r = fp32_runs();
    let thresholds = r.full_bp >= 0.97 && r.cls1 >= 0.90 && r.cls2 >= 0.85 && r.full_zo >= 0.75;
    let ordered = r.full_zo < r.cls2 && r.cls2 < r.cls1 && r.cls1 < r.full_bp;
    Outcome::check(
        mnist().real && thresholds && ordered,
        format!(
            "full_bp {:.4} (>= 0.97), cls1 {:.4} (>= 0.90), cls2 {:.4} (>= 0.85), full_zo {:.4} (>= 0.75); ordered: {ordered}",
            r.full_bp, r.cls1, r.cls2, r.full_zo
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

fn criterion_6() -> Outcome {
    let fp = fp32_runs();
    let int8 = |p, mode, out| {
        let mut cfg = desk_config("configs/desk_int8.conf", p, out);
        cfg.sign_mode = mode;
        desk_run(&cfg).final_accuracy()
    };
    let bp = int8(PartitionSpec::FullBp, SignMode::Integer, "c6_full_bp");
    let cls1 = int8(PartitionSpec::Cls1, SignMode::Integer, "c6_cls1");
    let cls1_ref = int8(PartitionSpec::Cls1, SignMode::FloatReference, "c6_cls1_float");
    let (d_bp, d_cls1, d_sign) = (fp.full_bp - bp, fp.cls1 - cls1, (cls1 - cls1_ref).abs());
    Outcome::check(
        mnist().real && d_bp <= 0.03 && d_cls1 <= 0.05 && d_sign <= 0.02,
        format!(
            "int8 full_bp {bp:.4} (fp32 - int8 = {d_bp:+.4}, <= 0.03), int8 cls1 {cls1:.4} ({d_cls1:+.4}, <= 0.05), float-reference sign cls1 {cls1_ref:.4} (gap {d_sign:.4}, <= 0.02)"
        ),
    )
}

// ---------------------------------------------------------------- criterion 8

fn criterion_8() -> Outcome {
    let mut cfg = desk_config("configs/desk_int8.conf", PartitionSpec::Cls1, "c8");
    cfg.epochs = 1;
    let report = desk_run(&cfg);
    let integer_ops = report.counters.step_float_ops;
    cfg.sign_mode = SignMode::FloatReference;
    cfg.out_dir = scratch().join("c8_float");
    let reference_ops = desk_run(&cfg).counters.step_float_ops;
    Outcome::check(
        integer_ops == 0 && reference_ops > 0 && report.counters.steps > 0,
        format!(
            "{} integer steps: {integer_ops} float ops (== 0); float-reference control counted {reference_ops}",
            report.counters.steps
        ),
    )
}

// --------------------------------------------------------------- criterion 10

/// Full BP with Adam for one epoch on the 10k subset: the model fine-tuning
/// starts from.
fn pretrained_base() -> &'static Model {
    static BASE: OnceLock<Model> = OnceLock::new();
    BASE.get_or_init(|| {
        let mut cfg = RunConfig::from_file(&repo_file("configs/pretrain.conf")).unwrap();
        cfg.data_dir = mnist().dir.clone();
        cfg.out_dir = scratch().join("c10_base");
        desk_run(&cfg).model
    })
}

fn criterion_10() -> Outcome {
    let data = mnist();
    let tune = |p, out| {
        let mut cfg = RunConfig::from_file(&repo_file("configs/finetune.conf")).unwrap();
        cfg.partition = p;
        cfg.out_dir = scratch().join(out);
        let report = finetune_on(&cfg, pretrained_base().clone(), &data.train, &data.test).unwrap();
        (report.rows[0].test_acc, report.final_accuracy())
    };
    let (base_cls1, cls1) = tune(PartitionSpec::Cls1, "c10_cls1");
    let (base_zo, zo) = tune(PartitionSpec::FullZo, "c10_full_zo");
    let (g_cls1, g_zo) = (cls1 - base_cls1, zo - base_zo);
    Outcome::check(
        data.real && g_cls1 >= 0.20 && g_zo >= 0.10,
        format!(
            "baseline {base_cls1:.4}; cls1 -> {cls1:.4} ({g_cls1:+.4}, >= +0.20); full_zo -> {zo:.4} ({g_zo:+.4}, >= +0.10)"
        ),
    )
}

// --------------------------------------------------------------- criterion 11

fn criterion_11() -> Outcome {
    let binary = env!("CARGO_BIN_EXE_elasticzo");
    let data = mnist().dir.to_str().unwrap().to_string();
    let runs: Vec<(String, Vec<String>)> = if full_mode() {
        vec![("fp32 cls1 desk".into(), vec!["--config".into(), repo_file("configs/desk_fp32.conf").display().to_string(), "--set".into(), "partition=cls1".into()])]
    } else {
        let small = |p: &str| vec!["--set".into(), format!("precision={p}"), "--set".into(), "partition=cls1".into(), "--set".into(), "train_limit=2000".into(), "--set".into(), "test_limit=1000".into(), "--set".into(), "epochs=2".into()];
        vec![("fp32 cls1 2k".into(), small("fp32")), ("int8 cls1 2k".into(), [small("int8"), vec!["--set".into(), "batch=256".into()]].concat())]
    };
    let mut identical = true;
    let mut names = Vec::new();
    for (i, (name, args)) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = scratch().join(format!("c11_{i}_{rep}"));
            let status = std::process::Command::new(binary)
                .args(["train", "--data-dir", &data, "--out-dir", out.to_str().unwrap()])
                .args(args)
                .output()
                .unwrap();
            assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
            outputs.push(std::fs::read(out.join("metrics.csv")).unwrap());
        }
        identical &= outputs[0] == outputs[1];
        names.push(name.clone());
    }
    Outcome::check(identical, format!("byte-identical metrics.csv for {}: {identical}", names.join(", ")))
}

// ------------------------------------------------------------------------ main

fn main() -> ExitCode {
    let full = full_mode();
    let light: [(u32, fn() -> Outcome); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (11, criterion_11),
    ];
    let heavy: [(u32, fn() -> Outcome); 3] = [(5, criterion_5), (6, criterion_6), (10, criterion_10)];
    let mut results: Vec<(u32, Status)> = light.iter().map(|&(n, f)| (n, run(f))).collect();
    for (n, f) in heavy {
        let status = if full {
            run(f)
        } else {
            Status::Skip("desk-scale training; set ELASTICZO_ACCEPTANCE_FULL=1".into())
        };
        results.push((n, status));
    }
    results.sort_by_key(|r| r.0);
    if !mnist().real {
        println!("note: MNIST not found; criteria 8 and 11 used synthetic data");
    }
    let mut failed = 0;
    for (n, status) in &results {
        let (tag, detail) = match status {
            Status::Pass(d) => ("PASS", d),
            Status::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Status::Skip(d) => ("SKIP", d),
        };
        println!("criterion {n:>2}: {tag}  {detail}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
