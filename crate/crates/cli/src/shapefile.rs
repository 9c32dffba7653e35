//! Text description of a layer stack, one layer per line:
//!
//! ```text
//! input 1 28 28
//! conv <in_ch> <out_ch> <kernel> <pad>
//! relu
//! maxpool <k>
//! flatten
//! linear <inputs> <outputs>
//! ```
//!
//! `#` starts a comment.

use std::path::Path;

use elasticzo_core::layers::infer_shapes;
use elasticzo_core::LayerKind;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelShape {
    pub input: Vec<usize>,
    pub layers: Vec<LayerKind>,
}

fn numbers(path: &Path, line: usize, args: &[&str], want: usize) -> Result<Vec<usize>> {
    if args.len() != want {
        return Err(CliError::format(path, format!("line {line}: expected {want} numbers, got {}", args.len())));
    }
    args.iter()
        .map(|a| a.parse().map_err(|_| CliError::format(path, format!("line {line}: `{a}` is not a number"))))
        .collect()
}

pub fn parse_shape(path: &Path, text: &str) -> Result<ModelShape> {
    let mut input = None;
    let mut layers = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut words = line.split_whitespace();
        let Some(head) = words.next() else { continue };
        let args: Vec<&str> = words.collect();
        match head {
            "input" => {
                if args.is_empty() {
                    return Err(CliError::format(path, format!("line {n}: input needs dimensions")));
                }
                input = Some(numbers(path, n, &args, args.len())?);
            }
            "conv" => {
                let v = numbers(path, n, &args, 4)?;
                layers.push(LayerKind::Conv2d { in_ch: v[0], out_ch: v[1], kernel: v[2], pad: v[3] });
            }
            "linear" => {
                let v = numbers(path, n, &args, 2)?;
                layers.push(LayerKind::linear(v[0], v[1]));
            }
            "relu" => layers.push(LayerKind::Relu),
            "maxpool" => layers.push(LayerKind::MaxPool2d { k: numbers(path, n, &args, 1)?[0] }),
            "flatten" => layers.push(LayerKind::Flatten),
            other => return Err(CliError::format(path, format!("line {n}: unknown layer `{other}`"))),
        }
    }
    let input = input.ok_or_else(|| CliError::format(path, "missing `input` line"))?;
    infer_shapes(&input, &layers)?;
    Ok(ModelShape { input, layers })
}

pub fn load_shape(path: &Path) -> Result<ModelShape> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_shape(path, &text)
}

pub fn render_shape(shape: &ModelShape) -> String {
    let dims: Vec<String> = shape.input.iter().map(usize::to_string).collect();
    let mut out = format!("input {}\n", dims.join(" "));
    for layer in &shape.layers {
        let line = match *layer {
            LayerKind::Conv2d { in_ch, out_ch, kernel, pad } => format!("conv {in_ch} {out_ch} {kernel} {pad}"),
            LayerKind::Linear { inputs, outputs } => format!("linear {inputs} {outputs}"),
            LayerKind::Relu => "relu".into(),
            LayerKind::MaxPool2d { k } => format!("maxpool {k}"),
            LayerKind::Flatten => "flatten".into(),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}
