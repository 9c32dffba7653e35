use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::layers::{lenet5, MNIST_INPUT};

fn random_input(gen: &mut SeededGenerator, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| gen.next_uniform_f32(0.0, 1.0)).collect();
    Tensor::new(shape, data).unwrap()
}

#[test]
fn zero_network_gives_zero_logits() {
    let net = Network::zeros(&MNIST_INPUT, lenet5()).unwrap();
    let mut gen = SeededGenerator::new(3);
    let x = random_input(&mut gen, vec![2, 1, 28, 28]);
    let logits = net.forward(&x).unwrap();
    assert_eq!(logits.shape(), &[2, 10]);
    assert!(logits.data().iter().all(|&v| v == 0.0));
}

#[test]
fn identity_linear_layer_passes_input_through() {
    let mut net = Network::zeros(&[4], vec![LayerKind::linear(4, 4)]).unwrap();
    let p = net.params_mut(0).unwrap();
    for i in 0..4 {
        p.weight.data_mut()[i * 4 + i] = 1.0;
    }
    let x = Tensor::new(vec![2, 4], vec![0.5, -1.0, 2.0, 3.25, 7.0, 0.0, -0.125, 1.0]).unwrap();
    assert_eq!(net.forward(&x).unwrap(), x);
}

#[test]
fn lenet_cache_shapes() {
    let mut gen = SeededGenerator::new(11);
    let net = Network::init_uniform(&MNIST_INPUT, lenet5(), &mut gen).unwrap();
    let x = random_input(&mut gen, vec![32, 1, 28, 28]);
    let cache = net.forward_cached(&x, 0).unwrap();
    let expected: [&[usize]; 9] = [
        &[32, 6, 28, 28],
        &[32, 6, 14, 14],
        &[32, 16, 14, 14],
        &[32, 16, 7, 7],
        &[32, 784],
        &[32, 120],
        &[32, 84],
        &[32, 10],
        &[32, 1, 28, 28],
    ];
    for l in [1usize, 3, 4, 6, 7, 8, 10, 12, 0] {
        let shape = cache.get(l).unwrap().shape();
        assert!(expected.contains(&shape), "a_{l} has shape {shape:?}");
    }
    assert_eq!(cache.logits().shape(), &[32, 10]);
}

#[test]
fn cache_holds_nothing_below_partition() {
    let mut gen = SeededGenerator::new(5);
    let net = Network::init_uniform(&MNIST_INPUT, lenet5(), &mut gen).unwrap();
    let x = random_input(&mut gen, vec![3, 1, 28, 28]);
    for c in 0..=net.depth() {
        let cache = net.forward_cached(&x, c).unwrap();
        assert_eq!(cache.indices(), c..net.depth() + 1);
        assert!(matches!(cache.get(c.wrapping_sub(1)), Err(Error::StaleCache { .. })));
        assert_eq!(cache.logits(), &net.forward(&x).unwrap());
    }
}

#[test]
fn forward_is_deterministic() {
    let mut gen = SeededGenerator::new(8);
    let net = Network::init_uniform(&MNIST_INPUT, lenet5(), &mut gen).unwrap();
    let x = random_input(&mut gen, vec![4, 1, 28, 28]);
    assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
}

#[test]
fn full_zo_partition_has_no_gradients() {
    let mut gen = SeededGenerator::new(9);
    let net = Network::init_uniform(&MNIST_INPUT, lenet5(), &mut gen).unwrap();
    let x = random_input(&mut gen, vec![2, 1, 28, 28]);
    let cache = net.forward_cached(&x, net.depth()).unwrap();
    assert!(net.backward_partial(&cache, &[1, 2]).unwrap().is_empty());
}

#[test]
fn partial_backward_covers_only_tail_layers() {
    let mut gen = SeededGenerator::new(10);
    let net = Network::init_uniform(&MNIST_INPUT, lenet5(), &mut gen).unwrap();
    let x = random_input(&mut gen, vec![2, 1, 28, 28]);
    let cache = net.forward_cached(&x, 9).unwrap();
    let grads = net.backward_partial(&cache, &[1, 2]).unwrap();
    let layers: Vec<usize> = grads.layers.iter().map(|(l, _)| *l).collect();
    assert_eq!(layers, [9, 11]);
    let full = net.backward_partial(&net.forward_cached(&x, 0).unwrap(), &[1, 2]).unwrap();
    assert_eq!(grads.get(9), full.get(9));
    assert_eq!(grads.get(11), full.get(11));
}

#[test]
fn linear_gradient_matches_analytic_formula() {
    let mut gen = SeededGenerator::new(12);
    let (inputs, outputs, batch) = (5, 3, 4);
    let net = Network::init_uniform(&[inputs], vec![LayerKind::linear(inputs, outputs)], &mut gen)
        .unwrap();
    let x = random_input(&mut gen, vec![batch, inputs]);
    let labels = [0usize, 2, 1, 2];
    let grads = net.backward_partial(&net.forward_cached(&x, 0).unwrap(), &labels).unwrap();
    let g = grads.get(0).unwrap();
    let p = net.params(0).unwrap();
    for o in 0..outputs {
        let mut gb = 0.0f64;
        let mut gw = vec![0.0f64; inputs];
        for b in 0..batch {
            let xb = &x.data()[b * inputs..(b + 1) * inputs];
            let z: Vec<f64> = (0..outputs)
                .map(|k| {
                    p.bias.data()[k] as f64
                        + (0..inputs)
                            .map(|i| p.weight.data()[k * inputs + i] as f64 * xb[i] as f64)
                            .sum::<f64>()
                })
                .collect();
            let denom: f64 = z.iter().map(|&v| libm::exp(v)).sum();
            let d = libm::exp(z[o]) / denom - if labels[b] == o { 1.0 } else { 0.0 };
            gb += d / batch as f64;
            for i in 0..inputs {
                gw[i] += d * xb[i] as f64 / batch as f64;
            }
        }
        assert!((g.bias.data()[o] as f64 - gb).abs() < 1e-6);
        for i in 0..inputs {
            assert!((g.weight.data()[o * inputs + i] as f64 - gw[i]).abs() < 1e-6);
        }
    }
}

#[test]
fn bad_input_shape_rejected() {
    let net = Network::zeros(&MNIST_INPUT, lenet5()).unwrap();
    let x = Tensor::zeros(vec![1, 1, 27, 28]);
    assert!(matches!(net.forward(&x), Err(Error::ShapeMismatch { .. })));
}
