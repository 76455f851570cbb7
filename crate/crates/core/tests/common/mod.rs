//! Checks shared by the neural tests and the acceptance suite.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sagin_core::neural::{train_step, Arch, CnnModel, ConvSpec, Label, Tensor, TrainSample};

/// Two 2x2 convolutions on a 4x4 input, one hidden dense layer.
pub fn tiny_arch() -> Arch {
    Arch {
        input_h: 4,
        input_w: 4,
        conv: vec![ConvSpec { channels: 3, kernel: 2 }, ConvSpec { channels: 2, kernel: 2 }],
        dense: vec![5, 2],
    }
}

pub fn random_input(shape: [usize; 3], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::from_vec(&shape, (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
}

fn loss_of(model: &CnnModel<f64>, x: &Tensor<f64>, label: Label) -> f64 {
    let p = model.forward(x).unwrap();
    let t = label.target::<f64>();
    -(t[0] * p[0].ln() + t[1] * p[1].ln())
}

/// Largest relative error between backpropagated gradients and central
/// differences with step 1e-5, per parameter tensor in `params()` order.
/// Gradients below 1e-6 in magnitude are compared absolutely.
#[allow(clippy::needless_range_loop)]
pub fn finite_difference_errors(model: &CnnModel<f64>, x: &Tensor<f64>, label: Label) -> Vec<f64> {
    let mut grad = CnnModel::zeros(model.arch()).unwrap();
    model.loss_and_grad(x, &label.target::<f64>(), &mut grad).unwrap();
    let analytic: Vec<Vec<f64>> = grad.params().into_iter().map(|p| p.to_vec()).collect();
    let h = 1e-5;
    let mut probe = model.clone();
    let mut worst = vec![0.0f64; analytic.len()];
    for (t, g) in analytic.iter().enumerate() {
        for i in 0..g.len() {
            let orig = probe.params()[t][i];
            probe.params_mut()[t][i] = orig + h;
            let up = loss_of(&probe, x, label);
            probe.params_mut()[t][i] = orig - h;
            let down = loss_of(&probe, x, label);
            probe.params_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = (g[i] - numeric).abs() / g[i].abs().max(numeric.abs()).max(1e-6);
            worst[t] = worst[t].max(err);
        }
    }
    worst
}

/// Steps of plain gradient descent at lr 0.01 on one sample until the loss
/// drops below 0.01. Returns the number of steps taken and the last loss.
pub fn overfit_single_sample(arch: &Arch, seed: u64, label: Label, max_steps: usize) -> (usize, f64) {
    let mut model = CnnModel::<f64>::new(arch, seed).unwrap();
    let sample = TrainSample {
        input: random_input(arch.input_shape(), seed + 100),
        label,
        combo_id: 0,
    };
    for step in 0..max_steps {
        let loss = train_step(&mut model, &[&sample], 0.01).unwrap();
        if loss < 0.01 {
            return (step, loss);
        }
    }
    (max_steps, loss_of(&model, &sample.input, label))
}
