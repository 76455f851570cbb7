mod common;

use common::{finite_difference_errors, overfit_single_sample, random_input, tiny_arch};
use proptest::prelude::*;
use sagin_core::netsim::MetricsReport;
use sagin_core::neural::{
    checkpoint, online_update, train_step, Arch, Label, LabelThresholds, OnlineConfig, OnlineTrainer, Tensor,
    TrainSample,
};
use sagin_core::{Matrix, Model, Model32, NeuralError};

fn reference() -> Arch {
    Arch::reference(8, 16)
}

/// Direct evaluation of the layer equations, one scalar at a time.
#[allow(clippy::needless_range_loop)]
fn straight_line_forward(m: &Model, x: &Matrix) -> Vec<f64> {
    let (h, w) = (m.arch().input_h, m.arch().input_w);
    let mut act: Vec<f64> = x.data().to_vec();
    for c in &m.convs {
        let k = c.kernel as isize;
        let pad = (k - 1) / 2;
        let mut out = vec![0.0; c.out_c * h * w];
        for oc in 0..c.out_c {
            for y in 0..h as isize {
                for xx in 0..w as isize {
                    let mut s = c.bias[oc];
                    for ic in 0..c.in_c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = y + ky - pad;
                                let ix = xx + kx - pad;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let wi = ((oc * c.in_c + ic) * c.kernel + ky as usize) * c.kernel + kx as usize;
                                s += c.weight[wi] * act[(ic * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                    out[(oc * h + y as usize) * w + xx as usize] = if s > 0.0 { s } else { 0.0 };
                }
            }
        }
        act = out;
    }
    let last = m.dense.len() - 1;
    for (i, d) in m.dense.iter().enumerate() {
        let mut out = vec![0.0; d.n_out];
        for o in 0..d.n_out {
            let mut s = d.bias[o];
            for j in 0..d.n_in {
                s += d.weight[o * d.n_in + j] * act[j];
            }
            out[o] = if i == last || s > 0.0 { s } else { 0.0 };
        }
        act = out;
    }
    let z = act[0].max(act[1]);
    let e0 = (act[0] - z).exp();
    let e1 = (act[1] - z).exp();
    vec![e0 / (e0 + e1), e1 / (e0 + e1)]
}

#[test]
fn zero_model_outputs_one_half() {
    let m = Model::zeros(&reference()).unwrap();
    assert_eq!(m.forward(&Tensor::zeros(&[1, 8, 17])).unwrap(), vec![0.5, 0.5]);
}

#[test]
fn matches_straight_line_evaluation() {
    for seed in 0..4 {
        let m = Model::new(&reference(), seed).unwrap();
        let x = random_input([1, 8, 17], seed + 50);
        let got = m.forward(&x).unwrap();
        let want = straight_line_forward(&m, &x);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    }
    let m = Model::new(&tiny_arch(), 3).unwrap();
    let x = random_input([1, 4, 4], 9);
    let (g, w) = (m.forward(&x).unwrap(), straight_line_forward(&m, &x));
    assert!((g[0] - w[0]).abs() < 1e-12);
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..3 {
        let m = Model::new(&tiny_arch(), seed).unwrap();
        let x = random_input([1, 4, 4], seed + 10);
        for label in [Label::Choose, Label::Reject] {
            let errs = finite_difference_errors(&m, &x, label);
            // conv1 w/b, conv2 w/b, dense1 w/b, dense2 w/b
            assert_eq!(errs.len(), 8);
            assert!(errs.iter().all(|&e| e < 1e-4), "seed {seed}: {errs:?}");
        }
    }
}

#[test]
fn single_sample_loss_decreases_for_fifty_steps() {
    let mut m = Model::new(&reference(), 11).unwrap();
    let s = TrainSample {
        input: random_input([1, 8, 17], 12),
        label: Label::Choose,
        combo_id: 0,
    };
    let mut last = f64::INFINITY;
    for _ in 0..50 {
        let loss = train_step(&mut m, &[&s], 0.01).unwrap();
        assert!(loss < last, "{loss} !< {last}");
        last = loss;
    }
}

#[test]
fn single_sample_overfits_within_500_steps() {
    for (seed, label) in [(1, Label::Choose), (2, Label::Reject), (3, Label::Choose)] {
        let (steps, loss) = overfit_single_sample(&reference(), seed, label, 500);
        assert!(loss < 0.01 && steps <= 500, "seed {seed}: {loss} after {steps}");
    }
}

#[test]
fn zero_learning_rate_is_a_no_op() {
    let mut m = Model::new(&tiny_arch(), 1).unwrap();
    let before = m.clone();
    let s = TrainSample {
        input: random_input([1, 4, 4], 1),
        label: Label::Reject,
        combo_id: 0,
    };
    let a = train_step(&mut m, &[&s], 0.0).unwrap();
    let b = train_step(&mut m, &[&s], 0.0).unwrap();
    assert_eq!(a, b);
    assert_eq!(m, before);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let m = Model::new(&reference(), 42).unwrap();
    let path = dir.path().join("m.ckpt");
    checkpoint::save(&m, &path).unwrap();
    let back: Model = checkpoint::load(&path).unwrap();
    assert_eq!(back.arch(), m.arch());
    assert_eq!(back.seed(), 42);
    for (a, b) in m.params().iter().zip(back.params()) {
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(checkpoint::encode(&back), std::fs::read(&path).unwrap());

    let m32 = Model32::new(&tiny_arch(), 7).unwrap();
    let back32: Model32 = checkpoint::decode(&checkpoint::encode(&m32)).unwrap();
    assert_eq!(back32, m32);
    // the scalar width is part of the file
    assert!(checkpoint::decode::<f64>(&checkpoint::encode(&m32)).is_err());
}

#[test]
fn corrupt_checkpoint_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ckpt");
    let mut bytes = checkpoint::encode(&Model::new(&tiny_arch(), 1).unwrap());
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(
        checkpoint::load::<f64>(&path),
        Err(NeuralError::Checkpoint { .. })
    ));
    assert!(checkpoint::load::<f64>(&dir.path().join("missing.ckpt")).is_err());
}

fn tagged(i: usize) -> Tensor<f64> {
    let mut t = Tensor::zeros(&[1, 4, 4]);
    t.data_mut()[0] = i as f64;
    t
}

#[test]
fn replay_buffer_keeps_the_newest_512() {
    let models: Vec<_> = (0..27).map(|c| Model::new(&tiny_arch(), c).unwrap()).collect();
    let mut tr = OnlineTrainer::new(models, OnlineConfig::default(), LabelThresholds::default(), 1);
    let ok = MetricsReport::empty(1.0);
    online_update(&mut tr, 5, tagged(0), &ok, 1.0).unwrap();
    assert_eq!(tr.buffer(5).len(), 1);
    for i in 1..600 {
        online_update(&mut tr, 5, tagged(i), &ok, 1.0).unwrap();
    }
    assert_eq!(tr.buffer(5).len(), 512);
    let kept: Vec<usize> = tr.buffer(5).iter().map(|s| s.input.data()[0] as usize).collect();
    assert_eq!(kept, (88..600).collect::<Vec<_>>());
    assert_eq!(tr.steps(), 600);
    assert!(tr.buffer(4).is_empty());
}

#[test]
fn disabled_training_leaves_models_bit_identical() {
    let models: Vec<_> = (0..27).map(|c| Model::new(&tiny_arch(), c).unwrap()).collect();
    let cfg = OnlineConfig {
        enabled: false,
        ..Default::default()
    };
    let mut tr = OnlineTrainer::new(models.clone(), cfg, LabelThresholds::default(), 1);
    let lossy = MetricsReport {
        loss_rate: 0.5,
        ..MetricsReport::empty(1.0)
    };
    for i in 0..100 {
        assert_eq!(online_update(&mut tr, i % 27, tagged(i), &lossy, 0.0).unwrap(), None);
    }
    assert_eq!(tr.into_models(), models);
}

#[test]
fn same_seed_same_weights() {
    let a = Model::new(&reference(), 9).unwrap();
    let b = Model::new(&reference(), 9).unwrap();
    assert_eq!(checkpoint::encode(&a), checkpoint::encode(&b));
    assert_ne!(a, Model::new(&reference(), 10).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn softmax_is_positive_and_normalized(seed in 0u64..10_000, input_seed in 0u64..10_000) {
        let m = Model::new(&reference(), seed).unwrap();
        let x = random_input([1, 8, 17], input_seed);
        let p = m.forward(&x).unwrap();
        prop_assert_eq!(p.len(), 2);
        prop_assert!(p.iter().all(|&v| v > 0.0));
        prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
        // forward is pure
        prop_assert_eq!(m.forward(&x).unwrap(), p);
    }

    #[test]
    fn single_precision_is_normalized(seed in 0u64..10_000, input_seed in 0u64..10_000) {
        let m = Model32::new(&reference(), seed).unwrap();
        let x = random_input([1, 8, 17], input_seed).cast::<f32>();
        let p = m.forward(&x).unwrap();
        prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
    }
}
