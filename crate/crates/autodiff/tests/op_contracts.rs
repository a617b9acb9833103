use std::collections::BTreeMap;

use autodiff::{adam_step, io, NArray, ParamTree, SeedStream, Tape};

fn scalar_param_tree(value: f64) -> ParamTree<f64> {
    let mut tree = ParamTree::new();
    tree.insert("p", NArray::scalar(value)).unwrap();
    tree
}

#[test]
fn conv2d_identity_kernel_preserves_input() {
    let tape = Tape::<f64>::new();
    let x = tape.leaf(
        NArray::from_vec(&[1, 4, 4], (0..16).map(|i| i as f64 * 0.5).collect()).unwrap(),
    );
    let k = tape.leaf(NArray::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap());
    let y = x.conv2d(k, 1, 0).unwrap();
    assert_eq!(y.value().shape(), &[1, 4, 4]);
    assert_eq!(y.value().data(), x.value().data());
}

#[test]
fn conv2d_zero_kernel_gives_zero_output() {
    let tape = Tape::<f64>::new();
    let mut rng = SeedStream::new(7);
    let x = tape.leaf(rng.uniform_array(&[2, 3, 5, 5], -1.0, 1.0));
    let k = tape.leaf(NArray::zeros(&[4, 3, 3, 3]));
    let y = x.conv2d(k, 1, 1).unwrap();
    assert!(y.value().data().iter().all(|&v| v == 0.0));
}

#[test]
fn conv2d_output_extent_formula() {
    let tape = Tape::<f64>::new();
    let mut rng = SeedStream::new(8);
    for &(h, k, s, p) in &[(7usize, 3usize, 1usize, 0usize), (8, 3, 2, 1), (9, 5, 3, 2)] {
        let x = tape.leaf(rng.uniform_array(&[1, 2, h, h], -1.0, 1.0));
        let w = tape.leaf(rng.uniform_array(&[3, 2, k, k], -1.0, 1.0));
        let y = x.conv2d(w, s, p).unwrap();
        let expect = (h + 2 * p - k) / s + 1;
        assert_eq!(y.value().shape(), &[1, 3, expect, expect]);
    }
}

#[test]
fn conv2d_rejects_bad_arguments() {
    let tape = Tape::<f64>::new();
    let x = tape.leaf(NArray::zeros(&[2, 4, 4]));
    let k_mismatch = tape.leaf(NArray::zeros(&[1, 3, 3, 3]));
    assert!(x.conv2d(k_mismatch, 1, 1).is_err());
    let k = tape.leaf(NArray::zeros(&[1, 2, 3, 3]));
    assert!(x.conv2d(k, 0, 1).is_err());
}

#[test]
fn linear_zero_weight_returns_bias() {
    let tape = Tape::<f64>::new();
    let x = tape.leaf(NArray::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap());
    let w = tape.leaf(NArray::zeros(&[2, 3]));
    let b = tape.leaf(NArray::from_vec(&[2], vec![0.5, -0.25]).unwrap());
    let y = x.linear(w, b).unwrap();
    assert_eq!(y.value().data(), &[0.5, -0.25]);
}

#[test]
fn linear_identity_weight_returns_input() {
    let tape = Tape::<f64>::new();
    let x = tape.leaf(NArray::from_vec(&[3], vec![1.0, -2.0, 3.0]).unwrap());
    let mut eye = NArray::zeros(&[3, 3]);
    for i in 0..3 {
        eye.data_mut()[i * 3 + i] = 1.0;
    }
    let w = tape.leaf(eye);
    let b = tape.leaf(NArray::zeros(&[3]));
    let y = x.linear(w, b).unwrap();
    assert_eq!(y.value().data(), x.value().data());
}

#[test]
fn linear_rejects_dimension_mismatch() {
    let tape = Tape::<f64>::new();
    let x = tape.leaf(NArray::zeros(&[4]));
    let w = tape.leaf(NArray::zeros(&[2, 3]));
    let b = tape.leaf(NArray::zeros(&[2]));
    assert!(x.linear(w, b).is_err());
}

#[test]
fn resample_down_then_up_recovers_constant_image() {
    let tape = Tape::<f64>::new();
    let x = tape.leaf(NArray::filled(&[2, 4, 4], 0.625));
    let y = x.downsample(2).unwrap().upsample(2).unwrap();
    assert_eq!(y.value().data(), x.value().data());
}

#[test]
fn resample_down_is_arithmetic_mean() {
    let tape = Tape::<f64>::new();
    let x = tape.leaf(NArray::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let y = x.downsample(2).unwrap();
    assert_eq!(y.value().shape(), &[1, 1, 1]);
    assert_eq!(y.value().data(), &[2.5]);
}

#[test]
fn resample_rejects_indivisible_extents() {
    let tape = Tape::<f64>::new();
    let x = tape.leaf(NArray::zeros(&[1, 5, 4]));
    assert!(x.downsample(2).is_err());
}

#[test]
fn instance_norm_is_idempotent_within_eps() {
    let tape = Tape::<f64>::new();
    let mut rng = SeedStream::new(3);
    let x = tape.leaf(rng.uniform_array(&[1, 3, 6, 6], -2.0, 2.0));
    let once = x.instance_norm(1e-8).unwrap();
    let twice = once.instance_norm(1e-8).unwrap();
    assert!(once.value().max_abs_diff(&twice.value()) < 1e-6);
}

#[test]
fn instance_norm_constant_channel_maps_to_zero() {
    let tape = Tape::<f64>::new();
    let x = tape.leaf(NArray::filled(&[1, 2, 4, 4], 3.0));
    let y = x.instance_norm(1e-5).unwrap();
    assert!(y.value().data().iter().all(|&v| v.abs() < 1e-9));
}

#[test]
fn instance_norm_output_statistics() {
    let tape = Tape::<f64>::new();
    let mut rng = SeedStream::new(11);
    let x = tape.leaf(rng.uniform_array(&[1, 3, 4, 4], -1.5, 1.5));
    let y = x.instance_norm(1e-5).unwrap();
    let yv = y.value();
    for c in 0..3 {
        let plane = &yv.data()[c * 16..(c + 1) * 16];
        let mean: f64 = plane.iter().sum::<f64>() / 16.0;
        let var: f64 = plane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 16.0;
        assert!(mean.abs() < 1e-6, "channel {c} mean {mean}");
        assert!((var - 1.0).abs() < 1e-3, "channel {c} var {var}");
    }
}

#[test]
fn adam_zero_gradient_leaves_parameters_unchanged() {
    let mut tree = scalar_param_tree(0.75);
    let mut grads = BTreeMap::new();
    grads.insert("p".to_string(), NArray::scalar(0.0));
    adam_step(&mut tree, &grads, 0.1, 0.9, 0.999, 1e-8).unwrap();
    assert_eq!(tree.value("p").unwrap().item(), 0.75);
}

#[test]
fn adam_first_step_magnitude_is_learning_rate() {
    let mut tree = scalar_param_tree(0.0);
    let mut grads = BTreeMap::new();
    grads.insert("p".to_string(), NArray::scalar(1.0));
    adam_step(&mut tree, &grads, 0.1, 0.9, 0.999, 1e-8).unwrap();
    let v = tree.value("p").unwrap().item();
    assert!((v + 0.1).abs() < 1e-6, "first Adam step was {v}");
    assert_eq!(tree.get("p").unwrap().step, 1);
}

#[test]
fn adam_rejects_shape_mismatch_and_bad_betas() {
    let mut tree = scalar_param_tree(0.0);
    let mut grads = BTreeMap::new();
    grads.insert("p".to_string(), NArray::zeros(&[2]));
    assert!(adam_step(&mut tree, &grads, 0.1, 0.9, 0.999, 1e-8).is_err());
    let mut grads = BTreeMap::new();
    grads.insert("p".to_string(), NArray::scalar(1.0));
    assert!(adam_step(&mut tree, &grads, 0.1, 1.0, 0.999, 1e-8).is_err());
}

#[test]
fn adam_trajectories_are_bit_identical_across_runs() {
    let run = || {
        let mut rng = SeedStream::new(42);
        let mut tree = ParamTree::new();
        tree.insert("w", rng.normal_array::<f64>(&[4, 4], 0.1)).unwrap();
        for _ in 0..25 {
            let g = rng.normal_array::<f64>(&[4, 4], 1.0);
            let mut grads = BTreeMap::new();
            grads.insert("w".to_string(), g);
            adam_step(&mut tree, &grads, 1e-3, 0.9, 0.99, 1e-8).unwrap();
        }
        tree.value("w").unwrap().clone()
    };
    let a = run();
    let b = run();
    assert_eq!(a.data(), b.data());
}

#[test]
fn checkpoint_roundtrip_preserves_values_state_and_meta() {
    let mut rng = SeedStream::new(5);
    let mut tree = ParamTree::new();
    tree.insert("a/w", rng.normal_array::<f32>(&[3, 2], 0.5)).unwrap();
    tree.insert("a/b", rng.normal_array::<f32>(&[3], 0.5)).unwrap();
    let mut grads = BTreeMap::new();
    grads.insert("a/w".to_string(), rng.normal_array::<f32>(&[3, 2], 1.0));
    adam_step(&mut tree, &grads, 1e-2, 0.9, 0.999, 1e-8).unwrap();

    let mut buf = Vec::new();
    io::write_checkpoint(&mut buf, &tree, b"meta-bytes", true).unwrap();
    let (loaded, meta) = io::read_checkpoint::<f32>(&mut buf.as_slice()).unwrap();
    assert_eq!(meta, b"meta-bytes");
    assert_eq!(loaded.len(), tree.len());
    for (name, p) in tree.iter() {
        let q = loaded.get(name).unwrap();
        assert_eq!(p.value.data(), q.value.data(), "{name} values");
        assert_eq!(p.m1.data(), q.m1.data(), "{name} m1");
        assert_eq!(p.m2.data(), q.m2.data(), "{name} m2");
        assert_eq!(p.step, q.step, "{name} step");
    }
}

#[test]
fn checkpoint_rejects_bad_magic() {
    let bytes = b"XXXX\x01\x00\x00\x00\x00";
    assert!(io::read_checkpoint::<f32>(&mut bytes.as_slice()).is_err());
}

#[test]
fn rng_state_capture_resumes_exactly() {
    let mut a = SeedStream::new(99);
    for _ in 0..17 {
        a.normal_f64();
    }
    let state = a.state();
    let tail: Vec<f64> = (0..10).map(|_| a.normal_f64()).collect();
    let mut b = SeedStream::restore(&state);
    let tail_b: Vec<f64> = (0..10).map(|_| b.normal_f64()).collect();
    assert_eq!(tail, tail_b);
}

#[test]
fn forward_pass_is_deterministic() {
    let run = || {
        let mut rng = SeedStream::new(13);
        let tape = Tape::<f32>::new();
        let x = tape.leaf(rng.uniform_array(&[1, 3, 8, 8], -1.0, 1.0));
        let k = tape.leaf(rng.uniform_array(&[4, 3, 3, 3], -0.5, 0.5));
        let y = x
            .conv2d(k, 1, 1)
            .unwrap()
            .instance_norm(1e-5)
            .unwrap()
            .leaky_relu(0.2)
            .downsample(2)
            .unwrap();
        y.value().data().to_vec()
    };
    assert_eq!(run(), run());
}

#[test]
fn finite_inputs_stay_finite_through_kernels() {
    let mut rng = SeedStream::new(21);
    let tape = Tape::<f32>::new();
    let x = tape.leaf(rng.uniform_array(&[2, 3, 8, 8], -5.0, 5.0));
    let k = tape.leaf(rng.uniform_array(&[4, 3, 3, 3], -2.0, 2.0));
    let y = x
        .conv2d(k, 2, 1)
        .unwrap()
        .instance_norm(1e-5)
        .unwrap()
        .leaky_relu(0.2)
        .sigmoid();
    assert!(y.value().all_finite());
    let loss = y.mean_all();
    let grads = tape.backward(loss).unwrap();
    assert!(grads.of(x).unwrap().all_finite());
    assert!(grads.of(k).unwrap().all_finite());
}
