use autodiff::{SeedStream, Tape};
use std::time::Instant;

fn main() {
    let mut rng = SeedStream::new(1);
    let x = rng.uniform_array::<f32>(&[8, 16, 32, 32], -1.0, 1.0);
    let w = rng.uniform_array::<f32>(&[16, 16, 3, 3], -0.3, 0.3);
    let t0 = Instant::now();
    let reps = 30;
    for _ in 0..reps {
        let tape = Tape::<f32>::new();
        let xv = tape.leaf(x.clone());
        let wv = tape.leaf(w.clone());
        let y = xv.conv2d(wv, 1, 1).unwrap();
        let loss = y.mean_all();
        tape.backward(loss).unwrap();
    }
    println!("conv fwd+bwd: {:.4}s/rep", t0.elapsed().as_secs_f64() / reps as f64);

    let big = rng.uniform_array::<f32>(&[8, 16, 64, 64], -1.0, 1.0);
    let t0 = Instant::now();
    for _ in 0..reps {
        let tape = Tape::<f32>::new();
        let xv = tape.leaf(big.clone());
        let y = xv.leaky_relu(0.2).sigmoid().tanh().instance_norm(1e-5).unwrap().mean_all();
        tape.backward(y).unwrap();
    }
    println!("elementwise chain: {:.4}s/rep", t0.elapsed().as_secs_f64() / reps as f64);
}
