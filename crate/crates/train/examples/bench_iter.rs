use autodiff::SeedStream;
use model::NetConfig;
use train::trainer::{TrainSet, Trainer};
use train::{Schedule, TrainConfig};

fn main() {
    let cfg = NetConfig::desk();
    let tc = TrainConfig {
        seed: 1,
        batch_size: 8,
        pretrain_iters: 3,
        joint_iters: 5,
        ..TrainConfig::default()
    };
    let mut rng = SeedStream::new(5);
    let images: Vec<_> = (0..32)
        .map(|_| rng.uniform_array(&[3, cfg.image_size, cfg.image_size], 0.0, 1.0))
        .collect();
    let labels = (0..32).map(|i| i % 2).collect();
    let data = TrainSet { images, labels };

    let mut trainer = Trainer::new(cfg, tc, Schedule::Ui2iCodec).unwrap();
    let dir = std::env::temp_dir().join("unicodec_bench");
    let t0 = std::time::Instant::now();
    let mut n_pre = 0u32;
    let mut pre_done = std::time::Duration::ZERO;
    trainer
        .run(&data, &dir, Some(&mut |r: &train::LossReport| {
            if r.rate_bpp == 0.0 && r.adv == 0.0 && r.adv2 == 0.0 {
                n_pre += 1;
                pre_done = t0.elapsed();
            }
        }))
        .unwrap();
    let total = t0.elapsed();
    println!(
        "pretrain: {n_pre} iters in {:.2}s ({:.3}s/iter)",
        pre_done.as_secs_f64(),
        pre_done.as_secs_f64() / n_pre as f64
    );
    let joint = total - pre_done;
    println!(
        "joint: 5 iters in {:.2}s ({:.3}s/iter)",
        joint.as_secs_f64(),
        joint.as_secs_f64() / 5.0
    );
}
