//! Directional checks for two-view necessity and queue-size scaling.
//! Scratch tool for choosing the shipped experiment defaults.

use gpaco_core::loss::{LossConfig, LossVariant};
use gpaco_trainer::*;

fn dataset(sep: f64, seed: u64, n_max: usize) -> SyntheticData {
    make_longtailed_gaussians(&DatasetSpec {
        n_classes: 10,
        dim: 16,
        n_max,
        beta: 100.0,
        seed,
        class_separation: sep,
        noise_sigma: 1.0,
        test_per_class: 50,
    })
    .unwrap()
}

#[allow(clippy::too_many_arguments)]
fn config(
    seed: u64,
    data: &SyntheticData,
    epochs: usize,
    two_views: bool,
    q: usize,
    batch: usize,
    aug_noise: f64,
    alpha: f64,
) -> RunConfig {
    let mut loss = LossConfig::new(LossVariant::Gpaco);
    loss.alpha = alpha;
    loss.tau = 0.07;
    loss.tau_on_centers = false;
    loss.center_rebalance = true;
    RunConfig {
        dataset: data.spec.clone(),
        encoder: EncoderSpec::default(),
        train: TrainConfig {
            loss,
            epochs,
            batch_size: batch,
            lr0: 0.05,
            sgd_momentum: 0.9,
            momentum_coeff: 0.999,
            queue_capacity: q,
            two_views,
            seed,
            augment: AugmentConfig {
                noise: aug_noise,
                scale_jitter: 0.1,
            },
        },
    }
}

fn main() {
    let epochs: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(100);
    let seeds: u64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let sep: f64 = std::env::args()
        .nth(3)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.7);

    let batch: usize = std::env::args()
        .nth(4)
        .and_then(|s| s.parse().ok())
        .unwrap_or(32);
    let aug_noise: f64 = std::env::args()
        .nth(5)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.3);
    let n_max: usize = std::env::args()
        .nth(6)
        .and_then(|s| s.parse().ok())
        .unwrap_or(800);
    let alpha: f64 = std::env::args()
        .nth(7)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.05);

    println!("=== sep {sep} epochs {epochs} batch {batch} aug {aug_noise} n_max {n_max} alpha {alpha} ===");
    let jobs: Vec<(&str, bool, usize)> = vec![
        ("two-view q256", true, 256),
        ("one-view q256", false, 256),
        ("two-view q64", true, 64),
        ("two-view q512", true, 512),
    ];
    let mut means = Vec::new();
    for (name, two_views, q) in &jobs {
        let mut accs = Vec::new();
        for seed in 0..seeds {
            let data = dataset(sep, 1000 + seed, n_max);
            let run = config(seed, &data, epochs, *two_views, *q, batch, aug_noise, alpha);
            let (_, records) = run_train(&run, &data).unwrap();
            let acc = records.last().unwrap().metrics.acc_all;
            println!("  seed {seed} {name:14} acc {acc:.3}");
            accs.push(acc);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        means.push((name.to_string(), mean));
    }
    for (name, mean) in &means {
        println!("MEAN {name:14} acc {mean:.4}");
    }
}
