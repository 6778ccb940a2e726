//! Sweep dataset hardness and compare methods on the directional claims.
//! Scratch tool for choosing the shipped experiment defaults.

use gpaco_core::loss::{LossConfig, LossVariant};
use gpaco_trainer::*;
use std::time::Instant;

fn dataset(sep: f64, noise: f64, seed: u64) -> SyntheticData {
    make_longtailed_gaussians(&DatasetSpec {
        n_classes: 10,
        dim: 16,
        n_max: 800,
        beta: 100.0,
        seed,
        class_separation: sep,
        noise_sigma: noise,
        test_per_class: 50,
    })
    .unwrap()
}

fn config(variant: LossVariant, seed: u64, data: &SyntheticData, epochs: usize) -> RunConfig {
    let mut loss = LossConfig::new(variant);
    loss.alpha = 0.05;
    loss.tau = 0.07;
    loss.tau_on_centers = false;
    if matches!(variant, LossVariant::Gpaco) {
        loss.center_rebalance = true;
    }
    RunConfig {
        dataset: data.spec.clone(),
        encoder: EncoderSpec::default(),
        train: TrainConfig {
            loss,
            epochs,
            batch_size: 32,
            lr0: 0.05,
            sgd_momentum: 0.9,
            momentum_coeff: 0.999,
            queue_capacity: 256,
            two_views: true,
            seed,
            augment: AugmentConfig {
                noise: 0.3,
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

    for (sep, noise) in [(0.7, 1.0), (1.0, 1.0)] {
        println!("=== sep {sep} noise {noise} epochs {epochs} ===");
        type Row = (String, Vec<f64>, Vec<f64>, Vec<f64>);
        let mut agg: Vec<Row> = vec![
            ("ce".into(), vec![], vec![], vec![]),
            ("gpaco".into(), vec![], vec![], vec![]),
            ("paco".into(), vec![], vec![], vec![]),
            ("supcon".into(), vec![], vec![], vec![]),
        ];
        for seed in 0..seeds {
            let data = dataset(sep, noise, 1000 + seed);
            for (name, accs, fews, ratios) in agg.iter_mut() {
                let variant = match name.as_str() {
                    "ce" => LossVariant::CrossEntropy,
                    "gpaco" => LossVariant::Gpaco,
                    "paco" => LossVariant::Paco,
                    _ => LossVariant::Supcon,
                };
                let run = config(variant, seed, &data, epochs);
                let t = Instant::now();
                let (state, records) = run_train(&run, &data).unwrap();
                let mut snap = state.snapshot();
                let (metrics, ratio) = if variant == LossVariant::Supcon {
                    let (m, centers) =
                        linear_probe(&snap, &data.train, &data.test, &ProbeConfig::default())
                            .unwrap();
                    snap.centers = centers;
                    let rows = classifier_grad_norm_probe(&snap, &data.train).unwrap();
                    (m, decile_ratio(&rows))
                } else {
                    let rows = classifier_grad_norm_probe(&snap, &data.train).unwrap();
                    (records.last().unwrap().metrics.clone(), decile_ratio(&rows))
                };
                accs.push(metrics.acc_all);
                fews.push(metrics.acc_few);
                ratios.push(ratio);
                println!(
                    "  seed {seed} {name:7} {:4.1}s acc {:.3} many {:.3} med {:.3} few {:.3} ratio {:.2}",
                    t.elapsed().as_secs_f64(),
                    metrics.acc_all,
                    metrics.acc_many,
                    metrics.acc_medium,
                    metrics.acc_few,
                    ratio
                );
            }
        }
        for (name, accs, fews, ratios) in &agg {
            let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
            println!(
                "  MEAN {name:7} acc {:.3} few {:.3} ratio {:.2}",
                mean(accs),
                mean(fews),
                mean(ratios)
            );
        }
    }
}
