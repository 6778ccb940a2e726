//! Gradient-norm probe and linear-probe behavior.

use gpaco_core::loss::{LossConfig, LossVariant};
use gpaco_core::{ClassCenters, FeatureQueue, Mat};
use gpaco_trainer::{
    classifier_grad_norm_probe, decile_ratio, linear_probe, Activation, AugmentConfig, Dataset,
    EncoderNet, EncoderSpec, Linear, Mlp, ProbeConfig, SavedState, TrainConfig,
};

fn eye(d: usize) -> Mat {
    let mut m = Mat::zeros(d, d);
    for i in 0..d {
        m.row_mut(i)[i] = 1.0;
    }
    m
}

/// Identity encoder so probed features equal raw inputs.
fn identity_net(d: usize) -> EncoderNet {
    let id_layer = || Linear {
        w: eye(d),
        b: vec![0.0; d],
    };
    EncoderNet {
        trunk: Mlp::from_layers(vec![id_layer(), id_layer()], Activation::Relu),
        transform: Mlp::from_layers(vec![id_layer(), id_layer()], Activation::Relu),
        normalize: false,
    }
}

fn saved_state(variant: LossVariant, centers: Vec<Vec<f64>>, counts: Vec<usize>) -> SavedState {
    let d = centers[0].len();
    let mut loss = LossConfig::new(variant);
    loss.tau = 1.0;
    loss.tau_on_centers = true;
    SavedState {
        config: TrainConfig {
            loss,
            epochs: 1,
            batch_size: 2,
            lr0: 0.1,
            sgd_momentum: 0.9,
            momentum_coeff: 0.999,
            queue_capacity: 4,
            two_views: true,
            seed: 0,
            augment: AugmentConfig {
                noise: 0.0,
                scale_jitter: 0.0,
            },
        },
        encoder_spec: EncoderSpec::default(),
        query: identity_net(d),
        key: None,
        centers: ClassCenters::new(Mat::from_rows(centers).unwrap()).unwrap(),
        queue: FeatureQueue::new(4).unwrap(),
        counts,
    }
}

#[test]
fn symmetric_geometry_gives_equal_norms() {
    // Two classes mirrored through the origin with mirrored data: by
    // symmetry each center row sees gradients of identical magnitude.
    let state = saved_state(
        LossVariant::CrossEntropy,
        vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
        vec![10, 10],
    );
    let data = Dataset {
        x: vec![
            vec![2.0, 0.5],
            vec![-2.0, -0.5],
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
        ],
        y: vec![0, 1, 0, 1],
    };
    let rows = classifier_grad_norm_probe(&state, &data).unwrap();
    assert_eq!(rows.len(), 2);
    assert!((rows[0].norm - rows[1].norm).abs() < 1e-6);
    assert!(rows.iter().all(|r| r.norm >= 0.0));
}

#[test]
fn norms_are_nonnegative_and_sorted_by_count() {
    let state = saved_state(
        LossVariant::Gpaco,
        vec![vec![0.5, 0.1], vec![-0.2, 0.9], vec![0.3, -0.4]],
        vec![5, 50, 20],
    );
    let data = Dataset {
        x: vec![vec![0.4, 0.2], vec![-0.1, 0.6], vec![0.9, -0.3]],
        y: vec![0, 1, 2],
    };
    let rows = classifier_grad_norm_probe(&state, &data).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(
        rows.iter().map(|r| r.count).collect::<Vec<_>>(),
        vec![50, 20, 5]
    );
    assert!(rows.iter().all(|r| r.norm >= 0.0));
    let ratio = decile_ratio(&rows);
    assert!(ratio >= 1.0);
}

#[test]
fn empty_probe_data_rejected() {
    let state = saved_state(
        LossVariant::CrossEntropy,
        vec![vec![1.0], vec![-1.0]],
        vec![1, 1],
    );
    let data = Dataset {
        x: vec![],
        y: vec![],
    };
    assert!(classifier_grad_norm_probe(&state, &data).is_err());
}

#[test]
fn linear_probe_solves_separable_features() {
    // Frozen identity features that are linearly separable: the probe
    // classifier should be essentially perfect.
    let state = saved_state(
        LossVariant::Supcon,
        vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        vec![20, 20],
    );
    let train = Dataset {
        x: (0..40)
            .map(|i| {
                let side = if i % 2 == 0 { 3.0 } else { -3.0 };
                vec![side + 0.1 * (i as f64 / 40.0), 0.3]
            })
            .collect(),
        y: (0..40).map(|i| i % 2).collect(),
    };
    let test = train.clone();
    let (metrics, centers) = linear_probe(&state, &train, &test, &ProbeConfig::default()).unwrap();
    assert!(metrics.acc_all > 0.99, "acc = {}", metrics.acc_all);
    assert_eq!(centers.n_classes(), 2);
}

#[test]
fn linear_probe_on_uninformative_features_sits_near_chance() {
    // All features identical: nothing to separate, so balanced accuracy
    // collapses to one class's share.
    let state = saved_state(
        LossVariant::Supcon,
        vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]],
        vec![10, 10, 10, 10],
    );
    let train = Dataset {
        x: vec![vec![1.0, 1.0]; 40],
        y: (0..40).map(|i| i % 4).collect(),
    };
    let test = train.clone();
    let (metrics, _) = linear_probe(&state, &train, &test, &ProbeConfig::default()).unwrap();
    assert!(metrics.acc_all <= 0.30, "acc = {}", metrics.acc_all);
}
