//! Evaluation with the centers as the classifier, split into many/medium/few
//! frequency tertiles.

use gpaco_core::linalg::{argmax_tie_lowest, dot};
use gpaco_core::ClassCenters;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::encoder::EncoderNet;
use crate::error::{Result, TrainerError};

/// Accuracy over the whole test split and per frequency tertile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc_all: f64,
    pub acc_many: f64,
    pub acc_medium: f64,
    pub acc_few: f64,
}

/// Classes grouped into many/medium/few by descending training count. Group
/// sizes differ by at most one; ties in count break toward the lower class
/// index staying in the more frequent group.
pub fn frequency_tertiles(counts: &[usize]) -> [Vec<usize>; 3] {
    let n = counts.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&k| (std::cmp::Reverse(counts[k]), k));
    let many_len = n.div_ceil(3);
    let medium_len = (n - many_len).div_ceil(2);
    let many = order[..many_len].to_vec();
    let medium = order[many_len..many_len + medium_len].to_vec();
    let few = order[many_len + medium_len..].to_vec();
    [many, medium, few]
}

/// Predicted class: argmax over c_k . f(x) with ties resolved to the lowest
/// class index. No prior correction is applied at inference.
pub fn predict(query: &EncoderNet, centers: &ClassCenters, x: &[f64]) -> Result<usize> {
    let cache = query.encode(x)?;
    let scores: Vec<f64> = (0..centers.n_classes())
        .map(|k| dot(centers.center(k), cache.f()))
        .collect();
    Ok(argmax_tie_lowest(&scores))
}

pub fn evaluate(
    query: &EncoderNet,
    centers: &ClassCenters,
    test: &Dataset,
    counts: &[usize],
) -> Result<Metrics> {
    evaluate_features(
        &test
            .x
            .iter()
            .map(|x| Ok(query.encode(x)?.f().to_vec()))
            .collect::<Result<Vec<_>>>()?,
        &test.y,
        centers,
        counts,
    )
}

/// Evaluation over precomputed identity-path features.
pub fn evaluate_features(
    features: &[Vec<f64>],
    labels: &[usize],
    centers: &ClassCenters,
    counts: &[usize],
) -> Result<Metrics> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(TrainerError::Shape(
            "evaluation needs equal-length nonempty features and labels".into(),
        ));
    }
    let n = centers.n_classes();
    let mut correct = vec![0usize; n];
    let mut seen = vec![0usize; n];
    for (f, &y) in features.iter().zip(labels) {
        let scores: Vec<f64> = (0..n).map(|k| dot(centers.center(k), f)).collect();
        let pred = argmax_tie_lowest(&scores);
        seen[y] += 1;
        if pred == y {
            correct[y] += 1;
        }
    }

    let acc_over = |classes: &[usize]| -> f64 {
        let (c, s) = classes.iter().fold((0usize, 0usize), |(c, s), &k| {
            (c + correct[k], s + seen[k])
        });
        if s == 0 {
            0.0
        } else {
            c as f64 / s as f64
        }
    };

    let [many, medium, few] = frequency_tertiles(counts);
    let all: Vec<usize> = (0..n).collect();
    Ok(Metrics {
        acc_all: acc_over(&all),
        acc_many: acc_over(&many),
        acc_medium: acc_over(&medium),
        acc_few: acc_over(&few),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tertiles_differ_by_at_most_one_class() {
        for n in 2..20 {
            let counts = vec![7usize; n];
            let [a, b, c] = frequency_tertiles(&counts);
            assert_eq!(a.len() + b.len() + c.len(), n);
            let max = a.len().max(b.len()).max(c.len());
            let min = a.len().min(b.len()).min(c.len());
            assert!(max - min <= 1, "n = {n}: {} {} {}", a.len(), b.len(), c.len());
        }
    }

    #[test]
    fn tertiles_follow_descending_counts() {
        let counts = vec![5, 100, 1, 60, 2, 90];
        let [many, medium, few] = frequency_tertiles(&counts);
        assert_eq!(many, vec![1, 5]);
        assert_eq!(medium, vec![3, 0]);
        assert_eq!(few, vec![4, 2]);
    }

    #[test]
    fn feature_eval_counts_correct_predictions() {
        use gpaco_core::Mat;
        let centers = ClassCenters::new(
            Mat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let features = vec![vec![2.0, 0.1], vec![0.1, 2.0], vec![2.0, 0.1]];
        let labels = vec![0, 1, 1];
        let m = evaluate_features(&features, &labels, &centers, &[10, 5]).unwrap();
        assert!((m.acc_all - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn prediction_tie_breaks_to_lowest_index() {
        use gpaco_core::Mat;
        let centers = ClassCenters::new(
            Mat::from_rows(vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let features = vec![vec![1.0, 0.0]];
        let labels = vec![1]; // classes 0 and 1 tie; prediction must be 0
        let m = evaluate_features(&features, &labels, &centers, &[3, 2, 1]).unwrap();
        assert_eq!(m.acc_all, 0.0);
    }
}
