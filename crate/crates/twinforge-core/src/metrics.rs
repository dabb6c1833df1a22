//! The six global error measures per (model, data set) pair and their
//! averages over a test group.
//!
//! Signed errors are pooled across channels and samples for rmse, mape,
//! maxe, mede and iqr; R^2 is computed per channel and averaged, since a
//! pooled variant would mix channel scales.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};
use crate::stats::{mean, percentile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    /// Root-mean-square error, K.
    pub rmse: f64,
    /// Mean absolute percentage error, percent.
    pub mape: f64,
    /// Maximum absolute error, K.
    pub maxe: f64,
    /// Median signed error, K.
    pub mede: f64,
    /// Interquartile range of the signed errors, K.
    pub iqr: f64,
    /// Coefficient of determination, averaged over channels.
    pub r2: f64,
}

impl MetricSet {
    pub const NAMES: [&'static str; 6] = ["rmse", "mape", "maxe", "mede", "iqr", "r2"];

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "rmse" => Some(self.rmse),
            "mape" => Some(self.mape),
            "maxe" => Some(self.maxe),
            "mede" => Some(self.mede),
            "iqr" => Some(self.iqr),
            "r2" => Some(self.r2),
            _ => None,
        }
    }
}

/// Arithmetic means over a test group plus the per-data-set values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMetrics {
    pub mean: MetricSet,
    pub per_dataset: Vec<MetricSet>,
}

/// Computes the six error measures of a prediction against a reference,
/// both `n x N` in physical units.
pub fn evaluate(pred: &[Vec<f64>], reference: &[Vec<f64>]) -> CoreResult<MetricSet> {
    if pred.len() != reference.len() || pred.is_empty() {
        return Err(CoreError::ShapeMismatch {
            expected: (reference.len(), reference.first().map_or(0, Vec::len)),
            got: (pred.len(), pred.first().map_or(0, Vec::len)),
        });
    }
    let n_samples = reference[0].len();
    for (p, r) in pred.iter().zip(reference) {
        if p.len() != n_samples || r.len() != n_samples {
            return Err(CoreError::ShapeMismatch {
                expected: (reference.len(), n_samples),
                got: (pred.len(), p.len()),
            });
        }
    }

    let mut errors = Vec::with_capacity(pred.len() * n_samples);
    let mut mape_sum = 0.0;
    for (p, r) in pred.iter().zip(reference) {
        for (&a, &b) in p.iter().zip(r) {
            if b == 0.0 {
                return Err(CoreError::ZeroReference);
            }
            let e = a - b;
            errors.push(e);
            mape_sum += libm::fabs(e / b);
        }
    }
    let count = errors.len() as f64;
    let rmse = libm::sqrt(errors.iter().map(|&e| e * e).sum::<f64>() / count);
    let mape = mape_sum / count * 100.0;
    let maxe = errors.iter().map(|&e| libm::fabs(e)).fold(0.0, f64::max);
    let mede = percentile(&errors, 50.0);
    let iqr = percentile(&errors, 75.0) - percentile(&errors, 25.0);

    let mut r2_sum = 0.0;
    for (ch, (p, r)) in pred.iter().zip(reference).enumerate() {
        let mu = mean(r);
        let ss_tot: f64 = r.iter().map(|&b| (b - mu) * (b - mu)).sum();
        if ss_tot == 0.0 {
            return Err(CoreError::ConstantReference { channel: ch });
        }
        let ss_res: f64 = p.iter().zip(r).map(|(&a, &b)| (a - b) * (a - b)).sum();
        r2_sum += 1.0 - ss_res / ss_tot;
    }
    let r2 = r2_sum / pred.len() as f64;

    Ok(MetricSet { rmse, mape, maxe, mede, iqr, r2 })
}

/// Arithmetic mean of each measure over a non-empty group.
pub fn aggregate(sets: &[MetricSet]) -> CoreResult<GlobalMetrics> {
    if sets.is_empty() {
        return Err(CoreError::EmptyGroup);
    }
    let count = sets.len() as f64;
    let mean = MetricSet {
        rmse: sets.iter().map(|s| s.rmse).sum::<f64>() / count,
        mape: sets.iter().map(|s| s.mape).sum::<f64>() / count,
        maxe: sets.iter().map(|s| s.maxe).sum::<f64>() / count,
        mede: sets.iter().map(|s| s.mede).sum::<f64>() / count,
        iqr: sets.iter().map(|s| s.iqr).sum::<f64>() / count,
        r2: sets.iter().map(|s| s.r2).sum::<f64>() / count,
    };
    Ok(GlobalMetrics { mean, per_dataset: sets.to_vec() })
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use alloc::vec;

    #[test]
    fn identical_arrays_give_perfect_scores() {
        let a = vec![vec![300.0, 310.0, 320.0], vec![290.0, 295.0, 300.0]];
        let m = evaluate(&a, &a).unwrap();
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.mape, 0.0);
        assert_eq!(m.maxe, 0.0);
        assert_eq!(m.mede, 0.0);
        assert_eq!(m.iqr, 0.0);
        assert_eq!(m.r2, 1.0);
    }

    #[test]
    fn hand_evaluated_single_channel_case() {
        let pred = vec![vec![301.0, 302.0, 303.0]];
        let reference = vec![vec![300.0, 300.0, 300.0]];
        // Constant reference: r2 undefined.
        assert!(matches!(
            evaluate(&pred, &reference),
            Err(CoreError::ConstantReference { channel: 0 })
        ));

        // Near-constant reference keeps r2 defined while leaving the pooled
        // error measures unchanged to well below the assert tolerance.
        let reference = vec![vec![300.0, 300.0, 300.0 + 1e-9]];
        let m = evaluate(&pred, &reference).unwrap();
        assert!((m.rmse - libm::sqrt(14.0 / 3.0)).abs() < 1e-6);
        assert!((m.maxe - 3.0).abs() < 1e-6);
        assert!((m.mede - 2.0).abs() < 1e-6);
        assert!((m.iqr - 1.0).abs() < 1e-6);
        assert!((m.mape - (1.0 + 2.0 + 3.0) / 3.0 / 300.0 * 100.0).abs() < 1e-6);
    }

    #[test]
    fn median_error_keeps_its_sign() {
        let reference = vec![vec![300.0, 310.0, 320.0, 330.0]];
        let pred: Vec<Vec<f64>> =
            vec![reference[0].iter().map(|&v| v - 1.0).collect()];
        let m = evaluate(&pred, &reference).unwrap();
        assert!((m.mede + 1.0).abs() < 1e-12, "expected -1, got {}", m.mede);
    }

    #[test]
    fn zero_reference_is_rejected() {
        let pred = vec![vec![1.0, 2.0]];
        let reference = vec![vec![0.0, 2.0]];
        assert!(matches!(evaluate(&pred, &reference), Err(CoreError::ZeroReference)));
    }

    #[test]
    fn aggregate_means_and_permutation_invariance() {
        let a = MetricSet { rmse: 1.0, mape: 0.1, maxe: 2.0, mede: 0.5, iqr: 0.2, r2: 0.9 };
        let b = MetricSet { rmse: 2.0, mape: 0.3, maxe: 4.0, mede: -0.5, iqr: 0.6, r2: 0.7 };
        let g1 = aggregate(&[a, b]).unwrap();
        let g2 = aggregate(&[b, a]).unwrap();
        assert!((g1.mean.rmse - 1.5).abs() < 1e-15);
        assert!((g1.mean.mede - 0.0).abs() < 1e-15);
        assert_eq!(g1.mean, g2.mean);

        let single = aggregate(&[a]).unwrap();
        assert_eq!(single.mean, a);

        assert!(matches!(aggregate(&[]), Err(CoreError::EmptyGroup)));
    }

    #[test]
    fn pooling_is_invariant_under_channel_permutation() {
        let pred = vec![vec![301.0, 302.0], vec![288.0, 292.0]];
        let reference = vec![vec![300.0, 303.0], vec![290.0, 291.0]];
        let m1 = evaluate(&pred, &reference).unwrap();
        let pred_sw = vec![pred[1].clone(), pred[0].clone()];
        let ref_sw = vec![reference[1].clone(), reference[0].clone()];
        let m2 = evaluate(&pred_sw, &ref_sw).unwrap();
        assert_eq!(m1, m2);
    }
}
