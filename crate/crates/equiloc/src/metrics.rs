//! Inequity indices over per-node outcome vectors.
//!
//! All indices are pure functions of an [`OutcomeVector`]: total absolute
//! deviation from the mean (MAD), sum of pairwise absolute differences (SAD),
//! range, min/max ratio, population variance, Gini coefficient, and deviation
//! from a target. Every index is permutation-invariant and zero on constant
//! vectors (the ratio is one). A Pigou-Dalton transfer check is provided as a
//! property-test helper.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("outcome vector must be non-empty")]
    EmptyVector,
    #[error("outcome value at position {index} is not finite: {value}")]
    NonFinite { index: usize, value: f64 },
    #[error("outcome value at position {index} is negative: {value}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("invalid transfer: {0}")]
    InvalidTransfer(String),
    #[error("metric {0:?} does not support the Pigou-Dalton check")]
    UnsupportedMetric(MetricId),
}

/// A vector of per-node outcomes, optionally with an externally supplied
/// reference mean (used by MAD when the distribution mean is fixed a priori).
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeVector {
    values: Vec<f64>,
    reference_mean: Option<f64>,
}

impl OutcomeVector {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricsError> {
        Self::with_reference_mean(values, None)
    }

    pub fn with_reference_mean(
        values: Vec<f64>,
        reference_mean: Option<f64>,
    ) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::EmptyVector);
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(MetricsError::NonFinite { index, value });
            }
        }
        if let Some(m) = reference_mean {
            if !m.is_finite() {
                return Err(MetricsError::NonFinite { index: 0, value: m });
            }
        }
        Ok(OutcomeVector {
            values,
            reference_mean,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty vectors
    }

    /// Reference mean if set, otherwise the arithmetic mean. Constant vectors
    /// short-circuit to the common value so equality cases are exact.
    pub fn mean(&self) -> f64 {
        if let Some(m) = self.reference_mean {
            return m;
        }
        let first = self.values[0];
        if self.values.iter().all(|&v| v == first) {
            return first;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn check_non_negative(&self) -> Result<(), MetricsError> {
        for (index, &value) in self.values.iter().enumerate() {
            if value < 0.0 {
                return Err(MetricsError::NegativeEntry { index, value });
            }
        }
        Ok(())
    }
}

/// Total absolute deviation from the mean: sum_i |x_i - xbar|.
pub fn mad(v: &OutcomeVector) -> f64 {
    let m = v.mean();
    v.values().iter().map(|&x| (x - m).abs()).sum()
}

/// Sum of pairwise absolute differences over ordered pairs:
/// sum_i sum_j |x_i - x_j|. Each unordered pair counts twice; divide by two
/// to compare against half-sum conventions.
pub fn sad(v: &OutcomeVector) -> f64 {
    let xs = v.values();
    let mut acc = 0.0;
    for &xi in xs {
        for &xj in xs {
            acc += (xi - xj).abs();
        }
    }
    acc
}

/// Range of outcomes: max_i x_i - min_i x_i.
pub fn range_spread(v: &OutcomeVector) -> f64 {
    v.max() - v.min()
}

/// min/max ratio, the left side of the constraint min/max >= beta.
/// All-zero vectors are perfect equity by convention and yield 1.
pub fn ratio_min_max(v: &OutcomeVector) -> Result<f64, MetricsError> {
    v.check_non_negative()?;
    let max = v.max();
    if max == 0.0 {
        return Ok(1.0);
    }
    Ok(v.min() / max)
}

/// Population variance (divide by |I|, not |I|-1): outcome vectors cover the
/// whole node set, they are not samples.
pub fn variance(v: &OutcomeVector) -> f64 {
    let first = v.values()[0];
    if v.values().iter().all(|&x| x == first) {
        return 0.0;
    }
    let m = v.values().iter().sum::<f64>() / v.len() as f64;
    v.values().iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Gini coefficient with its zero-sum degeneracy flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GiniValue {
    pub value: f64,
    /// True when sum x_i = 0: all outcomes equal at zero, value defined as 0.
    pub zero_sum: bool,
}

/// Gini coefficient: SAD / (2 |I| sum_i x_i). Requires non-negative entries.
pub fn gini(v: &OutcomeVector) -> Result<f64, MetricsError> {
    gini_detailed(v).map(|g| g.value)
}

pub fn gini_detailed(v: &OutcomeVector) -> Result<GiniValue, MetricsError> {
    v.check_non_negative()?;
    let total: f64 = v.values().iter().sum();
    if total == 0.0 {
        return Ok(GiniValue {
            value: 0.0,
            zero_sum: true,
        });
    }
    let value = sad(v) / (2.0 * v.len() as f64 * total);
    Ok(GiniValue {
        value,
        zero_sum: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviationMode {
    SumAbs,
    MaxAbs,
}

/// Deviation from a predefined target, summed or maximal per `mode`.
pub fn deviation_from_target(v: &OutcomeVector, target: f64, mode: DeviationMode) -> f64 {
    match mode {
        DeviationMode::SumAbs => v.values().iter().map(|&x| (x - target).abs()).sum(),
        DeviationMode::MaxAbs => v
            .values()
            .iter()
            .map(|&x| (x - target).abs())
            .fold(0.0, f64::max),
    }
}

/// Which index a Pigou-Dalton check applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricId {
    Mad,
    Sad,
    Range,
    Variance,
    Gini,
}

fn evaluate_metric(id: MetricId, v: &OutcomeVector) -> Result<f64, MetricsError> {
    Ok(match id {
        MetricId::Mad => mad(v),
        MetricId::Sad => sad(v),
        MetricId::Range => range_spread(v),
        MetricId::Variance => variance(v),
        MetricId::Gini => gini(v)?,
    })
}

/// Pigou-Dalton transfer check: move `delta` from the poorer node `i` to the
/// richer node `j` and report whether the index did not decrease. Returns an
/// error when the transfer is malformed (delta < 0, delta > x_i, or i richer
/// than j).
pub fn check_pigou_dalton(
    index: MetricId,
    v: &OutcomeVector,
    i: usize,
    j: usize,
    delta: f64,
) -> Result<bool, MetricsError> {
    let xs = v.values();
    if i >= xs.len() || j >= xs.len() {
        return Err(MetricsError::InvalidTransfer(format!(
            "indices ({i},{j}) out of range for length {}",
            xs.len()
        )));
    }
    if i == j {
        return Err(MetricsError::InvalidTransfer(
            "transfer endpoints must differ".into(),
        ));
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(MetricsError::InvalidTransfer(format!(
            "delta {delta} must be >= 0"
        )));
    }
    if delta > xs[i] {
        return Err(MetricsError::InvalidTransfer(format!(
            "delta {delta} exceeds donor outcome {}",
            xs[i]
        )));
    }
    if xs[i] > xs[j] {
        return Err(MetricsError::InvalidTransfer(format!(
            "donor must not be richer than recipient ({} > {})",
            xs[i], xs[j]
        )));
    }
    let before = evaluate_metric(index, v)?;
    let mut after_values = xs.to_vec();
    after_values[i] -= delta;
    after_values[j] += delta;
    let after_vec = OutcomeVector::with_reference_mean(after_values, v.reference_mean)?;
    let after = evaluate_metric(index, &after_vec)?;
    Ok(after >= before)
}

/// Every inequity index of the catalog evaluated on one outcome vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquityReport {
    pub mad: f64,
    pub sad: f64,
    pub range: f64,
    pub min_max_ratio: f64,
    pub variance: f64,
    pub gini: f64,
    pub gini_zero_sum: bool,
}

impl EquityReport {
    pub fn evaluate(v: &OutcomeVector) -> Result<Self, MetricsError> {
        let g = gini_detailed(v)?;
        Ok(EquityReport {
            mad: mad(v),
            sad: sad(v),
            range: range_spread(v),
            min_max_ratio: ratio_min_max(v)?,
            variance: variance(v),
            gini: g.value,
            gini_zero_sum: g.zero_sum,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(values: &[f64]) -> OutcomeVector {
        OutcomeVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn empty_vector_rejected() {
        assert_eq!(
            OutcomeVector::new(vec![]).unwrap_err(),
            MetricsError::EmptyVector
        );
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            OutcomeVector::new(vec![1.0, f64::NAN]),
            Err(MetricsError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn mad_examples() {
        assert_eq!(mad(&vec_of(&[3.0, 3.0, 3.0])), 0.0);
        // [0, 0.5] has mean 0.25; deviations 0.25 + 0.25 = 0.5. MAD cannot
        // tell deviations (0.25, 0.25) apart from (0.5, 0).
        assert_eq!(mad(&vec_of(&[0.0, 0.5])), 0.5);
        let v = OutcomeVector::with_reference_mean(vec![0.5, 1.0], Some(0.75)).unwrap();
        assert_eq!(mad(&v), 0.5);
        assert_eq!(mad(&vec_of(&[1.0, 2.0, 3.0, 6.0])), 6.0);
    }

    #[test]
    fn sad_examples() {
        assert_eq!(sad(&vec_of(&[4.0, 4.0, 4.0, 4.0])), 0.0);
        assert_eq!(sad(&vec_of(&[0.0, 1.0])), 2.0);
        assert_eq!(sad(&vec_of(&[1.0, 2.0, 4.0])), 12.0);
    }

    #[test]
    fn range_examples() {
        assert_eq!(range_spread(&vec_of(&[5.0])), 0.0);
        assert_eq!(range_spread(&vec_of(&[2.0, 9.0, 4.0])), 7.0);
        assert_eq!(range_spread(&vec_of(&[3.0, 3.0])), 0.0);
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(ratio_min_max(&vec_of(&[4.0, 4.0])).unwrap(), 1.0);
        assert_eq!(ratio_min_max(&vec_of(&[2.0, 8.0])).unwrap(), 0.25);
        assert_eq!(ratio_min_max(&vec_of(&[0.0, 0.0])).unwrap(), 1.0);
        assert!(matches!(
            ratio_min_max(&vec_of(&[-1.0, 2.0])),
            Err(MetricsError::NegativeEntry { index: 0, .. })
        ));
    }

    #[test]
    fn variance_examples() {
        assert_eq!(variance(&vec_of(&[7.0, 7.0, 7.0])), 0.0);
        assert_eq!(variance(&vec_of(&[0.0, 2.0])), 1.0);
        assert!((variance(&vec_of(&[1.0, 2.0, 3.0])) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&vec_of(&[5.0, 5.0, 5.0])).unwrap(), 0.0);
        assert_eq!(gini(&vec_of(&[0.0, 1.0])).unwrap(), 0.5);
        assert_eq!(gini(&vec_of(&[1.0, 1.0, 1.0, 1.0, 0.0])).unwrap(), 0.2);
        let g = gini_detailed(&vec_of(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(g.value, 0.0);
        assert!(g.zero_sum);
        assert!(gini(&vec_of(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn deviation_examples() {
        assert_eq!(
            deviation_from_target(&vec_of(&[2.0, 2.0]), 2.0, DeviationMode::SumAbs),
            0.0
        );
        assert_eq!(
            deviation_from_target(&vec_of(&[1.0, 3.0]), 2.0, DeviationMode::SumAbs),
            2.0
        );
        assert_eq!(
            deviation_from_target(&vec_of(&[1.0, 3.0]), 2.0, DeviationMode::MaxAbs),
            1.0
        );
    }

    #[test]
    fn pigou_dalton_gini_transfer() {
        // [2,4] -> [1,5]: Gini goes from 4/24 to 8/24.
        let v = vec_of(&[2.0, 4.0]);
        assert!(check_pigou_dalton(MetricId::Gini, &v, 0, 1, 1.0).unwrap());
        // No-op transfer on a constant vector holds trivially.
        let c = vec_of(&[3.0, 3.0]);
        assert!(check_pigou_dalton(MetricId::Gini, &c, 0, 1, 0.0).unwrap());
    }

    #[test]
    fn pigou_dalton_guards() {
        let v = vec_of(&[0.0, 2.0]);
        // delta > x_i is a malformed transfer.
        assert!(matches!(
            check_pigou_dalton(MetricId::Variance, &v, 0, 1, 1.0),
            Err(MetricsError::InvalidTransfer(_))
        ));
        // Transfers from the richer node are rejected.
        assert!(check_pigou_dalton(MetricId::Gini, &v, 1, 0, 1.0).is_err());
        assert!(check_pigou_dalton(MetricId::Gini, &v, 0, 0, 0.0).is_err());
    }

    #[test]
    fn sad_gini_consistency() {
        let v = vec_of(&[1.0, 2.0, 4.0, 0.5]);
        let total: f64 = v.values().iter().sum();
        let lhs = sad(&v);
        let rhs = 2.0 * v.len() as f64 * total * gini(&v).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
    }

    #[test]
    fn equity_report_fields() {
        let r = EquityReport::evaluate(&vec_of(&[0.0, 1.0])).unwrap();
        assert_eq!(r.sad, 2.0);
        assert_eq!(r.range, 1.0);
        assert_eq!(r.gini, 0.5);
        assert_eq!(r.min_max_ratio, 0.0);
        assert!(!r.gini_zero_sum);
    }
}
