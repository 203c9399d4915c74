//! The objective catalog: p-median, p-center, total distance, the eight
//! equity objectives, lexicographic center, and ordered-median objectives,
//! with feasibility constraints C1-C4 on open sets and assignments.
//!
//! Each objective has a direct evaluation on a candidate solution here and a
//! linearized counterpart in [`crate::linear`] whose optimum provably equals
//! the direct form (the equivalence suite exercises both).

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::metrics::{ratio_min_max, MetricsError, OutcomeVector};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("outcome vector was built {got:?} but the objective needs {expected:?}")]
    WeightingMismatch { expected: Weighting, got: Weighting },
    #[error("ordered-median objective requires a weight vector of length {expected}")]
    MissingOrderedWeights { expected: usize },
    #[error("ordered weights invalid: {0}")]
    BadOrderedWeights(String),
    #[error("beta constraint {0} must lie in (0, 1]")]
    InvalidBeta(f64),
    #[error("node {node} is assigned to closed facility {facility}")]
    AssignmentToClosedFacility { node: usize, facility: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0} has no linearized form")]
    LinearizationUnsupported(Objective),
    #[error("invalid open set: {0}")]
    InvalidOpenSet(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("unknown model name '{0}'")]
    UnknownModel(String),
}

/// Whether per-node outcomes are raw travel times or demand-weighted ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    Unweighted,
    DemandWeighted,
}

/// Whether each node must use its nearest open facility or may be assigned
/// anywhere to improve the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentRule {
    Closest,
    Free,
}

/// The objective menu.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    PMedian,
    PCenter,
    TotalDistance,
    Equity1,
    Equity2,
    Equity3,
    Equity4,
    Equity5,
    Equity6,
    Equity7,
    Equity8,
    LexCenter,
    OrderedMedian,
}

impl Objective {
    /// The eleven catalog models, in table order.
    pub const TABLE: [Objective; 11] = [
        Objective::PMedian,
        Objective::PCenter,
        Objective::TotalDistance,
        Objective::Equity1,
        Objective::Equity2,
        Objective::Equity3,
        Objective::Equity4,
        Objective::Equity5,
        Objective::Equity6,
        Objective::Equity7,
        Objective::Equity8,
    ];

    /// All objectives including the lexicographic center and ordered median.
    pub const ALL: [Objective; 13] = [
        Objective::PMedian,
        Objective::PCenter,
        Objective::TotalDistance,
        Objective::Equity1,
        Objective::Equity2,
        Objective::Equity3,
        Objective::Equity4,
        Objective::Equity5,
        Objective::Equity6,
        Objective::Equity7,
        Objective::Equity8,
        Objective::LexCenter,
        Objective::OrderedMedian,
    ];

    pub fn weighting(self) -> Weighting {
        match self {
            Objective::PMedian
            | Objective::Equity3
            | Objective::Equity4
            | Objective::Equity6
            | Objective::Equity8 => Weighting::DemandWeighted,
            _ => Weighting::Unweighted,
        }
    }

    /// Closest assignment is provably optimal for objectives monotone in each
    /// outcome; equity objectives need free assignment.
    pub fn default_rule(self) -> AssignmentRule {
        match self {
            Objective::PMedian | Objective::PCenter | Objective::TotalDistance => {
                AssignmentRule::Closest
            }
            _ => AssignmentRule::Free,
        }
    }

    pub fn in_table(self) -> bool {
        !matches!(self, Objective::LexCenter | Objective::OrderedMedian)
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            Objective::PMedian => "p-median",
            Objective::PCenter => "p-center",
            Objective::TotalDistance => "total-distance",
            Objective::Equity1 => "equity-1",
            Objective::Equity2 => "equity-2",
            Objective::Equity3 => "equity-3",
            Objective::Equity4 => "equity-4",
            Objective::Equity5 => "equity-5",
            Objective::Equity6 => "equity-6",
            Objective::Equity7 => "equity-7",
            Objective::Equity8 => "equity-8",
            Objective::LexCenter => "lex-center",
            Objective::OrderedMedian => "ordered-median",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Objective {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Objective::ALL
            .into_iter()
            .find(|o| o.cli_name() == s)
            .ok_or_else(|| ModelError::UnknownModel(s.to_string()))
    }
}

impl Serialize for Objective {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.cli_name())
    }
}

impl<'de> Deserialize<'de> for Objective {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which objective to optimize plus its options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub objective: Objective,
    /// Rank weights for the ordered-median objective, largest outcome first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordered_weights: Option<Vec<f64>>,
    pub assignment_rule: AssignmentRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_constraint: Option<f64>,
}

impl ModelSpec {
    pub fn new(objective: Objective) -> Self {
        ModelSpec {
            objective,
            ordered_weights: None,
            assignment_rule: objective.default_rule(),
            beta_constraint: None,
        }
    }

    pub fn with_rule(mut self, rule: AssignmentRule) -> Self {
        self.assignment_rule = rule;
        self
    }

    pub fn with_ordered_weights(mut self, weights: Vec<f64>) -> Self {
        self.ordered_weights = Some(weights);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta_constraint = Some(beta);
        self
    }

    /// Check option consistency against an instance of `n` nodes.
    pub fn validate_for(&self, n: usize) -> Result<(), ModelError> {
        if let Some(beta) = self.beta_constraint {
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(ModelError::InvalidBeta(beta));
            }
        }
        if self.objective == Objective::OrderedMedian {
            match &self.ordered_weights {
                None => return Err(ModelError::MissingOrderedWeights { expected: n }),
                Some(w) => {
                    if w.len() != n {
                        return Err(ModelError::BadOrderedWeights(format!(
                            "length {} but instance has {n} nodes",
                            w.len()
                        )));
                    }
                    if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                        return Err(ModelError::BadOrderedWeights(format!(
                            "weight {bad} must be finite and non-negative"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A feasible point of the common region: an open set of exactly p
/// facilities (C1) and a single-facility assignment per node (C2) limited to
/// open facilities (C3); integrality (C4) is structural.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    open_set: Vec<usize>,
    assign: Vec<usize>,
}

impl Assignment {
    pub fn new(open_set: Vec<usize>, assign: Vec<usize>, n: usize) -> Result<Self, ModelError> {
        if open_set.is_empty() {
            return Err(ModelError::InvalidOpenSet("open set is empty".into()));
        }
        let mut sorted = open_set;
        sorted.sort_unstable();
        sorted.dedup();
        if let Some(&max) = sorted.last() {
            if max >= n {
                return Err(ModelError::InvalidOpenSet(format!(
                    "facility index {max} out of range for {n} nodes"
                )));
            }
        }
        if assign.len() != n {
            return Err(ModelError::DimensionMismatch(format!(
                "assignment has {} entries for {n} nodes",
                assign.len()
            )));
        }
        for (node, &facility) in assign.iter().enumerate() {
            if sorted.binary_search(&facility).is_err() {
                return Err(ModelError::AssignmentToClosedFacility { node, facility });
            }
        }
        Ok(Assignment {
            open_set: sorted,
            assign,
        })
    }

    pub fn open_set(&self) -> &[usize] {
        &self.open_set
    }

    pub fn assign(&self) -> &[usize] {
        &self.assign
    }

    pub fn p(&self) -> usize {
        self.open_set.len()
    }

    pub fn len(&self) -> usize {
        self.assign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assign.is_empty()
    }
}

/// One realization of demand and travel time.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioView<'a> {
    pub demand: &'a [f64],
    pub distance: &'a [Vec<f64>],
}

/// An outcome vector carrying the weighting it was built with, so objective
/// evaluation can reject mismatched inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcomes {
    pub vector: OutcomeVector,
    pub weighting: Weighting,
}

/// Per-node outcomes of an assignment under one scenario:
/// z_i = d[i][assign(i)], demand-weighted when requested.
pub fn outcomes(
    a: &Assignment,
    scenario: ScenarioView<'_>,
    weighting: Weighting,
) -> Result<Outcomes, ModelError> {
    let n = a.len();
    if scenario.distance.len() != n {
        return Err(ModelError::DimensionMismatch(format!(
            "distance matrix has {} rows for {n} nodes",
            scenario.distance.len()
        )));
    }
    if weighting == Weighting::DemandWeighted && scenario.demand.len() != n {
        return Err(ModelError::DimensionMismatch(format!(
            "demand vector has {} entries for {n} nodes",
            scenario.demand.len()
        )));
    }
    let mut z = Vec::with_capacity(n);
    for (i, &facility) in a.assign().iter().enumerate() {
        let row = &scenario.distance[i];
        if row.len() != n {
            return Err(ModelError::DimensionMismatch(format!(
                "distance row {i} has {} entries for {n} nodes",
                row.len()
            )));
        }
        let d = row[facility];
        z.push(match weighting {
            Weighting::Unweighted => d,
            Weighting::DemandWeighted => scenario.demand[i] * d,
        });
    }
    Ok(Outcomes {
        vector: OutcomeVector::new(z)?,
        weighting,
    })
}

/// Objective evaluation on a raw outcome slice. Shared by the full
/// evaluation and by solver lower bounds on assignment prefixes (every
/// objective here is monotone non-decreasing under extending the slice).
/// For the ordered median, `ordered_weights` may be longer than the slice;
/// only the leading ranks are used.
pub(crate) fn objective_on_slice(
    objective: Objective,
    zs: &[f64],
    ordered_weights: Option<&[f64]>,
) -> f64 {
    match objective {
        Objective::PMedian | Objective::TotalDistance => zs.iter().sum(),
        Objective::PCenter | Objective::LexCenter => {
            zs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
        Objective::Equity1 | Objective::Equity3 => {
            let mut acc = 0.0;
            for &zi in zs {
                for &zj in zs {
                    acc += (zi - zj).abs();
                }
            }
            acc
        }
        Objective::Equity2 | Objective::Equity4 => {
            // max pairwise |z_i - z_j| equals max - min
            let max = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = zs.iter().copied().fold(f64::INFINITY, f64::min);
            max - min
        }
        Objective::Equity5 | Objective::Equity6 => {
            let mut best = 0.0f64;
            for &zi in zs {
                let mut row = 0.0;
                for &zj in zs {
                    row += (zi - zj).abs();
                }
                best = best.max(row);
            }
            best
        }
        Objective::Equity7 | Objective::Equity8 => {
            // sum_i max_j |z_i - z_j| = sum_i max(z_max - z_i, z_i - z_min)
            let max = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = zs.iter().copied().fold(f64::INFINITY, f64::min);
            zs.iter().map(|&zi| (max - zi).max(zi - min)).sum()
        }
        Objective::OrderedMedian => {
            let weights = ordered_weights.expect("ordered weights validated upstream");
            let mut sorted = zs.to_vec();
            sorted.sort_by(|a, b| b.total_cmp(a));
            sorted.iter().zip(weights).map(|(z, w)| w * z).sum()
        }
    }
}

/// Direct objective value of an outcome vector under a model; errors when
/// the vector's weighting does not match the objective's.
pub fn objective_value(spec: &ModelSpec, out: &Outcomes) -> Result<f64, ModelError> {
    let expected = spec.objective.weighting();
    if out.weighting != expected {
        return Err(ModelError::WeightingMismatch {
            expected,
            got: out.weighting,
        });
    }
    if spec.objective == Objective::OrderedMedian {
        spec.validate_for(out.vector.len())?;
    }
    Ok(objective_on_slice(
        spec.objective,
        out.vector.values(),
        spec.ordered_weights.as_deref(),
    ))
}

/// True when the outcome vector satisfies min/max >= beta.
pub fn check_beta_constraint(v: &OutcomeVector, beta: f64) -> Result<bool, ModelError> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(ModelError::InvalidBeta(beta));
    }
    Ok(ratio_min_max(v)? >= beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_node_scenario() -> (Vec<f64>, Vec<Vec<f64>>) {
        let demand = vec![1.0, 2.0, 3.0];
        let distance = vec![
            vec![0.0, 10.0, 20.0],
            vec![10.0, 0.0, 5.0],
            vec![20.0, 5.0, 0.0],
        ];
        (demand, distance)
    }

    fn out_of(zs: &[f64]) -> Outcomes {
        Outcomes {
            vector: OutcomeVector::new(zs.to_vec()).unwrap(),
            weighting: Weighting::Unweighted,
        }
    }

    #[test]
    fn forced_assignment_reads_matrix_column() {
        let (demand, distance) = three_node_scenario();
        let a = Assignment::new(vec![0], vec![0, 0, 0], 3).unwrap();
        let view = ScenarioView {
            demand: &demand,
            distance: &distance,
        };
        let out = outcomes(&a, view, Weighting::Unweighted).unwrap();
        assert_eq!(out.vector.values(), &[0.0, 10.0, 20.0]);
        // Self-assigned node has zero outcome via the zero diagonal.
        assert_eq!(out.vector.values()[0], 0.0);
        let weighted = outcomes(&a, view, Weighting::DemandWeighted).unwrap();
        assert_eq!(weighted.vector.values(), &[0.0, 20.0, 60.0]);
    }

    #[test]
    fn closed_facility_rejected() {
        assert!(matches!(
            Assignment::new(vec![0], vec![0, 1, 0], 3),
            Err(ModelError::AssignmentToClosedFacility {
                node: 1,
                facility: 1
            })
        ));
    }

    #[test]
    fn objective_examples() {
        let z = out_of(&[0.0, 10.0, 20.0]);
        let val = |o: Objective| {
            objective_value(&ModelSpec::new(o).with_rule(AssignmentRule::Free), &z).unwrap()
        };
        assert_eq!(val(Objective::PCenter), 20.0);
        assert_eq!(val(Objective::TotalDistance), 30.0);
        assert_eq!(val(Objective::Equity1), 80.0);
        assert_eq!(val(Objective::Equity2), 20.0);
        assert_eq!(val(Objective::Equity5), 30.0);
        assert_eq!(val(Objective::Equity7), 50.0);
        let om = ModelSpec::new(Objective::OrderedMedian).with_ordered_weights(vec![1.0, 0.0, 0.0]);
        assert_eq!(objective_value(&om, &z).unwrap(), 20.0);
    }

    #[test]
    fn constant_outcomes_zero_all_equity_objectives() {
        let z = out_of(&[4.0, 4.0, 4.0]);
        for o in [
            Objective::Equity1,
            Objective::Equity2,
            Objective::Equity5,
            Objective::Equity7,
        ] {
            let spec = ModelSpec::new(o).with_rule(AssignmentRule::Free);
            assert_eq!(objective_value(&spec, &z).unwrap(), 0.0);
        }
    }

    #[test]
    fn weighting_mismatch_rejected() {
        let z = out_of(&[1.0, 2.0]);
        let spec = ModelSpec::new(Objective::PMedian);
        assert!(matches!(
            objective_value(&spec, &z),
            Err(ModelError::WeightingMismatch { .. })
        ));
    }

    #[test]
    fn ordered_median_needs_weights() {
        let spec = ModelSpec::new(Objective::OrderedMedian);
        assert!(matches!(
            spec.validate_for(3),
            Err(ModelError::MissingOrderedWeights { expected: 3 })
        ));
        let bad = ModelSpec::new(Objective::OrderedMedian).with_ordered_weights(vec![-1.0, 0.0]);
        assert!(bad.validate_for(2).is_err());
    }

    #[test]
    fn beta_examples() {
        let c = OutcomeVector::new(vec![5.0, 5.0]).unwrap();
        assert!(check_beta_constraint(&c, 1.0).unwrap());
        let v = OutcomeVector::new(vec![2.0, 8.0]).unwrap();
        assert!(!check_beta_constraint(&v, 0.3).unwrap());
        assert!(check_beta_constraint(&v, 0.2).unwrap());
        assert!(check_beta_constraint(&v, 0.0).is_err());
        assert!(check_beta_constraint(&v, 1.5).is_err());
    }

    #[test]
    fn model_names_round_trip() {
        for o in Objective::ALL {
            assert_eq!(o.cli_name().parse::<Objective>().unwrap(), o);
        }
        assert!("equity-9".parse::<Objective>().is_err());
    }

    #[test]
    fn equity7_closed_form_matches_naive() {
        let zs = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0];
        let closed = objective_on_slice(Objective::Equity7, &zs, None);
        let mut naive = 0.0;
        for &zi in &zs {
            let mut best = 0.0f64;
            for &zj in &zs {
                best = best.max((zi - zj).abs());
            }
            naive += best;
        }
        assert_eq!(closed, naive);
    }
}
