//! Symbolic linearized counterparts of the catalog objectives.
//!
//! Each model becomes binary openings x_j and assignments y_{i,j} under the
//! common rows (C1) sum x = p, (C2) one assignment per node, (C3) y <= x,
//! plus auxiliary variables carrying the standard absolute-value and epigraph
//! inequalities: pair variables z_{i,j} >= +/-(z_i - z_j) for sum-of-pairs
//! objectives, one epigraph per scenario for max-type objectives, and one
//! outcome variable per (scenario, node) where needed. The equivalence test
//! suite minimizes these models by exhaustive search over feasible (x, y)
//! and compares against the production solver; nothing here is on the
//! production solve path.
//!
//! Evaluation keeps the same accumulation order as direct evaluation, so the
//! two routes agree exactly, not just within tolerance.

use serde::Serialize;

use crate::instance::Instance;
use crate::models::{ModelError, ModelSpec, Objective, Weighting};
use crate::scenarios::ScenarioSet;

/// Reference to a model variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VarRef {
    /// Facility opening x_j.
    X(usize),
    /// Assignment y_{i,j}.
    Y(usize, usize),
    /// Auxiliary variable by position in [`LinearModel::aux`].
    Aux(usize),
}

/// Linear expression: constant + sum coef * var.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LinExpr {
    pub terms: Vec<(VarRef, f64)>,
    pub constant: f64,
}

impl LinExpr {
    fn of(terms: Vec<(VarRef, f64)>) -> Self {
        LinExpr {
            terms,
            constant: 0.0,
        }
    }
}

/// What an auxiliary variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AuxKind {
    /// Outcome z_i of scenario n (defined by equality).
    Outcome { scenario: usize, node: usize },
    /// Pairwise |z_i - z_j| surrogate for scenario n.
    Pair { scenario: usize, i: usize, j: usize },
    /// Scenario-level epigraph (max-type objectives).
    Epigraph { scenario: usize },
    /// Per-node epigraph s_i >= |z_i - z_j| for all j (sum-of-max type).
    NodeEpigraph { scenario: usize, node: usize },
}

/// An auxiliary variable: either defined by an equality or bounded below by
/// a set of expressions (its optimal value is their maximum, since every
/// objective coefficient on an auxiliary is non-negative).
#[derive(Debug, Clone, Serialize)]
pub struct AuxVar {
    pub kind: AuxKind,
    pub equality: Option<LinExpr>,
    pub lower_bounds: Vec<LinExpr>,
}

/// A linearized model instance.
#[derive(Debug, Clone, Serialize)]
pub struct LinearModel {
    pub objective: Objective,
    pub n: usize,
    pub p: usize,
    pub scenario_count: usize,
    /// Auxiliaries in topological order: expressions only reference binaries
    /// and earlier auxiliaries.
    pub aux: Vec<AuxVar>,
    /// One expression per scenario; the model objective is their mean.
    pub scenario_objectives: Vec<LinExpr>,
}

impl LinearModel {
    pub fn x_count(&self) -> usize {
        self.n
    }

    pub fn y_count(&self) -> usize {
        self.n * self.n
    }

    /// C1 + C2 + C3 row count of the common feasible region.
    pub fn constraint_rows(&self) -> usize {
        1 + self.n + self.n * self.n
    }

    pub fn count_aux(&self, pred: impl Fn(&AuxKind) -> bool) -> usize {
        self.aux.iter().filter(|a| pred(&a.kind)).count()
    }

    /// Objective value at a feasible binary point. `assign[i]` is the
    /// facility of node i; feasibility (C1-C3) is the caller's contract.
    /// Auxiliaries take their optimal values: the equality value, or the
    /// maximum of the lower bounds.
    pub fn evaluate(&self, assign: &[usize]) -> f64 {
        debug_assert_eq!(assign.len(), self.n);
        let mut aux_values = Vec::with_capacity(self.aux.len());
        let eval_expr = |expr: &LinExpr, aux_values: &[f64]| -> f64 {
            let mut acc = expr.constant;
            for &(var, coef) in &expr.terms {
                let value = match var {
                    VarRef::X(_) => 1.0, // open facilities only appear via C3
                    VarRef::Y(i, j) => {
                        if assign[i] == j {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    VarRef::Aux(k) => aux_values[k],
                };
                acc += coef * value;
            }
            acc
        };
        for aux in &self.aux {
            let value = match &aux.equality {
                Some(expr) => eval_expr(expr, &aux_values),
                None => aux
                    .lower_bounds
                    .iter()
                    .map(|b| eval_expr(b, &aux_values))
                    .fold(0.0f64, f64::max),
            };
            aux_values.push(value);
        }
        let mut total = 0.0;
        for expr in &self.scenario_objectives {
            total += eval_expr(expr, &aux_values);
        }
        total / self.scenario_objectives.len() as f64
    }
}

/// Cost coefficient of (i, j) under the objective's weighting.
fn cost(weighting: Weighting, demand: &[f64], distance: &[Vec<f64>], i: usize, j: usize) -> f64 {
    match weighting {
        Weighting::Unweighted => distance[i][j],
        Weighting::DemandWeighted => demand[i] * distance[i][j],
    }
}

/// Build the linearized form of a catalog model over the scenario set. The
/// lexicographic center is inherently sequential and the ordered median is
/// outside the catalog; both are unsupported.
#[allow(clippy::needless_range_loop)]
pub fn linearized_form(
    spec: &ModelSpec,
    instance: &Instance,
    scen: &ScenarioSet,
) -> Result<LinearModel, ModelError> {
    if !spec.objective.in_table() {
        return Err(ModelError::LinearizationUnsupported(spec.objective));
    }
    let n = instance.len();
    if scen.is_empty() || scen.node_count() != n {
        return Err(ModelError::DimensionMismatch(format!(
            "scenario set has {} scenarios of {} nodes for an instance of {n}",
            scen.len(),
            scen.node_count()
        )));
    }
    let weighting = spec.objective.weighting();
    let mut aux: Vec<AuxVar> = Vec::new();
    let mut scenario_objectives = Vec::with_capacity(scen.len());

    for (sc, scenario) in scen.scenarios().iter().enumerate() {
        let w = &scenario.demand;
        let d = &scenario.distance;
        match spec.objective {
            Objective::PMedian | Objective::TotalDistance => {
                let mut terms = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        terms.push((VarRef::Y(i, j), cost(weighting, w, d, i, j)));
                    }
                }
                scenario_objectives.push(LinExpr::of(terms));
            }
            Objective::PCenter => {
                let mut bounds = Vec::with_capacity(n);
                for i in 0..n {
                    let terms = (0..n)
                        .map(|j| (VarRef::Y(i, j), cost(weighting, w, d, i, j)))
                        .collect();
                    bounds.push(LinExpr::of(terms));
                }
                let t = push_aux(&mut aux, AuxKind::Epigraph { scenario: sc }, None, bounds);
                scenario_objectives.push(LinExpr::of(vec![(t, 1.0)]));
            }
            Objective::Equity1 | Objective::Equity3 => {
                let z = outcome_vars(&mut aux, sc, n, weighting, w, d);
                let mut terms = Vec::with_capacity(n * (n - 1));
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let pair = push_aux(
                            &mut aux,
                            AuxKind::Pair { scenario: sc, i, j },
                            None,
                            vec![diff(z[i], z[j]), diff(z[j], z[i])],
                        );
                        terms.push((pair, 1.0));
                    }
                }
                scenario_objectives.push(LinExpr::of(terms));
            }
            Objective::Equity2 | Objective::Equity4 => {
                let z = outcome_vars(&mut aux, sc, n, weighting, w, d);
                let mut bounds = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        bounds.push(diff(z[i], z[j]));
                        bounds.push(diff(z[j], z[i]));
                    }
                }
                let t = push_aux(&mut aux, AuxKind::Epigraph { scenario: sc }, None, bounds);
                scenario_objectives.push(LinExpr::of(vec![(t, 1.0)]));
            }
            Objective::Equity5 | Objective::Equity6 => {
                let z = outcome_vars(&mut aux, sc, n, weighting, w, d);
                let pairs = pair_vars(&mut aux, sc, n, &z);
                let mut bounds = Vec::with_capacity(n);
                for i in 0..n {
                    let terms = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| (pairs[i][j], 1.0))
                        .collect::<Vec<_>>();
                    bounds.push(LinExpr::of(terms));
                }
                let t = push_aux(&mut aux, AuxKind::Epigraph { scenario: sc }, None, bounds);
                scenario_objectives.push(LinExpr::of(vec![(t, 1.0)]));
            }
            Objective::Equity7 | Objective::Equity8 => {
                let z = outcome_vars(&mut aux, sc, n, weighting, w, d);
                let pairs = pair_vars(&mut aux, sc, n, &z);
                let mut terms = Vec::with_capacity(n);
                for i in 0..n {
                    let bounds = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| LinExpr::of(vec![(pairs[i][j], 1.0)]))
                        .collect();
                    let s = push_aux(
                        &mut aux,
                        AuxKind::NodeEpigraph {
                            scenario: sc,
                            node: i,
                        },
                        None,
                        bounds,
                    );
                    terms.push((s, 1.0));
                }
                scenario_objectives.push(LinExpr::of(terms));
            }
            Objective::LexCenter | Objective::OrderedMedian => unreachable!(),
        }
    }

    Ok(LinearModel {
        objective: spec.objective,
        n,
        p: instance.p(),
        scenario_count: scen.len(),
        aux,
        scenario_objectives,
    })
}

fn push_aux(
    aux: &mut Vec<AuxVar>,
    kind: AuxKind,
    equality: Option<LinExpr>,
    lower_bounds: Vec<LinExpr>,
) -> VarRef {
    aux.push(AuxVar {
        kind,
        equality,
        lower_bounds,
    });
    VarRef::Aux(aux.len() - 1)
}

/// z_i = sum_j cost(i,j) y_{i,j} as equality-defined auxiliaries.
fn outcome_vars(
    aux: &mut Vec<AuxVar>,
    sc: usize,
    n: usize,
    weighting: Weighting,
    w: &[f64],
    d: &[Vec<f64>],
) -> Vec<VarRef> {
    (0..n)
        .map(|i| {
            let terms = (0..n)
                .map(|j| (VarRef::Y(i, j), cost(weighting, w, d, i, j)))
                .collect();
            push_aux(
                aux,
                AuxKind::Outcome {
                    scenario: sc,
                    node: i,
                },
                Some(LinExpr::of(terms)),
                Vec::new(),
            )
        })
        .collect()
}

/// Ordered pair variables z_{i,j} >= +/-(z_i - z_j) for all i != j.
#[allow(clippy::needless_range_loop)]
fn pair_vars(aux: &mut Vec<AuxVar>, sc: usize, n: usize, z: &[VarRef]) -> Vec<Vec<VarRef>> {
    let mut pairs = vec![vec![VarRef::X(0); n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            pairs[i][j] = push_aux(
                aux,
                AuxKind::Pair { scenario: sc, i, j },
                None,
                vec![diff(z[i], z[j]), diff(z[j], z[i])],
            );
        }
    }
    pairs
}

fn diff(a: VarRef, b: VarRef) -> LinExpr {
    LinExpr::of(vec![(a, 1.0), (b, -1.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Node;
    use crate::models::AssignmentRule;
    use crate::scenarios::{GeneratorSpec, ScenarioSet};

    #[allow(clippy::needless_range_loop)]
    fn instance(n: usize) -> Instance {
        let nodes = (0..n)
            .map(|id| Node {
                id,
                name: format!("n{id}"),
                population: 10,
                coords: None,
            })
            .collect();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    d[i][j] = (3 + 5 * i + 7 * j) as f64;
                }
            }
        }
        Instance::from_parts(nodes, d, vec![2.0; n], vec![1.0; n], 1).unwrap()
    }

    #[test]
    fn p_center_structure() {
        let inst = instance(4);
        let spec = ModelSpec::new(Objective::PCenter);
        let det = ScenarioSet::degenerate(&inst);
        let m = linearized_form(&spec, &inst, &det).unwrap();
        assert_eq!(m.count_aux(|k| matches!(k, AuxKind::Epigraph { .. })), 1);
        assert_eq!(m.y_count(), 16);
        assert_eq!(m.constraint_rows(), 1 + 4 + 16);

        let saa = crate::scenarios::sample(&inst, &GeneratorSpec::set1(50, 9)).unwrap();
        let m50 = linearized_form(&spec, &inst, &saa).unwrap();
        assert_eq!(m50.count_aux(|k| matches!(k, AuxKind::Epigraph { .. })), 50);
        assert_eq!(m50.y_count(), 16); // y is shared across scenarios
    }

    #[test]
    fn equity1_pair_structure() {
        let inst = instance(3);
        let spec = ModelSpec::new(Objective::Equity1);
        let det = ScenarioSet::degenerate(&inst);
        let m = linearized_form(&spec, &inst, &det).unwrap();
        let pairs: Vec<&AuxVar> = m
            .aux
            .iter()
            .filter(|a| matches!(a.kind, AuxKind::Pair { .. }))
            .collect();
        assert_eq!(pairs.len(), 6);
        assert!(pairs.iter().all(|a| a.lower_bounds.len() == 2));
    }

    #[test]
    fn lex_center_unsupported() {
        let inst = instance(3);
        let det = ScenarioSet::degenerate(&inst);
        let spec = ModelSpec::new(Objective::LexCenter);
        assert!(matches!(
            linearized_form(&spec, &inst, &det),
            Err(ModelError::LinearizationUnsupported(Objective::LexCenter))
        ));
    }

    #[test]
    fn evaluate_matches_direct_objective() {
        use crate::models::{objective_value, outcomes, Assignment};
        let inst = instance(4);
        let det = ScenarioSet::degenerate(&inst);
        for objective in Objective::TABLE {
            let spec = ModelSpec::new(objective).with_rule(AssignmentRule::Free);
            let model = linearized_form(&spec, &inst, &det).unwrap();
            let assign = vec![2, 0, 0, 2];
            let a = Assignment::new(vec![0, 2], assign.clone(), 4).unwrap();
            let out = outcomes(&a, det.scenarios()[0].view(), objective.weighting()).unwrap();
            let direct = objective_value(&spec, &out).unwrap();
            assert_eq!(model.evaluate(&assign), direct, "{objective}");
        }
    }
}
