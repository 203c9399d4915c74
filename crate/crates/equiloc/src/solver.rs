//! Exact and heuristic optimization over the common feasible region.
//!
//! `enumerate_exact` visits every p-subset of candidate sites; for each it
//! solves the inner assignment problem (nearest-facility, or exact free
//! assignment by depth-first branch and bound) and keeps the global optimum
//! under a deterministic tie-break: lexicographically smallest sorted open
//! set, then smallest assignment vector. Subset evaluation parallelizes; the
//! reduction is a total order, so results do not depend on worker count.
//! `local_search` swaps one open facility at a time (first improvement,
//! seeded restarts) and flags its result as heuristic.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::metrics::OutcomeVector;
use crate::models::{
    check_beta_constraint, objective_on_slice, Assignment, AssignmentRule, ModelError, ModelSpec,
    Objective, Weighting,
};
use crate::rng::{domain, KeyedStream};
use crate::scenarios::{
    mean_outcomes, saa_objective, ScenarioError, ScenarioProvenance, ScenarioSet,
};

/// Exact enumeration refuses instances with more candidate subsets than this.
pub const ENUMERATION_GUARD: u128 = 1_000_000;

/// Relative slack for branch-and-bound pruning; keeps pruning admissible in
/// the presence of floating-point rounding without weakening exactness.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("{combinations} candidate subsets exceed the exact-enumeration guard of {limit}; use local_search")]
    GuardExceeded { combinations: u128, limit: u128 },
    #[error("no feasible solution: the beta constraint rejects every candidate subset")]
    Infeasible,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    EnumerateExact,
    LocalSearch,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Overrides the model's assignment rule when set.
    pub assignment_rule: Option<AssignmentRule>,
    pub time_limit: Option<Duration>,
    /// Restarts for local search (the first is a greedy construction).
    pub restarts: usize,
    /// Seed for local-search restart sampling.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: SolveMethod::EnumerateExact,
            assignment_rule: None,
            time_limit: None,
            restarts: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: SolveMethod,
    /// True for local-search results (no optimality certificate).
    pub heuristic: bool,
    /// True when a time limit cut enumeration short; the solution is the
    /// best incumbent, not a proven optimum.
    pub incumbent_only: bool,
    /// Generator seed when the scenarios were sampled.
    pub seed: Option<u64>,
    pub scenario_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub model: ModelSpec,
    pub assignment: Assignment,
    /// Objective value; for the lexicographic center this is the first
    /// (worst-outcome) component of the criterion vector.
    pub objective: f64,
    /// Scenario-averaged per-node outcomes under the model's weighting.
    pub per_node_outcomes: OutcomeVector,
    /// Full criterion vector for the lexicographic center.
    pub lex_criterion: Option<Vec<f64>>,
    pub provenance: Provenance,
}

impl Solution {
    pub fn open_set(&self) -> &[usize] {
        self.assignment.open_set()
    }
}

/// Ranking value of a candidate: a scalar for every objective except the
/// lexicographic center, which ranks by the scenario-averaged sorted
/// outcome vector.
#[derive(Debug, Clone, PartialEq)]
enum Criterion {
    Scalar(f64),
    Lex(Vec<f64>),
}

impl Criterion {
    fn cmp(&self, other: &Criterion) -> std::cmp::Ordering {
        match (self, other) {
            (Criterion::Scalar(a), Criterion::Scalar(b)) => a.total_cmp(b),
            (Criterion::Lex(a), Criterion::Lex(b)) => {
                for (x, y) in a.iter().zip(b) {
                    let c = x.total_cmp(y);
                    if c != std::cmp::Ordering::Equal {
                        return c;
                    }
                }
                a.len().cmp(&b.len())
            }
            _ => unreachable!("criterion kinds never mix within one solve"),
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    criterion: Criterion,
    assignment: Assignment,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        match self.criterion.cmp(&other.criterion) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => {
                match self.assignment.open_set().cmp(other.assignment.open_set()) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Greater => false,
                    std::cmp::Ordering::Equal => {
                        self.assignment.assign() < other.assignment.assign()
                    }
                }
            }
        }
    }
}

fn min_candidate(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.better_than(&x) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

struct SolveContext<'a> {
    spec: &'a ModelSpec,
    instance: &'a Instance,
    scen: &'a ScenarioSet,
    rule: AssignmentRule,
    mean_distance: Vec<Vec<f64>>,
    node_order: Vec<usize>,
    /// Wall-clock cutoff; the free-assignment search aborts to its incumbent
    /// past this point and raises `timed_out`.
    deadline: Option<Instant>,
    timed_out: std::sync::atomic::AtomicBool,
}

impl<'a> SolveContext<'a> {
    fn new(
        spec: &'a ModelSpec,
        instance: &'a Instance,
        scen: &'a ScenarioSet,
        rule: AssignmentRule,
        time_limit: Option<Duration>,
    ) -> Result<Self, SolveError> {
        let n = instance.len();
        if scen.is_empty() {
            return Err(ScenarioError::EmptyScenarioSet.into());
        }
        if scen.node_count() != n {
            return Err(SolveError::DimensionMismatch(format!(
                "scenario set covers {} nodes, instance has {n}",
                scen.node_count()
            )));
        }
        spec.validate_for(n)?;
        // Heavy-demand-first node order tightens free-assignment bounds early.
        let mut node_order: Vec<usize> = (0..n).collect();
        node_order.sort_by(|&a, &b| {
            instance.demand_mean()[b]
                .total_cmp(&instance.demand_mean()[a])
                .then(a.cmp(&b))
        });
        Ok(SolveContext {
            spec,
            instance,
            scen,
            rule,
            mean_distance: scen.mean_distance(),
            node_order,
            deadline: time_limit.map(|limit| Instant::now() + limit),
            timed_out: std::sync::atomic::AtomicBool::new(false),
        })
    }

    fn criterion_of(&self, a: &Assignment) -> Result<Criterion, SolveError> {
        if self.spec.objective == Objective::LexCenter {
            Ok(Criterion::Lex(self.lex_vector(a)?))
        } else {
            Ok(Criterion::Scalar(saa_objective(
                self.spec,
                a,
                self.scen,
                self.instance,
            )?))
        }
    }

    /// Component-wise scenario mean of descending-sorted outcome vectors:
    /// the SAA counterpart of "worst, then second worst, ...".
    fn lex_vector(&self, a: &Assignment) -> Result<Vec<f64>, SolveError> {
        let n = a.len();
        let mut acc = vec![0.0; n];
        for s in self.scen.scenarios() {
            let out = crate::models::outcomes(a, s.view(), Weighting::Unweighted)?;
            let mut z = out.vector.values().to_vec();
            z.sort_by(|a, b| b.total_cmp(a));
            for (slot, v) in acc.iter_mut().zip(&z) {
                *slot += v;
            }
        }
        let count = self.scen.len() as f64;
        for slot in acc.iter_mut() {
            *slot /= count;
        }
        Ok(acc)
    }

    /// Evaluate one open subset: inner assignment, criterion, beta filter.
    /// Returns Ok(None) when the beta constraint rejects the candidate.
    fn evaluate_subset(&self, open: &[usize]) -> Result<Option<Candidate>, SolveError> {
        let assignment = self.assign_inner(open)?;
        if let Some(beta) = self.spec.beta_constraint {
            let avg = mean_outcomes(&assignment, self.scen, self.spec.objective.weighting())?;
            if !check_beta_constraint(&avg, beta)? {
                return Ok(None);
            }
        }
        let criterion = self.criterion_of(&assignment)?;
        Ok(Some(Candidate {
            criterion,
            assignment,
        }))
    }

    fn assign_inner(&self, open: &[usize]) -> Result<Assignment, SolveError> {
        let n = self.instance.len();
        if open.len() == 1 {
            return Ok(Assignment::new(open.to_vec(), vec![open[0]; n], n)?);
        }
        match self.rule {
            AssignmentRule::Closest => self.closest_assignment(open),
            AssignmentRule::Free => self.branch_and_bound(open),
        }
    }

    /// Exact free assignment: depth-first search over nodes (heavy demand
    /// first), facilities tried in index order. Bounds combine the objective
    /// of the assigned prefix (every catalog objective is monotone under
    /// extending the outcome multiset) with interval completion bounds from
    /// the unassigned tail, where each node's eventual outcome lies between
    /// its cheapest and dearest open-facility cost. The incumbent is seeded
    /// with the closest assignment, which is always feasible here.
    fn branch_and_bound(&self, open: &[usize]) -> Result<Assignment, SolveError> {
        let n = self.instance.len();
        let scenario_count = self.scen.len();
        let mut assign = vec![usize::MAX; n];
        // Per-scenario outcome prefix in node_order.
        let mut prefix: Vec<Vec<f64>> = vec![Vec::with_capacity(n); scenario_count];
        let weighting = self.spec.objective.weighting();

        let seed_assignment = self.closest_assignment(open)?;
        let mut best = Some(Candidate {
            criterion: self.criterion_of(&seed_assignment)?,
            assignment: seed_assignment,
        });

        let completion = CompletionBound::new(self, open, weighting);

        struct Dfs<'c, 'a> {
            ctx: &'c SolveContext<'a>,
            open: &'c [usize],
            weighting: Weighting,
            n: usize,
            completion: CompletionBound,
            visits: std::cell::Cell<u64>,
            aborted: std::cell::Cell<bool>,
        }

        impl Dfs<'_, '_> {
            fn over_deadline(&self) -> bool {
                if self.aborted.get() {
                    return true;
                }
                let visits = self.visits.get() + 1;
                self.visits.set(visits);
                if visits.is_multiple_of(4096) {
                    if let Some(deadline) = self.ctx.deadline {
                        if Instant::now() > deadline {
                            self.aborted.set(true);
                            return true;
                        }
                    }
                }
                false
            }

            fn run(
                &self,
                depth: usize,
                assign: &mut Vec<usize>,
                prefix: &mut Vec<Vec<f64>>,
                best: &mut Option<Candidate>,
            ) -> Result<(), SolveError> {
                if self.over_deadline() {
                    return Ok(());
                }
                if depth == self.n {
                    let assignment = Assignment::new(self.open.to_vec(), assign.clone(), self.n)?;
                    let criterion = self.ctx.criterion_of(&assignment)?;
                    let candidate = Candidate {
                        criterion,
                        assignment,
                    };
                    let replace = match best {
                        None => true,
                        Some(b) => candidate.better_than(b),
                    };
                    if replace {
                        *best = Some(candidate);
                    }
                    return Ok(());
                }
                let node = self.ctx.node_order[depth];
                for &fac in self.open {
                    for (sc, scenario) in self.ctx.scen.scenarios().iter().enumerate() {
                        let d = scenario.distance[node][fac];
                        let z = match self.weighting {
                            Weighting::Unweighted => d,
                            Weighting::DemandWeighted => scenario.demand[node] * d,
                        };
                        prefix[sc].push(z);
                    }
                    assign[node] = fac;
                    if !self.prunable(depth + 1, prefix, best) {
                        self.run(depth + 1, assign, prefix, best)?;
                    }
                    assign[node] = usize::MAX;
                    for p in prefix.iter_mut() {
                        p.pop();
                    }
                }
                Ok(())
            }

            fn prunable(
                &self,
                depth: usize,
                prefix: &[Vec<f64>],
                best: &Option<Candidate>,
            ) -> bool {
                let Some(best) = best else { return false };
                match &best.criterion {
                    Criterion::Scalar(incumbent) => {
                        let mut total = 0.0;
                        for (sc, p) in prefix.iter().enumerate() {
                            total += self.completion.scenario_bound(
                                self.ctx.spec.objective,
                                self.ctx.spec.ordered_weights.as_deref(),
                                p,
                                sc,
                                depth,
                            );
                        }
                        let bound = total / prefix.len() as f64;
                        bound > incumbent + BOUND_SLACK * (1.0 + incumbent.abs())
                    }
                    Criterion::Lex(incumbent) => {
                        // Component-wise mean of sorted (prefix + tail-lows)
                        // vectors; each component is a lower bound of the
                        // final sorted outcome at that rank.
                        let mut bound = vec![0.0; self.n];
                        let mut merged = Vec::with_capacity(self.n);
                        for (sc, p) in prefix.iter().enumerate() {
                            merged.clear();
                            merged.extend_from_slice(p);
                            merged.extend_from_slice(&self.completion.lo[sc][depth..]);
                            merged.sort_by(|a, b| b.total_cmp(a));
                            for (slot, v) in bound.iter_mut().zip(&merged) {
                                *slot += v;
                            }
                        }
                        let count = prefix.len() as f64;
                        for slot in bound.iter_mut() {
                            *slot /= count;
                        }
                        for (b, inc) in bound.iter().zip(incumbent) {
                            let slack = BOUND_SLACK * (1.0 + inc.abs());
                            if *b > inc + slack {
                                return true;
                            }
                            if *b < inc - slack {
                                return false;
                            }
                        }
                        false
                    }
                }
            }
        }

        let dfs = Dfs {
            ctx: self,
            open,
            weighting,
            n,
            completion,
            visits: std::cell::Cell::new(0),
            aborted: std::cell::Cell::new(false),
        };
        dfs.run(0, &mut assign, &mut prefix, &mut best)?;
        if dfs.aborted.get() {
            self.timed_out
                .store(true, std::sync::atomic::Ordering::Relaxed);
        }
        Ok(best
            .expect("the incumbent is seeded before the search")
            .assignment)
    }

    fn closest_assignment(&self, open: &[usize]) -> Result<Assignment, SolveError> {
        let n = self.instance.len();
        let mut assign = Vec::with_capacity(n);
        for i in 0..n {
            let mut best = open[0];
            let mut best_d = self.mean_distance[i][open[0]];
            for &j in &open[1..] {
                let d = self.mean_distance[i][j];
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            assign.push(best);
        }
        Ok(Assignment::new(open.to_vec(), assign, n)?)
    }
}

/// Interval completion bounds for the unassigned tail of a free-assignment
/// search: node u's eventual outcome lies in [lo_u, hi_u], its cheapest and
/// dearest open-facility cost. Every bound below is a provable lower bound
/// of any completion's objective, so pruning stays admissible.
struct CompletionBound {
    /// `lo[sc][pos]` / `hi[sc][pos]`: cost interval of the node at DFS
    /// position `pos` under scenario `sc`.
    lo: Vec<Vec<f64>>,
    hi: Vec<Vec<f64>>,
    /// Suffix aggregates over positions >= depth.
    sfx_sum_lo: Vec<Vec<f64>>,
    sfx_max_lo: Vec<Vec<f64>>,
    sfx_min_hi: Vec<Vec<f64>>,
}

/// Distance from `z` to the interval [lo, hi]; a lower bound on |z - z_u|
/// for any eventual outcome z_u of the tail node.
#[inline]
fn interval_gap(z: f64, lo: f64, hi: f64) -> f64 {
    if z < lo {
        lo - z
    } else if z > hi {
        z - hi
    } else {
        0.0
    }
}

impl CompletionBound {
    fn new(ctx: &SolveContext<'_>, open: &[usize], weighting: Weighting) -> Self {
        let n = ctx.instance.len();
        let scenario_count = ctx.scen.len();
        let mut lo = Vec::with_capacity(scenario_count);
        let mut hi = Vec::with_capacity(scenario_count);
        let mut sfx_sum_lo = Vec::with_capacity(scenario_count);
        let mut sfx_max_lo = Vec::with_capacity(scenario_count);
        let mut sfx_min_hi = Vec::with_capacity(scenario_count);
        for scenario in ctx.scen.scenarios() {
            let mut lo_sc = Vec::with_capacity(n);
            let mut hi_sc = Vec::with_capacity(n);
            for pos in 0..n {
                let node = ctx.node_order[pos];
                let mut cheapest = f64::INFINITY;
                let mut dearest = f64::NEG_INFINITY;
                for &fac in open {
                    let d = scenario.distance[node][fac];
                    let cost = match weighting {
                        Weighting::Unweighted => d,
                        Weighting::DemandWeighted => scenario.demand[node] * d,
                    };
                    cheapest = cheapest.min(cost);
                    dearest = dearest.max(cost);
                }
                lo_sc.push(cheapest);
                hi_sc.push(dearest);
            }
            let mut sum_lo = vec![0.0; n + 1];
            let mut max_lo = vec![f64::NEG_INFINITY; n + 1];
            let mut min_hi = vec![f64::INFINITY; n + 1];
            for pos in (0..n).rev() {
                sum_lo[pos] = sum_lo[pos + 1] + lo_sc[pos];
                max_lo[pos] = max_lo[pos + 1].max(lo_sc[pos]);
                min_hi[pos] = min_hi[pos + 1].min(hi_sc[pos]);
            }
            lo.push(lo_sc);
            hi.push(hi_sc);
            sfx_sum_lo.push(sum_lo);
            sfx_max_lo.push(max_lo);
            sfx_min_hi.push(min_hi);
        }
        CompletionBound {
            lo,
            hi,
            sfx_sum_lo,
            sfx_max_lo,
            sfx_min_hi,
        }
    }

    /// Lower bound of the scenario objective over all completions of the
    /// assigned prefix (positions 0..depth).
    fn scenario_bound(
        &self,
        objective: Objective,
        ordered_weights: Option<&[f64]>,
        prefix: &[f64],
        sc: usize,
        depth: usize,
    ) -> f64 {
        let lo = &self.lo[sc];
        let hi = &self.hi[sc];
        let tail = depth..lo.len();
        match objective {
            Objective::PMedian | Objective::TotalDistance => {
                prefix.iter().sum::<f64>() + self.sfx_sum_lo[sc][depth]
            }
            Objective::PCenter | Objective::LexCenter => {
                let pmax = prefix.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                pmax.max(self.sfx_max_lo[sc][depth])
            }
            Objective::Equity2 | Objective::Equity4 => {
                // Final max >= every tail low; final min <= every tail high.
                let pmax = prefix.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let pmin = prefix.iter().copied().fold(f64::INFINITY, f64::min);
                let top = pmax.max(self.sfx_max_lo[sc][depth]);
                let bottom = pmin.min(self.sfx_min_hi[sc][depth]);
                top - bottom
            }
            Objective::Equity1 | Objective::Equity3 => {
                // Prefix pairs plus, per tail node, twice its interval gap to
                // every assigned outcome (tail-tail pairs are dropped).
                let mut bound = objective_on_slice(Objective::Equity1, prefix, None);
                for pos in tail {
                    let mut add = 0.0;
                    for &z in prefix {
                        add += interval_gap(z, lo[pos], hi[pos]);
                    }
                    bound += 2.0 * add;
                }
                bound
            }
            Objective::Equity5 | Objective::Equity6 => {
                // Each assigned row sum grows by at least the interval gaps.
                let mut best = 0.0f64;
                for &zi in prefix {
                    let mut row = 0.0;
                    for &zj in prefix {
                        row += (zi - zj).abs();
                    }
                    for pos in tail.clone() {
                        row += interval_gap(zi, lo[pos], hi[pos]);
                    }
                    best = best.max(row);
                }
                best
            }
            Objective::Equity7 | Objective::Equity8 => {
                // Per assigned node: its row max over prefix and tail
                // intervals; tail rows are dropped.
                let pmax = prefix.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let pmin = prefix.iter().copied().fold(f64::INFINITY, f64::min);
                let mut total = 0.0;
                for &zi in prefix {
                    let mut m = (pmax - zi).max(zi - pmin);
                    for pos in tail.clone() {
                        m = m.max(interval_gap(zi, lo[pos], hi[pos]));
                    }
                    total += m;
                }
                total
            }
            Objective::OrderedMedian => {
                // Sorted completion dominates sorted (prefix + tail lows)
                // rank by rank, and the rank weights are non-negative.
                let mut merged = Vec::with_capacity(lo.len());
                merged.extend_from_slice(prefix);
                merged.extend_from_slice(&lo[depth..]);
                merged.sort_by(|a, b| b.total_cmp(a));
                objective_on_slice(Objective::OrderedMedian, &merged, ordered_weights)
            }
        }
    }
}

fn binomial_capped(n: usize, k: usize, cap: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
        if acc > cap.saturating_mul(1000) {
            return None;
        }
    }
    Some(acc)
}

fn all_subsets(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut subsets = Vec::new();
    let mut current: Vec<usize> = (0..p).collect();
    loop {
        subsets.push(current.clone());
        // Advance to the next combination in lexicographic order.
        let mut i = p;
        loop {
            if i == 0 {
                return subsets;
            }
            i -= 1;
            if current[i] != i + n - p {
                break;
            }
            if i == 0 {
                return subsets;
            }
        }
        current[i] += 1;
        for j in (i + 1)..p {
            current[j] = current[j - 1] + 1;
        }
    }
}

fn build_solution(
    ctx: &SolveContext<'_>,
    candidate: Candidate,
    method: SolveMethod,
    heuristic: bool,
    incumbent_only: bool,
) -> Result<Solution, SolveError> {
    let per_node = mean_outcomes(
        &candidate.assignment,
        ctx.scen,
        ctx.spec.objective.weighting(),
    )?;
    let seed = match ctx.scen.provenance() {
        ScenarioProvenance::Generated { generator } => Some(generator.seed),
        _ => None,
    };
    let (objective, lex_criterion) = match &candidate.criterion {
        Criterion::Scalar(v) => (*v, None),
        Criterion::Lex(v) => (v[0], Some(v.clone())),
    };
    Ok(Solution {
        model: ctx.spec.clone(),
        assignment: candidate.assignment,
        objective,
        per_node_outcomes: per_node,
        lex_criterion,
        provenance: Provenance {
            method,
            heuristic,
            incumbent_only,
            seed,
            scenario_hash: ctx.scen.content_hash().to_string(),
        },
    })
}

/// Optimize the model over every p-subset (exact) or by swap local search.
pub fn solve(
    spec: &ModelSpec,
    instance: &Instance,
    scen: &ScenarioSet,
    opts: &SolveOptions,
) -> Result<Solution, SolveError> {
    let rule = opts.assignment_rule.unwrap_or(spec.assignment_rule);
    let ctx = SolveContext::new(spec, instance, scen, rule, opts.time_limit)?;
    match opts.method {
        SolveMethod::EnumerateExact => enumerate_exact(&ctx, opts),
        SolveMethod::LocalSearch => local_search(&ctx, opts),
    }
}

fn enumerate_exact(ctx: &SolveContext<'_>, opts: &SolveOptions) -> Result<Solution, SolveError> {
    let n = ctx.instance.len();
    let p = ctx.instance.p();
    match binomial_capped(n, p, ENUMERATION_GUARD) {
        Some(c) if c <= ENUMERATION_GUARD => {}
        Some(c) => {
            return Err(SolveError::GuardExceeded {
                combinations: c,
                limit: ENUMERATION_GUARD,
            })
        }
        None => {
            return Err(SolveError::GuardExceeded {
                combinations: u128::MAX,
                limit: ENUMERATION_GUARD,
            })
        }
    }
    let subsets = all_subsets(n, p);
    let start = Instant::now();
    let mut best: Option<Candidate> = None;
    let mut incumbent_only = false;
    let chunk = 64;
    for block in subsets.chunks(chunk) {
        let block_best: Option<Candidate> = block
            .par_iter()
            .map(|open| ctx.evaluate_subset(open))
            .try_reduce(|| None, |a, b| Ok(min_candidate(a, b)))?;
        best = min_candidate(best, block_best);
        if let Some(limit) = opts.time_limit {
            if start.elapsed() > limit {
                incumbent_only = true;
                break;
            }
        }
    }
    let incumbent_only = incumbent_only || ctx.timed_out.load(std::sync::atomic::Ordering::Relaxed);
    match best {
        Some(candidate) => build_solution(
            ctx,
            candidate,
            SolveMethod::EnumerateExact,
            false,
            incumbent_only,
        ),
        None => Err(SolveError::Infeasible),
    }
}

fn local_search(ctx: &SolveContext<'_>, opts: &SolveOptions) -> Result<Solution, SolveError> {
    let n = ctx.instance.len();
    let p = ctx.instance.p();
    let start = Instant::now();
    let mut best: Option<Candidate> = None;
    let mut incumbent_only = false;

    let restarts = opts.restarts.max(1);
    'restart: for restart in 0..restarts {
        let mut open = if restart == 0 {
            greedy_seed(ctx)?
        } else {
            random_subset(n, p, opts.seed, restart as u64)
        };
        let mut current = ctx.evaluate_subset(&open)?;
        loop {
            if let Some(limit) = opts.time_limit {
                if start.elapsed() > limit {
                    incumbent_only = true;
                    best = min_candidate(best, current);
                    break 'restart;
                }
            }
            let mut improved = false;
            'swap: for out_pos in 0..p {
                for candidate_site in 0..n {
                    if open.contains(&candidate_site) {
                        continue;
                    }
                    let mut trial = open.clone();
                    trial[out_pos] = candidate_site;
                    trial.sort_unstable();
                    let trial_cand = ctx.evaluate_subset(&trial)?;
                    let accept = match (&trial_cand, &current) {
                        (Some(t), Some(c)) => {
                            t.criterion.cmp(&c.criterion) == std::cmp::Ordering::Less
                        }
                        (Some(_), None) => true,
                        _ => false,
                    };
                    if accept {
                        open = trial;
                        current = trial_cand;
                        improved = true;
                        break 'swap;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        best = min_candidate(best, current);
    }

    let incumbent_only = incumbent_only || ctx.timed_out.load(std::sync::atomic::Ordering::Relaxed);
    match best {
        Some(candidate) => build_solution(
            ctx,
            candidate,
            SolveMethod::LocalSearch,
            true,
            incumbent_only,
        ),
        None => Err(SolveError::Infeasible),
    }
}

/// Greedy construction: add the facility that best improves the criterion,
/// assigning by nearest mean distance while the set is partial.
fn greedy_seed(ctx: &SolveContext<'_>) -> Result<Vec<usize>, SolveError> {
    let n = ctx.instance.len();
    let p = ctx.instance.p();
    let mut open: Vec<usize> = Vec::with_capacity(p);
    for _ in 0..p {
        let mut best_site = None;
        for site in 0..n {
            if open.contains(&site) {
                continue;
            }
            let mut trial = open.clone();
            trial.push(site);
            trial.sort_unstable();
            let assignment = ctx.closest_assignment(&trial)?;
            let criterion = ctx.criterion_of(&assignment)?;
            let better = match &best_site {
                None => true,
                Some((_, inc)) => criterion.cmp(inc) == std::cmp::Ordering::Less,
            };
            if better {
                best_site = Some((site, criterion));
            }
        }
        open.push(best_site.expect("at least one candidate site").0);
        open.sort_unstable();
    }
    Ok(open)
}

fn random_subset(n: usize, p: usize, seed: u64, restart: u64) -> Vec<usize> {
    let mut stream = KeyedStream::new(&[seed, domain::LOCAL_SEARCH, restart]);
    let mut pool: Vec<usize> = (0..n).collect();
    let mut subset = Vec::with_capacity(p);
    for _ in 0..p {
        let idx = stream.next_index(pool.len());
        subset.push(pool.swap_remove(idx));
    }
    subset.sort_unstable();
    subset
}

/// Exact free-rule inner assignment for one open set (public surface of the
/// branch-and-bound; `solve` uses it internally per subset).
pub fn inner_assignment(
    spec: &ModelSpec,
    open_set: &[usize],
    scen: &ScenarioSet,
    instance: &Instance,
    rule: AssignmentRule,
) -> Result<Assignment, SolveError> {
    let mut open = open_set.to_vec();
    open.sort_unstable();
    open.dedup();
    if open.is_empty() || open.last().copied().unwrap_or(0) >= instance.len() {
        return Err(SolveError::DimensionMismatch(
            "open set invalid for instance".into(),
        ));
    }
    let ctx = SolveContext::new(spec, instance, scen, rule, None)?;
    ctx.assign_inner(&open)
}

/// Minimize the worst scenario-averaged outcome, then
/// the second worst, and so on. Equals the p-center optimum on the first
/// component.
pub fn lexicographic_minimax(
    instance: &Instance,
    scen: &ScenarioSet,
    opts: &SolveOptions,
) -> Result<Solution, SolveError> {
    let spec = ModelSpec::new(Objective::LexCenter);
    solve(&spec, instance, scen, opts)
}
