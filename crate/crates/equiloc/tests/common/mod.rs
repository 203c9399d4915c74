//! Shared test oracle: an independent brute-force route to every catalog
//! objective, written directly from the double-sum definitions. Nothing here
//! touches the production evaluation path (`objective_value`, the solver, or
//! the linearizer); the suites compare the two routes for exact agreement.

// Each test target uses a different subset of these helpers.
#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use equiloc::instance::{Instance, Node};
use equiloc::scenarios::ScenarioSet;

/// Tiny deterministic generator for test data (SplitMix64 step).
pub struct TestRng(pub u64);

impl TestRng {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn index(&mut self, bound: usize) -> usize {
        (self.next_u64() % bound as u64) as usize
    }

    /// Dyadic value in [lo/8, hi/8] so float arithmetic stays clean.
    pub fn dyadic(&mut self, lo: u64, hi: u64) -> f64 {
        (lo + self.next_u64() % (hi - lo + 1)) as f64 / 8.0
    }
}

/// Random instance with positive demand means and strictly positive
/// off-diagonal travel times.
pub fn random_instance(rng: &mut TestRng, n: usize, p: usize) -> Instance {
    let nodes: Vec<Node> = (0..n)
        .map(|id| Node {
            id,
            name: format!("n{id}"),
            population: 1 + rng.next_u64() % 1000,
            coords: None,
        })
        .collect();
    let mut distance = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                distance[i][j] = rng.dyadic(1, 400);
            }
        }
    }
    let demand_mean: Vec<f64> = (0..n).map(|_| rng.dyadic(1, 100)).collect();
    let demand_std: Vec<f64> = demand_mean.iter().map(|m| 0.5 * m).collect();
    Instance::from_parts(nodes, distance, demand_mean, demand_std, p).unwrap()
}

/// Objective names in catalog order.
pub const TABLE_MODELS: [&str; 11] = [
    "p-median",
    "p-center",
    "total-distance",
    "equity-1",
    "equity-2",
    "equity-3",
    "equity-4",
    "equity-5",
    "equity-6",
    "equity-7",
    "equity-8",
];

/// Direct transliteration of one model's objective on a single scenario.
/// `zs` are plain travel times d[i][a_i]; `zw` are w_i * d[i][a_i].
pub fn naive_scenario_objective(
    model: &str,
    zs: &[f64],
    zw: &[f64],
    ordered_weights: Option<&[f64]>,
) -> f64 {
    let sum_pairwise = |z: &[f64]| {
        let mut acc = 0.0;
        for i in 0..z.len() {
            for j in 0..z.len() {
                if i != j {
                    acc += (z[i] - z[j]).abs();
                }
            }
        }
        acc
    };
    let max_pairwise = |z: &[f64]| {
        let mut best = 0.0f64;
        for i in 0..z.len() {
            for j in 0..z.len() {
                best = best.max((z[i] - z[j]).abs());
            }
        }
        best
    };
    let max_row_sum = |z: &[f64]| {
        let mut best = 0.0f64;
        for i in 0..z.len() {
            let mut row = 0.0;
            for j in 0..z.len() {
                row += (z[i] - z[j]).abs();
            }
            best = best.max(row);
        }
        best
    };
    let sum_row_max = |z: &[f64]| {
        let mut acc = 0.0;
        for i in 0..z.len() {
            let mut best = 0.0f64;
            for j in 0..z.len() {
                best = best.max((z[i] - z[j]).abs());
            }
            acc += best;
        }
        acc
    };
    match model {
        "p-median" => zw.iter().sum(),
        "p-center" => zs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "total-distance" => zs.iter().sum(),
        "equity-1" => sum_pairwise(zs),
        "equity-2" => max_pairwise(zs),
        "equity-3" => sum_pairwise(zw),
        "equity-4" => max_pairwise(zw),
        "equity-5" => max_row_sum(zs),
        "equity-6" => max_row_sum(zw),
        "equity-7" => sum_row_max(zs),
        "equity-8" => sum_row_max(zw),
        "ordered-median" => {
            let weights = ordered_weights.expect("ordered-median needs weights");
            let mut sorted = zs.to_vec();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            sorted.iter().zip(weights).map(|(z, w)| w * z).sum()
        }
        other => panic!("unknown model {other}"),
    }
}

/// Sample average of the naive objective over the scenario set for a fixed
/// (open set implied by) assignment.
pub fn naive_saa_objective(
    model: &str,
    assign: &[usize],
    scen: &ScenarioSet,
    ordered_weights: Option<&[f64]>,
) -> f64 {
    let n = assign.len();
    let mut total = 0.0;
    for s in scen.scenarios() {
        let mut zs = Vec::with_capacity(n);
        let mut zw = Vec::with_capacity(n);
        for i in 0..n {
            let d = s.distance[i][assign[i]];
            zs.push(d);
            zw.push(s.demand[i] * d);
        }
        total += naive_scenario_objective(model, &zs, &zw, ordered_weights);
    }
    total / scen.len() as f64
}

/// Scenario-mean of descending-sorted outcome vectors (the lexicographic
/// center criterion), built independently.
pub fn naive_lex_vector(assign: &[usize], scen: &ScenarioSet) -> Vec<f64> {
    let n = assign.len();
    let mut acc = vec![0.0; n];
    for s in scen.scenarios() {
        let mut z: Vec<f64> = (0..n).map(|i| s.distance[i][assign[i]]).collect();
        z.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (slot, v) in acc.iter_mut().zip(&z) {
            *slot += v;
        }
    }
    for slot in acc.iter_mut() {
        *slot /= scen.len() as f64;
    }
    acc
}

/// All p-subsets of 0..n, independently generated (bitmask filter).
pub fn all_subsets(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == p {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

/// Every assignment of n nodes to the open facilities (counting in base
/// |open|).
pub fn for_each_assignment(n: usize, open: &[usize], mut f: impl FnMut(&[usize])) {
    let k = open.len();
    let mut digits = vec![0usize; n];
    let mut assign = vec![open[0]; n];
    loop {
        f(&assign);
        let mut pos = 0;
        loop {
            if pos == n {
                return;
            }
            digits[pos] += 1;
            if digits[pos] < k {
                assign[pos] = open[digits[pos]];
                break;
            }
            digits[pos] = 0;
            assign[pos] = open[0];
            pos += 1;
        }
    }
}

/// Exhaustive minimum of the naive SAA objective over every (open set,
/// assignment) pair. Returns the best value found.
pub fn brute_force_minimum(
    model: &str,
    n: usize,
    p: usize,
    scen: &ScenarioSet,
    ordered_weights: Option<&[f64]>,
) -> f64 {
    let mut best = f64::INFINITY;
    for open in all_subsets(n, p) {
        for_each_assignment(n, &open, |assign| {
            let value = naive_saa_objective(model, assign, scen, ordered_weights);
            if value < best {
                best = value;
            }
        });
    }
    best
}

/// Exhaustive lexicographic minimum of the sorted-outcome criterion.
pub fn brute_force_lex_minimum(n: usize, p: usize, scen: &ScenarioSet) -> Vec<f64> {
    let mut best: Option<Vec<f64>> = None;
    for open in all_subsets(n, p) {
        for_each_assignment(n, &open, |assign| {
            let vec = naive_lex_vector(assign, scen);
            let better = match &best {
                None => true,
                Some(b) => {
                    vec.iter().zip(b.iter()).find_map(|(x, y)| {
                        if x < y {
                            Some(true)
                        } else if x > y {
                            Some(false)
                        } else {
                            None
                        }
                    }) == Some(true)
                }
            };
            if better {
                best = Some(vec);
            }
        });
    }
    best.expect("at least one candidate")
}
