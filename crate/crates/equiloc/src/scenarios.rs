//! Scenario generation and sample-average assembly.
//!
//! Two named recipes are built in: Set 1 draws demand lognormally and travel
//! times uniformly within +/- 10 minutes of the mean; Set 2 draws both
//! lognormally with the travel-time standard deviation equal to its mean.
//! Generation is a pure function of (seed, instance fingerprint, generator):
//! every (node, pair, scenario) site has its own counter-based substream, so
//! growing N never perturbs earlier draws and all models evaluated against
//! one [`ScenarioSet`] share common random numbers.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::instance::{hex_digest, Instance};
use crate::metrics::OutcomeVector;
use crate::models::{
    objective_value, outcomes, Assignment, ModelError, ModelSpec, ScenarioView, Weighting,
};
use crate::rng::{domain, KeyedStream};

/// Uniform travel-time draws are clamped below at this many minutes so the
/// non-negativity invariant survives means smaller than the half-width.
pub const MIN_TRAVEL_MINUTES: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario set is empty")]
    EmptyScenarioSet,
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("node {0} needs a positive demand mean for lognormal sampling")]
    NonPositiveDemandMean(usize),
    #[error("pair ({0},{1}) has zero mean travel time; lognormal distances need positive means")]
    ZeroDistanceMean(usize, usize),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bundle parse error: {0}")]
    Parse(String),
    #[error("bundle hash mismatch: manifest says {expected}, data hashes to {actual}")]
    HashMismatch { expected: String, actual: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn io_err(path: &Path, source: std::io::Error) -> ScenarioError {
    ScenarioError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum DemandDist {
    /// Lognormal with per-node arithmetic mean/std from the instance.
    Lognormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum DistanceDist {
    /// Uniform on [mean - delta, mean + delta] minutes, clamped below.
    Uniform { delta: f64 },
    /// Lognormal with std = sigma_factor x mean per pair.
    Lognormal { sigma_factor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub demand: DemandDist,
    pub distance: DistanceDist,
    pub n_scenarios: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Set 1: lognormal demand, uniform travel times with delta = 10 minutes.
    pub fn set1(n_scenarios: usize, seed: u64) -> Self {
        GeneratorSpec {
            demand: DemandDist::Lognormal,
            distance: DistanceDist::Uniform { delta: 10.0 },
            n_scenarios,
            seed,
        }
    }

    /// Set 2: lognormal demand, lognormal travel times with std = mean.
    pub fn set2(n_scenarios: usize, seed: u64) -> Self {
        GeneratorSpec {
            demand: DemandDist::Lognormal,
            distance: DistanceDist::Lognormal { sigma_factor: 1.0 },
            n_scenarios,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_scenarios == 0 {
            return Err(ScenarioError::InvalidGenerator(
                "N must be at least 1".into(),
            ));
        }
        match self.distance {
            DistanceDist::Uniform { delta } if delta.is_nan() || delta < 0.0 => Err(
                ScenarioError::InvalidGenerator(format!("delta {delta} must be non-negative")),
            ),
            DistanceDist::Lognormal { sigma_factor }
                if sigma_factor.is_nan() || sigma_factor < 0.0 =>
            {
                Err(ScenarioError::InvalidGenerator(format!(
                    "sigma factor {sigma_factor} must be non-negative"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Where a scenario set came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum ScenarioProvenance {
    Generated {
        generator: GeneratorSpec,
    },
    /// Single scenario equal to the instance means (the det-mean mode).
    DegenerateMean,
    /// Hand-built set (tests, external data).
    External,
}

/// One realization of demand and travel times.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub demand: Vec<f64>,
    pub distance: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn view(&self) -> ScenarioView<'_> {
        ScenarioView {
            demand: &self.demand,
            distance: &self.distance,
        }
    }
}

/// N sampled realizations plus generator provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    scenarios: Vec<Scenario>,
    provenance: ScenarioProvenance,
    instance_fingerprint: String,
    clamped_draws: usize,
    content_hash: String,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn provenance(&self) -> &ScenarioProvenance {
        &self.provenance
    }

    pub fn instance_fingerprint(&self) -> &str {
        &self.instance_fingerprint
    }

    /// How many uniform travel-time draws hit the lower clamp.
    pub fn clamped_draws(&self) -> usize {
        self.clamped_draws
    }

    /// Hash over all scenario data; the bundle manifest must match it.
    pub fn content_hash(&self) -> &str {
        &self.content_hash
    }

    pub fn node_count(&self) -> usize {
        self.scenarios.first().map_or(0, |s| s.demand.len())
    }

    /// Single scenario holding the instance means exactly.
    pub fn degenerate(instance: &Instance) -> Self {
        let scenario = Scenario {
            demand: instance.demand_mean().to_vec(),
            distance: instance.distance().to_vec(),
        };
        Self::assemble(
            vec![scenario],
            ScenarioProvenance::DegenerateMean,
            instance.fingerprint().to_string(),
            0,
        )
    }

    /// Wrap explicit scenarios (validated) without generator provenance.
    pub fn from_scenarios(
        scenarios: Vec<Scenario>,
        instance: &Instance,
    ) -> Result<Self, ScenarioError> {
        if scenarios.is_empty() {
            return Err(ScenarioError::EmptyScenarioSet);
        }
        let n = instance.len();
        for (idx, s) in scenarios.iter().enumerate() {
            validate_scenario(s, n)
                .map_err(|e| ScenarioError::DimensionMismatch(format!("scenario {idx}: {e}")))?;
        }
        Ok(Self::assemble(
            scenarios,
            ScenarioProvenance::External,
            instance.fingerprint().to_string(),
            0,
        ))
    }

    fn assemble(
        scenarios: Vec<Scenario>,
        provenance: ScenarioProvenance,
        instance_fingerprint: String,
        clamped_draws: usize,
    ) -> Self {
        let content_hash = hash_scenarios(&scenarios);
        ScenarioSet {
            scenarios,
            provenance,
            instance_fingerprint,
            clamped_draws,
            content_hash,
        }
    }

    /// Per-pair mean travel time over scenarios; the closest rule assigns by
    /// this matrix.
    #[allow(clippy::needless_range_loop)]
    pub fn mean_distance(&self) -> Vec<Vec<f64>> {
        let n = self.node_count();
        let count = self.scenarios.len() as f64;
        let mut mean = vec![vec![0.0; n]; n];
        for s in &self.scenarios {
            for i in 0..n {
                for j in 0..n {
                    mean[i][j] += s.distance[i][j];
                }
            }
        }
        for row in &mut mean {
            for v in row.iter_mut() {
                *v /= count;
            }
        }
        mean
    }
}

fn validate_scenario(s: &Scenario, n: usize) -> Result<(), String> {
    if s.demand.len() != n {
        return Err(format!(
            "demand has {} entries, expected {n}",
            s.demand.len()
        ));
    }
    if s.distance.len() != n {
        return Err(format!(
            "distance has {} rows, expected {n}",
            s.distance.len()
        ));
    }
    for (i, row) in s.distance.iter().enumerate() {
        if row.len() != n {
            return Err(format!(
                "distance row {i} has {} entries, expected {n}",
                row.len()
            ));
        }
        for (j, &d) in row.iter().enumerate() {
            if !d.is_finite() || d < 0.0 {
                return Err(format!(
                    "distance ({i},{j}) = {d} must be finite and non-negative"
                ));
            }
        }
        if s.distance[i][i] != 0.0 {
            return Err(format!("diagonal ({i},{i}) must be 0"));
        }
    }
    if let Some((i, &w)) = s
        .demand
        .iter()
        .enumerate()
        .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
    {
        return Err(format!(
            "demand at node {i} = {w} must be finite and non-negative"
        ));
    }
    Ok(())
}

fn hash_scenarios(scenarios: &[Scenario]) -> String {
    let mut h = Sha256::new();
    h.update(b"equiloc-scenarios-v1");
    h.update((scenarios.len() as u64).to_le_bytes());
    for s in scenarios {
        for &w in &s.demand {
            h.update(w.to_bits().to_le_bytes());
        }
        for row in &s.distance {
            for &d in row {
                h.update(d.to_bits().to_le_bytes());
            }
        }
    }
    hex_digest(&h.finalize())
}

/// Convert an arithmetic mean/std pair to lognormal (location, shape):
/// shape^2 = ln(1 + std^2/mean^2), location = ln(mean) - shape^2/2, so the
/// variate's arithmetic mean and std are exactly the requested ones.
pub fn lognormal_from_mean_std(mean: f64, std: f64) -> Result<(f64, f64), ScenarioError> {
    if mean.is_nan() || mean <= 0.0 {
        return Err(ScenarioError::InvalidGenerator(format!(
            "lognormal mean {mean} must be positive"
        )));
    }
    if std.is_nan() || std < 0.0 {
        return Err(ScenarioError::InvalidGenerator(format!(
            "lognormal std {std} must be non-negative"
        )));
    }
    let shape_sq = (1.0 + (std * std) / (mean * mean)).ln();
    let shape = shape_sq.sqrt();
    let location = mean.ln() - shape_sq / 2.0;
    Ok((location, shape))
}

fn fingerprint_key(fingerprint: &str) -> u64 {
    crate::rng::fnv1a(fingerprint.as_bytes())
}

/// Draw `gen.n_scenarios` independent realizations of demand and travel
/// times. Deterministic in (seed, instance fingerprint, generator).
#[allow(clippy::needless_range_loop)]
pub fn sample(instance: &Instance, gen: &GeneratorSpec) -> Result<ScenarioSet, ScenarioError> {
    gen.validate()?;
    let n = instance.len();
    let mu_w = instance.demand_mean();
    let sigma_w = instance.demand_std();
    let mu_d = instance.distance();

    // Pre-validate lognormal feasibility so failures name the culprit
    // instead of surfacing mid-sample.
    for i in 0..n {
        if sigma_w[i] > 0.0 && mu_w[i] <= 0.0 {
            return Err(ScenarioError::NonPositiveDemandMean(i));
        }
    }
    if let DistanceDist::Lognormal { .. } = gen.distance {
        for i in 0..n {
            for j in 0..n {
                if i != j && mu_d[i][j] <= 0.0 {
                    return Err(ScenarioError::ZeroDistanceMean(i, j));
                }
            }
        }
    }

    let fp = fingerprint_key(instance.fingerprint());
    let mut clamped = 0usize;
    let mut scenarios = Vec::with_capacity(gen.n_scenarios);
    for sc in 0..gen.n_scenarios {
        let mut demand = Vec::with_capacity(n);
        for i in 0..n {
            let w = match gen.demand {
                DemandDist::Lognormal => {
                    if sigma_w[i] == 0.0 {
                        mu_w[i]
                    } else {
                        let (loc, shape) = lognormal_from_mean_std(mu_w[i], sigma_w[i])?;
                        let mut stream =
                            KeyedStream::new(&[gen.seed, fp, domain::DEMAND, sc as u64, i as u64]);
                        (loc + shape * stream.next_normal()).exp()
                    }
                }
            };
            demand.push(w);
        }
        let mut distance = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mu = mu_d[i][j];
                let mut stream = KeyedStream::new(&[
                    gen.seed,
                    fp,
                    domain::DISTANCE,
                    sc as u64,
                    i as u64,
                    j as u64,
                ]);
                distance[i][j] = match gen.distance {
                    DistanceDist::Uniform { delta } => {
                        if delta == 0.0 {
                            mu
                        } else {
                            let u = (mu - delta) + 2.0 * delta * stream.next_f64();
                            if u < MIN_TRAVEL_MINUTES {
                                clamped += 1;
                                MIN_TRAVEL_MINUTES
                            } else {
                                u
                            }
                        }
                    }
                    DistanceDist::Lognormal { sigma_factor } => {
                        let sigma = sigma_factor * mu;
                        if sigma == 0.0 {
                            mu
                        } else {
                            let (loc, shape) = lognormal_from_mean_std(mu, sigma)?;
                            (loc + shape * stream.next_normal()).exp()
                        }
                    }
                };
            }
        }
        scenarios.push(Scenario { demand, distance });
    }
    Ok(ScenarioSet::assemble(
        scenarios,
        ScenarioProvenance::Generated {
            generator: gen.clone(),
        },
        instance.fingerprint().to_string(),
        clamped,
    ))
}

/// Sample average of the model objective over the scenario set per the SAA
/// scheme: assignments are first-stage and shared across all scenarios;
/// demand-weighted models consume the scenario demands.
pub fn saa_objective(
    spec: &ModelSpec,
    a: &Assignment,
    scen: &ScenarioSet,
    instance: &Instance,
) -> Result<f64, ScenarioError> {
    if scen.is_empty() {
        return Err(ScenarioError::EmptyScenarioSet);
    }
    let n = instance.len();
    if a.len() != n || scen.node_count() != n {
        return Err(ScenarioError::DimensionMismatch(format!(
            "instance has {n} nodes, assignment {} and scenarios {}",
            a.len(),
            scen.node_count()
        )));
    }
    spec.validate_for(n)?;
    let weighting = spec.objective.weighting();
    let mut total = 0.0;
    for s in scen.scenarios() {
        let out = outcomes(a, s.view(), weighting)?;
        total += objective_value(spec, &out)?;
    }
    Ok(total / scen.len() as f64)
}

/// Scenario-averaged per-node outcomes z-bar_i = mean_n z^n_i.
pub fn mean_outcomes(
    a: &Assignment,
    scen: &ScenarioSet,
    weighting: Weighting,
) -> Result<OutcomeVector, ScenarioError> {
    if scen.is_empty() {
        return Err(ScenarioError::EmptyScenarioSet);
    }
    let n = a.len();
    let mut acc = vec![0.0; n];
    for s in scen.scenarios() {
        let out = outcomes(a, s.view(), weighting)?;
        for (slot, z) in acc.iter_mut().zip(out.vector.values()) {
            *slot += z;
        }
    }
    let count = scen.len() as f64;
    for slot in acc.iter_mut() {
        *slot /= count;
    }
    Ok(OutcomeVector::new(acc).map_err(ModelError::from)?)
}

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    provenance: ScenarioProvenance,
    n_scenarios: usize,
    node_count: usize,
    instance_fingerprint: String,
    clamped_draws: usize,
    content_hash: String,
}

/// Write the set as one CSV per scenario plus a JSON manifest.
pub fn write_bundle(scen: &ScenarioSet, dir: &Path) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (idx, s) in scen.scenarios().iter().enumerate() {
        let mut text = String::new();
        let cells: Vec<String> = s.demand.iter().map(|w| w.to_string()).collect();
        let _ = writeln!(text, "{}", cells.join(","));
        for row in &s.distance {
            let cells: Vec<String> = row.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(text, "{}", cells.join(","));
        }
        let path = dir.join(format!("scenario_{idx:04}.csv"));
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    }
    let manifest = BundleManifest {
        provenance: scen.provenance.clone(),
        n_scenarios: scen.len(),
        node_count: scen.node_count(),
        instance_fingerprint: scen.instance_fingerprint.clone(),
        clamped_draws: scen.clamped_draws,
        content_hash: scen.content_hash.clone(),
    };
    let path = dir.join("scenarios.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| ScenarioError::Parse(format!("manifest serialization: {e}")))?;
    std::fs::write(&path, json).map_err(|e| io_err(&path, e))?;
    Ok(())
}

/// Re-import a bundle; the recomputed content hash must match the manifest.
pub fn read_bundle(dir: &Path) -> Result<ScenarioSet, ScenarioError> {
    let manifest_path = dir.join("scenarios.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let manifest: BundleManifest =
        serde_json::from_str(&text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let mut scenarios = Vec::with_capacity(manifest.n_scenarios);
    for idx in 0..manifest.n_scenarios {
        let path = dir.join(format!("scenario_{idx:04}.csv"));
        let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let mut lines = text.lines();
        let parse_row = |line: &str| -> Result<Vec<f64>, ScenarioError> {
            line.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|e| ScenarioError::Parse(e.to_string()))
                })
                .collect()
        };
        let demand = parse_row(
            lines
                .next()
                .ok_or_else(|| ScenarioError::Parse(format!("scenario {idx} empty")))?,
        )?;
        let mut distance = Vec::with_capacity(manifest.node_count);
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            distance.push(parse_row(line)?);
        }
        if demand.len() != manifest.node_count || distance.len() != manifest.node_count {
            return Err(ScenarioError::Parse(format!(
                "scenario {idx} has wrong dimensions"
            )));
        }
        scenarios.push(Scenario { demand, distance });
    }
    let actual = hash_scenarios(&scenarios);
    if actual != manifest.content_hash {
        return Err(ScenarioError::HashMismatch {
            expected: manifest.content_hash,
            actual,
        });
    }
    Ok(ScenarioSet {
        scenarios,
        provenance: manifest.provenance,
        instance_fingerprint: manifest.instance_fingerprint,
        clamped_draws: manifest.clamped_draws,
        content_hash: manifest.content_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AssignmentRule, Objective};

    fn small_instance() -> Instance {
        use crate::instance::Node;
        let nodes = (0..3)
            .map(|id| Node {
                id,
                name: format!("n{id}"),
                population: (id as u64 + 1) * 10,
                coords: None,
            })
            .collect();
        let distance = vec![
            vec![0.0, 10.0, 20.0],
            vec![10.0, 0.0, 5.0],
            vec![20.0, 5.0, 0.0],
        ];
        Instance::from_parts(
            nodes,
            distance,
            vec![5.0, 10.0, 15.0],
            vec![2.5, 5.0, 7.5],
            1,
        )
        .unwrap()
    }

    #[test]
    fn lognormal_conversion_examples() {
        let (loc, shape) = lognormal_from_mean_std(1.0, 0.0).unwrap();
        assert_eq!(loc, 0.0);
        assert_eq!(shape, 0.0);
        // Choose std so that shape = 1: std^2/mean^2 = e - 1.
        let mean = 0.5f64.exp();
        let std = mean * (std::f64::consts::E - 1.0).sqrt();
        let (loc, shape) = lognormal_from_mean_std(mean, std).unwrap();
        assert!((shape - 1.0).abs() < 1e-12);
        assert!(loc.abs() < 1e-12);
        assert!(lognormal_from_mean_std(0.0, 1.0).is_err());
    }

    #[test]
    fn lognormal_monte_carlo_moments() {
        let (loc, shape) = lognormal_from_mean_std(409.0, 204.5).unwrap();
        let mut stream = KeyedStream::new(&[99]);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += (loc + shape * stream.next_normal()).exp();
        }
        let mean = sum / n as f64;
        assert!((mean - 409.0).abs() / 409.0 < 0.01, "sample mean {mean}");
    }

    #[test]
    fn degenerate_generator_reproduces_instance() {
        let inst = small_instance();
        // Zero demand std and zero delta: the single scenario equals the means.
        let zero_std = Instance::from_parts(
            inst.nodes().to_vec(),
            inst.distance().to_vec(),
            inst.demand_mean().to_vec(),
            vec![0.0; 3],
            1,
        )
        .unwrap();
        let gen = GeneratorSpec {
            demand: DemandDist::Lognormal,
            distance: DistanceDist::Uniform { delta: 0.0 },
            n_scenarios: 1,
            seed: 7,
        };
        let set = sample(&zero_std, &gen).unwrap();
        assert_eq!(set.scenarios()[0].demand, zero_std.demand_mean());
        assert_eq!(set.scenarios()[0].distance, zero_std.distance());
        assert_eq!(set.clamped_draws(), 0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let inst = small_instance();
        let gen = GeneratorSpec::set1(20, 42);
        let a = sample(&inst, &gen).unwrap();
        let b = sample(&inst, &gen).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.content_hash(), b.content_hash());
        let c = sample(&inst, &GeneratorSpec::set1(20, 43)).unwrap();
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn prefix_stability_when_extending_n() {
        let inst = small_instance();
        let short = sample(&inst, &GeneratorSpec::set1(5, 42)).unwrap();
        let long = sample(&inst, &GeneratorSpec::set1(9, 42)).unwrap();
        assert_eq!(short.scenarios(), &long.scenarios()[..5]);
    }

    #[test]
    fn set1_draws_stay_in_band() {
        let inst = small_instance();
        let set = sample(&inst, &GeneratorSpec::set1(200, 11)).unwrap();
        for s in set.scenarios() {
            for i in 0..3 {
                for j in 0..3 {
                    if i == j {
                        assert_eq!(s.distance[i][j], 0.0);
                        continue;
                    }
                    let mu = inst.distance()[i][j];
                    let d = s.distance[i][j];
                    let in_band = d >= mu - 10.0 && d <= mu + 10.0;
                    assert!(in_band || d == MIN_TRAVEL_MINUTES, "d={d} mu={mu}");
                }
            }
        }
        // mu = 5 < delta = 10 makes clamping possible for pair (1,2).
        assert!(set.clamped_draws() > 0);
    }

    #[test]
    fn lognormal_distance_zero_mean_rejected() {
        use crate::instance::Node;
        let nodes = (0..2)
            .map(|id| Node {
                id,
                name: format!("n{id}"),
                population: 10,
                coords: None,
            })
            .collect();
        let inst = Instance::from_parts(
            nodes,
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            vec![1.0, 1.0],
            vec![0.5, 0.5],
            1,
        )
        .unwrap();
        match sample(&inst, &GeneratorSpec::set2(2, 1)) {
            Err(ScenarioError::ZeroDistanceMean(0, 1)) => {}
            other => panic!("expected zero-mean pair error, got {other:?}"),
        }
    }

    #[test]
    fn saa_collapses_to_deterministic_at_n1() {
        let inst = small_instance();
        let set = ScenarioSet::degenerate(&inst);
        let a = Assignment::new(vec![1], vec![1, 1, 1], 3).unwrap();
        let spec = ModelSpec::new(Objective::PCenter).with_rule(AssignmentRule::Free);
        let saa = saa_objective(&spec, &a, &set, &inst).unwrap();
        let out = outcomes(&a, set.scenarios()[0].view(), Weighting::Unweighted).unwrap();
        assert_eq!(saa, objective_value(&spec, &out).unwrap());
        assert_eq!(saa, 10.0);
    }

    #[test]
    fn saa_is_arithmetic_mean() {
        let inst = small_instance();
        // Two hand-built scenarios with p-center values 4 and 6.
        let s1 = Scenario {
            demand: vec![1.0; 3],
            distance: vec![
                vec![0.0, 4.0, 4.0],
                vec![4.0, 0.0, 4.0],
                vec![4.0, 4.0, 0.0],
            ],
        };
        let s2 = Scenario {
            demand: vec![1.0; 3],
            distance: vec![
                vec![0.0, 6.0, 6.0],
                vec![6.0, 0.0, 6.0],
                vec![6.0, 6.0, 0.0],
            ],
        };
        let set = ScenarioSet::from_scenarios(vec![s1, s2], &inst).unwrap();
        let a = Assignment::new(vec![0], vec![0, 0, 0], 3).unwrap();
        let spec = ModelSpec::new(Objective::PCenter);
        assert_eq!(saa_objective(&spec, &a, &set, &inst).unwrap(), 5.0);
    }

    #[test]
    fn bundle_round_trip_hash_checked() {
        let inst = small_instance();
        let set = sample(&inst, &GeneratorSpec::set2(4, 5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&set, dir.path()).unwrap();
        let back = read_bundle(dir.path()).unwrap();
        assert_eq!(set, back);

        // Corrupt one scenario file: re-import must fail the hash check.
        let victim = dir.path().join("scenario_0001.csv");
        let mut text = std::fs::read_to_string(&victim).unwrap();
        text = text.replacen(',', ",9", 1);
        std::fs::write(&victim, text).unwrap();
        assert!(matches!(
            read_bundle(dir.path()),
            Err(ScenarioError::HashMismatch { .. })
        ));
    }

    #[test]
    fn uniform_mean_close_to_midpoint() {
        // Means far above the clamp: sample mean within 3 standard errors of mu.
        use crate::instance::Node;
        let nodes = (0..2)
            .map(|id| Node {
                id,
                name: format!("n{id}"),
                population: 10,
                coords: None,
            })
            .collect();
        let inst = Instance::from_parts(
            nodes,
            vec![vec![0.0, 60.0], vec![45.0, 0.0]],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            1,
        )
        .unwrap();
        let n = 10_000;
        let set = sample(&inst, &GeneratorSpec::set1(n, 3)).unwrap();
        assert_eq!(set.clamped_draws(), 0);
        // Uniform half-width 10 has std 10/sqrt(3); SE = std/sqrt(n).
        let se = 10.0 / 3.0f64.sqrt() / (n as f64).sqrt();
        for (i, j, mu) in [(0usize, 1usize, 60.0), (1, 0, 45.0)] {
            let mean: f64 = set
                .scenarios()
                .iter()
                .map(|s| s.distance[i][j])
                .sum::<f64>()
                / n as f64;
            assert!(
                (mean - mu).abs() < 3.0 * se,
                "pair ({i},{j}): mean {mean} vs {mu}"
            );
        }
    }
}
