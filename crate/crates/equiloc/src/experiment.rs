//! The reproducible study harness: run a grid of models x (generator, N)
//! cells on one instance with common random numbers per column, collect
//! optima with equity diagnostics, and emit machine- and human-readable
//! reports plus a manifest that a later `verify` pass can re-derive.
//!
//! Wall-clock timings appear only in `results.md`; every CSV and the
//! manifest are pure functions of (config, seeds), so two runs of the same
//! config are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::instance::{hex_digest, load_instance, Instance, InstanceError, LoadOptions};
use crate::metrics::{EquityReport, MetricsError};
use crate::models::{Assignment, AssignmentRule, ModelError, ModelSpec, Objective};
use crate::rng::KeyedStream;
use crate::scenarios::{
    saa_objective, sample, DemandDist, DistanceDist, GeneratorSpec, ScenarioError, ScenarioSet,
};
use crate::solver::{solve, SolveError, SolveOptions};

/// Environment variable bounding the worker pool.
pub const THREADS_ENV: &str = "EQUILOC_THREADS";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("verification failed: {0}")]
    Verify(String),
}

fn io_err(path: &Path, source: std::io::Error) -> ExperimentError {
    ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// How the single-scenario (N = 1) column is built: one random draw, or the
/// instance means exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetMode {
    #[serde(rename = "det-draw")]
    DetDraw,
    #[serde(rename = "det-mean")]
    DetMean,
}

/// Distribution shape of a named generator (N and seed are injected per
/// column).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorShape {
    pub name: String,
    pub demand: DemandDist,
    pub distance: DistanceDist,
}

impl GeneratorShape {
    pub fn set1() -> Self {
        GeneratorShape {
            name: "set1".into(),
            demand: DemandDist::Lognormal,
            distance: DistanceDist::Uniform { delta: 10.0 },
        }
    }

    pub fn set2() -> Self {
        GeneratorShape {
            name: "set2".into(),
            demand: DemandDist::Lognormal,
            distance: DistanceDist::Lognormal { sigma_factor: 1.0 },
        }
    }

    pub fn spec(&self, n_scenarios: usize, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            demand: self.demand,
            distance: self.distance,
            n_scenarios,
            seed,
        }
    }
}

/// A generator entry in the config: a builtin name or a custom shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorConfig {
    Named(String),
    Custom(GeneratorShape),
}

impl GeneratorConfig {
    pub fn shape(&self) -> Result<GeneratorShape, ExperimentError> {
        match self {
            GeneratorConfig::Named(name) => match name.as_str() {
                "set1" => Ok(GeneratorShape::set1()),
                "set2" => Ok(GeneratorShape::set2()),
                other => Err(ExperimentError::Config(format!(
                    "unknown generator '{other}' (builtins: set1, set2)"
                ))),
            },
            GeneratorConfig::Custom(shape) => Ok(shape.clone()),
        }
    }
}

fn default_models() -> Vec<String> {
    Objective::TABLE
        .iter()
        .map(|o| o.cli_name().to_string())
        .collect()
}

fn default_generators() -> Vec<GeneratorConfig> {
    vec![
        GeneratorConfig::Named("set1".into()),
        GeneratorConfig::Named("set2".into()),
    ]
}

fn default_n_values() -> Vec<usize> {
    vec![1, 50]
}

fn default_seed() -> u64 {
    7
}

fn default_det_mode() -> DetMode {
    DetMode::DetDraw
}

fn default_plot_replications() -> usize {
    5
}

fn default_p() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// `"lehigh"` for the bundled dataset, a nodes CSV path, or a directory
    /// previously written by instance saving.
    pub instance: String,
    /// Companion distance-matrix CSV (only for CSV ingestion).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_path: Option<String>,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    #[serde(default = "default_generators")]
    pub generators: Vec<GeneratorConfig>,
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_det_mode")]
    pub det_mode: DetMode,
    pub output_dir: String,
    /// N values for the convergence plot data (defaults to `n_values`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot_n: Option<Vec<usize>>,
    #[serde(default = "default_plot_replications")]
    pub plot_replications: usize,
    /// Overrides every model's assignment rule when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment_rule: Option<AssignmentRule>,
    /// Rank weights when `ordered-median` is in the model list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordered_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// The default study: all eleven catalog models on the bundled Lehigh
    /// instance, Sets 1 and 2, N in {1, 50}.
    pub fn lehigh_default(output_dir: impl Into<String>) -> Self {
        ExperimentConfig {
            instance: "lehigh".into(),
            distance_path: None,
            p: 1,
            models: default_models(),
            generators: default_generators(),
            n_values: default_n_values(),
            seed: default_seed(),
            det_mode: default_det_mode(),
            output_dir: output_dir.into(),
            plot_n: None,
            plot_replications: default_plot_replications(),
            assignment_rule: None,
            ordered_weights: None,
            threads: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Json(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.models.is_empty() {
            return Err(ExperimentError::Config("model list is empty".into()));
        }
        if self.generators.is_empty() {
            return Err(ExperimentError::Config("generator list is empty".into()));
        }
        if self.n_values.is_empty() {
            return Err(ExperimentError::Config("n_values is empty".into()));
        }
        if self.n_values.contains(&0) {
            return Err(ExperimentError::Config("every N must be at least 1".into()));
        }
        if self.p == 0 {
            return Err(ExperimentError::Config("p must be at least 1".into()));
        }
        for name in &self.models {
            let objective: Objective = name
                .parse()
                .map_err(|e: ModelError| ExperimentError::Config(e.to_string()))?;
            if objective == Objective::OrderedMedian && self.ordered_weights.is_none() {
                return Err(ExperimentError::Config(
                    "ordered-median needs ordered_weights in the config".into(),
                ));
            }
        }
        for g in &self.generators {
            g.shape()?;
        }
        Ok(())
    }

    fn model_spec(&self, name: &str) -> Result<ModelSpec, ExperimentError> {
        let objective: Objective = name
            .parse()
            .map_err(|e: ModelError| ExperimentError::Config(e.to_string()))?;
        let mut spec = ModelSpec::new(objective);
        if let Some(rule) = self.assignment_rule {
            spec = spec.with_rule(rule);
        }
        if objective == Objective::OrderedMedian {
            if let Some(w) = &self.ordered_weights {
                spec = spec.with_ordered_weights(w.clone());
            }
        }
        Ok(spec)
    }

    pub fn load_instance(&self) -> Result<Instance, ExperimentError> {
        let instance = if self.instance == "lehigh" {
            Instance::lehigh()
        } else {
            let opts = LoadOptions {
                distance_path: self.distance_path.as_ref().map(PathBuf::from),
                p: self.p,
                ..LoadOptions::default()
            };
            load_instance(Path::new(&self.instance), &opts)?
        };
        Ok(instance.with_p(self.p)?)
    }
}

/// Derived seed for one (generator, N, replicate) scenario set.
fn column_seed(base: u64, generator: &str, n: usize, replicate: u64) -> u64 {
    KeyedStream::new(&[
        base,
        crate::rng::domain::REPLICATION,
        crate::rng::fnv1a(generator.as_bytes()),
        n as u64,
        replicate,
    ])
    .next_u64()
}

/// One (generator, N) column: all models in it share this scenario set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnKey {
    pub generator: String,
    pub n: usize,
    pub seed: u64,
    pub scenario_hash: String,
    /// True when the column holds the instance means (det-mean).
    pub degenerate_mean: bool,
}

impl ColumnKey {
    pub fn label(&self) -> String {
        if self.n == 1 {
            if self.degenerate_mean {
                "DET(mean)".to_string()
            } else {
                "DET".to_string()
            }
        } else {
            format!("SAA-{}", self.n)
        }
    }
}

/// A solved cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedCell {
    pub open_indices: Vec<usize>,
    /// Human label in "Name (1-based index)" style.
    pub location: String,
    pub objective: f64,
    pub assignment: Vec<usize>,
    pub equity: EquityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellOutcome {
    Solved(SolvedCell),
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: String,
    pub generator: String,
    pub n: usize,
    pub outcome: CellOutcome,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub generator: String,
    pub model: String,
    pub n: usize,
    pub mean_objective: f64,
    pub sample_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub config: ExperimentConfig,
    pub instance_fingerprint: String,
    pub node_names: Vec<String>,
    pub columns: Vec<ColumnKey>,
    /// Model-major, column-minor; `cells[m * columns.len() + c]`.
    pub cells: Vec<Cell>,
    pub plotdata: Vec<PlotPoint>,
}

impl ResultTable {
    pub fn cell(&self, model: &str, generator: &str, n: usize) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.generator == generator && c.n == n)
    }
}

fn location_label(open: &[usize], names: &[String]) -> String {
    open.iter()
        .map(|&j| format!("{} ({})", names[j], j + 1))
        .collect::<Vec<_>>()
        .join(" + ")
}

fn build_column(
    cfg: &ExperimentConfig,
    instance: &Instance,
    shape: &GeneratorShape,
    n: usize,
) -> Result<(ColumnKey, ScenarioSet), ExperimentError> {
    let seed = column_seed(cfg.seed, &shape.name, n, 0);
    let degenerate = n == 1 && cfg.det_mode == DetMode::DetMean;
    let scen = if degenerate {
        ScenarioSet::degenerate(instance)
    } else {
        sample(instance, &shape.spec(n, seed))?
    };
    Ok((
        ColumnKey {
            generator: shape.name.clone(),
            n,
            seed,
            scenario_hash: scen.content_hash().to_string(),
            degenerate_mean: degenerate,
        },
        scen,
    ))
}

/// Build a worker pool bounded by config, `EQUILOC_THREADS`, or the default.
pub fn worker_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, ExperimentError> {
    let env_threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads.or(env_threads) {
        builder = builder.num_threads(t.max(1));
    }
    builder
        .build()
        .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))
}

/// Run the full grid. Deterministic given (config, seeds): identical tables
/// across runs and worker counts. Cell-level solve failures are recorded in
/// the table; the run continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable, ExperimentError> {
    cfg.validate()?;
    let instance = cfg.load_instance()?;
    let node_names: Vec<String> = instance.nodes().iter().map(|n| n.name.clone()).collect();

    let mut columns = Vec::new();
    let mut column_sets = Vec::new();
    for g in &cfg.generators {
        let shape = g.shape()?;
        for &n in &cfg.n_values {
            let (key, scen) = build_column(cfg, &instance, &shape, n)?;
            columns.push(key);
            column_sets.push(scen);
        }
    }

    let pool = worker_pool(cfg.threads)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.models.len())
        .flat_map(|m| (0..columns.len()).map(move |c| (m, c)))
        .collect();

    let cells: Vec<Cell> = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, c)| -> Result<Cell, ExperimentError> {
                let model_name = &cfg.models[m];
                let spec = cfg.model_spec(model_name)?;
                let key = &columns[c];
                let scen = &column_sets[c];
                let started = Instant::now();
                let outcome = match solve(&spec, &instance, scen, &SolveOptions::default()) {
                    Ok(sol) => CellOutcome::Solved(SolvedCell {
                        open_indices: sol.open_set().to_vec(),
                        location: location_label(sol.open_set(), &node_names),
                        objective: sol.objective,
                        assignment: sol.assignment.assign().to_vec(),
                        equity: EquityReport::evaluate(&sol.per_node_outcomes)?,
                    }),
                    Err(e) => CellOutcome::Failed {
                        error: e.to_string(),
                    },
                };
                Ok(Cell {
                    model: model_name.clone(),
                    generator: key.generator.clone(),
                    n: key.n,
                    outcome,
                    wall_ms: started.elapsed().as_secs_f64() * 1e3,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    // Convergence plot data: SAA optimum mean/std over seeded replications.
    let plot_n = cfg.plot_n.clone().unwrap_or_else(|| cfg.n_values.clone());
    let mut plot_jobs = Vec::new();
    for g in &cfg.generators {
        let shape = g.shape()?;
        for model_name in &cfg.models {
            for &n in &plot_n {
                plot_jobs.push((shape.clone(), model_name.clone(), n));
            }
        }
    }
    let plotdata: Vec<PlotPoint> = pool.install(|| {
        plot_jobs
            .par_iter()
            .map(
                |(shape, model_name, n)| -> Result<PlotPoint, ExperimentError> {
                    let spec = cfg.model_spec(model_name)?;
                    let mut objectives = Vec::with_capacity(cfg.plot_replications);
                    for r in 0..cfg.plot_replications.max(1) {
                        let seed = column_seed(cfg.seed, &shape.name, *n, 1 + r as u64);
                        let scen = sample(&instance, &shape.spec(*n, seed))?;
                        if let Ok(sol) = solve(&spec, &instance, &scen, &SolveOptions::default()) {
                            objectives.push(sol.objective);
                        }
                    }
                    let count = objectives.len().max(1) as f64;
                    let mean = objectives.iter().sum::<f64>() / count;
                    let std = if objectives.len() > 1 {
                        let ss: f64 = objectives.iter().map(|o| (o - mean) * (o - mean)).sum();
                        (ss / (objectives.len() - 1) as f64).sqrt()
                    } else {
                        0.0
                    };
                    Ok(PlotPoint {
                        generator: shape.name.clone(),
                        model: model_name.clone(),
                        n: *n,
                        mean_objective: mean,
                        sample_std: std,
                    })
                },
            )
            .collect::<Result<Vec<_>, _>>()
    })?;

    Ok(ResultTable {
        config: cfg.clone(),
        instance_fingerprint: instance.fingerprint().to_string(),
        node_names,
        columns,
        cells,
        plotdata,
    })
}

/// One comparison in the divergence summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceEntry {
    pub model: String,
    pub context: String,
    pub differs: bool,
    pub detail: String,
}

/// Counts of the qualitative phenomena: uncertainty moves optima (DET vs
/// SAA), equity objectives move optima (vs p-median/p-center), and the
/// assumed distribution moves optima (Set 1 vs Set 2).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub det_vs_saa: Vec<DivergenceEntry>,
    pub equity_vs_classic: Vec<DivergenceEntry>,
    pub cross_generator: Vec<DivergenceEntry>,
    /// Per column label: number of distinct optimal open sets across models.
    pub column_diversity: Vec<(String, usize)>,
}

impl DivergenceReport {
    pub fn det_vs_saa_count(&self) -> usize {
        self.det_vs_saa.iter().filter(|e| e.differs).count()
    }

    pub fn equity_vs_classic_count(&self) -> usize {
        self.equity_vs_classic.iter().filter(|e| e.differs).count()
    }

    pub fn cross_generator_count(&self) -> usize {
        self.cross_generator.iter().filter(|e| e.differs).count()
    }

    /// True when some column holds at least two distinct optima.
    pub fn any_intra_column_divergence(&self) -> bool {
        self.column_diversity
            .iter()
            .any(|(_, distinct)| *distinct > 1)
    }
}

fn solved(cell: &Cell) -> Option<&SolvedCell> {
    match &cell.outcome {
        CellOutcome::Solved(s) => Some(s),
        CellOutcome::Failed { .. } => None,
    }
}

/// Compare optima across the table.
pub fn divergence_report(table: &ResultTable) -> DivergenceReport {
    let generators: Vec<String> = {
        let mut seen = Vec::new();
        for c in &table.columns {
            if !seen.contains(&c.generator) {
                seen.push(c.generator.clone());
            }
        }
        seen
    };
    let min_n = table.columns.iter().map(|c| c.n).min().unwrap_or(1);
    let max_n = table.columns.iter().map(|c| c.n).max().unwrap_or(1);

    let mut det_vs_saa = Vec::new();
    let mut cross_generator = Vec::new();
    let mut equity_vs_classic = Vec::new();

    for model in &table.config.models {
        for gen in &generators {
            if min_n == max_n {
                break;
            }
            let det = table.cell(model, gen, min_n).and_then(solved);
            let saa = table.cell(model, gen, max_n).and_then(solved);
            if let (Some(d), Some(s)) = (det, saa) {
                det_vs_saa.push(DivergenceEntry {
                    model: model.clone(),
                    context: gen.clone(),
                    differs: d.open_indices != s.open_indices,
                    detail: format!("DET {} vs SAA {}", d.location, s.location),
                });
            }
        }
        if generators.len() >= 2 {
            for n in [min_n, max_n] {
                let a = table.cell(model, &generators[0], n).and_then(solved);
                let b = table.cell(model, &generators[1], n).and_then(solved);
                if let (Some(a), Some(b)) = (a, b) {
                    cross_generator.push(DivergenceEntry {
                        model: model.clone(),
                        context: format!("N={n}: {} vs {}", generators[0], generators[1]),
                        differs: a.open_indices != b.open_indices,
                        detail: format!("{} vs {}", a.location, b.location),
                    });
                }
                if min_n == max_n {
                    break;
                }
            }
        }
    }

    for column in &table.columns {
        for classic in ["p-median", "p-center"] {
            let Some(base) = table
                .cell(classic, &column.generator, column.n)
                .and_then(solved)
            else {
                continue;
            };
            for model in &table.config.models {
                if !model.starts_with("equity-") {
                    continue;
                }
                if let Some(cell) = table
                    .cell(model, &column.generator, column.n)
                    .and_then(solved)
                {
                    equity_vs_classic.push(DivergenceEntry {
                        model: model.clone(),
                        context: format!("{} {} vs {classic}", column.generator, column.label()),
                        differs: cell.open_indices != base.open_indices,
                        detail: format!("{} vs {}", cell.location, base.location),
                    });
                }
            }
        }
    }

    let column_diversity = table
        .columns
        .iter()
        .map(|column| {
            let mut distinct: Vec<&[usize]> = Vec::new();
            for model in &table.config.models {
                if let Some(cell) = table
                    .cell(model, &column.generator, column.n)
                    .and_then(solved)
                {
                    if !distinct.contains(&cell.open_indices.as_slice()) {
                        distinct.push(&cell.open_indices);
                    }
                }
            }
            (
                format!("{} {}", column.generator, column.label()),
                distinct.len(),
            )
        })
        .collect();

    DivergenceReport {
        det_vs_saa,
        equity_vs_classic,
        cross_generator,
        column_diversity,
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn join_indices(ix: &[usize]) -> String {
    ix.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn results_csv(table: &ResultTable) -> String {
    let mut out =
        String::from("model,generator,n,open_indices,location,objective,assignment,error\n");
    for cell in &table.cells {
        match &cell.outcome {
            CellOutcome::Solved(s) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},",
                    cell.model,
                    cell.generator,
                    cell.n,
                    join_indices(&s.open_indices),
                    csv_escape(&s.location),
                    s.objective,
                    join_indices(&s.assignment),
                );
            }
            CellOutcome::Failed { error } => {
                let _ = writeln!(
                    out,
                    "{},{},{},,,,,{}",
                    cell.model,
                    cell.generator,
                    cell.n,
                    csv_escape(error)
                );
            }
        }
    }
    out
}

fn equity_csv(table: &ResultTable) -> String {
    let mut out =
        String::from("model,generator,n,mad,sad,range,min_max_ratio,variance,gini,gini_zero_sum\n");
    for cell in &table.cells {
        if let CellOutcome::Solved(s) = &cell.outcome {
            let e = &s.equity;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                cell.model,
                cell.generator,
                cell.n,
                e.mad,
                e.sad,
                e.range,
                e.min_max_ratio,
                e.variance,
                e.gini,
                e.gini_zero_sum
            );
        }
    }
    out
}

fn plotdata_csv(table: &ResultTable, generator: &str) -> String {
    let mut out = String::from("model,n,mean_objective,sample_std\n");
    for p in table.plotdata.iter().filter(|p| p.generator == generator) {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.model, p.n, p.mean_objective, p.sample_std
        );
    }
    out
}

fn results_md(table: &ResultTable, divergence: &DivergenceReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# Optimal locations by model — {} (p = {})\n",
        table.config.instance, table.config.p
    );
    let labels: Vec<String> = table
        .columns
        .iter()
        .map(|c| format!("{} {}", c.generator, c.label()))
        .collect();
    let _ = writeln!(out, "| Model | {} |", labels.join(" | "));
    let _ = writeln!(
        out,
        "|---|{}|",
        labels.iter().map(|_| "---").collect::<Vec<_>>().join("|")
    );
    for model in &table.config.models {
        let mut row = format!("| {model} |");
        for column in &table.columns {
            let text = match table.cell(model, &column.generator, column.n) {
                Some(cell) => match &cell.outcome {
                    CellOutcome::Solved(s) => s.location.clone(),
                    CellOutcome::Failed { error } => format!("error: {error}"),
                },
                None => String::new(),
            };
            let _ = write!(row, " {text} |");
        }
        let _ = writeln!(out, "{row}");
    }

    let _ = writeln!(out, "\n## Objective values\n");
    let _ = writeln!(out, "| Model | {} |", labels.join(" | "));
    let _ = writeln!(
        out,
        "|---|{}|",
        labels.iter().map(|_| "---").collect::<Vec<_>>().join("|")
    );
    for model in &table.config.models {
        let mut row = format!("| {model} |");
        for column in &table.columns {
            let text = match table
                .cell(model, &column.generator, column.n)
                .and_then(solved)
            {
                Some(s) => format!("{:.4}", s.objective),
                None => String::new(),
            };
            let _ = write!(row, " {text} |");
        }
        let _ = writeln!(out, "{row}");
    }

    let _ = writeln!(out, "\n## Divergence summary\n");
    let _ = writeln!(
        out,
        "- model/generator pairs whose DET and SAA optima differ: {} of {}",
        divergence.det_vs_saa_count(),
        divergence.det_vs_saa.len()
    );
    let _ = writeln!(
        out,
        "- equity-model optima differing from p-median/p-center in the same column: {} of {}",
        divergence.equity_vs_classic_count(),
        divergence.equity_vs_classic.len()
    );
    let _ = writeln!(
        out,
        "- models whose optima differ across generators at equal N: {} of {}",
        divergence.cross_generator_count(),
        divergence.cross_generator.len()
    );
    for (label, distinct) in &divergence.column_diversity {
        let _ = writeln!(
            out,
            "- column {label}: {distinct} distinct optimal open sets"
        );
    }

    let _ = writeln!(
        out,
        "\n## Wall time (ms; excluded from deterministic outputs)\n"
    );
    for cell in &table.cells {
        let _ = writeln!(
            out,
            "- {} / {} N={}: {:.2} ms",
            cell.model, cell.generator, cell.n, cell.wall_ms
        );
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub instance_fingerprint: String,
    pub columns: Vec<ColumnKey>,
    /// sha256 per emitted deterministic file.
    pub file_hashes: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex_digest(&h.finalize())
}

/// Write `results.csv`, `equity_diagnostics.csv`, `plotdata_<gen>.csv`,
/// `results.md`, and `manifest.json` into `dir`. Everything is buffered
/// first: an unwritable directory fails before any file appears.
pub fn emit_reports(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let divergence = divergence_report(table);
    let mut files: Vec<(String, String)> = Vec::new();
    files.push(("results.csv".to_string(), results_csv(table)));
    files.push(("equity_diagnostics.csv".to_string(), equity_csv(table)));
    let mut generators = Vec::new();
    for c in &table.columns {
        if !generators.contains(&c.generator) {
            generators.push(c.generator.clone());
        }
    }
    for gen in &generators {
        files.push((format!("plotdata_{gen}.csv"), plotdata_csv(table, gen)));
    }

    let mut file_hashes = BTreeMap::new();
    for (name, content) in &files {
        file_hashes.insert(name.clone(), sha256_hex(content.as_bytes()));
    }
    let manifest = RunManifest {
        config: table.config.clone(),
        instance_fingerprint: table.instance_fingerprint.clone(),
        columns: table.columns.clone(),
        file_hashes,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| ExperimentError::Json(e.to_string()))?;
    let markdown = results_md(table, &divergence);

    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    for (name, content) in files.into_iter().chain([
        ("manifest.json".to_string(), manifest_json),
        ("results.md".to_string(), markdown),
    ]) {
        let path = dir.join(&name);
        std::fs::write(&path, content).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Outcome of a verification pass.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub cells_checked: usize,
    pub objective_mismatches: Vec<String>,
    pub hash_mismatches: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.objective_mismatches.is_empty() && self.hash_mismatches.is_empty()
    }
}

/// Re-derive a finished run: check file hashes against the manifest, rebuild
/// every scenario set from its recorded seed, and recompute every reported
/// objective from the stored assignment. Any discrepancy is reported.
pub fn verify_run(dir: &Path) -> Result<VerifyReport, ExperimentError> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| ExperimentError::Json(e.to_string()))?;

    let mut hash_mismatches = Vec::new();
    for (name, expected) in &manifest.file_hashes {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
        let actual = sha256_hex(&bytes);
        if &actual != expected {
            hash_mismatches.push(format!("{name}: manifest {expected}, file {actual}"));
        }
    }

    let cfg = &manifest.config;
    let instance = cfg.load_instance()?;
    if instance.fingerprint() != manifest.instance_fingerprint {
        hash_mismatches.push(format!(
            "instance fingerprint: manifest {}, reloaded {}",
            manifest.instance_fingerprint,
            instance.fingerprint()
        ));
    }

    // Rebuild each column's scenario set from its recorded seed.
    let mut sets: BTreeMap<(String, usize), ScenarioSet> = BTreeMap::new();
    for column in &manifest.columns {
        let scen = if column.degenerate_mean {
            ScenarioSet::degenerate(&instance)
        } else {
            let shape = cfg
                .generators
                .iter()
                .map(|g| g.shape())
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .find(|s| s.name == column.generator)
                .ok_or_else(|| {
                    ExperimentError::Verify(format!(
                        "column generator '{}' not in config",
                        column.generator
                    ))
                })?;
            sample(&instance, &shape.spec(column.n, column.seed))?
        };
        if scen.content_hash() != column.scenario_hash {
            hash_mismatches.push(format!(
                "scenario set {} N={}: manifest {}, regenerated {}",
                column.generator,
                column.n,
                column.scenario_hash,
                scen.content_hash()
            ));
        }
        sets.insert((column.generator.clone(), column.n), scen);
    }

    // Re-evaluate every solved row of results.csv from its stored assignment.
    let results_path = dir.join("results.csv");
    let text = std::fs::read_to_string(&results_path).map_err(|e| io_err(&results_path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut cells_checked = 0usize;
    let mut objective_mismatches = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| ExperimentError::Verify(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("").to_string();
        let (model, generator, n_str) = (field(0), field(1), field(2));
        if !field(7).is_empty() {
            continue; // failed cell: nothing to re-derive
        }
        let n: usize = n_str
            .parse()
            .map_err(|e| ExperimentError::Verify(format!("bad n '{n_str}': {e}")))?;
        let parse_ix = |s: &str| -> Result<Vec<usize>, ExperimentError> {
            s.split(';')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|e| ExperimentError::Verify(format!("bad index '{t}': {e}")))
                })
                .collect()
        };
        let open = parse_ix(&field(3))?;
        let objective: f64 = field(5)
            .parse()
            .map_err(|e| ExperimentError::Verify(format!("bad objective: {e}")))?;
        let assign = parse_ix(&field(6))?;
        let scen = sets.get(&(generator.clone(), n)).ok_or_else(|| {
            ExperimentError::Verify(format!("no scenario set for column ({generator}, {n})"))
        })?;
        let spec = cfg.model_spec(&model)?;
        let assignment = Assignment::new(open, assign, instance.len())?;
        let recomputed = saa_objective(&spec, &assignment, scen, &instance)?;
        cells_checked += 1;
        if recomputed.to_bits() != objective.to_bits() {
            objective_mismatches.push(format!(
                "{model}/{generator}/N={n}: stored {objective}, re-derived {recomputed}"
            ));
        }
    }

    Ok(VerifyReport {
        cells_checked,
        objective_mismatches,
        hash_mismatches,
    })
}
