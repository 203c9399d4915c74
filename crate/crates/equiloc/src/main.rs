//! `equiloc` — facility location under uncertainty with equity objectives.
//!
//! Subcommands: `solve` one model on one instance, `experiment` for the full
//! grid from a JSON config, `verify` to re-derive a finished run, and
//! `metrics` to evaluate the inequity indices on an outcome file.
//!
//! Exit codes: 0 success, 2 validation error, 3 infeasible, 4 time limit hit
//! (the incumbent is still written).

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use equiloc::experiment::{
    divergence_report, emit_reports, run_experiment, verify_run, worker_pool, ExperimentConfig,
    GeneratorShape,
};
use equiloc::instance::{load_instance, Instance, LoadOptions};
use equiloc::metrics::{
    deviation_from_target, gini_detailed, mad, range_spread, ratio_min_max, sad, variance,
    DeviationMode, EquityReport, OutcomeVector,
};
use equiloc::models::{AssignmentRule, ModelSpec, Objective};
use equiloc::scenarios::{sample, ScenarioSet};
use equiloc::solver::{solve, SolveError, SolveMethod, SolveOptions};

#[derive(Parser)]
#[command(
    name = "equiloc",
    version,
    about = "Facility location under uncertainty with equity objectives"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Closest,
    Free,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Local,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetModeArg {
    #[value(name = "det-draw")]
    DetDraw,
    #[value(name = "det-mean")]
    DetMean,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance: "lehigh", a nodes CSV, or a saved instance directory.
    #[arg(long, default_value = "lehigh")]
    instance: String,
    /// Companion distance-matrix CSV (minutes; optional unit header).
    #[arg(long)]
    distance: Option<PathBuf>,
    /// Model name: p-median, p-center, total-distance, equity-1 .. equity-8,
    /// lex-center, ordered-median.
    #[arg(long)]
    model: String,
    /// Number of facilities to open (defaults to the instance's own p, or 1).
    #[arg(long)]
    p: Option<usize>,
    /// Scenario recipe: set1, set2, or a generator JSON file. Without it the
    /// solve is deterministic on the instance means.
    #[arg(long)]
    set: Option<String>,
    /// Scenario count N.
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// How the N = 1 column is built when --set is given.
    #[arg(long, value_enum, default_value = "det-draw")]
    det_mode: DetModeArg,
    /// Override the model's assignment rule.
    #[arg(long, value_enum)]
    rule: Option<RuleArg>,
    /// Feasibility floor on min/max of the outcome vector.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    /// Local-search restarts.
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Comma-separated rank weights for ordered-median.
    #[arg(long)]
    ordered_weights: Option<String>,
    /// Worker threads (also via EQUILOC_THREADS).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model on one instance.
    Solve(SolveArgs),
    /// Run the full experiment grid from a JSON config.
    Experiment {
        /// Config file; see the README for the schema.
        #[arg(long, conflicts_with = "lehigh")]
        config: Option<PathBuf>,
        /// Shortcut: the default full study on the bundled instance.
        #[arg(long, requires = "out")]
        lehigh: bool,
        /// Output directory for --lehigh.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-derive every objective and hash of a finished run directory.
    Verify {
        #[arg(long)]
        run: PathBuf,
    },
    /// Evaluate all inequity indices on an outcome file (one value per
    /// line; '#' starts a comment).
    Metrics {
        #[arg(long)]
        outcomes: PathBuf,
        /// Also report deviation from this target (sum and max of |x - t|).
        #[arg(long)]
        target: Option<f64>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Experiment {
            config,
            lehigh,
            out,
        } => cmd_experiment(config, lehigh, out),
        Command::Verify { run } => cmd_verify(&run),
        Command::Metrics { outcomes, target } => cmd_metrics(&outcomes, target),
    };
    std::process::exit(code);
}

fn fail(message: impl std::fmt::Display, code: i32) -> i32 {
    eprintln!("error: {message}");
    code
}

fn load_cli_instance(
    name: &str,
    distance: Option<&Path>,
    p: Option<usize>,
) -> Result<Instance, String> {
    let instance = if name == "lehigh" {
        Instance::lehigh()
    } else {
        let opts = LoadOptions {
            distance_path: distance.map(Path::to_path_buf),
            p: p.unwrap_or(1),
            ..LoadOptions::default()
        };
        load_instance(Path::new(name), &opts).map_err(|e| e.to_string())?
    };
    // Saved instance directories carry their own p; an explicit flag wins.
    match p {
        Some(p) => instance.with_p(p).map_err(|e| e.to_string()),
        None => Ok(instance),
    }
}

fn build_scenarios(
    instance: &Instance,
    set: Option<&str>,
    n: usize,
    seed: u64,
    det_mode: DetModeArg,
) -> Result<(ScenarioSet, String), String> {
    let Some(set) = set else {
        if n > 1 {
            return Err("sampling N > 1 scenarios needs --set".into());
        }
        return Ok((
            ScenarioSet::degenerate(instance),
            "deterministic (instance means)".into(),
        ));
    };
    let shape = match set {
        "set1" => GeneratorShape::set1(),
        "set2" => GeneratorShape::set2(),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read generator file {path}: {e}"))?;
            serde_json::from_str::<GeneratorShape>(&text)
                .map_err(|e| format!("bad generator JSON: {e}"))?
        }
    };
    if n == 1 && matches!(det_mode, DetModeArg::DetMean) {
        return Ok((
            ScenarioSet::degenerate(instance),
            format!("{} det-mean", shape.name),
        ));
    }
    let scen = sample(instance, &shape.spec(n, seed)).map_err(|e| e.to_string())?;
    let label = format!("{} N={n} seed={seed}", shape.name);
    Ok((scen, label))
}

fn cmd_solve(args: &SolveArgs) -> i32 {
    let objective: Objective = match args.model.parse() {
        Ok(o) => o,
        Err(e) => return fail(e, 2),
    };
    let instance = match load_cli_instance(&args.instance, args.distance.as_deref(), args.p) {
        Ok(i) => i,
        Err(e) => return fail(e, 2),
    };
    let (scen, scen_label) = match build_scenarios(
        &instance,
        args.set.as_deref(),
        args.n,
        args.seed,
        args.det_mode,
    ) {
        Ok(x) => x,
        Err(e) => return fail(e, 2),
    };

    let mut spec = ModelSpec::new(objective);
    if let Some(rule) = args.rule {
        spec = spec.with_rule(match rule {
            RuleArg::Closest => AssignmentRule::Closest,
            RuleArg::Free => AssignmentRule::Free,
        });
    }
    if let Some(beta) = args.beta {
        spec = spec.with_beta(beta);
    }
    if let Some(weights) = &args.ordered_weights {
        let parsed: Result<Vec<f64>, _> = weights
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect();
        match parsed {
            Ok(w) => spec = spec.with_ordered_weights(w),
            Err(e) => return fail(format!("bad --ordered-weights: {e}"), 2),
        }
    }
    if let Err(e) = spec.validate_for(instance.len()) {
        return fail(e, 2);
    }

    let opts = SolveOptions {
        method: match args.method {
            MethodArg::Exact => SolveMethod::EnumerateExact,
            MethodArg::Local => SolveMethod::LocalSearch,
        },
        assignment_rule: None, // already set on the ModelSpec
        time_limit: args.time_limit.map(Duration::from_secs_f64),
        restarts: args.restarts,
        seed: args.seed,
    };

    let pool = match worker_pool(args.threads) {
        Ok(p) => p,
        Err(e) => return fail(e, 2),
    };
    let solution = pool.install(|| solve(&spec, &instance, &scen, &opts));
    let solution = match solution {
        Ok(s) => s,
        Err(SolveError::Infeasible) => {
            return fail(
                "infeasible: beta constraint rejects every candidate subset",
                3,
            )
        }
        Err(e) => return fail(e, 2),
    };

    let names: Vec<String> = instance.nodes().iter().map(|n| n.name.clone()).collect();
    let open_label = solution
        .open_set()
        .iter()
        .map(|&j| format!("{} ({})", names[j], j + 1))
        .collect::<Vec<_>>()
        .join(" + ");
    println!(
        "instance: {} ({} nodes, p = {})",
        args.instance,
        instance.len(),
        instance.p()
    );
    println!(
        "scenarios: {} [hash {}]",
        scen_label,
        &scen.content_hash()[..12]
    );
    println!(
        "model: {} (rule: {:?}, method: {:?})",
        objective, spec.assignment_rule, solution.provenance.method
    );
    println!("open: {open_label}");
    println!("objective: {}", solution.objective);
    if let Some(lex) = &solution.lex_criterion {
        let head: Vec<String> = lex.iter().take(5).map(|v| format!("{v:.4}")).collect();
        println!("lex criterion (worst first): [{} ...]", head.join(", "));
    }
    match EquityReport::evaluate(&solution.per_node_outcomes) {
        Ok(eq) => println!(
            "equity: mad={} sad={} range={} min/max={} variance={} gini={}{}",
            eq.mad,
            eq.sad,
            eq.range,
            eq.min_max_ratio,
            eq.variance,
            eq.gini,
            if eq.gini_zero_sum { " (zero-sum)" } else { "" }
        ),
        Err(e) => println!("equity: unavailable ({e})"),
    }
    if solution.provenance.heuristic {
        println!("note: heuristic result (local search), no optimality certificate");
    }
    if solution.provenance.incumbent_only {
        println!("note: time limit hit; best incumbent reported");
        return 4;
    }
    0
}

fn cmd_experiment(config: Option<PathBuf>, lehigh: bool, out: Option<PathBuf>) -> i32 {
    let cfg = if lehigh {
        let out = out.expect("clap enforces --out with --lehigh");
        ExperimentConfig::lehigh_default(out.display().to_string())
    } else {
        let Some(path) = config else {
            return fail("provide --config FILE or --lehigh --out DIR", 2);
        };
        match ExperimentConfig::from_json_file(&path) {
            Ok(c) => c,
            Err(e) => return fail(e, 2),
        }
    };
    let table = match run_experiment(&cfg) {
        Ok(t) => t,
        Err(e) => return fail(e, 2),
    };
    let out_dir = PathBuf::from(&cfg.output_dir);
    let written = match emit_reports(&table, &out_dir) {
        Ok(w) => w,
        Err(e) => return fail(e, 2),
    };
    let divergence = divergence_report(&table);
    println!(
        "ran {} cells ({} models x {} columns) on {}",
        table.cells.len(),
        cfg.models.len(),
        table.columns.len(),
        cfg.instance
    );
    println!(
        "divergence: DET!=SAA {}/{}; equity vs classic {}/{}; cross-generator {}/{}",
        divergence.det_vs_saa_count(),
        divergence.det_vs_saa.len(),
        divergence.equity_vs_classic_count(),
        divergence.equity_vs_classic.len(),
        divergence.cross_generator_count(),
        divergence.cross_generator.len()
    );
    for path in written {
        println!("wrote {}", path.display());
    }
    let ok = table
        .cells
        .iter()
        .all(|c| matches!(c.outcome, equiloc::experiment::CellOutcome::Solved(_)));
    if !ok {
        eprintln!("warning: some cells failed; see the results.csv error column");
    }
    0
}

fn cmd_verify(run: &Path) -> i32 {
    match verify_run(run) {
        Ok(report) => {
            println!(
                "checked {} cells: {} objective mismatches, {} hash mismatches",
                report.cells_checked,
                report.objective_mismatches.len(),
                report.hash_mismatches.len()
            );
            for m in &report.objective_mismatches {
                println!("objective mismatch: {m}");
            }
            for m in &report.hash_mismatches {
                println!("hash mismatch: {m}");
            }
            if report.ok() {
                println!("verify: OK");
                0
            } else {
                2
            }
        }
        Err(e) => fail(e, 2),
    }
}

fn cmd_metrics(path: &Path, target: Option<f64>) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(format!("cannot read {}: {e}", path.display()), 2),
    };
    let mut values = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(e) => return fail(format!("line {}: bad value '{line}': {e}", line_no + 1), 2),
        }
    }
    let vector = match OutcomeVector::new(values) {
        Ok(v) => v,
        Err(e) => return fail(e, 2),
    };
    println!("n: {}", vector.len());
    println!("mean: {}", vector.mean());
    println!("mad: {}", mad(&vector));
    println!("sad: {}", sad(&vector));
    println!("range: {}", range_spread(&vector));
    match ratio_min_max(&vector) {
        Ok(r) => println!("min/max: {r}"),
        Err(e) => println!("min/max: undefined ({e})"),
    }
    println!("variance: {}", variance(&vector));
    match gini_detailed(&vector) {
        Ok(g) => println!(
            "gini: {}{}",
            g.value,
            if g.zero_sum { " (zero-sum)" } else { "" }
        ),
        Err(e) => println!("gini: undefined ({e})"),
    }
    if let Some(t) = target {
        println!(
            "deviation from {t} (sum): {}",
            deviation_from_target(&vector, t, DeviationMode::SumAbs)
        );
        println!(
            "deviation from {t} (max): {}",
            deviation_from_target(&vector, t, DeviationMode::MaxAbs)
        );
    }
    0
}
