//! End-to-end checks of the `equiloc` binary: subcommand output, file
//! artifacts, and the documented exit codes (0 ok, 2 validation, 3
//! infeasible, 4 time limit).

use std::process::{Command, Output};

fn equiloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_equiloc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn solve_deterministic_lehigh() {
    let out = equiloc(&["solve", "--model", "p-center", "--instance", "lehigh"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("objective:"), "{text}");
    assert!(text.contains("open:"), "{text}");
}

#[test]
fn solve_with_sampled_set() {
    let out = equiloc(&[
        "solve", "--model", "equity-3", "--set", "set1", "--n", "25", "--seed", "11",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("set1 N=25 seed=11"), "{text}");
    // Same invocation reproduces the same report.
    let again = equiloc(&[
        "solve", "--model", "equity-3", "--set", "set1", "--n", "25", "--seed", "11",
    ]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn unknown_model_is_validation_error() {
    let out = equiloc(&["solve", "--model", "equity-99"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_beta_exit_code() {
    // p = 1 leaves the open node at outcome 0, so min/max = 0 < beta.
    let out = equiloc(&["solve", "--model", "p-center", "--beta", "0.5"]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn time_limit_exit_code_with_incumbent() {
    // A zero budget cuts enumeration after the first chunk of subsets; the
    // incumbent is still printed and the exit code is 4.
    let out = equiloc(&[
        "solve",
        "--model",
        "p-median",
        "--p",
        "2",
        "--time-limit",
        "0",
    ]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("objective:"), "{text}");
    assert!(text.contains("time limit hit"), "{text}");
}

#[test]
fn threads_env_is_honored() {
    let out = Command::new(env!("CARGO_BIN_EXE_equiloc"))
        .env("EQUILOC_THREADS", "1")
        .args(["solve", "--model", "equity-5", "--set", "set2", "--n", "10"])
        .output()
        .expect("binary runs");
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    // Single-threaded and default runs agree bit for bit.
    let default = equiloc(&["solve", "--model", "equity-5", "--set", "set2", "--n", "10"]);
    assert_eq!(out.stdout, default.stdout);
}

#[test]
fn metrics_subcommand_reads_outcome_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("outcomes.txt");
    std::fs::write(&path, "0 # worst off\n1\n").unwrap();
    let out = equiloc(&[
        "metrics",
        "--outcomes",
        path.to_str().unwrap(),
        "--target",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("gini: 0.5"), "{text}");
    assert!(text.contains("sad: 2"), "{text}");
    assert!(text.contains("deviation from 2 (sum): 3"), "{text}");
}

#[test]
fn experiment_verify_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("cfg.json");
    let out_dir = dir.path().join("run");
    let config = format!(
        r#"{{
  "instance": "lehigh",
  "models": ["p-median", "equity-2"],
  "generators": ["set1"],
  "n_values": [1, 5],
  "seed": 3,
  "plot_replications": 2,
  "output_dir": "{}"
}}"#,
        out_dir.display()
    );
    std::fs::write(&config_path, config).unwrap();

    let out = equiloc(&["experiment", "--config", config_path.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "results.csv",
        "equity_diagnostics.csv",
        "plotdata_set1.csv",
        "manifest.json",
        "results.md",
    ] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }

    let verify = equiloc(&["verify", "--run", out_dir.to_str().unwrap()]);
    assert_eq!(verify.status.code(), Some(0), "{}", stdout(&verify));
    assert!(stdout(&verify).contains("verify: OK"));

    // Tampering with a result must be caught.
    let results = out_dir.join("results.csv");
    let text = std::fs::read_to_string(&results)
        .unwrap()
        .replace("p-median", "p-nedian");
    std::fs::write(&results, text).unwrap();
    let verify = equiloc(&["verify", "--run", out_dir.to_str().unwrap()]);
    assert_eq!(verify.status.code(), Some(2));
}

#[test]
fn experiment_missing_config_fails_cleanly() {
    let out = equiloc(&["experiment", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_instance_ingestion_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = dir.path().join("nodes.csv");
    std::fs::write(
        &nodes,
        "id,name,population,lat,lon\n0,A,100,40.0,-75.0\n1,B,50,40.2,-75.1\n2,C,25,40.1,-75.3\n",
    )
    .unwrap();
    let out = equiloc(&[
        "solve",
        "--model",
        "p-median",
        "--instance",
        nodes.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("3 nodes"));
}

#[test]
fn assignment_rule_flag_changes_equity_optimum() {
    // With both facilities forced open on this matrix, free assignment can
    // equalize outcomes while nearest-facility assignment cannot.
    let dir = tempfile::tempdir().unwrap();
    let nodes = dir.path().join("nodes.csv");
    std::fs::write(
        &nodes,
        "id,name,population\n0,A,10\n1,B,10\n2,C,10\n3,D,10\n",
    )
    .unwrap();
    let matrix = dir.path().join("d.csv");
    std::fs::write(&matrix, "0,8,4,5\n8,0,6,7\n4,6,0,9\n5,7,9,0\n").unwrap();
    let base = [
        "solve",
        "--model",
        "equity-2",
        "--instance",
        nodes.to_str().unwrap(),
        "--distance",
        matrix.to_str().unwrap(),
        "--p",
        "2",
    ];
    let parse_objective = |out: &Output| -> f64 {
        stdout(out)
            .lines()
            .find_map(|l| l.strip_prefix("objective: ").map(|v| v.parse().unwrap()))
            .expect("objective line")
    };
    let mut free_args = base.to_vec();
    free_args.extend(["--rule", "free"]);
    let mut closest_args = base.to_vec();
    closest_args.extend(["--rule", "closest"]);
    let free = equiloc(&free_args);
    let closest = equiloc(&closest_args);
    assert_eq!(free.status.code(), Some(0));
    assert_eq!(closest.status.code(), Some(0));
    assert!(
        parse_objective(&free) < parse_objective(&closest),
        "free {} vs closest {}",
        parse_objective(&free),
        parse_objective(&closest)
    );
}

#[test]
fn explicit_distance_matrix_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = dir.path().join("nodes.csv");
    std::fs::write(&nodes, "id,name,population\n0,A,100\n1,B,50\n2,C,25\n").unwrap();
    let matrix = dir.path().join("d.csv");
    std::fs::write(&matrix, "0,10,20\n10,0,5\n20,5,0\n").unwrap();
    let out = equiloc(&[
        "solve",
        "--model",
        "p-center",
        "--instance",
        nodes.to_str().unwrap(),
        "--distance",
        matrix.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    // Node B minimizes the worst travel time (10 vs 20 vs 20).
    assert!(stdout(&out).contains("B (2)"), "{}", stdout(&out));
}
