use std::path::PathBuf;
use std::process::{Command, Output};

use wordlearn::sim::{BatchReport, ScenarioResult};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/hr-1099.json")
}

fn wordlearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wordlearn"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn simulate(extra: &[&str]) -> Output {
    let f = fixture();
    let mut args = vec!["simulate", "--ontology", f.to_str().unwrap(), "--word", "external"];
    args.extend_from_slice(extra);
    wordlearn(&args)
}

#[test]
fn simulate_commits_and_exits_zero() {
    let out = simulate(&["--observations", "John Contractor,Mary Lawyer", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let r: ScenarioResult = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r.commit_step, Some(2));
    assert_eq!(r.observations, ["john_contractor", "mary_lawyer"]);
    assert!((r.steps[2].posterior.p("contractor").unwrap() - 12.0 / 13.0).abs() < 1e-9);
}

#[test]
fn simulate_without_observations_exits_one() {
    let out = simulate(&["--format", "table"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("(prior)"));
    assert!(text.contains("no commit"));
}

#[test]
fn simulate_errors_exit_two() {
    let out = simulate(&["--observations", "Nonexistent Person"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Nonexistent Person"));

    let out = wordlearn(&["simulate", "--ontology", "/no/such/file.json", "--word", "w"]);
    assert_eq!(out.status.code(), Some(2));

    let out = simulate(&["--observations", "john_contractor", "--out", "/no/such/dir/out.csv"]);
    assert_eq!(out.status.code(), Some(2));

    let out = simulate(&["--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let out = simulate(&[
        "--observations",
        "john_contractor,mary_lawyer",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rows.headers().unwrap(), vec!["step", "node", "p"]);
    let records: Vec<_> = rows.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 30);
    for step in 0..3 {
        let total: f64 = records
            .iter()
            .filter(|r| r[0] == step.to_string())
            .map(|r| r[2].parse::<f64>().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn batch_is_deterministic_and_rule_intersection_fails() {
    let f = fixture();
    let run = |learner: &str| -> BatchReport {
        let out = wordlearn(&[
            "batch", "--trials", "50", "--seed", "3", "--learner", learner, "--ontology", f.to_str().unwrap(),
            "--target", "contractor", "--format", "json",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice(&out.stdout).unwrap()
    };
    assert_eq!(run("bayes"), run("bayes"));
    let rule = run("rule_intersection");
    assert_eq!(rule.failures, rule.trials);
    let bayes = run("bayes");
    assert!(bayes.successes > 0);
}

#[test]
fn batch_with_generator() {
    let out = wordlearn(&["batch", "--trials", "5", "--seed", "1", "--gen", "depth:2,branch:3,leaves:2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("trials    5"));
}

#[test]
fn batch_rejects_invalid_specs() {
    let out = wordlearn(&["batch", "--gen", "depth:2,branch:0,leaves:2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = wordlearn(&["batch", "--gen", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    let out = wordlearn(&["batch", "--trials", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = wordlearn(&["batch", "--learner", "oracle", "--gen", "depth:1,branch:2,leaves:2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_reports_summary_and_errors() {
    let f = fixture();
    let out = wordlearn(&["validate", "--ontology", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("root supplier") && text.contains("6 entities"), "{text}");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"concepts":[{"id":"a","label":"A","parent":null},{"id":"b","label":"B","parent":null}],
            "entities":[{"id":"x","label":"X","concept":"a"}]}"#,
    )
    .unwrap();
    let out = wordlearn(&["validate", "--ontology", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn serve_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("service.toml");
    std::fs::write(
        &cfg,
        format!(
            "port = 0\nontology = {:?}\nlexicon = \"lex.json\"\nlog_dir = \"logs\"\n",
            fixture().to_str().unwrap()
        ),
    )
    .unwrap();
    let out = wordlearn(&["serve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
