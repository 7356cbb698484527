//! End-to-end runs of the `mirrormatch` binary: exit codes, output layout,
//! determinism and the JSON summary schema.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mirrormatch");
const SCHEMA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/schema/summary.schema.json");

fn run(args: &[&str], out: &Path, workers: Option<usize>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg("--out").arg(out);
    match workers {
        Some(w) => cmd.env("MIRRORMATCH_WORKERS", w.to_string()),
        None => cmd.env_remove("MIRRORMATCH_WORKERS"),
    };
    cmd.output().expect("binary runs")
}

fn csv_path(o: &Output) -> PathBuf {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    PathBuf::from(String::from_utf8(o.stdout.clone()).unwrap().trim())
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_key_is_a_config_error_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# comment\nk = 3\nnoise_parm = 0.05\n").unwrap();
    let o = run(
        &["mstar", "--config", cfg.to_str().unwrap()],
        dir.path(),
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("noise_parm") && e.contains('3'), "{e}");
}

#[test]
fn domain_and_usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["table1", "--set", "k_grid=0,5"],
        vec!["table1", "--set", "reps=abc"],
        vec!["groups", "--set", "sigma_r2=0.05", "--set", "sigma_p2=0.01"],
        vec!["mstar", "--set", "noise_convention=precision"],
        vec!["mstar", "--set", "novalue"],
        vec!["mstar", "--config", "/nonexistent/run.cfg"],
        vec!["bogus"],
    ] {
        let o = run(&args, dir.path(), None);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    let o = run(&["mstar"], dir.path(), Some(0));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("MIRRORMATCH_WORKERS"));
}

#[test]
fn output_layout_and_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "mstar",
            "--set",
            "k_grid=1,2000",
            "--set",
            "noise_grid=0.05,1",
        ],
        dir.path(),
        None,
    );
    let csv = csv_path(&o);
    let run_dir = csv.parent().unwrap();
    let hash = run_dir.file_name().unwrap().to_str().unwrap().to_owned();
    assert_eq!(hash.len(), 16);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(csv.file_name().unwrap(), "mstar.csv");

    let mut names: Vec<String> = std::fs::read_dir(run_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["config.txt", "mstar.csv", "mstar.summary.json"]);

    let config = std::fs::read_to_string(run_dir.join("config.txt")).unwrap();
    assert!(config.contains("seed = 0"));
    assert!(config.contains("k_grid = 1,2000"));

    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# k: "));
    assert_eq!(
        lines[1],
        "k,noise_param,noise_variance,d_ai_inf,m_star_bound,status,m_star_is_two,config_hash"
    );
    assert_eq!(lines.len(), 2 + 4);
    for row in &lines[2..] {
        assert!(row.ends_with(&format!(",{hash}")));
        assert_eq!(row.split(',').count(), 8);
    }
    let first: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(&first[..2], ["1", "0.05"]);
    assert_eq!(first[2].parse::<f64>().unwrap(), 0.05f64 * 0.05);
    assert!(lines[2].contains(",17,ok,false,"));
    // k = 2000 at variance 1 is deep in the two-draw regime
    assert!(lines[5].contains(",2,ok,true,"), "{}", lines[5]);

    // the same config written as a file lands in the same directory
    let cfg = dir.path().join("same.cfg");
    std::fs::write(&cfg, "noise_grid = 0.05, 1\nk_grid = 1, 2000\n").unwrap();
    let again = csv_path(&run(
        &["mstar", "--config", cfg.to_str().unwrap()],
        dir.path(),
        None,
    ));
    assert_eq!(again, csv);

    let seeded = csv_path(&run(&["mstar", "--seed", "7"], dir.path(), None));
    assert_ne!(seeded.parent().unwrap(), run_dir);
}

#[test]
fn table1_csv_is_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "table1",
        "--set",
        "k_grid=1,5,150",
        "--set",
        "reps=64",
        "--set",
        "n=500",
        "--seed",
        "3",
    ];
    let one = csv_path(&run(&args, &dir.path().join("a"), Some(1)));
    let eight = csv_path(&run(&args, &dir.path().join("b"), Some(8)));
    let again = csv_path(&run(&args, &dir.path().join("c"), Some(8)));
    let bytes = std::fs::read(&one).unwrap();
    assert_eq!(bytes, std::fs::read(&eight).unwrap());
    assert_eq!(bytes, std::fs::read(&again).unwrap());
}

fn validator() -> jsonschema::Validator {
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(SCHEMA).unwrap()).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn summary(csv: &Path) -> serde_json::Value {
    let name = csv.file_stem().unwrap().to_str().unwrap();
    let p = csv.with_file_name(format!("{name}.summary.json"));
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn every_summary_matches_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let v = validator();
    let small = ["--set", "reps=8", "--set", "n=40"];
    let runs: Vec<Vec<&str>> = vec![
        vec!["table1", "--set", "k_grid=1,10"],
        vec!["figure2", "--set", "k_grid=2,20"],
        vec!["mstar", "--set", "k_grid=1"],
        vec!["groups", "--set", "k_grid=1,5", "--set", "ratio_grid=4"],
        vec!["seqsearch", "--set", "k=3", "--set", "horizon=20"],
        vec!["calibrate"],
    ];
    for mut args in runs {
        let command = args[0].to_owned();
        args.extend(small);
        let csv = csv_path(&run(&args, dir.path(), Some(2)));
        let s = summary(&csv);
        let errors: Vec<String> = v.iter_errors(&s).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{command}: {errors:?}");
        assert_eq!(s["provenance"]["command"], command.as_str());
        assert_eq!(s["provenance"]["workers"], 2);
        assert_eq!(s["provenance"]["seed_defaulted"], true);
        let rows = std::fs::read_to_string(&csv).unwrap().lines().count() - 2;
        assert_eq!(s["rows"], rows);
    }
    // a malformed summary is rejected
    let mut bad = summary(&csv_path(&run(
        &["mstar", "--set", "k_grid=1"],
        dir.path(),
        None,
    )));
    bad["provenance"]["config_hash"] = "XYZ".into();
    assert!(!v.is_valid(&bad));
}

#[test]
fn calibrate_and_seqsearch_report_their_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let s = summary(&csv_path(&run(
        &["calibrate", "--set", "reps=50", "--set", "n=2000"],
        dir.path(),
        None,
    )));
    assert_eq!(s["extra"]["resolved_convention"], "std_dev");
    assert_eq!(s["extra"]["k1_matched"], true);
    assert_eq!(s["extra"]["variance_reproduces_all_rows"], false);

    let s = summary(&csv_path(&run(
        &[
            "seqsearch",
            "--set",
            "k=2",
            "--set",
            "reps=200",
            "--set",
            "horizon=50",
            "--set",
            "kappa=0",
        ],
        dir.path(),
        None,
    )));
    let extra = &s["extra"];
    assert!(extra["best_ai_policy"].as_str().unwrap().starts_with("ai_"));
    assert!(extra["difference_se"].as_f64().unwrap() > 0.0);
    assert_eq!(extra["kappa"], 0.0);
}

#[test]
fn help_and_version_succeed() {
    for flag in ["--help", "--version"] {
        let o = Command::new(BIN).arg(flag).output().unwrap();
        assert!(o.status.success());
        assert!(!o.stdout.is_empty());
    }
}
