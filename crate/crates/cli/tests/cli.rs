use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use asgd_cli::commands::{cmd_check_delay, cmd_compare, cmd_rate_fit, cmd_run, RunOptions};
use asgd_cli::CliError;
use asgd_core::engine::{rows_to_csv, Algorithm, TraceRow};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn asgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asgd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const QUADRATIC: &str = r#"
schema_version = 1

[problem]
kind = "quadratic"
diagonal = [1.0, 0.5]
noise_std = 0.1

[step_schedule]
kind = "constant"
gamma0 = 0.005

[batch_schedule]
kind = "fixed"
size = 4

[algorithm]
name = "async"

[run]
iterations = 200
seeds = [1, 2, 3]
"#;

fn quadratic_with(delay: &str) -> String {
    format!("{QUADRATIC}\n[delay]\n{delay}\n")
}

#[test]
fn invalid_configs_exit_64_naming_the_key() {
    let mut seen = 0;
    for entry in fs::read_dir(fixtures().join("invalid")).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let key = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("# expect: "))
            .expect("fixture declares its key");
        for sub in ["run", "check-delay"] {
            let out = asgd(&[sub, "--config", path.to_str().unwrap()]);
            let stderr = String::from_utf8_lossy(&out.stderr);
            assert_eq!(out.status.code(), Some(64), "{}: {stderr}", path.display());
            assert!(
                stderr.contains(&format!("`{key}`")),
                "{}: expected key {key} in {stderr}",
                path.display()
            );
        }
        seen += 1;
    }
    assert!(seen >= 12);
}

#[test]
fn inadmissible_run_exits_2_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "gu.toml", &quadratic_with(r#"kind = "growing_uniform""#));
    let out_dir = dir.path().join("out");
    let args = ["run", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()];
    let refused = asgd(&args);
    assert_eq!(refused.status.code(), Some(2));
    assert!(!out_dir.exists());
    let mut allowed = args.to_vec();
    allowed.push("--allow-inadmissible");
    let out = asgd(&allowed);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("async/seed_3.csv").exists());
}

#[test]
fn io_usage_and_data_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    assert_eq!(asgd(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(74));
    assert_eq!(asgd(&[]).status.code(), Some(64));
    assert_eq!(asgd(&["run"]).status.code(), Some(64));
    let pattern = format!("{}/nothing_*.csv", dir.path().display());
    assert_eq!(asgd(&["rate-fit", &pattern]).status.code(), Some(66));
    let bad = write(dir.path(), "bad_1.csv", "k,value\n0,1\n");
    assert_eq!(asgd(&["rate-fit", bad.to_str().unwrap()]).status.code(), Some(65));
    let window = asgd(&["rate-fit", bad.to_str().unwrap(), "--window", "2"]);
    assert_eq!(window.status.code(), Some(64));
}

fn power_law_trace(scale: f64) -> String {
    let rows: Vec<TraceRow> = (0..=1000)
        .map(|k| TraceRow {
            k,
            gamma: if k == 0 { f64::NAN } else { 0.1 },
            batch: 1,
            grad_norm_sq: scale / (k.max(1) as f64),
            objective: 0.0,
            lyapunov: f64::NAN,
            max_delay: 0,
            mean_delay: 0.0,
            vtime: k as f64,
            rejections: 0,
        })
        .collect();
    rows_to_csv(&rows)
}

#[test]
fn rate_fit_recovers_power_law_slope() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "seed_1.csv", &power_law_trace(3.0));
    write(dir.path(), "seed_2.csv", &power_law_trace(5.0));
    let out = dir.path().join("fit");
    let pattern = format!("{}/seed_*.csv", dir.path().display());
    let report = cmd_rate_fit(&pattern, 0.5, Some(&out)).unwrap();
    assert_eq!(report.files.len(), 2);
    assert!((report.fit.slope + 1.0).abs() < 1e-12, "{}", report.fit.slope);
    assert!((report.fit.intercept - 4f64.ln()).abs() < 1e-9);
    assert!(report.fit.r_squared > 1.0 - 1e-12);
    assert_eq!(report.fit.runs, 2);
    assert!(out.join("rate_fit.json").exists());
}

#[test]
fn compare_of_identical_variants_is_a_tie() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}\n[[variants]]\nname = \"a\"\n\n[[variants]]\nname = \"b\"\n",
        quadratic_with("kind = \"bounded\"\nmax_delay = 3")
    );
    let cfg = write(dir.path(), "twins.toml", &text);
    let out = dir.path().join("out");
    let report = cmd_run(&RunOptions {
        config: cfg,
        out_dir: Some(out.clone()),
        ..Default::default()
    })
    .unwrap();
    let threshold = 2.0 * report.jobs[0].final_mean_grad_norm_sq;
    let patterns: Vec<String> = ["a", "b"]
        .iter()
        .map(|j| format!("{}/{j}/seed_*.csv", out.display()))
        .collect();
    let cmp = cmd_compare(&patterns, threshold, None).unwrap();
    assert_eq!(cmp.groups[0].name, "a");
    assert_eq!(cmp.comparison.by_iterations, vec![vec!["a".to_string(), "b".to_string()]]);
    assert_eq!(cmp.comparison.by_vtime.len(), 1);
    assert!(cmp.comparison.censored.is_empty());
    assert_eq!(
        fs::read(out.join("a/ensemble.csv")).unwrap(),
        fs::read(out.join("b/ensemble.csv")).unwrap()
    );
}

#[test]
fn check_delay_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let verdict = |name: &str, delay: &str| {
        let cfg = write(dir.path(), name, &quadratic_with(delay));
        let report = cmd_check_delay(&cfg, None).unwrap();
        report.jobs[0].verdict.clone().unwrap()
    };
    let growing = verdict("gu.toml", r#"kind = "growing_uniform""#);
    assert!(!growing.admissible);
    assert!(!growing.c1_finite);
    let bounded = verdict("b.toml", "kind = \"bounded\"\nmax_delay = 20");
    assert!(bounded.admissible && bounded.c1_finite && bounded.c1.is_finite());
    assert!(bounded.gamma_max >= bounded.gamma);
    let weibull = verdict(
        "w.toml",
        "kind = \"series_bounded\"\nseries = { family = \"discrete_weibull\", shape = 1.5, scale = 4.0 }",
    );
    assert!(weibull.admissible && weibull.c1_finite);
    let cfg = write(dir.path(), "sys.toml", &quadratic_with("kind = \"system\"\nworkers = 4"));
    let report = cmd_check_delay(&cfg, None).unwrap();
    assert!(report.jobs[0].verdict.is_none());
    assert!(report.jobs[0].note.is_some());
}

#[test]
fn check_delay_binary_reports_json() {
    let cfg = root().join("configs/demo_growing_uniform.toml");
    let out = asgd(&["check-delay", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["jobs"][0]["verdict"]["admissible"], false);
}

#[test]
fn algorithm_override_runs_base_sections_only() {
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_run(&RunOptions {
        config: root().join("configs/fig4.toml"),
        out_dir: Some(dir.path().to_path_buf()),
        algorithm: Some(Algorithm::Sync),
        seed: Some(3),
        ..Default::default()
    })
    .unwrap();
    assert_eq!(report.jobs.len(), 1);
    assert_eq!(report.jobs[0].name, "sync");
    assert_eq!(report.jobs[0].seeds, vec![3]);
    assert!(dir.path().join("sync/seed_3.csv").exists());
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn library_errors_map_to_exit_codes() {
    let err = cmd_rate_fit("/nonexistent/dir/*.csv", 0.5, None).unwrap_err();
    assert!(matches!(err, CliError::EmptyGlob(_)));
    assert_eq!(err.exit_code(), 66);
}
