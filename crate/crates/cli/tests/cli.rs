use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn advice_rl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_advice-rl"))
        .args(args)
        .env_remove("ADVICE_RL_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Runs a shortened chain group into `out` and returns the results path.
fn run_chain(teacher: &str, out: &Path, extra: &[&str]) -> PathBuf {
    let cfg = configs().join(format!("chain_{teacher}.toml"));
    let mut args = vec![
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--trials",
        "20",
    ];
    args.extend_from_slice(extra);
    let o = advice_rl(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out.join(format!("{teacher}_results.csv"))
}

/// `<state>,<a0>,<a1>` rows of an oracle snapshot.
fn q_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("state"))
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn run_writes_four_digest_headed_artifacts() {
    let dir = TempDir::new().unwrap();
    run_chain("optimal", dir.path(), &["--seed", "7"]);
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "optimal_curve.csv",
            "optimal_eval.csv",
            "optimal_manifest.toml",
            "optimal_results.csv"
        ]
    );
    for n in &names {
        let text = fs::read_to_string(dir.path().join(n)).unwrap();
        assert!(text.starts_with("# digest="), "{n}");
        assert!(!text.contains('\r'), "{n}");
    }
    let curve = fs::read_to_string(dir.path().join("optimal_curve.csv")).unwrap();
    let lines: Vec<&str> = curve.lines().collect();
    assert_eq!(lines[1], "episode,mean_return,std_return,mean_advice_spent");
    assert_eq!(lines.len(), 2 + 300);
    let eval = fs::read_to_string(dir.path().join("optimal_eval.csv")).unwrap();
    assert_eq!(
        eval.lines().nth(1),
        Some("checkpoint_episode,mean_eval_return,std_eval_return")
    );
    let manifest = fs::read_to_string(dir.path().join("optimal_manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 7"));
    assert!(manifest.contains("wall_clock_seconds"));
}

#[test]
fn reruns_are_byte_identical_across_job_counts() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    run_chain("random", a.path(), &["--jobs", "1"]);
    run_chain("random", b.path(), &["--jobs", "4"]);
    for f in ["random_curve.csv", "random_eval.csv", "random_results.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn out_dir_defaults_to_the_environment_variable() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_advice-rl"))
        .args(["run", "--config"])
        .arg(configs().join("chain_none.toml"))
        .args(["--trials", "2", "--episodes", "5"])
        .env("ADVICE_RL_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("none_results.csv").exists());
}

#[test]
fn invalid_configs_exit_2_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let base = fs::read_to_string(configs().join("chain_optimal.toml")).unwrap();
    for (text, field) in [
        (base.replace("gamma = 0.8", "gamma = 1.2"), "gamma"),
        (
            base.replace("epsilon = 0.1", "epsilon = 0.1\nepsilom = 2"),
            "epsilom",
        ),
        (
            base.replace("trials = 300", "trials = 0"),
            "experiment.trials",
        ),
    ] {
        let path = dir.path().join("bad.toml");
        fs::write(&path, text).unwrap();
        let o = advice_rl(&["run", "--config", path.to_str().unwrap(), "--out", "unused"]);
        assert_eq!(code(&o), 2);
        assert!(stderr(&o).contains(field), "{}", stderr(&o));
    }
    assert!(!Path::new("unused").exists());
}

#[test]
fn divergence_exits_3() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("pursuit_none.toml"))
        .unwrap()
        .replace("sarsa_linear", "q_linear")
        .replace("gamma = 0.999", "gamma = 1.0\ndivergence_bound = 10000.0")
        .replace("alpha = 0.001", "alpha = 1.0");
    let path = dir.path().join("diverge.toml");
    fs::write(&path, text).unwrap();
    let o = advice_rl(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--trials",
        "1",
        "--episodes",
        "200",
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
}

#[test]
fn compare_reports_anova_and_ordering() {
    let dir = TempDir::new().unwrap();
    let files: Vec<PathBuf> = ["optimal", "random", "poor", "none"]
        .iter()
        .map(|t| run_chain(t, dir.path(), &[]))
        .collect();
    let mut args = vec!["compare".to_string()];
    args.extend(files.iter().map(|p| p.display().to_string()));
    args.extend(["--out".into(), dir.path().display().to_string()]);
    let o = advice_rl(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("anova: F(3, 76)"), "{out}");
    assert!(out.contains("p < 1e-15"), "{out}");
    assert!(out.contains("ordering: optimal > "), "{out}");
    let csv = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# digest="));
    assert_eq!(lines[1], "group,FR,FR_STD,TR,TR_STD");
    assert_eq!(lines.len(), 7);
    let anova: Vec<&str> = lines[6].split(',').collect();
    assert_eq!(anova[..1], ["anova"]);
    assert_eq!(anova[2..4], ["3", "76"]);
    // the raw p-value is kept even below the display floor
    let p: f64 = anova[4].parse().unwrap();
    assert!((0.0..1e-15).contains(&p), "{p}");
}

#[test]
fn compare_refuses_duplicates_and_mismatches() {
    let dir = TempDir::new().unwrap();
    let none = run_chain("none", dir.path(), &[]);
    let n = none.to_str().unwrap();
    let o = advice_rl(&["compare", n, n]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("degenerate"));

    let other_seed = run_chain("poor", &dir.path().join("s"), &["--seed", "99"]);
    let p = other_seed.to_str().unwrap();
    let o = advice_rl(&["compare", n, p]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--force"));
    assert_eq!(code(&advice_rl(&["compare", n, p, "--force"])), 0);

    let short = run_chain("optimal", &dir.path().join("e"), &["--episodes", "50"]);
    let o = advice_rl(&["compare", n, short.to_str().unwrap(), "--force"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("episode counts differ"));
}

#[test]
fn oracle_matches_the_chain_closed_form() {
    let dir = TempDir::new().unwrap();
    let solve = |gamma: &str, tol: &str| {
        let path = dir.path().join(format!("q_{gamma}_{tol}.csv"));
        let o = advice_rl(&[
            "oracle",
            "--domain",
            "linear_chain",
            "--gamma",
            gamma,
            "--tol",
            tol,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let text = fs::read_to_string(path).unwrap();
        assert!(text.starts_with("# digest="));
        q_rows(&text)
    };
    let q = solve("0.8", "1e-10");
    assert_eq!(q.len(), 50);
    // one step from the goal, moving right ends the episode at cost 1
    assert!((q[48][1] + 1.0).abs() <= 1e-9);
    for (s, row) in q.iter().enumerate().take(49) {
        // V*(s) = -(1 - 0.8^(49 - s)) / 0.2
        let v = -(1.0 - 0.8f64.powi(49 - s as i32)) / 0.2;
        assert!((row[1] - v).abs() <= 1e-9, "state {s}");
    }

    let myopic = solve("0", "1e-10");
    for row in &myopic[..49] {
        assert_eq!(row, &vec![-1.0, -1.0]);
    }

    let loose = solve("0.8", "1e-2");
    let gap = loose
        .iter()
        .flatten()
        .zip(q.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap <= 1e-2, "{gap}");
}

#[test]
fn oracle_rejects_non_finite_and_infinite_domains() {
    let o = advice_rl(&["oracle", "--gamma", "NaN"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("gamma"));
    let o = advice_rl(&["oracle", "--domain", "grid_pursuit"]);
    assert_eq!(code(&o), 2);
}

/// Row-major `sigma_pi` block of an assumption report.
fn sigma_pi(report: &str) -> Vec<Vec<f64>> {
    report
        .lines()
        .skip_while(|l| *l != "sigma_pi:")
        .skip(1)
        .take_while(|l| l.starts_with("  "))
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn check_assumptions_reports_verdicts_and_covariances() {
    let dir = TempDir::new().unwrap();
    let single = configs().join("single_state_linear.toml");
    let o = advice_rl(&["check-assumptions", "--config", single.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("gamma: 0.9"));
    assert!(stdout(&o).trim_end().ends_with("overall: pass"));

    let report_path = dir.path().join("two_state.txt");
    let two = configs().join("two_state_linear.toml");
    let o = advice_rl(&[
        "check-assumptions",
        "--config",
        two.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(report_path).unwrap();
    assert!(text.starts_with("# digest="));
    // stationary distribution (0.6, 0.4), both actions equally likely
    let expected = [0.3, 0.3, 0.2, 0.2];
    let sigma = sigma_pi(&text);
    assert_eq!(sigma.len(), 4);
    for (i, row) in sigma.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let want = if i == j { expected[i] } else { 0.0 };
            assert!((v - want).abs() <= 0.05, "sigma_pi[{i}][{j}] = {v}");
        }
    }

    // a discount close to 1 can fail; the report still prints each min eigenvalue
    let pursuit = configs().join("pursuit_none.toml");
    let o = advice_rl(&["check-assumptions", "--config", pursuit.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).matches("min_eigenvalue:").count(), 5);
}
