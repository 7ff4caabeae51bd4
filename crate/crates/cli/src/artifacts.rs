//! CSV and manifest writers. Every file starts with a `# digest=... base=...` line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use advice_core::harness::{AggregateResult, ExperimentConfig};
use serde::Serialize;

use crate::CliError;

pub const CURVE_HEADER: &str = "episode,mean_return,std_return,mean_advice_spent";
pub const EVAL_HEADER: &str = "checkpoint_episode,mean_eval_return,std_eval_return";
pub const RESULTS_HEADER: &str = "group,FR,FR_STD,TR,TR_STD";
pub const TRIALS_HEADER: &str = "trial,seed,TR,FR,advice_spent,convergence_episode";

pub fn digest_line(full: &str, base: &str) -> String {
    format!("# digest={full} base={base}\n")
}

/// Learning curve over episodes `1..=N`.
pub fn curve_csv(head: &str, r: &AggregateResult) -> String {
    let mut s = format!("{head}{CURVE_HEADER}\n");
    for e in 0..r.episodes {
        writeln!(
            s,
            "{},{},{},{}",
            e + 1,
            r.mean_returns[e],
            r.std_returns[e],
            r.mean_advice_spent[e]
        )
        .unwrap();
    }
    s
}

pub fn eval_csv(head: &str, r: &AggregateResult) -> String {
    let mut s = format!("{head}{EVAL_HEADER}\n");
    for c in &r.evaluations {
        writeln!(s, "{},{},{}", c.episode, c.mean_return, c.std_return).unwrap();
    }
    s
}

/// Group row, then a blank line and one row per trial.
pub fn results_csv(head: &str, r: &AggregateResult) -> String {
    let mut s = format!("{head}# trials={} episodes={}\n", r.trials, r.episodes);
    writeln!(s, "{RESULTS_HEADER}").unwrap();
    writeln!(
        s,
        "{},{},{},{},{}",
        r.group, r.fr_mean, r.fr_std, r.tr_mean, r.tr_std
    )
    .unwrap();
    writeln!(s, "\n{TRIALS_HEADER}").unwrap();
    for c in &r.curves {
        let conv = c
            .convergence_episode
            .map_or(String::new(), |e| e.to_string());
        writeln!(
            s,
            "{},{},{},{},{},{conv}",
            c.trial,
            c.seed,
            c.total_reward(),
            c.final_reward(),
            c.total_advice()
        )
        .unwrap();
    }
    s
}

pub fn advice_csv(head: &str, r: &AggregateResult) -> String {
    let mut s = format!("{head}trial,episode,step,state_id,intended,advised\n");
    for c in &r.curves {
        for ev in &c.advice_log {
            writeln!(
                s,
                "{},{},{},{},{},{}",
                c.trial, ev.episode, ev.step, ev.state_id, ev.intended, ev.advised
            )
            .unwrap();
        }
    }
    s
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub digest: String,
    pub base_digest: String,
    pub tool_version: String,
    pub group: String,
    pub seed: u64,
    pub jobs: usize,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
    pub config: ExperimentConfig,
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `<dir>/<group>_<kind>`, with characters outside `[A-Za-z0-9._-]` replaced.
pub fn artifact_path(dir: &Path, group: &str, kind: &str) -> PathBuf {
    let safe: String = group
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    dir.join(format!("{safe}_{kind}"))
}
