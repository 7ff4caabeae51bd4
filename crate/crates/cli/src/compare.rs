//! Reading group results back and comparing them with one-way ANOVA.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use advice_core::stats::{one_way_anova, AnovaResult, StatsError};

use crate::artifacts::{digest_line, RESULTS_HEADER, TRIALS_HEADER};
use crate::config::digest_of;
use crate::CliError;

/// One `<group>_results.csv` file.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupResult {
    pub path: PathBuf,
    pub digest: String,
    pub base: String,
    pub trials: usize,
    pub episodes: usize,
    pub group: String,
    pub fr: f64,
    pub fr_std: f64,
    pub tr: f64,
    pub tr_std: f64,
    pub tr_samples: Vec<f64>,
}

fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
}

fn number<T: std::str::FromStr>(path: &Path, what: &str, s: &str) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Input(format!("{}: bad {what} {s:?}", path.display())))
}

pub fn parse_results(path: &Path, text: &str) -> Result<GroupResult, CliError> {
    let bad = |m: &str| CliError::Input(format!("{}: {m}", path.display()));
    let mut lines = text.lines();
    let first = lines.next().unwrap_or_default();
    let (Some(digest), Some(base)) = (field(first, "digest"), field(first, "base")) else {
        return Err(bad("first line must be `# digest=<hex> base=<hex>`"));
    };
    let second = lines.next().unwrap_or_default();
    let (Some(trials), Some(episodes)) = (field(second, "trials"), field(second, "episodes"))
    else {
        return Err(bad("second line must be `# trials=<n> episodes=<n>`"));
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = reader
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| bad(&e.to_string()))?;
    let joined = |r: &csv::StringRecord| r.iter().collect::<Vec<_>>().join(",");
    if rows.len() < 3 || joined(&rows[0]) != RESULTS_HEADER || joined(&rows[2]) != TRIALS_HEADER {
        return Err(bad("not a results file"));
    }
    let g = &rows[1];
    if g.len() != 5 {
        return Err(bad("group row needs 5 columns"));
    }
    let tr_samples = rows[3..]
        .iter()
        .map(|r| number(path, "TR", r.get(2).unwrap_or_default()))
        .collect::<Result<Vec<f64>, _>>()?;
    let trials: usize = number(path, "trial count", trials)?;
    if tr_samples.len() != trials {
        return Err(bad(&format!(
            "header says {trials} trials but {} trial rows follow",
            tr_samples.len()
        )));
    }
    Ok(GroupResult {
        path: path.to_path_buf(),
        digest: digest.to_string(),
        base: base.to_string(),
        trials,
        episodes: number(path, "episode count", episodes)?,
        group: g[0].to_string(),
        fr: number(path, "FR", &g[1])?,
        fr_std: number(path, "FR_STD", &g[2])?,
        tr: number(path, "TR", &g[3])?,
        tr_std: number(path, "TR_STD", &g[4])?,
        tr_samples,
    })
}

#[derive(Debug)]
pub struct Comparison {
    pub groups: Vec<GroupResult>,
    pub anova: AnovaResult,
    /// Indices into `groups`, best mean TR first.
    pub ordering: Vec<usize>,
}

pub fn compare(groups: Vec<GroupResult>, force: bool) -> Result<Comparison, CliError> {
    if groups.len() < 2 {
        return Err(CliError::Input(format!(
            "compare needs at least 2 result files, got {}",
            groups.len()
        )));
    }
    let first = &groups[0];
    for g in &groups[1..] {
        if g.episodes != first.episodes {
            return Err(CliError::Input(format!(
                "episode counts differ: {} has {}, {} has {}",
                first.path.display(),
                first.episodes,
                g.path.display(),
                g.episodes
            )));
        }
        if g.trials != first.trials {
            return Err(CliError::Input(format!(
                "trial counts differ: {} has {}, {} has {}",
                first.path.display(),
                first.trials,
                g.path.display(),
                g.trials
            )));
        }
        if g.base != first.base && !force {
            return Err(CliError::Input(format!(
                "{} and {} come from different base configs (base {} vs {}); pass --force to compare anyway",
                first.path.display(),
                g.path.display(),
                first.base,
                g.base
            )));
        }
    }
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            if a.digest == b.digest || a.tr_samples == b.tr_samples {
                return Err(CliError::Degenerate(format!(
                    "degenerate input: {} and {} hold the same group",
                    a.path.display(),
                    b.path.display()
                )));
            }
        }
    }
    let samples: Vec<&[f64]> = groups.iter().map(|g| g.tr_samples.as_slice()).collect();
    let anova = one_way_anova(&samples).map_err(|e| match e {
        StatsError::Degenerate => CliError::Degenerate(e.to_string()),
        other => CliError::Input(other.to_string()),
    })?;
    let mut ordering: Vec<usize> = (0..groups.len()).collect();
    ordering.sort_by(|&a, &b| groups[b].tr.total_cmp(&groups[a].tr));
    Ok(Comparison {
        groups,
        anova,
        ordering,
    })
}

impl Comparison {
    /// Aligned table, formatted ANOVA and the ordering by mean TR.
    pub fn report(&self) -> String {
        let w = self
            .groups
            .iter()
            .map(|g| g.group.len())
            .max()
            .unwrap_or(0)
            .max(5);
        let mut s = format!(
            "{:<w$}  {:>12}  {:>10}  {:>14}  {:>12}\n",
            "group", "FR", "FR_STD", "TR", "TR_STD"
        );
        for &i in &self.ordering {
            let g = &self.groups[i];
            writeln!(
                s,
                "{:<w$}  {:>12.2}  {:>10.2}  {:>14.2}  {:>12.2}",
                g.group, g.fr, g.fr_std, g.tr, g.tr_std
            )
            .unwrap();
        }
        writeln!(s, "anova: {}", self.anova).unwrap();
        let names: Vec<&str> = self
            .ordering
            .iter()
            .map(|&i| self.groups[i].group.as_str())
            .collect();
        writeln!(s, "ordering: {}", names.join(" > ")).unwrap();
        s
    }

    /// Results table plus the raw `anova,F,df1,df2,p` line.
    pub fn csv(&self) -> String {
        let digests: Vec<&str> = self.groups.iter().map(|g| g.digest.as_str()).collect();
        let mut s = digest_line(&digest_of(&digests), &self.groups[0].base);
        writeln!(s, "{RESULTS_HEADER}").unwrap();
        for &i in &self.ordering {
            let g = &self.groups[i];
            writeln!(s, "{},{},{},{},{}", g.group, g.fr, g.fr_std, g.tr, g.tr_std).unwrap();
        }
        writeln!(s, "{}", self.anova.csv_line()).unwrap();
        s
    }
}
