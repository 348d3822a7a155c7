//! Experiment configuration: a flat, sectioned key-value text format.
//!
//! ```text
//! # comment
//! [system]
//! sidedness = one_sided
//!
//! [matrix]
//! 0.9, 0.1
//! 0.2, 0.8
//!
//! [observable]
//! preset = centered-indicator      # or: offset / length / values
//!
//! [run]
//! kind = all
//! n_grid = 10, 100, 1000, 10000
//! samples = 4000
//! seed = 7
//! ```
//!
//! Every `[run]` key is optional; see [`RunConfig::default`].

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use dynclt::Sidedness;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Gordin,
    Forward,
    Clt,
    Conditions,
    All,
}

impl Kind {
    pub fn includes(self, other: Kind) -> bool {
        self == Kind::All || self == other
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "gordin" => Kind::Gordin,
            "forward" => Kind::Forward,
            "clt" => Kind::Clt,
            "conditions" => Kind::Conditions,
            "all" => Kind::All,
            other => return Err(format!("unknown kind `{other}` (expected gordin, forward, clt, conditions or all)")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ObservableSpec {
    /// `+1` on symbol 0, `-1` on symbol 1, at coordinate 0.
    Rademacher,
    /// `1{w_0 = 0} - pi_0`.
    CenteredIndicator,
    /// `r - U r` with `r` the Rademacher observable.
    Coboundary,
    Table { offset: i64, length: usize, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub kind: Kind,
    pub n_grid: Vec<usize>,
    /// Birkhoff length for the Monte-Carlo verdict.
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_terms: usize,
    pub r_max: usize,
    pub k_max: usize,
    pub alpha: f64,
    pub eps: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kind: Kind::All,
            n_grid: vec![10, 100, 1000, 10_000],
            n: 10_000,
            samples: 4000,
            seed: 7,
            tol: 1e-12,
            max_terms: 10_000,
            r_max: 10_000,
            k_max: 200,
            alpha: 1.5,
            eps: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub sidedness: Sidedness,
    pub matrix: Vec<Vec<f64>>,
    pub observable: ObservableSpec,
    pub run: RunConfig,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    System,
    Matrix,
    Observable,
    Run,
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| err(line, format!("bad value for `{key}`: {e}")))
}

fn parse_list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    value.split(',').map(|v| parse_value(line, key, v.trim())).collect()
}

impl FromStr for ExperimentConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut section = Section::None;
        let mut preset = None;
        let mut sidedness = None;
        let mut matrix = Vec::new();
        let mut observable_preset = None;
        let (mut offset, mut length, mut values) = (None, None, None);
        let mut run = RunConfig::default();
        let mut n_set = false;
        let mut samples_line = 0;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = match name.trim() {
                    "system" => Section::System,
                    "matrix" => Section::Matrix,
                    "observable" => Section::Observable,
                    "run" => Section::Run,
                    other => return Err(err(line, format!("unknown section [{other}]"))),
                };
                continue;
            }
            if section == Section::Matrix {
                let row: Vec<f64> = parse_list(line, "matrix row", content)?;
                matrix.push(row);
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
            match (section, key) {
                (Section::None, _) => return Err(err(line, "key outside of any section")),
                (Section::System, "preset") => preset = Some(value.to_string()),
                (Section::System, "sidedness") => sidedness = Some(parse_value(line, key, value)?),
                (Section::Observable, "preset") => observable_preset = Some((line, value.to_string())),
                (Section::Observable, "offset") => offset = Some(parse_value::<i64>(line, key, value)?),
                (Section::Observable, "length") => length = Some(parse_value::<usize>(line, key, value)?),
                (Section::Observable, "values") => values = Some(parse_list::<f64>(line, key, value)?),
                (Section::Run, "kind") => run.kind = value.parse().map_err(|e: String| err(line, e))?,
                (Section::Run, "n_grid") => {
                    run.n_grid = parse_list(line, key, value)?;
                    if run.n_grid.is_empty() || run.n_grid[0] == 0 || run.n_grid.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(err(line, "n_grid must be strictly increasing positive integers"));
                    }
                }
                (Section::Run, "n") => {
                    run.n = parse_value(line, key, value)?;
                    n_set = true;
                    if run.n == 0 {
                        return Err(err(line, "n must be positive"));
                    }
                }
                (Section::Run, "samples") => {
                    run.samples = parse_value(line, key, value)?;
                    samples_line = line;
                }
                (Section::Run, "seed") => run.seed = parse_value(line, key, value)?,
                (Section::Run, "tol") => run.tol = positive(line, key, value)?,
                (Section::Run, "max_terms") => run.max_terms = parse_value(line, key, value)?,
                (Section::Run, "r_max") => run.r_max = parse_value(line, key, value)?,
                (Section::Run, "k_max") => run.k_max = parse_value(line, key, value)?,
                (Section::Run, "alpha") => {
                    run.alpha = parse_value(line, key, value)?;
                    if !(run.alpha > 1.0) {
                        return Err(err(line, "alpha must be > 1"));
                    }
                }
                (Section::Run, "eps") => run.eps = positive(line, key, value)?,
                (_, other) => return Err(err(line, format!("unknown key `{other}`"))),
            }
        }

        if !n_set {
            run.n = *run.n_grid.last().expect("n_grid is non-empty");
        }
        if run.kind.includes(Kind::Clt) && run.samples < dynclt::clt::MIN_VERDICT_SAMPLES {
            return Err(err(
                samples_line,
                format!("samples must be >= {} for clt runs", dynclt::clt::MIN_VERDICT_SAMPLES),
            ));
        }
        if run.kind.includes(Kind::Conditions) && run.k_max < 4 {
            return Err(err(0, "k_max must be >= 4"));
        }
        if matrix.is_empty() {
            return Err(err(0, "missing [matrix] section"));
        }
        let observable = match (observable_preset, offset, length, values) {
            (Some((line, name)), None, None, None) => match name.as_str() {
                "rademacher" => ObservableSpec::Rademacher,
                "centered-indicator" => ObservableSpec::CenteredIndicator,
                "coboundary" => ObservableSpec::Coboundary,
                other => return Err(err(line, format!("unknown observable preset `{other}`"))),
            },
            (None, Some(offset), Some(length), Some(values)) => ObservableSpec::Table { offset, length, values },
            (None, None, None, None) => return Err(err(0, "missing [observable] section")),
            _ => return Err(err(0, "observable needs either `preset` or all of offset, length, values")),
        };
        Ok(ExperimentConfig {
            preset,
            sidedness: sidedness.ok_or_else(|| err(0, "missing `sidedness` in [system]"))?,
            matrix,
            observable,
            run,
        })
    }
}

fn positive(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse_value(line, key, value)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(err(line, format!("`{key}` must be positive")));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAP: &str = "
[system]
sidedness = one_sided
[matrix]
0.9, 0.1
0.2, 0.8
[observable]
preset = centered-indicator
[run]
kind = all
n_grid = 10, 100
samples = 600
";

    #[test]
    fn parses_a_full_config() {
        let c: ExperimentConfig = GAP.parse().unwrap();
        assert_eq!(c.matrix, vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        assert_eq!(c.sidedness, Sidedness::OneSided);
        assert_eq!(c.observable, ObservableSpec::CenteredIndicator);
        assert_eq!(c.run.n_grid, vec![10, 100]);
        assert_eq!(c.run.n, 100);
        assert_eq!(c.run.samples, 600);
        assert_eq!(c.run.seed, 7);
    }

    #[test]
    fn parses_tables_and_comments() {
        let text = "[system]\nsidedness = two_sided # invertible\n[matrix]\n0.5,0.5\n0.5,0.5\n[observable]\noffset = -1\nlength = 1\nvalues = 1, -1\n[run]\nkind = forward\n";
        let c: ExperimentConfig = text.parse().unwrap();
        assert_eq!(c.observable, ObservableSpec::Table { offset: -1, length: 1, values: vec![1.0, -1.0] });
        assert_eq!(c.run.kind, Kind::Forward);
    }

    #[test]
    fn rejects_bad_input() {
        let bad_kind = GAP.replace("kind = all", "kind = everything");
        assert_eq!(bad_kind.parse::<ExperimentConfig>().unwrap_err().line, 10);
        let bad_grid = GAP.replace("10, 100", "100, 10");
        assert!(bad_grid.parse::<ExperimentConfig>().is_err());
        let few = GAP.replace("samples = 600", "samples = 100");
        assert!(few.parse::<ExperimentConfig>().unwrap_err().message.contains("samples"));
        assert!(GAP.replace("[run]", "[run]\nfoo = 1").parse::<ExperimentConfig>().is_err());
        assert!(GAP.replace("0.2, 0.8", "0.2, x").parse::<ExperimentConfig>().is_err());
    }
}
