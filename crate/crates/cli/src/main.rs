//! `dynclt` command-line front end.
//!
//! Exit codes: 0 all checks pass, 1 a Monte-Carlo verdict is inconsistent,
//! 2 the configuration is unusable, 3 a hypothesis checker or engine
//! reported that the theorem's assumptions fail.

mod config;
mod experiment;
mod presets;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::ExperimentConfig;
use experiment::{EXIT_CONFIG, EXIT_HYPOTHESIS};

#[derive(Parser)]
#[command(name = "dynclt", version, about = "Central limit theorem experiments on finite Markov shifts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for Monte-Carlo sampling (defaults to available parallelism).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write a built-in experiment's config to `<out>/config.txt` and run it.
    Preset {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// List the built-in experiments.
    List,
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    config_path: &'a Path,
    seed: u64,
    workers: usize,
    wall_time_seconds: f64,
    exit_code: i32,
}

/// A run that stopped before producing a report: exit code 2 and a one-line message.
#[derive(Debug)]
struct ConfigFailure(String);

/// Runs one experiment, writes the bundle and returns the exit code.
/// Hypothesis failures are printed to stderr but still count as a finished run.
fn run(config_path: &Path, out: &Path, seed: Option<u64>, workers: Option<usize>) -> Result<i32, ConfigFailure> {
    let start = Instant::now();
    let text = fs::read_to_string(config_path)
        .map_err(|e| ConfigFailure(format!("cannot read {}: {e}", config_path.display())))?;
    let mut config: ExperimentConfig =
        text.parse().map_err(|e| ConfigFailure(format!("{}: {e}", config_path.display())))?;
    if let Some(seed) = seed {
        config.run.seed = seed;
    }
    let seed = config.run.seed;
    let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ConfigFailure(format!("cannot start {workers} workers: {e}")))?;
    let outcome = pool
        .install(|| experiment::run(config))
        .map_err(|e| ConfigFailure(format!("{}: {}", config_path.display(), e.0)))?;
    fs::create_dir_all(out).map_err(|e| ConfigFailure(format!("cannot create {}: {e}", out.display())))?;
    let code = outcome.report.exit_code;
    let write = || -> std::io::Result<()> {
        let mut json = serde_json::to_string_pretty(&outcome.report).map_err(std::io::Error::other)?;
        json.push('\n');
        fs::write(out.join("report.json"), json)?;
        if let Some(samples) = &outcome.samples {
            let mut csv = String::with_capacity(samples.len() * 24 + 8);
            csv.push_str("sample\n");
            for s in samples {
                csv.push_str(&format!("{s:.16e}\n"));
            }
            fs::write(out.join("samples.csv"), csv)?;
        }
        let meta = Meta {
            tool: "dynclt",
            version: env!("CARGO_PKG_VERSION"),
            config_path,
            seed,
            workers,
            wall_time_seconds: start.elapsed().as_secs_f64(),
            exit_code: code,
        };
        let mut json = serde_json::to_string_pretty(&meta).map_err(std::io::Error::other)?;
        json.push('\n');
        fs::write(out.join("meta.json"), json)
    };
    write().map_err(|e| ConfigFailure(format!("cannot write to {}: {e}", out.display())))?;
    if code == EXIT_HYPOTHESIS {
        for f in &outcome.report.failures {
            eprintln!("dynclt: {}: {}", f.stage, f.message);
        }
    }
    Ok(code)
}

fn run_preset(name: &str, out: &Path, seed: Option<u64>, workers: Option<usize>) -> Result<i32, ConfigFailure> {
    let Some(preset) = presets::find(name) else {
        let names: Vec<_> = presets::PRESETS.iter().map(|p| p.name).collect();
        return Err(ConfigFailure(format!("unknown preset `{name}` (known: {})", names.join(", "))));
    };
    let path = out.join("config.txt");
    fs::create_dir_all(out)
        .and_then(|_| fs::write(&path, preset.config))
        .map_err(|e| ConfigFailure(format!("cannot write {}: {e}", path.display())))?;
    run(&path, out, seed, workers)
}

fn listing() -> String {
    presets::PRESETS.iter().map(|p| format!("{:<22} {}\n", p.name, p.description)).collect()
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run { config, out, seed, workers } => run(&config, &out, seed, workers),
        Command::Preset { name, out, seed, workers } => run_preset(&name, &out, seed, workers),
        Command::List => {
            print!("{}", listing());
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(ConfigFailure(msg)) => {
            eprintln!("dynclt: {msg}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    const NAMES: [&str; 5] = ["bernoulli-rademacher", "two-state-gap", "coboundary", "period2-indicator", "doubling-map-note"];

    fn report(dir: &Path) -> Value {
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
    }

    fn run_text(dir: &Path, text: &str) -> Result<i32, ConfigFailure> {
        let config = dir.join("config.txt");
        fs::write(&config, text).unwrap();
        run(&config, &dir.join("out"), None, Some(2))
    }

    #[test]
    fn listing_names_every_preset_with_its_theorem() {
        let text = listing();
        assert!(text.lines().count() >= 5);
        for name in NAMES {
            let line = text.lines().find(|l| l.split_whitespace().next() == Some(name)).expect(name);
            assert!(line.contains("thm"), "{line}");
        }
    }

    #[test]
    fn presets_round_trip_through_run() {
        let dir = tempfile::tempdir().unwrap();
        for name in NAMES {
            let a = dir.path().join(format!("{name}-preset"));
            let code = run_preset(name, &a, None, Some(2)).unwrap();
            assert!([0, 1, 3].contains(&code), "{name}: {code}");
            let b = dir.path().join(format!("{name}-run"));
            assert_eq!(run(&a.join("config.txt"), &b, None, Some(1)).unwrap(), code, "{name}");
            assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap(), "{name}");
            assert_eq!(report(&b)["config"]["preset"], name);
        }
    }

    #[test]
    fn bernoulli_reports_unit_variance_by_every_route() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_preset("bernoulli-rademacher", dir.path(), None, Some(2)).unwrap(), 0);
        let r = report(dir.path());
        for route in ["series", "martingale_difference", "forward"] {
            let v = r["sigma2"][route].as_f64().unwrap();
            assert!((v - 1.0).abs() <= 1e-12, "{route} = {v}");
        }
        assert_eq!(r["exit_code"], 0);
        assert_eq!(r["schema_version"], 1);
    }

    #[test]
    fn period2_marks_summability_as_failed() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_preset("period2-indicator", dir.path(), None, Some(1)).unwrap(), EXIT_HYPOTHESIS);
        let r = report(dir.path());
        let entries = r["conditions"]["thm2"]["entries"].as_array().unwrap();
        let cond2 = entries.iter().find(|e| e["name"] == "thm2.cond2").unwrap();
        assert_eq!(cond2["verdict"], "fail");
        assert!(!dir.path().join("samples.csv").exists());
    }

    #[test]
    fn samples_csv_has_header_and_17_significant_digits() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[system]\nsidedness = one_sided\n[matrix]\n0.9, 0.1\n0.2, 0.8\n[observable]\npreset = centered-indicator\n\
                    [run]\nkind = clt\nn_grid = 10, 200\nsamples = 600\nseed = 11\n";
        assert!([0, 1].contains(&run_text(dir.path(), text).unwrap()));
        let csv = fs::read_to_string(dir.path().join("out/samples.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("sample"));
        let values: Vec<&str> = lines.collect();
        assert_eq!(values.len(), 600);
        for v in &values {
            let mantissa = v.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{v}");
            v.parse::<f64>().unwrap();
        }
        let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/meta.json")).unwrap()).unwrap();
        assert_eq!(meta["seed"], 11);
        assert_eq!(meta["workers"], 2);
        assert!(meta["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    }

    #[test]
    fn seed_override_and_workers() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[system]\nsidedness = one_sided\n[matrix]\n0.5, 0.5\n0.5, 0.5\n[observable]\npreset = rademacher\n\
                    [run]\nkind = clt\nn_grid = 100\nsamples = 500\nseed = 3\n";
        let config = dir.path().join("c.txt");
        fs::write(&config, text).unwrap();
        let out = |name: &str| dir.path().join(name);
        run(&config, &out("a"), None, Some(1)).unwrap();
        run(&config, &out("b"), Some(3), Some(3)).unwrap();
        run(&config, &out("c"), Some(4), Some(1)).unwrap();
        let csv = |name: &str| fs::read(out(name).join("samples.csv")).unwrap();
        assert_eq!(csv("a"), csv("b"));
        assert_ne!(csv("a"), csv("c"));
        assert_eq!(report(&out("c"))["config"]["run"]["seed"], 4);
    }

    #[test]
    fn matrix_row_summing_to_point_nine_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[system]\nsidedness = one_sided\n[matrix]\n0.5, 0.5\n0.4, 0.5\n[observable]\npreset = rademacher\n[run]\nkind = gordin\n";
        let ConfigFailure(msg) = run_text(dir.path(), text).unwrap_err();
        assert!(!msg.contains('\n'), "{msg}");
        assert!(msg.contains("row 1"), "{msg}");
        assert!(msg.contains("0.9"), "{msg}");
        assert!(!dir.path().join("out/report.json").exists());
    }

    #[test]
    fn every_outcome_maps_to_a_documented_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("", None),
            ("[system]\nsidedness = sideways\n", None),
            ("[system]\nsidedness = one_sided\n[matrix]\n0.5, 0.5\n0.5, 0.5\n[observable]\npreset = rademacher\n[run]\nkind = clt\nsamples = 10\n", None),
            ("[system]\nsidedness = one_sided\n[matrix]\n1, 0\n0, 1\n[observable]\npreset = rademacher\n[run]\nkind = gordin\n", None),
            ("[system]\nsidedness = one_sided\n[matrix]\n0.5, 0.5\n0.5, 0.5\n[observable]\noffset = 0\nlength = 1\nvalues = 1, 0\n[run]\nkind = gordin\n", Some(EXIT_HYPOTHESIS)),
            ("[system]\nsidedness = one_sided\n[matrix]\n0.5, 0.5\n0.5, 0.5\n[observable]\npreset = rademacher\n[run]\nkind = gordin\n", Some(0)),
        ];
        for (i, (text, expected)) in cases.iter().enumerate() {
            let sub = dir.path().join(i.to_string());
            fs::create_dir_all(&sub).unwrap();
            match (run_text(&sub, text), expected) {
                (Ok(code), Some(e)) => assert_eq!(code, *e, "case {i}"),
                (Err(ConfigFailure(msg)), None) => assert!(!msg.is_empty() && !msg.contains('\n'), "case {i}: {msg}"),
                (got, _) => panic!("case {i}: {got:?}"),
            }
        }
        assert!(run(Path::new("/nonexistent/config.txt"), dir.path(), None, None).is_err());
        let ConfigFailure(msg) = run_preset("nope", dir.path(), None, None).unwrap_err();
        assert!(msg.contains("bernoulli-rademacher"), "{msg}");
    }
}
