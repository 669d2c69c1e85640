//! Command-line front end: `floosim <preset> --config <file> [--key=value ...] --out <dir>`.

pub mod presets;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use thiserror::Error;

use crate::config::{load_config, parse_config, ConfigError, ExperimentConfig};
use crate::engine::{DeadlockReport, SimError};
use crate::workload::WorkloadError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("deadlock at cycle {} with {} transactions outstanding", .0.cycle, .0.outstanding)]
    Deadlock(DeadlockReport),
    #[error("run stopped at max_cycles = {cycle} with {outstanding} transactions outstanding")]
    Incomplete { cycle: u64, outstanding: usize },
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::Workload(_)
            | CliError::Usage(_)
            | CliError::Io(_)
            | CliError::Csv(_) => 1,
            CliError::Deadlock(_) | CliError::Incomplete { .. } => 2,
            CliError::Sim(SimError::Fabric(_)) => 1,
            CliError::Sim(_) => 3,
        }
    }
}

/// Files and summary lines produced by a preset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Output {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<String>,
}

impl Output {
    pub fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn line(&mut self, s: String) {
        self.summary.push(s);
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), std::io::Error> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        let mut text = self.summary.join("\n");
        text.push('\n');
        std::fs::write(dir.join("summary.txt"), text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    LatencySweep,
    Traffic,
    HbmLoad,
    OrderingCompare,
    /// Transfers from `workload.file`.
    Run,
}

#[derive(Debug, Parser)]
#[command(
    name = "floosim",
    version,
    about = "Cycle-accurate multi-link NoC simulator"
)]
pub struct Args {
    #[arg(value_enum)]
    pub preset: Preset,
    /// TOML experiment file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the resolved configuration to the output directory.
    #[arg(long)]
    pub dump_config: bool,
}

const OWN_FLAGS: [&str; 5] = ["config", "out", "dump-config", "help", "version"];

/// Pull `--key=value` pairs that are not flags of the command out of `args`.
pub fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        if let Some((k, v)) = a.strip_prefix("--").and_then(|s| s.split_once('=')) {
            if !OWN_FLAGS.contains(&k) {
                overrides.push((k.to_string(), v.to_string()));
                continue;
            }
        }
        rest.push(a);
    }
    (rest, overrides)
}

pub fn resolve_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
    env_seed: Option<&str>,
) -> Result<ExperimentConfig, CliError> {
    let mut overrides = overrides.to_vec();
    if let Some(seed) = env_seed {
        let seed: u64 = seed.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "FLOOSIM_SEED must be an unsigned integer, got `{seed}`"
            ))
        })?;
        overrides.push(("seed".into(), seed.to_string()));
    }
    Ok(match path {
        Some(p) => load_config(p, &overrides)?,
        None => parse_config("", &overrides)?,
    })
}

pub fn run_preset(preset: Preset, cfg: &ExperimentConfig) -> Result<Output, CliError> {
    Ok(match preset {
        Preset::LatencySweep => presets::latency_sweep(cfg)?.1,
        Preset::Traffic => presets::traffic(cfg)?.1,
        Preset::HbmLoad => presets::hbm_load(cfg)?.1,
        Preset::OrderingCompare => presets::ordering_compare(cfg)?.1,
        Preset::Run => presets::run_workload(cfg)?.1,
    })
}

fn execute(args: Vec<String>) -> Result<(), CliError> {
    let (rest, overrides) = split_overrides(args);
    let parsed = Args::try_parse_from(rest).map_err(|e| {
        if matches!(
            e.kind(),
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
        ) {
            print!("{e}");
            std::process::exit(0);
        }
        CliError::Usage(e.to_string().trim_start_matches("error: ").to_string())
    })?;
    let env_seed = std::env::var("FLOOSIM_SEED").ok();
    let cfg = resolve_config(parsed.config.as_deref(), &overrides, env_seed.as_deref())?;
    let dir = parsed.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let mut out = match run_preset(parsed.preset, &cfg) {
        Ok(o) => o,
        Err(CliError::Deadlock(r)) => {
            for b in &r.blocked {
                eprintln!("  {b}");
            }
            return Err(CliError::Deadlock(r));
        }
        Err(e) => return Err(e),
    };
    if parsed.dump_config {
        let text = toml::to_string(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
        out.file("config.toml", text.into_bytes());
    }
    out.write_to(&dir)?;
    let mut stdout = std::io::stdout().lock();
    for l in &out.summary {
        if writeln!(stdout, "{l}").is_err() {
            break;
        }
    }
    Ok(())
}

/// Entry point; returns the process exit code.
pub fn main_with_args(args: Vec<String>) -> i32 {
    match execute(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn overrides_are_split_from_flags() {
        let (rest, ov) = split_overrides(s(&[
            "floosim",
            "traffic",
            "--out=o",
            "--mesh.x_tiles=4",
            "--seed=3",
        ]));
        assert_eq!(rest, s(&["floosim", "traffic", "--out=o"]));
        assert_eq!(
            ov,
            vec![
                ("mesh.x_tiles".into(), "4".into()),
                ("seed".into(), "3".into())
            ]
        );
    }

    #[test]
    fn env_seed_overrides_config() {
        let c = resolve_config(None, &[], Some("42")).unwrap();
        assert_eq!(c.seed, 42);
        assert!(resolve_config(None, &[], Some("x")).is_err());
    }

    #[test]
    fn exit_codes() {
        let e = resolve_config(None, &[("mesh.x_tiles".into(), "0".into())], None).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        let d = CliError::Deadlock(DeadlockReport {
            cycle: 5,
            outstanding: 1,
            blocked: vec![],
        });
        assert_eq!(d.exit_code(), 2);
        assert_eq!(
            CliError::Sim(SimError::Invariant("x".into())).exit_code(),
            3
        );
    }

    #[test]
    fn output_writes_files_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Output::default();
        o.file("a.csv", b"x\n1\n".to_vec());
        o.line("done".into());
        o.write_to(dir.path()).unwrap();
        assert_eq!(std::fs::read(dir.path().join("a.csv")).unwrap(), b"x\n1\n");
        assert_eq!(
            std::fs::read_to_string(dir.path().join("summary.txt")).unwrap(),
            "done\n"
        );
    }
}
