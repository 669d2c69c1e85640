//! Experiment configuration: TOML file plus dotted `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::endpoints::dma::{DmaConfig, TransferOp};
use crate::endpoints::memory::{MemoryEndpointConfig, MemoryKind};
use crate::endpoints::pattern::{NeighborEdge, Pattern, PatternParams};
use crate::endpoints::trace::MixedTraffic;
use crate::engine::{SimOptions, SimSetup};
use crate::fabric::MeshConfig;
use crate::ni::NiConfig;
use crate::protocol::NodeId;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("override `{key}`: {message}")]
    Override { key: String, message: String },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryConfig {
    pub spm_latency: u64,
    pub spm_rate: f64,
    pub hbm_latency: u64,
    pub hbm_rate: f64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        let (s, h) = (MemoryEndpointConfig::spm(), MemoryEndpointConfig::hbm());
        MemoryConfig {
            spm_latency: s.access_latency,
            spm_rate: s.accept_rate,
            hbm_latency: h.access_latency,
            hbm_rate: h.accept_rate,
        }
    }
}

impl MemoryConfig {
    pub fn spm(&self) -> MemoryEndpointConfig {
        MemoryEndpointConfig {
            kind: MemoryKind::Spm,
            access_latency: self.spm_latency,
            accept_rate: self.spm_rate,
        }
    }

    pub fn hbm(&self) -> MemoryEndpointConfig {
        MemoryEndpointConfig {
            kind: MemoryKind::Hbm,
            access_latency: self.hbm_latency,
            accept_rate: self.hbm_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub deadlock_window: u64,
    pub merge_req_rsp: bool,
    pub trace_flits: bool,
    pub trace_routers: bool,
    /// Leading share of a measurement window discarded as warm-up.
    pub warmup_fraction: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let o = SimOptions::default();
        SimConfig {
            deadlock_window: o.deadlock_window,
            merge_req_rsp: o.merge_req_rsp,
            trace_flits: o.trace_flits,
            trace_routers: o.trace_routers,
            warmup_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadConfig {
    /// Patterns run by the traffic preset.
    pub patterns: Vec<Pattern>,
    pub op: TransferOp,
    pub sizes_kib: Vec<u64>,
    pub neighbor_edge: NeighborEdge,
    pub matmul_write_fraction: f64,
    /// Each tile's narrow port keeps one read in flight towards the DMA
    /// destination while its transfer runs.
    pub narrow_probe: bool,
    /// Tile whose narrow reads are swept by the latency preset.
    pub latency_source: NodeId,
    /// Bytes each tile reads from HBM in the hbm-load preset.
    pub hbm_bytes: u64,
    /// Mixed traffic of the ordering-compare preset.
    pub mixed: MixedTraffic,
    /// Transfers and pattern blocks for the `run` preset.
    pub file: Option<PathBuf>,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        let p = PatternParams::default();
        WorkloadConfig {
            patterns: vec![Pattern::Neighbor, Pattern::BitComplement],
            op: TransferOp::Read,
            sizes_kib: vec![1, 2, 4, 8, 16, 32],
            neighbor_edge: p.neighbor_edge,
            matmul_write_fraction: p.matmul_write_fraction,
            narrow_probe: true,
            latency_source: NodeId::tile(0, 0),
            hbm_bytes: 64 * 1024,
            mixed: MixedTraffic::default(),
            file: None,
        }
    }
}

impl WorkloadConfig {
    pub fn pattern_params(&self) -> PatternParams {
        PatternParams {
            neighbor_edge: self.neighbor_edge,
            matmul_write_fraction: self.matmul_write_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub max_cycles: u64,
    pub output_dir: PathBuf,
    pub mesh: MeshConfig,
    pub ni: NiConfig,
    pub dma: DmaConfig,
    pub memory: MemoryConfig,
    pub sim: SimConfig,
    pub workload: WorkloadConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            max_cycles: 1_000_000,
            output_dir: PathBuf::from("out"),
            mesh: MeshConfig::default(),
            ni: NiConfig::default(),
            dma: DmaConfig::default(),
            memory: MemoryConfig::default(),
            sim: SimConfig::default(),
            workload: WorkloadConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn sim_setup(&self) -> SimSetup {
        SimSetup {
            mesh: self.mesh,
            ni: self.ni,
            dma: self.dma,
            spm: self.memory.spm(),
            hbm: self.memory.hbm(),
            opts: SimOptions {
                deadlock_window: self.sim.deadlock_window,
                merge_req_rsp: self.sim.merge_req_rsp,
                trace_flits: self.sim.trace_flits,
                trace_routers: self.sim.trace_routers,
                log_beats: false,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.mesh.x_tiles == 0 {
            return Err(invalid("mesh.x_tiles", "must be at least 1"));
        }
        if self.mesh.y_tiles == 0 {
            return Err(invalid("mesh.y_tiles", "must be at least 1"));
        }
        self.mesh
            .validate()
            .map_err(|e| invalid("mesh", e.to_string()))?;
        self.ni.validate().map_err(|m| invalid("ni", m))?;
        self.dma.validate().map_err(|m| invalid("dma", m))?;
        self.memory
            .spm()
            .validate()
            .map_err(|m| invalid("memory.spm", m))?;
        self.memory
            .hbm()
            .validate()
            .map_err(|m| invalid("memory.hbm", m))?;
        self.workload
            .mixed
            .validate()
            .map_err(|m| invalid("workload.mixed", m))?;
        if self.max_cycles == 0 {
            return Err(invalid("max_cycles", "must be positive"));
        }
        if self.sim.deadlock_window == 0 {
            return Err(invalid("sim.deadlock_window", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.sim.warmup_fraction) {
            return Err(invalid("sim.warmup_fraction", "must be in [0, 1)"));
        }
        if self.workload.sizes_kib.is_empty() || self.workload.sizes_kib.contains(&0) {
            return Err(invalid(
                "workload.sizes_kib",
                "needs at least one positive size",
            ));
        }
        if self.workload.hbm_bytes == 0 {
            return Err(invalid("workload.hbm_bytes", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.workload.matmul_write_fraction) {
            return Err(invalid(
                "workload.matmul_write_fraction",
                "must be in [0, 1]",
            ));
        }
        let s = self.workload.latency_source;
        if !s.is_tile() || s.x as usize >= self.mesh.x_tiles || s.y as usize >= self.mesh.y_tiles {
            return Err(invalid(
                "workload.latency_source",
                format!("{s} is not a tile of the mesh"),
            ));
        }
        Ok(())
    }
}

/// Parse a value the way TOML would; bare words become strings.
fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Set `a.b.c = value` inside `table`, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override {
            key: key.into(),
            message: "empty key segment".into(),
        });
    }
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for p in path {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => {
                return Err(ConfigError::Override {
                    key: key.into(),
                    message: format!("`{p}` is not a table"),
                });
            }
        };
    }
    cur.insert(last.to_string(), parse_value(raw));
    Ok(())
}

/// Parse TOML text, apply overrides and validate.
pub fn parse_config(
    text: &str,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig, ConfigError> {
    // First pass on the raw text so errors point at file locations.
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let cfg = if overrides.is_empty() {
        cfg
    } else {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Override {
                key: overrides
                    .iter()
                    .map(|(k, _)| k.as_str())
                    .collect::<Vec<_>>()
                    .join(", "),
                message: e.message().to_string(),
            })?
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(
    path: &Path,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.into(),
        source,
    })?;
    let mut cfg = parse_config(&text, overrides)?;
    // relative workload paths in a file are taken from the file's directory
    let from_cli = overrides.iter().any(|(k, _)| k == "workload.file");
    if let (Some(f), Some(dir), false) = (&cfg.workload.file, path.parent(), from_cli) {
        if f.is_relative() {
            cfg.workload.file = Some(dir.join(f));
        }
    }
    Ok(cfg)
}
