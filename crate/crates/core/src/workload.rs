//! Workload files: explicit DMA transfers plus pattern blocks that expand to
//! one transfer per tile.
//!
//! ```toml
//! [[transfer]]
//! src = { x = 0, y = 0 }
//! dst = { x = 3, y = 1 }
//! bytes = 8192
//! op = "read"
//!
//! [[pattern]]
//! pattern = "neighbor"
//! bytes = 32768
//! start_cycle = 100
//! ```

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::endpoints::dma::{TransferOp, TransferSpec};
use crate::endpoints::pattern::{pattern_destination, pattern_op, Pattern, PatternParams};
use crate::fabric::NetworkGraph;
use crate::protocol::{AxiOp, NodeId};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("cannot read workload {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("workload: {0}")]
    Parse(String),
    #[error("workload transfer {index}: {message}")]
    Invalid { index: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternBlock {
    pub pattern: Pattern,
    pub bytes: u64,
    #[serde(default)]
    pub start_cycle: u64,
    /// Fixed operation; when absent the pattern decides per tile.
    #[serde(default)]
    pub op: Option<TransferOp>,
    /// Source tiles; all tiles when absent.
    #[serde(default)]
    pub tiles: Option<Vec<NodeId>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadFile {
    pub transfer: Vec<TransferSpec>,
    pub pattern: Vec<PatternBlock>,
}

impl WorkloadFile {
    pub fn parse(text: &str) -> Result<Self, WorkloadError> {
        toml::from_str(text).map_err(|e| WorkloadError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, WorkloadError> {
        let text = std::fs::read_to_string(path).map_err(|source| WorkloadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Explicit transfers followed by expanded pattern blocks, checked
    /// against `graph`.
    pub fn expand<R: Rng + ?Sized>(
        &self,
        graph: &NetworkGraph,
        params: &PatternParams,
        rng: &mut R,
    ) -> Result<Vec<TransferSpec>, WorkloadError> {
        let dims = graph.dims;
        let mut out = self.transfer.clone();
        for b in &self.pattern {
            let srcs: Vec<NodeId> = match &b.tiles {
                Some(t) => t.clone(),
                None => graph.tiles().map(|(_, n)| n).collect(),
            };
            for src in srcs {
                let dst = pattern_destination(b.pattern, src, dims, rng, params);
                let op =
                    b.op.unwrap_or_else(|| match pattern_op(b.pattern, rng, params) {
                        AxiOp::Write => TransferOp::Write,
                        _ => TransferOp::Read,
                    });
                out.push(TransferSpec {
                    src,
                    dst,
                    bytes: b.bytes,
                    op,
                    start_cycle: b.start_cycle,
                });
            }
        }
        for (index, t) in out.iter().enumerate() {
            let bad = |message: String| Err(WorkloadError::Invalid { index, message });
            if t.bytes == 0 {
                return bad("zero-byte transfer".into());
            }
            if !t.src.is_tile() || graph.endpoint_index(t.src).is_none() {
                return bad(format!("source {} is not a tile", t.src));
            }
            if graph.endpoint_index(t.dst).is_none() {
                return bad(format!("destination {} is not attached", t.dst));
            }
            if t.src == t.dst {
                return bad(format!("source and destination are both {}", t.src));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::{build_mesh, MeshConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TEXT: &str = r#"
[[transfer]]
src = { x = 0, y = 0 }
dst = { x = 3, y = 1 }
bytes = 8192
op = "read"

[[pattern]]
pattern = "tiled_matmul"
bytes = 4096
start_cycle = 10
tiles = [{ x = 1, y = 1 }, { x = 2, y = 0 }]
"#;

    #[test]
    fn expands_blocks() {
        let g = build_mesh(&MeshConfig::default()).unwrap();
        let w = WorkloadFile::parse(TEXT).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = w.expand(&g, &PatternParams::default(), &mut rng).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].start_cycle, 0);
        assert_eq!(t[1].dst, NodeId::hbm(1));
        assert_eq!(t[2].dst, NodeId::hbm(0));
        assert_eq!(t[2].start_cycle, 10);
    }

    #[test]
    fn all_tiles_by_default() {
        let g = build_mesh(&MeshConfig::default()).unwrap();
        let w = WorkloadFile::parse(
            "[[pattern]]\npattern = \"neighbor\"\nbytes = 64\nop = \"write\"\n",
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = w.expand(&g, &PatternParams::default(), &mut rng).unwrap();
        assert_eq!(t.len(), 32);
        assert!(t.iter().all(|s| s.op == TransferOp::Write));
    }

    #[test]
    fn rejects_bad_entries() {
        let g = build_mesh(&MeshConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = PatternParams::default();
        let off = "[[transfer]]\nsrc = { x = 0, y = 0 }\ndst = { x = 9, y = 0 }\nbytes = 64\nop = \"read\"\n";
        assert!(WorkloadFile::parse(off)
            .unwrap()
            .expand(&g, &p, &mut rng)
            .is_err());
        let zero = "[[transfer]]\nsrc = { x = 0, y = 0 }\ndst = { x = 1, y = 0 }\nbytes = 0\nop = \"read\"\n";
        assert!(WorkloadFile::parse(zero)
            .unwrap()
            .expand(&g, &p, &mut rng)
            .is_err());
        assert!(WorkloadFile::parse("[[transfer]]\nfoo = 1\n").is_err());
    }
}
