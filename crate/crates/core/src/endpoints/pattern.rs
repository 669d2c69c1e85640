//! Synthetic traffic patterns.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::protocol::{AxiOp, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Neighbor,
    BitComplement,
    UniformRandom,
    TiledMatmul,
}

impl Pattern {
    pub fn name(self) -> &'static str {
        match self {
            Pattern::Neighbor => "neighbor",
            Pattern::BitComplement => "bit_complement",
            Pattern::UniformRandom => "uniform_random",
            Pattern::TiledMatmul => "tiled_matmul",
        }
    }
}

/// Where the eastmost column sends neighbour traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborEdge {
    /// Column `X-1` targets column 0 of its row.
    #[default]
    Wrap,
    /// Column `X-1` targets column `X-2`.
    Back,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatternParams {
    pub neighbor_edge: NeighborEdge,
    /// Fraction of tiled-matmul transfers that write back to HBM.
    pub matmul_write_fraction: f64,
}

impl Default for PatternParams {
    fn default() -> Self {
        PatternParams {
            neighbor_edge: NeighborEdge::Wrap,
            matmul_write_fraction: 1.0 / 9.0,
        }
    }
}

/// Destination tile or boundary endpoint for traffic leaving `src`.
pub fn pattern_destination<R: Rng + ?Sized>(
    pattern: Pattern,
    src: NodeId,
    dims: (usize, usize),
    rng: &mut R,
    params: &PatternParams,
) -> NodeId {
    let (xs, ys) = (dims.0 as i16, dims.1 as i16);
    match pattern {
        Pattern::Neighbor => {
            if src.x + 1 < xs {
                NodeId::tile(src.x + 1, src.y)
            } else {
                match params.neighbor_edge {
                    NeighborEdge::Wrap => NodeId::tile(0, src.y),
                    NeighborEdge::Back => NodeId::tile((src.x - 1).max(0), src.y),
                }
            }
        }
        Pattern::BitComplement => NodeId::tile(xs - 1 - src.x, ys - 1 - src.y),
        Pattern::UniformRandom => {
            let n = dims.0 * dims.1;
            if n <= 1 {
                return src;
            }
            let me = src.y as usize * dims.0 + src.x as usize;
            let mut k = rng.gen_range(0..n - 1);
            if k >= me {
                k += 1;
            }
            NodeId::tile((k % dims.0) as i16, (k / dims.0) as i16)
        }
        Pattern::TiledMatmul => NodeId::hbm(src.y),
    }
}

/// Operation a pattern issues for one transfer.
pub fn pattern_op<R: Rng + ?Sized>(pattern: Pattern, rng: &mut R, params: &PatternParams) -> AxiOp {
    match pattern {
        Pattern::TiledMatmul if rng.gen_bool(params.matmul_write_fraction.clamp(0.0, 1.0)) => {
            AxiOp::Write
        }
        _ => AxiOp::Read,
    }
}
