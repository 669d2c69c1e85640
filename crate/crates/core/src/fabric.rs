//! Mesh construction: three isolated router networks plus boundary
//! attachments, and routing-table generation by walking the built graph.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{LinkClass, LinkWidths, NodeId, Port};
use crate::router::{RouterConfig, RoutingMode, RoutingTable};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FabricError {
    #[error("invalid mesh configuration: {0}")]
    InvalidConfig(String),
    #[error("router {router} ({class}) has no path towards {dst}")]
    UnreachableNode {
        router: NodeId,
        class: LinkClass,
        dst: NodeId,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BufferOverride {
    pub in_buf_depth: Option<usize>,
    pub out_buf_depth: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkOverrides {
    pub req: BufferOverride,
    pub rsp: BufferOverride,
    pub wide: BufferOverride,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub x_tiles: usize,
    pub y_tiles: usize,
    /// One HBM channel per row on the west edge.
    pub hbm_rows: bool,
    /// One chip-to-chip port per column on the south edge.
    pub c2c: bool,
    /// One peripheral port per row on the east edge.
    pub peripherals: bool,
    pub routing: RoutingMode,
    pub router: RouterConfig,
    pub link_widths: LinkWidths,
    pub link_overrides: LinkOverrides,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            x_tiles: 8,
            y_tiles: 4,
            hbm_rows: true,
            c2c: false,
            peripherals: false,
            routing: RoutingMode::Xy,
            router: RouterConfig::default(),
            link_widths: LinkWidths::default(),
            link_overrides: LinkOverrides::default(),
        }
    }
}

impl MeshConfig {
    pub fn router_config(&self, class: LinkClass) -> RouterConfig {
        let o = match class {
            LinkClass::Req => self.link_overrides.req,
            LinkClass::Rsp => self.link_overrides.rsp,
            LinkClass::Wide => self.link_overrides.wide,
        };
        RouterConfig {
            in_buf_depth: o.in_buf_depth.unwrap_or(self.router.in_buf_depth),
            out_buf_depth: o.out_buf_depth.unwrap_or(self.router.out_buf_depth),
            ..self.router
        }
    }

    pub fn validate(&self) -> Result<(), FabricError> {
        let bad = |m: String| Err(FabricError::InvalidConfig(m));
        if self.x_tiles == 0 || self.y_tiles == 0 {
            return bad(format!(
                "mesh must be at least 1x1, got {}x{}",
                self.x_tiles, self.y_tiles
            ));
        }
        if self.x_tiles > 64 || self.y_tiles > 64 {
            return bad("mesh dimensions are limited to 64".into());
        }
        if self.router.num_ports != crate::router::NUM_PORTS {
            return bad(format!(
                "routers have {} ports, got {}",
                crate::router::NUM_PORTS,
                self.router.num_ports
            ));
        }
        for class in LinkClass::ALL {
            let rc = self.router_config(class);
            if rc.in_buf_depth == 0 || rc.out_buf_depth == 0 {
                return bad(format!("{class} buffers must hold at least one flit"));
            }
            if self.link_widths.flit_size(class) <= class.payload_bits() {
                return bad(format!(
                    "{class} link of {} bits leaves no room for a header beside {} payload bits",
                    self.link_widths.flit_size(class),
                    class.payload_bits()
                ));
            }
        }
        if self.routing == RoutingMode::Source {
            let longest = self.x_tiles + self.y_tiles + 1;
            if longest > crate::protocol::SourceRoute::MAX_STEPS {
                return bad(format!(
                    "source routes of {longest} steps do not fit the route field"
                ));
            }
        }
        Ok(())
    }
}

/// One side of a directed link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attach {
    Router { router: usize, port: Port },
    Ni { ni: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub id: usize,
    pub class: LinkClass,
    pub from: Attach,
    pub to: Attach,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouterSpec {
    pub coord: NodeId,
    pub class: LinkClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EndpointSpec {
    pub node: NodeId,
    /// Router coordinate and port the endpoint hangs off.
    pub router_xy: (i16, i16),
    pub port: Port,
}

#[derive(Debug, Clone)]
pub struct NetworkGraph {
    pub dims: (usize, usize),
    pub routers: Vec<RouterSpec>,
    pub endpoints: Vec<EndpointSpec>,
    pub links: Vec<Link>,
    router_at: HashMap<((i16, i16), LinkClass), usize>,
    endpoint_at: HashMap<NodeId, usize>,
    link_from: HashMap<Attach, [Option<usize>; 3]>,
    link_to: HashMap<Attach, [Option<usize>; 3]>,
}

impl NetworkGraph {
    pub fn router_index(&self, xy: (i16, i16), class: LinkClass) -> Option<usize> {
        self.router_at.get(&(xy, class)).copied()
    }

    pub fn endpoint_index(&self, node: NodeId) -> Option<usize> {
        self.endpoint_at.get(&node).copied()
    }

    /// Link leaving `from` on network `class`.
    pub fn link_from(&self, from: Attach, class: LinkClass) -> Option<usize> {
        self.link_from.get(&from).and_then(|l| l[class.index()])
    }

    /// Link arriving at `to` on network `class`.
    pub fn link_to(&self, to: Attach, class: LinkClass) -> Option<usize> {
        self.link_to.get(&to).and_then(|l| l[class.index()])
    }

    pub fn tiles(&self) -> impl Iterator<Item = (usize, NodeId)> + '_ {
        self.endpoints
            .iter()
            .enumerate()
            .filter(|(_, e)| e.node.is_tile())
            .map(|(i, e)| (i, e.node))
    }

    pub fn num_tiles(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    /// Readable description of a link endpoint.
    pub fn describe(&self, a: Attach) -> String {
        match a {
            Attach::Router { router, port } => {
                let r = self.routers[router];
                format!("{}.{}", r.coord, port.letter())
            }
            Attach::Ni { ni } => format!("ni:{}", self.endpoints[ni].node),
        }
    }

    /// Inter-router links per class, counting each direction once.
    pub fn router_edges(&self, class: LinkClass) -> usize {
        self.links
            .iter()
            .filter(|l| l.class == class)
            .filter(|l| {
                matches!(
                    (l.from, l.to),
                    (Attach::Router { .. }, Attach::Router { .. })
                )
            })
            .count()
    }

    pub fn dump(&self, tables: Option<&[RoutingTable]>) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mesh {}x{}", self.dims.0, self.dims.1);
        for (i, r) in self.routers.iter().enumerate() {
            let _ = writeln!(s, "router {i} {} {}", r.coord, r.class);
        }
        for e in &self.endpoints {
            let _ = writeln!(
                s,
                "endpoint {} at {}:{}.{}",
                e.node,
                e.router_xy.0,
                e.router_xy.1,
                e.port.letter()
            );
        }
        for l in &self.links {
            let _ = writeln!(
                s,
                "link {} {} {} -> {}",
                l.id,
                l.class,
                self.describe(l.from),
                self.describe(l.to)
            );
        }
        if let Some(tables) = tables {
            for (i, t) in tables.iter().enumerate() {
                let r = self.routers[i];
                let entries: Vec<_> = t
                    .sorted_entries()
                    .iter()
                    .map(|(d, p)| format!("{d}>{}", p.letter()))
                    .collect();
                let _ = writeln!(s, "table {} {} {}", r.coord, r.class, entries.join(" "));
            }
        }
        s
    }
}

fn step(xy: (i16, i16), port: Port) -> (i16, i16) {
    match port {
        Port::North => (xy.0, xy.1 + 1),
        Port::South => (xy.0, xy.1 - 1),
        Port::East => (xy.0 + 1, xy.1),
        Port::West => (xy.0 - 1, xy.1),
        Port::Local => xy,
    }
}

pub fn build_mesh(cfg: &MeshConfig) -> Result<NetworkGraph, FabricError> {
    cfg.validate()?;
    let (xs, ys) = (cfg.x_tiles as i16, cfg.y_tiles as i16);

    let mut endpoints = Vec::new();
    for y in 0..ys {
        for x in 0..xs {
            endpoints.push(EndpointSpec {
                node: NodeId::tile(x, y),
                router_xy: (x, y),
                port: Port::Local,
            });
        }
    }
    if cfg.hbm_rows {
        for y in 0..ys {
            endpoints.push(EndpointSpec {
                node: NodeId::hbm(y),
                router_xy: (0, y),
                port: Port::West,
            });
        }
    }
    if cfg.c2c {
        for x in 0..xs {
            endpoints.push(EndpointSpec {
                node: NodeId::c2c(x),
                router_xy: (x, 0),
                port: Port::South,
            });
        }
    }
    if cfg.peripherals {
        for y in 0..ys {
            endpoints.push(EndpointSpec {
                node: NodeId::peripheral(xs, y),
                router_xy: (xs - 1, y),
                port: Port::East,
            });
        }
    }

    let mut routers = Vec::new();
    let mut router_at = HashMap::new();
    for class in LinkClass::ALL {
        for y in 0..ys {
            for x in 0..xs {
                router_at.insert(((x, y), class), routers.len());
                routers.push(RouterSpec {
                    coord: NodeId::tile(x, y),
                    class,
                });
            }
        }
    }

    let mut links = Vec::new();
    let mut push = |class, from, to| {
        let id = links.len();
        links.push(Link {
            id,
            class,
            from,
            to,
        });
    };
    for class in LinkClass::ALL {
        for y in 0..ys {
            for x in 0..xs {
                let r = router_at[&((x, y), class)];
                for port in [Port::North, Port::East, Port::South, Port::West] {
                    if let Some(&n) = router_at.get(&(step((x, y), port), class)) {
                        push(
                            class,
                            Attach::Router { router: r, port },
                            Attach::Router {
                                router: n,
                                port: port.opposite(),
                            },
                        );
                    }
                }
            }
        }
        for (i, e) in endpoints.iter().enumerate() {
            let r = router_at[&(e.router_xy, class)];
            push(
                class,
                Attach::Router {
                    router: r,
                    port: e.port,
                },
                Attach::Ni { ni: i },
            );
            push(
                class,
                Attach::Ni { ni: i },
                Attach::Router {
                    router: r,
                    port: e.port,
                },
            );
        }
    }

    let mut link_from: HashMap<Attach, [Option<usize>; 3]> = HashMap::new();
    let mut link_to: HashMap<Attach, [Option<usize>; 3]> = HashMap::new();
    for l in &links {
        link_from.entry(l.from).or_default()[l.class.index()] = Some(l.id);
        link_to.entry(l.to).or_default()[l.class.index()] = Some(l.id);
    }
    let endpoint_at = endpoints
        .iter()
        .enumerate()
        .map(|(i, e)| (e.node, i))
        .collect();

    Ok(NetworkGraph {
        dims: (cfg.x_tiles, cfg.y_tiles),
        routers,
        endpoints,
        links,
        router_at,
        endpoint_at,
        link_from,
        link_to,
    })
}

/// Routing tables for every router, derived from the graph's adjacency:
/// travel along X until the destination's attachment column, then along Y,
/// then take the attachment link.
pub fn gen_tables(graph: &NetworkGraph) -> Result<Vec<RoutingTable>, FabricError> {
    let mut tables = Vec::with_capacity(graph.routers.len());
    for (ri, r) in graph.routers.iter().enumerate() {
        let mut table = RoutingTable::new();
        for (ei, e) in graph.endpoints.iter().enumerate() {
            let unreachable = FabricError::UnreachableNode {
                router: r.coord,
                class: r.class,
                dst: e.node,
            };
            let attach_link = graph
                .link_to(Attach::Ni { ni: ei }, r.class)
                .ok_or(unreachable.clone())?;
            let Attach::Router {
                router: target,
                port: exit,
            } = graph.links[attach_link].from
            else {
                return Err(unreachable);
            };
            if target == ri {
                table.insert(e.node, exit);
                continue;
            }
            let t = graph.routers[target].coord;
            let here = r.coord;
            let dist = |c: NodeId, x_phase: bool| {
                if x_phase {
                    (c.x - t.x).abs()
                } else {
                    (c.y - t.y).abs()
                }
            };
            let x_phase = here.x != t.x;
            let mut best = None;
            for port in [Port::North, Port::East, Port::South, Port::West] {
                let Some(l) = graph.link_from(Attach::Router { router: ri, port }, r.class) else {
                    continue;
                };
                let Attach::Router { router: n, .. } = graph.links[l].to else {
                    continue;
                };
                let nc = graph.routers[n].coord;
                let same_other_axis = if x_phase {
                    nc.y == here.y
                } else {
                    nc.x == here.x
                };
                if same_other_axis && dist(nc, x_phase) < dist(here, x_phase) {
                    best = Some(port);
                }
            }
            table.insert(e.node, best.ok_or(unreachable)?);
        }
        tables.push(table);
    }
    Ok(tables)
}

/// Whether `port` of `router` connects to an endpoint.
pub fn is_ejection(graph: &NetworkGraph, router: usize, port: Port) -> bool {
    let class = graph.routers[router].class;
    graph
        .link_from(Attach::Router { router, port }, class)
        .is_some_and(|l| matches!(graph.links[l].to, Attach::Ni { .. }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::PortClass;
    use crate::router::route_xy;

    fn mesh(x: usize, y: usize, hbm: bool) -> NetworkGraph {
        build_mesh(&MeshConfig {
            x_tiles: x,
            y_tiles: y,
            hbm_rows: hbm,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn default_mesh_counts() {
        let g = mesh(8, 4, true);
        assert_eq!(g.routers.len(), 32 * 3);
        assert_eq!(
            g.endpoints
                .iter()
                .filter(|e| e.node.class == PortClass::Hbm)
                .count(),
            4
        );
        assert_eq!(g.num_tiles(), 32);
        // 2 * (7*4 + 8*3) directed router edges per class
        for c in LinkClass::ALL {
            assert_eq!(g.router_edges(c), 2 * (7 * 4 + 8 * 3));
        }
    }

    #[test]
    fn single_tile_is_tied_off() {
        let g = mesh(1, 1, false);
        assert_eq!(g.routers.len(), 3);
        for c in LinkClass::ALL {
            assert_eq!(g.router_edges(c), 0);
            let r = g.router_index((0, 0), c).unwrap();
            for p in [Port::North, Port::East, Port::South, Port::West] {
                assert!(g
                    .link_from(Attach::Router { router: r, port: p }, c)
                    .is_none());
            }
            assert!(g
                .link_from(
                    Attach::Router {
                        router: r,
                        port: Port::Local
                    },
                    c
                )
                .is_some());
        }
    }

    #[test]
    fn two_by_two_edges() {
        let g = mesh(2, 2, false);
        for c in LinkClass::ALL {
            // four bidirectional edges
            assert_eq!(g.router_edges(c), 8);
        }
    }

    #[test]
    fn classes_are_isolated() {
        let g = mesh(3, 2, true);
        for l in &g.links {
            for a in [l.from, l.to] {
                if let Attach::Router { router, .. } = a {
                    assert_eq!(g.routers[router].class, l.class);
                }
            }
        }
    }

    #[test]
    fn tables_match_xy_exhaustively() {
        let cfg = MeshConfig {
            c2c: true,
            peripherals: true,
            ..Default::default()
        };
        let g = build_mesh(&cfg).unwrap();
        let tables = gen_tables(&g).unwrap();
        let mut pairs = 0;
        for (ri, r) in g.routers.iter().enumerate() {
            for e in &g.endpoints {
                assert_eq!(
                    tables[ri].get(&e.node),
                    Some(route_xy(r.coord, e.node)),
                    "{} -> {}",
                    r.coord,
                    e.node
                );
                pairs += 1;
            }
        }
        assert_eq!(pairs, 96 * (32 + 4 + 8 + 4));
    }

    #[test]
    fn table_self_and_hbm() {
        let g = mesh(8, 4, true);
        let tables = gen_tables(&g).unwrap();
        let r = g.router_index((0, 0), LinkClass::Req).unwrap();
        assert_eq!(tables[r].get(&NodeId::tile(0, 0)), Some(Port::Local));
        assert_eq!(tables[r].get(&NodeId::tile(7, 3)), Some(Port::East));
        for x in 1..8 {
            let r = g.router_index((x, 2), LinkClass::Wide).unwrap();
            assert_eq!(tables[r].get(&NodeId::hbm(2)), Some(Port::West));
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        let err = build_mesh(&MeshConfig {
            x_tiles: 0,
            ..Default::default()
        })
        .unwrap_err();
        assert!(matches!(err, FabricError::InvalidConfig(_)));
    }

    #[test]
    fn dump_lists_everything() {
        let g = mesh(2, 1, true);
        let tables = gen_tables(&g).unwrap();
        let d = g.dump(Some(&tables));
        assert!(d.contains("mesh 2x1"));
        assert!(d.contains("endpoint hbm0 at 0:0.W"));
        assert_eq!(
            d.lines().filter(|l| l.starts_with("link ")).count(),
            g.links.len()
        );
    }
}
