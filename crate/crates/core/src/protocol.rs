//! Transport-level transaction model, flit format and the AXI channel to
//! physical link mapping.
//!
//! Every AXI beat travels as exactly one flit. Headers are carried on
//! parallel lines next to the payload, so a flit is a typed header plus one
//! beat of payload, sized to fit the physical link it is mapped to.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// AXI limits a burst to a 4 KiB address window.
pub const AXI_BURST_LIMIT_BYTES: u32 = 4096;
pub const NARROW_BEAT_BYTES: u32 = 8;
pub const WIDE_BEAT_BYTES: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("burst of {beats} x {beat_bytes} B exceeds the 4 KiB AXI burst limit")]
    BurstTooLong { beats: u32, beat_bytes: u32 },
    #[error("burst length must be at least one beat")]
    EmptyBurst,
    #[error("atomic transactions carry exactly one beat, got {0}")]
    AtomicBurst(u32),
    #[error("beat size {beat_bytes} B does not match the {width} bus")]
    BeatSize { beat_bytes: u32, width: BusWidth },
    #[error("transaction id {value} does not fit in {width_bits} bits")]
    TxnIdRange { value: u32, width_bits: u8 },
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum PortClass {
    #[default]
    Tile,
    Hbm,
    C2c,
    Peripheral,
}

/// Network address of an endpoint. Tiles sit on mesh coordinates; boundary
/// attachments use a coordinate just outside the mesh (HBM at `x = -1`,
/// C2C at `y = -1`, peripherals at `x = X`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeId {
    pub x: i16,
    pub y: i16,
    #[serde(default)]
    pub class: PortClass,
}

impl NodeId {
    pub const fn tile(x: i16, y: i16) -> Self {
        NodeId {
            x,
            y,
            class: PortClass::Tile,
        }
    }

    pub const fn hbm(row: i16) -> Self {
        NodeId {
            x: -1,
            y: row,
            class: PortClass::Hbm,
        }
    }

    pub const fn c2c(col: i16) -> Self {
        NodeId {
            x: col,
            y: -1,
            class: PortClass::C2c,
        }
    }

    pub const fn peripheral(x_tiles: i16, row: i16) -> Self {
        NodeId {
            x: x_tiles,
            y: row,
            class: PortClass::Peripheral,
        }
    }

    pub fn is_tile(&self) -> bool {
        self.class == PortClass::Tile
    }

    pub fn manhattan(&self, other: &NodeId) -> u32 {
        ((self.x - other.x).unsigned_abs() + (self.y - other.y).unsigned_abs()) as u32
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.class {
            PortClass::Tile => write!(f, "{}:{}", self.x, self.y),
            PortClass::Hbm => write!(f, "hbm{}", self.y),
            PortClass::C2c => write!(f, "c2c{}", self.x),
            PortClass::Peripheral => write!(f, "periph{}", self.y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxnId(pub u32);

impl TxnId {
    pub fn checked(value: u32, width_bits: u8) -> Result<Self, ProtocolError> {
        if width_bits < 32 && value >= (1u32 << width_bits) {
            return Err(ProtocolError::TxnIdRange { value, width_bits });
        }
        Ok(TxnId(value))
    }
}

impl fmt::Display for TxnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Opaque per-transaction tag used by metrics and the data model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TxnTag(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusWidth {
    Narrow,
    Wide,
}

impl BusWidth {
    pub const ALL: [BusWidth; 2] = [BusWidth::Narrow, BusWidth::Wide];

    pub fn beat_bytes(self) -> u32 {
        match self {
            BusWidth::Narrow => NARROW_BEAT_BYTES,
            BusWidth::Wide => WIDE_BEAT_BYTES,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BusWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BusWidth::Narrow => "narrow",
            BusWidth::Wide => "wide",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelKind {
    Ar,
    Aw,
    W,
    R,
    B,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 5] = [
        ChannelKind::Ar,
        ChannelKind::Aw,
        ChannelKind::W,
        ChannelKind::R,
        ChannelKind::B,
    ];

    pub fn is_response(self) -> bool {
        matches!(self, ChannelKind::R | ChannelKind::B)
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Ar => "AR",
            ChannelKind::Aw => "AW",
            ChannelKind::W => "W",
            ChannelKind::R => "R",
            ChannelKind::B => "B",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AxiChannel {
    pub kind: ChannelKind,
    pub width: BusWidth,
}

impl AxiChannel {
    pub const fn new(kind: ChannelKind, width: BusWidth) -> Self {
        AxiChannel { kind, width }
    }

    /// Bits of primary payload the beat actually occupies.
    pub fn payload_used_bits(&self) -> u32 {
        match (self.kind, self.width) {
            (ChannelKind::Ar | ChannelKind::Aw, _) => 48,
            (ChannelKind::B, _) => 2,
            (ChannelKind::W | ChannelKind::R, w) => w.beat_bytes() * 8,
        }
    }
}

impl fmt::Display for AxiChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.width, self.kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiOp {
    Read,
    Write,
    Atomic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    Req,
    Rsp,
    Wide,
}

impl LinkClass {
    pub const ALL: [LinkClass; 3] = [LinkClass::Req, LinkClass::Rsp, LinkClass::Wide];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Width of the primary payload lane; the rest of the flit is header.
    pub fn payload_bits(self) -> u32 {
        match self {
            LinkClass::Req | LinkClass::Rsp => 64,
            LinkClass::Wide => 512,
        }
    }
}

impl fmt::Display for LinkClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkClass::Req => "req",
            LinkClass::Rsp => "rsp",
            LinkClass::Wide => "wide",
        })
    }
}

/// Total flit widths per physical link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkWidths {
    pub req: u32,
    pub rsp: u32,
    pub wide: u32,
}

impl Default for LinkWidths {
    fn default() -> Self {
        LinkWidths {
            req: 119,
            rsp: 103,
            wide: 603,
        }
    }
}

impl LinkWidths {
    pub fn flit_size(&self, link: LinkClass) -> u32 {
        match link {
            LinkClass::Req => self.req,
            LinkClass::Rsp => self.rsp,
            LinkClass::Wide => self.wide,
        }
    }

    pub fn header_bits(&self, link: LinkClass) -> u32 {
        self.flit_size(link).saturating_sub(link.payload_bits())
    }
}

/// Width in bits of a flit on `link` under the default link dimensions.
pub fn flit_size(link: LinkClass) -> u32 {
    LinkWidths::default().flit_size(link)
}

pub fn map_beat_to_link(channel: AxiChannel) -> LinkClass {
    use ChannelKind::*;
    match (channel.width, channel.kind) {
        (BusWidth::Narrow, Ar | Aw | W) => LinkClass::Req,
        (BusWidth::Narrow, R | B) => LinkClass::Rsp,
        (BusWidth::Wide, Ar) => LinkClass::Req,
        (BusWidth::Wide, B) => LinkClass::Rsp,
        (BusWidth::Wide, Aw | W | R) => LinkClass::Wide,
    }
}

/// Output ports of a mesh router. `North` points towards increasing `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Port {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
    Local = 4,
}

impl Port {
    pub const ALL: [Port; 5] = [
        Port::North,
        Port::East,
        Port::South,
        Port::West,
        Port::Local,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Port> {
        Port::ALL.get(idx).copied()
    }

    pub fn opposite(self) -> Port {
        match self {
            Port::North => Port::South,
            Port::South => Port::North,
            Port::East => Port::West,
            Port::West => Port::East,
            Port::Local => Port::Local,
        }
    }

    pub fn is_x(self) -> bool {
        matches!(self, Port::East | Port::West)
    }

    pub fn is_y(self) -> bool {
        matches!(self, Port::North | Port::South)
    }

    pub fn letter(self) -> char {
        match self {
            Port::North => 'N',
            Port::East => 'E',
            Port::South => 'S',
            Port::West => 'W',
            Port::Local => 'L',
        }
    }
}

/// Hop-by-hop route computed at the source, packed three bits per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SourceRoute {
    bits: u64,
    len: u8,
}

impl SourceRoute {
    pub const MAX_STEPS: usize = 21;

    pub fn from_ports(ports: &[Port]) -> Option<Self> {
        if ports.len() > Self::MAX_STEPS {
            return None;
        }
        let mut bits = 0u64;
        for (i, p) in ports.iter().enumerate() {
            bits |= (p.index() as u64) << (3 * i);
        }
        Some(SourceRoute {
            bits,
            len: ports.len() as u8,
        })
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn head(&self) -> Option<Port> {
        if self.len == 0 {
            None
        } else {
            Port::from_index((self.bits & 0b111) as usize)
        }
    }

    /// Route with the head step consumed.
    pub fn advanced(&self) -> Self {
        if self.len == 0 {
            return *self;
        }
        SourceRoute {
            bits: self.bits >> 3,
            len: self.len - 1,
        }
    }

    pub fn to_ports(&self) -> Vec<Port> {
        let mut out = Vec::with_capacity(self.len());
        let mut r = *self;
        while let Some(p) = r.head() {
            out.push(p);
            r = r.advanced();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlitHeader {
    pub src: NodeId,
    pub dst: NodeId,
    pub txn_id: TxnId,
    /// Reorder-buffer slot of the response, `None` when no slot was allocated.
    pub rob_idx: Option<u16>,
    pub channel: AxiChannel,
    /// Wormhole tail marker. Set on every single-flit packet.
    pub last: bool,
    pub atop: bool,
    pub route: Option<SourceRoute>,
}

/// One beat of payload plus the request attributes carried by address flits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Payload {
    pub data: u64,
    pub beat: u16,
    pub burst_len: u16,
    pub op: AxiOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Flit {
    pub header: FlitHeader,
    pub payload: Payload,
    pub tag: TxnTag,
}

impl Flit {
    pub fn link(&self) -> LinkClass {
        map_beat_to_link(self.header.channel)
    }

    pub fn payload_bits(&self) -> u32 {
        self.link().payload_bits()
    }

    pub fn serialized_bits(&self, widths: &LinkWidths) -> u32 {
        let link = self.link();
        widths.header_bits(link) + link.payload_bits()
    }

    pub fn payload_fits(&self) -> bool {
        self.header.channel.payload_used_bits() <= self.payload_bits()
    }
}

pub fn is_wormhole(flit: &Flit) -> bool {
    flit.header.channel.width == BusWidth::Wide
        && matches!(flit.header.channel.kind, ChannelKind::Aw | ChannelKind::W)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AxiBeat {
    pub channel: AxiChannel,
    pub txn_id: TxnId,
    pub data: u64,
    /// AXI `last` of the burst (not the wormhole marker).
    pub last: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxiTransaction {
    pub txn_id: TxnId,
    pub op: AxiOp,
    pub width: BusWidth,
    pub src: NodeId,
    pub dst: NodeId,
    pub burst_len: u16,
    pub beat_bytes: u32,
    pub issue_cycle: u64,
    pub tag: TxnTag,
}

impl AxiTransaction {
    pub fn new(
        txn_id: TxnId,
        op: AxiOp,
        width: BusWidth,
        src: NodeId,
        dst: NodeId,
        burst_len: u16,
        tag: TxnTag,
    ) -> Result<Self, ProtocolError> {
        let txn = AxiTransaction {
            txn_id,
            op,
            width,
            src,
            dst,
            burst_len,
            beat_bytes: width.beat_bytes(),
            issue_cycle: 0,
            tag,
        };
        txn.validate()?;
        Ok(txn)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.burst_len == 0 {
            return Err(ProtocolError::EmptyBurst);
        }
        if self.beat_bytes != self.width.beat_bytes() {
            return Err(ProtocolError::BeatSize {
                beat_bytes: self.beat_bytes,
                width: self.width,
            });
        }
        if self.op == AxiOp::Atomic && self.burst_len != 1 {
            return Err(ProtocolError::AtomicBurst(self.burst_len as u32));
        }
        if self.burst_len as u32 * self.beat_bytes > AXI_BURST_LIMIT_BYTES {
            return Err(ProtocolError::BurstTooLong {
                beats: self.burst_len as u32,
                beat_bytes: self.beat_bytes,
            });
        }
        Ok(())
    }

    pub fn bytes(&self) -> u32 {
        self.burst_len as u32 * self.beat_bytes
    }

    /// Number of response beats the initiator waits for.
    pub fn response_beats(&self) -> u16 {
        match self.op {
            AxiOp::Read => self.burst_len,
            AxiOp::Write => 1,
            AxiOp::Atomic => 2,
        }
    }

    /// Beats the transaction puts on the request channels (address + data).
    pub fn request_beats(&self) -> Vec<AxiBeat> {
        let w = self.width;
        match self.op {
            AxiOp::Read => vec![AxiBeat {
                channel: AxiChannel::new(ChannelKind::Ar, w),
                txn_id: self.txn_id,
                data: 0,
                last: true,
            }],
            AxiOp::Write | AxiOp::Atomic => {
                let mut beats = Vec::with_capacity(self.burst_len as usize + 1);
                beats.push(AxiBeat {
                    channel: AxiChannel::new(ChannelKind::Aw, w),
                    txn_id: self.txn_id,
                    data: 0,
                    last: true,
                });
                for b in 0..self.burst_len {
                    beats.push(AxiBeat {
                        channel: AxiChannel::new(ChannelKind::W, w),
                        txn_id: self.txn_id,
                        data: write_data(self.tag, b),
                        last: b + 1 == self.burst_len,
                    });
                }
                beats
            }
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Write data produced by an initiator for beat `beat` of transaction `tag`.
pub fn write_data(tag: TxnTag, beat: u16) -> u64 {
    splitmix64(tag.0 ^ ((beat as u64) << 48) ^ 0x5752_4954_4500_0000)
}

/// Memory content returned for beat `beat` of a read addressed by `tag`.
pub fn read_data(tag: TxnTag, beat: u16) -> u64 {
    splitmix64(tag.0 ^ ((beat as u64) << 48) ^ 0x5245_4144_0000_0000)
}

/// Flits of one transaction, split by network leg.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packetized {
    pub request: Vec<Flit>,
    pub response: Vec<Flit>,
}

fn base_header(channel: AxiChannel, src: NodeId, dst: NodeId, txn: &AxiTransaction) -> FlitHeader {
    FlitHeader {
        src,
        dst,
        txn_id: txn.txn_id,
        rob_idx: None,
        channel,
        last: true,
        atop: txn.op == AxiOp::Atomic,
        route: None,
    }
}

/// Request-side flits sent by the initiator NI.
///
/// Wide writes (including wide atomics) form one AW+W bundle on the wide
/// link with the wormhole tail set on the final W flit only. Everything else
/// is a train of single-flit packets.
pub fn packetize_request(txn: &AxiTransaction, rob_idx: Option<u16>) -> Vec<Flit> {
    let beats = txn.request_beats();
    let bundle = txn.width == BusWidth::Wide && txn.op != AxiOp::Read;
    let n = beats.len();
    beats
        .into_iter()
        .enumerate()
        .map(|(i, beat)| {
            let mut header = base_header(beat.channel, txn.src, txn.dst, txn);
            header.rob_idx = rob_idx;
            header.last = !bundle || i + 1 == n;
            let beat_idx = if beat.channel.kind == ChannelKind::W {
                i as u16 - 1
            } else {
                0
            };
            Flit {
                header,
                payload: Payload {
                    data: beat.data,
                    beat: beat_idx,
                    burst_len: txn.burst_len,
                    op: txn.op,
                },
                tag: txn.tag,
            }
        })
        .collect()
}

/// A single response flit travelling from `txn.dst` back to `txn.src`.
pub fn response_flit(
    txn: &AxiTransaction,
    kind: ChannelKind,
    beat: u16,
    data: u64,
    rob_idx: Option<u16>,
) -> Flit {
    let mut header = base_header(AxiChannel::new(kind, txn.width), txn.dst, txn.src, txn);
    header.rob_idx = rob_idx;
    Flit {
        header,
        payload: Payload {
            data,
            beat,
            burst_len: txn.burst_len,
            op: txn.op,
        },
        tag: txn.tag,
    }
}

/// All flits a transaction puts on the network: request leg and the
/// response leg returned by a memory target.
pub fn packetize(txn: &AxiTransaction) -> Result<Packetized, ProtocolError> {
    txn.validate()?;
    let request = packetize_request(txn, None);
    let response = match txn.op {
        AxiOp::Read => (0..txn.burst_len)
            .map(|b| response_flit(txn, ChannelKind::R, b, read_data(txn.tag, b), None))
            .collect(),
        AxiOp::Write => vec![response_flit(txn, ChannelKind::B, 0, 0, None)],
        AxiOp::Atomic => vec![
            response_flit(txn, ChannelKind::R, 0, read_data(txn.tag, 0), None),
            response_flit(txn, ChannelKind::B, 0, 0, None),
        ],
    };
    Ok(Packetized { request, response })
}

/// Recover the AXI beats carried by a flit sequence, in order.
pub fn depacketize(flits: &[Flit]) -> Vec<AxiBeat> {
    flits
        .iter()
        .map(|f| {
            let kind = f.header.channel.kind;
            let last = match kind {
                ChannelKind::W | ChannelKind::R => f.payload.beat + 1 == f.payload.burst_len,
                _ => true,
            };
            AxiBeat {
                channel: f.header.channel,
                txn_id: f.header.txn_id,
                data: f.payload.data,
                last,
            }
        })
        .collect()
}
