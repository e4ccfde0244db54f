//! Binary records exchanged between the coordinator and the workers.
//!
//! A frame is `u32` length (little endian, counting everything after it),
//! `u8` version, `u8` kind tag, then the payload. Nodes travel as their
//! fixings plus bound and depth; the receiver rebuilds the subproblem from
//! its own copy of the instance.

use std::collections::BTreeMap;

use crate::bnb::BBNode;
use crate::error::{Error, Result};
use crate::heuristic::CutSolution;
use crate::instance::{Graph, Subproblem};

pub const WIRE_VERSION: u8 = 1;

/// A node as it travels between contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub fixed: BTreeMap<usize, u8>,
    pub upper_bound: f64,
    pub depth: usize,
}

impl NodeRecord {
    pub fn of(node: &BBNode) -> Self {
        NodeRecord {
            fixed: node.sub.fixed().clone(),
            upper_bound: node.upper_bound,
            depth: node.depth,
        }
    }

    pub fn rebuild(&self, g: &Graph, id: u64) -> Result<BBNode> {
        if let Some((&v, _)) = self.fixed.iter().find(|(&v, _)| v + 1 >= g.n()) {
            return Err(Error::Decode(format!(
                "fixed vertex {v} out of range for n={}",
                g.n()
            )));
        }
        let sub = Subproblem::from_fixings(g, &self.fixed)?;
        Ok(BBNode {
            sub,
            upper_bound: self.upper_bound,
            depth: self.depth,
            id,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    BroadcastInstance(Graph),
    BroadcastDiff(f64),
    /// `received` counts the transfers this worker has taken in so far, so
    /// the coordinator can tell a stale idle report from a real one.
    WorkerIdle {
        rank: usize,
        received: u64,
    },
    NewIncumbent(CutSolution),
    RequestWorkers {
        rank: usize,
        count: usize,
    },
    AssignWorkers(Vec<usize>),
    SubproblemTransfer {
        node: NodeRecord,
        incumbent: Option<CutSolution>,
    },
    Terminate,
}

impl Message {
    pub fn kind(&self) -> u8 {
        match self {
            Message::BroadcastInstance(_) => 0,
            Message::BroadcastDiff(_) => 1,
            Message::WorkerIdle { .. } => 2,
            Message::NewIncumbent(_) => 3,
            Message::RequestWorkers { .. } => 4,
            Message::AssignWorkers(_) => 5,
            Message::SubproblemTransfer { .. } => 6,
            Message::Terminate => 7,
        }
    }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("field exceeds u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    fn node(&mut self, node: &NodeRecord) {
        self.u32(node.fixed.len());
        for (&v, &side) in &node.fixed {
            self.u32(v);
            self.u8(side);
        }
        self.f64(node.upper_bound);
        self.u32(node.depth);
    }

    fn cut(&mut self, cut: &CutSolution) {
        self.u32(cut.assignment.len());
        self.0.extend_from_slice(&cut.assignment);
        self.f64(cut.value);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(k).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Decode("truncated record".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn side(&mut self) -> Result<u8> {
        match self.u8()? {
            s @ (0 | 1) => Ok(s),
            s => Err(Error::Decode(format!("side value {s}"))),
        }
    }

    fn node(&mut self) -> Result<NodeRecord> {
        let k = self.u32()?;
        let mut fixed = BTreeMap::new();
        let mut prev = None;
        for _ in 0..k {
            let v = self.u32()?;
            if prev.is_some_and(|p| p >= v) {
                return Err(Error::Decode("fixings not strictly ascending".into()));
            }
            prev = Some(v);
            fixed.insert(v, self.side()?);
        }
        Ok(NodeRecord {
            fixed,
            upper_bound: self.f64()?,
            depth: self.u32()?,
        })
    }

    fn cut(&mut self) -> Result<CutSolution> {
        let n = self.u32()?;
        let assignment = (0..n).map(|_| self.side()).collect::<Result<Vec<_>>>()?;
        Ok(CutSolution {
            assignment,
            value: self.f64()?,
        })
    }

    fn finish(&self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(Error::Decode(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )))
        }
    }
}

/// Versioned node record: `u8` version, fixing count, `(u32 vertex, u8 side)`
/// pairs in ascending vertex order, `f64` bound, `u32` depth.
pub fn encode_node(node: &BBNode) -> Vec<u8> {
    encode_record(&NodeRecord::of(node))
}

pub fn encode_record(node: &NodeRecord) -> Vec<u8> {
    let mut w = Writer::default();
    w.u8(WIRE_VERSION);
    w.node(node);
    w.0
}

pub fn decode_record(bytes: &[u8]) -> Result<NodeRecord> {
    let mut r = Reader::new(bytes);
    check_version(r.u8()?)?;
    let node = r.node()?;
    r.finish()?;
    Ok(node)
}

/// Rebuilds a node against the receiver's copy of the instance. The id is
/// not part of the record; decoded nodes get id 0.
pub fn decode_node(bytes: &[u8], g: &Graph) -> Result<BBNode> {
    decode_record(bytes)?.rebuild(g, 0)
}

fn check_version(v: u8) -> Result<()> {
    if v == WIRE_VERSION {
        Ok(())
    } else {
        Err(Error::Decode(format!("unsupported wire version {v}")))
    }
}

pub fn encode_message(msg: &Message) -> Vec<u8> {
    let mut w = Writer::default();
    w.u32(0);
    w.u8(WIRE_VERSION);
    w.u8(msg.kind());
    match msg {
        Message::BroadcastInstance(g) => {
            w.u32(g.n());
            w.u32(g.edges().len());
            for e in g.edges() {
                w.u32(e.i);
                w.u32(e.j);
                w.f64(e.w);
            }
        }
        Message::BroadcastDiff(d) => w.f64(*d),
        Message::WorkerIdle { rank, received } => {
            w.u32(*rank);
            w.u64(*received);
        }
        Message::NewIncumbent(cut) => w.cut(cut),
        Message::RequestWorkers { rank, count } => {
            w.u32(*rank);
            w.u32(*count);
        }
        Message::AssignWorkers(ranks) => {
            w.u32(ranks.len());
            ranks.iter().for_each(|&r| w.u32(r));
        }
        Message::SubproblemTransfer { node, incumbent } => {
            w.node(node);
            match incumbent {
                Some(cut) => {
                    w.u8(1);
                    w.cut(cut);
                }
                None => w.u8(0),
            }
        }
        Message::Terminate => {}
    }
    let len = (w.0.len() - 4) as u32;
    w.0[..4].copy_from_slice(&len.to_le_bytes());
    w.0
}

pub fn decode_message(frame: &[u8]) -> Result<Message> {
    let mut r = Reader::new(frame);
    let len = r.u32()?;
    if len != frame.len() - 4 {
        return Err(Error::Decode(format!(
            "frame length {len} but {} bytes follow",
            frame.len() - 4
        )));
    }
    check_version(r.u8()?)?;
    let msg = match r.u8()? {
        0 => {
            let n = r.u32()?;
            let m = r.u32()?;
            let edges = (0..m)
                .map(|_| Ok((r.u32()?, r.u32()?, r.f64()?)))
                .collect::<Result<Vec<_>>>()?;
            Message::BroadcastInstance(
                Graph::new(n, edges).map_err(|e| Error::Decode(e.to_string()))?,
            )
        }
        1 => Message::BroadcastDiff(r.f64()?),
        2 => Message::WorkerIdle {
            rank: r.u32()?,
            received: r.u64()?,
        },
        3 => Message::NewIncumbent(r.cut()?),
        4 => Message::RequestWorkers {
            rank: r.u32()?,
            count: r.u32()?,
        },
        5 => {
            let k = r.u32()?;
            Message::AssignWorkers((0..k).map(|_| r.u32()).collect::<Result<_>>()?)
        }
        6 => {
            let node = r.node()?;
            let incumbent = match r.u8()? {
                0 => None,
                1 => Some(r.cut()?),
                t => return Err(Error::Decode(format!("incumbent tag {t}"))),
            };
            Message::SubproblemTransfer { node, incumbent }
        }
        7 => Message::Terminate,
        k => return Err(Error::Decode(format!("unknown message kind {k}"))),
    };
    r.finish()?;
    Ok(msg)
}
