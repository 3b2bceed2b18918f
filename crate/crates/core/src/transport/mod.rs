//! Rank collectives: all-to-all, barrier, max/min reduction and gather.
//!
//! Collective algorithms are shared by every transport and written against
//! a point-to-point [`Link`]: the in-process transport moves envelopes over
//! channels, the TCP transport over a full mesh of sockets.
//!
//! Pairwise phases use an XOR schedule: at step `s` member `i` exchanges
//! with member `i ^ s`, the lower index sending first. Every pair meets
//! exactly once and no cycle of blocked sends can form.
//!
//! Every message carries the communicator id and a per-communicator
//! sequence number, so ranks that disagree about collective order get a
//! protocol error instead of silently mixing data.

mod delay;
mod inproc;
mod tcp;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::Serialize;

use crate::decomp::ProcessGrid;
use crate::error::{Error, Result};
use crate::tensor::ComplexSample;

pub use delay::Delayed;
pub use inproc::{inproc_group, inproc_universe, run_inproc};
pub use tcp::{parse_hosts, read_hosts_file, TcpMesh, WIRE_MAGIC};

/// Per-rank collective counters, shared by all communicators of a rank.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CollectiveStats {
    pub alltoall_calls: u64,
    /// Payload bytes sent to other ranks by all-to-all exchanges.
    pub bytes_sent: u64,
    pub barrier_calls: u64,
}

#[derive(Debug, Default)]
pub struct Counters {
    alltoall_calls: AtomicU64,
    bytes_sent: AtomicU64,
    barrier_calls: AtomicU64,
}

impl Counters {
    pub fn snapshot(&self) -> CollectiveStats {
        CollectiveStats {
            alltoall_calls: self.alltoall_calls.load(Ordering::Relaxed),
            bytes_sent: self.bytes_sent.load(Ordering::Relaxed),
            barrier_calls: self.barrier_calls.load(Ordering::Relaxed),
        }
    }
}

/// A group of ranks that run collectives together.
///
/// Implementations are `Send` so a dedicated communication worker can
/// drive them while another worker of the same rank computes.
pub trait Communicator: Send {
    fn id(&self) -> u32;

    /// Global ranks of the members, in communicator order.
    fn members(&self) -> &[usize];

    fn my_index(&self) -> usize;

    fn size(&self) -> usize {
        self.members().len()
    }

    /// Standard all-to-all: `send` and `recv` are split into `size()` equal
    /// segments; segment `i` of `recv` comes from member `i`.
    fn all_to_all(&mut self, send: &[ComplexSample], recv: &mut [ComplexSample]) -> Result<()>;

    fn barrier(&mut self) -> Result<()>;

    /// `(max, min)` of `value` over members, delivered to member 0 only.
    fn reduce_minmax(&mut self, value: f64) -> Result<Option<(f64, f64)>>;

    /// Every member's buffer, in member order, delivered to member 0 only.
    fn gather(&mut self, data: &[ComplexSample]) -> Result<Option<Vec<Vec<ComplexSample>>>>;

    /// Counters of the owning rank (shared across its communicators).
    fn stats(&self) -> CollectiveStats;
}

pub const WORLD_COMM_ID: u32 = 0;

/// Id of the row communicator for grid row `row`.
pub fn row_comm_id(row: usize) -> u32 {
    1 + row as u32
}

/// Id of the column communicator for grid column `col`.
pub fn column_comm_id(grid: ProcessGrid, col: usize) -> u32 {
    1 + (grid.py() + col) as u32
}

/// Point-to-point message between two ranks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Envelope {
    pub comm_id: u32,
    pub seq: u64,
    pub src: u32,
    pub payload: Vec<u8>,
}

/// Ordered, reliable point-to-point channel to each member of a group.
pub(crate) trait Link: Send {
    fn send(&mut self, peer_index: usize, peer_rank: usize, msg: Envelope) -> Result<()>;
    fn recv(&mut self, peer_index: usize, peer_rank: usize) -> Result<Envelope>;
}

pub(crate) fn encode_samples(samples: &[ComplexSample]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 16);
    for c in samples {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

pub(crate) fn decode_samples(bytes: &[u8], out: &mut [ComplexSample]) {
    debug_assert_eq!(bytes.len(), out.len() * 16);
    for (c, b) in out.iter_mut().zip(bytes.chunks_exact(16)) {
        *c = ComplexSample::new(
            f64::from_le_bytes(b[..8].try_into().unwrap()),
            f64::from_le_bytes(b[8..].try_into().unwrap()),
        );
    }
}

/// Collectives over a [`Link`].
pub(crate) struct GroupComm<L> {
    id: u32,
    members: Vec<usize>,
    my_index: usize,
    seq: u64,
    link: L,
    counters: Arc<Counters>,
}

impl<L: Link> GroupComm<L> {
    pub(crate) fn new(id: u32, members: Vec<usize>, my_index: usize, link: L, counters: Arc<Counters>) -> Self {
        assert!(my_index < members.len());
        GroupComm {
            id,
            members,
            my_index,
            seq: 0,
            link,
            counters,
        }
    }

    fn my_rank(&self) -> usize {
        self.members[self.my_index]
    }

    fn envelope(&self, payload: Vec<u8>) -> Envelope {
        Envelope {
            comm_id: self.id,
            seq: self.seq,
            src: self.my_rank() as u32,
            payload,
        }
    }

    fn send(&mut self, peer: usize, payload: Vec<u8>) -> Result<()> {
        let msg = self.envelope(payload);
        let rank = self.members[peer];
        self.link.send(peer, rank, msg)
    }

    fn recv(&mut self, peer: usize) -> Result<Vec<u8>> {
        let rank = self.members[peer];
        let msg = self.link.recv(peer, rank)?;
        if msg.comm_id != self.id || msg.seq != self.seq || msg.src as usize != rank {
            return Err(Error::Protocol(format!(
                "rank {} expected (comm {}, seq {}, src {}) but got (comm {}, seq {}, src {})",
                self.my_rank(),
                self.id,
                self.seq,
                rank,
                msg.comm_id,
                msg.seq,
                msg.src
            )));
        }
        Ok(msg.payload)
    }

    /// Ordered pairwise exchange; `make` builds the payload for a peer,
    /// `take` consumes what the peer sent.
    fn pairwise(
        &mut self,
        mut make: impl FnMut(usize) -> Vec<u8>,
        mut take: impl FnMut(usize, Vec<u8>) -> Result<()>,
    ) -> Result<()> {
        let m = self.members.len();
        let me = self.my_index;
        for step in 1..m.next_power_of_two() {
            let peer = me ^ step;
            if peer >= m {
                continue;
            }
            let payload = make(peer);
            if me < peer {
                self.send(peer, payload)?;
                let got = self.recv(peer)?;
                take(peer, got)?;
            } else {
                let got = self.recv(peer)?;
                self.send(peer, payload)?;
                take(peer, got)?;
            }
        }
        Ok(())
    }
}

impl<L: Link> Communicator for GroupComm<L> {
    fn id(&self) -> u32 {
        self.id
    }

    fn members(&self) -> &[usize] {
        &self.members
    }

    fn my_index(&self) -> usize {
        self.my_index
    }

    fn all_to_all(&mut self, send: &[ComplexSample], recv: &mut [ComplexSample]) -> Result<()> {
        let m = self.members.len();
        if !send.len().is_multiple_of(m) || recv.len() != send.len() {
            return Err(Error::ShapeMismatch(format!(
                "all_to_all over {m} members with send {} / recv {} samples",
                send.len(),
                recv.len()
            )));
        }
        let seg = send.len() / m;
        let me = self.my_index;
        recv[me * seg..(me + 1) * seg].copy_from_slice(&send[me * seg..(me + 1) * seg]);

        let mut sent = 0u64;
        let result = {
            let recv_cell = &mut *recv;
            self.pairwise(
                |peer| {
                    sent += (seg * 16) as u64;
                    encode_samples(&send[peer * seg..(peer + 1) * seg])
                },
                |peer, bytes| {
                    if bytes.len() != seg * 16 {
                        return Err(Error::Protocol(format!(
                            "segment from member {peer} has {} bytes, expected {}",
                            bytes.len(),
                            seg * 16
                        )));
                    }
                    decode_samples(&bytes, &mut recv_cell[peer * seg..(peer + 1) * seg]);
                    Ok(())
                },
            )
        };
        self.seq += 1;
        self.counters.alltoall_calls.fetch_add(1, Ordering::Relaxed);
        self.counters.bytes_sent.fetch_add(sent, Ordering::Relaxed);
        result
    }

    fn barrier(&mut self) -> Result<()> {
        let result = self.pairwise(|_| Vec::new(), |_, _| Ok(()));
        self.seq += 1;
        self.counters.barrier_calls.fetch_add(1, Ordering::Relaxed);
        result
    }

    fn reduce_minmax(&mut self, value: f64) -> Result<Option<(f64, f64)>> {
        let result = if self.my_index == 0 {
            let (mut hi, mut lo) = (value, value);
            for peer in 1..self.members.len() {
                let bytes = self.recv(peer)?;
                let v = f64::from_le_bytes(bytes.as_slice().try_into().map_err(|_| {
                    Error::Protocol(format!("reduce payload of {} bytes", bytes.len()))
                })?);
                hi = hi.max(v);
                lo = lo.min(v);
            }
            Some((hi, lo))
        } else {
            self.send(0, value.to_le_bytes().to_vec())?;
            None
        };
        self.seq += 1;
        Ok(result)
    }

    fn gather(&mut self, data: &[ComplexSample]) -> Result<Option<Vec<Vec<ComplexSample>>>> {
        let result = if self.my_index == 0 {
            let mut all = vec![data.to_vec()];
            for peer in 1..self.members.len() {
                let bytes = self.recv(peer)?;
                if bytes.len() % 16 != 0 {
                    return Err(Error::Protocol(format!("gather payload of {} bytes", bytes.len())));
                }
                let mut buf = vec![ComplexSample::new(0.0, 0.0); bytes.len() / 16];
                decode_samples(&bytes, &mut buf);
                all.push(buf);
            }
            Some(all)
        } else {
            self.send(0, encode_samples(data))?;
            None
        };
        self.seq += 1;
        Ok(result)
    }

    fn stats(&self) -> CollectiveStats {
        self.counters.snapshot()
    }
}

/// The three communicators one rank needs for a pencil transform.
pub struct RankComms {
    pub rank: usize,
    pub grid: ProcessGrid,
    pub world: Box<dyn Communicator>,
    /// Ranks sharing this rank's grid row (YZ transposes).
    pub row: Box<dyn Communicator>,
    /// Ranks sharing this rank's grid column (XY transposes).
    pub column: Box<dyn Communicator>,
    pub(crate) counters: Arc<Counters>,
}

impl RankComms {
    pub fn stats(&self) -> CollectiveStats {
        self.counters.snapshot()
    }

    /// Wraps the row and column communicators, e.g. to instrument exchanges.
    pub fn map_exchange_comms(
        self,
        mut f: impl FnMut(Box<dyn Communicator>) -> Box<dyn Communicator>,
    ) -> Self {
        RankComms {
            row: f(self.row),
            column: f(self.column),
            ..self
        }
    }
}

impl std::fmt::Debug for RankComms {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RankComms")
            .field("rank", &self.rank)
            .field("grid", &self.grid)
            .field("row", &self.row.members())
            .field("column", &self.column.members())
            .finish()
    }
}
