//! Ranks as threads of one process, exchanging envelopes over per-pair
//! channels. Payloads are copied on send.

use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;
use std::thread;

use super::{column_comm_id, row_comm_id, Communicator, Counters, Envelope, GroupComm, Link, RankComms, WORLD_COMM_ID};
use crate::decomp::ProcessGrid;
use crate::error::{Error, Result};

pub(crate) struct InprocLink {
    /// `to[i]` delivers to member `i`.
    to: Vec<Sender<Envelope>>,
    /// `from[i]` carries messages from member `i`.
    from: Vec<Receiver<Envelope>>,
}

impl Link for InprocLink {
    fn send(&mut self, peer_index: usize, peer_rank: usize, msg: Envelope) -> Result<()> {
        self.to[peer_index].send(msg).map_err(|_| Error::Transport {
            rank: peer_rank,
            reason: "peer hung up".into(),
        })
    }

    fn recv(&mut self, peer_index: usize, peer_rank: usize) -> Result<Envelope> {
        self.from[peer_index].recv().map_err(|_| Error::Transport {
            rank: peer_rank,
            reason: "peer hung up".into(),
        })
    }
}

fn links(m: usize) -> Vec<InprocLink> {
    // channel (src, dst) for every ordered pair
    let mut senders: Vec<Vec<Option<Sender<Envelope>>>> = (0..m).map(|_| (0..m).map(|_| None).collect()).collect();
    let mut receivers: Vec<Vec<Option<Receiver<Envelope>>>> = (0..m).map(|_| (0..m).map(|_| None).collect()).collect();
    for src in 0..m {
        for dst in 0..m {
            let (tx, rx) = channel();
            senders[src][dst] = Some(tx);
            receivers[dst][src] = Some(rx);
        }
    }
    senders
        .into_iter()
        .zip(receivers)
        .map(|(to, from)| InprocLink {
            to: to.into_iter().map(Option::unwrap).collect(),
            from: from.into_iter().map(Option::unwrap).collect(),
        })
        .collect()
}

/// One communicator per member of `members`, each with its own counters.
pub fn inproc_group(id: u32, members: &[usize]) -> Vec<Box<dyn Communicator>> {
    links(members.len())
        .into_iter()
        .enumerate()
        .map(|(i, link)| {
            Box::new(GroupComm::new(id, members.to_vec(), i, link, Arc::new(Counters::default())))
                as Box<dyn Communicator>
        })
        .collect()
}

fn group_with_counters(id: u32, members: &[usize], counters: &[Arc<Counters>]) -> Vec<Box<dyn Communicator>> {
    links(members.len())
        .into_iter()
        .enumerate()
        .map(|(i, link)| {
            Box::new(GroupComm::new(id, members.to_vec(), i, link, counters[members[i]].clone()))
                as Box<dyn Communicator>
        })
        .collect()
}

/// World, row and column communicators for every rank of `grid`.
pub fn inproc_universe(grid: ProcessGrid) -> Vec<RankComms> {
    let p = grid.p_total();
    let counters: Vec<Arc<Counters>> = (0..p).map(|_| Arc::new(Counters::default())).collect();
    let mut world: Vec<Option<Box<dyn Communicator>>> = group_with_counters(WORLD_COMM_ID, &(0..p).collect::<Vec<_>>(), &counters)
        .into_iter()
        .map(Some)
        .collect();
    let mut rows: Vec<Option<Box<dyn Communicator>>> = (0..p).map(|_| None).collect();
    let mut cols: Vec<Option<Box<dyn Communicator>>> = (0..p).map(|_| None).collect();
    for row in 0..grid.py() {
        let members = grid.row_members(grid.rank_of(row, 0));
        for (c, &r) in group_with_counters(row_comm_id(row), &members, &counters).into_iter().zip(&members) {
            rows[r] = Some(c);
        }
    }
    for col in 0..grid.pz() {
        let members = grid.column_members(grid.rank_of(0, col));
        for (c, &r) in group_with_counters(column_comm_id(grid, col), &members, &counters).into_iter().zip(&members) {
            cols[r] = Some(c);
        }
    }
    (0..p)
        .map(|rank| RankComms {
            rank,
            grid,
            world: world[rank].take().unwrap(),
            row: rows[rank].take().unwrap(),
            column: cols[rank].take().unwrap(),
            counters: counters[rank].clone(),
        })
        .collect()
}

/// Runs `f` once per rank of `grid`, each on its own thread, and returns
/// the results in rank order.
pub fn run_inproc<F, R>(grid: ProcessGrid, f: F) -> Result<Vec<R>>
where
    F: Fn(RankComms) -> R + Sync,
    R: Send,
{
    let comms = inproc_universe(grid);
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = comms
            .into_iter()
            .map(|c| {
                thread::Builder::new()
                    .name(format!("rank-{}", c.rank))
                    .spawn_scoped(s, move || f(c))
                    .map_err(Error::Io)
            })
            .collect::<Result<_>>()?;
        handles
            .into_iter()
            .enumerate()
            .map(|(rank, h)| {
                h.join().map_err(|e| {
                    let msg = e
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_default();
                    Error::WorkerPanic(format!("rank {rank}: {msg}"))
                })
            })
            .collect()
    })
}
