//! Multi-process transport over a full mesh of TCP connections.
//!
//! Wire format of every message, little-endian:
//!
//! ```text
//! "CRFW" | comm id: u32 | sequence: u64 | source rank: u32 | payload length: u64 | payload
//! ```
//!
//! The mesh is built at startup: each rank listens on its own address,
//! connects to every lower rank and accepts every higher one. The first
//! message on a fresh connection is a handshake carrying the connecting
//! rank (comm id `u32::MAX`, empty payload).

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::{column_comm_id, row_comm_id, Counters, Envelope, GroupComm, Link, RankComms, WORLD_COMM_ID};
use crate::decomp::ProcessGrid;
use crate::error::{Error, Result};

pub const WIRE_MAGIC: [u8; 4] = *b"CRFW";
const HEADER_LEN: usize = 4 + 4 + 8 + 4 + 8;
const HANDSHAKE_COMM: u32 = u32::MAX;

pub(crate) fn write_envelope<W: Write>(w: &mut W, msg: &Envelope) -> io::Result<()> {
    let mut head = [0u8; HEADER_LEN];
    head[..4].copy_from_slice(&WIRE_MAGIC);
    head[4..8].copy_from_slice(&msg.comm_id.to_le_bytes());
    head[8..16].copy_from_slice(&msg.seq.to_le_bytes());
    head[16..20].copy_from_slice(&msg.src.to_le_bytes());
    head[20..28].copy_from_slice(&(msg.payload.len() as u64).to_le_bytes());
    w.write_all(&head)?;
    w.write_all(&msg.payload)?;
    w.flush()
}

pub(crate) fn read_envelope<R: Read>(r: &mut R) -> io::Result<Envelope> {
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head)?;
    if head[..4] != WIRE_MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad wire magic"));
    }
    let len = u64::from_le_bytes(head[20..28].try_into().unwrap()) as usize;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Envelope {
        comm_id: u32::from_le_bytes(head[4..8].try_into().unwrap()),
        seq: u64::from_le_bytes(head[8..16].try_into().unwrap()),
        src: u32::from_le_bytes(head[16..20].try_into().unwrap()),
        payload,
    })
}

/// Parses a rendezvous file: one `rank host:port` per line, ranks `0..n`.
pub fn parse_hosts(text: &str) -> Result<Vec<SocketAddr>> {
    let mut entries: Vec<(usize, SocketAddr)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::InvalidSize(format!("hosts line {}: {what}: {line:?}", lineno + 1));
        let mut parts = line.split_whitespace();
        let (Some(rank), Some(host), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected `rank host:port`"));
        };
        let rank: usize = rank.parse().map_err(|_| bad("bad rank"))?;
        let addr = host
            .to_socket_addrs()
            .map_err(|e| bad(&e.to_string()))?
            .next()
            .ok_or_else(|| bad("host did not resolve"))?;
        entries.push((rank, addr));
    }
    entries.sort_by_key(|e| e.0);
    for (i, (rank, _)) in entries.iter().enumerate() {
        if *rank != i {
            return Err(Error::InvalidSize(format!(
                "hosts file ranks must be 0..{} without gaps or duplicates",
                entries.len()
            )));
        }
    }
    Ok(entries.into_iter().map(|e| e.1).collect())
}

/// Connected sockets from this rank to every other rank.
pub struct TcpMesh {
    rank: usize,
    streams: Vec<Option<Mutex<TcpStream>>>,
}

impl TcpMesh {
    /// Binds `addrs[rank]` and builds the mesh.
    pub fn connect(rank: usize, addrs: &[SocketAddr], timeout: Duration) -> Result<Arc<Self>> {
        if rank >= addrs.len() {
            return Err(Error::InvalidSize(format!(
                "rank {rank} not in hosts list of {}",
                addrs.len()
            )));
        }
        let listener = TcpListener::bind(addrs[rank])?;
        Self::with_listener(rank, listener, addrs, timeout)
    }

    /// Builds the mesh using an already bound listener for this rank.
    pub fn with_listener(
        rank: usize,
        listener: TcpListener,
        addrs: &[SocketAddr],
        timeout: Duration,
    ) -> Result<Arc<Self>> {
        let size = addrs.len();
        let deadline = Instant::now() + timeout;
        let mut streams: Vec<Option<TcpStream>> = (0..size).map(|_| None).collect();

        for (peer, addr) in addrs.iter().enumerate().take(rank) {
            let mut stream = loop {
                match TcpStream::connect(addr) {
                    Ok(s) => break s,
                    Err(e) if Instant::now() < deadline => {
                        let _ = e;
                        thread::sleep(Duration::from_millis(20));
                    }
                    Err(e) => {
                        return Err(Error::Transport {
                            rank: peer,
                            reason: format!("connect to {addr}: {e}"),
                        })
                    }
                }
            };
            stream.set_nodelay(true)?;
            let hello = Envelope {
                comm_id: HANDSHAKE_COMM,
                seq: 0,
                src: rank as u32,
                payload: Vec::new(),
            };
            write_envelope(&mut stream, &hello).map_err(|e| Error::Transport {
                rank: peer,
                reason: format!("handshake: {e}"),
            })?;
            streams[peer] = Some(stream);
        }

        listener.set_nonblocking(true)?;
        let mut pending = size - rank - 1;
        while pending > 0 {
            match listener.accept() {
                Ok((mut stream, from)) => {
                    stream.set_nonblocking(false)?;
                    stream.set_nodelay(true)?;
                    stream.set_read_timeout(Some(deadline.saturating_duration_since(Instant::now()).max(Duration::from_millis(1))))?;
                    let hello = read_envelope(&mut stream)
                        .map_err(|e| Error::Protocol(format!("handshake from {from}: {e}")))?;
                    stream.set_read_timeout(None)?;
                    let peer = hello.src as usize;
                    if hello.comm_id != HANDSHAKE_COMM || peer <= rank || peer >= size || streams[peer].is_some() {
                        return Err(Error::Protocol(format!(
                            "unexpected handshake from {from} claiming rank {peer}"
                        )));
                    }
                    streams[peer] = Some(stream);
                    pending -= 1;
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        let missing = (rank + 1..size).find(|&p| streams[p].is_none()).unwrap_or(rank);
                        return Err(Error::Transport {
                            rank: missing,
                            reason: "timed out waiting for connection".into(),
                        });
                    }
                    thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(e.into()),
            }
        }

        Ok(Arc::new(TcpMesh {
            rank,
            streams: streams.into_iter().map(|s| s.map(Mutex::new)).collect(),
        }))
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.streams.len()
    }

    fn stream(&self, peer: usize) -> Result<std::sync::MutexGuard<'_, TcpStream>> {
        self.streams
            .get(peer)
            .and_then(Option::as_ref)
            .ok_or_else(|| Error::Transport {
                rank: peer,
                reason: "no connection".into(),
            })?
            .lock()
            .map_err(|_| Error::Transport {
                rank: peer,
                reason: "connection lock poisoned".into(),
            })
    }
}

pub(crate) struct TcpLink {
    mesh: Arc<TcpMesh>,
}

impl Link for TcpLink {
    fn send(&mut self, _peer_index: usize, peer_rank: usize, msg: Envelope) -> Result<()> {
        let mut s = self.mesh.stream(peer_rank)?;
        write_envelope(&mut *s, &msg).map_err(|e| Error::Transport {
            rank: peer_rank,
            reason: format!("send: {e}"),
        })
    }

    fn recv(&mut self, _peer_index: usize, peer_rank: usize) -> Result<Envelope> {
        let mut s = self.mesh.stream(peer_rank)?;
        read_envelope(&mut *s).map_err(|e| Error::Transport {
            rank: peer_rank,
            reason: format!("recv: {e}"),
        })
    }
}

impl RankComms {
    /// World, row and column communicators over an established mesh.
    pub fn tcp(mesh: Arc<TcpMesh>, grid: ProcessGrid) -> Result<RankComms> {
        if mesh.size() != grid.p_total() {
            return Err(Error::InconsistentGrid {
                p_total: mesh.size(),
                py: grid.py(),
                pz: grid.pz(),
            });
        }
        let rank = mesh.rank();
        let counters = Arc::new(Counters::default());
        let (row, col) = grid.coords(rank);
        let make = |id: u32, members: Vec<usize>| {
            let idx = members.iter().position(|&m| m == rank).expect("rank in own group");
            Box::new(GroupComm::new(
                id,
                members,
                idx,
                TcpLink { mesh: mesh.clone() },
                counters.clone(),
            ))
        };
        Ok(RankComms {
            rank,
            grid,
            world: make(WORLD_COMM_ID, (0..grid.p_total()).collect()),
            row: make(row_comm_id(row), grid.row_members(rank)),
            column: make(column_comm_id(grid, col), grid.column_members(rank)),
            counters,
        })
    }
}

/// Reads a hosts file from disk.
pub fn read_hosts_file(path: &std::path::Path) -> Result<Vec<SocketAddr>> {
    let f = std::fs::File::open(path)?;
    let mut text = String::new();
    for line in BufReader::new(f).lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    parse_hosts(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_wire_layout() {
        let msg = Envelope {
            comm_id: 3,
            seq: 0x0102,
            src: 7,
            payload: vec![9, 8, 7],
        };
        let mut buf = Vec::new();
        write_envelope(&mut buf, &msg).unwrap();
        assert_eq!(&buf[..4], b"CRFW");
        assert_eq!(&buf[4..8], &3u32.to_le_bytes());
        assert_eq!(&buf[8..16], &0x0102u64.to_le_bytes());
        assert_eq!(&buf[16..20], &7u32.to_le_bytes());
        assert_eq!(&buf[20..28], &3u64.to_le_bytes());
        assert_eq!(&buf[28..], &[9, 8, 7]);
        assert_eq!(read_envelope(&mut &buf[..]).unwrap(), msg);
        buf[0] = b'X';
        assert!(read_envelope(&mut &buf[..]).is_err());
    }

    #[test]
    fn hosts_file_parsing() {
        let addrs = parse_hosts("1 127.0.0.1:9001\n# comment\n0 127.0.0.1:9000\n\n").unwrap();
        assert_eq!(addrs.len(), 2);
        assert_eq!(addrs[0].port(), 9000);
        assert_eq!(addrs[1].port(), 9001);
        assert!(parse_hosts("0 127.0.0.1:1\n2 127.0.0.1:2\n").is_err());
        assert!(parse_hosts("0 127.0.0.1:1 extra\n").is_err());
        assert!(parse_hosts("x 127.0.0.1:1\n").is_err());
    }
}
