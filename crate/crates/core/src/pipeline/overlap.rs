//! Chunked transpose execution, sequential or with a dedicated
//! communication worker.
//!
//! With overlap on, the rank's own thread packs and unpacks while a second
//! worker owns the communicator and runs the all-to-all for each chunk:
//!
//! ```text
//! compute: pack0 | pack1 | ........ | unpack0 | pack2 | ... | unpackK-1
//! comm:          | exch0 ...........| exch1 ..................|
//! ```
//!
//! `pack(c)` always finishes before `exchange(c)` is posted, and
//! `unpack(c)` never starts before `exchange(c)` has completed.

use std::sync::mpsc;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::exchange::{ExchangeKind, ExchangePlan};
use crate::tensor::ComplexSample;
use crate::transport::Communicator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Pack,
    /// From the moment the chunk is handed to the collective until the
    /// collective returns.
    Exchange,
    Unpack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub rank: usize,
    pub stage: ExchangeKind,
    pub phase: Phase,
    pub chunk: usize,
    pub start: Duration,
    pub end: Duration,
}

/// Timestamped record of pack/exchange/unpack intervals.
#[derive(Debug)]
pub struct ScheduleTrace {
    origin: Instant,
    events: Mutex<Vec<TraceEvent>>,
}

impl Default for ScheduleTrace {
    fn default() -> Self {
        Self::new()
    }
}

impl ScheduleTrace {
    pub fn new() -> Self {
        ScheduleTrace {
            origin: Instant::now(),
            events: Mutex::new(Vec::new()),
        }
    }

    pub fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    pub fn record(&self, event: TraceEvent) {
        self.events.lock().unwrap_or_else(|e| e.into_inner()).push(event);
    }

    pub fn events(&self) -> Vec<TraceEvent> {
        self.events.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Pack intervals lying strictly inside an exchange window of the same
    /// rank and stage.
    pub fn packs_inside_exchanges(&self) -> Vec<(TraceEvent, TraceEvent)> {
        let ev = self.events();
        let mut out = Vec::new();
        for p in ev.iter().filter(|e| e.phase == Phase::Pack) {
            if let Some(x) = ev.iter().find(|x| {
                x.phase == Phase::Exchange
                    && x.rank == p.rank
                    && x.stage == p.stage
                    && x.start < p.start
                    && p.end < x.end
            }) {
                out.push((*p, *x));
            }
        }
        out
    }
}

struct Recorder<'a> {
    trace: Option<&'a ScheduleTrace>,
    rank: usize,
    stage: ExchangeKind,
}

impl Recorder<'_> {
    fn now(&self) -> Duration {
        self.trace.map(ScheduleTrace::now).unwrap_or_default()
    }

    fn record(&self, phase: Phase, chunk: usize, start: Duration) {
        if let Some(t) = self.trace {
            t.record(TraceEvent {
                rank: self.rank,
                stage: self.stage,
                phase,
                chunk,
                start,
                end: t.now(),
            });
        }
    }
}

/// Runs one transpose: `plan.k_chunks()` rounds of pack → all-to-all →
/// unpack from `src` into `dst`.
pub fn run_exchange(
    plan: &ExchangePlan,
    comm: &mut dyn Communicator,
    src: &[ComplexSample],
    dst: &mut [ComplexSample],
    overlap: bool,
    trace: Option<&ScheduleTrace>,
) -> Result<()> {
    if comm.members() != plan.members() {
        return Err(Error::State(format!(
            "{} planned for members {:?} but communicator has {:?}",
            plan.kind().name(),
            plan.members(),
            comm.members()
        )));
    }
    let rec = Recorder {
        trace,
        rank: plan.members()[plan.my_index()],
        stage: plan.kind(),
    };
    if overlap && plan.k_chunks() > 1 {
        pipelined(plan, comm, src, dst, &rec)
    } else {
        sequential(plan, comm, src, dst, &rec)
    }
}

fn sequential(
    plan: &ExchangePlan,
    comm: &mut dyn Communicator,
    src: &[ComplexSample],
    dst: &mut [ComplexSample],
    rec: &Recorder<'_>,
) -> Result<()> {
    let zero = ComplexSample::new(0.0, 0.0);
    for c in 0..plan.k_chunks() {
        let len = plan.chunk_len(c);
        let mut send = vec![zero; len];
        let mut recv = vec![zero; len];
        let t = rec.now();
        plan.pack_chunk_into(src, c, &mut send)?;
        rec.record(Phase::Pack, c, t);
        let t = rec.now();
        comm.all_to_all(&send, &mut recv)?;
        rec.record(Phase::Exchange, c, t);
        let t = rec.now();
        plan.unpack_chunk(&recv, dst, c)?;
        rec.record(Phase::Unpack, c, t);
    }
    Ok(())
}

type Posted = (usize, Vec<ComplexSample>, Duration);

fn pipelined(
    plan: &ExchangePlan,
    comm: &mut dyn Communicator,
    src: &[ComplexSample],
    dst: &mut [ComplexSample],
    rec: &Recorder<'_>,
) -> Result<()> {
    let zero = ComplexSample::new(0.0, 0.0);
    thread::scope(|s| {
        let (job_tx, job_rx) = mpsc::channel::<Posted>();
        let (done_tx, done_rx) = mpsc::channel::<Result<(usize, Vec<ComplexSample>)>>();

        let worker = thread::Builder::new()
            .name("comm-worker".into())
            .spawn_scoped(s, move || {
                for (c, send, posted) in job_rx {
                    let mut recv = vec![zero; send.len()];
                    let r = comm.all_to_all(&send, &mut recv);
                    rec.record(Phase::Exchange, c, posted);
                    let failed = r.is_err();
                    if done_tx.send(r.map(|_| (c, recv))).is_err() || failed {
                        break;
                    }
                }
            })?;

        let post = |c: usize| -> Result<()> {
            let mut send = vec![zero; plan.chunk_len(c)];
            let t = rec.now();
            plan.pack_chunk_into(src, c, &mut send)?;
            rec.record(Phase::Pack, c, t);
            job_tx
                .send((c, send, rec.now()))
                .map_err(|_| Error::WorkerPanic("communication worker exited".into()))
        };
        let complete = |dst: &mut [ComplexSample]| -> Result<()> {
            let (c, recv) = done_rx
                .recv()
                .map_err(|_| Error::WorkerPanic("communication worker exited".into()))??;
            let t = rec.now();
            plan.unpack_chunk(&recv, dst, c)?;
            rec.record(Phase::Unpack, c, t);
            Ok(())
        };

        let result = (|| {
            post(0)?;
            for c in 1..plan.k_chunks() {
                post(c)?;
                complete(dst)?;
            }
            complete(dst)
        })();
        drop(job_tx);
        worker
            .join()
            .map_err(|_| Error::WorkerPanic("communication worker panicked".into()))?;
        result
    })
}
