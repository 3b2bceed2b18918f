//! Pack/unpack maps for the global XY and YZ transposes.
//!
//! A transpose moves every rank's block from a source layout to a
//! destination layout through one all-to-all per chunk over either the
//! column or the row communicator. The source block is cut into `K` equal
//! chunks along its slowest-varying axis. Within a chunk, the segment for
//! member `d` is the part of the chunk that lands in `d`'s destination
//! block; segments are ordered by member index.
//!
//! Segments are boxes of global coordinates. Both sides walk a box in the
//! destination's memory order, so unpacking writes whole contiguous runs
//! while packing does the strided reads.

use crate::decomp::{Block, Layout, PencilDescriptor, Region};
use crate::error::{Error, Result};
use crate::tensor::{Axis, AxisOrder, ComplexSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExchangeKind {
    /// X-pencil → Y-pencil over the column communicator.
    XyForward,
    /// Y-pencil → Z-pencil over the row communicator.
    YzForward,
    /// Z-pencil → Y-pencil over the row communicator.
    YzRestore,
    /// Y-pencil → X-pencil over the column communicator.
    XyRestore,
}

impl ExchangeKind {
    pub const ALL: [ExchangeKind; 4] = [
        ExchangeKind::XyForward,
        ExchangeKind::YzForward,
        ExchangeKind::YzRestore,
        ExchangeKind::XyRestore,
    ];

    pub fn layouts(self) -> (Layout, Layout) {
        match self {
            ExchangeKind::XyForward => (Layout::XPencil, Layout::YPencil),
            ExchangeKind::YzForward => (Layout::YPencil, Layout::ZPencil),
            ExchangeKind::YzRestore => (Layout::ZPencil, Layout::YPencil),
            ExchangeKind::XyRestore => (Layout::YPencil, Layout::XPencil),
        }
    }

    pub fn role(self) -> CommRole {
        match self {
            ExchangeKind::XyForward | ExchangeKind::XyRestore => CommRole::Column,
            ExchangeKind::YzForward | ExchangeKind::YzRestore => CommRole::Row,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExchangeKind::XyForward => "XY transpose",
            ExchangeKind::YzForward => "YZ transpose",
            ExchangeKind::YzRestore => "YZ restore transpose",
            ExchangeKind::XyRestore => "XY restore transpose",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommRole {
    Row,
    Column,
}

/// One peer's share of a chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    /// Member index in the communicator.
    pub peer: usize,
    pub region: Region,
    /// Offset of the segment in the chunk's send or receive buffer.
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkPlan {
    pub send: Vec<Segment>,
    pub recv: Vec<Segment>,
    /// Samples in the chunk's send (and receive) buffer.
    pub len: usize,
}

/// Layout maps and chunk schedule for one transpose on one rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangePlan {
    kind: ExchangeKind,
    src: Block,
    dst: Block,
    /// Global ranks of the communicator, in member order.
    members: Vec<usize>,
    my_index: usize,
    chunk_axis: Axis,
    chunks: Vec<ChunkPlan>,
}

fn chunk_region(block: &Block, axis: Axis, k: usize, c: usize) -> Region {
    let mut r = block.region();
    let a = axis.index();
    let step = block.extents[a] / k;
    r.lo[a] = block.offsets[a] + c * step;
    r.hi[a] = r.lo[a] + step;
    r
}

impl ExchangePlan {
    pub fn new(pencil: &PencilDescriptor, kind: ExchangeKind, rank: usize, k: usize) -> Result<Self> {
        let grid = pencil.grid();
        let (src_layout, dst_layout) = kind.layouts();
        let src = pencil.block(src_layout, rank);
        let dst = pencil.block(dst_layout, rank);
        let chunk_axis = src.order.slowest();
        let extent = src.extents[chunk_axis.index()];
        if k == 0 || !extent.is_multiple_of(k) {
            return Err(Error::InvalidChunkCount { k, extent });
        }
        let members = match kind.role() {
            CommRole::Column => grid.column_members(rank),
            CommRole::Row => grid.row_members(rank),
        };
        let my_index = members.iter().position(|&m| m == rank).expect("rank in own communicator");

        let mut chunks = Vec::with_capacity(k);
        for c in 0..k {
            let mine = chunk_region(&src, chunk_axis, k, c);
            let mut send = Vec::with_capacity(members.len());
            let mut recv = Vec::with_capacity(members.len());
            let (mut so, mut ro) = (0, 0);
            for (peer, &peer_rank) in members.iter().enumerate() {
                let region = mine.intersect(&pencil.block(dst_layout, peer_rank).region());
                send.push(Segment { peer, region, offset: so, len: region.len() });
                so += region.len();

                let theirs = chunk_region(&pencil.block(src_layout, peer_rank), chunk_axis, k, c);
                let region = theirs.intersect(&dst.region());
                recv.push(Segment { peer, region, offset: ro, len: region.len() });
                ro += region.len();
            }
            let seg = send[0].len;
            if send.iter().chain(&recv).any(|s| s.len != seg) {
                return Err(Error::State(format!(
                    "{} on rank {rank}: unequal segments in chunk {c}",
                    kind.name()
                )));
            }
            chunks.push(ChunkPlan { send, recv, len: so });
        }

        Ok(ExchangePlan {
            kind,
            src,
            dst,
            members,
            my_index,
            chunk_axis,
            chunks,
        })
    }

    #[inline]
    pub fn kind(&self) -> ExchangeKind {
        self.kind
    }

    pub fn role(&self) -> CommRole {
        self.kind.role()
    }

    pub fn src(&self) -> &Block {
        &self.src
    }

    pub fn dst(&self) -> &Block {
        &self.dst
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn my_index(&self) -> usize {
        self.my_index
    }

    pub fn k_chunks(&self) -> usize {
        self.chunks.len()
    }

    pub fn chunk_axis(&self) -> Axis {
        self.chunk_axis
    }

    pub fn chunk(&self, c: usize) -> &ChunkPlan {
        &self.chunks[c]
    }

    pub fn chunk_len(&self, c: usize) -> usize {
        self.chunks[c].len
    }

    /// Gathers chunk `c` of `src` into `out`, segments in member order.
    pub fn pack_chunk_into(&self, src: &[ComplexSample], c: usize, out: &mut [ComplexSample]) -> Result<()> {
        let chunk = self.checked_chunk(c)?;
        self.check_len("source", src.len(), self.src.len())?;
        self.check_len("send buffer", out.len(), chunk.len)?;
        for seg in &chunk.send {
            gather_region(&seg.region, self.dst.order, &self.src, src, &mut out[seg.offset..seg.offset + seg.len]);
        }
        Ok(())
    }

    pub fn pack_chunk(&self, src: &[ComplexSample], c: usize) -> Result<Vec<ComplexSample>> {
        let mut out = vec![ComplexSample::new(0.0, 0.0); self.checked_chunk(c)?.len];
        self.pack_chunk_into(src, c, &mut out)?;
        Ok(out)
    }

    /// Scatters the received buffer of chunk `c` into the destination block.
    pub fn unpack_chunk(&self, recv: &[ComplexSample], dst: &mut [ComplexSample], c: usize) -> Result<()> {
        let chunk = self.checked_chunk(c)?;
        self.check_len("receive buffer", recv.len(), chunk.len)?;
        self.check_len("destination", dst.len(), self.dst.len())?;
        for seg in &chunk.recv {
            scatter_region(&seg.region, self.dst.order, &self.dst, dst, &recv[seg.offset..seg.offset + seg.len]);
        }
        Ok(())
    }

    fn checked_chunk(&self, c: usize) -> Result<&ChunkPlan> {
        self.chunks.get(c).ok_or(Error::Index {
            axis: self.chunk_axis.name(),
            coord: c,
            extent: self.chunks.len(),
        })
    }

    fn check_len(&self, what: &str, got: usize, want: usize) -> Result<()> {
        if got != want {
            return Err(Error::ShapeMismatch(format!(
                "{} {what} has {got} samples, expected {want}",
                self.kind.name()
            )));
        }
        Ok(())
    }
}

pub fn plan_xy_forward(pencil: &PencilDescriptor, rank: usize, k: usize) -> Result<ExchangePlan> {
    ExchangePlan::new(pencil, ExchangeKind::XyForward, rank, k)
}

pub fn plan_yz_forward(pencil: &PencilDescriptor, rank: usize, k: usize) -> Result<ExchangePlan> {
    ExchangePlan::new(pencil, ExchangeKind::YzForward, rank, k)
}

pub fn plan_yz_restore(pencil: &PencilDescriptor, rank: usize, k: usize) -> Result<ExchangePlan> {
    ExchangePlan::new(pencil, ExchangeKind::YzRestore, rank, k)
}

pub fn plan_xy_restore(pencil: &PencilDescriptor, rank: usize, k: usize) -> Result<ExchangePlan> {
    ExchangePlan::new(pencil, ExchangeKind::XyRestore, rank, k)
}

/// Walks `region` in `order` (fastest first), calling `run(buffer_offset,
/// stride, count, out_offset)` once per innermost line.
#[inline]
fn walk_region(region: &Region, order: AxisOrder, block: &Block, mut run: impl FnMut(usize, usize, usize, usize)) {
    if region.is_empty() {
        return;
    }
    let s = block.order.strides(block.extents);
    let ext = region.extents();
    let [a0, a1, a2] = order.axes().map(Axis::index);
    let base: usize = (0..3).map(|a| (region.lo[a] - block.offsets[a]) * s[a]).sum();
    let mut out = 0;
    for i2 in 0..ext[a2] {
        for i1 in 0..ext[a1] {
            run(base + i2 * s[a2] + i1 * s[a1], s[a0], ext[a0], out);
            out += ext[a0];
        }
    }
}

fn gather_region(region: &Region, order: AxisOrder, block: &Block, buf: &[ComplexSample], out: &mut [ComplexSample]) {
    walk_region(region, order, block, |from, stride, n, to| {
        let dst = &mut out[to..to + n];
        if stride == 1 {
            dst.copy_from_slice(&buf[from..from + n]);
        } else {
            for (i, d) in dst.iter_mut().enumerate() {
                *d = buf[from + i * stride];
            }
        }
    });
}

fn scatter_region(region: &Region, order: AxisOrder, block: &Block, buf: &mut [ComplexSample], input: &[ComplexSample]) {
    walk_region(region, order, block, |to, stride, n, from| {
        let src = &input[from..from + n];
        if stride == 1 {
            buf[to..to + n].copy_from_slice(src);
        } else {
            for (i, v) in src.iter().enumerate() {
                buf[to + i * stride] = *v;
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::ProcessGrid;
    use crate::tensor::{coords_of, TensorDims};

    fn desc(n: [usize; 3], p: usize, py: usize) -> PencilDescriptor {
        let dims = TensorDims::new(n[0], n[1], n[2]).unwrap();
        PencilDescriptor::new(dims, ProcessGrid::with_shape(p, py, p / py).unwrap()).unwrap()
    }

    /// Value that identifies a global coordinate.
    fn tag(g: [usize; 3]) -> ComplexSample {
        ComplexSample::new((g[0] + 100 * g[1]) as f64, g[2] as f64)
    }

    fn untag(v: ComplexSample) -> [usize; 3] {
        let a = v.re as usize;
        [a % 100, a / 100, v.im as usize]
    }

    fn tagged_block(b: &Block) -> Vec<ComplexSample> {
        (0..b.len())
            .map(|off| {
                let l = coords_of(off, b.extents, b.order).unwrap();
                tag([0, 1, 2].map(|a| l[a] + b.offsets[a]))
            })
            .collect()
    }

    /// Brute-force all-to-all: every rank packs, segments routed by hand.
    fn run_exchange_serial(pencil: &PencilDescriptor, kind: ExchangeKind, k: usize) -> Vec<Vec<ComplexSample>> {
        let p = pencil.grid().p_total();
        let plans: Vec<_> = (0..p).map(|r| ExchangePlan::new(pencil, kind, r, k).unwrap()).collect();
        let srcs: Vec<_> = plans.iter().map(|pl| tagged_block(pl.src())).collect();
        let mut dsts: Vec<_> = plans.iter().map(|pl| vec![ComplexSample::new(-1.0, -1.0); pl.dst().len()]).collect();
        for c in 0..k {
            let packed: Vec<_> = (0..p).map(|r| plans[r].pack_chunk(&srcs[r], c).unwrap()).collect();
            for r in 0..p {
                let pl = &plans[r];
                let seg = pl.chunk_len(c) / pl.members().len();
                let mut recv = vec![ComplexSample::new(0.0, 0.0); pl.chunk_len(c)];
                for (s, &peer_rank) in pl.members().iter().enumerate() {
                    let from = &packed[peer_rank];
                    let me = pl.my_index();
                    recv[s * seg..(s + 1) * seg].copy_from_slice(&from[me * seg..(me + 1) * seg]);
                }
                pl.unpack_chunk(&recv, &mut dsts[r], c).unwrap();
            }
        }
        dsts
    }

    #[test]
    fn xy_forward_two_rows() {
        let pencil = desc([4, 4, 4], 2, 2);
        let plan = plan_xy_forward(&pencil, 0, 1).unwrap();
        assert_eq!(plan.src().extents, [4, 2, 4]);
        assert_eq!(plan.dst().extents, [2, 4, 4]);
        assert_eq!(plan.dst().order.fastest(), Axis::Y);
        let to_peer1 = plan.chunk(0).send[1];
        assert_eq!(to_peer1.region.lo, [2, 0, 0]);
        assert_eq!(to_peer1.region.hi, [4, 2, 4]);

        let dsts = run_exchange_serial(&pencil, ExchangeKind::XyForward, 1);
        for (r, d) in dsts.iter().enumerate() {
            assert_eq!(d, &tagged_block(&pencil.block(Layout::YPencil, r)));
        }
        assert_eq!(pencil.block(Layout::YPencil, 0).region().lo, [0, 0, 0]);
        assert_eq!(pencil.block(Layout::YPencil, 0).region().hi, [2, 4, 4]);
    }

    #[test]
    fn yz_forward_two_columns() {
        let pencil = desc([4, 4, 4], 2, 1);
        let plan = plan_yz_forward(&pencil, 1, 1).unwrap();
        assert_eq!(plan.dst().extents, [4, 2, 4]);
        assert_eq!(plan.dst().order.fastest(), Axis::Z);
        assert_eq!(plan.dst().region().lo[2], 0);
        assert_eq!(plan.dst().region().hi[2], 4);
        let dsts = run_exchange_serial(&pencil, ExchangeKind::YzForward, 1);
        for (r, d) in dsts.iter().enumerate() {
            assert_eq!(d, &tagged_block(&pencil.block(Layout::ZPencil, r)));
        }
    }

    #[test]
    fn destination_extents() {
        let pencil = desc([1024, 1024, 1024], 8, 4);
        assert_eq!(plan_xy_forward(&pencil, 3, 2).unwrap().dst().extents, [256, 1024, 512]);
        let pencil = desc([8, 8, 8], 4, 2);
        assert_eq!(plan_yz_forward(&pencil, 3, 2).unwrap().dst().extents, [4, 4, 8]);
    }

    #[test]
    fn single_rank_is_local_transpose() {
        let pencil = desc([4, 8, 2], 1, 1);
        for kind in ExchangeKind::ALL {
            let plan = ExchangePlan::new(&pencil, kind, 0, 1).unwrap();
            assert_eq!(plan.chunk(0).send.len(), 1);
            let src = tagged_block(plan.src());
            let packed = plan.pack_chunk(&src, 0).unwrap();
            let mut dst = vec![ComplexSample::new(0.0, 0.0); plan.dst().len()];
            plan.unpack_chunk(&packed, &mut dst, 0).unwrap();
            assert_eq!(dst, tagged_block(plan.dst()));
        }
    }

    #[test]
    fn invalid_chunk_count() {
        let pencil = desc([4, 4, 4], 2, 2);
        // X-pencil block (4,2,4): slowest axis Z has extent 4
        assert!(matches!(plan_xy_forward(&pencil, 0, 3), Err(Error::InvalidChunkCount { k: 3, extent: 4 })));
        assert!(matches!(plan_xy_forward(&pencil, 0, 0), Err(Error::InvalidChunkCount { .. })));
        assert!(matches!(plan_xy_forward(&pencil, 0, 8), Err(Error::InvalidChunkCount { .. })));
        assert!(plan_xy_forward(&pencil, 0, 4).is_ok());
    }

    #[test]
    fn chunks_partition_the_block() {
        let pencil = desc([8, 8, 8], 4, 2);
        for kind in ExchangeKind::ALL {
            let whole = ExchangePlan::new(&pencil, kind, 1, 1).unwrap();
            let halves = ExchangePlan::new(&pencil, kind, 1, 2).unwrap();
            let mut count = vec![0u8; 512];
            for c in 0..2 {
                for seg in &halves.chunk(c).send {
                    let r = seg.region;
                    for z in r.lo[2]..r.hi[2] {
                        for y in r.lo[1]..r.hi[1] {
                            for x in r.lo[0]..r.hi[0] {
                                assert!(whole.chunk(0).send[seg.peer].region.contains([x, y, z]));
                                count[x + 8 * (y + 8 * z)] += 1;
                            }
                        }
                    }
                }
            }
            let src = whole.src().region();
            assert_eq!(count.iter().map(|&c| c as usize).sum::<usize>(), whole.src().len());
            assert!(count.iter().enumerate().all(|(i, &c)| {
                let g = [i % 8, (i / 8) % 8, i / 64];
                c == u8::from(src.contains(g))
            }));
        }
    }

    #[test]
    fn partial_unpack_writes_half() {
        let pencil = desc([8, 8, 8], 4, 2);
        let plan = plan_xy_forward(&pencil, 0, 2).unwrap();
        let src = tagged_block(plan.src());
        let packed = plan.pack_chunk(&src, 0).unwrap();
        let mut dst = vec![ComplexSample::new(-1.0, -1.0); plan.dst().len()];
        plan.unpack_chunk(&packed, &mut dst, 0).unwrap();
        let written = dst.iter().filter(|v| v.re >= 0.0).count();
        assert_eq!(written, dst.len() / 2);
    }

    #[test]
    fn all_kinds_route_every_coordinate() {
        for (n, p, py) in [([4, 4, 4], 2, 2), ([4, 4, 4], 2, 1), ([4, 4, 4], 4, 2), ([4, 4, 4], 8, 4), ([8, 4, 16], 8, 2)] {
            let pencil = desc(n, p, py);
            for kind in ExchangeKind::ALL {
                // K = 2 is invalid where the chunk axis has extent 1.
                for k in [1, 2].into_iter().filter(|&k| ExchangePlan::new(&pencil, kind, 0, k).is_ok()) {
                    let dsts = run_exchange_serial(&pencil, kind, k);
                    let (_, dst_layout) = kind.layouts();
                    for (r, d) in dsts.iter().enumerate() {
                        let b = pencil.block(dst_layout, r);
                        assert_eq!(d, &tagged_block(&b), "{n:?} {p} {kind:?} k={k} rank {r}");
                        for (off, v) in d.iter().enumerate() {
                            let l = coords_of(off, b.extents, b.order).unwrap();
                            assert_eq!(untag(*v), [0, 1, 2].map(|a| l[a] + b.offsets[a]));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn k_does_not_change_result() {
        let pencil = desc([16, 16, 16], 4, 2);
        for kind in ExchangeKind::ALL {
            let base = run_exchange_serial(&pencil, kind, 1);
            for k in [2, 4] {
                assert_eq!(run_exchange_serial(&pencil, kind, k), base);
            }
        }
    }
}
