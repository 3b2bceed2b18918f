//! Distributed forward and backward 3D FFT over a pencil decomposition.
//!
//! Forward, starting from X-pencils:
//!
//! 1. FFT along X
//! 2. XY transpose over the column communicator (pack, all-to-all, unpack)
//! 3. FFT along Y
//! 4. YZ transpose over the row communicator
//! 5. FFT along Z
//! 6. YZ and XY restore transposes back to X-pencils (skippable)
//!
//! Backward mirrors it: transposes to Z-pencils if needed, inverse FFT along
//! Z, YZ restore, inverse along Y, XY restore, inverse along X, then one
//! scaling pass by `1/(nx·ny·nz)`.
//!
//! Each transpose issues exactly `K` all-to-all calls whatever the strategy,
//! so a forward transform with restore costs `4·K` calls per rank.

mod overlap;
mod serial;

use std::fmt;
use std::sync::Arc;

use crate::decomp::{Block, Layout, PencilDescriptor, ProcessGrid, SlabDescriptor};
use crate::error::{Error, Result};
use crate::exchange::{CommRole, ExchangeKind, ExchangePlan};
use crate::fft1d::{fft_batch, Direction, Plan1D};
use crate::rng::random_at;
use crate::tensor::{coords_of, first_non_finite, Axis, ComplexSample, Tensor3, TensorDims};
use crate::transport::{CollectiveStats, Communicator, RankComms};

pub use overlap::{run_exchange, Phase, ScheduleTrace, TraceEvent};
pub use serial::serial_3dfft;

/// How 1D plans are obtained for each FFT stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Planning {
    /// A fresh plan for every batch call.
    PerCall,
    /// One plan per stage and direction, built once and reused.
    Single,
}

/// Compute/communication strategy. The four combinations of `overlap` and
/// `planning` are options 1 to 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StrategyConfig {
    pub overlap: bool,
    pub planning: Planning,
    /// Chunks per transpose.
    pub k: usize,
}

pub const DEFAULT_K: usize = 2;

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            overlap: true,
            planning: Planning::Single,
            k: DEFAULT_K,
        }
    }
}

impl StrategyConfig {
    /// Option 1: no overlap, per-call plans. 2: no overlap, single plan.
    /// 3: overlap, per-call plans. 4: overlap, single plan.
    pub fn option(option: u8) -> Result<Self> {
        let (overlap, planning) = match option {
            1 => (false, Planning::PerCall),
            2 => (false, Planning::Single),
            3 => (true, Planning::PerCall),
            4 => (true, Planning::Single),
            _ => {
                return Err(Error::InvalidSize(format!(
                    "option must be 1, 2, 3 or 4, got {option}"
                )))
            }
        };
        Ok(StrategyConfig {
            overlap,
            planning,
            k: DEFAULT_K,
        })
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn option_number(&self) -> u8 {
        match (self.overlap, self.planning) {
            (false, Planning::PerCall) => 1,
            (false, Planning::Single) => 2,
            (true, Planning::PerCall) => 3,
            (true, Planning::Single) => 4,
        }
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "option {} (K={})", self.option_number(), self.k)
    }
}

/// One rank's share of a distributed tensor in a known layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributedTensor {
    pencil: PencilDescriptor,
    rank: usize,
    layout: Layout,
    local: Tensor3,
}

impl DistributedTensor {
    pub fn new(pencil: PencilDescriptor, rank: usize, layout: Layout, local: Tensor3) -> Result<Self> {
        let b = pencil.block(layout, rank);
        if local.extents() != b.extents || local.order() != b.order {
            return Err(Error::State(format!(
                "local block {:?}/{} does not match {layout:?} block {:?}/{} of rank {rank}",
                local.extents(),
                local.order(),
                b.extents,
                b.order
            )));
        }
        Ok(DistributedTensor {
            pencil,
            rank,
            layout,
            local,
        })
    }

    /// Block filled from a function of global coordinates.
    pub fn from_fn(
        pencil: PencilDescriptor,
        rank: usize,
        layout: Layout,
        mut f: impl FnMut([usize; 3]) -> ComplexSample,
    ) -> Self {
        let b = pencil.block(layout, rank);
        let local = Tensor3::from_fn(b.extents, b.order, |l| f([0, 1, 2].map(|a| l[a] + b.offsets[a])));
        DistributedTensor {
            pencil,
            rank,
            layout,
            local,
        }
    }

    /// This rank's X-pencil slice of a global tensor.
    pub fn from_global(pencil: PencilDescriptor, rank: usize, global: &Tensor3) -> Result<Self> {
        if global.extents() != pencil.dims().as_array() {
            return Err(Error::ShapeMismatch(format!(
                "global tensor {:?} vs dims {}",
                global.extents(),
                pencil.dims()
            )));
        }
        let s = global.order().strides(global.extents());
        let data = global.data();
        Ok(Self::from_fn(pencil, rank, Layout::XPencil, |g| {
            data[g[0] * s[0] + g[1] * s[1] + g[2] * s[2]]
        }))
    }

    /// This rank's X-pencil slice of the seeded random tensor.
    pub fn random(pencil: PencilDescriptor, rank: usize, seed: u64) -> Self {
        let dims = pencil.dims();
        Self::from_fn(pencil, rank, Layout::XPencil, |g| random_at(dims, seed, g))
    }

    pub fn pencil(&self) -> &PencilDescriptor {
        &self.pencil
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn block(&self) -> Block {
        self.pencil.block(self.layout, self.rank)
    }

    pub fn local(&self) -> &Tensor3 {
        &self.local
    }

    pub fn local_mut(&mut self) -> &mut Tensor3 {
        &mut self.local
    }

    pub fn into_local(self) -> Tensor3 {
        self.local
    }

    /// Assembles the global tensor (X fastest) on member 0 of `world`.
    /// `world` members must be the ranks `0..P` in order.
    pub fn gather(&self, world: &mut dyn Communicator) -> Result<Option<Tensor3>> {
        let Some(parts) = world.gather(self.local.data())? else {
            return Ok(None);
        };
        let dims = self.pencil.dims();
        let mut out = Tensor3::zeros(dims.as_array(), crate::tensor::AxisOrder::XYZ);
        let buf = out.data_mut();
        for (rank, part) in parts.iter().enumerate() {
            let b = self.pencil.block(self.layout, rank);
            if part.len() != b.len() {
                return Err(Error::Protocol(format!(
                    "rank {rank} contributed {} samples for a block of {}",
                    part.len(),
                    b.len()
                )));
            }
            for (off, v) in part.iter().enumerate() {
                let l = coords_of(off, b.extents, b.order)?;
                let g = [0, 1, 2].map(|a| l[a] + b.offsets[a]);
                buf[g[0] + dims.nx * (g[1] + dims.ny * g[2])] = *v;
            }
        }
        Ok(Some(out))
    }
}

/// 1D plans for every axis and direction, built once.
#[derive(Debug)]
struct StagePlans {
    forward: [Plan1D; 3],
    backward: [Plan1D; 3],
}

impl StagePlans {
    fn new(dims: TensorDims) -> Result<Self> {
        let make = |dir| -> Result<[Plan1D; 3]> {
            Ok([
                Plan1D::new(dims.nx, dir)?,
                Plan1D::new(dims.ny, dir)?,
                Plan1D::new(dims.nz, dir)?,
            ])
        };
        Ok(StagePlans {
            forward: make(Direction::Forward)?,
            backward: make(Direction::Backward)?,
        })
    }

    fn get(&self, axis: Axis, dir: Direction) -> &Plan1D {
        match dir {
            Direction::Forward => &self.forward[axis.index()],
            Direction::Backward => &self.backward[axis.index()],
        }
    }
}

/// Transform handle for one rank. Calls are collective across all ranks.
pub struct PencilFft {
    pencil: PencilDescriptor,
    rank: usize,
    strategy: StrategyConfig,
    restore: bool,
    comms: RankComms,
    plans: Option<StagePlans>,
    exchanges: Vec<ExchangePlan>,
    trace: Option<Arc<ScheduleTrace>>,
}

impl fmt::Debug for PencilFft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PencilFft")
            .field("pencil", &self.pencil)
            .field("rank", &self.rank)
            .field("strategy", &self.strategy)
            .field("restore", &self.restore)
            .finish_non_exhaustive()
    }
}

impl PencilFft {
    /// Pencil transform of `dims` on `grid`; `comms` must be wired for the same grid.
    pub fn new(dims: TensorDims, grid: ProcessGrid, strategy: StrategyConfig, comms: RankComms) -> Result<Self> {
        if comms.grid != grid {
            return Err(Error::State(format!(
                "communicators built for grid {} but transform requested on {grid}",
                comms.grid
            )));
        }
        let pencil = PencilDescriptor::new(dims, grid)?;
        let rank = comms.rank;
        let exchanges = ExchangeKind::ALL
            .iter()
            .map(|&kind| ExchangePlan::new(&pencil, kind, rank, strategy.k))
            .collect::<Result<Vec<_>>>()?;
        let plans = match strategy.planning {
            Planning::Single => Some(StagePlans::new(dims)?),
            Planning::PerCall => None,
        };
        Ok(PencilFft {
            pencil,
            rank,
            strategy,
            restore: true,
            comms,
            plans,
            exchanges,
            trace: None,
        })
    }

    /// Slab baseline: `P` ranks along Z, run as a `1 × P` pencil grid.
    pub fn slab(dims: TensorDims, strategy: StrategyConfig, comms: RankComms) -> Result<Self> {
        let slab = SlabDescriptor::new(dims, comms.grid.p_total())?;
        let grid = slab.as_pencil()?.grid();
        Self::new(dims, grid, strategy, comms)
    }

    /// Whether forward restores the X-pencil layout (default) or stops at Z-pencils.
    pub fn with_restore(mut self, restore: bool) -> Self {
        self.restore = restore;
        self
    }

    pub fn set_trace(&mut self, trace: Arc<ScheduleTrace>) {
        self.trace = Some(trace);
    }

    pub fn pencil(&self) -> &PencilDescriptor {
        &self.pencil
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn strategy(&self) -> StrategyConfig {
        self.strategy
    }

    pub fn restores(&self) -> bool {
        self.restore
    }

    pub fn stats(&self) -> CollectiveStats {
        self.comms.stats()
    }

    pub fn comms_mut(&mut self) -> &mut RankComms {
        &mut self.comms
    }

    pub fn into_comms(self) -> RankComms {
        self.comms
    }

    /// Seeded random X-pencil input for this rank.
    pub fn random_input(&self, seed: u64) -> DistributedTensor {
        DistributedTensor::random(self.pencil, self.rank, seed)
    }

    pub fn forward(&mut self, t: &mut DistributedTensor) -> Result<()> {
        self.check_input(t, &[Layout::XPencil])?;
        self.fft_stage(t, Axis::X, Direction::Forward)?;
        self.transpose(t, ExchangeKind::XyForward)?;
        self.fft_stage(t, Axis::Y, Direction::Forward)?;
        self.transpose(t, ExchangeKind::YzForward)?;
        self.fft_stage(t, Axis::Z, Direction::Forward)?;
        if self.restore {
            self.transpose(t, ExchangeKind::YzRestore)?;
            self.transpose(t, ExchangeKind::XyRestore)?;
        }
        Ok(())
    }

    /// Inverse of [`forward`](Self::forward), including the `1/(nx·ny·nz)`
    /// factor. Accepts X-pencil or Z-pencil spectra; returns X-pencils.
    pub fn backward(&mut self, t: &mut DistributedTensor) -> Result<()> {
        self.check_input(t, &[Layout::XPencil, Layout::ZPencil])?;
        if t.layout == Layout::XPencil {
            self.transpose(t, ExchangeKind::XyForward)?;
            self.transpose(t, ExchangeKind::YzForward)?;
        }
        self.fft_stage(t, Axis::Z, Direction::Backward)?;
        self.transpose(t, ExchangeKind::YzRestore)?;
        self.fft_stage(t, Axis::Y, Direction::Backward)?;
        self.transpose(t, ExchangeKind::XyRestore)?;
        self.fft_stage(t, Axis::X, Direction::Backward)?;
        let scale = 1.0 / self.pencil.dims().len() as f64;
        for v in t.local.data_mut() {
            *v *= scale;
        }
        Ok(())
    }

    fn check_input(&self, t: &DistributedTensor, layouts: &[Layout]) -> Result<()> {
        if t.pencil != self.pencil || t.rank != self.rank {
            return Err(Error::State(format!(
                "tensor of rank {} on {:?} handed to transform of rank {} on {:?}",
                t.rank, t.pencil, self.rank, self.pencil
            )));
        }
        if !layouts.contains(&t.layout) {
            return Err(Error::State(format!(
                "input in {:?} layout, expected one of {layouts:?}",
                t.layout
            )));
        }
        if let Some(off) = first_non_finite(t.local.data()) {
            return Err(Error::NonFinite(off));
        }
        Ok(())
    }

    fn fft_stage(&self, t: &mut DistributedTensor, axis: Axis, dir: Direction) -> Result<()> {
        debug_assert_eq!(t.layout.pencil_axis(), axis);
        let n = self.pencil.dims().extent(axis);
        let lines = t.local.len() / n;
        match &self.plans {
            Some(plans) => fft_batch(plans.get(axis, dir), t.local.data_mut(), lines),
            None => fft_batch(&Plan1D::new(n, dir)?, t.local.data_mut(), lines),
        }
    }

    fn transpose(&mut self, t: &mut DistributedTensor, kind: ExchangeKind) -> Result<()> {
        let (from, to) = kind.layouts();
        if t.layout != from {
            return Err(Error::State(format!(
                "{} expects {from:?} layout, tensor is in {:?}",
                kind.name(),
                t.layout
            )));
        }
        let plan = self
            .exchanges
            .iter()
            .find(|p| p.kind() == kind)
            .expect("all four exchange plans are built");
        let comm: &mut dyn Communicator = match plan.role() {
            CommRole::Column => &mut *self.comms.column,
            CommRole::Row => &mut *self.comms.row,
        };
        let mut dst = vec![ComplexSample::new(0.0, 0.0); plan.dst().len()];
        run_exchange(
            plan,
            comm,
            t.local.data(),
            &mut dst,
            self.strategy.overlap,
            self.trace.as_deref(),
        )
        .map_err(|e| e.at_stage(kind.name()))?;
        t.local = Tensor3::from_vec(plan.dst().extents, plan.dst().order, dst)?;
        t.layout = to;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::run_inproc;

    #[test]
    fn option_mapping() {
        for n in 1..=4 {
            let s = StrategyConfig::option(n).unwrap();
            assert_eq!(s.option_number(), n);
            assert_eq!(s.k, 2);
        }
        assert!(!StrategyConfig::option(2).unwrap().overlap);
        assert_eq!(StrategyConfig::option(3).unwrap().planning, Planning::PerCall);
        assert!(StrategyConfig::option(5).is_err());
        assert_eq!(StrategyConfig::default().option_number(), 4);
    }

    #[test]
    fn constant_input_gives_delta() {
        let dims = TensorDims::cube(2).unwrap();
        let grid = ProcessGrid::factorize(1).unwrap();
        let out = run_inproc(grid, |comms| {
            let mut fft = PencilFft::new(dims, grid, StrategyConfig::default(), comms).unwrap();
            let mut t = DistributedTensor::from_fn(*fft.pencil(), 0, Layout::XPencil, |_| ComplexSample::new(1.0, 0.0));
            fft.forward(&mut t).unwrap();
            t.into_local()
        })
        .unwrap();
        let data = out[0].data();
        assert_eq!(data[0], ComplexSample::new(8.0, 0.0));
        assert!(data[1..].iter().all(|v| *v == ComplexSample::new(0.0, 0.0)));
    }

    #[test]
    fn delta_gives_ones_on_every_rank() {
        let dims = TensorDims::cube(4).unwrap();
        let grid = ProcessGrid::with_shape(4, 2, 2).unwrap();
        let out = run_inproc(grid, |comms| {
            let mut fft = PencilFft::new(dims, grid, StrategyConfig::default(), comms).unwrap();
            let mut t = DistributedTensor::from_fn(*fft.pencil(), fft.rank(), Layout::XPencil, |g| {
                if g == [0, 0, 0] {
                    ComplexSample::new(1.0, 0.0)
                } else {
                    ComplexSample::new(0.0, 0.0)
                }
            });
            fft.forward(&mut t).unwrap();
            assert_eq!(t.layout(), Layout::XPencil);
            t.into_local()
        })
        .unwrap();
        for block in out {
            assert!(block.data().iter().all(|v| *v == ComplexSample::new(1.0, 0.0)));
        }
    }

    #[test]
    fn backward_of_delta_spectrum_is_constant() {
        let dims = TensorDims::new(4, 2, 8).unwrap();
        let grid = ProcessGrid::with_shape(2, 2, 1).unwrap();
        let out = run_inproc(grid, |comms| {
            let mut fft = PencilFft::new(dims, grid, StrategyConfig::option(2).unwrap(), comms).unwrap();
            let mut t = DistributedTensor::from_fn(*fft.pencil(), fft.rank(), Layout::XPencil, |g| {
                ComplexSample::new(if g == [0, 0, 0] { 1.0 } else { 0.0 }, 0.0)
            });
            fft.backward(&mut t).unwrap();
            t.into_local()
        })
        .unwrap();
        for block in out {
            assert!(block.data().iter().all(|v| *v == ComplexSample::new(1.0 / 64.0, 0.0)));
        }
    }

    #[test]
    fn rejects_wrong_layout_and_non_finite() {
        let dims = TensorDims::cube(4).unwrap();
        let grid = ProcessGrid::factorize(1).unwrap();
        run_inproc(grid, |comms| {
            let mut fft = PencilFft::new(dims, grid, StrategyConfig::default(), comms).unwrap();
            let pencil = *fft.pencil();
            let mut y = DistributedTensor::from_fn(pencil, 0, Layout::YPencil, |_| ComplexSample::new(0.0, 0.0));
            assert!(matches!(fft.forward(&mut y), Err(Error::State(_))));
            let mut bad = DistributedTensor::from_fn(pencil, 0, Layout::XPencil, |g| {
                ComplexSample::new(if g == [1, 0, 0] { f64::NAN } else { 0.0 }, 0.0)
            });
            assert!(matches!(fft.forward(&mut bad), Err(Error::NonFinite(1))));
        })
        .unwrap();
    }

    #[test]
    fn no_restore_ends_in_z_pencils_and_backward_accepts_them() {
        let dims = TensorDims::cube(8).unwrap();
        let grid = ProcessGrid::with_shape(4, 2, 2).unwrap();
        run_inproc(grid, |comms| {
            let mut fft = PencilFft::new(dims, grid, StrategyConfig::default(), comms)
                .unwrap()
                .with_restore(false);
            let x = fft.random_input(5);
            let mut t = x.clone();
            fft.forward(&mut t).unwrap();
            assert_eq!(t.layout(), Layout::ZPencil);
            assert_eq!(fft.stats().alltoall_calls, 4);
            fft.backward(&mut t).unwrap();
            assert_eq!(t.layout(), Layout::XPencil);
            let err = t
                .local()
                .data()
                .iter()
                .zip(x.local().data())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-12);
        })
        .unwrap();
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let dims = TensorDims::cube(4).unwrap();
        let grid = ProcessGrid::with_shape(2, 2, 1).unwrap();
        let other = ProcessGrid::with_shape(2, 1, 2).unwrap();
        run_inproc(grid, |comms| {
            assert!(matches!(PencilFft::new(dims, other, StrategyConfig::default(), comms), Err(Error::State(_))));
        })
        .unwrap();
    }

    #[test]
    fn slab_rejects_too_many_ranks() {
        let dims = TensorDims::cube(2).unwrap();
        let grid = ProcessGrid::with_shape(4, 1, 4).unwrap();
        let res = run_inproc(grid, |comms| PencilFft::slab(dims, StrategyConfig::default(), comms).map(|_| ()))
            .unwrap();
        assert!(res.iter().all(|r| matches!(r, Err(Error::ExceedsMaxRanks { max: 2, .. }))));
    }
}
