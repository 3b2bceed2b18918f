//! Run configuration shared by verification, benchmarking and the CLI,
//! plus helpers that execute a configuration on in-process ranks.

use std::fmt;

use crate::decomp::{PencilDescriptor, ProcessGrid, Scheme, SlabDescriptor};
use crate::error::{Error, Result};
use crate::exchange::{ExchangeKind, ExchangePlan};
use crate::pipeline::{DistributedTensor, PencilFft, StrategyConfig};
use crate::tensor::{Tensor3, TensorDims};
use crate::transport::{run_inproc, CollectiveStats, RankComms};

/// Everything needed to build the same transform on every rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunConfig {
    pub dims: TensorDims,
    pub grid: ProcessGrid,
    pub scheme: Scheme,
    pub strategy: StrategyConfig,
    pub restore: bool,
}

impl RunConfig {
    /// Pencil configuration on the default factorization of `ranks`.
    pub fn pencil(dims: TensorDims, ranks: usize, strategy: StrategyConfig) -> Result<Self> {
        Ok(RunConfig {
            dims,
            grid: ProcessGrid::factorize(ranks)?,
            scheme: Scheme::Pencil,
            strategy,
            restore: true,
        })
    }

    /// Slab configuration: `ranks` along Z.
    pub fn slab(dims: TensorDims, ranks: usize, strategy: StrategyConfig) -> Result<Self> {
        if ranks == 0 || !ranks.is_power_of_two() {
            return Err(Error::InvalidRankCount(ranks));
        }
        Ok(RunConfig {
            dims,
            grid: ProcessGrid::with_shape(ranks, 1, ranks)?,
            scheme: Scheme::Slab,
            strategy,
            restore: true,
        })
    }

    pub fn with_grid(mut self, grid: ProcessGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_restore(mut self, restore: bool) -> Self {
        self.restore = restore;
        self
    }

    pub fn ranks(&self) -> usize {
        self.grid.p_total()
    }

    /// Checks the configuration without creating communicators.
    pub fn validate(&self) -> Result<()> {
        let pencil = match self.scheme {
            Scheme::Pencil => PencilDescriptor::new(self.dims, self.grid)?,
            Scheme::Slab => {
                let slab = SlabDescriptor::new(self.dims, self.ranks())?;
                if self.grid.py() != 1 {
                    return Err(Error::InconsistentGrid {
                        p_total: self.ranks(),
                        py: self.grid.py(),
                        pz: self.grid.pz(),
                    });
                }
                slab.as_pencil()?
            }
            Scheme::Cell => {
                return Err(Error::State(
                    "cell decomposition only provides P_max; no transform".into(),
                ))
            }
        };
        for kind in ExchangeKind::ALL {
            ExchangePlan::new(&pencil, kind, 0, self.strategy.k)?;
        }
        Ok(())
    }

    /// Builds this rank's transform handle.
    pub fn transform(&self, comms: RankComms) -> Result<PencilFft> {
        let fft = match self.scheme {
            Scheme::Pencil => PencilFft::new(self.dims, self.grid, self.strategy, comms)?,
            Scheme::Slab => PencilFft::slab(self.dims, self.strategy, comms)?,
            Scheme::Cell => {
                return Err(Error::State(
                    "cell decomposition only provides P_max; no transform".into(),
                ))
            }
        };
        Ok(fft.with_restore(self.restore))
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} on {} ranks (grid {}), {}",
            self.scheme,
            self.dims,
            self.ranks(),
            self.grid,
            self.strategy
        )
    }
}

/// Forward transform of the seeded random input, gathered on rank 0.
pub fn forward_gathered(fft: &mut PencilFft, seed: u64) -> Result<Option<Tensor3>> {
    let mut t = fft.random_input(seed);
    fft.forward(&mut t)?;
    t.gather(&mut *fft.comms_mut().world)
}

/// Forward then backward of the seeded random input, gathered on rank 0.
pub fn roundtrip_gathered(fft: &mut PencilFft, seed: u64) -> Result<Option<Tensor3>> {
    let mut t = fft.random_input(seed);
    fft.forward(&mut t)?;
    fft.backward(&mut t)?;
    t.gather(&mut *fft.comms_mut().world)
}

/// Forward of a given global tensor; every rank must pass the same tensor.
pub fn forward_global_gathered(fft: &mut PencilFft, global: &Tensor3) -> Result<Option<Tensor3>> {
    let mut t = DistributedTensor::from_global(*fft.pencil(), fft.rank(), global)?;
    fft.forward(&mut t)?;
    t.gather(&mut *fft.comms_mut().world)
}

fn rank0<T>(results: Vec<Result<Option<T>>>) -> Result<T> {
    let mut out = None;
    for r in results {
        if let Some(v) = r? {
            out = Some(v);
        }
    }
    out.ok_or_else(|| Error::State("rank 0 produced no result".into()))
}

/// Gathered forward spectrum of the seeded random input, plus each rank's
/// collective counters after the transform.
pub fn inproc_forward(cfg: &RunConfig, seed: u64) -> Result<(Tensor3, Vec<CollectiveStats>)> {
    let results = run_inproc(cfg.grid, |comms| -> Result<(Option<Tensor3>, CollectiveStats)> {
        let mut fft = cfg.transform(comms)?;
        let mut t = fft.random_input(seed);
        fft.forward(&mut t)?;
        let stats = fft.stats();
        Ok((t.gather(&mut *fft.comms_mut().world)?, stats))
    })?;
    let mut stats = Vec::with_capacity(results.len());
    let mut out = None;
    for r in results {
        let (t, s) = r?;
        stats.push(s);
        if t.is_some() {
            out = t;
        }
    }
    Ok((out.ok_or_else(|| Error::State("rank 0 produced no result".into()))?, stats))
}

/// Gathered forward spectrum of a given global tensor.
pub fn inproc_forward_global(cfg: &RunConfig, global: &Tensor3) -> Result<Tensor3> {
    rank0(run_inproc(cfg.grid, |comms| {
        let mut fft = cfg.transform(comms)?;
        forward_global_gathered(&mut fft, global)
    })?)
}

/// Gathered result of forward then backward on the seeded random input.
pub fn inproc_roundtrip(cfg: &RunConfig, seed: u64) -> Result<Tensor3> {
    rank0(run_inproc(cfg.grid, |comms| {
        let mut fft = cfg.transform(comms)?;
        roundtrip_gathered(&mut fft, seed)
    })?)
}
