//! Process grids and data distribution for slab, pencil and cell
//! decompositions.
//!
//! Ranks map onto a `py × pz` grid row-major: `rank = row·pz + col`.
//! A *column communicator* holds the `py` ranks sharing a column index,
//! a *row communicator* the `pz` ranks sharing a row index. The XY
//! transposes run over column communicators, the YZ transposes over row
//! communicators.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Axis, AxisOrder, TensorDims};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Slab,
    Pencil,
    Cell,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Slab => "slab",
            Scheme::Pencil => "pencil",
            Scheme::Cell => "cell",
        })
    }
}

/// Largest rank count each scheme can use on `dims`.
pub fn max_ranks(dims: TensorDims, scheme: Scheme) -> usize {
    match scheme {
        Scheme::Slab => dims.nz,
        Scheme::Pencil => dims.ny * dims.nz,
        Scheme::Cell => dims.nx * dims.ny * dims.nz,
    }
}

/// 2D virtual process grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProcessGrid {
    py: usize,
    pz: usize,
}

impl ProcessGrid {
    /// Nearest-to-square factorization, Y taking the larger factor.
    pub fn factorize(p_total: usize) -> Result<Self> {
        if p_total == 0 || !p_total.is_power_of_two() {
            return Err(Error::InvalidRankCount(p_total));
        }
        let p = p_total.trailing_zeros();
        Ok(ProcessGrid {
            py: 1 << p.div_ceil(2),
            pz: 1 << (p / 2),
        })
    }

    /// Explicit `py × pz` grid for `p_total` ranks.
    pub fn with_shape(p_total: usize, py: usize, pz: usize) -> Result<Self> {
        if p_total == 0 || !p_total.is_power_of_two() {
            return Err(Error::InvalidRankCount(p_total));
        }
        if py * pz != p_total {
            return Err(Error::InconsistentGrid { p_total, py, pz });
        }
        // power-of-two product implies power-of-two factors
        Ok(ProcessGrid { py, pz })
    }

    #[inline]
    pub fn py(&self) -> usize {
        self.py
    }

    #[inline]
    pub fn pz(&self) -> usize {
        self.pz
    }

    #[inline]
    pub fn p_total(&self) -> usize {
        self.py * self.pz
    }

    /// `(row, col)` of `rank`.
    #[inline]
    pub fn coords(&self, rank: usize) -> (usize, usize) {
        debug_assert!(rank < self.p_total());
        (rank / self.pz, rank % self.pz)
    }

    #[inline]
    pub fn rank_of(&self, row: usize, col: usize) -> usize {
        row * self.pz + col
    }

    /// Global ranks of the column communicator `rank` belongs to, by row.
    pub fn column_members(&self, rank: usize) -> Vec<usize> {
        let (_, col) = self.coords(rank);
        (0..self.py).map(|r| self.rank_of(r, col)).collect()
    }

    /// Global ranks of the row communicator `rank` belongs to, by column.
    pub fn row_members(&self, rank: usize) -> Vec<usize> {
        let (row, _) = self.coords(rank);
        (0..self.pz).map(|c| self.rank_of(row, c)).collect()
    }
}

impl fmt::Display for ProcessGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.py, self.pz)
    }
}

/// Axis-aligned box of global coordinates, half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Region {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl Region {
    pub fn extents(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.hi[a].saturating_sub(self.lo[a]))
    }

    pub fn len(&self) -> usize {
        self.extents().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, g: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= g[a] && g[a] < self.hi[a])
    }

    pub fn intersect(&self, other: &Region) -> Region {
        let lo = [0, 1, 2].map(|a| self.lo[a].max(other.lo[a]));
        let hi = [0, 1, 2].map(|a| self.hi[a].min(other.hi[a]).max(lo[a]));
        Region { lo, hi }
    }
}

/// One rank's local block: extents, global offsets and memory order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Block {
    pub extents: [usize; 3],
    pub offsets: [usize; 3],
    pub order: AxisOrder,
}

impl Block {
    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn region(&self) -> Region {
        Region {
            lo: self.offsets,
            hi: [0, 1, 2].map(|a| self.offsets[a] + self.extents[a]),
        }
    }

    /// Local buffer offset of global coordinate `g`, which must lie in the block.
    #[inline]
    pub fn local_offset(&self, g: [usize; 3]) -> usize {
        let s = self.order.strides(self.extents);
        (0..3).map(|a| (g[a] - self.offsets[a]) * s[a]).sum()
    }
}

/// Distributed layouts a pencil transform passes through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    /// `(nx, ny/py, nz/pz)`, X fastest.
    XPencil,
    /// `(nx/py, ny, nz/pz)`, Y fastest then Z then X.
    YPencil,
    /// `(nx/py, ny/pz, nz)`, Z fastest then Y then X.
    ZPencil,
}

impl Layout {
    pub fn order(self) -> AxisOrder {
        match self {
            Layout::XPencil => AxisOrder::XYZ,
            Layout::YPencil => AxisOrder::YZX,
            Layout::ZPencil => AxisOrder::ZYX,
        }
    }

    /// Axis that is complete and contiguous on every rank.
    pub fn pencil_axis(self) -> Axis {
        self.order().fastest()
    }
}

/// Pencil decomposition of `dims` over a process grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PencilDescriptor {
    dims: TensorDims,
    grid: ProcessGrid,
}

impl PencilDescriptor {
    /// Checks that every layout leaves at least one point per rank and axis.
    pub fn new(dims: TensorDims, grid: ProcessGrid) -> Result<Self> {
        let checks = [
            (grid.py, dims.ny, "py", "ny"),
            (grid.pz, dims.nz, "pz", "nz"),
            (grid.py, dims.nx, "py", "nx"),
            (grid.pz, dims.ny, "pz", "ny"),
        ];
        for (p, n, pn, nn) in checks {
            if p > n {
                return Err(Error::OverDecomposition(format!(
                    "{pn}={p} exceeds {nn}={n} for dims {dims} on grid {grid}"
                )));
            }
        }
        Ok(PencilDescriptor { dims, grid })
    }

    #[inline]
    pub fn dims(&self) -> TensorDims {
        self.dims
    }

    #[inline]
    pub fn grid(&self) -> ProcessGrid {
        self.grid
    }

    /// Local block of `rank` in `layout`.
    pub fn block(&self, layout: Layout, rank: usize) -> Block {
        let TensorDims { nx, ny, nz } = self.dims;
        let (py, pz) = (self.grid.py, self.grid.pz);
        let (row, col) = self.grid.coords(rank);
        let (extents, offsets) = match layout {
            Layout::XPencil => ([nx, ny / py, nz / pz], [0, row * ny / py, col * nz / pz]),
            Layout::YPencil => ([nx / py, ny, nz / pz], [row * nx / py, 0, col * nz / pz]),
            Layout::ZPencil => ([nx / py, ny / pz, nz], [row * nx / py, col * ny / pz, 0]),
        };
        Block {
            extents,
            offsets,
            order: layout.order(),
        }
    }
}

/// Local extents and global offsets of `rank` in the initial X-pencil layout.
pub fn pencil_extents(
    dims: TensorDims,
    grid: ProcessGrid,
    rank: usize,
) -> Result<([usize; 3], [usize; 3])> {
    if grid.py > dims.ny || grid.pz > dims.nz {
        return Err(Error::OverDecomposition(format!(
            "grid {grid} over dims {dims}"
        )));
    }
    if rank >= grid.p_total() {
        return Err(Error::InvalidSize(format!(
            "rank {rank} outside grid {grid}"
        )));
    }
    let (row, col) = grid.coords(rank);
    let (ly, lz) = (dims.ny / grid.py, dims.nz / grid.pz);
    Ok(([dims.nx, ly, lz], [0, row * ly, col * lz]))
}

/// Slab decomposition along Z over `p` ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlabDescriptor {
    dims: TensorDims,
    p: usize,
}

impl SlabDescriptor {
    pub fn new(dims: TensorDims, p: usize) -> Result<Self> {
        if p == 0 || !p.is_power_of_two() {
            return Err(Error::InvalidRankCount(p));
        }
        let max = max_ranks(dims, Scheme::Slab);
        if p > max {
            return Err(Error::ExceedsMaxRanks {
                scheme: Scheme::Slab,
                dims: dims.as_array(),
                ranks: p,
                max,
            });
        }
        Ok(SlabDescriptor { dims, p })
    }

    pub fn dims(&self) -> TensorDims {
        self.dims
    }

    pub fn ranks(&self) -> usize {
        self.p
    }

    /// `(nx, ny, nz/p)` block of `rank` and its global offsets.
    pub fn extents(&self, rank: usize) -> ([usize; 3], [usize; 3]) {
        let lz = self.dims.nz / self.p;
        ([self.dims.nx, self.dims.ny, lz], [0, 0, rank * lz])
    }

    /// Slab transforms run on the pencil machinery with a `1 × p` grid.
    pub fn as_pencil(&self) -> Result<PencilDescriptor> {
        PencilDescriptor::new(self.dims, ProcessGrid::with_shape(self.p, 1, self.p)?)
    }
}
