//! Complex samples, dense 3D blocks in flat buffers, and index algebra.
//!
//! Every block is a single contiguous buffer of interleaved `(re, im)`
//! pairs. Which axis varies fastest is runtime metadata ([`AxisOrder`]),
//! because the distributed pipeline rotates the contiguous axis between
//! transform stages.
//!
//! Extents and coordinates are always indexed by axis (`[x, y, z]`),
//! independent of the memory order.

use std::fmt;
use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Double-precision complex sample.
pub type ComplexSample = Complex64;

/// `(a.re·b.re − a.im·b.im, a.re·b.im + a.im·b.re)`.
#[inline]
pub fn complex_mul(a: ComplexSample, b: ComplexSample) -> ComplexSample {
    ComplexSample::new(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Memory order of a block; the first axis is the fastest-varying.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AxisOrder([Axis; 3]);

impl AxisOrder {
    pub const XYZ: AxisOrder = AxisOrder([Axis::X, Axis::Y, Axis::Z]);
    pub const YZX: AxisOrder = AxisOrder([Axis::Y, Axis::Z, Axis::X]);
    pub const ZYX: AxisOrder = AxisOrder([Axis::Z, Axis::Y, Axis::X]);

    /// Builds an order from a permutation of the three axes.
    pub fn new(axes: [Axis; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for a in axes {
            if std::mem::replace(&mut seen[a.index()], true) {
                return Err(Error::InvalidSize(format!(
                    "axis order {axes:?} repeats {a}"
                )));
            }
        }
        Ok(AxisOrder(axes))
    }

    /// All six permutations.
    pub fn all() -> [AxisOrder; 6] {
        use Axis::*;
        [
            AxisOrder([X, Y, Z]),
            AxisOrder([X, Z, Y]),
            AxisOrder([Y, X, Z]),
            AxisOrder([Y, Z, X]),
            AxisOrder([Z, X, Y]),
            AxisOrder([Z, Y, X]),
        ]
    }

    #[inline]
    pub fn axes(self) -> [Axis; 3] {
        self.0
    }

    #[inline]
    pub fn fastest(self) -> Axis {
        self.0[0]
    }

    #[inline]
    pub fn slowest(self) -> Axis {
        self.0[2]
    }

    /// Element stride of each axis (indexed by axis) for the given extents.
    #[inline]
    pub fn strides(self, extents: [usize; 3]) -> [usize; 3] {
        let [a, b, c] = self.0;
        let mut s = [0; 3];
        s[a.index()] = 1;
        s[b.index()] = extents[a.index()];
        s[c.index()] = extents[a.index()] * extents[b.index()];
        s
    }
}

impl fmt::Display for AxisOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.0[0], self.0[1], self.0[2])
    }
}

/// Buffer offset of `coords` in a block of `extents` stored in `order`.
///
/// With order `(X, Y, Z)` this is `i + nx·(j + ny·k)`.
pub fn linear_index(coords: [usize; 3], extents: [usize; 3], order: AxisOrder) -> Result<usize> {
    for axis in Axis::ALL {
        let (c, e) = (coords[axis.index()], extents[axis.index()]);
        if c >= e {
            return Err(Error::Index {
                axis: axis.name(),
                coord: c,
                extent: e,
            });
        }
    }
    let [a, b, c] = order.axes().map(Axis::index);
    Ok(coords[a] + extents[a] * (coords[b] + extents[b] * coords[c]))
}

/// Inverse of [`linear_index`].
pub fn coords_of(offset: usize, extents: [usize; 3], order: AxisOrder) -> Result<[usize; 3]> {
    let len: usize = extents.iter().product();
    if offset >= len {
        return Err(Error::Index {
            axis: '*',
            coord: offset,
            extent: len,
        });
    }
    let [a, b, c] = order.axes().map(Axis::index);
    let mut out = [0; 3];
    out[a] = offset % extents[a];
    let rest = offset / extents[a];
    out[b] = rest % extents[b];
    out[c] = rest / extents[b];
    Ok(out)
}

/// Global transform dimensions; each a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorDims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl TensorDims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny), ("nz", nz)] {
            if n == 0 || !n.is_power_of_two() {
                return Err(Error::InvalidSize(format!(
                    "{name}={n} is not a power of two"
                )));
            }
        }
        Ok(TensorDims { nx, ny, nz })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    #[inline]
    pub fn as_array(self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    #[inline]
    pub fn len(self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn extent(self, axis: Axis) -> usize {
        self.as_array()[axis.index()]
    }

    pub fn is_cube(self) -> bool {
        self.nx == self.ny && self.ny == self.nz
    }
}

impl fmt::Display for TensorDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Dense 3D block of complex samples in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    extents: [usize; 3],
    order: AxisOrder,
    data: Vec<ComplexSample>,
}

impl Tensor3 {
    pub fn zeros(extents: [usize; 3], order: AxisOrder) -> Self {
        let len = extents.iter().product();
        Tensor3 {
            extents,
            order,
            data: vec![ComplexSample::new(0.0, 0.0); len],
        }
    }

    pub fn from_vec(extents: [usize; 3], order: AxisOrder, data: Vec<ComplexSample>) -> Result<Self> {
        let len: usize = extents.iter().product();
        if data.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "buffer of {} samples for extents {extents:?} ({len} expected)",
                data.len()
            )));
        }
        Ok(Tensor3 {
            extents,
            order,
            data,
        })
    }

    /// Fills a block by evaluating `f` at every coordinate.
    pub fn from_fn(
        extents: [usize; 3],
        order: AxisOrder,
        mut f: impl FnMut([usize; 3]) -> ComplexSample,
    ) -> Self {
        let len: usize = extents.iter().product();
        let data = (0..len)
            .map(|off| f(coords_of(off, extents, order).expect("offset within block")))
            .collect();
        Tensor3 {
            extents,
            order,
            data,
        }
    }

    #[inline]
    pub fn extents(&self) -> [usize; 3] {
        self.extents
    }

    #[inline]
    pub fn order(&self) -> AxisOrder {
        self.order
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[ComplexSample] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [ComplexSample] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<ComplexSample> {
        self.data
    }

    pub fn get(&self, coords: [usize; 3]) -> Result<ComplexSample> {
        Ok(self.data[linear_index(coords, self.extents, self.order)?])
    }

    pub fn set(&mut self, coords: [usize; 3], value: ComplexSample) -> Result<()> {
        let off = linear_index(coords, self.extents, self.order)?;
        self.data[off] = value;
        Ok(())
    }

    /// Same values re-laid out in a different memory order.
    pub fn to_order(&self, order: AxisOrder) -> Tensor3 {
        if order == self.order {
            return self.clone();
        }
        let src = self.order.strides(self.extents);
        Tensor3::from_fn(self.extents, order, |c| {
            self.data[c[0] * src[0] + c[1] * src[1] + c[2] * src[2]]
        })
    }

    /// Offset of the first non-finite sample, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        first_non_finite(&self.data)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

pub(crate) fn first_non_finite(data: &[ComplexSample]) -> Option<usize> {
    data.iter().position(|c| !c.re.is_finite() || !c.im.is_finite())
}

pub const TENSOR_FILE_MAGIC: [u8; 4] = *b"CRFT";
pub const TENSOR_FILE_VERSION: u32 = 1;

/// Writes a global tensor in the binary tensor file format (X fastest).
pub fn write_tensor<W: Write>(mut w: W, dims: TensorDims, tensor: &Tensor3) -> Result<()> {
    if tensor.extents() != dims.as_array() {
        return Err(Error::ShapeMismatch(format!(
            "tensor extents {:?} do not match dims {dims}",
            tensor.extents()
        )));
    }
    let t = tensor.to_order(AxisOrder::XYZ);
    w.write_all(&TENSOR_FILE_MAGIC)?;
    w.write_all(&TENSOR_FILE_VERSION.to_le_bytes())?;
    for n in dims.as_array() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(t.len() * 16);
    for c in t.data() {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Reads a tensor written by [`write_tensor`]. The result is in X-fastest order.
pub fn read_tensor<R: Read>(mut r: R) -> Result<(TensorDims, Tensor3)> {
    let mut head = [0u8; 4 + 4 + 24];
    r.read_exact(&mut head)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    if head[..4] != TENSOR_FILE_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &head[..4])));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != TENSOR_FILE_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = |i: usize| {
        let v = u64::from_le_bytes(head[8 + 8 * i..16 + 8 * i].try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Format(format!("dimension {v} too large")))
    };
    let dims = TensorDims::new(dim(0)?, dim(1)?, dim(2)?)
        .map_err(|e| Error::Format(e.to_string()))?;
    let mut bytes = vec![0u8; dims.len() * 16];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
    let data: Vec<ComplexSample> = bytes
        .chunks_exact(16)
        .map(|b| {
            ComplexSample::new(
                f64::from_le_bytes(b[..8].try_into().unwrap()),
                f64::from_le_bytes(b[8..].try_into().unwrap()),
            )
        })
        .collect();
    if let Some(off) = first_non_finite(&data) {
        return Err(Error::NonFinite(off));
    }
    let t = Tensor3::from_vec(dims.as_array(), AxisOrder::XYZ, data)?;
    Ok((dims, t))
}
