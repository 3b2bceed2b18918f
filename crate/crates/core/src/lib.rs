//! Distributed 3D complex FFT over a 2D grid of ranks.
//!
//! The global `nx × ny × nz` tensor is split into pencils. Each rank runs
//! batched 1D FFTs along the axis it holds in full, and all-to-all
//! transposes over row and column communicators move the data between
//! X-, Y- and Z-pencils. Transposes can be chunked and pipelined so that
//! packing of one chunk overlaps the exchange of the previous one.
//!
//! Ranks are threads in one process ([`transport::run_inproc`]) or
//! processes connected over TCP ([`transport::TcpMesh`]).
//!
//! ```
//! use pencil_fft::{driver::RunConfig, StrategyConfig, TensorDims};
//!
//! let dims = TensorDims::cube(8).unwrap();
//! let cfg = RunConfig::pencil(dims, 4, StrategyConfig::default()).unwrap();
//! let (spectrum, _stats) = pencil_fft::driver::inproc_forward(&cfg, 42).unwrap();
//! assert_eq!(spectrum.extents(), [8, 8, 8]);
//! ```

pub mod bench;
pub mod decomp;
pub mod driver;
pub mod error;
pub mod exchange;
pub mod fft1d;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod transport;
pub mod verify;

pub use decomp::{PencilDescriptor, ProcessGrid, Scheme, SlabDescriptor};
pub use error::{Error, Result};
pub use fft1d::{Direction, Plan1D};
pub use pipeline::{serial_3dfft, DistributedTensor, PencilFft, StrategyConfig};
pub use tensor::{AxisOrder, ComplexSample, Tensor3, TensorDims};
pub use transport::{CollectiveStats, Communicator, RankComms};
