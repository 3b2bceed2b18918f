//! Forward transform on in-process ranks, checked against the serial path.

use pencil_fft::driver::{inproc_forward, RunConfig};
use pencil_fft::rng::random_tensor;
use pencil_fft::{serial_3dfft, Direction, StrategyConfig, TensorDims};

fn main() -> pencil_fft::Result<()> {
    let dims = TensorDims::cube(16)?;
    let serial = serial_3dfft(&random_tensor(dims, 42), Direction::Forward)?;
    for ranks in [1, 2, 4, 8, 16] {
        let cfg = RunConfig::pencil(dims, ranks, StrategyConfig::default())?;
        let (spectrum, stats) = inproc_forward(&cfg, 42)?;
        let calls: u64 = stats.iter().map(|s| s.alltoall_calls).sum();
        println!(
            "{cfg}: identical to serial = {}, all-to-all calls = {calls}",
            spectrum == serial
        );
    }
    Ok(())
}
