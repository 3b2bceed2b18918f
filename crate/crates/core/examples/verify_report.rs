//! Full check report for a small configuration, as JSON lines.

use pencil_fft::driver::RunConfig;
use pencil_fft::verify::verify_inproc;
use pencil_fft::{StrategyConfig, TensorDims};

fn main() -> pencil_fft::Result<()> {
    let cfg = RunConfig::pencil(TensorDims::cube(8)?, 4, StrategyConfig::default())?;
    let report = verify_inproc(&cfg, 42)?;
    print!("{}", report.to_json_lines());
    println!("all passed: {}", report.passed());
    Ok(())
}
