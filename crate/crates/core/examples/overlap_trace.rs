//! Pack/exchange timeline with and without overlap, on a slowed transport.

use std::sync::Arc;
use std::time::Duration;

use pencil_fft::driver::RunConfig;
use pencil_fft::pipeline::{Phase, ScheduleTrace};
use pencil_fft::transport::{run_inproc, Delayed};
use pencil_fft::{StrategyConfig, TensorDims};

fn main() -> pencil_fft::Result<()> {
    let dims = TensorDims::cube(16)?;
    for option in [2, 4] {
        let cfg = RunConfig::pencil(dims, 4, StrategyConfig::option(option)?.with_k(4))?;
        let trace = Arc::new(ScheduleTrace::new());
        run_inproc(cfg.grid, |comms| -> pencil_fft::Result<()> {
            let comms = comms.map_exchange_comms(|c| Delayed::boxed(c, Duration::from_millis(10)));
            let mut fft = cfg.transform(comms)?;
            fft.set_trace(trace.clone());
            let mut t = fft.random_input(1);
            fft.forward(&mut t)
        })?
        .into_iter()
        .collect::<pencil_fft::Result<Vec<_>>>()?;

        println!("option {option}: rank 0 timeline (ms)");
        for e in trace.events().iter().filter(|e| e.rank == 0 && e.phase != Phase::Unpack) {
            println!(
                "  {:<22} {:?} chunk {} {:7.2} .. {:7.2}",
                e.stage.name(),
                e.phase,
                e.chunk,
                e.start.as_secs_f64() * 1e3,
                e.end.as_secs_f64() * 1e3
            );
        }
        println!("  packs inside an exchange window: {}", trace.packs_inside_exchanges().len());
    }
    Ok(())
}
