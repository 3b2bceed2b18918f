//! Four ranks over localhost TCP, compared with in-process ranks.

use std::net::TcpListener;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use pencil_fft::driver::{forward_gathered, inproc_forward, RunConfig};
use pencil_fft::transport::TcpMesh;
use pencil_fft::{RankComms, StrategyConfig, TensorDims};

fn main() -> pencil_fft::Result<()> {
    let cfg = RunConfig::pencil(TensorDims::cube(8)?, 4, StrategyConfig::default())?;
    let listeners: Vec<TcpListener> = (0..4).map(|_| TcpListener::bind("127.0.0.1:0")).collect::<Result<_, _>>()?;
    let addrs: Vec<_> = listeners.iter().map(|l| l.local_addr()).collect::<Result<_, _>>()?;
    println!("hosts: {addrs:?}");

    let handles: Vec<_> = listeners
        .into_iter()
        .enumerate()
        .map(|(rank, l)| {
            let addrs = addrs.clone();
            thread::spawn(move || -> pencil_fft::Result<_> {
                let mesh: Arc<TcpMesh> = TcpMesh::with_listener(rank, l, &addrs, Duration::from_secs(10))?;
                let mut fft = cfg.transform(RankComms::tcp(mesh, cfg.grid)?)?;
                forward_gathered(&mut fft, 42)
            })
        })
        .collect();
    let mut tcp = None;
    for h in handles {
        if let Some(t) = h.join().expect("rank thread")? {
            tcp = Some(t);
        }
    }
    let (inproc, _) = inproc_forward(&cfg, 42)?;
    println!("tcp spectrum bitwise equal to inproc: {}", tcp.as_ref() == Some(&inproc));
    Ok(())
}
