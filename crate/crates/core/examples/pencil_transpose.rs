//! One XY transpose, routed by hand between the plans of all ranks.

use pencil_fft::decomp::Layout;
use pencil_fft::exchange::{ExchangeKind, ExchangePlan};
use pencil_fft::{ComplexSample, PencilDescriptor, ProcessGrid, TensorDims};

fn main() -> pencil_fft::Result<()> {
    let dims = TensorDims::new(4, 4, 2)?;
    let grid = ProcessGrid::with_shape(2, 2, 1)?;
    let pencil = PencilDescriptor::new(dims, grid)?;
    let plans: Vec<_> = (0..2)
        .map(|r| ExchangePlan::new(&pencil, ExchangeKind::XyForward, r, 1))
        .collect::<pencil_fft::Result<_>>()?;

    // Value = global linear index, so every sample says where it came from.
    let srcs: Vec<Vec<ComplexSample>> = plans
        .iter()
        .map(|p| {
            let b = p.src();
            (0..b.len())
                .map(|off| {
                    let l = pencil_fft::tensor::coords_of(off, b.extents, b.order).unwrap();
                    let g = [0, 1, 2].map(|a| l[a] + b.offsets[a]);
                    ComplexSample::new((g[0] + 4 * (g[1] + 4 * g[2])) as f64, 0.0)
                })
                .collect()
        })
        .collect();
    let packed: Vec<_> = (0..2).map(|r| plans[r].pack_chunk(&srcs[r], 0)).collect::<pencil_fft::Result<_>>()?;
    for (r, plan) in plans.iter().enumerate() {
        let seg = plan.chunk_len(0) / 2;
        let mut recv = Vec::new();
        for peer in &packed {
            recv.extend_from_slice(&peer[r * seg..(r + 1) * seg]);
        }
        let mut dst = vec![ComplexSample::new(0.0, 0.0); plan.dst().len()];
        plan.unpack_chunk(&recv, &mut dst, 0)?;
        let b = pencil.block(Layout::YPencil, r);
        let ids: Vec<_> = dst.iter().map(|v| v.re as usize).collect();
        println!("rank {r} Y-pencil {:?}@{:?} order {}: {ids:?}", b.extents, b.offsets, b.order);
    }
    Ok(())
}
