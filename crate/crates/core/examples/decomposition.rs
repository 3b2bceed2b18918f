//! Block shapes per layout and rank limits per scheme.

use pencil_fft::decomp::{max_ranks, Layout};
use pencil_fft::{PencilDescriptor, ProcessGrid, Scheme, SlabDescriptor, TensorDims};

fn main() -> pencil_fft::Result<()> {
    let dims = TensorDims::cube(8)?;
    for scheme in [Scheme::Slab, Scheme::Pencil, Scheme::Cell] {
        println!("{scheme}: P_max = {}", max_ranks(dims, scheme));
    }
    match SlabDescriptor::new(dims, 16) {
        Ok(_) => println!("slab accepted 16 ranks"),
        Err(e) => println!("slab with 16 ranks: {e}"),
    }

    let grid = ProcessGrid::factorize(8)?;
    let pencil = PencilDescriptor::new(dims, grid)?;
    println!("grid {grid}");
    for rank in 0..grid.p_total() {
        let shapes: Vec<String> = [Layout::XPencil, Layout::YPencil, Layout::ZPencil]
            .iter()
            .map(|&l| {
                let b = pencil.block(l, rank);
                format!("{:?}@{:?}", b.extents, b.offsets)
            })
            .collect();
        println!("rank {rank} {:?}: {}", grid.coords(rank), shapes.join("  "));
    }
    Ok(())
}
