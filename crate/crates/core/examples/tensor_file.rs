//! Writes a tensor file and reads it back.

use pencil_fft::rng::random_tensor;
use pencil_fft::tensor::{read_tensor, write_tensor};
use pencil_fft::TensorDims;

fn main() -> pencil_fft::Result<()> {
    let dims = TensorDims::new(8, 4, 2)?;
    let t = random_tensor(dims, 3);
    let mut bytes = Vec::new();
    write_tensor(&mut bytes, dims, &t)?;
    println!("{} bytes, header {:02x?}", bytes.len(), &bytes[..28]);
    let (d, back) = read_tensor(&bytes[..])?;
    println!("read {d}, identical: {}", back == t);
    Ok(())
}
