//! 1D plans and the single-rank 3D transform.

use pencil_fft::fft1d::dft_oracle;
use pencil_fft::rng::random_tensor;
use pencil_fft::{serial_3dfft, ComplexSample, Direction, Plan1D, TensorDims};

fn main() -> pencil_fft::Result<()> {
    let plan = Plan1D::new(8, Direction::Forward)?;
    let mut line: Vec<ComplexSample> = (0..8).map(|i| ComplexSample::new(i as f64, 0.0)).collect();
    let expect = dft_oracle(&line, Direction::Forward);
    plan.execute(&mut line);
    let err = line.iter().zip(&expect).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("n=8 ramp: X[1] = {:.4}, max error vs direct sum {err:.1e}", line[1]);

    let dims = TensorDims::new(16, 8, 4)?;
    let x = random_tensor(dims, 7);
    let y = serial_3dfft(&x, Direction::Forward)?;
    let back = serial_3dfft(&y, Direction::Backward)?;
    let err = back.data().iter().zip(x.data()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("{dims}: energy {:.6} -> {:.6} (/N), roundtrip error {err:.1e}", x.energy(), y.energy() / x.len() as f64);
    Ok(())
}
