use crate::error::{Error, Result};
use crate::fft1d::{Direction, Plan1D};
use crate::tensor::{Axis, ComplexSample, Tensor3};

/// Single-rank 3D FFT. Axes are visited in the same order as the
/// distributed pipeline (X, Y, Z forward; Z, Y, X backward), so results
/// agree bit for bit. Backward includes the `1/(nx·ny·nz)` factor.
pub fn serial_3dfft(tensor: &Tensor3, direction: Direction) -> Result<Tensor3> {
    let extents = tensor.extents();
    if let Some(&n) = extents.iter().find(|&&n| n == 0 || !n.is_power_of_two()) {
        return Err(Error::InvalidSize(format!(
            "extent {n} in {extents:?} is not a power of two"
        )));
    }
    if let Some(off) = tensor.first_non_finite() {
        return Err(Error::NonFinite(off));
    }
    let mut out = tensor.clone();
    let axes = match direction {
        Direction::Forward => [Axis::X, Axis::Y, Axis::Z],
        Direction::Backward => [Axis::Z, Axis::Y, Axis::X],
    };
    for axis in axes {
        transform_axis(&mut out, axis, direction)?;
    }
    if direction == Direction::Backward {
        let scale = 1.0 / tensor.len() as f64;
        for v in out.data_mut() {
            *v *= scale;
        }
    }
    Ok(out)
}

fn transform_axis(t: &mut Tensor3, axis: Axis, direction: Direction) -> Result<()> {
    let extents = t.extents();
    let n = extents[axis.index()];
    if n == 1 {
        return Ok(());
    }
    let plan = Plan1D::new(n, direction)?;
    let strides = t.order().strides(extents);
    let stride = strides[axis.index()];
    let others: Vec<Axis> = Axis::ALL.into_iter().filter(|&a| a != axis).collect();
    let (a, b) = (others[0].index(), others[1].index());
    let mut line = vec![ComplexSample::new(0.0, 0.0); n];
    let data = t.data_mut();
    for j in 0..extents[b] {
        for i in 0..extents[a] {
            let base = i * strides[a] + j * strides[b];
            for (m, v) in line.iter_mut().enumerate() {
                *v = data[base + m * stride];
            }
            plan.execute(&mut line);
            for (m, v) in line.iter().enumerate() {
                data[base + m * stride] = *v;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft1d::dft_oracle;
    use crate::rng::SplitMix64;
    use crate::tensor::AxisOrder;

    #[test]
    fn single_point_is_identity() {
        let t = Tensor3::from_vec([1, 1, 1], AxisOrder::XYZ, vec![ComplexSample::new(2.0, -3.0)]).unwrap();
        assert_eq!(serial_3dfft(&t, Direction::Forward).unwrap(), t);
    }

    #[test]
    fn separable_input_gives_outer_product() {
        let mut g = SplitMix64::new(11);
        let f: Vec<_> = (0..4).map(|_| g.next_complex()).collect();
        let gy: Vec<_> = (0..4).map(|_| g.next_complex()).collect();
        let h: Vec<_> = (0..4).map(|_| g.next_complex()).collect();
        let t = Tensor3::from_fn([4, 4, 4], AxisOrder::XYZ, |[i, j, k]| f[i] * gy[j] * h[k]);
        let (fs, gs, hs) = (
            dft_oracle(&f, Direction::Forward),
            dft_oracle(&gy, Direction::Forward),
            dft_oracle(&h, Direction::Forward),
        );
        let out = serial_3dfft(&t, Direction::Forward).unwrap();
        for k in 0..4 {
            for j in 0..4 {
                for i in 0..4 {
                    let want = fs[i] * gs[j] * hs[k];
                    assert!((out.get([i, j, k]).unwrap() - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn order_independent_values() {
        let mut g = SplitMix64::new(4);
        let t = Tensor3::from_fn([8, 2, 4], AxisOrder::XYZ, |_| g.next_complex());
        let a = serial_3dfft(&t, Direction::Forward).unwrap();
        let b = serial_3dfft(&t.to_order(AxisOrder::ZYX), Direction::Forward).unwrap();
        assert_eq!(b.order(), AxisOrder::ZYX);
        assert_eq!(b.to_order(AxisOrder::XYZ), a);
    }

    #[test]
    fn rejects_bad_extents() {
        let t = Tensor3::zeros([3, 2, 2], AxisOrder::XYZ);
        assert!(matches!(serial_3dfft(&t, Direction::Forward), Err(Error::InvalidSize(_))));
    }
}
