mod common;

use common::{bits_equal, direct_dft3, max_abs_diff};
use pencil_fft::driver::{inproc_forward, inproc_forward_global, inproc_roundtrip, RunConfig};
use pencil_fft::rng::random_tensor;
use pencil_fft::verify::verify_inproc;
use pencil_fft::{serial_3dfft, AxisOrder, ComplexSample, Direction, ProcessGrid, StrategyConfig, Tensor3, TensorDims};

#[test]
fn rank_count_does_not_change_bits() {
    let dims = TensorDims::cube(16).unwrap();
    let serial = serial_3dfft(&random_tensor(dims, 5), Direction::Forward).unwrap();
    for p in [1, 2, 4, 8, 16] {
        let cfg = RunConfig::pencil(dims, p, StrategyConfig::default()).unwrap();
        let (out, _) = inproc_forward(&cfg, 5).unwrap();
        assert!(bits_equal(&out, &serial), "P={p}");
    }
}

#[test]
fn grid_shape_does_not_change_bits() {
    let dims = TensorDims::new(16, 8, 4).unwrap();
    let serial = serial_3dfft(&random_tensor(dims, 8), Direction::Forward).unwrap();
    for (py, pz) in [(8, 1), (4, 2), (2, 4), (1, 4)] {
        let grid = ProcessGrid::with_shape(py * pz, py, pz).unwrap();
        let cfg = RunConfig::pencil(dims, py * pz, StrategyConfig::default().with_k(1))
            .unwrap()
            .with_grid(grid);
        let (out, _) = inproc_forward(&cfg, 8).unwrap();
        assert!(bits_equal(&out, &serial), "grid {py}x{pz}");
    }
}

#[test]
fn pencil_matches_direct_sum_on_non_cube() {
    let dims = TensorDims::new(8, 4, 16).unwrap();
    let cfg = RunConfig::pencil(dims, 8, StrategyConfig::default()).unwrap();
    let (out, _) = inproc_forward(&cfg, 2).unwrap();
    let err = max_abs_diff(out.data(), &direct_dft3(&random_tensor(dims, 2)));
    assert!(err <= 1e-10, "{err}");
}

#[test]
fn slab_matches_pencil() {
    let dims = TensorDims::cube(8).unwrap();
    let s = StrategyConfig::default();
    let (slab, _) = inproc_forward(&RunConfig::slab(dims, 4, s).unwrap(), 4).unwrap();
    let (pencil, _) = inproc_forward(&RunConfig::pencil(dims, 4, s).unwrap(), 4).unwrap();
    assert!(bits_equal(&slab, &pencil));
}

#[test]
fn no_restore_roundtrip_and_call_count() {
    let dims = TensorDims::cube(8).unwrap();
    let cfg = RunConfig::pencil(dims, 4, StrategyConfig::default()).unwrap().with_restore(false);
    let back = inproc_roundtrip(&cfg, 3).unwrap();
    assert!(max_abs_diff(back.data(), random_tensor(dims, 3).data()) <= 1e-12);
    let (_, stats) = inproc_forward(&cfg, 3).unwrap();
    assert!(stats.iter().all(|s| s.alltoall_calls == 4));
}

#[test]
fn delta_and_constant() {
    let dims = TensorDims::cube(8).unwrap();
    let cfg = RunConfig::pencil(dims, 4, StrategyConfig::default()).unwrap();
    let mut delta = Tensor3::zeros([8, 8, 8], AxisOrder::XYZ);
    delta.set([0, 0, 0], ComplexSample::new(1.0, 0.0)).unwrap();
    let out = inproc_forward_global(&cfg, &delta).unwrap();
    assert!(out.data().iter().all(|v| *v == ComplexSample::new(1.0, 0.0)));

    let ones = Tensor3::from_fn([8, 8, 8], AxisOrder::XYZ, |_| ComplexSample::new(1.0, 0.0));
    let out = inproc_forward_global(&cfg, &ones).unwrap();
    assert_eq!(out.get([0, 0, 0]).unwrap(), ComplexSample::new(512.0, 0.0));
    assert!(out.data()[1..].iter().all(|v| v.norm() < 1e-12));
}

#[test]
fn verify_report_passes_for_every_option() {
    for option in 1..=4 {
        let s = StrategyConfig::option(option).unwrap();
        let cfg = RunConfig::pencil(TensorDims::cube(8).unwrap(), 4, s).unwrap();
        let rep = verify_inproc(&cfg, 42).unwrap();
        assert!(rep.passed(), "option {option}: {rep:?}");
    }
}
