//! Correctness checks against an independent direct-summation oracle.
//!
//! Nothing here uses the FFT kernels: the oracle evaluates the triple sum
//! over all input points for every output point.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::driver::{forward_gathered, RunConfig};
use crate::error::{Error, Result};
use crate::pipeline::StrategyConfig;
use crate::rng::random_tensor;
use crate::tensor::{Axis, ComplexSample, Tensor3, TensorDims};
use crate::transport::{run_inproc, RankComms};

pub use crate::fft1d::Direction;

/// Largest tensor (in points) the oracle accepts.
pub const ORACLE_MAX_POINTS: usize = 4096;
pub const ORACLE_ABS_TOL: f64 = 1e-10;
pub const ROUNDTRIP_ABS_TOL: f64 = 1e-12;
pub const PARSEVAL_REL_TOL: f64 = 1e-10;

/// Direct evaluation of the 3D DFT; backward includes `1/(nx·ny·nz)`.
pub fn dft3_oracle(tensor: &Tensor3, direction: Direction) -> Result<Tensor3> {
    let len = tensor.len();
    if len > ORACLE_MAX_POINTS {
        return Err(Error::OracleTooLarge {
            len,
            limit: ORACLE_MAX_POINTS,
        });
    }
    let [nx, ny, nz] = tensor.extents();
    // Common period of all three axes; with power-of-two extents the total
    // phase is an exact integer multiple of 2π/period.
    let period = nx.max(ny).max(nz);
    for n in [nx, ny, nz] {
        if n == 0 || period % n != 0 {
            return Err(Error::InvalidSize(format!(
                "oracle needs extents dividing {period}, got {:?}",
                tensor.extents()
            )));
        }
    }
    let (fx, fy, fz) = (period / nx, period / ny, period / nz);
    let sign = match direction {
        Direction::Forward => -1.0,
        Direction::Backward => 1.0,
    };
    let roots: Vec<ComplexSample> = (0..period)
        .map(|m| {
            let (s, c) = (2.0 * PI * m as f64 / period as f64).sin_cos();
            ComplexSample::new(c, sign * s)
        })
        .collect();
    let input = tensor.data();
    let st = tensor.order().strides(tensor.extents());
    let scale = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => 1.0 / len as f64,
    };

    let mut out = Tensor3::zeros(tensor.extents(), tensor.order());
    let sto = out.order().strides(out.extents());
    let data = out.data_mut();
    for kz in 0..nz {
        for ky in 0..ny {
            for kx in 0..nx {
                let mut acc = ComplexSample::new(0.0, 0.0);
                for jz in 0..nz {
                    for jy in 0..ny {
                        for jx in 0..nx {
                            let m = (kx * jx * fx + ky * jy * fy + kz * jz * fz) % period;
                            let x = input[jx * st[0] + jy * st[1] + jz * st[2]];
                            let w = roots[m];
                            acc += ComplexSample::new(x.re * w.re - x.im * w.im, x.re * w.im + x.im * w.re);
                        }
                    }
                }
                data[kx * sto[0] + ky * sto[1] + kz * sto[2]] = acc * scale;
            }
        }
    }
    Ok(out)
}

/// One named check: its metrics, thresholds and verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub metrics: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    pub passed: bool,
}

impl CheckReport {
    /// Passes iff every metric is at or below its threshold.
    pub fn new(name: impl Into<String>, metrics: Vec<(&str, f64, f64)>) -> Self {
        let passed = metrics.iter().all(|&(_, v, t)| v <= t);
        CheckReport {
            name: name.into(),
            metrics: metrics.iter().map(|&(k, v, _)| (k.to_string(), v)).collect(),
            thresholds: metrics.iter().map(|&(k, _, t)| (k.to_string(), t)).collect(),
            passed,
        }
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One JSON object per check, newline separated.
    pub fn to_json_lines(&self) -> String {
        self.checks.iter().map(|c| c.to_json() + "\n").collect()
    }
}

/// Max abs error and relative L2 error of `actual` against `expected`.
pub fn compare(name: &str, actual: &Tensor3, expected: &Tensor3, abs_tol: f64, rel_tol: f64) -> Result<CheckReport> {
    if actual.extents() != expected.extents() || actual.order() != expected.order() {
        return Err(Error::ShapeMismatch(format!(
            "comparing {:?}/{} against {:?}/{}",
            actual.extents(),
            actual.order(),
            expected.extents(),
            expected.order()
        )));
    }
    let (mut max_abs, mut diff2, mut ref2) = (0.0f64, 0.0, 0.0);
    for (a, e) in actual.data().iter().zip(expected.data()) {
        let d = (a - e).norm();
        max_abs = max_abs.max(d);
        diff2 += d * d;
        ref2 += e.norm_sqr();
    }
    let rel = if ref2 > 0.0 { (diff2 / ref2).sqrt() } else { diff2.sqrt() };
    Ok(CheckReport::new(
        name,
        vec![("max_abs_error", max_abs, abs_tol), ("rel_l2_error", rel, rel_tol)],
    ))
}

/// `|Σ|x|² − Σ|X|²/N| / Σ|x|²` for a signal and its unnormalized spectrum.
pub fn parseval_rel_error(signal: &Tensor3, spectrum: &Tensor3) -> f64 {
    let ex = signal.energy();
    let es = spectrum.energy() / signal.len() as f64;
    let diff = (ex - es).abs();
    if ex > 0.0 {
        diff / ex
    } else {
        diff
    }
}

pub fn parseval_check(signal: &Tensor3, spectrum: &Tensor3, rel_tol: f64) -> CheckReport {
    CheckReport::new(
        "parseval",
        vec![("parseval_rel_error", parseval_rel_error(signal, spectrum), rel_tol)],
    )
}

/// Number of samples whose bit patterns differ.
pub fn bitwise_mismatches(a: &Tensor3, b: &Tensor3) -> usize {
    if a.extents() != b.extents() || a.order() != b.order() {
        return a.len().max(b.len());
    }
    a.data()
        .iter()
        .zip(b.data())
        .filter(|(x, y)| x.re.to_bits() != y.re.to_bits() || x.im.to_bits() != y.im.to_bits())
        .count()
}

/// Runs every check for `cfg` collectively on this rank's communicators.
/// The report is produced on rank 0.
///
/// Checks: oracle agreement (skipped above the oracle size limit),
/// roundtrip, Parseval and bitwise agreement of all four options.
pub fn verify_rank(cfg: &RunConfig, comms: RankComms, seed: u64) -> Result<(Option<VerifyReport>, RankComms)> {
    let mut fft = cfg.transform(comms)?;
    let mut t = fft.random_input(seed);
    fft.forward(&mut t)?;
    let spectrum = t.gather(&mut *fft.comms_mut().world)?;
    fft.backward(&mut t)?;
    let back = t.gather(&mut *fft.comms_mut().world)?;
    let mut comms = fft.into_comms();

    let mut by_option = Vec::new();
    for option in 1..=4u8 {
        let strategy = StrategyConfig::option(option)?.with_k(cfg.strategy.k);
        let other = RunConfig { strategy, ..*cfg };
        let mut fft = other.transform(comms)?;
        by_option.push((option, forward_gathered(&mut fft, seed)?));
        comms = fft.into_comms();
    }

    let (Some(spectrum), Some(back)) = (spectrum, back) else {
        return Ok((None, comms));
    };
    let input = random_tensor(cfg.dims, seed);
    let mut report = VerifyReport::default();
    if input.len() <= ORACLE_MAX_POINTS {
        let oracle = dft3_oracle(&input, Direction::Forward)?;
        report.checks.push(compare("oracle", &spectrum, &oracle, ORACLE_ABS_TOL, ORACLE_ABS_TOL)?);
    }
    report
        .checks
        .push(compare("roundtrip", &back, &input, ROUNDTRIP_ABS_TOL, ROUNDTRIP_ABS_TOL)?);
    report.checks.push(parseval_check(&input, &spectrum, PARSEVAL_REL_TOL));
    let mismatched = by_option
        .iter()
        .filter_map(|(_, s)| s.as_ref())
        .map(|s| bitwise_mismatches(s, &spectrum))
        .sum::<usize>();
    report.checks.push(CheckReport::new(
        "option_equivalence",
        vec![("mismatched_samples", mismatched as f64, 0.0)],
    ));
    Ok((Some(report), comms))
}

/// [`verify_rank`] on in-process ranks.
pub fn verify_inproc(cfg: &RunConfig, seed: u64) -> Result<VerifyReport> {
    let results = run_inproc(cfg.grid, |comms| verify_rank(cfg, comms, seed).map(|r| r.0))?;
    let mut out = None;
    for r in results {
        if let Some(rep) = r? {
            out = Some(rep);
        }
    }
    out.ok_or_else(|| Error::State("rank 0 produced no report".into()))
}

/// Forward then backward on seeded random input, compared with the input
/// at [`ROUNDTRIP_ABS_TOL`].
pub fn roundtrip_check(
    dims: TensorDims,
    grid: crate::decomp::ProcessGrid,
    strategy: StrategyConfig,
    seed: u64,
) -> Result<VerifyReport> {
    let cfg = RunConfig::pencil(dims, grid.p_total(), strategy)?.with_grid(grid);
    let back = crate::driver::inproc_roundtrip(&cfg, seed)?;
    let input = random_tensor(dims, seed);
    Ok(VerifyReport {
        checks: vec![compare("roundtrip", &back, &input, ROUNDTRIP_ABS_TOL, ROUNDTRIP_ABS_TOL)?],
    })
}

/// Energy along an axis is not needed by the checks, but the oracle's
/// separability is handy for tests: the 1D DFT along `axis` of a tensor.
pub fn dft_along_axis(tensor: &Tensor3, axis: Axis, direction: Direction) -> Tensor3 {
    let ext = tensor.extents();
    let n = ext[axis.index()];
    let sign = match direction {
        Direction::Forward => -1.0,
        Direction::Backward => 1.0,
    };
    Tensor3::from_fn(ext, tensor.order(), |c| {
        let k = c[axis.index()];
        (0..n).fold(ComplexSample::new(0.0, 0.0), |acc, j| {
            let mut src = c;
            src[axis.index()] = j;
            let (s, co) = (2.0 * PI * ((j * k) % n) as f64 / n as f64).sin_cos();
            acc + tensor.get(src).unwrap() * ComplexSample::new(co, sign * s)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::AxisOrder;

    fn c(re: f64, im: f64) -> ComplexSample {
        ComplexSample::new(re, im)
    }

    #[test]
    fn oracle_trivial_cases() {
        let one = Tensor3::from_vec([1, 1, 1], AxisOrder::XYZ, vec![c(3.0, 1.0)]).unwrap();
        assert_eq!(dft3_oracle(&one, Direction::Forward).unwrap(), one);
        let ones = Tensor3::from_vec([2, 2, 2], AxisOrder::XYZ, vec![c(1.0, 0.0); 8]).unwrap();
        let y = dft3_oracle(&ones, Direction::Forward).unwrap();
        assert_eq!(y.data()[0], c(8.0, 0.0));
        assert!(y.data()[1..].iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn oracle_inverse_pair() {
        let x = random_tensor(TensorDims::cube(4).unwrap(), 9);
        let y = dft3_oracle(&x, Direction::Forward).unwrap();
        let back = dft3_oracle(&y, Direction::Backward).unwrap();
        let rep = compare("inverse", &back, &x, 1e-12, 1e-12).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn oracle_is_separable() {
        let dims = TensorDims::new(4, 2, 8).unwrap();
        let x = random_tensor(dims, 2);
        let y = dft3_oracle(&x, Direction::Forward).unwrap();
        let mut s = x.clone();
        for axis in Axis::ALL {
            s = dft_along_axis(&s, axis, Direction::Forward);
        }
        assert!(compare("sep", &y, &s, 1e-12, 1e-12).unwrap().passed);
    }

    #[test]
    fn oracle_size_guard() {
        let big = Tensor3::zeros([32, 16, 16], AxisOrder::XYZ);
        assert!(matches!(dft3_oracle(&big, Direction::Forward), Err(Error::OracleTooLarge { len: 8192, .. })));
    }

    #[test]
    fn compare_metrics() {
        let x = random_tensor(TensorDims::cube(4).unwrap(), 1);
        let same = compare("same", &x, &x, 0.0, 0.0).unwrap();
        assert_eq!(same.metric("max_abs_error"), Some(0.0));
        assert_eq!(same.metric("rel_l2_error"), Some(0.0));
        assert!(same.passed);

        let mut y = x.clone();
        y.data_mut()[5] += c(1e-6, 0.0);
        let rep = compare("eps", &y, &x, 1e-7, 1.0).unwrap();
        assert!((rep.metric("max_abs_error").unwrap() - 1e-6).abs() < 1e-15);
        assert!(!rep.passed);

        let z = Tensor3::zeros([4, 4, 2], AxisOrder::XYZ);
        assert!(matches!(compare("shape", &z, &x, 1.0, 1.0), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn report_json_shape() {
        let rep = CheckReport::new("demo", vec![("max_abs_error", 1e-13, 1e-12)]);
        let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(v["name"], "demo");
        assert_eq!(v["passed"], true);
        assert_eq!(v["thresholds"]["max_abs_error"], 1e-12);
        assert!(v["metrics"]["max_abs_error"].is_number());
    }

    #[test]
    fn roundtrip_single_rank_and_zero_input() {
        let dims = TensorDims::new(8, 4, 2).unwrap();
        let grid = crate::decomp::ProcessGrid::factorize(1).unwrap();
        assert!(roundtrip_check(dims, grid, StrategyConfig::default(), 3).unwrap().passed());

        let zero = Tensor3::zeros([8, 4, 2], AxisOrder::XYZ);
        let cfg = RunConfig::pencil(dims, 2, StrategyConfig::default()).unwrap();
        let spec = crate::driver::inproc_forward_global(&cfg, &zero).unwrap();
        assert!(spec.data().iter().all(|v| *v == c(0.0, 0.0)));
    }

    #[test]
    fn deterministic_reports() {
        let cfg = RunConfig::pencil(TensorDims::cube(4).unwrap(), 2, StrategyConfig::default()).unwrap();
        let a = verify_inproc(&cfg, 17).unwrap();
        let b = verify_inproc(&cfg, 17).unwrap();
        assert_eq!(a, b);
        assert!(a.passed(), "{a:?}");
        assert_eq!(a.checks.len(), 4);
    }
}
