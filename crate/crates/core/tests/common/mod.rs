#![allow(dead_code)]

use std::f64::consts::PI;

use pencil_fft::{ComplexSample, Tensor3};

/// Sextuple-loop forward DFT of an XYZ-ordered tensor, written out
/// without any shared helpers.
pub fn direct_dft3(x: &Tensor3) -> Vec<ComplexSample> {
    let [nx, ny, nz] = x.extents();
    let data = x.to_order(pencil_fft::AxisOrder::XYZ).into_vec();
    let mut out = vec![ComplexSample::new(0.0, 0.0); nx * ny * nz];
    for kz in 0..nz {
        for ky in 0..ny {
            for kx in 0..nx {
                let (mut re, mut im) = (0.0, 0.0);
                for jz in 0..nz {
                    for jy in 0..ny {
                        for jx in 0..nx {
                            let turns = ((kx * jx) % nx) as f64 / nx as f64
                                + ((ky * jy) % ny) as f64 / ny as f64
                                + ((kz * jz) % nz) as f64 / nz as f64;
                            let (s, c) = (-2.0 * PI * turns).sin_cos();
                            let v = data[jx + nx * (jy + ny * jz)];
                            re += v.re * c - v.im * s;
                            im += v.re * s + v.im * c;
                        }
                    }
                }
                out[kx + nx * (ky + ny * kz)] = ComplexSample::new(re, im);
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[ComplexSample], b: &[ComplexSample]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn bits_equal(a: &Tensor3, b: &Tensor3) -> bool {
    a.extents() == b.extents()
        && a.order() == b.order()
        && a.data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits())
}

/// Reserves `n` distinct localhost ports and releases them.
pub fn free_ports(n: usize) -> Vec<u16> {
    let ls: Vec<_> = (0..n)
        .map(|_| std::net::TcpListener::bind("127.0.0.1:0").unwrap())
        .collect();
    ls.iter().map(|l| l.local_addr().unwrap().port()).collect()
}

pub fn hosts_text(ports: &[u16]) -> String {
    ports
        .iter()
        .enumerate()
        .map(|(r, p)| format!("{r} 127.0.0.1:{p}\n"))
        .collect()
}
