//! Three-dimensional complex FFT on a cubic box, built from one-dimensional
//! passes, with pruning for zero-padded inputs and truncated outputs.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::VelocityGrid;

pub(crate) struct Fft3 {
    /// Extent of the nonzero input / wanted output corner along each axis.
    active: usize,
    /// Transform length along each axis.
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(active: usize, size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            active,
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.size.pow(3)
    }

    /// Forward transform of a box whose entries vanish outside the corner
    /// `[0, active)^3`; `pruned = false` transforms every line.
    pub fn forward(&self, data: &mut [Complex64], pruned: bool) {
        let corner = if pruned { self.active } else { self.size };
        self.pass_axis0(data, corner, &self.forward);
        self.pass_axis1(data, corner, &self.forward);
        self.pass_axis2(data, &self.forward);
    }

    /// Unnormalized inverse transform, exact only on the corner `[0, active)^3`
    /// when `pruned` is set.
    pub fn inverse(&self, data: &mut [Complex64], pruned: bool) {
        let corner = if pruned { self.active } else { self.size };
        self.pass_axis2(data, &self.inverse);
        self.pass_axis1(data, corner, &self.inverse);
        self.pass_axis0(data, corner, &self.inverse);
    }

    /// Lines along the first axis for `j, k < corner`.
    fn pass_axis0(&self, data: &mut [Complex64], corner: usize, fft: &Arc<dyn Fft<f64>>) {
        let m = self.size;
        data.par_chunks_mut(m * m).take(corner).for_each(|plane| {
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(&mut plane[..m * corner], &mut scratch);
        });
    }

    /// Lines along the second axis in planes `k < corner`.
    fn pass_axis1(&self, data: &mut [Complex64], corner: usize, fft: &Arc<dyn Fft<f64>>) {
        let m = self.size;
        data.par_chunks_mut(m * m).take(corner).for_each(|plane| {
            let mut buf = vec![Complex64::default(); m * m];
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            for j in 0..m {
                for i in 0..m {
                    buf[i * m + j] = plane[i + m * j];
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for j in 0..m {
                for i in 0..m {
                    plane[i + m * j] = buf[i * m + j];
                }
            }
        });
    }

    /// Lines along the third axis, all of them.
    fn pass_axis2(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let m = self.size;
        let mut lines = vec![Complex64::default(); m * m * m];
        {
            let src = &*data;
            lines.par_chunks_mut(m).enumerate().for_each(|(ij, line)| {
                for (k, x) in line.iter_mut().enumerate() {
                    *x = src[ij + m * m * k];
                }
            });
        }
        lines.par_chunks_mut(m * m).for_each(|block| {
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(block, &mut scratch);
        });
        data.par_chunks_mut(m * m).enumerate().for_each(|(k, plane)| {
            for (ij, x) in plane.iter_mut().enumerate() {
                *x = lines[ij * m + k];
            }
        });
    }
}

/// `(K * u)_k = sum_{l != k} K(|v_k - v_l|) u_l` and the same for `w`, by
/// zero-padded FFT. The kernel is real and even, so both inputs share one
/// complex transform.
pub(crate) fn convolve_radial_pair<F: Fn(f64) -> f64>(
    grid: &VelocityGrid,
    profile: F,
    u: &[f64],
    w: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = grid.points_per_axis();
    let m = 2 * n;
    let fft = Fft3::new(n, m);
    let h = grid.spacing();
    let offset = |i: usize| -> Option<f64> {
        if i < n {
            Some(i as f64)
        } else if i > n {
            Some(i as f64 - m as f64)
        } else {
            None
        }
    };
    let mut kernel = vec![Complex64::default(); fft.len()];
    for r in 0..m {
        for q in 0..m {
            for p in 0..m {
                let (Some(x), Some(y), Some(z)) = (offset(p), offset(q), offset(r)) else {
                    continue;
                };
                if p + q + r > 0 {
                    kernel[p + m * (q + m * r)] = Complex64::new(profile(h * (x * x + y * y + z * z).sqrt()), 0.0);
                }
            }
        }
    }
    fft.forward(&mut kernel, false);

    let embed = |k: usize| {
        let [a, b, c] = grid.coords(k);
        a + m * (b + m * c)
    };
    let mut data = vec![Complex64::default(); fft.len()];
    for k in 0..grid.len() {
        data[embed(k)] = Complex64::new(u[k], w[k]);
    }
    fft.forward(&mut data, true);
    for (x, kv) in data.iter_mut().zip(&kernel) {
        *x *= kv.re;
    }
    fft.inverse(&mut data, true);
    let scale = 1.0 / fft.len() as f64;
    (0..grid.len())
        .map(|k| {
            let x = data[embed(k)];
            (x.re * scale, x.im * scale)
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], m: usize, sign: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); m * m * m];
        for p in 0..m {
            for q in 0..m {
                for r in 0..m {
                    let mut acc = Complex64::default();
                    for c in 0..m {
                        for b in 0..m {
                            for a in 0..m {
                                let phase =
                                    sign * 2.0 * std::f64::consts::PI * ((p * a + q * b + r * c) as f64) / m as f64;
                                acc += data[a + m * (b + m * c)] * Complex64::from_polar(1.0, phase);
                            }
                        }
                    }
                    out[p + m * (q + m * r)] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_transform() {
        let (n, m) = (3, 6);
        let mut data = vec![Complex64::default(); m * m * m];
        for c in 0..n {
            for b in 0..n {
                for a in 0..n {
                    data[a + m * (b + m * c)] =
                        Complex64::new((a * 7 + b * 3 + c) as f64 * 0.1, (a + 2 * b) as f64 * 0.05 - 0.2);
                }
            }
        }
        let expected = naive_dft(&data, m, -1.0);
        let fft = Fft3::new(n, m);
        let mut work = data.clone();
        fft.forward(&mut work, true);
        for (x, y) in work.iter().zip(&expected) {
            assert!((x - y).norm() < 1e-10);
        }
        fft.inverse(&mut work, true);
        let scale = (m * m * m) as f64;
        for c in 0..n {
            for b in 0..n {
                for a in 0..n {
                    let idx = a + m * (b + m * c);
                    assert!((work[idx] / scale - data[idx]).norm() < 1e-12);
                }
            }
        }
    }
}
