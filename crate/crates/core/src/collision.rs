//! Conservative pairwise Landau operator evaluated by zero-padded FFT
//! convolution.
//!
//! With `W = w f` and score `s`, the flux at node `k` is
//! `F_k = f_k sum_{l != k} W_l a(v_k - v_l)(s_k - s_l)
//!      = f_k [ (a * W)_k s_k - (a * (W s))_k ]`,
//! and the operator is `Q = div F` with the divergence adjoint to the grid
//! gradient. Hence `sum_k w_k Q_k phi_k = -sum_k w_k F_k . grad(phi)_k`,
//! which vanishes for the collision invariants and equals `-D(f)` for
//! `phi = log f`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::dist::GridDistribution;
use crate::error::Result;
use crate::fft3::Fft3;
use crate::grid::{VectorField, VelocityGrid};
use crate::kernel::{diffusion_matrix, flux_direct, validate_exponent, PairData};
use crate::sum::pairwise_sum;

/// Upper-triangle component order of the symmetric diffusion matrix.
const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

#[inline]
fn pair_slot(a: usize, b: usize) -> usize {
    let (i, j) = if a <= b { (a, b) } else { (b, a) };
    PAIRS.iter().position(|&p| p == (i, j)).unwrap()
}

/// Result of one operator evaluation.
#[derive(Debug, Clone)]
pub struct CollisionEvaluation {
    pub flux: VectorField,
    pub rate: Vec<f64>,
    /// `sum_k w_k F_k . s_k`, the entropy dissipation.
    pub dissipation: f64,
}

/// Landau operator on a fixed grid and interaction exponent.
pub struct CollisionOperator {
    grid: Arc<VelocityGrid>,
    gamma: f64,
    fft: Fft3,
    spectra: [Vec<f64>; 6],
}

impl std::fmt::Debug for CollisionOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CollisionOperator")
            .field("points_per_axis", &self.grid.points_per_axis())
            .field("gamma", &self.gamma)
            .finish()
    }
}

impl CollisionOperator {
    pub fn new(grid: Arc<VelocityGrid>, gamma: f64) -> Result<Self> {
        validate_exponent(gamma)?;
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
        let mut spectra: [Vec<f64>; 6] = Default::default();
        for (slot, &(a, b)) in PAIRS.iter().enumerate() {
            let mut buf = vec![Complex64::default(); fft.len()];
            for r in 0..m {
                for q in 0..m {
                    for p in 0..m {
                        let (Some(x), Some(y), Some(z)) = (offset(p), offset(q), offset(r)) else {
                            continue;
                        };
                        if p == 0 && q == 0 && r == 0 {
                            continue;
                        }
                        let mat = diffusion_matrix([x * h, y * h, z * h], gamma);
                        buf[p + m * (q + m * r)] = Complex64::new(mat[a][b], 0.0);
                    }
                }
            }
            fft.forward(&mut buf, false);
            spectra[slot] = buf.iter().map(|c| c.re).collect();
        }
        Ok(Self {
            grid,
            gamma,
            fft,
            spectra,
        })
    }

    pub fn grid(&self) -> &Arc<VelocityGrid> {
        &self.grid
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Pairwise flux `F_k` for a density with its score.
    pub fn flux_of(&self, values: &[f64], score: &[[f64; 3]]) -> VectorField {
        let g = &*self.grid;
        let m = self.fft.size();
        let len = self.fft.len();
        let embed = |k: usize| {
            let [a, b, c] = g.coords(k);
            a + m * (b + m * c)
        };
        let mut p1 = vec![Complex64::default(); len];
        let mut p2 = vec![Complex64::default(); len];
        for k in 0..g.len() {
            let wf = g.weight(k) * values[k];
            let s = score[k];
            let e = embed(k);
            p1[e] = Complex64::new(wf, wf * s[0]);
            p2[e] = Complex64::new(wf * s[1], wf * s[2]);
        }
        self.fft.forward(&mut p1, true);
        self.fft.forward(&mut p2, true);

        let mut outs: Vec<Vec<Complex64>> = (0..5).map(|_| vec![Complex64::default(); len]).collect();
        let half = Complex64::new(0.5, 0.0);
        let neg_half_i = Complex64::new(0.0, -0.5);
        let i_unit = Complex64::new(0.0, 1.0);
        for r in 0..m {
            let rr = (m - r) % m;
            for q in 0..m {
                let qq = (m - q) % m;
                for p in 0..m {
                    let pp = (m - p) % m;
                    let idx = p + m * (q + m * r);
                    let mirror = pp + m * (qq + m * rr);
                    let (x1, y1) = (p1[idx], p1[mirror].conj());
                    let (x2, y2) = (p2[idx], p2[mirror].conj());
                    let g0 = (x1 + y1) * half;
                    let gs = [(x1 - y1) * neg_half_i, (x2 + y2) * half, (x2 - y2) * neg_half_i];
                    let kern = [0, 1, 2, 3, 4, 5].map(|s| self.spectra[s][idx]);
                    let c = kern.map(|kv| g0 * kv);
                    let u = [0, 1, 2]
                        .map(|a| (0..3).fold(Complex64::default(), |acc, b| acc + gs[b] * kern[pair_slot(a, b)]));
                    outs[0][idx] = c[0] + i_unit * c[1];
                    outs[1][idx] = c[2] + i_unit * c[3];
                    outs[2][idx] = c[4] + i_unit * c[5];
                    outs[3][idx] = u[0] + i_unit * u[1];
                    outs[4][idx] = u[2];
                }
            }
        }
        drop(p1);
        drop(p2);
        for out in outs.iter_mut() {
            self.fft.inverse(out, true);
        }
        let scale = 1.0 / len as f64;
        (0..g.len())
            .map(|k| {
                let e = embed(k);
                let conv = [
                    outs[0][e].re,
                    outs[0][e].im,
                    outs[1][e].re,
                    outs[1][e].im,
                    outs[2][e].re,
                    outs[2][e].im,
                ];
                let u = [outs[3][e].re, outs[3][e].im, outs[4][e].re];
                let s = score[k];
                [0, 1, 2].map(|a| {
                    let cs: f64 = (0..3).map(|b| conv[pair_slot(a, b)] * s[b]).sum();
                    values[k] * (cs - u[a]) * scale
                })
            })
            .collect()
    }

    /// Flux, rate `Q(f)` and dissipation in one pass.
    pub fn evaluate(&self, f: &GridDistribution) -> CollisionEvaluation {
        self.evaluate_values(f.values(), f.score())
    }

    pub fn evaluate_values(&self, values: &[f64], score: &[[f64; 3]]) -> CollisionEvaluation {
        let flux = self.flux_of(values, score);
        let rate = self.grid.divergence(&flux);
        let dissipation = flux_dissipation(&self.grid, &flux, score);
        CollisionEvaluation {
            flux,
            rate,
            dissipation,
        }
    }

    /// `Q(f)` at every node.
    pub fn apply(&self, f: &GridDistribution) -> Vec<f64> {
        self.evaluate(f).rate
    }

    /// Entropy dissipation through the convolution route.
    pub fn dissipation(&self, f: &GridDistribution) -> f64 {
        self.evaluate(f).dissipation
    }
}

fn flux_dissipation(grid: &VelocityGrid, flux: &[[f64; 3]], score: &[[f64; 3]]) -> f64 {
    let terms: Vec<f64> = flux
        .iter()
        .zip(score)
        .enumerate()
        .map(|(k, (fl, s))| grid.weight(k) * (fl[0] * s[0] + fl[1] * s[1] + fl[2] * s[2]))
        .collect();
    pairwise_sum(&terms)
}

/// `Q(f)` by direct `O(M^2)` summation of the same pairwise flux; a reference
/// for the convolution route on small grids.
pub fn collision_operator_direct(f: &GridDistribution, gamma: f64) -> Result<Vec<f64>> {
    validate_exponent(gamma)?;
    let data = PairData::new(f.grid(), f.values(), f.score());
    let flux = flux_direct(&data, f.values(), gamma);
    Ok(f.grid().divergence(&flux))
}

/// `sum_k w_k Q(f)_k phi(v_k)` through the second weak form,
/// `1/2 sum a_ij (d_ij phi(v) + d_ij phi(w)) f f + sum b_i (d_i phi(v) - d_i phi(w)) f f`,
/// with analytic derivatives of the test function. Pairs `k = l` are excluded.
pub fn weak_form_drift_diffusion<G, H>(f: &GridDistribution, gamma: f64, grad_phi: G, hess_phi: H) -> Result<f64>
where
    G: Fn([f64; 3]) -> [f64; 3] + Sync,
    H: Fn([f64; 3]) -> [[f64; 3]; 3] + Sync,
{
    validate_exponent(gamma)?;
    let grid = f.grid();
    let data = PairData::new(grid, f.values(), f.score());
    let grads: Vec<[f64; 3]> = data.nodes.iter().map(|&v| grad_phi(v)).collect();
    let hessians: Vec<[[f64; 3]; 3]> = data.nodes.iter().map(|&v| hess_phi(v)).collect();
    let (w, x) = (&data.weighted, &data.nodes);
    Ok(crate::kernel::sum_unordered_pairs(grid, |k, l, _| {
        let z = [x[k][0] - x[l][0], x[k][1] - x[l][1], x[k][2] - x[l][2]];
        let a = diffusion_matrix(z, gamma);
        let b = crate::kernel::drift_vector(z, gamma);
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += a[i][j] * (hessians[k][i][j] + hessians[l][i][j]);
            }
            acc += 2.0 * b[i] * (grads[k][i] - grads[l][i]);
        }
        // each unordered pair stands for both orderings
        w[k] * w[l] * acc
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{anisotropic_gaussian, bi_maxwellian, standard_maxwellian};

    #[test]
    fn convolution_matches_direct_flux() {
        let g = Arc::new(VelocityGrid::new(5.0, 10).unwrap());
        let f = bi_maxwellian(g.clone(), 1.0).unwrap();
        for &gamma in &[-3.0, -1.0, 0.0] {
            let op = CollisionOperator::new(g.clone(), gamma).unwrap();
            let fast = op.apply(&f);
            let slow = collision_operator_direct(&f, gamma).unwrap();
            let scale = slow.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-11 * scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn maxwellian_is_annihilated() {
        let g = Arc::new(VelocityGrid::new(6.0, 12).unwrap());
        let op = CollisionOperator::new(g.clone(), -3.0).unwrap();
        let eval = op.evaluate(&standard_maxwellian(g));
        assert!(eval.rate.iter().all(|q| q.abs() < 1e-13));
        assert!(eval.dissipation.abs() < 1e-13);
    }

    #[test]
    fn dissipation_positive_off_equilibrium() {
        let g = Arc::new(VelocityGrid::new(6.0, 12).unwrap());
        let op = CollisionOperator::new(g.clone(), -3.0).unwrap();
        let f = anisotropic_gaussian(g, [1.5, 1.0, 0.5]).unwrap();
        assert!(op.dissipation(&f) > 0.0);
    }
}
