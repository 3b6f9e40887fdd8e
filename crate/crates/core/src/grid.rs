//! Truncated uniform velocity lattice on `[-L, L]^3` with tensor-product
//! quadrature and second-order finite differences.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::sum::pairwise_sum;

/// A vector field sampled on the nodes of a [`VelocityGrid`].
pub type VectorField = Vec<[f64; 3]>;

/// Uniform `N x N x N` lattice with spacing `h = 2L / (N - 1)`.
///
/// Nodes are stored with the first velocity component varying fastest:
/// `index = i + N * (j + N * k)` for node `(-L + i h, -L + j h, -L + k h)`.
///
/// Interior nodes carry the weight `h^3`; each face coordinate halves it, so
/// the weights sum to `(2L)^3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    half_extent: f64,
    points_per_axis: usize,
    spacing: f64,
    axis: Vec<f64>,
    axis_weights: Vec<f64>,
}

impl VelocityGrid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(half_extent: f64, points_per_axis: usize) -> Result<Self> {
        if points_per_axis < Self::MIN_POINTS {
            return Err(LabError::InvalidConfig(format!(
                "grid needs at least {} points per axis, got {points_per_axis}",
                Self::MIN_POINTS
            )));
        }
        if !(half_extent > 0.0) || !half_extent.is_finite() {
            return Err(LabError::InvalidConfig(format!(
                "grid half extent must be positive and finite, got {half_extent}"
            )));
        }
        let spacing = 2.0 * half_extent / (points_per_axis - 1) as f64;
        let axis = (0..points_per_axis)
            .map(|k| -half_extent + k as f64 * spacing)
            .collect();
        let axis_weights = (0..points_per_axis)
            .map(|k| {
                if k == 0 || k == points_per_axis - 1 {
                    0.5 * spacing
                } else {
                    spacing
                }
            })
            .collect();
        Ok(Self {
            half_extent,
            points_per_axis,
            spacing,
            axis,
            axis_weights,
        })
    }

    #[inline]
    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    #[inline]
    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Coordinates of the nodes along one axis.
    #[inline]
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    /// Total number of nodes, `N^3`.
    #[inline]
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(3)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume `h^3` of an interior cell.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    /// Quadrature weight of node `idx`.
    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        let [i, j, k] = self.coords(idx);
        self.axis_weights[i] * self.axis_weights[j] * self.axis_weights[k]
    }

    /// All quadrature weights in storage order.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|idx| self.weight(idx)).collect()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.points_per_axis;
        i + n * (j + n * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    #[inline]
    pub fn node(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.coords(idx);
        [self.axis[i], self.axis[j], self.axis[k]]
    }

    /// All node positions in storage order.
    pub fn nodes(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|idx| self.node(idx)).collect()
    }

    /// Sample a function at every node.
    pub fn sample<F: Fn([f64; 3]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|idx| f(self.node(idx))).collect()
    }

    /// `sum_k w_k values_k`, rejecting non-finite input.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values.len());
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(LabError::NonFinite { node, value });
        }
        Ok(self.integrate_with(|idx, _| values[idx]))
    }

    /// Quadrature of `g(v_k, k)` over all nodes, for internally generated integrands.
    pub fn integrate_with<F: Fn(usize, [f64; 3]) -> f64>(&self, g: F) -> f64 {
        let terms: Vec<f64> = (0..self.len())
            .map(|idx| self.weight(idx) * g(idx, self.node(idx)))
            .collect();
        pairwise_sum(&terms)
    }

    /// Second-order finite-difference gradient: centred in the interior,
    /// one-sided three-point stencils on the faces. Exact on quadratics.
    pub fn gradient(&self, values: &[f64]) -> Result<VectorField> {
        self.check_len(values.len());
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(LabError::NonFinite { node, value });
        }
        Ok(self.gradient_unchecked(values))
    }

    pub(crate) fn gradient_unchecked(&self, values: &[f64]) -> VectorField {
        let n = self.points_per_axis;
        let inv2h = 0.5 / self.spacing;
        let strides = [1, n, n * n];
        let mut out = vec![[0.0; 3]; self.len()];
        for (idx, g) in out.iter_mut().enumerate() {
            let c = self.coords(idx);
            for axis in 0..3 {
                let s = strides[axis];
                let d = if c[axis] == 0 {
                    -3.0 * values[idx] + 4.0 * values[idx + s] - values[idx + 2 * s]
                } else if c[axis] == n - 1 {
                    3.0 * values[idx] - 4.0 * values[idx - s] + values[idx - 2 * s]
                } else {
                    values[idx + s] - values[idx - s]
                };
                g[axis] = d * inv2h;
            }
        }
        out
    }

    /// Negative adjoint of [`gradient`](Self::gradient) in the quadrature inner
    /// product: `sum_k w_k phi_k div_k = -sum_k w_k grad(phi)_k . flux_k` for
    /// every scalar field `phi`. This is the discrete divergence used by the
    /// collision operator.
    pub fn divergence(&self, flux: &[[f64; 3]]) -> Vec<f64> {
        self.check_len(flux.len());
        let n = self.points_per_axis;
        let inv2h = 0.5 / self.spacing;
        let strides = [1, n, n * n];
        let mut out = vec![0.0; self.len()];
        for (idx, fl) in flux.iter().enumerate() {
            let c = self.coords(idx);
            let w = self.weight(idx);
            for axis in 0..3 {
                let s = strides[axis];
                let q = w * fl[axis] * inv2h;
                // scatter row `idx` of the gradient stencil, transposed, with a minus sign
                if c[axis] == 0 {
                    out[idx] += 3.0 * q;
                    out[idx + s] -= 4.0 * q;
                    out[idx + 2 * s] += q;
                } else if c[axis] == n - 1 {
                    out[idx] -= 3.0 * q;
                    out[idx - s] += 4.0 * q;
                    out[idx - 2 * s] -= q;
                } else {
                    out[idx + s] -= q;
                    out[idx - s] += q;
                }
            }
        }
        for (idx, o) in out.iter_mut().enumerate() {
            *o /= self.weight(idx);
        }
        out
    }

    #[inline]
    fn check_len(&self, len: usize) {
        assert_eq!(len, self.len(), "field length does not match grid");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_arithmetic() {
        let g = VelocityGrid::new(8.0, 9).unwrap();
        assert_eq!(g.spacing(), 2.0);
        let g = VelocityGrid::new(8.0, 64).unwrap();
        assert!((g.spacing() - 16.0 / 63.0).abs() < 1e-15);
        assert_eq!(g.axis()[0], -8.0);
        assert!((g.axis()[63] - 8.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(matches!(VelocityGrid::new(8.0, 4), Err(LabError::InvalidConfig(_))));
        assert!(VelocityGrid::new(0.0, 16).is_err());
        assert!(VelocityGrid::new(-1.0, 16).is_err());
        assert!(VelocityGrid::new(f64::NAN, 16).is_err());
    }

    #[test]
    fn constant_integrates_to_box_volume() {
        for &(l, n) in &[(8.0, 9usize), (3.0, 17), (8.0, 32)] {
            let g = VelocityGrid::new(l, n).unwrap();
            let ones = vec![1.0; g.len()];
            let total = g.integrate(&ones).unwrap();
            let volume = (2.0 * l).powi(3);
            assert!((total - volume).abs() / volume < 1e-12);
        }
    }

    #[test]
    fn non_finite_input_names_the_node() {
        let g = VelocityGrid::new(4.0, 8).unwrap();
        let mut v = vec![0.0; g.len()];
        v[17] = f64::NAN;
        match g.integrate(&v) {
            Err(LabError::NonFinite { node, .. }) => assert_eq!(node, 17),
            other => panic!("unexpected {other:?}"),
        }
        assert!(g.gradient(&v).is_err());
    }

    #[test]
    fn odd_field_integrates_to_zero() {
        let g = VelocityGrid::new(8.0, 33).unwrap();
        let v = g.sample(|x| x[0] * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        assert!(g.integrate(&v).unwrap().abs() < 1e-12);
    }

    #[test]
    fn gradient_exact_on_affine_and_quadratic() {
        let g = VelocityGrid::new(5.0, 12).unwrap();
        let lin = g.sample(|x| x[1]);
        for d in g.gradient(&lin).unwrap() {
            assert!((d[0]).abs() < 1e-12 && (d[1] - 1.0).abs() < 1e-12 && d[2].abs() < 1e-12);
        }
        let quad = g.sample(|x| 0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
        let grad = g.gradient(&quad).unwrap();
        for (idx, d) in grad.iter().enumerate() {
            let v = g.node(idx);
            for a in 0..3 {
                assert!((d[a] - v[a]).abs() < 1e-12);
            }
        }
        let constant = vec![2.5; g.len()];
        assert!(g
            .gradient(&constant)
            .unwrap()
            .iter()
            .all(|d| d.iter().all(|x| x.abs() < 1e-13)));
    }

    #[test]
    fn divergence_is_negative_adjoint_of_gradient() {
        let g = VelocityGrid::new(3.0, 9).unwrap();
        let phi = g.sample(|x| (x[0] * 0.3).sin() + x[1] * x[2] * x[2] - x[0].powi(3));
        let flux: VectorField = g
            .nodes()
            .iter()
            .map(|x| [x[1].cos(), x[0] * x[2], (x[2] * 0.7).exp()])
            .collect();
        let grad = g.gradient(&phi).unwrap();
        let div = g.divergence(&flux);
        let w = g.weights();
        let lhs: f64 = (0..g.len()).map(|k| w[k] * phi[k] * div[k]).sum();
        let rhs: f64 = -(0..g.len())
            .map(|k| {
                let (a, b) = (grad[k], flux[k]);
                w[k] * (a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
            })
            .sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0));
    }
}
