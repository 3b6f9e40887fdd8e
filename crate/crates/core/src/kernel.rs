//! Interaction kernel `a(z) = |z|^{gamma+2} Pi(z)` and the derived fields,
//! together with direct pairwise sums over grid nodes.

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::grid::VelocityGrid;
use crate::sum::pairwise_sum;

/// Check that an interaction exponent lies in `(-4, 0]`.
pub fn validate_exponent(gamma: f64) -> Result<()> {
    if gamma > -4.0 && gamma <= 0.0 {
        Ok(())
    } else {
        Err(LabError::InvalidConfig(format!(
            "interaction exponent must lie in (-4, 0], got {gamma}"
        )))
    }
}

#[inline]
fn norm2(z: [f64; 3]) -> f64 {
    z[0] * z[0] + z[1] * z[1] + z[2] * z[2]
}

/// Orthogonal projection onto the plane normal to `z`.
pub fn projection(z: [f64; 3]) -> [[f64; 3]; 3] {
    let r2 = norm2(z);
    let mut p = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            p[i][j] = delta - z[i] * z[j] / r2;
        }
    }
    p
}

/// Diffusion matrix `a(z) = |z|^{gamma+2} Pi(z)` for `z != 0`.
pub fn diffusion_matrix(z: [f64; 3], gamma: f64) -> [[f64; 3]; 3] {
    let scale = norm2(z).sqrt().powf(gamma + 2.0);
    projection(z).map(|row| row.map(|x| scale * x))
}

/// Drift `b_i(z) = sum_j d_j a_ij(z) = -2 z_i |z|^gamma`.
pub fn drift_vector(z: [f64; 3], gamma: f64) -> [f64; 3] {
    let scale = -2.0 * norm2(z).sqrt().powf(gamma);
    z.map(|x| scale * x)
}

/// Smooth part of `c(z) = sum_ij d_ij a_ij(z) = -2 (gamma + 3) |z|^gamma`;
/// at `gamma = -3` this vanishes and `c` is the point mass `-8 pi delta_0`.
pub fn divergence_scalar(z: [f64; 3], gamma: f64) -> f64 {
    -2.0 * (gamma + 3.0) * norm2(z).sqrt().powf(gamma)
}

/// `|z|^p` tabulated on the lattice offsets of a grid, indexed by the
/// absolute integer offsets `(|di|, |dj|, |dk|)`.
#[derive(Debug, Clone)]
pub struct OffsetTable {
    n: usize,
    values: Vec<f64>,
}

impl OffsetTable {
    pub fn new(grid: &VelocityGrid, power: f64) -> Self {
        Self::radial(grid, |r| r.powf(power))
    }

    /// Tabulate an arbitrary radial profile `phi(|z|)`; the zero offset holds 0.
    pub fn radial<F: Fn(f64) -> f64>(grid: &VelocityGrid, profile: F) -> Self {
        let n = grid.points_per_axis();
        let h = grid.spacing();
        let mut values = vec![0.0; n * n * n];
        for c in 0..n {
            for b in 0..n {
                for a in 0..n {
                    if a + b + c == 0 {
                        continue;
                    }
                    let r2 = ((a * a + b * b + c * c) as f64) * h * h;
                    values[a + n * (b + n * c)] = profile(r2.sqrt());
                }
            }
        }
        Self { n, values }
    }

    #[inline]
    pub fn get(&self, da: usize, db: usize, dc: usize) -> f64 {
        self.values[da + self.n * (db + self.n * dc)]
    }
}

/// Per-node data shared by the direct pairwise kernels: weighted density,
/// node positions and score.
pub(crate) struct PairData<'a> {
    pub grid: &'a VelocityGrid,
    pub weighted: Vec<f64>,
    pub nodes: Vec<[f64; 3]>,
    pub score: &'a [[f64; 3]],
}

impl<'a> PairData<'a> {
    pub fn new(grid: &'a VelocityGrid, values: &[f64], score: &'a [[f64; 3]]) -> Self {
        let weighted = values.iter().enumerate().map(|(k, f)| grid.weight(k) * f).collect();
        Self {
            grid,
            weighted,
            nodes: grid.nodes(),
            score,
        }
    }
}

/// `sum_{k<l} term(k, l, [|di|, |dj|, |dk|])` over unordered node pairs.
///
/// The outer index runs in parallel; each outer node accumulates its partial
/// sum sequentially and the partials are combined by a fixed pairwise tree,
/// so the result does not depend on the thread count.
pub fn sum_unordered_pairs<F>(grid: &VelocityGrid, term: F) -> f64
where
    F: Fn(usize, usize, [usize; 3]) -> f64 + Sync,
{
    let n = grid.points_per_axis();
    let partials: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let [ak, bk, ck] = grid.coords(k);
            let mut acc = 0.0;
            for c in ck..n {
                let dc = c.abs_diff(ck);
                let b0 = if c == ck { bk } else { 0 };
                for b in b0..n {
                    let db = b.abs_diff(bk);
                    let a0 = if c == ck && b == bk { ak + 1 } else { 0 };
                    let row = n * (b + n * c);
                    for a in a0..n {
                        acc += term(k, row + a, [a.abs_diff(ak), db, dc]);
                    }
                }
            }
            acc
        })
        .collect();
    pairwise_sum(&partials)
}

/// `sum_{k != l} term(k, l, offsets)` over ordered node pairs, deterministic
/// in the same sense as [`sum_unordered_pairs`].
pub fn sum_ordered_pairs<F>(grid: &VelocityGrid, term: F) -> f64
where
    F: Fn(usize, usize, [usize; 3]) -> f64 + Sync,
{
    let partials = per_node_pair_sums(grid, term);
    pairwise_sum(&partials)
}

/// For each `k`, `sum_{l != k} term(k, l, offsets)`.
pub fn per_node_pair_sums<F>(grid: &VelocityGrid, term: F) -> Vec<f64>
where
    F: Fn(usize, usize, [usize; 3]) -> f64 + Sync,
{
    let n = grid.points_per_axis();
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let [ak, bk, ck] = grid.coords(k);
            let mut acc = 0.0;
            for c in 0..n {
                let dc = c.abs_diff(ck);
                for b in 0..n {
                    let db = b.abs_diff(bk);
                    let row = n * (b + n * c);
                    for a in 0..n {
                        let l = row + a;
                        if l != k {
                            acc += term(k, l, [a.abs_diff(ak), db, dc]);
                        }
                    }
                }
            }
            acc
        })
        .collect()
}

#[inline]
fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `sum_{k<l} W_k W_l |z|^{gamma+2} <Pi(z) ds, ds>` with `W = w f`.
pub(crate) fn dissipation_projection_direct(data: &PairData<'_>, gamma: f64) -> f64 {
    let table = OffsetTable::new(data.grid, gamma);
    let (w, x, s) = (&data.weighted, &data.nodes, data.score);
    sum_unordered_pairs(data.grid, |k, l, [da, db, dc]| {
        let z = sub(x[k], x[l]);
        let ds = sub(s[k], s[l]);
        let r2 = dot(z, z);
        let zs = dot(z, ds);
        // |z|^{gamma+2} (|ds|^2 - (z.ds)^2/|z|^2) = |z|^gamma (|z|^2|ds|^2 - (z.ds)^2)
        w[k] * w[l] * table.get(da, db, dc) * (r2 * dot(ds, ds) - zs * zs)
    })
}

/// `sum_{k<l} W_k W_l |z|^gamma sum_{i<j} R_ij^2`, with `R_ij = z_i ds_j - z_j ds_i`.
pub(crate) fn dissipation_cross_direct(data: &PairData<'_>, gamma: f64) -> f64 {
    let table = OffsetTable::new(data.grid, gamma);
    let (w, x, s) = (&data.weighted, &data.nodes, data.score);
    sum_unordered_pairs(data.grid, |k, l, [da, db, dc]| {
        let z = sub(x[k], x[l]);
        let ds = sub(s[k], s[l]);
        let r01 = z[0] * ds[1] - z[1] * ds[0];
        let r02 = z[0] * ds[2] - z[2] * ds[0];
        let r12 = z[1] * ds[2] - z[2] * ds[1];
        w[k] * w[l] * table.get(da, db, dc) * (r01 * r01 + r02 * r02 + r12 * r12)
    })
}

/// Flux `F_k = f_k sum_{l != k} w_l f_l a(v_k - v_l)(s_k - s_l)` by direct summation.
pub(crate) fn flux_direct(data: &PairData<'_>, values: &[f64], gamma: f64) -> Vec<[f64; 3]> {
    let table = OffsetTable::new(data.grid, gamma);
    let (w, x, s) = (&data.weighted, &data.nodes, data.score);
    let component = |axis: usize| {
        per_node_pair_sums(data.grid, |k, l, [da, db, dc]| {
            let z = sub(x[k], x[l]);
            let ds = sub(s[k], s[l]);
            let r2 = dot(z, z);
            // |z|^{gamma+2} Pi(z) ds = |z|^gamma (|z|^2 ds - (z.ds) z)
            w[l] * table.get(da, db, dc) * (r2 * ds[axis] - dot(z, ds) * z[axis])
        })
    };
    let parts = [component(0), component(1), component(2)];
    (0..values.len())
        .map(|k| [0, 1, 2].map(|a| values[k] * parts[a][k]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_annihilates_direction() {
        let z = [0.3, -1.2, 2.0];
        let a = diffusion_matrix(z, -3.0);
        for row in a {
            assert!(dot(row, z).abs() < 1e-14);
        }
        let p = projection(z);
        let trace = p[0][0] + p[1][1] + p[2][2];
        assert!((trace - 2.0).abs() < 1e-14);
    }

    #[test]
    fn coulomb_drift_on_axis() {
        let b = drift_vector([1.0, 0.0, 0.0], -3.0);
        assert_eq!(b, [-2.0, 0.0, 0.0]);
        assert_eq!(divergence_scalar([0.5, 0.1, 0.0], -3.0), 0.0);
    }

    #[test]
    fn exponent_range() {
        assert!(validate_exponent(-3.0).is_ok());
        assert!(validate_exponent(0.0).is_ok());
        assert!(validate_exponent(-4.0).is_err());
        assert!(validate_exponent(0.5).is_err());
    }

    #[test]
    fn pair_iteration_counts() {
        let g = VelocityGrid::new(1.0, 8).unwrap();
        let m = g.len() as f64;
        let unordered = sum_unordered_pairs(&g, |_, _, _| 1.0);
        assert_eq!(unordered, m * (m - 1.0) / 2.0);
        let ordered = sum_ordered_pairs(&g, |_, _, _| 1.0);
        assert_eq!(ordered, m * (m - 1.0));
        let offsets_ok = sum_unordered_pairs(&g, |k, l, d| {
            let (ck, cl) = (g.coords(k), g.coords(l));
            let ok = (0..3).all(|a| ck[a].abs_diff(cl[a]) == d[a]) && l > k;
            if ok {
                0.0
            } else {
                1.0
            }
        });
        assert_eq!(offsets_ok, 0.0);
    }
}
