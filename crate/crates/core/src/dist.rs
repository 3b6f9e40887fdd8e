//! Densities sampled on a velocity grid: Maxwellians, Gaussian mixtures,
//! normalization and seeded random corpora.

use std::sync::Arc;

use nalgebra::{Matrix3, Matrix5, Vector3, Vector5};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{VectorField, VelocityGrid};

/// Floor applied inside logarithms and scores; never added to the density.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// One weighted Gaussian component with full covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: [f64; 3],
    pub covariance: [[f64; 3]; 3],
}

impl GaussianComponent {
    pub fn isotropic(weight: f64, mean: [f64; 3], temperature: f64) -> Self {
        Self::diagonal(weight, mean, [temperature; 3])
    }

    pub fn diagonal(weight: f64, mean: [f64; 3], temperatures: [f64; 3]) -> Self {
        let mut covariance = [[0.0; 3]; 3];
        for a in 0..3 {
            covariance[a][a] = temperatures[a];
        }
        Self {
            weight,
            mean,
            covariance,
        }
    }

    fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.covariance[i][j])
    }
}

/// Analytic Gaussian mixture that a sampled distribution came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub components: Vec<GaussianComponent>,
}

struct PreparedComponent {
    coef: f64,
    mean: Vector3<f64>,
    precision: Matrix3<f64>,
}

impl GaussianMixture {
    fn prepare(&self) -> Result<Vec<PreparedComponent>> {
        if self.components.is_empty() {
            return Err(LabError::InvalidConfig("mixture has no components".into()));
        }
        self.components
            .iter()
            .map(|c| {
                if !(c.weight >= 0.0) || !c.weight.is_finite() {
                    return Err(LabError::InvalidConfig(format!(
                        "component weight must be nonnegative, got {}",
                        c.weight
                    )));
                }
                let cov = c.matrix();
                let sym = (cov - cov.transpose()).abs().max();
                let eig = cov.symmetric_eigen();
                if sym > 1e-12 || eig.eigenvalues.iter().any(|&e| !(e > 0.0)) {
                    return Err(LabError::InvalidConfig(
                        "component covariance must be symmetric positive definite".into(),
                    ));
                }
                let det = cov.determinant();
                let precision = cov
                    .try_inverse()
                    .ok_or_else(|| LabError::InvalidConfig("singular component covariance".into()))?;
                Ok(PreparedComponent {
                    coef: c.weight * (2.0 * std::f64::consts::PI).powf(-1.5) / det.sqrt(),
                    mean: Vector3::from(c.mean),
                    precision,
                })
            })
            .collect()
    }

    /// Sample the mixture density at every grid node.
    pub fn sample(&self, grid: &VelocityGrid) -> Result<Vec<f64>> {
        let prepared = self.prepare()?;
        Ok(grid.sample(|v| {
            let v = Vector3::from(v);
            prepared
                .iter()
                .map(|p| {
                    let d = v - p.mean;
                    p.coef * (-0.5 * d.dot(&(p.precision * d))).exp()
                })
                .sum()
        }))
    }

    /// Mixture of `g(v) = f(sqrt(T) v + u) * T^{3/2} / rho`, again Gaussian.
    fn rescaled(&self, rho: f64, mean: [f64; 3], temperature: f64) -> Self {
        let st = temperature.sqrt();
        let components = self
            .components
            .iter()
            .map(|c| {
                let mut covariance = c.covariance;
                for row in covariance.iter_mut() {
                    for x in row.iter_mut() {
                        *x /= temperature;
                    }
                }
                GaussianComponent {
                    weight: c.weight / rho,
                    mean: [0, 1, 2].map(|a| (c.mean[a] - mean[a]) / st),
                    covariance,
                }
            })
            .collect();
        Self { components }
    }
}

/// Nonnegative density on a grid with its cached score field.
///
/// The score is the discrete gradient of `log max(f, floor)`, so it equals
/// `grad f / f` wherever `f` is smooth and positive.
#[derive(Debug, Clone)]
pub struct GridDistribution {
    grid: Arc<VelocityGrid>,
    values: Vec<f64>,
    score: VectorField,
    source: Option<GaussianMixture>,
}

/// Mass, mean velocity and temperature of a density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hydrodynamics {
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
}

impl Hydrodynamics {
    pub fn mean_velocity(&self) -> [f64; 3] {
        self.momentum.map(|m| m / self.mass)
    }

    /// `(E - |p|^2 / rho) / (3 rho)`.
    pub fn temperature(&self) -> f64 {
        let p2: f64 = self.momentum.iter().map(|m| m * m).sum();
        (self.energy - p2 / self.mass) / (3.0 * self.mass)
    }
}

impl GridDistribution {
    /// Wrap sampled values; rejects negative or non-finite entries.
    pub fn from_values(grid: Arc<VelocityGrid>, values: Vec<f64>) -> Result<Self> {
        assert_eq!(values.len(), grid.len(), "field length does not match grid");
        for (node, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(LabError::NonFinite { node, value });
            }
            if value < 0.0 {
                return Err(LabError::Degenerate(format!(
                    "density is negative ({value:e}) at node {node}"
                )));
            }
        }
        let score = log_gradient(&grid, &values);
        Ok(Self {
            grid,
            values,
            score,
            source: None,
        })
    }

    pub fn from_mixture(grid: Arc<VelocityGrid>, mixture: GaussianMixture) -> Result<Self> {
        let values = mixture.sample(&grid)?;
        let mut f = Self::from_values(grid, values)?;
        f.source = Some(mixture);
        Ok(f)
    }

    #[inline]
    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    #[inline]
    pub fn grid_arc(&self) -> &Arc<VelocityGrid> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn score(&self) -> &[[f64; 3]] {
        &self.score
    }

    /// Analytic mixture the values were sampled from, if any.
    pub fn source(&self) -> Option<&GaussianMixture> {
        self.source.as_ref()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `c * f`, keeping the analytic source in sync.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let values = self.values.iter().map(|x| c * x).collect();
        let mut out = Self::from_values(self.grid.clone(), values)?;
        out.source = self.source.as_ref().map(|m| GaussianMixture {
            components: m
                .components
                .iter()
                .map(|comp| GaussianComponent {
                    weight: comp.weight * c,
                    ..comp.clone()
                })
                .collect(),
        });
        Ok(out)
    }

    pub fn hydrodynamics(&self) -> Hydrodynamics {
        let g = &self.grid;
        let f = &self.values;
        Hydrodynamics {
            mass: g.integrate_with(|k, _| f[k]),
            momentum: [0, 1, 2].map(|a| g.integrate_with(|k, v| f[k] * v[a])),
            energy: g.integrate_with(|k, v| f[k] * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])),
        }
    }

    /// Piecewise tricubic interpolation; zero outside the grid box.
    pub fn interpolate(&self, x: [f64; 3]) -> f64 {
        let g = &*self.grid;
        let n = g.points_per_axis();
        let mut base = [0usize; 3];
        let mut stencil = [[0.0; 4]; 3];
        for a in 0..3 {
            let t = (x[a] + g.half_extent()) / g.spacing();
            if !(t >= -1e-12 && t <= (n - 1) as f64 + 1e-12) {
                return 0.0;
            }
            let cell = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
            let start = cell.saturating_sub(1).min(n - 4);
            let r = t - start as f64;
            base[a] = start;
            stencil[a] = lagrange4(r);
        }
        let mut acc = 0.0;
        for (c, wk) in stencil[2].iter().enumerate() {
            for (b, wj) in stencil[1].iter().enumerate() {
                for (a, wi) in stencil[0].iter().enumerate() {
                    let idx = g.index(base[0] + a, base[1] + b, base[2] + c);
                    acc += wi * wj * wk * self.values[idx];
                }
            }
        }
        acc.max(0.0)
    }
}

/// Cubic Lagrange weights on the nodes `0, 1, 2, 3` at position `r`.
fn lagrange4(r: f64) -> [f64; 4] {
    [
        -(r - 1.0) * (r - 2.0) * (r - 3.0) / 6.0,
        r * (r - 2.0) * (r - 3.0) / 2.0,
        -r * (r - 1.0) * (r - 3.0) / 2.0,
        r * (r - 1.0) * (r - 2.0) / 6.0,
    ]
}

pub(crate) fn log_gradient(grid: &VelocityGrid, values: &[f64]) -> VectorField {
    let logs: Vec<f64> = values.iter().map(|&x| x.max(DENSITY_FLOOR).ln()).collect();
    grid.gradient_unchecked(&logs)
}

/// Maxwellian `rho (2 pi T)^{-3/2} exp(-|v - u|^2 / (2T))` on the grid.
pub fn maxwellian(grid: Arc<VelocityGrid>, density: f64, mean: [f64; 3], temperature: f64) -> Result<GridDistribution> {
    if !(temperature > 0.0) {
        return Err(LabError::InvalidConfig(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if !(density >= 0.0) {
        return Err(LabError::InvalidConfig(format!(
            "density must be nonnegative, got {density}"
        )));
    }
    GridDistribution::from_mixture(
        grid,
        GaussianMixture {
            components: vec![GaussianComponent::isotropic(density, mean, temperature)],
        },
    )
}

/// Reduced Maxwellian with unit density, zero mean and unit temperature.
pub fn standard_maxwellian(grid: Arc<VelocityGrid>) -> GridDistribution {
    maxwellian(grid, 1.0, [0.0; 3], 1.0).expect("unit Maxwellian is valid")
}

/// Centred Gaussian with per-axis temperatures, rescaled to unit discrete mass.
pub fn anisotropic_gaussian(grid: Arc<VelocityGrid>, temperatures: [f64; 3]) -> Result<GridDistribution> {
    rotated_anisotropic_gaussian(grid, temperatures, Matrix3::identity())
}

/// Centred Gaussian with covariance `R diag(T) R^T`, unit discrete mass.
pub fn rotated_anisotropic_gaussian(
    grid: Arc<VelocityGrid>,
    temperatures: [f64; 3],
    rotation: Matrix3<f64>,
) -> Result<GridDistribution> {
    if temperatures.iter().any(|&t| !(t > 0.0)) {
        return Err(LabError::InvalidConfig(format!(
            "temperatures must be positive, got {temperatures:?}"
        )));
    }
    let cov = rotation * Matrix3::from_diagonal(&Vector3::from(temperatures)) * rotation.transpose();
    let cov = 0.5 * (cov + cov.transpose());
    let component = GaussianComponent {
        weight: 1.0,
        mean: [0.0; 3],
        covariance: [0, 1, 2].map(|i| [0, 1, 2].map(|j| cov[(i, j)])),
    };
    let f = GridDistribution::from_mixture(
        grid,
        GaussianMixture {
            components: vec![component],
        },
    )?;
    let mass = f.hydrodynamics().mass;
    f.scaled(1.0 / mass)
}

/// Weighted sum of Maxwellians, one per `(weight, mean, temperature)`.
pub fn gaussian_mixture(grid: Arc<VelocityGrid>, components: &[(f64, [f64; 3], f64)]) -> Result<GridDistribution> {
    if components.is_empty() {
        return Err(LabError::InvalidConfig("mixture has no components".into()));
    }
    for &(w, _, t) in components {
        if !(w > 0.0) || !(t > 0.0) {
            return Err(LabError::InvalidConfig(format!(
                "mixture weights and temperatures must be positive, got ({w}, {t})"
            )));
        }
    }
    GridDistribution::from_mixture(
        grid,
        GaussianMixture {
            components: components
                .iter()
                .map(|&(w, u, t)| GaussianComponent::isotropic(w, u, t))
                .collect(),
        },
    )
}

/// Symmetric two-beam distribution centred at `+-drift e_1` with the
/// temperature chosen so that the energy equals 3. Requires `|drift| < sqrt(3)`.
pub fn bi_maxwellian(grid: Arc<VelocityGrid>, drift: f64) -> Result<GridDistribution> {
    let temperature = 1.0 - drift * drift / 3.0;
    if !(temperature > 0.0) {
        return Err(LabError::InvalidConfig(format!(
            "drift {drift} leaves no thermal energy"
        )));
    }
    gaussian_mixture(
        grid,
        &[
            (0.5, [drift, 0.0, 0.0], temperature),
            (0.5, [-drift, 0.0, 0.0], temperature),
        ],
    )
}

/// Collision invariants `1, v_1, v_2, v_3, |v|^2`.
#[inline]
pub fn collision_invariants(v: [f64; 3]) -> [f64; 5] {
    [1.0, v[0], v[1], v[2], v[0] * v[0] + v[1] * v[1] + v[2] * v[2]]
}

/// Moments of `values` against the five collision invariants.
pub fn invariant_moments(grid: &VelocityGrid, values: &[f64]) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (a, o) in out.iter_mut().enumerate() {
        *o = grid.integrate_with(|k, v| values[k] * collision_invariants(v)[a]);
    }
    out
}

/// Multiply `values` by `1 + sum_a lambda_a phi_a(v)` with `lambda` chosen so
/// the five invariant moments hit `target` exactly (up to roundoff).
pub fn match_invariants(grid: &VelocityGrid, values: &mut [f64], target: [f64; 5]) -> Result<()> {
    let current = invariant_moments(grid, values);
    let mut gram = Matrix5::<f64>::zeros();
    for a in 0..5 {
        for b in a..5 {
            let m = grid.integrate_with(|k, v| {
                let phi = collision_invariants(v);
                values[k] * phi[a] * phi[b]
            });
            gram[(a, b)] = m;
            gram[(b, a)] = m;
        }
    }
    let rhs = Vector5::from_fn(|a, _| target[a] - current[a]);
    let lambda = gram
        .cholesky()
        .ok_or_else(|| LabError::Degenerate("moment system is singular".into()))?
        .solve(&rhs);
    for (k, x) in values.iter_mut().enumerate() {
        let phi = collision_invariants(grid.node(k));
        let factor = 1.0 + (0..5).map(|a| lambda[a] * phi[a]).sum::<f64>();
        if factor < 0.0 && *x > 0.0 {
            return Err(LabError::Degenerate(format!(
                "moment correction would make node {k} negative"
            )));
        }
        *x *= factor;
    }
    Ok(())
}

/// Moments `(1, 0, 0, 0, 3)` of a normalized density.
pub const NORMALIZED_MOMENTS: [f64; 5] = [1.0, 0.0, 0.0, 0.0, 3.0];

/// Rescale to unit mass, zero momentum and unit temperature.
///
/// The affine change of variables `g(v) = rho^{-1} T^{3/2} f(T^{1/2} v + u)` is
/// applied analytically when the density carries a Gaussian-mixture source
/// and by tricubic resampling otherwise; a final correction in the span of
/// the collision invariants removes the remaining quadrature defect.
pub fn normalize(f: &GridDistribution) -> Result<GridDistribution> {
    let hydro = f.hydrodynamics();
    if !(hydro.mass > 0.0) {
        return Err(LabError::Degenerate(format!(
            "cannot normalize a density with mass {}",
            hydro.mass
        )));
    }
    let temperature = hydro.temperature();
    if !(temperature > 0.0) {
        return Err(LabError::Degenerate(format!(
            "cannot normalize a density with temperature {temperature}"
        )));
    }
    let mean = hydro.mean_velocity();
    let grid = f.grid_arc().clone();
    let (mut values, source) = match f.source() {
        Some(mixture) => {
            let m = mixture.rescaled(hydro.mass, mean, temperature);
            (m.sample(&grid)?, Some(m))
        }
        None => {
            let st = temperature.sqrt();
            let scale = temperature.powf(1.5) / hydro.mass;
            let values = grid.sample(|v| {
                let x = [0, 1, 2].map(|a| st * v[a] + mean[a]);
                scale * f.interpolate(x)
            });
            (values, None)
        }
    };
    match_invariants(&grid, &mut values, NORMALIZED_MOMENTS)?;
    let mut out = GridDistribution::from_values(grid, values)?;
    out.source = source;
    Ok(out)
}

/// Seeded collection of normalized Gaussian mixtures with bounded entropy.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub seed: u64,
    pub entropy_bound: f64,
    pub members: Vec<GridDistribution>,
    pub rejected: usize,
    pub attempts: usize,
}

/// Draw `count` normalized mixtures of 1 to 4 Gaussians with `H(f) <= entropy_bound`.
///
/// Weights are uniform on `[0.2, 1]` before normalization, means uniform in
/// `[-1, 1]^3` and per-axis temperatures uniform on `[0.5, 1.5]`.
pub fn random_corpus(grid: Arc<VelocityGrid>, seed: u64, count: usize, entropy_bound: f64) -> Result<Corpus> {
    if count == 0 {
        return Err(LabError::InvalidConfig("corpus count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = 100 * count;
    let mut members = Vec::with_capacity(count);
    let mut rejected = 0;
    let mut attempts = 0;
    while members.len() < count && attempts < max_attempts {
        attempts += 1;
        let mixture = random_mixture(&mut rng);
        let raw = GridDistribution::from_mixture(grid.clone(), mixture)?;
        let f = normalize(&raw)?;
        if crate::functionals::entropy(&f) <= entropy_bound {
            members.push(f);
        } else {
            rejected += 1;
        }
    }
    if members.len() < count {
        return Err(LabError::CorpusExhausted {
            requested: count,
            admitted: members.len(),
            attempts,
        });
    }
    Ok(Corpus {
        seed,
        entropy_bound,
        members,
        rejected,
        attempts,
    })
}

fn random_mixture(rng: &mut ChaCha8Rng) -> GaussianMixture {
    let n = rng.gen_range(1..=4usize);
    let mut components: Vec<GaussianComponent> = (0..n)
        .map(|_| {
            let weight = rng.gen_range(0.2..1.0);
            let mean = [(); 3].map(|_| rng.gen_range(-1.0..1.0));
            let temps = [(); 3].map(|_| rng.gen_range(0.5..1.5));
            GaussianComponent::diagonal(weight, mean, temps)
        })
        .collect();
    let total: f64 = components.iter().map(|c| c.weight).sum();
    for c in components.iter_mut() {
        c.weight /= total;
    }
    GaussianMixture { components }
}
