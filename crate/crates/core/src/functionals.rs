//! Scalar and tensor functionals of a gridded density: moments, entropies,
//! dissipation in projection and cross-product form, weighted Fisher
//! information, pressure tensor and concentration bounds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::collision::CollisionOperator;
use crate::dist::{GridDistribution, DENSITY_FLOOR};
use crate::error::{LabError, Result};
use crate::kernel::{dissipation_cross_direct, dissipation_projection_direct, validate_exponent, PairData};

/// Densities below this value contribute nothing to entropy-type integrands.
pub const ENTROPY_CUTOFF: f64 = 1e-30;

/// Largest exponent accepted before `exp` overflows.
const MAX_EXPONENT: f64 = 700.0;

/// Japanese bracket `<v> = (1 + |v|^2)^{1/2}`.
#[inline]
pub fn bracket(v: [f64; 3]) -> f64 {
    (1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
fn xlogx(x: f64) -> f64 {
    if x < ENTROPY_CUTOFF {
        0.0
    } else {
        x * x.ln()
    }
}

/// Log-density of the reduced Maxwellian.
#[inline]
pub fn log_standard_maxwellian(v: [f64; 3]) -> f64 {
    -0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) - 1.5 * (2.0 * PI).ln()
}

pub fn mass(f: &GridDistribution) -> f64 {
    integrate(f, |_, _| 1.0)
}

pub fn momentum(f: &GridDistribution) -> [f64; 3] {
    [0, 1, 2].map(|a| integrate(f, |_, v| v[a]))
}

/// `int f |v|^2`.
pub fn energy(f: &GridDistribution) -> f64 {
    integrate(f, |_, v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
}

/// `int f(v) g(k, v) dv`.
fn integrate<G: Fn(usize, [f64; 3]) -> f64>(f: &GridDistribution, g: G) -> f64 {
    let vals = f.values();
    f.grid().integrate_with(|k, v| vals[k] * g(k, v))
}

/// Polynomial moment `M_l = int <v>^l f`.
pub fn moment_poly(f: &GridDistribution, order: f64) -> f64 {
    integrate(f, |_, v| bracket(v).powf(order))
}

/// Stretched exponential moment `M_{s,kappa} = int exp(kappa <v>^s) f`.
pub fn moment_exp(f: &GridDistribution, s: f64, kappa: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(LabError::InvalidConfig(format!(
            "stretched moment needs s > 0, got {s}"
        )));
    }
    let l = f.grid().half_extent();
    let largest = kappa * (1.0 + 3.0 * l * l).sqrt().powf(s);
    if largest > MAX_EXPONENT {
        return Err(LabError::Overflow(format!(
            "exp({largest:.1}) overflows on this grid; reduce kappa or the grid half extent"
        )));
    }
    Ok(integrate(f, |_, v| (kappa * bracket(v).powf(s)).exp()))
}

/// Whether `(s, kappa)` lies in the range where stretched moments are known
/// to propagate: `kappa > 0` with `s < 2`, or `0 < kappa < 1/(2e)` at `s = 2`.
pub fn exp_moment_guaranteed(s: f64, kappa: f64) -> bool {
    if s < 2.0 {
        s > 0.0 && kappa > 0.0
    } else if s == 2.0 {
        kappa > 0.0 && kappa < 1.0 / (2.0 * std::f64::consts::E)
    } else {
        false
    }
}

/// Weighted Lebesgue norm `(int |f|^p (1 + |v|^2)^{pq/2})^{1/p}`.
pub fn lp_norm_weighted(f: &GridDistribution, p: f64, q: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(LabError::InvalidConfig(format!("norm exponent must be >= 1, got {p}")));
    }
    let vals = f.values();
    let total = f
        .grid()
        .integrate_with(|k, v| vals[k].abs().powf(p) * bracket(v).powf(p * q));
    Ok(total.powf(1.0 / p))
}

/// Boltzmann entropy `H(f) = int f log f`.
pub fn entropy(f: &GridDistribution) -> f64 {
    let vals = f.values();
    f.grid().integrate_with(|k, _| xlogx(vals[k]))
}

/// Relative entropy `H(f | mu) = int f log(f / mu)` to the reduced Maxwellian.
pub fn relative_entropy(f: &GridDistribution) -> f64 {
    let vals = f.values();
    f.grid().integrate_with(|k, v| {
        let x = vals[k];
        if x < ENTROPY_CUTOFF {
            0.0
        } else {
            x * (x.ln() - log_standard_maxwellian(v))
        }
    })
}

/// Relative entropy `int f log(f / g)` between two densities on one grid.
pub fn relative_entropy_between(f: &GridDistribution, g: &GridDistribution) -> f64 {
    let (a, b) = (f.values(), g.values());
    f.grid().integrate_with(|k, _| {
        if a[k] < ENTROPY_CUTOFF {
            0.0
        } else {
            a[k] * (a[k].ln() - b[k].max(DENSITY_FLOOR).ln())
        }
    })
}

/// Weighted relative Fisher information `I_alpha(f | mu) = int f |s + v|^2 <v>^alpha`.
pub fn fisher_weighted(f: &GridDistribution, alpha: f64) -> f64 {
    let score = f.score();
    integrate(f, |k, v| {
        let s = score[k];
        let d = [s[0] + v[0], s[1] + v[1], s[2] + v[2]];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) * bracket(v).powf(alpha)
    })
}

/// Pressure tensor `P_ij = int f v_i v_j`.
pub fn pressure_tensor(f: &GridDistribution) -> [[f64; 3]; 3] {
    let mut p = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let x = integrate(f, |_, v| v[i] * v[j]);
            p[i][j] = x;
            p[j][i] = x;
        }
    }
    p
}

/// `min_{i != j} (P_ii P_jj - P_ij^2)`.
pub fn delta_from_pressure(p: &[[f64; 3]; 3]) -> f64 {
    [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| p[i][i] * p[j][j] - p[i][j] * p[i][j])
        .fold(f64::INFINITY, f64::min)
}

pub fn delta_f(f: &GridDistribution) -> f64 {
    delta_from_pressure(&pressure_tensor(f))
}

/// Cross-product field `R_ij(v_k, v_l) = z_i ds_j - z_j ds_i` between two nodes.
pub fn rij_field(f: &GridDistribution, k: usize, l: usize, i: usize, j: usize) -> Result<f64> {
    if i == j || i > 2 || j > 2 {
        return Err(LabError::InvalidConfig(format!(
            "cross-product component needs distinct indices in 0..3, got ({i}, {j})"
        )));
    }
    let (vk, vl) = (f.grid().node(k), f.grid().node(l));
    let (sk, sl) = (f.score()[k], f.score()[l]);
    let z = [vk[0] - vl[0], vk[1] - vl[1], vk[2] - vl[2]];
    let ds = [sk[0] - sl[0], sk[1] - sl[1], sk[2] - sl[2]];
    Ok(z[i] * ds[j] - z[j] * ds[i])
}

/// `sup_{|A| <= q} int_A f`, exact on the grid: cells are filled in order of
/// decreasing density, the last one fractionally.
pub fn small_set_concentration(f: &GridDistribution, q: f64) -> f64 {
    let g = f.grid();
    let vals = f.values();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let mut remaining = q.max(0.0);
    let mut acc = 0.0;
    for k in order {
        if remaining <= 0.0 {
            break;
        }
        let cell = g.weight(k);
        let take = cell.min(remaining);
        acc += vals[k] * take;
        remaining -= take;
    }
    acc
}

/// Normalizing constants `Z_1 = int <v>^gamma mu` and `Z_2 = int <v>^gamma f`.
pub fn partition_constants(f: &GridDistribution, gamma: f64) -> (f64, f64) {
    let z1 = f
        .grid()
        .integrate_with(|_, v| log_standard_maxwellian(v).exp() * bracket(v).powf(gamma));
    let z2 = integrate(f, |_, v| bracket(v).powf(gamma));
    (z1, z2)
}

/// Entropy dissipation `D(f) = 1/2 sum_{k != l} W_k W_l |z|^{gamma+2} <Pi(z) ds, ds>`
/// by direct pairwise summation (`O(N^6)`), with `W = w f`, `z = v_k - v_l`
/// and `ds = s_k - s_l`.
pub fn entropy_dissipation_projection(f: &GridDistribution, gamma: f64) -> Result<f64> {
    validate_exponent(gamma)?;
    let data = PairData::new(f.grid(), f.values(), f.score());
    Ok(dissipation_projection_direct(&data, gamma))
}

/// Entropy dissipation in cross-product form,
/// `1/4 sum_{i,j} sum_{k != l} W_k W_l |R_ij|^2 |z|^gamma`.
pub fn entropy_dissipation_crossform(f: &GridDistribution, gamma: f64) -> Result<f64> {
    validate_exponent(gamma)?;
    let data = PairData::new(f.grid(), f.values(), f.score());
    Ok(dissipation_cross_direct(&data, gamma))
}

/// How the dissipation is evaluated.
#[derive(Clone, Copy)]
pub enum Dissipation<'a> {
    /// Direct pairwise summation.
    Direct { gamma: f64 },
    /// Zero-padded FFT convolution of the same pairwise sum.
    Convolution(&'a CollisionOperator),
}

impl Dissipation<'_> {
    pub fn gamma(&self) -> f64 {
        match self {
            Dissipation::Direct { gamma } => *gamma,
            Dissipation::Convolution(op) => op.gamma(),
        }
    }

    pub fn evaluate(&self, f: &GridDistribution) -> Result<f64> {
        match self {
            Dissipation::Direct { gamma } => entropy_dissipation_projection(f, *gamma),
            Dissipation::Convolution(op) => Ok(op.dissipation(f)),
        }
    }
}

/// Options for [`FunctionalReport::compute`].
#[derive(Debug, Clone)]
pub struct ReportSpec {
    pub fisher_weights: Vec<f64>,
    pub moment_orders: Vec<f64>,
    pub exp_moments: Vec<(f64, f64)>,
}

impl Default for ReportSpec {
    fn default() -> Self {
        Self {
            fisher_weights: vec![-3.0, 0.0],
            moment_orders: vec![0.0, 2.0, 5.0, 10.0],
            exp_moments: vec![(0.5, 0.5)],
        }
    }
}

/// Every scalar functional of one density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
    pub entropy: f64,
    pub relative_entropy: f64,
    pub dissipation: f64,
    pub fisher_weighted: Vec<(f64, f64)>,
    pub poly_moments: Vec<(f64, f64)>,
    pub exp_moments: Vec<((f64, f64), f64)>,
    pub pressure: [[f64; 3]; 3],
    pub delta: f64,
    pub l3_norm: f64,
    pub partition: (f64, f64),
}

impl FunctionalReport {
    pub fn compute(f: &GridDistribution, spec: &ReportSpec, dissipation: Dissipation<'_>) -> Result<Self> {
        let gamma = dissipation.gamma();
        let pressure = pressure_tensor(f);
        let exp_moments = spec
            .exp_moments
            .iter()
            .map(|&(s, kappa)| Ok(((s, kappa), moment_exp(f, s, kappa)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mass: mass(f),
            momentum: momentum(f),
            energy: energy(f),
            entropy: entropy(f),
            relative_entropy: relative_entropy(f),
            dissipation: dissipation.evaluate(f)?,
            fisher_weighted: spec
                .fisher_weights
                .iter()
                .map(|&a| (a, fisher_weighted(f, a)))
                .collect(),
            poly_moments: spec.moment_orders.iter().map(|&l| (l, moment_poly(f, l))).collect(),
            exp_moments,
            delta: delta_from_pressure(&pressure),
            pressure,
            l3_norm: lp_norm_weighted(f, 3.0, -3.0)?,
            partition: partition_constants(f, gamma),
        })
    }

    /// Flat `(key, value)` list; map-valued fields use keys like `fisher_weighted[-3]`.
    pub fn flatten(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("mass".to_string(), self.mass),
            ("momentum[0]".to_string(), self.momentum[0]),
            ("momentum[1]".to_string(), self.momentum[1]),
            ("momentum[2]".to_string(), self.momentum[2]),
            ("energy".to_string(), self.energy),
            ("entropy".to_string(), self.entropy),
            ("relative_entropy".to_string(), self.relative_entropy),
            ("dissipation".to_string(), self.dissipation),
        ];
        for (a, v) in &self.fisher_weighted {
            out.push((format!("fisher_weighted[{a}]"), *v));
        }
        for (l, v) in &self.poly_moments {
            out.push((format!("poly_moments[{l}]"), *v));
        }
        for ((s, k), v) in &self.exp_moments {
            out.push((format!("exp_moments[{s},{k}]"), *v));
        }
        for i in 0..3 {
            for j in i..3 {
                out.push((format!("pressure[{i}{j}]"), self.pressure[i][j]));
            }
        }
        out.push(("delta".to_string(), self.delta));
        out.push(("l3_norm".to_string(), self.l3_norm));
        out.push(("partition[1]".to_string(), self.partition.0));
        out.push(("partition[2]".to_string(), self.partition.1));
        out
    }

    /// Flat JSON object with the keys of [`flatten`](Self::flatten).
    pub fn to_json(&self) -> serde_json::Value {
        let map = self
            .flatten()
            .into_iter()
            .map(|(k, v)| (k, serde_json::json!(v)))
            .collect::<serde_json::Map<_, _>>();
        serde_json::Value::Object(map)
    }

    /// Check the structural invariants: `D >= 0`, `H(f|mu) >= 0`,
    /// `tr P = energy`, `Delta >= 0`, all finite.
    pub fn invariant_violations(&self, tolerance: f64) -> Vec<String> {
        let mut issues = Vec::new();
        if self.flatten().iter().any(|(_, v)| !v.is_finite()) {
            issues.push("non-finite functional".to_string());
        }
        if self.dissipation < -tolerance {
            issues.push(format!("negative dissipation {}", self.dissipation));
        }
        if self.relative_entropy < -tolerance {
            issues.push(format!("negative relative entropy {}", self.relative_entropy));
        }
        let trace = self.pressure[0][0] + self.pressure[1][1] + self.pressure[2][2];
        if (trace - self.energy).abs() > tolerance * self.energy.abs().max(1.0) {
            issues.push(format!("pressure trace {trace} differs from energy {}", self.energy));
        }
        if self.delta < -tolerance {
            issues.push(format!("negative pressure determinant {}", self.delta));
        }
        issues
    }
}
