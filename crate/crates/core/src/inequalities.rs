//! Empirical verification of the functional inequalities: every unnamed
//! constant becomes a computed ratio, and the explicit constants
//! (3456, 5/8, `2^{-34} 3^{-4} e^{-16 H}`, `2^{-11/2}`) are checked as stated.
//!
//! Every verdict has a fixed orientation: it holds iff `lhs >= rhs - tolerance`.

use std::f64::consts::{LN_2, PI};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::GridDistribution;
use crate::error::{LabError, Result};
use crate::fft3::convolve_radial_pair;
use crate::functionals::{
    bracket, delta_from_pressure, entropy, fisher_weighted, log_standard_maxwellian, lp_norm_weighted, moment_exp,
    moment_poly, partition_constants, pressure_tensor, relative_entropy, small_set_concentration, Dissipation,
    ENTROPY_CUTOFF,
};
use crate::io::digest_values;
use crate::kernel::{diffusion_matrix, drift_vector, sum_unordered_pairs, OffsetTable};

/// Members whose weighted Fisher information falls below this are treated as equilibria.
pub const EQUILIBRIUM_FISHER: f64 = 1e-12;

/// Constant of the weighted Fisher bound through the pressure tensor.
pub const PROP32_CONSTANT: f64 = 3456.0;

/// Minimum of `(z^2 - z + 4)/(1 + z)^2`, attained at `z = 3`.
pub const BAKRY_EMERY_MINIMUM: f64 = 0.625;

/// One inequality evaluated on one input set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityVerdict {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub empirical_constant: f64,
    pub holds: bool,
    /// No member was informative (all at equilibrium); `holds` is then true.
    pub vacuous: bool,
    pub inputs_digest: String,
    pub tolerance: f64,
    pub notes: Vec<String>,
}

impl InequalityVerdict {
    pub fn new(name: &str, lhs: f64, rhs: f64, tolerance: f64, empirical_constant: f64, digest: String) -> Self {
        let holds = lhs.is_finite() && rhs.is_finite() && lhs >= rhs - tolerance;
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            empirical_constant,
            holds,
            vacuous: false,
            inputs_digest: digest,
            tolerance,
            notes: Vec::new(),
        }
    }

    /// Error-style check: `0 >= error - tolerance`.
    pub fn error_bound(name: &str, error: f64, tolerance: f64, digest: String) -> Self {
        Self::new(name, 0.0, error, tolerance, error, digest)
    }

    /// Ratio-style check: the empirical constant must be finite and strictly positive.
    pub fn positive_constant(name: &str, constant: f64, digest: String) -> Self {
        Self::new(name, constant, f64::MIN_POSITIVE, 0.0, constant, digest)
    }

    /// Ratio-style check: the empirical constant must be finite and nonnegative.
    pub fn finite_constant(name: &str, constant: f64, digest: String) -> Self {
        Self::new(name, constant, 0.0, 0.0, constant, digest)
    }

    pub fn vacuous(name: &str, digest: String, note: &str) -> Self {
        Self {
            name: name.to_string(),
            lhs: 0.0,
            rhs: 0.0,
            empirical_constant: f64::NAN,
            holds: true,
            vacuous: true,
            inputs_digest: digest,
            tolerance: 0.0,
            notes: vec![note.to_string()],
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// One JSON object on a single line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("verdict serializes")
    }

    pub fn summary_line(&self) -> String {
        let status = match (self.vacuous, self.holds) {
            (true, _) => "VACUOUS",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        format!(
            "{:<28} {:<7} lhs={:<13.6e} rhs={:<13.6e} const={:.6e}",
            self.name, status, self.lhs, self.rhs, self.empirical_constant
        )
    }
}

/// Human-readable table of verdicts.
pub fn summary_table(verdicts: &[InequalityVerdict]) -> String {
    let mut out = String::new();
    for v in verdicts {
        out.push_str(&v.summary_line());
        out.push('\n');
    }
    let failed = verdicts.iter().filter(|v| !v.holds).count();
    out.push_str(&format!("{} verdicts, {} failed\n", verdicts.len(), failed));
    out
}

/// Digest of the node values of a set of distributions.
pub fn members_digest(members: &[GridDistribution]) -> String {
    digest_values(members.iter().map(|f| f.values()))
}

fn require_members(members: &[GridDistribution], check: &str) -> Result<()> {
    if members.is_empty() {
        Err(LabError::InsufficientData(format!(
            "{check} needs at least one distribution"
        )))
    } else {
        Ok(())
    }
}

/// Per-member quantities of the dissipation lower bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyRatioSample {
    pub entropy: f64,
    pub dissipation: f64,
    pub moment: f64,
    pub fisher: f64,
    /// `D M_{2-gamma} / I_gamma`, `None` at equilibrium.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EntropyRatioCheck {
    pub verdict: InequalityVerdict,
    pub samples: Vec<EntropyRatioSample>,
}

pub fn entropy_ratio_sample(f: &GridDistribution, dissipation: Dissipation<'_>) -> Result<EntropyRatioSample> {
    let gamma = dissipation.gamma();
    let d = dissipation.evaluate(f)?;
    let moment = moment_poly(f, 2.0 - gamma);
    let fisher = fisher_weighted(f, gamma);
    let ratio = (fisher >= EQUILIBRIUM_FISHER).then(|| d * moment / fisher);
    Ok(EntropyRatioSample {
        entropy: entropy(f),
        dissipation: d,
        moment,
        fisher,
        ratio,
    })
}

/// Dissipation lower bound `D(f) M_{2-gamma}(f) >= C I_gamma(f | mu)`:
/// the empirical constant is the smallest ratio over informative members.
pub fn check_theorem_entropy(members: &[GridDistribution], dissipation: Dissipation<'_>) -> Result<EntropyRatioCheck> {
    require_members(members, "entropy dissipation bound")?;
    let digest = members_digest(members);
    let samples = members
        .iter()
        .map(|f| entropy_ratio_sample(f, dissipation))
        .collect::<Result<Vec<_>>>()?;
    let skipped = samples.iter().filter(|s| s.ratio.is_none()).count();
    let min_ratio = samples.iter().filter_map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let verdict = if skipped == samples.len() {
        InequalityVerdict::vacuous("theorem_entropy", digest, "all members at equilibrium")
    } else {
        InequalityVerdict::positive_constant("theorem_entropy", min_ratio, digest)
            .with_note(format!("{skipped} equilibrium members skipped"))
    };
    Ok(EntropyRatioCheck { verdict, samples })
}

/// Lower bound for both partition constants, `2^{gamma - 5/2}`.
pub fn partition_floor(gamma: f64) -> f64 {
    (gamma - 2.5).exp2()
}

/// Constant multiplying the tail energy in the truncated relative entropy.
pub fn tail_energy_constant(gamma: f64) -> f64 {
    0.5 + 1.5 * (2.0 * PI).ln() + (2.5 - gamma) * LN_2 - 1.0
}

/// Constant multiplying the Maxwellian tail in the truncated relative entropy.
pub fn tail_maxwellian_constant(gamma: f64) -> f64 {
    (2.5 - gamma).exp2()
}

/// Terms of the weighted relative-entropy bound at truncation radius `R`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CercignaniTerms {
    pub z1: f64,
    pub z2: f64,
    /// `int {f log(Z_1 f / (Z_2 mu)) + (Z_2/Z_1) mu - f} <v>^gamma`.
    pub weighted_entropy: f64,
    /// Smallest nodal value of `x log x + 1 - x` with `x = Z_1 f / (Z_2 mu)`.
    pub min_integrand: f64,
    pub relative_entropy: f64,
    pub tail_entropy: f64,
    pub tail_energy: f64,
    pub tail_maxwellian: f64,
    /// `H(f|mu) - tail_entropy - C_f tail_energy - C_mu tail_maxwellian`.
    pub truncated: f64,
}

pub fn cercignani_terms(f: &GridDistribution, gamma: f64, radius: f64) -> Result<CercignaniTerms> {
    if !(radius > 1.0) {
        return Err(LabError::InvalidConfig(format!(
            "truncation radius must exceed 1, got {radius}"
        )));
    }
    let (z1, z2) = partition_constants(f, gamma);
    let g = f.grid();
    let vals = f.values();
    let ratio = z2 / z1;
    let weighted_entropy = g.integrate_with(|k, v| {
        let mu = log_standard_maxwellian(v).exp();
        let x = vals[k];
        let log_term = if x < ENTROPY_CUTOFF {
            0.0
        } else {
            x * (x.ln() - log_standard_maxwellian(v) - ratio.ln())
        };
        (log_term + ratio * mu - x) * bracket(v).powf(gamma)
    });
    let mut min_integrand = f64::INFINITY;
    for k in 0..g.len() {
        let v = g.node(k);
        let x = vals[k] / (ratio * log_standard_maxwellian(v).exp());
        let phi = if x == 0.0 { 1.0 } else { x * x.ln() + 1.0 - x };
        min_integrand = min_integrand.min(phi);
    }
    let outside = |v: [f64; 3]| bracket(v) >= radius;
    let tail_entropy = g.integrate_with(|k, v| {
        if outside(v) && vals[k] >= ENTROPY_CUTOFF {
            vals[k] * vals[k].ln()
        } else {
            0.0
        }
    });
    let tail_energy = g.integrate_with(|k, v| if outside(v) { bracket(v).powi(2) * vals[k] } else { 0.0 });
    let tail_maxwellian = g.integrate_with(|_, v| {
        if outside(v) {
            log_standard_maxwellian(v).exp()
        } else {
            0.0
        }
    });
    let relative = relative_entropy(f);
    let truncated = relative
        - tail_entropy
        - tail_energy_constant(gamma) * tail_energy
        - tail_maxwellian_constant(gamma) * tail_maxwellian;
    Ok(CercignaniTerms {
        z1,
        z2,
        weighted_entropy,
        min_integrand,
        relative_entropy: relative,
        tail_entropy,
        tail_energy,
        tail_maxwellian,
        truncated,
    })
}

/// Weighted entropy bound and its truncated consequence at radius `R`.
///
/// Produces five verdicts: the empirical constant `c = min D M / J`, the
/// nodal identity `x log x + 1 - x >= 0`, the reduction `J >= R^gamma (...)`,
/// the truncated bound `D M >= c R^gamma (...)`, and
/// `2^{gamma-5/2} <= Z_1, Z_2 <= 1`.
pub fn check_cercignani(
    members: &[GridDistribution],
    radius: f64,
    dissipation: Dissipation<'_>,
) -> Result<Vec<InequalityVerdict>> {
    require_members(members, "weighted entropy bound")?;
    let gamma = dissipation.gamma();
    let digest = members_digest(members);
    let mut rows = Vec::with_capacity(members.len());
    for f in members {
        let terms = cercignani_terms(f, gamma, radius)?;
        let dm = dissipation.evaluate(f)? * moment_poly(f, 2.0 - gamma);
        rows.push((terms, dm));
    }
    let informative: Vec<_> = rows
        .iter()
        .filter(|(t, _)| t.weighted_entropy > EQUILIBRIUM_FISHER)
        .collect();
    let mut out = Vec::new();
    let c = informative
        .iter()
        .map(|(t, dm)| dm / t.weighted_entropy)
        .fold(f64::INFINITY, f64::min);
    if informative.is_empty() {
        out.push(InequalityVerdict::vacuous(
            "cercignani_weighted",
            digest.clone(),
            "all members at equilibrium",
        ));
    } else {
        out.push(InequalityVerdict::positive_constant(
            "cercignani_weighted",
            c,
            digest.clone(),
        ));
    }
    let min_phi = rows.iter().map(|(t, _)| t.min_integrand).fold(f64::INFINITY, f64::min);
    out.push(InequalityVerdict::new(
        "cercignani_integrand",
        min_phi,
        0.0,
        1e-12,
        min_phi,
        digest.clone(),
    ));

    let scale = radius.powf(gamma);
    let reduction = rows
        .iter()
        .map(|(t, _)| t.weighted_entropy - scale * t.truncated)
        .fold(f64::INFINITY, f64::min);
    out.push(
        InequalityVerdict::new(
            "cercignani_truncation",
            reduction,
            0.0,
            1e-12,
            reduction,
            digest.clone(),
        )
        .with_note(format!("R = {radius}")),
    );
    if informative.is_empty() {
        out.push(InequalityVerdict::vacuous(
            "cercignani_tail",
            digest.clone(),
            "all members at equilibrium",
        ));
    } else {
        let slack = rows
            .iter()
            .map(|(t, dm)| dm - c * scale * t.truncated)
            .fold(f64::INFINITY, f64::min);
        out.push(
            InequalityVerdict::new("cercignani_tail", slack, 0.0, 1e-12, c, digest.clone())
                .with_note(format!("R = {radius}")),
        );
    }
    let floor = partition_floor(gamma);
    let z_min = rows.iter().map(|(t, _)| t.z1.min(t.z2)).fold(f64::INFINITY, f64::min);
    let z_max = rows
        .iter()
        .map(|(t, _)| t.z1.max(t.z2))
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = (z_min - floor).min(1.0 - z_max);
    out.push(
        InequalityVerdict::new("cercignani_partition", margin, 0.0, 0.0, z_min, digest)
            .with_note(format!("Z in [{z_min:.6e}, {z_max:.6e}], floor {floor:.6e}")),
    );
    Ok(out)
}

/// `||f||_{L^3_{-3}} <= C_0 (1 + D(f))`: the constant is the largest ratio.
pub fn check_l3_regularity(members: &[GridDistribution], dissipation: Dissipation<'_>) -> Result<InequalityVerdict> {
    require_members(members, "L3 regularity bound")?;
    let mut c0: f64 = 0.0;
    for f in members {
        let ratio = lp_norm_weighted(f, 3.0, -3.0)? / (1.0 + dissipation.evaluate(f)?);
        c0 = c0.max(ratio);
    }
    Ok(InequalityVerdict::positive_constant(
        "l3_regularity",
        c0,
        members_digest(members),
    ))
}

/// Score components recovered from integrals of the cross-product field.
#[derive(Debug, Clone)]
pub struct ScoreReconstruction {
    pub i: usize,
    pub j: usize,
    /// `(s_i, s_j)` from the Cramer formulas.
    pub score_i: Vec<f64>,
    pub score_j: Vec<f64>,
    /// `int R_ij(v, w) f(w) dw`.
    pub cross_integral: Vec<f64>,
    /// `v_i s_j(v) - v_j s_i(v)` from the score field.
    pub cross_direct: Vec<f64>,
    /// Interior nodes with `f > 1e-8`.
    pub mask: Vec<bool>,
}

/// Density threshold for nodes entering reconstruction errors.
pub const RECONSTRUCTION_FLOOR: f64 = 1e-8;

/// Smallest `|P_ij^2 - P_ii P_jj|` accepted by the Cramer formulas.
pub const CRAMER_DENOMINATOR_FLOOR: f64 = 1e-8;

/// Evaluate the integral identities for the pair `(i, j)`. The `w`-integrals
/// are expanded into weighted moments of `f`, which is an exact rewrite of the
/// quadrature double sum. Returns `None` for a near-degenerate denominator.
pub fn reconstruct_score(f: &GridDistribution, i: usize, j: usize) -> Result<Option<ScoreReconstruction>> {
    if i == j || i > 2 || j > 2 {
        return Err(LabError::InvalidConfig(format!(
            "score reconstruction needs distinct indices in 0..3, got ({i}, {j})"
        )));
    }
    let g = f.grid();
    let vals = f.values();
    let score = f.score();
    let weighted = |h: &dyn Fn(usize, [f64; 3]) -> f64| g.integrate_with(|k, v| vals[k] * h(k, v));
    let m0 = weighted(&|_, _| 1.0);
    let m = [0, 1, 2].map(|a| weighted(&|_, v| v[a]));
    let sigma = [0, 1, 2].map(|a| weighted(&|k, _| score[k][a]));
    let tau = |a: usize, b: usize| weighted(&|k, v| v[a] * score[k][b]);
    let p = |a: usize, b: usize| weighted(&|_, v| v[a] * v[b]);
    let rho = |a: usize, b: usize, c: usize| weighted(&|k, v| v[a] * v[b] * score[k][c]);
    let (p_ii, p_jj, p_ij) = (p(i, i), p(j, j), p(i, j));
    let den = p_ij * p_ij - p_ii * p_jj;
    if den.abs() < CRAMER_DENOMINATOR_FLOOR {
        return Ok(None);
    }
    let (t_ij, t_ji, t_ii, t_jj) = (tau(i, j), tau(j, i), tau(i, i), tau(j, j));
    let (r_iij, r_iji, r_ijj, r_jji) = (rho(i, i, j), rho(i, j, i), rho(i, j, j), rho(j, j, i));
    let n = g.points_per_axis();
    let len = g.len();
    let mut out = ScoreReconstruction {
        i,
        j,
        score_i: vec![0.0; len],
        score_j: vec![0.0; len],
        cross_integral: vec![0.0; len],
        cross_direct: vec![0.0; len],
        mask: vec![false; len],
    };
    let peak_floor = RECONSTRUCTION_FLOOR;
    for k in 0..len {
        let v = g.node(k);
        let (si, sj) = (score[k][i], score[k][j]);
        let cross = v[i] * sj - v[j] * si;
        let j0 = m0 * cross + m[j] * si - m[i] * sj - v[i] * sigma[j] + v[j] * sigma[i] + (t_ij - t_ji);
        let ji = m[i] * cross + p_ij * si - p_ii * sj - v[i] * t_ij + v[j] * t_ii + (r_iij - r_iji);
        let jj = m[j] * cross + p_jj * si - p_ij * sj - v[i] * t_jj + v[j] * t_ji + (r_ijj - r_jji);
        out.score_i[k] = (v[j] * p_ij + v[i] * p_ii + p_ij * ji - p_ii * jj) / den;
        out.score_j[k] = (v[i] * p_ij + v[j] * p_jj + p_jj * ji - p_ij * jj) / den;
        out.cross_integral[k] = j0;
        out.cross_direct[k] = cross;
        let c = g.coords(k);
        let interior = c.iter().all(|&x| x > 0 && x + 1 < n);
        out.mask[k] = interior && vals[k] > peak_floor;
    }
    Ok(Some(out))
}

/// `max |a - b| / max |b|` over masked nodes; absolute when the reference vanishes.
pub fn masked_relative_error(a: &[f64], reference: &[f64], mask: &[bool]) -> f64 {
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..a.len() {
        if mask[k] {
            err = err.max((a[k] - reference[k]).abs());
            scale = scale.max(reference[k].abs());
        }
    }
    if scale < 1e-12 {
        err
    } else {
        err / scale
    }
}

/// Errors of the three reconstructions against the direct score.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReconstructionErrors {
    pub score_i: f64,
    pub score_j: f64,
    pub cross: f64,
}

impl ScoreReconstruction {
    pub fn errors(&self, f: &GridDistribution) -> ReconstructionErrors {
        let score = f.score();
        let direct_i: Vec<f64> = score.iter().map(|s| s[self.i]).collect();
        let direct_j: Vec<f64> = score.iter().map(|s| s[self.j]).collect();
        ReconstructionErrors {
            score_i: masked_relative_error(&self.score_i, &direct_i, &self.mask),
            score_j: masked_relative_error(&self.score_j, &direct_j, &self.mask),
            cross: masked_relative_error(&self.cross_integral, &self.cross_direct, &self.mask),
        }
    }
}

/// Score reconstruction over all three index pairs; the verdict bounds the
/// largest relative error by `tolerance`.
pub fn check_prop31(f: &GridDistribution, tolerance: f64) -> Result<InequalityVerdict> {
    let digest = members_digest(std::slice::from_ref(f));
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        match reconstruct_score(f, i, j)? {
            Some(rec) => {
                let e = rec.errors(f);
                worst = worst.max(e.score_i).max(e.score_j).max(e.cross);
                notes.push(format!(
                    "({i},{j}): s_i {:.3e} s_j {:.3e} cross {:.3e}",
                    e.score_i, e.score_j, e.cross
                ));
            }
            None => notes.push(format!("({i},{j}): skipped, near-degenerate pressure minor")),
        }
    }
    let mut verdict = InequalityVerdict::error_bound("prop31_reconstruction", worst, tolerance, digest);
    verdict.notes = notes;
    Ok(verdict)
}

/// Pieces of the Fisher bound through the pressure tensor.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PressureBound {
    pub fisher: f64,
    pub delta: f64,
    pub off_diagonal: f64,
    pub diagonal: f64,
    pub moment_dissipation: f64,
    /// `3456 Delta^{-2} (sup P_ij^2 + sup |P_jj - 1|^2 + M D)`.
    pub bound: f64,
}

pub fn pressure_bound(f: &GridDistribution, dissipation: Dissipation<'_>) -> Result<PressureBound> {
    let gamma = dissipation.gamma();
    let p = pressure_tensor(f);
    let delta = delta_from_pressure(&p);
    let off_diagonal = [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| p[i][j] * p[i][j])
        .fold(0.0, f64::max);
    let diagonal = (0..3).map(|j| (p[j][j] - 1.0).powi(2)).fold(0.0, f64::max);
    let moment_dissipation = moment_poly(f, 2.0 - gamma) * dissipation.evaluate(f)?;
    let bound = PROP32_CONSTANT / (delta * delta) * (off_diagonal + diagonal + moment_dissipation);
    Ok(PressureBound {
        fisher: fisher_weighted(f, gamma),
        delta,
        off_diagonal,
        diagonal,
        moment_dissipation,
        bound,
    })
}

/// `I_gamma(f|mu) <= 3456 Delta_f^{-2} (...)`; the empirical constant is the
/// smallest constant that would still make the bound hold.
pub fn check_prop32(f: &GridDistribution, dissipation: Dissipation<'_>) -> Result<InequalityVerdict> {
    let b = pressure_bound(f, dissipation)?;
    let needed = if b.bound > 0.0 {
        PROP32_CONSTANT * b.fisher / b.bound
    } else {
        0.0
    };
    Ok(InequalityVerdict::new(
        "prop32_pressure",
        b.bound,
        b.fisher,
        1e-12,
        needed,
        members_digest(std::slice::from_ref(f)),
    )
    .with_note(format!("slack {:.6e}", b.bound - b.fisher)))
}

/// `2^{-34} 3^{-4} e^{-16 H}`.
pub fn delta_floor(entropy_bound: f64) -> f64 {
    (-34.0f64).exp2() / 81.0 * (-16.0 * entropy_bound).exp()
}

/// Pressure-tensor bounds over a corpus: the explicit floor for `Delta_f`,
/// the empirical constants of `P_ij^2 <= C M D` and `|P_ii - P_jj|^2 <= C M D`,
/// the trace reduction and the small-set concentration bound.
pub fn check_prop33(
    members: &[GridDistribution],
    entropy_bound: f64,
    dissipation: Dissipation<'_>,
) -> Result<Vec<InequalityVerdict>> {
    require_members(members, "pressure tensor bounds")?;
    let gamma = dissipation.gamma();
    let digest = members_digest(members);
    let floor = delta_floor(entropy_bound);
    let mut min_delta = f64::INFINITY;
    let mut c_off: f64 = 0.0;
    let mut c_diag: f64 = 0.0;
    let mut trace_margin = f64::INFINITY;
    let mut concentration_margin = f64::INFINITY;
    let mut skipped = 0;
    for f in members {
        let p = pressure_tensor(f);
        min_delta = min_delta.min(delta_from_pressure(&p));
        let md = moment_poly(f, 2.0 - gamma) * dissipation.evaluate(f)?;
        let pairs = [(0, 1), (0, 2), (1, 2)];
        let off = pairs.iter().map(|&(i, j)| p[i][j] * p[i][j]).fold(0.0, f64::max);
        let spread = pairs
            .iter()
            .map(|&(i, j)| (p[i][i] - p[j][j]).abs())
            .fold(0.0, f64::max);
        if md > EQUILIBRIUM_FISHER {
            c_off = c_off.max(off / md);
            c_diag = c_diag.max(spread * spread / md);
        } else {
            skipped += 1;
        }
        for j in 0..3 {
            trace_margin = trace_margin.min(2.0 / 3.0 * spread - (p[j][j] - 1.0).abs());
        }
        let h = entropy(f).max(1.0);
        let m = (4.0 * h).exp();
        let h3 = f.grid().cell_volume();
        for q in [h3, 0.01, 0.1, 1.0, 10.0] {
            let bound = m * q + h / m.ln();
            concentration_margin = concentration_margin.min(bound - small_set_concentration(f, q));
        }
    }
    let note = format!("{skipped} equilibrium members skipped");
    Ok(vec![
        InequalityVerdict::new("prop33_delta_floor", min_delta, floor, 0.0, min_delta, digest.clone()),
        InequalityVerdict::finite_constant("prop33_off_diagonal", c_off, digest.clone()).with_note(note.clone()),
        InequalityVerdict::finite_constant("prop33_diagonal", c_diag, digest.clone()).with_note(note),
        InequalityVerdict::new(
            "prop33_trace_reduction",
            trace_margin,
            0.0,
            1e-9,
            trace_margin,
            digest.clone(),
        ),
        InequalityVerdict::new(
            "small_set_concentration",
            concentration_margin,
            0.0,
            0.0,
            concentration_margin,
            digest,
        ),
    ])
}

/// Angular functional of the pressure-tensor lower bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AngularFunctional {
    /// Minimum over the uniform angle grid.
    pub grid_min: f64,
    /// Minimum over all angles (smallest eigenvalue of the quadratic form).
    pub exact_min: f64,
    /// Maximum minus minimum over the angle grid.
    pub spread: f64,
    /// `int f <v>^{-5} |(v_i^2 - v_j^2) P_ij + v_i v_j (P_jj - P_ii)|^2`.
    pub weighted_integral: f64,
    /// `P_ij^2 + (P_jj - P_ii)^2 / 4`.
    pub pressure_term: f64,
}

/// `S_f = min_phi int f <v>^{-5} |(v_i^2 - v_j^2) cos phi + 2 v_i v_j sin phi|^2`.
///
/// The integrand is a quadratic form in `(cos phi, sin phi)`, so the three
/// moments `A, B, C` determine it for every angle.
pub fn s_f_functional(f: &GridDistribution, i: usize, j: usize, n_phi: usize) -> Result<AngularFunctional> {
    if i == j || i > 2 || j > 2 {
        return Err(LabError::InvalidConfig(format!(
            "angular functional needs distinct indices, got ({i}, {j})"
        )));
    }
    if n_phi < 16 {
        return Err(LabError::InvalidConfig(format!(
            "angle grid needs at least 16 points, got {n_phi}"
        )));
    }
    let vals = f.values();
    let g = f.grid();
    let w5 = |v: [f64; 3]| bracket(v).powi(-5);
    let a = g.integrate_with(|k, v| vals[k] * w5(v) * (v[i] * v[i] - v[j] * v[j]).powi(2));
    let b = g.integrate_with(|k, v| vals[k] * w5(v) * (v[i] * v[i] - v[j] * v[j]) * v[i] * v[j]);
    let c = g.integrate_with(|k, v| vals[k] * w5(v) * (v[i] * v[j]).powi(2));
    let form = |phi: f64| {
        let (s, co) = phi.sin_cos();
        a * co * co + 4.0 * b * s * co + 4.0 * c * s * s
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for m in 0..n_phi {
        let val = form(2.0 * PI * m as f64 / n_phi as f64);
        lo = lo.min(val);
        hi = hi.max(val);
    }
    let (tr, det) = (a + 4.0 * c, 4.0 * (a * c - b * b));
    let exact_min = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
    let p = pressure_tensor(f);
    let (p_ij, d) = (p[i][j], p[j][j] - p[i][i]);
    let weighted_integral =
        g.integrate_with(|k, v| vals[k] * w5(v) * ((v[i] * v[i] - v[j] * v[j]) * p_ij + v[i] * v[j] * d).powi(2));
    Ok(AngularFunctional {
        grid_min: lo,
        exact_min,
        spread: hi - lo,
        weighted_integral,
        pressure_term: p_ij * p_ij + 0.25 * d * d,
    })
}

/// `int f <v>^{-5} |...|^2 >= S_f (P_ij^2 + (P_jj - P_ii)^2/4)` with the exact `S_f`.
pub fn check_s_f(f: &GridDistribution, i: usize, j: usize, n_phi: usize) -> Result<InequalityVerdict> {
    let s = s_f_functional(f, i, j, n_phi)?;
    let rhs = s.exact_min * s.pressure_term;
    let tol = 1e-12 * s.weighted_integral.abs().max(1e-300);
    Ok(InequalityVerdict::new(
        "s_f_lower_bound",
        s.weighted_integral,
        rhs,
        tol,
        s.exact_min,
        members_digest(std::slice::from_ref(f)),
    )
    .with_note(format!("grid min {:.6e}, spread {:.3e}", s.grid_min, s.spread)))
}

/// Hessian of `U(v) = |v|^2/2 + (3/2) log(1 + |v|^2)`.
pub fn potential_hessian(v: [f64; 3]) -> Matrix3<f64> {
    let b2 = 1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let x = Vector3::from(v);
    Matrix3::identity() * (1.0 + 3.0 / b2) - x * x.transpose() * (6.0 / (b2 * b2))
}

/// `(z^2 - z + 4)/(1 + z)^2`: smallest Hessian eigenvalue at `|v|^2 = z`.
pub fn hessian_scalar(z: f64) -> f64 {
    (z * z - z + 4.0) / ((1.0 + z) * (1.0 + z))
}

/// Smallest Hessian eigenvalue over `samples` seeded velocities (plus the
/// minimizing sphere `|v|^2 = 3`) against `5/8`.
pub fn check_bakry_emery(samples: usize, seed: u64) -> InequalityVerdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![[3f64.sqrt(), 0.0, 0.0], [0.0; 3], [1.0, 1.0, 1.0]];
    while points.len() < samples + 3 {
        let dir: [f64; 3] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let r2 = dir.iter().map(|x| x * x).sum::<f64>();
        if r2 > 1.0 || r2 < 1e-6 {
            continue;
        }
        let radius: f64 = rng.gen_range(0.0..10.0);
        let scale = radius / r2.sqrt();
        points.push(dir.map(|x| x * scale));
    }
    let mut lowest = f64::INFINITY;
    let mut formula_gap: f64 = 0.0;
    for v in &points {
        let eig = SymmetricEigen::new(potential_hessian(*v)).eigenvalues.min();
        lowest = lowest.min(eig);
        formula_gap = formula_gap.max((eig - hessian_scalar(v.iter().map(|x| x * x).sum())).abs());
    }
    let digest = digest_values(points.iter().map(|p| p.as_slice()));
    InequalityVerdict::new("bakry_emery", lowest, BAKRY_EMERY_MINIMUM, 1e-12, lowest, digest).with_note(format!(
        "min at |v|^2 = 3: {:.17}; eigenvalue vs closed form {formula_gap:.2e}",
        hessian_scalar(3.0)
    ))
}

/// Cutoff removing the near-diagonal region `|v - w| < eta` in the coercivity integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cutoff {
    Indicator,
    Smooth,
}

impl Cutoff {
    /// `chi(r)`: equal to 1 on `[0, 1/2]` (indicator: `[0, 1]`) and 0 beyond 1.
    pub fn profile(self, r: f64) -> f64 {
        match self {
            Cutoff::Indicator => {
                if r <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Cutoff::Smooth => {
                let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
                let (a, b) = (psi(1.0 - r), psi(r - 0.5));
                a / (a + b)
            }
        }
    }
}

/// The coercivity integral `I`, its region-one part and the two moment
/// combinations of the bound, for one distribution.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoercivitySample {
    pub integral: f64,
    /// Part over `{|v-w| < |w|} and {|v-w| < |v|}`.
    pub region_one: f64,
    /// `M_0^{1-gamma/2} M_2^{gamma/2} M_{l+gamma}`.
    pub leading: f64,
    /// `M_2 M_{l-2+gamma} + (M_2/M_0)^{l/2-1+gamma} M_0 M_2`.
    pub remainder: f64,
}

pub fn coercivity_sample(
    f: &GridDistribution,
    gamma: f64,
    eta: f64,
    l: f64,
    cutoff: Cutoff,
) -> Result<CoercivitySample> {
    if !(gamma > -4.0 && gamma < 0.0) {
        return Err(LabError::InvalidConfig(format!(
            "coercivity needs gamma in (-4, 0), got {gamma}"
        )));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(LabError::InvalidConfig(format!(
            "cutoff scale must lie in (0, 1], got {eta}"
        )));
    }
    if !(l > 2.0) {
        return Err(LabError::InvalidConfig(format!("moment order must exceed 2, got {l}")));
    }
    let g = f.grid();
    let profile = |r: f64| r.powf(gamma) * (1.0 - cutoff.profile(r / eta));
    let kernel = OffsetTable::radial(g, profile);
    let weighted: Vec<f64> = (0..g.len()).map(|k| g.weight(k) * f.values()[k]).collect();
    let nodes = g.nodes();
    let b2: Vec<f64> = nodes.iter().map(|&v| bracket(v).powi(2)).collect();
    let bl: Vec<f64> = b2.iter().map(|&x| x.powf(0.5 * (l - 2.0))).collect();
    let pair = |k: usize, m: usize, d: [usize; 3]| {
        // both orientations of the ordered pair
        weighted[k] * weighted[m] * kernel.get(d[0], d[1], d[2]) * (b2[m] - b2[k]) * (bl[k] - bl[m])
    };
    // The symmetric pair term expands into two convolutions.
    let wb2: Vec<f64> = weighted.iter().zip(&b2).map(|(w, b)| w * b).collect();
    let (conv_b2, conv_w) = convolve_radial_pair(g, profile, &wb2, &weighted);
    let integral: f64 = (0..g.len())
        .map(|k| weighted[k] * bl[k] * (conv_b2[k] - b2[k] * conv_w[k]))
        .sum();
    let region_one = sum_unordered_pairs(g, |k, m, d| {
        let (v, w) = (nodes[k], nodes[m]);
        let z2 = (v[0] - w[0]).powi(2) + (v[1] - w[1]).powi(2) + (v[2] - w[2]).powi(2);
        let (v2, w2) = (b2[k] - 1.0, b2[m] - 1.0);
        if z2 < v2 && z2 < w2 {
            pair(k, m, d)
        } else {
            0.0
        }
    });
    let (m0, m2) = (moment_poly(f, 0.0), moment_poly(f, 2.0));
    let leading = m0.powf(1.0 - 0.5 * gamma) * m2.powf(0.5 * gamma) * moment_poly(f, l + gamma);
    let remainder = m2 * moment_poly(f, l - 2.0 + gamma) + (m2 / m0).powf(0.5 * l - 1.0 + gamma) * m0 * m2;
    Ok(CoercivitySample {
        integral,
        region_one,
        leading,
        remainder,
    })
}

/// Fitted constants of the coercivity bound `I <= -K X + C Y`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoercivityFit {
    pub k: f64,
    pub c: f64,
    pub samples: Vec<CoercivitySample>,
}

/// Fit `C = 2 max(I/Y, 0)`, then the largest `K` with `I <= -K X + C Y` on
/// every member. The verdicts require `K > 0` and `I_1 <= 0`.
pub fn check_coercivity_lemma(
    members: &[GridDistribution],
    gamma: f64,
    eta: f64,
    l: f64,
    cutoff: Cutoff,
) -> Result<(Vec<InequalityVerdict>, CoercivityFit)> {
    require_members(members, "coercivity bound")?;
    let samples = members
        .iter()
        .map(|f| coercivity_sample(f, gamma, eta, l, cutoff))
        .collect::<Result<Vec<_>>>()?;
    let c0 = samples.iter().map(|s| s.integral / s.remainder).fold(0.0, f64::max);
    let c = 2.0 * c0;
    let k = samples
        .iter()
        .map(|s| (c * s.remainder - s.integral) / s.leading)
        .fold(f64::INFINITY, f64::min);
    let region_max = samples.iter().map(|s| s.region_one).fold(f64::NEG_INFINITY, f64::max);
    let scale = samples.iter().map(|s| s.integral.abs()).fold(0.0, f64::max);
    let digest = members_digest(members);
    let verdicts = vec![
        InequalityVerdict::positive_constant("coercivity", k, digest.clone())
            .with_note(format!("C = {c:.6e}, eta = {eta}, l = {l}, cutoff {cutoff:?}")),
        InequalityVerdict::error_bound("coercivity_region_one", region_max, 1e-14 * scale.max(1e-300), digest),
    ];
    Ok((verdicts, CoercivityFit { k, c, samples }))
}

/// `theta(r, alpha) = (9(r-1) + 2 alpha)/(3 - r)`.
pub fn interpolation_theta(r: f64, alpha: f64) -> f64 {
    (9.0 * (r - 1.0) + 2.0 * alpha) / (3.0 - r)
}

fn validate_interpolation_exponent(r: f64) -> Result<()> {
    if r > 1.0 && r < 3.0 {
        Ok(())
    } else {
        Err(LabError::InvalidConfig(format!(
            "interpolation exponent must lie in (1, 3), got {r}"
        )))
    }
}

/// `int w(v) f |log f|`.
fn weighted_abs_entropy<W: Fn([f64; 3]) -> f64>(f: &GridDistribution, weight: W) -> f64 {
    let vals = f.values();
    f.grid().integrate_with(|k, v| {
        let x = vals[k];
        if x < ENTROPY_CUTOFF {
            0.0
        } else {
            weight(v) * (x * x.ln()).abs()
        }
    })
}

/// Both sides of the polynomial interpolation bound.
pub fn interpolation_sides(f: &GridDistribution, r: f64, alpha: f64) -> Result<(f64, f64)> {
    validate_interpolation_exponent(r)?;
    let lhs = weighted_abs_entropy(f, |v| bracket(v).powf(alpha));
    let rhs = moment_poly(f, alpha + 2.0)
        + moment_poly(f, interpolation_theta(r, alpha)).powf(0.5 * (3.0 - r))
            * lp_norm_weighted(f, 3.0, -3.0)?.powf(1.5 * (r - 1.0))
        + 1.0;
    Ok((lhs, rhs))
}

/// Both sides of the stretched-exponential interpolation bound.
pub fn interpolation_sides_stretched(
    f: &GridDistribution,
    r: f64,
    s: f64,
    kappa: f64,
    kappa1: f64,
    kappa2: f64,
) -> Result<(f64, f64)> {
    validate_interpolation_exponent(r)?;
    if !(s > 0.0 && s < 2.0) || !(kappa > 0.0) {
        return Err(LabError::InvalidConfig(format!(
            "need s in (0, 2) and kappa > 0, got s = {s}, kappa = {kappa}"
        )));
    }
    if !(kappa1 > kappa) || !(kappa2 > 2.0 * kappa / (3.0 - r)) {
        return Err(LabError::InvalidConfig(format!(
            "need kappa1 > kappa and kappa2 > 2 kappa/(3 - r), got kappa1 = {kappa1}, kappa2 = {kappa2}"
        )));
    }
    moment_exp(f, s, kappa)?;
    let lhs = weighted_abs_entropy(f, |v| (kappa * bracket(v).powf(s)).exp());
    let rhs = moment_exp(f, s, kappa1)?
        + moment_exp(f, s, kappa2)?.powf(0.5 * (3.0 - r)) * lp_norm_weighted(f, 3.0, -3.0)?.powf(1.5 * (r - 1.0))
        + 1.0;
    Ok((lhs, rhs))
}

/// Empirical constant of the polynomial interpolation bound (largest ratio).
pub fn check_interpolation_lemma(members: &[GridDistribution], r: f64, alpha: f64) -> Result<InequalityVerdict> {
    require_members(members, "interpolation bound")?;
    let mut c: f64 = 0.0;
    for f in members {
        let (lhs, rhs) = interpolation_sides(f, r, alpha)?;
        c = c.max(lhs / rhs);
    }
    Ok(
        InequalityVerdict::positive_constant("interpolation", c, members_digest(members)).with_note(format!(
            "r = {r}, alpha = {alpha}, theta = {}",
            interpolation_theta(r, alpha)
        )),
    )
}

/// Empirical constant of the stretched-exponential interpolation bound.
pub fn check_interpolation_lemma_stretched(
    members: &[GridDistribution],
    r: f64,
    s: f64,
    kappa: f64,
    kappa1: f64,
    kappa2: f64,
) -> Result<InequalityVerdict> {
    require_members(members, "interpolation bound")?;
    let mut c: f64 = 0.0;
    for f in members {
        let (lhs, rhs) = interpolation_sides_stretched(f, r, s, kappa, kappa1, kappa2)?;
        c = c.max(lhs / rhs);
    }
    Ok(
        InequalityVerdict::positive_constant("interpolation_stretched", c, members_digest(members)).with_note(format!(
            "r = {r}, s = {s}, kappa = {kappa}, kappa1 = {kappa1}, kappa2 = {kappa2}"
        )),
    )
}

/// Central-difference divergence of the rows of `a(z)`.
pub fn numerical_drift(z: [f64; 3], gamma: f64, step: f64) -> [f64; 3] {
    let mut b = [0.0; 3];
    for j in 0..3 {
        let mut zp = z;
        let mut zm = z;
        zp[j] += step;
        zm[j] -= step;
        let (ap, am) = (diffusion_matrix(zp, gamma), diffusion_matrix(zm, gamma));
        for i in 0..3 {
            b[i] += (ap[i][j] - am[i][j]) / (2.0 * step);
        }
    }
    b
}

/// Largest relative deviation of the differenced drift from `-2 |z|^gamma z`
/// over `samples` seeded points, bounded by `1e-6`.
pub fn check_b_field_consistency(gamma: f64, samples: usize, seed: u64) -> Result<InequalityVerdict> {
    crate::kernel::validate_exponent(gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut projection_defect: f64 = 0.0;
    let mut radial_defect: f64 = 0.0;
    let mut points = Vec::with_capacity(samples);
    while points.len() < samples {
        let z: [f64; 3] = [
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        ];
        let r = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
        if r < 1e-2 {
            continue;
        }
        points.push(z);
        let exact = drift_vector(z, gamma);
        let numeric = numerical_drift(z, gamma, r * 1e-4);
        let norm = (exact[0] * exact[0] + exact[1] * exact[1] + exact[2] * exact[2]).sqrt();
        let err = ((numeric[0] - exact[0]).powi(2) + (numeric[1] - exact[1]).powi(2) + (numeric[2] - exact[2]).powi(2))
            .sqrt();
        worst = worst.max(err / norm);
        let a = diffusion_matrix(z, gamma);
        for row in a {
            projection_defect =
                projection_defect.max((row[0] * z[0] + row[1] * z[1] + row[2] * z[2]).abs() / r.powf(gamma + 3.0));
        }
        let bz = exact[0] * z[0] + exact[1] * z[1] + exact[2] * z[2];
        radial_defect = radial_defect.max((bz + 2.0 * r.powf(gamma + 2.0)).abs() / r.powf(gamma + 2.0));
    }
    let digest = digest_values(points.iter().map(|p| p.as_slice()));
    Ok(
        InequalityVerdict::error_bound("b_field", worst, 1e-6, digest).with_note(format!(
            "gamma = {gamma}; |a(z) z| rel {projection_defect:.2e}; <b,z> + 2|z|^(gamma+2) rel {radial_defect:.2e}"
        )),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{anisotropic_gaussian, standard_maxwellian};
    use crate::grid::VelocityGrid;
    use std::sync::Arc;

    #[test]
    fn bakry_emery_minimum() {
        assert_eq!(hessian_scalar(3.0), 0.625);
        let eig = SymmetricEigen::new(potential_hessian([0.0; 3])).eigenvalues;
        assert!(eig.iter().all(|&x| (x - 4.0).abs() < 1e-15));
        let v = check_bakry_emery(1000, 7);
        assert!(v.holds, "{v:?}");
        assert!((v.lhs - 0.625).abs() < 1e-12);
    }

    #[test]
    fn coulomb_drift_matches_differences() {
        let v = check_b_field_consistency(-3.0, 200, 1).unwrap();
        assert!(v.holds, "{v:?}");
    }

    #[test]
    fn smooth_cutoff_profile() {
        assert_eq!(Cutoff::Smooth.profile(0.3), 1.0);
        assert_eq!(Cutoff::Smooth.profile(1.2), 0.0);
        let mid = Cutoff::Smooth.profile(0.75);
        assert!((mid - 0.5).abs() < 1e-15);
    }

    #[test]
    fn angular_functional_isotropic() {
        let g = Arc::new(VelocityGrid::new(8.0, 48).unwrap());
        let mu = standard_maxwellian(g);
        let s = s_f_functional(&mu, 0, 1, 64).unwrap();
        assert!(s.spread < 1e-6);
        assert!(s.exact_min > 0.0 && (s.exact_min - s.grid_min).abs() < 1e-6);
        assert!(s_f_functional(&mu, 1, 1, 64).is_err());
        assert!(s_f_functional(&mu, 0, 1, 8).is_err());
    }

    #[test]
    fn reconstruction_rejects_equal_indices() {
        let g = Arc::new(VelocityGrid::new(8.0, 12).unwrap());
        let f = anisotropic_gaussian(g, [1.5, 1.0, 0.5]).unwrap();
        assert!(reconstruct_score(&f, 2, 2).is_err());
        assert!(reconstruct_score(&f, 0, 1).unwrap().is_some());
    }

    #[test]
    fn delta_floor_value() {
        assert!((delta_floor(0.0) - 7.18e-13).abs() < 1e-15);
        assert!((partition_floor(-3.0) - 2f64.powf(-5.5)).abs() < 1e-18);
    }
}
