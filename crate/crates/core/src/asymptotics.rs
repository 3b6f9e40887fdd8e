//! Long-time behaviour along solver trajectories: moment envelopes, the
//! generalized Gronwall bound, admissible decay schedules and decay-rate fits.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::functionals::{moment_exp, moment_poly};
use crate::inequalities::InequalityVerdict;
use crate::io::digest_values;
use crate::solver::Trajectory;

/// Smallest relative entropy admitted as a decay sample.
pub const DECAY_FLOOR: f64 = 1e-12;

/// Minimum number of samples for a decay fit.
pub const MIN_DECAY_SAMPLES: usize = 10;

/// Which moment a [`MomentEnvelope`] follows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MomentKind {
    Polynomial { order: f64 },
    Stretched { s: f64, kappa: f64 },
}

/// Affine envelope `M(t) <= intercept + slope * t` over the sampled moments.
#[derive(Debug, Clone, Serialize)]
pub struct MomentEnvelope {
    pub kind: MomentKind,
    pub samples: Vec<(f64, f64)>,
    pub intercept: f64,
    pub slope: f64,
    /// Exponent `e` in the growth bound `C l^e` on the slope (polynomial moments only).
    pub slope_bound_exponent: Option<f64>,
}

impl MomentEnvelope {
    /// Least-squares slope with the intercept raised until every sample lies below.
    pub fn fit(kind: MomentKind, samples: Vec<(f64, f64)>, gamma: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(LabError::InsufficientData("no moment samples".into()));
        }
        if samples.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(LabError::InvalidConfig("moment samples are not time-ordered".into()));
        }
        let slope = if samples.len() < 2 {
            0.0
        } else {
            let n = samples.len() as f64;
            let tm = samples.iter().map(|s| s.0).sum::<f64>() / n;
            let mm = samples.iter().map(|s| s.1).sum::<f64>() / n;
            let stt: f64 = samples.iter().map(|s| (s.0 - tm).powi(2)).sum();
            let stm: f64 = samples.iter().map(|s| (s.0 - tm) * (s.1 - mm)).sum();
            if stt > 0.0 {
                stm / stt
            } else {
                0.0
            }
        };
        let intercept = samples
            .iter()
            .map(|&(t, m)| m - slope * t)
            .fold(f64::NEG_INFINITY, f64::max);
        let slope_bound_exponent = match kind {
            MomentKind::Polynomial { order } => moment_slope_exponent(order, gamma).ok(),
            MomentKind::Stretched { .. } => None,
        };
        let envelope = Self {
            kind,
            samples,
            intercept,
            slope,
            slope_bound_exponent,
        };
        assert!(envelope.dominates(), "moment envelope fails to dominate its samples");
        Ok(envelope)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }

    pub fn dominates(&self) -> bool {
        self.samples.iter().all(|&(t, m)| {
            let e = self.value(t);
            m <= e + 1e-14 * e.abs().max(m.abs())
        })
    }

    pub fn verdict(&self, digest: String) -> InequalityVerdict {
        let name = match self.kind {
            MomentKind::Polynomial { order } => format!("moment_envelope[{order}]"),
            MomentKind::Stretched { s, kappa } => format!("moment_envelope[{s},{kappa}]"),
        };
        let admissible = self.slope.is_finite() && self.intercept.is_finite() && self.dominates();
        InequalityVerdict::new(&name, f64::from(u8::from(admissible)), 1.0, 0.0, self.slope, digest)
            .with_note(format!("M(t) <= {:.6e} + {:.6e} t", self.intercept, self.slope))
    }
}

/// Exponent `e` in the slope bound `C l^e` of the polynomial moment `M_l`.
pub fn moment_slope_exponent(order: f64, gamma: f64) -> Result<f64> {
    if gamma > -2.0 && gamma < 0.0 || gamma == -2.0 {
        Ok((order + gamma) / 2.0)
    } else if gamma > -4.0 && gamma < -2.0 {
        Ok((order - 6.0) * (gamma + 1.0).abs() / (gamma + 4.0) - gamma)
    } else {
        Err(LabError::InvalidConfig(format!(
            "moment slope bound needs -4 < gamma < 0, got {gamma}"
        )))
    }
}

/// Envelopes of `M_l` for each polynomial order and `M_{s,kappa}` for each pair,
/// evaluated on the trajectory snapshots.
pub fn track_moments(
    trajectory: &Trajectory,
    orders: &[f64],
    exp_params: &[(f64, f64)],
) -> Result<Vec<MomentEnvelope>> {
    if trajectory.snapshots.is_empty() {
        return Err(LabError::InsufficientData("trajectory has no snapshots".into()));
    }
    let mut out = Vec::with_capacity(orders.len() + exp_params.len());
    for &order in orders {
        let samples = trajectory
            .snapshots
            .iter()
            .map(|(t, f)| (*t, moment_poly(f, order)))
            .collect();
        out.push(MomentEnvelope::fit(
            MomentKind::Polynomial { order },
            samples,
            trajectory.gamma,
        )?);
    }
    for &(s, kappa) in exp_params {
        let samples = trajectory
            .snapshots
            .iter()
            .map(|(t, f)| Ok((*t, moment_exp(f, s, kappa)?)))
            .collect::<Result<Vec<_>>>()?;
        out.push(MomentEnvelope::fit(
            MomentKind::Stretched { s, kappa },
            samples,
            trajectory.gamma,
        )?);
    }
    Ok(out)
}

/// `M_5(t) <= C (1+t)^{3/(l-2)}` along a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct FifthMomentBound {
    pub order: f64,
    pub exponent: f64,
    /// Smallest constant for which the bound holds on the samples.
    pub fitted_constant: f64,
    /// Constant obtained by interpolating `M_5` between `M_2` and the affine `M_l` envelope.
    pub interpolated_constant: f64,
    pub samples: Vec<(f64, f64)>,
}

impl FifthMomentBound {
    pub fn holds(&self) -> bool {
        self.samples
            .iter()
            .all(|&(t, m5)| m5 <= self.interpolated_constant * (1.0 + t).powf(self.exponent) * (1.0 + 1e-12))
    }

    pub fn verdict(&self, digest: String) -> InequalityVerdict {
        let margin = self
            .samples
            .iter()
            .map(|&(t, m5)| self.interpolated_constant * (1.0 + t).powf(self.exponent) / m5)
            .fold(f64::INFINITY, f64::min);
        InequalityVerdict::new(
            "fifth_moment_envelope",
            margin,
            1.0,
            1e-12,
            self.fitted_constant,
            digest,
        )
        .with_note(format!(
            "fitted C = {:.6e}, interpolated C = {:.6e}, exponent 3/(l-2) = {:.6}",
            self.fitted_constant, self.interpolated_constant, self.exponent
        ))
    }
}

/// Fifth-moment power envelope using the `M_l` envelope for `l > 5`.
pub fn fifth_moment_bound(trajectory: &Trajectory, envelope: &MomentEnvelope) -> Result<FifthMomentBound> {
    let order = match envelope.kind {
        MomentKind::Polynomial { order } if order > 5.0 => order,
        _ => {
            return Err(LabError::InvalidConfig(
                "fifth-moment bound needs a polynomial envelope of order > 5".into(),
            ))
        }
    };
    let exponent = 3.0 / (order - 2.0);
    let samples: Vec<(f64, f64)> = trajectory
        .snapshots
        .iter()
        .map(|(t, f)| (*t, moment_poly(f, 5.0)))
        .collect();
    let m2 = trajectory
        .snapshots
        .iter()
        .map(|(_, f)| moment_poly(f, 2.0))
        .fold(0.0, f64::max);
    let fitted_constant = samples
        .iter()
        .map(|&(t, m)| m / (1.0 + t).powf(exponent))
        .fold(0.0, f64::max);
    let growth = envelope.intercept.max(envelope.slope).max(0.0);
    let interpolated_constant = m2.powf((order - 5.0) / (order - 2.0)) * growth.powf(exponent);
    Ok(FifthMomentBound {
        order,
        exponent,
        fitted_constant,
        interpolated_constant,
        samples,
    })
}

/// Constants of `x' <= -C1 (1+t)^{-a} x + C2 (1+t)^{-b}`, `x(0) = C0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GronwallParams {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub a: f64,
    pub b: f64,
}

impl GronwallParams {
    pub fn new(c0: f64, c1: f64, c2: f64, a: f64, b: f64) -> Result<Self> {
        let p = Self { c0, c1, c2, a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.a) {
            return Err(LabError::InvalidConfig(format!("need 0 <= a < 1, got a = {}", self.a)));
        }
        if self.b.is_nan() || self.b <= self.a {
            return Err(LabError::InvalidConfig(format!(
                "need b > a, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if !(self.c0 >= 0.0 && self.c1 > 0.0 && self.c2 >= 0.0)
            || !(self.c0.is_finite() && self.c1.is_finite() && self.c2.is_finite())
        {
            return Err(LabError::InvalidConfig(format!(
                "need C0 >= 0, C1 > 0, C2 >= 0, got ({}, {}, {})",
                self.c0, self.c1, self.c2
            )));
        }
        Ok(())
    }

    /// `Lambda(t) = C1 int_0^t (1+tau)^{-a} dtau`.
    pub fn decay_integral(&self, t: f64) -> f64 {
        let e = 1.0 - self.a;
        self.c1 * ((1.0 + t).powf(e) - 1.0) / e
    }

    /// Right-hand side of the equality ODE.
    pub fn rate(&self, t: f64, x: f64) -> f64 {
        -self.c1 * (1.0 + t).powf(-self.a) * x + self.c2 * (1.0 + t).powf(-self.b)
    }
}

/// Terms of the closed-form Gronwall bound at one time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GronwallTerms {
    pub initial: f64,
    pub leading: f64,
    pub far_history: f64,
    pub near_history: f64,
    pub total: f64,
}

/// Explicit upper bound for solutions of `x' <= -C1 (1+t)^{-a} x + C2 (1+t)^{-b}`.
///
/// The source is integrated by parts against `e^{Lambda}` and the remaining
/// integral split at `t/2`, giving
/// `C0 e^{-Lambda(t)} + (C2/C1) [ (1+t)^{a-b} - e^{-Lambda(t)} + e^{-(Lambda(t)-Lambda(t/2))}
/// + (b-a) (1+t/2)^{a-b-1} (1+t)^a / C1 ]`.
pub fn gronwall_terms(params: &GronwallParams, t: f64) -> Result<GronwallTerms> {
    params.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(LabError::InvalidConfig(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    let GronwallParams { c0, c1, c2, a, b } = *params;
    let lambda = params.decay_integral(t);
    let decay = (-lambda).exp();
    let ratio = c2 / c1;
    let initial = c0 * decay;
    let leading = ratio * ((1.0 + t).powf(a - b) - decay);
    let far_history = ratio * (-(lambda - params.decay_integral(t / 2.0))).exp();
    let near_history = ratio * (b - a) * (1.0 + t / 2.0).powf(a - b - 1.0) * (1.0 + t).powf(a) / c1;
    Ok(GronwallTerms {
        initial,
        leading,
        far_history,
        near_history,
        total: initial + leading + far_history + near_history,
    })
}

pub fn gronwall_closed_form(params: &GronwallParams, t: f64) -> Result<f64> {
    Ok(gronwall_terms(params, t)?.total)
}

/// `d log x / d log(1+t)` by a centred difference of step `delta` in `log(1+t)`.
pub fn log_slope<F: Fn(f64) -> Result<f64>>(x: F, t: f64, delta: f64) -> Result<f64> {
    let s = (1.0 + t).ln();
    let hi = x((s + delta).exp() - 1.0)?;
    let lo = x((s - delta).exp() - 1.0)?;
    Ok((hi.ln() - lo.ln()) / (2.0 * delta))
}

/// Adaptive Dormand-Prince 5(4) integration of a scalar ODE, reporting the
/// solution at each (nondecreasing) output time.
pub fn integrate_scalar<F: Fn(f64, f64) -> f64>(
    rhs: F,
    t0: f64,
    x0: f64,
    outputs: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<f64>> {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    const MAX_STEPS: usize = 10_000_000;

    if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.first().is_some_and(|&t| t < t0) {
        return Err(LabError::InvalidConfig(
            "output times must be nondecreasing from t0".into(),
        ));
    }
    let mut t = t0;
    let mut x = x0;
    let mut h = outputs.last().map_or(1e-3, |&end| ((end - t0) * 1e-4).max(1e-8));
    let mut out = Vec::with_capacity(outputs.len());
    let mut steps = 0;
    for &target in outputs {
        while t < target {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(LabError::Overflow("ODE integrator exceeded its step budget".into()));
            }
            let step = h.min(target - t);
            let mut k = [0.0; 7];
            for i in 0..7 {
                let xi = x + step * (0..i).map(|j| A[i][j] * k[j]).sum::<f64>();
                k[i] = rhs(t + C[i] * step, xi);
            }
            let x5 = x + step * (0..7).map(|i| B5[i] * k[i]).sum::<f64>();
            let x4 = x + step * (0..7).map(|i| B4[i] * k[i]).sum::<f64>();
            let scale = atol + rtol * x.abs().max(x5.abs());
            let err = (x5 - x4).abs() / scale;
            if !err.is_finite() {
                return Err(LabError::NonFinite { node: 0, value: x5 });
            }
            if err <= 1.0 {
                t = if step == target - t { target } else { t + step };
                x = x5;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = step * factor;
        }
        out.push(x);
    }
    Ok(out)
}

/// High-accuracy solution of the equality ODE `x' = -C1 (1+t)^{-a} x + C2 (1+t)^{-b}`.
pub fn gronwall_numeric(params: &GronwallParams, times: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    integrate_scalar(|t, x| params.rate(t, x), 0.0, params.c0, times, 1e-11, 1e-300)
}

/// Constants of the stretched-exponential inequality
/// `x' <= -C1 lambda(t) x + C2 g(t)` with
/// `lambda(t) = (1+t)^{-3/(3+s)} log(1+t)^q` and
/// `g(t) = (1+t)^{s/(3+s)} log(1+t)^q exp(-kappa0 (1+t)^{s/(3+s)} log(1+t)^{-3/(3+s)})`,
/// `q = -3/(3+s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StretchedGronwallParams {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub s: f64,
    pub kappa0: f64,
}

impl StretchedGronwallParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s <= 0.5) {
            return Err(LabError::InvalidConfig(format!("need 0 < s <= 1/2, got {}", self.s)));
        }
        if !(self.c0 >= 0.0 && self.c1 > 0.0 && self.c2 >= 0.0 && self.kappa0 > 0.0) {
            return Err(LabError::InvalidConfig(
                "need C0 >= 0, C1 > 0, C2 >= 0, kappa0 > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        -3.0 / (3.0 + self.s)
    }

    /// `(1+t)^{s/(3+s)} log(1+t)^{-3/(3+s)}`.
    pub fn profile(&self, t: f64) -> f64 {
        stretched_profile(self.s, t)
    }

    fn weight(&self, t: f64) -> f64 {
        let l = t.ln_1p();
        if l <= 0.0 {
            return f64::INFINITY;
        }
        (1.0 + t).powf(-3.0 / (3.0 + self.s)) * l.powf(self.q())
    }

    fn source(&self, t: f64) -> f64 {
        let l = t.ln_1p();
        if l <= 0.0 {
            return 0.0;
        }
        let p = self.profile(t);
        let tail = (-self.kappa0 * p).exp();
        if tail == 0.0 {
            return 0.0;
        }
        (1.0 + t).powf(self.s / (3.0 + self.s)) * l.powf(self.q()) * tail
    }
}

/// `(1+t)^{s/(3+s)} log(1+t)^{-3/(3+s)}`, the stretched decay profile.
pub fn stretched_profile(s: f64, t: f64) -> f64 {
    (1.0 + t).powf(s / (3.0 + s)) * t.ln_1p().powf(-3.0 / (3.0 + s))
}

/// Solution of the stretched equality ODE, evaluated by adaptive quadrature
/// in the variable `u = t^{s/(3+s)}` which removes the singularity at `t = 0`.
pub fn stretched_gronwall_bound(params: &StretchedGronwallParams, times: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    let m = (3.0 + params.s) / params.s;
    let rhs = |u: f64, x: f64| {
        if u <= 0.0 {
            return -params.c1 * m * x;
        }
        let t = u.powf(m);
        let jac = m * u.powf(m - 1.0);
        let w = params.weight(t);
        let decay = if w.is_finite() { w * jac } else { m };
        -params.c1 * decay * x + params.c2 * params.source(t) * jac
    };
    let us: Vec<f64> = times.iter().map(|&t| t.max(0.0).powf(1.0 / m)).collect();
    integrate_scalar(rhs, 0.0, params.c0, &us, 1e-10, 1e-300)
}

/// Decay schedule for the algebraic rate given `M_l` control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgebraicSchedule {
    pub order: f64,
    pub k: f64,
    /// Open window `(2/(3k), (3k-1)/(3(3k+5)))` for the radius exponent `nu`.
    pub nu_window: (f64, f64),
    pub nu: f64,
    pub a: f64,
    pub b: f64,
    /// Supremum of the achievable algebraic exponents as `nu` runs over the window.
    pub beta_sup: f64,
}

impl AlgebraicSchedule {
    pub fn beta(&self) -> f64 {
        self.b - self.a
    }

    pub fn gronwall(&self, c0: f64, c1: f64, c2: f64) -> Result<GronwallParams> {
        GronwallParams::new(c0, c1, c2, self.a, self.b)
    }
}

/// Decay schedule for the stretched-exponential rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StretchedSchedule {
    pub s: f64,
    pub kappa: f64,
    pub exponent: f64,
    pub log_power: f64,
    pub q: f64,
    pub kappa0: f64,
}

/// Input to [`choose_schedules`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleRequest {
    Algebraic { order: f64 },
    Stretched { s: f64, kappa: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Schedule {
    Algebraic(AlgebraicSchedule),
    Stretched(StretchedSchedule),
}

pub fn choose_schedules(request: ScheduleRequest) -> Result<Schedule> {
    match request {
        ScheduleRequest::Algebraic { order } => algebraic_schedule(order).map(Schedule::Algebraic),
        ScheduleRequest::Stretched { s, kappa } => stretched_schedule(s, kappa).map(Schedule::Stretched),
    }
}

/// Algebraic exponent supremum in terms of the moment order.
pub fn beta_sup_from_order(order: f64) -> f64 {
    (2.0 * order * order - 25.0 * order + 57.0) / (9.0 * (order - 2.0))
}

/// Algebraic exponent supremum in terms of `k = (2l - 9)/3`.
pub fn beta_sup_from_k(k: f64) -> f64 {
    k / 3.0 * (3.0 * k - 1.0) / (3.0 * k + 5.0) - 2.0 / 3.0
}

/// Choose `nu` at the midpoint of its window, with `a = 3 nu + 6/(5+3k)` and
/// `b = a + nu k - 2/3`.
pub fn algebraic_schedule(order: f64) -> Result<AlgebraicSchedule> {
    if !(order > 9.5) || !order.is_finite() {
        return Err(LabError::InvalidConfig(format!(
            "algebraic decay needs a moment order l > 19/2, got {order}"
        )));
    }
    let k = (2.0 * order - 9.0) / 3.0;
    let lower = 2.0 / (3.0 * k);
    let upper = (3.0 * k - 1.0) / (3.0 * (3.0 * k + 5.0));
    if !(lower < upper) {
        return Err(LabError::InvalidConfig(format!(
            "empty window for nu at l = {order}: ({lower}, {upper})"
        )));
    }
    let nu = 0.5 * (lower + upper);
    let a = 3.0 * nu + 6.0 / (5.0 + 3.0 * k);
    let b = a + nu * k - 2.0 / 3.0;
    let beta_sup = beta_sup_from_order(order);
    let from_k = beta_sup_from_k(k);
    assert!(
        (beta_sup - from_k).abs() <= 1e-12 * beta_sup.abs().max(1.0),
        "exponent supremum forms disagree: {beta_sup} vs {from_k}"
    );
    Ok(AlgebraicSchedule {
        order,
        k,
        nu_window: (lower, upper),
        nu,
        a,
        b,
        beta_sup,
    })
}

/// Stretched schedule: `q = -3/(3+s)`, `kappa0 = kappa/3` inside `(0, 2 kappa/3)`.
pub fn stretched_schedule(s: f64, kappa: f64) -> Result<StretchedSchedule> {
    if !(s > 0.0 && s <= 0.5) {
        return Err(LabError::InvalidConfig(format!(
            "stretched decay needs 0 < s <= 1/2, got {s}"
        )));
    }
    if !(kappa > 0.0) {
        return Err(LabError::InvalidConfig(format!(
            "stretched decay needs kappa > 0, got {kappa}"
        )));
    }
    if s == 0.5 && kappa >= 2.0 / std::f64::consts::E {
        return Err(LabError::InvalidConfig(format!(
            "at s = 1/2 stretched decay needs kappa < 2/e, got {kappa}"
        )));
    }
    Ok(StretchedSchedule {
        s,
        kappa,
        exponent: s / (3.0 + s),
        log_power: 3.0 / (3.0 + s),
        q: -3.0 / (3.0 + s),
        kappa0: kappa / 3.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayMode {
    Algebraic,
    Stretched,
}

impl std::str::FromStr for DecayMode {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "algebraic" => Ok(Self::Algebraic),
            "stretched" => Ok(Self::Stretched),
            other => Err(LabError::InvalidConfig(format!("unknown decay mode `{other}`"))),
        }
    }
}

/// Fitted decay law for `H(f(t)|mu)`.
///
/// Algebraic: `log H = intercept - beta log(1+t)`.
/// Stretched: `log H = intercept - rate (1+t)^{s/(3+s)} log(1+t)^{-3/(3+s)}`.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub mode: DecayMode,
    /// `beta` (algebraic) or `s` (stretched).
    pub exponent: f64,
    /// `rate` in stretched mode; equals `exponent` in algebraic mode.
    pub rate: f64,
    pub power: f64,
    pub log_power: f64,
    pub intercept: f64,
    /// Weighted root-mean-square residual in log space.
    pub residual: f64,
    /// Amount added to the least-squares intercept so the curve bounds every sample.
    pub envelope_shift: f64,
    pub samples: usize,
}

impl DecayFit {
    /// Fitted curve with the envelope shift applied.
    pub fn envelope(&self, t: f64) -> f64 {
        (self.intercept + self.envelope_shift - self.rate * self.regressor(t)).exp()
    }

    fn regressor(&self, t: f64) -> f64 {
        match self.mode {
            DecayMode::Algebraic => t.ln_1p(),
            DecayMode::Stretched => stretched_profile(self.exponent, t),
        }
    }

    pub fn exponent_positive(&self) -> bool {
        self.exponent > 0.0 && self.rate > 0.0
    }
}

/// Weighted least squares of `y` on `[1, x]`; returns (intercept, slope, rms residual).
fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        sxx += w[i] * (x[i] - xm) * (x[i] - xm);
        sxy += w[i] * (x[i] - xm) * (y[i] - ym);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = ym - slope * xm;
    let ss: f64 = (0..x.len())
        .map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2))
        .sum();
    (intercept, slope, (ss / sw).sqrt())
}

/// Trapezoid weights in `log(1+t)`, so samples count uniformly in that variable.
fn log_time_weights(times: &[f64]) -> Vec<f64> {
    let s: Vec<f64> = times.iter().map(|t| t.ln_1p()).collect();
    let n = s.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { s[i] - s[i - 1] } else { 0.0 };
            let right = if i + 1 < n { s[i + 1] - s[i] } else { 0.0 };
            let w = 0.5 * (left + right);
            if w > 0.0 {
                w
            } else {
                f64::MIN_POSITIVE
            }
        })
        .collect()
}

/// Fit a decay law to samples `(t, H)`; samples with `H <= 1e-12` are dropped.
pub fn decay_fit(samples: &[(f64, f64)], mode: DecayMode) -> Result<DecayFit> {
    let kept: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(t, h)| h > DECAY_FLOOR && h.is_finite() && t >= 0.0)
        .filter(|&(t, _)| mode == DecayMode::Algebraic || t > 0.0)
        .collect();
    if kept.len() < MIN_DECAY_SAMPLES {
        return Err(LabError::InsufficientData(format!(
            "decay fit needs at least {MIN_DECAY_SAMPLES} samples with H > {DECAY_FLOOR:e}, got {}",
            kept.len()
        )));
    }
    if kept.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(LabError::InvalidConfig(
            "decay samples must be strictly time-ordered".into(),
        ));
    }
    let times: Vec<f64> = kept.iter().map(|s| s.0).collect();
    let logs: Vec<f64> = kept.iter().map(|s| s.1.ln()).collect();
    let range =
        logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - logs.iter().cloned().fold(f64::INFINITY, f64::min);
    if range < 1e-6 {
        return Err(LabError::InsufficientData(format!(
            "relative entropy spans only {range:e} in log space; no decay to fit"
        )));
    }
    let weights = log_time_weights(&times);
    let fit_for = |regressor: &dyn Fn(f64) -> f64| {
        let x: Vec<f64> = times.iter().map(|&t| regressor(t)).collect();
        let (intercept, slope, residual) = weighted_line(&x, &logs, &weights);
        let shift = x
            .iter()
            .zip(&logs)
            .map(|(x, y)| y - intercept - slope * x)
            .fold(0.0, f64::max);
        (intercept, -slope, residual, shift)
    };
    let fit = match mode {
        DecayMode::Algebraic => {
            let (intercept, beta, residual, shift) = fit_for(&|t: f64| t.ln_1p());
            DecayFit {
                mode,
                exponent: beta,
                rate: beta,
                power: 0.0,
                log_power: 1.0,
                intercept,
                residual,
                envelope_shift: shift,
                samples: kept.len(),
            }
        }
        DecayMode::Stretched => {
            let objective = |s: f64| fit_for(&|t: f64| stretched_profile(s, t)).2;
            let s = golden_section(objective, 1e-3, 3.0, 1e-12);
            let (intercept, rate, residual, shift) = fit_for(&|t: f64| stretched_profile(s, t));
            DecayFit {
                mode,
                exponent: s,
                rate,
                power: s / (3.0 + s),
                log_power: 3.0 / (3.0 + s),
                intercept,
                residual,
                envelope_shift: shift,
                samples: kept.len(),
            }
        }
    };
    Ok(fit)
}

/// Relative entropy samples `(t, H(f|mu))` from the solver diagnostics.
pub fn relative_entropy_samples(trajectory: &Trajectory) -> Vec<(f64, f64)> {
    trajectory
        .diagnostics
        .iter()
        .map(|d| (d.time, d.relative_entropy))
        .collect()
}

pub fn decay_fit_trajectory(trajectory: &Trajectory, mode: DecayMode) -> Result<DecayFit> {
    decay_fit(&relative_entropy_samples(trajectory), mode)
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol * (1.0 + lo.abs()) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// One row of the long-format decay table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayRow {
    pub time: f64,
    pub relative_entropy: f64,
    pub dissipation: f64,
    pub bound: f64,
    pub envelope: f64,
}

/// Output of [`differential_inequality_monitor`].
#[derive(Debug, Clone, Serialize)]
pub struct MonitorReport {
    pub schedule: AlgebraicSchedule,
    pub c1: f64,
    pub c2: f64,
    pub gronwall: Option<GronwallParams>,
    pub rows: Vec<DecayRow>,
    pub verdicts: Vec<InequalityVerdict>,
}

/// Fit `D >= c1 (1+t)^{-a} H - c2 (1+t)^{-b}` along a trajectory and overlay
/// the resulting Gronwall bound on the measured relative entropy.
///
/// `c1` is the median of `D (1+t)^a / H` over the samples; `c2` is then the
/// smallest value making the inequality hold at every sample.
pub fn differential_inequality_monitor(trajectory: &Trajectory, order: f64) -> Result<MonitorReport> {
    let schedule = algebraic_schedule(order)?;
    let (a, b) = (schedule.a, schedule.b);
    let diag = &trajectory.diagnostics;
    let rows_in: Vec<[f64; 3]> = diag
        .iter()
        .map(|d| [d.time, d.relative_entropy, d.dissipation])
        .collect();
    let digest = digest_values(rows_in.iter().map(|r| &r[..]));

    let mut ratios: Vec<f64> = diag
        .iter()
        .filter(|d| d.relative_entropy > DECAY_FLOOR && d.dissipation.is_finite())
        .map(|d| d.dissipation * (1.0 + d.time).powf(a) / d.relative_entropy)
        .collect();
    if ratios.is_empty() {
        let rows = diag
            .iter()
            .map(|d| DecayRow {
                time: d.time,
                relative_entropy: d.relative_entropy,
                dissipation: d.dissipation,
                bound: 0.0,
                envelope: 0.0,
            })
            .collect();
        let verdict = InequalityVerdict::vacuous(
            "differential_inequality",
            digest,
            "relative entropy vanishes along the trajectory",
        );
        return Ok(MonitorReport {
            schedule,
            c1: 0.0,
            c2: 0.0,
            gronwall: None,
            rows,
            verdicts: vec![verdict],
        });
    }
    ratios.sort_by(f64::total_cmp);
    let c1 = ratios[ratios.len() / 2];
    let c2 = diag
        .iter()
        .map(|d| {
            let t1 = 1.0 + d.time;
            (c1 * t1.powf(-a) * d.relative_entropy - d.dissipation) * t1.powf(b)
        })
        .fold(0.0, f64::max);
    let c0 = diag.first().map_or(0.0, |d| d.relative_entropy);
    let params = GronwallParams::new(c0, c1, c2, a, b)?;

    let slack = diag
        .iter()
        .map(|d| {
            let t1 = 1.0 + d.time;
            d.dissipation - c1 * t1.powf(-a) * d.relative_entropy + c2 * t1.powf(-b)
        })
        .fold(f64::INFINITY, f64::min);
    let fit = decay_fit_trajectory(trajectory, DecayMode::Algebraic).ok();
    let mut rows = Vec::with_capacity(diag.len());
    let mut margin = f64::INFINITY;
    for d in diag {
        let bound = gronwall_closed_form(&params, d.time)?;
        if d.relative_entropy > 0.0 {
            margin = margin.min(bound / d.relative_entropy);
        }
        rows.push(DecayRow {
            time: d.time,
            relative_entropy: d.relative_entropy,
            dissipation: d.dissipation,
            bound,
            envelope: fit.as_ref().map_or(f64::NAN, |f| f.envelope(d.time)),
        });
    }
    let mut verdicts = vec![
        InequalityVerdict::new("differential_inequality", slack, 0.0, 1e-14, c1, digest.clone())
            .with_note(format!("c1 = {c1:.6e}, c2 = {c2:.6e}, a = {a:.6}, b = {b:.6}")),
        InequalityVerdict::new("gronwall_envelope", margin, 1.0, 1e-12, c2, digest.clone())
            .with_note("minimum of bound / H(f|mu) along the trajectory"),
    ];
    if let Some(fit) = &fit {
        verdicts.push(
            InequalityVerdict::new(
                "decay_exponent",
                fit.exponent,
                schedule.beta_sup,
                0.0,
                fit.exponent,
                digest,
            )
            .with_note(format!(
                "fitted beta = {:.6}, guaranteed supremum = {:.6}, residual = {:.3e}",
                fit.exponent, schedule.beta_sup, fit.residual
            )),
        );
    }
    Ok(MonitorReport {
        schedule,
        c1,
        c2,
        gronwall: Some(params),
        rows,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_decay_reduces_to_exponential() {
        let p = GronwallParams::new(2.0, 0.7, 0.0, 0.0, 0.5).unwrap();
        for t in [0.0, 0.5, 3.0, 10.0] {
            let x = gronwall_closed_form(&p, t).unwrap();
            assert!((x - 2.0 * (-0.7 * t).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(GronwallParams::new(1.0, 1.0, 1.0, 1.0, 2.0).is_err());
        assert!(GronwallParams::new(1.0, 1.0, 1.0, 0.5, 0.5).is_err());
        assert!(GronwallParams::new(1.0, 0.0, 1.0, 0.5, 0.7).is_err());
    }

    #[test]
    fn integrator_matches_exponential() {
        let times = [0.5, 1.0, 4.0];
        let x = integrate_scalar(|_, x| -x, 0.0, 1.0, &times, 1e-12, 1e-300).unwrap();
        for (t, x) in times.iter().zip(x) {
            assert!((x - (-t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn schedule_at_twelve() {
        let s = algebraic_schedule(12.0).unwrap();
        assert_eq!(s.k, 5.0);
        assert!((s.nu_window.0 - 2.0 / 15.0).abs() < 1e-15);
        assert!((s.nu_window.1 - 14.0 / 60.0).abs() < 1e-15);
        assert!((s.a - 0.85).abs() < 1e-12);
        assert!((s.beta() - 0.25).abs() < 1e-12);
        assert!((s.beta_sup - 0.5).abs() < 1e-15);
        assert!(algebraic_schedule(9.0).is_err());
        assert!(algebraic_schedule(9.5).is_err());
    }

    #[test]
    fn slope_exponents() {
        assert_eq!(moment_slope_exponent(10.0, -3.0).unwrap(), 11.0);
        let lo = moment_slope_exponent(8.0, -2.0).unwrap();
        assert_eq!(lo, 3.0);
        assert!(moment_slope_exponent(8.0, -4.0).is_err());
    }

    #[test]
    fn stretched_exponents() {
        let s = stretched_schedule(0.5, 0.5).unwrap();
        assert!((s.exponent - 1.0 / 7.0).abs() < 1e-15);
        assert!((s.log_power - 6.0 / 7.0).abs() < 1e-15);
        assert!(stretched_schedule(0.5, 0.8).is_err());
        assert!(stretched_schedule(0.6, 0.1).is_err());
    }

    #[test]
    fn too_few_samples() {
        let samples: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 1.0 / (1.0 + i as f64))).collect();
        assert!(matches!(
            decay_fit(&samples, DecayMode::Algebraic),
            Err(LabError::InsufficientData(_))
        ));
    }
}
