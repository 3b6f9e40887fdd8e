//! Explicit time integration of `d_t f = Q(f, f)` with the conservative
//! pairwise operator, with per-step conservation and entropy diagnostics.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::collision::CollisionOperator;
use crate::dist::{invariant_moments, match_invariants, GridDistribution};
use crate::error::{LabError, Result};
use crate::functionals::{entropy, moment_poly, relative_entropy};
use crate::grid::VelocityGrid;
use crate::kernel::validate_exponent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepper {
    ExplicitEuler,
    Heun,
}

/// Nodes below this fraction of the peak density do not limit the
/// relative-change step rule; positivity still applies to every node.
pub const SIGNIFICANT_FRACTION: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub gamma: f64,
    pub half_extent: f64,
    pub points_per_axis: usize,
    /// Fixed step, or the upper bound on the step when `adaptive`.
    pub dt: f64,
    pub t_end: f64,
    pub stepper: Stepper,
    /// Choose each step so the relative change on significant nodes stays
    /// below `max_relative_change`, `f` stays positive and `H` decreases.
    pub adaptive: bool,
    pub max_relative_change: f64,
    pub conservation_projection: bool,
    pub snapshot_stride: usize,
    /// Order `l` of the monitored polynomial moment `M_l`.
    pub moment_order: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: -3.0,
            half_extent: 7.0,
            points_per_axis: 32,
            dt: 0.5,
            t_end: 20.0,
            stepper: Stepper::Heun,
            adaptive: true,
            max_relative_change: 0.05,
            conservation_projection: true,
            snapshot_stride: 10,
            moment_order: 10.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        validate_exponent(self.gamma)?;
        let bad = |msg: String| Err(LabError::InvalidConfig(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("time step must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("final time must be nonnegative, got {}", self.t_end));
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot stride must be at least 1".into());
        }
        if !(self.max_relative_change > 0.0 && self.max_relative_change < 1.0) {
            return bad(format!(
                "relative change bound must lie in (0, 1), got {}",
                self.max_relative_change
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<VelocityGrid> {
        VelocityGrid::new(self.half_extent, self.points_per_axis)
    }
}

/// Diagnostics of one recorded state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub time: f64,
    /// Step taken from this state (0 for the last record).
    pub dt: f64,
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
    pub entropy: f64,
    pub dissipation: f64,
    pub relative_entropy: f64,
    pub m5: f64,
    pub ml: f64,
    /// Largest deviation of the five invariants from their initial values.
    pub drift_max: f64,
    /// Largest change of the five invariants over the step that produced this state.
    pub step_drift: f64,
    /// `H(f(t)) + sum dt D` with the dissipation taken at the right endpoint of each step.
    pub entropy_budget: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub gamma: f64,
    pub moment_order: f64,
    pub snapshots: Vec<(f64, GridDistribution)>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn initial_entropy(&self) -> f64 {
        self.diagnostics.first().map_or(f64::NAN, |d| d.entropy)
    }

    /// Largest per-step increase of `H` (negative when `H` strictly decreases).
    pub fn max_entropy_increase(&self) -> f64 {
        self.diagnostics
            .windows(2)
            .map(|w| w[1].entropy - w[0].entropy)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_t [H(f(t)) + sum dt D] - H(f_0)`.
    pub fn entropy_inequality_excess(&self) -> f64 {
        let h0 = self.initial_entropy();
        self.diagnostics
            .iter()
            .map(|d| d.entropy_budget - h0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_step_drift(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.step_drift).fold(0.0, f64::max)
    }

    pub fn max_total_drift(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.drift_max).fold(0.0, f64::max)
    }

    pub fn final_state(&self) -> Option<&GridDistribution> {
        self.snapshots.last().map(|(_, f)| f)
    }

    /// Trajectory of stored snapshots only, with diagnostics recomputed at
    /// the snapshot times. Step-dependent fields (`dt`, `step_drift`,
    /// `entropy_budget`) are left at their neutral values.
    pub fn from_snapshots(
        operator: &CollisionOperator,
        moment_order: f64,
        snapshots: Vec<(f64, GridDistribution)>,
    ) -> Result<Self> {
        if snapshots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(LabError::Format("snapshot times must be strictly increasing".into()));
        }
        let initial = match snapshots.first() {
            Some((_, f)) => invariant_moments(f.grid(), f.values()),
            None => [0.0; 5],
        };
        let diagnostics = snapshots
            .iter()
            .map(|(t, f)| {
                let d = operator.dissipation(f);
                let mut diag = record(f, *t, d, moment_order, &initial);
                diag.entropy_budget = diag.entropy;
                diag
            })
            .collect();
        Ok(Self {
            gamma: operator.gamma(),
            moment_order,
            snapshots,
            diagnostics,
        })
    }
}

fn record(f: &GridDistribution, time: f64, dissipation: f64, moment_order: f64, initial: &[f64; 5]) -> StepDiagnostics {
    let inv = invariant_moments(f.grid(), f.values());
    StepDiagnostics {
        time,
        dt: 0.0,
        mass: inv[0],
        momentum: [inv[1], inv[2], inv[3]],
        energy: inv[4],
        entropy: entropy(f),
        dissipation,
        relative_entropy: relative_entropy(f),
        m5: moment_poly(f, 5.0),
        ml: moment_poly(f, moment_order),
        drift_max: max_deviation(&inv, initial),
        step_drift: 0.0,
        entropy_budget: f64::NAN,
    }
}

fn max_deviation(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check_nonnegative(values: &[f64], time: f64, dt: f64) -> Result<()> {
    match values.iter().enumerate().find(|(_, &x)| !(x >= 0.0)) {
        Some((node, &value)) => Err(LabError::Negativity { node, value, time, dt }),
        None => Ok(()),
    }
}

/// One explicit step of `d_t f = Q(f)` from `f` with rate `rate = Q(f)`.
/// Fails with a negativity error instead of clipping.
pub fn step_with_rate(
    operator: &CollisionOperator,
    f: &GridDistribution,
    rate: &[f64],
    dt: f64,
    stepper: Stepper,
    time: f64,
) -> Result<GridDistribution> {
    let grid = f.grid_arc().clone();
    let predictor: Vec<f64> = f.values().iter().zip(rate).map(|(x, q)| x + dt * q).collect();
    check_nonnegative(&predictor, time, dt)?;
    match stepper {
        Stepper::ExplicitEuler => GridDistribution::from_values(grid, predictor),
        Stepper::Heun => {
            let mid = GridDistribution::from_values(grid.clone(), predictor)?;
            let rate_mid = operator.apply(&mid);
            let next: Vec<f64> = f
                .values()
                .iter()
                .zip(rate.iter().zip(&rate_mid))
                .map(|(x, (q0, q1))| x + 0.5 * dt * (q0 + q1))
                .collect();
            check_nonnegative(&next, time, dt)?;
            GridDistribution::from_values(grid, next)
        }
    }
}

/// One explicit step from `f`.
pub fn step(operator: &CollisionOperator, f: &GridDistribution, dt: f64, stepper: Stepper) -> Result<GridDistribution> {
    let rate = operator.apply(f);
    step_with_rate(operator, f, &rate, dt, stepper, 0.0)
}

/// Largest step satisfying the relative-change, positivity and entropy-decrease rules.
pub fn adaptive_step_bound(f: &GridDistribution, rate: &[f64], dissipation: f64, max_relative_change: f64) -> f64 {
    let vals = f.values();
    let peak = vals.iter().cloned().fold(0.0, f64::max);
    let mut relative: f64 = 0.0;
    let mut positivity = f64::INFINITY;
    let mut curvature = 0.0;
    let g = f.grid();
    for (k, (&x, &q)) in vals.iter().zip(rate).enumerate() {
        if x > SIGNIFICANT_FRACTION * peak {
            relative = relative.max((q / x).abs());
        }
        if q < 0.0 {
            positivity = positivity.min(if x > 0.0 { x / -q } else { 0.0 });
        }
        if x > 0.0 {
            curvature += g.weight(k) * q * q / x;
        }
    }
    let mut bound = 0.5 * positivity;
    if relative > 0.0 {
        bound = bound.min(max_relative_change / relative);
    }
    // H(f + dt Q) - H(f) = -dt D + dt^2/2 sum w Q^2/f + O(dt^3)
    if dissipation > 0.0 && curvature > 0.0 {
        bound = bound.min(dissipation / curvature);
    }
    bound
}

/// Integration driver owning the collision operator.
#[derive(Debug)]
pub struct Solver {
    config: SolverConfig,
    operator: CollisionOperator,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let grid = Arc::new(config.grid()?);
        let operator = CollisionOperator::new(grid, config.gamma)?;
        Ok(Self { config, operator })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn operator(&self) -> &CollisionOperator {
        &self.operator
    }

    pub fn grid(&self) -> &Arc<VelocityGrid> {
        self.operator.grid()
    }

    /// Integrate from `f0` to `t_end`. Snapshots are kept every
    /// `snapshot_stride` steps and at the final time.
    pub fn solve(&self, f0: &GridDistribution) -> Result<Trajectory> {
        let cfg = &self.config;
        let same_grid = f0.grid().points_per_axis() == self.grid().points_per_axis()
            && f0.grid().half_extent() == self.grid().half_extent();
        if !same_grid {
            return Err(LabError::InvalidConfig(
                "initial density lives on a different grid".into(),
            ));
        }
        let initial = invariant_moments(f0.grid(), f0.values());
        let mut f = f0.clone();
        let mut time = 0.0;
        let mut eval = self.operator.evaluate(&f);
        let mut diagnostics = vec![record(&f, time, eval.dissipation, cfg.moment_order, &initial)];
        diagnostics[0].entropy_budget = diagnostics[0].entropy;
        let mut dissipated = 0.0;
        let mut snapshots = vec![(time, f.clone())];
        let mut steps = 0usize;
        let tiny = 1e-12 * cfg.t_end.max(1.0);
        while cfg.t_end - time > tiny {
            let remaining = cfg.t_end - time;
            let mut dt = if cfg.adaptive {
                adaptive_step_bound(&f, &eval.rate, eval.dissipation, cfg.max_relative_change).min(cfg.dt)
            } else {
                cfg.dt
            };
            if dt >= remaining {
                dt = remaining;
            } else if dt > 0.5 * remaining {
                dt = 0.5 * remaining;
            }
            if !(dt > 0.0) {
                return Err(LabError::InvalidConfig(format!(
                    "step size collapsed to {dt} at t = {time}"
                )));
            }
            let mut next = self.advance(&f, &eval.rate, dt, time);
            let mut halvings = 0;
            while cfg.adaptive && matches!(next, Err(LabError::Negativity { .. })) && halvings < 20 {
                dt *= 0.5;
                halvings += 1;
                next = self.advance(&f, &eval.rate, dt, time);
            }
            let mut next = next?;
            if cfg.conservation_projection {
                let mut values = next.into_values();
                match_invariants(self.grid(), &mut values, initial)?;
                next = GridDistribution::from_values(self.grid().clone(), values)?;
            }
            let previous = invariant_moments(f.grid(), f.values());
            let after = invariant_moments(next.grid(), next.values());
            time += dt;
            steps += 1;
            eval = self.operator.evaluate(&next);
            dissipated += dt * eval.dissipation;
            if let Some(last) = diagnostics.last_mut() {
                last.dt = dt;
            }
            let mut diag = record(&next, time, eval.dissipation, cfg.moment_order, &initial);
            diag.step_drift = max_deviation(&after, &previous);
            diag.entropy_budget = diag.entropy + dissipated;
            diagnostics.push(diag);
            f = next;
            if steps % cfg.snapshot_stride == 0 {
                snapshots.push((time, f.clone()));
            }
        }
        if snapshots.last().map(|(t, _)| *t) != Some(time) {
            snapshots.push((time, f));
        }
        Ok(Trajectory {
            gamma: cfg.gamma,
            moment_order: cfg.moment_order,
            snapshots,
            diagnostics,
        })
    }

    fn advance(&self, f: &GridDistribution, rate: &[f64], dt: f64, time: f64) -> Result<GridDistribution> {
        step_with_rate(&self.operator, f, rate, dt, self.config.stepper, time)
    }
}

/// Integrate `f0` under `config`.
pub fn solve(f0: &GridDistribution, config: &SolverConfig) -> Result<Trajectory> {
    Solver::new(config.clone())?.solve(f0)
}
