//! `solve`: integrate the homogeneous equation and store the trajectory.

use std::sync::Arc;

use landau_core::dist::{anisotropic_gaussian, bi_maxwellian, standard_maxwellian};
use landau_core::inequalities::InequalityVerdict;
use landau_core::io::digest_values;
use landau_core::solver::{solve, Trajectory};
use landau_core::GridDistribution;
use serde::Serialize;

use crate::config::{InitKind, RunConfig};
use crate::output::{write_trajectory, RunDir};

/// Temperatures of the anisotropic initial datum.
const ANISO_TEMPERATURES: [f64; 3] = [1.4, 1.0, 0.6];
const PROJECTED_STEP_DRIFT: f64 = 1e-13;
const UNPROJECTED_DRIFT: f64 = 1e-10;
const ENTROPY_BUDGET_SLACK: f64 = 1e-8;
/// Per-step entropy increase attributed to rounding.
const ENTROPY_ROUNDING: f64 = 1e-13;

pub fn initial_datum(config: &RunConfig) -> anyhow::Result<GridDistribution> {
    let grid = Arc::new(config.solver.grid()?);
    Ok(match config.init {
        InitKind::Maxwellian => standard_maxwellian(grid),
        InitKind::Bimax => bi_maxwellian(grid, config.drift)?,
        InitKind::Aniso => anisotropic_gaussian(grid, ANISO_TEMPERATURES)?,
    })
}

#[derive(Serialize)]
struct RunSummary {
    final_time: f64,
    steps: usize,
    snapshots: usize,
    initial_relative_entropy: f64,
    final_relative_entropy: f64,
    max_step_drift: f64,
    max_total_drift: f64,
    max_entropy_increase: f64,
    entropy_inequality_excess: f64,
}

/// Structural verdicts of a run: conservation, monotone entropy, entropy budget.
pub fn run_verdicts(trajectory: &Trajectory, projection: bool) -> Vec<InequalityVerdict> {
    let rows: Vec<[f64; 3]> = trajectory
        .diagnostics
        .iter()
        .map(|d| [d.time, d.entropy, d.dissipation])
        .collect();
    let digest = digest_values(rows.iter().map(|r| &r[..]));
    let conservation = if projection {
        InequalityVerdict::error_bound(
            "step_drift",
            trajectory.max_step_drift(),
            PROJECTED_STEP_DRIFT,
            digest.clone(),
        )
    } else {
        InequalityVerdict::error_bound(
            "total_drift",
            trajectory.max_total_drift(),
            UNPROJECTED_DRIFT,
            digest.clone(),
        )
    };
    vec![
        conservation,
        InequalityVerdict::error_bound(
            "entropy_monotone",
            trajectory.max_entropy_increase().max(0.0),
            ENTROPY_ROUNDING,
            digest.clone(),
        ),
        InequalityVerdict::error_bound(
            "entropy_budget",
            trajectory.entropy_inequality_excess().max(0.0),
            ENTROPY_BUDGET_SLACK,
            digest,
        ),
    ]
}

/// Solve from the configured initial datum and write the trajectory into `dir`.
pub fn solve_into(config: &RunConfig, dir: &RunDir) -> anyhow::Result<Trajectory> {
    let f0 = initial_datum(config)?;
    let trajectory = solve(&f0, &config.solver)?;
    write_trajectory(dir, &trajectory)?;
    let diag = &trajectory.diagnostics;
    dir.write_json(
        "run.json",
        &RunSummary {
            final_time: diag.last().map_or(0.0, |d| d.time),
            steps: diag.len().saturating_sub(1),
            snapshots: trajectory.snapshots.len(),
            initial_relative_entropy: diag.first().map_or(f64::NAN, |d| d.relative_entropy),
            final_relative_entropy: diag.last().map_or(f64::NAN, |d| d.relative_entropy),
            max_step_drift: trajectory.max_step_drift(),
            max_total_drift: trajectory.max_total_drift(),
            max_entropy_increase: trajectory.max_entropy_increase(),
            entropy_inequality_excess: trajectory.entropy_inequality_excess(),
        },
    )?;
    Ok(trajectory)
}

pub fn run(config: &RunConfig, dir: &RunDir) -> anyhow::Result<Vec<InequalityVerdict>> {
    let trajectory = solve_into(config, dir)?;
    let verdicts = run_verdicts(&trajectory, config.solver.conservation_projection);
    let summary = dir.write_verdicts(&verdicts)?;
    print!("{summary}");
    Ok(verdicts)
}
