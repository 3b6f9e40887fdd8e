//! `decay`: moment envelopes, the differential-inequality monitor and decay fits.

use landau_core::asymptotics::{
    decay_fit_trajectory, differential_inequality_monitor, fifth_moment_bound, stretched_schedule, track_moments,
    DecayFit, DecayMode,
};
use landau_core::inequalities::InequalityVerdict;
use landau_core::io::digest_values;
use landau_core::solver::Trajectory;
use serde::Serialize;

use crate::config::{ModeKind, RunConfig};
use crate::output::{read_trajectory, RunDir};
use crate::solve::solve_into;

#[derive(Serialize)]
struct TableRow {
    t: f64,
    series: &'static str,
    value: f64,
}

fn trajectory_digest(trajectory: &Trajectory) -> String {
    let rows: Vec<[f64; 3]> = trajectory
        .diagnostics
        .iter()
        .map(|d| [d.time, d.relative_entropy, d.dissipation])
        .collect();
    digest_values(rows.iter().map(|r| &r[..]))
}

fn fit_verdict(fit: &DecayFit, digest: String) -> InequalityVerdict {
    InequalityVerdict::positive_constant("decay_rate", fit.rate, digest).with_note(format!(
        "{:?} fit: exponent = {:.6}, rate = {:.6}, residual = {:.3e}",
        fit.mode, fit.exponent, fit.rate, fit.residual
    ))
}

pub fn run(config: &RunConfig, dir: &RunDir) -> anyhow::Result<Vec<InequalityVerdict>> {
    let order = config.solver.moment_order;
    let trajectory = match &config.decay.trajectory {
        Some(path) => read_trajectory(path, order)?,
        None => solve_into(config, dir)?,
    };
    let mode = DecayMode::from(config.decay.mode);
    let fit = decay_fit_trajectory(&trajectory, mode)?;
    dir.write_json("fit.json", &fit)?;
    let digest = trajectory_digest(&trajectory);

    let mut verdicts = Vec::new();
    let mut table = Vec::new();
    match config.decay.mode {
        ModeKind::Algebraic => {
            let envelopes = track_moments(&trajectory, &[order], &[])?;
            let m5 = fifth_moment_bound(&trajectory, &envelopes[0])?;
            verdicts.extend(envelopes.iter().map(|e| e.verdict(digest.clone())));
            verdicts.push(m5.verdict(digest.clone()));
            dir.write_json("moments.json", &envelopes)?;
            dir.write_json("fifth_moment.json", &m5)?;

            let report = differential_inequality_monitor(&trajectory, order)?;
            dir.write_csv("monitor.csv", &report.rows)?;
            dir.write_json("monitor.json", &report)?;
            verdicts.extend(report.verdicts.iter().cloned());
            for row in &report.rows {
                table.push(TableRow {
                    t: row.time,
                    series: "H",
                    value: row.relative_entropy,
                });
                table.push(TableRow {
                    t: row.time,
                    series: "bound",
                    value: row.bound,
                });
                table.push(TableRow {
                    t: row.time,
                    series: "envelope",
                    value: row.envelope,
                });
            }
        }
        ModeKind::Stretched => {
            let schedule = stretched_schedule(config.decay.s, config.decay.kappa)?;
            let envelopes = track_moments(&trajectory, &[order], &[(config.decay.s, config.decay.kappa)])?;
            verdicts.extend(envelopes.iter().map(|e| e.verdict(digest.clone())));
            dir.write_json("moments.json", &envelopes)?;
            dir.write_json("schedule.json", &schedule)?;
            verdicts.push(fit_verdict(&fit, digest.clone()));
            for d in &trajectory.diagnostics {
                table.push(TableRow {
                    t: d.time,
                    series: "H",
                    value: d.relative_entropy,
                });
                table.push(TableRow {
                    t: d.time,
                    series: "envelope",
                    value: fit.envelope(d.time),
                });
            }
        }
    }
    dir.write_csv("decay_table.csv", table)?;
    let summary = dir.write_verdicts(&verdicts)?;
    print!("{summary}");
    Ok(verdicts)
}
