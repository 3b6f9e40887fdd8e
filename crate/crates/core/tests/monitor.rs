use std::sync::Arc;

use landau_core::asymptotics::{
    decay_fit_trajectory, differential_inequality_monitor, fifth_moment_bound, track_moments, DecayMode,
};
use landau_core::dist::{bi_maxwellian, standard_maxwellian};
use landau_core::solver::{solve, SolverConfig, Trajectory};
use landau_core::LabError;

fn config(t_end: f64) -> SolverConfig {
    SolverConfig {
        half_extent: 6.0,
        points_per_axis: 16,
        t_end,
        snapshot_stride: 5,
        ..SolverConfig::default()
    }
}

fn bimax_run() -> Trajectory {
    let cfg = config(3.0);
    let grid = Arc::new(cfg.grid().unwrap());
    solve(&bi_maxwellian(grid, 1.0).unwrap(), &cfg).unwrap()
}

#[test]
fn equilibrium_run_is_stationary_and_vacuous() {
    let cfg = config(1.0);
    let grid = Arc::new(cfg.grid().unwrap());
    let run = solve(&standard_maxwellian(grid), &cfg).unwrap();
    assert!(run.max_total_drift() <= 1e-10);
    let envelopes = track_moments(&run, &[10.0], &[]).unwrap();
    assert!(envelopes[0].slope.abs() < 1e-8, "slope {}", envelopes[0].slope);
    let report = differential_inequality_monitor(&run, 10.0).unwrap();
    assert!(report.verdicts.iter().all(|v| v.vacuous && v.holds));
    assert!(matches!(
        decay_fit_trajectory(&run, DecayMode::Algebraic),
        Err(LabError::InsufficientData(_))
    ));
}

#[test]
fn bimaxwellian_run_satisfies_the_monitored_bounds() {
    let run = bimax_run();
    let envelopes = track_moments(&run, &[10.0], &[(0.5, 0.2)]).unwrap();
    for env in &envelopes {
        assert!(env.dominates() && env.slope.is_finite());
    }
    let m5 = fifth_moment_bound(&run, &envelopes[0]).unwrap();
    assert!(m5.holds() && m5.fitted_constant <= m5.interpolated_constant);

    let report = differential_inequality_monitor(&run, 10.0).unwrap();
    assert!(report.c1 > 0.0 && report.c1.is_finite());
    assert!(report.c2 >= 0.0);
    for row in &report.rows {
        assert!(row.bound >= row.relative_entropy * (1.0 - 1e-12), "{row:?}");
    }
    let names: Vec<&str> = report.verdicts.iter().map(|v| v.name.as_str()).collect();
    assert!(names.contains(&"differential_inequality") && names.contains(&"gronwall_envelope"));
    assert!(report.verdicts[..2].iter().all(|v| v.holds));

    let fit = decay_fit_trajectory(&run, DecayMode::Algebraic).unwrap();
    assert!(fit.exponent_positive());
}

#[test]
fn two_snapshot_trajectory_is_insufficient() {
    let mut run = bimax_run();
    run.diagnostics.truncate(2);
    assert!(matches!(
        decay_fit_trajectory(&run, DecayMode::Algebraic),
        Err(LabError::InsufficientData(_))
    ));
}
