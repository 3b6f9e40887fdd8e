use std::sync::Arc;

use landau_core::dist::{anisotropic_gaussian, bi_maxwellian};
use landau_core::functionals::pressure_tensor;
use landau_core::solver::{solve, step, SolverConfig, Stepper, Trajectory};
use landau_core::{CollisionOperator, GridDistribution, VelocityGrid};

fn max_diff(a: &GridDistribution, b: &GridDistribution) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn integrate(
    op: &CollisionOperator,
    f0: &GridDistribution,
    dt: f64,
    steps: usize,
    stepper: Stepper,
) -> GridDistribution {
    let mut f = f0.clone();
    for _ in 0..steps {
        f = step(op, &f, dt, stepper).unwrap();
    }
    f
}

#[test]
fn explicit_steppers_have_their_temporal_order() {
    let grid = Arc::new(VelocityGrid::new(6.0, 12).unwrap());
    let op = CollisionOperator::new(grid.clone(), -3.0).unwrap();
    let f0 = anisotropic_gaussian(grid, [1.4, 0.9, 0.7]).unwrap();
    let t_end = 0.04;
    let reference = integrate(&op, &f0, t_end / 256.0, 256, Stepper::Heun);
    let error =
        |steps: usize, stepper| max_diff(&integrate(&op, &f0, t_end / steps as f64, steps, stepper), &reference);

    let euler = [error(8, Stepper::ExplicitEuler), error(16, Stepper::ExplicitEuler)];
    let heun = [error(8, Stepper::Heun), error(16, Stepper::Heun)];
    let euler_order = (euler[0] / euler[1]).log2();
    let heun_order = (heun[0] / heun[1]).log2();
    assert!((euler_order - 1.0).abs() < 0.15, "Euler order {euler_order}");
    assert!((heun_order - 2.0).abs() < 0.2, "Heun order {heun_order}");
}

fn short_run(projection: bool) -> Trajectory {
    let config = SolverConfig {
        half_extent: 6.0,
        points_per_axis: 16,
        t_end: 0.5,
        conservation_projection: projection,
        snapshot_stride: 20,
        ..SolverConfig::default()
    };
    let grid = Arc::new(config.grid().unwrap());
    solve(&bi_maxwellian(grid, 1.0).unwrap(), &config).unwrap()
}

#[test]
fn entropy_decreases_along_the_run() {
    let run = short_run(true);
    assert!(run.diagnostics.len() > 10);
    assert!(run.max_entropy_increase() <= 0.0);
    assert!(run.entropy_inequality_excess() <= 1e-8);
    assert!(run.max_step_drift() <= 1e-13);
    assert!(run.diagnostics.iter().all(|d| d.dissipation >= 0.0));
    let first = run.diagnostics.first().unwrap().relative_entropy;
    let last = run.diagnostics.last().unwrap().relative_entropy;
    assert!(last < first);
}

#[test]
fn conservation_without_projection_is_rounding_level() {
    let run = short_run(false);
    assert!(run.max_total_drift() <= 1e-12, "drift {}", run.max_total_drift());
}

#[test]
fn snapshots_rebuild_consistent_diagnostics() {
    let run = short_run(true);
    let op = CollisionOperator::new(run.snapshots[0].1.grid_arc().clone(), run.gamma).unwrap();
    let rebuilt = Trajectory::from_snapshots(&op, run.moment_order, run.snapshots.clone()).unwrap();
    assert_eq!(rebuilt.snapshots.len(), run.snapshots.len());
    for d in &rebuilt.diagnostics {
        let original = run.diagnostics.iter().find(|o| o.time == d.time).unwrap();
        assert_eq!(original.entropy, d.entropy);
        assert_eq!(original.dissipation, d.dissipation);
    }
}

#[test]
fn maxwell_molecule_pressure_relaxes_exponentially() {
    let config = SolverConfig {
        gamma: 0.0,
        half_extent: 6.0,
        points_per_axis: 16,
        t_end: 0.005,
        snapshot_stride: 50,
        ..SolverConfig::default()
    };
    let grid = Arc::new(config.grid().unwrap());
    let f0 = anisotropic_gaussian(grid, [1.3, 0.9, 0.8]).unwrap();
    let p0 = pressure_tensor(&f0);
    let run = solve(&f0, &config).unwrap();
    for (t, f) in &run.snapshots {
        let p = pressure_tensor(f);
        let expected = 1.0 + (p0[0][0] - 1.0) * (-12.0 * t).exp();
        let err = (p[0][0] - expected).abs() / (p0[0][0] - 1.0).abs();
        assert!(err < 1e-3, "t = {t}: relative error {err:e}");
    }
}

#[test]
fn solver_is_deterministic() {
    let a = short_run(true);
    let b = short_run(true);
    assert_eq!(a.diagnostics, b.diagnostics);
    for ((ta, fa), (tb, fb)) in a.snapshots.iter().zip(&b.snapshots) {
        assert_eq!(ta, tb);
        assert_eq!(fa.values(), fb.values());
    }
}
