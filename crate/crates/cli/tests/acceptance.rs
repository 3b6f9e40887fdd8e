//! Acceptance criteria, one PASS/FAIL line each.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use landau_core::asymptotics::{
    algebraic_schedule, beta_sup_from_k, beta_sup_from_order, differential_inequality_monitor, fifth_moment_bound,
    gronwall_closed_form, gronwall_numeric, log_slope, track_moments, GronwallParams,
};
use landau_core::dist::{anisotropic_gaussian, bi_maxwellian, random_corpus, standard_maxwellian};
use landau_core::functionals::{
    entropy_dissipation_crossform, entropy_dissipation_projection, fisher_weighted, partition_constants,
    relative_entropy, Dissipation,
};
use landau_core::inequalities::{
    check_b_field_consistency, check_bakry_emery, check_prop31, check_prop32, check_prop33, check_theorem_entropy,
    hessian_scalar, partition_floor, BAKRY_EMERY_MINIMUM,
};
use landau_core::solver::{solve, SolverConfig, Trajectory};
use landau_core::{CollisionOperator, GridDistribution, VelocityGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAMMA: f64 = -3.0;
const ORDER: f64 = 10.0;
const SEED: u64 = 1;
/// Equilibrium defects below this are rounding noise.
const ROUNDING_FLOOR: f64 = 1e-13;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn grid(n: usize) -> Arc<VelocityGrid> {
    Arc::new(VelocityGrid::new(7.0, n).expect("grid"))
}

fn corpus(n: usize, count: usize) -> Vec<GridDistribution> {
    random_corpus(grid(n), SEED, count, 0.0).expect("corpus").members
}

fn decay_run(projection: bool) -> Trajectory {
    let config = SolverConfig {
        conservation_projection: projection,
        ..SolverConfig::default()
    };
    let f0 = bi_maxwellian(Arc::new(config.grid().expect("grid")), 1.0).expect("initial datum");
    solve(&f0, &config).expect("solver run")
}

fn dissipation_forms() -> Outcome {
    let members = corpus(32, 20);
    let mut worst: f64 = 0.0;
    for f in &members {
        let projection = entropy_dissipation_projection(f, GAMMA).expect("projection form");
        let cross = entropy_dissipation_crossform(f, GAMMA).expect("cross form");
        worst = worst.max((projection - cross).abs() / projection.abs());
    }
    outcome(
        worst <= 1e-10,
        format!("max relative difference {worst:.3e} over 20 members at N = 32"),
    )
}

fn equilibrium_defects(n: usize) -> [f64; 4] {
    let g = grid(n);
    let mu = standard_maxwellian(g.clone());
    let op = CollisionOperator::new(g, GAMMA).expect("operator");
    let eval = op.evaluate(&mu);
    let q_max = eval.rate.iter().fold(0.0f64, |m, q| m.max(q.abs()));
    [
        eval.dissipation.abs(),
        fisher_weighted(&mu, GAMMA).abs(),
        relative_entropy(&mu).abs(),
        q_max,
    ]
}

fn equilibrium_annihilation() -> Outcome {
    let coarse = equilibrium_defects(24);
    let fine = equilibrium_defects(48);
    let names = ["D", "I_-3", "H", "max|Q|"];
    let mut pass = true;
    let mut parts = Vec::new();
    for i in 0..4 {
        let at_floor = coarse[i] <= ROUNDING_FLOOR && fine[i] <= ROUNDING_FLOOR;
        let order = (coarse[i] / fine[i]).log2();
        pass &= fine[i] <= 1e-6 && (order >= 1.5 || at_floor);
        parts.push(format!(
            "{} {:.2e} -> {:.2e} (order {}{})",
            names[i],
            coarse[i],
            fine[i],
            if order.is_finite() {
                format!("{order:.2}")
            } else {
                "undefined".into()
            },
            if at_floor { ", rounding floor" } else { "" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn cercignani_ratio(n: usize) -> f64 {
    let members = corpus(n, 50);
    let op = CollisionOperator::new(members[0].grid_arc().clone(), GAMMA).expect("operator");
    let check = check_theorem_entropy(&members, Dissipation::Convolution(&op)).expect("ratio");
    check.verdict.empirical_constant
}

fn cercignani_stability() -> Outcome {
    let coarse = cercignani_ratio(32);
    let fine = cercignani_ratio(48);
    let change = (coarse - fine).abs() / fine;
    outcome(
        coarse > 0.0 && fine > 0.0 && change < 0.2,
        format!(
            "min D M5 / I_-3 = {coarse:.6e} (N = 32), {fine:.6e} (N = 48), change {:.2}%",
            100.0 * change
        ),
    )
}

fn explicit_constants() -> Outcome {
    let hessian_gap = (hessian_scalar(3.0) - BAKRY_EMERY_MINIMUM).abs();
    let bakry = check_bakry_emery(20_000, SEED);
    let members = corpus(32, 50);
    let op = CollisionOperator::new(members[0].grid_arc().clone(), GAMMA).expect("operator");
    let d = Dissipation::Convolution(&op);
    let floor = check_prop33(&members, 0.0, d).expect("pressure bounds").remove(0);
    let z_floor = partition_floor(GAMMA);
    let (z_min, z_max) = members.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| {
        let (z1, z2) = partition_constants(f, GAMMA);
        (lo.min(z1).min(z2), hi.max(z1).max(z2))
    });
    let min_slack = members
        .iter()
        .map(|f| {
            let v = check_prop32(f, d).expect("pressure bound");
            v.lhs - v.rhs
        })
        .fold(f64::INFINITY, f64::min);
    let b_field = check_b_field_consistency(GAMMA, 2_000, SEED).expect("drift field");
    let pass = hessian_gap <= 1e-12
        && bakry.holds
        && floor.holds
        && z_min >= z_floor
        && z_max <= 1.0
        && min_slack > 0.0
        && b_field.holds;
    outcome(
        pass,
        format!(
            "hessian gap {hessian_gap:.1e}, sampled min {:.15}; min Delta_f {:.3e} vs floor {:.3e}; \
             Z in [{z_min:.4}, {z_max:.4}] vs floor {z_floor:.4}; min slack with C = 3456 {min_slack:.3e}; \
             drift field error {:.2e}",
            bakry.lhs, floor.lhs, floor.rhs, b_field.rhs
        ),
    )
}

fn score_reconstruction() -> Outcome {
    let f = anisotropic_gaussian(grid(48), [1.4, 1.0, 0.6]).expect("gaussian");
    let v = check_prop31(&f, 1e-3).expect("reconstruction");
    outcome(
        v.holds,
        format!("max relative error {:.3e} at N = 48 over nodes with f > 1e-8", v.rhs),
    )
}

fn solver_structure(run: &Trajectory, free_run: &Trajectory) -> Outcome {
    let step = run.max_step_drift();
    let free = free_run.max_total_drift();
    let increase = run.max_entropy_increase();
    let excess = run.entropy_inequality_excess();
    let free_increase = free_run.max_entropy_increase();
    let pass = step <= 1e-13 && free <= 1e-10 && increase <= 0.0 && free_increase <= 0.0 && excess <= 1e-8;
    outcome(
        pass,
        format!(
            "step drift {step:.2e} (projected), total drift {free:.2e} (unprojected, t = 20), \
             max H increase {increase:.2e}, budget excess {excess:.2e}"
        ),
    )
}

fn moment_propagation(run: &Trajectory) -> Outcome {
    let envelopes = track_moments(run, &[ORDER], &[]).expect("moment envelope");
    let m10 = &envelopes[0];
    let m5 = fifth_moment_bound(run, m10).expect("fifth moment");
    let pass = m10.slope.is_finite() && m10.dominates() && m5.holds();
    outcome(
        pass,
        format!(
            "M10 <= {:.4e} + {:.4e} t; M5 <= C (1+t)^{:.4} with fitted C {:.4e}, interpolated C {:.4e}",
            m10.intercept, m10.slope, m5.exponent, m5.fitted_constant, m5.interpolated_constant
        ),
    )
}

fn sample_times() -> Vec<f64> {
    let mut times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
    times.extend((1..=40).map(|i| 10f64 * 10f64.powf(i as f64 / 10.0)));
    times
}

fn gronwall_machinery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let times = sample_times();
    let mut worst_margin = f64::INFINITY;
    for _ in 0..20 {
        let a = rng.gen_range(0.0..0.95);
        let p = GronwallParams::new(
            rng.gen_range(0.01..10.0),
            rng.gen_range(0.1..5.0),
            rng.gen_range(0.0..5.0),
            a,
            a + rng.gen_range(0.05..2.0),
        )
        .expect("admissible parameters");
        let numeric = gronwall_numeric(&p, &times).expect("equality solution");
        for (t, x) in times.iter().zip(numeric) {
            let bound = gronwall_closed_form(&p, *t).expect("closed form");
            worst_margin = worst_margin.min(bound / x);
        }
    }
    let mut worst_slope: f64 = 0.0;
    for _ in 0..20 {
        let a = rng.gen_range(0.05..0.5);
        let gap = rng.gen_range(0.1..1.5);
        let p = GronwallParams::new(
            rng.gen_range(0.1..10.0),
            rng.gen_range(1.0..5.0),
            rng.gen_range(0.01..5.0),
            a,
            a + gap,
        )
        .expect("admissible parameters");
        let slope = log_slope(|t| gronwall_closed_form(&p, t), 1e6, 1e-3).expect("slope");
        worst_slope = worst_slope.max((slope + gap).abs() / gap);
    }
    let forms_gap = [10.0, 12.0, 15.0, 20.0]
        .iter()
        .map(|&l| (beta_sup_from_order(l) - beta_sup_from_k((2.0 * l - 9.0) / 3.0)).abs())
        .fold(0.0, f64::max);
    let twelve = beta_sup_from_order(12.0);
    let pass = worst_margin >= 1.0 - 1e-9 && worst_slope < 0.01 && forms_gap <= 1e-12 && twelve == 0.5;
    outcome(
        pass,
        format!(
            "min bound/solution {worst_margin:.6}; max slope error {:.3}%; exponent forms gap {forms_gap:.1e}; \
             beta_sup(12) = {twelve}",
            100.0 * worst_slope
        ),
    )
}

fn decay_envelope(run: &Trajectory) -> Outcome {
    let report = differential_inequality_monitor(run, ORDER).expect("monitor");
    let envelope = report.verdicts.iter().find(|v| v.name == "gronwall_envelope");
    let exponent = report.verdicts.iter().find(|v| v.name == "decay_exponent");
    let pass = envelope.is_some_and(|v| v.holds) && exponent.is_some_and(|v| v.holds && v.lhs > v.rhs);
    let schedule = algebraic_schedule(ORDER).expect("schedule");
    outcome(
        pass,
        format!(
            "c1 = {:.4e}, c2 = {:.4e}; min bound/H = {:.4}; fitted beta = {:.4} vs supremum {:.4} (l = {ORDER})",
            report.c1,
            report.c2,
            envelope.map_or(f64::NAN, |v| v.lhs),
            exponent.map_or(f64::NAN, |v| v.lhs),
            schedule.beta_sup
        ),
    )
}

fn read_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).expect("run directory") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = fs::read(&path).expect("output file");
                out.push((path.strip_prefix(root).expect("prefix").to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

fn run_twice(args: &[&str], out: &Path) -> Result<usize, String> {
    let mut trees = Vec::new();
    for _ in 0..2 {
        let _ = fs::remove_dir_all(out);
        let status = Command::new(env!("CARGO_BIN_EXE_landau-lab"))
            .args(args)
            .arg("--out")
            .arg(out)
            .args(["--threads", "1"])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("{args:?} exited with {}", status.status));
        }
        trees.push(read_tree(out));
    }
    let _ = fs::remove_dir_all(out);
    if trees[0] == trees[1] {
        Ok(trees[0].len())
    } else {
        Err(format!("{args:?} produced different outputs"))
    }
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().expect("scratch directory");
    let root = tmp.path();
    let commands: [&[&str]; 3] = [
        &["verify", "--check", "all", "--seed", "1", "--count", "50", "--N", "32"],
        &["solve", "--init", "bimax", "--gamma", "-3", "--tend", "2", "--N", "24"],
        &["decay", "--mode", "algebraic", "--tend", "2", "--N", "24"],
    ];
    let mut details = Vec::new();
    let mut pass = true;
    for (i, args) in commands.iter().enumerate() {
        match run_twice(args, &root.join(i.to_string())) {
            Ok(files) => details.push(format!("{} ({files} files identical)", args[0])),
            Err(e) => {
                pass = false;
                details.push(e);
            }
        }
    }
    outcome(pass, details.join("; "))
}

fn report(index: usize, title: &str, check: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = check();
    println!(
        "criterion {index:>2} {} {title}: {} [{:.1}s]",
        if result.pass { "PASS" } else { "FAIL" },
        result.detail,
        start.elapsed().as_secs_f64()
    );
    result.pass
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut all = true;
    all &= report(1, "dissipation forms agree", dissipation_forms);
    all &= report(2, "equilibrium annihilation", equilibrium_annihilation);
    all &= report(3, "entropy ratio stable under refinement", cercignani_stability);
    all &= report(4, "explicit constants", explicit_constants);
    all &= report(5, "score reconstruction", score_reconstruction);
    let run = decay_run(true);
    let free_run = decay_run(false);
    all &= report(6, "solver structure", || solver_structure(&run, &free_run));
    all &= report(7, "moment propagation", || moment_propagation(&run));
    all &= report(8, "Gronwall machinery", gronwall_machinery);
    all &= report(9, "decay envelope", || decay_envelope(&run));
    all &= report(10, "determinism", determinism);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
