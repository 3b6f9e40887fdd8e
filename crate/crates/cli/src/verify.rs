//! `verify`: functional-inequality checks on a seeded corpus.

use std::sync::Arc;

use landau_core::dist::{anisotropic_gaussian, random_corpus};
use landau_core::functionals::Dissipation;
use landau_core::inequalities::{
    check_b_field_consistency, check_bakry_emery, check_cercignani, check_coercivity_lemma, check_interpolation_lemma,
    check_interpolation_lemma_stretched, check_l3_regularity, check_prop31, check_prop32, check_prop33,
    check_theorem_entropy, members_digest, Cutoff, InequalityVerdict,
};
use landau_core::{CollisionOperator, GridDistribution, VelocityGrid};

use crate::config::{Check, RunConfig};
use crate::output::RunDir;

const BAKRY_SAMPLES: usize = 20_000;
const B_FIELD_SAMPLES: usize = 2_000;
/// Temperatures of the anisotropic Gaussian used for the score reconstruction.
const RECONSTRUCTION_TEMPERATURES: [f64; 3] = [1.4, 1.0, 0.6];
const COERCIVITY_ETA: f64 = 0.5;
const INTERPOLATION_R: f64 = 5.0 / 3.0;
const INTERPOLATION_ALPHA: f64 = 2.0;

pub fn run(config: &RunConfig, dir: &RunDir) -> anyhow::Result<Vec<InequalityVerdict>> {
    let grid = Arc::new(VelocityGrid::new(config.grid.half_extent, config.grid.points_per_axis)?);
    let checks = &config.verify.checks;
    let members: Vec<GridDistribution> = if checks.iter().any(|c| c.needs_corpus()) {
        let corpus = random_corpus(
            grid.clone(),
            config.corpus.seed,
            config.corpus.count,
            config.corpus.entropy_bound,
        )?;
        corpus.members
    } else {
        Vec::new()
    };
    let op = CollisionOperator::new(grid.clone(), config.gamma)?;
    let d = Dissipation::Convolution(&op);

    let mut verdicts = Vec::new();
    for &check in checks {
        match check {
            Check::Entropy => verdicts.push(check_theorem_entropy(&members, d)?.verdict),
            Check::Cercignani => verdicts.extend(check_cercignani(&members, config.verify.radius, d)?),
            Check::L3 => verdicts.push(check_l3_regularity(&members, d)?),
            Check::Prop31 => {
                let f = anisotropic_gaussian(grid.clone(), RECONSTRUCTION_TEMPERATURES)?;
                verdicts.push(check_prop31(&f, config.verify.reconstruction_tolerance)?);
            }
            Check::Prop32 => {
                let mut worst: Option<InequalityVerdict> = None;
                for f in &members {
                    let v = check_prop32(f, d)?;
                    if worst.as_ref().is_none_or(|w| v.lhs - v.rhs < w.lhs - w.rhs) {
                        worst = Some(v);
                    }
                }
                if let Some(mut v) = worst {
                    v.inputs_digest = members_digest(&members);
                    verdicts.push(v.with_note("member with the smallest slack"));
                }
            }
            Check::Prop33 => verdicts.extend(check_prop33(&members, config.corpus.entropy_bound, d)?),
            Check::Bakry => verdicts.push(check_bakry_emery(BAKRY_SAMPLES, config.corpus.seed)),
            Check::Coercivity => {
                let (v, _) = check_coercivity_lemma(
                    &members,
                    config.gamma,
                    COERCIVITY_ETA,
                    config.solver.moment_order,
                    Cutoff::Smooth,
                )?;
                verdicts.extend(v);
            }
            Check::Interp => {
                verdicts.push(check_interpolation_lemma(
                    &members,
                    INTERPOLATION_R,
                    INTERPOLATION_ALPHA,
                )?);
                let (s, kappa) = (config.decay.s, config.decay.kappa);
                let kappa2 = 1.5 * 2.0 * kappa / (3.0 - INTERPOLATION_R);
                verdicts.push(check_interpolation_lemma_stretched(
                    &members,
                    INTERPOLATION_R,
                    s,
                    kappa,
                    1.5 * kappa,
                    kappa2,
                )?);
            }
            Check::Bfield => verdicts.push(check_b_field_consistency(
                config.gamma,
                B_FIELD_SAMPLES,
                config.corpus.seed,
            )?),
            Check::All => unreachable!("expanded during configuration"),
        }
    }
    let summary = dir.write_verdicts(&verdicts)?;
    print!("{summary}");
    Ok(verdicts)
}
