//! Named invariant suites for `--mode verify`.

use cvtele_core::analytic::{coherent_output_closed_form, fluctuation_second_moment, number_state_output_closed_form, transfer_ladder_commutation};
use cvtele_core::fock::{coherent_state, number_state};
use cvtele_core::measurement::{stream_rng, OutcomeSampler};
use cvtele_core::transfer::{apply_transfer, povm_completeness, ConditionalOutcome};
use cvtele_core::{FockVector, Result, TeleportParams, C64};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::config::Suite;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl SuiteResult {
    fn new(suite: &str, residual: f64, tolerance: f64, detail: String) -> Self {
        Self { suite: suite.to_string(), passed: residual <= tolerance, residual, tolerance, detail }
    }
}

/// Settings shared by all suites. `q` pins the entanglement parameter;
/// otherwise each suite uses its own standard set or random draws.
#[derive(Clone, Copy, Debug)]
pub struct VerifySettings {
    pub q: Option<f64>,
    pub cutoff: usize,
    pub seed: u64,
}

pub const CLOSED_FORM_TOL: f64 = 1e-8;
pub const COMMUTATION_TOL: f64 = 1e-8;
pub const COMPLETENESS_TOL: f64 = 1e-3;
pub const CLOSED_FORM_DRAWS: usize = 50;
pub const GAUSSIAN_SAMPLES: usize = 100_000;

pub fn run_suite(suite: Suite, settings: &VerifySettings) -> Result<Vec<SuiteResult>> {
    Ok(match suite {
        Suite::PovmCompleteness => vec![povm_completeness_suite(settings)?],
        Suite::CoherentClosedForm => vec![coherent_closed_form_suite(settings)?],
        Suite::LadderCommutation => vec![commutation_suite(settings)?],
        Suite::NumberClosedForm => vec![number_closed_form_suite(settings)?],
        Suite::GaussianStats => vec![gaussian_stats_suite(settings)?],
        Suite::All => {
            let mut all = Vec::new();
            for s in [Suite::PovmCompleteness, Suite::CoherentClosedForm, Suite::LadderCommutation, Suite::NumberClosedForm, Suite::GaussianStats] {
                all.extend(run_suite(s, settings)?);
            }
            all
        }
    })
}

/// Uniform draw from the disc `|z| ≤ radius`.
pub fn disc_point<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> C64 {
    let r = radius * rng.random::<f64>().sqrt();
    C64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Unnormalized `T(β)ψ` recovered from the normalized output and its density.
pub fn unnormalized(outcome: &ConditionalOutcome, cutoff: usize) -> FockVector {
    match &outcome.out_state {
        Some(state) => {
            let scaled = state.amplitudes() * C64::new(outcome.density.sqrt(), 0.0);
            FockVector::from_dvector(scaled).expect("finite amplitudes")
        }
        None => FockVector::zeros(cutoff),
    }
}

fn max_abs_diff(a: &FockVector, b: &FockVector) -> f64 {
    (a.amplitudes() - b.amplitudes()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `(q, g, β)` draws with `q ∈ [0, 0.9]`, `g ∈ [0, 2]`, `|β| ≤ 2`.
fn random_params(rng: &mut ChaCha20Rng, settings: &VerifySettings) -> Result<(TeleportParams, C64)> {
    let q = rng.random_range(0.0..=0.9);
    let q = settings.q.unwrap_or(q);
    let g = rng.random_range(0.0..=2.0);
    let beta = disc_point(rng, 2.0);
    Ok((TeleportParams::new(q, g, settings.cutoff)?, beta))
}

fn povm_completeness_suite(settings: &VerifySettings) -> Result<SuiteResult> {
    let q = settings.q.unwrap_or(0.5);
    let block = 11;
    let coarse = povm_completeness(&TeleportParams::new(q, 1.0, 60)?, 8.0, 0.05, block)?;
    let fine = povm_completeness(&TeleportParams::new(q, 1.0, 80)?, 10.0, 0.05, block)?;
    let mut result = SuiteResult::new(
        "povm-completeness",
        coarse.max_deviation,
        COMPLETENESS_TOL,
        format!("q={q}: max deviation {:.3e} at (R=8, N=60), {:.3e} at (R=10, N=80)", coarse.max_deviation, fine.max_deviation),
    );
    result.passed &= fine.max_deviation < coarse.max_deviation;
    Ok(result)
}

fn coherent_closed_form_suite(settings: &VerifySettings) -> Result<SuiteResult> {
    let mut rng = stream_rng(settings.seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..CLOSED_FORM_DRAWS {
        let (params, beta) = random_params(&mut rng, settings)?;
        let alpha = disc_point(&mut rng, 2.0);
        let numeric = unnormalized(&apply_transfer(&params, beta, &coherent_state(alpha, params.cutoff()))?, params.cutoff());
        let closed = coherent_output_closed_form(&params, alpha, beta).to_fock(params.cutoff());
        worst = worst.max(max_abs_diff(&numeric, &closed));
    }
    Ok(SuiteResult::new("eq5-match", worst, CLOSED_FORM_TOL, format!("{CLOSED_FORM_DRAWS} coherent draws, N={}", settings.cutoff)))
}

fn commutation_suite(settings: &VerifySettings) -> Result<SuiteResult> {
    let qs = match settings.q {
        Some(q) => vec![q],
        None => vec![0.1, 1.0 / 3.0, 0.5, 0.9],
    };
    let mut rng = stream_rng(settings.seed, 2);
    let mut worst = 0.0f64;
    for &q in &qs {
        let params = TeleportParams::matched_gain(q, settings.cutoff)?;
        for _ in 0..5 {
            worst = worst.max(transfer_ladder_commutation(&params, disc_point(&mut rng, 2.0))?.residual);
        }
    }
    Ok(SuiteResult::new(
        "eq7-commutation",
        worst,
        COMMUTATION_TOL,
        format!("q in {qs:?}, 5 outcomes each, block m,n <= {}", settings.cutoff / 2),
    ))
}

fn number_closed_form_suite(settings: &VerifySettings) -> Result<SuiteResult> {
    let mut rng = stream_rng(settings.seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..CLOSED_FORM_DRAWS {
        let (params, beta) = random_params(&mut rng, settings)?;
        // keep the stream aligned with the coherent suite's draws
        let _alpha = disc_point(&mut rng, 2.0);
        for n in 0..=5 {
            let numeric = unnormalized(&apply_transfer(&params, beta, &number_state(n, params.cutoff())?)?, params.cutoff());
            let closed = number_state_output_closed_form(&params, n, beta)?;
            worst = worst.max(max_abs_diff(&numeric, &closed));
        }
    }
    Ok(SuiteResult::new("eq8-match", worst, CLOSED_FORM_TOL, format!("{CLOSED_FORM_DRAWS} draws, n <= 5, N={}", settings.cutoff)))
}

/// Largest z-score of the sampled fluctuation mean (per component) and
/// second moment against their exact values.
pub fn fluctuation_z_score(q: f64, alpha: C64, samples: usize, seed: u64, stream: u64) -> Result<f64> {
    let params = TeleportParams::new(q, 1.0, 8)?;
    let mut sampler = OutcomeSampler::coherent(&params, alpha);
    let mut rng = stream_rng(seed, stream);
    let (mut sum, mut m2_sum, mut m2_sq) = (C64::new(0.0, 0.0), 0.0, 0.0);
    for _ in 0..samples {
        let phi = sampler.sample(&mut rng)? - alpha;
        sum += phi;
        m2_sum += phi.norm_sqr();
        m2_sq += phi.norm_sqr().powi(2);
    }
    let n = samples as f64;
    let mean = sum / n;
    let sigma_mean = (0.5 * fluctuation_second_moment(q) / n).sqrt();
    let m2 = m2_sum / n;
    let m2_sd = ((m2_sq / n - m2 * m2) * n / (n - 1.0)).sqrt();
    let z_m2 = (m2 - fluctuation_second_moment(q)).abs() / (m2_sd / n.sqrt());
    Ok((mean.re.abs() / sigma_mean).max(mean.im.abs() / sigma_mean).max(z_m2))
}

fn gaussian_stats_suite(settings: &VerifySettings) -> Result<SuiteResult> {
    let qs = match settings.q {
        Some(q) => vec![q],
        None => vec![0.0, 1.0 / 3.0, 0.9],
    };
    let mut worst = 0.0f64;
    for (i, &q) in qs.iter().enumerate() {
        worst = worst.max(fluctuation_z_score(q, C64::new(0.5, 0.0), GAUSSIAN_SAMPLES, settings.seed, 3 + i as u64)?);
    }
    Ok(SuiteResult::new("gaussian-stats", worst, 3.0, format!("q in {qs:?}, {GAUSSIAN_SAMPLES} samples, residual is the largest z-score")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_suites_pass() {
        let settings = VerifySettings { q: None, cutoff: 80, seed: 1 };
        for suite in [Suite::CoherentClosedForm, Suite::NumberClosedForm] {
            let result = run_suite(suite, &settings).unwrap().remove(0);
            assert!(result.passed, "{result:?}");
        }
    }

    #[test]
    fn commutation_with_pinned_q() {
        let settings = VerifySettings { q: Some(0.3333), cutoff: 80, seed: 0 };
        let result = run_suite(Suite::LadderCommutation, &settings).unwrap().remove(0);
        assert!(result.passed && result.residual <= 1e-8, "{result:?}");
    }

    #[test]
    fn disc_points_stay_inside() {
        let mut rng = stream_rng(0, 0);
        assert!((0..1000).all(|_| disc_point(&mut rng, 2.0).norm() <= 2.0));
    }
}
