use cvtele_core::measurement::{run_sweep, FidelityMethod, GainSpec, SweepPoint, SweepSpec};
use cvtele_core::transfer::{apply_transfer, check_convergence};
use cvtele_core::TeleportParams;
use serde::{Deserialize, Serialize};

use crate::config::{Gain, Method, Mode, RunConfig};
use crate::error::CliError;
use crate::verify::{run_suite, SuiteResult, VerifySettings};

/// Conditional output for one measurement outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleResult {
    pub q: f64,
    pub g: f64,
    pub density: f64,
    /// `[re, im]` per Fock level; empty when the outcome is degenerate.
    pub amplitudes: Vec<[f64; 2]>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Single(SingleResult),
    Sweep(Vec<SweepPoint>),
    Verify(Vec<SuiteResult>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub warnings: Vec<String>,
    pub result: Outcome,
}

impl Report {
    /// 0 on success, 2 when a verification suite failed.
    pub fn exit_code(&self) -> u8 {
        match &self.result {
            Outcome::Verify(results) if results.iter().any(|r| !r.passed) => 2,
            _ => 0,
        }
    }
}

pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    let mut warnings = Vec::new();
    let result = match config.mode {
        Mode::Single => Outcome::Single(run_single(config, &mut warnings)?),
        Mode::Sweep => Outcome::Sweep(run_sweep_mode(config, &mut warnings)?),
        Mode::Verify => {
            let settings = VerifySettings { q: config.q()?, cutoff: config.cutoff, seed: config.seed };
            Outcome::Verify(run_suite(config.suite, &settings)?)
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Report { config: config.clone(), warnings, result })
}

fn run_single(config: &RunConfig, warnings: &mut Vec<String>) -> Result<SingleResult, CliError> {
    let q = config.q()?.ok_or_else(|| CliError::Config("single mode needs a squeezing value".into()))?;
    let g = match config.gain {
        Gain::Value(g) => g,
        Gain::MatchQ => q,
        Gain::Grid(_) => return Err(CliError::Config("gain grids are only valid in sweep mode".into())),
    };
    let beta = config.beta.ok_or_else(|| CliError::Config("single mode needs --beta".into()))?.0;
    let params = TeleportParams::new(q, g, config.cutoff)?;
    let psi = config.input.to_state()?.to_fock(config.cutoff)?;
    let outcome = apply_transfer(&params, beta, &psi)?;
    let convergence = check_convergence(&params, beta, &psi)?;
    if !convergence.converged {
        warnings.push(format!("output changed by {:.3e} when the cutoff was doubled; raise --N", convergence.max_delta));
    }
    if outcome.is_degenerate() {
        warnings.push(format!("outcome density {:.3e} is below the floor; no output state", outcome.density));
    }
    let amplitudes = outcome
        .out_state
        .map(|s| s.amplitudes().iter().map(|z| [z.re, z.im]).collect())
        .unwrap_or_default();
    Ok(SingleResult { q, g, density: outcome.density, amplitudes, converged: convergence.converged })
}

fn run_sweep_mode(config: &RunConfig, warnings: &mut Vec<String>) -> Result<Vec<SweepPoint>, CliError> {
    let q_values = match (config.q_grid, config.q()?) {
        (Some(grid), _) => grid.values(),
        (None, Some(q)) => vec![q],
        (None, None) => return Err(CliError::Config("sweep mode needs --q-grid or a squeezing value".into())),
    };
    let gains = match config.gain {
        Gain::Value(g) => GainSpec::Values(vec![g]),
        Gain::MatchQ => GainSpec::MatchQ,
        Gain::Grid(grid) => GainSpec::Values(grid.values()),
    };
    let method = match config.method {
        Method::Quadrature => FidelityMethod::Quadrature,
        Method::Montecarlo => FidelityMethod::MonteCarlo { samples: config.samples },
    };
    let spec = SweepSpec {
        input: config.input.to_state()?,
        q_values,
        gains,
        cutoff: config.cutoff,
        method,
        seed: config.seed,
    };
    let points = run_sweep(&spec)?;
    for p in points.iter().filter(|p| !p.converged) {
        warnings.push(format!("point q={} g={} did not converge at N={}", p.q, p.g, p.cutoff));
    }
    Ok(points)
}
