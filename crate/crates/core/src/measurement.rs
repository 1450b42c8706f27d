//! Monte Carlo simulation of the teleportation measurement.
//!
//! Outcomes `β` are drawn from `P(β) = ⟨ψ|T†T|ψ⟩`, conditional outputs are
//! renormalized and averaged into a density matrix, and the average fidelity
//! `F = ∫ P(β) |⟨ψ|ψ_out(β)⟩|² d²β` is estimated either by sampling or, for
//! coherent inputs, by quadrature over the closed-form outcome density.
//!
//! # Random streams
//!
//! Every stream is a [`ChaCha20Rng`] created by [`stream_rng`]: the generator
//! is seeded with `seed_from_u64(seed)` and then moved to stream `index` with
//! `set_stream`. A sweep uses one seed for the whole run and gives grid point
//! `i` (row-major over the `(q, g)` grid) stream `i`, so results do not depend
//! on how points are distributed over workers.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{coherent_output_closed_form, fluctuation_second_moment};
use crate::error::{Error, Result};
use crate::fock::{coherent_state, ComplexAmplitude, FockVector, NORM_TOL};
use crate::input::InputState;
use crate::quadrature::{adaptive_gaussian_integral, gaussian_plane_integral};
use crate::transfer::{check_convergence, density_fast, outcome_fast, ConvergenceReport, TeleportParams, CONV_TOL};

/// Rejection sampling gives up below this acceptance rate.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_pair<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn check_state(params: &TeleportParams, psi: &FockVector) -> Result<()> {
    if psi.cutoff() != params.cutoff() {
        return Err(Error::DimensionMismatch { left: params.cutoff(), right: psi.cutoff() });
    }
    if !psi.is_normalized(NORM_TOL) {
        return Err(Error::InvalidInput(format!(
            "input state has norm² {:.12}; renormalize or raise the cutoff",
            psi.norm_sqr()
        )));
    }
    Ok(())
}

/// `(Var x₁, Var x₂)` for quadratures `x₁ = (a + a†)/2`, `x₂ = (a − a†)/2i`.
fn quadrature_variances(psi: &FockVector) -> (f64, f64) {
    let amps = psi.amplitudes();
    let a2: C64 = (2..psi.dim()).map(|n| amps[n - 2].conj() * amps[n] * ((n * (n - 1)) as f64).sqrt()).sum();
    let mean = psi.mean_amplitude();
    let n_bar = psi.mean_photon_number();
    let x1 = (2.0 * a2.re + 2.0 * n_bar + 1.0) / 4.0 - mean.re * mean.re;
    let x2 = (-2.0 * a2.re + 2.0 * n_bar + 1.0) / 4.0 - mean.im * mean.im;
    (x1, x2)
}

#[derive(Clone, Debug)]
enum SamplerKind {
    /// `β = α + φ` with `φ` drawn exactly from the fluctuation Gaussian.
    Coherent { alpha: C64 },
    Rejection(Rejection),
}

#[derive(Clone, Debug)]
struct Rejection {
    psi: FockVector,
    center: C64,
    /// Per-component standard deviation of the Gaussian proposal.
    sigma: f64,
    /// Envelope constant `M` with `P(β) ≤ M h(β)`.
    bound: f64,
    proposed: u64,
    accepted: u64,
}

impl Rejection {
    fn build(params: &TeleportParams, psi: &FockVector) -> Result<Self> {
        let center = psi.mean_amplitude();
        let (v1, v2) = quadrature_variances(psi);
        // the POVM adds 1/(2(1−q²)) − 1/4 of noise per component; inflating
        // keeps the proposal tails heavier than e^{−(1−q²)|β|²}
        let variance = 1.3 * (v1.max(v2).max(0.25) + 0.5 * fluctuation_second_moment(params.q()) - 0.25);
        let sigma = variance.sqrt();
        let mut rejection = Self { psi: psi.clone(), center, sigma, bound: 0.0, proposed: 0, accepted: 0 };

        let steps = 48;
        let half = 6.0 * sigma;
        let mut worst = 0.0f64;
        for i in 0..=steps {
            for j in 0..=steps {
                let offset = C64::new(-half + 2.0 * half * i as f64 / steps as f64, -half + 2.0 * half * j as f64 / steps as f64);
                let beta = center + offset;
                worst = worst.max(density_fast(params, beta, psi) / rejection.proposal_density(beta));
            }
        }
        rejection.bound = 1.2 * worst;
        let rate = 1.0 / rejection.bound;
        if rate < MIN_ACCEPTANCE {
            return Err(Error::EnvelopeFailure { rate, min: MIN_ACCEPTANCE });
        }
        Ok(rejection)
    }

    fn proposal_density(&self, beta: C64) -> f64 {
        let s2 = self.sigma * self.sigma;
        (-(beta - self.center).norm_sqr() / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2)
    }

    fn sample<R: Rng + ?Sized>(&mut self, params: &TeleportParams, rng: &mut R) -> Result<C64> {
        loop {
            let beta = self.center + gaussian_pair(rng) * self.sigma;
            let u: f64 = rng.random();
            self.proposed += 1;
            let ratio = density_fast(params, beta, &self.psi) / (self.bound * self.proposal_density(beta));
            if ratio > 1.0 {
                log::warn!("rejection envelope exceeded at β = {beta} (ratio {ratio:.3}); enlarging bound");
                self.bound *= 1.2 * ratio;
            }
            if u < ratio {
                self.accepted += 1;
                return Ok(beta);
            }
            if self.proposed >= 100_000 && (self.accepted as f64) < MIN_ACCEPTANCE * self.proposed as f64 {
                return Err(Error::EnvelopeFailure { rate: self.accepted as f64 / self.proposed as f64, min: MIN_ACCEPTANCE });
            }
        }
    }
}

/// Draws measurement outcomes from `P(β)` for a fixed input.
#[derive(Clone, Debug)]
pub struct OutcomeSampler {
    params: TeleportParams,
    kind: SamplerKind,
}

impl OutcomeSampler {
    /// Uses exact Gaussian sampling when `psi` is a coherent state and
    /// rejection sampling otherwise.
    pub fn new(params: &TeleportParams, psi: &FockVector) -> Result<Self> {
        check_state(params, psi)?;
        let alpha = psi.mean_amplitude();
        if coherent_state(alpha, params.cutoff()).fidelity(psi)? >= 1.0 - 1e-12 {
            return Ok(Self::coherent(params, alpha));
        }
        Self::rejection(params, psi)
    }

    pub fn coherent(params: &TeleportParams, alpha: ComplexAmplitude) -> Self {
        Self { params: *params, kind: SamplerKind::Coherent { alpha } }
    }

    pub fn rejection(params: &TeleportParams, psi: &FockVector) -> Result<Self> {
        check_state(params, psi)?;
        Ok(Self { params: *params, kind: SamplerKind::Rejection(Rejection::build(params, psi)?) })
    }

    pub fn is_exact_gaussian(&self) -> bool {
        matches!(self.kind, SamplerKind::Coherent { .. })
    }

    /// Mean outcome `⟨ψ|a|ψ⟩`.
    pub fn center(&self) -> C64 {
        match &self.kind {
            SamplerKind::Coherent { alpha } => *alpha,
            SamplerKind::Rejection(r) => r.center,
        }
    }

    /// Per-component spread of the outcome distribution (or its proposal).
    pub fn spread(&self) -> f64 {
        match &self.kind {
            SamplerKind::Coherent { .. } => (0.5 * fluctuation_second_moment(self.params.q())).sqrt(),
            SamplerKind::Rejection(r) => r.sigma,
        }
    }

    /// Empirical acceptance rate of the rejection sampler so far.
    pub fn acceptance_rate(&self) -> Option<f64> {
        match &self.kind {
            SamplerKind::Rejection(r) if r.proposed > 0 => Some(r.accepted as f64 / r.proposed as f64),
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<ComplexAmplitude> {
        let spread = self.spread();
        match &mut self.kind {
            SamplerKind::Coherent { alpha } => Ok(*alpha + gaussian_pair(rng) * spread),
            SamplerKind::Rejection(r) => r.sample(&self.params, rng),
        }
    }
}

/// One outcome drawn with stream 0 of `seed`.
pub fn sample_outcome(params: &TeleportParams, psi_in: &FockVector, seed: u64) -> Result<ComplexAmplitude> {
    let mut sampler = OutcomeSampler::new(params, psi_in)?;
    sampler.sample(&mut stream_rng(seed, 0))
}

/// Ensemble average of renormalized conditional outputs.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
    trace_weight: f64,
    samples: usize,
    degenerate: usize,
}

impl DensityMatrix {
    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// Mean squared norm of the averaged output vectors.
    pub fn trace_weight(&self) -> f64 {
        self.trace_weight
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Outcomes whose density fell below the floor and were left out.
    pub fn degenerate(&self) -> usize {
        self.degenerate
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity(&self, psi: &FockVector) -> Result<f64> {
        if psi.dim() != self.entries.nrows() {
            return Err(Error::DimensionMismatch { left: self.entries.nrows() - 1, right: psi.cutoff() });
        }
        Ok(psi.amplitudes().dotc(&(&self.entries * psi.amplitudes())).re)
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut eig: Vec<f64> = self.entries.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        eig
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.entries - self.entries.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn average_output(params: &TeleportParams, psi_in: &FockVector, n_samples: usize, seed: u64) -> Result<DensityMatrix> {
    if n_samples == 0 {
        return Err(Error::InvalidParam("at least one sample is required".into()));
    }
    let mut sampler = OutcomeSampler::new(params, psi_in)?;
    let mut rng = stream_rng(seed, 0);
    let dim = params.dim();
    let mut entries = DMatrix::<C64>::zeros(dim, dim);
    let mut weight = 0.0;
    let mut degenerate = 0;
    let one = C64::new(1.0, 0.0);
    for _ in 0..n_samples {
        let beta = sampler.sample(&mut rng)?;
        match outcome_fast(params, beta, psi_in).out_state {
            Some(out) => {
                let v = out.amplitudes();
                entries.gerc(one, v, v, one);
                weight += out.norm_sqr();
            }
            None => degenerate += 1,
        }
    }
    if degenerate > 0 {
        log::warn!("{degenerate} of {n_samples} sampled outcomes were degenerate");
    }
    let scale = 1.0 / n_samples as f64;
    entries *= C64::new(scale, 0.0);
    // exact Hermitian symmetrization; each rank-one term already is Hermitian
    let entries = (&entries + entries.adjoint()) * C64::new(0.5, 0.0);
    Ok(DensityMatrix { entries, trace_weight: weight * scale, samples: n_samples, degenerate })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityMethod {
    /// Closed-form outcome density on a radial × angular Gauss–Laguerre grid;
    /// coherent inputs only.
    Quadrature,
    MonteCarlo { samples: usize },
}

/// Average fidelity at one `(q, g)` point.
///
/// For quadrature, `fidelity_stderr` holds the grid-doubling error estimate
/// and `n_samples` the number of grid nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub q: f64,
    pub g: f64,
    pub cutoff: usize,
    pub fidelity_mean: f64,
    pub fidelity_stderr: f64,
    pub n_samples: usize,
    pub phi_second_moment: f64,
    pub converged: bool,
}

impl SweepPoint {
    /// Pools two Monte Carlo estimates of the same point, weighting by
    /// sample counts. Associative and symmetric up to rounding.
    pub fn merge(&self, other: &SweepPoint) -> Result<SweepPoint> {
        if self.q != other.q || self.g != other.g || self.cutoff != other.cutoff {
            return Err(Error::InvalidParam("cannot merge estimates of different sweep points".into()));
        }
        let (n1, n2) = (self.n_samples as f64, other.n_samples as f64);
        let n = n1 + n2;
        let mean = (n1 * self.fidelity_mean + n2 * other.fidelity_mean) / n;
        // sum of squared deviations recovered from stderr² = var/n, var = m2/(n−1)
        let m2 = |p: &SweepPoint, k: f64| p.fidelity_stderr.powi(2) * k * (k - 1.0);
        let delta = other.fidelity_mean - self.fidelity_mean;
        let total_m2 = m2(self, n1) + m2(other, n2) + delta * delta * n1 * n2 / n;
        let stderr = if n > 1.0 { (total_m2 / (n - 1.0) / n).sqrt() } else { 0.0 };
        Ok(SweepPoint {
            q: self.q,
            g: self.g,
            cutoff: self.cutoff,
            fidelity_mean: mean,
            fidelity_stderr: stderr,
            n_samples: self.n_samples + other.n_samples,
            phi_second_moment: (n1 * self.phi_second_moment + n2 * other.phi_second_moment) / n,
            converged: self.converged && other.converged,
        })
    }
}

pub fn average_fidelity(params: &TeleportParams, input: &InputState, method: FidelityMethod, seed: u64) -> Result<SweepPoint> {
    average_fidelity_on_stream(params, input, method, seed, 0)
}

fn average_fidelity_on_stream(
    params: &TeleportParams,
    input: &InputState,
    method: FidelityMethod,
    seed: u64,
    stream: u64,
) -> Result<SweepPoint> {
    match method {
        FidelityMethod::Quadrature => quadrature_fidelity(params, input),
        FidelityMethod::MonteCarlo { samples } => monte_carlo_fidelity(params, input, samples, &mut stream_rng(seed, stream)),
    }
}

fn quadrature_fidelity(params: &TeleportParams, input: &InputState) -> Result<SweepPoint> {
    let alpha = input.coherent_amplitude().ok_or_else(|| Error::UnsupportedMethod {
        method: "quadrature",
        reason: "the closed-form outcome density is only available for coherent inputs".into(),
    })?;
    let width = 1.0 - params.q() * params.q();
    let integral = adaptive_gaussian_integral(width, 1e-13, 256, |phi| {
        let out = coherent_output_closed_form(params, alpha, alpha + phi).out_amplitude;
        (-(alpha - out).norm_sqr()).exp()
    });
    let phi_second_moment = gaussian_plane_integral(width, 8, |phi| phi.norm_sqr());
    Ok(SweepPoint {
        q: params.q(),
        g: params.g(),
        cutoff: params.cutoff(),
        fidelity_mean: integral.value,
        fidelity_stderr: integral.error_estimate,
        n_samples: integral.order * integral.order,
        phi_second_moment,
        converged: integral.error_estimate <= CONV_TOL,
    })
}

fn monte_carlo_fidelity<R: Rng + ?Sized>(params: &TeleportParams, input: &InputState, samples: usize, rng: &mut R) -> Result<SweepPoint> {
    if samples == 0 {
        return Err(Error::InvalidParam("at least one sample is required".into()));
    }
    let psi = input.to_fock(params.cutoff())?;
    check_state(params, &psi)?;
    let mut sampler = match input.coherent_amplitude() {
        Some(alpha) => OutcomeSampler::coherent(params, alpha),
        None => OutcomeSampler::new(params, &psi)?,
    };
    let center = psi.mean_amplitude();

    let (mut sum, mut sum_sq, mut phi_sum) = (0.0, 0.0, 0.0);
    for _ in 0..samples {
        let beta = sampler.sample(rng)?;
        let fidelity = match outcome_fast(params, beta, &psi).out_state {
            Some(out) => psi.fidelity(&out)?,
            None => 0.0,
        };
        sum += fidelity;
        sum_sq += fidelity * fidelity;
        phi_sum += (beta - center).norm_sqr();
    }
    let n = samples as f64;
    let mean = sum / n;
    let stderr = if samples > 1 { ((sum_sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt() } else { 0.0 };

    let spread = sampler.spread();
    let mut convergence = ConvergenceReport { max_delta: 0.0, converged: true };
    for offset in [C64::new(0.0, 0.0), C64::new(2.0, 0.0), C64::new(-2.0, 0.0), C64::new(0.0, 2.0), C64::new(0.0, -2.0)] {
        convergence = convergence.combine(check_convergence(params, center + offset * spread, &psi)?);
    }
    Ok(SweepPoint {
        q: params.q(),
        g: params.g(),
        cutoff: params.cutoff(),
        fidelity_mean: mean,
        fidelity_stderr: stderr,
        n_samples: samples,
        phi_second_moment: phi_sum / n,
        converged: convergence.converged,
    })
}

/// Pearson correlation between `Re φ` and `Re(⟨a⟩_out − gα)` over sampled
/// outcomes for a coherent input, with output amplitudes taken from the
/// numeric conditional states. When the output amplitude does not vary
/// beyond numerical resolution the population correlation is zero and `0.0`
/// is returned.
pub fn gain_correlation(params: &TeleportParams, alpha: ComplexAmplitude, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples < 2 {
        return Err(Error::InvalidParam("correlation needs at least two samples".into()));
    }
    let psi = coherent_state(alpha, params.cutoff());
    check_state(params, &psi)?;
    let mut sampler = OutcomeSampler::coherent(params, alpha);
    let mut rng = stream_rng(seed, 0);
    let target = alpha * params.g();
    let mut xs = Vec::with_capacity(n_samples);
    let mut ys = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let beta = sampler.sample(&mut rng)?;
        let out = outcome_fast(params, beta, &psi);
        let Some(state) = out.out_state else { continue };
        xs.push((beta - alpha).re);
        ys.push((state.mean_amplitude() - target).re);
    }
    Ok(pearson(&xs, &ys))
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if syy <= 1e-18 * sxx {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainSpec {
    Values(Vec<f64>),
    /// `g = q` at every grid point.
    MatchQ,
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub input: InputState,
    pub q_values: Vec<f64>,
    pub gains: GainSpec,
    pub cutoff: usize,
    pub method: FidelityMethod,
    pub seed: u64,
}

/// Evaluates every `(q, g)` point in parallel. Output is ordered row-major by
/// `(q index, g index)` and point `i` uses random stream `i`.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    let mut grid = Vec::new();
    for &q in &spec.q_values {
        match &spec.gains {
            GainSpec::Values(gs) => grid.extend(gs.iter().map(|&g| (q, g))),
            GainSpec::MatchQ => grid.push((q, q)),
        }
    }
    grid.into_par_iter()
        .enumerate()
        .map(|(index, (q, g))| {
            let params = TeleportParams::new(q, g, spec.cutoff)?;
            average_fidelity_on_stream(&params, &spec.input, spec.method, spec.seed, index as u64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::number_state;
    use crate::transfer::outcome_density;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn seeded_streams_reproduce() {
        let p = TeleportParams::new(0.4, 1.0, 30).unwrap();
        let psi = number_state(1, 30).unwrap();
        assert_eq!(sample_outcome(&p, &psi, 9).unwrap(), sample_outcome(&p, &psi, 9).unwrap());
        assert_ne!(sample_outcome(&p, &psi, 9).unwrap(), sample_outcome(&p, &psi, 10).unwrap());
        let mut a = stream_rng(5, 0);
        let mut b = stream_rng(5, 1);
        assert_ne!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn coherent_detection() {
        let p = TeleportParams::new(0.4, 1.0, 40).unwrap();
        assert!(OutcomeSampler::new(&p, &coherent_state(c(0.5, -0.5), 40)).unwrap().is_exact_gaussian());
        assert!(!OutcomeSampler::new(&p, &number_state(2, 40).unwrap()).unwrap().is_exact_gaussian());
    }

    #[test]
    fn coherent_sample_moments() {
        let q = 1.0 / 3.0;
        let alpha = c(0.7, -0.4);
        let p = TeleportParams::new(q, 1.0, 30).unwrap();
        let mut sampler = OutcomeSampler::coherent(&p, alpha);
        let mut rng = stream_rng(2024, 0);
        let n = 100_000;
        let phis: Vec<C64> = (0..n).map(|_| sampler.sample(&mut rng).unwrap() - alpha).collect();
        let mean: C64 = phis.iter().sum::<C64>() / n as f64;
        let sigma_mean = (0.5 * fluctuation_second_moment(q) / n as f64).sqrt();
        assert!(mean.re.abs() <= 3.0 * sigma_mean && mean.im.abs() <= 3.0 * sigma_mean);
        let m2: Vec<f64> = phis.iter().map(|z| z.norm_sqr()).collect();
        let avg = m2.iter().sum::<f64>() / n as f64;
        let sd = (m2.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((avg - 1.125).abs() <= 3.0 * sd / (n as f64).sqrt(), "{avg}");
    }

    #[test]
    fn rejection_sampler_reproduces_coherent_statistics() {
        let q = 0.5;
        let alpha = c(0.4, 0.3);
        let cutoff = 40;
        let p = TeleportParams::new(q, 1.0, cutoff).unwrap();
        let mut sampler = OutcomeSampler::rejection(&p, &coherent_state(alpha, cutoff)).unwrap();
        let mut rng = stream_rng(77, 0);
        let n = 20_000;
        let m2: Vec<f64> = (0..n).map(|_| (sampler.sample(&mut rng).unwrap() - alpha).norm_sqr()).collect();
        let avg = m2.iter().sum::<f64>() / n as f64;
        let sd = (m2.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((avg - fluctuation_second_moment(q)).abs() <= 3.0 * sd / (n as f64).sqrt(), "{avg}");
        assert!(sampler.acceptance_rate().unwrap() > 0.3);
    }

    // χ² of a 2-D histogram of rejection samples against cell probabilities
    // integrated from outcome_density.
    #[test]
    fn vacuum_histogram_matches_density() {
        let q = 0.5;
        let cutoff = 30;
        let p = TeleportParams::new(q, 1.0, cutoff).unwrap();
        let vac = number_state(0, cutoff).unwrap();
        let mut sampler = OutcomeSampler::rejection(&p, &vac).unwrap();
        let mut rng = stream_rng(4, 0);
        let n = 20_000;
        let bins = 6;
        let edge = 2.4;
        let width = 2.0 * edge / bins as f64;
        let mut counts = vec![0usize; bins * bins + 1];
        for _ in 0..n {
            let beta = sampler.sample(&mut rng).unwrap();
            let i = ((beta.re + edge) / width).floor();
            let j = ((beta.im + edge) / width).floor();
            if (0.0..bins as f64).contains(&i) && (0.0..bins as f64).contains(&j) {
                counts[i as usize * bins + j as usize] += 1;
            } else {
                counts[bins * bins] += 1;
            }
        }
        let sub = 12;
        let mut probs = vec![0.0; bins * bins + 1];
        for i in 0..bins {
            for j in 0..bins {
                let mut mass = 0.0;
                for a in 0..sub {
                    for b in 0..sub {
                        let h = width / sub as f64;
                        let beta = c(-edge + i as f64 * width + (a as f64 + 0.5) * h, -edge + j as f64 * width + (b as f64 + 0.5) * h);
                        mass += outcome_density(&p, beta, &vac).unwrap() * h * h;
                    }
                }
                probs[i * bins + j] = mass;
            }
        }
        probs[bins * bins] = 1.0 - probs[..bins * bins].iter().sum::<f64>();
        let chi2: f64 = counts
            .iter()
            .zip(&probs)
            .map(|(&k, &pr)| (k as f64 - n as f64 * pr).powi(2) / (n as f64 * pr))
            .sum();
        // 36 degrees of freedom: χ² p = 0.01 at 58.6
        assert!(chi2 < 58.6, "χ² = {chi2}");
    }

    #[test]
    fn matched_gain_output_is_pure() {
        let cutoff = 40;
        let p = TeleportParams::matched_gain(0.5, cutoff).unwrap();
        let psi = coherent_state(c(1.0, 0.0), cutoff);
        let rho = average_output(&p, &psi, 500, 1).unwrap();
        assert!(rho.eigenvalues()[0] >= 1.0 - 1e-6);
        assert!(rho.fidelity(&coherent_state(c(0.5, 0.0), cutoff)).unwrap() >= 1.0 - 1e-6);
    }

    #[test]
    fn density_matrix_invariants() {
        let cutoff = 30;
        let p = TeleportParams::new(0.3, 0.8, cutoff).unwrap();
        let psi = InputState::Cat(c(0.8, 0.0)).to_fock(cutoff).unwrap();
        let rho = average_output(&p, &psi, 300, 3).unwrap();
        assert!(rho.hermiticity_error() <= 1e-12);
        assert!(rho.eigenvalues().last().copied().unwrap() >= -1e-10);
        assert!(rho.trace() <= 1.0 + 1e-9);
        assert!((rho.trace() - rho.trace_weight()).abs() <= 1e-9);
        assert_eq!(rho.samples(), 300);
        assert_eq!(rho.degenerate(), 0);
        assert!(average_output(&p, &psi, 0, 3).is_err());
    }

    #[test]
    fn classical_limit_fidelity_is_half() {
        let cutoff = 40;
        let p = TeleportParams::new(0.0, 1.0, cutoff).unwrap();
        let alpha = c(0.6, 0.2);
        let psi = coherent_state(alpha, cutoff);
        let n = 4000;
        let rho = average_output(&p, &psi, n, 8).unwrap();
        let f = rho.fidelity(&psi).unwrap();
        // per-sample fidelity e^{−|φ|²} with |φ|² ~ Exp(1): variance 1/3 − 1/4
        let stderr = (1.0 / 12.0 / n as f64).sqrt();
        assert!((f - 0.5).abs() <= 3.0 * stderr, "{f}");
    }

    #[test]
    fn quadrature_fidelity_values() {
        for q in [0.0, 0.2, 1.0 / 3.0, 0.75] {
            let p = TeleportParams::new(q, 1.0, 40).unwrap();
            let point = average_fidelity(&p, &InputState::Coherent(c(0.9, 0.3)), FidelityMethod::Quadrature, 0).unwrap();
            assert_relative_eq!(point.fidelity_mean, (1.0 + q) / 2.0, epsilon = 1e-10);
            assert!(point.converged);
            assert_relative_eq!(point.phi_second_moment, 1.0 / (1.0 - q * q), epsilon = 1e-12);
        }
        let p = TeleportParams::matched_gain(1.0 / 3.0, 40).unwrap();
        let point = average_fidelity(&p, &InputState::Coherent(c(1.0, 0.0)), FidelityMethod::Quadrature, 0).unwrap();
        assert_relative_eq!(point.fidelity_mean, (-4.0f64 / 9.0).exp(), epsilon = 1e-12);
        assert_relative_eq!(point.fidelity_mean, 0.6412, epsilon = 1e-4);

        let err = average_fidelity(&p, &InputState::Number(1), FidelityMethod::Quadrature, 0);
        assert!(matches!(err, Err(Error::UnsupportedMethod { .. })));
    }

    #[test]
    fn monte_carlo_matches_quadrature() {
        let cutoff = 100;
        let input = InputState::Coherent(c(0.5, 0.0));
        for q in [0.0, 1.0 / 3.0, 0.5, 0.9] {
            for g in [q, 1.0] {
                let p = TeleportParams::new(q, g, cutoff).unwrap();
                let quad = average_fidelity(&p, &input, FidelityMethod::Quadrature, 0).unwrap();
                let mc = average_fidelity(&p, &input, FidelityMethod::MonteCarlo { samples: 1500 }, 17).unwrap();
                let tol = 3.0 * mc.fidelity_stderr + 1e-9;
                assert!((mc.fidelity_mean - quad.fidelity_mean).abs() <= tol, "q={q} g={g}: {mc:?} vs {quad:?}");
                assert!(mc.converged, "q={q} g={g}");
            }
        }
    }

    #[test]
    fn number_state_photon_loss() {
        let cutoff = 40;
        let psi = number_state(1, cutoff).unwrap();
        let mut vacuum = Vec::new();
        for q in [0.2, 0.5, 0.8] {
            let p = TeleportParams::matched_gain(q, cutoff).unwrap();
            let rho = average_output(&p, &psi, 1500, 21).unwrap();
            vacuum.push(rho.entries()[(0, 0)].re);
        }
        assert!(vacuum.iter().all(|&v| v > 0.0));
        assert!(vacuum[0] > vacuum[1] && vacuum[1] > vacuum[2], "{vacuum:?}");
    }

    #[test]
    fn correlation_signs() {
        let alpha = c(0.8, 0.0);
        let n = 3000;
        let positive = gain_correlation(&TeleportParams::new(1.0 / 3.0, 1.0, 60).unwrap(), alpha, n, 1).unwrap();
        assert!(positive > 0.999, "{positive}");
        let negative = gain_correlation(&TeleportParams::new(0.5, 0.2, 60).unwrap(), alpha, n, 1).unwrap();
        assert!(negative < -0.999, "{negative}");
        let none = gain_correlation(&TeleportParams::matched_gain(0.5, 60).unwrap(), alpha, n, 1).unwrap();
        assert!(none.abs() <= 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn merge_pools_by_count() {
        let a = SweepPoint { q: 0.1, g: 1.0, cutoff: 20, fidelity_mean: 0.5, fidelity_stderr: 0.01, n_samples: 100, phi_second_moment: 1.0, converged: true };
        let b = SweepPoint { fidelity_mean: 0.6, fidelity_stderr: 0.02, n_samples: 300, phi_second_moment: 2.0, ..a };
        let merged = a.merge(&b).unwrap();
        assert_relative_eq!(merged.fidelity_mean, 0.575, epsilon = 1e-15);
        assert_relative_eq!(merged.phi_second_moment, 1.75, epsilon = 1e-15);
        assert_eq!(merged.n_samples, 400);
        let other = b.merge(&a).unwrap();
        assert_relative_eq!(merged.fidelity_stderr, other.fidelity_stderr, epsilon = 1e-15);
        let c3 = SweepPoint { fidelity_mean: 0.55, n_samples: 50, ..a };
        let left = a.merge(&b).unwrap().merge(&c3).unwrap();
        let right = a.merge(&b.merge(&c3).unwrap()).unwrap();
        assert_relative_eq!(left.fidelity_mean, right.fidelity_mean, epsilon = 1e-14);
        assert_relative_eq!(left.fidelity_stderr, right.fidelity_stderr, epsilon = 1e-14);
        assert!(a.merge(&SweepPoint { q: 0.2, ..a }).is_err());
    }

    #[test]
    fn sweep_is_ordered_and_deterministic() {
        let spec = SweepSpec {
            input: InputState::Coherent(c(0.5, 0.0)),
            q_values: vec![0.0, 0.3, 0.6],
            gains: GainSpec::Values(vec![0.5, 1.0]),
            cutoff: 30,
            method: FidelityMethod::MonteCarlo { samples: 50 },
            seed: 12,
        };
        let first = run_sweep(&spec).unwrap();
        let again = run_sweep(&spec).unwrap();
        assert_eq!(first, again);
        let order: Vec<(f64, f64)> = first.iter().map(|p| (p.q, p.g)).collect();
        assert_eq!(order, vec![(0.0, 0.5), (0.0, 1.0), (0.3, 0.5), (0.3, 1.0), (0.6, 0.5), (0.6, 1.0)]);
        let matched = run_sweep(&SweepSpec { gains: GainSpec::MatchQ, method: FidelityMethod::Quadrature, ..spec }).unwrap();
        assert!(matched.iter().all(|p| p.q == p.g));
    }
}
