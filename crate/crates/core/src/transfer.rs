//! Numeric transfer operator `T(β)` and its POVM `T†(β)T(β)`.
//!
//! For outcome `β` of the field-difference measurement, entanglement `q` and
//! gain `g`,
//!
//! ```text
//! T(β)   = √((1−q²)/π) · D(gβ) · diag(qⁿ) · D(−β)
//! T†T(β) =   (1−q²)/π  · D(β)  · diag(q²ⁿ) · D(−β)
//! ```
//!
//! and `T(β)|ψ⟩ = √P(β) |ψ_out(β)⟩` gives both the outcome density and the
//! conditional output state. All matrices are built at the cutoff carried by
//! [`TeleportParams`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analytic::epr_state;
use crate::error::{Error, Result};
use crate::fock::{displacement_block, displacement_matrix, ComplexAmplitude, FockVector, OperatorMatrix, NORM_TOL};

/// Densities at or below this value are treated as degenerate outcomes.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Maximum change of any reported quantity between cutoffs `N` and `2N`.
pub const CONV_TOL: f64 = 1e-6;

/// Entanglement `q ∈ [0, 1)`, gain `g ≥ 0` and Fock cutoff `N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeleportParams {
    q: f64,
    g: f64,
    cutoff: usize,
}

impl TeleportParams {
    pub fn new(q: f64, g: f64, cutoff: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidParam(format!("entanglement q = {q} must lie in [0, 1)")));
        }
        if !g.is_finite() || g < 0.0 {
            return Err(Error::InvalidParam(format!("gain g = {g} must be finite and non-negative")));
        }
        Ok(Self { q, g, cutoff })
    }

    /// Parameters at the attenuation point `g = q`.
    pub fn matched_gain(q: f64, cutoff: usize) -> Result<Self> {
        Self::new(q, q, cutoff)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn with_cutoff(self, cutoff: usize) -> Self {
        Self { cutoff, ..self }
    }

    /// `√((1−q²)/π)`.
    pub fn prefactor(&self) -> f64 {
        ((1.0 - self.q * self.q) / PI).sqrt()
    }

    /// `qⁿ` for `n = 0..=N`.
    fn filter(&self) -> Vec<f64> {
        filter_weights(self.q, self.dim())
    }
}

fn filter_weights(q: f64, dim: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(dim);
    let mut acc = 1.0;
    for _ in 0..dim {
        w.push(acc);
        acc *= q;
    }
    w
}

fn check_beta(beta: ComplexAmplitude) -> Result<()> {
    if beta.re.is_finite() && beta.im.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("outcome β = {beta} is not finite")))
    }
}

fn check_input(params: &TeleportParams, psi: &FockVector) -> Result<()> {
    if psi.cutoff() != params.cutoff {
        return Err(Error::DimensionMismatch { left: params.cutoff, right: psi.cutoff() });
    }
    if !psi.is_normalized(NORM_TOL) {
        return Err(Error::InvalidInput(format!(
            "input state has norm² {:.12}; renormalize or raise the cutoff",
            psi.norm_sqr()
        )));
    }
    Ok(())
}

fn warn_cutoff(params: &TeleportParams, beta: ComplexAmplitude) {
    let n = params.cutoff as f64;
    let reach = beta.norm() * params.g.max(1.0);
    if (reach + n.sqrt() / 2.0).powi(2) > n {
        log::warn!("|β| = {:.3} with g = {} is close to the validity limit of cutoff {}", beta.norm(), params.g, params.cutoff);
    }
}

/// `T(β)` materialized in the number basis.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    entries: OperatorMatrix,
    params: TeleportParams,
    beta: ComplexAmplitude,
}

impl TransferMatrix {
    pub fn entries(&self) -> &OperatorMatrix {
        &self.entries
    }

    pub fn params(&self) -> &TeleportParams {
        &self.params
    }

    pub fn beta(&self) -> ComplexAmplitude {
        self.beta
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.entries.singular_values().max()
    }
}

pub fn build_transfer(params: &TeleportParams, beta: ComplexAmplitude) -> Result<TransferMatrix> {
    check_beta(beta)?;
    warn_cutoff(params, beta);
    let mut restore = displacement_matrix(beta * params.g, params.cutoff);
    for (mut col, w) in restore.column_iter_mut().zip(params.filter()) {
        col *= C64::new(w * params.prefactor(), 0.0);
    }
    let entries = restore * displacement_matrix(-beta, params.cutoff);
    Ok(TransferMatrix { entries, params: *params, beta })
}

/// Measurement outcome together with its density and conditional output.
#[derive(Clone, Debug)]
pub struct ConditionalOutcome {
    pub beta: ComplexAmplitude,
    /// Probability density per unit `d²β`.
    pub density: f64,
    /// Normalized output; `None` when `density ≤ DENSITY_FLOOR`.
    pub out_state: Option<FockVector>,
}

impl ConditionalOutcome {
    fn from_unnormalized(beta: ComplexAmplitude, v: DVector<C64>) -> Self {
        let density = v.norm_squared();
        let out_state = (density > DENSITY_FLOOR)
            .then(|| FockVector::from_dvector(v.unscale(density.sqrt())).ok())
            .flatten();
        Self { beta, density, out_state }
    }

    pub fn is_degenerate(&self) -> bool {
        self.out_state.is_none()
    }
}

/// Applies the assembled transfer matrix to a normalized input.
pub fn apply_transfer(params: &TeleportParams, beta: ComplexAmplitude, psi_in: &FockVector) -> Result<ConditionalOutcome> {
    check_input(params, psi_in)?;
    let t = build_transfer(params, beta)?;
    Ok(ConditionalOutcome::from_unnormalized(beta, t.entries * psi_in.amplitudes()))
}

/// `T(β)ψ` without assembling `T`: two displacement applications around the
/// `qⁿ` filter, touching only the columns of `D(−β)` where `ψ` has support.
pub(crate) fn transfer_vector(params: &TeleportParams, beta: ComplexAmplitude, psi: &FockVector) -> DVector<C64> {
    let mut filtered = filtered_projection(params, beta, psi);
    filtered *= C64::new(params.prefactor(), 0.0);
    displacement_matrix(beta * params.g, params.cutoff) * filtered
}

/// `diag(qⁿ) D(−β) ψ`.
fn filtered_projection(params: &TeleportParams, beta: ComplexAmplitude, psi: &FockVector) -> DVector<C64> {
    let support = psi.effective_support();
    let d = displacement_block(-beta, params.dim(), support);
    let mut v = d * psi.amplitudes().rows(0, support);
    for (x, w) in v.iter_mut().zip(params.filter()) {
        *x *= w;
    }
    v
}

/// Outcome density `P(β) = ‖diag(qⁿ)D(−β)ψ‖² (1−q²)/π`, which equals
/// `⟨ψ|T†T|ψ⟩` without depending on `g`.
pub(crate) fn density_fast(params: &TeleportParams, beta: ComplexAmplitude, psi: &FockVector) -> f64 {
    filtered_projection(params, beta, psi).norm_squared() * params.prefactor().powi(2)
}

pub(crate) fn outcome_fast(params: &TeleportParams, beta: ComplexAmplitude, psi: &FockVector) -> ConditionalOutcome {
    ConditionalOutcome::from_unnormalized(beta, transfer_vector(params, beta, psi))
}

/// POVM element `(1−q²)/π · D(β) diag(q²ⁿ) D(−β)`. The gain never enters.
pub fn povm_element(params: &TeleportParams, beta: ComplexAmplitude) -> Result<OperatorMatrix> {
    check_beta(beta)?;
    let weight = params.prefactor().powi(2);
    let mut left = displacement_matrix(beta, params.cutoff);
    for (mut col, w) in left.column_iter_mut().zip(filter_weights(params.q * params.q, params.dim())) {
        col *= C64::new(w * weight, 0.0);
    }
    Ok(left * displacement_matrix(-beta, params.cutoff))
}

/// Top-left `block × block` corner of [`povm_element`], summing over all
/// `N + 1` intermediate number states.
pub fn povm_block(params: &TeleportParams, beta: ComplexAmplitude, block: usize) -> Result<OperatorMatrix> {
    check_beta(beta)?;
    if block > params.dim() {
        return Err(Error::CutoffExceeded { n: block - 1, cutoff: params.cutoff });
    }
    let weight = params.prefactor().powi(2);
    let rows = displacement_block(beta, block, params.dim());
    let mut weighted = rows.clone();
    for (mut col, w) in weighted.column_iter_mut().zip(filter_weights(params.q * params.q, params.dim())) {
        col *= C64::new(w * weight, 0.0);
    }
    Ok(weighted * rows.adjoint())
}

pub fn outcome_density(params: &TeleportParams, beta: ComplexAmplitude, psi_in: &FockVector) -> Result<f64> {
    check_input(params, psi_in)?;
    let povm = povm_element(params, beta)?;
    Ok(psi_in.amplitudes().dotc(&(povm * psi_in.amplitudes())).re)
}

/// Conditional output built by contracting the input and the entangled
/// resource with the measurement projection, term by term:
///
/// ```text
///   Σₙ λₙ |ψ⟩ ⊗ |n⟩_r ⊗ |n⟩_b   projected on   (1/√π) Σₘ ⟨m|D(−β) ⊗ ⟨m|_r
///   → (1/√π) Σₙ λₙ ⟨n|D(−β)|ψ⟩ |n⟩_b,   then D(gβ) on mode b
/// ```
///
/// with Schmidt coefficients `λₙ = √(1−q²) qⁿ`. No transfer matrix is formed.
pub fn oracle_conditional_state(
    params: &TeleportParams,
    beta: ComplexAmplitude,
    psi_in: &FockVector,
) -> Result<ConditionalOutcome> {
    check_input(params, psi_in)?;
    check_beta(beta)?;
    let dim = params.dim();
    let schmidt = epr_state(params.q, params.cutoff)?.schmidt;
    let projection = displacement_matrix(-beta, params.cutoff);
    let inv_sqrt_pi = 1.0 / PI.sqrt();

    let mut remote = DVector::<C64>::zeros(dim);
    for n in 0..dim {
        // ⟨m|n⟩_r = δₘₙ: only the m = n projection term survives
        let mut overlap = C64::new(0.0, 0.0);
        for (k, amp) in psi_in.amplitudes().iter().enumerate() {
            overlap += projection[(n, k)] * amp;
        }
        remote[n] = overlap * schmidt[n] * inv_sqrt_pi;
    }
    let restore = displacement_matrix(beta * params.g, params.cutoff);
    let mut out = DVector::<C64>::zeros(dim);
    for m in 0..dim {
        for n in 0..dim {
            out[m] += restore[(m, n)] * remote[n];
        }
    }
    Ok(ConditionalOutcome::from_unnormalized(beta, out))
}

/// Riemann sum of the POVM over the square lattice `β = h(i + ij)` inside the
/// disc `|β| ≤ radius`, restricted to the `block × block` low-photon corner.
#[derive(Clone, Debug)]
pub struct CompletenessReport {
    pub sum: OperatorMatrix,
    /// `max |Σ − 1|` over the block.
    pub max_deviation: f64,
    pub points: usize,
}

pub fn povm_completeness(params: &TeleportParams, radius: f64, step: f64, block: usize) -> Result<CompletenessReport> {
    if !(radius > 0.0 && step > 0.0 && radius.is_finite() && step.is_finite()) {
        return Err(Error::InvalidParam(format!("radius {radius} and step {step} must be positive")));
    }
    let half = (radius / step + 1e-9).floor() as i64;
    let mut sum = DMatrix::<C64>::zeros(block, block);
    let mut points = 0;
    for i in -half..=half {
        for j in -half..=half {
            let beta = C64::new(i as f64 * step, j as f64 * step);
            if beta.norm() > radius + 1e-12 {
                continue;
            }
            sum += povm_block(params, beta, block)?;
            points += 1;
        }
    }
    sum *= C64::new(step * step, 0.0);
    let identity = DMatrix::<C64>::identity(block, block);
    let max_deviation = (&sum - identity).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(CompletenessReport { sum, max_deviation, points })
}

/// Result of recomputing an outcome at twice the cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub max_delta: f64,
    pub converged: bool,
}

impl ConvergenceReport {
    pub fn combine(self, other: Self) -> Self {
        Self { max_delta: self.max_delta.max(other.max_delta), converged: self.converged && other.converged }
    }
}

/// Recomputes the outcome density and output state at cutoff `2N` and
/// reports the largest change: density, each output amplitude, and output
/// weight that landed above `N`.
pub fn check_convergence(params: &TeleportParams, beta: ComplexAmplitude, psi_in: &FockVector) -> Result<ConvergenceReport> {
    check_input(params, psi_in)?;
    check_beta(beta)?;
    let coarse = outcome_fast(params, beta, psi_in);
    let fine_params = params.with_cutoff(2 * params.cutoff.max(1));
    let fine = outcome_fast(&fine_params, beta, &psi_in.with_cutoff(fine_params.cutoff));

    let mut delta = (coarse.density - fine.density).abs();
    match (&coarse.out_state, &fine.out_state) {
        (Some(c), Some(f)) => {
            let f_amps = f.amplitudes();
            for (n, a) in c.amplitudes().iter().enumerate() {
                delta = delta.max((a - f_amps[n]).norm());
            }
            let overflow: f64 = f_amps.rows(c.dim(), f.dim() - c.dim()).norm_squared();
            delta = delta.max(overflow);
        }
        (None, None) => {}
        _ => delta = f64::INFINITY,
    }
    Ok(ConvergenceReport { max_delta: delta, converged: delta <= CONV_TOL })
}

/// Eigenvector `D(β)|n⟩` of the POVM element at `β`.
pub fn displaced_number_state(n: usize, beta: ComplexAmplitude, cutoff: usize) -> Result<FockVector> {
    if n > cutoff {
        return Err(Error::CutoffExceeded { n, cutoff });
    }
    let column = displacement_block(beta, cutoff + 1, n + 1).column(n).into_owned();
    FockVector::from_dvector(column)
}
