//! Closed-form teleportation results.
//!
//! These serve two roles: fast evaluators for sweeps, and an independent
//! check on the matrix construction in [`crate::transfer`].

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{coherent_state, displacement_matrix, ladder_matrices, ln_factorials, ComplexAmplitude, FockVector};
use crate::transfer::{build_transfer, TeleportParams};

/// Schmidt coefficients of the two-mode squeezed resource
/// `√(1−q²) Σₙ qⁿ |n⟩|n⟩`, truncated at the cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct EprCoefficients {
    pub schmidt: Vec<f64>,
    /// `1 − Σ λₙ²`, i.e. `q^{2(N+1)}`.
    pub truncation_weight: f64,
}

pub fn epr_state(q: f64, cutoff: usize) -> Result<EprCoefficients> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidParam(format!("entanglement q = {q} must lie in [0, 1)")));
    }
    let norm = (1.0 - q * q).sqrt();
    let mut schmidt = Vec::with_capacity(cutoff + 1);
    let mut power = 1.0;
    for _ in 0..=cutoff {
        schmidt.push(norm * power);
        power *= q;
    }
    // geometric tail, evaluated directly instead of 1 − Σ to avoid cancellation
    let truncation_weight = q.powi(2 * (cutoff as i32 + 1));
    Ok(EprCoefficients { schmidt, truncation_weight })
}

/// How the entanglement resource is specified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Squeezing {
    /// Entanglement parameter `q`.
    Q(f64),
    /// Noise suppression ratio `s`.
    S(f64),
    /// Noise suppression in dB.
    Db(f64),
}

/// Consistent `(q, s, dB)` triple with `q = (1−s)/(1+s)` and `dB = −10 log₁₀ s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezeSpec {
    pub q: f64,
    pub s: f64,
    pub db: f64,
}

pub fn squeeze_convert(input: Squeezing) -> Result<SqueezeSpec> {
    let s = match input {
        Squeezing::Q(q) => {
            if !(0.0..1.0).contains(&q) {
                return Err(Error::InvalidParam(format!("q = {q} must lie in [0, 1)")));
            }
            (1.0 - q) / (1.0 + q)
        }
        Squeezing::S(s) => {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::InvalidParam(format!("s = {s} must lie in (0, 1]")));
            }
            s
        }
        Squeezing::Db(db) => {
            if !(db >= 0.0 && db.is_finite()) {
                return Err(Error::InvalidParam(format!("{db} dB must be finite and non-negative")));
            }
            10f64.powf(-db / 10.0)
        }
    };
    let q = match input {
        Squeezing::Q(q) => q,
        _ => (1.0 - s) / (1.0 + s),
    };
    let db = match input {
        Squeezing::Db(db) => db,
        _ => -10.0 * s.log10(),
    };
    if q >= 1.0 {
        return Err(Error::InvalidParam(format!("{input:?} corresponds to q = {q}, outside [0, 1)")));
    }
    Ok(SqueezeSpec { q, s, db })
}

/// Decomposition of `T(β)|α⟩ = prob_factor · phase · |out_amplitude⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherentTeleportResult {
    /// `√P(β)`.
    pub prob_factor: f64,
    pub phase: C64,
    /// `qα + (g−q)β`.
    pub out_amplitude: ComplexAmplitude,
}

impl CoherentTeleportResult {
    pub fn density(&self) -> f64 {
        self.prob_factor * self.prob_factor
    }

    /// Unnormalized output vector in the number basis.
    pub fn to_fock(&self, cutoff: usize) -> FockVector {
        let amps = coherent_state(self.out_amplitude, cutoff).into_amplitudes() * (self.phase * self.prob_factor);
        FockVector::from_dvector(amps).expect("finite closed-form amplitudes")
    }
}

pub fn coherent_output_closed_form(
    params: &TeleportParams,
    alpha: ComplexAmplitude,
    beta: ComplexAmplitude,
) -> CoherentTeleportResult {
    let (q, g) = (params.q(), params.g());
    let loss = 1.0 - q * q;
    let prob_factor = params.prefactor() * (-loss * (alpha - beta).norm_sqr() / 2.0).exp();
    let phase = ((alpha * beta.conj() - beta * alpha.conj()) * ((1.0 - g * q) / 2.0)).exp();
    let out_amplitude = alpha * q + beta * (g - q);
    CoherentTeleportResult { prob_factor, phase, out_amplitude }
}

/// Density of the measurement fluctuation `φ = β − α` for a coherent input,
/// `(1−q²)/π · exp(−(1−q²)|φ|²)`.
pub fn fluctuation_density(q: f64, phi: ComplexAmplitude) -> f64 {
    let loss = 1.0 - q * q;
    loss / PI * (-loss * phi.norm_sqr()).exp()
}

/// `⟨|φ|²⟩ = 1/(1−q²)`.
pub fn fluctuation_second_moment(q: f64) -> f64 {
    1.0 / (1.0 - q * q)
}

/// Covariance of `Re φ` with `Re` of the output amplitude `gα + (g−q)φ`.
/// Its sign is the sign of `g − q`.
pub fn fluctuation_output_covariance(q: f64, g: f64) -> f64 {
    (g - q) * fluctuation_second_moment(q) / 2.0
}

/// Affine form of `T a† = (shift + scale·a†) T` at `g = q`, and the numeric
/// residual of that identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderCommutation {
    /// `(1−q²)β*`.
    pub shift: C64,
    /// `q`.
    pub scale: f64,
    /// `max |T a† − (shift + q a†) T|` on the `m, n ≤ N/2` block.
    pub residual: f64,
}

pub fn transfer_ladder_commutation(params: &TeleportParams, beta: ComplexAmplitude) -> Result<LadderCommutation> {
    let q = params.q();
    if params.g() != q {
        return Err(Error::InvalidParam(format!("commutation identity needs g = q, got g = {} and q = {q}", params.g())));
    }
    let shift = beta.conj() * (1.0 - q * q);
    let cutoff = params.cutoff();
    let t = build_transfer(params, beta)?;
    let t = t.entries();
    let (_, a_dag) = ladder_matrices(cutoff);
    let lhs = t * &a_dag;
    let rhs = t * shift + &a_dag * t * C64::new(q, 0.0);
    let half = cutoff / 2;
    let mut residual = 0.0f64;
    for m in 0..=half {
        for n in 0..=half {
            residual = residual.max((lhs[(m, n)] - rhs[(m, n)]).norm());
        }
    }
    Ok(LadderCommutation { shift, scale: q, residual })
}

/// `T(β)|n⟩` evaluated as
/// `√((1−q²)/(π n!)) e^{−(1−q²)|β|²/2} D((g−q)β) ((1−q²)β* + q a†)ⁿ |0⟩`,
/// with the operator polynomial expanded binomially in the number basis.
/// The returned vector is unnormalized; its squared norm is the outcome density.
pub fn number_state_output_closed_form(params: &TeleportParams, n: usize, beta: ComplexAmplitude) -> Result<FockVector> {
    let cutoff = params.cutoff();
    if 2 * n > cutoff {
        return Err(Error::CutoffExceeded { n, cutoff: cutoff / 2 });
    }
    let q = params.q();
    let loss = 1.0 - q * q;
    let shift = beta.conj() * loss;
    let ln_fact = ln_factorials(n);

    let mut poly = DVector::<C64>::zeros(cutoff + 1);
    for k in 0..=n {
        // C(n,k) √(k!) / √(n!)
        let coeff = (ln_fact[n] - ln_fact[k] - ln_fact[n - k] + 0.5 * ln_fact[k] - 0.5 * ln_fact[n]).exp();
        poly[k] = shift.powu((n - k) as u32) * q.powi(k as i32) * coeff;
    }
    let envelope = params.prefactor() * (-loss * beta.norm_sqr() / 2.0).exp();
    let out = displacement_matrix(beta * (params.g() - q), cutoff) * poly * C64::new(envelope, 0.0);
    FockVector::from_dvector(out)
}
