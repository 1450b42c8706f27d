//! Single-mode bosonic states and operators in a truncated number basis.
//!
//! A state with cutoff `N` lives in the span of `|0⟩..|N⟩`. Truncation is never
//! hidden: constructors return the truncated amplitudes as they are and
//! [`FockVector::truncation_weight`] reports the probability that fell outside
//! the cutoff.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// A complex field amplitude (α, β, φ) in units where `[a, a†] = 1`.
pub type ComplexAmplitude = C64;

/// Dense operator in the number basis, `(N+1) × (N+1)`.
pub type OperatorMatrix = DMatrix<C64>;

/// Default tolerance on `|‖ψ‖² − 1|` for states that must be normalized.
pub const NORM_TOL: f64 = 1e-9;

/// Pure single-mode state as amplitudes over `|0⟩..|N⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    amps: DVector<C64>,
}

impl FockVector {
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        Self::from_dvector(DVector::from_vec(amps))
    }

    pub fn from_dvector(amps: DVector<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidInput("a Fock vector needs at least one amplitude".into()));
        }
        if amps.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite amplitude".into()));
        }
        Ok(Self { amps })
    }

    /// The zero vector with the given cutoff.
    pub fn zeros(cutoff: usize) -> Self {
        Self { amps: DVector::zeros(cutoff + 1) }
    }

    pub fn cutoff(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `1 − Σ|cₙ|²`: weight missing from a state that should be normalized.
    pub fn truncation_weight(&self) -> f64 {
        1.0 - self.norm_sqr()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// Rescaled copy with unit norm, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        Some(Self { amps: self.amps.unscale(norm) })
    }

    /// Zero-pads or truncates to a new cutoff.
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let mut amps = DVector::zeros(cutoff + 1);
        let keep = self.dim().min(cutoff + 1);
        amps.rows_mut(0, keep).copy_from(&self.amps.rows(0, keep));
        Self { amps }
    }

    /// Smallest `K` such that `Σ_{n≥K} |cₙ|²` is below double-precision
    /// resolution of a unit vector. Operators acting on the state only need
    /// their first `K` columns.
    pub fn effective_support(&self) -> usize {
        let mut tail = 0.0;
        for (n, c) in self.amps.iter().enumerate().rev() {
            tail += c.norm_sqr();
            if tail > 1e-34 {
                return n + 1;
            }
        }
        1
    }

    /// `⟨ψ|a|ψ⟩`.
    pub fn mean_amplitude(&self) -> C64 {
        (1..self.dim())
            .map(|n| self.amps[n - 1].conj() * self.amps[n] * (n as f64).sqrt())
            .sum()
    }

    /// `⟨ψ|a†a|ψ⟩`.
    pub fn mean_photon_number(&self) -> f64 {
        self.amps.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum()
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &FockVector) -> Result<f64> {
        Ok(inner_product(self, other)?.norm_sqr())
    }

    pub fn apply(&self, op: &OperatorMatrix) -> Result<FockVector> {
        if op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { left: op.ncols(), right: self.dim() });
        }
        Ok(FockVector { amps: op * &self.amps })
    }
}

/// `ln n!` for `n = 0..=max`.
pub(crate) fn ln_factorials(max: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(max + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for n in 1..=max {
        acc += (n as f64).ln();
        table.push(acc);
    }
    table
}

pub fn number_state(n: usize, cutoff: usize) -> Result<FockVector> {
    if n > cutoff {
        return Err(Error::CutoffExceeded { n, cutoff });
    }
    let mut amps = DVector::zeros(cutoff + 1);
    amps[n] = C64::new(1.0, 0.0);
    Ok(FockVector { amps })
}

/// Coherent state `|α⟩` truncated at `cutoff`, amplitudes
/// `e^{−|α|²/2} αⁿ/√n!` evaluated in log space. The result is not renormalized.
pub fn coherent_state(alpha: ComplexAmplitude, cutoff: usize) -> FockVector {
    let x = alpha.norm_sqr();
    if x > cutoff as f64 / 4.0 {
        log::warn!(
            "coherent amplitude |α|² = {x:.3} is large for cutoff {cutoff}; truncation weight may be significant"
        );
    }
    let mut amps = DVector::zeros(cutoff + 1);
    if x == 0.0 {
        amps[0] = C64::new(1.0, 0.0);
        return FockVector { amps };
    }
    let ln_r = alpha.norm().ln();
    let theta = alpha.arg();
    let ln_fact = ln_factorials(cutoff);
    for n in 0..=cutoff {
        let nf = n as f64;
        let modulus = (-0.5 * x + nf * ln_r - 0.5 * ln_fact[n]).exp();
        amps[n] = C64::from_polar(modulus, nf * theta);
    }
    FockVector { amps }
}

/// `(a, a†)` with `⟨n−1|a|n⟩ = √n`.
pub fn ladder_matrices(cutoff: usize) -> (OperatorMatrix, OperatorMatrix) {
    let dim = cutoff + 1;
    let mut a = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let a_dag = a.adjoint();
    (a, a_dag)
}

pub fn inner_product(u: &FockVector, v: &FockVector) -> Result<C64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch { left: u.cutoff(), right: v.cutoff() });
    }
    Ok(u.amps.dotc(&v.amps))
}

/// Matrix of `⟨m|D(β)|n⟩` for `0 ≤ m, n ≤ cutoff`.
pub fn displacement_matrix(beta: ComplexAmplitude, cutoff: usize) -> OperatorMatrix {
    displacement_block(beta, cutoff + 1, cutoff + 1)
}

/// The `rows × cols` corner of the displacement operator, `⟨m|D(β)|n⟩` for
/// `m < rows`, `n < cols`. Every entry is the exact matrix element of the
/// untruncated operator.
///
/// For `m ≥ n` the element is `√(n!/m!) β^{m−n} e^{−|β|²/2} L_n^{(m−n)}(|β|²)`;
/// entries above the diagonal follow from `D(β)† = D(−β)`. Each diagonal
/// `k = |m − n|` is generated by a Laguerre recurrence that carries the
/// factorial and exponential prefactors along with it, so the running values
/// are the (bounded) matrix elements themselves.
pub fn displacement_block(beta: ComplexAmplitude, rows: usize, cols: usize) -> DMatrix<C64> {
    let mut d = DMatrix::zeros(rows, cols);
    let x = beta.norm_sqr();
    let theta = beta.arg();
    let mut diag = Vec::with_capacity(rows.max(cols));

    // on and below the diagonal: m = n + k
    for k in 0..rows {
        let len = cols.min(rows - k);
        if len == 0 {
            break;
        }
        laguerre_diagonal(x, k, len, &mut diag);
        let phase = C64::from_polar(1.0, k as f64 * theta);
        for (n, &f) in diag.iter().enumerate() {
            d[(n + k, n)] = phase * f;
        }
    }
    // above the diagonal: n = m + k, elements carry (−β*)^k
    for k in 1..cols {
        let len = rows.min(cols - k);
        if len == 0 {
            break;
        }
        laguerre_diagonal(x, k, len, &mut diag);
        let phase = C64::from_polar(1.0, k as f64 * (PI - theta));
        for (m, &f) in diag.iter().enumerate() {
            d[(m, m + k)] = phase * f;
        }
    }
    d
}

/// Fills `out` with `fⱼ = √(j!/(j+k)!) x^{k/2} e^{−x/2} L_j^{(k)}(x)` for
/// `j = 0..len`.
fn laguerre_diagonal(x: f64, k: usize, len: usize, out: &mut Vec<f64>) {
    out.clear();
    if x == 0.0 {
        out.resize(len, if k == 0 { 1.0 } else { 0.0 });
        return;
    }
    const RESCALE: f64 = 1e150;
    let kf = k as f64;
    let ln_k_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    // fⱼ = s · exp(log_scale)
    let mut log_scale = 0.5 * kf * x.ln() - 0.5 * x - 0.5 * ln_k_fact;
    let mut scale = log_scale.exp();
    let mut prev = 0.0;
    let mut cur = 1.0;
    out.push(cur * scale);
    for j in 0..len.saturating_sub(1) {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + kf - x) * cur - (jf * (jf + kf)).sqrt() * prev)
            / ((jf + 1.0) * (jf + kf + 1.0)).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += RESCALE.ln();
            scale = log_scale.exp();
        }
        out.push(cur * scale);
    }
}
