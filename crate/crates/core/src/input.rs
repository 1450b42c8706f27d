//! Named input states.

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::fock::{coherent_state, number_state, ComplexAmplitude, FockVector};

#[derive(Clone, Debug, PartialEq)]
pub enum InputState {
    Coherent(ComplexAmplitude),
    Number(usize),
    /// Even cat `(|α⟩ + |−α⟩)/√(2(1 + e^{−2|α|²}))`.
    Cat(ComplexAmplitude),
    Custom(FockVector),
}

impl InputState {
    /// Amplitudes at the given cutoff. Coherent and cat states are truncated
    /// without renormalization; custom vectors are zero-padded or truncated.
    pub fn to_fock(&self, cutoff: usize) -> Result<FockVector> {
        match self {
            InputState::Coherent(alpha) => Ok(coherent_state(*alpha, cutoff)),
            InputState::Number(n) => number_state(*n, cutoff),
            InputState::Cat(alpha) => {
                let norm = (2.0 * (1.0 + (-2.0 * alpha.norm_sqr()).exp())).sqrt();
                let sum = coherent_state(*alpha, cutoff).into_amplitudes() + coherent_state(-alpha, cutoff).into_amplitudes();
                FockVector::from_dvector(sum.unscale(norm))
            }
            InputState::Custom(v) => Ok(v.with_cutoff(cutoff)),
        }
    }

    pub fn coherent_amplitude(&self) -> Option<C64> {
        match self {
            InputState::Coherent(alpha) => Some(*alpha),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::NORM_TOL;

    #[test]
    fn cat_is_normalized_and_even() {
        let cat = InputState::Cat(C64::new(1.2, 0.5)).to_fock(60).unwrap();
        assert!(cat.is_normalized(NORM_TOL));
        for n in (1..=60).step_by(2) {
            assert!(cat.amplitudes()[n].norm() < 1e-15);
        }
    }

    #[test]
    fn custom_vector_resized() {
        let v = FockVector::from_amplitudes(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let psi = InputState::Custom(v).to_fock(5).unwrap();
        assert_eq!(psi.cutoff(), 5);
        assert!(psi.is_normalized(NORM_TOL));
        assert_eq!(InputState::Number(2).coherent_amplitude(), None);
    }
}
