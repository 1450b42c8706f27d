//! Truncated Fock-space simulation of continuous-variable quantum teleportation.
//!
//! The teleportation protocol with a two-mode squeezed resource of entanglement
//! `q` and output gain `g` is modelled by a single transfer operator
//! `T(β) = √((1−q²)/π) Σₙ qⁿ D(gβ)|n⟩⟨n|D(−β)`, which maps an input state to the
//! unnormalized conditional output for measurement outcome `β`. Its square
//! `T†T` is the POVM of the field-difference measurement.
//!
//! * [`fock`]: number-basis states, ladder operators and displacement matrices.
//! * [`transfer`]: numeric transfer operator, POVM, outcome densities and an
//!   independent entanglement-contraction route to the same conditional state.
//! * [`analytic`]: closed forms for coherent and number-state inputs, squeezing
//!   conversions, and the ladder-operator commutation identity at `g = q`.
//! * [`measurement`]: seeded outcome sampling, ensemble-averaged outputs,
//!   fidelity estimators and `(q, g)` sweeps.

pub mod analytic;
pub mod error;
pub mod fock;
pub mod input;
pub mod measurement;
pub mod quadrature;
pub mod transfer;

pub use error::{Error, Result};
pub use fock::{ComplexAmplitude, FockVector, OperatorMatrix};
pub use input::InputState;
pub use transfer::TeleportParams;

pub use num_complex::Complex64 as C64;
