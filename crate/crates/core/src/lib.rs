//! Numerical toolkit for coherence resource theory under genuinely incoherent
//! operations (GIOs).
//!
//! The crate is organised bottom-up:
//!
//! * [`matcore`] dense complex matrices, Hermitian/symmetric Jacobi
//!   eigensolvers, Schur products.
//! * [`sdpcore`] a small ADMM semidefinite-program solver over Hermitian
//!   variables, plus a margin-based feasibility mode.
//! * [`channels`] density matrices, Schur channels, diagonal Kraus sets,
//!   Choi matrices with class constraints and the observable family Ω.
//! * [`measures`] ℓ₁ coherence, robustness of coherence and the `C_M`
//!   family over GIO/DIO/MIO.
//! * [`convert`] convertibility decisions and explicit channel constructions.

pub mod channels;
pub mod convert;
mod error;
pub mod matcore;
pub mod measures;
pub mod optim;
pub mod random;
pub mod sdpcore;

pub use error::{Error, Result};
pub use num_complex::Complex64;
