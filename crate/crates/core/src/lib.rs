//! Finite-dimensional toolkit for the randomization (post-processing) order
//! of quantum channels and statistical experiments.
//!
//! * [`linalg`] dense complex matrix primitives
//! * [`channels`] Kraus / Choi / Stinespring forms, composition, conjugates
//! * [`algebra`] finite-dimensional *-subalgebras of `M_d`
//! * [`order`] feasibility engine deciding `Λ ⪯ Γ` over Choi matrices
//! * [`experiments`] statistical experiments, cocycles, minimal sufficiency
//! * [`semigroups`] the irrational-translation partition model and the
//!   ideal quantum linear amplifier on a truncated Fock space
//! * [`io`] JSON formats for channels, experiments and verdicts

pub mod algebra;
pub mod channels;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod order;
pub mod random;
pub mod semigroups;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
