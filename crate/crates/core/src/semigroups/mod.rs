//! The two Markov semigroup examples at desk scale.
//!
//! * [`threegap`] irrational-translation partitions and their block-algebra
//!   model;
//! * [`amplifier`] the ideal quantum linear amplifier on a truncated Fock
//!   space;
//! * [`markov`] induced Markov processes of experiments;
//! * [`suite`] the verification suites driven by the CLI and the acceptance
//!   tests.

pub mod amplifier;
pub mod markov;
pub mod quadrature;
pub mod suite;
pub mod threegap;

pub use amplifier::{
    amplifier_conjugate_element, amplifier_kraus, bargmann_channel, coherent_state, q_function, semigroup_check,
    smoothing_defect, AmplifierParams, QFunctionGrid,
};
pub use markov::{amplifier_markov_diagnostics, markov_diagnostics, AmplifierMarkovRow, MarkovRow};
pub use quadrature::PolarGrid;
pub use threegap::{
    partition_block_algebras, partition_block_algebras_in, partition_max_gap, threegap_partition, ThreeGapPartition,
};
