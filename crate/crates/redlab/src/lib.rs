//! Desk-scale laboratory for inverting samplers and learners with a SAT
//! oracle.
//!
//! The pieces fit together in one pipeline: boolean circuits over named
//! input groups ([`circuit`]) compile to CNF ([`cnf`]) and are decided by a
//! verifying oracle ([`oracle`]) built on a small CDCL solver ([`cdcl`]).
//! On top of the oracle sit bit-by-bit inversion and near-uniform witness
//! generation ([`witness`]), concept classes with checkable structure
//! ([`concepts`], [`rscode`]), circuit-shaped samplers and learners
//! ([`samplers`], [`learners`]), target functions with a promise gap
//! ([`targets`]), and the identification-to-evaluation reductions that the
//! whole laboratory exists to exercise ([`reductions`]). Every experiment
//! is small enough to validate against brute force ([`harness`]).

pub mod bits;
pub mod cdcl;
pub mod circuit;
pub mod cnf;
pub mod harness;
pub mod learners;
pub mod oracle;
pub mod concepts;
pub mod reductions;
pub mod rscode;
pub mod samplers;
pub mod targets;
pub mod witness;

pub use bits::BitString;
