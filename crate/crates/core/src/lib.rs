//! Simulation toolkit for the one-sided matching (house allocation) problem.
//!
//! The crate provides:
//!
//! - domain types for valuation instances and random allocations
//!   ([`Instance`], [`Allocation`]), welfare arithmetic, and the
//!   Birkhoff-von Neumann decomposition;
//! - the optimal social welfare benchmark as a maximum-weight perfect
//!   matching ([`matching::optimal_welfare`]) with a brute-force oracle;
//! - the Random Priority mechanism: single-run execution, exact expected
//!   allocations by ordering enumeration, seeded Monte Carlo welfare
//!   estimates, and a truthfulness checker ([`rp`]);
//! - random instance generators for i.i.d. and independent non-identical
//!   value models ([`generators`]);
//! - closed-form threshold/tail/ratio bounds and their Monte Carlo
//!   counterparts, plus an adversarial instance search ([`analysis`]).
//!
//! All randomized operations are deterministic in their `(arguments, seed)`
//! pair: every sample, trial, and matrix cell draws from its own derived
//! PRNG stream and results are aggregated in index order, so outputs are
//! bit-identical regardless of thread count.

pub mod allocation;
pub mod analysis;
pub mod birkhoff;
pub mod error;
pub mod generators;
pub mod instance;
pub mod matching;
pub mod numeric;
pub mod rp;

pub(crate) mod seed;

pub use allocation::{social_welfare, utility, Allocation};
pub use birkhoff::{birkhoff_decompose, BirkhoffDecomposition};
pub use error::Error;
pub use instance::{validate_instance, Instance, Mode};
