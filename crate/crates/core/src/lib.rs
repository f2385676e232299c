//! Measurement dependence in Bell-type experiments.
//!
//! The crate is organised bottom-up:
//!
//! - [`hilbert`]: dense complex linear algebra and the Born rule for small systems.
//! - [`teleport`]: the single-qubit teleportation protocol over a shared Bell pair.
//! - [`lhv`]: finite local hidden-variable models whose hidden-variable distribution
//!   may depend on the measurement settings.
//! - [`infotheory`]: discrete entropies, mutual information and the correlation
//!   measure of dependence between hidden variables and settings.
//! - [`inequalities`]: CHSH and KCBS evaluators, quantum predictions and brute-force
//!   classical bounds.
//! - [`mdsearch`]: annealing search for the least setting dependence that reaches a
//!   CHSH target, and the budget/CHSH tradeoff curve.
//! - [`io`]: JSON file formats shared with the command-line tool.

pub mod error;
pub mod hilbert;
pub mod inequalities;
pub mod infotheory;
pub mod io;
pub mod lhv;
pub mod mdsearch;
pub mod numeric;
pub mod teleport;

pub use error::{Error, Result};
