//! Readout-error unfolding for quantum-computer measurements.
//!
//! A measured histogram `m` over basis states relates to the true histogram
//! `t` through a column-stochastic response matrix `R`: `m = R t`, where
//! `R[i][j]` is the probability of measuring state `i` when the register
//! truly holds state `j`. This crate builds response matrices (from
//! calibration runs, per-qubit flip-rate models, or analytic band
//! structures), inverts the relation with three estimators (direct matrix
//! inversion, norm-preserving non-negative least squares, and iterative
//! Bayesian unfolding), fits flip-rate noise models to measured matrices,
//! and quantifies the statistical and systematic uncertainties of the
//! unfolded result, including a data-driven recommendation for the
//! iteration count of the iterative method.
//!
//! Conventions used throughout:
//!
//! * Qubit `q` contributes bit `2^q` to a state index; printed bitstrings
//!   put the highest qubit first.
//! * Matrices act on column vectors of per-state weights; columns of a
//!   response matrix sum to 1.
//! * Histograms with a power-of-two length are treated as registers of
//!   qubits; other lengths are plain binned spectra, for which the
//!   qubit-specific operations are unavailable.
//! * Everything stochastic takes an explicit seed and is reproducible
//!   bit-for-bit, independent of thread count.

pub mod error;
pub mod io;
pub mod noisefit;
pub mod response;
mod rng;
pub mod sim;
pub mod types;
pub mod uncertainty;
pub mod unfold;

pub use error::{Error, Result};
pub use types::{CountVector, ProbabilityVector, ResponseMatrix, StateIndex};
